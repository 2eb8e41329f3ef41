use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Check, ExperimentResult, Provenance, Recorder};
use crate::error::{Error, Result};
use crate::inequality::{canonicalize_integer_rows, QuadraticInequality};
use crate::nsbox::catalog::{cg3322_family, cg3322_p1, cg3322_p2, cg3322_pn, local_deterministic};
use crate::nsbox::NsBox;
use crate::protocol::{digit, Protocol};

/// Printed optimum, rows per Bob setting `i` over Alice settings `j`.
pub const I3322_TARGET: [[i64; 3]; 3] = [[0, 1, 1], [2, -1, 1], [2, 1, -1]];

/// Macroscopic-locality bound on the functional, quoted for comparison.
pub const ML_BOUND: f64 = 0.2;

// Collins-Gisin I3322 with local bound 0: Alice marginals, Bob marginals, joint[x][y].
const MARG_A: [f64; 3] = [-1.0, 0.0, 0.0];
const MARG_B: [f64; 3] = [-2.0, -1.0, 0.0];
const JOINT: [[f64; 3]; 3] = [[1.0, 1.0, 1.0], [1.0, 1.0, -1.0], [1.0, -1.0, 0.0]];

/// The Collins-Gisin I3322 expression read through a relabeling of settings and outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct I3322Functional {
    pub swap_parties: bool,
    pub perm_a: [usize; 3],
    pub perm_b: [usize; 3],
    pub flip_a: [usize; 3],
    pub flip_b: [usize; 3],
}

fn relabel(bx: &NsBox, f: &I3322Functional) -> [[[[f64; 2]; 2]; 3]; 3] {
    let mut out = [[[[0.0; 2]; 2]; 3]; 3];
    for x in 0..3 {
        for y in 0..3 {
            for a in 0..2 {
                for b in 0..2 {
                    let v = if f.swap_parties {
                        bx.prob(b, a, y, x)
                    } else {
                        bx.prob(a, b, x, y)
                    };
                    out[f.perm_a[x]][f.perm_b[y]][a ^ f.flip_a[x]][b ^ f.flip_b[y]] = v;
                }
            }
        }
    }
    out
}

/// Value of the functional on a 3322 box.
pub fn i3322_value(bx: &NsBox, f: &I3322Functional) -> Result<f64> {
    if (bx.n_a(), bx.n_b(), bx.d_a(), bx.d_b()) != (3, 3, 2, 2) {
        return Err(Error::ShapeMismatch("I3322 needs a 3322 box".into()));
    }
    let p = relabel(bx, f);
    let mut v = 0.0;
    for x in 0..3 {
        v += MARG_A[x] * (p[x][0][0][0] + p[x][0][0][1]);
        v += MARG_B[x] * (p[0][x][0][0] + p[0][x][1][0]);
        for y in 0..3 {
            v += JOINT[x][y] * p[x][y][0][0];
        }
    }
    Ok(v)
}

fn local_bound(f: &I3322Functional) -> Result<f64> {
    let mut best = f64::MIN;
    for sa in 0..8usize {
        for sb in 0..8usize {
            let a: Vec<usize> = (0..3).map(|x| (sa >> x) & 1).collect();
            let b: Vec<usize> = (0..3).map(|y| (sb >> y) & 1).collect();
            best = best.max(i3322_value(&local_deterministic(&a, &b, 2)?, f)?);
        }
    }
    Ok(best)
}

fn permutations() -> Vec<[usize; 3]> {
    vec![[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
}

/// First relabeling, in a fixed order, with `I(p1) = I(p2) = 1`, `I(pN) = -1` and local bound 0.
pub fn calibrate_i3322() -> Result<I3322Functional> {
    let (p1, p2, pn) = (cg3322_p1(), cg3322_p2(), cg3322_pn());
    let bits = |m: usize| [m & 1, (m >> 1) & 1, (m >> 2) & 1];
    for swap_parties in [false, true] {
        for perm_a in permutations() {
            for perm_b in permutations() {
                for fa in 0..8 {
                    for fb in 0..8 {
                        let f = I3322Functional {
                            swap_parties,
                            perm_a,
                            perm_b,
                            flip_a: bits(fa),
                            flip_b: bits(fb),
                        };
                        let ok = (i3322_value(&p1, &f)? - 1.0).abs() < 1e-12
                            && (i3322_value(&p2, &f)? - 1.0).abs() < 1e-12
                            && (i3322_value(&pn, &f)? + 1.0).abs() < 1e-12
                            && local_bound(&f)?.abs() < 1e-12;
                        if ok {
                            return Ok(f);
                        }
                    }
                }
            }
        }
    }
    Err(Error::Domain("no relabeling of I3322 matches the calibration points".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Search3322 {
    pub protocols: usize,
    /// `E_{j,i}` with `e(p_c) = c E`, indexed `[i][j]`.
    pub bias_direction: Vec<Vec<f64>>,
    pub max_k: f64,
    pub min_c_bound: f64,
    /// Canonical keys of every protocol inequality attaining `max_k`, rows per `i`.
    pub optima: Vec<Vec<Vec<i64>>>,
}

#[derive(Default)]
struct Partial {
    k: f64,
    keys: BTreeSet<Vec<Vec<i64>>>,
}

impl Partial {
    fn offer(&mut self, k: f64, key: impl FnOnce() -> Vec<Vec<i64>>) {
        if k > self.k + 1e-9 {
            self.k = k;
            self.keys.clear();
            self.keys.insert(key());
        } else if (k - self.k).abs() <= 1e-9 {
            self.keys.insert(key());
        }
    }

    fn merge(mut self, other: Partial) -> Partial {
        if other.k > self.k + 1e-9 {
            return other;
        }
        if (other.k - self.k).abs() <= 1e-9 {
            self.keys.extend(other.keys);
        }
        self
    }
}

// (-1)^{k_i} per input rank and Bob setting
fn input_signs() -> Vec<[i64; 3]> {
    (0..8)
        .map(|k| [0, 1, 2].map(|i| if digit(k, i, 2) == 0 { 1 } else { -1 }))
        .collect()
}

// c[j][i] for f given as a table and h as a bit mask
fn coefficients(f: &[usize], h: usize, sign: &[[i64; 3]]) -> [[i64; 3]; 3] {
    let mut c = [[0i64; 3]; 3];
    for k in 0..8 {
        let s = if (h >> k) & 1 == 0 { 1 } else { -1 };
        for i in 0..3 {
            c[f[k]][i] += s * sign[k][i];
        }
    }
    c
}

fn canonical_rows(c: &[[i64; 3]; 3]) -> Vec<Vec<i64>> {
    canonicalize_integer_rows((0..3).map(|i| (0..3).map(|j| c[j][i]).collect()).collect())
}

/// Exhaustive search over `f: [2]^3 -> [3]` and `h: [2]^3 -> [2]` with `r = 0`.
///
/// For each protocol the inequality `sum_i (sum_j c_{j,i} e_{j,i})^2 <= 64` evaluated on
/// `e = c E` gives `c <= 8 / sqrt(K)` with `K = sum_i (sum_j c_{j,i} E_{j,i})^2`.
pub fn search_3322() -> Result<Search3322> {
    let e1 = cg3322_family(1.0)?.biases()?;
    let e0 = cg3322_family(0.0)?.biases()?;
    let dir: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| e1.e(j, i) - e0.e(j, i)).collect())
        .collect();
    let sign = input_signs();
    let n_f = 3usize.pow(8);
    let best = (0..n_f)
        .into_par_iter()
        .fold(Partial::default, |mut acc, fi| {
            let f: Vec<usize> = (0..8).map(|k| digit(fi, k, 3)).collect();
            for hi in 0..256usize {
                let c = coefficients(&f, hi, &sign);
                let kval: f64 = (0..3)
                    .map(|i| {
                        let b: f64 = (0..3).map(|j| c[j][i] as f64 * dir[i][j]).sum();
                        b * b
                    })
                    .sum();
                acc.offer(kval, || canonical_rows(&c));
            }
            acc
        })
        .reduce(Partial::default, Partial::merge);
    let max_k = best.k;
    Ok(Search3322 {
        protocols: n_f * 256,
        bias_direction: dir,
        max_k,
        min_c_bound: if max_k > 0.0 { 8.0 / max_k.sqrt() } else { f64::INFINITY },
        optima: best.keys.into_iter().collect(),
    })
}

fn target_inequality() -> Result<QuadraticInequality> {
    let rows: Vec<Vec<f64>> = I3322_TARGET
        .iter()
        .map(|r| r.iter().map(|&x| x as f64).collect())
        .collect();
    QuadraticInequality::binary(&rows, 16.0, "i3322_target", Default::default())
}

pub fn repro_3322() -> Result<ExperimentResult> {
    use Provenance::{DerivedOracle, Published};
    let mut rec = Recorder::new("3322");

    let s = search_3322()?;
    rec.check(Check::equal("protocols searched", 1_679_616, s.protocols, DerivedOracle));
    rec.check(Check::close("min c bound", 2.0 / 3.0, s.min_c_bound, 1e-12, Published));
    let i_bound = 2.0 * s.min_c_bound - 1.0;
    rec.check(Check::close("I3322 bound 2c-1", 1.0 / 3.0, i_bound, 1e-12, Published));
    let target: Vec<Vec<i64>> = canonicalize_integer_rows(I3322_TARGET.iter().map(|r| r.to_vec()).collect());
    rec.check(Check::holds("target optimum among optima", s.optima.contains(&target), Published));
    rec.check(Check::holds("macroscopic locality bound is tighter", ML_BOUND < i_bound, Published));

    // p_c biases: e_{0,0} = 0 and |e| = c elsewhere
    let c = 0.37;
    let e = cg3322_family(c)?.biases()?;
    let pattern_ok = (0..3).all(|j| {
        (0..3).all(|i| {
            let v = e.e(j, i);
            if (j, i) == (0, 0) {
                v.abs() < 1e-12
            } else {
                (v.abs() - c).abs() < 1e-12
            }
        })
    });
    rec.check(Check::holds("p_c bias pattern", pattern_ok, DerivedOracle));
    let t = target_inequality()?;
    rec.check(Check::close("target optimum at p_c is 36 c^2", 36.0 * c * c, t.lhs(&e)?, 1e-12, DerivedOracle));

    let f = calibrate_i3322()?;
    let mut worst: f64 = 0.0;
    for k in 0..=10 {
        let c = k as f64 / 10.0;
        worst = worst.max((i3322_value(&cg3322_family(c)?, &f)? - (2.0 * c - 1.0)).abs());
    }
    rec.check(Check::at_most("calibrated I(p_c) = 2c - 1", 1e-12, worst, Published));
    rec.check(Check::close("calibrated local bound", 0.0, local_bound(&f)?, 1e-12, DerivedOracle));

    rec.value("max_k", s.max_k);
    rec.value("min_c_bound", s.min_c_bound);
    rec.value("i3322_bound", i_bound);
    rec.value("ml_bound", ML_BOUND);
    rec.value("optima_count", s.optima.len());
    rec.value("optima", &s.optima);
    rec.value("bias_direction", &s.bias_direction);
    rec.value("i3322_relabeling", &f);
    rec.value("example_protocol", example_protocol(&target)?);
    Ok(rec.finish())
}

/// Some protocol whose canonical inequality is `key`.
fn example_protocol(key: &[Vec<i64>]) -> Result<Option<Protocol>> {
    let sign = input_signs();
    for fi in 0..3usize.pow(8) {
        let f: Vec<usize> = (0..8).map(|k| digit(fi, k, 3)).collect();
        for hi in 0..256usize {
            if canonical_rows(&coefficients(&f, hi, &sign)) == key {
                let h = (0..8).map(|k| (hi >> k) & 1).collect();
                return Ok(Some(Protocol::new(3, 2, 3, f, h, vec![0; 3])?));
            }
        }
    }
    Ok(None)
}
