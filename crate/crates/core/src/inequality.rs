//! Quadratic Bell inequalities `sum_i |sum_{j,m} w^m_{j,i} e^m_{j,i}|^2 <= bound`.
//!
//! Binary inequalities are stored with `w^0 = c`, `w^1 = 0`; since `e^1 = -e^0` this gives
//! `sum_i (sum_j c_{j,i} e_{j,i})^2`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::nsbox::{BiasTable, DEFAULT_TOL};
use crate::protocol::{coefficients_nn22, coefficients_nndd, Protocol};

/// Phase used by the d-ary protocol family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    /// `w^m = sum_l c^l w^{(m - l) t}`, the transform of the noiseless error distribution.
    #[default]
    Derived,
    /// `w^m = sum_l c^l w^{(l + m) t}`.
    Displayed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticInequality {
    n_a: usize,
    n_b: usize,
    d: usize,
    // per i, flattened [j][m]
    coeffs: Vec<Vec<Complex64>>,
    bound: f64,
    family: String,
    params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InequalityFile {
    family: String,
    params: BTreeMap<String, Value>,
    bound: f64,
    n_a: usize,
    n_b: usize,
    d: usize,
    coeffs: Vec<Vec<[f64; 2]>>,
}

impl Serialize for QuadraticInequality {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        InequalityFile {
            family: self.family.clone(),
            params: self.params.clone(),
            bound: self.bound,
            n_a: self.n_a,
            n_b: self.n_b,
            d: self.d,
            coeffs: self
                .coeffs
                .iter()
                .map(|v| v.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuadraticInequality {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let f = InequalityFile::deserialize(de)?;
        let coeffs = f
            .coeffs
            .into_iter()
            .map(|v| v.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
            .collect();
        QuadraticInequality::new(f.n_a, f.n_b, f.d, coeffs, f.bound, f.family, f.params)
            .map_err(serde::de::Error::custom)
    }
}

/// Result of evaluating one inequality on one bias table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub lhs: f64,
    pub bound: f64,
    pub violation: f64,
    pub violated: bool,
}

fn root(d: usize, x: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (x % d) as f64 / d as f64)
}

fn binary_coeffs(per_i: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
    per_i
        .iter()
        .map(|v| {
            v.iter()
                .flat_map(|&c| [Complex64::new(c, 0.0), Complex64::new(0.0, 0.0)])
                .collect()
        })
        .collect()
}

impl QuadraticInequality {
    pub fn new(
        n_a: usize,
        n_b: usize,
        d: usize,
        coeffs: Vec<Vec<Complex64>>,
        bound: f64,
        family: impl Into<String>,
        params: BTreeMap<String, Value>,
    ) -> Result<Self> {
        if coeffs.len() != n_b || coeffs.iter().any(|v| v.len() != n_a * d) {
            return Err(Error::ShapeMismatch(format!(
                "expected {n_b} coefficient vectors of length {}",
                n_a * d
            )));
        }
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(Error::Domain(format!("bound {bound} must be positive")));
        }
        Ok(QuadraticInequality {
            n_a,
            n_b,
            d,
            coeffs,
            bound,
            family: family.into(),
            params,
        })
    }

    /// Binary inequality from real coefficients `per_i[i][j] = c_{j,i}`.
    pub fn binary(
        per_i: &[Vec<f64>],
        bound: f64,
        family: impl Into<String>,
        params: BTreeMap<String, Value>,
    ) -> Result<Self> {
        let n_a = per_i.first().map_or(0, Vec::len);
        Self::new(n_a, per_i.len(), 2, binary_coeffs(per_i), bound, family, params)
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }
    pub fn n_b(&self) -> usize {
        self.n_b
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn bound(&self) -> f64 {
        self.bound
    }
    pub fn family(&self) -> &str {
        &self.family
    }
    pub fn params(&self) -> &BTreeMap<String, Value> {
        &self.params
    }
    pub fn coeffs(&self) -> &[Vec<Complex64>] {
        &self.coeffs
    }

    /// `w^m_{j,i}`.
    pub fn coeff(&self, j: usize, i: usize, m: usize) -> Complex64 {
        self.coeffs[i][j * self.d + m]
    }

    fn check(&self, e: &BiasTable) -> Result<()> {
        if e.n_a() != self.n_a || e.n_b() != self.n_b || e.d() != self.d {
            return Err(Error::ShapeMismatch(format!(
                "inequality is {}x{} over d={}, biases are {}x{} over d={}",
                self.n_a,
                self.n_b,
                self.d,
                e.n_a(),
                e.n_b(),
                e.d()
            )));
        }
        Ok(())
    }

    /// Per-i bracket `sum_{j,m} w^m_{j,i} e^m_{j,i}`.
    pub fn brackets(&self, e: &BiasTable) -> Result<Vec<Complex64>> {
        self.check(e)?;
        Ok((0..self.n_b)
            .map(|i| {
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..self.n_a {
                    for m in 0..self.d {
                        s += self.coeff(j, i, m) * e.get(j, i, m);
                    }
                }
                s
            })
            .collect())
    }

    pub fn lhs(&self, e: &BiasTable) -> Result<f64> {
        Ok(self.brackets(e)?.iter().map(|z| z.norm_sqr()).sum())
    }

    /// Coefficient vectors with the per-(j,i) mean over `m` removed. Two coefficient sets
    /// with equal reduced vectors agree on every bias table.
    pub fn reduced(&self) -> Vec<Vec<Complex64>> {
        let d = self.d;
        self.coeffs
            .iter()
            .map(|v| {
                v.chunks(d)
                    .flat_map(|cell| {
                        let mean = cell.iter().sum::<Complex64>() / d as f64;
                        cell.iter().map(move |z| z - mean)
                    })
                    .collect()
            })
            .collect()
    }

    /// Real coefficients `c_{j,i} = w^0 - w^1` of a binary inequality, indexed `[i][j]`.
    pub fn binary_coefficients(&self) -> Result<Vec<Vec<f64>>> {
        if self.d != 2 {
            return Err(Error::AlphabetMismatch {
                expected: 2,
                got: self.d,
            });
        }
        let mut out = Vec::with_capacity(self.n_b);
        for (i, v) in self.coeffs.iter().enumerate() {
            let row: Vec<Complex64> = v.chunks(2).map(|c| c[0] - c[1]).collect();
            // undo a global phase of the bracket
            let pivot = row.iter().copied().fold(Complex64::new(0.0, 0.0), |a, z| {
                if z.norm() > a.norm() + 1e-12 {
                    z
                } else {
                    a
                }
            });
            let phase = if pivot.norm() > 0.0 {
                let p = pivot / pivot.norm();
                if p.re < -1e-12 { -p } else { p }
            } else {
                Complex64::new(1.0, 0.0)
            };
            let rot: Vec<Complex64> = row.iter().map(|z| z / phase).collect();
            if rot.iter().any(|z| z.im.abs() > 1e-9 * (1.0 + z.norm())) {
                return Err(Error::Domain(format!("bracket {i} is not real up to a phase")));
            }
            out.push(rot.iter().map(|z| z.re).collect());
        }
        Ok(out)
    }

    /// Returns `lambda` with `lhs_self = lambda * lhs_other` identically, if it exists.
    pub fn lhs_scale_to(&self, other: &QuadraticInequality, tol: f64) -> Option<f64> {
        if self.n_a != other.n_a || self.n_b != other.n_b || self.d != other.d {
            return None;
        }
        let (a, b) = (self.reduced(), other.reduced());
        let mut lambda: Option<f64> = None;
        for (u, v) in a.iter().zip(&b) {
            let nu: f64 = u.iter().map(|z| z.norm_sqr()).sum();
            let nv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            if nv < tol * tol {
                if nu > tol * tol {
                    return None;
                }
                continue;
            }
            let ratio = nu / nv;
            // u = mu * phase * v with |mu|^2 = ratio
            let inner: Complex64 = u.iter().zip(v).map(|(x, y)| x * y.conj()).sum();
            let coef = inner / nv;
            let resid = u
                .iter()
                .zip(v)
                .map(|(x, y)| (x - coef * y).norm())
                .fold(0.0, f64::max);
            if resid > tol * (1.0 + nu.sqrt()) {
                return None;
            }
            match lambda {
                None => lambda = Some(ratio),
                Some(l) if (l - ratio).abs() <= tol * (1.0 + l) => {}
                _ => return None,
            }
        }
        lambda.or(Some(1.0))
    }

    /// Integer key of a binary inequality: per-i sign fixed by the first nonzero entry,
    /// then a common gcd removed. Bob's setting order is kept.
    pub fn canonical_key(&self) -> Result<Vec<Vec<i64>>> {
        let rows = self.binary_coefficients()?;
        let mut ints: Vec<Vec<i64>> = Vec::with_capacity(rows.len());
        for row in rows {
            let mut v = Vec::with_capacity(row.len());
            for x in row {
                let r = x.round();
                if (x - r).abs() > 1e-9 {
                    return Err(Error::Domain(format!("coefficient {x} is not an integer")));
                }
                v.push(r as i64);
            }
            ints.push(v);
        }
        Ok(canonicalize_integer_rows(ints))
    }

    pub fn evaluate(&self, e: &BiasTable) -> Result<Evaluation> {
        self.evaluate_with_tol(e, DEFAULT_TOL)
    }

    pub fn evaluate_with_tol(&self, e: &BiasTable, tol: f64) -> Result<Evaluation> {
        let lhs = self.lhs(e)?;
        let violation = lhs - self.bound;
        Ok(Evaluation {
            lhs,
            bound: self.bound,
            violation,
            violated: violation > tol,
        })
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Sign and gcd normalization of integer rows, as used by [`QuadraticInequality::canonical_key`].
pub fn canonicalize_integer_rows(mut rows: Vec<Vec<i64>>) -> Vec<Vec<i64>> {
    for row in rows.iter_mut() {
        if row.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) {
            row.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let g = rows.iter().flatten().fold(0, |g, &x| gcd(g, x));
    if g > 1 {
        rows.iter_mut().flatten().for_each(|x| *x /= g);
    }
    rows
}

fn params(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// `(e00 + e10)^2 + (e01 - e11)^2 <= 4`.
pub fn uffink() -> QuadraticInequality {
    QuadraticInequality::binary(&[vec![1.0, 1.0], vec![1.0, -1.0]], 4.0, "uffink", BTreeMap::new())
        .expect("valid")
}

/// `sum_i (e_{0,i} + sum_{j=1}^{n-i} (-1)^{[j = n-i]} 2^{j-1} e_{j,i})^2 <= 4^{n-1}`.
pub fn result1_nn22(n: usize) -> Result<QuadraticInequality> {
    if n < 2 {
        return Err(Error::InvalidArity(format!("need n >= 2, got {n}")));
    }
    let per_i: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match j {
                    0 => 1.0,
                    _ if j <= n - i => {
                        let mag = (1u64 << (j - 1)) as f64;
                        if j == n - i { -mag } else { mag }
                    }
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    QuadraticInequality::binary(&per_i, 4f64.powi(n as i32 - 1), "result1_nn22", params(&[("n", json!(n))]))
}

/// `sum_i (sum_j c_{j,i} e_{j,i})^2 <= 4^n` from the signed coefficient table.
pub fn from_protocol_nn22(p: &Protocol) -> Result<QuadraticInequality> {
    let c = coefficients_nn22(p)?;
    let per_i: Vec<Vec<f64>> = (0..p.n())
        .map(|i| (0..p.settings()).map(|j| c.get(j, i) as f64).collect())
        .collect();
    QuadraticInequality::binary(
        &per_i,
        4f64.powi(p.n() as i32),
        "nn22_protocol",
        params(&[("n", json!(p.n())), ("protocol", json!(p))]),
    )
}

/// `sum_{i=0,1} |sum_{j,k} e^{ij + k}_{j,i} w^{kl}|^2 <= d^4` for `l = 1..floor(d/2)`.
pub fn d2dd_family(d: usize) -> Result<Vec<QuadraticInequality>> {
    if d < 2 {
        return Err(Error::InvalidArity(format!("need d >= 2, got {d}")));
    }
    (1..=d / 2)
        .map(|l| {
            let coeffs = (0..2)
                .map(|i| {
                    let mut v = Vec::with_capacity(d * d);
                    for j in 0..d {
                        for m in 0..d {
                            // m = i*j + k
                            let k = (m + d * d - i * j) % d;
                            v.push(root(d, k * l));
                        }
                    }
                    v
                })
                .collect();
            QuadraticInequality::new(
                d,
                2,
                d,
                coeffs,
                (d as f64).powi(4),
                "d2dd",
                params(&[("d", json!(d)), ("l", json!(l))]),
            )
        })
        .collect()
}

/// `sum_i |sum_{l,m,j} c^l_{j,i} w^{phase(l,m) t} e^m_{j,i}|^2 <= d^{2(n+1)}`.
pub fn nndd_from_protocol(p: &Protocol, t: usize, phase: PhaseConvention) -> Result<QuadraticInequality> {
    let d = p.d();
    if t == 0 || t > d / 2 {
        return Err(Error::InvalidPhaseIndex { t, max: d / 2 });
    }
    let c = coefficients_nndd(p);
    let coeffs = (0..p.n())
        .map(|i| {
            let mut v = Vec::with_capacity(p.settings() * d);
            for j in 0..p.settings() {
                for m in 0..d {
                    let mut w = Complex64::new(0.0, 0.0);
                    for l in 0..d {
                        let cnt = c.get(j, i, l);
                        if cnt == 0 {
                            continue;
                        }
                        let x = match phase {
                            PhaseConvention::Derived => (m + d - l) * t,
                            PhaseConvention::Displayed => (l + m) * t,
                        };
                        w += cnt as f64 * root(d, x);
                    }
                    v.push(w);
                }
            }
            v
        })
        .collect();
    QuadraticInequality::new(
        p.settings(),
        p.n(),
        d,
        coeffs,
        (d as f64).powi(2 * (p.n() as i32 + 1)),
        "nndd_protocol",
        params(&[
            ("n", json!(p.n())),
            ("d", json!(d)),
            ("t", json!(t)),
            ("phase", json!(phase)),
            ("protocol", json!(p)),
        ]),
    )
}

/// `((1+eps) e00 + (1-eps) e10)^2 + (1-eps^2)(e01 - e11)^2 <= 4`.
pub fn correlated_2222(eps: f64) -> Result<QuadraticInequality> {
    if !(-1.0..=1.0).contains(&eps) {
        return Err(Error::InvalidEpsilon(eps));
    }
    let s = (1.0 - eps * eps).sqrt();
    QuadraticInequality::binary(
        &[vec![1.0 + eps, 1.0 - eps], vec![s, -s]],
        4.0,
        "correlated_2222",
        params(&[("epsilon", json!(eps))]),
    )
}

/// Maximum of the correlated-input left-hand side over `eps` in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub max_lhs: f64,
    pub epsilon: f64,
}

/// Coefficients `(A, B, C)` of `lhs(eps) = A + 2 B eps + C eps^2`.
pub fn envelope_quadratic(e: &BiasTable) -> Result<(f64, f64, f64)> {
    if e.n_a() != 2 || e.n_b() != 2 || e.d() != 2 {
        return Err(Error::ShapeMismatch("envelope needs a 2x2 binary bias table".into()));
    }
    let (e00, e10) = (e.e(0, 0), e.e(1, 0));
    let s = e.e(0, 1) - e.e(1, 1);
    Ok((
        (e00 + e10).powi(2) + s * s,
        e00 * e00 - e10 * e10,
        (e00 - e10).powi(2) - s * s,
    ))
}

pub fn epsilon_envelope(e: &BiasTable) -> Result<Envelope> {
    let (a, b, c) = envelope_quadratic(e)?;
    let f = |x: f64| a + 2.0 * b * x + c * x * x;
    let mut best = Envelope {
        max_lhs: f(1.0),
        epsilon: 1.0,
    };
    let mut consider = |x: f64| {
        let v = f(x);
        if v > best.max_lhs {
            best = Envelope { max_lhs: v, epsilon: x };
        }
    };
    consider(-1.0);
    if c < 0.0 {
        let x = -b / c;
        if x.abs() <= 1.0 {
            consider(x);
        }
    }
    Ok(best)
}

/// Arcsine criterion for quantum-realizable full correlations in the 2222 scenario.
pub fn tlm_quantum_boundary(e00: f64, e01: f64, e10: f64, e11: f64) -> Result<bool> {
    tlm_quantum_boundary_with_tol(e00, e01, e10, e11, 1e-12)
}

pub fn tlm_quantum_boundary_with_tol(e00: f64, e01: f64, e10: f64, e11: f64, tol: f64) -> Result<bool> {
    let e = [e00, e01, e10, e11];
    if let Some(x) = e.iter().find(|x| !(-1.0..=1.0).contains(*x)) {
        return Err(Error::Domain(format!("correlator {x} outside [-1, 1]")));
    }
    let a: Vec<f64> = e.iter().map(|x| x.asin()).collect();
    let total: f64 = a.iter().sum();
    Ok(a.iter().all(|x| (total - 2.0 * x).abs() <= PI + tol))
}
