//! Exact entropic evaluation of the information-causality statement and the numeric
//! limits that tie it to the quadratic inequalities.
//!
//! Everything here enumerates the full joint distribution; nothing is sampled except the
//! random test instances themselves.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inequality::QuadraticInequality;
use crate::infotheory::{
    binary_deficit, capacity, divergence_from_uniform, mutual_information_unchecked, Channel,
    InputDistribution,
};
use crate::nsbox::{BiasTable, NsBox};
use crate::protocol::{check_round_shapes, digit, for_each_round, guess_bias_nn22, Protocol};

/// Left-hand side of the IC statement against the channel capacity, in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ICEvaluation {
    pub lhs_bits: f64,
    pub capacity_bits: f64,
    pub gap: f64,
    pub per_i: Vec<f64>,
}

impl ICEvaluation {
    fn new(per_i: Vec<f64>, capacity_bits: f64) -> Self {
        let lhs_bits = per_i.iter().sum();
        ICEvaluation {
            lhs_bits,
            capacity_bits,
            gap: lhs_bits - capacity_bits,
            per_i,
        }
    }
}

/// Joint distribution `[a_i][g]` given `b = i`.
pub fn joint_input_guess(
    bx: &NsBox,
    p: &Protocol,
    channel: &Channel,
    input: &InputDistribution,
    i: usize,
) -> Result<Vec<Vec<f64>>> {
    check_round_shapes(bx, p, channel, input)?;
    check_index(p, i)?;
    let d = p.d();
    let mut joint = vec![vec![0.0; d]; d];
    for_each_round(bx, p, channel, &input.probabilities(), i, |k, g, w| {
        joint[digit(k, i, d)][g] += w;
    });
    Ok(joint)
}

fn check_index(p: &Protocol, i: usize) -> Result<()> {
    if i >= p.n() {
        return Err(Error::ShapeMismatch(format!("Bob input {i} >= n={}", p.n())));
    }
    Ok(())
}

/// `sum_i I(a_i; g | b = i)` by enumeration.
pub fn ic_lhs(bx: &NsBox, p: &Protocol, channel: &Channel, input: &InputDistribution) -> Result<ICEvaluation> {
    let per_i = (0..p.n())
        .map(|i| joint_input_guess(bx, p, channel, input, i).map(|j| mutual_information_unchecked(&j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ICEvaluation::new(per_i, capacity(channel)))
}

/// `I(a_0; g | b=0) + I(a_1; g | b=1, a_0)` for two correlated input bits.
pub fn correlated_ic_lhs(bx: &NsBox, p: &Protocol, channel: &Channel, eps: f64) -> Result<ICEvaluation> {
    let input = InputDistribution::correlated_pair(eps)?;
    check_round_shapes(bx, p, channel, &input)?;
    let first = mutual_information_unchecked(&joint_input_guess(bx, p, channel, &input, 0)?);
    // [a_0][a_1][g] given b = 1
    let mut joint = [[[0.0; 2]; 2]; 2];
    for_each_round(bx, p, channel, &input.probabilities(), 1, |k, g, w| {
        joint[digit(k, 0, 2)][digit(k, 1, 2)][g] += w;
    });
    let mut second = 0.0;
    for slice in &joint {
        let pa0: f64 = slice.iter().flatten().sum();
        if pa0 > 0.0 {
            let cond: Vec<Vec<f64>> = slice.iter().map(|r| r.iter().map(|v| v / pa0).collect()).collect();
            second += pa0 * mutual_information_unchecked(&cond);
        }
    }
    Ok(ICEvaluation::new(vec![first, second], capacity(channel)))
}

/// Distribution of `E = g - a_i` given `b = i`, by enumeration.
pub fn enumerate_error_distribution(
    bx: &NsBox,
    p: &Protocol,
    channel: &Channel,
    input: &InputDistribution,
    i: usize,
) -> Result<Vec<f64>> {
    check_round_shapes(bx, p, channel, input)?;
    check_index(p, i)?;
    let d = p.d();
    let mut err = vec![0.0; d];
    for_each_round(bx, p, channel, &input.probabilities(), i, |k, g, w| {
        err[(g + d - digit(k, i, d)) % d] += w;
    });
    Ok(err)
}

/// Fano lower bound `sum_i (log2 d - H(E | b = i))` with uniform inputs.
pub fn fano_lhs(bx: &NsBox, p: &Protocol, channel: &Channel) -> Result<f64> {
    let input = InputDistribution::uniform(p.n(), p.d());
    let mut total = 0.0;
    for i in 0..p.n() {
        total += divergence_from_uniform(&enumerate_error_distribution(bx, p, channel, &input, i)?);
    }
    Ok(total)
}

/// `[n - sum_i h(Pr(g = a_i | b = i))] / [1 - h((1 + e_c)/2)]` over a binary symmetric channel.
pub fn lhopital_ratio(bx: &NsBox, p: &Protocol, e_c: f64) -> Result<f64> {
    if e_c == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    if p.d() != 2 {
        return Err(Error::AlphabetMismatch {
            expected: 2,
            got: p.d(),
        });
    }
    let channel = Channel::binary_symmetric(e_c)?;
    Ok(fano_lhs(bx, p, &channel)? / binary_deficit(e_c))
}

pub const RICHARDSON_STEP: f64 = 1e-2;

/// Two-level Richardson extrapolation of `g(h)` to `h -> 0` for `g` even in `h`.
pub fn richardson(mut g: impl FnMut(f64) -> Result<f64>, h: f64) -> Result<f64> {
    let (r0, r1, r2) = (g(h)?, g(h / 2.0)?, g(h / 4.0)?);
    let a = (4.0 * r1 - r0) / 3.0;
    let b = (4.0 * r2 - r1) / 3.0;
    Ok((16.0 * b - a) / 15.0)
}

/// `lim_{e_c -> 0}` of [`lhopital_ratio`].
pub fn lhopital_limit(bx: &NsBox, p: &Protocol) -> Result<f64> {
    richardson(|h| lhopital_ratio(bx, p, h), RICHARDSON_STEP)
}

/// `sum_i e_i^2` from the closed-form guessing probabilities.
pub fn sum_sq_guess_bias(biases: &BiasTable, p: &Protocol) -> Result<f64> {
    (0..p.n()).map(|i| guess_bias_nn22(biases, p, i).map(|e| e * e)).sum()
}

/// Ratio of the improved Fano bound to the capacity of a cosine clock channel with
/// strength `eps` and frequency `t`.
pub fn clock_ratio(bx: &NsBox, p: &Protocol, eps: f64, t: usize) -> Result<f64> {
    let channel = Channel::clock_cosine(p.d(), eps, t)?;
    let cap = capacity(&channel);
    if cap == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    Ok(fano_lhs(bx, p, &channel)? / cap)
}

pub fn clock_limit(bx: &NsBox, p: &Protocol, t: usize) -> Result<f64> {
    let d = p.d();
    if t == 0 || t > d / 2 {
        return Err(Error::InvalidPhaseIndex { t, max: d / 2 });
    }
    // odd powers of eps survive for d > 2; average them out first
    richardson(
        |h| Ok(0.5 * (clock_ratio(bx, p, h, t)? + clock_ratio(bx, p, -h, t)?)),
        RICHARDSON_STEP,
    )
}

/// `lim_{e_c -> 0}` of the correlated IC left-hand side over the capacity.
pub fn correlated_limit(bx: &NsBox, p: &Protocol, eps: f64) -> Result<f64> {
    richardson(
        |h| {
            let ch = Channel::binary_symmetric(h)?;
            Ok(correlated_ic_lhs(bx, p, &ch, eps)?.lhs_bits / binary_deficit(h))
        },
        RICHARDSON_STEP,
    )
}

/// `F(e_c) = sum_i D(e_c e_i) - D(e_c)` with `D(x) = 1 - h((1+x)/2)`, in bits.
pub fn concavity_f(e: &[f64], e_c: f64) -> f64 {
    e.iter().map(|&x| binary_deficit(e_c * x)).sum::<f64>() - binary_deficit(e_c)
}

/// `F''(e_c) = [sum_i e_i^2 / (1 - e_c^2 e_i^2) - 1 / (1 - e_c^2)] / ln 2`.
pub fn concavity_f_second(e: &[f64], e_c: f64) -> f64 {
    let s: f64 = e.iter().map(|&x| x * x / (1.0 - e_c * e_c * x * x)).sum();
    (s - 1.0 / (1.0 - e_c * e_c)) / std::f64::consts::LN_2
}

pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub e_vector: Vec<f64>,
    pub sum_sq: f64,
    pub e_c: Vec<f64>,
    pub f_values: Vec<f64>,
    pub f_second: Vec<f64>,
    pub f_second_fd: Vec<f64>,
    pub max_fd_error: f64,
    /// `F'' <= 0` and `F <= 0` at every sample when `sum_sq <= 1`; vacuous otherwise.
    pub concave_ok: bool,
}

pub fn concavity_check(e: &[f64], samples: &[f64]) -> Result<ConcavityReport> {
    if let Some(x) = e.iter().find(|x| !(x.abs() <= 1.0)) {
        return Err(Error::Domain(format!("e_i = {x} outside [-1, 1]")));
    }
    if let Some(x) = samples.iter().find(|x| !(x.abs() + FD_STEP < 1.0)) {
        return Err(Error::Domain(format!("e_c = {x} too close to or beyond 1")));
    }
    let sum_sq: f64 = e.iter().map(|x| x * x).sum();
    let f_values: Vec<f64> = samples.iter().map(|&c| concavity_f(e, c)).collect();
    let f_second: Vec<f64> = samples.iter().map(|&c| concavity_f_second(e, c)).collect();
    let f_second_fd: Vec<f64> = samples
        .iter()
        .map(|&c| {
            (concavity_f(e, c + FD_STEP) - 2.0 * concavity_f(e, c) + concavity_f(e, c - FD_STEP))
                / (FD_STEP * FD_STEP)
        })
        .collect();
    let max_fd_error = f_second
        .iter()
        .zip(&f_second_fd)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let concave_ok = sum_sq > 1.0
        || (f_second.iter().all(|&v| v <= 1e-12) && f_values.iter().all(|&v| v <= 1e-12));
    Ok(ConcavityReport {
        e_vector: e.to_vec(),
        sum_sq,
        e_c: samples.to_vec(),
        f_values,
        f_second,
        f_second_fd,
        max_fd_error,
        concave_ok,
    })
}

/// Uniform `[-1, 1]` binary correlators.
pub fn random_binary_biases(rng: &mut impl Rng, n_a: usize, n_b: usize) -> BiasTable {
    BiasTable::binary(n_a, n_b, |_, _| rng.gen_range(-1.0..=1.0))
}

/// Correlators of a random box with uniform marginals: each `Pr(A + B = k | j, i)` is a
/// normalized vector of uniform draws.
pub fn random_biases(rng: &mut impl Rng, n_a: usize, n_b: usize, d: usize) -> BiasTable {
    if d == 2 {
        return random_binary_biases(rng, n_a, n_b);
    }
    let mut entries = Vec::with_capacity(n_a * n_b * d);
    for _ in 0..n_a * n_b {
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s: f64 = w.iter().sum();
        let cell: Vec<f64> = w.iter().map(|x| d as f64 * x / s - 1.0).collect();
        let mean = cell.iter().sum::<f64>() / d as f64;
        entries.extend(cell.iter().map(|x| x - mean));
    }
    BiasTable::new(n_a, n_b, d, entries).expect("normalized")
}

/// Uniformly random `f`, `h` and `r` tables with `n` Alice settings.
pub fn random_protocol(rng: &mut impl Rng, n: usize, d: usize) -> Protocol {
    let size = d.pow(n as u32);
    let f = (0..size).map(|_| rng.gen_range(0..n)).collect();
    let h = (0..size).map(|_| rng.gen_range(0..d)).collect();
    let r = (0..n).map(|_| rng.gen_range(0..d)).collect();
    Protocol::new(n, d, n, f, h, r).expect("in range")
}

/// Per-trial generator: stream `trial` of the seeded ChaCha8 generator.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Agreement between one inequality and the IC limit of one protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub family: String,
    pub seed: u64,
    pub trials: usize,
    pub band: f64,
    /// Trials where `lhs/bound - 1` and `limit - 1` have opposite signs, both beyond `band`.
    pub disagreements: usize,
    /// Worst `min(|lhs/bound - 1|, |limit - 1|)` over opposite-sign trials.
    pub max_disagreement_margin: f64,
    /// Worst `|lhs/bound - limit|`.
    pub max_abs_gap: f64,
}

pub const SIGN_BAND: f64 = 1e-4;

/// Samples random binary bias tables and compares `lhs/bound` with the extrapolated limit.
pub fn validate_inequality(ineq: &QuadraticInequality, p: &Protocol, trials: usize, seed: u64) -> Result<ValidationReport> {
    if ineq.d() != 2 || p.d() != 2 {
        return Err(Error::AlphabetMismatch {
            expected: 2,
            got: ineq.d().max(p.d()),
        });
    }
    if ineq.n_a() != p.settings() || ineq.n_b() != p.n() {
        return Err(Error::ShapeMismatch("inequality and protocol disagree on settings".into()));
    }
    let rows = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let e = random_binary_biases(&mut rng, p.settings(), p.n());
            let bx = NsBox::from_biases(&e)?;
            let a = ineq.lhs(&e)? / ineq.bound();
            let b = lhopital_limit(&bx, p)?;
            Ok((a, b))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    Ok(sign_report(ineq.family().to_string(), seed, &rows))
}

fn sign_report(family: String, seed: u64, rows: &[(f64, f64)]) -> ValidationReport {
    let mut rep = ValidationReport {
        family,
        seed,
        trials: rows.len(),
        band: SIGN_BAND,
        disagreements: 0,
        max_disagreement_margin: 0.0,
        max_abs_gap: 0.0,
    };
    for &(a, b) in rows {
        let (x, y) = (a - 1.0, b - 1.0);
        rep.max_abs_gap = rep.max_abs_gap.max((a - b).abs());
        if x * y < 0.0 {
            let margin = x.abs().min(y.abs());
            rep.max_disagreement_margin = rep.max_disagreement_margin.max(margin);
            if margin > SIGN_BAND {
                rep.disagreements += 1;
            }
        }
    }
    rep
}

/// Random (box, protocol) pairs: extrapolated limit versus `sum_i e_i^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub seed: u64,
    pub trials: usize,
    pub max_abs_error: f64,
    pub disagreements: usize,
    pub band: f64,
}

pub fn agreement_suite(trials: usize, seed: u64) -> Result<AgreementReport> {
    let rows = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let n = 2 + t % 2;
            let p = random_protocol(&mut rng, n, 2);
            let e = random_binary_biases(&mut rng, n, n);
            let bx = NsBox::from_biases(&e)?;
            Ok((sum_sq_guess_bias(&e, &p)?, lhopital_limit(&bx, &p)?))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let rep = sign_report(String::new(), seed, &rows);
    Ok(AgreementReport {
        seed,
        trials,
        max_abs_error: rep.max_abs_gap,
        disagreements: rep.disagreements,
        band: rep.band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inequality::{correlated_2222, from_protocol_nn22, nndd_from_protocol, result1_nn22, uffink, PhaseConvention};
    use crate::nsbox::catalog::*;
    use crate::protocol::{canonical_nn22, d2dd_protocol, error_distribution, guessing_probability, guessing_probability_nn22, van_dam};

    fn bsc(e: f64) -> Channel {
        Channel::binary_symmetric(e).unwrap()
    }

    #[test]
    fn ic_lhs_examples() {
        let u = InputDistribution::uniform(2, 2);
        let ev = ic_lhs(&pr_box(), &van_dam(), &bsc(1.0), &u).unwrap();
        assert!((ev.lhs_bits - 2.0).abs() < 1e-12);
        assert!((ev.capacity_bits - 1.0).abs() < 1e-12);
        assert!((ev.gap - 1.0).abs() < 1e-12);
        let ev = ic_lhs(&white_noise(2, 2), &van_dam(), &bsc(0.7), &u).unwrap();
        assert!(ev.lhs_bits.abs() < 1e-15);
        let ev = ic_lhs(&pr_box(), &van_dam(), &bsc(0.0), &u).unwrap();
        assert_eq!((ev.lhs_bits, ev.capacity_bits, ev.gap), (0.0, 0.0, 0.0));
    }

    #[test]
    fn perfect_dit_decoding_gives_n_log_d() {
        for d in 2..=4 {
            let mut t = Vec::new();
            for alpha in 0..d {
                for beta in 0..2 {
                    for a in 0..d {
                        for b in 0..d {
                            t.push(if (a + b) % d == (alpha * beta) % d { 1.0 / d as f64 } else { 0.0 });
                        }
                    }
                }
            }
            let bx = NsBox::new(d, 2, d, d, t).unwrap();
            let ev = ic_lhs(&bx, &d2dd_protocol(d).unwrap(), &Channel::noiseless(d).unwrap(), &InputDistribution::uniform(2, d)).unwrap();
            assert!((ev.lhs_bits - 2.0 * (d as f64).log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn correlated_examples() {
        let mut rng = trial_rng(7, 0);
        for _ in 0..10 {
            let e = random_binary_biases(&mut rng, 2, 2);
            let bx = NsBox::from_biases(&e).unwrap();
            let ch = bsc(rng.gen_range(-1.0..1.0));
            let a = correlated_ic_lhs(&bx, &van_dam(), &ch, 0.0).unwrap();
            let b = ic_lhs(&bx, &van_dam(), &ch, &InputDistribution::uniform(2, 2)).unwrap();
            assert!((a.per_i[0] - b.per_i[0]).abs() < 1e-12);
            // conditioning on a_0 can only add information
            assert!(a.per_i[1] >= b.per_i[1] - 1e-12);
            for eps in [-1.0, 1.0] {
                let c = correlated_ic_lhs(&bx, &van_dam(), &ch, eps).unwrap();
                assert!(c.per_i[1].abs() < 1e-15);
            }
        }
        // equal when the b=1 decoding error does not depend on alpha
        let e = BiasTable::binary(2, 2, |j, i| match (j, i) {
            (0, 0) => 0.3,
            (1, 0) => -0.8,
            (0, 1) => 0.55,
            _ => -0.55,
        });
        let bx = NsBox::from_biases(&e).unwrap();
        for ec in [0.2, 0.9] {
            let a = correlated_ic_lhs(&bx, &van_dam(), &bsc(ec), 0.0).unwrap();
            let b = ic_lhs(&bx, &van_dam(), &bsc(ec), &InputDistribution::uniform(2, 2)).unwrap();
            assert!((a.lhs_bits - b.lhs_bits).abs() < 1e-12);
        }
        let ev = correlated_ic_lhs(&pr_box(), &van_dam(), &bsc(1.0), 0.0).unwrap();
        assert!((ev.lhs_bits - 2.0).abs() < 1e-12 && (ev.gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fano_examples() {
        assert!((fano_lhs(&pr_box(), &van_dam(), &bsc(1.0)).unwrap() - 2.0).abs() < 1e-12);
        assert!(fano_lhs(&white_noise(2, 2), &van_dam(), &bsc(0.4)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn fano_below_ic_and_tight_for_balanced_h() {
        let mut rng = trial_rng(8, 0);
        for t in 0..100 {
            let n = 2 + t % 2;
            let p = random_protocol(&mut rng, n, 2);
            let e = random_binary_biases(&mut rng, n, n);
            let bx = NsBox::from_biases(&e).unwrap();
            let ch = bsc(rng.gen_range(-1.0..1.0));
            let ic = ic_lhs(&bx, &p, &ch, &InputDistribution::uniform(n, 2)).unwrap().lhs_bits;
            let fano = fano_lhs(&bx, &p, &ch).unwrap();
            assert!(fano <= ic + 1e-12);
        }
        for p in [van_dam(), canonical_nn22(3).unwrap(), canonical_nn22(4).unwrap()] {
            let n = p.n();
            for ec in [0.9, 0.3, 0.01] {
                let bx = NsBox::from_biases(&random_binary_biases(&mut rng, n, n)).unwrap();
                let ic = ic_lhs(&bx, &p, &bsc(ec), &InputDistribution::uniform(n, 2)).unwrap().lhs_bits;
                assert!((fano_lhs(&bx, &p, &bsc(ec)).unwrap() - ic).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn balanced_h_fano_tight_to_leading_order() {
        let mut rng = trial_rng(16, 0);
        let mut seen = 0;
        while seen < 10 {
            let p = random_protocol(&mut rng, 3, 2);
            if !crate::protocol::is_balanced_h(&p).unwrap() {
                continue;
            }
            seen += 1;
            let bx = NsBox::from_biases(&random_binary_biases(&mut rng, 3, 3)).unwrap();
            let ic_limit = richardson(
                |h| {
                    let ic = ic_lhs(&bx, &p, &bsc(h), &InputDistribution::uniform(3, 2))?;
                    Ok(ic.lhs_bits / binary_deficit(h))
                },
                RICHARDSON_STEP,
            )
            .unwrap();
            assert!((ic_limit - lhopital_limit(&bx, &p).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn dary_fano_below_ic() {
        let mut rng = trial_rng(9, 0);
        for d in 3..=4 {
            let p = random_protocol(&mut rng, 2, d);
            let bx = NsBox::from_biases(&random_biases(&mut rng, 2, 2, d)).unwrap();
            let ch = Channel::clock_cosine(d, 0.4, 1).unwrap();
            let ic = ic_lhs(&bx, &p, &ch, &InputDistribution::uniform(2, d)).unwrap().lhs_bits;
            assert!(fano_lhs(&bx, &p, &ch).unwrap() <= ic + 1e-12);
        }
    }

    #[test]
    fn closed_form_guess_matches_enumeration() {
        let mut rng = trial_rng(10, 0);
        for t in 0..200 {
            let n = 2 + t % 2;
            let p = random_protocol(&mut rng, n, 2);
            let e = random_binary_biases(&mut rng, n, n);
            let bx = NsBox::from_biases(&e).unwrap();
            let ec = rng.gen_range(-1.0..=1.0);
            for i in 0..n {
                let a = guessing_probability(&bx, &p, &bsc(ec), &InputDistribution::uniform(n, 2), i).unwrap();
                let b = guessing_probability_nn22(&e, &p, ec, i).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn balanced_guess_uniform() {
        let mut rng = trial_rng(11, 0);
        let p = canonical_nn22(3).unwrap();
        let bx = NsBox::from_biases(&random_binary_biases(&mut rng, 3, 3)).unwrap();
        for i in 0..3 {
            let j = joint_input_guess(&bx, &p, &bsc(0.6), &InputDistribution::uniform(3, 2), i).unwrap();
            assert!((j[0][0] + j[1][0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn error_distribution_closed_form_matches_enumeration() {
        let mut rng = trial_rng(12, 0);
        for d in 2..=5 {
            for n in 2..=3 {
                for _ in 0..5 {
                    let p = random_protocol(&mut rng, n, d);
                    let bx = NsBox::from_biases(&random_biases(&mut rng, n, n, d)).unwrap();
                    let free: Vec<f64> = (0..=d / 2).map(|_| rng.gen_range(0.0..1.0)).collect();
                    let mut full: Vec<f64> = (0..d).map(|m| free[m.min(d - m)]).collect();
                    let s: f64 = full.iter().sum();
                    full.iter_mut().for_each(|x| *x /= s);
                    let norm: Vec<f64> = free.iter().map(|x| x / s).collect();
                    let ch = Channel::clock(d, &norm).unwrap();
                    for i in 0..n {
                        let a = error_distribution(&bx, &p, &ch, i).unwrap();
                        let b = enumerate_error_distribution(&bx, &p, &ch, &InputDistribution::uniform(n, d), i).unwrap();
                        let dev = a.probs.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                        assert!(dev < 1e-12, "d={d} n={n} dev={dev}");
                        assert!(a.deviations.iter().sum::<f64>().abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn lhopital_examples() {
        assert!(matches!(lhopital_ratio(&pr_box(), &van_dam(), 0.0), Err(Error::DegenerateChannel)));
        assert!((lhopital_limit(&pr_box(), &van_dam()).unwrap() - 2.0).abs() < 1e-6);
        assert!(lhopital_limit(&white_noise(2, 2), &van_dam()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn lhopital_limit_matches_quadratic_form() {
        let mut rng = trial_rng(13, 0);
        for t in 0..40 {
            let n = 2 + t % 2;
            let p = random_protocol(&mut rng, n, 2);
            let e = random_binary_biases(&mut rng, n, n);
            let bx = NsBox::from_biases(&e).unwrap();
            let limit = lhopital_limit(&bx, &p).unwrap();
            let quad = from_protocol_nn22(&p).unwrap().lhs(&e).unwrap() / 4f64.powi(n as i32);
            assert!((limit - quad).abs() < 1e-6, "{limit} vs {quad}");
            assert!((sum_sq_guess_bias(&e, &p).unwrap() - quad).abs() < 1e-12);
        }
    }

    #[test]
    fn clock_limit_matches_derived_phase() {
        let mut rng = trial_rng(14, 0);
        for d in 2..=5 {
            for n in 2..=3 {
                let p = random_protocol(&mut rng, n, d);
                let e = random_biases(&mut rng, n, n, d);
                let bx = NsBox::from_biases(&e).unwrap();
                for t in 1..=d / 2 {
                    let limit = clock_limit(&bx, &p, t).unwrap();
                    let ineq = nndd_from_protocol(&p, t, PhaseConvention::Derived).unwrap();
                    let quad = ineq.lhs(&e).unwrap() / ineq.bound();
                    assert!((limit - quad).abs() < 1e-6, "d={d} n={n} t={t}: {limit} vs {quad}");
                }
            }
        }
    }

    #[test]
    fn correlated_limit_matches_family() {
        let mut rng = trial_rng(15, 0);
        for _ in 0..10 {
            let e = random_binary_biases(&mut rng, 2, 2);
            let bx = NsBox::from_biases(&e).unwrap();
            for eps in [-0.8, -0.3, 0.0, 0.5, 0.9] {
                let limit = correlated_limit(&bx, &van_dam(), eps).unwrap();
                let ineq = correlated_2222(eps).unwrap();
                let quad = ineq.lhs(&e).unwrap() / ineq.bound();
                assert!((limit - quad).abs() < 1e-6, "eps={eps}: {limit} vs {quad}");
            }
        }
    }

    #[test]
    fn concavity_examples() {
        let r = concavity_check(&[1.0, 0.0], &[0.0, 0.3, 0.8]).unwrap();
        assert!(r.f_second.iter().all(|v| v.abs() < 1e-12));
        let r = concavity_check(&[0.6, 0.6], &[0.5]).unwrap();
        assert!(r.f_second[0] < 0.0 && r.concave_ok);
        assert!(r.max_fd_error < 1e-5);
        let r = concavity_check(&[0.9, 0.9], &[0.01]).unwrap();
        assert!(r.f_values[0] > 0.0);
        assert_eq!(concavity_f(&[0.3, 0.4], 0.0), 0.0);
        assert!(concavity_check(&[1.2], &[0.1]).is_err());
        assert!(concavity_check(&[0.2], &[1.0]).is_err());
    }

    #[test]
    fn validation_examples() {
        let r = validate_inequality(&uffink(), &van_dam(), 500, 1).unwrap();
        assert_eq!(r.disagreements, 0);
        assert!(r.max_abs_gap < 1e-6);
        let r = validate_inequality(&result1_nn22(3).unwrap(), &canonical_nn22(3).unwrap(), 500, 2).unwrap();
        assert_eq!(r.disagreements, 0);
        assert!(r.max_abs_gap < 1e-6);
    }

    #[test]
    fn validation_is_deterministic() {
        let a = validate_inequality(&uffink(), &van_dam(), 50, 9).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| validate_inequality(&uffink(), &van_dam(), 50, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn zero_biases_agree() {
        let bx = NsBox::from_biases(&BiasTable::binary(2, 2, |_, _| 0.0)).unwrap();
        assert_eq!(uffink().lhs(&bx.biases().unwrap()).unwrap(), 0.0);
        assert!(lhopital_limit(&bx, &van_dam()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn agreement_suite_small() {
        let r = agreement_suite(60, 3).unwrap();
        assert!(r.max_abs_error < 1e-6);
        assert_eq!(r.disagreements, 0);
    }
}
