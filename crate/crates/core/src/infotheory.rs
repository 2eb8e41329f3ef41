//! Entropies, mutual information and the two symmetric channel families.
//!
//! Every quantity is reported in bits. Entropies use the `0 log 0 = 0` convention.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nsbox::DEFAULT_TOL;

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty distribution".into()));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < -DEFAULT_TOL) {
        return Err(Error::InvalidDistribution(format!("entry {v} is not a probability")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > DEFAULT_TOL {
        return Err(Error::InvalidDistribution(format!("entries sum to {s}")));
    }
    Ok(())
}

fn entropy_unchecked(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.log2())
        .sum::<f64>()
}

/// Shannon entropy `-sum p log2 p`.
pub fn shannon_entropy(dist: &[f64]) -> Result<f64> {
    check_distribution(dist)?;
    Ok(entropy_unchecked(dist))
}

/// Binary entropy `h(p)`.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_unchecked(&[p, 1.0 - p])
}

/// `1 - h((1 + x) / 2)` evaluated without cancellation near `x = 0`.
pub fn binary_deficit(x: f64) -> f64 {
    let plus = if x <= -1.0 { 0.0 } else { (1.0 + x) * x.ln_1p() };
    let minus = if x >= 1.0 { 0.0 } else { (1.0 - x) * (-x).ln_1p() };
    0.5 * (plus + minus) / LN_2
}

/// `log2 d - H(p)` for a distribution over `d = p.len()` symbols.
///
/// Written as `(1/d) sum_k [(1 + x_k) ln(1 + x_k) - x_k] / ln 2` with `x_k = d p_k - 1`,
/// which stays accurate when `p` is close to uniform.
pub fn divergence_from_uniform(p: &[f64]) -> f64 {
    let d = p.len() as f64;
    let s: f64 = p
        .iter()
        .map(|&pk| {
            let x = d * pk - 1.0;
            if x <= -1.0 {
                1.0
            } else {
                (1.0 + x) * x.ln_1p() - x
            }
        })
        .sum();
    (s / d / LN_2).max(0.0)
}

/// `I(X;Y) = H(X) + H(Y) - H(X,Y)` for a joint table `joint[x][y]`.
pub fn mutual_information(joint: &[Vec<f64>]) -> Result<f64> {
    let cols = joint.first().map_or(0, Vec::len);
    if cols == 0 || joint.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidDistribution("joint table is ragged or empty".into()));
    }
    let flat: Vec<f64> = joint.iter().flatten().copied().collect();
    check_distribution(&flat)?;
    Ok(mutual_information_unchecked(joint))
}

pub(crate) fn mutual_information_unchecked(joint: &[Vec<f64>]) -> f64 {
    let cols = joint[0].len();
    let px: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let py: Vec<f64> = (0..cols).map(|y| joint.iter().map(|r| r[y]).sum()).collect();
    // sum p(x,y) log p(x,y) / (p(x) p(y)); avoids the three-entropy cancellation
    let mut acc = 0.0;
    for (x, row) in joint.iter().enumerate() {
        for (y, &pxy) in row.iter().enumerate() {
            if pxy > 0.0 {
                acc += pxy * (pxy / (px[x] * py[y])).ln();
            }
        }
    }
    (acc / LN_2).max(0.0)
}

/// Noise model of a symmetric channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelKind {
    /// Bit is transmitted correctly with probability `(1 + e_c) / 2`.
    BinarySymmetric { e_c: f64 },
    /// Confusion probability depends only on the cyclic distance; `p` holds all `d` entries.
    Clock { p: Vec<f64> },
}

/// A symmetric classical channel over `d` symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    d: usize,
    kind: ChannelKind,
    // Pr(x' = x + l mod d)
    shift: Vec<f64>,
}

impl Channel {
    pub fn binary_symmetric(e_c: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&e_c) {
            return Err(Error::InvalidChannel(format!("e_c = {e_c} outside [-1, 1]")));
        }
        Ok(Channel {
            d: 2,
            kind: ChannelKind::BinarySymmetric { e_c },
            shift: vec![(1.0 + e_c) / 2.0, (1.0 - e_c) / 2.0],
        })
    }

    /// Clock channel from the free parameters `p_0 .. p_{floor(d/2)}`; the remaining
    /// entries are mirrored as `p_m = p_{d-m}`.
    pub fn clock(d: usize, free: &[f64]) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidChannel(format!("alphabet size {d} < 2")));
        }
        if free.len() != d / 2 + 1 {
            return Err(Error::InvalidChannel(format!(
                "clock channel over {d} symbols takes {} parameters, got {}",
                d / 2 + 1,
                free.len()
            )));
        }
        let p: Vec<f64> = (0..d).map(|m| free[m.min(d - m)]).collect();
        check_distribution(&p).map_err(|e| Error::InvalidChannel(e.to_string()))?;
        Ok(Channel {
            d,
            shift: p.clone(),
            kind: ChannelKind::Clock { p },
        })
    }

    /// Clock channel with biases `e_m = eps * cos(2 pi m t / d)`, i.e.
    /// `p_m = (1 + e_m) / d` for `m > 0` and `p_0 = (1 - sum_m e_m) / d`.
    pub fn clock_cosine(d: usize, eps: f64, t: usize) -> Result<Self> {
        let free: Vec<f64> = (0..=d / 2)
            .map(|m| {
                if m == 0 {
                    let s: f64 = (1..d).map(|l| cosine_bias(d, l, t)).sum();
                    (1.0 - eps * s) / d as f64
                } else {
                    (1.0 + eps * cosine_bias(d, m, t)) / d as f64
                }
            })
            .collect();
        Channel::clock(d, &free)
    }

    pub fn noiseless(d: usize) -> Result<Self> {
        let mut free = vec![0.0; d / 2 + 1];
        free[0] = 1.0;
        Channel::clock(d, &free)
    }

    pub fn useless(d: usize) -> Result<Self> {
        Channel::clock(d, &vec![1.0 / d as f64; d / 2 + 1])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> &ChannelKind {
        &self.kind
    }

    /// `Pr(x' = x + l mod d)`.
    pub fn shift_prob(&self, l: usize) -> f64 {
        self.shift[l % self.d]
    }

    pub fn shift_distribution(&self) -> &[f64] {
        &self.shift
    }

    /// Transition probability `T[x'][x]`.
    pub fn transition(&self, received: usize, sent: usize) -> f64 {
        self.shift[(received + self.d - sent % self.d) % self.d]
    }

    /// Channel biases `e_l = d Pr(x' = x + l) - 1` for `l = 1..d-1` (index 0 unused, set to 0).
    pub fn shift_biases(&self) -> Vec<f64> {
        let d = self.d as f64;
        std::iter::once(0.0)
            .chain(self.shift[1..].iter().map(|p| d * p - 1.0))
            .collect()
    }
}

fn cosine_bias(d: usize, m: usize, t: usize) -> f64 {
    (2.0 * std::f64::consts::PI * ((m * t) % d) as f64 / d as f64).cos()
}

/// Capacity in bits; for these symmetric channels it is attained by the uniform input.
pub fn capacity(channel: &Channel) -> f64 {
    match channel.kind {
        ChannelKind::BinarySymmetric { e_c } => binary_deficit(e_c),
        ChannelKind::Clock { ref p } => divergence_from_uniform(p),
    }
}

/// Joint distribution `joint[x][x'] = input[x] * T[x'][x]`.
pub fn transmit(channel: &Channel, input: &[f64]) -> Result<Vec<Vec<f64>>> {
    if input.len() != channel.d {
        return Err(Error::DimensionMismatch(format!(
            "input over {} symbols, channel over {}",
            input.len(),
            channel.d
        )));
    }
    check_distribution(input)?;
    Ok(input
        .iter()
        .enumerate()
        .map(|(x, &px)| (0..channel.d).map(|y| px * channel.transition(y, x)).collect())
        .collect())
}

/// Distribution of Alice's input dits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputDistribution {
    UniformIndependent { n: usize, d: usize },
    /// Two bits with `Pr(a_0 = l, a_1 = m) = (1 + (-1)^(l+m) eps) / 4`.
    CorrelatedPair { epsilon: f64 },
}

impl InputDistribution {
    pub fn uniform(n: usize, d: usize) -> Self {
        InputDistribution::UniformIndependent { n, d }
    }

    pub fn correlated_pair(epsilon: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        Ok(InputDistribution::CorrelatedPair { epsilon })
    }

    pub fn n(&self) -> usize {
        match self {
            InputDistribution::UniformIndependent { n, .. } => *n,
            InputDistribution::CorrelatedPair { .. } => 2,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            InputDistribution::UniformIndependent { d, .. } => *d,
            InputDistribution::CorrelatedPair { .. } => 2,
        }
    }

    /// Probabilities indexed by the little-endian rank of the input vector.
    pub fn probabilities(&self) -> Vec<f64> {
        match *self {
            InputDistribution::UniformIndependent { n, d } => {
                let size = d.pow(n as u32);
                vec![1.0 / size as f64; size]
            }
            InputDistribution::CorrelatedPair { epsilon } => (0..4)
                .map(|rank| {
                    let parity = (rank & 1) ^ (rank >> 1);
                    let sign = if parity == 0 { 1.0 } else { -1.0 };
                    (1.0 + sign * epsilon) / 4.0
                })
                .collect(),
        }
    }
}
