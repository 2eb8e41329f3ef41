//! Deterministic encoding-decoding strategies for the information-causality game.
//!
//! Alice holds `n` dits `a = (a_0, .., a_{n-1})` over `[d]`. She feeds `alpha = f(a)` into
//! the box, sends `x = h(a) + A` and Bob, asked for dit `b`, inputs `beta = b` and guesses
//! `g = x' + B + r(b)`, everything mod `d`.
//!
//! Input vectors are ranked little-endian, `rank(a) = sum_i a_i d^i`, so `a_0` is the
//! least significant digit. `h` is stored as the table that is actually added to `A`;
//! constructors that follow an additive-inverse convention convert at construction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infotheory::{Channel, InputDistribution};
use crate::nsbox::{BiasTable, NsBox};

/// One encoding-decoding strategy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ProtocolFile", into = "ProtocolFile")]
pub struct Protocol {
    n: usize,
    d: usize,
    settings: usize,
    f: Vec<usize>,
    h: Vec<usize>,
    r: Vec<usize>,
}

/// On-disk layout. `settings` (number of Alice box settings) defaults to `n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolFile {
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<usize>,
    pub f: Vec<usize>,
    pub h: Vec<usize>,
    pub r: Vec<usize>,
}

impl TryFrom<ProtocolFile> for Protocol {
    type Error = Error;
    fn try_from(p: ProtocolFile) -> Result<Self> {
        let settings = p.settings.unwrap_or(p.n);
        Protocol::new(p.n, p.d, settings, p.f, p.h, p.r)
    }
}

impl From<Protocol> for ProtocolFile {
    fn from(p: Protocol) -> Self {
        ProtocolFile {
            settings: (p.settings != p.n).then_some(p.settings),
            n: p.n,
            d: p.d,
            f: p.f,
            h: p.h,
            r: p.r,
        }
    }
}

/// Digit `i` of the little-endian rank.
pub fn digit(rank: usize, i: usize, d: usize) -> usize {
    (rank / d.pow(i as u32)) % d
}

/// Little-endian digits of `rank`.
pub fn digits(rank: usize, n: usize, d: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    let mut r = rank;
    for _ in 0..n {
        out.push(r % d);
        r /= d;
    }
    out
}

pub fn rank(digits: &[usize], d: usize) -> usize {
    digits.iter().rev().fold(0, |acc, &a| acc * d + a)
}

impl Protocol {
    pub fn new(
        n: usize,
        d: usize,
        settings: usize,
        f: Vec<usize>,
        h: Vec<usize>,
        r: Vec<usize>,
    ) -> Result<Self> {
        if n == 0 || d < 2 || settings == 0 {
            return Err(Error::InvalidProtocol(format!(
                "need n >= 1, d >= 2 and at least one setting (n={n}, d={d}, settings={settings})"
            )));
        }
        let size = d
            .checked_pow(n as u32)
            .ok_or_else(|| Error::InvalidProtocol("d^n overflows".into()))?;
        if f.len() != size || h.len() != size || r.len() != n {
            return Err(Error::InvalidProtocol(format!(
                "table sizes (f={}, h={}, r={}) must be ({size}, {size}, {n})",
                f.len(),
                h.len(),
                r.len()
            )));
        }
        if let Some(v) = f.iter().find(|&&v| v >= settings) {
            return Err(Error::InvalidProtocol(format!("f value {v} >= {settings} settings")));
        }
        if let Some(v) = h.iter().chain(&r).find(|&&v| v >= d) {
            return Err(Error::InvalidProtocol(format!("h/r value {v} >= d={d}")));
        }
        Ok(Protocol {
            n,
            d,
            settings,
            f,
            h,
            r,
        })
    }

    /// Tabulates `f` and `h` over all input vectors.
    pub fn from_fns(
        n: usize,
        d: usize,
        settings: usize,
        f: impl Fn(&[usize]) -> usize,
        h: impl Fn(&[usize]) -> usize,
        r: Vec<usize>,
    ) -> Result<Self> {
        let size = d.pow(n as u32);
        let (mut ft, mut ht) = (Vec::with_capacity(size), Vec::with_capacity(size));
        for k in 0..size {
            let a = digits(k, n, d);
            ft.push(f(&a));
            ht.push(h(&a));
        }
        Protocol::new(n, d, settings, ft, ht, r)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    /// Number of Alice box settings `f` maps into.
    pub fn settings(&self) -> usize {
        self.settings
    }
    pub fn f(&self) -> &[usize] {
        &self.f
    }
    pub fn h(&self) -> &[usize] {
        &self.h
    }
    pub fn r(&self) -> &[usize] {
        &self.r
    }
    pub fn input_count(&self) -> usize {
        self.f.len()
    }

    fn check_box(&self, bx: &NsBox) -> Result<()> {
        if bx.n_a() != self.settings || bx.n_b() != self.n || bx.d_a() != self.d || bx.d_b() != self.d
        {
            return Err(Error::ShapeMismatch(format!(
                "protocol needs a {}x{} box with {} outcomes, got {}x{} with ({}, {})",
                self.settings,
                self.n,
                self.d,
                bx.n_a(),
                bx.n_b(),
                bx.d_a(),
                bx.d_b()
            )));
        }
        Ok(())
    }

    fn check_biases(&self, e: &BiasTable) -> Result<()> {
        if e.n_a() != self.settings || e.n_b() != self.n || e.d() != self.d {
            return Err(Error::ShapeMismatch(format!(
                "protocol needs {}x{} correlators over d={}, got {}x{} over d={}",
                self.settings,
                self.n,
                self.d,
                e.n_a(),
                e.n_b(),
                e.d()
            )));
        }
        Ok(())
    }
}

/// `alpha = a_0 + a_1`, `x = a_0 + A`, `g = x' + B`.
pub fn van_dam() -> Protocol {
    Protocol::from_fns(2, 2, 2, |a| a[0] ^ a[1], |a| a[0], vec![0, 0]).expect("valid")
}

/// `h(a) = a_0`, `f(a) = n - 1 - sum_{i=1}^{n-1} prod_{l=1}^{i} (a_0 + a_l)`.
pub fn canonical_nn22(n: usize) -> Result<Protocol> {
    if n < 2 {
        return Err(Error::InvalidArity(format!("canonical protocol needs n >= 2, got {n}")));
    }
    Protocol::from_fns(
        n,
        2,
        n,
        |a| {
            let mut run = 1;
            let mut s = 0;
            for l in 1..n {
                run *= a[0] ^ a[l];
                s += run;
            }
            n - 1 - s
        },
        |a| a[0],
        vec![0; n],
    )
}

/// Two dits over `[d]`: `alpha = -a_0 + a_1`, `x = a_0 + A`, `g = x' + B`.
pub fn d2dd_protocol(d: usize) -> Result<Protocol> {
    if d < 2 {
        return Err(Error::InvalidArity(format!("d2dd protocol needs d >= 2, got {d}")));
    }
    Protocol::from_fns(2, d, d, |a| (d - a[0] + a[1]) % d, |a| a[0], vec![0, 0])
}

/// Signed binary coefficients `c_{j,i} = sum_k [f(k) = j] (-1)^{h(k) + k_i}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedCoefficientTable {
    pub settings: usize,
    pub n: usize,
    // [j][i]
    pub c: Vec<i64>,
}

impl SignedCoefficientTable {
    pub fn get(&self, j: usize, i: usize) -> i64 {
        self.c[j * self.n + i]
    }
}

/// Counting coefficients `c^l_{j,i} = #{k : f(k) = j, k_i - h(k) = l + r(i)}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub settings: usize,
    pub n: usize,
    pub d: usize,
    // [j][i][l]
    pub c: Vec<u64>,
}

impl CoefficientTable {
    pub fn get(&self, j: usize, i: usize, l: usize) -> u64 {
        self.c[(j * self.n + i) * self.d + l]
    }
}

/// Binary coefficient table. `r` is ignored: it only flips the sign of a whole bracket.
pub fn coefficients_nn22(p: &Protocol) -> Result<SignedCoefficientTable> {
    if p.d != 2 {
        return Err(Error::AlphabetMismatch {
            expected: 2,
            got: p.d,
        });
    }
    let mut c = vec![0i64; p.settings * p.n];
    for k in 0..p.input_count() {
        let j = p.f[k];
        for i in 0..p.n {
            let sign = if (p.h[k] ^ digit(k, i, 2)) == 0 { 1 } else { -1 };
            c[j * p.n + i] += sign;
        }
    }
    Ok(SignedCoefficientTable {
        settings: p.settings,
        n: p.n,
        c,
    })
}

/// Counting coefficients over `[d]`.
///
/// The offset `k_i - h(k)` is the value `A + B` must take for Bob to decode correctly
/// through a noiseless channel; `r(i)` shifts it.
pub fn coefficients_nndd(p: &Protocol) -> CoefficientTable {
    let d = p.d;
    let mut c = vec![0u64; p.settings * p.n * d];
    for k in 0..p.input_count() {
        let j = p.f[k];
        for i in 0..p.n {
            let offset = (digit(k, i, d) + d - p.h[k]) % d;
            let l = (offset + d - p.r[i]) % d;
            c[(j * p.n + i) * d + l] += 1;
        }
    }
    CoefficientTable {
        settings: p.settings,
        n: p.n,
        d,
        c,
    }
}

/// Whether `h` vanishes on exactly half of the inputs.
pub fn is_balanced_h(p: &Protocol) -> Result<bool> {
    if p.d != 2 {
        return Err(Error::AlphabetMismatch {
            expected: 2,
            got: p.d,
        });
    }
    let zeros = p.h.iter().filter(|&&v| v == 0).count();
    Ok(2 * zeros == p.input_count())
}

/// Visits every elementary event of one round with Bob asked for dit `i`:
/// `(input rank, guess g, probability)`.
pub(crate) fn for_each_round(
    bx: &NsBox,
    p: &Protocol,
    channel: &Channel,
    input: &[f64],
    i: usize,
    mut visit: impl FnMut(usize, usize, f64),
) {
    let d = p.d;
    for (k, &pk) in input.iter().enumerate() {
        if pk == 0.0 {
            continue;
        }
        let alpha = p.f[k];
        for a_out in 0..d {
            let x = (p.h[k] + a_out) % d;
            for b_out in 0..d {
                let pab = bx.prob(a_out, b_out, alpha, i);
                if pab == 0.0 {
                    continue;
                }
                for received in 0..d {
                    let t = channel.transition(received, x);
                    if t == 0.0 {
                        continue;
                    }
                    let g = (received + b_out + p.r[i]) % d;
                    visit(k, g, pk * pab * t);
                }
            }
        }
    }
}

pub(crate) fn check_round_shapes(
    bx: &NsBox,
    p: &Protocol,
    channel: &Channel,
    input: &InputDistribution,
) -> Result<()> {
    p.check_box(bx)?;
    if channel.d() != p.d {
        return Err(Error::ShapeMismatch(format!(
            "channel alphabet {} != protocol alphabet {}",
            channel.d(),
            p.d
        )));
    }
    if input.n() != p.n || input.d() != p.d {
        return Err(Error::ShapeMismatch(format!(
            "input distribution over {} dits of size {}, protocol needs {} of size {}",
            input.n(),
            input.d(),
            p.n,
            p.d
        )));
    }
    Ok(())
}

/// `Pr(g = a_i | b = i)` by exact enumeration over inputs, box outcomes and channel noise.
pub fn guessing_probability(
    bx: &NsBox,
    p: &Protocol,
    channel: &Channel,
    input: &InputDistribution,
    i: usize,
) -> Result<f64> {
    check_round_shapes(bx, p, channel, input)?;
    if i >= p.n {
        return Err(Error::ShapeMismatch(format!("Bob input {i} >= n={}", p.n)));
    }
    let probs = input.probabilities();
    let mut acc = 0.0;
    for_each_round(bx, p, channel, &probs, i, |k, g, w| {
        if g == digit(k, i, p.d) {
            acc += w;
        }
    });
    Ok(acc)
}

/// Closed form for binary protocols with uniform inputs over a binary symmetric channel:
/// `1/2 + (e_c / 2) (-1)^{r(i)} 2^{-n} sum_j c_{j,i} e_{j,i}`.
pub fn guessing_probability_nn22(biases: &BiasTable, p: &Protocol, e_c: f64, i: usize) -> Result<f64> {
    Ok(0.5 + 0.5 * e_c * guess_bias_nn22(biases, p, i)?)
}

/// The bracket `e_i` multiplying `e_c / 2` in the closed-form guessing probability.
pub fn guess_bias_nn22(biases: &BiasTable, p: &Protocol, i: usize) -> Result<f64> {
    p.check_biases(biases)?;
    if i >= p.n {
        return Err(Error::ShapeMismatch(format!("Bob input {i} >= n={}", p.n)));
    }
    let c = coefficients_nn22(p)?;
    let s: f64 = (0..p.settings)
        .map(|j| c.get(j, i) as f64 * biases.e(j, i))
        .sum();
    let sign = if p.r[i] == 0 { 1.0 } else { -1.0 };
    Ok(sign * s / p.input_count() as f64)
}

/// Distribution of the decoding error `E = g - a_i` given `b = i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub b: usize,
    /// `Pr(E = k | b)`.
    pub probs: Vec<f64>,
    /// `F_k` with `Pr(E = k | b) = (1 + F_k) / d`.
    pub deviations: Vec<f64>,
}

/// Error distribution for uniform inputs, evaluated in Fourier space:
/// `F_k = (1/d) sum_{t>0} u_t w^{-kt} sum_{l>0} e_l (w^{lt} - 1)` where `u_t` is the
/// transform of the noiseless error distribution and `e_l` are the channel biases.
pub fn error_distribution(bx: &NsBox, p: &Protocol, channel: &Channel, i: usize) -> Result<ErrorDistribution> {
    check_round_shapes(bx, p, channel, &InputDistribution::uniform(p.n, p.d))?;
    if i >= p.n {
        return Err(Error::ShapeMismatch(format!("Bob input {i} >= n={}", p.n)));
    }
    let e = bx.biases()?;
    let c = coefficients_nndd(p);
    let d = p.d;
    let df = d as f64;
    let total = p.input_count() as f64;

    // noiseless error distribution: sum_{j,l} c^l/d^n (1 + e^{l+k}) / d
    let noiseless: Vec<f64> = (0..d)
        .map(|k| {
            let mut acc = 0.0;
            for j in 0..p.settings {
                for l in 0..d {
                    let cnt = c.get(j, i, l);
                    if cnt > 0 {
                        acc += cnt as f64 / total * (1.0 + e.get(j, i, (l + k) % d)) / df;
                    }
                }
            }
            acc
        })
        .collect();

    let omega = |x: usize| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (x % d) as f64 / df);
    let u: Vec<Complex64> = (0..d)
        .map(|t| (0..d).map(|k| noiseless[k] * omega(k * t)).sum())
        .collect();
    let eb = channel.shift_biases();
    let channel_hat: Vec<Complex64> = (0..d)
        .map(|t| {
            (1..d)
                .map(|l| eb[l] * (omega(l * t) - Complex64::new(1.0, 0.0)))
                .sum()
        })
        .collect();

    let deviations: Vec<f64> = (0..d)
        .map(|k| {
            let s: Complex64 = (1..d)
                .map(|t| u[t] * omega((d - k % d) * t) * channel_hat[t])
                .sum();
            s.re / df
        })
        .collect();
    let probs = deviations.iter().map(|fk| (1.0 + fk) / df).collect();
    Ok(ErrorDistribution {
        b: i,
        probs,
        deviations,
    })
}
