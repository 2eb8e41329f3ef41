//! Bipartite nonsignaling boxes and their correlator parametrization.
//!
//! A box is the full table `P(A=a, B=b | alpha, beta)`. Settings and outcomes are
//! 0-based. The correlators (biases) are `e^k_{j,i} = d * Pr(A + B = k mod d | j, i) - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validation tolerance used when none is given explicitly.
pub const DEFAULT_TOL: f64 = 1e-9;

/// A bipartite nonsignaling box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxFile", into = "BoxFile")]
pub struct NsBox {
    n_a: usize,
    n_b: usize,
    d_a: usize,
    d_b: usize,
    // flat, indexed [alpha][beta][a][b]
    p: Vec<f64>,
}

/// On-disk layout: `p` is nested `[alpha][beta][a][b]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxFile {
    pub n_a: usize,
    pub n_b: usize,
    pub d_a: usize,
    pub d_b: usize,
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
}

impl TryFrom<BoxFile> for NsBox {
    type Error = Error;

    fn try_from(file: BoxFile) -> Result<Self> {
        let shape_err = || {
            Error::DimensionMismatch(format!(
                "table is not {}x{}x{}x{}",
                file.n_a, file.n_b, file.d_a, file.d_b
            ))
        };
        if file.p.len() != file.n_a {
            return Err(shape_err());
        }
        let mut flat = Vec::with_capacity(file.n_a * file.n_b * file.d_a * file.d_b);
        for per_alpha in &file.p {
            if per_alpha.len() != file.n_b {
                return Err(shape_err());
            }
            for per_beta in per_alpha {
                if per_beta.len() != file.d_a {
                    return Err(shape_err());
                }
                for row in per_beta {
                    if row.len() != file.d_b {
                        return Err(shape_err());
                    }
                    flat.extend_from_slice(row);
                }
            }
        }
        NsBox::new(file.n_a, file.n_b, file.d_a, file.d_b, flat)
    }
}

impl From<NsBox> for BoxFile {
    fn from(b: NsBox) -> Self {
        let p = (0..b.n_a)
            .map(|alpha| {
                (0..b.n_b)
                    .map(|beta| {
                        (0..b.d_a)
                            .map(|a| (0..b.d_b).map(|bb| b.prob(a, bb, alpha, beta)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        BoxFile {
            n_a: b.n_a,
            n_b: b.n_b,
            d_a: b.d_a,
            d_b: b.d_b,
            p,
        }
    }
}

impl NsBox {
    /// Builds a box from a flat `[alpha][beta][a][b]` table and checks every invariant
    /// at [`DEFAULT_TOL`].
    pub fn new(n_a: usize, n_b: usize, d_a: usize, d_b: usize, table: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(n_a, n_b, d_a, d_b, table, DEFAULT_TOL)
    }

    pub fn with_tolerance(
        n_a: usize,
        n_b: usize,
        d_a: usize,
        d_b: usize,
        table: Vec<f64>,
        tol: f64,
    ) -> Result<Self> {
        if n_a == 0 || n_b == 0 || d_a == 0 || d_b == 0 {
            return Err(Error::DimensionMismatch("all dimensions must be positive".into()));
        }
        if table.len() != n_a * n_b * d_a * d_b {
            return Err(Error::DimensionMismatch(format!(
                "table has {} entries, expected {}",
                table.len(),
                n_a * n_b * d_a * d_b
            )));
        }
        let bx = NsBox {
            n_a,
            n_b,
            d_a,
            d_b,
            p: table,
        };
        bx.validate(tol)?;
        Ok(bx)
    }

    fn validate(&self, tol: f64) -> Result<()> {
        for alpha in 0..self.n_a {
            for beta in 0..self.n_b {
                let mut sum = 0.0;
                for a in 0..self.d_a {
                    for b in 0..self.d_b {
                        let v = self.prob(a, b, alpha, beta);
                        if !v.is_finite() || v < -tol {
                            return Err(Error::NegativeProbability {
                                a,
                                b,
                                alpha,
                                beta,
                                value: v,
                            });
                        }
                        sum += v;
                    }
                }
                if (sum - 1.0).abs() > tol {
                    return Err(Error::Normalization { alpha, beta, sum });
                }
            }
        }
        let (residual, msg) = self.signaling_witness();
        if residual > tol {
            return Err(Error::Signaling(msg));
        }
        Ok(())
    }

    fn idx(&self, a: usize, b: usize, alpha: usize, beta: usize) -> usize {
        ((alpha * self.n_b + beta) * self.d_a + a) * self.d_b + b
    }

    /// `P(A=a, B=b | alpha, beta)`.
    pub fn prob(&self, a: usize, b: usize, alpha: usize, beta: usize) -> f64 {
        self.p[self.idx(a, b, alpha, beta)]
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }
    pub fn n_b(&self) -> usize {
        self.n_b
    }
    pub fn d_a(&self) -> usize {
        self.d_a
    }
    pub fn d_b(&self) -> usize {
        self.d_b
    }

    /// Flat `[alpha][beta][a][b]` table.
    pub fn table(&self) -> &[f64] {
        &self.p
    }

    /// Alice's marginal `P(A=a | alpha)`, read at `beta = 0`.
    pub fn marginal_a(&self, a: usize, alpha: usize) -> f64 {
        (0..self.d_b).map(|b| self.prob(a, b, alpha, 0)).sum()
    }

    /// Bob's marginal `P(B=b | beta)`, read at `alpha = 0`.
    pub fn marginal_b(&self, b: usize, beta: usize) -> f64 {
        (0..self.d_a).map(|a| self.prob(a, b, 0, beta)).sum()
    }

    /// Largest dependence of a local marginal on the remote setting.
    pub fn nonsignaling_residual(&self) -> f64 {
        self.signaling_witness().0
    }

    fn signaling_witness(&self) -> (f64, String) {
        let mut worst = 0.0f64;
        let mut msg = String::new();
        // A -> B: Bob's marginal must not depend on alpha
        for beta in 0..self.n_b {
            for b in 0..self.d_b {
                let reference: f64 = (0..self.d_a).map(|a| self.prob(a, b, 0, beta)).sum();
                for alpha in 1..self.n_a {
                    let m: f64 = (0..self.d_a).map(|a| self.prob(a, b, alpha, beta)).sum();
                    let dev = (m - reference).abs();
                    if dev > worst {
                        worst = dev;
                        msg = format!(
                            "P(B={b}|beta={beta}) changes by {dev:.3e} between alpha=0 and alpha={alpha}"
                        );
                    }
                }
            }
        }
        // B -> A
        for alpha in 0..self.n_a {
            for a in 0..self.d_a {
                let reference: f64 = (0..self.d_b).map(|b| self.prob(a, b, alpha, 0)).sum();
                for beta in 1..self.n_b {
                    let m: f64 = (0..self.d_b).map(|b| self.prob(a, b, alpha, beta)).sum();
                    let dev = (m - reference).abs();
                    if dev > worst {
                        worst = dev;
                        msg = format!(
                            "P(A={a}|alpha={alpha}) changes by {dev:.3e} between beta=0 and beta={beta}"
                        );
                    }
                }
            }
        }
        (worst, msg)
    }

    /// Correlators `e^k_{j,i} = d * Pr(A + B = k | alpha=j, beta=i) - 1`.
    pub fn biases(&self) -> Result<BiasTable> {
        if self.d_a != self.d_b {
            return Err(Error::DimensionMismatch(format!(
                "biases need equal outcome counts, got d_a={} d_b={}",
                self.d_a, self.d_b
            )));
        }
        let d = self.d_a;
        let mut e = vec![0.0; self.n_a * self.n_b * d];
        for j in 0..self.n_a {
            for i in 0..self.n_b {
                let base = (j * self.n_b + i) * d;
                let mut pk = vec![0.0; d];
                for a in 0..d {
                    for b in 0..d {
                        pk[(a + b) % d] += self.prob(a, b, j, i);
                    }
                }
                for k in 0..d {
                    e[base + k] = d as f64 * pk[k] - 1.0;
                }
            }
        }
        Ok(BiasTable {
            n_a: self.n_a,
            n_b: self.n_b,
            d,
            e,
        })
    }

    /// Full-correlation box with uniform marginals:
    /// `P(a, b | j, i) = (1 + e^{a + b}_{j,i}) / d^2`.
    pub fn from_biases(table: &BiasTable) -> Result<Self> {
        let d = table.d;
        let dd = (d * d) as f64;
        let mut p = Vec::with_capacity(table.n_a * table.n_b * d * d);
        for j in 0..table.n_a {
            for i in 0..table.n_b {
                for a in 0..d {
                    for b in 0..d {
                        let v = (1.0 + table.get(j, i, (a + b) % d)) / dd;
                        if v < -DEFAULT_TOL {
                            return Err(Error::InvalidBias(format!(
                                "e^{}_({j},{i}) = {} gives a negative probability",
                                (a + b) % d,
                                table.get(j, i, (a + b) % d)
                            )));
                        }
                        p.push(v.max(0.0));
                    }
                }
            }
        }
        NsBox::new(table.n_a, table.n_b, d, d, p)
    }

    /// Convex combination of equally shaped boxes.
    pub fn mix(boxes: &[NsBox], weights: &[f64]) -> Result<Self> {
        let first = boxes
            .first()
            .ok_or_else(|| Error::InvalidWeights("no boxes given".into()))?;
        if boxes.len() != weights.len() {
            return Err(Error::InvalidWeights(format!(
                "{} boxes but {} weights",
                boxes.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= -DEFAULT_TOL)) {
            return Err(Error::InvalidWeights("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > DEFAULT_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        for b in boxes {
            if (b.n_a, b.n_b, b.d_a, b.d_b) != (first.n_a, first.n_b, first.d_a, first.d_b) {
                return Err(Error::ShapeMismatch("boxes in a mixture must share a shape".into()));
            }
        }
        let mut p = vec![0.0; first.p.len()];
        for (b, &w) in boxes.iter().zip(weights) {
            for (acc, v) in p.iter_mut().zip(&b.p) {
                *acc += w * v;
            }
        }
        NsBox::new(first.n_a, first.n_b, first.d_a, first.d_b, p)
    }

    /// Binary-outcome box from Collins-Gisin data.
    pub fn from_collins_gisin(cg: &CollinsGisinTable) -> Result<Self> {
        let n_a = cg.pa.len();
        let n_b = cg.pb.len();
        if cg.joint.len() != n_b || cg.joint.iter().any(|row| row.len() != n_a) {
            return Err(Error::InvalidCg(format!(
                "joint must be {n_b} rows (Bob settings) of {n_a} entries (Alice settings)"
            )));
        }
        let mut p = Vec::with_capacity(n_a * n_b * 4);
        for j in 0..n_a {
            for i in 0..n_b {
                let joint = cg.joint[i][j];
                p.push(joint);
                p.push(cg.pa[j] - joint);
                p.push(cg.pb[i] - joint);
                p.push(1.0 - cg.pa[j] - cg.pb[i] + joint);
            }
        }
        NsBox::new(n_a, n_b, 2, 2, p).map_err(|e| Error::InvalidCg(e.to_string()))
    }

    pub fn to_collins_gisin(&self) -> Result<CollinsGisinTable> {
        if self.d_a != 2 || self.d_b != 2 {
            return Err(Error::DimensionMismatch(
                "Collins-Gisin form needs binary outcomes".into(),
            ));
        }
        Ok(CollinsGisinTable {
            pa: (0..self.n_a).map(|j| self.marginal_a(0, j)).collect(),
            pb: (0..self.n_b).map(|i| self.marginal_b(0, i)).collect(),
            joint: (0..self.n_b)
                .map(|i| (0..self.n_a).map(|j| self.prob(0, 0, j, i)).collect())
                .collect(),
        })
    }
}

/// Correlators `e^k_{j,i}` for `k` in `[d]`, Alice setting `j`, Bob setting `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasTable {
    n_a: usize,
    n_b: usize,
    d: usize,
    // indexed [j][i][k]
    e: Vec<f64>,
}

impl BiasTable {
    /// Takes entries indexed `[j][i][k]` and checks `sum_k e^k_{j,i} = 0`.
    pub fn new(n_a: usize, n_b: usize, d: usize, entries: Vec<f64>) -> Result<Self> {
        if d < 2 || n_a == 0 || n_b == 0 {
            return Err(Error::DimensionMismatch(format!(
                "bias table needs d >= 2 and at least one setting per party (got n_a={n_a}, n_b={n_b}, d={d})"
            )));
        }
        if entries.len() != n_a * n_b * d {
            return Err(Error::DimensionMismatch(format!(
                "{} entries, expected {}",
                entries.len(),
                n_a * n_b * d
            )));
        }
        for (cell, chunk) in entries.chunks(d).enumerate() {
            let s: f64 = chunk.iter().sum();
            if s.abs() > DEFAULT_TOL || chunk.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidBias(format!(
                    "correlators of cell (j={}, i={}) sum to {s}",
                    cell / n_b,
                    cell % n_b
                )));
            }
        }
        Ok(BiasTable { n_a, n_b, d, e: entries })
    }

    /// Binary table from the scalar correlators `e_{j,i}`; sets `e^1 = -e^0`.
    pub fn binary(n_a: usize, n_b: usize, mut e: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = Vec::with_capacity(n_a * n_b * 2);
        for j in 0..n_a {
            for i in 0..n_b {
                let v = e(j, i);
                entries.push(v);
                entries.push(-v);
            }
        }
        BiasTable {
            n_a,
            n_b,
            d: 2,
            e: entries,
        }
    }

    /// Binary table from rows `rows[j][i] = e_{j,i}`.
    pub fn from_binary_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_a = rows.len();
        let n_b = rows.first().map_or(0, Vec::len);
        if n_a == 0 || n_b == 0 || rows.iter().any(|r| r.len() != n_b) {
            return Err(Error::DimensionMismatch("ragged or empty bias rows".into()));
        }
        Ok(Self::binary(n_a, n_b, |j, i| rows[j][i]))
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

    /// `e^k_{j,i}`.
    pub fn get(&self, j: usize, i: usize, k: usize) -> f64 {
        self.e[(j * self.n_b + i) * self.d + k]
    }

    /// Scalar binary correlator `e_{j,i} = e^0_{j,i}`.
    pub fn e(&self, j: usize, i: usize) -> f64 {
        self.get(j, i, 0)
    }

    /// Raw entries indexed `[j][i][k]`.
    pub fn entries(&self) -> &[f64] {
        &self.e
    }

    pub fn scaled(&self, q: f64) -> Self {
        BiasTable {
            e: self.e.iter().map(|v| q * v).collect(),
            ..self.clone()
        }
    }

    /// Whether every correlator lies in `[-1, d-1]`, i.e. the table comes from a box.
    pub fn is_valid(&self, tol: f64) -> bool {
        let hi = self.d as f64 - 1.0;
        self.e.iter().all(|&v| v >= -1.0 - tol && v <= hi + tol)
    }

    pub fn max_abs_diff(&self, other: &BiasTable) -> f64 {
        self.e
            .iter()
            .zip(&other.e)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Collins-Gisin representation of a binary-outcome box.
///
/// `pa[j] = P(A_j = 0)`, `pb[i] = P(B_i = 0)`, and `joint[i][j] = P(A_j = 0, B_i = 0)`
/// (rows are Bob settings, columns Alice settings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollinsGisinTable {
    pub pa: Vec<f64>,
    pub pb: Vec<f64>,
    pub joint: Vec<Vec<f64>>,
}

impl CollinsGisinTable {
    pub fn max_abs_diff(&self, other: &CollinsGisinTable) -> f64 {
        let flat = |t: &CollinsGisinTable| -> Vec<f64> {
            t.pa
                .iter()
                .chain(&t.pb)
                .chain(t.joint.iter().flatten())
                .copied()
                .collect()
        };
        flat(self)
            .iter()
            .zip(flat(other).iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Named boxes used throughout the experiments.
pub mod catalog {
    use super::*;

    /// PR box: `A + B = alpha * beta (mod 2)`.
    pub fn pr_box() -> NsBox {
        let mut p = Vec::with_capacity(16);
        for alpha in 0..2 {
            for beta in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        p.push(if (a ^ b) == alpha * beta { 0.5 } else { 0.0 });
                    }
                }
            }
        }
        NsBox::new(2, 2, 2, 2, p).expect("PR box is valid")
    }

    /// Uniform box with `n` settings and `d` outcomes per party.
    pub fn white_noise(n: usize, d: usize) -> NsBox {
        let v = 1.0 / (d * d) as f64;
        NsBox::new(n, n, d, d, vec![v; n * n * d * d]).expect("uniform box is valid")
    }

    /// Deterministic local box `A = a_map[alpha]`, `B = b_map[beta]`.
    pub fn local_deterministic(a_map: &[usize], b_map: &[usize], d: usize) -> Result<NsBox> {
        if a_map.iter().chain(b_map).any(|&v| v >= d) {
            return Err(Error::DimensionMismatch(format!("outcome out of range for d={d}")));
        }
        let mut p = Vec::with_capacity(a_map.len() * b_map.len() * d * d);
        for &oa in a_map {
            for &ob in b_map {
                for a in 0..d {
                    for b in 0..d {
                        p.push(if a == oa && b == ob { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        NsBox::new(a_map.len(), b_map.len(), d, d, p)
    }

    /// Correlators of the box maximally violating the `n`-setting binary family:
    /// `e_{0,i} = 1` and `e_{j,i} = (-1)^{[j = n - i]}` for `j > 0`.
    pub fn max_violation_biases(n: usize) -> BiasTable {
        BiasTable::binary(n, n, |j, i| {
            if j == 0 || j + i != n {
                1.0
            } else {
                -1.0
            }
        })
    }

    pub fn max_violation_nn22(n: usize) -> NsBox {
        NsBox::from_biases(&max_violation_biases(n)).expect("max-violation box is valid")
    }

    /// The three boxes mixed in the 2222 comparison slice, in mixing order:
    /// the PR box, the local box `A = alpha, B = 0`, and the local box `A = alpha, B = beta`.
    pub fn fig2_boxes() -> [NsBox; 3] {
        [
            pr_box(),
            local_deterministic(&[0, 1], &[0, 0], 2).expect("valid"),
            local_deterministic(&[0, 1], &[0, 1], 2).expect("valid"),
        ]
    }

    /// Mixture with weights `(1 - q1 - q2, q1, q2)` over [`fig2_boxes`].
    pub fn fig2_mixture(q1: f64, q2: f64) -> Result<NsBox> {
        NsBox::mix(&fig2_boxes(), &[1.0 - q1 - q2, q1, q2])
    }

    fn halves(rows: [[f64; 3]; 3], scale: f64) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| r.iter().map(|v| v * scale).collect())
            .collect()
    }

    pub fn cg3322_p1_table() -> CollinsGisinTable {
        CollinsGisinTable {
            pa: vec![0.5; 3],
            pb: vec![0.5; 3],
            joint: halves([[1.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]], 0.5),
        }
    }

    pub fn cg3322_p2_table() -> CollinsGisinTable {
        CollinsGisinTable {
            pa: vec![0.5; 3],
            pb: vec![0.5; 3],
            joint: halves([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]], 0.5),
        }
    }

    pub fn cg3322_pn_table() -> CollinsGisinTable {
        CollinsGisinTable {
            pa: vec![0.5; 3],
            pb: vec![0.5; 3],
            joint: vec![vec![0.25; 3]; 3],
        }
    }

    pub fn cg3322_p1() -> NsBox {
        NsBox::from_collins_gisin(&cg3322_p1_table()).expect("p1 is valid")
    }

    pub fn cg3322_p2() -> NsBox {
        NsBox::from_collins_gisin(&cg3322_p2_table()).expect("p2 is valid")
    }

    pub fn cg3322_pn() -> NsBox {
        NsBox::from_collins_gisin(&cg3322_pn_table()).expect("pN is valid")
    }

    /// `p_c = c (p1 + p2) / 2 + (1 - c) pN`.
    pub fn cg3322_family(c: f64) -> Result<NsBox> {
        NsBox::mix(
            &[cg3322_p1(), cg3322_p2(), cg3322_pn()],
            &[c / 2.0, c / 2.0, 1.0 - c],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::catalog::*;
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn pr_box_has_uniform_marginals() {
        let b = pr_box();
        for x in 0..2 {
            for o in 0..2 {
                assert!(close(b.marginal_a(o, x), 0.5));
                assert!(close(b.marginal_b(o, x), 0.5));
            }
        }
    }

    #[test]
    fn signaling_table_rejected() {
        // P(0,0|0,0) = 1 but P(0,0|1,0) = 0, rest uniform
        let mut p = vec![0.25; 16];
        let set = |p: &mut Vec<f64>, alpha: usize, beta: usize, vals: [f64; 4]| {
            let base = (alpha * 2 + beta) * 4;
            p[base..base + 4].copy_from_slice(&vals);
        };
        set(&mut p, 0, 0, [1.0, 0.0, 0.0, 0.0]);
        set(&mut p, 1, 0, [0.0, 0.5, 0.0, 0.5]);
        assert!(matches!(NsBox::new(2, 2, 2, 2, p), Err(Error::Signaling(_))));
    }

    #[test]
    fn zero_table_is_not_normalized() {
        assert!(matches!(
            NsBox::new(2, 2, 2, 2, vec![0.0; 16]),
            Err(Error::Normalization { .. })
        ));
    }

    #[test]
    fn negative_entry_rejected() {
        let mut p = vec![0.25; 16];
        p[0] = -0.25;
        p[1] = 0.75;
        assert!(matches!(
            NsBox::new(2, 2, 2, 2, p),
            Err(Error::NegativeProbability { .. })
        ));
    }

    #[test]
    fn wrong_table_length() {
        assert!(matches!(
            NsBox::new(2, 2, 2, 2, vec![0.25; 15]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn pr_box_biases() {
        let e = pr_box().biases().unwrap();
        assert!(close(e.e(0, 0), 1.0));
        assert!(close(e.e(1, 0), 1.0));
        assert!(close(e.e(0, 1), 1.0));
        assert!(close(e.e(1, 1), -1.0));
    }

    #[test]
    fn white_noise_biases_vanish() {
        let e = white_noise(3, 4).biases().unwrap();
        assert!(e.entries().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn unequal_outcomes_have_no_biases() {
        let p = vec![1.0 / 6.0; 2 * 2 * 2 * 3];
        let b = NsBox::new(2, 2, 2, 3, p).unwrap();
        assert!(matches!(b.biases(), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn max_violation_sign_pattern() {
        let e = max_violation_nn22(3).biases().unwrap();
        assert!(close(e.e(2, 1), -1.0));
        assert!(close(e.e(1, 2), -1.0));
        assert!(close(e.e(1, 1), 1.0));
        assert!(close(e.e(2, 0), 1.0));
        let e2 = max_violation_nn22(2).biases().unwrap();
        let pr = pr_box().biases().unwrap();
        assert!(e2.max_abs_diff(&pr) < 1e-12);
    }

    #[test]
    fn zero_biases_give_uniform_box() {
        let t = BiasTable::binary(2, 2, |_, _| 0.0);
        let b = NsBox::from_biases(&t).unwrap();
        assert!(b.table().iter().all(|&v| close(v, 0.25)));
    }

    #[test]
    fn pr_biases_round_trip_to_pr_box() {
        let t = pr_box().biases().unwrap();
        let b = NsBox::from_biases(&t).unwrap();
        assert_eq!(b.table().len(), 16);
        for (x, y) in b.table().iter().zip(pr_box().table()) {
            assert!(close(*x, *y));
        }
    }

    #[test]
    fn out_of_range_bias_rejected() {
        let t = BiasTable::new(1, 1, 2, vec![3.0, -3.0]).unwrap();
        assert!(matches!(NsBox::from_biases(&t), Err(Error::InvalidBias(_))));
    }

    #[test]
    fn bias_rows_must_sum_to_zero() {
        assert!(matches!(
            BiasTable::new(1, 1, 3, vec![1.0, 0.0, 0.0]),
            Err(Error::InvalidBias(_))
        ));
    }

    #[test]
    fn trivial_mixture_is_identity() {
        let b = pr_box();
        assert_eq!(NsBox::mix(&[b.clone()], &[1.0]).unwrap(), b);
    }

    #[test]
    fn mixture_errors() {
        let b = pr_box();
        assert!(matches!(
            NsBox::mix(&[b.clone(), b.clone()], &[0.7, 0.7]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            NsBox::mix(&[b.clone(), white_noise(3, 2)], &[0.5, 0.5]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            NsBox::mix(&[b.clone(), b], &[1.5, -0.5]),
            Err(Error::InvalidWeights(_))
        ));
    }

    #[test]
    fn noisy_max_violation_scales_biases() {
        let n = 4;
        let q = 0.37;
        let mixed = NsBox::mix(&[max_violation_nn22(n), white_noise(n, 2)], &[q, 1.0 - q]).unwrap();
        let expected = max_violation_biases(n).scaled(q);
        assert!(mixed.biases().unwrap().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn fig2_witness_point_biases() {
        let e = fig2_mixture(0.55, 0.05).unwrap().biases().unwrap();
        assert!(close(e.e(0, 0), 1.0));
        assert!(close(e.e(1, 0), -0.2));
        assert!(close(e.e(0, 1), 0.9));
        assert!(close(e.e(1, 1), -0.9));
    }

    #[test]
    fn cg_tables_match_published_entries() {
        let cg = cg3322_pn().to_collins_gisin().unwrap();
        assert!(cg.joint.iter().flatten().all(|&v| close(v, 0.25)));
        assert!(cg.pa.iter().chain(&cg.pb).all(|&v| close(v, 0.5)));
        let p1 = cg3322_p1().to_collins_gisin().unwrap();
        assert!(close(p1.joint[1][1], 0.0));
    }

    #[test]
    fn cg_bias_patterns() {
        let e1 = cg3322_p1().biases().unwrap();
        for j in 0..3 {
            assert!(close(e1.e(j, 0), 1.0));
        }
        let e2 = cg3322_p2().biases().unwrap();
        for j in 0..3 {
            for i in 0..3 {
                // every diagonal joint of p2 is zero
                let expected = if i == j { -1.0 } else { 1.0 };
                assert!(close(e2.e(j, i), expected), "p2 e_({j},{i})");
            }
        }
        let c = 0.4;
        let ec = cg3322_family(c).unwrap().biases().unwrap();
        let signs = [[0.0, 1.0, 1.0], [1.0, -1.0, 1.0], [1.0, 1.0, -1.0]];
        for j in 0..3 {
            for i in 0..3 {
                assert!(close(ec.e(j, i), c * signs[i][j]));
            }
        }
    }

    #[test]
    fn cg_from_bias_formula() {
        for b in [cg3322_p1(), cg3322_p2(), fig2_mixture(0.3, 0.1).unwrap()] {
            let cg = b.to_collins_gisin().unwrap();
            let e = b.biases().unwrap();
            for j in 0..b.n_a() {
                for i in 0..b.n_b() {
                    let formula = 4.0 * cg.joint[i][j] - 2.0 * cg.pa[j] - 2.0 * cg.pb[i] + 1.0;
                    assert!(close(formula, e.e(j, i)));
                }
            }
        }
    }

    #[test]
    fn invalid_cg_rejected() {
        let cg = CollinsGisinTable {
            pa: vec![0.5, 0.5],
            pb: vec![0.5, 0.5],
            joint: vec![vec![0.7, 0.25], vec![0.25, 0.25]],
        };
        assert!(matches!(NsBox::from_collins_gisin(&cg), Err(Error::InvalidCg(_))));
    }

    #[test]
    fn box_file_round_trip() {
        let b = fig2_mixture(0.2, 0.1).unwrap();
        let text = serde_json::to_string(&b).unwrap();
        assert!(text.contains("\"n_a\":2"));
        let back: NsBox = serde_json::from_str(&text).unwrap();
        assert_eq!(back, b);
        let bad = r#"{"n_a":1,"n_b":1,"d_a":2,"d_b":2,"p":[[[[1.0,0.0],[0.0,0.5]]]]}"#;
        assert!(serde_json::from_str::<NsBox>(bad).is_err());
    }
}
