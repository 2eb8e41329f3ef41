use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Check, Provenance};
use crate::error::{Error, Result};
use crate::inequality::{epsilon_envelope, tlm_quantum_boundary, uffink};
use crate::nsbox::catalog::fig2_mixture;
use crate::nsbox::DEFAULT_TOL;

/// `(q1, q2)` where Uffink holds but the correlated-input family is violated.
pub const FIG2_WITNESS: (f64, f64) = (0.55, 0.05);

pub const Q2_MAX: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub q1: f64,
    pub q2: f64,
    pub uffink_lhs: f64,
    pub envelope_lhs: f64,
    pub envelope_eps: f64,
    pub tlm_quantum: bool,
    pub uffink_ok: bool,
    pub envelope_ok: bool,
}

pub fn point(q1: f64, q2: f64) -> Result<RegionPoint> {
    let e = fig2_mixture(q1, q2)?.biases()?;
    let u = uffink().evaluate(&e)?;
    let env = epsilon_envelope(&e)?;
    let clamp = |x: f64| x.clamp(-1.0, 1.0);
    Ok(RegionPoint {
        q1,
        q2,
        uffink_lhs: u.lhs,
        envelope_lhs: env.max_lhs,
        envelope_eps: env.epsilon,
        tlm_quantum: tlm_quantum_boundary(clamp(e.e(0, 0)), clamp(e.e(0, 1)), clamp(e.e(1, 0)), clamp(e.e(1, 1)))?,
        uffink_ok: !u.violated,
        envelope_ok: env.max_lhs - 4.0 <= DEFAULT_TOL,
    })
}

fn grid_counts(step: f64) -> Result<(usize, usize)> {
    if !(step > 0.0 && step <= 0.01) {
        return Err(Error::Domain(format!("grid step {step} must be in (0, 0.01]")));
    }
    Ok(((1.0 / step).round() as usize, (Q2_MAX / step).round() as usize))
}

/// Grid points ordered by `q2` then `q1`; only convex mixtures (`q1 + q2 <= 1`).
pub(crate) fn scan(step: f64) -> Result<Vec<RegionPoint>> {
    let (n1, n2) = grid_counts(step)?;
    let mut out = Vec::new();
    for b in 0..=n2 {
        for a in 0..=n1 {
            let (q1, q2) = (a as f64 * step, b as f64 * step);
            if q1 + q2 <= 1.0 + 1e-12 {
                out.push(point(q1, q2)?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionScan {
    pub grid_step: f64,
    pub points: Vec<RegionPoint>,
    /// Per `q2` row: largest offset, in cells, between the envelope and TLM boundaries.
    pub max_boundary_offset: usize,
    pub tlm_not_envelope: usize,
    pub envelope_not_uffink: usize,
    pub checks: Vec<Check>,
    pub runtime_secs: f64,
}

impl RegionScan {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn first_true(row: &[&RegionPoint], pick: impl Fn(&RegionPoint) -> bool) -> Option<usize> {
    row.iter().position(|p| pick(p))
}

pub fn repro_fig2(grid_step: f64) -> Result<RegionScan> {
    let start = Instant::now();
    let points = scan(grid_step)?;
    let (_, n2) = grid_counts(grid_step)?;

    let envelope_not_uffink = points.iter().filter(|p| p.envelope_ok && !p.uffink_ok).count();
    let tlm_not_envelope = points.iter().filter(|p| p.tlm_quantum && !p.envelope_ok).count();

    // both regions are upward-closed in q1 along each row; compare first satisfied index
    let mut max_offset = 0;
    let mut monotone = true;
    for b in 0..=n2 {
        let row: Vec<&RegionPoint> = points
            .iter()
            .filter(|p| (p.q2 / grid_step).round() as usize == b)
            .collect();
        for pick in [|p: &RegionPoint| p.envelope_ok, |p: &RegionPoint| p.tlm_quantum] {
            if let Some(k) = first_true(&row, pick) {
                monotone &= row[k..].iter().all(|p| pick(p));
            }
        }
        let env = first_true(&row, |p| p.envelope_ok).unwrap_or(row.len());
        let tlm = first_true(&row, |p| p.tlm_quantum).unwrap_or(row.len());
        max_offset = max_offset.max(env.abs_diff(tlm));
    }

    let w = point(FIG2_WITNESS.0, FIG2_WITNESS.1)?;
    let pr = point(0.0, 0.0)?;
    let local = point(1.0, 0.0)?;

    use Provenance::{DerivedOracle, Published};
    let checks = vec![
        Check::equal("envelope-satisfied within Uffink-satisfied", 0, envelope_not_uffink, DerivedOracle),
        Check::at_most("envelope vs TLM boundary offset (cells)", 1.0, max_offset as f64, Published),
        Check::holds("satisfied regions are upward-closed in q1", monotone, DerivedOracle),
        Check::close("witness Uffink lhs", 3.88, w.uffink_lhs, 1e-12, DerivedOracle),
        Check::close("witness envelope max", 4.392, w.envelope_lhs, 1e-3, DerivedOracle),
        Check::close("witness envelope eps", 8.0 / 15.0, w.envelope_eps, 1e-3, DerivedOracle),
        Check::holds("witness: Uffink ok, envelope violated, not TLM", w.uffink_ok && !w.envelope_ok && !w.tlm_quantum, DerivedOracle),
        Check::holds("PR corner violates everything", !pr.uffink_ok && !pr.envelope_ok && !pr.tlm_quantum, DerivedOracle),
        Check::holds("local corner satisfies everything", local.uffink_ok && local.envelope_ok && local.tlm_quantum, DerivedOracle),
    ];
    Ok(RegionScan {
        grid_step,
        points,
        max_boundary_offset: max_offset,
        tlm_not_envelope,
        envelope_not_uffink,
        checks,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn witness_point() {
        let w = point(0.55, 0.05).unwrap();
        assert!((w.uffink_lhs - 3.88).abs() < 1e-12);
        assert!(w.uffink_ok && !w.envelope_ok && !w.tlm_quantum);
    }

    #[test]
    fn coarse_scan_passes() {
        let s = repro_fig2(0.01).unwrap();
        let failed: Vec<_> = s.checks.iter().filter(|c| !c.passed).collect();
        assert!(failed.is_empty(), "{failed:#?}");
        assert!(s.points.iter().all(|p| p.q1 + p.q2 <= 1.0 + 1e-12));
        assert!(s.points.iter().all(|p| p.q2 <= Q2_MAX + 1e-12));
    }

    #[test]
    fn step_validation() {
        assert!(repro_fig2(0.02).is_err());
        assert!(repro_fig2(0.0).is_err());
    }
}
