//! Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion and exits nonzero on failure.

use std::time::{Duration, Instant};

use icbell_core::experiments::{
    repro_3322, repro_concavity, repro_correlated, repro_d2dd, repro_fig2, repro_qbound,
    ExperimentResult,
};
use icbell_core::inequality::{from_protocol_nn22, result1_nn22, uffink};
use icbell_core::nsbox::catalog::{fig2_mixture, max_violation_biases};
use icbell_core::nsbox::BiasTable;
use icbell_core::oracle::agreement_suite;
use icbell_core::protocol::{canonical_nn22, coefficients_nn22, van_dam};

const SEED: u64 = 20_240_917;

struct Outcome {
    failures: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { failures: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn absorb(&mut self, r: &ExperimentResult) {
        for c in r.failed_checks() {
            self.failures.push(format!("{}: {} (expected {}, got {})", r.name, c.name, c.expected, c.actual));
        }
    }
}

fn uffink_recovery(o: &mut Outcome) {
    let ineq = from_protocol_nn22(&van_dam()).unwrap();
    o.require(
        ineq.binary_coefficients().unwrap() == vec![vec![2.0, 2.0], vec![2.0, -2.0]],
        "van Dam coefficients are not 2 x Uffink",
    );
    o.require(ineq.bound() == 16.0, "van Dam bound is not 16");
    o.require(
        uffink().binary_coefficients().unwrap() == vec![vec![1.0, 1.0], vec![1.0, -1.0]],
        "Uffink coefficients",
    );
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let t = BiasTable::binary(2, 2, |j, i| if i * j == 1 { -r } else { r });
    let lhs = uffink().lhs(&t).unwrap();
    o.require((lhs - 4.0).abs() <= 1e-12, format!("Tsirelson LHS {lhs}"));
}

// closed form of the canonical coefficient table, written out independently
fn closed_form(n: usize, j: usize, i: usize) -> i64 {
    match (j, i) {
        (0, 0) => 2,
        (0, _) => -2,
        (_, 0) => 1 << j,
        _ if i == n - j => 1 << j,
        _ if i + j < n => -(1 << j),
        _ => 0,
    }
}

fn result1_family(o: &mut Outcome) {
    for n in 2..=6 {
        let c = coefficients_nn22(&canonical_nn22(n).unwrap()).unwrap();
        for j in 0..n {
            for i in 0..n {
                o.require(c.get(j, i) == closed_form(n, j, i), format!("n={n} c[{j}][{i}] = {}", c.get(j, i)));
            }
        }
        let ev = result1_nn22(n).unwrap().evaluate(&max_violation_biases(n)).unwrap();
        let expected = ((4i64.pow(n as u32) - 4) / 3) as f64;
        o.require(ev.violation == expected, format!("n={n} violation {} != {expected}", ev.violation));
    }
}

fn white_noise_threshold(o: &mut Outcome) {
    let r = repro_qbound(6).unwrap();
    o.absorb(&r);
    let rows = r.values["rows"].as_array().unwrap();
    let mut prev = f64::INFINITY;
    for row in rows {
        let n = row["n"].as_u64().unwrap() as i32;
        let q = row["q_star"].as_f64().unwrap();
        let expected = 3.0 / (7.0 - 4f64.powi(2 - n));
        o.require((q * q - expected).abs() <= 1e-12, format!("n={n} q*^2 = {}", q * q));
        o.require(q < prev, format!("n={n} q* not decreasing"));
        o.require(row["unsquared_reading_holds"] == false, format!("n={n} unsquared reading not flagged"));
        prev = q;
    }
    o.require(rows.len() == 5, "expected n = 2..6");
}

fn oracle_agreement(o: &mut Outcome) {
    let r = agreement_suite(600, SEED).unwrap();
    o.require(r.trials >= 500, "too few trials");
    o.require(r.max_abs_error <= 1e-6, format!("max |limit - sum e^2| = {:e}", r.max_abs_error));
    o.require(r.disagreements == 0, format!("{} sign disagreements", r.disagreements));
}

fn concavity(o: &mut Outcome) {
    let r = repro_concavity(10_000, SEED).unwrap();
    o.absorb(&r);
    o.require(r.values["summary"]["outside"] == 1000, "expected 10^3 samples with sum e^2 > 1");
}

fn search_3322(o: &mut Outcome) {
    let r = repro_3322().unwrap();
    o.absorb(&r);
    let bound = r.values["min_c_bound"].as_f64().unwrap();
    o.require((bound - 2.0 / 3.0).abs() <= 1e-12, format!("min c bound {bound}"));
}

fn d2dd_consistency(o: &mut Outcome) {
    o.absorb(&repro_d2dd(5, 200, SEED).unwrap());
}

fn correlated_family(o: &mut Outcome) {
    o.absorb(&repro_correlated(100, SEED).unwrap());
    let w = fig2_mixture(0.55, 0.05).unwrap().biases().unwrap();
    let lhs = uffink().lhs(&w).unwrap();
    o.require((lhs - 3.88).abs() <= 1e-12, format!("witness Uffink LHS {lhs}"));
    let scan = repro_fig2(0.005).unwrap();
    for c in scan.checks.iter().filter(|c| !c.passed) {
        o.failures.push(format!("fig2: {} (expected {}, got {})", c.name, c.expected, c.actual));
    }
    o.require(scan.max_boundary_offset <= 1, format!("boundary offset {}", scan.max_boundary_offset));
    o.require(scan.envelope_not_uffink == 0, "envelope region leaves Uffink region");
}

fn main() {
    type Criterion = (usize, &'static str, fn(&mut Outcome), Duration);
    let criteria: [Criterion; 8] = [
        (1, "Uffink recovery", uffink_recovery, Duration::from_secs(1)),
        (2, "canonical family", result1_family, Duration::from_secs(5)),
        (3, "white-noise threshold", white_noise_threshold, Duration::from_secs(5)),
        (4, "oracle agreement", oracle_agreement, Duration::from_secs(120)),
        (5, "tightness/concavity", concavity, Duration::from_secs(60)),
        (6, "3322 optimization", search_3322, Duration::from_secs(600)),
        (7, "d2dd/nndd consistency", d2dd_consistency, Duration::from_secs(60)),
        (8, "correlated-input family", correlated_family, Duration::from_secs(60)),
    ];
    let mut all_ok = true;
    for (id, name, run, budget) in criteria {
        let mut o = Outcome::new();
        let start = Instant::now();
        run(&mut o);
        let took = start.elapsed();
        o.require(took <= budget, format!("runtime {:.2}s over budget {:.0}s", took.as_secs_f64(), budget.as_secs_f64()));
        let ok = o.failures.is_empty();
        all_ok &= ok;
        println!(
            "criterion {id} [{name}]: {} ({:.3}s)",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
        for f in &o.failures {
            println!("    {f}");
        }
    }
    if !all_ok {
        std::process::exit(1);
    }
}
