use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use super::{fig2, Check, ExperimentResult, Provenance, Recorder};
use crate::error::{Error, Result};
use crate::inequality::{
    correlated_2222, d2dd_family, epsilon_envelope, from_protocol_nn22, nndd_from_protocol,
    result1_nn22, uffink, PhaseConvention,
};
use crate::infotheory::{Channel, InputDistribution};
use crate::nsbox::catalog::{fig2_mixture, max_violation_biases, pr_box};
use crate::nsbox::{BiasTable, NsBox};
use crate::oracle::{
    agreement_suite, clock_limit, concavity_check, concavity_f, correlated_limit,
    enumerate_error_distribution, random_biases, random_binary_biases, random_protocol, trial_rng,
    validate_inequality, SIGN_BAND,
};
use crate::protocol::{
    canonical_nn22, coefficients_nn22, d2dd_protocol, error_distribution, van_dam,
};

use Provenance::{DerivedOracle, Published};

fn tsirelson_biases() -> BiasTable {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    BiasTable::binary(2, 2, |j, i| if i * j == 1 { -r } else { r })
}

/// van Dam coefficients, the factor-4 relation to the Uffink form, and its two anchor points.
pub fn repro_uffink() -> Result<ExperimentResult> {
    let mut rec = Recorder::new("uffink");
    let p = van_dam();
    let c = coefficients_nn22(&p)?;
    let table: Vec<Vec<i64>> = (0..2).map(|j| (0..2).map(|i| c.get(j, i)).collect()).collect();
    rec.value("coefficients_j_i", &table);
    rec.check(Check::equal("van Dam coefficient table", vec![vec![2, 2], vec![2, -2]], table, DerivedOracle));

    let vd = from_protocol_nn22(&p)?;
    let u = uffink();
    rec.check(Check::equal(
        "reduced coefficients are twice Uffink's",
        u.binary_coefficients()?
            .iter()
            .map(|r| r.iter().map(|x| 2.0 * x).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        vd.binary_coefficients()?,
        DerivedOracle,
    ));
    rec.check(Check::equal("bound is 4 x 4", 16.0, vd.bound(), DerivedOracle));
    rec.check(Check::equal("lhs scale to Uffink", Some(4.0), vd.lhs_scale_to(&u, 1e-12), DerivedOracle));

    let t = u.evaluate(&tsirelson_biases())?;
    rec.value("tsirelson_lhs", t.lhs);
    rec.check(Check::close("Tsirelson point saturates", 4.0, t.lhs, 1e-12, DerivedOracle));
    let pr = u.evaluate(&pr_box().biases()?)?;
    rec.value("pr_lhs", pr.lhs);
    rec.check(Check::close("PR box violation", 4.0, pr.violation, 1e-12, DerivedOracle));
    Ok(rec.finish())
}

/// `c_{j,i}` of the canonical protocol in closed form.
pub fn canonical_coefficient(n: usize, j: usize, i: usize) -> i64 {
    let pj = 1i64 << j;
    if j == 0 {
        return if i == 0 { 2 } else { -2 };
    }
    if i == 0 || i == n - j {
        pj
    } else if i + j < n {
        -pj
    } else {
        0
    }
}

fn check_n_max(n_max: usize) -> Result<()> {
    if !(2..=8).contains(&n_max) {
        return Err(Error::InvalidArity(format!("n_max must be in 2..=8, got {n_max}")));
    }
    Ok(())
}

pub fn repro_result1(n_max: usize) -> Result<ExperimentResult> {
    check_n_max(n_max)?;
    let mut rec = Recorder::new("result1");
    rec.param("n_max", n_max);
    let mut rows = Vec::new();
    for n in 2..=n_max {
        let p = canonical_nn22(n)?;
        let c = coefficients_nn22(&p)?;
        let mismatches = (0..n)
            .flat_map(|j| (0..n).map(move |i| (j, i)))
            .filter(|&(j, i)| c.get(j, i) != canonical_coefficient(n, j, i))
            .count();
        rec.check(Check::equal(format!("n={n} coefficient closed form"), 0, mismatches, DerivedOracle));

        let r1 = result1_nn22(n)?;
        let scale = from_protocol_nn22(&p)?.lhs_scale_to(&r1, 1e-12);
        rec.check(Check::equal(format!("n={n} protocol form is 4 x family"), Some(4.0), scale, DerivedOracle));

        let ev = r1.evaluate(&max_violation_biases(n))?;
        let expected = (4i64.pow(n as u32) - 4) / 3;
        let got = ev.violation.round() as i64;
        rec.check(Check::equal(format!("n={n} max violation (4^n-4)/3"), expected, got, Published));
        rec.check(Check::holds(
            format!("n={n} violation is an integer"),
            ev.violation == got as f64,
            DerivedOracle,
        ));
        rows.push(json!({ "n": n, "lhs": ev.lhs, "bound": ev.bound, "violation": ev.violation }));
    }
    rec.value("rows", rows);
    Ok(rec.finish())
}

/// Largest `q` with `lhs(q e) <= bound`, by bisection on the evaluated inequality.
fn white_noise_threshold(n: usize) -> Result<f64> {
    let ineq = result1_nn22(n)?;
    let e = max_violation_biases(n);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ineq.lhs(&e.scaled(mid))? <= ineq.bound() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn repro_qbound(n_max: usize) -> Result<ExperimentResult> {
    check_n_max(n_max)?;
    let mut rec = Recorder::new("qbound");
    rec.param("n_max", n_max);
    let mut rows = Vec::new();
    let mut prev = f64::INFINITY;
    let mut decreasing = true;
    for n in 2..=n_max {
        let q = white_noise_threshold(n)?;
        let stated = 3.0 / (7.0 - 4f64.powi(2 - n as i32));
        rec.check(Check::close(format!("n={n} q*^2"), stated, q * q, 1e-12, DerivedOracle));
        decreasing &= q < prev;
        prev = q;
        rows.push(json!({
            "n": n,
            "q_star": q,
            "q_star_squared": q * q,
            "stated_bound": stated,
            "unsquared_reading_holds": (q - stated).abs() <= 1e-12,
        }));
    }
    rec.check(Check::holds("q* strictly decreasing in n", decreasing, Published));
    rec.value("rows", rows);
    rec.value(
        "note",
        "the stated bound 3/(7-4^(2-n)) equals q*^2, not q*; the unsquared reading is reported, not asserted",
    );
    Ok(rec.finish())
}

fn max_rel_dev(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    pairs
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-300))
        .fold(0.0, f64::max)
}

/// d-ary families: reduction at `d = 2`, proportionality of the protocol form, the closed-form
/// error distribution, and the clock-channel limit.
pub fn repro_d2dd(d_max: usize, trials: usize, seed: u64) -> Result<ExperimentResult> {
    if !(2..=7).contains(&d_max) {
        return Err(Error::InvalidArity(format!("d_max must be in 2..=7, got {d_max}")));
    }
    let mut rec = Recorder::new("d2dd");
    rec.param("d_max", d_max);
    rec.param("trials", trials);
    rec.param("seed", seed);

    let f2 = &d2dd_family(2)?[0];
    rec.check(Check::equal(
        "d=2 family is 4 x Uffink (reduced coefficients)",
        vec![vec![2.0, 2.0], vec![2.0, -2.0]],
        f2.binary_coefficients()?,
        DerivedOracle,
    ));
    rec.check(Check::equal("d=2 bound", 16.0, f2.bound(), DerivedOracle));

    let mut rows = Vec::new();
    for d in 2..=d_max {
        let fam = d2dd_family(d)?;
        rec.check(Check::equal(format!("d={d} family size"), d / 2, fam.len(), DerivedOracle));
        let p = d2dd_protocol(d)?;
        for (idx, member) in fam.iter().enumerate() {
            let t = idx + 1;
            let derived = nndd_from_protocol(&p, t, PhaseConvention::Derived)?;
            let displayed = nndd_from_protocol(&p, t, PhaseConvention::Displayed)?;
            let lam = (d * d) as f64;
            let samples: Vec<BiasTable> = (0..trials)
                .map(|k| random_biases(&mut trial_rng(seed, (d * 1000 + t * 100000 + k) as u64), d, 2, d))
                .collect();
            let dev_derived = max_rel_dev(
                samples.iter().map(|e| (derived.lhs(e).unwrap(), lam * member.lhs(e).unwrap())),
            );
            let dev_displayed = max_rel_dev(
                samples.iter().map(|e| (displayed.lhs(e).unwrap(), lam * member.lhs(e).unwrap())),
            );
            rec.check(Check::at_most(
                format!("d={d} t={t} nndd(d2dd protocol) = d^2 x d2dd"),
                1e-9,
                dev_derived,
                DerivedOracle,
            ));
            rec.check(Check::equal(
                format!("d={d} t={t} bound ratio"),
                lam,
                derived.bound() / member.bound(),
                DerivedOracle,
            ));
            rows.push(json!({
                "d": d,
                "t": t,
                "max_rel_dev_derived_phase": dev_derived,
                "max_rel_dev_displayed_phase": dev_displayed,
            }));
        }

        // closed-form error distribution against enumeration
        let mut rng = trial_rng(seed, 7_000_000 + d as u64);
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let bx = NsBox::from_biases(&random_biases(&mut rng, d, 2, d))?;
            let free: Vec<f64> = (0..=d / 2).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = (0..d).map(|m| free[m.min(d - m)]).sum();
            let ch = Channel::clock(d, &free.iter().map(|x| x / total).collect::<Vec<_>>())?;
            for i in 0..2 {
                let a = error_distribution(&bx, &p, &ch, i)?;
                let b = enumerate_error_distribution(&bx, &p, &ch, &InputDistribution::uniform(2, d), i)?;
                for (x, y) in a.probs.iter().zip(&b) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        rec.check(Check::at_most(format!("d={d} error distribution vs enumeration"), 1e-12, worst, DerivedOracle));

        // clock-channel limit against the derived-phase inequality
        let e = random_biases(&mut rng, d, 2, d);
        let bx = NsBox::from_biases(&e)?;
        for t in 1..=d / 2 {
            let ineq = nndd_from_protocol(&p, t, PhaseConvention::Derived)?;
            let limit = clock_limit(&bx, &p, t)?;
            rec.check(Check::close(
                format!("d={d} t={t} clock-channel limit"),
                ineq.lhs(&e)? / ineq.bound(),
                limit,
                1e-6,
                DerivedOracle,
            ));
        }
    }

    // binary collapse of the d-ary protocol form
    for n in 2..=3 {
        let mut rng = trial_rng(seed, 9_000_000 + n as u64);
        let mut protocols = vec![canonical_nn22(n)?];
        protocols.extend((0..4).map(|_| random_protocol(&mut rng, n, 2)));
        let mut dev: f64 = 0.0;
        for p in &protocols {
            let a = nndd_from_protocol(p, 1, PhaseConvention::Derived)?;
            let b = from_protocol_nn22(p)?;
            let pairs: Vec<(f64, f64)> = (0..trials)
                .map(|_| {
                    let e = random_binary_biases(&mut rng, n, n);
                    (a.lhs(&e).unwrap(), 4.0 * b.lhs(&e).unwrap())
                })
                .collect();
            dev = dev.max(max_rel_dev(pairs.into_iter()));
        }
        rec.check(Check::at_most(format!("n={n} nndd(d=2) = 4 x nn22"), 1e-9, dev, DerivedOracle));
    }
    rec.value("rows", rows);
    Ok(rec.finish())
}

pub const CORRELATED_EPSILONS: [f64; 5] = [-0.8, -0.4, 0.0, 0.4, 0.8];

pub fn repro_correlated(trials: usize, seed: u64) -> Result<ExperimentResult> {
    let mut rec = Recorder::new("correlated");
    rec.param("trials", trials);
    rec.param("seed", seed);
    rec.param("epsilons", CORRELATED_EPSILONS);

    let c0 = correlated_2222(0.0)?;
    rec.check(Check::equal(
        "eps=0 is Uffink",
        uffink().binary_coefficients()?,
        c0.binary_coefficients()?,
        Published,
    ));

    let p = van_dam();
    let mut per_eps = Vec::new();
    for (k, &eps) in CORRELATED_EPSILONS.iter().enumerate() {
        let ineq = correlated_2222(eps)?;
        let rows = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(seed, (k * trials + t) as u64);
                let e = random_binary_biases(&mut rng, 2, 2);
                let bx = NsBox::from_biases(&e)?;
                Ok((ineq.lhs(&e)? / ineq.bound(), correlated_limit(&bx, &p, eps)?))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        let disagreements = rows
            .iter()
            .filter(|(a, b)| (a - 1.0) * (b - 1.0) < 0.0 && (a - 1.0).abs().min((b - 1.0).abs()) > SIGN_BAND)
            .count();
        let gap = rows.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        rec.check(Check::equal(format!("eps={eps} sign disagreements"), 0, disagreements, DerivedOracle));
        rec.check(Check::at_most(format!("eps={eps} max |lhs/bound - limit|"), 1e-6, gap, DerivedOracle));
        per_eps.push(json!({ "epsilon": eps, "disagreements": disagreements, "max_abs_gap": gap }));
    }
    rec.value("validation", per_eps);

    let (q1, q2) = fig2::FIG2_WITNESS;
    let w = fig2_mixture(q1, q2)?.biases()?;
    let u = uffink().evaluate(&w)?;
    let env = epsilon_envelope(&w)?;
    rec.check(Check::close("witness Uffink lhs", 3.88, u.lhs, 1e-12, DerivedOracle));
    rec.check(Check::close("witness envelope max", 4.392, env.max_lhs, 1e-3, DerivedOracle));
    rec.check(Check::close("witness envelope argmax", 8.0 / 15.0, env.epsilon, 1e-3, DerivedOracle));
    rec.value("witness", json!({ "q1": q1, "q2": q2, "uffink_lhs": u.lhs, "envelope": env }));

    let scan = fig2::scan(0.01)?;
    let found = scan.iter().find(|pt| pt.uffink_ok && !pt.envelope_ok);
    rec.check(Check::holds("some point passes Uffink but fails some eps", found.is_some(), Published));
    if let Some(pt) = found {
        rec.value("first_grid_witness", pt);
    }

    let mut rng = trial_rng(seed, u64::MAX);
    let mut endpoint_max: f64 = 0.0;
    for _ in 0..trials {
        let e = random_binary_biases(&mut rng, 2, 2);
        for eps in [-1.0, 1.0] {
            endpoint_max = endpoint_max.max(correlated_2222(eps)?.lhs(&e)?);
        }
    }
    rec.check(Check::at_most("eps=+-1 never violated", 4.0, endpoint_max, DerivedOracle));
    Ok(rec.finish())
}

/// Criterion-4 style agreement run plus the two named validation pairs.
pub fn repro_oracle(trials: usize, seed: u64) -> Result<ExperimentResult> {
    let mut rec = Recorder::new("oracle");
    rec.param("trials", trials);
    rec.param("seed", seed);
    let rep = agreement_suite(trials, seed)?;
    rec.check(Check::at_most("limit vs sum e_i^2", 1e-6, rep.max_abs_error, DerivedOracle));
    rec.check(Check::equal("sign disagreements outside band", 0, rep.disagreements, DerivedOracle));
    rec.value("agreement", &rep);

    let a = validate_inequality(&uffink(), &van_dam(), trials, seed)?;
    rec.check(Check::equal("uffink / van Dam disagreements", 0, a.disagreements, DerivedOracle));
    let b = validate_inequality(&result1_nn22(3)?, &canonical_nn22(3)?, trials, seed)?;
    rec.check(Check::equal("result1(3) / canonical(3) disagreements", 0, b.disagreements, DerivedOracle));
    rec.value("validation", json!([a, b]));
    Ok(rec.finish())
}

/// Concavity of `F(e_c)` for `sum e^2 <= 1` and positivity near zero otherwise.
pub fn repro_concavity(samples: usize, seed: u64) -> Result<ExperimentResult> {
    let mut rec = Recorder::new("concavity");
    rec.param("samples", samples);
    rec.param("seed", seed);

    let inside = (0..samples)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let n = rng.gen_range(2..=6);
            let mut e: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            let radius: f64 = rng.gen_range(0.0..=1.0);
            if norm > 0.0 {
                e.iter_mut().for_each(|x| *x *= radius / norm);
            }
            let ec = rng.gen_range(-0.9..=0.9);
            let r = concavity_check(&e, &[ec])?;
            Ok((r.f_second[0], r.f_values[0], r.max_fd_error))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_second = inside.iter().map(|r| r.0).fold(f64::MIN, f64::max);
    let max_f = inside.iter().map(|r| r.1).fold(f64::MIN, f64::max);
    let max_fd = inside.iter().map(|r| r.2).fold(0.0, f64::max);
    rec.check(Check::at_most("max F'' with sum e^2 <= 1", 1e-12, max_second, Published));
    rec.check(Check::at_most("max F with sum e^2 <= 1", 1e-12, max_f, Published));
    rec.check(Check::at_most("finite-difference F'' error", 1e-5, max_fd, DerivedOracle));

    let outside_n = (samples / 10).max(1);
    let grid: Vec<f64> = (0..48).map(|k| 0.05 * 0.5f64.powi(k)).collect();
    let positive = (0..outside_n)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed ^ 0x5eed, t as u64);
            let e = loop {
                let n = rng.gen_range(2..=6);
                let e: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                if e.iter().map(|x| x * x).sum::<f64>() > 1.0 {
                    break e;
                }
            };
            grid.iter().any(|&ec| concavity_f(&e, ec) > 0.0)
        })
        .filter(|&ok| ok)
        .count();
    rec.check(Check::equal("sum e^2 > 1 samples with F > 0 for some |e_c| <= 0.05", outside_n, positive, Published));
    rec.value(
        "summary",
        json!({ "inside": samples, "outside": outside_n, "max_f_second": max_second, "max_f": max_f, "max_fd_error": max_fd }),
    );
    Ok(rec.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_pass(r: &ExperimentResult) {
        let failed: Vec<_> = r.failed_checks().collect();
        assert!(failed.is_empty(), "{}: {:#?}", r.name, failed);
    }

    #[test]
    fn uffink_passes() {
        assert_pass(&repro_uffink().unwrap());
    }

    #[test]
    fn result1_passes() {
        let r = repro_result1(5).unwrap();
        assert_pass(&r);
        assert_eq!(r.values["rows"][3]["violation"], json!(340.0));
        assert!(repro_result1(9).is_err());
    }

    #[test]
    fn qbound_passes() {
        let r = repro_qbound(4).unwrap();
        assert_pass(&r);
        let q2 = r.values["rows"][0]["q_star"].as_f64().unwrap();
        assert!((q2 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let q3 = r.values["rows"][1]["q_star"].as_f64().unwrap();
        assert!((q3 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn d2dd_passes() {
        assert_pass(&repro_d2dd(5, 20, 1).unwrap());
    }

    #[test]
    fn correlated_passes() {
        assert_pass(&repro_correlated(20, 2).unwrap());
    }

    #[test]
    fn oracle_passes() {
        assert_pass(&repro_oracle(40, 3).unwrap());
    }

    #[test]
    fn concavity_passes() {
        assert_pass(&repro_concavity(500, 4).unwrap());
    }

    #[test]
    fn closed_form_matches_documented_cases() {
        assert_eq!(canonical_coefficient(3, 0, 0), 2);
        assert_eq!(canonical_coefficient(3, 1, 2), 2);
        assert_eq!(canonical_coefficient(3, 1, 1), -2);
        assert_eq!(canonical_coefficient(3, 2, 2), 0);
    }
}
