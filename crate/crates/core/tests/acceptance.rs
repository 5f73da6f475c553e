//! Acceptance checks. Runs as a plain binary and prints one line per
//! criterion; exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use wl1_core::experiments::{
    binomial_se, run_phase_curve, run_trial, ExperimentConfig, PhaseCurve,
};
use wl1_core::gaussian_kernels::{phi, phi_prime};
use wl1_core::model::{generate_instance, weights_for_strategy, Strategy};
use wl1_core::rng::rng_from;
use wl1_core::solver::{kkt_report, weighted_bp, BpProblem, BpStatus, DEFAULT_TOL};
use wl1_core::subdiff_geometry::mc_expected_dist_sq;
use wl1_core::thresholds::{eval_j, minimize_j, synthesis_threshold};
use wl1_core::weights_opt::{eval_weight_objective, optimal_weight_single, optimal_weights};

use common::{k2_model, k4_model, random_model, random_weights};

const GOLDEN_TOL: f64 = 5e-4;
const SYNTHESIS_TOL: f64 = 1e-6;
const MC_SAMPLES: usize = 100_000;
const MC_SIGMAS: f64 = 4.0;
const CROSSING_TOL: f64 = 5.0;
const PHASE_TRIALS: usize = 200;
const KKT_TOL: f64 = 1e-6;
const SUPPORT_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(t: Duration, limit_ms: u128) -> bool {
    t.as_millis() < limit_ms
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let got: Vec<f64> = [3, 5, 7]
        .iter()
        .map(|&s1| optimal_weights(&k2_model(s1)).unwrap().normalized.omega()[0])
        .collect();
    let elapsed = start.elapsed();
    let golden = [0.5539, 0.3208, 0.1599];
    let err = got
        .iter()
        .zip(golden)
        .map(|(g, e)| (g - e).abs())
        .fold(0.0, f64::max);
    outcome(
        err <= GOLDEN_TOL && within(elapsed, 10),
        format!("first weights {got:.4?}, max error {err:.1e}, {elapsed:?}"),
    )
}

fn criterion_2() -> Outcome {
    let model = k4_model();
    let start = Instant::now();
    let full = optimal_weights(&model).unwrap().normalized;
    let merged = Strategy::Merged {
        group: vec![0, 1, 2],
        inner: Box::new(Strategy::Optimal),
    };
    let (_, merged_w) =
        wl1_core::model::merged_weights(&model, &[0, 1, 2], &Strategy::Optimal).unwrap();
    let lifted = weights_for_strategy(&model, &merged).unwrap();
    let elapsed = start.elapsed();
    let golden = [0.0884, 0.3742, 0.5617, 1.0];
    let err_full = full
        .omega()
        .iter()
        .zip(golden)
        .map(|(g, e)| (g - e).abs())
        .fold(0.0, f64::max);
    let err_merged = merged_w
        .omega()
        .iter()
        .zip([0.3742, 1.0])
        .map(|(g, e)| (g - e).abs())
        .fold(0.0, f64::max);
    let lift_ok = lifted.omega()[..3]
        .iter()
        .all(|&v| v == merged_w.omega()[0])
        && lifted.omega()[3] == 1.0;
    outcome(
        err_full <= GOLDEN_TOL && err_merged <= GOLDEN_TOL && lift_ok && within(elapsed, 10),
        format!(
            "weights {:.4?}, merged {:.4?}, errors {err_full:.1e}/{err_merged:.1e}, {elapsed:?}",
            full.omega(),
            merged_w.omega()
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = rng_from(&[3]);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let model = random_model(&mut rng, 5, 200);
        let w = optimal_weights(&model).unwrap().normalized;
        let diff =
            (synthesis_threshold(&model).unwrap() - minimize_j(&model, &w).unwrap().m_tilde).abs();
        worst = worst.max(diff);
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= SYNTHESIS_TOL && within(elapsed, 5000),
        format!("100 models, max |synthesis - m_tilde| = {worst:.1e}, {elapsed:?}"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = rng_from(&[4]);
    let start = Instant::now();
    let mut worst_z = 0.0f64;
    for case in 0..20u64 {
        let model = random_model(&mut rng, 5, 200);
        let w = random_weights(&mut rng, model.k(), 0.05);
        let tau = rng.random_range(0.1..3.0);
        let exact = eval_j(&model, &w, tau).unwrap();
        let mc = mc_expected_dist_sq(&model, &w, tau, MC_SAMPLES, 1000 + case).unwrap();
        worst_z = worst_z.max((mc.estimate - exact).abs() / mc.standard_error);
    }
    let elapsed = start.elapsed();
    outcome(
        worst_z <= MC_SIGMAS && within(elapsed, 30_000),
        format!("20 cases at n = {MC_SAMPLES}, max |z| = {worst_z:.2}, {elapsed:?}"),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = rng_from(&[5]);
    let mut worst = 0.0f64;
    let mut ordered = true;
    for _ in 0..200 {
        let model = random_model(&mut rng, 5, 200);
        let w = random_weights(&mut rng, model.k(), 0.05);
        let r = minimize_j(&model, &w).unwrap();
        let d = model.d() as f64;
        let tight = r.delta_upper - r.delta_lower;
        let loose = r.delta_upper - r.delta_lower_loose;
        let tight_exact = (2.0 / d) * (1.0 / model.alpha_min()).sqrt();
        let loose_exact = 2.0 / d.sqrt();
        worst = worst
            .max((tight - tight_exact).abs())
            .max((loose - loose_exact).abs());
        ordered &= tight <= loose && r.delta_lower <= r.delta_upper;
    }
    outcome(
        worst <= 1e-14 && ordered,
        format!("200 models, max width error {worst:.1e}, tight <= loose: {ordered}"),
    )
}

struct PhaseRun {
    curve: PhaseCurve,
    predicted: Vec<(String, f64)>,
    elapsed: Duration,
}

fn k2_phase_run() -> PhaseRun {
    let model = k2_model(5);
    let strategies = Strategy::standard_set();
    let predicted: Vec<(String, f64)> = strategies
        .iter()
        .map(|s| {
            let w = weights_for_strategy(&model, s).unwrap();
            (
                s.to_string(),
                minimize_j(&model, &w).unwrap().measurements(),
            )
        })
        .collect();
    let lo = predicted
        .iter()
        .map(|p| p.1.floor() as usize)
        .min()
        .unwrap()
        - 10;
    let hi = predicted.iter().map(|p| p.1.ceil() as usize).max().unwrap() + 10;
    let cfg =
        ExperimentConfig::new(model, strategies, (lo..=hi).collect(), PHASE_TRIALS, 6).unwrap();
    let start = Instant::now();
    let curve = run_phase_curve(&cfg).unwrap();
    PhaseRun {
        curve,
        predicted,
        elapsed: start.elapsed(),
    }
}

fn criterion_6(run: &PhaseRun) -> Outcome {
    let mut pass = within(run.elapsed, 600_000);
    let mut parts = Vec::new();
    for (label, pred) in &run.predicted {
        let crossing = run.curve.crossing(label);
        let above = run
            .curve
            .row(label, pred.ceil() as usize + 10)
            .map(|r| r.rate);
        let below = run
            .curve
            .row(label, pred.floor() as usize - 10)
            .map(|r| r.rate);
        let ok = crossing.is_some_and(|c| (c - pred).abs() <= CROSSING_TOL)
            && above.is_some_and(|r| r >= 0.9)
            && below.is_some_and(|r| r <= 0.1);
        pass &= ok;
        parts.push(format!(
            "{label}: d*m~ {pred:.2}, crossing {:.2}, rates {:.3}/{:.3}",
            crossing.unwrap_or(f64::NAN),
            below.unwrap_or(f64::NAN),
            above.unwrap_or(f64::NAN)
        ));
    }
    parts.push(format!(
        "solver issues {}, {:?}",
        run.curve.solver_issues, run.elapsed
    ));
    outcome(pass, parts.join("; "))
}

fn criterion_7(run: &PhaseRun) -> Outcome {
    let mut worst_margin = f64::INFINITY;
    for opt in run.curve.rows_for("optimal") {
        let unit = run.curve.row("unit", opt.m).unwrap();
        let se = (binomial_se(opt.rate, opt.trials).powi(2)
            + binomial_se(unit.rate, unit.trials).powi(2))
        .sqrt();
        worst_margin = worst_margin.min(opt.rate - (unit.rate - 3.0 * se));
    }

    let model = k4_model();
    let merged = Strategy::Merged {
        group: vec![0, 1, 2],
        inner: Box::new(Strategy::Optimal),
    };
    let cfg = ExperimentConfig::new(
        model,
        vec![Strategy::Optimal, merged.clone()],
        (10..=40).collect(),
        PHASE_TRIALS,
        7,
    )
    .unwrap();
    let curve = run_phase_curve(&cfg).unwrap();
    let c4 = curve.crossing("optimal");
    let c2 = curve.crossing(&merged.to_string());
    let ordered = matches!((c4, c2), (Some(a), Some(b)) if a < b);
    outcome(
        worst_margin >= 0.0 && ordered,
        format!(
            "min (optimal - unit + 3 SE) = {worst_margin:.3}; k=4 crossings optimal {:.2} < merged {:.2}",
            c4.unwrap_or(f64::NAN),
            c2.unwrap_or(f64::NAN)
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut passed = 0;
    let mut worst = (0.0f64, 0.0f64);
    for t in 0..1000u64 {
        let mut rng = rng_from(&[8, t]);
        let d = rng.random_range(2..=50);
        let m = rng.random_range(1..=d);
        let a = DMatrix::from_fn(m, d, |_, _| StandardNormal.sample(&mut rng));
        let s = rng.random_range(1..=d.min(m + 2));
        let mut x0 = vec![0.0; d];
        for x in x0.iter_mut().take(s) {
            *x = StandardNormal.sample(&mut rng);
        }
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..=1.0)).collect();
        let b = &a * DVector::from_column_slice(&x0);
        let p = BpProblem::new(a, b, w).unwrap();
        if let Ok(sol) = weighted_bp(&p, DEFAULT_TOL) {
            let k = kkt_report(&p, &sol, SUPPORT_TOL);
            worst = (
                worst.0.max(k.dual_violation),
                worst.1.max(k.complementarity),
            );
            if sol.status == BpStatus::Optimal
                && k.dual_violation <= KKT_TOL
                && k.complementarity <= KKT_TOL
            {
                passed += 1;
            }
        }
    }
    outcome(
        passed == 1000,
        format!(
            "{passed}/1000 certified, max dual violation {:.1e}, max complementarity {:.1e}",
            worst.0, worst.1
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut failures: Vec<&str> = Vec::new();
    let mut rng = rng_from(&[9]);

    let mut check = |name: &'static str, ok: bool| {
        if !ok && !failures.contains(&name) {
            failures.push(name);
        }
    };

    for _ in 0..200 {
        let model = random_model(&mut rng, 5, 200);
        let w = random_weights(&mut rng, model.k(), 0.05);
        let (t1, t2) = (rng.random_range(0.0..4.0), rng.random_range(0.0..4.0));
        let j = |t: f64| eval_j(&model, &w, t).unwrap();
        check(
            "J convexity",
            j(0.5 * (t1 + t2)) <= 0.5 * (j(t1) + j(t2)) + 1e-12,
        );

        let v1: Vec<f64> = (0..model.k()).map(|_| rng.random_range(0.0..3.0)).collect();
        let v2: Vec<f64> = (0..model.k()).map(|_| rng.random_range(0.0..3.0)).collect();
        let mid: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| 0.5 * (a + b)).collect();
        let f = |v: &[f64]| eval_weight_objective(&model, v).unwrap();
        let gap = 0.5 * (f(&v1) + f(&v2)) - f(&mid);
        check("weight objective strict convexity", gap > 0.0 || v1 == v2);

        let c = rng.random_range(0.1..10.0);
        let r1 = minimize_j(&model, &w).unwrap();
        let r2 = minimize_j(&model, &w.scaled(c).unwrap()).unwrap();
        check(
            "scale invariance of m_tilde",
            (r1.m_tilde - r2.m_tilde).abs() <= 1e-10,
        );
        check(
            "tau* scales as 1/c",
            (r1.tau_star - c * r2.tau_star).abs() <= 1e-7 * (1.0 + r1.tau_star),
        );

        let raw = optimal_weights(&model).unwrap().raw;
        let alpha = model.alpha();
        check(
            "rho-independence of raw roots",
            raw.iter()
                .zip(&alpha)
                .all(|(r, &a)| *r == optimal_weight_single(a).unwrap()),
        );
    }

    let grid: Vec<f64> = (0..=800).map(|i| i as f64 * 0.01).collect();
    for win in grid.windows(3) {
        let (a, b, c) = (
            phi(win[0]).unwrap(),
            phi(win[1]).unwrap(),
            phi(win[2]).unwrap(),
        );
        check("phi monotone", b <= a);
        check("phi convex", b <= 0.5 * (a + c) + 1e-15);
        check("phi' negative", phi_prime(win[0]).unwrap() < 0.0);
    }

    let model = k2_model(5);
    check(
        "instance seed determinism",
        generate_instance(&model, 17) == generate_instance(&model, 17),
    );
    let w = optimal_weights(&model).unwrap().normalized;
    let a = mc_expected_dist_sq(&model, &w, 1.0, 10_000, 3).unwrap();
    let b = mc_expected_dist_sq(&model, &w, 1.0, 10_000, 3).unwrap();
    check("Monte Carlo seed determinism", a == b);
    let cfg = ExperimentConfig::new(model, Strategy::standard_set(), vec![25], 4, 99).unwrap();
    check(
        "trial seed determinism",
        (0..4).all(|t| run_trial(&cfg, 3, 25, t).unwrap() == run_trial(&cfg, 3, 25, t).unwrap()),
    );

    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "convexity, monotonicity, scale, rho-independence and determinism checks hold".into()
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let run = k2_phase_run();
    let results: Vec<(&str, Outcome)> = vec![
        ("golden weights k=2", criterion_1()),
        ("golden weights k=4 and merged", criterion_2()),
        ("synthesis identity", criterion_3()),
        ("Monte Carlo lemma equality", criterion_4()),
        ("sandwich bound widths", criterion_5()),
        ("phase transition d=100", criterion_6(&run)),
        ("strategy ordering", criterion_7(&run)),
        ("solver certificates", criterion_8()),
        ("invariant suites", criterion_9()),
    ];
    let mut all = true;
    for (i, (name, o)) in results.iter().enumerate() {
        all &= o.pass;
        println!(
            "criterion {} [{}] {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
