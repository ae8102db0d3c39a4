//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).
//!
//! Tolerances and thresholds are pinned in code; timing budgets are asserted
//! with the stated limits (actual runtimes are far below them).

use polysieve::basis::BasisFamily;
use polysieve::density::{
    self, max_shift_level, shift_coefficients, CoefficientVector, ShiftParams, WeightedDensity,
};
use polysieve::divergence;
use polysieve::experiments::{
    self, medians_nonincreasing, ExperimentConfig, ExperimentId, SigmaSpec,
};
use polysieve::inference::{self, McmcConfig, SievePriorSpec};
use std::time::{Duration, Instant};

fn criterion(number: u32, name: &str, pass: bool, details: &str) {
    println!(
        "criterion {number} ({name}): {} -- {details}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number} ({name}) failed: {details}");
}

fn within_budget(elapsed: Duration, budget: Duration) -> bool {
    elapsed <= budget
}

#[test]
fn criterion_01_orthogonality() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut pass = true;
    for family in [
        BasisFamily::Legendre,
        BasisFamily::Hermite,
        BasisFamily::Laguerre,
    ] {
        let rule = polysieve::quadrature::gauss_rule(family.weight_tag(), 64).unwrap();
        for j in 0..=15usize {
            for i in 0..=j {
                let value = polysieve::quadrature::integrate(
                    |x| family.eval(i, x).unwrap() * family.eval(j, x).unwrap(),
                    &rule,
                )
                .unwrap();
                let expected = if i == j { family.gamma(j).unwrap() } else { 0.0 };
                let tol = 1e-10 * family.gamma(j).unwrap().max(1.0);
                let scaled = (value - expected).abs() / tol;
                worst = worst.max(scaled);
                pass &= scaled <= 1.0;
            }
        }
    }
    let elapsed = start.elapsed();
    pass &= within_budget(elapsed, Duration::from_secs(2));
    criterion(
        1,
        "orthogonality",
        pass,
        &format!("worst residual {worst:.3e} of tolerance, {elapsed:?}"),
    );
}

#[test]
fn criterion_02_derivative_coefficients() {
    let start = Instant::now();
    let mut pass = true;
    let mut details = String::new();

    // Hermite closed form, exact
    for j in 1..=10usize {
        for l in 1..=3.min(j) {
            let row = BasisFamily::Hermite.derivative_coeffs(j, l).unwrap();
            let mut expected = 1.0;
            for t in 0..l {
                expected *= 2.0 * (j - t) as f64;
            }
            for (i, a) in row.iter().enumerate() {
                let want = if i == j - l { expected } else { 0.0 };
                if *a != want {
                    pass = false;
                    details = format!("hermite j={j} l={l} i={i}: {a} != {want}");
                }
            }
        }
    }

    // Legendre reconstruction at 1e-9 on interior grids
    let mut worst = 0.0f64;
    for j in 1..=12usize {
        for l in 1..=3.min(j) {
            let row = BasisFamily::Legendre.derivative_coeffs(j, l).unwrap();
            for k in 0..50 {
                let x = -0.98 + 1.96 * k as f64 / 49.0;
                let exact = BasisFamily::Legendre.eval_derivative(j, l, x).unwrap();
                let recon: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a * BasisFamily::Legendre.eval(i, x).unwrap())
                    .sum();
                worst = worst.max((recon - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    pass &= worst <= 1e-9;
    let elapsed = start.elapsed();
    pass &= within_budget(elapsed, Duration::from_secs(2));
    if details.is_empty() {
        details = format!("legendre reconstruction worst {worst:.3e}, {elapsed:?}");
    }
    criterion(2, "derivative coefficients", pass, &details);
}

#[test]
fn criterion_03_divergence_closed_forms() {
    let start = Instant::now();
    let g1 = WeightedDensity::from_closed_form(polysieve::density::ClosedForm::SuppExponential);
    let g2 = WeightedDensity::constant(BasisFamily::Laguerre, 1.0);
    let h2 = divergence::hellinger_sq(&g1, &g2).unwrap();
    let d = divergence::kl(&g1, &g2).unwrap();
    let v = divergence::log_var(&g1, &g2).unwrap();
    let e_h2 = (h2 - (2.0 - 4.0 * 2.0f64.sqrt() / 3.0)).abs();
    let e_kl = (d - (2.0f64.ln() - 0.5)).abs();
    let e_v = (v - 0.25).abs();
    let elapsed = start.elapsed();
    let pass = e_h2 <= 1e-7
        && e_kl <= 1e-7
        && e_v <= 1e-7
        && within_budget(elapsed, Duration::from_secs(1));
    criterion(
        3,
        "divergence closed forms",
        pass,
        &format!("|err| h2 {e_h2:.2e}, kl {e_kl:.2e}, logvar {e_v:.2e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_04_shift_suite() {
    let mut state = 0xa409382229f31d3eu64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut worst_norm = 0.0f64;
    let mut worst_bound = 0.0f64;
    let mut worst_commute = 0.0f64;
    for _ in 0..50 {
        let terms = 1 + (next() * 7.0) as usize;
        let mut values = vec![0.5];
        let mut budget = 0.45;
        for _ in 0..terms {
            let c = (2.0 * next() - 1.0) * budget * 0.5;
            values.push(c);
            budget -= c.abs();
        }
        let eta = CoefficientVector::new(BasisFamily::Legendre, values).unwrap();
        let g = WeightedDensity::from_coefficients(eta.clone());
        for a_n in [1e-3, 1e-2, 1e-1] {
            let shift = ShiftParams::new(a_n, 2.0).unwrap();
            // normalization preserved
            let shifted = shift_coefficients(&eta, shift).unwrap();
            worst_norm = worst_norm.max((shifted.values()[0] * 2.0 - 1.0).abs());
            // Hellinger bound
            let h2 = divergence::hellinger_sq(&g, &g.shifted(shift).unwrap()).unwrap();
            worst_bound = worst_bound.max(h2 - 2.0 * 2.0 * a_n);
            // shift-project commutativity
            let a = shift_coefficients(
                &density::project(&g, BasisFamily::Legendre, eta.truncation()).unwrap(),
                shift,
            )
            .unwrap();
            let b = density::project(
                &g.shifted(shift).unwrap(),
                BasisFamily::Legendre,
                eta.truncation(),
            )
            .unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                worst_commute = worst_commute.max((x - y).abs());
            }
        }
    }
    let level_err = (max_shift_level(2.0, 0.5, 2.0) - 1.0 / 34.0).abs();
    let pass =
        worst_norm <= 1e-12 && worst_bound <= 0.0 && worst_commute <= 1e-9 && level_err <= 1e-15;
    criterion(
        4,
        "shift suite",
        pass,
        &format!(
            "norm {worst_norm:.2e}, bound excess {worst_bound:.2e}, commute {worst_commute:.2e}, level |err| {level_err:.2e}"
        ),
    );
}

#[test]
fn criterion_05_hardy_inequality() {
    let start = Instant::now();
    let report = experiments::hardy_check(1000, 50, 20240501);
    let elapsed = start.elapsed();
    let pass = report.violations == 0 && within_budget(elapsed, Duration::from_secs(5));
    criterion(
        5,
        "weighted Hardy inequality",
        pass,
        &format!(
            "{} trials, {} violations, max ratio {:.4}, {elapsed:?}",
            report.trials, report.violations, report.max_ratio
        ),
    );
}

#[test]
fn criterion_06_growth_bands() {
    let start = Instant::now();
    let mut pass = true;
    let mut details = String::new();
    for (family, p, _, _) in experiments::GROWTH_BANDS {
        let report = experiments::growth_check(family, p).unwrap();
        pass &= report.pass;
        details.push_str(&format!(
            "{family} p={p} [{:.3}, {:.3}] in [{}, {}]; ",
            report.min_ratio, report.max_ratio, report.band.0, report.band.1
        ));
    }
    let elapsed = start.elapsed();
    pass &= within_budget(elapsed, Duration::from_secs(5));
    criterion(6, "growth of embedding weights", pass, &details);
}

#[test]
fn criterion_07_prior_recovery() {
    let start = Instant::now();
    let spec = SievePriorSpec::theoretical(BasisFamily::Legendre, 2, 6).unwrap();
    let cfg = McmcConfig {
        iterations: 55_000,
        burn_in: 5_000,
        proposal_scale: 1.0,
        adapt: true,
        seed: 777,
    };
    let chain = inference::rw_metropolis_prior_only(&spec, &cfg).unwrap();
    let mut worst = 0.0f64;
    for j in 1..6 {
        let mean: f64 =
            chain.samples.iter().map(|s| s.values()[j]).sum::<f64>() / chain.len() as f64;
        let var: f64 = chain
            .samples
            .iter()
            .map(|s| (s.values()[j] - mean).powi(2))
            .sum::<f64>()
            / chain.len() as f64;
        worst = worst.max((var.sqrt() / spec.sigmas[j] - 1.0).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst <= 0.10 && within_budget(elapsed, Duration::from_secs(30));
    criterion(
        7,
        "prior recovery",
        pass,
        &format!("worst sd deviation {:.1}%, {elapsed:?}", worst * 100.0),
    );
}

#[test]
fn criterion_08_rate_experiment_desk_scale() {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::defaults(ExperimentId::Exp2, false);
    cfg.p = 2;
    cfg.n_values = vec![100, 500, 1000, 2000];
    cfg.replications = 20;
    cfg.mcmc.iterations = 5000;
    cfg.mcmc.burn_in = 1000;
    cfg.seed = 0;
    assert!(matches!(cfg.sigmas, SigmaSpec::Theoretical));
    let report = experiments::run_experiment2(&cfg).unwrap();
    let mut pass = true;
    let mut details = String::new();
    for (median, rate) in report.medians.iter().zip(&report.rate_curve) {
        let bound = 1.5 * rate.value;
        pass &= median.median <= bound;
        details.push_str(&format!("n={}: {:.3}<={bound:.3}; ", median.n, median.median));
    }
    let medians: Vec<f64> = report.medians.iter().map(|m| m.median).collect();
    let monotone = medians_nonincreasing(&medians, 0.10);
    pass &= monotone;
    let elapsed = start.elapsed();
    pass &= within_budget(elapsed, Duration::from_secs(15 * 60));
    criterion(
        8,
        "Hellinger decay vs rate curve",
        pass,
        &format!("{details}monotone={monotone}, {elapsed:?}"),
    );
}

#[test]
fn criterion_09_estimator_experiment_desk_scale() {
    let start = Instant::now();
    let cfg = ExperimentConfig::defaults(ExperimentId::Exp1, false);
    assert_eq!(cfg.n_values, vec![2000]);
    let report = experiments::run_experiment1(&cfg).unwrap();
    let d_h = report.distances[0].hellinger;
    let curves = report.curves.as_ref().unwrap();
    let mut integral = 0.0;
    for i in 1..curves.x.len() {
        integral += 0.5 * (curves.x[i] - curves.x[i - 1]) * (curves.mean[i] + curves.mean[i - 1]);
    }
    let ordered = (0..curves.x.len())
        .all(|i| curves.lower[i] <= curves.mean[i] + 1e-12 && curves.mean[i] <= curves.upper[i] + 1e-12);
    let elapsed = start.elapsed();
    let pass = d_h <= 0.25
        && (integral - 1.0).abs() <= 1e-3
        && ordered
        && within_budget(elapsed, Duration::from_secs(3 * 60));
    criterion(
        9,
        "estimator experiment",
        pass,
        &format!("d_H {d_h:.4} <= 0.25, integral {integral:.6}, bands ordered {ordered}, {elapsed:?}"),
    );
}

#[test]
fn criterion_10_supplement_desk_scale() {
    let start = Instant::now();
    let mut details = String::new();
    let mut pass = true;
    for id in [ExperimentId::SuppLaguerre, ExperimentId::SuppHermite] {
        let mut cfg = ExperimentConfig::defaults(id, false);
        cfg.n_values = vec![5000];
        let report = experiments::run_supplement(&cfg).unwrap();
        let d_h = report.distances[0].hellinger;
        pass &= d_h <= 0.2;
        details.push_str(&format!("{id}: d_H {d_h:.4} <= 0.2; "));
    }
    let elapsed = start.elapsed();
    pass &= within_budget(elapsed, Duration::from_secs(5 * 60));
    criterion(10, "unbounded-domain fits", pass, &format!("{details}{elapsed:?}"));
}

#[test]
fn criterion_11_determinism() {
    let mut cfg = ExperimentConfig::defaults(ExperimentId::Exp2, false);
    cfg.n_values = vec![100, 200];
    cfg.replications = 2;
    cfg.mcmc.iterations = 600;
    cfg.mcmc.burn_in = 150;
    cfg.seed = 99;
    let dir_a = std::env::temp_dir().join(format!("polysieve-acc-a-{}", std::process::id()));
    let dir_b = std::env::temp_dir().join(format!("polysieve-acc-b-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir_a);
    let _ = std::fs::remove_dir_all(&dir_b);
    experiments::run_experiment2(&cfg)
        .unwrap()
        .write_outputs(&dir_a)
        .unwrap();
    experiments::run_experiment2(&cfg)
        .unwrap()
        .write_outputs(&dir_b)
        .unwrap();
    let bytes_a = std::fs::read(dir_a.join("distances.csv")).unwrap();
    let bytes_b = std::fs::read(dir_b.join("distances.csv")).unwrap();
    let pass = bytes_a == bytes_b;
    std::fs::remove_dir_all(&dir_a).unwrap();
    std::fs::remove_dir_all(&dir_b).unwrap();
    criterion(
        11,
        "byte-identical reruns",
        pass,
        &format!("distances.csv {} bytes", bytes_a.len()),
    );
}
