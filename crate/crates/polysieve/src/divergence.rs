//! Hellinger distance, KL divergence, and log-likelihood-ratio variance
//! between weighted densities.
//!
//! All three are integrals against the reference measure, computed with the
//! order-128 Gauss rule of the shared weight and cross-checked on the dense
//! trapezoid fallback. Density evaluations are clamped at zero (raw
//! expansions can dip slightly negative) and log arguments are floored at
//! `1e-300`; the clamped-away mass is reported so callers can bound it.

use crate::density::{format_f64, WeightedDensity};
use crate::quadrature::{self, FallbackGrid, Weight, DIVERGENCE_ORDER};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Fallback disagreement above which a report is flagged.
pub const DISCREPANCY_WARN: f64 = 1e-6;

const LOG_FLOOR: f64 = 1e-300;

/// All three divergences plus numeric diagnostics, one CSV row.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub hellinger_sq: f64,
    /// `f64::INFINITY` marks an absolute-continuity failure.
    pub kl: f64,
    pub log_var: f64,
    pub order: usize,
    /// Largest |Gauss - trapezoid| over the finite integrals.
    pub discrepancy: f64,
    /// Largest clamped-away negative mass of the two densities.
    pub clamp_mass: f64,
}

impl DivergenceReport {
    pub fn csv_header() -> &'static str {
        "h2,kl,logvar,order,discrepancy"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            format_f64(self.hellinger_sq),
            format_f64(self.kl),
            format_f64(self.log_var),
            self.order,
            format_f64(self.discrepancy)
        )
    }

    pub fn has_warning(&self) -> bool {
        self.discrepancy > DISCREPANCY_WARN || self.clamp_mass > 1e-6
    }
}

fn check_compatible(g1: &WeightedDensity, g2: &WeightedDensity) -> Result<Weight> {
    if g1.weight_tag() != g2.weight_tag() {
        return Err(Error::Input(format!(
            "divergence between mismatched domains: {} vs {}",
            g1.family(),
            g2.family()
        )));
    }
    Ok(g1.weight_tag())
}

/// `int (sqrt(g1) - sqrt(g2))^2 w dx`, in `[0, 2]` for densities.
pub fn hellinger_sq(g1: &WeightedDensity, g2: &WeightedDensity) -> Result<f64> {
    let weight = check_compatible(g1, g2)?;
    hellinger_sq_with(
        weight,
        |x| g1.evaluate_unchecked(x),
        |x| g2.evaluate_unchecked(x),
    )
}

/// `int g1 log(g1/g2) w dx >= 0`; `INFINITY` when `g2` vanishes where `g1`
/// carries mass.
pub fn kl(g1: &WeightedDensity, g2: &WeightedDensity) -> Result<f64> {
    let weight = check_compatible(g1, g2)?;
    kl_with(
        weight,
        |x| g1.evaluate_unchecked(x),
        |x| g2.evaluate_unchecked(x),
    )
}

/// Variance of the log-likelihood ratio under `g1`.
pub fn log_var(g1: &WeightedDensity, g2: &WeightedDensity) -> Result<f64> {
    let weight = check_compatible(g1, g2)?;
    log_var_with(
        weight,
        |x| g1.evaluate_unchecked(x),
        |x| g2.evaluate_unchecked(x),
    )
}

/// All three divergences with the fallback cross-check and clamp diagnostic.
pub fn report(g1: &WeightedDensity, g2: &WeightedDensity) -> Result<DivergenceReport> {
    let weight = check_compatible(g1, g2)?;
    report_with(
        weight,
        |x| g1.evaluate_unchecked(x),
        |x| g2.evaluate_unchecked(x),
    )
}

/// Closure-based variants: the experiment harness feeds interpolated
/// posterior-mean curves through these.
pub fn hellinger_sq_with<F1, F2>(weight: Weight, f1: F1, f2: F2) -> Result<f64>
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    let rule = quadrature::gauss_rule(weight, DIVERGENCE_ORDER)?;
    quadrature::integrate(|x| hellinger_integrand(f1(x), f2(x)), &rule)
}

pub fn kl_with<F1, F2>(weight: Weight, f1: F1, f2: F2) -> Result<f64>
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    let rule = quadrature::gauss_rule(weight, DIVERGENCE_ORDER)?;
    let diverged = std::cell::Cell::new(false);
    let value = quadrature::integrate(
        |x| {
            let (term, bad) = kl_integrand(f1(x), f2(x));
            diverged.set(diverged.get() | bad);
            term
        },
        &rule,
    )?;
    Ok(if diverged.get() { f64::INFINITY } else { value })
}

pub fn log_var_with<F1, F2>(weight: Weight, f1: F1, f2: F2) -> Result<f64>
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    let rule = quadrature::gauss_rule(weight, DIVERGENCE_ORDER)?;
    let diverged = std::cell::Cell::new(false);
    let first = quadrature::integrate(
        |x| {
            let (term, bad) = kl_integrand(f1(x), f2(x));
            diverged.set(diverged.get() | bad);
            term
        },
        &rule,
    )?;
    let second = quadrature::integrate(|x| log_sq_integrand(f1(x), f2(x)), &rule)?;
    Ok(if diverged.get() {
        f64::INFINITY
    } else {
        second - first * first
    })
}

pub fn report_with<F1, F2>(weight: Weight, f1: F1, f2: F2) -> Result<DivergenceReport>
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    let rule = quadrature::gauss_rule(weight, DIVERGENCE_ORDER)?;
    let grid = FallbackGrid::for_weight(weight);

    let h2 = quadrature::integrate(|x| hellinger_integrand(f1(x), f2(x)), &rule)?;
    let h2_fb = grid.integrate(|x| hellinger_integrand(f1(x), f2(x)))?;
    let mut discrepancy = (h2 - h2_fb).abs();

    let diverged = std::cell::Cell::new(false);
    let kl_gauss = quadrature::integrate(
        |x| {
            let (term, bad) = kl_integrand(f1(x), f2(x));
            diverged.set(diverged.get() | bad);
            term
        },
        &rule,
    )?;
    let second = quadrature::integrate(|x| log_sq_integrand(f1(x), f2(x)), &rule)?;
    let (kl_value, log_var_value) = if diverged.get() {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let kl_fb = grid.integrate(|x| kl_integrand(f1(x), f2(x)).0)?;
        let second_fb = grid.integrate(|x| log_sq_integrand(f1(x), f2(x)))?;
        discrepancy = discrepancy
            .max((kl_gauss - kl_fb).abs())
            .max((second - second_fb).abs());
        (kl_gauss, second - kl_gauss * kl_gauss)
    };

    let clamp1 = quadrature::integrate(|x| (-f1(x)).max(0.0), &rule)?;
    let clamp2 = quadrature::integrate(|x| (-f2(x)).max(0.0), &rule)?;

    Ok(DivergenceReport {
        hellinger_sq: h2.clamp(0.0, 2.0),
        kl: if kl_value.is_finite() {
            kl_value.max(0.0)
        } else {
            kl_value
        },
        log_var: if log_var_value.is_finite() {
            log_var_value.max(0.0)
        } else {
            log_var_value
        },
        order: DIVERGENCE_ORDER,
        discrepancy,
        clamp_mass: clamp1.max(clamp2),
    })
}

fn hellinger_integrand(v1: f64, v2: f64) -> f64 {
    let d = v1.max(0.0).sqrt() - v2.max(0.0).sqrt();
    d * d
}

/// Returns the node's KL term and whether absolute continuity failed there.
fn kl_integrand(v1: f64, v2: f64) -> (f64, bool) {
    let v1 = v1.max(0.0);
    let v2 = v2.max(0.0);
    if v1 <= LOG_FLOOR {
        return (0.0, false);
    }
    let bad = v1 > 1e-12 && v2 <= LOG_FLOOR;
    let term = v1 * (v1.max(LOG_FLOOR).ln() - v2.max(LOG_FLOOR).ln());
    (term, bad)
}

fn log_sq_integrand(v1: f64, v2: f64) -> f64 {
    let v1 = v1.max(0.0);
    let v2 = v2.max(0.0);
    if v1 <= LOG_FLOOR {
        return 0.0;
    }
    let r = v1.max(LOG_FLOOR).ln() - v2.max(LOG_FLOOR).ln();
    v1 * r * r
}
