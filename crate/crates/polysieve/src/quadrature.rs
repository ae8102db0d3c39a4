//! Gauss quadrature rules matched to each reference weight, plus a dense
//! trapezoid fallback used to cross-check non-polynomial integrands.
//!
//! Nodes come from the symmetric-tridiagonal (Golub-Welsch) eigenvalue
//! problem built from the orthonormal recurrence coefficients, polished by
//! two Newton steps on the degree-`m` orthonormal polynomial; weights are the
//! Christoffel numbers `1 / sum_{j<m} p_j(x_k)^2`.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest supported rule order.
pub const MAX_ORDER: usize = 256;

/// Default order for polynomial inner products (exact through degree 127).
pub const INNER_PRODUCT_ORDER: usize = 64;

/// Default order for divergence-style non-polynomial integrands.
pub const DIVERGENCE_ORDER: usize = 128;

/// Reference weight of the measure `w(x) dx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    /// `w(x) = 1` on `[-1, 1]`.
    Unit,
    /// `w(x) = exp(-x^2)` on `R`.
    Gaussian,
    /// `w(x) = exp(-x)` on `R+`.
    Exponential,
    /// `w(x) = 1` on `[0, 1]`.
    Unit01,
}

impl Weight {
    pub fn domain(self) -> (f64, f64) {
        match self {
            Weight::Unit => (-1.0, 1.0),
            Weight::Gaussian => (f64::NEG_INFINITY, f64::INFINITY),
            Weight::Exponential => (0.0, f64::INFINITY),
            Weight::Unit01 => (0.0, 1.0),
        }
    }

    /// The weight function itself.
    pub fn density(self, x: f64) -> f64 {
        match self {
            Weight::Unit | Weight::Unit01 => 1.0,
            Weight::Gaussian => (-x * x).exp(),
            Weight::Exponential => (-x).exp(),
        }
    }

    /// Total mass `int w dx` (the `beta_0` of the orthonormal recurrence).
    pub fn total_mass(self) -> f64 {
        match self {
            Weight::Unit => 2.0,
            Weight::Gaussian => std::f64::consts::PI.sqrt(),
            Weight::Exponential => 1.0,
            Weight::Unit01 => 1.0,
        }
    }

    /// Monic recurrence coefficients `alpha_k`, `beta_k` of the orthogonal
    /// system for this weight (`p_{k+1} = (x - alpha_k) p_k - beta_k p_{k-1}`).
    fn monic_recurrence(self, k: usize) -> (f64, f64) {
        let kf = k as f64;
        match self {
            Weight::Unit => (0.0, kf * kf / (4.0 * kf * kf - 1.0)),
            Weight::Gaussian => (0.0, 0.5 * kf),
            Weight::Exponential => (2.0 * kf + 1.0, kf * kf),
            // shifted Legendre on [0, 1]
            Weight::Unit01 => (0.5, kf * kf / (4.0 * (4.0 * kf * kf - 1.0))),
        }
    }

    fn symmetric(self) -> bool {
        matches!(self, Weight::Unit | Weight::Gaussian)
    }
}

/// A Gauss rule: `int f w dx ~ sum_k weights[k] * f(nodes[k])`, exact for
/// polynomials of degree `<= 2 * order - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub weight: Weight,
    pub order: usize,
    /// Strictly increasing, strictly inside the domain.
    pub nodes: Vec<f64>,
    /// Strictly positive Christoffel numbers.
    pub weights: Vec<f64>,
}

/// Orthonormal recurrence values `p_0(x) .. p_m(x)` and `p_m'(x)`.
fn orthonormal_with_derivative(weight: Weight, m: usize, x: f64) -> (Vec<f64>, f64) {
    let mut values = Vec::with_capacity(m + 1);
    let mut p_prev = 0.0;
    let mut p_curr = 1.0 / weight.total_mass().sqrt();
    let mut d_prev = 0.0;
    let mut d_curr = 0.0;
    values.push(p_curr);
    for k in 0..m {
        let (alpha, _) = weight.monic_recurrence(k);
        let sq_beta_k = weight.monic_recurrence(k).1.sqrt();
        let sq_beta_next = weight.monic_recurrence(k + 1).1.sqrt();
        let p_next = ((x - alpha) * p_curr - sq_beta_k * p_prev) / sq_beta_next;
        let d_next = ((x - alpha) * d_curr + p_curr - sq_beta_k * d_prev) / sq_beta_next;
        p_prev = p_curr;
        p_curr = p_next;
        d_prev = d_curr;
        d_curr = d_next;
        values.push(p_curr);
    }
    (values, d_curr)
}

/// Build the Gauss rule of the given order for a weight.
pub fn gauss_rule(weight: Weight, m: usize) -> Result<QuadratureRule> {
    if !(1..=MAX_ORDER).contains(&m) {
        return Err(Error::Capability(format!(
            "quadrature order {m} outside supported range 1..={MAX_ORDER}"
        )));
    }
    // Jacobi matrix eigenvalues are the nodes.
    let mut jacobi = nalgebra::DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        jacobi[(k, k)] = weight.monic_recurrence(k).0;
        if k + 1 < m {
            let off = weight.monic_recurrence(k + 1).1.sqrt();
            jacobi[(k, k + 1)] = off;
            jacobi[(k + 1, k)] = off;
        }
    }
    let mut nodes: Vec<f64> = jacobi
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));

    // Two Newton steps pin each node to machine precision.
    for x in nodes.iter_mut() {
        for _ in 0..2 {
            let (values, deriv) = orthonormal_with_derivative(weight, m, *x);
            if deriv != 0.0 {
                *x -= values[m] / deriv;
            }
        }
    }
    if weight.symmetric() {
        // enforce exact symmetry so odd moments vanish identically
        let n = nodes.len();
        for k in 0..n / 2 {
            let half = 0.5 * (nodes[n - 1 - k] - nodes[k]);
            nodes[k] = -half;
            nodes[n - 1 - k] = half;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
    }

    let mut weights = Vec::with_capacity(m);
    for &x in &nodes {
        let (values, _) = orthonormal_with_derivative(weight, m, x);
        let sum: f64 = values[..m].iter().map(|p| p * p).sum();
        weights.push(1.0 / sum);
    }
    if weight.symmetric() {
        let n = weights.len();
        for k in 0..n / 2 {
            let avg = 0.5 * (weights[k] + weights[n - 1 - k]);
            weights[k] = avg;
            weights[n - 1 - k] = avg;
        }
    }

    let (lo, hi) = weight.domain();
    for (&x, &w) in nodes.iter().zip(&weights) {
        if !(x > lo && x < hi) {
            return Err(Error::Numeric(format!(
                "node {x} escaped the open domain for {weight:?} order {m}"
            )));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Numeric(format!(
                "nonpositive weight {w} at node {x} for {weight:?} order {m}"
            )));
        }
    }
    Ok(QuadratureRule {
        weight,
        order: m,
        nodes,
        weights,
    })
}

/// `sum_k w_k f(x_k)` with Neumaier-compensated summation.
pub fn integrate<F: Fn(f64) -> f64>(f: F, rule: &QuadratureRule) -> Result<f64> {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let value = f(x);
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "integrand is {value} at node {x}"
            )));
        }
        let term = w * value;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    Ok(sum + comp)
}

/// Dense trapezoid grid against `w(x) dx`, used to cross-check divergence
/// integrals. Bounded domains use 4096 points; unbounded domains truncate
/// where the tail weight mass drops below 1e-12 and use a finer grid since
/// the trapezoid error is only `O(h^2)` at a non-periodic endpoint.
#[derive(Debug, Clone)]
pub struct FallbackGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl FallbackGrid {
    pub fn for_weight(weight: Weight) -> Self {
        let (lo, hi, count) = match weight {
            Weight::Unit => (-1.0, 1.0, 4096),
            Weight::Unit01 => (0.0, 1.0, 4096),
            // exp(-36) and exp(-30) are both far below the 1e-12 mass target
            Weight::Gaussian => (-6.0, 6.0, 131_072),
            Weight::Exponential => (0.0, 30.0, 131_072),
        };
        let h = (hi - lo) / (count - 1) as f64;
        let mut nodes = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for k in 0..count {
            let x = lo + h * k as f64;
            let trap = if k == 0 || k == count - 1 { 0.5 * h } else { h };
            nodes.push(x);
            weights.push(trap * weight.density(x));
        }
        FallbackGrid { nodes, weights }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let value = f(x);
            if !value.is_finite() {
                return Err(Error::Numeric(format!(
                    "integrand is {value} at grid point {x}"
                )));
            }
            let term = w * value;
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
        Ok(sum + comp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_legendre_rule() {
        let rule = gauss_rule(Weight::Unit, 2).unwrap();
        let inv_sqrt3 = 1.0 / 3.0f64.sqrt();
        assert!((rule.nodes[0] + inv_sqrt3).abs() < 1e-15);
        assert!((rule.nodes[1] - inv_sqrt3).abs() < 1e-15);
        assert!((rule.weights[0] - 1.0).abs() < 1e-14);
        assert!((rule.weights[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_point_hermite_and_laguerre_rules() {
        let rule = gauss_rule(Weight::Gaussian, 1).unwrap();
        assert_eq!(rule.nodes, vec![0.0]);
        assert!((rule.weights[0] - std::f64::consts::PI.sqrt()).abs() < 1e-14);

        let rule = gauss_rule(Weight::Exponential, 1).unwrap();
        assert!((rule.nodes[0] - 1.0).abs() < 1e-14);
        assert!((rule.weights[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn basic_integrals() {
        let rule = gauss_rule(Weight::Unit, 4).unwrap();
        assert!((integrate(|_| 1.0, &rule).unwrap() - 2.0).abs() < 1e-14);
        let rule = gauss_rule(Weight::Unit, 2).unwrap();
        assert!((integrate(|x| x * x, &rule).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        let rule = gauss_rule(Weight::Gaussian, 3).unwrap();
        assert!((integrate(|_| 1.0, &rule).unwrap() - std::f64::consts::PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn order_out_of_range() {
        assert!(matches!(
            gauss_rule(Weight::Unit, 0),
            Err(Error::Capability(_))
        ));
        assert!(matches!(
            gauss_rule(Weight::Unit, MAX_ORDER + 1),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn non_finite_integrand_reports_node() {
        let rule = gauss_rule(Weight::Unit, 8).unwrap();
        let err = integrate(|x| 1.0 / (x - rule.nodes[3]), &rule).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn rules_are_deterministic() {
        for weight in [Weight::Unit, Weight::Gaussian, Weight::Exponential, Weight::Unit01] {
            let a = gauss_rule(weight, 37).unwrap();
            let b = gauss_rule(weight, 37).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn nodes_sorted_weights_positive() {
        for weight in [Weight::Unit, Weight::Gaussian, Weight::Exponential, Weight::Unit01] {
            for m in [1, 2, 7, 16, 64, 128] {
                let rule = gauss_rule(weight, m).unwrap();
                assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]), "{weight:?} m={m}");
                assert!(rule.weights.iter().all(|w| *w > 0.0), "{weight:?} m={m}");
                let (lo, hi) = weight.domain();
                assert!(rule.nodes.iter().all(|x| *x > lo && *x < hi));
            }
        }
    }

    /// Absolute moments `int |x|^d w dx` used as exactness oracles.
    fn moment(weight: Weight, d: usize) -> (f64, f64) {
        match weight {
            Weight::Unit => {
                let abs = 2.0 / (d as f64 + 1.0);
                let signed = if d.is_multiple_of(2) { abs } else { 0.0 };
                (signed, abs)
            }
            Weight::Unit01 => {
                let v = 1.0 / (d as f64 + 1.0);
                (v, v)
            }
            Weight::Exponential => {
                let v = (1..=d).fold(1.0, |acc, k| acc * k as f64);
                (v, v)
            }
            Weight::Gaussian => {
                // int |x|^d e^{-x^2} dx = Gamma((d+1)/2)
                let abs = gamma_half_integer(d + 1);
                let signed = if d.is_multiple_of(2) { abs } else { 0.0 };
                (signed, abs)
            }
        }
    }

    /// Gamma(n/2) for integer n >= 1.
    fn gamma_half_integer(n: usize) -> f64 {
        if n.is_multiple_of(2) {
            (1..n / 2).fold(1.0, |acc, k| acc * k as f64)
        } else {
            let mut value = std::f64::consts::PI.sqrt();
            let mut arg = 0.5;
            for _ in 0..n / 2 {
                value *= arg;
                arg += 1.0;
            }
            value
        }
    }

    #[test]
    fn exactness_on_random_polynomials() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for weight in [Weight::Unit, Weight::Gaussian, Weight::Exponential, Weight::Unit01] {
            for _ in 0..200 {
                let m = 2 + (next() * 15.0) as usize; // 2..=16
                let degree = ((next() * (2 * m) as f64) as usize).min(2 * m - 1);
                let coeffs: Vec<f64> = (0..=degree).map(|_| 2.0 * next() - 1.0).collect();
                let rule = gauss_rule(weight, m).unwrap();
                let value = integrate(
                    |x| {
                        let mut acc = 0.0;
                        let mut pow = 1.0;
                        for c in &coeffs {
                            acc += c * pow;
                            pow *= x;
                        }
                        acc
                    },
                    &rule,
                )
                .unwrap();
                let mut exact = 0.0;
                let mut scale = 0.0;
                for (d, c) in coeffs.iter().enumerate() {
                    let (signed, abs) = moment(weight, d);
                    exact += c * signed;
                    scale += c.abs() * abs;
                }
                assert!(
                    (value - exact).abs() <= 1e-11 * scale.max(1.0),
                    "{weight:?} m={m} degree={degree}: {value} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn fallback_grid_agrees_with_gauss() {
        for weight in [Weight::Unit, Weight::Gaussian, Weight::Exponential, Weight::Unit01] {
            let rule = gauss_rule(weight, DIVERGENCE_ORDER).unwrap();
            let grid = FallbackGrid::for_weight(weight);
            let f = |x: f64| (1.0 + 0.5 * (x * 0.7).sin()).sqrt();
            let a = integrate(f, &rule).unwrap();
            let b = grid.integrate(f).unwrap();
            assert!((a - b).abs() < 1e-6, "{weight:?}: {a} vs {b}");
        }
    }
}
