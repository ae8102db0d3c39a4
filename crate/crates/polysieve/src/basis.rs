//! Orthogonal polynomial families and the trigonometric comparison basis.
//!
//! Each family pairs a polynomial system `{q_j}` with a weight `w` on a
//! domain `I`, normalized by `int q_i q_j w dx = delta_ij * gamma_j`:
//!
//! - Legendre: `w(x) = 1` on `[-1, 1]`, `gamma_j = 2/(2j+1)`
//! - Hermite (physicists'): `w(x) = exp(-x^2)` on `R`, `gamma_j = 2^j j! sqrt(pi)`
//! - Laguerre: `w(x) = exp(-x)` on `R+`, `gamma_j = 1`
//! - generalized Legendre: boundary-vanishing combinations
//!   `(L_j - L_{j-2}) / sqrt(4j+6)` (not orthogonal)
//! - trigonometric: `1, sqrt(2) sin(2 pi j x), sqrt(2) cos(2 pi j x)` on `[0, 1]`
//!
//! Besides evaluation, the module provides the derivative-expansion
//! coefficients `a_ij^(l)` of `q_j^(l) = sum_{i<j} a_ij^(l) q_i` and the
//! growth weights `gamma_tilde_j` that define the Sobolev-type coefficient
//! constraint and the sieve set.

use crate::quadrature::{self, Weight};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Highest supported basis degree. Recurrences are stable well past the
/// experiment range (all experiments use at most 11 basis functions).
pub const MAX_DEGREE: usize = 200;

/// A basis family; domain and weight are implied by the variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    Legendre,
    GeneralizedLegendre,
    Hermite,
    Laguerre,
    Trigonometric,
}

impl std::fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            BasisFamily::Legendre => "legendre",
            BasisFamily::GeneralizedLegendre => "generalized-legendre",
            BasisFamily::Hermite => "hermite",
            BasisFamily::Laguerre => "laguerre",
            BasisFamily::Trigonometric => "trigonometric",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for BasisFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "legendre" => Ok(BasisFamily::Legendre),
            "generalized-legendre" | "generalized_legendre" => {
                Ok(BasisFamily::GeneralizedLegendre)
            }
            "hermite" => Ok(BasisFamily::Hermite),
            "laguerre" => Ok(BasisFamily::Laguerre),
            "trigonometric" | "trig" => Ok(BasisFamily::Trigonometric),
            other => Err(Error::Input(format!("unknown basis family `{other}`"))),
        }
    }
}

impl BasisFamily {
    /// Domain `(lo, hi)`; infinities mark unbounded sides.
    pub fn domain(self) -> (f64, f64) {
        match self {
            BasisFamily::Legendre | BasisFamily::GeneralizedLegendre => (-1.0, 1.0),
            BasisFamily::Hermite => (f64::NEG_INFINITY, f64::INFINITY),
            BasisFamily::Laguerre => (0.0, f64::INFINITY),
            BasisFamily::Trigonometric => (0.0, 1.0),
        }
    }

    pub fn contains(self, x: f64) -> bool {
        let (lo, hi) = self.domain();
        x.is_finite() && x >= lo && x <= hi
    }

    /// Quadrature weight tag matched to this family.
    pub fn weight_tag(self) -> Weight {
        match self {
            BasisFamily::Legendre | BasisFamily::GeneralizedLegendre => Weight::Unit,
            BasisFamily::Hermite => Weight::Gaussian,
            BasisFamily::Laguerre => Weight::Exponential,
            BasisFamily::Trigonometric => Weight::Unit01,
        }
    }

    /// The weight function `w(x)`.
    pub fn weight(self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::Input(format!(
                "point {x} outside domain of {self}"
            )));
        }
        Ok(self.weight_tag().density(x))
    }

    /// True for the three orthogonal polynomial systems (Legendre, Hermite,
    /// Laguerre); the generalized Legendre combinations and the
    /// trigonometric system are excluded.
    pub fn is_orthogonal_polynomial(self) -> bool {
        matches!(
            self,
            BasisFamily::Legendre | BasisFamily::Hermite | BasisFamily::Laguerre
        )
    }

    fn check_degree(self, j: usize) -> Result<()> {
        if j > MAX_DEGREE {
            return Err(Error::Capability(format!(
                "degree {j} exceeds supported maximum {MAX_DEGREE}"
            )));
        }
        Ok(())
    }

    /// Evaluate `q_j(x)`.
    pub fn eval(self, j: usize, x: f64) -> Result<f64> {
        self.check_degree(j)?;
        if !self.contains(x) {
            return Err(Error::Input(format!(
                "point {x} outside domain of {self}"
            )));
        }
        Ok(self.eval_unchecked(j, x))
    }

    /// Evaluate `q_0(x) .. q_n(x)` in one recurrence pass.
    pub fn eval_all(self, n: usize, x: f64) -> Result<Vec<f64>> {
        self.check_degree(n)?;
        if !self.contains(x) {
            return Err(Error::Input(format!(
                "point {x} outside domain of {self}"
            )));
        }
        Ok(self.eval_all_unchecked(n, x))
    }

    /// `eval` without domain/degree checks; callers validate inputs up front.
    pub(crate) fn eval_unchecked(self, j: usize, x: f64) -> f64 {
        match self {
            BasisFamily::Legendre => legendre(j, x),
            BasisFamily::GeneralizedLegendre => {
                let upper = legendre(j, x);
                let lower = if j >= 2 { legendre(j - 2, x) } else { 0.0 };
                (upper - lower) / gen_legendre_scale(j)
            }
            BasisFamily::Hermite => hermite(j, x),
            BasisFamily::Laguerre => laguerre(j, x),
            BasisFamily::Trigonometric => trigonometric(j, x),
        }
    }

    pub(crate) fn eval_all_unchecked(self, n: usize, x: f64) -> Vec<f64> {
        match self {
            BasisFamily::Trigonometric => (0..=n).map(|j| trigonometric(j, x)).collect(),
            BasisFamily::GeneralizedLegendre => {
                let std = BasisFamily::Legendre.eval_all_unchecked(n, x);
                (0..=n)
                    .map(|j| {
                        let lower = if j >= 2 { std[j - 2] } else { 0.0 };
                        (std[j] - lower) / gen_legendre_scale(j)
                    })
                    .collect()
            }
            _ => {
                let mut out = Vec::with_capacity(n + 1);
                let mut prev = 0.0;
                let mut curr = 1.0;
                out.push(curr);
                for k in 0..n {
                    let (a, b, c) = self.recurrence(k);
                    let next = (a * x + b) * curr - c * prev;
                    prev = curr;
                    curr = next;
                    out.push(curr);
                }
                out
            }
        }
    }

    /// Three-term recurrence `q_{k+1} = (A_k x + B_k) q_k - C_k q_{k-1}`
    /// for the polynomial families.
    fn recurrence(self, k: usize) -> (f64, f64, f64) {
        let kf = k as f64;
        match self {
            BasisFamily::Legendre | BasisFamily::GeneralizedLegendre => (
                (2.0 * kf + 1.0) / (kf + 1.0),
                0.0,
                kf / (kf + 1.0),
            ),
            BasisFamily::Hermite => (2.0, 0.0, 2.0 * kf),
            BasisFamily::Laguerre => (
                -1.0 / (kf + 1.0),
                (2.0 * kf + 1.0) / (kf + 1.0),
                kf / (kf + 1.0),
            ),
            BasisFamily::Trigonometric => unreachable!("trigonometric basis has no recurrence"),
        }
    }

    /// `q_j^{(l)}(x)` by differentiating the recurrence `l` times:
    /// `q_{k+1}^{(l)} = (A_k x + B_k) q_k^{(l)} + l A_k q_k^{(l-1)} - C_k q_{k-1}^{(l)}`.
    pub fn eval_derivative(self, j: usize, l: usize, x: f64) -> Result<f64> {
        self.check_degree(j)?;
        if !self.contains(x) {
            return Err(Error::Input(format!(
                "point {x} outside domain of {self}"
            )));
        }
        if l == 0 {
            return Ok(self.eval_unchecked(j, x));
        }
        match self {
            BasisFamily::Trigonometric => Err(Error::Capability(
                "derivative evaluation is not defined for the trigonometric basis".into(),
            )),
            BasisFamily::GeneralizedLegendre => {
                let upper = BasisFamily::Legendre.eval_derivative(j, l, x)?;
                let lower = if j >= 2 {
                    BasisFamily::Legendre.eval_derivative(j - 2, l, x)?
                } else {
                    0.0
                };
                Ok((upper - lower) / gen_legendre_scale(j))
            }
            _ => {
                // table[d][k] = q_k^{(d)}(x), built order by order
                let mut table = vec![vec![0.0; j + 1]; l + 1];
                table[0] = self.eval_all_unchecked(j, x);
                for d in 1..=l {
                    for k in 0..j {
                        let (a, b, _) = self.recurrence(k);
                        let c = self.recurrence(k).2;
                        let lower = if k >= 1 { table[d][k - 1] } else { 0.0 };
                        table[d][k + 1] =
                            (a * x + b) * table[d][k] + (d as f64) * a * table[d - 1][k] - c * lower;
                    }
                }
                Ok(table[l][j])
            }
        }
    }

    /// Normalization constant `gamma_j = int q_j^2 w dx` in closed form.
    ///
    /// The Hermite constant `2^j j! sqrt(pi)` is held in log space and
    /// exponentiated on demand; past the representable range use
    /// [`BasisFamily::log_gamma`].
    pub fn gamma(self, j: usize) -> Result<f64> {
        self.check_degree(j)?;
        match self {
            BasisFamily::Legendre | BasisFamily::GeneralizedLegendre => {
                Ok(2.0 / (2.0 * j as f64 + 1.0))
            }
            BasisFamily::Hermite => {
                let lg = hermite_log_gamma(j);
                let value = lg.exp();
                if !value.is_finite() {
                    return Err(Error::Capability(format!(
                        "hermite gamma_{j} overflows f64; use log_gamma"
                    )));
                }
                Ok(value)
            }
            BasisFamily::Laguerre => Ok(1.0),
            BasisFamily::Trigonometric => Ok(1.0),
        }
    }

    /// `ln gamma_j`, exact for every supported degree.
    pub fn log_gamma(self, j: usize) -> Result<f64> {
        self.check_degree(j)?;
        match self {
            BasisFamily::Hermite => Ok(hermite_log_gamma(j)),
            _ => Ok(self.gamma(j)?.ln()),
        }
    }

    /// `gamma_0 = int w dx`, the weight's total mass.
    pub fn gamma0(self) -> f64 {
        self.gamma(0).expect("gamma_0 is always representable")
    }

    /// Coefficients `(a_0j^(l), ..., a_{j-1,j}^(l))` of the expansion
    /// `q_j^(l) = sum_{i<j} a_ij^(l) q_i`.
    ///
    /// Hermite uses the closed form `a_{(j-l)j}^(l) = 2^l j (j-1) ... (j-l+1)`
    /// (all other entries vanish); Legendre iterates its derivative
    /// recurrence `L_{k+1}' = L_{k-1}' + (2k+1) L_k`; Laguerre projects
    /// `q_j^(l)` onto the basis by quadrature.
    pub fn derivative_coeffs(self, j: usize, l: usize) -> Result<Vec<f64>> {
        self.check_degree(j)?;
        if l == 0 {
            return Err(Error::Input(
                "derivative order 0 has no lower-degree expansion".into(),
            ));
        }
        if l > j {
            return Err(Error::Input(format!(
                "derivative order {l} exceeds degree {j}"
            )));
        }
        match self {
            BasisFamily::Hermite => {
                let mut row = vec![0.0; j];
                let mut coeff = 1.0;
                for t in 0..l {
                    coeff *= 2.0 * (j - t) as f64;
                }
                row[j - l] = coeff;
                Ok(row)
            }
            BasisFamily::Legendre => Ok(legendre_derivative_coeffs(j, l)),
            BasisFamily::Laguerre => self.projected_derivative_coeffs(j, l),
            BasisFamily::GeneralizedLegendre | BasisFamily::Trigonometric => {
                Err(Error::Capability(format!(
                    "derivative expansion is only defined for orthogonal polynomial families, not {self}"
                )))
            }
        }
    }

    /// Quadrature projection `a_ij^(l) = (1/gamma_i) int q_j^(l) q_i w dx`.
    fn projected_derivative_coeffs(self, j: usize, l: usize) -> Result<Vec<f64>> {
        // Integrand degree is at most (j - l) + (j - 1); j + 1 nodes suffice.
        let rule = quadrature::gauss_rule(self.weight_tag(), (j + 1).max(16))?;
        let mut row = Vec::with_capacity(j);
        for i in 0..j {
            let inner = quadrature::integrate(
                |x| {
                    let deriv = self
                        .eval_derivative(j, l, x)
                        .expect("nodes lie inside the domain");
                    deriv * self.eval_unchecked(i, x)
                },
                &rule,
            )?;
            row.push(inner / self.gamma(i)?);
        }
        Ok(row)
    }

    /// Build the full table of derivative rows for degrees `0..=max_degree`.
    pub fn derivative_table(self, l: usize, max_degree: usize) -> Result<DerivativeCoeffTable> {
        let mut entries = Vec::with_capacity(max_degree + 1);
        for j in 0..=max_degree {
            if l > j {
                entries.push(Vec::new());
            } else {
                entries.push(self.derivative_coeffs(j, l)?);
            }
        }
        Ok(DerivativeCoeffTable {
            family: self,
            order: l,
            entries,
        })
    }

    /// Growth weight `gamma_tilde_j` bounding the Sobolev embedding.
    ///
    /// `Lemma` mode returns
    /// `max{ max_{1<=l<=min(j,p)} sum_{i<j} (a_ij^(l))^4 gamma_i, j^4 max_{i<j} gamma_i }`;
    /// `Sieve` mode additionally floors the value at `j^(7p) gamma_j`.
    pub fn gamma_tilde(self, j: usize, p: usize, mode: GammaTildeMode) -> Result<f64> {
        if j == 0 {
            return Err(Error::Input(
                "gamma_tilde is defined for j >= 1; use gamma_0 for the zeroth term".into(),
            ));
        }
        if p == 0 {
            return Err(Error::Input("smoothness p must be >= 1".into()));
        }
        self.check_degree(j)?;
        let mut best = 0.0f64;
        for l in 1..=j.min(p) {
            let row = self.derivative_coeffs(j, l)?;
            let mut sum = 0.0;
            for (i, a) in row.iter().enumerate() {
                sum += a.powi(4) * self.gamma(i)?;
            }
            best = best.max(sum);
        }
        let mut max_gamma = 0.0f64;
        for i in 0..j {
            max_gamma = max_gamma.max(self.gamma(i)?);
        }
        best = best.max((j as f64).powi(4) * max_gamma);
        if let GammaTildeMode::Sieve = mode {
            let floor = (j as f64).powi(7 * p as i32) * self.gamma(j)?;
            best = best.max(floor);
        }
        if !best.is_finite() {
            return Err(Error::Capability(format!(
                "gamma_tilde_{j} overflows f64 for {self}, p={p}"
            )));
        }
        Ok(best)
    }
}

/// Which lower bound `gamma_tilde_j` realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaTildeMode {
    /// The embedding bound alone.
    Lemma,
    /// The embedding bound floored at `j^(7p) gamma_j` (prior construction).
    Sieve,
}

/// Derivative-expansion rows `a_ij^(l)` for one family and order.
#[derive(Debug, Clone)]
pub struct DerivativeCoeffTable {
    pub family: BasisFamily,
    pub order: usize,
    /// `entries[j]` holds `(a_0j, ..., a_{j-1,j})`; empty when `order > j`.
    pub entries: Vec<Vec<f64>>,
}

impl DerivativeCoeffTable {
    /// Reconstruct `q_j^(l)(x)` from the stored row.
    pub fn reconstruct(&self, j: usize, x: f64) -> Result<f64> {
        let row = self
            .entries
            .get(j)
            .ok_or_else(|| Error::Input(format!("degree {j} not tabulated")))?;
        let values = self.family.eval_all(j.saturating_sub(1), x)?;
        Ok(row.iter().zip(&values).map(|(a, q)| a * q).sum())
    }
}

/// Convert generalized-Legendre coefficients to standard Legendre ones:
/// `eta_j = et_j / sqrt(4j+6) - et_{j+2} / sqrt(4j+14)` for `j <= N-2`
/// and `eta_j = et_j / sqrt(4j+6)` for the top two indices, matching
/// `sum et_j (L_j - L_{j-2}) / sqrt(4j+6)` term by term (`L_{-1} = L_{-2} = 0`).
pub fn generalized_to_standard(eta_tilde: &[f64]) -> Result<Vec<f64>> {
    if eta_tilde.len() < 2 {
        return Err(Error::Input(
            "generalized coefficient vector needs at least two entries".into(),
        ));
    }
    let n = eta_tilde.len() - 1;
    let mut eta = vec![0.0; n + 1];
    for j in 0..=n {
        let mut value = eta_tilde[j] / gen_legendre_scale(j);
        if j + 2 <= n {
            value -= eta_tilde[j + 2] / gen_legendre_scale(j + 2);
        }
        eta[j] = value;
    }
    Ok(eta)
}

fn gen_legendre_scale(j: usize) -> f64 {
    (4.0 * j as f64 + 6.0).sqrt()
}

fn legendre(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut curr = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * curr - kf * prev) / (kf + 1.0);
        prev = curr;
        curr = next;
    }
    curr
}

fn hermite(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut curr = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * curr - 2.0 * k as f64 * prev;
        prev = curr;
        curr = next;
    }
    curr
}

fn laguerre(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut curr = 1.0 - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * curr - kf * prev) / (kf + 1.0);
        prev = curr;
        curr = next;
    }
    curr
}

/// Index 0 is the constant 1; index `2j-1` is `sqrt(2) sin(2 pi j x)`;
/// index `2j` is `sqrt(2) cos(2 pi j x)`.
fn trigonometric(j: usize, x: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let freq = j.div_ceil(2) as f64;
    let arg = 2.0 * std::f64::consts::PI * freq * x;
    if j % 2 == 1 {
        std::f64::consts::SQRT_2 * arg.sin()
    } else {
        std::f64::consts::SQRT_2 * arg.cos()
    }
}

fn hermite_log_gamma(j: usize) -> f64 {
    let mut log_factorial = 0.0;
    for k in 2..=j {
        log_factorial += (k as f64).ln();
    }
    j as f64 * std::f64::consts::LN_2 + log_factorial + 0.5 * std::f64::consts::PI.ln()
}

/// `a_ij^(1)` columns for Legendre follow from `L_{k+1}' = L_{k-1}' + (2k+1) L_k`:
/// `a_ij^(1) = 2i+1` when `j - i` is odd, else 0. Higher orders compose the
/// first-order expansion with itself.
fn legendre_derivative_coeffs(j: usize, l: usize) -> Vec<f64> {
    let first_order = |j: usize| -> Vec<f64> {
        (0..j)
            .map(|i| if (j - i) % 2 == 1 { 2.0 * i as f64 + 1.0 } else { 0.0 })
            .collect()
    };
    let mut coeffs = first_order(j);
    for _ in 1..l {
        // differentiate the expansion: each L_i contributes its own column
        let mut next = vec![0.0; coeffs.len().saturating_sub(1)];
        for (i, c) in coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            for (r, a) in first_order(i).iter().enumerate() {
                next[r] += c * a;
            }
        }
        coeffs = next;
    }
    let mut row = vec![0.0; j];
    row[..coeffs.len()].copy_from_slice(&coeffs);
    row
}
