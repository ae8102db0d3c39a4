//! Weighted densities: coefficient-backed expansions `g(x) = sum eta_j q_j(x)`
//! and the closed-form targets of the experiments, together with projection,
//! normalization, the shift transform, and sieve-set membership.
//!
//! A density here is always relative to the reference measure `w(x) dx`, so
//! "normalized" means `int g w dx = 1`, which by orthogonality reduces to
//! `eta_0 * gamma_0 = 1` for expansions.

use crate::basis::{BasisFamily, GammaTildeMode};
use crate::quadrature::{self, Weight, DIVERGENCE_ORDER, INNER_PRODUCT_ORDER};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tolerance on `eta_0 * gamma_0 - 1` below which a vector counts as
/// normalized.
pub const NORMALIZED_TOL: f64 = 1e-10;

/// A finite truncation of the coefficient sequence, tied to a family.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    family: BasisFamily,
    values: Vec<f64>,
    normalized: bool,
}

impl CoefficientVector {
    pub fn new(family: BasisFamily, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("coefficient vector must be nonempty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite coefficient {bad}")));
        }
        let normalized = (values[0] * family.gamma0() - 1.0).abs() <= NORMALIZED_TOL;
        Ok(CoefficientVector {
            family,
            values,
            normalized,
        })
    }

    /// The normalized constant expansion `eta = (1/gamma_0, 0, ..., 0)`.
    pub fn uniform(family: BasisFamily, truncation: usize) -> Self {
        let mut values = vec![0.0; truncation + 1];
        values[0] = 1.0 / family.gamma0();
        CoefficientVector {
            family,
            values,
            normalized: true,
        }
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Truncation level `N` (highest index present).
    pub fn truncation(&self) -> usize {
        self.values.len() - 1
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `sum_j eta_j q_j(x)`; may be negative for a raw expansion.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !self.family.contains(x) {
            return Err(Error::Input(format!(
                "point {x} outside domain of {}",
                self.family
            )));
        }
        Ok(self.evaluate_unchecked(x))
    }

    pub(crate) fn evaluate_unchecked(&self, x: f64) -> f64 {
        let basis = self.family.eval_all_unchecked(self.truncation(), x);
        self.values
            .iter()
            .zip(&basis)
            .map(|(eta, q)| eta * q)
            .sum()
    }

    /// Divide by `Z = eta_0 * gamma_0` so the expansion integrates to one;
    /// returns the normalized vector and `Z`.
    pub fn normalize(&self) -> Result<(Self, f64)> {
        let z = self.values[0] * self.family.gamma0();
        if z.abs() < 1e-12 {
            return Err(Error::DegenerateNormalization { z: z.abs() });
        }
        let values: Vec<f64> = self.values.iter().map(|v| v / z).collect();
        Ok((
            CoefficientVector {
                family: self.family,
                values,
                normalized: true,
            },
            z,
        ))
    }

    /// Sieve-set statistic `sum_j eta_j^2 gamma_tilde_j` (with
    /// `gamma_tilde_0 = gamma_0`) and whether it stays within the bound
    /// `n^(1/(2p+1))`.
    pub fn sieve_membership(
        &self,
        n: usize,
        p: usize,
        mode: GammaTildeMode,
    ) -> Result<(bool, f64)> {
        if n == 0 {
            return Err(Error::Input("sample size must be >= 1".into()));
        }
        let mut statistic = self.values[0] * self.values[0] * self.family.gamma0();
        for (j, eta) in self.values.iter().enumerate().skip(1) {
            if *eta == 0.0 {
                continue;
            }
            statistic += eta * eta * self.family.gamma_tilde(j, p, mode)?;
        }
        let bound = (n as f64).powf(1.0 / (2.0 * p as f64 + 1.0));
        Ok((statistic <= bound, statistic))
    }

    /// One CSV record: family tag, truncation, then the values with 17
    /// significant digits (lossless binary64 round-trip).
    pub fn to_csv_record(&self) -> String {
        let mut out = format!("{},{}", self.family, self.truncation());
        for v in &self.values {
            out.push(',');
            out.push_str(&format_f64(*v));
        }
        out
    }

    pub fn from_csv_record(line: &str) -> Result<Self> {
        let mut parts = line.trim().split(',');
        let family: BasisFamily = parts
            .next()
            .ok_or_else(|| Error::Input("empty coefficient record".into()))?
            .parse()?;
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Input("missing truncation field".into()))?;
        let values: Vec<f64> = parts
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Input(format!("bad coefficient `{s}`")))
            })
            .collect::<Result<_>>()?;
        if values.len() != n + 1 {
            return Err(Error::Input(format!(
                "expected {} values, found {}",
                n + 1,
                values.len()
            )));
        }
        CoefficientVector::new(family, values)
    }
}

/// 17 significant digits: enough to reproduce any binary64 exactly.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl Serialize for CoefficientVector {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Record<'a> {
            family: BasisFamily,
            truncation: usize,
            values: &'a [f64],
        }
        Record {
            family: self.family,
            truncation: self.truncation(),
            values: &self.values,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CoefficientVector {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Record {
            family: BasisFamily,
            truncation: usize,
            values: Vec<f64>,
        }
        let record = Record::deserialize(deserializer)?;
        if record.values.len() != record.truncation + 1 {
            return Err(serde::de::Error::custom("truncation/value length mismatch"));
        }
        CoefficientVector::new(record.family, record.values).map_err(serde::de::Error::custom)
    }
}

/// Closed-form densities relative to their family's weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ClosedForm {
    /// `c0 (exp(sin(pi (x+1)/2)) - 1)` on `[-1, 1]` against `w = 1`;
    /// vanishes at both endpoints.
    Exp1Sine { c0: f64 },
    /// `2 exp(-x)` on `R+` against `w = exp(-x)`.
    SuppExponential,
    /// `sqrt(2/pi) exp(-x^2)` on `R` against `w = exp(-x^2)`.
    SuppGaussian,
    /// A constant level (the uniform density when `value = 1/gamma_0`).
    Constant { value: f64 },
}

impl ClosedForm {
    pub fn family(self) -> BasisFamily {
        match self {
            ClosedForm::Exp1Sine { .. } => BasisFamily::Legendre,
            ClosedForm::SuppExponential => BasisFamily::Laguerre,
            ClosedForm::SuppGaussian => BasisFamily::Hermite,
            ClosedForm::Constant { .. } => BasisFamily::Legendre,
        }
    }

    pub fn evaluate(self, x: f64) -> f64 {
        match self {
            ClosedForm::Exp1Sine { c0 } => {
                c0 * (((x + 1.0) * 0.5 * std::f64::consts::PI).sin().exp() - 1.0)
            }
            ClosedForm::SuppExponential => 2.0 * (-x).exp(),
            ClosedForm::SuppGaussian => (2.0 / std::f64::consts::PI).sqrt() * (-x * x).exp(),
            ClosedForm::Constant { value } => value,
        }
    }
}

/// Shift transform parameters: `g -> a_n + g (1 - a_n gamma_0)` keeps the
/// mass at one while bounding the density below by `a_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftParams {
    pub a_n: f64,
    pub gamma0: f64,
}

impl ShiftParams {
    pub fn new(a_n: f64, gamma0: f64) -> Result<Self> {
        if !(gamma0 > 0.0) {
            return Err(Error::Input(format!(
                "gamma_0 must be positive, got {gamma0}"
            )));
        }
        if !(0.0..1.0 / gamma0).contains(&a_n) {
            return Err(Error::Input(format!(
                "shift level {a_n} outside [0, 1/gamma_0 = {})",
                1.0 / gamma0
            )));
        }
        Ok(ShiftParams { a_n, gamma0 })
    }
}

/// A density against `w(x) dx`, either coefficient-backed or closed-form,
/// optionally composed with the shift transform.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDensity {
    backing: Backing,
    shift: Option<ShiftParams>,
}

#[derive(Debug, Clone, PartialEq)]
enum Backing {
    Coefficients(CoefficientVector),
    Closed { family: BasisFamily, form: ClosedForm },
}

impl WeightedDensity {
    pub fn from_coefficients(eta: CoefficientVector) -> Self {
        WeightedDensity {
            backing: Backing::Coefficients(eta),
            shift: None,
        }
    }

    pub fn from_closed_form(form: ClosedForm) -> Self {
        WeightedDensity {
            backing: Backing::Closed {
                family: form.family(),
                form,
            },
            shift: None,
        }
    }

    /// A constant density on the given family's domain; `value = 1/gamma_0`
    /// gives the uniform density.
    pub fn constant(family: BasisFamily, value: f64) -> Self {
        WeightedDensity {
            backing: Backing::Closed {
                family,
                form: ClosedForm::Constant { value },
            },
            shift: None,
        }
    }

    pub fn family(&self) -> BasisFamily {
        match &self.backing {
            Backing::Coefficients(eta) => eta.family(),
            Backing::Closed { family, .. } => *family,
        }
    }

    pub fn weight_tag(&self) -> Weight {
        self.family().weight_tag()
    }

    /// Compose with the shift transform.
    pub fn shifted(&self, shift: ShiftParams) -> Result<Self> {
        let gamma0 = self.family().gamma0();
        if (shift.gamma0 - gamma0).abs() > 1e-12 {
            return Err(Error::Input(format!(
                "shift gamma_0 {} does not match family gamma_0 {gamma0}",
                shift.gamma0
            )));
        }
        Ok(WeightedDensity {
            backing: self.backing.clone(),
            shift: Some(shift),
        })
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !self.family().contains(x) {
            return Err(Error::Input(format!(
                "point {x} outside domain of {}",
                self.family()
            )));
        }
        Ok(self.evaluate_unchecked(x))
    }

    pub(crate) fn evaluate_unchecked(&self, x: f64) -> f64 {
        let raw = match &self.backing {
            Backing::Coefficients(eta) => eta.evaluate_unchecked(x),
            Backing::Closed { form, .. } => form.evaluate(x),
        };
        match self.shift {
            Some(s) => shift_density_value(raw, s),
            None => raw,
        }
    }

    /// `int g w dx` by quadrature.
    pub fn mass(&self) -> Result<f64> {
        let rule = quadrature::gauss_rule(self.weight_tag(), DIVERGENCE_ORDER)?;
        quadrature::integrate(|x| self.evaluate_unchecked(x), &rule)
    }
}

/// Orthogonal projection `theta_j = (1/gamma_j) int g q_j w dx` for
/// `j = 0..=truncation`.
pub fn project(
    g: &WeightedDensity,
    family: BasisFamily,
    truncation: usize,
) -> Result<CoefficientVector> {
    if !(family.is_orthogonal_polynomial() || family == BasisFamily::Trigonometric) {
        return Err(Error::Capability(format!(
            "projection requires an orthogonal system, not {family}"
        )));
    }
    if family.weight_tag() != g.weight_tag() {
        return Err(Error::Input(format!(
            "cannot project a {} density onto {family}",
            g.family()
        )));
    }
    // exact for coefficient backings; ample headroom for smooth closed forms
    let order = match &g.backing {
        Backing::Coefficients(eta) => {
            INNER_PRODUCT_ORDER.max((eta.truncation() + truncation) / 2 + 2)
        }
        Backing::Closed { .. } => DIVERGENCE_ORDER,
    };
    let rule = quadrature::gauss_rule(family.weight_tag(), order)?;
    let mut values = Vec::with_capacity(truncation + 1);
    for j in 0..=truncation {
        let inner = quadrature::integrate(
            |x| g.evaluate_unchecked(x) * family.eval_unchecked(j, x),
            &rule,
        )?;
        values.push(inner / family.gamma(j)?);
    }
    CoefficientVector::new(family, values)
}

/// Shifted coefficients (the coefficient-space form of the shift transform):
/// `eta_0' = a_n + eta_0 (1 - a_n gamma_0)`, `eta_j' = eta_j (1 - a_n gamma_0)`.
pub fn shift_coefficients(
    eta: &CoefficientVector,
    shift: ShiftParams,
) -> Result<CoefficientVector> {
    if !eta.is_normalized() {
        return Err(Error::Input(
            "shift_coefficients expects a normalized vector".into(),
        ));
    }
    let gamma0 = eta.family().gamma0();
    if (shift.gamma0 - gamma0).abs() > 1e-12 {
        return Err(Error::Input(format!(
            "shift gamma_0 {} does not match family gamma_0 {gamma0}",
            shift.gamma0
        )));
    }
    let damp = 1.0 - shift.a_n * shift.gamma0;
    let values: Vec<f64> = eta
        .values()
        .iter()
        .enumerate()
        .map(|(j, v)| if j == 0 { shift.a_n + v * damp } else { v * damp })
        .collect();
    Ok(CoefficientVector {
        family: eta.family(),
        values,
        normalized: true,
    })
}

/// Pointwise shift `a_n + value (1 - a_n gamma_0)`; the output is at least
/// `a_n` whenever `value >= 0`.
pub fn shift_density_value(value: f64, shift: ShiftParams) -> f64 {
    shift.a_n + value * (1.0 - shift.a_n * shift.gamma0)
}

/// Largest admissible shift level `K^4 eps^4 / ((16 + K^4 eps^4) gamma_0)`
/// keeping the shifted and unshifted Hellinger distances comparable.
pub fn max_shift_level(k: f64, eps_n: f64, gamma0: f64) -> f64 {
    let k4e4 = k.powi(4) * eps_n.powi(4);
    k4e4 / ((16.0 + k4e4) * gamma0)
}
