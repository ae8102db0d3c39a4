//! Seeded i.i.d. observations from the reference true densities.
//!
//! Each target is a `g_0` relative to its family's weight, so draws follow
//! the Lebesgue density `g_0(x) w(x)`. The exponential and Gaussian targets
//! invert their CDFs exactly; the sine-bump target and coefficient-backed
//! densities go through a cumulative-trapezoid CDF on a dense grid with
//! monotone linear inversion.

use crate::density::{ClosedForm, CoefficientVector, WeightedDensity};
use crate::quadrature::{self, DIVERGENCE_ORDER};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Grid resolution for the numeric CDF.
const CDF_GRID: usize = 8192;
/// Grid resolution for the nonnegativity/mass validation sweep.
const VALIDATION_GRID: usize = 2048;

/// Which true density to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrueDensityKind {
    /// `c_0 (exp(sin(pi (x+1)/2)) - 1)` on `[-1, 1]` (vanishing boundary).
    Exp1Sine,
    /// `2 exp(-x)` against `w = exp(-x)`: draws are Exp(2).
    SuppExponential,
    /// `sqrt(2/pi) exp(-x^2)` against `w = exp(-x^2)`: draws are N(0, 1/4).
    SuppGaussian,
    /// An arbitrary coefficient-backed density (numeric inversion).
    CoefficientBacked,
}

/// A validated sampling target: the density, its normalizer, and (when
/// needed) the numeric CDF grid.
#[derive(Debug, Clone)]
pub struct TrueDensitySpec {
    kind: TrueDensityKind,
    density: WeightedDensity,
    /// Normalizer `c_0` for the sine bump, 1.0 for the fixed closed forms.
    c0: f64,
    cdf: Option<NumericCdf>,
}

impl TrueDensitySpec {
    /// Build one of the fixed closed-form targets.
    pub fn build(kind: TrueDensityKind) -> Result<Self> {
        match kind {
            TrueDensityKind::Exp1Sine => {
                let unnormalized =
                    |x: f64| (((x + 1.0) * 0.5 * std::f64::consts::PI).sin().exp()) - 1.0;
                let rule =
                    quadrature::gauss_rule(crate::quadrature::Weight::Unit, DIVERGENCE_ORDER)?;
                let mass = quadrature::integrate(unnormalized, &rule)?;
                if !(mass > 0.0) {
                    return Err(Error::Numeric(format!(
                        "sine-bump normalizer is nonpositive ({mass}); check the density form"
                    )));
                }
                let c0 = 1.0 / mass;
                let density = WeightedDensity::from_closed_form(ClosedForm::Exp1Sine { c0 });
                let spec = TrueDensitySpec {
                    kind,
                    cdf: Some(NumericCdf::build(&density)?),
                    density,
                    c0,
                };
                spec.validate()?;
                Ok(spec)
            }
            TrueDensityKind::SuppExponential => {
                let density = WeightedDensity::from_closed_form(ClosedForm::SuppExponential);
                let spec = TrueDensitySpec {
                    kind,
                    density,
                    c0: 1.0,
                    cdf: None,
                };
                spec.validate()?;
                Ok(spec)
            }
            TrueDensityKind::SuppGaussian => {
                let density = WeightedDensity::from_closed_form(ClosedForm::SuppGaussian);
                let spec = TrueDensitySpec {
                    kind,
                    density,
                    c0: 1.0,
                    cdf: None,
                };
                spec.validate()?;
                Ok(spec)
            }
            TrueDensityKind::CoefficientBacked => Err(Error::Input(
                "coefficient-backed targets need from_coefficients".into(),
            )),
        }
    }

    /// A coefficient-backed target (must be normalized and nonnegative).
    pub fn from_coefficients(eta: CoefficientVector) -> Result<Self> {
        if !eta.is_normalized() {
            return Err(Error::Input(
                "coefficient-backed target must be normalized".into(),
            ));
        }
        let density = WeightedDensity::from_coefficients(eta);
        let spec = TrueDensitySpec {
            kind: TrueDensityKind::CoefficientBacked,
            cdf: Some(NumericCdf::build(&density)?),
            density,
            c0: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = grid_range(&self.density);
        for k in 0..VALIDATION_GRID {
            let x = lo + (hi - lo) * k as f64 / (VALIDATION_GRID - 1) as f64;
            let v = self.density.evaluate_unchecked(x);
            if v < -1e-12 {
                return Err(Error::Numeric(format!(
                    "target density dips negative at {x}: {v}"
                )));
            }
        }
        let mass = self.density.mass()?;
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::Numeric(format!(
                "target density mass {mass} deviates from 1"
            )));
        }
        Ok(())
    }

    pub fn kind(&self) -> TrueDensityKind {
        self.kind
    }

    pub fn density(&self) -> &WeightedDensity {
        &self.density
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// CDF of the observation law `g_0 w` (exact where available, numeric
    /// otherwise).
    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            TrueDensityKind::SuppExponential => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-2.0 * x).exp()
                }
            }
            TrueDensityKind::SuppGaussian => standard_normal_cdf(2.0 * x),
            _ => self.cdf.as_ref().expect("numeric cdf present").evaluate(x),
        }
    }

    /// Draw `n` observations; identical `(spec, n, seed)` give identical
    /// output.
    pub fn draw(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::Input("draw count must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        match self.kind {
            TrueDensityKind::SuppExponential => {
                for _ in 0..n {
                    let u: f64 = rng.gen();
                    out.push(-0.5 * (1.0 - u).ln());
                }
            }
            TrueDensityKind::SuppGaussian => {
                for _ in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(0.5 * z);
                }
            }
            _ => {
                let cdf = self.cdf.as_ref().expect("numeric cdf present");
                for _ in 0..n {
                    let u: f64 = rng.gen();
                    out.push(cdf.invert(u));
                }
            }
        }
        Ok(out)
    }
}

fn grid_range(density: &WeightedDensity) -> (f64, f64) {
    let (lo, hi) = density.family().domain();
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => (lo, hi),
        // cover weight mass >= 1 - 1e-12
        _ => match density.weight_tag() {
            crate::quadrature::Weight::Gaussian => (-6.0, 6.0),
            crate::quadrature::Weight::Exponential => (0.0, 30.0),
            _ => (lo, hi),
        },
    }
}

/// Cumulative trapezoid of `g w` with a monotone linear inverse.
#[derive(Debug, Clone)]
struct NumericCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl NumericCdf {
    fn build(density: &WeightedDensity) -> Result<Self> {
        let (lo, hi) = grid_range(density);
        let weight = density.weight_tag();
        let h = (hi - lo) / (CDF_GRID - 1) as f64;
        let mut xs = Vec::with_capacity(CDF_GRID);
        let mut pdf = Vec::with_capacity(CDF_GRID);
        for k in 0..CDF_GRID {
            let x = lo + h * k as f64;
            xs.push(x);
            pdf.push(density.evaluate_unchecked(x).max(0.0) * weight.density(x));
        }
        let mut cdf = Vec::with_capacity(CDF_GRID);
        cdf.push(0.0);
        let mut acc = 0.0;
        for k in 1..CDF_GRID {
            acc += 0.5 * h * (pdf[k - 1] + pdf[k]);
            cdf.push(acc);
        }
        let total = *cdf.last().unwrap();
        if !(total > 0.0) {
            return Err(Error::Numeric("cdf grid has no mass".into()));
        }
        for v in cdf.iter_mut() {
            *v /= total;
        }
        Ok(NumericCdf { xs, cdf })
    }

    fn evaluate(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= *self.xs.last().unwrap() {
            return 1.0;
        }
        let idx = match self
            .xs
            .binary_search_by(|v| v.partial_cmp(&x).expect("finite grid"))
        {
            Ok(i) => return self.cdf[i],
            Err(i) => i,
        };
        let (x0, x1) = (self.xs[idx - 1], self.xs[idx]);
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        c0 + (c1 - c0) * (x - x0) / (x1 - x0)
    }

    fn invert(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        // first index with cdf >= u
        let idx = self.cdf.partition_point(|c| *c < u);
        if idx == 0 {
            return self.xs[0];
        }
        if idx >= self.cdf.len() {
            return *self.xs.last().unwrap();
        }
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        let (x0, x1) = (self.xs[idx - 1], self.xs[idx]);
        if c1 <= c0 {
            return x0;
        }
        x0 + (x1 - x0) * (u - c0) / (c1 - c0)
    }
}

fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc_approx(-z / std::f64::consts::SQRT_2)
}

/// Complementary error function, |error| < 1.2e-7 (Numerical Recipes 6.2).
fn erfc_approx(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Write observations as a single-column CSV (17 significant digits).
pub fn observations_to_csv(data: &[f64]) -> String {
    let mut out = String::from("y\n");
    for v in data {
        out.push_str(&crate::density::format_f64(*v));
        out.push('\n');
    }
    out
}

/// Read observations from a single-column CSV (header optional).
pub fn observations_from_csv(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.parse::<f64>().is_err()) {
            continue;
        }
        out.push(
            line.parse::<f64>()
                .map_err(|_| Error::Input(format!("line {}: bad observation `{line}`", lineno + 1)))?,
        );
    }
    if out.is_empty() {
        return Err(Error::Input("no observations found".into()));
    }
    Ok(out)
}
