//! Free additive and multiplicative convolution of spectral measures.
//!
//! Addition uses additivity of `R(w) = λ(w) − 1/w`, where `λ` is the
//! functional inverse of the Cauchy transform: the sum satisfies
//! `λ₁(w) + λ₂(w) = λ(w) + 1/w`. Multiplication uses the inverse `λ(h)` of
//! `h(λ) = λG(λ)`, with `λ₁(h) λ₂(h) = λ(h) h/(h−1)`. Both laws are solved
//! pointwise in `z` for the pair `(λ₁, λ₂)` and the product transform is
//! read off and Stieltjes-inverted.
//!
//! For a Gaussian external field the additive law extends to `A ≠ 0` with
//! `λ(a) = σ²a + PV G_A(a)`.

mod continuation;
mod problems;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::SpectralMeasure;
use crate::par::Exec;
use crate::report::ReportDocument;
use crate::stieltjes::{
    density_from_samples, invert_cauchy, principal_value_transform, ContourSpec,
    TransformEvaluator, INVERSION_TOLERANCE,
};

use continuation::Pipeline;
use problems::{h_and_derivative, Add, Mul, Pastur};

/// Output grid size used when no contour is supplied.
pub const DEFAULT_GRID_POINTS: usize = 2000;
/// Relative margin added on both sides of the predicted support.
pub const DEFAULT_MARGIN: f64 = 0.1;

/// `R(w) = λ(w) − 1/w`.
pub fn r_transform(mu: &SpectralMeasure, w: Complex64) -> Result<Complex64> {
    Ok(invert_cauchy(mu, w)? - 1.0 / w)
}

/// R-transform bound to a measure.
#[derive(Debug, Clone, Copy)]
pub struct RTransformEvaluator<'a> {
    pub mu: &'a SpectralMeasure,
}

impl RTransformEvaluator<'_> {
    pub fn eval(&self, w: Complex64) -> Result<Complex64> {
        r_transform(self.mu, w)
    }
}

/// `h(λ) = λ G(λ)`.
pub fn h_function(mu: &SpectralMeasure, lam: Complex64) -> Result<Complex64> {
    Ok(lam * crate::stieltjes::cauchy_transform(mu, lam)?)
}

/// Functional inverse of [`h_function`] by damped Newton from `m₁/(h−1)`.
pub fn invert_h(mu: &SpectralMeasure, h: Complex64) -> Result<Complex64> {
    let m1 = mu.mean();
    if m1.abs() <= 1e-12 * mu.moment(2).sqrt() {
        return Err(Error::validation("invert_h needs a nonzero mean"));
    }
    let tol = INVERSION_TOLERANCE * h.norm().max(1.0);
    let eval = |lam: Complex64| h_and_derivative(mu, lam);
    let mut lam = m1 / (h - 1.0);
    let fail = |lam, residual, iterations| Error::InversionFailure {
        last: lam,
        residual,
        iterations,
    };
    let (mut hv, mut hp) = eval(lam).ok_or_else(|| fail(lam, f64::INFINITY, 0))?;
    let mut res = (hv - h).norm();
    for it in 0..100 {
        if res <= tol {
            return Ok(lam);
        }
        let step = (hv - h) / hp;
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..=20 {
            let cand = lam - step * t;
            if let Some((hc, hpc)) = eval(cand) {
                if (hc - h).norm() < res {
                    lam = cand;
                    hv = hc;
                    hp = hpc;
                    res = (hc - h).norm();
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            return if res <= 10.0 * tol { Ok(lam) } else { Err(fail(lam, res, it + 1)) };
        }
    }
    if res <= tol {
        Ok(lam)
    } else {
        Err(fail(lam, res, 100))
    }
}

/// `h` and its inverse bound to a measure.
#[derive(Debug, Clone, Copy)]
pub struct HTransformEvaluator<'a> {
    pub mu: &'a SpectralMeasure,
}

impl HTransformEvaluator<'_> {
    pub fn h(&self, lam: Complex64) -> Result<Complex64> {
        h_function(self.mu, lam)
    }

    pub fn inverse(&self, h: Complex64) -> Result<Complex64> {
        invert_h(self.mu, h)
    }
}

/// Cauchy transform of `μ₁ ⊞ μ₂`, evaluated through the addition law.
pub struct FreeSum<'a>(Pipeline<Add<'a>>);

impl<'a> FreeSum<'a> {
    pub fn new(a: &'a SpectralMeasure, b: &'a SpectralMeasure) -> Self {
        FreeSum(Pipeline::new(Add::new(a, b)))
    }
}

/// Cauchy transform of `μ ⊞ semicircle(σ)` from Pastur's equation.
pub struct GaussianSum<'a>(Pipeline<Pastur<'a>>);

impl<'a> GaussianSum<'a> {
    pub fn new(mu: &'a SpectralMeasure, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::validation(format!("sigma must be positive, got {sigma}")));
        }
        Ok(GaussianSum(Pipeline::new(Pastur::new(mu, sigma))))
    }
}

/// Cauchy transform of `μ₁ ⊠ μ₂`, evaluated through the multiplication law.
pub struct FreeProduct<'a>(Pipeline<Mul<'a>>);

impl<'a> FreeProduct<'a> {
    pub fn new(a: &'a SpectralMeasure, b: &'a SpectralMeasure) -> Result<Self> {
        check_multiplicable(a, b)?;
        Ok(FreeProduct(Pipeline::new(Mul::new(a, b))))
    }
}

macro_rules! delegate_evaluator {
    ($t:ident) => {
        impl TransformEvaluator for $t<'_> {
            fn cauchy_and_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
                self.0.cauchy_and_derivative(z)
            }

            fn support_hint(&self) -> (f64, f64) {
                self.0.support_hint()
            }

            fn sample_contour(&self, contour: &ContourSpec, exec: Exec) -> Result<Vec<Vec<Complex64>>> {
                self.0.sample_contour(contour, exec)
            }
        }
    };
}

delegate_evaluator!(FreeSum);
delegate_evaluator!(GaussianSum);
delegate_evaluator!(FreeProduct);

fn check_multiplicable(a: &SpectralMeasure, b: &SpectralMeasure) -> Result<()> {
    for (name, mu) in [("first", a), ("second", b)] {
        if mu.support().0 < 0.0 {
            return Err(Error::validation(format!(
                "free_multiply needs nonnegative supports; {name} operand reaches {}",
                mu.support().0
            )));
        }
    }
    let zero_heavy = |mu: &SpectralMeasure| mu.atom_weight_at(0.0) > 1.0 - 1e-6;
    if zero_heavy(a) || zero_heavy(b) {
        return Err(Error::validation("free_multiply operand is concentrated at 0"));
    }
    Ok(())
}

/// Default output contour for `μ₁ ⊞ μ₂`: the Minkowski sum of the supports
/// with a 10% margin.
pub fn add_contour(a: &SpectralMeasure, b: &SpectralMeasure) -> Result<ContourSpec> {
    let (a0, a1) = a.support();
    let (b0, b1) = b.support();
    ContourSpec::with_margin(a0 + b0, a1 + b1, DEFAULT_MARGIN, DEFAULT_GRID_POINTS)
}

/// Default output contour for `μ ⊞ semicircle(σ)`.
pub fn pastur_contour(mu: &SpectralMeasure, sigma: f64) -> Result<ContourSpec> {
    let (lo, hi) = mu.support();
    ContourSpec::with_margin(lo - 2.0 * sigma, hi + 2.0 * sigma, DEFAULT_MARGIN, DEFAULT_GRID_POINTS)
}

/// Default output contour for `μ₁ ⊠ μ₂`: the hull of products of the
/// supports with a 10% margin. When the hull starts at 0 the product
/// density is typically singular there, so the grid is graded toward 0.
pub fn mul_contour(a: &SpectralMeasure, b: &SpectralMeasure) -> Result<ContourSpec> {
    let (a0, a1) = a.support();
    let (b0, b1) = b.support();
    let contour = ContourSpec::with_margin(a0 * b0, a1 * b1, DEFAULT_MARGIN, DEFAULT_GRID_POINTS)?;
    if a0 * b0 <= 0.0 {
        contour.with_edges(&[0.0])
    } else {
        Ok(contour)
    }
}

fn invert<E: TransformEvaluator>(ev: &E, contour: &ContourSpec, exec: Exec) -> Result<SpectralMeasure> {
    contour.validate()?;
    let samples = ev.sample_contour(contour, exec)?;
    density_from_samples(ev, contour, &samples, exec)
}

/// `μ₁ ⊞ μ₂` on the given contour.
pub fn free_add(a: &SpectralMeasure, b: &SpectralMeasure, contour: &ContourSpec) -> Result<SpectralMeasure> {
    free_add_with(a, b, contour, Exec::default())
}

pub fn free_add_with(a: &SpectralMeasure, b: &SpectralMeasure, contour: &ContourSpec, exec: Exec) -> Result<SpectralMeasure> {
    invert(&FreeSum::new(a, b), contour, exec)
}

/// `μ ⊞ semicircle(σ)` from Pastur's fixed point `ω = G_μ(z − σ²ω)`.
pub fn pastur_add_gaussian(mu: &SpectralMeasure, sigma: f64, contour: &ContourSpec) -> Result<SpectralMeasure> {
    pastur_add_gaussian_with(mu, sigma, contour, Exec::default())
}

pub fn pastur_add_gaussian_with(
    mu: &SpectralMeasure,
    sigma: f64,
    contour: &ContourSpec,
    exec: Exec,
) -> Result<SpectralMeasure> {
    invert(&GaussianSum::new(mu, sigma)?, contour, exec)
}

/// `μ₁ ⊠ μ₂` on the given contour; both supports must be nonnegative.
pub fn free_multiply(a: &SpectralMeasure, b: &SpectralMeasure, contour: &ContourSpec) -> Result<SpectralMeasure> {
    free_multiply_with(a, b, contour, Exec::default())
}

pub fn free_multiply_with(
    a: &SpectralMeasure,
    b: &SpectralMeasure,
    contour: &ContourSpec,
    exec: Exec,
) -> Result<SpectralMeasure> {
    invert(&FreeProduct::new(a, b)?, contour, exec)
}

/// Moments `m₁..m_order` of the measure behind a transform, from the
/// Laurent coefficients of `G` at infinity: `m_n = (1/2πi) ∮ zⁿ G(z) dz`
/// on a circle enclosing the support. The trapezoid rule on the circle
/// converges geometrically; nodes are rotated off the real axis.
pub fn transform_moments<E: TransformEvaluator + ?Sized>(ev: &E, order: usize, exec: Exec) -> Result<Vec<f64>> {
    let (lo, hi) = ev.support_hint();
    let center = 0.5 * (lo + hi);
    let radius = 0.5 * (hi - lo) * 1.5 + 0.5;
    let nodes = 256;
    let values = exec.try_map_indexed(nodes, |k| {
        let theta = std::f64::consts::TAU * (k as f64 + 0.5) / nodes as f64;
        let e = Complex64::from_polar(1.0, theta);
        ev.cauchy(center + e * radius).map(|g| (e, g))
    })?;
    // Moments about the center, then binomially shifted to the origin.
    let central: Vec<f64> = (0..=order)
        .map(|n| {
            let s: Complex64 = values
                .iter()
                .map(|(e, g)| g * e.powu(n as u32 + 1) * radius.powi(n as i32 + 1))
                .sum();
            s.re / nodes as f64
        })
        .collect();
    Ok((1..=order)
        .map(|n| {
            let mut total = 0.0;
            let mut binom = 1.0;
            for k in 0..=n {
                total += binom * central[k] * center.powi((n - k) as i32);
                binom = binom * (n - k) as f64 / (k + 1) as f64;
            }
            total
        })
        .collect())
}

/// Fixed Hermitian source `A` coupled as `exp(N tr MA)`, described by its
/// spectral measure. `A = 0` is `δ₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalFieldSpec {
    pub measure_a: SpectralMeasure,
}

impl ExternalFieldSpec {
    pub fn new(measure_a: SpectralMeasure) -> Self {
        ExternalFieldSpec { measure_a }
    }

    pub fn zero() -> Self {
        Self::new(SpectralMeasure::dirac(0.0))
    }

    /// Eigenvalues of an `n × n` realization: midpoint quantiles.
    pub fn eigenvalues(&self, n: usize) -> Vec<f64> {
        self.measure_a.midpoint_quantiles(n)
    }
}

/// `λ(a) = σ²a + PV G_A(a)` for the Gaussian action in the field `A`.
pub fn external_field_lambda_gaussian(sigma: f64, field: &ExternalFieldSpec, a: f64) -> Result<f64> {
    if !(sigma >= 0.0) || !sigma.is_finite() || !a.is_finite() {
        return Err(Error::validation(format!("bad external-field arguments sigma={sigma}, a={a}")));
    }
    Ok(sigma * sigma * a + principal_value_transform(&field.measure_a, a)?)
}

/// Residuals of `λ₁(a) + λ₂(a) = λ(a) + PV G_A(a)` for Gaussians of
/// variances `σ₁²`, `σ₂²` whose sum has variance `σ₁² + σ₂²`.
pub fn verify_generalized_addition_gaussian(
    sigma1: f64,
    sigma2: f64,
    field: &ExternalFieldSpec,
    probes: &[f64],
) -> Result<ReportDocument> {
    let sigma_sum = (sigma1 * sigma1 + sigma2 * sigma2).sqrt();
    let mut report = ReportDocument::new("generalized_addition_gaussian").with_inputs(serde_json::json!({
        "sigma1": sigma1,
        "sigma2": sigma2,
        "probes": probes,
    }));
    let mut max_residual: f64 = 0.0;
    for &a in probes {
        let l1 = external_field_lambda_gaussian(sigma1, field, a)?;
        let l2 = external_field_lambda_gaussian(sigma2, field, a)?;
        let l = external_field_lambda_gaussian(sigma_sum, field, a)?;
        let pv = principal_value_transform(&field.measure_a, a)?;
        let r = (l1 + l2 - l - pv).abs();
        max_residual = max_residual.max(r);
    }
    report.metric("probes", probes.len() as f64);
    report.at_most("max_residual", max_residual, 1e-12);
    Ok(report)
}

/// Herglotz sign and `1/z` decay of an evaluator at sample points.
pub fn herglotz_violations<E: TransformEvaluator + ?Sized>(ev: &E, probes: &[Complex64]) -> usize {
    probes
        .iter()
        .filter(|z| z.im > 0.0)
        .filter(|z| ev.cauchy(**z).map_or(true, |g| !(g.im < 0.0)))
        .count()
}

