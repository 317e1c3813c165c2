//! The three subordination systems behind ⊞, Gaussian addition and ⊠.

use num_complex::Complex64;

use super::continuation::{Pair, Subordination, System};
use crate::measure::SpectralMeasure;
use crate::stieltjes::cauchy_and_derivative;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn g(mu: &SpectralMeasure, z: Complex64) -> Option<(Complex64, Complex64)> {
    cauchy_and_derivative(mu, z)
        .ok()
        .filter(|(g, gp)| g.is_finite() && gp.is_finite())
}

/// Upper half-plane test with slack for rounding at tiny heights.
fn above(w: Complex64, floor: f64) -> bool {
    w.im >= floor - 1e-12 * (1.0 + w.norm())
}

/// `μ₁ ⊞ μ₂` through `λ₁(w) + λ₂(w) = z + 1/w`, `w = G₁(λ₁) = G₂(λ₂)`.
///
/// Unknowns are `u = (λ₁, λ₂)`:
///   `F₀ = G₁(λ₁) − G₂(λ₂)`, `F₁ = G₁(λ₁)(λ₁ + λ₂ − z) − 1`.
/// The second equation is the law multiplied through by `w`, which keeps
/// it well scaled where `G` of the sum vanishes inside a gap.
pub(crate) struct Add<'a> {
    pub a: &'a SpectralMeasure,
    pub b: &'a SpectralMeasure,
    pub mean_a: f64,
    pub mean_b: f64,
}

impl<'a> Add<'a> {
    pub fn new(a: &'a SpectralMeasure, b: &'a SpectralMeasure) -> Self {
        Add {
            a,
            b,
            mean_a: a.mean(),
            mean_b: b.mean(),
        }
    }
}

impl Subordination for Add<'_> {
    const STAGE: &'static str = "free_add";

    fn system(&self, z: Complex64, u: Pair) -> Option<System> {
        let (g1, g1p) = g(self.a, u[0])?;
        let (g2, g2p) = g(self.b, u[1])?;
        let s = u[0] + u[1] - z;
        let f = [g1 - g2, g1 * s - 1.0];
        let j = [[g1p, -g2p], [g1p * s + g1, g1]];
        let w = [g1.norm() + g2.norm(), g1.norm() * (u[0].norm() + u[1].norm() + z.norm()) + 1.0];
        Some((f, j, w))
    }

    fn dz(&self, _z: Complex64, u: Pair) -> Option<Pair> {
        let (g1, _) = g(self.a, u[0])?;
        Some([ZERO, -g1])
    }

    fn seed(&self, z: Complex64) -> Pair {
        [z - self.mean_b, z - self.mean_a]
    }

    fn output(&self, _z: Complex64, u: Pair) -> Option<(Complex64, Pair, Complex64)> {
        let (g1, g1p) = g(self.a, u[0])?;
        Some((g1, [g1p, ZERO], ZERO))
    }

    fn admissible(&self, z: Complex64, u: Pair) -> bool {
        // Subordination functions satisfy Im λᵢ ≥ Im z.
        let floor = z.im * (1.0 - 1e-6);
        above(u[0], floor) && above(u[1], floor) && g(self.a, u[0]).is_some_and(|(w, _)| w.im < 0.0)
    }

    fn support_hint(&self) -> (f64, f64) {
        let (a0, a1) = self.a.support();
        let (b0, b1) = self.b.support();
        (a0 + b0, a1 + b1)
    }
}

/// `μ ⊞ semicircle(σ)` through Pastur's equation `ω = G_μ(z − σ²ω)`.
pub(crate) struct Pastur<'a> {
    pub mu: &'a SpectralMeasure,
    pub s2: f64,
    pub mean: f64,
}

impl<'a> Pastur<'a> {
    pub fn new(mu: &'a SpectralMeasure, sigma: f64) -> Self {
        Pastur {
            mu,
            s2: sigma * sigma,
            mean: mu.mean(),
        }
    }
}

impl Subordination for Pastur<'_> {
    const STAGE: &'static str = "pastur_add_gaussian";

    fn system(&self, z: Complex64, u: Pair) -> Option<System> {
        let (gm, gmp) = g(self.mu, z - u[0] * self.s2)?;
        let f = [u[0] - gm, u[1]];
        let j = [[ONE + gmp * self.s2, ZERO], [ZERO, ONE]];
        Some((f, j, [u[0].norm() + gm.norm(), 0.0]))
    }

    fn dz(&self, z: Complex64, u: Pair) -> Option<Pair> {
        let (_, gmp) = g(self.mu, z - u[0] * self.s2)?;
        Some([-gmp, ZERO])
    }

    fn seed(&self, z: Complex64) -> Pair {
        [1.0 / (z - self.mean), ZERO]
    }

    fn output(&self, _z: Complex64, u: Pair) -> Option<(Complex64, Pair, Complex64)> {
        Some((u[0], [ONE, ZERO], ZERO))
    }

    fn admissible(&self, z: Complex64, u: Pair) -> bool {
        u[0].im < 0.0 && above(z - u[0] * self.s2, z.im * (1.0 - 1e-6))
    }

    fn support_hint(&self) -> (f64, f64) {
        let (lo, hi) = self.mu.support();
        let r = 2.0 * self.s2.sqrt();
        (lo - r, hi + r)
    }
}

/// `h(λ) = λ G(λ)` and `h'(λ)`.
pub(crate) fn h_and_derivative(mu: &SpectralMeasure, lam: Complex64) -> Option<(Complex64, Complex64)> {
    let (gv, gp) = g(mu, lam)?;
    Some((lam * gv, gv + lam * gp))
}

/// `μ₁ ⊠ μ₂` through `λ₁(h) λ₂(h) = λ(h) h/(h−1)` with `λ = z`.
///
/// Unknowns are `u = (λ₁, λ₂)`, `h = h₁(λ₁)`:
///   `F₀ = h₁(λ₁) − h₂(λ₂)`, `F₁ = λ₁ λ₂ (h − 1) − z h`,
/// and the product transform is `G(z) = h/z`.
pub(crate) struct Mul<'a> {
    pub a: &'a SpectralMeasure,
    pub b: &'a SpectralMeasure,
    pub mean_a: f64,
    pub mean_b: f64,
}

impl<'a> Mul<'a> {
    pub fn new(a: &'a SpectralMeasure, b: &'a SpectralMeasure) -> Self {
        Mul {
            a,
            b,
            mean_a: a.mean(),
            mean_b: b.mean(),
        }
    }
}

impl Subordination for Mul<'_> {
    const STAGE: &'static str = "free_multiply";

    fn system(&self, z: Complex64, u: Pair) -> Option<System> {
        let (h1, h1p) = h_and_derivative(self.a, u[0])?;
        let (h2, h2p) = h_and_derivative(self.b, u[1])?;
        let prod = u[0] * u[1];
        let f = [h1 - h2, prod * (h1 - 1.0) - z * h1];
        let j = [
            [h1p, -h2p],
            [u[1] * (h1 - 1.0) + prod * h1p - z * h1p, u[0] * (h1 - 1.0)],
        ];
        // h − 1 carries the information for large |z|; weigh it, not h.
        let w = [
            (h1 - 1.0).norm() + (h2 - 1.0).norm(),
            prod.norm() * (h1 - 1.0).norm() + (z * h1).norm(),
        ];
        Some((f, j, w))
    }

    fn dz(&self, _z: Complex64, u: Pair) -> Option<Pair> {
        let (h1, _) = h_and_derivative(self.a, u[0])?;
        Some([ZERO, -h1])
    }

    fn seed(&self, z: Complex64) -> Pair {
        // λᵢ(h) ≈ mᵢ/(h − 1) and h − 1 ≈ m₁(μ₁)m₁(μ₂)/z.
        [z / self.mean_b, z / self.mean_a]
    }

    fn output(&self, z: Complex64, u: Pair) -> Option<(Complex64, Pair, Complex64)> {
        let (h1, h1p) = h_and_derivative(self.a, u[0])?;
        Some((h1 / z, [h1p / z, ZERO], -h1 / (z * z)))
    }

    fn admissible(&self, z: Complex64, u: Pair) -> bool {
        let Some((h1, _)) = h_and_derivative(self.a, u[0]) else {
            return false;
        };
        above(u[0], 0.0) && above(u[1], 0.0) && (h1 / z).im < 0.0
    }

    fn support_hint(&self) -> (f64, f64) {
        let (a0, a1) = self.a.support();
        let (b0, b1) = self.b.support();
        (a0 * b0, a1 * b1)
    }
}
