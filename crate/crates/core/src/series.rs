//! Formal power series oracle for free convolutions.
//!
//! Works entirely with moment and free-cumulant coefficients, so it shares
//! no code with the transform pipelines it checks.
//!
//! * `⊞`: free cumulants add.
//! * `⊠`: with `ψ(u) = Σ_{n≥1} m_n uⁿ` and `χ = ψ⁻¹`, the multiplication
//!   law reads `χ(y) = χ₁(y) χ₂(y) (1+y)/y`, equivalently `S = S₁ S₂` for
//!   `S(z) = χ(z)(1+z)/z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::MomentVector;

/// Default truncation order.
pub const DEFAULT_ORDER: usize = 12;

/// `c_0 + c_1 z + … + c_K z^K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSeries {
    coeffs: Vec<f64>,
}

impl TruncatedSeries {
    /// Series with coefficients `c_0..c_K`; an empty list is the zero
    /// series of order 0.
    pub fn new(coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            return TruncatedSeries { coeffs: vec![0.0] };
        }
        TruncatedSeries { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        TruncatedSeries::new(vec![0.0; order + 1])
    }

    pub fn constant(c: f64, order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = c;
        s
    }

    /// The series `z`.
    pub fn identity(order: usize) -> Self {
        let mut s = Self::zero(order);
        if order >= 1 {
            s.coeffs[1] = 1.0;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> f64 {
        self.coeffs.get(n).copied().unwrap_or(0.0)
    }

    /// Same coefficients, cut or zero-padded to `order`.
    pub fn with_order(&self, order: usize) -> Self {
        TruncatedSeries::new((0..=order).map(|n| self.coeff(n)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let k = self.order().min(other.order());
        TruncatedSeries::new((0..=k).map(|n| self.coeff(n) + other.coeff(n)).collect())
    }

    pub fn scale(&self, c: f64) -> Self {
        TruncatedSeries::new(self.coeffs.iter().map(|x| x * c).collect())
    }

    /// `s(z)/z`; requires `c_0 = 0` and lowers the order by one.
    pub fn div_z(&self) -> Result<Self> {
        if self.coeffs[0] != 0.0 {
            return Err(Error::validation("div_z needs a vanishing constant term"));
        }
        Ok(TruncatedSeries::new(self.coeffs[1..].to_vec()))
    }

    /// `z·s(z)`, raising the order by one.
    pub fn mul_z(&self) -> Self {
        TruncatedSeries::new(std::iter::once(0.0).chain(self.coeffs.iter().copied()).collect())
    }
}

/// Product truncated at the smaller order.
pub fn series_multiply(a: &TruncatedSeries, b: &TruncatedSeries) -> TruncatedSeries {
    let k = a.order().min(b.order());
    let mut out = vec![0.0; k + 1];
    for i in 0..=k {
        let ai = a.coeff(i);
        if ai == 0.0 {
            continue;
        }
        for j in 0..=k - i {
            out[i + j] += ai * b.coeff(j);
        }
    }
    TruncatedSeries::new(out)
}

/// `s(t(z))`; `t` must have no constant term.
pub fn series_compose(s: &TruncatedSeries, t: &TruncatedSeries) -> Result<TruncatedSeries> {
    if t.coeff(0) != 0.0 {
        return Err(Error::validation("composition needs an inner series with zero constant term"));
    }
    let k = s.order().min(t.order());
    let t = t.with_order(k);
    // Horner: s_0 + t(s_1 + t(s_2 + …)).
    let mut acc = TruncatedSeries::constant(s.coeff(k), k);
    for n in (0..k).rev() {
        acc = series_multiply(&acc, &t);
        acc.coeffs[0] += s.coeff(n);
    }
    Ok(acc)
}

/// Compositional inverse `r` with `s(r(z)) = z`; needs `c_0 = 0`, `c_1 ≠ 0`.
pub fn series_revert(s: &TruncatedSeries) -> Result<TruncatedSeries> {
    if s.coeff(0) != 0.0 {
        return Err(Error::validation("reversion needs a zero constant term"));
    }
    let c1 = s.coeff(1);
    if c1 == 0.0 || !c1.is_finite() {
        return Err(Error::validation("reversion needs a nonzero linear coefficient"));
    }
    let k = s.order();
    let mut r = TruncatedSeries::zero(k);
    if k >= 1 {
        r.coeffs[1] = 1.0 / c1;
    }
    // Fix one coefficient at a time: [zⁿ] s(r) is linear in r_n with slope c1.
    for n in 2..=k {
        let sr = series_compose(&s.with_order(n), &r.with_order(n))?;
        r.coeffs[n] = -sr.coeff(n) / c1;
    }
    Ok(r)
}

/// Free cumulants `κ_1..κ_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeCumulantVector {
    kappa: Vec<f64>,
}

impl FreeCumulantVector {
    pub fn new(kappa: Vec<f64>) -> Self {
        FreeCumulantVector { kappa }
    }

    pub fn order(&self) -> usize {
        self.kappa.len()
    }

    /// `κ_n` for `n ≥ 1`.
    pub fn get(&self, n: usize) -> f64 {
        self.kappa[n - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.kappa
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.order() != other.order() {
            return Err(Error::validation("free cumulant orders differ"));
        }
        Ok(Self::new(self.kappa.iter().zip(&other.kappa).map(|(a, b)| a + b).collect()))
    }

    /// `R(w) = Σ κ_{n+1} wⁿ`.
    pub fn r_series(&self) -> TruncatedSeries {
        TruncatedSeries::new(self.kappa.clone())
    }
}

/// `[u^j] M(u)^s` for `j ≤ max_j`, with `M(u) = Σ m_i u^i`, `m_0 = 1`.
fn power_coeffs(m: &[f64], s: usize, max_j: usize) -> Vec<f64> {
    let base = TruncatedSeries::new((0..=max_j).map(|i| m.get(i).copied().unwrap_or(0.0)).collect());
    let mut acc = TruncatedSeries::constant(1.0, max_j);
    for _ in 0..s {
        acc = series_multiply(&acc, &base);
    }
    acc.coeffs
}

/// Moments from free cumulants via
/// `m_n = Σ_{s=1}^{n} κ_s [u^{n−s}] M(u)^s`.
pub fn free_cumulants_to_moments(k: &FreeCumulantVector) -> MomentVector {
    let order = k.order();
    let mut m = vec![1.0];
    for n in 1..=order {
        let mut total = 0.0;
        for s in 1..=n {
            total += k.get(s) * power_coeffs(&m, s, n - s)[n - s];
        }
        m.push(total);
    }
    MomentVector::new(m[1..].to_vec())
}

/// Inverse of [`free_cumulants_to_moments`].
pub fn moments_to_free_cumulants(m: &MomentVector) -> FreeCumulantVector {
    let full = m.with_unit();
    let mut kappa: Vec<f64> = Vec::with_capacity(m.order());
    for n in 1..=m.order() {
        let mut rest = 0.0;
        for s in 1..n {
            rest += kappa[s - 1] * power_coeffs(&full, s, n - s)[n - s];
        }
        kappa.push(m.get(n) - rest);
    }
    FreeCumulantVector::new(kappa)
}

/// Moments of `μ₁ ⊞ μ₂` from the moments of the operands.
pub fn free_add_series(m1: &MomentVector, m2: &MomentVector) -> Result<MomentVector> {
    if m1.order() != m2.order() {
        return Err(Error::validation("moment vectors must have equal order"));
    }
    let k = moments_to_free_cumulants(m1).add(&moments_to_free_cumulants(m2))?;
    Ok(free_cumulants_to_moments(&k))
}

/// `ψ(u) = Σ_{n≥1} m_n uⁿ`.
pub fn psi_series(m: &MomentVector) -> TruncatedSeries {
    let mut c = vec![0.0];
    c.extend_from_slice(m.as_slice());
    TruncatedSeries::new(c)
}

/// `χ = ψ⁻¹`; needs `m₁ ≠ 0`.
pub fn chi_series(m: &MomentVector) -> Result<TruncatedSeries> {
    if m.order() == 0 || m.get(1) == 0.0 {
        return Err(Error::validation("S-transform undefined for vanishing mean"));
    }
    series_revert(&psi_series(m))
}

/// `S(z) = χ(z)(1+z)/z`, of order `K−1`.
pub fn s_transform_series(m: &MomentVector) -> Result<TruncatedSeries> {
    let chi_over_z = chi_series(m)?.div_z()?;
    Ok(chi_over_z.add(&chi_over_z.mul_z().with_order(chi_over_z.order())))
}

fn moments_from_chi(chi: &TruncatedSeries, order: usize) -> Result<MomentVector> {
    let psi = series_revert(&chi.with_order(order))?;
    Ok(MomentVector::new(psi.coeffs()[1..].to_vec()))
}

/// Moments of `μ₁ ⊠ μ₂` through `S = S₁ S₂`.
pub fn free_multiply_series(m1: &MomentVector, m2: &MomentVector) -> Result<MomentVector> {
    if m1.order() != m2.order() {
        return Err(Error::validation("moment vectors must have equal order"));
    }
    let s = series_multiply(&s_transform_series(m1)?, &s_transform_series(m2)?);
    // χ = z S/(1+z), and 1/(1+z) = Σ (−z)ⁿ.
    let k = m1.order();
    let geom = TruncatedSeries::new((0..k).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 }).collect());
    let chi = series_multiply(&s, &geom).mul_z();
    moments_from_chi(&chi, k)
}

/// Moments of `μ₁ ⊠ μ₂` through the multiplication law written for the
/// inverses directly: `χ(y) = χ₁(y) χ₂(y) (1+y)/y`.
pub fn free_multiply_series_composed(m1: &MomentVector, m2: &MomentVector) -> Result<MomentVector> {
    if m1.order() != m2.order() {
        return Err(Error::validation("moment vectors must have equal order"));
    }
    let k = m1.order();
    // Both factors start at y¹, so their product is exact one order higher.
    let c1 = chi_series(m1)?.with_order(k + 1);
    let c2 = chi_series(m2)?.with_order(k + 1);
    let p = series_multiply(&c1, &c2).div_z()?;
    let chi = p.add(&p.mul_z().with_order(p.order()));
    moments_from_chi(&chi, k)
}

/// All non-crossing partitions of `{0, …, n−1}`, each as a list of
/// blocks. Exponential cost; capped at `n ≤ 10`.
pub fn noncrossing_partitions(n: usize) -> Result<Vec<Vec<Vec<usize>>>> {
    if n > 10 {
        return Err(Error::validation("non-crossing enumeration is capped at n = 10"));
    }
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    enumerate_rgs(0, 0, &mut labels, &mut out);
    Ok(out)
}

/// Restricted growth strings, keeping those without crossings.
fn enumerate_rgs(i: usize, blocks: usize, labels: &mut [usize], out: &mut Vec<Vec<Vec<usize>>>) {
    let n = labels.len();
    if i == n {
        if !crosses(labels) {
            let mut parts = vec![Vec::new(); blocks];
            for (x, &b) in labels.iter().enumerate() {
                parts[b].push(x);
            }
            out.push(parts);
        }
        return;
    }
    for b in 0..=blocks {
        labels[i] = b;
        enumerate_rgs(i + 1, blocks.max(b + 1), labels, out);
    }
}

/// `a < b < c < d` with `a, c` in one block and `b, d` in another.
fn crosses(labels: &[usize]) -> bool {
    let n = labels.len();
    for a in 0..n {
        for b in a + 1..n {
            if labels[b] == labels[a] {
                continue;
            }
            for c in b + 1..n {
                if labels[c] != labels[a] {
                    continue;
                }
                if (c + 1..n).any(|d| labels[d] == labels[b]) {
                    return true;
                }
            }
        }
    }
    false
}

/// `m_n = Σ_{π ∈ NC(n)} Π_{B ∈ π} κ_{|B|}` by explicit enumeration.
pub fn moments_by_enumeration(k: &FreeCumulantVector) -> Result<MomentVector> {
    let mut m = Vec::with_capacity(k.order());
    for n in 1..=k.order() {
        let total = noncrossing_partitions(n)?
            .iter()
            .map(|p| p.iter().map(|b| k.get(b.len())).product::<f64>())
            .sum();
        m.push(total);
    }
    Ok(MomentVector::new(m))
}
