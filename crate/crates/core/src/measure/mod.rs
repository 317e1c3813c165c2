//! Probability measures on the real line: finitely many atoms plus a
//! piecewise-linear density on disjoint segments.

mod distance;
pub mod io;
mod laws;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use distance::{cdf, ks_distance, l1_distance, wasserstein1, CdfTable};
pub use laws::{make_law, LawSpec};

/// Accepted deviation of the total mass from 1 after construction.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Largest deviation the strict constructor repairs by renormalization.
pub const RENORMALIZE_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub w: f64,
}

impl Atom {
    pub fn new(x: f64, w: f64) -> Self {
        Atom { x, w }
    }
}

/// A density sampled on a strictly increasing grid, linear between nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSegment", into = "RawSegment")]
pub struct Segment {
    grid: Vec<f64>,
    density: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSegment {
    grid: Vec<f64>,
    density: Vec<f64>,
}

impl TryFrom<RawSegment> for Segment {
    type Error = Error;
    fn try_from(raw: RawSegment) -> Result<Self> {
        Segment::new(raw.grid, raw.density)
    }
}

impl From<Segment> for RawSegment {
    fn from(s: Segment) -> Self {
        RawSegment {
            grid: s.grid,
            density: s.density,
        }
    }
}

impl Segment {
    pub fn new(grid: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::validation("segment needs at least 2 grid nodes"));
        }
        if grid.len() != density.len() {
            return Err(Error::validation(format!(
                "segment has {} nodes but {} density values",
                grid.len(),
                density.len()
            )));
        }
        if grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("segment grid must be finite"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("segment grid must be strictly increasing"));
        }
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::validation("segment density must be finite and nonnegative"));
        }
        Ok(Segment { grid, density })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn lo(&self) -> f64 {
        self.grid[0]
    }

    pub fn hi(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Trapezoid integral, exact for the linear interpolant.
    pub fn mass(&self) -> f64 {
        self.cells().map(|(t0, t1, d0, d1)| 0.5 * (d0 + d1) * (t1 - t0)).sum()
    }

    /// Linear interpolant at `x`; zero outside the segment.
    pub fn density_at(&self, x: f64) -> f64 {
        if x < self.lo() || x > self.hi() {
            return 0.0;
        }
        let k = match self.grid.partition_point(|&t| t <= x) {
            0 => 0,
            k if k >= self.grid.len() => self.grid.len() - 2,
            k => k - 1,
        };
        let (t0, t1) = (self.grid[k], self.grid[k + 1]);
        let (d0, d1) = (self.density[k], self.density[k + 1]);
        d0 + (d1 - d0) * (x - t0) / (t1 - t0)
    }

    /// Iterator over cells as `(t0, t1, d0, d1)`.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(g, d)| (g[0], g[1], d[0], d[1]))
    }

    /// `∫ x^n ρ(x) dx` for the linear interpolant, integrated exactly.
    pub fn moment(&self, n: u32) -> f64 {
        self.cells()
            .map(|(t0, t1, d0, d1)| {
                let h = t1 - t0;
                let (i0, i1) = shifted_power_integrals(t0, h, n);
                h * (d0 * i0 + d1 * i1)
            })
            .sum()
    }

    fn scaled(&self, factor: f64) -> Segment {
        Segment {
            grid: self.grid.clone(),
            density: self.density.iter().map(|d| d * factor).collect(),
        }
    }
}

/// `(∫₀¹ (a+ht)ⁿ (1−t) dt, ∫₀¹ (a+ht)ⁿ t dt)` by binomial expansion.
fn shifted_power_integrals(a: f64, h: f64, n: u32) -> (f64, f64) {
    let mut i0 = 0.0;
    let mut i1 = 0.0;
    let mut binom = 1.0;
    let mut hk = 1.0;
    for k in 0..=n {
        let ak = a.powi((n - k) as i32);
        let term = binom * ak * hk;
        let kf = k as f64;
        i0 += term / ((kf + 1.0) * (kf + 2.0));
        i1 += term / (kf + 2.0);
        binom = binom * (n - k) as f64 / (kf + 1.0);
        hk *= h;
    }
    (i0, i1)
}

/// Atoms plus an absolutely continuous part; total mass 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
    segments: Vec<Segment>,
    /// Factor applied to reach unit mass (1 when none was needed).
    #[serde(default = "one")]
    renormalization: f64,
}

fn one() -> f64 {
    1.0
}

impl SpectralMeasure {
    /// Validating constructor. Mass deviations below [`RENORMALIZE_LIMIT`]
    /// are repaired by proportional rescaling; larger ones are rejected.
    pub fn new(atoms: Vec<Atom>, segments: Vec<Segment>) -> Result<Self> {
        Self::with_mass_window(atoms, segments, RENORMALIZE_LIMIT)
    }

    /// Like [`SpectralMeasure::new`] but accepting any mass within
    /// `1 ± window` before rescaling.
    pub fn with_mass_window(mut atoms: Vec<Atom>, segments: Vec<Segment>, window: f64) -> Result<Self> {
        for a in &atoms {
            if !a.x.is_finite() || !a.w.is_finite() || a.w < 0.0 {
                return Err(Error::validation(format!("invalid atom ({}, {})", a.x, a.w)));
            }
        }
        atoms.retain(|a| a.w > 0.0);
        atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
        if atoms.windows(2).any(|p| p[0].x == p[1].x) {
            return Err(Error::validation("atom positions must be distinct"));
        }
        let mut segments = segments;
        segments.sort_by(|a, b| a.lo().total_cmp(&b.lo()));
        if segments.windows(2).any(|p| p[1].lo() < p[0].hi()) {
            return Err(Error::validation("segments must be pairwise disjoint"));
        }
        let mass: f64 = atoms.iter().map(|a| a.w).sum::<f64>() + segments.iter().map(Segment::mass).sum::<f64>();
        if !mass.is_finite() || (mass - 1.0).abs() > window {
            return Err(Error::validation(format!(
                "total mass {mass} deviates from 1 by more than {window:e}"
            )));
        }
        let mut factor = 1.0;
        if (mass - 1.0).abs() > 1e-13 {
            factor = 1.0 / mass;
            for a in &mut atoms {
                a.w *= factor;
            }
            segments = segments.iter().map(|s| s.scaled(factor)).collect();
        }
        Ok(SpectralMeasure {
            atoms,
            segments,
            renormalization: factor,
        })
    }

    pub fn dirac(x: f64) -> Self {
        SpectralMeasure {
            atoms: vec![Atom::new(x, 1.0)],
            segments: Vec::new(),
            renormalization: 1.0,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn renormalization(&self) -> f64 {
        self.renormalization
    }

    pub(crate) fn set_renormalization(&mut self, factor: f64) {
        self.renormalization = factor;
    }

    pub fn is_atomic(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum::<f64>() + self.segments.iter().map(Segment::mass).sum::<f64>()
    }

    /// Closed hull of atoms and segments.
    pub fn support(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in &self.atoms {
            lo = lo.min(a.x);
            hi = hi.max(a.x);
        }
        for s in &self.segments {
            lo = lo.min(s.lo());
            hi = hi.max(s.hi());
        }
        (lo, hi)
    }

    /// Absolutely continuous density at `x` (atoms excluded).
    pub fn density_at(&self, x: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| s.lo() <= x && x <= s.hi())
            .map_or(0.0, |s| s.density_at(x))
    }

    pub fn atom_weight_at(&self, x: f64) -> f64 {
        self.atoms.iter().find(|a| a.x == x).map_or(0.0, |a| a.w)
    }

    pub fn moment(&self, n: u32) -> f64 {
        if n == 0 {
            return self.mass();
        }
        self.atoms.iter().map(|a| a.w * a.x.powi(n as i32)).sum::<f64>()
            + self.segments.iter().map(|s| s.moment(n)).sum::<f64>()
    }

    /// `m_1..m_order`.
    pub fn moments(&self, order: usize) -> MomentVector {
        MomentVector::new((1..=order).map(|n| self.moment(n as u32)).collect())
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        let m1 = self.moment(1);
        self.moment(2) - m1 * m1
    }

    /// Pushforward under `x ↦ scale·x + shift`.
    pub fn affine_map(&self, scale: f64, shift: f64) -> Result<Self> {
        if scale == 0.0 || !scale.is_finite() || !shift.is_finite() {
            return Err(Error::validation(format!("affine map needs a finite nonzero scale, got {scale}")));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(scale * a.x + shift, a.w))
            .collect();
        let segments = self
            .segments
            .iter()
            .map(|s| {
                let mut grid: Vec<f64> = s.grid.iter().map(|x| scale * x + shift).collect();
                let mut density: Vec<f64> = s.density.iter().map(|d| d / scale.abs()).collect();
                if scale < 0.0 {
                    grid.reverse();
                    density.reverse();
                }
                Segment::new(grid, density)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = SpectralMeasure::with_mass_window(atoms, segments, RENORMALIZE_LIMIT)?;
        out.renormalization *= self.renormalization;
        Ok(out)
    }

    /// `F(x) = μ((−∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        cdf(self, x)
    }

    /// Generalized inverse `inf{x : F(x) ≥ p}`.
    pub fn quantile(&self, p: f64) -> f64 {
        CdfTable::new(self).quantile(p)
    }

    /// `k` quantiles at the midpoints `(j − ½)/k`, ascending.
    pub fn midpoint_quantiles(&self, k: usize) -> Vec<f64> {
        let table = CdfTable::new(self);
        (0..k).map(|j| table.quantile((j as f64 + 0.5) / k as f64)).collect()
    }
}

/// Raw moments `m_1..m_K` of a measure (`m_0 = 1` implicit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    m: Vec<f64>,
}

impl MomentVector {
    pub fn new(m: Vec<f64>) -> Self {
        MomentVector { m }
    }

    pub fn order(&self) -> usize {
        self.m.len()
    }

    /// `m_n`, with `m_0 = 1`.
    pub fn get(&self, n: usize) -> f64 {
        if n == 0 {
            1.0
        } else {
            self.m[n - 1]
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.m
    }

    /// `m_0..m_K` including the leading 1.
    pub fn with_unit(&self) -> Vec<f64> {
        std::iter::once(1.0).chain(self.m.iter().copied()).collect()
    }

    pub fn truncated(&self, order: usize) -> MomentVector {
        MomentVector::new(self.m[..order.min(self.m.len())].to_vec())
    }

    /// Whether the Hankel matrix `[m_{i+j}]` of size `⌊K/2⌋+1` is positive
    /// semidefinite up to `tol` (relative to its diagonal scale).
    pub fn is_hankel_psd(&self, tol: f64) -> bool {
        let size = self.order() / 2 + 1;
        let scale = (0..size).map(|i| self.get(2 * i).abs()).fold(1.0, f64::max);
        let mut a: Vec<Vec<f64>> = (0..size)
            .map(|i| (0..size).map(|j| self.get(i + j)).collect())
            .collect();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += tol * scale;
        }
        // Cholesky; failure means a negative pivot.
        for j in 0..size {
            let mut d = a[j][j];
            for k in 0..j {
                d -= a[j][k] * a[j][k];
            }
            if d <= 0.0 {
                return false;
            }
            let d = d.sqrt();
            a[j][j] = d;
            for i in j + 1..size {
                let mut s = a[i][j];
                for k in 0..j {
                    s -= a[i][k] * a[j][k];
                }
                a[i][j] = s / d;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atom() -> SpectralMeasure {
        make_law(&LawSpec::TwoAtom { p: 0.5, x1: -1.0, x2: 1.0 }, 0).unwrap()
    }

    #[test]
    fn segment_rejects_bad_grids() {
        assert!(Segment::new(vec![0.0], vec![1.0]).is_err());
        assert!(Segment::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(Segment::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Segment::new(vec![0.0, 1.0], vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn constructor_renormalizes_small_deviation_only() {
        let seg = Segment::new(vec![0.0, 1.0], vec![1.0 + 4e-7, 1.0 + 4e-7]).unwrap();
        let mu = SpectralMeasure::new(vec![], vec![seg]).unwrap();
        assert!((mu.mass() - 1.0).abs() < 1e-12);
        assert!((mu.renormalization() - 1.0 / (1.0 + 4e-7)).abs() < 1e-15);

        let seg = Segment::new(vec![0.0, 1.0], vec![1.1, 1.1]).unwrap();
        assert!(SpectralMeasure::new(vec![], vec![seg]).is_err());
    }

    #[test]
    fn constructor_rejects_overlaps_and_duplicate_atoms() {
        let a = Segment::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let b = Segment::new(vec![0.5, 1.5], vec![0.5, 0.5]).unwrap();
        assert!(SpectralMeasure::new(vec![], vec![a, b]).is_err());
        assert!(SpectralMeasure::new(vec![Atom::new(1.0, 0.5), Atom::new(1.0, 0.5)], vec![]).is_err());
        assert!(SpectralMeasure::new(vec![Atom::new(1.0, -0.5), Atom::new(2.0, 1.5)], vec![]).is_err());
    }

    #[test]
    fn moments_of_atoms() {
        let mu = two_atom();
        assert_eq!(mu.moment(0), 1.0);
        assert_eq!(mu.moment(1), 0.0);
        assert_eq!(mu.moment(2), 1.0);
        assert_eq!(mu.moment(3), 0.0);
    }

    #[test]
    fn segment_moment_is_exact_for_linear_density() {
        // ρ(x) = 2x on [0,1]: m_n = 2/(n+2).
        let seg = Segment::new(vec![0.0, 0.3, 1.0], vec![0.0, 0.6, 2.0]).unwrap();
        for n in 0..10 {
            assert!((seg.moment(n) - 2.0 / (n as f64 + 2.0)).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn affine_identity_is_node_for_node() {
        let mu = make_law(&LawSpec::Semicircle { sigma: 1.0 }, 64).unwrap();
        assert_eq!(mu.affine_map(1.0, 0.0).unwrap(), mu);
    }

    #[test]
    fn affine_shift_moves_atoms() {
        let mu = two_atom().affine_map(1.0, 3.0).unwrap();
        let xs: Vec<f64> = mu.atoms().iter().map(|a| a.x).collect();
        assert_eq!(xs, vec![2.0, 4.0]);
    }

    #[test]
    fn affine_negative_scale_reflects() {
        let mu = make_law(&LawSpec::MarchenkoPastur { ratio: 0.5 }, 200).unwrap();
        let nu = mu.affine_map(-2.0, 1.0).unwrap();
        assert!((nu.mass() - 1.0).abs() < 1e-12);
        assert!((nu.moment(1) - (1.0 - 2.0 * mu.moment(1))).abs() < 1e-12);
        assert!((nu.variance() - 4.0 * mu.variance()).abs() < 1e-12);
    }

    #[test]
    fn affine_rejects_zero_scale() {
        assert!(matches!(two_atom().affine_map(0.0, 1.0), Err(Error::Validation(_))));
    }

    #[test]
    fn hankel_check() {
        // Semicircle moments are PSD; flipping m_2 negative breaks it.
        let good = MomentVector::new(vec![0.0, 1.0, 0.0, 2.0, 0.0, 5.0]);
        assert!(good.is_hankel_psd(1e-8));
        let bad = MomentVector::new(vec![0.0, -1.0, 0.0, 2.0]);
        assert!(!bad.is_hankel_psd(1e-8));
    }

    #[test]
    fn quantiles_of_two_atom() {
        let mu = two_atom();
        let q = mu.midpoint_quantiles(8);
        assert_eq!(q, vec![-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0]);
    }
}
