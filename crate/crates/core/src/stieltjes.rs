//! Cauchy–Stieltjes transforms: evaluation, principal values, functional
//! inversion, and recovery of a measure from its transform.
//!
//! Branch convention: `G(z) = ∫ dμ(t)/(z − t)` maps the upper half-plane
//! into the lower half-plane and behaves like `1/z` at infinity.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Atom, Segment, SpectralMeasure};
use crate::par::Exec;

pub const DEFAULT_EPSILONS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Newton tolerance for [`invert_cauchy`], relative to `max(1, |w|)`.
pub const INVERSION_TOLERANCE: f64 = 1e-12;

const MAX_NEWTON_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 20;

/// Smallest extrapolated mass reported as an atom.
pub const ATOM_THRESHOLD: f64 = 1e-3;

/// Anything that can evaluate a Cauchy transform off the real support.
pub trait TransformEvaluator: Sync {
    fn cauchy(&self, z: Complex64) -> Result<Complex64> {
        self.cauchy_and_derivative(z).map(|(g, _)| g)
    }

    /// `(G(z), G'(z))`.
    fn cauchy_and_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)>;

    /// Interval expected to contain the support.
    fn support_hint(&self) -> (f64, f64);

    /// `G(x_k + iε_jk)` for every schedule entry `j` and grid node `k`,
    /// indexed `[j][k]`; see [`ContourSpec::epsilon_at`].
    fn sample_contour(&self, contour: &ContourSpec, exec: Exec) -> Result<Vec<Vec<Complex64>>> {
        let grid = &contour.real_grid;
        let scales = contour.node_scales();
        contour
            .epsilon_schedule
            .iter()
            .map(|&eps| {
                exec.try_map_indexed(grid.len(), |k| self.cauchy(Complex64::new(grid[k], eps * scales[k])))
            })
            .collect()
    }
}

/// Horizontal contour `x + iε` used to approach the real axis.
///
/// Optional `edges` mark points where the density may be singular. Nodes
/// within `EDGE_REACH·ε₀` of an edge use heights shrunk in proportion to
/// their distance from it, so the ratio between height and the scale on
/// which the density varies stays bounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub real_grid: Vec<f64>,
    #[serde(default = "default_epsilons")]
    pub epsilon_schedule: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<f64>,
}

fn default_epsilons() -> Vec<f64> {
    DEFAULT_EPSILONS.to_vec()
}

/// Distance from an edge, in units of the largest epsilon, below which
/// heights are shrunk.
const EDGE_REACH: f64 = 40.0;
/// Geometric ratio of refinement nodes approaching an edge.
const EDGE_RATIO: f64 = 0.95;
/// Closest refinement node, relative to `max(1, |edge|)`.
const EDGE_NEAREST: f64 = 1e-7;

impl ContourSpec {
    pub fn new(real_grid: Vec<f64>, epsilon_schedule: Vec<f64>) -> Result<Self> {
        let c = ContourSpec {
            real_grid,
            epsilon_schedule,
            edges: Vec::new(),
        };
        c.validate()?;
        Ok(c)
    }

    /// `n` equally spaced nodes on `[lo, hi]` with the default schedule.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo < hi) || n < 2 {
            return Err(Error::validation(format!("bad contour range [{lo}, {hi}] with {n} points")));
        }
        let grid = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
        Self::new(grid, default_epsilons())
    }

    /// Uniform grid over `[lo, hi]` widened by `margin` of its length on
    /// each side.
    pub fn with_margin(lo: f64, hi: f64, margin: f64, n: usize) -> Result<Self> {
        let width = (hi - lo).max(1e-3);
        Self::uniform(lo - margin * width, hi + margin * width, n)
    }

    pub fn epsilons(mut self, eps: Vec<f64>) -> Result<Self> {
        self.epsilon_schedule = eps;
        self.validate()?;
        Ok(self)
    }

    /// Add edge points: each becomes a grid node, surrounded on both sides
    /// by nodes approaching it geometrically down to a relative distance
    /// of 1e−10.
    pub fn with_edges(mut self, edges: &[f64]) -> Result<Self> {
        let (lo, hi) = (self.lo(), self.hi());
        let mut grid = self.real_grid.clone();
        for &e in edges {
            if !e.is_finite() || e <= lo || e >= hi {
                continue;
            }
            let k = grid.partition_point(|x| *x < e);
            let spacing = grid[k] - grid[k - 1];
            let reach = (EDGE_REACH * self.epsilon_schedule[0]).max(2.0 * spacing);
            let nearest = EDGE_NEAREST * e.abs().max(1.0);
            let mut d = reach;
            while d > nearest {
                grid.push(e - d);
                grid.push(e + d);
                d *= EDGE_RATIO;
            }
            grid.push(e);
            self.edges.push(e);
        }
        grid.retain(|x| *x >= lo && *x <= hi);
        grid.sort_by(f64::total_cmp);
        // Drop nodes that crowd a neighbor relative to their edge distance.
        let mut merged: Vec<f64> = Vec::with_capacity(grid.len());
        for x in grid {
            if let Some(&last) = merged.last() {
                let tol = 0.05 * (1.0 - EDGE_RATIO) * self.distance_to_edge(x).min(self.distance_to_edge(last));
                if x - last <= tol {
                    continue;
                }
            }
            merged.push(x);
        }
        self.real_grid = merged;
        self.edges.sort_by(f64::total_cmp);
        self.edges.dedup();
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.real_grid.len() < 2 {
            return Err(Error::validation("contour grid needs at least 2 nodes"));
        }
        if self.real_grid.iter().any(|x| !x.is_finite()) || self.real_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("contour grid must be finite and strictly increasing"));
        }
        if self.epsilon_schedule.is_empty()
            || self.epsilon_schedule.iter().any(|e| !(*e > 0.0) || !e.is_finite())
            || self.epsilon_schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::validation("epsilon schedule must be positive and strictly decreasing"));
        }
        if self.edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::validation("contour edges must be finite"));
        }
        Ok(())
    }

    pub fn lo(&self) -> f64 {
        self.real_grid[0]
    }

    pub fn hi(&self) -> f64 {
        *self.real_grid.last().unwrap()
    }

    fn distance_to_edge(&self, x: f64) -> f64 {
        self.edges.iter().map(|e| (x - e).abs()).fold(f64::INFINITY, f64::min)
    }

    /// Per-node multipliers of the epsilon schedule, in `(0, 1]`.
    pub fn node_scales(&self) -> Vec<f64> {
        let n = self.real_grid.len();
        let g = &self.real_grid;
        let reach = EDGE_REACH * self.epsilon_schedule[0];
        (0..n)
            .map(|k| {
                let mut d = self.distance_to_edge(g[k]);
                if d == 0.0 {
                    let left = if k > 0 { g[k] - g[k - 1] } else { f64::INFINITY };
                    let right = if k + 1 < n { g[k + 1] - g[k] } else { f64::INFINITY };
                    d = 0.5 * left.min(right);
                }
                (d / reach).min(1.0)
            })
            .collect()
    }

    /// Height of node `k` at schedule step `j`.
    pub fn epsilon_at(&self, j: usize, k: usize) -> f64 {
        self.epsilon_schedule[j] * self.node_scales()[k]
    }
}

/// `log(1 + w)` without cancellation for small `w`, principal branch.
#[inline]
fn ln_1p(w: Complex64) -> Complex64 {
    Complex64::new(
        0.5 * (w.re * (2.0 + w.re) + w.im * w.im).ln_1p(),
        w.im.atan2(1.0 + w.re),
    )
}

/// `log(1 + w) − w`, summed as a series for small `|w|`.
#[inline]
fn ln_1p_minus_identity(w: Complex64) -> Complex64 {
    let a2 = w.norm_sqr();
    if a2 >= 0.01 {
        return ln_1p(w) - w;
    }
    let mut term = -w * w;
    let mut sum = term / 2.0;
    let floor = 1e-18 * a2;
    let mut k = 3.0;
    loop {
        term *= -w;
        let t = term / k;
        sum += t;
        if t.norm_sqr() <= floor * floor {
            return sum;
        }
        k += 1.0;
    }
}

/// Contribution of one linear cell `[t0, t0 + h]` with end densities
/// `d0, d1` to `(G, G')`, given `u0 = z − t0`.
///
/// With `u1 = u0 − h`, `w = h/u1`, `L = log(u0/u1) = log(1 + w)` and
/// `q = L − w`:
///   `G  = d0·L + (d1−d0)·(L + q/w)`
///   `G' = −d0·w/u0 + (d1−d0)·q/h`.
#[inline]
fn cell_terms(u0: Complex64, h: f64, d0: f64, d1: f64) -> (Complex64, Complex64) {
    let u1 = u0 - h;
    let w = h / u1;
    let q = ln_1p_minus_identity(w);
    let l = w + q;
    let dd = d1 - d0;
    let g = l * d0 + (l + q / w) * dd;
    let gp = -(w / u0) * d0 + q * (dd / h);
    (g, gp)
}

fn segment_terms(seg: &Segment, z: Complex64) -> (Complex64, Complex64) {
    let mut g = Complex64::new(0.0, 0.0);
    let mut gp = Complex64::new(0.0, 0.0);
    for (t0, t1, d0, d1) in seg.cells() {
        if d0 == 0.0 && d1 == 0.0 {
            continue;
        }
        let (a, b) = cell_terms(z - t0, t1 - t0, d0, d1);
        g += a;
        gp += b;
    }
    (g, gp)
}

fn check_off_support(mu: &SpectralMeasure, z: Complex64) -> Result<()> {
    if z.im != 0.0 {
        return Ok(());
    }
    let x = z.re;
    if mu.atoms().iter().any(|a| a.x == x) {
        return Err(Error::domain(format!("z = {x} is an atom of the measure")));
    }
    if mu.segments().iter().any(|s| s.lo() <= x && x <= s.hi()) {
        return Err(Error::domain(format!(
            "z = {x} lies on the support; use principal_value_transform for boundary values"
        )));
    }
    Ok(())
}

/// `(G(z), G'(z))` for a measure, exact for its piecewise-linear density.
pub fn cauchy_and_derivative(mu: &SpectralMeasure, z: Complex64) -> Result<(Complex64, Complex64)> {
    check_off_support(mu, z)?;
    let mut g = Complex64::new(0.0, 0.0);
    let mut gp = Complex64::new(0.0, 0.0);
    for a in mu.atoms() {
        let inv = 1.0 / (z - a.x);
        g += inv * a.w;
        gp -= inv * inv * a.w;
    }
    for s in mu.segments() {
        let (a, b) = segment_terms(s, z);
        g += a;
        gp += b;
    }
    Ok((g, gp))
}

/// `G_μ(z) = ∫ dμ(t)/(z − t)`.
pub fn cauchy_transform(mu: &SpectralMeasure, z: Complex64) -> Result<Complex64> {
    cauchy_and_derivative(mu, z).map(|(g, _)| g)
}

impl TransformEvaluator for SpectralMeasure {
    fn cauchy_and_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        cauchy_and_derivative(self, z)
    }

    fn support_hint(&self) -> (f64, f64) {
        self.support()
    }
}

/// Principal value `PV ∫ dμ(t)/(x − t)`, the real part of the boundary
/// value `G(x ± i0)`. The logarithmic singularities of neighboring cells
/// cancel analytically; a density jump at `x` makes it diverge.
pub fn principal_value_transform(mu: &SpectralMeasure, x: f64) -> Result<f64> {
    if mu.atoms().iter().any(|a| a.x == x) {
        return Err(Error::domain(format!("principal value undefined at atom x = {x}")));
    }
    let mut total: f64 = mu.atoms().iter().map(|a| a.w / (x - a.x)).sum();
    // Coefficient multiplying the (cancelling) log|0| terms.
    let mut singular = 0.0;
    let mut scale: f64 = 0.0;
    for seg in mu.segments() {
        for (t0, t1, d0, d1) in seg.cells() {
            scale = scale.max(d0).max(d1);
            let h = t1 - t0;
            let s = (d1 - d0) / h;
            let u0 = x - t0;
            let u1 = x - t1;
            if u0 == 0.0 {
                // A = d0; ∫ = d0 (log|u0| − log|u1|) − s h
                total += -d0 * u1.abs().ln() - s * h;
                singular += d0;
            } else if u1 == 0.0 {
                total += d1 * u0.abs().ln() - s * h;
                singular -= d1;
            } else if u0 > 0.0 && u1 < 0.0 {
                let a = d0 + s * u0;
                total += a * (u0 / -u1).ln() - s * h;
            } else {
                let (g, _) = cell_terms(Complex64::new(u0, 0.0), h, d0, d1);
                total += g.re;
            }
        }
    }
    if singular.abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::domain(format!(
            "principal value diverges at x = {x}: density jumps there"
        )));
    }
    Ok(total)
}

/// Solve `G(λ) = w` for `λ` by damped Newton from `λ₀ = 1/w`.
pub fn invert_cauchy<E: TransformEvaluator + ?Sized>(ev: &E, w: Complex64) -> Result<Complex64> {
    invert_cauchy_from(ev, w, 1.0 / w)
}

/// [`invert_cauchy`] with an explicit starting point (continuation).
pub fn invert_cauchy_from<E: TransformEvaluator + ?Sized>(
    ev: &E,
    w: Complex64,
    start: Complex64,
) -> Result<Complex64> {
    let tol = INVERSION_TOLERANCE * w.norm().max(1.0);
    let eval = |lam: Complex64| -> Option<(Complex64, Complex64)> {
        ev.cauchy_and_derivative(lam)
            .ok()
            .filter(|(g, gp)| g.is_finite() && gp.is_finite())
    };
    let mut lam = start;
    let (mut g, mut gp) = eval(lam).ok_or_else(|| Error::InversionFailure {
        last: lam,
        residual: f64::INFINITY,
        iterations: 0,
    })?;
    let mut res = (g - w).norm();
    for it in 0..MAX_NEWTON_ITERATIONS {
        if res <= tol {
            return Ok(lam);
        }
        let step = (g - w) / gp;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let cand = lam - step * t;
            if let Some((gc, gpc)) = eval(cand) {
                let rc = (gc - w).norm();
                if rc < res {
                    lam = cand;
                    g = gc;
                    gp = gpc;
                    res = rc;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            // Newton stalled at rounding level.
            if res <= 10.0 * tol {
                return Ok(lam);
            }
            return Err(Error::InversionFailure {
                last: lam,
                residual: res,
                iterations: it + 1,
            });
        }
    }
    if res <= tol {
        Ok(lam)
    } else {
        Err(Error::InversionFailure {
            last: lam,
            residual: res,
            iterations: MAX_NEWTON_ITERATIONS,
        })
    }
}

/// Weights `c_j` with `Σ c_j f(ε_j)` the polynomial extrapolation of `f`
/// to `ε = 0` through all schedule points.
pub fn extrapolation_weights(eps: &[f64]) -> Vec<f64> {
    (0..eps.len())
        .map(|j| {
            eps.iter()
                .enumerate()
                .filter(|(m, _)| *m != j)
                .map(|(_, &em)| em / (em - eps[j]))
                .product()
        })
        .collect()
}

/// Recover the measure whose Cauchy transform `ev` evaluates.
///
/// The density at each grid node is the extrapolation to `ε → 0` of the
/// Poisson samples `−Im G(x + iε)/π` over the epsilon schedule. Atoms are
/// located as poles of `G` near local maxima of the samples, kept when
/// their extrapolated mass `ε·|Im G|` reaches [`ATOM_THRESHOLD`], and their
/// Lorentzian footprint is removed before the density is extrapolated.
pub fn stieltjes_invert<E: TransformEvaluator + ?Sized>(ev: &E, contour: &ContourSpec) -> Result<SpectralMeasure> {
    stieltjes_invert_with(ev, contour, Exec::default())
}

pub fn stieltjes_invert_with<E: TransformEvaluator + ?Sized>(
    ev: &E,
    contour: &ContourSpec,
    exec: Exec,
) -> Result<SpectralMeasure> {
    contour.validate()?;
    let samples = ev.sample_contour(contour, exec)?;
    density_from_samples(ev, contour, &samples, exec)
}

/// Tolerance on negative Poisson samples before declaring a branch error.
const NEGATIVE_DENSITY_TOLERANCE: f64 = 1e-6;

pub(crate) fn density_from_samples<E: TransformEvaluator + ?Sized>(
    ev: &E,
    contour: &ContourSpec,
    samples: &[Vec<Complex64>],
    exec: Exec,
) -> Result<SpectralMeasure> {
    let grid = &contour.real_grid;
    let eps = &contour.epsilon_schedule;
    let scales = contour.node_scales();
    let n = grid.len();
    let mut poisson: Vec<Vec<f64>> = samples
        .iter()
        .map(|row| row.iter().map(|g| -g.im / PI).collect())
        .collect();
    for (j, row) in poisson.iter().enumerate() {
        if let Some(k) = row.iter().position(|p| !p.is_finite() || *p < -NEGATIVE_DENSITY_TOLERANCE) {
            return Err(Error::Branch(format!(
                "Im G({} + {}i) = {:e} has the wrong sign",
                grid[k],
                eps[j] * scales[k],
                samples[j][k].im
            )));
        }
    }

    let atoms = detect_atoms(ev, contour, &scales, &poisson[0], exec)?;
    for a in &atoms {
        for (j, row) in poisson.iter_mut().enumerate() {
            for k in 0..n {
                let e = eps[j] * scales[k];
                let d = grid[k] - a.x;
                row[k] -= a.w * e / (PI * (d * d + e * e));
            }
        }
    }

    let weights = extrapolation_weights(eps);
    let mut density: Vec<f64> = (0..n)
        .map(|k| {
            let v: f64 = weights.iter().zip(&poisson).map(|(c, row)| c * row[k]).sum();
            // Extrapolation overshoot next to support edges is clipped.
            v.max(0.0)
        })
        .collect();

    let mut edge = vec![EdgeSide::None; n];
    for &e in &contour.edges {
        if let Ok(k) = grid.binary_search_by(|x| x.total_cmp(&e)) {
            edge[k] = fit_edge_node(grid, &mut density, k);
        }
    }

    let segments = segments_from_nodes(grid, &density, &edge)?;
    let mass: f64 = atoms.iter().map(|a| a.w).sum::<f64>() + segments.iter().map(Segment::mass).sum::<f64>();
    if !(0.99..=1.01).contains(&mass) {
        return Err(Error::SupportCoverage { mass });
    }
    SpectralMeasure::with_mass_window(atoms, segments, 0.01)
}

/// Replace the value at edge node `k` so that its cell carries the mass
/// of a power law `c·d^(−α)` fitted to the two nearest interior nodes.
/// Reports which end of a run of positive density `k` is, if any.
fn fit_edge_node(grid: &[f64], density: &mut [f64], k: usize) -> EdgeSide {
    let n = grid.len();
    let positive = |i: usize| density[i] > 0.0;
    let right = k + 2 < n && positive(k + 1) && positive(k + 2);
    let left = k >= 2 && positive(k - 1) && positive(k - 2);
    let (i1, i2, side) = match (left, right) {
        (false, true) if k == 0 || !positive(k - 1) => (k + 1, k + 2, EdgeSide::Start),
        (true, false) if k + 1 == n || !positive(k + 1) => (k - 1, k - 2, EdgeSide::End),
        _ => return EdgeSide::None,
    };
    let e = grid[k];
    let (x1, x2) = ((grid[i1] - e).abs(), (grid[i2] - e).abs());
    let (d1, d2) = (density[i1], density[i2]);
    let alpha = (-(d2 / d1).ln() / (x2 / x1).ln()).clamp(-1.0, 0.9);
    let mass = d1 * x1 / (1.0 - alpha);
    density[k] = (2.0 * mass / x1 - d1).max(0.0);
    side
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EdgeSide {
    None,
    Start,
    End,
}

/// Split nonnegative node values into segments over the runs where the
/// density is positive. A run keeps one zero node on each side unless it
/// ends on a marked edge node.
pub(crate) fn segments_from_nodes(grid: &[f64], density: &[f64], edge: &[EdgeSide]) -> Result<Vec<Segment>> {
    let n = grid.len();
    let mut segments = Vec::new();
    let mut k = 0;
    while k < n {
        if density[k] <= 0.0 {
            k += 1;
            continue;
        }
        let start = if edge[k] == EdgeSide::Start { k } else { k.saturating_sub(1) };
        let mut end = k;
        // Runs separated by a single zero node are merged.
        while end + 1 < n
            && edge[end] != EdgeSide::End
            && edge[end + 1] != EdgeSide::Start
            && (density[end + 1] > 0.0 || (end + 2 < n && density[end + 2] > 0.0))
        {
            end += 1;
        }
        let stop = if edge[end] == EdgeSide::End { end } else { (end + 1).min(n - 1) };
        if stop > start {
            segments.push(Segment::new(grid[start..=stop].to_vec(), density[start..=stop].to_vec())?);
        }
        k = stop + 1;
    }
    Ok(segments)
}

fn detect_atoms<E: TransformEvaluator + ?Sized>(
    ev: &E,
    contour: &ContourSpec,
    scales: &[f64],
    top: &[f64],
    exec: Exec,
) -> Result<Vec<Atom>> {
    let grid = &contour.real_grid;
    let eps = &contour.epsilon_schedule;
    let n = grid.len();
    let rel = 1e-9;
    let candidates: Vec<usize> = (0..n)
        .filter(|&k| {
            let left = if k > 0 { top[k - 1] } else { 0.0 };
            let right = if k + 1 < n { top[k + 1] } else { 0.0 };
            let e = eps[0] * scales[k];
            let floor = ATOM_THRESHOLD * e / (PI * (spacing(grid, k).powi(2) / 4.0 + e * e));
            // A pole midway between two nodes makes them tie; both are kept
            // and the duplicate is merged below.
            top[k] > floor
                && top[k] >= left * (1.0 - rel)
                && top[k] >= right * (1.0 - rel)
                && (top[k] > left * (1.0 + rel) || top[k] > right * (1.0 + rel))
        })
        .collect();
    let weights = extrapolation_weights(eps);
    let found: Vec<Option<Atom>> = exec.map_indexed(candidates.len(), |c| {
        let k = candidates[c];
        let eps_min = eps[eps.len() - 1] * scales[k];
        let lo = if k > 0 { grid[k - 1] } else { grid[k] - spacing(grid, k) };
        let hi = if k + 1 < n { grid[k + 1] } else { grid[k] + spacing(grid, k) };
        // Pole search: Newton on 1/G, z ← z + G/G'. The height follows the
        // step down to a small floor; holding it at ε would bias the pole by
        // O(ε²) whenever other mass is nearby.
        let floor = 1e-6 * eps_min;
        let mut z = Complex64::new(grid[k], eps_min);
        for _ in 0..12 {
            let Ok((g, gp)) = ev.cauchy_and_derivative(z) else {
                return None;
            };
            let step = g / gp;
            let next = Complex64::new((z + step).re, (z + step).im.max(floor));
            if !next.re.is_finite() || next.re < lo || next.re > hi {
                return None;
            }
            let done = (next - z).norm() < 1e-15 * z.re.abs().max(1.0);
            z = next;
            if done {
                break;
            }
        }
        let a = z.re;
        let mut w = 0.0;
        for (c, &e) in weights.iter().zip(eps) {
            let e = e * scales[k];
            let g = ev.cauchy(Complex64::new(a, e)).ok()?;
            w += c * (-e * g.im);
        }
        (w >= ATOM_THRESHOLD).then(|| Atom::new(a, w))
    });
    let mut atoms: Vec<Atom> = found.into_iter().flatten().collect();
    atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
    // Neighboring candidates can converge to the same pole.
    atoms.dedup_by(|b, a| (a.x - b.x).abs() <= 1e-9 * a.x.abs().max(1.0));
    Ok(atoms)
}

fn spacing(grid: &[f64], k: usize) -> f64 {
    let n = grid.len();
    let l = if k > 0 { grid[k] - grid[k - 1] } else { 0.0 };
    let r = if k + 1 < n { grid[k + 1] - grid[k] } else { 0.0 };
    l.max(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{make_law, LawSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn semicircle_g(z: Complex64) -> Complex64 {
        // (z − √(z²−4))/2 with the branch that behaves like 1/z.
        let s = (z - 2.0).sqrt() * (z + 2.0).sqrt();
        (z - s) / 2.0
    }

    fn sc() -> SpectralMeasure {
        make_law(&LawSpec::Semicircle { sigma: 1.0 }, 16000).unwrap()
    }

    #[test]
    fn dirac_transform() {
        let g = cauchy_transform(&SpectralMeasure::dirac(0.0), c(0.0, 1.0)).unwrap();
        assert!((g - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn two_atom_on_real_axis() {
        let mu = make_law(&LawSpec::TwoAtom { p: 0.5, x1: -1.0, x2: 1.0 }, 0).unwrap();
        let g = cauchy_transform(&mu, c(2.0, 0.0)).unwrap();
        assert!((g - c(2.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!(matches!(cauchy_transform(&mu, c(1.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn semicircle_matches_closed_form() {
        let mu = sc();
        let g = cauchy_transform(&mu, c(0.0, 2.0)).unwrap();
        assert!((g - c(0.0, 1.0 - 2f64.sqrt())).norm() < 1e-8, "{g}");
        for z in [c(0.3, 0.1), c(-1.9, 0.01), c(5.0, 0.0), c(1.0, -0.5)] {
            let err = (cauchy_transform(&mu, z).unwrap() - semicircle_g(z)).norm();
            assert!(err < 1e-5, "z={z} err={err}");
        }
        assert!(matches!(cauchy_transform(&mu, c(1.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let mu = sc();
        let z = c(0.7, 0.3);
        let (_, gp) = cauchy_and_derivative(&mu, z).unwrap();
        let h = 1e-6;
        let fd = (cauchy_transform(&mu, z + h).unwrap() - cauchy_transform(&mu, z - h).unwrap()) / (2.0 * h);
        assert!((gp - fd).norm() < 1e-7, "{gp} vs {fd}");
        // far field uses the series branch
        let z = c(40.0, 3.0);
        let (_, gp) = cauchy_and_derivative(&mu, z).unwrap();
        let h = 1e-4;
        let fd = (cauchy_transform(&mu, z + h).unwrap() - cauchy_transform(&mu, z - h).unwrap()) / (2.0 * h);
        assert!((gp - fd).norm() < 1e-11, "{gp} vs {fd}");
    }

    #[test]
    fn principal_values() {
        let mu = sc();
        assert!(principal_value_transform(&mu, 0.0).unwrap().abs() < 1e-12);
        let pv = principal_value_transform(&mu, 1.0).unwrap();
        assert!((pv - 0.5).abs() < 1e-3, "{pv}");
        // node and non-node points agree with x/2 on the support
        for x in [-1.3, 0.123456, 1.7] {
            let pv = principal_value_transform(&mu, x).unwrap();
            assert!((pv - x / 2.0).abs() < 1e-4, "x={x} pv={pv}");
        }
        let ta = make_law(&LawSpec::TwoAtom { p: 0.5, x1: -1.0, x2: 1.0 }, 0).unwrap();
        assert_eq!(principal_value_transform(&ta, 0.0).unwrap(), 0.0);
        assert!(principal_value_transform(&ta, 1.0).is_err());
    }

    #[test]
    fn principal_value_is_boundary_real_part() {
        let mu = sc();
        let x = 0.8;
        let eps = [1e-3, 5e-4, 2.5e-4];
        let w = extrapolation_weights(&eps);
        let re: f64 = eps
            .iter()
            .zip(&w)
            .map(|(e, c)| c * cauchy_transform(&mu, Complex64::new(x, *e)).unwrap().re)
            .sum();
        assert!((re - principal_value_transform(&mu, x).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn principal_value_diverges_at_density_jump() {
        let u = make_law(&LawSpec::Uniform { lo: -1.0, hi: 1.0 }, 64).unwrap();
        assert!(matches!(principal_value_transform(&u, 1.0), Err(Error::Domain(_))));
        assert!(principal_value_transform(&u, 0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn inversion_examples() {
        let d0 = SpectralMeasure::dirac(0.0);
        let w = c(0.0, -0.5);
        assert!((invert_cauchy(&d0, w).unwrap() - 1.0 / w).norm() < 1e-12);

        let d3 = SpectralMeasure::dirac(3.0);
        let w = c(0.0, -0.25);
        assert!((invert_cauchy(&d3, w).unwrap() - (3.0 + 1.0 / w)).norm() < 1e-12);

        let mu = sc();
        let lam = invert_cauchy(&mu, c(0.0, 1.0 - 2f64.sqrt())).unwrap();
        assert!((lam - c(0.0, 2.0)).norm() < 1e-8, "{lam}");
    }

    #[test]
    fn extrapolation_weights_for_halving_schedule() {
        let w = extrapolation_weights(&DEFAULT_EPSILONS);
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((w[1] + 2.0).abs() < 1e-12);
        assert!((w[2] - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_dirac() {
        let contour = ContourSpec::uniform(-1.0, 1.0, 401).unwrap();
        let out = stieltjes_invert(&SpectralMeasure::dirac(0.0), &contour).unwrap();
        assert_eq!(out.atoms().len(), 1);
        assert!(out.atoms()[0].x.abs() < 1e-12);
        assert!((out.atoms()[0].w - 1.0).abs() < 1e-3);
        let off = stieltjes_invert(&SpectralMeasure::dirac(0.3337), &contour).unwrap();
        assert!((off.atoms()[0].x - 0.3337).abs() < 1e-10);
    }

    #[test]
    fn recovers_semicircle() {
        let mu = make_law(&LawSpec::Semicircle { sigma: 1.0 }, 2000).unwrap();
        let contour = ContourSpec::with_margin(-2.0, 2.0, 0.1, 2000).unwrap();
        let out = stieltjes_invert(&mu, &contour).unwrap();
        let l1 = crate::measure::l1_distance(&mu, &out);
        assert!(l1 <= 1e-2, "L1 = {l1}");
    }

    #[test]
    fn recovers_uniform_interior() {
        let mu = make_law(&LawSpec::Uniform { lo: -1.0, hi: 1.0 }, 2000).unwrap();
        let contour = ContourSpec::with_margin(-1.0, 1.0, 0.1, 2000).unwrap();
        let out = stieltjes_invert(&mu, &contour).unwrap();
        for x in [-0.8, -0.3, 0.0, 0.5, 0.9] {
            assert!((out.density_at(x) - 0.5).abs() < 1e-2, "x={x}: {}", out.density_at(x));
        }
    }

    #[test]
    fn narrow_grid_is_a_support_error() {
        let contour = ContourSpec::uniform(-0.5, 0.5, 200).unwrap();
        assert!(matches!(stieltjes_invert(&sc(), &contour), Err(Error::SupportCoverage { .. })));
    }
}
