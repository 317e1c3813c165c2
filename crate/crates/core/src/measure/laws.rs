//! Closed-form catalog of spectral laws.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Atom, Segment, SpectralMeasure};
use crate::error::{Error, Result};

/// Catalog entry, tagged by `kind` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawSpec {
    /// Density `√(4σ²−x²)/(2πσ²)` on `[−2σ, 2σ]`.
    Semicircle { sigma: f64 },
    /// Limit spectrum of `(1/n) X X†` with `N/n → ratio`.
    MarchenkoPastur { ratio: f64 },
    /// Mass `p` at `x1`, `1−p` at `x2`.
    TwoAtom { p: f64, x1: f64, x2: f64 },
    /// Density `1/(π√(w²−x²))` on `[−w, w]`.
    Arcsine { half_width: f64 },
    AtomList { atoms: Vec<Atom> },
    Uniform { lo: f64, hi: f64 },
}

impl LawSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            LawSpec::Semicircle { sigma } => sigma.is_finite() && *sigma > 0.0,
            LawSpec::MarchenkoPastur { ratio } => ratio.is_finite() && *ratio > 0.0,
            LawSpec::TwoAtom { p, x1, x2 } => (0.0..=1.0).contains(p) && x1.is_finite() && x2.is_finite(),
            LawSpec::Arcsine { half_width } => half_width.is_finite() && *half_width > 0.0,
            LawSpec::AtomList { atoms } => {
                !atoms.is_empty() && atoms.iter().all(|a| a.x.is_finite() && a.w.is_finite() && a.w >= 0.0)
            }
            LawSpec::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("invalid law parameters: {self:?}")))
        }
    }

    pub fn has_continuous_part(&self) -> bool {
        !matches!(self, LawSpec::TwoAtom { .. } | LawSpec::AtomList { .. })
    }

    /// Laws whose density is unbounded at a support edge.
    pub fn is_edge_singular(&self) -> bool {
        match self {
            LawSpec::Arcsine { .. } => true,
            LawSpec::MarchenkoPastur { ratio } => (*ratio - 1.0).abs() < 1e-12,
            _ => false,
        }
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            LawSpec::Semicircle { sigma } => (-2.0 * sigma, 2.0 * sigma),
            LawSpec::MarchenkoPastur { ratio } => {
                let (a, b) = mp_edges(ratio);
                if ratio > 1.0 {
                    (0.0, b)
                } else {
                    (a, b)
                }
            }
            LawSpec::TwoAtom { p, x1, x2 } => {
                let mut pts = vec![];
                if p > 0.0 {
                    pts.push(x1);
                }
                if p < 1.0 {
                    pts.push(x2);
                }
                hull(&pts)
            }
            LawSpec::Arcsine { half_width } => (-half_width, half_width),
            LawSpec::AtomList { ref atoms } => {
                hull(&atoms.iter().filter(|a| a.w > 0.0).map(|a| a.x).collect::<Vec<_>>())
            }
            LawSpec::Uniform { lo, hi } => (lo, hi),
        }
    }

    pub fn label(&self) -> String {
        match self {
            LawSpec::Semicircle { sigma } => format!("semicircle({sigma})"),
            LawSpec::MarchenkoPastur { ratio } => format!("marchenko_pastur({ratio})"),
            LawSpec::TwoAtom { p, x1, x2 } => format!("two_atom({p},{x1},{x2})"),
            LawSpec::Arcsine { half_width } => format!("arcsine({half_width})"),
            LawSpec::AtomList { atoms } => format!("atom_list[{}]", atoms.len()),
            LawSpec::Uniform { lo, hi } => format!("uniform({lo},{hi})"),
        }
    }
}

fn hull(pts: &[f64]) -> (f64, f64) {
    pts.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn mp_edges(c: f64) -> (f64, f64) {
    let r = c.sqrt();
    ((1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r))
}

/// Build a normalized measure from a catalog law. `grid_points` is ignored
/// for purely atomic laws and must be at least 16 otherwise.
///
/// Continuous laws are sampled on a cosine-stretched grid (nodes cluster at
/// the edges). Cells adjacent to an integrable edge singularity get an edge
/// value chosen so that their trapezoid mass equals the exact cell mass.
/// The remaining interpolation deficit is removed by renormalization and
/// recorded in [`SpectralMeasure::renormalization`].
pub fn make_law(spec: &LawSpec, grid_points: usize) -> Result<SpectralMeasure> {
    spec.validate()?;
    if spec.has_continuous_part() && grid_points < 16 {
        return Err(Error::validation(format!(
            "grid_points must be at least 16 for {}, got {grid_points}",
            spec.label()
        )));
    }
    let n = grid_points;
    let (atoms, segments) = match *spec {
        LawSpec::Semicircle { sigma } => {
            let r = 2.0 * sigma;
            let dens = move |x: f64| (r * r - x * x).max(0.0).sqrt() / (2.0 * PI * sigma * sigma);
            (vec![], vec![sample(-r, r, n, dens, EdgeKind::Regular, EdgeKind::Regular)?])
        }
        LawSpec::MarchenkoPastur { ratio: c } => {
            let (a, b) = mp_edges(c);
            let dens = move |x: f64| {
                if x <= a || x >= b {
                    0.0
                } else {
                    ((b - x) * (x - a)).sqrt() / (2.0 * PI * c * x)
                }
            };
            let lower = if a == 0.0 || spec.is_edge_singular() {
                EdgeKind::InverseSqrt
            } else {
                EdgeKind::Regular
            };
            let seg = sample(a.max(0.0), b, n, dens, lower, EdgeKind::Regular)?;
            let atoms = if c > 1.0 {
                vec![Atom::new(0.0, 1.0 - 1.0 / c)]
            } else {
                vec![]
            };
            (atoms, vec![seg])
        }
        LawSpec::TwoAtom { p, x1, x2 } => {
            let atoms = if x1 == x2 {
                vec![Atom::new(x1, 1.0)]
            } else {
                vec![Atom::new(x1, p), Atom::new(x2, 1.0 - p)]
            };
            (atoms, vec![])
        }
        LawSpec::Arcsine { half_width: w } => {
            let dens = move |x: f64| {
                let q = w * w - x * x;
                if q <= 0.0 {
                    0.0
                } else {
                    1.0 / (PI * q.sqrt())
                }
            };
            (vec![], vec![sample(-w, w, n, dens, EdgeKind::InverseSqrt, EdgeKind::InverseSqrt)?])
        }
        LawSpec::AtomList { ref atoms } => {
            let total: f64 = atoms.iter().map(|a| a.w).sum();
            if total <= 0.0 {
                return Err(Error::validation("atom_list has zero total weight"));
            }
            let mut merged: Vec<Atom> = Vec::new();
            let mut sorted = atoms.clone();
            sorted.sort_by(|a, b| a.x.total_cmp(&b.x));
            for a in sorted {
                match merged.last_mut() {
                    Some(last) if last.x == a.x => last.w += a.w,
                    _ => merged.push(a),
                }
            }
            for a in &mut merged {
                a.w /= total;
            }
            (merged, vec![])
        }
        LawSpec::Uniform { lo, hi } => {
            let d = 1.0 / (hi - lo);
            let grid: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
            let mut grid = grid;
            grid[n - 1] = hi;
            (vec![], vec![Segment::new(grid, vec![d; n])?])
        }
    };
    // Interpolation deficits of a few percent at most on coarse grids.
    SpectralMeasure::with_mass_window(atoms, segments, 0.05)
}

#[derive(Clone, Copy, PartialEq)]
enum EdgeKind {
    Regular,
    /// Density behaves like `1/√(distance to edge)`.
    InverseSqrt,
}

fn cosine_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut g: Vec<f64> = (0..n)
        .map(|k| mid - half * (PI * k as f64 / (n - 1) as f64).cos())
        .collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}

fn sample(
    lo: f64,
    hi: f64,
    n: usize,
    dens: impl Fn(f64) -> f64,
    left: EdgeKind,
    right: EdgeKind,
) -> Result<Segment> {
    let grid = cosine_grid(lo, hi, n);
    let mut density: Vec<f64> = grid.iter().map(|&x| dens(x)).collect();
    if left == EdgeKind::InverseSqrt {
        let h = grid[1] - grid[0];
        let mass = edge_cell_mass(&dens, grid[0], h);
        density[0] = (2.0 * mass / h - density[1]).max(0.0);
    }
    if right == EdgeKind::InverseSqrt {
        let h = grid[n - 1] - grid[n - 2];
        let mass = edge_cell_mass(&dens, grid[n - 1], -h);
        density[n - 1] = (2.0 * mass / h - density[n - 2]).max(0.0);
    }
    Segment::new(grid, density)
}

/// `∫ ρ` over the cell between `edge` and `edge + h` (h may be negative),
/// for `ρ` with an inverse square-root singularity at `edge`. The
/// substitution `x = edge ± t²` makes the integrand smooth.
fn edge_cell_mass(dens: &impl Fn(f64) -> f64, edge: f64, h: f64) -> f64 {
    let sign = h.signum();
    let tmax = h.abs().sqrt();
    let (nodes, weights) = gauss_legendre(16);
    nodes
        .iter()
        .zip(&weights)
        .map(|(&u, &wt)| {
            let t = 0.5 * tmax * (u + 1.0);
            wt * 0.5 * tmax * dens(edge + sign * t * t) * 2.0 * t
        })
        .sum()
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Gauss–Legendre with substitution at both edges, used as
    /// an independent quadrature for closed-form densities.
    fn quad(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        // x = lo + (hi-lo) (1 - cos θ)/2 removes inverse-sqrt edge behavior.
        let (nodes, weights) = gauss_legendre(64);
        let panels = 64;
        let mut total = 0.0;
        for p in 0..panels {
            let a = PI * p as f64 / panels as f64;
            let b = PI * (p + 1) as f64 / panels as f64;
            for (u, w) in nodes.iter().zip(&weights) {
                let th = 0.5 * (a + b) + 0.5 * (b - a) * u;
                let x = lo + (hi - lo) * (1.0 - th.cos()) / 2.0;
                let jac = (hi - lo) * th.sin() / 2.0;
                total += w * 0.5 * (b - a) * f(x) * jac;
            }
        }
        total
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn two_atom_catalog_entry() {
        let mu = make_law(&LawSpec::TwoAtom { p: 0.5, x1: -1.0, x2: 1.0 }, 0).unwrap();
        assert_eq!(mu.atoms(), &[Atom::new(-1.0, 0.5), Atom::new(1.0, 0.5)]);
        assert!(mu.segments().is_empty());
    }

    #[test]
    fn semicircle_is_normalized_on_its_support() {
        let mu = make_law(&LawSpec::Semicircle { sigma: 1.0 }, 2000).unwrap();
        assert!((mu.mass() - 1.0).abs() < 1e-6);
        assert_eq!(mu.support(), (-2.0, 2.0));
        assert!((mu.renormalization() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn marchenko_pastur_one_against_quadrature() {
        let dens = |x: f64| if x <= 0.0 || x >= 4.0 { 0.0 } else { (x * (4.0 - x)).sqrt() / (2.0 * PI * x) };
        let mass = quad(dens, 0.0, 4.0);
        let m1 = quad(|x| x * dens(x), 0.0, 4.0);
        assert!((mass - 1.0).abs() < 1e-8, "quadrature mass {mass}");
        assert!((m1 - 1.0).abs() < 1e-8, "quadrature m1 {m1}");

        let mu = make_law(&LawSpec::MarchenkoPastur { ratio: 1.0 }, 2000).unwrap();
        assert_eq!(mu.support(), (0.0, 4.0));
        assert!((mu.mass() - 1.0).abs() < 1e-12);
        // Interpolation of the 1/sqrt(x) edge leaves an O(1/n) surplus.
        assert!((mu.renormalization() - 1.0).abs() < 1e-3, "{}", mu.renormalization());
        assert!((mu.moment(1) - m1).abs() < 1e-3);
        assert!((mu.density_at(1.0) - dens(1.0)).abs() < 1e-4);
    }

    #[test]
    fn marchenko_pastur_above_one_has_zero_atom() {
        let mu = make_law(&LawSpec::MarchenkoPastur { ratio: 2.0 }, 500).unwrap();
        assert_eq!(mu.atoms().len(), 1);
        assert!((mu.atoms()[0].w - 0.5).abs() < 1e-4);
        // m1 = 1 and m2 = 1 + c for every ratio.
        assert!((mu.moment(1) - 1.0).abs() < 1e-4);
        assert!((mu.moment(2) - 3.0).abs() < 1e-3);
    }

    #[test]
    fn arcsine_moments_are_central_binomials() {
        let mu = make_law(&LawSpec::Arcsine { half_width: 2.0 }, 2000).unwrap();
        assert!((mu.moment(2) - 2.0).abs() < 2e-3);
        assert!((mu.moment(4) - 6.0).abs() < 1e-2);
    }

    #[test]
    fn invalid_parameters_rejected() {
        for spec in [
            LawSpec::Semicircle { sigma: 0.0 },
            LawSpec::MarchenkoPastur { ratio: -1.0 },
            LawSpec::TwoAtom { p: 1.5, x1: 0.0, x2: 1.0 },
            LawSpec::Uniform { lo: 1.0, hi: 1.0 },
        ] {
            assert!(matches!(make_law(&spec, 100), Err(Error::Validation(_))), "{spec:?}");
        }
        assert!(make_law(&LawSpec::Semicircle { sigma: 1.0 }, 8).is_err());
    }

    #[test]
    fn law_spec_json_shape() {
        let s: LawSpec = serde_json::from_str(r#"{"kind":"semicircle","sigma":1.5}"#).unwrap();
        assert_eq!(s, LawSpec::Semicircle { sigma: 1.5 });
        let s: LawSpec = serde_json::from_str(r#"{"kind":"two_atom","p":0.5,"x1":-1,"x2":1}"#).unwrap();
        assert_eq!(s, LawSpec::TwoAtom { p: 0.5, x1: -1.0, x2: 1.0 });
    }
}
