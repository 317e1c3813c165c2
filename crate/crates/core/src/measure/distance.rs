//! CDF evaluation and distances between spectral measures.
//!
//! Between consecutive breakpoints (segment nodes and atom positions) every
//! density is linear, so each CDF is quadratic there; all integrals below
//! are evaluated in closed form on that partition.

use super::SpectralMeasure;

/// CDF of a measure tabulated on a breakpoint set that contains all of its
/// segment nodes and atom positions.
#[derive(Debug, Clone)]
pub struct CdfTable {
    bps: Vec<f64>,
    /// `F(b−)`.
    left: Vec<f64>,
    /// `F(b)`, right-continuous.
    right: Vec<f64>,
    /// Density just right of `b_i` and just left of `b_{i+1}`.
    rho_l: Vec<f64>,
    rho_r: Vec<f64>,
}

fn own_breakpoints(mu: &SpectralMeasure) -> Vec<f64> {
    let mut bps: Vec<f64> = mu.atoms().iter().map(|a| a.x).collect();
    for s in mu.segments() {
        bps.extend_from_slice(s.grid());
    }
    sort_dedup(bps)
}

fn sort_dedup(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl CdfTable {
    pub fn new(mu: &SpectralMeasure) -> Self {
        Self::on_breakpoints(mu, own_breakpoints(mu))
    }

    fn on_breakpoints(mu: &SpectralMeasure, bps: Vec<f64>) -> Self {
        let n = bps.len();
        let mut left = vec![0.0; n];
        let mut right = vec![0.0; n];
        let mut rho_l = vec![0.0; n.saturating_sub(1)];
        let mut rho_r = vec![0.0; n.saturating_sub(1)];
        let segs = mu.segments();
        let atoms = mu.atoms();
        let mut ai = 0;
        let mut acc = 0.0;
        for i in 0..n {
            left[i] = acc;
            while ai < atoms.len() && atoms[ai].x < bps[i] {
                ai += 1;
            }
            if ai < atoms.len() && atoms[ai].x == bps[i] {
                acc += atoms[ai].w;
            }
            right[i] = acc;
            if i + 1 < n {
                let (a, b) = (bps[i], bps[i + 1]);
                let mid = 0.5 * (a + b);
                let k = segs.partition_point(|s| s.hi() < mid);
                if k < segs.len() && segs[k].lo() <= mid {
                    rho_l[i] = segs[k].density_at(a);
                    rho_r[i] = segs[k].density_at(b);
                }
                acc += 0.5 * (rho_l[i] + rho_r[i]) * (b - a);
            }
        }
        CdfTable {
            bps,
            left,
            right,
            rho_l,
            rho_r,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.bps.is_empty() || x < self.bps[0] {
            return 0.0;
        }
        let i = self.bps.partition_point(|&b| b <= x) - 1;
        if i + 1 >= self.bps.len() {
            return self.right[i];
        }
        let t = x - self.bps[i];
        let dx = self.bps[i + 1] - self.bps[i];
        let (a, c) = (self.rho_l[i], (self.rho_r[i] - self.rho_l[i]) / (2.0 * dx));
        self.right[i] + a * t + c * t * t
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.bps.len();
        if p <= 0.0 {
            return self.bps[0];
        }
        let i = self.right.partition_point(|&f| f < p);
        if i >= n {
            return self.bps[n - 1];
        }
        if i == 0 || self.left[i] < p {
            return self.bps[i];
        }
        // p is reached inside (b_{i-1}, b_i).
        let j = i - 1;
        let dx = self.bps[i] - self.bps[j];
        let r = p - self.right[j];
        let a = self.rho_l[j];
        let c = (self.rho_r[j] - self.rho_l[j]) / (2.0 * dx);
        let disc = (a * a + 4.0 * c * r).max(0.0);
        let t = if (a + disc.sqrt()) > 0.0 {
            2.0 * r / (a + disc.sqrt())
        } else {
            dx
        };
        self.bps[j] + t.clamp(0.0, dx)
    }
}

/// `F_μ(x)`.
pub fn cdf(mu: &SpectralMeasure, x: f64) -> f64 {
    CdfTable::new(mu).eval(x)
}

struct Joint {
    bps: Vec<f64>,
    a: CdfTable,
    b: CdfTable,
}

impl Joint {
    fn new(mu: &SpectralMeasure, nu: &SpectralMeasure) -> Self {
        let mut bps = own_breakpoints(mu);
        bps.extend(own_breakpoints(nu));
        let bps = sort_dedup(bps);
        Joint {
            a: CdfTable::on_breakpoints(mu, bps.clone()),
            b: CdfTable::on_breakpoints(nu, bps.clone()),
            bps,
        }
    }

    /// `(Δ, D0, A, C)` of `F_μ − F_ν = D0 + A t + C t²` on interval `i`.
    fn diff_poly(&self, i: usize) -> (f64, f64, f64, f64) {
        let dx = self.bps[i + 1] - self.bps[i];
        let d0 = self.a.right[i] - self.b.right[i];
        let aa = self.a.rho_l[i] - self.b.rho_l[i];
        let cc = ((self.a.rho_r[i] - self.a.rho_l[i]) - (self.b.rho_r[i] - self.b.rho_l[i])) / (2.0 * dx);
        (dx, d0, aa, cc)
    }
}

/// `∫₀^Δ |c0 + c1 t + c2 t²| dt`, exact.
fn abs_quadratic_integral(dx: f64, c0: f64, c1: f64, c2: f64) -> f64 {
    let mut cuts = vec![0.0, dx];
    if c2.abs() > 0.0 {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc > 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (c1 + c1.signum() * sq);
            for r in [q / c2, if q != 0.0 { c0 / q } else { f64::NAN }] {
                if r > 0.0 && r < dx {
                    cuts.push(r);
                }
            }
        }
    } else if c1 != 0.0 {
        let r = -c0 / c1;
        if r > 0.0 && r < dx {
            cuts.push(r);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let anti = |t: f64| c0 * t + 0.5 * c1 * t * t + c2 * t * t * t / 3.0;
    cuts.windows(2).map(|w| (anti(w[1]) - anti(w[0])).abs()).sum()
}

/// Wasserstein-1 distance `∫ |F_μ − F_ν| dx`.
pub fn wasserstein1(mu: &SpectralMeasure, nu: &SpectralMeasure) -> f64 {
    let j = Joint::new(mu, nu);
    (0..j.bps.len().saturating_sub(1))
        .map(|i| {
            let (dx, d0, a, c) = j.diff_poly(i);
            abs_quadratic_integral(dx, d0, a, c)
        })
        .sum()
}

/// Kolmogorov–Smirnov distance `sup |F_μ − F_ν|`, over breakpoints (both
/// one-sided limits) and interior extrema of each quadratic piece.
pub fn ks_distance(mu: &SpectralMeasure, nu: &SpectralMeasure) -> f64 {
    let j = Joint::new(mu, nu);
    let n = j.bps.len();
    let mut best: f64 = 0.0;
    for i in 0..n {
        best = best
            .max((j.a.left[i] - j.b.left[i]).abs())
            .max((j.a.right[i] - j.b.right[i]).abs());
        if i + 1 < n {
            let (dx, d0, a, c) = j.diff_poly(i);
            if c != 0.0 {
                let t = -a / (2.0 * c);
                if t > 0.0 && t < dx {
                    best = best.max((d0 + a * t + c * t * t).abs());
                }
            }
        }
    }
    best
}

/// `∫ |ρ_μ − ρ_ν| dx` plus the total variation of the atomic parts; atoms
/// closer than `1e-6·max(1, |x|)` are treated as the same location.
pub fn l1_distance(mu: &SpectralMeasure, nu: &SpectralMeasure) -> f64 {
    let j = Joint::new(mu, nu);
    let mut total = 0.0;
    for i in 0..j.bps.len().saturating_sub(1) {
        let dx = j.bps[i + 1] - j.bps[i];
        let e0 = j.a.rho_l[i] - j.b.rho_l[i];
        let e1 = j.a.rho_r[i] - j.b.rho_r[i];
        total += abs_quadratic_integral(dx, e0, (e1 - e0) / dx, 0.0);
    }
    let mut atoms: Vec<(f64, f64)> = mu
        .atoms()
        .iter()
        .map(|a| (a.x, a.w))
        .chain(nu.atoms().iter().map(|a| (a.x, -a.w)))
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut k = 0;
    while k < atoms.len() {
        let start = atoms[k].0;
        let mut net = 0.0;
        while k < atoms.len() && atoms[k].0 - start <= 1e-6 * start.abs().max(1.0) {
            net += atoms[k].1;
            k += 1;
        }
        total += net.abs();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{make_law, Atom, LawSpec, Segment};

    fn law(spec: LawSpec) -> SpectralMeasure {
        make_law(&spec, 400).unwrap()
    }

    #[test]
    fn unit_transport_between_diracs() {
        let a = SpectralMeasure::dirac(0.0);
        let b = SpectralMeasure::dirac(1.0);
        assert!((wasserstein1(&a, &b) - 1.0).abs() < 1e-15);
        assert!((ks_distance(&a, &b) - 1.0).abs() < 1e-15);
        assert_eq!(wasserstein1(&a, &a), 0.0);
    }

    #[test]
    fn cdf_is_right_continuous_at_atoms() {
        let mu = law(LawSpec::TwoAtom { p: 0.25, x1: -1.0, x2: 1.0 });
        assert_eq!(mu.cdf(-1.0 - 1e-12), 0.0);
        assert_eq!(mu.cdf(-1.0), 0.25);
        assert_eq!(mu.cdf(0.5), 0.25);
        assert_eq!(mu.cdf(1.0), 1.0);
    }

    #[test]
    fn uniform_cdf_and_quantile() {
        let mu = law(LawSpec::Uniform { lo: -1.0, hi: 1.0 });
        assert!((mu.cdf(0.0) - 0.5).abs() < 1e-12);
        assert!((mu.cdf(0.5) - 0.75).abs() < 1e-12);
        assert!((mu.quantile(0.75) - 0.5).abs() < 1e-12);
        assert_eq!(mu.cdf(5.0), 1.0);
    }

    #[test]
    fn quantile_inverts_cdf_on_curved_density() {
        let mu = law(LawSpec::Semicircle { sigma: 1.0 });
        for p in [0.01, 0.2, 0.5, 0.77, 0.99] {
            let x = mu.quantile(p);
            assert!((mu.cdf(x) - p).abs() < 1e-12, "p={p}");
        }
    }

    /// Dense-grid oracle: sup over 200k uniform probes of |F_μ − F_ν|,
    /// with F from the closed forms.
    #[test]
    fn ks_semicircle_vs_uniform_against_dense_oracle() {
        let sc = make_law(&LawSpec::Semicircle { sigma: 1.0 }, 2000).unwrap();
        let un = make_law(&LawSpec::Uniform { lo: -2.0, hi: 2.0 }, 2000).unwrap();
        let f_sc = |x: f64| 0.5 + (x * (4.0 - x * x).sqrt() / 4.0 + (x / 2.0).asin()) / std::f64::consts::PI;
        let f_un = |x: f64| (x + 2.0) / 4.0;
        let oracle = (0..=200_000)
            .map(|k| -2.0 + 4.0 * k as f64 / 200_000.0)
            .map(|x| (f_sc(x) - f_un(x)).abs())
            .fold(0.0, f64::max);
        let ks = ks_distance(&sc, &un);
        assert!(ks > 0.0 && ks < 0.2, "ks = {ks}");
        assert!((ks - oracle).abs() < 1e-4, "ks {ks} oracle {oracle}");
    }

    #[test]
    fn wasserstein_of_shift_is_shift() {
        let mu = law(LawSpec::Semicircle { sigma: 1.0 });
        let nu = mu.affine_map(1.0, 0.3).unwrap();
        assert!((wasserstein1(&mu, &nu) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn l1_matches_atoms_and_densities() {
        let a = SpectralMeasure::new(vec![Atom::new(0.0, 0.5)], vec![Segment::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap()]).unwrap();
        let b = SpectralMeasure::new(
            vec![Atom::new(1e-9, 0.25)],
            vec![Segment::new(vec![1.0, 2.0], vec![0.25, 1.25]).unwrap()],
        )
        .unwrap();
        // Densities differ by 0.25 - t on [0,1]: ∫|.| = 0.25²/2 + 0.75²/2 = 0.3125.
        assert!((l1_distance(&a, &b) - (0.3125 + 0.25)).abs() < 1e-12);
    }

    #[test]
    fn abs_quadratic_integral_handles_two_roots() {
        // (t-1)(t-2) on [0,3]: ∫|.| = 5/6 + 1/6 + 5/6.
        let v = abs_quadratic_integral(3.0, 2.0, -3.0, 1.0);
        assert!((v - 11.0 / 6.0).abs() < 1e-14);
    }
}
