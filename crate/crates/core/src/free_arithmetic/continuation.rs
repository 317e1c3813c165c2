//! Newton continuation for subordination-type systems.
//!
//! Each free-convolution pipeline reduces, at a point `z` of the upper
//! half-plane, to a small analytic system `F(z, u) = 0` in one or two
//! complex unknowns. Far from the real axis the solution is close to an
//! asymptotic seed; closer in it is tracked by continuation, either along
//! the contour (warm start from the neighboring node) or vertically from
//! above.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::stieltjes::{ContourSpec, TransformEvaluator};

pub(crate) type Pair = [Complex64; 2];
pub(crate) type Jacobian = [[Complex64; 2]; 2];

/// Residual, Jacobian, and the magnitude of the terms in each equation.
pub(crate) type System = (Pair, Jacobian, [f64; 2]);

const NEWTON_TOLERANCE: f64 = 1e-13;
/// A stalled iterate is still accepted when its residual is this small.
const STALL_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 60;
const MAX_HALVINGS: usize = 20;
/// Largest per-iteration step relative to `max(1, |u|)`.
const STEP_CAP: f64 = 0.5;

pub(crate) trait Subordination: Sync {
    const STAGE: &'static str;

    /// Residual and Jacobian in `u`; `None` where an input transform is
    /// undefined. Residuals are judged relative to the returned term sizes.
    fn system(&self, z: Complex64, u: Pair) -> Option<System>;

    /// `∂F/∂z` at a solution.
    fn dz(&self, z: Complex64, u: Pair) -> Option<Pair>;

    /// Solution asymptotics for large `|z|`.
    fn seed(&self, z: Complex64) -> Pair;

    /// `G(z)` and the derivative map `(∂G/∂u0, ∂G/∂u1, ∂G/∂z)` at a solution.
    fn output(&self, z: Complex64, u: Pair) -> Option<(Complex64, Pair, Complex64)>;

    /// Branch test on a converged solution.
    fn admissible(&self, z: Complex64, u: Pair) -> bool;

    fn support_hint(&self) -> (f64, f64);
}

fn norm(v: Pair) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

fn relative(f: Pair, w: [f64; 2]) -> f64 {
    let r0 = if w[0] > 0.0 { f[0].norm() / w[0] } else { f[0].norm() };
    let r1 = if w[1] > 0.0 { f[1].norm() / w[1] } else { f[1].norm() };
    r0.max(r1)
}

fn solve(j: Jacobian, b: Pair) -> Option<Pair> {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let scale = j.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
    if !det.is_finite() || det.norm() <= 1e-300 || det.norm() <= 1e-15 * scale * scale {
        return None;
    }
    Some([
        (b[0] * j[1][1] - b[1] * j[0][1]) / det,
        (j[0][0] * b[1] - j[1][0] * b[0]) / det,
    ])
}

pub(crate) struct Failure {
    last: Pair,
    residual: f64,
    iterations: usize,
}

impl Failure {
    fn into_error(self, stage: &'static str, z: Complex64) -> Error {
        Error::Pipeline {
            stage,
            z,
            source: Box::new(Error::InversionFailure {
                last: self.last[0],
                residual: self.residual,
                iterations: self.iterations,
            }),
        }
    }
}

/// Damped Newton from `start`; the converged point must be admissible.
pub(crate) fn newton<P: Subordination>(p: &P, z: Complex64, start: Pair) -> Result<Pair, Failure> {
    let tol = NEWTON_TOLERANCE;
    let fail = |last, residual, iterations| Failure {
        last,
        residual,
        iterations,
    };
    let mut u = start;
    let Some((mut f, mut j, w)) = p.system(z, u) else {
        return Err(fail(u, f64::INFINITY, 0));
    };
    let mut res = relative(f, w);
    for it in 0..MAX_ITERATIONS {
        if res <= tol {
            break;
        }
        let Some(mut step) = solve(j, f) else {
            return Err(fail(u, res, it));
        };
        let cap = STEP_CAP * (1.0 + norm(u));
        let len = norm(step);
        if len > cap {
            step = [step[0] * (cap / len), step[1] * (cap / len)];
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let cand = [u[0] - step[0] * t, u[1] - step[1] * t];
            if let Some((fc, jc, wc)) = p.system(z, cand) {
                let rc = relative(fc, wc);
                if rc.is_finite() && rc < res {
                    u = cand;
                    f = fc;
                    j = jc;
                    res = rc;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            if res <= STALL_TOLERANCE {
                break;
            }
            return Err(fail(u, res, it + 1));
        }
    }
    if res > STALL_TOLERANCE || !p.admissible(z, u) {
        return Err(fail(u, res, MAX_ITERATIONS));
    }
    Ok(u)
}

/// Height from which the asymptotic seed is trusted.
pub(crate) fn seed_height<P: Subordination>(p: &P) -> f64 {
    let (lo, hi) = p.support_hint();
    4.0 * (lo.abs().max(hi.abs()) + (hi - lo) + 1.0)
}

/// Track the solution down the vertical line `Re z = x` from `(y0, u0)`
/// to `Im z = y`, shrinking steps on failure.
pub(crate) fn descend<P: Subordination>(p: &P, x: f64, y: f64, from: Option<(f64, Pair)>) -> Result<Pair, Failure> {
    let (mut y_cur, mut u) = match from {
        Some(s) => s,
        None => {
            let y0 = seed_height(p).max(y);
            let z0 = Complex64::new(x, y0);
            (y0, newton(p, z0, p.seed(z0))?)
        }
    };
    let mut ratio: f64 = 0.5;
    let mut prev: Option<(f64, Pair)> = None;
    while y_cur > y {
        let y_next = (y_cur * ratio).max(y);
        let z = Complex64::new(x, y_next);
        // Secant predictor along the path once two points are known.
        let guess = match prev {
            Some((yp, up)) => {
                let s = (y_next - y_cur) / (y_cur - yp);
                [u[0] + (u[0] - up[0]) * s, u[1] + (u[1] - up[1]) * s]
            }
            None => u,
        };
        let attempt = newton(p, z, guess).or_else(|_| newton(p, z, u));
        match attempt {
            Ok(v) => {
                prev = Some((y_cur, u));
                y_cur = y_next;
                u = v;
                ratio = (ratio * ratio).max(0.05);
            }
            Err(e) => {
                ratio = ratio.sqrt();
                if ratio > 0.999 {
                    return Err(e);
                }
            }
        }
    }
    Ok(u)
}

/// A pipeline exposed as a Cauchy transform.
pub(crate) struct Pipeline<P> {
    pub problem: P,
}

impl<P: Subordination> Pipeline<P> {
    pub fn new(problem: P) -> Self {
        Pipeline { problem }
    }

    fn transform_at(&self, z: Complex64, u: Pair) -> Result<(Complex64, Complex64)> {
        let p = &self.problem;
        let err = || Error::Pipeline {
            stage: P::STAGE,
            z,
            source: Box::new(Error::Numeric("singular system at solution".into())),
        };
        let (_, j, _) = p.system(z, u).ok_or_else(err)?;
        let fz = p.dz(z, u).ok_or_else(err)?;
        let du = solve(j, fz).ok_or_else(err)?;
        let (g, dg, gz) = p.output(z, u).ok_or_else(err)?;
        // du/dz = −J⁻¹ ∂F/∂z
        let gp = gz - dg[0] * du[0] - dg[1] * du[1];
        Ok((g, gp))
    }

    fn solve_at(&self, z: Complex64) -> Result<Pair> {
        descend(&self.problem, z.re, z.im, None).map_err(|f| f.into_error(P::STAGE, z))
    }

    /// Solve on every contour node: a warm-started sweep along the first
    /// epsilon, then a per-node descent to each later epsilon.
    pub fn sweep(&self, contour: &ContourSpec, exec: Exec) -> Result<Vec<Vec<Complex64>>> {
        let p = &self.problem;
        let grid = &contour.real_grid;
        let eps = &contour.epsilon_schedule;
        let scales = contour.node_scales();
        let height = |j: usize, k: usize| eps[j] * scales[k];
        let mut rows = Vec::with_capacity(eps.len());

        let mut sol: Vec<Pair> = Vec::with_capacity(grid.len());
        let mut last: Option<Pair> = None;
        for (k, &x) in grid.iter().enumerate() {
            let z = Complex64::new(x, height(0, k));
            let warm = last.and_then(|u| newton(p, z, u).ok());
            let u = match warm {
                Some(u) => u,
                None => descend(p, x, z.im, None).map_err(|f| f.into_error(P::STAGE, z))?,
            };
            sol.push(u);
            last = Some(u);
        }
        rows.push(self.outputs(grid, |k| height(0, k), &sol, exec)?);

        for j in 1..eps.len() {
            sol = exec.try_map_indexed(grid.len(), |k| {
                let z = Complex64::new(grid[k], height(j, k));
                newton(p, z, sol[k])
                    .or_else(|_| descend(p, grid[k], z.im, Some((height(j - 1, k), sol[k]))))
                    .map_err(|f| f.into_error(P::STAGE, z))
            })?;
            rows.push(self.outputs(grid, |k| height(j, k), &sol, exec)?);
        }
        Ok(rows)
    }

    fn outputs<H>(&self, grid: &[f64], height: H, sol: &[Pair], exec: Exec) -> Result<Vec<Complex64>>
    where
        H: Fn(usize) -> f64 + Sync,
    {
        exec.try_map_indexed(grid.len(), |k| {
            let z = Complex64::new(grid[k], height(k));
            self.problem
                .output(z, sol[k])
                .map(|o| o.0)
                .ok_or_else(|| Error::Pipeline {
                    stage: P::STAGE,
                    z,
                    source: Box::new(Error::Numeric("output undefined at solution".into())),
                })
        })
    }
}

impl<P: Subordination> TransformEvaluator for Pipeline<P> {
    fn cauchy_and_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        if z.im == 0.0 {
            return Err(Error::domain(format!(
                "{} evaluates off the real axis only, got z = {z}",
                P::STAGE
            )));
        }
        if z.im < 0.0 {
            let (g, gp) = self.cauchy_and_derivative(z.conj())?;
            return Ok((g.conj(), gp.conj()));
        }
        let u = self.solve_at(z)?;
        self.transform_at(z, u)
    }

    fn support_hint(&self) -> (f64, f64) {
        self.problem.support_hint()
    }

    fn sample_contour(&self, contour: &ContourSpec, exec: Exec) -> Result<Vec<Vec<Complex64>>> {
        self.sweep(contour, exec)
    }
}
