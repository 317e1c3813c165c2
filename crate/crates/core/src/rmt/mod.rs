//! Monte Carlo random-matrix experiments.
//!
//! Every random draw comes from a ChaCha8 stream selected by
//! `(base_seed, trial, slot, purpose)`, so trials are reproducible and can
//! run in any order. Results are gathered in trial order.
//!
//! Sums and products only need the spectrum of `M₁ + Ω M₂ Ω†` or
//! `A^{1/2} Ω B Ω† A^{1/2}` in law. A rotation is skipped when the matrix it
//! would act on is already unitarily invariant in law (GUE, Wishart, and
//! fixed spectra, which are sampled Haar-rotated), and a fixed-spectrum
//! partner of such a matrix is then used in its eigenbasis. This keeps the
//! cost of an `N = 1024` trial to one eigensolve.

pub mod linalg;

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_arithmetic::ExternalFieldSpec;
use crate::measure::io::format_float;
use crate::measure::{Atom, Segment, SpectralMeasure};
use crate::par::Exec;
use crate::report::ReportDocument;
use crate::stieltjes::principal_value_transform;

pub use linalg::{haar_unitary, hermitian_eigen, hermitian_eigenvalues, CMatrix, HermitianMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Spectrum converges to semicircle(σ) on `[−2σ, 2σ]`.
    Gue { sigma: f64 },
    /// Midpoint quantiles of the measure, Haar-rotated.
    FixedSpectrum { measure: SpectralMeasure },
    /// `XX†/n` with `X` an `N × n` standard complex Gaussian, `n = round(N/c)`.
    Wishart { ratio: f64 },
    /// `GUE(σ) + σ² diag(a_j)` with `a_j` the field eigenvalues.
    ShiftedGue { sigma: f64, field: ExternalFieldSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    #[serde(flatten)]
    pub kind: EnsembleKind,
    pub dim: usize,
    #[serde(default)]
    pub base_seed: u64,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, dim: usize, base_seed: u64) -> Result<Self> {
        let spec = EnsembleSpec { kind, dim, base_seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gue(sigma: f64, dim: usize, base_seed: u64) -> Result<Self> {
        Self::new(EnsembleKind::Gue { sigma }, dim, base_seed)
    }

    pub fn fixed(measure: SpectralMeasure, dim: usize, base_seed: u64) -> Result<Self> {
        Self::new(EnsembleKind::FixedSpectrum { measure }, dim, base_seed)
    }

    pub fn wishart(ratio: f64, dim: usize, base_seed: u64) -> Result<Self> {
        Self::new(EnsembleKind::Wishart { ratio }, dim, base_seed)
    }

    pub fn shifted_gue(sigma: f64, field: ExternalFieldSpec, dim: usize, base_seed: u64) -> Result<Self> {
        Self::new(EnsembleKind::ShiftedGue { sigma, field }, dim, base_seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::validation(format!("ensemble dimension {} < 2", self.dim)));
        }
        match &self.kind {
            EnsembleKind::Gue { sigma } | EnsembleKind::ShiftedGue { sigma, .. } if !(*sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::validation(format!("GUE sigma must be positive, got {sigma}")))
            }
            EnsembleKind::Wishart { ratio } if !(*ratio > 0.0 && ratio.is_finite()) => {
                Err(Error::validation(format!("Wishart ratio must be positive, got {ratio}")))
            }
            _ => Ok(()),
        }
    }

    /// True when the sampled matrix has a unitarily invariant law.
    pub fn is_invariant(&self) -> bool {
        !matches!(self.kind, EnsembleKind::ShiftedGue { .. })
    }

    fn quantiles(&self) -> Option<Vec<f64>> {
        match &self.kind {
            EnsembleKind::FixedSpectrum { measure } => Some(measure.midpoint_quantiles(self.dim)),
            _ => None,
        }
    }

    fn wishart_columns(&self) -> Option<usize> {
        match self.kind {
            EnsembleKind::Wishart { ratio } => Some(((self.dim as f64 / ratio).round() as usize).max(1)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Purpose {
    Gaussian = 1,
    Haar = 2,
    Rotation = 3,
}

/// Stream for one `(trial, slot, purpose)` triple under `base_seed`.
fn stream(base_seed: u64, trial: usize, slot: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(((trial as u64) << 8) | (slot << 4) | purpose as u64);
    rng
}

fn gue_matrix(sigma: f64, n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let diag = Normal::new(0.0, sigma / (n as f64).sqrt()).expect("positive sigma");
    let off = Normal::new(0.0, sigma / (2.0 * n as f64).sqrt()).expect("positive sigma");
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m.set(i, i, num_complex::Complex64::new(diag.sample(rng), 0.0));
        for j in i + 1..n {
            let z = num_complex::Complex64::new(off.sample(rng), off.sample(rng));
            m.set(i, j, z);
            m.set(j, i, z.conj());
        }
    }
    m
}

fn wishart_factor(spec: &EnsembleSpec, trial: usize, slot: u64) -> CMatrix {
    let cols = spec.wishart_columns().expect("wishart spec");
    let mut rng = stream(spec.base_seed, trial, slot, Purpose::Gaussian);
    CMatrix::gaussian(spec.dim, cols, &mut rng).scale(1.0 / (cols as f64).sqrt())
}

fn sample_slot(spec: &EnsembleSpec, trial: usize, slot: u64) -> Result<HermitianMatrix> {
    spec.validate()?;
    let n = spec.dim;
    Ok(match &spec.kind {
        EnsembleKind::Gue { sigma } => {
            HermitianMatrix::symmetrized(gue_matrix(*sigma, n, &mut stream(spec.base_seed, trial, slot, Purpose::Gaussian)))
        }
        EnsembleKind::ShiftedGue { sigma, field } => {
            let mut m = gue_matrix(*sigma, n, &mut stream(spec.base_seed, trial, slot, Purpose::Gaussian));
            let shift: Vec<f64> = field.eigenvalues(n).iter().map(|a| sigma * sigma * a).collect();
            m.add_diagonal(&shift);
            HermitianMatrix::symmetrized(m)
        }
        EnsembleKind::FixedSpectrum { .. } => {
            let t = spec.quantiles().expect("fixed spectrum");
            let u = haar_unitary(n, &mut stream(spec.base_seed, trial, slot, Purpose::Haar));
            let mut ud = u.clone();
            ud.scale_columns(&t.iter().map(|&x| num_complex::Complex64::new(x, 0.0)).collect::<Vec<_>>());
            HermitianMatrix::symmetrized(ud.matmul(&u.adjoint()))
        }
        EnsembleKind::Wishart { .. } => {
            let x = wishart_factor(spec, trial, slot);
            HermitianMatrix::symmetrized(x.matmul(&x.adjoint()))
        }
    })
}

/// One draw of the ensemble; deterministic in `(spec.base_seed, trial)`.
pub fn sample_ensemble(spec: &EnsembleSpec, trial: usize) -> Result<HermitianMatrix> {
    sample_slot(spec, trial, 0)
}

/// Per-trial ascending spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSpectrum {
    eigenvalues: Vec<Vec<f64>>,
}

impl EmpiricalSpectrum {
    pub fn new(eigenvalues: Vec<Vec<f64>>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::validation("an empirical spectrum needs at least one trial"));
        }
        for (t, ev) in eigenvalues.iter().enumerate() {
            if ev.iter().any(|x| !x.is_finite()) || ev.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::validation(format!("trial {t}: eigenvalues must be finite and ascending")));
            }
        }
        Ok(EmpiricalSpectrum { eigenvalues })
    }

    pub fn trials(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn trial(&self, t: usize) -> &[f64] {
        &self.eigenvalues[t]
    }

    pub fn pooled(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.eigenvalues.iter().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        all
    }

    /// Pooled moment `(1/#) Σ λⁿ`.
    pub fn moment(&self, n: u32) -> f64 {
        let count: usize = self.eigenvalues.iter().map(Vec::len).sum();
        self.eigenvalues.iter().flatten().map(|x| x.powi(n as i32)).sum::<f64>() / count as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["trial", "rank", "eigenvalue"]).map_err(err)?;
        for (t, ev) in self.eigenvalues.iter().enumerate() {
            for (r, x) in ev.iter().enumerate() {
                w.write_record([t.to_string(), r.to_string(), format_float(*x)]).map_err(err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            trial: usize,
            rank: usize,
            eigenvalue: f64,
        }
        let mut rdr = csv::Reader::from_reader(input);
        let mut eigenvalues: Vec<Vec<f64>> = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row.map_err(|e| Error::Io(e.to_string()))?;
            if row.trial == eigenvalues.len() {
                eigenvalues.push(Vec::new());
            }
            let ev = eigenvalues
                .get_mut(row.trial)
                .filter(|ev| ev.len() == row.rank)
                .ok_or_else(|| Error::Io(format!("row (trial {}, rank {}) out of order", row.trial, row.rank)))?;
            ev.push(row.eigenvalue);
        }
        Self::new(eigenvalues)
    }
}

fn check_dims(a: &EnsembleSpec, b: &EnsembleSpec) -> Result<()> {
    a.validate()?;
    b.validate()?;
    if a.dim != b.dim {
        return Err(Error::validation(format!("dimension mismatch: {} vs {}", a.dim, b.dim)));
    }
    Ok(())
}

/// `M₂` in free position relative to anything independent of it.
fn rotated_partner(spec: &EnsembleSpec, trial: usize) -> Result<HermitianMatrix> {
    let m = sample_slot(spec, trial, 1)?;
    if spec.is_invariant() {
        return Ok(m);
    }
    let omega = haar_unitary(spec.dim, &mut stream(spec.base_seed, trial, 1, Purpose::Rotation));
    Ok(m.conjugate_by(&omega))
}

/// Spectra of `M₁ + Ω M₂ Ω†` with an independent Haar `Ω` per trial.
pub fn mc_free_add(spec1: &EnsembleSpec, spec2: &EnsembleSpec, trials: usize, exec: Exec) -> Result<EmpiricalSpectrum> {
    check_dims(spec1, spec2)?;
    let spectra = exec.try_map_indexed(trials, |t| {
        let m = match (spec1.quantiles(), spec2.quantiles()) {
            (Some(d1), _) if spec2.is_invariant() => {
                let mut m2 = rotated_partner(spec2, t)?.into_matrix();
                m2.add_diagonal(&d1);
                HermitianMatrix::symmetrized(m2)
            }
            (None, Some(d2)) if spec1.is_invariant() => {
                let mut m1 = sample_slot(spec1, t, 0)?.into_matrix();
                m1.add_diagonal(&d2);
                HermitianMatrix::symmetrized(m1)
            }
            _ => sample_slot(spec1, t, 0)?.add(&rotated_partner(spec2, t)?),
        };
        m.eigenvalues()
    })?;
    EmpiricalSpectrum::new(spectra)
}

/// Spectra of `A^{1/2} Ω B Ω† A^{1/2}` for positive semidefinite `A`.
///
/// With `A = F F†` the nonzero spectrum equals that of `F† (Ω B Ω†) F`,
/// which needs no matrix square root; zeros are restored to length `N`.
pub fn mc_free_mul(spec1: &EnsembleSpec, spec2: &EnsembleSpec, trials: usize, exec: Exec) -> Result<EmpiricalSpectrum> {
    check_dims(spec1, spec2)?;
    let root = match &spec1.kind {
        EnsembleKind::FixedSpectrum { measure } => {
            if measure.support().0 < 0.0 {
                return Err(Error::validation("the left factor of a product must have nonnegative spectrum"));
            }
            Some(spec1.quantiles().expect("fixed spectrum").iter().map(|t| t.sqrt()).collect::<Vec<f64>>())
        }
        EnsembleKind::Wishart { .. } => None,
        _ => return Err(Error::validation("the left factor of a product must be wishart or a nonnegative fixed spectrum")),
    };
    let n = spec1.dim;
    let spectra = exec.try_map_indexed(trials, |t| {
        let b = rotated_partner(spec2, t)?;
        let mut ev = match &root {
            Some(s) => {
                let mut m = b.into_matrix();
                let scale: Vec<num_complex::Complex64> = s.iter().map(|&x| num_complex::Complex64::new(x, 0.0)).collect();
                m.scale_columns(&scale);
                let mut m = m.adjoint();
                m.scale_columns(&scale);
                HermitianMatrix::symmetrized(m).eigenvalues()?
            }
            None => b.compress(&wishart_factor(spec1, t, 0)).eigenvalues()?,
        };
        match ev.len().cmp(&n) {
            std::cmp::Ordering::Greater => {
                ev.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
                ev.drain(..ev.len() - n);
            }
            std::cmp::Ordering::Less => ev.resize(n, 0.0),
            std::cmp::Ordering::Equal => {}
        }
        ev.sort_by(f64::total_cmp);
        Ok::<_, Error>(ev)
    })?;
    EmpiricalSpectrum::new(spectra)
}

/// Pooled histogram with `bins` equal bins, as a piecewise-linear density
/// through the bin centers. A spectrum with no spread becomes one atom.
pub fn empirical_measure(es: &EmpiricalSpectrum, bins: usize) -> Result<SpectralMeasure> {
    if bins < 8 {
        return Err(Error::validation(format!("need at least 8 bins, got {bins}")));
    }
    let all = es.pooled();
    let (lo, hi) = (all[0], all[all.len() - 1]);
    if hi - lo <= 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        return Ok(SpectralMeasure::dirac(mean));
    }
    let h = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in &all {
        let k = (((x - lo) / h) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let total = all.len() as f64;
    let dens: Vec<f64> = counts.iter().map(|&c| c as f64 / (total * h)).collect();
    // End nodes at lo and hi repeat the outer bin heights, so the
    // trapezoid mass equals Σ count/total exactly.
    let mut grid = vec![lo];
    let mut values = vec![dens[0]];
    for (k, d) in dens.iter().enumerate() {
        grid.push(lo + (k as f64 + 0.5) * h);
        values.push(*d);
    }
    grid.push(hi);
    values.push(dens[bins - 1]);
    SpectralMeasure::new(Vec::<Atom>::new(), vec![Segment::new(grid, values)?])
}

/// Estimate `⟨M_jj⟩` under `exp(N tr MA)` with the Gaussian action and
/// compare with `σ² a_j`.
pub fn mc_external_field(
    sigma: f64,
    field: &ExternalFieldSpec,
    n: usize,
    trials: usize,
    base_seed: u64,
    exec: Exec,
) -> Result<ReportDocument> {
    if n < 8 {
        return Err(Error::validation(format!("external-field experiment needs N >= 8, got {n}")));
    }
    if trials < 2 {
        return Err(Error::validation("external-field experiment needs at least 2 trials"));
    }
    let spec = EnsembleSpec::shifted_gue(sigma, field.clone(), n, base_seed)?;
    let diagonals = exec.try_map_indexed(trials, |t| Ok::<_, Error>(sample_ensemble(&spec, t)?.diagonal()))?;
    let a = field.eigenvalues(n);
    let predicted: Vec<f64> = a.iter().map(|x| sigma * sigma * x).collect();
    let tf = trials as f64;
    let means: Vec<f64> = (0..n).map(|j| diagonals.iter().map(|d| d[j]).sum::<f64>() / tf).collect();
    let pooled_var = (0..n)
        .map(|j| diagonals.iter().map(|d| (d[j] - means[j]).powi(2)).sum::<f64>())
        .sum::<f64>()
        / (n as f64 * (tf - 1.0));
    let stderr = (pooled_var / tf).sqrt();
    let deviations: Vec<f64> = means.iter().zip(&predicted).map(|(m, p)| (m - p).abs()).collect();
    let within = deviations.iter().filter(|d| **d <= 3.0 * stderr).count() as f64 / n as f64;
    let a2: f64 = a.iter().map(|x| x * x).sum();

    // λ(a) − PV G_A(a) reproduces σ²a wherever the principal value exists.
    let mut route_gap: f64 = 0.0;
    for &x in &a {
        if let (Ok(l), Ok(pv)) = (
            crate::free_arithmetic::external_field_lambda_gaussian(sigma, field, x),
            principal_value_transform(&field.measure_a, x),
        ) {
            route_gap = route_gap.max((l - pv - sigma * sigma * x).abs());
        }
    }

    let mut report = ReportDocument::new("mc_external_field")
        .with_seed(base_seed)
        .with_inputs(serde_json::json!({ "sigma": sigma, "dim": n, "trials": trials }));
    report.metric("stderr", stderr);
    report.metric("analytic_stderr", sigma / (n as f64 * tf).sqrt());
    report.metric("max_abs_deviation", deviations.iter().cloned().fold(0.0, f64::max));
    report.metric("max_z", deviations.iter().cloned().fold(0.0, f64::max) / stderr);
    report.metric("fitted_sigma2", if a2 > 0.0 { a.iter().zip(&means).map(|(x, m)| x * m).sum::<f64>() / a2 } else { f64::NAN });
    report.metric("lambda_route_gap", route_gap);
    report.at_least("fraction_within_3se", within, 0.95);
    Ok(report)
}

/// `Var(M₁₁)·N² / ⟨tr M²⟩` for GUE(σ). By invariance every diagonal entry
/// has the law of `M₁₁`, so the variance is pooled over the diagonal; the
/// `M₁₁`-only estimate is reported alongside.
pub fn connected_moment_check(sigma: f64, n: usize, trials: usize, base_seed: u64, exec: Exec) -> Result<ReportDocument> {
    if trials < 100 {
        return Err(Error::validation(format!("connected-moment check needs at least 100 trials, got {trials}")));
    }
    let spec = EnsembleSpec::gue(sigma, n, base_seed)?;
    let draws = exec.try_map_indexed(trials, |t| {
        let m = sample_ensemble(&spec, t)?;
        let tr2 = m.matrix().frobenius().powi(2);
        Ok::<_, Error>((m.diagonal(), tr2))
    })?;
    let tf = trials as f64;
    let nf = n as f64;
    let mean_tr2 = draws.iter().map(|d| d.1).sum::<f64>() / tf;
    let var_tr2 = draws.iter().map(|d| (d.1 - mean_tr2).powi(2)).sum::<f64>() / (tf - 1.0);
    let diag_mean = draws.iter().flat_map(|d| d.0.iter()).sum::<f64>() / (tf * nf);
    let pooled = draws.iter().flat_map(|d| d.0.iter()).map(|x| (x - diag_mean).powi(2)).sum::<f64>() / (tf * nf - 1.0);
    let m11_mean = draws.iter().map(|d| d.0[0]).sum::<f64>() / tf;
    let m11_var = draws.iter().map(|d| (d.0[0] - m11_mean).powi(2)).sum::<f64>() / (tf - 1.0);
    let ratio = pooled * nf * nf / mean_tr2;
    let rel_se = (2.0 / (tf * nf - 1.0) + var_tr2 / (tf * mean_tr2 * mean_tr2)).sqrt();

    let mut report = ReportDocument::new("connected_moment_check")
        .with_seed(base_seed)
        .with_inputs(serde_json::json!({ "sigma": sigma, "dim": n, "trials": trials }));
    report.metric("ratio", ratio);
    report.metric("ratio_ci_low", ratio * (1.0 - 1.96 * rel_se));
    report.metric("ratio_ci_high", ratio * (1.0 + 1.96 * rel_se));
    report.metric("ratio_m11_only", m11_var * nf * nf / mean_tr2);
    report.metric("mean_tr_m2", mean_tr2);
    report.at_most("ratio_deviation", (ratio - 1.0).abs(), 0.15);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{make_law, wasserstein1, LawSpec};

    fn two_atom() -> SpectralMeasure {
        make_law(&LawSpec::TwoAtom { p: 0.5, x1: -1.0, x2: 1.0 }, 16).unwrap()
    }

    #[test]
    fn specs_are_validated() {
        assert!(EnsembleSpec::gue(0.0, 8, 0).unwrap_err().is_validation());
        assert!(EnsembleSpec::gue(1.0, 1, 0).unwrap_err().is_validation());
        assert!(EnsembleSpec::wishart(-1.0, 8, 0).unwrap_err().is_validation());
    }

    #[test]
    fn sampling_is_deterministic_per_trial() {
        let spec = EnsembleSpec::gue(1.0, 16, 42).unwrap();
        assert_eq!(sample_ensemble(&spec, 3).unwrap(), sample_ensemble(&spec, 3).unwrap());
        assert_ne!(sample_ensemble(&spec, 3).unwrap(), sample_ensemble(&spec, 4).unwrap());
    }

    #[test]
    fn zero_shift_is_plain_gue() {
        let a = EnsembleSpec::gue(1.0, 64, 7).unwrap();
        let b = EnsembleSpec::shifted_gue(1.0, ExternalFieldSpec::zero(), 64, 7).unwrap();
        assert_eq!(sample_ensemble(&a, 0).unwrap(), sample_ensemble(&b, 0).unwrap());
    }

    #[test]
    fn fixed_spectrum_uses_quantiles() {
        let spec = EnsembleSpec::fixed(two_atom(), 128, 1).unwrap();
        let q = spec.quantiles().unwrap();
        assert_eq!(q.iter().filter(|x| **x == -1.0).count(), 64);
        assert_eq!(q.iter().filter(|x| **x == 1.0).count(), 64);
        let ev = sample_ensemble(&spec, 0).unwrap().eigenvalues().unwrap();
        assert!(ev.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn empirical_measure_of_constant_spectrum_is_an_atom() {
        let es = EmpiricalSpectrum::new(vec![vec![2.5; 10], vec![2.5; 10]]).unwrap();
        assert_eq!(empirical_measure(&es, 16).unwrap(), SpectralMeasure::dirac(2.5));
    }

    #[test]
    fn empirical_measure_has_unit_mass() {
        let es = EmpiricalSpectrum::new(vec![vec![-1.0, 0.0, 0.3, 2.0], vec![-0.5, 0.1, 0.2, 0.9]]).unwrap();
        let mu = empirical_measure(&es, 8).unwrap();
        assert!((mu.mass() - 1.0).abs() <= 1e-9);
        assert!(empirical_measure(&es, 4).is_err());
    }

    #[test]
    fn spectrum_csv_round_trips() {
        let es = EmpiricalSpectrum::new(vec![vec![-1.0, 0.1 + 0.2], vec![1e-300, 3.0]]).unwrap();
        let mut buf = Vec::new();
        es.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("trial,rank,eigenvalue\n"));
        assert_eq!(EmpiricalSpectrum::read_csv(buf.as_slice()).unwrap(), es);
    }

    #[test]
    fn unsorted_spectra_are_rejected() {
        assert!(EmpiricalSpectrum::new(vec![vec![1.0, 0.0]]).is_err());
        assert!(EmpiricalSpectrum::new(vec![]).is_err());
    }

    #[test]
    fn adding_zero_keeps_the_spectrum() {
        let gue = EnsembleSpec::gue(1.0, 32, 5).unwrap();
        let zero = EnsembleSpec::fixed(SpectralMeasure::dirac(0.0), 32, 6).unwrap();
        let es = mc_free_add(&gue, &zero, 3, Exec::default()).unwrap();
        for t in 0..3 {
            let want = sample_ensemble(&gue, t).unwrap().eigenvalues().unwrap();
            assert!(es.trial(t).iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn multiplying_by_identity_keeps_the_spectrum() {
        let w = EnsembleSpec::wishart(1.0, 32, 5).unwrap();
        let one = EnsembleSpec::fixed(SpectralMeasure::dirac(1.0), 32, 6).unwrap();
        let es = mc_free_mul(&w, &one, 2, Exec::default()).unwrap();
        for t in 0..2 {
            let want = sample_ensemble(&w, t).unwrap().eigenvalues().unwrap();
            assert!(es.trial(t).iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-10));
        }
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let a = EnsembleSpec::gue(1.0, 8, 0).unwrap();
        let b = EnsembleSpec::gue(1.0, 16, 0).unwrap();
        assert!(mc_free_add(&a, &b, 1, Exec::Sequential).unwrap_err().is_validation());
        let sc = make_law(&LawSpec::Semicircle { sigma: 1.0 }, 64).unwrap();
        let neg = EnsembleSpec::fixed(sc, 8, 0).unwrap();
        assert!(mc_free_mul(&neg, &a, 1, Exec::Sequential).unwrap_err().is_validation());
    }

    #[test]
    fn gue_matches_semicircle() {
        let spec = EnsembleSpec::gue(1.0, 128, 11).unwrap();
        let zero = EnsembleSpec::fixed(SpectralMeasure::dirac(0.0), 128, 12).unwrap();
        let es = mc_free_add(&spec, &zero, 10, Exec::default()).unwrap();
        let sc = make_law(&LawSpec::Semicircle { sigma: 1.0 }, 2000).unwrap();
        assert!(wasserstein1(&empirical_measure(&es, 40).unwrap(), &sc) < 0.05);
    }
}
