//! The acceptance suite: nine criteria, each producing a self-contained
//! [`ReportDocument`], plus the pipeline-versus-oracle comparisons they are
//! built from.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_arithmetic::{
    add_contour, free_add_with, free_multiply_with, mul_contour, pastur_add_gaussian_with, pastur_contour,
    verify_generalized_addition_gaussian, ExternalFieldSpec,
};
use crate::measure::{l1_distance, make_law, wasserstein1, Atom, LawSpec, MomentVector, SpectralMeasure};
use crate::par::Exec;
use crate::report::ReportDocument;
use crate::rmt::{connected_moment_check, empirical_measure, mc_external_field, mc_free_add, mc_free_mul, EnsembleSpec};
use crate::series::{free_add_series, free_multiply_series, free_multiply_series_composed};
use crate::stieltjes::{cauchy_transform, invert_cauchy, stieltjes_invert_with, ContourSpec, TransformEvaluator};

/// Grid points used for catalog laws and output contours.
pub const GRID_POINTS: usize = 2000;

/// Histogram bins for empirical spectra.
pub const MC_BINS: usize = 200;

pub const TITLES: [&str; 9] = [
    "semicircle stability",
    "bernoulli sum is arcsine",
    "pastur consistency",
    "multiplication law",
    "composition and S-transform products agree",
    "generalized addition in a field",
    "connected second moment",
    "transform round trips",
    "oracle equivalence on the catalog",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceConfig {
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig { seed: 20240601, exec: Exec::default() }
    }
}

pub fn additive_catalog() -> Vec<LawSpec> {
    vec![
        LawSpec::Semicircle { sigma: 1.0 },
        LawSpec::MarchenkoPastur { ratio: 0.5 },
        LawSpec::TwoAtom { p: 0.5, x1: -1.0, x2: 1.0 },
        LawSpec::Arcsine { half_width: 1.0 },
        LawSpec::AtomList { atoms: vec![Atom::new(-1.0, 0.25), Atom::new(0.5, 0.5), Atom::new(2.0, 0.25)] },
        LawSpec::Uniform { lo: -1.0, hi: 1.0 },
    ]
}

/// Laws with nonnegative support and positive mean.
pub fn multiplicative_catalog() -> Vec<LawSpec> {
    vec![
        LawSpec::MarchenkoPastur { ratio: 1.0 },
        LawSpec::MarchenkoPastur { ratio: 0.5 },
        LawSpec::TwoAtom { p: 0.5, x1: 1.0, x2: 3.0 },
        LawSpec::Uniform { lo: 0.5, hi: 1.5 },
    ]
}

pub fn law(spec: &LawSpec) -> Result<SpectralMeasure> {
    make_law(spec, GRID_POINTS)
}

/// Largest moment error for `n ≤ K`, each relative to
/// `max(|m_n|, m₂^{n/2})` so that vanishing odd moments are judged on the
/// scale of the measure.
pub fn moment_error(got: &SpectralMeasure, want: &MomentVector) -> f64 {
    let m2 = if want.order() >= 2 { want.get(2).abs() } else { 1.0 };
    (1..=want.order())
        .map(|n| {
            let scale = want.get(n).abs().max(m2.powf(n as f64 / 2.0)).max(1e-300);
            (got.moment(n as u32) - want.get(n)).abs() / scale
        })
        .fold(0.0, f64::max)
}

fn edge_singular_tolerance(a: &LawSpec, b: &LawSpec) -> f64 {
    if a.is_edge_singular() || b.is_edge_singular() {
        1e-2
    } else {
        1e-3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Add,
    Mul,
}

/// Pipeline result for `a ⊞ b` or `a ⊠ b` on the default contour.
pub fn run_pipeline(op: Operation, a: &SpectralMeasure, b: &SpectralMeasure, exec: Exec) -> Result<SpectralMeasure> {
    match op {
        Operation::Add => free_add_with(a, b, &add_contour(a, b)?, exec),
        Operation::Mul => free_multiply_with(a, b, &mul_contour(a, b)?, exec),
    }
}

/// Series-oracle moments of `a ⊞ b` or `a ⊠ b`.
pub fn oracle_moments(op: Operation, a: &SpectralMeasure, b: &SpectralMeasure, order: usize) -> Result<MomentVector> {
    match op {
        Operation::Add => free_add_series(&a.moments(order), &b.moments(order)),
        Operation::Mul => free_multiply_series(&a.moments(order), &b.moments(order)),
    }
}

/// Monte Carlo settings for [`verify_pair`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub dim: usize,
    pub trials: usize,
    #[serde(default = "default_mc_tolerance")]
    pub w1_tolerance: f64,
}

fn default_mc_tolerance() -> f64 {
    0.03
}

/// Pipeline against the series oracle and, optionally, against Monte
/// Carlo with fixed-spectrum matrices of both laws.
pub fn verify_pair(
    op: Operation,
    a_spec: &LawSpec,
    b_spec: &LawSpec,
    moment_order: usize,
    moment_tolerance: f64,
    mc: Option<McSettings>,
    seed: u64,
    exec: Exec,
) -> Result<(ReportDocument, SpectralMeasure)> {
    let start = Instant::now();
    let a = law(a_spec)?;
    let b = law(b_spec)?;
    let out = run_pipeline(op, &a, &b, exec)?;
    let want = oracle_moments(op, &a, &b, moment_order)?;
    let mut report = ReportDocument::new(format!(
        "{} {} {}",
        a_spec.label(),
        if op == Operation::Add { "+" } else { "x" },
        b_spec.label()
    ))
    .with_seed(seed)
    .with_inputs(serde_json::json!({ "op": op, "a": a_spec, "b": b_spec, "moment_order": moment_order, "mc": mc }));
    report.metric("output_mass", out.mass());
    report.at_most("moment_error", moment_error(&out, &want), moment_tolerance);
    if let Some(mc) = mc {
        let ea = EnsembleSpec::fixed(a.clone(), mc.dim, seed)?;
        let eb = EnsembleSpec::fixed(b.clone(), mc.dim, seed.wrapping_add(1))?;
        let es = match op {
            Operation::Add => mc_free_add(&ea, &eb, mc.trials, exec)?,
            Operation::Mul => mc_free_mul(&ea, &eb, mc.trials, exec)?,
        };
        let emp = empirical_measure(&es, MC_BINS)?;
        report.at_most("mc_w1", wasserstein1(&emp, &out), mc.w1_tolerance);
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((report, out))
}

fn finish(mut report: ReportDocument, start: Instant) -> ReportDocument {
    report.wall_time_s = start.elapsed().as_secs_f64();
    report
}

/// Semicircle ⊞ semicircle against the semicircle of doubled variance.
pub fn criterion_1(cfg: &AcceptanceConfig) -> Result<ReportDocument> {
    let start = Instant::now();
    let sc = law(&LawSpec::Semicircle { sigma: 1.0 })?;
    let want = law(&LawSpec::Semicircle { sigma: 2f64.sqrt() })?;
    let contour = add_contour(&sc, &sc)?;
    let out = free_add_with(&sc, &sc, &contour, cfg.exec)?;
    let mut r = ReportDocument::new("criterion_1").with_seed(cfg.seed);
    r.metric("contour_points", contour.real_grid.len() as f64);
    r.at_most("l1", l1_distance(&out, &want), 2e-2);
    r.at_most("w1", wasserstein1(&out, &want), 5e-3);
    r.at_most("runtime_s", start.elapsed().as_secs_f64(), 10.0);
    Ok(finish(r, start))
}

/// Outermost points where the output carries mass: atoms, or density
/// above `level` times its maximum.
fn effective_support(mu: &SpectralMeasure, level: f64) -> (f64, f64) {
    let peak = mu.segments().iter().flat_map(|s| s.density().iter().copied()).fold(0.0, f64::max);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in mu.segments() {
        for (x, d) in s.grid().iter().zip(s.density()) {
            if *d > level * peak {
                lo = lo.min(*x);
                hi = hi.max(*x);
            }
        }
    }
    for a in mu.atoms() {
        lo = lo.min(a.x);
        hi = hi.max(a.x);
    }
    (lo, hi)
}

/// Bernoulli ⊞ Bernoulli: moments and support of the arcsine law on
/// `[−2, 2]`.
pub fn criterion_2(cfg: &AcceptanceConfig) -> Result<ReportDocument> {
    let start = Instant::now();
    let b = law(&LawSpec::TwoAtom { p: 0.5, x1: -1.0, x2: 1.0 })?;
    let out = run_pipeline(Operation::Add, &b, &b, cfg.exec)?;
    let want = oracle_moments(Operation::Add, &b, &b, 6)?;
    let mut r = ReportDocument::new("criterion_2").with_seed(cfg.seed);
    for n in [2usize, 4, 6] {
        r.metric(format!("m{n}"), out.moment(n as u32));
        r.metric(format!("m{n}_oracle"), want.get(n));
        r.at_most(&format!("m{n}_rel_err"), (out.moment(n as u32) - want.get(n)).abs() / want.get(n), 1e-2);
    }
    let (lo, hi) = effective_support(&out, 1e-3);
    r.metric("support_lo", lo);
    r.metric("support_hi", hi);
    r.at_most("support_lo_err", (lo + 2.0).abs(), 0.02);
    r.at_most("support_hi_err", (hi - 2.0).abs(), 0.02);
    Ok(finish(r, start))
}

/// Pastur's equation against general free addition and against Monte Carlo.
pub fn criterion_3(cfg: &AcceptanceConfig) -> Result<ReportDocument> {
    let start = Instant::now();
    let b = law(&LawSpec::TwoAtom { p: 0.5, x1: -1.0, x2: 1.0 })?;
    let sc = law(&LawSpec::Semicircle { sigma: 1.0 })?;
    let contour = pastur_contour(&b, 1.0)?;
    let pastur = pastur_add_gaussian_with(&b, 1.0, &contour, cfg.exec)?;
    let general = free_add_with(&b, &sc, &contour, cfg.exec)?;
    let fixed = EnsembleSpec::fixed(b, 1024, cfg.seed)?;
    let gue = EnsembleSpec::gue(1.0, 1024, cfg.seed.wrapping_add(1))?;
    let es = mc_free_add(&fixed, &gue, 20, cfg.exec)?;
    let emp = empirical_measure(&es, MC_BINS)?;
    let mut r = ReportDocument::new("criterion_3").with_seed(cfg.seed);
    r.at_most("l1_pastur_vs_free_add", l1_distance(&pastur, &general), 1e-2);
    r.at_most("w1_pastur_vs_mc", wasserstein1(&pastur, &emp), 0.03);
    r.at_most("runtime_s", start.elapsed().as_secs_f64(), 120.0);
    Ok(finish(r, start))
}

/// MP(1) ⊠ MP(1) against the Fuss–Catalan numbers, and Wishart products.
pub fn criterion_4(cfg: &AcceptanceConfig) -> Result<ReportDocument> {
    let start = Instant::now();
    let mp = law(&LawSpec::MarchenkoPastur { ratio: 1.0 })?;
    let out = run_pipeline(Operation::Mul, &mp, &mp, cfg.exec)?;
    let want = oracle_moments(Operation::Mul, &mp, &mp, 4)?;
    let mut r = ReportDocument::new("criterion_4").with_seed(cfg.seed);
    for n in 1..=4usize {
        r.metric(format!("m{n}"), out.moment(n as u32));
        r.metric(format!("m{n}_oracle"), want.get(n));
        r.at_most(&format!("m{n}_rel_err"), (out.moment(n as u32) - want.get(n)).abs() / want.get(n), 1e-2);
    }
    let wa = EnsembleSpec::wishart(1.0, 512, cfg.seed)?;
    let wb = EnsembleSpec::wishart(1.0, 512, cfg.seed.wrapping_add(1))?;
    let es = mc_free_mul(&wa, &wb, 20, cfg.exec)?;
    for n in 1..=3usize {
        let got = es.moment(n as u32);
        r.metric(format!("mc_m{n}"), got);
        r.at_most(&format!("mc_m{n}_rel_err"), (got - want.get(n)).abs() / want.get(n), 5e-2);
    }
    Ok(finish(r, start))
}

/// Moments of a random positive atomic measure with 1 to 4 atoms.
fn random_positive_moments(rng: &mut ChaCha8Rng, order: usize) -> MomentVector {
    let k = rng.random_range(1..=4);
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = w.iter().sum();
    let x: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..2.0)).collect();
    MomentVector::new(
        (1..=order)
            .map(|n| x.iter().zip(&w).map(|(x, w)| w / total * x.powi(n as i32)).sum())
            .collect(),
    )
}

/// The multiplication law as a series identity against S-multiplicativity.
pub fn criterion_5(cfg: &AcceptanceConfig) -> Result<ReportDocument> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m1 = random_positive_moments(&mut rng, 10);
        let m2 = random_positive_moments(&mut rng, 10);
        let s = free_multiply_series(&m1, &m2)?;
        let v = free_multiply_series_composed(&m1, &m2)?;
        for n in 1..=10 {
            worst = worst.max((s.get(n) - v.get(n)).abs() / s.get(n).abs().max(1.0));
        }
    }
    let mut r = ReportDocument::new("criterion_5").with_seed(cfg.seed);
    r.metric("vectors", 20.0);
    r.at_most("max_coefficient_gap", worst, 1e-10);
    Ok(finish(r, start))
}

fn random_field(rng: &mut ChaCha8Rng) -> Result<LawSpec> {
    let spec = match rng.random_range(0..4) {
        0 => LawSpec::Semicircle { sigma: rng.random_range(0.3..1.5) },
        1 => {
            let lo = rng.random_range(-2.0..0.0);
            LawSpec::Uniform { lo, hi: lo + rng.random_range(0.5..3.0) }
        }
        2 => LawSpec::TwoAtom { p: rng.random_range(0.2..0.8), x1: rng.random_range(-2.0..-0.1), x2: rng.random_range(0.1..2.0) },
        _ => LawSpec::Arcsine { half_width: rng.random_range(0.5..2.0) },
    };
    spec.validate()?;
    Ok(spec)
}

/// Generalized addition in an external field for Gaussians: analytic
/// residuals and the Monte Carlo diagonal response.
pub fn criterion_6(cfg: &AcceptanceConfig) -> Result<ReportDocument> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6);
    let mut r = ReportDocument::new("criterion_6").with_seed(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (s1, s2) = (rng.random_range(0.3..2.0), rng.random_range(0.3..2.0));
        let spec = random_field(&mut rng)?;
        let field = ExternalFieldSpec::new(law(&spec)?);
        let (lo, hi) = spec.support();
        let probes: Vec<f64> = (0..50).map(|_| rng.random_range(lo - 1.0..hi + 1.0)).collect();
        let rep = verify_generalized_addition_gaussian(s1, s2, &field, &probes)?;
        worst = worst.max(rep.get("max_residual").unwrap_or(f64::INFINITY));
    }
    r.at_most("max_residual", worst, 1e-12);
    let field = ExternalFieldSpec::new(law(&LawSpec::TwoAtom { p: 0.5, x1: -1.0, x2: 1.0 })?);
    let mc = mc_external_field(1.0, &field, 128, 400, cfg.seed, cfg.exec)?;
    r.absorb("mc", &mc);
    Ok(finish(r, start))
}

/// `Var(M₁₁)·N²/⟨tr M²⟩` for GUE at `N = 256`.
pub fn criterion_7(cfg: &AcceptanceConfig) -> Result<ReportDocument> {
    let start = Instant::now();
    let mut r = ReportDocument::new("criterion_7").with_seed(cfg.seed);
    r.absorb("gue", &connected_moment_check(1.0, 256, 200, cfg.seed, cfg.exec)?);
    Ok(finish(r, start))
}

/// Contour for recovering a catalog law from its own transform.
pub fn law_contour(spec: &LawSpec) -> Result<ContourSpec> {
    let (lo, hi) = spec.support();
    let contour = ContourSpec::with_margin(lo, hi, 0.1, GRID_POINTS)?;
    if spec.is_edge_singular() {
        contour.with_edges(&[lo, hi])
    } else {
        Ok(contour)
    }
}

/// Probe points for functional inversion: `w = G(z)` above the support.
fn inversion_probes(mu: &SpectralMeasure) -> Result<Vec<Complex64>> {
    let (lo, hi) = mu.support();
    let width = (hi - lo).max(1.0);
    let mut w = Vec::new();
    for k in 0..10 {
        for y in [0.25, 1.0, 4.0] {
            let z = Complex64::new(lo - 0.25 * width + 1.5 * width * k as f64 / 9.0, y * width);
            w.push(cauchy_transform(mu, z)?);
        }
    }
    Ok(w)
}

/// Inversion of `G` back to the law, and functional inversion residuals.
pub fn criterion_8(cfg: &AcceptanceConfig) -> Result<ReportDocument> {
    let start = Instant::now();
    let mut r = ReportDocument::new("criterion_8").with_seed(cfg.seed);
    let mut specs = additive_catalog();
    specs.extend(multiplicative_catalog().into_iter().filter(|s| !additive_catalog().contains(s)));
    for spec in specs {
        let mu = law(&spec)?;
        let back = stieltjes_invert_with(&mu, &law_contour(&spec)?, cfg.exec)?;
        r.at_most(&format!("l1.{}", spec.label()), l1_distance(&back, &mu), 1e-2);
        let mut worst: f64 = 0.0;
        for w in inversion_probes(&mu)? {
            let lam = invert_cauchy(&mu, w)?;
            worst = worst.max((mu.cauchy(lam)? - w).norm() / w.norm().max(1.0));
        }
        r.at_most(&format!("inversion_residual.{}", spec.label()), worst, 1e-12);
    }
    Ok(finish(r, start))
}

/// Every catalog pair through the pipelines against the series oracle.
pub fn criterion_9(cfg: &AcceptanceConfig) -> Result<ReportDocument> {
    let start = Instant::now();
    let mut r = ReportDocument::new("criterion_9").with_seed(cfg.seed);
    for (op, catalog) in [(Operation::Add, additive_catalog()), (Operation::Mul, multiplicative_catalog())] {
        for i in 0..catalog.len() {
            for j in i..catalog.len() {
                let (a, b) = (&catalog[i], &catalog[j]);
                let tol = edge_singular_tolerance(a, b);
                let (rep, _) = verify_pair(op, a, b, 8, tol, None, cfg.seed, cfg.exec)
                    .map_err(|e| Error::Numeric(format!("{:?} {} / {}: {e}", op, a.label(), b.label())))?;
                r.absorb(&rep.id, &rep);
            }
        }
    }
    Ok(finish(r, start))
}

pub fn run_criterion(n: usize, cfg: &AcceptanceConfig) -> Result<ReportDocument> {
    let mut report = match n {
        1 => criterion_1(cfg),
        2 => criterion_2(cfg),
        3 => criterion_3(cfg),
        4 => criterion_4(cfg),
        5 => criterion_5(cfg),
        6 => criterion_6(cfg),
        7 => criterion_7(cfg),
        8 => criterion_8(cfg),
        9 => criterion_9(cfg),
        _ => return Err(Error::validation(format!("no acceptance criterion {n}; expected 1 to 9"))),
    }?;
    report.note(TITLES[n - 1]);
    Ok(report)
}

/// One summary line per criterion.
pub fn summary_line(n: usize, outcome: &Result<ReportDocument>) -> String {
    match outcome {
        Ok(r) if r.passed() => format!("criterion {n} ({}): PASS [{:.1} s]", TITLES[n - 1], r.wall_time_s),
        Ok(r) => format!(
            "criterion {n} ({}): FAIL [{:.1} s] {}",
            TITLES[n - 1],
            r.wall_time_s,
            r.failures()
                .iter()
                .map(|c| format!("{}={:e} vs {:e}", c.metric, r.get(&c.metric).unwrap_or(f64::NAN), c.threshold))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        Err(e) => format!("criterion {n} ({}): FAIL error: {e}", TITLES[n - 1]),
    }
}
