//! JSON configs, one document per run. See `configs/README.md` for the
//! schema and `configs/*.json` for an example of each subcommand.

use freeprob::acceptance::{McSettings, Operation, GRID_POINTS};
use freeprob::free_arithmetic::{add_contour, mul_contour};
use freeprob::rmt::EnsembleSpec;
use freeprob::stieltjes::{ContourSpec, DEFAULT_EPSILONS};
use freeprob::{Complex64, LawSpec, SpectralMeasure};
use serde::{Deserialize, Serialize};

pub trait Validate: Sized {
    fn validate(&self) -> Result<(), String>;

    /// Config used when none is given on the command line.
    fn fallback() -> Option<Self> {
        None
    }
}

fn grid_points() -> usize {
    GRID_POINTS
}

fn positive(name: &str, x: f64) -> Result<(), String> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive and finite, got {x}"))
    }
}

fn law_ok(name: &str, spec: &LawSpec) -> Result<(), String> {
    spec.validate().map_err(|e| format!("{name}: {e}"))
}

fn points_ok(n: usize) -> Result<(), String> {
    if n >= 16 {
        Ok(())
    } else {
        Err(format!("grid_points must be at least 16, got {n}"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    pub law: LawSpec,
    #[serde(default = "grid_points")]
    pub grid_points: usize,
    #[serde(default = "density_csv")]
    pub output: String,
}

fn density_csv() -> String {
    "density.csv".into()
}

impl Validate for LawConfig {
    fn validate(&self) -> Result<(), String> {
        law_ok("law", &self.law)?;
        points_ok(self.grid_points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// `G(z)`.
    Cauchy,
    /// `PV G(x)` at the real parts of the probes.
    PrincipalValue,
    /// `R(w) = λ(w) − 1/w`.
    R,
    /// `h(λ) = λ G(λ)`.
    H,
}

/// Either explicit `[re, im]` points or a horizontal line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Probes {
    Points(Vec<[f64; 2]>),
    Line { lo: f64, hi: f64, points: usize, height: f64 },
}

impl Probes {
    pub fn points(&self) -> Vec<Complex64> {
        match self {
            Probes::Points(p) => p.iter().map(|[re, im]| Complex64::new(*re, *im)).collect(),
            Probes::Line { lo, hi, points, height } => (0..*points)
                .map(|k| {
                    let t = if *points > 1 { k as f64 / (*points - 1) as f64 } else { 0.0 };
                    Complex64::new(lo + (hi - lo) * t, *height)
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            Probes::Points(p) if p.is_empty() => Err("probes must not be empty".into()),
            Probes::Points(p) if p.iter().flatten().any(|x| !x.is_finite()) => Err("probes must be finite".into()),
            Probes::Line { lo, hi, points, height } if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || *points == 0 || !height.is_finite() => {
                Err(format!("bad probe line [{lo}, {hi}] with {points} points at height {height}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformConfig {
    pub law: LawSpec,
    pub transform: TransformKind,
    pub probes: Probes,
    #[serde(default = "grid_points")]
    pub grid_points: usize,
    #[serde(default = "transform_csv")]
    pub output: String,
}

fn transform_csv() -> String {
    "transform.csv".into()
}

impl Validate for TransformConfig {
    fn validate(&self) -> Result<(), String> {
        law_ok("law", &self.law)?;
        points_ok(self.grid_points)?;
        self.probes.validate()
    }
}

/// Output contour: a uniform grid on `[lo, hi]`, with optional edge
/// points and epsilon schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourConfig {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "grid_points")]
    pub points: usize,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub edges: Vec<f64>,
}

fn default_epsilons() -> Vec<f64> {
    DEFAULT_EPSILONS.to_vec()
}

impl ContourConfig {
    fn build(&self) -> freeprob::Result<ContourSpec> {
        let c = ContourSpec::uniform(self.lo, self.hi, self.points)?.epsilons(self.epsilons.clone())?;
        if self.edges.is_empty() {
            Ok(c)
        } else {
            c.with_edges(&self.edges)
        }
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(format!("contour range [{}, {}] must be finite and increasing", self.lo, self.hi));
        }
        for e in &self.epsilons {
            positive("contour epsilon", *e)?;
        }
        self.build().map(|_| ()).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub a: LawSpec,
    pub b: LawSpec,
    #[serde(default = "grid_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub contour: Option<ContourConfig>,
    /// With `b` a semicircle, also solve Pastur's equation and compare.
    #[serde(default)]
    pub pastur_check: bool,
    #[serde(default = "density_csv")]
    pub output: String,
}

impl PairConfig {
    pub fn contour_for(&self, op: Operation, a: &SpectralMeasure, b: &SpectralMeasure) -> freeprob::Result<ContourSpec> {
        match (&self.contour, op) {
            (Some(c), _) => c.build(),
            (None, Operation::Add) => add_contour(a, b),
            (None, Operation::Mul) => mul_contour(a, b),
        }
    }
}

impl Validate for PairConfig {
    fn validate(&self) -> Result<(), String> {
        law_ok("a", &self.a)?;
        law_ok("b", &self.b)?;
        points_ok(self.grid_points)?;
        if let Some(c) = &self.contour {
            c.validate()?;
        }
        if !self.output.ends_with(".csv") {
            return Err(format!("output {} must end in .csv", self.output));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub experiment: Operation,
    pub a: EnsembleSpec,
    pub b: EnsembleSpec,
    pub trials: usize,
    #[serde(default = "spectrum_csv")]
    pub output: String,
}

fn spectrum_csv() -> String {
    "spectrum.csv".into()
}

impl Validate for SampleConfig {
    fn validate(&self) -> Result<(), String> {
        self.a.validate().map_err(|e| format!("a: {e}"))?;
        self.b.validate().map_err(|e| format!("b: {e}"))?;
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "moment_tol")]
    pub moment: f64,
    #[serde(default = "l1_tol")]
    pub l1: f64,
    #[serde(default = "w1_tol")]
    pub w1: f64,
    #[serde(default = "mc_w1_tol")]
    pub mc_w1: f64,
}

fn moment_tol() -> f64 {
    1e-3
}
fn l1_tol() -> f64 {
    2e-2
}
fn w1_tol() -> f64 {
    2e-2
}
fn mc_w1_tol() -> f64 {
    0.03
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { moment: moment_tol(), l1: l1_tol(), w1: w1_tol(), mc_w1: mc_w1_tol() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub op: Operation,
    pub a: LawSpec,
    pub b: LawSpec,
    /// Exact law the result should equal, when known.
    #[serde(default)]
    pub reference: Option<LawSpec>,
    #[serde(default = "moment_order")]
    pub moment_order: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub mc: Option<McSettings>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "report_json")]
    pub output: String,
}

fn moment_order() -> usize {
    8
}

fn report_json() -> String {
    "report.json".into()
}

impl Validate for VerifyConfig {
    fn validate(&self) -> Result<(), String> {
        law_ok("a", &self.a)?;
        law_ok("b", &self.b)?;
        if let Some(r) = &self.reference {
            law_ok("reference", r)?;
        }
        if !(1..=12).contains(&self.moment_order) {
            return Err(format!("moment_order must be in 1..=12, got {}", self.moment_order));
        }
        let t = &self.tolerances;
        for (name, x) in [("moment", t.moment), ("l1", t.l1), ("w1", t.w1), ("mc_w1", t.mc_w1)] {
            positive(&format!("tolerances.{name}"), x)?;
        }
        if let Some(mc) = &self.mc {
            if mc.dim < 2 || mc.trials == 0 {
                return Err(format!("mc needs dim >= 2 and trials >= 1, got {} and {}", mc.dim, mc.trials));
            }
        }
        if !self.output.ends_with(".json") {
            return Err(format!("output {} must end in .json", self.output));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestConfig {
    #[serde(default = "all_criteria")]
    pub criteria: Vec<usize>,
    #[serde(default = "selftest_seed")]
    pub seed: u64,
}

fn all_criteria() -> Vec<usize> {
    (1..=9).collect()
}

fn selftest_seed() -> u64 {
    freeprob::acceptance::AcceptanceConfig::default().seed
}

impl Validate for SelftestConfig {
    fn validate(&self) -> Result<(), String> {
        match self.criteria.iter().find(|n| !(1..=9).contains(*n)) {
            Some(n) => Err(format!("no acceptance criterion {n}; expected 1 to 9")),
            None if self.criteria.is_empty() => Err("criteria must not be empty".into()),
            None => Ok(()),
        }
    }

    fn fallback() -> Option<Self> {
        Some(SelftestConfig { criteria: all_criteria(), seed: selftest_seed() })
    }
}
