//! `freeprob`: run pipelines, Monte Carlo experiments and the self-test
//! from JSON configs.
//!
//! Exit codes: 0 success, 1 invalid input, 2 a tolerance was missed,
//! 3 a numerical pipeline failed.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use freeprob::acceptance::{self, run_criterion, summary_line, AcceptanceConfig, Operation};
use freeprob::free_arithmetic::{free_add, free_multiply, h_function, pastur_add_gaussian, pastur_contour, r_transform};
use freeprob::measure::io::{format_float, save_measure};
use freeprob::measure::{l1_distance, wasserstein1};
use freeprob::par::Exec;
use freeprob::report::ReportDocument;
use freeprob::rmt::{mc_free_add, mc_free_mul};
use freeprob::stieltjes::{cauchy_transform, principal_value_transform};
use freeprob::{Complex64, Error, LawSpec, SpectralMeasure};

use config::*;

#[derive(Parser, Debug)]
#[command(name = "freeprob", version, about = "Free convolution of spectral measures, with series and Monte Carlo checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Multiply every upper-bound tolerance by this factor.
    #[arg(long, global = true)]
    tolerance_scale: Option<f64>,
    /// Run trials and grid evaluations on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Write a catalog law as a density CSV.
    Law,
    /// Evaluate G, its principal value, R or h on probe points.
    Transform,
    /// Free additive convolution, optionally cross-checked with Pastur's equation.
    Add,
    /// Free multiplicative convolution.
    Mul,
    /// Monte Carlo sum or product spectra.
    Sample,
    /// Pipeline against the series oracle, a reference law and Monte Carlo.
    Verify,
    /// Run the acceptance criteria.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Law => "law",
            Command::Transform => "transform",
            Command::Add => "add",
            Command::Mul => "mul",
            Command::Sample => "sample",
            Command::Verify => "verify",
            Command::Selftest => "selftest",
        }
    }
}

/// Failure with its exit code.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    Tolerance(String),
    Numeric(String),
}

impl Failure {
    fn stage(stage: &str, input: &str, e: Error) -> Self {
        let msg = format!("{stage} failed for {input}: {e}");
        if e.is_validation() {
            Failure::Invalid(msg)
        } else {
            Failure::Numeric(msg)
        }
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Tolerance(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Tolerance(m) | Failure::Numeric(m) => m,
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

struct Ctx {
    out: PathBuf,
    seed: Option<u64>,
    tolerance_scale: f64,
    exec: Exec,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn io(&self, stage: &str, path: &Path, e: impl std::fmt::Display) -> Failure {
        Failure::Invalid(format!("{stage}: cannot write {}: {e}", path.display()))
    }

    fn write_report(&self, stage: &str, name: &str, report: &ReportDocument) -> Outcome {
        let path = self.path(name);
        report.write(&path).map_err(|e| self.io(stage, &path, e))
    }

    fn save(&self, stage: &str, name: &str, mu: &SpectralMeasure) -> Outcome {
        let path = self.path(name);
        save_measure(mu, &path).map_err(|e| self.io(stage, &path, e))
    }
}

fn load<T: serde::de::DeserializeOwned + Validate>(command: Command, path: Option<&Path>) -> std::result::Result<T, Failure> {
    let cfg: T = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Invalid(format!("{}: cannot read config {}: {e}", command.name(), p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Invalid(format!("{}: bad config {}: {e}", command.name(), p.display())))?
        }
        None => T::fallback()
            .ok_or_else(|| Failure::Invalid(format!("{}: --config <path> is required", command.name())))?,
    };
    cfg.validate().map_err(|e| Failure::Invalid(format!("{}: invalid config: {e}", command.name())))?;
    Ok(cfg)
}

fn law_measure(stage: &str, spec: &LawSpec, grid_points: usize) -> std::result::Result<SpectralMeasure, Failure> {
    freeprob::make_law(spec, grid_points).map_err(|e| Failure::stage(stage, &spec.label(), e))
}

fn run_law(ctx: &Ctx, cfg: LawConfig) -> Outcome {
    let mu = law_measure("law", &cfg.law, cfg.grid_points)?;
    ctx.save("law", &cfg.output, &mu)?;
    println!("{}: mass {}, support [{}, {}]", cfg.law.label(), format_float(mu.mass()), mu.support().0, mu.support().1);
    Ok(())
}

fn run_transform(ctx: &Ctx, cfg: TransformConfig) -> Outcome {
    let mu = law_measure("transform", &cfg.law, cfg.grid_points)?;
    let path = ctx.path(&cfg.output);
    let mut w = csv::Writer::from_path(&path).map_err(|e| ctx.io("transform", &path, e))?;
    let io = |e: csv::Error| Failure::Invalid(format!("transform: cannot write {}: {e}", path.display()));
    w.write_record(["re_z", "im_z", "re", "im"]).map_err(io)?;
    for z in cfg.probes.points() {
        let value = match cfg.transform {
            TransformKind::Cauchy => cauchy_transform(&mu, z),
            TransformKind::PrincipalValue => principal_value_transform(&mu, z.re).map(|v| Complex64::new(v, 0.0)),
            TransformKind::R => r_transform(&mu, z),
            TransformKind::H => h_function(&mu, z),
        }
        .map_err(|e| Failure::stage(&format!("transform {:?}", cfg.transform), &format!("{} at z = {z}", cfg.law.label()), e))?;
        w.write_record([z.re, z.im, value.re, value.im].map(format_float)).map_err(io)?;
    }
    w.flush().map_err(|e| ctx.io("transform", &path, e))?;
    Ok(())
}

fn run_add(ctx: &Ctx, cfg: PairConfig) -> Outcome {
    let a = law_measure("add", &cfg.a, cfg.grid_points)?;
    let b = law_measure("add", &cfg.b, cfg.grid_points)?;
    let input = format!("{} + {}", cfg.a.label(), cfg.b.label());
    let contour = cfg.contour_for(Operation::Add, &a, &b).map_err(|e| Failure::stage("add contour", &input, e))?;
    let out = free_add(&a, &b, &contour).map_err(|e| Failure::stage("free_add", &input, e))?;
    ctx.save("add", &cfg.output, &out)?;
    let mut report = ReportDocument::new(format!("add {input}")).with_inputs(serde_json::to_value(&cfg).unwrap_or_default());
    report.metric("mass", out.mass());
    report.metric("mean", out.mean());
    report.metric("variance", out.variance());
    if cfg.pastur_check {
        let LawSpec::Semicircle { sigma } = cfg.b else {
            return Err(Failure::Invalid("add: pastur_check needs b to be a semicircle".into()));
        };
        let pc = pastur_contour(&a, sigma).map_err(|e| Failure::stage("pastur contour", &input, e))?;
        let pastur = pastur_add_gaussian(&a, sigma, &pc).map_err(|e| Failure::stage("pastur_add_gaussian", &input, e))?;
        report.at_most("l1_pastur", l1_distance(&pastur, &out), 1e-2 * ctx.tolerance_scale);
    }
    ctx.write_report("add", &cfg.output.replace(".csv", ".report.json"), &report)?;
    println!("{input}: mass {}, mean {}, variance {}", format_float(out.mass()), format_float(out.mean()), format_float(out.variance()));
    if !report.passed() {
        return Err(Failure::Tolerance(format!("add {input}: Pastur cross-check outside tolerance")));
    }
    Ok(())
}

fn run_mul(ctx: &Ctx, cfg: PairConfig) -> Outcome {
    let a = law_measure("mul", &cfg.a, cfg.grid_points)?;
    let b = law_measure("mul", &cfg.b, cfg.grid_points)?;
    let input = format!("{} x {}", cfg.a.label(), cfg.b.label());
    let contour = cfg.contour_for(Operation::Mul, &a, &b).map_err(|e| Failure::stage("mul contour", &input, e))?;
    let out = free_multiply(&a, &b, &contour).map_err(|e| Failure::stage("free_multiply", &input, e))?;
    ctx.save("mul", &cfg.output, &out)?;
    println!("{input}: mass {}, mean {}", format_float(out.mass()), format_float(out.mean()));
    Ok(())
}

fn run_sample(ctx: &Ctx, mut cfg: SampleConfig) -> Outcome {
    if let Some(seed) = ctx.seed {
        cfg.a.base_seed = seed;
        cfg.b.base_seed = seed.wrapping_add(1);
    }
    let input = format!("{:?} of {:?} and {:?}", cfg.experiment, cfg.a.kind, cfg.b.kind);
    let es = match cfg.experiment {
        Operation::Add => mc_free_add(&cfg.a, &cfg.b, cfg.trials, ctx.exec),
        Operation::Mul => mc_free_mul(&cfg.a, &cfg.b, cfg.trials, ctx.exec),
    }
    .map_err(|e| Failure::stage("sample", &input, e))?;
    let path = ctx.path(&cfg.output);
    let file = std::fs::File::create(&path).map_err(|e| ctx.io("sample", &path, e))?;
    es.write_csv(file).map_err(|e| ctx.io("sample", &path, e))?;
    println!("{} trials of dimension {}", es.trials(), es.trial(0).len());
    Ok(())
}

fn run_verify(ctx: &Ctx, cfg: VerifyConfig) -> Outcome {
    let start = Instant::now();
    let seed = ctx.seed.unwrap_or(cfg.seed);
    let input = format!("{:?} {} / {}", cfg.op, cfg.a.label(), cfg.b.label());
    let mc = cfg.mc.map(|mut m| {
        m.w1_tolerance = cfg.tolerances.mc_w1;
        m
    });
    let (mut report, out) = acceptance::verify_pair(cfg.op, &cfg.a, &cfg.b, cfg.moment_order, cfg.tolerances.moment, mc, seed, ctx.exec)
        .map_err(|e| Failure::stage("verify", &input, e))?;
    if let Some(reference) = &cfg.reference {
        let r = law_measure("verify reference", reference, acceptance::GRID_POINTS)?;
        report.at_most("l1_reference", l1_distance(&out, &r), cfg.tolerances.l1);
        report.at_most("w1_reference", wasserstein1(&out, &r), cfg.tolerances.w1);
    }
    report.inputs = serde_json::to_value(&cfg).unwrap_or_default();
    report.scale_tolerances(ctx.tolerance_scale);
    report.wall_time_s = start.elapsed().as_secs_f64();
    ctx.write_report("verify", &cfg.output, &report)?;
    ctx.save("verify", &cfg.output.replace(".json", ".density.csv"), &out)?;
    for c in &report.criteria {
        println!(
            "{} {} = {} (threshold {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.metric,
            format_float(report.get(&c.metric).unwrap_or(f64::NAN)),
            format_float(c.threshold)
        );
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!(
            "verify {input}: failing metrics {}",
            report.failures().iter().map(|c| c.metric.as_str()).collect::<Vec<_>>().join(", ")
        )))
    }
}

fn run_selftest(ctx: &Ctx, cfg: SelftestConfig) -> Outcome {
    let acfg = AcceptanceConfig { seed: ctx.seed.unwrap_or(cfg.seed), exec: ctx.exec };
    let start = Instant::now();
    let mut failed = Vec::new();
    let mut errored = false;
    for &n in &cfg.criteria {
        let mut outcome = run_criterion(n, &acfg);
        if let Ok(r) = outcome.as_mut() {
            r.scale_tolerances(ctx.tolerance_scale);
            ctx.write_report("selftest", &format!("criterion_{n}.json"), r)?;
        }
        println!("{}", summary_line(n, &outcome));
        match outcome {
            Ok(r) if r.passed() => {}
            Ok(_) => failed.push(n),
            Err(e) => {
                errored |= !e.is_validation();
                failed.push(n);
            }
        }
    }
    println!("selftest: {} of {} criteria passed in {:.1} s", cfg.criteria.len() - failed.len(), cfg.criteria.len(), start.elapsed().as_secs_f64());
    match (failed.is_empty(), errored) {
        (true, _) => Ok(()),
        (false, true) => Err(Failure::Numeric(format!("selftest: criteria {failed:?} failed, some with pipeline errors"))),
        (false, false) => Err(Failure::Tolerance(format!("selftest: criteria {failed:?} failed"))),
    }
}

fn run(cli: Cli) -> Outcome {
    let tolerance_scale = cli.tolerance_scale.unwrap_or(1.0);
    if !(tolerance_scale > 0.0 && tolerance_scale.is_finite()) {
        return Err(Failure::Invalid(format!("--tolerance-scale must be positive, got {tolerance_scale}")));
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| Failure::Invalid(format!("cannot create output directory {}: {e}", cli.out.display())))?;
    let ctx = Ctx {
        out: cli.out.clone(),
        seed: cli.seed,
        tolerance_scale,
        exec: if cli.sequential { Exec::Sequential } else { Exec::Parallel },
    };
    let path = cli.config.as_deref();
    match cli.command {
        Command::Law => run_law(&ctx, load(cli.command, path)?),
        Command::Transform => run_transform(&ctx, load(cli.command, path)?),
        Command::Add => run_add(&ctx, load(cli.command, path)?),
        Command::Mul => run_mul(&ctx, load(cli.command, path)?),
        Command::Sample => run_sample(&ctx, load(cli.command, path)?),
        Command::Verify => run_verify(&ctx, load(cli.command, path)?),
        Command::Selftest => run_selftest(&ctx, load(cli.command, path)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
