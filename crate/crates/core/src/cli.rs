//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LevyModel;
use crate::penalization::{self, Clock, LocalTimeWeight, MartingaleState};
use crate::potential::PotentialTable;
use crate::resolvent::{self, QuadratureEngine};
use crate::simulation::{mc_functional, run_paths, sample_path, SimConfig, WalkPlan};
use crate::verification::{run_suite, McReport, VerifyConfig};

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "LEVY_PENAL_SEED";

#[derive(Parser, Debug)]
#[command(name = "levy-penal", version, about = "Potential theory and local-time penalisation for Lévy processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tabulate h (or h_q, r_q) on a grid as CSV.
    HTable(HTableArgs),
    /// Probability of hitting `a` before `b` (and `c`) from `x`.
    Hitprob(HitprobArgs),
    /// h^B(a), excursion rates and κ.
    Excursion(ExcursionArgs),
    /// Martingale, clock conditional and limit at one state, as JSON.
    Penalize(PenalizeArgs),
    /// Simulate paths (CSV) or estimate E f(L_τ) against its closed form (JSON).
    Simulate(SimulateArgs),
    /// Run verification suites and write a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Preset name (bm, bm-drift, stable-sym-1.5, stable-asym-1.5, jumps) or a TOML file with a [model] table.
    #[arg(long, default_value = "bm")]
    pub model: String,
    /// Absolute quadrature tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub abs_tol: f64,
    /// Relative quadrature tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub rel_tol: f64,
    /// Evaluate by quadrature even when a closed form is known.
    #[arg(long)]
    pub quadrature_only: bool,
}

impl ModelArgs {
    fn model(&self) -> Result<LevyModel> {
        LevyModel::resolve(&self.model)
    }

    fn engine(&self) -> QuadratureEngine {
        let eng = QuadratureEngine { abs_tol: self.abs_tol, rel_tol: self.rel_tol, ..Default::default() };
        if self.quadrature_only {
            eng.quadrature_only()
        } else {
            eng
        }
    }

    fn table(&self) -> Result<PotentialTable> {
        PotentialTable::new(self.model()?, self.engine(), 0.0)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    H,
    Hq,
    Rq,
}

#[derive(Args, Debug)]
pub struct HTableArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Grid as lo:hi:step.
    #[arg(long, allow_hyphen_values = true, default_value = "-3:3:1")]
    pub xs: String,
    #[arg(long, value_enum, default_value_t = Quantity::H)]
    pub quantity: Quantity,
    /// Resolvent parameter for h_q and r_q.
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HitprobArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub b: f64,
    /// Optional third point: P_x(T_a < T_b ∧ T_c).
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ExcursionArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Levels, comma separated.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', default_value = "1")]
    pub a: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClockKind {
    Exp,
    Hit,
    Twopoint,
    Invlt,
}

#[derive(Args, Debug, Clone)]
pub struct ClockArgs {
    #[arg(long, value_enum)]
    pub clock: ClockKind,
    /// Clock parameters, e.g. q=1e-6, a=1000, a=1000,b=2000 or a=1000,u=1.
    #[arg(long, allow_hyphen_values = true)]
    pub params: String,
    /// Weight: exp:beta=1, zero, or step:breaks=0;1;3,values=0.5;0.25.
    #[arg(long = "f", default_value = "exp:beta=1")]
    pub weight: String,
}

fn key_values(text: &str, sep: char) -> Result<Vec<(String, String)>> {
    text.split(sep)
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value, got {kv:?}")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn number(text: &str) -> Result<f64> {
    text.parse().map_err(|_| Error::Config(format!("not a number: {text:?}")))
}

impl ClockArgs {
    pub fn clock(&self) -> Result<Clock> {
        let kv = key_values(&self.params, ',')?;
        let get = |name: &str| -> Result<f64> {
            let v = kv.iter().find(|(k, _)| k == name).ok_or_else(|| Error::Config(format!("clock parameter {name} missing")))?;
            number(&v.1)
        };
        let clock = match self.clock {
            ClockKind::Exp => Clock::Exponential { q: get("q")? },
            ClockKind::Hit => Clock::Hitting { a: get("a")? },
            ClockKind::Twopoint => Clock::TwoPoint { a: get("a")?, b: get("b")? },
            ClockKind::Invlt => Clock::InverseLocalTime { a: get("a")?, u: get("u")? },
        };
        clock.validate()?;
        Ok(clock)
    }

    pub fn weight(&self) -> Result<LocalTimeWeight> {
        parse_weight(&self.weight)
    }
}

/// Parses `exp:beta=1`, `zero` or `step:breaks=0;1;3,values=0.5;0.25`.
pub fn parse_weight(text: &str) -> Result<LocalTimeWeight> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    let kv = key_values(rest, ',')?;
    let get = |name: &str| kv.iter().find(|(k, _)| k == name).map(|(_, v)| v.clone()).ok_or_else(|| Error::Config(format!("weight parameter {name} missing")));
    let list = |s: String| -> Result<Vec<f64>> { s.split(';').map(number).collect() };
    let f = match kind {
        "exp" => LocalTimeWeight::Exponential { beta: number(&get("beta")?)? },
        "zero" => LocalTimeWeight::IndicatorZero,
        "step" => LocalTimeWeight::StepTable { breaks: list(get("breaks")?)?, values: list(get("values")?)? },
        other => return Err(Error::Config(format!("unknown weight {other:?}"))),
    };
    f.validate()?;
    Ok(f)
}

#[derive(Args, Debug)]
pub struct PenalizeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub clock: ClockArgs,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub x0: f64,
    /// Local time at zero accrued so far.
    #[arg(long, default_value_t = 0.0)]
    pub l: f64,
    /// Local time at the clock level (inverse-local-time clock).
    #[arg(long, default_value_t = 0.0)]
    pub level_l: f64,
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
}

fn default_seed() -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.parse().ok()).unwrap_or(SimConfig::default().seed)
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub clock: ClockArgs,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    /// Grid step for CSV paths.
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    /// Horizon of CSV paths; censoring horizon of estimates.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub x0: f64,
    /// Seed (default from LEVY_PENAL_SEED).
    #[arg(long)]
    pub seed: Option<u64>,
    /// paths.csv for sampled paths, report.json for an estimate.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// all, h, hitting, localtime, martingale, clocks, invlt, linfty or transient.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Multiplier on every path count.
    #[arg(long, default_value_t = 1.0)]
    pub path_scale: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn writer(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("grid must be lo:hi:step, got {text:?}")));
    }
    let (lo, hi, step) = (number(parts[0])?, number(parts[1])?, number(parts[2])?);
    if !(step > 0.0) || hi < lo {
        return Err(Error::Config(format!("bad grid {text:?}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

fn h_table(args: &HTableArgs) -> Result<()> {
    let model = args.model.model()?;
    let eng = args.model.engine();
    let xs = parse_grid(&args.xs)?;
    let mut w = writer(&args.out)?;
    let name = match args.quantity {
        Quantity::H => "h",
        Quantity::Hq => "h_q",
        Quantity::Rq => "r_q",
    };
    writeln!(w, "x,{name},abs_err,method")?;
    for x in xs {
        let v = match args.quantity {
            Quantity::H => resolvent::h(&model, x, &eng)?,
            Quantity::Hq => resolvent::h_q(&model, x, args.q, &eng)?,
            Quantity::Rq => resolvent::r_q(&model, x, args.q, &eng)?,
        };
        writeln!(w, "{x},{},{:e},{:?}", v.value, v.abs_err, v.method)?;
    }
    w.flush()?;
    Ok(())
}

fn hitprob(args: &HitprobArgs) -> Result<()> {
    let table = args.model.table()?;
    let p = match args.c {
        Some(c) => table.hit_prob_three(args.x, args.a, args.b, c)?,
        None => table.hit_prob_two(args.x, args.a, args.b)?,
    };
    println!("{p:.6}");
    Ok(())
}

fn excursion(args: &ExcursionArgs) -> Result<()> {
    let table = args.model.table()?;
    let mut w = writer(&args.out)?;
    writeln!(w, "a,h_b,n_hit_before_zero,n_hit_then_return,kappa")?;
    for &a in &args.a {
        writeln!(w, "{a},{},{},{},{}", table.h_b(a)?, table.excursion_rate(a)?, table.excursion_rate_returning(a)?, table.kappa)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PenalizeReport {
    model: String,
    clock: Clock,
    gamma: f64,
    m0: f64,
    conditional: f64,
    limit: f64,
}

fn penalize(args: &PenalizeArgs) -> Result<()> {
    let table = args.model.table()?;
    let clock = args.clock.clock()?;
    let f = args.clock.weight()?;
    let gamma = clock.limit_gamma();
    let state = MartingaleState { level_local_time: Some(args.level_l), ..MartingaleState::new(args.x0, args.l, args.t) };
    let report = PenalizeReport {
        model: table.model().name(),
        clock,
        gamma,
        m0: penalization::martingale_value(&MartingaleState::new(args.x0, 0.0, 0.0), &f, gamma, &table)?,
        conditional: penalization::clock_conditional(&state, &clock, &f, &table)?,
        limit: penalization::clock_limit(&state, &clock, &f, &table)?,
    };
    println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?);
    Ok(())
}

fn is_json(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn simulate(args: &SimulateArgs) -> Result<bool> {
    let model = args.model.model()?;
    let clock = args.clock.clock()?;
    let cfg = SimConfig { dt: args.dt, horizon: args.horizon, n_paths: args.paths, seed: args.seed.unwrap_or_else(default_seed), ..Default::default() };
    cfg.validate()?;
    if is_json(&args.out) {
        let f = args.clock.weight()?;
        let table = PotentialTable::new(model.clone(), args.model.engine(), 0.0)?;
        let target = penalization::clock_law(&table, args.x0, &clock, &f)?;
        let plan = WalkPlan::for_clock(&clock, args.horizon.max(1e8));
        eprintln!("simulating {} paths", cfg.n_paths);
        let est = mc_functional(&model, args.x0, &cfg, &plan, |o| f.eval(o.local_times[0]))?;
        let row = McReport::statistical("clock_law", &model.name(), format!("{clock:?} x={}", args.x0), est.mean, est.stderr, target, est.n, est.censored_rate);
        let pass = row.pass;
        let mut w = writer(&Some(args.out.clone()))?;
        writeln!(w, "{}", serde_json::to_string_pretty(&row).map_err(|e| Error::Config(e.to_string()))?)?;
        w.flush()?;
        Ok(pass)
    } else {
        let levels: Vec<f64> = match clock {
            Clock::InverseLocalTime { a, .. } => vec![a],
            _ => vec![],
        };
        let paths = run_paths(cfg.n_paths, cfg.seed, |rng| -> Result<_> {
            let p = sample_path(&model, args.x0, &cfg, &levels, rng)?;
            let ring = crate::simulation::clock_time(&p, &clock, &cfg, rng).ok();
            Ok((p, ring))
        });
        let mut w = writer(&Some(args.out.clone()))?;
        writeln!(w, "path,t,x,local_time_zero,clock_time")?;
        for (i, r) in paths.into_iter().enumerate() {
            let (p, ring) = r?;
            let ring = ring.map(|t| t.to_string()).unwrap_or_default();
            for k in 0..p.times.len() {
                writeln!(w, "{i},{},{},{},{ring}", p.times[k], p.states[k], p.local_time_zero[k])?;
            }
        }
        w.flush()?;
        Ok(true)
    }
}

fn verify(args: &VerifyArgs) -> Result<bool> {
    let cfg = VerifyConfig { seed: args.seed.unwrap_or_else(default_seed), path_scale: args.path_scale };
    if !(cfg.path_scale > 0.0) {
        return Err(Error::Config("path scale must be positive".into()));
    }
    let rows = run_suite(&args.suite, &cfg)?;
    for r in &rows {
        eprintln!(
            "{} {} [{}] {} estimate={:.6} target={:.6}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.model,
            r.params,
            r.estimate,
            r.target
        );
    }
    let mut w = writer(&args.out)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&rows).map_err(|e| Error::Config(e.to_string()))?)?;
    w.flush()?;
    Ok(rows.iter().all(|r| r.pass))
}

fn is_validation(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidModel(_)
            | Error::InvalidClock(_)
            | Error::Config(_)
            | Error::UnnormalizedWeight(_)
            | Error::StartingPointNotInH(_)
            | Error::MissingLevelLocalTime(_)
            | Error::UnsupportedModel(_)
            | Error::NotTransient
    )
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on a failed verification or computation, 2 on invalid input.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::HTable(a) => h_table(a).map(|_| true),
        Command::Hitprob(a) => hitprob(a).map(|_| true),
        Command::Excursion(a) => excursion(a).map(|_| true),
        Command::Penalize(a) => penalize(a).map(|_| true),
        Command::Simulate(a) => simulate(a),
        Command::Verify(a) => verify(a),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            if is_validation(&e) {
                2
            } else {
                1
            }
        }
    }
}
