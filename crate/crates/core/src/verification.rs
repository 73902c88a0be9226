//! Named verification rows: deterministic comparisons against closed forms
//! and Monte-Carlo estimates against the potential-theoretic formulas.

use std::f64::consts::LN_2;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LevyModel;
use crate::penalization::{self, Clock, LocalTimeWeight, MartingaleState};
use crate::potential::PotentialTable;
use crate::resolvent::{self, QuadratureEngine};
use crate::simulation::{mc_functional, path_rng, run_paths, Ending, SimConfig, WalkPlan, Walker};
use crate::stats::{ks_critical, ks_statistic, mean_stderr};

/// Statistical rows pass when the estimate is within this many standard errors.
pub const SIGMA_THRESHOLD: f64 = 3.0;
/// Statistical rows fail when more than this fraction of paths is censored.
pub const MAX_CENSORED: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Statistical,
    Deterministic,
    /// Kolmogorov–Smirnov statistic against its 1% critical value.
    Ks,
}

#[derive(Clone, Debug, Serialize)]
pub struct McReport {
    pub name: String,
    pub model: String,
    pub params: String,
    pub kind: RowKind,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub target: f64,
    pub sigmas: Option<f64>,
    pub deterministic_tol: Option<f64>,
    pub n_paths: Option<usize>,
    pub censored_rate: Option<f64>,
    pub rerun: bool,
    pub pass: bool,
}

impl McReport {
    pub fn deterministic(name: &str, model: &str, params: String, estimate: f64, target: f64, tol: f64) -> Self {
        McReport {
            name: name.into(),
            model: model.into(),
            params,
            kind: RowKind::Deterministic,
            estimate,
            stderr: None,
            target,
            sigmas: None,
            deterministic_tol: Some(tol),
            n_paths: None,
            censored_rate: None,
            rerun: false,
            pass: (estimate - target).abs() <= tol,
        }
    }

    pub fn statistical(name: &str, model: &str, params: String, estimate: f64, stderr: f64, target: f64, n: usize, censored: f64) -> Self {
        let sigmas = if stderr > 0.0 {
            (estimate - target).abs() / stderr
        } else if estimate == target {
            0.0
        } else {
            f64::INFINITY
        };
        McReport {
            name: name.into(),
            model: model.into(),
            params,
            kind: RowKind::Statistical,
            estimate,
            stderr: Some(stderr),
            target,
            sigmas: Some(sigmas),
            deterministic_tol: None,
            n_paths: Some(n),
            censored_rate: Some(censored),
            rerun: false,
            pass: sigmas <= SIGMA_THRESHOLD && censored <= MAX_CENSORED,
        }
    }

    pub fn ks(name: &str, model: &str, params: String, statistic: f64, n: usize) -> Self {
        let crit = ks_critical(n);
        McReport {
            name: name.into(),
            model: model.into(),
            params,
            kind: RowKind::Ks,
            estimate: statistic,
            stderr: None,
            target: 0.0,
            sigmas: None,
            deterministic_tol: Some(crit),
            n_paths: Some(n),
            censored_rate: None,
            rerun: false,
            pass: statistic <= crit,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Multiplier applied to every path count.
    pub path_scale: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: SimConfig::default().seed, path_scale: 1.0 }
    }
}

impl VerifyConfig {
    fn paths(&self, n: usize) -> usize {
        ((n as f64 * self.path_scale).round() as usize).max(100)
    }

    fn sim(&self, n: usize, salt: u64) -> SimConfig {
        SimConfig { n_paths: n, seed: self.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15), ..Default::default() }
    }
}

/// Runs `group(n)`; if any row fails, runs it once more with `4n` paths and
/// keeps the second verdict.
fn with_rerun(n: usize, group: impl Fn(usize) -> Result<Vec<McReport>>) -> Result<Vec<McReport>> {
    let start = std::time::Instant::now();
    let first = group(n)?;
    log::debug!("{} {} with {n} paths: {:.2?}", first[0].name, first[0].params, start.elapsed());
    if first.iter().all(|r| r.pass) {
        return Ok(first);
    }
    log::info!("rerunning {} with {} paths", first[0].name, 4 * n);
    let mut second = group(4 * n)?;
    for r in &mut second {
        r.rerun = true;
    }
    Ok(second)
}

fn salt(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

pub const SUITES: [&str; 8] = ["h", "hitting", "localtime", "martingale", "clocks", "invlt", "linfty", "transient"];

/// Runs one named suite, or all of them for `"all"`.
pub fn run_suite(name: &str, cfg: &VerifyConfig) -> Result<Vec<McReport>> {
    match name {
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s, cfg)?);
            }
            Ok(out)
        }
        "h" => {
            let mut out = brownian_closed_forms()?;
            out.extend(stable_closed_forms()?);
            out.extend(h_properties(cfg)?);
            Ok(out)
        }
        "hitting" => hit_probabilities(cfg),
        "localtime" => exponential_local_time(cfg),
        "martingale" => martingales(cfg),
        "clocks" => {
            let mut out = clock_limits()?;
            out.extend(clock_laws_mc(cfg)?);
            Ok(out)
        }
        "invlt" => inverse_local_time(cfg),
        "linfty" => penalized_l_infinity(cfg),
        "transient" => transient(cfg),
        other => Err(Error::Config(format!("unknown suite {other:?}; expected all or one of {SUITES:?}"))),
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Quadrature `r_q`, `h_q`, `h` against `e^{-√(2q)|x|}/√(2q)`, its `h_q` and `|x|`.
pub fn brownian_closed_forms() -> Result<Vec<McReport>> {
    let model = LevyModel::Brownian { sigma: 1.0 };
    let eng = QuadratureEngine::default().quadrature_only();
    let xs = grid(-5.0, 5.0, 0.5);
    let qs: [f64; 4] = [1e-3, 1e-2, 1e-1, 1.0];
    let (mut err_r, mut err_hq, mut err_h) = (0.0f64, 0.0f64, 0.0f64);
    for &q in &qs {
        let s = (2.0 * q).sqrt();
        for &x in &xs {
            let r = resolvent::r_q(&model, x, q, &eng)?.value;
            err_r = err_r.max((r - (-s * x.abs()).exp() / s).abs());
            let hq = resolvent::h_q(&model, x, q, &eng)?.value;
            err_hq = err_hq.max((hq - (1.0 - (-s * x.abs()).exp()) / s).abs());
        }
    }
    for &x in &xs {
        err_h = err_h.max((resolvent::h(&model, x, &eng)?.value - x.abs()).abs());
    }
    let p = "x in [-5,5] step 0.5, q in {1e-3,1e-2,1e-1,1}".to_string();
    Ok(vec![
        McReport::deterministic("closed_form_r_q", "bm", p.clone(), err_r, 0.0, 1e-8),
        McReport::deterministic("closed_form_h_q", "bm", p.clone(), err_hq, 0.0, 1e-8),
        McReport::deterministic("closed_form_h", "bm", "x in [-5,5] step 0.5".into(), err_h, 0.0, 1e-8),
    ])
}

/// Quadrature or extrapolated `h` against the stable closed form; the row
/// estimate is the largest relative error over the `x` grid.
pub fn stable_closed_forms() -> Result<Vec<McReport>> {
    let eng = QuadratureEngine::default().quadrature_only();
    let mut out = Vec::new();
    for &alpha in &[1.2, 1.5, 1.8] {
        for &beta in &[-0.5, 0.0, 0.5] {
            let model = LevyModel::stable_from_scale(alpha, 1.0, beta)?;
            let mut worst = 0.0f64;
            for x in grid(-4.0, 4.0, 0.5) {
                if x == 0.0 {
                    continue;
                }
                let exact = model.h_closed_form(x).unwrap();
                let v = resolvent::h(&model, x, &eng)?.value;
                worst = worst.max(((v - exact) / exact).abs());
            }
            out.push(McReport::deterministic(
                "stable_h_closed_form",
                &model.name(),
                format!("alpha={alpha} beta={beta} x in [-4,4] step 0.5"),
                worst,
                0.0,
                1e-4,
            ));
        }
    }
    Ok(out)
}

/// Subadditivity on random pairs, slopes `h(x)/|x| → 1/m²` and the
/// difference limit `h(x + y) - h(y) → ±x/m²`.
pub fn h_properties(cfg: &VerifyConfig) -> Result<Vec<McReport>> {
    let mut out = Vec::new();
    for name in ["bm", "jumps", "stable-sym-1.5", "stable-asym-1.5"] {
        let table = PotentialTable::with_defaults(LevyModel::preset(name)?)?;
        let mut rng = path_rng(cfg.seed ^ salt(name), 0);
        let mut violations = 0usize;
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-5.0..5.0);
            let y: f64 = rng.random_range(-5.0..5.0);
            let (hx, ex) = table.h_with_err(x)?;
            let (hy, ey) = table.h_with_err(y)?;
            let (hxy, exy) = table.h_with_err(x + y)?;
            let budget = 10.0 * (ex + ey + exy) + 1e-12 * (1.0 + hx + hy);
            if hxy > hx + hy + budget {
                violations += 1;
            }
        }
        out.push(McReport::deterministic("subadditivity", name, "1000 pairs in [-5,5]^2".into(), violations as f64, 0.0, 0.0));
    }
    let far = 1e3;
    for name in ["bm", "jumps"] {
        let table = PotentialTable::with_defaults(LevyModel::preset(name)?)?;
        let inv_m2 = 1.0 / table.m2;
        for x in [far, -far] {
            let slope = table.h(x)? / far;
            out.push(McReport::deterministic("slope", name, format!("x={x}"), slope, inv_m2, 0.02 * inv_m2));
        }
        for y in [far, -far] {
            let diff = table.h(y + 1.0)? - table.h(y)?;
            out.push(McReport::deterministic(
                "difference_limit",
                name,
                format!("h(y+1)-h(y), y={y}"),
                diff,
                y.signum() * inv_m2,
                0.02 * inv_m2,
            ));
        }
    }
    let table = PotentialTable::with_defaults(LevyModel::preset("stable-sym-1.5")?)?;
    let slope = table.h(far)? / far;
    out.push(McReport::deterministic("slope", "stable-sym-1.5", format!("x={far}"), slope, 0.0, 0.02));
    Ok(out)
}

struct HitCase {
    model: &'static str,
    x: f64,
    /// First point must be hit before the others.
    points: &'static [f64],
}

const HIT_CASES: [HitCase; 14] = [
    HitCase { model: "bm", x: 0.0, points: &[-1.0, 2.0] },
    HitCase { model: "bm", x: 0.5, points: &[1.0, -1.0] },
    HitCase { model: "bm", x: 0.0, points: &[1.0, -1.0] },
    HitCase { model: "jumps", x: 0.0, points: &[-1.0, 2.0] },
    HitCase { model: "jumps", x: 0.3, points: &[1.0, -1.5] },
    HitCase { model: "jumps", x: 0.0, points: &[1.0, -1.0, 2.0] },
    HitCase { model: "stable-sym-1.5", x: 0.0, points: &[1.0, -1.0] },
    HitCase { model: "stable-sym-1.5", x: 0.0, points: &[-1.0, 2.0] },
    HitCase { model: "stable-sym-1.5", x: 0.5, points: &[2.0, -1.0] },
    HitCase { model: "stable-asym-1.5", x: 0.0, points: &[1.0, -1.0] },
    HitCase { model: "stable-asym-1.5", x: 0.0, points: &[-1.0, 2.0] },
    HitCase { model: "stable-asym-1.5", x: 0.5, points: &[2.0, -1.0] },
    HitCase { model: "stable-asym-1.5", x: 0.0, points: &[1.0, -1.0, 2.0] },
    HitCase { model: "stable-sym-1.5", x: -0.5, points: &[1.0, -1.0, 2.0] },
];

fn base_paths(model: &LevyModel) -> usize {
    match model {
        LevyModel::Stable { .. } => 50_000,
        _ => 100_000,
    }
}

/// Monte-Carlo frequency of hitting the first point before the others,
/// against the two- and three-point formulas.
pub fn hit_probabilities(cfg: &VerifyConfig) -> Result<Vec<McReport>> {
    let mut out = Vec::new();
    for case in &HIT_CASES {
        let model = LevyModel::preset(case.model)?;
        let table = PotentialTable::with_defaults(model.clone())?;
        let p = case.points;
        let target = match p.len() {
            2 => table.hit_prob_two(case.x, p[0], p[1])?,
            _ => table.hit_prob_three(case.x, p[0], p[1], p[2])?,
        };
        let params = format!("x={} first={} others={:?}", case.x, p[0], &p[1..]);
        let plan = WalkPlan { stop_points: p.to_vec(), horizon: 1e6, ..Default::default() };
        let name = if p.len() == 2 { "hit_prob_two" } else { "hit_prob_three" };
        out.extend(with_rerun(cfg.paths(base_paths(&model)), |n| {
            let sim = cfg.sim(n, salt(&params) ^ salt(case.model));
            let est = mc_functional(&model, case.x, &sim, &plan, |o| (o.ending == Ending::Stopped(0)) as u8 as f64)?;
            Ok(vec![McReport::statistical(name, case.model, params.clone(), est.mean, est.stderr, target, n, est.censored_rate)])
        })?);
    }
    Ok(out)
}

/// `L_{T_a}` from zero: mean against `h^B(a)` and Kolmogorov–Smirnov
/// distance to the exponential law with that mean.
pub fn exponential_local_time(cfg: &VerifyConfig) -> Result<Vec<McReport>> {
    let mut out = Vec::new();
    for (name, a) in [("bm", 1.0), ("bm", 2.0), ("stable-sym-1.5", 1.0)] {
        let model = LevyModel::preset(name)?;
        let table = PotentialTable::with_defaults(model.clone())?;
        let hb = table.h_b(a)?;
        let plan = WalkPlan::for_clock(&Clock::Hitting { a }, 1e10);
        let params = format!("a={a}");
        out.extend(with_rerun(cfg.paths(base_paths(&model)), |n| {
            let sim = cfg.sim(n, salt("localtime") ^ salt(name) ^ a.to_bits());
            let walker = Walker::new(&model, sim.tuning.clone())?;
            let rows = run_paths(n, sim.seed, |rng| {
                let o = walker.run(0.0, &plan, rng);
                (o.local_times[0], o.ending == Ending::Horizon)
            });
            let censored = rows.iter().filter(|r| r.1).count() as f64 / n as f64;
            let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let (m, se) = mean_stderr(&values);
            let d = ks_statistic(&values, |l| if l <= 0.0 { 0.0 } else { -(-l / hb).exp_m1() });
            Ok(vec![
                McReport::statistical("local_time_mean", name, params.clone(), m, se, hb, n, censored),
                McReport::ks("local_time_ks", name, params.clone(), d, n),
            ])
        })?);
    }
    Ok(out)
}

/// `E_x M_t^{(γ,f)}` over a time grid, `E_x X_t f(L_t)` and the killed
/// invariance `E_x[h^{(γ)}(X_t); T_0 > t] = h^{(γ)}(x)`.
pub fn martingales(cfg: &VerifyConfig) -> Result<Vec<McReport>> {
    let times = [0.25, 0.5, 1.0, 2.0];
    let gammas = [-1.0, 0.0, 1.0];
    let f = LocalTimeWeight::Exponential { beta: 1.0 };
    let x0 = 0.5;
    let mut out = Vec::new();
    for name in ["bm", "jumps", "stable-sym-1.5", "stable-asym-1.5"] {
        let model = LevyModel::preset(name)?;
        let table = PotentialTable::with_defaults(model.clone())?;
        let fast = table.fast_h(-40.0, 40.0, 400)?;
        let finite = table.m2.is_finite();
        let hg = |x: f64, g: f64| if finite { fast.eval(x) + g * x / table.m2 } else { fast.eval(x) };
        let plan = WalkPlan { levels: vec![0.0], watch_points: vec![0.0], observe: times.to_vec(), horizon: 2.0, ..Default::default() };
        out.extend(with_rerun(cfg.paths(base_paths(&model)), |n| {
            let sim = cfg.sim(n, salt("martingale") ^ salt(name));
            let walker = Walker::new(&model, sim.tuning.clone())?;
            let obs = run_paths(n, sim.seed, |rng| walker.run(x0, &plan, rng).observations);
            let mut rows = Vec::new();
            for &g in &gammas {
                let m0 = penalization::martingale_value(&MartingaleState::new(x0, 0.0, 0.0), &f, g, &table)?;
                for (k, &t) in times.iter().enumerate() {
                    let v: Vec<f64> = obs.iter().map(|o| hg(o[k].x, g) * f.eval(o[k].local_times[0]) + f.tail(o[k].local_times[0])).collect();
                    let (m, se) = mean_stderr(&v);
                    rows.push(McReport::statistical("martingale_mean", name, format!("gamma={g} t={t} x={x0}"), m, se, m0, n, 0.0));
                }
                if finite {
                    let t = times[times.len() - 1];
                    let k = times.len() - 1;
                    let v: Vec<f64> = obs.iter().map(|o| if o[k].hit[0] { 0.0 } else { hg(o[k].x, g) }).collect();
                    let (m, se) = mean_stderr(&v);
                    rows.push(McReport::statistical("killed_invariance", name, format!("gamma={g} t={t} x={x0}"), m, se, hg(x0, g), n, 0.0));
                }
            }
            if finite {
                for (k, &t) in times.iter().enumerate() {
                    let v: Vec<f64> = obs.iter().map(|o| o[k].x * f.eval(o[k].local_times[0])).collect();
                    let (m, se) = mean_stderr(&v);
                    rows.push(McReport::statistical("x_times_f_of_l", name, format!("t={t} x={x0}"), m, se, x0 * f.eval(0.0), n, 0.0));
                }
            }
            Ok(rows)
        })?);
    }
    Ok(out)
}

/// The nine states on which clock conditionals are compared with their limits.
pub fn clock_state_grid() -> Vec<MartingaleState> {
    let mut out = Vec::new();
    for &x in &[-1.0, 0.0, 1.5] {
        for &l in &[0.0, 0.5, 1.0] {
            out.push(MartingaleState { level_local_time: Some(0.2), ..MartingaleState::new(x, l, 1.0) });
        }
    }
    out
}

/// Largest relative gap between the clock conditional and its limiting
/// martingale on [`clock_state_grid`].
pub fn clock_limit_gap(table: &PotentialTable, clock: &Clock, f: &LocalTimeWeight) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in clock_state_grid() {
        let n = penalization::clock_conditional(&s, clock, f, table)?;
        let m = penalization::clock_limit(&s, clock, f, table)?;
        worst = worst.max(((n - m) / m).abs());
    }
    Ok(worst)
}

/// The clocks of the deterministic limit check, with their parameters.
pub fn limit_clocks() -> Vec<Clock> {
    vec![
        Clock::Hitting { a: 1e3 },
        Clock::Hitting { a: -1e3 },
        Clock::Exponential { q: 1e-6 },
        Clock::TwoPoint { a: 1e3, b: 2e3 },
        Clock::TwoPoint { a: 2e3, b: 1e3 },
        Clock::InverseLocalTime { a: 1e3, u: 1.0 },
        Clock::InverseLocalTime { a: -1e3, u: 1.0 },
    ]
}

/// Deterministic comparison of each clock conditional with its limit
/// martingale, 1% relative, for the finite-variance presets.
pub fn clock_limits() -> Result<Vec<McReport>> {
    let f = LocalTimeWeight::Exponential { beta: 1.0 };
    let mut out = Vec::new();
    for name in ["bm", "jumps"] {
        let table = PotentialTable::with_defaults(LevyModel::preset(name)?)?;
        for clock in limit_clocks() {
            let gap = clock_limit_gap(&table, &clock, &f)?;
            out.push(McReport::deterministic(
                "clock_limit",
                name,
                format!("{clock:?} gamma={:.4}", clock.limit_gamma()),
                gap,
                0.0,
                0.01,
            ));
        }
    }
    Ok(out)
}

/// Monte-Carlo `E_x f(L_τ)` for each clock against the closed-form law.
pub fn clock_laws_mc(cfg: &VerifyConfig) -> Result<Vec<McReport>> {
    let f = LocalTimeWeight::Exponential { beta: 1.0 };
    let x0 = 0.3;
    let cases: [(&str, Clock); 7] = [
        ("bm", Clock::Exponential { q: 0.5 }),
        ("bm", Clock::Hitting { a: 2.0 }),
        ("bm", Clock::TwoPoint { a: 1.0, b: 2.0 }),
        ("bm", Clock::InverseLocalTime { a: 1.0, u: 1.0 }),
        ("jumps", Clock::Exponential { q: 0.5 }),
        ("jumps", Clock::TwoPoint { a: 1.0, b: 2.0 }),
        ("jumps", Clock::InverseLocalTime { a: -1.0, u: 0.5 }),
    ];
    let mut out = Vec::new();
    for (name, clock) in cases {
        let model = LevyModel::preset(name)?;
        let table = PotentialTable::with_defaults(model.clone())?;
        let target = penalization::clock_law(&table, x0, &clock, &f)?;
        let plan = WalkPlan::for_clock(&clock, 1e10);
        let params = format!("{clock:?} x={x0}");
        out.extend(with_rerun(cfg.paths(100_000), |n| {
            let sim = cfg.sim(n, salt(&params) ^ salt(name));
            let est = mc_functional(&model, x0, &sim, &plan, |o| f.eval(o.local_times[0]))?;
            Ok(vec![McReport::statistical("clock_law", name, params.clone(), est.mean, est.stderr, target, n, est.censored_rate)])
        })?);
    }
    Ok(out)
}

/// Normalisation of the inverse-local-time densities, the Laplace identity
/// `E_a e^{-β L_{η^a_u}} = e^{-uβ/(1+βh^B(a))}` and a Monte-Carlo law check.
pub fn inverse_local_time(cfg: &VerifyConfig) -> Result<Vec<McReport>> {
    let mut out = Vec::new();
    let mut worst_rho = 0.0f64;
    let mut worst_tilde = 0.0f64;
    for &(u, s) in &[(1.0, 2.0), (0.3, 5.0), (4.0, 0.5), (2.0, 2.0), (10.0, 3.0)] {
        let rho = penalization::inv_lt_integral(u, s, false, &|_| 1.0)?;
        worst_rho = worst_rho.max((rho + (-u / s).exp() - 1.0).abs());
        let tilde = penalization::inv_lt_integral(u, s, true, &|_| 1.0)?;
        worst_tilde = worst_tilde.max((tilde / s - 1.0).abs());
    }
    out.push(McReport::deterministic("inv_lt_rho_normalisation", "-", "5 (u, scale) pairs".into(), worst_rho, 0.0, 1e-8));
    out.push(McReport::deterministic("inv_lt_rho_tilde_normalisation", "-", "5 (u, scale) pairs".into(), worst_tilde, 0.0, 1e-8));
    for name in ["bm", "jumps", "stable-asym-1.5"] {
        let table = PotentialTable::with_defaults(LevyModel::preset(name)?)?;
        let mut worst = 0.0f64;
        for &(a, u, beta) in &[(1.0, 1.3, 0.8), (-2.0, 0.5, 2.0), (0.5, 3.0, 0.3)] {
            let hb = table.h_b(a)?;
            let f = LocalTimeWeight::Exponential { beta };
            let lhs = penalization::inv_lt_law(&table, a, a, u, &f)? / beta;
            let rhs = (-u * beta / (1.0 + beta * hb)).exp();
            worst = worst.max((lhs - rhs).abs());
        }
        out.push(McReport::deterministic("inv_lt_laplace", name, "3 (a, u, beta) triples".into(), worst, 0.0, 1e-8));
    }
    let f = LocalTimeWeight::Exponential { beta: 1.0 };
    for (name, a, u) in [("bm", 1.0, 1.0), ("jumps", 1.0, 1.0), ("jumps", -1.5, 0.5)] {
        let model = LevyModel::preset(name)?;
        let table = PotentialTable::with_defaults(model.clone())?;
        let target = penalization::inv_lt_law(&table, 0.0, a, u, &f)?;
        let plan = WalkPlan::for_clock(&Clock::InverseLocalTime { a, u }, 1e10);
        let params = format!("x=0 a={a} u={u}");
        out.extend(with_rerun(cfg.paths(100_000), |n| {
            let sim = cfg.sim(n, salt("invlt") ^ salt(&params) ^ salt(name));
            let est = mc_functional(&model, 0.0, &sim, &plan, |o| f.eval(o.local_times[0]))?;
            Ok(vec![McReport::statistical("inv_lt_law", name, params.clone(), est.mean, est.stderr, target, n, est.censored_rate)])
        })?);
    }
    Ok(out)
}

/// Weighted-path estimate of `Q(L_t ≥ l) = E[M_t 1{L_t ≥ l}]/M_0` at a large
/// `t` against `∫_l^∞ f`, for Brownian motion from zero.
pub fn penalized_l_infinity(cfg: &VerifyConfig) -> Result<Vec<McReport>> {
    let model = LevyModel::preset("bm")?;
    let table = PotentialTable::with_defaults(model.clone())?;
    let f = LocalTimeWeight::Exponential { beta: 1.0 };
    let t_end = 1e5;
    let levels = [0.25, LN_2, 1.5];
    let mut out = Vec::new();
    let plan = WalkPlan { levels: vec![0.0], horizon: t_end, ..Default::default() };
    for &g in &[0.0, 1.0] {
        out.extend(with_rerun(cfg.paths(1_000_000), |n| {
            let sim = cfg.sim(n, salt("linfty") ^ (g as u64));
            let walker = Walker::new(&model, sim.tuning.clone())?;
            let ends = run_paths(n, sim.seed, |rng| {
                let o = walker.run(0.0, &plan, rng);
                (o.x, o.local_times[0])
            });
            let m0 = penalization::martingale_value(&MartingaleState::new(0.0, 0.0, 0.0), &f, g, &table)?;
            let mut rows = Vec::new();
            for &l in &levels {
                let w: Vec<f64> = ends
                    .iter()
                    .map(|&(x, lt)| if lt >= l { (table.model().h_closed_form(x).unwrap() + g * x) * f.eval(lt) + f.tail(lt) } else { 0.0 } / m0)
                    .collect();
                let (m, se) = mean_stderr(&w);
                rows.push(McReport::statistical("penalized_l_infinity", "bm", format!("gamma={g} l={l:.6} t={t_end}"), m, se, f.tail(l), n, 0.0));
            }
            Ok(rows)
        })?);
    }
    Ok(out)
}

/// Transient suite for drifted Brownian motion: `κ` by extrapolation,
/// `κ M_0 = E f(L_∞)`, the excursion-rate identity, `h^B` saturation and
/// the escape probability `κ h(x)`.
pub fn transient(cfg: &VerifyConfig) -> Result<Vec<McReport>> {
    let name = "bm-drift";
    let model = LevyModel::preset(name)?;
    let eng = QuadratureEngine::default().quadrature_only();
    let kappa_num = resolvent::kappa(&model, &eng)?.value;
    let exact_kappa = model.mean().abs() / model.sigma().powi(2);
    let mut out = vec![McReport::deterministic("kappa_extrapolated", name, "q -> 0".into(), kappa_num, exact_kappa, 1e-6)];
    let table = PotentialTable::with_defaults(model.clone())?;
    let k = table.kappa;
    let mut worst = 0.0f64;
    for &a in &[0.5, 1.0, 2.0, -0.5, -1.0, -2.0] {
        let hb = table.h_b(a)?;
        let lhs = table.excursion_rate(a)? - table.excursion_rate_returning(a)?;
        let rhs = k * table.h(a)? * (1.0 - k * table.h(-a)?) / hb;
        worst = worst.max((lhs - rhs).abs());
    }
    out.push(McReport::deterministic(
        "excursion_rate_identity",
        name,
        "n(T_a<T_0) - n(T_a<T_0<inf) = kappa h(a) n(T_a<T_0), a in ±{0.5,1,2}".into(),
        worst,
        0.0,
        1e-10,
    ));
    let escape_side = -model.mean().signum();
    out.push(McReport::deterministic("h_b_saturation", name, "a=30 on the escape side".into(), table.h_b(-30.0 * escape_side)?, 1.0 / k, 1e-10));
    let f = LocalTimeWeight::Exponential { beta: 1.0 };
    for &x0 in &[0.0, 1.0, -1.0] {
        let target = k * penalization::transient_martingale(&MartingaleState::new(x0, 0.0, 0.0), &f, &table)?;
        let plan = WalkPlan { levels: vec![0.0], escape: Some(15.0), horizon: 1e6, ..Default::default() };
        let params = format!("x={x0} escape beyond 15");
        out.extend(with_rerun(cfg.paths(100_000), |n| {
            let sim = cfg.sim(n, salt("transient") ^ x0.to_bits());
            let est = mc_functional(&model, x0, &sim, &plan, |o| f.eval(o.local_times[0]))?;
            Ok(vec![McReport::statistical("kappa_m0", name, params.clone(), est.mean, est.stderr, target, n, est.censored_rate)])
        })?);
    }
    for &x0 in &[-1.0, -0.3, 1.0] {
        let target = table.escape_probability(x0)?;
        let plan = WalkPlan { stop_points: vec![0.0], escape: Some(15.0), horizon: 1e6, ..Default::default() };
        let params = format!("x={x0}");
        out.extend(with_rerun(cfg.paths(100_000), |n| {
            let sim = cfg.sim(n, salt("survival") ^ x0.to_bits());
            let est = mc_functional(&model, x0, &sim, &plan, |o| (o.ending == Ending::Escaped) as u8 as f64)?;
            Ok(vec![McReport::statistical("escape_probability", name, params.clone(), est.mean, est.stderr, target, n, est.censored_rate)])
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_pass_rules() {
        let r = McReport::statistical("t", "m", String::new(), 1.0, 0.1, 1.25, 100, 0.0);
        assert!(r.pass);
        let r = McReport::statistical("t", "m", String::new(), 1.0, 0.1, 1.35, 100, 0.0);
        assert!(!r.pass);
        let r = McReport::statistical("t", "m", String::new(), 1.0, 0.1, 1.0, 100, 0.02);
        assert!(!r.pass);
        assert!(McReport::deterministic("t", "m", String::new(), 1.0, 1.0 + 1e-9, 1e-8).pass);
    }

    #[test]
    fn unknown_suite_rejected() {
        assert!(run_suite("nope", &VerifyConfig::default()).is_err());
    }

    #[test]
    fn clock_limits_pass() {
        assert!(clock_limits().unwrap().iter().all(|r| r.pass));
    }
}
