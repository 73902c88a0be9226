//! Monte-Carlo paths: a uniform-grid skeleton with occupation-density local
//! times, and an adaptive walker with exact Gaussian bridge corrections used by
//! the verification suites.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LevyModel;
use crate::penalization::Clock;
use crate::stable::{occupation_spread, BridgeTable, StableSampler};

/// Step-size controls of [`Walker`]. Distances are measured in the natural
/// time scale of the model: `d²/σ²` for Gaussian parts, `d^α/c` for stable ones.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WalkTuning {
    /// Steps never exceed this fraction of the time scale of the distance
    /// to the second-nearest point of interest.
    pub rho_sep: f64,
    /// Approach factor towards stopping points (stable models, or Gaussian
    /// models when hitting times are needed precisely).
    pub rho_near: f64,
    /// Approach factor towards local-time levels (stable models).
    pub rho_local: f64,
    pub dt_max: f64,
    /// Smallest step used near a local-time level (stable models).
    pub local_floor: f64,
    /// Smallest step near a stopping point when precise times are requested.
    pub time_floor: f64,
    /// Half-width of the band that counts as hitting a point (stable models).
    pub stable_band: f64,
    /// Stable steps that touch a local-time level are bisected until the
    /// local time added on a touch is below this.
    pub local_chunk: f64,
    /// Jump-diffusion paths further than this from every point of interest
    /// take aggregated steps with the jumps summed inside the step.
    pub jump_far: f64,
    pub max_steps: u64,
}

impl Default for WalkTuning {
    fn default() -> Self {
        WalkTuning {
            rho_sep: 0.02,
            rho_near: 0.05,
            rho_local: 0.3,
            dt_max: 1e6,
            local_floor: 1e-5,
            time_floor: 1e-5,
            stable_band: 1e-6,
            local_chunk: 0.05,
            jump_far: 10.0,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    /// Grid step of [`sample_path`].
    pub dt: f64,
    pub horizon: f64,
    /// Half-width of the occupation band of [`estimate_local_time`].
    pub eps_local: f64,
    /// Half-width of the hitting band of [`clock_time`].
    pub delta_hit: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub tuning: WalkTuning,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-4,
            horizon: 1.0,
            eps_local: 0.02,
            delta_hit: 0.02,
            n_paths: 100_000,
            seed: 20240917,
            tuning: WalkTuning::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > 0.0
            && self.horizon > 0.0
            && self.eps_local > 0.0
            && self.delta_hit > 0.0
            && self.n_paths > 0
            && self.tuning.dt_max > 0.0;
        if !ok {
            return Err(Error::Config("simulation parameters must be positive".into()));
        }
        if self.eps_local < self.dt.sqrt() * 0.5 || self.delta_hit < self.dt.sqrt() * 0.5 {
            log::warn!("eps_local or delta_hit is below the typical grid increment √dt");
        }
        Ok(())
    }
}

/// Fresh generator for path `index` of the run seeded by `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `f` once per path on its own substream, in parallel, preserving order.
pub fn run_paths<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync + Send,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            f(&mut rng)
        })
        .collect()
}

#[derive(Clone, Debug)]
enum Dynamics {
    Gaussian { sigma: f64, drift: f64 },
    Jumps { sigma: f64, drift: f64, rate: f64, p_up: f64, eta_up: f64, eta_down: f64 },
    Stable { sampler: StableSampler, bridge: Arc<BridgeTable> },
}

impl Dynamics {
    fn new(model: &LevyModel) -> Result<Self> {
        model.validate()?;
        Ok(match *model {
            LevyModel::Brownian { sigma } => Dynamics::Gaussian { sigma, drift: 0.0 },
            LevyModel::DriftedBrownian { sigma, .. } => Dynamics::Gaussian { sigma, drift: model.mean() },
            LevyModel::JumpDiffusion { sigma, jump_rate, p_up, eta_up, eta_down } => Dynamics::Jumps {
                sigma,
                drift: -jump_rate * (p_up / eta_up - (1.0 - p_up) / eta_down),
                rate: jump_rate,
                p_up,
                eta_up,
                eta_down,
            },
            LevyModel::Stable { alpha, .. } => {
                let (c, beta) = model.stable_scale_skew().unwrap();
                Dynamics::Stable {
                    sampler: StableSampler::new(alpha, c, beta),
                    bridge: BridgeTable::shared(alpha, beta),
                }
            }
        })
    }

    /// Time for the process to move a distance `d`.
    fn time_scale(&self, d: f64) -> f64 {
        match self {
            Dynamics::Gaussian { sigma, .. } | Dynamics::Jumps { sigma, .. } => d * d / (sigma * sigma),
            Dynamics::Stable { sampler, .. } => d.powf(sampler.alpha) / sampler.scale,
        }
    }

    fn jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Dynamics::Jumps { p_up, eta_up, eta_down, .. } => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<f64>() < p_up {
                    e / eta_up
                } else {
                    -e / eta_down
                }
            }
            _ => 0.0,
        }
    }

    /// Exact increment over `dt`, without the jump part.
    fn continuous_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        match self {
            Dynamics::Gaussian { sigma, drift } | Dynamics::Jumps { sigma, drift, .. } => {
                let z: f64 = StandardNormal.sample(rng);
                drift * dt + sigma * dt.sqrt() * z
            }
            Dynamics::Stable { sampler, .. } => sampler.increment(dt, rng),
        }
    }

    /// Sum of the jumps falling in a window of length `dt`: Poisson counts of
    /// up- and down-jumps, each total being Gamma distributed.
    fn jump_sum<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        match *self {
            Dynamics::Jumps { rate, p_up, eta_up, eta_down, .. } => {
                let total = |mean: f64, eta: f64, rng: &mut R| -> f64 {
                    if mean <= 0.0 {
                        return 0.0;
                    }
                    let n: f64 = Poisson::new(mean).unwrap().sample(rng);
                    if n == 0.0 {
                        0.0
                    } else {
                        Gamma::new(n, 1.0 / eta).unwrap().sample(rng)
                    }
                };
                total(rate * p_up * dt, eta_up, rng) - total(rate * (1.0 - p_up) * dt, eta_down, rng)
            }
            _ => 0.0,
        }
    }

    fn jump_rate(&self) -> f64 {
        match *self {
            Dynamics::Jumps { rate, .. } => rate,
            _ => 0.0,
        }
    }
}

/// Probability that a Brownian bridge with variance rate `s2` from `x` to `y`
/// over `dt` touches `a`.
fn bridge_hit_probability(x: f64, y: f64, a: f64, s2: f64, dt: f64) -> f64 {
    if (x - a) * (y - a) <= 0.0 {
        1.0
    } else {
        (-2.0 * (x - a) * (y - a) / (s2 * dt)).exp()
    }
}

/// Local time at `level` of a Brownian bridge with volatility `sigma` from
/// `x` to `y` over `dt`, by inversion of
/// `P(L ≥ l) = exp(-((|x|+|y|+σl)² - (x-y)²)/(2σ²dt))`.
fn bridge_local_time<R: Rng + ?Sized>(x: f64, y: f64, level: f64, sigma: f64, dt: f64, rng: &mut R) -> f64 {
    let xs = (x - level) / sigma;
    let ys = (y - level) / sigma;
    let u = 1.0 - rng.random::<f64>();
    let l = ((xs - ys).powi(2) - 2.0 * dt * u.ln()).sqrt() - xs.abs() - ys.abs();
    if l > 0.0 {
        l / sigma
    } else {
        0.0
    }
}

/// What the walker tracks and when it stops.
#[derive(Clone, Debug, Default)]
pub struct WalkPlan {
    /// Stop at the first hit of any of these points.
    pub stop_points: Vec<f64>,
    /// Record the first hit time of these points and carry on.
    pub watch_points: Vec<f64>,
    /// Levels whose local time is accumulated.
    pub levels: Vec<f64>,
    /// Stop once the local time of `levels[i]` reaches `u`.
    pub inverse_local_time: Option<(usize, f64)>,
    /// Sorted times at which the state is recorded.
    pub observe: Vec<f64>,
    pub horizon: f64,
    /// Stop at an independent exponential time with this rate.
    pub exp_clock: Option<f64>,
    /// Stop once the path is this far beyond zero in the direction of the drift.
    pub escape: Option<f64>,
    /// Refine steps near stopping points so hitting times are accurate.
    pub precise_times: bool,
}

impl WalkPlan {
    /// Whether reaching the horizon means the path was censored.
    pub fn has_stopping_rule(&self) -> bool {
        !self.stop_points.is_empty() || self.inverse_local_time.is_some() || self.exp_clock.is_some() || self.escape.is_some()
    }

    /// Plan that stops at the given clock, with local time tracked at zero
    /// (index 0) and, for the inverse-local-time clock, at its level (index 1).
    pub fn for_clock(clock: &Clock, horizon: f64) -> Self {
        let mut plan = WalkPlan { levels: vec![0.0], horizon, ..Default::default() };
        match *clock {
            Clock::Exponential { q } => plan.exp_clock = Some(q),
            Clock::Hitting { a } => plan.stop_points = vec![a],
            Clock::TwoPoint { a, b } => plan.stop_points = vec![a, -b],
            Clock::InverseLocalTime { a, u } => {
                plan.levels.push(a);
                plan.inverse_local_time = Some((1, u));
            }
        }
        plan
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Ending {
    /// Hit `stop_points[i]`.
    Stopped(usize),
    InverseLocalTime,
    Clock,
    Escaped,
    /// Horizon or step budget exhausted: a censored path.
    Horizon,
}

#[derive(Clone, Debug)]
pub struct Observation {
    pub t: f64,
    pub x: f64,
    pub local_times: Vec<f64>,
    /// Whether each watch point has been hit by `t`.
    pub hit: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct PathOutcome {
    pub ending: Ending,
    pub t: f64,
    pub x: f64,
    pub local_times: Vec<f64>,
    pub first_hits: Vec<Option<f64>>,
    pub observations: Vec<Observation>,
    pub steps: u64,
}

/// Touch probability above which a stable step is split when a second point
/// is also above it.
const SPLIT_TOUCH: f64 = 1e-3;
const MAX_BISECTIONS: u32 = 60;

/// Adaptive exact-increment path generator.
///
/// Gaussian segments use exact bridge probabilities for point hits and exact
/// bridge local times. Jumps of the jump diffusion happen at their exact
/// Poisson times. Stable steps touch a point with the tabulated bridge
/// probability, or when they land within `stable_band` of it; a step that
/// touches a level adds the bridge's expected local time divided by the
/// touch probability, so local time keeps its conditional mean given both
/// endpoints.
#[derive(Clone, Debug)]
pub struct Walker {
    dynamics: Dynamics,
    /// `Var X_1`, used for aggregated jump-diffusion steps.
    variance_rate: f64,
    pub tuning: WalkTuning,
}

impl Walker {
    pub fn new(model: &LevyModel, tuning: WalkTuning) -> Result<Self> {
        Ok(Walker { dynamics: Dynamics::new(model)?, variance_rate: model.m2(), tuning })
    }

    /// Step length, and whether the step may aggregate jumps.
    fn choose_step(&self, x: f64, plan: &WalkPlan, hits: &[Option<f64>]) -> (f64, bool) {
        let tu = &self.tuning;
        let dyn_ = &self.dynamics;
        let stable = matches!(dyn_, Dynamics::Stable { .. });
        // Distances to the nearest and second nearest distinct points.
        let (mut d1, mut d2) = (f64::INFINITY, f64::INFINITY);
        let mut nearest = f64::NAN;
        let mut push = |a: f64| {
            let d = (x - a).abs();
            if a == nearest {
                return;
            }
            if d < d1 {
                d2 = d1;
                d1 = d;
                nearest = a;
            } else if d < d2 {
                d2 = d;
            }
        };
        let mut d_stop = f64::INFINITY;
        let mut d_level = f64::INFINITY;
        for &a in &plan.stop_points {
            let d = (x - a).abs();
            push(a);
            d_stop = d_stop.min(d);
        }
        for (i, &a) in plan.watch_points.iter().enumerate() {
            let d = (x - a).abs();
            push(a);
            if hits[i].is_none() {
                d_stop = d_stop.min(d);
            }
        }
        for &a in &plan.levels {
            let d = (x - a).abs();
            push(a);
            d_level = d_level.min(d);
        }
        let mut dt = tu.dt_max.min(tu.rho_sep * dyn_.time_scale(d2));
        if let Dynamics::Jumps { .. } = dyn_ {
            if d1 > tu.jump_far {
                return (tu.dt_max.min(tu.rho_sep * d1 * d1 / self.variance_rate), true);
            }
        }
        if stable {
            dt = dt.min(tu.rho_near * dyn_.time_scale(d_stop));
            dt = dt.min((tu.rho_local * dyn_.time_scale(d_level)).max(tu.local_floor));
        } else if plan.precise_times {
            dt = dt.min((tu.rho_near * dyn_.time_scale(d_stop)).max(tu.time_floor));
        }
        (dt, false)
    }

    /// Local times and touches of the stable bridge from `ends.0` to `ends.1`
    /// over `[t0, t0 + dt]`. While more than one point is likely to be
    /// touched the bridge is split at an exact midpoint, so that touches are
    /// resolved in time order. Returns the index of a touched stop point.
    #[allow(clippy::too_many_arguments)]
    fn stable_segment<R: Rng + ?Sized>(
        &self,
        sampler: &StableSampler,
        bridge: &BridgeTable,
        plan: &WalkPlan,
        ends: (f64, f64),
        t0: f64,
        dt: f64,
        depth: u32,
        out: &mut PathOutcome,
        rng: &mut R,
    ) -> Option<usize> {
        let (x, y) = ends;
        let touch = |a: f64| bridge.step(x, y, a, dt, sampler.scale, sampler.alpha);
        if depth < MAX_BISECTIONS {
            let unhit = plan.watch_points.iter().zip(&out.first_hits).filter(|(_, h)| h.is_none()).map(|(a, _)| a);
            let mut likely: Option<f64> = None;
            let mut split = false;
            for &a in plan.stop_points.iter().chain(unhit).chain(&plan.levels) {
                if touch(a).0 > SPLIT_TOUCH {
                    match likely {
                        Some(b) if b != a => {
                            split = true;
                            break;
                        }
                        _ => likely = Some(a),
                    }
                }
            }
            if !split {
                split = plan.levels.iter().any(|&a| {
                    let (p, mean) = touch(a);
                    p > SPLIT_TOUCH && mean > self.tuning.local_chunk * p
                });
            }
            if split {
                let m = bridge.sample_midpoint(sampler, x, y, dt, rng);
                let h = 0.5 * dt;
                if let Some(i) = self.stable_segment(sampler, bridge, plan, (x, m), t0, h, depth + 1, out, rng) {
                    return Some(i);
                }
                return self.stable_segment(sampler, bridge, plan, (m, y), t0 + h, h, depth + 1, out, rng);
            }
        }
        let band = self.tuning.stable_band;
        for (k, &a) in plan.levels.iter().enumerate() {
            let (p, mean) = touch(a);
            if p > 1e-12 && rng.random::<f64>() < p {
                out.local_times[k] += mean / p * occupation_spread(sampler.alpha, rng);
            }
        }
        let touches = |a: f64, rng: &mut R| {
            if (y - a).abs() < band {
                return true;
            }
            let p = touch(a).0;
            p > 1e-12 && rng.random::<f64>() < p
        };
        let mut stopped = None;
        for (i, &a) in plan.stop_points.iter().enumerate() {
            if stopped.is_none() && touches(a, rng) {
                stopped = Some(i);
            }
        }
        for (i, &a) in plan.watch_points.iter().enumerate() {
            if out.first_hits[i].is_none() && touches(a, rng) {
                out.first_hits[i] = Some(t0 + dt);
            }
        }
        stopped
    }

    /// Runs one path from `x0`.
    pub fn run<R: Rng + ?Sized>(&self, x0: f64, plan: &WalkPlan, rng: &mut R) -> PathOutcome {
        let tu = &self.tuning;
        let n_levels = plan.levels.len();
        let mut out = PathOutcome {
            ending: Ending::Horizon,
            t: 0.0,
            x: x0,
            local_times: vec![0.0; n_levels],
            first_hits: vec![None; plan.watch_points.len()],
            observations: Vec::with_capacity(plan.observe.len()),
            steps: 0,
        };
        for (i, &a) in plan.watch_points.iter().enumerate() {
            if x0 == a {
                out.first_hits[i] = Some(0.0);
            }
        }
        if let Some(i) = plan.stop_points.iter().position(|&a| a == x0) {
            out.ending = Ending::Stopped(i);
            return out;
        }
        let clock_time = plan.exp_clock.map(|q| {
            let e: f64 = Exp1.sample(rng);
            e / q
        });
        let rate = self.dynamics.jump_rate();
        let mut next_jump = if rate > 0.0 {
            let e: f64 = Exp1.sample(rng);
            e / rate
        } else {
            f64::INFINITY
        };
        let (sigma, stable) = match &self.dynamics {
            Dynamics::Gaussian { sigma, .. } | Dynamics::Jumps { sigma, .. } => (*sigma, None),
            Dynamics::Stable { sampler, bridge } => (0.0, Some((sampler.clone(), bridge.clone()))),
        };
        let mut obs_idx = 0;
        let (mut t, mut x) = (0.0f64, x0);
        loop {
            while obs_idx < plan.observe.len() && plan.observe[obs_idx] <= t {
                out.observations.push(Observation {
                    t: plan.observe[obs_idx],
                    x,
                    local_times: out.local_times.clone(),
                    hit: out.first_hits.iter().map(|h| h.is_some()).collect(),
                });
                obs_idx += 1;
            }
            if t >= plan.horizon || out.steps >= tu.max_steps {
                out.ending = Ending::Horizon;
                break;
            }
            let mut next_event = plan.horizon.min(next_jump);
            if obs_idx < plan.observe.len() {
                next_event = next_event.min(plan.observe[obs_idx]);
            }
            if let Some(c) = clock_time {
                next_event = next_event.min(c);
            }
            let (mut dt, aggregated) = self.choose_step(x, plan, &out.first_hits);
            if aggregated {
                next_event = plan.horizon;
                if obs_idx < plan.observe.len() {
                    next_event = next_event.min(plan.observe[obs_idx]);
                }
                if let Some(c) = clock_time {
                    next_event = next_event.min(c);
                }
            }
            let mut t_new = t + dt;
            if t_new >= next_event {
                t_new = next_event;
                dt = next_event - t;
            }
            out.steps += 1;
            if aggregated {
                // Far from every point: hits and local time are negligible here.
                x += self.dynamics.continuous_increment(dt, rng) + self.dynamics.jump_sum(dt, rng);
                t = t_new;
                let e: f64 = Exp1.sample(rng);
                next_jump = t + e / rate;
                if clock_time.is_some_and(|c| t >= c) {
                    out.ending = Ending::Clock;
                    break;
                }
                if let Some(cut) = plan.escape {
                    if let Dynamics::Jumps { drift, .. } = self.dynamics {
                        if drift != 0.0 && x * drift.signum() > cut {
                            out.ending = Ending::Escaped;
                            break;
                        }
                    }
                }
                continue;
            }
            let y = x + self.dynamics.continuous_increment(dt, rng);

            let mut stopped = None;
            match &stable {
                None => {
                    let s2 = sigma * sigma;
                    for (i, &a) in plan.stop_points.iter().enumerate() {
                        if stopped.is_none() && rng.random::<f64>() < bridge_hit_probability(x, y, a, s2, dt) {
                            stopped = Some(i);
                        }
                    }
                    for (i, &a) in plan.watch_points.iter().enumerate() {
                        if out.first_hits[i].is_none() && rng.random::<f64>() < bridge_hit_probability(x, y, a, s2, dt) {
                            out.first_hits[i] = Some(t_new);
                        }
                    }
                    for (k, &a) in plan.levels.iter().enumerate() {
                        out.local_times[k] += bridge_local_time(x, y, a, sigma, dt, rng);
                    }
                }
                Some((sampler, bridge)) => {
                    stopped = self.stable_segment(sampler, bridge, plan, (x, y), t, dt, 0, &mut out, rng);
                }
            }
            t = t_new;
            x = y;
            if let Some(i) = stopped {
                out.ending = Ending::Stopped(i);
                break;
            }
            if let Some((k, u)) = plan.inverse_local_time {
                if out.local_times[k] >= u {
                    out.ending = Ending::InverseLocalTime;
                    break;
                }
            }
            if clock_time.is_some_and(|c| t >= c) {
                out.ending = Ending::Clock;
                break;
            }
            if t >= next_jump {
                x += self.dynamics.jump(rng);
                let e: f64 = Exp1.sample(rng);
                next_jump = t + e / rate;
            }
            if let Some(cut) = plan.escape {
                let dir = match self.dynamics {
                    Dynamics::Gaussian { drift, .. } | Dynamics::Jumps { drift, .. } => drift.signum(),
                    Dynamics::Stable { .. } => 0.0,
                };
                if dir != 0.0 && x * dir > cut {
                    out.ending = Ending::Escaped;
                    break;
                }
            }
        }
        out.t = t;
        out.x = x;
        out
    }
}

/// Sample mean, its standard error and the censoring rate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub censored_rate: f64,
}

/// Mean of `functional` over `config.n_paths` walks from `x0` under `plan`.
pub fn mc_functional<F>(model: &LevyModel, x0: f64, config: &SimConfig, plan: &WalkPlan, functional: F) -> Result<McEstimate>
where
    F: Fn(&PathOutcome) -> f64 + Sync + Send,
{
    config.validate()?;
    let walker = Walker::new(model, config.tuning.clone())?;
    let rows = run_paths(config.n_paths, config.seed, |rng| {
        let o = walker.run(x0, plan, rng);
        (functional(&o), o.ending == Ending::Horizon && plan.has_stopping_rule())
    });
    let censored = rows.iter().filter(|r| r.1).count();
    let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let (mean, stderr) = crate::stats::mean_stderr(&values);
    Ok(McEstimate { mean, stderr, n: values.len(), censored_rate: censored as f64 / values.len() as f64 })
}

/// Uniform-grid skeleton with cumulative local times.
#[derive(Clone, Debug, Serialize)]
pub struct PathSample {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    /// Occupation-density local time at zero.
    pub local_time_zero: Vec<f64>,
    /// `(level, cumulative local time)`.
    pub local_time_levels: Vec<(f64, Vec<f64>)>,
    /// Whether the model has a Gaussian part (enables bridge corrections).
    pub sigma: f64,
}

/// Exact increments on the grid `0, dt, 2dt, …, horizon`, with local times
/// estimated at zero and at `levels` with half-width `config.eps_local`.
pub fn sample_path<R: Rng + ?Sized>(model: &LevyModel, x0: f64, config: &SimConfig, levels: &[f64], rng: &mut R) -> Result<PathSample> {
    config.validate()?;
    let dynamics = Dynamics::new(model)?;
    let n = (config.horizon / config.dt).ceil() as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut x = x0;
    times.push(0.0);
    states.push(x);
    let rate = dynamics.jump_rate();
    for k in 1..=n {
        x += dynamics.continuous_increment(config.dt, rng);
        if rate > 0.0 {
            let mut s = 0.0;
            loop {
                let e: f64 = Exp1.sample(rng);
                s += e / rate;
                if s > config.dt {
                    break;
                }
                x += dynamics.jump(rng);
            }
        }
        times.push(k as f64 * config.dt);
        states.push(x);
    }
    let mut path = PathSample {
        dt: config.dt,
        times,
        states,
        local_time_zero: Vec::new(),
        local_time_levels: Vec::new(),
        sigma: model.sigma(),
    };
    path.local_time_zero = estimate_local_time(&path, 0.0, config.eps_local);
    path.local_time_levels = levels.iter().map(|&a| (a, estimate_local_time(&path, a, config.eps_local))).collect();
    Ok(path)
}

/// `L̂_t = (1/2ε) ∫_0^t 1{|X_s - level| < ε} ds` on the grid (left-point rule).
pub fn estimate_local_time(path: &PathSample, level: f64, eps: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(path.states.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in path.states.windows(2) {
        if (w[0] - level).abs() < eps {
            acc += path.dt / (2.0 * eps);
        }
        out.push(acc);
    }
    out
}

/// First grid time at which `clock` rings on `path`. Point hits use the band
/// `|X - a| < delta_hit`, plus the Brownian bridge crossing probability
/// between grid points when the model has a Gaussian part.
pub fn clock_time<R: Rng + ?Sized>(path: &PathSample, clock: &Clock, config: &SimConfig, rng: &mut R) -> Result<f64> {
    clock.validate()?;
    let horizon = *path.times.last().unwrap();
    let hits = |points: &[f64], rng: &mut R| -> Option<f64> {
        let s2 = path.sigma * path.sigma;
        for (k, w) in path.states.windows(2).enumerate() {
            for &a in points {
                let band = (w[1] - a).abs() < config.delta_hit;
                let bridge = s2 > 0.0 && rng.random::<f64>() < bridge_hit_probability(w[0], w[1], a, s2, path.dt);
                if band || bridge {
                    return Some(path.times[k + 1]);
                }
            }
        }
        None
    };
    let found = match *clock {
        Clock::Exponential { q } => {
            let e: f64 = Exp1.sample(rng);
            Some(e / q).filter(|&t| t <= horizon)
        }
        Clock::Hitting { a } => hits(&[a], rng),
        Clock::TwoPoint { a, b } => hits(&[a, -b], rng),
        Clock::InverseLocalTime { a, u } => {
            let lt = estimate_local_time(path, a, config.eps_local);
            lt.iter().position(|&l| l >= u).map(|k| path.times[k])
        }
    };
    found.ok_or(Error::HorizonExceeded(horizon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_stderr;

    #[test]
    fn stable_local_time_mean_at_fixed_horizon() {
        let model = LevyModel::preset("stable-sym-1.5").unwrap();
        let (c, _) = model.stable_scale_skew().unwrap();
        let exact = crate::stable::CompensatorTable::shared(1.5, 0.0).expected_local_time(0.5, 1.0, c);
        let w = Walker::new(&model, WalkTuning::default()).unwrap();
        let plan = WalkPlan { levels: vec![0.0], horizon: 1.0, ..WalkPlan::default() };
        let v: Vec<f64> = run_paths(20_000, 21, |rng| w.run(0.5, &plan, rng).local_times[0]);
        let (m, se) = mean_stderr(&v);
        assert!((m - exact).abs() < 4.0 * se, "{m} {se} {exact}");
    }

    #[test]
    fn coinciding_points_do_not_shrink_steps() {
        let w = Walker::new(&LevyModel::Brownian { sigma: 1.0 }, WalkTuning::default()).unwrap();
        let plan = WalkPlan { levels: vec![0.0], watch_points: vec![0.0], horizon: 2.0, ..WalkPlan::default() };
        let mut rng = path_rng(2, 0);
        for _ in 0..100 {
            assert!(w.run(1e-3, &plan, &mut rng).steps < 10);
        }
    }

    fn bm() -> LevyModel {
        LevyModel::Brownian { sigma: 1.0 }
    }

    #[test]
    fn bridge_local_time_mean() {
        // E L^0_1 for a Brownian path from 0 is √(2/π).
        let mut rng = path_rng(1, 0);
        let n = 200_000;
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                bridge_local_time(0.0, z, 0.0, 1.0, 1.0, &mut rng)
            })
            .collect();
        let (m, se) = mean_stderr(&v);
        assert!((m - (2.0 / std::f64::consts::PI).sqrt()).abs() < 4.0 * se);
    }

    #[test]
    fn grid_variance_and_replay() {
        let cfg = SimConfig { dt: 1e-2, n_paths: 20_000, ..Default::default() };
        let ends = run_paths(cfg.n_paths, cfg.seed, |rng| *sample_path(&bm(), 0.0, &cfg, &[], rng).unwrap().states.last().unwrap());
        let sq: Vec<f64> = ends.iter().map(|x| x * x).collect();
        let (m, se) = mean_stderr(&sq);
        assert!((m - 1.0).abs() < 4.0 * se);
        let again = run_paths(100, cfg.seed, |rng| *sample_path(&bm(), 0.0, &cfg, &[], rng).unwrap().states.last().unwrap());
        assert_eq!(&ends[..100], &again[..]);
    }

    #[test]
    fn exit_time_mean() {
        let cfg = SimConfig { n_paths: 20_000, ..Default::default() };
        let plan = WalkPlan { stop_points: vec![1.0, -1.0], horizon: 100.0, precise_times: true, ..Default::default() };
        let est = mc_functional(&bm(), 0.0, &cfg, &plan, |o| o.t).unwrap();
        assert!((est.mean - 1.0).abs() < 4.0 * est.stderr, "{est:?}");
        assert_eq!(est.censored_rate, 0.0);
    }

    #[test]
    fn local_time_before_hitting() {
        let cfg = SimConfig { n_paths: 20_000, ..Default::default() };
        let plan = WalkPlan::for_clock(&Clock::Hitting { a: 1.0 }, 1e8);
        let est = mc_functional(&bm(), 0.0, &cfg, &plan, |o| o.local_times[0]).unwrap();
        assert!((est.mean - 2.0).abs() < 4.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn exponential_clock_mean() {
        let cfg = SimConfig { n_paths: 10_000, ..Default::default() };
        let plan = WalkPlan::for_clock(&Clock::Exponential { q: 2.0 }, 1e3);
        let est = mc_functional(&bm(), 0.0, &cfg, &plan, |o| o.t).unwrap();
        assert!((est.mean - 0.5).abs() < 4.0 * est.stderr);
    }

    #[test]
    fn two_point_symmetry() {
        let cfg = SimConfig { n_paths: 20_000, ..Default::default() };
        let plan = WalkPlan::for_clock(&Clock::TwoPoint { a: 1.0, b: 1.0 }, 1e3);
        let est = mc_functional(&bm(), 0.0, &cfg, &plan, |o| (o.ending == Ending::Stopped(0)) as u8 as f64).unwrap();
        assert!((est.mean - 0.5).abs() < 4.0 * est.stderr);
    }

    #[test]
    fn occupation_estimator_flat_off_level() {
        let cfg = SimConfig { dt: 1e-3, ..Default::default() };
        let mut rng = path_rng(3, 0);
        let p = sample_path(&bm(), 0.0, &cfg, &[50.0], &mut rng).unwrap();
        assert!(p.local_time_levels[0].1.iter().all(|&l| l == 0.0));
        assert!(p.local_time_zero.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn stable_local_time_before_hitting() {
        let model = LevyModel::preset("stable-sym-1.5").unwrap();
        let cfg = SimConfig { n_paths: 5_000, ..Default::default() };
        let plan = WalkPlan::for_clock(&Clock::Hitting { a: 1.0 }, 1e8);
        let est = mc_functional(&model, 0.0, &cfg, &plan, |o| o.local_times[0]).unwrap();
        let target = 2.0 * model.h_closed_form(1.0).unwrap();
        assert!((est.mean - target).abs() < 4.0 * est.stderr, "{est:?} {target}");
    }
}
