//! Strictly stable increments (Chambers–Mallows–Stuck), the table of
//! expected local time over one step, used as a local-time compensator, and
//! the probability that a step's bridge touches a point.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use libm::tgamma as gamma;
use num_complex::Complex64;
use rand::Rng;

use crate::quadrature::kronrod_nodes;

/// Sampler for increments with `E e^{iλ X_t} = exp(-t c |λ|^α (1 - iβ sgn λ tan(πα/2)))`.
#[derive(Clone, Debug)]
pub struct StableSampler {
    pub alpha: f64,
    pub scale: f64,
    pub beta: f64,
    shift: f64,
    factor: f64,
}

impl StableSampler {
    pub fn new(alpha: f64, scale: f64, beta: f64) -> Self {
        let t = beta * (PI * alpha / 2.0).tan();
        StableSampler {
            alpha,
            scale,
            beta,
            shift: t.atan() / alpha,
            factor: (1.0 + t * t).powf(0.5 / alpha),
        }
    }

    /// One variate at unit time and unit scale.
    pub fn standard<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.alpha;
        let mut u: f64 = rng.random();
        while u == 0.0 {
            u = rng.random();
        }
        let v = PI * (u - 0.5);
        let w = -(1.0 - rng.random::<f64>()).ln();
        let arg = a * (v + self.shift);
        self.factor * arg.sin() / v.cos().powf(1.0 / a) * ((v - arg).cos() / w).powf((1.0 - a) / a)
    }

    pub fn increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        (self.scale * dt).powf(1.0 / self.alpha) * self.standard(rng)
    }
}

/// Lévy densities `(c₊, c₋)` of the unit-scale stable law with skewness `β`.
fn unit_levy_densities(alpha: f64, beta: f64) -> (f64, f64) {
    let total = 2.0 * alpha * gamma(alpha) * (PI * alpha / 2.0).sin() / PI;
    (0.5 * (1.0 + beta) * total, 0.5 * (1.0 - beta) * total)
}

/// Unit-time, unit-scale density `p(w)` on the grid `w = ±j·step`, `j ≤ n`.
fn density_grid(alpha: f64, beta: f64, step: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let skew = beta * (PI * alpha / 2.0).tan();
    let lambda_max = 50f64.powf(1.0 / alpha);
    let mut edges = vec![0.0, 1e-3, 1e-2, 0.1];
    let mut e = 0.1;
    while e < lambda_max {
        e = (e + 0.08).min(lambda_max);
        edges.push(e);
    }
    let mut nodes = Vec::new();
    for win in edges.windows(2) {
        for (l, wt) in kronrod_nodes(win[0], win[1]) {
            let m = l.powf(alpha);
            let char_fn = Complex64::new(-m, m * skew).exp();
            nodes.push((l, wt * char_fn.re, wt * char_fn.im));
        }
    }
    // p(w) = (1/π) ∫_0^∞ Re(e^{-iλw} φ(λ)) dλ.
    let eval = |w: f64| -> f64 {
        let mut s = 0.0;
        for &(l, re, im) in &nodes {
            let (sn, cs) = (l * w).sin_cos();
            s += cs * re + sn * im;
        }
        s / PI
    };
    let pos = (0..=n).map(|j| eval(j as f64 * step)).collect();
    let neg = (0..=n).map(|j| eval(-(j as f64) * step)).collect();
    (pos, neg)
}

type Cache<T> = OnceLock<Mutex<HashMap<(u64, u64), Arc<T>>>>;

fn cached<T>(cache: &'static Cache<T>, alpha: f64, beta: f64, build: impl FnOnce(f64, f64) -> T) -> Arc<T> {
    let cache = cache.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (alpha.to_bits(), beta.to_bits());
    if let Some(t) = cache.lock().unwrap().get(&key) {
        return t.clone();
    }
    let t = Arc::new(build(alpha, beta));
    cache.lock().unwrap().entry(key).or_insert(t).clone()
}

/// Unit-time, unit-scale density: Fourier values on a grid, power tails
/// `c_± |w|^{-1-α}` beyond it.
#[derive(Clone, Debug)]
pub(crate) struct UnitDensity {
    alpha: f64,
    /// `p(j·step)`.
    pos: Vec<f64>,
    /// `p(-j·step)`.
    neg: Vec<f64>,
    c_plus: f64,
    c_minus: f64,
    /// Largest grid value and its abscissa.
    mode: (f64, f64),
}

impl UnitDensity {
    pub(crate) fn shared(alpha: f64, beta: f64) -> Arc<Self> {
        static CACHE: Cache<UnitDensity> = OnceLock::new();
        cached(&CACHE, alpha, beta, |alpha, beta| {
            let (pos, neg) = density_grid(alpha, beta, TABLE_STEP, TABLE_NODES);
            let (c_plus, c_minus) = unit_levy_densities(alpha, beta);
            let mut mode = (0.0, 0.0);
            for (p, sign) in [(&pos, 1.0), (&neg, -1.0)] {
                for (j, &v) in p.iter().enumerate() {
                    if v > mode.0 {
                        mode = (v, sign * j as f64 * TABLE_STEP);
                    }
                }
            }
            UnitDensity { alpha, pos, neg, c_plus, c_minus, mode }
        })
    }

    fn eval(&self, w: f64) -> f64 {
        let (p, c) = if w >= 0.0 { (&self.pos, self.c_plus) } else { (&self.neg, self.c_minus) };
        let r = w.abs() / TABLE_STEP;
        let j = r as usize;
        if j >= p.len() - 1 {
            return c * w.abs().powf(-1.0 - self.alpha);
        }
        let f = r - j as f64;
        p[j] * (1.0 - f) + p[j + 1] * f
    }

    /// Density of the increment over time `t` at `w`.
    fn at_time(&self, t: f64, w: f64) -> f64 {
        let s = t.powf(1.0 / self.alpha);
        self.eval(w / s) / s
    }

    /// `sup_{|w| ≥ r} p(w)`, using unimodality.
    fn max_beyond(&self, r: f64) -> f64 {
        if r <= self.mode.1.abs() + TABLE_STEP {
            self.mode.0
        } else {
            self.eval(r).max(self.eval(-r))
        }
    }
}

/// `g(z) = ∫_0^1 p_s(-z) ds`: expected local time at zero over unit time from
/// `z`, for the unit-scale process. One side of the line is stored per table.
#[derive(Clone, Debug)]
pub struct CompensatorTable {
    alpha: f64,
    step: f64,
    /// `p(-w)` on the grid, used for starting points `z > 0`.
    p_right: Vec<f64>,
    /// `p(w)`, used for `z < 0`.
    p_left: Vec<f64>,
    /// `∫_{w_j}^∞ u^{-α} p(∓u) du` on the grid.
    i_right: Vec<f64>,
    i_left: Vec<f64>,
    tail_right: f64,
    tail_left: f64,
    g0: f64,
}

const TABLE_STEP: f64 = 0.01;
const TABLE_NODES: usize = 6000;

impl CompensatorTable {
    pub fn build(alpha: f64, beta: f64) -> Self {
        let d = UnitDensity::shared(alpha, beta);
        let (c_plus, c_minus) = (d.c_plus, d.c_minus);
        let mut t = CompensatorTable {
            alpha,
            step: TABLE_STEP,
            p_right: d.neg.clone(),
            p_left: d.pos.clone(),
            i_right: Vec::new(),
            i_left: Vec::new(),
            tail_right: c_minus,
            tail_left: c_plus,
            g0: 0.0,
        };
        t.g0 = t.p_right[0] * alpha / (alpha - 1.0);
        t.i_right = t.cumulative(&t.p_right, c_minus);
        t.i_left = t.cumulative(&t.p_left, c_plus);
        t
    }

    /// Cached table for `(α, β)`.
    pub fn shared(alpha: f64, beta: f64) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<(u64, u64), Arc<CompensatorTable>>>> = OnceLock::new();
        cached(&CACHE, alpha, beta, Self::build)
    }

    /// `∫_z^{w_{j+1}} u^{-α}(A + s u) du` with `p` linear on cell `j`.
    fn cell_integral(&self, p: &[f64], j: usize, z: f64) -> f64 {
        let a = self.alpha;
        let (w0, w1) = (j as f64 * self.step, (j + 1) as f64 * self.step);
        let s = (p[j + 1] - p[j]) / self.step;
        let intercept = p[j] - s * w0;
        intercept * (z.powf(1.0 - a) - w1.powf(1.0 - a)) / (a - 1.0) + s * (w1.powf(2.0 - a) - z.powf(2.0 - a)) / (2.0 - a)
    }

    fn cumulative(&self, p: &[f64], tail_density: f64) -> Vec<f64> {
        let n = p.len() - 1;
        let w_max = n as f64 * self.step;
        let mut out = vec![0.0; n + 1];
        out[n] = tail_density * w_max.powf(-2.0 * self.alpha) / (2.0 * self.alpha);
        for j in (1..n).rev() {
            out[j] = out[j + 1] + self.cell_integral(p, j, j as f64 * self.step);
        }
        out
    }

    /// `g(z)`.
    pub fn eval(&self, z: f64) -> f64 {
        if z == 0.0 {
            return self.g0;
        }
        let (p, cum, tail) = if z > 0.0 {
            (&self.p_right, &self.i_right, self.tail_right)
        } else {
            (&self.p_left, &self.i_left, self.tail_left)
        };
        let r = z.abs();
        let a = self.alpha;
        let n = p.len() - 1;
        let j = (r / self.step) as usize;
        if j >= n {
            return 0.5 * tail * r.powf(-1.0 - a);
        }
        a * r.powf(a - 1.0) * (cum[j + 1] + self.cell_integral(p, j, r))
    }

    /// Unit-scale density `p(0)`.
    pub fn density_at_zero(&self) -> f64 {
        self.p_right[0]
    }

    /// `E_x L^level_dt` for the process with scale `c`.
    pub fn expected_local_time(&self, x_minus_level: f64, dt: f64, scale: f64) -> f64 {
        let sd = (scale * dt).powf(1.0 / self.alpha);
        dt / sd * self.eval(x_minus_level / sd)
    }
}

/// `P(T_0 ≤ t)` for the unit process started at `side = ±1`. Since
/// `p_t(-x) = ∫_0^t P(T_0 ∈ ds) p_{t-s}(0)` and `p_r(0) ∝ r^{-1/α}`, this is an
/// Abel equation, inverted as
/// `P(T_0 ≤ t) = (sin πγ/π) ∫_0^t G(s) (t-s)^{γ-1} ds`, `G(s) = p_s(-x)/p_1(0)`, `γ = 1/α`.
pub(crate) fn hitting_cdf(d: &UnitDensity, side: f64, t: f64) -> f64 {
    let gam = 1.0 / d.alpha;
    let p0 = d.eval(0.0);
    let big_g = |s: f64| d.at_time(s, -side) / p0;
    let half = 0.5 * t;
    let mut lower = 0.0;
    let mut hi = half;
    while hi > 1e-12 * t.min(1.0) {
        for (s, w) in kronrod_nodes(0.5 * hi, hi) {
            lower += w * big_g(s) * (t - s).powf(gam - 1.0);
        }
        hi *= 0.5;
    }
    // Near s = t substitute t - s = ρ^{1/γ}.
    let rho_max = half.powf(gam);
    let mut upper = 0.0;
    let pieces = 8;
    for k in 0..pieces {
        let (r0, r1) = (rho_max * k as f64 / pieces as f64, rho_max * (k + 1) as f64 / pieces as f64);
        for (rho, w) in kronrod_nodes(r0, r1) {
            upper += w * big_g(t - rho.powf(1.0 / gam));
        }
    }
    ((PI * gam).sin() / PI * (lower + upper / gam)).clamp(0.0, 1.0)
}

/// Bridge quantities of one step from `x` to `y`, as functions of
/// `u = (x - a)/s`, `v = (y - a)/s` with `s` the step's scale:
///
/// * the probability that the bridge touches `a`,
///   `φ(u, v) = ∫_0^1 P_u(T_0 ∈ dr) p_{1-r}(v) / p_1(v - u)`;
/// * the bridge's expected local time at `a`,
///   `ℓ(u, v) = ∫_0^1 p_r(-u) p_{1-r}(v) dr / p_1(v - u)`.
///
/// Both are tabulated on a grid uniform in `sgn(u)|u|^{1/2}`; `ℓ` is rescaled
/// per row so that `∫ ℓ(u, v) p_1(v - u) dv` reproduces the compensator `g(u)`.
#[derive(Clone, Debug)]
pub struct BridgeTable {
    nodes: usize,
    edge: f64,
    touch: Vec<f64>,
    /// `ln ℓ`, interpolated linearly.
    log_occupation: Vec<f64>,
    density: Arc<UnitDensity>,
}

const BRIDGE_NODES: usize = 161;
const BRIDGE_EDGE: f64 = 8.0;
/// `log10` range and resolution of the hitting-time density grid.
const HIT_LOG_MIN: f64 = -10.0;
const HIT_LOG_MAX: f64 = 8.0;
const HIT_PER_DECADE: usize = 100;

/// Draw with mean one from the law of `L_1 / E[L_1]`, the local time at its
/// starting point of an `alpha`-stable process (Mittag-Leffler of index
/// `1 - 1/alpha`), via Kanter's representation of the positive stable law.
pub fn occupation_spread<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let rho = 1.0 - 1.0 / alpha;
    let u = PI * rng.random::<f64>();
    let w: f64 = -(1.0 - rng.random::<f64>()).ln();
    let kanter = ((rho * u).sin().powf(rho) * ((1.0 - rho) * u).sin().powf(1.0 - rho) / u.sin()).powf(1.0 / (1.0 - rho));
    gamma(1.0 + rho) * (w / kanter).powf(1.0 - rho)
}

fn bridge_coord(i: usize) -> f64 {
    let c = -BRIDGE_EDGE + 2.0 * BRIDGE_EDGE * i as f64 / (BRIDGE_NODES - 1) as f64;
    c.signum() * c * c
}

impl BridgeTable {
    pub fn build(alpha: f64, beta: f64) -> Self {
        let d = UnitDensity::shared(alpha, beta);
        let n_t = ((HIT_LOG_MAX - HIT_LOG_MIN) as usize) * HIT_PER_DECADE;
        let times: Vec<f64> = (0..=n_t).map(|k| 10f64.powf(HIT_LOG_MIN + k as f64 / HIT_PER_DECADE as f64)).collect();
        // Densities of T_0 from +1 and from -1, by differencing the distribution function.
        let density = |side: f64| -> Vec<f64> {
            let cdf: Vec<f64> = times.iter().map(|&t| hitting_cdf(&d, side, t)).collect();
            (0..=n_t)
                .map(|k| {
                    let (i, j) = (k.saturating_sub(1), (k + 1).min(n_t));
                    ((cdf[j] - cdf[i]) / (times[j] - times[i])).max(0.0)
                })
                .collect()
        };
        let (f_right, f_left) = (density(1.0), density(-1.0));
        let log_step = (10f64).ln() / HIT_PER_DECADE as f64;
        let log_min = HIT_LOG_MIN * 10f64.ln();
        let hit_density = |side: f64, t: f64| -> f64 {
            let f = if side > 0.0 { &f_right } else { &f_left };
            let r = (t.ln() - log_min) / log_step;
            if r < 0.0 || r >= n_t as f64 {
                return 0.0;
            }
            let j = r as usize;
            let w = r - j as f64;
            f[j] * (1.0 - w) + f[j + 1] * w
        };
        let mut breaks = vec![0.0];
        for k in (1..=40).rev() {
            breaks.push(0.5f64.powi(k));
        }
        for k in 2..=40 {
            breaks.push(1.0 - 0.5f64.powi(k));
        }
        breaks.push(1.0);
        let rule: Vec<(f64, f64)> = breaks.windows(2).flat_map(|w| kronrod_nodes(w[0], w[1])).collect();
        let n = BRIDGE_NODES;
        let mut touch = vec![0.0; n * n];
        let mut occupation = vec![0.0; n * n];
        for i in 0..n {
            let u = bridge_coord(i);
            let time_scale = u.abs().powf(-alpha);
            for j in 0..n {
                let v = bridge_coord(j);
                let den = d.eval(v - u);
                let mut occ = 0.0;
                let mut hit = 0.0;
                for &(r, w) in &rule {
                    let arrive = d.at_time(1.0 - r, v);
                    occ += w * d.at_time(r, -u) * arrive;
                    if u != 0.0 {
                        hit += w * time_scale * hit_density(u.signum(), r * time_scale) * arrive;
                    }
                }
                touch[i * n + j] = if u == 0.0 || v == 0.0 { 1.0 } else { (hit / den).clamp(0.0, 1.0) };
                occupation[i * n + j] = occ / den;
            }
        }
        let log_occupation = occupation.iter().map(|&o| o.max(1e-300).ln()).collect();
        let mut table = BridgeTable { nodes: n, edge: BRIDGE_EDGE, touch, log_occupation, density: d.clone() };
        let g = CompensatorTable::shared(alpha, beta);
        for i in 0..n {
            let u = bridge_coord(i);
            let avg = table.average_occupation(&d, u);
            let shift = (g.eval(u) / avg).ln();
            for j in 0..n {
                table.log_occupation[i * n + j] += shift;
            }
        }
        table
    }

    /// `∫ ℓ(u, v) p_1(v - u) dv` with the tabulated `ℓ`.
    fn average_occupation(&self, d: &UnitDensity, u: f64) -> f64 {
        let sub = 40;
        let h = 2.0 * self.edge / ((self.nodes - 1) * sub) as f64;
        let mut s = 0.0;
        for k in 0..(self.nodes - 1) * sub {
            let c = -self.edge + (k as f64 + 0.5) * h;
            let v = c.signum() * c * c;
            s += 2.0 * c.abs() * h * self.occupation_at(u, v) * d.eval(v - u);
        }
        // Beyond the grid ℓ is clamped to its edge values.
        let w = self.edge * self.edge;
        let (right, left) = ((w - u).max(0.0), (w + u).max(0.0));
        let tail = |dist: f64, c: f64| if dist > 0.0 { c * dist.powf(-d.alpha) / d.alpha } else { 0.0 };
        s + self.occupation_at(u, w) * tail(right, d.c_plus) + self.occupation_at(u, -w) * tail(left, d.c_minus)
    }

    /// Cached table for `(α, β)`.
    pub fn shared(alpha: f64, beta: f64) -> Arc<Self> {
        static CACHE: Cache<BridgeTable> = OnceLock::new();
        cached(&CACHE, alpha, beta, Self::build)
    }

    fn interpolate(&self, values: &[f64], u: f64, v: f64, log: bool) -> f64 {
        let m = (self.nodes - 1) as f64;
        let pos = |z: f64| -> (usize, f64) {
            let c = (z.signum() * z.abs().sqrt()).clamp(-self.edge, self.edge);
            let r = ((c + self.edge) / (2.0 * self.edge) * m).min(m - 1e-9);
            (r as usize, r - r.floor())
        };
        let ((i, a), (j, b)) = (pos(u), pos(v));
        let at = |i: usize, j: usize| values[i * self.nodes + j];
        let mix = (1.0 - a) * ((1.0 - b) * at(i, j) + b * at(i, j + 1)) + a * ((1.0 - b) * at(i + 1, j) + b * at(i + 1, j + 1));
        if log {
            mix.exp()
        } else {
            mix
        }
    }

    /// `φ(u, v)`; arguments beyond the grid are clamped to its edge.
    pub fn touch_at(&self, u: f64, v: f64) -> f64 {
        self.interpolate(&self.touch, u, v, false)
    }

    /// `ℓ(u, v)`; arguments beyond the grid are clamped to its edge.
    pub fn occupation_at(&self, u: f64, v: f64) -> f64 {
        self.interpolate(&self.log_occupation, u, v, true)
    }

    /// Midpoint of the bridge from `x` to `y` over `dt`, with density
    /// `∝ p_{dt/2}(m - x) p_{dt/2}(y - m)`. Proposals are drawn forward from
    /// `x` or backward from `y` with equal odds and accepted against the
    /// bound `2 min(p(m'), p(D - m')) ≤ 2 sup_{|w| ≥ |D|/2} p(w)`.
    pub fn sample_midpoint<R: Rng + ?Sized>(&self, sampler: &StableSampler, x: f64, y: f64, dt: f64, rng: &mut R) -> f64 {
        let sd = (sampler.scale * 0.5 * dt).powf(1.0 / sampler.alpha);
        let gap = (y - x) / sd;
        let bound = 2.0 * self.density.max_beyond(0.5 * gap.abs());
        loop {
            let m = if rng.random::<bool>() { sampler.standard(rng) } else { gap - sampler.standard(rng) };
            let (a, b) = (self.density.eval(m), self.density.eval(gap - m));
            if a + b > 0.0 && rng.random::<f64>() * bound <= 2.0 * a * b / (a + b) {
                return x + sd * m;
            }
        }
    }

    /// `(P(touch), E[ΔL])` for a step of length `dt` from `x` to `y` of the
    /// process with scale `c`, relative to `level`.
    pub fn step(&self, x: f64, y: f64, level: f64, dt: f64, scale: f64, alpha: f64) -> (f64, f64) {
        let sd = (scale * dt).powf(1.0 / alpha);
        let (u, v) = ((x - level) / sd, (y - level) / sd);
        (self.touch_at(u, v), dt / sd * self.occupation_at(u, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn occupation_spread_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 400_000;
        for &alpha in &[1.5, 2.0] {
            let draws: Vec<f64> = (0..n).map(|_| occupation_spread(alpha, &mut rng)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let second = draws.iter().map(|d| d * d).sum::<f64>() / n as f64;
            // E[M^2] = 2 Γ(1+ρ)² / Γ(1+2ρ) for the Mittag-Leffler law of index ρ.
            let rho = 1.0 - 1.0 / alpha;
            let exact = 2.0 * gamma(1.0 + rho).powi(2) / gamma(1.0 + 2.0 * rho);
            assert!((mean - 1.0).abs() < 5e-3, "{alpha} {mean}");
            assert!((second - exact).abs() < 1e-2, "{alpha} {second} {exact}");
        }
        assert!((2.0 * gamma(1.5).powi(2) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn density_at_zero_closed_form() {
        for &(alpha, beta) in &[(1.5, 0.0), (1.5, 0.5), (1.2, -0.5)] {
            let t = CompensatorTable::shared(alpha, beta);
            let skew = beta * (PI * alpha / 2.0).tan();
            let exact = (Complex64::new(1.0, -skew).powf(-1.0 / alpha) * gamma(1.0 + 1.0 / alpha)).re / PI;
            assert!((t.density_at_zero() - exact).abs() < 1e-10, "{alpha} {beta}");
        }
    }

    #[test]
    fn compensator_integrates_to_one() {
        // ∫ g(z) dz = ∫_0^1 ∫ p_s(-z) dz ds = 1.
        let t = CompensatorTable::shared(1.5, 0.5);
        let h = 0.002;
        let mut s = 0.0;
        let mut z = -80.0;
        while z < 80.0 {
            s += h * t.eval(z + 0.5 * h);
            z += h;
        }
        s += 0.5 * (t.tail_right + t.tail_left) * 80f64.powf(-1.5) / 1.5;
        assert!((s - 1.0).abs() < 2e-4, "{s}");
    }

    #[test]
    fn compensator_continuous_at_zero() {
        let t = CompensatorTable::shared(1.5, 0.0);
        assert!((t.eval(1e-9) - t.eval(0.0)).abs() < 1e-4);
        assert!((t.eval(-1e-9) - t.eval(0.0)).abs() < 1e-4);
        assert!((t.eval(TABLE_STEP * TABLE_NODES as f64 * 0.999) / t.eval(TABLE_STEP * TABLE_NODES as f64 * 1.001) - 1.0).abs() < 0.02);
    }

    #[test]
    fn hitting_cdf_matches_gaussian_limit() {
        // α = 2 is Brownian motion with variance 2t: P(T_0 ≤ t) = erfc(1/(2√t)) from 1.
        let d = UnitDensity::shared(2.0, 0.0);
        for t in [0.05f64, 0.3, 1.0, 4.0, 50.0] {
            let exact = libm::erfc(0.5 / t.sqrt());
            assert!((hitting_cdf(&d, 1.0, t) - exact).abs() < 1e-5, "{t}: {} vs {exact}", hitting_cdf(&d, 1.0, t));
        }
    }

    #[test]
    fn hitting_cdf_tends_to_one() {
        let d = UnitDensity::shared(1.5, 0.5);
        for side in [1.0, -1.0] {
            let vals: Vec<f64> = [1e-3, 1e-1, 1.0, 1e2, 1e6].iter().map(|&t| hitting_cdf(&d, side, t)).collect();
            assert!(vals.windows(2).all(|w| w[0] <= w[1]), "{vals:?}");
            assert!(vals[4] > 0.98, "{vals:?}");
        }
    }

    #[test]
    fn bridge_hits_average_to_hitting_probability() {
        // ∫ φ(u, v) p_1(v - u) dv = P_u(T_0 ≤ 1).
        let (alpha, beta) = (1.5, 0.5);
        let d = UnitDensity::shared(alpha, beta);
        let table = BridgeTable::shared(alpha, beta);
        for u in [-2.0, -0.5, 0.3, 1.0, 3.0] {
            let h = 0.002;
            let mut s = 0.0;
            let mut v = -60.0;
            while v < 60.0 {
                let w = v + 0.5 * h;
                s += h * table.touch_at(u, w) * d.eval(w - u);
                v += h;
            }
            let exact = hitting_cdf(&d, u.signum(), u.abs().powf(-alpha));
            assert!((s - exact).abs() < 5e-3, "{u}: {s} vs {exact}");
        }
    }

    #[test]
    fn bridge_hit_limits() {
        let table = BridgeTable::shared(1.5, 0.0);
        assert_eq!(table.touch_at(0.0, 3.0), 1.0);
        assert!(table.touch_at(1e-6, 0.5) > 0.99);
        assert!(table.touch_at(40.0, 30.0) < 1e-3);
        assert!(table.touch_at(0.5, -0.5) > table.touch_at(0.5, 1.5));
    }

    #[test]
    fn bridge_touch_matches_gaussian_limit() {
        // α = 2: a bridge of variance 2 touches 0 from u to v (same side) with probability e^{-uv}.
        let table = BridgeTable::shared(2.0, 0.0);
        let mut worst: f64 = 0.0;
        for (u, v) in [(0.3, 0.5), (1.0, 1.0), (2.0, 0.7), (-0.8, -1.7), (5.0, 0.1), (0.05, 3.0), (1.5, 2.5)] {
            let exact = f64::exp(-u * v);
            let got = table.touch_at(u, v);
            worst = worst.max((got - exact).abs());
        }
        assert_eq!(table.touch_at(0.5, -0.5), 1.0_f64.min(table.touch_at(0.5, -0.5)));
        assert!(worst < 5e-3, "{worst}");
    }

    #[test]
    fn bridge_touch_chapman_kolmogorov() {
        // Missing the level over a step equals missing it over both halves,
        // averaged over the bridge midpoint.
        let (alpha, beta) = (1.5, 0.0);
        let d = UnitDensity::shared(alpha, beta);
        let table = BridgeTable::shared(alpha, beta);
        let s2 = 2f64.powf(1.0 / alpha);
        for (u, v) in [(1.0, 1.0), (3.0, 2.0), (7.0, 6.0), (7.0, 9.0), (7.0, 0.5), (2.0, -1.0), (10.0, 10.0), (5.0, 1.0)] {
            let h = 0.001;
            let mut num = 0.0;
            let mut w = -150.0;
            while w < 150.0 {
                let m = w + 0.5 * h;
                num += h * d.eval(m - u) * d.eval(v - m) * (1.0 - table.touch_at(u, m)) * (1.0 - table.touch_at(m, v));
                w += h;
            }
            let two = num / (d.eval((v - u) / s2) / s2);
            let one = 1.0 - table.touch_at(u / s2, v / s2);
            assert!((two - one).abs() < 5e-3, "{u} {v}: {two} {one}");
        }
    }

    #[test]
    fn bridge_midpoint_composes() {
        // Midpoints of bridges drawn from x to independent endpoints y are
        // distributed as the half-step increment.
        let (alpha, beta) = (1.5, 0.5);
        let sampler = StableSampler::new(alpha, 1.0, beta);
        let table = BridgeTable::shared(alpha, beta);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40_000;
        let half = 0.5f64.powf(1.0 / alpha);
        let mut mids: Vec<f64> = (0..n)
            .map(|_| {
                let y = sampler.standard(&mut rng);
                table.sample_midpoint(&sampler, 0.0, y, 1.0, &mut rng) / half
            })
            .collect();
        let mut direct: Vec<f64> = (0..n).map(|_| sampler.standard(&mut rng)).collect();
        mids.sort_by(f64::total_cmp);
        direct.sort_by(f64::total_cmp);
        // Two-sample KS at the 1% level.
        let mut d: f64 = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < n && j < n {
            if mids[i] <= direct[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 - j as f64).abs() / n as f64);
        }
        assert!(d < 1.628 * (2.0 / n as f64).sqrt(), "{d}");
    }

    #[test]
    fn bridge_occupation_consistent() {
        let (alpha, beta) = (1.5, -0.5);
        let d = UnitDensity::shared(alpha, beta);
        let table = BridgeTable::shared(alpha, beta);
        let g = CompensatorTable::shared(alpha, beta);
        for u in [-3.0, -2.2, -0.7, 0.0, 0.2, 1.3, 2.0, 2.1, 10.0] {
            let avg = table.average_occupation(&d, u);
            assert!((avg / g.eval(u) - 1.0).abs() < 6e-3, "{u}: {avg} vs {}", g.eval(u));
            
        }
        // Given a touch the conditional local time is positive and finite.
        for (u, v) in [(0.5, -0.5), (2.0, 1.0), (-1.0, 3.0)] {
            let r = table.occupation_at(u, v) / table.touch_at(u, v);
            assert!(r > 0.0 && r.is_finite());
        }
    }

    #[test]
    fn characteristic_function_matches() {
        let (alpha, beta) = (1.5, 0.5);
        let s = StableSampler::new(alpha, 1.0, beta);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let (mut c, mut sn) = (0.0, 0.0);
        for _ in 0..n {
            let y = s.standard(&mut rng);
            c += y.cos();
            sn += y.sin();
        }
        let skew = beta * (PI * alpha / 2.0).tan();
        let target = Complex64::new(-1.0, skew).exp();
        let se = (0.5 / n as f64).sqrt();
        assert!((c / n as f64 - target.re).abs() < 4.0 * se);
        assert!((sn / n as f64 - target.im).abs() < 4.0 * se);
    }
}
