//! Local-time weights, the penalisation martingales, their closed-form
//! conditional expectations along each clock, and the limiting laws.

use serde::{Deserialize, Serialize};

use crate::bessel::scaled_bessel_i;
use crate::error::{Error, Result};
use crate::potential::PotentialTable;
use crate::quadrature::{integrate, integrate_to_infinity, Tol};
use crate::resolvent;

/// Weight `f` applied to the local time at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalTimeWeight {
    /// `f(u) = β e^{-βu}`.
    Exponential { beta: f64 },
    /// `f(u) = 1{u = 0}`.
    IndicatorZero,
    /// `f(u) = values[i]` on `[breaks[i], breaks[i+1])`, zero beyond the last break.
    StepTable { breaks: Vec<f64>, values: Vec<f64> },
}

impl LocalTimeWeight {
    pub fn validate(&self) -> Result<()> {
        match self {
            LocalTimeWeight::Exponential { beta } => {
                if !(*beta > 0.0 && beta.is_finite()) {
                    return Err(Error::Config(format!("exponential weight needs beta > 0, got {beta}")));
                }
            }
            LocalTimeWeight::IndicatorZero => {}
            LocalTimeWeight::StepTable { breaks, values } => {
                if breaks.len() < 2 || values.len() != breaks.len() - 1 {
                    return Err(Error::Config("step table needs n+1 breaks for n values".into()));
                }
                if breaks[0] != 0.0 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("step breaks must start at 0 and increase".into()));
                }
                if values.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::Config("step values must be nonnegative".into()));
                }
            }
        }
        Ok(())
    }

    /// `∫_0^∞ f`.
    pub fn total(&self) -> f64 {
        self.tail(0.0)
    }

    /// Fail unless `∫ f = 1` to within `1e-9`.
    pub fn require_normalized(&self) -> Result<()> {
        self.validate()?;
        let t = self.total();
        if (t - 1.0).abs() > 1e-9 {
            return Err(Error::UnnormalizedWeight(t));
        }
        Ok(())
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            LocalTimeWeight::Exponential { beta } => beta * (-beta * u).exp(),
            LocalTimeWeight::IndicatorZero => {
                if u == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            LocalTimeWeight::StepTable { breaks, values } => {
                if u < 0.0 {
                    return 0.0;
                }
                match breaks.iter().rposition(|&b| b <= u) {
                    Some(i) if i < values.len() => values[i],
                    _ => 0.0,
                }
            }
        }
    }

    /// `∫_l^∞ f(u) du`.
    pub fn tail(&self, l: f64) -> f64 {
        self.tilted_tail(l, 0.0)
    }

    /// `∫_0^∞ e^{-k u} f(l + u) du` for `k ≥ 0`.
    pub fn tilted_tail(&self, l: f64, k: f64) -> f64 {
        match self {
            LocalTimeWeight::Exponential { beta } => beta * (-beta * l).exp() / (k + beta),
            LocalTimeWeight::IndicatorZero => 0.0,
            LocalTimeWeight::StepTable { breaks, values } => {
                let mut s = 0.0;
                for (i, &v) in values.iter().enumerate() {
                    let lo = (breaks[i] - l).max(0.0);
                    let hi = breaks[i + 1] - l;
                    if hi <= lo {
                        continue;
                    }
                    s += if k == 0.0 {
                        v * (hi - lo)
                    } else {
                        v * ((-k * lo).exp() - (-k * hi).exp()) / k
                    };
                }
                s
            }
        }
    }

    /// `∫_0^l f`, the limit law of `L_∞` under the penalised measure.
    pub fn cdf(&self, l: f64) -> f64 {
        self.total() - self.tail(l.max(0.0))
    }
}

/// State of the path at time `t`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MartingaleState {
    pub x: f64,
    /// Local time at zero.
    pub l: f64,
    pub t: f64,
    /// `true` while `T_0 > t`.
    pub alive: bool,
    /// Local time at the clock level, when the clock needs one.
    pub level_local_time: Option<f64>,
}

impl MartingaleState {
    pub fn new(x: f64, l: f64, t: f64) -> Self {
        MartingaleState { x, l, t, alive: true, level_local_time: None }
    }
}

/// Random times along which the penalisation limit is taken.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Clock {
    /// Independent exponential time with rate `q`.
    Exponential { q: f64 },
    /// First hitting time of `a`.
    Hitting { a: f64 },
    /// First hitting time of `{a, -b}`, `a, b > 0`.
    TwoPoint { a: f64, b: f64 },
    /// Inverse local time at level `a` evaluated at `u`.
    InverseLocalTime { a: f64, u: f64 },
}

impl Clock {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Clock::Exponential { q } => q > 0.0 && q.is_finite(),
            Clock::Hitting { a } => a != 0.0 && a.is_finite(),
            Clock::TwoPoint { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            Clock::InverseLocalTime { a, u } => a != 0.0 && a.is_finite() && u > 0.0 && u.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidClock(format!("{self:?}")))
        }
    }

    /// `γ` of the limiting martingale `M^{(γ)}` as the clock parameter diverges.
    /// For the two-point clock `T_a ∧ T_{-b}` this is `(b - a)/(a + b)`.
    pub fn limit_gamma(&self) -> f64 {
        match *self {
            Clock::Exponential { .. } => 0.0,
            Clock::Hitting { a } | Clock::InverseLocalTime { a, .. } => a.signum(),
            Clock::TwoPoint { a, b } => (b - a) / (a + b),
        }
    }
}

/// `M_t^{(γ,f)} = h^{(γ)}(X_t) f(L_t) + ∫_0^∞ f(L_t + u) du`.
pub fn martingale_value(state: &MartingaleState, f: &LocalTimeWeight, gamma: f64, table: &PotentialTable) -> Result<f64> {
    Ok(table.h_gamma_at(state.x, gamma)? * f.eval(state.l) + f.tail(state.l))
}

/// Closed form of the clock-normalised conditional expectation `N_t` of
/// `f(L_τ); t < τ` given `F_t`, assuming the clock has not rung by `t`.
pub fn clock_conditional(state: &MartingaleState, clock: &Clock, f: &LocalTimeWeight, table: &PotentialTable) -> Result<f64> {
    clock.validate()?;
    f.validate()?;
    if table.is_transient() {
        return Err(Error::UnsupportedModel("clock conditionals need a recurrent model".into()));
    }
    let (x, l) = (state.x, state.l);
    match *clock {
        Clock::Exponential { q } => {
            let eng = table.engine();
            let model = table.model();
            let r0 = resolvent::r_q(model, 0.0, q, eng)?.value;
            let hq = resolvent::h_q(model, x, q, eng)?.value;
            Ok((-q * state.t).exp() * (hq * f.eval(l) + (1.0 - hq / r0) * f.tilted_tail(l, 1.0 / r0)))
        }
        Clock::Hitting { a } => {
            let hb = table.h_b(a)?;
            let escape = table.escape_weight(x, a)?;
            let back = table.hit_prob_two(x, 0.0, a)?;
            Ok(escape * f.eval(l) + back * f.tilted_tail(l, 1.0 / hb))
        }
        Clock::TwoPoint { a, b } => {
            let (p1, p2) = (a, -b);
            let hc = table.h_c(p1, p2)?;
            let escape = two_point_escape_weight(table, x, p1, p2)?;
            let back = if x == 0.0 { 1.0 } else { table.hit_prob_three(x, 0.0, p1, p2)? };
            Ok(escape * f.eval(l) + back * f.tilted_tail(l, 1.0 / hc))
        }
        Clock::InverseLocalTime { a, u } => {
            let la = state.level_local_time.ok_or(Error::MissingLevelLocalTime(a))?;
            let remaining = u - la;
            if remaining <= 0.0 {
                return Err(Error::InvalidClock("inverse local time clock has already rung".into()));
            }
            let hb = table.h_b(a)?;
            let shifted = |y: f64| f.eval(l + y);
            Ok(hb * inv_lt_law_shifted(table, x, a, remaining, &shifted, f.eval(l))?)
        }
    }
}

/// `h^C(p1, p2) P_x(T_0 > T_{p1} ∧ T_{p2})`, written to avoid cancellation.
pub fn two_point_escape_weight(table: &PotentialTable, x: f64, p1: f64, p2: f64) -> Result<f64> {
    let h = |z: f64| table.h(z);
    let hb = table.h_b(p1 - p2)?;
    let d1 = h(-p1)? - h(x - p1)?;
    let d2 = h(-p2)? - h(x - p2)?;
    let cross = (h(p1)? - h(p2)?) * (d1 - d2);
    Ok(h(x)? + (d1 * h(p1 - p2)? + d2 * h(p2 - p1)? - cross) / hb)
}

/// The martingale `M^{(γ)}` that [`clock_conditional`] approaches as the clock diverges.
pub fn clock_limit(state: &MartingaleState, clock: &Clock, f: &LocalTimeWeight, table: &PotentialTable) -> Result<f64> {
    martingale_value(state, f, clock.limit_gamma(), table)
}

/// Factor with `clock_conditional = normaliser × P(f(L_τ) | F_t)` at `t = 0`:
/// `r_q(0)`, `h^B(a)`, `h^C(a, -b)` or `h^B(a)`.
pub fn clock_normalizer(clock: &Clock, table: &PotentialTable) -> Result<f64> {
    clock.validate()?;
    match *clock {
        Clock::Exponential { q } => Ok(resolvent::r_q(table.model(), 0.0, q, table.engine())?.value),
        Clock::Hitting { a } | Clock::InverseLocalTime { a, .. } => table.h_b(a),
        Clock::TwoPoint { a, b } => table.h_c(a, -b),
    }
}

/// `P_x f(L_τ)` for any clock, with the path started afresh at `x`.
pub fn clock_law(table: &PotentialTable, x: f64, clock: &Clock, f: &LocalTimeWeight) -> Result<f64> {
    let state = MartingaleState { level_local_time: Some(0.0), ..MartingaleState::new(x, 0.0, 0.0) };
    Ok(clock_conditional(&state, clock, f, table)? / clock_normalizer(clock, table)?)
}

/// `P_x f(L_{e_q})` for an independent exponential time `e_q`.
pub fn exp_clock_law(table: &PotentialTable, x: f64, q: f64, f: &LocalTimeWeight) -> Result<f64> {
    let eng = table.engine();
    let r0 = resolvent::r_q(table.model(), 0.0, q, eng)?.value;
    let hq = resolvent::h_q(table.model(), x, q, eng)?.value;
    Ok((hq * f.eval(0.0) + (1.0 - hq / r0) * f.tilted_tail(0.0, 1.0 / r0)) / r0)
}

/// `P_x f(L_{T_a})`.
pub fn hitting_clock_law(table: &PotentialTable, x: f64, a: f64, f: &LocalTimeWeight) -> Result<f64> {
    let hb = table.h_b(a)?;
    let escape = table.hit_prob_two(x, a, 0.0)?;
    let back = table.hit_prob_two(x, 0.0, a)?;
    Ok(escape * f.eval(0.0) + back * f.tilted_tail(0.0, 1.0 / hb) / hb)
}

/// `ρ^{scale}_u(y)` (`tilde = false`) or `ρ̃^{scale}_u(y)` (`tilde = true`).
pub fn inv_lt_density(u: f64, y: f64, scale: f64, tilde: bool) -> f64 {
    if y <= 0.0 {
        return if tilde { (-u / scale).exp() } else { (-u / scale).exp() * u / (scale * scale) };
    }
    let z = 2.0 * (u * y).sqrt() / scale;
    // e^{-(u+y)/a} I_ν(z) = e^{-(√u - √y)²/a} e^{-z} I_ν(z).
    let gauss = (-((u.sqrt() - y.sqrt()).powi(2)) / scale).exp();
    if tilde {
        gauss * scaled_bessel_i(0, z)
    } else {
        gauss * (u / y).sqrt() / scale * scaled_bessel_i(1, z)
    }
}

fn density_integral(u: f64, scale: f64, tilde: bool, g: &dyn Fn(f64) -> f64) -> Result<f64> {
    let tol = Tol { abs: 1e-13, rel: 1e-11 };
    let f = |y: f64| g(y) * inv_lt_density(u, y, scale, tilde);
    // Mass sits near y ≈ u, with spread ~ √(u·scale) + scale.
    let spread = (u * scale).sqrt() + scale;
    let hi = u + 40.0 * spread;
    let mut breaks = Vec::new();
    for k in 1..40 {
        breaks.push(hi * k as f64 / 40.0);
    }
    let mut b = 1e-3 * u.min(1.0);
    while b < hi {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let head = integrate(&f, 0.0, hi, &breaks, tol, 20_000, "inverse local time density")?;
    let tail = integrate_to_infinity(&f, hi, tol, 2_000, "inverse local time density tail")?;
    Ok(head.value + tail.value)
}

/// `∫ g ρ^{scale}_u` or `∫ g ρ̃^{scale}_u`.
pub fn inv_lt_integral(u: f64, scale: f64, tilde: bool, g: &dyn Fn(f64) -> f64) -> Result<f64> {
    density_integral(u, scale, tilde, g)
}

fn inv_lt_law_shifted(
    table: &PotentialTable,
    x: f64,
    a: f64,
    u: f64,
    g: &dyn Fn(f64) -> f64,
    g_at_zero: f64,
) -> Result<f64> {
    let hb = table.h_b(a)?;
    let reach = if x == a { 1.0 } else { table.hit_prob_two(x, a, 0.0)? };
    let back = if x == a { 0.0 } else { table.hit_prob_two(x, 0.0, a)? };
    let at_level = (-u / hb).exp() * g_at_zero + density_integral(u, hb, false, g)?;
    let from_zero = if back > 0.0 { back / hb * density_integral(u, hb, true, g)? } else { 0.0 };
    Ok(reach * at_level + from_zero)
}

/// `P_x f(L_{η^a_u})`.
pub fn inv_lt_law(table: &PotentialTable, x: f64, a: f64, u: f64, f: &LocalTimeWeight) -> Result<f64> {
    Clock::InverseLocalTime { a, u }.validate()?;
    let g = |y: f64| f.eval(y);
    inv_lt_law_shifted(table, x, a, u, &g, f.eval(0.0))
}

/// `(M_t^{β,a}, M_t^{∞,a})`: limits as `u → ∞` of the inverse-local-time
/// conditionals for `f = e^{-βu}` and `f = 1{u = 0}`.
pub fn inv_u_limit_martingales(state: &MartingaleState, a: f64, beta: f64, table: &PotentialTable) -> Result<(f64, f64)> {
    let la = state.level_local_time.ok_or(Error::MissingLevelLocalTime(a))?;
    let hb = table.h_b(a)?;
    let (reach, back) = if state.x == a {
        (1.0, 0.0)
    } else {
        (table.hit_prob_two(state.x, a, 0.0)?, table.hit_prob_two(state.x, 0.0, a)?)
    };
    let d = 1.0 + beta * hb;
    let m_beta = (-beta * state.l).exp() * (reach + back / d * (beta * la / d).exp());
    let m_inf = if state.alive { (la / hb).exp() * reach } else { 0.0 };
    Ok((m_beta, m_inf))
}

/// Weight `1{T_0 > t} h^{(γ)}(X_t)/h^{(γ)}(x)` of the process conditioned to avoid zero.
pub fn avoid_zero_weight(x: f64, x_t: f64, alive: bool, gamma: f64, table: &PotentialTable) -> Result<f64> {
    let h0 = table.h_gamma_at(x, gamma)?;
    if !(h0 > 0.0) {
        return Err(Error::StartingPointNotInH(x));
    }
    if !alive {
        return Ok(0.0);
    }
    Ok(table.h_gamma_at(x_t, gamma)? / h0)
}

/// Transient martingale `h(X_t) f(L_t) + (1 - κ h(X_t)) ∫ e^{-κu} f(L_t + u) du`;
/// at `t = 0`, `κ M_0 = P_x f(L_∞)`.
pub fn transient_martingale(state: &MartingaleState, f: &LocalTimeWeight, table: &PotentialTable) -> Result<f64> {
    if !table.is_transient() {
        return Err(Error::NotTransient);
    }
    let hx = table.h(state.x)?;
    Ok(hx * f.eval(state.l) + (1.0 - table.kappa * hx) * f.tilted_tail(state.l, table.kappa))
}

/// `Q(L_∞ ≤ l) = ∫_0^l f` under the penalised measure.
pub fn penalized_local_time_cdf(l: f64, f: &LocalTimeWeight) -> Result<f64> {
    f.require_normalized()?;
    Ok(f.cdf(l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LevyModel;
    use crate::resolvent::QuadratureEngine;

    fn bm() -> PotentialTable {
        PotentialTable::with_defaults(LevyModel::Brownian { sigma: 1.0 }).unwrap()
    }

    const EXP1: LocalTimeWeight = LocalTimeWeight::Exponential { beta: 1.0 };

    #[test]
    fn brownian_martingale_value() {
        let s = MartingaleState::new(2.0, 0.0, 0.0);
        assert!((martingale_value(&s, &EXP1, 1.0, &bm()).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn hitting_clock_at_origin() {
        let s = MartingaleState::new(0.0, 0.0, 0.0);
        let v = clock_conditional(&s, &Clock::Hitting { a: 10.0 }, &EXP1, &bm()).unwrap();
        assert!((v - 20.0 / 21.0).abs() < 1e-14);
    }

    #[test]
    fn transient_martingale_at_origin() {
        let t = PotentialTable::with_defaults(LevyModel::preset("bm-drift").unwrap()).unwrap();
        let s = MartingaleState::new(0.0, 0.0, 0.0);
        assert!((transient_martingale(&s, &EXP1, &t).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn step_table_tails() {
        let f = LocalTimeWeight::StepTable { breaks: vec![0.0, 1.0, 3.0], values: vec![0.5, 0.25] };
        f.require_normalized().unwrap();
        assert!((f.tail(2.0) - 0.25).abs() < 1e-15);
        assert!((f.tilted_tail(0.5, 0.0) - 0.75).abs() < 1e-15);
        let k = 0.7;
        let direct = 0.5 * (1.0 - (-k * 0.5f64).exp()) / k + 0.25 * ((-k * 0.5f64).exp() - (-k * 2.5f64).exp()) / k;
        assert!((f.tilted_tail(0.5, k) - direct).abs() < 1e-15);
        assert!(matches!(LocalTimeWeight::IndicatorZero.require_normalized(), Err(Error::UnnormalizedWeight(_))));
    }

    #[test]
    fn two_point_weight_matches_direct_probability() {
        let t = PotentialTable::with_defaults(LevyModel::preset("stable-asym-1.5").unwrap()).unwrap();
        for &x in &[-0.7, 0.3, 1.4] {
            let direct = t.h_c(2.0, -1.5).unwrap() * (1.0 - t.hit_prob_three(x, 0.0, 2.0, -1.5).unwrap());
            let w = two_point_escape_weight(&t, x, 2.0, -1.5).unwrap();
            assert!((w - direct).abs() < 1e-10, "{w} {direct}");
        }
    }

    #[test]
    fn clock_limits_brownian() {
        let t = bm();
        let s = MartingaleState { level_local_time: Some(0.2), ..MartingaleState::new(0.7, 0.3, 1.0) };
        for clock in [
            Clock::Hitting { a: 1e4 },
            Clock::Hitting { a: -1e4 },
            Clock::TwoPoint { a: 2e4, b: 1e4 },
            Clock::InverseLocalTime { a: 1e4, u: 1.0 },
            Clock::Exponential { q: 1e-10 },
        ] {
            let n = clock_conditional(&s, &clock, &EXP1, &t).unwrap();
            let m = clock_limit(&s, &clock, &EXP1, &t).unwrap();
            assert!((n - m).abs() < 1e-3 * m, "{clock:?}: {n} {m}");
        }
    }

    #[test]
    fn inverse_local_time_densities_normalise() {
        for &(u, s) in &[(1.0, 2.0), (0.3, 5.0), (4.0, 0.5)] {
            let rho = inv_lt_integral(u, s, false, &|_| 1.0).unwrap();
            assert!((rho + (-u / s).exp() - 1.0).abs() < 1e-9);
            let tilde = inv_lt_integral(u, s, true, &|_| 1.0).unwrap();
            assert!((tilde / s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn inverse_local_time_laplace() {
        let t = bm();
        let (u, beta) = (1.3, 0.8);
        let hb = t.h_b(1.0).unwrap();
        let lhs = (-u / hb).exp() + inv_lt_integral(u, hb, false, &|y| (-beta * y).exp()).unwrap();
        let rhs = (-u * beta / (1.0 + beta * hb)).exp();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn clock_law_matches_specialised_laws() {
        let t = bm();
        let x = 0.4;
        let a = clock_law(&t, x, &Clock::Hitting { a: 2.0 }, &EXP1).unwrap();
        assert!((a - hitting_clock_law(&t, x, 2.0, &EXP1).unwrap()).abs() < 1e-14);
        let b = clock_law(&t, x, &Clock::Exponential { q: 0.3 }, &EXP1).unwrap();
        assert!((b - exp_clock_law(&t, x, 0.3, &EXP1).unwrap()).abs() < 1e-12);
        let c = clock_law(&t, x, &Clock::InverseLocalTime { a: 1.0, u: 0.7 }, &EXP1).unwrap();
        assert!((c - inv_lt_law(&t, x, 1.0, 0.7, &EXP1).unwrap()).abs() < 1e-12);
        // Two-point from 0 for Brownian motion: L is exponential with mean h^C.
        let hc = t.h_c(1.0, -2.0).unwrap();
        let d = clock_law(&t, 0.0, &Clock::TwoPoint { a: 1.0, b: 2.0 }, &EXP1).unwrap();
        assert!((d - 1.0 / (1.0 + hc)).abs() < 1e-14);
    }

    #[test]
    fn exponential_clock_needs_recurrence() {
        let t = PotentialTable::new(LevyModel::preset("bm-drift").unwrap(), QuadratureEngine::default(), 0.0).unwrap();
        let s = MartingaleState::new(0.0, 0.0, 0.0);
        assert!(clock_conditional(&s, &Clock::Exponential { q: 1.0 }, &EXP1, &t).is_err());
    }
}
