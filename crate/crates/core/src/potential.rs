//! Harmonic functions, hitting probabilities, local-time means and excursion
//! rates, all expressed through `h`.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::model::LevyModel;
use crate::resolvent::{self, QuadratureEngine};

/// Probabilities within this many error budgets outside `[0, 1]` are clamped.
const CLAMP_FLOOR: f64 = 1e-12;

/// `h` with a memo table, plus the derived potential-theoretic quantities.
/// Transient models use the transient `h` and the `κ`-corrected formulas.
pub struct PotentialTable {
    model: LevyModel,
    engine: QuadratureEngine,
    pub gamma: f64,
    pub kappa: f64,
    pub m2: f64,
    memo: Mutex<HashMap<i128, (f64, f64)>>,
}

impl PotentialTable {
    pub fn new(model: LevyModel, engine: QuadratureEngine, gamma: f64) -> Result<Self> {
        model.validate()?;
        let kappa = if engine.prefer_closed_form {
            match model.kappa_closed_form() {
                Some(k) => k,
                None => resolvent::kappa(&model, &engine)?.value,
            }
        } else {
            resolvent::kappa(&model, &engine)?.value
        };
        Ok(PotentialTable { m2: model.m2(), model, engine, gamma, kappa, memo: Mutex::new(HashMap::new()) })
    }

    pub fn with_defaults(model: LevyModel) -> Result<Self> {
        Self::new(model, QuadratureEngine::default(), 0.0)
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn engine(&self) -> &QuadratureEngine {
        &self.engine
    }

    pub fn is_transient(&self) -> bool {
        self.kappa > 0.0
    }

    /// `(h(x), estimated absolute error)`.
    pub fn h_with_err(&self, x: f64) -> Result<(f64, f64)> {
        if x == 0.0 {
            return Ok((0.0, 0.0));
        }
        if self.engine.prefer_closed_form {
            if let Some(v) = self.model.h_closed_form(x) {
                return Ok((v, 4.0 * f64::EPSILON * v.abs()));
            }
        }
        let key = (x * 1e12).round() as i128;
        if let Some(&v) = self.memo.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let r = resolvent::h(&self.model, x, &self.engine)?;
        let v = (r.value, r.abs_err);
        self.memo.lock().unwrap().insert(key, v);
        Ok(v)
    }

    pub fn h(&self, x: f64) -> Result<f64> {
        self.h_with_err(x).map(|v| v.0)
    }

    /// `h(x) + γ x / m²` (just `h` when `m² = ∞`).
    pub fn h_gamma_at(&self, x: f64, gamma: f64) -> Result<f64> {
        let base = self.h(x)?;
        if self.m2.is_finite() {
            Ok(base + gamma * x / self.m2)
        } else {
            Ok(base)
        }
    }

    pub fn h_gamma(&self, x: f64) -> Result<f64> {
        self.h_gamma_at(x, self.gamma)
    }

    /// `h^B(a) = h(a) + h(-a) - κ h(a) h(-a)`: mean local time at zero before `T_a`, from zero.
    pub fn h_b(&self, a: f64) -> Result<f64> {
        let (p, _) = self.h_with_err(a)?;
        let (m, _) = self.h_with_err(-a)?;
        Ok(p + m - self.kappa * p * m)
    }

    fn h_b_err(&self, a: f64) -> Result<f64> {
        Ok(self.h_with_err(a)?.1 + self.h_with_err(-a)?.1)
    }

    fn clamp_probability(&self, value: f64, budget: f64, what: &str) -> Result<f64> {
        let slack = budget + CLAMP_FLOOR;
        if (0.0..=1.0).contains(&value) {
            Ok(value)
        } else if value >= -slack && value <= 1.0 + slack {
            log::warn!("{what}: clamped {value:.3e} into [0, 1] (budget {slack:.3e})");
            Ok(value.clamp(0.0, 1.0))
        } else {
            Err(Error::ProbabilityOutOfRange { value, budget: slack })
        }
    }

    /// `P_x(T_a < T_b)`.
    pub fn hit_prob_two(&self, x: f64, a: f64, b: f64) -> Result<f64> {
        let hb = self.h_b(a - b)?;
        if !(hb > 0.0) || a == b {
            return Err(Error::DegenerateDenominator(format!("h^B({})", a - b)));
        }
        let (hba, e1) = self.h_with_err(b - a)?;
        let (hxb, e2) = self.h_with_err(x - b)?;
        let (hxa, e3) = self.h_with_err(x - a)?;
        let num = hba + hxb - hxa - self.kappa * hxb * hba;
        let value = num / hb;
        let budget = 10.0 * ((e1 + e2 + e3) / hb + value.abs() * self.h_b_err(a - b)? / hb);
        self.clamp_probability(value, budget, "hit_prob_two")
    }

    /// `h^C(a, b)`: mean local time at zero before `T_a ∧ T_b`, from zero.
    ///
    /// Uses `L_{T_a} = L_{T_a ∧ T_b} + 1{T_b < T_a} (L_{T_a} - L_{T_b})` and the
    /// strong Markov property at `T_b`:
    /// `h^C(a, b) = h^B(a) (1 - P_0(T_b < T_a) P_b(T_0 < T_a))`.
    pub fn h_c(&self, a: f64, b: f64) -> Result<f64> {
        if a == b || a == 0.0 || b == 0.0 {
            return Err(Error::DegenerateDenominator(format!("h^C({a}, {b})")));
        }
        let p_first_b = self.hit_prob_two(0.0, b, a)?;
        let p_back = self.hit_prob_two(b, 0.0, a)?;
        Ok(self.h_b(a)? * (1.0 - p_first_b * p_back))
    }

    /// `P_x(T_a < T_b ∧ T_c)` from the two-point probabilities.
    pub fn hit_prob_three(&self, x: f64, a: f64, b: f64, c: f64) -> Result<f64> {
        if a == b || a == c || b == c {
            return Err(Error::DegenerateDenominator("coincident hitting points".into()));
        }
        let p_xab = self.hit_prob_two(x, a, b)?;
        let p_xcb = self.hit_prob_two(x, c, b)?;
        let p_cab = self.hit_prob_two(c, a, b)?;
        let p_acb = self.hit_prob_two(a, c, b)?;
        let den = 1.0 - p_acb * p_cab;
        if den.abs() < 1e-14 {
            return Err(Error::DegenerateDenominator("1 - P_a(T_c<T_b) P_c(T_a<T_b)".into()));
        }
        let value = (p_xab - p_xcb * p_cab) / den;
        self.clamp_probability(value, 1e-9 / den, "hit_prob_three")
    }

    /// `h^B(a) P_y(T_a < T_0) = h(y) + h(-a) - h(y - a) - κ h(y) h(-a)`.
    pub fn escape_weight(&self, y: f64, a: f64) -> Result<f64> {
        let hy = self.h(y)?;
        let hma = self.h(-a)?;
        Ok(hy + hma - self.h(y - a)? - self.kappa * hy * hma)
    }

    /// Excursion measure `n(T_a < T_0)`.
    pub fn excursion_rate(&self, a: f64) -> Result<f64> {
        let hb = self.h_b(a)?;
        if !(hb > 0.0) {
            return Err(Error::DegenerateDenominator(format!("h^B({a})")));
        }
        Ok((1.0 - self.kappa * self.h(-a)?) / hb)
    }

    /// `n(T_a < T_0 < ∞) = 1/h^B(a) - κ`.
    pub fn excursion_rate_returning(&self, a: f64) -> Result<f64> {
        let hb = self.h_b(a)?;
        if !(hb > 0.0) {
            return Err(Error::DegenerateDenominator(format!("h^B({a})")));
        }
        Ok((1.0 - self.kappa * hb) / hb)
    }

    /// `P_x(T_0 = ∞) = κ h(x)`.
    pub fn escape_probability(&self, x: f64) -> Result<f64> {
        Ok(self.kappa * self.h(x)?)
    }

    /// Fast evaluator of `h` for Monte-Carlo loops.
    pub fn fast_h(&self, lo: f64, hi: f64, nodes_per_side: usize) -> Result<FastH> {
        if self.engine.prefer_closed_form && self.model.h_closed_form(1.0).is_some() {
            return Ok(FastH::Closed(self.model.clone()));
        }
        Ok(FastH::Grid(HGrid::build(self, lo, hi, nodes_per_side)?))
    }
}

/// Cubic interpolation of `h` on uniform grids on each side of zero, with
/// linear continuation outside the grid.
#[derive(Clone, Debug)]
pub struct HGrid {
    step_neg: f64,
    step_pos: f64,
    neg: Vec<f64>,
    pos: Vec<f64>,
}

impl HGrid {
    pub fn build(table: &PotentialTable, lo: f64, hi: f64, n: usize) -> Result<Self> {
        assert!(lo < 0.0 && hi > 0.0 && n >= 4);
        let step_neg = -lo / n as f64;
        let step_pos = hi / n as f64;
        let mut neg = Vec::with_capacity(n + 1);
        let mut pos = Vec::with_capacity(n + 1);
        for i in 0..=n {
            neg.push(table.h(-(i as f64) * step_neg)?);
            pos.push(table.h(i as f64 * step_pos)?);
        }
        Ok(HGrid { step_neg, step_pos, neg, pos })
    }

    fn side(vals: &[f64], step: f64, r: f64) -> f64 {
        let n = vals.len() - 1;
        let u = r / step;
        if u >= n as f64 {
            let slope = (vals[n] - vals[n - 1]) / step;
            return vals[n] + slope * (r - n as f64 * step);
        }
        let i = (u.floor() as usize).min(n - 1);
        let start = if i == 0 { 0 } else { (i - 1).min(n - 3) };
        let t = u - start as f64;
        let (y0, y1, y2, y3) = (vals[start], vals[start + 1], vals[start + 2], vals[start + 3]);
        // Lagrange cubic through nodes 0..3 at t.
        y0 * (t - 1.0) * (t - 2.0) * (t - 3.0) / -6.0
            + y1 * t * (t - 2.0) * (t - 3.0) / 2.0
            + y2 * t * (t - 1.0) * (t - 3.0) / -2.0
            + y3 * t * (t - 1.0) * (t - 2.0) / 6.0
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x >= 0.0 {
            Self::side(&self.pos, self.step_pos, x)
        } else {
            Self::side(&self.neg, self.step_neg, -x)
        }
    }
}

#[derive(Clone, Debug)]
pub enum FastH {
    Closed(LevyModel),
    Grid(HGrid),
}

impl FastH {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            FastH::Closed(m) => m.h_closed_form(x).unwrap(),
            FastH::Grid(g) => g.eval(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bm() -> PotentialTable {
        PotentialTable::with_defaults(LevyModel::Brownian { sigma: 1.0 }).unwrap()
    }

    #[test]
    fn brownian_gamblers_ruin() {
        let t = bm();
        assert!((t.hit_prob_two(0.5, 1.0, -1.0).unwrap() - 0.75).abs() < 1e-14);
        assert!((t.h_c(1.0, -1.0).unwrap() - 1.0).abs() < 1e-14);
        // Green function of the interval (-1.5, 2) at the origin: 2·2·1.5/3.5.
        assert!((t.h_c(2.0, -1.5).unwrap() - 6.0 / 3.5).abs() < 1e-14);
        assert!((t.h_b(1.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((t.excursion_rate(1.0).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn brownian_three_points() {
        let t = bm();
        // From 0.5 the path must pass 1 before 2.
        assert!((t.hit_prob_three(0.5, 0.0, 1.0, 2.0).unwrap() - 0.5).abs() < 1e-14);
        let s = t.hit_prob_three(0.2, -1.0, 0.5, 1.5).unwrap()
            + t.hit_prob_three(0.2, 0.5, -1.0, 1.5).unwrap()
            + t.hit_prob_three(0.2, 1.5, -1.0, 0.5).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_two_point() {
        assert!(matches!(bm().hit_prob_two(0.0, 1.0, 1.0), Err(Error::DegenerateDenominator(_))));
    }

    #[test]
    fn transient_brownian_quantities() {
        let t = PotentialTable::with_defaults(LevyModel::preset("bm-drift").unwrap()).unwrap();
        assert_eq!(t.kappa, 1.0);
        // Drift to -∞: from -1 the path escapes without hitting 0 with probability 1 - e^{-2}.
        assert!((t.escape_probability(-1.0).unwrap() - (1.0 - (-2.0f64).exp())).abs() < 1e-14);
        assert_eq!(t.escape_probability(1.0).unwrap(), 0.0);
        let a = -0.7;
        let left = t.excursion_rate(a).unwrap() * (1.0 - t.kappa * t.h(a).unwrap());
        assert!((left - t.excursion_rate_returning(a).unwrap()).abs() < 1e-12);
        // Hitting 1 before -1 from 0 for Brownian motion with drift -1.
        let p = t.hit_prob_two(0.0, 1.0, -1.0).unwrap();
        let exact = (1.0 - (-2.0f64).exp()) / ((2.0f64).exp() - (-2.0f64).exp());
        assert!((p - exact).abs() < 1e-13, "{p} {exact}");
    }

    #[test]
    fn grid_interpolation_is_accurate() {
        let t = PotentialTable::with_defaults(LevyModel::preset("jumps").unwrap()).unwrap();
        let g = HGrid::build(&t, -4.0, 4.0, 80).unwrap();
        for &x in &[-3.33, -0.01, 0.02, 1.234, 3.9, 6.0] {
            let exact = t.h(x).unwrap();
            assert!((g.eval(x) - exact).abs() < 2e-5 * exact.abs().max(1.0), "x={x} {} {}", g.eval(x), exact);
        }
    }

    proptest! {
        #[test]
        fn two_point_probabilities_complement(x in -3.0f64..3.0, a in -3.0f64..3.0, b in -3.0f64..3.0, idx in 0usize..3) {
            prop_assume!((a - b).abs() > 1e-3);
            let name = ["bm", "stable-asym-1.5", "bm-drift"][idx];
            let t = PotentialTable::with_defaults(LevyModel::preset(name).unwrap()).unwrap();
            let p = t.hit_prob_two(x, a, b).unwrap();
            let q = t.hit_prob_two(x, b, a).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            if !t.is_transient() {
                prop_assert!((p + q - 1.0).abs() < 1e-10);
            } else {
                prop_assert!(p + q <= 1.0 + 1e-12);
            }
        }
    }
}
