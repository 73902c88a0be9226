//! One-dimensional Lévy models described by their characteristic exponent
//! `E exp(i λ X_t) = exp(-t Ψ(λ))`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use libm::tgamma as gamma;

use crate::error::{Error, Result};

/// Supported model families.
///
/// All variants have no Gaussian-free bounded-variation part, so every point is
/// regular for itself and `1/(q + Ψ)` is integrable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevyModel {
    /// `σ B_t`.
    Brownian { sigma: f64 },
    /// `σ B_t - v t`, so `Ψ(λ) = i v λ + σ²λ²/2`.
    DriftedBrownian { sigma: f64, drift: f64 },
    /// Strictly stable with index `alpha ∈ (1, 2)` and Lévy density
    /// `c_plus x^{-1-α}` on `x > 0`, `c_minus |x|^{-1-α}` on `x < 0`.
    Stable { alpha: f64, c_plus: f64, c_minus: f64 },
    /// Brownian motion plus compound Poisson double-exponential jumps,
    /// compensated to mean zero. Up-jumps have probability `p_up` and
    /// rate `eta_up`, down-jumps have rate `eta_down`.
    JumpDiffusion {
        sigma: f64,
        jump_rate: f64,
        p_up: f64,
        eta_up: f64,
        eta_down: f64,
    },
}

#[derive(Deserialize)]
struct ConfigFile {
    model: LevyModel,
}

/// Result of [`LevyModel::diagnostics`].
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub m2: f64,
    pub recurrent: bool,
    pub assumption_a: bool,
    /// Upper bound on `∫_0^∞ |1/(q+Ψ)| dλ` for each probe `q`.
    pub resolvent_l1_bounds: Vec<(f64, f64)>,
    /// `∫_0^1 |Im(λ/Ψ(λ))| dλ` when finite, which makes the direct
    /// integral representation of `h` valid when `m2 = ∞`.
    pub imaginary_condition: Option<f64>,
    pub kappa: f64,
}

pub const PRESETS: [&str; 5] = ["bm", "bm-drift", "stable-sym-1.5", "stable-asym-1.5", "jumps"];

impl LevyModel {
    pub fn preset(name: &str) -> Result<Self> {
        let m = match name {
            "bm" => LevyModel::Brownian { sigma: 1.0 },
            "bm-drift" => LevyModel::DriftedBrownian { sigma: 1.0, drift: 1.0 },
            "stable-sym-1.5" => LevyModel::Stable { alpha: 1.5, c_plus: 0.5, c_minus: 0.5 },
            "stable-asym-1.5" => LevyModel::Stable { alpha: 1.5, c_plus: 0.75, c_minus: 0.25 },
            "jumps" => LevyModel::JumpDiffusion {
                sigma: 1.0,
                jump_rate: 2.0,
                p_up: 0.4,
                eta_up: 3.0,
                eta_down: 2.0,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown preset '{other}', expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(m)
    }

    /// Stable model with scale `c` and skewness `beta` in the `(c, β)`
    /// parametrisation of the exponent.
    pub fn stable_from_scale(alpha: f64, scale: f64, beta: f64) -> Result<Self> {
        let total = scale * 2.0 * alpha * gamma(alpha) * (PI * alpha / 2.0).sin() / PI;
        let m = LevyModel::Stable {
            alpha,
            c_plus: total * (1.0 + beta) / 2.0,
            c_minus: total * (1.0 - beta) / 2.0,
        };
        m.validate()?;
        Ok(m)
    }

    /// Parse a TOML model file with a `[model]` table, e.g.
    ///
    /// ```text
    /// [model]
    /// kind = "stable"
    /// alpha = 1.5
    /// c_plus = 0.5
    /// c_minus = 0.5
    /// ```
    pub fn from_config_str(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.model.validate()?;
        Ok(cfg.model)
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        Self::from_config_str(&std::fs::read_to_string(path)?)
    }

    /// Preset name or path to a config file.
    pub fn resolve(name: &str) -> Result<Self> {
        if PRESETS.contains(&name) {
            Self::preset(name)
        } else if Path::new(name).exists() {
            Self::from_config_file(Path::new(name))
        } else {
            Self::preset(name)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidModel(m.to_string()));
        match *self {
            LevyModel::Brownian { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return bad("sigma must be positive");
                }
            }
            LevyModel::DriftedBrownian { sigma, drift } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return bad("sigma must be positive");
                }
                if !drift.is_finite() {
                    return bad("drift must be finite");
                }
            }
            LevyModel::Stable { alpha, c_plus, c_minus } => {
                if !(alpha > 1.0 && alpha < 2.0) {
                    return bad("alpha must lie in (1, 2)");
                }
                if !(c_plus >= 0.0 && c_minus >= 0.0 && c_plus + c_minus > 0.0) {
                    return bad("c_plus, c_minus must be nonnegative and not both zero");
                }
            }
            LevyModel::JumpDiffusion { sigma, jump_rate, p_up, eta_up, eta_down } => {
                if !(sigma >= 0.0 && jump_rate >= 0.0) {
                    return bad("sigma and jump_rate must be nonnegative");
                }
                if !(0.0..=1.0).contains(&p_up) {
                    return bad("p_up must lie in [0, 1]");
                }
                if !(eta_up > 0.0 && eta_down > 0.0) {
                    return bad("jump rates eta_up, eta_down must be positive");
                }
                if sigma == 0.0 {
                    // Bounded variation without Gaussian part: 1/(q+Ψ) ~ 1/λ.
                    return Err(Error::NonIntegrableResolvent(
                        "jump diffusion needs sigma > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        match *self {
            LevyModel::Brownian { sigma } => format!("brownian(sigma={sigma})"),
            LevyModel::DriftedBrownian { sigma, drift } => {
                format!("drifted_brownian(sigma={sigma},drift={drift})")
            }
            LevyModel::Stable { alpha, c_plus, c_minus } => {
                format!("stable(alpha={alpha},c_plus={c_plus},c_minus={c_minus})")
            }
            LevyModel::JumpDiffusion { sigma, jump_rate, p_up, eta_up, eta_down } => format!(
                "jump_diffusion(sigma={sigma},rate={jump_rate},p_up={p_up},eta_up={eta_up},eta_down={eta_down})"
            ),
        }
    }

    /// `(c, β)` of a stable model.
    pub fn stable_scale_skew(&self) -> Option<(f64, f64)> {
        match *self {
            LevyModel::Stable { alpha, c_plus, c_minus } => {
                let total = c_plus + c_minus;
                let c = total * PI / (2.0 * alpha * gamma(alpha) * (PI * alpha / 2.0).sin());
                Some((c, (c_plus - c_minus) / total))
            }
            _ => None,
        }
    }

    /// Characteristic exponent `Ψ(λ)`, evaluated without cancellation near `λ = 0`.
    pub fn psi(&self, lambda: f64) -> Complex64 {
        match *self {
            LevyModel::Brownian { sigma } => Complex64::new(0.5 * sigma * sigma * lambda * lambda, 0.0),
            LevyModel::DriftedBrownian { sigma, drift } => {
                Complex64::new(0.5 * sigma * sigma * lambda * lambda, drift * lambda)
            }
            LevyModel::Stable { alpha, .. } => {
                let (c, beta) = self.stable_scale_skew().unwrap();
                let t = (PI * alpha / 2.0).tan();
                let mag = c * lambda.abs().powf(alpha);
                Complex64::new(mag, -mag * beta * lambda.signum() * t)
            }
            LevyModel::JumpDiffusion { sigma, .. } => {
                let l2 = lambda * lambda;
                Complex64::new(0.5 * sigma * sigma * l2, 0.0) + self.jump_part(lambda)
            }
        }
    }

    /// Compensated jump part `rate (1 - φ_J(λ) + iλ E J)` of the jump diffusion,
    /// written as `rate λ² [p/(η₊(η₊ - iλ)) + (1-p)/(η₋(η₋ + iλ))]`.
    fn jump_part(&self, lambda: f64) -> Complex64 {
        match *self {
            LevyModel::JumpDiffusion { jump_rate, p_up, eta_up, eta_down, .. } => {
                let up = p_up / (eta_up * Complex64::new(eta_up, -lambda));
                let down = (1.0 - p_up) / (eta_down * Complex64::new(eta_down, lambda));
                jump_rate * lambda * lambda * (up + down)
            }
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn theta(&self, lambda: f64) -> f64 {
        self.psi(lambda).re
    }

    pub fn omega(&self, lambda: f64) -> f64 {
        self.psi(lambda).im
    }

    /// `(A, p)` with `Ψ(λ) ≈ A λ^p` as `λ → +∞`.
    pub fn tail_power(&self) -> (Complex64, f64) {
        match *self {
            LevyModel::Brownian { sigma }
            | LevyModel::DriftedBrownian { sigma, .. }
            | LevyModel::JumpDiffusion { sigma, .. } => (Complex64::new(0.5 * sigma * sigma, 0.0), 2.0),
            LevyModel::Stable { alpha, .. } => {
                let (c, beta) = self.stable_scale_skew().unwrap();
                (Complex64::new(c, -c * beta * (PI * alpha / 2.0).tan()), alpha)
            }
        }
    }

    /// `Ψ(λ) - A λ^p` for `λ > 0`, computed directly.
    pub fn tail_remainder(&self, lambda: f64) -> Complex64 {
        match *self {
            LevyModel::Brownian { .. } | LevyModel::Stable { .. } => Complex64::new(0.0, 0.0),
            LevyModel::DriftedBrownian { drift, .. } => Complex64::new(0.0, drift * lambda),
            LevyModel::JumpDiffusion { .. } => self.jump_part(lambda),
        }
    }

    /// Exponent `p0` with `|Ψ(λ)| ≍ λ^{p0}` as `λ → 0`.
    pub fn small_power(&self) -> f64 {
        match *self {
            LevyModel::Brownian { .. } | LevyModel::JumpDiffusion { .. } => 2.0,
            LevyModel::DriftedBrownian { drift, .. } => {
                if drift == 0.0 {
                    2.0
                } else {
                    1.0
                }
            }
            LevyModel::Stable { alpha, .. } => alpha,
        }
    }

    /// `Var X_1`, infinite for stable models.
    pub fn m2(&self) -> f64 {
        match *self {
            LevyModel::Brownian { sigma } | LevyModel::DriftedBrownian { sigma, .. } => sigma * sigma,
            LevyModel::Stable { .. } => f64::INFINITY,
            LevyModel::JumpDiffusion { sigma, jump_rate, p_up, eta_up, eta_down } => {
                sigma * sigma
                    + jump_rate * (2.0 * p_up / (eta_up * eta_up) + 2.0 * (1.0 - p_up) / (eta_down * eta_down))
            }
        }
    }

    /// `E X_1`.
    pub fn mean(&self) -> f64 {
        match *self {
            LevyModel::DriftedBrownian { drift, .. } => -drift,
            _ => 0.0,
        }
    }

    pub fn is_recurrent(&self) -> bool {
        self.mean() == 0.0
    }

    /// Gaussian coefficient σ (zero for stable models).
    pub fn sigma(&self) -> f64 {
        match *self {
            LevyModel::Brownian { sigma }
            | LevyModel::DriftedBrownian { sigma, .. }
            | LevyModel::JumpDiffusion { sigma, .. } => sigma,
            LevyModel::Stable { .. } => 0.0,
        }
    }

    /// Closed-form `h` where one is known: `|x|/σ²` for Brownian motion,
    /// `(1 - β sgn x)|x|^{α-1}/K(α)` for stable models and the transient
    /// renormalised `h` for drifted Brownian motion.
    pub fn h_closed_form(&self, x: f64) -> Option<f64> {
        match *self {
            LevyModel::Brownian { sigma } => Some(x.abs() / (sigma * sigma)),
            LevyModel::Stable { alpha, .. } => {
                let (c, beta) = self.stable_scale_skew().unwrap();
                let t = (PI * alpha / 2.0).tan();
                let k = -2.0 * c * gamma(alpha) * (PI * alpha / 2.0).cos() * (1.0 + beta * beta * t * t);
                Some((1.0 - beta * x.signum()) * x.abs().powf(alpha - 1.0) / k)
            }
            LevyModel::DriftedBrownian { sigma, drift } => {
                if drift == 0.0 {
                    return Some(x.abs() / (sigma * sigma));
                }
                let s2 = sigma * sigma;
                Some(-((drift * x - drift.abs() * x.abs()) / s2).exp_m1() / drift.abs())
            }
            LevyModel::JumpDiffusion { .. } => None,
        }
    }

    /// Closed-form q-resolvent density for the Brownian variants.
    pub fn resolvent_closed_form(&self, x: f64, q: f64) -> Option<f64> {
        let (sigma, drift) = match *self {
            LevyModel::Brownian { sigma } => (sigma, 0.0),
            LevyModel::DriftedBrownian { sigma, drift } => (sigma, drift),
            _ => return None,
        };
        let s2 = sigma * sigma;
        let mu = -drift;
        let root = (mu * mu + 2.0 * q * s2).sqrt();
        Some(((mu * x - root * x.abs()) / s2).exp() / root)
    }

    /// Closed-form `h_q` for the Brownian variants.
    pub fn h_q_closed_form(&self, x: f64, q: f64) -> Option<f64> {
        let (sigma, drift) = match *self {
            LevyModel::Brownian { sigma } => (sigma, 0.0),
            LevyModel::DriftedBrownian { sigma, drift } => (sigma, drift),
            _ => return None,
        };
        let s2 = sigma * sigma;
        let mu = -drift;
        let root = (mu * mu + 2.0 * q * s2).sqrt();
        Some(-((-mu * x - root * x.abs()) / s2).exp_m1() / root)
    }

    /// Closed-form `κ = lim 1/r_q(0)`.
    pub fn kappa_closed_form(&self) -> Option<f64> {
        match *self {
            LevyModel::DriftedBrownian { drift, .. } => Some(drift.abs()),
            LevyModel::Brownian { .. } | LevyModel::Stable { .. } | LevyModel::JumpDiffusion { .. } => Some(0.0),
        }
    }

    /// Moment-free checks: recurrence, Assumption A via an `L¹` bound on
    /// `1/(q+Ψ)` at each probe `q`, and `κ`.
    pub fn diagnostics(&self, probe_qs: &[f64]) -> Result<Diagnostics> {
        self.validate()?;
        let (a, p) = self.tail_power();
        let mut bounds = Vec::new();
        let mut assumption_a = p > 1.0;
        for &q in probe_qs {
            // Head: crude Riemann upper bound on a geometric grid (|1/(q+Ψ)| ≤ 1/(q+θ)).
            let split = ((q.max(1.0)) / a.norm()).powf(1.0 / p).max(1.0);
            let n = 40 * 12;
            let lo = split * 1e-12;
            let ratio = (split / lo).powf(1.0 / n as f64);
            let mut head = lo / q;
            let mut left = lo;
            for _ in 0..n {
                let right = left * ratio;
                let v = 1.0 / (q + self.theta(left));
                head += v * (right - left);
                left = right;
            }
            let tail = if p > 1.0 {
                split.powf(1.0 - p) / (a.re * (p - 1.0))
            } else {
                f64::INFINITY
            };
            let total = head + tail;
            if !total.is_finite() {
                assumption_a = false;
            }
            bounds.push((q, total));
        }
        if !assumption_a {
            return Err(Error::NonIntegrableResolvent(self.name()));
        }
        let imaginary_condition = self.imaginary_condition();
        let kappa = if self.is_recurrent() {
            0.0
        } else {
            crate::resolvent::kappa(self, &crate::resolvent::QuadratureEngine::default())?.value
        };
        Ok(Diagnostics {
            m2: self.m2(),
            recurrent: self.is_recurrent(),
            assumption_a,
            resolvent_l1_bounds: bounds,
            imaginary_condition,
            kappa,
        })
    }

    /// `∫_0^1 |Im(λ/Ψ(λ))| dλ` on a 40-points-per-decade geometric grid down to
    /// `1e-12`, plus the analytic contribution of `(0, 1e-12)` from the
    /// small-λ power law. `None` when the small-λ behaviour is not integrable.
    pub fn imaginary_condition(&self) -> Option<f64> {
        let p0 = self.small_power();
        let f = |l: f64| (Complex64::new(l, 0.0) / self.psi(l)).im.abs();
        let decades = 12;
        let n = 40 * decades;
        let lo = 10f64.powi(-decades);
        let ratio = 10f64.powf(1.0 / 40.0);
        let mut sum = 0.0;
        let mut left = lo;
        let mut f_left = f(left);
        for _ in 0..n {
            let right = left * ratio;
            let f_right = f(right);
            sum += 0.5 * (f_left + f_right) * (right - left);
            left = right;
            f_left = f_right;
        }
        // |Im(λ/Ψ)| ≲ C λ^{1-p0} near zero.
        let exponent = 2.0 - p0;
        if exponent <= 0.0 {
            if f(lo) * lo < 1e-300 {
                return Some(sum);
            }
            return None;
        }
        let c = f(lo) / lo.powf(1.0 - p0);
        Some(sum + c * lo.powf(exponent) / exponent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn models() -> Vec<LevyModel> {
        PRESETS.iter().map(|p| LevyModel::preset(p).unwrap()).collect()
    }

    #[test]
    fn presets_validate() {
        for m in models() {
            m.validate().unwrap();
        }
    }

    #[test]
    fn brownian_exponent() {
        let m = LevyModel::Brownian { sigma: 1.0 };
        assert_eq!(m.psi(2.0), Complex64::new(2.0, 0.0));
    }

    #[test]
    fn stable_exponent_at_one() {
        let m = LevyModel::stable_from_scale(1.5, 1.0, 0.0).unwrap();
        let v = m.psi(1.0);
        assert!((v.re - 1.0).abs() < 1e-14 && v.im.abs() < 1e-14);
        let m = LevyModel::stable_from_scale(1.5, 1.0, 0.5).unwrap();
        let v = m.psi(1.0);
        // tan(3π/4) = -1, so Ψ(1) = 1 + 0.5 i.
        assert!((v.re - 1.0).abs() < 1e-14 && (v.im - 0.5).abs() < 1e-13);
    }

    #[test]
    fn stable_h_symmetric_value() {
        // c = 1, α = 1.5, β = 0: K = -2 Γ(1.5) cos(3π/4).
        let m = LevyModel::stable_from_scale(1.5, 1.0, 0.0).unwrap();
        let k = 2.0 * gamma(1.5) * (0.5f64).sqrt();
        assert!((m.h_closed_form(1.0).unwrap() - 1.0 / k).abs() < 1e-14);
        assert!((m.h_closed_form(1.0).unwrap() - 0.7979).abs() < 1e-4);
    }

    #[test]
    fn jump_part_matches_direct_formula() {
        let m = LevyModel::preset("jumps").unwrap();
        if let LevyModel::JumpDiffusion { sigma, jump_rate, p_up, eta_up, eta_down } = m {
            for &l in &[0.3, 1.0, 7.0, -2.5] {
                let phi = p_up * eta_up / Complex64::new(eta_up, -l)
                    + (1.0 - p_up) * eta_down / Complex64::new(eta_down, l);
                let mean_jump = p_up / eta_up - (1.0 - p_up) / eta_down;
                let direct = 0.5 * sigma * sigma * l * l
                    + jump_rate * (Complex64::new(1.0, l * mean_jump) - phi);
                assert!((m.psi(l) - direct).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn jump_second_moment_is_curvature() {
        let m = LevyModel::preset("jumps").unwrap();
        let l = 1e-4;
        let curv = 2.0 * m.theta(l) / (l * l);
        assert!((curv - m.m2()).abs() < 1e-6);
    }

    #[test]
    fn config_round_trip() {
        let text = "[model]\nkind = \"stable\"\nalpha = 1.5\nc_plus = 0.5\nc_minus = 0.5\n";
        let m = LevyModel::from_config_str(text).unwrap();
        assert_eq!(m, LevyModel::preset("stable-sym-1.5").unwrap());
        let bad = "[model]\nkind = \"stable\"\nalpha = 2.5\nc_plus = 0.5\nc_minus = 0.5\n";
        assert!(matches!(LevyModel::from_config_str(bad), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn zero_gaussian_jump_model_rejected() {
        let m = LevyModel::JumpDiffusion { sigma: 0.0, jump_rate: 1.0, p_up: 0.5, eta_up: 1.0, eta_down: 1.0 };
        assert!(matches!(m.validate(), Err(Error::NonIntegrableResolvent(_))));
    }

    #[test]
    fn drifted_h_closed_form() {
        let m = LevyModel::preset("bm-drift").unwrap();
        assert_eq!(m.h_closed_form(1.0).unwrap(), 0.0);
        assert!((m.h_closed_form(-1.0).unwrap() - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn imaginary_condition_finite_for_stable() {
        let m = LevyModel::preset("stable-asym-1.5").unwrap();
        assert!(m.imaginary_condition().unwrap().is_finite());
        let d = m.diagnostics(&[1.0, 1e-3]).unwrap();
        assert!(d.recurrent && d.assumption_a && d.m2.is_infinite() && d.kappa == 0.0);
    }

    proptest! {
        #[test]
        fn real_part_even_imaginary_odd(l in -50.0f64..50.0, idx in 0usize..5) {
            let m = models()[idx].clone();
            let a = m.psi(l);
            let b = m.psi(-l);
            prop_assert!((a.re - b.re).abs() <= 1e-12 * (1.0 + a.re.abs()));
            prop_assert!((a.im + b.im).abs() <= 1e-12 * (1.0 + a.im.abs()));
            prop_assert!(a.re >= 0.0);
        }
    }
}
