//! Resolvent densities `r_q`, the renormalised zero resolvent `h` and its
//! relatives, computed by Fourier inversion of `1/(q + Ψ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LevyModel;
use crate::quadrature::{integrate, integrate_to_infinity, neville_at_zero, oscillatory_tail, QuadResult, Tol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TailStrategy {
    /// Extend the head interval until `2|G(Λ)|/|freq|` is below tolerance and
    /// count that bound as error.
    AnalyticBound,
    /// Sum half-period cells with epsilon acceleration.
    OscillationCells,
}

#[derive(Clone, Debug)]
pub struct QuadratureEngine {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    pub max_cells: usize,
    pub tail: TailStrategy,
    /// Use closed forms (Brownian variants, stable `h`) when available.
    pub prefer_closed_form: bool,
    /// First rung of the `q → 0` ladder `q_k = q_start 2^{-k}`.
    pub q_start: f64,
    pub max_q_levels: usize,
    /// Relative agreement of successive extrapolants.
    pub extrap_tol: f64,
}

impl Default for QuadratureEngine {
    fn default() -> Self {
        QuadratureEngine {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_panels: 20_000,
            max_cells: 2_000,
            tail: TailStrategy::OscillationCells,
            prefer_closed_form: true,
            q_start: 0.5,
            max_q_levels: 30,
            extrap_tol: 1e-7,
        }
    }
}

impl QuadratureEngine {
    /// Same tolerances, closed forms disabled.
    pub fn quadrature_only(&self) -> Self {
        QuadratureEngine { prefer_closed_form: false, ..self.clone() }
    }

    fn tol(&self) -> Tol {
        Tol { abs: self.abs_tol, rel: self.rel_tol }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    ClosedForm,
    Quadrature,
    Extrapolation,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResolventValue {
    pub value: f64,
    pub abs_err: f64,
    pub method: Method,
}

impl ResolventValue {
    fn closed(value: f64) -> Self {
        ResolventValue { value, abs_err: 4.0 * f64::EPSILON * value.abs(), method: Method::ClosedForm }
    }
    fn quad(r: QuadResult, scale: f64) -> Self {
        ResolventValue { value: r.value * scale, abs_err: r.abs_err * scale.abs(), method: Method::Quadrature }
    }
}

/// `1 - e^{iλx}` written as `-2i sin(λx/2) e^{iλx/2}`.
fn one_minus_phase(lambda: f64, x: f64) -> Complex64 {
    let half = 0.5 * lambda * x;
    Complex64::new(0.0, -2.0 * half.sin()) * Complex64::from_polar(1.0, half)
}

/// `∫_0^∞ head(λ) dλ`, where beyond the split point `head` equals
/// `Σ_j Re(c_j e^{i f_j λ} / (q + Ψ(λ)))`.
fn fourier_integral(
    model: &LevyModel,
    q: f64,
    head: &dyn Fn(f64) -> f64,
    terms: &[(Complex64, f64)],
    eng: &QuadratureEngine,
    what: &str,
) -> Result<QuadResult> {
    let (a_coef, p) = model.tail_power();
    let p0 = model.small_power();
    let split = (4.0 * q.max(1.0) / a_coef.norm()).powf(1.0 / p);
    let fmax = terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
    let tol = eng.tol();
    let half_tol = Tol { abs: tol.abs * 0.5, rel: tol.rel * 0.5 };

    // Near zero, map λ = λ0 u^m so that a λ^{1-p0} singularity becomes bounded.
    let lambda0 = if fmax > 0.0 { split.min(PI / fmax) } else { split };
    let m = if p0 > 1.0 && p0 < 2.0 { (1.0 / (2.0 - p0)).min(8.0) } else { 1.0 };
    let mapped = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let l = lambda0 * u.powf(m);
        head(l) * lambda0 * m * u.powf(m - 1.0)
    };
    let mut geo = Vec::new();
    let mut b = 0.5;
    while b > 1e-6 {
        geo.push(b);
        b *= 0.25;
    }
    let mut res = integrate(&mapped, 0.0, 1.0, &geo, half_tol, eng.max_panels, what)?;

    if split > lambda0 {
        let mut breaks = Vec::new();
        if fmax > 0.0 {
            let spacing = (4.0 * PI / fmax).max((split - lambda0) / 20_000.0);
            let mut t = lambda0 + spacing;
            while t < split {
                breaks.push(t);
                t += spacing;
            }
        }
        let mut g = lambda0 * 2.0;
        while g < split {
            breaks.push(g);
            g *= 2.0;
        }
        breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
        res = res + integrate(head, lambda0, split, &breaks, half_tol, eng.max_panels.max(breaks.len() * 4), what)?;
    }

    let g = |l: f64| 1.0 / (q + model.psi(l));
    let nterms = terms.len().max(1) as f64;
    let tail_tol = Tol { abs: tol.abs * 0.5 / nterms, rel: tol.rel * 0.5 / nterms };
    for &(c, freq) in terms {
        if freq == 0.0 {
            // Leading power integrated exactly, remainder by substitution.
            let lead = (c / a_coef).re * split.powf(1.0 - p) / (p - 1.0);
            res = res + QuadResult { value: lead, abs_err: 0.0, evals: 0 };
            let stable_pure = matches!(model, LevyModel::Stable { .. }) && q == 0.0;
            if !stable_pure {
                let rem = |l: f64| {
                    let r = -(q + model.tail_remainder(l)) / ((q + model.psi(l)) * a_coef * l.powf(p));
                    (c * r).re
                };
                res = res + integrate_to_infinity(&rem, split, tail_tol, eng.max_panels, what)?;
            }
        } else {
            match eng.tail {
                TailStrategy::OscillationCells => {
                    res = res + oscillatory_tail(&g, c, freq, split, tail_tol, eng.max_cells, what)?;
                }
                TailStrategy::AnalyticBound => {
                    let bound = |l: f64| 2.0 * c.norm() * g(l).norm() / freq.abs();
                    let mut end = split;
                    let mut k = 0;
                    while bound(end) > tail_tol.abs && k < 80 {
                        end *= 2.0;
                        k += 1;
                    }
                    let spacing = 4.0 * PI / freq.abs();
                    let count = ((end - split) / spacing).ceil() as usize;
                    if count > eng.max_panels || bound(end) > tail_tol.abs {
                        return Err(Error::QuadratureNoConvergence {
                            what: format!("{what} (analytic tail bound)"),
                            achieved: bound(end),
                            requested: tail_tol.abs,
                        });
                    }
                    let breaks: Vec<f64> = (1..count).map(|i| split + i as f64 * spacing).collect();
                    let f = |l: f64| (c * Complex64::from_polar(1.0, freq * l) * g(l)).re;
                    let mut r = integrate(&f, split, end, &breaks, tail_tol, eng.max_panels.max(4 * count), what)?;
                    r.abs_err += bound(end);
                    res = res + r;
                }
            }
        }
    }
    Ok(res)
}

/// q-resolvent density `r_q(x)`, `q > 0`.
pub fn r_q(model: &LevyModel, x: f64, q: f64, eng: &QuadratureEngine) -> Result<ResolventValue> {
    if !(q > 0.0) {
        return Err(Error::InvalidModel(format!("resolvent needs q > 0, got {q}")));
    }
    if eng.prefer_closed_form {
        if let Some(v) = model.resolvent_closed_form(x, q) {
            return Ok(ResolventValue::closed(v));
        }
    }
    let head = |l: f64| (Complex64::from_polar(1.0, -l * x) / (q + model.psi(l))).re;
    let r = fourier_integral(model, q, &head, &[(Complex64::new(1.0, 0.0), -x)], eng, "r_q")?;
    Ok(ResolventValue::quad(r, 1.0 / PI))
}

/// `h_q(x) = r_q(0) - r_q(-x)` as a single integral.
pub fn h_q(model: &LevyModel, x: f64, q: f64, eng: &QuadratureEngine) -> Result<ResolventValue> {
    if !(q > 0.0) {
        return Err(Error::InvalidModel(format!("h_q needs q > 0, got {q}")));
    }
    if x == 0.0 {
        return Ok(ResolventValue::closed(0.0));
    }
    if eng.prefer_closed_form {
        if let Some(v) = model.h_q_closed_form(x, q) {
            return Ok(ResolventValue::closed(v));
        }
    }
    let head = |l: f64| (one_minus_phase(l, x) / (q + model.psi(l))).re;
    let terms = [(Complex64::new(1.0, 0.0), 0.0), (Complex64::new(-1.0, 0.0), x)];
    let r = fourier_integral(model, q, &head, &terms, eng, "h_q")?;
    Ok(ResolventValue::quad(r, 1.0 / PI))
}

/// `(1/π) ∫ Re((1 - e^{iλx})/Ψ(λ)) dλ`. Valid when `m2 < ∞`, or when
/// `∫_0^1 |Im(λ/Ψ)| < ∞`, which holds for every stable model here.
pub fn h_direct(model: &LevyModel, x: f64, eng: &QuadratureEngine) -> Result<ResolventValue> {
    if !model.is_recurrent() {
        return Err(Error::UnsupportedModel("direct h integral diverges for transient models".into()));
    }
    if x == 0.0 {
        return Ok(ResolventValue { value: 0.0, abs_err: 0.0, method: Method::Quadrature });
    }
    let head = |l: f64| (one_minus_phase(l, x) / model.psi(l)).re;
    let terms = [(Complex64::new(1.0, 0.0), 0.0), (Complex64::new(-1.0, 0.0), x)];
    let r = fourier_integral(model, 0.0, &head, &terms, eng, "h")?;
    Ok(ResolventValue::quad(r, 1.0 / PI))
}

/// Exponent `e` such that `q ↦ value(q)` is extrapolated as a polynomial in `q^e`.
fn ladder_exponent(model: &LevyModel) -> f64 {
    if !model.is_recurrent() {
        1.0
    } else if model.m2().is_finite() {
        0.5
    } else {
        2.0 / model.small_power() - 1.0
    }
}

/// Richardson extrapolation of `value(q_k)` to `q = 0` along `q_k = q_start 2^{-k}`,
/// using the last four rungs.
pub fn extrapolate_to_zero(
    value: &dyn Fn(f64) -> Result<f64>,
    exponent: f64,
    eng: &QuadratureEngine,
) -> Result<ResolventValue> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ests: Vec<f64> = Vec::new();
    for k in 0..eng.max_q_levels {
        let q = eng.q_start * 0.5f64.powi(k as i32);
        xs.push(q.powf(exponent));
        ys.push(value(q)?);
        if xs.len() >= 4 {
            let n = xs.len();
            ests.push(neville_at_zero(&xs[n - 4..], &ys[n - 4..]));
        }
        let m = ests.len();
        if m >= 3 {
            let d1 = (ests[m - 1] - ests[m - 2]).abs();
            let d2 = (ests[m - 2] - ests[m - 3]).abs();
            let scale = ests[m - 1].abs().max(1.0);
            if d1 <= eng.extrap_tol * scale && d2 <= 10.0 * eng.extrap_tol * scale {
                return Ok(ResolventValue { value: ests[m - 1], abs_err: d1.max(d2), method: Method::Extrapolation });
            }
        }
    }
    let m = ests.len();
    let (last, previous) = (ests[m - 1], ests[m - 2]);
    if (last - previous).abs() > 10.0 * eng.extrap_tol * last.abs().max(1.0) {
        return Err(Error::ExtrapolationUnstable { last, previous });
    }
    Ok(ResolventValue { value: last, abs_err: (last - previous).abs(), method: Method::Extrapolation })
}

/// `h_q` extrapolated to `q = 0`.
pub fn h_extrapolated(model: &LevyModel, x: f64, eng: &QuadratureEngine) -> Result<ResolventValue> {
    if x == 0.0 {
        return Ok(ResolventValue { value: 0.0, abs_err: 0.0, method: Method::Extrapolation });
    }
    let f = |q: f64| h_q(model, x, q, eng).map(|v| v.value);
    extrapolate_to_zero(&f, ladder_exponent(model), eng)
}

/// Renormalised zero resolvent `h`. For transient models this is the
/// transient `h` (see [`transient_h`]).
pub fn h(model: &LevyModel, x: f64, eng: &QuadratureEngine) -> Result<ResolventValue> {
    if !model.is_recurrent() {
        return transient_h(model, x, eng);
    }
    if eng.prefer_closed_form {
        if let Some(v) = model.h_closed_form(x) {
            return Ok(ResolventValue::closed(v));
        }
    }
    if model.m2().is_finite() || model.imaginary_condition().is_some() {
        h_direct(model, x, eng)
    } else {
        h_extrapolated(model, x, eng)
    }
}

/// `κ = lim_{q→0} 1/r_q(0)`; zero for recurrent models.
pub fn kappa(model: &LevyModel, eng: &QuadratureEngine) -> Result<ResolventValue> {
    if model.is_recurrent() {
        return Ok(ResolventValue::closed(0.0));
    }
    let f = |q: f64| r_q(model, 0.0, q, eng).map(|v| 1.0 / v.value);
    extrapolate_to_zero(&f, 1.0, eng)
}

/// `h = lim h_q` for a transient model.
pub fn transient_h(model: &LevyModel, x: f64, eng: &QuadratureEngine) -> Result<ResolventValue> {
    if model.is_recurrent() {
        return Err(Error::NotTransient);
    }
    if eng.prefer_closed_form {
        if let Some(v) = model.h_closed_form(x) {
            return Ok(ResolventValue::closed(v));
        }
    }
    let f = |q: f64| h_q(model, x, q, eng).map(|v| v.value);
    extrapolate_to_zero(&f, 1.0, eng)
}

/// `h(x) + h(-x) = (2/π) ∫ Re((1 - cos λx)/Ψ) dλ`.
pub fn h_symmetrized(model: &LevyModel, x: f64, eng: &QuadratureEngine) -> Result<ResolventValue> {
    if x == 0.0 {
        return Ok(ResolventValue { value: 0.0, abs_err: 0.0, method: Method::Quadrature });
    }
    let head = |l: f64| {
        let s = (0.5 * l * x).sin();
        (Complex64::new(2.0 * s * s, 0.0) / model.psi(l)).re
    };
    let terms = [
        (Complex64::new(1.0, 0.0), 0.0),
        (Complex64::new(-0.5, 0.0), x),
        (Complex64::new(-0.5, 0.0), -x),
    ];
    let r = fourier_integral(model, 0.0, &head, &terms, eng, "h_symmetrized")?;
    Ok(ResolventValue::quad(r, 2.0 / PI))
}

/// `h(y + 2x) - 2h(y + x) + h(y) = (2/π) ∫ Re(e^{iλ(y+x)}(1 - cos λx)/Ψ) dλ`.
pub fn h_second_difference(model: &LevyModel, x: f64, y: f64, eng: &QuadratureEngine) -> Result<ResolventValue> {
    if x == 0.0 {
        return Ok(ResolventValue { value: 0.0, abs_err: 0.0, method: Method::Quadrature });
    }
    let head = |l: f64| {
        let s = (0.5 * l * x).sin();
        (Complex64::from_polar(2.0 * s * s, l * (y + x)) / model.psi(l)).re
    };
    let terms = [
        (Complex64::new(1.0, 0.0), y + x),
        (Complex64::new(-0.5, 0.0), y + 2.0 * x),
        (Complex64::new(-0.5, 0.0), y),
    ];
    let r = fourier_integral(model, 0.0, &head, &terms, eng, "h_second_difference")?;
    Ok(ResolventValue::quad(r, 2.0 / PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm() -> LevyModel {
        LevyModel::Brownian { sigma: 1.0 }
    }

    #[test]
    fn brownian_resolvent_quadrature_matches_closed_form() {
        let eng = QuadratureEngine::default().quadrature_only();
        for &x in &[0.0, 0.3, -1.0, 2.5] {
            for &q in &[1.0, 0.1] {
                let num = r_q(&bm(), x, q, &eng).unwrap();
                let exact = (-(2.0 * q).sqrt() * x.abs()).exp() / (2.0 * q).sqrt();
                assert!((num.value - exact).abs() < 1e-8, "x={x} q={q} {} {}", num.value, exact);
                assert_eq!(num.method, Method::Quadrature);
            }
        }
    }

    #[test]
    fn brownian_resolvent_closed_example() {
        let v = r_q(&bm(), 0.0, 1.0, &QuadratureEngine::default()).unwrap();
        assert!((v.value - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(v.method, Method::ClosedForm);
    }

    #[test]
    fn brownian_h_quadrature() {
        let eng = QuadratureEngine::default().quadrature_only();
        for &x in &[0.01, 0.5, -1.0, 3.0, -40.0] {
            let v = h_direct(&bm(), x, &eng).unwrap();
            assert!((v.value - x.abs()).abs() < 1e-8 * x.abs().max(1.0), "x={x} {}", v.value);
        }
    }

    #[test]
    fn brownian_h_q_quadrature() {
        let eng = QuadratureEngine::default().quadrature_only();
        for &x in &[0.5, -2.0] {
            let q = 0.01;
            let v = h_q(&bm(), x, q, &eng).unwrap();
            let exact = bm().h_q_closed_form(x, q).unwrap();
            assert!((v.value - exact).abs() < 1e-8, "{} {}", v.value, exact);
        }
    }

    #[test]
    fn analytic_bound_tail_agrees_for_brownian() {
        let eng = QuadratureEngine { tail: TailStrategy::AnalyticBound, abs_tol: 1e-7, rel_tol: 1e-7, ..Default::default() }
            .quadrature_only();
        let v = r_q(&bm(), 1.0, 0.5, &eng).unwrap();
        assert!((v.value - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn drifted_kappa_extrapolation() {
        let m = LevyModel::preset("bm-drift").unwrap();
        let k = kappa(&m, &QuadratureEngine::default()).unwrap();
        assert!((k.value - 1.0).abs() < 1e-6, "{}", k.value);
        let k = kappa(&m, &QuadratureEngine::default().quadrature_only()).unwrap();
        assert!((k.value - 1.0).abs() < 1e-6, "{}", k.value);
    }

    #[test]
    fn stable_direct_matches_closed_form() {
        let eng = QuadratureEngine::default().quadrature_only();
        for &(alpha, beta) in &[(1.5, 0.0), (1.5, 0.5), (1.2, -0.5), (1.8, 0.5)] {
            let m = LevyModel::stable_from_scale(alpha, 1.0, beta).unwrap();
            for &x in &[-2.0, 0.5, 3.0] {
                let exact = m.h_closed_form(x).unwrap();
                let v = h_direct(&m, x, &eng).unwrap();
                assert!((v.value - exact).abs() < 1e-6 * exact.abs().max(1.0), "a={alpha} b={beta} x={x} {} {}", v.value, exact);
            }
        }
    }

    #[test]
    fn symmetrized_and_second_difference() {
        let m = LevyModel::preset("jumps").unwrap();
        let eng = QuadratureEngine::default();
        let hp = h(&m, 1.3, &eng).unwrap().value;
        let hm = h(&m, -1.3, &eng).unwrap().value;
        let s = h_symmetrized(&m, 1.3, &eng).unwrap().value;
        assert!((s - hp - hm).abs() < 1e-7);
        let (x, y) = (0.7, -0.4);
        let d = h_second_difference(&m, x, y, &eng).unwrap().value;
        let direct = h(&m, y + 2.0 * x, &eng).unwrap().value - 2.0 * h(&m, y + x, &eng).unwrap().value
            + h(&m, y, &eng).unwrap().value;
        assert!((d - direct).abs() < 1e-7, "{d} {direct}");
    }
}
