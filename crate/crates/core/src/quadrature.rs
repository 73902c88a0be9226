//! Adaptive Gauss–Kronrod quadrature, Wynn's epsilon algorithm and the
//! half-period cell summation used for oscillatory Fourier tails.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208980976896,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Requested accuracy: stop when `err <= max(abs, rel * |value|)`.
#[derive(Clone, Copy, Debug)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
}

impl Tol {
    pub fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

impl std::ops::Add for QuadResult {
    type Output = QuadResult;
    fn add(self, o: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + o.value,
            abs_err: self.abs_err + o.abs_err,
            evals: self.evals + o.evals,
        }
    }
}

/// One 21-point Kronrod panel with the QUADPACK error estimate.
pub fn gk21<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resg = 0.0;
    let mut resk = WGK[10] * fc;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = resk * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (1.0f64).min((200.0 * err / resasc).powf(1.5));
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.partial_cmp(&o.err).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive integration over `[a, b]`, starting from the panels
/// delimited by `breaks` (points outside `(a, b)` are ignored).
pub fn integrate<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tol,
    max_panels: usize,
    what: &str,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult::default());
    }
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evals = 0;
    for w in pts.windows(2) {
        let (v, e) = gk21(f, w[0], w[1]);
        evals += 21;
        total += v;
        total_err += e;
        heap.push(Panel { a: w[0], b: w[1], value: v, err: e });
    }
    let cap = max_panels.max(heap.len() + 1);
    while total_err > tol.target(total) && heap.len() < cap {
        let p = heap.pop().unwrap();
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk21(f, p.a, mid);
        let (v2, e2) = gk21(f, mid, p.b);
        evals += 42;
        total += v1 + v2 - p.value;
        total_err += e1 + e2 - p.err;
        heap.push(Panel { a: p.a, b: mid, value: v1, err: e1 });
        heap.push(Panel { a: mid, b: p.b, value: v2, err: e2 });
    }
    // Re-sum to remove drift from incremental updates.
    let (mut value, mut err) = (0.0, 0.0);
    for p in heap.iter() {
        value += p.value;
        err += p.err;
    }
    if !value.is_finite() {
        return Err(Error::QuadratureNoConvergence {
            what: what.to_string(),
            achieved: f64::INFINITY,
            requested: tol.target(0.0),
        });
    }
    if err > tol.target(value) {
        return Err(Error::QuadratureNoConvergence {
            what: what.to_string(),
            achieved: err,
            requested: tol.target(value),
        });
    }
    Ok(QuadResult { value, abs_err: err, evals })
}

/// `∫_a^∞ f` for algebraically decaying `f`, via `λ = a/t`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    tol: Tol,
    max_panels: usize,
    what: &str,
) -> Result<QuadResult> {
    assert!(a > 0.0);
    let g = |t: f64| {
        if t <= 0.0 {
            0.0
        } else {
            f(a / t) * a / (t * t)
        }
    };
    integrate(&g, 0.0, 1.0, &[0.5, 0.25, 0.125, 1.0 / 16.0], tol, max_panels, what)
}

/// Wynn's epsilon algorithm over a growing sequence of partial sums.
#[derive(Default)]
pub struct Epsilon {
    sums: Vec<f64>,
    estimates: Vec<f64>,
}

impl Epsilon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Push a new partial sum and return `(extrapolated limit, error estimate)`.
    pub fn push(&mut self, s: f64) -> (f64, f64) {
        self.sums.push(s);
        let n = self.sums.len();
        if n < 3 {
            self.estimates.push(s);
            return (s, f64::INFINITY);
        }
        // Build the table column by column, keeping even columns.
        let mut prev: Vec<f64> = vec![0.0; n + 1];
        let mut cur: Vec<f64> = self.sums.clone();
        let mut best = *cur.last().unwrap();
        let mut k = 0;
        while cur.len() > 1 {
            let mut next = Vec::with_capacity(cur.len() - 1);
            for i in 0..cur.len() - 1 {
                let d = cur[i + 1] - cur[i];
                let base = prev[i + 1];
                if d == 0.0 || !d.is_finite() {
                    next.push(f64::INFINITY);
                } else {
                    next.push(base + 1.0 / d);
                }
            }
            prev = cur;
            cur = next;
            k += 1;
            if k % 2 == 0 {
                if let Some(&last) = cur.last() {
                    if last.is_finite() {
                        best = last;
                    } else {
                        break;
                    }
                }
            }
        }
        self.estimates.push(best);
        let m = self.estimates.len();
        let e1 = (self.estimates[m - 1] - self.estimates[m - 2]).abs();
        let e2 = (self.estimates[m - 1] - self.estimates[m - 3]).abs();
        (best, e1 + e2)
    }
}

/// `∫_a^∞ Re(coeff · e^{i freq λ} g(λ)) dλ` for `freq != 0` and `g` decaying,
/// summing half-period cells and accelerating with the epsilon algorithm.
pub fn oscillatory_tail<G: Fn(f64) -> Complex64>(
    g: &G,
    coeff: Complex64,
    freq: f64,
    a: f64,
    tol: Tol,
    max_cells: usize,
    what: &str,
) -> Result<QuadResult> {
    let half = PI / freq.abs();
    let f = |l: f64| (coeff * Complex64::from_polar(1.0, freq * l) * g(l)).re;
    let mut eps = Epsilon::new();
    let mut sum = 0.0;
    let mut evals = 0;
    let mut cell_err = 0.0;
    let mut last = (0.0, f64::INFINITY);
    let cell_tol = Tol { abs: tol.abs * 0.05, rel: tol.rel * 0.05 };
    let mut left = a;
    for k in 0..max_cells {
        let right = a + (k as f64 + 1.0) * half;
        let r = integrate(&f, left, right, &[], cell_tol, 400, what)?;
        evals += r.evals;
        cell_err += r.abs_err;
        sum += r.value;
        left = right;
        let (est, err) = eps.push(sum);
        last = (est, err);
        if k >= 4 && err + cell_err <= tol.target(est) {
            return Ok(QuadResult { value: est, abs_err: err + cell_err, evals });
        }
        if k >= 2 && r.value.abs() + r.abs_err < 1e-3 * tol.target(sum) && err.is_finite() {
            return Ok(QuadResult { value: sum, abs_err: r.value.abs() + cell_err, evals });
        }
    }
    Err(Error::QuadratureNoConvergence {
        what: what.to_string(),
        achieved: last.1 + cell_err,
        requested: tol.target(last.0),
    })
}

/// Nodes and weights of the 21-point Kronrod rule on `[a, b]`, for callers that
/// reuse one rule across many integrands.
pub fn kronrod_nodes(a: f64, b: f64) -> Vec<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = Vec::with_capacity(21);
    for j in 0..10 {
        out.push((c - h * XGK[j], h * WGK[j]));
        out.push((c + h * XGK[j], h * WGK[j]));
    }
    out.push((c, h * WGK[10]));
    out
}

/// Value at zero of the polynomial through `(xs[i], ys[i])` (Neville).
pub fn neville_at_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let mut p = ys.to_vec();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i]);
        }
    }
    p[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: Tol = Tol { abs: 1e-12, rel: 1e-12 };

    #[test]
    fn kronrod_nodes_integrate_polynomials() {
        let v: f64 = kronrod_nodes(1.0, 3.0).iter().map(|&(x, w)| w * x.powi(9)).sum();
        assert!((v - (3f64.powi(10) - 1.0) / 10.0).abs() < 1e-9);
    }

    #[test]
    fn polynomial_exact() {
        let r = integrate(&|x: f64| x.powi(5) - 3.0 * x, 0.0, 2.0, &[], TOL, 10, "poly").unwrap();
        assert!((r.value - (64.0 / 6.0 - 6.0)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(&|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &[], Tol { abs: 1e-10, rel: 1e-10 }, 500, "sqrt")
            .unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn algebraic_tail() {
        let r = integrate_to_infinity(&|x: f64| 1.0 / (1.0 + x * x), 1.0, TOL, 200, "atan").unwrap();
        assert!((r.value - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_accelerates_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut e = Epsilon::new();
        let mut s = 0.0;
        let mut out = (0.0, 0.0);
        for k in 1..20 {
            s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            out = e.push(s);
        }
        assert!((out.0 - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fourier_tail_of_power() {
        // ∫_1^∞ cos(λ)/λ dλ = -Ci(1) = -0.3374039229009681.
        let g = |l: f64| Complex64::new(1.0 / l, 0.0);
        let r = oscillatory_tail(&g, Complex64::new(1.0, 0.0), 1.0, 1.0, Tol { abs: 1e-11, rel: 1e-11 }, 400, "ci")
            .unwrap();
        assert!((r.value + 0.3374039229009681).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn neville_recovers_quadratic() {
        let xs = [0.4, 0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - x + 2.0 * x * x).collect();
        assert!((neville_at_zero(&xs, &ys) - 3.0).abs() < 1e-13);
    }
}
