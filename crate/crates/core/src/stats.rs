//! Sample moments and the Kolmogorov–Smirnov statistic.

/// Asymptotic two-sided Kolmogorov–Smirnov critical value at the 1% level,
/// to be divided by `√n`.
pub const KS_CRITICAL_1PCT: f64 = 1.628;

/// `(mean, standard error of the mean)`.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// `sup |F_n - F|` for the empirical distribution of `values` against `cdf`.
pub fn ks_statistic(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

pub fn ks_critical(n: usize) -> f64 {
    KS_CRITICAL_1PCT / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sample() {
        let (m, se) = mean_stderr(&[1.0; 10]);
        assert_eq!((m, se), (1.0, 0.0));
    }

    #[test]
    fn ks_of_uniform_grid() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_statistic(&v, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.0005).abs() < 1e-12);
        assert!(d < ks_critical(1000));
    }
}
