//! Small statistical helpers shared by estimators and tests.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Two-sample Kolmogorov–Smirnov statistic with its asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test. The p-value uses the Kolmogorov
/// limit law with Stephens' small-sample correction.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty(), "KS test needs non-empty samples");
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
    }
}

/// `P{K > λ}` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sided standard normal critical value for confidence `level`.
pub fn normal_critical(level: f64) -> f64 {
    let n = Normal::standard();
    n.inverse_cdf(0.5 + 0.5 * level)
}

/// Two-sided Student-t critical value for confidence `level`.
pub fn student_critical(level: f64, dof: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
    t.inverse_cdf(0.5 + 0.5 * level)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_accept() {
        let a: Vec<f64> = (0..500).map(|i| (i as f64 * 0.7).sin()).collect();
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn shifted_samples_reject() {
        let a: Vec<f64> = (0..2000).map(|i| i as f64 / 2000.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
        let r = ks_two_sample(&a, &b);
        assert!((r.statistic - 0.2).abs() < 1e-3);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn kolmogorov_reference_points() {
        // classical 5% and 1% critical values
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
    }

    #[test]
    fn critical_values() {
        assert!((normal_critical(0.95) - 1.959_963_985).abs() < 1e-6);
        assert!((student_critical(0.95, 3.0) - 3.182_446_305).abs() < 1e-5);
    }
}
