//! Sample quantiles, distribution quantiles, and distribution distances.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::scalar::Scalar;

/// Type-7 (linear interpolation) quantile of an ascending sample.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = T::lit(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Type-7 quantile of an unsorted sample.
pub fn quantile<T: Scalar>(sample: &[T], p: f64) -> T {
    let mut s = sample.to_vec();
    sort_floats(&mut s);
    quantile_sorted(&s, p)
}

pub fn sort_floats<T: Scalar>(v: &mut [T]) {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
}

pub fn mean<T: Scalar>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_count(v.len())
}

/// Sample variance with divisor `n - 1`.
pub fn sample_variance<T: Scalar>(v: &[T]) -> T {
    let m = mean(v);
    v.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_count(v.len() - 1)
}

/// Two-sample Kolmogorov-Smirnov distance `sup |F_a - F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    sort_floats(&mut a);
    sort_floats(&mut b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Upper-tail critical value of chi-square with `k` degrees of freedom.
pub fn chi2_critical(k: usize, alpha: f64) -> f64 {
    ChiSquared::new(k as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let s = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 5.0);
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert!((quantile_sorted(&s, 0.1) - 1.4).abs() < 1e-12);
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.25), 1.5);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_distance(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_distance(&[1.0, 2.0, 3.0, 4.0], &[2.5]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn distribution_quantiles() {
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((chi2_critical(1, 0.05) - 3.841_458_820_694_124).abs() < 1e-6);
        assert!((chi2_critical(3, 0.05) - 7.814_727_903_251_178).abs() < 1e-6);
    }

    #[test]
    fn variance() {
        assert!((sample_variance(&[1.0f64, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-15);
    }
}
