//! Small sample statistics used by the Monte Carlo drivers.

use alloc::vec::Vec;

use crate::math;

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn sum(xs: &[f64]) -> f64 {
    let mut acc = NeumaierSum::default();
    for &x in xs {
        acc.add(x);
    }
    acc.total()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mu = mean(xs);
    let mut acc = NeumaierSum::default();
    for &x in xs {
        acc.add((x - mu) * (x - mu));
    }
    acc.total() / (xs.len() - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    math::sqrt(variance(xs))
}

pub fn std_error(xs: &[f64]) -> f64 {
    std_dev(xs) / math::sqrt(xs.len() as f64)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Midpoint median.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let v = sorted(xs);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Nearest-rank quantile: the `⌈qn⌉`-th smallest value, no interpolation.
pub fn nearest_rank_quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let v = sorted(xs);
    nearest_rank_sorted(&v, q)
}

pub fn nearest_rank_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = math::ceil(q * n as f64) as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Two-sample Kolmogorov–Smirnov distance `sup |F_a − F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
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

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * (1.0 + math::erf((x - mean) / (sd * core::f64::consts::SQRT_2)))
}

/// One-sample KS distance to `N(mean, sd²)`.
pub fn ks_normal(xs: &[f64], mean: f64, sd: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let v = sorted(xs);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = normal_cdf(x, mean, sd);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// KS distance to the normal with the sample's own mean and deviation.
pub fn ks_fitted_normal(xs: &[f64]) -> f64 {
    ks_normal(xs, mean(xs), std_dev(xs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nearest_rank_examples() {
        let xs = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(nearest_rank_quantile(&xs, 0.5), 3.0);
        assert_eq!(nearest_rank_quantile(&xs, 0.95), 5.0);
        assert_eq!(nearest_rank_quantile(&xs, 0.2), 1.0);
        assert_eq!(nearest_rank_quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.0);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum(&xs), 2.0);
    }

    #[test]
    fn ks_distances() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.5]) - 0.5).abs() < 1e-15);
        assert!((ks_normal(&[0.0], 0.0, 1.0) - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn ks_is_symmetric_and_bounded(a in prop::collection::vec(-5.0f64..5.0, 1..40),
                                       b in prop::collection::vec(-5.0f64..5.0, 1..40)) {
            let d = ks_two_sample(&a, &b);
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(d, ks_two_sample(&b, &a));
        }

        #[test]
        fn quantile_is_a_sample_value(xs in prop::collection::vec(-1e3f64..1e3, 1..50), q in 0.0f64..1.0) {
            let v = nearest_rank_quantile(&xs, q);
            prop_assert!(xs.contains(&v));
            let below = xs.iter().filter(|&&x| x <= v).count() as f64;
            prop_assert!(below >= q * xs.len() as f64);
        }
    }
}
