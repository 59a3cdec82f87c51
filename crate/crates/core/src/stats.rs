//! Small statistical helpers for the simulation gates.

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Two-sided standard normal quantile `z` with `P(|Z| <= z) = level`.
pub fn normal_two_sided(level: f64) -> f64 {
    let n = Normal::standard();
    n.inverse_cdf(0.5 + level / 2.0)
}

/// Two-sided p-value of a standard normal statistic.
pub fn normal_p_value(z: f64) -> f64 {
    let n = Normal::standard();
    2.0 * (1.0 - n.cdf(z.abs()))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Mean with a normal-theory confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub level: f64,
    pub low: f64,
    pub high: f64,
}

impl Estimate {
    pub fn of_mean(xs: &[f64], level: f64) -> Self {
        let value = mean(xs);
        let std_error = if xs.len() > 1 {
            (variance(xs) / xs.len() as f64).sqrt()
        } else {
            0.0
        };
        let z = normal_two_sided(level);
        Estimate {
            value,
            std_error,
            level,
            low: value - z * std_error,
            high: value + z * std_error,
        }
    }

    pub fn covers(&self, target: f64) -> bool {
        self.low <= target && target <= self.high
    }

    /// Two-sided p-value of `target` under the normal approximation.
    pub fn p_value(&self, target: f64) -> f64 {
        if self.std_error == 0.0 {
            return if self.value == target { 1.0 } else { 0.0 };
        }
        normal_p_value((self.value - target) / self.std_error)
    }
}

/// Percentile bootstrap interval for the mean of `xs`.
pub fn bootstrap_mean_ci<R: Rng + ?Sized>(xs: &[f64], level: f64, resamples: usize, rng: &mut R) -> (f64, f64) {
    let n = xs.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| xs[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let pick = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (pick(alpha), pick(1.0 - alpha))
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // theta-function form converges fast for small x
        let mut cdf = 0.0;
        for j in 1..=20 {
            let odd = (2 * j - 1) as f64;
            cdf += (-odd * odd * std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / x;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction). Ties are handled by stepping over
/// equal values together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsTest {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    KsTest {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Pearson goodness of fit of `counts` against equal cell probabilities.
pub fn chi_square_uniform(counts: &[u64]) -> ChiSquareTest {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dof = counts.len() as f64 - 1.0;
    let dist = ChiSquared::new(dof).expect("positive degrees of freedom");
    ChiSquareTest {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelRng;
    use rand::SeedableRng;

    #[test]
    fn quantiles() {
        assert!((normal_two_sided(0.95) - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((normal_two_sided(0.99) - 2.575_829_303_548_901).abs() < 1e-9);
        assert!((normal_p_value(1.959_963_984_540_054) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn kolmogorov_reference_points() {
        // classical critical values: P(K > 1.3581) = 0.05, P(K > 1.9495) = 0.001
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.9495) - 0.001).abs() < 1e-5);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        // both series agree where they meet
        let lo = kolmogorov_survival(1.0 - 1e-12);
        assert!((lo - kolmogorov_survival(1.0)).abs() < 1e-9);
        assert!((kolmogorov_survival(0.5) - 0.963_945_243_664_307_8).abs() < 1e-9);
    }

    #[test]
    fn ks_two_sample_same_and_shifted() {
        let mut rng = ModelRng::seed_from_u64(3);
        let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_two_sample(&a, &b).p_value > 0.001);
        let c: Vec<f64> = b.iter().map(|x| x + 0.2).collect();
        assert!(ks_two_sample(&a, &c).p_value < 1e-6);
        let t = ks_two_sample(&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]);
        assert_eq!(t.statistic, 0.0);
    }

    #[test]
    fn chi_square_flat_counts() {
        let t = chi_square_uniform(&[100, 100, 100, 100]);
        assert_eq!(t.statistic, 0.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
        let skew = chi_square_uniform(&[200, 100, 100, 100]);
        assert!(skew.p_value < 1e-6);
    }

    #[test]
    fn estimate_interval() {
        let e = Estimate::of_mean(&[1.0, 1.0, 1.0], 0.99);
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
        assert!(e.covers(1.0));
        let mut rng = ModelRng::seed_from_u64(1);
        let xs: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let (lo, hi) = bootstrap_mean_ci(&xs, 0.95, 400, &mut rng);
        assert!(lo < mean(&xs) && mean(&xs) < hi);
    }
}
