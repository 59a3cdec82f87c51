//! Large-population law of a single ancestor's stationary weight: an atom
//! at zero plus an exponential part, with unit mean.
//!
//! With `m` parents the atom has mass `1/m` and the exponential part has
//! mean `m/(m-1)`, so `E[X^k] = k! (m/(m-1))^(k-1)`. For `m = 2` this is the
//! density `δ0/2 + e^(-t/2)/4` with moments `2^(k-1) k!`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LimitLawError {
    #[error("parent count must be at least 2, got {0}")]
    TooFewParents(u32),
    #[error("no samples")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureLaw {
    parent_count: u32,
}

impl MixtureLaw {
    pub fn new(parent_count: u32) -> Result<Self, LimitLawError> {
        if parent_count < 2 {
            return Err(LimitLawError::TooFewParents(parent_count));
        }
        Ok(MixtureLaw { parent_count })
    }

    pub fn parent_count(&self) -> u32 {
        self.parent_count
    }

    /// `P(X = 0)`.
    pub fn atom_weight(&self) -> f64 {
        1.0 / f64::from(self.parent_count)
    }

    pub fn continuous_weight(&self) -> f64 {
        1.0 - self.atom_weight()
    }

    /// Mean of the exponential part.
    pub fn exponential_mean(&self) -> f64 {
        let m = f64::from(self.parent_count);
        m / (m - 1.0)
    }

    /// Density of the continuous part (integrates to `continuous_weight`).
    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let mean = self.exponential_mean();
        self.continuous_weight() * (-t / mean).exp() / mean
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        self.atom_weight() + self.continuous_weight() * (-(-t / self.exponential_mean()).exp_m1())
    }

    /// Left limit `P(X < t)`.
    pub fn cdf_left(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            self.cdf(t)
        }
    }

    /// Smallest `t` with `cdf(t) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= self.atom_weight() {
            return 0.0;
        }
        let tail = (1.0 - p) / self.continuous_weight();
        -self.exponential_mean() * tail.ln()
    }

    /// `E[X^k]` exactly.
    pub fn moment(&self, k: u32) -> BigRational {
        if k == 0 {
            return BigRational::one();
        }
        let m = BigInt::from(self.parent_count);
        let ratio = BigRational::new(m.clone(), m - 1);
        let factorial: BigInt = (1..=u64::from(k)).map(BigInt::from).product();
        BigRational::from_integer(factorial) * ratio.pow(k as i32 - 1)
    }

    pub fn moment_f64(&self, k: u32) -> f64 {
        self.moment(k).to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random::<f64>() < self.atom_weight() {
            0.0
        } else {
            let u: f64 = rng.random();
            -self.exponential_mean() * (-u).ln_1p()
        }
    }

    /// `sup_t |F_n(t) - F(t)|`, comparing left and right limits at every
    /// sample point and at the atom.
    pub fn ks_distance(&self, samples: &[f64]) -> Result<f64, LimitLawError> {
        if samples.is_empty() {
            return Err(LimitLawError::Empty);
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let below_zero = sorted.partition_point(|&x| x < 0.0) as f64;
        let at_most_zero = sorted.partition_point(|&x| x <= 0.0) as f64;
        let mut d = (below_zero / n).max((at_most_zero / n - self.atom_weight()).abs());
        let mut i = 0;
        while i < sorted.len() {
            let x = sorted[i];
            let mut j = i;
            while j < sorted.len() && sorted[j] == x {
                j += 1;
            }
            let left = i as f64 / n;
            let right = j as f64 / n;
            d = d
                .max((left - self.cdf_left(x)).abs())
                .max((right - self.cdf(x)).abs());
            i = j;
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelRng;
    use rand::SeedableRng;

    fn law(m: u32) -> MixtureLaw {
        MixtureLaw::new(m).unwrap()
    }

    #[test]
    fn cdf_values() {
        assert_eq!(law(2).cdf(0.0), 0.5);
        assert_eq!(law(2).cdf(-1e-9), 0.0);
        assert!((law(2).cdf(2.0 * std::f64::consts::LN_2) - 0.75).abs() < 1e-15);
        for m in 2..6 {
            assert!((law(m).cdf(1e4) - 1.0).abs() < 1e-15);
            assert_eq!(law(m).cdf(0.0), 1.0 / f64::from(m));
        }
    }

    #[test]
    fn cdf_monotone_and_quantile_inverse() {
        for m in 2..5 {
            let l = law(m);
            let mut prev = 0.0;
            for i in 0..2000 {
                let t = i as f64 * 0.01 - 1.0;
                let f = l.cdf(t);
                assert!(f >= prev);
                prev = f;
            }
            for p in [0.6, 0.75, 0.9, 0.999] {
                assert!((l.cdf(l.quantile(p)) - p).abs() < 1e-12);
            }
            assert_eq!(l.quantile(l.atom_weight()), 0.0);
        }
    }

    #[test]
    fn exact_moments() {
        let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        assert_eq!(law(2).moment(0), q(1, 1));
        assert_eq!(law(2).moment(1), q(1, 1));
        assert_eq!(law(2).moment(2), q(4, 1));
        assert_eq!(law(2).moment(3), q(24, 1));
        assert_eq!(law(3).moment(1), q(1, 1));
        assert_eq!(law(3).moment(2), q(3, 1));
        assert_eq!(law(3).moment(3), q(27, 2));
    }

    #[test]
    fn moments_match_quadrature() {
        // composite Simpson on the continuous part
        for m in [2u32, 3, 5] {
            let l = law(m);
            for k in 1..=10u32 {
                let upper = 60.0 * l.exponential_mean() + 40.0 * f64::from(k);
                let steps = 200_000;
                let h = upper / steps as f64;
                let f = |t: f64| t.powi(k as i32) * l.density(t);
                let mut acc = f(0.0) + f(upper);
                for i in 1..steps {
                    let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                    acc += w * f(i as f64 * h);
                }
                let integral = acc * h / 3.0;
                let exact = l.moment_f64(k);
                assert!(((integral - exact) / exact).abs() < 1e-9, "m={m} k={k}: {integral} vs {exact}");
            }
        }
    }

    #[test]
    fn sampling_matches_atom_and_moments() {
        let mut rng = ModelRng::seed_from_u64(11);
        let n = 1_000_000;
        let l = law(2);
        let xs: Vec<f64> = (0..n).map(|_| l.sample(&mut rng)).collect();
        let nf = n as f64;
        let zeros = xs.iter().filter(|&&x| x == 0.0).count() as f64 / nf;
        assert!((zeros - 0.5).abs() <= 3.0 * (0.25 / nf).sqrt());
        let mean = xs.iter().sum::<f64>() / nf;
        let var1 = l.moment_f64(2) - 1.0;
        assert!((mean - 1.0).abs() <= 3.0 * (var1 / nf).sqrt());
        let second = xs.iter().map(|x| x * x).sum::<f64>() / nf;
        let var2 = l.moment_f64(4) - 16.0;
        assert!((second - 4.0).abs() <= 3.0 * (var2 / nf).sqrt());

        let l3 = law(3);
        let mean3 = (0..n).map(|_| l3.sample(&mut rng)).sum::<f64>() / nf;
        assert!((mean3 - 1.0).abs() <= 3.0 * ((l3.moment_f64(2) - 1.0) / nf).sqrt());
    }

    #[test]
    fn ks_special_cases() {
        assert_eq!(law(2).ks_distance(&[]), Err(LimitLawError::Empty));
        for m in 2..6 {
            let d = law(m).ks_distance(&[0.0; 10]).unwrap();
            assert!((d - (1.0 - 1.0 / f64::from(m))).abs() < 1e-15);
        }
        let l = law(2);
        let n = 1000;
        let quantiles: Vec<f64> = (1..=n).map(|i| l.quantile((i as f64 - 0.5) / n as f64)).collect();
        assert!(l.ks_distance(&quantiles).unwrap() <= 1.0 / (2.0 * n as f64) + 1e-12);
    }

    #[test]
    fn ks_of_own_samples_is_small() {
        let l = law(2);
        let mut rng = ModelRng::seed_from_u64(5);
        let xs: Vec<f64> = (0..100_000).map(|_| l.sample(&mut rng)).collect();
        assert!(l.ks_distance(&xs).unwrap() < 0.01);
    }
}
