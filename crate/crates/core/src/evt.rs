//! Centering and scaling of Gaussian maxima, limit laws and goodness-of-fit
//! statistics.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gaussian::Sampler;

/// `b_N = sqrt(g0) [sqrt(2 log N) - (log log N + log 4 pi) / (2 sqrt(2 log N))]`,
/// `a_N = g0 / b_N`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingConstants {
    pub a: f64,
    pub b: f64,
    pub n: f64,
    pub g0: f64,
}

pub fn scaling_constants(g0: f64, n: f64) -> Result<ScalingConstants> {
    if !(n >= 3.0) {
        return Err(Error::Range(format!("scaling needs N >= 3 (got {n})")));
    }
    if !(g0 > 0.0) || !g0.is_finite() {
        return Err(Error::InvalidParameter(format!("g0 must be positive (got {g0})")));
    }
    let l = libm::log(n);
    let s = libm::sqrt(2.0 * l);
    let b = libm::sqrt(g0) * (s - (libm::log(l) + libm::log(4.0 * core::f64::consts::PI)) / (2.0 * s));
    Ok(ScalingConstants { a: g0 / b, b, n, g0 })
}

impl ScalingConstants {
    /// `u_N(z) = b_N + a_N z`.
    pub fn level(&self, z: f64) -> f64 {
        self.b + self.a * z
    }

    /// `(x - b_N) / a_N`.
    pub fn rescale(&self, x: f64) -> f64 {
        (x - self.b) / self.a
    }
}

pub fn gumbel_cdf(z: f64) -> f64 {
    libm::exp(-libm::exp(-z))
}

/// `exp(-e^{-z + d log(1 - 2 delta)})`, the law of the bulk maximum rescaled
/// with the box constants.
pub fn limit_cdf(z: f64, delta: f64, d: usize) -> f64 {
    libm::exp(-libm::exp(-z + d as f64 * libm::log(1.0 - 2.0 * delta)))
}

/// Exact Kolmogorov statistic `sup |F_hat - F|`.
pub fn ks_distance(sample: &[f64], cdf: &dyn Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let f = cdf(xi);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Cramer-von Mises statistic `1/(12n) + sum (F(x_(i)) - (2i-1)/(2n))^2`.
pub fn cramer_von_mises(sample: &[f64], cdf: &dyn Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let s: f64 = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let t = cdf(xi) - (2.0 * i as f64 + 1.0) / (2.0 * n);
            t * t
        })
        .sum();
    Ok(1.0 / (12.0 * n) + s)
}

/// Which sites enter the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MaximaMode {
    Full,
    Bulk,
}

/// Scaled maxima of independent replicates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaximaSample {
    pub z: Vec<f64>,
    pub mode: MaximaMode,
    pub seed: u64,
    pub sites: usize,
    pub scaling: ScalingConstants,
}

/// Largest value over `sites`.
pub fn max_over(values: &[f64], sites: &[usize]) -> f64 {
    sites.iter().map(|&i| values[i]).fold(f64::NEG_INFINITY, f64::max)
}

/// Scaled maximum of one replicate; `buf` must have the sampler's length.
pub fn replicate_maximum(
    sampler: &Sampler,
    sites: &[usize],
    scaling: &ScalingConstants,
    seed: u64,
    replicate: u64,
    buf: &mut [f64],
) -> f64 {
    sampler.sample_into(seed, replicate, buf);
    scaling.rescale(max_over(buf, sites))
}

/// Sequential driver: replicate `r` uses stream `(seed, r)`.
pub fn simulate_maxima(
    sampler: &Sampler,
    sites: &[usize],
    mode: MaximaMode,
    replicates: usize,
    seed: u64,
    scaling: ScalingConstants,
) -> Result<MaximaSample> {
    if sites.is_empty() {
        return Err(Error::InvalidParameter("no sites selected".into()));
    }
    let mut buf = alloc::vec![0.0; sampler.n()];
    let z = (0..replicates as u64).map(|r| replicate_maximum(sampler, sites, &scaling, seed, r, &mut buf)).collect();
    Ok(MaximaSample { z, mode, seed, sites: sites.len(), scaling })
}

/// Empirical quantiles against the reference at levels `probs`.
pub fn quantile_table(sample: &[f64], probs: &[f64], reference_quantile: &dyn Fn(f64) -> f64) -> Vec<(f64, f64, f64)> {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    probs
        .iter()
        .map(|&p| {
            let k = ((p * x.len() as f64).ceil() as usize).clamp(1, x.len()) - 1;
            (p, x[k], reference_quantile(p))
        })
        .collect()
}

/// Inverse of `limit_cdf`.
pub fn limit_quantile(p: f64, delta: f64, d: usize) -> f64 {
    -libm::log(-libm::log(p)) + d as f64 * libm::log(1.0 - 2.0 * delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    #[test]
    fn constants_by_direct_evaluation() {
        let s = scaling_constants(1.0, libm::exp(10.0)).unwrap();
        // direct evaluation gives 3.93172; the quoted four-digit value 3.9316 is truncated
        assert!((s.b - 3.931722).abs() < 1e-6, "{}", s.b);
        assert!((s.b - 3.9316).abs() < 2e-4);
        assert!((s.a - 0.2543).abs() < 5e-5);
        let t = scaling_constants(1.0, 1e6).unwrap();
        assert!((t.b - 4.7660).abs() < 5e-5, "{}", t.b);
        assert!((t.a - 0.2098).abs() < 5e-5);
        let four = scaling_constants(4.0, 1e6).unwrap();
        assert_eq!(four.b, 2.0 * t.b);
        assert_eq!(four.a, 4.0 / four.b);
        assert!(scaling_constants(1.0, 2.0).is_err());
    }

    #[test]
    fn limit_law_values() {
        assert!((limit_cdf(0.0, 0.0, 3) - libm::exp(-1.0)).abs() < 1e-15);
        assert!((limit_cdf(0.0, 0.1, 2) - 0.5272924).abs() < 1e-7);
        assert!(limit_cdf(60.0, 0.2, 2) > 1.0 - 1e-12);
        let q = limit_quantile(0.3, 0.1, 2);
        assert!((limit_cdf(q, 0.1, 2) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn ks_trivial_cases() {
        assert_eq!(ks_distance(&[0.0], &|x| crate::special::norm_cdf(x)).unwrap(), 0.5);
        let d = ks_distance(&[10.0, 11.0], &|x| crate::special::norm_cdf(x)).unwrap();
        assert!(d > 0.99);
        assert!(ks_distance(&[], &|x| x).is_err());
    }

    #[test]
    fn white_noise_maxima_are_reproducible() {
        let s = Sampler::from_covariance(&DenseMatrix::identity(50)).unwrap();
        let sites: Vec<usize> = (0..50).collect();
        let sc = scaling_constants(1.0, 50.0).unwrap();
        let a = simulate_maxima(&s, &sites, MaximaMode::Full, 20, 5, sc).unwrap();
        let b = simulate_maxima(&s, &sites, MaximaMode::Full, 20, 5, sc).unwrap();
        assert_eq!(a, b);
    }
}
