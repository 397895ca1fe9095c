//! One-sample Kolmogorov–Smirnov test against a centered normal law.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Minimum sample size accepted by [`ks_test_gaussian`].
pub const KS_MIN_SAMPLES: usize = 50;

/// `(D_n, p)` for the hypothesis that `samples` are i.i.d. `N(0, sigma2)`.
///
/// The p-value uses the asymptotic Kolmogorov distribution of `√n·D_n`.
pub fn ks_test_gaussian(samples: &[f64], sigma2: f64) -> Result<(f64, f64)> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "KS test needs at least {KS_MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "KS reference variance must be positive, got {sigma2}"
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let normal = Normal::new(0.0, sigma2.sqrt()).expect("valid normal");
    let stat = ks_statistic(samples, |x| normal.cdf(x));
    let n = samples.len() as f64;
    Ok((stat, kolmogorov_survival(n.sqrt() * stat)))
}

/// `sup_x |F_n(x) − F(x)|` for a continuous reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let f = cdf(x);
        let above = (i as f64 + 1.0) / n - f;
        let below = f - i as f64 / n;
        acc.max(above).max(below)
    })
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K ≤ λ) = √(2π)/λ Σ_{k≥1} exp(−(2k−1)²π²/(8λ²))
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            let term = (-j * j * c).exp();
            s += term;
            if term < 1e-300 {
                break;
            }
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        // P(K > λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²)
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}
