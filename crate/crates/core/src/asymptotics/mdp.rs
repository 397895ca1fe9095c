//! Empirical moderate-deviation tail rates.
//!
//! With `λ(t) = t^α`, `0 < α < ½`, and `Y_t = (√t/λ(t))(e_p(t) − e_p)`, the
//! empirical rate at threshold `x` is `−λ(t)⁻² log P̂(|Y_t| ≥ x)` with
//! add-one smoothing `P̂ = (count + 1)/(n + 1)`. It is paired with the
//! Gaussian rate `x²/(2σ̂²)` where `σ̂²` comes from the same ensemble.

use serde::{Deserialize, Serialize};

use super::{centering_rate, mean_and_variance, simulate_ep_values, EnsembleConfig, REVERSIBLE_NOTE};
use crate::error::{Error, Result};
use crate::model::OUModel;

pub const INSUFFICIENT_EVENTS: &str = "insufficient events";

/// Thresholds either in absolute units of `Y_t` or as multiples of `σ̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Thresholds {
    Absolute(Vec<f64>),
    SigmaMultiples(Vec<f64>),
}

impl Thresholds {
    fn raw(&self) -> &[f64] {
        match self {
            Thresholds::Absolute(v) | Thresholds::SigmaMultiples(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpConfig {
    pub lambda_exponent: f64,
    pub thresholds: Thresholds,
    pub ensemble: EnsembleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpProfile {
    pub lambda_exponent: f64,
    pub lambda: f64,
    pub t: f64,
    pub n_paths: usize,
    pub sigma2_hat: f64,
    pub thresholds: Vec<f64>,
    pub tail_counts: Vec<usize>,
    pub empirical_rates: Vec<f64>,
    pub theoretical_rates: Vec<f64>,
    pub flags: Vec<Option<String>>,
    pub note: Option<String>,
}

impl MdpProfile {
    /// Empirical rates nondecreasing along increasing thresholds, ignoring flagged entries.
    pub fn unflagged_monotone(&self) -> bool {
        let mut order: Vec<usize> = (0..self.thresholds.len()).collect();
        order.sort_by(|&a, &b| self.thresholds[a].total_cmp(&self.thresholds[b]));
        let rates: Vec<f64> = order
            .into_iter()
            .filter(|&i| self.flags[i].is_none())
            .map(|i| self.empirical_rates[i])
            .collect();
        rates.windows(2).all(|w| w[1] >= w[0])
    }

    /// `empirical / theoretical` for each unflagged threshold.
    pub fn rate_ratios(&self) -> Vec<Option<f64>> {
        self.empirical_rates
            .iter()
            .zip(&self.theoretical_rates)
            .zip(&self.flags)
            .map(|((e, th), f)| f.is_none().then(|| e / th))
            .collect()
    }
}

/// Tail profile of `Y_t` over one ensemble.
pub fn mdp_tail_profile(model: &OUModel, cfg: &MdpConfig) -> Result<MdpProfile> {
    let alpha = cfg.lambda_exponent;
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "lambda exponent must lie in (0, 1/2), got {alpha}"
        )));
    }
    let raw = cfg.thresholds.raw();
    if raw.is_empty() || raw.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter("thresholds must be positive and finite".into()));
    }
    let ens = &cfg.ensemble;
    if ens.n_paths < 1 {
        return Err(Error::InvalidParameter("n_paths must be positive".into()));
    }
    ens.initial_law.validate(model.dim())?;
    let t = ens.t;
    let lambda = t.powf(alpha);
    let n = ens.n_paths;

    let (y, sigma2_hat, note) = if model.reversible() {
        (vec![0.0; n], 0.0, Some(REVERSIBLE_NOTE.to_string()))
    } else {
        let eps = simulate_ep_values(model, ens)?;
        let e_p = centering_rate(model);
        let scale = t.sqrt() / lambda;
        let z: Vec<f64> = eps.iter().map(|e| t.sqrt() * (e - e_p)).collect();
        let (_, s2) = mean_and_variance(&z);
        (eps.iter().map(|e| scale * (e - e_p)).collect(), s2, None)
    };

    let thresholds: Vec<f64> = match &cfg.thresholds {
        Thresholds::Absolute(v) => v.clone(),
        Thresholds::SigmaMultiples(v) if sigma2_hat > 0.0 => {
            v.iter().map(|k| k * sigma2_hat.sqrt()).collect()
        }
        // degenerate σ̂ = 0: report the multiples themselves
        Thresholds::SigmaMultiples(v) => v.clone(),
    };

    let mut tail_counts = Vec::with_capacity(thresholds.len());
    let mut empirical_rates = Vec::with_capacity(thresholds.len());
    let mut theoretical_rates = Vec::with_capacity(thresholds.len());
    let mut flags = Vec::with_capacity(thresholds.len());
    for &x in &thresholds {
        let count = y.iter().filter(|v| v.abs() >= x).count();
        let p_hat = (count as f64 + 1.0) / (n as f64 + 1.0);
        tail_counts.push(count);
        empirical_rates.push(-p_hat.ln() / (lambda * lambda));
        theoretical_rates.push(if sigma2_hat > 0.0 {
            x * x / (2.0 * sigma2_hat)
        } else {
            f64::INFINITY
        });
        flags.push((count == 0).then(|| INSUFFICIENT_EVENTS.to_string()));
    }

    Ok(MdpProfile {
        lambda_exponent: alpha,
        lambda,
        t,
        n_paths: n,
        sigma2_hat,
        thresholds,
        tail_counts,
        empirical_rates,
        theoretical_rates,
        flags,
        note,
    })
}
