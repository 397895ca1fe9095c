//! Desk-scale statistical harness for the fluctuations of the sample
//! entropy production rate `e_p(t) = A_t / t`:
//!
//! * Gaussian fluctuations of `√t (e_p(t) − e_p)` ([`run_ensemble`], [`estimate_sigma2`]);
//! * moderate-deviation tails at scale `λ(t) = t^α` ([`mdp_tail_profile`]);
//! * the iterated-logarithm statistic along one long path ([`lil_running_statistic`]);
//! * deterministic L² decay and exponential integrability checks ([`semigroup_decay_check`],
//!   [`exp_integrability_check`]).
//!
//! The asymptotic variance has no closed form; every normalized quantity
//! uses the empirical `σ̂²` of the ensemble it was computed from.

mod checks;
mod ks;
mod lil;
mod mdp;

use serde::{Deserialize, Serialize};

pub use checks::{
    exp_integrability_check, semigroup_decay_check, DecayRow, ExpIntegrabilityReport,
    EXP_STABILITY_TOL,
};
pub use ks::{kolmogorov_survival, ks_statistic, ks_test_gaussian, KS_MIN_SAMPLES};
pub use lil::{lil_running_statistic, LilTrace};
pub use mdp::{mdp_tail_profile, MdpConfig, MdpProfile, Thresholds, INSUFFICIENT_EVENTS};

use crate::error::{Error, Result};
use crate::model::{InitialLaw, OUModel};
use crate::parallel;
use crate::simulate::{derive_seed, em_path_from_law, RngStream};

/// Report string used whenever the model is reversible and every statistic is identically zero.
pub const REVERSIBLE_NOTE: &str = "reversible: EPR identically zero";

/// Minimum ensemble size for the CLT harness.
pub const MIN_PATHS: usize = 100;

/// Closed-form rate used to center statistics; exactly 0 for reversible models.
pub fn centering_rate(model: &OUModel) -> f64 {
    if model.reversible() {
        0.0
    } else {
        model.entropy_production_rate()
    }
}

/// Ensemble of normalized deviations `Z_i = √t (e_p^{(i)}(t) − e_p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_paths: usize,
    pub t: f64,
    pub dt: f64,
    pub initial_law: InitialLaw,
    pub e_p: f64,
    pub z_samples: Vec<f64>,
    pub mean_z: f64,
    /// Unbiased sample variance of `Z`.
    pub sigma2_hat: f64,
    /// Against `N(0, sigma2_hat)`.
    pub ks_stat: f64,
    pub ks_pvalue: f64,
    /// Mean of `e_p(t)` over paths and its standard error.
    pub mean_ep_t: f64,
    pub se_ep_t: f64,
    /// Set when the statistics are degenerate (reversible model).
    pub degenerate: Option<String>,
}

impl EnsembleStats {
    /// `|mean e_p(t) − e_p| / SE`; zero for degenerate ensembles.
    pub fn mean_deviation_in_se(&self) -> f64 {
        if self.se_ep_t > 0.0 {
            (self.mean_ep_t - self.e_p).abs() / self.se_ep_t
        } else {
            0.0
        }
    }
}

/// Ensemble configuration shared by the CLT and MDP harnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub initial_law: InitialLaw,
    pub n_paths: usize,
    pub t: f64,
    pub dt: f64,
    pub master_seed: u64,
}

pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

fn check_horizon(model: &OUModel, t: f64) -> Result<()> {
    let relax = 10.0 / model.functional_constants().decay_rate;
    // tolerate rounding in the eigenvalue of Γ
    if !(t >= relax * (1.0 - 1e-9)) {
        return Err(Error::InvalidParameter(format!(
            "horizon t = {t} is below 10 relaxation times ({relax})"
        )));
    }
    Ok(())
}

/// Raw `e_p(t)` values of independent paths; path `i` uses stream `(master_seed, i)`.
pub fn simulate_ep_values(model: &OUModel, cfg: &EnsembleConfig) -> Result<Vec<f64>> {
    cfg.initial_law.validate(model.dim())?;
    parallel::map_indexed(cfg.n_paths, |i| {
        em_path_from_law(
            model,
            &cfg.initial_law,
            cfg.t,
            cfg.dt,
            RngStream::new(cfg.master_seed, i as u64),
        )
        .map(|s| s.ep_t)
    })
}

/// CLT ensemble: simulates `n_paths` independent paths to horizon `t` and
/// tests `Z` against `N(0, σ̂²)`.
pub fn run_ensemble(model: &OUModel, cfg: &EnsembleConfig) -> Result<EnsembleStats> {
    if cfg.n_paths < MIN_PATHS {
        return Err(Error::InvalidParameter(format!(
            "ensemble needs at least {MIN_PATHS} paths, got {}",
            cfg.n_paths
        )));
    }
    check_horizon(model, cfg.t)?;
    cfg.initial_law.validate(model.dim())?;
    let e_p = centering_rate(model);

    if model.reversible() {
        return Ok(EnsembleStats {
            n_paths: cfg.n_paths,
            t: cfg.t,
            dt: cfg.dt,
            initial_law: cfg.initial_law.clone(),
            e_p,
            z_samples: vec![0.0; cfg.n_paths],
            mean_z: 0.0,
            sigma2_hat: 0.0,
            ks_stat: 0.0,
            ks_pvalue: 1.0,
            mean_ep_t: 0.0,
            se_ep_t: 0.0,
            degenerate: Some(REVERSIBLE_NOTE.into()),
        });
    }

    let eps = simulate_ep_values(model, cfg)?;
    stats_from_ep(model, cfg, &eps)
}

pub(crate) fn stats_from_ep(
    model: &OUModel,
    cfg: &EnsembleConfig,
    eps: &[f64],
) -> Result<EnsembleStats> {
    let e_p = centering_rate(model);
    let root_t = cfg.t.sqrt();
    let z: Vec<f64> = eps.iter().map(|e| root_t * (e - e_p)).collect();
    let (mean_z, sigma2_hat) = mean_and_variance(&z);
    let (mean_ep_t, var_ep) = mean_and_variance(eps);
    let (ks_stat, ks_pvalue) = ks_test_gaussian(&z, sigma2_hat)?;
    Ok(EnsembleStats {
        n_paths: cfg.n_paths,
        t: cfg.t,
        dt: cfg.dt,
        initial_law: cfg.initial_law.clone(),
        e_p,
        z_samples: z,
        mean_z,
        sigma2_hat,
        ks_stat,
        ks_pvalue,
        mean_ep_t,
        se_ep_t: (var_ep / eps.len() as f64).sqrt(),
        degenerate: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigma2Point {
    pub t: f64,
    pub sigma2_hat: f64,
    pub n_paths: usize,
}

/// `σ̂²(t) = Var[√t (e_p(t) − e_p)]` along `t_grid`, stationary start.
///
/// Each grid point gets an independent sub-seed derived from `seed`.
pub fn estimate_sigma2(
    model: &OUModel,
    n_paths: usize,
    t_grid: &[f64],
    dt: f64,
    seed: u64,
) -> Result<Vec<Sigma2Point>> {
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("t_grid must be increasing".into()));
    }
    t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let cfg = EnsembleConfig {
                initial_law: InitialLaw::Stationary,
                n_paths,
                t,
                dt,
                master_seed: derive_seed(seed, k as u64),
            };
            let stats = run_ensemble(model, &cfg)?;
            Ok(Sigma2Point {
                t,
                sigma2_hat: stats.sigma2_hat,
                n_paths,
            })
        })
        .collect()
}
