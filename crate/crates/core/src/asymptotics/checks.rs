//! Deterministic L² decay check and Monte Carlo exponential-integrability check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::mat_exp;
use crate::model::OUModel;
use crate::parallel;
use crate::simulate::{sample_stationary, step_grid, ExactStepper, RngStream};

/// Maximum relative change of the MGF rate estimate when the ensemble is doubled.
pub const EXP_STABILITY_TOL: f64 = 0.2;

/// Multiplicative slack on the decay bound.
const DECAY_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub t: f64,
    /// `vᵀ e^{tB} Γ e^{tBᵀ} v`, the exact `∫ (P_t f)² dμ` for `f(x) = vᵀx`.
    pub lhs: f64,
    /// `e^{−decay_rate·t} vᵀΓv`
    pub bound: f64,
    pub pass: bool,
}

/// L² decay of the linear observable `f(x) = vᵀx` at each time in `t_grid`.
pub fn semigroup_decay_check(model: &OUModel, v: &[f64], t_grid: &[f64]) -> Result<Vec<DecayRow>> {
    let d = model.dim();
    if v.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidParameter("test direction v must be nonzero".into()));
    }
    let rate = model.functional_constants().decay_rate;
    let gamma = model.gamma();
    let var0 = gamma.quad_form(v);
    let bt = model.b().transpose();
    t_grid
        .iter()
        .map(|&t| {
            // w = e^{tBᵀ} v, so lhs = wᵀΓw
            let w = mat_exp(&bt, t)?.matvec(v);
            let lhs = gamma.quad_form(&w);
            let bound = (-rate * t).exp() * var0;
            Ok(DecayRow {
                t,
                lhs,
                bound,
                pass: lhs <= bound * (1.0 + DECAY_SLACK),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpIntegrabilityReport {
    pub eta: f64,
    pub t: f64,
    pub dt: f64,
    pub n_paths: usize,
    /// `(1/t) log Ê exp(η ∫₀ᵗ |ξ_s|² ds)` over `2·n_paths` paths.
    pub log_mgf_rate: f64,
    /// Same estimate over the first `n_paths` paths only.
    pub log_mgf_rate_half: f64,
    pub relative_change: f64,
    pub finite: bool,
    /// Closed-form bound; `None` when `η ≥ eta_max`.
    pub bound: Option<f64>,
    pub diagnostic: Option<String>,
}

impl ExpIntegrabilityReport {
    pub fn within_bound(&self) -> bool {
        self.bound.is_some_and(|b| self.log_mgf_rate <= b)
    }
}

fn log_mean_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + (s / xs.len() as f64).ln()
}

/// Monte Carlo estimate of the exponential moment rate from stationary
/// exact-transition paths; path `i` uses stream `(seed, i)`.
///
/// The estimate is declared finite when it is stable under doubling the
/// ensemble (relative change at most [`EXP_STABILITY_TOL`]).
pub fn exp_integrability_check(
    model: &OUModel,
    eta: f64,
    t: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<ExpIntegrabilityReport> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!("eta must be >= 0, got {eta}")));
    }
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be positive".into()));
    }
    let (n_steps, dt) = step_grid(t, dt)?;
    let bound = model.exp_integrability_bound(eta);
    if eta == 0.0 {
        return Ok(ExpIntegrabilityReport {
            eta,
            t,
            dt,
            n_paths,
            log_mgf_rate: 0.0,
            log_mgf_rate_half: 0.0,
            relative_change: 0.0,
            finite: true,
            bound,
            diagnostic: None,
        });
    }

    let stepper = ExactStepper::new(model, dt)?;
    let sq = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let exponents = parallel::map_indexed(2 * n_paths, |i| {
        let mut rng = RngStream::new(seed, i as u64).generator();
        let mut x = sample_stationary(model, &mut rng);
        let mut acc = 0.5 * sq(&x);
        for k in 1..=n_steps {
            x = stepper.step(&x, &mut rng);
            acc += if k == n_steps { 0.5 } else { 1.0 } * sq(&x);
        }
        Ok(eta * acc * dt)
    })?;

    let full = log_mean_exp(&exponents) / t;
    let half = log_mean_exp(&exponents[..n_paths]) / t;
    let relative_change = (full - half).abs() / full.abs().max(f64::MIN_POSITIVE);
    let mut diagnostic = None;
    let finite = if !full.is_finite() || !half.is_finite() {
        diagnostic = Some("overflow in exponential moment".to_string());
        false
    } else if relative_change > EXP_STABILITY_TOL {
        diagnostic = Some(format!(
            "estimate unstable under doubling: relative change {relative_change:.3}"
        ));
        false
    } else {
        true
    };

    Ok(ExpIntegrabilityReport {
        eta,
        t,
        dt,
        n_paths,
        log_mgf_rate: full,
        log_mgf_rate_half: half,
        relative_change,
        finite,
        bound,
        diagnostic,
    })
}
