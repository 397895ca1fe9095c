//! Iterated-logarithm statistic along one long stationary path.
//!
//! `S_t = A_t − t·e_p` is sampled at geometric checkpoints `t_k = γ^k` and
//! normalized as `R_{t_k} = S_{t_k} / √(2 t_k log log t_k)`.

use serde::{Deserialize, Serialize};

use super::centering_rate;
use crate::error::{Error, Result};
use crate::model::{InitialLaw, OUModel};
use crate::simulate::{em_integrate, initial_state, step_grid, RngStream};

/// Checkpoints start strictly above this time (`e²`, where `log log t = log 2`).
///
/// Below it the normalizer `√(2t log log t)` collapses towards zero and `R`
/// is dominated by the initial transient rather than the fluctuation scale.
pub const LIL_FIRST_CHECKPOINT: f64 = std::f64::consts::E * std::f64::consts::E;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilTrace {
    pub gamma_checkpoint: f64,
    pub t_max: f64,
    pub dt: f64,
    pub seed: u64,
    /// Exponents `k` of the checkpoints `γ^k`.
    pub ks: Vec<u32>,
    /// Checkpoint times, snapped to the integration grid.
    pub checkpoints: Vec<f64>,
    pub s_values: Vec<f64>,
    pub r_values: Vec<f64>,
    pub running_max: f64,
    pub running_min: f64,
    pub note: Option<String>,
}

impl LilTrace {
    /// `max_k |R_{t_k}|`
    pub fn max_abs(&self) -> f64 {
        self.running_max.abs().max(self.running_min.abs())
    }
}

/// Geometric checkpoints `(k, step index)` in `(LIL_FIRST_CHECKPOINT, t_max]`.
fn checkpoint_schedule(gamma: f64, t_max: f64, dt: f64, n_steps: u64) -> Vec<(u32, u64)> {
    let mut out: Vec<(u32, u64)> = Vec::new();
    let mut k = (LIL_FIRST_CHECKPOINT.ln() / gamma.ln()).floor() as u32;
    loop {
        let t = gamma.powi(k as i32);
        if t > t_max * (1.0 + 1e-12) {
            break;
        }
        if t > LIL_FIRST_CHECKPOINT {
            let step = ((t / dt).round() as u64).clamp(1, n_steps);
            if out.last().is_none_or(|&(_, s)| s < step) {
                out.push((k, step));
            }
        }
        k += 1;
    }
    out
}

/// Runs one stationary path to `t_max` on stream `(seed, 0)` and records `R`
/// at every checkpoint.
pub fn lil_running_statistic(
    model: &OUModel,
    gamma_checkpoint: f64,
    t_max: f64,
    dt: f64,
    seed: u64,
) -> Result<LilTrace> {
    if !(t_max > LIL_FIRST_CHECKPOINT) || !t_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "t_max must exceed e^2, got {t_max}"
        )));
    }
    if !(gamma_checkpoint > 1.0 && gamma_checkpoint <= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "checkpoint ratio must lie in (1, 2], got {gamma_checkpoint}"
        )));
    }
    let (n_steps, dt_eff) = step_grid(t_max, dt)?;
    let schedule = checkpoint_schedule(gamma_checkpoint, t_max, dt_eff, n_steps);
    let e_p = centering_rate(model);

    let mut trace = LilTrace {
        gamma_checkpoint,
        t_max,
        dt: dt_eff,
        seed,
        ks: schedule.iter().map(|&(k, _)| k).collect(),
        checkpoints: schedule.iter().map(|&(_, s)| s as f64 * dt_eff).collect(),
        s_values: Vec::with_capacity(schedule.len()),
        r_values: Vec::with_capacity(schedule.len()),
        running_max: f64::NEG_INFINITY,
        running_min: f64::INFINITY,
        note: None,
    };

    if model.reversible() {
        trace.s_values = vec![0.0; schedule.len()];
        trace.r_values = vec![0.0; schedule.len()];
        trace.running_max = 0.0;
        trace.running_min = 0.0;
        trace.note = Some(super::REVERSIBLE_NOTE.into());
        return Ok(trace);
    }

    let stream = RngStream::new(seed, 0);
    let x0 = initial_state(model, &InitialLaw::Stationary, stream)?;

    let mut next = 0usize;
    em_integrate(model, &x0, t_max, dt_eff, stream, |st| {
        if next < schedule.len() && st.step == schedule[next].1 {
            let t = st.t;
            let s = st.a_t() - t * e_p;
            let r = s / (2.0 * t * t.ln().ln()).sqrt();
            trace.s_values.push(s);
            trace.r_values.push(r);
            trace.running_max = trace.running_max.max(r);
            trace.running_min = trace.running_min.min(r);
            next += 1;
        }
    })?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{build_model, Matrix};

    #[test]
    fn schedule_is_geometric_and_above_threshold() {
        let s = checkpoint_schedule(1.05, 1e4, 1e-3, 10_000_000);
        assert!(!s.is_empty());
        for w in s.windows(2) {
            assert_eq!(w[1].0, w[0].0 + 1);
            assert!(w[1].1 > w[0].1);
        }
        assert!(s[0].1 as f64 * 1e-3 > LIL_FIRST_CHECKPOINT);
        assert!(1.05f64.powi(s[0].0 as i32 - 1) <= LIL_FIRST_CHECKPOINT);
        assert!((s.last().unwrap().1 as f64) * 1e-3 <= 1e4);
    }

    #[test]
    fn reversible_is_zero() {
        let b = Matrix::from_rows(&[[-2.0, 0.5], [0.5, -1.0]]).unwrap();
        let m = build_model(&b, &Matrix::identity(2)).unwrap();
        let tr = lil_running_statistic(&m, 1.5, 50.0, 1e-2, 1).unwrap();
        assert!(!tr.r_values.is_empty());
        assert!(tr.r_values.iter().all(|&r| r == 0.0));
        assert_eq!(tr.running_max, 0.0);
    }

    #[test]
    fn extremes_and_determinism() {
        let b = Matrix::from_rows(&[[-1.0, 1.0], [-1.0, -1.0]]).unwrap();
        let m = build_model(&b, &Matrix::identity(2)).unwrap();
        let a = lil_running_statistic(&m, 1.2, 200.0, 1e-2, 4).unwrap();
        let b2 = lil_running_statistic(&m, 1.2, 200.0, 1e-2, 4).unwrap();
        assert_eq!(a, b2);
        let max = a.r_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = a.r_values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(a.running_max, max);
        assert_eq!(a.running_min, min);
        assert_eq!(a.r_values.len(), a.checkpoints.len());
        assert!(a.checkpoints.iter().all(|&t| t > std::f64::consts::E));
    }

    #[test]
    fn preconditions() {
        let b = Matrix::from_rows(&[[-1.0, 1.0], [-1.0, -1.0]]).unwrap();
        let m = build_model(&b, &Matrix::identity(2)).unwrap();
        assert!(lil_running_statistic(&m, 1.05, 7.0, 1e-2, 1).is_err());
        assert!(lil_running_statistic(&m, 1.0, 100.0, 1e-2, 1).is_err());
        assert!(lil_running_statistic(&m, 2.5, 100.0, 1e-2, 1).is_err());
    }
}
