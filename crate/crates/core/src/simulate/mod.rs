//! Path generation and the pathwise entropy-production functional.
//!
//! Exact Gaussian transitions serve marginal and stationarity work.
//! Euler–Maruyama with shared Brownian increments advances the state
//! together with the Girsanov functional
//! `A_t = ∫ g(ξ)ᵀΣ dW + ½ ∫ g(ξ)ᵀQ g(ξ) ds`, `g(x) = Mx`, whose Itô
//! integral needs the increments that exact sampling does not expose.

mod rng;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use rng::{derive_seed, PathRng, RngStream, RNG_ALGORITHM};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, Matrix};
use crate::model::{InitialLaw, OUModel};

/// Upper bound on `dt · ‖B‖₂` accepted by the Euler–Maruyama integrator.
pub const EM_STABILITY_LIMIT: f64 = 0.1;

/// Terminal record of one simulated path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EprSample {
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub stream: u64,
    /// `M_t = ∫ (Mξ)ᵀ Σ dW`
    pub martingale: f64,
    /// `⟨M⟩_t = ∫ (Mξ)ᵀ Q (Mξ) ds`
    pub qvar: f64,
    pub a_t: f64,
    pub ep_t: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub x_final: Vec<f64>,
}

impl EprSample {
    /// JSON record without the terminal state.
    pub fn to_json_record(&self) -> String {
        serde_json::json!({
            "t_end": self.t_end,
            "dt": self.dt,
            "seed": self.seed,
            "stream": self.stream,
            "martingale": self.martingale,
            "qvar": self.qvar,
            "a_t": self.a_t,
            "ep_t": self.ep_t,
        })
        .to_string()
    }
}

/// Decimated trajectory; `epr_running[k] = A_s/s` (0 at `s = 0`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub epr_running: Vec<f64>,
}

impl PathTrace {
    fn push(&mut self, t: f64, x: &[f64], a: f64) {
        self.times.push(t);
        self.states.push(x.to_vec());
        self.epr_running.push(if t > 0.0 { a / t } else { 0.0 });
    }

    /// CSV with header `t,x_1,...,x_d,epr_running`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.states.first().map_or(0, |s| s.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x_{i}")));
        header.push("epr_running".into());
        writeln!(w, "{}", header.join(","))?;
        for ((t, x), e) in self.times.iter().zip(&self.states).zip(&self.epr_running) {
            write!(w, "{}", fmt_f64(*t))?;
            for v in x {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w, ",{}", fmt_f64(*e))?;
        }
        Ok(())
    }
}

/// 17 significant digits, lossless for f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Draw from the stationary law `N(0, Γ)`.
pub fn sample_stationary(model: &OUModel, rng: &mut PathRng) -> Vec<f64> {
    let mut z = vec![0.0; model.dim()];
    rng.fill_normal(&mut z);
    model.gamma_chol().matvec(&z)
}

/// Draw from `N(m, Γ)` for the given initial law.
pub fn sample_initial(model: &OUModel, law: &InitialLaw, rng: &mut PathRng) -> Result<Vec<f64>> {
    law.validate(model.dim())?;
    let mut x = sample_stationary(model, rng);
    if let InitialLaw::GaussianMeanShift(m) = law {
        for (xi, mi) in x.iter_mut().zip(m) {
            *xi += mi;
        }
    }
    Ok(x)
}

/// Exact transition sampler for a fixed step `δ`: `x ↦ e^{δB}x + L_δ z`.
#[derive(Debug, Clone)]
pub struct ExactStepper {
    transition: Matrix,
    noise_chol: Matrix,
    delta: f64,
}

impl ExactStepper {
    pub fn new(model: &OUModel, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exact step requires delta > 0, got {delta}"
            )));
        }
        let (transition, gamma_delta) = model.transition_params(delta)?;
        let noise_chol = cholesky_jittered(&gamma_delta).map_err(|_| {
            Error::InvalidParameter(format!(
                "transition covariance at delta = {delta} is numerically singular; increase delta"
            ))
        })?;
        Ok(Self {
            transition,
            noise_chol,
            delta,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn step(&self, x: &[f64], rng: &mut PathRng) -> Vec<f64> {
        let mut z = vec![0.0; x.len()];
        rng.fill_normal(&mut z);
        let mut out = self.transition.matvec(x);
        for (o, n) in out.iter_mut().zip(self.noise_chol.matvec(&z)) {
            *o += n;
        }
        out
    }
}

/// One exact transition of length `delta` from `x`.
pub fn exact_step(model: &OUModel, x: &[f64], delta: f64, rng: &mut PathRng) -> Result<Vec<f64>> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: x.len(),
        });
    }
    Ok(ExactStepper::new(model, delta)?.step(x, rng))
}

/// Number of steps and the effective step so that `n · dt_eff = t_end`.
pub(crate) fn step_grid(t_end: f64, dt: f64) -> Result<(u64, f64)> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("t_end must be > 0, got {t_end}")));
    }
    if !(dt > 0.0) || dt > t_end {
        return Err(Error::InvalidParameter(format!(
            "dt must satisfy 0 < dt <= t_end, got dt = {dt}, t_end = {t_end}"
        )));
    }
    let ratio = t_end / dt;
    let rounded = ratio.round();
    let n = if (ratio - rounded).abs() <= 1e-9 * ratio {
        rounded
    } else {
        ratio.ceil()
    };
    let n = n as u64;
    Ok((n, t_end / n as f64))
}

/// Time average of `½ xᵀQ̃x` along an exact-transition stationary path
/// (trapezoidal in time). Ergodic oracle for the closed-form rate that
/// involves no stochastic integral.
pub fn time_average_epr_integrand(
    model: &OUModel,
    t_end: f64,
    dt: f64,
    rng: &mut PathRng,
) -> Result<f64> {
    let (n, dt) = step_grid(t_end, dt)?;
    if model.reversible() {
        return Ok(0.0);
    }
    let stepper = ExactStepper::new(model, dt)?;
    let qt = model.qtilde();
    let mut x = sample_stationary(model, rng);
    let mut acc = 0.5 * qt.quad_form(&x) * 0.5;
    for k in 1..=n {
        x = stepper.step(&x, rng);
        let w = if k == n { 0.5 } else { 1.0 };
        acc += w * 0.5 * qt.quad_form(&x);
    }
    Ok(acc / n as f64)
}

/// Running accumulators of the Euler–Maruyama co-simulation.
#[derive(Debug, Clone, Copy)]
pub struct PathState<'a> {
    pub step: u64,
    pub t: f64,
    pub x: &'a [f64],
    pub martingale: f64,
    pub qvar: f64,
}

impl PathState<'_> {
    pub fn a_t(&self) -> f64 {
        self.martingale + 0.5 * self.qvar
    }
}

/// Coefficients of the Euler–Maruyama kernel, flattened row-major.
struct EmKernel {
    b: Vec<f64>,
    sigma: Vec<f64>,
    /// `K = ΣᵀM`; then `(Mξ)ᵀΣΔW = (Kξ)·ΔW` and `(Mξ)ᵀQ(Mξ) = |Kξ|²`.
    gain: Vec<f64>,
    epr_active: bool,
}

impl EmKernel {
    fn new(model: &OUModel) -> Self {
        let gain = &model.sigma().transpose() * model.epr_matrix();
        Self {
            b: model.b().as_slice().to_vec(),
            sigma: model.sigma().as_slice().to_vec(),
            gain: gain.as_slice().to_vec(),
            epr_active: !model.reversible(),
        }
    }
}

#[inline(always)]
fn matvec_flat(d: usize, m: &[f64], x: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let row = &m[i * d..(i + 1) * d];
        let mut s = 0.0;
        for j in 0..d {
            s += row[j] * x[j];
        }
        out[i] = s;
    }
}

#[inline(always)]
fn em_loop<F>(
    d: usize,
    k: &EmKernel,
    x: &mut [f64],
    n_steps: u64,
    dt: f64,
    rng: &mut PathRng,
    observe: &mut F,
) -> Result<(f64, f64)>
where
    F: FnMut(&PathState<'_>),
{
    let sqdt = dt.sqrt();
    let mut dw = vec![0.0; d];
    let mut drift = vec![0.0; d];
    let mut noise = vec![0.0; d];
    let mut h = vec![0.0; d];
    let (mut mart, mut qvar) = (0.0f64, 0.0f64);

    for step in 1..=n_steps {
        for w in dw[..d].iter_mut() {
            *w = rng.normal() * sqdt;
        }
        if k.epr_active {
            // left-point (Itô) evaluation at the pre-step state
            matvec_flat(d, &k.gain, x, &mut h);
            let mut inc = 0.0;
            let mut sq = 0.0;
            for i in 0..d {
                inc += h[i] * dw[i];
                sq += h[i] * h[i];
            }
            mart += inc;
            qvar += sq * dt;
        }
        matvec_flat(d, &k.b, x, &mut drift);
        matvec_flat(d, &k.sigma, &dw, &mut noise);
        let mut finite = true;
        for i in 0..d {
            x[i] += drift[i] * dt + noise[i];
            finite &= x[i].is_finite();
        }
        if !finite || !mart.is_finite() || !qvar.is_finite() {
            return Err(Error::StepUnstable { step });
        }
        observe(&PathState {
            step,
            t: step as f64 * dt,
            x,
            martingale: mart,
            qvar,
        });
    }
    Ok((mart, qvar))
}

/// Euler–Maruyama integration of state and EPR functional with an observer
/// called after every step. Returns the terminal sample.
pub fn em_integrate<F>(
    model: &OUModel,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    stream: RngStream,
    mut observe: F,
) -> Result<EprSample>
where
    F: FnMut(&PathState<'_>),
{
    let d = model.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x0.len(),
        });
    }
    let (n, dt) = step_grid(t_end, dt)?;
    if dt * model.drift_norm() >= EM_STABILITY_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} violates the stability guard dt * |B|_2 < {EM_STABILITY_LIMIT} (|B|_2 = {})",
            model.drift_norm()
        )));
    }
    let kernel = EmKernel::new(model);
    let mut rng = stream.generator();
    let mut x = x0.to_vec();
    let (martingale, qvar) = match d {
        1 => em_loop(1, &kernel, &mut x, n, dt, &mut rng, &mut observe),
        2 => em_loop(2, &kernel, &mut x, n, dt, &mut rng, &mut observe),
        3 => em_loop(3, &kernel, &mut x, n, dt, &mut rng, &mut observe),
        4 => em_loop(4, &kernel, &mut x, n, dt, &mut rng, &mut observe),
        _ => em_loop(d, &kernel, &mut x, n, dt, &mut rng, &mut observe),
    }?;
    let a_t = martingale + 0.5 * qvar;
    Ok(EprSample {
        t_end,
        dt,
        seed: stream.seed,
        stream: stream.stream_id,
        martingale,
        qvar,
        a_t,
        ep_t: a_t / t_end,
        x_final: x,
    })
}

/// Euler–Maruyama path of state and EPR functional from `x0`.
///
/// With `trace_every > 0` a decimated [`PathTrace`] including `t = 0` is returned.
pub fn em_path_with_epr(
    model: &OUModel,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    stream: RngStream,
    trace_every: u64,
) -> Result<(EprSample, Option<PathTrace>)> {
    if trace_every == 0 {
        let s = em_integrate(model, x0, t_end, dt, stream, |_| {})?;
        return Ok((s, None));
    }
    let mut trace = PathTrace::default();
    trace.push(0.0, x0, 0.0);
    let s = em_integrate(model, x0, t_end, dt, stream, |st| {
        if st.step % trace_every == 0 {
            trace.push(st.t, st.x, st.a_t());
        }
    })?;
    Ok((s, Some(trace)))
}

/// Initial state of the path on `stream`, drawn from `law`.
///
/// It uses a derived stream so that the Brownian increments of `stream`
/// are identical for every initial law.
pub fn initial_state(model: &OUModel, law: &InitialLaw, stream: RngStream) -> Result<Vec<f64>> {
    let mut rng = RngStream::new(derive_seed(stream.seed, u64::MAX), stream.stream_id).generator();
    sample_initial(model, law, &mut rng)
}

/// Initial state drawn from `law` on the path's own stream, then an EM path
/// continuing on that stream.
pub fn em_path_from_law(
    model: &OUModel,
    law: &InitialLaw,
    t_end: f64,
    dt: f64,
    stream: RngStream,
) -> Result<EprSample> {
    let x0 = initial_state(model, law, stream)?;
    em_integrate(model, &x0, t_end, dt, stream, |_| {})
}
