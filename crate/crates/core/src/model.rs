//! Validated Ornstein–Uhlenbeck model `dξ = Bξ dt + Σ dW`.
//!
//! Construction checks strict positivity of `Q = ΣΣᵀ` (A1) and the Hurwitz
//! property of `B` (A2), then derives every matrix the rest of the crate
//! reads: the stationary covariance `Γ`, its inverse, the EPR vector field
//! `g(x) = Mx` with `M = 2Q⁻¹B + Γ⁻¹`, and `Q̃ = MᵀQM`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, inverse, lyapunov_residual, mat_exp, solve_lyapunov, spectral_abscissa,
    spectral_norm, sym_eig_extrema, symmetric_eigenvalues, Matrix,
};

/// Relative tolerance used when the model decides reversibility on its own.
pub const DEFAULT_REVERSIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OUModel {
    dim: usize,
    b: Matrix,
    sigma: Matrix,
    q: Matrix,
    gamma: Matrix,
    gamma_inv: Matrix,
    gamma_chol: Matrix,
    m: Matrix,
    qtilde: Matrix,
    ep: f64,
    q_inv_b: Matrix,
    abscissa: f64,
    b_norm: f64,
    reversible: bool,
}

/// Constants derived from the Poincaré and log-Sobolev inequalities of the
/// stationary Gaussian law combined with the Dirichlet-form comparison
/// `E(f,f) ≥ λ_min(Q)/(2λ_max(Γ)) ⟨Γ∇f, ∇f⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Exponent of the L²(μ) decay of `P_t f` for centered `f`.
    pub decay_rate: f64,
    /// Variance ≤ poincare_const · ⟨−L f, f⟩.
    pub poincare_const: f64,
    /// Entropy ≤ lsi_const · ⟨−L f, f⟩.
    pub lsi_const: f64,
    /// Exponential integrability of `∫|ξ_s|² ds` is guaranteed below this.
    pub eta_max: f64,
}

/// Law of the initial state. Every member is `N(m, Γ)`, so the density
/// ratio against the stationary law lies in every `L^p(μ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialLaw {
    Stationary,
    GaussianMeanShift(Vec<f64>),
}

impl InitialLaw {
    pub fn mean(&self, dim: usize) -> Vec<f64> {
        match self {
            InitialLaw::Stationary => vec![0.0; dim],
            InitialLaw::GaussianMeanShift(m) => m.clone(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let InitialLaw::GaussianMeanShift(m) = self {
            if m.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.len(),
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("mean shift must be finite".into()));
            }
        }
        Ok(())
    }

    /// `‖dν/dμ‖_{L^p(μ)} = exp((p−1)/2 · mᵀΓ⁻¹m)` for `ν = N(m, Γ)`, `μ = N(0, Γ)`.
    pub fn density_ratio_lp_norm(&self, model: &OUModel, p: f64) -> Result<f64> {
        self.validate(model.dim())?;
        let m = self.mean(model.dim());
        Ok(((p - 1.0) / 2.0 * model.gamma_inv.quad_form(&m)).exp())
    }

    /// Parses `stationary` or `shift:m1,m2,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "stationary" {
            return Ok(InitialLaw::Stationary);
        }
        if let Some(rest) = spec.strip_prefix("shift:") {
            let m = rest
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidParameter(format!("bad mean shift `{rest}`: {e}")))?;
            return Ok(InitialLaw::GaussianMeanShift(m));
        }
        Err(Error::InvalidParameter(format!(
            "initial law must be `stationary` or `shift:m1,...`, got `{spec}`"
        )))
    }
}

impl std::fmt::Display for InitialLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialLaw::Stationary => write!(f, "stationary"),
            InitialLaw::GaussianMeanShift(m) => {
                let parts: Vec<String> = m.iter().map(|v| v.to_string()).collect();
                write!(f, "shift:{}", parts.join(","))
            }
        }
    }
}

/// On-disk model description: `{"B": [[...]], "Sigma": [[...]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Sigma")]
    pub sigma: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ModelFormat(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model file serializes")
    }

    pub fn build(&self) -> Result<OUModel> {
        let b = Matrix::from_rows(&self.b).map_err(|e| Error::ModelFormat(format!("B: {e}")))?;
        let s = Matrix::from_rows(&self.sigma)
            .map_err(|e| Error::ModelFormat(format!("Sigma: {e}")))?;
        build_model(&b, &s)
    }
}

/// Validates `(B, Σ)` and derives the stationary quantities.
pub fn build_model(b: &Matrix, sigma: &Matrix) -> Result<OUModel> {
    let d = b.require_square()?;
    let ds = sigma.require_square()?;
    if d != ds {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: ds,
        });
    }

    let q = (sigma * &sigma.transpose()).symmetrized();
    let (q_min, q_max) = sym_eig_extrema(&q)?;
    if !(q_min > 1e-12 * q_max) {
        return Err(Error::A1Violated {
            lambda_min: q_min,
            lambda_max: q_max,
        });
    }
    let abscissa = spectral_abscissa(b)?;
    if abscissa >= -1e-12 {
        return Err(Error::A2Violated(abscissa));
    }

    let gamma = solve_lyapunov(b, &q)?;
    let gamma_inv = inverse(&gamma)?.symmetrized();
    let gamma_chol = cholesky(&gamma)?;
    let q_inv = inverse(&q)?;
    let q_inv_b = &q_inv * b;
    let m = &q_inv_b.scale(2.0) + &gamma_inv;
    let qtilde = (&(&m.transpose() * &q) * &m).symmetrized();
    let ep = (0.5 * (&qtilde * &gamma).trace()).max(0.0);
    let b_norm = spectral_norm(b)?;

    let mut model = OUModel {
        dim: d,
        b: b.clone(),
        sigma: sigma.clone(),
        q,
        gamma,
        gamma_inv,
        gamma_chol,
        m,
        qtilde,
        ep,
        q_inv_b,
        abscissa,
        b_norm,
        reversible: false,
    };
    model.reversible = model.is_reversible(DEFAULT_REVERSIBILITY_TOL);
    Ok(model)
}

impl OUModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn gamma(&self) -> &Matrix {
        &self.gamma
    }

    pub fn gamma_inv(&self) -> &Matrix {
        &self.gamma_inv
    }

    /// Lower Cholesky factor of `Γ`.
    pub fn gamma_chol(&self) -> &Matrix {
        &self.gamma_chol
    }

    /// `M = 2Q⁻¹B + Γ⁻¹`, so that the EPR vector field is `g(x) = Mx`.
    pub fn epr_matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn qtilde(&self) -> &Matrix {
        &self.qtilde
    }

    pub fn spectral_abscissa(&self) -> f64 {
        self.abscissa
    }

    /// ‖B‖₂
    pub fn drift_norm(&self) -> f64 {
        self.b_norm
    }

    /// Reversibility decided at build time with [`DEFAULT_REVERSIBILITY_TOL`].
    pub fn reversible(&self) -> bool {
        self.reversible
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            b: self.b.to_rows(),
            sigma: self.sigma.to_rows(),
        }
    }

    /// `‖BΓ + ΓBᵀ + Q‖_F / ‖Q‖_F`
    pub fn lyapunov_relative_residual(&self) -> f64 {
        lyapunov_residual(&self.b, &self.gamma, &self.q) / self.q.frobenius_norm()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `∇ log ρ(x) = −Γ⁻¹x`
    pub fn grad_log_density(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.gamma_inv.matvec(x).into_iter().map(|v| -v).collect())
    }

    /// `g(x) = 2Q⁻¹Bx − ∇log ρ(x) = Mx`
    pub fn epr_field(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.m.matvec(x))
    }

    /// `½ g(x)ᵀ Q g(x)`
    pub fn epr_integrand(&self, x: &[f64]) -> Result<f64> {
        let g = self.epr_field(x)?;
        Ok((0.5 * self.q.quad_form(&g)).max(0.0))
    }

    /// Closed-form stationary entropy production rate `½ tr(Q̃Γ)`.
    pub fn entropy_production_rate(&self) -> f64 {
        self.ep
    }

    /// Scale below which `e_p` counts as zero: `1e-10 · (1 + ‖Q̃‖_F ‖Γ‖_F)`.
    pub fn ep_zero_threshold(&self) -> f64 {
        1e-10 * (1.0 + self.qtilde.frobenius_norm() * self.gamma.frobenius_norm())
    }

    /// `‖Q⁻¹B − (Q⁻¹B)ᵀ‖_F ≤ tol · max(1, ‖Q⁻¹B‖_F)`
    pub fn is_reversible(&self, tol: f64) -> bool {
        let skew = &self.q_inv_b - &self.q_inv_b.transpose();
        skew.frobenius_norm() <= tol * self.q_inv_b.frobenius_norm().max(1.0)
    }

    pub fn functional_constants(&self) -> Constants {
        let (q_min, _) = sym_eig_extrema(&self.q).expect("Q is symmetric");
        let (_, g_max) = sym_eig_extrema(&self.gamma).expect("Gamma is symmetric");
        let poincare_const = 2.0 * g_max / q_min;
        Constants {
            decay_rate: q_min / g_max,
            poincare_const,
            lsi_const: 2.0 * poincare_const,
            eta_max: q_min / (8.0 * g_max * g_max),
        }
    }

    /// Upper bound on `(1/t) log E_μ exp(η ∫₀ᵗ |ξ_s|² ds)` obtained from the
    /// log-Sobolev route:
    /// `(λ_min(Q)/(4λ_max(Γ))) · log ∫ exp((4λ_max(Γ)/λ_min(Q)) η |x|²) μ(dx)`.
    ///
    /// The Gaussian integral is `Π_i (1 − 2aγ_i)^{−1/2}` over the eigenvalues
    /// `γ_i` of `Γ`; `None` when it diverges (`η ≥ eta_max`).
    pub fn exp_integrability_bound(&self, eta: f64) -> Option<f64> {
        let (q_min, _) = sym_eig_extrema(&self.q).ok()?;
        let ev = symmetric_eigenvalues(&self.gamma).ok()?;
        let g_max = ev[ev.len() - 1];
        let a = 4.0 * g_max / q_min * eta;
        let mut log_mgf = 0.0;
        for g in ev {
            let w = 1.0 - 2.0 * a * g;
            if !(w > 0.0) {
                return None;
            }
            log_mgf -= 0.5 * w.ln();
        }
        Some(q_min / (4.0 * g_max) * log_mgf)
    }

    /// `(e^{δB}, Γ_δ)` with `Γ_δ = ∫₀^δ e^{sB} Q e^{sBᵀ} ds = Γ − e^{δB} Γ e^{δBᵀ}`.
    pub fn transition_params(&self, delta: f64) -> Result<(Matrix, Matrix)> {
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "transition step must be finite and >= 0, got {delta}"
            )));
        }
        if delta == 0.0 {
            return Ok((Matrix::identity(self.dim), Matrix::zeros(self.dim, self.dim)));
        }
        let e = mat_exp(&self.b, delta)?;
        let carried = &(&e * &self.gamma) * &e.transpose();
        let gamma_delta = (&self.gamma - &carried).symmetrized();
        Ok((e, gamma_delta))
    }

    /// Default Euler–Maruyama step `1e-3 · min(1, 1/‖B‖₂)`.
    pub fn default_dt(&self) -> f64 {
        1e-3 * (1.0 / self.b_norm).min(1.0)
    }
}
