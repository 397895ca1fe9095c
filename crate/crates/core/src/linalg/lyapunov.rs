use super::eigen::{cholesky, spectral_abscissa};
use super::matrix::{Lu, Matrix};
use crate::error::{Error, Result};

/// Solves `B X + X Bᵀ + Q = 0` for Hurwitz `B` and symmetric positive-definite `Q`.
///
/// The equation is vectorized as `(I⊗B + B⊗I) vec(X) = −vec(Q)` and solved
/// densely; the result is symmetrized before returning.
pub fn solve_lyapunov(b: &Matrix, q: &Matrix) -> Result<Matrix> {
    let d = b.require_square()?;
    let dq = q.require_square()?;
    if d != dq {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: dq,
        });
    }
    let alpha = spectral_abscissa(b)?;
    if alpha >= 0.0 {
        return Err(Error::NotHurwitz(alpha));
    }
    let asym = q.relative_asymmetry();
    if asym > 1e-12 {
        return Err(Error::NotSymmetric(asym));
    }
    cholesky(q)?;

    let n = d * d;
    let mut k = Matrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            let row = i * d + j;
            for l in 0..d {
                // (B X)_{ij} = Σ_l B_il X_lj
                k[(row, l * d + j)] += b[(i, l)];
                // (X Bᵀ)_{ij} = Σ_l X_il B_jl
                k[(row, i * d + l)] += b[(j, l)];
            }
        }
    }
    let rhs: Vec<f64> = q.as_slice().iter().map(|v| -v).collect();
    let x = Lu::new(&k)?.solve_vec(&rhs);
    let x = Matrix::from_row_major(d, d, x)?.symmetrized();
    Ok(x)
}

/// ‖B X + X Bᵀ + Q‖_F
pub fn lyapunov_residual(b: &Matrix, x: &Matrix, q: &Matrix) -> f64 {
    let r = &(&(b * x) + &(x * &b.transpose())) + q;
    r.frobenius_norm()
}
