//! Small dense real linear algebra: everything the model layer needs and
//! nothing more. Sized for d up to a few dozen.

mod eigen;
mod expm;
mod lyapunov;
mod matrix;

pub use eigen::{
    cholesky, cholesky_jittered, spectral_abscissa, spectral_norm, sym_eig_extrema,
    symmetric_eigenvalues,
};
pub use expm::{expm, mat_exp};
pub use lyapunov::{lyapunov_residual, solve_lyapunov};
pub use matrix::{inverse, solve, Matrix};
