//! Matrix exponential by scaling and squaring around a diagonal Padé core.
//!
//! Degree selection follows Higham's backward-error thresholds for the
//! 1-norm, so that the Padé remainder stays at double-precision unit roundoff.

use super::matrix::{solve, Matrix};
use crate::error::{Error, Result};

// (degree, theta_m) pairs.
const PADE_THETAS: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068e0),
    (13, 5.371_920_351_148_152e0),
];

/// Returns `e^{tA}`.
pub fn mat_exp(a: &Matrix, t: f64) -> Result<Matrix> {
    let n = a.require_square()?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "mat_exp requires finite t >= 0, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(Matrix::identity(n));
    }
    expm(&a.scale(t))
}

/// Matrix exponential of `a` (no time scaling).
pub fn expm(a: &Matrix) -> Result<Matrix> {
    let n = a.require_square()?;
    let norm = a.norm_1();
    if norm == 0.0 {
        return Ok(Matrix::identity(n));
    }

    for &(m, theta) in &PADE_THETAS[..4] {
        if norm <= theta {
            return pade(a, m);
        }
    }

    let theta13 = PADE_THETAS[4].1;
    let squarings = if norm > theta13 {
        (norm / theta13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings));
    let mut r = pade(&scaled, 13)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if !r.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(r)
}

fn pade_coefficients(m: usize) -> Vec<f64> {
    // c_{k+1} = c_k (m - k) / ((2m - k)(k + 1)), c_0 = 1
    let mut c = vec![1.0; m + 1];
    for k in 0..m {
        c[k + 1] = c[k] * (m - k) as f64 / (((2 * m - k) * (k + 1)) as f64);
    }
    c
}

fn pade(a: &Matrix, m: usize) -> Result<Matrix> {
    let n = a.rows();
    let c = pade_coefficients(m);
    let a2 = a * a;

    // even powers I, A², A⁴, ..., A^{m-1}
    let mut even = vec![Matrix::identity(n)];
    for _ in 0..(m / 2) {
        let next = &even[even.len() - 1] * &a2;
        even.push(next);
    }

    let mut u_inner = Matrix::zeros(n, n);
    let mut v = Matrix::zeros(n, n);
    for (j, p) in even.iter().enumerate() {
        let k_even = 2 * j;
        let k_odd = 2 * j + 1;
        if k_even <= m {
            v = &v + &p.scale(c[k_even]);
        }
        if k_odd <= m {
            u_inner = &u_inner + &p.scale(c[k_odd]);
        }
    }
    let u = a * &u_inner;
    let num = &v + &u;
    let den = &v - &u;
    solve(&den, &num)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_time_is_identity() {
        let a = Matrix::from_rows(&[[3.0, -7.0], [2.5, 11.0]]).unwrap();
        assert_eq!(mat_exp(&a, 0.0).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn diagonal_matches_scalar_exp() {
        let a = Matrix::from_diag(&[-1.0, -2.0]);
        let e = mat_exp(&a, 1.0).unwrap();
        assert_abs_diff_eq!(e[(0, 0)], 0.367_879_441_171_442_3, epsilon = 1e-14);
        assert_abs_diff_eq!(e[(1, 1)], 0.135_335_283_236_612_7, epsilon = 1e-14);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn damped_rotation_by_pi() {
        let a = Matrix::from_rows(&[[-1.0, 1.0], [-1.0, -1.0]]).unwrap();
        let e = mat_exp(&a, std::f64::consts::PI).unwrap();
        let expected = -(-std::f64::consts::PI).exp();
        assert_abs_diff_eq!(expected, -0.043_213_918_263_772_25, epsilon = 1e-15);
        assert_abs_diff_eq!(e[(0, 0)], expected, epsilon = 1e-14);
        assert_abs_diff_eq!(e[(1, 1)], expected, epsilon = 1e-14);
        assert_abs_diff_eq!(e[(0, 1)], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[(1, 0)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn large_norm_uses_squaring() {
        // nilpotent: e^{tN} = I + tN exactly
        let a = Matrix::from_rows(&[[0.0, 40.0], [0.0, 0.0]]).unwrap();
        let e = expm(&a).unwrap();
        assert_abs_diff_eq!(e[(0, 1)], 40.0, epsilon = 1e-11);
        assert_abs_diff_eq!(e[(0, 0)], 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(e[(1, 0)], 0.0, epsilon = 1e-13);
    }

    #[test]
    fn rejects_bad_input() {
        let rect = Matrix::zeros(2, 3);
        assert!(matches!(mat_exp(&rect, 1.0), Err(Error::NonSquare { .. })));
        let a = Matrix::identity(2);
        assert!(mat_exp(&a, -1.0).is_err());
    }

    #[test]
    fn pade_coefficients_match_tabulated() {
        let c = pade_coefficients(3);
        let expect = [120.0, 60.0, 12.0, 1.0];
        for (a, b) in c.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b / 120.0, epsilon = 1e-16);
        }
    }
}
