use nalgebra::DMatrix;

use super::matrix::Matrix;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

fn require_symmetric(s: &Matrix) -> Result<usize> {
    let n = s.require_square()?;
    let asym = s.relative_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(n)
}

/// Full spectrum of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(s: &Matrix) -> Result<Vec<f64>> {
    let n = require_symmetric(s)?;
    let mut a = s.symmetrized();
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * 1e-3 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }

    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// `(λ_min, λ_max)` of a symmetric matrix.
pub fn sym_eig_extrema(s: &Matrix) -> Result<(f64, f64)> {
    let ev = symmetric_eigenvalues(s)?;
    Ok((ev[0], ev[ev.len() - 1]))
}

/// Largest real part over the spectrum of a general square matrix.
pub fn spectral_abscissa(b: &Matrix) -> Result<f64> {
    let n = b.require_square()?;
    let m = DMatrix::from_row_slice(n, n, b.as_slice());
    let ev = m.complex_eigenvalues();
    Ok(ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Operator 2-norm, `sqrt(λ_max(AᵀA))`.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    let ata = (&a.transpose() * a).symmetrized();
    let (_, max) = sym_eig_extrema(&ata)?;
    Ok(max.max(0.0).sqrt())
}

/// Lower-triangular `L` with `L Lᵀ = S`.
pub fn cholesky(s: &Matrix) -> Result<Matrix> {
    require_symmetric(s)?;
    cholesky_unchecked(s)
}

fn cholesky_unchecked(s: &Matrix) -> Result<Matrix> {
    let n = s.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = s[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }
    Ok(l)
}

/// Cholesky with a single diagonal jitter retry of `1e-14 · tr(S)/d`.
///
/// Used for the finite-time transition covariance, which is positive
/// definite for every positive step but numerically semidefinite for tiny ones.
pub fn cholesky_jittered(s: &Matrix) -> Result<Matrix> {
    require_symmetric(s)?;
    match cholesky_unchecked(s) {
        Ok(l) => Ok(l),
        Err(_) => {
            let n = s.rows();
            let jitter = 1e-14 * s.trace() / n as f64;
            if !(jitter > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            let bumped = s + &Matrix::identity(n).scale(jitter);
            cholesky_unchecked(&bumped)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn extrema_examples() {
        assert_eq!(sym_eig_extrema(&Matrix::identity(3)).unwrap(), (1.0, 1.0));
        assert_eq!(
            sym_eig_extrema(&Matrix::from_diag(&[0.5, 0.5])).unwrap(),
            (0.5, 0.5)
        );
        let s = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let (lo, hi) = sym_eig_extrema(&s).unwrap();
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hi, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn extrema_rejects_asymmetric() {
        let s = Matrix::from_rows(&[[2.0, 1.0], [0.0, 2.0]]).unwrap();
        assert!(matches!(sym_eig_extrema(&s), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        // tridiagonal (2,-1) of size 5: eigenvalues 2 - 2cos(kπ/6)
        let n = 5;
        let mut s = Matrix::zeros(n, n);
        for i in 0..n {
            s[(i, i)] = 2.0;
            if i + 1 < n {
                s[(i, i + 1)] = -1.0;
                s[(i + 1, i)] = -1.0;
            }
        }
        let ev = symmetric_eigenvalues(&s).unwrap();
        for (k, v) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / 6.0).cos();
            assert_abs_diff_eq!(*v, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn abscissa_examples() {
        let d = Matrix::from_diag(&[-3.0, -1.0]);
        assert_abs_diff_eq!(spectral_abscissa(&d).unwrap(), -1.0, epsilon = 1e-12);
        let rot = Matrix::from_rows(&[[-1.0, 1.0], [-1.0, -1.0]]).unwrap();
        assert_abs_diff_eq!(spectral_abscissa(&rot).unwrap(), -1.0, epsilon = 1e-12);
        let nil = Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(spectral_abscissa(&nil).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(cholesky(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        assert_eq!(
            cholesky(&Matrix::from_diag(&[4.0, 9.0])).unwrap(),
            Matrix::from_diag(&[2.0, 3.0])
        );
        let s = Matrix::from_rows(&[[4.0, 2.0], [2.0, 5.0]]).unwrap();
        let l = cholesky(&s).unwrap();
        assert_eq!(l, Matrix::from_rows(&[[2.0, 0.0], [1.0, 2.0]]).unwrap());
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let s = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert_eq!(cholesky(&s), Err(Error::NotPositiveDefinite));
        assert_eq!(cholesky_jittered(&s), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        let s = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(cholesky(&s).is_err());
        let l = cholesky_jittered(&s).unwrap();
        let r = &l * &l.transpose();
        assert!((&r - &s).frobenius_norm() < 1e-7);
    }

    #[test]
    fn spectral_norm_of_rotation_block() {
        let b = Matrix::from_rows(&[[-1.0, 1.0], [-1.0, -1.0]]).unwrap();
        assert_abs_diff_eq!(spectral_norm(&b).unwrap(), 2f64.sqrt(), epsilon = 1e-14);
    }
}
