//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use eprlab::linalg::{cholesky, mat_exp, spectral_abscissa};
use eprlab::{build_model, Matrix, OUModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Matrix {
    let data = (0..d * d)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_row_major(d, d, data).unwrap()
}

/// `CCᵀ/d + ½I` with Gaussian `C`.
pub fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    let c = random_matrix(rng, d, 1.0);
    let s = (&c * &c.transpose()).scale(1.0 / d as f64);
    (&s + &Matrix::identity(d).scale(0.5)).symmetrized()
}

/// Gaussian matrix shifted so that its spectral abscissa is −½.
pub fn random_hurwitz(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    let a = random_matrix(rng, d, 1.0);
    let shift = spectral_abscissa(&a).unwrap() + 0.5;
    &a - &Matrix::identity(d).scale(shift)
}

/// Random valid model of dimension 1..=4 with `Σ = chol(Q)`.
pub fn random_model(rng: &mut ChaCha8Rng) -> OUModel {
    let d = rng.random_range(1..=4);
    random_model_dim(rng, d)
}

pub fn random_model_dim(rng: &mut ChaCha8Rng, d: usize) -> OUModel {
    let b = random_hurwitz(rng, d);
    let q = random_spd(rng, d);
    build_model(&b, &cholesky(&q).unwrap()).unwrap()
}

/// Orthogonal matrix from Gram–Schmidt on a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    let a = random_matrix(rng, d, 1.0);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut v: Vec<f64> = (0..d).map(|i| a[(i, j)]).collect();
        for u in &cols {
            let dot: f64 = v.iter().zip(u).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= dot * y;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|x| x / n).collect());
    }
    let mut u = Matrix::zeros(d, d);
    for (j, c) in cols.iter().enumerate() {
        for i in 0..d {
            u[(i, j)] = c[i];
        }
    }
    u
}

pub fn rotational(omega: f64) -> OUModel {
    let b = Matrix::from_rows(&[[-1.0, omega], [-omega, -1.0]]).unwrap();
    build_model(&b, &Matrix::identity(2)).unwrap()
}

pub fn symmetric_reversible() -> OUModel {
    let b = Matrix::from_rows(&[[-2.0, 0.5], [0.5, -1.0]]).unwrap();
    build_model(&b, &Matrix::identity(2)).unwrap()
}

/// `∫₀ᵀ e^{sB} Q e^{sBᵀ} ds` by the composite trapezoid rule on `n` panels,
/// with one Richardson step (`n` and `2n` panels).
pub fn trapezoid_gramian(b: &Matrix, q: &Matrix, t_end: f64, n: usize) -> Matrix {
    let trap = |n: usize| {
        let h = t_end / n as f64;
        let e = mat_exp(b, h).unwrap();
        let et = e.transpose();
        let mut f = q.clone();
        let mut acc = q.scale(0.5);
        for k in 1..=n {
            f = &(&e * &f) * &et;
            let w = if k == n { 0.5 } else { 1.0 };
            acc = &acc + &f.scale(w);
        }
        acc.scale(h)
    };
    let coarse = trap(n);
    let fine = trap(2 * n);
    (&fine.scale(4.0 / 3.0) - &coarse.scale(1.0 / 3.0)).symmetrized()
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn frob_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).frobenius_norm()
}
