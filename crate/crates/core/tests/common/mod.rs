#![allow(dead_code)]

use std::sync::Arc;

use funlp::covops::Panel;
use funlp::fiv::IvData;
use funlp::flp::LpData;
use funlp::fsvar::StructuralModel;
use funlp::hilbert::{BasisSpec, OperatorMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gauss_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| gauss(rng))
}

pub fn gauss_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| gauss(rng))
}

/// Subtract column means.
pub fn centered(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    out
}

pub fn centered_vec(v: &DVector<f64>) -> DVector<f64> {
    v.add_scalar(-v.mean())
}

/// Dense least squares through an SVD solve.
pub fn dense_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    x.clone().svd(true, true).solve(y, 1e-14).expect("svd solve")
}

/// Random full-rank `(y, w, X)` with correlated regressors.
pub fn random_lp(rng: &mut ChaCha8Rng, basis: &Arc<BasisSpec>, n: usize, m: usize) -> (LpData, DVector<f64>) {
    let j = basis.dim();
    let mix = gauss_matrix(rng, m + j, m + j) * 0.4 + DMatrix::identity(m + j, m + j);
    let raw = gauss_matrix(rng, n, m + j) * mix;
    let theta = gauss_vector(rng, m + j);
    let y = &raw * &theta + gauss_vector(rng, n) * 0.5;
    let panel = Panel::new(basis.clone(), &raw.columns(0, m).into_owned(), &raw.columns(m, j).into_owned()).unwrap();
    (LpData::new(y, panel).unwrap(), theta)
}

/// Endogenous regressors with a valid functional instrument; horizon 1.
///
/// `y_{t+1} = a w_t + <beta, X_t> + gamma e_t + eps_{t+1}` with `X_t`
/// loading on `e_t` and on the instrument `Z_t`.
pub struct IvDesign {
    pub data: IvData,
    pub theta: DVector<f64>,
}

pub fn iv_design(rng: &mut ChaCha8Rng, basis: &Arc<BasisSpec>, t: usize) -> IvDesign {
    let j = basis.dim();
    let scale: Vec<f64> = (0..j).map(|k| 0.8f64.powi(k as i32)).collect();
    let load: Vec<f64> = (0..j).map(|k| 0.6 * 0.7f64.powi(k as i32)).collect();
    let beta: Vec<f64> = (0..j).map(|k| if k % 2 == 0 { 1.0 } else { -0.5 } * 0.8f64.powi(k as i32)).collect();
    let a = 0.5;
    let mut z = DMatrix::zeros(t, j);
    let mut x = DMatrix::zeros(t, j);
    let mut w = DMatrix::zeros(t, 1);
    let mut y = DVector::zeros(t);
    let mut zs = DVector::<f64>::zeros(j);
    let mut ws = 0.0;
    for s in 0..t + 100 {
        for k in 0..j {
            zs[k] = 0.5 * zs[k] + scale[k] * gauss(rng);
        }
        ws = 0.5 * ws + gauss(rng);
        let e = gauss(rng);
        let xs = DVector::from_fn(j, |k, _| 0.9 * zs[k] + load[k] * e + 0.2 * scale[k] * gauss(rng));
        let eps = 0.5 * gauss(rng);
        if s >= 100 {
            let r = s - 100;
            z.row_mut(r).copy_from(&zs.transpose());
            x.row_mut(r).copy_from(&xs.transpose());
            w[(r, 0)] = ws;
            if r + 1 < t {
                y[r + 1] = a * ws + xs.dot(&DVector::from_column_slice(&beta)) + e + eps;
            }
        }
    }
    let lp = LpData::new(y, Panel::new(basis.clone(), &w, &x).unwrap()).unwrap();
    let inst = Panel::new(basis.clone(), &w, &z).unwrap();
    let mut theta = DVector::zeros(j + 1);
    theta[0] = a;
    theta.rows_mut(1, j).copy_from_slice(&beta);
    IvDesign { data: IvData::new(lp, inst).unwrap(), theta }
}

/// Random structural model with spectral radius of `B^-1 A` at most `radius`.
///
/// `b12` or `b21` is zero according to `beta12_zero`; `sigma22` has rank `rank`.
pub fn random_structural(rng: &mut ChaCha8Rng, basis: &Arc<BasisSpec>, beta12_zero: bool, rank: usize, radius: f64) -> StructuralModel {
    let j = basis.dim();
    let coef = DVector::from_fn(j, |k, _| 0.5 * gauss(rng) * 0.8f64.powi(k as i32));
    let zero = DVector::zeros(j);
    let b = if beta12_zero {
        StructuralModel::contemporaneous(basis.clone(), &zero, &coef).unwrap()
    } else {
        StructuralModel::contemporaneous(basis.clone(), &coef, &zero).unwrap()
    };
    let binv = funlp::fsvar::invert_b(&b).unwrap();
    let raw = gauss_matrix(rng, j + 1, j + 1);
    let gamma_raw = binv.dense() * &raw;
    let rho = gamma_raw.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let a_dense = raw * (radius / rho);
    let a = OperatorMatrix::from_dense(1, basis.clone(), a_dense).unwrap();
    let l = DMatrix::from_fn(j, rank, |r, _| gauss(rng) * 0.8f64.powi(r as i32));
    let sigma22 = &l * l.transpose() / rank as f64;
    let sigma11 = rng.random_range(0.5..2.0);
    StructuralModel { b, a, sigma11, sigma22 }
}

/// Symmetric positive definite matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = gauss_matrix(rng, n, n).qr().q();
    let d = DVector::from_fn(n, |_, _| rng.random_range(lo..hi));
    &q * DMatrix::from_diagonal(&d) * q.transpose()
}
