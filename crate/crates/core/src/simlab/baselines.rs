use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covops::{center, spectrum_sym, InverseMode, TauRule};
use crate::error::{Error, Result};
use crate::flp::{estimate, EstimateOptions, LpData};
use crate::hilbert::{FunctionElement, ProductElement};

/// Competing estimators of the horizon-h coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Schur-complement cutoff with the data-driven threshold.
    ScInv,
    /// Schur-complement cutoff retaining `K` components.
    ScInvFixedK(usize),
    /// Projection on `w` and the first `K` principal component scores of `X`.
    PcaFr(usize),
    /// Recursive VAR(1) on `(y, w, first K scores)` iterated `h` steps.
    PcaSvar(usize),
}

impl Estimator {
    pub fn label(&self) -> String {
        match self {
            Estimator::ScInv => "SCInv".into(),
            Estimator::ScInvFixedK(k) => format!("SCInv_K{k}"),
            Estimator::PcaFr(k) => format!("PCA-FR_K{k}"),
            Estimator::PcaSvar(k) => format!("PCA-SVAR_K{k}"),
        }
    }
}

/// Affine predictor `intercept + <theta, U_t> + y_coef * y_t` of `y_{t+h}`.
#[derive(Debug, Clone)]
pub struct Fit {
    pub theta: ProductElement,
    pub intercept: f64,
    pub y_coef: f64,
}

impl Fit {
    pub fn predict(&self, u: &ProductElement, y_t: f64) -> Result<f64> {
        Ok(self.intercept + self.theta.inner(u)? + self.y_coef * y_t)
    }
}

pub fn fit(estimator: Estimator, data: &LpData, h: usize, base: &EstimateOptions) -> Result<Fit> {
    let lp = |rule, mode| -> Result<Fit> {
        let e = estimate(data, h, &base.with_rule(rule).with_mode(mode))?;
        Ok(Fit { theta: e.theta, intercept: e.intercept, y_coef: 0.0 })
    };
    match estimator {
        Estimator::ScInv => lp(TauRule::Auto, InverseMode::Schur),
        Estimator::ScInvFixedK(k) => lp(TauRule::FixedK(k), InverseMode::Schur),
        Estimator::PcaFr(k) => lp(TauRule::FixedK(k), InverseMode::Pca),
        Estimator::PcaSvar(k) => pca_svar(data, h, k),
    }
}

/// Finite-dimensional VAR(1) on `s_t = (y_t, w_t without y, scores_t)`. The
/// functional block enters as a unit, so the response of `y` to a functional
/// shock at horizon `h` is the scalar row, score columns of `Phi^h`.
fn pca_svar(data: &LpData, h: usize, k: usize) -> Result<Fit> {
    let panel = &data.upsilon;
    let n = panel.n();
    let (m, j) = (panel.m(), panel.j());
    if k == 0 || k > j {
        return Err(Error::InvalidArgument(format!("fixed K must lie in 1..={j}, got {k}")));
    }
    let w_cols: Vec<usize> = (0..m).filter(|&c| Some(c) != data.y_lag_column).collect();
    let d = 1 + w_cols.len() + k;
    if n < d + 3 {
        return Err(Error::InsufficientData { needed: d + 3, got: n });
    }
    let mut x = panel.rows().columns(m, j).into_owned();
    let x_mean = center(&mut x);
    let cov = x.tr_mul(&x) / n as f64;
    let v = spectrum_sym(&cov)?.left_vectors.columns(0, k).into_owned();
    let scores = &x * &v;

    let mut s = DMatrix::zeros(n, d);
    s.set_column(0, &data.y);
    for (i, &c) in w_cols.iter().enumerate() {
        s.set_column(1 + i, &panel.rows().column(c));
    }
    s.view_mut((0, 1 + w_cols.len()), (n, k)).copy_from(&scores);

    let mut lagged = s.rows(0, n - 1).into_owned();
    let mut current = s.rows(1, n - 1).into_owned();
    let lag_mean = center(&mut lagged);
    let cur_mean = center(&mut current);
    let gram = lagged.tr_mul(&lagged);
    let phi_t = gram
        .lu()
        .solve(&lagged.tr_mul(&current))
        .ok_or(Error::IllConditioned { rcond: 0.0 })?;
    let phi = phi_t.transpose();
    let c = &cur_mean - &phi * &lag_mean;

    // y_{t+h} = mu_h + row0(Phi^h) s_t with mu_h = row0(sum_{i<h} Phi^i) c
    let mut power = DMatrix::identity(d, d);
    let mut acc = DMatrix::zeros(d, d);
    for _ in 0..h {
        acc += &power;
        power = &phi * &power;
    }
    let row = power.row(0).transpose();
    let mu = (acc.row(0) * &c)[(0, 0)];

    let score_block = row.rows(1 + w_cols.len(), k).into_owned();
    let beta = &v * &score_block;
    let mut alpha = DVector::zeros(m);
    for (i, &col) in w_cols.iter().enumerate() {
        alpha[col] = row[1 + i];
    }
    let mut y_coef = row[0];
    if let Some(col) = data.y_lag_column {
        alpha[col] += y_coef;
        y_coef = 0.0;
    }
    // scores are centered with the sample mean of X
    let intercept = mu - beta.dot(&x_mean);
    let theta = ProductElement::new(alpha, FunctionElement::from_coords(panel.basis().clone(), beta)?);
    Ok(Fit { theta, intercept, y_coef })
}
