//! Instrumental-variable local projections for endogenous functional regressors.

use nalgebra::{DMatrix, DVector};

use crate::covops::{center_vec, regularize, CovarianceBundle, InverseMode, Panel, RegularizedInverse};
use crate::error::{Error, Result};
use crate::flp::{center_panel, check_direction, hac_longrun, interval, scale_rows, EstimateOptions, HacSpec, IrfInference, LpData};
use crate::hilbert::{same_basis, ProductElement};

/// Outcome, regressors and instruments `Z_t = (z_t, Z_t)` in the same product space.
#[derive(Debug, Clone)]
pub struct IvData {
    pub lp: LpData,
    pub instruments: Panel,
}

impl IvData {
    pub fn new(lp: LpData, instruments: Panel) -> Result<Self> {
        same_basis(lp.upsilon.basis(), instruments.basis())?;
        if instruments.n() != lp.len() {
            return Err(Error::DimensionMismatch { expected: lp.len(), found: instruments.n() });
        }
        if instruments.m() != lp.upsilon.m() {
            return Err(Error::DimensionMismatch { expected: lp.upsilon.m(), found: instruments.m() });
        }
        Ok(Self { lp, instruments })
    }
}

#[derive(Debug, Clone)]
pub struct IvEstimate {
    pub horizon: usize,
    pub theta: ProductElement,
    pub intercept: f64,
    pub residuals: DVector<f64>,
    pub reginv: RegularizedInverse,
    pub design: Panel,
    pub instruments: Panel,
    pub k: usize,
    pub tau: f64,
}

impl IvEstimate {
    pub fn t_eff(&self) -> usize {
        self.residuals.len()
    }
}

/// Aligned and optionally centered `(y_{t+h}, U_t, Z_t)`.
pub fn iv_covariances(data: &IvData, h: usize, demean: bool) -> Result<(CovarianceBundle, DVector<f64>, Panel, Panel, f64, DVector<f64>)> {
    let (mut y, mut x) = data.lp.aligned(h)?;
    let mut z = data.instruments.slice(0, x.n());
    let (ybar, xbar) = if demean {
        center_panel(&mut z);
        (center_vec(&mut y), center_panel(&mut x))
    } else {
        (0.0, DVector::zeros(x.p()))
    };
    let bundle = CovarianceBundle::cross_from_centered(&z, &x, Some(&y))?;
    Ok((bundle, y, x, z, ybar, xbar))
}

/// `theta = C_ZU,K^-1 C_Zy`.
///
/// When the instruments coincide with the regressors the cross moment is
/// symmetric and the fit is delegated to the projection estimator, so both
/// agree exactly.
pub fn iv_estimate(data: &IvData, h: usize, opts: &EstimateOptions) -> Result<IvEstimate> {
    if data.instruments.rows() == data.lp.upsilon.rows() {
        let lp = crate::flp::estimate(&data.lp, h, &EstimateOptions { mode: InverseMode::Schur, ..*opts })?;
        return Ok(IvEstimate {
            horizon: lp.horizon,
            theta: lp.theta,
            intercept: lp.intercept,
            residuals: lp.residuals,
            instruments: lp.design.clone(),
            design: lp.design,
            k: lp.k,
            tau: lp.tau,
            reginv: lp.reginv,
        });
    }
    let (bundle, y, design, instruments, ybar, xbar) = iv_covariances(data, h, opts.demean)?;
    let reginv = regularize(&bundle, opts.tau_rule, InverseMode::Schur, &opts.tau_config)?;
    let theta_c = reginv.dense() * bundle.c_y.as_ref().expect("response moment present");
    let residuals = &y - design.rows() * &theta_c;
    let intercept = ybar - xbar.dot(&theta_c);
    let theta = ProductElement::from_coords(design.m(), design.basis().clone(), &theta_c)?;
    Ok(IvEstimate { horizon: h, theta, intercept, residuals, k: reginv.k, tau: reginv.tau, reginv, design, instruments })
}

/// Scores `u_t Z_t`.
pub fn iv_scores(est: &IvEstimate) -> DMatrix<f64> {
    scale_rows(est.instruments.rows(), &est.residuals)
}

/// Inference on `<theta, zeta>` using the adjoint of the regularized inverse.
pub fn iv_inference(est: &IvEstimate, lam: &DMatrix<f64>, zeta: &ProductElement, level: f64) -> Result<IrfInference> {
    check_direction(&est.design, zeta)?;
    let g = est.reginv.dense().tr_mul(&zeta.coords());
    let omega = (lam * &g).dot(&g);
    let point = est.theta.inner(zeta)?;
    let (ci_low, ci_high) = interval(point, omega, zeta.inner(zeta)?, est.t_eff(), level)?;
    Ok(IrfInference {
        horizon: est.horizon,
        point,
        psi_hat: omega,
        ci_low,
        ci_high,
        level,
        k: est.k,
        tau: est.tau,
        t_eff: est.t_eff(),
    })
}

pub fn iv_irf(
    data: &IvData,
    h: usize,
    zeta: &ProductElement,
    level: f64,
    opts: &EstimateOptions,
    hac: &HacSpec,
) -> Result<(IvEstimate, IrfInference)> {
    let est = iv_estimate(data, h, opts)?;
    let lam = hac_longrun(&iv_scores(&est), hac)?;
    let inf = iv_inference(&est, &lam, zeta, level)?;
    Ok((est, inf))
}
