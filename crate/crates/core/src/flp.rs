//! Functional local projections: regularized estimation of
//! `y_{t+h} = <theta_h, U_t> + u` with `U_t = (w_t, X_t)`, long-run variance
//! estimation and pointwise inference on `<theta_h, zeta>`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::covops::{center, center_vec, regularize, CovarianceBundle, InverseMode, Panel, RegularizedInverse, TauConfig, TauRule};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::hilbert::{same_basis, FunctionElement, ProductElement};

/// A scalar outcome together with the regressors observed at each date.
#[derive(Debug, Clone)]
pub struct LpData {
    pub y: DVector<f64>,
    pub upsilon: Panel,
    /// Column of `w` that equals `y_t`, if any.
    pub y_lag_column: Option<usize>,
}

impl LpData {
    pub fn new(y: DVector<f64>, upsilon: Panel) -> Result<Self> {
        if y.len() != upsilon.n() {
            return Err(Error::DimensionMismatch { expected: upsilon.n(), found: y.len() });
        }
        Ok(Self { y, upsilon, y_lag_column: None })
    }

    pub fn with_y_lag_column(mut self, col: usize) -> Self {
        self.y_lag_column = Some(col);
        self
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    /// Observations `start..start+len`.
    pub fn slice(&self, start: usize, len: usize) -> LpData {
        LpData { y: self.y.rows(start, len).into_owned(), upsilon: self.upsilon.slice(start, len), y_lag_column: self.y_lag_column }
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `(y_{t+h}, U_t)` for `t = 0..T-h`.
    pub fn aligned(&self, h: usize) -> Result<(DVector<f64>, Panel)> {
        let t = self.len();
        let n = t.checked_sub(h).filter(|&n| n > 0).ok_or(Error::HorizonOutOfRange { h, remaining: 0 })?;
        let needed = self.upsilon.m() + 2;
        if n < needed {
            return Err(Error::HorizonOutOfRange { h, remaining: n });
        }
        Ok((self.y.rows(h, n).into_owned(), self.upsilon.slice(0, n)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub tau_rule: TauRule,
    pub mode: InverseMode,
    pub demean: bool,
    pub tau_config: TauConfig,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self { tau_rule: TauRule::Auto, mode: InverseMode::Schur, demean: true, tau_config: TauConfig::default() }
    }
}

impl EstimateOptions {
    pub fn with_rule(mut self, rule: TauRule) -> Self {
        self.tau_rule = rule;
        self
    }

    pub fn with_mode(mut self, mode: InverseMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Fitted projection at one horizon.
#[derive(Debug, Clone)]
pub struct LpEstimate {
    pub horizon: usize,
    pub theta: ProductElement,
    pub intercept: f64,
    pub residuals: DVector<f64>,
    pub reginv: RegularizedInverse,
    /// Centered (if requested) regressors used in the fit.
    pub design: Panel,
    pub k: usize,
    pub tau: f64,
}

impl LpEstimate {
    pub fn alpha(&self) -> &DVector<f64> {
        &self.theta.w
    }

    pub fn beta(&self) -> &FunctionElement {
        &self.theta.x
    }

    pub fn t_eff(&self) -> usize {
        self.residuals.len()
    }

    /// Fitted value `intercept + <theta, U>`.
    pub fn predict(&self, u: &ProductElement) -> Result<f64> {
        Ok(self.intercept + self.theta.inner(u)?)
    }
}

/// Estimate `theta_h` by the regularized inverse of `C_UU`.
pub fn estimate(data: &LpData, h: usize, opts: &EstimateOptions) -> Result<LpEstimate> {
    let (mut y, mut design) = data.aligned(h)?;
    let (ybar, ubar) = if opts.demean {
        let ubar = center_panel(&mut design);
        (center_vec(&mut y), ubar)
    } else {
        (0.0, DVector::zeros(design.p()))
    };
    let bundle = CovarianceBundle::from_centered(&design, Some(&y))?;
    let reginv = regularize(&bundle, opts.tau_rule, opts.mode, &opts.tau_config)?;
    let theta_c = reginv.dense() * bundle.c_y.as_ref().expect("response moment present");
    let residuals = &y - design.rows() * &theta_c;
    let intercept = ybar - ubar.dot(&theta_c);
    let theta = ProductElement::from_coords(design.m(), design.basis().clone(), &theta_c)?;
    Ok(LpEstimate { horizon: h, theta, intercept, residuals, k: reginv.k, tau: reginv.tau, reginv, design })
}

pub(crate) fn center_panel(p: &mut Panel) -> DVector<f64> {
    let mut rows = p.rows().clone();
    let mean = center(&mut rows);
    *p = Panel::from_coords(p.m(), p.basis().clone(), rows).expect("shape preserved");
    mean
}

/// Lag window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Bartlett,
    Parzen,
    /// `k(x) = 1` for `|x| < 1`, zero otherwise.
    Truncated,
}

impl Kernel {
    pub fn weight(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            Kernel::Bartlett => (1.0 - a).max(0.0),
            Kernel::Parzen => {
                if a <= 0.5 {
                    1.0 - 6.0 * a * a + 6.0 * a * a * a
                } else if a <= 1.0 {
                    2.0 * (1.0 - a).powi(3)
                } else {
                    0.0
                }
            }
            Kernel::Truncated => {
                if a < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `floor(1.2 T^(1/3))`.
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HacSpec {
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
}

pub fn default_bandwidth(t: usize) -> usize {
    ((1.2 * (t as f64).cbrt()).floor() as usize).max(1)
}

impl HacSpec {
    pub fn resolve(&self, t: usize) -> Result<usize> {
        let b = match self.bandwidth {
            Bandwidth::Auto => default_bandwidth(t),
            Bandwidth::Fixed(b) => b,
        };
        if b == 0 || b >= t {
            return Err(Error::InvalidBandwidth { bandwidth: b, t });
        }
        Ok(b)
    }
}

/// Kernel-weighted long-run covariance of the rows of `scores`.
pub fn hac_longrun(scores: &DMatrix<f64>, spec: &HacSpec) -> Result<DMatrix<f64>> {
    let n = scores.nrows();
    let b = spec.resolve(n)?;
    let mut lam = scores.tr_mul(scores);
    for s in 1..=b {
        let k = spec.kernel.weight(s as f64 / b as f64);
        if k == 0.0 {
            continue;
        }
        let g = scores.rows(s, n - s).tr_mul(&scores.rows(0, n - s));
        lam += (&g + g.transpose()) * k;
    }
    lam /= n as f64;
    Ok((&lam + lam.transpose()) * 0.5)
}

/// Scores `u_t U_t` of a fitted projection.
pub fn lp_scores(est: &LpEstimate) -> DMatrix<f64> {
    scale_rows(est.design.rows(), &est.residuals)
}

pub(crate) fn scale_rows(rows: &DMatrix<f64>, by: &DVector<f64>) -> DMatrix<f64> {
    let mut out = rows.clone();
    for (mut r, u) in out.row_iter_mut().zip(by.iter()) {
        r *= *u;
    }
    out
}

/// Pointwise inference on `<theta_h, zeta>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IrfInference {
    pub horizon: usize,
    pub point: f64,
    pub psi_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub k: usize,
    pub tau: f64,
    pub t_eff: usize,
}

impl IrfInference {
    pub fn covers(&self, truth: f64) -> bool {
        self.ci_low <= truth && truth <= self.ci_high
    }
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")))
    }
}

/// Interval `point -/+ z sqrt(psi / T)` with the variance floor applied.
pub(crate) fn interval(point: f64, psi: f64, zeta_norm_sq: f64, t: usize, level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    if !(psi > 1e-14 * zeta_norm_sq) || !psi.is_finite() {
        return Err(Error::DegenerateVariance { point, psi });
    }
    let half = normal_quantile(0.5 + level / 2.0) * (psi / t as f64).sqrt();
    Ok((point - half, point + half))
}

pub(crate) fn check_direction(design: &Panel, zeta: &ProductElement) -> Result<()> {
    same_basis(design.basis(), zeta.basis())?;
    if zeta.m() != design.m() {
        return Err(Error::DimensionMismatch { expected: design.m(), found: zeta.m() });
    }
    Ok(())
}

/// Inference from a precomputed long-run covariance `lam` of the scores.
pub fn irf_inference(est: &LpEstimate, lam: &DMatrix<f64>, zeta: &ProductElement, level: f64) -> Result<IrfInference> {
    check_direction(&est.design, zeta)?;
    let g = est.reginv.dense() * zeta.coords();
    let psi = (lam * &g).dot(&g);
    let point = est.theta.inner(zeta)?;
    let (ci_low, ci_high) = interval(point, psi, zeta.inner(zeta)?, est.t_eff(), level)?;
    Ok(IrfInference {
        horizon: est.horizon,
        point,
        psi_hat: psi,
        ci_low,
        ci_high,
        level,
        k: est.k,
        tau: est.tau,
        t_eff: est.t_eff(),
    })
}

/// Estimate and infer at a single horizon.
pub fn lp_irf(
    data: &LpData,
    h: usize,
    zeta: &ProductElement,
    level: f64,
    opts: &EstimateOptions,
    hac: &HacSpec,
) -> Result<(LpEstimate, IrfInference)> {
    let est = estimate(data, h, opts)?;
    let lam = hac_longrun(&lp_scores(&est), hac)?;
    let inf = irf_inference(&est, &lam, zeta, level)?;
    Ok((est, inf))
}

/// Inference at every horizon in `horizons`, computed independently.
pub fn irf_profile(
    data: &LpData,
    horizons: &[usize],
    zeta: &ProductElement,
    level: f64,
    opts: &EstimateOptions,
    hac: &HacSpec,
    exec: Execution,
) -> Result<Vec<IrfInference>> {
    exec.map(horizons.len(), |i| lp_irf(data, horizons[i], zeta, level, opts, hac).map(|r| r.1))
        .into_iter()
        .collect()
}
