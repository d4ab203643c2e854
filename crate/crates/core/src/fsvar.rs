//! Structural functional VAR(1) in `R x H`: inversion of the contemporaneous
//! operator, identification under the two recursive schemes, structural
//! impulse responses, and function-on-function projections.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covops::{center, regularize, spectrum_sym, CovarianceBundle, Panel, RegularizedInverse};
use crate::error::{Error, Result};
use crate::flp::{center_panel, check_direction, interval, scale_rows, EstimateOptions, IrfInference};
use crate::hilbert::{BasisSpec, FunctionElement, OperatorMatrix, ProductElement};

const STRUCTURE_TOL: f64 = 1e-12;

/// `B U_t = A U_{t-1} + u_t` with `Var(u_t) = diag(sigma11, Sigma22)`.
#[derive(Debug, Clone)]
pub struct StructuralModel {
    pub b: OperatorMatrix,
    pub a: OperatorMatrix,
    pub sigma11: f64,
    pub sigma22: DMatrix<f64>,
}

/// `U_t = Gamma U_{t-1} + e_t` with `Var(e_t) = Sigma_e`.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub gamma: OperatorMatrix,
    pub sigma_eps: OperatorMatrix,
}

impl StructuralModel {
    /// `B = [[1, b12], [b21, I]]`.
    pub fn contemporaneous(basis: Arc<BasisSpec>, b12: &DVector<f64>, b21: &DVector<f64>) -> Result<OperatorMatrix> {
        let j = basis.dim();
        OperatorMatrix::from_blocks(
            basis,
            &DMatrix::from_element(1, 1, 1.0),
            &DMatrix::from_row_slice(1, j, b12.as_slice()),
            &DMatrix::from_column_slice(j, 1, b21.as_slice()),
            &DMatrix::identity(j, j),
        )
    }

    pub fn beta12(&self) -> DVector<f64> {
        self.b.a12().row(0).transpose()
    }

    pub fn beta21(&self) -> DVector<f64> {
        self.b.a21().column(0).into_owned()
    }

    pub fn shock_covariance(&self) -> OperatorMatrix {
        let j = self.sigma22.nrows();
        OperatorMatrix::from_blocks(
            self.b.basis().clone(),
            &DMatrix::from_element(1, 1, self.sigma11),
            &DMatrix::zeros(1, j),
            &DMatrix::zeros(j, 1),
            &self.sigma22,
        )
        .expect("blocks sized from the basis")
    }
}

fn check_unit_structure(b: &OperatorMatrix) -> Result<()> {
    if b.m() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: b.m() });
    }
    let j = b.j();
    let dev = (b.a11()[(0, 0)] - 1.0).abs().max((b.a22() - DMatrix::identity(j, j)).amax());
    if dev > 1e-12 {
        return Err(Error::InvalidArgument("contemporaneous operator must have unit diagonal blocks".into()));
    }
    Ok(())
}

/// Closed-form inverse of `[[1, b12], [b21, I]]`.
pub fn invert_b(b: &OperatorMatrix) -> Result<OperatorMatrix> {
    check_unit_structure(b)?;
    let b12 = b.a12();
    let b21 = b.a21();
    let s = 1.0 - (&b12 * &b21)[(0, 0)];
    if s.abs() < STRUCTURE_TOL {
        return Err(Error::SingularStructure { schur: s });
    }
    let j = b.j();
    let sinv = 1.0 / s;
    OperatorMatrix::from_blocks(
        b.basis().clone(),
        &DMatrix::from_element(1, 1, sinv),
        &(-&b12 * sinv),
        &(-&b21 * sinv),
        &(DMatrix::identity(j, j) + &b21 * &b12 * sinv),
    )
}

pub fn structural_to_reduced(s: &StructuralModel) -> Result<ReducedModel> {
    let binv = invert_b(&s.b)?;
    let gamma = binv.compose(&s.a)?;
    let sigma_eps = binv.compose(&s.shock_covariance())?.compose(&binv.adjoint())?;
    Ok(ReducedModel { gamma, sigma_eps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// The scalar variable does not respond contemporaneously to the functional one.
    Beta12Zero,
    /// The functional variable does not respond contemporaneously to the scalar one.
    Beta21Zero,
}

#[derive(Debug, Clone)]
pub struct Identified {
    pub model: StructuralModel,
    pub b_inv: OperatorMatrix,
    /// Dimensions of `H` on which the structure is not identified.
    pub unidentified_dim: usize,
}

/// Recover the structural model from reduced-form parameters.
///
/// Under `Beta21Zero` the solve for `b12` uses a spectral cutoff on
/// `Sigma_e,22`: `cutoff` is the threshold on squared eigenvalues, defaulting
/// to a relative floor of `1e-10` on the eigenvalues.
pub fn identify_structural(r: &ReducedModel, scheme: Scheme, cutoff: Option<f64>) -> Result<Identified> {
    let basis = r.gamma.basis().clone();
    let j = basis.dim();
    if r.gamma.m() != 1 || r.sigma_eps.m() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: r.gamma.m() });
    }
    let se = &r.sigma_eps;
    let s11 = se.a11()[(0, 0)];
    let s12 = se.a12();
    let s21 = se.a21();
    let s22 = se.a22();
    let g = &r.gamma;
    let (g11, g12, g21, g22) = (g.a11(), g.a12(), g.a21(), g.a22());
    let (b12, b21, a, sigma11, sigma22, unidentified) = match scheme {
        Scheme::Beta12Zero => {
            if !(s11 > 0.0) {
                return Err(Error::IdentificationFailure(format!("scalar innovation variance {s11:.3e} is not positive")));
            }
            let b21 = -&s21 / s11;
            let sigma22 = &s22 - &s21 * s21.transpose() / s11;
            let a = OperatorMatrix::from_blocks(basis.clone(), &g11, &g12, &(&g21 + &b21 * &g11), &(&g22 + &b21 * &g12))?;
            (DMatrix::zeros(1, j), b21, a, s11, sigma22, 0)
        }
        Scheme::Beta21Zero => {
            let sym = (&s22 + s22.transpose()) * 0.5;
            let sp = spectrum_sym(&sym)?;
            let lead = sp.values[0];
            if !(lead > 0.0) {
                return Err(Error::IdentificationFailure("functional innovation covariance is zero".into()));
            }
            let k = match cutoff {
                Some(tau) => sp.values.iter().take_while(|&&v| v > 0.0 && v * v >= tau).count(),
                None => sp.values.iter().take_while(|&&v| v > 1e-10 * lead).count(),
            };
            if k == 0 {
                return Err(Error::IdentificationFailure("no eigenvalue of the functional innovation covariance survives the cutoff".into()));
            }
            let v = sp.left_vectors.columns(0, k);
            let mut vs = v.into_owned();
            for (c, mut col) in vs.column_iter_mut().enumerate() {
                col /= sp.values[c];
            }
            let pinv = vs * v.transpose();
            let b12 = -(&s12 * pinv);
            let sigma11 = s11 - (&b12 * &s22 * b12.transpose())[(0, 0)];
            if !(sigma11 > 0.0) {
                return Err(Error::IdentificationFailure(format!("implied scalar shock variance {sigma11:.3e} is not positive")));
            }
            let a = OperatorMatrix::from_blocks(basis.clone(), &(&g11 + &b12 * &g21), &(&g12 + &b12 * &g22), &g21, &g22)?;
            (b12, DMatrix::zeros(j, 1), a, sigma11, s22, j - k)
        }
    };
    let b = OperatorMatrix::from_blocks(basis, &DMatrix::from_element(1, 1, 1.0), &b12, &b21, &DMatrix::identity(j, j))?;
    let b_inv = invert_b(&b)?;
    Ok(Identified { model: StructuralModel { b, a, sigma11, sigma22 }, b_inv, unidentified_dim: unidentified })
}

/// Spectral radius estimate `||Gamma^p||^(1/p)` by repeated squaring, `p = 2^10`.
pub fn spectral_radius(gamma: &OperatorMatrix) -> f64 {
    // Track Gamma^p = exp(log_c) * m with ||m|| = 1.
    let mut m = gamma.dense().clone();
    let n0 = m.norm();
    if n0 == 0.0 {
        return 0.0;
    }
    m /= n0;
    let mut log_c = n0.ln();
    let mut p = 1.0;
    for _ in 0..10 {
        m = &m * &m;
        log_c *= 2.0;
        p *= 2.0;
        let n = m.norm();
        if n == 0.0 {
            return 0.0;
        }
        m /= n;
        log_c += n.ln();
    }
    (log_c / p).exp()
}

/// Responses `Gamma^h B^-1` for `h = 0..=H`.
#[derive(Debug, Clone)]
pub struct SirfTable {
    pub responses: Vec<OperatorMatrix>,
    pub spectral_radius: f64,
}

impl SirfTable {
    pub fn horizons(&self) -> usize {
        self.responses.len() - 1
    }

    pub fn irf11(&self, h: usize) -> f64 {
        self.responses[h].a11()[(0, 0)]
    }

    /// Representer of `zeta -> IRF12,h(zeta)`.
    pub fn irf12(&self, h: usize) -> FunctionElement {
        let r = &self.responses[h];
        FunctionElement::from_coords(r.basis().clone(), r.a12().row(0).transpose()).expect("sized by basis")
    }

    /// Response of the functional variable to a unit scalar shock.
    pub fn irf21(&self, h: usize) -> FunctionElement {
        let r = &self.responses[h];
        FunctionElement::from_coords(r.basis().clone(), r.a21().column(0).into_owned()).expect("sized by basis")
    }

    pub fn irf22(&self, h: usize) -> DMatrix<f64> {
        self.responses[h].a22()
    }
}

pub fn sirf(r: &ReducedModel, b_inv: &OperatorMatrix, horizons: usize) -> Result<SirfTable> {
    let rho = spectral_radius(&r.gamma);
    if rho >= 1.0 {
        log::warn!("reduced-form operator has spectral radius {rho:.4} >= 1; responses need not decay");
    }
    let mut responses = Vec::with_capacity(horizons + 1);
    responses.push(b_inv.clone());
    for h in 1..=horizons {
        let next = r.gamma.compose(&responses[h - 1])?;
        responses.push(next);
    }
    Ok(SirfTable { responses, spectral_radius: rho })
}

/// Response at horizon `h` to the structural shock `shock`.
pub fn sirf_apply(table: &SirfTable, h: usize, shock: &ProductElement) -> Result<ProductElement> {
    let r = table.responses.get(h).ok_or(Error::HorizonOutOfRange { h, remaining: table.responses.len() })?;
    r.apply(shock)
}

/// Function-valued responses `Y_t` (isometric coordinates, `n x q`) with regressors `U_t`.
#[derive(Debug, Clone)]
pub struct FofData {
    pub horizon: usize,
    pub response: DMatrix<f64>,
    pub upsilon: Panel,
}

impl FofData {
    pub fn new(horizon: usize, response: DMatrix<f64>, upsilon: Panel) -> Result<Self> {
        if response.nrows() != upsilon.n() {
            return Err(Error::DimensionMismatch { expected: upsilon.n(), found: response.nrows() });
        }
        Ok(Self { horizon, response, upsilon })
    }

    /// `X_{t+h+1}` on `w_t = (y_{t+1}, y_t)` and `X_t`. The coefficient on
    /// `y_{t+1}` is the response of `X` to the scalar structural shock at `h`.
    pub fn scalar_shock_design(y: &DVector<f64>, x: &DMatrix<f64>, basis: Arc<BasisSpec>, h: usize) -> Result<Self> {
        let t = y.len();
        if x.nrows() != t {
            return Err(Error::DimensionMismatch { expected: t, found: x.nrows() });
        }
        let n = t.checked_sub(h + 1).filter(|&n| n > 3).ok_or(Error::HorizonOutOfRange { h, remaining: 0 })?;
        let w = DMatrix::from_fn(n, 2, |i, c| if c == 0 { y[i + 1] } else { y[i] });
        let upsilon = Panel::new(basis.clone(), &w, &x.rows(0, n).into_owned())?;
        let resp = Panel::new(basis, &DMatrix::zeros(n, 0), &x.rows(h + 1, n).into_owned())?;
        Self::new(h, resp.rows().clone(), upsilon)
    }
}

/// `A_h = C_YU C_K^-1` and its residuals.
#[derive(Debug, Clone)]
pub struct FofEstimate {
    pub horizon: usize,
    /// `q x p` map from regressor coordinates to response coordinates.
    pub a: DMatrix<f64>,
    pub intercept: DVector<f64>,
    pub residuals: DMatrix<f64>,
    pub reginv: RegularizedInverse,
    pub design: Panel,
    pub k: usize,
    pub tau: f64,
}

impl FofEstimate {
    pub fn t_eff(&self) -> usize {
        self.residuals.nrows()
    }

    /// `A zeta` in response coordinates.
    pub fn apply(&self, zeta: &ProductElement) -> DVector<f64> {
        &self.a * zeta.coords()
    }
}

pub fn fof_estimate(data: &FofData, opts: &EstimateOptions) -> Result<FofEstimate> {
    let mut design = data.upsilon.clone();
    let mut resp = data.response.clone();
    let (ybar, ubar) = if opts.demean {
        let ubar = center_panel(&mut design);
        (center(&mut resp), ubar)
    } else {
        (DVector::zeros(resp.ncols()), DVector::zeros(design.p()))
    };
    let bundle = CovarianceBundle::from_centered(&design, None)?;
    let reginv = regularize(&bundle, opts.tau_rule, opts.mode, &opts.tau_config)?;
    let c_yu = resp.tr_mul(design.rows()) / design.n() as f64;
    let a = c_yu * reginv.dense();
    let residuals = &resp - design.rows() * a.transpose();
    let intercept = ybar - &a * ubar;
    Ok(FofEstimate { horizon: data.horizon, a, intercept, residuals, k: reginv.k, tau: reginv.tau, reginv, design })
}

/// Scores `<resid_t, theta> U_t` for the scalarized response.
pub fn fof_scores(est: &FofEstimate, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
    if theta.len() != est.residuals.ncols() {
        return Err(Error::DimensionMismatch { expected: est.residuals.ncols(), found: theta.len() });
    }
    Ok(scale_rows(est.design.rows(), &(&est.residuals * theta)))
}

/// Inference on `<A zeta, theta>`; `theta` is given in response coordinates.
pub fn fof_inference(
    est: &FofEstimate,
    lam_theta: &DMatrix<f64>,
    zeta: &ProductElement,
    theta: &DVector<f64>,
    level: f64,
) -> Result<IrfInference> {
    check_direction(&est.design, zeta)?;
    let g = est.reginv.dense() * zeta.coords();
    let psi = (lam_theta * &g).dot(&g);
    let point = est.apply(zeta).dot(theta);
    let (ci_low, ci_high) = interval(point, psi, zeta.inner(zeta)? * theta.norm_squared(), est.t_eff(), level)?;
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

/// Reduced-form VAR(1) fitted on `U_t = (y_t, X_t)` with the regularized
/// inverse of the lagged covariance.
#[derive(Debug, Clone)]
pub struct RfvarEstimate {
    pub model: ReducedModel,
    pub intercept: DVector<f64>,
    pub k: usize,
    pub tau: f64,
}

pub fn estimate_rfvar(y: &DVector<f64>, x: &DMatrix<f64>, basis: Arc<BasisSpec>, opts: &EstimateOptions) -> Result<RfvarEstimate> {
    let t = y.len();
    if t < 4 {
        return Err(Error::InsufficientData { needed: 4, got: t });
    }
    let full = Panel::new(basis.clone(), &DMatrix::from_column_slice(t, 1, y.as_slice()), x)?;
    let lagged = full.slice(0, t - 1);
    let current = full.slice(1, t - 1);
    let fit = fof_estimate(&FofData::new(1, current.rows().clone(), lagged)?, opts)?;
    let n = fit.residuals.nrows() as f64;
    let cov = fit.residuals.tr_mul(&fit.residuals) / n;
    let gamma = OperatorMatrix::from_dense(1, basis.clone(), fit.a)?;
    let sigma_eps = OperatorMatrix::from_dense(1, basis, (&cov + cov.transpose()) * 0.5)?;
    Ok(RfvarEstimate { model: ReducedModel { gamma, sigma_eps }, intercept: fit.intercept, k: fit.k, tau: fit.tau })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis() -> Arc<BasisSpec> {
        BasisSpec::fourier(3).unwrap()
    }

    #[test]
    fn invert_b_is_inverse() {
        let b = StructuralModel::contemporaneous(basis(), &DVector::from_vec(vec![0.3, -0.2, 0.1]), &DVector::from_vec(vec![0.5, 0.4, -1.0]))
            .unwrap();
        let inv = invert_b(&b).unwrap();
        let id = inv.compose(&b).unwrap();
        assert!((id.dense() - DMatrix::identity(4, 4)).amax() < 1e-14);
    }

    #[test]
    fn singular_structure_detected() {
        let b = StructuralModel::contemporaneous(basis(), &DVector::from_vec(vec![1.0, 0.0, 0.0]), &DVector::from_vec(vec![1.0, 0.0, 0.0]))
            .unwrap();
        assert!(matches!(invert_b(&b), Err(Error::SingularStructure { .. })));
    }

    #[test]
    fn spectral_radius_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.9, -0.5, 0.2, 0.0]));
        let op = OperatorMatrix::from_dense(1, basis(), m).unwrap();
        assert!((spectral_radius(&op) - 0.9).abs() < 1e-3);
        let rot = DMatrix::from_row_slice(4, 4, &[0.0, -0.8, 0.0, 0.0, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0, 0.1]);
        let op = OperatorMatrix::from_dense(1, basis(), rot).unwrap();
        assert!((spectral_radius(&op) - 0.8).abs() < 1e-3);
    }

    #[test]
    fn sirf_zero_is_b_inverse() {
        let b = StructuralModel::contemporaneous(basis(), &DVector::zeros(3), &DVector::from_vec(vec![0.5, 0.4, -1.0])).unwrap();
        let a = OperatorMatrix::from_dense(1, basis(), DMatrix::from_fn(4, 4, |i, j| if i == j { 0.5 } else { 0.05 })).unwrap();
        let s = StructuralModel { b: b.clone(), a, sigma11: 1.0, sigma22: DMatrix::identity(3, 3) };
        let r = structural_to_reduced(&s).unwrap();
        let binv = invert_b(&b).unwrap();
        let table = sirf(&r, &binv, 4).unwrap();
        assert_eq!(table.responses[0].dense(), binv.dense());
        let want = r.gamma.power(3).compose(&binv).unwrap();
        assert!((table.responses[3].dense() - want.dense()).amax() < 1e-14);
    }
}
