//! Empirical covariance operators, Schur complements, spectral cutoffs and
//! the regularized block inverse.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{same_basis, BasisSpec, OperatorMatrix, ProductElement};

/// rcond floor for the scalar block in the symmetric case.
pub const RCOND_SCALAR: f64 = 1e-12;
/// rcond floor for the scalar block of the cross covariance.
pub const RCOND_INSTRUMENT: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-10;

/// A sample of product-space elements stored row-wise in isometric coordinates.
#[derive(Debug, Clone)]
pub struct Panel {
    m: usize,
    basis: Arc<BasisSpec>,
    rows: DMatrix<f64>,
}

impl Panel {
    /// `w` is `n x m`; `x` holds basis coefficients, `n x J`.
    pub fn new(basis: Arc<BasisSpec>, w: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<Self> {
        let j = basis.dim();
        if x.ncols() != j {
            return Err(Error::DimensionMismatch { expected: j, found: x.ncols() });
        }
        if w.nrows() != x.nrows() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), found: w.nrows() });
        }
        let m = w.ncols();
        let n = x.nrows();
        let mut rows = DMatrix::zeros(n, m + j);
        rows.view_mut((0, 0), (n, m)).copy_from(w);
        let mut xs = x.clone();
        if let BasisSpec::RawGrid { weights, .. } = basis.as_ref() {
            for (mut col, wt) in xs.column_iter_mut().zip(weights) {
                col *= wt.sqrt();
            }
        }
        rows.view_mut((0, m), (n, j)).copy_from(&xs);
        Ok(Self { m, basis, rows })
    }

    pub fn from_elements(elems: &[ProductElement]) -> Result<Self> {
        let first = elems.first().ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
        let m = first.m();
        let basis = first.basis().clone();
        let p = m + basis.dim();
        let mut rows = DMatrix::zeros(elems.len(), p);
        for (t, e) in elems.iter().enumerate() {
            same_basis(&basis, e.basis())?;
            if e.m() != m {
                return Err(Error::DimensionMismatch { expected: m, found: e.m() });
            }
            rows.set_row(t, &e.coords().transpose());
        }
        Ok(Self { m, basis, rows })
    }

    /// Wrap coordinate rows directly.
    pub fn from_coords(m: usize, basis: Arc<BasisSpec>, rows: DMatrix<f64>) -> Result<Self> {
        if rows.ncols() != m + basis.dim() {
            return Err(Error::DimensionMismatch { expected: m + basis.dim(), found: rows.ncols() });
        }
        Ok(Self { m, basis, rows })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn j(&self) -> usize {
        self.basis.dim()
    }

    pub fn p(&self) -> usize {
        self.rows.ncols()
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn basis(&self) -> &Arc<BasisSpec> {
        &self.basis
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn element(&self, t: usize) -> ProductElement {
        ProductElement::from_coords(self.m, self.basis.clone(), &self.rows.row(t).transpose())
            .expect("panel rows match their basis")
    }

    /// Rows `start..start+len`.
    pub fn slice(&self, start: usize, len: usize) -> Panel {
        Panel { m: self.m, basis: self.basis.clone(), rows: self.rows.rows(start, len).into_owned() }
    }

    pub fn column_means(&self) -> DVector<f64> {
        self.rows.row_mean().transpose()
    }
}

/// Subtract column means in place and return them.
pub(crate) fn center(rows: &mut DMatrix<f64>) -> DVector<f64> {
    let mean = rows.row_mean();
    for mut r in rows.row_iter_mut() {
        r -= &mean;
    }
    mean.transpose()
}

pub(crate) fn center_vec(v: &mut DVector<f64>) -> f64 {
    let mean = v.mean();
    v.add_scalar_mut(-mean);
    mean
}

/// Second-moment operators of a sample, possibly against an instrument.
///
/// `c` maps the regressor space into the instrument space (or into itself in
/// the symmetric case) and `c_y` is the cross moment with the response.
#[derive(Debug, Clone)]
pub struct CovarianceBundle {
    pub m: usize,
    pub basis: Arc<BasisSpec>,
    pub t: usize,
    pub c: DMatrix<f64>,
    pub c_y: Option<DVector<f64>>,
    pub instrumented: bool,
}

impl CovarianceBundle {
    /// `C_UU = T^-1 sum U U^T` and `C_Uy = T^-1 sum y U` from already centered data.
    pub fn from_centered(panel: &Panel, y: Option<&DVector<f64>>) -> Result<Self> {
        let n = panel.n();
        if n == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let x = panel.rows();
        let c = x.tr_mul(x) / n as f64;
        let c_y = match y {
            Some(y) => {
                if y.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: y.len() });
                }
                Some(x.tr_mul(y) / n as f64)
            }
            None => None,
        };
        Ok(Self { m: panel.m(), basis: panel.basis().clone(), t: n, c, c_y, instrumented: false })
    }

    /// Cross moments `C_ZU = T^-1 sum Z U^T` and `C_Zy` from centered data.
    pub fn cross_from_centered(z: &Panel, x: &Panel, y: Option<&DVector<f64>>) -> Result<Self> {
        same_basis(z.basis(), x.basis())?;
        if z.n() != x.n() {
            return Err(Error::DimensionMismatch { expected: x.n(), found: z.n() });
        }
        if z.m() != x.m() {
            return Err(Error::DimensionMismatch { expected: x.m(), found: z.m() });
        }
        let n = x.n();
        if n == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let c = z.rows().tr_mul(x.rows()) / n as f64;
        let c_y = match y {
            Some(y) => {
                if y.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: y.len() });
                }
                Some(z.rows().tr_mul(y) / n as f64)
            }
            None => None,
        };
        Ok(Self { m: x.m(), basis: x.basis().clone(), t: n, c, c_y, instrumented: true })
    }

    pub fn j(&self) -> usize {
        self.c.nrows() - self.m
    }

    pub fn block11(&self) -> DMatrix<f64> {
        self.c.view((0, 0), (self.m, self.m)).into_owned()
    }

    pub fn block12(&self) -> DMatrix<f64> {
        self.c.view((0, self.m), (self.m, self.j())).into_owned()
    }

    pub fn block21(&self) -> DMatrix<f64> {
        self.c.view((self.m, 0), (self.j(), self.m)).into_owned()
    }

    pub fn block22(&self) -> DMatrix<f64> {
        self.c.view((self.m, self.m), (self.j(), self.j())).into_owned()
    }

    pub fn operator(&self) -> OperatorMatrix {
        OperatorMatrix::from_dense(self.m, self.basis.clone(), self.c.clone()).expect("square by construction")
    }

    pub fn hs_norm(&self) -> f64 {
        self.c.norm()
    }
}

/// Sample covariances of `(y_t, U_t)` pairs.
pub fn empirical_covariances(y: &[f64], upsilon: &[ProductElement], demean: bool) -> Result<CovarianceBundle> {
    if y.len() != upsilon.len() {
        return Err(Error::DimensionMismatch { expected: upsilon.len(), found: y.len() });
    }
    let mut panel = Panel::from_elements(upsilon)?;
    let mut yv = DVector::from_column_slice(y);
    if demean {
        center(&mut panel.rows);
        center_vec(&mut yv);
    }
    CovarianceBundle::from_centered(&panel, Some(&yv))
}

fn rcond(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = a.singular_values();
    let max = sv.max();
    if max <= 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

/// Inverse of the scalar block after the conditioning check.
fn block11_inverse(b: &CovarianceBundle) -> Result<DMatrix<f64>> {
    let c11 = b.block11();
    if c11.is_empty() {
        return Ok(c11);
    }
    let rc = rcond(&c11);
    let floor = if b.instrumented { RCOND_INSTRUMENT } else { RCOND_SCALAR };
    if !(rc >= floor) {
        return Err(if b.instrumented {
            Error::WeakInstrument(format!("scalar cross-covariance block has rcond {rc:.3e}"))
        } else {
            Error::IllConditioned { rcond: rc }
        });
    }
    c11.lu().try_inverse().ok_or(Error::IllConditioned { rcond: rc })
}

/// `C22 - C21 C11^-1 C12`.
pub fn schur_complement(bundle: &CovarianceBundle) -> Result<DMatrix<f64>> {
    let inv = block11_inverse(bundle)?;
    let s = bundle.block22() - bundle.block21() * inv * bundle.block12();
    Ok(if bundle.instrumented { s } else { (&s + s.transpose()) * 0.5 })
}

/// Ordered eigen- or singular-pairs before any cutoff.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Descending eigenvalues (symmetric) or singular values.
    pub values: DVector<f64>,
    /// Columns are the input-side vectors (eigenvectors, or right singular vectors).
    pub left_vectors: DMatrix<f64>,
    /// Columns are output-side singular vectors; `None` for the symmetric case.
    pub right_vectors: Option<DMatrix<f64>>,
}

/// A spectrum truncated at `k` components via the threshold `tau` on squared values.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: DVector<f64>,
    pub left_vectors: DMatrix<f64>,
    pub right_vectors: Option<DMatrix<f64>>,
    pub k: usize,
    pub tau: f64,
}

fn sign_index(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// Flip signs so that the largest-magnitude coordinate of each column is positive.
fn orient(left: &mut DMatrix<f64>, mut right: Option<&mut DMatrix<f64>>) {
    for c in 0..left.ncols() {
        let col = left.column(c).into_owned();
        if col[sign_index(&col)] < 0.0 {
            left.column_mut(c).neg_mut();
            if let Some(r) = right.as_deref_mut() {
                r.column_mut(c).neg_mut();
            }
        }
    }
}

pub fn spectrum_sym(s: &DMatrix<f64>) -> Result<Spectrum> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch { expected: s.nrows(), found: s.ncols() });
    }
    let scale = s.amax().max(1.0);
    let deviation = (s - s.transpose()).amax();
    if deviation > SYMMETRY_TOL * scale {
        return Err(Error::Asymmetric { deviation });
    }
    let eig = SymmetricEigen::new(s.clone());
    let mut order: Vec<usize> = (0..s.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let mut left = eig.eigenvectors.select_columns(&order);
    orient(&mut left, None);
    Ok(Spectrum { values, left_vectors: left, right_vectors: None })
}

pub fn spectrum_svd(s: &DMatrix<f64>) -> Result<Spectrum> {
    let svd = SVD::new(s.clone(), true, true);
    let u = svd.u.ok_or_else(|| Error::Data("svd failed".into()))?;
    let vt = svd.v_t.ok_or_else(|| Error::Data("svd failed".into()))?;
    let n = svd.singular_values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| svd.singular_values[i]));
    let mut left = vt.transpose().select_columns(&order);
    let mut right = u.select_columns(&order);
    orient(&mut left, Some(&mut right));
    Ok(Spectrum { values, left_vectors: left, right_vectors: Some(right) })
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Retain `K = max{j : lambda_j^2 >= tau}` leading components.
    pub fn with_tau(self, tau: f64) -> Result<EigenSystem> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be positive and finite, got {tau}")));
        }
        let k = self.values.iter().take_while(|&&v| v > 0.0 && v * v >= tau).count();
        if k == 0 {
            let leading = self.values.get(0).map(|v| v * v).unwrap_or(0.0);
            return Err(Error::DegenerateCutoff { tau, leading });
        }
        Ok(EigenSystem {
            values: self.values,
            left_vectors: self.left_vectors,
            right_vectors: self.right_vectors,
            k,
            tau,
        })
    }

    /// Retain exactly `k` leading components; `tau` is reported as `lambda_k^2`.
    pub fn with_rank(self, k: usize) -> Result<EigenSystem> {
        if k == 0 || k > self.dim() {
            return Err(Error::InvalidArgument(format!("fixed K must lie in 1..={}, got {k}", self.dim())));
        }
        let vk = self.values[k - 1];
        if !(vk > 0.0) {
            return Err(Error::DegenerateCutoff { tau: 0.0, leading: self.values[0].powi(2) });
        }
        Ok(EigenSystem {
            tau: vk * vk,
            values: self.values,
            left_vectors: self.left_vectors,
            right_vectors: self.right_vectors,
            k,
        })
    }
}

pub fn eigensystem_sym(s: &DMatrix<f64>, tau: f64) -> Result<EigenSystem> {
    spectrum_sym(s)?.with_tau(tau)
}

pub fn eigensystem_svd(s: &DMatrix<f64>, tau: f64) -> Result<EigenSystem> {
    spectrum_svd(s)?.with_tau(tau)
}

impl EigenSystem {
    /// The truncated inverse `sum_{j<=K} lambda_j^-1 phi_j (x) psi_j`.
    pub fn truncated_inverse(&self) -> DMatrix<f64> {
        let k = self.k;
        let left = self.left_vectors.columns(0, k);
        let right = self.right_vectors.as_ref().map(|r| r.columns(0, k)).unwrap_or(left);
        let mut scaled = left.into_owned();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col /= self.values[j];
        }
        scaled * right.transpose()
    }

    /// Projection onto the span of the first `K` input-side vectors.
    pub fn projection(&self) -> DMatrix<f64> {
        let v = self.left_vectors.columns(0, self.k);
        v * v.transpose()
    }
}

/// How the cutoff is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauRule {
    /// Data-driven threshold from the eigengap decay.
    Auto,
    Fixed(f64),
    FixedK(usize),
}

/// Which operator is regularized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseMode {
    /// Spectral cutoff on the Schur complement.
    Schur,
    /// Principal components of the functional block alone.
    Pca,
}

/// Constants of the data-driven threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauConfig {
    pub scale: f64,
    /// Largest index inspected for the eigengap decay.
    pub max_index: usize,
    /// Lower bound imposed on the decay exponent.
    pub rho_floor: f64,
}

impl Default for TauConfig {
    fn default() -> Self {
        Self { scale: 0.01, max_index: 5, rho_floor: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauChoice {
    pub tau: f64,
    pub rho_star: Option<f64>,
    pub rho_tilde: f64,
}

/// Decay exponent implied by the gap at 1-based index `j >= 2`.
pub fn rho_star_at(values: &[f64], j: usize) -> Option<f64> {
    if j < 2 || j >= values.len() {
        return None;
    }
    let gap = values[j - 1].powi(2) - values[j].powi(2);
    if !(gap > 0.0) {
        return None;
    }
    Some(-gap.ln() / (j as f64).ln() - 1.0)
}

/// Threshold `scale * ||C||_HS * T^(-rho/(rho+2))` with `rho` read off the eigengaps.
pub fn select_tau(values: &[f64], t: usize, hs_norm: f64, cfg: &TauConfig) -> Result<TauChoice> {
    let upper = cfg.max_index.min(values.len().saturating_sub(1));
    let rho_star = (2..=upper).filter_map(|j| rho_star_at(values, j)).fold(None, |acc: Option<f64>, r| {
        Some(acc.map_or(r, |a| a.max(r)))
    });
    let rho_star = rho_star.ok_or(Error::DegenerateGap)?;
    let rho_tilde = ((100.0 * rho_star).ceil() / 100.0).max(cfg.rho_floor);
    Ok(TauChoice { tau: tau_formula(rho_tilde, t, hs_norm, cfg), rho_star: Some(rho_star), rho_tilde })
}

fn tau_formula(rho: f64, t: usize, hs_norm: f64, cfg: &TauConfig) -> f64 {
    cfg.scale * hs_norm * (t as f64).powf(-rho / (rho + 2.0))
}

/// Resolve a rule into a truncated spectrum. A degenerate gap under the
/// automatic rule falls back to the floor exponent.
pub fn apply_rule(spectrum: Spectrum, rule: TauRule, t: usize, hs_norm: f64, cfg: &TauConfig) -> Result<EigenSystem> {
    match rule {
        TauRule::Fixed(tau) => spectrum.with_tau(tau),
        TauRule::FixedK(k) => spectrum.with_rank(k),
        TauRule::Auto => {
            let vals: Vec<f64> = spectrum.values.iter().copied().collect();
            let tau = match select_tau(&vals, t, hs_norm, cfg) {
                Ok(c) => c.tau,
                Err(Error::DegenerateGap) => tau_formula(cfg.rho_floor, t, hs_norm, cfg),
                Err(e) => return Err(e),
            };
            spectrum.with_tau(tau)
        }
    }
}

/// Origin of a regularized inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Schur,
    Pca,
    Instrumental,
}

#[derive(Debug, Clone)]
pub struct RegularizedInverse {
    pub op: OperatorMatrix,
    pub k: usize,
    pub tau: f64,
    pub provenance: Provenance,
}

impl RegularizedInverse {
    pub fn dense(&self) -> &DMatrix<f64> {
        self.op.dense()
    }
}

fn assemble(b: &CovarianceBundle, inv11: &DMatrix<f64>, sinv: &DMatrix<f64>) -> DMatrix<f64> {
    let m = b.m;
    let j = b.j();
    let a12 = inv11 * b.block12();
    let a21 = b.block21() * inv11;
    let r12 = -(&a12 * sinv);
    let r21 = -(sinv * &a21);
    let r11 = inv11 - &r12 * &a21;
    let mut out = DMatrix::zeros(m + j, m + j);
    out.view_mut((0, 0), (m, m)).copy_from(&r11);
    out.view_mut((0, m), (m, j)).copy_from(&r12);
    out.view_mut((m, 0), (j, m)).copy_from(&r21);
    out.view_mut((m, m), (j, j)).copy_from(sinv);
    out
}

/// Block inverse with the Schur complement replaced by its truncated inverse,
/// or (PCA mode) the exact inverse of the covariance restricted to the scalar
/// block plus the leading `K` eigenvectors of the functional block.
pub fn regularized_inverse(bundle: &CovarianceBundle, eig: &EigenSystem, mode: InverseMode) -> Result<RegularizedInverse> {
    if bundle.instrumented {
        return regularized_inverse_iv(bundle, eig);
    }
    check_eig(bundle, eig)?;
    let inv11 = block11_inverse(bundle)?;
    let (mat, provenance) = match mode {
        InverseMode::Schur => (assemble(bundle, &inv11, &eig.truncated_inverse()), Provenance::Schur),
        InverseMode::Pca => {
            let m = bundle.m;
            let k = eig.k;
            let p = bundle.c.nrows();
            let mut e = DMatrix::zeros(p, m + k);
            e.view_mut((0, 0), (m, m)).fill_with_identity();
            e.view_mut((m, m), (bundle.j(), k)).copy_from(&eig.left_vectors.columns(0, k));
            let restricted = e.tr_mul(&bundle.c) * &e;
            let rc = rcond(&restricted);
            let inv = restricted.lu().try_inverse().filter(|_| rc > RCOND_SCALAR).ok_or(Error::IllConditioned { rcond: rc })?;
            (&e * inv * e.transpose(), Provenance::Pca)
        }
    };
    let op = OperatorMatrix::from_dense(bundle.m, bundle.basis.clone(), mat)?;
    Ok(RegularizedInverse { op, k: eig.k, tau: eig.tau, provenance })
}

/// Regularized inverse of a cross covariance, driven by the singular system
/// of its Schur complement.
pub fn regularized_inverse_iv(bundle: &CovarianceBundle, eig: &EigenSystem) -> Result<RegularizedInverse> {
    check_eig(bundle, eig)?;
    if eig.right_vectors.is_none() {
        return Err(Error::InvalidArgument("instrumental inverse needs a singular system".into()));
    }
    let inv11 = block11_inverse(bundle)?;
    let mat = assemble(bundle, &inv11, &eig.truncated_inverse());
    let op = OperatorMatrix::from_dense(bundle.m, bundle.basis.clone(), mat)?;
    Ok(RegularizedInverse { op, k: eig.k, tau: eig.tau, provenance: Provenance::Instrumental })
}

fn check_eig(bundle: &CovarianceBundle, eig: &EigenSystem) -> Result<()> {
    if eig.left_vectors.nrows() != bundle.j() {
        return Err(Error::DimensionMismatch { expected: bundle.j(), found: eig.left_vectors.nrows() });
    }
    Ok(())
}

/// Spectral cutoff and regularized inverse in one step.
pub fn regularize(bundle: &CovarianceBundle, rule: TauRule, mode: InverseMode, cfg: &TauConfig) -> Result<RegularizedInverse> {
    let hs = bundle.hs_norm();
    if bundle.instrumented {
        let s = schur_complement(bundle)?;
        let spectrum = spectrum_svd(&s)?;
        let eig = match apply_rule(spectrum, rule, bundle.t, hs, cfg) {
            Err(Error::DegenerateCutoff { tau, leading }) => {
                return Err(Error::WeakInstrument(format!(
                    "leading squared singular value {leading:.3e} below tau {tau:.3e}"
                )))
            }
            other => other?,
        };
        return regularized_inverse_iv(bundle, &eig);
    }
    let target = match mode {
        InverseMode::Schur => schur_complement(bundle)?,
        InverseMode::Pca => bundle.block22(),
    };
    let eig = apply_rule(spectrum_sym(&target)?, rule, bundle.t, hs, cfg)?;
    regularized_inverse(bundle, &eig, mode)
}

/// `C_K^-1 C`, the operator that projects onto the retained directions.
pub fn projection_operator(bundle: &CovarianceBundle, inv: &RegularizedInverse) -> DMatrix<f64> {
    inv.dense() * &bundle.c
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_panel(seed: u64, n: usize, m: usize, j: usize) -> Panel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = BasisSpec::fourier(j).unwrap();
        let x = DMatrix::from_fn(n, j, |_, c| rng.random_range(-1.0..1.0) * 0.8f64.powi(c as i32));
        let w = DMatrix::from_fn(n, m, |t, _| rng.random_range(-1.0..1.0) + 0.5 * x[(t, 0)]);
        Panel::new(basis, &w, &x).unwrap()
    }

    #[test]
    fn tau_rule_worked_example() {
        // lambda_j^2 = j^-3
        let values: Vec<f64> = (1..=8).map(|j| (j as f64).powf(-1.5)).collect();
        let r2 = rho_star_at(&values, 2).unwrap();
        let gap: f64 = 1.0 / 8.0 - 1.0 / 27.0;
        assert!((r2 - (-gap.ln() / 2f64.ln() - 1.0)).abs() < 1e-14);
        assert!((r2 - 2.506_959).abs() < 1e-5);
        assert_eq!((100.0 * r2).ceil() / 100.0, 2.51);
        assert!(rho_star_at(&values, 1).is_none());
        // maximum over j = 2..=5 of -ln(j^-3 - (j+1)^-3)/ln j - 1
        let oracle = (2..=5)
            .map(|j: i32| {
                let gap = (j as f64).powi(-3) - ((j + 1) as f64).powi(-3);
                -gap.ln() / (j as f64).ln() - 1.0
            })
            .fold(f64::MIN, f64::max);
        let choice = select_tau(&values, 400, 1.0, &TauConfig::default()).unwrap();
        assert!((choice.rho_star.unwrap() - oracle).abs() < 1e-14);
        assert_eq!(choice.rho_tilde, 2.54);
        let expected = 0.01 * 400f64.powf(-2.54 / 4.54);
        assert!((choice.tau - expected).abs() < 1e-15);
        let doubled = select_tau(&values, 400, 2.0, &TauConfig::default()).unwrap();
        assert_eq!(doubled.tau, 2.0 * choice.tau);
    }

    #[test]
    fn flat_spectrum_has_degenerate_gap() {
        let values = [1.0; 6];
        assert!(matches!(select_tau(&values, 100, 1.0, &TauConfig::default()), Err(Error::DegenerateGap)));
    }

    #[test]
    fn schur_equals_residual_covariance() {
        let mut panel = random_panel(3, 200, 2, 7);
        center(&mut panel.rows);
        let b = CovarianceBundle::from_centered(&panel, None).unwrap();
        let s = schur_complement(&b).unwrap();
        let w = panel.rows().columns(0, 2).into_owned();
        let x = panel.rows().columns(2, 7).into_owned();
        let coef = (w.tr_mul(&w)).lu().solve(&w.tr_mul(&x)).unwrap();
        let resid = &x - &w * coef;
        let direct = resid.tr_mul(&resid) / 200.0;
        assert!((s - direct).amax() < 1e-12);
    }

    #[test]
    fn full_rank_cutoff_is_exact_inverse() {
        let mut panel = random_panel(5, 300, 1, 5);
        center(&mut panel.rows);
        let b = CovarianceBundle::from_centered(&panel, None).unwrap();
        let s = schur_complement(&b).unwrap();
        let eig = spectrum_sym(&s).unwrap().with_rank(5).unwrap();
        let r = regularized_inverse(&b, &eig, InverseMode::Schur).unwrap();
        let exact = b.c.clone().try_inverse().unwrap();
        assert!((r.dense() - &exact).amax() < 1e-8 * exact.amax());
    }

    #[test]
    fn eigenvectors_have_positive_dominant_entry() {
        let mut panel = random_panel(8, 100, 1, 7);
        center(&mut panel.rows);
        let b = CovarianceBundle::from_centered(&panel, None).unwrap();
        let sp = spectrum_sym(&b.block22()).unwrap();
        for c in 0..6 {
            let col = sp.left_vectors.column(c).into_owned();
            assert!(col[sign_index(&col)] > 0.0);
        }
        assert!(sp.values.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn asymmetric_input_rejected() {
        let mut s = DMatrix::<f64>::identity(3, 3);
        s[(0, 1)] = 1e-6;
        assert!(matches!(spectrum_sym(&s), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn tau_above_leading_eigenvalue_is_degenerate() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.1]));
        assert!(matches!(eigensystem_sym(&s, 1.0), Err(Error::DegenerateCutoff { .. })));
        let e = eigensystem_sym(&s, 0.01).unwrap();
        assert_eq!(e.k, 2);
        let e = eigensystem_sym(&s, 0.011).unwrap();
        assert_eq!(e.k, 1);
    }

    #[test]
    fn svd_of_psd_matches_symmetric() {
        let mut panel = random_panel(11, 150, 1, 5);
        center(&mut panel.rows);
        let b = CovarianceBundle::from_centered(&panel, None).unwrap();
        let s = schur_complement(&b).unwrap();
        let a = spectrum_sym(&s).unwrap();
        let v = spectrum_svd(&s).unwrap();
        assert!((&a.values - &v.values).amax() < 1e-12);
        assert!((&a.left_vectors - &v.left_vectors).amax() < 1e-8);
        assert!((&v.left_vectors - v.right_vectors.as_ref().unwrap()).amax() < 1e-8);
    }

    #[test]
    fn collinear_scalar_block_is_ill_conditioned() {
        let basis = BasisSpec::fourier(3).unwrap();
        let w = DMatrix::from_fn(10, 2, |t, _| t as f64);
        let x = DMatrix::from_fn(10, 3, |t, c| ((t * 7 + c * 3) % 5) as f64);
        let mut panel = Panel::new(basis, &w, &x).unwrap();
        center(&mut panel.rows);
        let b = CovarianceBundle::from_centered(&panel, None).unwrap();
        assert!(matches!(schur_complement(&b), Err(Error::IllConditioned { .. })));
    }
}
