use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::covops::Panel;
use crate::error::{Error, Result};
use crate::flp::LpData;
use crate::fsvar::{invert_b, spectral_radius, structural_to_reduced, ReducedModel, StructuralModel};
use crate::hilbert::{BasisSpec, FunctionElement, ProductElement};

/// Independent stream for replication `rep` under `master_seed`.
pub fn rep_rng(master_seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(rep);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(format!("config: {}", msg.into()))
}

/// A data-generating process usable by the Monte Carlo runners.
pub trait Dgp: Sync {
    type Path: Send;

    fn basis(&self) -> Arc<BasisSpec>;
    fn simulate(&self, rng: &mut ChaCha8Rng) -> Result<Self::Path>;
    /// Projection data for horizon `h` with `w_t = y_t`.
    fn lp_data(&self, path: &Self::Path, h: usize) -> Result<LpData>;
    /// Population coefficient `theta_h = (alpha_h, beta_h)`.
    fn truth(&self, h: usize) -> Result<ProductElement>;
}

/// Scalar-on-function projection DGP with AR(1) basis coordinates.
///
/// Defaults are synthetic: they are not calibrated to any empirical data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentAConfig {
    pub t: usize,
    pub dim: usize,
    pub burn_in: usize,
    pub ar_coeffs: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub c_e_minus1: f64,
    pub c_u: f64,
    pub tail_decay: f64,
    /// Per-horizon parameters, index `h - 1`.
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub alpha: Vec<f64>,
    pub sigma_u: Vec<f64>,
}

impl Default for ExperimentAConfig {
    fn default() -> Self {
        let dim = 31;
        Self {
            t: 250,
            dim,
            burn_in: 200,
            ar_coeffs: (0..dim).map(|j| 0.8 - 0.5 * j as f64 / (dim - 1) as f64).collect(),
            sigmas: (1..=dim).map(|j| 0.75f64.powi(j as i32)).collect(),
            c_e_minus1: 1.0,
            c_u: 0.5,
            tail_decay: 0.7,
            beta1: vec![1.0, 0.85, 0.7, 0.55, 0.45, 0.35],
            beta2: vec![-0.8, -0.65, -0.5, -0.4, -0.3, -0.25],
            alpha: vec![0.5, 0.4, 0.3, 0.25, 0.2, 0.15],
            sigma_u: vec![1.0; 6],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentA {
    pub cfg: ExperimentAConfig,
    basis: Arc<BasisSpec>,
}

/// One simulated path: functional coordinates and a response series per horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentAPath {
    pub x: DMatrix<f64>,
    pub y: Vec<DVector<f64>>,
}

impl ExperimentA {
    pub fn new(cfg: ExperimentAConfig) -> Result<Self> {
        let j = cfg.dim;
        if j < 2 {
            return Err(config_error("dim must be at least 2"));
        }
        if cfg.ar_coeffs.len() != j || cfg.sigmas.len() != j {
            return Err(config_error(format!("ar_coeffs and sigmas need {j} entries")));
        }
        if cfg.ar_coeffs.iter().any(|a| !(a.abs() < 1.0)) {
            return Err(config_error("AR coefficients must lie in (-1, 1)"));
        }
        if cfg.sigmas.iter().any(|s| !(*s >= 0.0)) {
            return Err(config_error("sigmas must be nonnegative"));
        }
        let h = cfg.beta1.len();
        if h == 0 || cfg.beta2.len() != h || cfg.alpha.len() != h || cfg.sigma_u.len() != h {
            return Err(config_error("beta1, beta2, alpha and sigma_u need one entry per horizon"));
        }
        if cfg.alpha.iter().any(|a| !(a.abs() < 1.0)) {
            return Err(config_error("alpha must lie in (-1, 1)"));
        }
        if cfg.t < 10 {
            return Err(config_error("t must be at least 10"));
        }
        let basis = BasisSpec::fourier(j)?;
        Ok(Self { cfg, basis })
    }

    pub fn horizons(&self) -> usize {
        self.cfg.beta1.len()
    }

    /// Coordinates of `beta_h`.
    pub fn beta(&self, h: usize) -> Result<DVector<f64>> {
        let i = self.index(h)?;
        let (b1, b2) = (self.cfg.beta1[i], self.cfg.beta2[i]);
        let tail = b1.abs().min(b2.abs());
        Ok(DVector::from_fn(self.cfg.dim, |j, _| match j {
            0 => b1,
            1 => b2,
            _ => tail * self.cfg.tail_decay.powi(j as i32 - 1),
        }))
    }

    fn index(&self, h: usize) -> Result<usize> {
        if h == 0 || h > self.horizons() {
            return Err(Error::HorizonOutOfRange { h, remaining: self.horizons() });
        }
        Ok(h - 1)
    }
}

impl Dgp for ExperimentA {
    type Path = ExperimentAPath;

    fn basis(&self) -> Arc<BasisSpec> {
        self.basis.clone()
    }

    fn simulate(&self, rng: &mut ChaCha8Rng) -> Result<ExperimentAPath> {
        let c = &self.cfg;
        let total = c.t + c.burn_in;
        let j = c.dim;
        let scale: Vec<f64> = (0..j).map(|i| c.sigmas[i] * if i == 0 { 1.0 } else { c.c_e_minus1 }).collect();
        let mut x = DMatrix::zeros(total, j);
        for t in 0..total {
            for i in 0..j {
                let prev = if t > 0 { x[(t - 1, i)] } else { 0.0 };
                x[(t, i)] = c.ar_coeffs[i] * prev + scale[i] * normal(rng);
            }
        }
        let mut ys = Vec::with_capacity(self.horizons());
        for h in 1..=self.horizons() {
            let beta = self.beta(h)?;
            let (a, su) = (c.alpha[h - 1], c.c_u * c.sigma_u[h - 1]);
            let xb = &x * &beta;
            let mut y = DVector::zeros(total);
            for t in h..total {
                y[t] = a * y[t - h] + xb[t - h] + su * normal(rng);
            }
            ys.push(y.rows(c.burn_in, c.t).into_owned());
        }
        Ok(ExperimentAPath { x: x.rows(c.burn_in, c.t).into_owned(), y: ys })
    }

    fn lp_data(&self, path: &ExperimentAPath, h: usize) -> Result<LpData> {
        let y = path.y[self.index(h)?].clone();
        let w = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
        let panel = Panel::new(self.basis.clone(), &w, &path.x)?;
        Ok(LpData::new(y, panel)?.with_y_lag_column(0))
    }

    fn truth(&self, h: usize) -> Result<ProductElement> {
        let alpha = self.cfg.alpha[self.index(h)?];
        Ok(ProductElement::new(DVector::from_element(1, alpha), FunctionElement::new(self.basis.clone(), self.beta(h)?)?))
    }
}

/// Recursive SVAR(1) in `(y, x1, x2)` whose functional variable loads `x1`,
/// `x2` on the first two basis functions plus white noise elsewhere.
///
/// Defaults are synthetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentBConfig {
    pub t: usize,
    pub dim: usize,
    pub burn_in: usize,
    /// Lag matrix of the structural system, row-major 3x3.
    pub alpha: [[f64; 3]; 3],
    pub beta1: f64,
    pub beta2: f64,
    /// `sigma_1^2, sigma_2^2, sigma_3^2`.
    pub base_variances: [f64; 3],
    pub noise_decay: f64,
    pub c1: f64,
}

impl Default for ExperimentBConfig {
    fn default() -> Self {
        Self {
            t: 250,
            dim: 31,
            burn_in: 200,
            alpha: [[0.4, 0.3, -0.3], [0.1, 0.4, 0.05], [0.05, 0.05, 0.3]],
            beta1: 0.8,
            beta2: 0.8,
            base_variances: [1.0, 0.5, 0.5],
            noise_decay: 0.8,
            c1: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentB {
    pub cfg: ExperimentBConfig,
    basis: Arc<BasisSpec>,
    /// `B^-1 A` for the three-variable system.
    pub gamma: DMatrix<f64>,
    b_inv: DMatrix<f64>,
    /// Standard deviations of the structural shocks after normalization.
    shock_sd: Vec<f64>,
    noise_sd: Vec<f64>,
    pub c_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentBPath {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
}

impl ExperimentB {
    pub fn new(cfg: ExperimentBConfig) -> Result<Self> {
        if cfg.dim < 3 {
            return Err(config_error("dim must be at least 3"));
        }
        if cfg.base_variances.iter().any(|v| !(*v >= 0.0)) || !(cfg.c1 > 0.0) {
            return Err(config_error("variances and c1 must be positive"));
        }
        let a = DMatrix::from_fn(3, 3, |i, j| cfg.alpha[i][j]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, -cfg.beta1, 1.0, 0.0, -cfg.beta2, 0.0, 1.0]);
        let b_inv = b.try_inverse().expect("unit lower triangular");
        let gamma = &b_inv * a;
        let rho = gamma.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if rho >= 1.0 {
            return Err(config_error(format!("SVAR is not stationary (spectral radius {rho:.4})")));
        }
        let s3 = cfg.base_variances[2].sqrt();
        let noise_var: Vec<f64> = (3..=cfg.dim).map(|j| s3 * cfg.noise_decay.powi(j as i32)).collect();
        let shock_var = [cfg.c1 * cfg.base_variances[0], cfg.base_variances[1], cfg.base_variances[2]];
        let norm = shock_var.iter().chain(noise_var.iter()).map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(config_error("all shock variances are zero"));
        }
        let c_star = 1.0 / norm;
        let basis = BasisSpec::fourier(cfg.dim)?;
        Ok(Self {
            shock_sd: shock_var.iter().map(|v| (c_star * v).sqrt()).collect(),
            noise_sd: noise_var.iter().map(|v| (c_star * v).sqrt()).collect(),
            c_star,
            gamma,
            b_inv,
            basis,
            cfg,
        })
    }

    /// Coordinates of `beta_h` (the scalar row, functional columns of `Gamma^h`).
    pub fn beta(&self, h: usize) -> DVector<f64> {
        let gh = self.gamma.pow(h as u32);
        DVector::from_fn(self.cfg.dim, |j, _| if j < 2 { gh[(0, j + 1)] } else { 0.0 })
    }
}

impl Dgp for ExperimentB {
    type Path = ExperimentBPath;

    fn basis(&self) -> Arc<BasisSpec> {
        self.basis.clone()
    }

    fn simulate(&self, rng: &mut ChaCha8Rng) -> Result<ExperimentBPath> {
        let c = &self.cfg;
        let total = c.t + c.burn_in;
        let mut z = DVector::<f64>::zeros(3);
        let mut y = DVector::zeros(c.t);
        let mut x = DMatrix::zeros(c.t, c.dim);
        for t in 0..total {
            let u = DVector::from_fn(3, |i, _| self.shock_sd[i] * normal(rng));
            z = &self.gamma * &z + &self.b_inv * u;
            let noise: Vec<f64> = self.noise_sd.iter().map(|s| s * normal(rng)).collect();
            if t >= c.burn_in {
                let s = t - c.burn_in;
                y[s] = z[0];
                x[(s, 0)] = z[1];
                x[(s, 1)] = z[2];
                for (j, v) in noise.into_iter().enumerate() {
                    x[(s, j + 2)] = v;
                }
            }
        }
        Ok(ExperimentBPath { y, x })
    }

    fn lp_data(&self, path: &ExperimentBPath, _h: usize) -> Result<LpData> {
        let w = DMatrix::from_column_slice(path.y.len(), 1, path.y.as_slice());
        let panel = Panel::new(self.basis.clone(), &w, &path.x)?;
        Ok(LpData::new(path.y.clone(), panel)?.with_y_lag_column(0))
    }

    fn truth(&self, h: usize) -> Result<ProductElement> {
        let gh = self.gamma.pow(h as u32);
        Ok(ProductElement::new(DVector::from_element(1, gh[(0, 0)]), FunctionElement::new(self.basis.clone(), self.beta(h))?))
    }
}

/// Structural functional VAR(1) on a Fourier basis, simulated in coordinates.
#[derive(Debug, Clone)]
pub struct SvarDgp {
    pub model: StructuralModel,
    pub reduced: ReducedModel,
    pub t: usize,
    pub burn_in: usize,
    shock_root: DMatrix<f64>,
}

/// `(y_t, X_t)` with `X_t` in isometric coordinates.
#[derive(Debug, Clone)]
pub struct SvarPath {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
}

impl SvarDgp {
    pub fn new(model: StructuralModel, t: usize, burn_in: usize) -> Result<Self> {
        let reduced = structural_to_reduced(&model)?;
        let rho = spectral_radius(&reduced.gamma);
        if rho >= 1.0 {
            return Err(config_error(format!("SVAR is not stationary (spectral radius {rho:.4})")));
        }
        if !(model.sigma11 >= 0.0) {
            return Err(config_error("scalar shock variance must be nonnegative"));
        }
        let sym = (&model.sigma22 + model.sigma22.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        if eig.eigenvalues.iter().any(|&v| v < -1e-12 * eig.eigenvalues.amax().max(1.0)) {
            return Err(config_error("functional shock covariance is not positive semidefinite"));
        }
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        Ok(Self { model, reduced, t, burn_in, shock_root: root })
    }

    /// Structural shock `u_t = (u_1t, U_2t)` in coordinates.
    pub fn draw_shock(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let j = self.shock_root.nrows();
        let mut u = DVector::zeros(j + 1);
        u[0] = self.model.sigma11.sqrt() * normal(rng);
        let z = DVector::from_fn(j, |_, _| normal(rng));
        u.rows_mut(1, j).copy_from(&(&self.shock_root * z));
        u
    }

    /// `Gamma U_{t-1} + B^-1 u_t`.
    pub fn propagate(&self, state: &DVector<f64>, shock: &DVector<f64>) -> Result<DVector<f64>> {
        let b_inv = invert_b(&self.model.b)?;
        Ok(self.reduced.gamma.dense() * state + b_inv.dense() * shock)
    }
}

impl Dgp for SvarDgp {
    type Path = SvarPath;

    fn basis(&self) -> Arc<BasisSpec> {
        self.model.b.basis().clone()
    }

    fn simulate(&self, rng: &mut ChaCha8Rng) -> Result<SvarPath> {
        let j = self.shock_root.nrows();
        let gamma = self.reduced.gamma.dense();
        let b_inv = invert_b(&self.model.b)?.into_dense();
        let mut state = DVector::zeros(j + 1);
        let mut y = DVector::zeros(self.t);
        let mut x = DMatrix::zeros(self.t, j);
        for s in 0..self.t + self.burn_in {
            state = gamma * &state + &b_inv * self.draw_shock(rng);
            if s >= self.burn_in {
                let r = s - self.burn_in;
                y[r] = state[0];
                x.row_mut(r).copy_from(&state.rows(1, j).transpose());
            }
        }
        Ok(SvarPath { y, x })
    }

    fn lp_data(&self, path: &SvarPath, _h: usize) -> Result<LpData> {
        let w = DMatrix::from_column_slice(path.y.len(), 1, path.y.as_slice());
        let panel = Panel::new(self.basis(), &w, &path.x)?;
        Ok(LpData::new(path.y.clone(), panel)?.with_y_lag_column(0))
    }

    /// Row of `Gamma^h` for the scalar variable.
    fn truth(&self, h: usize) -> Result<ProductElement> {
        let gh = self.reduced.gamma.power(h);
        let row = gh.dense().row(0).transpose();
        ProductElement::from_coords(1, self.basis(), &row)
    }
}

pub fn simulate_a(cfg: &ExperimentAConfig, master_seed: u64, rep: u64) -> Result<ExperimentAPath> {
    ExperimentA::new(cfg.clone())?.simulate(&mut rep_rng(master_seed, rep))
}

pub fn simulate_b(cfg: &ExperimentBConfig, master_seed: u64, rep: u64) -> Result<ExperimentBPath> {
    ExperimentB::new(cfg.clone())?.simulate(&mut rep_rng(master_seed, rep))
}
