//! Separable Hilbert spaces of functions on [0, 1] and the product space
//! `R^m x H` used for mixed scalar/functional regressors.
//!
//! Every element carries a shared [`BasisSpec`]. Arithmetic between
//! elements whose bases differ is rejected. Internally each element is
//! mapped to isometric coordinates: for an orthonormal basis these are the
//! coefficients, for a raw grid they are values scaled by the square roots
//! of the quadrature weights. All operator algebra happens in those
//! coordinates, so the Euclidean inner product of coordinate vectors is the
//! inner product of the underlying functions.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Representation of the function space.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisSpec {
    /// Orthonormal Fourier basis ordered by frequency:
    /// `1, sqrt2 sin(2 pi r), sqrt2 cos(2 pi r), sqrt2 sin(4 pi r), ...`.
    Fourier { dim: usize },
    /// Point values on a sorted grid with trapezoidal quadrature weights.
    RawGrid { grid: Vec<f64>, weights: Vec<f64> },
}

impl BasisSpec {
    pub fn fourier(dim: usize) -> Result<Arc<Self>> {
        if dim % 2 == 0 {
            return Err(Error::InvalidArgument(format!("Fourier dimension must be odd and positive, got {dim}")));
        }
        Ok(Arc::new(BasisSpec::Fourier { dim }))
    }

    pub fn raw_grid(grid: Vec<f64>) -> Result<Arc<Self>> {
        if grid.len() < 2 {
            return Err(Error::InvalidArgument("raw grid needs at least two points".into()));
        }
        if grid.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidArgument("raw grid must be strictly increasing".into()));
        }
        if grid[0] < 0.0 || grid[grid.len() - 1] > 1.0 {
            return Err(Error::InvalidArgument("raw grid must lie within [0, 1]".into()));
        }
        let weights = trapezoid_weights(&grid);
        Ok(Arc::new(BasisSpec::RawGrid { grid, weights }))
    }

    /// `n` equispaced points spanning `[lo, hi]` inclusive.
    pub fn equispaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![lo];
        }
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn dim(&self) -> usize {
        match self {
            BasisSpec::Fourier { dim } => *dim,
            BasisSpec::RawGrid { grid, .. } => grid.len(),
        }
    }

    /// Square roots of the quadrature weights, or ones for an orthonormal basis.
    fn coord_scale(&self) -> Option<Vec<f64>> {
        match self {
            BasisSpec::Fourier { .. } => None,
            BasisSpec::RawGrid { weights, .. } => Some(weights.iter().map(|w| w.sqrt()).collect()),
        }
    }

    /// Value of the `j`-th (zero based) Fourier basis function at `r`.
    pub fn fourier_fn(j: usize, r: f64) -> f64 {
        if j == 0 {
            return 1.0;
        }
        let k = ((j + 1) / 2) as f64;
        let arg = 2.0 * PI * k * r;
        if j % 2 == 1 {
            2f64.sqrt() * arg.sin()
        } else {
            2f64.sqrt() * arg.cos()
        }
    }

    /// Matrix of Fourier basis values, rows indexed by `points`.
    pub fn fourier_design(dim: usize, points: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(points.len(), dim, |i, j| Self::fourier_fn(j, points[i]))
    }
}

fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { grid[i] - grid[i - 1] } else { 0.0 };
            let right = if i + 1 < n { grid[i + 1] - grid[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

pub(crate) fn same_basis(a: &Arc<BasisSpec>, b: &Arc<BasisSpec>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::BasisMismatch)
    }
}

/// An element of the function space `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionElement {
    basis: Arc<BasisSpec>,
    coeffs: DVector<f64>,
}

impl FunctionElement {
    pub fn new(basis: Arc<BasisSpec>, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), found: coeffs.len() });
        }
        Ok(Self { basis, coeffs })
    }

    pub fn zeros(basis: Arc<BasisSpec>) -> Self {
        let n = basis.dim();
        Self { basis, coeffs: DVector::zeros(n) }
    }

    /// The constant function `c`.
    pub fn constant(basis: Arc<BasisSpec>, c: f64) -> Self {
        Self::affine(basis, c, 0.0)
    }

    /// The function `r -> a + b r`, projected onto the basis exactly.
    pub fn affine(basis: Arc<BasisSpec>, a: f64, b: f64) -> Self {
        let coeffs = match basis.as_ref() {
            BasisSpec::Fourier { dim } => DVector::from_fn(*dim, |j, _| {
                if j == 0 {
                    a + 0.5 * b
                } else if j % 2 == 1 {
                    // <r, sqrt2 sin(2 pi k r)> = -sqrt2 / (2 pi k)
                    let k = ((j + 1) / 2) as f64;
                    -b * 2f64.sqrt() / (2.0 * PI * k)
                } else {
                    0.0
                }
            }),
            BasisSpec::RawGrid { grid, .. } => DVector::from_iterator(grid.len(), grid.iter().map(|r| a + b * r)),
        };
        Self { basis, coeffs }
    }

    /// Build from isometric coordinates.
    pub fn from_coords(basis: Arc<BasisSpec>, coords: DVector<f64>) -> Result<Self> {
        let mut coeffs = coords;
        if coeffs.len() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), found: coeffs.len() });
        }
        if let Some(s) = basis.coord_scale() {
            for (c, s) in coeffs.iter_mut().zip(s) {
                *c = if s > 0.0 { *c / s } else { 0.0 };
            }
        }
        Ok(Self { basis, coeffs })
    }

    pub fn basis(&self) -> &Arc<BasisSpec> {
        &self.basis
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Isometric coordinates of the element.
    pub fn coords(&self) -> DVector<f64> {
        match self.basis.coord_scale() {
            None => self.coeffs.clone(),
            Some(s) => self.coeffs.component_mul(&DVector::from_vec(s)),
        }
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        same_basis(&self.basis, &other.basis)?;
        Ok(match self.basis.as_ref() {
            BasisSpec::Fourier { .. } => self.coeffs.dot(&other.coeffs),
            BasisSpec::RawGrid { weights, .. } => self
                .coeffs
                .iter()
                .zip(other.coeffs.iter())
                .zip(weights)
                .map(|((a, b), w)| a * b * w)
                .sum(),
        })
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).map(f64::sqrt).unwrap_or(f64::NAN)
    }

    /// Pointwise evaluation. Raw grids interpolate linearly and clamp outside.
    pub fn eval(&self, r: f64) -> f64 {
        match self.basis.as_ref() {
            BasisSpec::Fourier { .. } => self
                .coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * BasisSpec::fourier_fn(j, r))
                .sum(),
            BasisSpec::RawGrid { grid, .. } => {
                let n = grid.len();
                if r <= grid[0] {
                    return self.coeffs[0];
                }
                if r >= grid[n - 1] {
                    return self.coeffs[n - 1];
                }
                let i = grid.partition_point(|g| *g <= r) - 1;
                let s = (r - grid[i]) / (grid[i + 1] - grid[i]);
                self.coeffs[i] * (1.0 - s) + self.coeffs[i + 1] * s
            }
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_basis(&self.basis, &other.basis)?;
        Ok(Self { basis: self.basis.clone(), coeffs: &self.coeffs + &other.coeffs })
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { basis: self.basis.clone(), coeffs: &self.coeffs * a }
    }
}

/// An element `(w, x)` of `R^m x H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductElement {
    pub w: DVector<f64>,
    pub x: FunctionElement,
}

impl ProductElement {
    pub fn new(w: DVector<f64>, x: FunctionElement) -> Self {
        Self { w, x }
    }

    /// Element with a zero scalar part.
    pub fn functional(m: usize, x: FunctionElement) -> Self {
        Self { w: DVector::zeros(m), x }
    }

    pub fn m(&self) -> usize {
        self.w.len()
    }

    pub fn basis(&self) -> &Arc<BasisSpec> {
        self.x.basis()
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        if self.m() != other.m() {
            return Err(Error::DimensionMismatch { expected: self.m(), found: other.m() });
        }
        Ok(self.w.dot(&other.w) + self.x.inner(&other.x)?)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).map(f64::sqrt).unwrap_or(f64::NAN)
    }

    /// Stacked isometric coordinates `(w, coords(x))`.
    pub fn coords(&self) -> DVector<f64> {
        let xc = self.x.coords();
        let mut v = DVector::zeros(self.m() + xc.len());
        v.rows_mut(0, self.m()).copy_from(&self.w);
        v.rows_mut(self.m(), xc.len()).copy_from(&xc);
        v
    }

    pub fn from_coords(m: usize, basis: Arc<BasisSpec>, v: &DVector<f64>) -> Result<Self> {
        let j = basis.dim();
        if v.len() != m + j {
            return Err(Error::DimensionMismatch { expected: m + j, found: v.len() });
        }
        let w = v.rows(0, m).into_owned();
        let x = FunctionElement::from_coords(basis, v.rows(m, j).into_owned())?;
        Ok(Self { w, x })
    }
}

/// The rank-one operator `a (x) b : c -> <a, c> b`.
pub fn tensor(a: &ProductElement, b: &ProductElement) -> Result<OperatorMatrix> {
    same_basis(a.basis(), b.basis())?;
    if a.m() != b.m() {
        return Err(Error::DimensionMismatch { expected: a.m(), found: b.m() });
    }
    let mat = b.coords() * a.coords().transpose();
    Ok(OperatorMatrix { m: a.m(), basis: a.basis().clone(), mat })
}

/// Bounded linear operator on `R^m x H`, stored in isometric coordinates and
/// viewed as the 2x2 block operator `[[A11, A12], [A21, A22]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    m: usize,
    basis: Arc<BasisSpec>,
    mat: DMatrix<f64>,
}

impl OperatorMatrix {
    pub fn from_dense(m: usize, basis: Arc<BasisSpec>, mat: DMatrix<f64>) -> Result<Self> {
        let n = m + basis.dim();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: mat.nrows().max(mat.ncols()) });
        }
        Ok(Self { m, basis, mat })
    }

    pub fn from_blocks(
        basis: Arc<BasisSpec>,
        a11: &DMatrix<f64>,
        a12: &DMatrix<f64>,
        a21: &DMatrix<f64>,
        a22: &DMatrix<f64>,
    ) -> Result<Self> {
        let m = a11.nrows();
        let j = basis.dim();
        let shapes = [
            (a11.shape(), (m, m)),
            (a12.shape(), (m, j)),
            (a21.shape(), (j, m)),
            (a22.shape(), (j, j)),
        ];
        for (got, want) in shapes {
            if got != want {
                return Err(Error::DimensionMismatch { expected: want.0 * want.1, found: got.0 * got.1 });
            }
        }
        let mut mat = DMatrix::zeros(m + j, m + j);
        mat.view_mut((0, 0), (m, m)).copy_from(a11);
        mat.view_mut((0, m), (m, j)).copy_from(a12);
        mat.view_mut((m, 0), (j, m)).copy_from(a21);
        mat.view_mut((m, m), (j, j)).copy_from(a22);
        Ok(Self { m, basis, mat })
    }

    pub fn identity(m: usize, basis: Arc<BasisSpec>) -> Self {
        let n = m + basis.dim();
        Self { m, basis, mat: DMatrix::identity(n, n) }
    }

    pub fn zeros(m: usize, basis: Arc<BasisSpec>) -> Self {
        let n = m + basis.dim();
        Self { m, basis, mat: DMatrix::zeros(n, n) }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn j(&self) -> usize {
        self.mat.nrows() - self.m
    }

    pub fn basis(&self) -> &Arc<BasisSpec> {
        &self.basis
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_dense(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn a11(&self) -> DMatrix<f64> {
        self.mat.view((0, 0), (self.m, self.m)).into_owned()
    }

    pub fn a12(&self) -> DMatrix<f64> {
        self.mat.view((0, self.m), (self.m, self.j())).into_owned()
    }

    pub fn a21(&self) -> DMatrix<f64> {
        self.mat.view((self.m, 0), (self.j(), self.m)).into_owned()
    }

    pub fn a22(&self) -> DMatrix<f64> {
        self.mat.view((self.m, self.m), (self.j(), self.j())).into_owned()
    }

    pub fn apply(&self, v: &ProductElement) -> Result<ProductElement> {
        same_basis(&self.basis, v.basis())?;
        if v.m() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, found: v.m() });
        }
        ProductElement::from_coords(self.m, self.basis.clone(), &(&self.mat * v.coords()))
    }

    /// `self . other`, i.e. apply `other` first.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self { m: self.m, basis: self.basis.clone(), mat: &self.mat * &other.mat })
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m, basis: self.basis.clone(), mat: self.mat.transpose() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self { m: self.m, basis: self.basis.clone(), mat: &self.mat + &other.mat })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self { m: self.m, basis: self.basis.clone(), mat: &self.mat - &other.mat })
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { m: self.m, basis: self.basis.clone(), mat: &self.mat * a }
    }

    /// `self^h`, with `self^0` the identity.
    pub fn power(&self, h: usize) -> Self {
        let mut out = Self::identity(self.m, self.basis.clone());
        for _ in 0..h {
            out.mat = &out.mat * &self.mat;
        }
        out
    }

    /// Hilbert-Schmidt norm.
    pub fn hs_norm(&self) -> f64 {
        self.mat.norm()
    }

    fn check(&self, other: &Self) -> Result<()> {
        same_basis(&self.basis, &other.basis)?;
        if self.m != other.m {
            return Err(Error::DimensionMismatch { expected: self.m, found: other.m });
        }
        Ok(())
    }
}
