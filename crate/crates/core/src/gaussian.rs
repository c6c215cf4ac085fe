//! Multivariate Gaussians with possibly singular covariance: conditioning on
//! linear constraints, variances of linear functionals, scalar differential
//! entropy and seeded sampling.
//!
//! Conditioning on `M x = y` uses the regular conditional law
//!
//! ```text
//! mean' = mu + S M^T (M S M^T)^+ (y - M mu)
//! cov'  = S - S M^T (M S M^T)^+ M S
//! ```
//!
//! where `^+` is the pseudo-inverse with eigenvalues below `1e-12` times the
//! largest one treated as zero, so dependent constraint rows are harmless.
//! It is evaluated as `B (I - P) B` with `B = S^{1/2}` and `P` the orthogonal
//! projector onto the column space of `B M^T`, which is the same matrix and
//! costs one thin SVD of an `n x k` matrix however many rows `M` has.
//!
//! Sampling uses ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64`) with
//! standard normals from `rand_distr::StandardNormal`, pushed through
//! `Q diag(sqrt(lambda))` of the eigendecomposition `S = Q diag(lambda) Q^T`.

use std::cmp::Ordering;
use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, max_asymmetry, psd_sqrt, sym_eigen, symmetrize, truncated_svd, PINV_CUTOFF};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const VARIANCE_CLAMP: f64 = 1e-12;
const CONSISTENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianVector {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianVector {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: covariance.nrows() });
        }
        if mean.iter().chain(covariance.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite mean or covariance entry".into()));
        }
        let scale = max_abs(&covariance).max(1.0);
        let asym = max_asymmetry(&covariance);
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let (vals, _) = sym_eigen(&covariance);
        let top = vals.iter().cloned().fold(1.0f64, f64::max);
        let bottom = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if n > 0 && bottom < -PSD_TOL * top {
            return Err(Error::NotPositiveSemidefinite(bottom));
        }
        Ok(GaussianVector { mean, covariance: symmetrize(&covariance) })
    }

    /// Mean zero, unit-free zero covariance in `dim` coordinates.
    pub fn point_mass(mean: DVector<f64>) -> Self {
        let n = mean.len();
        GaussianVector { mean, covariance: DMatrix::zeros(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Law of `T x` for a `k x n` matrix `T`.
    pub fn linear_map(&self, t: &DMatrix<f64>) -> Result<GaussianVector> {
        if t.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: t.ncols() });
        }
        Ok(GaussianVector {
            mean: t * &self.mean,
            covariance: symmetrize(&(t * &self.covariance * t.transpose())),
        })
    }

    /// The pair `(x, y)` of independent vectors as one vector of dimension
    /// `dim(x) + dim(y)` with block-diagonal covariance.
    pub fn stack_independent(&self, other: &GaussianVector) -> GaussianVector {
        let (n, m) = (self.dim(), other.dim());
        let mut mean = DVector::zeros(n + m);
        mean.rows_mut(0, n).copy_from(&self.mean);
        mean.rows_mut(n, m).copy_from(&other.mean);
        let mut cov = DMatrix::zeros(n + m, n + m);
        cov.view_mut((0, 0), (n, n)).copy_from(&self.covariance);
        cov.view_mut((n, n), (m, m)).copy_from(&other.covariance);
        GaussianVector { mean, covariance: cov }
    }

    pub fn sampler(&self, seed: u64) -> Sampler {
        let (vals, vecs) = sym_eigen(&self.covariance);
        let roots = vals.map(|v| v.max(0.0).sqrt());
        Sampler {
            mean: self.mean.clone(),
            factor: vecs * DMatrix::from_diagonal(&roots),
            rng: ChaCha20Rng::seed_from_u64(seed),
            z: DVector::zeros(self.dim()),
        }
    }

    /// `count` draws as the rows of a `count x dim` matrix.
    pub fn sample(&self, count: usize, seed: u64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(count, self.dim());
        let mut s = self.sampler(seed);
        for i in 0..count {
            out.set_row(i, &s.draw().transpose());
        }
        out
    }
}

/// Deterministic stream of draws from a [`GaussianVector`].
#[derive(Debug, Clone)]
pub struct Sampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
    rng: ChaCha20Rng,
    z: DVector<f64>,
}

impl Sampler {
    pub fn draw(&mut self) -> DVector<f64> {
        for z in self.z.iter_mut() {
            *z = StandardNormal.sample(&mut self.rng);
        }
        &self.mean + &self.factor * &self.z
    }
}

impl Iterator for Sampler {
    type Item = DVector<f64>;

    fn next(&mut self) -> Option<DVector<f64>> {
        Some(self.draw())
    }
}

/// Rows of linear functionals that are required to vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    rows: DMatrix<f64>,
}

impl ConstraintSet {
    pub fn new(rows: DMatrix<f64>) -> Self {
        ConstraintSet { rows }
    }

    pub fn empty(dim: usize) -> Self {
        ConstraintSet { rows: DMatrix::zeros(0, dim) }
    }

    pub fn from_rows(dim: usize, rows: &[DVector<f64>]) -> Result<Self> {
        let mut m = DMatrix::zeros(rows.len(), dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
            }
            m.set_row(i, &r.transpose());
        }
        Ok(ConstraintSet { rows: m })
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn stacked(&self, other: &ConstraintSet) -> Result<ConstraintSet> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        let mut m = DMatrix::zeros(self.len() + other.len(), self.dim());
        m.view_mut((0, 0), (self.len(), self.dim())).copy_from(&self.rows);
        m.view_mut((self.len(), 0), (other.len(), self.dim())).copy_from(&other.rows);
        Ok(ConstraintSet { rows: m })
    }
}

pub fn independent_gaussian(variances: &[f64]) -> Result<GaussianVector> {
    for (index, &value) in variances.iter().enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::NonpositiveVariance { index, value });
        }
    }
    let n = variances.len();
    Ok(GaussianVector {
        mean: DVector::zeros(n),
        covariance: DMatrix::from_diagonal(&DVector::from_column_slice(variances)),
    })
}

/// Law of `x + y` for independent `x`, `y`.
pub fn sum_independent(g1: &GaussianVector, g2: &GaussianVector) -> Result<GaussianVector> {
    if g1.dim() != g2.dim() {
        return Err(Error::DimensionMismatch { expected: g1.dim(), found: g2.dim() });
    }
    Ok(GaussianVector {
        mean: &g1.mean + &g2.mean,
        covariance: &g1.covariance + &g2.covariance,
    })
}

pub fn condition_on_zero(g: &GaussianVector, m: &ConstraintSet) -> Result<GaussianVector> {
    condition_on_value(g, m, &DVector::zeros(m.len()))
}

/// Conditional law of `x` given `M x = values`.
pub fn condition_on_value(
    g: &GaussianVector,
    m: &ConstraintSet,
    values: &DVector<f64>,
) -> Result<GaussianVector> {
    if m.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), found: m.dim() });
    }
    if values.len() != m.len() {
        return Err(Error::DimensionMismatch { expected: m.len(), found: values.len() });
    }
    if m.is_empty() {
        return Ok(g.clone());
    }
    let root = psd_sqrt(&g.covariance);
    let a = &root * m.rows.transpose();
    // Constraint directions whose variance is round-off relative to the
    // covariance and row magnitudes are treated as already satisfied.
    let row_norm_sq = m.rows.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
    let svd = truncated_svd(&a, max_abs(&g.covariance) * row_norm_sq);
    let offset = values - &m.rows * &g.mean;

    let explained = &svd.v * (svd.v.transpose() * &offset);
    let unexplained = (&offset - &explained).amax();
    let scale = offset.amax().max(values.amax()).max(1.0);
    if unexplained > CONSISTENCY_TOL * scale + PINV_CUTOFF.sqrt() * offset.amax() {
        return Err(Error::InconsistentConstraint(unexplained));
    }

    let inv_s = svd.s.map(|s| 1.0 / s);
    let coords = DMatrix::from_diagonal(&inv_s) * (svd.v.transpose() * &offset);
    let mean = &g.mean + &root * (&svd.u * coords);
    let projector = &svd.u * svd.u.transpose();
    let identity = DMatrix::identity(g.dim(), g.dim());
    let covariance = symmetrize(&(&root * (identity - projector) * &root));
    Ok(GaussianVector { mean, covariance })
}

/// `c^T S c`; round-off negatives down to `-1e-12` are returned as 0.
pub fn linear_functional_variance(g: &GaussianVector, c: &DVector<f64>) -> Result<f64> {
    if c.len() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), found: c.len() });
    }
    let v = (c.transpose() * &g.covariance * c)[(0, 0)];
    Ok(if (-VARIANCE_CLAMP..0.0).contains(&v) { 0.0 } else { v })
}

/// Differential entropy of a scalar Gaussian. A variance collapsed to zero
/// has no density and is reported as [`Entropy::Degenerate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Entropy {
    Finite(f64),
    Degenerate,
}

impl Entropy {
    pub fn nats(self) -> Option<f64> {
        match self {
            Entropy::Finite(h) => Some(h),
            Entropy::Degenerate => None,
        }
    }

    pub fn bits(self) -> Option<f64> {
        self.nats().map(|h| h / std::f64::consts::LN_2)
    }

    pub fn is_degenerate(self) -> bool {
        matches!(self, Entropy::Degenerate)
    }
}

impl PartialOrd for Entropy {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Entropy::Degenerate, Entropy::Degenerate) => Some(Ordering::Equal),
            (Entropy::Degenerate, Entropy::Finite(_)) => Some(Ordering::Less),
            (Entropy::Finite(_), Entropy::Degenerate) => Some(Ordering::Greater),
            (Entropy::Finite(a), Entropy::Finite(b)) => a.partial_cmp(b),
        }
    }
}

/// `0.5 * ln(2 pi e variance)` nats, or `Degenerate` when `variance <= tol`.
pub fn entropy_scalar(variance: f64, tol: f64) -> Result<Entropy> {
    if variance.is_nan() || variance < 0.0 {
        return Err(Error::NegativeVariance(variance));
    }
    if variance <= tol {
        return Ok(Entropy::Degenerate);
    }
    Ok(Entropy::Finite(0.5 * (2.0 * PI * E * variance).ln()))
}
