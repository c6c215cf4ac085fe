//! Small dense helpers shared by the numeric modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative eigenvalue / squared-singular-value cutoff below which a direction
/// counts as null.
pub(crate) const PINV_CUTOFF: f64 = 1e-12;

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
pub(crate) fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_abs(&(a - b))
}

/// Eigen-decomposition of a symmetric matrix; a 0x0 input yields empty factors.
pub(crate) fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    if m.nrows() == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    (eig.eigenvalues, eig.eigenvectors)
}

/// Symmetric square root of a PSD matrix, negative round-off eigenvalues
/// clamped to zero.
pub(crate) fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(m);
    let roots = vals.map(|v| v.max(0.0).sqrt());
    &vecs * DMatrix::from_diagonal(&roots) * vecs.transpose()
}

/// Numerical rank of an arbitrary matrix: singular values above
/// `rel_tol * largest` are counted.
#[cfg(test)]
pub(crate) fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0f64, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Rank of a symmetric PSD matrix counted by eigenvalues above
/// `rel_tol * max(largest, 1)`.
pub(crate) fn psd_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let (vals, _) = sym_eigen(m);
    let top = vals.iter().cloned().fold(1.0f64, f64::max);
    vals.iter().filter(|&&v| v > rel_tol * top).count()
}

/// Thin factorization `a ~= u * diag(s) * v^T` keeping only singular values
/// whose square exceeds `PINV_CUTOFF` times the larger of the top square and
/// `floor`.
pub(crate) struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn truncated_svd(a: &DMatrix<f64>, floor: f64) -> TruncatedSvd {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return TruncatedSvd {
            u: DMatrix::zeros(m, 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(n, 0),
        };
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sv = &svd.singular_values;
    let top = sv.iter().cloned().fold(0.0f64, f64::max);
    let reference = (top * top).max(floor);
    let keep: Vec<usize> = (0..sv.len())
        .filter(|&i| reference > 0.0 && sv[i] * sv[i] > PINV_CUTOFF * reference)
        .collect();
    let mut uk = DMatrix::zeros(m, keep.len());
    let mut vk = DMatrix::zeros(n, keep.len());
    let mut sk = DVector::zeros(keep.len());
    for (col, &i) in keep.iter().enumerate() {
        uk.set_column(col, &u.column(i));
        vk.set_column(col, &v_t.row(i).transpose());
        sk[col] = sv[i];
    }
    TruncatedSvd { u: uk, s: sk, v: vk }
}
