//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{DadlError, Result};

/// Condition numbers above this are treated as singular when no ridge is set.
pub const SINGULAR_CONDITION: f64 = 1e13;

/// Ridge-regularized pseudo-inverse, always of shape `cols x rows`.
///
/// Tall or square input: `(mᵀm + ridge·I)⁻¹ mᵀ`. Wide input:
/// `mᵀ(mmᵀ + ridge·I)⁻¹`. With `ridge = 0` and full rank this is the
/// Moore-Penrose pseudo-inverse.
pub fn ridge_pinv(m: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    if m.is_empty() {
        return Err(DadlError::DimensionMismatch("pseudo-inverse of an empty matrix".into()));
    }
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(DadlError::Config(format!("ridge must be a finite nonnegative value, got {ridge}")));
    }
    let tall = m.nrows() >= m.ncols();
    let mut gram = if tall { m.tr_mul(m) } else { m * m.transpose() };
    if ridge == 0.0 {
        let cond = condition_estimate(&gram);
        if cond.is_nan() || cond > SINGULAR_CONDITION {
            return Err(DadlError::SingularMatrix(cond));
        }
    } else {
        for i in 0..gram.nrows() {
            gram[(i, i)] += ridge;
        }
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| DadlError::SingularMatrix(condition_estimate(&gram)))?;
    if tall {
        Ok(chol.solve(&m.transpose()))
    } else {
        Ok(chol.solve(m).transpose())
    }
}

/// `factor · trace(G) / dim(G)` for the smaller Gram matrix of `m`.
pub fn relative_ridge(m: &DMatrix<f64>, factor: f64) -> f64 {
    let k = m.nrows().min(m.ncols()).max(1);
    factor * m.norm_squared() / k as f64
}

/// Ratio of extreme eigenvalues of a symmetric positive semidefinite matrix.
pub fn condition_estimate(gram: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if max <= 0.0 {
        return f64::INFINITY;
    }
    if min <= 0.0 {
        return f64::INFINITY;
    }
    max / min
}

/// Least squares `min ‖a x − y‖` via the normal equations.
///
/// Falls back to a `1e-12`-scaled ridge when the Gram matrix is not
/// numerically positive definite.
pub fn lstsq_normal(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let gram = a.tr_mul(a);
    let rhs = a.tr_mul(y);
    if let Some(ch) = gram.clone().cholesky() {
        let x = ch.solve(&rhs);
        if x.iter().all(|v| v.is_finite()) {
            return x;
        }
    }
    let scale = (gram.trace() / gram.nrows().max(1) as f64).max(f64::MIN_POSITIVE);
    let mut reg = gram;
    for i in 0..reg.nrows() {
        reg[(i, i)] += 1e-12 * scale;
    }
    match reg.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => lstsq_svd(a, y),
    }
}

/// Minimum-norm least squares via SVD. Handles rank-deficient systems.
pub fn lstsq_svd(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = smax * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    svd.solve(y, eps)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Leading left singular vector of `e` by power iteration on `e eᵀ`, warm
/// started at `init`.
///
/// For a positive semidefinite operator the Rayleigh quotient never
/// decreases along power iterates, so the returned vector explains at least
/// as much of `e` as `init` did.
pub fn leading_left_singular(
    e: &DMatrix<f64>,
    init: &DVector<f64>,
    max_iter: usize,
    tol: f64,
) -> DVector<f64> {
    let mut u = init.clone();
    let n0 = u.norm();
    if n0 > 0.0 {
        u /= n0;
    } else {
        u = DVector::from_element(e.nrows(), 1.0 / (e.nrows() as f64).sqrt());
    }
    for _ in 0..max_iter {
        let v = e.tr_mul(&u);
        let mut next = e * v;
        let nn = next.norm();
        if nn == 0.0 {
            break;
        }
        next /= nn;
        let delta = (&next - &u).norm();
        u = next;
        if delta < tol {
            break;
        }
    }
    u
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order; eigenvectors are the columns of the returned matrix.
pub fn symmetric_eigen_desc(m: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}
