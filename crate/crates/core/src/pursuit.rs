//! Orthogonal matching pursuit.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{lstsq_normal, lstsq_svd};
use crate::{DadlError, Result};

/// Column norms may deviate from one by at most this much.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Relative residual at which pursuit stops early by default.
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-9;

/// A coefficient vector with at most `cap` nonzeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    values: DVector<f64>,
    cap: usize,
}

impl SparseCode {
    pub fn new(values: DVector<f64>, cap: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DadlError::DimensionMismatch("sparse code has non-finite entries".into()));
        }
        let nnz = values.iter().filter(|v| **v != 0.0).count();
        if nnz > cap {
            return Err(DadlError::Config(format!(
                "sparse code has {nnz} nonzeros, cap is {cap}"
            )));
        }
        Ok(Self { values, cap })
    }

    pub fn zeros(len: usize, cap: usize) -> Self {
        Self {
            values: DVector::zeros(len),
            cap,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Full pursuit trace, for callers that need more than the code.
#[derive(Debug, Clone)]
pub struct OmpTrace {
    pub code: SparseCode,
    /// Atoms in the order they were selected.
    pub selected: Vec<usize>,
    /// Residual norm before the first step and after every step.
    pub residual_norms: Vec<f64>,
    pub residual: DVector<f64>,
}

/// `1e-9 · ‖y‖`.
pub fn default_residual_tol(y: &DVector<f64>) -> f64 {
    DEFAULT_RELATIVE_TOL * y.norm()
}

pub fn check_unit_columns(dict: &DMatrix<f64>) -> Result<()> {
    for (i, col) in dict.column_iter().enumerate() {
        let norm = col.norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(DadlError::NonNormalizedDictionary { column: i, norm });
        }
    }
    Ok(())
}

/// Sparse code of `y` over a unit-norm dictionary with at most `t` atoms.
pub fn omp(dict: &DMatrix<f64>, y: &DVector<f64>, t: usize, residual_tol: f64) -> Result<SparseCode> {
    omp_trace(dict, y, t, residual_tol).map(|tr| tr.code)
}

/// [`omp`] returning the selection order and residual history.
pub fn omp_trace(dict: &DMatrix<f64>, y: &DVector<f64>, t: usize, residual_tol: f64) -> Result<OmpTrace> {
    if dict.nrows() != y.len() {
        return Err(DadlError::DimensionMismatch(format!(
            "dictionary has {} rows, signal has length {}",
            dict.nrows(),
            y.len()
        )));
    }
    check_unit_columns(dict)?;
    let k = dict.ncols();
    let budget = t.min(k);

    let mut residual = y.clone();
    let mut selected: Vec<usize> = Vec::with_capacity(budget);
    let mut in_support = vec![false; k];
    let mut coefs = DVector::zeros(0);
    let mut norms = vec![residual.norm()];

    while selected.len() < budget && *norms.last().unwrap() > residual_tol {
        let corr = dict.tr_mul(&residual);
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in corr.iter().enumerate() {
            if in_support[i] {
                continue;
            }
            let a = c.abs();
            // strict comparison keeps the lowest index on ties
            if best.is_none_or(|(_, b)| a > b) {
                best = Some((i, a));
            }
        }
        let Some((atom, score)) = best else { break };
        if score <= f64::EPSILON * norms[0] {
            break;
        }
        selected.push(atom);
        in_support[atom] = true;

        let sub = dict.select_columns(&selected);
        let prev = *norms.last().unwrap();
        let mut next = lstsq_normal(&sub, y);
        let mut r = y - &sub * &next;
        if r.norm() > prev {
            // near-singular normal equations
            next = lstsq_svd(&sub, y);
            r = y - &sub * &next;
        }
        if r.norm() > prev {
            selected.pop();
            in_support[atom] = false;
            break;
        }
        coefs = next;
        residual = r;
        norms.push(residual.norm());
    }

    let mut values = DVector::zeros(k);
    for (&i, &c) in selected.iter().zip(coefs.iter()) {
        values[i] = c;
    }
    Ok(OmpTrace {
        code: SparseCode::new(values, t)?,
        selected,
        residual_norms: norms,
        residual,
    })
}

/// Rescale columns to unit norm. Returns the normalized matrix and the
/// original norms; zero columns are left as zero with norm 0.
pub fn normalize_columns(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.ncols());
    for mut col in out.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
        norms.push(n);
    }
    (out, norms)
}

/// Number of ways to choose `t` of `k` atoms.
pub fn binomial(k: usize, t: usize) -> u128 {
    if t > k {
        return 0;
    }
    let t = t.min(k - t);
    let mut acc: u128 = 1;
    for i in 0..t {
        acc = acc * (k - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Best code with at most `t` nonzeros over all supports, by least squares
/// on each. The dictionary need not be normalized.
///
/// Only supports of size `min(t, K)` are tried; any smaller support is
/// contained in one of them and cannot fit better. Fails with
/// [`DadlError::TooLarge`] when there are more than `limit` supports.
pub fn exhaustive_pursuit(dict: &DMatrix<f64>, y: &DVector<f64>, t: usize, limit: u128) -> Result<DVector<f64>> {
    if dict.nrows() != y.len() {
        return Err(DadlError::DimensionMismatch(format!(
            "dictionary has {} rows, signal has length {}",
            dict.nrows(),
            y.len()
        )));
    }
    let k = dict.ncols();
    let size = t.min(k);
    let count = binomial(k, size);
    if count > limit {
        return Err(DadlError::TooLarge(count));
    }
    let mut best = DVector::zeros(k);
    let mut best_err = y.norm_squared();
    if size == 0 {
        return Ok(best);
    }
    let mut support: Vec<usize> = (0..size).collect();
    loop {
        let sub = dict.select_columns(&support);
        let coef = lstsq_svd(&sub, y);
        let err = (y - &sub * &coef).norm_squared();
        if err < best_err {
            best_err = err;
            best = DVector::zeros(k);
            for (&i, &c) in support.iter().zip(coef.iter()) {
                best[i] = c;
            }
        }
        if !next_combination(&mut support, k) {
            break;
        }
    }
    Ok(best)
}

fn next_combination(c: &mut [usize], k: usize) -> bool {
    let t = c.len();
    let mut i = t;
    while i > 0 {
        i -= 1;
        if c[i] < k - t + i {
            c[i] += 1;
            for j in i + 1..t {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_unit_dict(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        normalize_columns(&m).0
    }

    #[test]
    fn exact_atom_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = random_unit_dict(&mut rng, 8, 10);
        let y = d.column(5) * 3.0;
        for t in 1..4 {
            let tr = omp_trace(&d, &y, t, default_residual_tol(&y)).unwrap();
            assert_eq!(tr.selected, vec![5]);
            assert!((tr.code.values()[5] - 3.0).abs() < 1e-12);
            assert!(tr.residual.norm() < 1e-12);
        }
    }

    #[test]
    fn zero_signal_selects_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = random_unit_dict(&mut rng, 6, 10);
        let tr = omp_trace(&d, &DVector::zeros(6), 3, 0.0).unwrap();
        assert!(tr.selected.is_empty());
        assert_eq!(tr.code.nnz(), 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            omp(&d, &DVector::from_vec(vec![1.0, 1.0]), 1, 0.0),
            Err(DadlError::NonNormalizedDictionary { column: 0, .. })
        ));
        let id = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(
            omp(&id, &DVector::from_vec(vec![1.0, 1.0, 1.0]), 1, 0.0),
            Err(DadlError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let id = DMatrix::<f64>::identity(3, 3);
        let y = DVector::from_vec(vec![0.0, 1.0, 1.0]);
        let tr = omp_trace(&id, &y, 1, 0.0).unwrap();
        assert_eq!(tr.selected, vec![1]);
    }

    #[test]
    fn residual_is_orthogonal_to_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = random_unit_dict(&mut rng, 12, 20);
        let y = DVector::from_fn(12, |_, _| rng.sample::<f64, _>(StandardNormal));
        let tr = omp_trace(&d, &y, 5, 0.0).unwrap();
        assert_eq!(tr.selected.len(), 5);
        for &i in &tr.selected {
            assert!(d.column(i).dot(&tr.residual).abs() < 1e-8);
        }
    }

    #[test]
    fn sparse_code_enforces_cap() {
        let v = DVector::from_vec(vec![1.0, 0.0, 2.0]);
        assert!(SparseCode::new(v.clone(), 1).is_err());
        let c = SparseCode::new(v, 2).unwrap();
        assert_eq!(c.support(), vec![0, 2]);
    }
}
