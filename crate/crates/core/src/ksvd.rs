//! K-SVD dictionary learning.
//!
//! Alternates batch sparse coding (OMP) with sequential rank-1 atom updates.
//! Two safeguards make the objective `‖Y − DX‖²_F` non-increasing:
//! a column keeps its previous code when pursuit on the current dictionary
//! does worse, and each rank-1 update is warm-started from the current atom so
//! power iteration can only improve on it. Between iterations, near-duplicate
//! and rarely used atoms are swapped for badly represented signals; the swap
//! is undone if the following iteration ends above the pre-swap objective.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::linalg::leading_left_singular;
use crate::pursuit::{default_residual_tol, omp};
use crate::{DadlError, Result};

const POWER_ITERS: usize = 50;
const POWER_TOL: f64 = 1e-12;
/// Relative squared error treated as an exact fit; iteration stops there.
const EXACT_FIT: f64 = 1e-24;
/// Atoms whose |cosine| with an earlier atom exceeds this are replaced.
const CLEAN_COHERENCE: f64 = 0.99;
/// Atoms used by fewer signals than this are replaced...
const CLEAN_MIN_USERS: usize = 4;
/// ...when there are at least this many signals per atom.
const CLEAN_MIN_SIGNALS_PER_ATOM: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct KsvdConfig {
    pub num_atoms: usize,
    pub sparsity: usize,
    pub iterations: usize,
    pub seed: u64,
    pub replace_unused: bool,
    /// Extra runs from random subsets of the signals; the run with the lowest
    /// final objective wins. Runs stop early once one fits exactly.
    pub restarts: usize,
}

impl KsvdConfig {
    pub fn new(num_atoms: usize, sparsity: usize, iterations: usize, seed: u64) -> Self {
        Self {
            num_atoms,
            sparsity,
            iterations,
            seed,
            replace_unused: true,
            restarts: 0,
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_atoms == 0 || self.sparsity == 0 || self.iterations == 0 {
            return Err(DadlError::Config(format!(
                "k-svd needs num_atoms, sparsity and iterations >= 1 (got {}, {}, {})",
                self.num_atoms, self.sparsity, self.iterations
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KsvdOutput {
    /// `n x K`, unit-norm columns.
    pub dictionary: DMatrix<f64>,
    /// `K x N`, each column with at most `sparsity` nonzeros.
    pub codes: DMatrix<f64>,
    /// `‖Y − DX‖²_F` after every iteration. Shorter than `iterations` when
    /// the fit became exact early.
    pub objective: Vec<f64>,
    /// Set when the input was all zeros; the dictionary is then a seeded
    /// random one and every code is zero.
    pub degenerate: bool,
}

/// Learn a `K`-atom dictionary for the columns of `y`.
///
/// When `y` has more rows than columns the problem is solved in its column
/// space: with `y = U S Vᵀ` (thin SVD), every atom K-SVD can produce lies in
/// the span of `U`, so learning on `S Vᵀ` and mapping atoms back through `U`
/// gives the same dictionaries and codes at a fraction of the cost.
pub fn ksvd_learn(y: &DMatrix<f64>, cfg: &KsvdConfig) -> Result<KsvdOutput> {
    cfg.validate()?;
    check_input(y)?;
    if y.iter().all(|v| *v == 0.0) {
        return Ok(KsvdOutput {
            dictionary: random_orthonormal(y.nrows(), cfg.num_atoms, cfg.seed),
            codes: DMatrix::zeros(cfg.num_atoms, y.ncols()),
            objective: vec![0.0; cfg.iterations],
            degenerate: true,
        });
    }
    if y.nrows() <= y.ncols() {
        return learn_with_restarts(y, cfg);
    }
    let svd = y.clone().svd(true, true);
    let u = svd.u.expect("requested u");
    let vt = svd.v_t.expect("requested v_t");
    let reduced = DMatrix::from_diagonal(&svd.singular_values) * vt;
    let mut out = learn_with_restarts(&reduced, cfg)?;
    out.dictionary = &u * out.dictionary;
    for mut col in out.dictionary.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    Ok(out)
}

fn learn_with_restarts(y: &DMatrix<f64>, cfg: &KsvdConfig) -> Result<KsvdOutput> {
    let exact = EXACT_FIT * y.norm_squared();
    let mut best = ksvd_learn_from(y, cfg, initial_dictionary(y, cfg.num_atoms, cfg.seed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_cafe);
    for _ in 0..cfg.restarts {
        if final_objective(&best) <= exact {
            break;
        }
        let perm = sample(&mut rng, y.ncols(), y.ncols()).into_vec();
        let init = initial_dictionary(&y.select_columns(&perm), cfg.num_atoms, rng.random());
        let run = ksvd_learn_from(y, cfg, init)?;
        if final_objective(&run) < final_objective(&best) {
            best = run;
        }
    }
    Ok(best)
}

fn final_objective(out: &KsvdOutput) -> f64 {
    out.objective.last().copied().unwrap_or(f64::INFINITY)
}

/// K-SVD from a caller-supplied initial dictionary (columns are normalized).
pub fn ksvd_learn_from(y: &DMatrix<f64>, cfg: &KsvdConfig, init: DMatrix<f64>) -> Result<KsvdOutput> {
    cfg.validate()?;
    check_input(y)?;
    if init.nrows() != y.nrows() || init.ncols() != cfg.num_atoms {
        return Err(DadlError::DimensionMismatch(format!(
            "initial dictionary is {}x{}, expected {}x{}",
            init.nrows(),
            init.ncols(),
            y.nrows(),
            cfg.num_atoms
        )));
    }
    let n_signals = y.ncols();
    let mut dict = init;
    for mut col in dict.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let mut codes: DMatrix<f64> = DMatrix::zeros(cfg.num_atoms, n_signals);
    let mut objective = Vec::with_capacity(cfg.iterations);
    let exact = EXACT_FIT * y.norm_squared();
    // State before the last cleaning step, restored if cleaning did not pay off.
    let mut before_clean: Option<(DMatrix<f64>, DMatrix<f64>, f64)> = None;

    for it in 0..cfg.iterations {
        let mut residual = sweep(y, cfg, &mut dict, &mut codes, it == 0)?;
        let mut obj = residual.norm_squared();
        let mut may_clean = true;
        if let Some((d0, c0, o0)) = before_clean.take() {
            if obj > o0 {
                dict = d0;
                codes = c0;
                residual = sweep(y, cfg, &mut dict, &mut codes, false)?;
                obj = residual.norm_squared();
                may_clean = false;
            }
        }
        objective.push(obj);
        if obj <= exact {
            break;
        }
        if may_clean && it + 1 < cfg.iterations {
            let snapshot = (dict.clone(), codes.clone(), obj);
            if clean_dictionary(y, &residual, &mut dict, &mut codes) {
                before_clean = Some(snapshot);
            }
        }
    }

    Ok(KsvdOutput {
        dictionary: dict,
        codes,
        objective,
        degenerate: false,
    })
}

/// One sparse-coding pass and one pass of atom updates. Returns `Y − DX`.
fn sweep(
    y: &DMatrix<f64>,
    cfg: &KsvdConfig,
    dict: &mut DMatrix<f64>,
    codes: &mut DMatrix<f64>,
    first: bool,
) -> Result<DMatrix<f64>> {
    let n_signals = y.ncols();
    let dict_ref = &*dict;
    let codes_ref = &*codes;
    let new_cols: Vec<DVector<f64>> = (0..n_signals)
        .into_par_iter()
        .map(|i| -> Result<DVector<f64>> {
            let yi = y.column(i).into_owned();
            let fresh = omp(dict_ref, &yi, cfg.sparsity, default_residual_tol(&yi))?.into_values();
            if first {
                return Ok(fresh);
            }
            let old = codes_ref.column(i).into_owned();
            let err_new = (&yi - dict_ref * &fresh).norm_squared();
            let err_old = (&yi - dict_ref * &old).norm_squared();
            Ok(if err_new <= err_old { fresh } else { old })
        })
        .collect::<Result<_>>()?;
    for (i, c) in new_cols.into_iter().enumerate() {
        codes.set_column(i, &c);
    }

    let mut residual = y - &*dict * &*codes;
    let mut replaced = vec![false; n_signals];
    for k in 0..cfg.num_atoms {
        let users: Vec<usize> = (0..n_signals).filter(|&i| codes[(k, i)] != 0.0).collect();
        if users.is_empty() {
            if cfg.replace_unused {
                replace_atom(y, &residual, dict, k, &mut replaced);
            }
            continue;
        }
        let atom = dict.column(k).into_owned();
        let mut err = residual.select_columns(&users);
        for (c, &i) in users.iter().enumerate() {
            err.column_mut(c).axpy(codes[(k, i)], &atom, 1.0);
        }
        let u = leading_left_singular(&err, &atom, POWER_ITERS, POWER_TOL);
        let row = err.tr_mul(&u);
        for (c, &i) in users.iter().enumerate() {
            codes[(k, i)] = row[c];
            let mut r = err.column(c).into_owned();
            r.axpy(-row[c], &u, 1.0);
            residual.set_column(i, &r);
        }
        dict.set_column(k, &u);
    }
    Ok(residual)
}

/// Replace near-duplicate atoms, and atoms few signals use, with the
/// worst-represented signals. Codes on replaced atoms are dropped. Returns
/// whether anything changed.
fn clean_dictionary(y: &DMatrix<f64>, residual: &DMatrix<f64>, dict: &mut DMatrix<f64>, codes: &mut DMatrix<f64>) -> bool {
    let (k, n_signals) = codes.shape();
    let check_usage = n_signals >= CLEAN_MIN_SIGNALS_PER_ATOM * k;
    let mut order: Vec<usize> = (0..n_signals).collect();
    let errors: Vec<f64> = residual.column_iter().map(|c| c.norm_squared()).collect();
    order.sort_by(|&a, &b| errors[b].total_cmp(&errors[a]).then(a.cmp(&b)));
    let mut candidates = order.into_iter().filter(|&i| errors[i] > 0.0 && y.column(i).norm() > 0.0);
    let mut changed = false;
    for j in 0..k {
        let users = codes.row(j).iter().filter(|v| **v != 0.0).count();
        let duplicate = (0..j).any(|i| dict.column(i).dot(&dict.column(j)).abs() > CLEAN_COHERENCE);
        if !(duplicate || (check_usage && users < CLEAN_MIN_USERS)) {
            continue;
        }
        let Some(i) = candidates.next() else { break };
        let sig = y.column(i);
        dict.set_column(j, &(sig / sig.norm()));
        codes.row_mut(j).fill(0.0);
        changed = true;
    }
    changed
}

fn check_input(y: &DMatrix<f64>) -> Result<()> {
    if y.nrows() == 0 || y.ncols() == 0 {
        return Err(DadlError::DimensionMismatch("k-svd needs a non-empty signal matrix".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(DadlError::DimensionMismatch("k-svd input has non-finite entries".into()));
    }
    Ok(())
}

/// Swap an unused atom for the worst-represented signal that has not already
/// been used as a replacement this iteration.
fn replace_atom(y: &DMatrix<f64>, residual: &DMatrix<f64>, dict: &mut DMatrix<f64>, k: usize, taken: &mut [bool]) {
    let mut best: Option<(usize, f64)> = None;
    for (i, col) in residual.column_iter().enumerate() {
        if taken[i] {
            continue;
        }
        let e = col.norm_squared();
        if best.is_none_or(|(_, b)| e > b) {
            best = Some((i, e));
        }
    }
    let Some((i, e)) = best else { return };
    if e <= 0.0 {
        return;
    }
    let sig = y.column(i);
    let norm = sig.norm();
    if norm > 0.0 {
        dict.set_column(k, &(sig / norm));
        taken[i] = true;
    }
}

/// First `k` pairwise non-parallel nonzero columns of `y`, normalized, padded
/// with seeded Gaussian atoms.
pub fn initial_dictionary(y: &DMatrix<f64>, k: usize, seed: u64) -> DMatrix<f64> {
    let n = y.nrows();
    let mut atoms: Vec<DVector<f64>> = Vec::with_capacity(k);
    for col in y.column_iter() {
        if atoms.len() == k {
            break;
        }
        let norm = col.norm();
        if norm == 0.0 {
            continue;
        }
        let unit = col / norm;
        if atoms.iter().any(|a| (a.dot(&unit).abs() - 1.0).abs() < 1e-12) {
            continue;
        }
        atoms.push(unit);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while atoms.len() < k {
        let g = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let norm: f64 = g.norm();
        if norm > 0.0 {
            atoms.push(g / norm);
        }
    }
    DMatrix::from_columns(&atoms)
}

fn random_orthonormal(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
    if k <= n {
        g.qr().q()
    } else {
        let mut g = g;
        for mut col in g.column_iter_mut() {
            let norm = col.norm();
            col /= norm;
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_column_single_atom() {
        let v = DVector::from_vec(vec![3.0, 4.0, 0.0]);
        let y = DMatrix::from_columns(&[v.clone(), v.clone(), v.clone()]);
        let out = ksvd_learn(&y, &KsvdConfig::new(1, 1, 3, 0)).unwrap();
        let expect = &v / 5.0;
        assert!((out.dictionary.column(0) - &expect).norm() < 1e-12);
        for i in 0..3 {
            assert!((out.codes[(0, i)] - 5.0).abs() < 1e-12);
        }
        assert!(!out.degenerate);
    }

    #[test]
    fn zero_input_is_flagged() {
        let y = DMatrix::zeros(4, 6);
        let out = ksvd_learn(&y, &KsvdConfig::new(3, 2, 2, 9)).unwrap();
        assert!(out.degenerate);
        assert!(out.codes.iter().all(|v| *v == 0.0));
        let gram = out.dictionary.tr_mul(&out.dictionary);
        assert!((gram - DMatrix::identity(3, 3)).norm() < 1e-12);
        let again = ksvd_learn(&y, &KsvdConfig::new(3, 2, 2, 9)).unwrap();
        assert_eq!(out.dictionary, again.dictionary);
    }

    #[test]
    fn config_validation() {
        let y = DMatrix::from_element(2, 2, 1.0);
        assert!(ksvd_learn(&y, &KsvdConfig::new(0, 1, 1, 0)).is_err());
        assert!(ksvd_learn(&y, &KsvdConfig::new(1, 0, 1, 0)).is_err());
        assert!(ksvd_learn(&y, &KsvdConfig::new(1, 1, 0, 0)).is_err());
    }

    #[test]
    fn initialization_skips_zero_and_parallel_columns() {
        let y = DMatrix::from_columns(&[
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![2.0, 0.0]),
            DVector::from_vec(vec![-1.0, 0.0]),
            DVector::from_vec(vec![0.0, 3.0]),
        ]);
        let d = initial_dictionary(&y, 3, 1);
        assert_eq!(d.column(0).as_slice(), &[1.0, 0.0]);
        assert_eq!(d.column(1).as_slice(), &[0.0, 1.0]);
        assert!((d.column(2).norm() - 1.0).abs() < 1e-12);
    }
}
