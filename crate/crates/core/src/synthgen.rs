//! Synthetic trilinear data with a known ground-truth model.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dadl::{reconstruct, DadlConfig, DadlModel, Labels};
use crate::multiarray::{BaseDictionary, DomainGrid};
pub use crate::pursuit::binomial;
use crate::pursuit::exhaustive_pursuit;
use crate::{DadlError, Result};

/// Largest number of supports [`exhaustive_sparse_fit`] will enumerate.
pub const EXHAUSTIVE_LIMIT: u128 = 100_000;

const MAX_RANK_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Pixels per image.
    pub n: usize,
    /// `(K, J, L)`: subjects, poses, illuminations.
    pub counts: (usize, usize, usize),
    /// `(d_a, d_b, d_c)`.
    pub dims: (usize, usize, usize),
    /// `(T_a, T_b, T_c)`.
    pub sparsity: (usize, usize, usize),
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let (k, j, l) = self.counts;
        let (da, db, dc) = self.dims;
        if self.n == 0 || k == 0 || j == 0 || l == 0 {
            return Err(DadlError::Config("n and grid counts must be >= 1".into()));
        }
        DadlConfig::new(self.dims, self.sparsity).validate()?;
        if da > j || db > k || dc > l {
            return Err(DadlError::Config(format!(
                "dims ({da}, {db}, {dc}) exceed grid counts (J={j}, K={k}, L={l})"
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(DadlError::Config("noise_sigma must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Observed Form-1 grid, noise included.
    pub grid: DomainGrid,
    /// Form-1 grid before noise.
    pub clean: DomainGrid,
    /// Generating model; its config echoes the requested dims and caps.
    pub truth: DadlModel,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let (k, j, l) = spec.counts;
    let (da, db, dc) = spec.dims;
    let (ta, tb, tc) = spec.sparsity;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut data = Vec::with_capacity(spec.n * da * db * dc);
    for _ in 0..da * db * dc {
        let fiber: Vec<f64> = (0..spec.n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = fiber.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            data.extend(fiber.iter().map(|v| v / norm));
        } else {
            let mut e = vec![0.0; spec.n];
            e[0] = 1.0;
            data.extend(e);
        }
    }
    let base = BaseDictionary::new(spec.n, da, db, dc, data)?;
    let pose = sparse_codes(&mut rng, da, j, ta)?;
    let subject = sparse_codes(&mut rng, db, k, tb)?;
    let illum = sparse_codes(&mut rng, dc, l, tc)?;

    let clean = reconstruct(&base, &pose, &subject, &illum)?;
    let mut grid = clean.clone();
    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| DadlError::Config(e.to_string()))?;
        let (rows, cols) = grid.data().shape();
        let perturbed = grid.data() + DMatrix::from_fn(rows, cols, |_, _| noise.sample(&mut rng));
        grid = DomainGrid::new(grid.cell_dim(), grid.outer(), grid.inner(), grid.col(), perturbed)?;
    }

    let mut config = DadlConfig::new(spec.dims, spec.sparsity);
    config.seed = spec.seed;
    let truth = DadlModel::from_parts(base, pose, subject, illum, config, Labels::numbered(k, j, l))?;
    Ok(SynthOutput { grid, clean, truth })
}

/// `d x count` code matrix with exactly `cap` standard-normal nonzeros per
/// column and full row rank.
///
/// Column `i < d` always uses atom `i`, so every row is hit; columns are then
/// shuffled. Rank-deficient draws are resampled.
fn sparse_codes(rng: &mut ChaCha8Rng, d: usize, count: usize, cap: usize) -> Result<DMatrix<f64>> {
    for _ in 0..MAX_RANK_RETRIES {
        let mut m = DMatrix::zeros(d, count);
        for col in 0..count {
            let mut support: Vec<usize> = Vec::with_capacity(cap);
            if col < d {
                support.push(col);
            }
            for idx in sample(rng, d, d) {
                if support.len() == cap {
                    break;
                }
                if !support.contains(&idx) {
                    support.push(idx);
                }
            }
            for &row in &support {
                let v: f64 = StandardNormal.sample(rng);
                m[(row, col)] = if v == 0.0 { 1.0 } else { v };
            }
        }
        let perm = sample(rng, count, count).into_vec();
        let shuffled = DMatrix::from_fn(d, count, |r, c| m[(r, perm[c])]);
        if full_row_rank(&shuffled) {
            return Ok(shuffled);
        }
    }
    Err(DadlError::Config(format!(
        "could not draw a full-row-rank {d}x{count} code matrix with {cap} nonzeros per column"
    )))
}

fn full_row_rank(m: &DMatrix<f64>) -> bool {
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.len() == m.nrows() && sv.iter().all(|s| *s > 1e-8 * max)
}

/// Globally optimal code with at most `t` nonzeros, by enumerating supports.
///
/// Fails with [`DadlError::TooLarge`] beyond [`EXHAUSTIVE_LIMIT`] supports.
pub fn exhaustive_sparse_fit(dict: &DMatrix<f64>, y: &DVector<f64>, t: usize) -> Result<DVector<f64>> {
    exhaustive_pursuit(dict, y, t, EXHAUSTIVE_LIMIT)
}
