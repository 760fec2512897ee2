//! Domain base dictionary learning and domain-invariant sparse coding.
//!
//! A face `y` of subject `k` in pose `j` under illumination `l` is modeled as
//! a trilinear sparse combination of base-dictionary atoms,
//! `y[p] = Σ D[p,α,β,γ] · a_j[α] · b_k[β] · c_l[γ]`, where `a`, `b`, `c` are
//! the pose, subject and illumination codes. [`learn_base_dictionary`] fits
//! `D` and the code matrices `A`, `B`, `C` on a complete training grid by
//! repeatedly reducing the problem to ordinary K-SVD on rearranged data.
//! [`Coder::decompose`] recovers the three codes of a single image by
//! alternating pursuit over domain-adapted dictionaries.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ksvd::{ksvd_learn, KsvdConfig};
use crate::linalg::{relative_ridge, ridge_pinv};
use crate::multiarray::{synthesize, BaseDictionary, DomainGrid, FormId, ModeKind, Role};
use crate::linalg::lstsq_svd;
use crate::pursuit::{binomial, default_residual_tol, exhaustive_pursuit, normalize_columns, omp, SparseCode};
use crate::{DadlError, Result};

/// Relative residual at which decomposition stops trying further starts.
pub const EXACT_FIT_TOL: f64 = 1e-8;

/// Pursuit problems with at most this many supports are also solved exactly.
pub const SMALL_PURSUIT: u128 = 256;

const RESTART_STRIDE: u64 = 0x9e37_79b9_7f4a_7c15;

/// Named dictionary configurations for the CMU PIE and Extended YaleB setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 68 subjects, 4 training poses, 21 illuminations.
    D4,
    /// 68 subjects, 10 training poses, 21 illuminations.
    D10,
    /// 34 subjects, 13 poses, 21 illuminations.
    D34,
    /// 38 subjects, single pose, 32 training illuminations.
    D32,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Preset> {
        match s.to_ascii_lowercase().as_str() {
            "d4" => Some(Preset::D4),
            "d10" => Some(Preset::D10),
            "d34" => Some(Preset::D34),
            "d32" => Some(Preset::D32),
            _ => None,
        }
    }

    /// `((d_a, d_b, d_c), (T_a, T_b, T_c))`, pose/subject/illumination order.
    pub fn dims_and_caps(self) -> ((usize, usize, usize), (usize, usize, usize)) {
        match self {
            Preset::D4 => ((4, 68, 9), (4, 20, 9)),
            Preset::D10 => ((10, 68, 9), (8, 20, 9)),
            Preset::D34 => ((13, 34, 9), (8, 12, 9)),
            Preset::D32 => ((1, 38, 32), (1, 20, 20)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DadlConfig {
    /// Code lengths `(d_a, d_b, d_c)` for pose, subject, illumination.
    pub dims: (usize, usize, usize),
    /// Sparsity caps `(T_a, T_b, T_c)`.
    pub sparsity: (usize, usize, usize),
    /// Outer sweeps of dictionary learning.
    pub outer_iters: usize,
    /// K-SVD iterations inside each learning step.
    pub ksvd_iters: usize,
    /// Extra K-SVD starts per learning step.
    pub ksvd_restarts: usize,
    /// Maximum sweeps when decomposing one image.
    pub coding_iters: usize,
    /// Extra random starts when decomposing one image.
    pub restarts: usize,
    /// Decomposition stops once the largest relative code change drops below this.
    pub code_tol: f64,
    /// Pseudo-inverse ridge, relative to `trace(G)/dim(G)` of the Gram matrix.
    pub ridge: f64,
    pub seed: u64,
}

impl Default for DadlConfig {
    fn default() -> Self {
        Self {
            dims: (1, 1, 1),
            sparsity: (1, 1, 1),
            outer_iters: 5,
            ksvd_iters: 1000,
            ksvd_restarts: 8,
            coding_iters: 100,
            restarts: 4,
            code_tol: 1e-6,
            ridge: 1e-8,
            seed: 0,
        }
    }
}

impl DadlConfig {
    pub fn new(dims: (usize, usize, usize), sparsity: (usize, usize, usize)) -> Self {
        Self {
            dims,
            sparsity,
            ..Self::default()
        }
    }

    pub fn from_preset(preset: Preset) -> Self {
        let (dims, caps) = preset.dims_and_caps();
        Self::new(dims, caps)
    }

    pub fn validate(&self) -> Result<()> {
        let (da, db, dc) = self.dims;
        let (ta, tb, tc) = self.sparsity;
        if da == 0 || db == 0 || dc == 0 {
            return Err(DadlError::Config("code dimensions must be >= 1".into()));
        }
        if ta == 0 || tb == 0 || tc == 0 {
            return Err(DadlError::Config("sparsity caps must be >= 1".into()));
        }
        if ta > da || tb > db || tc > dc {
            return Err(DadlError::Config(format!(
                "sparsity caps ({ta}, {tb}, {tc}) exceed code dimensions ({da}, {db}, {dc})"
            )));
        }
        if self.outer_iters == 0 || self.ksvd_iters == 0 || self.coding_iters == 0 {
            return Err(DadlError::Config("iteration counts must be >= 1".into()));
        }
        if self.code_tol.is_nan() || self.code_tol < 0.0 || self.ridge.is_nan() || self.ridge < 0.0 {
            return Err(DadlError::Config("code_tol and ridge must be nonnegative".into()));
        }
        Ok(())
    }

    fn pinv(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        ridge_pinv(m, relative_ridge(m, self.ridge))
    }
}

/// Human-readable names for the subjects, poses and illuminations of a grid.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Labels {
    pub subjects: Vec<String>,
    pub poses: Vec<String>,
    pub illums: Vec<String>,
}

impl Labels {
    /// `s0.., p0.., i0..` placeholders.
    pub fn numbered(k: usize, j: usize, l: usize) -> Self {
        Self {
            subjects: (0..k).map(|i| format!("s{i}")).collect(),
            poses: (0..j).map(|i| format!("p{i}")).collect(),
            illums: (0..l).map(|i| format!("i{i}")).collect(),
        }
    }

    pub fn for_role(&self, role: Role) -> &[String] {
        match role {
            Role::Subject => &self.subjects,
            Role::Pose => &self.poses,
            Role::Illum => &self.illums,
        }
    }

    pub fn index_of(&self, role: Role, label: &str) -> Option<usize> {
        self.for_role(role).iter().position(|l| l == label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DadlModel {
    pub base: BaseDictionary,
    /// `A`, `d_a x J`.
    pub pose_codes: DMatrix<f64>,
    /// `B`, `d_b x K`.
    pub subject_codes: DMatrix<f64>,
    /// `C`, `d_c x L`.
    pub illum_codes: DMatrix<f64>,
    pub config: DadlConfig,
    pub labels: Labels,
    /// Relative training reconstruction error after each outer sweep.
    pub training_error: Vec<f64>,
    /// Optional image geometry `(width, height)`, `width * height == n`.
    pub image_shape: Option<(usize, usize)>,
}

impl DadlModel {
    pub fn n(&self) -> usize {
        self.base.n()
    }

    /// `(K, J, L)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.subject_codes.ncols(),
            self.pose_codes.ncols(),
            self.illum_codes.ncols(),
        )
    }

    pub fn codes(&self, role: Role) -> &DMatrix<f64> {
        match role {
            Role::Subject => &self.subject_codes,
            Role::Pose => &self.pose_codes,
            Role::Illum => &self.illum_codes,
        }
    }

    /// Model image for training cell `(k, j, l)`.
    pub fn synthesize_cell(&self, k: usize, j: usize, l: usize) -> Result<DVector<f64>> {
        synthesize(
            &self.base,
            self.pose_codes.column(j).as_slice(),
            self.subject_codes.column(k).as_slice(),
            self.illum_codes.column(l).as_slice(),
        )
    }

    /// Form-1 reconstruction of the whole training grid.
    pub fn reconstruct(&self) -> Result<DomainGrid> {
        reconstruct(&self.base, &self.pose_codes, &self.subject_codes, &self.illum_codes)
    }

    /// Coding context reusing grid views of the base dictionary across calls.
    pub fn coder(&self) -> Coder<'_> {
        Coder::new(self)
    }

    pub fn decompose(&self, y: &DVector<f64>) -> Result<Decomposition> {
        self.coder().decompose(y)
    }

    fn check(&self) -> Result<()> {
        let (da, db, dc) = self.base.dims();
        if self.pose_codes.nrows() != da || self.subject_codes.nrows() != db || self.illum_codes.nrows() != dc {
            return Err(DadlError::DimensionMismatch(
                "code matrices do not match base dictionary dimensions".into(),
            ));
        }
        let (k, j, l) = self.counts();
        if self.labels.subjects.len() != k || self.labels.poses.len() != j || self.labels.illums.len() != l {
            return Err(DadlError::DimensionMismatch("label maps do not match code matrices".into()));
        }
        Ok(())
    }

    /// Assemble a model from parts, checking shapes.
    pub fn from_parts(
        base: BaseDictionary,
        pose_codes: DMatrix<f64>,
        subject_codes: DMatrix<f64>,
        illum_codes: DMatrix<f64>,
        config: DadlConfig,
        labels: Labels,
    ) -> Result<Self> {
        let m = Self {
            base,
            pose_codes,
            subject_codes,
            illum_codes,
            config,
            labels,
            training_error: Vec::new(),
            image_shape: None,
        };
        m.check()?;
        Ok(m)
    }
}

/// `[[D^{T3} C]^{T2} A]^{T1} B`, returned in Form 1.
pub fn reconstruct(
    base: &BaseDictionary,
    pose: &DMatrix<f64>,
    subject: &DMatrix<f64>,
    illum: &DMatrix<f64>,
) -> Result<DomainGrid> {
    base.as_grid(FormId::F3)
        .times(illum)?
        .vt(FormId::F2)
        .times(pose)?
        .vt(FormId::F1)
        .times(subject)
}

fn relative_error(y: &DomainGrid, yhat: &DomainGrid) -> f64 {
    let denom = y.data().norm();
    let num = (y.data() - yhat.data()).norm();
    if denom > 0.0 {
        num / denom
    } else {
        num
    }
}

/// Learn the base dictionary and code matrices from a complete grid.
///
/// `y` may be in any form; it is rearranged to Form 1 internally. All three
/// modes must be content modes.
pub fn learn_base_dictionary(y: &DomainGrid, labels: Labels, cfg: &DadlConfig) -> Result<DadlModel> {
    cfg.validate()?;
    for m in y.labels() {
        if m.kind.is_atom() {
            return Err(DadlError::ModeMismatch(ModeKind::content(m.kind.role())));
        }
    }
    let [k_count, j_count, l_count] = y.sizes();
    if labels.subjects.len() != k_count || labels.poses.len() != j_count || labels.illums.len() != l_count {
        return Err(DadlError::DimensionMismatch("label maps do not match the training grid".into()));
    }
    if y.data().iter().any(|v| !v.is_finite()) {
        return Err(DadlError::IncompleteGrid("training grid has non-finite entries".into()));
    }
    let (da, db, dc) = cfg.dims;
    let (ta, tb, tc) = cfg.sparsity;

    let y1 = y.vt(FormId::F1);
    let y4 = y.vt(FormId::F4);
    let y5 = y.vt(FormId::F5);
    let ksvd_cfg = |atoms, cap, salt: u64| {
        KsvdConfig::new(atoms, cap, cfg.ksvd_iters, cfg.seed.wrapping_add(salt)).with_restarts(cfg.ksvd_restarts)
    };

    // Step 1: subject codes from Form 1.
    let mut subject = ksvd_learn(y1.data(), &ksvd_cfg(db, tb, 1))?.codes;
    let mut pose = DMatrix::zeros(da, j_count);
    let mut illum = DMatrix::zeros(dc, l_count);
    let mut base = None;
    let mut history = Vec::with_capacity(cfg.outer_iters);

    for _ in 0..cfg.outer_iters {
        // Step 2: Y1 B† rearranged with poses as columns.
        let m = y1
            .contract_as(ModeKind::Subject, &cfg.pinv(&subject)?, ModeKind::SubjectAtom)?
            .vt(FormId::F2);
        pose = ksvd_learn(m.data(), &ksvd_cfg(da, ta, 2))?.codes;

        // Step 3: Y4 A† rearranged with illuminations as columns.
        let m = y4
            .contract_as(ModeKind::Pose, &cfg.pinv(&pose)?, ModeKind::PoseAtom)?
            .vt(FormId::F3);
        illum = ksvd_learn(m.data(), &ksvd_cfg(dc, tc, 3))?.codes;

        // Step 4: Y5 C† rearranged with subjects as columns.
        let m = y5
            .contract_as(ModeKind::Illum, &cfg.pinv(&illum)?, ModeKind::IllumAtom)?
            .vt(FormId::F1);
        let fit = ksvd_learn(m.data(), &ksvd_cfg(db, tb, 4))?;
        subject = fit.codes;

        // Step 5: D ← [D^{T2} A] A†, starting from the subject dictionary
        // whose rows are (pose, illum-atom) blocks.
        let db_grid = DomainGrid::new(
            m.cell_dim(),
            m.outer(),
            m.inner(),
            crate::multiarray::ModeLabel::new(ModeKind::SubjectAtom, db)?,
            fit.dictionary,
        )?;
        let d_grid = db_grid
            .vt(FormId::F2)
            .contract_as(ModeKind::Pose, &cfg.pinv(&pose)?, ModeKind::PoseAtom)?;
        let d = BaseDictionary::from_grid(&d_grid)?;
        history.push(relative_error(&y1, &reconstruct(&d, &pose, &subject, &illum)?));
        base = Some(d);
    }

    Ok(DadlModel {
        base: base.expect("outer_iters >= 1"),
        pose_codes: pose,
        subject_codes: subject,
        illum_codes: illum,
        config: cfg.clone(),
        labels,
        training_error: history,
        image_shape: None,
    })
}

/// Result of decomposing one image.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Pose code, length `d_a`.
    pub a: SparseCode,
    /// Subject code, length `d_b`.
    pub b: SparseCode,
    /// Illumination code, length `d_c`.
    pub c: SparseCode,
    pub residual_norm: f64,
    /// Sweeps of the start that produced this result.
    pub iterations_used: usize,
    /// Sweeps summed over every start that was tried.
    pub total_sweeps: usize,
    pub converged: bool,
    /// `‖y − ŷ‖` after every full sweep.
    pub objective: Vec<f64>,
    /// Adapted-dictionary columns skipped because they were numerically zero,
    /// summed over all pursuit calls.
    pub skipped_atoms: usize,
}

/// Pose and illumination selector for composition.
#[derive(Debug, Clone, Copy)]
pub enum Selector<'a> {
    /// A training label, resolved to a column of `A` or `C`.
    Label(&'a str),
    /// A training column index.
    Index(usize),
    /// An explicit code, e.g. from a decomposition of an unseen domain.
    Code(&'a [f64]),
}

/// Decomposition context: holds the three grid views of the base dictionary
/// that the adapted dictionaries are built from.
pub struct Coder<'m> {
    model: &'m DadlModel,
    form1: DomainGrid,
    form2: DomainGrid,
    form3: DomainGrid,
}

fn column(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v)
}

fn relative_change(new: &DVector<f64>, old: &DVector<f64>) -> f64 {
    (new - old).norm() / (new.norm() + 1e-12)
}

impl<'m> Coder<'m> {
    pub fn new(model: &'m DadlModel) -> Self {
        Self {
            model,
            form1: model.base.as_grid(FormId::F1),
            form2: model.base.as_grid(FormId::F2),
            form3: model.base.as_grid(FormId::F3),
        }
    }

    pub fn model(&self) -> &DadlModel {
        self.model
    }

    /// `n x d_b` dictionary for the subject code: `[[D^{T3} c]^{T2} a]^{T1}`.
    pub fn subject_dictionary(&self, a: &[f64], c: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self
            .form3
            .times(&column(c))?
            .vt(FormId::F2)
            .times(&column(a))?
            .vt(FormId::F1)
            .into_data())
    }

    /// `n x d_a` dictionary for the pose code: `[[D^{T1} b]^{T3} c]^{T2}`.
    pub fn pose_dictionary(&self, b: &[f64], c: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self
            .form1
            .times(&column(b))?
            .vt(FormId::F3)
            .times(&column(c))?
            .vt(FormId::F2)
            .into_data())
    }

    /// `n x d_c` dictionary for the illumination code: `[[D^{T2} a]^{T1} b]^{T3}`.
    pub fn illum_dictionary(&self, a: &[f64], b: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self
            .form2
            .times(&column(a))?
            .vt(FormId::F1)
            .times(&column(b))?
            .vt(FormId::F3)
            .into_data())
    }

    pub fn decompose(&self, y: &DVector<f64>) -> Result<Decomposition> {
        self.decompose_seeded(y, self.model.config.seed)
    }

    /// Alternating pursuit for `(a, b, c)` from seeded random starts.
    ///
    /// Runs `restarts + 1` independent starts and keeps the one with the
    /// smallest residual. Starts that fit `y` to [`EXACT_FIT_TOL`] count as
    /// tied and are ranked by total support size.
    pub fn decompose_seeded(&self, y: &DVector<f64>, seed: u64) -> Result<Decomposition> {
        let n = self.model.n();
        if y.len() != n {
            return Err(DadlError::DimensionMismatch(format!(
                "image has {} pixels, model expects {n}",
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(DadlError::DimensionMismatch("image has non-finite pixels".into()));
        }
        let exact = EXACT_FIT_TOL * y.norm();
        let nnz = |d: &Decomposition| d.a.nnz() + d.b.nnz() + d.c.nnz();
        // Exact fits are not unique when the base is overcomplete; among
        // them the sparsest is kept.
        let better = |run: &Decomposition, best: &Decomposition| match (
            run.residual_norm <= exact,
            best.residual_norm <= exact,
        ) {
            (true, true) => (nnz(run), run.residual_norm) < (nnz(best), best.residual_norm),
            (true, false) => true,
            (false, true) => false,
            (false, false) => run.residual_norm < best.residual_norm,
        };
        let mut best: Option<Decomposition> = None;
        let mut total = 0;
        for r in 0..=self.model.config.restarts {
            let run = self.single_start(y, seed.wrapping_add((r as u64).wrapping_mul(RESTART_STRIDE)))?;
            total += run.iterations_used;
            let done = run.residual_norm <= exact && nnz(&run) <= 3;
            if best.as_ref().is_none_or(|b| better(&run, b)) {
                best = Some(run);
            }
            if done {
                break;
            }
        }
        let mut best = best.expect("at least one start");
        best.total_sweeps = total;
        Ok(best)
    }

    fn single_start(&self, y: &DVector<f64>, seed: u64) -> Result<Decomposition> {
        let model = self.model;
        let cfg = &model.config;
        let (da, db, dc) = model.base.dims();
        let (ta, tb, tc) = cfg.sparsity;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DVector::from_fn(da, |_, _| StandardNormal.sample(&mut rng));
        let mut c = DVector::from_fn(dc, |_, _| StandardNormal.sample(&mut rng));
        let mut b: DVector<f64> = DVector::zeros(db);
        let tol = default_residual_tol(y);

        let mut objective = Vec::new();
        let mut converged = false;
        let mut skipped = 0;
        let mut iterations = 0;

        for _ in 0..cfg.coding_iters {
            iterations += 1;
            let dict = self.subject_dictionary(a.as_slice(), c.as_slice())?;
            let mut b_new = pursue(&dict, y, tb, tol, &b, &mut skipped)?;
            let dict = self.pose_dictionary(b_new.as_slice(), c.as_slice())?;
            let mut a_new = pursue(&dict, y, ta, tol, &a, &mut skipped)?;
            let dict = self.illum_dictionary(a_new.as_slice(), b_new.as_slice())?;
            let mut c_new = pursue(&dict, y, tc, tol, &c, &mut skipped)?;
            let mut err = (y - &dict * &c_new).norm();
            if let Some((ra, rb, rc, e)) = self.refine(y, &a_new, &b_new, &c_new, err)? {
                (a_new, b_new, c_new, err) = (ra, rb, rc, e);
            }

            let change = relative_change(&a_new, &a)
                .max(relative_change(&b_new, &b))
                .max(relative_change(&c_new, &c));
            a = a_new;
            b = b_new;
            c = c_new;
            objective.push(err);
            if change < cfg.code_tol {
                converged = true;
                break;
            }
        }

        gauge_fix(&mut a, &mut b, &mut c, model);
        let yhat = synthesize(&model.base, a.as_slice(), b.as_slice(), c.as_slice())?;
        Ok(Decomposition {
            a: SparseCode::new(a, ta)?,
            b: SparseCode::new(b, tb)?,
            c: SparseCode::new(c, tc)?,
            residual_norm: (y - yhat).norm(),
            iterations_used: iterations,
            total_sweeps: iterations,
            converged,
            objective,
            skipped_atoms: skipped,
        })
    }

    /// One damped Gauss-Newton step on the current supports of `(a, b, c)`.
    ///
    /// The Jacobian blocks of `ŷ = D(a, b, c)` are the adapted dictionaries
    /// restricted to each support. Returns the refined codes and residual
    /// only if the residual drops below `err`.
    #[allow(clippy::type_complexity)]
    fn refine(
        &self,
        y: &DVector<f64>,
        a: &DVector<f64>,
        b: &DVector<f64>,
        c: &DVector<f64>,
        err: f64,
    ) -> Result<Option<(DVector<f64>, DVector<f64>, DVector<f64>, f64)>> {
        let support = |v: &DVector<f64>| -> Vec<usize> { (0..v.len()).filter(|&i| v[i] != 0.0).collect() };
        let (sa, sb, sc) = (support(a), support(b), support(c));
        if sa.is_empty() || sb.is_empty() || sc.is_empty() || err == 0.0 {
            return Ok(None);
        }
        let ja = self.pose_dictionary(b.as_slice(), c.as_slice())?.select_columns(&sa);
        let jb = self.subject_dictionary(a.as_slice(), c.as_slice())?.select_columns(&sb);
        let jc = self.illum_dictionary(a.as_slice(), b.as_slice())?.select_columns(&sc);
        let n = y.len();
        let mut jac = DMatrix::zeros(n, sa.len() + sb.len() + sc.len());
        jac.columns_mut(0, sa.len()).copy_from(&ja);
        jac.columns_mut(sa.len(), sb.len()).copy_from(&jb);
        jac.columns_mut(sa.len() + sb.len(), sc.len()).copy_from(&jc);
        let yhat = &jb * b.select_rows(&sb);
        let step = lstsq_svd(&jac, &(y - yhat));

        let mut scale = 1.0;
        for _ in 0..4 {
            let mut na = a.clone();
            let mut nb = b.clone();
            let mut nc = c.clone();
            for (i, &r) in sa.iter().enumerate() {
                na[r] += scale * step[i];
            }
            for (i, &r) in sb.iter().enumerate() {
                nb[r] += scale * step[sa.len() + i];
            }
            for (i, &r) in sc.iter().enumerate() {
                nc[r] += scale * step[sa.len() + sb.len() + i];
            }
            let e = (y - synthesize(&self.model.base, na.as_slice(), nb.as_slice(), nc.as_slice())?).norm();
            if e < err {
                return Ok(Some((na, nb, nc, e)));
            }
            scale *= 0.5;
        }
        Ok(None)
    }
}

/// Pursuit over a non-normalized adapted dictionary.
///
/// Columns are scaled to unit norm for OMP and the coefficients scaled back.
/// Numerically zero columns are left out. When the number of candidate
/// supports is at most [`SMALL_PURSUIT`] the exhaustive optimum replaces the
/// greedy code if it fits better. The previous code is kept when it fits `y`
/// at least as well, so a sweep never increases the residual.
fn pursue(
    dict: &DMatrix<f64>,
    y: &DVector<f64>,
    cap: usize,
    tol: f64,
    previous: &DVector<f64>,
    skipped: &mut usize,
) -> Result<DVector<f64>> {
    let (unit, norms) = normalize_columns(dict);
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-12 * max_norm.max(f64::MIN_POSITIVE);
    let active: Vec<usize> = (0..norms.len()).filter(|&i| norms[i] > floor).collect();
    *skipped += norms.len() - active.len();

    let mut x = DVector::zeros(dict.ncols());
    if !active.is_empty() {
        let sub = unit.select_columns(&active);
        let mut code = omp(&sub, y, cap, tol)?.into_values();
        let greedy_err = (y - &sub * &code).norm();
        if greedy_err > tol && binomial(active.len(), cap.min(active.len())) <= SMALL_PURSUIT {
            let exact = exhaustive_pursuit(&sub, y, cap, SMALL_PURSUIT)?;
            if (y - &sub * &exact).norm() < greedy_err {
                code = exact;
            }
        }
        for (pos, &col) in active.iter().enumerate() {
            let v = code[pos];
            if v != 0.0 {
                x[col] = v / norms[col];
            }
        }
    }
    let prev_nnz = previous.iter().filter(|v| **v != 0.0).count();
    if prev_nnz <= cap {
        let err_new = (y - dict * &x).norm_squared();
        let err_old = (y - dict * previous).norm_squared();
        if err_old < err_new {
            return Ok(previous.clone());
        }
    }
    Ok(x)
}

/// Resolve the sign and scale ambiguity `(a, b, c) ~ (s·a, t·b, c/(s·t))`.
///
/// `b` is aligned in sign and matched in norm to its most similar training
/// subject code, `a` likewise against the training pose codes, and `c`
/// absorbs the compensating factor. The synthesized image is unchanged, and
/// codes of the same subject seen in different domains share a sign.
fn gauge_fix(a: &mut DVector<f64>, b: &mut DVector<f64>, c: &mut DVector<f64>, model: &DadlModel) {
    let align = |v: &mut DVector<f64>, table: &DMatrix<f64>| -> f64 {
        let vn = v.norm();
        if vn == 0.0 {
            return 1.0;
        }
        let mut best: Option<(f64, f64)> = None;
        for col in table.column_iter() {
            let cn = col.norm();
            if cn == 0.0 {
                continue;
            }
            let cos = col.dot(v) / (cn * vn);
            if best.is_none_or(|(bc, _)| cos.abs() > bc.abs()) {
                best = Some((cos, cn));
            }
        }
        let Some((cos, target)) = best else { return 1.0 };
        let sign = if cos < 0.0 { -1.0 } else { 1.0 };
        let s = sign * target / vn;
        *v *= s;
        s
    };
    let sb = align(b, &model.subject_codes);
    let sa = align(a, &model.pose_codes);
    *c /= sa * sb;
}

/// `[D^{T3} C]^{T2}`: the base with illumination atoms contracted against `C`.
///
/// The result has pose atoms as columns and `(illum, subject-atom)` row
/// blocks, one block row per training illumination.
pub fn marginalize_illum(model: &DadlModel) -> Result<DomainGrid> {
    Ok(model
        .base
        .as_grid(FormId::F3)
        .contract(ModeKind::IllumAtom, &model.illum_codes)?
        .vt(FormId::F2))
}

/// `[D^{T2} A]^{T3}`: the base with pose atoms contracted against `A`.
pub fn marginalize_pose(model: &DadlModel) -> Result<DomainGrid> {
    Ok(model
        .base
        .as_grid(FormId::F2)
        .contract(ModeKind::PoseAtom, &model.pose_codes)?
        .vt(FormId::F3))
}

fn resolve(model: &DadlModel, role: Role, sel: Selector<'_>) -> Result<Vec<f64>> {
    let codes = model.codes(role);
    let kind = match role {
        Role::Subject => "subject",
        Role::Pose => "pose",
        Role::Illum => "illumination",
    };
    match sel {
        Selector::Label(label) => {
            let j = model.labels.index_of(role, label).ok_or_else(|| DadlError::UnknownLabel {
                kind,
                label: label.to_string(),
            })?;
            Ok(codes.column(j).iter().copied().collect())
        }
        Selector::Index(j) => {
            if j >= codes.ncols() {
                return Err(DadlError::UnknownLabel {
                    kind,
                    label: j.to_string(),
                });
            }
            Ok(codes.column(j).iter().copied().collect())
        }
        Selector::Code(v) => {
            if v.len() != codes.nrows() {
                return Err(DadlError::DimensionMismatch(format!(
                    "{kind} code has length {}, model expects {}",
                    v.len(),
                    codes.nrows()
                )));
            }
            Ok(v.to_vec())
        }
    }
}

/// Render subject code `b` in the selected pose and illumination.
pub fn compose(model: &DadlModel, b: &[f64], pose: Selector<'_>, illum: Selector<'_>) -> Result<DVector<f64>> {
    let a = resolve(model, Role::Pose, pose)?;
    let c = resolve(model, Role::Illum, illum)?;
    synthesize(&model.base, &a, b, &c)
}

/// Subject code for a training label, for composing known subjects.
pub fn subject_code(model: &DadlModel, sel: Selector<'_>) -> Result<Vec<f64>> {
    resolve(model, Role::Subject, sel)
}
