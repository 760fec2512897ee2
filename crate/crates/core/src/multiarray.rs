//! Labeled block matrices of pixel-fiber cells.
//!
//! A face corpus indexed by subject, pose and illumination can be laid out as a
//! matrix in six ways: one factor indexes the columns, the other two index
//! blocks of rows (an outer and an inner factor), and every block is an
//! `n`-vector of pixels. [`DomainGrid`] carries one such layout together with
//! its mode labels, and [`DomainGrid::vt`] moves between layouts.
//!
//! Layout rule (the only one used anywhere in this crate, including the model
//! file): the cell for pixel `p`, outer index `u`, inner index `v` and column
//! `w` lives at row `((u * inner.size) + v) * n + p`, column `w`, in a
//! column-major matrix.

use std::fmt;

use nalgebra::{DMatrix, DVector};

pub use crate::linalg::{relative_ridge, ridge_pinv};
use crate::{DadlError, Result};

/// The three content factors of the observation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Subject,
    Pose,
    Illum,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Subject, Role::Pose, Role::Illum];

    /// Position of this role inside a `[subject, pose, illum]` index triple.
    #[inline]
    pub fn slot(self) -> usize {
        match self {
            Role::Subject => 0,
            Role::Pose => 1,
            Role::Illum => 2,
        }
    }
}

/// What a grid axis counts: observed subjects/poses/illuminations, or atoms of
/// the corresponding factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeKind {
    Subject,
    Pose,
    Illum,
    SubjectAtom,
    PoseAtom,
    IllumAtom,
}

impl ModeKind {
    pub fn role(self) -> Role {
        match self {
            ModeKind::Subject | ModeKind::SubjectAtom => Role::Subject,
            ModeKind::Pose | ModeKind::PoseAtom => Role::Pose,
            ModeKind::Illum | ModeKind::IllumAtom => Role::Illum,
        }
    }

    pub fn is_atom(self) -> bool {
        matches!(
            self,
            ModeKind::SubjectAtom | ModeKind::PoseAtom | ModeKind::IllumAtom
        )
    }

    pub fn content(role: Role) -> Self {
        match role {
            Role::Subject => ModeKind::Subject,
            Role::Pose => ModeKind::Pose,
            Role::Illum => ModeKind::Illum,
        }
    }

    pub fn atom(role: Role) -> Self {
        match role {
            Role::Subject => ModeKind::SubjectAtom,
            Role::Pose => ModeKind::PoseAtom,
            Role::Illum => ModeKind::IllumAtom,
        }
    }

    /// Atom kind for a content kind and vice versa.
    pub fn counterpart(self) -> Self {
        if self.is_atom() {
            ModeKind::content(self.role())
        } else {
            ModeKind::atom(self.role())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeLabel {
    pub kind: ModeKind,
    pub size: usize,
}

impl ModeLabel {
    pub fn new(kind: ModeKind, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(DadlError::DimensionMismatch(format!(
                "mode {kind:?} must have size >= 1"
            )));
        }
        Ok(Self { kind, size })
    }
}

/// One of the six canonical layouts.
///
/// | form | columns | outer rows | inner rows |
/// |------|---------|------------|------------|
/// | 1    | subject | pose       | illum      |
/// | 2    | pose    | illum      | subject    |
/// | 3    | illum   | subject    | pose       |
/// | 4    | pose    | subject    | illum      |
/// | 5    | illum   | pose       | subject    |
/// | 6    | subject | illum      | pose       |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FormId(u8);

/// Roles assigned to the column, outer-row and inner-row axes of a form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormLayout {
    pub col: Role,
    pub outer: Role,
    pub inner: Role,
}

impl FormId {
    pub const F1: FormId = FormId(1);
    pub const F2: FormId = FormId(2);
    pub const F3: FormId = FormId(3);
    pub const F4: FormId = FormId(4);
    pub const F5: FormId = FormId(5);
    pub const F6: FormId = FormId(6);
    pub const ALL: [FormId; 6] = [
        FormId::F1,
        FormId::F2,
        FormId::F3,
        FormId::F4,
        FormId::F5,
        FormId::F6,
    ];

    pub fn new(value: u8) -> Result<Self> {
        if (1..=6).contains(&value) {
            Ok(FormId(value))
        } else {
            Err(DadlError::Config(format!("form id {value} outside 1..=6")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn layout(self) -> FormLayout {
        use Role::*;
        let (col, outer, inner) = match self.0 {
            1 => (Subject, Pose, Illum),
            2 => (Pose, Illum, Subject),
            3 => (Illum, Subject, Pose),
            4 => (Pose, Subject, Illum),
            5 => (Illum, Pose, Subject),
            6 => (Subject, Illum, Pose),
            _ => unreachable!("FormId is validated on construction"),
        };
        FormLayout { col, outer, inner }
    }

    /// The form with the given axis roles. `None` if the roles repeat.
    pub fn from_layout(layout: FormLayout) -> Option<FormId> {
        FormId::ALL.into_iter().find(|f| f.layout() == layout)
    }
}

impl fmt::Display for FormId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "form {}", self.0)
    }
}

/// Index of a cell by role: `[subject, pose, illum]`.
pub type CellIndex = [usize; 3];

/// A block matrix of `n`-dimensional cells with labeled row and column modes.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainGrid {
    cell_dim: usize,
    outer: ModeLabel,
    inner: ModeLabel,
    col: ModeLabel,
    data: DMatrix<f64>,
}

impl DomainGrid {
    pub fn new(
        cell_dim: usize,
        outer: ModeLabel,
        inner: ModeLabel,
        col: ModeLabel,
        data: DMatrix<f64>,
    ) -> Result<Self> {
        if cell_dim == 0 {
            return Err(DadlError::DimensionMismatch("cell_dim must be >= 1".into()));
        }
        let roles = [outer.kind.role(), inner.kind.role(), col.kind.role()];
        if roles[0] == roles[1] || roles[0] == roles[2] || roles[1] == roles[2] {
            return Err(DadlError::DimensionMismatch(format!(
                "grid modes must be distinct, got {:?}/{:?}/{:?}",
                outer.kind, inner.kind, col.kind
            )));
        }
        let rows = cell_dim * outer.size * inner.size;
        if data.nrows() != rows || data.ncols() != col.size {
            return Err(DadlError::DimensionMismatch(format!(
                "grid data is {}x{}, layout needs {}x{}",
                data.nrows(),
                data.ncols(),
                rows,
                col.size
            )));
        }
        Ok(Self {
            cell_dim,
            outer,
            inner,
            col,
            data,
        })
    }

    pub fn zeros(cell_dim: usize, outer: ModeLabel, inner: ModeLabel, col: ModeLabel) -> Result<Self> {
        let data = DMatrix::zeros(cell_dim * outer.size * inner.size, col.size);
        Self::new(cell_dim, outer, inner, col, data)
    }

    /// Empty grid in the layout of `form`, with one label per role.
    pub fn zeros_in_form(cell_dim: usize, form: FormId, labels: [ModeLabel; 3]) -> Result<Self> {
        let layout = form.layout();
        let pick = |role: Role| -> Result<ModeLabel> {
            labels
                .iter()
                .copied()
                .find(|m| m.kind.role() == role)
                .ok_or(DadlError::ModeMismatch(ModeKind::content(role)))
        };
        Self::zeros(cell_dim, pick(layout.outer)?, pick(layout.inner)?, pick(layout.col)?)
    }

    pub fn cell_dim(&self) -> usize {
        self.cell_dim
    }

    pub fn outer(&self) -> ModeLabel {
        self.outer
    }

    pub fn inner(&self) -> ModeLabel {
        self.inner
    }

    pub fn col(&self) -> ModeLabel {
        self.col
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn layout(&self) -> FormLayout {
        FormLayout {
            col: self.col.kind.role(),
            outer: self.outer.kind.role(),
            inner: self.inner.kind.role(),
        }
    }

    pub fn form(&self) -> FormId {
        FormId::from_layout(self.layout()).expect("grid roles are distinct")
    }

    /// Label of the axis playing `role`.
    pub fn mode(&self, role: Role) -> ModeLabel {
        [self.outer, self.inner, self.col]
            .into_iter()
            .find(|m| m.kind.role() == role)
            .expect("every grid carries all three roles")
    }

    pub fn labels(&self) -> [ModeLabel; 3] {
        [self.mode(Role::Subject), self.mode(Role::Pose), self.mode(Role::Illum)]
    }

    /// Sizes per role, `[subject, pose, illum]`.
    pub fn sizes(&self) -> [usize; 3] {
        self.labels().map(|m| m.size)
    }

    fn find_kind(&self, kind: ModeKind) -> Option<ModeLabel> {
        [self.outer, self.inner, self.col]
            .into_iter()
            .find(|m| m.kind == kind)
    }

    /// Flat offset (column-major) of the first pixel of a cell.
    #[inline]
    fn offset(&self, idx: CellIndex) -> usize {
        let w = idx[self.col.kind.role().slot()];
        let u = idx[self.outer.kind.role().slot()];
        let v = idx[self.inner.kind.role().slot()];
        w * self.data.nrows() + (u * self.inner.size + v) * self.cell_dim
    }

    pub fn cell(&self, idx: CellIndex) -> &[f64] {
        let start = self.offset(idx);
        &self.data.as_slice()[start..start + self.cell_dim]
    }

    pub fn cell_mut(&mut self, idx: CellIndex) -> &mut [f64] {
        let start = self.offset(idx);
        let n = self.cell_dim;
        &mut self.data.as_mut_slice()[start..start + n]
    }

    /// Every cell index of this grid, subject slowest, illum fastest.
    pub fn indices(&self) -> impl Iterator<Item = CellIndex> {
        let [ks, js, ls] = self.sizes();
        (0..ks).flat_map(move |k| (0..js).flat_map(move |j| (0..ls).map(move |l| [k, j, l])))
    }

    /// Vector transpose into the layout of `target`.
    ///
    /// Mode labels travel with their role, so atom modes stay atom modes.
    pub fn vt(&self, target: FormId) -> DomainGrid {
        if self.form() == target {
            return self.clone();
        }
        let mut out = DomainGrid::zeros_in_form(self.cell_dim, target, self.labels())
            .expect("labels come from a valid grid");
        for idx in self.indices() {
            out.cell_mut(idx).copy_from_slice(self.cell(idx));
        }
        out
    }

    /// Contract the axis labeled `kind` against `codes` (shape `size x m`).
    ///
    /// The contracted axis keeps its role and switches to the counterpart
    /// kind: atoms contracted with learned codes become content, content
    /// contracted with a pseudo-inverse becomes atoms. Use
    /// [`DomainGrid::contract_as`] to name the output kind explicitly.
    pub fn contract(&self, kind: ModeKind, codes: &DMatrix<f64>) -> Result<DomainGrid> {
        self.contract_as(kind, codes, kind.counterpart())
    }

    pub fn contract_as(
        &self,
        kind: ModeKind,
        codes: &DMatrix<f64>,
        out_kind: ModeKind,
    ) -> Result<DomainGrid> {
        let mode = self.find_kind(kind).ok_or(DadlError::ModeMismatch(kind))?;
        if out_kind.role() != kind.role() {
            return Err(DadlError::ModeMismatch(out_kind));
        }
        if codes.nrows() != mode.size {
            return Err(DadlError::DimensionMismatch(format!(
                "mode {kind:?} has size {}, code matrix has {} rows",
                mode.size,
                codes.nrows()
            )));
        }
        let m = codes.ncols();
        let new_label = ModeLabel::new(out_kind, m)?;
        let role = kind.role();

        if self.col.kind == kind {
            return DomainGrid::new(self.cell_dim, self.outer, self.inner, new_label, &self.data * codes);
        }

        let relabel = |l: ModeLabel| if l.kind == kind { new_label } else { l };
        let mut out = DomainGrid::zeros(
            self.cell_dim,
            relabel(self.outer),
            relabel(self.inner),
            self.col,
        )?;
        let slot = role.slot();
        let mut src_idx;
        for dst in out.indices().collect::<Vec<_>>() {
            let dst_cell = out.cell_mut(dst);
            for t in 0..mode.size {
                let w = codes[(t, dst[slot])];
                if w == 0.0 {
                    continue;
                }
                src_idx = dst;
                src_idx[slot] = t;
                let src = self.cell(src_idx);
                for (o, s) in dst_cell.iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
        Ok(out)
    }

    /// Sub-grid keeping only the listed positions along `role`, in the order
    /// given. The layout is unchanged.
    pub fn select(&self, role: Role, keep: &[usize]) -> Result<DomainGrid> {
        let mode = self.mode(role);
        if keep.is_empty() || keep.iter().any(|&i| i >= mode.size) {
            return Err(DadlError::DimensionMismatch(format!(
                "selection {keep:?} is invalid for a {:?} mode of size {}",
                mode.kind, mode.size
            )));
        }
        let relabel = |l: ModeLabel| {
            if l.kind.role() == role {
                ModeLabel { kind: l.kind, size: keep.len() }
            } else {
                l
            }
        };
        let mut out = DomainGrid::zeros(self.cell_dim, relabel(self.outer), relabel(self.inner), relabel(self.col))?;
        let slot = role.slot();
        for dst in out.indices().collect::<Vec<_>>() {
            let mut src = dst;
            src[slot] = keep[dst[slot]];
            out.cell_mut(dst).copy_from_slice(self.cell(src));
        }
        Ok(out)
    }

    /// Right-multiply by `codes`, contracting the column axis.
    pub fn times(&self, codes: &DMatrix<f64>) -> Result<DomainGrid> {
        self.contract(self.col.kind, codes)
    }
}

/// Free-function form of [`DomainGrid::vt`].
pub fn vt(grid: &DomainGrid, target: FormId) -> DomainGrid {
    grid.vt(target)
}

/// Free-function form of [`DomainGrid::contract`].
pub fn contract(grid: &DomainGrid, kind: ModeKind, codes: &DMatrix<f64>) -> Result<DomainGrid> {
    grid.contract(kind, codes)
}

/// The domain base dictionary `D[p, α, β, γ]`: one `n`-dimensional atom per
/// (pose-atom, subject-atom, illumination-atom) triple.
///
/// Stored flat with `p` fastest, then `α`, `β`, `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseDictionary {
    n: usize,
    d_a: usize,
    d_b: usize,
    d_c: usize,
    data: Vec<f64>,
}

impl BaseDictionary {
    pub fn new(n: usize, d_a: usize, d_b: usize, d_c: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d_a == 0 || d_b == 0 || d_c == 0 {
            return Err(DadlError::DimensionMismatch(
                "base dictionary dimensions must be >= 1".into(),
            ));
        }
        if data.len() != n * d_a * d_b * d_c {
            return Err(DadlError::DimensionMismatch(format!(
                "base dictionary needs {} entries, got {}",
                n * d_a * d_b * d_c,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DadlError::DimensionMismatch(
                "base dictionary has non-finite entries".into(),
            ));
        }
        Ok(Self {
            n,
            d_a,
            d_b,
            d_c,
            data,
        })
    }

    pub fn zeros(n: usize, d_a: usize, d_b: usize, d_c: usize) -> Result<Self> {
        Self::new(n, d_a, d_b, d_c, vec![0.0; n * d_a * d_b * d_c])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Atom counts `(d_a, d_b, d_c)` for pose, subject, illumination.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.d_a, self.d_b, self.d_c)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn fiber_offset(&self, alpha: usize, beta: usize, gamma: usize) -> usize {
        self.n * (alpha + self.d_a * (beta + self.d_b * gamma))
    }

    pub fn get(&self, p: usize, alpha: usize, beta: usize, gamma: usize) -> f64 {
        self.data[self.fiber_offset(alpha, beta, gamma) + p]
    }

    pub fn fiber(&self, alpha: usize, beta: usize, gamma: usize) -> &[f64] {
        let o = self.fiber_offset(alpha, beta, gamma);
        &self.data[o..o + self.n]
    }

    pub fn fiber_mut(&mut self, alpha: usize, beta: usize, gamma: usize) -> &mut [f64] {
        let o = self.fiber_offset(alpha, beta, gamma);
        let n = self.n;
        &mut self.data[o..o + n]
    }

    fn atom_labels(&self) -> [ModeLabel; 3] {
        [
            ModeLabel {
                kind: ModeKind::SubjectAtom,
                size: self.d_b,
            },
            ModeLabel {
                kind: ModeKind::PoseAtom,
                size: self.d_a,
            },
            ModeLabel {
                kind: ModeKind::IllumAtom,
                size: self.d_c,
            },
        ]
    }

    /// View as a grid over the atom modes in the layout of `form`.
    pub fn as_grid(&self, form: FormId) -> DomainGrid {
        let mut g = DomainGrid::zeros_in_form(self.n, form, self.atom_labels())
            .expect("dictionary dimensions are validated");
        for beta in 0..self.d_b {
            for alpha in 0..self.d_a {
                for gamma in 0..self.d_c {
                    g.cell_mut([beta, alpha, gamma])
                        .copy_from_slice(self.fiber(alpha, beta, gamma));
                }
            }
        }
        g
    }

    /// Inverse of [`BaseDictionary::as_grid`]. Any grid is accepted; its
    /// subject/pose/illum axes become the β/α/γ atom axes.
    pub fn from_grid(grid: &DomainGrid) -> Result<Self> {
        let [d_b, d_a, d_c] = grid.sizes();
        let mut d = Self::zeros(grid.cell_dim(), d_a, d_b, d_c)?;
        for idx in grid.indices() {
            let [beta, alpha, gamma] = idx;
            d.fiber_mut(alpha, beta, gamma).copy_from_slice(grid.cell(idx));
        }
        if d.data.iter().any(|v| !v.is_finite()) {
            return Err(DadlError::DimensionMismatch(
                "base dictionary has non-finite entries".into(),
            ));
        }
        Ok(d)
    }
}

/// `y[p] = Σ D[p,α,β,γ]·a[α]·b[β]·c[γ]`.
pub fn synthesize(d: &BaseDictionary, a: &[f64], b: &[f64], c: &[f64]) -> Result<DVector<f64>> {
    let (d_a, d_b, d_c) = d.dims();
    if a.len() != d_a || b.len() != d_b || c.len() != d_c {
        return Err(DadlError::DimensionMismatch(format!(
            "codes have lengths ({}, {}, {}), dictionary expects ({d_a}, {d_b}, {d_c})",
            a.len(),
            b.len(),
            c.len()
        )));
    }
    let mut y = DVector::zeros(d.n());
    for (gamma, &cg) in c.iter().enumerate() {
        if cg == 0.0 {
            continue;
        }
        for (beta, &bb) in b.iter().enumerate() {
            let w = cg * bb;
            if w == 0.0 {
                continue;
            }
            for (alpha, &aa) in a.iter().enumerate() {
                let coef = w * aa;
                if coef == 0.0 {
                    continue;
                }
                for (yp, dp) in y.iter_mut().zip(d.fiber(alpha, beta, gamma)) {
                    *yp += coef * dp;
                }
            }
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lbl(kind: ModeKind, size: usize) -> ModeLabel {
        ModeLabel::new(kind, size).unwrap()
    }

    fn random_grid(rng: &mut ChaCha8Rng, n: usize, k: usize, j: usize, l: usize, form: FormId) -> DomainGrid {
        let labels = [
            lbl(ModeKind::Subject, k),
            lbl(ModeKind::Pose, j),
            lbl(ModeKind::Illum, l),
        ];
        let mut g = DomainGrid::zeros_in_form(n, form, labels).unwrap();
        for v in g.data.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        g
    }

    #[test]
    fn single_cell_is_fixed_by_every_vt() {
        let labels = [
            lbl(ModeKind::Subject, 1),
            lbl(ModeKind::Pose, 1),
            lbl(ModeKind::Illum, 1),
        ];
        let mut g = DomainGrid::zeros_in_form(2, FormId::F3, labels).unwrap();
        g.cell_mut([0, 0, 0]).copy_from_slice(&[5.0, -2.0]);
        for f in FormId::ALL {
            let t = g.vt(f);
            assert_eq!(t.data().as_slice(), &[5.0, -2.0]);
            assert_eq!(t.form(), f);
        }
    }

    #[test]
    fn two_poses_form2_to_form1() {
        // Form 2: columns are poses, a 1x2 matrix [10, 20].
        let labels = [
            lbl(ModeKind::Subject, 1),
            lbl(ModeKind::Pose, 2),
            lbl(ModeKind::Illum, 1),
        ];
        let data = DMatrix::from_row_slice(1, 2, &[10.0, 20.0]);
        let g = DomainGrid::new(1, labels[2], labels[0], labels[1], data).unwrap();
        assert_eq!(g.form(), FormId::F2);
        let f1 = g.vt(FormId::F1);
        assert_eq!(f1.data().shape(), (2, 1));
        assert_eq!(f1.data().as_slice(), &[10.0, 20.0]);
    }

    #[test]
    fn vt_matches_layout_rule_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, k, j, l) = (2, 2, 3, 2);
        let g = random_grid(&mut rng, n, k, j, l, FormId::F1);
        let sizes = [k, j, l];
        // Independent oracle: place each entry using the layout table directly.
        let place = |form: FormId, idx: [usize; 3], p: usize| -> (usize, usize) {
            let lay = form.layout();
            let (u, v, w) = (idx[lay.outer.slot()], idx[lay.inner.slot()], idx[lay.col.slot()]);
            ((u * sizes[lay.inner.slot()] + v) * n + p, w)
        };
        for fi in FormId::ALL {
            let gi = g.vt(fi);
            for fj in FormId::ALL {
                let gij = gi.vt(fj);
                let gj = g.vt(fj);
                assert_eq!(gij, gj);
                for kk in 0..k {
                    for jj in 0..j {
                        for ll in 0..l {
                            for p in 0..n {
                                let src = place(FormId::F1, [kk, jj, ll], p);
                                let dst = place(fj, [kk, jj, ll], p);
                                assert_eq!(gj.data()[dst], g.data()[src]);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn contract_identity_and_one_hot() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_grid(&mut rng, 3, 2, 3, 4, FormId::F5);
        for role in Role::ALL {
            let kind = ModeKind::content(role);
            let size = g.mode(role).size;
            let id = g.contract(kind, &DMatrix::identity(size, size)).unwrap();
            assert_eq!(id.data(), g.data());
            let t = size - 1;
            let mut e = DMatrix::zeros(size, 1);
            e[(t, 0)] = 1.0;
            let slice = g.contract(kind, &e).unwrap();
            for idx in slice.indices() {
                let mut src = idx;
                src[role.slot()] = t;
                assert_eq!(slice.cell(idx), g.cell(src));
            }
        }
    }

    #[test]
    fn contract_direct_sum() {
        let labels = [
            lbl(ModeKind::SubjectAtom, 1),
            lbl(ModeKind::PoseAtom, 2),
            lbl(ModeKind::IllumAtom, 1),
        ];
        let mut g = DomainGrid::zeros_in_form(1, FormId::F1, labels).unwrap();
        g.cell_mut([0, 0, 0])[0] = 3.0;
        g.cell_mut([0, 1, 0])[0] = 4.0;
        let codes = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let out = g.contract(ModeKind::PoseAtom, &codes).unwrap();
        assert_eq!(out.mode(Role::Pose).kind, ModeKind::Pose);
        assert_eq!(out.cell([0, 0, 0]), &[11.0]);
    }

    #[test]
    fn contract_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_grid(&mut rng, 2, 2, 2, 2, FormId::F1);
        assert!(matches!(
            g.contract(ModeKind::PoseAtom, &DMatrix::zeros(2, 2)),
            Err(DadlError::ModeMismatch(ModeKind::PoseAtom))
        ));
        assert!(matches!(
            g.contract(ModeKind::Pose, &DMatrix::zeros(3, 2)),
            Err(DadlError::DimensionMismatch(_))
        ));
    }

    fn random_dict(rng: &mut ChaCha8Rng, n: usize, d_a: usize, d_b: usize, d_c: usize) -> BaseDictionary {
        let data = (0..n * d_a * d_b * d_c)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        BaseDictionary::new(n, d_a, d_b, d_c, data).unwrap()
    }

    #[test]
    fn synthesize_one_hot_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = random_dict(&mut rng, 4, 2, 3, 2);
        let y = synthesize(&d, &[0.0, 1.0], &[0.0, 0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(y.as_slice(), d.fiber(1, 2, 0));
        let z = synthesize(&d, &[0.0, 0.0], &[1.0, 2.0, 3.0], &[1.0, 1.0]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        assert!(synthesize(&d, &[1.0], &[1.0, 2.0, 3.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn synthesize_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = random_dict(&mut rng, 3, 2, 2, 2);
        let a: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let c: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = synthesize(&d, &a, &b, &c).unwrap();
        for p in 0..3 {
            let mut s = 0.0;
            for al in 0..2 {
                for be in 0..2 {
                    for ga in 0..2 {
                        s += d.get(p, al, be, ga) * a[al] * b[be] * c[ga];
                    }
                }
            }
            assert!((y[p] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn as_grid_round_trip_and_form4_position() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = random_dict(&mut rng, 2, 2, 3, 2);
        for f in FormId::ALL {
            assert_eq!(BaseDictionary::from_grid(&d.as_grid(f)).unwrap(), d);
        }
        // Form 4: rows (SubjectAtom outer, IllumAtom inner), cols PoseAtom.
        // Entry D[1,2,1,2] (1-based), i.e. p=0, α=1, β=0, γ=1.
        let g4 = d.as_grid(FormId::F4);
        assert_eq!(g4.data().shape(), (2 * 3 * 2, 2));
        let (p, alpha, beta, gamma) = (0, 1, 0, 1);
        let row = (beta * 2 + gamma) * 2 + p;
        assert_eq!(g4.data()[(row, alpha)], d.get(p, alpha, beta, gamma));
    }

    #[test]
    fn unit_dictionary_grid() {
        let d = BaseDictionary::new(3, 1, 1, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let g = d.as_grid(FormId::F2);
        assert_eq!(g.data().shape(), (3, 1));
        assert_eq!(g.data().as_slice(), &[1.0, 2.0, 3.0]);
    }
}
