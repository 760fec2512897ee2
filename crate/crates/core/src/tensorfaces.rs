//! N-mode SVD (Tensorfaces) baseline.
//!
//! The training grid is treated as a 4-way tensor over pixels, subjects,
//! poses and illuminations and factored as
//! `Y = Z ×ₛ U_subject ×ₚ U_pose ×ᵢ U_illum ×ₓ U_pixels`.
//! A probe is classified by projecting it onto the subject basis of every
//! training (pose, illum) pair and keeping the coefficient vector closest to a
//! row of `U_subject`.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{lstsq_svd, symmetric_eigen_desc};
use crate::multiarray::{DomainGrid, FormId, ModeKind, Role};
use crate::{DadlError, Result};

#[derive(Debug, Clone)]
pub struct HosvdModel {
    /// Core tensor: cells of length `r` over (subject, pose, illum) atom modes.
    pub core: DomainGrid,
    /// `K x K`.
    pub u_subject: DMatrix<f64>,
    /// `J x J`.
    pub u_pose: DMatrix<f64>,
    /// `L x L`.
    pub u_illum: DMatrix<f64>,
    /// `n x r`.
    pub u_pixels: DMatrix<f64>,
    /// One `n x K` basis per (pose, illum), index `j * L + l`.
    bases: Vec<DMatrix<f64>>,
}

/// Result of [`tf_extract_subject`].
#[derive(Debug, Clone)]
pub struct TfExtraction {
    /// Subject coefficients, length `K`.
    pub coefficients: DVector<f64>,
    pub pose: usize,
    pub illum: usize,
    /// Row of `U_subject` nearest to `coefficients`.
    pub subject: usize,
    /// Euclidean distance to that row.
    pub distance: f64,
    /// Set for an all-zero probe: every basis yields zero coefficients, so the
    /// match is arbitrary.
    pub degenerate: bool,
}

impl HosvdModel {
    pub fn n(&self) -> usize {
        self.u_pixels.nrows()
    }

    pub fn pixel_rank(&self) -> usize {
        self.u_pixels.ncols()
    }

    /// `(K, J, L)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.u_subject.nrows(), self.u_pose.nrows(), self.u_illum.nrows())
    }

    /// Basis `Z ×ₚ U_pose[j] ×ᵢ U_illum[l] ×ₓ U_pixels`, an `n x K` matrix
    /// whose product with row `k` of `U_subject` is the model image of cell
    /// `(k, j, l)`.
    pub fn basis(&self, j: usize, l: usize) -> &DMatrix<f64> {
        &self.bases[j * self.u_illum.nrows() + l]
    }

    /// Reconstructed Form-1 grid.
    pub fn reconstruct(&self) -> Result<DomainGrid> {
        let g = self
            .core
            .vt(FormId::F1)
            .contract(ModeKind::SubjectAtom, &self.u_subject.transpose())?
            .vt(FormId::F2)
            .contract(ModeKind::PoseAtom, &self.u_pose.transpose())?
            .vt(FormId::F3)
            .contract(ModeKind::IllumAtom, &self.u_illum.transpose())?
            .vt(FormId::F1);
        let mut out = DomainGrid::zeros(self.n(), g.outer(), g.inner(), g.col())?;
        for idx in g.indices() {
            let z = DVector::from_column_slice(g.cell(idx));
            out.cell_mut(idx).copy_from_slice((&self.u_pixels * z).as_slice());
        }
        Ok(out)
    }
}

/// Pixel flattening: one column per cell.
fn pixel_flattening(y: &DomainGrid) -> DMatrix<f64> {
    let cells: Vec<_> = y.indices().collect();
    let mut m = DMatrix::zeros(y.cell_dim(), cells.len());
    for (i, idx) in cells.iter().enumerate() {
        m.column_mut(i).copy_from_slice(y.cell(*idx));
    }
    m
}

/// Left singular vectors of the column flattening, as eigenvectors of its Gram.
fn mode_matrix(y: &DomainGrid, form: FormId) -> DMatrix<f64> {
    let g = y.vt(form);
    let gram = g.data().tr_mul(g.data());
    symmetric_eigen_desc(gram).1
}

/// N-mode SVD of a complete content grid. `pixel_rank` truncates the pixel
/// mode; `None` keeps `min(n, K·J·L)` components.
pub fn hosvd(y: &DomainGrid, pixel_rank: Option<usize>) -> Result<HosvdModel> {
    for m in y.labels() {
        if m.kind.is_atom() {
            return Err(DadlError::ModeMismatch(ModeKind::content(m.kind.role())));
        }
    }
    if y.data().iter().any(|v| !v.is_finite()) {
        return Err(DadlError::IncompleteGrid("training grid has non-finite entries".into()));
    }
    let n = y.cell_dim();
    let [k, j, l] = y.sizes();
    let flat = pixel_flattening(y);
    let full = n.min(k * j * l);
    let r = pixel_rank.unwrap_or(full);
    if r == 0 || r > full {
        return Err(DadlError::Config(format!("pixel rank must be in 1..={full}, got {r}")));
    }
    let u_pixels = if n <= flat.ncols() {
        symmetric_eigen_desc(&flat * flat.transpose()).1.columns(0, r).into_owned()
    } else {
        let svd = flat.clone().svd(true, false);
        let u = svd.u.expect("requested u");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        DMatrix::from_fn(n, r, |row, c| u[(row, order[c])])
    };

    let u_subject = mode_matrix(y, FormId::F1);
    let u_pose = mode_matrix(y, FormId::F2);
    let u_illum = mode_matrix(y, FormId::F3);

    let mut projected = DomainGrid::zeros(r, y.outer(), y.inner(), y.col())?;
    for idx in y.indices() {
        let cell = DVector::from_column_slice(y.cell(idx));
        projected.cell_mut(idx).copy_from_slice(u_pixels.tr_mul(&cell).as_slice());
    }
    let core = projected
        .vt(FormId::F1)
        .contract_as(ModeKind::Subject, &u_subject, ModeKind::SubjectAtom)?
        .vt(FormId::F2)
        .contract_as(ModeKind::Pose, &u_pose, ModeKind::PoseAtom)?
        .vt(FormId::F3)
        .contract_as(ModeKind::Illum, &u_illum, ModeKind::IllumAtom)?;

    let bases = build_bases(&core, &u_pose, &u_illum, &u_pixels)?;
    Ok(HosvdModel {
        core,
        u_subject,
        u_pose,
        u_illum,
        u_pixels,
        bases,
    })
}

fn build_bases(
    core: &DomainGrid,
    u_pose: &DMatrix<f64>,
    u_illum: &DMatrix<f64>,
    u_pixels: &DMatrix<f64>,
) -> Result<Vec<DMatrix<f64>>> {
    // Contract pose and illum atoms back to content; subject stays in atom form.
    let g = core
        .vt(FormId::F2)
        .contract(ModeKind::PoseAtom, &u_pose.transpose())?
        .vt(FormId::F3)
        .contract(ModeKind::IllumAtom, &u_illum.transpose())?;
    let k = g.mode(Role::Subject).size;
    let (j_count, l_count) = (u_pose.nrows(), u_illum.nrows());
    let mut bases = Vec::with_capacity(j_count * l_count);
    for j in 0..j_count {
        for l in 0..l_count {
            let mut z = DMatrix::zeros(core.cell_dim(), k);
            for m in 0..k {
                z.column_mut(m).copy_from_slice(g.cell([m, j, l]));
            }
            bases.push(u_pixels * z);
        }
    }
    Ok(bases)
}

/// Exhaustive projection of `y` onto every (pose, illum) basis.
///
/// Least squares gives a subject coefficient vector per pair; the pair whose
/// vector lies closest (Euclidean) to some row of `U_subject` wins. Ties go
/// to the lowest `(j, l)`.
pub fn tf_extract_subject(y: &DVector<f64>, model: &HosvdModel) -> Result<TfExtraction> {
    if y.len() != model.n() {
        return Err(DadlError::DimensionMismatch(format!(
            "image has {} pixels, model expects {}",
            y.len(),
            model.n()
        )));
    }
    let (_, j_count, l_count) = model.counts();
    let degenerate = y.iter().all(|v| *v == 0.0);
    let mut best: Option<TfExtraction> = None;
    for j in 0..j_count {
        for l in 0..l_count {
            let coef = lstsq_svd(model.basis(j, l), y);
            let (subject, distance) = nearest_row(&model.u_subject, &coef);
            if best.as_ref().is_none_or(|b| distance < b.distance) {
                best = Some(TfExtraction {
                    coefficients: coef,
                    pose: j,
                    illum: l,
                    subject,
                    distance,
                    degenerate,
                });
            }
        }
    }
    Ok(best.expect("grid has at least one cell"))
}

/// Index and distance of the row of `u` nearest to `v`.
pub fn nearest_row(u: &DMatrix<f64>, v: &DVector<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, row) in u.row_iter().enumerate() {
        let d = row
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}
