//! Loading labeled image sets into domain grids.

use std::fs;
use std::path::Path;

use nalgebra::DVector;

use super::manifest::{Manifest, ManifestRow};
use super::pgm::{read_pgm, write_pgm, GrayImage};
use crate::dadl::Labels;
use crate::multiarray::{DomainGrid, FormId, ModeKind, ModeLabel};
use crate::{DadlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    /// Every (subject, pose, illum) combination must be present.
    Training,
    /// Missing cells are allowed.
    Partial,
}

/// A complete Form-1 grid with its labels and image geometry.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub grid: DomainGrid,
    pub labels: Labels,
    pub width: usize,
    pub height: usize,
}

/// One loaded image with its manifest row.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub row: ManifestRow,
    pub pixels: DVector<f64>,
}

/// Read every image of a manifest, checking that sizes agree.
/// Returns the images and their `(width, height)`.
pub fn load_images(manifest: &Manifest, root: &Path) -> Result<(Vec<LabeledImage>, usize, usize)> {
    let mut shape: Option<(usize, usize, String)> = None;
    let mut out = Vec::with_capacity(manifest.rows.len());
    for row in &manifest.rows {
        let path = root.join(&row.path);
        let img = read_pgm(&path)?;
        match &shape {
            None => shape = Some((img.width, img.height, row.path.clone())),
            Some((w, h, first)) if (*w, *h) != (img.width, img.height) => {
                return Err(DadlError::InconsistentDimensions(format!(
                    "{} is {}x{}, {first} is {w}x{h}",
                    row.path, img.width, img.height
                )));
            }
            Some(_) => {}
        }
        out.push(LabeledImage {
            row: row.clone(),
            pixels: DVector::from_vec(img.to_unit()),
        });
    }
    let (w, h, _) = shape.ok_or(DadlError::Manifest {
        line: 1,
        reason: "manifest lists no images".into(),
    })?;
    Ok((out, w, h))
}

/// Load a manifest into a Form-1 grid. Labels are ordered by first
/// appearance in the manifest.
pub fn load_corpus(manifest_path: &Path, root: &Path) -> Result<Corpus> {
    let manifest = Manifest::read(manifest_path)?;
    corpus_from_manifest(&manifest, root, LoadMode::Training)
}

/// Build a grid from a parsed manifest. In [`LoadMode::Partial`] missing
/// cells are left as zeros.
pub fn corpus_from_manifest(manifest: &Manifest, root: &Path, mode: LoadMode) -> Result<Corpus> {
    let labels = Labels {
        subjects: manifest.subjects(),
        poses: manifest.poses(),
        illums: manifest.illums(),
    };
    let (images, width, height) = load_images(manifest, root)?;
    let (k, j, l) = (labels.subjects.len(), labels.poses.len(), labels.illums.len());
    let mut grid = DomainGrid::zeros_in_form(
        width * height,
        FormId::F1,
        [
            ModeLabel::new(ModeKind::Subject, k)?,
            ModeLabel::new(ModeKind::Pose, j)?,
            ModeLabel::new(ModeKind::Illum, l)?,
        ],
    )?;
    let mut present = vec![false; k * j * l];
    for img in &images {
        let ks = index(&labels.subjects, &img.row.subject);
        let js = index(&labels.poses, &img.row.pose);
        let ls = index(&labels.illums, &img.row.illum);
        grid.cell_mut([ks, js, ls]).copy_from_slice(img.pixels.as_slice());
        present[(ks * j + js) * l + ls] = true;
    }
    if mode == LoadMode::Training {
        if let Some(pos) = present.iter().position(|p| !p) {
            let (ks, rest) = (pos / (j * l), pos % (j * l));
            return Err(DadlError::MissingCell {
                subject: labels.subjects[ks].clone(),
                pose: labels.poses[rest / l].clone(),
                illum: labels.illums[rest % l].clone(),
            });
        }
    }
    Ok(Corpus {
        grid,
        labels,
        width,
        height,
    })
}

fn index(labels: &[String], label: &str) -> usize {
    labels.iter().position(|l| l == label).expect("labels come from the manifest")
}

/// Write every cell of `grid` as a PGM under `dir/images/` plus
/// `dir/manifest.tsv`. Values are clamped to `[0, 1]` before quantization.
pub fn save_corpus(dir: &Path, grid: &DomainGrid, labels: &Labels, width: usize, height: usize) -> Result<Manifest> {
    if width * height != grid.cell_dim() {
        return Err(DadlError::DimensionMismatch(format!(
            "{width}x{height} images cannot hold {} pixels",
            grid.cell_dim()
        )));
    }
    let grid = grid.vt(FormId::F1);
    fs::create_dir_all(dir.join("images")).map_err(|e| DadlError::io(dir, e))?;
    let mut manifest = Manifest::default();
    let [k, j, l] = grid.sizes();
    for ks in 0..k {
        for js in 0..j {
            for ls in 0..l {
                let (s, p, i) = (&labels.subjects[ks], &labels.poses[js], &labels.illums[ls]);
                let rel = format!("images/{s}_{p}_{i}.pgm");
                let img = GrayImage::from_unit(width, height, grid.cell([ks, js, ls]))?;
                write_pgm(&dir.join(&rel), &img)?;
                manifest.push(&rel, s, p, i);
            }
        }
    }
    manifest.write(&dir.join("manifest.tsv"))?;
    Ok(manifest)
}
