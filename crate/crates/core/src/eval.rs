//! Recognition, domain estimation and code-consistency metrics.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dadl::{Coder, DadlModel};
use crate::multiarray::{CellIndex, DomainGrid, FormId, Role};
use crate::tensorfaces::{tf_extract_subject, HosvdModel};
use crate::{DadlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl Metric {
    /// Larger is better.
    pub fn score(self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self {
            Metric::Cosine => {
                let denom = a.norm() * b.norm();
                if denom == 0.0 {
                    0.0
                } else {
                    a.dot(b) / denom
                }
            }
            Metric::Euclidean => -(a - b).norm(),
        }
    }
}

/// Enrolled reference codes with their class labels.
#[derive(Debug, Clone, Default)]
pub struct CodeTable {
    pub labels: Vec<usize>,
    pub codes: Vec<DVector<f64>>,
}

impl CodeTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, label: usize, code: DVector<f64>) {
        self.labels.push(label);
        self.codes.push(code);
    }

    /// One entry per column, labeled by column index.
    pub fn from_columns(m: &DMatrix<f64>) -> Self {
        let mut t = Self::new();
        for (i, col) in m.column_iter().enumerate() {
            t.push(i, col.into_owned());
        }
        t
    }

    pub fn from_model(model: &DadlModel, role: Role) -> Self {
        Self::from_columns(model.codes(role))
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub label: usize,
    /// Index of the winning table entry.
    pub entry: usize,
    pub score: f64,
}

/// Best-scoring table entry for `probe`. Ties go to the lowest label, then
/// the earliest entry.
pub fn best_match(table: &CodeTable, probe: &DVector<f64>, metric: Metric) -> Result<Match> {
    if table.is_empty() {
        return Err(DadlError::EmptyGallery);
    }
    let mut best: Option<Match> = None;
    for (i, (code, &label)) in table.codes.iter().zip(&table.labels).enumerate() {
        if code.len() != probe.len() {
            return Err(DadlError::DimensionMismatch(format!(
                "probe code has length {}, enrolled code has {}",
                probe.len(),
                code.len()
            )));
        }
        let score = metric.score(code, probe);
        let better = match best {
            None => true,
            Some(b) => score > b.score || (score == b.score && label < b.label),
        };
        if better {
            best = Some(Match { label, entry: i, score });
        }
    }
    Ok(best.expect("table is non-empty"))
}

pub fn classify_subject(b: &DVector<f64>, table: &CodeTable, metric: Metric) -> Result<usize> {
    best_match(table, b, metric).map(|m| m.label)
}

/// Nearest column of the learned pose codes.
pub fn estimate_pose(a: &DVector<f64>, model: &DadlModel, metric: Metric) -> Result<usize> {
    best_match(&CodeTable::from_model(model, Role::Pose), a, metric).map(|m| m.label)
}

/// Nearest column of the learned illumination codes.
pub fn estimate_illum(c: &DVector<f64>, model: &DadlModel, metric: Metric) -> Result<usize> {
    best_match(&CodeTable::from_model(model, Role::Illum), c, metric).map(|m| m.label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Matcher {
    Dadl,
    Tensorfaces,
}

/// Source of subject codes for recognition.
#[allow(clippy::large_enum_variant)]
pub enum SubjectExtractor<'a> {
    /// Subject code `b` of a DADL decomposition.
    Dadl(Coder<'a>),
    /// Subject coefficient vector of the best-fitting tensorfaces basis.
    Tensorfaces(&'a HosvdModel),
}

impl SubjectExtractor<'_> {
    pub fn matcher(&self) -> Matcher {
        match self {
            SubjectExtractor::Dadl(_) => Matcher::Dadl,
            SubjectExtractor::Tensorfaces(_) => Matcher::Tensorfaces,
        }
    }

    pub fn extract(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            SubjectExtractor::Dadl(coder) => Ok(coder.decompose(y)?.b.into_values()),
            SubjectExtractor::Tensorfaces(model) => Ok(tf_extract_subject(y, model)?.coefficients),
        }
    }
}

/// Extract a code for every labeled image, in parallel, keeping input order.
pub fn extract_all(extractor: &SubjectExtractor<'_>, images: &[(usize, DVector<f64>)]) -> Result<CodeTable> {
    let codes = images
        .par_iter()
        .map(|(_, y)| extractor.extract(y))
        .collect::<Result<Vec<_>>>()?;
    Ok(CodeTable {
        labels: images.iter().map(|(label, _)| *label).collect(),
        codes,
    })
}

/// Outcome of matching a probe set against a gallery.
#[derive(Debug, Clone)]
pub struct RecognitionRun {
    pub report: RecognitionReport,
    pub predicted: Vec<usize>,
    /// Probe codes with their true labels.
    pub probes: CodeTable,
}

impl RecognitionRun {
    /// Pooled spread of the unit-normalized probe codes, grouped by true label.
    /// Labels with fewer than two probes are left out.
    pub fn pooled_stats(&self) -> Result<PooledStats> {
        let classes = self.report.confusion.nrows();
        let mut groups: Vec<Vec<DVector<f64>>> = vec![Vec::new(); classes];
        for (label, code) in self.probes.labels.iter().zip(&self.probes.codes) {
            groups[*label].push(code.clone());
        }
        let groups: Vec<_> = groups
            .into_iter()
            .filter(|g| g.len() >= 2)
            .map(|g| unit_normalized(&g))
            .collect();
        pooled_code_stats(&groups)
    }
}

/// Match each probe code against `gallery` and score against the probe labels.
pub fn recognize(gallery: &CodeTable, probes: CodeTable, metric: Metric, num_classes: usize) -> Result<RecognitionRun> {
    let predicted = probes
        .codes
        .iter()
        .map(|code| classify_subject(code, gallery, metric))
        .collect::<Result<Vec<_>>>()?;
    let report = recognition_rate(&probes.labels, &predicted, num_classes)?;
    Ok(RecognitionRun {
        report,
        predicted,
        probes,
    })
}

/// Gallery and probe cells of a recognition run. Cells are
/// `[subject, pose, illum]` indices into the evaluation corpus.
#[derive(Debug, Clone)]
pub struct GalleryProbeProtocol {
    pub gallery: Vec<CellIndex>,
    pub probes: Vec<CellIndex>,
    pub matcher: Matcher,
}

impl GalleryProbeProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.probes.is_empty() {
            return Err(DadlError::EmptyProtocol);
        }
        if let Some(c) = self.probes.iter().find(|p| self.gallery.contains(p)) {
            return Err(DadlError::Config(format!(
                "cell (subject {}, pose {}, illum {}) is both gallery and probe",
                c[0], c[1], c[2]
            )));
        }
        Ok(())
    }

    /// Run the protocol on cells of `grid`, labeling each cell by its subject.
    pub fn run(&self, grid: &DomainGrid, extractor: &SubjectExtractor<'_>, metric: Metric) -> Result<RecognitionRun> {
        self.validate()?;
        if extractor.matcher() != self.matcher {
            return Err(DadlError::Config(format!(
                "protocol expects the {:?} matcher, got {:?}",
                self.matcher,
                extractor.matcher()
            )));
        }
        let grid = grid.vt(FormId::F1);
        let [k, j, l] = grid.sizes();
        let cells = |idx: &[CellIndex]| -> Result<Vec<(usize, DVector<f64>)>> {
            idx.iter()
                .map(|&c| {
                    if c[0] >= k || c[1] >= j || c[2] >= l {
                        return Err(DadlError::DimensionMismatch(format!(
                            "cell ({}, {}, {}) outside a {k}x{j}x{l} grid",
                            c[0], c[1], c[2]
                        )));
                    }
                    Ok((c[0], DVector::from_column_slice(grid.cell(c))))
                })
                .collect()
        };
        let gallery = extract_all(extractor, &cells(&self.gallery)?)?;
        let probes = extract_all(extractor, &cells(&self.probes)?)?;
        recognize(&gallery, probes, metric, k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecognitionReport {
    pub rate: f64,
    pub correct: usize,
    pub total: usize,
    /// `confusion[(truth, predicted)]` probe counts.
    pub confusion: DMatrix<usize>,
}

/// Accuracy and confusion matrix of predicted against true labels.
pub fn recognition_rate(truth: &[usize], predicted: &[usize], num_classes: usize) -> Result<RecognitionReport> {
    if truth.is_empty() {
        return Err(DadlError::EmptyProtocol);
    }
    if truth.len() != predicted.len() {
        return Err(DadlError::DimensionMismatch(format!(
            "{} true labels, {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let classes = truth
        .iter()
        .chain(predicted)
        .map(|v| v + 1)
        .max()
        .unwrap_or(0)
        .max(num_classes);
    let mut confusion = DMatrix::zeros(classes, classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[(t, p)] += 1;
    }
    let correct = (0..classes).map(|i| confusion[(i, i)]).sum::<usize>();
    Ok(RecognitionReport {
        rate: correct as f64 / truth.len() as f64,
        correct,
        total: truth.len(),
        confusion,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledStats {
    /// Mean code per group.
    pub means: Vec<DVector<f64>>,
    /// Standard error of the mean per group and coefficient.
    pub std_errors: Vec<DVector<f64>>,
    /// Pooled within-group variance per coefficient.
    pub pooled_variance: DVector<f64>,
    /// Square root of the summed pooled variances.
    pub pooled_sd: f64,
}

/// Within-group spread of codes grouped by subject.
///
/// Per coefficient the pooled variance is `Σ_g (n_g−1)s_g² / Σ_g (n_g−1)`;
/// the scalar pooled standard deviation is the square root of its sum over
/// coefficients, which reduces to the usual definition for scalar codes.
pub fn pooled_code_stats(groups: &[Vec<DVector<f64>>]) -> Result<PooledStats> {
    let dim = groups
        .iter()
        .flat_map(|g| g.first())
        .map(|c| c.len())
        .next()
        .ok_or(DadlError::InsufficientSamples { group: 0, count: 0 })?;
    let mut means = Vec::with_capacity(groups.len());
    let mut std_errors = Vec::with_capacity(groups.len());
    let mut ss = DVector::zeros(dim);
    let mut dof = 0usize;
    for (gi, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(DadlError::InsufficientSamples {
                group: gi,
                count: g.len(),
            });
        }
        if g.iter().any(|c| c.len() != dim) {
            return Err(DadlError::DimensionMismatch(format!("group {gi} has codes of differing length")));
        }
        let count = g.len() as f64;
        let mean = g.iter().fold(DVector::zeros(dim), |acc, c| acc + c) / count;
        let mut group_ss: DVector<f64> = DVector::zeros(dim);
        for c in g {
            group_ss += (c - &mean).map(|v| v * v);
        }
        let var = &group_ss / (count - 1.0);
        std_errors.push(var.map(|v| (v / count).sqrt()));
        means.push(mean);
        ss += group_ss;
        dof += g.len() - 1;
    }
    let pooled_variance = ss / dof as f64;
    let pooled_sd = pooled_variance.sum().sqrt();
    Ok(PooledStats {
        means,
        std_errors,
        pooled_variance,
        pooled_sd,
    })
}

/// Codes rescaled to unit norm; zero codes are kept as zero.
pub fn unit_normalized(codes: &[DVector<f64>]) -> Vec<DVector<f64>> {
    codes
        .iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 {
                c / n
            } else {
                c.clone()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn table() -> CodeTable {
        CodeTable::from_columns(&DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]))
    }

    #[test]
    fn exact_code_matches_itself() {
        let t = table();
        for i in 0..3 {
            assert_eq!(classify_subject(&t.codes[i], &t, Metric::Cosine).unwrap(), i);
            assert_eq!(classify_subject(&t.codes[i], &t, Metric::Euclidean).unwrap(), i);
        }
    }

    #[test]
    fn negated_code_is_not_matched() {
        let t = table();
        assert_ne!(classify_subject(&v(&[-1.0, 0.0]), &t, Metric::Cosine).unwrap(), 0);
    }

    #[test]
    fn ties_go_to_lowest_label() {
        let t = CodeTable::from_columns(&DMatrix::identity(3, 3));
        assert_eq!(classify_subject(&v(&[1.0, 1.0, 1.0]), &t, Metric::Cosine).unwrap(), 0);
        assert!(matches!(
            classify_subject(&v(&[1.0]), &CodeTable::new(), Metric::Cosine),
            Err(DadlError::EmptyGallery)
        ));
    }

    #[test]
    fn rate_and_confusion() {
        let r = recognition_rate(&[0, 1, 1, 2], &[0, 1, 2, 2], 3).unwrap();
        assert_eq!(r.correct, 3);
        assert_eq!(r.rate, 0.75);
        assert_eq!(r.confusion[(1, 2)], 1);
        let trace: usize = (0..3).map(|i| r.confusion[(i, i)]).sum();
        assert_eq!(trace as f64 / r.total as f64, r.rate);
        assert_eq!(recognition_rate(&[1], &[0], 2).unwrap().rate, 0.0);
        assert!(matches!(recognition_rate(&[], &[], 2), Err(DadlError::EmptyProtocol)));
    }

    #[test]
    fn pooled_sd_hand_values() {
        let same = vec![vec![v(&[1.0, 2.0]), v(&[1.0, 2.0])]];
        assert_eq!(pooled_code_stats(&same).unwrap().pooled_sd, 0.0);
        let groups = vec![vec![v(&[0.0]), v(&[2.0])], vec![v(&[0.0]), v(&[2.0])]];
        let s = pooled_code_stats(&groups).unwrap();
        assert!((s.pooled_sd - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.means[0][0], 1.0);
        assert!((s.std_errors[0][0] - 1.0).abs() < 1e-15);
        assert!(matches!(
            pooled_code_stats(&[vec![v(&[1.0])]]),
            Err(DadlError::InsufficientSamples { group: 0, count: 1 })
        ));
    }

    #[test]
    fn protocol_rejects_overlap() {
        let p = GalleryProbeProtocol {
            gallery: vec![[0, 0, 0]],
            probes: vec![[0, 0, 0]],
            matcher: Matcher::Dadl,
        };
        assert!(p.validate().is_err());
        let empty = GalleryProbeProtocol {
            gallery: vec![[0, 0, 0]],
            probes: vec![],
            matcher: Matcher::Dadl,
        };
        assert!(matches!(empty.validate(), Err(DadlError::EmptyProtocol)));
    }
}
