//! Subcommand implementations.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use dadl::eval::{
    best_match, extract_all, recognize, CodeTable, Metric, RecognitionRun, SubjectExtractor,
};
use dadl::io::{
    corpus_from_manifest, load_images, load_model, read_pgm, save_corpus, save_model, write_pgm, Corpus,
    GrayImage, LoadMode, Manifest,
};
use dadl::synthgen::{generate, SynthSpec};
use dadl::tensorfaces::{hosvd, tf_extract_subject, HosvdModel};
use dadl::{
    compose, learn_base_dictionary, subject_code, DadlConfig, DadlError, DadlModel, Labels, Preset, Role, Selector,
};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::args::*;
use crate::output::{num, Format, Table};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(DadlError),
}

impl From<DadlError> for CliError {
    fn from(e: DadlError) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Train(a) => train(a),
        Command::Decompose(a) => decompose(a),
        Command::Compose(a) => compose_cmd(a),
        Command::Classify(a) => classify(a),
        Command::Estimate(a) => estimate(a),
        Command::Synth(a) => synth(a),
        Command::Baseline(a) => baseline(a),
        Command::Eval(a) => eval(a),
    }
}

fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            }
            fs::write(path, text).map_err(|e| io_error(path, e))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| io_error("<stdout>", e))?;
        }
    }
    Ok(())
}

fn io_error(path: impl Into<PathBuf>, source: std::io::Error) -> CliError {
    CliError::Core(DadlError::Io {
        path: path.into(),
        source,
    })
}

fn root_for(manifest: &Path, root: Option<&Path>) -> PathBuf {
    match root {
        Some(r) => r.to_path_buf(),
        None => manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    }
}

fn metric(m: MetricArg) -> Metric {
    match m {
        MetricArg::Cosine => Metric::Cosine,
        MetricArg::Euclidean => Metric::Euclidean,
    }
}

fn fields(rows: &[(&str, String)], format: Format) -> String {
    let mut t = Table::new(&["field", "value"]);
    for (k, v) in rows {
        t.push(vec![k.to_string(), v.clone()]);
    }
    t.render(format)
}

/// A named input image, with its manifest labels when it came from one.
struct Input {
    name: String,
    subject: Option<String>,
    pixels: DVector<f64>,
}

fn read_inputs(a: &ImageArgs) -> CliResult<Vec<Input>> {
    let mut inputs = Vec::new();
    for path in &a.images {
        let img = read_pgm(path)?;
        inputs.push(Input {
            name: path.display().to_string(),
            subject: None,
            pixels: DVector::from_vec(img.to_unit()),
        });
    }
    if let Some(m) = &a.manifest {
        let manifest = Manifest::read(m)?;
        let (images, _, _) = load_images(&manifest, &root_for(m, a.root.as_deref()))?;
        inputs.extend(images.into_iter().map(|img| Input {
            name: img.row.path,
            subject: Some(img.row.subject),
            pixels: img.pixels,
        }));
    }
    if inputs.is_empty() {
        return Err(CliError::Usage("no input images: pass --image or --manifest".into()));
    }
    Ok(inputs)
}

fn read_labeled(manifest: &Path, root: Option<&Path>) -> CliResult<Vec<Input>> {
    read_inputs(&ImageArgs {
        images: Vec::new(),
        manifest: Some(manifest.to_path_buf()),
        root: root.map(Path::to_path_buf),
    })
}

fn coding_model(a: &CodingArgs) -> CliResult<DadlModel> {
    let mut model = load_model(&a.model)?;
    if let Some(iters) = a.iters {
        model.config.coding_iters = iters;
    }
    if let Some(seed) = a.seed {
        model.config.seed = seed;
    }
    model.config.validate()?;
    Ok(model)
}

fn train(a: TrainArgs) -> CliResult<()> {
    let mut cfg = match a.preset {
        Some(p) => DadlConfig::from_preset(match p {
            PresetArg::D4 => Preset::D4,
            PresetArg::D10 => Preset::D10,
            PresetArg::D34 => Preset::D34,
            PresetArg::D32 => Preset::D32,
        }),
        None => match (a.dims, a.sparsity) {
            (Some(d), Some(s)) => DadlConfig::new(d, s),
            _ => return Err(CliError::Usage("train needs --dims and --sparsity, or --preset".into())),
        },
    };
    if let Some(d) = a.dims {
        cfg.dims = d;
    }
    if let Some(s) = a.sparsity {
        cfg.sparsity = s;
    }
    cfg.outer_iters = a.iters;
    cfg.seed = a.seed;
    if let Some(v) = a.ksvd_iters {
        cfg.ksvd_iters = v;
    }
    if let Some(v) = a.ksvd_restarts {
        cfg.ksvd_restarts = v;
    }
    if let Some(v) = a.restarts {
        cfg.restarts = v;
    }
    cfg.validate()?;
    let root = root_for(&a.corpus.manifest, a.corpus.root.as_deref());
    let corpus = corpus_from_manifest(&Manifest::read(&a.corpus.manifest)?, &root, LoadMode::Training)?;
    let mut model = learn_base_dictionary(&corpus.grid, corpus.labels, &cfg)?;
    model.image_shape = Some((corpus.width, corpus.height));
    save_model(&a.out, &model)?;
    let mut t = Table::new(&["iteration", "relative_error"]);
    for (i, e) in model.training_error.iter().enumerate() {
        t.push(vec![(i + 1).to_string(), num(*e)]);
    }
    emit(&t.render(a.output.format), None)
}

fn decompose(a: DecomposeArgs) -> CliResult<()> {
    let model = coding_model(&a.coding)?;
    let inputs = read_inputs(&a.images)?;
    let coder = model.coder();
    let results = inputs
        .par_iter()
        .map(|input| coder.decompose(&input.pixels))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&["image", "field", "index", "value"]);
    for (input, d) in inputs.iter().zip(&results) {
        for (field, code) in [("pose", &d.a), ("subject", &d.b), ("illum", &d.c)] {
            for (i, v) in code.as_slice().iter().enumerate() {
                t.push(vec![input.name.clone(), field.into(), i.to_string(), num(*v)]);
            }
        }
        let norm = input.pixels.norm();
        let relative = if norm > 0.0 { d.residual_norm / norm } else { d.residual_norm };
        for (field, value) in [
            ("residual", num(d.residual_norm)),
            ("relative_residual", num(relative)),
            ("iterations", d.iterations_used.to_string()),
            ("converged", d.converged.to_string()),
        ] {
            t.push(vec![input.name.clone(), field.into(), "0".into(), value]);
        }
    }
    emit(&t.render(a.output.format), a.out.as_deref())
}

fn decompose_image(model: &DadlModel, path: &Path) -> CliResult<dadl::Decomposition> {
    let img = read_pgm(path)?;
    Ok(model.decompose(&DVector::from_vec(img.to_unit()))?)
}

fn compose_cmd(a: ComposeArgs) -> CliResult<()> {
    let model = coding_model(&a.coding)?;
    let (w, h) = model
        .image_shape
        .ok_or_else(|| DadlError::ModelFormat("model has no image geometry".into()))?;
    let b = match (&a.image, &a.subject) {
        (Some(path), _) => decompose_image(&model, path)?.b.into_values().as_slice().to_vec(),
        (None, Some(label)) => subject_code(&model, Selector::Label(label))?,
        (None, None) => return Err(CliError::Usage("pass --image or --subject".into())),
    };
    let pose_code = a.pose_image.as_deref().map(|p| decompose_image(&model, p)).transpose()?;
    let illum_code = a.illum_image.as_deref().map(|p| decompose_image(&model, p)).transpose()?;
    let pose = match (&pose_code, &a.pose) {
        (Some(d), _) => Selector::Code(d.a.as_slice()),
        (None, Some(label)) => Selector::Label(label),
        (None, None) => return Err(CliError::Usage("pass --pose or --pose-image".into())),
    };
    let illum = match (&illum_code, &a.illum) {
        (Some(d), _) => Selector::Code(d.c.as_slice()),
        (None, Some(label)) => Selector::Label(label),
        (None, None) => return Err(CliError::Usage("pass --illum or --illum-image".into())),
    };
    let y = compose(&model, &b, pose, illum)?;
    write_pgm(&a.out, &GrayImage::from_unit(w, h, y.as_slice())?)?;
    Ok(())
}

/// Subject labels and codes to match probes against.
struct Enrollment {
    labels: Vec<String>,
    table: CodeTable,
}

impl Enrollment {
    fn from_training(model: &DadlModel) -> Self {
        Enrollment {
            labels: model.labels.subjects.clone(),
            table: CodeTable::from_model(model, Role::Subject),
        }
    }

    fn from_gallery(extractor: &SubjectExtractor<'_>, gallery: &[Input]) -> CliResult<Self> {
        let mut labels: Vec<String> = Vec::new();
        let mut indexed = Vec::with_capacity(gallery.len());
        for g in gallery {
            let s = g.subject.clone().expect("manifest inputs carry labels");
            let idx = position_or_push(&mut labels, &s);
            indexed.push((idx, g.pixels.clone()));
        }
        let table = extract_all(extractor, &indexed)?;
        Ok(Enrollment { labels, table })
    }
}

fn position_or_push(labels: &mut Vec<String>, s: &str) -> usize {
    match labels.iter().position(|l| l == s) {
        Some(i) => i,
        None => {
            labels.push(s.to_string());
            labels.len() - 1
        }
    }
}

fn classify(a: ClassifyArgs) -> CliResult<()> {
    let model = coding_model(&a.coding)?;
    let inputs = read_inputs(&a.images)?;
    let coder = model.coder();
    let extractor = SubjectExtractor::Dadl(model.coder());
    let enrolled = match &a.gallery {
        Some(g) => Enrollment::from_gallery(&extractor, &read_labeled(g, a.images.root.as_deref())?)?,
        None => Enrollment::from_training(&model),
    };
    let m = metric(a.metric);
    let matches = inputs
        .par_iter()
        .map(|input| {
            let d = coder.decompose(&input.pixels)?;
            best_match(&enrolled.table, d.b.values(), m)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&["image", "subject", "score"]);
    for (input, hit) in inputs.iter().zip(&matches) {
        t.push(vec![input.name.clone(), enrolled.labels[hit.label].clone(), num(hit.score)]);
    }
    emit(&t.render(a.output.format), None)
}

fn estimate(a: EstimateArgs) -> CliResult<()> {
    let model = coding_model(&a.coding)?;
    let inputs = read_inputs(&a.images)?;
    let coder = model.coder();
    let m = metric(a.metric);
    let poses = CodeTable::from_model(&model, Role::Pose);
    let illums = CodeTable::from_model(&model, Role::Illum);
    let hits = inputs
        .par_iter()
        .map(|input| {
            let d = coder.decompose(&input.pixels)?;
            Ok((best_match(&poses, d.a.values(), m)?, best_match(&illums, d.c.values(), m)?))
        })
        .collect::<Result<Vec<_>, DadlError>>()?;
    let mut t = Table::new(&["image", "pose", "pose_score", "illum", "illum_score"]);
    for (input, (p, l)) in inputs.iter().zip(&hits) {
        t.push(vec![
            input.name.clone(),
            model.labels.poses[p.label].clone(),
            num(p.score),
            model.labels.illums[l.label].clone(),
            num(l.score),
        ]);
    }
    emit(&t.render(a.output.format), None)
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let (w, h) = a.size;
    let spec = SynthSpec {
        n: w * h,
        counts: a.counts,
        dims: a.dims,
        sparsity: a.sparsity,
        noise_sigma: a.noise,
        seed: a.seed,
    };
    let out = generate(&spec)?;
    let (lo, hi) = out
        .grid
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let scale = if hi > lo { 1.0 / (hi - lo) } else { 1.0 };
    let offset = -lo * scale;
    let mapped = out.grid.data().map(|v| v * scale + offset);
    let grid = dadl::DomainGrid::new(out.grid.cell_dim(), out.grid.outer(), out.grid.inner(), out.grid.col(), mapped)?;
    let (k, j, l) = a.counts;
    let labels = Labels {
        subjects: (0..k).map(|i| format!("s{i:02}")).collect(),
        poses: (0..j).map(|i| format!("p{i:02}")).collect(),
        illums: (0..l).map(|i| format!("i{i:02}")).collect(),
    };
    save_corpus(&a.out, &grid, &labels, w, h)?;
    let rows = [
        ("images", (k * j * l).to_string()),
        ("scale", num(scale)),
        ("offset", num(offset)),
    ];
    emit(&fields(&rows, a.output.format), None)
}

fn load_training(manifest: &Path, root: Option<&Path>) -> CliResult<Corpus> {
    let root = root_for(manifest, root);
    Ok(corpus_from_manifest(&Manifest::read(manifest)?, &root, LoadMode::Training)?)
}

/// Probe labels indexed against the enrolled labels, extending them with
/// subjects the gallery lacks.
fn index_probes(labels: &mut Vec<String>, probes: &[Input]) -> Vec<(usize, DVector<f64>)> {
    probes
        .iter()
        .map(|p| {
            let s = p.subject.as_deref().expect("manifest inputs carry labels");
            (position_or_push(labels, s), p.pixels.clone())
        })
        .collect()
}

fn report(
    run: &RecognitionRun,
    labels: &[String],
    probes: &[Input],
    head: Vec<(&str, String)>,
    out: Option<&Path>,
    format: Format,
) -> CliResult<()> {
    let mut rows = head;
    rows.push(("probes", run.report.total.to_string()));
    rows.push(("correct", run.report.correct.to_string()));
    rows.push(("rate", num(run.report.rate)));
    match run.pooled_stats() {
        Ok(s) => rows.push(("pooled_sd", num(s.pooled_sd))),
        Err(_) => rows.push(("pooled_sd", "nan".into())),
    }
    emit(&fields(&rows, format), None)?;
    if let Some(path) = out {
        let mut t = Table::new(&["image", "truth", "predicted"]);
        for ((p, truth), pred) in probes.iter().zip(&run.probes.labels).zip(&run.predicted) {
            t.push(vec![p.name.clone(), labels[*truth].clone(), labels[*pred].clone()]);
        }
        emit(&t.render(Format::Tsv), Some(path))?;
    }
    Ok(())
}

fn baseline(a: BaselineArgs) -> CliResult<()> {
    let corpus = load_training(&a.corpus.manifest, a.corpus.root.as_deref())?;
    let model = hosvd(&corpus.grid, a.rank)?;
    let recon = model.reconstruct()?;
    let rel = (corpus.grid.data() - recon.data()).norm() / corpus.grid.data().norm().max(f64::MIN_POSITIVE);
    let mut head = vec![
        ("matcher", "tensorfaces".to_string()),
        ("pixel_rank", model.pixel_rank().to_string()),
        ("relative_error", num(rel)),
    ];
    let Some(probe_path) = &a.probe else {
        return emit(&fields(&head, a.output.format), None);
    };
    head.push(("metric", format!("{:?}", a.metric).to_lowercase()));
    let extractor = SubjectExtractor::Tensorfaces(&model);
    let probes = read_labeled(probe_path, a.corpus.root.as_deref())?;
    let (run, labels) = run_tensorfaces(
        &extractor,
        &model,
        &corpus,
        a.gallery.as_deref(),
        a.corpus.root.as_deref(),
        &probes,
        metric(a.metric),
    )?;
    report(&run, &labels, &probes, head, a.out.as_deref(), a.output.format)
}

fn run_tensorfaces(
    extractor: &SubjectExtractor<'_>,
    model: &HosvdModel,
    corpus: &Corpus,
    gallery: Option<&Path>,
    root: Option<&Path>,
    probes: &[Input],
    m: Metric,
) -> CliResult<(RecognitionRun, Vec<String>)> {
    match gallery {
        Some(g) => {
            let enrolled = Enrollment::from_gallery(extractor, &read_labeled(g, root)?)?;
            let mut labels = enrolled.labels;
            let indexed = index_probes(&mut labels, probes);
            let codes = extract_all(extractor, &indexed)?;
            Ok((recognize(&enrolled.table, codes, m, labels.len())?, labels))
        }
        None => {
            // Without a gallery the subject is the nearest row of the subject mode matrix.
            let mut labels = corpus.labels.subjects.clone();
            let indexed = index_probes(&mut labels, probes);
            let extracted = indexed
                .par_iter()
                .map(|(_, y)| tf_extract_subject(y, model))
                .collect::<Result<Vec<_>, _>>()?;
            let predicted: Vec<usize> = extracted.iter().map(|e| e.subject).collect();
            let codes = CodeTable {
                labels: indexed.iter().map(|(label, _)| *label).collect(),
                codes: extracted.into_iter().map(|e| e.coefficients).collect(),
            };
            let report = dadl::eval::recognition_rate(&codes.labels, &predicted, labels.len())?;
            Ok((
                RecognitionRun {
                    report,
                    predicted,
                    probes: codes,
                },
                labels,
            ))
        }
    }
}

fn eval(a: EvalArgs) -> CliResult<()> {
    let m = metric(a.metric);
    let probes = read_labeled(&a.probe, a.root.as_deref())?;
    let mut head = vec![
        ("matcher", format!("{:?}", a.matcher).to_lowercase()),
        ("metric", format!("{:?}", a.metric).to_lowercase()),
    ];
    match a.matcher {
        MatcherArg::Dadl => {
            let model_path = a
                .model
                .as_ref()
                .ok_or_else(|| CliError::Usage("the dadl matcher needs --model".into()))?;
            let model = coding_model(&CodingArgs {
                model: model_path.clone(),
                iters: a.iters,
                seed: a.seed,
            })?;
            let extractor = SubjectExtractor::Dadl(model.coder());
            let enrolled = match &a.gallery {
                Some(g) => Enrollment::from_gallery(&extractor, &read_labeled(g, a.root.as_deref())?)?,
                None => Enrollment::from_training(&model),
            };
            let mut labels = enrolled.labels;
            let indexed = index_probes(&mut labels, &probes);
            let codes = extract_all(&extractor, &indexed)?;
            let run = recognize(&enrolled.table, codes, m, labels.len())?;
            report(&run, &labels, &probes, head, a.out.as_deref(), a.output.format)
        }
        MatcherArg::Tensorfaces => {
            let manifest = a
                .manifest
                .as_ref()
                .ok_or_else(|| CliError::Usage("the tensorfaces matcher needs --manifest".into()))?;
            let corpus = load_training(manifest, a.root.as_deref())?;
            let model = hosvd(&corpus.grid, None)?;
            head.push(("pixel_rank", model.pixel_rank().to_string()));
            let extractor = SubjectExtractor::Tensorfaces(&model);
            let (run, labels) =
                run_tensorfaces(&extractor, &model, &corpus, a.gallery.as_deref(), a.root.as_deref(), &probes, m)?;
            report(&run, &labels, &probes, head, a.out.as_deref(), a.output.format)
        }
    }
}
