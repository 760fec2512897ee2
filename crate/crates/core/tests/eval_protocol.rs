use dadl::eval::{
    classify_subject, estimate_illum, estimate_pose, extract_all, recognize, recognition_rate, CodeTable,
    GalleryProbeProtocol, Matcher, Metric, SubjectExtractor,
};
use dadl::synthgen::{generate, SynthSpec};
use dadl::tensorfaces::hosvd;
use dadl::{learn_base_dictionary, Labels, Role};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

/// Ten subjects, five poses, four illuminations: 200 cells, each probed once
/// with fresh noise against the training codes.
#[test]
fn synthetic_protocol_identifies_subjects_and_poses() {
    let out = generate(&SynthSpec {
        n: 64,
        counts: (10, 5, 4),
        dims: (4, 10, 3),
        sparsity: (3, 4, 2),
        noise_sigma: 0.02,
        seed: 31,
    })
    .unwrap();
    let mut cfg = out.truth.config.clone();
    cfg.seed = 31;
    let model = learn_base_dictionary(&out.grid, Labels::numbered(10, 5, 4), &cfg).unwrap();
    let coder = model.coder();
    let gallery = CodeTable::from_model(&model, Role::Subject);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let probes: Vec<([usize; 3], DVector<f64>)> = out
        .grid
        .indices()
        .map(|idx| {
            let y = DVector::from_column_slice(out.clean.cell(idx)).map(|v| v + noise.sample(&mut rng));
            (idx, y)
        })
        .collect();
    let results: Vec<_> = probes
        .par_iter()
        .map(|(_, y)| {
            let d = coder.decompose(y).unwrap();
            (
                classify_subject(d.b.values(), &gallery, Metric::Cosine).unwrap(),
                estimate_pose(d.a.values(), &model, Metric::Cosine).unwrap(),
                estimate_illum(d.c.values(), &model, Metric::Cosine).unwrap(),
            )
        })
        .collect();
    let truth: Vec<usize> = probes.iter().map(|(idx, _)| idx[0]).collect();
    let pose_truth: Vec<usize> = probes.iter().map(|(idx, _)| idx[1]).collect();
    let subjects: Vec<usize> = results.iter().map(|r| r.0).collect();
    let poses: Vec<usize> = results.iter().map(|r| r.1).collect();
    let illums: Vec<(usize, usize)> = probes.iter().zip(&results).map(|((idx, _), r)| (idx[2], r.2)).collect();
    let subject_rate = recognition_rate(&truth, &subjects, 10).unwrap();
    let pose_rate = recognition_rate(&pose_truth, &poses, 5).unwrap();
    assert_eq!(subject_rate.total, 200);
    assert!(subject_rate.rate >= 0.95, "subject accuracy {}", subject_rate.rate);
    assert!(pose_rate.rate >= 0.90, "pose accuracy {}", pose_rate.rate);
    let illum_hits = illums.iter().filter(|(t, p)| t == p).count();
    assert!(illum_hits >= 180, "illumination hits {illum_hits}/200");
}

#[test]
fn probes_identical_to_gallery_are_all_recognized() {
    let out = generate(&SynthSpec {
        n: 32,
        counts: (4, 3, 2),
        dims: (3, 4, 2),
        sparsity: (2, 2, 1),
        noise_sigma: 0.0,
        seed: 2,
    })
    .unwrap();
    let mut cfg = out.truth.config.clone();
    cfg.seed = 2;
    let model = learn_base_dictionary(&out.grid, Labels::numbered(4, 3, 2), &cfg).unwrap();
    let extractor = SubjectExtractor::Dadl(model.coder());
    let images: Vec<_> = (0..4).map(|k| (k, DVector::from_column_slice(out.grid.cell([k, 2, 1])))).collect();
    let codes = extract_all(&extractor, &images).unwrap();
    let run = recognize(&codes, codes.clone(), Metric::Cosine, 4).unwrap();
    assert_eq!(run.report.rate, 1.0);

    let protocol = GalleryProbeProtocol {
        gallery: (0..4).map(|k| [k, 0, 0]).collect(),
        probes: (0..4).map(|k| [k, 1, 1]).collect(),
        matcher: Matcher::Tensorfaces,
    };
    assert!(protocol.run(&out.grid, &extractor, Metric::Cosine).is_err());
    let tf = hosvd(&out.grid, None).unwrap();
    let run = protocol.run(&out.grid, &SubjectExtractor::Tensorfaces(&tf), Metric::Cosine).unwrap();
    assert_eq!(run.report.total, 4);
    assert_eq!(run.probes.labels, vec![0, 1, 2, 3]);
}

#[test]
fn single_probe_with_only_a_wrong_enrollment_scores_zero() {
    let mut gallery = CodeTable::new();
    gallery.push(1, DVector::from_column_slice(&[1.0, 0.0]));
    let probe = DVector::from_column_slice(&[1.0, 0.0]);
    let predicted = classify_subject(&probe, &gallery, Metric::Cosine).unwrap();
    assert_eq!(recognition_rate(&[0], &[predicted], 2).unwrap().rate, 0.0);
}
