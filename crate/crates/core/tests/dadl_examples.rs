use dadl::eval::{pooled_code_stats, unit_normalized};
use dadl::ksvd::{ksvd_learn, KsvdConfig};
use dadl::linalg::ridge_pinv;
use dadl::synthgen::{generate, SynthOutput, SynthSpec};
use dadl::tensorfaces::{hosvd, tf_extract_subject};
use dadl::{compose, learn_base_dictionary, DadlConfig, DadlModel, Labels, Preset, Role, Selector};
use nalgebra::{DMatrix, DVector};

fn cosine(a: &DVector<f64>, b: DVector<f64>) -> f64 {
    a.dot(&b) / (a.norm() * b.norm())
}

fn planted(seed: u64, counts: (usize, usize, usize), dims: (usize, usize, usize), caps: (usize, usize, usize)) -> SynthOutput {
    generate(&SynthSpec {
        n: 32,
        counts,
        dims,
        sparsity: caps,
        noise_sigma: 0.0,
        seed,
    })
    .unwrap()
}

fn learn(out: &SynthOutput, seed: u64) -> DadlModel {
    let mut cfg = out.truth.config.clone();
    cfg.seed = seed;
    let (k, j, l) = out.truth.counts();
    learn_base_dictionary(&out.grid, Labels::numbered(k, j, l), &cfg).unwrap()
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn planted_model_is_reconstructed() {
    for seed in [1, 2, 3] {
        let out = planted(seed, (4, 3, 3), (3, 4, 3), (2, 2, 2));
        let m = learn(&out, seed);
        assert_eq!(m.training_error.len(), 5);
        let err = *m.training_error.last().unwrap();
        assert!(err <= 1e-3, "seed {seed}: relative training error {err}");
    }
}

/// Alternating bilinear learner for `y[k, j] = Σ D[:, α, β] a_j[α] b_k[β]`,
/// working on plain matrices.
fn bilinear_reference(y: &[Vec<DVector<f64>>], da: usize, db: usize, ta: usize, tb: usize, iters: usize) -> Vec<Vec<DVector<f64>>> {
    let (k_count, j_count, n) = (y.len(), y[0].len(), y[0][0].len());
    // Subjects as columns, rows (pose, pixel).
    let y1 = DMatrix::from_fn(j_count * n, k_count, |r, k| y[k][r / n][r % n]);
    let cfg = |atoms, cap| KsvdConfig::new(atoms, cap, 500, 11).with_restarts(4);
    let mut b = ksvd_learn(&y1, &cfg(db, tb)).unwrap().codes;
    let mut a = DMatrix::zeros(da, j_count);
    let mut d = vec![DMatrix::<f64>::zeros(n, db); da];
    for _ in 0..iters {
        let m = &y1 * ridge_pinv(&b, 1e-10).unwrap();
        // Poses as columns, rows (subject atom, pixel).
        let m2 = DMatrix::from_fn(db * n, j_count, |r, j| m[(j * n + r % n, r / n)]);
        let fit = ksvd_learn(&m2, &cfg(da, ta)).unwrap();
        a = fit.codes;
        let dict = &m2 * ridge_pinv(&a, 1e-10).unwrap();
        for (alpha, slab) in d.iter_mut().enumerate() {
            *slab = DMatrix::from_fn(n, db, |p, beta| dict[(beta * n + p, alpha)]);
        }
        // Refit B against the current D and A.
        let m3 = DMatrix::from_fn(j_count * n, db, |r, beta| {
            (0..da).map(|alpha| d[alpha][(r % n, beta)] * a[(alpha, r / n)]).sum()
        });
        b = ridge_pinv(&m3, 1e-10).unwrap() * &y1;
    }
    (0..k_count)
        .map(|k| {
            (0..j_count)
                .map(|j| {
                    let mut v = DVector::zeros(n);
                    for alpha in 0..da {
                        v += &d[alpha] * b.column(k) * a[(alpha, j)];
                    }
                    v
                })
                .collect()
        })
        .collect()
}

#[test]
fn single_illumination_reduces_to_bilinear_learning() {
    let out = planted(5, (5, 4, 1), (3, 5, 1), (2, 3, 1));
    let m = learn(&out, 5);
    assert_eq!(m.illum_codes.shape(), (1, 1));
    let y: Vec<Vec<DVector<f64>>> = (0..5)
        .map(|k| (0..4).map(|j| DVector::from_column_slice(out.grid.cell([k, j, 0]))).collect())
        .collect();
    let reference = bilinear_reference(&y, 3, 5, 2, 3, 5);
    let recon = m.reconstruct().unwrap();
    for k in 0..5 {
        for j in 0..4 {
            let ours = DVector::from_column_slice(recon.cell([k, j, 0]));
            let diff = (&ours - &reference[k][j]).norm() / y[k][j].norm();
            assert!(diff <= 1e-6, "cell ({k}, {j}): {diff}");
        }
    }
}

#[test]
fn d10_configuration_is_accepted_and_echoed() {
    let mut cfg = DadlConfig::from_preset(Preset::D10);
    assert_eq!(cfg.dims, (10, 68, 9));
    assert_eq!(cfg.sparsity, (8, 20, 9));
    cfg.outer_iters = 1;
    cfg.ksvd_iters = 2;
    cfg.ksvd_restarts = 0;
    let out = generate(&SynthSpec {
        n: 2,
        counts: (68, 10, 9),
        dims: (10, 68, 9),
        sparsity: (8, 20, 9),
        noise_sigma: 0.0,
        seed: 1,
    })
    .unwrap();
    let m = learn_base_dictionary(&out.grid, Labels::numbered(68, 10, 9), &cfg).unwrap();
    assert_eq!(m.config.dims, (10, 68, 9));
    assert_eq!(m.config.sparsity, (8, 20, 9));
    assert_eq!(m.base.dims(), (10, 68, 9));
    assert_eq!(m.counts(), (68, 10, 9));
}

fn criterion_model(seed: u64) -> (SynthOutput, DadlModel) {
    let out = generate(&SynthSpec {
        n: 64,
        counts: (12, 5, 4),
        dims: (4, 12, 3),
        sparsity: (3, 4, 2),
        noise_sigma: 0.0,
        seed,
    })
    .unwrap();
    let m = learn(&out, seed);
    (out, m)
}

#[test]
fn training_cells_decompose_to_their_codes() {
    let (_, m) = criterion_model(2);
    let coder = m.coder();
    let mut good = 0;
    let mut total = 0;
    for k in 0..12 {
        for j in 0..5 {
            for l in 0..4 {
                let y = m.synthesize_cell(k, j, l).unwrap();
                let d = coder.decompose(&y).unwrap();
                total += 1;
                let ok = cosine(d.a.values(), m.pose_codes.column(j).into_owned()) >= 0.99
                    && cosine(d.b.values(), m.subject_codes.column(k).into_owned()) >= 0.99
                    && cosine(d.c.values(), m.illum_codes.column(l).into_owned()) >= 0.99
                    && d.residual_norm <= 1e-6 * y.norm()
                    && d.converged
                    && d.iterations_used <= 10;
                good += ok as usize;
            }
        }
    }
    assert!(good * 100 >= 95 * total, "{good}/{total}");
}

#[test]
fn zero_image_gives_zero_codes() {
    let (_, m) = criterion_model(1);
    let d = m.decompose(&DVector::zeros(64)).unwrap();
    assert_eq!(d.b.nnz(), 0);
    assert_eq!(d.residual_norm, 0.0);
}

#[test]
fn subject_support_does_not_depend_on_seed() {
    let (_, m) = criterion_model(3);
    let coder = m.coder();
    for (k, j, l) in [(0, 0, 0), (5, 2, 1), (11, 4, 3)] {
        let y = m.synthesize_cell(k, j, l).unwrap();
        let s1 = coder.decompose_seeded(&y, 1).unwrap().b.support();
        let s2 = coder.decompose_seeded(&y, 987_654).unwrap().b.support();
        assert_eq!(s1, s2, "cell ({k}, {j}, {l})");
    }
}

#[test]
fn decompose_then_compose_round_trips() {
    let (out, m) = criterion_model(4);
    assert!(*m.training_error.last().unwrap() < 1e-3);
    let coder = m.coder();
    for k in 0..12 {
        for (j, l) in [(0, 0), (2, 3), (4, 1)] {
            let y = DVector::from_column_slice(out.grid.cell([k, j, l]));
            let d = coder.decompose(&y).unwrap();
            let back = compose(&m, d.b.as_slice(), Selector::Code(d.a.as_slice()), Selector::Code(d.c.as_slice())).unwrap();
            assert!(rel(&back, &y) <= 1e-4, "cell ({k}, {j}, {l}): {}", rel(&back, &y));
        }
    }
}

#[test]
fn composition_with_swapped_illumination_matches_generator() {
    let (out, m) = criterion_model(6);
    let coder = m.coder();
    for (k, j, l, l2) in [(0, 0, 0, 1), (3, 2, 1, 3), (9, 4, 2, 0)] {
        let y = DVector::from_column_slice(out.grid.cell([k, j, l]));
        let d = coder.decompose(&y).unwrap();
        let target = DVector::from_column_slice(out.clean.cell([k, j, l2]));
        let img = compose(&m, d.b.as_slice(), Selector::Index(j), Selector::Index(l2)).unwrap();
        assert!(rel(&img, &target) <= 1e-2, "({k}, {j}, {l} -> {l2}): {}", rel(&img, &target));
        let by_code = compose(
            &m,
            d.b.as_slice(),
            Selector::Code(m.pose_codes.column(j).as_slice()),
            Selector::Label(&m.labels.illums[l2]),
        )
        .unwrap();
        assert_eq!(img, by_code);
    }
}

#[test]
fn generator_learn_decompose_closed_loop_on_held_out_cells() {
    // Hold out the last illumination; its code must be found by decomposition.
    let out = generate(&SynthSpec {
        n: 48,
        counts: (6, 4, 4),
        dims: (3, 6, 3),
        sparsity: (2, 3, 3),
        noise_sigma: 0.0,
        seed: 8,
    })
    .unwrap();
    let train = out.grid.select(Role::Illum, &[0, 1, 2]).unwrap();
    let mut cfg = out.truth.config.clone();
    cfg.seed = 8;
    let m = learn_base_dictionary(&train, Labels::numbered(6, 4, 3), &cfg).unwrap();
    let coder = m.coder();
    for k in 0..6 {
        for j in 0..4 {
            let y = DVector::from_column_slice(out.grid.cell([k, j, 3]));
            let d = coder.decompose(&y).unwrap();
            assert!(d.residual_norm <= 1e-2 * y.norm(), "({k}, {j}): {}", d.residual_norm / y.norm());
        }
    }
}

#[test]
fn subject_codes_vary_less_across_domains_than_tensorfaces_coefficients() {
    // Probes are held-out poses, so neither method has seen their domain.
    let out = generate(&SynthSpec {
        n: 48,
        counts: (6, 6, 4),
        dims: (4, 6, 3),
        sparsity: (2, 3, 2),
        noise_sigma: 0.0,
        seed: 12,
    })
    .unwrap();
    let train_poses = [0, 1, 2, 3];
    let train = out.grid.select(Role::Pose, &train_poses).unwrap();
    let mut cfg = out.truth.config.clone();
    cfg.seed = 12;
    let m = learn_base_dictionary(&train, Labels::numbered(6, 4, 4), &cfg).unwrap();
    let tf = hosvd(&train, None).unwrap();
    let coder = m.coder();
    let mut ours = vec![Vec::new(); 6];
    let mut theirs = vec![Vec::new(); 6];
    for k in 0..6 {
        for j in 0..6 {
            for l in 0..4 {
                let y = DVector::from_column_slice(out.grid.cell([k, j, l]));
                ours[k].push(coder.decompose(&y).unwrap().b.into_values());
                theirs[k].push(tf_extract_subject(&y, &tf).unwrap().coefficients);
            }
        }
    }
    let sd = |g: &[Vec<DVector<f64>>]| {
        let normed: Vec<_> = g.iter().map(|c| unit_normalized(c)).collect();
        pooled_code_stats(&normed).unwrap().pooled_sd
    };
    let (a, b) = (sd(&ours), sd(&theirs));
    assert!(a <= 0.1 * b, "dadl {a}, tensorfaces {b}");
    assert_eq!(m.codes(Role::Subject).ncols(), 6);
}
