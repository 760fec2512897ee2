use dadl::multiarray::ModeLabel;
use dadl::pursuit::{normalize_columns, omp};
use dadl::synthgen::exhaustive_sparse_fit;
use dadl::{BaseDictionary, DomainGrid, FormId, ModeKind};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn two_pose_grid_moves_from_form_2_to_form_1() {
    // Form 2: poses as columns, one row block (illum 0, subject 0).
    let g = DomainGrid::new(
        1,
        ModeLabel::new(ModeKind::Illum, 1).unwrap(),
        ModeLabel::new(ModeKind::Subject, 1).unwrap(),
        ModeLabel::new(ModeKind::Pose, 2).unwrap(),
        DMatrix::from_row_slice(1, 2, &[10.0, 20.0]),
    )
    .unwrap();
    assert_eq!(g.form(), FormId::F2);
    let f1 = g.vt(FormId::F1);
    assert_eq!(f1.data().shape(), (2, 1));
    assert_eq!(f1.data().as_slice(), &[10.0, 20.0]);
}

#[test]
fn base_dictionary_form_4_positions() {
    let (n, da, db, dc) = (2, 2, 3, 2);
    let data: Vec<f64> = (0..n * da * db * dc).map(|i| i as f64).collect();
    let d = BaseDictionary::new(n, da, db, dc, data).unwrap();
    let g = d.as_grid(FormId::F4);
    // Form 4: pose atoms as columns, rows (subject atom outer, illum atom inner).
    assert_eq!(g.col().kind, ModeKind::PoseAtom);
    for p in 0..n {
        for al in 0..da {
            for be in 0..db {
                for ga in 0..dc {
                    let row = (be * dc + ga) * n + p;
                    assert_eq!(g.data()[(row, al)], d.get(p, al, be, ga));
                }
            }
        }
    }
    // The entry written 1-based as D[1, 2, 1, 2]: subject atom 0 and illum
    // atom 1 give row block 1.
    assert_eq!(g.data()[(n, 1)], d.get(0, 1, 0, 1));
    for f in 1..=6 {
        let back = BaseDictionary::from_grid(&d.as_grid(FormId::new(f).unwrap())).unwrap();
        assert_eq!(back, d);
    }
}

#[test]
fn omp_matches_exhaustive_on_two_atom_mixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut agreed = 0;
    for _ in 0..200 {
        let d = normalize_columns(&DMatrix::from_fn(6, 10, |_, _| StandardNormal.sample(&mut rng))).0;
        let x1: f64 = StandardNormal.sample(&mut rng);
        let x2: f64 = StandardNormal.sample(&mut rng);
        let y: DVector<f64> = d.column(2) * x1 + d.column(7) * x2;
        let gr = omp(&d, &y, 2, 0.0).unwrap();
        let ex = exhaustive_sparse_fit(&d, &y, 2).unwrap();
        let og = (&y - &d * gr.values()).norm();
        let oe = (&y - &d * &ex).norm();
        assert!(oe <= og + 1e-12);
        if og - oe <= 1e-9 {
            agreed += 1;
            assert!((gr.values() - &ex).amax() < 1e-6);
        }
    }
    assert!(agreed >= 150, "{agreed}/200");
}
