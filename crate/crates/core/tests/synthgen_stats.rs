use dadl::synthgen::{generate, SynthSpec};

/// With independent unit-norm random atoms, `E‖y‖² = E‖a‖² E‖b‖² E‖c‖²`
/// and every code entry is standard normal, so the mean squared cell norm
/// is `T_a · T_b · T_c`.
fn mean_energy(caps: (usize, usize, usize), seed: u64) -> f64 {
    let out = generate(&SynthSpec {
        n: 16,
        counts: (6, 4, 4),
        dims: (4, 6, 4),
        sparsity: caps,
        noise_sigma: 0.0,
        seed,
    })
    .unwrap();
    let cells = out.grid.indices().count() as f64;
    out.grid.indices().map(|i| out.grid.cell(i).iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / cells
}

/// Checks the 50-seed mean against `T_a · T_b · T_c`. The per-seed spread is
/// heavy tailed, so its standard deviation is taken from a separate block of
/// 500 seeds rather than from the 50 being tested.
fn check_energy(caps: (usize, usize, usize)) -> f64 {
    let seeds = 50;
    let mean = (0..seeds).map(|s| mean_energy(caps, s)).sum::<f64>() / seeds as f64;
    let reference: Vec<f64> = (10_000..10_500).map(|s| mean_energy(caps, s)).collect();
    let ref_mean = reference.iter().sum::<f64>() / reference.len() as f64;
    let sd = (reference.iter().map(|v| (v - ref_mean).powi(2)).sum::<f64>() / (reference.len() as f64 - 1.0)).sqrt();
    let expected = (caps.0 * caps.1 * caps.2) as f64;
    let se = sd / (seeds as f64).sqrt();
    assert!((mean - expected).abs() <= 3.0 * se, "caps {caps:?}: mean {mean}, expected {expected}, se {se}");
    mean
}

#[test]
fn mean_cell_energy_scales_with_caps() {
    let small = check_energy((1, 1, 1));
    let mid = check_energy((2, 2, 1));
    let large = check_energy((3, 4, 2));
    assert!(small < mid && mid < large);
}

#[test]
fn noise_adds_its_variance() {
    let spec = |sigma| SynthSpec {
        n: 64,
        counts: (4, 3, 3),
        dims: (3, 4, 2),
        sparsity: (2, 2, 1),
        noise_sigma: sigma,
        seed: 5,
    };
    let out = generate(&spec(0.3)).unwrap();
    let diff = out.grid.data() - out.clean.data();
    let var = diff.iter().map(|v| v * v).sum::<f64>() / diff.len() as f64;
    assert!((var - 0.09).abs() < 0.01, "{var}");
}
