use dispflow::kinetic::*;
use dispflow::spectral::{GridSpec, TimeGrid};
use proptest::prelude::*;

fn gaussian3(grid: GridSpec, c: [f64; 3], w: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x| (-(0..3).map(|i| (x[i] - c[i]).powi(2)).sum::<f64>() / w).exp()).unwrap()
}

#[test]
fn drury_ratio_scaling_and_translation() {
    let grid = GridSpec::new(3, 32, 6.0).unwrap();
    let g = gaussian3(grid, [0.0; 3], 1.0);
    let mut scaled = g.clone();
    scaled.values.iter_mut().for_each(|a| *a *= 3.5);
    let moved = gaussian3(grid, [0.8, -0.6, 0.4], 1.0);
    let r = drury_check(&[("g".into(), g), ("scaled".into(), scaled), ("moved".into(), moved)], 96).unwrap();
    assert!((r.rows[0].ratio - r.rows[1].ratio).abs() <= 1e-12 * r.rows[0].ratio);
    assert!((r.rows[0].ratio / r.rows[2].ratio - 1.0).abs() < 1e-2);
}

#[test]
fn functional_is_nonnegative_on_a_corpus() {
    let grid = GridSpec::new(3, 32, 8.0).unwrap();
    let f = Functional::calibrated(grid, 2.0 * std::f64::consts::PI).unwrap();
    for (c, w) in [([0.0; 3], 1.0), ([1.0, 0.5, 0.0], 2.0), ([0.0, -1.0, 1.0], 0.5)] {
        let value = f.eval(&gaussian3(grid, c, w)).unwrap();
        assert!(value > 0.0, "{c:?} {w}: {value}");
    }
}

#[test]
fn checkpoint_resume_matches_uninterrupted_run() {
    let grid = GridSpec::new(3, 16, 4.0).unwrap();
    let g = ScalarField::from_fn(grid, |x| (1.0 - x.iter().map(|c| c * c).sum::<f64>() / 4.0).max(0.0)).unwrap();
    let mut straight = DiffusionState::new(g.clone()).unwrap();
    let mut resumed = DiffusionState::new(g).unwrap();
    for _ in 0..3 {
        fast_diffusion_step(&mut straight).unwrap();
        fast_diffusion_step(&mut resumed).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.bin");
    resumed.save(&path).unwrap();
    let mut resumed = DiffusionState::load(&path).unwrap();
    for _ in 0..3 {
        fast_diffusion_step(&mut straight).unwrap();
        fast_diffusion_step(&mut resumed).unwrap();
    }
    assert_eq!(straight, resumed);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transport_preserves_mass(c in -1.0f64..1.0, w in 0.5f64..1.5, s in -1.0f64..1.0) {
        let x = GridSpec::new(1, 128, 10.0).unwrap();
        let v = GridSpec::new(1, 64, 4.0).unwrap();
        let f = PhaseField::from_fn(x, v, |x, v| (-(x[0] - c).powi(2) / w - v[0] * v[0]).exp()).unwrap();
        let r = rho(&f, &TimeGrid::single(s)).unwrap();
        let mass: f64 = r.slice(0).iter().map(|z| z.re).sum::<f64>() * x.spacing();
        prop_assert!((mass / f.integral() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn riesz_form_is_positive(c in -1.0f64..1.0, w in 0.5f64..2.0, lambda in 0.2f64..2.8) {
        let grid = GridSpec::new(3, 16, 5.0).unwrap();
        let g = gaussian3(grid, [c, 0.0, -c], w);
        prop_assert!(hls_form(&g, lambda).unwrap() > 0.0);
    }
}
