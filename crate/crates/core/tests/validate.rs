use geomgt::rng::{derive_path, derive_seed, rng_from};
use geomgt::simulate::TbParams;
use geomgt::validate::{
    cdf_rmse, energy_test, expected_normal_distance, hz_beta, hz_test, synth_case, SynthKind, SynthSpec,
};
use ndarray::Array2;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn normal(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng_from(seed);
    Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(&mut rng))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hz_is_affine_invariant(seed in 0u64..1000, a in 0.2f64..5.0, b in -3f64..3.0, shift in -10f64..10.0) {
        let x = normal(80, 2, seed).mapv(|v| v.powi(3) + v);
        let y = Array2::from_shape_fn((80, 2), |(i, j)| {
            if j == 0 { a * x[[i, 0]] + shift } else { b * x[[i, 0]] + x[[i, 1]] - shift }
        });
        let p = hz_test(x.view()).unwrap();
        let q = hz_test(y.view()).unwrap();
        prop_assert!((p.statistic - q.statistic).abs() < 1e-8 * (1.0 + p.statistic));
    }

    #[test]
    fn cdf_rmse_of_identical_samples_is_zero(v in prop::collection::vec(-100f64..100.0, 1..100)) {
        let w = vec![1.0; v.len()];
        prop_assert!(cdf_rmse(&v, &w, &v).unwrap() < 1e-12);
        let shifted: Vec<f64> = v.iter().map(|x| x + 2.5).collect();
        prop_assert!((cdf_rmse(&v, &w, &shifted).unwrap() - 2.5).abs() < 1e-9);
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct(base in any::<u64>(), k in 0u64..1000) {
        prop_assert_eq!(derive_seed(base, k), derive_seed(base, k));
        prop_assert_ne!(derive_seed(base, k), derive_seed(base, k + 1));
        prop_assert_ne!(derive_path(base, &[k, 0]), derive_path(base, &[k, 1]));
    }
}

#[test]
fn reference_constants() {
    let beta = 1.0 / 2f64.sqrt() * (100.0 * (2.0 * 2.0 + 1.0) / 4.0f64).powf(1.0 / (2.0 + 4.0));
    assert!((hz_beta(100, 2) - beta).abs() < 1e-12);
    assert!((hz_beta(100, 2) - 1.5811).abs() < 1e-4);
    assert!((expected_normal_distance(2) - std::f64::consts::PI.sqrt()).abs() < 1e-9);
}

#[test]
fn tests_reject_a_clearly_skewed_sample() {
    let x = normal(300, 2, 5).mapv(f64::exp);
    assert!(hz_test(x.view()).unwrap().p_value < 0.01);
    assert!(energy_test(x.view(), 99, 1).unwrap().p_value < 0.05);
}

#[test]
fn energy_test_is_seed_reproducible() {
    let x = normal(100, 2, 6);
    let a = energy_test(x.view(), 49, 3).unwrap();
    let b = energy_test(x.view(), 49, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn synthetic_cases_are_seed_reproducible() {
    let quick = |seed| SynthSpec {
        tb: TbParams { lines: 100, harmonics: 20, standardize: false },
        ..SynthSpec::new(SynthKind::Inequality, 300, seed)
    };
    let a: geomgt::f64::SampleTable = synth_case(&quick(1)).unwrap();
    let b: geomgt::f64::SampleTable = synth_case(&quick(1)).unwrap();
    let c: geomgt::f64::SampleTable = synth_case(&quick(2)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.values().rows().into_iter().all(|r| 0.0 <= r[1] && r[1] <= r[0]));
}
