#![allow(clippy::needless_range_loop)]

use geomgt::spatial::{
    experimental_variograms, maf_apply, maf_fit, maf_invert, model_gamma, Direction, LagSpec, Spherical, VariogramModel,
};
use ndarray::Array2;
use proptest::prelude::*;

fn sph(h: f64, a: f64) -> f64 {
    if h >= a {
        1.0
    } else {
        1.5 * h / a - 0.5 * (h / a).powi(3)
    }
}

fn cov_n(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows() as f64;
    let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
    let c = x - &mean;
    c.t().dot(&c) / n
}

fn table(n: usize) -> impl Strategy<Value = (Array2<f64>, Array2<f64>)> {
    (prop::collection::vec(0f64..100.0, n * 2), prop::collection::vec(-3f64..3.0, n * 3)).prop_map(move |(c, v)| {
        let coords = Array2::from_shape_fn((n, 3), |(i, j)| if j < 2 { c[2 * i + j] } else { 0.0 });
        let values = Array2::from_shape_fn((n, 3), |(i, j)| {
            let base = v[3 * i + j];
            base + 0.5 * v[3 * i]
        });
        (coords, values)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn model_matches_closed_form(nug in 0f64..0.5, s1 in 0.01f64..1.0, a1 in 1f64..100.0,
                                 s2 in 0.01f64..1.0, a2 in 1f64..100.0, h in 0f64..250.0) {
        let m = VariogramModel::isotropic(nug, &[(s1, a1), (s2, a2)]).unwrap();
        let expected = if h == 0.0 { 0.0 } else { nug + s1 * sph(h, a1) + s2 * sph(h, a2) };
        prop_assert!((model_gamma(&m, [h, 0.0, 0.0]) - expected).abs() < 1e-12);
        prop_assert!((m.gamma([0.0, h, 0.0]) - expected).abs() < 1e-12);
    }

    #[test]
    fn anisotropic_model_scales_vertical(ah in 5f64..100.0, av in 1f64..50.0, h in 0.1f64..80.0) {
        let m = VariogramModel::new(0.0, vec![Spherical { sill: 1.0, range_h: ah, range_v: av }]).unwrap();
        prop_assert!((m.gamma([0.0, 0.0, h]) - sph(h, av)).abs() < 1e-12);
        prop_assert!((m.gamma([h, 0.0, 0.0]) - sph(h, ah)).abs() < 1e-12);
    }

    #[test]
    fn experimental_matrices_are_symmetric((coords, values) in table(60)) {
        let set = experimental_variograms(coords.view(), values.view(), &LagSpec::new(15.0, 6), Direction::Omni).unwrap();
        for (g, &c) in set.gamma.iter().zip(&set.counts) {
            if c == 0 {
                continue;
            }
            for i in 0..3 {
                prop_assert!(g[[i, i]] >= 0.0);
                for j in 0..3 {
                    prop_assert_eq!(g[[i, j]], g[[j, i]]);
                }
            }
        }
    }

    #[test]
    fn maf_factors_are_uncorrelated((coords, values) in table(80)) {
        let m = maf_fit(values.view(), coords.view(), 20.0, 10.0).unwrap();
        let y = maf_apply(&m, values.view()).unwrap();
        let c = cov_n(&y);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((c[[i, j]] - target).abs() < 1e-8, "{c}");
            }
        }
        let s = cov_n(&values);
        let back = maf_invert(&m, y.view()).unwrap().dot(&s);
        let err = (&back - &values).iter().fold(0f64, |a, v| a.max(v.abs()));
        prop_assert!(err < 1e-8, "{err}");
    }
}

#[test]
fn experimental_matches_brute_force() {
    let n = 40;
    let coords = Array2::from_shape_fn((n, 3), |(i, j)| match j {
        0 => (i as f64 * 7.3) % 50.0,
        1 => (i as f64 * 3.1) % 40.0,
        _ => 0.0,
    });
    let values = Array2::from_shape_fn((n, 2), |(i, j)| ((i * (j + 2)) as f64 * 0.37).sin());
    let lags = LagSpec::new(10.0, 4);
    let set = experimental_variograms(coords.view(), values.view(), &lags, Direction::Omni).unwrap();
    for k in 0..4 {
        let centre = (k + 1) as f64 * 10.0;
        let (mut s, mut c) = ([[0.0; 2]; 2], 0u64);
        for a in 0..n {
            for b in (a + 1)..n {
                let dx = coords[[a, 0]] - coords[[b, 0]];
                let dy = coords[[a, 1]] - coords[[b, 1]];
                let h = (dx * dx + dy * dy).sqrt();
                if h >= centre - 5.0 && h < centre + 5.0 {
                    c += 1;
                    for i in 0..2 {
                        for j in 0..2 {
                            s[i][j] += (values[[a, i]] - values[[b, i]]) * (values[[a, j]] - values[[b, j]]);
                        }
                    }
                }
            }
        }
        assert_eq!(set.counts[k], c);
        for i in 0..2 {
            for j in 0..2 {
                assert!((set.gamma[k][[i, j]] - s[i][j] / (2.0 * c as f64)).abs() < 1e-12);
            }
        }
    }
}
