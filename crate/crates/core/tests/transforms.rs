use geomgt::marginal::Tails;
use geomgt::transforms::{
    fit_transform, mgt_forward, mgt_inverse, mgt_inverse_with, FaParams, MethodParams, PpmtParams, RbigParams,
    RotationKind,
};
use ndarray::Array2;
use proptest::prelude::*;

fn data() -> impl Strategy<Value = Array2<f64>> {
    (prop::collection::vec(-2f64..2.0, 240), 0.2f64..2.0).prop_map(|(u, k)| {
        Array2::from_shape_fn((120, 2), |(i, j)| {
            let (a, b) = (u[2 * i], u[2 * i + 1]);
            if j == 0 {
                (k * a).exp()
            } else {
                a * a - b + 0.3 * (i as f64).sin()
            }
        })
    })
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn params() -> impl Strategy<Value = MethodParams> {
    prop_oneof![
        Just(MethodParams::Rbig(RbigParams { iterations: 8, ..Default::default() })),
        Just(MethodParams::Rbig(RbigParams { iterations: 4, rotation: RotationKind::Ica, ..Default::default() })),
        (0u64..1000).prop_map(|seed| MethodParams::Ppmt(PpmtParams {
            iterations: 6,
            restarts: 5,
            seed,
            ..Default::default()
        })),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forward_then_inverse_recovers_data(x in data(), p in params()) {
        let (model, factors) = fit_transform(x.view(), None, &p).unwrap();
        let again = mgt_forward(&model, x.view()).unwrap();
        prop_assert!(max_abs_diff(&factors, &again) < 1e-9);
        let back = mgt_inverse(&model, factors.view()).unwrap();
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(max_abs_diff(&back, &x) < 1e-8 * scale, "{}", max_abs_diff(&back, &x));
    }

    #[test]
    fn clamped_inverse_stays_within_data_bounds(x in data(), p in params(), g in prop::collection::vec(-6f64..6.0, 80)) {
        let (model, factors) = fit_transform(x.view(), None, &p).unwrap();
        let back = mgt_inverse_with(&model, factors.view(), Tails::Clamp).unwrap();
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(max_abs_diff(&back, &x) < 1e-8 * scale);
        let y = Array2::from_shape_vec((40, 2), g).unwrap();
        let sim = mgt_inverse_with(&model, y.view(), Tails::Clamp).unwrap();
        for j in 0..2 {
            let (lo, hi) = x.column(j).iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
            prop_assert!(sim.column(j).iter().all(|&v| v >= lo && v <= hi));
        }
    }

    #[test]
    fn factors_are_standardized(x in data(), p in params()) {
        let (_, f) = fit_transform(x.view(), None, &p).unwrap();
        for c in f.columns() {
            let mean = c.mean().unwrap();
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c.len() as f64;
            prop_assert!(mean.abs() < 0.1 && (var - 1.0).abs() < 0.25, "{mean} {var}");
        }
    }
}

#[test]
fn flow_inverse_recovers_data() {
    let x = Array2::from_shape_fn((150, 2), |(i, j)| {
        let t = i as f64 * 0.41;
        if j == 0 {
            t.sin().exp()
        } else {
            (t * 1.3).cos() + 0.2 * t.sin()
        }
    });
    let p = MethodParams::Fa(FaParams::default());
    let (model, factors) = fit_transform(x.view(), None, &p).unwrap();
    let back = mgt_inverse(&model, factors.view()).unwrap();
    let mut sq = 0.0;
    for j in 0..2 {
        let c = x.column(j);
        let m = c.mean().unwrap();
        let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / c.len() as f64).sqrt();
        sq += c.iter().zip(back.column(j)).map(|(a, b)| ((a - b) / sd).powi(2)).sum::<f64>();
    }
    let rms = (sq / x.len() as f64).sqrt();
    assert!(rms < 1e-3, "{rms}");
}

#[test]
fn single_precision_alias_round_trips() {
    let x =
        Array2::from_shape_fn((200, 2), |(i, j)| ((i * (j + 1)) as f32 * 0.37).sin() + j as f32 * (i as f32 * 0.01));
    let p = MethodParams::Rbig(RbigParams { iterations: 5, ..Default::default() });
    let (model, f): (geomgt::f32::MgtModel, _) = fit_transform(x.view(), None, &p).unwrap();
    let back = mgt_inverse(&model, f.view()).unwrap();
    let err = back.iter().zip(x.iter()).fold(0f32, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-3, "{err}");
}

#[test]
fn refuses_bad_input() {
    let p = MethodParams::Rbig(RbigParams::default());
    let tiny = Array2::<f64>::zeros((2, 2));
    assert!(fit_transform(tiny.view(), None, &p).is_err());
    let mut x = Array2::from_shape_fn((50, 2), |(i, j)| (i + j) as f64);
    x[[3, 1]] = f64::NAN;
    assert!(fit_transform(x.view(), None, &p).is_err());
}

#[test]
fn long_normal_score_chain_round_trips() {
    let x = Array2::from_shape_fn((600, 2), |(i, j)| {
        let t = i as f64 * 0.713;
        if j == 0 {
            (t.sin() * 1.7).exp()
        } else {
            t.cos() - 0.3 * t.sin().powi(2) + 0.001 * i as f64
        }
    });
    let p = MethodParams::Rbig(RbigParams { iterations: 150, ..Default::default() });
    let (model, factors) = fit_transform(x.view(), None, &p).unwrap();
    let back = mgt_inverse(&model, factors.view()).unwrap();
    assert!(max_abs_diff(&back, &x) < 1e-9, "{}", max_abs_diff(&back, &x));
}
