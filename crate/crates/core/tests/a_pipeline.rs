use proptest::prelude::*;
use sampdev_core::calibration::{calibrate, limit_law};
use sampdev_core::mc::{block_product_estimator, refinement_study, sample_deviations};
use sampdev_core::report::{read_csv, write_csv, VerifyRow, VERIFY_COLUMNS};
use sampdev_core::risk::quantile_sim;
use sampdev_core::{MCConfig, ProcessSpec, Sided};

fn specs() -> Vec<ProcessSpec> {
    vec![
        ProcessSpec::brownian(1.0).unwrap(),
        ProcessSpec::brownian(2.5).unwrap(),
        ProcessSpec::stable_levy(1.5, -1.0, 1.0).unwrap(),
        ProcessSpec::stable_levy(1.3, -1.0, 0.7).unwrap(),
        ProcessSpec::lfsm(1.5, 0.8, 1.0).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scales_shrink_with_epsilon(a in 1e-6f64..0.05, f in 0.05f64..0.95) {
        let b = a * f;
        for spec in specs() {
            let sa = calibrate(&spec, a, Sided::One).unwrap();
            let sb = calibrate(&spec, b, Sided::One).unwrap();
            prop_assert!(sb.q < sa.q, "{}: q({b}) = {} vs q({a}) = {}", spec.name(), sb.q, sa.q);
            prop_assert!(sb.w < sa.w);
            prop_assert!(sa.q > 0.0 && sa.w > 0.0);
        }
    }
}

#[test]
fn estimates_from_one_sample_are_monotone_in_x() {
    let cfg = MCConfig::new(1500, 8, 21);
    for spec in specs() {
        let s = calibrate(&spec, 0.2, Sided::One).unwrap();
        let sample = sample_deviations(&spec, s.q, Sided::One, &cfg).unwrap();
        let p: Vec<f64> = [-2.0, -1.0, 0.0, 1.0, 2.0, 4.0]
            .iter()
            .map(|&x| sample.estimate(s.threshold(x), 0.95).p_hat)
            .collect();
        assert!(p.windows(2).all(|w| w[0] <= w[1]), "{}: {p:?}", spec.name());
    }
}

#[test]
fn two_sided_never_exceeds_one_sided() {
    let cfg = MCConfig::new(1000, 8, 22);
    let spec = ProcessSpec::stable_levy(1.2, 0.0, 1.0).unwrap();
    let q = 1.0 / 64.0;
    let one = sample_deviations(&spec, q, Sided::One, &cfg).unwrap().estimate(1.0, 0.95);
    let two = sample_deviations(&spec, q, Sided::Two, &cfg).unwrap().estimate(1.0, 0.95);
    assert!(two.p_hat <= one.p_hat);
}

#[test]
fn block_product_agrees_with_direct_estimate() {
    let cfg = MCConfig { ci_level: 0.99, ..MCConfig::new(4000, 16, 23) };
    let configs = [
        (ProcessSpec::stable_levy(1.5, -1.0, 1.0).unwrap(), 0.2),
        (ProcessSpec::stable_levy(1.8, -1.0, 1.0).unwrap(), 0.2),
        (ProcessSpec::stable_levy(1.2, 0.0, 1.0).unwrap(), 1.0),
    ];
    for (spec, eps) in configs {
        let q = match calibrate(&spec, eps, Sided::One) {
            Ok(s) => s.q,
            Err(_) => 1.0 / 64.0,
        };
        let direct = sample_deviations(&spec, q, Sided::One, &cfg).unwrap().estimate(eps, 0.99);
        let product = block_product_estimator(&spec, eps, q, Sided::One, &cfg).unwrap();
        assert!(
            direct.ci_lo <= product.ci_hi && product.ci_lo <= direct.ci_hi,
            "{spec:?}: direct {direct:?} vs block product {product:?}"
        );
    }
}

#[test]
fn refinement_lowers_grid_estimates() {
    let spec = ProcessSpec::stable_levy(1.5, -1.0, 1.0).unwrap();
    let study = refinement_study(&spec, 0.2, 0.0, Sided::One, &[4, 8, 16, 32], &MCConfig::new(1000, 32, 24)).unwrap();
    assert!(study.coupled);
    let p: Vec<f64> = study.rows.iter().map(|r| r.estimate.p_hat).collect();
    assert!(p.windows(2).all(|w| w[1] <= w[0]), "{p:?}");
}

#[test]
fn brownian_limit_and_risk_levels_are_consistent() {
    let bm = ProcessSpec::brownian(1.0).unwrap();
    let law = limit_law(&bm, Sided::One).unwrap();
    assert!((law.probability(0.0).unwrap().unwrap() - (-2.0f64).exp()).abs() < 1e-15);
    let cfg = MCConfig::new(4000, 8, 25);
    let loose = quantile_sim(&bm, 0.1, 0.1, 0.0, &cfg).unwrap();
    let tight = quantile_sim(&bm, 0.02, 0.1, 0.0, &cfg).unwrap();
    assert!(tight.query.u > loose.query.u);
}

#[test]
fn verify_rows_survive_a_csv_round_trip() {
    let spec = ProcessSpec::stable_levy(1.5, -1.0, 1.0).unwrap();
    let cfg = MCConfig::new(300, 8, u64::MAX);
    let s = calibrate(&spec, 0.1, Sided::One).unwrap();
    let sample = sample_deviations(&spec, s.q, Sided::One, &cfg).unwrap();
    let law = limit_law(&spec, Sided::One).unwrap();
    let rows: Vec<VerifyRow> = [-1.0, 0.0, 1.0 / 3.0]
        .iter()
        .map(|&x| {
            let e = sample.estimate(s.threshold(x), cfg.ci_level);
            let p_limit = law.probability(x).unwrap();
            VerifyRow {
                process: spec.name().into(),
                alpha: spec.alpha(),
                beta: spec.beta(),
                hurst: spec.hurst(),
                epsilon: 0.1,
                x,
                q: s.q,
                w: s.w,
                mode: Sided::One,
                n_paths: cfg.n_paths,
                refine_m: cfg.refine_m,
                k: e.k,
                p_hat: e.p_hat,
                ci_lo: e.ci_lo,
                ci_hi: e.ci_hi,
                p_limit,
                gap: p_limit.map(|p| e.p_hat - p),
                bias_note: e.bias_note,
                seed: cfg.seed,
            }
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("verify.csv");
    write_csv(&path, &VERIFY_COLUMNS, &rows).unwrap();
    let back: Vec<VerifyRow> = read_csv(&path, &VERIFY_COLUMNS).unwrap();
    assert_eq!(back, rows);
}
