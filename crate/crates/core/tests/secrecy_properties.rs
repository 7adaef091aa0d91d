#![allow(clippy::excessive_precision)]

use gk_secrecy::channel::{ChannelParams, MixedGammaModel, DEFAULT_ORDER};
use gk_secrecy::secrecy::{sop_closed_form, sop_conventional, sop_quadrature, SecrecyConfig};
use gk_secrecy::specfun::QuadratureSpec;
use proptest::prelude::*;

fn fit(k: f64, m: u32, gbar_db: f64) -> MixedGammaModel {
    MixedGammaModel::fit(&ChannelParams::from_db(k, m, gbar_db).unwrap(), DEFAULT_ORDER).unwrap()
}

fn closed(d: &MixedGammaModel, e: &MixedGammaModel, rate: f64, mu: f64) -> f64 {
    sop_closed_form(d, e, &SecrecyConfig::new(rate, mu).unwrap())
        .unwrap()
        .value
}

/// L = 15 surrogate SOP values from an independent 30-digit quadrature of the
/// mixture integral, at k_d = k_e = 3, m_d = m_e = m, gbar_e = 0 dB, R_s = 1, mu = 3.
const BASELINE_REFERENCE: [(u32, f64, f64); 17] = [
    (1, 0.0, 0.192_187_210_998_713_75),
    (1, 10.0, 0.070_092_161_989_099_852),
    (1, 20.0, 0.011_425_402_536_894_489),
    (1, 30.0, 0.001_257_143_130_618_068_8),
    (2, 0.0, 0.216_663_272_269_914_62),
    (2, 10.0, 0.063_161_568_513_752_83),
    (2, 20.0, 0.003_455_407_919_084_924_6),
    (2, 30.0, 5.831_397_375_358_705_3e-5),
    (4, 0.0, 0.239_209_562_361_865_72),
    (4, 10.0, 0.053_017_365_740_040_637),
    (4, 20.0, 7.769_523_821_704_331_8e-4),
    (4, 30.0, 1.715_549_668_806_913_8e-6),
    (4, 50.0, 2.097_962_334_450_228_2e-12),
    (5, 0.0, 0.246_235_909_013_437_45),
    (5, 10.0, 0.049_679_215_195_815_402),
    (5, 20.0, 5.122_124_870_529_590_7e-4),
    (5, 30.0, 8.481_501_517_307_943_7e-7),
];

#[test]
fn closed_form_matches_high_precision_reference() {
    for (m, db, reference) in BASELINE_REFERENCE {
        let value = closed(&fit(3.0, m, db), &fit(3.0, m, 0.0), 1.0, 3.0);
        assert!(
            (value - reference).abs() <= 1e-10 * reference,
            "m={m} {db} dB: {value:e} vs {reference:e}"
        );
    }
}

#[test]
fn proposed_and_conventional_reference_at_gap_setting() {
    let (d, e) = (fit(3.0, 2, 10.0), fit(3.0, 2, 1.0));
    let cases = [
        (0.5, 0.036_392_821_881_225_927, 0.141_629_522_575_766_78),
        (4.0, 0.919_952_259_517_794_1, 0.937_062_632_919_057_89),
    ];
    for (rate, proposed, conventional) in cases {
        let p = closed(&d, &e, rate, 3.0);
        let c = sop_conventional(&d, &e, rate).unwrap().value;
        assert!(
            (p - proposed).abs() <= 1e-10 * proposed,
            "R_s={rate}: {p} vs {proposed}"
        );
        assert!(
            (c - conventional).abs() <= 1e-10 * conventional,
            "R_s={rate}: {c} vs {conventional}"
        );
    }
}

#[test]
fn baseline_curves_fall_monotonically() {
    for m in [1, 2, 4, 5] {
        let e = fit(3.0, m, 0.0);
        let curve: Vec<f64> = (0..=12)
            .map(|i| closed(&fit(3.0, m, 5.0 * i as f64), &e, 1.0, 3.0))
            .collect();
        assert!(curve.windows(2).all(|w| w[1] < w[0]), "m={m}: {curve:?}");
    }
}

fn channel() -> impl Strategy<Value = (f64, u32)> {
    (prop::sample::select(vec![1.5, 2.0, 3.0, 4.5, 5.0]), 1u32..=5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn routes_agree_and_stay_in_unit_interval(
        (kd, md) in channel(),
        (ke, me) in channel(),
        d_db in 0.0..40.0f64,
        e_db in -3.0..6.0f64,
        rate in 0.25..3.0f64,
        mu in 0.0..6.0f64,
    ) {
        let (d, e) = (fit(kd, md, d_db), fit(ke, me, e_db));
        let cfg = SecrecyConfig::new(rate, mu).unwrap();
        let a = sop_closed_form(&d, &e, &cfg).unwrap().value;
        let b = sop_quadrature(&d, &e, &cfg, &QuadratureSpec::relative(1e-12)).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1e-12), "closed {a:e} quadrature {b:e}");
    }

    #[test]
    fn outage_responds_to_each_parameter_in_the_right_direction(
        (k, m) in channel(),
        d_db in 0.0..30.0f64,
        e_db in -3.0..3.0f64,
        rate in 0.25..2.5f64,
        mu in 0.0..4.0f64,
    ) {
        let e = fit(k, m, e_db);
        let d = fit(k, m, d_db);
        let base = closed(&d, &e, rate, mu);
        prop_assert!(closed(&fit(k, m, d_db + 3.0), &e, rate, mu) < base);
        prop_assert!(closed(&d, &fit(k, m, e_db + 3.0), rate, mu) > base);
        prop_assert!(closed(&d, &e, rate + 0.5, mu) > base);
    }

    #[test]
    fn conventional_is_the_zero_threshold_case(
        (k, m) in channel(),
        d_db in 0.0..30.0f64,
        rate in 0.1..3.0f64,
    ) {
        let (d, e) = (fit(k, m, d_db), fit(k, m, 0.0));
        let conventional = sop_conventional(&d, &e, rate).unwrap().value;
        prop_assert_eq!(conventional.to_bits(), closed(&d, &e, rate, 0.0).to_bits());
    }

    #[test]
    fn identical_links_at_zero_rate_split_evenly((k, m) in channel(), db in -5.0..40.0f64) {
        let model = fit(k, m, db);
        let value = closed(&model, &model, 0.0, 0.0);
        prop_assert!((value - 0.5).abs() <= 1e-9, "{value}");
    }
}
