use cchart::analytic::{closed_form_var, dma_var_closed, dma_var_pairwise, ewma_sd, harmonic, harmonic_approx};
use cchart::charts::{dma_weights, weight_vector, Thresholds};
use cchart::{Chart, ChartSpec, Family};
use proptest::prelude::*;

fn linear_spec() -> impl Strategy<Value = ChartSpec> {
    prop_oneof![
        (0.01..1.0f64).prop_map(|l| ChartSpec::builder(Family::Ewma).lambda(l).limit(2.5).build().unwrap()),
        (0.01..1.0f64).prop_map(|l| ChartSpec::builder(Family::Dewma).lambda(l).limit(2.5).build().unwrap()),
        (0.01..1.0f64).prop_map(|l| ChartSpec::builder(Family::Tewma).lambda(l).limit(2.5).build().unwrap()),
        (1..40usize).prop_map(|w| ChartSpec::ma(w, 3.0).unwrap()),
        (1..40usize).prop_map(|w| ChartSpec::dma(w, 3.0).unwrap()),
        (0.0..1.0f64).prop_map(|p| ChartSpec::pm(p, 3.0).unwrap()),
        (0.0..1.0f64).prop_map(|p| ChartSpec::dpm(p, 3.0).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn statistic_is_the_weighted_sum(spec in linear_spec(), xs in prop::collection::vec(-3.0..3.0f64, 1..=200)) {
        let chart = Chart::new(&spec).unwrap();
        let mut s = chart.init_state();
        for (t, &x) in xs.iter().enumerate() {
            chart.update(&mut s, x);
            let w = weight_vector(&spec, t + 1).unwrap();
            let direct: f64 = w.iter().zip(&xs).map(|(a, b)| a * b).sum();
            prop_assert!((s.statistic() - direct).abs() <= 1e-9 * (1.0 + direct.abs()),
                "{spec} at i={}: {} vs {}", t + 1, s.statistic(), direct);
        }
    }

    #[test]
    fn cusum_sums_stay_nonnegative(k in 0.0..1.5f64, xs in prop::collection::vec(-4.0..4.0f64, 1..300)) {
        let chart = Chart::new(&ChartSpec::cusum(k, 1e9).unwrap()).unwrap();
        let mut s = chart.init_state();
        for x in xs {
            chart.update(&mut s, x);
            prop_assert!(s.cusum_pos() >= 0.0 && s.cusum_neg() >= 0.0);
        }
    }

    #[test]
    fn dma_weights_sum_to_one_and_are_symmetric(w in 1..60usize, extra in 0..50usize) {
        let i = 2 * w - 1 + extra;
        let c = dma_weights(w, i);
        prop_assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let support = &c[i - (2 * w - 1)..];
        for j in 0..support.len() {
            prop_assert!((support[j] - support[support.len() - 1 - j]).abs() < 1e-15);
        }
        prop_assert!(c[..i - (2 * w - 1)].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn variance_identity(spec in linear_spec(), i in 1..=200u64) {
        let direct: f64 = weight_vector(&spec, i as usize).unwrap().iter().map(|c| c * c).sum();
        let closed = closed_form_var(&spec, i).unwrap();
        prop_assert!((closed - direct).abs() <= 1e-10 * direct, "{spec}, i={i}: {closed} vs {direct}");
    }
}

#[test]
fn dma_variance_expressions_agree() {
    for w in 1..=100 {
        let (a, b) = (dma_var_closed(w), dma_var_pairwise(w));
        assert!((a - b).abs() <= 1e-12 * a, "w={w}: {a} vs {b}");
    }
}

#[test]
fn dewma_weights_peak_in_the_past() {
    let spec = ChartSpec::builder(Family::Dewma).lambda(0.1).build().unwrap();
    for i in 10..=300 {
        let c = weight_vector(&spec, i).unwrap();
        let argmax = c.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(argmax + 1 < i, "i={i}: the newest observation carries the largest weight");
    }
}

#[test]
fn ewma_threshold_grows_to_its_limit() {
    let c = 2.7;
    let chart = Chart::new(&ChartSpec::ewma(0.1, c).unwrap()).unwrap();
    let limit = |i| match chart.alarm_threshold(i).unwrap() {
        Thresholds::Symmetric { limit } => limit,
        t => panic!("unexpected {t:?}"),
    };
    let mut prev = 0.0;
    for i in 1..=2000 {
        let l = limit(i);
        assert!(l >= prev, "threshold drops at i={i}");
        prev = l;
    }
    let asymptote = c * ewma_sd(0.1, None);
    assert!((limit(2000) - asymptote).abs() < 1e-12 * asymptote);
}

#[test]
fn harmonic_approximation_error() {
    // second term covers rounding in the direct sum
    for t in 5..=5000u64 {
        let tf = t as f64;
        let err = (harmonic(t) - harmonic_approx(tf)).abs();
        assert!(err <= 1.0 / (120.0 * tf.powi(4)) + tf * f64::EPSILON, "t={t}: {err}");
    }
}
