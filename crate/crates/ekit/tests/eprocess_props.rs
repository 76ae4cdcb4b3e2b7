use ekit::betting::Strategy;
use ekit::eprocess::{sprt, time_mixture, BettingProcess, MixtureWeights, SprtConfig, SprtMode, SprtOutcome};
use ekit::numeric::mean_se;
use ekit::par::replicate;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn conservative_sprt_error_rates() {
    let cfg = SprtConfig::new(0.05, 0.05, SprtMode::Conservative).unwrap();
    let (a, b) = ((1.2f64).ln(), (0.8f64).ln());
    for (p, want_reject) in [(0.5, false), (0.6, true)] {
        let errs = replicate(20_000, 41, &format!("sprt/{p}"), |_, r| {
            let out = sprt(std::iter::from_fn(|| Some(if r.random_bool(p) { a } else { b })), &cfg);
            f64::from(matches!(out, SprtOutcome::Reject(_)) != want_reject)
        });
        let (m, se) = mean_se(&errs);
        assert!(m <= 0.05 + 3.0 * se, "p {p}: {m}");
    }
}

/// Two-point laws with the log-optimal bet inside the cap.
#[test]
fn adaptive_betting_reaches_the_oracle_growth() {
    for (lo, hi) in [(0.0, 4.0), (0.5, 1.75)] {
        let growth = |l: f64| 0.5 * (1.0 - l + l * lo).ln() + 0.5 * (1.0 - l + l * hi).ln();
        let oracle = (0..=99_000).map(|i| growth(i as f64 * 1e-5)).fold(f64::NEG_INFINITY, f64::max);
        let t = 10_000;
        let g = replicate(20, 42, &format!("growth/{hi}"), |_, r| {
            let mut p = BettingProcess::new(&Strategy::EmpiricallyAdaptive { gamma: 0.5 }).unwrap();
            for _ in 0..t {
                p.step(if r.random_bool(0.5) { hi } else { lo }).unwrap();
            }
            p.state().log_wealth() / t as f64
        });
        let (m, _) = mean_se(&g);
        assert!((m - oracle).abs() <= 0.02, "{hi}: {m} vs {oracle}");
    }
}

proptest! {
    #[test]
    fn time_mixture_is_nondecreasing(es in proptest::collection::vec(0.0f64..50.0, 1..60), r in 0.05f64..0.95) {
        for w in [MixtureWeights::Default, MixtureWeights::Geometric { ratio: r }] {
            let states = time_mixture(&es, &w).unwrap();
            prop_assert_eq!(states.len(), es.len());
            for pair in states.windows(2) {
                prop_assert!(pair[1].wealth() >= pair[0].wealth());
            }
        }
    }
}
