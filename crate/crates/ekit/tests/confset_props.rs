use ekit::confset::{
    majority_vote, mv_coverage_bound, mv_exchangeable, mv_permuted, mv_randomized, mv_weighted, running_mv,
    RandomizedVote, UncertaintySet,
};
use ekit::numeric::mean_se;
use ekit::par::replicate;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn family() -> impl Strategy<Value = Vec<Vec<(f64, f64)>>> {
    prop::collection::vec(prop::collection::vec((0.0..10.0f64, 0.0..4.0f64).prop_map(|(a, w)| (a, a + w)), 1..4), 1..8)
}

fn build(raw: &[Vec<(f64, f64)>]) -> Vec<UncertaintySet> {
    raw.iter().map(|iv| UncertaintySet::intervals(iv.clone(), 0.9).unwrap()).collect()
}

fn covered(raw: &[(f64, f64)], x: f64) -> bool {
    raw.iter().any(|(a, b)| *a <= x && x <= *b)
}

fn probe_points(seed: u64) -> Vec<f64> {
    let mut r = ekit::seed::rng_for(seed, "probe", 0);
    (0..10_000).map(|_| r.random_range(-1.0..15.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vote_engine_matches_point_sampling(raw in family(), tau in 0.0..1.0f64, u in 0.0..1.0f64, ws in prop::collection::vec(0.01..1.0f64, 8), seed in 0u64..1000) {
        let sets = build(&raw);
        let k = sets.len();
        let total: f64 = ws[..k].iter().sum();
        let w: Vec<f64> = ws[..k].iter().map(|x| x / total).collect();
        let mv = majority_vote(&sets, tau).unwrap();
        let cr = mv_randomized(&sets, u, RandomizedVote::Cr).unwrap();
        let cu = mv_randomized(&sets, u, RandomizedVote::Cu).unwrap();
        let weighted = mv_weighted(&sets, &w, u).unwrap();
        for x in probe_points(seed) {
            let count = raw.iter().filter(|iv| covered(iv, x)).count() as f64;
            let mass: f64 = raw.iter().zip(&w).filter(|(iv, _)| covered(iv, x)).map(|(_, w)| *w).sum();
            prop_assert_eq!(mv.contains(x), count > tau * k as f64, "x {}", x);
            prop_assert_eq!(cr.contains(x), count > (0.5 + u / 2.0) * k as f64, "x {}", x);
            prop_assert_eq!(cu.contains(x), count > u * k as f64, "x {}", x);
            prop_assert_eq!(weighted.contains(x), mass > 0.5 + u / 2.0 + 1e-12 * k as f64, "x {}", x);
        }
    }

    #[test]
    fn vote_sets_form_a_lattice(raw in family(), t1 in 0.0..1.0f64, t2 in 0.0..1.0f64, u in 0.0..1.0f64) {
        let sets = build(&raw);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let half = majority_vote(&sets, 0.5).unwrap();
        prop_assert!(majority_vote(&sets, hi).unwrap().is_subset_of(&majority_vote(&sets, lo).unwrap()));
        prop_assert!(mv_randomized(&sets, u, RandomizedVote::Cr).unwrap().is_subset_of(&half));
        let running = running_mv(&sets).unwrap();
        for w in running.windows(2) {
            prop_assert!(w[1].is_subset_of(&w[0]));
        }
        let exch = mv_exchangeable(&sets).unwrap();
        prop_assert!(exch.is_subset_of(&half));
        prop_assert_eq!(&exch, running.last().unwrap());
    }
}

/// Per-set miss probability `alpha`; with probability `alpha K / m` a cyclic
/// block of `m` sets misses the origin together, otherwise all cover it.
fn block_family(r: &mut impl Rng, k: usize, m: usize, alpha: f64) -> Vec<UncertaintySet> {
    let hit = r.random_bool(alpha * k as f64 / m as f64);
    let start = r.random_range(0..k);
    (0..k)
        .map(|i| {
            let missed = hit && (i + k - start) % k < m;
            let (a, b) = if missed {
                let c = r.random_range(0.5..1.0);
                (c, c + 1.0)
            } else {
                (-r.random_range(0.0..1.0), r.random_range(0.0..1.0))
            };
            UncertaintySet::interval(a, b, 1.0 - alpha).unwrap()
        })
        .collect()
}

#[test]
fn threshold_votes_keep_their_guarantee() {
    let alpha = 0.1;
    for (k, tau) in [(9usize, 0.5), (10, 0.3), (10, 0.7), (7, 0.0)] {
        let m = ((1.0 - tau) * k as f64).floor() as usize + 1;
        let m = m.min(k);
        let hits = replicate(40_000, 71, &format!("mv/{k}/{tau}"), |_, r| {
            let sets = block_family(r, k, m, alpha);
            f64::from(u8::from(majority_vote(&sets, tau).unwrap().contains(0.0)))
        });
        let (c, se) = mean_se(&hits);
        let bound = mv_coverage_bound(k, alpha, tau, true);
        assert!(c >= bound - 3.0 * se, "K {k} tau {tau}: {c} < {bound}");
    }
}

#[test]
fn exchangeable_and_permuted_votes_cover() {
    let alpha = 0.1;
    let k = 9;
    let hits = replicate(40_000, 72, "mv/exch", |_, r| {
        let mut sets = block_family(r, k, 5, alpha);
        sets.shuffle(r);
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(r);
        let e = mv_exchangeable(&sets).unwrap().contains(0.0);
        let p = mv_permuted(&sets, &perm).unwrap().contains(0.0);
        (f64::from(u8::from(e)), f64::from(u8::from(p)))
    });
    let (e, p): (Vec<f64>, Vec<f64>) = hits.into_iter().unzip();
    for (name, h) in [("exchangeable", e), ("permuted", p)] {
        let (c, se) = mean_se(&h);
        assert!(c >= 1.0 - 2.0 * alpha - 3.0 * se, "{name}: {c}");
    }
}
