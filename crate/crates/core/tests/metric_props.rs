mod common;

use proptest::prelude::*;

use fairrank::domain::{rank_by_score, Candidate, Dataset, Group};
use fairrank::metrics::{evaluate, exposure_ratio, ndcg, ndkl, skew, MetricOptions, NdcgNorm, NdklMode};
use fairrank::GroupProportions;

use common::{oracle_ndcg, oracle_ndkl, oracle_skew, population};

fn groups(min: usize) -> impl Strategy<Value = Vec<Group>> {
    prop::collection::vec(any::<bool>(), min..80)
        .prop_filter("both groups", |b| b.contains(&true) && b.contains(&false))
        .prop_map(|b| {
            b.into_iter()
                .map(|d| if d { Group::Disadvantaged } else { Group::Advantaged })
                .collect()
        })
}

fn props_of(g: &[Group]) -> GroupProportions {
    let p = population(g);
    GroupProportions {
        disadvantaged: p[0],
        advantaged: p[1],
    }
}

proptest! {
    #[test]
    fn skew_weighted_by_share_sums_to_one(g in groups(2), cut in 0.0f64..1.0) {
        let k = 1 + ((g.len() - 1) as f64 * cut) as usize;
        let p = props_of(&g);
        let total: f64 = Group::ALL.iter().map(|&h| skew(&g, &p, h, k).unwrap() * p.get(h)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!((skew(&g, &p, Group::Disadvantaged, k).unwrap() - oracle_skew(&g, Group::Disadvantaged, k)).abs() < 1e-12);
    }

    #[test]
    fn swapping_labels_inverts_the_exposure_ratio(g in groups(2)) {
        let swapped: Vec<Group> = g.iter().map(|x| x.flipped()).collect();
        let r = exposure_ratio(&g).unwrap();
        prop_assert!((r * exposure_ratio(&swapped).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ndkl_is_nonnegative_and_matches_the_loop(g in groups(2), cut in 0.0f64..1.0) {
        let k = 1 + ((g.len() - 1) as f64 * cut) as usize;
        let v = ndkl(&g, &props_of(&g), k, NdklMode::Prefix).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert!((v - oracle_ndkl(&g, k)).abs() < 1e-12);
    }

    #[test]
    fn adjacent_promotion_never_lowers_ndcg(j in prop::collection::vec(-50i32..50, 2..40), at in 0.0f64..1.0, cut in 0.0f64..1.0) {
        let j: Vec<f64> = j.into_iter().map(|x| x as f64 / 10.0).collect();
        let n = j.len();
        let i = ((n - 2) as f64 * at) as usize;
        let k = 1 + ((n - 1) as f64 * cut) as usize;
        prop_assume!(j.iter().any(|x| *x != j[0]));
        let mut better = j.clone();
        if better[i + 1] > better[i] {
            better.swap(i, i + 1);
        }
        let before = ndcg(&j, k, NdcgNorm::Ideal);
        let after = ndcg(&better, k, NdcgNorm::Ideal);
        if let (Ok(b), Ok(a)) = (before, after) {
            prop_assert!(a + 1e-12 >= b);
            prop_assert!((b - oracle_ndcg(&j, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_ignore_monotone_score_transforms(
        g in groups(10),
        raw in prop::collection::vec(-100i32..100, 80),
        judg in prop::collection::vec(0i32..100, 80),
    ) {
        let n = g.len();
        let cands: Vec<Candidate> = (0..n)
            .map(|i| Candidate::new(i as u64, vec![], judg[i] as f64 / 10.0, g[i]))
            .collect();
        let data = Dataset::new(cands, vec![]).unwrap();
        let plain: Vec<(u64, f64)> = (0..n).map(|i| (i as u64, raw[i] as f64)).collect();
        let warped: Vec<(u64, f64)> = plain.iter().map(|(id, s)| (*id, (s / 30.0).exp() * 5.0 - 2.0)).collect();
        let cutoffs = [1, 5, 10];
        let opts = MetricOptions::default();
        let a = evaluate(&rank_by_score(&plain).unwrap(), &data, &cutoffs, &opts);
        let b = evaluate(&rank_by_score(&warped).unwrap(), &data, &cutoffs, &opts);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "one side failed: {:?}", other),
        }
    }
}

#[test]
fn ndkl_vanishes_only_for_proportional_prefixes() {
    let one_group = GroupProportions {
        disadvantaged: 1.0,
        advantaged: 0.0,
    };
    assert_eq!(ndkl(&[Group::Disadvantaged; 8], &one_group, 8, NdklMode::Prefix).unwrap(), 0.0);
    // Top-1 can never match a 50/50 population.
    let g = [Group::Disadvantaged, Group::Advantaged];
    assert!(ndkl(&g, &props_of(&g), 2, NdklMode::Prefix).unwrap() > 0.0);
    assert_eq!(ndkl(&g, &props_of(&g), 2, NdklMode::Literal).unwrap(), 0.0);
}
