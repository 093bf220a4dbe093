use proptest::prelude::*;

use matching_core::algorithms::{
    augment_virtual_women, mpda, mpda_with_schedule, wpda, BlockStructure, Schedule, StableHusbands,
};
use matching_core::oracle::{enumerate_all_stable, DEFAULT_GUARD};
use matching_core::{is_blocking_pair, is_stable, Instance, Matching, PreferenceList};

fn list(opposite: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::sample::subsequence((0..opposite).collect::<Vec<_>>(), 0..=opposite).prop_shuffle()
}

/// Small instances with arbitrary (possibly one-sided) acceptability.
fn instance(max: usize) -> impl Strategy<Value = Instance> {
    (1..=max, 1..=max).prop_flat_map(|(m, w)| {
        (proptest::collection::vec(list(w), m), proptest::collection::vec(list(m), w))
            .prop_map(|(men, women)| Instance::from_lists(men, women).unwrap())
    })
}

fn complete(max: usize) -> impl Strategy<Value = Instance> {
    (1..=max).prop_flat_map(|n| {
        let perm = Just((0..n).collect::<Vec<_>>()).prop_shuffle();
        (proptest::collection::vec(perm.clone(), n), proptest::collection::vec(perm, n))
            .prop_map(|(men, women)| Instance::from_lists(men, women).unwrap())
    })
}

fn rank(l: &PreferenceList, p: Option<usize>) -> usize {
    p.and_then(|p| l.rank_of(p)).unwrap_or(usize::MAX)
}

fn matched(mu: &Matching) -> Vec<bool> {
    mu.wives().iter().chain(mu.husbands()).map(Option::is_some).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mpda_is_stable_and_self_inverse(inst in instance(7)) {
        let (mu, _) = mpda(&inst);
        prop_assert!(is_stable(&inst, &mu));
        for m in 0..inst.num_men() {
            if let Some(w) = mu.wife_of(m) {
                prop_assert_eq!(mu.husband_of(w), Some(m));
            }
        }
    }

    #[test]
    fn stability_matches_definition(inst in instance(5)) {
        let (mu, _) = mpda(&inst);
        let scan = |mu: &Matching| {
            let no_block = (0..inst.num_men())
                .all(|m| (0..inst.num_women()).all(|w| !is_blocking_pair(&inst, mu, m, w).unwrap()));
            let rational = mu.pairs().all(|(m, w)| inst.man(m).accepts(w) && inst.woman(w).accepts(m));
            no_block && rational
        };
        prop_assert_eq!(is_stable(&inst, &mu), scan(&mu));
        let empty = Matching::empty(inst.num_men(), inst.num_women());
        prop_assert_eq!(is_stable(&inst, &empty), scan(&empty));
    }

    #[test]
    fn schedule_invariance(inst in instance(7)) {
        let low = mpda_with_schedule(&inst, Schedule::LowestIndexFirst).0;
        let high = mpda_with_schedule(&inst, Schedule::HighestIndexFirst).0;
        prop_assert_eq!(low, high);
    }

    #[test]
    fn trace_replays(inst in instance(6)) {
        let (a, ta) = mpda(&inst);
        let (b, tb) = mpda(&inst);
        prop_assert_eq!(a, b);
        prop_assert_eq!(ta, tb);
    }

    #[test]
    fn optimality_and_rural_hospitals(inst in instance(6)) {
        let ss = enumerate_all_stable(&inst, DEFAULT_GUARD).unwrap();
        prop_assert!(!ss.is_empty());
        let mu_m = mpda(&inst).0;
        let mu_w = wpda(&inst);
        prop_assert!(ss.matchings.contains(&mu_m));
        prop_assert!(ss.matchings.contains(&mu_w));
        for mu in &ss.matchings {
            prop_assert_eq!(matched(mu), matched(&mu_m));
            for m in 0..inst.num_men() {
                prop_assert!(rank(inst.man(m), mu_m.wife_of(m)) <= rank(inst.man(m), mu.wife_of(m)));
            }
            for w in 0..inst.num_women() {
                prop_assert!(rank(inst.woman(w), mu_w.husband_of(w)) <= rank(inst.woman(w), mu.husband_of(w)));
            }
        }
    }

    #[test]
    fn husband_enumeration_matches_oracle(inst in instance(6)) {
        let ss = enumerate_all_stable(&inst, DEFAULT_GUARD).unwrap();
        let sh = StableHusbands::new(&inst);
        let mu_w = wpda(&inst);
        for w in 0..inst.num_women() {
            let e = sh.for_woman(w);
            let mut got = e.husbands.clone();
            got.sort_unstable();
            prop_assert_eq!(got, ss.husbands_of(w));
            let ranks: Vec<usize> = e.husbands.iter().map(|&m| rank(inst.woman(w), Some(m))).collect();
            prop_assert!(ranks.windows(2).all(|p| p[1] < p[0]));
            prop_assert_eq!(e.worst(), sh.men_optimal().husband_of(w));
            prop_assert_eq!(e.best(), mu_w.husband_of(w));
        }
    }

    #[test]
    fn stable_pairs_stay_in_blocks(inst in instance(6)) {
        let ss = enumerate_all_stable(&inst, DEFAULT_GUARD).unwrap();
        let bs = BlockStructure::new(&inst);
        let blocks = bs.block_decomposition();
        prop_assert_eq!(blocks.first().unwrap().l, 0);
        prop_assert_eq!(blocks.last().unwrap().r, bs.len());
        prop_assert!(blocks.windows(2).all(|p| p[0].r == p[1].l));
        for &(m, w) in &ss.stable_pairs {
            let iw = bs.index_of_woman(w).unwrap();
            prop_assert!(blocks.iter().any(|b| b.contains(m) && b.contains(iw)));
        }
        for n in 0..bs.len() {
            prop_assert!(blocks.contains(&bs.compute_block(n).unwrap()));
        }
    }

    #[test]
    fn separators_fix_women_sets(inst in instance(6)) {
        let ss = enumerate_all_stable(&inst, DEFAULT_GUARD).unwrap();
        let bs = BlockStructure::new(&inst);
        for t in bs.separators() {
            let set = |mu: &Matching| {
                let mut s: Vec<Option<usize>> = (0..t.min(inst.num_men())).map(|m| mu.wife_of(m)).collect();
                s.sort_unstable();
                s
            };
            let first = set(&ss.matchings[0]);
            for mu in &ss.matchings {
                prop_assert_eq!(set(mu), first.clone());
            }
        }
    }

    #[test]
    fn rank_gap_within_components(inst in complete(6)) {
        let ss = enumerate_all_stable(&inst, DEFAULT_GUARD).unwrap();
        let bs = BlockStructure::new(&inst);
        for w in 0..inst.num_women() {
            let r = ss.women[w];
            let (Some(best), Some(worst)) = (r.best, r.worst) else { continue };
            let gap = rank(inst.woman(w), Some(worst)) - rank(inst.woman(w), Some(best));
            let (x, span) = bs.rank_gap_components(bs.index_of_woman(w).unwrap()).unwrap();
            prop_assert!(gap <= x + span, "gap {} > {} + {}", gap, x, span);
        }
    }

    #[test]
    fn virtual_women_match_everyone(inst in instance(6)) {
        let aug = augment_virtual_women(&inst);
        let mu = mpda(&aug).0;
        let orig = mpda(&inst).0;
        for m in 0..inst.num_men() {
            let w = mu.wife_of(m).unwrap();
            match orig.wife_of(m) {
                Some(real) => prop_assert_eq!(w, real),
                None => prop_assert!(w >= inst.num_women()),
            }
        }
    }

    #[test]
    fn json_round_trip(inst in instance(6)) {
        let back = Instance::from_json(&inst.to_json()).unwrap();
        prop_assert_eq!(&back, &inst);
        let mu = mpda(&inst).0;
        let text = serde_json::to_string(&mu).unwrap();
        let mu2: Matching = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(mu2, mu);
    }

    #[test]
    fn rank_of_is_a_bijection(order in list(8)) {
        let l = PreferenceList::new(order.clone());
        let mut seen = vec![false; order.len()];
        for &p in &order {
            let r = l.rank_of(p).unwrap();
            prop_assert!(!seen[r]);
            seen[r] = true;
            prop_assert_eq!(l.as_slice()[r], p);
        }
    }
}
