//! Stable husbands of one woman by continuing deferred acceptance with her
//! rejecting every proposal.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::da::{run_state, Answer, DaState, ProposalTrace, WomenRanks};
use crate::market::{Instance, Matching};
use crate::prefgen::popularity::{sample_popularity_list, LogWeights};

/// Result of the enumeration for one woman.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HusbandEnumeration {
    pub woman: usize,
    /// Stable husbands from worst (her men-optimal partner) to best.
    pub husbands: Vec<usize>,
    /// Her men-optimal husband followed by every proposal she received
    /// while rejecting.
    pub proposals: Vec<usize>,
    /// Proposals she received during the initial run, including her
    /// men-optimal husband.
    pub initial_proposals: Vec<usize>,
}

impl HusbandEnumeration {
    fn unmatched(woman: usize, initial: Vec<usize>) -> Self {
        HusbandEnumeration {
            woman,
            husbands: Vec::new(),
            proposals: Vec::new(),
            initial_proposals: initial,
        }
    }

    pub fn count(&self) -> usize {
        self.husbands.len()
    }

    pub fn worst(&self) -> Option<usize> {
        self.husbands.first().copied()
    }

    pub fn best(&self) -> Option<usize> {
        self.husbands.last().copied()
    }

    /// Proposals received after the initial run.
    pub fn continued(&self) -> &[usize] {
        self.proposals.get(1..).unwrap_or(&[])
    }

    /// Every proposal she ever received that she finds acceptable, initial
    /// run first, without repetition.
    pub fn all_received(&self, inst: &Instance) -> Vec<usize> {
        let list = inst.woman(self.woman);
        let mut out: Vec<usize> = Vec::new();
        for &m in self.initial_proposals.iter().chain(self.continued()) {
            if list.accepts(m) && !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }
}

/// One men-optimal run shared across per-woman enumerations.
pub struct StableHusbands<'a> {
    inst: &'a Instance,
    ranks: WomenRanks,
    state: DaState,
    trace: ProposalTrace,
    received: Vec<Vec<usize>>,
}

impl<'a> StableHusbands<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let ranks = WomenRanks::new(inst);
        let (state, trace) = run_state(inst, &ranks);
        let received = trace.received(inst.num_women());
        StableHusbands { inst, ranks, state, trace, received }
    }

    pub fn men_optimal(&self) -> Matching {
        self.state.matching()
    }

    pub fn trace(&self) -> &ProposalTrace {
        &self.trace
    }

    pub fn for_woman(&self, target: usize) -> HusbandEnumeration {
        let inst = self.inst;
        let initial = self.received[target].clone();
        let Some(x0) = self.state.husband[target] else {
            return HusbandEnumeration::unmatched(target, initial);
        };
        let mut st = self.state.clone();
        st.husband[target] = None;
        st.wife[x0] = None;
        let mut proposals = vec![x0];
        let mut proposer = x0;
        while let Some(w) = st.advance(inst, proposer) {
            if w == target {
                proposals.push(proposer);
                continue;
            }
            if st.husband[w].is_none() {
                // Only the target loses a husband, so every other single
                // woman has never been matched.
                if self.ranks.accepts(w, proposer) {
                    break;
                }
                continue;
            }
            if let Answer::Displaced(prior) = st.propose(&self.ranks, proposer, w) {
                proposer = prior;
            }
        }
        let mut husbands = vec![x0];
        let mut best = self.ranks.rank(target, x0).expect("men-optimal husband is acceptable");
        for &m in &proposals[1..] {
            if let Some(r) = self.ranks.rank(target, m) {
                if r < best {
                    best = r;
                    husbands.push(m);
                }
            }
        }
        HusbandEnumeration {
            woman: target,
            husbands,
            proposals,
            initial_proposals: initial,
        }
    }

    pub fn all(&self) -> Vec<HusbandEnumeration> {
        (0..self.inst.num_women()).map(|w| self.for_woman(w)).collect()
    }
}

/// Stable husbands of `w` under the fixed lists of `inst`.
pub fn enumerate_stable_husbands(inst: &Instance, w: usize) -> HusbandEnumeration {
    StableHusbands::new(inst).for_woman(w)
}

/// Draws `w`'s full order from `weights`, then enumerates on the resulting
/// instance. Returns the enumeration and the instance actually used.
pub fn enumerate_stable_husbands_popularity<R: Rng + ?Sized>(
    inst: &Instance,
    w: usize,
    weights: &LogWeights,
    rng: &mut R,
) -> (HusbandEnumeration, Instance) {
    let list = sample_popularity_list(weights, rng);
    let inst = inst.with_woman_list(w, list);
    (enumerate_stable_husbands(&inst, w), inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prefgen::models::{build_folklore_cyclic, build_folklore_deterministic};
    use crate::prefgen::StreamKey;

    #[test]
    fn unmatched_woman_has_none() {
        let inst = Instance::from_lists(vec![vec![0]], vec![vec![0], vec![0]]).unwrap();
        let e = enumerate_stable_husbands(&inst, 1);
        assert!(e.husbands.is_empty());
        assert!(e.proposals.is_empty());
    }

    #[test]
    fn folklore_proposal_order() {
        let n = 6;
        let b = build_folklore_cyclic(n, 0.5, StreamKey::master(3).trial(0)).unwrap();
        let e = enumerate_stable_husbands(&b.instance, 0);
        let expected: Vec<usize> = (0..n).rev().collect();
        assert_eq!(e.proposals, expected);
        assert_eq!(e.initial_proposals, vec![n - 1]);
    }

    #[test]
    fn deterministic_folklore_every_man_is_a_husband() {
        let b = build_folklore_deterministic(4).unwrap();
        let sh = StableHusbands::new(&b.instance);
        for w in 0..4 {
            assert_eq!(sh.for_woman(w).count(), 4);
        }
    }

    #[test]
    fn unacceptable_single_woman_does_not_stop_the_chain() {
        // Two stable matchings; w2 accepts nobody and sits between m1's
        // two real choices, so the chain for w0 passes through her.
        let inst = Instance::from_lists(
            vec![vec![0, 1], vec![1, 2, 0]],
            vec![vec![1, 0], vec![0, 1], vec![]],
        )
        .unwrap();
        let sh = StableHusbands::new(&inst);
        assert_eq!(sh.men_optimal().wives(), &[Some(0), Some(1)]);
        let e0 = sh.for_woman(0);
        assert_eq!(e0.proposals, vec![0, 1]);
        assert_eq!(e0.husbands, vec![0, 1]);
        assert_eq!(sh.for_woman(1).husbands, vec![1, 0]);
        assert!(sh.for_woman(2).husbands.is_empty());
    }
}
