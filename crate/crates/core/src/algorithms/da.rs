//! Deferred acceptance with a recorded proposal trace.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::market::{Instance, Matching};

const UNRANKED: u32 = u32::MAX;

/// Dense `rank[w][m]` lookup so that a woman compares two proposers in O(1).
#[derive(Clone, Debug)]
pub struct WomenRanks {
    num_men: usize,
    rank: Vec<u32>,
}

impl WomenRanks {
    pub fn new(inst: &Instance) -> Self {
        let m = inst.num_men();
        let mut rank = vec![UNRANKED; m * inst.num_women()];
        for (w, list) in inst.women().iter().enumerate() {
            for (r, man) in list.iter().enumerate() {
                if man < m {
                    rank[w * m + man] = r as u32;
                }
            }
        }
        WomenRanks { num_men: m, rank }
    }

    pub fn rank(&self, w: usize, m: usize) -> Option<usize> {
        match self.rank[w * self.num_men + m] {
            UNRANKED => None,
            r => Some(r as usize),
        }
    }

    pub fn accepts(&self, w: usize, m: usize) -> bool {
        self.rank[w * self.num_men + m] != UNRANKED
    }

    /// Whether `w` strictly prefers `m` to her current state `current`.
    pub fn prefers(&self, w: usize, m: usize, current: Option<usize>) -> bool {
        let r = self.rank[w * self.num_men + m];
        if r == UNRANKED {
            return false;
        }
        match current {
            None => true,
            Some(c) => r < self.rank[w * self.num_men + c],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Answer {
    /// She was single and accepted.
    Accepted,
    Rejected,
    /// She accepted and released the named prior husband.
    Displaced(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ProposalRepr", into = "ProposalRepr")]
pub struct Proposal {
    pub proposer: usize,
    pub target: usize,
    pub answer: Answer,
}

#[derive(Serialize, Deserialize)]
struct ProposalRepr {
    proposer: usize,
    target: usize,
    answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    displaced: Option<usize>,
}

impl From<Proposal> for ProposalRepr {
    fn from(p: Proposal) -> Self {
        let (answer, displaced) = match p.answer {
            Answer::Accepted => ("accepted", None),
            Answer::Rejected => ("rejected", None),
            Answer::Displaced(m) => ("displaced", Some(m)),
        };
        ProposalRepr {
            proposer: p.proposer,
            target: p.target,
            answer: answer.into(),
            displaced,
        }
    }
}

impl TryFrom<ProposalRepr> for Proposal {
    type Error = String;

    fn try_from(r: ProposalRepr) -> Result<Self, String> {
        let answer = match (r.answer.as_str(), r.displaced) {
            ("accepted", None) => Answer::Accepted,
            ("rejected", None) => Answer::Rejected,
            ("displaced", Some(m)) => Answer::Displaced(m),
            (a, d) => return Err(format!("bad answer `{a}` with displaced = {d:?}")),
        };
        Ok(Proposal {
            proposer: r.proposer,
            target: r.target,
            answer,
        })
    }
}

/// Every proposal made, in order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProposalTrace(pub Vec<Proposal>);

impl ProposalTrace {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Proposal> {
        self.0.iter()
    }

    /// Proposers received by each woman, in order of reception.
    pub fn received(&self, num_women: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); num_women];
        for p in &self.0 {
            out[p.target].push(p.proposer);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

/// Which single man moves next.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Schedule {
    #[default]
    LowestIndexFirst,
    HighestIndexFirst,
}

/// Mutable deferred-acceptance state; kept public to the crate so that the
/// husband enumeration can continue a finished run.
#[derive(Clone, Debug)]
pub(crate) struct DaState {
    /// Position in each man's list of his next proposal.
    pub next: Vec<usize>,
    pub wife: Vec<Option<usize>>,
    pub husband: Vec<Option<usize>>,
}

impl DaState {
    pub fn new(inst: &Instance) -> Self {
        DaState {
            next: vec![0; inst.num_men()],
            wife: vec![None; inst.num_men()],
            husband: vec![None; inst.num_women()],
        }
    }

    /// Next woman `m` would propose to, advancing his pointer.
    pub fn advance(&mut self, inst: &Instance, m: usize) -> Option<usize> {
        let list = inst.man(m).as_slice();
        let w = *list.get(self.next[m])?;
        self.next[m] += 1;
        Some(w)
    }

    pub fn has_options(&self, inst: &Instance, m: usize) -> bool {
        self.next[m] < inst.man(m).len()
    }

    /// `m` proposes to `w`; she keeps the better of him and her husband.
    pub fn propose(&mut self, ranks: &WomenRanks, m: usize, w: usize) -> Answer {
        let current = self.husband[w];
        if !ranks.prefers(w, m, current) {
            return Answer::Rejected;
        }
        self.husband[w] = Some(m);
        self.wife[m] = Some(w);
        match current {
            None => Answer::Accepted,
            Some(prior) => {
                self.wife[prior] = None;
                Answer::Displaced(prior)
            }
        }
    }

    pub fn matching(&self) -> Matching {
        Matching::from_raw(self.wife.clone(), self.husband.clone())
    }
}

fn run<H: SinglesQueue>(inst: &Instance, ranks: &WomenRanks, mut queue: H) -> (DaState, ProposalTrace) {
    let mut state = DaState::new(inst);
    let mut trace = Vec::new();
    for m in 0..inst.num_men() {
        if state.has_options(inst, m) {
            queue.push(m);
        }
    }
    while let Some(m) = queue.pop() {
        let Some(w) = state.advance(inst, m) else { continue };
        let answer = state.propose(ranks, m, w);
        trace.push(Proposal { proposer: m, target: w, answer });
        let freed = match answer {
            Answer::Accepted => None,
            Answer::Rejected => Some(m),
            Answer::Displaced(prior) => Some(prior),
        };
        if let Some(f) = freed {
            if state.has_options(inst, f) {
                queue.push(f);
            }
        }
    }
    (state, ProposalTrace(trace))
}

trait SinglesQueue {
    fn push(&mut self, m: usize);
    fn pop(&mut self) -> Option<usize>;
}

impl SinglesQueue for BinaryHeap<Reverse<usize>> {
    fn push(&mut self, m: usize) {
        BinaryHeap::push(self, Reverse(m));
    }
    fn pop(&mut self) -> Option<usize> {
        BinaryHeap::pop(self).map(|Reverse(m)| m)
    }
}

impl SinglesQueue for BinaryHeap<usize> {
    fn push(&mut self, m: usize) {
        BinaryHeap::push(self, m);
    }
    fn pop(&mut self) -> Option<usize> {
        BinaryHeap::pop(self)
    }
}

pub(crate) fn run_state(inst: &Instance, ranks: &WomenRanks) -> (DaState, ProposalTrace) {
    run(inst, ranks, BinaryHeap::<Reverse<usize>>::new())
}

/// Men-proposing deferred acceptance, lowest-index single man first.
pub fn mpda(inst: &Instance) -> (Matching, ProposalTrace) {
    mpda_with_schedule(inst, Schedule::LowestIndexFirst)
}

pub fn mpda_with_schedule(inst: &Instance, schedule: Schedule) -> (Matching, ProposalTrace) {
    let ranks = WomenRanks::new(inst);
    let (state, trace) = match schedule {
        Schedule::LowestIndexFirst => run(inst, &ranks, BinaryHeap::<Reverse<usize>>::new()),
        Schedule::HighestIndexFirst => run(inst, &ranks, BinaryHeap::<usize>::new()),
    };
    (state.matching(), trace)
}

/// Women-proposing deferred acceptance.
pub fn wpda(inst: &Instance) -> Matching {
    mpda(&inst.transposed()).0.transposed()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::is_stable;

    #[test]
    fn one_by_one() {
        let inst = Instance::from_lists(vec![vec![0]], vec![vec![0]]).unwrap();
        let (mu, trace) = mpda(&inst);
        assert_eq!(mu.wife_of(0), Some(0));
        assert_eq!(trace.len(), 1);
        assert_eq!(wpda(&inst).wife_of(0), Some(0));
    }

    #[test]
    fn textbook_three_by_three() {
        // Men: m0: w0 w1 w2, m1: w1 w0 w2, m2: w0 w1 w2.
        // Women: w0: m1 m0 m2, w1: m0 m1 m2, w2: any.
        let inst = Instance::from_lists(
            vec![vec![0, 1, 2], vec![1, 0, 2], vec![0, 1, 2]],
            vec![vec![1, 0, 2], vec![0, 1, 2], vec![0, 1, 2]],
        )
        .unwrap();
        let (mu, trace) = mpda(&inst);
        assert_eq!(mu.wives(), &[Some(0), Some(1), Some(2)]);
        assert!(is_stable(&inst, &mu));
        let w = wpda(&inst);
        assert_eq!(w.husbands(), &[Some(1), Some(0), Some(2)]);
        assert_eq!(trace.0[0], Proposal { proposer: 0, target: 0, answer: Answer::Accepted });
        assert_eq!(trace.0[2], Proposal { proposer: 2, target: 0, answer: Answer::Rejected });
    }

    #[test]
    fn displacement_is_recorded() {
        let inst = Instance::from_lists(vec![vec![0], vec![0]], vec![vec![1, 0]]).unwrap();
        let (mu, trace) = mpda(&inst);
        assert_eq!(mu.husband_of(0), Some(1));
        assert_eq!(trace.0[1].answer, Answer::Displaced(0));
        let json = trace.to_json();
        assert_eq!(
            json,
            r#"[{"proposer":0,"target":0,"answer":"accepted"},{"proposer":1,"target":0,"answer":"displaced","displaced":0}]"#
        );
        let back: ProposalTrace = serde_json::from_str(&json).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn empty_lists_leave_everyone_single() {
        let inst = Instance::from_lists(vec![vec![], vec![]], vec![vec![], vec![]]).unwrap();
        let (mu, trace) = mpda(&inst);
        assert_eq!(mu.size(), 0);
        assert!(trace.is_empty());
    }

    #[test]
    fn one_sided_acceptability_is_rejected() {
        let inst = Instance::from_lists(vec![vec![0]], vec![vec![]]).unwrap();
        let (mu, trace) = mpda(&inst);
        assert_eq!(mu.size(), 0);
        assert_eq!(trace.0[0].answer, Answer::Rejected);
    }
}
