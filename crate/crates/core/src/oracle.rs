//! Exhaustive enumeration of stable matchings for small instances.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{default_format, is_stable, Instance, Matching, Side};

pub const DEFAULT_GUARD: usize = 7;

/// Best and worst stable partner of one person, by that person's list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PartnerRange {
    pub best: Option<usize>,
    pub worst: Option<usize>,
    pub partners: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StableSet {
    pub matchings: Vec<Matching>,
    pub stable_pairs: BTreeSet<(usize, usize)>,
    pub men: Vec<PartnerRange>,
    pub women: Vec<PartnerRange>,
}

impl StableSet {
    fn from_matchings(inst: &Instance, matchings: Vec<Matching>) -> Self {
        let stable_pairs: BTreeSet<(usize, usize)> = matchings.iter().flat_map(|mu| mu.pairs()).collect();
        let range = |list: &crate::PreferenceList, partners: Vec<usize>| {
            let best = partners.iter().copied().min_by_key(|&p| list.rank_of(p));
            let worst = partners.iter().copied().max_by_key(|&p| list.rank_of(p));
            PartnerRange { best, worst, partners: partners.len() }
        };
        let men = (0..inst.num_men())
            .map(|m| {
                let ps = stable_pairs.iter().filter(|p| p.0 == m).map(|p| p.1).collect();
                range(inst.man(m), ps)
            })
            .collect();
        let women = (0..inst.num_women())
            .map(|w| {
                let ps = stable_pairs.iter().filter(|p| p.1 == w).map(|p| p.0).collect();
                range(inst.woman(w), ps)
            })
            .collect();
        StableSet { matchings, stable_pairs, men, women }
    }

    pub fn len(&self) -> usize {
        self.matchings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matchings.is_empty()
    }

    /// The member giving every man his best stable partner.
    pub fn man_best(&self) -> Matching {
        let wives: Vec<Option<usize>> = self.men.iter().map(|r| r.best).collect();
        Matching::from_wives(wives, self.women.len()).expect("best partners form a matching")
    }

    pub fn woman_best(&self) -> Matching {
        let husbands: Vec<Option<usize>> = self.women.iter().map(|r| r.best).collect();
        Matching::from_wives(husbands, self.men.len())
            .expect("best partners form a matching")
            .transposed()
    }

    /// Stable husbands of `w`, in increasing man index.
    pub fn husbands_of(&self, w: usize) -> Vec<usize> {
        self.stable_pairs.iter().filter(|p| p.1 == w).map(|p| p.0).collect()
    }

    pub fn wives_of(&self, m: usize) -> Vec<usize> {
        self.stable_pairs.iter().filter(|p| p.0 == m).map(|p| p.1).collect()
    }

    pub fn range(&self, side: Side, index: usize) -> PartnerRange {
        match side {
            Side::Man => self.men[index],
            Side::Woman => self.women[index],
        }
    }

    /// Whether every member matches the same set of persons.
    pub fn matched_set_constant(&self) -> bool {
        let key = |mu: &Matching| -> (Vec<bool>, Vec<bool>) {
            (
                mu.wives().iter().map(Option::is_some).collect(),
                mu.husbands().iter().map(Option::is_some).collect(),
            )
        };
        self.matchings.windows(2).all(|p| key(&p[0]) == key(&p[1]))
    }

    pub fn to_json(&self) -> String {
        let export = StableSetJson {
            format: default_format(),
            count: self.len(),
            stable_pairs: self.stable_pairs.iter().map(|&(m, w)| [m, w]).collect(),
            num_stable_pairs: count_stable_pairs(self),
            multiplicity_fraction: multiplicity_fraction(self),
            men: &self.men,
            women: &self.women,
            matchings: &self.matchings,
        };
        serde_json::to_string(&export).expect("stable set serializes")
    }
}

#[derive(Serialize)]
struct StableSetJson<'a> {
    format: u64,
    count: usize,
    num_stable_pairs: usize,
    multiplicity_fraction: f64,
    stable_pairs: Vec<[usize; 2]>,
    men: &'a [PartnerRange],
    women: &'a [PartnerRange],
    matchings: &'a [Matching],
}

struct Search<'a> {
    inst: &'a Instance,
    wife: Vec<Option<usize>>,
    husband: Vec<Option<usize>>,
    /// wr[m][w]: rank of w in m's list; mr[w][m] likewise.
    wr: Vec<Vec<Option<usize>>>,
    mr: Vec<Vec<Option<usize>>>,
    found: Vec<Matching>,
}

impl Search<'_> {
    fn prefers_man(&self, m: usize, w: usize) -> bool {
        match (self.wr[m][w], self.wife[m]) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(r), Some(cur)) => self.wr[m][cur].is_none_or(|c| r < c),
        }
    }

    fn prefers_woman(&self, w: usize, m: usize) -> bool {
        match (self.mr[w][m], self.husband[w]) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(r), Some(cur)) => self.mr[w][cur].is_none_or(|c| r < c),
        }
    }

    /// Men `0..k` are decided, as are women holding one of them. A decided
    /// man and a taken woman that block cannot be repaired later.
    fn decided_block(&self, k: usize) -> bool {
        (0..k).any(|m| {
            (0..self.inst.num_women())
                .any(|w| self.husband[w].is_some() && self.prefers_man(m, w) && self.prefers_woman(w, m))
        })
    }

    fn dfs(&mut self, k: usize) {
        if k == self.inst.num_men() {
            let mu = Matching::from_raw(self.wife.clone(), self.husband.clone());
            if is_stable(self.inst, &mu) {
                self.found.push(mu);
            }
            return;
        }
        let options: Vec<usize> = self.inst.man(k).iter().collect();
        for w in options {
            if self.husband[w].is_some() || self.mr[w][k].is_none() {
                continue;
            }
            self.wife[k] = Some(w);
            self.husband[w] = Some(k);
            if !self.decided_block(k + 1) {
                self.dfs(k + 1);
            }
            self.wife[k] = None;
            self.husband[w] = None;
        }
        if !self.decided_block(k + 1) {
            self.dfs(k + 1);
        }
    }
}

fn rank_table(lists: &[crate::PreferenceList], opposite: usize) -> Vec<Vec<Option<usize>>> {
    lists.iter().map(|l| (0..opposite).map(|p| l.rank_of(p)).collect()).collect()
}

/// All stable matchings, by exhaustive search over the smaller side.
pub fn enumerate_all_stable(inst: &Instance, guard: usize) -> Result<StableSet> {
    let size = inst.num_men().min(inst.num_women());
    if size > guard {
        return Err(Error::GuardExceeded { size, guard });
    }
    if inst.num_men() > inst.num_women() {
        let t = enumerate_all_stable(&inst.transposed(), guard)?;
        let mut matchings: Vec<Matching> = t.matchings.iter().map(Matching::transposed).collect();
        matchings.sort_by(|a, b| a.wives().cmp(b.wives()));
        return Ok(StableSet::from_matchings(inst, matchings));
    }
    let mut s = Search {
        inst,
        wife: vec![None; inst.num_men()],
        husband: vec![None; inst.num_women()],
        wr: rank_table(inst.men(), inst.num_women()),
        mr: rank_table(inst.women(), inst.num_men()),
        found: Vec::new(),
    };
    s.dfs(0);
    let mut matchings = s.found;
    matchings.sort_by(|a, b| a.wives().cmp(b.wives()));
    Ok(StableSet::from_matchings(inst, matchings))
}

pub fn count_stable_pairs(ss: &StableSet) -> usize {
    ss.stable_pairs.len()
}

/// Share of all persons with at least two stable partners.
pub fn multiplicity_fraction(ss: &StableSet) -> f64 {
    let total = ss.men.len() + ss.women.len();
    if total == 0 {
        return 0.0;
    }
    let multi = ss.men.iter().chain(&ss.women).filter(|r| r.partners >= 2).count();
    multi as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prefgen::models::{build_folklore_deterministic, build_master_list, build_uniform};
    use crate::prefgen::StreamKey;

    /// Every matching of a small instance, filtered by stability.
    fn naive(inst: &Instance) -> Vec<Matching> {
        fn rec(inst: &Instance, m: usize, wife: &mut Vec<Option<usize>>, out: &mut Vec<Matching>) {
            if m == inst.num_men() {
                let mut husband = vec![None; inst.num_women()];
                for (mm, w) in wife.iter().enumerate() {
                    if let Some(w) = *w {
                        husband[w] = Some(mm);
                    }
                }
                let mu = Matching::from_arrays(wife.clone(), husband).unwrap();
                if is_stable(inst, &mu) {
                    out.push(mu);
                }
                return;
            }
            for w in 0..inst.num_women() {
                if !wife.contains(&Some(w)) {
                    wife[m] = Some(w);
                    rec(inst, m + 1, wife, out);
                }
            }
            wife[m] = None;
            rec(inst, m + 1, wife, out);
        }
        let mut out = Vec::new();
        rec(inst, 0, &mut vec![None; inst.num_men()], &mut out);
        out.sort_by(|a, b| a.wives().cmp(b.wives()));
        out
    }

    #[test]
    fn one_by_one() {
        let inst = Instance::from_lists(vec![vec![0]], vec![vec![0]]).unwrap();
        let ss = enumerate_all_stable(&inst, DEFAULT_GUARD).unwrap();
        assert_eq!(ss.len(), 1);
        assert_eq!(ss.matchings[0].wife_of(0), Some(0));
    }

    #[test]
    fn folklore_three_all_pairs_stable() {
        let b = build_folklore_deterministic(3).unwrap();
        let ss = enumerate_all_stable(&b.instance, DEFAULT_GUARD).unwrap();
        assert_eq!(count_stable_pairs(&ss), 9);
        assert_eq!(multiplicity_fraction(&ss), 1.0);
        let by_women: usize = (0..3).map(|w| ss.husbands_of(w).len()).sum();
        assert_eq!(by_women, 9);
    }

    #[test]
    fn master_list_unique() {
        let b = build_master_list(4, 4, Some(StreamKey::master(5).trial(0)));
        let ss = enumerate_all_stable(&b.instance, DEFAULT_GUARD).unwrap();
        assert_eq!(ss.len(), 1);
        assert_eq!(multiplicity_fraction(&ss), 0.0);
        assert_eq!(count_stable_pairs(&ss), 4);
    }

    #[test]
    fn guard_is_enforced() {
        let b = build_master_list(8, 8, None);
        assert!(matches!(
            enumerate_all_stable(&b.instance, DEFAULT_GUARD),
            Err(Error::GuardExceeded { size: 8, guard: 7 })
        ));
        assert!(enumerate_all_stable(&b.instance, 8).is_ok());
    }

    #[test]
    fn agrees_with_naive_enumeration() {
        for t in 0..400u64 {
            let m = 1 + (t % 5) as usize;
            let w = 1 + ((t / 5) % 5) as usize;
            let b = build_uniform(m, w, t % 3 != 0, 0.6, StreamKey::master(11).trial(t));
            let ss = enumerate_all_stable(&b.instance, DEFAULT_GUARD).unwrap();
            assert_eq!(ss.matchings, naive(&b.instance), "trial {t}");
            assert!(ss.matched_set_constant());
        }
    }

    #[test]
    fn json_summary() {
        let inst = Instance::from_lists(vec![vec![0]], vec![vec![0]]).unwrap();
        let json = enumerate_all_stable(&inst, DEFAULT_GUARD).unwrap().to_json();
        assert!(json.starts_with(r#"{"format":1,"count":1,"num_stable_pairs":1"#), "{json}");
        assert!(json.contains(r#""matchings":[{"men":[0],"women":[0]}]"#));
    }
}
