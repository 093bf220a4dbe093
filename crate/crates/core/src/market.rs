//! Instances, matchings and the stability predicate.
//!
//! Everything is 0-based. A person's preference list doubles as their
//! acceptability set: anyone absent from the list is unacceptable. Comparisons
//! are total over `acceptable (by rank) ≻ single ≻ unacceptable`, which makes
//! "matched to an unacceptable partner" an ordinary blocking condition.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Man,
    Woman,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Man => Side::Woman,
            Side::Woman => Side::Man,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Man => "man",
            Side::Woman => "woman",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PersonId {
    pub side: Side,
    pub index: usize,
}

impl PersonId {
    pub fn man(index: usize) -> Self {
        PersonId { side: Side::Man, index }
    }

    pub fn woman(index: usize) -> Self {
        PersonId { side: Side::Woman, index }
    }
}

/// Ordered list of acceptable partners, most preferred first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreferenceList(Vec<usize>);

impl PreferenceList {
    pub fn new(order: Vec<usize>) -> Self {
        PreferenceList(order)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// 0-based position of `partner`, or `None` when unacceptable.
    pub fn rank_of(&self, partner: usize) -> Option<usize> {
        self.0.iter().position(|&p| p == partner)
    }

    pub fn accepts(&self, partner: usize) -> bool {
        self.0.contains(&partner)
    }

    /// Strict preference between two outcomes, `None` meaning single.
    pub fn prefers(&self, a: Option<usize>, b: Option<usize>) -> bool {
        self.standing(a) < self.standing(b)
    }

    // (0, rank) for acceptable, (1, 0) for single, (2, 0) for unacceptable.
    fn standing(&self, outcome: Option<usize>) -> (u8, usize) {
        match outcome {
            None => (1, 0),
            Some(p) => match self.rank_of(p) {
                Some(r) => (0, r),
                None => (2, 0),
            },
        }
    }
}

impl From<Vec<usize>> for PreferenceList {
    fn from(v: Vec<usize>) -> Self {
        PreferenceList(v)
    }
}

/// Free function form of [`PreferenceList::rank_of`].
pub fn rank_of(list: &PreferenceList, partner: usize) -> Option<usize> {
    list.rank_of(partner)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Instance {
    men: Vec<PreferenceList>,
    women: Vec<PreferenceList>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    Duplicate {
        side: Side,
        person: usize,
        position: usize,
        entry: usize,
    },
    OutOfRange {
        side: Side,
        person: usize,
        position: usize,
        entry: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Duplicate { side, person, position, entry } => {
                write!(f, "{side} {person}: duplicate entry {entry} at position {position}")
            }
            Violation::OutOfRange { side, person, position, entry } => {
                write!(f, "{side} {person}: entry {entry} at position {position} out of range")
            }
        }
    }
}

impl Instance {
    /// Builds an instance without checking it; see [`Instance::validate`].
    pub fn new(men: Vec<PreferenceList>, women: Vec<PreferenceList>) -> Self {
        Instance { men, women }
    }

    /// Builds an instance and rejects any list violations.
    pub fn checked(men: Vec<PreferenceList>, women: Vec<PreferenceList>) -> Result<Self> {
        let inst = Instance::new(men, women);
        let violations = inst.validate();
        match violations.first() {
            None => Ok(inst),
            Some(v) => Err(Error::InvalidInstance(format!(
                "{v} ({} violation(s) in total)",
                violations.len()
            ))),
        }
    }

    pub fn from_lists(men: Vec<Vec<usize>>, women: Vec<Vec<usize>>) -> Result<Self> {
        Instance::checked(
            men.into_iter().map(PreferenceList::new).collect(),
            women.into_iter().map(PreferenceList::new).collect(),
        )
    }

    pub fn num_men(&self) -> usize {
        self.men.len()
    }

    pub fn num_women(&self) -> usize {
        self.women.len()
    }

    pub fn men(&self) -> &[PreferenceList] {
        &self.men
    }

    pub fn women(&self) -> &[PreferenceList] {
        &self.women
    }

    pub fn man(&self, m: usize) -> &PreferenceList {
        &self.men[m]
    }

    pub fn woman(&self, w: usize) -> &PreferenceList {
        &self.women[w]
    }

    pub fn list(&self, person: PersonId) -> &PreferenceList {
        match person.side {
            Side::Man => &self.men[person.index],
            Side::Woman => &self.women[person.index],
        }
    }

    pub fn count(&self, side: Side) -> usize {
        match side {
            Side::Man => self.men.len(),
            Side::Woman => self.women.len(),
        }
    }

    /// Replaces one woman's list, returning a new instance.
    pub fn with_woman_list(&self, w: usize, list: PreferenceList) -> Instance {
        let mut out = self.clone();
        out.women[w] = list;
        out
    }

    /// Swaps the roles of men and women.
    pub fn transposed(&self) -> Instance {
        Instance {
            men: self.women.clone(),
            women: self.men.clone(),
        }
    }

    /// Reports duplicate and out-of-range entries with their positions.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (side, lists, range) in [
            (Side::Man, &self.men, self.women.len()),
            (Side::Woman, &self.women, self.men.len()),
        ] {
            for (person, list) in lists.iter().enumerate() {
                let mut seen = vec![false; range];
                for (position, entry) in list.iter().enumerate() {
                    if entry >= range {
                        out.push(Violation::OutOfRange { side, person, position, entry });
                    } else if seen[entry] {
                        out.push(Violation::Duplicate { side, person, position, entry });
                    } else {
                        seen[entry] = true;
                    }
                }
            }
        }
        out
    }

    pub fn is_complete(&self) -> bool {
        self.men.iter().all(|l| l.len() == self.women.len())
            && self.women.iter().all(|l| l.len() == self.men.len())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&InstanceFile {
            format: FORMAT_VERSION,
            men: self.men.clone(),
            women: self.women.clone(),
        })
        .expect("instance serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        if file.format != FORMAT_VERSION {
            return Err(Error::FormatVersion(file.format));
        }
        Instance::checked(file.men, file.women)
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    #[serde(default = "default_format")]
    format: u64,
    men: Vec<PreferenceList>,
    women: Vec<PreferenceList>,
}

pub(crate) fn default_format() -> u64 {
    FORMAT_VERSION
}

/// A self-inverse pairing of men and women; `None` is single.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MatchingRepr", into = "MatchingRepr")]
pub struct Matching {
    wife: Vec<Option<usize>>,
    husband: Vec<Option<usize>>,
}

#[derive(Serialize, Deserialize)]
struct MatchingRepr {
    men: Vec<Option<usize>>,
    women: Vec<Option<usize>>,
}

impl TryFrom<MatchingRepr> for Matching {
    type Error = Error;

    fn try_from(r: MatchingRepr) -> Result<Self> {
        Matching::from_arrays(r.men, r.women)
    }
}

impl From<Matching> for MatchingRepr {
    fn from(m: Matching) -> Self {
        MatchingRepr {
            men: m.wife,
            women: m.husband,
        }
    }
}

impl Matching {
    pub fn empty(num_men: usize, num_women: usize) -> Self {
        Matching {
            wife: vec![None; num_men],
            husband: vec![None; num_women],
        }
    }

    /// Builds a matching from the men's side, deriving the women's side.
    pub fn from_wives(wife: Vec<Option<usize>>, num_women: usize) -> Result<Self> {
        let mut husband = vec![None; num_women];
        for (m, w) in wife.iter().enumerate() {
            if let Some(w) = *w {
                if w >= num_women {
                    return Err(Error::InvalidMatching(format!("man {m} paired with woman {w} out of range")));
                }
                if let Some(other) = husband[w] {
                    return Err(Error::InvalidMatching(format!("woman {w} paired with men {other} and {m}")));
                }
                husband[w] = Some(m);
            }
        }
        Ok(Matching { wife, husband })
    }

    pub fn from_pairs(num_men: usize, num_women: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut wife = vec![None; num_men];
        for &(m, w) in pairs {
            if m >= num_men {
                return Err(Error::InvalidMatching(format!("man {m} out of range")));
            }
            if wife[m].is_some() {
                return Err(Error::InvalidMatching(format!("man {m} paired twice")));
            }
            wife[m] = Some(w);
        }
        Matching::from_wives(wife, num_women)
    }

    /// Checks μ² = Id between the two arrays.
    pub fn from_arrays(wife: Vec<Option<usize>>, husband: Vec<Option<usize>>) -> Result<Self> {
        let derived = Matching::from_wives(wife, husband.len())?;
        if derived.husband != husband {
            return Err(Error::InvalidMatching("partner arrays are not mutually inverse".into()));
        }
        Ok(derived)
    }

    pub fn num_men(&self) -> usize {
        self.wife.len()
    }

    pub fn num_women(&self) -> usize {
        self.husband.len()
    }

    pub fn wife_of(&self, m: usize) -> Option<usize> {
        self.wife[m]
    }

    pub fn husband_of(&self, w: usize) -> Option<usize> {
        self.husband[w]
    }

    pub fn wives(&self) -> &[Option<usize>] {
        &self.wife
    }

    pub fn husbands(&self) -> &[Option<usize>] {
        &self.husband
    }

    pub fn partner(&self, person: PersonId) -> Option<usize> {
        match person.side {
            Side::Man => self.wife[person.index],
            Side::Woman => self.husband[person.index],
        }
    }

    /// Matched pairs as `(man, woman)`, in increasing man order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.wife.iter().enumerate().filter_map(|(m, w)| w.map(|w| (m, w)))
    }

    pub fn size(&self) -> usize {
        self.pairs().count()
    }

    pub fn transposed(&self) -> Matching {
        Matching {
            wife: self.husband.clone(),
            husband: self.wife.clone(),
        }
    }

    pub(crate) fn debug_assert_inverse(&self) {
        debug_assert!(self
            .wife
            .iter()
            .enumerate()
            .all(|(m, w)| w.is_none_or(|w| self.husband[w] == Some(m))));
        debug_assert!(self
            .husband
            .iter()
            .enumerate()
            .all(|(w, m)| m.is_none_or(|m| self.wife[m] == Some(w))));
    }

    /// Builds from both arrays already known to be consistent.
    pub(crate) fn from_raw(wife: Vec<Option<usize>>, husband: Vec<Option<usize>>) -> Self {
        let mu = Matching { wife, husband };
        mu.debug_assert_inverse();
        mu
    }
}

fn check_shape(inst: &Instance, mu: &Matching) -> Result<()> {
    if mu.num_men() != inst.num_men() || mu.num_women() != inst.num_women() {
        return Err(Error::InvalidMatching(format!(
            "matching is {}x{} but instance is {}x{}",
            mu.num_men(),
            mu.num_women(),
            inst.num_men(),
            inst.num_women()
        )));
    }
    Ok(())
}

/// True iff `m` and `w` each strictly prefer the other to their partner in `mu`.
pub fn is_blocking_pair(inst: &Instance, mu: &Matching, m: usize, w: usize) -> Result<bool> {
    check_shape(inst, mu)?;
    if m >= inst.num_men() {
        return Err(Error::IndexOutOfRange { side: Side::Man, index: m, count: inst.num_men() });
    }
    if w >= inst.num_women() {
        return Err(Error::IndexOutOfRange { side: Side::Woman, index: w, count: inst.num_women() });
    }
    Ok(blocks(inst, mu, m, w))
}

fn blocks(inst: &Instance, mu: &Matching, m: usize, w: usize) -> bool {
    inst.woman(w).prefers(Some(m), mu.husband_of(w)) && inst.man(m).prefers(Some(w), mu.wife_of(m))
}

/// No blocking man-woman pair and nobody matched to an unacceptable partner.
pub fn is_stable(inst: &Instance, mu: &Matching) -> bool {
    if check_shape(inst, mu).is_err() {
        return false;
    }
    let rational = mu
        .pairs()
        .all(|(m, w)| inst.man(m).accepts(w) && inst.woman(w).accepts(m));
    rational
        && (0..inst.num_men()).all(|m| (0..inst.num_women()).all(|w| !blocks(inst, mu, m, w)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_by_one() -> Instance {
        Instance::from_lists(vec![vec![0]], vec![vec![0]]).unwrap()
    }

    #[test]
    fn rank_of_positions() {
        let list = PreferenceList::new(vec![2, 0, 1]);
        assert_eq!(rank_of(&list, 2), Some(0));
        assert_eq!(rank_of(&list, 1), Some(2));
        assert_eq!(rank_of(&list, 3), None);
    }

    #[test]
    fn prefers_is_total() {
        let list = PreferenceList::new(vec![1, 0]);
        assert!(list.prefers(Some(1), Some(0)));
        assert!(list.prefers(Some(0), None));
        assert!(list.prefers(None, Some(5)));
        assert!(!list.prefers(None, None));
        assert!(!list.prefers(Some(5), Some(6)));
    }

    #[test]
    fn single_pair_blocking() {
        let inst = one_by_one();
        let single = Matching::empty(1, 1);
        assert!(is_blocking_pair(&inst, &single, 0, 0).unwrap());
        let matched = Matching::from_pairs(1, 1, &[(0, 0)]).unwrap();
        assert!(!is_blocking_pair(&inst, &matched, 0, 0).unwrap());
        assert!(is_stable(&inst, &matched));
        assert!(!is_stable(&inst, &single));
    }

    #[test]
    fn first_choice_man_never_blocks() {
        let inst = Instance::from_lists(vec![vec![0, 1], vec![0, 1]], vec![vec![1, 0], vec![1, 0]]).unwrap();
        let mu = Matching::from_pairs(2, 2, &[(0, 0), (1, 1)]).unwrap();
        for w in 0..2 {
            assert!(!is_blocking_pair(&inst, &mu, 0, w).unwrap());
        }
    }

    #[test]
    fn blocking_pair_index_errors() {
        let inst = one_by_one();
        let mu = Matching::empty(1, 1);
        assert!(matches!(
            is_blocking_pair(&inst, &mu, 1, 0),
            Err(Error::IndexOutOfRange { side: Side::Man, .. })
        ));
        assert!(matches!(
            is_blocking_pair(&inst, &mu, 0, 3),
            Err(Error::IndexOutOfRange { side: Side::Woman, .. })
        ));
    }

    #[test]
    fn empty_lists_all_single_is_stable() {
        let inst = Instance::from_lists(vec![vec![], vec![]], vec![vec![], vec![]]).unwrap();
        assert!(is_stable(&inst, &Matching::empty(2, 2)));
    }

    #[test]
    fn unacceptable_partner_is_unstable() {
        // Man 0 lists woman 0 but she does not list him.
        let inst = Instance::from_lists(vec![vec![0]], vec![vec![]]).unwrap();
        let mu = Matching::from_pairs(1, 1, &[(0, 0)]).unwrap();
        assert!(!is_stable(&inst, &mu));
        assert!(is_stable(&inst, &Matching::empty(1, 1)));
    }

    #[test]
    fn validate_reports_violations() {
        let ok = Instance::new(vec![vec![0].into()], vec![vec![0].into()]);
        assert!(ok.validate().is_empty());
        let dup = Instance::new(vec![vec![0, 0].into()], vec![vec![0].into()]);
        assert_eq!(
            dup.validate(),
            vec![Violation::Duplicate { side: Side::Man, person: 0, position: 1, entry: 0 }]
        );
        let range = Instance::new(vec![vec![1].into()], vec![vec![0].into()]);
        assert_eq!(
            range.validate(),
            vec![Violation::OutOfRange { side: Side::Man, person: 0, position: 0, entry: 1 }]
        );
        assert!(Instance::from_lists(vec![vec![0, 0]], vec![vec![0]]).is_err());
    }

    #[test]
    fn matching_rejects_double_assignment() {
        assert!(Matching::from_pairs(2, 1, &[(0, 0), (1, 0)]).is_err());
        assert!(Matching::from_arrays(vec![Some(0)], vec![None]).is_err());
        let mu = Matching::from_arrays(vec![Some(0), None], vec![Some(0)]).unwrap();
        assert_eq!(mu.transposed().wife_of(0), Some(0));
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = Instance::from_lists(vec![vec![1, 0], vec![]], vec![vec![0], vec![1, 0]]).unwrap();
        let text = inst.to_json();
        assert_eq!(text, r#"{"format":1,"men":[[1,0],[]],"women":[[0],[1,0]]}"#);
        assert_eq!(Instance::from_json(&text).unwrap(), inst);
        // format field is optional on input
        let bare = Instance::from_json(r#"{"men":[[0]],"women":[[0]]}"#).unwrap();
        assert_eq!(bare, one_by_one());
        assert!(matches!(
            Instance::from_json(r#"{"format":2,"men":[],"women":[]}"#),
            Err(Error::FormatVersion(2))
        ));
    }

    #[test]
    fn matching_json() {
        let mu = Matching::from_pairs(2, 2, &[(1, 0)]).unwrap();
        let text = serde_json::to_string(&mu).unwrap();
        assert_eq!(text, r#"{"men":[null,0],"women":[1,null]}"#);
        let back: Matching = serde_json::from_str(&text).unwrap();
        assert_eq!(back, mu);
        assert!(serde_json::from_str::<Matching>(r#"{"men":[0],"women":[null]}"#).is_err());
    }
}
