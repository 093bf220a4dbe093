//! Prefix separators and blocks of the men-optimal matching.
//!
//! Indices here are relabeled: man `i` is the `i`-th man and `w_i` is his
//! men-optimal wife. A block is the half-open range `[l, r)` of relabeled
//! indices between two consecutive prefix separators.

use serde::{Deserialize, Serialize};

use super::da::mpda;
use crate::error::{Error, Result};
use crate::market::{Instance, Matching, PreferenceList, Side};

/// Appends, for every man, a fresh woman acceptable only to him at the
/// bottom of his list. Virtual woman of man `m` has index `W + m`.
pub fn augment_virtual_women(inst: &Instance) -> Instance {
    let w = inst.num_women();
    let men = inst
        .men()
        .iter()
        .enumerate()
        .map(|(m, list)| {
            let mut order = list.as_slice().to_vec();
            order.push(w + m);
            PreferenceList::new(order)
        })
        .collect();
    let mut women = inst.women().to_vec();
    women.extend((0..inst.num_men()).map(|m| PreferenceList::new(vec![m])));
    Instance::new(men, women)
}

/// Half-open block `[l, r)` of relabeled indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub l: usize,
    pub r: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.r - self.l
    }

    pub fn is_empty(&self) -> bool {
        self.r == self.l
    }

    pub fn contains(&self, i: usize) -> bool {
        self.l <= i && i < self.r
    }
}

/// Relabeled view of an instance whose men are all matched.
#[derive(Clone, Debug)]
pub struct BlockStructure {
    inst: Instance,
    /// `wife[i]`: wife of man `i` in the augmented instance.
    wife: Vec<usize>,
    num_real_women: usize,
    /// Woman → relabeled index of her husband.
    index_of_woman: Vec<Option<usize>>,
    /// Largest `j ≥ i` with `w_i` preferring `m_j` to `m_i`.
    reach: Vec<usize>,
}

impl BlockStructure {
    /// Augments with virtual women when any man would be single, then
    /// runs men-proposing deferred acceptance.
    pub fn new(inst: &Instance) -> Self {
        let (mu, _) = mpda(inst);
        if mu.wives().iter().all(Option::is_some) {
            return Self::from_matching(inst, &mu).expect("every man matched");
        }
        let aug = augment_virtual_women(inst);
        let (mu, _) = mpda(&aug);
        let mut s = Self::from_matching(&aug, &mu).expect("augmentation matches every man");
        s.num_real_women = inst.num_women();
        s
    }

    /// Uses a given men-optimal matching in which every man is matched.
    pub fn from_matching(inst: &Instance, mu_m: &Matching) -> Result<Self> {
        let wife = mu_m
            .wives()
            .iter()
            .enumerate()
            .map(|(m, w)| {
                w.ok_or_else(|| Error::InvalidMatching(format!("man {m} is single; augment first")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut index_of_woman = vec![None; inst.num_women()];
        for (i, &w) in wife.iter().enumerate() {
            index_of_woman[w] = Some(i);
        }
        let reach = wife
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let list = inst.woman(w);
                let cutoff = list.rank_of(i).unwrap_or(list.len());
                list.as_slice()[..cutoff].iter().copied().fold(i, usize::max)
            })
            .collect();
        Ok(BlockStructure {
            inst: inst.clone(),
            wife,
            num_real_women: inst.num_women(),
            index_of_woman,
            reach,
        })
    }

    /// Number of relabeled indices (the number of men).
    pub fn len(&self) -> usize {
        self.wife.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wife.is_empty()
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    /// Woman `w_i` for each relabeled index.
    pub fn relabel(&self) -> &[usize] {
        &self.wife
    }

    pub fn is_virtual(&self, i: usize) -> bool {
        self.wife[i] >= self.num_real_women
    }

    /// Relabeled index of woman `w`, if she is matched.
    pub fn index_of_woman(&self, w: usize) -> Option<usize> {
        self.index_of_woman.get(w).copied().flatten()
    }

    /// Whether `w_i` strictly prefers man `j` to her husband `m_i`.
    pub fn prefers_over_husband(&self, i: usize, j: usize) -> bool {
        let list = self.inst.woman(self.wife[i]);
        match (list.rank_of(j), list.rank_of(i)) {
            (Some(rj), Some(ri)) => rj < ri,
            (Some(_), None) => true,
            _ => false,
        }
    }

    /// Greedy left and right scans around relabeled index `n`.
    pub fn compute_block(&self, n: usize) -> Result<Block> {
        let len = self.len();
        if n >= len {
            return Err(Error::IndexOutOfRange { side: Side::Woman, index: n, count: len });
        }
        // w_i prefers some m_j with j ≥ t to her husband iff reach[i] ≥ t.
        let reach = &self.reach;
        let mut l = n;
        while let Some(i) = (0..l).find(|&i| reach[i] >= l) {
            l = i;
        }
        let mut r = n + 1;
        loop {
            let far = reach[..r].iter().copied().max().unwrap_or(0);
            if far < r {
                break;
            }
            r = far + 1;
        }
        Ok(Block { l, r })
    }

    /// All prefix separators `0 = t_0 < … < t_b = len`.
    pub fn separators(&self) -> Vec<usize> {
        let mut out = vec![0];
        let mut reach = 0usize;
        for (i, &j) in self.reach.iter().enumerate() {
            reach = reach.max(j);
            if reach < i + 1 {
                out.push(i + 1);
            }
        }
        out
    }

    pub fn block_decomposition(&self) -> Vec<Block> {
        self.separators().windows(2).map(|t| Block { l: t[0], r: t[1] }).collect()
    }

    /// `(x, r − l − 1)` for relabeled index `n`.
    pub fn rank_gap_components(&self, n: usize) -> Result<(usize, usize)> {
        let block = self.compute_block(n)?;
        let list = self.inst.woman(self.wife[n]);
        let order = list.as_slice();
        let husband_rank = list.rank_of(n).expect("matched woman accepts her husband");
        // Men above her husband; x counts those before l that are beaten by
        // some index ≥ l placed even higher.
        let mut seen_far = false;
        let mut x = 0;
        for &m in &order[..husband_rank] {
            if m >= block.l {
                seen_far = true;
            } else if seen_far {
                x += 1;
            }
        }
        Ok((x, block.len() - 1))
    }

    pub fn report(&self) -> BlockReport {
        BlockReport {
            separators: self.separators(),
            relabel: self.wife.clone(),
            r#virtual: (0..self.len()).filter(|&i| self.is_virtual(i)).collect(),
        }
    }
}

/// Serialized block structure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockReport {
    pub separators: Vec<usize>,
    pub relabel: Vec<usize>,
    #[serde(rename = "virtual")]
    pub r#virtual: Vec<usize>,
}

pub fn compute_block(inst: &Instance, n: usize) -> Result<Block> {
    BlockStructure::new(inst).compute_block(n)
}

pub fn block_decomposition(inst: &Instance) -> Vec<Block> {
    BlockStructure::new(inst).block_decomposition()
}

pub fn rank_gap_components(inst: &Instance, n: usize) -> Result<(usize, usize)> {
    BlockStructure::new(inst).rank_gap_components(n)
}
