//! Plackett-Luce ("popularity") preferences and the score-based Gaussian model.
//!
//! Weights are kept as natural logs throughout. A list is sampled with the
//! exponential race: each candidate gets `ln w + Gumbel(0, 1)` and the list is
//! the candidates sorted by decreasing key, which has the same law as drawing
//! without replacement proportionally to the weights.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gumbel, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::PreferenceList;

/// Log-popularities over one person's acceptable set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogWeights {
    /// `(candidate, ln weight)` in insertion order.
    entries: Vec<(usize, f64)>,
}

impl LogWeights {
    pub fn from_log(entries: Vec<(usize, f64)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for &(c, lw) in &entries {
            if !lw.is_finite() {
                return Err(Error::param("weights", format!("log-weight of candidate {c} is not finite")));
            }
            if !seen.insert(c) {
                return Err(Error::param("weights", format!("candidate {c} listed twice")));
            }
        }
        Ok(LogWeights { entries })
    }

    /// From linear weights, which must be positive and finite.
    pub fn from_linear(entries: &[(usize, f64)]) -> Result<Self> {
        let mut logs = Vec::with_capacity(entries.len());
        for &(c, w) in entries {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::param("weights", format!("weight {w} of candidate {c} is not positive")));
            }
            logs.push((c, w.ln()));
        }
        LogWeights::from_log(logs)
    }

    /// Candidate `i` of `0..count` gets weight `λ^(i + offset)`.
    pub fn geometric(count: usize, lambda: f64, offset: u32) -> Result<Self> {
        check_unit_interval("lambda", lambda)?;
        let ln = lambda.ln();
        Ok(LogWeights {
            entries: (0..count).map(|i| (i, (i as f64 + offset as f64) * ln)).collect(),
        })
    }

    pub fn uniform(count: usize) -> Self {
        LogWeights {
            entries: (0..count).map(|i| (i, 0.0)).collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn candidates(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn log_weight(&self, candidate: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == candidate).map(|e| e.1)
    }

    /// Dense lookup table of length `count`; `None` for unacceptable.
    pub fn dense(&self, count: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; count];
        for &(c, lw) in &self.entries {
            if c < count {
                out[c] = Some(lw);
            }
        }
        out
    }

    /// ln(max weight / min weight) over the acceptable set.
    pub fn log_spread(&self) -> f64 {
        let (lo, hi) = self
            .entries
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e.1), hi.max(e.1)));
        if self.entries.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }
}

pub(crate) fn check_unit_interval(name: &str, lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("{lambda} is outside (0, 1)")))
    }
}

/// Draws a Plackett-Luce order from log-weights.
pub fn sample_popularity_list<R: Rng + ?Sized>(weights: &LogWeights, rng: &mut R) -> PreferenceList {
    let gumbel = Gumbel::new(0.0, 1.0).expect("standard Gumbel");
    let mut keyed: Vec<(usize, f64)> = weights
        .entries
        .iter()
        .map(|&(c, lw)| (c, lw + gumbel.sample(rng)))
        .collect();
    keyed.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    PreferenceList::new(keyed.into_iter().map(|(c, _)| c).collect())
}

/// Uniform random order of `candidates`.
pub fn sample_uniform_list<R: Rng + ?Sized>(candidates: &[usize], rng: &mut R) -> PreferenceList {
    let mut order = candidates.to_vec();
    order.shuffle(rng);
    PreferenceList::new(order)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    pub sigma: f64,
}

impl GaussianModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(GaussianModel { sigma })
        } else {
            Err(Error::param("sigma", format!("{sigma} must be positive")))
        }
    }

    /// Sorts `0..count` by increasing `i + η_i`, η i.i.d. Normal(0, σ²).
    /// Equal scores fall back to the lower index.
    pub fn sample_list<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> PreferenceList {
        let noise = Normal::new(0.0, self.sigma).expect("sigma checked on construction");
        let mut scored: Vec<(usize, f64)> = (0..count).map(|i| (i, i as f64 + noise.sample(rng))).collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        PreferenceList::new(scored.into_iter().map(|(i, _)| i).collect())
    }

    /// Analytic `u_k = 2 e^{-(k / 2σ)^2}`.
    pub fn uk(&self, k: usize) -> f64 {
        let z = k as f64 / (2.0 * self.sigma);
        2.0 * (-z * z).exp()
    }
}

/// Popularity weights for the women and, optionally, the men.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopularityModel {
    pub women: Vec<LogWeights>,
    pub men: Option<Vec<LogWeights>>,
}

impl PopularityModel {
    /// `max_{w,i} D_w(m_{i+k}) / D_w(m_i)` over pairs both acceptable to `w`.
    ///
    /// For Plackett-Luce the two-item marginal odds equal the weight ratio.
    pub fn uk(&self, k: usize) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for weights in &self.women {
            let top = weights.candidates().max().map_or(0, |c| c + 1);
            let dense = weights.dense(top);
            for i in 0..top.saturating_sub(k) {
                if let (Some(a), Some(b)) = (dense[i], dense[i + k]) {
                    best = best.max(b - a);
                }
            }
        }
        if best == f64::NEG_INFINITY {
            0.0
        } else {
            best.exp()
        }
    }

    /// `(ln R_M, ln Q_W)`; requires men's weights and complete acceptability.
    pub fn log_rm_qw(&self) -> Result<RmQw> {
        let men = self.men.as_ref().ok_or_else(|| Error::Unsupported {
            model: "popularity".into(),
            what: "R_M without men's weights".into(),
        })?;
        let num_women = self.women.len();
        let num_men = men.len();
        for (m, wts) in men.iter().enumerate() {
            if wts.len() != num_women {
                return Err(Error::param("men weights", format!("man {m} does not rank every woman")));
            }
        }
        let log_rm = men.iter().map(LogWeights::log_spread).fold(0.0, f64::max);

        let dense: Vec<Vec<f64>> = self
            .women
            .iter()
            .enumerate()
            .map(|(w, wts)| {
                let d = wts.dense(num_men);
                d.into_iter()
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| Error::param("women weights", format!("woman {w} does not rank every man")))
            })
            .collect::<Result<_>>()?;
        // Q_W: for a fixed pair (m0, m1) the product splits into d_{w0} - d_{w1}
        // with d_w = ln D_w(m0) - ln D_w(m1), so the max is max d - min d.
        let mut log_qw: f64 = 0.0;
        for m0 in 0..num_men {
            for m1 in 0..num_men {
                if m0 == m1 {
                    continue;
                }
                let (lo, hi) = dense
                    .iter()
                    .map(|row| row[m0] - row[m1])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
                if lo.is_finite() {
                    log_qw = log_qw.max(hi - lo);
                }
            }
        }
        Ok(RmQw { log_rm, log_qw })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmQw {
    pub log_rm: f64,
    pub log_qw: f64,
}

impl RmQw {
    pub fn rm(&self) -> f64 {
        self.log_rm.exp()
    }

    pub fn qw(&self) -> f64 {
        self.log_qw.exp()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn within_3se(hits: usize, draws: usize, p: f64) -> bool {
        let freq = hits as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        (freq - p).abs() <= 3.0 * se
    }

    #[test]
    fn single_candidate() {
        let w = LogWeights::from_linear(&[(4, 0.3)]).unwrap();
        let mut r = rng(1);
        for _ in 0..10 {
            assert_eq!(sample_popularity_list(&w, &mut r).as_slice(), &[4]);
        }
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(LogWeights::from_linear(&[(0, 0.0)]).is_err());
        assert!(LogWeights::from_linear(&[(0, -1.0)]).is_err());
        assert!(LogWeights::from_linear(&[(0, f64::NAN)]).is_err());
        assert!(LogWeights::from_linear(&[(0, 1.0), (0, 2.0)]).is_err());
        assert!(LogWeights::geometric(3, 1.0, 0).is_err());
        assert!(LogWeights::geometric(3, 0.0, 0).is_err());
    }

    #[test]
    fn two_candidate_marginal() {
        let w = LogWeights::from_linear(&[(0, 2.0), (1, 1.0)]).unwrap();
        let mut r = rng(7);
        let draws = 100_000;
        let hits = (0..draws)
            .filter(|_| sample_popularity_list(&w, &mut r).as_slice()[0] == 0)
            .count();
        assert!(within_3se(hits, draws, 2.0 / 3.0), "{hits}");
    }

    #[test]
    fn full_order_probability_matches_sequential_product() {
        let p = [0.5, 0.3, 0.2];
        let w = LogWeights::from_linear(&[(0, p[0]), (1, p[1]), (2, p[2])]).unwrap();
        let draws = 100_000;
        let mut r = rng(11);
        let mut counts = std::collections::HashMap::new();
        for _ in 0..draws {
            *counts.entry(sample_popularity_list(&w, &mut r).into_inner()).or_insert(0usize) += 1;
        }
        // Sequential-draw oracle: Π p_{a_i} / Σ_{j≥i} p_{a_j}.
        for order in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let mut prob = 1.0;
            for i in 0..3 {
                let rest: f64 = order[i..].iter().map(|&c| p[c]).sum();
                prob *= p[order[i]] / rest;
            }
            let hits = counts.get(&order[..]).copied().unwrap_or(0);
            assert!(within_3se(hits, draws, prob), "{order:?}: {hits} vs {prob}");
        }
    }

    #[test]
    fn geometric_log_weights_do_not_underflow() {
        let w = LogWeights::geometric(200, 0.99, 0).unwrap();
        assert_eq!(w.log_weight(199).unwrap(), 199.0 * 0.99f64.ln());
        let tiny = LogWeights::geometric(5000, 0.5, 0).unwrap();
        assert!(tiny.log_weight(4999).unwrap().is_finite());
        let mut r = rng(3);
        let list = sample_popularity_list(&tiny, &mut r);
        assert_eq!(list.len(), 5000);
    }

    #[test]
    fn geometric_uk() {
        let model = PopularityModel {
            women: vec![LogWeights::geometric(30, 0.5, 0).unwrap(); 4],
            men: None,
        };
        for k in 1..6 {
            assert!((model.uk(k) - 0.5f64.powi(k as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn uk_skips_unacceptable_pairs() {
        // Woman 0 accepts men 0 and 2 only, so no k = 1 pair exists for her.
        let w0 = LogWeights::from_linear(&[(0, 1.0), (2, 4.0)]).unwrap();
        let model = PopularityModel { women: vec![w0], men: None };
        assert_eq!(model.uk(1), 0.0);
        assert!((model.uk(2) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn popularity_uk_matches_monte_carlo_odds() {
        // Heterogeneous weights over 4 men; the analytic u_k is the max over
        // women and i of the pairwise odds, which we estimate empirically.
        let women = vec![
            LogWeights::from_linear(&[(0, 1.0), (1, 0.5), (2, 0.4), (3, 0.1)]).unwrap(),
            LogWeights::from_linear(&[(0, 0.9), (1, 0.6), (2, 0.2), (3, 0.15)]).unwrap(),
        ];
        let model = PopularityModel { women: women.clone(), men: None };
        let draws = 100_000;
        let mut r = rng(5);
        // counts[w][i][j] = times i ranked before j
        let mut before = vec![[[0usize; 4]; 4]; 2];
        for (w, weights) in women.iter().enumerate() {
            for _ in 0..draws {
                let list = sample_popularity_list(weights, &mut r);
                for i in 0..4 {
                    for j in 0..4 {
                        if list.rank_of(i) < list.rank_of(j) {
                            before[w][i][j] += 1;
                        }
                    }
                }
            }
        }
        for k in 1..4 {
            // The maximizing (w, i) for the weight formula, checked through
            // the empirical P[m_{i+k} ≻ m_i] at 3 SE.
            let mut best = (0.0, 0, 0);
            for (w, weights) in women.iter().enumerate() {
                for i in 0..4 - k {
                    let odds = (weights.log_weight(i + k).unwrap() - weights.log_weight(i).unwrap()).exp();
                    if odds > best.0 {
                        best = (odds, w, i);
                    }
                }
            }
            assert!((model.uk(k) - best.0).abs() < 1e-12);
            let (odds, w, i) = best;
            let p = odds / (1.0 + odds);
            assert!(within_3se(before[w][i + k][i], draws, p), "k={k}");
        }
    }

    #[test]
    fn gaussian_tiny_sigma_is_identity() {
        let g = GaussianModel::new(1e-9).unwrap();
        let mut r = rng(2);
        assert_eq!(g.sample_list(6, &mut r).into_inner(), vec![0, 1, 2, 3, 4, 5]);
        assert!(GaussianModel::new(0.0).is_err());
    }

    #[test]
    fn gaussian_pairwise_swap_probability() {
        // m_{i+1} ahead of m_i iff η_i - η_{i+1} > 1, a Normal(0, 2σ²) tail.
        let g = GaussianModel::new(1.0).unwrap();
        let mut r = rng(9);
        let draws = 100_000;
        let hits = (0..draws)
            .filter(|_| {
                let l = g.sample_list(2, &mut r);
                l.as_slice()[0] == 1
            })
            .count();
        // Φ(-1/√2), computed from erfc: Φ(-x) = erfc(x/√2)/2 with x = 1/√2.
        let p = 0.5 * erfc(0.5);
        assert!(within_3se(hits, draws, p), "{hits} {p}");
        // odds ≤ 2 e^{-(k/2σ)²}
        assert!(p / (1.0 - p) <= g.uk(1));
    }

    // Numerical Recipes erfc (Chebyshev), |error| < 1.2e-7.
    fn erfc(x: f64) -> f64 {
        let z = x.abs();
        let t = 1.0 / (1.0 + 0.5 * z);
        let r = t * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
        if x >= 0.0 {
            r
        } else {
            2.0 - r
        }
    }

    #[test]
    fn gaussian_uk_value() {
        let g = GaussianModel::new(1.0).unwrap();
        assert!((g.uk(2) - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((g.uk(2) - 0.7358).abs() < 1e-4);
    }

    fn brute_rm_qw(model: &PopularityModel) -> (f64, f64) {
        let men = model.men.as_ref().unwrap();
        let (mm, ww) = (men.len(), model.women.len());
        let mut rm: f64 = 1.0;
        for wts in men {
            for w0 in 0..ww {
                for w1 in 0..ww {
                    let r = (wts.log_weight(w0).unwrap() - wts.log_weight(w1).unwrap()).exp();
                    rm = rm.max(r);
                }
            }
        }
        let mut qw: f64 = 1.0;
        for a in &model.women {
            for b in &model.women {
                for m0 in 0..mm {
                    for m1 in 0..mm {
                        let d = |x: &LogWeights, m: usize| x.log_weight(m).unwrap().exp();
                        qw = qw.max(d(a, m0) / d(a, m1) * d(b, m1) / d(b, m0));
                    }
                }
            }
        }
        (rm, qw)
    }

    #[test]
    fn rm_qw_cases() {
        let equal = PopularityModel {
            women: vec![LogWeights::uniform(3); 3],
            men: Some(vec![LogWeights::uniform(3); 3]),
        };
        let v = equal.log_rm_qw().unwrap();
        assert_eq!((v.rm(), v.qw()), (1.0, 1.0));

        let geometric = PopularityModel {
            women: vec![LogWeights::geometric(4, 0.5, 0).unwrap(); 4],
            men: Some(vec![LogWeights::uniform(4); 4]),
        };
        let v = geometric.log_rm_qw().unwrap();
        let (rm, qw) = brute_rm_qw(&geometric);
        assert_eq!((rm, qw), (1.0, 1.0));
        assert!((v.rm() - 1.0).abs() < 1e-12 && (v.qw() - 1.0).abs() < 1e-12);

        let mixed = PopularityModel {
            women: vec![
                LogWeights::from_linear(&[(0, 1.0), (1, 2.0), (2, 0.5)]).unwrap(),
                LogWeights::from_linear(&[(0, 3.0), (1, 1.0), (2, 1.5)]).unwrap(),
            ],
            men: Some(vec![
                LogWeights::from_linear(&[(0, 1.0), (1, 4.0)]).unwrap(),
                LogWeights::from_linear(&[(0, 2.0), (1, 1.0)]).unwrap(),
                LogWeights::from_linear(&[(0, 1.0), (1, 1.0)]).unwrap(),
            ]),
        };
        let v = mixed.log_rm_qw().unwrap();
        let (rm, qw) = brute_rm_qw(&mixed);
        assert!((v.rm() - rm).abs() < 1e-9 * rm, "{} {rm}", v.rm());
        assert!((v.qw() - qw).abs() < 1e-9 * qw, "{} {qw}", v.qw());

        let no_men = PopularityModel { women: mixed.women.clone(), men: None };
        assert!(no_men.log_rm_qw().is_err());
    }
}
