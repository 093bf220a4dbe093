//! Closed-form bounds and exact expectations, plus the jump process `X`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::prefgen::popularity::LogWeights;

/// Σ_{k≥s} k ρ^k for s ≥ 1.
fn geom_k_from(rho: f64, s: u64) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    let s = s as f64;
    rho.powf(s) * (s - (s - 1.0) * rho) / (1.0 - rho).powi(2)
}

/// Σ_{k≥s} k² ρ^k for s ≥ 1.
fn geom_k2_from(rho: f64, s: u64) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    let s = s as f64;
    let poly = s * s - (2.0 * s * s - 2.0 * s - 1.0) * rho + (s - 1.0).powi(2) * rho * rho;
    rho.powf(s) * poly / (1.0 - rho).powi(3)
}

/// The sequence `u_1, u_2, …`.
#[derive(Clone, Debug, PartialEq)]
pub enum UkSequence {
    /// `u_k = values[k-1]`, zero past the end.
    Finite(Vec<f64>),
    /// `u_k = scale · ratio^k`.
    Geometric { scale: f64, ratio: f64 },
    /// Explicit head, then `scale · ratio^k` for `k > head.len()`.
    FiniteWithTail { head: Vec<f64>, scale: f64, ratio: f64 },
}

impl UkSequence {
    pub fn zeros() -> Self {
        UkSequence::Finite(Vec::new())
    }

    /// `u_k = λ^k`.
    pub fn geometric(lambda: f64) -> Result<Self> {
        UkSequence::Geometric { scale: 1.0, ratio: lambda }.checked()
    }

    /// `u_k = 2 e^{-(k/2σ)²}`, exact up to `kmax` and dominated beyond by
    /// `2 e^{-k (kmax+1)/(4σ²)}`.
    pub fn gaussian(sigma: f64, kmax: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", "must be positive"));
        }
        let head = (1..=kmax).map(|k| 2.0 * (-(k as f64 / (2.0 * sigma)).powi(2)).exp()).collect();
        UkSequence::FiniteWithTail {
            head,
            scale: 2.0,
            ratio: (-((kmax + 1) as f64) / (4.0 * sigma * sigma)).exp(),
        }
        .checked()
    }

    /// Validates nonnegativity and convergence.
    pub fn checked(self) -> Result<Self> {
        let head_ok = |h: &[f64]| h.iter().all(|u| u.is_finite() && *u >= 0.0);
        let tail_ok = |a: f64, r: f64| a.is_finite() && a >= 0.0 && (0.0..1.0).contains(&r);
        let ok = match &self {
            UkSequence::Finite(h) => head_ok(h),
            UkSequence::Geometric { scale, ratio } => tail_ok(*scale, *ratio),
            UkSequence::FiniteWithTail { head, scale, ratio } => head_ok(head) && tail_ok(*scale, *ratio),
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::param("u", "terms must be finite and nonnegative with tail ratio in [0, 1)"))
        }
    }

    fn parts(&self) -> (&[f64], f64, f64) {
        match self {
            UkSequence::Finite(h) => (h, 0.0, 0.0),
            UkSequence::Geometric { scale, ratio } => (&[], *scale, *ratio),
            UkSequence::FiniteWithTail { head, scale, ratio } => (head, *scale, *ratio),
        }
    }

    pub fn get(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let (head, a, rho) = self.parts();
        match head.get(k - 1) {
            Some(&u) => u,
            None if a == 0.0 => 0.0,
            None => a * rho.powi(k as i32),
        }
    }

    /// Σ_{k≥δ} k u_k.
    pub fn tail_k(&self, delta: usize) -> f64 {
        let delta = delta.max(1);
        let (head, a, rho) = self.parts();
        let from_head: f64 = head.iter().enumerate().skip(delta - 1).map(|(i, u)| (i + 1) as f64 * u).sum();
        let start = (head.len() + 1).max(delta) as u64;
        from_head + a * geom_k_from(rho, start)
    }

    pub fn sum_k(&self) -> f64 {
        self.tail_k(1)
    }

    pub fn sum_k2(&self) -> f64 {
        let (head, a, rho) = self.parts();
        let from_head: f64 = head.iter().enumerate().map(|(i, u)| ((i + 1) as f64).powi(2) * u).sum();
        from_head + a * geom_k2_from(rho, head.len() as u64 + 1)
    }
}

/// (1 + 2e^{Σ k u_k}) · Σ k² u_k.
pub fn thm1_bound(u: &UkSequence) -> f64 {
    (1.0 + 2.0 * u.sum_k().exp()) * u.sum_k2()
}

/// e^{Σ k u_k} · Σ k² u_k.
pub fn meandomination_bound(u: &UkSequence) -> f64 {
    u.sum_k().exp() * u.sum_k2()
}

/// 4√π σ³ (1 + 2e^{4σ²}).
pub fn gaussian_rank_gap_bound(sigma: f64) -> f64 {
    4.0 * std::f64::consts::PI.sqrt() * sigma.powi(3) * (1.0 + 2.0 * (4.0 * sigma * sigma).exp())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct XProcessSample {
    pub x: u64,
    /// First step with a zero jump.
    pub t: usize,
    pub deltas: Vec<u64>,
}

/// Sampler for the jump process with `P[Δ < δ] = exp(-Σ_{k≥δ} k u_k)`.
#[derive(Clone, Debug)]
pub struct XProcess {
    /// `cdf[δ] = P[Δ ≤ δ]`, up to the first value above `1 − 1e-12`.
    cdf: Vec<f64>,
}

impl XProcess {
    const CUTOFF: f64 = 1.0 - 1e-12;
    const MAX_SUPPORT: usize = 10_000_000;

    pub fn new(u: &UkSequence) -> Result<Self> {
        let mut cdf = Vec::new();
        loop {
            let delta = cdf.len();
            let c = (-u.tail_k(delta + 1)).exp();
            cdf.push(c);
            if c > Self::CUTOFF {
                break;
            }
            if cdf.len() > Self::MAX_SUPPORT {
                return Err(Error::param("u", "jump distribution tail too heavy"));
            }
        }
        Ok(XProcess { cdf })
    }

    /// `P[Δ < δ]`.
    pub fn prob_below(&self, delta: usize) -> f64 {
        match delta {
            0 => 0.0,
            d => self.cdf.get(d - 1).copied().unwrap_or(1.0),
        }
    }

    pub fn sample_delta<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let v: f64 = rng.random();
        self.cdf.partition_point(|&c| c < v).min(self.cdf.len() - 1) as u64
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> XProcessSample {
        let mut deltas = Vec::new();
        loop {
            let d = self.sample_delta(rng);
            deltas.push(d);
            if d == 0 {
                break;
            }
        }
        XProcessSample {
            x: deltas.iter().sum(),
            t: deltas.len() - 1,
            deltas,
        }
    }
}

pub fn sample_x<R: Rng + ?Sized>(u: &UkSequence, rng: &mut R) -> Result<XProcessSample> {
    Ok(XProcess::new(u)?.sample(rng))
}

/// 1 + ln d_w + E[ln ratio].
pub fn thm3_rhs(d_w: usize, ln_ratio_mean: f64) -> Result<f64> {
    if d_w < 1 {
        return Err(Error::param("d_w", "must be at least 1"));
    }
    Ok(1.0 + (d_w as f64).ln() + ln_ratio_mean)
}

/// N(1 + ln N).
pub fn cor1_bound(n: usize) -> f64 {
    let n = n as f64;
    n * (1.0 + n.ln())
}

/// Σ_{i=1}^{N} (1−λ)/(1−λ^{N−i+1}).
pub fn folklore_exact_expectation(n: usize, lambda: f64) -> Result<f64> {
    crate::prefgen::popularity::check_unit_interval("lambda", lambda)?;
    if n < 1 {
        return Err(Error::param("N", "must be at least 1"));
    }
    let ln = lambda.ln();
    Ok((1..=n).map(|k| ln.exp_m1() / (k as f64 * ln).exp_m1()).sum())
}

/// Natural log of (N⁵ Q_W)^{1 + 4 ln N (1 + log₂ N) / ln(1 + 1/R_M)}, from
/// `ln R_M` and `ln Q_W`.
pub fn thm5_log_bound_ln(n: usize, ln_rm: f64, ln_qw: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::param("N", "must be at least 2"));
    }
    if !(ln_rm >= 0.0) {
        return Err(Error::param("R_M", "must be at least 1"));
    }
    if !(ln_qw >= 0.0) {
        return Err(Error::param("Q_W", "must be at least 1"));
    }
    let ln_n = (n as f64).ln();
    let denom = (-ln_rm).exp().ln_1p();
    Ok((5.0 * ln_n + ln_qw) * (1.0 + 4.0 * ln_n * (1.0 + (n as f64).log2()) / denom))
}

pub fn thm5_log_bound(n: usize, rm: f64, qw: f64) -> Result<f64> {
    if !(rm >= 1.0) || !(qw >= 1.0) {
        return Err(Error::param("R_M/Q_W", "must be at least 1"));
    }
    thm5_log_bound_ln(n, rm.ln(), qw.ln())
}

/// c · (ln Q_W / ln(1 + 1/R_M)) · ln³ N.
pub fn cor2_bound_ln(n: usize, ln_rm: f64, ln_qw: f64, c: f64) -> Result<f64> {
    if n < 1 || !(ln_rm >= 0.0) || !(ln_qw >= 0.0) {
        return Err(Error::param("N/R_M/Q_W", "need N ≥ 1, R_M ≥ 1, Q_W ≥ 1"));
    }
    Ok(c * ln_qw / (-ln_rm).exp().ln_1p() * (n as f64).ln().powi(3))
}

/// N + Σ ln d_w + Σ ln r_m, with `ln_r` holding ln r_m.
pub fn thm6_bound(n: usize, d_women: &[usize], ln_r: &[f64]) -> Result<f64> {
    if d_women.contains(&0) || ln_r.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::param("d_w/r_m", "need d_w ≥ 1 and r_m ≥ 1"));
    }
    Ok(n as f64 + d_women.iter().map(|&d| (d as f64).ln()).sum::<f64>() + ln_r.iter().sum::<f64>())
}

/// N(1 + ln r) + Σ ln d_w / 2 + Σ ln d_m / 2.
pub fn thm7_bound(n: usize, ln_r: f64, d_women: &[usize], d_men: &[usize]) -> Result<f64> {
    if d_women.contains(&0) || d_men.contains(&0) || !(ln_r >= 0.0) {
        return Err(Error::param("d/r", "need every d ≥ 1 and r ≥ 1"));
    }
    let half = |d: &[usize]| d.iter().map(|&d| (d as f64).ln()).sum::<f64>() / 2.0;
    Ok(n as f64 * (1.0 + ln_r) + half(d_women) + half(d_men))
}

/// ln r_m for each man: spread of the log-weights women give him.
pub fn intrinsic_ln_r(women: &[LogWeights], num_men: usize) -> Vec<f64> {
    let mut lo = vec![f64::INFINITY; num_men];
    let mut hi = vec![f64::NEG_INFINITY; num_men];
    for w in women {
        for &(m, lw) in w.entries() {
            lo[m] = lo[m].min(lw);
            hi[m] = hi[m].max(lw);
        }
    }
    lo.iter().zip(&hi).map(|(l, h)| if h >= l { h - l } else { 0.0 }).collect()
}

/// ln|L_w| + max_{m∈L_w} ln D_w(m) − ln D_w(μ_M(w)).
pub fn lemma_prel_bound(received_log: &[f64], initial_log: f64) -> Result<f64> {
    if received_log.is_empty() {
        return Err(Error::param("L_w", "must be nonempty"));
    }
    let max = received_log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((received_log.len() as f64).ln() + max - initial_log)
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Σ_{i=1}^K p_i / (p_⊥ + p_1 + … + p_i), where `initial_log` holds the
/// log-weights summing to p_⊥ and `continued_log` holds ln p_1 … ln p_K.
pub fn phase2_expected_acceptances(initial_log: &[f64], continued_log: &[f64]) -> Result<f64> {
    if initial_log.is_empty() {
        return Err(Error::param("p_bot", "needs at least one initial proposal"));
    }
    let mut acc = initial_log.iter().copied().fold(f64::NEG_INFINITY, log_add);
    let mut total = 0.0;
    for &lp in continued_log {
        acc = log_add(acc, lp);
        total += (lp - acc).exp();
    }
    Ok(total)
}

/// p_new / (p_new + p_prior), from logs.
pub fn acceptance_probability_ln(ln_new: f64, ln_prior: f64) -> f64 {
    1.0 / (1.0 + (ln_prior - ln_new).exp())
}

pub fn acceptance_probability(p_new: f64, p_prior: f64) -> Result<f64> {
    if !(p_new > 0.0) || !(p_prior > 0.0) || !p_new.is_finite() || !p_prior.is_finite() {
        return Err(Error::param("p", "weights must be positive and finite"));
    }
    Ok(acceptance_probability_ln(p_new.ln(), p_prior.ln()))
}
