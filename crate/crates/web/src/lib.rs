//! Browser demo: three JSON-in, JSON-out operations over `matching-core`,
//! exported from the wasm module through a small byte-buffer ABI.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use matching_core::algorithms::{mpda, wpda, BlockStructure, StableHusbands};
use matching_core::bounds::folklore_exact_expectation;
use matching_core::prefgen::{ModelSpec, StreamKey, WeightSpec};
use matching_core::{Error, Result};

const MAX_N: usize = 400;
const MAX_TRIALS: usize = 5000;

fn check_size(n: usize, lo: usize) -> Result<()> {
    if !(lo..=MAX_N).contains(&n) {
        return Err(Error::InvalidParameter {
            name: "n".into(),
            reason: format!("must be between {lo} and {MAX_N}"),
        });
    }
    Ok(())
}

fn check_trials(trials: usize) -> Result<()> {
    if !(1..=MAX_TRIALS).contains(&trials) {
        return Err(Error::InvalidParameter {
            name: "trials".into(),
            reason: format!("must be between 1 and {MAX_TRIALS}"),
        });
    }
    Ok(())
}

#[derive(Clone, Debug, Deserialize)]
pub struct MarketRequest {
    pub n: usize,
    /// "geometric", "uniform" or "master".
    pub women: String,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub seed: u64,
}

fn default_lambda() -> f64 {
    0.5
}

#[derive(Clone, Debug, Serialize)]
pub struct MarketView {
    pub men: Vec<Vec<usize>>,
    pub women: Vec<Vec<usize>>,
    /// Wife of each man in the men-optimal matching.
    pub men_optimal: Vec<Option<usize>>,
    pub women_optimal: Vec<Option<usize>>,
    /// Stable husbands of each woman, worst first.
    pub husbands: Vec<Vec<usize>>,
    /// `[l, r)` over men in men-optimal order; `relabel[i]` is the wife of man `i`.
    pub blocks: Vec<[usize; 2]>,
    pub relabel: Vec<usize>,
    pub stable_pairs: usize,
    pub multi_fraction: f64,
}

pub fn solve_market(req: &MarketRequest) -> Result<MarketView> {
    check_size(req.n, 1)?;
    let spec = match req.women.as_str() {
        "geometric" => ModelSpec::Popularity { women: WeightSpec::Geometric { lambda: req.lambda }, men: None },
        "uniform" => ModelSpec::uniform(),
        "master" => ModelSpec::Master,
        other => {
            return Err(Error::InvalidParameter { name: "women".into(), reason: format!("unknown model `{other}`") })
        }
    };
    let inst = spec.build(req.n, req.n, Some(StreamKey::master(req.seed).trial(0)))?.instance;
    let mu_m = mpda(&inst).0;
    let mu_w = wpda(&inst);
    let husbands: Vec<Vec<usize>> = StableHusbands::new(&inst).all().into_iter().map(|e| e.husbands).collect();
    let bs = BlockStructure::new(&inst);
    let blocks = bs.block_decomposition().iter().map(|b| [b.l, b.r]).collect();
    let relabel = bs.relabel().to_vec();
    let (multi_women, multi_men) = multi_counts(req.n, &husbands);
    Ok(MarketView {
        men_optimal: mu_m.wives().to_vec(),
        women_optimal: mu_w.wives().to_vec(),
        stable_pairs: husbands.iter().map(Vec::len).sum(),
        multi_fraction: (multi_women + multi_men) as f64 / (2 * req.n) as f64,
        husbands,
        blocks,
        relabel,
        men: inst.men().iter().map(|l| l.as_slice().to_vec()).collect(),
        women: inst.women().iter().map(|l| l.as_slice().to_vec()).collect(),
    })
}

fn multi_counts(num_men: usize, husbands: &[Vec<usize>]) -> (usize, usize) {
    let mut wives = vec![0usize; num_men];
    for h in husbands {
        for &m in h {
            wives[m] += 1;
        }
    }
    (husbands.iter().filter(|h| h.len() >= 2).count(), wives.iter().filter(|&&c| c >= 2).count())
}

#[derive(Clone, Debug, Deserialize)]
pub struct CurveRequest {
    pub n: usize,
    pub lambdas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub mean: f64,
    pub se: f64,
}

/// Mean fraction of persons with several stable partners, per `λ`, with
/// geometric women and uniform men.
pub fn multiplicity_curve(req: &CurveRequest) -> Result<Vec<CurvePoint>> {
    check_size(req.n, 2)?;
    check_trials(req.trials)?;
    if req.lambdas.is_empty() || req.lambdas.len() > 50 {
        return Err(Error::InvalidParameter { name: "lambdas".into(), reason: "give 1 to 50 values".into() });
    }
    req.lambdas
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let spec = ModelSpec::Popularity { women: WeightSpec::Geometric { lambda }, men: None };
            let mut xs = Vec::with_capacity(req.trials);
            for t in 0..req.trials as u64 {
                let stream = StreamKey::master(req.seed).child(i as u64).trial(t);
                let inst = spec.build(req.n, req.n, Some(stream))?.instance;
                let hs: Vec<Vec<usize>> = StableHusbands::new(&inst).all().into_iter().map(|e| e.husbands).collect();
                let (a, b) = multi_counts(req.n, &hs);
                xs.push((a + b) as f64 / (2 * req.n) as f64);
            }
            let (mean, se) = mean_se(&xs);
            Ok(CurvePoint { lambda, mean, se })
        })
        .collect()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug, Deserialize)]
pub struct FolkloreRequest {
    pub n: usize,
    pub lambda: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FolkloreView {
    /// `counts[k]`: trials in which woman 0 had `k` stable husbands.
    pub counts: Vec<usize>,
    pub mean: f64,
    pub se: f64,
    pub exact: f64,
    pub floor: f64,
}

pub fn folklore_distribution(req: &FolkloreRequest) -> Result<FolkloreView> {
    check_size(req.n, 2)?;
    check_trials(req.trials)?;
    let exact = folklore_exact_expectation(req.n, req.lambda)?;
    let spec = ModelSpec::Folklore { lambda: req.lambda, deterministic: false };
    let mut counts = vec![0usize; req.n + 1];
    let mut xs = Vec::with_capacity(req.trials);
    for t in 0..req.trials as u64 {
        let inst = spec.build(req.n, req.n, Some(StreamKey::master(req.seed).trial(t)))?.instance;
        let k = StableHusbands::new(&inst).for_woman(0).count();
        counts[k] += 1;
        xs.push(k as f64);
    }
    while counts.len() > 1 && counts.last() == Some(&0) {
        counts.pop();
    }
    let (mean, se) = mean_se(&xs);
    Ok(FolkloreView { counts, mean, se, exact, floor: (1.0 - req.lambda) * req.n as f64 })
}

/// Dispatches one named operation; errors come back as `{"error": ...}`.
pub fn call(op: &str, input: &str) -> String {
    fn run<Q: for<'de> Deserialize<'de>, A: Serialize>(input: &str, f: impl Fn(&Q) -> Result<A>) -> Result<Value> {
        let req: Q = serde_json::from_str(input)?;
        Ok(serde_json::to_value(f(&req)?)?)
    }
    let out = match op {
        "solve_market" => run(input, solve_market),
        "multiplicity_curve" => run(input, multiplicity_curve),
        "folklore_distribution" => run(input, folklore_distribution),
        other => Err(Error::InvalidParameter { name: "op".into(), reason: format!("unknown operation `{other}`") }),
    };
    match out {
        Ok(v) => serde_json::json!({ "ok": v }).to_string(),
        Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
    }
}

/// Byte-buffer ABI: the host allocates with `alloc`, writes the operation
/// name and JSON input, calls `run`, and reads a u32 little-endian length
/// followed by that many bytes of JSON at the returned pointer.
#[cfg(target_arch = "wasm32")]
mod ffi {
    use std::alloc::{alloc as raw_alloc, dealloc as raw_dealloc, Layout};

    fn layout(len: usize) -> Layout {
        Layout::from_size_align(len.max(1), 4).expect("layout")
    }

    #[no_mangle]
    pub extern "C" fn alloc(len: usize) -> *mut u8 {
        unsafe { raw_alloc(layout(len)) }
    }

    /// # Safety
    /// `ptr` must come from `alloc(len)`.
    #[no_mangle]
    pub unsafe extern "C" fn dealloc(ptr: *mut u8, len: usize) {
        raw_dealloc(ptr, layout(len))
    }

    /// # Safety
    /// Both ranges must be valid UTF-8 written by the host into `alloc`ed memory.
    #[no_mangle]
    pub unsafe extern "C" fn run(op: *const u8, op_len: usize, input: *const u8, input_len: usize) -> *mut u8 {
        let op = std::str::from_utf8(std::slice::from_raw_parts(op, op_len)).unwrap_or("");
        let input = std::str::from_utf8(std::slice::from_raw_parts(input, input_len)).unwrap_or("");
        let out = super::call(op, input).into_bytes();
        let ptr = alloc(out.len() + 4);
        std::ptr::copy_nonoverlapping((out.len() as u32).to_le_bytes().as_ptr(), ptr, 4);
        std::ptr::copy_nonoverlapping(out.as_ptr(), ptr.add(4), out.len());
        ptr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn market_view_is_consistent() {
        let v = solve_market(&MarketRequest { n: 12, women: "geometric".into(), lambda: 0.6, seed: 3 }).unwrap();
        assert_eq!(v.husbands.len(), 12);
        for (w, h) in v.husbands.iter().enumerate() {
            let worst = v.men_optimal.iter().position(|&x| x == Some(w));
            assert_eq!(h.first().copied(), worst);
        }
        assert_eq!(v.blocks.first().unwrap()[0], 0);
        assert_eq!(v.blocks.last().unwrap()[1], 12);
        assert_eq!(v.stable_pairs, v.husbands.iter().map(Vec::len).sum::<usize>());
    }

    #[test]
    fn master_market_has_unique_partners() {
        let v = solve_market(&MarketRequest { n: 8, women: "master".into(), lambda: 0.5, seed: 1 }).unwrap();
        assert_eq!(v.multi_fraction, 0.0);
        assert_eq!(v.men_optimal, v.women_optimal);
        assert_eq!(v.blocks.len(), 8);
    }

    #[test]
    fn curve_and_folklore() {
        let c = multiplicity_curve(&CurveRequest { n: 10, lambdas: vec![0.3, 0.9], trials: 20, seed: 2 }).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|p| (0.0..=1.0).contains(&p.mean)));
        let f = folklore_distribution(&FolkloreRequest { n: 20, lambda: 0.9, trials: 200, seed: 4 }).unwrap();
        assert_eq!(f.counts.iter().sum::<usize>(), 200);
        assert!((f.mean - f.exact).abs() <= 4.0 * f.se);
    }

    #[test]
    fn dispatcher_reports_errors() {
        assert!(call("nope", "{}").contains("\"error\""));
        assert!(call("solve_market", "{").contains("\"error\""));
        assert!(call("solve_market", r#"{"n":0,"women":"uniform","seed":1}"#).contains("between"));
        let ok = call("folklore_distribution", r#"{"n":5,"lambda":0.5,"trials":3,"seed":1}"#);
        assert!(ok.starts_with(r#"{"ok":"#), "{ok}");
    }
}
