//! Random instance builders for every preference model in the catalog.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::popularity::{
    check_unit_interval, sample_popularity_list, sample_uniform_list, GaussianModel, LogWeights, PopularityModel,
};
use super::seed::StreamKey;
use crate::error::{Error, Result};
use crate::market::{default_format, Instance, PreferenceList, Side};

/// How one side's popularity weights are generated.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightSpec {
    Uniform,
    /// Candidate `i` has weight `λ^i`, identical across the side.
    Geometric { lambda: f64 },
    /// Per-person dense weights over the opposite side.
    Explicit { weights: Vec<Vec<f64>> },
}

/// A preference model with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Uniform {
        complete: bool,
        /// Probability that a given partner is acceptable when incomplete.
        density: f64,
    },
    /// Women share the list `m_0 ≻ m_1 ≻ …`; men are uniform when a seed is
    /// available, otherwise they share `w_0 ≻ w_1 ≻ …` too.
    Master,
    /// Women score men by `i + N(0, σ²)`; men uniform.
    Gaussian { sigma: f64 },
    Popularity { women: WeightSpec, men: Option<WeightSpec> },
    /// Both sides draw from `D_m(w) = D_w(m) = λ^m · λ^w`.
    Symmetric { lambda: f64 },
    Swap,
    Grouped,
    /// The cyclic instance with woman 0 on weights `λ^(i+1)`; `deterministic`
    /// gives her the plain list `m_0 ≻ … ≻ m_{N-1}` instead.
    Folklore { lambda: f64, deterministic: bool },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Uniform { .. } => "uniform",
            ModelSpec::Master => "master",
            ModelSpec::Gaussian { .. } => "gaussian",
            ModelSpec::Popularity { .. } => "popularity",
            ModelSpec::Symmetric { .. } => "symmetric",
            ModelSpec::Swap => "swap",
            ModelSpec::Grouped => "grouped",
            ModelSpec::Folklore { .. } => "folklore",
        }
    }

    pub fn uniform() -> Self {
        ModelSpec::Uniform { complete: true, density: 1.0 }
    }

    /// Whether building needs random draws (and therefore a seed).
    pub fn is_random(&self, have_seed: bool) -> bool {
        match self {
            ModelSpec::Master => have_seed,
            ModelSpec::Folklore { deterministic, .. } => !deterministic,
            _ => true,
        }
    }

    /// Parses `params` for the model called `name`.
    pub fn from_parts(name: &str, params: &Map<String, Value>) -> Result<Self> {
        let p = Params(params);
        let spec = match name {
            "uniform" => {
                let complete = p.bool("complete")?.unwrap_or(true);
                let density = p.f64("density")?.unwrap_or(if complete { 1.0 } else { 0.5 });
                if !(0.0..=1.0).contains(&density) {
                    return Err(Error::param("density", "must lie in [0, 1]"));
                }
                ModelSpec::Uniform { complete, density }
            }
            "master" => ModelSpec::Master,
            "gaussian" => ModelSpec::Gaussian {
                sigma: GaussianModel::new(p.f64("sigma")?.unwrap_or(1.0))?.sigma,
            },
            "popularity" => {
                let women = p
                    .weight_spec("women")?
                    .ok_or_else(|| Error::param("women", "popularity model requires women weights"))?;
                ModelSpec::Popularity { women, men: p.weight_spec("men")? }
            }
            "symmetric" => {
                let lambda = p.f64("lambda")?.ok_or_else(|| Error::param("lambda", "required"))?;
                check_unit_interval("lambda", lambda)?;
                ModelSpec::Symmetric { lambda }
            }
            "swap" => ModelSpec::Swap,
            "grouped" => ModelSpec::Grouped,
            "folklore" => {
                let deterministic = p.bool("deterministic")?.unwrap_or(false);
                let lambda = match p.f64("lambda")? {
                    Some(l) => l,
                    None if deterministic => 0.5,
                    None => return Err(Error::param("lambda", "required")),
                };
                check_unit_interval("lambda", lambda)?;
                ModelSpec::Folklore { lambda, deterministic }
            }
            other => {
                return Err(Error::param("model", format!("unknown model `{other}`")));
            }
        };
        Ok(spec)
    }

    /// Parameters as a JSON object, the inverse of [`ModelSpec::from_parts`].
    pub fn params(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let weight = |m: &mut Map<String, Value>, side: &str, w: &WeightSpec| match w {
            WeightSpec::Uniform => {
                m.insert(side.into(), "uniform".into());
            }
            WeightSpec::Geometric { lambda } => {
                m.insert(side.into(), "geometric".into());
                m.insert(format!("{side}_lambda"), (*lambda).into());
            }
            WeightSpec::Explicit { weights } => {
                m.insert(side.into(), "explicit".into());
                m.insert(format!("{side}_weights"), serde_json::to_value(weights).expect("finite weights"));
            }
        };
        match self {
            ModelSpec::Uniform { complete, density } => {
                m.insert("complete".into(), (*complete).into());
                if !complete {
                    m.insert("density".into(), (*density).into());
                }
            }
            ModelSpec::Gaussian { sigma } => {
                m.insert("sigma".into(), (*sigma).into());
            }
            ModelSpec::Popularity { women, men } => {
                weight(&mut m, "women", women);
                if let Some(men) = men {
                    weight(&mut m, "men", men);
                }
            }
            ModelSpec::Symmetric { lambda } => {
                m.insert("lambda".into(), (*lambda).into());
            }
            ModelSpec::Folklore { lambda, deterministic } => {
                m.insert("lambda".into(), (*lambda).into());
                if *deterministic {
                    m.insert("deterministic".into(), true.into());
                }
            }
            ModelSpec::Master | ModelSpec::Swap | ModelSpec::Grouped => {}
        }
        m
    }

    /// Builds one instance. `stream` is the trial's key; `None` is only
    /// accepted by deterministic models.
    pub fn build(&self, num_men: usize, num_women: usize, stream: Option<StreamKey>) -> Result<BuiltInstance> {
        if !self.is_random(stream.is_some()) {
            return self.build_inner(num_men, num_women, StreamKey::master(0), false);
        }
        let stream = stream.ok_or_else(|| Error::param("seed", format!("model `{}` needs a seed", self.name())))?;
        self.build_inner(num_men, num_women, stream, true)
    }

    fn build_inner(&self, m: usize, w: usize, stream: StreamKey, seeded: bool) -> Result<BuiltInstance> {
        if m == 0 || w == 0 {
            return Err(Error::param("M/W", "both sides need at least one person"));
        }
        let built = match self {
            ModelSpec::Uniform { complete, density } => build_uniform(m, w, *complete, *density, stream),
            ModelSpec::Master => build_master_list(m, w, seeded.then_some(stream)),
            ModelSpec::Gaussian { sigma } => build_gaussian(m, w, GaussianModel::new(*sigma)?, stream),
            ModelSpec::Popularity { women, men } => build_popularity(m, w, women, men.as_ref(), stream)?,
            ModelSpec::Symmetric { lambda } => build_symmetric(m, w, *lambda, stream)?,
            ModelSpec::Swap => build_swap_pairs(square(m, w)?, stream)?,
            ModelSpec::Grouped => build_grouped_incomplete(square(m, w)?, stream)?,
            ModelSpec::Folklore { lambda, deterministic } => {
                let n = square(m, w)?;
                if *deterministic {
                    build_folklore_deterministic(n)?
                } else {
                    build_folklore_cyclic(n, *lambda, stream)?
                }
            }
        };
        Ok(BuiltInstance {
            descriptor: ModelDescriptor {
                format: default_format(),
                model: self.name().into(),
                params: self.params(),
                num_men: m,
                num_women: w,
                seed: None,
            },
            ..built
        })
    }

    /// Analytic `u_k` where the model admits one.
    pub fn uk(&self, k: usize, num_men: usize) -> Result<f64> {
        match self {
            ModelSpec::Master => Ok(0.0),
            ModelSpec::Gaussian { sigma } => Ok(GaussianModel::new(*sigma)?.uk(k)),
            ModelSpec::Popularity { women: WeightSpec::Uniform, .. } => Ok(if k < num_men { 1.0 } else { 0.0 }),
            ModelSpec::Popularity { women: WeightSpec::Geometric { lambda }, .. } | ModelSpec::Symmetric { lambda } => {
                Ok(if k < num_men { lambda.powi(k as i32) } else { 0.0 })
            }
            ModelSpec::Popularity { women: WeightSpec::Explicit { weights }, .. } => {
                let women = explicit_weights("women", weights, num_men)?;
                Ok(PopularityModel { women, men: None }.uk(k))
            }
            other => Err(Error::Unsupported {
                model: other.name().into(),
                what: "analytic u_k".into(),
            }),
        }
    }
}

fn square(m: usize, w: usize) -> Result<usize> {
    if m != w {
        return Err(Error::param("N", format!("model needs M = W, got {m} and {w}")));
    }
    Ok(m)
}

struct Params<'a>(&'a Map<String, Value>);

impl Params<'_> {
    fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => Ok(n.as_f64()),
            Some(Value::String(s)) => s.parse().map(Some).map_err(|_| Error::param(key, format!("`{s}` is not a number"))),
            Some(v) => Err(Error::param(key, format!("expected a number, got {v}"))),
        }
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(Value::String(s)) => s.parse().map(Some).map_err(|_| Error::param(key, format!("`{s}` is not a bool"))),
            Some(v) => Err(Error::param(key, format!("expected a bool, got {v}"))),
        }
    }

    fn weight_spec(&self, side: &str) -> Result<Option<WeightSpec>> {
        let kind = match self.0.get(side) {
            None => return Ok(None),
            Some(Value::String(s)) => s.clone(),
            Some(v) => return Err(Error::param(side, format!("expected a weight kind, got {v}"))),
        };
        let spec = match kind.as_str() {
            "uniform" => WeightSpec::Uniform,
            "geometric" => {
                let key = format!("{side}_lambda");
                let lambda = self.f64(&key)?.ok_or_else(|| Error::param(&key, "required for geometric weights"))?;
                check_unit_interval(&key, lambda)?;
                WeightSpec::Geometric { lambda }
            }
            "explicit" => {
                let key = format!("{side}_weights");
                let raw = self.0.get(&key).ok_or_else(|| Error::param(&key, "required for explicit weights"))?;
                let weights: Vec<Vec<f64>> = serde_json::from_value(raw.clone())
                    .map_err(|e| Error::param(&key, e))?;
                WeightSpec::Explicit { weights }
            }
            other => return Err(Error::param(side, format!("unknown weight kind `{other}`"))),
        };
        Ok(Some(spec))
    }
}

/// Model descriptor as stored next to generated instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    #[serde(default = "default_format")]
    pub format: u64,
    pub model: String,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(rename = "M")]
    pub num_men: usize,
    #[serde(rename = "W")]
    pub num_women: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ModelDescriptor {
    pub fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::from_parts(&self.model, &self.params)
    }

    /// Builds trial `trial` of this descriptor's seed.
    pub fn build(&self, trial: u64) -> Result<BuiltInstance> {
        let spec = self.spec()?;
        let stream = self.seed.map(|s| StreamKey::master(s).trial(trial));
        let mut built = spec.build(self.num_men, self.num_women, stream)?;
        built.descriptor.seed = self.seed;
        Ok(built)
    }
}

/// A generated instance together with its provenance and any popularity
/// weights that drove it.
#[derive(Clone, Debug, PartialEq)]
pub struct BuiltInstance {
    pub instance: Instance,
    pub descriptor: ModelDescriptor,
    pub women_weights: Vec<Option<LogWeights>>,
    pub men_weights: Vec<Option<LogWeights>>,
}

impl BuiltInstance {
    fn plain(instance: Instance) -> Self {
        let (m, w) = (instance.num_men(), instance.num_women());
        BuiltInstance {
            instance,
            descriptor: ModelDescriptor {
                format: default_format(),
                model: String::new(),
                params: Map::new(),
                num_men: m,
                num_women: w,
                seed: None,
            },
            women_weights: vec![None; w],
            men_weights: vec![None; m],
        }
    }

    /// The popularity model, when every woman draws from weights.
    pub fn popularity(&self) -> Option<PopularityModel> {
        let women = self.women_weights.iter().cloned().collect::<Option<Vec<_>>>()?;
        let men = self.men_weights.iter().cloned().collect::<Option<Vec<_>>>();
        Some(PopularityModel { women, men })
    }
}

fn uniform_lists(count: usize, opposite: usize, side: Side, stream: StreamKey) -> Vec<PreferenceList> {
    let all: Vec<usize> = (0..opposite).collect();
    (0..count)
        .map(|p| sample_uniform_list(&all, &mut stream.person(side, p).rng()))
        .collect()
}

/// Every list an independent uniform permutation; when `complete` is false
/// each partner is first kept independently with probability `density`.
pub fn build_uniform(m: usize, w: usize, complete: bool, density: f64, stream: StreamKey) -> BuiltInstance {
    let lists = |count: usize, opposite: usize, side: Side| -> Vec<PreferenceList> {
        (0..count)
            .map(|p| {
                let mut rng = stream.person(side, p).rng();
                let candidates: Vec<usize> = if complete {
                    (0..opposite).collect()
                } else {
                    (0..opposite).filter(|_| rng.random_bool(density)).collect()
                };
                sample_uniform_list(&candidates, &mut rng)
            })
            .collect()
    };
    BuiltInstance::plain(Instance::new(lists(m, w, Side::Man), lists(w, m, Side::Woman)))
}

/// Women on the master list `m_0 ≻ m_1 ≻ …`; men uniform when a stream is
/// given, otherwise on `w_0 ≻ w_1 ≻ …`.
pub fn build_master_list(m: usize, w: usize, stream: Option<StreamKey>) -> BuiltInstance {
    let women = vec![PreferenceList::new((0..m).collect()); w];
    let men = match stream {
        Some(s) => uniform_lists(m, w, Side::Man, s),
        None => vec![PreferenceList::new((0..w).collect()); m],
    };
    BuiltInstance::plain(Instance::new(men, women))
}

pub fn build_gaussian(m: usize, w: usize, model: GaussianModel, stream: StreamKey) -> BuiltInstance {
    let women = (0..w)
        .map(|i| model.sample_list(m, &mut stream.person(Side::Woman, i).rng()))
        .collect();
    BuiltInstance::plain(Instance::new(uniform_lists(m, w, Side::Man, stream), women))
}

/// `D_w(m_i) = λ^i` for every woman.
pub fn build_geometric_popularity(m: usize, w: usize, lambda: f64) -> Result<PopularityModel> {
    let weights = LogWeights::geometric(m, lambda, 0)?;
    Ok(PopularityModel { women: vec![weights; w], men: None })
}

fn explicit_weights(side: &str, rows: &[Vec<f64>], opposite: usize) -> Result<Vec<LogWeights>> {
    rows.iter()
        .enumerate()
        .map(|(p, row)| {
            if row.len() != opposite {
                return Err(Error::param(
                    format!("{side}_weights"),
                    format!("row {p} has {} entries, expected {opposite}", row.len()),
                ));
            }
            let pairs: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
            LogWeights::from_linear(&pairs)
        })
        .collect()
}

fn side_weights(spec: &WeightSpec, count: usize, opposite: usize, side: &str) -> Result<Vec<LogWeights>> {
    match spec {
        WeightSpec::Uniform => Ok(vec![LogWeights::uniform(opposite); count]),
        WeightSpec::Geometric { lambda } => Ok(vec![LogWeights::geometric(opposite, *lambda, 0)?; count]),
        WeightSpec::Explicit { weights } => {
            if weights.len() != count {
                return Err(Error::param(
                    format!("{side}_weights"),
                    format!("{} rows, expected {count}", weights.len()),
                ));
            }
            explicit_weights(side, weights, opposite)
        }
    }
}

fn sample_side(weights: &[LogWeights], side: Side, stream: StreamKey) -> Vec<PreferenceList> {
    weights
        .iter()
        .enumerate()
        .map(|(p, wts)| sample_popularity_list(wts, &mut stream.person(side, p).rng()))
        .collect()
}

/// Women draw from their weights; men from theirs, or uniformly when absent.
pub fn build_popularity(
    m: usize,
    w: usize,
    women: &WeightSpec,
    men: Option<&WeightSpec>,
    stream: StreamKey,
) -> Result<BuiltInstance> {
    let women_w = side_weights(women, w, m, "women")?;
    let men_w = men.map(|spec| side_weights(spec, m, w, "men")).transpose()?;
    let women_lists = sample_side(&women_w, Side::Woman, stream);
    let men_lists = match &men_w {
        Some(wts) => sample_side(wts, Side::Man, stream),
        None => uniform_lists(m, w, Side::Man, stream),
    };
    let mut built = BuiltInstance::plain(Instance::new(men_lists, women_lists));
    built.women_weights = women_w.into_iter().map(Some).collect();
    if let Some(men_w) = men_w {
        built.men_weights = men_w.into_iter().map(Some).collect();
    }
    Ok(built)
}

/// `D_m(w) = D_w(m) = λ^m · λ^w`, stored unnormalized on both sides.
pub fn build_symmetric(m: usize, w: usize, lambda: f64, stream: StreamKey) -> Result<BuiltInstance> {
    check_unit_interval("lambda", lambda)?;
    let ln = lambda.ln();
    let women_w: Vec<LogWeights> = (0..w)
        .map(|j| LogWeights::from_log((0..m).map(|i| (i, (i + j) as f64 * ln)).collect()))
        .collect::<Result<_>>()?;
    let men_w: Vec<LogWeights> = (0..m)
        .map(|i| LogWeights::from_log((0..w).map(|j| (j, (i + j) as f64 * ln)).collect()))
        .collect::<Result<_>>()?;
    let instance = Instance::new(
        sample_side(&men_w, Side::Man, stream),
        sample_side(&women_w, Side::Woman, stream),
    );
    let mut built = BuiltInstance::plain(instance);
    built.women_weights = women_w.into_iter().map(Some).collect();
    built.men_weights = men_w.into_iter().map(Some).collect();
    Ok(built)
}

fn require_even(n: usize) -> Result<()> {
    if n.is_multiple_of(2) {
        Ok(())
    } else {
        Err(Error::param("N", format!("{n} must be even")))
    }
}

fn swapped_identity<R: Rng>(n: usize, rng: &mut R) -> PreferenceList {
    let mut order: Vec<usize> = (0..n).collect();
    for pair in order.chunks_mut(2) {
        if rng.random_bool(0.5) {
            pair.swap(0, 1);
        }
    }
    PreferenceList::new(order)
}

/// Identity lists with each adjacent pair `(2i, 2i+1)` swapped by an
/// independent fair coin per person and pair.
pub fn build_swap_pairs(n: usize, stream: StreamKey) -> Result<BuiltInstance> {
    require_even(n)?;
    let side = |side: Side| -> Vec<PreferenceList> {
        (0..n)
            .map(|p| swapped_identity(n, &mut stream.person(side, p).rng()))
            .collect()
    };
    Ok(BuiltInstance::plain(Instance::new(side(Side::Man), side(Side::Woman))))
}

/// Groups `{m_2i, m_2i+1, w_2i, w_2i+1}`; acceptability only within a group,
/// uniform order inside it.
pub fn build_grouped_incomplete(n: usize, stream: StreamKey) -> Result<BuiltInstance> {
    require_even(n)?;
    let side = |side: Side| -> Vec<PreferenceList> {
        (0..n)
            .map(|p| {
                let base = p - p % 2;
                sample_uniform_list(&[base, base + 1], &mut stream.person(side, p).rng())
            })
            .collect()
    };
    Ok(BuiltInstance::plain(Instance::new(side(Side::Man), side(Side::Woman))))
}

fn folklore_men(n: usize) -> Vec<PreferenceList> {
    (0..n)
        .map(|i| PreferenceList::new((0..n).map(|k| (i + 1 + k) % n).collect()))
        .collect()
}

fn folklore_woman(k: usize, n: usize) -> PreferenceList {
    PreferenceList::new((0..n).map(|j| (k + j) % n).collect())
}

fn check_folklore(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::param("N", "folklore instance needs N >= 2"));
    }
    Ok(())
}

/// Cyclic instance where every man-woman pair is stable.
pub fn build_folklore_deterministic(n: usize) -> Result<BuiltInstance> {
    check_folklore(n)?;
    let women = (0..n).map(|k| folklore_woman(k, n)).collect();
    Ok(BuiltInstance::plain(Instance::new(folklore_men(n), women)))
}

/// The cyclic instance with woman 0's list redrawn from `D(m_i) = λ^(i+1)`.
pub fn build_folklore_cyclic(n: usize, lambda: f64, stream: StreamKey) -> Result<BuiltInstance> {
    check_folklore(n)?;
    let weights = LogWeights::geometric(n, lambda, 1)?;
    let mut women: Vec<PreferenceList> = (0..n).map(|k| folklore_woman(k, n)).collect();
    women[0] = sample_popularity_list(&weights, &mut stream.person(Side::Woman, 0).rng());
    let mut built = BuiltInstance::plain(Instance::new(folklore_men(n), women));
    built.women_weights[0] = Some(weights);
    Ok(built)
}

/// Parses `k=v` pairs into a params object; values that look like JSON are
/// decoded, everything else is kept as a string.
pub fn params_from_pairs<'a>(pairs: impl IntoIterator<Item = &'a str>) -> Result<Map<String, Value>> {
    let mut out = BTreeMap::new();
    for pair in pairs {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::param(pair, "expected key=value"))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        out.insert(k.trim().to_string(), value);
    }
    Ok(out.into_iter().collect())
}
