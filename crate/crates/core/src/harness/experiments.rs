use std::collections::BTreeSet;

use serde_json::{json, Map, Value};

use super::stats::{Cell, Rule};
use super::{run_trials, summarize, ExperimentConfig, ExperimentReport, Trend};
use crate::algorithms::{
    mpda, mpda_with_schedule, wpda, BlockStructure, HusbandEnumeration, Schedule, StableHusbands,
};
use crate::bounds::{
    cor1_bound, folklore_exact_expectation, gaussian_rank_gap_bound, intrinsic_ln_r, lemma_prel_bound,
    meandomination_bound, phase2_expected_acceptances, thm1_bound, thm5_log_bound_ln, thm6_bound,
    thm7_bound, UkSequence, XProcess,
};
use crate::error::{Error, Result};
use crate::market::{is_stable, Instance};
use crate::oracle::enumerate_all_stable;
use crate::prefgen::{BuiltInstance, LogWeights, ModelSpec, WeightSpec};

type Row = Vec<Cell>;

pub(super) fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.experiment.as_str() {
        "oracle-sweep" => oracle_sweep(cfg),
        "rank-gap" => rank_gap(cfg),
        "multiplicity" => multiplicity(cfg, "multiplicity"),
        "counterexample-swap" => multiplicity(cfg, "swap"),
        "counterexample-grouped" => multiplicity(cfg, "grouped"),
        "stable-pairs" => stable_pairs(cfg),
        "folklore-lb" => folklore(cfg),
        "x-process" => x_process(cfg),
        "block-tail" => block_tail(cfg),
        "thm5-ratio" => thm5_ratio(cfg),
        "prel-diagnostic" => prel(cfg),
        other => Err(Error::UnknownExperiment(other.into())),
    }
}

fn sizes(cfg: &ExperimentConfig, default: &[usize]) -> Vec<usize> {
    if cfg.n.is_empty() {
        default.to_vec()
    } else {
        cfg.n.clone()
    }
}

fn model_or(cfg: &ExperimentConfig, default: ModelSpec) -> Result<ModelSpec> {
    match &cfg.model {
        Some(choice) => choice.spec(),
        None => Ok(default),
    }
}

fn geometric_women(cfg: &ExperimentConfig, default_lambda: f64, men: Option<WeightSpec>) -> Result<ModelSpec> {
    let lambda = cfg.f64_param("lambda", default_lambda)?;
    crate::prefgen::popularity::check_unit_interval("lambda", lambda)?;
    Ok(ModelSpec::Popularity { women: WeightSpec::Geometric { lambda }, men })
}

/// Runs `trial(n, t)` for every sweep size, rows in (n, t) order.
fn sweep<F>(cfg: &ExperimentConfig, ns: &[usize], trials: usize, trial: F) -> Result<Vec<Row>>
where
    F: Fn(usize, u64) -> Result<Row> + Sync + Send,
{
    let mut rows = Vec::new();
    for &n in ns {
        rows.extend(run_trials(cfg, trials, |t| trial(n, t))?);
    }
    Ok(rows)
}

fn label(n: usize) -> String {
    format!("n={n}")
}

fn rank(inst: &Instance, w: usize, m: usize) -> usize {
    inst.woman(w).rank_of(m).expect("stable husband is acceptable")
}

/// Persons with two or more stable partners, from per-woman enumerations.
/// A man has several stable wives iff he is a stable husband of several
/// women.
fn multiplicity_counts(num_men: usize, enums: &[HusbandEnumeration]) -> (usize, usize) {
    let women = enums.iter().filter(|e| e.count() >= 2).count();
    let mut wives = vec![0usize; num_men];
    for e in enums {
        for &m in &e.husbands {
            wives[m] += 1;
        }
    }
    (women, wives.iter().filter(|&&c| c >= 2).count())
}

fn oracle_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ns = sizes(cfg, &[2, 3, 4, 5, 6]);
    let trials = cfg.trials.unwrap_or(500);
    let model = model_or(cfg, ModelSpec::uniform())?;
    let columns = [
        "n",
        "trial",
        "stable_matchings",
        "stable_pairs",
        "mpda_mismatch",
        "wpda_mismatch",
        "husband_mismatch",
        "rural_mismatch",
        "block_mismatch",
        "separator_mismatch",
        "rank_gap_violations",
        "max_gap",
        "discrepancies",
    ];
    let rows = sweep(cfg, &ns, trials, |n, t| {
        let b = model.build(n, n, Some(cfg.stream(n, t)))?;
        let c = oracle_checks(&b.instance, cfg.guard)?;
        let discrepancies = c.mpda + c.wpda + c.husbands + c.rural + c.blocks + c.separators + c.rank_gap;
        Ok(vec![
            n.into(),
            t.into(),
            c.matchings.into(),
            c.pairs.into(),
            c.mpda.into(),
            c.wpda.into(),
            c.husbands.into(),
            c.rural.into(),
            c.blocks.into(),
            c.separators.into(),
            c.rank_gap.into(),
            c.max_gap.into(),
            discrepancies.into(),
        ])
    })?;
    let mut r = ExperimentReport::new(cfg.clone(), &columns, 1, rows);
    for &n in &ns {
        r.judge("oracle-equivalence", &label(n), "discrepancies", Rule::Exact, 0.0);
        r.judge("block-confinement", &label(n), "block_mismatch", Rule::Exact, 0.0);
        r.judge("rank-gap-lemma", &label(n), "rank_gap_violations", Rule::Exact, 0.0);
    }
    Ok(r)
}

#[derive(Default)]
struct OracleChecks {
    matchings: usize,
    pairs: usize,
    mpda: usize,
    wpda: usize,
    husbands: usize,
    rural: usize,
    blocks: usize,
    separators: usize,
    rank_gap: usize,
    max_gap: usize,
}

/// Every exact comparison against the oracle on one instance; each field
/// counts the failures of one family of checks.
fn oracle_checks(inst: &Instance, guard: usize) -> Result<OracleChecks> {
    let ss = enumerate_all_stable(inst, guard)?;
    let mut c = OracleChecks {
        matchings: ss.len(),
        pairs: ss.stable_pairs.len(),
        ..Default::default()
    };
    let (mu, _) = mpda(inst);
    let man_best = ss.man_best();
    c.mpda += (mu != man_best) as usize;
    c.mpda += (mpda_with_schedule(inst, Schedule::HighestIndexFirst).0 != mu) as usize;
    c.mpda += !is_stable(inst, &mu) as usize;
    let mu_w = wpda(inst);
    c.wpda += (mu_w != ss.woman_best()) as usize;
    c.wpda += !is_stable(inst, &mu_w) as usize;

    let sh = StableHusbands::new(inst);
    for w in 0..inst.num_women() {
        let e = sh.for_woman(w);
        let mut found = e.husbands.clone();
        found.sort_unstable();
        let improving = e.husbands.windows(2).all(|p| rank(inst, w, p[1]) < rank(inst, w, p[0]));
        let ends = e.worst() == mu.husband_of(w) && e.best() == mu_w.husband_of(w);
        if found != ss.husbands_of(w) || !improving || !ends {
            c.husbands += 1;
        }
    }

    let matched = |m: &crate::Matching| -> Vec<bool> {
        m.wives().iter().chain(m.husbands()).map(Option::is_some).collect()
    };
    if !ss.matched_set_constant() || ss.matchings.iter().any(|s| matched(s) != matched(&mu)) {
        c.rural += 1;
    }

    let bs = BlockStructure::new(inst);
    let blocks = bs.block_decomposition();
    let covers = blocks.first().is_some_and(|b| b.l == 0)
        && blocks.last().is_some_and(|b| b.r == bs.len())
        && blocks.windows(2).all(|p| p[0].r == p[1].l)
        && blocks.iter().all(|b| !b.is_empty());
    c.blocks += !covers as usize;
    for i in 0..bs.len() {
        let b = bs.compute_block(i)?;
        if !blocks.contains(&b) || !b.contains(i) {
            c.blocks += 1;
        }
    }
    for &(m, w) in &ss.stable_pairs {
        let confined = bs
            .index_of_woman(w)
            .is_some_and(|iw| blocks.iter().any(|b| b.contains(m) && b.contains(iw)));
        c.blocks += !confined as usize;
    }
    for &t in &bs.separators() {
        let prefix = |s: &crate::Matching| -> BTreeSet<Option<usize>> { (0..t).map(|m| s.wife_of(m)).collect() };
        let first = prefix(&mu);
        c.separators += ss.matchings.iter().filter(|s| prefix(s) != first).count();
    }
    for w in 0..inst.num_women() {
        let (Some(best), Some(worst)) = (ss.women[w].best, ss.women[w].worst) else { continue };
        let gap = rank(inst, w, worst) - rank(inst, w, best);
        c.max_gap = c.max_gap.max(gap);
        let n = bs.index_of_woman(w).expect("stably matched woman is matched by mpda");
        let (x, span) = bs.rank_gap_components(n)?;
        c.rank_gap += (gap > x + span) as usize;
    }
    Ok(c)
}

fn rank_gap(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ns = sizes(cfg, &[100]);
    let trials = cfg.trials.unwrap_or(200);
    let women = cfg.str_param("women", "gaussian")?;
    let (model, u, closed) = match (&cfg.model, women) {
        (Some(choice), _) => {
            let spec = choice.spec()?;
            let u = match &spec {
                ModelSpec::Gaussian { sigma } => UkSequence::gaussian(*sigma, 2000)?,
                ModelSpec::Popularity { women: WeightSpec::Geometric { lambda }, .. } => UkSequence::geometric(*lambda)?,
                other => {
                    return Err(Error::Unsupported { model: other.name().into(), what: "rank-gap bound".into() })
                }
            };
            let closed = match &spec {
                ModelSpec::Gaussian { sigma } => Some(gaussian_rank_gap_bound(*sigma)),
                _ => None,
            };
            (spec, u, closed)
        }
        (None, "gaussian") => {
            let sigma = cfg.f64_param("sigma", 1.0)?;
            let spec = ModelSpec::Gaussian { sigma: crate::prefgen::GaussianModel::new(sigma)?.sigma };
            (spec, UkSequence::gaussian(sigma, 2000)?, Some(gaussian_rank_gap_bound(sigma)))
        }
        (None, "geometric") => {
            let spec = geometric_women(cfg, 0.5, None)?;
            let ModelSpec::Popularity { women: WeightSpec::Geometric { lambda }, .. } = spec else { unreachable!() };
            (spec, UkSequence::geometric(lambda)?, None)
        }
        (None, other) => return Err(Error::param("women", format!("expected gaussian or geometric, got `{other}`"))),
    };
    let columns = ["n", "trial", "mean_gap", "max_gap", "matched_women"];
    let rows = sweep(cfg, &ns, trials, |n, t| {
        let b = model.build(n, n, Some(cfg.stream(n, t)))?;
        let sh = StableHusbands::new(&b.instance);
        let gaps: Vec<usize> = sh
            .all()
            .iter()
            .filter_map(|e| Some(rank(&b.instance, e.woman, e.worst()?) - rank(&b.instance, e.woman, e.best()?)))
            .collect();
        let mean = if gaps.is_empty() { 0.0 } else { gaps.iter().sum::<usize>() as f64 / gaps.len() as f64 };
        Ok(vec![n.into(), t.into(), mean.into(), gaps.iter().copied().max().unwrap_or(0).into(), gaps.len().into()])
    })?;
    let mut r = ExperimentReport::new(cfg.clone(), &columns, 1, rows);
    let series = thm1_bound(&u);
    for &n in &ns {
        r.add_bound(&label(n), "thm1_series", series);
        r.judge("rank-gap-series", &label(n), "mean_gap", Rule::AtMost, series);
        if let Some(closed) = closed {
            r.add_bound(&label(n), "thm1_closed_form", closed);
            r.judge("rank-gap-closed-form", &label(n), "mean_gap", Rule::AtMost, closed);
        }
    }
    Ok(r)
}

fn multiplicity(cfg: &ExperimentConfig, kind: &str) -> Result<ExperimentReport> {
    let (ns, trials, model) = match kind {
        "swap" => (sizes(cfg, &[200]), cfg.trials.unwrap_or(100), ModelSpec::Swap),
        "grouped" => (sizes(cfg, &[200]), cfg.trials.unwrap_or(100), ModelSpec::Grouped),
        _ => (
            sizes(cfg, &[50, 100, 200]),
            cfg.trials.unwrap_or(100),
            model_or(cfg, geometric_women(cfg, 0.5, None)?)?,
        ),
    };
    let columns = ["n", "trial", "fraction", "women_multi", "men_multi", "stable_pairs"];
    let rows = sweep(cfg, &ns, trials, |n, t| {
        let b = model.build(n, n, Some(cfg.stream(n, t)))?;
        let enums = StableHusbands::new(&b.instance).all();
        let (wm, mm) = multiplicity_counts(n, &enums);
        let pairs: usize = enums.iter().map(HusbandEnumeration::count).sum();
        let frac = (wm + mm) as f64 / (2 * n) as f64;
        Ok(vec![n.into(), t.into(), frac.into(), wm.into(), mm.into(), pairs.into()])
    })?;
    let mut r = ExperimentReport::new(cfg.clone(), &columns, 1, rows);
    let floor = cfg.f64_param("floor", 0.05)?;
    if kind == "multiplicity" {
        for &n in &ns {
            r.judge("multiplicity", &label(n), "fraction", Rule::Report, 0.0);
        }
        let trend = summarize(std::slice::from_ref(&r), "fraction", Trend::Decreasing);
        r.trends.push(trend);
    } else {
        for &n in &ns {
            r.judge("counterexample-floor", &label(n), "fraction", Rule::AtLeast, floor);
        }
        let trend = summarize(std::slice::from_ref(&r), "fraction", Trend::Floor(floor));
        r.trends.push(trend);
    }
    Ok(r)
}

fn stable_pairs(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ns = sizes(cfg, &[50]);
    let trials = cfg.trials.unwrap_or(200);
    let lambda = cfg.f64_param("lambda", 0.9)?;
    let variants: Vec<&str> = match cfg.str_param("variant", "both")? {
        "both" => vec!["intrinsic", "symmetric"],
        "intrinsic" => vec!["intrinsic"],
        "symmetric" => vec!["symmetric"],
        other => return Err(Error::param("variant", format!("unknown variant `{other}`"))),
    };
    let intrinsic = geometric_women(cfg, lambda, None)?;
    let symmetric = ModelSpec::Symmetric { lambda };
    let columns = ["n", "variant", "trial", "stable_pairs", "thm6", "thm7"];
    let mut rows = Vec::new();
    for &n in &ns {
        for &v in &variants {
            let spec = if v == "intrinsic" { &intrinsic } else { &symmetric };
            rows.extend(run_trials(cfg, trials, |t| {
                let b = spec.build(n, n, Some(cfg.stream(n, t).aux(v)))?;
                let enums = StableHusbands::new(&b.instance).all();
                let pairs: usize = enums.iter().map(HusbandEnumeration::count).sum();
                let (t6, t7) = pair_bounds(&b, n)?;
                Ok(vec![n.into(), v.into(), t.into(), pairs.into(), t6.into(), t7.into()])
            })?);
        }
    }
    let mut r = ExperimentReport::new(cfg.clone(), &columns, 2, rows);
    for &n in &ns {
        for &v in &variants {
            let g = format!("n={n},variant={v}");
            let cor1 = cor1_bound(n);
            r.add_bound(&g, "cor1", cor1);
            r.add_bound(&g, "n_ln_n", n as f64 * (n as f64).ln());
            r.judge("stable-pairs-cor1", &g, "stable_pairs", Rule::AtMost, cor1);
            // Bounds that depend on the instance are averaged per trial.
            let per_trial = if v == "intrinsic" { "thm6" } else { "thm7" };
            let mean_bound = r.group(&g).and_then(|gr| gr.stat(per_trial)).map_or(f64::NAN, |s| s.mean);
            r.add_bound(&g, per_trial, mean_bound);
            r.judge(&format!("stable-pairs-{per_trial}"), &g, "stable_pairs", Rule::AtMost, mean_bound);
        }
    }
    Ok(r)
}

/// Per-instance values of the two appendix bounds on stable pairs.
fn pair_bounds(b: &BuiltInstance, n: usize) -> Result<(f64, f64)> {
    let inst = &b.instance;
    let d_w: Vec<usize> = inst.women().iter().map(|l| l.len().max(1)).collect();
    let d_m: Vec<usize> = inst.men().iter().map(|l| l.len().max(1)).collect();
    let women: Option<Vec<LogWeights>> = b.women_weights.iter().cloned().collect();
    let t6 = match &women {
        Some(ws) => thm6_bound(n, &d_w, &intrinsic_ln_r(ws, inst.num_men()))?,
        None => f64::NAN,
    };
    let men: Option<Vec<LogWeights>> = b.men_weights.iter().cloned().collect();
    let t7 = match (&women, &men) {
        (Some(ws), Some(ms)) => {
            let mut ln_r = 0.0f64;
            for (w, wl) in ws.iter().enumerate() {
                for &(m, lw) in wl.entries() {
                    if let Some(lm) = ms[m].log_weight(w) {
                        ln_r = ln_r.max((lw - lm).abs());
                    }
                }
            }
            thm7_bound(n, ln_r, &d_w, &d_m)?
        }
        _ => f64::NAN,
    };
    Ok((t6, t7))
}

fn folklore(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ns = sizes(cfg, &[200]);
    let trials = cfg.trials.unwrap_or(2000);
    let lambda = cfg.f64_param("lambda", 0.99)?;
    let model = ModelSpec::Folklore { lambda, deterministic: false };
    let columns = ["n", "trial", "husbands", "best_husband"];
    let rows = sweep(cfg, &ns, trials, |n, t| {
        let b = model.build(n, n, Some(cfg.stream(n, t)))?;
        let e = StableHusbands::new(&b.instance).for_woman(0);
        Ok(vec![n.into(), t.into(), e.count().into(), e.best().unwrap_or(0).into()])
    })?;
    let mut r = ExperimentReport::new(cfg.clone(), &columns, 1, rows);
    for &n in &ns {
        let g = label(n);
        let exact = folklore_exact_expectation(n, lambda)?;
        let floor = (1.0 - lambda) * n as f64;
        r.add_bound(&g, "exact_expectation", exact);
        r.add_bound(&g, "floor", floor);
        // Every man proposes to w_0 once, m_{N-1} first.
        let ln = lambda.ln();
        let received: Vec<f64> = (0..n).map(|i| (i + 1) as f64 * ln).collect();
        r.add_bound(&g, "lemma_prel", lemma_prel_bound(&received, n as f64 * ln)?);
        r.judge("folklore-exact", &g, "husbands", Rule::Within, exact);
        r.judge("folklore-floor", &g, "husbands", Rule::Above, floor);
    }
    Ok(r)
}

fn x_process(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let trials = cfg.trials.unwrap_or(100_000);
    let u = match cfg.str_param("u", "geometric")? {
        "geometric" => UkSequence::geometric(cfg.f64_param("lambda", 0.5)?)?,
        "gaussian" => UkSequence::gaussian(cfg.f64_param("sigma", 1.0)?, 2000)?,
        other => return Err(Error::param("u", format!("expected geometric or gaussian, got `{other}`"))),
    };
    let xp = XProcess::new(&u)?;
    let columns = ["trial", "x", "t", "first_below_one"];
    let rows = run_trials(cfg, trials, |t| {
        let mut rng = cfg.stream(0, t).aux("x-process").rng();
        let s = xp.sample(&mut rng);
        Ok(vec![t.into(), s.x.into(), s.t.into(), (s.deltas[0] == 0).into()])
    })?;
    let mut r = ExperimentReport::new(cfg.clone(), &columns, 0, rows);
    let mean_bound = meandomination_bound(&u);
    let p0 = xp.prob_below(1);
    r.add_bound("all", "meandomination", mean_bound);
    r.add_bound("all", "p_delta_below_one", p0);
    r.judge("x-mean", "all", "x", Rule::AtMost, mean_bound);
    r.judge("x-first-jump", "all", "first_below_one", Rule::Within, p0);
    Ok(r)
}

fn block_tail(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ns = sizes(cfg, &[100]);
    let trials = cfg.trials.unwrap_or(200);
    let model = model_or(cfg, geometric_women(cfg, 0.5, None)?)?;
    let per_trial = |n: usize, t: u64| -> Result<Vec<usize>> {
        let b = model.build(n, n, Some(cfg.stream(n, t)))?;
        Ok(BlockStructure::new(&b.instance).block_decomposition().iter().map(|b| b.len()).collect())
    };
    let columns = ["n", "trial", "blocks", "max_size", "mean_size", "nontrivial"];
    let mut rows = Vec::new();
    let mut hist_by_n = Map::new();
    let mut verdict_slopes = Vec::new();
    for &n in &ns {
        let sizes = run_trials(cfg, trials, |t| per_trial(n, t))?;
        let mut hist = vec![0usize; n + 1];
        for (t, s) in sizes.iter().enumerate() {
            for &k in s {
                hist[k] += 1;
            }
            let mean = s.iter().sum::<usize>() as f64 / s.len() as f64;
            rows.push(vec![
                n.into(),
                t.into(),
                s.len().into(),
                s.iter().copied().max().unwrap_or(0).into(),
                mean.into(),
                s.iter().filter(|&&k| k > 1).count().into(),
            ]);
        }
        let (survival, slope) = survival_slope(&hist);
        hist_by_n.insert(
            label(n),
            json!({"histogram": hist, "survival": survival, "log_survival_slope": slope}),
        );
        verdict_slopes.push((n, slope));
    }
    let mut r = ExperimentReport::new(cfg.clone(), &columns, 1, rows);
    for (n, slope) in verdict_slopes {
        r.add_bound(&label(n), "log_survival_slope", slope);
        r.judge("block-tail", &label(n), "max_size", Rule::Report, slope);
    }
    r.extra.insert("block_sizes".into(), Value::Object(hist_by_n));
    Ok(r)
}

/// P[size ≥ k] for every k, and the least-squares slope of its log over the
/// sizes where it is positive.
fn survival_slope(hist: &[usize]) -> (Vec<f64>, f64) {
    let total: usize = hist.iter().sum();
    let mut survival = vec![0.0; hist.len()];
    let mut above = total;
    for k in 0..hist.len() {
        survival[k] = above as f64 / total.max(1) as f64;
        above -= hist[k];
    }
    let pts: Vec<(f64, f64)> = (1..hist.len())
        .filter(|&k| survival[k] > 0.0)
        .map(|k| (k as f64, survival[k].ln()))
        .collect();
    if pts.len() < 2 {
        return (survival, 0.0);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (survival, sxy / sxx)
}

fn thm5_ratio(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ns = sizes(cfg, &[30]);
    let trials = cfg.trials.unwrap_or(500);
    let model = model_or(cfg, geometric_women(cfg, 0.5, Some(WeightSpec::Uniform))?)?;
    let columns = ["n", "trial", "max_log_ratio", "log_bound", "violation", "ln_rm", "ln_qw"];
    let rows = sweep(cfg, &ns, trials, |n, t| {
        let b = model.build(n, n, Some(cfg.stream(n, t)))?;
        let pop = b
            .popularity()
            .ok_or_else(|| Error::Unsupported { model: model.name().into(), what: "popularity weights".into() })?;
        let rq = pop.log_rm_qw()?;
        let bound = thm5_log_bound_ln(n, rq.log_rm, rq.log_qw)?;
        let enums = StableHusbands::new(&b.instance).all();
        let mut worst = 0.0f64;
        for e in &enums {
            let lw: Vec<f64> = e
                .husbands
                .iter()
                .map(|&m| pop.women[e.woman].log_weight(m).expect("husband has a weight"))
                .collect();
            if let (Some(hi), Some(lo)) = (
                lw.iter().copied().reduce(f64::max),
                lw.iter().copied().reduce(f64::min),
            ) {
                worst = worst.max(hi - lo);
            }
        }
        Ok(vec![
            n.into(),
            t.into(),
            worst.into(),
            bound.into(),
            (worst > bound).into(),
            rq.log_rm.into(),
            rq.log_qw.into(),
        ])
    })?;
    let mut r = ExperimentReport::new(cfg.clone(), &columns, 1, rows);
    for &n in &ns {
        let g = label(n);
        r.add_bound(&g, "allowed_failure_rate", 2.0 / (n * n) as f64);
        r.judge("thm5-violations", &g, "violation", Rule::Exact, 0.0);
    }
    Ok(r)
}

fn prel(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ns = sizes(cfg, &[30]);
    let trials = cfg.trials.unwrap_or(500);
    let model = model_or(cfg, geometric_women(cfg, 0.9, None)?)?;
    let columns = ["n", "trial", "women", "violations", "min_slack", "mean_expected", "mean_bound"];
    let rows = sweep(cfg, &ns, trials, |n, t| {
        let b = model.build(n, n, Some(cfg.stream(n, t)))?;
        let inst = &b.instance;
        let enums = StableHusbands::new(inst).all();
        let mut checked = 0usize;
        let mut violations = 0usize;
        let mut min_slack = f64::INFINITY;
        let (mut sum_e, mut sum_b) = (0.0, 0.0);
        for e in &enums {
            let Some(x0) = e.worst() else { continue };
            let weights = b.women_weights[e.woman]
                .as_ref()
                .ok_or_else(|| Error::Unsupported { model: model.name().into(), what: "women weights".into() })?;
            let lw = |m: usize| weights.log_weight(m).expect("acceptable proposer has a weight");
            let list = inst.woman(e.woman);
            let initial: Vec<f64> = e.initial_proposals.iter().filter(|&&m| list.accepts(m)).map(|&m| lw(m)).collect();
            let continued: Vec<f64> = e.continued().iter().filter(|&&m| list.accepts(m)).map(|&m| lw(m)).collect();
            let received: Vec<f64> = e.all_received(inst).into_iter().map(lw).collect();
            let expected = phase2_expected_acceptances(&initial, &continued)?;
            let bound = lemma_prel_bound(&received, lw(x0))?;
            // Rounding allowance only; the inequality itself is exact.
            let slack = bound - expected;
            if slack < -1e-12 * bound.abs().max(1.0) {
                violations += 1;
            }
            min_slack = min_slack.min(slack);
            sum_e += expected;
            sum_b += bound;
            checked += 1;
        }
        let k = checked.max(1) as f64;
        Ok(vec![
            n.into(),
            t.into(),
            checked.into(),
            violations.into(),
            if checked == 0 { 0.0 } else { min_slack }.into(),
            (sum_e / k).into(),
            (sum_b / k).into(),
        ])
    })?;
    let mut r = ExperimentReport::new(cfg.clone(), &columns, 1, rows);
    for &n in &ns {
        r.judge("prel-violations", &label(n), "violations", Rule::Exact, 0.0);
    }
    Ok(r)
}
