//! Acceptance criteria, one line each. Exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use matching_core::harness::{run_experiment, ExperimentConfig, ExperimentReport, Outcome};
use matching_core::oracle::{enumerate_all_stable, DEFAULT_GUARD};
use matching_core::prefgen::models::build_master_list;
use matching_core::prefgen::StreamKey;

const SEED: u64 = 20_240_601;

// Pinned reference values.
const STABLE_PAIRS_N50: f64 = 245.6;
const RANK_GAP_GAUSSIAN_SIGMA1: f64 = 781.0;
const RANK_GAP_GEOMETRIC_HALF: f64 = 94.67;
const X_MEAN_GEOMETRIC_HALF: f64 = 44.33;
const COUNTEREXAMPLE_FLOOR: f64 = 0.05;

struct Line {
    id: &'static str,
    ok: bool,
    detail: String,
}

fn report(cfg: ExperimentConfig) -> ExperimentReport {
    run_experiment(&cfg).unwrap_or_else(|e| panic!("{}: {e}", cfg.experiment))
}

/// Passes when every verdict matching `rule` passed; the detail lists them.
fn verdicts(r: &ExperimentReport, rule: &str) -> (bool, String) {
    let vs: Vec<_> = r.verdicts.iter().filter(|v| v.rule == rule).collect();
    let ok = !vs.is_empty() && vs.iter().all(|v| v.outcome == Outcome::Pass);
    let detail = vs
        .iter()
        .map(|v| format!("{} mean {:.4} se {:.4} vs {:.4}", v.group, v.mean, v.se, v.bound))
        .collect::<Vec<_>>()
        .join("; ");
    (ok, detail)
}

fn mean_se(r: &ExperimentReport, group: &str, col: &str) -> (f64, f64) {
    let s = r.group(group).and_then(|g| g.stat(col)).expect("group statistic");
    (s.mean, s.se)
}

fn main() -> ExitCode {
    let mut lines: Vec<Line> = Vec::new();
    let mut push = |id, ok, detail: String| lines.push(Line { id, ok, detail });
    let start = Instant::now();

    let sweep = report(ExperimentConfig::new("oracle-sweep", SEED).with_n(&[2, 3, 4, 5, 6]).with_trials(500));
    let (ok, d) = verdicts(&sweep, "oracle-equivalence");
    push("01 da-and-enumeration-match-oracle", ok, d);
    let (ok1, _) = verdicts(&sweep, "block-confinement");
    let (ok2, _) = verdicts(&sweep, "rank-gap-lemma");
    let max_gap = sweep.groups.iter().filter_map(|g| g.stat("max_gap")).map(|s| s.max).fold(0.0, f64::max);
    push("02 blocks-and-rank-gap-lemma", ok1 && ok2, format!("2500 instances, largest gap {max_gap}"));

    let mut unique = 0;
    for t in 0..200u64 {
        let n = 2 + (t % 5) as usize;
        let b = build_master_list(n, n, Some(StreamKey::master(SEED).aux("master").trial(t)));
        unique += (enumerate_all_stable(&b.instance, DEFAULT_GUARD).expect("small").len() == 1) as usize;
    }
    push("03 master-list-unique", unique == 200, format!("{unique}/200 instances with one stable matching"));

    let folk = report(
        ExperimentConfig::new("folklore-lb", SEED)
            .with_n(&[200])
            .with_trials(2000)
            .with_param("lambda", 0.99),
    );
    let (a, da) = verdicts(&folk, "folklore-exact");
    let (b, db) = verdicts(&folk, "folklore-floor");
    push("04 folklore-husbands", a && b, format!("{da}; floor {db}"));

    let pairs = report(
        ExperimentConfig::new("stable-pairs", SEED)
            .with_n(&[50])
            .with_trials(200)
            .with_param("lambda", 0.9),
    );
    let mut ok = true;
    let mut d = Vec::new();
    for v in ["intrinsic", "symmetric"] {
        let g = format!("n=50,variant={v}");
        let (m, se) = mean_se(&pairs, &g, "stable_pairs");
        ok &= m <= STABLE_PAIRS_N50 + 3.0 * se;
        d.push(format!("{v} {m:.3}±{se:.3}"));
    }
    let (thm, _) = verdicts(&pairs, "stable-pairs-cor1");
    push("05 stable-pairs", ok && thm, format!("{} vs {STABLE_PAIRS_N50}", d.join(", ")));

    let gauss = report(
        ExperimentConfig::new("rank-gap", SEED)
            .with_n(&[100])
            .with_trials(200)
            .with_param("women", "gaussian")
            .with_param("sigma", 1.0),
    );
    let geo = report(
        ExperimentConfig::new("rank-gap", SEED)
            .with_n(&[100])
            .with_trials(200)
            .with_param("women", "geometric")
            .with_param("lambda", 0.5),
    );
    let (gm, gse) = mean_se(&gauss, "n=100", "mean_gap");
    let (qm, qse) = mean_se(&geo, "n=100", "mean_gap");
    let (series, _) = verdicts(&gauss, "rank-gap-series");
    push(
        "06 rank-gap",
        gm <= RANK_GAP_GAUSSIAN_SIGMA1 + 3.0 * gse && qm <= RANK_GAP_GEOMETRIC_HALF + 3.0 * qse && series,
        format!(
            "gaussian {gm:.4}±{gse:.4} vs {RANK_GAP_GAUSSIAN_SIGMA1}; geometric {qm:.4}±{qse:.4} vs {RANK_GAP_GEOMETRIC_HALF}"
        ),
    );

    let multi = report(ExperimentConfig::new("multiplicity", SEED).with_n(&[50, 100, 200]).with_trials(100));
    let t = &multi.trends[0];
    push("07 multiplicity-decreasing", t.outcome == Outcome::Pass, t.to_string());

    let mut ok = true;
    let mut d = Vec::new();
    for name in ["counterexample-swap", "counterexample-grouped"] {
        let r = report(ExperimentConfig::new(name, SEED).with_n(&[200]).with_trials(100));
        let (m, se) = mean_se(&r, "n=200", "fraction");
        ok &= m >= COUNTEREXAMPLE_FLOOR;
        d.push(format!("{name} {m:.4}±{se:.4}"));
    }
    push("08 counterexample-floors", ok, format!("{} vs {COUNTEREXAMPLE_FLOOR}", d.join(", ")));

    let xp = report(ExperimentConfig::new("x-process", SEED).with_trials(100_000).with_param("lambda", 0.5));
    let (xm, xse) = mean_se(&xp, "all", "x");
    let (pm, pse) = mean_se(&xp, "all", "first_below_one");
    let p0 = (-2.0f64).exp();
    push(
        "09 x-process",
        xm <= X_MEAN_GEOMETRIC_HALF + 3.0 * xse && (pm - p0).abs() <= 3.0 * pse,
        format!("E[X] {xm:.3}±{xse:.3} vs {X_MEAN_GEOMETRIC_HALF}; P[first<1] {pm:.5}±{pse:.5} vs {p0:.5}"),
    );

    let prel = report(ExperimentConfig::new("prel-diagnostic", SEED).with_n(&[30]).with_trials(500));
    let (ok, d) = verdicts(&prel, "prel-violations");
    push("10 acceptance-lemma", ok, d);

    let t5 = report(ExperimentConfig::new("thm5-ratio", SEED).with_n(&[30]).with_trials(500));
    let (ok, d) = verdicts(&t5, "thm5-violations");
    push("11 popularity-ratio", ok, d);

    let det = |workers: usize| {
        let mut a = ExperimentConfig::new("multiplicity", SEED).with_n(&[20, 40]).with_trials(40);
        a.workers = Some(workers);
        let mut b = ExperimentConfig::new("oracle-sweep", SEED).with_n(&[4]).with_trials(50);
        b.workers = Some(workers);
        let (ra, rb) = (report(a), report(b));
        (ra.to_csv() + &rb.to_csv(), ra.summary_json() + &rb.summary_json())
    };
    let one = det(1);
    let same = one == det(1) && one == det(4);
    push("12 determinism", same, format!("{} csv bytes identical across reruns and worker counts", one.0.len()));

    let failed = lines.iter().filter(|l| !l.ok).count();
    for l in &lines {
        println!("{} {}: {}", if l.ok { "PASS" } else { "FAIL" }, l.id, l.detail);
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        lines.len() - failed,
        lines.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
