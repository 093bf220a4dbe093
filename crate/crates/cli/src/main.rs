use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use matching_core::algorithms::{
    enumerate_stable_husbands, enumerate_stable_husbands_popularity, mpda, wpda, BlockStructure,
};
use matching_core::harness::{run_experiment, ExperimentConfig, CATALOG};
use matching_core::oracle::{enumerate_all_stable, DEFAULT_GUARD};
use matching_core::prefgen::models::params_from_pairs;
use matching_core::prefgen::{LogWeights, ModelDescriptor, ModelSpec, StreamKey};
use matching_core::{Error, Instance, PreferenceList};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "matchsim", version, about = "Stable matching simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveSide {
    Men,
    Women,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance from a preference model.
    Gen {
        #[arg(long)]
        model: String,
        /// Size of both sides.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        w: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Model parameters as key=value.
        #[arg(long, num_args = 1..)]
        params: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run deferred acceptance.
    Solve {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "men")]
        side: SolveSide,
    },
    /// List the stable husbands of one woman.
    Enumerate {
        file: PathBuf,
        #[arg(long)]
        woman: usize,
        /// JSON array of log-weights indexed by man; her list is redrawn from them.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Block decomposition with respect to the men-optimal matching.
    Blocks { file: PathBuf },
    /// Every stable matching of a small instance.
    Oracle {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GUARD)]
        guard: usize,
    },
    /// Run a catalog experiment.
    Experiment {
        #[arg(long, conflicts_with = "name")]
        config: Option<PathBuf>,
        #[arg(long, required_unless_present = "config")]
        name: Option<String>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, num_args = 1..)]
        params: Vec<String>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check an instance file.
    Validate { file: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Verdicts) => {
            eprintln!("error: some verdicts failed");
            ExitCode::from(1)
        }
    }
}

enum Failure {
    Usage(String),
    Domain(Error),
    Verdicts,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Domain(Error::Io(e)))
}

fn load(path: &Path) -> CliResult<Instance> {
    Ok(Instance::from_json(&read(path)?)?)
}

fn emit(value: &Value) {
    out(&format!("{}\n", serde_json::to_string(value).expect("json value serializes")));
}

/// Writes to stdout; a closed pipe ends the process quietly.
fn out(text: &str) {
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        panic!("failed writing to stdout: {e}");
    }
}

fn with_format(mut value: Value) -> Value {
    if let Value::Object(map) = &mut value {
        map.insert("format".into(), json!(1));
    }
    value
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Gen { model, n, m, w, seed, params, output } => {
            let (m, w) = match (n, m, w) {
                (Some(n), None, None) => (n, n),
                (None, Some(m), Some(w)) => (m, w),
                (Some(_), _, _) => return usage("--n cannot be combined with --m/--w"),
                _ => return usage("give --n, or both --m and --w"),
            };
            let params = params_from_pairs(params.iter().map(String::as_str))?;
            let spec = ModelSpec::from_parts(&model, &params)?;
            if spec.is_random(false) && seed.is_none() {
                return usage(format!("model `{model}` is randomized and needs --seed"));
            }
            let desc = ModelDescriptor {
                format: 1,
                model: spec.name().into(),
                params: spec.params(),
                num_men: m,
                num_women: w,
                seed,
            };
            let built = desc.build(0)?;
            let text = built.instance.to_json();
            let desc_json = serde_json::to_string(&desc).expect("descriptor serializes");
            match output {
                Some(path) => {
                    let sidecar = path.with_extension("model.json");
                    fs::write(&path, &text).map_err(|e| Failure::Domain(Error::Io(e)))?;
                    fs::write(&sidecar, &desc_json).map_err(|e| Failure::Domain(Error::Io(e)))?;
                    eprintln!("wrote {} and {}", path.display(), sidecar.display());
                    out(&format!("{desc_json}\n"));
                }
                None => {
                    out(&format!("{text}\n"));
                    eprintln!("{desc_json}");
                }
            }
        }
        Command::Solve { file, side } => {
            let inst = load(&file)?;
            let (mu, trace) = match side {
                SolveSide::Men => {
                    let (mu, trace) = mpda(&inst);
                    (mu, Some(trace))
                }
                SolveSide::Women => (wpda(&inst), None),
            };
            // Rank of each person's partner in their own list; null when single.
            let men_ranks: Vec<Option<usize>> =
                (0..inst.num_men()).map(|m| mu.wife_of(m).and_then(|w| inst.man(m).rank_of(w))).collect();
            let women_ranks: Vec<Option<usize>> =
                (0..inst.num_women()).map(|w| mu.husband_of(w).and_then(|m| inst.woman(w).rank_of(m))).collect();
            let mut value = json!({
                "side": match side { SolveSide::Men => "men", SolveSide::Women => "women" },
                "matching": mu,
                "ranks": {"men": men_ranks, "women": women_ranks},
            });
            if let Some(trace) = trace {
                value["proposals"] = json!(trace);
            }
            emit(&with_format(value));
        }
        Command::Enumerate { file, woman, weights, seed } => {
            let inst = load(&file)?;
            if woman >= inst.num_women() {
                return Err(Error::IndexOutOfRange {
                    side: matching_core::Side::Woman,
                    index: woman,
                    count: inst.num_women(),
                }
                .into());
            }
            let (e, used) = match weights {
                Some(path) => {
                    let Some(seed) = seed else { return usage("--weights needs --seed") };
                    // null marks a man she does not accept.
                    let logs: Vec<Option<f64>> = serde_json::from_str(&read(&path)?).map_err(Error::from)?;
                    let lw = LogWeights::from_log(
                        logs.iter().enumerate().filter_map(|(m, l)| l.map(|l| (m, l))).collect(),
                    )?;
                    let mut rng = StreamKey::master(seed).aux("enumerate").rng();
                    let (e, inst2) = enumerate_stable_husbands_popularity(&inst, woman, &lw, &mut rng);
                    (e, Some(inst2.woman(woman).as_slice().to_vec()))
                }
                None => (enumerate_stable_husbands(&inst, woman), None),
            };
            let mut v = json!({
                "woman": woman,
                "husbands": e.husbands,
                "count": e.count(),
                "proposals": e.proposals,
            });
            if let Some(list) = used {
                v["woman_list"] = json!(list);
            }
            emit(&with_format(v));
        }
        Command::Blocks { file } => {
            let inst = load(&file)?;
            let bs = BlockStructure::new(&inst);
            let blocks: Vec<[usize; 2]> = bs.block_decomposition().iter().map(|b| [b.l, b.r]).collect();
            let mut v = serde_json::to_value(bs.report()).map_err(Error::from)?;
            v["blocks"] = json!(blocks);
            emit(&with_format(v));
        }
        Command::Oracle { file, guard } => {
            let inst = load(&file)?;
            out(&format!("{}\n", enumerate_all_stable(&inst, guard)?.to_json()));
        }
        Command::Experiment { config, name, n, trials, seed, params, workers, output } => {
            let mut cfg = match (config, name) {
                (Some(path), _) => ExperimentConfig::from_json(&read(&path)?)?,
                (None, Some(name)) => {
                    if !CATALOG.contains(&name.as_str()) {
                        return Err(Error::UnknownExperiment(name).into());
                    }
                    let Some(seed) = seed else { return usage("experiments need --seed") };
                    ExperimentConfig::new(&name, seed)
                }
                (None, None) => return usage("give --config or --name"),
            };
            if !n.is_empty() {
                cfg.n = n;
            }
            if trials.is_some() {
                cfg.trials = trials;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            for (k, v) in params_from_pairs(params.iter().map(String::as_str))? {
                cfg.params.insert(k, v);
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            if output.is_some() {
                cfg.output = output;
            }
            let report = run_experiment(&cfg)?;
            for v in &report.verdicts {
                eprintln!("{v}");
            }
            for t in &report.trends {
                eprintln!("{t}");
            }
            match &cfg.output {
                Some(path) => {
                    let summary = report.write(path)?;
                    eprintln!("wrote {} and {}", path.display(), summary.display());
                    out(&format!("{}\n", report.summary_json()));
                }
                None => out(&report.to_csv()),
            }
            if !report.passed() {
                return Err(Failure::Verdicts);
            }
        }
        Command::Validate { file } => {
            // Parsed without the constructor's checks so every violation is listed.
            let v: Value = serde_json::from_str(&read(&file)?).map_err(Error::from)?;
            let format = v.get("format").and_then(Value::as_u64).unwrap_or(1);
            if format != 1 {
                return Err(Error::FormatVersion(format).into());
            }
            let lists = |key: &str| -> CliResult<Vec<PreferenceList>> {
                Ok(serde_json::from_value(v.get(key).cloned().unwrap_or(Value::Null)).map_err(Error::from)?)
            };
            let inst = Instance::new(lists("men")?, lists("women")?);
            let violations = inst.validate();
            let ok = violations.is_empty();
            emit(&json!({
                "format": 1,
                "valid": ok,
                "men": inst.num_men(),
                "women": inst.num_women(),
                "complete": inst.is_complete(),
                "violations": violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            }));
            if !ok {
                return Err(Error::InvalidInstance(format!("{} violation(s)", violations.len())).into());
            }
        }
    }
    Ok(())
}
