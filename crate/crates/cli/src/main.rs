use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use wce_core::baselines::{
    reweighting_estimator, sample_mean_estimator, selective_prediction_estimator, subgroup_estimator, Baseline,
    EmptyGroupRule,
};
use wce_core::collectors::{
    gen_importance, gen_selective, gen_snowball, metadata_path, GeneratorMetadata, ImportanceArgs, SelectiveArgs,
    SnowballArgs, WindowBoundary,
};
use wce_core::experiments::{
    evaluate_grid, run_experiment, spatial_values, write_records_csv, Dataset, ExperimentConfig, ExperimentKind,
};
use wce_core::lowerbound::{adversarial_values, best_s_bruteforce, check_non_expanding};
use wce_core::optimizer::{run_with_doubling, OgdConfig};
use wce_core::{load_distribution, NormRegime, SampleTargetDistribution, SemilinearEstimator};

#[derive(Parser)]
#[command(name = "wce", version, about = "Worst-case error analysis for semilinear mean estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sample-target distribution and its metadata sidecar.
    Generate(GenerateArgs),
    /// Minimize the worst-case error with online gradient descent.
    Optimize(OptimizeArgs),
    /// Evaluate estimators on datasets.
    Evaluate(EvaluateArgs),
    /// Reproduce one of the experiment tables.
    Experiment(ExperimentArgs),
    /// Non-expansion certificate and adversarial data values.
    Lowerbound(LowerboundArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Importance,
    Snowball,
    Selective,
}

#[derive(Clone, Copy, ValueEnum)]
enum Boundary {
    Disjoint,
    Overlapping,
}

impl From<Boundary> for WindowBoundary {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::Disjoint => WindowBoundary::Disjoint,
            Boundary::Overlapping => WindowBoundary::Overlapping,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EmptyGroup {
    DropEmpty,
    ZeroMean,
}

impl From<EmptyGroup> for EmptyGroupRule {
    fn from(e: EmptyGroup) -> Self {
        match e {
            EmptyGroup::DropEmpty => EmptyGroupRule::DropEmpty,
            EmptyGroup::ZeroMean => EmptyGroupRule::ZeroMean,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Regime {
    L2,
    Linf,
}

impl From<Regime> for NormRegime {
    fn from(r: Regime) -> Self {
        match r {
            Regime::L2 => NormRegime::L2,
            Regime::Linf => NormRegime::Linf,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    generator: Generator,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Snowball sample size.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    neighbors: Option<usize>,
    #[arg(long)]
    recruit: Option<usize>,
    /// Selective window lengths.
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<usize>>,
    /// Importance inclusion probabilities of the two groups.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    probs: Option<Vec<f64>>,
    /// Importance group boundary.
    #[arg(long)]
    split: Option<usize>,
    #[arg(long, value_enum, default_value = "disjoint")]
    boundary: Boundary,
    /// Truncate selective windows at n instead of dropping them.
    #[arg(long)]
    clip: bool,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Distribution JSON.
    input: PathBuf,
    #[arg(long, value_enum)]
    regime: Regime,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, default_value_t = 1000)]
    t_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    p_init: Option<f64>,
    #[arg(long)]
    max_doublings: Option<usize>,
    /// Directory for estimator.json, trace.csv and summary.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Distribution JSON.
    input: PathBuf,
    /// Baseline name or estimator JSON path; repeatable.
    #[arg(long = "estimator", required = true)]
    estimators: Vec<String>,
    /// constant, intergroup, intragroup, spatial:<points>, file:<values>,
    /// worst-linf or worst-l2; repeatable.
    #[arg(long = "dataset", required = true)]
    datasets: Vec<String>,
    /// Generator sidecar; defaults to `<input stem>.meta.json`.
    #[arg(long)]
    meta: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "drop-empty")]
    empty_group: EmptyGroup,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_parser = ["importance", "snowball", "selective"])]
    name: String,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, default_value_t = 1000)]
    t_max: usize,
    #[arg(long, value_enum, default_value = "zero-mean")]
    empty_group: EmptyGroup,
    #[arg(long, value_enum, default_value = "disjoint")]
    boundary: Boundary,
    #[arg(long)]
    clip: bool,
    /// Table CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Provenance JSON.
    #[arg(long)]
    provenance: Option<PathBuf>,
}

#[derive(Args)]
struct LowerboundArgs {
    /// Distribution JSON.
    input: PathBuf,
    /// Explicit set S; brute force when absent.
    #[arg(long = "set", value_delimiter = ',')]
    set: Option<Vec<usize>>,
    /// Baseline name or estimator JSON path to attack.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    meta: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "drop-empty")]
    empty_group: EmptyGroup,
    /// Output JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> anyhow::Result<()> {
    let (dist, meta) = match args.generator {
        Generator::Importance => {
            let d = ImportanceArgs::default();
            let n = args.n.unwrap_or(d.n);
            let probs = match args.probs.as_deref() {
                Some([a, b]) => (*a, *b),
                _ => d.probs,
            };
            let a = ImportanceArgs {
                n,
                split: args.split.unwrap_or(n / 2),
                probs,
                m: args.m.unwrap_or(d.m),
                seed: args.seed,
            };
            let (dist, gs) = gen_importance(&a)?;
            (dist, GeneratorMetadata::importance(&a, gs)?)
        }
        Generator::Snowball => {
            let d = SnowballArgs::default();
            let a = SnowballArgs {
                n: args.n.unwrap_or(d.n),
                k: args.k.unwrap_or(d.k),
                num_neighbors: args.neighbors.unwrap_or(d.num_neighbors),
                recruit: args.recruit.unwrap_or(d.recruit),
                m: args.m.unwrap_or(d.m),
                seed: args.seed,
            };
            let (dist, points) = gen_snowball(&a)?;
            (dist, GeneratorMetadata::snowball(&a, points)?)
        }
        Generator::Selective => {
            let d = SelectiveArgs::default();
            let a = SelectiveArgs {
                n: args.n.unwrap_or(d.n),
                windows: args.windows.unwrap_or(d.windows),
                boundary: args.boundary.into(),
                clip: args.clip,
            };
            let (dist, windows) = gen_selective(&a)?;
            (dist, GeneratorMetadata::selective(&a, windows)?)
        }
    };
    dist.save(&args.out)?;
    meta.save(metadata_path(&args.out))?;
    println!("{} {}", args.out.display(), dist.m());
    Ok(())
}

#[derive(Serialize)]
struct OptimizeSummary {
    regime: NormRegime,
    best_value: f64,
    best_t: usize,
    iterations: usize,
    p_final: f64,
    doublings: usize,
    accepted: bool,
    radius: f64,
    beta: f64,
    theoretical_iterations: f64,
    regret_bound: f64,
    unconverged_subproblems: usize,
}

fn cmd_optimize(args: OptimizeArgs) -> anyhow::Result<()> {
    let dist = load_distribution(&args.input)?;
    let cfg = OgdConfig {
        eps: args.eps,
        t_max: args.t_max,
        p_init: args.p_init,
        p_doublings_max: args.max_doublings,
        regime: args.regime.into(),
        seed: args.seed,
    };
    let out = run_with_doubling(&dist, &cfg)?;
    fs::create_dir_all(&args.out_dir)?;
    out.estimator.save(args.out_dir.join("estimator.json"))?;
    out.trace.save_csv(args.out_dir.join("trace.csv"))?;
    let t = &out.trace;
    let summary = OptimizeSummary {
        regime: cfg.regime,
        best_value: t.best_value,
        best_t: t.best_t,
        iterations: t.iterations(),
        p_final: out.p_final,
        doublings: out.doublings,
        accepted: out.accepted,
        radius: t.radius,
        beta: t.beta,
        theoretical_iterations: t.theoretical_iterations,
        regret_bound: t.regret_bound,
        unconverged_subproblems: t.unconverged_subproblems,
    };
    fs::write(args.out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    println!("{}", args.out_dir.display());
    Ok(())
}

struct EstimatorSource<'a> {
    dist: &'a SampleTargetDistribution,
    meta_path: PathBuf,
    meta: Option<GeneratorMetadata>,
    empty_group: EmptyGroupRule,
}

impl EstimatorSource<'_> {
    fn new<'a>(
        dist: &'a SampleTargetDistribution,
        input: &Path,
        meta: Option<PathBuf>,
        empty_group: EmptyGroup,
    ) -> EstimatorSource<'a> {
        EstimatorSource {
            dist,
            meta_path: meta.unwrap_or_else(|| metadata_path(input)),
            meta: None,
            empty_group: empty_group.into(),
        }
    }

    fn metadata(&mut self) -> anyhow::Result<&GeneratorMetadata> {
        if self.meta.is_none() {
            let m = GeneratorMetadata::load(&self.meta_path)
                .with_context(|| format!("reading metadata {}", self.meta_path.display()))?;
            self.meta = Some(m);
        }
        Ok(self.meta.as_ref().expect("just loaded"))
    }

    fn estimator(&mut self, arg: &str) -> anyhow::Result<SemilinearEstimator> {
        let Ok(baseline) = arg.parse::<Baseline>() else {
            let path = Path::new(arg);
            if !path.exists() {
                return Err(wce_core::Error::Unknown {
                    kind: "estimator",
                    name: arg.to_string(),
                }
                .into());
            }
            let a = SemilinearEstimator::load(path)?;
            a.check_against(self.dist)?;
            return Ok(a);
        };
        let dist = self.dist;
        let rule = self.empty_group;
        Ok(match baseline {
            Baseline::SampleMean => sample_mean_estimator(dist),
            Baseline::Reweighting | Baseline::Subgroup => {
                let gs = self
                    .metadata()?
                    .groups
                    .clone()
                    .ok_or_else(|| anyhow!("metadata has no group structure"))?;
                if baseline == Baseline::Reweighting {
                    reweighting_estimator(dist, &gs)?
                } else {
                    subgroup_estimator(dist, &gs, rule)?
                }
            }
            Baseline::SelectivePrediction => {
                let windows = self
                    .metadata()?
                    .windows
                    .clone()
                    .ok_or_else(|| anyhow!("metadata has no window lengths"))?;
                selective_prediction_estimator(dist, &windows)?
            }
        })
    }
}

fn read_points(path: &Path) -> anyhow::Result<Vec<[f64; 2]>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(points) = serde_json::from_str::<Vec<[f64; 2]>>(&text) {
        return Ok(points);
    }
    let meta: GeneratorMetadata = serde_json::from_str(&text)?;
    meta.points.ok_or_else(|| anyhow!("{} has no points", path.display()))
}

fn parse_dataset(arg: &str) -> anyhow::Result<Dataset> {
    Ok(match arg {
        "constant" => Dataset::Constant,
        "intergroup" => Dataset::Intergroup,
        "intragroup" => Dataset::Intragroup,
        "worst-linf" => Dataset::WorstLinf,
        "worst-l2" => Dataset::WorstL2,
        _ => {
            if let Some(p) = arg.strip_prefix("spatial:") {
                Dataset::Values {
                    name: "spatial".into(),
                    x: spatial_values(&read_points(Path::new(p))?),
                }
            } else if let Some(p) = arg.strip_prefix("file:") {
                let text = fs::read_to_string(p).with_context(|| format!("reading {p}"))?;
                Dataset::Values {
                    name: Path::new(p)
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "file".into()),
                    x: serde_json::from_str(&text)?,
                }
            } else {
                return Err(wce_core::Error::Unknown {
                    kind: "dataset",
                    name: arg.to_string(),
                }
                .into());
            }
        }
    })
}

fn cmd_evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let dist = load_distribution(&args.input)?;
    let datasets = args
        .datasets
        .iter()
        .map(|d| parse_dataset(d))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut ctx = EstimatorSource::new(&dist, &args.input, args.meta, args.empty_group);
    let estimators = args
        .estimators
        .iter()
        .map(|s| Ok((s.clone(), ctx.estimator(s)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let records = evaluate_grid(&estimators, &dist, &datasets, args.eps, args.seed)?;
    let mut buf = Vec::new();
    write_records_csv(&records, &mut buf)?;
    write_output(args.out.as_deref(), &buf)
}

fn cmd_experiment(args: ExperimentArgs) -> anyhow::Result<()> {
    let kind: ExperimentKind = args.name.parse()?;
    let cfg = ExperimentConfig {
        seeds: args.seeds,
        m: args.m,
        eps: args.eps,
        t_max: args.t_max,
        empty_group: args.empty_group.into(),
        boundary: args.boundary.into(),
        clip: args.clip,
    };
    let out = run_experiment(kind, &cfg)?;
    let mut buf = Vec::new();
    out.table.write_csv(&mut buf)?;
    write_output(args.out.as_deref(), &buf)?;
    if let Some(p) = &args.provenance {
        out.provenance.save(p)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LowerboundReport {
    certificate: wce_core::lowerbound::NonExpansionCertificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    adversary: Option<AdversaryReport>,
}

#[derive(Serialize)]
struct AdversaryReport {
    estimator: String,
    x: Vec<f64>,
    achieved_error: f64,
    bound: f64,
    effective_set: Vec<usize>,
}

fn cmd_lowerbound(args: LowerboundArgs) -> anyhow::Result<()> {
    let dist = load_distribution(&args.input)?;
    let certificate = match &args.set {
        Some(s) => check_non_expanding(&dist, s)?,
        None => best_s_bruteforce(&dist)?,
    };
    let adversary = match &args.estimator {
        Some(arg) => {
            let mut ctx = EstimatorSource::new(&dist, &args.input, args.meta.clone(), args.empty_group);
            let a = ctx.estimator(arg)?;
            let out = adversarial_values(&dist, &certificate.set, &a)?;
            let bound = certificate.alpha / 4.0;
            if out.achieved_error < bound - 1e-9 {
                bail!("achieved error {} is below alpha/4 = {bound}", out.achieved_error);
            }
            Some(AdversaryReport {
                estimator: arg.clone(),
                x: out.x.into_vec(),
                achieved_error: out.achieved_error,
                bound,
                effective_set: out.effective_set,
            })
        }
        None => None,
    };
    let report = LowerboundReport { certificate, adversary };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_output(args.out.as_deref(), text.as_bytes())
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("WCE_THREADS") {
        let n: usize = v.parse().with_context(|| format!("WCE_THREADS={v} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Lowerbound(a) => cmd_lowerbound(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<wce_core::Error>().map_or(1, |c| c.code());
            ExitCode::from(code as u8)
        }
    }
}
