//! Argument parsing and the subcommands.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use otgcf::classifier::{halfspace, score, ModelArtifact};
use otgcf::dataio::synth::{gaussian_mixture_classes, two_gaussians};
use otgcf::dataio::{load_points_csv, write_csv, Standardization};
use otgcf::maps::{MapArtifact, MapMetadata};
use otgcf::methods::{fit_method, Method};
use otgcf::metrics::MetricsRecord;
use otgcf::moo::{nsga2, CounterfactualProblem, Family, NsgaConfig, ScoreFn};
use otgcf::numerics::Matrix;
use otgcf::solvers::{Bounds, SolveStatus};
use otgcf::Error;
use serde::Serialize;

use crate::config::{parse_k_grid, parse_methods, ExperimentConfig};
use crate::experiment::{
    load_model, make_groups, prepare, run_experiment, train_model, write_json, GroupsArtifact, CSV_SCHEMA_VERSION,
};
use crate::profile::{costs_from_csv, performance_profile, write_profile};

#[derive(Debug, Parser)]
#[command(name = "otgcf", version, about = "Group counterfactual explanations as constrained transport maps")]
pub struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic binary dataset.
    Synth(SynthArgs),
    /// Fit the logistic model (penalty chosen by cross-validation) and write its JSON.
    Train(TrainArgs),
    /// Cluster the held-out split into groups and write their JSON.
    Groups(GroupsArgs),
    /// Fit one map for one group, method and K; write the map and its metrics.
    Explain(ExplainArgs),
    /// Map new points with a saved map.
    Apply(ApplyArgs),
    /// Run the full cross-validated protocol.
    Evaluate(EvaluateArgs),
    /// Search map parameters for the (displacement, distortion) Pareto front.
    Pareto(ParetoArgs),
    /// Performance-profile curves from a metrics or timings CSV.
    Profile(ProfileArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthKind {
    Gaussian,
    Mixture,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    kind: SynthKind,
    #[arg(long, default_value_t = 500)]
    n_per_class: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Distance between the class means along the first axis.
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    /// Blobs per class (mixture only).
    #[arg(long, default_value_t = 3)]
    components: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GroupsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 10)]
    clusters_per_label: usize,
    #[arg(long, default_value_t = 200)]
    cap: usize,
    #[arg(long, default_value_t = 20)]
    min_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[arg(long)]
    groups: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    group: usize,
    #[arg(long)]
    method: Method,
    /// `K = k`; `inf` leaves the map unconstrained.
    #[arg(long, default_value_t = 2.0)]
    k: f64,
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds allowed to the bi-Lipschitz baseline.
    #[arg(long, default_value_t = 1800.0)]
    time_cap: f64,
    /// Directory for `map.json`, `metrics.json` and `group.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ApplyArgs {
    #[arg(long)]
    map: PathBuf,
    /// CSV in raw feature units; columns are matched by name.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Flat TOML file; flags given here override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV (repeatable).
    #[arg(long)]
    data: Vec<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated `K = k` values.
    #[arg(long, value_parser = parse_k_grid)]
    k_grid: Option<::std::vec::Vec<f64>>,
    /// Comma-separated method names, or `all`.
    #[arg(long, value_parser = parse_methods)]
    methods: Option<::std::vec::Vec<Method>>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    time_cap: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct ParetoArgs {
    #[arg(long)]
    groups: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    group: usize,
    #[arg(long, default_value = "affine-diag")]
    family: Family,
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    pop: usize,
    #[arg(long, default_value_t = 200)]
    generations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for `front.csv` and `trace.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    #[arg(long)]
    input: PathBuf,
    /// Column to profile, e.g. `w2_sq`, `distortion` or `wall_time`.
    #[arg(long, default_value = "w2_sq")]
    metric: String,
    #[arg(long)]
    theta_max: Option<f64>,
    #[arg(long, default_value_t = 50)]
    grid_points: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `args` (program name first), runs the subcommand and returns the process exit code:
/// 0 on success, 1 on a runtime failure, 2 on a usage error.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn execute(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Groups(a) => groups(a),
        Command::Explain(a) => explain(a),
        Command::Apply(a) => apply(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Pareto(a) => pareto(a),
        Command::Profile(a) => profile(a),
    }
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    if a.n_per_class == 0 || a.dim == 0 {
        bail!("n-per-class and dim must be positive");
    }
    let ds = match a.kind {
        SynthKind::Gaussian => two_gaussians::<f64>(a.n_per_class, a.dim, a.separation, a.seed),
        SynthKind::Mixture => gaussian_mixture_classes::<f64>(a.n_per_class, a.dim, a.components, a.separation, a.seed),
    };
    write_csv(&ds, &a.out, true)?;
    info!("wrote {} rows to {}", ds.n(), a.out.display());
    Ok(())
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let prep = prepare(&a.data.data, &a.data.label_column, a.data.train_fraction, a.data.seed)?;
    let model = train_model(&prep.train, a.folds, a.data.seed)?;
    write_json(&model, &a.out)
}

fn groups(a: GroupsArgs) -> anyhow::Result<()> {
    let model = load_model(&a.model)?;
    let prep = prepare(&a.data.data, &a.data.label_column, a.data.train_fraction, a.data.seed)?;
    if prep.test.feature_names != model.feature_names {
        bail!("model features {:?} do not match the dataset's {:?}", model.feature_names, prep.test.feature_names);
    }
    let grouping = otgcf::dataio::GroupingConfig {
        clusters_per_label: a.clusters_per_label,
        cap: a.cap,
        min_size: a.min_size,
        seed: a.data.seed,
    };
    let set = make_groups(&prep.name, &prep.test, &model.model(), &grouping)?;
    write_json(&set, &a.out)
}

/// Metrics of a single full-group fit, as written by `explain`.
#[derive(Debug, Serialize)]
struct ExplainReport {
    method: String,
    k: f64,
    alpha: f64,
    group: usize,
    target: u8,
    converged: bool,
    status: SolveStatus,
    objective: f64,
    iterations: usize,
    wall_time: f64,
    metrics: MetricsRecord<f64>,
}

fn raw_csv(points: &Matrix<f64>, names: &[String], std: Option<&Standardization<f64>>, path: &Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(names)?;
    for i in 0..points.rows() {
        let row = match std {
            Some(s) => s.inverse(points.row(i)),
            None => points.row(i).to_vec(),
        };
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn check_model(groups: &GroupsArtifact, model: &ModelArtifact<f64>) -> anyhow::Result<()> {
    if groups.feature_names != model.feature_names {
        bail!("groups and model disagree on features");
    }
    Ok(())
}

fn explain(a: ExplainArgs) -> anyhow::Result<()> {
    let set = GroupsArtifact::load(&a.groups)?;
    let model_art = load_model(&a.model)?;
    check_model(&set, &model_art)?;
    let g = set.group(a.group)?;
    let model = model_art.model();
    let hs = halfspace(&model, g.target, a.alpha)?;
    let bounds = Bounds::new(a.k, a.k)?;
    let cfg = otgcf::methods::FitConfig {
        time_cap: Duration::from_secs_f64(a.time_cap),
        ..otgcf::methods::FitConfig::default()
    }
    .with_seed(a.seed);
    let report = fit_method(a.method, &g.points, &hs, bounds, &cfg)?;
    let images = report.map.apply_all(&g.points).or_else(|_| {
        (0..g.points.rows())
            .map(|i| report.map.apply_member(i))
            .collect::<otgcf::Result<Vec<_>>>()
            .and_then(|rows| Matrix::from_rows(&rows))
    })?;
    let metrics = MetricsRecord::compute(&g.points, &images, &model, g.target, a.alpha, report.map.is_pointwise())?;

    std::fs::create_dir_all(&a.out)?;
    let finite = a.k.is_finite().then_some(a.k);
    let artifact = MapArtifact {
        map: report.map.clone(),
        metadata: MapMetadata {
            method: a.method.name().to_string(),
            k_upper: finite,
            k_lower: finite,
            alpha: a.alpha,
            group_id: g.id,
            target_class: g.target,
            feature_names: set.feature_names.clone(),
            standardization: Some(set.standardization.clone()),
        },
    };
    artifact.save(a.out.join("map.json"))?;
    let out = ExplainReport {
        method: a.method.name().to_string(),
        k: a.k,
        alpha: a.alpha,
        group: g.id,
        target: g.target,
        converged: report.converged,
        status: report.status,
        objective: report.objective,
        iterations: report.iterations,
        wall_time: report.wall_time,
        metrics,
    };
    write_json(&out, &a.out.join("metrics.json"))?;
    raw_csv(&g.points, &set.feature_names, Some(&set.standardization), &a.out.join("group.csv"))?;
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn apply(a: ApplyArgs) -> anyhow::Result<()> {
    let art = MapArtifact::<f64>::load(&a.map).with_context(|| format!("loading {}", a.map.display()))?;
    if art.map.is_pointwise() {
        return Err(Error::NotGeneralizable.into());
    }
    let names = &art.metadata.feature_names;
    let raw = load_points_csv::<f64>(&a.input, names)?;
    let std = art.metadata.standardization.as_ref();
    let z = match std {
        Some(s) => {
            let rows: Vec<Vec<f64>> = (0..raw.rows()).map(|i| s.transform(raw.row(i))).collect();
            Matrix::from_rows(&rows)?
        }
        None => raw,
    };
    let mapped = art.map.apply_all(&z)?;
    raw_csv(&mapped, names, std, &a.out)
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if !a.data.is_empty() {
        cfg.data = a.data;
    }
    if let Some(v) = a.label_column {
        cfg.label_column = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.k_grid {
        cfg.k_grid = v;
    }
    if let Some(v) = a.methods {
        cfg.methods = v;
    }
    if let Some(v) = a.folds {
        cfg.folds = v;
    }
    if let Some(v) = a.out {
        cfg.out = v;
    }
    if let Some(v) = a.time_cap {
        cfg.time_cap = v;
    }
    if let Some(v) = a.threads {
        cfg.threads = v;
    }
    let summary = run_experiment(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

#[derive(Debug, Serialize)]
struct FrontRow {
    schema_version: u32,
    family: String,
    member: usize,
    feasible: bool,
    w2_sq: f64,
    distortion: f64,
    violation: f64,
    /// Genes joined by `;`.
    params: String,
}

#[derive(Debug, Serialize)]
struct TraceRow {
    schema_version: u32,
    generation: usize,
    hypervolume: f64,
}

fn pareto(a: ParetoArgs) -> anyhow::Result<()> {
    let set = GroupsArtifact::load(&a.groups)?;
    let model_art = load_model(&a.model)?;
    check_model(&set, &model_art)?;
    let g = set.group(a.group)?;
    let model = model_art.model();
    let target = g.target;
    // The search sees the classifier only through this callback.
    let s: ScoreFn = Arc::new(move |x: &[f64]| score(&model, x, target).unwrap_or(0.0));
    let problem = CounterfactualProblem::new(a.family, g.points.clone(), s, a.alpha)?;
    if a.pop % 2 != 0 {
        bail!("population size must be even, got {}", a.pop);
    }
    let res = nsga2(
        &problem,
        &NsgaConfig {
            pop: a.pop,
            generations: a.generations,
            seed: a.seed,
            ..NsgaConfig::default()
        },
    );
    std::fs::create_dir_all(&a.out)?;
    let mut w = csv::Writer::from_path(a.out.join("front.csv"))?;
    for (i, m) in res.front.members.iter().enumerate() {
        w.serialize(FrontRow {
            schema_version: CSV_SCHEMA_VERSION,
            family: a.family.name().to_string(),
            member: i,
            feasible: m.eval.feasible(),
            w2_sq: m.eval.objectives[0],
            distortion: m.eval.objectives[1],
            violation: m.eval.violation,
            params: m.params.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
        })?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(a.out.join("trace.csv"))?;
    for (generation, &hypervolume) in res.hv_trace.iter().enumerate() {
        w.serialize(TraceRow {
            schema_version: CSV_SCHEMA_VERSION,
            generation,
            hypervolume,
        })?;
    }
    w.flush()?;
    info!("{} front members after {} evaluations", res.front.members.len(), res.evaluations);
    Ok(())
}

#[derive(Debug, Serialize)]
struct ProfileSummary<'a> {
    metric: &'a str,
    problems: usize,
    excluded: usize,
    theta_max: f64,
}

fn profile(a: ProfileArgs) -> anyhow::Result<()> {
    let (methods, costs) = costs_from_csv(&a.input, &a.metric)?;
    let p = performance_profile(&methods, &costs, a.theta_max, a.grid_points);
    if p.excluded > 0 {
        log::warn!("{} problems excluded: every method failed", p.excluded);
    }
    write_profile(&p, &a.metric, &a.out)?;
    let summary = ProfileSummary {
        metric: &a.metric,
        problems: p.problems,
        excluded: p.excluded,
        theta_max: p.theta_max,
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
