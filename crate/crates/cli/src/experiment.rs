//! The end-to-end protocol: split, train, group, then cross-validate every (group, method, K) cell.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::{error, info, warn};
use otgcf::classifier::{fit_logistic, grid_search_cv, LinearModel, ModelArtifact};
use otgcf::dataio::{build_groups, load_csv, split, standardize, Dataset, GroupingConfig, Standardization};
use otgcf::methods::{FitConfig, Method};
use otgcf::metrics::{crossval_evaluate, CrossValResult, Target};
use otgcf::numerics::Matrix;
use otgcf::solvers::Bounds;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// Bumped whenever a column of an emitted CSV changes meaning or position.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// One row of `metrics.csv`: one fold of one cell, or the single evaluation of a pointwise
/// baseline (`fold = "full"`), or a cell whose evaluation errored (`fold = "error"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub schema_version: u32,
    pub dataset: String,
    pub seed: u64,
    pub group: usize,
    pub label: u8,
    pub target: u8,
    pub group_size: usize,
    pub method: String,
    pub k_upper: f64,
    pub k_lower: f64,
    pub fold: String,
    pub converged: bool,
    pub w2_sq: Option<f64>,
    pub emp_upper: Option<f64>,
    pub emp_lower: Option<f64>,
    pub distortion: Option<f64>,
    pub collapsed: Option<bool>,
    pub validity: Option<f64>,
    pub validity_trivial: Option<bool>,
    pub n_eval: Option<usize>,
    pub objective: Option<f64>,
    pub error: Option<String>,
}

/// One row of `timings.csv`. Kept apart from the metrics so the latter stay byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub schema_version: u32,
    pub dataset: String,
    pub seed: u64,
    pub group: usize,
    pub method: String,
    pub k_upper: f64,
    pub fold: String,
    pub converged: bool,
    pub wall_time: f64,
}

/// Groups in standardized units, with everything needed to fit and score them later.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupsArtifact {
    pub schema_version: u32,
    pub dataset: String,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub standardization: Standardization<f64>,
    pub groups: Vec<GroupEntry>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupEntry {
    pub id: usize,
    /// Predicted label shared by the members.
    pub label: u8,
    /// Class the counterfactuals should reach.
    pub target: u8,
    /// Rows of the held-out split.
    pub indices: Vec<usize>,
    pub points: Matrix<f64>,
}

impl GroupsArtifact {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn group(&self, id: usize) -> anyhow::Result<&GroupEntry> {
        self.groups
            .iter()
            .find(|g| g.id == id)
            .with_context(|| format!("no group {id} (have {})", self.groups.len()))
    }
}

pub fn load_model(path: &Path) -> anyhow::Result<ModelArtifact<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<S: Serialize>(value: &S, path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

pub fn dataset_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
}

/// A standardized dataset with its seeded train/test split.
pub struct Prepared {
    pub name: String,
    pub train: Dataset<f64>,
    pub test: Dataset<f64>,
}

pub fn prepare(path: &Path, label_column: &str, train_fraction: f64, seed: u64) -> anyhow::Result<Prepared> {
    let raw = load_csv::<f64>(path, label_column).with_context(|| format!("loading {}", path.display()))?;
    for w in &raw.warnings {
        warn!("{}: {w}", path.display());
    }
    let ds = standardize(&raw);
    let (train, test) = split(&ds, train_fraction, seed)?;
    Ok(Prepared {
        name: dataset_name(path),
        train,
        test,
    })
}

/// Penalty chosen by cross-validated cross-entropy, then refitted on the whole training split.
pub fn train_model(train: &Dataset<f64>, folds: usize, seed: u64) -> anyhow::Result<ModelArtifact<f64>> {
    let search = grid_search_cv(&train.x, &train.y, folds, seed)?;
    let fit = fit_logistic(&train.x, &train.y, search.best_penalty)?;
    if !fit.converged {
        warn!(
            "logistic fit did not converge (penalty {}, separable: {})",
            search.best_penalty, fit.separable
        );
    }
    Ok(ModelArtifact {
        feature_names: train.feature_names.clone(),
        weights: fit.model.weights.clone(),
        intercept: fit.model.intercept,
        l2_penalty: fit.model.l2_penalty,
        standardization: train.standardization.clone(),
        label_values: train.label_values.clone(),
        cv_cross_entropy: Some(search.cv_cross_entropy),
        converged: fit.converged,
    })
}

pub fn make_groups(
    name: &str,
    test: &Dataset<f64>,
    model: &LinearModel<f64>,
    grouping: &GroupingConfig,
) -> anyhow::Result<GroupsArtifact> {
    let set = build_groups(test, model, grouping)?;
    for w in &set.warnings {
        warn!("{name}: {w}");
    }
    Ok(GroupsArtifact {
        schema_version: CSV_SCHEMA_VERSION,
        dataset: name.to_string(),
        seed: grouping.seed,
        feature_names: test.feature_names.clone(),
        standardization: test.standardization.clone(),
        groups: set
            .groups
            .into_iter()
            .map(|g| GroupEntry {
                id: g.id,
                label: g.label,
                target: 1 - g.label,
                indices: g.indices,
                points: g.points,
            })
            .collect(),
        warnings: set.warnings,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub datasets: usize,
    pub skipped_datasets: Vec<String>,
    pub cells: usize,
    pub converged_cells: usize,
    pub rows: usize,
    pub metrics_path: PathBuf,
    pub timings_path: PathBuf,
}

struct Cell<'a> {
    group: &'a GroupEntry,
    method: Method,
    k: f64,
}

fn fold_label(fold: Option<usize>) -> String {
    fold.map_or_else(|| "full".to_string(), |f| f.to_string())
}

fn cell_rows(
    dataset: &str,
    seed: u64,
    cell: &Cell<'_>,
    result: anyhow::Result<CrossValResult<f64>>,
) -> (Vec<MetricsRow>, Vec<TimingRow>) {
    let base = MetricsRow {
        schema_version: CSV_SCHEMA_VERSION,
        dataset: dataset.to_string(),
        seed,
        group: cell.group.id,
        label: cell.group.label,
        target: cell.group.target,
        group_size: cell.group.points.rows(),
        method: cell.method.name().to_string(),
        k_upper: cell.k,
        k_lower: cell.k,
        fold: String::new(),
        converged: false,
        w2_sq: None,
        emp_upper: None,
        emp_lower: None,
        distortion: None,
        collapsed: None,
        validity: None,
        validity_trivial: None,
        n_eval: None,
        objective: None,
        error: None,
    };
    let timing = |fold: String, converged: bool, wall_time: f64| TimingRow {
        schema_version: CSV_SCHEMA_VERSION,
        dataset: dataset.to_string(),
        seed,
        group: cell.group.id,
        method: base.method.clone(),
        k_upper: cell.k,
        fold,
        converged,
        wall_time,
    };
    match result {
        Err(e) => {
            let row = MetricsRow {
                fold: "error".into(),
                error: Some(format!("{e:#}")),
                ..base.clone()
            };
            (vec![row], vec![timing("error".into(), false, 0.0)])
        }
        Ok(cv) => {
            let mut rows = Vec::with_capacity(cv.folds.len());
            let mut times = Vec::with_capacity(cv.folds.len());
            for f in cv.folds {
                let m = f.metrics.as_ref();
                rows.push(MetricsRow {
                    fold: fold_label(f.fold),
                    converged: f.converged,
                    w2_sq: m.map(|r| r.w2_sq),
                    emp_upper: m.and_then(|r| r.emp_upper),
                    emp_lower: m.and_then(|r| r.emp_lower),
                    distortion: m.and_then(|r| r.distortion),
                    collapsed: m.map(|r| r.collapsed),
                    validity: m.map(|r| r.validity),
                    validity_trivial: m.map(|r| r.validity_trivial),
                    n_eval: m.map(|r| r.n_eval),
                    objective: f.objective,
                    error: f.error.clone(),
                    ..base.clone()
                });
                times.push(timing(fold_label(f.fold), f.converged, f.wall_time));
            }
            (rows, times)
        }
    }
}

/// Cross-validates every cell of one prepared dataset. Cells run in parallel; the returned rows
/// are in cell order (group, method, K) regardless of scheduling.
pub fn evaluate_groups(
    groups: &GroupsArtifact,
    model: &LinearModel<f64>,
    config: &ExperimentConfig,
    fit: &FitConfig<f64>,
) -> (Vec<MetricsRow>, Vec<TimingRow>, usize, usize) {
    let cells: Vec<Cell<'_>> = groups
        .groups
        .iter()
        .flat_map(|g| {
            config
                .methods
                .iter()
                .flat_map(move |&m| config.k_grid.iter().map(move |&k| Cell { group: g, method: m, k }))
        })
        .collect();
    let outputs: Vec<(Vec<MetricsRow>, Vec<TimingRow>, bool)> = cells
        .par_iter()
        .map(|cell| {
            let target = Target {
                model,
                class: cell.group.target,
                alpha: config.alpha,
            };
            let result = Bounds::new(cell.k, cell.k)
                .map_err(anyhow::Error::from)
                .and_then(|b| {
                    crossval_evaluate(&cell.group.points, &target, cell.method, b, fit, config.folds, config.seed)
                        .map_err(anyhow::Error::from)
                });
            let ok = result.as_ref().is_ok_and(|r| r.converged());
            let (rows, times) = cell_rows(&groups.dataset, config.seed, cell, result);
            (rows, times, ok)
        })
        .collect();
    let n_cells = outputs.len();
    let mut converged = 0;
    let mut rows = Vec::new();
    let mut times = Vec::new();
    for (r, t, ok) in outputs {
        rows.extend(r);
        times.extend(t);
        converged += usize::from(ok);
    }
    (rows, times, n_cells, converged)
}

fn write_rows<S: Serialize>(rows: &[S], path: &Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the full protocol on every configured dataset and writes `metrics.csv`, `timings.csv`
/// and per-dataset model and group JSON under `config.out`.
///
/// A dataset that cannot be loaded or prepared is logged and skipped; a failing cell becomes a
/// non-converged row. Only configuration and output errors abort the run.
pub fn run_experiment(config: &ExperimentConfig) -> anyhow::Result<ExperimentSummary> {
    config.validate()?;
    if config.data.is_empty() {
        anyhow::bail!("no datasets configured");
    }
    fs::create_dir_all(&config.out).with_context(|| format!("creating {}", config.out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.threads).build()?;
    let fit = config.fit_config();

    let mut summary = ExperimentSummary {
        metrics_path: config.out.join("metrics.csv"),
        timings_path: config.out.join("timings.csv"),
        ..ExperimentSummary::default()
    };
    let mut all_rows = Vec::new();
    let mut all_times = Vec::new();
    for path in &config.data {
        let staged = (|| -> anyhow::Result<(GroupsArtifact, ModelArtifact<f64>)> {
            let prep = prepare(path, &config.label_column, config.train_fraction, config.seed)?;
            let model = train_model(&prep.train, config.model_folds, config.seed)?;
            let groups = make_groups(&prep.name, &prep.test, &model.model(), &config.grouping())?;
            Ok((groups, model))
        })();
        let (groups, model) = match staged {
            Ok(v) => v,
            Err(e) => {
                error!("skipping {}: {e:#}", path.display());
                summary.skipped_datasets.push(path.display().to_string());
                continue;
            }
        };
        let dir = config.out.join(&groups.dataset);
        write_json(&model, &dir.join("model.json"))?;
        write_json(&groups, &dir.join("groups.json"))?;
        info!("{}: {} groups", groups.dataset, groups.groups.len());

        let (rows, times, cells, ok) = pool.install(|| evaluate_groups(&groups, &model.model(), config, &fit));
        info!("{}: {ok}/{cells} cells converged", groups.dataset);
        summary.datasets += 1;
        summary.cells += cells;
        summary.converged_cells += ok;
        all_rows.extend(rows);
        all_times.extend(times);
    }
    summary.rows = all_rows.len();
    write_rows(&all_rows, &summary.metrics_path)?;
    write_rows(&all_times, &summary.timings_path)?;
    Ok(summary)
}
