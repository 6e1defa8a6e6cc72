//! Experiment configuration: a flat TOML file whose keys mirror the command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use otgcf::dataio::GroupingConfig;
use otgcf::gmm::EmConfig;
use otgcf::methods::{FitConfig, Method};
use otgcf::solvers::SolverSettings;
use serde::{Deserialize, Serialize};

pub const DEFAULT_K_GRID: [f64; 5] = [1.01, 1.5, 2.0, 3.5, 5.0];

/// Every key is optional in the file; missing keys take the defaults below.
///
/// ```toml
/// data = ["adult.csv"]
/// seed = 0
/// alpha = 0.8
/// k_grid = [1.01, 2.0]
/// methods = ["affine-psd", "gaussian-scaled"]
/// folds = 10
/// out = "results"
/// time_cap = 1800.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: Vec<PathBuf>,
    pub label_column: String,
    pub seed: u64,
    /// Classifier confidence required of every counterfactual.
    pub alpha: f64,
    /// `K = k` values; each is one column of the experiment grid.
    pub k_grid: Vec<f64>,
    pub methods: Vec<Method>,
    /// Cross-validation folds within each group.
    pub folds: usize,
    pub out: PathBuf,
    /// Seconds allowed to one bi-Lipschitz fit.
    pub time_cap: f64,
    pub train_fraction: f64,
    /// Folds of the penalty grid search.
    pub model_folds: usize,
    pub clusters_per_label: usize,
    pub group_cap: usize,
    pub group_min_size: usize,
    /// ADMM residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub gmm_components: usize,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let g = GroupingConfig::default();
        Self {
            data: Vec::new(),
            label_column: "label".into(),
            seed: 0,
            alpha: 0.8,
            k_grid: DEFAULT_K_GRID.to_vec(),
            methods: Method::ALL.to_vec(),
            folds: 10,
            out: PathBuf::from("results"),
            time_cap: 1800.0,
            train_fraction: 0.8,
            model_folds: 10,
            clusters_per_label: g.clusters_per_label,
            group_cap: g.cap,
            group_min_size: g.min_size,
            tol: 1e-9,
            max_iter: 50_000,
            restarts: 5,
            gmm_components: 3,
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must lie in (0, 1), got {}", self.alpha);
        }
        if self.k_grid.is_empty() {
            bail!("k_grid is empty");
        }
        if let Some(k) = self.k_grid.iter().find(|&&k| !(k >= 1.0)) {
            bail!("every K must be at least 1, got {k}");
        }
        if self.methods.is_empty() {
            bail!("no methods selected");
        }
        if self.folds < 2 {
            bail!("folds must be at least 2, got {}", self.folds);
        }
        if !(self.time_cap > 0.0) {
            bail!("time_cap must be positive");
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            bail!("solver tolerance and iteration cap must be positive");
        }
        Ok(())
    }

    pub fn fit_config(&self) -> FitConfig<f64> {
        FitConfig {
            settings: SolverSettings {
                tol_primal: self.tol,
                tol_dual: self.tol,
                max_iter: self.max_iter,
                ..SolverSettings::default()
            },
            restarts: self.restarts,
            time_cap: Duration::from_secs_f64(self.time_cap),
            gmm_components: self.gmm_components,
            em: EmConfig {
                seed: self.seed,
                ..EmConfig::default()
            },
            seed: self.seed,
        }
    }

    pub fn grouping(&self) -> GroupingConfig {
        GroupingConfig {
            clusters_per_label: self.clusters_per_label,
            cap: self.group_cap,
            min_size: self.group_min_size,
            seed: self.seed,
        }
    }
}

/// Parses `"1.01,2,5"`.
pub fn parse_k_grid(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad K value '{t}': {e}")))
        .collect()
}

/// Parses `"affine-psd,gmm"`; `"all"` selects every method.
pub fn parse_methods(s: &str) -> Result<Vec<Method>, String> {
    if s.trim() == "all" {
        return Ok(Method::ALL.to_vec());
    }
    s.split(',').map(|t| t.trim().parse::<Method>().map_err(|e| e.to_string())).collect()
}
