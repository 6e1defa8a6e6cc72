//! Dolan–Moré performance profiles.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

/// Costs at or below this are treated as this when forming ratios against a zero best cost.
pub const MIN_COST: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    pub method: String,
    /// `(θ, fraction of problems with ratio ≤ θ)`, θ ascending.
    pub points: Vec<(f64, f64)>,
}

impl ProfileCurve {
    /// Fraction at the largest grid point not above `theta`.
    pub fn at(&self, theta: f64) -> f64 {
        self.points.iter().take_while(|p| p.0 <= theta).last().map_or(0.0, |p| p.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub curves: Vec<ProfileCurve>,
    /// Problems that entered the ratios.
    pub problems: usize,
    /// Problems dropped because every method failed on them.
    pub excluded: usize,
    pub theta_max: f64,
}

/// Performance ratios `r[p][m] = cost[p][m] / min_m cost[p][m]`; failed cells (non-finite cost)
/// get `+∞`. Rows where every method failed are dropped.
pub fn performance_ratios(costs: &[Vec<f64>]) -> (Vec<Vec<f64>>, usize) {
    let mut excluded = 0;
    let mut ratios = Vec::new();
    for row in costs {
        let best = row.iter().copied().filter(|c| c.is_finite()).fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            excluded += 1;
            continue;
        }
        ratios.push(
            row.iter()
                .map(|&c| match c {
                    c if !c.is_finite() => f64::INFINITY,
                    c if c == best => 1.0,
                    c => c / best.max(MIN_COST),
                })
                .collect(),
        );
    }
    (ratios, excluded)
}

/// Profile curves on a log-spaced grid over `[1, θ_max]`, refined with every finite ratio so
/// each step is evaluated exactly. `theta_max` defaults to the largest finite ratio.
pub fn performance_profile(methods: &[String], costs: &[Vec<f64>], theta_max: Option<f64>, grid_points: usize) -> Profile {
    let (ratios, excluded) = performance_ratios(costs);
    let largest = ratios.iter().flatten().copied().filter(|r| r.is_finite()).fold(1.0, f64::max);
    let theta_max = theta_max.unwrap_or(largest).max(1.0);
    let n = grid_points.max(2);
    let mut grid: Vec<f64> = (0..n)
        .map(|i| theta_max.powf(i as f64 / (n - 1) as f64))
        .chain(ratios.iter().flatten().copied().filter(|&r| r <= theta_max))
        .collect();
    grid[n - 1] = theta_max;
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let p = ratios.len();
    let curves = methods
        .iter()
        .enumerate()
        .map(|(m, name)| {
            let mut col: Vec<f64> = ratios.iter().map(|r| r[m]).collect();
            col.sort_by(f64::total_cmp);
            let points = grid
                .iter()
                .map(|&t| {
                    let hit = col.partition_point(|&r| r <= t);
                    (t, if p == 0 { 0.0 } else { hit as f64 / p as f64 })
                })
                .collect();
            ProfileCurve {
                method: name.clone(),
                points,
            }
        })
        .collect();
    Profile {
        curves,
        problems: p,
        excluded,
        theta_max,
    }
}

/// Builds the problems × methods cost matrix from a `metrics.csv` or `timings.csv`.
///
/// A problem is one `(dataset, seed, group, K)`. A cell's cost is the mean of `metric` over its
/// rows; the cell counts as failed unless every row converged and carries a value.
pub fn costs_from_csv(path: &Path, metric: &str) -> anyhow::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{} has no '{name}' column", path.display()))
    };
    let (c_ds, c_seed, c_group, c_method, c_k, c_conv, c_metric) = (
        col("dataset")?,
        col("seed")?,
        col("group")?,
        col("method")?,
        col("k_upper")?,
        col("converged")?,
        col(metric)?,
    );

    // per problem, per method: (sum, count, failed)
    let mut cells: BTreeMap<(String, u64, usize, String), BTreeMap<String, (f64, usize, bool)>> = BTreeMap::new();
    let mut methods: Vec<String> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let parse_err = |what: &str| format!("row {}: bad {what}", i + 1);
        let key = (
            field(c_ds).to_string(),
            field(c_seed).parse::<u64>().with_context(|| parse_err("seed"))?,
            field(c_group).parse::<usize>().with_context(|| parse_err("group"))?,
            field(c_k).to_string(),
        );
        let method = field(c_method).to_string();
        if !methods.contains(&method) {
            methods.push(method.clone());
        }
        let converged = field(c_conv) == "true";
        let value = match field(c_metric) {
            "" => None,
            s => Some(s.parse::<f64>().with_context(|| parse_err(metric))?),
        };
        let cell = cells.entry(key).or_default().entry(method).or_insert((0.0, 0, false));
        match value {
            Some(v) if converged && v.is_finite() => {
                cell.0 += v;
                cell.1 += 1;
            }
            _ => cell.2 = true,
        }
    }
    if methods.is_empty() {
        bail!("{} has no rows", path.display());
    }
    let costs = cells
        .values()
        .map(|per| {
            methods
                .iter()
                .map(|m| match per.get(m) {
                    Some(&(sum, n, false)) if n > 0 => sum / n as f64,
                    _ => f64::INFINITY,
                })
                .collect()
        })
        .collect();
    Ok((methods, costs))
}

#[derive(Debug, Serialize)]
struct ProfileRow<'a> {
    schema_version: u32,
    metric: &'a str,
    method: &'a str,
    theta: f64,
    fraction: f64,
}

pub fn write_profile(profile: &Profile, metric: &str, path: &Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for c in &profile.curves {
        for &(theta, fraction) in &c.points {
            w.serialize(ProfileRow {
                schema_version: crate::experiment::CSV_SCHEMA_VERSION,
                metric,
                method: &c.method,
                theta,
                fraction,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
