//! Displacement, bi-Lipschitz, distortion and validity metrics, and their cross-validated
//! estimation.

use serde::{Deserialize, Serialize};

use crate::classifier::{halfspace, score, LinearModel};
use crate::dataio::fold_indices;
use crate::error::{Error, Result};
use crate::maps::TransportMap;
use crate::methods::{fit_method, FitConfig, Method};
use crate::numerics::{dist, sq_dist, Matrix};
use crate::scalar::Scalar;
use crate::solvers::Bounds;

/// Input pairs closer than this are skipped by ratio computations.
pub const DEGENERATE_PAIR: f64 = 1e-12;

/// `(1/n) Σ ‖xᵢ − x'ᵢ‖²`
pub fn empirical_w2<T: Scalar>(inputs: &Matrix<T>, outputs: &Matrix<T>) -> Result<T> {
    check_paired(inputs, outputs)?;
    if inputs.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = T::from_usize_lossy(inputs.rows());
    Ok((0..inputs.rows()).map(|i| sq_dist(inputs.row(i), outputs.row(i))).sum::<T>() / n)
}

fn check_paired<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<()> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: b.rows(),
        });
    }
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            got: b.cols(),
        });
    }
    Ok(())
}

/// Extreme pairwise distance ratios `‖x'ᵢ − x'ⱼ‖ / ‖xᵢ − xⱼ‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalBounds<T> {
    /// Largest ratio: the smallest valid Lipschitz constant `K̂`.
    pub upper: T,
    /// Smallest ratio: the empirical `1/k̂`.
    pub lower: T,
}

pub fn empirical_bounds<T: Scalar>(inputs: &Matrix<T>, outputs: &Matrix<T>) -> Result<EmpiricalBounds<T>> {
    check_paired(inputs, outputs)?;
    let n = inputs.rows();
    let mut upper = T::neg_infinity();
    let mut lower = T::infinity();
    for i in 0..n {
        for j in i + 1..n {
            let din = dist(inputs.row(i), inputs.row(j));
            if din <= T::lit(DEGENERATE_PAIR) {
                continue;
            }
            let r = dist(outputs.row(i), outputs.row(j)) / din;
            upper = upper.max(r);
            lower = lower.min(r);
        }
    }
    if !upper.is_finite() {
        return Err(Error::UndefinedBounds);
    }
    Ok(EmpiricalBounds { upper, lower })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distortion<T> {
    pub value: T,
    /// Distinct inputs were mapped onto one point; `value` is then 1.
    pub collapsed: bool,
}

/// `D̂ = 1 − 1/max{upper, 1/lower}`
pub fn distortion<T: Scalar>(upper: T, lower: T) -> Distortion<T> {
    if lower <= T::zero() {
        return Distortion {
            value: T::one(),
            collapsed: true,
        };
    }
    Distortion {
        value: T::one() - T::one() / upper.max(T::one() / lower),
        collapsed: false,
    }
}

/// Fraction of `points` whose image scores strictly above `alpha` for `target_class`.
pub fn validity<T: Scalar>(
    map: &TransportMap<T>,
    points: &Matrix<T>,
    model: &LinearModel<T>,
    target_class: u8,
    alpha: T,
) -> Result<T> {
    if map.is_pointwise() {
        return Err(Error::NotGeneralizable);
    }
    if points.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let images = map.apply_all(points)?;
    fraction_valid(&images, model, target_class, alpha)
}

fn fraction_valid<T: Scalar>(images: &Matrix<T>, model: &LinearModel<T>, target_class: u8, alpha: T) -> Result<T> {
    let mut hits = 0usize;
    for i in 0..images.rows() {
        if score(model, images.row(i), target_class)? > alpha {
            hits += 1;
        }
    }
    Ok(T::from_usize_lossy(hits) / T::from_usize_lossy(images.rows()))
}

/// Metrics of one fitted map on one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MetricsRecord<T> {
    pub w2_sq: T,
    /// `None` when fewer than two distinct evaluation points exist.
    pub emp_upper: Option<T>,
    pub emp_lower: Option<T>,
    pub distortion: Option<T>,
    pub collapsed: bool,
    pub validity: T,
    /// Validity of a pointwise baseline on its own fitting points, 1 by construction.
    pub validity_trivial: bool,
    pub n_eval: usize,
}

impl<T: Scalar> MetricsRecord<T> {
    /// All metrics of `outputs` as images of `inputs`.
    pub fn compute(
        inputs: &Matrix<T>,
        outputs: &Matrix<T>,
        model: &LinearModel<T>,
        target_class: u8,
        alpha: T,
        validity_trivial: bool,
    ) -> Result<Self> {
        let w2_sq = empirical_w2(inputs, outputs)?;
        let bounds = match empirical_bounds(inputs, outputs) {
            Ok(b) => Some(b),
            Err(Error::UndefinedBounds) => None,
            Err(e) => return Err(e),
        };
        let dist = bounds.map(|b| distortion(b.upper, b.lower));
        Ok(Self {
            w2_sq,
            emp_upper: bounds.map(|b| b.upper),
            emp_lower: bounds.map(|b| b.lower),
            distortion: dist.map(|d| d.value),
            collapsed: dist.is_some_and(|d| d.collapsed),
            validity: fraction_valid(outputs, model, target_class, alpha)?,
            validity_trivial,
            n_eval: inputs.rows(),
        })
    }
}

/// One fold of a cross-validated evaluation (or the single full-group evaluation of a
/// pointwise baseline, with `fold = None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FoldRecord<T> {
    pub fold: Option<usize>,
    pub converged: bool,
    /// Fit failure message, if the fit returned an error.
    pub error: Option<String>,
    pub objective: Option<T>,
    pub metrics: Option<MetricsRecord<T>>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CrossValResult<T> {
    pub folds: Vec<FoldRecord<T>>,
    /// Mean over converged folds; `None` when no fold converged.
    pub mean: Option<MetricsRecord<T>>,
    pub convergence_rate: f64,
}

impl<T: Scalar> CrossValResult<T> {
    /// Every fold converged.
    pub fn converged(&self) -> bool {
        self.folds.iter().all(|f| f.converged)
    }
}

fn mean_of<T: Scalar>(records: &[&MetricsRecord<T>]) -> Option<MetricsRecord<T>> {
    if records.is_empty() {
        return None;
    }
    let avg = |f: &dyn Fn(&MetricsRecord<T>) -> Option<T>| {
        let vals: Vec<T> = records.iter().filter_map(|r| f(r)).collect();
        (!vals.is_empty()).then(|| vals.iter().copied().sum::<T>() / T::from_usize_lossy(vals.len()))
    };
    Some(MetricsRecord {
        w2_sq: avg(&|r| Some(r.w2_sq)).expect("non-empty"),
        emp_upper: avg(&|r| r.emp_upper),
        emp_lower: avg(&|r| r.emp_lower),
        distortion: avg(&|r| r.distortion),
        collapsed: records.iter().any(|r| r.collapsed),
        validity: avg(&|r| Some(r.validity)).expect("non-empty"),
        validity_trivial: records.iter().all(|r| r.validity_trivial),
        n_eval: records.iter().map(|r| r.n_eval).sum(),
    })
}

/// What a group is explained towards.
#[derive(Debug, Clone)]
pub struct Target<'a, T> {
    pub model: &'a LinearModel<T>,
    pub class: u8,
    pub alpha: T,
}

/// Fits on all folds but one and scores the held-out fold, for every fold. Pointwise baselines
/// cannot map unseen points, so they are fitted and scored once on the whole group.
pub fn crossval_evaluate<T: Scalar>(
    points: &Matrix<T>,
    target: &Target<'_, T>,
    method: Method,
    bounds: Bounds<T>,
    config: &FitConfig<T>,
    folds: usize,
    seed: u64,
) -> Result<CrossValResult<T>> {
    let n = points.rows();
    let hs = halfspace(target.model, target.class, target.alpha)?;
    let mut records = Vec::new();
    if method.is_pointwise() {
        records.push(evaluate_fold(points, points, None, &hs, target, method, bounds, &config.with_seed(seed))?);
    } else {
        if folds < 2 || folds > n {
            return Err(Error::InvalidInput(format!(
                "{folds} folds need between 2 and {n} group members"
            )));
        }
        for (f, held) in fold_indices(n, folds, seed).into_iter().enumerate() {
            let mut keep = vec![true; n];
            held.iter().for_each(|&i| keep[i] = false);
            let train_idx: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
            let train = rows(points, &train_idx);
            let test = rows(points, &held);
            let cfg = config.with_seed(seed.wrapping_add(f as u64));
            records.push(evaluate_fold(&train, &test, Some(f), &hs, target, method, bounds, &cfg)?);
        }
    }
    let ok: Vec<&MetricsRecord<T>> = records
        .iter()
        .filter(|r| r.converged)
        .filter_map(|r| r.metrics.as_ref())
        .collect();
    let rate = records.iter().filter(|r| r.converged).count() as f64 / records.len() as f64;
    Ok(CrossValResult {
        mean: mean_of(&ok),
        folds: records,
        convergence_rate: rate,
    })
}

fn rows<T: Scalar>(points: &Matrix<T>, idx: &[usize]) -> Matrix<T> {
    Matrix::from_fn(idx.len(), points.cols(), |r, c| points[(idx[r], c)])
}

#[allow(clippy::too_many_arguments)]
fn evaluate_fold<T: Scalar>(
    train: &Matrix<T>,
    test: &Matrix<T>,
    fold: Option<usize>,
    hs: &crate::classifier::Halfspace<T>,
    target: &Target<'_, T>,
    method: Method,
    bounds: Bounds<T>,
    config: &FitConfig<T>,
) -> Result<FoldRecord<T>> {
    let report = match fit_method(method, train, hs, bounds, config) {
        Ok(r) => r,
        // input-shape problems are the caller's; anything else marks the fold as failed
        Err(e @ (Error::DimensionMismatch { .. } | Error::InvalidInput(_))) => return Err(e),
        Err(e) => {
            return Ok(FoldRecord {
                fold,
                converged: false,
                error: Some(e.to_string()),
                objective: None,
                metrics: None,
                wall_time: 0.0,
            })
        }
    };
    let images = if report.map.is_pointwise() {
        report.map.apply_all(train)?
    } else {
        report.map.apply_all(test)?
    };
    let eval = if report.map.is_pointwise() { train } else { test };
    let metrics = MetricsRecord::compute(eval, &images, target.model, target.class, target.alpha, report.map.is_pointwise())?;
    Ok(FoldRecord {
        fold,
        converged: report.converged,
        error: None,
        objective: Some(report.objective),
        metrics: Some(metrics),
        wall_time: report.wall_time,
    })
}
