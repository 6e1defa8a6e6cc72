//! Operator-splitting engine and one fitting routine per map family.

mod admm;
mod affine;
mod gaussian;
mod pointwise;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use admm::{
    solve_operator_splitting, AdmmSolution, Constraint, ConstraintSet, ConvexProblem, SolveStatus, SolverSettings,
    SparseRow,
};
pub use affine::{solve_affine_diag, solve_affine_full, solve_affine_psd};
pub use gaussian::{solve_gaussian_commutative, solve_gaussian_full, solve_gaussian_full_moments, solve_gaussian_scaled};
pub use pointwise::{
    pointwise_feasible, solve_group_bilipschitz, solve_group_lipschitz, solve_independent, BiLipschitzOptions,
};

use crate::classifier::Halfspace;
use crate::error::{Error, Result};
use crate::maps::{GaussianMoments, TransportMap};
use crate::numerics::{dot, sq_dist, Matrix};
use crate::scalar::Scalar;

/// Outcome of one fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolveReport<T> {
    pub map: TransportMap<T>,
    /// Mean squared displacement (empirical or Gaussian closed form, by family).
    pub objective: T,
    /// `Σ‖g(xᵢ) − xᵢ‖²` over the fitting group.
    pub objective_sum: T,
    pub converged: bool,
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: T,
    pub dual_residual: T,
    pub wall_time: f64,
    /// Target moments exactly as returned by the coupling solver, before the map is extracted.
    pub raw_target: Option<GaussianMoments<T>>,
    /// Mixture components whose sub-solve did not converge.
    pub failed_components: Vec<usize>,
}

impl<T: Scalar> SolveReport<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Bi-Lipschitz constants; `upper = K`, `lower_inv = k`. Infinite values disable a side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds<T> {
    pub upper: T,
    pub lower_inv: T,
}

impl<T: Scalar> Bounds<T> {
    pub fn new(upper: T, lower_inv: T) -> Result<Self> {
        if !(upper >= T::one() && lower_inv >= T::one()) {
            return Err(Error::InvalidInput(format!(
                "bi-Lipschitz constants must be at least 1, got K={upper}, k={lower_inv}"
            )));
        }
        Ok(Self { upper, lower_inv })
    }

    pub fn symmetric(k: T) -> Result<Self> {
        Self::new(k, k)
    }

    pub fn unbounded() -> Self {
        Self {
            upper: T::infinity(),
            lower_inv: T::infinity(),
        }
    }

    /// `1/k`, zero when the lower side is disabled.
    pub fn lo(&self) -> T {
        if self.lower_inv.is_infinite() {
            T::zero()
        } else {
            T::one() / self.lower_inv
        }
    }

    pub fn hi(&self) -> T {
        self.upper
    }
}

/// Accumulates `Σ weight·(aᵀθ − target)²` into a quadratic objective.
pub(crate) struct LeastSquares<T> {
    pub h: Matrix<T>,
    pub q: Vec<T>,
    pub c: T,
}

impl<T: Scalar> LeastSquares<T> {
    pub fn new(n: usize) -> Self {
        Self {
            h: Matrix::zeros(n, n),
            q: vec![T::zero(); n],
            c: T::zero(),
        }
    }

    pub fn add(&mut self, row: &SparseRow<T>, target: T, weight: T) {
        let two_w = T::lit(2.0) * weight;
        for &(i, a) in row {
            for &(j, b) in row {
                self.h[(i, j)] += two_w * a * b;
            }
            self.q[i] -= two_w * a * target;
        }
        self.c += weight * target * target;
    }

    pub fn into_problem(self) -> ConvexProblem<T> {
        let n = self.q.len();
        let mut p = ConvexProblem::new(n);
        p.hessian = self.h;
        p.linear = self.q;
        p.constant = self.c;
        p
    }
}

/// `Σ w_r · row_r` with duplicate indices merged.
pub(crate) fn combine<T: Scalar>(rows: &[SparseRow<T>], weights: &[T]) -> SparseRow<T> {
    let mut acc: BTreeMap<usize, T> = BTreeMap::new();
    for (row, &w) in rows.iter().zip(weights) {
        if w == T::zero() {
            continue;
        }
        for &(i, a) in row {
            *acc.entry(i).or_insert(T::zero()) += w * a;
        }
    }
    acc.into_iter().filter(|&(_, v)| v != T::zero()).collect()
}

/// Position of `(i, j)` in the packed upper triangle of a `d×d` symmetric matrix.
pub(crate) fn sym_index(d: usize) -> Vec<Vec<usize>> {
    let mut idx = vec![vec![0; d]; d];
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            idx[i][j] = k;
            idx[j][i] = k;
            k += 1;
        }
    }
    idx
}

/// Smallest uniform shift along `w/‖w‖²` that puts every image inside the halfspace.
pub(crate) fn halfspace_shift<T: Scalar>(images: &Matrix<T>, hs: &Halfspace<T>) -> Vec<T> {
    let gap = (0..images.rows())
        .map(|i| -hs.slack(images.row(i)))
        .fold(T::zero(), T::max);
    let ww = dot(&hs.normal, &hs.normal);
    hs.normal.iter().map(|&w| gap * w / ww).collect()
}

pub(crate) fn sum_sq_displacement<T: Scalar>(inputs: &Matrix<T>, outputs: &Matrix<T>) -> T {
    (0..inputs.rows()).map(|i| sq_dist(inputs.row(i), outputs.row(i))).sum()
}

pub(crate) fn check_group<T: Scalar>(points: &Matrix<T>, hs: &Halfspace<T>) -> Result<()> {
    if points.cols() != hs.dim() {
        return Err(Error::DimensionMismatch {
            expected: hs.dim(),
            got: points.cols(),
        });
    }
    if !points.is_finite() {
        return Err(Error::InvalidInput("non-finite group points".into()));
    }
    Ok(())
}

pub(crate) struct Timer(Instant);

impl Timer {
    pub fn start() -> Self {
        Self(Instant::now())
    }

    pub fn secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
