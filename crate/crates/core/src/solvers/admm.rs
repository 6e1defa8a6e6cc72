//! Operator splitting (ADMM) for convex quadratic objectives over projection-friendly sets.
//!
//! Every constraint block has the form `L_b x + c_b ∈ C_b`. With `z` the stacked
//! block values and `y` the scaled-free dual, one iteration is
//!
//! ```text
//! (H + σI + ρLᵀL) x̃ = σx − q + Lᵀ(ρ(z − c) − y)
//! x  ← αx̃ + (1−α)x,        v̂ = α(Lx̃ + c) + (1−α)z
//! z  ← Π_C(v̂ + y/ρ),       y ← y + ρ(v̂ − z)
//! ```
//!
//! `ρ` is rebalanced from the residual ratio every `adapt_interval` iterations.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    inf_norm, project_psd, project_spectral_box, project_spectral_norm_ball, Cholesky, Matrix, SymMatrix,
};
use crate::scalar::Scalar;

/// A sparse row `Σ coef·x[idx]`.
pub type SparseRow<T> = Vec<(usize, T)>;

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSet<T> {
    /// `lo ≤ v ≤ hi` elementwise; bounds may be infinite.
    Box { lo: Vec<T>, hi: Vec<T> },
    /// `‖v‖₂ ≤ radius`
    Ball { radius: T },
    /// `v` is a row-major `dim×dim` symmetric matrix with spectrum in `[lo, hi]`.
    SpectralBox { dim: usize, lo: T, hi: T },
    /// `v` is a row-major `dim×dim` symmetric positive semidefinite matrix.
    PsdCone { dim: usize },
    /// `v` is a row-major `dim×dim` matrix with spectral norm at most `radius`.
    SpectralNormBall { dim: usize, radius: T },
    /// Not a set: adds `weight·Σ max(0, threshold_i − v_i)²` to the objective.
    SquaredHinge { threshold: Vec<T>, weight: T },
}

impl<T: Scalar> ConstraintSet<T> {
    fn len(&self) -> Option<usize> {
        match self {
            Self::Box { lo, .. } => Some(lo.len()),
            Self::Ball { .. } => None,
            Self::SpectralBox { dim, .. } | Self::PsdCone { dim } | Self::SpectralNormBall { dim, .. } => {
                Some(dim * dim)
            }
            Self::SquaredHinge { threshold, .. } => Some(threshold.len()),
        }
    }

    /// Projection (or proximal step with parameter `rho`) applied in place.
    fn prox(&self, v: &mut [T], rho: T) -> Result<()> {
        match self {
            Self::Box { lo, hi } => {
                for ((vi, &l), &h) in v.iter_mut().zip(lo).zip(hi) {
                    *vi = vi.max(l).min(h);
                }
            }
            Self::Ball { radius } => {
                let n = v.iter().map(|&a| a * a).sum::<T>().sqrt();
                if n > *radius {
                    let s = *radius / n;
                    v.iter_mut().for_each(|a| *a *= s);
                }
            }
            Self::SpectralBox { dim, lo, hi } => {
                let m = SymMatrix::new(Matrix::from_row_major(*dim, *dim, v.to_vec())?)?;
                v.copy_from_slice(project_spectral_box(&m, *lo, *hi)?.as_matrix().as_slice());
            }
            Self::PsdCone { dim } => {
                let m = SymMatrix::new(Matrix::from_row_major(*dim, *dim, v.to_vec())?)?;
                v.copy_from_slice(project_psd(&m)?.as_matrix().as_slice());
            }
            Self::SpectralNormBall { dim, radius } => {
                let m = Matrix::from_row_major(*dim, *dim, v.to_vec())?;
                v.copy_from_slice(project_spectral_norm_ball(&m, *radius)?.as_slice());
            }
            Self::SquaredHinge { threshold, weight } => {
                let w2 = T::lit(2.0) * *weight;
                for (vi, &t) in v.iter_mut().zip(threshold) {
                    if *vi < t {
                        *vi = (rho * *vi + w2 * t) / (rho + w2);
                    }
                }
            }
        }
        Ok(())
    }

    fn penalty(&self, v: &[T]) -> T {
        match self {
            Self::SquaredHinge { threshold, weight } => {
                *weight
                    * v.iter()
                        .zip(threshold)
                        .map(|(&a, &t)| (t - a).max(T::zero()).powi(2))
                        .sum::<T>()
            }
            _ => T::zero(),
        }
    }
}

/// `L x + offset ∈ set`
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub rows: Vec<SparseRow<T>>,
    pub offset: Vec<T>,
    pub set: ConstraintSet<T>,
}

impl<T: Scalar> Constraint<T> {
    pub fn new(rows: Vec<SparseRow<T>>, offset: Vec<T>, set: ConstraintSet<T>) -> Self {
        Self { rows, offset, set }
    }

    /// Rows `e_idx`, no offset.
    pub fn select(indices: &[usize], set: ConstraintSet<T>) -> Self {
        Self {
            rows: indices.iter().map(|&i| vec![(i, T::one())]).collect(),
            offset: vec![T::zero(); indices.len()],
            set,
        }
    }
}

/// `min ½xᵀHx + qᵀx + constant` subject to `G x ≥ h` and set constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProblem<T> {
    pub n_vars: usize,
    pub hessian: Matrix<T>,
    pub linear: Vec<T>,
    pub constant: T,
    pub inequalities: Vec<(SparseRow<T>, T)>,
    pub constraints: Vec<Constraint<T>>,
}

impl<T: Scalar> ConvexProblem<T> {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            hessian: Matrix::zeros(n_vars, n_vars),
            linear: vec![T::zero(); n_vars],
            constant: T::zero(),
            inequalities: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn add_inequality(&mut self, row: SparseRow<T>, bound: T) {
        self.inequalities.push((row, bound));
    }

    pub fn add_constraint(&mut self, c: Constraint<T>) {
        self.constraints.push(c);
    }

    /// Quadratic part only (squared-hinge penalties excluded).
    pub fn objective(&self, x: &[T]) -> T {
        let hx = self.hessian.matvec(x);
        let quad: T = x.iter().zip(&hx).map(|(&a, &b)| a * b).sum();
        let lin: T = x.iter().zip(&self.linear).map(|(&a, &b)| a * b).sum();
        quad / T::lit(2.0) + lin + self.constant
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars;
        if self.hessian.rows() != n || self.hessian.cols() != n || self.linear.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.hessian.rows(),
            });
        }
        let bad_idx = |row: &SparseRow<T>| row.iter().any(|&(i, _)| i >= n);
        if self.inequalities.iter().any(|(r, _)| bad_idx(r)) {
            return Err(Error::InvalidInput("inequality references unknown variable".into()));
        }
        for c in &self.constraints {
            if c.rows.iter().any(bad_idx) {
                return Err(Error::InvalidInput("constraint references unknown variable".into()));
            }
            if c.offset.len() != c.rows.len() {
                return Err(Error::DimensionMismatch {
                    expected: c.rows.len(),
                    got: c.offset.len(),
                });
            }
            if let Some(len) = c.set.len() {
                if len != c.rows.len() {
                    return Err(Error::DimensionMismatch {
                        expected: len,
                        got: c.rows.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolverSettings<T> {
    pub tol_primal: T,
    pub tol_dual: T,
    pub max_iter: usize,
    pub rho: T,
    pub sigma: T,
    pub alpha: T,
    pub adapt_interval: usize,
    pub infeasibility_window: usize,
    #[serde(with = "opt_secs")]
    pub time_cap: Option<Duration>,
}

impl<T: Scalar> SolverSettings<T> {
    /// Residual tolerances of `1e-9` (clamped to the precision of `T`), for callers that compare
    /// objectives across formulations at the `1e-6` level.
    pub fn precise() -> Self {
        Self {
            tol_primal: T::tol(1e-9),
            tol_dual: T::tol(1e-9),
            max_iter: 50_000,
            ..Self::default()
        }
    }
}

impl<T: Scalar> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            tol_primal: T::tol(1e-6),
            tol_dual: T::tol(1e-6),
            max_iter: 20_000,
            rho: T::lit(0.1),
            sigma: T::lit(1e-6),
            alpha: T::lit(1.6),
            adapt_interval: 100,
            infeasibility_window: 1000,
            time_cap: None,
        }
    }
}

mod opt_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(d) => s.serialize_some(&d.as_secs_f64()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.map(Duration::from_secs_f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Infeasible,
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct AdmmSolution<T> {
    pub x: Vec<T>,
    pub z: Vec<T>,
    pub y: Vec<T>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: T,
    pub dual_residual: T,
    /// Quadratic objective plus any squared-hinge penalty at `z`.
    pub objective: T,
}

impl<T> AdmmSolution<T> {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Compressed sparse rows of the stacked operator.
struct Csr<T> {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    fn rows(&self) -> usize {
        self.ptr.len() - 1
    }

    fn mul(&self, x: &[T], out: &mut [T]) {
        for r in 0..self.rows() {
            let mut s = T::zero();
            for k in self.ptr[r]..self.ptr[r + 1] {
                s += self.val[k] * x[self.idx[k]];
            }
            out[r] = s;
        }
    }

    fn tr_mul(&self, y: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        for r in 0..self.rows() {
            let yr = y[r];
            if yr == T::zero() {
                continue;
            }
            for k in self.ptr[r]..self.ptr[r + 1] {
                out[self.idx[k]] += self.val[k] * yr;
            }
        }
    }

    fn gram(&self, n: usize) -> Matrix<T> {
        let mut g = Matrix::zeros(n, n);
        for r in 0..self.rows() {
            let span = self.ptr[r]..self.ptr[r + 1];
            for a in span.clone() {
                for b in span.clone() {
                    g[(self.idx[a], self.idx[b])] += self.val[a] * self.val[b];
                }
            }
        }
        g
    }
}

struct Block<T> {
    start: usize,
    end: usize,
    set: ConstraintSet<T>,
}

fn factor_kkt<T: Scalar>(h: &Matrix<T>, gram: &Matrix<T>, sigma: T, rho: T) -> Result<Cholesky<T>> {
    let n = h.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = h[(i, j)] + rho * gram[(i, j)];
        }
        k[(i, i)] += sigma;
    }
    Cholesky::factor(&k).map_err(|_| Error::InvalidInput("objective Hessian is not positive semidefinite".into()))
}

/// Runs ADMM from `warm_start` (or the origin). Non-convergence is a status, not an error.
pub fn solve_operator_splitting<T: Scalar>(
    problem: &ConvexProblem<T>,
    settings: &SolverSettings<T>,
    warm_start: Option<&[T]>,
) -> Result<AdmmSolution<T>> {
    problem.validate()?;
    let start_time = Instant::now();
    let n = problem.n_vars;

    // stack rows: unit-normalized inequalities first, then each constraint block
    let mut ptr = vec![0];
    let mut idx = Vec::new();
    let mut val = Vec::new();
    let mut offset = Vec::new();
    let mut blocks = Vec::new();
    fn push_row<T: Scalar>(row: &SparseRow<T>, scale: T, idx: &mut Vec<usize>, val: &mut Vec<T>, ptr: &mut Vec<usize>) {
        for &(i, v) in row {
            idx.push(i);
            val.push(v * scale);
        }
        ptr.push(idx.len());
    }
    if !problem.inequalities.is_empty() {
        let mut lo = Vec::new();
        for (row, h) in &problem.inequalities {
            let nrm = row.iter().map(|&(_, v)| v * v).sum::<T>().sqrt();
            if nrm == T::zero() {
                if *h > T::zero() {
                    return Err(Error::InvalidInput("empty inequality row with positive bound".into()));
                }
                continue;
            }
            push_row(row, T::one() / nrm, &mut idx, &mut val, &mut ptr);
            offset.push(T::zero());
            lo.push(*h / nrm);
        }
        let m = lo.len();
        blocks.push(Block {
            start: 0,
            end: m,
            set: ConstraintSet::Box {
                hi: vec![T::infinity(); m],
                lo,
            },
        });
    }
    for c in &problem.constraints {
        let start = offset.len();
        for (row, &off) in c.rows.iter().zip(&c.offset) {
            push_row(row, T::one(), &mut idx, &mut val, &mut ptr);
            offset.push(off);
        }
        blocks.push(Block {
            start,
            end: offset.len(),
            set: c.set.clone(),
        });
    }
    let l = Csr { ptr, idx, val };
    let m = l.rows();
    let gram = l.gram(n);
    let h = &problem.hessian;
    let h_rows: Vec<Vec<(usize, T)>> = (0..n)
        .map(|i| (0..n).filter(|&j| h[(i, j)] != T::zero()).map(|j| (j, h[(i, j)])).collect())
        .collect();
    let h_mul = |x: &[T]| -> Vec<T> {
        h_rows
            .iter()
            .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    };

    let (sigma, alpha) = (settings.sigma, settings.alpha);
    let (rho_min, rho_max) = (T::lit(1e-6), T::lit(1e6));
    let mut rho = settings.rho.max(rho_min).min(rho_max);
    let mut kkt = factor_kkt(h, &gram, sigma, rho)?;

    let mut x = match warm_start {
        Some(w) if w.len() == n => w.to_vec(),
        Some(w) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            })
        }
        None => vec![T::zero(); n],
    };
    let mut lx = vec![T::zero(); m];
    l.mul(&x, &mut lx);
    let mut z: Vec<T> = lx.iter().zip(&offset).map(|(&a, &c)| a + c).collect();
    for b in &blocks {
        b.set.prox(&mut z[b.start..b.end], rho)?;
    }
    let mut y = vec![T::zero(); m];

    let mut rhs = vec![T::zero(); n];
    let mut lty = vec![T::zero(); n];
    let mut lxt = vec![T::zero(); m];
    let mut buf = vec![T::zero(); m];
    let mut status = SolveStatus::MaxIterations;
    let (mut r_prim, mut r_dual) = (T::infinity(), T::infinity());
    let mut best_prim = T::infinity();
    let mut y_at_best = T::zero();
    let mut stall = 0usize;
    let mut iterations = 0;

    for it in 1..=settings.max_iter {
        iterations = it;
        for r in 0..m {
            buf[r] = rho * (z[r] - offset[r]) - y[r];
        }
        l.tr_mul(&buf, &mut lty);
        for i in 0..n {
            rhs[i] = sigma * x[i] - problem.linear[i] + lty[i];
        }
        let xt = kkt.solve(&rhs);
        l.mul(&xt, &mut lxt);
        for i in 0..n {
            x[i] = alpha * xt[i] + (T::one() - alpha) * x[i];
        }
        for r in 0..m {
            let vhat = alpha * (lxt[r] + offset[r]) + (T::one() - alpha) * z[r];
            buf[r] = vhat;
            lxt[r] = vhat + y[r] / rho;
        }
        for b in &blocks {
            b.set.prox(&mut lxt[b.start..b.end], rho)?;
        }
        for r in 0..m {
            y[r] += rho * (buf[r] - lxt[r]);
        }
        std::mem::swap(&mut z, &mut lxt);

        // residuals
        l.mul(&x, &mut lx);
        r_prim = (0..m)
            .map(|r| (lx[r] + offset[r] - z[r]).abs())
            .fold(T::zero(), T::max);
        l.tr_mul(&y, &mut lty);
        let hx = h_mul(&x);
        r_dual = (0..n)
            .map(|i| (hx[i] + problem.linear[i] + lty[i]).abs())
            .fold(T::zero(), T::max);
        if !(r_prim.is_finite() && r_dual.is_finite()) {
            status = SolveStatus::Infeasible;
            break;
        }
        if r_prim <= settings.tol_primal && r_dual <= settings.tol_dual {
            status = SolveStatus::Converged;
            break;
        }

        let y_norm = inf_norm(&y);
        if r_prim < best_prim * (T::one() - T::lit(1e-6)) {
            best_prim = r_prim;
            y_at_best = y_norm;
            stall = 0;
        } else {
            stall += 1;
            if stall >= settings.infeasibility_window && y_norm > T::lit(10.0) * y_at_best.max(T::one()) {
                status = SolveStatus::Infeasible;
                break;
            }
        }

        if settings.adapt_interval > 0 && it % settings.adapt_interval == 0 {
            let z_minus_c: Vec<T> = (0..m).map(|r| z[r] - offset[r]).collect();
            let prim_scale = inf_norm(&lx).max(inf_norm(&z_minus_c)).max(T::lit(1e-12));
            let dual_scale = inf_norm(&hx)
                .max(inf_norm(&lty))
                .max(inf_norm(&problem.linear))
                .max(T::lit(1e-12));
            let ratio = ((r_prim / prim_scale) / (r_dual / dual_scale).max(T::lit(1e-30))).sqrt();
            let new_rho = (rho * ratio).max(rho_min).min(rho_max);
            if new_rho > rho * T::lit(5.0) || new_rho < rho / T::lit(5.0) {
                rho = new_rho;
                kkt = factor_kkt(h, &gram, sigma, rho)?;
            }
        }
        if it % 64 == 0 {
            if let Some(cap) = settings.time_cap {
                if start_time.elapsed() >= cap {
                    status = SolveStatus::TimeLimit;
                    break;
                }
            }
        }
    }

    let penalty: T = blocks.iter().map(|b| b.set.penalty(&z[b.start..b.end])).sum();
    let objective = problem.objective(&x) + penalty;
    Ok(AdmmSolution {
        x,
        z,
        y,
        status,
        iterations,
        primal_residual: r_prim,
        dual_residual: r_dual,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> SolverSettings<f64> {
        SolverSettings {
            tol_primal: 1e-9,
            tol_dual: 1e-9,
            ..Default::default()
        }
    }

    #[test]
    fn halfspace_projection_example() {
        // min ‖x − (2,0)‖² s.t. x₁ ≤ 1  ⇔  −x₁ ≥ −1
        let mut p = ConvexProblem::new(2);
        p.hessian = Matrix::from_diag(&[2.0, 2.0]);
        p.linear = vec![-4.0, 0.0];
        p.constant = 4.0;
        p.add_inequality(vec![(0, -1.0)], -1.0);
        let s = solve_operator_splitting(&p, &settings(), None).unwrap();
        assert!(s.converged());
        assert!((s.x[0] - 1.0).abs() < 1e-7 && s.x[1].abs() < 1e-7, "{:?}", s.x);
        assert!((s.objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unconstrained_stationary_point() {
        let mut p = ConvexProblem::new(3);
        p.hessian = Matrix::from_f64_rows(&[&[4.0, 1.0, 0.0], &[1.0, 3.0, 0.5], &[0.0, 0.5, 2.0]]);
        p.linear = vec![1.0, -2.0, 0.5];
        let s = solve_operator_splitting(&p, &settings(), None).unwrap();
        let expect = Cholesky::factor(&p.hessian).unwrap().solve(&[-1.0, 2.0, -0.5]);
        for (a, b) in s.x.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn ball_and_box_sets() {
        // min ‖x − (3,4)‖² s.t. ‖x‖ ≤ 1 → (0.6, 0.8)
        let mut p = ConvexProblem::new(2);
        p.hessian = Matrix::from_diag(&[2.0, 2.0]);
        p.linear = vec![-6.0, -8.0];
        p.add_constraint(Constraint::select(&[0, 1], ConstraintSet::Ball { radius: 1.0 }));
        let s = solve_operator_splitting(&p, &settings(), None).unwrap();
        assert!((s.x[0] - 0.6).abs() < 1e-7 && (s.x[1] - 0.8).abs() < 1e-7);

        let mut p = ConvexProblem::new(2);
        p.hessian = Matrix::from_diag(&[2.0, 2.0]);
        p.linear = vec![-6.0, 8.0];
        p.add_constraint(Constraint::select(
            &[0, 1],
            ConstraintSet::Box {
                lo: vec![-1.0, -1.0],
                hi: vec![1.0, 1.0],
            },
        ));
        let s = solve_operator_splitting(&p, &settings(), None).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-7 && (s.x[1] + 1.0).abs() < 1e-7);
    }

    #[test]
    fn spectral_box_on_matrix_variable() {
        // min ‖X − diag(3, 0.2)‖_F² over symmetric X (4 entries) with spectrum in [0.5, 2]
        let mut p = ConvexProblem::new(4);
        p.hessian = Matrix::from_diag(&[2.0; 4]);
        p.linear = vec![-6.0, 0.0, 0.0, -0.4];
        p.add_constraint(Constraint::select(
            &[0, 1, 2, 3],
            ConstraintSet::SpectralBox { dim: 2, lo: 0.5, hi: 2.0 },
        ));
        let s = solve_operator_splitting(&p, &settings(), None).unwrap();
        let expect = [2.0, 0.0, 0.0, 0.5];
        for (a, b) in s.x.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-6, "{:?}", s.x);
        }
    }

    #[test]
    fn squared_hinge_penalty() {
        // min x² + 10·max(0, 1 − x)² → x = 10/11
        let mut p = ConvexProblem::new(1);
        p.hessian = Matrix::from_diag(&[2.0]);
        p.add_constraint(Constraint::select(
            &[0],
            ConstraintSet::SquaredHinge {
                threshold: vec![1.0],
                weight: 10.0,
            },
        ));
        let s = solve_operator_splitting(&p, &settings(), None).unwrap();
        assert!((s.x[0] - 10.0 / 11.0).abs() < 1e-7);
        assert!((s.objective - 10.0 / 11.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_problem_is_reported() {
        // x ≥ 1 and −x ≥ 0
        let mut p = ConvexProblem::new(1);
        p.hessian = Matrix::from_diag(&[2.0]);
        p.add_inequality(vec![(0, 1.0)], 1.0);
        p.add_inequality(vec![(0, -1.0)], 0.0);
        let s = solve_operator_splitting(&p, &SolverSettings::default(), None).unwrap();
        assert!(!s.converged());
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn rejects_bad_dimensions() {
        let mut p = ConvexProblem::<f64>::new(2);
        p.add_inequality(vec![(5, 1.0)], 0.0);
        assert!(solve_operator_splitting(&p, &SolverSettings::default(), None).is_err());
    }
}
