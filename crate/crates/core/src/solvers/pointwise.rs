//! Baselines that move each group member independently of any map.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::admm::{solve_operator_splitting, Constraint, ConstraintSet, ConvexProblem, SolveStatus, SolverSettings};
use super::{check_group, sum_sq_displacement, Bounds, LeastSquares, SolveReport, Timer};
use crate::classifier::Halfspace;
use crate::error::Result;
use crate::maps::{PointwiseMap, TransportMap};
use crate::numerics::{dist, norm, Matrix};
use crate::scalar::Scalar;

/// Inputs closer than this are treated as duplicates by pair constraints.
const DEGENERATE_PAIR: f64 = 1e-12;

fn report<T: Scalar>(
    points: &Matrix<T>,
    outputs: Matrix<T>,
    status: SolveStatus,
    converged: bool,
    iterations: usize,
    residuals: (T, T),
    timer: &Timer,
) -> SolveReport<T> {
    let sum = sum_sq_displacement(points, &outputs);
    let n = T::from_usize_lossy(points.rows().max(1));
    SolveReport {
        map: TransportMap::Pointwise(PointwiseMap {
            indices: (0..points.rows()).collect(),
            inputs: points.clone(),
            outputs,
        }),
        objective: sum / n,
        objective_sum: sum,
        converged,
        status,
        iterations,
        primal_residual: residuals.0,
        dual_residual: residuals.1,
        wall_time: timer.secs(),
        raw_target: None,
        failed_components: Vec::new(),
    }
}

/// Closest halfspace point for every member separately.
pub fn solve_independent<T: Scalar>(points: &Matrix<T>, hs: &Halfspace<T>) -> Result<SolveReport<T>> {
    check_group(points, hs)?;
    let timer = Timer::start();
    let mut out = points.clone();
    for i in 0..points.rows() {
        let p = hs.project(points.row(i));
        for (j, v) in p.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(report(
        points,
        out,
        SolveStatus::Converged,
        true,
        0,
        (T::zero(), T::zero()),
        &timer,
    ))
}

/// Mean squared displacement with a halfspace row per member and, for finite `k_upper`,
/// a ball `‖x'ᵢ − x'ⱼ‖ ≤ K‖xᵢ − xⱼ‖` per pair.
fn lipschitz_problem<T: Scalar>(points: &Matrix<T>, hs: &Halfspace<T>, k_upper: T) -> ConvexProblem<T> {
    let (n, d) = (points.rows(), points.cols());
    let w = T::one() / T::from_usize_lossy(n);
    let mut ls = LeastSquares::new(n * d);
    for i in 0..n {
        for r in 0..d {
            ls.add(&vec![(i * d + r, T::one())], points[(i, r)], w);
        }
    }
    let mut p = ls.into_problem();
    for i in 0..n {
        let row = (0..d).map(|r| (i * d + r, hs.normal[r])).collect();
        p.add_inequality(row, hs.threshold());
    }
    if k_upper.is_finite() {
        for i in 0..n {
            for j in i + 1..n {
                let gap = dist(points.row(i), points.row(j));
                let rows = (0..d)
                    .map(|r| vec![(i * d + r, T::one()), (j * d + r, -T::one())])
                    .collect();
                p.add_constraint(Constraint::new(
                    rows,
                    vec![T::zero(); d],
                    ConstraintSet::Ball { radius: k_upper * gap },
                ));
            }
        }
    }
    p
}

fn unflatten<T: Scalar>(x: &[T], n: usize, d: usize) -> Matrix<T> {
    Matrix::from_fn(n, d, |i, j| x[i * d + j])
}

fn flatten<T: Scalar>(m: &Matrix<T>) -> Vec<T> {
    m.as_slice().to_vec()
}

/// Group counterfactuals with pairwise upper Lipschitz bound `K` (convex).
pub fn solve_group_lipschitz<T: Scalar>(
    points: &Matrix<T>,
    hs: &Halfspace<T>,
    k_upper: T,
    settings: &SolverSettings<T>,
) -> Result<SolveReport<T>> {
    check_group(points, hs)?;
    let timer = Timer::start();
    let (n, d) = (points.rows(), points.cols());
    if n == 0 {
        return Ok(report(points, points.clone(), SolveStatus::Converged, true, 0, (T::zero(), T::zero()), &timer));
    }
    let problem = lipschitz_problem(points, hs, k_upper);
    let warm = flatten(&solve_independent(points, hs)?.map_outputs());
    let sol = solve_operator_splitting(&problem, settings, Some(&warm))?;
    let mut out = unflatten(&sol.x, n, d);
    // remove the solver's residual halfspace violation member by member
    for i in 0..n {
        let p = hs.project(out.row(i));
        for (j, v) in p.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(report(
        points,
        out,
        sol.status,
        sol.converged(),
        sol.iterations,
        (sol.primal_residual, sol.dual_residual),
        &timer,
    ))
}

impl<T: Scalar> SolveReport<T> {
    fn map_outputs(&self) -> Matrix<T> {
        match &self.map {
            TransportMap::Pointwise(p) => p.outputs.clone(),
            _ => unreachable!("pointwise report"),
        }
    }
}

/// Whether `outputs` satisfy the halfspace and every pairwise bi-Lipschitz bound within `tol`.
pub fn pointwise_feasible<T: Scalar>(
    inputs: &Matrix<T>,
    outputs: &Matrix<T>,
    hs: Option<&Halfspace<T>>,
    bounds: &Bounds<T>,
    tol: T,
) -> bool {
    let n = inputs.rows();
    if let Some(hs) = hs {
        if (0..n).any(|i| hs.slack(outputs.row(i)) < -tol) {
            return false;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let din = dist(inputs.row(i), inputs.row(j));
            if din <= T::lit(DEGENERATE_PAIR) {
                continue;
            }
            let dout = dist(outputs.row(i), outputs.row(j));
            if dout > bounds.hi() * din + tol || dout < bounds.lo() * din - tol {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BiLipschitzOptions<T> {
    pub restarts: usize,
    #[serde(with = "secs")]
    pub time_cap: Duration,
    pub seed: u64,
    /// Standard deviation of the restart jitter around the Lipschitz solution.
    pub jitter: T,
    /// Penalty weights run `1, 10, …` up to this value.
    pub max_penalty: T,
    /// Linearize-and-solve rounds per penalty weight.
    pub rounds: usize,
    /// Feasibility tolerance of the final check.
    pub tol: T,
    pub settings: SolverSettings<T>,
}

impl<T: Scalar> Default for BiLipschitzOptions<T> {
    fn default() -> Self {
        Self {
            restarts: 5,
            time_cap: Duration::from_secs(1800),
            seed: 0,
            jitter: T::lit(0.1),
            max_penalty: T::lit(1e6),
            rounds: 10,
            tol: T::lit(1e-5),
            settings: SolverSettings::default(),
        }
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(v.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

/// Multi-start penalty method for the non-convex bi-Lipschitz baseline.
///
/// The lower bound `‖x'ᵢ − x'ⱼ‖ ≥ ‖xᵢ − xⱼ‖/k` enters as a squared-hinge penalty on its
/// linearization `eᵢⱼᵀ(x'ᵢ − x'ⱼ)`, where `eᵢⱼ` is the current output direction. The
/// linearization never overestimates the norm, so a satisfied linear constraint implies the
/// original one. Upper bounds and the halfspace stay hard constraints.
pub fn solve_group_bilipschitz<T: Scalar>(
    points: &Matrix<T>,
    hs: &Halfspace<T>,
    bounds: Bounds<T>,
    opts: &BiLipschitzOptions<T>,
) -> Result<SolveReport<T>> {
    check_group(points, hs)?;
    let timer = Timer::start();
    let (n, d) = (points.rows(), points.cols());
    let mut settings = opts.settings;
    settings.time_cap = Some(opts.time_cap);
    let lip = solve_group_lipschitz(points, hs, bounds.hi(), &settings)?;
    let base_problem = lipschitz_problem(points, hs, bounds.hi());
    let seed_out = lip.map_outputs();

    let pairs: Vec<(usize, usize, T)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, dist(points.row(i), points.row(j))))
        .filter(|&(_, _, g)| g > T::lit(DEGENERATE_PAIR))
        .collect();
    let lo = bounds.lo();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(T, Matrix<T>)> = None;
    let mut last = seed_out.clone();
    let mut iterations = lip.iterations;
    let mut residuals = (lip.primal_residual, lip.dual_residual);
    let mut timed_out = false;

    'restarts: for _ in 0..opts.restarts {
        let mut x: Vec<T> = flatten(&seed_out)
            .into_iter()
            .map(|v| v + opts.jitter * T::lit(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let mut mu = T::one();
        loop {
            for _ in 0..opts.rounds {
                let elapsed = Duration::from_secs_f64(timer.secs());
                if elapsed >= opts.time_cap {
                    timed_out = true;
                    break 'restarts;
                }
                settings.time_cap = Some(opts.time_cap - elapsed);
                let mut problem = base_problem.clone();
                if lo > T::zero() && !pairs.is_empty() {
                    let mut rows = Vec::with_capacity(pairs.len());
                    let mut thresholds = Vec::with_capacity(pairs.len());
                    for &(i, j, gap) in &pairs {
                        let mut e: Vec<T> = (0..d).map(|r| x[i * d + r] - x[j * d + r]).collect();
                        let mut en = norm(&e);
                        if en <= T::lit(DEGENERATE_PAIR) {
                            e = (0..d).map(|r| points[(i, r)] - points[(j, r)]).collect();
                            en = gap;
                        }
                        let row = (0..d)
                            .flat_map(|r| [(i * d + r, e[r] / en), (j * d + r, -e[r] / en)])
                            .collect();
                        rows.push(row);
                        thresholds.push(lo * gap);
                    }
                    problem.add_constraint(Constraint::new(
                        rows,
                        vec![T::zero(); thresholds.len()],
                        ConstraintSet::SquaredHinge {
                            threshold: thresholds,
                            weight: mu,
                        },
                    ));
                }
                let sol = solve_operator_splitting(&problem, &settings, Some(&x))?;
                iterations += sol.iterations;
                residuals = (sol.primal_residual, sol.dual_residual);
                let step = x
                    .iter()
                    .zip(&sol.x)
                    .map(|(&a, &b)| (a - b).abs())
                    .fold(T::zero(), T::max);
                x = sol.x;
                if sol.status == SolveStatus::TimeLimit {
                    timed_out = true;
                    break 'restarts;
                }
                if step <= T::lit(1e-9) {
                    break;
                }
            }
            let mut out = unflatten(&x, n, d);
            for i in 0..n {
                let p = hs.project(out.row(i));
                for (j, v) in p.into_iter().enumerate() {
                    out[(i, j)] = v;
                }
            }
            if pointwise_feasible(points, &out, Some(hs), &bounds, opts.tol) {
                let obj = sum_sq_displacement(points, &out);
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, out));
                }
                break;
            }
            last = out;
            if mu >= opts.max_penalty {
                break;
            }
            mu *= T::lit(10.0);
        }
    }

    let (status, converged, outputs) = match (best, timed_out) {
        (_, true) => (SolveStatus::TimeLimit, false, last),
        (Some((_, out)), false) => (SolveStatus::Converged, true, out),
        (None, false) => (SolveStatus::MaxIterations, false, last),
    };
    Ok(report(points, outputs, status, converged, iterations, residuals, &timer))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hs(w: &[f64], t: f64) -> Halfspace<f64> {
        let mut h = Halfspace::new(w.to_vec(), t).unwrap();
        h.margin = 0.0;
        h
    }

    #[test]
    fn feasible_points_do_not_move() {
        let pts = Matrix::from_f64_rows(&[&[2.0, 0.0], &[3.0, 1.0]]);
        let r = solve_independent(&pts, &hs(&[1.0, 0.0], 1.0)).unwrap();
        assert_eq!(r.objective, 0.0);
        let r = solve_group_lipschitz(&pts, &hs(&[1.0, 0.0], 1.0), 1.0, &SolverSettings::default()).unwrap();
        assert!(r.converged && r.objective < 1e-10);
    }

    #[test]
    fn single_point_projection() {
        let pts = Matrix::from_f64_rows(&[&[0.0, 0.0]]);
        let r = solve_independent(&pts, &hs(&[1.0, 0.0], 1.3863)).unwrap();
        let TransportMap::Pointwise(p) = &r.map else { panic!() };
        assert!((p.outputs[(0, 0)] - 1.3863).abs() < 1e-15 && p.outputs[(0, 1)] == 0.0);
    }

    #[test]
    fn symmetric_pair_moves_equally() {
        let pts = Matrix::from_f64_rows(&[&[0.0, 1.0], &[0.0, -1.0]]);
        let r = solve_independent(&pts, &hs(&[1.0, 0.0], 1.0)).unwrap();
        let TransportMap::Pointwise(p) = &r.map else { panic!() };
        let d0 = dist(p.outputs.row(0), pts.row(0));
        let d1 = dist(p.outputs.row(1), pts.row(1));
        assert!((d0 - d1).abs() < 1e-15);
    }

    #[test]
    fn midpoint_of_swapped_solutions_collapses() {
        let x = Matrix::from_f64_rows(&[&[1.0, 0.0], &[-1.0, 0.0]]);
        let swapped = Matrix::from_f64_rows(&[&[-1.0, 0.0], &[1.0, 0.0]]);
        let mid = Matrix::from_f64_rows(&[&[0.0, 0.0], &[0.0, 0.0]]);
        for k in [1.0, 1.5, 5.0] {
            let b = Bounds::symmetric(k).unwrap();
            assert!(pointwise_feasible(&x, &x, None, &b, 1e-12));
            assert!(pointwise_feasible(&x, &swapped, None, &b, 1e-12));
            assert!(!pointwise_feasible(&x, &mid, None, &b, 1e-12));
        }
    }
}
