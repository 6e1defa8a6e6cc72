//! Maps between Gaussian approximations of a group and of its counterfactual.
//!
//! Every family fits the source moments `P` from the group, optimizes over a target law and
//! reads the transport map off it. The reported objective is the closed-form squared
//! distance from `P` to the pushforward of `P` under the returned map.

use super::admm::{solve_operator_splitting, AdmmSolution, Constraint, ConstraintSet, ConvexProblem, SolverSettings};
use super::{check_group, combine, halfspace_shift, sum_sq_displacement, sym_index, Bounds, SolveReport, Timer};
use crate::classifier::Halfspace;
use crate::error::Result;
use crate::maps::{closed_form_w2, estimate_moments, pushforward, AffineMap, GaussianMoments, Structure, TransportMap};
use crate::numerics::{project_psd, project_spectral_box, sym_eig, Matrix, SymMatrix};
use crate::scalar::Scalar;

/// `‖μ_P − μ_Q‖²` on the variables `offset..offset + d`.
fn add_mean_term<T: Scalar>(problem: &mut ConvexProblem<T>, mean: &[T], offset: usize) {
    for (r, &m) in mean.iter().enumerate() {
        problem.hessian[(offset + r, offset + r)] += T::lit(2.0);
        problem.linear[offset + r] -= T::lit(2.0) * m;
        problem.constant += m * m;
    }
}

/// `wᵀ(A(xᵢ − μ_P) + μ_Q) ≥ τ` for every member, given the row of `(A yᵢ)_r`.
fn add_halfspace_rows<T: Scalar>(
    problem: &mut ConvexProblem<T>,
    points: &Matrix<T>,
    source: &GaussianMoments<T>,
    hs: &Halfspace<T>,
    mean_offset: usize,
    a_row: impl Fn(&[T], usize) -> Vec<(usize, T)>,
) {
    let d = points.cols();
    for i in 0..points.rows() {
        let y: Vec<T> = (0..d).map(|c| points[(i, c)] - source.mean[c]).collect();
        let rows: Vec<_> = (0..d)
            .map(|r| {
                let mut row = a_row(&y, r);
                row.push((mean_offset + r, T::one()));
                row
            })
            .collect();
        problem.add_inequality(combine(&rows, &hs.normal), hs.threshold());
    }
}

struct Extracted<T> {
    a: Matrix<T>,
    structure: Structure,
    target_mean: Vec<T>,
}

fn finish<T: Scalar>(
    points: &Matrix<T>,
    hs: &Halfspace<T>,
    source: &GaussianMoments<T>,
    ex: Extracted<T>,
    raw_target: Option<GaussianMoments<T>>,
    sol: &AdmmSolution<T>,
    timer: &Timer,
) -> Result<SolveReport<T>> {
    let d = points.cols();
    let am = ex.a.matvec(&source.mean);
    let mut b: Vec<T> = (0..d).map(|r| ex.target_mean[r] - am[r]).collect();
    let images = Matrix::from_fn(points.rows(), d, |i, r| {
        (0..d).map(|c| ex.a[(r, c)] * points[(i, c)]).sum::<T>() + b[r]
    });
    let shift = halfspace_shift(&images, hs);
    for (bi, s) in b.iter_mut().zip(&shift) {
        *bi += *s;
    }
    let map = AffineMap::new(ex.a, b, ex.structure)?;
    let objective = closed_form_w2(source, &pushforward(source, &map)?)?;
    let outputs = TransportMap::Affine(map.clone()).apply_all(points)?;
    Ok(SolveReport {
        map: TransportMap::GaussianPair {
            source: source.clone(),
            target: pushforward(source, &map)?,
            map,
        },
        objective,
        objective_sum: sum_sq_displacement(points, &outputs),
        converged: sol.converged(),
        status: sol.status,
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        wall_time: timer.secs(),
        raw_target,
        failed_components: Vec::new(),
    })
}

/// Full coupling: the target covariance is free and the joint covariance of `(x, Ax)`,
/// `[[Σ_P, Σ_P A], [AΣ_P, Σ_Q]]`, must stay positive semidefinite, with `A` symmetric and spectrum in
/// `[1/k, K]`.
pub fn solve_gaussian_full<T: Scalar>(
    points: &Matrix<T>,
    hs: &Halfspace<T>,
    bounds: Bounds<T>,
    settings: &SolverSettings<T>,
) -> Result<SolveReport<T>> {
    check_group(points, hs)?;
    let source = estimate_moments(points)?;
    solve_gaussian_full_moments(points, hs, &source, bounds, settings)
}

/// As [`solve_gaussian_full`] with the source moments supplied; `points` only carry the
/// halfspace rows and may be empty.
pub fn solve_gaussian_full_moments<T: Scalar>(
    points: &Matrix<T>,
    hs: &Halfspace<T>,
    source: &GaussianMoments<T>,
    bounds: Bounds<T>,
    settings: &SolverSettings<T>,
) -> Result<SolveReport<T>> {
    check_group(points, hs)?;
    let timer = &Timer::start();
    let d = source.dim();
    let sym = sym_index(d);
    let m = d * (d + 1) / 2;
    let (a_off, q_off, mu_off) = (0, m, 2 * m);
    let sp = source.cov.as_matrix();
    // The PSD block is built from Σ_P / c and the variable is Σ̃_Q = Σ_Q / c, so a collapsed
    // component (Σ_P near the ridge) gives as well-scaled a cone constraint as any other.
    let c = (sp.trace() / T::from_usize_lossy(d)).max(T::min_positive_value().sqrt());
    let mut problem = ConvexProblem::new(2 * m + d);

    // TrΣ_Q − 2Tr(AΣ_P) + TrΣ_P
    for i in 0..d {
        for j in i..d {
            let k = sym[i][j];
            problem.linear[a_off + k] = if i == j { -T::lit(2.0) * sp[(i, i)] } else { -T::lit(4.0) * sp[(i, j)] };
        }
        problem.linear[q_off + sym[i][i]] = c;
    }
    problem.constant = sp.trace();
    add_mean_term(&mut problem, &source.mean, mu_off);

    let mut rows = Vec::with_capacity(4 * d * d);
    let mut offset = Vec::with_capacity(4 * d * d);
    for r in 0..2 * d {
        for col in 0..2 * d {
            let (row, off) = match (r < d, col < d) {
                (true, true) => (Vec::new(), sp[(r, col)] / c),
                // Cov(x, Ax) = Σ_P A above the diagonal, A Σ_P below
                (true, false) => {
                    let cc = col - d;
                    ((0..d).map(|k| (a_off + sym[k][cc], sp[(r, k)] / c)).collect(), T::zero())
                }
                (false, true) => {
                    let rr = r - d;
                    ((0..d).map(|k| (a_off + sym[rr][k], sp[(k, col)] / c)).collect(), T::zero())
                }
                (false, false) => (vec![(q_off + sym[r - d][col - d], T::one())], T::zero()),
            };
            rows.push(combine(&[row], &[T::one()]));
            offset.push(off);
        }
    }
    problem.add_constraint(Constraint::new(rows, offset, ConstraintSet::PsdCone { dim: 2 * d }));

    let a_rows = (0..d)
        .flat_map(|r| (0..d).map(move |c| (r, c)))
        .map(|(r, c)| vec![(a_off + sym[r][c], T::one())])
        .collect();
    problem.add_constraint(Constraint::new(
        a_rows,
        vec![T::zero(); d * d],
        ConstraintSet::SpectralBox {
            dim: d,
            lo: bounds.lo(),
            hi: bounds.hi(),
        },
    ));
    add_halfspace_rows(&mut problem, points, source, hs, mu_off, |y, r| {
        (0..d).map(|c| (a_off + sym[r][c], y[c])).collect()
    });

    // warm start at the identity map
    let mut warm = vec![T::zero(); 2 * m + d];
    for i in 0..d {
        warm[a_off + sym[i][i]] = T::one().max(bounds.lo()).min(bounds.hi());
        for j in i..d {
            warm[q_off + sym[i][j]] = sp[(i, j)] / c;
        }
    }
    warm[mu_off..].copy_from_slice(&source.mean);
    let sol = solve_operator_splitting(&problem, settings, Some(&warm))?;

    let unpack = |off: usize| SymMatrix::new(Matrix::from_fn(d, d, |i, j| sol.x[off + sym[i][j]]));
    let a = project_spectral_box(&unpack(a_off)?, bounds.lo(), bounds.hi())?.into_matrix();
    let target_mean = sol.x[mu_off..].to_vec();
    let raw_target = GaussianMoments {
        mean: target_mean.clone(),
        cov: project_psd(&unpack(q_off)?.scale(c))?,
        ridge: T::zero(),
    };
    finish(
        points,
        hs,
        source,
        Extracted {
            a,
            structure: Structure::Psd,
            target_mean,
        },
        Some(raw_target),
        &sol,
        timer,
    )
}

/// Target covariance shares the eigenbasis of `Σ_P`: `Σ_Q = U diag(s²) Uᵀ`, `A = U diag(s/√λ) Uᵀ`.
pub fn solve_gaussian_commutative<T: Scalar>(
    points: &Matrix<T>,
    hs: &Halfspace<T>,
    bounds: Bounds<T>,
    settings: &SolverSettings<T>,
) -> Result<SolveReport<T>> {
    check_group(points, hs)?;
    let timer = Timer::start();
    let source = estimate_moments(points)?;
    let d = source.dim();
    let spec = sym_eig(&source.cov)?;
    let roots: Vec<T> = spec.eigenvalues.iter().map(|&l| l.max(T::zero()).sqrt()).collect();
    let u = &spec.eigenvectors;

    let mut problem = ConvexProblem::new(2 * d);
    for j in 0..d {
        problem.hessian[(j, j)] = T::lit(2.0);
        problem.linear[j] = -T::lit(2.0) * roots[j];
        problem.constant += roots[j] * roots[j];
    }
    add_mean_term(&mut problem, &source.mean, d);
    problem.add_constraint(Constraint::select(
        &(0..d).collect::<Vec<_>>(),
        ConstraintSet::Box {
            lo: roots.iter().map(|&r| r * bounds.lo()).collect(),
            hi: roots.iter().map(|&r| r * bounds.hi()).collect(),
        },
    ));
    // (A y)_r = Σ_j s_j u_rj (u_jᵀ y)/√λ_j
    add_halfspace_rows(&mut problem, points, &source, hs, d, |y, r| {
        (0..d)
            .map(|j| {
                let proj: T = (0..d).map(|c| u[(c, j)] * y[c]).sum();
                (j, u[(r, j)] * proj / roots[j])
            })
            .collect()
    });

    let mut warm = roots.clone();
    warm.extend_from_slice(&source.mean);
    let sol = solve_operator_splitting(&problem, settings, Some(&warm))?;
    let s: Vec<T> = (0..d)
        .map(|j| sol.x[j].max(roots[j] * bounds.lo()).min(roots[j] * bounds.hi()))
        .collect();
    let scales: Vec<T> = (0..d).map(|j| s[j] / roots[j]).collect();
    let a = SymMatrix::new(Matrix::from_fn(d, d, |r, c| {
        (0..d).map(|j| u[(r, j)] * scales[j] * u[(c, j)]).sum()
    }))?
    .into_matrix();
    let raw_target = GaussianMoments {
        mean: sol.x[d..].to_vec(),
        cov: SymMatrix::new(Matrix::from_fn(d, d, |r, c| {
            (0..d).map(|j| u[(r, j)] * s[j] * s[j] * u[(c, j)]).sum()
        }))?,
        ridge: T::zero(),
    };
    finish(
        points,
        hs,
        &source,
        Extracted {
            a,
            structure: Structure::Psd,
            target_mean: sol.x[d..].to_vec(),
        },
        Some(raw_target),
        &sol,
        &timer,
    )
}

/// Isotropic rescaling `A = rI`, `r ∈ [1/k, K]`.
pub fn solve_gaussian_scaled<T: Scalar>(
    points: &Matrix<T>,
    hs: &Halfspace<T>,
    bounds: Bounds<T>,
    settings: &SolverSettings<T>,
) -> Result<SolveReport<T>> {
    check_group(points, hs)?;
    let timer = Timer::start();
    let source = estimate_moments(points)?;
    let d = source.dim();
    let tr = source.cov.trace();

    // (r − 1)² TrΣ_P
    let mut problem = ConvexProblem::new(1 + d);
    problem.hessian[(0, 0)] = T::lit(2.0) * tr;
    problem.linear[0] = -T::lit(2.0) * tr;
    problem.constant = tr;
    add_mean_term(&mut problem, &source.mean, 1);
    problem.add_constraint(Constraint::select(
        &[0],
        ConstraintSet::Box {
            lo: vec![bounds.lo()],
            hi: vec![bounds.hi()],
        },
    ));
    add_halfspace_rows(&mut problem, points, &source, hs, 1, |y, r| vec![(0, y[r])]);

    let mut warm = vec![T::one().max(bounds.lo()).min(bounds.hi())];
    warm.extend_from_slice(&source.mean);
    let sol = solve_operator_splitting(&problem, settings, Some(&warm))?;
    let r = sol.x[0].max(bounds.lo()).min(bounds.hi());
    let a = Matrix::identity(d).scale(r);
    let structure = if r > T::zero() { Structure::Scaled } else { Structure::Diagonal };
    let target_mean = sol.x[1..].to_vec();
    let raw_target = GaussianMoments {
        mean: target_mean.clone(),
        cov: source.cov.scale(r * r),
        ridge: T::zero(),
    };
    finish(
        points,
        hs,
        &source,
        Extracted {
            a,
            structure,
            target_mean,
        },
        Some(raw_target),
        &sol,
        &timer,
    )
}
