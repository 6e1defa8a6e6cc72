//! Empirical affine maps `x ↦ A x + b` with a spectral constraint on `A`.

use super::admm::{solve_operator_splitting, Constraint, ConstraintSet, SolverSettings};
use super::{check_group, combine, halfspace_shift, sum_sq_displacement, sym_index, Bounds, LeastSquares, SolveReport, Timer};
use crate::classifier::Halfspace;
use crate::error::{Error, Result};
use crate::maps::{AffineMap, Structure, TransportMap};
use crate::numerics::{project_spectral_box, project_spectral_norm_ball, Matrix, SymMatrix};
use crate::scalar::Scalar;

/// Where the entries of `A` live in the parameter vector.
#[derive(Clone, Copy)]
enum Layout {
    Full,
    Psd,
    Diagonal,
}

impl Layout {
    fn n_a(self, d: usize) -> usize {
        match self {
            Self::Full => d * d,
            Self::Psd => d * (d + 1) / 2,
            Self::Diagonal => d,
        }
    }
}

struct Indexer {
    layout: Layout,
    d: usize,
    sym: Vec<Vec<usize>>,
}

impl Indexer {
    fn new(layout: Layout, d: usize) -> Self {
        Self {
            layout,
            d,
            sym: sym_index(d),
        }
    }

    fn a(&self, r: usize, c: usize) -> Option<usize> {
        match self.layout {
            Layout::Full => Some(r * self.d + c),
            Layout::Psd => Some(self.sym[r][c]),
            Layout::Diagonal => (r == c).then_some(r),
        }
    }
}

fn mean<T: Scalar>(points: &Matrix<T>) -> Vec<T> {
    let n = T::from_usize_lossy(points.rows());
    (0..points.cols()).map(|j| points.column(j).into_iter().sum::<T>() / n).collect()
}

/// Parameterized as `x ↦ A(x − μ) + μ + c` with `μ` the group mean, which keeps the
/// least-squares system well scaled.
fn fit<T: Scalar>(
    points: &Matrix<T>,
    hs: &Halfspace<T>,
    bounds: Bounds<T>,
    layout: Layout,
    settings: &SolverSettings<T>,
) -> Result<SolveReport<T>> {
    check_group(points, hs)?;
    if points.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let timer = Timer::start();
    let (n, d) = (points.rows(), points.cols());
    let ix = Indexer::new(layout, d);
    let n_a = layout.n_a(d);
    let mu = mean(points);
    let y = Matrix::from_fn(n, d, |i, j| points[(i, j)] - mu[j]);

    let weight = T::one() / T::from_usize_lossy(n);
    let mut ls = LeastSquares::new(n_a + d);
    let image_row = |i: usize, r: usize| -> Vec<(usize, T)> {
        let mut row: Vec<(usize, T)> = (0..d).filter_map(|c| ix.a(r, c).map(|k| (k, y[(i, c)]))).collect();
        row.push((n_a + r, T::one()));
        row
    };
    for i in 0..n {
        for r in 0..d {
            ls.add(&image_row(i, r), y[(i, r)], weight);
        }
    }
    let mut problem = ls.into_problem();
    let wmu: T = hs.normal.iter().zip(&mu).map(|(&w, &m)| w * m).sum();
    for i in 0..n {
        let rows: Vec<_> = (0..d).map(|r| image_row(i, r)).collect();
        problem.add_inequality(combine(&rows, &hs.normal), hs.threshold() - wmu);
    }

    let (lo, hi) = (bounds.lo(), bounds.hi());
    match layout {
        Layout::Psd => {
            let rows = (0..d)
                .flat_map(|r| (0..d).map(move |c| (r, c)))
                .map(|(r, c)| vec![(ix.sym[r][c], T::one())])
                .collect();
            problem.add_constraint(Constraint::new(
                rows,
                vec![T::zero(); d * d],
                ConstraintSet::SpectralBox { dim: d, lo, hi },
            ));
        }
        Layout::Diagonal => {
            let idx: Vec<usize> = (0..d).collect();
            problem.add_constraint(Constraint::select(
                &idx,
                ConstraintSet::Box {
                    lo: vec![lo; d],
                    hi: vec![hi; d],
                },
            ));
        }
        Layout::Full => {
            if bounds.lower_inv.is_finite() {
                return Err(Error::UnsupportedConstraint(
                    "a lower Lipschitz bound on a general affine map is not convex".into(),
                ));
            }
            if hi.is_finite() {
                let idx: Vec<usize> = (0..d * d).collect();
                problem.add_constraint(Constraint::select(
                    &idx,
                    ConstraintSet::SpectralNormBall { dim: d, radius: hi },
                ));
            }
        }
    }

    let mut warm = vec![T::zero(); n_a + d];
    for r in 0..d {
        if let Some(k) = ix.a(r, r) {
            warm[k] = T::one().max(lo).min(hi);
        }
    }
    let sol = solve_operator_splitting(&problem, settings, Some(&warm))?;

    let raw = Matrix::from_fn(d, d, |r, c| ix.a(r, c).map_or(T::zero(), |k| sol.x[k]));
    let (a, structure) = match layout {
        Layout::Psd => (
            project_spectral_box(&SymMatrix::new(raw)?, lo, hi)?.into_matrix(),
            Structure::Psd,
        ),
        Layout::Diagonal => (
            Matrix::from_fn(d, d, |r, c| if r == c { raw[(r, r)].max(lo).min(hi) } else { T::zero() }),
            Structure::Diagonal,
        ),
        Layout::Full => (
            if hi.is_finite() { project_spectral_norm_ball(&raw, hi)? } else { raw },
            Structure::Full,
        ),
    };
    let amu = a.matvec(&mu);
    let mut b: Vec<T> = (0..d).map(|r| sol.x[n_a + r] + mu[r] - amu[r]).collect();
    let images = Matrix::from_fn(n, d, |i, r| {
        (0..d).map(|c| a[(r, c)] * points[(i, c)]).sum::<T>() + b[r]
    });
    let shift = halfspace_shift(&images, hs);
    for (bi, s) in b.iter_mut().zip(&shift) {
        *bi += *s;
    }
    let map = AffineMap::new(a, b, structure)?;
    let outputs = TransportMap::Affine(map.clone()).apply_all(points)?;
    let sum = sum_sq_displacement(points, &outputs);
    Ok(SolveReport {
        map: TransportMap::Affine(map),
        objective: sum * weight,
        objective_sum: sum,
        converged: sol.converged(),
        status: sol.status,
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        wall_time: timer.secs(),
        raw_target: None,
        failed_components: Vec::new(),
    })
}

/// Symmetric `A` with spectrum in `[1/k, K]`.
pub fn solve_affine_psd<T: Scalar>(
    points: &Matrix<T>,
    hs: &Halfspace<T>,
    bounds: Bounds<T>,
    settings: &SolverSettings<T>,
) -> Result<SolveReport<T>> {
    fit(points, hs, bounds, Layout::Psd, settings)
}

/// Diagonal `A` with entries in `[1/k, K]`.
pub fn solve_affine_diag<T: Scalar>(
    points: &Matrix<T>,
    hs: &Halfspace<T>,
    bounds: Bounds<T>,
    settings: &SolverSettings<T>,
) -> Result<SolveReport<T>> {
    fit(points, hs, bounds, Layout::Diagonal, settings)
}

/// Unstructured `A` with `‖A‖₂ ≤ K`. A finite lower bound is rejected.
pub fn solve_affine_full<T: Scalar>(
    points: &Matrix<T>,
    hs: &Halfspace<T>,
    bounds: Bounds<T>,
    settings: &SolverSettings<T>,
) -> Result<SolveReport<T>> {
    fit(points, hs, bounds, Layout::Full, settings)
}
