use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Evaluation, MooProblem};
use crate::error::{Error, Result};
use crate::maps::{estimate_moments, AffineMap, Structure};
use crate::metrics::{distortion, empirical_bounds, empirical_w2};
use crate::numerics::{project_psd, sub_vec, sym_eig, Matrix, SymMatrix};

/// Black-box probability of the target class.
pub type ScoreFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `min (x², (x − 2)²)` on `[−5, 5]`: the Pareto set is `[0, 2]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TwoParabolas;

impl TwoParabolas {
    /// Normalized hypervolume of the exact front w.r.t. ideal `(0,0)`, nadir `(4,4)`, reference `(1,1)`.
    pub const NORMALIZED_HV: f64 = 5.0 / 6.0;
    pub const IDEAL: [f64; 2] = [0.0, 0.0];
    pub const NADIR: [f64; 2] = [4.0, 4.0];
}

impl MooProblem for TwoParabolas {
    fn n_vars(&self) -> usize {
        1
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-5.0], vec![5.0])
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        Evaluation {
            objectives: [x[0] * x[0], (x[0] - 2.0) * (x[0] - 2.0)],
            violation: 0.0,
        }
    }
}

/// Map family searched by the genetic algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    AffineDiagonal,
    AffinePsd,
    Gaussian,
    GaussianCommutative,
    GaussianScaled,
    Pointwise,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::AffineDiagonal,
        Family::AffinePsd,
        Family::Gaussian,
        Family::GaussianCommutative,
        Family::GaussianScaled,
        Family::Pointwise,
    ];

    /// Number of genes for dimension `d` and `n` fitting points.
    pub fn n_params(self, d: usize, n: usize) -> usize {
        let packed = d * (d + 1) / 2;
        match self {
            Family::AffineDiagonal | Family::GaussianCommutative => 2 * d,
            Family::AffinePsd => packed + d,
            Family::Gaussian => d * (d + 1) + d,
            Family::GaussianScaled => d + 1,
            Family::Pointwise => n * d,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::AffineDiagonal => "affine-diag",
            Family::AffinePsd => "affine-psd",
            Family::Gaussian => "gaussian",
            Family::GaussianCommutative => "gaussian-commutative",
            Family::GaussianScaled => "gaussian-scaled",
            Family::Pointwise => "pointwise",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown family '{s}'")))
    }
}

const SCALE_RANGE: (f64, f64) = (0.05, 5.0);
const OFFDIAG_RANGE: f64 = 2.0;
const VALIDITY_EPS: f64 = 1e-12;

/// Objectives `(empirical W₂², distortion)` of a map applied to a fixed group, subject to every
/// image scoring strictly above `alpha`.
///
/// Every non-pointwise family maps `x ↦ A(x − μ) + m` with `μ` the group mean, `m` a free
/// location gene block and `A` decoded from the leading genes.
pub struct CounterfactualProblem {
    pub family: Family,
    points: Matrix<f64>,
    score: ScoreFn,
    alpha: f64,
    mean: Vec<f64>,
    /// Eigenvectors of the group covariance (commutative family).
    basis: Matrix<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl std::fmt::Debug for CounterfactualProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CounterfactualProblem")
            .field("family", &self.family)
            .field("n", &self.points.rows())
            .field("d", &self.points.cols())
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl CounterfactualProblem {
    pub fn new(family: Family, points: Matrix<f64>, score: ScoreFn, alpha: f64) -> Result<Self> {
        let (n, d) = (points.rows(), points.cols());
        if n == 0 || d == 0 {
            return Err(Error::EmptyDataset);
        }
        if !points.is_finite() {
            return Err(Error::InvalidInput("non-finite points".into()));
        }
        let mut data_lo = vec![f64::INFINITY; d];
        let mut data_hi = vec![f64::NEG_INFINITY; d];
        for i in 0..n {
            for k in 0..d {
                data_lo[k] = data_lo[k].min(points[(i, k)]);
                data_hi[k] = data_hi[k].max(points[(i, k)]);
            }
        }
        // Location genes may travel three spans (plus one unit) beyond the data.
        let margin: Vec<f64> = (0..d).map(|k| 3.0 * (data_hi[k] - data_lo[k] + 1.0)).collect();
        let loc_lo: Vec<f64> = (0..d).map(|k| data_lo[k] - margin[k]).collect();
        let loc_hi: Vec<f64> = (0..d).map(|k| data_hi[k] + margin[k]).collect();

        let (mean, basis) = if n >= 2 {
            let m = estimate_moments(&points)?;
            let basis = sym_eig(&m.cov)?.eigenvectors;
            (m.mean, basis)
        } else {
            (points.row(0).to_vec(), Matrix::identity(d))
        };

        let mut lo = Vec::with_capacity(family.n_params(d, n));
        let mut hi = Vec::with_capacity(lo.capacity());
        let push_packed = |lo: &mut Vec<f64>, hi: &mut Vec<f64>| {
            for r in 0..d {
                for c in r..d {
                    if r == c {
                        lo.push(SCALE_RANGE.0);
                        hi.push(SCALE_RANGE.1);
                    } else {
                        lo.push(-OFFDIAG_RANGE);
                        hi.push(OFFDIAG_RANGE);
                    }
                }
            }
        };
        match family {
            Family::AffineDiagonal | Family::GaussianCommutative => {
                lo.extend(std::iter::repeat_n(SCALE_RANGE.0, d));
                hi.extend(std::iter::repeat_n(SCALE_RANGE.1, d));
            }
            Family::GaussianScaled => {
                lo.push(SCALE_RANGE.0);
                hi.push(SCALE_RANGE.1);
            }
            Family::AffinePsd => push_packed(&mut lo, &mut hi),
            Family::Gaussian => {
                push_packed(&mut lo, &mut hi);
                push_packed(&mut lo, &mut hi);
            }
            Family::Pointwise => {
                for _ in 0..n {
                    lo.extend_from_slice(&loc_lo);
                    hi.extend_from_slice(&loc_hi);
                }
            }
        }
        if family != Family::Pointwise {
            lo.extend_from_slice(&loc_lo);
            hi.extend_from_slice(&loc_hi);
        }
        debug_assert_eq!(lo.len(), family.n_params(d, n));
        Ok(Self {
            family,
            points,
            score,
            alpha,
            mean,
            basis,
            lo,
            hi,
        })
    }

    pub fn points(&self) -> &Matrix<f64> {
        &self.points
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn packed_sym(&self, genes: &[f64]) -> Result<Matrix<f64>> {
        let d = self.points.cols();
        let mut a = Matrix::zeros(d, d);
        let mut k = 0;
        for r in 0..d {
            for c in r..d {
                a[(r, c)] = genes[k];
                a[(c, r)] = genes[k];
                k += 1;
            }
        }
        Ok(project_psd(&SymMatrix::new(a)?)?.into_matrix())
    }

    /// The affine map encoded by `params`; `None` for the pointwise family.
    pub fn decode_map(&self, params: &[f64]) -> Result<Option<AffineMap<f64>>> {
        let (n, d) = (self.points.rows(), self.points.cols());
        if params.len() != self.family.n_params(d, n) {
            return Err(Error::DimensionMismatch {
                expected: self.family.n_params(d, n),
                got: params.len(),
            });
        }
        let packed = d * (d + 1) / 2;
        let (a, structure) = match self.family {
            Family::Pointwise => return Ok(None),
            Family::AffineDiagonal => (Matrix::from_diag(&params[..d]), Structure::Diagonal),
            Family::GaussianScaled => (Matrix::from_diag(&vec![params[0]; d]), Structure::Scaled),
            Family::AffinePsd | Family::Gaussian => (self.packed_sym(&params[..packed])?, Structure::Psd),
            Family::GaussianCommutative => {
                let u = &self.basis;
                let s = &params[..d];
                let a = Matrix::from_fn(d, d, |i, j| (0..d).map(|k| u[(i, k)] * s[k] * u[(j, k)]).sum::<f64>());
                // Symmetrize against rounding so the map passes the psd check.
                let a: Matrix<f64> = Matrix::from_fn(d, d, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
                (a, Structure::Psd)
            }
        };
        let loc = &params[params.len() - d..];
        let shift = a.matvec(&self.mean);
        let b = sub_vec(loc, &shift);
        AffineMap::new(a, b, structure).map(Some)
    }

    /// Images of the fitting points under `params`.
    pub fn decode_images(&self, params: &[f64]) -> Result<Matrix<f64>> {
        match self.decode_map(params)? {
            None => Matrix::from_row_major(self.points.rows(), self.points.cols(), params.to_vec()),
            Some(map) => {
                let rows = (0..self.points.rows())
                    .map(|i| map.apply(self.points.row(i)))
                    .collect::<Result<Vec<_>>>()?;
                Matrix::from_rows(&rows)
            }
        }
    }

    fn try_evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let images = self.decode_images(x)?;
        let w2 = empirical_w2(&self.points, &images)?;
        let dist = match empirical_bounds(&self.points, &images) {
            Ok(b) => distortion(b.upper, b.lower).value,
            Err(Error::UndefinedBounds) => 0.0,
            Err(e) => return Err(e),
        };
        let violation = (0..images.rows())
            .map(|i| (self.score)(images.row(i)))
            .filter(|&s| s <= self.alpha)
            .map(|s| self.alpha - s + VALIDITY_EPS)
            .sum();
        Ok(Evaluation {
            objectives: [w2, dist],
            violation,
        })
    }
}

impl MooProblem for CounterfactualProblem {
    fn n_vars(&self) -> usize {
        self.lo.len()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lo.clone(), self.hi.clone())
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        self.try_evaluate(x).unwrap_or(Evaluation {
            objectives: [f64::INFINITY, f64::INFINITY],
            violation: f64::INFINITY,
        })
    }
}
