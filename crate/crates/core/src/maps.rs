//! Transport-map parameterizations, Gaussian moments and their closed forms.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::Standardization;
use crate::error::{Error, Result};
use crate::numerics::{
    dot, pd_inv_sqrt, psd_sqrt, singular_values, sq_dist, sub_vec, sym_eig, Cholesky, Matrix, SymMatrix,
    NOT_PSD_TOL, PSD_TOL,
};
use crate::scalar::Scalar;

/// Ridge target for near-singular covariance estimates.
pub const COVARIANCE_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Full,
    Psd,
    Diagonal,
    Scaled,
}

/// `x ↦ A x + b`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AffineMap<T> {
    pub a: Matrix<T>,
    pub b: Vec<T>,
    pub structure: Structure,
}

impl<T: Scalar> AffineMap<T> {
    /// Validates the structural invariant named by `structure`.
    pub fn new(a: Matrix<T>, b: Vec<T>, structure: Structure) -> Result<Self> {
        let d = b.len();
        if a.rows() != d || a.cols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: a.rows(),
            });
        }
        if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite affine map".into()));
        }
        match structure {
            Structure::Full => {}
            Structure::Psd => {
                let asym = (0..d).any(|i| (0..i).any(|j| a[(i, j)] != a[(j, i)]));
                if asym {
                    return Err(Error::InvalidInput("psd map must be symmetric".into()));
                }
                let min = sym_eig(&SymMatrix::new(a.clone())?)?.min();
                if min < -T::tol(PSD_TOL) * a.max_abs().max(T::one()) {
                    return Err(Error::NotPsd(min.as_f64()));
                }
            }
            Structure::Diagonal => {
                if (0..d).any(|i| (0..d).any(|j| i != j && a[(i, j)] != T::zero())) {
                    return Err(Error::InvalidInput("diagonal map has off-diagonal entries".into()));
                }
            }
            Structure::Scaled => {
                let s = a[(0, 0)];
                let off = (0..d).any(|i| (0..d).any(|j| a[(i, j)] != if i == j { s } else { T::zero() }));
                if off || s <= T::zero() {
                    return Err(Error::InvalidInput("scaled map must be s·I with s > 0".into()));
                }
            }
        }
        Ok(Self { a, b, structure })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            a: Matrix::identity(d),
            b: vec![T::zero(); d],
            structure: Structure::Scaled,
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut y = self.a.matvec(x);
        for (yi, &bi) in y.iter_mut().zip(&self.b) {
            *yi += bi;
        }
        Ok(y)
    }

    pub fn cast<U: Scalar>(&self) -> AffineMap<U> {
        AffineMap {
            a: self.a.cast(),
            b: self.b.iter().map(|v| U::lit(v.as_f64())).collect(),
            structure: self.structure,
        }
    }
}

/// Mean and covariance of a (fitted or target) Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GaussianMoments<T> {
    pub mean: Vec<T>,
    pub cov: SymMatrix<T>,
    /// Multiple of the identity already added to `cov`.
    pub ridge: T,
}

impl<T: Scalar> GaussianMoments<T> {
    pub fn new(mean: Vec<T>, cov: SymMatrix<T>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                got: mean.len(),
            });
        }
        if !cov.is_finite() || mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite moments".into()));
        }
        let min = sym_eig(&cov)?.min();
        if min < -T::tol(NOT_PSD_TOL) * cov.as_matrix().max_abs().max(T::one()) {
            return Err(Error::NotPsd(min.as_f64()));
        }
        Ok(Self {
            mean,
            cov,
            ridge: T::zero(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Adds `γ I` with `γ = max(0, 1e-8 − λ_min)` so the covariance is positive definite.
    pub fn regularized(&self) -> Result<Self> {
        let min = sym_eig(&self.cov)?.min();
        let gamma = (T::lit(COVARIANCE_RIDGE) - min).max(T::zero());
        Ok(Self {
            mean: self.mean.clone(),
            cov: self.cov.add_ridge(gamma),
            ridge: self.ridge + gamma,
        })
    }

    pub fn log_density(&self, x: &[T]) -> Result<T> {
        GaussianDensity::new(self)?.log_density(x)
    }
}

/// Cached factorization for repeated density evaluation.
#[derive(Debug, Clone)]
pub struct GaussianDensity<T> {
    mean: Vec<T>,
    chol: Cholesky<T>,
    log_norm: T,
}

impl<T: Scalar> GaussianDensity<T> {
    pub fn new(g: &GaussianMoments<T>) -> Result<Self> {
        let chol = Cholesky::factor(g.cov.as_matrix()).map_err(|_| Error::SingularCovariance)?;
        let d = T::from_usize_lossy(g.dim());
        let log_norm = -(d * T::lit(std::f64::consts::TAU).ln() + chol.log_det()) / T::lit(2.0);
        Ok(Self {
            mean: g.mean.clone(),
            chol,
            log_norm,
        })
    }

    pub fn log_density(&self, x: &[T]) -> Result<T> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        let r = sub_vec(x, &self.mean);
        let z = self.chol.solve_lower(&r);
        Ok(self.log_norm - dot(&z, &z) / T::lit(2.0))
    }
}

/// Sample mean and population covariance, ridged to be positive definite.
pub fn estimate_moments<T: Scalar>(points: &Matrix<T>) -> Result<GaussianMoments<T>> {
    let (n, d) = (points.rows(), points.cols());
    if n < 2 {
        return Err(Error::NotEnoughSamples(format!("moments need 2 points, got {n}")));
    }
    let nt = T::from_usize_lossy(n);
    let mean: Vec<T> = (0..d).map(|j| (0..n).map(|i| points[(i, j)]).sum::<T>() / nt).collect();
    let mut cov = Matrix::zeros(d, d);
    for i in 0..n {
        let r = sub_vec(points.row(i), &mean);
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += r[a] * r[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / nt;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    GaussianMoments {
        mean,
        cov: SymMatrix::new(cov)?,
        ridge: T::zero(),
    }
    .regularized()
}

/// Monge map between two Gaussians: `A = Σ_P^{-½}(Σ_P^{½} Σ_Q Σ_P^{½})^{½} Σ_P^{-½}`, `b = μ_Q − A μ_P`.
pub fn gaussian_to_affine<T: Scalar>(p: &GaussianMoments<T>, q: &GaussianMoments<T>) -> Result<AffineMap<T>> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let p = if sym_eig(&p.cov)?.min() > T::zero() { p.clone() } else { p.regularized()? };
    let s = psd_sqrt(&p.cov)?;
    let si = pd_inv_sqrt(&p.cov)?;
    let mid = psd_sqrt(&q.cov.congruence(s.as_matrix()))?;
    let a = SymMatrix::new(mid.congruence(si.as_matrix()).into_matrix())?.into_matrix();
    let am = a.matvec(&p.mean);
    let b = sub_vec(&q.mean, &am);
    AffineMap::new(a, b, Structure::Psd)
}

/// Law of `A x + b` for `x ~ p`.
pub fn pushforward<T: Scalar>(p: &GaussianMoments<T>, map: &AffineMap<T>) -> Result<GaussianMoments<T>> {
    let mean = map.apply(&p.mean)?;
    Ok(GaussianMoments {
        mean,
        cov: p.cov.congruence(&map.a),
        ridge: T::zero(),
    })
}

/// Squared 2-Wasserstein distance between two Gaussians.
pub fn closed_form_w2<T: Scalar>(p: &GaussianMoments<T>, q: &GaussianMoments<T>) -> Result<T> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let mean_term = sq_dist(&p.mean, &q.mean);
    let sq = psd_sqrt(&q.cov)?;
    let cross = psd_sqrt(&p.cov.congruence(sq.as_matrix()))?;
    let cov_term = p.cov.trace() + q.cov.trace() - T::lit(2.0) * cross.trace();
    Ok((mean_term + cov_term).max(T::zero()))
}

/// Smallest admissible constants of an affine map: `K = σ_max`, `k = 1/σ_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiLipschitzBounds<T> {
    pub upper: T,
    /// `1/σ_min`; infinite when `singular` is set.
    pub lower_inv: T,
    pub singular: bool,
}

pub fn analytic_bilipschitz<T: Scalar>(map: &AffineMap<T>) -> Result<BiLipschitzBounds<T>> {
    let sv = singular_values(&map.a)?;
    let (hi, lo) = (sv[0], sv[sv.len() - 1]);
    let singular = lo <= T::epsilon() * hi.max(T::one());
    Ok(BiLipschitzBounds {
        upper: hi,
        lower_inv: if singular { T::infinity() } else { T::one() / lo },
        singular,
    })
}

/// Whether every singular value of `a` lies in `[1/k − tol, K + tol]`.
pub fn within_bilipschitz<T: Scalar>(a: &Matrix<T>, upper: T, lower_inv: T, tol: T) -> Result<bool> {
    let sv = singular_values(a)?;
    let lo = T::one() / lower_inv;
    Ok(sv.iter().all(|&s| s >= lo - tol && s <= upper + tol))
}

/// Fitted Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GmmModel<T> {
    pub weights: Vec<T>,
    pub components: Vec<GaussianMoments<T>>,
    /// Posterior responsibilities of the fitting sample, one row per point.
    pub responsibilities: Matrix<T>,
}

impl<T: Scalar> GmmModel<T> {
    pub fn new(weights: Vec<T>, components: Vec<GaussianMoments<T>>, responsibilities: Matrix<T>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::InvalidInput("mixture needs one weight per component".into()));
        }
        let sum: T = weights.iter().copied().sum();
        if weights.iter().any(|&w| w < T::zero()) || (sum - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::InvalidInput("mixture weights must be nonnegative and sum to 1".into()));
        }
        Ok(Self {
            weights,
            components,
            responsibilities,
        })
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn router(&self) -> Result<GmmRouter<T>> {
        let densities = self
            .components
            .iter()
            .map(GaussianDensity::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(GmmRouter {
            log_weights: self.weights.iter().map(|w| w.ln()).collect(),
            densities,
        })
    }
}

/// Hard assignment of points to mixture components.
#[derive(Debug, Clone)]
pub struct GmmRouter<T> {
    log_weights: Vec<T>,
    densities: Vec<GaussianDensity<T>>,
}

impl<T: Scalar> GmmRouter<T> {
    /// Unnormalized log posteriors `ln w_j + ln N_j(x)`.
    pub fn log_posteriors(&self, x: &[T]) -> Result<Vec<T>> {
        self.log_weights
            .iter()
            .zip(&self.densities)
            .map(|(&lw, g)| Ok(lw + g.log_density(x)?))
            .collect()
    }

    /// Component of maximal responsibility; ties go to the lowest index.
    pub fn route(&self, x: &[T]) -> Result<usize> {
        let lp = self.log_posteriors(x)?;
        let mut best = 0;
        for j in 1..lp.len() {
            if lp[j] > lp[best] {
                best = j;
            }
        }
        Ok(best)
    }
}

/// Counterfactual images recorded for the members of one fitting group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PointwiseMap<T> {
    pub indices: Vec<usize>,
    pub inputs: Matrix<T>,
    pub outputs: Matrix<T>,
}

/// Component-wise coupling of a source mixture to per-component targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GmmCounterfactual<T> {
    pub source: GmmModel<T>,
    pub targets: Vec<GaussianMoments<T>>,
    pub maps: Vec<AffineMap<T>>,
}

impl<T: Scalar> GmmCounterfactual<T> {
    pub fn weights(&self) -> &[T] {
        &self.source.weights
    }

    /// `(Σ w_j A_j, Σ w_j b_j)`
    pub fn average_map(&self) -> (Matrix<T>, Vec<T>) {
        let d = self.source.dim();
        let mut a = Matrix::zeros(d, d);
        let mut b = vec![T::zero(); d];
        for (w, m) in self.weights().iter().zip(&self.maps) {
            a = a.add(&m.a.scale(*w));
            for (bi, &mi) in b.iter_mut().zip(&m.b) {
                *bi += *w * mi;
            }
        }
        (a, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum TransportMap<T> {
    Pointwise(PointwiseMap<T>),
    Affine(AffineMap<T>),
    GaussianPair {
        source: GaussianMoments<T>,
        target: GaussianMoments<T>,
        map: AffineMap<T>,
    },
    Gmm(GmmCounterfactual<T>),
}

impl<T: Scalar> TransportMap<T> {
    pub fn is_pointwise(&self) -> bool {
        matches!(self, Self::Pointwise(_))
    }

    /// The affine map, for every variant that has a single one.
    pub fn affine(&self) -> Option<&AffineMap<T>> {
        match self {
            Self::Affine(m) | Self::GaussianPair { map: m, .. } => Some(m),
            _ => None,
        }
    }

    /// Image of `x`. Pointwise maps only know their fitting inputs (matched exactly).
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        match self {
            Self::Pointwise(p) => (0..p.inputs.rows())
                .find(|&i| p.inputs.row(i) == x)
                .map(|i| p.outputs.row(i).to_vec())
                .ok_or(Error::NotGeneralizable),
            Self::Affine(m) | Self::GaussianPair { map: m, .. } => m.apply(x),
            Self::Gmm(g) => {
                let j = g.source.router()?.route(x)?;
                g.maps[j].apply(x)
            }
        }
    }

    /// Images of every row of `points`.
    pub fn apply_all(&self, points: &Matrix<T>) -> Result<Matrix<T>> {
        let mut out = Matrix::zeros(points.rows(), points.cols());
        let router = match self {
            Self::Gmm(g) => Some(g.source.router()?),
            _ => None,
        };
        for i in 0..points.rows() {
            let x = points.row(i);
            let y = match (self, &router) {
                (Self::Gmm(g), Some(r)) => g.maps[r.route(x)?].apply(x)?,
                _ => self.apply(x)?,
            };
            for (j, v) in y.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    /// Image of the `i`-th fitting-group member (pointwise maps only).
    pub fn apply_member(&self, i: usize) -> Result<Vec<T>> {
        match self {
            Self::Pointwise(p) if i < p.outputs.rows() => Ok(p.outputs.row(i).to_vec()),
            Self::Pointwise(_) => Err(Error::InvalidInput(format!("no fitting member {i}"))),
            _ => Err(Error::InvalidInput("member lookup applies to pointwise maps".into())),
        }
    }
}

/// Fitting context stored alongside a serialized map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MapMetadata<T> {
    pub method: String,
    /// Upper bi-Lipschitz constant `K`; absent when unconstrained.
    pub k_upper: Option<T>,
    /// Lower constant `k`; absent when unconstrained.
    pub k_lower: Option<T>,
    pub alpha: T,
    pub group_id: usize,
    pub target_class: u8,
    pub feature_names: Vec<String>,
    pub standardization: Option<Standardization<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MapArtifact<T> {
    pub map: TransportMap<T>,
    pub metadata: MapMetadata<T>,
}

impl<T: Scalar> MapArtifact<T> {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gm(mean: &[f64], cov: &[&[f64]]) -> GaussianMoments<f64> {
        GaussianMoments::new(mean.to_vec(), SymMatrix::from_f64_rows(cov)).unwrap()
    }

    #[test]
    fn identity_and_scaling() {
        let id = TransportMap::Affine(AffineMap::<f64>::identity(2));
        assert_eq!(id.apply(&[1.5, -2.0]).unwrap(), vec![1.5, -2.0]);
        let m = AffineMap::new(Matrix::from_f64_rows(&[&[2.0, 0.0], &[0.0, 2.0]]), vec![0.0, 0.0], Structure::Scaled)
            .unwrap();
        assert_eq!(m.apply(&[1.0, -1.0]).unwrap(), vec![2.0, -2.0]);
    }

    #[test]
    fn structure_tags_validated() {
        let sym = Matrix::from_f64_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(AffineMap::new(sym.clone(), vec![0.0; 2], Structure::Psd), Err(Error::NotPsd(_))));
        assert!(AffineMap::new(sym.clone(), vec![0.0; 2], Structure::Diagonal).is_err());
        assert!(AffineMap::new(sym, vec![0.0; 2], Structure::Full).is_ok());
        let neg = Matrix::from_f64_rows(&[&[-1.0, 0.0], &[0.0, -1.0]]);
        assert!(AffineMap::new(neg, vec![0.0; 2], Structure::Scaled).is_err());
    }

    #[test]
    fn pointwise_rejects_unseen_points() {
        let p = TransportMap::Pointwise(PointwiseMap {
            indices: vec![4],
            inputs: Matrix::from_f64_rows(&[&[0.0, 0.0]]),
            outputs: Matrix::from_f64_rows(&[&[1.0, 0.0]]),
        });
        assert_eq!(p.apply(&[0.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(p.apply(&[0.0, 0.1]), Err(Error::NotGeneralizable)));
        assert_eq!(p.apply_member(0).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn scalar_covariance_map() {
        let p = gm(&[0.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        let q = gm(&[1.0, 1.0], &[&[4.0, 0.0], &[0.0, 4.0]]);
        let m = gaussian_to_affine(&p, &q).unwrap();
        assert!(m.a.sub(&Matrix::from_f64_rows(&[&[2.0, 0.0], &[0.0, 2.0]])).max_abs() < 1e-12);
        assert!((m.b[0] - 1.0).abs() < 1e-12 && (m.b[1] - 1.0).abs() < 1e-12);
        let same = gaussian_to_affine(&q, &q).unwrap();
        assert!(same.a.sub(&Matrix::identity(2)).max_abs() < 1e-10);
        assert!(same.b.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn two_point_moments() {
        let pts = Matrix::from_f64_rows(&[&[0.0, 0.0], &[2.0, 0.0]]);
        let g = estimate_moments::<f64>(&pts).unwrap();
        assert_eq!(g.mean, vec![1.0, 0.0]);
        assert!((g.cov[(0, 0)] - (1.0 + 1e-8)).abs() < 1e-15);
        assert!((g.cov[(1, 1)] - 1e-8).abs() < 1e-15);
        assert_eq!(g.cov[(0, 1)], 0.0);
        assert!((g.ridge - 1e-8).abs() < 1e-20);
        assert!(estimate_moments(&Matrix::<f64>::from_f64_rows(&[&[1.0, 2.0]])).is_err());
    }

    #[test]
    fn bilipschitz_examples() {
        let m = AffineMap::<f64>::new(Matrix::from_diag(&[2.0, 0.5]), vec![0.0; 2], Structure::Diagonal).unwrap();
        let b = analytic_bilipschitz(&m).unwrap();
        assert!((b.upper - 2.0).abs() < 1e-12 && (b.lower_inv - 2.0).abs() < 1e-12);
        let (c, s) = (0.6, 0.8);
        let rot = AffineMap::<f64>::new(Matrix::from_f64_rows(&[&[c, -s], &[s, c]]), vec![0.0; 2], Structure::Full).unwrap();
        let b = analytic_bilipschitz(&rot).unwrap();
        assert!((b.upper - 1.0).abs() < 1e-12 && (b.lower_inv - 1.0).abs() < 1e-12);
        let sing = AffineMap::<f64>::new(Matrix::from_diag(&[1.0, 0.0]), vec![0.0; 2], Structure::Diagonal).unwrap();
        let b = analytic_bilipschitz(&sing).unwrap();
        assert!(b.singular && b.lower_inv.is_infinite());
    }

    #[test]
    fn w2_examples() {
        let p = gm(&[0.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        let q = gm(&[3.0, 4.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!((closed_form_w2(&p, &q).unwrap() - 25.0).abs() < 1e-10);
        let q = gm(&[0.0, 0.0], &[&[4.0, 0.0], &[0.0, 4.0]]);
        assert!((closed_form_w2(&p, &q).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn map_json_round_trip() {
        let p = gm(&[0.0, 1.0], &[&[2.0, 0.3], &[0.3, 1.0]]);
        let q = gm(&[1.0, 1.0], &[&[1.0, 0.1], &[0.1, 1.5]]);
        let map = gaussian_to_affine(&p, &q).unwrap();
        let art = MapArtifact {
            map: TransportMap::GaussianPair { source: p, target: q, map },
            metadata: MapMetadata {
                method: "gaussian".into(),
                k_upper: Some(2.0),
                k_lower: None,
                alpha: 0.8,
                group_id: 3,
                target_class: 1,
                feature_names: vec!["a".into(), "b".into()],
                standardization: None,
            },
        };
        let s = serde_json::to_string(&art).unwrap();
        assert!(s.contains("\"kind\":\"gaussian_pair\""));
        let back: MapArtifact<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, art);
    }
}
