//! L2-regularized logistic regression and the halfspace it induces on counterfactuals.

use serde::{Deserialize, Serialize};

use crate::dataio::{fold_indices, Standardization};
use crate::error::{Error, Result};
use crate::numerics::{dot, norm, Cholesky, Matrix};
use crate::scalar::Scalar;

/// Strict score inequalities are closed with this margin (logit units).
pub const SCORE_MARGIN: f64 = 1e-6;

const MAX_NEWTON_ITER: usize = 500;
const GRAD_TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 60;
const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearModel<T> {
    pub weights: Vec<T>,
    pub intercept: T,
    pub l2_penalty: T,
}

impl<T: Scalar> LinearModel<T> {
    pub fn new(weights: Vec<T>, intercept: T, l2_penalty: T) -> Self {
        Self {
            weights,
            intercept,
            l2_penalty,
        }
    }

    #[inline]
    pub fn logit(&self, x: &[T]) -> T {
        dot(&self.weights, x) + self.intercept
    }

    /// Predicted class; probability exactly 0.5 goes to class 1.
    pub fn predict(&self, x: &[T]) -> u8 {
        u8::from(self.logit(x) >= T::zero())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LogisticFit<T> {
    pub model: LinearModel<T>,
    pub converged: bool,
    /// The training data is perfectly separated and no penalty bounds the weights.
    pub separable: bool,
    pub iterations: usize,
    pub gradient_norm: T,
    pub cross_entropy: T,
}

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

#[inline]
pub fn logit<T: Scalar>(p: T) -> T {
    (p / (T::one() - p)).ln()
}

fn check_xy<T: Scalar>(x: &Matrix<T>, y: &[u8]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if x.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidInput(format!("label {bad} is not binary")));
    }
    Ok(())
}

/// Mean cross-entropy plus `penalty·‖w‖²/2` (intercept unpenalized).
fn penalized_loss<T: Scalar>(x: &Matrix<T>, y: &[u8], theta: &[T], penalty: T) -> T {
    let d = x.cols();
    let n = T::from_usize_lossy(x.rows());
    let ce = (0..x.rows())
        .map(|i| {
            let z = dot(&theta[..d], x.row(i)) + theta[d];
            softplus(z) - if y[i] == 1 { z } else { T::zero() }
        })
        .sum::<T>()
        / n;
    let w2 = theta[..d].iter().map(|&v| v * v).sum::<T>();
    ce + penalty * w2 / T::lit(2.0)
}

/// Minimizes mean cross-entropy + `l2_penalty·‖w‖²/2` by damped Newton.
pub fn fit_logistic<T: Scalar>(x: &Matrix<T>, y: &[u8], l2_penalty: T) -> Result<LogisticFit<T>> {
    check_xy(x, y)?;
    if !(l2_penalty >= T::zero()) {
        return Err(Error::InvalidInput("penalty must be nonnegative".into()));
    }
    let (n, d) = (x.rows(), x.cols());
    let nt = T::from_usize_lossy(n);
    let p = d + 1;
    let mut theta = vec![T::zero(); p];
    let mut loss = penalized_loss(x, y, &theta, l2_penalty);
    let mut iterations = 0;
    let mut grad_norm;

    loop {
        let mut g = vec![T::zero(); p];
        let mut h = Matrix::zeros(p, p);
        for i in 0..n {
            let xi = x.row(i);
            let z = dot(&theta[..d], xi) + theta[d];
            let s = sigmoid(z);
            let r = s - if y[i] == 1 { T::one() } else { T::zero() };
            let c = s * (T::one() - s);
            for a in 0..p {
                let xa = if a < d { xi[a] } else { T::one() };
                g[a] += r * xa;
                for b in a..p {
                    let xb = if b < d { xi[b] } else { T::one() };
                    h[(a, b)] += c * xa * xb;
                }
            }
        }
        for a in 0..p {
            g[a] /= nt;
            for b in a..p {
                let v = h[(a, b)] / nt;
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
        for a in 0..d {
            g[a] += l2_penalty * theta[a];
            h[(a, a)] += l2_penalty;
        }
        grad_norm = norm(&g);
        if grad_norm <= T::tol(GRAD_TOL) || iterations >= MAX_NEWTON_ITER {
            break;
        }
        iterations += 1;

        let step: Vec<T> = match Cholesky::factor(&h) {
            Ok(ch) => ch.solve(&g).into_iter().map(|v| -v).collect(),
            Err(_) => g.iter().map(|&v| -v).collect(),
        };
        let slope = dot(&g, &step);
        let (step, slope) = if slope < T::zero() {
            (step, slope)
        } else {
            let sd: Vec<T> = g.iter().map(|&v| -v).collect();
            let s = -dot(&g, &g);
            (sd, s)
        };
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<T> = theta.iter().zip(&step).map(|(&a, &s)| a + t * s).collect();
            let cand_loss = penalized_loss(x, y, &cand, l2_penalty);
            if cand_loss <= loss + T::lit(1e-4) * t * slope {
                theta = cand;
                loss = cand_loss;
                accepted = true;
                break;
            }
            t /= T::lit(2.0);
        }
        if !accepted {
            break;
        }
    }

    let separable = l2_penalty == T::zero()
        && (0..n).all(|i| {
            let z = dot(&theta[..d], x.row(i)) + theta[d];
            if y[i] == 1 {
                z > T::zero()
            } else {
                z < T::zero()
            }
        });
    let converged = grad_norm <= T::tol(GRAD_TOL) && !separable;
    let model = LinearModel::new(theta[..d].to_vec(), theta[d], l2_penalty);
    let cross_entropy = cross_entropy(&model, x, y)?;
    Ok(LogisticFit {
        model,
        converged,
        separable,
        iterations,
        gradient_norm: grad_norm,
        cross_entropy,
    })
}

/// Mean cross-entropy with probabilities clipped away from 0 and 1.
pub fn cross_entropy<T: Scalar>(model: &LinearModel<T>, x: &Matrix<T>, y: &[u8]) -> Result<T> {
    check_xy(x, y)?;
    let eps = T::tol(1e-15);
    let total: T = (0..x.rows())
        .map(|i| {
            let p = sigmoid(model.logit(x.row(i))).max(eps).min(T::one() - eps);
            if y[i] == 1 {
                -p.ln()
            } else {
                -(T::one() - p).ln()
            }
        })
        .sum();
    Ok(total / T::from_usize_lossy(x.rows()))
}

/// `{0}` followed by nine log-spaced penalties in `[1e-2, 1e2]`.
pub fn penalty_grid<T: Scalar>() -> Vec<T> {
    std::iter::once(T::zero())
        .chain((0..9).map(|i| T::lit(10f64.powf(-2.0 + 0.5 * i as f64))))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GridSearch<T> {
    pub best_penalty: T,
    pub cv_cross_entropy: T,
    /// `(penalty, mean validation cross-entropy)` for every grid point.
    pub scores: Vec<(T, T)>,
}

/// K-fold cross-validated choice of the L2 penalty; ties go to the larger penalty.
pub fn grid_search_cv<T: Scalar>(x: &Matrix<T>, y: &[u8], folds: usize, seed: u64) -> Result<GridSearch<T>> {
    check_xy(x, y)?;
    if folds < 2 || x.rows() < folds {
        return Err(Error::NotEnoughSamples(format!(
            "{} samples for {folds}-fold cross-validation",
            x.rows()
        )));
    }
    let parts = fold_indices(x.rows(), folds, seed);
    let d = x.cols();
    let take = |idx: &[usize]| -> (Matrix<T>, Vec<u8>) {
        (
            Matrix::from_fn(idx.len(), d, |i, j| x[(idx[i], j)]),
            idx.iter().map(|&i| y[i]).collect(),
        )
    };

    let mut scores = Vec::new();
    for penalty in penalty_grid::<T>() {
        let mut total = T::zero();
        for (f, holdout) in parts.iter().enumerate() {
            let train: Vec<usize> = parts
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, p)| p.iter().copied())
                .collect();
            let (xt, yt) = take(&train);
            let (xv, yv) = take(holdout);
            let fit = fit_logistic(&xt, &yt, penalty)?;
            total += cross_entropy(&fit.model, &xv, &yv)?;
        }
        scores.push((penalty, total / T::from_usize_lossy(folds)));
    }

    let mut best = scores[0];
    for &(pen, ce) in &scores[1..] {
        let tie = (ce - best.1).abs() <= T::tol(TIE_RTOL) * ce.abs().max(best.1.abs());
        if ce < best.1 || (tie && pen > best.0) {
            best = (pen, ce);
        }
    }
    Ok(GridSearch {
        best_penalty: best.0,
        cv_cross_entropy: best.1,
        scores,
    })
}

/// Probability the model assigns to `target_class`.
pub fn score<T: Scalar>(model: &LinearModel<T>, x: &[T], target_class: u8) -> Result<T> {
    if x.len() != model.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: model.weights.len(),
            got: x.len(),
        });
    }
    let p1 = sigmoid(model.logit(x));
    Ok(if target_class == 1 { p1 } else { T::one() - p1 })
}

/// The closed set `normalᵀx ≥ offset + margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Halfspace<T> {
    pub normal: Vec<T>,
    pub offset: T,
    pub margin: T,
}

impl<T: Scalar> Halfspace<T> {
    pub fn new(normal: Vec<T>, offset: T) -> Result<Self> {
        if norm(&normal) <= T::zero() {
            return Err(Error::NoDecisionBoundary);
        }
        Ok(Self {
            normal,
            offset,
            margin: T::lit(SCORE_MARGIN),
        })
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// Right-hand side every solver enforces.
    #[inline]
    pub fn threshold(&self) -> T {
        self.offset + self.margin
    }

    /// Signed slack `normalᵀx − threshold`; nonnegative means satisfied.
    #[inline]
    pub fn slack(&self, x: &[T]) -> T {
        dot(&self.normal, x) - self.threshold()
    }

    /// Closest point of the closed halfspace.
    pub fn project(&self, x: &[T]) -> Vec<T> {
        let gap = -self.slack(x);
        if gap <= T::zero() {
            return x.to_vec();
        }
        let s = gap / dot(&self.normal, &self.normal);
        x.iter().zip(&self.normal).map(|(&xi, &wi)| xi + s * wi).collect()
    }
}

/// The halfspace of points scored at least `alpha` for `target_class`.
pub fn halfspace<T: Scalar>(model: &LinearModel<T>, target_class: u8, alpha: T) -> Result<Halfspace<T>> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let t = logit(alpha);
    if target_class == 1 {
        Halfspace::new(model.weights.clone(), t - model.intercept)
    } else {
        Halfspace::new(model.weights.iter().map(|&w| -w).collect(), t + model.intercept)
    }
}

/// Serialized classifier with everything needed to score raw inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelArtifact<T> {
    pub feature_names: Vec<String>,
    pub weights: Vec<T>,
    pub intercept: T,
    pub l2_penalty: T,
    pub standardization: Standardization<T>,
    pub label_values: Vec<String>,
    pub cv_cross_entropy: Option<T>,
    pub converged: bool,
}

impl<T: Scalar> ModelArtifact<T> {
    pub fn model(&self) -> LinearModel<T> {
        LinearModel::new(self.weights.clone(), self.intercept, self.l2_penalty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_one_dimensional_fit() {
        let x = Matrix::from_f64_rows(&[&[-1.0], &[1.0]]);
        let fit = fit_logistic::<f64>(&x, &[0, 1], 1.0).unwrap();
        assert!(fit.converged);
        assert!(fit.model.weights[0] > 0.0 && fit.model.weights[0].is_finite());
        assert!((score(&fit.model, &[0.0], 1).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn uninformative_feature_gives_class_rate() {
        // labels independent of the feature: 3 of 10 positive at both feature values
        let xs: Vec<f64> = (0..20).map(|i| if i < 10 { -1.0 } else { 1.0 }).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i % 10 < 3)).collect();
        let x = Matrix::from_fn(20, 1, |i, _| xs[i]);
        let fit = fit_logistic(&x, &y, 0.0).unwrap();
        assert!(fit.converged);
        assert!(fit.model.weights[0].abs() < 1e-8);
        assert!((fit.model.intercept - logit(0.3)).abs() < 1e-6);
    }

    #[test]
    fn all_labels_equal() {
        let x = Matrix::from_f64_rows(&[&[0.5], &[-0.2], &[1.0], &[0.1]]);
        let fit = fit_logistic::<f64>(&x, &[1, 1, 1, 1], 1.0).unwrap();
        assert!(fit.model.weights[0].abs() < 1e-3);
        // the intercept heads to logit(1) = ∞; the fitted rate approaches the class rate
        assert!(sigmoid(fit.model.intercept) > 1.0 - 1e-6);
    }

    #[test]
    fn separable_without_penalty_is_flagged() {
        let x = Matrix::from_f64_rows(&[&[-2.0], &[-1.0], &[1.0], &[2.0]]);
        let fit = fit_logistic(&x, &[0, 0, 1, 1], 0.0).unwrap();
        assert!(fit.separable);
        assert!(!fit.converged);
    }

    #[test]
    fn separable_penalized_fit_beats_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 60;
        let x = Matrix::from_fn(n, 2, |i, _| {
            let side = if i < n / 2 { -1.0 } else { 1.0 };
            side * (0.5 + rng.random::<f64>())
        });
        let y: Vec<u8> = (0..n).map(|i| u8::from(i >= n / 2)).collect();
        let fit = fit_logistic(&x, &y, 0.1).unwrap();
        assert!(fit.converged);
        assert!(fit.gradient_norm <= 1e-8);
        assert!(fit.cross_entropy < 2f64.ln());
    }

    #[test]
    fn grid_contains_zero() {
        let g = penalty_grid::<f64>();
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 1e-2).abs() < 1e-15 && (g[9] - 1e2).abs() < 1e-10);
    }

    #[test]
    fn too_few_samples_for_folds() {
        let x = Matrix::<f64>::from_f64_rows(&[&[0.0], &[1.0], &[2.0]]);
        assert!(grid_search_cv(&x, &[0, 1, 0], 10, 0).is_err());
    }

    #[test]
    fn score_examples() {
        let m = LinearModel::new(vec![0.0, 0.0], 0.0, 0.0);
        assert_eq!(score(&m, &[3.0, 1.0], 0).unwrap(), 0.5);
        assert_eq!(score(&m, &[3.0, 1.0], 1).unwrap(), 0.5);
        let m = LinearModel::new(vec![1.0], 0.0, 0.0);
        assert!((score(&m, &[4f64.ln()], 1).unwrap() - 0.8).abs() < 1e-15);
        assert!(score(&m, &[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn halfspace_offsets() {
        let m = LinearModel::new(vec![1.0, 2.0], 0.0, 0.0);
        let hs = halfspace(&m, 1, 0.8).unwrap();
        assert!((hs.offset - 4f64.ln()).abs() < 1e-15);
        let m = LinearModel::<f64>::new(vec![1.0, 2.0], 0.7, 0.0);
        assert!((halfspace(&m, 1, 0.5).unwrap().offset + 0.7).abs() < 1e-15);
        let h0 = halfspace(&m, 0, 0.8).unwrap();
        assert_eq!(h0.normal, vec![-1.0, -2.0]);
        assert!((h0.offset - (4f64.ln() + 0.7)).abs() < 1e-15);
        let flat = LinearModel::new(vec![0.0, 0.0], 1.0, 0.0);
        assert!(matches!(halfspace(&flat, 1, 0.8), Err(Error::NoDecisionBoundary)));
    }

    #[test]
    fn projection_lands_on_threshold() {
        let hs = Halfspace::<f64>::new(vec![1.0, 0.0], 1.3863).unwrap();
        let p = hs.project(&[0.0, 0.0]);
        assert!((p[0] - hs.threshold()).abs() < 1e-15 && p[1] == 0.0);
    }
}
