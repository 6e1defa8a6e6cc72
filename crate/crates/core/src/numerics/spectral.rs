//! Symmetric eigendecomposition, SVD, and the spectral projections used by the solvers.
//!
//! Both decompositions are cyclic Jacobi schemes: deterministic, dependency-free and
//! accurate to a few ulps for the small dense matrices (d ≤ 60) this crate works with.

use serde::{Deserialize, Serialize};

use super::matrix::{Matrix, SymMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
/// Eigenvalues in `[-PSD_TOL, 0)` count as zero.
pub const PSD_TOL: f64 = 1e-10;
/// Eigenvalues below `-NOT_PSD_TOL` are rejected by [`psd_sqrt`].
pub const NOT_PSD_TOL: f64 = 1e-6;

/// Eigenvalues sorted descending with the paired orthonormal eigenvectors as columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Spectrum<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Matrix<T>,
}

impl<T: Scalar> Spectrum<T> {
    /// `U diag(f(λ)) Uᵀ`
    pub fn rebuild_with(&self, f: impl Fn(T) -> T) -> SymMatrix<T> {
        let n = self.eigenvalues.len();
        let u = &self.eigenvectors;
        let mapped: Vec<T> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let m = Matrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| u[(i, k)] * mapped[k] * u[(j, k)]).sum()
        });
        SymMatrix::new(m).expect("square rebuild")
    }

    pub fn reconstruct(&self) -> SymMatrix<T> {
        self.rebuild_with(|l| l)
    }

    pub fn min(&self) -> T {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn max(&self) -> T {
        self.eigenvalues[0]
    }
}

fn off_diagonal_norm<T: Scalar>(a: &Matrix<T>) -> T {
    let n = a.rows();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Symmetric Schur rotation `(c, s)` annihilating the `(p, q)` entry.
#[inline]
fn schur_rotation<T: Scalar>(app: T, aqq: T, apq: T) -> (T, T) {
    let two = T::lit(2.0);
    let theta = (aqq - app) / (two * apq);
    let t = if theta.is_infinite() {
        T::zero()
    } else {
        let sign = if theta >= T::zero() { T::one() } else { -T::one() };
        sign / (theta.abs() + (theta * theta + T::one()).sqrt())
    };
    let c = T::one() / (t * t + T::one()).sqrt();
    (c, t * c)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eig<T: Scalar>(m: &SymMatrix<T>) -> Result<Spectrum<T>> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = m.dim();
    let mut a = m.as_matrix().clone();
    let mut v = Matrix::<T>::identity(n);
    let scale = a.frobenius_norm();
    let tol = T::tol(OFF_DIAGONAL_TOL) * scale;

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let (c, s) = schur_rotation(a[(p, p)], a[(q, q)], apq);
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap().then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Principal square root of a PSD matrix. Slightly negative eigenvalues are clamped to 0.
pub fn psd_sqrt<T: Scalar>(m: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let spec = sym_eig(m)?;
    check_psd(&spec, m)?;
    Ok(spec.rebuild_with(|l| l.max(T::zero()).sqrt()))
}

/// Inverse principal square root of a positive definite matrix.
pub fn pd_inv_sqrt<T: Scalar>(m: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let spec = sym_eig(m)?;
    if spec.min() <= T::zero() {
        return Err(Error::SingularCovariance);
    }
    Ok(spec.rebuild_with(|l| T::one() / l.sqrt()))
}

fn check_psd<T: Scalar>(spec: &Spectrum<T>, m: &SymMatrix<T>) -> Result<()> {
    let scale = m.as_matrix().max_abs().max(T::one());
    let min = spec.min();
    if min < -T::lit(NOT_PSD_TOL) * scale {
        return Err(Error::NotPsd(min.as_f64()));
    }
    Ok(())
}

/// Frobenius-nearest symmetric matrix with every eigenvalue in `[lo, hi]`.
pub fn project_spectral_box<T: Scalar>(m: &SymMatrix<T>, lo: T, hi: T) -> Result<SymMatrix<T>> {
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::InvalidBox {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    let spec = sym_eig(m)?;
    Ok(spec.rebuild_with(|l| l.max(lo).min(hi)))
}

/// Frobenius-nearest PSD matrix (negative eigenvalues clamped to zero).
pub fn project_psd<T: Scalar>(m: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    project_spectral_box(m, T::zero(), T::infinity())
}

/// Thin SVD `a = U diag(s) Vᵀ` of a square matrix by one-sided Jacobi.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Matrix<T>,
    pub singular_values: Vec<T>,
    pub v: Matrix<T>,
}

pub fn svd<T: Scalar>(a: &Matrix<T>) -> Result<Svd<T>> {
    if !a.is_square() {
        return Err(Error::InvalidInput("svd expects a square matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = a.rows();
    let mut u = a.clone();
    let mut v = Matrix::<T>::identity(n);
    let tol = T::epsilon() * T::lit(4.0);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for k in 0..n {
                    alpha += u[(k, p)] * u[(k, p)];
                    beta += u[(k, q)] * u[(k, q)];
                    gamma += u[(k, p)] * u[(k, q)];
                }
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let (c, s) = schur_rotation(alpha, beta, gamma);
                for k in 0..n {
                    let up = u[(k, p)];
                    let uq = u[(k, q)];
                    u[(k, p)] = c * up - s * uq;
                    u[(k, q)] = s * up + c * uq;
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = c * vp - s * vq;
                    v[(k, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = (0..n)
        .map(|j| (0..n).map(|k| u[(k, j)] * u[(k, j)]).sum::<T>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));
    let singular_values: Vec<T> = order.iter().map(|&j| norms[j]).collect();
    let u_sorted = Matrix::from_fn(n, n, |i, j| {
        let s = norms[order[j]];
        if s > T::zero() {
            u[(i, order[j])] / s
        } else {
            T::zero()
        }
    });
    let v_sorted = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(Svd {
        u: u_sorted,
        singular_values,
        v: v_sorted,
    })
}

/// Singular values, descending.
pub fn singular_values<T: Scalar>(a: &Matrix<T>) -> Result<Vec<T>> {
    Ok(svd(a)?.singular_values)
}

/// Frobenius-nearest matrix with spectral norm at most `radius`.
pub fn project_spectral_norm_ball<T: Scalar>(a: &Matrix<T>, radius: T) -> Result<Matrix<T>> {
    let dec = svd(a)?;
    if dec.singular_values[0] <= radius {
        return Ok(a.clone());
    }
    let n = a.rows();
    // a·V·diag(min(1, r/s))·Vᵀ; avoids relying on U for zero singular values
    let av = a.matmul(&dec.v);
    let shrink: Vec<T> = dec
        .singular_values
        .iter()
        .map(|&s| if s > radius { radius / s } else { T::one() })
        .collect();
    let scaled = Matrix::from_fn(n, n, |i, j| av[(i, j)] * shrink[j]);
    Ok(scaled.matmul(&dec.v.transpose()))
}
