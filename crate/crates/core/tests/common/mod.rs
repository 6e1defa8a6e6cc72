//! Instance generators and brute-force oracles shared by integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use otgcf::classifier::Halfspace;
use otgcf::numerics::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `n` correlated Gaussian points in `d` dimensions.
pub fn random_group(seed: u64, n: usize, d: usize) -> Matrix<f64> {
    let mut r = rng(seed);
    let mix: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 0.6 + r.random::<f64>() } else { 0.4 * normal(&mut r) }).collect())
        .collect();
    let centre: Vec<f64> = (0..d).map(|_| normal(&mut r)).collect();
    let z: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| normal(&mut r)).collect()).collect();
    Matrix::from_fn(n, d, |i, j| centre[j] + (0..d).map(|k| mix[j][k] * z[i][k]).sum::<f64>())
}

/// A halfspace with a random unit normal that roughly `infeasible` of the points violate.
pub fn random_halfspace(seed: u64, points: &Matrix<f64>, infeasible: f64) -> Halfspace<f64> {
    let mut r = rng(seed ^ 0x9e37_79b9);
    let d = points.cols();
    let mut w: Vec<f64> = (0..d).map(|_| normal(&mut r)).collect();
    let nw = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.iter_mut().for_each(|v| *v /= nw);
    let mut s: Vec<f64> = (0..points.rows()).map(|i| dotp(&w, points.row(i))).collect();
    s.sort_by(f64::total_cmp);
    let q = ((s.len() as f64 * infeasible) as usize).min(s.len() - 1);
    Halfspace::new(w, s[q]).unwrap()
}

/// A halfspace every point satisfies with room to spare.
pub fn slack_halfspace(points: &Matrix<f64>) -> Halfspace<f64> {
    let d = points.cols();
    let mut w = vec![0.0; d];
    w[0] = 1.0;
    let lo = (0..points.rows()).map(|i| points[(i, 0)]).fold(f64::INFINITY, f64::min);
    Halfspace::new(w, lo - 10.0).unwrap()
}

pub fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizer of a unimodal function on `[lo, hi]` by golden-section search after a coarse grid.
pub fn minimize_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let grid = 400;
    let step = (hi - lo) / grid as f64;
    let best = (0..=grid)
        .map(|i| lo + step * i as f64)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let x = 0.5 * (a + b);
    let cands = [x, lo, hi];
    let x = cands.into_iter().min_by(|p, q| f(*p).total_cmp(&f(*q))).unwrap();
    (x, f(x))
}

/// `min ½xᵀHx + qᵀx` s.t. `G x ≥ h` by enumerating every active set.
pub fn active_set_qp(h: &DMatrix<f64>, q: &DVector<f64>, g: &DMatrix<f64>, hv: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let n = h.nrows();
    let m = g.nrows();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << m) {
        let act: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = act.len();
        if k > n {
            continue;
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        for (r, &i) in act.iter().enumerate() {
            for c in 0..n {
                kkt[(n + r, c)] = g[(i, c)];
                kkt[(c, n + r)] = -g[(i, c)];
            }
            rhs[n + r] = hv[i];
        }
        for c in 0..n {
            rhs[c] = -q[c];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let x = sol.rows(0, n).into_owned();
        let lambda_ok = (0..k).all(|r| sol[n + r] >= -1e-9);
        let feasible = (0..m).all(|i| (g.row(i) * &x)[0] >= hv[i] - 1e-9);
        if lambda_ok && feasible {
            let obj = 0.5 * (x.transpose() * h * &x)[0] + q.dot(&x);
            if best.as_ref().is_none_or(|(_, b)| obj < *b) {
                best = Some((x, obj));
            }
        }
    }
    best
}
