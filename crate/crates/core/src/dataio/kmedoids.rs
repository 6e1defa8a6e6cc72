use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dist, Matrix};
use crate::scalar::Scalar;

const MAX_SWAP_ROUNDS: usize = 100;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KMedoids<T> {
    /// Row indices of the medoids, ascending.
    pub medoids: Vec<usize>,
    /// `assignment[i]` is the position in `medoids` of point `i`'s cluster.
    pub assignment: Vec<usize>,
    pub cost: T,
    /// Total within-cluster distance after BUILD and after every accepted swap.
    pub cost_trace: Vec<T>,
}

impl<T: Scalar> KMedoids<T> {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == cluster)
            .collect()
    }
}

/// PAM: greedy BUILD followed by best-improvement SWAP.
///
/// Fully deterministic; every tie goes to the lowest index.
pub fn kmedoids<T: Scalar>(points: &Matrix<T>, k: usize) -> Result<KMedoids<T>> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let d = Matrix::from_fn(n, n, |i, j| dist(points.row(i), points.row(j)));

    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let mut nearest = vec![T::infinity(); n];
    while medoids.len() < k {
        let mut best: Option<(usize, T)> = None;
        for c in (0..n).filter(|c| !medoids.contains(c)) {
            let cost: T = (0..n).map(|j| nearest[j].min(d[(c, j)])).sum();
            if best.is_none_or(|(_, b)| cost < b) {
                best = Some((c, cost));
            }
        }
        let (c, _) = best.expect("k <= n leaves a candidate");
        medoids.push(c);
        for j in 0..n {
            nearest[j] = nearest[j].min(d[(c, j)]);
        }
    }

    let mut cost = total_cost(&d, &medoids);
    let mut cost_trace = vec![cost];
    for _ in 0..MAX_SWAP_ROUNDS {
        let (near, second) = nearest_two(&d, &medoids);
        let mut best: Option<(usize, usize, T)> = None;
        for (mi, &m) in medoids.iter().enumerate() {
            for o in (0..n).filter(|o| !medoids.contains(o)) {
                let mut delta = T::zero();
                for j in 0..n {
                    let (nm, nd) = near[j];
                    let cur = nd;
                    let new = if nm == m {
                        d[(o, j)].min(second[j])
                    } else {
                        d[(o, j)].min(nd)
                    };
                    delta += new - cur;
                }
                if best.is_none_or(|(_, _, b)| delta < b) {
                    best = Some((mi, o, delta));
                }
            }
        }
        match best {
            Some((mi, o, delta)) if delta < -T::tol(1e-12) * (T::one() + cost) => {
                medoids[mi] = o;
                let new_cost = total_cost(&d, &medoids);
                debug_assert!(new_cost <= cost + T::tol(1e-9) * (T::one() + cost));
                cost = new_cost;
                cost_trace.push(cost);
            }
            _ => break,
        }
    }

    medoids.sort_unstable();
    let assignment = (0..n)
        .map(|j| {
            let mut best = 0;
            for c in 1..k {
                if d[(medoids[c], j)] < d[(medoids[best], j)] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Ok(KMedoids {
        medoids,
        assignment,
        cost,
        cost_trace,
    })
}

fn total_cost<T: Scalar>(d: &Matrix<T>, medoids: &[usize]) -> T {
    (0..d.rows())
        .map(|j| {
            medoids
                .iter()
                .map(|&m| d[(m, j)])
                .fold(T::infinity(), T::min)
        })
        .sum()
}

/// Nearest medoid (id, distance) and second-nearest distance per point.
fn nearest_two<T: Scalar>(d: &Matrix<T>, medoids: &[usize]) -> (Vec<(usize, T)>, Vec<T>) {
    let n = d.rows();
    let mut near = vec![(usize::MAX, T::infinity()); n];
    let mut second = vec![T::infinity(); n];
    for j in 0..n {
        for &m in medoids {
            let v = d[(m, j)];
            if v < near[j].1 {
                second[j] = near[j].1;
                near[j] = (m, v);
            } else if v < second[j] {
                second[j] = v;
            }
        }
    }
    (near, second)
}
