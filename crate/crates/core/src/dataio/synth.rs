//! Seeded synthetic binary datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::numerics::Matrix;
use crate::scalar::Scalar;

fn feature_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

/// Two unit-covariance Gaussian classes whose means sit at `∓separation/2` on the first axis.
pub fn two_gaussians<T: Scalar>(n_per_class: usize, d: usize, separation: f64, seed: u64) -> Dataset<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * n_per_class;
    let mut x = Matrix::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = u8::from(i >= n_per_class);
        let shift = if label == 1 { separation / 2.0 } else { -separation / 2.0 };
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, j)] = T::lit(if j == 0 { z + shift } else { z });
        }
        y.push(label);
    }
    Dataset::new(feature_names(d), x, y).expect("generated dataset is valid")
}

/// Each class is a mixture of `components` isotropic Gaussian blobs (std 0.5).
///
/// Blob centres are drawn uniformly in `[-3, 3]^d`, with class 1 shifted by
/// `separation` along the first axis.
pub fn gaussian_mixture_classes<T: Scalar>(
    n_per_class: usize,
    d: usize,
    components: usize,
    separation: f64,
    seed: u64,
) -> Dataset<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let components = components.max(1);
    let centres: Vec<Vec<Vec<f64>>> = (0..2)
        .map(|label| {
            (0..components)
                .map(|_| {
                    (0..d)
                        .map(|j| {
                            let c = rng.random_range(-3.0..3.0);
                            if j == 0 && label == 1 {
                                c + separation
                            } else {
                                c
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let n = 2 * n_per_class;
    let mut x = Matrix::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = usize::from(i >= n_per_class);
        let c = &centres[label][rng.random_range(0..components)];
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, j)] = T::lit(c[j] + 0.5 * z);
        }
        y.push(label as u8);
    }
    Dataset::new(feature_names(d), x, y).expect("generated dataset is valid")
}
