use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{kmedoids, Dataset};
use crate::classifier::LinearModel;
use crate::error::{Error, Result};
use crate::numerics::{sq_dist, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingConfig {
    pub clusters_per_label: usize,
    pub cap: usize,
    pub min_size: usize,
    pub seed: u64,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        Self {
            clusters_per_label: 10,
            cap: 200,
            min_size: 20,
            seed: 0,
        }
    }
}

/// A set of inputs sharing one predicted label.
#[derive(Debug, Clone, PartialEq)]
pub struct Group<T> {
    pub id: usize,
    pub label: u8,
    /// Row indices into the dataset the group was drawn from.
    pub indices: Vec<usize>,
    pub points: Matrix<T>,
}

impl<T: Scalar> Group<T> {
    /// A user-supplied group; any size is accepted.
    pub fn from_points(id: usize, label: u8, points: Matrix<T>) -> Self {
        Self {
            id,
            label,
            indices: (0..points.rows()).collect(),
            points,
        }
    }

    pub fn from_dataset(ds: &Dataset<T>, record: &GroupRecord) -> Result<Self> {
        if let Some(&bad) = record.indices.iter().find(|&&i| i >= ds.n()) {
            return Err(Error::InvalidInput(format!(
                "group {} references row {bad} of a {}-row dataset",
                record.id,
                ds.n()
            )));
        }
        let points = Matrix::from_fn(record.indices.len(), ds.d(), |i, j| ds.x[(record.indices[i], j)]);
        Ok(Self {
            id: record.id,
            label: record.label,
            indices: record.indices.clone(),
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    /// Rows `local` of this group as a new group with the same id and label.
    pub fn subset(&self, local: &[usize]) -> Self {
        Self {
            id: self.id,
            label: self.label,
            indices: local.iter().map(|&i| self.indices[i]).collect(),
            points: Matrix::from_fn(local.len(), self.dim(), |i, j| self.points[(local[i], j)]),
        }
    }

    pub fn record(&self) -> GroupRecord {
        GroupRecord {
            id: self.id,
            label: self.label,
            indices: self.indices.clone(),
        }
    }
}

/// Serializable description of a group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub id: usize,
    pub label: u8,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GroupSet<T> {
    pub groups: Vec<Group<T>>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> GroupSet<T> {
    pub fn records(&self) -> Vec<GroupRecord> {
        self.groups.iter().map(Group::record).collect()
    }
}

/// Clusters each predicted class with k-medoids and resizes clusters to `[min_size, cap]`.
///
/// Oversized clusters are subsampled uniformly without replacement; undersized ones are
/// topped up with the same-label points nearest to their medoid.
pub fn build_groups<T: Scalar>(
    test: &Dataset<T>,
    model: &LinearModel<T>,
    config: &GroupingConfig,
) -> Result<GroupSet<T>> {
    if model.weights.len() != test.d() {
        return Err(Error::DimensionMismatch {
            expected: test.d(),
            got: model.weights.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let predicted: Vec<u8> = (0..test.n()).map(|i| model.predict(test.x.row(i))).collect();
    let mut groups = Vec::new();
    let mut warnings = Vec::new();

    for label in [0u8, 1] {
        let pool: Vec<usize> = (0..test.n()).filter(|&i| predicted[i] == label).collect();
        if pool.is_empty() {
            warnings.push(format!("no points predicted as class {label}"));
            continue;
        }
        let k = config.clusters_per_label.min(pool.len());
        if k < config.clusters_per_label {
            warnings.push(format!(
                "class {label}: only {} points, building {k} clusters",
                pool.len()
            ));
        }
        let pts = Matrix::from_fn(pool.len(), test.d(), |i, j| test.x[(pool[i], j)]);
        let km = kmedoids(&pts, k)?;
        for c in 0..k {
            let mut local = km.members(c);
            if local.len() > config.cap {
                let mut picked = rand::seq::index::sample(&mut rng, local.len(), config.cap).into_vec();
                picked.sort_unstable();
                local = picked.into_iter().map(|p| local[p]).collect();
            } else if local.len() < config.min_size {
                let medoid = pts.row(km.medoids[c]);
                let mut others: Vec<usize> = (0..pool.len()).filter(|i| !local.contains(i)).collect();
                others.sort_by(|&a, &b| {
                    sq_dist(pts.row(a), medoid)
                        .partial_cmp(&sq_dist(pts.row(b), medoid))
                        .expect("finite distances")
                        .then(a.cmp(&b))
                });
                let need = config.min_size - local.len();
                local.extend(others.into_iter().take(need));
                if local.len() < config.min_size {
                    warnings.push(format!(
                        "class {label} cluster {c}: only {} points available",
                        local.len()
                    ));
                }
                local.sort_unstable();
            }
            let indices: Vec<usize> = local.iter().map(|&i| pool[i]).collect();
            let points = Matrix::from_fn(indices.len(), test.d(), |i, j| test.x[(indices[i], j)]);
            groups.push(Group {
                id: groups.len(),
                label,
                indices,
                points,
            });
        }
    }
    Ok(GroupSet { groups, warnings })
}
