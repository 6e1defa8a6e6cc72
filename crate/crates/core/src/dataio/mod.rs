//! Dataset ingestion, standardization, splitting and group formation.

mod groups;
mod kmedoids;
pub mod synth;

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

pub use groups::{build_groups, Group, GroupRecord, GroupSet, GroupingConfig};
pub use kmedoids::{kmedoids, KMedoids};

/// Per-feature affine standardization `z = (x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Standardization<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> Standardization<T> {
    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![T::zero(); d],
            std: vec![T::one(); d],
        }
    }

    pub fn transform(&self, raw: &[T]) -> Vec<T> {
        raw.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }

    pub fn inverse(&self, z: &[T]) -> Vec<T> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&x, (&m, &s))| x * s + m)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dataset<T> {
    pub feature_names: Vec<String>,
    pub x: Matrix<T>,
    pub y: Vec<u8>,
    /// Maps raw feature units to the units of `x`.
    pub standardization: Standardization<T>,
    /// Original label strings for classes 0 and 1.
    pub label_values: Vec<String>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(feature_names: Vec<String>, x: Matrix<T>, y: Vec<u8>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                got: y.len(),
            });
        }
        if x.cols() != feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: x.cols(),
                got: feature_names.len(),
            });
        }
        if x.rows() < 2 {
            return Err(Error::NotEnoughSamples(format!(
                "dataset needs at least 2 rows, got {}",
                x.rows()
            )));
        }
        if !x.is_finite() {
            return Err(Error::InvalidInput("non-finite feature values".into()));
        }
        let d = x.cols();
        Ok(Self {
            feature_names,
            x,
            y,
            standardization: Standardization::identity(d),
            label_values: vec!["0".into(), "1".into()],
            warnings: Vec::new(),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let d = self.d();
        let x = Matrix::from_fn(indices.len(), d, |i, j| self.x[(indices[i], j)]);
        Self {
            feature_names: self.feature_names.clone(),
            x,
            y: indices.iter().map(|&i| self.y[i]).collect(),
            standardization: self.standardization.clone(),
            label_values: self.label_values.clone(),
            warnings: self.warnings.clone(),
        }
    }

    /// Features in raw (pre-standardization) units.
    pub fn raw_features(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.n(), self.d());
        for i in 0..self.n() {
            let r = self.standardization.inverse(self.x.row(i));
            for (j, v) in r.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Reads a comma-separated file with a header row; `label_column` names the binary target.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset<T>> {
    let file = std::fs::File::open(path)?;
    load_csv_reader(file, label_column)
}

pub fn load_csv_reader<T: Scalar, R: Read>(reader: R, label_column: &str) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::InvalidInput(format!("label column '{label_column}' not found")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut values: Vec<T> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        // data rows are 1-based and exclude the header
        let row = r + 1;
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                row,
                msg: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        for (i, field) in rec.iter().enumerate() {
            let field = field.trim();
            if field.is_empty() {
                return Err(Error::Parse {
                    row,
                    msg: format!("missing value in column '{}'", headers[i]),
                });
            }
            if i == label_idx {
                labels.push(field.to_string());
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                msg: format!("cannot parse '{field}' in column '{}'", headers[i]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    msg: format!("non-finite value '{field}' in column '{}'", headers[i]),
                });
            }
            values.push(T::lit(v));
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let distinct: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
    if distinct.len() > 2 {
        return Err(Error::NonBinaryLabel(distinct.len()));
    }
    let label_values = label_encoding(&distinct);
    let y = labels
        .iter()
        .map(|l| u8::from(l == &label_values[1]))
        .collect();

    let n = labels.len();
    let x = Matrix::from_row_major(n, feature_names.len(), values)?;
    let mut ds = Dataset::new(feature_names, x, y)?;
    ds.label_values = label_values;
    Ok(ds)
}

/// Numeric labels {0, 1} map to themselves; anything else maps in sorted order.
fn label_encoding(distinct: &BTreeSet<&str>) -> Vec<String> {
    let numeric: Option<Vec<f64>> = distinct.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(nums) = &numeric {
        if nums.iter().all(|&v| v == 0.0 || v == 1.0) {
            let mut out = vec!["0".to_string(), "1".to_string()];
            for (s, &v) in distinct.iter().zip(nums) {
                out[v as usize] = (*s).to_string();
            }
            return out;
        }
        let mut pairs: Vec<(f64, &str)> = nums.iter().copied().zip(distinct.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut out: Vec<String> = pairs.into_iter().map(|(_, s)| s.to_string()).collect();
        if out.len() == 1 {
            out.insert(0, String::new());
        }
        return out;
    }
    let mut out: Vec<String> = distinct.iter().map(|s| (*s).to_string()).collect();
    if out.len() == 1 {
        out.insert(0, String::new());
    }
    out
}

/// Writes features and labels (in the dataset's current units) as CSV with a `label` column.
pub fn write_csv<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>, raw_units: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = ds.feature_names.clone();
    header.push("label".into());
    w.write_record(&header)?;
    let feats = if raw_units { ds.raw_features() } else { ds.x.clone() };
    for i in 0..ds.n() {
        let mut rec: Vec<String> = feats.row(i).iter().map(|v| format!("{v}")).collect();
        rec.push(ds.y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the named feature columns of a CSV (extra columns are ignored).
pub fn load_points_csv<T: Scalar>(path: impl AsRef<Path>, feature_names: &[String]) -> Result<Matrix<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let cols: Vec<usize> = feature_names
        .iter()
        .map(|f| {
            headers
                .iter()
                .position(|h| h == f)
                .ok_or_else(|| Error::InvalidInput(format!("feature column '{f}' not found")))
        })
        .collect::<Result<_>>()?;
    let mut data = Vec::new();
    let mut n = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for &c in &cols {
            let field = rec.get(c).unwrap_or("").trim();
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: r + 1,
                msg: format!("cannot parse '{field}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: r + 1,
                    msg: format!("non-finite value '{field}'"),
                });
            }
            data.push(T::lit(v));
        }
        n += 1;
    }
    Matrix::from_row_major(n, cols.len(), data)
}

/// Standardizes every feature to mean 0 and population standard deviation 1.
///
/// Constant features are dropped and noted in `warnings`. The returned dataset's
/// `standardization` composes with any earlier one, so it always maps raw units.
pub fn standardize<T: Scalar>(ds: &Dataset<T>) -> Dataset<T> {
    let n = ds.n();
    let nt = T::from_usize_lossy(n);
    let mut keep = Vec::new();
    let mut means = Vec::new();
    let mut stds = Vec::new();
    let mut warnings = ds.warnings.clone();
    for j in 0..ds.d() {
        let mean = (0..n).map(|i| ds.x[(i, j)]).sum::<T>() / nt;
        let var = (0..n).map(|i| (ds.x[(i, j)] - mean).powi(2)).sum::<T>() / nt;
        let std = var.sqrt();
        if std <= T::tol(1e-12) * mean.abs().max(T::one()) {
            warnings.push(format!("dropped constant feature '{}'", ds.feature_names[j]));
            continue;
        }
        keep.push(j);
        means.push(mean);
        stds.push(std);
    }
    let x = Matrix::from_fn(n, keep.len(), |i, k| (ds.x[(i, keep[k])] - means[k]) / stds[k]);
    let prev = &ds.standardization;
    let standardization = Standardization {
        mean: keep
            .iter()
            .zip(&means)
            .map(|(&j, &m)| prev.mean[j] + prev.std[j] * m)
            .collect(),
        std: keep.iter().zip(&stds).map(|(&j, &s)| prev.std[j] * s).collect(),
    };
    Dataset {
        feature_names: keep.iter().map(|&j| ds.feature_names[j].clone()).collect(),
        x,
        y: ds.y.clone(),
        standardization,
        label_values: ds.label_values.clone(),
        warnings,
    }
}

/// Seeded shuffle-and-cut split into train and test parts.
pub fn split<T: Scalar>(ds: &Dataset<T>, train_fraction: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = ds.n();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64) * train_fraction).round().clamp(1.0, (n - 1) as f64) as usize;
    let (train, test) = idx.split_at(n_train);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Seeded shuffle, then `folds` contiguous blocks whose sizes differ by at most one.
pub fn fold_indices(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let folds = folds.max(1);
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset<f64>> {
        load_csv_reader(s.as_bytes(), "label")
    }

    #[test]
    fn parses_three_rows() {
        let ds = parse("a,b,label\n1,2,0\n3,4,1\n5,6,1\n").unwrap();
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.y, vec![0, 1, 1]);
        assert_eq!(ds.x[(2, 1)], 6.0);
    }

    #[test]
    fn nan_names_row() {
        let err = parse("a,b,label\n1,2,0\n3,NaN,1\n").unwrap_err();
        match err {
            Error::Parse { row, .. } => assert_eq!(row, 2),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn missing_value_names_row() {
        let err = parse("a,b,label\n1,,0\n3,4,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }));
    }

    #[test]
    fn three_labels_rejected() {
        let err = parse("a,label\n1,0\n2,1\n3,2\n").unwrap_err();
        assert!(matches!(err, Error::NonBinaryLabel(3)));
    }

    #[test]
    fn empty_file_rejected() {
        assert!(matches!(parse("a,label\n"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn string_labels_sorted() {
        let ds = parse("a,label\n1,yes\n2,no\n3,yes\n").unwrap();
        assert_eq!(ds.y, vec![1, 0, 1]);
        assert_eq!(ds.label_values, vec!["no", "yes"]);
    }

    #[test]
    fn standardize_small_column() {
        let ds = parse("a,c,label\n1,7,0\n2,7,1\n3,7,1\n").unwrap();
        let s = standardize(&ds);
        // population std of (1,2,3) is sqrt(2/3)
        let sd = (2.0f64 / 3.0).sqrt();
        assert_eq!(s.d(), 1, "constant column dropped");
        assert!(s.warnings.iter().any(|w| w.contains("'c'")));
        for (i, raw) in [1.0, 2.0, 3.0].iter().enumerate() {
            assert!((s.x[(i, 0)] - (raw - 2.0) / sd).abs() < 1e-12);
        }
        assert!((s.x[(0, 0)] + 1.224_744_871_391_589).abs() < 1e-12);
        let again = standardize(&s);
        for i in 0..3 {
            assert!((again.x[(i, 0)] - s.x[(i, 0)]).abs() < 1e-10);
        }
        let raw = again.raw_features();
        for (i, v) in [1.0, 2.0, 3.0].iter().enumerate() {
            assert!((raw[(i, 0)] - v).abs() < 1e-9);
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let rows: String = (0..10).map(|i| format!("{i},{}\n", i % 2)).collect();
        let ds = parse(&format!("a,label\n{rows}")).unwrap();
        let (tr, te) = split(&ds, 0.8, 3).unwrap();
        assert_eq!((tr.n(), te.n()), (8, 2));
        let (tr2, _) = split(&ds, 0.8, 3).unwrap();
        assert_eq!(tr.x, tr2.x);
        let mut all: Vec<f64> = tr.x.as_slice().iter().chain(te.x.as_slice()).copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all, (0..10).map(f64::from).collect::<Vec<_>>());
        assert!(split(&ds, 1.0, 0).is_err());
    }

    #[test]
    fn folds_partition_indices() {
        let f = fold_indices(23, 10, 5);
        assert_eq!(f.len(), 10);
        assert!(f.iter().all(|b| b.len() == 2 || b.len() == 3));
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(f, fold_indices(23, 10, 5));
    }

    #[test]
    fn splits_vary_with_seed() {
        let rows: String = (0..10).map(|i| format!("{i},{}\n", i % 2)).collect();
        let ds = parse(&format!("a,label\n{rows}")).unwrap();
        let (base, _) = split(&ds, 0.8, 0).unwrap();
        let differing = (1..=100)
            .filter(|&s| split(&ds, 0.8, s).unwrap().0.x != base.x)
            .count();
        // 45 possible test pairs: a repeat has probability 1/45 per seed
        assert!(differing >= 90, "only {differing} of 100 seeds differed");
    }
}
