//! Datasets, synthetic generators, CSV loading, and splitting.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ToyError;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data has the wrong length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn column_vector(values: Vec<f64>) -> Self {
        let rows = values.len();
        Matrix::new(rows, 1, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(indices.len(), self.cols, data)
    }

    pub fn select_columns(&self, columns: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * columns.len());
        for i in 0..self.rows {
            data.extend(columns.iter().map(|&j| self.get(i, j)));
        }
        Matrix::new(self.rows, columns.len(), data)
    }

    /// Column-wise concatenation in argument order.
    pub fn hconcat(parts: &[Matrix]) -> Result<Matrix, ToyError> {
        let Some(first) = parts.first() else {
            return Err(ToyError::Shape("nothing to concatenate".into()));
        };
        let rows = first.rows;
        if parts.iter().any(|m| m.rows != rows) {
            return Err(ToyError::Shape(
                "concatenated inputs differ in row count".into(),
            ));
        }
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for m in parts {
                data.extend_from_slice(m.row(i));
            }
        }
        Ok(Matrix::new(rows, cols, data))
    }

    pub fn map_columns(&self, f: impl Fn(usize, f64) -> f64) -> Matrix {
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, &x)| f(k % self.cols, x))
            .collect();
        Matrix::new(self.rows, self.cols, data)
    }

    /// Reads a single-column matrix of class ids.
    pub fn to_labels(&self) -> Result<Vec<usize>, ToyError> {
        if self.cols != 1 {
            return Err(ToyError::Shape(format!(
                "expected one prediction column, got {}",
                self.cols
            )));
        }
        self.data
            .iter()
            .map(|&x| {
                if x >= 0.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(ToyError::Shape(format!("{x} is not a class id")))
                }
            })
            .collect()
    }
}

/// Numeric features with integer class labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub column_names: Option<Vec<String>>,
    n_classes: usize,
}

impl Dataset {
    /// Builds a dataset; class ids must be contiguous from zero.
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self, ToyError> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(ToyError::Shape(
                "datasets need at least one row and column".into(),
            ));
        }
        if labels.len() != features.rows() {
            return Err(ToyError::Shape("label count differs from row count".into()));
        }
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; n_classes];
        for &l in &labels {
            seen[l] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(ToyError::Shape(
                "class ids are not contiguous from 0".into(),
            ));
        }
        Ok(Dataset {
            features,
            labels,
            column_names: None,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Row subset; keeps the parent's class count even if a class is absent.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            column_names: self.column_names.clone(),
            n_classes: self.n_classes,
        }
    }

    pub(crate) fn with_features(&self, features: Matrix) -> Dataset {
        Dataset {
            features,
            labels: self.labels.clone(),
            column_names: None,
            n_classes: self.n_classes,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SynthKind {
    Blobs,
    Xor,
    MoonsApprox,
}

impl std::str::FromStr for SynthKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "blobs" => Ok(SynthKind::Blobs),
            "xor" => Ok(SynthKind::Xor),
            "moons" | "moonsApprox" | "moons_approx" => Ok(SynthKind::MoonsApprox),
            other => Err(format!("unknown synthetic dataset `{other}`")),
        }
    }
}

/// Number of uninformative uniform columns appended to `xor` data.
pub const XOR_NOISE_COLUMNS: usize = 2;

/// Deterministic synthetic datasets with two balanced classes.
///
/// * `blobs`: two Gaussian blobs (σ = 0.5) centred at (−2, −2) and (2, 2),
///   linearly separable with a wide margin.
/// * `xor`: uniform points in [−1, 1]², labelled by the sign of x·y, kept
///   away from the axes by 0.1, plus [`XOR_NOISE_COLUMNS`] uniform noise
///   columns. Not linearly separable.
/// * `moonsApprox`: two interleaved noisy half circles.
pub fn synth_dataset(kind: SynthKind, n: usize, seed: u64) -> Result<Dataset, ToyError> {
    if n < 8 {
        return Err(ToyError::BadConfig("synthetic datasets need n >= 8".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let row = match kind {
            SynthKind::Blobs => {
                let noise = Normal::new(0.0, 0.5).expect("valid sigma");
                let c = if class == 0 { -2.0 } else { 2.0 };
                vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)]
            }
            SynthKind::Xor => {
                let mut coord = |positive: bool| {
                    let m: f64 = rng.random_range(0.1..1.0);
                    if positive {
                        m
                    } else {
                        -m
                    }
                };
                // Class 1 lives in quadrants where the signs differ.
                let sx = rng_bool(i / 2);
                let x = coord(sx);
                let y = coord(if class == 0 { sx } else { !sx });
                let mut row = vec![x, y];
                for _ in 0..XOR_NOISE_COLUMNS {
                    row.push(rng.random_range(-1.0..1.0));
                }
                row
            }
            SynthKind::MoonsApprox => {
                let noise = Normal::new(0.0, 0.1).expect("valid sigma");
                let t: f64 = rng.random_range(0.0..std::f64::consts::PI);
                let (x, y) = if class == 0 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                };
                vec![x + noise.sample(&mut rng), y + noise.sample(&mut rng)]
            }
        };
        rows.push(row);
        labels.push(class);
    }
    let mut ds = Dataset::new(Matrix::from_rows(&rows), labels)?;
    let names = (0..ds.features.cols()).map(|j| format!("x{j}")).collect();
    ds.column_names = Some(names);
    Ok(ds)
}

fn rng_bool(k: usize) -> bool {
    k.is_multiple_of(2)
}

/// Loads a CSV file with a header row; every column except `label_column`
/// must be numeric. Labels are mapped to class ids in sorted order (numeric
/// order when every label parses as a number).
pub fn load_csv(path: &Path, label_column: &str) -> Result<Dataset, ToyError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| ToyError::BadCsv(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| ToyError::BadCsv(e.to_string()))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| ToyError::LabelColumnMissing(label_column.to_string()))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| ToyError::BadCsv(e.to_string()))?;
        let mut row = Vec::with_capacity(names.len());
        for (j, field) in record.iter().enumerate() {
            if j == label_idx {
                raw_labels.push(field.trim().to_string());
            } else {
                let x: f64 = field.trim().parse().map_err(|_| {
                    ToyError::BadCsv(format!("row {}: `{field}` is not numeric", line + 2))
                })?;
                row.push(x);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ToyError::BadCsv("no data rows".into()));
    }

    let numeric = raw_labels.iter().all(|l| l.parse::<f64>().is_ok());
    let mut distinct: Vec<&String> = raw_labels.iter().collect();
    if numeric {
        distinct.sort_by(|a, b| {
            let (a, b) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            a.total_cmp(&b)
        });
    } else {
        distinct.sort();
    }
    distinct.dedup();
    let ids: BTreeMap<&String, usize> = distinct.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let labels = raw_labels.iter().map(|l| ids[l]).collect();

    let mut ds = Dataset::new(Matrix::from_rows(&rows), labels)?;
    ds.column_names = Some(names);
    Ok(ds)
}

fn shuffled_by_class(labels: &[usize], n_classes: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for members in &mut by_class {
        members.shuffle(&mut rng);
    }
    by_class
}

/// Stratified split into `(train, test)` with `fraction` of the rows in train.
pub fn train_test_split(
    ds: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), ToyError> {
    if !(0.0..1.0).contains(&fraction) || fraction == 0.0 {
        return Err(ToyError::BadConfig("fraction must lie in (0, 1)".into()));
    }
    let n = ds.len();
    let target = (fraction * n as f64).round() as usize;
    let by_class = shuffled_by_class(&ds.labels, ds.n_classes(), seed);
    // Largest-remainder apportionment keeps every class within one row of its share.
    let mut quotas: Vec<(usize, f64)> = by_class
        .iter()
        .map(|m| {
            let exact = fraction * m.len() as f64;
            (exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut assigned: usize = quotas.iter().map(|q| q.0).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].1.total_cmp(&quotas[a].1).then(a.cmp(&b)));
    for &c in order.iter().cycle().take(quotas.len() * 2) {
        if assigned >= target {
            break;
        }
        if quotas[c].0 < by_class[c].len() {
            quotas[c].0 += 1;
            assigned += 1;
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (members, (quota, _)) in by_class.iter().zip(&quotas) {
        train.extend_from_slice(&members[..*quota]);
        test.extend_from_slice(&members[*quota..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Seeded stratified k-fold partition; returns the test indices of each fold.
pub fn stratified_folds(
    labels: &[usize],
    n_classes: usize,
    k: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let by_class = shuffled_by_class(labels, n_classes, seed);
    let mut folds = vec![Vec::new(); k];
    for (position, index) in by_class.into_iter().flatten().enumerate() {
        folds[position % k].push(index);
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    folds
}

pub fn accuracy(predicted: &[usize], expected: &[usize]) -> f64 {
    if expected.is_empty() {
        return 0.0;
    }
    let correct = predicted
        .iter()
        .zip(expected)
        .filter(|(a, b)| a == b)
        .count();
    correct as f64 / expected.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_is_deterministic_and_balanced() {
        let a = synth_dataset(SynthKind::Blobs, 100, 0).unwrap();
        let b = synth_dataset(SynthKind::Blobs, 100, 0).unwrap();
        assert_eq!(a, b);
        let moons = synth_dataset(SynthKind::MoonsApprox, 100, 2).unwrap();
        assert_eq!(moons.labels.iter().filter(|&&l| l == 0).count(), 50);
        assert!(synth_dataset(SynthKind::Xor, 7, 0).is_err());
    }

    #[test]
    fn xor_labels_follow_quadrants() {
        let ds = synth_dataset(SynthKind::Xor, 200, 1).unwrap();
        assert_eq!(ds.features.cols(), 2 + XOR_NOISE_COLUMNS);
        for (row, &label) in ds.features.iter_rows().zip(&ds.labels) {
            let same_sign = (row[0] > 0.0) == (row[1] > 0.0);
            assert_eq!(label, usize::from(!same_sign));
        }
    }

    #[test]
    fn split_preserves_class_ratios() {
        let ds = synth_dataset(SynthKind::Blobs, 100, 3).unwrap();
        let (train, test) = train_test_split(&ds, 0.66, 3).unwrap();
        assert_eq!((train.len(), test.len()), (66, 34));
        let ones = train.labels.iter().filter(|&&l| l == 1).count() as i64;
        assert!((ones - 33).abs() <= 1);
    }

    #[test]
    fn folds_partition_rows() {
        let labels: Vec<usize> = (0..23).map(|i| usize::from(i % 3 == 0)).collect();
        let folds = stratified_folds(&labels, 2, 5, 9);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn dataset_invariants() {
        let m = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
        assert!(Dataset::new(m.clone(), vec![0, 2]).is_err());
        assert!(Dataset::new(m.clone(), vec![0]).is_err());
        assert!(Dataset::new(m, vec![1, 0]).is_ok());
    }

    #[test]
    fn csv_loading() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "a,label,b\n1,yes,2\n3,no,4\n5,yes,6\n").unwrap();
        let ds = load_csv(&path, "label").unwrap();
        assert_eq!(ds.labels, vec![1, 0, 1]);
        assert_eq!(ds.features.row(1), &[3.0, 4.0]);
        assert!(matches!(
            load_csv(&path, "y"),
            Err(ToyError::LabelColumnMissing(_))
        ));
        std::fs::write(&path, "a,label\nx,1\n").unwrap();
        assert!(matches!(load_csv(&path, "label"), Err(ToyError::BadCsv(_))));
    }
}
