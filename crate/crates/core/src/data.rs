//! Dataset loading, normalization, partitioning across agents, and synthetic
//! fixtures.
//!
//! Every feature vector handed to the training code lives inside the unit L2
//! ball and every label is exactly `-1.0` or `+1.0`.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on the unit-ball invariant.
pub const NORM_SLACK: f64 = 1e-9;

/// One labeled example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Array1<f64>,
    pub label: f64,
}

/// An ordered, nonempty collection of samples sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Array1<f64>,
}

impl Dataset {
    /// Builds a dataset from a row-major feature matrix and ±1 labels.
    pub fn new(features: Array2<f64>, labels: Array1<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::InvalidDataset("dataset is empty".into()));
        }
        if features.ncols() == 0 {
            return Err(Error::InvalidDataset("dimension must be positive".into()));
        }
        if features.nrows() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidDataset(format!("label {bad} is not ±1")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn from_samples(samples: &[Sample]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidDataset("dataset is empty".into()))?;
        let d = first.features.len();
        let mut features = Array2::zeros((samples.len(), d));
        let mut labels = Array1::zeros(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: s.features.len(),
                });
            }
            features.row_mut(i).assign(&s.features);
            labels[i] = s.label;
        }
        Self::new(features, labels)
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dimension(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Array1<f64> {
        &self.labels
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn sample(&self, i: usize) -> Sample {
        Sample {
            features: self.features.row(i).to_owned(),
            label: self.labels[i],
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = Sample> + '_ {
        (0..self.len()).map(|i| self.sample(i))
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidDataset(format!(
                "index {bad} out of range for {} samples",
                self.len()
            )));
        }
        Self::new(
            self.features.select(Axis(0), indices),
            self.labels.select(Axis(0), indices),
        )
    }

    /// Concatenation of several datasets with the same dimension.
    pub fn concat(parts: &[Dataset]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidDataset("nothing to concatenate".into()))?;
        let d = first.dimension();
        if let Some(p) = parts.iter().find(|p| p.dimension() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: p.dimension(),
            });
        }
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let labels: Vec<_> = parts.iter().map(|p| p.labels.view()).collect();
        Self::new(
            ndarray::concatenate(Axis(0), &views).expect("same width"),
            ndarray::concatenate(Axis(0), &labels).expect("1-d"),
        )
    }
}

/// Loads a header-first, comma-separated numeric file.
///
/// All columns except `label_column` become features in file order. Labels
/// equal to `positive_value` map to `+1`, the other value maps to `-1`.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, positive_value: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn {
            path: path.to_path_buf(),
            column: label_column.to_string(),
        })?;

    let mut rows: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut distinct: BTreeSet<String> = BTreeSet::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        // header is line 1
        let row_no = r + 2;
        for (c, cell) in record.iter().enumerate() {
            if c == label_idx {
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| Error::UnparsableCell {
                path: path.to_path_buf(),
                row: row_no,
                column: header.get(c).cloned().unwrap_or_else(|| c.to_string()),
                value: cell.to_string(),
            })?;
            rows.push(value);
        }
        let label = record.get(label_idx).unwrap_or_default().to_string();
        distinct.insert(label.clone());
        if distinct.len() > 2 {
            return Err(Error::TooManyLabels {
                path: path.to_path_buf(),
                column: label_column.to_string(),
                values: distinct.into_iter().collect(),
            });
        }
        raw_labels.push(label);
    }

    let n = raw_labels.len();
    let d = header.len() - 1;
    let features =
        Array2::from_shape_vec((n, d), rows).map_err(|e| Error::InvalidDataset(format!("{}: {e}", path.display())))?;
    let labels = raw_labels
        .iter()
        .map(|l| if l == positive_value { 1.0 } else { -1.0 })
        .collect();
    Dataset::new(features, labels)
}

/// Per-column scale factors fitted on one dataset and reusable on another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    column_max_abs: Vec<f64>,
}

impl Normalizer {
    pub fn fit(data: &Dataset) -> Self {
        let column_max_abs = data
            .features
            .axis_iter(Axis(1))
            .map(|col| col.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .collect();
        Self { column_max_abs }
    }

    /// Divides every column by its fitted max-abs (all-zero columns are left
    /// alone), then projects rows with norm above 1 onto the unit sphere.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.dimension() != self.column_max_abs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.column_max_abs.len(),
                actual: data.dimension(),
            });
        }
        let mut features = data.features.clone();
        for (mut col, &scale) in features.axis_iter_mut(Axis(1)).zip(&self.column_max_abs) {
            if scale > 0.0 {
                col.mapv_inplace(|v| v / scale);
            }
        }
        for mut row in features.axis_iter_mut(Axis(0)) {
            let norm = row.dot(&row).sqrt();
            if norm > 1.0 {
                row.mapv_inplace(|v| v / norm);
            }
        }
        Dataset::new(features, data.labels.clone())
    }
}

/// Max-abs column scaling followed by projection onto the unit L2 ball.
pub fn preprocess(raw: &Dataset) -> Dataset {
    Normalizer::fit(raw)
        .apply(raw)
        .expect("normalizer fitted on the same dataset")
}

/// Assignment of every sample to exactly one agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub num_agents: usize,
    /// `assignment[sample] = agent`
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl PartitionPlan {
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_agents];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn indices_for(&self, agent: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| (a == agent).then_some(i))
            .collect()
    }

    /// Splits `data` into one dataset per agent, keeping the original order.
    pub fn apply(&self, data: &Dataset) -> Result<Vec<Dataset>> {
        if data.len() != self.assignment.len() {
            return Err(Error::InvalidDataset(format!(
                "partition covers {} samples, dataset has {}",
                self.assignment.len(),
                data.len()
            )));
        }
        (0..self.num_agents)
            .map(|a| data.subset(&self.indices_for(a)))
            .collect()
    }
}

/// Seeded random permutation cut into `n_agents` contiguous blocks whose
/// sizes differ by at most one.
pub fn partition(data: &Dataset, n_agents: usize, seed: u64) -> Result<PartitionPlan> {
    if n_agents == 0 {
        return Err(Error::InvalidParameter("n_agents must be positive".into()));
    }
    let n = data.len();
    if n_agents > n {
        return Err(Error::InvalidParameter(format!(
            "cannot split {n} samples across {n_agents} agents"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));

    let base = n / n_agents;
    let extra = n % n_agents;
    let mut assignment = vec![0; n];
    let mut cursor = 0;
    for agent in 0..n_agents {
        let size = base + usize::from(agent < extra);
        for &idx in &order[cursor..cursor + size] {
            assignment[idx] = agent;
        }
        cursor += size;
    }
    Ok(PartitionPlan {
        num_agents: n_agents,
        assignment,
        seed,
    })
}

/// Seeded train/test split. Returns `(train, test)`; both are nonempty.
pub fn train_test_split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test_fraction {test_fraction} not in (0, 1)"
        )));
    }
    let n = data.len();
    let n_test = ((n as f64) * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidParameter(format!(
            "test_fraction {test_fraction} leaves an empty split of {n} samples"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let (test_idx, train_idx) = order.split_at(n_test);
    Ok((data.subset(train_idx)?, data.subset(test_idx)?))
}

/// Two unit-variance Gaussian clusters centred at `±separation/2` along the
/// all-ones diagonal, labeled `+1` (even indices) and `-1` (odd indices), then
/// preprocessed.
pub fn synthetic_blobs(n: usize, d: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n < 2 || d < 1 {
        return Err(Error::InvalidParameter(format!(
            "synthetic_blobs needs n >= 2 and d >= 1 (got n={n}, d={d})"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let offset = separation / 2.0 / (d as f64).sqrt();
    let mut features = Array2::zeros((n, d));
    let mut labels = Array1::zeros(n);
    for i in 0..n {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        labels[i] = y;
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            features[[i, j]] = y * offset + z;
        }
    }
    Ok(preprocess(&Dataset::new(features, labels)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write;

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_labels_map_to_signs() {
        let f = write_csv("age,hours,income\n30,40,>50K\n20,10,<=50K\n");
        let ds = load_csv(f.path(), "income", ">50K").unwrap();
        assert_eq!(ds.dimension(), 2);
        assert_eq!(ds.labels().to_vec(), vec![1.0, -1.0]);
        assert_eq!(ds.row(0).to_vec(), vec![30.0, 40.0]);
    }

    #[test]
    fn csv_rejects_three_labels() {
        let f = write_csv("a,y\n1,x\n2,y\n3,z\n");
        assert!(matches!(load_csv(f.path(), "y", "x"), Err(Error::TooManyLabels { .. })));
    }

    #[test]
    fn csv_reports_bad_cell_position() {
        let f = write_csv("a,b,y\n1,2,p\n3,oops,n\n");
        match load_csv(f.path(), "y", "p") {
            Err(Error::UnparsableCell { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "b");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_missing_file() {
        assert!(matches!(
            load_csv("/nonexistent/file.csv", "y", "1"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn csv_with_41_feature_columns() {
        let header: Vec<String> = (0..41).map(|j| format!("f{j}")).chain(["label".into()]).collect();
        let row: Vec<String> = (0..41).map(|j| j.to_string()).chain([">50K".into()]).collect();
        let text = format!("{}\n{}\n", header.join(","), row.join(","));
        let f = write_csv(&text);
        assert_eq!(load_csv(f.path(), "label", ">50K").unwrap().dimension(), 41);
    }

    #[test]
    fn preprocess_scales_columns_by_max() {
        let ds = Dataset::new(array![[2.0], [4.0]], array![1.0, -1.0]).unwrap();
        let p = preprocess(&ds);
        assert_eq!(p.features().column(0).to_vec(), vec![0.5, 1.0]);
    }

    #[test]
    fn preprocess_projects_long_rows() {
        // after column scaling the first row is (1, 1, 1, 1) with norm 2
        let ds = Dataset::new(array![[1.0, 1.0, 1.0, 1.0], [0.1, 0.1, 0.1, 0.1]], array![1.0, -1.0]).unwrap();
        let p = preprocess(&ds);
        let r0 = p.row(0);
        assert!((r0.dot(&r0).sqrt() - 1.0).abs() < 1e-12);
        assert!((r0[0] - 0.5).abs() < 1e-12);
        // (0.1, ...) scaled by 1 stays, norm 0.2 < 1
        assert_eq!(p.row(1).to_vec(), vec![0.1; 4]);
    }

    #[test]
    fn preprocess_keeps_short_rows_and_zero_columns() {
        let ds = Dataset::new(array![[0.3, 0.0], [-1.0, 0.0]], array![1.0, 1.0]).unwrap();
        let p = preprocess(&ds);
        assert_eq!(p.row(0).to_vec(), vec![0.3, 0.0]);
        assert_eq!(p.row(1).to_vec(), vec![-1.0, 0.0]);
    }

    #[test]
    fn partition_paper_sizes() {
        let ds = Dataset::new(Array2::zeros((35000, 1)), Array1::from_elem(35000, 1.0)).unwrap();
        let plan = partition(&ds, 5, 3).unwrap();
        assert_eq!(plan.block_sizes(), vec![7000; 5]);
    }

    #[test]
    fn partition_balanced_and_deterministic() {
        let ds = Dataset::new(Array2::zeros((10, 1)), Array1::from_elem(10, 1.0)).unwrap();
        let a = partition(&ds, 3, 11).unwrap();
        let b = partition(&ds, 3, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.block_sizes(), vec![4, 3, 3]);
        assert!(partition(&ds, 11, 0).is_err());
    }

    #[test]
    fn blobs_minimal_and_deterministic() {
        let ds = synthetic_blobs(2, 1, 5.0, 1).unwrap();
        assert_eq!(ds.labels().to_vec(), vec![1.0, -1.0]);
        assert_eq!(
            synthetic_blobs(50, 3, 2.0, 9).unwrap(),
            synthetic_blobs(50, 3, 2.0, 9).unwrap()
        );
        assert!(synthetic_blobs(1, 1, 1.0, 0).is_err());
    }

    #[test]
    fn split_sizes() {
        let ds = synthetic_blobs(100, 2, 1.0, 0).unwrap();
        let (train, test) = train_test_split(&ds, 0.2, 4).unwrap();
        assert_eq!((train.len(), test.len()), (80, 20));
    }

    #[test]
    fn invalid_labels_rejected() {
        assert!(Dataset::new(array![[1.0]], array![0.0]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn preprocess_lands_in_unit_ball(
                rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 1..20),
                seed in any::<u64>(),
            ) {
                let n = rows.len();
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                let labels = (0..n).map(|i| if (i as u64 + seed).is_multiple_of(2) { 1.0 } else { -1.0 }).collect();
                let ds = Dataset::new(Array2::from_shape_vec((n, 3), flat).unwrap(), labels).unwrap();
                let p = preprocess(&ds);
                for i in 0..p.len() {
                    let r = p.row(i);
                    prop_assert!(r.dot(&r).sqrt() <= 1.0 + NORM_SLACK);
                    prop_assert!(r.iter().all(|v| v.abs() <= 1.0 + NORM_SLACK));
                }
                prop_assert_eq!(p.labels(), ds.labels());
            }

            #[test]
            fn partition_covers_disjointly(n in 1usize..200, agents in 1usize..10, seed in any::<u64>()) {
                prop_assume!(agents <= n);
                let ds = Dataset::new(Array2::zeros((n, 1)), Array1::from_elem(n, 1.0)).unwrap();
                let plan = partition(&ds, agents, seed).unwrap();
                let sizes = plan.block_sizes();
                prop_assert_eq!(sizes.iter().sum::<usize>(), n);
                prop_assert!(sizes.iter().all(|&s| s >= 1));
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                let parts = plan.apply(&ds).unwrap();
                prop_assert_eq!(parts.iter().map(Dataset::len).sum::<usize>(), n);
            }
        }
    }
}
