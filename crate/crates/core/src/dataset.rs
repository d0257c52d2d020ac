//! Labelled dataset ingestion, one-class problem derivation, target-class
//! IQR scaling and stratified folds.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LabelColumn {
    Name(String),
    #[default]
    Last,
}

/// What to do with rows that contain a missing value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    #[default]
    Reject,
    DropRow,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub label_column: LabelColumn,
    pub missing: MissingPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub features: Array2<f64>,
    pub labels: Vec<String>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        features: Array2<f64>,
        labels: Vec<String>,
    ) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::InvalidInput("dataset has no instances".into()));
        }
        if features.nrows() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(Self {
            name: name.into(),
            feature_names,
            features,
            labels,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Class sizes in lexicographic label order.
    pub fn class_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for label in &self.labels {
            *counts.entry(label.as_str()).or_insert(0) += 1;
        }
        counts
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.trim(),
        "" | "?" | "NA" | "NaN" | "nan" | "NAN" | "null" | "NULL"
    )
}

/// Reads a headed CSV file. Every column other than the label column must be
/// numeric.
pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let ingestion = |message: String| Error::Ingestion {
        path: path.to_path_buf(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| ingestion(e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(ingestion("file is empty or has no header row".into()));
    }
    let label_idx = match &options.label_column {
        LabelColumn::Last => headers.len() - 1,
        LabelColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ingestion(format!("label column '{name}' not found")))?,
    };
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let width = feature_names.len();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        // 1-based data row numbering, header excluded
        let row = row + 1;
        let record = record.map_err(|e| ingestion(format!("row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(ingestion(format!(
                "row {row}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        let mut parsed = Vec::with_capacity(width);
        let mut missing: Option<usize> = None;
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            if is_missing(cell) {
                missing.get_or_insert(i);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Cell {
                path: path.to_path_buf(),
                row,
                column: headers[i].to_string(),
                message: format!("non-numeric value '{cell}'"),
            })?;
            if !v.is_finite() {
                missing.get_or_insert(i);
                continue;
            }
            parsed.push(v);
        }
        let label = &record[label_idx];
        if is_missing(label) {
            missing.get_or_insert(label_idx);
        }
        if let Some(column) = missing {
            match options.missing {
                MissingPolicy::DropRow => continue,
                MissingPolicy::Reject => {
                    return Err(Error::Cell {
                        path: path.to_path_buf(),
                        row,
                        column: headers[column].to_string(),
                        message: "row contains a missing value".into(),
                    })
                }
            }
        }
        values.extend(parsed);
        labels.push(label.to_string());
    }
    if labels.is_empty() {
        return Err(ingestion("no data rows".into()));
    }
    let features = Array2::from_shape_vec((labels.len(), width), values)
        .map_err(|e| ingestion(e.to_string()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, feature_names, features, labels)
}

/// One target class against all other classes pooled as "other".
#[derive(Debug, Clone, PartialEq)]
pub struct OneClassProblem {
    pub dataset: String,
    pub target: String,
    pub features: Array2<f64>,
    pub is_target: Vec<bool>,
}

impl OneClassProblem {
    pub fn from_labels(
        dataset: impl Into<String>,
        target: impl Into<String>,
        features: Array2<f64>,
        is_target: Vec<bool>,
    ) -> Self {
        Self {
            dataset: dataset.into(),
            target: target.into(),
            features,
            is_target,
        }
    }

    pub fn id(&self) -> String {
        format!("{}/{}", self.dataset, self.target)
    }

    pub fn n_targets(&self) -> usize {
        self.is_target.iter().filter(|&&t| t).count()
    }

    pub fn n_others(&self) -> usize {
        self.is_target.len() - self.n_targets()
    }

    /// A problem is usable only if it has both target and non-target instances.
    pub fn is_valid(&self) -> bool {
        self.n_targets() > 0 && self.n_others() > 0
    }

    /// Materialises an outer split, fitting IQR scaling on the training targets.
    pub fn fold(&self, split: &Split) -> FoldData {
        let raw_train = self.features.select(Axis(0), &split.train);
        let train_is_target: Vec<bool> = split.train.iter().map(|&i| self.is_target[i]).collect();
        let target_rows: Vec<usize> = (0..split.train.len())
            .filter(|&i| train_is_target[i])
            .collect();
        let scaling = fit_iqr_scaling(&raw_train.select(Axis(0), &target_rows));
        let mut train = raw_train;
        scaling.apply(&mut train);
        let mut test = self.features.select(Axis(0), &split.test);
        scaling.apply(&mut test);
        FoldData {
            train,
            train_is_target,
            test,
            test_is_target: split.test.iter().map(|&i| self.is_target[i]).collect(),
            scaling,
        }
    }
}

/// One problem per class with at least `min_class_size` instances.
pub fn derive_problems(dataset: &Dataset, min_class_size: usize) -> Vec<OneClassProblem> {
    dataset
        .class_counts()
        .into_iter()
        .filter(|&(_, count)| count >= min_class_size)
        .map(|(class, _)| {
            OneClassProblem::from_labels(
                dataset.name.clone(),
                class,
                dataset.features.clone(),
                dataset.labels.iter().map(|l| l == class).collect(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingProfile {
    pub divisors: Vec<f64>,
}

impl ScalingProfile {
    pub fn apply(&self, data: &mut Array2<f64>) {
        for (mut column, &divisor) in data.axis_iter_mut(Axis(1)).zip(&self.divisors) {
            column.mapv_inplace(|v| v / divisor);
        }
    }

    /// Profile equivalent to applying `self` then `other`.
    pub fn compose(&self, other: &ScalingProfile) -> ScalingProfile {
        ScalingProfile {
            divisors: self
                .divisors
                .iter()
                .zip(&other.divisors)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }
}

/// Quantile with linear interpolation between order statistics of a sorted
/// slice (position `q * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Per-feature divisor: interquartile range, falling back to the range and
/// then to 1 when the spread is zero.
pub fn fit_iqr_scaling(target_train: &Array2<f64>) -> ScalingProfile {
    let divisors = target_train
        .axis_iter(Axis(1))
        .map(|column| {
            let mut sorted = column.to_vec();
            if sorted.is_empty() {
                return 1.0;
            }
            sorted.sort_by(f64::total_cmp);
            let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
            if iqr > 0.0 {
                return iqr;
            }
            let range = sorted[sorted.len() - 1] - sorted[0];
            if range > 0.0 {
                range
            } else {
                1.0
            }
        })
        .collect();
    ScalingProfile { divisors }
}

/// Row indices of one train/test split, both sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Scaled data of one outer fold.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub train: Array2<f64>,
    pub train_is_target: Vec<bool>,
    pub test: Array2<f64>,
    pub test_is_target: Vec<bool>,
    pub scaling: ScalingProfile,
}

impl FoldData {
    pub fn target_train(&self) -> Array2<f64> {
        let rows: Vec<usize> = (0..self.train.nrows())
            .filter(|&i| self.train_is_target[i])
            .collect();
        self.train.select(Axis(0), &rows)
    }
}

/// Stratified k-fold assignment over binary labels.
///
/// Targets are shuffled and dealt round-robin; non-targets continue the deal
/// where the targets stopped so fold sizes stay balanced. A class with fewer
/// than `k` members simply leaves some folds without it.
pub fn stratify(is_target: &[bool], k: usize, seed: u64) -> Result<Vec<Split>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets: Vec<usize> = (0..is_target.len()).filter(|&i| is_target[i]).collect();
    let mut others: Vec<usize> = (0..is_target.len()).filter(|&i| !is_target[i]).collect();
    if targets.len() < k {
        return Err(Error::InvalidInput(format!(
            "{} target instances cannot fill {k} folds",
            targets.len()
        )));
    }
    targets.shuffle(&mut rng);
    others.shuffle(&mut rng);
    let mut fold_of = vec![0usize; is_target.len()];
    for (pos, &i) in targets.iter().chain(others.iter()).enumerate() {
        fold_of[i] = pos % k;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..is_target.len()).partition(|&i| fold_of[i] == f);
            Split { train, test }
        })
        .collect())
}

pub fn stratified_kfold(problem: &OneClassProblem, k: usize, seed: u64) -> Result<Vec<Split>> {
    stratify(&problem.is_target, k, seed).map_err(|e| Error::Problem {
        problem: problem.id(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write;

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        file.write_all(contents.as_bytes()).unwrap();
        file
    }

    #[test]
    fn loads_small_csv() {
        let file = write_csv("x,y,label\n1,2,a\n3,4,a\n5,6,b\n");
        let opts = LoadOptions {
            label_column: LabelColumn::Name("label".into()),
            ..Default::default()
        };
        let ds = load_csv(file.path(), &opts).unwrap();
        assert_eq!(ds.n_instances(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.class_counts().len(), 2);
        assert_eq!(ds.features, array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
    }

    #[test]
    fn empty_file_is_an_error() {
        let file = write_csv("");
        assert!(matches!(
            load_csv(file.path(), &LoadOptions::default()),
            Err(Error::Ingestion { .. })
        ));
        let header_only = write_csv("x,label\n");
        assert!(load_csv(header_only.path(), &LoadOptions::default()).is_err());
    }

    #[test]
    fn missing_values_follow_policy() {
        let file = write_csv("x,y,label\n1,2,a\nNaN,4,a\n5,6,b\n");
        assert!(matches!(
            load_csv(file.path(), &LoadOptions::default()),
            Err(Error::Cell { row: 2, .. })
        ));
        let opts = LoadOptions {
            missing: MissingPolicy::DropRow,
            ..Default::default()
        };
        let ds = load_csv(file.path(), &opts).unwrap();
        assert_eq!(ds.n_instances(), 2);
        assert_eq!(ds.labels, vec!["a", "b"]);
    }

    #[test]
    fn non_numeric_feature_names_the_cell() {
        let file = write_csv("x,y,label\n1,2,a\n3,oops,b\n");
        match load_csv(file.path(), &LoadOptions::default()) {
            Err(Error::Cell { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn dataset(labels: &[&str]) -> Dataset {
        let n = labels.len();
        Dataset::new(
            "toy",
            vec!["x".into()],
            Array2::from_shape_fn((n, 1), |(i, _)| i as f64),
            labels.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn one_problem_per_large_enough_class() {
        let ds = dataset(&["a", "a", "b", "b", "c", "c"]);
        assert_eq!(derive_problems(&ds, 2).len(), 3);

        let mut labels = vec!["a"; 40];
        labels.extend(["b"; 3]);
        let problems = derive_problems(&dataset(&labels), 10);
        assert_eq!(problems.len(), 1);
        assert_eq!(problems[0].target, "a");
        assert_eq!(problems[0].n_others(), 3);
    }

    #[test]
    fn single_class_problem_is_invalid() {
        let problems = derive_problems(&dataset(&["a", "a", "a"]), 1);
        assert_eq!(problems.len(), 1);
        assert!(!problems[0].is_valid());
    }

    #[test]
    fn iqr_uses_linear_interpolation() {
        let col = |v: &[f64]| Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap();
        assert_eq!(fit_iqr_scaling(&col(&[0., 2., 4., 6., 8.])).divisors, vec![4.0]);
        assert_eq!(fit_iqr_scaling(&col(&[5., 5., 5.])).divisors, vec![1.0]);
        // Q25 = 0, Q75 = 0 + 0.25 * 10
        assert_eq!(fit_iqr_scaling(&col(&[0., 0., 0., 10.])).divisors, vec![2.5]);
        // zero IQR falls back to the range
        assert_eq!(fit_iqr_scaling(&col(&[0., 0., 0., 0., 10.])).divisors, vec![10.0]);
    }

    #[test]
    fn kfold_is_exactly_stratified_and_deterministic() {
        let mut labels = vec![true; 10];
        labels.extend([false; 10]);
        let problem = OneClassProblem::from_labels("d", "t", Array2::zeros((20, 1)), labels);
        let folds = stratified_kfold(&problem, 5, 7).unwrap();
        for f in &folds {
            let t = f.test.iter().filter(|&&i| problem.is_target[i]).count();
            assert_eq!(t, 2);
            assert_eq!(f.test.len() - t, 2);
        }
        assert_eq!(folds, stratified_kfold(&problem, 5, 7).unwrap());
    }

    #[test]
    fn too_few_targets_for_k() {
        let mut labels = vec![true; 4];
        labels.extend([false; 10]);
        let problem = OneClassProblem::from_labels("d", "t", Array2::zeros((14, 1)), labels);
        let err = stratified_kfold(&problem, 5, 0).unwrap_err();
        assert!(err.to_string().contains("d/t"));
    }

    #[test]
    fn fold_scaling_uses_training_targets_only() {
        let features = array![[0.0], [2.0], [4.0], [6.0], [8.0], [100.0], [-50.0]];
        let problem = OneClassProblem::from_labels(
            "d",
            "t",
            features,
            vec![true, true, true, true, true, false, false],
        );
        let split = Split {
            train: vec![0, 1, 2, 3, 4, 5],
            test: vec![6],
        };
        let fold = problem.fold(&split);
        assert_eq!(fold.scaling.divisors, vec![4.0]);
        assert_eq!(fold.train[[5, 0]], 25.0);
        assert_eq!(fold.test[[0, 0]], -12.5);
        assert_eq!(fold.target_train().nrows(), 5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn folds_partition_indices(n_t in 5usize..40, n_o in 0usize..40, k in 2usize..6, seed: u64) {
                prop_assume!(n_t >= k);
                let mut labels = vec![true; n_t];
                labels.extend(vec![false; n_o]);
                let folds = stratify(&labels, k, seed).unwrap();
                let mut seen = vec![0; labels.len()];
                for f in &folds {
                    for &i in &f.test { seen[i] += 1; }
                    prop_assert_eq!(f.train.len() + f.test.len(), labels.len());
                    let t = f.test.iter().filter(|&&i| labels[i]).count() as f64;
                    let o = (f.test.len() as f64) - t;
                    prop_assert!((t - n_t as f64 / k as f64).abs() <= 1.0);
                    prop_assert!((o - n_o as f64 / k as f64).abs() <= 1.0);
                }
                prop_assert!(seen.iter().all(|&c| c == 1));
            }

            #[test]
            fn scaling_twice_equals_composed(
                rows in proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, 3), 2..20)
            ) {
                let n = rows.len();
                let data = Array2::from_shape_vec((n, 3), rows.concat()).unwrap();
                let profile = fit_iqr_scaling(&data);
                prop_assert!(profile.divisors.iter().all(|&d| d > 0.0));
                let mut twice = data.clone();
                profile.apply(&mut twice);
                profile.apply(&mut twice);
                let mut once = data.clone();
                profile.compose(&profile).apply(&mut once);
                for (a, b) in twice.iter().zip(once.iter()) {
                    prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
                }
            }
        }
    }
}
