//! Tabular data, feature groups and reproducible row splits.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DipError, Result};
use crate::scalar::Scalar;

/// Column-major numeric table with a designated target.
///
/// Columns are reference counted, so projections and clones share storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    feature_names: Vec<String>,
    columns: Vec<Arc<[T]>>,
    target: Arc<[T]>,
    target_name: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        feature_names: Vec<String>,
        columns: Vec<Vec<T>>,
        target_name: impl Into<String>,
        target: Vec<T>,
    ) -> Result<Self> {
        if feature_names.len() != columns.len() {
            return Err(DipError::InvalidDataset(format!(
                "{} names for {} columns",
                feature_names.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if name.is_empty() {
                return Err(DipError::InvalidDataset("empty feature name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(DipError::InvalidDataset(format!("duplicate feature name `{name}`")));
            }
        }
        let n = target.len();
        for (name, col) in feature_names.iter().zip(&columns) {
            if col.len() != n {
                return Err(DipError::InvalidDataset(format!(
                    "column `{name}` has {} rows, target has {n}",
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(DipError::NonFinite { row, column: name.clone() });
            }
        }
        let target_name = target_name.into();
        if let Some(row) = target.iter().position(|v| !v.is_finite()) {
            return Err(DipError::NonFinite { row, column: target_name });
        }
        Ok(Self {
            feature_names,
            columns: columns.into_iter().map(Arc::from).collect(),
            target: Arc::from(target),
            target_name,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn column(&self, index: usize) -> &[T] {
        &self.columns[index]
    }

    pub fn target(&self) -> &[T] {
        &self.target
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Keep only the listed feature columns, in the given order. Rows and target are untouched.
    pub fn project(&self, features: &[usize]) -> Result<Self> {
        let mut seen = HashSet::new();
        for &f in features {
            self.check_index(f)?;
            if !seen.insert(f) {
                return Err(DipError::InvalidGroup(format!("feature {f} listed twice")));
            }
        }
        Ok(Self {
            feature_names: features.iter().map(|&f| self.feature_names[f].clone()).collect(),
            columns: features.iter().map(|&f| Arc::clone(&self.columns[f])).collect(),
            target: Arc::clone(&self.target),
            target_name: self.target_name.clone(),
        })
    }

    /// Materialize a subset of rows, in the given order.
    pub fn take_rows(&self, rows: &[usize]) -> Result<Self> {
        let n = self.n_rows();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(DipError::InvalidSplit(format!("row {bad} out of range for {n} rows")));
        }
        let pick = |col: &[T]| -> Arc<[T]> { rows.iter().map(|&r| col[r]).collect() };
        Ok(Self {
            feature_names: self.feature_names.clone(),
            columns: self.columns.iter().map(|c| pick(c)).collect(),
            target: pick(&self.target),
            target_name: self.target_name.clone(),
        })
    }

    pub(crate) fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.n_features() {
            return Err(DipError::InvalidIndex { index, n_features: self.n_features() });
        }
        Ok(())
    }
}

/// Read a headed CSV file. The target column is split off; every other column becomes a feature.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, target_name: &str) -> Result<Dataset<T>> {
    load_csv_with_categorical(path, target_name, &[])
}

/// Like [`load_csv`], but the named columns are treated as categorical and their
/// distinct strings are coded 0..K-1 in order of first appearance.
pub fn load_csv_with_categorical<T: Scalar>(
    path: impl AsRef<Path>,
    target_name: &str,
    categorical: &[String],
) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|source| DipError::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| DipError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let target_col = header
        .iter()
        .position(|h| h == target_name)
        .ok_or_else(|| DipError::MissingColumn(target_name.to_string()))?;
    for c in categorical {
        if !header.contains(c) {
            return Err(DipError::MissingColumn(c.clone()));
        }
    }
    let is_cat: Vec<bool> = header.iter().map(|h| categorical.contains(h)).collect();
    let mut codes: Vec<HashMap<String, usize>> = vec![HashMap::new(); header.len()];
    let mut raw: Vec<Vec<T>> = vec![Vec::new(); header.len()];

    for (i, record) in reader.records().enumerate() {
        // 1-based line number in the file, header included
        let row = i + 2;
        let record = record.map_err(|e| DipError::Csv(e.to_string()))?;
        if record.len() != header.len() {
            return Err(DipError::Csv(format!(
                "line {row}: expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let value = if is_cat[j] {
                if cell.is_empty() {
                    return Err(DipError::BadCell { row, column: header[j].clone(), value: cell.into() });
                }
                let next = codes[j].len();
                let code = *codes[j].entry(cell.to_string()).or_insert(next);
                T::of_usize(code)
            } else {
                let parsed: f64 = cell.parse().map_err(|_| DipError::BadCell {
                    row,
                    column: header[j].clone(),
                    value: cell.to_string(),
                })?;
                if !parsed.is_finite() {
                    return Err(DipError::NonFinite { row, column: header[j].clone() });
                }
                T::of(parsed)
            };
            raw[j].push(value);
        }
    }

    let target = raw.remove(target_col);
    let mut names = header;
    names.remove(target_col);
    Dataset::new(names, raw, target_name, target)
}

/// Partition of the feature indices into two non-empty disjoint groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub group_j: Vec<usize>,
    pub group_jbar: Vec<usize>,
}

impl GroupSpec {
    pub fn new(group_j: Vec<usize>, group_jbar: Vec<usize>, n_features: usize) -> Result<Self> {
        let a: BTreeSet<usize> = group_j.iter().copied().collect();
        let b: BTreeSet<usize> = group_jbar.iter().copied().collect();
        if a.len() != group_j.len() || b.len() != group_jbar.len() {
            return Err(DipError::InvalidGroup("repeated feature index".into()));
        }
        if a.is_empty() || b.is_empty() {
            return Err(DipError::InvalidGroup("both groups must be non-empty".into()));
        }
        if let Some(&bad) = a.iter().chain(&b).find(|&&i| i >= n_features) {
            return Err(DipError::InvalidIndex { index: bad, n_features });
        }
        if a.intersection(&b).next().is_some() {
            return Err(DipError::InvalidGroup("groups overlap".into()));
        }
        if a.len() + b.len() != n_features {
            return Err(DipError::InvalidGroup("groups do not cover every feature".into()));
        }
        Ok(Self { group_j: a.into_iter().collect(), group_jbar: b.into_iter().collect() })
    }

    /// `group` against everything else.
    pub fn complement_of(group: Vec<usize>, n_features: usize) -> Result<Self> {
        let set: HashSet<usize> = group.iter().copied().collect();
        let rest = (0..n_features).filter(|i| !set.contains(i)).collect();
        Self::new(group, rest, n_features)
    }

    pub fn swapped(&self) -> Self {
        Self { group_j: self.group_jbar.clone(), group_jbar: self.group_j.clone() }
    }

    pub fn all(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.group_j.iter().chain(&self.group_jbar).copied().collect();
        all.sort_unstable();
        all
    }
}

/// Disjoint train/test row indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<SplitPlan>,
    pub k: usize,
    pub seed: u64,
}

fn shuffled_rows(n_rows: usize, seed: u64) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..n_rows).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    rows
}

pub fn holdout_split(n_rows: usize, test_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if n_rows < 2 {
        return Err(DipError::InvalidSplit(format!("need at least 2 rows, got {n_rows}")));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DipError::InvalidSplit(format!("test fraction {test_fraction} not in (0,1)")));
    }
    let n_test = (test_fraction * n_rows as f64).round() as usize;
    if n_test == 0 || n_test == n_rows {
        return Err(DipError::InvalidSplit(format!(
            "test fraction {test_fraction} of {n_rows} rows leaves an empty side"
        )));
    }
    let rows = shuffled_rows(n_rows, seed);
    let mut test_idx = rows[..n_test].to_vec();
    let mut train_idx = rows[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok(SplitPlan { train_idx, test_idx, seed })
}

pub fn kfold_split(n_rows: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n_rows {
        return Err(DipError::InvalidSplit(format!("k={k} must lie in [2, {n_rows}]")));
    }
    let rows = shuffled_rows(n_rows, seed);
    let base = n_rows / k;
    let extra = n_rows % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        let mut test_idx = rows[start..start + size].to_vec();
        let mut train_idx: Vec<usize> =
            rows[..start].iter().chain(&rows[start + size..]).copied().collect();
        test_idx.sort_unstable();
        train_idx.sort_unstable();
        folds.push(SplitPlan { train_idx, test_idx, seed });
        start += size;
    }
    Ok(FoldPlan { folds, k, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn toy() -> Dataset<f64> {
        Dataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
            "y",
            vec![0.5, 1.5],
        )
        .unwrap()
    }

    #[test]
    fn loads_small_csv() {
        let f = write_csv("x1,x2,y\n1,2,3\n4,5,6\n7,8,9\n");
        let d: Dataset<f64> = load_csv(f.path(), "y").unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.feature_names(), ["x1", "x2"]);
        assert_eq!(d.target(), [3.0, 6.0, 9.0]);
        assert_eq!(d.column(1), [2.0, 5.0, 8.0]);
    }

    #[test]
    fn blank_cell_is_named() {
        let f = write_csv("x1,x2,y\n1,2,3\n4,,6\n");
        match load_csv::<f64>(f.path(), "y") {
            Err(DipError::BadCell { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "x2");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_nan_and_missing_target() {
        let f = write_csv("x1,y\nNaN,1\n");
        assert!(matches!(load_csv::<f64>(f.path(), "y"), Err(DipError::NonFinite { .. })));
        let f = write_csv("x1,y\n1,1\n");
        assert!(matches!(load_csv::<f64>(f.path(), "z"), Err(DipError::MissingColumn(_))));
        assert!(matches!(load_csv::<f64>("/nonexistent/file.csv", "y"), Err(DipError::Io { .. })));
    }

    #[test]
    fn categorical_codes_follow_first_appearance() {
        let f = write_csv("x,where,y\n1,INLAND,0\n2,NEAR BAY,1\n3,INLAND,2\n4,ISLAND,3\n");
        let d: Dataset<f64> =
            load_csv_with_categorical(f.path(), "y", &["where".to_string()]).unwrap();
        assert_eq!(d.column(1), [0.0, 1.0, 0.0, 2.0]);
    }

    #[test]
    fn red_wine_fixture_loads() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/winequality-red.csv");
        let d: Dataset<f64> = load_csv(path, "quality").unwrap();
        assert_eq!(d.n_rows(), 1599);
        assert_eq!(d.n_features(), 11);
    }

    #[test]
    fn projection() {
        let d = toy();
        let empty = d.project(&[]).unwrap();
        assert_eq!(empty.n_features(), 0);
        assert_eq!(empty.target(), d.target());
        assert_eq!(d.project(&[0]).unwrap().n_features(), 1);
        assert_eq!(d.project(&[0, 1]).unwrap().project(&[0]).unwrap(), d.project(&[0]).unwrap());
        assert!(matches!(d.project(&[7]), Err(DipError::InvalidIndex { .. })));
    }

    #[test]
    fn rejects_malformed_datasets() {
        let dup = Dataset::new(vec!["a".into(), "a".into()], vec![vec![1.0], vec![2.0]], "y", vec![0.0]);
        assert!(dup.is_err());
        let short = Dataset::new(vec!["a".into()], vec![vec![1.0, 2.0]], "y", vec![0.0]);
        assert!(short.is_err());
    }

    #[test]
    fn group_spec_validation() {
        assert!(GroupSpec::new(vec![0], vec![1, 2], 3).is_ok());
        assert!(GroupSpec::new(vec![], vec![0, 1], 2).is_err());
        assert!(GroupSpec::new(vec![0, 1], vec![1, 2], 3).is_err());
        assert!(GroupSpec::new(vec![0], vec![1], 3).is_err());
        assert_eq!(GroupSpec::complement_of(vec![1], 3).unwrap().group_jbar, vec![0, 2]);
    }

    #[test]
    fn holdout_sizes() {
        let plan = holdout_split(10, 0.2, 42).unwrap();
        assert_eq!((plan.train_idx.len(), plan.test_idx.len()), (8, 2));
        assert_eq!(plan, holdout_split(10, 0.2, 42).unwrap());
        let big = holdout_split(100_000, 0.2, 3).unwrap();
        assert_eq!((big.train_idx.len(), big.test_idx.len()), (80_000, 20_000));
        assert!(holdout_split(1, 0.5, 0).is_err());
        assert!(holdout_split(10, 0.01, 0).is_err());
        assert!(holdout_split(10, 1.0, 0).is_err());
    }

    #[test]
    fn kfold_sizes() {
        let plan = kfold_split(10, 5, 1).unwrap();
        assert!(plan.folds.iter().all(|f| f.test_idx.len() == 2));
        let mut sizes: Vec<usize> =
            kfold_split(11, 5, 1).unwrap().folds.iter().map(|f| f.test_idx.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, [2, 2, 2, 2, 3]);
        let housing = kfold_split(20433, 10, 7).unwrap();
        assert!(housing.folds.iter().all(|f| [2043, 2044].contains(&f.test_idx.len())));
        assert!(kfold_split(5, 1, 0).is_err());
        assert!(kfold_split(5, 6, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_rows(n in 2usize..300, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let plan = kfold_split(n, k, seed).unwrap();
            let mut hits = vec![0usize; n];
            for fold in &plan.folds {
                for &i in &fold.test_idx { hits[i] += 1; }
                let train: HashSet<_> = fold.train_idx.iter().collect();
                prop_assert!(fold.test_idx.iter().all(|i| !train.contains(i)));
                prop_assert_eq!(fold.train_idx.len() + fold.test_idx.len(), n);
            }
            prop_assert!(hits.iter().all(|&h| h == 1));
            let sizes: Vec<usize> = plan.folds.iter().map(|f| f.test_idx.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(plan, kfold_split(n, k, seed).unwrap());
        }

        #[test]
        fn projection_preserves_rows(cols in proptest::collection::vec(0usize..3, 0..3)) {
            let mut cols = cols;
            cols.dedup();
            let set: HashSet<_> = cols.iter().collect();
            prop_assume!(set.len() == cols.len());
            let d = toy();
            let p = d.project(&cols).unwrap();
            prop_assert_eq!(p.n_rows(), d.n_rows());
            prop_assert_eq!(p.target(), d.target());
        }
    }
}
