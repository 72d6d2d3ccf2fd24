//! Tabular datasets with a missing-value mask and per-feature costs.
//!
//! Missing cells are never imputed. They are carried as `present = false` and
//! the environment refuses to acquire them.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::{Error, Result};

/// Marker in the first cell of the optional cost row of a CSV file.
pub const COST_ROW_MARKER: &str = "#costs";

/// Columns with a population standard deviation below this map to zero.
pub const STD_FLOOR: f64 = 1e-12;

/// Immutable feature matrix with availability mask, labels and costs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    values: Vec<f64>,
    present: Vec<bool>,
    labels: Vec<usize>,
    costs: Vec<f64>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from row-major `values`/`present` (n × p).
    ///
    /// Values at masked cells are replaced by zero so that stale numbers can
    /// never leak into a state encoding.
    pub fn new(
        mut values: Vec<f64>,
        present: Vec<bool>,
        labels: Vec<usize>,
        costs: Vec<f64>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        let p = costs.len();
        if n == 0 {
            return Err(Error::validation("dataset has no rows"));
        }
        if p == 0 {
            return Err(Error::validation("dataset has no features"));
        }
        if class_names.len() < 2 {
            return Err(Error::validation(format!(
                "need at least 2 classes, got {}",
                class_names.len()
            )));
        }
        if values.len() != n * p || present.len() != n * p {
            return Err(Error::validation(format!(
                "matrix size mismatch: expected {} cells, values {} present {}",
                n * p,
                values.len(),
                present.len()
            )));
        }
        if feature_names.len() != p {
            return Err(Error::validation("feature name count differs from cost count"));
        }
        if let Some((j, c)) = costs
            .iter()
            .enumerate()
            .find(|(_, c)| !(c.is_finite() && **c > 0.0))
        {
            return Err(Error::validation(format!("cost of feature {j} must be > 0, got {c}")));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(Error::validation(format!("label {bad} out of range")));
        }
        for (v, &ok) in values.iter_mut().zip(&present) {
            if !ok {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(Error::validation("non-finite feature value"));
            }
        }
        Ok(Self {
            n_features: p,
            values,
            present,
            labels,
            costs,
            feature_names,
            class_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Feature value, or `None` when the cell is missing.
    pub fn value(&self, row: usize, feature: usize) -> Option<f64> {
        let idx = row * self.n_features + feature;
        self.present[idx].then(|| self.values[idx])
    }

    pub fn is_present(&self, row: usize, feature: usize) -> bool {
        self.present[row * self.n_features + feature]
    }

    pub fn label(&self, row: usize) -> usize {
        self.labels[row]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Number of missing cells.
    pub fn missing_count(&self) -> usize {
        self.present.iter().filter(|&&p| !p).count()
    }

    pub fn with_costs(&self, costs: Vec<f64>) -> Result<Self> {
        Self::new(
            self.values.clone(),
            self.present.clone(),
            self.labels.clone(),
            costs,
            self.feature_names.clone(),
            self.class_names.clone(),
        )
    }

    /// Dataset made of `rows` (in the given order). Class names are kept even
    /// if some class has no row in the subset.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let p = self.n_features;
        let mut values = Vec::with_capacity(rows.len() * p);
        let mut present = Vec::with_capacity(rows.len() * p);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            if r >= self.n_rows() {
                return Err(Error::validation(format!("row {r} out of range")));
            }
            values.extend_from_slice(&self.values[r * p..(r + 1) * p]);
            present.extend_from_slice(&self.present[r * p..(r + 1) * p]);
            labels.push(self.labels[r]);
        }
        Self::new(
            values,
            present,
            labels,
            self.costs.clone(),
            self.feature_names.clone(),
            self.class_names.clone(),
        )
    }

    /// Copy with roughly `fraction` of all cells masked as missing, chosen
    /// uniformly at random.
    pub fn with_random_missing(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::validation("missing fraction must lie in [0, 1)"));
        }
        let mut rng = seed::rng(seed);
        let present = self
            .present
            .iter()
            .map(|&p| p && rng.gen::<f64>() >= fraction)
            .collect();
        Self::new(
            self.values.clone(),
            present,
            self.labels.clone(),
            self.costs.clone(),
            self.feature_names.clone(),
            self.class_names.clone(),
        )
    }

    fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let p = self.n_features;
        let values = self
            .values
            .iter()
            .zip(&self.present)
            .enumerate()
            .map(|(idx, (&v, &ok))| if ok { f(idx % p, v) } else { 0.0 })
            .collect();
        Self { values, ..self.clone() }
    }
}

/// Reads a CSV file. See [`parse_csv`] for the format.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, label_column)
}

/// Parses CSV text.
///
/// The first row is the header (feature names plus the label column). An
/// optional second row starting with `#costs` gives one cost per feature
/// column in header order. Without it every feature costs 1. Empty cells are
/// missing values. Labels are re-indexed to `0..K` by first appearance.
pub fn parse_csv(text: &str, label_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        Some(r) => r?,
        None => return Err(Error::Parse { line: 1, msg: "missing header row".into() }),
    };
    let width = header.len();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("label column '{label_column}' not found"),
        })?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let p = feature_names.len();
    if p == 0 {
        return Err(Error::Parse { line: 1, msg: "no feature columns".into() });
    }

    let mut costs: Option<Vec<f64>> = None;
    let mut values = Vec::new();
    let mut present = Vec::new();
    let mut labels = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();

    for (ordinal, record) in records.enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |pos| pos.line());
        let first = record.get(0).unwrap_or("");
        if ordinal == 0 && first.starts_with(COST_ROW_MARKER) {
            if record.len() != p + 1 {
                return Err(Error::Parse {
                    line,
                    msg: format!("cost row has {} cells, expected {}", record.len(), p + 1),
                });
            }
            let parsed = record
                .iter()
                .skip(1)
                .map(|cell| {
                    cell.parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        msg: format!("invalid cost '{cell}'"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            costs = Some(parsed);
            continue;
        }
        if record.len() == 1 && first.is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(Error::Parse {
                line,
                msg: format!("row has {} cells, expected {}", record.len(), width),
            });
        }
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                if cell.is_empty() {
                    return Err(Error::Parse { line, msg: "empty label".into() });
                }
                let next = class_names.len();
                let y = *class_index.entry(cell.to_string()).or_insert_with(|| {
                    class_names.push(cell.to_string());
                    next
                });
                labels.push(y);
            } else if cell.is_empty() {
                values.push(0.0);
                present.push(false);
            } else {
                let v = cell.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("non-numeric value '{cell}' in column '{}'", &header[i]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line, msg: format!("non-finite value '{cell}'") });
                }
                values.push(v);
                present.push(true);
            }
        }
    }

    if labels.is_empty() {
        return Err(Error::validation("CSV has no data rows"));
    }
    if class_names.len() < 2 {
        return Err(Error::validation("labels contain a single class"));
    }
    let costs = costs.unwrap_or_else(|| vec![1.0; p]);
    Dataset::new(values, present, labels, costs, feature_names, class_names)
}

/// `p` costs drawn i.i.d. uniformly from `[lo, hi]`.
pub fn assign_random_costs(p: usize, lo: f64, hi: f64, seed: u64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(Error::validation(format!("cost lower bound must be > 0, got {lo}")));
    }
    if hi < lo {
        return Err(Error::validation(format!("cost range [{lo}, {hi}] is empty")));
    }
    let mut rng = seed::rng(seed);
    Ok((0..p).map(|_| rng.gen_range(lo..=hi)).collect())
}

/// Per-feature z-score statistics over present training cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn fit(train: &Dataset) -> Self {
        let p = train.n_features();
        let mut sum = vec![0.0; p];
        let mut count = vec![0usize; p];
        for row in 0..train.n_rows() {
            for j in 0..p {
                if let Some(v) = train.value(row, j) {
                    sum[j] += v;
                    count[j] += 1;
                }
            }
        }
        let mean: Vec<f64> = sum
            .iter()
            .zip(&count)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();
        let mut sq = vec![0.0; p];
        for row in 0..train.n_rows() {
            for j in 0..p {
                if let Some(v) = train.value(row, j) {
                    sq[j] += (v - mean[j]).powi(2);
                }
            }
        }
        let std = sq
            .iter()
            .zip(&count)
            .map(|(&s, &c)| if c > 0 { (s / c as f64).sqrt() } else { 0.0 })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.n_features() != self.mean.len() {
            return Err(Error::validation("normalization stats do not match feature count"));
        }
        Ok(ds.map_values(|j, v| {
            if self.std[j] < STD_FLOOR {
                0.0
            } else {
                (v - self.mean[j]) / self.std[j]
            }
        }))
    }
}

/// Fits z-score statistics on `train` and applies them to `train` and `others`.
pub fn normalize(train: &Dataset, others: &[&Dataset]) -> Result<(Dataset, Vec<Dataset>, NormStats)> {
    let stats = NormStats::fit(train);
    let train_n = stats.apply(train)?;
    let others_n = others.iter().map(|ds| stats.apply(ds)).collect::<Result<Vec<_>>>()?;
    Ok((train_n, others_n, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        let spec = Self { train_frac, val_frac, test_frac, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for f in [self.train_frac, self.val_frac, self.test_frac] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::validation(format!("split fraction {f} not in (0, 1)")));
            }
        }
        let total = self.train_frac + self.val_frac + self.test_frac;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!("split fractions sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Row indices of a train/validation/test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..n` cut into three parts. Validation and test sizes
/// are rounded down; the remainder goes to training.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<Partition> {
    spec.validate()?;
    let part = |frac: f64| (n as f64 * frac + 1e-9).floor() as usize;
    let n_val = part(spec.val_frac);
    let n_test = part(spec.test_frac);
    let n_train = n.saturating_sub(n_val + n_test);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::validation(format!(
            "split of {n} rows leaves an empty part ({n_train}/{n_val}/{n_test})"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(spec.seed));
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Ok(Partition { train: idx, val, test })
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let part = split_indices(ds.n_rows(), spec)?;
    Ok((
        ds.select_rows(&part.train)?,
        ds.select_rows(&part.val)?,
        ds.select_rows(&part.test)?,
    ))
}

/// Deletes random rows of `minority_label` until its proportion is within one
/// sample of `target_ratio`. Surviving rows keep their order.
pub fn make_unbalanced(
    ds: &Dataset,
    minority_label: usize,
    target_ratio: f64,
    seed: u64,
) -> Result<Dataset> {
    if ds.n_classes() != 2 {
        return Err(Error::validation("unbalancing requires a binary dataset"));
    }
    if minority_label >= 2 {
        return Err(Error::validation(format!("minority label {minority_label} out of range")));
    }
    let counts = ds.class_counts();
    let minority = counts[minority_label];
    let majority = counts[1 - minority_label];
    let current = minority as f64 / (minority + majority) as f64;
    if !(target_ratio > 0.0 && target_ratio < current) {
        return Err(Error::validation(format!(
            "target proportion {target_ratio} must lie in (0, {current})"
        )));
    }
    // keep m rows so that m / (m + majority) ≈ target
    let keep = (target_ratio * majority as f64 / (1.0 - target_ratio)).round() as usize;
    if keep == 0 {
        return Err(Error::validation("target proportion would remove every minority row"));
    }
    let keep = keep.min(minority);

    let mut minority_rows: Vec<usize> =
        (0..ds.n_rows()).filter(|&r| ds.label(r) == minority_label).collect();
    minority_rows.shuffle(&mut seed::rng(seed));
    let mut dropped = vec![false; ds.n_rows()];
    for &r in &minority_rows[keep..] {
        dropped[r] = true;
    }
    let rows: Vec<usize> = (0..ds.n_rows()).filter(|&r| !dropped[r]).collect();
    ds.select_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn column(values: &[f64]) -> Dataset {
        let n = values.len();
        Dataset::new(
            values.to_vec(),
            vec![true; n],
            (0..n).map(|i| i % 2).collect(),
            vec![1.0],
            vec!["f".into()],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    fn balanced(n_each: usize) -> Dataset {
        let n = 2 * n_each;
        Dataset::new(
            (0..n).map(|i| i as f64).collect(),
            vec![true; n],
            (0..n).map(|i| usize::from(i % 2 == 1)).collect(),
            vec![0.5],
            vec!["f".into()],
            vec!["maj".into(), "min".into()],
        )
        .unwrap()
    }

    #[test]
    fn csv_reindexes_labels_by_first_appearance() {
        let ds = parse_csv("x,z,label\n1,2,a\n3,4,b\n5,6,a\n", "label").unwrap();
        assert_eq!((ds.n_rows(), ds.n_features(), ds.n_classes()), (3, 2, 2));
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.costs(), &[1.0, 1.0]);
    }

    #[test]
    fn csv_empty_cell_is_missing() {
        let ds = parse_csv("x,z,label\n1,2,a\n,4,b\n5,6,a\n", "label").unwrap();
        assert!(!ds.is_present(1, 0));
        assert_eq!(ds.value(1, 0), None);
        assert_eq!(ds.value(1, 1), Some(4.0));
    }

    #[test]
    fn csv_cost_row_and_label_in_front() {
        let ds = parse_csv("y,a,b\n#costs,0.25,0.75\nn,1,2\np,3,4\n", "y").unwrap();
        assert_eq!(ds.costs(), &[0.25, 0.75]);
        assert_eq!(ds.feature_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(ds.value(1, 1), Some(4.0));
    }

    #[test]
    fn csv_errors() {
        match parse_csv("x,label\n1,a\n2,b,9\n", "label") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_csv("x,label\n1,a\nfoo,b\n", "label") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(parse_csv("x,label\n1,a\n2,a\n", "label"), Err(Error::Validation(_))));
        assert!(matches!(parse_csv("x,label\n1,a\n", "nope"), Err(Error::Parse { .. })));
    }

    #[test]
    fn wine_fixture_shape() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/wine.csv");
        let ds = load_csv(path, "class").unwrap();
        assert_eq!((ds.n_features(), ds.n_classes()), (13, 3));
    }

    #[test]
    fn random_costs() {
        assert_eq!(assign_random_costs(5, 1.0, 1.0, 42).unwrap(), vec![1.0; 5]);
        assert_eq!(
            assign_random_costs(13, 0.1, 1.0, 7).unwrap(),
            assign_random_costs(13, 0.1, 1.0, 7).unwrap()
        );
        let c = assign_random_costs(1000, 0.1, 1.0, 3).unwrap();
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        assert!((0.52..=0.58).contains(&mean), "mean {mean}");
        assert!(assign_random_costs(3, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn normalize_population_zscore() {
        let (t, _, stats) = normalize(&column(&[1.0, 2.0, 3.0]), &[]).unwrap();
        let expect = [-1.224_744_871, 0.0, 1.224_744_871];
        for (r, e) in expect.iter().enumerate() {
            assert!((t.value(r, 0).unwrap() - e).abs() < 1e-4);
        }
        assert!((stats.mean[0] - 2.0).abs() < 1e-15);

        let (c, _, _) = normalize(&column(&[5.0, 5.0]), &[]).unwrap();
        assert_eq!(c.value(0, 0), Some(0.0));
        assert_eq!(c.value(1, 0), Some(0.0));
    }

    #[test]
    fn normalize_keeps_mask_and_uses_present_cells_only() {
        let ds = parse_csv("x,label\n1,a\n,b\n3,a\n", "label").unwrap();
        let (t, others, stats) = normalize(&ds, &[&ds]).unwrap();
        assert_eq!(stats.mean[0], 2.0);
        assert_eq!(t.value(1, 0), None);
        assert_eq!(others[0], t);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = column(&(0..10).map(f64::from).collect::<Vec<_>>());
        let spec = SplitSpec::new(0.6, 0.2, 0.2, 1).unwrap();
        let (a, b, c) = split(&ds, &spec).unwrap();
        assert_eq!((a.n_rows(), b.n_rows(), c.n_rows()), (6, 2, 2));
        assert_eq!(split_indices(10, &spec).unwrap(), split_indices(10, &spec).unwrap());
        assert!(split_indices(3, &SplitSpec::new(0.8, 0.1, 0.1, 1).unwrap()).is_err());
        assert!(SplitSpec::new(0.5, 0.2, 0.2, 1).is_err());
    }

    #[test]
    fn unbalance_to_target() {
        let ds = balanced(100);
        let out = make_unbalanced(&ds, 1, 0.2, 9).unwrap();
        assert_eq!(out.class_counts(), vec![100, 25]);

        let same = make_unbalanced(&ds, 1, 0.5 - 1e-9, 9).unwrap();
        assert!(ds.n_rows() - same.n_rows() <= 1);

        assert!(make_unbalanced(&ds, 1, 0.6, 9).is_err());

        for target in [0.2, 0.15, 0.1] {
            let out = make_unbalanced(&ds, 1, target, 3).unwrap();
            let counts = out.class_counts();
            let m = counts[1] as f64;
            let prop = m / out.n_rows() as f64;
            let slack = (m + 1.0) / (m + 1.0 + 100.0) - m / (m + 100.0);
            assert!((prop - target).abs() <= slack, "{target}: {prop}");
        }
    }

    #[test]
    fn unbalance_keeps_majority_and_order() {
        let ds = balanced(50);
        let out = make_unbalanced(&ds, 1, 0.1, 4).unwrap();
        let kept: Vec<f64> = (0..out.n_rows()).map(|r| out.value(r, 0).unwrap()).collect();
        assert!(kept.windows(2).all(|w| w[0] < w[1]));
        let majority: Vec<f64> =
            (0..out.n_rows()).filter(|&r| out.label(r) == 0).map(|r| out.value(r, 0).unwrap()).collect();
        assert_eq!(majority, (0..50).map(|i| f64::from(2 * i)).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 10usize..300, seed in any::<u64>(), tr in 0.3f64..0.8) {
            let rest = 1.0 - tr;
            let spec = SplitSpec { train_frac: tr, val_frac: rest / 2.0, test_frac: rest / 2.0, seed };
            if let Ok(part) = split_indices(n, &spec) {
                let mut all: Vec<usize> = part.train.iter().chain(&part.val).chain(&part.test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }

        #[test]
        fn costs_within_bounds(p in 1usize..100, lo in 0.01f64..2.0, width in 0.0f64..3.0, seed in any::<u64>()) {
            let hi = lo + width;
            for c in assign_random_costs(p, lo, hi, seed).unwrap() {
                prop_assert!(c >= lo && c <= hi);
            }
        }

        #[test]
        fn normalize_is_idempotent(vals in proptest::collection::vec(-1e3f64..1e3, 3..40)) {
            let ds = column(&vals);
            let (once, _, stats) = normalize(&ds, &[]).unwrap();
            prop_assume!(stats.std[0] > 1e-6);
            let (twice, _, _) = normalize(&once, &[]).unwrap();
            for r in 0..ds.n_rows() {
                prop_assert!((once.value(r, 0).unwrap() - twice.value(r, 0).unwrap()).abs() < 1e-9);
            }
        }
    }
}
