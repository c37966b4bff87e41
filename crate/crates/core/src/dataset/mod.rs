//! Tabular examples, standardization, splitting and synthetic generators.

mod csv_io;
mod synth;

pub use csv_io::{load_csv, read_meta, write_csv, write_meta, CsvSchema, DatasetMeta, TaskKind};
pub use synth::{gen_example2, gen_heteroscedastic, NoiseLaw, MIX_DISPERSION, NOISE_SCALE};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Label of one example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    /// Dense id into a finite label space.
    Class(usize),
    Real(f64),
}

impl Label {
    pub fn as_class(&self) -> Option<usize> {
        match *self {
            Label::Class(c) => Some(c),
            Label::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match *self {
            Label::Real(y) => Some(y),
            Label::Class(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub object: Vec<f64>,
    pub label: Label,
}

impl Example {
    pub fn new(object: Vec<f64>, label: Label) -> Self {
        Self { object, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Label space of the given size.
    Classification(usize),
    Regression,
}

impl Task {
    pub fn is_classification(&self) -> bool {
        matches!(self, Task::Classification(_))
    }
}

/// Per-feature `(mean, stddev)` pairs fitted on a designated split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub stats: Vec<(f64, f64)>,
}

impl Standardization {
    /// Transforms one raw object in place. Zero-variance features map to 0.
    pub fn apply(&self, object: &mut [f64]) {
        for (v, &(mean, sd)) in object.iter_mut().zip(&self.stats) {
            *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    task: Task,
    feature_names: Vec<String>,
    label_names: Vec<String>,
    label_column: String,
    standardization: Option<Standardization>,
}

impl Dataset {
    /// Builds a dataset, checking that every object has one value per
    /// feature name and that every label matches `task`.
    pub fn new(examples: Vec<Example>, task: Task, feature_names: Vec<String>) -> Result<Self> {
        let m = feature_names.len();
        for ex in &examples {
            if ex.object.len() != m {
                return Err(Error::Dimension {
                    expected: m,
                    got: ex.object.len(),
                });
            }
            match (task, ex.label) {
                (Task::Classification(k), Label::Class(c)) if c >= k => {
                    return Err(Error::LabelOutOfSpace { label: c, size: k })
                }
                (Task::Classification(_), Label::Real(_)) | (Task::Regression, Label::Class(_)) => {
                    return Err(Error::Task("label type does not match the dataset task".into()))
                }
                _ => {}
            }
        }
        let label_names = match task {
            Task::Classification(k) => (0..k).map(|c| c.to_string()).collect(),
            Task::Regression => Vec::new(),
        };
        Ok(Self {
            examples,
            task,
            feature_names,
            label_names,
            label_column: "y".to_string(),
            standardization: None,
        })
    }

    /// Replaces the id → name mapping of a classification dataset.
    pub fn with_label_names(mut self, names: Vec<String>) -> Result<Self> {
        match self.task {
            Task::Classification(k) if names.len() == k => {
                self.label_names = names;
                Ok(self)
            }
            Task::Classification(k) => Err(Error::Dimension {
                expected: k,
                got: names.len(),
            }),
            Task::Regression => Err(Error::Task("regression data has no label names".into())),
        }
    }

    pub fn with_label_column(mut self, name: impl Into<String>) -> Self {
        self.label_column = name.into();
        self
    }

    pub fn with_standardization(mut self, s: Standardization) -> Result<Self> {
        if s.stats.len() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                got: s.stats.len(),
            });
        }
        self.standardization = Some(s);
        Ok(self)
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    pub fn objects(&self) -> Vec<&[f64]> {
        self.examples.iter().map(|e| e.object.as_slice()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Rows at `indices`, in that order, sharing all metadata.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            task: self.task,
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
            label_column: self.label_column.clone(),
            standardization: self.standardization.clone(),
        }
    }
}

/// Standardizes every feature with mean and sample stddev (divisor n−1)
/// computed on the rows in `fit_on` only. The fitted stats are stored.
pub fn standardize(data: &Dataset, fit_on: &[usize]) -> Result<Dataset> {
    if fit_on.is_empty() {
        return Err(Error::InvalidArgument("standardize: fit_on is empty".into()));
    }
    let m = data.n_features();
    let n = fit_on.len() as f64;
    let mut stats = Vec::with_capacity(m);
    for j in 0..m {
        let col = || fit_on.iter().map(|&i| data.examples[i].object[j]);
        let mean = col().sum::<f64>() / n;
        let ss: f64 = col().map(|v| (v - mean).powi(2)).sum();
        let sd = if fit_on.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
        // Treat round-off noise on a constant column as zero variance.
        let sd = if sd <= 1e-12 * mean.abs().max(1.0) { 0.0 } else { sd };
        stats.push((mean, sd));
    }
    let s = Standardization { stats };
    let mut out = data.clone();
    for ex in &mut out.examples {
        s.apply(&mut ex.object);
    }
    out.standardization = Some(s);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: usize,
    pub cal: usize,
    pub test: usize,
    pub seed: u64,
    pub shuffle: bool,
}

/// Row indices of the train, calibration and test partitions.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<[Vec<usize>; 3]> {
    let need = spec.train + spec.cal + spec.test;
    if need > n {
        return Err(Error::InvalidArgument(format!(
            "split needs {need} rows but the dataset has {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if spec.shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        order.shuffle(&mut rng);
    }
    let train = order[..spec.train].to_vec();
    let cal = order[spec.train..spec.train + spec.cal].to_vec();
    let test = order[spec.train + spec.cal..need].to_vec();
    Ok([train, cal, test])
}

pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let [tr, ca, te] = split_indices(data.len(), spec)?;
    Ok((data.subset(&tr), data.subset(&ca), data.subset(&te)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> Dataset {
        let ex = values
            .iter()
            .map(|&v| Example::new(vec![v], Label::Real(0.0)))
            .collect();
        Dataset::new(ex, Task::Regression, vec!["a".into()]).unwrap()
    }

    fn col0(d: &Dataset) -> Vec<f64> {
        d.examples().iter().map(|e| e.object[0]).collect()
    }

    #[test]
    fn standardize_sample_stddev() {
        let d = standardize(&column(&[1.0, 2.0, 3.0]), &[0, 1, 2]).unwrap();
        assert_eq!(col0(&d), vec![-1.0, 0.0, 1.0]);
        assert_eq!(d.standardization().unwrap().stats, vec![(2.0, 1.0)]);
    }

    #[test]
    fn standardize_constant_column_is_zero() {
        let d = standardize(&column(&[5.0, 5.0, 5.0]), &[0, 1, 2]).unwrap();
        assert_eq!(col0(&d), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn standardize_uses_fit_rows_only() {
        // mean of {0,2} is 1, sample sd is sqrt(2)
        let d = standardize(&column(&[0.0, 2.0, 10.0]), &[0, 1]).unwrap();
        let s2 = 2f64.sqrt();
        let got = col0(&d);
        assert!((got[0] + 1.0 / s2).abs() < 1e-15);
        assert!((got[1] - 1.0 / s2).abs() < 1e-15);
        assert!((got[2] - 9.0 / s2).abs() < 1e-12);
    }

    #[test]
    fn standardize_rejects_empty_fit() {
        assert!(standardize(&column(&[1.0]), &[]).is_err());
    }

    #[test]
    fn sequential_split() {
        let d = column(&(0..10).map(f64::from).collect::<Vec<_>>());
        let spec = SplitSpec {
            train: 5,
            cal: 3,
            test: 2,
            seed: 1,
            shuffle: false,
        };
        let (a, b, c) = split(&d, &spec).unwrap();
        assert_eq!(col0(&a), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(col0(&b), vec![5.0, 6.0, 7.0]);
        assert_eq!(col0(&c), vec![8.0, 9.0]);
    }

    #[test]
    fn shuffled_split_is_deterministic_and_seed_dependent() {
        let spec = SplitSpec {
            train: 500,
            cal: 300,
            test: 200,
            seed: 7,
            shuffle: true,
        };
        let a = split_indices(1000, &spec).unwrap();
        let b = split_indices(1000, &spec).unwrap();
        assert_eq!(a, b);
        let other = split_indices(1000, &SplitSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a, other);
        let mut all: Vec<usize> = a.concat();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn oversized_split_rejected() {
        let spec = SplitSpec {
            train: 6,
            cal: 3,
            test: 2,
            seed: 0,
            shuffle: false,
        };
        assert!(split_indices(10, &spec).is_err());
    }

    #[test]
    fn dataset_invariants() {
        let bad = vec![Example::new(vec![1.0, 2.0], Label::Real(0.0))];
        assert!(Dataset::new(bad, Task::Regression, vec!["a".into()]).is_err());
        let out = vec![Example::new(vec![1.0], Label::Class(3))];
        assert!(matches!(
            Dataset::new(out, Task::Classification(2), vec!["a".into()]),
            Err(Error::LabelOutOfSpace { .. })
        ));
    }
}
