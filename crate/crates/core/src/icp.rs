//! Inductive conformal prediction on top of a fitted [`ConformityMeasure`].
//!
//! A candidate label `y` enters the prediction set for `x` when
//! `#{j : A(x,y) ≥ A(z_j)} + 1 > ε(n+1)` over the `n` calibration scores.
//! Ties count towards the candidate. The count is non-decreasing in the
//! candidate score, so the rule reduces to a threshold: the `r`-th smallest
//! calibration score with `r = ⌊ε(n+1)⌋`, or the full label space when
//! `r = 0`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::conformity::{Candidates, ConformityMeasure, ScoreSheet};
use crate::dataset::{Dataset, Label, Task};
use crate::error::{Error, Result};

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "significance must be in (0,1), got {epsilon}"
        )));
    }
    Ok(())
}

/// Sorted calibration scores and the significance level they serve.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    scores: Vec<f64>,
    epsilon: f64,
}

impl CalibrationTable {
    pub fn from_scores(mut scores: Vec<f64>, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if scores.is_empty() {
            return Err(Error::EmptyInput("calibration set is empty".into()));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidArgument("calibration score is NaN".into()));
        }
        scores.sort_by(f64::total_cmp);
        Ok(Self { scores, epsilon })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self {
            scores: self.scores.clone(),
            epsilon,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Every candidate is admitted.
    NegInfinity,
    Value(f64),
}

impl Threshold {
    pub fn admits(&self, score: f64) -> bool {
        match *self {
            Threshold::NegInfinity => true,
            Threshold::Value(t) => score >= t,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Threshold::NegInfinity => f64::NEG_INFINITY,
            Threshold::Value(t) => t,
        }
    }
}

/// Rank of the threshold order statistic, `⌊ε(n+1)⌋` (0 means no threshold).
fn threshold_rank(n: usize, epsilon: f64) -> usize {
    (epsilon * (n as f64 + 1.0)).floor() as usize
}

/// Smallest calibration score that the counting rule admits as a candidate.
pub fn threshold(table: &CalibrationTable) -> Threshold {
    match threshold_rank(table.scores.len(), table.epsilon) {
        0 => Threshold::NegInfinity,
        r => Threshold::Value(table.scores[r - 1]),
    }
}

/// The counting rule itself, evaluated directly. `O(n)` per candidate.
pub fn counting_member(cal_scores: &[f64], candidate: f64, epsilon: f64) -> bool {
    let count = cal_scores.iter().filter(|&&s| candidate >= s).count();
    (count + 1) as f64 > epsilon * (cal_scores.len() as f64 + 1.0)
}

pub fn calibrate(cm: &ConformityMeasure, cal: &Dataset, epsilon: f64) -> Result<CalibrationTable> {
    if cal.is_empty() {
        return Err(Error::EmptyInput("calibration set is empty".into()));
    }
    CalibrationTable::from_scores(cm.sheet(cal)?.true_scores, epsilon)
}

/// Threshold on `base_i + γ·step_i`, the calibration set being the scored
/// examples themselves.
pub fn threshold_gamma(base_scores: &[f64], steps: &[i8], gamma: f64, epsilon: f64) -> Result<Threshold> {
    if base_scores.len() != steps.len() {
        return Err(Error::Dimension {
            expected: base_scores.len(),
            got: steps.len(),
        });
    }
    let scores = base_scores
        .iter()
        .zip(steps)
        .map(|(b, &s)| b + gamma * f64::from(s))
        .collect();
    Ok(threshold(&CalibrationTable::from_scores(scores, epsilon)?))
}

/// A prediction set: labels for classification, a closed interval for
/// regression (infinite bounds when every label is admitted).
#[derive(Debug, Clone, PartialEq)]
pub enum PredictionOutput {
    LabelSet(Vec<usize>),
    Interval { lo: f64, hi: f64 },
}

impl PredictionOutput {
    pub fn contains(&self, label: &Label) -> bool {
        match (self, label) {
            (PredictionOutput::LabelSet(s), Label::Class(c)) => s.contains(c),
            (PredictionOutput::Interval { lo, hi }, Label::Real(y)) => *lo <= *y && *y <= *hi,
            _ => false,
        }
    }

    /// Cardinality or width.
    pub fn size(&self) -> f64 {
        match self {
            PredictionOutput::LabelSet(s) => s.len() as f64,
            PredictionOutput::Interval { lo, hi } => hi - lo,
        }
    }

    pub fn is_full_line(&self) -> bool {
        matches!(self, PredictionOutput::Interval { lo, hi } if lo.is_infinite() || hi.is_infinite())
    }
}

pub fn predict_classification(
    cm: &ConformityMeasure,
    table: &CalibrationTable,
    x: &[f64],
    label_space: &[usize],
) -> Result<PredictionOutput> {
    if !cm.task().is_classification() {
        return Err(Error::Task(
            "predict_classification needs a classification measure".into(),
        ));
    }
    if label_space.is_empty() {
        return Err(Error::EmptyInput("label space is empty".into()));
    }
    let t = threshold(table);
    let mut set = Vec::new();
    for &y in label_space {
        if t.admits(cm.score(x, &Label::Class(y))?) {
            set.push(y);
        }
    }
    Ok(PredictionOutput::LabelSet(set))
}

fn interval(center: f64, log_scale: f64, t: Threshold) -> PredictionOutput {
    match t {
        Threshold::NegInfinity => PredictionOutput::Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        },
        Threshold::Value(t) => {
            let h = (log_scale - t).exp();
            PredictionOutput::Interval {
                lo: center - h,
                hi: center + h,
            }
        }
    }
}

/// `[ŷ − h, ŷ + h]` with `h = σ̂′(x)·exp(−t)`.
///
/// Matches `score(x, y) ≥ t` exactly whenever `h` exceeds the residual
/// floor.
pub fn predict_interval(cm: &ConformityMeasure, table: &CalibrationTable, x: &[f64]) -> Result<PredictionOutput> {
    if cm.task() != Task::Regression {
        return Err(Error::Task("predict_interval needs a regression measure".into()));
    }
    Ok(interval(cm.point(x)?, cm.log_scale(x)?, threshold(table)))
}

/// Prediction outputs for every row of a score sheet.
pub fn sheet_outputs(sheet: &ScoreSheet, t: Threshold) -> Vec<PredictionOutput> {
    match &sheet.candidates {
        Candidates::Interval { centers, log_scales } => centers
            .iter()
            .zip(log_scales)
            .map(|(&c, &l)| interval(c, l, t))
            .collect(),
        Candidates::Labels { scores } => scores
            .iter()
            .map(|row| {
                PredictionOutput::LabelSet(
                    row.iter()
                        .enumerate()
                        .filter(|(_, &s)| t.admits(s))
                        .map(|(y, _)| y)
                        .collect(),
                )
            })
            .collect(),
    }
}

/// Whether each row's true label is in its prediction set.
pub fn sheet_flags(sheet: &ScoreSheet, t: Threshold) -> Vec<bool> {
    sheet.true_scores.iter().map(|&s| t.admits(s)).collect()
}

/// Per-row prediction set size (cardinality or width).
pub fn sheet_sizes(sheet: &ScoreSheet, t: Threshold) -> Vec<f64> {
    match (&sheet.candidates, t) {
        (Candidates::Interval { log_scales, .. }, Threshold::NegInfinity) => vec![f64::INFINITY; log_scales.len()],
        (Candidates::Interval { log_scales, .. }, Threshold::Value(t)) => {
            log_scales.iter().map(|&l| 2.0 * (l - t).exp()).collect()
        }
        (Candidates::Labels { scores }, t) => scores
            .iter()
            .map(|row| row.iter().filter(|&&s| t.admits(s)).count() as f64)
            .collect(),
    }
}

/// Membership of each example's true label in its prediction output.
pub fn correctness_flags(cm: &ConformityMeasure, table: &CalibrationTable, eval: &Dataset) -> Result<Vec<bool>> {
    let sheet = cm.sheet(eval)?;
    Ok(sheet_flags(&sheet, threshold(table)))
}

/// Writes one row per output: a semicolon-joined `labels` column for
/// classification (names when given), `lo,hi` columns for regression.
pub fn write_outputs(outputs: &[PredictionOutput], label_names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::new();
    match outputs.first() {
        Some(PredictionOutput::LabelSet(_)) | None => s.push_str("labels\n"),
        Some(PredictionOutput::Interval { .. }) => s.push_str("lo,hi\n"),
    }
    for o in outputs {
        match o {
            PredictionOutput::LabelSet(set) => {
                let names: Vec<String> = set
                    .iter()
                    .map(|&y| label_names.get(y).cloned().unwrap_or_else(|| y.to_string()))
                    .collect();
                let _ = writeln!(s, "{}", names.join(";"));
            }
            PredictionOutput::Interval { lo, hi } => {
                let _ = writeln!(s, "{lo},{hi}");
            }
        }
    }
    fs::write(path, s)?;
    Ok(())
}
