//! Conformity measures: standard and normalized regression measures, the
//! multinomial scoring measure, and stacks of feedback adjustment layers.
//!
//! A measure with layers scores an example as
//! `base(x, y) + Σ_i γ_i · U*_i(x)`, where each `U*_i ∈ {−1, 0, +1}` comes
//! from a frozen correctness estimator (see [`AdjustmentLayer`]).
//!
//! Text stack format (one item per line):
//!
//! ```text
//! conformity-measure 1
//! base standard|normalized|scoring
//! <ols model>                 point model (standard, normalized)
//! <ols model>                 scale model (normalized only)
//! <softmax model>             (scoring only)
//! layers <count>
//! layer <gamma> <delta> <confidence>
//! <logit model>
//! ...
//! ```

use crate::dataset::{Dataset, Label, Task};
use crate::error::{Error, Result};
use crate::linmodel::{fit_ols, fit_softmax, next_line, parse_usize, LogitModel, OlsModel, SoftmaxModel};
use crate::par;

/// Absolute residuals are floored here before taking logs.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Ridge used by the scoring measure's softmax fit.
pub const SCORING_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    Standard,
    Normalized,
    Scoring,
}

impl BaseKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "standard" => Some(Self::Standard),
            "normalized" => Some(Self::Normalized),
            "scoring" => Some(Self::Scoring),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Normalized => "normalized",
            Self::Scoring => "scoring",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaseMeasure {
    /// `−log|y − ŷ|`.
    Standard { point: OlsModel },
    /// `log σ̂ − log|y − ŷ|`, with `log σ̂` from a regression on log absolute
    /// training residuals.
    Normalized { point: OlsModel, scale: OlsModel },
    /// `β_y · (1, x)`.
    Scoring { model: SoftmaxModel },
}

/// One accepted feedback iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustmentLayer {
    gamma: f64,
    delta: f64,
    estimator: LogitModel,
    confidence: f64,
}

impl AdjustmentLayer {
    pub fn new(gamma: f64, delta: f64, estimator: LogitModel, confidence: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "layer gamma must be positive, got {gamma}"
            )));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "layer delta must be non-negative, got {delta}"
            )));
        }
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "confidence must be in (0,1), got {confidence}"
            )));
        }
        Ok(Self {
            gamma,
            delta,
            estimator,
            confidence,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn estimator(&self) -> &LogitModel {
        &self.estimator
    }

    /// `U*(x)`: +1 below the band `(1−ε) ± δ`, −1 above it, 0 inside
    /// (boundaries included).
    pub fn update_step(&self, x: &[f64]) -> Result<i8> {
        let p = self.estimator.predict_prob(x)?;
        Ok(update_step_from_prob(p, self.confidence, self.delta))
    }
}

pub fn update_step_from_prob(p: f64, confidence: f64, delta: f64) -> i8 {
    if p < confidence - delta {
        1
    } else if p > confidence + delta {
        -1
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformityMeasure {
    base: BaseMeasure,
    layers: Vec<AdjustmentLayer>,
}

/// Scores of one dataset under a measure, laid out for threshold
/// evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSheet {
    /// Score of each example's true label.
    pub true_scores: Vec<f64>,
    pub candidates: Candidates,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Candidates {
    /// `score ≥ t ⟺ |y − center| ≤ exp(log_scale − t)`.
    Interval { centers: Vec<f64>, log_scales: Vec<f64> },
    /// Full score of every label, per example.
    Labels { scores: Vec<Vec<f64>> },
}

impl ScoreSheet {
    pub fn len(&self) -> usize {
        self.true_scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_scores.is_empty()
    }

    /// Adds a per-example offset to every score, as an extra layer would.
    pub fn shifted(&self, offsets: &[f64]) -> ScoreSheet {
        let add = |v: &[f64]| v.iter().zip(offsets).map(|(a, b)| a + b).collect::<Vec<_>>();
        ScoreSheet {
            true_scores: add(&self.true_scores),
            candidates: match &self.candidates {
                Candidates::Interval { centers, log_scales } => Candidates::Interval {
                    centers: centers.clone(),
                    log_scales: add(log_scales),
                },
                Candidates::Labels { scores } => Candidates::Labels {
                    scores: scores
                        .iter()
                        .zip(offsets)
                        .map(|(row, o)| row.iter().map(|s| s + o).collect())
                        .collect(),
                },
            },
        }
    }
}

fn floored_log_residual(y: f64, yhat: f64) -> f64 {
    (y - yhat).abs().max(RESIDUAL_FLOOR).ln()
}

fn real_label(label: &Label) -> Result<f64> {
    label
        .as_real()
        .ok_or_else(|| Error::Task("regression measure given a class label".into()))
}

impl ConformityMeasure {
    pub fn new(base: BaseMeasure) -> Self {
        Self {
            base,
            layers: Vec::new(),
        }
    }

    pub fn base(&self) -> &BaseMeasure {
        &self.base
    }

    pub fn layers(&self) -> &[AdjustmentLayer] {
        &self.layers
    }

    pub fn kind(&self) -> BaseKind {
        match self.base {
            BaseMeasure::Standard { .. } => BaseKind::Standard,
            BaseMeasure::Normalized { .. } => BaseKind::Normalized,
            BaseMeasure::Scoring { .. } => BaseKind::Scoring,
        }
    }

    pub fn task(&self) -> Task {
        match &self.base {
            BaseMeasure::Scoring { model } => Task::Classification(model.n_labels()),
            _ => Task::Regression,
        }
    }

    pub fn n_features(&self) -> usize {
        match &self.base {
            BaseMeasure::Standard { point } | BaseMeasure::Normalized { point, .. } => point.n_features(),
            BaseMeasure::Scoring { model } => model.n_features(),
        }
    }

    /// A new measure with `layer` appended.
    pub fn push_layer(&self, layer: AdjustmentLayer) -> ConformityMeasure {
        let mut out = self.clone();
        out.layers.push(layer);
        out
    }

    /// The measure without any layers.
    pub fn base_only(&self) -> ConformityMeasure {
        ConformityMeasure::new(self.base.clone())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `Σ γ_i U*_i(x)`.
    pub fn offset(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut s = 0.0;
        for l in &self.layers {
            s += l.gamma * f64::from(l.update_step(x)?);
        }
        Ok(s)
    }

    pub fn base_score(&self, x: &[f64], label: &Label) -> Result<f64> {
        self.check_dim(x)?;
        match &self.base {
            BaseMeasure::Standard { point } => Ok(-floored_log_residual(real_label(label)?, point.predict(x)?)),
            BaseMeasure::Normalized { point, scale } => {
                Ok(scale.predict(x)? - floored_log_residual(real_label(label)?, point.predict(x)?))
            }
            BaseMeasure::Scoring { model } => {
                let c = label
                    .as_class()
                    .ok_or_else(|| Error::Task("scoring measure given a real label".into()))?;
                model.score(x, c)
            }
        }
    }

    pub fn score(&self, x: &[f64], label: &Label) -> Result<f64> {
        Ok(self.base_score(x, label)? + self.offset(x)?)
    }

    /// Point prediction `ŷ` (regression bases only).
    pub fn point(&self, x: &[f64]) -> Result<f64> {
        match &self.base {
            BaseMeasure::Standard { point } | BaseMeasure::Normalized { point, .. } => point.predict(x),
            BaseMeasure::Scoring { .. } => Err(Error::Task("scoring measure has no point prediction".into())),
        }
    }

    /// `log σ̂′(x) = log σ̂(x) + Σ γ_i U*_i(x)`, with `σ̂ ≡ 1` for the standard
    /// measure (regression bases only).
    pub fn log_scale(&self, x: &[f64]) -> Result<f64> {
        let base = match &self.base {
            BaseMeasure::Standard { .. } => 0.0,
            BaseMeasure::Normalized { scale, .. } => scale.predict(x)?,
            BaseMeasure::Scoring { .. } => return Err(Error::Task("scoring measure has no scale".into())),
        };
        Ok(base + self.offset(x)?)
    }

    /// Scores every example of `data`. Examples are processed in parallel.
    pub fn sheet(&self, data: &Dataset) -> Result<ScoreSheet> {
        match (self.task(), data.task()) {
            (Task::Regression, Task::Regression) => {}
            (Task::Classification(a), Task::Classification(b)) if a == b => {}
            (a, b) => {
                return Err(Error::Task(format!(
                    "measure task {a:?} does not match dataset task {b:?}"
                )))
            }
        }
        let ex = data.examples();
        match &self.base {
            BaseMeasure::Scoring { model } => {
                let rows = par::map(ex, |e| -> Result<(f64, Vec<f64>)> {
                    let off = self.offset(&e.object)?;
                    let s: Vec<f64> = model.scores(&e.object)?.into_iter().map(|v| v + off).collect();
                    let c = e.label.as_class().unwrap_or(0);
                    Ok((s[c], s))
                });
                let mut true_scores = Vec::with_capacity(ex.len());
                let mut scores = Vec::with_capacity(ex.len());
                for r in rows {
                    let (t, s) = r?;
                    true_scores.push(t);
                    scores.push(s);
                }
                Ok(ScoreSheet {
                    true_scores,
                    candidates: Candidates::Labels { scores },
                })
            }
            _ => {
                let rows = par::map(ex, |e| -> Result<(f64, f64, f64)> {
                    let yhat = self.point(&e.object)?;
                    let ls = self.log_scale(&e.object)?;
                    let y = real_label(&e.label)?;
                    Ok((ls - floored_log_residual(y, yhat), yhat, ls))
                });
                let mut true_scores = Vec::with_capacity(ex.len());
                let mut centers = Vec::with_capacity(ex.len());
                let mut log_scales = Vec::with_capacity(ex.len());
                for r in rows {
                    let (t, c, l) = r?;
                    true_scores.push(t);
                    centers.push(c);
                    log_scales.push(l);
                }
                Ok(ScoreSheet {
                    true_scores,
                    candidates: Candidates::Interval { centers, log_scales },
                })
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("conformity-measure 1\n");
        s.push_str(&format!("base {}\n", self.kind().name()));
        match &self.base {
            BaseMeasure::Standard { point } => s.push_str(&point.to_text()),
            BaseMeasure::Normalized { point, scale } => {
                s.push_str(&point.to_text());
                s.push_str(&scale.to_text());
            }
            BaseMeasure::Scoring { model } => s.push_str(&model.to_text()),
        }
        s.push_str(&format!("layers {}\n", self.layers.len()));
        for l in &self.layers {
            s.push_str(&format!("layer {} {} {}\n", l.gamma, l.delta, l.confidence));
            s.push_str(&l.estimator.to_text());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = next_line(&mut lines, "measure header")?;
        if head != "conformity-measure 1" {
            return Err(Error::Format(format!("not a conformity measure file: '{head}'")));
        }
        let base_line = next_line(&mut lines, "base")?;
        let kind = base_line
            .strip_prefix("base ")
            .and_then(BaseKind::parse)
            .ok_or_else(|| Error::Format(format!("bad base line '{base_line}'")))?;
        let base = match kind {
            BaseKind::Standard => BaseMeasure::Standard {
                point: OlsModel::read_text(&mut lines)?,
            },
            BaseKind::Normalized => BaseMeasure::Normalized {
                point: OlsModel::read_text(&mut lines)?,
                scale: OlsModel::read_text(&mut lines)?,
            },
            BaseKind::Scoring => BaseMeasure::Scoring {
                model: SoftmaxModel::read_text(&mut lines)?,
            },
        };
        let lc = next_line(&mut lines, "layer count")?;
        let count = parse_usize(
            lc.strip_prefix("layers ")
                .ok_or_else(|| Error::Format(format!("bad layers line '{lc}'")))?,
        )?;
        let mut cm = ConformityMeasure::new(base);
        for _ in 0..count {
            let l = next_line(&mut lines, "layer")?;
            let f: Vec<f64> = l
                .strip_prefix("layer ")
                .ok_or_else(|| Error::Format(format!("bad layer line '{l}'")))?
                .split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Format(format!("bad layer value '{v}'")))
                })
                .collect::<Result<_>>()?;
            if f.len() != 3 {
                return Err(Error::Format(format!("layer line needs 3 values: '{l}'")));
            }
            let est = LogitModel::read_text(&mut lines)?;
            cm.layers.push(AdjustmentLayer::new(f[0], f[1], est, f[2])?);
        }
        Ok(cm)
    }
}

/// Fits a base measure (no layers) on training data.
pub fn fit_base_cm(kind: BaseKind, train: &Dataset) -> Result<ConformityMeasure> {
    let objects = train.objects();
    match (kind, train.task()) {
        (BaseKind::Standard | BaseKind::Normalized, Task::Regression) => {
            let y: Vec<f64> = train
                .examples()
                .iter()
                .map(|e| real_label(&e.label))
                .collect::<Result<_>>()?;
            let point = fit_ols(&objects, &y)?;
            if kind == BaseKind::Standard {
                return Ok(ConformityMeasure::new(BaseMeasure::Standard { point }));
            }
            let logres: Vec<f64> = objects
                .iter()
                .zip(&y)
                .map(|(x, &yi)| Ok(floored_log_residual(yi, point.predict(x)?)))
                .collect::<Result<_>>()?;
            let scale = fit_ols(&objects, &logres)?;
            Ok(ConformityMeasure::new(BaseMeasure::Normalized { point, scale }))
        }
        (BaseKind::Scoring, Task::Classification(k)) => {
            let labels: Vec<usize> = train
                .examples()
                .iter()
                .map(|e| e.label.as_class().unwrap_or(0))
                .collect();
            let model = fit_softmax(&objects, &labels, k, SCORING_RIDGE)?;
            Ok(ConformityMeasure::new(BaseMeasure::Scoring { model }))
        }
        (kind, task) => Err(Error::Task(format!(
            "{} measure cannot be fitted on a {:?} dataset",
            kind.name(),
            task
        ))),
    }
}
