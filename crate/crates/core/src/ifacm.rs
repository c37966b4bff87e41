//! DCV measurement with train as calibration set, the iterative
//! feedback-adjustment driver, and the final proper-ICP evaluation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::conformity::{update_step_from_prob, AdjustmentLayer, ConformityMeasure, ScoreSheet};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::icp::{calibrate, sheet_flags, sheet_outputs, sheet_sizes, threshold, CalibrationTable, Threshold};
use crate::linmodel::LogitModel;
use crate::metrics::{self, EvaluationReport, SegmentRule, DEFAULT_RIDGE};
use crate::optimizer::minimize;

/// Outcome of scoring a training set against itself.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub dcv: f64,
    /// Mean set cardinality or interval width.
    pub inefficiency: f64,
    pub accuracy: f64,
    pub estimator: LogitModel,
    pub flags: Vec<bool>,
}

/// Smallest calibration size whose threshold is not the full label space.
pub fn min_calibration_size(epsilon: f64) -> usize {
    let mut n = ((1.0 / epsilon).ceil() as usize).saturating_sub(2);
    while (epsilon * (n as f64 + 1.0)).floor() < 1.0 {
        n += 1;
    }
    n
}

fn measure_sheet(sheet: &ScoreSheet, objects: &[&[f64]], epsilon: f64, ridge: f64) -> Result<Measurement> {
    let table = CalibrationTable::from_scores(sheet.true_scores.clone(), epsilon)?;
    let t = threshold(&table);
    if t == Threshold::NegInfinity {
        return Err(Error::Config(format!(
            "{} training examples give a full-set threshold at significance {epsilon}; at least {} are needed",
            sheet.len(),
            min_calibration_size(epsilon)
        )));
    }
    let flags = sheet_flags(sheet, t);
    let sizes = sheet_sizes(sheet, t);
    let n = sheet.len() as f64;
    let inefficiency = sizes.iter().sum::<f64>() / n;
    let accuracy = flags.iter().filter(|&&f| f).count() as f64 / n;
    let (dcv, estimator) = metrics::dcv(objects, &flags, epsilon, ridge)?;
    Ok(Measurement {
        dcv,
        inefficiency,
        accuracy,
        estimator,
        flags,
    })
}

/// Calibrates on `train` itself, predicts every training example, fits the
/// correctness estimator and returns its DCV and the mean set size.
pub fn measure_dcv(cm: &ConformityMeasure, train: &Dataset, epsilon: f64, ridge: f64) -> Result<Measurement> {
    if train.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    measure_sheet(&cm.sheet(train)?, &train.objects(), epsilon, ridge)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IfacmConfig {
    /// Significance level ε.
    pub epsilon: f64,
    /// Inefficiency penalty weight.
    pub c: f64,
    pub ridge: f64,
    /// Objective evaluations per iteration.
    pub budget: usize,
    pub tol: f64,
    pub max_iters: usize,
    /// Starting `(log γ, log δ)`.
    pub start: [f64; 2],
}

impl IfacmConfig {
    pub fn new(epsilon: f64, c: f64) -> Self {
        Self {
            epsilon,
            c,
            ridge: DEFAULT_RIDGE,
            budget: 100,
            tol: 1e-4,
            max_iters: 25,
            start: [-5.0, -5.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!(
                "significance must be in (0,1), got {}",
                self.epsilon
            )));
        }
        if self.c.is_nan() || self.c < 0.0 {
            return Err(Error::Config(format!("C must be non-negative, got {}", self.c)));
        }
        if self.ridge.is_nan() || self.ridge < 0.0 || self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Config("ridge and tol must be non-negative".into()));
        }
        if self.budget < 3 {
            return Err(Error::Config("budget must be at least 3".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub index: usize,
    pub gamma: f64,
    pub delta: f64,
    pub dcv_before: f64,
    pub dcv_after: f64,
    pub inefficiency: f64,
    pub accepted: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct IfacmResult {
    /// Base measure plus every accepted layer.
    pub cm: ConformityMeasure,
    /// Training inefficiency of the base measure.
    pub w0: f64,
    /// Training DCV of the base measure.
    pub dcv0: f64,
    pub trace: Vec<IterationRecord>,
    /// `max_iters` was reached while layers were still being accepted.
    pub truncated: bool,
}

impl IfacmResult {
    /// Number of accepted layers.
    pub fn n_accepted(&self) -> usize {
        self.trace.iter().filter(|r| r.accepted).count()
    }
}

/// Scores of `sheet` after adding a layer `γ·U*(p_j, δ)`.
fn candidate_sheet(sheet: &ScoreSheet, probs: &[f64], confidence: f64, gamma: f64, delta: f64) -> ScoreSheet {
    let offsets: Vec<f64> = probs
        .iter()
        .map(|&p| gamma * f64::from(update_step_from_prob(p, confidence, delta)))
        .collect();
    sheet.shifted(&offsets)
}

/// Grows `base` one adjustment layer at a time while the training DCV keeps
/// falling.
///
/// Each iteration freezes the correctness estimator of the current measure,
/// searches `(log γ, log δ)` for the candidate layer minimizing
/// `DCV + C·max(W − W₀, 0)`, and keeps the layer only if its DCV beats the
/// current one.
pub fn run_ifacm(base: &ConformityMeasure, train: &Dataset, cfg: &IfacmConfig) -> Result<IfacmResult> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    let objects = train.objects();
    let confidence = 1.0 - cfg.epsilon;
    let mut cm = base.clone();
    let mut sheet = cm.sheet(train)?;
    let mut current = measure_sheet(&sheet, &objects, cfg.epsilon, cfg.ridge)?;
    let w0 = current.inefficiency;
    let dcv0 = current.dcv;
    let mut trace = Vec::new();
    let mut truncated = false;

    for index in 1..=cfg.max_iters {
        let estimator = current.estimator.clone();
        let probs: Vec<f64> = crate::par::map(&objects, |x| estimator.predict_prob(x).unwrap_or(f64::NAN));
        let evaluate = |ab: [f64; 2]| -> Result<Measurement> {
            let cand = candidate_sheet(&sheet, &probs, confidence, ab[0].exp(), ab[1].exp());
            measure_sheet(&cand, &objects, cfg.epsilon, cfg.ridge)
        };
        let found = minimize(
            |ab| match evaluate(ab) {
                Ok(m) => metrics::objective(m.dcv, m.inefficiency, w0, cfg.c),
                Err(_) => f64::INFINITY,
            },
            cfg.start,
            cfg.budget,
            cfg.tol,
        );
        let (gamma, delta) = (found.point[0].exp(), found.point[1].exp());
        let after = evaluate(found.point)?;
        let accepted = after.dcv < current.dcv;
        trace.push(IterationRecord {
            index,
            gamma,
            delta,
            dcv_before: current.dcv,
            dcv_after: after.dcv,
            inefficiency: after.inefficiency,
            accepted,
            evaluations: found.evaluations,
        });
        if !accepted {
            break;
        }
        cm = cm.push_layer(AdjustmentLayer::new(gamma, delta, estimator, confidence)?);
        sheet = candidate_sheet(&sheet, &probs, confidence, gamma, delta);
        current = after;
        if index == cfg.max_iters {
            truncated = true;
        }
    }

    Ok(IfacmResult {
        cm,
        w0,
        dcv0,
        trace,
        truncated,
    })
}

/// Reports for the final measure: the train-as-calibration run and a proper
/// ICP calibrated on `cal` and evaluated on `test`.
///
/// Segment rules are evaluated on `segment_view`, which must hold the same
/// rows as `test` (typically before standardization).
#[allow(clippy::too_many_arguments)]
pub fn evaluate_final(
    cm: &ConformityMeasure,
    train: &Dataset,
    cal: &Dataset,
    test: &Dataset,
    segment_view: &Dataset,
    epsilon: f64,
    ridge: f64,
    rules: &[SegmentRule],
) -> Result<(EvaluationReport, EvaluationReport)> {
    if segment_view.len() != test.len() {
        return Err(Error::Dimension {
            expected: test.len(),
            got: segment_view.len(),
        });
    }
    let m = measure_dcv(cm, train, epsilon, ridge)?;
    let train_report = EvaluationReport {
        accuracy: m.accuracy,
        inefficiency: m.inefficiency,
        dcv: m.dcv,
        n: train.len(),
        per_segment: Vec::new(),
        estimator: m.estimator,
    };

    let table = calibrate(cm, cal, epsilon)?;
    let t = threshold(&table);
    let sheet = cm.sheet(test)?;
    let outputs = sheet_outputs(&sheet, t);
    let flags = sheet_flags(&sheet, t);
    let inefficiency = metrics::inefficiency(&outputs)?;
    let (dcv, estimator) = metrics::dcv(&test.objects(), &flags, epsilon, ridge)?;
    let per_segment = metrics::segment_accuracy(&segment_view.objects(), &flags, segment_view.feature_names(), rules)?;
    let test_report = EvaluationReport {
        accuracy: flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64,
        inefficiency,
        dcv,
        n: test.len(),
        per_segment,
        estimator,
    };
    Ok((train_report, test_report))
}

/// CSV columns: `iteration,gamma,delta,dcv_before,dcv_after,ineff,accepted,evaluations,truncated`.
/// `truncated` is 1 only on the last row of a run stopped by `max_iters`.
pub fn trace_csv(result: &IfacmResult) -> String {
    let mut s = String::from("iteration,gamma,delta,dcv_before,dcv_after,ineff,accepted,evaluations,truncated\n");
    let last = result.trace.len().saturating_sub(1);
    for (i, r) in result.trace.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.index,
            r.gamma,
            r.delta,
            r.dcv_before,
            r.dcv_after,
            r.inefficiency,
            u8::from(r.accepted),
            r.evaluations,
            u8::from(result.truncated && i == last)
        );
    }
    s
}

pub fn write_trace(result: &IfacmResult, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, trace_csv(result))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformity::{fit_base_cm, BaseKind};
    use crate::dataset::{gen_example2, gen_heteroscedastic, NoiseLaw};

    #[test]
    fn min_size() {
        assert_eq!(min_calibration_size(0.1), 9);
        assert_eq!(min_calibration_size(0.5), 1);
        assert_eq!(min_calibration_size(0.3), 3);
        for eps in [0.01, 0.05, 0.2, 0.25, 0.33] {
            let n = min_calibration_size(eps);
            assert!((eps * (n as f64 + 1.0)).floor() >= 1.0);
            assert!((eps * n as f64).floor() < 1.0);
        }
    }

    #[test]
    fn tiny_training_set_is_a_config_error() {
        let train = gen_example2(5, 1).unwrap();
        let cm = fit_base_cm(BaseKind::Standard, &train).unwrap();
        match measure_dcv(&cm, &train, 0.1, DEFAULT_RIDGE) {
            Err(Error::Config(msg)) => assert!(msg.contains("at least 9")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn standard_measure_on_example2() {
        let train = gen_example2(5000, 3).unwrap();
        let cm = fit_base_cm(BaseKind::Standard, &train).unwrap();
        let m = measure_dcv(&cm, &train, 0.1, DEFAULT_RIDGE).unwrap();
        assert!(m.dcv >= 0.03, "{}", m.dcv);
        let sheet = cm.sheet(&train).unwrap();
        let table = CalibrationTable::from_scores(sheet.true_scores.clone(), 0.1).unwrap();
        let sizes = sheet_sizes(&sheet, threshold(&table));
        assert!(sizes.iter().all(|&s| s == sizes[0]));
    }

    #[test]
    fn homoscedastic_dcv_is_small() {
        let train = gen_heteroscedastic(10_000, 3, NoiseLaw::Constant, 5).unwrap();
        let cm = fit_base_cm(BaseKind::Normalized, &train).unwrap();
        let m = measure_dcv(&cm, &train, 0.1, DEFAULT_RIDGE).unwrap();
        assert!(m.dcv < 0.01, "{}", m.dcv);
    }

    #[test]
    fn example2_layers_reduce_training_dcv() {
        let train = gen_example2(5000, 11).unwrap();
        let cm = fit_base_cm(BaseKind::Standard, &train).unwrap();
        // Shifting a whole stratum moves the threshold with it, so the
        // objective is flat until γ ≈ 0.2; start within reach of that.
        let mut cfg = IfacmConfig::new(0.1, 0.5);
        cfg.start = [-1.0, -5.0];
        let res = run_ifacm(&cm, &train, &cfg).unwrap();
        assert_eq!(res.cm.layers().len(), res.n_accepted());
        let m = measure_dcv(&res.cm, &train, 0.1, DEFAULT_RIDGE).unwrap();
        assert!(m.dcv < 0.5 * res.dcv0, "{} vs {}", m.dcv, res.dcv0);
        let mut last = res.dcv0;
        for r in res.trace.iter().filter(|r| r.accepted) {
            assert!(r.gamma > 0.0 && r.delta >= 0.0);
            assert!(r.dcv_after < r.dcv_before && r.dcv_before == last);
            last = r.dcv_after;
        }
    }

    #[test]
    fn example2_default_start_sits_on_a_plateau() {
        let train = gen_example2(5000, 11).unwrap();
        let cm = fit_base_cm(BaseKind::Standard, &train).unwrap();
        let res = run_ifacm(&cm, &train, &IfacmConfig::new(0.1, 0.5)).unwrap();
        assert_eq!(res.n_accepted(), 0);
        assert_eq!(res.trace[0].evaluations, 3);
    }

    #[test]
    fn max_iters_truncates() {
        let train = gen_example2(2000, 12).unwrap();
        let cm = fit_base_cm(BaseKind::Standard, &train).unwrap();
        let mut cfg = IfacmConfig::new(0.1, 0.5);
        cfg.max_iters = 1;
        let res = run_ifacm(&cm, &train, &cfg).unwrap();
        assert_eq!(res.trace.len(), 1);
        assert_eq!(res.truncated, res.trace[0].accepted);
    }

    #[test]
    fn no_accepted_layer_returns_base() {
        let train = gen_heteroscedastic(3000, 2, NoiseLaw::Constant, 8).unwrap();
        let cm = fit_base_cm(BaseKind::Normalized, &train).unwrap();
        // Steps of e^-30 cannot move any flag, so the candidate ties DCV1.
        let mut cfg = IfacmConfig::new(0.1, 0.0);
        cfg.budget = 3;
        cfg.start = [-30.0, -30.0];
        let res = run_ifacm(&cm, &train, &cfg).unwrap();
        assert_eq!(res.n_accepted(), 0);
        assert_eq!(res.trace.len(), 1);
        assert_eq!(res.cm, cm);
    }

    #[test]
    fn trace_csv_shape() {
        let res = IfacmResult {
            cm: fit_base_cm(BaseKind::Standard, &gen_example2(50, 1).unwrap()).unwrap(),
            w0: 1.0,
            dcv0: 0.1,
            trace: vec![IterationRecord {
                index: 1,
                gamma: 0.5,
                delta: 0.01,
                dcv_before: 0.1,
                dcv_after: 0.05,
                inefficiency: 1.2,
                accepted: true,
                evaluations: 40,
            }],
            truncated: false,
        };
        let s = trace_csv(&res);
        assert_eq!(s.lines().nth(1).unwrap(), "1,0.5,0.01,0.1,0.05,1.2,1,40,0");
        let res = IfacmResult { truncated: true, ..res };
        assert_eq!(
            trace_csv(&res).lines().nth(1).unwrap(),
            "1,0.5,0.01,0.1,0.05,1.2,1,40,1"
        );
    }
}
