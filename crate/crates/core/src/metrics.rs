//! Accuracy, inefficiency, deviation from conditional validity (DCV), the
//! penalized IFACM objective, and segment diagnostics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::icp::PredictionOutput;
use crate::linmodel::{fit_logit, LabeledBinarySet, LogitModel};

/// Ridge applied to the correctness estimator by default.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Mean set cardinality or mean interval width.
pub fn inefficiency(outputs: &[PredictionOutput]) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::EmptyInput("inefficiency of no outputs".into()));
    }
    let sets = outputs
        .iter()
        .filter(|o| matches!(o, PredictionOutput::LabelSet(_)))
        .count();
    if sets != 0 && sets != outputs.len() {
        return Err(Error::Task("mixed classification and regression outputs".into()));
    }
    if outputs.iter().any(PredictionOutput::is_full_line) {
        return Err(Error::Config(
            "prediction interval is the whole line: calibration set too small for this significance".into(),
        ));
    }
    Ok(outputs.iter().map(PredictionOutput::size).sum::<f64>() / outputs.len() as f64)
}

/// `sqrt(mean((p_j − confidence)²))`.
pub fn dcv_from_probs(probs: &[f64], confidence: f64) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let ms = probs.iter().map(|p| (p - confidence).powi(2)).sum::<f64>() / probs.len() as f64;
    ms.sqrt()
}

/// Fits a logistic correctness estimator on `(objects, flags)` and returns
/// the DCV of its fitted probabilities relative to `1 − epsilon`, together
/// with the estimator.
///
/// A separation failure at `ridge == 0` (all flags equal) is retried with
/// [`DEFAULT_RIDGE`].
pub fn dcv(objects: &[&[f64]], flags: &[bool], epsilon: f64, ridge: f64) -> Result<(f64, LogitModel)> {
    if objects.is_empty() {
        return Err(Error::EmptyInput("dcv of an empty set".into()));
    }
    let data = LabeledBinarySet::new(objects.to_vec(), flags.to_vec())?;
    let est = match fit_logit(&data, ridge) {
        Err(Error::Separation) => fit_logit(&data, DEFAULT_RIDGE)?,
        other => other?,
    };
    let probs: Vec<f64> = crate::par::map(objects, |x| est.predict_prob(x).unwrap_or(f64::NAN));
    Ok((dcv_from_probs(&probs, 1.0 - epsilon), est))
}

/// `dcv + C·(ineff − ineff_base)` when `ineff > ineff_base`, else `dcv`.
pub fn objective(dcv_val: f64, ineff_val: f64, ineff_base: f64, c: f64) -> f64 {
    if ineff_val > ineff_base {
        dcv_val + c * (ineff_val - ineff_base)
    } else {
        dcv_val
    }
}

/// A subpopulation selected by a feature condition.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentRule {
    /// `feature == value` (within 1e−9).
    Equals { feature: String, value: f64 },
    /// Expands into `feature < median` and `feature ≥ median`, the median
    /// taken over the evaluated objects.
    Median { feature: String },
}

impl SegmentRule {
    /// Parses `name=value` or `median(name)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix("median(").and_then(|r| r.strip_suffix(')')) {
            return Ok(SegmentRule::Median {
                feature: inner.trim().to_string(),
            });
        }
        let (f, v) = s
            .rsplit_once('=')
            .ok_or_else(|| Error::Config(format!("bad segment rule '{s}'")))?;
        let value = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad segment value in '{s}'")))?;
        Ok(SegmentRule::Equals {
            feature: f.trim().to_string(),
            value,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentAccuracy {
    pub feature: String,
    /// `"= 2"`, `"< median"`, `">= median"`.
    pub condition: String,
    pub n: usize,
    /// NaN for an empty segment.
    pub accuracy: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn segment_accuracy(
    objects: &[&[f64]],
    flags: &[bool],
    feature_names: &[String],
    rules: &[SegmentRule],
) -> Result<Vec<SegmentAccuracy>> {
    if objects.len() != flags.len() {
        return Err(Error::Dimension {
            expected: objects.len(),
            got: flags.len(),
        });
    }
    let index = |name: &str| {
        feature_names
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::Config(format!("segment rule names unknown feature '{name}'")))
    };
    let summarize = |feature: &str, condition: String, keep: &dyn Fn(f64) -> bool, j: usize| {
        let mut n = 0;
        let mut hit = 0;
        for (x, &f) in objects.iter().zip(flags) {
            if keep(x[j]) {
                n += 1;
                hit += usize::from(f);
            }
        }
        SegmentAccuracy {
            feature: feature.to_string(),
            condition,
            n,
            accuracy: if n == 0 { f64::NAN } else { hit as f64 / n as f64 },
        }
    };
    let mut out = Vec::new();
    for rule in rules {
        match rule {
            SegmentRule::Equals { feature, value } => {
                let j = index(feature)?;
                let v = *value;
                out.push(summarize(feature, format!("= {v}"), &|x| (x - v).abs() <= 1e-9, j));
            }
            SegmentRule::Median { feature } => {
                let j = index(feature)?;
                let med = median(objects.iter().map(|x| x[j]).collect());
                out.push(summarize(feature, "< median".into(), &|x| x < med, j));
                out.push(summarize(feature, ">= median".into(), &|x| x >= med, j));
            }
        }
    }
    Ok(out)
}

/// Accuracy, inefficiency and DCV of one ICP run on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub inefficiency: f64,
    pub dcv: f64,
    pub n: usize,
    pub per_segment: Vec<SegmentAccuracy>,
    /// The correctness estimator behind `dcv`.
    pub estimator: LogitModel,
}

/// One line of a results table.
#[derive(Debug, Clone)]
pub struct ReportRow<'a> {
    /// `training` or `test`.
    pub segment: &'a str,
    /// `Base ICP` or `IFACM`.
    pub algorithm: &'a str,
    pub confidence: f64,
    pub c: f64,
    pub report: &'a EvaluationReport,
}

/// CSV columns: `segment,algorithm,cl,C,acc,ineff,dcv,n`.
pub fn reports_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from("segment,algorithm,cl,C,acc,ineff,dcv,n\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.segment,
            r.algorithm,
            r.confidence,
            r.c,
            r.report.accuracy,
            r.report.inefficiency,
            r.report.dcv,
            r.report.n
        );
    }
    s
}

/// Aligned plain-text table in the same column order.
pub fn reports_text(rows: &[ReportRow]) -> String {
    let mut s = format!(
        "{:<10} {:<10} {:>6} {:>6} {:>7} {:>9} {:>9}\n",
        "Segment", "Algorithm", "CL", "C", "Acc.", "Ineff.", "DCV"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<10} {:<10} {:>6} {:>6} {:>7.3} {:>9.4} {:>9.5}",
            r.segment, r.algorithm, r.confidence, r.c, r.report.accuracy, r.report.inefficiency, r.report.dcv
        );
    }
    s
}

pub fn write_reports(rows: &[ReportRow], csv_path: impl AsRef<Path>) -> Result<()> {
    fs::write(csv_path, reports_csv(rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inefficiency_examples() {
        let iv = [
            PredictionOutput::Interval { lo: 230.0, hi: 534.0 },
            PredictionOutput::Interval { lo: 240.0, hi: 350.0 },
        ];
        assert_eq!(inefficiency(&iv).unwrap(), 207.0);
        let singles = vec![PredictionOutput::LabelSet(vec![2]); 4];
        assert_eq!(inefficiency(&singles).unwrap(), 1.0);
        let sets = [
            PredictionOutput::LabelSet(vec![0]),
            PredictionOutput::LabelSet(vec![0, 1]),
            PredictionOutput::LabelSet(vec![0, 1, 2]),
        ];
        assert_eq!(inefficiency(&sets).unwrap(), 2.0);
        assert!(inefficiency(&[]).is_err());
        assert!(inefficiency(&[sets[0].clone(), iv[0].clone()]).is_err());
        let full = PredictionOutput::Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        };
        assert!(matches!(inefficiency(&[full]), Err(Error::Config(_))));
    }

    #[test]
    fn dcv_arithmetic() {
        assert!((dcv_from_probs(&[0.8, 1.0], 0.9) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn dcv_of_saturated_two_group_fit() {
        // Group a: 4 of 5 correct; group b: all correct → fitted p = {0.8, ≈1}.
        let a = [0.0];
        let b = [1.0];
        let mut objects: Vec<&[f64]> = vec![&a; 5];
        objects.extend(vec![&b as &[f64]; 5]);
        let flags = [true, true, true, true, false, true, true, true, true, true];
        let (d, est) = dcv(&objects, &flags, 0.1, DEFAULT_RIDGE).unwrap();
        assert!((est.predict_prob(&a).unwrap() - 0.8).abs() < 1e-4);
        assert!((d - 0.1).abs() < 1e-4, "{d}");
    }

    #[test]
    fn dcv_all_correct_is_epsilon() {
        let xs: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 10.0]).collect();
        let objects: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let (d, _) = dcv(&objects, &[true; 50], 0.1, 0.0).unwrap();
        assert!((d - 0.1).abs() < 1e-9);
    }

    #[test]
    fn objective_cases() {
        assert_eq!(objective(0.05, 2.0, 2.2, 0.5), 0.05);
        assert!((objective(0.05, 2.3, 2.2, 0.5) - 0.10).abs() < 1e-12);
        assert_eq!(objective(0.05, 9.0, 2.2, 0.0), 0.05);
    }

    #[test]
    fn segments() {
        let xs: Vec<Vec<f64>> = vec![vec![1.0], vec![1.0], vec![2.0], vec![2.0]];
        let objects: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let flags = [true, true, false, false];
        let names = vec!["x".to_string()];
        let rules = [
            SegmentRule::parse("x=1").unwrap(),
            SegmentRule::parse("x = 2").unwrap(),
            SegmentRule::parse("median(x)").unwrap(),
        ];
        let seg = segment_accuracy(&objects, &flags, &names, &rules).unwrap();
        assert_eq!(seg[0].accuracy, 1.0);
        assert_eq!(seg[1].accuracy, 0.0);
        assert_eq!(seg[2].n + seg[3].n, 4);
        assert!(segment_accuracy(&objects, &flags, &names, &[SegmentRule::parse("z=1").unwrap()]).is_err());
        assert!(SegmentRule::parse("nonsense").is_err());
    }

    #[test]
    fn segment_covering_everything_matches_overall() {
        let xs: Vec<Vec<f64>> = (0..10).map(|_| vec![3.0]).collect();
        let objects: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let flags: Vec<bool> = (0..10).map(|i| i % 3 != 0).collect();
        let seg = segment_accuracy(&objects, &flags, &["x".into()], &[SegmentRule::parse("x=3").unwrap()]).unwrap();
        assert_eq!(seg[0].accuracy, 0.6);
        assert_eq!(seg[0].n, 10);
    }
}
