//! Randomized checks of the update-function theory, the threshold closed
//! form and monotone-transform invariance.
//!
//! Scores in the threshold suites are multiples of 1/8 and `γ` a multiple of
//! 1/16, so every sum is exact in `f64` and the inequalities are checked
//! without tolerance.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::conformity::{fit_base_cm, update_step_from_prob, BaseKind, Candidates, ScoreSheet};
use crate::dataset::{Dataset, Example, Label, Task};
use crate::error::Error;
use crate::icp::{counting_member, sheet_outputs, threshold, threshold_gamma, CalibrationTable, Threshold};
use crate::linmodel::{fit_logit_with, mean_cond_logodds, LabeledBinarySet, LogitModel, LogitOptions};

/// Tolerance on the log-odds inequalities, which compare two numerically
/// fitted optima.
pub const LOGODDS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    /// Draws discarded before checking (separated or non-converged fits,
    /// empty flip sets).
    pub skipped: usize,
    /// Description of the first failing instance.
    pub first_failure: Option<String>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: 0,
            failed: 0,
            skipped: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0 && self.passed > 0
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<24} {} passed={} failed={} skipped={}",
            self.name,
            if self.ok() { "PASS" } else { "FAIL" },
            self.passed,
            self.failed,
            self.skipped
        )?;
        if let Some(d) = &self.first_failure {
            write!(f, " first failure: {d}")?;
        }
        Ok(())
    }
}

fn rng_for(seed: u64, suite: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ suite)
}

fn eighths(rng: &mut ChaCha8Rng, lo: i32, hi: i32) -> f64 {
    f64::from(rng.random_range(lo * 8..=hi * 8)) / 8.0
}

fn step(rng: &mut ChaCha8Rng) -> i8 {
    rng.random_range(-1i8..=1)
}

/// Significance drawn so that `⌊ε(k+1)⌋ ≥ 1`.
fn nondegenerate_epsilon(rng: &mut ChaCha8Rng, k: usize) -> f64 {
    let lo = 1.0 / (k as f64 + 1.0);
    lo + rng.random::<f64>() * (0.6 - lo).max(0.0)
}

/// For `β̂ = argmax(f+g)` and `α̂ = argmax f` on a finite set,
/// `g(β̂) ≥ g(α̂)`.
pub fn argmax_sum(seed: u64, instances: usize) -> SuiteResult {
    let mut rng = rng_for(seed, 1);
    let mut r = SuiteResult::new("argmax of sum");
    for _ in 0..instances {
        let size = rng.random_range(1..=30);
        let f: Vec<i64> = (0..size).map(|_| rng.random_range(-20..=20)).collect();
        let g: Vec<i64> = (0..size).map(|_| rng.random_range(-20..=20)).collect();
        let argmax = |v: &dyn Fn(usize) -> i64| (0..size).max_by_key(|&i| (v(i), std::cmp::Reverse(i))).unwrap();
        let a = argmax(&|i| f[i]);
        let b = argmax(&|i| f[i] + g[i]);
        r.record(g[b] >= g[a], || format!("f={f:?} g={g:?}"));
    }
    r
}

fn tight() -> LogitOptions {
    LogitOptions {
        ridge: 0.0,
        max_iter: 200,
        tol: 1e-10,
    }
}

/// Ridge-free fit, or `None` for separated or non-converged draws.
fn clean_fit(data: &LabeledBinarySet) -> Option<LogitModel> {
    match fit_logit_with(data, &tight()) {
        Ok(m) if m.converged() && m.coefficients().iter().all(|c| c.abs() < 25.0) => Some(m),
        Ok(_) | Err(Error::Separation) => None,
        Err(_) => None,
    }
}

fn random_objects(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rng.random_range(20..=60);
    let m = rng.random_range(1..=2);
    (0..n)
        .map(|_| (0..m).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

fn random_outcomes(rng: &mut ChaCha8Rng, objects: &[Vec<f64>]) -> Vec<bool> {
    let m = objects[0].len();
    let beta: Vec<f64> = (0..=m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    objects
        .iter()
        .map(|x| {
            let eta = beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
            rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())
        })
        .collect()
}

/// Refitting after flipping the outcomes of `S` does not lower the mean
/// conditional log-odds of the flipped outcomes over `S`.
pub fn flip_refit(seed: u64, instances: usize) -> SuiteResult {
    let mut rng = rng_for(seed, 2);
    let mut r = SuiteResult::new("flip refit");
    let mut attempts = 0;
    while r.passed + r.failed < instances && attempts < 50 * instances {
        attempts += 1;
        let objects = random_objects(&mut rng);
        let outcomes = random_outcomes(&mut rng, &objects);
        let flip: Vec<bool> = objects.iter().map(|_| rng.random_bool(0.2)).collect();
        let s: Vec<usize> = (0..objects.len()).filter(|&i| flip[i]).collect();
        if s.is_empty() {
            r.skipped += 1;
            continue;
        }
        let views: Vec<&[f64]> = objects.iter().map(Vec::as_slice).collect();
        let d = LabeledBinarySet::new(views.clone(), outcomes.clone()).expect("aligned");
        let flipped: Vec<bool> = outcomes.iter().zip(&flip).map(|(&c, &f)| c ^ f).collect();
        let d2 = d.with_outcomes(flipped).expect("aligned");
        let (Some(b1), Some(b2)) = (clean_fit(&d), clean_fit(&d2)) else {
            r.skipped += 1;
            continue;
        };
        let ds = d2.select(&s);
        let mu1 = mean_cond_logodds(&ds, b1.coefficients()).expect("non-empty");
        let mu2 = mean_cond_logodds(&ds, b2.coefficients()).expect("non-empty");
        r.record(mu2 >= mu1 - LOGODDS_TOL, || {
            format!("n={} |S|={} mu(b2)={mu2} mu(b1)={mu1}", objects.len(), s.len())
        });
    }
    r
}

struct ThresholdInstance {
    base: Vec<f64>,
    steps: Vec<i8>,
    epsilon: f64,
}

fn threshold_instance(rng: &mut ChaCha8Rng) -> ThresholdInstance {
    let k = rng.random_range(1..=40);
    ThresholdInstance {
        base: (0..k).map(|_| eighths(rng, -4, 4)).collect(),
        steps: (0..k).map(|_| step(rng)).collect(),
        epsilon: nondegenerate_epsilon(rng, k),
    }
}

fn gamma_draw(rng: &mut ChaCha8Rng) -> f64 {
    f64::from(rng.random_range(1..=64)) / 16.0
}

fn t_value(t: Threshold) -> f64 {
    match t {
        Threshold::Value(v) => v,
        Threshold::NegInfinity => unreachable!("ε(k+1) ≥ 1 by construction"),
    }
}

/// `t(0) − γ ≤ t(γ) ≤ t(0) + γ`.
pub fn threshold_shift(seed: u64, instances: usize) -> SuiteResult {
    let mut rng = rng_for(seed, 3);
    let mut r = SuiteResult::new("threshold shift");
    for _ in 0..instances {
        let inst = threshold_instance(&mut rng);
        let gamma = gamma_draw(&mut rng);
        let t0 = t_value(threshold_gamma(&inst.base, &inst.steps, 0.0, inst.epsilon).expect("valid"));
        let tg = t_value(threshold_gamma(&inst.base, &inst.steps, gamma, inst.epsilon).expect("valid"));
        r.record(t0 - gamma <= tg && tg <= t0 + gamma, || {
            format!(
                "base={:?} steps={:?} eps={} gamma={gamma}",
                inst.base, inst.steps, inst.epsilon
            )
        });
    }
    r
}

/// Train-as-calibration flags: wrong with a downward step stays wrong, right
/// with an upward step stays right, for every `γ > 0`.
pub fn flag_monotone(seed: u64, instances: usize) -> SuiteResult {
    let mut rng = rng_for(seed, 4);
    let mut r = SuiteResult::new("flag monotonicity");
    for _ in 0..instances {
        let inst = threshold_instance(&mut rng);
        let t0 = t_value(threshold_gamma(&inst.base, &inst.steps, 0.0, inst.epsilon).expect("valid"));
        let mut ok = true;
        let mut witness = 0.0;
        for _ in 0..8 {
            let gamma = gamma_draw(&mut rng);
            let tg = t_value(threshold_gamma(&inst.base, &inst.steps, gamma, inst.epsilon).expect("valid"));
            for (a, &u) in inst.base.iter().zip(&inst.steps) {
                let c0 = *a >= t0;
                let cg = a + gamma * f64::from(u) >= tg;
                if (!c0 && u == -1 && cg) || (c0 && u == 1 && !cg) {
                    ok = false;
                    witness = gamma;
                }
            }
        }
        r.record(ok, || {
            format!(
                "base={:?} steps={:?} eps={} gamma={witness}",
                inst.base, inst.steps, inst.epsilon
            )
        });
    }
    r
}

/// Over the examples whose train-as-calibration flag flips under
/// `A + γU*`, the refit estimator's mean log-odds of the new flags is at
/// least that of the base estimator.
pub fn flip_gain(seed: u64, instances: usize) -> SuiteResult {
    let mut rng = rng_for(seed, 5);
    let mut r = SuiteResult::new("flip gain");
    let mut attempts = 0;
    while r.passed + r.failed < instances && attempts < 50 * instances {
        attempts += 1;
        let objects = random_objects(&mut rng);
        let k = objects.len();
        let slope: f64 = rng.sample(StandardNormal);
        let base: Vec<f64> = objects
            .iter()
            .map(|x| slope * x[0] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let epsilon = 0.05 + 0.4 * rng.random::<f64>();
        let flags0 = match threshold_gamma(&base, &vec![0; k], 0.0, epsilon) {
            Ok(t) => base.iter().map(|&a| t.admits(a)).collect::<Vec<_>>(),
            Err(_) => unreachable!("valid instance"),
        };
        let views: Vec<&[f64]> = objects.iter().map(Vec::as_slice).collect();
        let d0 = LabeledBinarySet::new(views, flags0.clone()).expect("aligned");
        let Some(b0) = clean_fit(&d0) else {
            r.skipped += 1;
            continue;
        };
        let delta = 0.1 * rng.random::<f64>();
        let steps: Vec<i8> = objects
            .iter()
            .map(|x| update_step_from_prob(b0.predict_prob(x).expect("dims"), 1.0 - epsilon, delta))
            .collect();
        let gamma = 0.05 + rng.random::<f64>();
        let tg = threshold_gamma(&base, &steps, gamma, epsilon).expect("valid");
        let flags_g: Vec<bool> = base
            .iter()
            .zip(&steps)
            .map(|(a, &u)| tg.admits(a + gamma * f64::from(u)))
            .collect();
        let s: Vec<usize> = (0..k).filter(|&i| flags0[i] != flags_g[i]).collect();
        if s.is_empty() {
            r.skipped += 1;
            continue;
        }
        let dg = d0.with_outcomes(flags_g).expect("aligned");
        let Some(bg) = clean_fit(&dg) else {
            r.skipped += 1;
            continue;
        };
        let sg = dg.select(&s);
        let mu_g = mean_cond_logodds(&sg, bg.coefficients()).expect("non-empty");
        let mu_0 = mean_cond_logodds(&sg, b0.coefficients()).expect("non-empty");
        r.record(mu_g >= mu_0 - LOGODDS_TOL, || {
            format!("k={k} |S|={} gamma={gamma} mu(refit)={mu_g} mu(base)={mu_0}", s.len())
        });
    }
    r
}

/// The closed-form threshold agrees with direct counting for every
/// candidate, ties included.
pub fn threshold_oracle(seed: u64, instances: usize) -> SuiteResult {
    let mut rng = rng_for(seed, 6);
    let mut r = SuiteResult::new("threshold oracle");
    for _ in 0..instances {
        let n = rng.random_range(1..=30);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-5..=5))).collect();
        // Include exact boundary values of ε(n+1) now and then.
        let epsilon = if rng.random_bool(0.2) {
            f64::from(rng.random_range(1..=n)) / (n as f64 + 1.0)
        } else {
            rng.random_range(0.001..0.999)
        };
        let table = CalibrationTable::from_scores(scores.clone(), epsilon).expect("valid");
        let t = threshold(&table);
        let mut candidates: Vec<f64> = (-12..=12).map(|v| f64::from(v) / 2.0).collect();
        candidates.extend([f64::NEG_INFINITY, f64::INFINITY, -1e300, 1e300]);
        let bad = candidates
            .iter()
            .find(|&&c| t.admits(c) != counting_member(&scores, c, epsilon));
        r.record(bad.is_none(), || {
            format!("scores={scores:?} eps={epsilon} candidate={bad:?}")
        });
    }
    r
}

fn exp_sheet(sheet: &ScoreSheet) -> ScoreSheet {
    let f = |v: &[f64]| v.iter().map(|s| s.exp()).collect::<Vec<_>>();
    ScoreSheet {
        true_scores: f(&sheet.true_scores),
        candidates: match &sheet.candidates {
            Candidates::Labels { scores } => Candidates::Labels {
                scores: scores.iter().map(|row| f(row)).collect(),
            },
            Candidates::Interval { .. } => unreachable!("classification sheets only"),
        },
    }
}

fn random_classification(rng: &mut ChaCha8Rng, n: usize, labels: usize) -> Dataset {
    let examples = (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
            // The first `labels` rows cover every class.
            let c = if i < labels {
                i
            } else {
                let z = x[0] + 0.5 * rng.sample::<f64, _>(StandardNormal);
                ((z + 1.5).max(0.0) as usize).min(labels - 1)
            };
            Example::new(x, Label::Class(c))
        })
        .collect();
    Dataset::new(examples, Task::Classification(labels), vec!["a".into(), "b".into()]).expect("valid")
}

/// Replacing the scoring measure `A` by `exp(A)` leaves every prediction set
/// unchanged.
pub fn monotone_transform(seed: u64, instances: usize) -> SuiteResult {
    let mut rng = rng_for(seed, 7);
    let mut r = SuiteResult::new("monotone transform");
    for _ in 0..instances {
        let labels = rng.random_range(2..=4);
        let train = random_classification(&mut rng, 40, labels);
        let cal = random_classification(&mut rng, 20, labels);
        let test = random_classification(&mut rng, 20, labels);
        let epsilon = rng.random_range(0.05..0.5);
        let cm = fit_base_cm(BaseKind::Scoring, &train).expect("fit");
        let (cal_sheet, test_sheet) = (cm.sheet(&cal).expect("sheet"), cm.sheet(&test).expect("sheet"));
        let t = threshold(&CalibrationTable::from_scores(cal_sheet.true_scores.clone(), epsilon).expect("valid"));
        let te = threshold(&CalibrationTable::from_scores(exp_sheet(&cal_sheet).true_scores, epsilon).expect("valid"));
        let a = sheet_outputs(&test_sheet, t);
        let b = sheet_outputs(&exp_sheet(&test_sheet), te);
        r.record(a == b, || format!("labels={labels} eps={epsilon}"));
    }
    r
}

/// Per-suite instance counts used by [`run_all`] when no override is given.
pub const DEFAULT_INSTANCES: [(&str, usize); 7] = [
    ("argmax of sum", 200),
    ("flip refit", 200),
    ("threshold shift", 500),
    ("flag monotonicity", 500),
    ("flip gain", 200),
    ("threshold oracle", 1000),
    ("monotone transform", 100),
];

/// Runs every suite, each with its default count or `instances` when given.
pub fn run_all(seed: u64, instances: Option<usize>) -> Vec<SuiteResult> {
    let count = |i: usize| instances.unwrap_or(DEFAULT_INSTANCES[i].1);
    vec![
        argmax_sum(seed, count(0)),
        flip_refit(seed, count(1)),
        threshold_shift(seed, count(2)),
        flag_monotone(seed, count(3)),
        flip_gain(seed, count(4)),
        threshold_oracle(seed, count(5)),
        monotone_transform(seed, count(6)),
    ]
}
