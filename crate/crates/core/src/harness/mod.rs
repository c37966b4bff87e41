//! Experiment pipeline and the command implementations behind the CLI.

mod config;

pub use config::{DataSource, ExperimentConfig, Overrides};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::conformity::{fit_base_cm, ConformityMeasure};
use crate::dataset::{
    gen_example2, gen_heteroscedastic, load_csv, split_indices, standardize, write_csv, Dataset, NoiseLaw, SplitSpec,
};
use crate::error::{Error, Result};
use crate::icp::{calibrate, sheet_outputs, threshold, write_outputs, PredictionOutput};
use crate::ifacm::{evaluate_final, run_ifacm, write_trace, IfacmResult};
use crate::metrics::{reports_csv, reports_text, EvaluationReport, ReportRow};
use crate::properties;

pub const BASE_LABEL: &str = "Base ICP";
pub const IFACM_LABEL: &str = "IFACM";

/// Everything one experiment produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    pub base: ConformityMeasure,
    /// `(training, test)` reports of the base measure.
    pub base_reports: (EvaluationReport, EvaluationReport),
    /// Absent when IFACM is skipped.
    pub ifacm: Option<(IfacmResult, (EvaluationReport, EvaluationReport))>,
    /// Test-set prediction sets of the final measure.
    pub predictions: Vec<PredictionOutput>,
    /// Wall-clock time of fitting and evaluation.
    pub elapsed: Duration,
}

impl ExperimentOutcome {
    pub fn final_cm(&self) -> &ConformityMeasure {
        self.ifacm.as_ref().map_or(&self.base, |(r, _)| &r.cm)
    }

    /// Report rows in table order: training then test, base before IFACM.
    pub fn rows(&self, cfg: &ExperimentConfig) -> Vec<ReportRow<'_>> {
        let mut rows = Vec::new();
        fn pick(r: &(EvaluationReport, EvaluationReport), test: bool) -> &EvaluationReport {
            if test {
                &r.1
            } else {
                &r.0
            }
        }
        for (segment, test) in [("training", false), ("test", true)] {
            rows.push(ReportRow {
                segment,
                algorithm: BASE_LABEL,
                confidence: cfg.confidence,
                c: cfg.c,
                report: pick(&self.base_reports, test),
            });
            if let Some((_, reports)) = &self.ifacm {
                rows.push(ReportRow {
                    segment,
                    algorithm: IFACM_LABEL,
                    confidence: cfg.confidence,
                    c: cfg.c,
                    report: pick(reports, test),
                });
            }
        }
        rows
    }
}

fn split_seed(seed: u64) -> u64 {
    seed ^ 0xD1B5_4A32_D192_ED03
}

/// Raw data as configured.
pub fn load_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.source {
        DataSource::Example2 { n } => gen_example2(*n, cfg.seed),
        DataSource::Heteroscedastic { n, m, law } => gen_heteroscedastic(*n, *m, *law, cfg.seed),
        DataSource::Csv { path, schema } => load_csv(path, schema),
    }
}

/// Load or generate, standardize on the training rows, split, fit the base
/// measure, run IFACM and evaluate both measures.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let raw = load_data(cfg)?;
    let spec = SplitSpec {
        train: cfg.split[0],
        cal: cfg.split[1],
        test: cfg.split[2],
        seed: split_seed(cfg.seed),
        shuffle: cfg.shuffle,
    };
    let [tr, ca, te] = split_indices(raw.len(), &spec).map_err(|e| Error::Config(e.to_string()))?;
    let std = standardize(&raw, &tr)?;
    let (train, cal, test) = (std.subset(&tr), std.subset(&ca), std.subset(&te));
    let raw_test = raw.subset(&te);
    let epsilon = cfg.epsilon();

    let clock = Instant::now();
    let base = fit_base_cm(cfg.base, &train)?;
    let base_reports = evaluate_final(&base, &train, &cal, &test, &raw_test, epsilon, cfg.ridge, &cfg.segments)?;
    let ifacm = if cfg.skip_ifacm {
        None
    } else {
        let result = run_ifacm(&base, &train, &cfg.ifacm())?;
        let reports = evaluate_final(
            &result.cm,
            &train,
            &cal,
            &test,
            &raw_test,
            epsilon,
            cfg.ridge,
            &cfg.segments,
        )?;
        Some((result, reports))
    };

    let final_cm = ifacm.as_ref().map_or(&base, |(r, _)| &r.cm);
    let t = threshold(&calibrate(final_cm, &cal, epsilon)?);
    let predictions = sheet_outputs(&final_cm.sheet(&test)?, t);
    Ok(ExperimentOutcome {
        feature_names: raw.feature_names().to_vec(),
        label_names: raw.label_names().to_vec(),
        base,
        base_reports,
        ifacm,
        predictions,
        elapsed: clock.elapsed(),
    })
}

fn segments_csv(outcome: &ExperimentOutcome) -> String {
    let mut s = String::from("algorithm,feature,condition,n,acc\n");
    let mut emit = |alg: &str, r: &EvaluationReport| {
        for seg in &r.per_segment {
            let _ = writeln!(s, "{alg},{},{},{},{}", seg.feature, seg.condition, seg.n, seg.accuracy);
        }
    };
    emit(BASE_LABEL, &outcome.base_reports.1);
    if let Some((_, r)) = &outcome.ifacm {
        emit(IFACM_LABEL, &r.1);
    }
    s
}

/// Correctness-estimator coefficients per feature (intercept omitted).
fn coefficients_csv(outcome: &ExperimentOutcome, cfg: &ExperimentConfig) -> String {
    let mut s = String::from("segment,algorithm,feature,coefficient\n");
    for row in outcome.rows(cfg) {
        for (name, c) in outcome
            .feature_names
            .iter()
            .zip(&row.report.estimator.coefficients()[1..])
        {
            let _ = writeln!(s, "{},{},{name},{c}", row.segment, row.algorithm);
        }
    }
    s
}

/// Files written by [`write_outcome`].
pub const OUTPUT_FILES: [&str; 7] = [
    "report.csv",
    "report.txt",
    "trace.csv",
    "segments.csv",
    "coefficients.csv",
    "cm.txt",
    "predictions.csv",
];

/// Writes the report, trace (IFACM runs only), segment, coefficient,
/// measure and prediction files into `cfg.out`.
pub fn write_outcome(outcome: &ExperimentOutcome, cfg: &ExperimentConfig) -> Result<()> {
    let dir = &cfg.out;
    fs::create_dir_all(dir)?;
    let rows = outcome.rows(cfg);
    fs::write(dir.join("report.csv"), reports_csv(&rows))?;
    fs::write(dir.join("report.txt"), reports_text(&rows))?;
    if let Some((result, _)) = &outcome.ifacm {
        write_trace(result, dir.join("trace.csv"))?;
    }
    if !cfg.segments.is_empty() {
        fs::write(dir.join("segments.csv"), segments_csv(outcome))?;
    }
    fs::write(dir.join("coefficients.csv"), coefficients_csv(outcome, cfg))?;
    fs::write(dir.join("cm.txt"), outcome.final_cm().to_text())?;
    write_outputs(&outcome.predictions, &outcome.label_names, dir.join("predictions.csv"))?;
    Ok(())
}

fn report_error(e: &Error) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

/// `run`: exit 0 on success, 1 on configuration errors, 2 on data errors.
pub fn cmd_run(cfg: &ExperimentConfig) -> i32 {
    let outcome = match run_experiment(cfg).and_then(|o| write_outcome(&o, cfg).map(|_| o)) {
        Ok(o) => o,
        Err(e) => return report_error(&e),
    };
    // Timing goes to stderr so that output files stay byte-identical.
    eprintln!("ifacm: fit and evaluation took {:.2} s", outcome.elapsed.as_secs_f64());
    print!("{}", reports_text(&outcome.rows(cfg)));
    if let Some((r, _)) = &outcome.ifacm {
        println!(
            "accepted layers: {}{}",
            r.n_accepted(),
            if r.truncated { " (max_iters reached)" } else { "" }
        );
    }
    0
}

/// `properties`: exit 0 when every suite passes, 3 otherwise.
pub fn cmd_properties(seed: u64, instances: Option<usize>) -> i32 {
    if instances == Some(0) {
        eprintln!("error: instances must be at least 1");
        return 1;
    }
    let clock = Instant::now();
    let results = properties::run_all(seed, instances);
    let mut ok = true;
    for r in &results {
        println!("{r}");
        ok &= r.ok();
    }
    eprintln!("ifacm: property suites took {:.2} s", clock.elapsed().as_secs_f64());
    if ok {
        0
    } else {
        3
    }
}

/// Synthetic dataset families for `synth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthKind {
    Example2,
    Heteroscedastic { m: usize, law: NoiseLaw },
}

pub fn synth(kind: SynthKind, n: i64, seed: u64, out: &Path) -> Result<()> {
    let n = usize::try_from(n)
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("n must be a positive row count, got {n}")))?;
    let data = match kind {
        SynthKind::Example2 => gen_example2(n, seed),
        SynthKind::Heteroscedastic { m, law } => gen_heteroscedastic(n, m, law, seed),
    }
    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_csv(&data, out)
}

/// `synth`: exit 0 on success, 1 on bad parameters.
pub fn cmd_synth(kind: SynthKind, n: i64, seed: u64, out: &Path) -> i32 {
    match synth(kind, n, seed, out) {
        Ok(()) => 0,
        Err(e) => report_error(&e),
    }
}
