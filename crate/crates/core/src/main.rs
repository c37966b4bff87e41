use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use ifacm::conformity::BaseKind;
use ifacm::dataset::NoiseLaw;
use ifacm::harness::{cmd_properties, cmd_run, cmd_synth, ExperimentConfig, Overrides, SynthKind};

#[derive(Parser)]
#[command(
    name = "ifacm",
    version,
    about = "Conformal prediction with feedback-adjusted conformity measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Base {
    Standard,
    Normalized,
    Scoring,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Example2,
    Heteroscedastic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Noise {
    Constant,
    Loglinear,
    Mixture,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        confidence: Option<f64>,
        /// Inefficiency penalty weight.
        #[arg(long = "C", value_name = "X")]
        c: Option<f64>,
        #[arg(long, value_enum)]
        base: Option<Base>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Evaluate the base measure only.
        #[arg(long)]
        skip_ifacm: bool,
    },
    /// Run the randomized property suites.
    Properties {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Instances per suite (defaults differ per suite).
        #[arg(long)]
        instances: Option<usize>,
    },
    /// Write a synthetic dataset to CSV.
    Synth {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, allow_negative_numbers = true)]
        n: i64,
        /// Feature count (heteroscedastic only).
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, value_enum, default_value = "mixture")]
        noise: Noise,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Run {
            config,
            seed,
            confidence,
            c,
            base,
            out,
            skip_ifacm,
        } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return e.exit_code();
                }
            };
            Overrides {
                seed,
                confidence,
                c,
                base: base.map(|b| match b {
                    Base::Standard => BaseKind::Standard,
                    Base::Normalized => BaseKind::Normalized,
                    Base::Scoring => BaseKind::Scoring,
                }),
                out,
                skip_ifacm,
            }
            .apply(&mut cfg);
            cmd_run(&cfg)
        }
        Command::Properties { seed, instances } => cmd_properties(seed, instances),
        Command::Synth {
            kind,
            n,
            m,
            noise,
            seed,
            out,
        } => {
            let kind = match kind {
                Kind::Example2 => SynthKind::Example2,
                Kind::Heteroscedastic => SynthKind::Heteroscedastic {
                    m,
                    law: match noise {
                        Noise::Constant => NoiseLaw::Constant,
                        Noise::Loglinear => NoiseLaw::LogLinear,
                        Noise::Mixture => NoiseLaw::ScaleMixture,
                    },
                },
            };
            cmd_synth(kind, n, seed, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(run(cli) as u8)
}
