//! Inductive conformal prediction with iterative feedback-adjusted
//! conformity measures (IFACM).
//!
//! A base conformity measure (standard or normalized regression residual, or
//! a softmax scoring model for classification) is refined layer by layer:
//! each layer nudges scores by `±γ` wherever a logistic estimate of the
//! conditional coverage falls outside `(1−ε) ± δ`. Layers are fitted on the
//! training data only, so an independently calibrated ICP on top stays
//! marginally valid.
//!
//! ```no_run
//! use ifacm::conformity::{fit_base_cm, BaseKind};
//! use ifacm::dataset::gen_example2;
//! use ifacm::ifacm::{run_ifacm, IfacmConfig};
//!
//! let train = gen_example2(5000, 1).unwrap();
//! let base = fit_base_cm(BaseKind::Standard, &train).unwrap();
//! let result = run_ifacm(&base, &train, &IfacmConfig::new(0.1, 0.5)).unwrap();
//! println!("{} layers", result.n_accepted());
//! ```

pub mod conformity;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod icp;
pub mod ifacm;
pub mod linmodel;
pub mod metrics;
pub mod optimizer;
pub mod par;
pub mod properties;

pub use error::{Error, Result};
