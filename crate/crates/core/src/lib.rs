//! Decomposition of predictive power into standalone contributions, interaction surplus
//! and main-effect dependencies between two feature groups, estimated by refitting
//! boosted trees and groupwise additive models on held-out data.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`). The exact oracles in
//! [`synthetic`] also run over rationals. Aliases for the common `f64` instantiation live
//! at the crate root.

pub mod attribution;
pub mod data;
pub mod dip;
pub mod error;
pub mod forceplot;
pub mod learners;
pub mod report;
pub mod scalar;
pub mod synthetic;
pub mod valuation;

pub use attribution::{loco_dip, pairwise_dip, sage_dip, shapley_weight, LocoEntry, LocoReport, PairwiseCell, SageEntry, SageReport};
pub use data::{holdout_split, kfold_split, load_csv, load_csv_with_categorical, Dataset, FoldPlan, GroupSpec, SplitPlan};
pub use dip::{decompose, decompose_bundle, fit_bundle, DipResult, DipTerms, FitBundle};
pub use error::{DipError, ErrorClass, Result};
pub use forceplot::render_forceplot;
pub use learners::{fit_boosted, fit_constant, fit_ggam, fit_groupwise, LearnerConfig, Model};
pub use report::{verify_report, Report, ReportBody, Violation};
pub use scalar::Scalar;
pub use valuation::{value, Normalizer, ValueEstimate};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Model64 = Model<f64>;
pub type DipResult64 = DipResult<f64>;
pub type DipResult32 = DipResult<f32>;
pub type LocoReport64 = LocoReport<f64>;
pub type SageReport64 = SageReport<f64>;
/// Exact decomposition over 64-bit rationals.
pub type ExactOracle = synthetic::OracleDip<num_rational::Rational64>;
pub type Oracle64 = synthetic::OracleDip<f64>;
