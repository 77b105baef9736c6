//! Training-free confidence tooling over exported prediction logs.
//!
//! * [`prediction`] loads per-sample model outputs (class logits, chosen-token
//!   logits or scalar confidences) and derives verifier outcomes.
//! * [`binning`] provides equal-count binning, reliability tables and ECE.
//! * [`calibrate`] fits temperature scaling, Platt scaling and histogram binning.
//! * [`cascade`] routes between a base and an escalation model by calibrated
//!   per-bin confidence advantage and scores the trade-off with APGR.
//! * [`cleaning`] flags likely mislabeled samples from model ensembles.
//! * [`synth`] generates seeded prediction sets with known ground truth.

pub mod binning;
pub mod calibrate;
pub mod cascade;
pub mod cleaning;
mod error;
pub mod numeric;
pub mod prediction;
pub mod scored;
pub mod synth;

pub use binning::{assign_bin, ece, equal_count_partition, reliability_stats, BinPartition, ReliabilityTable};
pub use calibrate::{CalibratedPrediction, Calibrator, CalibratorChoice, Mapping};
pub use cascade::{apgr, build_policy, simulate_cascade, CascadePolicy, Route, TradeoffCurve};
pub use cleaning::{CleaningMethod, CleaningReport, Ensemble, TruthFile, Verdict};
pub use error::{Error, ErrorKind, Result};
pub use prediction::{FileFormat, Payload, PayloadKind, PredictionRecord, PredictionSet, Role};
pub use scored::ScoredSet;
pub use synth::{SyntheticKind, SyntheticSpec};
