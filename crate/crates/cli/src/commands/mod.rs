//! One module per subcommand. Each `run` takes fully resolved options and
//! returns the text printed on stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use confcal::calibrate::{accepts, fit_choice};
use confcal::{ece, equal_count_partition, CalibratorChoice, Calibrator, PredictionSet, ScoredSet};

use crate::error::{CliError, CliResult};

pub mod apgr;
pub mod calibrate;
pub mod cascade;
pub mod clean;
pub mod evaluate;
pub mod sweep;
pub mod synth;

/// Fits `choice` on `val`, refusing payload kinds the family cannot handle.
pub(crate) fn fit(choice: CalibratorChoice, val: &PredictionSet, bins: usize) -> CliResult<Option<Calibrator>> {
    if let Some(kind) = val.payload_kind() {
        if !accepts(choice, kind) {
            return Err(CliError::Contract(format!(
                "calibrator {choice} does not accept {kind} payloads"
            )));
        }
    }
    Ok(fit_choice(choice, val, bins)?)
}

/// Equal-count ECE of a scored set with `bins` bins fit on its own confidences.
pub(crate) fn scored_ece(set: &ScoredSet, bins: usize) -> CliResult<f64> {
    let conf = set.confidences();
    let partition = equal_count_partition(&conf, bins)?;
    Ok(ece(&conf, set.require_outcomes()?, &partition)?)
}

pub(crate) fn summary(written: &[PathBuf], extra: &[String]) -> String {
    let mut text = String::new();
    for line in extra {
        let _ = writeln!(text, "{line}");
    }
    for path in written {
        let _ = writeln!(text, "wrote {}", path.display());
    }
    text
}

pub(crate) fn path_or(value: &Option<PathBuf>, fallback: &str) -> PathBuf {
    value.clone().unwrap_or_else(|| Path::new(fallback).to_path_buf())
}
