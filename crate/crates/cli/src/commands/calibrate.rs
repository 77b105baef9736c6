use confcal::{Calibrator, Role, ScoredSet};
use serde::Serialize;

use super::{fit, path_or, scored_ece, summary};
use crate::config::required;
use crate::error::CliResult;
use crate::report::{report, Inputs, Output};
use crate::CalibrateArgs;

/// One row of the before/after ECE table.
#[derive(Debug, Clone, Serialize)]
struct EceRow {
    split: &'static str,
    n: usize,
    before: f64,
    after: f64,
}

#[derive(Serialize)]
struct Body<'a> {
    calibrator: Option<&'a Calibrator>,
    ece: &'a [EceRow],
}

pub fn run(args: CalibrateArgs) -> CliResult<String> {
    let bins = required(&args.bins, "bins")?;
    let choice = required(&args.calibrator, "calibrator")?;
    let format = required(&args.format, "format")?;
    let mut inputs = Inputs::default();
    let val = inputs.load_set(&required(&args.val, "val")?, Role::Validation)?;
    let test = match &args.test {
        Some(path) => Some(inputs.load_set(path, Role::Test)?),
        None => None,
    };

    let calibrator = fit(choice, &val, bins)?;
    let mut rows = Vec::new();
    for (split, set) in [("val", Some(&val)), ("test", test.as_ref())] {
        let Some(set) = set else { continue };
        let before = ScoredSet::from_set(set, None)?;
        let after = ScoredSet::from_set(set, calibrator.as_ref())?;
        rows.push(EceRow {
            split,
            n: set.len(),
            before: scored_ece(&before, bins)?,
            after: scored_ece(&after, bins)?,
        });
    }

    let mut out = Output::create(&path_or(&args.out, "."))?;
    if let Some(cal) = &calibrator {
        out.write_json("calibrator.json", cal)?;
    }
    out.write_rows("ece", format, &rows)?;
    let body = Body {
        calibrator: calibrator.as_ref(),
        ece: &rows,
    };
    out.write_json("report.json", &report("calibrate", &args, &inputs, &body))?;

    let lines: Vec<String> = rows
        .iter()
        .map(|r| format!("{} ECE {:.4} -> {:.4}", r.split, r.before, r.after))
        .collect();
    Ok(summary(out.written(), &lines))
}
