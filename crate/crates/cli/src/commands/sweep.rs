use std::collections::BTreeMap;

use confcal::cascade::{sweep_bins_and_calibrators, CascadeData, SweepRow};
use confcal::Role;
use serde::Serialize;

use super::{path_or, summary};
use crate::config::required;
use crate::error::{CliError, CliResult};
use crate::report::{report, Inputs, Output};
use crate::SweepArgs;

#[derive(Serialize)]
struct Body<'a> {
    rows: &'a [SweepRow],
    /// Max minus min APGR over bin counts, per calibrator.
    spread: BTreeMap<String, Option<f64>>,
}

pub fn run(args: SweepArgs) -> CliResult<String> {
    let bins = required(&args.bins, "bins")?;
    let choices = required(&args.calibrator, "calibrator")?;
    let format = required(&args.format, "format")?;
    if bins.is_empty() || choices.is_empty() {
        return Err(CliError::Contract("sweep needs at least one bin count and calibrator".into()));
    }
    let mut inputs = Inputs::default();
    let val_base = inputs.load_set(&required(&args.val_base, "val-base")?, Role::Validation)?;
    let val_esc = inputs.load_set(&required(&args.val_esc, "val-esc")?, Role::Validation)?;
    let test_base = inputs.load_set(&required(&args.test_base, "test-base")?, Role::Test)?;
    let test_esc = inputs.load_set(&required(&args.test_esc, "test-esc")?, Role::Test)?;
    for set in [&val_base, &val_esc] {
        if let Some(kind) = set.payload_kind() {
            if let Some(c) = choices.iter().find(|c| !confcal::calibrate::accepts(**c, kind)) {
                return Err(CliError::Contract(format!("calibrator {c} does not accept {kind} payloads")));
            }
        }
    }

    let data = CascadeData {
        val_base: &val_base,
        val_esc: &val_esc,
        test_base: &test_base,
        test_esc: &test_esc,
    };
    let rows = sweep_bins_and_calibrators(data, &bins, &choices)?;
    let mut spread = BTreeMap::new();
    for choice in &choices {
        let values: Option<Vec<f64>> = rows
            .iter()
            .filter(|r| r.calibrator == *choice)
            .map(|r| r.apgr)
            .collect();
        let value = values.map(|v| {
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            max - min
        });
        spread.insert(choice.to_string(), value);
    }

    let mut out = Output::create(&path_or(&args.out, "."))?;
    out.write_rows("sweep", format, &rows)?;
    let body = Body {
        rows: &rows,
        spread,
    };
    out.write_json("report.json", &report("sweep", &args, &inputs, &body))?;
    let lines: Vec<String> = rows
        .iter()
        .map(|r| match r.apgr {
            Some(v) => format!("{} N={} APGR {v:.4}", r.calibrator, r.bins),
            None => format!("{} N={} APGR undefined", r.calibrator, r.bins),
        })
        .collect();
    Ok(summary(out.written(), &lines))
}
