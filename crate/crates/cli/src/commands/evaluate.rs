use confcal::binning::{ece_equal_width, ReliabilityRow};
use confcal::{ece, equal_count_partition, reliability_stats, Calibrator, Role, ScoredSet};
use serde::Serialize;

use super::{path_or, summary};
use crate::config::required;
use crate::error::{CliError, CliResult};
use crate::report::{report, Format, Inputs, Output};
use crate::EvaluateArgs;

#[derive(Serialize)]
struct Body {
    n: usize,
    bins: usize,
    accuracy: f64,
    mean_confidence: f64,
    ece: f64,
    ece_equal_width: Option<f64>,
    /// Spearman correlation of bin index and bin accuracy.
    monotonicity: Option<f64>,
}

pub fn run(args: EvaluateArgs) -> CliResult<String> {
    let bins = required(&args.bins, "bins")?;
    let format = required(&args.format, "format")?;
    let mut inputs = Inputs::default();
    let set = inputs.load_set(&required(&args.input, "input")?, Role::Test)?;
    let calibrator = match &args.calibration {
        Some(path) => {
            let bytes = inputs.read(path)?;
            let text = String::from_utf8(bytes)
                .map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
            Some(Calibrator::from_json(&text).map_err(|source| CliError::Input {
                path: path.clone(),
                source,
            })?)
        }
        None => None,
    };

    let scored = ScoredSet::from_set(&set, calibrator.as_ref())?;
    let conf = scored.confidences();
    let outcomes = scored.require_outcomes()?;
    let partition = equal_count_partition(&conf, bins)?;
    let table = reliability_stats(&conf, outcomes, &partition)?;
    let n = conf.len() as f64;
    let body = Body {
        n: conf.len(),
        bins,
        accuracy: outcomes.iter().sum::<f64>() / n,
        mean_confidence: conf.iter().sum::<f64>() / n,
        ece: ece(&conf, outcomes, &partition)?,
        ece_equal_width: if args.equal_width == Some(true) {
            Some(ece_equal_width(&conf, outcomes, bins)?)
        } else {
            None
        },
        monotonicity: table.monotonicity(),
    };

    let mut out = Output::create(&path_or(&args.out, "."))?;
    match format {
        Format::Csv => out.write_with("reliability.csv", |w| table.write_csv(w))?,
        Format::Json => out.write_rows::<ReliabilityRow>("reliability", format, &table.rows)?,
    };
    out.write_json("report.json", &report("evaluate", &args, &inputs, &body))?;
    Ok(summary(out.written(), &[format!("ECE {:.4}", body.ece)]))
}
