use confcal::{apgr, TradeoffCurve};
use serde::Serialize;

use crate::config::required;
use crate::error::{CliError, CliResult};
use crate::report::{report, Format, Inputs};
use crate::ApgrArgs;

#[derive(Serialize)]
struct Body {
    apgr: Option<f64>,
    defined: bool,
    base_accuracy: f64,
    escalation_accuracy: f64,
    points: usize,
}

pub fn run(args: ApgrArgs) -> CliResult<String> {
    let format = required(&args.format, "format")?;
    let path = required(&args.curve, "curve")?;
    let mut inputs = Inputs::default();
    let bytes = inputs.read(&path)?;
    let curve = TradeoffCurve::read_csv(bytes.as_slice()).map_err(|source| CliError::Input {
        path: path.clone(),
        source,
    })?;
    let value = apgr(&curve);
    let body = Body {
        apgr: value,
        defined: value.is_some(),
        base_accuracy: curve.base_accuracy,
        escalation_accuracy: curve.escalation_accuracy,
        points: curve.points.len(),
    };
    Ok(match format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(&report("apgr", &args, &inputs, &body))
                .map_err(confcal::Error::from)?;
            text.push('\n');
            text
        }
        Format::Csv => format!(
            "apgr,defined\n{},{}\n",
            value.map(|v| format!("{v:?}")).unwrap_or_default(),
            body.defined
        ),
    })
}
