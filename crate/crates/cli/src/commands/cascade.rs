use confcal::cascade::{random_baseline, CurvePoint};
use confcal::{apgr, build_policy, simulate_cascade, CalibratorChoice, Calibrator, Role, ScoredSet, TradeoffCurve};
use serde::Serialize;

use super::{fit, path_or, summary};
use crate::config::required;
use crate::error::{CliError, CliResult};
use crate::report::{report, Inputs, Output};
use crate::CascadeArgs;

#[derive(Debug, Clone, Serialize)]
struct CurveRow {
    #[serde(rename = "K")]
    budget: usize,
    p: f64,
    accuracy: f64,
    random_baseline: f64,
    uc_p: f64,
    uc_accuracy: f64,
}

#[derive(Serialize)]
struct Apgr {
    cc: Option<f64>,
    uc: Option<f64>,
    random: f64,
}

#[derive(Serialize)]
struct Calibrators<'a> {
    base: Option<&'a Calibrator>,
    esc: Option<&'a Calibrator>,
}

#[derive(Serialize)]
struct Body<'a> {
    n_test: usize,
    base_accuracy: f64,
    escalation_accuracy: f64,
    apgr: Apgr,
    /// False when both endpoints have equal accuracy.
    apgr_defined: bool,
    operating_point: Option<CurvePoint>,
    calibrators: Calibrators<'a>,
}

/// Scores both splits of one model under an optional calibrator.
fn score(val: &confcal::PredictionSet, test: &confcal::PredictionSet, cal: Option<&Calibrator>) -> CliResult<(ScoredSet, ScoredSet)> {
    Ok((ScoredSet::from_set(val, cal)?, ScoredSet::from_set(test, cal)?))
}

pub fn run(args: CascadeArgs) -> CliResult<String> {
    let bins = required(&args.bins, "bins")?;
    let choice = required(&args.calibrator, "calibrator")?;
    let format = required(&args.format, "format")?;
    if args.budget.is_some() && args.budget_sweep == Some(true) {
        return Err(CliError::Contract("--budget and --budget-sweep are exclusive".into()));
    }
    let mut inputs = Inputs::default();
    let val_base = inputs.load_set(&required(&args.val_base, "val-base")?, Role::Validation)?;
    let val_esc = inputs.load_set(&required(&args.val_esc, "val-esc")?, Role::Validation)?;
    let test_base = inputs.load_set(&required(&args.test_base, "test-base")?, Role::Test)?;
    let test_esc = inputs.load_set(&required(&args.test_esc, "test-esc")?, Role::Test)?;

    let base_cal = fit(choice, &val_base, bins)?;
    let esc_cal = fit(choice, &val_esc, bins)?;
    let budget = args.budget.unwrap_or(bins);

    let (vb, tb) = score(&val_base, &test_base, base_cal.as_ref())?;
    let (ve, te) = score(&val_esc, &test_esc, esc_cal.as_ref())?;
    let policy = build_policy(&vb, &ve, bins, budget)?;
    let curve = simulate_cascade(&tb, &te, &policy)?;

    let uc: TradeoffCurve = if choice == CalibratorChoice::None {
        curve.clone()
    } else {
        let (vb, tb) = score(&val_base, &test_base, None)?;
        let (ve, te) = score(&val_esc, &test_esc, None)?;
        let policy = build_policy(&vb, &ve, bins, budget)?;
        simulate_cascade(&tb, &te, &policy)?
    };

    let rows: Vec<CurveRow> = curve
        .points
        .iter()
        .zip(&uc.points)
        .map(|(cc, uc)| CurveRow {
            budget: cc.budget,
            p: cc.base_fraction,
            accuracy: cc.accuracy,
            random_baseline: random_baseline(curve.base_accuracy, curve.escalation_accuracy, cc.base_fraction),
            uc_p: uc.base_fraction,
            uc_accuracy: uc.accuracy,
        })
        .collect();

    let cc_apgr = apgr(&curve);
    let body = Body {
        n_test: tb.len(),
        base_accuracy: curve.base_accuracy,
        escalation_accuracy: curve.escalation_accuracy,
        apgr: Apgr {
            cc: cc_apgr,
            uc: apgr(&uc),
            random: 0.5,
        },
        apgr_defined: cc_apgr.is_some(),
        operating_point: args.budget.map(|k| curve.points[k]),
        calibrators: Calibrators {
            base: base_cal.as_ref(),
            esc: esc_cal.as_ref(),
        },
    };

    let mut out = Output::create(&path_or(&args.out, "."))?;
    out.write_rows("curve", format, &rows)?;
    out.write_json("policy.json", &policy)?;
    out.write_json("report.json", &report("cascade", &args, &inputs, &body))?;

    let apgr_line = match cc_apgr {
        Some(v) => format!("APGR {v:.4}"),
        None => "APGR undefined (equal endpoint accuracies)".to_string(),
    };
    Ok(summary(out.written(), &[apgr_line]))
}
