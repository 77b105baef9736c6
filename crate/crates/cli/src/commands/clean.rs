use std::collections::BTreeSet;

use confcal::calibrate::class_probabilities;
use confcal::cleaning::{
    calibrated_sweep, clean_basic, clean_confident_learning, compare_methods, precision_detection_curve,
    write_curve_csv, ConfidenceGate, GateSelection, OverlapTable, PrecisionPoint,
};
use confcal::{CalibratorChoice, Calibrator, CleaningReport, Ensemble, PredictionSet, Role, ScoredSet, TruthFile};
use serde::Serialize;

use super::{fit, path_or, summary};
use crate::config::required;
use crate::error::{CliError, CliResult};
use crate::report::{report, Format, Inputs, Output};
use crate::{CleanArgs, CleanMethodArg, GateArg};

#[derive(Serialize)]
struct MethodSummary {
    method: &'static str,
    flagged: usize,
    detection_rate: f64,
}

#[derive(Serialize)]
struct OverlapRow {
    method_a: &'static str,
    method_b: &'static str,
    both: usize,
    only_a: usize,
    only_b: usize,
    precision_both: Option<f64>,
    precision_only_a: Option<f64>,
    precision_only_b: Option<f64>,
}

impl OverlapRow {
    fn new(a: &'static str, b: &'static str, t: OverlapTable) -> Self {
        OverlapRow {
            method_a: a,
            method_b: b,
            both: t.both,
            only_a: t.only_a,
            only_b: t.only_b,
            precision_both: t.precision_both,
            precision_only_a: t.precision_only_a,
            precision_only_b: t.precision_only_b,
        }
    }
}

#[derive(Serialize)]
struct Body<'a> {
    dataset_size: usize,
    models: Vec<&'a str>,
    calibrated: bool,
    calibrators: Vec<Option<&'a Calibrator>>,
    methods: Vec<MethodSummary>,
    /// Calibrated flag sets nest over the swept budgets.
    nesting_verified: Option<bool>,
    excluded_classes: Vec<usize>,
    curve: &'a [PrecisionPoint],
    overlap: &'a [OverlapRow],
}

fn load_all(inputs: &mut Inputs, paths: &[std::path::PathBuf], role: Role) -> CliResult<Vec<PredictionSet>> {
    paths.iter().map(|p| inputs.load_set(p, role)).collect()
}

fn write_report(out: &mut Output, stem: &str, format: Format, report: &CleaningReport) -> CliResult<()> {
    match format {
        Format::Csv => out.write_with(&format!("{stem}.csv"), |w| report.write_csv(w))?,
        Format::Json => out.write_json(&format!("{stem}.json"), report)?,
    };
    Ok(())
}

pub fn run(args: CleanArgs) -> CliResult<String> {
    let bins = required(&args.bins, "bins")?;
    let choice = required(&args.calibrator, "calibrator")?;
    let format = required(&args.format, "format")?;
    let method = required(&args.method, "method")?;
    if args.budget.is_some() && args.budget_sweep == Some(true) {
        return Err(CliError::Contract("--budget and --budget-sweep are exclusive".into()));
    }
    let model_paths = required(&args.model, "model")?;
    if model_paths.is_empty() {
        return Err(CliError::Contract("at least one --model is required".into()));
    }

    let mut inputs = Inputs::default();
    let models = load_all(&mut inputs, &model_paths, Role::Test)?;
    let vals = match &args.val {
        Some(paths) => {
            if paths.len() != models.len() {
                return Err(CliError::Contract(format!(
                    "{} --val files for {} --model files",
                    paths.len(),
                    models.len()
                )));
            }
            Some(load_all(&mut inputs, paths, Role::Validation)?)
        }
        None => None,
    };

    if let Some(paths) = &args.eval_model {
        let evals = load_all(&mut inputs, paths, Role::Test)?;
        let cleaning: BTreeSet<&str> = models.iter().map(PredictionSet::model_id).collect();
        let shared: Vec<&str> = evals
            .iter()
            .map(PredictionSet::model_id)
            .filter(|id| cleaning.contains(id))
            .collect();
        if !shared.is_empty() && args.allow_self_eval != Some(true) {
            return Err(CliError::Contract(format!(
                "model {:?} is used for both cleaning and evaluation; pass --allow-self-eval to permit",
                shared[0]
            )));
        }
    }
    let truth = match &args.truth {
        Some(path) => {
            let bytes = inputs.read(path)?;
            Some(TruthFile::read_csv(bytes.as_slice()).map_err(|source| CliError::Input {
                path: path.clone(),
                source,
            })?)
        }
        None => None,
    };

    let calibrators: Vec<Option<Calibrator>> = match &vals {
        Some(vals) => vals.iter().map(|v| fit(choice, v, bins)).collect::<CliResult<_>>()?,
        None => vec![None; models.len()],
    };
    let scored = models
        .iter()
        .zip(&calibrators)
        .map(|(m, c)| ScoredSet::from_set(m, c.as_ref()))
        .collect::<confcal::Result<Vec<_>>>()?;
    let ensemble = Ensemble::new(&scored)?;

    let wants = |m: CleanMethodArg| method == m || method == CleanMethodArg::All;
    let mut out = Output::create(&path_or(&args.out, "."))?;
    let mut headline: Vec<(&'static str, CleaningReport)> = Vec::new();
    let mut curve_reports: Vec<CleaningReport> = Vec::new();
    let mut nesting_verified = None;
    let mut excluded_classes = Vec::new();

    if wants(CleanMethodArg::Calibrated) {
        let vals = vals
            .as_ref()
            .ok_or_else(|| CliError::Contract("calibrated cleaning needs --val files".into()))?;
        let selection = match required(&args.gate, "gate")? {
            GateArg::Accuracy => GateSelection::Accuracy,
            GateArg::Confidence => GateSelection::Confidence,
        };
        let gates = vals
            .iter()
            .zip(&calibrators)
            .map(|(v, c)| {
                let scored = ScoredSet::from_set(v, c.as_ref())?;
                ConfidenceGate::fit_scored(&scored, bins, selection)
            })
            .collect::<confcal::Result<Vec<_>>>()?;
        let budgets: Vec<usize> = match args.budget {
            Some(k) => vec![k],
            None => (1..=bins).collect(),
        };
        let sweep = calibrated_sweep(&ensemble, &gates, &budgets)?;
        nesting_verified = Some(
            sweep
                .windows(2)
                .all(|w| w[0].flagged_ids().is_subset(&w[1].flagged_ids())),
        );
        let widest = sweep.last().expect("at least one budget").clone();
        write_report(&mut out, "flags_calibrated", format, &widest)?;
        if args.budget.is_some() {
            headline.push(("calibrated", widest));
        }
        curve_reports.extend(sweep);
    }
    if wants(CleanMethodArg::Basic) {
        let basic = clean_basic(&ensemble);
        write_report(&mut out, "flags_basic", format, &basic)?;
        curve_reports.push(basic.clone());
        headline.push(("basic", basic));
    }
    if wants(CleanMethodArg::Cl) {
        if !matches!(choice, CalibratorChoice::Temperature | CalibratorChoice::None) && vals.is_some() {
            return Err(CliError::Contract(
                "confident learning needs per-class probabilities; use --calibrator temp or none".into(),
            ));
        }
        let probs = class_probabilities(&models[0], calibrators[0].as_ref())?;
        let first = scored[0].aligned_to(&ensemble.ids)?;
        let probs = {
            let order = confcal::prediction::alignment(
                ensemble.ids.iter().map(String::as_str),
                models[0].ids(),
            )?;
            order.into_iter().map(|i| probs[i].clone()).collect::<Vec<_>>()
        };
        let cl = clean_confident_learning(&first.ids, &probs, first.require_labels()?)?;
        excluded_classes = cl.excluded_classes.clone();
        write_report(&mut out, "flags_cl", format, &cl)?;
        curve_reports.push(cl.clone());
        headline.push(("cl", cl));
    }

    let curve = precision_detection_curve(&curve_reports, truth.as_ref().unwrap_or(&TruthFile::default()));
    match format {
        Format::Csv => out.write_with("curve.csv", |w| write_curve_csv(&curve, w))?,
        Format::Json => out.write_json("curve.json", &curve)?,
    };

    let mut overlap = Vec::new();
    for i in 0..headline.len() {
        for j in i + 1..headline.len() {
            let (a, b) = (&headline[i], &headline[j]);
            overlap.push(OverlapRow::new(a.0, b.0, compare_methods(&a.1, &b.1, truth.as_ref())?));
        }
    }
    if !overlap.is_empty() {
        out.write_rows("overlap", format, &overlap)?;
    }

    let body = Body {
        dataset_size: ensemble.len(),
        models: models.iter().map(PredictionSet::model_id).collect(),
        calibrated: vals.is_some() && choice != CalibratorChoice::None,
        calibrators: calibrators.iter().map(Option::as_ref).collect(),
        methods: headline
            .iter()
            .map(|(name, r)| MethodSummary {
                method: name,
                flagged: r.flagged.len(),
                detection_rate: r.detection_rate(),
            })
            .collect(),
        nesting_verified,
        excluded_classes,
        curve: &curve,
        overlap: &overlap,
    };
    out.write_json("report.json", &report("clean", &args, &inputs, &body))?;

    let lines: Vec<String> = body
        .methods
        .iter()
        .map(|m| format!("{}: {} flagged ({:.4})", m.method, m.flagged, m.detection_rate))
        .collect();
    Ok(summary(out.written(), &lines))
}
