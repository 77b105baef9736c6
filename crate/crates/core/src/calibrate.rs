//! Post-hoc calibrators: temperature scaling, Platt scaling and histogram
//! binning. Each is fit on a validation set and then applied to any set
//! with a compatible payload.
//!
//! Every record reduces to two raw signals:
//!
//! * a raw confidence in `[0, 1]` (top-1 softmax probability, sigmoid of the
//!   mean chosen-token logit, or the exported confidence), used by histogram
//!   binning and by the uncalibrated baseline;
//! * a scalar logit (log-odds of the top-1 probability, mean chosen-token
//!   logit, or log-odds of the exported confidence), used by Platt scaling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::binning::{equal_count_partition, reliability_stats, BinPartition};
use crate::error::{Error, Result};
use crate::numeric::{argmax, log_sigmoid, log_sum_exp, logit, sigmoid, softmax};
use crate::prediction::{mean_chosen_logit, Payload, PayloadKind, PredictionSet};

pub const T_MIN: f64 = 0.05;
pub const T_MAX: f64 = 20.0;
/// Points in the log-spaced temperature grid that seeds the golden-section search.
pub const T_GRID_POINTS: usize = 201;
const LOG_T_TOL: f64 = 1e-4;

pub const PLATT_RIDGE: f64 = 1e-6;
const PLATT_MAX_ITER: usize = 100;
const PLATT_GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum Mapping {
    #[serde(rename = "temperature")]
    Temperature {
        #[serde(rename = "T")]
        temperature: f64,
    },
    #[serde(rename = "platt")]
    Platt { a: f64, b: f64 },
    #[serde(rename = "hist")]
    HistogramBinning {
        #[serde(flatten)]
        partition: BinPartition,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub nll_initial: f64,
    pub nll_final: f64,
    pub iterations: usize,
    pub fit_set_size: usize,
    /// Temperature search ended on `T_MIN` or `T_MAX`.
    #[serde(default)]
    pub bound_hit: bool,
    /// Platt fit had no outcome variation and fell back to the smoothed rate.
    #[serde(default)]
    pub degenerate: bool,
    #[serde(default = "yes")]
    pub converged: bool,
}

fn yes() -> bool {
    true
}

/// A fitted post-hoc calibrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    #[serde(flatten)]
    pub mapping: Mapping,
    pub fit_meta: FitMeta,
}

/// Calibrator family selected on the command line; `None` keeps raw confidences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibratorChoice {
    #[serde(rename = "temp")]
    Temperature,
    Platt,
    #[serde(rename = "hist")]
    Histogram,
    None,
}

impl FromStr for CalibratorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temp" | "temperature" => Ok(CalibratorChoice::Temperature),
            "platt" => Ok(CalibratorChoice::Platt),
            "hist" | "histogram" => Ok(CalibratorChoice::Histogram),
            "none" | "identity" => Ok(CalibratorChoice::None),
            other => Err(Error::contract(format!("unknown calibrator {other:?}"))),
        }
    }
}

impl fmt::Display for CalibratorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CalibratorChoice::Temperature => "temp",
            CalibratorChoice::Platt => "platt",
            CalibratorChoice::Histogram => "hist",
            CalibratorChoice::None => "none",
        })
    }
}

/// Greedy prediction and its (possibly calibrated) confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPrediction {
    pub top1: Option<usize>,
    pub confidence: f64,
}

/// Log-odds of the top-1 softmax probability, `z_max - logsumexp(others)`.
fn top1_log_odds(logits: &[f64]) -> f64 {
    let top = argmax(logits);
    let others: Vec<f64> = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, &z)| z)
        .collect();
    logits[top] - log_sum_exp(&others)
}

/// Scalar logit fed to Platt scaling.
pub fn platt_signal(payload: &Payload) -> Result<f64> {
    match payload {
        Payload::ClassLogits(z) => Ok(top1_log_odds(z)),
        Payload::TokenLogits(z) => mean_chosen_logit(z),
        Payload::Confidence(c) => Ok(logit(*c)),
    }
}

/// Uncalibrated confidence of a record's greedy prediction.
pub fn raw_prediction(payload: &Payload) -> Result<CalibratedPrediction> {
    Ok(match payload {
        Payload::ClassLogits(z) => {
            let top = argmax(z);
            CalibratedPrediction {
                top1: Some(top),
                confidence: softmax(z)[top],
            }
        }
        Payload::TokenLogits(z) => CalibratedPrediction {
            top1: None,
            confidence: sigmoid(mean_chosen_logit(z)?),
        },
        Payload::Confidence(c) => CalibratedPrediction {
            top1: None,
            confidence: *c,
        },
    })
}

fn require_outcomes(set: &PredictionSet) -> Result<Vec<f64>> {
    set.outcomes()
        .ok_or_else(|| Error::contract("every record needs a label or a verified value"))
}

fn require_nonempty(set: &PredictionSet) -> Result<()> {
    if set.is_empty() {
        Err(Error::contract("cannot fit a calibrator on an empty set"))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// temperature scaling

/// Summed negative log-likelihood of the labels under `softmax(z / T)`.
pub fn temperature_nll(logits: &[&[f64]], labels: &[usize], temperature: f64) -> f64 {
    let mut scaled = Vec::new();
    let mut total = 0.0;
    for (z, &y) in logits.iter().zip(labels) {
        scaled.clear();
        scaled.extend(z.iter().map(|v| v / temperature));
        total += log_sum_exp(&scaled) - scaled[y];
    }
    total
}

/// The log-spaced temperature grid `T_MIN ..= T_MAX`.
pub fn temperature_grid() -> Vec<f64> {
    let (lo, hi) = (T_MIN.ln(), T_MAX.ln());
    let last = (T_GRID_POINTS - 1) as f64;
    (0..T_GRID_POINTS)
        .map(|i| {
            if i == T_GRID_POINTS - 1 {
                T_MAX
            } else if i == 0 {
                T_MIN
            } else {
                (lo + (hi - lo) * i as f64 / last).exp()
            }
        })
        .collect()
}

/// Golden-section minimisation of `f` on `[lo, hi]` down to width `tol`.
/// Returns the best abscissa and the number of evaluations.
fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64, usize) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut evals = 2;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
        evals += 1;
    }
    if f1 <= f2 {
        (x1, f1, evals)
    } else {
        (x2, f2, evals)
    }
}

/// Fits `T` by minimising label NLL over `log T`: a 201-point grid locates
/// the basin, golden-section refines it to 1e-4 in `log T`.
pub fn fit_temperature_logits(logits: &[&[f64]], labels: &[usize]) -> Result<Calibrator> {
    if logits.is_empty() {
        return Err(Error::contract("cannot fit a temperature on an empty set"));
    }
    if logits.len() != labels.len() {
        return Err(Error::contract("logits and labels are misaligned"));
    }
    let nll = |log_t: f64| temperature_nll(logits, labels, log_t.exp());
    let nll_initial = temperature_nll(logits, labels, 1.0);
    if !nll_initial.is_finite() {
        return Err(Error::numerical("non-finite NLL at T = 1"));
    }

    let grid = temperature_grid();
    let values: Vec<f64> = grid.iter().map(|t| temperature_nll(logits, labels, *t)).collect();
    let best = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::numerical("NLL is non-finite over the whole temperature range"))?;

    let lo = grid[best.saturating_sub(1)].ln();
    let hi = grid[(best + 1).min(grid.len() - 1)].ln();
    let (mut log_t, mut value, evals) = golden_section(nll, lo, hi, LOG_T_TOL);
    if !(value <= values[best]) {
        log_t = grid[best].ln();
        value = values[best];
    }

    let mut bound_hit = false;
    let mut temperature = log_t.exp();
    for bound in [T_MIN, T_MAX] {
        if (log_t - bound.ln()).abs() <= LOG_T_TOL {
            let at_bound = temperature_nll(logits, labels, bound);
            if at_bound <= value {
                temperature = bound;
                value = at_bound;
            }
            bound_hit = true;
        }
    }
    let temperature = temperature.clamp(T_MIN, T_MAX);
    Ok(Calibrator {
        mapping: Mapping::Temperature { temperature },
        fit_meta: FitMeta {
            nll_initial,
            nll_final: value,
            iterations: T_GRID_POINTS + evals,
            fit_set_size: logits.len(),
            bound_hit,
            degenerate: false,
            converged: true,
        },
    })
}

/// Fits temperature scaling on a labelled classification set.
pub fn fit_temperature(val: &PredictionSet) -> Result<Calibrator> {
    require_nonempty(val)?;
    let mut logits = Vec::with_capacity(val.len());
    for r in val.records() {
        match &r.payload {
            Payload::ClassLogits(z) => logits.push(z.as_slice()),
            _ => {
                return Err(Error::contract(
                    "temperature scaling needs class_logits payloads",
                ))
            }
        }
    }
    fit_temperature_logits(&logits, &val.labels()?)
}

/// `softmax(z / T)`.
pub fn apply_temperature(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::contract(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let scaled: Vec<f64> = logits.iter().map(|z| z / temperature).collect();
    Ok(softmax(&scaled))
}

// ---------------------------------------------------------------------------
// Platt scaling

fn platt_objective(z: &[f64], v: &[f64], a: f64, b: f64) -> f64 {
    let data: f64 = z
        .iter()
        .zip(v)
        .map(|(&z, &v)| {
            let s = a * z + b;
            -(v * log_sigmoid(s) + (1.0 - v) * log_sigmoid(-s))
        })
        .sum();
    data + PLATT_RIDGE * (a * a + b * b)
}

/// Binary NLL of the outcomes under `σ(a z + b)`, without the ridge term.
pub fn platt_nll(z: &[f64], v: &[f64], a: f64, b: f64) -> f64 {
    platt_objective(z, v, a, b) - PLATT_RIDGE * (a * a + b * b)
}

/// Fits `σ(a z̄ + b)` to binary outcomes by damped Newton iterations on
/// the ridge-penalised NLL, starting from `(a, b) = (1, 0)`.
pub fn fit_platt(mean_logits: &[f64], outcomes: &[f64]) -> Result<Calibrator> {
    if mean_logits.is_empty() {
        return Err(Error::contract("cannot fit Platt scaling on an empty set"));
    }
    if mean_logits.len() != outcomes.len() {
        return Err(Error::contract("logits and outcomes are misaligned"));
    }
    if mean_logits.iter().chain(outcomes).any(|x| !x.is_finite()) {
        return Err(Error::numerical("non-finite Platt input"));
    }
    if outcomes.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::contract("outcomes must lie in [0, 1]"));
    }
    let n = mean_logits.len();
    let nll_initial = platt_nll(mean_logits, outcomes, 1.0, 0.0);

    if outcomes.iter().all(|&v| v == outcomes[0]) {
        let positives: f64 = outcomes.iter().sum();
        let rate = (positives + 1.0) / (n as f64 + 2.0);
        let b = logit(rate);
        return Ok(Calibrator {
            mapping: Mapping::Platt { a: 0.0, b },
            fit_meta: FitMeta {
                nll_initial,
                nll_final: platt_nll(mean_logits, outcomes, 0.0, b),
                iterations: 0,
                fit_set_size: n,
                bound_hit: false,
                degenerate: true,
                converged: true,
            },
        });
    }

    let (mut a, mut b) = (1.0, 0.0);
    let mut value = platt_objective(mean_logits, outcomes, a, b);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < PLATT_MAX_ITER {
        let (mut ga, mut gb) = (2.0 * PLATT_RIDGE * a, 2.0 * PLATT_RIDGE * b);
        let (mut haa, mut hab, mut hbb) = (2.0 * PLATT_RIDGE, 0.0, 2.0 * PLATT_RIDGE);
        for (&z, &v) in mean_logits.iter().zip(outcomes) {
            let p = sigmoid(a * z + b);
            let r = p - v;
            ga += r * z;
            gb += r;
            let w = p * (1.0 - p);
            haa += w * z * z;
            hab += w * z;
            hbb += w;
        }
        if ga.hypot(gb) < PLATT_GRAD_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let det = haa * hbb - hab * hab;
        let (da, db) = if det > 0.0 && det.is_finite() {
            (-(hbb * ga - hab * gb) / det, -(haa * gb - hab * ga) / det)
        } else {
            (-ga, -gb)
        };
        // backtracking until the objective decreases
        let slope = ga * da + gb * db;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let (na, nb) = (a + step * da, b + step * db);
            let candidate = platt_objective(mean_logits, outcomes, na, nb);
            if candidate <= value + 1e-4 * step * slope {
                a = na;
                b = nb;
                value = candidate;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no representable decrease left; accept if the gradient is at rounding level
            converged = ga.hypot(gb) < 1e-10 * n as f64;
            break;
        }
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::numerical("Platt fit diverged"));
    }
    Ok(Calibrator {
        mapping: Mapping::Platt { a, b },
        fit_meta: FitMeta {
            nll_initial,
            nll_final: platt_nll(mean_logits, outcomes, a, b),
            iterations,
            fit_set_size: n,
            bound_hit: false,
            degenerate: false,
            converged,
        },
    })
}

/// `σ(a z̄ + b)`.
pub fn apply_platt(z_bar: f64, a: f64, b: f64) -> f64 {
    sigmoid(a * z_bar + b)
}

// ---------------------------------------------------------------------------
// histogram binning

/// Equal-count bins over the raw confidences; each bin maps to its mean outcome.
pub fn fit_histogram_binning(confidences: &[f64], outcomes: &[f64], bins: usize) -> Result<Calibrator> {
    let partition = equal_count_partition(confidences, bins)?;
    let table = reliability_stats(confidences, outcomes, &partition)?;
    let means: Vec<Option<f64>> = table.rows.iter().map(|r| r.mean_acc).collect();
    // bins emptied by ties cover an empty interval; give them a neighbour's value
    let values: Vec<f64> = (0..means.len())
        .map(|i| {
            means[..=i]
                .iter()
                .rev()
                .chain(&means[i + 1..])
                .find_map(|m| *m)
                .unwrap_or(0.0)
        })
        .collect();

    let binary_nll = |p: f64, v: f64| {
        let p = p.clamp(1e-15, 1.0 - 1e-15);
        -(v * p.ln() + (1.0 - v) * (1.0 - p).ln())
    };
    let nll_initial = confidences
        .iter()
        .zip(outcomes)
        .map(|(&c, &v)| binary_nll(c, v))
        .sum();
    let nll_final = confidences
        .iter()
        .zip(outcomes)
        .map(|(&c, &v)| binary_nll(values[partition.assign(c)], v))
        .sum();
    Ok(Calibrator {
        mapping: Mapping::HistogramBinning { partition, values },
        fit_meta: FitMeta {
            nll_initial,
            nll_final,
            iterations: 0,
            fit_set_size: confidences.len(),
            bound_hit: false,
            degenerate: false,
            converged: true,
        },
    })
}

/// Value of the bin `c` falls into.
pub fn apply_histogram_binning(c: f64, partition: &BinPartition, values: &[f64]) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::contract(format!("confidence {c} outside [0, 1]")));
    }
    Ok(values[partition.assign(c)])
}

impl Calibrator {
    pub fn choice(&self) -> CalibratorChoice {
        match self.mapping {
            Mapping::Temperature { .. } => CalibratorChoice::Temperature,
            Mapping::Platt { .. } => CalibratorChoice::Platt,
            Mapping::HistogramBinning { .. } => CalibratorChoice::Histogram,
        }
    }

    /// Calibrated greedy prediction for one record.
    pub fn apply(&self, payload: &Payload) -> Result<CalibratedPrediction> {
        match (&self.mapping, payload) {
            (Mapping::Temperature { temperature }, Payload::ClassLogits(z)) => {
                let top = argmax(z);
                let probs = apply_temperature(z, *temperature)?;
                Ok(CalibratedPrediction {
                    top1: Some(top),
                    confidence: probs[top],
                })
            }
            (Mapping::Temperature { .. }, other) => Err(Error::contract(format!(
                "temperature scaling cannot calibrate {} payloads",
                other.kind()
            ))),
            (Mapping::Platt { a, b }, _) => Ok(CalibratedPrediction {
                top1: match payload {
                    Payload::ClassLogits(z) => Some(argmax(z)),
                    _ => None,
                },
                confidence: apply_platt(platt_signal(payload)?, *a, *b),
            }),
            (Mapping::HistogramBinning { partition, values }, _) => {
                let raw = raw_prediction(payload)?;
                Ok(CalibratedPrediction {
                    top1: raw.top1,
                    confidence: apply_histogram_binning(raw.confidence, partition, values)?,
                })
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cal: Calibrator = serde_json::from_str(text)?;
        match &cal.mapping {
            Mapping::Temperature { temperature } if !(*temperature > 0.0) => {
                Err(Error::contract("temperature must be positive"))
            }
            Mapping::HistogramBinning { partition, values } if values.len() != partition.bin_count() => {
                Err(Error::contract("histogram values do not match the bin count"))
            }
            _ => Ok(cal),
        }
    }
}

/// Calibrated greedy predictions for every record, in record order.
pub fn calibrate_set(set: &PredictionSet, calibrator: &Calibrator) -> Result<Vec<CalibratedPrediction>> {
    set.records().iter().map(|r| calibrator.apply(&r.payload)).collect()
}

/// Uncalibrated greedy predictions for every record.
pub fn raw_predictions(set: &PredictionSet) -> Result<Vec<CalibratedPrediction>> {
    set.records().iter().map(|r| raw_prediction(&r.payload)).collect()
}

/// Greedy predictions under an optional calibrator.
pub fn score_predictions(
    set: &PredictionSet,
    calibrator: Option<&Calibrator>,
) -> Result<Vec<CalibratedPrediction>> {
    match calibrator {
        Some(c) => calibrate_set(set, c),
        None => raw_predictions(set),
    }
}

/// Full per-class probability vectors (classification only), under
/// temperature scaling or none.
pub fn class_probabilities(set: &PredictionSet, calibrator: Option<&Calibrator>) -> Result<Vec<Vec<f64>>> {
    let temperature = match calibrator.map(|c| &c.mapping) {
        None => 1.0,
        Some(Mapping::Temperature { temperature }) => *temperature,
        Some(_) => {
            return Err(Error::contract(
                "per-class probabilities need temperature scaling or no calibrator",
            ))
        }
    };
    set.records()
        .iter()
        .map(|r| match &r.payload {
            Payload::ClassLogits(z) => apply_temperature(z, temperature),
            other => Err(Error::contract(format!(
                "per-class probabilities need class_logits, got {}",
                other.kind()
            ))),
        })
        .collect()
}

/// Fits the chosen calibrator family on a validation set.
pub fn fit_choice(choice: CalibratorChoice, val: &PredictionSet, bins: usize) -> Result<Option<Calibrator>> {
    match choice {
        CalibratorChoice::None => Ok(None),
        CalibratorChoice::Temperature => fit_temperature(val).map(Some),
        CalibratorChoice::Platt => {
            require_nonempty(val)?;
            let outcomes = require_outcomes(val)?;
            let signals = val
                .records()
                .iter()
                .map(|r| platt_signal(&r.payload))
                .collect::<Result<Vec<_>>>()?;
            fit_platt(&signals, &outcomes).map(Some)
        }
        CalibratorChoice::Histogram => {
            require_nonempty(val)?;
            let outcomes = require_outcomes(val)?;
            let raw: Vec<f64> = raw_predictions(val)?.iter().map(|p| p.confidence).collect();
            fit_histogram_binning(&raw, &outcomes, bins).map(Some)
        }
    }
}

/// Payload kinds a calibrator family accepts.
pub fn accepts(choice: CalibratorChoice, kind: PayloadKind) -> bool {
    !matches!(
        (choice, kind),
        (CalibratorChoice::Temperature, PayloadKind::Generation | PayloadKind::Scalar)
    )
}
