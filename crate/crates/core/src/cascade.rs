//! Calibrated-advantage cascading between a base model and an escalation
//! model, trade-off simulation, and the APGR summary metric.
//!
//! Validation samples are binned by the base model's calibrated confidence.
//! Each bin gets an advantage `mean(c_esc) - mean(c_base)` over its members;
//! a budget of `K` keeps the base model's answer on the `K` bins with the
//! smallest advantage and escalates everything else.

use serde::{Deserialize, Serialize};

use crate::binning::{equal_count_partition, BinPartition, DEFAULT_BINS};
use crate::calibrate::{fit_choice, CalibratorChoice};
use crate::error::{Error, Result};
use crate::prediction::PredictionSet;
use crate::scored::ScoredSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    UseBase,
    Escalate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadePolicy {
    pub partition: BinPartition,
    /// Confidence advantage of the escalation model per bin.
    pub advantage: Vec<f64>,
    /// Validation accuracy advantage per bin; diagnostic only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_advantage: Option<Vec<f64>>,
    /// Bin indices sorted by ascending advantage, ties to the lower index.
    pub selected_order: Vec<usize>,
    #[serde(rename = "K")]
    pub budget: usize,
}

fn ascending_order(advantage: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..advantage.len()).collect();
    order.sort_by(|&a, &b| advantage[a].total_cmp(&advantage[b]).then(a.cmp(&b)));
    order
}

impl CascadePolicy {
    /// Policy from a precomputed advantage vector.
    pub fn from_advantage(partition: BinPartition, advantage: Vec<f64>, budget: usize) -> Result<Self> {
        if advantage.len() != partition.bin_count() {
            return Err(Error::contract(format!(
                "{} advantages for {} bins",
                advantage.len(),
                partition.bin_count()
            )));
        }
        if advantage.iter().any(|a| !a.is_finite()) {
            return Err(Error::numerical("non-finite bin advantage"));
        }
        check_budget(budget, partition.bin_count())?;
        Ok(CascadePolicy {
            selected_order: ascending_order(&advantage),
            partition,
            advantage,
            accuracy_advantage: None,
            budget,
        })
    }

    pub fn bin_count(&self) -> usize {
        self.partition.bin_count()
    }

    /// Bins whose samples stay with the base model.
    pub fn selected(&self) -> &[usize] {
        &self.selected_order[..self.budget]
    }

    pub fn with_budget(&self, budget: usize) -> Result<Self> {
        check_budget(budget, self.bin_count())?;
        Ok(CascadePolicy {
            budget,
            ..self.clone()
        })
    }

    /// Position of each bin in `selected_order`; a bin is selected at
    /// budget `K` iff its rank is below `K`.
    fn bin_ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.bin_count()];
        for (rank, &bin) in self.selected_order.iter().enumerate() {
            ranks[bin] = rank;
        }
        ranks
    }

    pub fn route(&self, c_base: f64) -> Result<Route> {
        if !(0.0..=1.0).contains(&c_base) {
            return Err(Error::contract(format!("confidence {c_base} outside [0, 1]")));
        }
        let bin = self.partition.assign(c_base);
        Ok(if self.selected().contains(&bin) {
            Route::UseBase
        } else {
            Route::Escalate
        })
    }
}

fn check_budget(budget: usize, bins: usize) -> Result<()> {
    if budget > bins {
        Err(Error::contract(format!("budget {budget} exceeds bin count {bins}")))
    } else {
        Ok(())
    }
}

/// Builds the routing policy from calibrated validation predictions of both
/// models. Samples are paired by id.
pub fn build_policy(
    val_base: &ScoredSet,
    val_esc: &ScoredSet,
    bins: usize,
    budget: usize,
) -> Result<CascadePolicy> {
    check_budget(budget, bins)?;
    let esc = val_esc.aligned_to(&val_base.ids)?;
    let base_conf = val_base.confidences();
    let esc_conf = esc.confidences();
    let partition = equal_count_partition(&base_conf, bins)?;

    let mut members = vec![Vec::new(); bins];
    for (i, &c) in base_conf.iter().enumerate() {
        members[partition.assign(c)].push(i);
    }
    let bin_mean = |values: &[f64], idx: &[usize]| {
        idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64
    };
    // a bin left empty by tied confidences covers an empty interval; its advantage is moot
    let advantage: Vec<f64> = members
        .iter()
        .map(|idx| {
            if idx.is_empty() {
                0.0
            } else {
                bin_mean(&esc_conf, idx) - bin_mean(&base_conf, idx)
            }
        })
        .collect();
    let accuracy_advantage = match (&val_base.outcomes, &esc.outcomes) {
        (Some(vb), Some(ve)) => Some(
            members
                .iter()
                .map(|idx| {
                    if idx.is_empty() {
                        0.0
                    } else {
                        bin_mean(ve, idx) - bin_mean(vb, idx)
                    }
                })
                .collect(),
        ),
        _ => None,
    };
    let mut policy = CascadePolicy::from_advantage(partition, advantage, budget)?;
    policy.accuracy_advantage = accuracy_advantage;
    Ok(policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    #[serde(rename = "K")]
    pub budget: usize,
    /// Fraction of samples answered by the base model.
    #[serde(rename = "p")]
    pub base_fraction: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub points: Vec<CurvePoint>,
    pub base_accuracy: f64,
    pub escalation_accuracy: f64,
}

impl TradeoffCurve {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["K", "p", "accuracy"])?;
        for p in &self.points {
            writer.write_record([
                p.budget.to_string(),
                format!("{:?}", p.base_fraction),
                format!("{:?}", p.accuracy),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Reads a `K,p,accuracy` CSV; the endpoints come from the `p = 1` and
    /// `p = 0` rows.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let mut points = Vec::new();
        for (i, row) in reader.deserialize::<CurvePoint>().enumerate() {
            points.push(row.map_err(|e| Error::parse(i + 2, e.to_string()))?);
        }
        let endpoint = |target: f64| {
            points
                .iter()
                .find(|p| p.base_fraction == target)
                .map(|p| p.accuracy)
                .ok_or_else(|| Error::contract(format!("curve has no point with p = {target}")))
        };
        Ok(TradeoffCurve {
            base_accuracy: endpoint(1.0)?,
            escalation_accuracy: endpoint(0.0)?,
            points,
        })
    }
}

fn mean_in_order(values: &[f64]) -> f64 {
    let mut total = 0.0;
    for v in values {
        total += v;
    }
    total / values.len() as f64
}

/// Sweeps the budget from 0 to `N` on aligned test predictions. Escalated
/// samples always take the escalation model's outcome.
pub fn simulate_cascade(
    test_base: &ScoredSet,
    test_esc: &ScoredSet,
    policy: &CascadePolicy,
) -> Result<TradeoffCurve> {
    if test_base.is_empty() {
        return Err(Error::contract("empty test set"));
    }
    let esc = test_esc.aligned_to(&test_base.ids)?;
    let base_out = test_base.require_outcomes()?;
    let esc_out = esc.require_outcomes()?;
    let ranks = policy.bin_ranks();
    let sample_rank = test_base
        .predictions
        .iter()
        .map(|p| {
            if (0.0..=1.0).contains(&p.confidence) {
                Ok(ranks[policy.partition.assign(p.confidence)])
            } else {
                Err(Error::contract(format!("confidence {} outside [0, 1]", p.confidence)))
            }
        })
        .collect::<Result<Vec<usize>>>()?;

    let n = test_base.len();
    let points = (0..=policy.bin_count())
        .map(|k| {
            let mut kept = 0usize;
            let mut total = 0.0;
            for i in 0..n {
                if sample_rank[i] < k {
                    kept += 1;
                    total += base_out[i];
                } else {
                    total += esc_out[i];
                }
            }
            CurvePoint {
                budget: k,
                base_fraction: kept as f64 / n as f64,
                accuracy: total / n as f64,
            }
        })
        .collect();
    Ok(TradeoffCurve {
        points,
        base_accuracy: mean_in_order(base_out),
        escalation_accuracy: mean_in_order(esc_out),
    })
}

/// Expected accuracy when a random fraction `p` of samples stays with the base model.
pub fn random_baseline(base_acc: f64, esc_acc: f64, p: f64) -> f64 {
    p * base_acc + (1.0 - p) * esc_acc
}

/// Trapezoid area under the normalised performance-cost curve.
///
/// `points` are `(cost, performance)` pairs with cost in `[0, 1]`. Missing
/// endpoints are filled with the weak (cost 0) and strong (cost 1)
/// performances. Returns `None` when `weak == strong`.
pub fn apgr_from_points(points: &[(f64, f64)], weak: f64, strong: f64) -> Option<f64> {
    if weak == strong || !weak.is_finite() || !strong.is_finite() {
        return None;
    }
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.first().is_none_or(|p| p.0 > 0.0) {
        pts.insert(0, (0.0, weak));
    }
    if pts.last().is_none_or(|p| p.0 < 1.0) {
        pts.push((1.0, strong));
    }
    let gap = strong - weak;
    let area = pts
        .windows(2)
        .map(|w| {
            let (c0, p0) = w[0];
            let (c1, p1) = w[1];
            (c1 - c0) * ((p0 - weak) / gap + (p1 - weak) / gap) / 2.0
        })
        .sum();
    Some(area)
}

/// APGR of a cascade curve. Cost is the fraction of samples answered by the
/// stronger endpoint model (the escalation model unless the base is better).
pub fn apgr(curve: &TradeoffCurve) -> Option<f64> {
    if curve.points.len() < 2 {
        return None;
    }
    let escalation_is_strong = curve.escalation_accuracy >= curve.base_accuracy;
    let (weak, strong) = if escalation_is_strong {
        (curve.base_accuracy, curve.escalation_accuracy)
    } else {
        (curve.escalation_accuracy, curve.base_accuracy)
    };
    let points: Vec<(f64, f64)> = curve
        .points
        .iter()
        .map(|p| {
            let cost = if escalation_is_strong {
                1.0 - p.base_fraction
            } else {
                p.base_fraction
            };
            (cost, p.accuracy)
        })
        .collect();
    apgr_from_points(&points, weak, strong)
}

/// Calibrated policy, its test curve and APGR for one configuration.
#[derive(Debug, Clone)]
pub struct CascadeRun {
    pub policy: CascadePolicy,
    pub curve: TradeoffCurve,
    pub apgr: Option<f64>,
}

/// The four prediction sets of a cascade experiment.
#[derive(Debug, Clone, Copy)]
pub struct CascadeData<'a> {
    pub val_base: &'a PredictionSet,
    pub val_esc: &'a PredictionSet,
    pub test_base: &'a PredictionSet,
    pub test_esc: &'a PredictionSet,
}

/// Calibrated predictions of both models on validation and test.
#[derive(Debug, Clone)]
pub struct ScoredPair {
    pub val_base: ScoredSet,
    pub val_esc: ScoredSet,
    pub test_base: ScoredSet,
    pub test_esc: ScoredSet,
}

impl CascadeData<'_> {
    /// Fits one calibrator per model on its validation set and scores both splits.
    pub fn score(&self, choice: CalibratorChoice, bins: usize) -> Result<ScoredPair> {
        let base_cal = fit_choice(choice, self.val_base, bins)?;
        let esc_cal = fit_choice(choice, self.val_esc, bins)?;
        Ok(ScoredPair {
            val_base: ScoredSet::from_set(self.val_base, base_cal.as_ref())?,
            val_esc: ScoredSet::from_set(self.val_esc, esc_cal.as_ref())?,
            test_base: ScoredSet::from_set(self.test_base, base_cal.as_ref())?,
            test_esc: ScoredSet::from_set(self.test_esc, esc_cal.as_ref())?,
        })
    }
}

impl ScoredPair {
    pub fn run(&self, bins: usize, budget: usize) -> Result<CascadeRun> {
        let policy = build_policy(&self.val_base, &self.val_esc, bins, budget)?;
        let curve = simulate_cascade(&self.test_base, &self.test_esc, &policy)?;
        let apgr = apgr(&curve);
        Ok(CascadeRun { policy, curve, apgr })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub calibrator: CalibratorChoice,
    pub bins: usize,
    pub apgr: Option<f64>,
}

/// APGR for every (calibrator, bin count) pair, calibrator-major.
pub fn sweep_bins_and_calibrators(
    data: CascadeData<'_>,
    bin_counts: &[usize],
    choices: &[CalibratorChoice],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(bin_counts.len() * choices.len());
    for &choice in choices {
        let scored = data.score(choice, DEFAULT_BINS)?;
        for &bins in bin_counts {
            let run = scored.run(bins, bins)?;
            rows.push(SweepRow {
                calibrator: choice,
                bins,
                apgr: run.apgr,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn partition(bounds: &[f64]) -> BinPartition {
        BinPartition::from_parts(bounds.to_vec(), vec![1; bounds.len() + 1]).unwrap()
    }

    #[test]
    fn two_bin_selection() {
        let p = CascadePolicy::from_advantage(partition(&[0.5]), vec![0.0, 0.3], 1).unwrap();
        assert_eq!(p.selected(), &[0]);
        let p = CascadePolicy::from_advantage(partition(&[0.5]), vec![0.3, 0.0], 1).unwrap();
        assert_eq!(p.selected(), &[1]);
    }

    #[test]
    fn ties_go_to_lower_bin() {
        let p = CascadePolicy::from_advantage(partition(&[0.3, 0.6]), vec![0.1, 0.0, 0.0], 1).unwrap();
        assert_eq!(p.selected_order, vec![1, 2, 0]);
    }

    #[test]
    fn boundary_budgets() {
        let p = CascadePolicy::from_advantage(partition(&[0.3, 0.6]), vec![0.1, 0.2, 0.0], 0).unwrap();
        assert!(p.selected().is_empty());
        for c in [0.0, 0.3, 0.5, 1.0] {
            assert_eq!(p.route(c).unwrap(), Route::Escalate);
        }
        let p = p.with_budget(3).unwrap();
        for c in [0.0, 0.3, 0.5, 1.0] {
            assert_eq!(p.route(c).unwrap(), Route::UseBase);
        }
        assert!(p.with_budget(4).is_err());
        assert!(p.route(1.5).is_err());
    }

    #[test]
    fn build_policy_pairs_by_id() {
        let base = ScoredSet::from_confidences("b", &[0.1, 0.2, 0.8, 0.9], &[0.0, 0.0, 1.0, 1.0]);
        let mut esc = ScoredSet::from_confidences("e", &[0.9, 0.9, 0.8, 0.9], &[1.0, 1.0, 1.0, 1.0]);
        esc.ids.reverse();
        let p = build_policy(&base, &esc, 2, 1).unwrap();
        // reversed esc confidences: [0.9, 0.8, 0.9, 0.9] by id
        assert!((p.advantage[0] - (0.85 - 0.15)).abs() < 1e-12);
        assert!((p.advantage[1] - (0.9 - 0.85)).abs() < 1e-12);
        assert_eq!(p.selected(), &[1]);
        assert_eq!(p.accuracy_advantage.as_deref(), Some(&[1.0, 0.0][..]));
    }

    #[test]
    fn misaligned_sets_rejected() {
        let base = ScoredSet::from_confidences("b", &[0.1, 0.2], &[0.0, 1.0]);
        let esc = ScoredSet::from_confidences("e", &[0.1, 0.2, 0.3], &[0.0, 1.0, 1.0]);
        assert!(build_policy(&base, &esc, 2, 1).is_err());
        assert!(build_policy(&base, &base, 2, 3).is_err());
    }

    #[test]
    fn curve_endpoints_and_flat_pair() {
        let base = ScoredSet::from_confidences("b", &[0.2, 0.4, 0.6, 0.8], &[0.0, 1.0, 0.0, 1.0]);
        let esc = ScoredSet::from_confidences("e", &[0.9, 0.9, 0.9, 0.9], &[1.0, 1.0, 1.0, 0.0]);
        let p = build_policy(&base, &esc, 2, 0).unwrap();
        let curve = simulate_cascade(&base, &esc, &p).unwrap();
        assert_eq!(curve.points.len(), 3);
        assert_eq!(curve.points[0].accuracy, curve.escalation_accuracy);
        assert_eq!(curve.points[0].base_fraction, 0.0);
        assert_eq!(curve.points[2].accuracy, curve.base_accuracy);
        assert_eq!(curve.points[2].base_fraction, 1.0);

        let flat = simulate_cascade(&base, &base, &p).unwrap();
        assert!(flat.points.iter().all(|q| q.accuracy == 0.5));
        assert_eq!(apgr(&flat), None);
    }

    #[test]
    fn random_baseline_examples() {
        assert_eq!(random_baseline(0.7, 0.9, 0.0), 0.9);
        assert_eq!(random_baseline(0.7, 0.9, 1.0), 0.7);
        assert!((random_baseline(0.7, 0.9, 0.5) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn apgr_examples() {
        let linear = [(0.0, 0.5), (0.25, 0.5625), (0.5, 0.625), (1.0, 0.75)];
        assert_eq!(apgr_from_points(&linear, 0.5, 0.75), Some(0.5));
        let constant = [(0.0, 0.75), (0.5, 0.75), (1.0, 0.75)];
        assert_eq!(apgr_from_points(&constant, 0.5, 0.75), Some(1.0));
        let piecewise = [(0.0, 0.0), (0.5, 0.9), (1.0, 1.0)];
        assert!((apgr_from_points(&piecewise, 0.0, 1.0).unwrap() - 0.7).abs() < 1e-12);
        // endpoints are supplied when missing
        assert_eq!(apgr_from_points(&[(0.5, 0.625)], 0.5, 0.75), Some(0.5));
        assert_eq!(apgr_from_points(&linear, 0.6, 0.6), None);
    }

    #[test]
    fn apgr_swaps_roles_when_base_is_stronger() {
        let curve = TradeoffCurve {
            points: vec![
                CurvePoint { budget: 0, base_fraction: 0.0, accuracy: 0.5 },
                CurvePoint { budget: 1, base_fraction: 0.5, accuracy: 0.625 },
                CurvePoint { budget: 2, base_fraction: 1.0, accuracy: 0.75 },
            ],
            base_accuracy: 0.75,
            escalation_accuracy: 0.5,
        };
        assert_eq!(apgr(&curve), Some(0.5));
    }

    #[test]
    fn curve_csv_round_trip() {
        let curve = TradeoffCurve {
            points: vec![
                CurvePoint { budget: 0, base_fraction: 0.0, accuracy: 0.9 },
                CurvePoint { budget: 1, base_fraction: 0.3, accuracy: 0.88 },
                CurvePoint { budget: 2, base_fraction: 1.0, accuracy: 0.7 },
            ],
            base_accuracy: 0.7,
            escalation_accuracy: 0.9,
        };
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("K,p,accuracy\n"));
        assert_eq!(TradeoffCurve::read_csv(buf.as_slice()).unwrap(), curve);
    }
}
