//! Mislabeled-sample detection: ensemble top-1 disagreement, the same rule
//! gated by per-model high-accuracy confidence bins, and the class-average
//! threshold rule of Confident Learning. Precision is scored against an
//! annotator truth file.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::binning::{equal_count_partition, reliability_stats, BinPartition};
use crate::error::{Error, Result};
use crate::numeric::argmax;
use crate::scored::ScoredSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum CleaningMethod {
    Basic,
    Calibrated {
        #[serde(rename = "K")]
        budget: usize,
    },
    ConfidentLearning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagEntry {
    pub sample_id: String,
    pub label: usize,
    /// Per-model greedy prediction.
    pub top1: Vec<usize>,
    /// Per-model calibrated confidence of that prediction.
    pub confidence: Vec<f64>,
    /// Per-model rank of the sample's confidence bin (0 = most accurate bin).
    pub bin_rank: Vec<Option<usize>>,
    /// Smallest budget at which the confidence gate admits the sample.
    pub min_budget: Option<usize>,
    /// Class proposed by Confident Learning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggested: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub method: CleaningMethod,
    pub dataset_size: usize,
    /// Flagged samples sorted by sample id.
    pub flagged: Vec<FlagEntry>,
    /// Classes without any labelled sample (Confident Learning only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded_classes: Vec<usize>,
}

impl CleaningReport {
    pub fn flagged_ids(&self) -> BTreeSet<&str> {
        self.flagged.iter().map(|f| f.sample_id.as_str()).collect()
    }

    pub fn detection_rate(&self) -> f64 {
        if self.dataset_size == 0 {
            0.0
        } else {
            self.flagged.len() as f64 / self.dataset_size as f64
        }
    }

    /// `sample_id,top1_m1,conf_m1,bin_m1,...,flagged_at_K`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let models = self.flagged.first().map_or(0, |f| f.top1.len());
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["sample_id".to_string()];
        for m in 1..=models {
            header.push(format!("top1_m{m}"));
            header.push(format!("conf_m{m}"));
            header.push(format!("bin_m{m}"));
        }
        header.push("flagged_at_K".into());
        writer.write_record(&header)?;
        for entry in &self.flagged {
            let mut row = vec![entry.sample_id.clone()];
            for m in 0..models {
                row.push(entry.top1[m].to_string());
                row.push(format!("{:?}", entry.confidence[m]));
                row.push(entry.bin_rank[m].map(|r| r.to_string()).unwrap_or_default());
            }
            row.push(entry.min_budget.map(|k| k.to_string()).unwrap_or_default());
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// One model's aligned greedy predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelColumn {
    pub model_id: String,
    pub top1: Vec<usize>,
    pub confidence: Vec<f64>,
}

/// `m` calibrated classifiers aligned on one labelled dataset, ordered by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub models: Vec<ModelColumn>,
}

impl Ensemble {
    /// Aligns the sets by sample id. Labels come from the first set.
    pub fn new(sets: &[ScoredSet]) -> Result<Self> {
        let first = sets
            .first()
            .ok_or_else(|| Error::contract("cleaning needs at least one model"))?;
        let mut ids = first.ids.clone();
        ids.sort();
        let reference = first.aligned_to(&ids)?;
        let labels = reference.require_labels()?.to_vec();
        let mut models = Vec::with_capacity(sets.len());
        for set in sets {
            let aligned = set.aligned_to(&ids)?;
            let top1 = aligned
                .predictions
                .iter()
                .map(|p| {
                    p.top1.ok_or_else(|| {
                        Error::contract(format!("model {} has no top-1 predictions", set.model_id))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            models.push(ModelColumn {
                model_id: set.model_id.clone(),
                top1,
                confidence: aligned.confidences(),
            });
        }
        Ok(Ensemble { ids, labels, models })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn unanimous_disagreement(&self, i: usize) -> bool {
        self.models.iter().all(|m| m.top1[i] != self.labels[i])
    }

    fn entry(&self, i: usize, gates: Option<&[ConfidenceGate]>) -> FlagEntry {
        let bin_rank: Vec<Option<usize>> = match gates {
            Some(gates) => self
                .models
                .iter()
                .zip(gates)
                .map(|(m, g)| Some(g.rank(m.confidence[i])))
                .collect(),
            None => vec![None; self.models.len()],
        };
        let min_budget = bin_rank
            .iter()
            .map(|r| r.map(|r| r + 1))
            .collect::<Option<Vec<_>>>()
            .and_then(|v| v.into_iter().max());
        FlagEntry {
            sample_id: self.ids[i].clone(),
            label: self.labels[i],
            top1: self.models.iter().map(|m| m.top1[i]).collect(),
            confidence: self.models.iter().map(|m| m.confidence[i]).collect(),
            bin_rank,
            min_budget,
            suggested: None,
        }
    }
}

/// How the `K` admitted bins of a confidence gate are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateSelection {
    /// Highest validation accuracy, ties by higher mean confidence then higher bin.
    Accuracy,
    /// Highest mean confidence, ties by higher bin.
    Confidence,
}

/// A model's validation bins ranked from most to least trustworthy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceGate {
    pub partition: BinPartition,
    /// Bin indices, best first.
    pub ranking: Vec<usize>,
    #[serde(skip)]
    rank_of_bin: Vec<usize>,
}

impl ConfidenceGate {
    pub fn fit(
        confidences: &[f64],
        outcomes: &[f64],
        bins: usize,
        selection: GateSelection,
    ) -> Result<Self> {
        let partition = equal_count_partition(confidences, bins)?;
        let table = reliability_stats(confidences, outcomes, &partition)?;
        let key = |bin: usize| {
            let row = &table.rows[bin];
            let acc = row.mean_acc.unwrap_or(f64::NEG_INFINITY);
            let conf = row.mean_conf.unwrap_or(f64::NEG_INFINITY);
            match selection {
                GateSelection::Accuracy => (acc, conf),
                GateSelection::Confidence => (conf, f64::NEG_INFINITY),
            }
        };
        let mut ranking: Vec<usize> = (0..bins).collect();
        ranking.sort_by(|&a, &b| {
            let (ka, kb) = (key(a), key(b));
            kb.0.total_cmp(&ka.0)
                .then(kb.1.total_cmp(&ka.1))
                .then(b.cmp(&a))
        });
        Ok(Self::from_ranking(partition, ranking))
    }

    /// Fits a gate on a calibrated validation set.
    pub fn fit_scored(val: &ScoredSet, bins: usize, selection: GateSelection) -> Result<Self> {
        Self::fit(&val.confidences(), val.require_outcomes()?, bins, selection)
    }

    fn from_ranking(partition: BinPartition, ranking: Vec<usize>) -> Self {
        let mut rank_of_bin = vec![0; ranking.len()];
        for (rank, &bin) in ranking.iter().enumerate() {
            rank_of_bin[bin] = rank;
        }
        ConfidenceGate {
            partition,
            ranking,
            rank_of_bin,
        }
    }

    pub fn bin_count(&self) -> usize {
        self.partition.bin_count()
    }

    /// Rank (0 = best) of the bin containing `c`; out-of-range values clamp to the edge bins.
    pub fn rank(&self, c: f64) -> usize {
        self.rank_of_bin[self.partition.assign(c)]
    }
}

/// Flags a sample iff every model's top-1 differs from its label.
pub fn clean_basic(ensemble: &Ensemble) -> CleaningReport {
    let flagged = (0..ensemble.len())
        .filter(|&i| ensemble.unanimous_disagreement(i))
        .map(|i| ensemble.entry(i, None))
        .collect();
    CleaningReport {
        method: CleaningMethod::Basic,
        dataset_size: ensemble.len(),
        flagged,
        excluded_classes: Vec::new(),
    }
}

fn check_gates(ensemble: &Ensemble, gates: &[ConfidenceGate]) -> Result<()> {
    if gates.len() != ensemble.models.len() {
        return Err(Error::contract(format!(
            "{} confidence gates for {} models",
            gates.len(),
            ensemble.models.len()
        )));
    }
    Ok(())
}

fn gated_report(ensemble: &Ensemble, gates: &[ConfidenceGate], budget: usize) -> CleaningReport {
    let flagged = (0..ensemble.len())
        .filter(|&i| ensemble.unanimous_disagreement(i))
        .map(|i| ensemble.entry(i, Some(gates)))
        .filter(|e| e.min_budget.is_some_and(|k| k <= budget))
        .collect();
    CleaningReport {
        method: CleaningMethod::Calibrated { budget },
        dataset_size: ensemble.len(),
        flagged,
        excluded_classes: Vec::new(),
    }
}

/// Basic disagreement, further requiring every model's confidence to fall
/// in one of its `K` best validation bins.
pub fn clean_calibrated(
    ensemble: &Ensemble,
    gates: &[ConfidenceGate],
    budget: usize,
) -> Result<CleaningReport> {
    check_gates(ensemble, gates)?;
    for gate in gates {
        if budget < 1 || budget > gate.bin_count() {
            return Err(Error::contract(format!(
                "budget {budget} outside [1, {}]",
                gate.bin_count()
            )));
        }
    }
    Ok(gated_report(ensemble, gates, budget))
}

/// `clean_calibrated` for each budget in `budgets`.
pub fn calibrated_sweep(
    ensemble: &Ensemble,
    gates: &[ConfidenceGate],
    budgets: &[usize],
) -> Result<Vec<CleaningReport>> {
    budgets
        .iter()
        .map(|&k| clean_calibrated(ensemble, gates, k))
        .collect()
}

/// Class-threshold rule: class `Y` is a candidate for a sample when its
/// probability exceeds the mean probability of `Y` over samples labelled
/// `Y`; the sample is flagged when the most probable candidate differs from
/// its label. Classes with no labelled sample are excluded from candidates.
pub fn clean_confident_learning(
    ids: &[String],
    probs: &[Vec<f64>],
    labels: &[usize],
) -> Result<CleaningReport> {
    if probs.len() != labels.len() || ids.len() != labels.len() {
        return Err(Error::contract("ids, probabilities and labels are misaligned"));
    }
    let classes = probs.first().map_or(0, Vec::len);
    if probs.iter().any(|p| p.len() != classes) {
        return Err(Error::contract("probability vectors differ in length"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::contract(format!("label {bad} out of range")));
    }

    let mut sums = vec![0.0; classes];
    let mut counts = vec![0usize; classes];
    for (p, &y) in probs.iter().zip(labels) {
        sums[y] += p[y];
        counts[y] += 1;
    }
    let thresholds: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
        .collect();
    let excluded_classes = (0..classes).filter(|&c| counts[c] == 0).collect();

    let mut flagged = Vec::new();
    for (i, p) in probs.iter().enumerate() {
        let mut best: Option<usize> = None;
        for (class, t) in thresholds.iter().enumerate() {
            let Some(t) = t else { continue };
            if p[class] > *t && best.is_none_or(|b| p[class] > p[b]) {
                best = Some(class);
            }
        }
        if let Some(suggested) = best.filter(|&b| b != labels[i]) {
            let top = argmax(p);
            flagged.push(FlagEntry {
                sample_id: ids[i].clone(),
                label: labels[i],
                top1: vec![top],
                confidence: vec![p[top]],
                bin_rank: vec![None],
                min_budget: None,
                suggested: Some(suggested),
            });
        }
    }
    flagged.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(CleaningReport {
        method: CleaningMethod::ConfidentLearning,
        dataset_size: ids.len(),
        flagged,
        excluded_classes,
    })
}

// ---------------------------------------------------------------------------
// truth files and precision

/// Annotator verdict categories 1-4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The given label is wrong.
    GtWrong = 1,
    /// Both the given label and the model prediction are acceptable.
    GtAndModelCorrect = 2,
    /// Only the given label is correct.
    OnlyGtCorrect = 3,
    Undetermined = 4,
}

impl Verdict {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Verdict::GtWrong),
            2 => Some(Verdict::GtAndModelCorrect),
            3 => Some(Verdict::OnlyGtCorrect),
            4 => Some(Verdict::Undetermined),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TruthFile {
    pub verdicts: BTreeMap<String, Verdict>,
}

impl TruthFile {
    /// Reads `sample_id,verdict` rows with verdict codes 1-4.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let mut verdicts = BTreeMap::new();
        for (i, row) in reader.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::parse(line, e.to_string()))?;
            let id = row.get(0).map(str::trim).unwrap_or("");
            let code = row.get(1).map(str::trim).unwrap_or("");
            if id.is_empty() {
                return Err(Error::parse(line, "missing sample_id"));
            }
            let verdict = code
                .parse::<u8>()
                .ok()
                .and_then(Verdict::from_code)
                .ok_or_else(|| Error::parse(line, format!("verdict {code:?} is not in 1..4")))?;
            if verdicts.insert(id.to_string(), verdict).is_some() {
                return Err(Error::parse(line, format!("duplicate sample_id {id:?}")));
            }
        }
        Ok(TruthFile { verdicts })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["sample_id", "verdict"])?;
        for (id, v) in &self.verdicts {
            writer.write_record([id.as_str(), &v.code().to_string()])?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Precision over the given ids: `GtWrong` counts as correct, categories
    /// 2 and 3 as incorrect, 4 and uncovered ids are left out.
    pub fn score<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> VerdictCounts {
        let mut counts = VerdictCounts::default();
        for id in ids {
            match self.verdicts.get(id) {
                Some(Verdict::GtWrong) => counts.gt_wrong += 1,
                Some(Verdict::GtAndModelCorrect) => counts.gt_and_model_correct += 1,
                Some(Verdict::OnlyGtCorrect) => counts.only_gt_correct += 1,
                Some(Verdict::Undetermined) => counts.undetermined += 1,
                None => counts.uncovered += 1,
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub gt_wrong: usize,
    pub gt_and_model_correct: usize,
    pub only_gt_correct: usize,
    pub undetermined: usize,
    pub uncovered: usize,
}

impl VerdictCounts {
    /// Samples with a decisive verdict.
    pub fn judged(&self) -> usize {
        self.gt_wrong + self.gt_and_model_correct + self.only_gt_correct
    }

    pub fn precision(&self) -> Option<f64> {
        let judged = self.judged();
        (judged > 0).then(|| self.gt_wrong as f64 / judged as f64)
    }

    /// Binomial standard error of `precision`.
    pub fn std_error(&self) -> Option<f64> {
        self.precision()
            .map(|p| (p * (1.0 - p) / self.judged() as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionPoint {
    pub method: CleaningMethod,
    pub flagged: usize,
    pub detection_rate: f64,
    pub precision: Option<f64>,
    pub std_error: Option<f64>,
    pub counts: VerdictCounts,
}

pub fn precision_point(report: &CleaningReport, truth: &TruthFile) -> PrecisionPoint {
    let counts = truth.score(report.flagged.iter().map(|f| f.sample_id.as_str()));
    PrecisionPoint {
        method: report.method,
        flagged: report.flagged.len(),
        detection_rate: report.detection_rate(),
        precision: counts.precision(),
        std_error: counts.std_error(),
        counts,
    }
}

/// One precision/detection-rate point per report.
pub fn precision_detection_curve(reports: &[CleaningReport], truth: &TruthFile) -> Vec<PrecisionPoint> {
    reports.iter().map(|r| precision_point(r, truth)).collect()
}

pub fn write_curve_csv<W: Write>(points: &[PrecisionPoint], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([
        "method",
        "K",
        "flagged",
        "detection_rate",
        "precision",
        "std_error",
        "gt_wrong",
        "gt_and_model_correct",
        "only_gt_correct",
        "undetermined",
        "uncovered",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    for p in points {
        let (name, k) = match p.method {
            CleaningMethod::Basic => ("basic", String::new()),
            CleaningMethod::Calibrated { budget } => ("calibrated", budget.to_string()),
            CleaningMethod::ConfidentLearning => ("confident_learning", String::new()),
        };
        writer.write_record([
            name.to_string(),
            k,
            p.flagged.to_string(),
            format!("{:?}", p.detection_rate),
            opt(p.precision),
            opt(p.std_error),
            p.counts.gt_wrong.to_string(),
            p.counts.gt_and_model_correct.to_string(),
            p.counts.only_gt_correct.to_string(),
            p.counts.undetermined.to_string(),
            p.counts.uncovered.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapTable {
    pub method_a: CleaningMethod,
    pub method_b: CleaningMethod,
    pub both: usize,
    pub only_a: usize,
    pub only_b: usize,
    pub precision_both: Option<f64>,
    pub precision_only_a: Option<f64>,
    pub precision_only_b: Option<f64>,
}

/// Overlap of two reports over the same dataset, with per-region precision
/// when a truth file is given.
pub fn compare_methods(
    a: &CleaningReport,
    b: &CleaningReport,
    truth: Option<&TruthFile>,
) -> Result<OverlapTable> {
    if a.dataset_size != b.dataset_size {
        return Err(Error::contract(format!(
            "reports cover different datasets ({} vs {} samples)",
            a.dataset_size, b.dataset_size
        )));
    }
    let (ids_a, ids_b) = (a.flagged_ids(), b.flagged_ids());
    let both: Vec<&str> = ids_a.intersection(&ids_b).copied().collect();
    let only_a: Vec<&str> = ids_a.difference(&ids_b).copied().collect();
    let only_b: Vec<&str> = ids_b.difference(&ids_a).copied().collect();
    let precision = |ids: &[&str]| truth.and_then(|t| t.score(ids.iter().copied()).precision());
    Ok(OverlapTable {
        method_a: a.method,
        method_b: b.method,
        both: both.len(),
        only_a: only_a.len(),
        only_b: only_b.len(),
        precision_both: precision(&both),
        precision_only_a: precision(&only_a),
        precision_only_b: precision(&only_b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::CalibratedPrediction;

    fn scored(model: &str, rows: &[(&str, usize, f64, usize)]) -> ScoredSet {
        ScoredSet {
            model_id: model.into(),
            ids: rows.iter().map(|r| r.0.to_string()).collect(),
            predictions: rows
                .iter()
                .map(|r| CalibratedPrediction {
                    top1: Some(r.1),
                    confidence: r.2,
                })
                .collect(),
            outcomes: Some(rows.iter().map(|r| f64::from(u8::from(r.1 == r.3))).collect()),
            labels: Some(rows.iter().map(|r| r.3).collect()),
        }
    }

    #[test]
    fn unanimous_disagreement_flags() {
        let a = scored("a", &[("x", 3, 0.9, 1), ("y", 1, 0.9, 1)]);
        let b = scored("b", &[("x", 3, 0.8, 1), ("y", 2, 0.8, 1)]);
        let report = clean_basic(&Ensemble::new(&[a, b]).unwrap());
        assert_eq!(report.flagged_ids().into_iter().collect::<Vec<_>>(), ["x"]);
        assert_eq!(report.detection_rate(), 0.5);
    }

    #[test]
    fn single_model_is_error_set() {
        let a = scored("a", &[("x", 0, 0.9, 1), ("y", 1, 0.9, 1), ("z", 2, 0.4, 0)]);
        let report = clean_basic(&Ensemble::new(&[a]).unwrap());
        assert_eq!(report.flagged_ids().into_iter().collect::<Vec<_>>(), ["x", "z"]);
    }

    #[test]
    fn ensemble_orders_by_id_and_needs_alignment() {
        let a = scored("a", &[("b", 0, 0.9, 1), ("a", 1, 0.9, 1)]);
        let b = scored("b", &[("a", 0, 0.9, 1)]);
        assert!(Ensemble::new(&[a.clone(), b]).is_err());
        let e = Ensemble::new(&[a]).unwrap();
        assert_eq!(e.ids, ["a", "b"]);
        assert!(Ensemble::new(&[]).is_err());
    }

    #[test]
    fn gate_blocks_low_confidence_model() {
        let a = scored("a", &[("x", 3, 0.95, 1)]);
        let b = scored("b", &[("x", 3, 0.05, 1)]);
        let ensemble = Ensemble::new(&[a, b]).unwrap();
        let val_conf = [0.05, 0.1, 0.9, 0.95];
        let val_out = [0.0, 0.0, 1.0, 1.0];
        let gate = ConfidenceGate::fit(&val_conf, &val_out, 2, GateSelection::Accuracy).unwrap();
        assert_eq!(gate.ranking, vec![1, 0]);
        let gates = vec![gate.clone(), gate];
        assert!(clean_calibrated(&ensemble, &gates, 1).unwrap().flagged.is_empty());
        assert_eq!(clean_calibrated(&ensemble, &gates, 2).unwrap().flagged.len(), 1);
        assert!(clean_calibrated(&ensemble, &gates, 0).is_err());
        assert!(clean_calibrated(&ensemble, &gates, 3).is_err());
        assert!(clean_calibrated(&ensemble, &gates[..1], 1).is_err());
    }

    #[test]
    fn gate_ties_prefer_higher_confidence_then_higher_bin() {
        let conf = [0.1, 0.2, 0.5, 0.6, 0.8, 0.9];
        let out = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let gate = ConfidenceGate::fit(&conf, &out, 3, GateSelection::Accuracy).unwrap();
        assert_eq!(gate.ranking, vec![2, 1, 0]);
        let gate = ConfidenceGate::fit(&conf, &out, 3, GateSelection::Confidence).unwrap();
        assert_eq!(gate.ranking, vec![2, 1, 0]);
    }

    #[test]
    fn confident_learning_hand_trace() {
        let ids: Vec<String> = ["s1", "s2", "s3"].iter().map(|s| s.to_string()).collect();
        let probs = vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.1, 0.9]];
        let labels = [0, 0, 1];
        let report = clean_confident_learning(&ids, &probs, &labels).unwrap();
        // thresholds: c(0) = 0.55, c(1) = 0.9; no sample has a differing candidate
        assert!(report.flagged.is_empty());

        let probs = vec![vec![0.9, 0.1], vec![0.05, 0.95], vec![0.1, 0.9]];
        let report = clean_confident_learning(&ids, &probs, &labels).unwrap();
        assert_eq!(report.flagged.len(), 1);
        assert_eq!(report.flagged[0].sample_id, "s2");
        assert_eq!(report.flagged[0].suggested, Some(1));
    }

    #[test]
    fn confident_learning_one_hot_never_flags() {
        let ids: Vec<String> = (0..3).map(|i| i.to_string()).collect();
        let probs = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.2, 0.3, 0.5]];
        let report = clean_confident_learning(&ids, &probs[..], &[0, 1, 2]).unwrap();
        assert!(report.flagged.iter().all(|f| f.sample_id == "2"));
        assert!(!report.flagged_ids().contains("0"));
    }

    #[test]
    fn confident_learning_excludes_absent_class() {
        let ids: Vec<String> = (0..2).map(|i| i.to_string()).collect();
        let probs = vec![vec![0.1, 0.2, 0.7], vec![0.6, 0.3, 0.1]];
        let report = clean_confident_learning(&ids, &probs, &[0, 1]).unwrap();
        assert_eq!(report.excluded_classes, vec![2]);
        // thresholds c(0) = 0.1, c(1) = 0.3; class 2 is never a candidate
        assert_eq!(report.flagged.len(), 1);
        assert_eq!(report.flagged[0].sample_id, "1");
        assert_eq!(report.flagged[0].suggested, Some(0));
    }

    #[test]
    fn truth_csv_and_precision() {
        let text = "sample_id,verdict\na,1\nb,1\nc,3\nd,4\n";
        let truth = TruthFile::read_csv(text.as_bytes()).unwrap();
        let counts = truth.score(["a", "b", "c", "d", "e"]);
        assert_eq!(counts.judged(), 3);
        assert_eq!(counts.uncovered, 1);
        assert!((counts.precision().unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(TruthFile::read_csv("sample_id,verdict\na,5\n".as_bytes()).is_err());
        assert_eq!(truth.score(["e"]).precision(), None);

        let mut buf = Vec::new();
        truth.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }

    #[test]
    fn empty_flag_set_has_no_precision() {
        let report = CleaningReport {
            method: CleaningMethod::Calibrated { budget: 1 },
            dataset_size: 10,
            flagged: vec![],
            excluded_classes: vec![],
        };
        let point = precision_point(&report, &TruthFile::default());
        assert_eq!(point.detection_rate, 0.0);
        assert_eq!(point.precision, None);
    }

    #[test]
    fn overlap_identities() {
        let a = scored("a", &[("x", 3, 0.9, 1), ("y", 2, 0.9, 1), ("z", 1, 0.9, 1)]);
        let basic = clean_basic(&Ensemble::new(&[a]).unwrap());
        let t = compare_methods(&basic, &basic, None).unwrap();
        assert_eq!((t.both, t.only_a, t.only_b), (2, 0, 0));
        let empty = CleaningReport { flagged: vec![], ..basic.clone() };
        let t = compare_methods(&basic, &empty, None).unwrap();
        assert_eq!((t.both, t.only_a, t.only_b), (0, 2, 0));
        let other = CleaningReport { dataset_size: 4, ..basic.clone() };
        assert!(compare_methods(&basic, &other, None).is_err());
    }
}
