//! A model's calibrated greedy predictions, keyed by sample id.

use crate::calibrate::{score_predictions, CalibratedPrediction, Calibrator};
use crate::error::{Error, Result};
use crate::prediction::{alignment, PredictionSet};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    pub model_id: String,
    pub ids: Vec<String>,
    pub predictions: Vec<CalibratedPrediction>,
    /// Verifier values, present when every record has one.
    pub outcomes: Option<Vec<f64>>,
    /// Given labels, present when every record has one.
    pub labels: Option<Vec<usize>>,
}

impl ScoredSet {
    pub fn from_set(set: &PredictionSet, calibrator: Option<&Calibrator>) -> Result<Self> {
        Ok(ScoredSet {
            model_id: set.model_id().to_string(),
            ids: set.ids().map(str::to_string).collect(),
            predictions: score_predictions(set, calibrator)?,
            outcomes: set.outcomes(),
            labels: set.labels().ok(),
        })
    }

    /// Builds a set from confidences and outcomes alone; ids are `0..n`.
    pub fn from_confidences(model_id: &str, confidences: &[f64], outcomes: &[f64]) -> Self {
        ScoredSet {
            model_id: model_id.to_string(),
            ids: (0..confidences.len()).map(|i| i.to_string()).collect(),
            predictions: confidences
                .iter()
                .map(|&confidence| CalibratedPrediction {
                    top1: None,
                    confidence,
                })
                .collect(),
            outcomes: Some(outcomes.to_vec()),
            labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn confidences(&self) -> Vec<f64> {
        self.predictions.iter().map(|p| p.confidence).collect()
    }

    pub fn require_outcomes(&self) -> Result<&[f64]> {
        self.outcomes
            .as_deref()
            .ok_or_else(|| Error::contract(format!("model {} has no verifier outcomes", self.model_id)))
    }

    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::contract(format!("model {} has records without labels", self.model_id)))
    }

    /// Reorders this set to follow `reference_ids`. Fails unless both
    /// carry exactly the same ids.
    pub fn aligned_to(&self, reference_ids: &[String]) -> Result<ScoredSet> {
        let order = alignment(
            reference_ids.iter().map(String::as_str),
            self.ids.iter().map(String::as_str),
        )?;
        Ok(ScoredSet {
            model_id: self.model_id.clone(),
            ids: order.iter().map(|&i| self.ids[i].clone()).collect(),
            predictions: order.iter().map(|&i| self.predictions[i]).collect(),
            outcomes: self
                .outcomes
                .as_ref()
                .map(|o| order.iter().map(|&i| o[i]).collect()),
            labels: self
                .labels
                .as_ref()
                .map(|l| order.iter().map(|&i| l[i]).collect()),
        })
    }
}
