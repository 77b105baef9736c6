//! Seeded synthetic prediction sets with known ground truth: calibrated and
//! miscalibrated classifiers, complementary model pairs, noisy labels and
//! Platt-style generation outcomes. Output is a pure function of the spec
//! and the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cleaning::{TruthFile, Verdict};
use crate::error::{Error, Result};
use crate::numeric::{sigmoid, softmax};
use crate::prediction::{Payload, PredictionRecord, PredictionSet, Role};

/// Spread of the per-class latent logits.
const LOGIT_SCALE: f64 = 2.0;
/// Extra logit mass on one random class per sample.
const LOGIT_BOOST: f64 = 3.0;
/// Beta concentration of per-sample confidences in `NoisyLabels`.
const CONFIDENCE_CONCENTRATION: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Labels are drawn from `softmax(z / true_temperature)`; `z` is exported.
    CalibratedClassifier {
        classes: usize,
        true_temperature: f64,
        n: usize,
    },
    /// Labels are drawn from `softmax(z)`; `z * distortion_temperature` is exported.
    MiscalibratedClassifier {
        classes: usize,
        distortion_temperature: f64,
        n: usize,
    },
    /// Base and escalation classifiers whose top-1 accuracy follows a
    /// piecewise-linear profile over a shared latent difficulty in `[0, 1]`.
    ComplementaryPair {
        classes: usize,
        n: usize,
        base_profile: Vec<f64>,
        esc_profile: Vec<f64>,
    },
    /// Observed labels flipped at `flip_rate`; one classifier per accuracy,
    /// each calibrated against the clean labels.
    NoisyLabels {
        classes: usize,
        flip_rate: f64,
        model_accuracies: Vec<f64>,
        n: usize,
    },
    /// Generation records with mean chosen-token logit `z ~ N(0, 1)` and
    /// pass/fail outcome `v ~ Bernoulli(σ(a z + b))`.
    PlattGenerator { a: f64, b: f64, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub kind: SyntheticKind,
    pub seed: u64,
}

/// Generated sets (full, unsplit) plus the label-noise truth when applicable.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub sets: Vec<PredictionSet>,
    pub truth: Option<TruthFile>,
}

impl SyntheticKind {
    /// Small/large pair: the escalation model is much better on samples the
    /// base model finds hard and on par on easy ones.
    pub fn small_large_pair(n: usize) -> Self {
        SyntheticKind::ComplementaryPair {
            classes: 10,
            n,
            base_profile: vec![0.25, 0.55, 0.8, 0.95, 0.99],
            esc_profile: vec![0.75, 0.85, 0.92, 0.97, 0.99],
        }
    }

    /// Two models of equal overall accuracy (0.82) whose strengths are
    /// disjoint halves of the latent difficulty axis.
    pub fn same_size_pair(n: usize) -> Self {
        SyntheticKind::ComplementaryPair {
            classes: 10,
            n,
            base_profile: vec![0.65, 0.99],
            esc_profile: vec![0.99, 0.65],
        }
    }

    fn validate(&self) -> Result<()> {
        let unit = |v: f64, what: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::contract(format!("{what} {v} outside [0, 1]")))
            }
        };
        let size = |n: usize| {
            if n >= 1 {
                Ok(())
            } else {
                Err(Error::contract("n must be at least 1"))
            }
        };
        let classes = |c: usize| {
            if c >= 2 {
                Ok(())
            } else {
                Err(Error::contract("classes must be at least 2"))
            }
        };
        let positive = |t: f64| {
            if t > 0.0 && t.is_finite() {
                Ok(())
            } else {
                Err(Error::contract("temperature must be positive"))
            }
        };
        match self {
            SyntheticKind::CalibratedClassifier { classes: c, true_temperature: t, n }
            | SyntheticKind::MiscalibratedClassifier { classes: c, distortion_temperature: t, n } => {
                classes(*c)?;
                positive(*t)?;
                size(*n)
            }
            SyntheticKind::ComplementaryPair { classes: c, n, base_profile, esc_profile } => {
                classes(*c)?;
                size(*n)?;
                for profile in [base_profile, esc_profile] {
                    if profile.is_empty() {
                        return Err(Error::contract("accuracy profile is empty"));
                    }
                    for &v in profile.iter() {
                        unit(v, "profile accuracy")?;
                    }
                }
                Ok(())
            }
            SyntheticKind::NoisyLabels { classes: c, flip_rate, model_accuracies, n } => {
                classes(*c)?;
                size(*n)?;
                unit(*flip_rate, "flip_rate")?;
                if model_accuracies.is_empty() {
                    return Err(Error::contract("at least one model accuracy is required"));
                }
                for &a in model_accuracies {
                    unit(a, "model accuracy")?;
                }
                Ok(())
            }
            SyntheticKind::PlattGenerator { a, b, n } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::contract("Platt parameters must be finite"));
                }
                size(*n)
            }
        }
    }
}

pub fn sample_id(i: usize) -> String {
    format!("s{i:07}")
}

fn draw_categorical(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn latent_logits(rng: &mut ChaCha8Rng, classes: usize) -> Vec<f64> {
    let mut z: Vec<f64> = (0..classes)
        .map(|_| {
            let x: f64 = StandardNormal.sample(rng);
            LOGIT_SCALE * x
        })
        .collect();
    let boosted = rng.random_range(0..classes);
    z[boosted] += LOGIT_BOOST;
    z
}

fn other_class(rng: &mut ChaCha8Rng, classes: usize, avoid: usize) -> usize {
    let k = rng.random_range(0..classes - 1);
    if k >= avoid {
        k + 1
    } else {
        k
    }
}

/// Logits whose softmax puts exactly `confidence` on `top` and spreads the
/// rest evenly.
fn logits_with_top(classes: usize, top: usize, confidence: f64) -> Vec<f64> {
    let mut z = vec![0.0; classes];
    z[top] = (confidence * (classes - 1) as f64 / (1.0 - confidence)).ln();
    z
}

/// Keeps a top-1 confidence strictly above the uniform level and below 1.
fn clamp_top_confidence(c: f64, classes: usize) -> f64 {
    c.clamp(1.0 / classes as f64 + 0.01, 0.995)
}

fn interpolate(profile: &[f64], u: f64) -> f64 {
    if profile.len() == 1 {
        return profile[0];
    }
    let x = u * (profile.len() - 1) as f64;
    let i = (x.floor() as usize).min(profile.len() - 2);
    let t = x - i as f64;
    profile[i] + t * (profile[i + 1] - profile[i])
}

fn classifier_record(id: String, z: Vec<f64>, label: usize) -> PredictionRecord {
    PredictionRecord {
        sample_id: id,
        payload: Payload::ClassLogits(z),
        label: Some(label),
        verified: None,
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.kind.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rng = &mut rng;
    match &spec.kind {
        SyntheticKind::CalibratedClassifier { classes, true_temperature, n } => {
            let records = (0..*n)
                .map(|i| {
                    let z = latent_logits(rng, *classes);
                    let scaled: Vec<f64> = z.iter().map(|v| v / true_temperature).collect();
                    let label = draw_categorical(rng, &softmax(&scaled));
                    classifier_record(sample_id(i), z, label)
                })
                .collect();
            Ok(SyntheticData {
                sets: vec![PredictionSet::new("classifier", Role::Validation, Some(*classes), records)?],
                truth: None,
            })
        }
        SyntheticKind::MiscalibratedClassifier { classes, distortion_temperature, n } => {
            let records = (0..*n)
                .map(|i| {
                    let z = latent_logits(rng, *classes);
                    let label = draw_categorical(rng, &softmax(&z));
                    let exported = z.iter().map(|v| v * distortion_temperature).collect();
                    classifier_record(sample_id(i), exported, label)
                })
                .collect();
            Ok(SyntheticData {
                sets: vec![PredictionSet::new("classifier", Role::Validation, Some(*classes), records)?],
                truth: None,
            })
        }
        SyntheticKind::ComplementaryPair { classes, n, base_profile, esc_profile } => {
            let c = *classes;
            let mut base = Vec::with_capacity(*n);
            let mut esc = Vec::with_capacity(*n);
            for i in 0..*n {
                let u: f64 = rng.random();
                let label = rng.random_range(0..c);
                for (profile, out) in [(base_profile, &mut base), (esc_profile, &mut esc)] {
                    let conf = clamp_top_confidence(interpolate(profile, u), c);
                    let top = if rng.random_bool(conf) {
                        label
                    } else {
                        other_class(rng, c, label)
                    };
                    out.push(classifier_record(sample_id(i), logits_with_top(c, top, conf), label));
                }
            }
            Ok(SyntheticData {
                sets: vec![
                    PredictionSet::new("base", Role::Validation, Some(c), base)?,
                    PredictionSet::new("esc", Role::Validation, Some(c), esc)?,
                ],
                truth: None,
            })
        }
        SyntheticKind::NoisyLabels { classes, flip_rate, model_accuracies, n } => {
            let c = *classes;
            let betas = model_accuracies
                .iter()
                .map(|&acc| {
                    let acc = acc.clamp(1e-3, 1.0 - 1e-3);
                    Beta::new(acc * CONFIDENCE_CONCENTRATION, (1.0 - acc) * CONFIDENCE_CONCENTRATION)
                        .map_err(|e| Error::contract(format!("invalid accuracy: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut models: Vec<Vec<PredictionRecord>> = vec![Vec::with_capacity(*n); betas.len()];
            let mut truth = TruthFile::default();
            for i in 0..*n {
                let clean = rng.random_range(0..c);
                let flipped = rng.random_bool(*flip_rate);
                let observed = if flipped { other_class(rng, c, clean) } else { clean };
                truth.verdicts.insert(
                    sample_id(i),
                    if flipped { Verdict::GtWrong } else { Verdict::OnlyGtCorrect },
                );
                for (beta, out) in betas.iter().zip(models.iter_mut()) {
                    let conf = clamp_top_confidence(beta.sample(rng), c);
                    let top = if rng.random_bool(conf) {
                        clean
                    } else {
                        other_class(rng, c, clean)
                    };
                    out.push(classifier_record(sample_id(i), logits_with_top(c, top, conf), observed));
                }
            }
            let sets = models
                .into_iter()
                .enumerate()
                .map(|(j, records)| PredictionSet::new(format!("m{}", j + 1), Role::Validation, Some(c), records))
                .collect::<Result<Vec<_>>>()?;
            Ok(SyntheticData {
                sets,
                truth: Some(truth),
            })
        }
        SyntheticKind::PlattGenerator { a, b, n } => {
            let jitter = Normal::new(0.0, 0.5).expect("valid normal");
            let records = (0..*n)
                .map(|i| {
                    let z_bar: f64 = StandardNormal.sample(rng);
                    let verified = u8::from(rng.random_bool(sigmoid(a * z_bar + b)));
                    let len = rng.random_range(1..=6usize);
                    let mut deviations: Vec<f64> = (0..len - 1).map(|_| jitter.sample(rng)).collect();
                    deviations.push(-deviations.iter().sum::<f64>());
                    PredictionRecord {
                        sample_id: sample_id(i),
                        payload: Payload::TokenLogits(deviations.iter().map(|d| z_bar + d).collect()),
                        label: None,
                        verified: Some(verified),
                    }
                })
                .collect();
            Ok(SyntheticData {
                sets: vec![PredictionSet::new("generator", Role::Validation, None, records)?],
                truth: None,
            })
        }
    }
}
