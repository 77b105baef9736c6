use std::collections::BTreeSet;

use confcal::cleaning::{
    calibrated_sweep, clean_basic, clean_confident_learning, compare_methods, precision_detection_curve,
    ConfidenceGate, GateSelection,
};
use confcal::synth::generate;
use confcal::{Ensemble, PredictionSet, ScoredSet, SyntheticKind, SyntheticSpec, TruthFile, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Class thresholds, candidate sets and the flag rule written out literally.
fn cl_literal(probs: &[Vec<f64>], labels: &[usize]) -> BTreeSet<usize> {
    let classes = probs[0].len();
    let mut flagged = BTreeSet::new();
    let mut threshold = vec![None; classes];
    for y in 0..classes {
        let members: Vec<&Vec<f64>> = probs.iter().zip(labels).filter(|(_, &l)| l == y).map(|(p, _)| p).collect();
        if !members.is_empty() {
            threshold[y] = Some(members.iter().map(|p| p[y]).sum::<f64>() / members.len() as f64);
        }
    }
    for (i, p) in probs.iter().enumerate() {
        let candidates: Vec<usize> = (0..classes)
            .filter(|&y| threshold[y].is_some_and(|t| p[y] > t))
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let mut star = candidates[0];
        for &y in &candidates {
            if p[y] > p[star] {
                star = y;
            }
        }
        if star != labels[i] {
            flagged.insert(i);
        }
    }
    flagged
}

#[test]
fn confident_learning_matches_literal_transcription() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..50 {
        let classes = rng.random_range(2..=5);
        let n = rng.random_range(1..=200);
        let probs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..classes).map(|_| (rng.random_range(0..8) as f64 + 0.1).powi(2)).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|r| r / s).collect()
            })
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let ids: Vec<String> = (0..n).map(|i| format!("{i:04}")).collect();
        let report = clean_confident_learning(&ids, &probs, &labels).unwrap();
        let got: BTreeSet<usize> = report.flagged.iter().map(|f| f.sample_id.parse().unwrap()).collect();
        assert_eq!(got, cl_literal(&probs, &labels));
    }
}

fn noisy(n: usize, seed: u64) -> (Vec<PredictionSet>, TruthFile) {
    let spec = SyntheticSpec {
        kind: SyntheticKind::NoisyLabels {
            classes: 10,
            flip_rate: 0.05,
            model_accuracies: vec![0.9, 0.9],
            n,
        },
        seed,
    };
    let data = generate(&spec).unwrap();
    (data.sets, data.truth.unwrap())
}

#[test]
fn noisy_label_cleaning_nests_and_tracks_the_flip_mask() {
    let (sets, truth) = noisy(20_000, 3);
    let halves: Vec<(PredictionSet, PredictionSet)> = sets.iter().map(PredictionSet::split_half).collect();
    let val: Vec<ScoredSet> = halves.iter().map(|h| ScoredSet::from_set(&h.0, None).unwrap()).collect();
    let test: Vec<ScoredSet> = halves.iter().map(|h| ScoredSet::from_set(&h.1, None).unwrap()).collect();
    let gates: Vec<ConfidenceGate> = val
        .iter()
        .map(|v| ConfidenceGate::fit_scored(v, 15, GateSelection::Accuracy).unwrap())
        .collect();
    let ensemble = Ensemble::new(&test).unwrap();
    let basic = clean_basic(&ensemble);

    // per-sample oracle for the basic rule
    let want: BTreeSet<&str> = (0..ensemble.len())
        .filter(|&i| test.iter().all(|m| {
            let j = m.ids.iter().position(|id| *id == ensemble.ids[i]).unwrap();
            m.predictions[j].top1 != Some(m.labels.as_ref().unwrap()[j])
        }))
        .map(|i| ensemble.ids[i].as_str())
        .collect();
    assert_eq!(basic.flagged_ids(), want);

    let budgets: Vec<usize> = (1..=15).collect();
    let sweep = calibrated_sweep(&ensemble, &gates, &budgets).unwrap();
    for w in sweep.windows(2) {
        assert!(w[0].flagged_ids().is_subset(&w[1].flagged_ids()));
    }
    assert_eq!(sweep[14].flagged_ids(), basic.flagged_ids());

    let curve = precision_detection_curve(&sweep, &truth);
    for (point, report) in curve.iter().zip(&sweep) {
        let flips = report
            .flagged
            .iter()
            .filter(|f| truth.verdicts[&f.sample_id] == Verdict::GtWrong)
            .count();
        assert_eq!(point.flagged, report.flagged.len());
        assert_eq!(point.detection_rate, report.flagged.len() as f64 / 10_000.0);
        if report.flagged.is_empty() {
            assert_eq!(point.precision, None);
        } else {
            assert_eq!(point.precision, Some(flips as f64 / report.flagged.len() as f64));
        }
    }
    assert!(curve[0].precision.unwrap() >= curve[14].precision.unwrap() + 0.02);
}

#[test]
fn basic_flag_count_near_expectation() {
    let (sets, _) = noisy(10_000, 8);
    let scored: Vec<ScoredSet> = sets.iter().map(|s| ScoredSet::from_set(s, None).unwrap()).collect();
    let report = clean_basic(&Ensemble::new(&scored).unwrap());

    // Monte-Carlo estimate of the per-sample flag probability under the generator's model
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let trials = 400_000;
    let mut hits = 0usize;
    let beta = rand_distr::Beta::new(3.6, 0.4).unwrap();
    for _ in 0..trials {
        use rand_distr::Distribution;
        let flipped = rng.random_bool(0.05);
        let all_miss = (0..2).all(|_| {
            let raw: f64 = beta.sample(&mut rng);
            let c = raw.clamp(0.11, 0.995);
            let correct_clean = rng.random_bool(c);
            if flipped {
                // wrong class lands on the observed label with probability 1/9
                correct_clean || rng.random_range(0..9) != 0
            } else {
                !correct_clean
            }
        });
        hits += usize::from(all_miss);
    }
    let p = hits as f64 / trials as f64;
    let expect = p * 10_000.0;
    let sigma = (10_000.0 * p * (1.0 - p)).sqrt();
    let got = report.flagged.len() as f64;
    assert!((got - expect).abs() < 3.0 * sigma + 0.01 * expect, "{got} vs {expect}");
}

#[test]
fn overlap_regions_partition_the_union() {
    let (sets, truth) = noisy(4000, 21);
    let scored: Vec<ScoredSet> = sets.iter().map(|s| ScoredSet::from_set(s, None).unwrap()).collect();
    let ensemble = Ensemble::new(&scored).unwrap();
    let basic = clean_basic(&ensemble);
    let probs = confcal::calibrate::class_probabilities(&sets[0], None).unwrap();
    let cl = clean_confident_learning(&scored[0].ids, &probs, scored[0].labels.as_ref().unwrap()).unwrap();
    let table = compare_methods(&basic, &cl, Some(&truth)).unwrap();
    let union: BTreeSet<&str> = basic.flagged_ids().union(&cl.flagged_ids()).copied().collect();
    assert_eq!(table.both + table.only_a + table.only_b, union.len());

    let same = compare_methods(&basic, &basic, None).unwrap();
    assert_eq!((same.only_a, same.only_b), (0, 0));
}

#[test]
fn empty_truth_intersection_leaves_precision_absent() {
    let (sets, _) = noisy(1000, 4);
    let scored: Vec<ScoredSet> = sets.iter().map(|s| ScoredSet::from_set(s, None).unwrap()).collect();
    let basic = clean_basic(&Ensemble::new(&scored).unwrap());
    let mut truth = TruthFile::default();
    truth.verdicts.insert("not-a-sample".into(), Verdict::GtWrong);
    let curve = precision_detection_curve(&[basic], &truth);
    assert_eq!(curve[0].precision, None);
    assert_eq!(curve[0].std_error, None);
}
