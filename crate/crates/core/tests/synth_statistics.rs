use confcal::calibrate::{fit_platt, platt_signal};
use confcal::synth::generate;
use confcal::{ece, equal_count_partition, reliability_stats, Mapping, ScoredSet, SyntheticKind, SyntheticSpec, Verdict};

#[test]
fn same_seed_same_data() {
    let spec = SyntheticSpec {
        kind: SyntheticKind::small_large_pair(500),
        seed: 42,
    };
    let a = generate(&spec).unwrap();
    let b = generate(&spec).unwrap();
    assert_eq!(a.sets, b.sets);
    let other = generate(&SyntheticSpec { seed: 43, ..spec }).unwrap();
    assert_ne!(a.sets, other.sets);
}

#[test]
fn flip_fraction_within_three_sigma() {
    let spec = SyntheticSpec {
        kind: SyntheticKind::NoisyLabels {
            classes: 10,
            flip_rate: 0.05,
            model_accuracies: vec![0.9, 0.9],
            n: 20_000,
        },
        seed: 1,
    };
    let truth = generate(&spec).unwrap().truth.unwrap();
    let flips = truth.verdicts.values().filter(|v| **v == Verdict::GtWrong).count() as f64;
    let n: f64 = 20_000.0;
    let sigma = (n * 0.05 * 0.95).sqrt();
    assert!((flips - 0.05 * n).abs() < 3.0 * sigma, "{flips}");
}

#[test]
fn calibrated_classifier_has_small_ece() {
    let spec = SyntheticSpec {
        kind: SyntheticKind::CalibratedClassifier {
            classes: 10,
            true_temperature: 1.0,
            n: 100_000,
        },
        seed: 2,
    };
    let set = &generate(&spec).unwrap().sets[0];
    let scored = ScoredSet::from_set(set, None).unwrap();
    let conf = scored.confidences();
    let p = equal_count_partition(&conf, 15).unwrap();
    let e = ece(&conf, scored.require_outcomes().unwrap(), &p).unwrap();
    assert!(e < 0.01, "{e}");
}

#[test]
fn reliability_is_monotone_at_scale() {
    let spec = SyntheticSpec {
        kind: SyntheticKind::CalibratedClassifier {
            classes: 10,
            true_temperature: 1.0,
            n: 60_000,
        },
        seed: 3,
    };
    let set = &generate(&spec).unwrap().sets[0];
    let scored = ScoredSet::from_set(set, None).unwrap();
    let conf = scored.confidences();
    let p = equal_count_partition(&conf, 15).unwrap();
    let table = reliability_stats(&conf, scored.require_outcomes().unwrap(), &p).unwrap();
    assert!(table.monotonicity().unwrap() > 0.9);
}

#[test]
fn platt_generator_parameters_are_recoverable() {
    let spec = SyntheticSpec {
        kind: SyntheticKind::PlattGenerator { a: 1.2, b: 0.3, n: 30_000 },
        seed: 4,
    };
    let set = &generate(&spec).unwrap().sets[0];
    let z: Vec<f64> = set.records().iter().map(|r| platt_signal(&r.payload).unwrap()).collect();
    let cal = fit_platt(&z, &set.outcomes().unwrap()).unwrap();
    let Mapping::Platt { a, b } = cal.mapping else { panic!() };
    assert!((a - 1.2).abs() < 0.08 && (b - 0.3).abs() < 0.06, "{a} {b}");
}

#[test]
fn complementary_pair_tracks_profiles() {
    let spec = SyntheticSpec {
        kind: SyntheticKind::same_size_pair(40_000),
        seed: 5,
    };
    let data = generate(&spec).unwrap();
    for set in &data.sets {
        let acc = set.outcomes().unwrap().iter().sum::<f64>() / set.len() as f64;
        assert!((acc - 0.82).abs() < 0.01, "{acc}");
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let bad = SyntheticSpec {
        kind: SyntheticKind::NoisyLabels {
            classes: 10,
            flip_rate: 1.5,
            model_accuracies: vec![0.9],
            n: 10,
        },
        seed: 0,
    };
    assert!(generate(&bad).is_err());
    let empty = SyntheticSpec {
        kind: SyntheticKind::PlattGenerator { a: 1.0, b: 0.0, n: 0 },
        seed: 0,
    };
    assert!(generate(&empty).is_err());
}
