use confcal::numeric::{argmax, softmax};
use confcal::prediction::{derive_classification_verifier, mean_chosen_logit, restrict_and_renormalize};
use confcal::{FileFormat, Payload, PredictionRecord, PredictionSet, Role};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_classifier(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> PredictionSet {
    let records = (0..n)
        .map(|i| PredictionRecord {
            sample_id: format!("r{i}"),
            payload: Payload::ClassLogits((0..classes).map(|_| rng.random_range(-6.0..6.0)).collect()),
            label: Some(rng.random_range(0..classes)),
            verified: None,
        })
        .collect();
    PredictionSet::new("m", Role::Validation, Some(classes), records).unwrap()
}

#[test]
fn jsonl_and_csv_round_trip_100_records() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let set = random_classifier(&mut rng, 100, 4);
    let dir = tempfile::tempdir().unwrap();
    for (name, format) in [("p.jsonl", FileFormat::Jsonl), ("p.csv", FileFormat::Csv)] {
        let path = dir.path().join(name);
        set.save(&path, format).unwrap();
        let back = PredictionSet::load(&path, format, Role::Validation).unwrap();
        assert_eq!(back.len(), 100);
        assert_eq!(back.records(), set.records(), "{name}");
    }
}

#[test]
fn generation_and_scalar_round_trip() {
    let records = vec![
        PredictionRecord {
            sample_id: "a".into(),
            payload: Payload::TokenLogits(vec![0.1, -2.5, 3.0]),
            label: None,
            verified: Some(1),
        },
        PredictionRecord {
            sample_id: "b".into(),
            payload: Payload::TokenLogits(vec![1.0 / 3.0]),
            label: None,
            verified: Some(0),
        },
    ];
    let set = PredictionSet::new("g", Role::Test, None, records).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (name, format) in [("g.jsonl", FileFormat::Jsonl), ("g.csv", FileFormat::Csv)] {
        let path = dir.path().join(name);
        set.save(&path, format).unwrap();
        let back = PredictionSet::load(&path, format, Role::Test).unwrap();
        assert_eq!(back.records(), set.records());
    }
}

#[test]
fn verifier_matches_brute_force_on_1000_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let set = random_classifier(&mut rng, 1000, 7);
    let probs: Vec<Vec<f64>> = set
        .records()
        .iter()
        .map(|r| match &r.payload {
            Payload::ClassLogits(z) => softmax(z),
            _ => unreachable!(),
        })
        .collect();
    let outcomes = derive_classification_verifier(&set, &probs).unwrap();
    for ((r, p), v) in set.records().iter().zip(&probs).zip(&outcomes) {
        let mut best = 0;
        for j in 1..p.len() {
            if p[j] > p[best] {
                best = j;
            }
        }
        assert_eq!(v.value, u8::from(best == r.label.unwrap()));
        assert_eq!(v.sample_id, r.sample_id);
    }
    let from_set = set.outcomes().unwrap();
    for (v, o) in outcomes.iter().zip(from_set) {
        assert_eq!(f64::from(v.value), o);
    }
}

#[test]
fn restricted_softmax_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let n = rng.random_range(2..30);
        let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
        let k = rng.random_range(2..=n);
        let mut options: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = rng.random_range(i..n);
            options.swap(i, j);
        }
        options.truncate(k);
        let got = restrict_and_renormalize(&logits, &options).unwrap();
        let denom: f64 = options.iter().map(|&i| logits[i].exp()).sum();
        for (g, &i) in got.iter().zip(&options) {
            assert!((g - logits[i].exp() / denom).abs() < 1e-12);
        }
    }
}

#[test]
fn mean_logit_matches_compensated_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(1..2000);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-30.0..5.0)).collect();
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for &x in &xs {
            let y = x - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        let oracle = sum / n as f64;
        assert!((mean_chosen_logit(&xs).unwrap() - oracle).abs() < 1e-10);
    }
}

#[test]
fn argmax_ties_resolve_low() {
    assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    assert_eq!(argmax(&[1.0, 1.0]), 0);
}
