use std::hint::black_box;

use confcal::calibrate::{fit_histogram_binning, fit_temperature};
use confcal::synth::generate;
use confcal::{ece, equal_count_partition, ScoredSet, SyntheticKind, SyntheticSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn classifier(n: usize) -> confcal::PredictionSet {
    let spec = SyntheticSpec {
        kind: SyntheticKind::MiscalibratedClassifier {
            classes: 10,
            distortion_temperature: 3.0,
            n,
        },
        seed: 0,
    };
    generate(&spec).unwrap().sets.remove(0)
}

fn binning(c: &mut Criterion) {
    let mut group = c.benchmark_group("ece");
    for n in [10_000, 100_000] {
        let scored = ScoredSet::from_set(&classifier(n), None).unwrap();
        let conf = scored.confidences();
        let outcomes = scored.require_outcomes().unwrap().to_vec();
        group.bench_with_input(BenchmarkId::new("partition_and_ece", n), &n, |b, _| {
            b.iter(|| {
                let partition = equal_count_partition(black_box(&conf), 15).unwrap();
                ece(&conf, &outcomes, &partition).unwrap()
            })
        });
    }
    group.finish();
}

fn fitting(c: &mut Criterion) {
    let set = classifier(10_000);
    let scored = ScoredSet::from_set(&set, None).unwrap();
    let conf = scored.confidences();
    let outcomes = scored.require_outcomes().unwrap().to_vec();

    let mut group = c.benchmark_group("fit");
    group.sample_size(20);
    group.bench_function("temperature_10k", |b| b.iter(|| fit_temperature(black_box(&set)).unwrap()));
    group.bench_function("histogram_10k", |b| {
        b.iter(|| fit_histogram_binning(black_box(&conf), &outcomes, 15).unwrap())
    });
    group.finish();
}

criterion_group!(benches, binning, fitting);
criterion_main!(benches);
