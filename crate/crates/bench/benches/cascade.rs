use std::hint::black_box;

use confcal::synth::generate;
use confcal::{build_policy, simulate_cascade, ScoredSet, SyntheticKind, SyntheticSpec};
use criterion::{criterion_group, criterion_main, Criterion};

fn cascade(c: &mut Criterion) {
    let data = generate(&SyntheticSpec {
        kind: SyntheticKind::small_large_pair(40_000),
        seed: 0,
    })
    .unwrap();
    let (base_val, base_test) = data.sets[0].split_half();
    let (esc_val, esc_test) = data.sets[1].split_half();
    let score = |s| ScoredSet::from_set(s, None).unwrap();
    let (vb, ve, tb, te) = (score(&base_val), score(&esc_val), score(&base_test), score(&esc_test));

    c.bench_function("build_policy_20k", |b| {
        b.iter(|| build_policy(black_box(&vb), black_box(&ve), 15, 15).unwrap())
    });
    let policy = build_policy(&vb, &ve, 15, 15).unwrap();
    c.bench_function("simulate_cascade_20k", |b| {
        b.iter(|| simulate_cascade(black_box(&tb), black_box(&te), &policy).unwrap())
    });
}

criterion_group!(benches, cascade);
criterion_main!(benches);
