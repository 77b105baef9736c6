use confcal::calibrate::{
    apply_histogram_binning, apply_temperature, fit_histogram_binning, fit_platt, fit_temperature,
    fit_temperature_logits, platt_nll,
};
use confcal::synth::generate;
use confcal::{Calibrator, Mapping, SyntheticKind, SyntheticSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn nll_oracle(logits: &[Vec<f64>], labels: &[usize], t: f64) -> f64 {
    let mut total = 0.0;
    for (z, &y) in logits.iter().zip(labels) {
        let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b / t));
        let s: f64 = z.iter().map(|v| (v / t - m).exp()).sum();
        total += m + s.ln() - z[y] / t;
    }
    total
}

/// Plain gradient descent on the mean binary NLL.
fn platt_gd_oracle(z: &[f64], v: &[f64], iters: usize) -> (f64, f64) {
    let n = z.len() as f64;
    let (mut a, mut b) = (0.0, 0.0);
    for _ in 0..iters {
        let (mut ga, mut gb) = (0.0, 0.0);
        for (&x, &y) in z.iter().zip(v) {
            let p = 1.0 / (1.0 + (-(a * x + b)).exp());
            ga += (p - y) * x;
            gb += p - y;
        }
        a -= 1.5 * ga / n;
        b -= 1.5 * gb / n;
    }
    (a, b)
}

#[test]
fn temperature_beats_every_grid_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for trial in 0..10 {
        let classes = rng.random_range(2..8);
        let scale = rng.random_range(0.2..6.0);
        let n = rng.random_range(20..400);
        let logits: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..classes).map(|_| scale * rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<usize> = logits
            .iter()
            .map(|z| {
                let mut best = 0;
                for j in 0..z.len() {
                    if z[j] > z[best] {
                        best = j;
                    }
                }
                if rng.random_bool(0.7) {
                    best
                } else {
                    rng.random_range(0..classes)
                }
            })
            .collect();
        let refs: Vec<&[f64]> = logits.iter().map(Vec::as_slice).collect();
        let cal = fit_temperature_logits(&refs, &labels).unwrap();
        let Mapping::Temperature { temperature } = cal.mapping else { panic!() };
        let fitted = nll_oracle(&logits, &labels, temperature);
        let grid_min = (0..201)
            .map(|i| (0.05f64.ln() + (20f64.ln() - 0.05f64.ln()) * i as f64 / 200.0).exp())
            .map(|t| nll_oracle(&logits, &labels, t))
            .fold(f64::INFINITY, f64::min);
        assert!(fitted <= grid_min + 1e-6, "trial {trial}: {fitted} > {grid_min}");
        assert!((0.05..=20.0).contains(&temperature));
        assert!(cal.fit_meta.nll_final <= cal.fit_meta.nll_initial + 1e-9);
    }
}

#[test]
fn temperature_recovers_a_known_value() {
    let spec = SyntheticSpec {
        kind: SyntheticKind::CalibratedClassifier {
            classes: 10,
            true_temperature: 2.0,
            n: 20_000,
        },
        seed: 5,
    };
    let set = &generate(&spec).unwrap().sets[0];
    let cal = fit_temperature(set).unwrap();
    let Mapping::Temperature { temperature } = cal.mapping else { panic!() };
    assert!((temperature - 2.0).abs() < 0.1, "{temperature}");
}

#[test]
fn platt_matches_gradient_descent_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..5 {
        let (a_true, b_true) = (rng.random_range(0.5..2.5), rng.random_range(-1.0..1.0));
        let z: Vec<f64> = (0..3000).map(|_| rng.random_range(-3.0..3.0)).collect();
        let v: Vec<f64> = z
            .iter()
            .map(|&x| f64::from(u8::from(rng.random_bool(1.0 / (1.0 + (-(a_true * x + b_true)).exp())))))
            .collect();
        let cal = fit_platt(&z, &v).unwrap();
        let Mapping::Platt { a, b } = cal.mapping else { panic!() };
        let (oa, ob) = platt_gd_oracle(&z, &v, 4000);
        assert!((a - oa).abs() < 1e-3 && (b - ob).abs() < 1e-3, "({a}, {b}) vs ({oa}, {ob})");
        assert!(cal.fit_meta.converged);
        assert!(platt_nll(&z, &v, a, b) <= platt_nll(&z, &v, oa, ob) + 1e-6);
    }
}

#[test]
fn platt_degenerate_outcomes_fall_back_to_smoothed_rate() {
    let cal = fit_platt(&[0.1, 0.5, -2.0], &[1.0, 1.0, 1.0]).unwrap();
    let Mapping::Platt { a, b } = cal.mapping else { panic!() };
    assert_eq!(a, 0.0);
    assert!((1.0 / (1.0 + (-b).exp()) - 0.8).abs() < 1e-12);
    assert!(cal.fit_meta.degenerate);
}

#[test]
fn histogram_values_are_bin_outcome_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let conf: Vec<f64> = (0..999).map(|_| rng.random::<f64>()).collect();
    let out: Vec<f64> = conf.iter().map(|&c| f64::from(u8::from(rng.random_bool(c * c)))).collect();
    let cal = fit_histogram_binning(&conf, &out, 12).unwrap();
    let Mapping::HistogramBinning { partition, values } = &cal.mapping else { panic!() };
    let cuts = partition.boundaries();
    let bin_of = |c: f64| cuts.iter().filter(|&&b| c >= b).count();
    for _ in 0..2000 {
        let c: f64 = rng.random();
        let bin = bin_of(c);
        let members: Vec<usize> = (0..conf.len()).filter(|&i| bin_of(conf[i]) == bin).collect();
        let mean = members.iter().map(|&i| out[i]).sum::<f64>() / members.len() as f64;
        assert!((apply_histogram_binning(c, partition, values).unwrap() - mean).abs() < 1e-12);
    }
}

#[test]
fn calibrator_json_round_trip() {
    let cal = fit_platt(&[0.1, 0.5, -2.0, 1.0], &[1.0, 0.0, 0.0, 1.0]).unwrap();
    let back = Calibrator::from_json(&cal.to_json().unwrap()).unwrap();
    assert_eq!(back, cal);
    let hist = fit_histogram_binning(&[0.1, 0.2, 0.7, 0.9], &[0.0, 1.0, 1.0, 1.0], 2).unwrap();
    assert_eq!(Calibrator::from_json(&hist.to_json().unwrap()).unwrap(), hist);
}

#[test]
fn temperature_of_one_is_identity_softmax() {
    let z = [0.3, -1.2, 2.2, 0.0];
    let p = apply_temperature(&z, 1.0).unwrap();
    let s: f64 = z.iter().map(|v| v.exp()).sum();
    for (pi, zi) in p.iter().zip(z) {
        assert!((pi - zi.exp() / s).abs() < 1e-15);
    }
}
