use confcal::synth::generate;
use confcal::{FileFormat, SyntheticKind, SyntheticSpec};
use serde::Serialize;

use super::{path_or, summary};
use crate::config::required;
use crate::error::{CliError, CliResult};
use crate::report::{file_digest, report, InputDigest, Inputs, Output};
use crate::{SynthArgs, SynthKindArg};

#[derive(Serialize)]
struct Body<'a> {
    spec: &'a SyntheticSpec,
    outputs: Vec<InputDigest>,
}

fn spec_of(args: &SynthArgs) -> CliResult<SyntheticSpec> {
    let n = required(&args.n, "n")?;
    let classes = required(&args.classes, "classes")?;
    let kind = match required(&args.kind, "kind")? {
        SynthKindArg::Calibrated => SyntheticKind::CalibratedClassifier {
            classes,
            true_temperature: args.temperature.unwrap_or(1.0),
            n,
        },
        SynthKindArg::Miscalibrated => SyntheticKind::MiscalibratedClassifier {
            classes,
            distortion_temperature: args.temperature.unwrap_or(3.0),
            n,
        },
        SynthKindArg::Pair | SynthKindArg::SameSize => {
            let preset = if args.kind == Some(SynthKindArg::Pair) {
                SyntheticKind::small_large_pair(n)
            } else {
                SyntheticKind::same_size_pair(n)
            };
            let SyntheticKind::ComplementaryPair { base_profile, esc_profile, .. } = preset else {
                unreachable!("presets are complementary pairs")
            };
            SyntheticKind::ComplementaryPair {
                classes,
                n,
                base_profile: args.base_profile.clone().unwrap_or(base_profile),
                esc_profile: args.esc_profile.clone().unwrap_or(esc_profile),
            }
        }
        SynthKindArg::Noisy => SyntheticKind::NoisyLabels {
            classes,
            flip_rate: required(&args.flip_rate, "flip-rate")?,
            model_accuracies: required(&args.accuracies, "accuracies")?,
            n,
        },
        SynthKindArg::Platt => SyntheticKind::PlattGenerator {
            a: required(&args.a, "a")?,
            b: required(&args.b, "b")?,
            n,
        },
    };
    Ok(SyntheticSpec {
        kind,
        seed: required(&args.seed, "seed")?,
    })
}

pub fn run(args: SynthArgs) -> CliResult<String> {
    let spec = spec_of(&args)?;
    let data = generate(&spec)?;
    let mut out = Output::create(&path_or(&args.out, "."))?;

    let mut files = Vec::new();
    for set in &data.sets {
        let parts = if args.split == Some(false) {
            vec![(format!("{}.jsonl", set.model_id()), set.clone())]
        } else {
            let (val, test) = set.split_half();
            vec![
                (format!("{}_val.jsonl", set.model_id()), val),
                (format!("{}_test.jsonl", set.model_id()), test),
            ]
        };
        for (name, part) in parts {
            let path = out.path(&name);
            part.save(&path, FileFormat::Jsonl)?;
            files.push(path);
        }
    }
    if let Some(truth) = &data.truth {
        files.push(out.write_with("truth.csv", |w| truth.write_csv(w))?);
    }

    let outputs = files
        .iter()
        .map(|p| {
            Ok(InputDigest {
                path: p.display().to_string(),
                sha256: file_digest(p)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let body = Body {
        spec: &spec,
        outputs,
    };
    out.write_json("synth.json", &report("synth", &args, &Inputs::default(), &body))?;

    let mut written = files;
    written.extend(out.written().iter().filter(|p| p.ends_with("synth.json")).cloned());
    Ok(summary(&written, &[]))
}
