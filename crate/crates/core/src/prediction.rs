//! Exported model predictions: the record/set data model, JSONL and CSV
//! loaders, and the derivations (verifier outcomes, restricted softmax,
//! sequence mean logit) every other module consumes.
//!
//! A file holds exactly one payload variant:
//!
//! ```text
//! {"class_count": 4, "model_id": "vit-b"}                 optional header
//! {"id": "s1", "logits": [1.0, 0.2, -0.3, 0.0], "label": 2}
//! {"id": "g1", "token_logits": [3.1, 2.7], "verified": 1}
//! {"id": "c1", "confidence": 0.82, "verified": 0}
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{argmax, softmax};

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// One logit per class of the label set.
    ClassLogits(Vec<f64>),
    /// Logits of the sampled token at each position of a generated sequence.
    TokenLogits(Vec<f64>),
    /// An already-computed confidence in `[0, 1]`.
    Confidence(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    Classification,
    Generation,
    Scalar,
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::ClassLogits(_) => PayloadKind::Classification,
            Payload::TokenLogits(_) => PayloadKind::Generation,
            Payload::Confidence(_) => PayloadKind::Scalar,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub payload: Payload,
    pub label: Option<usize>,
    pub verified: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Validation,
    Test,
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "validation" | "val" => Ok(Role::Validation),
            "test" => Ok(Role::Test),
            other => Err(Error::contract(format!("unknown role {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    Jsonl,
    Csv,
}

impl FileFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FileFormat::Csv,
            _ => FileFormat::Jsonl,
        }
    }
}

/// Binary judgement of one sample's prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierOutcome {
    pub sample_id: String,
    pub value: u8,
}

/// Immutable, payload-homogeneous collection of one model's predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    records: Vec<PredictionRecord>,
    class_count: Option<usize>,
    role: Role,
    model_id: String,
}

impl PredictionSet {
    /// Validates every set invariant and builds the set.
    pub fn new(
        model_id: impl Into<String>,
        role: Role,
        class_count: Option<usize>,
        records: Vec<PredictionRecord>,
    ) -> Result<Self> {
        let mut builder = SetBuilder::new(class_count);
        for (i, record) in records.iter().enumerate() {
            builder.check(record, i + 1)?;
        }
        Ok(PredictionSet {
            class_count: builder.class_count,
            records,
            role,
            model_id: model_id.into(),
        })
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn class_count(&self) -> Option<usize> {
        self.class_count
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    /// Payload variant shared by all records, `None` for an empty set.
    pub fn payload_kind(&self) -> Option<PayloadKind> {
        self.records.first().map(|r| r.payload.kind())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.sample_id.as_str())
    }

    /// Returns a copy with only the records at `indices`, in that order.
    pub fn select(&self, indices: &[usize], role: Role) -> PredictionSet {
        PredictionSet {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            class_count: self.class_count,
            role,
            model_id: self.model_id.clone(),
        }
    }

    /// Splits into a validation half (first `ceil(n/2)` records) and a test half.
    pub fn split_half(&self) -> (PredictionSet, PredictionSet) {
        let mid = self.records.len().div_ceil(2);
        let first: Vec<usize> = (0..mid).collect();
        let second: Vec<usize> = (mid..self.records.len()).collect();
        (
            self.select(&first, Role::Validation),
            self.select(&second, Role::Test),
        )
    }

    /// Per-record verifier value: in-file `verified` wins, otherwise the
    /// greedy prediction is compared with the label. `None` if any record
    /// has neither.
    pub fn outcomes(&self) -> Option<Vec<f64>> {
        self.records
            .iter()
            .map(|r| match (r.verified, &r.payload, r.label) {
                (Some(v), _, _) => Some(f64::from(v)),
                (None, Payload::ClassLogits(z), Some(label)) => {
                    Some(if argmax(z) == label { 1.0 } else { 0.0 })
                }
                _ => None,
            })
            .collect()
    }

    /// Given labels in record order, or a contract error naming the first
    /// record without one.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.records
            .iter()
            .map(|r| {
                r.label
                    .ok_or_else(|| Error::contract(format!("missing label for {}", r.sample_id)))
            })
            .collect()
    }

    /// Loads a set from disk. Record order equals file order.
    pub fn load(path: impl AsRef<Path>, format: FileFormat, role: Role) -> Result<Self> {
        let path = path.as_ref();
        let default_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("model")
            .to_string();
        match format {
            FileFormat::Jsonl => read_jsonl(BufReader::new(File::open(path)?), &default_id, role),
            FileFormat::Csv => read_csv(File::open(path)?, &default_id, role),
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = HeaderLine {
            class_count: self.class_count,
            model_id: Some(self.model_id.clone()),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for record in &self.records {
            serde_json::to_writer(&mut out, &RecordLine::from(record))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, format: FileFormat) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        match format {
            FileFormat::Jsonl => self.write_jsonl(&mut out)?,
            FileFormat::Csv => self.write_csv(&mut out)?,
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let kind = self.payload_kind();
        let mut header = vec!["id".to_string()];
        match kind {
            Some(PayloadKind::Classification) => {
                let c = self.class_count.unwrap_or(0);
                header.extend((0..c).map(|i| format!("logit_{i}")));
            }
            Some(PayloadKind::Generation) => header.push("token_logits".into()),
            Some(PayloadKind::Scalar) | None => header.push("confidence".into()),
        }
        header.push("label".into());
        header.push("verified".into());
        writer.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.sample_id.clone()];
            match &r.payload {
                Payload::ClassLogits(z) => row.extend(z.iter().map(|v| fmt_f64(*v))),
                Payload::TokenLogits(z) => row.push(
                    z.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";"),
                ),
                Payload::Confidence(c) => row.push(fmt_f64(*c)),
            }
            row.push(r.label.map(|l| l.to_string()).unwrap_or_default());
            row.push(r.verified.map(|v| v.to_string()).unwrap_or_default());
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PayloadKind::Classification => "classification",
            PayloadKind::Generation => "generation",
            PayloadKind::Scalar => "scalar",
        };
        f.write_str(s)
    }
}

/// Incremental invariant checker shared by the constructors and loaders.
struct SetBuilder {
    class_count: Option<usize>,
    kind: Option<PayloadKind>,
    seen: HashSet<String>,
}

impl SetBuilder {
    fn new(class_count: Option<usize>) -> Self {
        SetBuilder {
            class_count,
            kind: None,
            seen: HashSet::new(),
        }
    }

    fn check(&mut self, record: &PredictionRecord, line: usize) -> Result<()> {
        let kind = record.payload.kind();
        match self.kind {
            None => self.kind = Some(kind),
            Some(k) if k != kind => {
                return Err(Error::parse(
                    line,
                    format!("mixed payload variants ({k} then {kind})"),
                ))
            }
            _ => {}
        }
        if !self.seen.insert(record.sample_id.clone()) {
            return Err(Error::parse(
                line,
                format!("duplicate sample_id {:?}", record.sample_id),
            ));
        }
        if let Some(v) = record.verified {
            if v > 1 {
                return Err(Error::parse(line, "verified must be 0 or 1"));
            }
        }
        match &record.payload {
            Payload::ClassLogits(z) => {
                let c = *self.class_count.get_or_insert(z.len());
                if c < 2 {
                    return Err(Error::parse(line, "class_count must be at least 2"));
                }
                if z.len() != c {
                    return Err(Error::parse(line, "logits length mismatch"));
                }
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::parse(line, "non-finite logit"));
                }
                match record.label {
                    Some(l) if l >= c => {
                        return Err(Error::parse(line, format!("label {l} out of range [0, {c})")))
                    }
                    None if record.verified.is_none() => {
                        return Err(Error::parse(line, "classification record needs label or verified"))
                    }
                    _ => {}
                }
            }
            Payload::TokenLogits(z) => {
                if z.is_empty() {
                    return Err(Error::parse(line, "empty token_logits"));
                }
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::parse(line, "non-finite token logit"));
                }
            }
            Payload::Confidence(c) => {
                if !(0.0..=1.0).contains(c) {
                    return Err(Error::parse(line, "confidence outside [0, 1]"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    #[serde(skip_serializing_if = "Option::is_none")]
    class_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    logits: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    token_logits: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    verified: Option<u8>,
}

impl From<&PredictionRecord> for RecordLine {
    fn from(r: &PredictionRecord) -> Self {
        let (logits, token_logits, confidence) = match &r.payload {
            Payload::ClassLogits(z) => (Some(z.clone()), None, None),
            Payload::TokenLogits(z) => (None, Some(z.clone()), None),
            Payload::Confidence(c) => (None, None, Some(*c)),
        };
        RecordLine {
            id: r.sample_id.clone(),
            logits,
            token_logits,
            confidence,
            label: r.label,
            verified: r.verified,
        }
    }
}

impl RecordLine {
    fn into_record(self, line: usize) -> Result<PredictionRecord> {
        let payload = match (self.logits, self.token_logits, self.confidence) {
            (Some(z), None, None) => Payload::ClassLogits(z),
            (None, Some(z), None) => Payload::TokenLogits(z),
            (None, None, Some(c)) => Payload::Confidence(c),
            _ => {
                return Err(Error::parse(
                    line,
                    "exactly one of logits, token_logits, confidence is required",
                ))
            }
        };
        Ok(PredictionRecord {
            sample_id: self.id,
            payload,
            label: self.label,
            verified: self.verified,
        })
    }
}

fn is_header(line: &str) -> bool {
    match serde_json::from_str::<serde_json::Value>(line) {
        Ok(serde_json::Value::Object(map)) => !map.contains_key("id"),
        _ => false,
    }
}

fn read_jsonl<R: BufRead>(reader: R, default_id: &str, role: Role) -> Result<PredictionSet> {
    let mut model_id = default_id.to_string();
    let mut builder: Option<SetBuilder> = None;
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && is_header(&line) {
            let header: HeaderLine = serde_json::from_str(&line)
                .map_err(|e| Error::parse(line_no, format!("malformed header: {e}")))?;
            if let Some(m) = header.model_id {
                model_id = m;
            }
            builder = Some(SetBuilder::new(header.class_count));
            continue;
        }
        let builder = builder.get_or_insert_with(|| SetBuilder::new(None));
        let raw: RecordLine = serde_json::from_str(&line)
            .map_err(|e| Error::parse(line_no, format!("malformed record: {e}")))?;
        let record = raw.into_record(line_no)?;
        builder.check(&record, line_no)?;
        records.push(record);
    }
    let class_count = builder.and_then(|b| b.class_count);
    Ok(PredictionSet {
        records,
        class_count,
        role,
        model_id,
    })
}

fn read_csv<R: std::io::Read>(input: R, default_id: &str, role: Role) -> Result<PredictionSet> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let id_col = column("id").ok_or_else(|| Error::parse(1, "missing id column"))?;
    let logit_cols: Vec<usize> = (0..)
        .map_while(|i| column(&format!("logit_{i}")))
        .collect();
    let token_col = column("token_logits");
    let conf_col = column("confidence");
    let label_col = column("label");
    let verified_col = column("verified");
    let class_count = (!logit_cols.is_empty()).then_some(logit_cols.len());

    let mut builder = SetBuilder::new(class_count);
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line_no = i + 2;
        let row = row.map_err(|e| Error::parse(line_no, e.to_string()))?;
        let cell = |c: usize| row.get(c).map(str::trim).filter(|s| !s.is_empty());
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(line_no, format!("invalid number {s:?}")))
        };
        let payload = if !logit_cols.is_empty() {
            let present: Vec<&str> = logit_cols.iter().filter_map(|&c| cell(c)).collect();
            if present.len() != logit_cols.len() {
                return Err(Error::parse(line_no, "logits length mismatch"));
            }
            Payload::ClassLogits(present.into_iter().map(num).collect::<Result<_>>()?)
        } else if let Some(c) = token_col {
            let text = cell(c).unwrap_or("");
            let values = text
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(|s| num(s.trim()))
                .collect::<Result<Vec<f64>>>()?;
            Payload::TokenLogits(values)
        } else if let Some(c) = conf_col {
            let text = cell(c).ok_or_else(|| Error::parse(line_no, "missing confidence"))?;
            Payload::Confidence(num(text)?)
        } else {
            return Err(Error::parse(1, "no payload columns"));
        };
        let label = match label_col.and_then(cell) {
            Some(s) => Some(
                s.parse::<usize>()
                    .map_err(|_| Error::parse(line_no, format!("invalid label {s:?}")))?,
            ),
            None => None,
        };
        let verified = match verified_col.and_then(cell) {
            Some(s) => Some(
                s.parse::<u8>()
                    .map_err(|_| Error::parse(line_no, format!("invalid verified {s:?}")))?,
            ),
            None => None,
        };
        let record = PredictionRecord {
            sample_id: cell(id_col)
                .ok_or_else(|| Error::parse(line_no, "missing id"))?
                .to_string(),
            payload,
            label,
            verified,
        };
        builder.check(&record, line_no)?;
        records.push(record);
    }
    Ok(PredictionSet {
        records,
        class_count: builder.class_count,
        role,
        model_id: default_id.to_string(),
    })
}

/// For every sample of `reference`, the index of the same sample_id in
/// `other`. Fails unless both carry the same set of ids.
pub fn alignment<'a>(
    reference: impl IntoIterator<Item = &'a str>,
    other: impl IntoIterator<Item = &'a str>,
) -> Result<Vec<usize>> {
    let index: HashMap<&str, usize> = other.into_iter().enumerate().map(|(i, id)| (id, i)).collect();
    let mut order = Vec::with_capacity(index.len());
    for id in reference {
        match index.get(id) {
            Some(&i) => order.push(i),
            None => {
                return Err(Error::contract(format!(
                    "sets are not alignable: sample {id:?} missing"
                )))
            }
        }
    }
    if order.len() != index.len() {
        return Err(Error::contract(format!(
            "sets are not alignable: {} vs {} samples",
            order.len(),
            index.len()
        )));
    }
    Ok(order)
}

/// Greedy-prediction verifier for classification: 1 iff the argmax of the
/// record's probability vector (lowest index on ties) equals its label.
pub fn derive_classification_verifier(
    set: &PredictionSet,
    probs: &[Vec<f64>],
) -> Result<Vec<VerifierOutcome>> {
    if probs.len() != set.len() {
        return Err(Error::contract(format!(
            "{} probability vectors for {} records",
            probs.len(),
            set.len()
        )));
    }
    set.records()
        .iter()
        .zip(probs)
        .map(|(r, p)| {
            let label = r
                .label
                .ok_or_else(|| Error::contract(format!("missing label for {}", r.sample_id)))?;
            Ok(VerifierOutcome {
                sample_id: r.sample_id.clone(),
                value: u8::from(argmax(p) == label),
            })
        })
        .collect()
}

/// Softmax over the selected options only, in the given option order.
pub fn restrict_and_renormalize(logits: &[f64], option_indices: &[usize]) -> Result<Vec<f64>> {
    if option_indices.len() < 2 {
        return Err(Error::contract("at least two options are required"));
    }
    let mut seen = HashSet::new();
    let mut selected = Vec::with_capacity(option_indices.len());
    for &i in option_indices {
        if i >= logits.len() {
            return Err(Error::contract(format!(
                "option index {i} out of range for {} logits",
                logits.len()
            )));
        }
        if !seen.insert(i) {
            return Err(Error::contract(format!("duplicate option index {i}")));
        }
        selected.push(logits[i]);
    }
    Ok(softmax(&selected))
}

/// Sequence-level logit estimate: the arithmetic mean of the chosen-token logits.
pub fn mean_chosen_logit(chosen_token_logits: &[f64]) -> Result<f64> {
    if chosen_token_logits.is_empty() {
        return Err(Error::contract("empty token sequence"));
    }
    Ok(chosen_token_logits.iter().sum::<f64>() / chosen_token_logits.len() as f64)
}
