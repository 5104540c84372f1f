//! Line-delimited dataset, prediction and manifest files.
//!
//! A dataset `name.ced.jsonl` holds one JSON object per line:
//!
//! ```text
//! {"id":"train-000000","seed":123,"ae_seq":["walk","sit"],"ce_labels":[[],[6]],"ce_single":[0,6],"window_s":5}
//! ```
//!
//! and its manifest lives next to it as `name.ced.manifest.json`.
//! Prediction files hold `{"id": ..., "predicted": [ids]}` lines.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labeler::{label_trace, to_single_label, Priority};
use crate::metrics::{PredictionRecord, Reference};
use crate::model::{parse_ae_token, AtomicEvent, CeSet, ComplexEvent, NUM_COMPLEX, WINDOW_SECONDS};
use crate::rules::RuleSet;
use crate::simulator::{GenerationConfig, TransitionModel};

pub const GENERATOR_NAME: &str = "cedgen";
pub const GENERATOR_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("record {id}: {reason}")]
    Validation { id: String, reason: String },
    #[error("prediction {id} has no reference record")]
    MissingReference { id: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One generated trace with its labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetRecord {
    pub id: String,
    pub seed: u64,
    pub ae_seq: Vec<AtomicEvent>,
    pub ce_labels: Vec<CeSet>,
    pub ce_single: Vec<ComplexEvent>,
}

impl DatasetRecord {
    /// Labels `trace` with `rules` and projects with `priority`.
    pub fn label(
        id: String,
        seed: u64,
        trace: Vec<AtomicEvent>,
        rules: &RuleSet,
        priority: &Priority,
    ) -> Self {
        let ce_labels = label_trace(rules, &trace);
        let ce_single = to_single_label(&ce_labels, priority);
        DatasetRecord {
            id,
            seed,
            ae_seq: trace,
            ce_labels,
            ce_single,
        }
    }

    pub fn len(&self) -> usize {
        self.ae_seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ae_seq.is_empty()
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |reason: String| DatasetError::Validation {
            id: self.id.clone(),
            reason,
        };
        if self.id.is_empty() {
            return Err(bad("empty id".into()));
        }
        if self.ae_seq.is_empty() {
            return Err(bad("empty trace".into()));
        }
        if self.ce_labels.len() != self.ae_seq.len() || self.ce_single.len() != self.ae_seq.len() {
            return Err(bad(format!(
                "length mismatch: ae_seq {}, ce_labels {}, ce_single {}",
                self.ae_seq.len(),
                self.ce_labels.len(),
                self.ce_single.len()
            )));
        }
        for (t, (set, single)) in self.ce_labels.iter().zip(&self.ce_single).enumerate() {
            let ok = if set.is_empty() {
                single.is_default()
            } else {
                set.contains(*single)
            };
            if !ok {
                return Err(bad(format!(
                    "window {}: single label {single} is not a projection of {set}",
                    t + 1
                )));
            }
        }
        Ok(())
    }

    /// The record as one line of a dataset file, without the newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_raw()).expect("record serializes")
    }

    fn to_raw(&self) -> RawRecord {
        RawRecord {
            id: self.id.clone(),
            seed: self.seed,
            ae_seq: self.ae_seq.iter().map(|a| a.as_str().to_string()).collect(),
            ce_labels: self
                .ce_labels
                .iter()
                .map(|s| s.iter().map(|c| c.id() as u64).collect())
                .collect(),
            ce_single: self.ce_single.iter().map(|c| c.id() as u64).collect(),
            window_s: WINDOW_SECONDS,
        }
    }
}

/// On-disk shape; validated into a [`DatasetRecord`] on load.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    seed: u64,
    ae_seq: Vec<String>,
    ce_labels: Vec<Vec<u64>>,
    ce_single: Vec<u64>,
    window_s: u32,
}

fn class_id(id: &str, v: u64) -> Result<ComplexEvent, DatasetError> {
    u8::try_from(v)
        .ok()
        .and_then(ComplexEvent::new)
        .ok_or_else(|| DatasetError::Validation {
            id: id.to_string(),
            reason: format!("class id {v} outside 0..={}", NUM_COMPLEX - 1),
        })
}

impl TryFrom<RawRecord> for DatasetRecord {
    type Error = DatasetError;

    fn try_from(raw: RawRecord) -> Result<Self, DatasetError> {
        let id = raw.id;
        let bad = |reason: String| DatasetError::Validation {
            id: id.clone(),
            reason,
        };
        if raw.window_s != WINDOW_SECONDS {
            return Err(bad(format!(
                "window_s is {}, expected {WINDOW_SECONDS}",
                raw.window_s
            )));
        }
        let ae_seq = raw
            .ae_seq
            .iter()
            .enumerate()
            .map(|(t, tok)| {
                parse_ae_token(tok).map_err(|_| {
                    bad(format!(
                        "unknown atomic event token `{tok}` at window {}",
                        t + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut ce_labels = Vec::with_capacity(raw.ce_labels.len());
        for (t, ids) in raw.ce_labels.iter().enumerate() {
            let mut set = CeSet::EMPTY;
            for &v in ids {
                let ce = class_id(&id, v)?;
                if ce.is_default() {
                    return Err(bad(format!("window {}: label set contains e0", t + 1)));
                }
                if set.contains(ce) {
                    return Err(bad(format!("window {}: {ce} listed twice", t + 1)));
                }
                set.insert(ce);
            }
            ce_labels.push(set);
        }
        let ce_single = raw
            .ce_single
            .iter()
            .map(|&v| class_id(&id, v))
            .collect::<Result<Vec<_>, _>>()?;
        let rec = DatasetRecord {
            id: id.clone(),
            seed: raw.seed,
            ae_seq,
            ce_labels,
            ce_single,
        };
        rec.validate()?;
        Ok(rec)
    }
}

/// Provenance written next to every generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub generator_version: String,
    pub split: String,
    pub record_count: usize,
    pub window_s: u32,
    /// Single-label projection order, highest priority first.
    pub priority: Vec<ComplexEvent>,
    pub rule_set_digest: String,
    pub transition_model_digest: Option<String>,
    pub transition_model: Option<TransitionModel>,
    pub config: Option<GenerationConfig>,
}

impl Manifest {
    pub fn new(
        split: impl Into<String>,
        record_count: usize,
        rules: &RuleSet,
        priority: &Priority,
    ) -> Self {
        Manifest {
            generator: GENERATOR_NAME.to_string(),
            generator_version: GENERATOR_VERSION.to_string(),
            split: split.into(),
            record_count,
            window_s: WINDOW_SECONDS,
            priority: priority.order().to_vec(),
            rule_set_digest: rules.digest(),
            transition_model_digest: None,
            transition_model: None,
            config: None,
        }
    }

    pub fn with_generation(mut self, model: &TransitionModel, config: &GenerationConfig) -> Self {
        self.transition_model_digest = Some(model.digest());
        self.transition_model = Some(model.clone());
        self.config = Some(config.clone());
        self
    }
}

/// `x.ced.jsonl` → `x.ced.manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name
        .strip_suffix(".ced.jsonl")
        .or_else(|| name.strip_suffix(".jsonl"))
        .unwrap_or(&name);
    path.with_file_name(format!("{stem}.ced.manifest.json"))
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), DatasetError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(DatasetError::Validation {
                id: id.to_string(),
                reason: "duplicate id".into(),
            });
        }
    }
    Ok(())
}

/// Writes records sorted by id plus the sibling manifest. Everything is
/// validated before the first byte is written.
pub fn write_records(
    path: &Path,
    records: &[DatasetRecord],
    manifest: &Manifest,
) -> Result<(), DatasetError> {
    for r in records {
        r.validate()?;
    }
    check_unique(records.iter().map(|r| r.id.as_str()))?;
    let mut order: Vec<&DatasetRecord> = records.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));

    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in order {
        writeln!(w, "{}", r.to_json_line()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;

    let mpath = manifest_path(path);
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&mpath, text).map_err(io_err(&mpath))
}

/// Records of a dataset file and its manifest, if one exists.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
    pub manifest: Option<Manifest>,
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, DatasetError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn parse_line<T: serde::de::DeserializeOwned>(
    path: &Path,
    line: usize,
    text: &str,
) -> Result<T, DatasetError> {
    serde_json::from_str(text).map_err(|e| DatasetError::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    })
}

pub fn read_records(path: &Path) -> Result<Dataset, DatasetError> {
    let mut records = Vec::new();
    for (n, line) in read_lines(path)? {
        let raw: RawRecord = parse_line(path, n, &line)?;
        records.push(DatasetRecord::try_from(raw)?);
    }
    check_unique(records.iter().map(|r| r.id.as_str()))?;
    let mpath = manifest_path(path);
    let manifest = match fs::read_to_string(&mpath) {
        Ok(text) => Some(
            serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
                path: mpath.clone(),
                line: e.line(),
                message: e.to_string(),
            })?,
        ),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(io_err(&mpath)(e)),
    };
    Ok(Dataset { records, manifest })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrediction {
    id: String,
    predicted: Vec<u64>,
}

/// Writes one prediction line per record, in the given order.
pub fn write_predictions(
    path: &Path,
    predictions: &[(String, Vec<ComplexEvent>)],
) -> Result<(), DatasetError> {
    check_unique(predictions.iter().map(|(id, _)| id.as_str()))?;
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for (id, labels) in predictions {
        let raw = RawPrediction {
            id: id.clone(),
            predicted: labels.iter().map(|c| c.id() as u64).collect(),
        };
        let line = serde_json::to_string(&raw).expect("prediction serializes");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Predictions paired with their references by id.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub records: Vec<PredictionRecord>,
    /// Reference ids that have no prediction.
    pub unpredicted: Vec<String>,
}

impl PredictionSet {
    /// Ids of predictions whose length differs from the reference.
    pub fn length_mismatches(&self) -> Vec<&str> {
        self.records
            .iter()
            .filter(|r| !r.length_matches())
            .map(|r| r.id.as_str())
            .collect()
    }
}

/// Pairs `(id, predicted)` lists with reference records by id.
pub fn pair_predictions(
    predictions: Vec<(String, Vec<ComplexEvent>)>,
    references: &[DatasetRecord],
) -> Result<PredictionSet, DatasetError> {
    let by_id: HashMap<&str, &DatasetRecord> =
        references.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut records = Vec::with_capacity(predictions.len());
    let mut seen = HashSet::new();
    for (id, predicted) in predictions {
        let Some(reference) = by_id.get(id.as_str()) else {
            return Err(DatasetError::MissingReference { id });
        };
        seen.insert(reference.id.as_str());
        records.push(PredictionRecord {
            id,
            predicted,
            reference: Reference::Multi(reference.ce_labels.clone()),
        });
    }
    let unpredicted = references
        .iter()
        .filter(|r| !seen.contains(r.id.as_str()))
        .map(|r| r.id.clone())
        .collect();
    Ok(PredictionSet {
        records,
        unpredicted,
    })
}

pub fn read_predictions(
    path: &Path,
    references: &[DatasetRecord],
) -> Result<PredictionSet, DatasetError> {
    let mut preds = Vec::new();
    for (n, line) in read_lines(path)? {
        let raw: RawPrediction = parse_line(path, n, &line)?;
        let labels = raw
            .predicted
            .iter()
            .map(|&v| class_id(&raw.id, v))
            .collect::<Result<Vec<_>, _>>()?;
        preds.push((raw.id, labels));
    }
    check_unique(preds.iter().map(|(id, _)| id.as_str()))?;
    pair_predictions(preds, references)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AtomicEvent::*;
    use crate::rules::builtin_rules;

    fn sample(id: &str, trace: Vec<AtomicEvent>) -> DatasetRecord {
        DatasetRecord::label(id.into(), 1, trace, &builtin_rules(), &Priority::default())
    }

    fn manifest(n: usize) -> Manifest {
        Manifest::new("test", n, &builtin_rules(), &Priority::default())
    }

    #[test]
    fn round_trip_and_byte_stability() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.ced.jsonl");
        let recs = vec![
            sample("b", vec![Wash; 6]),
            sample("a", vec![FlushToilet, Type]),
        ];
        write_records(&path, &recs, &manifest(2)).unwrap();
        let first = fs::read(&path).unwrap();
        assert_eq!(String::from_utf8_lossy(&first).lines().count(), 2);
        assert!(dir.path().join("d.ced.manifest.json").exists());
        let back = read_records(&path).unwrap();
        assert_eq!(back.records, vec![recs[1].clone(), recs[0].clone()]);
        assert_eq!(back.manifest, Some(manifest(2)));
        write_records(&path, &recs, &manifest(2)).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn invalid_record_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ced.jsonl");
        let mut r = sample("a", vec![Walk, Walk]);
        r.ce_single.pop();
        assert!(matches!(
            write_records(&path, &[r], &manifest(1)),
            Err(DatasetError::Validation { .. })
        ));
        assert!(!path.exists());
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ced.jsonl");
        let good = r#"{"id":"a","seed":1,"ae_seq":["walk"],"ce_labels":[[]],"ce_single":[0],"window_s":5}"#;
        fs::write(&path, format!("{good}\n{{\"id\":\"b\",\"seed\"")).unwrap();
        match read_records(&path) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let unknown = good.replace("\"walk\"", "\"jump\"");
        fs::write(&path, unknown).unwrap();
        match read_records(&path) {
            Err(DatasetError::Validation { reason, .. }) => assert!(reason.contains("jump")),
            other => panic!("{other:?}"),
        }
        let e0 = good.replace("[[]]", "[[0]]");
        fs::write(&path, e0).unwrap();
        assert!(matches!(
            read_records(&path),
            Err(DatasetError::Validation { .. })
        ));
        fs::write(&path, format!("{good}\n{good}\n")).unwrap();
        assert!(matches!(
            read_records(&path),
            Err(DatasetError::Validation { .. })
        ));
    }

    #[test]
    fn predictions_pairing() {
        let dir = tempfile::tempdir().unwrap();
        let refs = vec![sample("a", vec![Walk; 60]), sample("b", vec![Walk; 60])];
        let path = dir.path().join("p.ced.jsonl");
        write_predictions(&path, &[("a".into(), vec![ComplexEvent::DEFAULT; 59])]).unwrap();
        let set = read_predictions(&path, &refs).unwrap();
        assert_eq!(set.length_mismatches(), vec!["a"]);
        assert_eq!(set.unpredicted, vec!["b".to_string()]);
        write_predictions(&path, &[("z".into(), vec![ComplexEvent::DEFAULT; 60])]).unwrap();
        assert!(matches!(
            read_predictions(&path, &refs),
            Err(DatasetError::MissingReference { id }) if id == "z"
        ));
    }
}
