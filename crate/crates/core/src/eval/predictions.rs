//! Line-delimited prediction files.
//!
//! One JSON record per line: `{"dialogue_id": "...", "turn_idx": 3,
//! "predicted_objects": [1, 4]}`. Blank lines are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::ObjectId;
use crate::TurnKey;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct PredictionRecord {
    dialogue_id: String,
    turn_idx: usize,
    predicted_objects: BTreeSet<ObjectId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictionSet {
    pub model_name: String,
    pub predictions: BTreeMap<TurnKey, BTreeSet<ObjectId>>,
}

impl PredictionSet {
    pub fn new(model_name: impl Into<String>) -> Self {
        PredictionSet {
            model_name: model_name.into(),
            predictions: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    pub fn get(&self, dialogue_id: &str, turn_idx: usize) -> Option<&BTreeSet<ObjectId>> {
        self.predictions.get(&(dialogue_id.to_string(), turn_idx))
    }

    /// Parses prediction lines; duplicate keys are rejected.
    pub fn parse(model_name: impl Into<String>, text: &str) -> Result<Self, EvalError> {
        let mut set = PredictionSet::new(model_name);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: PredictionRecord = serde_json::from_str(line).map_err(|e| EvalError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let key = (record.dialogue_id, record.turn_idx);
            if set.predictions.contains_key(&key) {
                return Err(EvalError::DuplicatePrediction {
                    dialogue_id: key.0,
                    turn_idx: key.1,
                    line: i + 1,
                });
            }
            set.predictions.insert(key, record.predicted_objects);
        }
        Ok(set)
    }

    /// Records sorted by `(dialogue_id, turn_idx)`, one per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ((dialogue_id, turn_idx), objects) in &self.predictions {
            let record = PredictionRecord {
                dialogue_id: dialogue_id.clone(),
                turn_idx: *turn_idx,
                predicted_objects: objects.clone(),
            };
            out.push_str(&serde_json::to_string(&record).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Loads a prediction file; the model name is the file stem.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<PredictionSet, EvalError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    PredictionSet::parse(name, &text).map_err(|e| e.with_path(path))
}

pub fn save_predictions(preds: &PredictionSet, path: impl AsRef<Path>) -> Result<(), EvalError> {
    let path = path.as_ref();
    fs::write(path, preds.to_jsonl()).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}
