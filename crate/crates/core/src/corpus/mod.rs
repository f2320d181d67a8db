//! Canonical corpus model.
//!
//! A [`Corpus`] owns a set of scenes keyed by id and an ordered list of
//! dialogues. Each [`Turn`] is one user/assistant utterance pair; the gold
//! referenced objects and the ambiguity flag belong to the user side.

mod io;
mod simmc;
mod stats;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_canonical_corpus, load_canonical_corpus_with, parse_canonical_corpus, save_canonical_corpus, to_canonical_json};
pub use simmc::{load_simmc_corpus, SimmcPaths};
pub use stats::{corpus_stats, CorpusStats};
pub(crate) use stats::mean_sd;
pub use validate::{validate_corpus, Severity, ValidationMode, ValidationReport, Violation, ViolationKind};

/// Canonical object id, unique within a scene.
pub type ObjectId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corpus {
    pub corpus_id: String,
    pub scenes: BTreeMap<String, Scene>,
    pub dialogues: Vec<Dialogue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub scene_id: String,
    pub objects: Vec<SceneObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub object_id: ObjectId,
    /// Open attribute map: `type`, `color`, `brand`, `pattern`, `state`, ...
    pub attributes: BTreeMap<String, String>,
    /// `(x, y, width, height)` in pixels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
}

impl SceneObject {
    pub fn attribute(&self, category: &str) -> Option<&str> {
        self.attributes.get(category).map(String::as_str)
    }

    /// Center of the bounding box, falling back to the scene position.
    pub fn center(&self) -> Option<(f64, f64)> {
        match (self.bbox, self.position) {
            (Some([x, y, w, h]), _) => Some((x + w / 2.0, y + h / 2.0)),
            (None, Some([x, y, _])) => Some((x, y)),
            (None, None) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Turn {
    pub turn_idx: usize,
    pub user_utterance: String,
    pub system_utterance: String,
    pub user_referenced_objects: BTreeSet<ObjectId>,
    pub is_ambiguous: bool,
    pub scene_id: String,
}

impl Corpus {
    pub fn new(corpus_id: impl Into<String>) -> Self {
        Corpus {
            corpus_id: corpus_id.into(),
            scenes: BTreeMap::new(),
            dialogues: Vec::new(),
        }
    }

    pub fn dialogue(&self, dialogue_id: &str) -> Option<&Dialogue> {
        self.dialogues.iter().find(|d| d.dialogue_id == dialogue_id)
    }

    pub fn turn(&self, dialogue_id: &str, turn_idx: usize) -> Option<&Turn> {
        self.dialogue(dialogue_id).and_then(|d| d.turns.get(turn_idx))
    }

    /// The scene a turn is situated in.
    pub fn scene_of(&self, turn: &Turn) -> Option<&Scene> {
        self.scenes.get(&turn.scene_id)
    }

    /// Every user turn key, ordered by `(dialogue_id, turn_idx)`.
    pub fn turn_keys(&self) -> Vec<crate::TurnKey> {
        let mut keys: Vec<_> = self
            .dialogues
            .iter()
            .flat_map(|d| d.turns.iter().map(move |t| (d.dialogue_id.clone(), t.turn_idx)))
            .collect();
        keys.sort();
        keys
    }

    pub fn n_turns(&self) -> usize {
        self.dialogues.iter().map(|d| d.turns.len()).sum()
    }

    /// All attribute categories present on any scene object.
    pub fn attribute_categories(&self) -> BTreeSet<String> {
        self.scenes
            .values()
            .flat_map(|s| s.objects.iter())
            .flat_map(|o| o.attributes.keys().cloned())
            .collect()
    }
}

impl Scene {
    pub fn object(&self, object_id: ObjectId) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.object_id == object_id)
    }

    pub fn object_ids(&self) -> BTreeSet<ObjectId> {
        self.objects.iter().map(|o| o.object_id).collect()
    }
}

/// Where in a corpus a problem was found.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locus {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dialogue_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_idx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<ObjectId>,
}

impl Locus {
    pub fn turn(dialogue_id: &str, turn_idx: usize) -> Self {
        Locus {
            dialogue_id: Some(dialogue_id.to_string()),
            turn_idx: Some(turn_idx),
            ..Default::default()
        }
    }

    pub fn dialogue(dialogue_id: &str) -> Self {
        Locus {
            dialogue_id: Some(dialogue_id.to_string()),
            ..Default::default()
        }
    }

    pub fn scene(scene_id: &str) -> Self {
        Locus {
            scene_id: Some(scene_id.to_string()),
            ..Default::default()
        }
    }
}

impl fmt::Display for Locus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(d) = &self.dialogue_id {
            parts.push(format!("dialogue {d}"));
        }
        if let Some(t) = self.turn_idx {
            parts.push(format!("turn {t}"));
        }
        if let Some(s) = &self.scene_id {
            parts.push(format!("scene {s}"));
        }
        if let Some(o) = self.object_id {
            parts.push(format!("object {o}"));
        }
        if parts.is_empty() {
            f.write_str("corpus")
        } else {
            f.write_str(&parts.join(", "))
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a well-formed JSON document: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("schema violation at {locus}: {message}")]
    Schema { locus: Locus, message: String },
    #[error("dialogue {dialogue_id} turn {turn_idx} references unknown scene {scene_id:?}")]
    DanglingScene {
        dialogue_id: String,
        turn_idx: usize,
        scene_id: String,
    },
    #[error("corpus failed validation:\n{0}")]
    Invalid(ValidationReport),
    #[error("unmapped distribution field {field:?} in {context}")]
    UnmappedField { field: String, context: String },
}

impl CorpusError {
    /// True for errors about corpus content rather than file access or syntax.
    pub fn is_validation(&self) -> bool {
        matches!(self, CorpusError::DanglingScene { .. } | CorpusError::Invalid(_))
    }

    pub(crate) fn schema(locus: Locus, message: impl Into<String>) -> Self {
        CorpusError::Schema {
            locus,
            message: message.into(),
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn object(id: ObjectId, attrs: &[(&str, &str)]) -> SceneObject {
        SceneObject {
            object_id: id,
            attributes: attrs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            bbox: None,
            position: None,
        }
    }

    pub fn turn(idx: usize, user: &str, system: &str, refs: &[ObjectId], ambiguous: bool, scene: &str) -> Turn {
        Turn {
            turn_idx: idx,
            user_utterance: user.to_string(),
            system_utterance: system.to_string(),
            user_referenced_objects: refs.iter().copied().collect(),
            is_ambiguous: ambiguous,
            scene_id: scene.to_string(),
        }
    }

    /// One scene `S1` with two jackets; dialogues are appended by the caller.
    pub fn small_corpus() -> Corpus {
        let mut corpus = Corpus::new("fixture");
        corpus.scenes.insert(
            "S1".into(),
            Scene {
                scene_id: "S1".into(),
                objects: vec![
                    object(1, &[("type", "jacket"), ("color", "black")]),
                    object(2, &[("type", "jacket"), ("color", "grey")]),
                ],
            },
        );
        corpus.dialogues.push(Dialogue {
            dialogue_id: "d1".into(),
            turns: vec![turn(0, "Show me a jacket", "Sure", &[1], false, "S1")],
            domain_label: Some("fashion".into()),
        });
        corpus
    }
}
