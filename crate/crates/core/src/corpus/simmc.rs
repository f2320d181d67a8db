//! Adapter for the SIMMC 2.0 public distribution.
//!
//! Reads the dialogue JSON (`dialogue_data[*].dialogue[*]`), one
//! `<scene_id>_scene.json` file per referenced scene and the prefab
//! metadata files, and maps them onto the canonical model:
//!
//! | distribution field                                   | canonical field            |
//! |------------------------------------------------------|----------------------------|
//! | `disambiguation_label == 1`                          | `Turn::is_ambiguous`       |
//! | `transcript_annotated.act_attributes.objects`        | `user_referenced_objects`  |
//! | `scene_ids` (largest start index <= turn)            | `Turn::scene_id`           |
//! | scene object `index`                                 | `SceneObject::object_id`   |
//! | scene object `bbox` `[x, y, h, w]`                   | `bbox` `(x, y, w, h)`      |
//! | metadata record for the object's `prefab_path`      | `SceneObject::attributes`  |

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use super::io::check;
use super::{Corpus, CorpusError, Dialogue, Locus, Scene, SceneObject, Turn, ValidationMode};

/// Metadata keys copied into the attribute map, and their canonical names.
const MAPPED_METADATA: &[(&str, &str)] = &[
    ("type", "type"),
    ("color", "color"),
    ("brand", "brand"),
    ("pattern", "pattern"),
    ("sleeveLength", "sleeve_length"),
    ("materials", "materials"),
    ("assetType", "state"),
];

/// Metadata keys that are known but carry no referential attribute.
const IGNORED_METADATA: &[&str] = &["customerReview", "customerRating", "availableSizes", "price", "size"];

#[derive(Debug, Clone)]
pub struct SimmcPaths {
    pub dialogue_file: PathBuf,
    pub scene_dir: PathBuf,
    pub metadata_files: Vec<PathBuf>,
}

#[derive(Deserialize)]
struct RawDialogueFile {
    #[serde(default)]
    split: Option<String>,
    dialogue_data: Vec<RawDialogue>,
}

#[derive(Deserialize)]
struct RawDialogue {
    dialogue: Vec<Value>,
    dialogue_idx: Value,
    #[serde(default)]
    domain: Option<String>,
    #[serde(default)]
    scene_ids: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct RawSceneFile {
    scenes: Vec<RawSceneEntry>,
}

#[derive(Deserialize)]
struct RawSceneEntry {
    objects: Vec<RawObject>,
}

#[derive(Deserialize)]
struct RawObject {
    prefab_path: String,
    index: u32,
    #[serde(default)]
    bbox: Option<Vec<f64>>,
    #[serde(default)]
    position: Option<Vec<f64>>,
}

pub fn load_simmc_corpus(
    dialogue_file: impl AsRef<Path>,
    scene_dir: impl AsRef<Path>,
    metadata_files: &[PathBuf],
) -> Result<Corpus, CorpusError> {
    let dialogue_file = dialogue_file.as_ref();
    let scene_dir = scene_dir.as_ref();
    let raw: RawDialogueFile = read_json(dialogue_file)?;

    let mut metadata: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for path in metadata_files {
        let records: BTreeMap<String, Value> = read_json(path)?;
        for (prefab, record) in records {
            metadata.insert(prefab.clone(), map_metadata(&prefab, &record)?);
        }
    }

    let corpus_id = match &raw.split {
        Some(split) => format!("simmc2_{split}"),
        None => dialogue_file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "simmc2".into()),
    };
    let mut corpus = Corpus::new(corpus_id);

    for raw_dialogue in raw.dialogue_data {
        let dialogue_id = match &raw_dialogue.dialogue_idx {
            Value::Number(n) => n.to_string(),
            Value::String(s) => s.clone(),
            _ => {
                return Err(CorpusError::UnmappedField {
                    field: "dialogue_idx".into(),
                    context: dialogue_file.display().to_string(),
                })
            }
        };
        let schedule = scene_schedule(&raw_dialogue.scene_ids, &dialogue_id)?;
        for scene_id in schedule.values() {
            if !corpus.scenes.contains_key(scene_id) {
                let scene = load_scene(scene_dir, scene_id, &metadata)?;
                corpus.scenes.insert(scene_id.clone(), scene);
            }
        }

        let mut turns = Vec::with_capacity(raw_dialogue.dialogue.len());
        for (idx, raw_turn) in raw_dialogue.dialogue.iter().enumerate() {
            let scene_id = schedule
                .range(..=idx)
                .next_back()
                .or_else(|| schedule.iter().next())
                .map(|(_, s)| s.clone())
                .ok_or_else(|| CorpusError::UnmappedField {
                    field: "scene_ids".into(),
                    context: format!("dialogue {dialogue_id}"),
                })?;
            turns.push(map_turn(raw_turn, &dialogue_id, idx, scene_id)?);
        }
        corpus.dialogues.push(Dialogue {
            dialogue_id,
            turns,
            domain_label: raw_dialogue.domain,
        });
    }
    check(corpus, ValidationMode::Strict)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CorpusError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn scene_schedule(scene_ids: &BTreeMap<String, String>, dialogue_id: &str) -> Result<BTreeMap<usize, String>, CorpusError> {
    if scene_ids.is_empty() {
        return Err(CorpusError::UnmappedField {
            field: "scene_ids".into(),
            context: format!("dialogue {dialogue_id}"),
        });
    }
    scene_ids
        .iter()
        .map(|(k, v)| {
            k.parse::<usize>().map(|k| (k, v.clone())).map_err(|_| CorpusError::UnmappedField {
                field: format!("scene_ids.{k}"),
                context: format!("dialogue {dialogue_id}"),
            })
        })
        .collect()
}

fn map_turn(raw: &Value, dialogue_id: &str, idx: usize, scene_id: String) -> Result<Turn, CorpusError> {
    let context = || format!("dialogue {dialogue_id} turn {idx}");
    let unmapped = |field: &str| CorpusError::UnmappedField {
        field: field.into(),
        context: context(),
    };
    let user_utterance = raw
        .get("transcript")
        .and_then(Value::as_str)
        .ok_or_else(|| unmapped("transcript"))?
        .to_string();
    let system_utterance = match raw.get("system_transcript") {
        None => String::new(),
        Some(v) => v.as_str().ok_or_else(|| unmapped("system_transcript"))?.to_string(),
    };
    let annotated = raw.get("transcript_annotated").ok_or_else(|| unmapped("transcript_annotated"))?;
    let objects = annotated
        .get("act_attributes")
        .and_then(|a| a.get("objects"))
        .and_then(Value::as_array)
        .ok_or_else(|| unmapped("transcript_annotated.act_attributes.objects"))?;
    let user_referenced_objects = objects
        .iter()
        .map(|o| {
            o.as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(|| unmapped("transcript_annotated.act_attributes.objects"))
        })
        .collect::<Result<BTreeSet<_>, _>>()?;
    // Older releases put the label on the turn, newer ones inside the annotation.
    let label = raw
        .get("disambiguation_label")
        .or_else(|| annotated.get("disambiguation_label"));
    let is_ambiguous = match label {
        None | Some(Value::Null) => false,
        Some(v) => match v.as_i64() {
            Some(n) => n == 1,
            None => return Err(unmapped("disambiguation_label")),
        },
    };
    if let Some(file_idx) = raw.get("turn_idx").and_then(Value::as_u64) {
        if file_idx as usize != idx {
            return Err(CorpusError::schema(
                Locus::turn(dialogue_id, idx),
                format!("distribution turn_idx {file_idx} does not match position {idx}"),
            ));
        }
    }
    Ok(Turn {
        turn_idx: idx,
        user_utterance,
        system_utterance,
        user_referenced_objects,
        is_ambiguous,
        scene_id,
    })
}

fn load_scene(
    scene_dir: &Path,
    scene_id: &str,
    metadata: &BTreeMap<String, BTreeMap<String, String>>,
) -> Result<Scene, CorpusError> {
    let path = scene_dir.join(format!("{scene_id}_scene.json"));
    let raw: RawSceneFile = read_json(&path)?;
    let mut objects = Vec::new();
    let mut seen = BTreeSet::new();
    for entry in raw.scenes {
        for obj in entry.objects {
            if !seen.insert(obj.index) {
                continue;
            }
            let attributes = metadata.get(&obj.prefab_path).cloned().ok_or_else(|| CorpusError::UnmappedField {
                field: obj.prefab_path.clone(),
                context: format!("scene {scene_id}: prefab has no metadata record"),
            })?;
            // Distribution boxes are [x, y, height, width].
            let bbox = match obj.bbox.as_deref() {
                Some(&[x, y, h, w]) if w > 0.0 && h > 0.0 && x >= 0.0 && y >= 0.0 => Some([x, y, w, h]),
                _ => None,
            };
            let position = match obj.position.as_deref() {
                Some(&[x, y, z]) => Some([x, y, z]),
                _ => None,
            };
            objects.push(SceneObject {
                object_id: obj.index,
                attributes,
                bbox,
                position,
            });
        }
    }
    objects.sort_by_key(|o| o.object_id);
    Ok(Scene {
        scene_id: scene_id.to_string(),
        objects,
    })
}

fn map_metadata(prefab: &str, record: &Value) -> Result<BTreeMap<String, String>, CorpusError> {
    let Value::Object(fields) = record else {
        return Err(CorpusError::UnmappedField {
            field: prefab.into(),
            context: "metadata record is not an object".into(),
        });
    };
    let mut attributes = BTreeMap::new();
    for (key, value) in fields {
        if IGNORED_METADATA.contains(&key.as_str()) {
            continue;
        }
        let Some((_, category)) = MAPPED_METADATA.iter().find(|(k, _)| k == key) else {
            return Err(CorpusError::UnmappedField {
                field: key.clone(),
                context: format!("metadata for {prefab}"),
            });
        };
        let text = match value {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            Value::Array(items) => items
                .iter()
                .filter_map(|i| i.as_str().map(str::to_string).or_else(|| i.as_number().map(|n| n.to_string())))
                .collect::<Vec<_>>()
                .join(", "),
            Value::Null => continue,
            _ => {
                return Err(CorpusError::UnmappedField {
                    field: key.clone(),
                    context: format!("metadata for {prefab}: unsupported value"),
                })
            }
        };
        let text = if *category == "state" {
            // assetType looks like "jacket_hanging"; the state is the suffix.
            text.rsplit('_').next().unwrap_or(&text).to_string()
        } else {
            text
        };
        if !text.trim().is_empty() {
            attributes.insert(category.to_string(), text);
        }
    }
    if !attributes.contains_key("type") {
        return Err(CorpusError::schema(
            Locus::default(),
            format!("metadata for {prefab} has no \"type\" attribute"),
        ));
    }
    Ok(attributes)
}
