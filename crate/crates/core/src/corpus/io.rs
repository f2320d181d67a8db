//! Canonical JSON corpus format.
//!
//! Top-level keys are `corpus_id`, `scenes` and `dialogues`; field names
//! follow the in-memory types. Object sets are sorted integer arrays and
//! optional fields are omitted rather than written as `null`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use super::{validate_corpus, Corpus, CorpusError, Dialogue, Locus, Scene, Turn, ValidationMode, ViolationKind};

pub fn load_canonical_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    load_canonical_corpus_with(path, ValidationMode::Strict)
}

pub fn load_canonical_corpus_with(path: impl AsRef<Path>, mode: ValidationMode) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: Value = serde_json::from_str(&text).map_err(|source| CorpusError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let corpus = corpus_from_value(value)?;
    check(corpus, mode)
}

/// Parses and validates a canonical document held in memory.
pub fn parse_canonical_corpus(text: &str, mode: ValidationMode) -> Result<Corpus, CorpusError> {
    let value: Value = serde_json::from_str(text).map_err(|source| CorpusError::Json {
        path: "<memory>".into(),
        source,
    })?;
    check(corpus_from_value(value)?, mode)
}

pub(crate) fn check(corpus: Corpus, mode: ValidationMode) -> Result<Corpus, CorpusError> {
    let report = validate_corpus(&corpus, mode);
    if report.is_ok() {
        return Ok(corpus);
    }
    if let Some(v) = report.errors().find(|v| v.kind == ViolationKind::DanglingScene) {
        return Err(CorpusError::DanglingScene {
            dialogue_id: v.locus.dialogue_id.clone().unwrap_or_default(),
            turn_idx: v.locus.turn_idx.unwrap_or_default(),
            scene_id: v.locus.scene_id.clone().unwrap_or_default(),
        });
    }
    Err(CorpusError::Invalid(report))
}

pub fn to_canonical_json(corpus: &Corpus) -> String {
    let mut out = serde_json::to_string_pretty(corpus).expect("corpus serializes");
    out.push('\n');
    out
}

pub fn save_canonical_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, to_canonical_json(corpus)).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn corpus_from_value(value: Value) -> Result<Corpus, CorpusError> {
    let root = Locus::default();
    let Value::Object(mut top) = value else {
        return Err(CorpusError::schema(root, "top level must be an object"));
    };
    if let Some(extra) = top.keys().find(|k| !["corpus_id", "scenes", "dialogues"].contains(&k.as_str())) {
        return Err(CorpusError::schema(root, format!("unknown top-level key {extra:?}")));
    }
    let corpus_id = match take(&mut top, "corpus_id", &root)? {
        Value::String(s) => s,
        _ => return Err(CorpusError::schema(root, "corpus_id must be a string")),
    };

    let Value::Object(scene_map) = take(&mut top, "scenes", &root)? else {
        return Err(CorpusError::schema(root, "scenes must be an object keyed by scene id"));
    };
    let mut scenes = std::collections::BTreeMap::new();
    for (key, v) in scene_map {
        let scene: Scene = typed(v, &Locus::scene(&key))?;
        scenes.insert(key, scene);
    }

    let Value::Array(dialogue_values) = take(&mut top, "dialogues", &root)? else {
        return Err(CorpusError::schema(root, "dialogues must be an array"));
    };
    let mut dialogues = Vec::with_capacity(dialogue_values.len());
    for (i, v) in dialogue_values.into_iter().enumerate() {
        dialogues.push(dialogue_from_value(v, i)?);
    }

    Ok(Corpus {
        corpus_id,
        scenes,
        dialogues,
    })
}

fn dialogue_from_value(value: Value, position: usize) -> Result<Dialogue, CorpusError> {
    let positional = Locus {
        dialogue_id: Some(format!("#{position}")),
        ..Default::default()
    };
    let Value::Object(mut obj) = value else {
        return Err(CorpusError::schema(positional, "dialogue must be an object"));
    };
    let dialogue_id = match take(&mut obj, "dialogue_id", &positional)? {
        Value::String(s) => s,
        _ => return Err(CorpusError::schema(positional, "dialogue_id must be a string")),
    };
    let locus = Locus::dialogue(&dialogue_id);
    let Value::Array(turn_values) = take(&mut obj, "turns", &locus)? else {
        return Err(CorpusError::schema(locus, "turns must be an array"));
    };
    let domain_label = match obj.remove("domain_label") {
        None => None,
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(CorpusError::schema(locus, "domain_label must be a string")),
    };
    if let Some(extra) = obj.keys().next() {
        return Err(CorpusError::schema(locus, format!("unknown field {extra:?}")));
    }
    let turns = turn_values
        .into_iter()
        .enumerate()
        .map(|(i, v)| typed::<Turn>(v, &Locus::turn(&dialogue_id, i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dialogue {
        dialogue_id,
        turns,
        domain_label,
    })
}

fn take(obj: &mut Map<String, Value>, key: &str, locus: &Locus) -> Result<Value, CorpusError> {
    obj.remove(key)
        .ok_or_else(|| CorpusError::schema(locus.clone(), format!("missing field {key:?}")))
}

fn typed<T: DeserializeOwned>(value: Value, locus: &Locus) -> Result<T, CorpusError> {
    serde_json::from_value(value).map_err(|e| CorpusError::schema(locus.clone(), e.to_string()))
}
