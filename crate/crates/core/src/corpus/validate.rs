use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Corpus, Locus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DuplicateDialogueId,
    EmptyDialogue,
    TurnIndexMismatch,
    SceneKeyMismatch,
    DuplicateObjectId,
    EmptyScene,
    DanglingScene,
    UnknownObject,
    InvalidBbox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub severity: Severity,
    pub kind: ViolationKind,
    pub locus: Locus,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    /// No error-severity violations.
    pub fn is_ok(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Warning)
    }

    fn push(&mut self, severity: Severity, kind: ViolationKind, locus: Locus, message: String) {
        self.violations.push(Violation {
            severity,
            kind,
            locus,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            let sev = match v.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            writeln!(f, "  {sev}: {}: {}", v.locus, v.message)?;
        }
        Ok(())
    }
}

/// Checks every corpus invariant and reports violations as data.
///
/// Dangling scene references, out-of-scene object ids and empty scenes are
/// errors in strict mode and warnings in lenient mode. Structural problems
/// (duplicate ids, index gaps, bad boxes) are errors in both modes.
pub fn validate_corpus(corpus: &Corpus, mode: ValidationMode) -> ValidationReport {
    let mut report = ValidationReport::default();
    let soft = match mode {
        ValidationMode::Strict => Severity::Error,
        ValidationMode::Lenient => Severity::Warning,
    };

    for (key, scene) in &corpus.scenes {
        if key != &scene.scene_id {
            report.push(
                Severity::Error,
                ViolationKind::SceneKeyMismatch,
                Locus::scene(key),
                format!("scene stored under key {key:?} has scene_id {:?}", scene.scene_id),
            );
        }
        if scene.objects.is_empty() {
            report.push(soft, ViolationKind::EmptyScene, Locus::scene(key), "scene has no objects".into());
        }
        let mut seen = BTreeSet::new();
        for obj in &scene.objects {
            let locus = Locus {
                scene_id: Some(key.clone()),
                object_id: Some(obj.object_id),
                ..Default::default()
            };
            if !seen.insert(obj.object_id) {
                report.push(
                    Severity::Error,
                    ViolationKind::DuplicateObjectId,
                    locus.clone(),
                    format!("object id {} appears more than once", obj.object_id),
                );
            }
            if let Some([x, y, w, h]) = obj.bbox {
                let finite = [x, y, w, h].iter().all(|v| v.is_finite());
                if !finite || x < 0.0 || y < 0.0 || w <= 0.0 || h <= 0.0 {
                    report.push(
                        Severity::Error,
                        ViolationKind::InvalidBbox,
                        locus,
                        format!("bbox [{x}, {y}, {w}, {h}] needs non-negative origin and positive size"),
                    );
                }
            }
        }
    }

    let mut dialogue_ids = BTreeSet::new();
    for dialogue in &corpus.dialogues {
        let did = &dialogue.dialogue_id;
        if !dialogue_ids.insert(did.as_str()) {
            report.push(
                Severity::Error,
                ViolationKind::DuplicateDialogueId,
                Locus::dialogue(did),
                format!("dialogue id {did:?} is not unique"),
            );
        }
        if dialogue.turns.is_empty() {
            report.push(Severity::Error, ViolationKind::EmptyDialogue, Locus::dialogue(did), "dialogue has no turns".into());
        }
        for (pos, turn) in dialogue.turns.iter().enumerate() {
            let locus = Locus::turn(did, pos);
            if turn.turn_idx != pos {
                report.push(
                    Severity::Error,
                    ViolationKind::TurnIndexMismatch,
                    locus.clone(),
                    format!("turn_idx {} at position {pos}", turn.turn_idx),
                );
            }
            match corpus.scenes.get(&turn.scene_id) {
                None => report.push(
                    soft,
                    ViolationKind::DanglingScene,
                    Locus {
                        scene_id: Some(turn.scene_id.clone()),
                        ..locus
                    },
                    format!("unknown scene {:?}", turn.scene_id),
                ),
                Some(scene) => {
                    let ids = scene.object_ids();
                    for obj in turn.user_referenced_objects.iter().filter(|o| !ids.contains(o)) {
                        report.push(
                            soft,
                            ViolationKind::UnknownObject,
                            Locus {
                                scene_id: Some(turn.scene_id.clone()),
                                object_id: Some(*obj),
                                ..locus.clone()
                            },
                            format!("referenced object {obj} is not in scene {:?}", turn.scene_id),
                        );
                    }
                }
            }
        }
    }
    report
}
