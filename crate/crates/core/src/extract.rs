//! Clarificational exchange extraction.
//!
//! Every user turn annotated as ambiguous opens one exchange: the ambiguous
//! user utterance is the Before-CR side, the system utterance of the same
//! pair is the CR, and the next user utterance (when there is one) is the
//! After-CR response.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::tagger::TagSet;
use crate::TurnKey;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("exchange {dialogue_id}:{turn_idx} does not point at a turn of the corpus")]
    Integrity { dialogue_id: String, turn_idx: usize },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed exchange list: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarificationExchange {
    pub dialogue_id: String,
    pub before_turn_idx: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after_turn_idx: Option<usize>,
    pub cr_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_text: Option<String>,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<TagSet>,
}

impl ClarificationExchange {
    pub fn is_truncated(&self) -> bool {
        self.after_turn_idx.is_none()
    }

    pub fn before_key(&self) -> TurnKey {
        (self.dialogue_id.clone(), self.before_turn_idx)
    }

    pub fn after_key(&self) -> Option<TurnKey> {
        self.after_turn_idx.map(|i| (self.dialogue_id.clone(), i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub n_ces: usize,
    /// Exchanges whose ambiguous turn is the last of its dialogue.
    pub n_truncated: usize,
    pub n_system_turns: usize,
    /// All CRs over all system turns.
    pub cr_rate: f64,
    /// CRs with a following user turn over all system turns.
    pub cr_rate_complete: f64,
}

pub fn extract_ces(corpus: &Corpus) -> (Vec<ClarificationExchange>, ExtractionStats) {
    let mut ces = Vec::new();
    for dialogue in &corpus.dialogues {
        for (idx, turn) in dialogue.turns.iter().enumerate() {
            if !turn.is_ambiguous {
                continue;
            }
            let next = dialogue.turns.get(idx + 1);
            ces.push(ClarificationExchange {
                dialogue_id: dialogue.dialogue_id.clone(),
                before_turn_idx: idx,
                after_turn_idx: next.map(|_| idx + 1),
                cr_text: turn.system_utterance.clone(),
                response_text: next.map(|t| t.user_utterance.clone()),
                tags: None,
            });
        }
    }
    ces.sort_by(|a, b| (&a.dialogue_id, a.before_turn_idx).cmp(&(&b.dialogue_id, b.before_turn_idx)));

    let n_system_turns = corpus.n_turns();
    let n_truncated = ces.iter().filter(|c| c.is_truncated()).count();
    let rate = |n: usize| if n_system_turns == 0 { 0.0 } else { n as f64 / n_system_turns as f64 };
    let stats = ExtractionStats {
        n_ces: ces.len(),
        n_truncated,
        n_system_turns,
        cr_rate: rate(ces.len()),
        cr_rate_complete: rate(ces.len() - n_truncated),
    };
    (ces, stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CePhase {
    BeforeCR,
    CR,
    AfterCR,
    Other,
}

/// Phase labels of both sides of one turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnPhases {
    pub user: BTreeSet<CePhase>,
    pub system: BTreeSet<CePhase>,
}

impl Default for TurnPhases {
    fn default() -> Self {
        TurnPhases {
            user: BTreeSet::from([CePhase::Other]),
            system: BTreeSet::from([CePhase::Other]),
        }
    }
}

fn mark(set: &mut BTreeSet<CePhase>, phase: CePhase) {
    set.remove(&CePhase::Other);
    set.insert(phase);
}

/// Labels every turn side with its exchange phases. A user turn that
/// answers one CR and is itself ambiguous carries both AfterCR and BeforeCR.
pub fn label_turns(corpus: &Corpus, ces: &[ClarificationExchange]) -> Result<BTreeMap<TurnKey, TurnPhases>, ExtractError> {
    let mut labels: BTreeMap<TurnKey, TurnPhases> = corpus
        .turn_keys()
        .into_iter()
        .map(|k| (k, TurnPhases::default()))
        .collect();
    for ce in ces {
        let before = labels.get_mut(&ce.before_key()).ok_or_else(|| ExtractError::Integrity {
            dialogue_id: ce.dialogue_id.clone(),
            turn_idx: ce.before_turn_idx,
        })?;
        mark(&mut before.user, CePhase::BeforeCR);
        mark(&mut before.system, CePhase::CR);
        if let Some(key) = ce.after_key() {
            let after = labels.get_mut(&key).ok_or_else(|| ExtractError::Integrity {
                dialogue_id: ce.dialogue_id.clone(),
                turn_idx: key.1,
            })?;
            mark(&mut after.user, CePhase::AfterCR);
        }
    }
    Ok(labels)
}

/// Checks that every exchange points at turns of `corpus`.
pub fn check_ces(corpus: &Corpus, ces: &[ClarificationExchange]) -> Result<(), ExtractError> {
    for ce in ces {
        for idx in std::iter::once(ce.before_turn_idx).chain(ce.after_turn_idx) {
            if corpus.turn(&ce.dialogue_id, idx).is_none() {
                return Err(ExtractError::Integrity {
                    dialogue_id: ce.dialogue_id.clone(),
                    turn_idx: idx,
                });
            }
        }
    }
    Ok(())
}

pub fn ces_to_json(ces: &[ClarificationExchange]) -> String {
    let mut out = serde_json::to_string_pretty(ces).expect("exchanges serialize");
    out.push('\n');
    out
}

pub fn save_ces(ces: &[ClarificationExchange], path: impl AsRef<Path>) -> Result<(), ExtractError> {
    let path = path.as_ref();
    fs::write(path, ces_to_json(ces)).map_err(|source| ExtractError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_ces(path: impl AsRef<Path>) -> Result<Vec<ClarificationExchange>, ExtractError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ExtractError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ExtractError::Format {
        path: path.to_path_buf(),
        source,
    })
}
