//! Subset evaluation of reference-resolution predictions.
//!
//! A report has one row for all user turns, one Before/After row over every
//! complete clarificational exchange, and one Before/After row per property
//! tag.

mod predictions;
mod report;
mod resolver;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, ObjectId, ValidationMode};
use crate::extract::{check_ces, ClarificationExchange, ExtractError};
use crate::metrics::{aggregate_with, relative_delta_with, turn_object_f1_with, AggregateOptions, AggregateScore, Aggregation, DeltaResult, TurnScore};
use crate::tagger::PropertyTag;
use crate::TurnKey;

pub use predictions::{load_predictions, save_predictions, PredictionSet};
pub use report::{render_report, ReportFormat};
pub use resolver::{run_resolver, run_resolver_with, ResolverKind, ResolverSpec};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: line {line}: {message}")]
    ParseIn { path: PathBuf, line: usize, message: String },
    #[error("duplicate prediction for dialogue {dialogue_id} turn {turn_idx} (line {line})")]
    DuplicatePrediction { dialogue_id: String, turn_idx: usize, line: usize },
    #[error("prediction for dialogue {dialogue_id} turn {turn_idx}, which is not in the corpus")]
    UnknownTurn { dialogue_id: String, turn_idx: usize },
    #[error("no prediction for dialogue {dialogue_id} turn {turn_idx}")]
    MissingPrediction { dialogue_id: String, turn_idx: usize },
    #[error("exchange {dialogue_id}:{turn_idx} has no property tags")]
    Untagged { dialogue_id: String, turn_idx: usize },
    #[error(transparent)]
    Exchange(#[from] ExtractError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl EvalError {
    /// True for errors about content rather than file access or syntax.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            EvalError::DuplicatePrediction { .. }
                | EvalError::UnknownTurn { .. }
                | EvalError::MissingPrediction { .. }
                | EvalError::Untagged { .. }
                | EvalError::Exchange(ExtractError::Integrity { .. })
        )
    }

    pub(crate) fn with_path(self, path: &Path) -> Self {
        match self {
            EvalError::Parse { line, message } => EvalError::ParseIn {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        }
    }
}

/// Which user turns the All Turns row covers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllTurnsScope {
    #[default]
    AllUserTurns,
    /// Only turns that are neither Before-CR nor After-CR.
    NonCeTurns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Strict rejects unknown and missing turns; lenient ignores unknown
    /// turns and scores missing ones as empty predictions.
    pub mode: ValidationMode,
    pub aggregation: Aggregation,
    pub aggregate: AggregateOptions,
    pub all_turns_scope: AllTurnsScope,
    pub jobs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            mode: ValidationMode::Strict,
            aggregation: Aggregation::Micro,
            aggregate: AggregateOptions::default(),
            all_turns_scope: AllTurnsScope::AllUserTurns,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subset {
    AllTurns,
    CRTurns,
    IndividualProperty,
    DialogueHistory,
    RelationalContext,
    Unclassified,
}

impl Subset {
    pub const ALL: [Subset; 6] = [
        Subset::AllTurns,
        Subset::CRTurns,
        Subset::IndividualProperty,
        Subset::DialogueHistory,
        Subset::RelationalContext,
        Subset::Unclassified,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Subset::AllTurns => "All Turns",
            Subset::CRTurns => "CR Turns",
            Subset::IndividualProperty => PropertyTag::IndividualProperty.label(),
            Subset::DialogueHistory => PropertyTag::DialogueHistory.label(),
            Subset::RelationalContext => PropertyTag::RelationalContext.label(),
            Subset::Unclassified => PropertyTag::Unclassified.label(),
        }
    }

    pub fn tag(self) -> Option<PropertyTag> {
        match self {
            Subset::AllTurns | Subset::CRTurns => None,
            Subset::IndividualProperty => Some(PropertyTag::IndividualProperty),
            Subset::DialogueHistory => Some(PropertyTag::DialogueHistory),
            Subset::RelationalContext => Some(PropertyTag::RelationalContext),
            Subset::Unclassified => Some(PropertyTag::Unclassified),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RowValue {
    Delta(DeltaResult),
    Aggregate(AggregateScore),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub subset: Subset,
    /// Exchanges in the row; for All Turns, the number of user turns.
    pub n: usize,
    pub value: RowValue,
}

impl ReportRow {
    pub fn delta(&self) -> Option<&DeltaResult> {
        match &self.value {
            RowValue::Delta(d) => Some(d),
            RowValue::Aggregate(_) => None,
        }
    }

    pub fn aggregate(&self) -> Option<&AggregateScore> {
        match &self.value {
            RowValue::Aggregate(a) => Some(a),
            RowValue::Delta(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_name: String,
    pub aggregation: Aggregation,
    pub all_turns_scope: AllTurnsScope,
    pub notes: Vec<String>,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn row(&self, subset: Subset) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.subset == subset)
    }
}

fn conventions(options: &EvalOptions) -> Vec<String> {
    let agg = match options.aggregation {
        Aggregation::Micro => "micro-averaged Object F1 (tp, fp, fn pooled over the turns of a row)",
        Aggregation::Macro => "mean per-turn Object F1",
    };
    let scope = match options.all_turns_scope {
        AllTurnsScope::AllUserTurns => "All Turns covers every user turn",
        AllTurnsScope::NonCeTurns => "All Turns covers user turns outside any exchange",
    };
    let missing = match options.mode {
        ValidationMode::Strict => "every user turn must have a prediction",
        ValidationMode::Lenient => "turns without a prediction score as an empty prediction",
    };
    vec![
        format!("values are {agg}, in percent"),
        "parenthesized values are the standard error of per-turn F1".to_string(),
        "delta is (After-CR - Before-CR) / Before-CR * 100".to_string(),
        "an exchange with several tags counts in every matching tag row".to_string(),
        "exchanges ending a dialogue have no After-CR turn and are left out of Before/After rows".to_string(),
        scope.to_string(),
        missing.to_string(),
    ]
}

fn score_turns(
    corpus: &Corpus,
    preds: &PredictionSet,
    options: &EvalOptions,
) -> Result<BTreeMap<TurnKey, TurnScore>, EvalError> {
    let empty = BTreeSet::<ObjectId>::new();
    let score_dialogue = |d: &crate::corpus::Dialogue| -> Result<Vec<(TurnKey, TurnScore)>, EvalError> {
        d.turns
            .iter()
            .enumerate()
            .map(|(idx, turn)| {
                let key = (d.dialogue_id.clone(), idx);
                let pred = match preds.predictions.get(&key) {
                    Some(p) => p,
                    None if options.mode == ValidationMode::Lenient => &empty,
                    None => {
                        return Err(EvalError::MissingPrediction {
                            dialogue_id: key.0,
                            turn_idx: key.1,
                        })
                    }
                };
                let score = turn_object_f1_with(&turn.user_referenced_objects, pred, options.aggregate.f1_mode);
                Ok((key, score))
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    let per_dialogue: Vec<Result<Vec<_>, EvalError>> =
        pool.install(|| corpus.dialogues.par_iter().map(score_dialogue).collect());
    let mut scores = BTreeMap::new();
    for part in per_dialogue {
        scores.extend(part?);
    }
    Ok(scores)
}

fn delta_over<'c>(
    ces: impl Iterator<Item = &'c ClarificationExchange>,
    scores: &BTreeMap<TurnKey, TurnScore>,
    options: &EvalOptions,
) -> (usize, DeltaResult) {
    let mut before = Vec::new();
    let mut after = Vec::new();
    for ce in ces {
        let Some(after_key) = ce.after_key() else { continue };
        before.push(scores[&ce.before_key()]);
        after.push(scores[&after_key]);
    }
    let delta = relative_delta_with(
        aggregate_with(&before, options.aggregate),
        aggregate_with(&after, options.aggregate),
        options.aggregation,
    );
    (before.len(), delta)
}

/// Scores `preds` against the gold references of `corpus` and splits the
/// result by exchange phase and property tag. `ces` must carry tags.
pub fn evaluate(
    corpus: &Corpus,
    preds: &PredictionSet,
    ces: &[ClarificationExchange],
    options: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    check_ces(corpus, ces)?;
    if let Some(ce) = ces.iter().find(|c| c.tags.is_none()) {
        return Err(EvalError::Untagged {
            dialogue_id: ce.dialogue_id.clone(),
            turn_idx: ce.before_turn_idx,
        });
    }
    if options.mode == ValidationMode::Strict {
        if let Some((d, t)) = preds.predictions.keys().find(|(d, t)| corpus.turn(d, *t).is_none()) {
            return Err(EvalError::UnknownTurn {
                dialogue_id: d.clone(),
                turn_idx: *t,
            });
        }
    }

    let scores = score_turns(corpus, preds, options)?;
    let mut sorted: Vec<&ClarificationExchange> = ces.iter().collect();
    sorted.sort_by(|a, b| a.before_key().cmp(&b.before_key()));

    let in_exchange: BTreeSet<TurnKey> = sorted
        .iter()
        .flat_map(|c| std::iter::once(c.before_key()).chain(c.after_key()))
        .collect();
    let all: Vec<TurnScore> = scores
        .iter()
        .filter(|(k, _)| options.all_turns_scope == AllTurnsScope::AllUserTurns || !in_exchange.contains(*k))
        .map(|(_, s)| *s)
        .collect();

    let mut rows = vec![ReportRow {
        subset: Subset::AllTurns,
        n: all.len(),
        value: RowValue::Aggregate(aggregate_with(&all, options.aggregate)),
    }];
    let (n, delta) = delta_over(sorted.iter().copied(), &scores, options);
    rows.push(ReportRow {
        subset: Subset::CRTurns,
        n,
        value: RowValue::Delta(delta),
    });
    for subset in &Subset::ALL[2..] {
        let tag = subset.tag().expect("tag subset");
        let members = sorted
            .iter()
            .copied()
            .filter(|c| c.tags.as_ref().is_some_and(|t| t.contains(tag)));
        let (n, delta) = delta_over(members, &scores, options);
        rows.push(ReportRow {
            subset: *subset,
            n,
            value: RowValue::Delta(delta),
        });
    }

    Ok(EvalReport {
        model_name: preds.model_name.clone(),
        aggregation: options.aggregation,
        all_turns_scope: options.all_turns_scope,
        notes: conventions(options),
        rows,
    })
}
