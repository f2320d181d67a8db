//! Object F1, aggregation, the relative Before/After delta and
//! candidate-object ambiguity statistics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, ObjectId};
use crate::TurnKey;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("unknown attribute category {attribute:?}; available: {}", available.join(", "))]
    UnknownAttribute { attribute: String, available: Vec<String> },
}

/// How precision and recall combine into a turn's F1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Mode {
    /// `2PR / (P + R)`.
    #[default]
    Harmonic,
    /// `(P + R) / 2`, for sensitivity analysis only.
    ArithmeticMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnScore {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl TurnScore {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, mode: F1Mode) -> Self {
        let (precision, recall, f1) = prf(tp, fp, fn_, mode);
        TurnScore {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }

    pub fn is_both_empty(&self) -> bool {
        self.tp == 0 && self.fp == 0 && self.fn_ == 0
    }
}

/// Precision, recall and F1 from counts.
///
/// With nothing predicted, precision is 1 only if nothing was missed;
/// recall mirrors this. Both-empty therefore scores 1.
pub fn prf(tp: u64, fp: u64, fn_: u64, mode: F1Mode) -> (f64, f64, f64) {
    let precision = if tp + fp == 0 {
        if fn_ == 0 { 1.0 } else { 0.0 }
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        if fp == 0 { 1.0 } else { 0.0 }
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = match mode {
        F1Mode::Harmonic if precision + recall > 0.0 => 2.0 * precision * recall / (precision + recall),
        F1Mode::Harmonic => 0.0,
        F1Mode::ArithmeticMean => (precision + recall) / 2.0,
    };
    (precision, recall, f1)
}

pub fn turn_object_f1(gold: &BTreeSet<ObjectId>, pred: &BTreeSet<ObjectId>) -> TurnScore {
    turn_object_f1_with(gold, pred, F1Mode::Harmonic)
}

pub fn turn_object_f1_with(gold: &BTreeSet<ObjectId>, pred: &BTreeSet<ObjectId>, mode: F1Mode) -> TurnScore {
    let tp = gold.intersection(pred).count() as u64;
    let fp = pred.len() as u64 - tp;
    let fn_ = gold.len() as u64 - tp;
    TurnScore::from_counts(tp, fp, fn_, mode)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateOptions {
    /// Leave both-empty turns out of the per-turn mean.
    pub skip_empty: bool,
    pub f1_mode: F1Mode,
}

/// Which F1 a delta or report cell is computed on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Pooled tp/fp/fn over all turns.
    #[default]
    Micro,
    /// Mean of per-turn F1.
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateScore {
    pub n_turns: usize,
    /// Turns entering the per-turn mean.
    pub n_scored: usize,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision_micro: f64,
    pub recall_micro: f64,
    pub f1_micro: f64,
    pub f1_macro_mean: f64,
    /// Standard error of the per-turn F1 mean (sample SD over sqrt(n)).
    pub f1_macro_se: f64,
}

impl AggregateScore {
    pub fn empty() -> Self {
        AggregateScore {
            n_turns: 0,
            n_scored: 0,
            tp: 0,
            fp: 0,
            fn_: 0,
            precision_micro: 0.0,
            recall_micro: 0.0,
            f1_micro: 0.0,
            f1_macro_mean: 0.0,
            f1_macro_se: 0.0,
        }
    }

    pub fn f1(&self, aggregation: Aggregation) -> f64 {
        match aggregation {
            Aggregation::Micro => self.f1_micro,
            Aggregation::Macro => self.f1_macro_mean,
        }
    }
}

pub fn aggregate(scores: &[TurnScore]) -> AggregateScore {
    aggregate_with(scores, AggregateOptions::default())
}

/// Pools counts for the micro scores and averages per-turn F1 in input
/// order for the macro mean.
pub fn aggregate_with(scores: &[TurnScore], options: AggregateOptions) -> AggregateScore {
    if scores.is_empty() {
        return AggregateScore::empty();
    }
    let (tp, fp, fn_) = scores
        .iter()
        .fold((0, 0, 0), |(tp, fp, fn_), s| (tp + s.tp, fp + s.fp, fn_ + s.fn_));
    let (precision_micro, recall_micro, f1_micro) = prf(tp, fp, fn_, options.f1_mode);

    let per_turn: Vec<f64> = scores
        .iter()
        .filter(|s| !(options.skip_empty && s.is_both_empty()))
        .map(|s| s.f1)
        .collect();
    let (f1_macro_mean, f1_macro_se) = mean_se(&per_turn);
    AggregateScore {
        n_turns: scores.len(),
        n_scored: per_turn.len(),
        tp,
        fp,
        fn_,
        precision_micro,
        recall_micro,
        f1_micro,
        f1_macro_mean,
        f1_macro_se,
    }
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaResult {
    pub aggregation: Aggregation,
    pub before: AggregateScore,
    pub after: AggregateScore,
    /// Percent change from before to after; absent when before F1 is 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_pct: Option<f64>,
}

/// `(after - before) / before * 100`, undefined for a zero baseline.
pub fn delta_pct(before_f1: f64, after_f1: f64) -> Option<f64> {
    (before_f1 != 0.0).then(|| (after_f1 - before_f1) / before_f1 * 100.0)
}

pub fn relative_delta(before: AggregateScore, after: AggregateScore) -> DeltaResult {
    relative_delta_with(before, after, Aggregation::Micro)
}

pub fn relative_delta_with(before: AggregateScore, after: AggregateScore, aggregation: Aggregation) -> DeltaResult {
    DeltaResult {
        aggregation,
        before,
        after,
        delta_pct: delta_pct(before.f1(aggregation), after.f1(aggregation)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityStats {
    pub attribute: String,
    pub mean_candidates: f64,
    /// Population SD.
    pub sd_candidates: f64,
    pub n_observations: usize,
}

pub fn candidate_object_stats(
    corpus: &Corpus,
    turn_subset: &BTreeSet<TurnKey>,
    attribute: &str,
) -> Result<AmbiguityStats, MetricsError> {
    candidate_object_stats_with(corpus, turn_subset, attribute, true)
}

/// For every gold object of every turn in the subset, counts the objects of
/// the turn's scene sharing its `attribute` value. Gold objects without the
/// attribute, or absent from the scene, give no observation.
pub fn candidate_object_stats_with(
    corpus: &Corpus,
    turn_subset: &BTreeSet<TurnKey>,
    attribute: &str,
    include_self: bool,
) -> Result<AmbiguityStats, MetricsError> {
    let available = corpus.attribute_categories();
    if !available.contains(attribute) {
        return Err(MetricsError::UnknownAttribute {
            attribute: attribute.to_string(),
            available: available.into_iter().collect(),
        });
    }
    // scene -> value -> count
    let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for (id, scene) in &corpus.scenes {
        let per_value = counts.entry(id.as_str()).or_default();
        for v in scene.objects.iter().filter_map(|o| o.attribute(attribute)) {
            *per_value.entry(v).or_default() += 1;
        }
    }

    let mut observations = Vec::new();
    for (dialogue_id, turn_idx) in turn_subset {
        let Some(turn) = corpus.turn(dialogue_id, *turn_idx) else {
            continue;
        };
        let Some(scene) = corpus.scene_of(turn) else {
            continue;
        };
        for obj_id in &turn.user_referenced_objects {
            let Some(value) = scene.object(*obj_id).and_then(|o| o.attribute(attribute)) else {
                continue;
            };
            let n = counts[scene.scene_id.as_str()][value];
            observations.push(if include_self { n } else { n - 1 } as f64);
        }
    }
    let (mean, sd) = crate::corpus::mean_sd(&observations);
    Ok(AmbiguityStats {
        attribute: attribute.to_string(),
        mean_candidates: mean,
        sd_candidates: sd,
        n_observations: observations.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::{object, turn};
    use crate::corpus::{Dialogue, Scene};

    fn set(ids: &[ObjectId]) -> BTreeSet<ObjectId> {
        ids.iter().copied().collect()
    }

    #[test]
    fn identity_scores_one() {
        let s = turn_object_f1(&set(&[1, 2]), &set(&[1, 2]));
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn two_of_three() {
        let s = turn_object_f1(&set(&[1, 2, 3]), &set(&[2, 3, 4]));
        assert_eq!((s.tp, s.fp, s.fn_), (2, 1, 1));
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn both_empty_scores_one() {
        let s = turn_object_f1(&set(&[]), &set(&[]));
        assert_eq!(s.f1, 1.0);
        assert!(s.is_both_empty());
    }

    #[test]
    fn one_side_empty_scores_zero() {
        assert_eq!(turn_object_f1(&set(&[1]), &set(&[])).f1, 0.0);
        assert_eq!(turn_object_f1(&set(&[]), &set(&[1])).f1, 0.0);
    }

    #[test]
    fn arithmetic_mean_reading() {
        let s = turn_object_f1_with(&set(&[1, 2]), &set(&[1]), F1Mode::ArithmeticMean);
        assert_eq!(s.f1, 0.75);
    }

    #[test]
    fn pooled_versus_per_turn() {
        let scores = [
            turn_object_f1(&set(&[1, 2]), &set(&[1, 2])),
            turn_object_f1(&set(&[3]), &set(&[4])),
        ];
        let agg = aggregate(&scores);
        assert_eq!((agg.tp, agg.fp, agg.fn_), (2, 1, 1));
        assert!((agg.f1_micro - 2.0 / 3.0).abs() < 1e-12);
        assert!((agg.precision_micro - 2.0 / 3.0).abs() < 1e-12);
        assert!((agg.recall_micro - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(agg.f1_macro_mean, 0.5);
        // sample SD of {1, 0} is sqrt(0.5); SE = sqrt(0.5 / 2) = 0.5
        assert!((agg.f1_macro_se - 0.5).abs() < 1e-12);
    }

    #[test]
    fn perfect_copies() {
        let perfect = turn_object_f1(&set(&[7]), &set(&[7]));
        let agg = aggregate(&[perfect; 5]);
        assert_eq!((agg.f1_micro, agg.f1_macro_mean, agg.f1_macro_se), (1.0, 1.0, 0.0));
    }

    #[test]
    fn single_turn_macro() {
        let s = turn_object_f1(&set(&[1, 2, 3]), &set(&[2, 3, 4]));
        let agg = aggregate(&[s]);
        assert_eq!(agg.f1_macro_mean, s.f1);
        assert_eq!(agg.f1_macro_se, 0.0);
    }

    #[test]
    fn empty_aggregate_is_zero() {
        let agg = aggregate(&[]);
        assert_eq!(agg, AggregateScore::empty());
    }

    #[test]
    fn skip_empty_only_changes_macro() {
        let scores = [
            turn_object_f1(&set(&[]), &set(&[])),
            turn_object_f1(&set(&[1]), &set(&[2])),
        ];
        let keep = aggregate(&scores);
        let skip = aggregate_with(
            &scores,
            AggregateOptions {
                skip_empty: true,
                ..Default::default()
            },
        );
        assert_eq!(keep.f1_micro, skip.f1_micro);
        assert_eq!(keep.f1_macro_mean, 0.5);
        assert_eq!(skip.f1_macro_mean, 0.0);
        assert_eq!(skip.n_scored, 1);
        assert_eq!(skip.n_turns, 2);
    }

    fn agg_with_f1(f1: f64) -> AggregateScore {
        AggregateScore {
            f1_micro: f1,
            f1_macro_mean: f1,
            ..AggregateScore::empty()
        }
    }

    #[test]
    fn delta_examples() {
        let round1 = |x: f64| (x * 10.0).round() / 10.0;
        let d = relative_delta(agg_with_f1(0.364), agg_with_f1(0.291));
        assert_eq!(round1(d.delta_pct.unwrap()), -20.1);
        let d = relative_delta(agg_with_f1(0.669), agg_with_f1(0.743));
        assert_eq!(round1(d.delta_pct.unwrap()), 11.1);
        let d = relative_delta(agg_with_f1(0.817), agg_with_f1(0.846));
        assert_eq!(round1(d.delta_pct.unwrap()), 3.5);
    }

    #[test]
    fn zero_baseline_has_no_delta() {
        assert_eq!(relative_delta(agg_with_f1(0.0), agg_with_f1(0.5)).delta_pct, None);
    }

    #[test]
    fn delta_uses_selected_aggregation() {
        let before = AggregateScore {
            f1_micro: 0.5,
            f1_macro_mean: 0.25,
            ..AggregateScore::empty()
        };
        let after = agg_with_f1(0.5);
        assert_eq!(relative_delta_with(before, after, Aggregation::Micro).delta_pct, Some(0.0));
        assert_eq!(relative_delta_with(before, after, Aggregation::Macro).delta_pct, Some(100.0));
    }

    fn jacket_corpus() -> Corpus {
        let mut corpus = Corpus::new("c");
        corpus.scenes.insert(
            "S".into(),
            Scene {
                scene_id: "S".into(),
                objects: vec![
                    object(1, &[("type", "jacket"), ("color", "red")]),
                    object(2, &[("type", "jacket"), ("color", "blue")]),
                    object(3, &[("type", "jacket"), ("color", "blue")]),
                    object(4, &[("type", "shirt"), ("color", "green")]),
                    object(5, &[("type", "shirt"), ("color", "blue")]),
                ],
            },
        );
        corpus.dialogues.push(Dialogue {
            dialogue_id: "d".into(),
            turns: vec![turn(0, "", "", &[1], false, "S"), turn(1, "", "", &[4], false, "S")],
            domain_label: None,
        });
        corpus
    }

    #[test]
    fn counts_same_type_candidates() {
        let corpus = jacket_corpus();
        let subset = BTreeSet::from([("d".to_string(), 0)]);
        let stats = candidate_object_stats(&corpus, &subset, "type").unwrap();
        assert_eq!(stats.n_observations, 1);
        assert_eq!(stats.mean_candidates, 3.0);
        let without_self = candidate_object_stats_with(&corpus, &subset, "type", false).unwrap();
        assert_eq!(without_self.mean_candidates, 2.0);
    }

    #[test]
    fn unique_colour_counts_only_itself() {
        let corpus = jacket_corpus();
        let subset = BTreeSet::from([("d".to_string(), 0), ("d".to_string(), 1)]);
        let stats = candidate_object_stats(&corpus, &subset, "color").unwrap();
        assert_eq!(stats.n_observations, 2);
        assert_eq!(stats.mean_candidates, 1.0);
        assert_eq!(stats.sd_candidates, 0.0);
    }

    #[test]
    fn unknown_attribute_lists_available() {
        let err = candidate_object_stats(&jacket_corpus(), &BTreeSet::new(), "material").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("color") && msg.contains("type"), "{msg}");
    }
}
