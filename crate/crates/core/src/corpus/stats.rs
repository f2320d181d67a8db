use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Corpus, ObjectId};

/// Descriptive corpus statistics. Standard deviations are population SDs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_dialogues: usize,
    pub n_turns: usize,
    pub n_scenes: usize,
    pub mean_turn_pairs: f64,
    pub sd_turn_pairs: f64,
    pub mean_scene_objects: f64,
    pub max_scene_objects: usize,
    pub mean_unique_referenced_per_dialogue: f64,
    pub sd_unique_referenced: f64,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let turn_counts: Vec<f64> = corpus.dialogues.iter().map(|d| d.turns.len() as f64).collect();
    let scene_sizes: Vec<f64> = corpus.scenes.values().map(|s| s.objects.len() as f64).collect();
    let unique_refs: Vec<f64> = corpus
        .dialogues
        .iter()
        .map(|d| {
            d.turns
                .iter()
                .flat_map(|t| t.user_referenced_objects.iter().copied())
                .collect::<BTreeSet<ObjectId>>()
                .len() as f64
        })
        .collect();

    let (mean_turn_pairs, sd_turn_pairs) = mean_sd(&turn_counts);
    let (mean_scene_objects, _) = mean_sd(&scene_sizes);
    let (mean_unique, sd_unique) = mean_sd(&unique_refs);
    CorpusStats {
        n_dialogues: corpus.dialogues.len(),
        n_turns: corpus.n_turns(),
        n_scenes: corpus.scenes.len(),
        mean_turn_pairs,
        sd_turn_pairs,
        mean_scene_objects,
        max_scene_objects: corpus.scenes.values().map(|s| s.objects.len()).max().unwrap_or(0),
        mean_unique_referenced_per_dialogue: mean_unique,
        sd_unique_referenced: sd_unique,
    }
}

/// Mean and population standard deviation; `(0, 0)` for no data.
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
