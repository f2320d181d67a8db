//! Heuristic reference resolvers producing prediction sets.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EvalError, PredictionSet};
use crate::corpus::{Corpus, Dialogue, ObjectId, Scene, SceneObject};
use crate::extract::ClarificationExchange;
use crate::tagger::normalize::normalize;
use crate::tagger::{attribute_value_parts, PhraseMatcher, RuleSet};
use crate::TurnKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolverKind {
    /// Copies the gold references.
    Oracle,
    /// A random subset of the active scene.
    Random,
    /// The gold references of the latest earlier turn that has any.
    RecentMention,
    /// Scene objects matching every attribute value mentioned.
    PropertyMatch,
}

impl ResolverKind {
    pub fn name(self) -> &'static str {
        match self {
            ResolverKind::Oracle => "oracle",
            ResolverKind::Random => "random",
            ResolverKind::RecentMention => "recent_mention",
            ResolverKind::PropertyMatch => "property_match",
        }
    }
}

impl fmt::Display for ResolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ResolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "oracle" => Ok(ResolverKind::Oracle),
            "random" => Ok(ResolverKind::Random),
            "recent_mention" => Ok(ResolverKind::RecentMention),
            "property_match" => Ok(ResolverKind::PropertyMatch),
            other => Err(format!("unknown resolver {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolverSpec {
    pub kind: ResolverKind,
    pub seed: u64,
    /// Earlier turns visible to `recent_mention`.
    pub context_window: usize,
    /// Whether the CR and the After-CR response are visible when
    /// `property_match` scores an After-CR turn.
    pub use_after_cr: bool,
}

impl ResolverSpec {
    pub fn new(kind: ResolverKind) -> Self {
        ResolverSpec {
            kind,
            seed: 0,
            context_window: 10,
            use_after_cr: true,
        }
    }
}

pub fn run_resolver(corpus: &Corpus, spec: &ResolverSpec, ces: &[ClarificationExchange]) -> PredictionSet {
    run_resolver_with(corpus, spec, ces, &RuleSet::default_rules(), 1).expect("single-threaded pool")
}

/// Runs a resolver over every user turn, one dialogue per task. Output does
/// not depend on `jobs`.
pub fn run_resolver_with(
    corpus: &Corpus,
    spec: &ResolverSpec,
    ces: &[ClarificationExchange],
    rules: &RuleSet,
    jobs: usize,
) -> Result<PredictionSet, EvalError> {
    let ctx = Context::new(corpus, spec, ces, rules);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    let parts: Vec<Vec<(TurnKey, BTreeSet<ObjectId>)>> =
        pool.install(|| corpus.dialogues.par_iter().map(|d| ctx.dialogue(d)).collect());
    let mut set = PredictionSet::new(spec.kind.name());
    set.predictions = parts.into_iter().flatten().collect();
    Ok(set)
}

struct Context<'a> {
    corpus: &'a Corpus,
    spec: &'a ResolverSpec,
    rules: &'a RuleSet,
    /// After-CR turn -> its exchange.
    after_of: HashMap<TurnKey, &'a ClarificationExchange>,
    gold_sizes: Vec<usize>,
}

impl<'a> Context<'a> {
    fn new(corpus: &'a Corpus, spec: &'a ResolverSpec, ces: &'a [ClarificationExchange], rules: &'a RuleSet) -> Self {
        let after_of = ces.iter().filter_map(|c| c.after_key().map(|k| (k, c))).collect();
        let gold_sizes = corpus
            .dialogues
            .iter()
            .flat_map(|d| d.turns.iter().map(|t| t.user_referenced_objects.len()))
            .collect();
        Context {
            corpus,
            spec,
            rules,
            after_of,
            gold_sizes,
        }
    }

    fn dialogue(&self, d: &'a Dialogue) -> Vec<(TurnKey, BTreeSet<ObjectId>)> {
        let mut matchers: HashMap<&str, SceneMatcher> = HashMap::new();
        (0..d.turns.len())
            .map(|idx| {
                let turn = &d.turns[idx];
                let scene = self.corpus.scene_of(turn);
                let pred = match self.spec.kind {
                    ResolverKind::Oracle => turn.user_referenced_objects.clone(),
                    ResolverKind::Random => scene.map(|s| self.random(d, idx, s)).unwrap_or_default(),
                    ResolverKind::RecentMention => self.recent(d, idx),
                    ResolverKind::PropertyMatch => match scene {
                        Some(s) => {
                            let m = matchers.entry(&s.scene_id).or_insert_with(|| SceneMatcher::new(s, self.rules));
                            m.resolve(&self.window(d, idx))
                        }
                        None => BTreeSet::new(),
                    },
                };
                ((d.dialogue_id.clone(), idx), pred)
            })
            .collect()
    }

    fn random(&self, d: &Dialogue, idx: usize, scene: &Scene) -> BTreeSet<ObjectId> {
        if self.gold_sizes.is_empty() || scene.objects.is_empty() {
            return BTreeSet::new();
        }
        let mut hasher = Sha256::new();
        hasher.update(self.spec.seed.to_le_bytes());
        hasher.update(d.dialogue_id.as_bytes());
        hasher.update([0]);
        hasher.update((idx as u64).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
        let size = self.gold_sizes[rng.random_range(0..self.gold_sizes.len())].min(scene.objects.len());
        let ids: Vec<ObjectId> = scene.object_ids().into_iter().collect();
        sample(&mut rng, ids.len(), size).into_iter().map(|i| ids[i]).collect()
    }

    fn recent(&self, d: &Dialogue, idx: usize) -> BTreeSet<ObjectId> {
        let lo = idx.saturating_sub(self.spec.context_window);
        (lo..idx)
            .rev()
            .map(|j| &d.turns[j].user_referenced_objects)
            .find(|g| !g.is_empty())
            .cloned()
            .unwrap_or_default()
    }

    /// Text visible when resolving a turn. An After-CR turn is resolved
    /// from the Before-CR utterance, extended by the CR and the response
    /// when `use_after_cr` is set.
    fn window(&self, d: &'a Dialogue, idx: usize) -> Vec<&'a str> {
        let key = (d.dialogue_id.clone(), idx);
        match self.after_of.get(&key) {
            Some(ce) => {
                let before = &d.turns[ce.before_turn_idx].user_utterance;
                let mut texts = vec![before.as_str()];
                if self.spec.use_after_cr {
                    texts.push(ce.cr_text.as_str());
                    texts.push(d.turns[idx].user_utterance.as_str());
                }
                texts
            }
            None => vec![d.turns[idx].user_utterance.as_str()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Left,
    Right,
    Top,
    Bottom,
}

impl Direction {
    fn of(token: &str) -> Option<Self> {
        match token {
            "left" | "leftmost" => Some(Direction::Left),
            "right" | "rightmost" => Some(Direction::Right),
            "top" | "upper" | "topmost" => Some(Direction::Top),
            "bottom" | "lower" | "bottommost" => Some(Direction::Bottom),
            _ => None,
        }
    }
}

/// Attribute-value matcher over the objects of one scene.
struct SceneMatcher<'s> {
    scene: &'s Scene,
    matcher: PhraseMatcher,
    /// object -> attribute -> normalized value parts
    values: BTreeMap<ObjectId, BTreeMap<String, BTreeSet<String>>>,
}

impl<'s> SceneMatcher<'s> {
    fn new(scene: &'s Scene, rules: &RuleSet) -> Self {
        let mut by_attr: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut values = BTreeMap::new();
        for object in &scene.objects {
            let mut own: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
            for (attr, value) in &object.attributes {
                if rules.lexicon_category_for_attribute(attr).is_none() {
                    continue;
                }
                let parts: BTreeSet<String> = attribute_value_parts(value).collect();
                by_attr.entry(attr.clone()).or_default().extend(parts.iter().cloned());
                own.insert(attr.clone(), parts);
            }
            values.insert(object.object_id, own);
        }
        let matcher = PhraseMatcher::new(by_attr.iter().map(|(a, ps)| (a.as_str(), ps.iter().map(String::as_str))));
        SceneMatcher { scene, matcher, values }
    }

    fn resolve(&self, texts: &[&str]) -> BTreeSet<ObjectId> {
        let mut mentioned: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut directions = Vec::new();
        for text in texts {
            let norm = normalize(text);
            for hit in self.matcher.find(&norm) {
                mentioned.entry(hit.category).or_default().insert(hit.phrase);
            }
            directions.extend(norm.token_strs().into_iter().filter_map(Direction::of));
        }
        if mentioned.is_empty() && directions.is_empty() {
            return BTreeSet::new();
        }
        let mut candidates: Vec<&SceneObject> = self
            .scene
            .objects
            .iter()
            .filter(|o| {
                let own = &self.values[&o.object_id];
                mentioned
                    .iter()
                    .all(|(attr, wanted)| own.get(*attr).is_some_and(|parts| wanted.iter().any(|w| parts.contains(*w))))
            })
            .collect();
        for dir in directions {
            candidates = extreme(candidates, dir);
        }
        candidates.into_iter().map(|o| o.object_id).collect()
    }
}

/// Keeps the candidates at the extreme of `dir`; objects without a
/// location leave the set unchanged.
fn extreme(candidates: Vec<&SceneObject>, dir: Direction) -> Vec<&SceneObject> {
    if candidates.len() < 2 || candidates.iter().any(|o| o.center().is_none()) {
        return candidates;
    }
    let key = |o: &SceneObject| {
        let (x, y) = o.center().expect("checked");
        match dir {
            Direction::Left => x,
            Direction::Right => -x,
            Direction::Top => y,
            Direction::Bottom => -y,
        }
    };
    let best = candidates.iter().map(|o| key(o)).fold(f64::INFINITY, f64::min);
    candidates.into_iter().filter(|o| key(o) == best).collect()
}
