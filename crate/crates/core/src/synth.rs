//! Deterministic generator of synthetic situated-dialogue corpora.
//!
//! Every dialogue gets its own scene. Objects sit in distinct columns of a
//! grid so "leftmost" and "rightmost" are always well defined. Ambiguous
//! turns ask about an object type shared by several objects; the system
//! answers with a generic clarification request and the next user turn
//! disambiguates through a property, a relation or the dialogue history.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Dialogue, ObjectId, Scene, SceneObject, Turn};
use crate::tagger::PropertyTag;

pub const DEFAULT_CONFIG: &str = include_str!("../configs/simmc_shaped.toml");

const TYPE: &str = "type";
const CELL_W: f64 = 60.0;
const CELL_H: f64 = 120.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic corpus configuration: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed configuration: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_dialogues: usize,
    /// Inclusive `[min, max]`.
    pub turns_per_dialogue: [usize; 2],
    /// Inclusive `[min, max]`.
    pub objects_per_scene: [usize; 2],
    /// Attribute category -> candidate values. `type` is required.
    pub attribute_pools: BTreeMap<String, Vec<String>>,
    pub ambiguity_rate: f64,
    pub tag_mix: BTreeMap<PropertyTag, f64>,
    pub solvable_after_cr: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig::from_toml(DEFAULT_CONFIG).expect("shipped configuration is valid")
    }
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let config: SynthConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| SynthError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        SynthConfig::from_toml(&text)
    }

    fn property_pools(&self) -> impl Iterator<Item = (&String, &Vec<String>)> {
        self.attribute_pools.iter().filter(|(k, _)| k.as_str() != TYPE)
    }

    /// Most objects one type can have while its property values stay distinct.
    fn type_capacity(&self) -> usize {
        if self.solvable_after_cr {
            self.property_pools().map(|(_, v)| v.len()).min().unwrap_or(usize::MAX)
        } else {
            usize::MAX
        }
    }

    fn weight(&self, tag: PropertyTag) -> f64 {
        self.tag_mix.get(&tag).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: String| Err(SynthError::Config(m));
        if self.n_dialogues == 0 {
            return err("n_dialogues must be positive".into());
        }
        for (name, [lo, hi]) in [("turns_per_dialogue", self.turns_per_dialogue), ("objects_per_scene", self.objects_per_scene)] {
            if lo == 0 || lo > hi {
                return err(format!("{name} must be a non-empty range of positive integers, got [{lo}, {hi}]"));
            }
        }
        if !(0.0..=1.0).contains(&self.ambiguity_rate) {
            return err(format!("ambiguity_rate must lie in [0, 1], got {}", self.ambiguity_rate));
        }
        if self.tag_mix.values().any(|w| !w.is_finite() || *w < 0.0) {
            return err("tag_mix weights must be non-negative".into());
        }
        if self.tag_mix.values().sum::<f64>() <= 0.0 {
            return err("tag_mix weights are all zero".into());
        }
        let types = self.attribute_pools.get(TYPE).map(Vec::len).unwrap_or(0);
        if types == 0 {
            return err("attribute_pools must list at least one type".into());
        }
        for (attr, values) in &self.attribute_pools {
            let distinct: BTreeSet<_> = values.iter().collect();
            if values.is_empty() || distinct.len() != values.len() {
                return err(format!("attribute pool {attr:?} must be non-empty without repeated values"));
            }
        }
        if self.weight(PropertyTag::IndividualProperty) > 0.0 && self.property_pools().next().is_none() {
            return err("IndividualProperty exchanges need an attribute pool besides type".into());
        }
        let cap = self.type_capacity();
        if self.objects_per_scene[1] > types.saturating_mul(cap) {
            return err(format!(
                "{} objects cannot get distinct attribute values with {types} types of at most {cap} objects",
                self.objects_per_scene[1]
            ));
        }
        if self.ambiguity_rate > 0.0 {
            if self.turns_per_dialogue[0] < 3 {
                return err("ambiguous turns need dialogues of at least 3 turns".into());
            }
            if self.objects_per_scene[0] < 2 || cap < 2 {
                return err("ambiguous turns need at least two objects of one type".into());
            }
        }
        Ok(())
    }
}

/// Most ambiguous turns a dialogue of `n_turns` can hold: never the first
/// or last turn, and at least two turns between consecutive ones.
fn max_ambiguous(n_turns: usize) -> usize {
    (0..=n_turns)
        .take_while(|&k| k == 0 || n_turns >= 2 + 2 * (k - 1) + k)
        .last()
        .unwrap_or(0)
}

/// Picks tags so realized shares track `tag_mix` within one exchange.
struct TagQuota {
    weights: Vec<(PropertyTag, f64)>,
    counts: Vec<usize>,
    issued: usize,
}

impl TagQuota {
    fn new(config: &SynthConfig) -> Self {
        let total: f64 = config.tag_mix.values().sum();
        let weights: Vec<_> = PropertyTag::ALL
            .iter()
            .map(|&t| (t, config.weight(t) / total))
            .filter(|(_, w)| *w > 0.0)
            .collect();
        let counts = vec![0; weights.len()];
        TagQuota { weights, counts, issued: 0 }
    }

    fn next(&mut self) -> PropertyTag {
        self.issued += 1;
        let target = self.issued as f64;
        let (i, _) = self
            .weights
            .iter()
            .zip(&self.counts)
            .map(|((_, w), c)| w * target - *c as f64)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, d)| if d > best.1 { (i, d) } else { best });
        self.counts[i] += 1;
        self.weights[i].0
    }
}

const CR_TEMPLATES: [&str; 4] = [
    "Sorry, which one do you mean?",
    "Which one are you referring to?",
    "Could you be more specific?",
    "I see several of those. Which one?",
];
const HISTORY_RESPONSES: [&str; 3] = ["The one in my cart.", "The one I asked about earlier.", "The one you added."];
const UNCLASSIFIED_RESPONSES: [&str; 2] = ["I'm not sure, I think it's that one.", "Hmm, that one please."];
const IDLE_UTTERANCES: [&str; 3] = ["Can you show me what else you have?", "I'm just browsing today.", "What do you think would suit me?"];
const IDLE_REPLIES: [&str; 3] = ["Of course, take a look around.", "Let me know if anything catches your eye.", "Happy to help."];

#[derive(Debug, Clone, Copy)]
enum Side {
    Left,
    Right,
}

struct Exchange {
    tag: PropertyTag,
    target: usize,
    response: String,
}

struct SceneBuilder<'c> {
    config: &'c SynthConfig,
}

impl SceneBuilder<'_> {
    fn build(&self, rng: &mut ChaCha8Rng, scene_id: String, n: usize) -> Scene {
        let types = &self.config.attribute_pools[TYPE];
        let cap = self.config.type_capacity();
        let mut group_size = vec![0usize; types.len()];
        let mut type_of = Vec::with_capacity(n);
        for i in 0..n {
            let t = if i == 1 {
                type_of[0]
            } else {
                let open: Vec<usize> = (0..types.len()).filter(|&t| group_size[t] < cap).collect();
                *open.choose(rng).expect("capacity checked at validation")
            };
            group_size[t] += 1;
            type_of.push(t);
        }

        let mut columns: Vec<usize> = (0..n).collect();
        columns.shuffle(rng);
        let mut objects: Vec<SceneObject> = (0..n)
            .map(|i| {
                let row = rng.random_range(0..3) as f64;
                let mut attributes = BTreeMap::new();
                attributes.insert(TYPE.to_string(), types[type_of[i]].clone());
                SceneObject {
                    object_id: i as ObjectId + 1,
                    attributes,
                    bbox: Some([columns[i] as f64 * CELL_W, row * CELL_H, CELL_W * 0.8, CELL_H * 0.8]),
                    position: None,
                }
            })
            .collect();

        for (attr, pool) in self.config.property_pools() {
            for t in 0..types.len() {
                let members: Vec<usize> = (0..n).filter(|&i| type_of[i] == t).collect();
                let values: Vec<&String> = if self.config.solvable_after_cr {
                    sample(rng, pool.len(), members.len()).into_iter().map(|j| &pool[j]).collect()
                } else {
                    members.iter().map(|_| pool.choose(rng).expect("non-empty pool")).collect()
                };
                for (i, v) in members.into_iter().zip(values) {
                    objects[i].attributes.insert(attr.clone(), v.clone());
                }
            }
        }
        Scene { scene_id, objects }
    }
}

fn describe(object: &SceneObject) -> String {
    let ty = object.attribute(TYPE).unwrap_or("item");
    let property = object
        .attribute("color")
        .or_else(|| object.attributes.iter().find(|(k, _)| k.as_str() != TYPE).map(|(_, v)| v.as_str()));
    match property {
        Some(p) => format!("{p} {ty}"),
        None => ty.to_string(),
    }
}

fn x_of(object: &SceneObject) -> f64 {
    object.bbox.map(|b| b[0]).unwrap_or(0.0)
}

struct DialogueBuilder<'c> {
    config: &'c SynthConfig,
}

impl DialogueBuilder<'_> {
    fn exchange(&self, rng: &mut ChaCha8Rng, scene: &Scene, tag: PropertyTag) -> Exchange {
        let objs = &scene.objects;
        let same_type = |i: usize| -> Vec<usize> {
            (0..objs.len()).filter(|&j| objs[j].attribute(TYPE) == objs[i].attribute(TYPE)).collect()
        };
        let ambiguous: Vec<usize> = (0..objs.len()).filter(|&i| same_type(i).len() >= 2).collect();
        let mut target = *ambiguous.choose(rng).expect("scene has a shared type");
        let response = match tag {
            PropertyTag::IndividualProperty => {
                let attrs: Vec<&String> = self.config.property_pools().map(|(k, _)| k).collect();
                let attr = attrs.choose(rng).expect("checked at validation");
                format!("The {} one.", objs[target].attributes[*attr])
            }
            PropertyTag::RelationalContext => {
                let side = if rng.random_bool(0.5) { Side::Left } else { Side::Right };
                if self.config.solvable_after_cr {
                    let group = same_type(target);
                    let pick = match side {
                        Side::Left => group.iter().min_by(|a, b| x_of(&objs[**a]).total_cmp(&x_of(&objs[**b]))),
                        Side::Right => group.iter().max_by(|a, b| x_of(&objs[**a]).total_cmp(&x_of(&objs[**b]))),
                    };
                    target = *pick.expect("non-empty group");
                }
                let word = match side {
                    Side::Left => "left",
                    Side::Right => "right",
                };
                let templates = [
                    format!("The one on the {word}."),
                    format!("The one on the far {word}."),
                    format!("The one farthest to the {word}."),
                ];
                templates.choose(rng).expect("non-empty").clone()
            }
            PropertyTag::DialogueHistory => HISTORY_RESPONSES.choose(rng).expect("non-empty").to_string(),
            PropertyTag::Unclassified => UNCLASSIFIED_RESPONSES.choose(rng).expect("non-empty").to_string(),
        };
        Exchange { tag, target, response }
    }

    fn build(&self, rng: &mut ChaCha8Rng, dialogue_id: String, scene: &Scene, n_turns: usize, exchanges: Vec<(usize, Exchange)>) -> Dialogue {
        let objs = &scene.objects;
        let at: BTreeMap<usize, &Exchange> = exchanges.iter().map(|(p, e)| (*p, e)).collect();
        let turn = |idx: usize, user: String, system: String, refs: BTreeSet<ObjectId>, ambiguous: bool| Turn {
            turn_idx: idx,
            user_utterance: user,
            system_utterance: system,
            user_referenced_objects: refs,
            is_ambiguous: ambiguous,
            scene_id: scene.scene_id.clone(),
        };
        let mut turns = Vec::with_capacity(n_turns);
        for idx in 0..n_turns {
            let before = at.get(&idx);
            let after = idx.checked_sub(1).and_then(|p| at.get(&p));
            let upcoming = at.get(&(idx + 1));
            let t = if let Some(ex) = before {
                let target = &objs[ex.target];
                turn(
                    idx,
                    format!("What size is that {}?", target.attribute(TYPE).unwrap_or("item")),
                    CR_TEMPLATES.choose(rng).expect("non-empty").to_string(),
                    BTreeSet::from([target.object_id]),
                    true,
                )
            } else if let Some(ex) = after {
                turn(
                    idx,
                    ex.response.clone(),
                    "Got it, it comes in small and large.".to_string(),
                    BTreeSet::from([objs[ex.target].object_id]),
                    false,
                )
            } else if let Some(ex) = upcoming.filter(|e| e.tag == PropertyTag::DialogueHistory) {
                let target = &objs[ex.target];
                turn(
                    idx,
                    format!("Please add the {} to my cart.", describe(target)),
                    "Done, it's in your cart now.".to_string(),
                    BTreeSet::from([target.object_id]),
                    false,
                )
            } else {
                let avoid = upcoming.map(|e| e.target);
                let others: Vec<usize> = (0..objs.len()).filter(|&i| Some(i) != avoid).collect();
                match others.choose(rng) {
                    Some(&i) if idx > 0 && rng.random_bool(0.5) => turn(
                        idx,
                        format!("Tell me more about the {}.", describe(&objs[i])),
                        "It's one of our most popular items.".to_string(),
                        BTreeSet::from([objs[i].object_id]),
                        false,
                    ),
                    _ if idx == 0 => turn(
                        idx,
                        "Hi, I'm looking for something new.".to_string(),
                        "Sure, take a look around.".to_string(),
                        BTreeSet::new(),
                        false,
                    ),
                    _ => turn(
                        idx,
                        IDLE_UTTERANCES.choose(rng).expect("non-empty").to_string(),
                        IDLE_REPLIES.choose(rng).expect("non-empty").to_string(),
                        BTreeSet::new(),
                        false,
                    ),
                }
            };
            turns.push(t);
        }
        Dialogue {
            dialogue_id,
            turns,
            domain_label: Some("fashion".to_string()),
        }
    }
}

/// Generates a corpus; identical `(config, seed)` pairs give identical corpora.
pub fn generate_corpus(config: &SynthConfig, seed: u64) -> Result<Corpus, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Corpus::new(format!("synth_{seed}"));
    let mut quota = TagQuota::new(config);
    let scenes = SceneBuilder { config };
    let dialogues = DialogueBuilder { config };
    let offset: f64 = rng.random();
    let mut turns_so_far = 0usize;
    let mut placed = 0usize;

    for d in 0..config.n_dialogues {
        let n_turns = rng.random_range(config.turns_per_dialogue[0]..=config.turns_per_dialogue[1]);
        let n_objects = rng.random_range(config.objects_per_scene[0]..=config.objects_per_scene[1]);
        let scene = scenes.build(&mut rng, format!("scene_{d:05}"), n_objects);

        turns_so_far += n_turns;
        let due = (config.ambiguity_rate * turns_so_far as f64 + offset).floor() as usize;
        let k = due.saturating_sub(placed).min(max_ambiguous(n_turns));
        placed += k;
        let positions: Vec<usize> = if k == 0 {
            Vec::new()
        } else {
            let span = n_turns - 2 - 2 * (k - 1);
            let mut ys: Vec<usize> = sample(&mut rng, span, k).into_iter().collect();
            ys.sort_unstable();
            ys.into_iter().enumerate().map(|(i, y)| 1 + y + 2 * i).collect()
        };
        let exchanges = positions
            .into_iter()
            .map(|p| {
                let tag = quota.next();
                (p, dialogues.exchange(&mut rng, &scene, tag))
            })
            .collect();
        let dialogue = dialogues.build(&mut rng, format!("synth_{d:05}"), &scene, n_turns, exchanges);
        corpus.scenes.insert(scene.scene_id.clone(), scene);
        corpus.dialogues.push(dialogue);
    }
    Ok(corpus)
}
