use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use regex::Regex;
use serde::Deserialize;

use super::lexicon::Lexicon;
use super::{PropertyTag, TaggerError};

/// Rules shipped with the crate.
pub const DEFAULT_RULES: &str = include_str!("../../rules/default_rules.toml");

/// Lexicon category holding bare object-type names.
pub const TYPE_CATEGORY: &str = "type";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesFile {
    #[serde(default = "yes")]
    type_only_counts: bool,
    categories: BTreeMap<String, PropertyTag>,
    #[serde(default)]
    attributes: AttributeSection,
    #[serde(default)]
    phrases: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    patterns: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeSection {
    #[serde(default)]
    map: BTreeMap<String, String>,
    #[serde(default)]
    ignore: Vec<String>,
    #[serde(default)]
    default_category: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone)]
pub struct Pattern {
    pub category: String,
    pub tag: PropertyTag,
    pub source: String,
    pub regex: Regex,
}

/// Compiled tagging rules. Immutable once built.
#[derive(Debug, Clone)]
pub struct RuleSet {
    category_map: BTreeMap<String, PropertyTag>,
    attribute_map: BTreeMap<String, String>,
    ignored_attributes: BTreeSet<String>,
    default_attribute_category: Option<String>,
    default_phrases: Lexicon,
    patterns: Vec<Pattern>,
    pub type_only_counts: bool,
}

impl RuleSet {
    pub fn from_toml(text: &str) -> Result<Self, TaggerError> {
        let file: RulesFile = toml::from_str(text).map_err(|e| TaggerError::Config(format!("rules file: {e}")))?;
        Self::compile(file)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, TaggerError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| TaggerError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn default_rules() -> Self {
        Self::from_toml(DEFAULT_RULES).expect("shipped rules compile")
    }

    /// Same rules with the strict type-only switch set.
    pub fn with_type_only_counts(mut self, counts: bool) -> Self {
        self.type_only_counts = counts;
        self
    }

    fn compile(file: RulesFile) -> Result<Self, TaggerError> {
        if let Some((cat, _)) = file.categories.iter().find(|(_, t)| **t == PropertyTag::Unclassified) {
            return Err(TaggerError::Config(format!("category {cat:?} cannot map to Unclassified")));
        }
        let known = |cat: &str, what: &str| -> Result<(), TaggerError> {
            if file.categories.contains_key(cat) {
                Ok(())
            } else {
                Err(TaggerError::Config(format!("{what} uses unknown lexicon category {cat:?}")))
            }
        };

        for target in file.attributes.map.values() {
            known(target, "[attributes] map")?;
        }
        if let Some(cat) = &file.attributes.default_category {
            known(cat, "[attributes] default_category")?;
        }

        let mut default_phrases = Lexicon::default();
        for (cat, phrases) in &file.phrases {
            known(cat, "[phrases]")?;
            for p in phrases {
                default_phrases.insert(cat, p);
            }
        }

        let mut patterns = Vec::new();
        for (cat, sources) in &file.patterns {
            known(cat, "[patterns]")?;
            for source in sources {
                let regex = Regex::new(&format!(r"\b(?:{source})\b"))
                    .map_err(|e| TaggerError::Config(format!("pattern {source:?} in {cat}: {e}")))?;
                patterns.push(Pattern {
                    category: cat.clone(),
                    tag: file.categories[cat],
                    source: source.clone(),
                    regex,
                });
            }
        }

        Ok(RuleSet {
            category_map: file.categories,
            attribute_map: file.attributes.map,
            ignored_attributes: file.attributes.ignore.into_iter().collect(),
            default_attribute_category: file.attributes.default_category,
            default_phrases,
            patterns,
            type_only_counts: file.type_only_counts,
        })
    }

    pub fn category_map(&self) -> &BTreeMap<String, PropertyTag> {
        &self.category_map
    }

    pub fn tag_for(&self, category: &str) -> Option<PropertyTag> {
        self.category_map.get(category).copied()
    }

    pub fn default_phrases(&self) -> &Lexicon {
        &self.default_phrases
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    /// Patterns evidencing one tag.
    pub fn patterns_for(&self, tag: PropertyTag) -> impl Iterator<Item = &Pattern> {
        self.patterns.iter().filter(move |p| p.tag == tag)
    }

    /// Lexicon category receiving values of a scene attribute, if any.
    pub fn lexicon_category_for_attribute(&self, attribute: &str) -> Option<&str> {
        if self.ignored_attributes.contains(attribute) {
            return None;
        }
        self.attribute_map
            .get(attribute)
            .or(self.default_attribute_category.as_ref())
            .map(String::as_str)
    }
}
