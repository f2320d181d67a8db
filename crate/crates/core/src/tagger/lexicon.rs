use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::normalize::normalize_phrase;
use super::rules::RuleSet;
use super::TaggerError;
use crate::corpus::Corpus;

/// Keyword phrases per lexicon category, normalized and lowercase.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lexicon {
    pub entries: BTreeMap<String, BTreeSet<String>>,
}

impl Lexicon {
    /// Adds a phrase after normalization; blank phrases are dropped.
    pub fn insert(&mut self, category: &str, phrase: &str) -> bool {
        match normalize_phrase(phrase) {
            Some(p) => self.entries.entry(category.to_string()).or_default().insert(p),
            None => false,
        }
    }

    pub fn contains(&self, category: &str, phrase: &str) -> bool {
        self.entries.get(category).is_some_and(|s| s.contains(phrase))
    }

    pub fn phrases(&self, category: &str) -> impl Iterator<Item = &str> {
        self.entries.get(category).into_iter().flatten().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extend(&mut self, other: &Lexicon) {
        for (cat, phrases) in &other.entries {
            for p in phrases {
                self.insert(cat, p);
            }
        }
    }
}

/// Splits a metadata value such as `"black, white"` into its parts.
pub fn attribute_value_parts(value: &str) -> impl Iterator<Item = String> + '_ {
    value.split([',', '/']).filter_map(normalize_phrase)
}

/// Shipped phrase lists, plus every scene attribute value bucketed by its
/// lexicon category, plus `overrides`.
pub fn build_lexicon(corpus: &Corpus, overrides: Option<&Lexicon>, rules: &RuleSet) -> Result<Lexicon, TaggerError> {
    let mut lexicon = rules.default_phrases().clone();
    for obj in corpus.scenes.values().flat_map(|s| s.objects.iter()) {
        for (attribute, value) in &obj.attributes {
            let Some(category) = rules.lexicon_category_for_attribute(attribute) else {
                continue;
            };
            for part in attribute_value_parts(value) {
                lexicon.insert(category, &part);
            }
        }
    }
    if let Some(overrides) = overrides {
        if let Some(cat) = overrides.entries.keys().find(|c| rules.tag_for(c).is_none()) {
            return Err(TaggerError::Config(format!(
                "override category {cat:?} is not in the rules' category map"
            )));
        }
        lexicon.extend(overrides);
    }
    Ok(lexicon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{fixtures::object, Scene};

    #[test]
    fn metadata_values_are_bucketed() {
        let mut corpus = Corpus::new("c");
        corpus.scenes.insert(
            "S".into(),
            Scene {
                scene_id: "S".into(),
                objects: vec![
                    object(0, &[("color", "Blue")]),
                    object(1, &[("type", "jacket"), ("pattern", "floral"), ("color", "black, white")]),
                    object(2, &[("type", "jacket"), ("size", "XL"), ("state", "folded")]),
                ],
            },
        );
        let lex = build_lexicon(&corpus, None, &RuleSet::default_rules()).unwrap();
        assert!(lex.contains("color", "blue"));
        assert!(lex.contains("color", "black"));
        assert!(lex.contains("color", "white"));
        assert!(lex.contains("type", "jacket"));
        assert!(lex.contains("style", "floral"));
        assert!(lex.contains("state", "folded"));
        assert!(!lex.phrases("other").any(|p| p == "xl"));
    }

    #[test]
    fn empty_corpus_gives_shipped_defaults() {
        let rules = RuleSet::default_rules();
        let lex = build_lexicon(&Corpus::new("empty"), None, &rules).unwrap();
        assert_eq!(&lex, rules.default_phrases());
    }

    #[test]
    fn override_brand_is_normalized() {
        let mut overrides = Lexicon::default();
        overrides.insert("brand", "Yogi  Fit");
        let lex = build_lexicon(&Corpus::new("empty"), Some(&overrides), &RuleSet::default_rules()).unwrap();
        assert!(lex.contains("brand", "yogi fit"));
    }

    #[test]
    fn override_with_unknown_category_fails() {
        let mut overrides = Lexicon::default();
        overrides.insert("sparkle", "glitter");
        let err = build_lexicon(&Corpus::new("empty"), Some(&overrides), &RuleSet::default_rules()).unwrap_err();
        assert!(matches!(err, TaggerError::Config(_)));
    }
}
