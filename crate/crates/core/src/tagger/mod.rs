//! Multi-label tagging of clarificational exchanges by disambiguating
//! property.
//!
//! Tagging works over normalized text. Lexicon phrases are matched on the
//! token sequence (leftmost-longest per category), rule regexes on the
//! normalized string. Each hit yields a [`MatchedSpan`] whose lexicon
//! category maps to a [`PropertyTag`] through the [`RuleSet`]. Text with no
//! hit is tagged [`PropertyTag::Unclassified`].

mod lexicon;
mod matcher;
pub mod normalize;
mod rules;

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexicon::{attribute_value_parts, build_lexicon, Lexicon};
pub use matcher::{PhraseHit, PhraseMatcher};
pub use rules::{Pattern, RuleSet, DEFAULT_RULES, TYPE_CATEGORY};

use crate::extract::ClarificationExchange;
use normalize::normalize;

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("tagger configuration error: {0}")]
    Config(String),
}

/// Disambiguating property exploited by a clarification. Variants are
/// declared in name order so sets serialize sorted by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PropertyTag {
    DialogueHistory,
    IndividualProperty,
    RelationalContext,
    Unclassified,
}

impl PropertyTag {
    pub const ALL: [PropertyTag; 4] = [
        PropertyTag::IndividualProperty,
        PropertyTag::DialogueHistory,
        PropertyTag::RelationalContext,
        PropertyTag::Unclassified,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PropertyTag::DialogueHistory => "DialogueHistory",
            PropertyTag::IndividualProperty => "IndividualProperty",
            PropertyTag::RelationalContext => "RelationalContext",
            PropertyTag::Unclassified => "Unclassified",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PropertyTag::DialogueHistory => "Dialogue History",
            PropertyTag::IndividualProperty => "Individual Property",
            PropertyTag::RelationalContext => "Relational Context",
            PropertyTag::Unclassified => "Unclassified",
        }
    }
}

impl fmt::Display for PropertyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PropertyTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        PropertyTag::ALL
            .into_iter()
            .find(|t| t.name().to_lowercase() == key || (key == "relational" && *t == PropertyTag::RelationalContext))
            .ok_or_else(|| format!("unknown property tag {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanSource {
    Cr,
    Response,
    /// A standalone utterance outside any exchange.
    Text,
}

/// One piece of keyword evidence. Offsets are char indices into the
/// original (un-normalized) text of `source`; `surface` is normalized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedSpan {
    pub category: String,
    pub surface: String,
    pub char_start: usize,
    pub char_end: usize,
    pub source: SpanSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSet {
    pub tags: BTreeSet<PropertyTag>,
    pub matched_spans: Vec<MatchedSpan>,
}

impl TagSet {
    pub fn contains(&self, tag: PropertyTag) -> bool {
        self.tags.contains(&tag)
    }

    pub fn is_unclassified(&self) -> bool {
        self.tags.contains(&PropertyTag::Unclassified)
    }
}

/// A lexicon and rule set with a prebuilt phrase index.
#[derive(Debug, Clone)]
pub struct Tagger<'a> {
    rules: &'a RuleSet,
    matcher: PhraseMatcher,
}

impl<'a> Tagger<'a> {
    pub fn new(lexicon: &Lexicon, rules: &'a RuleSet) -> Self {
        let matcher = PhraseMatcher::new(
            lexicon
                .entries
                .iter()
                .filter(|(cat, _)| rules.tag_for(cat).is_some())
                .map(|(cat, phrases)| (cat.as_str(), phrases.iter().map(String::as_str))),
        );
        Tagger { rules, matcher }
    }

    pub fn rules(&self) -> &RuleSet {
        self.rules
    }

    /// Raw keyword evidence in one text, before the type-only rule.
    pub fn spans(&self, text: &str, source: SpanSource) -> Vec<MatchedSpan> {
        let norm = normalize(text);
        let mut spans = Vec::new();
        for hit in self.matcher.find(&norm) {
            let start = norm.tokens[hit.first_token].start;
            let end = norm.tokens[hit.last_token - 1].end;
            let (char_start, char_end) = norm.original_range(start, end);
            spans.push(MatchedSpan {
                category: hit.category.to_string(),
                surface: hit.phrase.to_string(),
                char_start,
                char_end,
                source,
            });
        }
        for pattern in self.rules.patterns() {
            for m in pattern.regex.find_iter(&norm.text) {
                if m.as_str().is_empty() {
                    continue;
                }
                let start = norm.char_index_of_byte(m.start());
                let end = norm.char_index_of_byte(m.end());
                let (char_start, char_end) = norm.original_range(start, end);
                spans.push(MatchedSpan {
                    category: pattern.category.clone(),
                    surface: m.as_str().to_string(),
                    char_start,
                    char_end,
                    source,
                });
            }
        }
        spans.sort_by(|a, b| {
            (a.source, a.char_start, a.char_end, &a.category, &a.surface).cmp(&(
                b.source,
                b.char_start,
                b.char_end,
                &b.category,
                &b.surface,
            ))
        });
        spans.dedup();
        spans
    }

    /// Applies the type-only rule and derives the tag set.
    fn finalize(&self, mut spans: Vec<MatchedSpan>) -> TagSet {
        if !self.rules.type_only_counts {
            let other_individual = spans.iter().any(|s| {
                s.category != TYPE_CATEGORY && self.rules.tag_for(&s.category) == Some(PropertyTag::IndividualProperty)
            });
            if !other_individual {
                spans.retain(|s| s.category != TYPE_CATEGORY);
            }
        }
        let mut tags: BTreeSet<PropertyTag> = spans.iter().filter_map(|s| self.rules.tag_for(&s.category)).collect();
        if tags.is_empty() {
            tags.insert(PropertyTag::Unclassified);
        }
        TagSet {
            tags,
            matched_spans: spans,
        }
    }

    pub fn tag_utterance(&self, text: &str) -> TagSet {
        self.finalize(self.spans(text, SpanSource::Text))
    }

    /// Tags the CR and the response together; evidence on either side counts.
    pub fn tag_ce(&self, ce: &ClarificationExchange) -> TagSet {
        let mut spans = self.spans(&ce.cr_text, SpanSource::Cr);
        if let Some(response) = &ce.response_text {
            spans.extend(self.spans(response, SpanSource::Response));
        }
        self.finalize(spans)
    }

    pub fn explain(&self, ce: &ClarificationExchange) -> Vec<MatchedSpan> {
        self.tag_ce(ce).matched_spans
    }

    /// Returns a copy of each exchange with its tags filled in.
    pub fn tag_all(&self, ces: &[ClarificationExchange]) -> Vec<ClarificationExchange> {
        ces.iter()
            .map(|ce| ClarificationExchange {
                tags: Some(self.tag_ce(ce)),
                ..ce.clone()
            })
            .collect()
    }
}

pub fn tag_utterance(text: &str, lexicon: &Lexicon, rules: &RuleSet) -> TagSet {
    Tagger::new(lexicon, rules).tag_utterance(text)
}

pub fn tag_ce(ce: &ClarificationExchange, lexicon: &Lexicon, rules: &RuleSet) -> TagSet {
    Tagger::new(lexicon, rules).tag_ce(ce)
}

pub fn explain_tags(ce: &ClarificationExchange, lexicon: &Lexicon, rules: &RuleSet) -> Vec<MatchedSpan> {
    Tagger::new(lexicon, rules).explain(ce)
}
