use std::collections::{BTreeMap, HashMap};

use super::normalize::Normalized;

/// A phrase hit over a token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseHit<'a> {
    pub category: &'a str,
    pub phrase: &'a str,
    pub first_token: usize,
    /// Exclusive.
    pub last_token: usize,
}

/// Token-level phrase matcher over categorized phrase lists.
///
/// Within a category the scan is leftmost-longest and non-overlapping;
/// categories are scanned independently so overlapping hits in different
/// categories all fire.
#[derive(Debug, Clone, Default)]
pub struct PhraseMatcher {
    // category -> first token -> phrases (longest first)
    index: BTreeMap<String, HashMap<String, Vec<(Vec<String>, String)>>>,
}

impl PhraseMatcher {
    pub fn new<'a, I, P>(categories: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, P)>,
        P: IntoIterator<Item = &'a str>,
    {
        let mut index: BTreeMap<String, HashMap<String, Vec<(Vec<String>, String)>>> = BTreeMap::new();
        for (category, phrases) in categories {
            let by_first = index.entry(category.to_string()).or_default();
            for phrase in phrases {
                let tokens: Vec<String> = phrase.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect();
                if let Some(first) = tokens.first() {
                    by_first.entry(first.clone()).or_default().push((tokens, phrase.to_string()));
                }
            }
        }
        for by_first in index.values_mut() {
            for list in by_first.values_mut() {
                list.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(&b.1)));
                list.dedup_by(|a, b| a.1 == b.1);
            }
        }
        PhraseMatcher { index }
    }

    pub fn find<'m>(&'m self, text: &Normalized) -> Vec<PhraseHit<'m>> {
        let tokens = text.token_strs();
        let mut hits = Vec::new();
        for (category, by_first) in &self.index {
            let mut i = 0;
            while i < tokens.len() {
                let found = by_first.get(tokens[i]).and_then(|cands| {
                    cands
                        .iter()
                        .find(|(ptoks, _)| tokens.len() - i >= ptoks.len() && ptoks.iter().zip(&tokens[i..]).all(|(p, t)| p == t))
                });
                match found {
                    Some((ptoks, phrase)) => {
                        hits.push(PhraseHit {
                            category,
                            phrase,
                            first_token: i,
                            last_token: i + ptoks.len(),
                        });
                        i += ptoks.len();
                    }
                    None => i += 1,
                }
            }
        }
        hits
    }
}
