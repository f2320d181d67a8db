//! Text normalization shared by the tagger and the resolvers.
//!
//! Text is lowercased, punctuation is dropped except apostrophes and hyphens
//! between two word characters, and whitespace collapses to single spaces.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Char offsets into the normalized text.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub struct Normalized {
    pub text: String,
    pub tokens: Vec<Token>,
    /// For every char of `text`, the char index in the original input.
    orig_index: Vec<usize>,
    /// Byte offset of every char of `text`, plus the total length.
    byte_offsets: Vec<usize>,
}

impl Normalized {
    /// Maps a normalized char range back onto the original input.
    pub fn original_range(&self, start: usize, end: usize) -> (usize, usize) {
        if start >= end || end > self.orig_index.len() {
            return (0, 0);
        }
        (self.orig_index[start], self.orig_index[end - 1] + 1)
    }

    pub fn char_index_of_byte(&self, byte: usize) -> usize {
        self.byte_offsets.partition_point(|&b| b < byte)
    }

    pub fn token_strs(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-')
}

pub fn normalize(input: &str) -> Normalized {
    let chars: Vec<char> = input.chars().collect();
    let mut text = String::new();
    let mut tokens = Vec::new();
    let mut orig_index = Vec::new();
    let mut current: Option<(String, usize)> = None;
    let mut n_chars = 0usize;

    for (i, &c) in chars.iter().enumerate() {
        let keep = c.is_alphanumeric()
            || (is_joiner(c)
                && i > 0
                && chars[i - 1].is_alphanumeric()
                && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric()));
        if !keep {
            if let Some((tok, start)) = current.take() {
                tokens.push(Token {
                    text: tok,
                    start,
                    end: n_chars,
                });
            }
            continue;
        }
        let (tok, _) = current.get_or_insert_with(|| {
            if !text.is_empty() {
                text.push(' ');
                orig_index.push(i);
                n_chars += 1;
            }
            (String::new(), n_chars)
        });
        let lowered: Vec<char> = if c == '\u{2019}' { vec!['\''] } else { c.to_lowercase().collect() };
        for l in lowered {
            tok.push(l);
            text.push(l);
            orig_index.push(i);
            n_chars += 1;
        }
    }
    if let Some((tok, start)) = current.take() {
        tokens.push(Token {
            text: tok,
            start,
            end: n_chars,
        });
    }
    let mut byte_offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    byte_offsets.push(text.len());
    Normalized {
        text,
        tokens,
        orig_index,
        byte_offsets,
    }
}

/// Normalized form of a lexicon phrase, or `None` when nothing is left.
pub fn normalize_phrase(phrase: &str) -> Option<String> {
    let n = normalize(phrase);
    (!n.text.is_empty()).then_some(n.text)
}
