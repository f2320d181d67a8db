#![allow(dead_code)]

use clarifeval::corpus::Corpus;
use clarifeval::extract::extract_ces;
use clarifeval::synth::{generate_corpus, SynthConfig};
use clarifeval::tagger::{build_lexicon, RuleSet, Tagger};
use clarifeval::ClarificationExchange;

pub fn synth(n_dialogues: usize, seed: u64) -> Corpus {
    let config = SynthConfig {
        n_dialogues,
        ..SynthConfig::default()
    };
    generate_corpus(&config, seed).unwrap()
}

/// Extracted and tagged exchanges under the default rules.
pub fn tagged_ces(corpus: &Corpus) -> Vec<ClarificationExchange> {
    let rules = RuleSet::default_rules();
    let lexicon = build_lexicon(corpus, None, &rules).unwrap();
    Tagger::new(&lexicon, &rules).tag_all(&extract_ces(corpus).0)
}
