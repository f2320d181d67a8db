//! Acceptance criteria, one PASS/FAIL/SKIP line each.
//!
//! Criteria listed in `KNOWN_FAILURES` are still reported as FAIL but do not
//! fail the run; any other FAIL does.
//!
//! AC7 runs only when `CLARIFEVAL_SIMMC_DIR` points at a SIMMC 2.0 data
//! directory holding `simmc2_dials_dstc10_devtest.json`, the scene JSON
//! files and the two `*_prefab_metadata_all.json` files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use clarifeval::corpus::{corpus_stats, load_simmc_corpus, Corpus};
use clarifeval::eval::{evaluate, run_resolver, EvalOptions, EvalReport, PredictionSet, ResolverKind, ResolverSpec, Subset};
use clarifeval::extract::extract_ces;
use clarifeval::metrics::{aggregate, relative_delta, turn_object_f1, AggregateScore, TurnScore};
use clarifeval::synth::{generate_corpus, SynthConfig};
use clarifeval::tagger::{build_lexicon, RuleSet, Tagger};
use clarifeval::{ClarificationExchange, PropertyTag};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

/// Rounded pair 35.4 -> 27.4 yields -22.599, printed as -22.7.
const KNOWN_FAILURES: &[&str] = &["AC1"];

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn tagged(corpus: &Corpus) -> Vec<ClarificationExchange> {
    let rules = RuleSet::default_rules();
    let lexicon = build_lexicon(corpus, None, &rules).unwrap();
    Tagger::new(&lexicon, &rules).tag_all(&extract_ces(corpus).0)
}

fn synth(n_dialogues: usize, seed: u64) -> Corpus {
    let config = SynthConfig {
        n_dialogues,
        ..SynthConfig::default()
    };
    generate_corpus(&config, seed).unwrap()
}

fn ac1_delta_arithmetic() -> Outcome {
    let rows: [(f64, f64, f64); 16] = [
        (36.4, 29.1, -20.1),
        (35.4, 27.4, -22.7),
        (47.6, 43.7, -8.2),
        (32.9, 25.0, -24.1),
        (64.8, 67.7, 4.4),
        (65.0, 68.0, 4.6),
        (81.7, 82.1, 0.4),
        (62.4, 63.7, 2.1),
        (65.7, 69.2, 5.4),
        (65.1, 69.3, 6.4),
        (81.7, 84.6, 3.5),
        (62.7, 65.0, 3.7),
        (66.9, 74.3, 11.1),
        (68.0, 75.7, 11.3),
        (67.2, 75.7, 12.6),
        (66.5, 72.6, 9.1),
    ];
    let score = |pct: f64| AggregateScore {
        f1_micro: pct / 100.0,
        ..AggregateScore::empty()
    };
    let mut misses = Vec::new();
    for (before, after, printed) in rows {
        let got = relative_delta(score(before), score(after)).delta_pct.unwrap();
        if (got - printed).abs() > 0.1 {
            misses.push(format!("{before}->{after}: {got:.3} vs {printed}"));
        }
    }
    check(
        misses.is_empty(),
        format!("{}/16 within ±0.1pp{}", 16 - misses.len(), if misses.is_empty() { String::new() } else { format!("; off: {}", misses.join(", ")) }),
    )
}

fn ac2_metric_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let mut scores: Vec<TurnScore> = Vec::new();
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let universe = rng.random_range(1..=20u32);
        let draw = |rng: &mut StdRng| -> BTreeSet<u32> { (0..universe).filter(|_| rng.random_bool(0.4)).collect() };
        let gold = draw(&mut rng);
        let pred = draw(&mut rng);
        let s = turn_object_f1(&gold, &pred);
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for id in 0..universe {
            match (gold.contains(&id), pred.contains(&id)) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        let f1 = if tp + fp + fn_ == 0 {
            1.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        };
        if (s.tp, s.fp, s.fn_) != (tp, fp, fn_) || (s.f1 - f1).abs() > 1e-12 {
            mismatches += 1;
        }
        scores.push(s);
    }
    let whole = aggregate(&scores);
    let mut partition_ok = true;
    for _ in 0..50 {
        let mut shuffled = scores.clone();
        shuffled.shuffle(&mut rng);
        let mut cuts: Vec<usize> = (0..rng.random_range(1..8)).map(|_| rng.random_range(0..=shuffled.len())).collect();
        cuts.push(0);
        cuts.push(shuffled.len());
        cuts.sort_unstable();
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for w in cuts.windows(2) {
            let part = aggregate(&shuffled[w[0]..w[1]]);
            tp += part.tp;
            fp += part.fp;
            fn_ += part.fn_;
        }
        partition_ok &= (tp, fp, fn_) == (whole.tp, whole.fp, whole.fn_) && aggregate(&shuffled).f1_micro == whole.f1_micro;
    }
    check(
        mismatches == 0 && partition_ok,
        format!("{mismatches} oracle mismatches over 10000 pairs; partitions invariant: {partition_ok}"),
    )
}

fn ac3_tagger_golden() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/sample_dialogues.json");
    let corpus = clarifeval::corpus::load_canonical_corpus(path).unwrap();
    use PropertyTag::*;
    let expected = [
        vec![IndividualProperty],
        vec![IndividualProperty, RelationalContext],
        vec![IndividualProperty, DialogueHistory],
        vec![IndividualProperty, RelationalContext],
    ];
    let got: Vec<Vec<PropertyTag>> = tagged(&corpus)
        .into_iter()
        .map(|c| c.tags.unwrap().tags.into_iter().collect())
        .collect();
    let ok = got.len() == expected.len()
        && got
            .iter()
            .zip(&expected)
            .all(|(g, e)| g.iter().collect::<BTreeSet<_>>() == e.iter().collect::<BTreeSet<_>>());
    check(ok, format!("{got:?}"))
}

fn oracle_preds(corpus: &Corpus) -> PredictionSet {
    run_resolver(corpus, &ResolverSpec::new(ResolverKind::Oracle), &[])
}

fn ac4_extraction() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let mut failures = Vec::new();
    for i in 0..100 {
        let config = SynthConfig {
            n_dialogues: rng.random_range(5..40),
            ambiguity_rate: rng.random_range(0.0..0.4),
            ..SynthConfig::default()
        };
        let mut corpus = generate_corpus(&config, rng.random()).unwrap();
        if i % 2 == 0 {
            if let Some(d) = corpus.dialogues.iter_mut().find(|d| d.turns.len() >= 2 && !d.turns[d.turns.len() - 2].is_ambiguous) {
                d.turns.last_mut().unwrap().is_ambiguous = true;
            }
        }
        let ces = tagged(&corpus);
        let ambiguous = corpus.dialogues.iter().flat_map(|d| &d.turns).filter(|t| t.is_ambiguous).count();
        let adjacent = ces.iter().all(|c| c.after_turn_idx.is_none_or(|a| a == c.before_turn_idx + 1));
        let complete = ces.iter().filter(|c| !c.is_truncated()).count();
        let report = evaluate(&corpus, &oracle_preds(&corpus), &ces, &EvalOptions::default()).unwrap();
        let cr_n = report.row(Subset::CRTurns).unwrap().n;
        if ces.len() != ambiguous || !adjacent || cr_n != complete {
            failures.push(i);
        }
    }
    check(failures.is_empty(), format!("100 corpora, failing: {failures:?}"))
}

fn cr_delta(corpus: &Corpus, ces: &[ClarificationExchange], use_after_cr: bool) -> Option<f64> {
    let spec = ResolverSpec {
        use_after_cr,
        ..ResolverSpec::new(ResolverKind::PropertyMatch)
    };
    let preds = run_resolver(corpus, &spec, ces);
    let report = evaluate(corpus, &preds, ces, &EvalOptions::default()).unwrap();
    report.row(Subset::CRTurns).unwrap().delta().unwrap().delta_pct
}

fn ac5_clarification_helps() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in [101, 202, 303, 404, 505] {
        let corpus = synth(500, seed);
        let ces = tagged(&corpus);
        let with = cr_delta(&corpus, &ces, true);
        let without = cr_delta(&corpus, &ces, false);
        ok &= with.is_some_and(|d| d > 5.0) && without.is_some_and(|d| d <= 0.0);
        lines.push(format!("seed {seed}: {:+.1}% vs {:+.1}%", with.unwrap_or(f64::NAN), without.unwrap_or(f64::NAN)));
    }
    check(ok, lines.join("; "))
}

fn identity_holds(report: &EvalReport) -> bool {
    report.rows.iter().all(|row| match (row.aggregate(), row.delta()) {
        (Some(a), _) => a.f1_micro == 1.0,
        (_, Some(d)) => row.n == 0 || (d.before.f1_micro == 1.0 && d.after.f1_micro == 1.0 && d.delta_pct == Some(0.0)),
        _ => false,
    })
}

fn ac6_identity() -> Outcome {
    let mut checked = Vec::new();
    let mut ok = true;
    let all_tags = SynthConfig {
        n_dialogues: 300,
        tag_mix: PropertyTag::ALL.iter().map(|t| (*t, 1.0)).collect::<BTreeMap<_, _>>(),
        ..SynthConfig::default()
    };
    let mut corpora = vec![("synth default".to_string(), synth(300, 6))];
    corpora.push(("synth all tags".to_string(), generate_corpus(&all_tags, 7).unwrap()));
    if let Some(real) = simmc_corpus() {
        corpora.push(("simmc devtest".to_string(), real));
    }
    for (name, corpus) in &corpora {
        let ces = tagged(corpus);
        let report = evaluate(corpus, &oracle_preds(corpus), &ces, &EvalOptions::default()).unwrap();
        ok &= identity_holds(&report);
        checked.push(name.clone());
    }
    check(ok, format!("oracle F1 = 1 and Δ = 0 on: {}", checked.join(", ")))
}

fn simmc_dir() -> Option<PathBuf> {
    std::env::var_os("CLARIFEVAL_SIMMC_DIR").map(PathBuf::from).filter(|p| p.is_dir())
}

fn find(dir: &Path, name: &str) -> Option<PathBuf> {
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).ok()?.flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == name) {
                return Some(p);
            }
        }
    }
    None
}

fn simmc_corpus() -> Option<Corpus> {
    let dir = simmc_dir()?;
    let dialogues = find(&dir, "simmc2_dials_dstc10_devtest.json")?;
    let first_scene = find(&dir, "cloth_store_1416238_woman_3_11_scene.json")
        .or_else(|| {
            let mut stack = vec![dir.clone()];
            while let Some(d) = stack.pop() {
                for e in fs::read_dir(&d).ok()?.flatten() {
                    let p = e.path();
                    if p.is_dir() {
                        stack.push(p);
                    } else if p.to_string_lossy().ends_with("_scene.json") {
                        return Some(p);
                    }
                }
            }
            None
        })?;
    let scene_dir = first_scene.parent()?.to_path_buf();
    let metadata: Vec<PathBuf> = ["fashion_prefab_metadata_all.json", "furniture_prefab_metadata_all.json"]
        .iter()
        .filter_map(|n| find(&dir, n))
        .collect();
    match load_simmc_corpus(&dialogues, &scene_dir, &metadata) {
        Ok(c) => Some(c),
        Err(e) => {
            eprintln!("cannot load SIMMC data under {}: {e}", dir.display());
            None
        }
    }
}

fn ac7_dataset_statistics() -> Outcome {
    if simmc_dir().is_none() {
        return Outcome::Skip("CLARIFEVAL_SIMMC_DIR not set; SIMMC 2.0 data unavailable".into());
    }
    let Some(corpus) = simmc_corpus() else {
        return Outcome::Fail("SIMMC 2.0 directory present but devtest could not be loaded".into());
    };
    let stats = corpus_stats(&corpus);
    let (_, extraction) = extract_ces(&corpus);
    let all: BTreeSet<_> = corpus.turn_keys().into_iter().collect();
    let type_c = clarifeval::metrics::candidate_object_stats(&corpus, &all, "type").map(|s| s.mean_candidates);
    let color_c = clarifeval::metrics::candidate_object_stats(&corpus, &all, "color").map(|s| s.mean_candidates);
    let within = |v: f64, target: f64, tol: f64| (v - target).abs() <= tol;
    let checks = [
        ("mean turn pairs", stats.mean_turn_pairs, within(stats.mean_turn_pairs, 5.2, 0.2)),
        ("mean scene objects", stats.mean_scene_objects, within(stats.mean_scene_objects, 27.6, 0.5)),
        ("max scene objects", stats.max_scene_objects as f64, stats.max_scene_objects == 141),
        ("CR rate", extraction.cr_rate, within(extraction.cr_rate, 0.10, 0.015)),
        (
            "unique referenced",
            stats.mean_unique_referenced_per_dialogue,
            within(stats.mean_unique_referenced_per_dialogue, 4.5, 0.2),
        ),
        ("unique referenced SD", stats.sd_unique_referenced, within(stats.sd_unique_referenced, 2.4, 0.3)),
        ("type candidates", *type_c.as_ref().unwrap_or(&f64::NAN), type_c.as_ref().is_ok_and(|v| within(*v, 3.10, 0.3))),
        ("colour candidates", *color_c.as_ref().unwrap_or(&f64::NAN), color_c.as_ref().is_ok_and(|v| within(*v, 2.58, 0.3))),
    ];
    let detail = checks
        .iter()
        .map(|(n, v, ok)| format!("{n} {v:.3}{}", if *ok { "" } else { " (out of range)" }))
        .collect::<Vec<_>>()
        .join(", ");
    check(checks.iter().all(|c| c.2), detail)
}

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_clarifeval"))
        .current_dir(dir)
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

/// Runs every stage and returns the produced files by name.
fn pipeline(dir: &Path, jobs: &str) -> Option<BTreeMap<String, Vec<u8>>> {
    let steps: Vec<Vec<&str>> = vec![
        vec!["synth", "--seed", "17", "--n-dialogues", "150", "--out", "corpus.json"],
        vec!["ingest", "--corpus", "corpus.json", "--out", "ingested.json"],
        vec!["extract-ce", "--corpus", "corpus.json", "--out", "ces.json"],
        vec!["tag", "--corpus", "corpus.json", "--ces", "ces.json", "--out", "tagged.json"],
        vec!["stats", "--corpus", "corpus.json", "--ces", "tagged.json", "--format", "structured", "--out", "stats.json"],
        vec!["stats", "--corpus", "corpus.json", "--ces", "tagged.json", "--out", "stats.md"],
        vec!["resolve", "--corpus", "corpus.json", "--ces", "tagged.json", "--resolver", "random", "--seed", "5", "--jobs", jobs, "--out", "random.jsonl"],
        vec!["resolve", "--corpus", "corpus.json", "--ces", "tagged.json", "--resolver", "property-match", "--jobs", jobs, "--out", "pm.jsonl"],
        vec!["resolve", "--corpus", "corpus.json", "--resolver", "recent-mention", "--jobs", jobs, "--out", "recent.jsonl"],
        vec!["evaluate", "--corpus", "corpus.json", "--predictions", "random.jsonl", "--ces", "tagged.json", "--jobs", jobs, "--out", "random.md"],
        vec!["evaluate", "--corpus", "corpus.json", "--predictions", "pm.jsonl", "--ces", "tagged.json", "--format", "csv", "--jobs", jobs, "--out", "pm.csv"],
        vec!["evaluate", "--corpus", "corpus.json", "--predictions", "recent.jsonl", "--ces", "tagged.json", "--format", "structured", "--jobs", jobs, "--out", "recent.json"],
    ];
    for step in &steps {
        if !run_cli(dir, step) {
            eprintln!("stage failed: {}", step.join(" "));
            return None;
        }
    }
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).ok()?.flatten() {
        files.insert(entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path()).ok()?);
    }
    Some(files)
}

fn ac8_determinism() -> Outcome {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let runs: Vec<_> = [("1", &dirs[0]), ("1", &dirs[1]), ("8", &dirs[2])]
        .iter()
        .map(|(jobs, dir)| pipeline(dir.path(), jobs))
        .collect();
    if runs.iter().any(Option::is_none) {
        return Outcome::Fail("a pipeline stage failed".into());
    }
    let runs: Vec<_> = runs.into_iter().map(Option::unwrap).collect();
    let n = runs[0].len();
    check(
        runs[0] == runs[1] && runs[0] == runs[2],
        format!("{n} output files compared across two --jobs 1 runs and one --jobs 8 run"),
    )
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 8] = [
        ("AC1", "delta arithmetic on the 16 printed pairs", ac1_delta_arithmetic),
        ("AC2", "Object F1 matches a counting oracle; pooled counts partition-invariant", ac2_metric_oracle),
        ("AC3", "tags of the three sample dialogues", ac3_tagger_golden),
        ("AC4", "extraction exactness on 100 synthetic corpora", ac4_extraction),
        ("AC5", "property matching gains from the clarification", ac5_clarification_helps),
        ("AC6", "oracle identity", ac6_identity),
        ("AC7", "SIMMC 2.0 devtest statistics", ac7_dataset_statistics),
        ("AC8", "byte-identical pipeline outputs", ac8_determinism),
    ];
    let mut unexpected = 0;
    for (id, name, run) in criteria {
        let (status, detail) = match run() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Skip(d) => ("SKIP", d),
            Outcome::Fail(d) => {
                if KNOWN_FAILURES.contains(&id) {
                    ("FAIL", format!("{d} [known, see README]"))
                } else {
                    unexpected += 1;
                    ("FAIL", d)
                }
            }
        };
        println!("{status} {id} {name}: {detail}");
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        std::process::exit(1);
    }
}
