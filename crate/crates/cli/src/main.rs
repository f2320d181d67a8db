//! `clarifeval`: batch pipeline over situated dialogue corpora.
//!
//! Stages talk through files only: `synth` or `ingest` write a canonical
//! corpus, `extract-ce` and `tag` write exchange lists, `resolve` writes
//! predictions and `evaluate` writes the report.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use clarifeval::corpus::{
    corpus_stats, load_canonical_corpus_with, load_simmc_corpus, to_canonical_json, Corpus, CorpusError, ValidationMode,
};
use clarifeval::eval::{
    evaluate, load_predictions, render_report, run_resolver_with, AllTurnsScope, EvalError, EvalOptions, ReportFormat, ResolverKind,
    ResolverSpec,
};
use clarifeval::extract::{ces_to_json, extract_ces, load_ces, ExtractError};
use clarifeval::metrics::{candidate_object_stats_with, AggregateOptions, Aggregation, F1Mode, MetricsError};
use clarifeval::synth::{generate_corpus, SynthConfig, SynthError};
use clarifeval::tagger::{build_lexicon, Lexicon, RuleSet, Tagger, TaggerError};
use clarifeval::{ClarificationExchange, PropertyTag, TurnKey};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "clarifeval", version, about = "Clarificational exchange analysis for situated dialogue corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Output {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace an existing output file.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Strict,
    Lenient,
}

impl From<Mode> for ValidationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Strict => ValidationMode::Strict,
            Mode::Lenient => ValidationMode::Lenient,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Markdown,
    Csv,
    Structured,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Agg {
    Micro,
    Macro,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scope {
    All,
    NonCe,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Resolver {
    Oracle,
    Random,
    RecentMention,
    PropertyMatch,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a SIMMC 2.0 split, or re-validate a canonical corpus.
    Ingest {
        /// Canonical corpus to re-validate and normalize.
        #[arg(long, conflicts_with = "simmc_dialogues")]
        corpus: Option<PathBuf>,
        /// SIMMC 2.0 dialogue file, e.g. simmc2_dials_dstc10_devtest.json.
        #[arg(long, requires = "scene_dir")]
        simmc_dialogues: Option<PathBuf>,
        /// Directory holding the `*_scene.json` files.
        #[arg(long)]
        scene_dir: Option<PathBuf>,
        /// Object metadata files (fashion and furniture).
        #[arg(long = "metadata")]
        metadata: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "strict")]
        mode: Mode,
        #[command(flatten)]
        output: Output,
    },
    /// Descriptive statistics and candidate-object counts.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        /// Tagged exchanges; adds per-tag candidate rows.
        #[arg(long)]
        ces: Option<PathBuf>,
        /// Leave the referenced object out of its own candidate count.
        #[arg(long)]
        exclude_self: bool,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
        #[arg(long, value_enum, default_value = "strict")]
        mode: Mode,
        #[command(flatten)]
        output: Output,
    },
    /// Extract clarificational exchanges.
    ExtractCe {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "strict")]
        mode: Mode,
        #[command(flatten)]
        output: Output,
    },
    /// Tag exchanges by disambiguating property.
    Tag {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        ces: PathBuf,
        /// Rules file; the shipped rules when absent.
        #[arg(long, env = "CLARIFEVAL_RULES")]
        rules: Option<PathBuf>,
        /// Extra lexicon phrases: JSON object of category -> phrase list.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "strict")]
        mode: Mode,
        #[command(flatten)]
        output: Output,
    },
    /// Run a heuristic resolver and write predictions.
    Resolve {
        #[arg(long)]
        corpus: PathBuf,
        /// Exchanges to use; extracted from the corpus when absent.
        #[arg(long)]
        ces: Option<PathBuf>,
        #[arg(long, value_enum)]
        resolver: Resolver,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        context_window: usize,
        /// Hide the CR and the response when resolving After-CR turns.
        #[arg(long)]
        no_after_cr: bool,
        #[arg(long, env = "CLARIFEVAL_RULES")]
        rules: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_enum, default_value = "strict")]
        mode: Mode,
        #[command(flatten)]
        output: Output,
    },
    /// Score predictions by exchange phase and property tag.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Tagged exchanges.
        #[arg(long)]
        ces: PathBuf,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
        #[arg(long, value_enum, default_value = "strict")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "micro")]
        aggregation: Agg,
        /// Leave turns with empty gold and prediction out of per-turn means.
        #[arg(long)]
        skip_empty: bool,
        /// Combine precision and recall by their arithmetic mean.
        #[arg(long)]
        arithmetic_f1: bool,
        #[arg(long, value_enum, default_value = "all")]
        all_turns: Scope,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Generate a synthetic corpus.
    Synth {
        /// Generator configuration; the shipped shopping-shaped one when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the configured number of dialogues.
        #[arg(long)]
        n_dialogues: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
}

/// A diagnostic and its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        if e.is_validation() {
            Failure::invalid(e.to_string())
        } else {
            Failure::io(e.to_string())
        }
    }
}

impl From<ExtractError> for Failure {
    fn from(e: ExtractError) -> Self {
        match e {
            ExtractError::Integrity { .. } => Failure::invalid(e.to_string()),
            _ => Failure::io(e.to_string()),
        }
    }
}

impl From<TaggerError> for Failure {
    fn from(e: TaggerError) -> Self {
        match e {
            TaggerError::Config(_) => Failure::invalid(e.to_string()),
            TaggerError::Io { .. } => Failure::io(e.to_string()),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        if e.is_validation() {
            Failure::invalid(e.to_string())
        } else {
            Failure::io(e.to_string())
        }
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure::invalid(e.to_string())
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io { .. } => Failure::io(e.to_string()),
            _ => Failure::invalid(e.to_string()),
        }
    }
}

fn write_output(output: &Output, content: &str) -> Result<(), Failure> {
    match &output.out {
        Some(path) => {
            if path.exists() && !output.force {
                return Err(Failure::invalid(format!(
                    "{} already exists; pass --force to replace it",
                    path.display()
                )));
            }
            fs::write(path, content).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::io(format!("cannot write to standard output: {e}")))
        }
    }
}

fn load_rules(path: Option<&Path>) -> Result<RuleSet, Failure> {
    Ok(match path {
        Some(p) => RuleSet::from_path(p)?,
        None => RuleSet::default_rules(),
    })
}

fn load_lexicon_overrides(path: &Path) -> Result<Lexicon, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::io(format!("{}: malformed lexicon: {e}", path.display())))
}

fn ces_or_extract(corpus: &Corpus, path: Option<&Path>) -> Result<Vec<ClarificationExchange>, Failure> {
    Ok(match path {
        Some(p) => load_ces(p)?,
        None => extract_ces(corpus).0,
    })
}

fn stats_document(corpus: &Corpus, ces: &[ClarificationExchange], include_self: bool) -> Result<serde_json::Value, Failure> {
    let (_, extraction) = extract_ces(corpus);
    let available = corpus.attribute_categories();
    let attributes: Vec<&str> = ["type", "color"].into_iter().filter(|a| available.contains(*a)).collect();

    let mut subsets: Vec<(String, BTreeSet<TurnKey>)> = vec![
        ("All Turns".to_string(), corpus.turn_keys().into_iter().collect()),
        ("CR Turns".to_string(), ces.iter().map(ClarificationExchange::before_key).collect()),
    ];
    if ces.iter().any(|c| c.tags.is_some()) {
        for tag in [PropertyTag::IndividualProperty, PropertyTag::DialogueHistory, PropertyTag::RelationalContext] {
            let keys = ces
                .iter()
                .filter(|c| c.tags.as_ref().is_some_and(|t| t.contains(tag)))
                .map(ClarificationExchange::before_key)
                .collect();
            subsets.push((tag.label().to_string(), keys));
        }
    }
    let mut candidates = Vec::new();
    for (name, keys) in &subsets {
        let mut per_attribute = serde_json::Map::new();
        for attribute in &attributes {
            let s = candidate_object_stats_with(corpus, keys, attribute, include_self)?;
            per_attribute.insert(attribute.to_string(), serde_json::to_value(s).expect("stats serialize"));
        }
        candidates.push(json!({ "subset": name, "attributes": per_attribute }));
    }
    Ok(json!({
        "corpus_id": corpus.corpus_id,
        "corpus": corpus_stats(corpus),
        "extraction": extraction,
        "candidate_objects": candidates,
        "include_self": include_self,
    }))
}

fn stats_markdown(doc: &serde_json::Value) -> String {
    let mut out = String::new();
    writeln!(out, "# {}", doc["corpus_id"].as_str().unwrap_or_default()).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "| Statistic | Value |").unwrap();
    writeln!(out, "|---|---:|").unwrap();
    for section in ["corpus", "extraction"] {
        if let Some(map) = doc[section].as_object() {
            for (k, v) in map {
                let value = match v.as_f64() {
                    Some(f) if v.is_f64() => format!("{f:.3}"),
                    _ => v.to_string(),
                };
                writeln!(out, "| {k} | {value} |").unwrap();
            }
        }
    }
    let rows = doc["candidate_objects"].as_array().cloned().unwrap_or_default();
    let attributes: Vec<String> = rows
        .first()
        .and_then(|r| r["attributes"].as_object())
        .map(|m| m.keys().cloned().collect())
        .unwrap_or_default();
    if !attributes.is_empty() {
        writeln!(out).unwrap();
        writeln!(out, "Mean candidate objects (SD)").unwrap();
        writeln!(out).unwrap();
        writeln!(out, "| Split | {} |", attributes.join(" | ")).unwrap();
        writeln!(out, "|---|{}", "---:|".repeat(attributes.len())).unwrap();
        for row in rows {
            let cells: Vec<String> = attributes
                .iter()
                .map(|a| {
                    let s = &row["attributes"][a];
                    format!(
                        "{:.2} ({:.2})",
                        s["mean_candidates"].as_f64().unwrap_or(0.0),
                        s["sd_candidates"].as_f64().unwrap_or(0.0)
                    )
                })
                .collect();
            writeln!(out, "| {} | {} |", row["subset"].as_str().unwrap_or_default(), cells.join(" | ")).unwrap();
        }
    }
    out
}

fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ingest {
            corpus,
            simmc_dialogues,
            scene_dir,
            metadata,
            mode,
            output,
        } => {
            let loaded = match (corpus, simmc_dialogues, scene_dir) {
                (Some(path), _, _) => load_canonical_corpus_with(path, mode.into())?,
                (None, Some(dialogues), Some(scenes)) => load_simmc_corpus(dialogues, scenes, &metadata)?,
                _ => return Err(Failure::invalid("ingest needs --corpus or --simmc-dialogues with --scene-dir")),
            };
            write_output(&output, &to_canonical_json(&loaded))
        }
        Command::Stats {
            corpus,
            ces,
            exclude_self,
            format,
            mode,
            output,
        } => {
            let corpus = load_canonical_corpus_with(corpus, mode.into())?;
            let ces = ces_or_extract(&corpus, ces.as_deref())?;
            let doc = stats_document(&corpus, &ces, !exclude_self)?;
            let text = match format {
                Format::Structured => pretty(&doc),
                Format::Markdown => stats_markdown(&doc),
                Format::Csv => return Err(Failure::invalid("stats supports markdown and structured output")),
            };
            write_output(&output, &text)
        }
        Command::ExtractCe { corpus, mode, output } => {
            let corpus = load_canonical_corpus_with(corpus, mode.into())?;
            let (ces, stats) = extract_ces(&corpus);
            eprintln!(
                "{} exchanges ({} without a following turn) over {} system turns; CR rate {:.4} ({:.4} complete)",
                stats.n_ces, stats.n_truncated, stats.n_system_turns, stats.cr_rate, stats.cr_rate_complete
            );
            write_output(&output, &ces_to_json(&ces))
        }
        Command::Tag {
            corpus,
            ces,
            rules,
            lexicon,
            mode,
            output,
        } => {
            let corpus = load_canonical_corpus_with(corpus, mode.into())?;
            let ces = load_ces(ces)?;
            clarifeval::extract::check_ces(&corpus, &ces)?;
            let rules = load_rules(rules.as_deref())?;
            let overrides = lexicon.as_deref().map(load_lexicon_overrides).transpose()?;
            let lexicon = build_lexicon(&corpus, overrides.as_ref(), &rules)?;
            let tagged = Tagger::new(&lexicon, &rules).tag_all(&ces);
            write_output(&output, &ces_to_json(&tagged))
        }
        Command::Resolve {
            corpus,
            ces,
            resolver,
            seed,
            context_window,
            no_after_cr,
            rules,
            jobs,
            mode,
            output,
        } => {
            let corpus = load_canonical_corpus_with(corpus, mode.into())?;
            let ces = ces_or_extract(&corpus, ces.as_deref())?;
            clarifeval::extract::check_ces(&corpus, &ces)?;
            let rules = load_rules(rules.as_deref())?;
            let kind = match resolver {
                Resolver::Oracle => ResolverKind::Oracle,
                Resolver::Random => ResolverKind::Random,
                Resolver::RecentMention => ResolverKind::RecentMention,
                Resolver::PropertyMatch => ResolverKind::PropertyMatch,
            };
            let spec = ResolverSpec {
                kind,
                seed,
                context_window,
                use_after_cr: !no_after_cr,
            };
            let preds = run_resolver_with(&corpus, &spec, &ces, &rules, jobs)?;
            write_output(&output, &preds.to_jsonl())
        }
        Command::Evaluate {
            corpus,
            predictions,
            ces,
            format,
            mode,
            aggregation,
            skip_empty,
            arithmetic_f1,
            all_turns,
            jobs,
            output,
        } => {
            let corpus = load_canonical_corpus_with(corpus, mode.into())?;
            let preds = load_predictions(predictions)?;
            let ces = load_ces(ces)?;
            let options = EvalOptions {
                mode: mode.into(),
                aggregation: match aggregation {
                    Agg::Micro => Aggregation::Micro,
                    Agg::Macro => Aggregation::Macro,
                },
                aggregate: AggregateOptions {
                    skip_empty,
                    f1_mode: if arithmetic_f1 { F1Mode::ArithmeticMean } else { F1Mode::Harmonic },
                },
                all_turns_scope: match all_turns {
                    Scope::All => AllTurnsScope::AllUserTurns,
                    Scope::NonCe => AllTurnsScope::NonCeTurns,
                },
                jobs,
            };
            let report = evaluate(&corpus, &preds, &ces, &options)?;
            let format = match format {
                Format::Markdown => ReportFormat::Markdown,
                Format::Csv => ReportFormat::Csv,
                Format::Structured => ReportFormat::Json,
            };
            write_output(&output, &render_report(&report, format))
        }
        Command::Synth {
            config,
            seed,
            n_dialogues,
            output,
        } => {
            let mut config = match config {
                Some(path) => SynthConfig::from_path(path)?,
                None => SynthConfig::default(),
            };
            if let Some(n) = n_dialogues {
                config.n_dialogues = n;
            }
            let corpus = generate_corpus(&config, seed)?;
            write_output(&output, &to_canonical_json(&corpus))
        }
    }
}

fn run(args: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
