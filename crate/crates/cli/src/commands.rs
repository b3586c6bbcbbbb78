use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use bans_core::checkpoint::load_checkpoint;
use bans_core::corpus::{
    clean_pairs, clean_text, compute_stats, load_corpus, split_corpus, to_jsonl, ArticlePair, LengthFilter,
    LineError,
};
use bans_core::model::{ModelDims, Seq2SeqModel};
use bans_core::text::{decode, encode, tokenize, Vocabulary};
use bans_core::train::{encode_pairs, fit, FitOutput, BEST_CHECKPOINT};
use bans_core::{evaluate_corpus, rng};
use serde::Serialize;

use crate::config::{env_seed, resolve_seed, FileConfig, RunConfig};
use crate::error::{CliResult, Failure};
use crate::{CleanArgs, EvaluateArgs, ModelInput, SplitArgs, SummarizeArgs, TrainArgs, VocabArgs};

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const RUN_CONFIG: &str = "config.json";
pub const EVAL_REPORT: &str = "eval_report.json";
pub const SIDE_BY_SIDE: &str = "side_by_side.txt";

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::usage)
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path)
        .with_context(|| format!("cannot create directory {}", path.display()))
        .map_err(Failure::usage)
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Loads a corpus that later stages consume; malformed lines are fatal.
fn load_strict(path: &Path) -> CliResult<Vec<ArticlePair>> {
    let loaded = load_corpus(path)?;
    if let Some(first) = loaded.errors.first() {
        return Err(Failure::domain(anyhow!(
            "{}: {} malformed line(s); line {}: {}",
            path.display(),
            loaded.errors.len(),
            first.line,
            first.message
        )));
    }
    Ok(loaded.pairs)
}

#[derive(Serialize)]
struct DroppedRecord {
    id: String,
    reason: String,
}

#[derive(Serialize)]
struct CleanReport {
    input_records: usize,
    kept_records: usize,
    malformed_lines: Vec<LineError>,
    dropped_records: Vec<DroppedRecord>,
    dropped_token_count: usize,
    dropped_tokens: BTreeMap<String, usize>,
}

pub fn clean(args: &CleanArgs) -> CliResult<()> {
    let filter = LengthFilter::new(args.article_min, args.article_max, args.summary_min, args.summary_max)?;
    let loaded = load_corpus(&args.input)?;
    for e in &loaded.errors {
        eprintln!("warning: {} line {}: {}", args.input.display(), e.line, e.message);
    }
    let mut kept = Vec::new();
    let mut dropped_records = Vec::new();
    let mut dropped_tokens: BTreeMap<String, usize> = BTreeMap::new();
    for (pair, dropped) in clean_pairs(&loaded.pairs) {
        for tok in dropped {
            *dropped_tokens.entry(tok).or_default() += 1;
        }
        let (a, s) = (pair.article_words(), pair.summary_words());
        let reason = if a == 0 || s == 0 {
            Some("empty after cleaning".to_string())
        } else if !filter.admits(&pair) {
            Some(format!(
                "{a} article / {s} summary words outside [{}, {}] / [{}, {}]",
                filter.article_min, filter.article_max, filter.summary_min, filter.summary_max
            ))
        } else {
            None
        };
        match reason {
            Some(reason) => dropped_records.push(DroppedRecord { id: pair.id, reason }),
            None => kept.push(pair),
        }
    }
    write_file(&args.out, to_jsonl(&kept))?;
    let report = CleanReport {
        input_records: loaded.pairs.len(),
        kept_records: kept.len(),
        malformed_lines: loaded.errors,
        dropped_records,
        dropped_token_count: dropped_tokens.values().sum(),
        dropped_tokens,
    };
    if let Some(path) = &args.report {
        write_file(path, pretty(&report))?;
    }
    println!(
        "kept {} of {} records ({} malformed lines)",
        report.kept_records,
        report.input_records,
        report.malformed_lines.len()
    );
    Ok(())
}

pub fn stats(input: &Path) -> CliResult<()> {
    let pairs = load_strict(input)?;
    print!("{}", pretty(&compute_stats(&pairs)?));
    Ok(())
}

pub fn build_vocab(args: &VocabArgs) -> CliResult<()> {
    if args.min_freq == 0 || args.max_size < bans_core::text::RESERVED.len() {
        return Err(Failure::usage(anyhow!("--min-freq must be >= 1 and --max-size >= 4")));
    }
    let pairs = load_strict(&args.input)?;
    let vocab = Vocabulary::build(&pairs, args.min_freq, args.max_size);
    vocab.save(&args.out)?;
    println!("{} tokens, fingerprint {}", vocab.len(), vocab.fingerprint());
    Ok(())
}

pub fn split(args: &SplitArgs) -> CliResult<()> {
    let seed = resolve_seed(args.seed, env_seed().as_deref())?;
    let pairs = load_strict(&args.input)?;
    let parts = split_corpus(&pairs, (args.ratios[0], args.ratios[1], args.ratios[2]), seed)?;
    create_dir(&args.out_dir)?;
    for (name, part) in [("train", &parts.train), ("val", &parts.val), ("test", &parts.test)] {
        write_file(&args.out_dir.join(format!("{name}.jsonl")), to_jsonl(part))?;
    }
    println!(
        "train {} / val {} / test {} (seed {seed})",
        parts.train.len(),
        parts.val.len(),
        parts.test.len()
    );
    Ok(())
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let run = RunConfig::resolve(file.merge(args.overrides()), env_seed().as_deref())?;
    let vocab = Vocabulary::load(&args.vocab)?;
    let train_pairs = load_strict(&args.data)?;
    if train_pairs.is_empty() {
        return Err(Failure::domain(anyhow!("{}: empty corpus", args.data.display())));
    }
    let val_pairs = match &args.val {
        Some(path) => load_strict(path)?,
        None => Vec::new(),
    };

    create_dir(&args.out_dir)?;
    fs::copy(&args.vocab, args.out_dir.join(VOCAB_FILE))
        .with_context(|| format!("cannot copy {}", args.vocab.display()))
        .map_err(Failure::usage)?;
    write_file(&args.out_dir.join(RUN_CONFIG), pretty(&run))?;

    let dims = ModelDims {
        vocab: vocab.len(),
        embed: run.embed,
        hidden: run.hidden,
    };
    let mut model = Seq2SeqModel::init(dims, &mut rng::seeded(run.train.seed))?;
    let output = FitOutput {
        dir: args.out_dir.clone(),
        vocab_fingerprint: vocab.fingerprint(),
    };
    let report = fit(
        &mut model,
        &encode_pairs(&train_pairs, &vocab),
        &encode_pairs(&val_pairs, &vocab),
        &run.train,
        Some(&output),
    )?;
    println!(
        "{} epochs{}, best epoch {} (loss {:.6}), checkpoint {}",
        report.epochs.len(),
        if report.stopped_early { " (stopped early)" } else { "" },
        report.best_epoch,
        report.best_val_loss,
        args.out_dir.join(BEST_CHECKPOINT).display()
    );
    Ok(())
}

fn load_model(input: &ModelInput) -> CliResult<(Seq2SeqModel, Vocabulary)> {
    let vocab_path: PathBuf = match &input.vocab {
        Some(p) => p.clone(),
        None => input
            .checkpoint
            .parent()
            .map_or_else(|| PathBuf::from(VOCAB_FILE), |dir| dir.join(VOCAB_FILE)),
    };
    let vocab = Vocabulary::load(&vocab_path)?;
    let ckpt = load_checkpoint(&input.checkpoint, Some(&vocab.fingerprint()))?;
    Ok((ckpt.model, vocab))
}

fn summarize_one(model: &Seq2SeqModel, vocab: &Vocabulary, article: &str, max_len: usize) -> CliResult<String> {
    let src = encode(&tokenize(&clean_text(article)), vocab, false);
    if src.is_empty() {
        return Ok(String::new());
    }
    let ids = model.decode_greedy(&src, max_len)?;
    Ok(decode(&ids, vocab)?)
}

pub fn summarize(args: &SummarizeArgs) -> CliResult<()> {
    let (model, vocab) = load_model(&args.model)?;
    let articles: Vec<String> = match (&args.text, &args.input) {
        (Some(text), _) => vec![text.clone()],
        (None, Some(path)) => load_strict(path)?.into_iter().map(|p| p.article).collect(),
        (None, None) => unreachable!("clap requires --text or --in"),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for article in &articles {
        let line = summarize_one(&model, &vocab, article, args.model.max_len)?;
        writeln!(out, "{line}").map_err(Failure::usage)?;
    }
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let (model, vocab) = load_model(&args.model)?;
    let pairs = load_strict(&args.data)?;
    if pairs.is_empty() {
        return Err(Failure::domain(anyhow!("{}: empty corpus", args.data.display())));
    }
    let report = evaluate_corpus(&model, &vocab, &pairs, args.model.max_len)?;
    create_dir(&args.out_dir)?;
    write_file(&args.out_dir.join(EVAL_REPORT), pretty(&report))?;
    write_file(&args.out_dir.join(SIDE_BY_SIDE), report.side_by_side())?;
    print!("{}", pretty(&report.corpus));
    Ok(())
}
