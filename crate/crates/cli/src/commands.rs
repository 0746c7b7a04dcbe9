//! Subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use lveg::corpus::{
    debinarize, prepare_tree, prepare_treebank, read_penn, read_sentences, read_tagged_any, read_tree_groups,
    write_tagged, TaggedSentence, Tree, Vocabulary,
};
use lveg::eval::{accuracy, score_brackets};
use lveg::grammar::{estimate_pcfg, init_gm_lveg, RuleQuery};
use lveg::inference::{kbest_mask, parse as parse_sentence, parse_masked};
use lveg::learning::{train as run_training, EpochMetrics, ParseExample, TrainConfig};
use lveg::tagger::{decode, SequenceModel, TaggedExample};
use lveg::{Grammar, PruneRule};
use rayon::prelude::*;
use serde::Serialize;

use crate::settings::Settings;

const CLIP: f64 = 5.0;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn set_jobs(s: &Settings) {
    if let Some(jobs) = s.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("worker pool already configured: {e}");
        }
    }
}

fn train_config(s: &Settings) -> Result<TrainConfig> {
    let config = TrainConfig {
        epochs: s.epochs.unwrap_or(15),
        batch_size: s.batch_size.unwrap_or(32),
        lr: s.lr.unwrap_or(1e-3),
        seed: s.seed.unwrap_or(0),
        clip: CLIP,
        prune: s.prune(true)?,
    };
    if config.batch_size == 0 || !(config.lr > 0.0) {
        return Err(lveg::Error::Config("batch size and learning rate must be positive".into()).into());
    }
    Ok(config)
}

/// Writes one JSON line per epoch to the metrics file or standard output.
fn metrics_sink(s: &Settings) -> Result<Box<dyn Write>> {
    Ok(match &s.metrics {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    })
}

fn emit(sink: &mut dyn Write, m: &EpochMetrics) {
    let line = serde_json::to_string(m).expect("metrics serialize");
    if let Err(e) = writeln!(sink, "{line}") {
        log::warn!("could not write metrics: {e}");
    }
    match m.dev_score {
        Some(dev) => eprintln!("epoch {:>3}  nll {:.4}  dev {:.4}  ({:.1}s)", m.epoch, m.train_nll, dev, m.seconds),
        None => eprintln!("epoch {:>3}  nll {:.4}  ({:.1}s)", m.epoch, m.train_nll, m.seconds),
    }
}

/// Sentences to parse: the words of Penn trees, or one tokenized sentence per line.
fn read_parse_input(text: &str) -> Result<Vec<Vec<String>>> {
    if text.trim_start().starts_with('(') {
        Ok(read_penn(text)?
            .iter()
            .map(|t| t.words().into_iter().cloned().collect())
            .collect())
    } else {
        Ok(read_sentences(text))
    }
}

/// Flat tree under the start symbol with each word under its most likely
/// baseline tag.
fn fallback_tree(grammar: &Grammar, words: &[String]) -> Tree {
    let symbols = grammar.symbols();
    let children = words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let tag = symbols
                .word_id(w)
                .and_then(|t| grammar.rules_for(RuleQuery::Terminal(t)).ok())
                .and_then(|rules| {
                    rules
                        .into_iter()
                        .max_by(|a, b| grammar.pcfg().prob(*a).total_cmp(&grammar.pcfg().prob(*b)).then(b.cmp(a)))
                })
                .map(|r| symbols.nonterminal(grammar.kind(r).parent()).to_string())
                .unwrap_or_else(|| symbols.nonterminal(symbols.start()).to_string());
            Tree::preterminal(tag, i + 1, w.clone())
        })
        .collect();
    Tree::node(symbols.nonterminal(symbols.start()).to_string(), children)
}

/// Parses in parallel, keeping input order. Returns trees and the number of
/// fallback trees.
pub fn parse_all(
    grammar: &Grammar,
    sentences: &[Vec<String>],
    kbest: Option<&[Vec<Tree>]>,
    p_min: f64,
    prune: &PruneRule,
) -> (Vec<Tree>, usize) {
    let results: Vec<(Tree, bool)> = sentences
        .par_iter()
        .enumerate()
        .map(|(i, words)| {
            let attempt = (|| -> lveg::Result<Tree> {
                let ids = grammar.symbols().map_sentence(words)?;
                let tree = match kbest {
                    Some(groups) => {
                        let mask = kbest_mask(grammar.pcfg(), &groups[i], words.len())?;
                        parse_masked(grammar, &ids, &mask, prune)?
                    }
                    None => parse_sentence(grammar, &ids, p_min, prune)?,
                };
                Ok(debinarize(&grammar.pcfg().tree_names(&tree)).with_words(words))
            })();
            match attempt {
                Ok(t) => (t, false),
                Err(e) => {
                    log::warn!("sentence {}: {e}; emitting a flat tree", i + 1);
                    (fallback_tree(grammar, words), true)
                }
            }
        })
        .collect();
    let fallbacks = results.iter().filter(|r| r.1).count();
    (results.into_iter().map(|r| r.0).collect(), fallbacks)
}

/// Trees in the shape used for scoring: unary chains collapsed, no
/// intermediate symbols.
fn scoring_shape(trees: &[Tree]) -> Vec<Tree> {
    trees.iter().map(|t| debinarize(&prepare_tree(t))).collect()
}

fn kbest_groups(s: &Settings, expected: usize) -> Result<Option<Vec<Vec<Tree>>>> {
    let Some(path) = &s.kbest else {
        return Ok(None);
    };
    let groups = read_tree_groups(&read(path)?)?;
    if groups.len() != expected {
        return Err(lveg::Error::Input(format!(
            "{} has {} tree groups for {expected} sentences",
            path.display(),
            groups.len()
        ))
        .into());
    }
    Ok(Some(groups))
}

pub fn train(s: Settings) -> Result<bool> {
    let s = s.resolve()?;
    set_jobs(&s);
    let train_path = s.require(&s.train, "train")?;
    let model_path = s.require(&s.model, "model")?;
    let config = train_config(&s)?;
    let raw = read_penn(&read(train_path)?)?;
    let prep = prepare_treebank(&raw, s.unk_threshold.unwrap_or(1), s.unk_mode())?;
    let pcfg = estimate_pcfg(&prep.trees, Some(prep.vocabulary.clone()))?;
    let grammar = init_gm_lveg(
        &pcfg,
        s.k.unwrap_or(4),
        s.d.unwrap_or(3),
        s.alpha.unwrap_or(8.0),
        s.seed.unwrap_or(0),
        s.spherical.unwrap_or(false),
    )?;
    let p_min = s.p_min()?;
    let kbest = kbest_groups(&s, prep.trees.len())?;
    let mut examples = Vec::new();
    for (i, tree) in prep.trees.iter().enumerate() {
        let example = grammar.pcfg().tree_ids(tree).and_then(|ids| match &kbest {
            Some(groups) => {
                let mask = kbest_mask(grammar.pcfg(), &groups[i], tree.width())?;
                ParseExample::with_mask(&grammar, ids, mask)
            }
            None => ParseExample::new(&grammar, ids, p_min),
        });
        match example {
            Ok(e) => examples.push(e),
            Err(e) => log::warn!("skipping training tree {}: {e}", i + 1),
        }
    }
    let dev = match &s.dev {
        Some(p) => Some(read_penn(&read(p)?)?),
        None => None,
    };
    let parse_prune = s.prune(false)?;
    let dev_score = dev.as_ref().map(|gold| {
        let sentences: Vec<Vec<String>> = gold.iter().map(|t| t.words().into_iter().cloned().collect()).collect();
        let gold = scoring_shape(gold);
        move |g: &Grammar| {
            let (pred, _) = parse_all(g, &sentences, None, p_min, &parse_prune);
            score_brackets(&gold, &scoring_shape(&pred)).map(|b| b.f1).unwrap_or(0.0)
        }
    });
    let mut sink = metrics_sink(&s)?;
    eprintln!(
        "training on {} trees ({} rules, {} nonterminals)",
        examples.len(),
        grammar.len(),
        grammar.symbols().n_nonterminals()
    );
    let outcome = run_training(
        grammar,
        &examples,
        &config,
        dev_score.as_ref().map(|f| f as &(dyn Fn(&Grammar) -> f64 + Sync)),
        |m| emit(sink.as_mut(), m),
    )?;
    write(model_path, &outcome.model.to_json()?)?;
    summarize_training(&outcome.metrics, outcome.best_epoch, model_path);
    Ok(true)
}

fn summarize_training(metrics: &[EpochMetrics], best_epoch: usize, model: &Path) {
    let first = metrics.first().map(|m| m.train_nll).unwrap_or(f64::NAN);
    let last = metrics.last().map(|m| m.train_nll).unwrap_or(f64::NAN);
    eprintln!(
        "training nll {first:.4} -> {last:.4}; kept epoch {best_epoch}; model written to {}",
        model.display()
    );
}

fn read_tagged_file(path: &Path) -> Result<Vec<TaggedSentence>> {
    Ok(read_tagged_any(&read(path)?)?)
}

fn tag_all(model: &SequenceModel, sentences: &[Vec<String>], prune: &PruneRule) -> (Vec<Vec<String>>, usize) {
    let results: Vec<(Vec<String>, bool)> = sentences
        .par_iter()
        .enumerate()
        .map(|(i, words)| {
            let attempt = model
                .symbols()
                .map_sentence(words)
                .and_then(|ids| decode(model, &ids, prune));
            match attempt {
                Ok(tags) => (tags.iter().map(|t| model.symbols().nonterminal(*t).to_string()).collect(), false),
                Err(e) => {
                    log::warn!("sentence {}: {e}; emitting the first tag", i + 1);
                    (vec![model.symbols().nonterminal(0).to_string(); words.len()], true)
                }
            }
        })
        .collect();
    let failures = results.iter().filter(|r| r.1).count();
    (results.into_iter().map(|r| r.0).collect(), failures)
}

pub fn train_tagger(s: Settings) -> Result<bool> {
    let s = s.resolve()?;
    set_jobs(&s);
    let train_path = s.require(&s.train, "train")?;
    let model_path = s.require(&s.model, "model")?;
    let config = train_config(&s)?;
    let sentences = read_tagged_file(train_path)?;
    let vocabulary = Vocabulary::build(
        sentences.iter().map(|s| s.words.iter().map(String::as_str)),
        s.unk_threshold.unwrap_or(1),
        s.unk_mode(),
    );
    let model = SequenceModel::estimate(
        &sentences,
        vocabulary,
        s.k.unwrap_or(4),
        s.d.unwrap_or(3),
        s.alpha.unwrap_or(8.0),
        s.seed.unwrap_or(0),
        s.spherical.unwrap_or(false),
    )?;
    let examples: Vec<TaggedExample> = sentences.iter().map(|x| model.example(x)).collect::<lveg::Result<_>>()?;
    let dev = match &s.dev {
        Some(p) => Some(read_tagged_file(p)?),
        None => None,
    };
    let parse_prune = s.prune(false)?;
    let dev_score = dev.as_ref().map(|dev| {
        let words: Vec<Vec<String>> = dev.iter().map(|x| x.words.clone()).collect();
        let gold: Vec<Vec<String>> = dev.iter().map(|x| x.tags.clone()).collect();
        move |m: &SequenceModel| {
            let (pred, _) = tag_all(m, &words, &parse_prune);
            accuracy(&gold, &pred).map(|a| a.0).unwrap_or(0.0)
        }
    });
    let mut sink = metrics_sink(&s)?;
    eprintln!("training on {} sentences ({} tags)", examples.len(), model.n_tags());
    let outcome = run_training(
        model,
        &examples,
        &config,
        dev_score.as_ref().map(|f| f as &(dyn Fn(&SequenceModel) -> f64 + Sync)),
        |m| emit(sink.as_mut(), m),
    )?;
    write(model_path, &outcome.model.to_json()?)?;
    summarize_training(&outcome.metrics, outcome.best_epoch, model_path);
    Ok(true)
}

pub fn parse(s: Settings) -> Result<bool> {
    let s = s.resolve()?;
    set_jobs(&s);
    let grammar = Grammar::from_json(&read(s.require(&s.model, "model")?)?)?;
    let sentences = read_parse_input(&read(s.require(&s.test, "test")?)?)?;
    let kbest = kbest_groups(&s, sentences.len())?;
    let (trees, fallbacks) = parse_all(&grammar, &sentences, kbest.as_deref(), s.p_min()?, &s.prune(false)?);
    let mut out = std::io::stdout().lock();
    for t in &trees {
        writeln!(out, "{t}")?;
    }
    eprintln!("parsed {} sentences, {fallbacks} flat fallback trees", trees.len());
    Ok(true)
}

#[derive(Serialize)]
struct TagReport {
    token_accuracy: f64,
    sentence_accuracy: f64,
    sentences: usize,
}

pub fn tag(s: Settings) -> Result<bool> {
    let s = s.resolve()?;
    set_jobs(&s);
    let model = SequenceModel::from_json(&read(s.require(&s.model, "model")?)?)?;
    let text = read(s.require(&s.test, "test")?)?;
    let (words, gold) = if text.contains('\t') {
        let tagged = read_tagged_any(&text)?;
        let gold: Vec<Vec<String>> = tagged.iter().map(|x| x.tags.clone()).collect();
        (tagged.into_iter().map(|x| x.words).collect(), Some(gold))
    } else {
        (read_sentences(&text), None)
    };
    let (tags, failures) = tag_all(&model, &words, &s.prune(false)?);
    let output: Vec<TaggedSentence> = words
        .iter()
        .zip(&tags)
        .map(|(w, t)| TaggedSentence::new(w.clone(), t.clone()))
        .collect::<lveg::Result<_>>()?;
    print!("{}", write_tagged(&output));
    eprintln!("tagged {} sentences, {failures} failures", output.len());
    if let Some(gold) = gold {
        let (token_accuracy, sentence_accuracy) = accuracy(&gold, &tags)?;
        let report = TagReport {
            token_accuracy,
            sentence_accuracy,
            sentences: gold.len(),
        };
        eprintln!("{}", serde_json::to_string(&report)?);
    }
    Ok(true)
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Score tag sequences instead of trees.
    #[arg(long)]
    pub tags: bool,
}

pub fn eval(a: EvalArgs) -> Result<bool> {
    let (gold, pred) = (read(&a.gold)?, read(&a.pred)?);
    if a.tags {
        let g: Vec<Vec<String>> = read_tagged_any(&gold)?.into_iter().map(|x| x.tags).collect();
        let p: Vec<Vec<String>> = read_tagged_any(&pred)?.into_iter().map(|x| x.tags).collect();
        let (token_accuracy, sentence_accuracy) = accuracy(&g, &p)?;
        println!(
            "{}",
            serde_json::to_string(&TagReport {
                token_accuracy,
                sentence_accuracy,
                sentences: g.len()
            })?
        );
        eprintln!("token accuracy {:.2}, sentence accuracy {:.2}", 100.0 * token_accuracy, 100.0 * sentence_accuracy);
    } else {
        let score = score_brackets(&scoring_shape(&read_penn(&gold)?), &scoring_shape(&read_penn(&pred)?))?;
        println!("{}", serde_json::to_string(&score)?);
        eprintln!(
            "P {:.2}  R {:.2}  F1 {:.2}  EX {:.2}  ({} sentences)",
            score.precision, score.recall, score.f1, score.exact_match, score.sentences
        );
    }
    Ok(true)
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random instances per check.
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
}

pub fn verify(a: VerifyArgs) -> Result<bool> {
    let outcomes = lveg::oracle::verify(a.seed, a.instances)?;
    for o in &outcomes {
        println!("{o}");
    }
    Ok(outcomes.iter().all(|o| o.passed))
}
