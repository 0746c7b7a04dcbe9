//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! test harness so the lines are always shown; exits nonzero on failure.

use std::time::{Duration, Instant};

use lveg::corpus::{debinarize, prepare_treebank, read_penn, TaggedSentence, Tree, UnknownMode, Vocabulary};
use lveg::eval::{accuracy, score_brackets};
use lveg::grammar::{estimate_pcfg, init_gm_lveg};
use lveg::inference::parse;
use lveg::learning::{nll, train, ParseExample, TrainConfig};
use lveg::oracle::{
    check_gradients, check_k_allow, check_max_rule, check_oracle_equivalence, check_scaling, check_sum_rules,
    CheckOutcome,
};
use lveg::synthetic::toy_hmm;
use lveg::tagger::{decode, SequenceModel, TaggedExample};
use lveg::{Grammar, PruneRule};

const TOY_TREEBANK: &str = include_str!("../data/toy_treebank.mrg");
const SEED: u64 = 20;

struct Verdict {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn from_check(name: &'static str, limit: Duration, run: impl FnOnce() -> lveg::Result<CheckOutcome>) -> Verdict {
    let clock = Instant::now();
    match run() {
        Ok(o) => {
            let elapsed = clock.elapsed();
            Verdict {
                name,
                passed: o.passed && elapsed < limit,
                detail: format!(
                    "{} instances, max error {:.3e} (tolerance {:.0e}), {:.1}s{}",
                    o.instances,
                    o.max_error,
                    o.tolerance,
                    elapsed.as_secs_f64(),
                    if o.detail.is_empty() { String::new() } else { format!(", {}", o.detail) }
                ),
            }
        }
        Err(e) => Verdict {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn single_worker<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("pool").install(f)
}

struct ToyRun {
    initial_nll: f64,
    final_nll: f64,
    f1: f64,
    model_json: String,
    parses: Vec<String>,
}

fn toy_config() -> TrainConfig {
    TrainConfig {
        epochs: 15,
        batch_size: 5,
        lr: 0.05,
        seed: SEED,
        ..TrainConfig::default()
    }
}

fn parse_all(g: &Grammar, trees: &[Tree]) -> lveg::Result<Vec<Tree>> {
    trees
        .iter()
        .map(|t| {
            let words: Vec<String> = t.words().into_iter().cloned().collect();
            let ids = g.symbols().map_sentence(&words)?;
            let tree = parse(g, &ids, 1e-5, &PruneRule::PARSE)?;
            Ok(debinarize(&g.pcfg().tree_names(&tree)).with_words(&words))
        })
        .collect()
}

fn toy_training() -> lveg::Result<ToyRun> {
    let raw = read_penn(TOY_TREEBANK)?;
    let prep = prepare_treebank(&raw, 1, UnknownMode::Berkeley60)?;
    let pcfg = estimate_pcfg(&prep.trees, Some(prep.vocabulary.clone()))?;
    let grammar = init_gm_lveg(&pcfg, 4, 3, 8.0, SEED, false)?;
    let examples: Vec<ParseExample> = prep
        .trees
        .iter()
        .map(|t| ParseExample::new(&grammar, grammar.pcfg().tree_ids(t)?, 1e-5))
        .collect::<lveg::Result<_>>()?;
    let config = toy_config();
    let initial_nll = nll(&grammar, &examples, &config.prune)?;
    let outcome = train(grammar, &examples, &config, None, |_| {})?;
    let model = outcome.model;
    let final_nll = nll(&model, &examples, &config.prune)?;
    let gold: Vec<Tree> = raw.iter().map(|t| debinarize(&lveg::corpus::prepare_tree(t))).collect();
    let predicted = parse_all(&model, &raw)?;
    let f1 = score_brackets(&gold, &predicted)?.f1;
    Ok(ToyRun {
        initial_nll,
        final_nll,
        f1,
        model_json: model.to_json()?,
        parses: predicted.iter().map(|t| t.to_string()).collect(),
    })
}

fn toy_training_verdict() -> Verdict {
    let clock = Instant::now();
    let name = "toy training";
    match single_worker(toy_training) {
        Ok(run) => {
            let reduction = 1.0 - run.final_nll / run.initial_nll;
            let elapsed = clock.elapsed();
            Verdict {
                name,
                passed: reduction >= 0.30 && run.f1 >= 95.0 && elapsed < Duration::from_secs(15 * 60),
                detail: format!(
                    "nll {:.4} -> {:.4} ({:.1}% reduction), training F1 {:.2}, {:.1}s single worker",
                    run.initial_nll,
                    run.final_nll,
                    100.0 * reduction,
                    run.f1,
                    elapsed.as_secs_f64()
                ),
            }
        }
        Err(e) => Verdict {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn tag_names(model: &SequenceModel, sentences: &[TaggedSentence]) -> lveg::Result<Vec<Vec<String>>> {
    sentences
        .iter()
        .map(|s| {
            let ids = model.symbols().map_sentence(&s.words)?;
            Ok(decode(model, &ids, &PruneRule::PARSE)?
                .iter()
                .map(|t| model.symbols().nonterminal(*t).to_string())
                .collect())
        })
        .collect()
}

struct TagRun {
    model_accuracy: f64,
    hmm_accuracy: f64,
    majority_accuracy: f64,
    model_json: String,
}

fn toy_tagging() -> lveg::Result<TagRun> {
    let hmm = toy_hmm();
    let train_set = hmm.sample_corpus(1, 5000, 40);
    let dev_set = hmm.sample_corpus(2, 500, 40);
    let test_set = hmm.sample_corpus(3, 1000, 40);
    let vocabulary = Vocabulary::build(train_set.iter().map(|s| s.words.iter().map(String::as_str)), 1, UnknownMode::Simple);
    let model = SequenceModel::estimate(&train_set, vocabulary, 4, 3, 8.0, SEED, false)?;
    let examples: Vec<TaggedExample> = train_set.iter().map(|s| model.example(s)).collect::<lveg::Result<_>>()?;
    let dev_gold: Vec<Vec<String>> = dev_set.iter().map(|s| s.tags.clone()).collect();
    let dev_score = |m: &SequenceModel| {
        tag_names(m, &dev_set)
            .and_then(|p| accuracy(&dev_gold, &p))
            .map(|a| a.0)
            .unwrap_or(0.0)
    };
    let config = TrainConfig {
        epochs: 3,
        batch_size: 32,
        lr: 3e-3,
        seed: SEED,
        ..TrainConfig::default()
    };
    let model = train(model, &examples, &config, Some(&dev_score), |_| {})?.model;
    let gold: Vec<Vec<String>> = test_set.iter().map(|s| s.tags.clone()).collect();
    let model_accuracy = accuracy(&gold, &tag_names(&model, &test_set)?)?.0;
    let hmm_tags: Vec<Vec<String>> = test_set
        .iter()
        .map(|s| hmm.posterior_decode(&s.words))
        .collect::<lveg::Result<_>>()?;
    let hmm_accuracy = accuracy(&gold, &hmm_tags)?.0;
    // most frequent training tag everywhere
    let mut counts = std::collections::BTreeMap::<&str, usize>::new();
    for s in &train_set {
        for t in &s.tags {
            *counts.entry(t).or_default() += 1;
        }
    }
    let majority = counts.iter().max_by_key(|(_, c)| **c).map(|(t, _)| t.to_string()).unwrap_or_default();
    let majority_tags: Vec<Vec<String>> = test_set.iter().map(|s| vec![majority.clone(); s.len()]).collect();
    let majority_accuracy = accuracy(&gold, &majority_tags)?.0;
    Ok(TagRun {
        model_accuracy,
        hmm_accuracy,
        majority_accuracy,
        model_json: model.to_json()?,
    })
}

fn toy_tagging_verdict() -> Verdict {
    let clock = Instant::now();
    let name = "toy tagging";
    match toy_tagging() {
        Ok(run) => {
            let elapsed = clock.elapsed();
            Verdict {
                name,
                passed: (run.model_accuracy - run.hmm_accuracy).abs() <= 0.02
                    && run.model_accuracy > run.majority_accuracy
                    && elapsed < Duration::from_secs(15 * 60),
                detail: format!(
                    "held-out token accuracy {:.2} vs generating HMM {:.2}, majority tag {:.2}, {:.1}s",
                    100.0 * run.model_accuracy,
                    100.0 * run.hmm_accuracy,
                    100.0 * run.majority_accuracy,
                    elapsed.as_secs_f64()
                ),
            }
        }
        Err(e) => Verdict {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn determinism_verdict() -> Verdict {
    let name = "determinism";
    let run = || -> lveg::Result<(bool, bool, bool)> {
        let a = single_worker(toy_training)?;
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .expect("pool")
            .install(toy_training)?;
        let ta = toy_tagging()?;
        let tb = toy_tagging()?;
        Ok((a.model_json == b.model_json, a.parses == b.parses, ta.model_json == tb.model_json))
    };
    match run() {
        Ok((model, parses, tagger)) => Verdict {
            name,
            passed: model && parses && tagger,
            detail: format!(
                "parser model identical: {model}, parse output identical: {parses}, tagger model identical: {tagger} (1 vs 4 workers for the parser)"
            ),
        },
        Err(e) => Verdict {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn serialization_verdict() -> Verdict {
    let name = "serialization";
    let run = || -> lveg::Result<(bool, bool)> {
        let parser = toy_training()?.model_json;
        let reloaded = Grammar::from_json(&parser)?.to_json()?;
        let tagger = toy_tagging()?.model_json;
        let tagger_reloaded = SequenceModel::from_json(&tagger)?.to_json()?;
        Ok((parser == reloaded, tagger == tagger_reloaded))
    };
    match run() {
        Ok((p, t)) => Verdict {
            name,
            passed: p && t,
            detail: format!("parser save-load-save identical: {p}, tagger save-load-save identical: {t}"),
        },
        Err(e) => Verdict {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn main() {
    let two_min = Duration::from_secs(120);
    let five_min = Duration::from_secs(300);
    let verdicts = [
        from_check("oracle equivalence", two_min, || check_oracle_equivalence(SEED, 200)),
        from_check("gradient check", five_min, || check_gradients(SEED, 60)),
        from_check("posterior sum rules", five_min, || check_sum_rules(SEED, 20)),
        from_check("scaling invariance", five_min, || check_scaling(SEED, 200)),
        from_check("max-rule decode", five_min, || check_max_rule(SEED, 200)),
        from_check("pruning arithmetic", five_min, || Ok(check_k_allow())),
        toy_training_verdict(),
        toy_tagging_verdict(),
        determinism_verdict(),
        serialization_verdict(),
    ];
    for v in &verdicts {
        println!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    let failed: Vec<&str> = verdicts.iter().filter(|v| !v.passed).map(|v| v.name).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
