//! Toy data generators: a small treebank whose PP attachment is decided by
//! the preposition, and a four-state HMM over tags with noun/verb ambiguous
//! words.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::corpus::{TaggedSentence, Tree};
use crate::error::{Error, Result};

const DETS: [&str; 2] = ["the", "a"];
const NOUNS: [&str; 7] = ["dog", "cat", "man", "telescope", "park", "hat", "friend"];
const NAMES: [&str; 2] = ["john", "mary"];
const VERBS: [&str; 3] = ["saw", "liked", "found"];

fn leaf(label: &str, word: &str) -> Tree {
    Tree::preterminal(label.to_string(), 0, word.to_string())
}

fn node(label: &str, children: Vec<Tree>) -> Tree {
    Tree::node(label.to_string(), children)
}

fn pick<'a>(rng: &mut impl Rng, words: &[&'a str]) -> &'a str {
    words.choose(rng).expect("non-empty word list")
}

fn base_np(rng: &mut impl Rng) -> Tree {
    node("NP", vec![leaf("DT", pick(rng, &DETS)), leaf("NN", pick(rng, &NOUNS))])
}

fn subject(rng: &mut impl Rng) -> Tree {
    if rng.gen_bool(0.25) {
        node("NP", vec![leaf("NNP", pick(rng, &NAMES))])
    } else {
        base_np(rng)
    }
}

fn pp(rng: &mut impl Rng, prep: &str) -> Tree {
    node("PP", vec![leaf("IN", prep), base_np(rng)])
}

/// One toy sentence of at most eight words. "with" phrases attach to the
/// verb phrase and "of" phrases to the noun phrase before them.
pub fn toy_sentence(rng: &mut impl Rng) -> Tree {
    let verb = leaf("VB", pick(rng, &VERBS));
    let (subj, vp) = match rng.gen_range(0..4) {
        0 => (subject(rng), node("VP", vec![verb, base_np(rng)])),
        1 => {
            let object = base_np(rng);
            (subject(rng), node("VP", vec![verb, object, pp(rng, "with")]))
        }
        2 => {
            let object = node("NP", vec![base_np(rng), pp(rng, "of")]);
            (subject(rng), node("VP", vec![verb, object]))
        }
        _ => {
            let subj = node("NP", vec![base_np(rng), pp(rng, "of")]);
            (subj, node("VP", vec![verb, base_np(rng)]))
        }
    };
    let mut tree = node("S", vec![subj, vp]);
    tree.renumber(1);
    tree
}

/// `n` toy trees from a seeded generator.
pub fn toy_treebank(seed: u64, n: usize) -> Vec<Tree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| toy_sentence(&mut rng)).collect()
}

/// Seed and size of the bundled toy treebank.
pub const TOY_TREEBANK_SEED: u64 = 7;
pub const TOY_TREEBANK_SIZE: usize = 50;

/// A first-order HMM with explicit stop probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Hmm {
    pub tags: Vec<String>,
    pub words: Vec<String>,
    pub start: Vec<f64>,
    /// `transition[a][b]`; column `tags.len()` is the stop probability.
    pub transition: Vec<Vec<f64>>,
    /// `emission[a][w]`.
    pub emission: Vec<Vec<f64>>,
}

impl Hmm {
    pub fn new(
        tags: &[&str],
        words: &[&str],
        start: Vec<f64>,
        transition: Vec<Vec<f64>>,
        emission: Vec<Vec<f64>>,
    ) -> Result<Hmm> {
        let nt = tags.len();
        let rows_ok = |rows: &[Vec<f64>], width: usize| {
            rows.len() == nt && rows.iter().all(|r| r.len() == width && (r.iter().sum::<f64>() - 1.0).abs() < 1e-9)
        };
        if start.len() != nt
            || (start.iter().sum::<f64>() - 1.0).abs() > 1e-9
            || !rows_ok(&transition, nt + 1)
            || !rows_ok(&emission, words.len())
        {
            return Err(Error::Input("HMM tables must be stochastic and match the tag and word counts".into()));
        }
        Ok(Hmm {
            tags: tags.iter().map(|s| s.to_string()).collect(),
            words: words.iter().map(|s| s.to_string()).collect(),
            start,
            transition,
            emission,
        })
    }

    /// Samples one sentence, resampling until its length is at most `max_len`.
    pub fn sample(&self, rng: &mut impl Rng, max_len: usize) -> TaggedSentence {
        let start = WeightedIndex::new(&self.start).expect("stochastic");
        let trans: Vec<WeightedIndex<f64>> = self.transition.iter().map(|r| WeightedIndex::new(r).expect("stochastic")).collect();
        let emit: Vec<WeightedIndex<f64>> = self.emission.iter().map(|r| WeightedIndex::new(r).expect("stochastic")).collect();
        let stop = self.tags.len();
        loop {
            let mut tags = Vec::new();
            let mut words = Vec::new();
            let mut a = start.sample(rng);
            while a != stop && tags.len() <= max_len {
                tags.push(self.tags[a].clone());
                words.push(self.words[emit[a].sample(rng)].clone());
                a = trans[a].sample(rng);
            }
            if a == stop && tags.len() <= max_len {
                return TaggedSentence::new(words, tags).expect("aligned");
            }
        }
    }

    pub fn sample_corpus(&self, seed: u64, n: usize, max_len: usize) -> Vec<TaggedSentence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample(&mut rng, max_len)).collect()
    }

    /// Exact per-token tag posteriors by scalar forward-backward.
    pub fn posteriors(&self, words: &[String]) -> Result<Vec<Vec<f64>>> {
        let nt = self.tags.len();
        let ids = words
            .iter()
            .map(|w| {
                self.words
                    .iter()
                    .position(|v| v == w)
                    .ok_or_else(|| Error::Coverage(format!("word `{w}` is not in the HMM vocabulary")))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = ids.len();
        if n == 0 {
            return Err(Error::Input("empty sentence".into()));
        }
        // rows rescaled to sum to one; scale factors cancel in posteriors
        let normalize = |v: &mut Vec<f64>| {
            let s: f64 = v.iter().sum();
            if s > 0.0 {
                v.iter_mut().for_each(|x| *x /= s);
            }
        };
        let mut fwd = vec![vec![0.0; nt]; n];
        for a in 0..nt {
            fwd[0][a] = self.start[a] * self.emission[a][ids[0]];
        }
        normalize(&mut fwd[0]);
        for t in 1..n {
            for a in 0..nt {
                let inc: f64 = (0..nt).map(|b| fwd[t - 1][b] * self.transition[b][a]).sum();
                fwd[t][a] = inc * self.emission[a][ids[t]];
            }
            normalize(&mut fwd[t]);
        }
        let mut bwd = vec![vec![0.0; nt]; n];
        for a in 0..nt {
            bwd[n - 1][a] = self.transition[a][nt];
        }
        normalize(&mut bwd[n - 1]);
        for t in (0..n - 1).rev() {
            for a in 0..nt {
                bwd[t][a] = (0..nt)
                    .map(|b| self.transition[a][b] * self.emission[b][ids[t + 1]] * bwd[t + 1][b])
                    .sum();
            }
            normalize(&mut bwd[t]);
        }
        Ok((0..n)
            .map(|t| {
                let mut q: Vec<f64> = (0..nt).map(|a| fwd[t][a] * bwd[t][a]).collect();
                normalize(&mut q);
                q
            })
            .collect())
    }

    /// Per-token posterior argmax; ties go to the first tag.
    pub fn posterior_decode(&self, words: &[String]) -> Result<Vec<String>> {
        Ok(self
            .posteriors(words)?
            .iter()
            .map(|q| {
                let best = (0..q.len()).fold(0, |best, a| if q[a] > q[best] { a } else { best });
                self.tags[best].clone()
            })
            .collect())
    }
}

/// Four tags with words shared between nouns and verbs.
pub fn toy_hmm() -> Hmm {
    let tags = ["DET", "ADJ", "NOUN", "VERB"];
    let words = [
        "the", "a", "big", "small", "old", "dog", "cat", "runs", "walks", "fish", "duck", "sees",
    ];
    let start = vec![0.6, 0.1, 0.25, 0.05];
    //                  DET   ADJ   NOUN  VERB  stop
    let transition = vec![
        vec![0.0, 0.3, 0.7, 0.0, 0.0],
        vec![0.0, 0.2, 0.8, 0.0, 0.0],
        vec![0.05, 0.0, 0.1, 0.5, 0.35],
        vec![0.5, 0.1, 0.25, 0.0, 0.15],
    ];
    let emission = vec![
        vec![0.6, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.4, 0.3, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.25, 0.2, 0.15, 0.15, 0.15, 0.1, 0.0],
        vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.3, 0.25, 0.2, 0.15, 0.1],
    ];
    Hmm::new(&tags, &words, start, transition, emission).expect("valid toy HMM")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::read_penn;

    #[test]
    fn toy_sentences_are_short_and_reparse() {
        let bank = toy_treebank(3, 200);
        for t in &bank {
            assert!(t.width() <= 8);
            let text = t.to_string();
            assert_eq!(read_penn(&text).unwrap(), vec![t.clone()]);
        }
    }

    #[test]
    fn preposition_decides_attachment() {
        for t in toy_treebank(5, 100) {
            t.visit(&mut |n| {
                if n.label == "PP" {
                    let prep = n.children[0].word.as_deref().unwrap();
                    assert!(prep == "with" || prep == "of");
                }
                if n.label == "VP" && n.children.len() == 3 {
                    assert_eq!(n.children[2].children[0].word.as_deref(), Some("with"));
                }
                if n.label == "NP" && n.children.iter().any(|c| c.label == "PP") {
                    assert_eq!(n.children[1].children[0].word.as_deref(), Some("of"));
                }
            });
        }
    }

    #[test]
    fn hmm_samples_respect_zero_entries() {
        let hmm = toy_hmm();
        for s in hmm.sample_corpus(1, 300, 40) {
            assert!(!s.is_empty() && s.len() <= 40);
            assert!(s.tags.last().unwrap() == "NOUN" || s.tags.last().unwrap() == "VERB");
            for (w, t) in s.words.iter().zip(&s.tags) {
                if t == "DET" {
                    assert!(w == "the" || w == "a");
                }
            }
        }
    }

    #[test]
    fn hmm_posteriors_match_path_enumeration() {
        let hmm = toy_hmm();
        let words: Vec<String> = ["the", "dog", "runs", "fish"].iter().map(|s| s.to_string()).collect();
        let ids: Vec<usize> = words.iter().map(|w| hmm.words.iter().position(|v| v == w).unwrap()).collect();
        let nt = hmm.tags.len();
        let mut brute = vec![vec![0.0; nt]; ids.len()];
        let mut z = 0.0;
        for code in 0..nt.pow(ids.len() as u32) {
            let mut c = code;
            let path: Vec<usize> = (0..ids.len())
                .map(|_| {
                    let t = c % nt;
                    c /= nt;
                    t
                })
                .collect();
            let mut p = hmm.start[path[0]] * hmm.emission[path[0]][ids[0]];
            for t in 1..ids.len() {
                p *= hmm.transition[path[t - 1]][path[t]] * hmm.emission[path[t]][ids[t]];
            }
            p *= hmm.transition[path[ids.len() - 1]][nt];
            z += p;
            for (t, a) in path.iter().enumerate() {
                brute[t][*a] += p;
            }
        }
        let q = hmm.posteriors(&words).unwrap();
        for t in 0..ids.len() {
            for a in 0..nt {
                assert!((q[t][a] - brute[t][a] / z).abs() < 1e-12);
            }
        }
    }
}
