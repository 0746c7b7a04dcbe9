//! Labeled bracket scoring and tagging accuracy.

use std::collections::HashMap;

use serde::Serialize;

use crate::corpus::Tree;
use crate::error::{Error, Result};

/// Corpus-level bracket scores, in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BracketScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub exact_match: f64,
    pub sentences: usize,
}

/// Labeled brackets of a tree: internal nodes spanning more than one word,
/// plus the root. Preterminals are not brackets.
pub fn brackets<W>(tree: &Tree<String, W>) -> HashMap<(String, usize, usize), usize> {
    let mut out = HashMap::new();
    let mut first = true;
    tree.visit(&mut |node| {
        let is_root = std::mem::take(&mut first);
        if !node.is_preterminal() && (is_root || node.width() > 1) {
            *out.entry((node.label.clone(), node.start, node.end)).or_insert(0) += 1;
        }
    });
    out
}

/// Multiset bracket matching over aligned corpora.
pub fn score_brackets<W>(gold: &[Tree<String, W>], predicted: &[Tree<String, W>]) -> Result<BracketScore> {
    if gold.len() != predicted.len() {
        return Err(Error::Input(format!(
            "{} gold trees but {} predicted trees",
            gold.len(),
            predicted.len()
        )));
    }
    let (mut matched, mut n_gold, mut n_pred, mut exact) = (0usize, 0usize, 0usize, 0usize);
    for (g, p) in gold.iter().zip(predicted) {
        if g.width() != p.width() {
            return Err(Error::Input(format!(
                "sentence lengths differ: {} vs {}",
                g.width(),
                p.width()
            )));
        }
        let bg = brackets(g);
        let bp = brackets(p);
        n_gold += bg.values().sum::<usize>();
        n_pred += bp.values().sum::<usize>();
        matched += bg.iter().map(|(k, c)| (*c).min(bp.get(k).copied().unwrap_or(0))).sum::<usize>();
        if bg == bp {
            exact += 1;
        }
    }
    let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
    let precision = pct(matched, n_pred);
    let recall = pct(matched, n_gold);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(BracketScore {
        precision,
        recall,
        f1,
        exact_match: pct(exact, gold.len()),
        sentences: gold.len(),
    })
}

/// Token and sentence accuracy of aligned tag sequences, as fractions.
pub fn accuracy<T: PartialEq>(gold: &[Vec<T>], predicted: &[Vec<T>]) -> Result<(f64, f64)> {
    if gold.len() != predicted.len() {
        return Err(Error::Input(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            predicted.len()
        )));
    }
    let (mut right, mut total, mut whole) = (0usize, 0usize, 0usize);
    for (g, p) in gold.iter().zip(predicted) {
        if g.len() != p.len() {
            return Err(Error::Input(format!("sentence lengths differ: {} vs {}", g.len(), p.len())));
        }
        let r = g.iter().zip(p).filter(|(a, b)| a == b).count();
        right += r;
        total += g.len();
        if r == g.len() {
            whole += 1;
        }
    }
    if total == 0 {
        return Err(Error::Input("no tokens to score".into()));
    }
    Ok((right as f64 / total as f64, whole as f64 / gold.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::read_penn;

    #[test]
    fn identical_trees_score_100() {
        let t = read_penn("(S (NP (DT a) (NN b)) (VP (V c) (NP (N d))))").unwrap();
        let s = score_brackets(&t, &t).unwrap();
        assert_eq!((s.precision, s.recall, s.f1, s.exact_match), (100.0, 100.0, 100.0, 100.0));
    }

    #[test]
    fn one_missing_bracket() {
        // gold brackets: S, NP(1-2), VP(3-5), PP(4-5)
        let g = read_penn("(S (NP (D a) (N b)) (VP (V c) (PP (P d) (N e))))").unwrap();
        let p = read_penn("(S (NP (D a) (N b)) (VP (V c) (P d) (N e)))").unwrap();
        let s = score_brackets(&g, &p).unwrap();
        assert_eq!(s.precision, 100.0);
        assert_eq!(s.recall, 75.0);
        assert!((s.f1 - 85.714_285_714).abs() < 1e-6);
        assert_eq!(s.exact_match, 0.0);
    }

    #[test]
    fn width_one_nodes_are_not_brackets() {
        let g = read_penn("(S (NP (N a)) (V b))").unwrap();
        assert_eq!(brackets(&g[0]).len(), 1);
    }

    #[test]
    fn misaligned_corpora() {
        let g = read_penn("(S (A a) (B b))").unwrap();
        assert!(score_brackets(&g, &[]).is_err());
    }

    #[test]
    fn tagging_accuracy() {
        let g = vec![vec!["A"; 5], vec!["B"; 5]];
        assert_eq!(accuracy(&g, &g).unwrap(), (1.0, 1.0));
        let mut p = g.clone();
        p[1][2] = "A";
        assert_eq!(accuracy(&g, &p).unwrap(), (0.9, 0.5));
        assert!(accuracy(&g, &p[..1]).is_err());
    }
}
