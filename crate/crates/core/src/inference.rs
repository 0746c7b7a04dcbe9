//! Chart inference over mixture-valued inside and outside scores.
//!
//! Every span carries two levels per nonterminal: the pre-unary level (built
//! from a lexical or binary rule) and the post-unary level (the pre-unary
//! score plus at most one unary rule on top). Binary rules consume post-unary
//! children and produce pre-unary parents.
//!
//! Contracting a rule weight against child scores leaves the parent part of
//! each rule component untouched, so every component of a cell is a slice of
//! some rule component, identified by `(rule, component, slot)`. Contributions
//! from different splits or siblings that share this identity are merged by
//! adding their weights, which is exact.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::corpus::{prepare_tree, Tree};
use crate::error::{Error, Result};
use crate::gm::{log_add, log_sum_exp, GaussianMixture, PruneRule, Slot};
use crate::grammar::{Grammar, NtId, Pcfg, RuleId, RuleKind, TermId};

/// Slot name of the one-slot mixtures stored in chart cells.
pub const SUBTYPE: &str = "x";

/// Allowed (span, nonterminal) pairs, separately for the two unary levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanMask {
    n: usize,
    nt: usize,
    pre: Vec<bool>,
    post: Vec<bool>,
}

impl SpanMask {
    pub fn allow_all(n: usize, nt: usize) -> SpanMask {
        SpanMask {
            n,
            nt,
            pre: vec![true; n * n * nt],
            post: vec![true; n * n * nt],
        }
    }

    pub fn deny_all(n: usize, nt: usize) -> SpanMask {
        SpanMask {
            n,
            nt,
            pre: vec![false; n * n * nt],
            post: vec![false; n * n * nt],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn n_nonterminals(&self) -> usize {
        self.nt
    }

    fn ix(&self, i: usize, j: usize, a: NtId) -> usize {
        debug_assert!(1 <= i && i <= j && j <= self.n && a < self.nt);
        ((i - 1) * self.n + (j - 1)) * self.nt + a
    }

    pub fn allows_pre(&self, i: usize, j: usize, a: NtId) -> bool {
        self.pre[self.ix(i, j, a)]
    }

    pub fn allows_post(&self, i: usize, j: usize, a: NtId) -> bool {
        self.post[self.ix(i, j, a)]
    }

    pub fn allows(&self, i: usize, j: usize, a: NtId) -> bool {
        self.allows_pre(i, j, a) || self.allows_post(i, j, a)
    }

    /// Allows `a` over `(i, j)` at both levels.
    pub fn allow(&mut self, i: usize, j: usize, a: NtId) {
        let ix = self.ix(i, j, a);
        self.pre[ix] = true;
        self.post[ix] = true;
    }

    pub fn allow_pre(&mut self, i: usize, j: usize, a: NtId) {
        let ix = self.ix(i, j, a);
        self.pre[ix] = true;
    }

    pub fn allow_post(&mut self, i: usize, j: usize, a: NtId) {
        let ix = self.ix(i, j, a);
        self.post[ix] = true;
    }

    pub fn union_with(&mut self, other: &SpanMask) -> Result<()> {
        if (self.n, self.nt) != (other.n, other.nt) {
            return Err(Error::Dimension("mask shapes differ".into()));
        }
        for (a, b) in self.pre.iter_mut().zip(&other.pre) {
            *a |= *b;
        }
        for (a, b) in self.post.iter_mut().zip(&other.post) {
            *a |= *b;
        }
        Ok(())
    }

    /// Number of (span, nonterminal) pairs allowed at either level.
    pub fn count_allowed(&self) -> usize {
        self.pre.iter().zip(&self.post).filter(|(a, b)| **a || **b).count()
    }
}

/// The mask admitting exactly the nodes of a tree: a unary node allows its
/// label at the post level and its child's at the pre level.
pub fn gold_mask(tree: &Tree<NtId, TermId>, n: usize, nt: usize) -> SpanMask {
    fn walk(t: &Tree<NtId, TermId>, under_unary: bool, m: &mut SpanMask) {
        if t.children.len() == 1 {
            m.allow_post(t.start, t.end, t.label);
            walk(&t.children[0], true, m);
            return;
        }
        m.allow_pre(t.start, t.end, t.label);
        if !under_unary {
            m.allow_post(t.start, t.end, t.label);
        }
        for c in &t.children {
            walk(c, false, m);
        }
    }
    let mut m = SpanMask::deny_all(n, nt);
    walk(tree, false, &mut m);
    m
}

type Cell = Option<Arc<GaussianMixture>>;

/// Inside and outside mixtures for one sentence.
#[derive(Clone, Debug)]
pub struct ParseChart {
    n: usize,
    nt: usize,
    start: NtId,
    inside_pre: Vec<Cell>,
    inside_post: Vec<Cell>,
    outside_pre: Vec<Cell>,
    outside_post: Vec<Cell>,
    present_pre: Vec<Vec<NtId>>,
    present_post: Vec<Vec<NtId>>,
    mask: SpanMask,
    log_z: f64,
    outside_done: bool,
}

impl ParseChart {
    fn span(&self, i: usize, j: usize) -> usize {
        debug_assert!(1 <= i && i <= j && j <= self.n);
        (i - 1) * self.n + (j - 1)
    }

    fn cell(&self, i: usize, j: usize, a: NtId) -> usize {
        self.span(i, j) * self.nt + a
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mask(&self) -> &SpanMask {
        &self.mask
    }

    pub fn inside_pre(&self, i: usize, j: usize, a: NtId) -> Option<&Arc<GaussianMixture>> {
        self.inside_pre[self.cell(i, j, a)].as_ref()
    }

    pub fn inside_post(&self, i: usize, j: usize, a: NtId) -> Option<&Arc<GaussianMixture>> {
        self.inside_post[self.cell(i, j, a)].as_ref()
    }

    pub fn outside_pre(&self, i: usize, j: usize, a: NtId) -> Option<&Arc<GaussianMixture>> {
        self.outside_pre[self.cell(i, j, a)].as_ref()
    }

    pub fn outside_post(&self, i: usize, j: usize, a: NtId) -> Option<&Arc<GaussianMixture>> {
        self.outside_post[self.cell(i, j, a)].as_ref()
    }

    /// Nonterminals with a post-unary inside score over `(i, j)`.
    pub fn present_post(&self, i: usize, j: usize) -> &[NtId] {
        &self.present_post[self.span(i, j)]
    }

    pub fn present_pre(&self, i: usize, j: usize) -> &[NtId] {
        &self.present_pre[self.span(i, j)]
    }

    pub fn has_outside(&self) -> bool {
        self.outside_done
    }

    /// Total number of stored mixture components, for diagnostics.
    pub fn component_count(&self) -> usize {
        [&self.inside_pre, &self.inside_post, &self.outside_pre, &self.outside_post]
            .iter()
            .flat_map(|v| v.iter())
            .map(|c| c.as_ref().map_or(0, |m| m.len()))
            .sum()
    }
}

/// Scratch accumulator keyed by `(rule, component, slot)`.
struct Accumulator {
    k: usize,
    d: usize,
    values: Vec<f64>,
    touched: Vec<usize>,
}

impl Accumulator {
    fn new(grammar: &Grammar) -> Accumulator {
        Accumulator {
            k: grammar.k(),
            d: grammar.d(),
            values: vec![f64::NEG_INFINITY; grammar.len() * grammar.k() * 3],
            touched: Vec::new(),
        }
    }

    fn add(&mut self, r: RuleId, kk: usize, slot: usize, lw: f64) {
        if lw == f64::NEG_INFINITY {
            return;
        }
        let key = (r * self.k + kk) * 3 + slot;
        let v = &mut self.values[key];
        if *v == f64::NEG_INFINITY {
            self.touched.push(key);
        }
        *v = log_add(*v, lw);
    }

    /// Groups accumulated components by the nonterminal in their slot.
    fn drain(&mut self, grammar: &Grammar) -> BTreeMap<NtId, GaussianMixture> {
        self.touched.sort_unstable();
        let d = self.d;
        let mut out: BTreeMap<NtId, GaussianMixture> = BTreeMap::new();
        for &key in &self.touched {
            let (r, kk, s) = (key / (3 * self.k), (key / 3) % self.k, key % 3);
            let target = grammar.kind(r).symbol_at(s);
            let w = grammar.weight(r);
            let lw = self.values[key];
            self.values[key] = f64::NEG_INFINITY;
            out.entry(target)
                .or_insert_with(|| GaussianMixture::zero(vec![Slot::new(SUBTYPE, d)]))
                .push(lw, &w.mean(kk)[s * d..(s + 1) * d], &w.variance(kk)[s * d..(s + 1) * d]);
        }
        self.touched.clear();
        out
    }
}

fn part(v: &[f64], s: usize, d: usize) -> &[f64] {
    &v[s * d..(s + 1) * d]
}

fn check_words(grammar: &Grammar, words: &[TermId]) -> Result<()> {
    if words.is_empty() {
        return Err(Error::Input("empty sentence".into()));
    }
    let ix = grammar.index();
    for &w in words {
        if w >= grammar.symbols().n_terminals() {
            return Err(Error::IndexOutOfRange {
                index: w,
                len: grammar.symbols().n_terminals(),
            });
        }
        if ix.lexical_by_terminal[w].is_empty() {
            return Err(Error::Coverage(format!(
                "word `{}` has no lexical rule",
                grammar.symbols().terminal(w)
            )));
        }
    }
    Ok(())
}

/// Inside pass. Cells outside the mask stay empty; every finished cell is
/// pruned with `prune`.
pub fn inside(grammar: &Grammar, words: &[TermId], mask: &SpanMask, prune: &PruneRule) -> Result<ParseChart> {
    check_words(grammar, words)?;
    let n = words.len();
    let nt = grammar.symbols().n_nonterminals();
    if mask.len() != n || mask.n_nonterminals() != nt {
        return Err(Error::Dimension(format!(
            "mask covers {} words / {} nonterminals, sentence has {n} / {nt}",
            mask.len(),
            mask.n_nonterminals()
        )));
    }
    let d = grammar.d();
    let ix = grammar.index();
    let mut chart = ParseChart {
        n,
        nt,
        start: grammar.symbols().start(),
        inside_pre: vec![None; n * n * nt],
        inside_post: vec![None; n * n * nt],
        outside_pre: vec![None; n * n * nt],
        outside_post: vec![None; n * n * nt],
        present_pre: vec![Vec::new(); n * n],
        present_post: vec![Vec::new(); n * n],
        mask: mask.clone(),
        log_z: f64::NEG_INFINITY,
        outside_done: false,
    };
    let mut acc = Accumulator::new(grammar);
    for width in 1..=n {
        for i in 1..=n + 1 - width {
            let j = i + width - 1;
            if width == 1 {
                for &r in &ix.lexical_by_terminal[words[i - 1]] {
                    if !mask.allows_pre(i, i, grammar.kind(r).parent()) {
                        continue;
                    }
                    let w = grammar.weight(r);
                    for kk in 0..w.len() {
                        acc.add(r, kk, 0, w.log_weight(kk));
                    }
                }
            } else {
                for k in i..j {
                    for &b in chart.present_post(i, k) {
                        let ib = chart.inside_post(i, k, b).unwrap();
                        for &r in &ix.binary_by_left[b] {
                            let RuleKind::Binary { parent, right, .. } = grammar.kind(r) else {
                                unreachable!()
                            };
                            if !mask.allows_pre(i, j, parent) {
                                continue;
                            }
                            let Some(ic) = chart.inside_post(k + 1, j, right) else {
                                continue;
                            };
                            let w = grammar.weight(r);
                            for kk in 0..w.len() {
                                let (m, v) = (w.mean(kk), w.variance(kk));
                                let lw = w.log_weight(kk)
                                    + ib.log_overlap(part(m, 1, d), part(v, 1, d))
                                    + ic.log_overlap(part(m, 2, d), part(v, 2, d));
                                acc.add(r, kk, 0, lw);
                            }
                        }
                    }
                }
            }
            let span = chart.span(i, j);
            for (a, f) in acc.drain(grammar) {
                let f = f.prune(prune);
                if f.is_empty() {
                    continue;
                }
                let c = chart.cell(i, j, a);
                chart.inside_pre[c] = Some(Arc::new(f));
                chart.present_pre[span].push(a);
            }
            unary_inside(grammar, &mut chart, i, j, prune);
        }
    }
    if let Some(root) = chart.inside_post(1, n, chart.start) {
        chart.log_z = root.log_total_mass();
    }
    Ok(chart)
}

fn unary_inside(grammar: &Grammar, chart: &mut ParseChart, i: usize, j: usize, prune: &PruneRule) {
    let d = grammar.d();
    let ix = grammar.index();
    let span = chart.span(i, j);
    for a in 0..chart.nt {
        if !chart.mask.allows_post(i, j, a) {
            continue;
        }
        let pre = chart.inside_pre(i, j, a).cloned();
        let mut extra: Option<GaussianMixture> = None;
        for &r in &ix.unary_by_parent[a] {
            let RuleKind::Unary { child, .. } = grammar.kind(r) else {
                unreachable!()
            };
            let Some(ib) = chart.inside_pre(i, j, child) else {
                continue;
            };
            let w = grammar.weight(r);
            let f = extra.get_or_insert_with(|| match &pre {
                Some(p) => (**p).clone(),
                None => GaussianMixture::zero(vec![Slot::new(SUBTYPE, d)]),
            });
            for kk in 0..w.len() {
                let (m, v) = (w.mean(kk), w.variance(kk));
                let lw = w.log_weight(kk) + ib.log_overlap(part(m, 1, d), part(v, 1, d));
                if lw > f64::NEG_INFINITY {
                    f.push(lw, part(m, 0, d), part(v, 0, d));
                }
            }
        }
        let post = match extra {
            Some(f) => {
                let f = f.prune(prune);
                (!f.is_empty()).then(|| Arc::new(f))
            }
            None => pre,
        };
        if let Some(p) = post {
            let c = chart.cell(i, j, a);
            chart.inside_post[c] = Some(p);
            chart.present_post[span].push(a);
        }
    }
}

/// Log sentence weight: log total mass of the start symbol's post-unary
/// inside score over the whole sentence.
pub fn sentence_weight(chart: &ParseChart) -> Result<f64> {
    if chart.log_z == f64::NEG_INFINITY || chart.log_z.is_nan() {
        return Err(Error::NoParse("sentence weight is zero".into()));
    }
    Ok(chart.log_z)
}

/// Outside pass. The start symbol's outside score over the whole sentence is
/// the constant 1, stored as a zero-slot unit mixture.
pub fn outside(grammar: &Grammar, chart: &mut ParseChart, prune: &PruneRule) -> Result<()> {
    if chart.inside_pre.is_empty() {
        return Err(Error::State("outside pass needs an inside pass".into()));
    }
    sentence_weight(chart)?;
    let n = chart.n;
    let d = grammar.d();
    let ix = grammar.index();
    let mut acc = Accumulator::new(grammar);
    for width in (1..=n).rev() {
        for i in 1..=n + 1 - width {
            let j = i + width - 1;
            if width == n {
                let c = chart.cell(1, n, chart.start);
                chart.outside_post[c] = Some(Arc::new(GaussianMixture::unit()));
            } else {
                // (i, j) as a left child of (i, kp)
                for kp in j + 1..=n {
                    for &c in chart.present_post(j + 1, kp) {
                        let ic = chart.inside_post(j + 1, kp, c).unwrap();
                        for &r in &ix.binary_by_right[c] {
                            let RuleKind::Binary { parent, left, .. } = grammar.kind(r) else {
                                unreachable!()
                            };
                            if chart.inside_post(i, j, left).is_none() {
                                continue;
                            }
                            let Some(op) = chart.outside_pre(i, kp, parent) else {
                                continue;
                            };
                            let w = grammar.weight(r);
                            for kk in 0..w.len() {
                                let (m, v) = (w.mean(kk), w.variance(kk));
                                let lw = w.log_weight(kk)
                                    + op.log_overlap(part(m, 0, d), part(v, 0, d))
                                    + ic.log_overlap(part(m, 2, d), part(v, 2, d));
                                acc.add(r, kk, 1, lw);
                            }
                        }
                    }
                }
                // (i, j) as a right child of (kp, j)
                for kp in 1..i {
                    for &b in chart.present_post(kp, i - 1) {
                        let ib = chart.inside_post(kp, i - 1, b).unwrap();
                        for &r in &ix.binary_by_left[b] {
                            let RuleKind::Binary { parent, right, .. } = grammar.kind(r) else {
                                unreachable!()
                            };
                            if chart.inside_post(i, j, right).is_none() {
                                continue;
                            }
                            let Some(op) = chart.outside_pre(kp, j, parent) else {
                                continue;
                            };
                            let w = grammar.weight(r);
                            for kk in 0..w.len() {
                                let (m, v) = (w.mean(kk), w.variance(kk));
                                let lw = w.log_weight(kk)
                                    + op.log_overlap(part(m, 0, d), part(v, 0, d))
                                    + ib.log_overlap(part(m, 1, d), part(v, 1, d));
                                acc.add(r, kk, 2, lw);
                            }
                        }
                    }
                }
                for (a, f) in acc.drain(grammar) {
                    if chart.inside_post(i, j, a).is_none() {
                        continue;
                    }
                    let f = f.prune(prune);
                    if !f.is_empty() {
                        let c = chart.cell(i, j, a);
                        chart.outside_post[c] = Some(Arc::new(f));
                    }
                }
            }
            unary_outside(grammar, chart, i, j, prune);
        }
    }
    chart.outside_done = true;
    Ok(())
}

fn unary_outside(grammar: &Grammar, chart: &mut ParseChart, i: usize, j: usize, prune: &PruneRule) {
    let d = grammar.d();
    let ix = grammar.index();
    let present: Vec<NtId> = chart.present_pre(i, j).to_vec();
    for a in present {
        let base = chart.outside_post(i, j, a).cloned();
        let mut extra: Option<GaussianMixture> = None;
        for &r in &ix.unary_by_child[a] {
            let parent = grammar.kind(r).parent();
            let Some(op) = chart.outside_post(i, j, parent) else {
                continue;
            };
            let w = grammar.weight(r);
            let f = extra.get_or_insert_with(|| match &base {
                Some(p) => {
                    debug_assert!(!p.is_scalar(), "constant outside score under a unary parent");
                    (**p).clone()
                }
                None => GaussianMixture::zero(vec![Slot::new(SUBTYPE, d)]),
            });
            for kk in 0..w.len() {
                let (m, v) = (w.mean(kk), w.variance(kk));
                let lw = w.log_weight(kk) + op.log_overlap(part(m, 0, d), part(v, 0, d));
                if lw > f64::NEG_INFINITY {
                    f.push(lw, part(m, 1, d), part(v, 1, d));
                }
            }
        }
        let pre = match extra {
            Some(f) => {
                let f = f.prune(prune);
                (!f.is_empty()).then(|| Arc::new(f))
            }
            None => base,
        };
        let c = chart.cell(i, j, a);
        chart.outside_pre[c] = pre;
    }
}

/// Inside and outside passes together.
pub fn parse_chart(grammar: &Grammar, words: &[TermId], mask: &SpanMask, prune: &PruneRule) -> Result<ParseChart> {
    let mut chart = inside(grammar, words, mask, prune)?;
    outside(grammar, &mut chart, prune)?;
    Ok(chart)
}

/// A rule instantiated at span boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Anchor {
    Binary { rule: RuleId, i: usize, k: usize, j: usize },
    Unary { rule: RuleId, i: usize, j: usize },
    Lexical { rule: RuleId, i: usize },
}

impl Anchor {
    pub fn rule(&self) -> RuleId {
        match *self {
            Anchor::Binary { rule, .. } | Anchor::Unary { rule, .. } | Anchor::Lexical { rule, .. } => rule,
        }
    }
}

/// Calls `f` for every anchor with nonzero support in the chart, passing
/// the scores that multiply the rule weight, in slot order: the parent's
/// outside score, then the children's inside scores.
pub fn for_each_anchor<F>(grammar: &Grammar, words: &[TermId], chart: &ParseChart, mut f: F) -> Result<()>
where
    F: FnMut(Anchor, &[&Arc<GaussianMixture>]),
{
    if !chart.outside_done {
        return Err(Error::State("anchors need an outside pass".into()));
    }
    let n = chart.n;
    let ix = grammar.index();
    for i in 1..=n {
        for &r in &ix.lexical_by_terminal[words[i - 1]] {
            if let Some(op) = chart.outside_pre(i, i, grammar.kind(r).parent()) {
                f(Anchor::Lexical { rule: r, i }, &[op]);
            }
        }
    }
    for width in 1..=n {
        for i in 1..=n + 1 - width {
            let j = i + width - 1;
            for k in i..j {
                for &b in chart.present_post(i, k) {
                    let ib = chart.inside_post(i, k, b).unwrap();
                    for &r in &ix.binary_by_left[b] {
                        let RuleKind::Binary { parent, right, .. } = grammar.kind(r) else {
                            unreachable!()
                        };
                        let (Some(op), Some(ic)) = (chart.outside_pre(i, j, parent), chart.inside_post(k + 1, j, right))
                        else {
                            continue;
                        };
                        f(Anchor::Binary { rule: r, i, k, j }, &[op, ib, ic]);
                    }
                }
            }
            for &b in chart.present_pre(i, j) {
                let ib = chart.inside_pre(i, j, b).unwrap();
                for &r in &ix.unary_by_child[b] {
                    if let Some(op) = chart.outside_post(i, j, grammar.kind(r).parent()) {
                        f(Anchor::Unary { rule: r, i, j }, &[op, ib]);
                    }
                }
            }
        }
    }
    Ok(())
}

/// `log ∫ W · Π factors` with each factor applied to its own slot.
pub fn anchor_log_score(weight: &GaussianMixture, factors: &[&Arc<GaussianMixture>], d: usize) -> f64 {
    log_sum_exp((0..weight.len()).map(|kk| {
        let (m, v) = (weight.mean(kk), weight.variance(kk));
        weight.log_weight(kk)
            + factors
                .iter()
                .enumerate()
                .map(|(s, f)| f.log_overlap(part(m, s, d), part(v, s, d)))
                .sum::<f64>()
    }))
}

/// Anchored rule posteriors, stored as log values.
#[derive(Clone, Debug, Default)]
pub struct AnchoredPosterior {
    pub n: usize,
    pub log_z: f64,
    entries: Vec<(Anchor, f64)>,
    lookup: HashMap<Anchor, usize>,
}

impl AnchoredPosterior {
    pub fn from_entries(n: usize, log_z: f64, entries: Vec<(Anchor, f64)>) -> AnchoredPosterior {
        let lookup = entries.iter().enumerate().map(|(p, (a, _))| (*a, p)).collect();
        AnchoredPosterior {
            n,
            log_z,
            entries,
            lookup,
        }
    }

    /// Posterior of an anchor; zero when the anchor has no support.
    pub fn q(&self, anchor: &Anchor) -> f64 {
        self.log_q(anchor).exp()
    }

    pub fn log_q(&self, anchor: &Anchor) -> f64 {
        self.lookup
            .get(anchor)
            .map_or(f64::NEG_INFINITY, |&p| self.entries[p].1)
    }

    pub fn entries(&self) -> &[(Anchor, f64)] {
        &self.entries
    }
}

pub fn rule_posteriors(grammar: &Grammar, words: &[TermId], chart: &ParseChart) -> Result<AnchoredPosterior> {
    let log_z = sentence_weight(chart)?;
    let d = grammar.d();
    let mut entries = Vec::new();
    for_each_anchor(grammar, words, chart, |anchor, factors| {
        let s = anchor_log_score(grammar.weight(anchor.rule()), factors, d);
        if s > f64::NEG_INFINITY {
            entries.push((anchor, s - log_z));
        }
    })?;
    Ok(AnchoredPosterior::from_entries(words.len(), log_z, entries))
}

/// Anchors used by a tree, pre-order.
pub fn tree_anchors(pcfg: &Pcfg, tree: &Tree<NtId, TermId>) -> Result<Vec<Anchor>> {
    let mut out = Vec::new();
    let mut err = None;
    tree.visit(&mut |node| {
        if err.is_some() {
            return;
        }
        match pcfg.node_rule(node) {
            Ok(rule) => out.push(match node.children.as_slice() {
                [] => Anchor::Lexical { rule, i: node.start },
                [_] => Anchor::Unary {
                    rule,
                    i: node.start,
                    j: node.end,
                },
                [l, _] => Anchor::Binary {
                    rule,
                    i: node.start,
                    k: l.end,
                    j: node.end,
                },
                _ => unreachable!(),
            }),
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

#[derive(Clone, Copy, Debug)]
enum Back {
    None,
    Lexical,
    Binary(RuleId, usize),
    Keep,
    Unary(RuleId),
}

/// Per-span best scores at both unary levels with back pointers.
struct BestChart {
    n: usize,
    nt: usize,
    pre: Vec<(f64, Back)>,
    post: Vec<(f64, Back)>,
}

impl BestChart {
    fn new(n: usize, nt: usize) -> BestChart {
        BestChart {
            n,
            nt,
            pre: vec![(f64::NEG_INFINITY, Back::None); n * n * nt],
            post: vec![(f64::NEG_INFINITY, Back::None); n * n * nt],
        }
    }

    fn ix(&self, i: usize, j: usize, a: NtId) -> usize {
        ((i - 1) * self.n + (j - 1)) * self.nt + a
    }

    fn offer_pre(&mut self, i: usize, j: usize, a: NtId, score: f64, back: Back) {
        let ix = self.ix(i, j, a);
        if score > self.pre[ix].0 {
            self.pre[ix] = (score, back);
        }
    }

    fn offer_post(&mut self, i: usize, j: usize, a: NtId, score: f64, back: Back) {
        let ix = self.ix(i, j, a);
        if score > self.post[ix].0 {
            self.post[ix] = (score, back);
        }
    }

    fn post_score(&self, i: usize, j: usize, a: NtId) -> f64 {
        self.post[self.ix(i, j, a)].0
    }

    fn pre_score(&self, i: usize, j: usize, a: NtId) -> f64 {
        self.pre[self.ix(i, j, a)].0
    }

    /// Copies pre scores to the post level ("no unary") before unary offers.
    fn seed_post(&mut self, i: usize, j: usize) {
        for a in 0..self.nt {
            let ix = self.ix(i, j, a);
            if self.pre[ix].0 > f64::NEG_INFINITY {
                self.post[ix] = (self.pre[ix].0, Back::Keep);
            }
        }
    }

    fn build(&self, pcfg: &Pcfg, words: &[TermId], i: usize, j: usize, a: NtId, post: bool) -> Tree<NtId, TermId> {
        let back = if post {
            self.post[self.ix(i, j, a)].1
        } else {
            self.pre[self.ix(i, j, a)].1
        };
        match back {
            Back::Keep => self.build(pcfg, words, i, j, a, false),
            Back::Unary(r) => {
                let RuleKind::Unary { child, .. } = pcfg.kind(r) else {
                    unreachable!()
                };
                Tree::node(a, vec![self.build(pcfg, words, i, j, child, false)])
            }
            Back::Lexical => Tree::preterminal(a, i, words[i - 1]),
            Back::Binary(r, k) => {
                let RuleKind::Binary { left, right, .. } = pcfg.kind(r) else {
                    unreachable!()
                };
                Tree::node(
                    a,
                    vec![
                        self.build(pcfg, words, i, k, left, true),
                        self.build(pcfg, words, k + 1, j, right, true),
                    ],
                )
            }
            Back::None => unreachable!("back pointer into an empty entry"),
        }
    }
}

/// Tree maximizing the sum of log anchored posteriors, with its score.
/// Ties go to the smallest `(rule id, split)`; keeping the pre-unary entry
/// wins ties against adding a unary.
pub fn max_rule_parse_scored(
    grammar: &Grammar,
    posteriors: &AnchoredPosterior,
    words: &[TermId],
) -> Result<(Tree<NtId, TermId>, f64)> {
    let n = words.len();
    if posteriors.n != n {
        return Err(Error::Input("posteriors and sentence lengths differ".into()));
    }
    let pcfg = grammar.pcfg();
    let nt = pcfg.symbols().n_nonterminals();
    let mut by_span: HashMap<(usize, usize), Vec<(Anchor, f64)>> = HashMap::new();
    for &(a, lq) in posteriors.entries() {
        let span = match a {
            Anchor::Binary { i, j, .. } | Anchor::Unary { i, j, .. } => (i, j),
            Anchor::Lexical { i, .. } => (i, i),
        };
        by_span.entry(span).or_default().push((a, lq));
    }
    for list in by_span.values_mut() {
        list.sort_by_key(|(a, _)| match *a {
            Anchor::Binary { rule, k, .. } => (0, rule, k),
            Anchor::Lexical { rule, .. } => (0, rule, 0),
            Anchor::Unary { rule, .. } => (1, rule, 0),
        });
    }
    let mut best = BestChart::new(n, nt);
    for width in 1..=n {
        for i in 1..=n + 1 - width {
            let j = i + width - 1;
            let Some(list) = by_span.get(&(i, j)) else {
                continue;
            };
            for &(anchor, lq) in list {
                match anchor {
                    Anchor::Lexical { rule, .. } => {
                        best.offer_pre(i, i, pcfg.kind(rule).parent(), lq, Back::Lexical);
                    }
                    Anchor::Binary { rule, k, .. } => {
                        let RuleKind::Binary { parent, left, right } = pcfg.kind(rule) else {
                            unreachable!()
                        };
                        let s = lq + best.post_score(i, k, left) + best.post_score(k + 1, j, right);
                        best.offer_pre(i, j, parent, s, Back::Binary(rule, k));
                    }
                    Anchor::Unary { .. } => {}
                }
            }
            best.seed_post(i, j);
            for &(anchor, lq) in list {
                if let Anchor::Unary { rule, .. } = anchor {
                    let RuleKind::Unary { parent, child } = pcfg.kind(rule) else {
                        unreachable!()
                    };
                    let s = lq + best.pre_score(i, j, child);
                    best.offer_post(i, j, parent, s, Back::Unary(rule));
                }
            }
        }
    }
    let start = pcfg.symbols().start();
    let score = best.post_score(1, n, start);
    if score == f64::NEG_INFINITY {
        return Err(Error::NoParse("no tree with positive anchored posteriors".into()));
    }
    Ok((best.build(pcfg, words, 1, n, start, true), score))
}

pub fn max_rule_parse(grammar: &Grammar, posteriors: &AnchoredPosterior, words: &[TermId]) -> Result<Tree<NtId, TermId>> {
    max_rule_parse_scored(grammar, posteriors, words).map(|(t, _)| t)
}

/// Scalar inside/outside values of the baseline PCFG, log domain.
struct PcfgChart {
    n: usize,
    nt: usize,
    pre_in: Vec<f64>,
    unary_in: Vec<f64>,
    post_in: Vec<f64>,
    pre_out: Vec<f64>,
    post_out: Vec<f64>,
    log_z: f64,
}

impl PcfgChart {
    fn ix(&self, i: usize, j: usize, a: NtId) -> usize {
        ((i - 1) * self.n + (j - 1)) * self.nt + a
    }
}

fn pcfg_inside_outside(pcfg: &Pcfg, words: &[TermId]) -> PcfgChart {
    let n = words.len();
    let nt = pcfg.symbols().n_nonterminals();
    let ix = pcfg.index();
    let size = n * n * nt;
    let mut c = PcfgChart {
        n,
        nt,
        pre_in: vec![f64::NEG_INFINITY; size],
        unary_in: vec![f64::NEG_INFINITY; size],
        post_in: vec![f64::NEG_INFINITY; size],
        pre_out: vec![f64::NEG_INFINITY; size],
        post_out: vec![f64::NEG_INFINITY; size],
        log_z: f64::NEG_INFINITY,
    };
    let binaries: Vec<(RuleId, NtId, NtId, NtId)> = pcfg
        .kinds()
        .iter()
        .enumerate()
        .filter_map(|(r, k)| match *k {
            RuleKind::Binary { parent, left, right } => Some((r, parent, left, right)),
            _ => None,
        })
        .collect();
    let unaries: Vec<(RuleId, NtId, NtId)> = pcfg
        .kinds()
        .iter()
        .enumerate()
        .filter_map(|(r, k)| match *k {
            RuleKind::Unary { parent, child } => Some((r, parent, child)),
            _ => None,
        })
        .collect();
    for width in 1..=n {
        for i in 1..=n + 1 - width {
            let j = i + width - 1;
            if width == 1 {
                for &r in ix.lexical_by_terminal.get(words[i - 1]).map_or(&[][..], |v| v.as_slice()) {
                    let a = pcfg.kind(r).parent();
                    let p = c.ix(i, i, a);
                    c.pre_in[p] = log_add(c.pre_in[p], pcfg.prob(r).ln());
                }
            } else {
                for &(r, a, b, cc) in &binaries {
                    let lp = pcfg.prob(r).ln();
                    let mut acc = f64::NEG_INFINITY;
                    for k in i..j {
                        let s = c.post_in[c.ix(i, k, b)] + c.post_in[c.ix(k + 1, j, cc)];
                        acc = log_add(acc, s);
                    }
                    let p = c.ix(i, j, a);
                    c.pre_in[p] = log_add(c.pre_in[p], lp + acc);
                }
            }
            for &(r, a, b) in &unaries {
                let p = c.ix(i, j, a);
                c.unary_in[p] = log_add(c.unary_in[p], pcfg.prob(r).ln() + c.pre_in[c.ix(i, j, b)]);
            }
            for a in 0..nt {
                let p = c.ix(i, j, a);
                c.post_in[p] = log_add(c.pre_in[p], c.unary_in[p]);
            }
        }
    }
    let start = pcfg.symbols().start();
    c.log_z = c.post_in[c.ix(1, n, start)];
    if c.log_z == f64::NEG_INFINITY {
        return c;
    }
    let root = c.ix(1, n, start);
    c.post_out[root] = 0.0;
    for width in (1..=n).rev() {
        for i in 1..=n + 1 - width {
            let j = i + width - 1;
            if width < n {
                for &(r, a, b, cc) in &binaries {
                    let lp = pcfg.prob(r).ln();
                    // left child b over (i, j)
                    let mut acc = f64::NEG_INFINITY;
                    for kp in j + 1..=n {
                        acc = log_add(acc, c.pre_out[c.ix(i, kp, a)] + c.post_in[c.ix(j + 1, kp, cc)]);
                    }
                    let p = c.ix(i, j, b);
                    c.post_out[p] = log_add(c.post_out[p], lp + acc);
                    // right child cc over (i, j)
                    let mut acc = f64::NEG_INFINITY;
                    for kp in 1..i {
                        acc = log_add(acc, c.pre_out[c.ix(kp, j, a)] + c.post_in[c.ix(kp, i - 1, b)]);
                    }
                    let p = c.ix(i, j, cc);
                    c.post_out[p] = log_add(c.post_out[p], lp + acc);
                }
            }
            for a in 0..nt {
                let p = c.ix(i, j, a);
                c.pre_out[p] = c.post_out[p];
            }
            for &(r, a, b) in &unaries {
                let p = c.ix(i, j, b);
                c.pre_out[p] = log_add(c.pre_out[p], pcfg.prob(r).ln() + c.post_out[c.ix(i, j, a)]);
            }
        }
    }
    c
}

/// Baseline-PCFG posterior that `a` labels some node over `(i, j)`, for
/// every span and nonterminal; `None` when the PCFG cannot parse.
pub fn pcfg_span_posteriors(pcfg: &Pcfg, words: &[TermId]) -> Option<Vec<f64>> {
    let c = pcfg_inside_outside(pcfg, words);
    if c.log_z == f64::NEG_INFINITY {
        return None;
    }
    Some(
        (0..c.pre_in.len())
            .map(|p| (c.pre_in[p] + c.pre_out[p] - c.log_z).exp() + (c.unary_in[p] + c.post_out[p] - c.log_z).exp())
            .collect(),
    )
}

/// Max-rule parse of a mapped sentence. With `p_min > 0` the chart is
/// first restricted by baseline posteriors; if that leaves no parse the
/// sentence is parsed again without the restriction.
pub fn parse(grammar: &Grammar, words: &[TermId], p_min: f64, prune: &PruneRule) -> Result<Tree<NtId, TermId>> {
    let mask = pcfg_mask(grammar.pcfg(), words, p_min);
    match parse_masked(grammar, words, &mask, prune) {
        Err(Error::NoParse(_)) if p_min > 0.0 => {
            parse_masked(grammar, words, &SpanMask::allow_all(words.len(), mask.n_nonterminals()), prune)
        }
        other => other,
    }
}

/// Max-rule parse restricted to `mask`.
pub fn parse_masked(grammar: &Grammar, words: &[TermId], mask: &SpanMask, prune: &PruneRule) -> Result<Tree<NtId, TermId>> {
    let chart = parse_chart(grammar, words, mask, prune)?;
    let q = rule_posteriors(grammar, words, &chart)?;
    max_rule_parse(grammar, &q, words)
}

/// Constituent mask from baseline posteriors. Fails open (allows
/// everything) when the PCFG cannot parse the sentence.
pub fn pcfg_mask(pcfg: &Pcfg, words: &[TermId], p_min: f64) -> SpanMask {
    let n = words.len();
    let nt = pcfg.symbols().n_nonterminals();
    if p_min <= 0.0 {
        return SpanMask::allow_all(n, nt);
    }
    let Some(post) = pcfg_span_posteriors(pcfg, words) else {
        return SpanMask::allow_all(n, nt);
    };
    let mut m = SpanMask::deny_all(n, nt);
    for i in 1..=n {
        for j in i..=n {
            for a in 0..nt {
                if post[((i - 1) * n + (j - 1)) * nt + a] >= p_min {
                    m.allow(i, j, a);
                }
            }
        }
    }
    m.allow(1, n, pcfg.symbols().start());
    m
}

/// Mask allowing exactly the labeled spans of the supplied trees. Trees are
/// brought into grammar shape first; labels the grammar lacks are ignored.
pub fn kbest_mask(pcfg: &Pcfg, trees: &[Tree], n: usize) -> Result<SpanMask> {
    let nt = pcfg.symbols().n_nonterminals();
    let mut m = SpanMask::deny_all(n, nt);
    for t in trees {
        let t = prepare_tree(t);
        if t.width() != n {
            return Err(Error::Input(format!("k-best tree covers {} words, sentence has {n}", t.width())));
        }
        t.visit(&mut |node| {
            if let Some(a) = pcfg.symbols().nt_id(&node.label) {
                m.allow(node.start, node.end, a);
            }
        });
    }
    Ok(m)
}

/// Most probable baseline-PCFG tree, or `None` when there is no parse.
pub fn pcfg_viterbi(pcfg: &Pcfg, words: &[TermId]) -> Option<Tree<NtId, TermId>> {
    let n = words.len();
    let nt = pcfg.symbols().n_nonterminals();
    let ix = pcfg.index();
    let mut best = BestChart::new(n, nt);
    for width in 1..=n {
        for i in 1..=n + 1 - width {
            let j = i + width - 1;
            if width == 1 {
                for &r in ix.lexical_by_terminal.get(words[i - 1]).map_or(&[][..], |v| v.as_slice()) {
                    best.offer_pre(i, i, pcfg.kind(r).parent(), pcfg.prob(r).ln(), Back::Lexical);
                }
            } else {
                for (r, kind) in pcfg.kinds().iter().enumerate() {
                    let RuleKind::Binary { parent, left, right } = *kind else {
                        continue;
                    };
                    for k in i..j {
                        let s = pcfg.prob(r).ln() + best.post_score(i, k, left) + best.post_score(k + 1, j, right);
                        best.offer_pre(i, j, parent, s, Back::Binary(r, k));
                    }
                }
            }
            best.seed_post(i, j);
            for (r, kind) in pcfg.kinds().iter().enumerate() {
                if let RuleKind::Unary { parent, child } = *kind {
                    let s = pcfg.prob(r).ln() + best.pre_score(i, j, child);
                    best.offer_post(i, j, parent, s, Back::Unary(r));
                }
            }
        }
    }
    let start = pcfg.symbols().start();
    if best.post_score(1, n, start) == f64::NEG_INFINITY {
        return None;
    }
    Some(best.build(pcfg, words, 1, n, start, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::read_penn;
    use crate::grammar::{estimate_pcfg, init_gm_lveg};

    fn grammar_of(text: &str, k: usize, d: usize, seed: u64) -> Grammar {
        let trees = read_penn(text).unwrap();
        init_gm_lveg(&estimate_pcfg(&trees, None).unwrap(), k, d, 8.0, seed, false).unwrap()
    }

    fn words(g: &Grammar, s: &[&str]) -> Vec<TermId> {
        g.symbols().map_sentence(s).unwrap()
    }

    #[test]
    fn one_word_base_case() {
        let g = grammar_of("(S x)", 2, 2, 1);
        let w = words(&g, &["x"]);
        let chart = parse_chart(&g, &w, &SpanMask::allow_all(1, 1), &PruneRule::Off).unwrap();
        let s = chart.inside_post(1, 1, 0).unwrap();
        let weight = g.weight(0);
        for k in 0..2 {
            assert_eq!(s.mean(k), weight.mean(k));
            assert_eq!(s.log_weight(k), weight.log_weight(k));
        }
        let z = sentence_weight(&chart).unwrap();
        assert!((z - weight.log_total_mass()).abs() < 1e-12);
        // outside times inside integrates to the sentence weight
        let o = chart.outside_post(1, 1, 0).unwrap();
        assert!(o.is_scalar());
        assert!((o.log_total_mass() + s.log_total_mass() - z).abs() < 1e-12);
    }

    #[test]
    fn two_word_outside_of_left_child() {
        let g = grammar_of("(S (A a) (B b))", 2, 1, 3);
        let w = words(&g, &["a", "b"]);
        let chart = parse_chart(&g, &w, &SpanMask::allow_all(2, 3), &PruneRule::Off).unwrap();
        let s = g.symbols();
        let (sa, sb, ss) = (s.nt_id("A").unwrap(), s.nt_id("B").unwrap(), s.nt_id("S").unwrap());
        let rule = g
            .pcfg()
            .rule_id(&RuleKind::Binary {
                parent: ss,
                left: sa,
                right: sb,
            })
            .unwrap();
        let ib = chart.inside_post(2, 2, sb).unwrap();
        let expected = g
            .weight(rule)
            .product(&ib.rename_slot(SUBTYPE, "right").unwrap())
            .unwrap()
            .marginalize("right")
            .unwrap()
            .marginalize("parent")
            .unwrap();
        let got = chart.outside_post(1, 1, sa).unwrap();
        for x in [-1.0, 0.0, 0.3, 2.0] {
            let a = got.evaluate(&[x]);
            let b = expected.evaluate(&[x]);
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{a} vs {b}");
        }
    }

    #[test]
    fn masked_out_entries_stay_empty() {
        let g = grammar_of("(S (A a) (B b)) (S (B a) (A b))", 1, 1, 3);
        let w = words(&g, &["a", "b"]);
        let b = g.symbols().nt_id("B").unwrap();
        let mut mask = SpanMask::deny_all(2, 3);
        for i in 1..=2 {
            for j in i..=2 {
                for a in 0..3 {
                    if !(i == 1 && j == 1 && a == b) {
                        mask.allow(i, j, a);
                    }
                }
            }
        }
        let chart = inside(&g, &w, &mask, &PruneRule::Off).unwrap();
        assert!(chart.inside_pre(1, 1, b).is_none());
        assert!(chart.inside_post(1, 1, b).is_none());
        // only S -> A B survives
        let full = inside(&g, &w, &SpanMask::allow_all(2, 3), &PruneRule::Off).unwrap();
        assert!(sentence_weight(&chart).unwrap() < sentence_weight(&full).unwrap());
    }

    #[test]
    fn unknown_coverage_error_names_word() {
        let g = grammar_of("(S (A a) (B b))", 1, 1, 3);
        let err = g.symbols().map_sentence(&["a", "zzz"]).unwrap_err();
        assert!(err.to_string().contains("zzz"));
    }

    #[test]
    fn outside_requires_inside() {
        let g = grammar_of("(S (A a) (B b))", 1, 1, 3);
        let w = words(&g, &["a", "a"]);
        // no parse: outside refuses
        let mut chart = inside(&g, &w, &SpanMask::allow_all(2, 3), &PruneRule::Off).unwrap();
        assert!(matches!(outside(&g, &mut chart, &PruneRule::Off), Err(Error::NoParse(_))));
        assert!(matches!(rule_posteriors(&g, &w, &chart), Err(Error::NoParse(_))));
    }

    #[test]
    fn single_derivation_posteriors_are_one() {
        let g = grammar_of("(S (A a) (X (B b) (C c)))", 2, 2, 5);
        let w = words(&g, &["a", "b", "c"]);
        let chart = parse_chart(&g, &w, &SpanMask::allow_all(3, 5), &PruneRule::Off).unwrap();
        let post = rule_posteriors(&g, &w, &chart).unwrap();
        assert_eq!(post.entries().len(), 5);
        for (_, lq) in post.entries() {
            assert!(lq.abs() < 1e-9, "{lq}");
        }
        let tree = max_rule_parse(&g, &post, &w).unwrap();
        assert_eq!(g.pcfg().tree_names(&tree).to_string(), "(S (A a) (X (B b) (C c)))");
    }

    #[test]
    fn unary_layer_scores_match_hand_computation() {
        // S -> X, X -> a with one component each at d = 1
        let g = grammar_of("(S (X a))", 1, 1, 2);
        let w = words(&g, &["a"]);
        let chart = parse_chart(&g, &w, &SpanMask::allow_all(1, 2), &PruneRule::Off).unwrap();
        let s = g.symbols();
        let (ss, sx) = (s.nt_id("S").unwrap(), s.nt_id("X").unwrap());
        let unary = g.pcfg().rule_id(&RuleKind::Unary { parent: ss, child: sx }).unwrap();
        let lex = g.index().lexical_by_terminal[w[0]][0];
        let expected = g
            .weight(unary)
            .product(&g.weight(lex).rename_slot("parent", "child").unwrap())
            .unwrap()
            .marginalize_all()
            .log_total_mass();
        assert!((sentence_weight(&chart).unwrap() - expected).abs() < 1e-12);
        assert!(chart.inside_pre(1, 1, ss).is_none());
        let post = rule_posteriors(&g, &w, &chart).unwrap();
        assert_eq!(post.entries().len(), 2);
        for (_, lq) in post.entries() {
            assert!(lq.abs() < 1e-12);
        }
    }

    #[test]
    fn pcfg_mask_single_derivation_is_gold() {
        let trees = read_penn("(S (A a) (X (B b) (C c)))").unwrap();
        let p = estimate_pcfg(&trees, None).unwrap();
        let w = p.symbols().map_sentence(&["a", "b", "c"]).unwrap();
        let m = pcfg_mask(&p, &w, 0.5);
        assert_eq!(m.count_allowed(), 5);
        let t = p.tree_ids(&trees[0]).unwrap();
        t.visit(&mut |node| assert!(m.allows(node.start, node.end, node.label)));
        assert_eq!(pcfg_mask(&p, &w, 0.0), SpanMask::allow_all(3, 5));
        let bad = p.symbols().map_sentence(&["c", "b", "a"]).unwrap();
        assert_eq!(pcfg_mask(&p, &bad, 0.5), SpanMask::allow_all(3, 5));
    }

    #[test]
    fn pcfg_viterbi_prefers_frequent_rule() {
        let trees = read_penn("(S (A a) (A a)) (S (A a) (A a)) (S (B a) (B a))").unwrap();
        let p = estimate_pcfg(&trees, None).unwrap();
        let w = p.symbols().map_sentence(&["a", "a"]).unwrap();
        let t = pcfg_viterbi(&p, &w).unwrap();
        assert_eq!(p.tree_names(&t).to_string(), "(S (A a) (A a))");
    }

    #[test]
    fn kbest_mask_is_union_of_constituents() {
        let trees = read_penn("(S (A a) (X (B b) (C c))) (S (Y (A a) (B b)) (C c))").unwrap();
        let p = estimate_pcfg(&trees, None).unwrap();
        let one = kbest_mask(&p, &trees[..1], 3).unwrap();
        assert_eq!(one.count_allowed(), 5);
        let two = kbest_mask(&p, &trees, 3).unwrap();
        assert_eq!(two.count_allowed(), 6);
        assert!(matches!(kbest_mask(&p, &trees, 4), Err(Error::Input(_))));
    }

    #[test]
    fn gold_mask_levels() {
        let trees = read_penn("(S (X a) (B b))").unwrap();
        let p = estimate_pcfg(&trees, None).unwrap();
        let t = p.tree_ids(&trees[0]).unwrap();
        let m = gold_mask(&t, 2, p.symbols().n_nonterminals());
        let s = p.symbols();
        let x = s.nt_id("X").unwrap();
        assert!(m.allows_pre(1, 1, x) && m.allows_post(1, 1, x));
        assert!(m.allows_pre(1, 2, s.start()) && m.allows_post(1, 2, s.start()));
    }

    #[test]
    fn pruning_keeps_a_subset() {
        let mut g = grammar_of("(S (S a) (S a)) (S a)", 3, 1, 9);
        // spread means so pruning has something to choose
        for (r, w) in g.weights_mut().iter_mut().enumerate() {
            for k in 0..3 {
                w.mean_mut(k)[0] = k as f64 + r as f64 * 0.1;
            }
        }
        let w = words(&g, &["a", "a", "a", "a"]);
        let full = inside(&g, &w, &SpanMask::allow_all(4, 1), &PruneRule::Off).unwrap();
        let pruned = inside(&g, &w, &SpanMask::allow_all(4, 1), &PruneRule::Hard { k_hard: 2 }).unwrap();
        assert!(pruned.inside_post(1, 4, 0).unwrap().len() <= 2);
        assert!(sentence_weight(&pruned).unwrap() < sentence_weight(&full).unwrap());
    }
}
