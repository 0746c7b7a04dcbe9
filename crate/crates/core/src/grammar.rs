//! Symbols, rules and their Gaussian-mixture weight functions.
//!
//! A [`Pcfg`] is the rule inventory with relative-frequency probabilities
//! read off a binarized treebank. A [`Grammar`] adds one mixture weight per
//! rule over the subtype vectors of the rule's symbols.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Tree, UnknownMode, Vocabulary};
use crate::error::{Error, Result};
use crate::gm::{GaussianComponent, GaussianMixture, Slot};

pub type NtId = usize;
pub type TermId = usize;
pub type RuleId = usize;

pub const PARENT: &str = "parent";
pub const LEFT: &str = "left";
pub const RIGHT: &str = "right";
pub const CHILD: &str = "child";

pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleKind {
    Binary { parent: NtId, left: NtId, right: NtId },
    Unary { parent: NtId, child: NtId },
    Lexical { parent: NtId, terminal: TermId },
}

impl RuleKind {
    pub fn parent(&self) -> NtId {
        match *self {
            RuleKind::Binary { parent, .. } | RuleKind::Unary { parent, .. } | RuleKind::Lexical { parent, .. } => {
                parent
            }
        }
    }

    /// Slot layout of the weight function: parent first, then children.
    pub fn slots(&self, d: usize) -> Vec<Slot> {
        match self {
            RuleKind::Binary { .. } => vec![Slot::new(PARENT, d), Slot::new(LEFT, d), Slot::new(RIGHT, d)],
            RuleKind::Unary { .. } => vec![Slot::new(PARENT, d), Slot::new(CHILD, d)],
            RuleKind::Lexical { .. } => vec![Slot::new(PARENT, d)],
        }
    }

    pub fn slot_count(&self) -> usize {
        match self {
            RuleKind::Binary { .. } => 3,
            RuleKind::Unary { .. } => 2,
            RuleKind::Lexical { .. } => 1,
        }
    }

    /// Nonterminal occupying slot `s` (parent is slot 0).
    pub fn symbol_at(&self, s: usize) -> NtId {
        match (*self, s) {
            (_, 0) => self.parent(),
            (RuleKind::Binary { left, .. }, 1) => left,
            (RuleKind::Binary { right, .. }, 2) => right,
            (RuleKind::Unary { child, .. }, 1) => child,
            _ => panic!("slot {s} out of range for {self:?}"),
        }
    }
}

/// Nonterminal and terminal inventories plus the unknown-word mapping.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolTable {
    nonterminals: Vec<String>,
    nt_index: HashMap<String, NtId>,
    start: NtId,
    terminals: Vec<String>,
    term_index: HashMap<String, TermId>,
    vocabulary: Option<Vocabulary>,
}

impl SymbolTable {
    pub fn new(
        nonterminals: Vec<String>,
        start: &str,
        terminals: Vec<String>,
        vocabulary: Option<Vocabulary>,
    ) -> Result<SymbolTable> {
        let nt_index = index_of(&nonterminals, "nonterminal")?;
        let term_index = index_of(&terminals, "terminal")?;
        let start = *nt_index
            .get(start)
            .ok_or_else(|| Error::Input(format!("start symbol `{start}` is not a nonterminal")))?;
        Ok(SymbolTable {
            nonterminals,
            nt_index,
            start,
            terminals,
            term_index,
            vocabulary,
        })
    }

    pub fn start(&self) -> NtId {
        self.start
    }

    pub fn n_nonterminals(&self) -> usize {
        self.nonterminals.len()
    }

    pub fn n_terminals(&self) -> usize {
        self.terminals.len()
    }

    pub fn nonterminal(&self, id: NtId) -> &str {
        &self.nonterminals[id]
    }

    pub fn terminal(&self, id: TermId) -> &str {
        &self.terminals[id]
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn nt_id(&self, name: &str) -> Option<NtId> {
        self.nt_index.get(name).copied()
    }

    /// Exact terminal lookup, no unknown-word mapping.
    pub fn term_id(&self, name: &str) -> Option<TermId> {
        self.term_index.get(name).copied()
    }

    pub fn vocabulary(&self) -> Option<&Vocabulary> {
        self.vocabulary.as_ref()
    }

    /// Terminal for a surface word, through the unknown-word mapping if any.
    pub fn word_id(&self, word: &str) -> Option<TermId> {
        match &self.vocabulary {
            Some(v) => self.term_id(&v.map(word)),
            None => self.term_id(word),
        }
    }

    pub fn map_sentence<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<TermId>> {
        words
            .iter()
            .map(|w| {
                let w = w.as_ref();
                self.word_id(w)
                    .ok_or_else(|| Error::Coverage(format!("word `{w}` has no terminal and no unknown fallback")))
            })
            .collect()
    }
}

fn index_of(names: &[String], what: &str) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(names.len());
    for (i, n) in names.iter().enumerate() {
        if index.insert(n.clone(), i).is_some() {
            return Err(Error::Input(format!("duplicate {what} `{n}`")));
        }
    }
    Ok(index)
}

/// Rule lookups. Every list is in increasing rule-id order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RuleIndex {
    pub by_parent: Vec<Vec<RuleId>>,
    pub binary_by_left: Vec<Vec<RuleId>>,
    pub binary_by_right: Vec<Vec<RuleId>>,
    pub binary_by_pair: HashMap<(NtId, NtId), Vec<RuleId>>,
    pub unary_by_parent: Vec<Vec<RuleId>>,
    pub unary_by_child: Vec<Vec<RuleId>>,
    pub lexical_by_terminal: Vec<Vec<RuleId>>,
    pub by_kind: HashMap<RuleKind, RuleId>,
}

impl RuleIndex {
    fn build(kinds: &[RuleKind], n_nt: usize, n_term: usize) -> RuleIndex {
        let mut ix = RuleIndex {
            by_parent: vec![Vec::new(); n_nt],
            binary_by_left: vec![Vec::new(); n_nt],
            binary_by_right: vec![Vec::new(); n_nt],
            binary_by_pair: HashMap::new(),
            unary_by_parent: vec![Vec::new(); n_nt],
            unary_by_child: vec![Vec::new(); n_nt],
            lexical_by_terminal: vec![Vec::new(); n_term],
            by_kind: HashMap::new(),
        };
        for (r, kind) in kinds.iter().enumerate() {
            ix.by_parent[kind.parent()].push(r);
            ix.by_kind.insert(*kind, r);
            match *kind {
                RuleKind::Binary { left, right, .. } => {
                    ix.binary_by_left[left].push(r);
                    ix.binary_by_right[right].push(r);
                    ix.binary_by_pair.entry((left, right)).or_default().push(r);
                }
                RuleKind::Unary { parent, child } => {
                    ix.unary_by_parent[parent].push(r);
                    ix.unary_by_child[child].push(r);
                }
                RuleKind::Lexical { terminal, .. } => ix.lexical_by_terminal[terminal].push(r),
            }
        }
        ix
    }
}

/// Query for [`Pcfg::rules_for`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleQuery {
    Parent(NtId),
    ChildPair(NtId, NtId),
    UnaryChild(NtId),
    Terminal(TermId),
}

/// Rule inventory with baseline (treebank relative-frequency) probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Pcfg {
    symbols: SymbolTable,
    kinds: Vec<RuleKind>,
    probs: Vec<f64>,
    index: RuleIndex,
}

impl Pcfg {
    pub fn new(symbols: SymbolTable, rules: Vec<(RuleKind, f64)>) -> Result<Pcfg> {
        let n_nt = symbols.n_nonterminals();
        let n_term = symbols.n_terminals();
        for (kind, p) in &rules {
            let ok = match *kind {
                RuleKind::Binary { parent, left, right } => parent < n_nt && left < n_nt && right < n_nt,
                RuleKind::Unary { parent, child } => parent < n_nt && child < n_nt && parent != child,
                RuleKind::Lexical { parent, terminal } => parent < n_nt && terminal < n_term,
            };
            if !ok {
                return Err(Error::Input(format!("invalid rule {kind:?}")));
            }
            if !(*p > 0.0 && *p <= 1.0 + 1e-12) {
                return Err(Error::Input(format!("baseline probability {p} outside (0, 1]")));
            }
        }
        let (kinds, probs): (Vec<_>, Vec<_>) = rules.into_iter().unzip();
        let index = RuleIndex::build(&kinds, n_nt, n_term);
        if index.by_kind.len() != kinds.len() {
            return Err(Error::Input("duplicate rule".into()));
        }
        Ok(Pcfg {
            symbols,
            kinds,
            probs,
            index,
        })
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, r: RuleId) -> RuleKind {
        self.kinds[r]
    }

    pub fn kinds(&self) -> &[RuleKind] {
        &self.kinds
    }

    pub fn prob(&self, r: RuleId) -> f64 {
        self.probs[r]
    }

    pub fn index(&self) -> &RuleIndex {
        &self.index
    }

    pub fn rule_id(&self, kind: &RuleKind) -> Option<RuleId> {
        self.index.by_kind.get(kind).copied()
    }

    pub fn rules_for(&self, query: RuleQuery) -> Result<Vec<RuleId>> {
        let n_nt = self.symbols.n_nonterminals();
        let check = |id: usize, len: usize| {
            if id < len {
                Ok(())
            } else {
                Err(Error::IndexOutOfRange { index: id, len })
            }
        };
        Ok(match query {
            RuleQuery::Parent(a) => {
                check(a, n_nt)?;
                self.index.by_parent[a].clone()
            }
            RuleQuery::ChildPair(b, c) => {
                check(b, n_nt)?;
                check(c, n_nt)?;
                self.index.binary_by_pair.get(&(b, c)).cloned().unwrap_or_default()
            }
            RuleQuery::UnaryChild(b) => {
                check(b, n_nt)?;
                self.index.unary_by_child[b].clone()
            }
            RuleQuery::Terminal(w) => {
                check(w, self.symbols.n_terminals())?;
                self.index.lexical_by_terminal[w].clone()
            }
        })
    }

    /// Converts a string tree into ids, failing on unknown labels or words.
    /// Words go through the unknown-word mapping.
    pub fn tree_ids(&self, tree: &Tree) -> Result<Tree<NtId, TermId>> {
        tree.try_map(
            &mut |l: &String| {
                self.symbols
                    .nt_id(l)
                    .ok_or_else(|| Error::Coverage(format!("unknown nonterminal `{l}`")))
            },
            &mut |w: &String| {
                self.symbols
                    .word_id(w)
                    .ok_or_else(|| Error::Coverage(format!("word `{w}` has no terminal")))
            },
        )
    }

    pub fn tree_names(&self, tree: &Tree<NtId, TermId>) -> Tree {
        tree.map(
            &mut |l: &NtId| self.symbols.nonterminal(*l).to_string(),
            &mut |w: &TermId| self.symbols.terminal(*w).to_string(),
        )
    }

    /// The rule used at a tree node.
    pub fn node_rule(&self, node: &Tree<NtId, TermId>) -> Result<RuleId> {
        let kind = match (&node.word, node.children.as_slice()) {
            (Some(w), _) => RuleKind::Lexical {
                parent: node.label,
                terminal: *w,
            },
            (None, [c]) => RuleKind::Unary {
                parent: node.label,
                child: c.label,
            },
            (None, [l, r]) => RuleKind::Binary {
                parent: node.label,
                left: l.label,
                right: r.label,
            },
            (None, cs) => return Err(Error::Input(format!("node with {} children is not binarized", cs.len()))),
        };
        self.rule_id(&kind)
            .ok_or_else(|| Error::Coverage(format!("rule {} is not in the grammar", self.describe(&kind))))
    }

    pub fn describe(&self, kind: &RuleKind) -> String {
        let s = &self.symbols;
        match *kind {
            RuleKind::Binary { parent, left, right } => format!(
                "{} -> {} {}",
                s.nonterminal(parent),
                s.nonterminal(left),
                s.nonterminal(right)
            ),
            RuleKind::Unary { parent, child } => format!("{} -> {}", s.nonterminal(parent), s.nonterminal(child)),
            RuleKind::Lexical { parent, terminal } => format!("{} -> '{}'", s.nonterminal(parent), s.terminal(terminal)),
        }
    }

    /// Checks that every node of the tree uses a grammar rule and that the
    /// root is the start symbol.
    pub fn check_derivable(&self, tree: &Tree<NtId, TermId>) -> Result<()> {
        if tree.label != self.symbols.start() {
            return Err(Error::Coverage(format!(
                "tree root `{}` is not the start symbol",
                self.symbols.nonterminal(tree.label)
            )));
        }
        let mut result = Ok(());
        tree.visit(&mut |node| {
            if result.is_ok() {
                if let Err(e) = self.node_rule(node) {
                    result = Err(e);
                }
            }
        });
        result
    }
}

/// Relative-frequency PCFG of a binarized, unary-collapsed treebank.
///
/// The start symbol is the most frequent root label. Nonterminals,
/// terminals and rules are numbered in sorted order so the result does not
/// depend on tree order. Unary self-loops are dropped.
pub fn estimate_pcfg(trees: &[Tree], vocabulary: Option<Vocabulary>) -> Result<Pcfg> {
    if trees.is_empty() {
        return Err(Error::Input("empty treebank".into()));
    }
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    enum Key<'a> {
        Binary(&'a str, &'a str, &'a str),
        Unary(&'a str, &'a str),
        Lexical(&'a str, &'a str),
    }
    let mut counts: BTreeMap<Key, usize> = BTreeMap::new();
    let mut roots: BTreeMap<&str, usize> = BTreeMap::new();
    let mut nts: BTreeMap<&str, ()> = BTreeMap::new();
    let mut terms: BTreeMap<&str, ()> = BTreeMap::new();
    let mut error = None;
    for t in trees {
        *roots.entry(t.label.as_str()).or_default() += 1;
        t.visit(&mut |node| {
            nts.insert(node.label.as_str(), ());
            let key = match (&node.word, node.children.as_slice()) {
                (Some(w), _) => {
                    terms.insert(w.as_str(), ());
                    Key::Lexical(&node.label, w)
                }
                (None, [c]) if c.label == node.label => return,
                (None, [c]) => Key::Unary(&node.label, &c.label),
                (None, [l, r]) => Key::Binary(&node.label, &l.label, &r.label),
                (None, cs) => {
                    error.get_or_insert_with(|| Error::Input(format!("tree node with {} children is not binarized", cs.len())));
                    return;
                }
            };
            *counts.entry(key).or_default() += 1;
        });
    }
    if let Some(e) = error {
        return Err(e);
    }
    let start = roots
        .iter()
        .fold(None::<(&str, usize)>, |best, (l, c)| match best {
            Some((_, bc)) if bc >= *c => best,
            _ => Some((l, *c)),
        })
        .map(|(l, _)| l.to_string())
        .expect("nonempty treebank");
    let mut terminals: Vec<String> = terms.keys().map(|s| s.to_string()).collect();
    if let Some(v) = &vocabulary {
        // the fallback class must be a terminal even if unobserved
        if !terminals.contains(&v.fallback().to_string()) {
            terminals.push(v.fallback().to_string());
            terminals.sort();
        }
    }
    let nonterminals: Vec<String> = nts.keys().map(|s| s.to_string()).collect();
    let symbols = SymbolTable::new(nonterminals, &start, terminals, vocabulary)?;

    let mut parent_totals: HashMap<&str, usize> = HashMap::new();
    for (key, c) in &counts {
        let parent = match key {
            Key::Binary(p, ..) | Key::Unary(p, _) | Key::Lexical(p, _) => *p,
        };
        *parent_totals.entry(parent).or_default() += c;
    }
    let nt = |s: &str| symbols.nt_id(s).expect("interned");
    let mut rules: Vec<(RuleKind, f64)> = counts
        .iter()
        .map(|(key, c)| {
            let (kind, parent) = match *key {
                Key::Binary(p, l, r) => (
                    RuleKind::Binary {
                        parent: nt(p),
                        left: nt(l),
                        right: nt(r),
                    },
                    p,
                ),
                Key::Unary(p, ch) => (RuleKind::Unary { parent: nt(p), child: nt(ch) }, p),
                Key::Lexical(p, w) => (
                    RuleKind::Lexical {
                        parent: nt(p),
                        terminal: symbols.term_id(w).expect("interned"),
                    },
                    p,
                ),
            };
            (kind, *c as f64 / parent_totals[parent] as f64)
        })
        .collect();
    rules.sort_by_key(|r| r.0);
    Pcfg::new(symbols, rules)
}

/// A PCFG whose rules carry Gaussian-mixture weight functions.
#[derive(Clone, Debug, PartialEq)]
pub struct Grammar {
    pcfg: Pcfg,
    weights: Vec<GaussianMixture>,
    d: usize,
    k: usize,
    spherical: bool,
}

impl Grammar {
    pub fn new(pcfg: Pcfg, weights: Vec<GaussianMixture>, d: usize, k: usize, spherical: bool) -> Result<Grammar> {
        if weights.len() != pcfg.len() {
            return Err(Error::Dimension(format!(
                "{} weight functions for {} rules",
                weights.len(),
                pcfg.len()
            )));
        }
        for (r, w) in weights.iter().enumerate() {
            if w.slots() != pcfg.kind(r).slots(d).as_slice() {
                return Err(Error::Dimension(format!("rule {r} weight has the wrong slot layout")));
            }
            if w.len() != k {
                return Err(Error::Dimension(format!("rule {r} has {} components, expected {k}", w.len())));
            }
        }
        Ok(Grammar {
            pcfg,
            weights,
            d,
            k,
            spherical,
        })
    }

    pub fn pcfg(&self) -> &Pcfg {
        &self.pcfg
    }

    pub fn symbols(&self) -> &SymbolTable {
        self.pcfg.symbols()
    }

    pub fn index(&self) -> &RuleIndex {
        self.pcfg.index()
    }

    pub fn len(&self) -> usize {
        self.pcfg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pcfg.is_empty()
    }

    pub fn kind(&self, r: RuleId) -> RuleKind {
        self.pcfg.kind(r)
    }

    pub fn weight(&self, r: RuleId) -> &GaussianMixture {
        &self.weights[r]
    }

    pub fn weights(&self) -> &[GaussianMixture] {
        &self.weights
    }

    /// Mutable weights. Callers must keep each layout and component count.
    pub fn weights_mut(&mut self) -> &mut [GaussianMixture] {
        &mut self.weights
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn spherical(&self) -> bool {
        self.spherical
    }

    pub fn rules_for(&self, query: RuleQuery) -> Result<Vec<RuleId>> {
        self.pcfg.rules_for(query)
    }

    /// Multiplies every rule weight by `exp(log_c)`.
    pub fn scaled(&self, log_c: f64) -> Grammar {
        let mut g = self.clone();
        for w in &mut g.weights {
            *w = w.scale(log_c);
        }
        g
    }

    pub fn to_json(&self) -> Result<String> {
        let s = self.symbols();
        let file = ModelFile {
            version: MODEL_VERSION,
            d: self.d,
            k: self.k,
            spherical: self.spherical,
            symbols: SymbolsFile::from_table(s),
            rules: (0..self.len())
                .map(|r| {
                    let kind = self.kind(r);
                    let (kind_name, children, terminal) = match kind {
                        RuleKind::Binary { left, right, .. } => (
                            "binary",
                            Some(vec![s.nonterminal(left).to_string(), s.nonterminal(right).to_string()]),
                            None,
                        ),
                        RuleKind::Unary { child, .. } => ("unary", Some(vec![s.nonterminal(child).to_string()]), None),
                        RuleKind::Lexical { terminal, .. } => ("lexical", None, Some(s.terminal(terminal).to_string())),
                    };
                    RuleFile {
                        kind: kind_name.to_string(),
                        parent: s.nonterminal(kind.parent()).to_string(),
                        children,
                        terminal,
                        baseline_prob: self.pcfg.prob(r),
                        components: components_file(self.weight(r)),
                    }
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Grammar> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.version != MODEL_VERSION {
            return Err(Error::Version(file.version));
        }
        let symbols = file.symbols.into_table()?;
        let nt = |name: &str| {
            symbols
                .nt_id(name)
                .ok_or_else(|| Error::Input(format!("rule mentions unknown nonterminal `{name}`")))
        };
        let mut rules = Vec::with_capacity(file.rules.len());
        let mut weights = Vec::with_capacity(file.rules.len());
        for rf in &file.rules {
            let parent = nt(&rf.parent)?;
            let kind = match (rf.kind.as_str(), rf.children.as_deref(), rf.terminal.as_deref()) {
                ("binary", Some([l, r]), None) => RuleKind::Binary {
                    parent,
                    left: nt(l)?,
                    right: nt(r)?,
                },
                ("unary", Some([c]), None) => RuleKind::Unary { parent, child: nt(c)? },
                ("lexical", None, Some(w)) => RuleKind::Lexical {
                    parent,
                    terminal: symbols
                        .term_id(w)
                        .ok_or_else(|| Error::Input(format!("rule mentions unknown terminal `{w}`")))?,
                },
                _ => return Err(Error::Input(format!("malformed rule entry of kind `{}`", rf.kind))),
            };
            weights.push(mixture_from_file(kind.slots(file.d), &rf.components)?);
            rules.push((kind, rf.baseline_prob));
        }
        Grammar::new(Pcfg::new(symbols, rules)?, weights, file.d, file.k, file.spherical)
    }
}

/// Initial weights: every component gets weight `alpha·P(r)`, identity
/// covariance, and means drawn uniformly from [-0.05, 0.05].
pub fn init_gm_lveg(pcfg: &Pcfg, k: usize, d: usize, alpha: f64, seed: u64, spherical: bool) -> Result<Grammar> {
    if !(alpha > 1.0) {
        return Err(Error::Config(format!("alpha must exceed 1, got {alpha}")));
    }
    if k == 0 || d == 0 {
        return Err(Error::Config("K and d must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = pcfg
        .kinds()
        .iter()
        .enumerate()
        .map(|(r, kind)| init_mixture(&mut rng, kind.slots(d), k, (alpha * pcfg.prob(r)).ln()))
        .collect();
    Grammar::new(pcfg.clone(), weights, d, k, spherical)
}

pub(crate) fn init_mixture(rng: &mut ChaCha8Rng, slots: Vec<Slot>, k: usize, log_weight: f64) -> GaussianMixture {
    let dim: usize = slots.iter().map(|s| s.width).sum();
    let mut f = GaussianMixture::with_capacity(slots, k);
    let ones = vec![1.0; dim];
    for _ in 0..k {
        let mean: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.05..=0.05)).collect();
        f.push(log_weight, &mean, &ones);
    }
    f
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ModelFile {
    pub version: u32,
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub spherical: bool,
    pub symbols: SymbolsFile,
    pub rules: Vec<RuleFile>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct SymbolsFile {
    pub nonterminals: Vec<String>,
    pub start: String,
    pub terminals: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unknown: Option<UnknownFile>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct UnknownFile {
    pub mode: UnknownMode,
    pub threshold: usize,
    pub signatures: Vec<String>,
    pub fallback: String,
}

impl SymbolsFile {
    pub(crate) fn from_table(s: &SymbolTable) -> SymbolsFile {
        SymbolsFile {
            nonterminals: s.nonterminals().to_vec(),
            start: s.nonterminal(s.start()).to_string(),
            terminals: s.terminals().to_vec(),
            unknown: s.vocabulary().map(|v| UnknownFile {
                mode: v.mode,
                threshold: v.threshold,
                signatures: v.signatures(),
                fallback: v.fallback().to_string(),
            }),
        }
    }

    pub(crate) fn into_table(self) -> Result<SymbolTable> {
        let vocabulary = self.unknown.map(|u| {
            let sigs: std::collections::HashSet<&String> = u.signatures.iter().collect();
            let known: Vec<String> = self.terminals.iter().filter(|t| !sigs.contains(t)).cloned().collect();
            Vocabulary::from_parts(u.mode, u.threshold, known, u.signatures.clone(), u.fallback)
        });
        SymbolTable::new(self.nonterminals, &self.start, self.terminals, vocabulary)
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct RuleFile {
    pub kind: String,
    pub parent: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<String>,
    pub baseline_prob: f64,
    pub components: Vec<ComponentFile>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ComponentFile {
    pub log_weight: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

pub(crate) fn components_file(f: &GaussianMixture) -> Vec<ComponentFile> {
    (0..f.len())
        .map(|k| ComponentFile {
            log_weight: f.log_weight(k),
            mean: f.mean(k).to_vec(),
            variance: f.variance(k).to_vec(),
        })
        .collect()
}

pub(crate) fn mixture_from_file(slots: Vec<Slot>, comps: &[ComponentFile]) -> Result<GaussianMixture> {
    GaussianMixture::new(
        slots,
        comps
            .iter()
            .map(|c| GaussianComponent::new(c.log_weight, c.mean.clone(), c.variance.clone()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::read_penn;

    fn pcfg_of(text: &str) -> Pcfg {
        estimate_pcfg(&read_penn(text).unwrap(), None).unwrap()
    }

    fn prob(p: &Pcfg, parent: &str, children: &[&str]) -> f64 {
        let s = p.symbols();
        let parent = s.nt_id(parent).unwrap();
        let kind = match children {
            [l, r] => RuleKind::Binary {
                parent,
                left: s.nt_id(l).unwrap(),
                right: s.nt_id(r).unwrap(),
            },
            [c] => match s.nt_id(c) {
                Some(child) => RuleKind::Unary { parent, child },
                None => RuleKind::Lexical {
                    parent,
                    terminal: s.term_id(c).unwrap(),
                },
            },
            _ => unreachable!(),
        };
        p.prob(p.rule_id(&kind).unwrap())
    }

    #[test]
    fn identical_trees_give_probability_one() {
        let p = pcfg_of("(S (A a) (B b)) (S (A a) (B b))");
        assert_eq!(p.len(), 3);
        for r in 0..p.len() {
            assert_eq!(p.prob(r), 1.0);
        }
        assert_eq!(p.symbols().nonterminal(p.symbols().start()), "S");
    }

    #[test]
    fn relative_frequencies() {
        let p = pcfg_of("(S (A a) (B b)) (S (A a) (B b)) (S (B b) (A a)) (S (B b) (A a))");
        assert_eq!(prob(&p, "S", &["A", "B"]), 0.5);
        assert_eq!(prob(&p, "S", &["B", "A"]), 0.5);
    }

    #[test]
    fn unary_self_loops_are_dropped() {
        let p = pcfg_of("(S (S (A a) (B b)))");
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn empty_treebank_is_an_error() {
        assert!(matches!(estimate_pcfg(&[], None), Err(Error::Input(_))));
    }

    #[test]
    fn init_weights_and_determinism() {
        let p = pcfg_of("(S (A a) (B b)) (S (A a) (A a)) (S (B b) (B b)) (S (B b) (A a))");
        let g = init_gm_lveg(&p, 4, 3, 8.0, 7, false).unwrap();
        let r = p
            .rule_id(&RuleKind::Binary {
                parent: p.symbols().nt_id("S").unwrap(),
                left: p.symbols().nt_id("A").unwrap(),
                right: p.symbols().nt_id("B").unwrap(),
            })
            .unwrap();
        assert_eq!(p.prob(r), 0.25);
        for k in 0..4 {
            assert!((g.weight(r).log_weight(k).exp() - 2.0).abs() < 1e-12);
            assert!(g.weight(r).variance(k).iter().all(|v| *v == 1.0));
            assert!(g.weight(r).mean(k).iter().all(|m| m.abs() <= 0.05));
        }
        assert!((g.weight(r).total_mass() - 8.0).abs() < 1e-9);
        assert_eq!(g, init_gm_lveg(&p, 4, 3, 8.0, 7, false).unwrap());
        assert_ne!(g, init_gm_lveg(&p, 4, 3, 8.0, 8, false).unwrap());
        assert!(matches!(init_gm_lveg(&p, 4, 3, 1.0, 7, false), Err(Error::Config(_))));
    }

    #[test]
    fn lookups() {
        let p = pcfg_of("(S (A a) (B b)) (S (B b) (A a)) (S (A (B b)) (B a))");
        let s = p.symbols();
        let (a, b) = (s.nt_id("A").unwrap(), s.nt_id("B").unwrap());
        let pair = p.rules_for(RuleQuery::ChildPair(a, b)).unwrap();
        assert_eq!(pair.len(), 1);
        assert!(matches!(p.kind(pair[0]), RuleKind::Binary { left, right, .. } if left == a && right == b));
        assert!(p.rules_for(RuleQuery::Parent(99)).is_err());
        let mut all: Vec<RuleId> = (0..s.n_nonterminals())
            .flat_map(|x| p.rules_for(RuleQuery::Parent(x)).unwrap())
            .collect();
        all.sort();
        assert_eq!(all, (0..p.len()).collect::<Vec<_>>());
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let p = pcfg_of("(S (A a) (B b)) (S (A (B b)) (B a)) (S (B b) (A a))");
        let mut g = init_gm_lveg(&p, 2, 2, 8.0, 3, false).unwrap();
        // awkward values
        for w in g.weights_mut() {
            w.mean_mut(0)[0] = 0.1 + 0.2;
            w.variance_mut(1)[0] = 1.0 / 3.0;
            w.set_log_weight(0, -1e-300);
        }
        let a = g.to_json().unwrap();
        let back = Grammar::from_json(&a).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_json().unwrap(), a);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let p = pcfg_of("(S (A a) (B b))");
        let g = init_gm_lveg(&p, 1, 1, 8.0, 3, false).unwrap();
        let text = g.to_json().unwrap().replacen("\"version\": 1", "\"version\": 9", 1);
        assert!(matches!(Grammar::from_json(&text), Err(Error::Version(9))));
    }
}
