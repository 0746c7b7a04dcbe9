//! Treebank and tagging-data ingestion.
//!
//! Penn-bracket reading with the usual cleanup (wrapper removal, empty
//! elements, functional tags), right-branching binarization into unannotated
//! `@X` intermediate symbols, unary-chain collapsing, rare-word signatures and
//! CoNLL-U reading.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A constituency tree over a sentence. Spans are 1-based and inclusive.
/// A node with `word: Some(_)` is a preterminal and has no children.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tree<L = String, W = String> {
    pub label: L,
    pub start: usize,
    pub end: usize,
    pub children: Vec<Tree<L, W>>,
    pub word: Option<W>,
}

impl<L, W> Tree<L, W> {
    pub fn preterminal(label: L, position: usize, word: W) -> Self {
        Tree {
            label,
            start: position,
            end: position,
            children: Vec::new(),
            word: Some(word),
        }
    }

    /// Internal node; the span is taken from the children.
    pub fn node(label: L, children: Vec<Tree<L, W>>) -> Self {
        assert!(!children.is_empty(), "internal node needs children");
        let start = children[0].start;
        let end = children[children.len() - 1].end;
        Tree {
            label,
            start,
            end,
            children,
            word: None,
        }
    }

    pub fn is_preterminal(&self) -> bool {
        self.word.is_some()
    }

    /// Number of words covered.
    pub fn width(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn words(&self) -> Vec<&W> {
        let mut out = Vec::with_capacity(self.width());
        self.collect_words(&mut out);
        out
    }

    fn collect_words<'a>(&'a self, out: &mut Vec<&'a W>) {
        if let Some(w) = &self.word {
            out.push(w);
        }
        for c in &self.children {
            c.collect_words(out);
        }
    }

    /// Preterminal labels, left to right.
    pub fn tags(&self) -> Vec<&L> {
        let mut out = Vec::new();
        self.visit(&mut |t| {
            if t.is_preterminal() {
                out.push(&t.label);
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Tree<L, W>)) {
        f(self);
        for c in &self.children {
            c.visit(f);
        }
    }

    pub fn map<L2, W2>(&self, fl: &mut impl FnMut(&L) -> L2, fw: &mut impl FnMut(&W) -> W2) -> Tree<L2, W2> {
        Tree {
            label: fl(&self.label),
            start: self.start,
            end: self.end,
            children: self.children.iter().map(|c| c.map(fl, fw)).collect(),
            word: self.word.as_ref().map(|w| fw(w)),
        }
    }

    pub fn try_map<L2, W2, E>(
        &self,
        fl: &mut impl FnMut(&L) -> std::result::Result<L2, E>,
        fw: &mut impl FnMut(&W) -> std::result::Result<W2, E>,
    ) -> std::result::Result<Tree<L2, W2>, E> {
        let children = self
            .children
            .iter()
            .map(|c| c.try_map(fl, fw))
            .collect::<std::result::Result<Vec<_>, E>>()?;
        let word = match &self.word {
            Some(w) => Some(fw(w)?),
            None => None,
        };
        Ok(Tree {
            label: fl(&self.label)?,
            start: self.start,
            end: self.end,
            children,
            word,
        })
    }

    /// Recomputes spans so the leftmost word is at `start`.
    pub fn renumber(&mut self, start: usize) -> usize {
        self.start = start;
        if self.word.is_some() {
            self.end = start;
            return start + 1;
        }
        let mut next = start;
        for c in &mut self.children {
            next = c.renumber(next);
        }
        self.end = next - 1;
        next
    }

    /// Same tree with the word at position `i` (1-based) taken from
    /// `words[i - 1]`.
    pub fn with_words<W2: Clone>(&self, words: &[W2]) -> Tree<L, W2>
    where
        L: Clone,
    {
        Tree {
            label: self.label.clone(),
            start: self.start,
            end: self.end,
            children: self.children.iter().map(|c| c.with_words(words)).collect(),
            word: self.word.as_ref().map(|_| words[self.start - 1].clone()),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(|c| c.node_count()).sum::<usize>()
    }
}

impl<L: Clone, W> Tree<L, W> {
    /// `(label, start, end)` of every internal node, pre-order.
    pub fn internal_spans(&self) -> Vec<(L, usize, usize)> {
        let mut out = Vec::new();
        self.visit(&mut |t| {
            if !t.is_preterminal() {
                out.push((t.label.clone(), t.start, t.end));
            }
        });
        out
    }
}

impl<L: fmt::Display, W: fmt::Display> fmt::Display for Tree<L, W> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.word {
            Some(w) => write!(f, "({} {})", self.label, w),
            None => {
                write!(f, "({}", self.label)?;
                for c in &self.children {
                    write!(f, " {c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Prefix of intermediate symbols introduced by [`binarize_right`].
pub const INTERMEDIATE_PREFIX: char = '@';

pub fn is_intermediate(label: &str) -> bool {
    label.starts_with(INTERMEDIATE_PREFIX)
}

/// Drops functional-tag suffixes: `NP-SBJ-1` → `NP`, `NP=2` → `NP`.
/// Bracket tokens such as `-LRB-` and `-NONE-` are kept whole.
pub fn strip_functional_tags(label: &str) -> &str {
    if label.len() > 1 && label.starts_with('-') && label.ends_with('-') {
        return label;
    }
    match label.char_indices().skip(1).find(|&(_, c)| c == '-' || c == '=') {
        Some((p, _)) => &label[..p],
        None => label,
    }
}

struct PennReader<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

// raw node before cleanup: (label, children, word)
struct RawNode {
    label: String,
    children: Vec<RawNode>,
    word: Option<String>,
}

impl<'a> PennReader<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn err<T>(&self, message: &str) -> Result<T> {
        Err(Error::Parse {
            offset: self.pos,
            message: message.to_string(),
        })
    }

    fn token(&mut self) -> &'a str {
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() || b == b'(' || b == b')' {
                break;
            }
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    fn node(&mut self) -> Result<RawNode> {
        self.skip_ws();
        if self.pos >= self.bytes.len() || self.bytes[self.pos] != b'(' {
            return self.err("expected `(`");
        }
        self.pos += 1;
        self.skip_ws();
        let label = self.token().to_string();
        self.skip_ws();
        let mut children = Vec::new();
        let mut word = None;
        loop {
            self.skip_ws();
            match self.bytes.get(self.pos) {
                None => return self.err("unbalanced brackets: missing `)`"),
                Some(b')') => {
                    self.pos += 1;
                    break;
                }
                Some(b'(') => {
                    if word.is_some() {
                        return self.err("node mixes a word with subtrees");
                    }
                    children.push(self.node()?);
                }
                Some(_) => {
                    if word.is_some() || !children.is_empty() {
                        return self.err("unexpected token");
                    }
                    word = Some(self.token().to_string());
                }
            }
        }
        if word.is_none() && children.is_empty() {
            return self.err("empty node");
        }
        if word.is_some() && label.is_empty() {
            return self.err("word without a label");
        }
        Ok(RawNode { label, children, word })
    }
}

fn clean(node: RawNode) -> Option<Tree> {
    if let Some(word) = node.word {
        if node.label == "-NONE-" {
            return None;
        }
        let label = strip_functional_tags(&node.label).to_string();
        return Some(Tree::preterminal(label, 0, word));
    }
    let children: Vec<Tree> = node.children.into_iter().filter_map(clean).collect();
    if children.is_empty() {
        return None;
    }
    let label = strip_functional_tags(&node.label).to_string();
    Some(Tree::node(label, children))
}

/// Reads every top-level bracketed expression in `text`.
///
/// Outer unlabeled, `TOP` and `ROOT` wrappers around a single child are
/// removed, `-NONE-` elements (and nodes left empty by their removal) are
/// dropped and functional tags stripped. Trees left empty are skipped.
pub fn read_penn(text: &str) -> Result<Vec<Tree>> {
    let mut reader = PennReader {
        text,
        bytes: text.as_bytes(),
        pos: 0,
    };
    let mut trees = Vec::new();
    loop {
        reader.skip_ws();
        if reader.pos >= reader.bytes.len() {
            break;
        }
        if reader.bytes[reader.pos] == b')' {
            return reader.err("unbalanced brackets: unexpected `)`");
        }
        let mut raw = reader.node()?;
        while raw.word.is_none()
            && raw.children.len() == 1
            && (raw.label.is_empty() || raw.label == "TOP" || raw.label == "ROOT")
        {
            raw = raw.children.pop().unwrap();
        }
        if raw.label.is_empty() {
            return Err(Error::Parse {
                offset: reader.pos,
                message: "unlabeled node with several children".into(),
            });
        }
        if let Some(mut tree) = clean(raw) {
            tree.renumber(1);
            trees.push(tree);
        }
    }
    Ok(trees)
}

/// Rewrites every node with more than two children `(X c1 ... cm)` into
/// `(X c1 (@X c2 (@X ... cm)))`.
pub fn binarize_right<W: Clone>(tree: &Tree<String, W>) -> Tree<String, W> {
    if tree.is_preterminal() {
        return tree.clone();
    }
    let children: Vec<_> = tree.children.iter().map(binarize_right).collect();
    if children.len() <= 2 {
        return Tree::node(tree.label.clone(), children);
    }
    let base = tree.label.trim_start_matches(INTERMEDIATE_PREFIX);
    let inter = format!("{INTERMEDIATE_PREFIX}{base}");
    let mut iter = children.into_iter().rev();
    let last = iter.next().unwrap();
    let second_last = iter.next().unwrap();
    let mut acc = Tree::node(inter.clone(), vec![second_last, last]);
    let rest: Vec<_> = iter.collect();
    let n_rest = rest.len();
    for (idx, c) in rest.into_iter().enumerate() {
        let label = if idx + 1 == n_rest { tree.label.clone() } else { inter.clone() };
        acc = Tree::node(label, vec![c, acc]);
    }
    acc
}

/// Splices every `@X` node into its parent.
pub fn debinarize<W: Clone>(tree: &Tree<String, W>) -> Tree<String, W> {
    if tree.is_preterminal() {
        return tree.clone();
    }
    let mut children = Vec::new();
    for c in &tree.children {
        let c = debinarize(c);
        if is_intermediate(&c.label) && !c.is_preterminal() {
            children.extend(c.children);
        } else {
            children.push(c);
        }
    }
    Tree::node(tree.label.clone(), children)
}

/// Leaves at most one unary per span: a chain `X → Y → ... → Z` keeps its top
/// and bottom labels, and a chain whose ends share a label becomes one node.
pub fn collapse_unary_chains<L: Clone + PartialEq, W: Clone>(tree: &Tree<L, W>) -> Tree<L, W> {
    let top = tree;
    let mut bottom = tree;
    while bottom.children.len() == 1 {
        bottom = &bottom.children[0];
    }
    let collapsed_bottom = if bottom.is_preterminal() {
        bottom.clone()
    } else {
        Tree {
            label: bottom.label.clone(),
            start: bottom.start,
            end: bottom.end,
            children: bottom.children.iter().map(collapse_unary_chains).collect(),
            word: None,
        }
    };
    if std::ptr::eq(top, bottom) || top.label == bottom.label {
        collapsed_bottom
    } else {
        Tree {
            label: top.label.clone(),
            start: top.start,
            end: top.end,
            children: vec![collapsed_bottom],
            word: None,
        }
    }
}

/// Wraps a tree whose root label differs from `start` in a unary `start`
/// node (then collapses a resulting chain).
pub fn ensure_root(tree: &Tree, start: &str) -> Tree {
    if tree.label == start {
        return tree.clone();
    }
    collapse_unary_chains(&Tree::node(start.to_string(), vec![tree.clone()]))
}

/// Binarization plus unary-chain collapsing: the shape the grammar expects.
pub fn prepare_tree(tree: &Tree) -> Tree {
    collapse_unary_chains(&binarize_right(tree))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnknownMode {
    /// Feature-based signature classes.
    Berkeley60,
    /// One class for every rare word.
    Simple,
}

impl std::str::FromStr for UnknownMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "berkeley60" => Ok(UnknownMode::Berkeley60),
            "simple" => Ok(UnknownMode::Simple),
            other => Err(Error::Config(format!("unknown word mode `{other}`"))),
        }
    }
}

const SUFFIXES: [&str; 10] = ["ing", "ion", "est", "ity", "ed", "er", "ly", "al", "s", "y"];

fn is_number_like(word: &str) -> bool {
    word.chars().any(|c| c.is_ascii_digit())
        && word
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, ',' | '.' | '-' | '/' | ':'))
}

/// Unknown-word class of a surface form.
pub fn signature(word: &str, mode: UnknownMode) -> String {
    if mode == UnknownMode::Simple {
        return "UNK".to_string();
    }
    if is_number_like(word) {
        return "UNK-NUM".to_string();
    }
    let mut sig = String::from("UNK");
    if word.chars().next().is_some_and(|c| c.is_uppercase()) {
        sig.push_str("-C");
    }
    let has_digit = word.chars().any(|c| c.is_ascii_digit());
    if has_digit {
        sig.push_str("-D");
    }
    if word.contains('-') {
        sig.push_str("-H");
    }
    if !has_digit {
        let lower = word.to_lowercase();
        if let Some(s) = SUFFIXES.iter().find(|s| lower.len() > s.len() && lower.ends_with(*s)) {
            sig.push('-');
            sig.push_str(s);
        }
    }
    sig
}

/// Every class [`signature`] can produce in `berkeley60` mode.
pub fn signature_classes() -> Vec<String> {
    let mut out = vec!["UNK-NUM".to_string()];
    for cap in ["", "-C"] {
        for hyphen in ["", "-H"] {
            out.push(format!("UNK{cap}-D{hyphen}"));
            out.push(format!("UNK{cap}{hyphen}"));
            for s in SUFFIXES {
                out.push(format!("UNK{cap}{hyphen}-{s}"));
            }
        }
    }
    out
}

/// Word inventory after rare-word replacement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub mode: UnknownMode,
    pub threshold: usize,
    known: HashSet<String>,
    signatures: HashSet<String>,
    fallback: String,
}

impl Vocabulary {
    /// Words occurring at most `threshold` times become signature classes.
    pub fn build<'a, S, I>(sentences: S, threshold: usize, mode: UnknownMode) -> Vocabulary
    where
        S: IntoIterator<Item = I>,
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for s in sentences {
            for w in s {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut known = HashSet::new();
        let mut sig_counts: BTreeMap<String, usize> = BTreeMap::new();
        for (w, c) in &counts {
            if *c > threshold {
                known.insert(w.to_string());
            } else {
                *sig_counts.entry(signature(w, mode)).or_default() += c;
            }
        }
        let fallback = most_frequent(&sig_counts)
            .or_else(|| {
                let known_counts: BTreeMap<String, usize> =
                    counts.iter().filter(|(_, c)| **c > threshold).map(|(w, c)| (w.to_string(), *c)).collect();
                most_frequent(&known_counts)
            })
            .unwrap_or_else(|| signature("", mode));
        Vocabulary {
            mode,
            threshold,
            known,
            signatures: sig_counts.into_keys().collect(),
            fallback,
        }
    }

    /// Maps a token to its terminal string. Total: unseen signature classes
    /// fall back to the most frequent class seen in training.
    pub fn map<'a>(&'a self, word: &'a str) -> std::borrow::Cow<'a, str> {
        if self.known.contains(word) {
            return word.into();
        }
        let sig = signature(word, self.mode);
        if self.signatures.contains(&sig) {
            sig.into()
        } else {
            self.fallback.as_str().into()
        }
    }

    pub fn is_known(&self, word: &str) -> bool {
        self.known.contains(word)
    }

    pub fn fallback(&self) -> &str {
        &self.fallback
    }

    /// Every terminal string the mapping can return.
    pub fn terminals(&self) -> Vec<String> {
        let mut all: Vec<String> = self.known.iter().chain(self.signatures.iter()).cloned().collect();
        all.push(self.fallback.clone());
        all.sort();
        all.dedup();
        all
    }

    pub fn signatures(&self) -> Vec<String> {
        let mut s: Vec<String> = self.signatures.iter().cloned().collect();
        s.sort();
        s
    }

    /// Reassembles a vocabulary from stored parts.
    pub fn from_parts(
        mode: UnknownMode,
        threshold: usize,
        known: impl IntoIterator<Item = String>,
        signatures: impl IntoIterator<Item = String>,
        fallback: String,
    ) -> Vocabulary {
        Vocabulary {
            mode,
            threshold,
            known: known.into_iter().collect(),
            signatures: signatures.into_iter().collect(),
            fallback,
        }
    }

    pub fn map_tree(&self, tree: &Tree) -> Tree {
        tree.map(&mut |l: &String| l.clone(), &mut |w: &String| self.map(w).into_owned())
    }
}

fn most_frequent(counts: &BTreeMap<String, usize>) -> Option<String> {
    // BTreeMap order makes the lexicographically smallest win ties
    let mut best: Option<(&String, usize)> = None;
    for (k, c) in counts {
        if best.is_none_or(|(_, bc)| *c > bc) {
            best = Some((k, *c));
        }
    }
    best.map(|(k, _)| k.clone())
}

/// A tagged sentence; `words` and `tags` have equal, nonzero length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedSentence<W = String, T = String> {
    pub words: Vec<W>,
    pub tags: Vec<T>,
}

impl<W, T> TaggedSentence<W, T> {
    pub fn new(words: Vec<W>, tags: Vec<T>) -> Result<Self> {
        if words.len() != tags.len() || words.is_empty() {
            return Err(Error::Input(format!(
                "tagged sentence with {} words and {} tags",
                words.len(),
                tags.len()
            )));
        }
        Ok(TaggedSentence { words, tags })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Reads FORM and UPOS columns; comments, multiword ranges and empty nodes
/// are skipped.
pub fn read_conllu(text: &str) -> Result<Vec<TaggedSentence>> {
    let mut out = Vec::new();
    let mut words = Vec::new();
    let mut tags = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !words.is_empty() {
                out.push(TaggedSentence::new(std::mem::take(&mut words), std::mem::take(&mut tags))?);
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 4 {
            return Err(Error::LineParse {
                line: idx + 1,
                message: format!("expected at least 4 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        words.push(cols[1].to_string());
        tags.push(cols[3].to_string());
    }
    if !words.is_empty() {
        out.push(TaggedSentence::new(words, tags)?);
    }
    Ok(out)
}

/// Two-column `word<TAB>tag` output, sentences separated by blank lines.
pub fn write_tagged<W: fmt::Display, T: fmt::Display>(sentences: &[TaggedSentence<W, T>]) -> String {
    let mut out = String::new();
    for s in sentences {
        for (w, t) in s.words.iter().zip(&s.tags) {
            out.push_str(&format!("{w}\t{t}\n"));
        }
        out.push('\n');
    }
    out
}

/// Reads two-column `word<TAB>tag` lines, sentences separated by blank lines.
pub fn read_tagged(text: &str) -> Result<Vec<TaggedSentence>> {
    let mut out = Vec::new();
    let mut words = Vec::new();
    let mut tags = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !words.is_empty() {
                out.push(TaggedSentence::new(std::mem::take(&mut words), std::mem::take(&mut tags))?);
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(Error::LineParse {
                line: idx + 1,
                message: format!("expected 2 tab-separated columns, found {}", cols.len()),
            });
        }
        words.push(cols[0].to_string());
        tags.push(cols[1].to_string());
    }
    if !words.is_empty() {
        out.push(TaggedSentence::new(words, tags)?);
    }
    Ok(out)
}

/// CoNLL-U when some token line has more than two columns, otherwise the
/// two-column format.
pub fn read_tagged_any(text: &str) -> Result<Vec<TaggedSentence>> {
    let conllu = text
        .lines()
        .any(|l| !l.starts_with('#') && l.split('\t').count() > 2);
    if conllu {
        read_conllu(text)
    } else {
        read_tagged(text)
    }
}

/// Groups of trees separated by blank lines, one group per sentence.
pub fn read_tree_groups(text: &str) -> Result<Vec<Vec<Tree>>> {
    let mut groups = Vec::new();
    let mut current = String::new();
    for line in text.lines().chain(std::iter::once("")) {
        if line.trim().is_empty() {
            if !current.trim().is_empty() {
                groups.push(read_penn(&current)?);
            }
            current.clear();
        } else {
            current.push_str(line);
            current.push('\n');
        }
    }
    Ok(groups)
}

/// Reads whitespace-tokenized sentences, one per non-empty line.
pub fn read_sentences(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Training trees in grammar shape, with the vocabulary used to map words.
#[derive(Clone, Debug)]
pub struct PreparedTreebank {
    pub trees: Vec<Tree>,
    pub vocabulary: Vocabulary,
    pub start: String,
}

/// Binarizes and collapses unary chains, roots every tree at the most
/// frequent root label, and replaces rare words by their classes.
pub fn prepare_treebank(raw: &[Tree], unk_threshold: usize, mode: UnknownMode) -> Result<PreparedTreebank> {
    if raw.is_empty() {
        return Err(Error::Input("empty treebank".into()));
    }
    let shaped: Vec<Tree> = raw.iter().map(prepare_tree).collect();
    let counts: BTreeMap<String, usize> = shaped.iter().fold(BTreeMap::new(), |mut m, t| {
        *m.entry(t.label.clone()).or_default() += 1;
        m
    });
    let start = most_frequent(&counts).expect("nonempty treebank");
    let rooted: Vec<Tree> = shaped.iter().map(|t| ensure_root(t, &start)).collect();
    let vocabulary = Vocabulary::build(
        rooted.iter().map(|t| t.words().into_iter().map(String::as_str)),
        unk_threshold,
        mode,
    );
    let trees = rooted.iter().map(|t| vocabulary.map_tree(t)).collect();
    Ok(PreparedTreebank {
        trees,
        vocabulary,
        start,
    })
}

/// Label counts, useful for picking a start symbol.
pub fn root_label_counts(trees: &[Tree]) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for t in trees {
        *counts.entry(t.label.clone()).or_default() += 1;
    }
    counts
}
