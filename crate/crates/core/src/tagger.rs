//! Sequence labeling with mixture-weighted right-linear structure (an HMM
//! whose states carry continuous subtype vectors).
//!
//! Weight functions: a start and a stop weight per tag, a two-slot
//! transition weight per tag pair and one emission weight per observed
//! (tag, terminal) pair. Forward and backward scores are one-slot mixtures
//! per position and tag.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{TaggedSentence, Vocabulary};
use crate::error::{Error, Result};
use crate::gm::{log_add, log_sum_exp, GaussianMixture, PruneRule, Slot};
use crate::grammar::{components_file, init_mixture, mixture_from_file, ComponentFile, NtId, SymbolTable, SymbolsFile, TermId};
use crate::inference::SUBTYPE;
use crate::learning::{ExpectedOuter, SentenceOuters, Trainable};

pub const FROM: &str = "from";
pub const TO: &str = "to";

/// Smoothing mass added to every start, stop, transition and rare-word
/// emission count.
const BOUNDARY_SMOOTHING: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "lowercase")]
pub enum WeightRole {
    Start { tag: NtId },
    Stop { tag: NtId },
    Transition { from: NtId, to: NtId },
    Emission { tag: NtId, terminal: TermId },
}

/// A tagged sentence in ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedExample {
    pub words: Vec<TermId>,
    pub tags: Vec<NtId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceModel {
    symbols: SymbolTable,
    roles: Vec<WeightRole>,
    baseline: Vec<f64>,
    weights: Vec<GaussianMixture>,
    start: Vec<usize>,
    stop: Vec<usize>,
    transition: Vec<usize>,
    emission: Vec<Vec<(NtId, usize)>>,
    d: usize,
    k: usize,
    spherical: bool,
}

fn one_slot(d: usize) -> Vec<Slot> {
    vec![Slot::new(SUBTYPE, d)]
}

impl SequenceModel {
    /// Relative-frequency estimates scaled by `alpha` as initial component
    /// weights, identity covariances and small random means. Words are
    /// mapped through `vocabulary` first.
    pub fn estimate(
        sentences: &[TaggedSentence],
        vocabulary: Vocabulary,
        k: usize,
        d: usize,
        alpha: f64,
        seed: u64,
        spherical: bool,
    ) -> Result<SequenceModel> {
        if sentences.is_empty() {
            return Err(Error::Input("no tagged sentences".into()));
        }
        if !(alpha > 1.0) {
            return Err(Error::Config(format!("alpha must exceed 1, got {alpha}")));
        }
        if k == 0 || d == 0 {
            return Err(Error::Config("K and d must be at least 1".into()));
        }
        let mut tag_names: BTreeMap<&str, ()> = BTreeMap::new();
        let mut term_names: BTreeMap<String, ()> = BTreeMap::new();
        for s in sentences {
            for (w, t) in s.words.iter().zip(&s.tags) {
                tag_names.insert(t, ());
                term_names.insert(vocabulary.map(w).into_owned(), ());
            }
        }
        term_names.insert(vocabulary.fallback().to_string(), ());
        let tags: Vec<String> = tag_names.keys().map(|s| s.to_string()).collect();
        let terminals: Vec<String> = term_names.into_keys().collect();
        let symbols = SymbolTable::new(tags.clone(), &tags[0], terminals, Some(vocabulary))?;
        let nt = tags.len();
        let mut start_c = vec![0.0; nt];
        let mut stop_c = vec![0.0; nt];
        let mut trans_c = vec![0.0; nt * nt];
        let mut emit_c: BTreeMap<(NtId, TermId), f64> = BTreeMap::new();
        for s in sentences {
            let ids: Vec<NtId> = s.tags.iter().map(|t| symbols.nt_id(t).unwrap()).collect();
            start_c[ids[0]] += 1.0;
            stop_c[ids[ids.len() - 1]] += 1.0;
            for w in ids.windows(2) {
                trans_c[w[0] * nt + w[1]] += 1.0;
            }
            for (w, &t) in s.words.iter().zip(&ids) {
                let term = symbols.word_id(w).expect("interned");
                *emit_c.entry((t, term)).or_default() += 1.0;
            }
        }
        // every tag may emit every rare-word class
        let vocabulary = symbols.vocabulary().expect("set above");
        for sig in vocabulary.signatures() {
            if let Some(term) = symbols.term_id(&sig) {
                for t in 0..nt {
                    *emit_c.entry((t, term)).or_default() += BOUNDARY_SMOOTHING;
                }
            }
        }
        let mut roles = Vec::new();
        let mut baseline = Vec::new();
        let start_total: f64 = start_c.iter().sum::<f64>() + BOUNDARY_SMOOTHING * nt as f64;
        for (a, c) in start_c.iter().enumerate() {
            roles.push(WeightRole::Start { tag: a });
            baseline.push((c + BOUNDARY_SMOOTHING) / start_total);
        }
        // leaving a tag: continue to some tag or stop
        let mut out_total = vec![0.0; nt];
        for a in 0..nt {
            out_total[a] = stop_c[a] + trans_c[a * nt..(a + 1) * nt].iter().sum::<f64>() + BOUNDARY_SMOOTHING * (nt + 1) as f64;
        }
        for a in 0..nt {
            roles.push(WeightRole::Stop { tag: a });
            baseline.push((stop_c[a] + BOUNDARY_SMOOTHING) / out_total[a]);
        }
        for a in 0..nt {
            for b in 0..nt {
                roles.push(WeightRole::Transition { from: a, to: b });
                baseline.push((trans_c[a * nt + b] + BOUNDARY_SMOOTHING) / out_total[a]);
            }
        }
        let mut tag_total = vec![0.0; nt];
        for ((t, _), c) in &emit_c {
            tag_total[*t] += c;
        }
        for ((t, w), c) in &emit_c {
            roles.push(WeightRole::Emission { tag: *t, terminal: *w });
            baseline.push(c / tag_total[*t]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = roles
            .iter()
            .zip(&baseline)
            .map(|(role, p)| init_mixture(&mut rng, role_slots(role, d), k, (alpha * p).ln()))
            .collect();
        SequenceModel::assemble(symbols, roles, baseline, weights, d, k, spherical)
    }

    fn assemble(
        symbols: SymbolTable,
        roles: Vec<WeightRole>,
        baseline: Vec<f64>,
        weights: Vec<GaussianMixture>,
        d: usize,
        k: usize,
        spherical: bool,
    ) -> Result<SequenceModel> {
        let nt = symbols.n_nonterminals();
        let mut start = vec![usize::MAX; nt];
        let mut stop = vec![usize::MAX; nt];
        let mut transition = vec![usize::MAX; nt * nt];
        let mut emission = vec![Vec::new(); symbols.n_terminals()];
        for (i, role) in roles.iter().enumerate() {
            if weights[i].slots() != role_slots(role, d).as_slice() || weights[i].len() != k {
                return Err(Error::Dimension(format!("weight {i} does not match its role {role:?}")));
            }
            match *role {
                WeightRole::Start { tag } => start[tag] = i,
                WeightRole::Stop { tag } => stop[tag] = i,
                WeightRole::Transition { from, to } => transition[from * nt + to] = i,
                WeightRole::Emission { tag, terminal } => emission[terminal].push((tag, i)),
            }
        }
        if start.iter().chain(&stop).chain(&transition).any(|&i| i == usize::MAX) {
            return Err(Error::Input("every tag needs start, stop and transition weights".into()));
        }
        for e in &mut emission {
            e.sort();
        }
        Ok(SequenceModel {
            symbols,
            roles,
            baseline,
            weights,
            start,
            stop,
            transition,
            emission,
            d,
            k,
            spherical,
        })
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    pub fn n_tags(&self) -> usize {
        self.symbols.n_nonterminals()
    }

    pub fn roles(&self) -> &[WeightRole] {
        &self.roles
    }

    pub fn weight(&self, i: usize) -> &GaussianMixture {
        &self.weights[i]
    }

    pub fn start_weight(&self, tag: NtId) -> &GaussianMixture {
        &self.weights[self.start[tag]]
    }

    pub fn stop_weight(&self, tag: NtId) -> &GaussianMixture {
        &self.weights[self.stop[tag]]
    }

    pub fn transition_weight(&self, from: NtId, to: NtId) -> &GaussianMixture {
        &self.weights[self.transition[from * self.n_tags() + to]]
    }

    /// Emission weight, if the pair was observed.
    pub fn emission_weight(&self, tag: NtId, terminal: TermId) -> Option<&GaussianMixture> {
        self.emission_id(tag, terminal).map(|i| &self.weights[i])
    }

    fn emission_id(&self, tag: NtId, terminal: TermId) -> Option<usize> {
        self.emission[terminal].iter().find(|(t, _)| *t == tag).map(|(_, i)| *i)
    }

    pub fn example(&self, sentence: &TaggedSentence) -> Result<TaggedExample> {
        let words = self.symbols.map_sentence(&sentence.words)?;
        let tags = sentence
            .tags
            .iter()
            .map(|t| {
                self.symbols
                    .nt_id(t)
                    .ok_or_else(|| Error::Coverage(format!("unknown tag `{t}`")))
            })
            .collect::<Result<_>>()?;
        Ok(TaggedExample { words, tags })
    }

    /// Multiplies every emission weight by `exp(log_c)`.
    pub fn scale_emissions(&mut self, log_c: f64) {
        for (i, role) in self.roles.iter().enumerate() {
            if matches!(role, WeightRole::Emission { .. }) {
                self.weights[i] = self.weights[i].scale(log_c);
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = TaggerFile {
            version: TAGGER_VERSION,
            d: self.d,
            k: self.k,
            spherical: self.spherical,
            symbols: SymbolsFile::from_table(&self.symbols),
            weights: self
                .roles
                .iter()
                .enumerate()
                .map(|(i, role)| TaggerWeightFile {
                    role: *role,
                    baseline_prob: self.baseline[i],
                    components: components_file(&self.weights[i]),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<SequenceModel> {
        let file: TaggerFile = serde_json::from_str(text)?;
        if file.version != TAGGER_VERSION {
            return Err(Error::Version(file.version));
        }
        let symbols = file.symbols.into_table()?;
        let mut roles = Vec::new();
        let mut baseline = Vec::new();
        let mut weights = Vec::new();
        for w in &file.weights {
            roles.push(w.role);
            baseline.push(w.baseline_prob);
            weights.push(mixture_from_file(role_slots(&w.role, file.d), &w.components)?);
        }
        SequenceModel::assemble(symbols, roles, baseline, weights, file.d, file.k, file.spherical)
    }
}

fn role_slots(role: &WeightRole, d: usize) -> Vec<Slot> {
    match role {
        WeightRole::Transition { .. } => vec![Slot::new(FROM, d), Slot::new(TO, d)],
        _ => one_slot(d),
    }
}

const TAGGER_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TaggerFile {
    version: u32,
    d: usize,
    #[serde(rename = "K")]
    k: usize,
    spherical: bool,
    symbols: SymbolsFile,
    weights: Vec<TaggerWeightFile>,
}

#[derive(Serialize, Deserialize)]
struct TaggerWeightFile {
    #[serde(flatten)]
    role: WeightRole,
    baseline_prob: f64,
    components: Vec<ComponentFile>,
}

type Cell = Option<Arc<GaussianMixture>>;

/// Forward/backward mixtures of one sentence. Index `[t][tag]`, `t` 0-based.
#[derive(Clone, Debug)]
pub struct SeqChart {
    /// Score of everything before `t` arriving in `tag` (start weight at 0).
    pub incoming: Vec<Vec<Cell>>,
    /// `incoming` times the emission at `t`.
    pub forward: Vec<Vec<Cell>>,
    /// Score of everything after `t` given `tag` at `t`, stop included.
    pub backward: Vec<Vec<Cell>>,
    pub log_z: f64,
}

fn part(v: &[f64], s: usize, d: usize) -> &[f64] {
    &v[s * d..(s + 1) * d]
}

/// `Σ_k ρ_k N(slot keep) ∫ N(slot other) f` for a two-slot weight.
fn contract(w: &GaussianMixture, f: &GaussianMixture, keep: usize, d: usize, out: &mut GaussianMixture) {
    let other = 1 - keep;
    for kk in 0..w.len() {
        let (m, v) = (w.mean(kk), w.variance(kk));
        let lw = w.log_weight(kk) + f.log_overlap(part(m, other, d), part(v, other, d));
        if lw > f64::NEG_INFINITY {
            out.push(lw, part(m, keep, d), part(v, keep, d));
        }
    }
}

fn log_inner(f: &GaussianMixture, g: &GaussianMixture) -> f64 {
    log_sum_exp((0..g.len()).map(|k| g.log_weight(k) + f.log_overlap(g.mean(k), g.variance(k))))
}

/// Forward and backward passes; `allowed[t]`, when given, restricts the tag
/// at position `t`.
pub fn seq_inside_outside(
    model: &SequenceModel,
    words: &[TermId],
    allowed: Option<&[NtId]>,
    prune: &PruneRule,
) -> Result<SeqChart> {
    let n = words.len();
    if n == 0 {
        return Err(Error::Input("empty sentence".into()));
    }
    let nt = model.n_tags();
    let d = model.d;
    let ok = |t: usize, a: NtId| allowed.is_none_or(|al| al[t] == a);
    let mut incoming: Vec<Vec<Cell>> = vec![vec![None; nt]; n];
    let mut forward: Vec<Vec<Cell>> = vec![vec![None; nt]; n];
    for t in 0..n {
        for a in 0..nt {
            if !ok(t, a) {
                continue;
            }
            let Some(e) = model.emission_weight(a, words[t]) else {
                continue;
            };
            let inc = if t == 0 {
                model.start_weight(a).clone()
            } else {
                let mut inc = GaussianMixture::zero(one_slot(d));
                for b in 0..nt {
                    if let Some(f) = &forward[t - 1][b] {
                        contract(model.transition_weight(b, a), f, 1, d, &mut inc);
                    }
                }
                inc.prune(prune)
            };
            if inc.is_empty() {
                continue;
            }
            let f = inc.product(e)?.prune(prune);
            incoming[t][a] = Some(Arc::new(inc));
            forward[t][a] = Some(Arc::new(f));
        }
    }
    let mut log_z = f64::NEG_INFINITY;
    for a in 0..nt {
        if let Some(f) = &forward[n - 1][a] {
            log_z = log_add(log_z, log_inner(f, model.stop_weight(a)));
        }
    }
    if log_z == f64::NEG_INFINITY || log_z.is_nan() {
        return Err(Error::NoParse("no tag sequence has positive weight".into()));
    }
    let mut backward: Vec<Vec<Cell>> = vec![vec![None; nt]; n];
    for a in 0..nt {
        if forward[n - 1][a].is_some() {
            backward[n - 1][a] = Some(Arc::new(model.stop_weight(a).clone()));
        }
    }
    for t in (0..n - 1).rev() {
        // emission times backward at t + 1
        let mut ahead: Vec<Option<GaussianMixture>> = vec![None; nt];
        for b in 0..nt {
            if let (Some(bw), Some(e)) = (&backward[t + 1][b], model.emission_weight(b, words[t + 1])) {
                ahead[b] = Some(e.product(bw)?);
            }
        }
        for a in 0..nt {
            if forward[t][a].is_none() {
                continue;
            }
            let mut bw = GaussianMixture::zero(one_slot(d));
            for (b, h) in ahead.iter().enumerate() {
                if let Some(h) = h {
                    contract(model.transition_weight(a, b), h, 0, d, &mut bw);
                }
            }
            let bw = bw.prune(prune);
            if !bw.is_empty() {
                backward[t][a] = Some(Arc::new(bw));
            }
        }
    }
    Ok(SeqChart {
        incoming,
        forward,
        backward,
        log_z,
    })
}

/// Per-token tag posteriors, `[t][tag]`.
pub fn token_posteriors(chart: &SeqChart) -> Vec<Vec<f64>> {
    chart
        .forward
        .iter()
        .zip(&chart.backward)
        .map(|(fs, bs)| {
            fs.iter()
                .zip(bs)
                .map(|(f, b)| match (f, b) {
                    (Some(f), Some(b)) => (log_inner(f, b) - chart.log_z).exp(),
                    _ => 0.0,
                })
                .collect()
        })
        .collect()
}

/// Per-token posterior argmax; ties go to the smallest tag id.
pub fn decode(model: &SequenceModel, words: &[TermId], prune: &PruneRule) -> Result<Vec<NtId>> {
    let chart = seq_inside_outside(model, words, None, prune)?;
    Ok(token_posteriors(&chart)
        .iter()
        .map(|q| {
            let mut best = 0;
            for (a, v) in q.iter().enumerate() {
                if *v > q[best] {
                    best = a;
                }
            }
            best
        })
        .collect())
}

fn outers_of(model: &SequenceModel, words: &[TermId], chart: &SeqChart) -> Result<ExpectedOuter> {
    let n = words.len();
    let nt = model.n_tags();
    let scale = -chart.log_z;
    let mut out = ExpectedOuter::new(model.weights.len());
    for t in 0..n {
        for a in 0..nt {
            let (Some(inc), Some(f), Some(b)) = (&chart.incoming[t][a], &chart.forward[t][a], &chart.backward[t][a]) else {
                continue;
            };
            let e_id = model.emission_id(a, words[t]).expect("forward implies emission");
            out.push(e_id, scale, vec![Arc::new(inc.product(b)?)]);
            if t == 0 {
                let e = &model.weights[e_id];
                out.push(model.start[a], scale, vec![Arc::new(e.product(b)?)]);
            }
            if t == n - 1 {
                out.push(model.stop[a], scale, vec![Arc::clone(f)]);
            } else {
                for c in 0..nt {
                    let (Some(bn), Some(e_next)) = (&chart.backward[t + 1][c], model.emission_weight(c, words[t + 1]))
                    else {
                        continue;
                    };
                    if chart.forward[t + 1][c].is_none() {
                        continue;
                    }
                    let ahead = Arc::new(e_next.product(bn)?);
                    out.push(model.transition[a * nt + c], scale, vec![Arc::clone(f), ahead]);
                }
            }
        }
    }
    Ok(out)
}

impl Trainable for SequenceModel {
    type Example = TaggedExample;

    fn weights(&self) -> &[GaussianMixture] {
        &self.weights
    }

    fn weights_mut(&mut self) -> &mut [GaussianMixture] {
        &mut self.weights
    }

    fn spherical(&self) -> bool {
        self.spherical
    }

    fn d(&self) -> usize {
        self.d
    }

    fn sentence_outers(&self, ex: &TaggedExample, prune: &PruneRule) -> Result<SentenceOuters> {
        let full = seq_inside_outside(self, &ex.words, None, prune)?;
        let gold = seq_inside_outside(self, &ex.words, Some(&ex.tags), prune)?;
        Ok(SentenceOuters {
            unconstrained: outers_of(self, &ex.words, &full)?,
            gold: outers_of(self, &ex.words, &gold)?,
            log_z: full.log_z,
            log_gold: gold.log_z,
        })
    }

    fn sentence_nll(&self, ex: &TaggedExample, prune: &PruneRule) -> Result<f64> {
        let full = seq_inside_outside(self, &ex.words, None, prune)?;
        let gold = seq_inside_outside(self, &ex.words, Some(&ex.tags), prune)?;
        Ok(full.log_z - gold.log_z)
    }
}
