//! Discriminative training of mixture weights.
//!
//! The loss per sentence is `log Z(w) - log Z(T)`: the log weight of all
//! parses minus the log weight of the gold tree. Its gradient with respect
//! to a rule weight is the difference of two expected "outer" functions (the
//! scores multiplying the rule weight at each anchor, divided by the
//! respective normalizer), integrated against each weight component. Outers
//! are kept factored, one mixture per slot, so no product of charts is ever
//! materialized.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Tree;
use crate::error::{Error, Result};
use crate::gm::{log_sum_exp, GaussianMixture, PruneRule, Slot};
use crate::grammar::{Grammar, NtId, TermId};
use crate::inference::{
    anchor_log_score, for_each_anchor, gold_mask, parse_chart, pcfg_mask, sentence_weight, SpanMask, SUBTYPE,
};

/// One anchored contribution to an expected outer: `exp(log_scale)` times
/// the product of `factors[s]` applied to slot `s`.
#[derive(Clone, Debug)]
pub struct OuterTerm {
    pub log_scale: f64,
    pub factors: Vec<Arc<GaussianMixture>>,
}

/// Expected outer functions, one list of factored terms per weight function.
#[derive(Clone, Debug, Default)]
pub struct ExpectedOuter {
    terms: Vec<Vec<OuterTerm>>,
}

impl ExpectedOuter {
    pub fn new(n_weights: usize) -> ExpectedOuter {
        ExpectedOuter {
            terms: vec![Vec::new(); n_weights],
        }
    }

    pub fn push(&mut self, weight: usize, log_scale: f64, factors: Vec<Arc<GaussianMixture>>) {
        self.terms[weight].push(OuterTerm { log_scale, factors });
    }

    pub fn terms(&self, weight: usize) -> &[OuterTerm] {
        &self.terms[weight]
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Weight functions with at least one term.
    pub fn touched(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().enumerate().filter(|(_, t)| !t.is_empty()).map(|(r, _)| r)
    }

    /// `log ∫ outer_r · weight`: for a parse chart, the log expected count
    /// of rule `r`.
    pub fn log_mass_with(&self, r: usize, weight: &GaussianMixture, d: usize) -> f64 {
        log_sum_exp(self.terms[r].iter().map(|t| {
            let refs: Vec<&Arc<GaussianMixture>> = t.factors.iter().collect();
            t.log_scale + anchor_log_score(weight, &refs, d)
        }))
    }

    /// Materializes the outer of weight `r` as a mixture over `slots`.
    /// Fails when a factor is a constant (no slot to place it on).
    pub fn to_mixture(&self, r: usize, slots: &[Slot]) -> Result<GaussianMixture> {
        let mut total = GaussianMixture::zero(slots.to_vec());
        for t in &self.terms[r] {
            let mut prod = GaussianMixture::scalar(t.log_scale);
            for (f, slot) in t.factors.iter().zip(slots) {
                if f.is_scalar() {
                    return Err(Error::State("outer has a constant factor".into()));
                }
                prod = prod.product(&f.rename_slot(SUBTYPE, slot.name)?)?;
            }
            total = total.sum(&prod.with_slots(slots.to_vec())?)?;
        }
        Ok(total)
    }
}

/// Outers of one sentence, with both normalizers.
#[derive(Clone, Debug)]
pub struct SentenceOuters {
    pub unconstrained: ExpectedOuter,
    pub gold: ExpectedOuter,
    pub log_z: f64,
    pub log_gold: f64,
}

impl SentenceOuters {
    pub fn nll(&self) -> f64 {
        self.log_z - self.log_gold
    }
}

/// A model whose parameters are a list of mixture weight functions.
pub trait Trainable: Clone + Send + Sync {
    type Example: Sync;

    fn weights(&self) -> &[GaussianMixture];
    fn weights_mut(&mut self) -> &mut [GaussianMixture];
    fn spherical(&self) -> bool;
    fn d(&self) -> usize;
    fn sentence_outers(&self, example: &Self::Example, prune: &PruneRule) -> Result<SentenceOuters>;
    /// `log Z - log Z(gold)` without the outside passes.
    fn sentence_nll(&self, example: &Self::Example, prune: &PruneRule) -> Result<f64>;
}

/// Unconstrained coordinates: per component `θ_ρ = log ρ`, the mean, and
/// `θ_σ = log σ²` (one value per component in spherical mode).
#[derive(Clone, Debug, PartialEq)]
pub struct ParamView {
    pub values: Vec<f64>,
    offsets: Vec<usize>,
    spherical: bool,
}

impl ParamView {
    pub fn from_weights(weights: &[GaussianMixture], spherical: bool) -> ParamView {
        let offsets = layout(weights, spherical);
        let mut values = Vec::with_capacity(*offsets.last().unwrap());
        for w in weights {
            for k in 0..w.len() {
                values.push(w.log_weight(k));
                values.extend_from_slice(w.mean(k));
                if spherical {
                    values.push(w.variance(k)[0].ln());
                } else {
                    values.extend(w.variance(k).iter().map(|v| v.ln()));
                }
            }
        }
        ParamView {
            values,
            offsets,
            spherical,
        }
    }

    /// Writes the realized parameters back into the weights.
    pub fn write_to(&self, weights: &mut [GaussianMixture]) {
        assert_eq!(weights.len() + 1, self.offsets.len(), "weight list does not match the view");
        for (r, w) in weights.iter_mut().enumerate() {
            let dim = w.dim();
            let mut p = self.offsets[r];
            for k in 0..w.len() {
                w.set_log_weight(k, self.values[p]);
                p += 1;
                w.mean_mut(k).copy_from_slice(&self.values[p..p + dim]);
                p += dim;
                if self.spherical {
                    let v = self.values[p].exp();
                    w.variance_mut(k).iter_mut().for_each(|x| *x = v);
                    p += 1;
                } else {
                    for (x, t) in w.variance_mut(k).iter_mut().zip(&self.values[p..p + dim]) {
                        *x = t.exp();
                    }
                    p += dim;
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Start of weight function `r`'s block.
    pub fn offset(&self, r: usize) -> usize {
        self.offsets[r]
    }
}

fn block_len(w: &GaussianMixture, spherical: bool) -> usize {
    w.len() * (1 + w.dim() + if spherical { 1 } else { w.dim() })
}

fn layout(weights: &[GaussianMixture], spherical: bool) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(weights.len() + 1);
    let mut total = 0;
    offsets.push(0);
    for w in weights {
        total += block_len(w, spherical);
        offsets.push(total);
    }
    offsets
}

/// Adds `sign ·` (gradient contribution of `outer`) for weight `w` into
/// `block`, laid out as in [`ParamView`].
fn accumulate_block(w: &GaussianMixture, terms: &[OuterTerm], d: usize, spherical: bool, sign: f64, block: &mut [f64]) {
    let dim = w.dim();
    let stride = 1 + dim + if spherical { 1 } else { dim };
    let mut first = vec![0.0; dim];
    let mut second = vec![0.0; dim];
    for k in 0..w.len() {
        let (mean, var) = (w.mean(k), w.variance(k));
        let mut mass = 0.0;
        first.iter_mut().for_each(|x| *x = 0.0);
        second.iter_mut().for_each(|x| *x = 0.0);
        for t in terms {
            let moments: Vec<_> = t
                .factors
                .iter()
                .enumerate()
                .map(|(s, f)| f.overlap_moments(&mean[s * d..(s + 1) * d], &var[s * d..(s + 1) * d]))
                .collect();
            let log_m = t.log_scale + moments.iter().map(|m| m.log_mass).sum::<f64>();
            let m = log_m.exp();
            if m == 0.0 {
                continue;
            }
            mass += m;
            for (s, mo) in moments.iter().enumerate() {
                for i in 0..d {
                    first[s * d + i] += m * mo.centered_first[i];
                    second[s * d + i] += m * mo.centered_second[i];
                }
            }
        }
        let rho = w.log_weight(k).exp();
        let b = &mut block[k * stride..(k + 1) * stride];
        b[0] += sign * rho * mass;
        for i in 0..dim {
            b[1 + i] += sign * rho / var[i] * first[i];
            let g_theta_sigma = sign * 0.5 * rho * (second[i] / var[i] - mass);
            if spherical {
                b[1 + dim] += g_theta_sigma;
            } else {
                b[1 + dim + i] += g_theta_sigma;
            }
        }
    }
}

/// Gradient of one sentence's loss, restricted to the weight functions it
/// touches: `(weight id, block)` pairs in increasing id order.
#[derive(Clone, Debug)]
pub struct SparseGradient {
    pub nll: f64,
    pub blocks: Vec<(usize, Vec<f64>)>,
}

pub fn sparse_gradient(weights: &[GaussianMixture], spherical: bool, d: usize, outers: &SentenceOuters) -> SparseGradient {
    let mut touched: Vec<usize> = outers.unconstrained.touched().chain(outers.gold.touched()).collect();
    touched.sort_unstable();
    touched.dedup();
    let blocks = touched
        .into_iter()
        .map(|r| {
            let w = &weights[r];
            let mut block = vec![0.0; block_len(w, spherical)];
            accumulate_block(w, outers.unconstrained.terms(r), d, spherical, 1.0, &mut block);
            accumulate_block(w, outers.gold.terms(r), d, spherical, -1.0, &mut block);
            (r, block)
        })
        .collect();
    SparseGradient {
        nll: outers.nll(),
        blocks,
    }
}

/// Dense gradient of the loss in [`ParamView`] coordinates.
pub fn gradients(weights: &[GaussianMixture], spherical: bool, d: usize, outers: &SentenceOuters) -> Vec<f64> {
    let offsets = layout(weights, spherical);
    let mut g = vec![0.0; *offsets.last().unwrap()];
    scatter(&mut g, &offsets, &sparse_gradient(weights, spherical, d, outers));
    g
}

fn scatter(dense: &mut [f64], offsets: &[usize], sparse: &SparseGradient) {
    for (r, block) in &sparse.blocks {
        for (x, b) in dense[offsets[*r]..offsets[r + 1]].iter_mut().zip(block) {
            *x += b;
        }
    }
}

/// Loss gradient summed over examples, in example order.
pub fn batch_gradient<M: Trainable>(model: &M, examples: &[&M::Example], prune: &PruneRule) -> Result<(Vec<f64>, f64)> {
    let offsets = layout(model.weights(), model.spherical());
    let mut g = vec![0.0; *offsets.last().unwrap()];
    let mut nll = 0.0;
    for ex in examples {
        let outers = model.sentence_outers(ex, prune)?;
        let s = sparse_gradient(model.weights(), model.spherical(), model.d(), &outers);
        nll += s.nll;
        scatter(&mut g, &offsets, &s);
    }
    Ok((g, nll))
}

/// Total loss over examples.
pub fn nll<M: Trainable>(model: &M, examples: &[M::Example], prune: &PruneRule) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        total += model.sentence_nll(ex, prune)?;
    }
    Ok(total)
}

/// Bias-corrected Adam. Parameters whose gradient is not finite keep their
/// value and moments for that step; `skipped` counts such events.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub skipped: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            skipped: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "optimizer holds {} moments, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            if !g.is_finite() {
                self.skipped += 1;
                continue;
            }
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Rescales `g` so its largest finite entry has magnitude at most `max`.
pub fn clip_inf_norm(g: &mut [f64], max: f64) {
    let norm = g.iter().filter(|x| x.is_finite()).fold(0.0f64, |a, x| a.max(x.abs()));
    if norm > max {
        let s = max / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub clip: f64,
    pub prune: PruneRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
            clip: 5.0,
            prune: PruneRule::TRAIN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_nll: f64,
    pub dev_score: Option<f64>,
    /// Sentences skipped during the epoch's updates (coverage / no parse).
    pub skipped_sentences: usize,
    /// Cumulative non-finite gradient entries skipped by the optimizer.
    pub skipped_updates: u64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<M> {
    /// Best model on the dev score, or the final model without one.
    pub model: M,
    pub best_epoch: usize,
    pub metrics: Vec<EpochMetrics>,
}

fn parallel_nll<M: Trainable>(model: &M, examples: &[M::Example], prune: &PruneRule) -> (f64, usize) {
    let results: Vec<Result<f64>> = examples.par_iter().map(|ex| model.sentence_nll(ex, prune)).collect();
    let mut total = 0.0;
    let mut failed = 0;
    for r in results {
        match r {
            Ok(v) => total += v,
            Err(_) => failed += 1,
        }
    }
    (total, failed)
}

/// Mini-batch Adam training. Metrics for epoch 0 describe the initial
/// model. `dev` scores a model (higher is better); the best-scoring
/// snapshot is returned.
pub fn train<M: Trainable>(
    model: M,
    examples: &[M::Example],
    config: &TrainConfig,
    dev: Option<&(dyn Fn(&M) -> f64 + Sync)>,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome<M>> {
    if examples.is_empty() {
        return Err(Error::Input("no training examples".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut model = model;
    let spherical = model.spherical();
    let d = model.d();
    let mut view = ParamView::from_weights(model.weights(), spherical);
    let offsets = layout(model.weights(), spherical);
    let mut adam = Adam::new(view.len(), config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();

    let clock = Instant::now();
    let (nll0, failed0) = parallel_nll(&model, examples, &config.prune);
    if failed0 == examples.len() {
        return Err(Error::Coverage(format!("all {failed0} training sentences failed")));
    }
    let mut metrics = vec![EpochMetrics {
        epoch: 0,
        train_nll: nll0,
        dev_score: dev.map(|f| f(&model)),
        skipped_sentences: failed0,
        skipped_updates: 0,
        seconds: clock.elapsed().as_secs_f64(),
    }];
    on_epoch(&metrics[0]);
    let mut best = (metrics[0].dev_score, 0, model.clone());

    for epoch in 1..=config.epochs {
        let clock = Instant::now();
        order.shuffle(&mut rng);
        let mut skipped = 0;
        for batch in order.chunks(config.batch_size) {
            let snapshot = &model;
            let grads: Vec<Result<SparseGradient>> = batch
                .par_iter()
                .map(|&i| {
                    snapshot
                        .sentence_outers(&examples[i], &config.prune)
                        .map(|o| sparse_gradient(snapshot.weights(), spherical, d, &o))
                })
                .collect();
            let mut g = vec![0.0; view.len()];
            for r in &grads {
                match r {
                    Ok(s) => scatter(&mut g, &offsets, s),
                    Err(e) => {
                        log::debug!("skipping sentence: {e}");
                        skipped += 1;
                    }
                }
            }
            clip_inf_norm(&mut g, config.clip);
            adam.step(&mut view.values, &g)?;
            view.write_to(model.weights_mut());
        }
        let (train_nll, _) = parallel_nll(&model, examples, &config.prune);
        let m = EpochMetrics {
            epoch,
            train_nll,
            dev_score: dev.map(|f| f(&model)),
            skipped_sentences: skipped,
            skipped_updates: adam.skipped,
            seconds: clock.elapsed().as_secs_f64(),
        };
        on_epoch(&m);
        if let Some(score) = m.dev_score {
            if best.0.is_none_or(|b| score > b) {
                best = (Some(score), epoch, model.clone());
            }
        }
        metrics.push(m);
    }
    let (model, best_epoch) = if best.0.is_some() {
        (best.2, best.1)
    } else {
        (model, config.epochs)
    };
    Ok(TrainOutcome {
        model,
        best_epoch,
        metrics,
    })
}

/// A training sentence for the parser: words, gold tree and the
/// constituent mask used by the unconstrained pass.
#[derive(Clone, Debug)]
pub struct ParseExample {
    pub words: Vec<TermId>,
    pub gold: Tree<NtId, TermId>,
    pub mask: SpanMask,
    gold_mask: SpanMask,
}

impl ParseExample {
    /// `p_min > 0` prunes the unconstrained pass with the baseline PCFG;
    /// the gold constituents are always kept.
    pub fn new(grammar: &Grammar, gold: Tree<NtId, TermId>, p_min: f64) -> Result<ParseExample> {
        let words: Vec<TermId> = gold.words().into_iter().copied().collect();
        let mask = pcfg_mask(grammar.pcfg(), &words, p_min);
        ParseExample::with_mask(grammar, gold, mask)
    }

    /// Uses `mask` (for instance from k-best trees) for the unconstrained
    /// pass, widened by the gold constituents.
    pub fn with_mask(grammar: &Grammar, gold: Tree<NtId, TermId>, mut mask: SpanMask) -> Result<ParseExample> {
        grammar.pcfg().check_derivable(&gold)?;
        let words: Vec<TermId> = gold.words().into_iter().copied().collect();
        let n = words.len();
        let nt = grammar.symbols().n_nonterminals();
        let gm = gold_mask(&gold, n, nt);
        mask.union_with(&gm)?;
        Ok(ParseExample {
            words,
            gold,
            mask,
            gold_mask: gm,
        })
    }
}

impl Trainable for Grammar {
    type Example = ParseExample;

    fn weights(&self) -> &[GaussianMixture] {
        Grammar::weights(self)
    }

    fn weights_mut(&mut self) -> &mut [GaussianMixture] {
        Grammar::weights_mut(self)
    }

    fn spherical(&self) -> bool {
        Grammar::spherical(self)
    }

    fn d(&self) -> usize {
        Grammar::d(self)
    }

    fn sentence_outers(&self, ex: &ParseExample, prune: &PruneRule) -> Result<SentenceOuters> {
        let full = parse_chart(self, &ex.words, &ex.mask, prune)?;
        let gold = parse_chart(self, &ex.words, &ex.gold_mask, prune)?;
        let log_z = sentence_weight(&full)?;
        let log_gold = sentence_weight(&gold)?;
        let mut unconstrained = ExpectedOuter::new(self.len());
        for_each_anchor(self, &ex.words, &full, |a, f| {
            unconstrained.push(a.rule(), -log_z, f.iter().map(|x| Arc::clone(x)).collect())
        })?;
        let mut gold_outer = ExpectedOuter::new(self.len());
        for_each_anchor(self, &ex.words, &gold, |a, f| {
            gold_outer.push(a.rule(), -log_gold, f.iter().map(|x| Arc::clone(x)).collect())
        })?;
        Ok(SentenceOuters {
            unconstrained,
            gold: gold_outer,
            log_z,
            log_gold,
        })
    }

    fn sentence_nll(&self, ex: &ParseExample, prune: &PruneRule) -> Result<f64> {
        let full = crate::inference::inside(self, &ex.words, &ex.mask, prune)?;
        let gold = crate::inference::inside(self, &ex.words, &ex.gold_mask, prune)?;
        Ok(sentence_weight(&full)? - sentence_weight(&gold)?)
    }
}

/// The two expected outers of a parse example (unconstrained, gold).
pub fn expected_outers(grammar: &Grammar, example: &ParseExample, prune: &PruneRule) -> Result<SentenceOuters> {
    grammar.sentence_outers(example, prune)
}
