//! Latent vector grammars with Gaussian-mixture weight functions.
//!
//! Nonterminal occurrences carry continuous subtype vectors; every rule owns a
//! diagonal Gaussian mixture over the vectors of its parent and children.
//! Inside/outside scores are then mixtures too, and parsing, posterior
//! computation and gradient training are all exact mixture algebra.
//!
//! Module map:
//! - [`gm`]: mixture algebra (product, marginalization, pruning, moments)
//! - [`corpus`]: treebank / CoNLL-U reading, binarization, unknown words
//! - [`grammar`]: symbols, rules, baseline PCFG, model files
//! - [`inference`]: charts, inside/outside, posteriors, max-rule decoding, masks
//! - [`learning`]: expected outers, analytic gradients, Adam, training loop
//! - [`tagger`]: the same machinery over right-linear (HMM) structure
//! - [`oracle`]: brute-force references used by tests and `lveg verify`
//! - [`eval`]: labeled bracket scoring
//! - [`synthetic`]: toy data generators

pub mod corpus;
pub mod error;
pub mod eval;
pub mod gm;
pub mod grammar;
pub mod inference;
pub mod learning;
pub mod oracle;
pub mod synthetic;
pub mod tagger;

pub use error::{Error, Result};
pub use gm::{GaussianComponent, GaussianMixture, PruneRule, Slot};
pub use grammar::{Grammar, Pcfg, RuleKind, SymbolTable};
