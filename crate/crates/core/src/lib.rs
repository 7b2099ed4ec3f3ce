//! Backoff n-gram language modeling with keep-list entropy pruning.
//!
//! The crate covers the full desk-scale pipeline: counting and Katz/Good-
//! Turing estimation, ARPA interchange, relative-entropy pruning with a
//! keep-list threshold override, synthetic query generation, a rule-based
//! pronunciation layer, a noisy-channel recognition simulator with a
//! lattice beam decoder, error labeling, textual feature extraction, and a
//! random-forest misrecognition classifier for keep-list selection.

pub mod align;
pub mod arpa;
pub mod channel;
pub mod counts;
pub mod decoder;
pub mod eep;
pub mod error;
pub mod features;
pub mod forest;
pub mod keeplist;
pub mod model;
pub mod phonetics;
pub mod prune;
pub mod querygen;
pub mod smoothing;
pub mod vocab;

pub use align::{align, wer, Alignment, WerStats};
pub use channel::NoiseChannel;
pub use counts::{count_ngrams, tokenize_corpus, NGramCounts};
pub use decoder::{decode, DecodeResult, DecoderParams};
pub use eep::{error_keeplist, label_instances, run_loop, ErrorCorpus, Instance, LabeledDataset};
pub use error::{Error, Result};
pub use features::{extract, extract_batch, FeatureContext, FeatureSchema, FeatureVector};
pub use forest::{predict_proba, random_keeplist, recall_at_k, select_top_k, top_features, train, ForestConfig, RandomForest};
pub use keeplist::{KeepList, Provenance};
pub use model::{BackoffModel, Entry, ModelBuilder};
pub use phonetics::{G2PRules, Lexicon, PhonemeInventory};
pub use prune::{delta_perplexity, history_marginal, prune, PruneConfig, PruneReport};
pub use querygen::{expand, extract_qep_keeplist, partition_bands, Band, EntityCatalog, QuerySet, Template};
pub use smoothing::{estimate, SmoothingConfig};
pub use vocab::Vocabulary;
