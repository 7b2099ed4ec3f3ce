//! Katz backoff n-gram model: order-indexed sorted storage keyed by token
//! ids, log-probability queries with backoff, and perplexity evaluation.
//!
//! All probabilities and backoff weights cross this interface as log10
//! values, following the ARPA convention. Values are floored at the
//! pseudo-zero sentinel -99.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

/// ARPA pseudo-zero: the smallest representable log10 value.
pub const PSEUDO_ZERO: f64 = -99.0;

/// Hard cap on the model order, sized for stack-allocated lookup keys.
pub const MAX_ORDER: usize = 15;

/// One stored n-gram: log10 probability and, for n-grams of order < N that
/// have stored continuations, a log10 backoff weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub logp: f64,
    pub bow: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ModelMeta {
    pub training_tokens: u64,
    pub smoothing: String,
}

/// Immutable-after-construction backoff model. Concurrent readers are safe.
#[derive(Debug, Clone)]
pub struct BackoffModel {
    order: usize,
    vocab: Vocabulary,
    /// levels[n-1]: sorted map from n-token id sequences to entries.
    levels: Vec<BTreeMap<Vec<u32>, Entry>>,
    meta: ModelMeta,
}

/// Floor a log10 value at the pseudo-zero sentinel.
pub fn clamp_log(v: f64) -> f64 {
    if v.is_finite() {
        v.max(PSEUDO_ZERO)
    } else {
        PSEUDO_ZERO
    }
}

enum BowResolution {
    NoContinuations,
    Weight(f64),
    Rescale(f64),
}

/// Freed probability mass below accumulation noise is treated as exactly
/// zero, keeping backoff weights stable when a history's continuations
/// cover its full distribution.
pub(crate) fn snap_mass(x: f64) -> f64 {
    if x < 1e-12 {
        0.0
    } else {
        x
    }
}

impl BackoffModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn set_meta(&mut self, meta: ModelMeta) {
        self.meta = meta;
    }

    /// Number of stored n-grams at one order.
    pub fn ngram_count(&self, order: usize) -> usize {
        self.levels[order - 1].len()
    }

    pub fn order_counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.len()).collect()
    }

    pub fn total_ngrams(&self) -> usize {
        self.levels.iter().map(|l| l.len()).sum()
    }

    pub fn entry(&self, ngram: &[u32]) -> Option<&Entry> {
        if ngram.is_empty() || ngram.len() > self.order {
            return None;
        }
        self.levels[ngram.len() - 1].get(ngram)
    }

    pub fn contains(&self, ngram: &[u32]) -> bool {
        self.entry(ngram).is_some()
    }

    /// All stored n-grams of one order, in sorted id order.
    pub fn iter_order(&self, order: usize) -> impl Iterator<Item = (&[u32], &Entry)> {
        self.levels[order - 1].iter().map(|(k, e)| (k.as_slice(), e))
    }

    /// Stored continuations of a history: all (history, w) entries.
    pub fn continuations<'a>(
        &'a self,
        history: &'a [u32],
    ) -> impl Iterator<Item = (&'a [u32], &'a Entry)> + 'a {
        let level = &self.levels[history.len()];
        level
            .range(history.to_vec()..)
            .take_while(move |(k, _)| k.starts_with(history))
            .map(|(k, e)| (k.as_slice(), e))
    }

    /// Map an n-gram of words to ids; None if any word is out of vocabulary.
    pub fn ids_of(&self, ngram: &[impl AsRef<str>]) -> Option<Vec<u32>> {
        ngram.iter().map(|w| self.vocab.id(w.as_ref())).collect()
    }

    pub fn words_of(&self, ngram: &[u32]) -> Vec<String> {
        ngram.iter().map(|&id| self.vocab.word(id).to_string()).collect()
    }

    /// log10 p(word | history) by the standard backoff recursion. The last
    /// order-1 tokens of `history` are used; unknown words map to `<unk>`;
    /// unstored histories back off with weight 1.
    pub fn logprob(&self, history: &[impl AsRef<str>], word: &str) -> f64 {
        let mut hist = [0u32; MAX_ORDER];
        let start = history.len().saturating_sub(self.order - 1);
        let hlen = history.len() - start;
        for (i, w) in history[start..].iter().enumerate() {
            hist[i] = self.vocab.id_or_unk(w.as_ref());
        }
        self.logprob_ids(&hist[..hlen], self.vocab.id_or_unk(word))
    }

    /// Id-level variant of [`logprob`](Self::logprob).
    pub fn logprob_ids(&self, history: &[u32], word: u32) -> f64 {
        let start0 = history.len().saturating_sub(self.order - 1);
        let mut key = [0u32; MAX_ORDER + 1];
        let mut acc = 0.0f64;
        let mut start = start0;
        loop {
            let hist = &history[start..];
            let klen = hist.len() + 1;
            key[..hist.len()].copy_from_slice(hist);
            key[hist.len()] = word;
            if let Some(e) = self.levels[klen - 1].get(&key[..klen]) {
                return (acc + e.logp).min(0.0);
            }
            if hist.is_empty() {
                // word absent from the unigram table: score as <unk>
                let unk = self.levels[0]
                    .get([self.vocab.unk()].as_slice())
                    .map(|e| e.logp)
                    .unwrap_or(PSEUDO_ZERO);
                return (acc + unk).min(0.0);
            }
            if let Some(he) = self.levels[hist.len() - 1].get(hist) {
                if let Some(b) = he.bow {
                    acc += b;
                }
            }
            start += 1;
        }
    }

    /// log10 probability of a sentence (tokens without padding) and the
    /// number of predicted tokens (`</s>` included, `<s>` excluded).
    pub fn sentence_logprob(&self, tokens: &[impl AsRef<str>]) -> (f64, usize) {
        let mut hist: Vec<u32> = Vec::with_capacity(tokens.len() + 1);
        hist.push(self.vocab.bos());
        let mut sum = 0.0;
        for t in tokens {
            let w = self.vocab.id_or_unk(t.as_ref());
            sum += self.logprob_ids(&hist, w);
            hist.push(w);
        }
        sum += self.logprob_ids(&hist, self.vocab.eos());
        (sum, tokens.len() + 1)
    }

    /// Corpus perplexity: 10^(-total_log10 / T) with T counting predicted
    /// tokens including `</s>`.
    pub fn perplexity(&self, corpus: &[Vec<String>]) -> f64 {
        let mut total = 0.0;
        let mut tokens = 0usize;
        for sent in corpus.iter().filter(|s| !s.is_empty()) {
            let (lp, t) = self.sentence_logprob(sent);
            total += lp;
            tokens += t;
        }
        assert!(tokens > 0, "perplexity of an empty corpus");
        10f64.powf(-total / tokens as f64)
    }

    /// Remove one stored n-gram. Returns whether it was present. The caller
    /// is responsible for restoring consistency afterwards (context closure
    /// and backoff weights, see [`recompute_backoff`](Self::recompute_backoff)).
    pub fn remove_ngram(&mut self, ngram: &[u32]) -> bool {
        if ngram.is_empty() || ngram.len() > self.order {
            return false;
        }
        self.levels[ngram.len() - 1].remove(ngram).is_some()
    }

    /// Sum of stored continuation probabilities of a history and the sum of
    /// the same words' probabilities under the shortened history. These are
    /// the complements of the numerator and denominator of the backoff
    /// weight. None if the history has no stored continuations.
    pub fn context_sums(&self, history: &[u32]) -> Option<(f64, f64)> {
        let mut sum_hi = 0.0;
        let mut sum_lo = 0.0;
        let mut any = false;
        // collect to release the borrow before the backoff queries
        let conts: Vec<(u32, f64)> = self
            .continuations(history)
            .map(|(k, e)| (k[k.len() - 1], e.logp))
            .collect();
        for (w, logp) in conts {
            any = true;
            sum_hi += 10f64.powf(logp);
            sum_lo += 10f64.powf(self.logprob_ids(&history[1..], w));
        }
        if any {
            Some((sum_hi, sum_lo))
        } else {
            None
        }
    }

    /// Recompute and store the backoff weight of one history:
    /// alpha(h) = (1 - sum stored p(w|h)) / (1 - sum p(w|h_shortened)).
    ///
    /// When the shortened-history distribution is fully concentrated on the
    /// stored continuations (denominator ~ 0) while discounting freed mass,
    /// the freed mass has nowhere to back off to; the stored continuation
    /// probabilities are rescaled to sum to one instead.
    pub fn recompute_backoff(&mut self, history: &[u32]) {
        let resolution = match self.context_sums(history) {
            None => BowResolution::NoContinuations,
            Some((sum_hi, sum_lo)) => {
                let num = snap_mass(1.0 - sum_hi);
                let den = 1.0 - sum_lo;
                if den > 1e-10 {
                    BowResolution::Weight(clamp_log((num / den).log10()))
                } else if num == 0.0 {
                    BowResolution::Weight(0.0)
                } else {
                    log::warn!(
                        "history {:?} leaves no backoff mass; rescaling its continuations",
                        self.words_of(history)
                    );
                    BowResolution::Rescale(-(sum_hi.log10()))
                }
            }
        };
        match resolution {
            BowResolution::NoContinuations => {
                if let Some(e) = self.levels[history.len() - 1].get_mut(history) {
                    e.bow = None;
                }
            }
            BowResolution::Weight(b) => {
                if let Some(e) = self.levels[history.len() - 1].get_mut(history) {
                    e.bow = Some(b);
                }
            }
            BowResolution::Rescale(shift) => {
                let keys: Vec<Vec<u32>> = self
                    .continuations(history)
                    .map(|(k, _)| k.to_vec())
                    .collect();
                let level = &mut self.levels[history.len()];
                for k in keys {
                    let e = level.get_mut(&k).unwrap();
                    e.logp = (e.logp + shift).min(0.0);
                }
                if let Some(e) = self.levels[history.len() - 1].get_mut(history) {
                    e.bow = Some(0.0);
                }
            }
        }
    }

    /// Recompute backoff weights for every history at one order.
    pub fn recompute_backoffs_at(&mut self, hist_order: usize) {
        let keys: Vec<Vec<u32>> = self.levels[hist_order - 1].keys().cloned().collect();
        for k in keys {
            self.recompute_backoff(&k);
        }
    }

    /// Recompute all backoff weights bottom-up, leaving a fully consistent
    /// model (per-history distributions sum to one).
    pub fn recompute_all_backoffs(&mut self) {
        for n in 1..self.order {
            self.recompute_backoffs_at(n);
        }
    }

    /// Check ARPA context closure and value sanity.
    pub fn validate(&self) -> Result<()> {
        for n in 2..=self.order {
            for key in self.levels[n - 1].keys() {
                let prefix = &key[..n - 1];
                if !self.levels[n - 2].contains_key(prefix) {
                    return Err(Error::InvalidArgument(format!(
                        "context closure violated: {:?} stored without its prefix {:?}",
                        self.words_of(key),
                        self.words_of(prefix)
                    )));
                }
            }
        }
        for level in &self.levels {
            for (key, e) in level {
                if !(e.logp <= 0.0) || e.logp < PSEUDO_ZERO - 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "log probability of {:?} out of range: {}",
                        self.words_of(key),
                        e.logp
                    )));
                }
            }
        }
        Ok(())
    }

    /// Enumerate sum_w p(w|h) over the whole vocabulary for every stored
    /// history; Err with the worst offender when any sum is off by more than
    /// `tol`. Intended for small-vocabulary fixtures.
    pub fn check_normalization(&self, tol: f64) -> std::result::Result<(), String> {
        let check = |hist: &[u32]| -> std::result::Result<(), String> {
            let sum: f64 = self
                .vocab
                .ids()
                .map(|w| 10f64.powf(self.logprob_ids(hist, w)))
                .sum();
            if (sum - 1.0).abs() > tol {
                return Err(format!(
                    "distribution for history {:?} sums to {}",
                    self.words_of(hist),
                    sum
                ));
            }
            Ok(())
        };
        check(&[])?;
        for n in 1..self.order {
            let keys: Vec<Vec<u32>> = self.levels[n - 1].keys().cloned().collect();
            for h in keys {
                check(&h)?;
            }
        }
        Ok(())
    }
}

/// Builder for assembling a model from raw entries (estimation, ARPA read,
/// synthetic test fixtures).
#[derive(Debug)]
pub struct ModelBuilder {
    model: BackoffModel,
}

impl ModelBuilder {
    pub fn new(order: usize, vocab: Vocabulary) -> Self {
        assert!(
            order >= 1 && order <= MAX_ORDER,
            "order must be in 1..={MAX_ORDER}"
        );
        ModelBuilder {
            model: BackoffModel {
                order,
                vocab,
                levels: vec![BTreeMap::new(); order],
                meta: ModelMeta::default(),
            },
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.model.vocab
    }

    pub fn insert(&mut self, ngram: &[u32], logp: f64, bow: Option<f64>) {
        assert!(!ngram.is_empty() && ngram.len() <= self.model.order);
        self.model.levels[ngram.len() - 1].insert(
            ngram.to_vec(),
            Entry {
                logp: clamp_log(logp),
                bow: bow.map(clamp_log),
            },
        );
    }

    pub fn set_meta(&mut self, meta: ModelMeta) {
        self.model.meta = meta;
    }

    /// Validate context closure and hand out the model.
    pub fn build(self) -> Result<BackoffModel> {
        self.model.validate()?;
        Ok(self.model)
    }

    /// Hand out the model without validation (trusted internal callers).
    pub fn build_unchecked(self) -> BackoffModel {
        self.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Uniform unigram model over n regular words.
    fn uniform_unigram(n: usize) -> BackoffModel {
        let mut vocab = Vocabulary::new();
        let words: Vec<u32> = (0..n - 1)
            .map(|i| vocab.intern(&format!("w{i}")))
            .collect();
        let eos = vocab.eos();
        let bos = vocab.bos();
        let unk = vocab.unk();
        let mut b = ModelBuilder::new(1, vocab);
        // n "real" outcomes: n-1 words plus </s>, tiny mass on <unk>
        let p = ((1.0 - 1e-9) / n as f64).log10();
        for w in words {
            b.insert(&[w], p, None);
        }
        b.insert(&[eos], p, None);
        b.insert(&[unk], (1e-9f64).log10(), None);
        b.insert(&[bos], PSEUDO_ZERO, None);
        b.build().unwrap()
    }

    #[test]
    fn uniform_model_perplexity_is_vocab_size() {
        let m = uniform_unigram(4);
        let corpus = vec![
            vec!["w0".to_string(), "w1".to_string()],
            vec!["w2".to_string()],
        ];
        let ppl = m.perplexity(&corpus);
        assert!((ppl - 4.0).abs() < 1e-6, "ppl = {ppl}");
    }

    #[test]
    fn logprob_backs_off_with_weight() {
        // 2-gram model: vocab a, b; history a stores only (a,b).
        let mut vocab = Vocabulary::new();
        let a = vocab.intern("a");
        let bw = vocab.intern("b");
        let eos = vocab.eos();
        let bos = vocab.bos();
        let unk = vocab.unk();
        let mut mb = ModelBuilder::new(2, vocab);
        mb.insert(&[a], (0.4f64).log10(), Some((0.5f64).log10()));
        mb.insert(&[bw], (0.3f64).log10(), None);
        mb.insert(&[eos], (0.3f64 - 1e-7).log10(), None);
        mb.insert(&[unk], (1e-7f64).log10(), None);
        mb.insert(&[bos], PSEUDO_ZERO, Some(0.0));
        mb.insert(&[a, bw], (0.8f64).log10(), None);
        let m = mb.build().unwrap();

        // stored bigram returns the stored value exactly
        assert_eq!(m.logprob(&["a"], "b"), (0.8f64).log10());
        // absent bigram: alpha(a) * p(</s>)
        let got = m.logprob(&["a"], "</s>");
        let want = (0.5f64).log10() + (0.3f64 - 1e-7).log10();
        assert!((got - want).abs() < 1e-12);
        // unstored history backs off with weight 1
        let got = m.logprob(&["b"], "a");
        assert!((got - (0.4f64).log10()).abs() < 1e-12);
        // unknown words map to <unk>
        assert_eq!(m.logprob(&["a"], "zzz"), m.logprob(&["a"], "<unk>"));
    }

    #[test]
    fn logprob_never_positive() {
        let m = uniform_unigram(3);
        for w in ["w0", "w1", "</s>", "zzz", "<unk>"] {
            assert!(m.logprob(&[] as &[&str], w) <= 0.0);
        }
    }

    #[test]
    fn builder_rejects_closure_violation() {
        let mut vocab = Vocabulary::new();
        let a = vocab.intern("a");
        let bw = vocab.intern("b");
        let mut mb = ModelBuilder::new(2, vocab);
        mb.insert(&[a], -0.5, None);
        mb.insert(&[bw, a], -0.2, None); // prefix b missing
        assert!(mb.build().is_err());
    }

    #[test]
    fn remove_and_recompute_keeps_normalization() {
        // hand-built normalized bigram model over 2 words
        let mut vocab = Vocabulary::new();
        let a = vocab.intern("a");
        let bw = vocab.intern("b");
        let eos = vocab.eos();
        let bos = vocab.bos();
        let unk = vocab.unk();
        let mut mb = ModelBuilder::new(2, vocab);
        mb.insert(&[a], (0.5f64).log10(), None);
        mb.insert(&[bw], (0.2f64).log10(), None);
        mb.insert(&[eos], (0.3f64 - 1e-7).log10(), None);
        mb.insert(&[unk], (1e-7f64).log10(), None);
        mb.insert(&[bos], PSEUDO_ZERO, None);
        mb.insert(&[a, bw], (0.6f64).log10(), None);
        mb.insert(&[a, eos], (0.2f64).log10(), None);
        let mut m = mb.build_unchecked();
        m.recompute_all_backoffs();
        m.check_normalization(1e-9).unwrap();

        assert!(m.remove_ngram(&[a, eos]));
        m.recompute_backoff(&[a]);
        m.check_normalization(1e-9).unwrap();
    }
}
