//! N-gram counting over sentence corpora.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

/// Occurrence counts for all n-gram orders 1..=N over a padded corpus.
///
/// Sentences are padded with one `<s>` in front and one `</s>` at the back;
/// `<s>` is never counted as a unigram target (it only appears in contexts).
#[derive(Debug, Clone)]
pub struct NGramCounts {
    order: usize,
    vocab: Vocabulary,
    /// tables[n-1] maps an n-token id sequence to its count. No zero counts stored.
    tables: Vec<BTreeMap<Vec<u32>, u64>>,
    total_tokens: u64,
}

impl NGramCounts {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn table(&self, order: usize) -> &BTreeMap<Vec<u32>, u64> {
        &self.tables[order - 1]
    }

    /// Total number of counted tokens (unigram targets, `</s>` included).
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn get(&self, ngram: &[u32]) -> u64 {
        if ngram.is_empty() || ngram.len() > self.order {
            return 0;
        }
        self.tables[ngram.len() - 1].get(ngram).copied().unwrap_or(0)
    }

    /// Count of an n-gram given as words; unseen words yield count 0.
    pub fn get_words(&self, ngram: &[String]) -> u64 {
        let mut ids = Vec::with_capacity(ngram.len());
        for w in ngram {
            match self.vocab.id(w) {
                Some(id) => ids.push(id),
                None => return 0,
            }
        }
        self.get(&ids)
    }

    /// Sum of all counts at one order.
    pub fn order_total(&self, order: usize) -> u64 {
        self.tables[order - 1].values().sum()
    }
}

/// Count n-grams of orders 1..=order over a corpus of tokenized sentences.
pub fn count_ngrams<S: AsRef<str>>(corpus: &[Vec<S>], order: usize) -> Result<NGramCounts> {
    assert!(order >= 1, "order must be >= 1");
    let sentences: Vec<&Vec<S>> = corpus.iter().filter(|s| !s.is_empty()).collect();
    if sentences.is_empty() {
        return Err(Error::NoTrainingData);
    }

    let mut vocab = Vocabulary::new();
    let mut tables: Vec<BTreeMap<Vec<u32>, u64>> = vec![BTreeMap::new(); order];
    let mut total_tokens = 0u64;
    let bos = vocab.bos();

    for sent in sentences {
        let mut ids = Vec::with_capacity(sent.len() + 2);
        ids.push(bos);
        for tok in sent.iter() {
            ids.push(vocab.intern(tok.as_ref()));
        }
        ids.push(vocab.eos());

        for n in 1..=order {
            for window in ids.windows(n) {
                if n == 1 && window[0] == bos {
                    continue;
                }
                *tables[n - 1].entry(window.to_vec()).or_insert(0) += 1;
            }
        }
        total_tokens += (ids.len() - 1) as u64; // every padded token except <s>
    }

    Ok(NGramCounts {
        order,
        vocab,
        tables,
        total_tokens,
    })
}

/// Split corpus text into whitespace-tokenized sentences, one per line.
/// Blank lines are skipped.
pub fn tokenize_corpus(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .filter(|s: &Vec<String>| !s.is_empty())
        .collect()
}
