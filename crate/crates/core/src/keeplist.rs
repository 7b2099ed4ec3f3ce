//! Keep lists: n-grams exempted from the default pruning threshold.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// How a keep list was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Qep,
    Eep,
    Aeep,
    Random,
    File,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Qep => "qep",
            Provenance::Eep => "eep",
            Provenance::Aeep => "aeep",
            Provenance::Random => "random",
            Provenance::File => "file",
        }
    }
}

/// Deduplicated set of n-grams of order >= 2, stored as word sequences so a
/// list built from queries can be applied to any model.
#[derive(Debug, Clone)]
pub struct KeepList {
    ngrams: BTreeSet<Vec<String>>,
    provenance: Provenance,
}

impl KeepList {
    pub fn new(provenance: Provenance) -> Self {
        KeepList {
            ngrams: BTreeSet::new(),
            provenance,
        }
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Insert one n-gram. Unigrams are rejected by the type's invariant.
    pub fn insert(&mut self, ngram: &[String]) {
        assert!(ngram.len() >= 2, "keep lists contain no unigrams");
        self.ngrams.insert(ngram.to_vec());
    }

    pub fn contains(&self, ngram: &[String]) -> bool {
        self.ngrams.contains(ngram)
    }

    pub fn len(&self) -> usize {
        self.ngrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ngrams.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<String>> {
        self.ngrams.iter()
    }

    pub fn is_subset(&self, other: &KeepList) -> bool {
        self.ngrams.is_subset(&other.ngrams)
    }

    /// One n-gram per line, tokens space-separated; `#` lines are comments.
    pub fn parse(text: &str, name: &str) -> Result<KeepList> {
        let mut kl = KeepList::new(Provenance::File);
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let toks: Vec<String> = t.split_whitespace().map(str::to_string).collect();
            if toks.len() < 2 {
                return Err(Error::parse(
                    name,
                    i + 1,
                    format!("keep-list entries must have at least 2 tokens, found {t:?}"),
                ));
            }
            kl.ngrams.insert(toks);
        }
        Ok(kl)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for ng in &self.ngrams {
            out.push_str(&ng.join(" "));
            out.push('\n');
        }
        out
    }
}
