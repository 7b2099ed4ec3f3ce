//! Pronunciations: lexicon, rule-based grapheme-to-phoneme conversion,
//! phoneme edit distance, and edit-distance-1 confusion neighborhoods.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::vocab::{BOS, EOS};

pub type Phoneme = String;
pub type Pron = Vec<Phoneme>;

/// Ordered rewrite rules (longest match first) plus a per-letter fallback
/// map that guarantees every alphabetic string converts.
#[derive(Debug, Clone)]
pub struct G2PRules {
    /// (grapheme pattern, phonemes), sorted by descending pattern length,
    /// original order among equal lengths.
    rules: Vec<(String, Pron)>,
    fallback: BTreeMap<char, Pron>,
}

impl G2PRules {
    pub fn new(rules: Vec<(String, Pron)>, fallback: BTreeMap<char, Pron>) -> Self {
        let mut rules = rules;
        rules.sort_by_key(|(pat, _)| std::cmp::Reverse(pat.chars().count()));
        G2PRules { rules, fallback }
    }

    /// Rules file: `pattern TAB phonemes`; fallback lines `letter TAB phonemes`
    /// are single-character patterns. Every letter a-z needs a fallback.
    pub fn parse(text: &str, name: &str) -> Result<G2PRules> {
        let mut rules = Vec::new();
        let mut fallback = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (pat, phon) = t
                .split_once('\t')
                .ok_or_else(|| Error::parse(name, i + 1, "expected pattern TAB phonemes"))?;
            let pron: Pron = phon.split_whitespace().map(str::to_string).collect();
            if pron.is_empty() {
                return Err(Error::parse(name, i + 1, "empty phoneme sequence"));
            }
            let pat = pat.trim();
            if pat.is_empty() {
                return Err(Error::parse(name, i + 1, "empty pattern"));
            }
            let mut chars = pat.chars();
            let first = chars.next().unwrap();
            if chars.next().is_none() {
                fallback.insert(first, pron.clone());
            }
            rules.push((pat.to_string(), pron));
        }
        for c in 'a'..='z' {
            if !fallback.contains_key(&c) {
                return Err(Error::parse(name, 0, format!("no fallback rule for letter {c:?}")));
            }
        }
        Ok(G2PRules::new(rules, fallback))
    }

    /// Deterministic left-to-right longest-match conversion.
    pub fn g2p(&self, word: &str) -> Pron {
        let chars: Vec<char> = word.chars().collect();
        let mut out = Pron::new();
        let mut pos = 0;
        'outer: while pos < chars.len() {
            let rest: String = chars[pos..].iter().collect();
            for (pat, pron) in &self.rules {
                if rest.starts_with(pat.as_str()) {
                    out.extend(pron.iter().cloned());
                    pos += pat.chars().count();
                    continue 'outer;
                }
            }
            if let Some(pron) = self.fallback.get(&chars[pos]) {
                out.extend(pron.iter().cloned());
            }
            // characters without any rule (digits, apostrophes) are skipped
            pos += 1;
        }
        out
    }
}

/// Word pronunciations. Pre-defined entries come from the lexicon file;
/// G2P-generated ones can be added to cover a vocabulary. A reverse index
/// from pronunciation to words is maintained eagerly.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<Pron>>,
    predefined: BTreeSet<String>,
    reverse: HashMap<Pron, BTreeSet<String>>,
}

impl Lexicon {
    /// Lexicon file: `word TAB phoneme phoneme ...`, several lines per word
    /// allowed. All entries parsed this way count as pre-defined.
    pub fn parse(text: &str, name: &str) -> Result<Lexicon> {
        let mut lex = Lexicon::default();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (word, phon) = t
                .split_once('\t')
                .ok_or_else(|| Error::parse(name, i + 1, "expected word TAB phonemes"))?;
            let pron: Pron = phon.split_whitespace().map(str::to_string).collect();
            if pron.is_empty() {
                return Err(Error::parse(name, i + 1, "empty pronunciation"));
            }
            lex.add(word.trim(), pron, true);
        }
        Ok(lex)
    }

    pub fn add(&mut self, word: &str, pron: Pron, predefined: bool) {
        let prons = self.entries.entry(word.to_string()).or_default();
        if !prons.contains(&pron) {
            self.reverse
                .entry(pron.clone())
                .or_default()
                .insert(word.to_string());
            prons.push(pron);
        }
        if predefined {
            self.predefined.insert(word.to_string());
        }
    }

    /// Add G2P pronunciations for every listed word (including words that
    /// already have pre-defined entries, so reverse lookup covers both).
    pub fn add_generated<'a>(&mut self, words: impl Iterator<Item = &'a str>, rules: &G2PRules) {
        for w in words {
            if w == BOS || w == EOS {
                continue;
            }
            let pron = rules.g2p(w);
            if !pron.is_empty() {
                self.add(w, pron, false);
            }
        }
    }

    pub fn prons(&self, word: &str) -> Option<&[Pron]> {
        self.entries.get(word).map(|v| v.as_slice())
    }

    /// Pre-defined pronunciations only (for the lexicon-agreement features).
    pub fn predefined_prons(&self, word: &str) -> Option<&[Pron]> {
        if self.predefined.contains(word) {
            self.entries.get(word).map(|v| v.as_slice())
        } else {
            None
        }
    }

    pub fn is_predefined(&self, word: &str) -> bool {
        self.predefined.contains(word)
    }

    /// The spoken form of a word: its first lexicon pronunciation, or the
    /// G2P result when absent.
    pub fn spoken(&self, word: &str, rules: &G2PRules) -> Pron {
        match self.entries.get(word) {
            Some(prons) => prons[0].clone(),
            None => rules.g2p(word),
        }
    }

    /// All words with this exact pronunciation.
    pub fn reverse_lookup(&self, pron: &[Phoneme]) -> BTreeSet<String> {
        self.reverse.get(pron).cloned().unwrap_or_default()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Phoneme symbols with lexicon-wide frequencies and the infrequent set
/// (bottom quantile of frequency mass, default 10%).
#[derive(Debug, Clone)]
pub struct PhonemeInventory {
    freqs: BTreeMap<Phoneme, f64>,
    infrequent: BTreeSet<Phoneme>,
}

impl PhonemeInventory {
    pub fn from_lexicon(lexicon: &Lexicon, quantile: f64) -> PhonemeInventory {
        let mut counts: BTreeMap<Phoneme, u64> = BTreeMap::new();
        let mut total = 0u64;
        for word in lexicon.words().collect::<Vec<_>>() {
            for pron in lexicon.prons(word).unwrap() {
                for p in pron {
                    *counts.entry(p.clone()).or_insert(0) += 1;
                    total += 1;
                }
            }
        }
        let freqs: BTreeMap<Phoneme, f64> = counts
            .iter()
            .map(|(p, &c)| (p.clone(), c as f64 / total as f64))
            .collect();
        // ascending frequency; take phonemes until the quantile mass is covered
        let mut by_freq: Vec<(&Phoneme, f64)> = freqs.iter().map(|(p, &f)| (p, f)).collect();
        by_freq.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(b.0)));
        let mut infrequent = BTreeSet::new();
        let mut cum = 0.0;
        for (p, f) in by_freq {
            if cum + f <= quantile + 1e-12 {
                infrequent.insert(p.clone());
                cum += f;
            } else {
                break;
            }
        }
        PhonemeInventory { freqs, infrequent }
    }

    pub fn phonemes(&self) -> impl Iterator<Item = &Phoneme> {
        self.freqs.keys()
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn frequency(&self, p: &str) -> f64 {
        self.freqs.get(p).copied().unwrap_or(0.0)
    }

    pub fn is_infrequent(&self, p: &str) -> bool {
        self.infrequent.contains(p)
    }
}

/// Per-word G2P concatenation over an n-gram, sentence-boundary tokens
/// skipped. Deliberately not the lexicon pronunciation, even for words the
/// lexicon covers.
pub fn pronounce_ngram(rules: &G2PRules, ngram: &[impl AsRef<str>]) -> Pron {
    let mut out = Pron::new();
    for tok in ngram {
        let t = tok.as_ref();
        if t == BOS || t == EOS {
            continue;
        }
        out.extend(rules.g2p(t));
    }
    out
}

/// Unit-cost Levenshtein distance over arbitrary comparable items.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

pub fn phoneme_edit_distance(a: &[Phoneme], b: &[Phoneme]) -> usize {
    edit_distance(a, b)
}

/// All phoneme sequences at edit distance exactly 1 from `p`, built from
/// one substitution, insertion, or deletion over the inventory. Excludes
/// `p` itself.
pub fn confusion_neighbors(inv: &PhonemeInventory, p: &[Phoneme]) -> BTreeSet<Pron> {
    assert!(!p.is_empty());
    let mut out: BTreeSet<Pron> = BTreeSet::new();
    for i in 0..p.len() {
        // deletion (of a single phoneme this yields the empty sequence)
        let mut del: Pron = p.to_vec();
        del.remove(i);
        out.insert(del);
        // substitution
        for q in inv.phonemes() {
            if q != &p[i] {
                let mut sub: Pron = p.to_vec();
                sub[i] = q.clone();
                out.insert(sub);
            }
        }
    }
    for i in 0..=p.len() {
        for q in inv.phonemes() {
            let mut ins: Pron = p.to_vec();
            ins.insert(i, q.clone());
            out.insert(ins);
        }
    }
    out.remove(p);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules_fixture() -> G2PRules {
        let text = "\
ph\tF
a\tAH
b\tB
c\tK
d\tD
e\tIY
f\tF
g\tG
h\tHH
i\tIH
j\tJH
k\tK
l\tL
m\tM
n\tN
o\tOW
p\tP
q\tK
r\tR
s\tS
t\tT
u\tUW
v\tV
w\tW
x\tK S
y\tY
z\tZ
";
        G2PRules::parse(text, "rules").unwrap()
    }

    fn p(s: &str) -> Pron {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn longest_match_applies_first() {
        let r = rules_fixture();
        assert_eq!(r.g2p("phone"), p("F OW N IY"));
        assert_eq!(r.g2p("a"), p("AH"));
        // deterministic
        assert_eq!(r.g2p("phone"), r.g2p("phone"));
    }

    #[test]
    fn g2p_total_on_alphabetic_strings() {
        let r = rules_fixture();
        for w in ["zzz", "q", "aeiou", "xylophone"] {
            assert!(!r.g2p(w).is_empty());
        }
    }

    #[test]
    fn pronounce_ngram_concatenates_and_skips_boundaries() {
        let r = rules_fixture();
        let one = pronounce_ngram(&r, &["cat"]);
        assert_eq!(one, r.g2p("cat"));
        let two = pronounce_ngram(&r, &["phone", "home"]);
        let mut want = r.g2p("phone");
        want.extend(r.g2p("home"));
        assert_eq!(two, want);
        let padded = pronounce_ngram(&r, &["<s>", "cat"]);
        assert_eq!(padded, r.g2p("cat"));
    }

    #[test]
    fn edit_distance_basics() {
        assert_eq!(phoneme_edit_distance(&p("A B C"), &p("A B C")), 0);
        assert_eq!(phoneme_edit_distance(&p("A B C"), &p("A X C")), 1);
        assert_eq!(phoneme_edit_distance(&p("A"), &p("")), 1);
        assert_eq!(phoneme_edit_distance(&p(""), &p("A B")), 2);
    }

    /// Exponential recursive definition, for cross-checking short inputs.
    fn recursive_distance(a: &[Phoneme], b: &[Phoneme]) -> usize {
        match (a.len(), b.len()) {
            (0, n) => n,
            (m, 0) => m,
            _ => {
                let sub = recursive_distance(&a[..a.len() - 1], &b[..b.len() - 1])
                    + usize::from(a[a.len() - 1] != b[b.len() - 1]);
                let del = recursive_distance(&a[..a.len() - 1], b) + 1;
                let ins = recursive_distance(a, &b[..b.len() - 1]) + 1;
                sub.min(del).min(ins)
            }
        }
    }

    #[test]
    fn edit_distance_matches_recursive_oracle() {
        let alphabet = ["A", "B", "C"];
        let mut seqs: Vec<Pron> = vec![vec![]];
        for _ in 0..4 {
            let mut next = Vec::new();
            for s in &seqs {
                for a in alphabet {
                    let mut t = s.clone();
                    t.push(a.to_string());
                    next.push(t);
                }
            }
            seqs.extend(next);
        }
        let short: Vec<&Pron> = seqs.iter().filter(|s| s.len() <= 3).collect();
        for a in &short {
            for b in &short {
                assert_eq!(phoneme_edit_distance(a, b), recursive_distance(a, b));
            }
        }
    }

    fn small_inventory(symbols: &[&str]) -> PhonemeInventory {
        let mut lex = Lexicon::default();
        for (i, s) in symbols.iter().enumerate() {
            lex.add(&format!("w{i}"), vec![s.to_string()], true);
        }
        PhonemeInventory::from_lexicon(&lex, 0.0)
    }

    #[test]
    fn confusion_neighbors_exactly_distance_one() {
        let inv = small_inventory(&["A", "B", "C", "D"]);
        for seq in [p("A"), p("A B"), p("B C A"), p("A A")] {
            let neighbors = confusion_neighbors(&inv, &seq);
            assert!(!neighbors.contains(&seq));
            for n in &neighbors {
                assert_eq!(phoneme_edit_distance(n, &seq), 1, "{n:?} vs {seq:?}");
            }
            // brute force: enumerate all sequences of length L-1..=L+1
            let mut brute = BTreeSet::new();
            for len in seq.len().saturating_sub(1)..=seq.len() + 1 {
                let mut all: Vec<Pron> = vec![vec![]];
                for _ in 0..len {
                    let mut next = Vec::new();
                    for s in &all {
                        for q in inv.phonemes() {
                            let mut t = s.clone();
                            t.push(q.clone());
                            next.push(t);
                        }
                    }
                    all = next;
                }
                for cand in all {
                    if phoneme_edit_distance(&cand, &seq) == 1 {
                        brute.insert(cand);
                    }
                }
            }
            assert_eq!(neighbors, brute);
        }
    }

    #[test]
    fn reverse_lookup_handles_homophones() {
        let mut lex = Lexicon::default();
        lex.add("bear", p("B EH R"), true);
        lex.add("bare", p("B EH R"), true);
        lex.add("cat", p("K AE T"), true);
        let hits = lex.reverse_lookup(&p("B EH R"));
        assert_eq!(hits.len(), 2);
        assert!(hits.contains("bear") && hits.contains("bare"));
        assert_eq!(lex.reverse_lookup(&p("K AE T")).len(), 1);
        assert!(lex.reverse_lookup(&p("Z Z")).is_empty());
    }

    #[test]
    fn inventory_frequencies_and_infrequent_set() {
        let mut lex = Lexicon::default();
        lex.add("aa", p("A A"), true);
        lex.add("ab", p("A B"), true);
        lex.add("ba", p("B A"), true);
        lex.add("qq", p("Q"), true);
        let inv = PhonemeInventory::from_lexicon(&lex, 0.15);
        let total: f64 = inv.phonemes().map(|p| inv.frequency(p)).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(inv.is_infrequent("Q")); // 1/7 of the mass, below 15%
        assert!(!inv.is_infrequent("A"));
    }

    #[test]
    fn generated_entries_extend_reverse_lookup() {
        let r = rules_fixture();
        let mut lex = Lexicon::default();
        lex.add("cat", p("K AE T"), true);
        lex.add_generated(["cat", "bat"].into_iter(), &r);
        // g2p(cat) = K AH T, now reverse-mapped alongside the lexicon form
        assert!(lex.reverse_lookup(&r.g2p("cat")).contains("cat"));
        assert!(lex.reverse_lookup(&r.g2p("bat")).contains("bat"));
        assert!(lex.is_predefined("cat"));
        assert!(!lex.is_predefined("bat"));
    }
}
