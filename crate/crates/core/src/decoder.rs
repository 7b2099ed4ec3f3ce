//! Lattice beam decoder over phoneme observations: a word hypothesis may
//! consume any contiguous span whose edit distance to one of its
//! pronunciations is within d_max; path score combines the negated edit
//! distance with the scaled language-model score.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::BackoffModel;
use crate::phonetics::{Lexicon, Phoneme};
use crate::vocab::Vocabulary;

/// Beam width, language-model scale, and acoustic slack per word span.
#[derive(Debug, Clone, Copy)]
pub struct DecoderParams {
    pub beam: usize,
    pub lambda: f64,
    pub d_max: usize,
}

impl Default for DecoderParams {
    fn default() -> Self {
        DecoderParams {
            beam: 64,
            lambda: 1.0,
            d_max: 1,
        }
    }
}

/// Best path found: hypothesis words plus the score decomposition
/// score = acoustic + lambda * lm.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub hypothesis: Vec<String>,
    pub score: f64,
    pub acoustic: f64,
    pub lm: f64,
}

/// Lexicon words with interned phoneme ids and model vocabulary ids,
/// prepared once per (lexicon, vocabulary) pair and reused across decodes.
#[derive(Debug)]
pub struct PronIndex {
    words: Vec<String>,
    word_vids: Vec<u32>,
    /// (word index, interned pronunciation)
    prons: Vec<(usize, Vec<u16>)>,
    phoneme_ids: HashMap<Phoneme, u16>,
    max_pron_len: usize,
}

const UNKNOWN_PHONEME: u16 = u16::MAX;

impl PronIndex {
    pub fn build(lexicon: &Lexicon, vocab: &Vocabulary) -> PronIndex {
        let mut index = PronIndex {
            words: Vec::new(),
            word_vids: Vec::new(),
            prons: Vec::new(),
            phoneme_ids: HashMap::new(),
            max_pron_len: 0,
        };
        for word in lexicon.words() {
            let wi = index.words.len();
            index.words.push(word.to_string());
            index.word_vids.push(vocab.id_or_unk(word));
            for pron in lexicon.prons(word).unwrap() {
                let encoded: Vec<u16> = pron.iter().map(|p| index.intern(p)).collect();
                index.max_pron_len = index.max_pron_len.max(encoded.len());
                index.prons.push((wi, encoded));
            }
        }
        index
    }

    fn intern(&mut self, p: &Phoneme) -> u16 {
        let next = self.phoneme_ids.len() as u16;
        *self.phoneme_ids.entry(p.clone()).or_insert(next)
    }

    /// Encode an observation; phonemes outside the lexicon map to a
    /// sentinel that matches nothing.
    pub fn encode(&self, phonemes: &[Phoneme]) -> Vec<u16> {
        phonemes
            .iter()
            .map(|p| self.phoneme_ids.get(p).copied().unwrap_or(UNKNOWN_PHONEME))
            .collect()
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }
}

/// One admissible (word, span) edge starting at a fixed position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpanCand {
    pub word: usize,
    pub len: usize,
    pub dist: usize,
}

/// For every start position, all (word, span length, distance) candidates
/// with edit distance <= d_max to one of the word's pronunciations. Spans
/// are at least one phoneme long.
pub fn span_candidates(index: &PronIndex, observed: &[u16], d_max: usize) -> Vec<Vec<SpanCand>> {
    let n = observed.len();
    let mut out: Vec<Vec<SpanCand>> = vec![Vec::new(); n.max(1)];
    let mut best: HashMap<(usize, usize), usize> = HashMap::new();
    for start in 0..n {
        best.clear();
        let window = &observed[start..];
        for (wi, pron) in &index.prons {
            let plen = pron.len();
            let min_len = plen.saturating_sub(d_max).max(1);
            let max_len = (plen + d_max).min(window.len());
            if min_len > max_len {
                continue;
            }
            // one DP of the pronunciation against the window prefix gives
            // the distance for every span length at once
            let cols = max_len;
            let mut prev: Vec<usize> = (0..=cols).collect();
            let mut curr = vec![0usize; cols + 1];
            for (i, &p) in pron.iter().enumerate() {
                curr[0] = i + 1;
                for j in 0..cols {
                    let sub = prev[j] + usize::from(p != window[j]);
                    curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
                }
                std::mem::swap(&mut prev, &mut curr);
            }
            for len in min_len..=max_len {
                let d = prev[len];
                if d <= d_max {
                    let e = best.entry((*wi, len)).or_insert(usize::MAX);
                    if d < *e {
                        *e = d;
                    }
                }
            }
        }
        let mut cands: Vec<SpanCand> = best
            .iter()
            .map(|(&(word, len), &dist)| SpanCand { word, len, dist })
            .collect();
        cands.sort_by_key(|c| (c.word, c.len));
        out[start] = cands;
    }
    out
}

#[derive(Debug, Clone)]
struct State {
    hist: Vec<u32>,
    acoustic: f64,
    lm: f64,
    back: Option<(usize, usize, usize)>, // (position, state index, word index)
}

impl State {
    fn score(&self, lambda: f64) -> f64 {
        self.acoustic + lambda * self.lm
    }
}

/// Beam search over precomputed span candidates. States are keyed by
/// (position, LM history up to order-1); ties break lexicographically on
/// the history for determinism.
pub fn decode_spans(
    index: &PronIndex,
    cands: &[Vec<SpanCand>],
    n_phonemes: usize,
    model: &BackoffModel,
    params: &DecoderParams,
) -> Result<DecodeResult> {
    assert!(params.beam >= 1 && params.lambda > 0.0);
    let hist_cap = model.order().saturating_sub(1).max(1);
    let mut arena: Vec<Vec<State>> = vec![Vec::new(); n_phonemes + 1];
    let mut pending: Vec<Vec<State>> = vec![Vec::new(); n_phonemes + 1];
    pending[0].push(State {
        hist: vec![model.vocab().bos()],
        acoustic: 0.0,
        lm: 0.0,
        back: None,
    });

    for pos in 0..=n_phonemes {
        let mut states = std::mem::take(&mut pending[pos]);
        if states.is_empty() {
            continue;
        }
        // dedupe by history keeping the best score, then apply the beam
        states.sort_by(|a, b| {
            b.score(params.lambda)
                .partial_cmp(&a.score(params.lambda))
                .unwrap()
                .then_with(|| a.hist.cmp(&b.hist))
        });
        let mut kept: Vec<State> = Vec::new();
        let mut seen: HashMap<Vec<u32>, ()> = HashMap::new();
        for s in states {
            if seen.contains_key(&s.hist) {
                continue;
            }
            seen.insert(s.hist.clone(), ());
            kept.push(s);
            if kept.len() >= params.beam {
                break;
            }
        }
        arena[pos] = kept;

        if pos == n_phonemes {
            break;
        }
        for (si, s) in arena[pos].iter().enumerate() {
            for c in &cands[pos] {
                let end = pos + c.len;
                if end > n_phonemes {
                    continue;
                }
                let vid = index.word_vids[c.word];
                let lp = model.logprob_ids(&s.hist, vid);
                let mut hist = s.hist.clone();
                hist.push(vid);
                if hist.len() > hist_cap {
                    hist.remove(0);
                }
                pending[end].push(State {
                    hist,
                    acoustic: s.acoustic - c.dist as f64,
                    lm: s.lm + lp,
                    back: Some((pos, si, c.word)),
                });
            }
        }
    }

    // terminate with </s>; states are already sorted best-first with
    // lexicographic tie-break, so strict improvement keeps determinism
    let eos = model.vocab().eos();
    let mut best: Option<(f64, usize)> = None;
    for (si, s) in arena[n_phonemes].iter().enumerate() {
        let total = s.score(params.lambda) + params.lambda * model.logprob_ids(&s.hist, eos);
        let better = match best {
            Some((b, _)) => total > b,
            None => true,
        };
        if better {
            best = Some((total, si));
        }
    }
    let (_, final_si) = best.ok_or(Error::UnreachableInput)?;

    let acoustic = arena[n_phonemes][final_si].acoustic;
    let lm = arena[n_phonemes][final_si].lm
        + model.logprob_ids(&arena[n_phonemes][final_si].hist, eos);

    let mut words_rev: Vec<usize> = Vec::new();
    let mut pos = n_phonemes;
    let mut si = final_si;
    loop {
        let s = &arena[pos][si];
        match s.back {
            Some((ppos, psi, word)) => {
                words_rev.push(word);
                pos = ppos;
                si = psi;
            }
            None => break,
        }
    }
    words_rev.reverse();
    let hypothesis: Vec<String> = words_rev.iter().map(|&w| index.word(w).to_string()).collect();

    Ok(DecodeResult {
        hypothesis,
        score: acoustic + params.lambda * lm,
        acoustic,
        lm,
    })
}

/// Convenience entry point: build the index, find span candidates, then
/// run the beam search.
pub fn decode(
    observed: &[Phoneme],
    lexicon: &Lexicon,
    model: &BackoffModel,
    params: &DecoderParams,
) -> Result<DecodeResult> {
    let index = PronIndex::build(lexicon, model.vocab());
    let encoded = index.encode(observed);
    let cands = span_candidates(&index, &encoded, params.d_max);
    decode_spans(&index, &cands, encoded.len(), model, params)
}
