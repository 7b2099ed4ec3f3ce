//! Phoneme-level noisy channel standing in for the TTS-and-recognize audio
//! path: per-position substitutions and deletions, per-gap insertions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::phonetics::{Phoneme, PhonemeInventory, Pron};

/// Channel parameters. Probabilities are per position (substitution,
/// deletion) or per gap (insertion); their sum must stay below one.
/// Substitution targets come from the confusion weights when present,
/// otherwise uniformly from the inventory.
#[derive(Debug, Clone)]
pub struct NoiseChannel {
    pub p_sub: f64,
    pub p_del: f64,
    pub p_ins: f64,
    pub confusion: Option<BTreeMap<Phoneme, Vec<(Phoneme, f64)>>>,
    pub seed: u64,
}

impl NoiseChannel {
    pub fn new(p_sub: f64, p_del: f64, p_ins: f64, seed: u64) -> NoiseChannel {
        assert!(p_sub >= 0.0 && p_del >= 0.0 && p_ins >= 0.0);
        assert!(p_sub + p_del + p_ins < 1.0, "noise probabilities must sum below 1");
        NoiseChannel {
            p_sub,
            p_del,
            p_ins,
            confusion: None,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> NoiseChannel {
        NoiseChannel { seed, ..self.clone() }
    }

    /// Corrupt one phoneme sequence. `stream` separates independent draws
    /// under one channel seed (callers pass a per-utterance index).
    pub fn corrupt(&self, phonemes: &[Phoneme], inventory: &PhonemeInventory, stream: u64) -> Pron {
        let mut rng =
            ChaCha8Rng::seed_from_u64(self.seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let symbols: Vec<&Phoneme> = inventory.phonemes().collect();
        let mut out = Pron::new();
        for pos in 0..=phonemes.len() {
            if !symbols.is_empty() && rng.gen::<f64>() < self.p_ins {
                out.push(symbols[rng.gen_range(0..symbols.len())].clone());
            }
            if pos == phonemes.len() {
                break;
            }
            let r = rng.gen::<f64>();
            if r < self.p_del {
                continue;
            }
            if r < self.p_del + self.p_sub {
                out.push(self.substitute(&phonemes[pos], &symbols, &mut rng));
            } else {
                out.push(phonemes[pos].clone());
            }
        }
        out
    }

    fn substitute(&self, p: &Phoneme, symbols: &[&Phoneme], rng: &mut ChaCha8Rng) -> Phoneme {
        if let Some(conf) = &self.confusion {
            if let Some(targets) = conf.get(p) {
                let total: f64 = targets.iter().map(|(_, w)| w).sum();
                if total > 0.0 {
                    let mut r = rng.gen::<f64>() * total;
                    for (t, w) in targets {
                        r -= w;
                        if r <= 0.0 {
                            return t.clone();
                        }
                    }
                }
            }
        }
        let others: Vec<&&Phoneme> = symbols.iter().filter(|s| **s != p).collect();
        if others.is_empty() {
            return p.clone();
        }
        (*others[rng.gen_range(0..others.len())]).clone()
    }
}
