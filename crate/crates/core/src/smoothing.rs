//! Katz backoff estimation with Good-Turing discounting.

use std::collections::BTreeMap;

use crate::counts::NGramCounts;
use crate::error::{Error, Result};
use crate::model::{BackoffModel, ModelBuilder, ModelMeta, PSEUDO_ZERO};

/// Estimation parameters. Counts 1..=k_gt are Good-Turing discounted with
/// Katz normalization; counts above k_gt are left at their relative
/// frequency. N-grams below the per-order minimum count are dropped (their
/// mass flows into the backoff weight), except where context closure forces
/// retention.
#[derive(Debug, Clone)]
pub struct SmoothingConfig {
    /// Max discounted count per order; entries beyond the list reuse the last value.
    pub k_gt: Vec<u64>,
    /// Minimum count per order; entries beyond the list reuse the last value.
    pub min_counts: Vec<u64>,
    /// Give `<unk>` the leftover unigram mass. When false (or when no mass is
    /// freed) `<unk>` receives `unk_floor`, renormalized.
    pub unk_leftover: bool,
    pub unk_floor: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            k_gt: vec![7],
            min_counts: vec![1],
            unk_leftover: true,
            unk_floor: 1e-7,
        }
    }
}

impl SmoothingConfig {
    pub fn with_k_gt(k: u64) -> Self {
        SmoothingConfig {
            k_gt: vec![k],
            ..Default::default()
        }
    }

    fn k_for(&self, order: usize) -> u64 {
        let k = *self.k_gt.get(order - 1).or(self.k_gt.last()).unwrap_or(&7);
        k.max(1)
    }

    fn min_for(&self, order: usize) -> u64 {
        let m = *self
            .min_counts
            .get(order - 1)
            .or(self.min_counts.last())
            .unwrap_or(&1);
        m.max(1)
    }
}

/// Good-Turing discount ratios d[c] for c in 1..=k at one order, with the
/// Katz normalization so discounting vanishes above k. Degenerate
/// count-of-counts disable discounting at that count with a warning.
fn discount_ratios(counts: &NGramCounts, order: usize, k: u64) -> Vec<f64> {
    let mut coc: BTreeMap<u64, u64> = BTreeMap::new();
    for &c in counts.table(order).values() {
        if c <= k + 1 {
            *coc.entry(c).or_insert(0) += 1;
        }
    }
    let n = |c: u64| coc.get(&c).copied().unwrap_or(0) as f64;
    let mut d = vec![1.0; k as usize + 1];

    if n(1) == 0.0 {
        // nothing observed once: no unseen-mass estimate at this order
        if !counts.table(order).is_empty() {
            log::warn!("order {order}: no singletons; Good-Turing discounting disabled");
        }
        return d;
    }
    let big_a = (k as f64 + 1.0) * n(k + 1) / n(1);
    if 1.0 - big_a <= 0.0 {
        log::warn!("order {order}: Katz normalization denominator non-positive; discounting disabled");
        return d;
    }
    for c in 1..=k {
        let cf = c as f64;
        if n(c) == 0.0 {
            continue; // no n-gram has this count; ratio is unused
        }
        if n(c + 1) == 0.0 {
            log::warn!("order {order}: count-of-counts n_{} = 0; no discount at count {c}", c + 1);
            continue;
        }
        let c_star = (cf + 1.0) * n(c + 1) / n(c);
        let ratio = (c_star / cf - big_a) / (1.0 - big_a);
        if ratio <= 0.0 || ratio > 1.0 {
            log::warn!("order {order}: discount {ratio:.4} at count {c} out of range; disabled");
            continue;
        }
        d[c as usize] = ratio;
    }
    d
}

/// Estimate a Katz backoff model from n-gram counts.
pub fn estimate(counts: &NGramCounts, cfg: &SmoothingConfig) -> Result<BackoffModel> {
    if counts.table(1).is_empty() {
        return Err(Error::NoTrainingData);
    }
    let order = counts.order();
    let vocab = counts.vocab().clone();
    let bos = vocab.bos();
    let unk = vocab.unk();

    let mut builder = ModelBuilder::new(order, vocab);

    // unigrams
    {
        let d = discount_ratios(counts, 1, cfg.k_for(1));
        let k = cfg.k_for(1);
        let total = counts.total_tokens() as f64;
        let mut probs: BTreeMap<u32, f64> = BTreeMap::new();
        for (key, &c) in counts.table(1) {
            let ratio = if c <= k { d[c as usize] } else { 1.0 };
            probs.insert(key[0], ratio * c as f64 / total);
        }
        let sum: f64 = probs.values().sum();
        let beta = 1.0 - sum;
        if cfg.unk_leftover && beta >= cfg.unk_floor {
            *probs.entry(unk).or_insert(0.0) += beta;
        } else {
            // no freed mass: floor <unk> and renormalize the rest
            let scale = (1.0 - cfg.unk_floor) / sum;
            for p in probs.values_mut() {
                *p *= scale;
            }
            *probs.entry(unk).or_insert(0.0) += cfg.unk_floor;
        }
        for (w, p) in probs {
            builder.insert(&[w], p.log10(), None);
        }
        builder.insert(&[bos], PSEUDO_ZERO, None);
    }

    // higher orders: conditional probabilities per history
    for n in 2..=order {
        let d = discount_ratios(counts, n, cfg.k_for(n));
        let k = cfg.k_for(n);
        let table = counts.table(n);
        let mut hist: &[u32] = &[];
        let mut group: Vec<(&Vec<u32>, u64)> = Vec::new();
        let flush = |builder: &mut ModelBuilder, group: &mut Vec<(&Vec<u32>, u64)>| {
            if group.is_empty() {
                return;
            }
            let total: f64 = group.iter().map(|(_, c)| *c as f64).sum();
            for (key, c) in group.iter() {
                let ratio = if *c <= k { d[*c as usize] } else { 1.0 };
                let p = ratio * *c as f64 / total;
                builder.insert(key, p.log10(), None);
            }
            group.clear();
        };
        for (key, &c) in table {
            let h = &key[..n - 1];
            if h != hist {
                flush(&mut builder, &mut group);
                hist = h;
            }
            group.push((key, c));
        }
        flush(&mut builder, &mut group);
    }

    let mut model = builder.build_unchecked();

    // minimum-count retention, high order first so forced contexts are known
    if (2..=order).any(|n| cfg.min_for(n) > 1) {
        apply_min_counts(&mut model, counts, cfg);
    }

    model.recompute_all_backoffs();
    model.set_meta(ModelMeta {
        training_tokens: counts.total_tokens(),
        smoothing: format!(
            "good-turing k_gt={:?} min_counts={:?}",
            cfg.k_gt, cfg.min_counts
        ),
    });
    model.validate()?;
    Ok(model)
}

fn apply_min_counts(model: &mut BackoffModel, counts: &NGramCounts, cfg: &SmoothingConfig) {
    use std::collections::HashSet;
    let order = model.order();
    let mut forced: HashSet<Vec<u32>> = HashSet::new();
    for n in (2..=order).rev() {
        let min = cfg.min_for(n);
        let doomed: Vec<Vec<u32>> = model
            .iter_order(n)
            .filter(|(key, _)| {
                counts.get(key) < min && !forced.contains(*key)
            })
            .map(|(key, _)| key.to_vec())
            .collect();
        for key in doomed {
            model.remove_ngram(&key);
        }
        for (key, _) in model.iter_order(n) {
            forced.insert(key[..n - 1].to_vec());
        }
    }
}
