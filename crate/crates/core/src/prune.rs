//! Relative-entropy pruning with a keep-list threshold override.
//!
//! An n-gram is removed when the estimated relative increase in training-set
//! perplexity falls below the threshold: the default theta, or theta_keep
//! for keep-list members. Orders are processed from high to low; decisions
//! within an order are evaluated against the pre-pass model state, and an
//! n-gram serving as context for a retained higher-order n-gram is never
//! removed.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::keeplist::KeepList;
use crate::model::BackoffModel;

const LN10: f64 = std::f64::consts::LN_10;

/// Pruning thresholds. theta_keep <= theta is the intended use (the keep
/// list relaxes pruning); theta_keep = 0 exempts keep-list members entirely.
#[derive(Debug, Clone, Copy)]
pub struct PruneConfig {
    pub theta: f64,
    pub theta_keep: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            theta: 6e-9,
            theta_keep: 0.0,
        }
    }
}

/// What pruning did, per order and to the keep list.
#[derive(Debug, Clone, Serialize)]
pub struct PruneReport {
    pub theta: f64,
    pub theta_keep: f64,
    /// Stored n-grams per order before and after, index 0 = unigrams.
    pub before: Vec<usize>,
    pub after: Vec<usize>,
    /// Keep-list entries found in the input model.
    pub keep_found: usize,
    /// Keep-list entries absent from the input model.
    pub keep_missing: usize,
    /// Keep-list entries retained although they fell below theta.
    pub keep_protected: usize,
    /// Keep-list entries still present in the output model.
    pub keep_retained: usize,
    /// N-grams below their threshold retained only for context closure.
    pub context_retained: usize,
}

impl PruneReport {
    pub fn pruned_total(&self) -> usize {
        self.before.iter().sum::<usize>() - self.after.iter().sum::<usize>()
    }
}

/// Chain-rule marginal probability of a history under the model itself.
/// Sequences beginning `<s>` are conditioned on the sentence start; `<s>`
/// alone carries its pseudo-zero unigram sentinel.
pub fn history_marginal(model: &BackoffModel, history: &[impl AsRef<str>]) -> f64 {
    let ids: Vec<u32> = history
        .iter()
        .map(|w| model.vocab().id_or_unk(w.as_ref()))
        .collect();
    history_marginal_ids(model, &ids)
}

pub fn history_marginal_ids(model: &BackoffModel, history: &[u32]) -> f64 {
    let start = if history.len() > 1 && history[0] == model.vocab().bos() {
        1
    } else {
        0
    };
    let mut p = 1.0;
    for i in start..history.len() {
        p *= 10f64.powf(model.logprob_ids(&history[..i], history[i]));
    }
    p
}

/// Estimated relative perplexity increase from removing the stored n-gram
/// (history, word). Errors unless the n-gram is stored, of order >= 2, and
/// not required as context by a stored higher-order n-gram.
pub fn delta_perplexity(
    model: &BackoffModel,
    history: &[impl AsRef<str>],
    word: &str,
) -> Result<f64> {
    let not_prunable = |msg: &str| {
        let mut words: Vec<String> = history.iter().map(|w| w.as_ref().to_string()).collect();
        words.push(word.to_string());
        Error::NotPrunable(format!("{} ({msg})", words.join(" ")))
    };
    if history.is_empty() {
        return Err(not_prunable("unigrams are never pruned"));
    }
    let mut key = match model.ids_of(history) {
        Some(ids) => ids,
        None => return Err(not_prunable("not stored")),
    };
    match model.vocab().id(word) {
        Some(id) => key.push(id),
        None => return Err(not_prunable("not stored")),
    }
    let entry = *model.entry(&key).ok_or_else(|| not_prunable("not stored"))?;
    if key.len() < model.order() && model.continuations(&key).next().is_some() {
        return Err(not_prunable("required as context"));
    }
    let h = &key[..key.len() - 1];
    let (sum_hi, sum_lo) = model
        .context_sums(h)
        .expect("stored n-gram implies its history has continuations");
    let alpha_log = model.entry(h).and_then(|e| e.bow).unwrap_or(0.0);
    let p_h = history_marginal_ids(model, h);
    Ok(rel_delta(
        model, h, key[key.len() - 1], entry.logp, sum_hi, sum_lo, alpha_log, p_h,
    ))
}

/// Stolcke relative-entropy estimate for removing (h, w), as the relative
/// perplexity change exp(D) - 1 clamped to >= 0.
#[allow(clippy::too_many_arguments)]
fn rel_delta(
    model: &BackoffModel,
    h: &[u32],
    w: u32,
    logp_hw: f64,
    sum_hi: f64,
    sum_lo: f64,
    alpha_log10: f64,
    p_h: f64,
) -> f64 {
    let p_hi = 10f64.powf(logp_hw);
    let logp_lo = model.logprob_ids(&h[1..], w);
    let p_lo = 10f64.powf(logp_lo);
    let num = crate::model::snap_mass(1.0 - sum_hi);
    let den = 1.0 - sum_lo;
    let alpha_new = ((num + p_hi) / (den + p_lo)).max(1e-99);
    let ln_alpha_new = alpha_new.ln();
    let ln_alpha_old = alpha_log10 * LN10;
    // expected log-ratio over the affected terms: the removed word now scored
    // through backoff, and the previously backed-off mass rescaled by the new
    // backoff weight
    let s = p_hi * (ln_alpha_new + logp_lo * LN10 - logp_hw * LN10)
        + num * (ln_alpha_new - ln_alpha_old);
    (-(p_h * s)).exp_m1().max(0.0)
}

/// Prune a model. Keep-list members are compared against theta_keep instead
/// of theta; absent keep entries are counted in the report, not errors.
pub fn prune(model: &BackoffModel, cfg: &PruneConfig, keep: &KeepList) -> (BackoffModel, PruneReport) {
    let mut m = model.clone();
    let order = m.order();
    let before = m.order_counts();

    if cfg.theta_keep > cfg.theta {
        log::warn!(
            "theta_keep {} exceeds theta {}: keep list tightens pruning",
            cfg.theta_keep,
            cfg.theta
        );
    }

    let mut keep_ids: HashSet<Vec<u32>> = HashSet::new();
    let mut keep_missing = 0usize;
    for ng in keep.iter() {
        let ids = m.ids_of(ng);
        match ids {
            Some(ids) if m.contains(&ids) => {
                keep_ids.insert(ids);
            }
            _ => keep_missing += 1,
        }
    }
    let keep_found = keep.len() - keep_missing;

    let below = |delta: f64, thr: f64| thr.is_infinite() || delta < thr;
    let mut context_retained = 0usize;
    let mut keep_protected = 0usize;

    for n in (2..=order).rev() {
        let mut protected: HashSet<Vec<u32>> = HashSet::new();
        if n < order {
            for (k, _) in m.iter_order(n + 1) {
                protected.insert(k[..n].to_vec());
            }
        }

        let entries: Vec<(Vec<u32>, f64)> =
            m.iter_order(n).map(|(k, e)| (k.to_vec(), e.logp)).collect();
        let mut removals: Vec<Vec<u32>> = Vec::new();
        let mut i = 0;
        while i < entries.len() {
            let h = entries[i].0[..n - 1].to_vec();
            let mut j = i;
            while j < entries.len() && entries[j].0[..n - 1] == h[..] {
                j += 1;
            }
            let (sum_hi, sum_lo) = m.context_sums(&h).unwrap();
            let alpha_log = m.entry(&h).and_then(|e| e.bow).unwrap_or(0.0);
            let p_h = history_marginal_ids(&m, &h);
            for (key, logp) in &entries[i..j] {
                let w = key[n - 1];
                let delta = rel_delta(&m, &h, w, *logp, sum_hi, sum_lo, alpha_log, p_h);
                let is_keep = keep_ids.contains(key);
                let thr = if is_keep { cfg.theta_keep } else { cfg.theta };
                let is_protected = protected.contains(key);
                if below(delta, thr) && !is_protected {
                    removals.push(key.clone());
                } else {
                    if is_protected && below(delta, thr) {
                        context_retained += 1;
                    }
                    if is_keep && below(delta, cfg.theta) {
                        keep_protected += 1;
                    }
                }
            }
            i = j;
        }
        for key in &removals {
            m.remove_ngram(key);
        }
        m.recompute_backoffs_at(n - 1);
    }

    // a removal at order n changes conditionals that feed backoff weights at
    // order n+1; one bottom-up sweep restores exact normalization everywhere
    m.recompute_all_backoffs();

    let keep_retained = keep_ids.iter().filter(|k| m.contains(k)).count();
    let report = PruneReport {
        theta: cfg.theta,
        theta_keep: cfg.theta_keep,
        before,
        after: m.order_counts(),
        keep_found,
        keep_missing,
        keep_protected,
        keep_retained,
        context_retained,
    };
    (m, report)
}
