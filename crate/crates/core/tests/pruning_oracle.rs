//! Brute-force oracle for the incremental pruning criterion: for every
//! prunable n-gram of a small-vocabulary fixture, build the explicitly
//! pruned model, compute the exact weighted KL divergence for the affected
//! history by vocabulary enumeration, convert it to a relative perplexity
//! change exactly as the implementation does, and require agreement to 1e-9.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use keeplm::counts::count_ngrams;
use keeplm::keeplist::{KeepList, Provenance};
use keeplm::model::BackoffModel;
use keeplm::prune::{delta_perplexity, history_marginal, prune, PruneConfig};
use keeplm::smoothing::{estimate, SmoothingConfig};

const LN10: f64 = std::f64::consts::LN_10;

/// Exact relative perplexity increase from removing `key`, computed on an
/// explicitly pruned copy of the model.
fn oracle_delta(model: &BackoffModel, key: &[u32]) -> f64 {
    let h = &key[..key.len() - 1];
    let mut pruned = model.clone();
    assert!(pruned.remove_ngram(key));
    pruned.recompute_backoff(h);

    // D = p(h) * sum_w p(w|h) * ln(p(w|h) / p'(w|h)); histories other than h
    // are untouched by the removal and contribute nothing
    let mut sum = 0.0;
    for w in model.vocab().ids() {
        let lp = model.logprob_ids(h, w);
        let lq = pruned.logprob_ids(h, w);
        sum += 10f64.powf(lp) * (lp - lq) * LN10;
    }
    let p_h = history_marginal(model, &model.words_of(h));
    (p_h * sum).exp_m1().max(0.0)
}

fn prunable_keys(model: &BackoffModel) -> Vec<Vec<u32>> {
    let mut keys = Vec::new();
    for n in 2..=model.order() {
        for (key, _) in model.iter_order(n) {
            if n < model.order() && model.continuations(key).next().is_some() {
                continue;
            }
            keys.push(key.to_vec());
        }
    }
    keys
}

fn check_fixture(model: &BackoffModel) -> usize {
    assert!(model.vocab().len() <= 13, "oracle fixtures need small vocabularies");
    let keys = prunable_keys(model);
    for key in &keys {
        let words = model.words_of(key);
        let inc = delta_perplexity(model, &words[..words.len() - 1], &words[words.len() - 1])
            .unwrap_or_else(|e| panic!("{words:?}: {e}"));
        let orc = oracle_delta(model, key);
        assert!(
            (inc - orc).abs() < 1e-9,
            "{words:?}: incremental {inc} vs oracle {orc}"
        );
    }
    keys.len()
}

fn sents(lines: &[&str]) -> Vec<Vec<String>> {
    lines
        .iter()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect()
}

fn random_corpus(seed: u64, n_sentences: usize, vocab: &[&str]) -> Vec<Vec<String>> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n_sentences)
        .map(|_| {
            let len = rng.gen_range(1..=7);
            (0..len)
                .map(|_| {
                    let r: f64 = rng.gen();
                    let idx = ((r * r) * vocab.len() as f64) as usize;
                    vocab[idx.min(vocab.len() - 1)].to_string()
                })
                .collect()
        })
        .collect()
}

#[test]
fn incremental_delta_matches_oracle_on_small_fixtures() {
    let small = ["red", "green", "blue", "cyan", "pink"];
    let wide = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];
    let mut total = 0;
    for (order, seed, n, vocab) in [
        (2usize, 11u64, 40usize, &small[..]),
        (3, 12, 60, &small[..]),
        (4, 13, 80, &small[..]),
        (3, 14, 120, &wide[..]),
        (4, 15, 150, &wide[..]),
    ] {
        let corpus = random_corpus(seed, n, vocab);
        let counts = count_ngrams(&corpus, order).unwrap();
        let model = estimate(&counts, &SmoothingConfig::default()).unwrap();
        total += check_fixture(&model);
    }
    // hand-written corpus with heavy structure (near-redundant n-grams)
    let corpus = sents(&[
        "play the song", "play the song", "play the game", "stop the song",
        "stop the game", "play a song", "play a game", "stop a song",
    ]);
    let counts = count_ngrams(&corpus, 3).unwrap();
    let model = estimate(&counts, &SmoothingConfig::default()).unwrap();
    total += check_fixture(&model);
    assert!(total > 300, "only {total} prunable n-grams checked");
}

/// Pruning at theta = 6e-9 on a 1000-sentence corpus removes something but
/// far from everything. Frozen after oracle validation.
#[test]
fn theta_paper_default_prunes_strictly_between_bounds() {
    let vocab = ["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
    let corpus = random_corpus(42, 1000, &vocab);
    let counts = count_ngrams(&corpus, 4).unwrap();
    let model = estimate(&counts, &SmoothingConfig::default()).unwrap();
    let (pruned, report) = prune(
        &model,
        &PruneConfig { theta: 6e-9, theta_keep: 0.0 },
        &KeepList::new(Provenance::File),
    );
    assert!(report.pruned_total() > 0, "nothing pruned at 6e-9");
    assert!(
        pruned.total_ngrams() > pruned.ngram_count(1),
        "everything above unigrams pruned"
    );
    assert!(pruned.total_ngrams() < model.total_ngrams());
    pruned.check_normalization(1e-6).unwrap();
}

/// Held-out perplexity never improves from pruning on these fixtures. Large
/// thresholds can genuinely improve held-out perplexity by removing
/// over-discounted singletons (the zero-clamped criterion marks such
/// beneficial removals prunable), so the fixtures pin small thresholds.
#[test]
fn perplexity_degrades_gracefully() {
    let vocab = ["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
    for seed in [11u64, 21] {
        let train = random_corpus(seed, 400, &vocab);
        let heldout = random_corpus(seed + 1000, 80, &vocab);
        let counts = count_ngrams(&train, 3).unwrap();
        let model = estimate(&counts, &SmoothingConfig::default()).unwrap();
        let base = model.perplexity(&heldout);
        for theta in [1e-9, 1e-8, 1e-7, 1e-6, 1e-5] {
            let (pruned, _) = prune(
                &model,
                &PruneConfig { theta, theta_keep: 0.0 },
                &KeepList::new(Provenance::File),
            );
            let ppl = pruned.perplexity(&heldout);
            assert!(
                ppl >= base - 1e-6,
                "seed {seed} theta {theta}: pruned beats unpruned on held-out: {ppl} < {base}"
            );
        }
    }
}
