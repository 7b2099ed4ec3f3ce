//! The end-to-end experiment: train, prune with each keep-list strategy,
//! build size-matched baselines, and evaluate simulated WER on the test
//! sets. Fully deterministic under the config seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use keeplm::align::{align, Alignment, WerStats};
use keeplm::arpa::write_arpa;
use keeplm::channel::NoiseChannel;
use keeplm::counts::{count_ngrams, tokenize_corpus};
use keeplm::decoder::{decode_spans, span_candidates, DecoderParams, PronIndex};
use keeplm::eep::{error_keeplist, label_instances, run_loop, write_dataset, LabeledDataset};
use keeplm::features::{extract_batch, project_dataset, FeatureContext};
use keeplm::forest::{
    predict_proba, random_keeplist, recall_at_k, select_top_k, top_features, train, write_forest,
    ForestConfig, RandomForest,
};
use keeplm::keeplist::{KeepList, Provenance};
use keeplm::model::BackoffModel;
use keeplm::phonetics::{G2PRules, Lexicon, PhonemeInventory};
use keeplm::prune::{prune, PruneConfig, PruneReport};
use keeplm::querygen::{expand, parse_catalog, parse_templates, partition_bands, Band, QuerySet};
use keeplm::smoothing::{estimate, SmoothingConfig};
use keeplm::vocab::{BOS, EOS, UNK};

use crate::config::PipelineConfig;
use crate::report::{ComparisonReport, ReportRow};

/// One pruned model under comparison.
pub struct Strategy {
    pub name: String,
    pub model: BackoffModel,
    pub keep_size: usize,
    pub prune_report: Option<PruneReport>,
    /// Closest achieved size when an EP~ baseline missed its target.
    pub unmatched_target: Option<usize>,
}

pub struct RecallPoint {
    pub k: f64,
    pub recall: f64,
}

pub struct ClassifierSummary {
    pub forest: RandomForest,
    pub curve_full: Vec<RecallPoint>,
    pub curve_top3: Vec<RecallPoint>,
    pub recall40_full: f64,
    pub recall40_top3: f64,
    pub top3: Vec<String>,
}

pub struct PipelineOutcome {
    pub full_model: BackoffModel,
    pub strategies: Vec<Strategy>,
    pub dataset: LabeledDataset,
    pub classifier: ClassifierSummary,
    pub report: ComparisonReport,
}

/// A test utterance: reference tokens plus its band when the set is drawn
/// from the query distribution.
pub struct EvalItem {
    pub tokens: Vec<String>,
    pub band: Option<Band>,
}

pub struct EvalSet {
    pub name: String,
    pub items: Vec<EvalItem>,
}

fn write_artifact(out_dir: Option<&Path>, name: &str, content: &str) -> Result<()> {
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), content)
            .with_context(|| format!("writing artifact {name}"))?;
    }
    Ok(())
}

/// Run every stage. Artifacts are written into `out_dir` as stages finish,
/// so a failed run leaves everything produced so far for inspection.
pub fn run_pipeline(cfg: &PipelineConfig, out_dir: Option<&Path>) -> Result<PipelineOutcome> {
    cfg.validate().context("stage config: validation")?;

    // stage 1: inputs
    let corpus_text = fs::read_to_string(&cfg.corpus).context("stage inputs: corpus")?;
    let corpus = tokenize_corpus(&corpus_text);
    let templates_text = fs::read_to_string(&cfg.templates).context("stage inputs: templates")?;
    let templates = parse_templates(&templates_text, &cfg.templates.display().to_string())
        .context("stage inputs: templates")?;
    let catalog_text = fs::read_to_string(&cfg.catalog).context("stage inputs: catalog")?;
    let catalog = parse_catalog(&catalog_text, &cfg.catalog.display().to_string())
        .context("stage inputs: catalog")?;
    let lexicon_text = fs::read_to_string(&cfg.lexicon).context("stage inputs: lexicon")?;
    let mut lexicon = Lexicon::parse(&lexicon_text, &cfg.lexicon.display().to_string())
        .context("stage inputs: lexicon")?;
    let rules_text = fs::read_to_string(&cfg.rules).context("stage inputs: rules")?;
    let rules = G2PRules::parse(&rules_text, &cfg.rules.display().to_string())
        .context("stage inputs: rules")?;

    // stage 2: query set
    let queries = expand(&templates, &catalog, cfg.query_limit, cfg.seed)
        .context("stage queries: expansion")?;
    if !queries.queries.iter().any(|q| q.domain == cfg.holdout_domain) {
        bail!("stage queries: holdout domain {:?} generated no queries", cfg.holdout_domain);
    }
    write_artifact(out_dir, "queries.tsv", &queries.to_text())?;

    // stage 3: full language model over corpus plus sampled queries
    let mut train_corpus = corpus.clone();
    {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        let cumulative: Vec<f64> = queries
            .queries
            .iter()
            .scan(0.0, |acc, q| {
                *acc += q.prob;
                Some(*acc)
            })
            .collect();
        let total = *cumulative.last().unwrap();
        for _ in 0..cfg.lm_query_sample {
            let r = rng.gen::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c < r).min(queries.queries.len() - 1);
            train_corpus.push(queries.queries[idx].tokens.clone());
        }
    }
    let counts = count_ngrams(&train_corpus, cfg.order).context("stage train: counting")?;
    let smoothing = SmoothingConfig::with_k_gt(cfg.kgt);
    let full_model = estimate(&counts, &smoothing).context("stage train: estimation")?;
    write_artifact(out_dir, "full.arpa", &write_arpa(&full_model))?;

    // pronunciations for the whole vocabulary, so decoding and reverse
    // lookup cover every word the models can hypothesize
    lexicon.add_generated(
        full_model
            .vocab()
            .words()
            .filter(|w| *w != BOS && *w != EOS && *w != UNK),
        &rules,
    );
    let inventory = PhonemeInventory::from_lexicon(&lexicon, 0.10);

    let prune_cfg = PruneConfig {
        theta: cfg.theta,
        theta_keep: cfg.theta_keep,
    };
    let decoder_params = DecoderParams {
        beam: cfg.beam,
        lambda: cfg.lambda,
        d_max: cfg.d_max,
    };
    let channel = NoiseChannel::new(cfg.p_sub, cfg.p_del, cfg.p_ins, cfg.seed);

    // stage 4: EP baseline
    let (ep_model, ep_report) = prune(&full_model, &prune_cfg, &KeepList::new(Provenance::File));
    write_artifact(out_dir, "ep.arpa", &write_arpa(&ep_model))?;

    // stage 5: QEP
    let qep_keep = keeplm::querygen::extract_qep_keeplist(&queries, cfg.order);
    write_artifact(out_dir, "keep_qep.txt", &qep_keep.to_text())?;
    let (qep_model, qep_report) = prune(&full_model, &prune_cfg, &qep_keep);
    write_artifact(out_dir, "qep.arpa", &write_arpa(&qep_model))?;

    // stage 6: simulated loop against the EP baseline, labeling, EEP
    let error_corpus = run_loop(&queries, &ep_model, &lexicon, &rules, &channel, &decoder_params);
    let dataset = label_instances(&error_corpus, cfg.order);
    if dataset.positives() == 0 {
        bail!("stage loop: the simulated loop produced no misrecognitions");
    }
    let eep_keep = error_keeplist(&dataset);
    write_artifact(out_dir, "keep_eep.txt", &eep_keep.to_text())?;
    let (eep_model, eep_report) = prune(&full_model, &prune_cfg, &eep_keep);
    write_artifact(out_dir, "eep.arpa", &write_arpa(&eep_model))?;

    // stage 7: features and the classifier (leave one domain out)
    let tq_counts = count_ngrams(
        &queries.queries.iter().map(|q| q.tokens.clone()).collect::<Vec<_>>(),
        cfg.order,
    )
    .context("stage features: query counts")?;
    let fctx = FeatureContext {
        counts: &tq_counts,
        model: &ep_model,
        lexicon: &lexicon,
        rules: &rules,
        inventory: &inventory,
    };
    let (featurized, _summary) = extract_batch(&dataset, &fctx);
    write_artifact(out_dir, "dataset.tsv", &write_dataset(&featurized))?;

    let (train_ds, test_ds) = featurized.split_by_domain(&cfg.holdout_domain);
    if train_ds.instances.is_empty() || test_ds.instances.is_empty() {
        bail!("stage classifier: leave-one-domain-out split is empty");
    }
    let rf_cfg = ForestConfig {
        trees: cfg.rf_trees,
        max_depth: cfg.rf_max_depth,
        min_leaf: cfg.rf_min_leaf,
        split_features: None,
        seed: cfg.seed.wrapping_add(2),
        weight_by_count: false,
    };
    let forest = train(&train_ds, &rf_cfg).context("stage classifier: training")?;
    write_artifact(out_dir, "forest.txt", &write_forest(&forest))?;

    let scores: Vec<(f64, bool)> = test_ds
        .instances
        .iter()
        .map(|i| {
            predict_proba(&forest, i.features.as_ref().unwrap()).map(|p| (p, i.label))
        })
        .collect::<keeplm::Result<_>>()
        .context("stage classifier: scoring")?;
    let curve_full = recall_curve(&scores)?;
    let recall40_full = recall_at_k(&scores, 40.0).context("stage classifier: recall")?;

    let top3 = top_features(&forest, 3);
    let train3 = project_dataset(&train_ds, &top3);
    let test3 = project_dataset(&test_ds, &top3);
    let rf3_cfg = ForestConfig {
        seed: cfg.seed.wrapping_add(3),
        ..rf_cfg.clone()
    };
    let forest3 = train(&train3, &rf3_cfg).context("stage classifier: top-3 training")?;
    let scores3: Vec<(f64, bool)> = test3
        .instances
        .iter()
        .map(|i| predict_proba(&forest3, i.features.as_ref().unwrap()).map(|p| (p, i.label)))
        .collect::<keeplm::Result<_>>()
        .context("stage classifier: top-3 scoring")?;
    let curve_top3 = recall_curve(&scores3)?;
    let recall40_top3 = recall_at_k(&scores3, 40.0)?;
    write_artifact(out_dir, "recall_curve.csv", &render_curves(&curve_full, &curve_top3))?;

    // stage 8: AEEP, AEEP-top3, RANDOM keep lists over the held-out domain
    let aeep_keep = select_top_k(&test_ds, &forest, cfg.k_percent, cfg.order)
        .context("stage selection: AEEP")?;
    write_artifact(out_dir, "keep_aeep.txt", &aeep_keep.to_text())?;
    let (aeep_model, aeep_report) = prune(&full_model, &prune_cfg, &aeep_keep);
    write_artifact(out_dir, "aeep.arpa", &write_arpa(&aeep_model))?;

    let aeep3_keep = select_top_k(&test3, &forest3, cfg.k_percent, cfg.order)
        .context("stage selection: AEEP top-3")?;
    let (aeep3_model, aeep3_report) = prune(&full_model, &prune_cfg, &aeep3_keep);
    write_artifact(out_dir, "aeep_top3.arpa", &write_arpa(&aeep3_model))?;

    let random_keep = random_keeplist(
        &test_ds,
        cfg.k_percent / 100.0,
        cfg.seed.wrapping_add(4),
        cfg.order,
    );
    write_artifact(out_dir, "keep_random.txt", &random_keep.to_text())?;
    let (random_model, random_report) = prune(&full_model, &prune_cfg, &random_keep);
    write_artifact(out_dir, "random.arpa", &write_arpa(&random_model))?;

    // stage 9: size-matched EP~ baselines
    let mut strategies: Vec<Strategy> = vec![Strategy {
        name: "EP".into(),
        model: ep_model.clone(),
        keep_size: 0,
        prune_report: Some(ep_report),
        unmatched_target: None,
    }];
    for (name, model, keep, report) in [
        ("QEP", qep_model, &qep_keep, qep_report),
        ("EEP", eep_model, &eep_keep, eep_report),
        ("AEEP", aeep_model, &aeep_keep, aeep_report),
        ("AEEP-top3", aeep3_model, &aeep3_keep, aeep3_report),
    ] {
        let target = model.total_ngrams();
        let (matched, achieved_theta) = match_size(&full_model, target, cfg.ep_match_tolerance)
            .with_context(|| format!("stage size-match: EP~ for {name}"))?;
        let within = (matched.total_ngrams() as f64 - target as f64).abs()
            <= cfg.ep_match_tolerance * target as f64;
        log::info!(
            "EP~({name}): target {target}, achieved {} at theta {achieved_theta:.3e}",
            matched.total_ngrams()
        );
        strategies.push(Strategy {
            name: format!("EP~{name}"),
            keep_size: 0,
            prune_report: None,
            unmatched_target: if within { None } else { Some(target) },
            model: matched,
        });
        strategies.push(Strategy {
            name: name.into(),
            model,
            keep_size: keep.len(),
            prune_report: Some(report),
            unmatched_target: None,
        });
    }
    strategies.push(Strategy {
        name: "RANDOM".into(),
        model: random_model,
        keep_size: random_keep.len(),
        prune_report: Some(random_report),
        unmatched_target: None,
    });

    // stage 10: test sets and evaluation
    let eval_sets = build_eval_sets(cfg, &templates, &catalog, &corpus)?;
    let wers = evaluate(
        cfg,
        &strategies,
        &eval_sets,
        &lexicon,
        &rules,
        &inventory,
        &channel,
        &decoder_params,
    );

    // stage 11: report
    let mut rows = Vec::new();
    for s in &strategies {
        let audit = s
            .prune_report
            .as_ref()
            .map(|r| r.keep_found - r.keep_retained)
            .unwrap_or(0);
        rows.push(ReportRow {
            name: s.name.clone(),
            ngrams: s.model.total_ngrams(),
            keep_size: s.keep_size,
            keep_pruned: audit,
            size_note: s
                .unmatched_target
                .map(|t| format!("unmatchable target {t}"))
                .unwrap_or_default(),
            wer: wers[&s.name].clone(),
        });
    }
    let report = ComparisonReport {
        rows,
        recall40_full,
        recall40_top3,
        top3_features: top3.clone(),
    };
    write_artifact(out_dir, "report.tsv", &report.to_tsv())?;
    write_artifact(out_dir, "report.txt", &report.to_text())?;
    write_artifact(
        out_dir,
        "report.json",
        &serde_json::to_string_pretty(&report.to_json())?,
    )?;

    Ok(PipelineOutcome {
        full_model,
        strategies,
        dataset: featurized,
        classifier: ClassifierSummary {
            forest,
            curve_full,
            curve_top3,
            recall40_full,
            recall40_top3,
            top3,
        },
        report,
    })
}

fn recall_curve(scores: &[(f64, bool)]) -> Result<Vec<RecallPoint>> {
    let mut curve = Vec::new();
    for step in 0..=20 {
        let k = step as f64 * 5.0;
        curve.push(RecallPoint {
            k,
            recall: recall_at_k(scores, k)?,
        });
    }
    Ok(curve)
}

fn render_curves(full: &[RecallPoint], top3: &[RecallPoint]) -> String {
    let mut out = String::from("k,recall_all_features,recall_top3\n");
    for (a, b) in full.iter().zip(top3) {
        out.push_str(&format!("{},{:.6},{:.6}\n", a.k, a.recall, b.recall));
    }
    out
}

/// Bisect theta (log domain) until the EP-pruned size lands within the
/// tolerance of the target. The retained count is monotone non-increasing
/// in theta.
fn match_size(full: &BackoffModel, target: usize, tolerance: f64) -> Result<(BackoffModel, f64)> {
    let empty = KeepList::new(Provenance::File);
    let prune_at = |theta: f64| {
        prune(
            full,
            &PruneConfig { theta, theta_keep: 0.0 },
            &empty,
        )
        .0
    };
    let tol = (tolerance * target as f64).max(1.0);
    let mut lo = 1e-15f64; // retains nearly everything
    let mut hi = 1e3f64; // unigrams only
    let mut best: Option<(BackoffModel, f64, f64)> = None; // (model, theta, diff)
    for _ in 0..48 {
        let theta = 10f64.powf(0.5 * (lo.log10() + hi.log10()));
        let candidate = prune_at(theta);
        let size = candidate.total_ngrams() as f64;
        let diff = (size - target as f64).abs();
        if best.as_ref().map_or(true, |(_, _, d)| diff < *d) {
            best = Some((candidate, theta, diff));
        }
        if diff <= tol {
            break;
        }
        if size > target as f64 {
            lo = theta;
        } else {
            hi = theta;
        }
    }
    let (model, theta, _) = best.expect("bisection always evaluates at least once");
    Ok((model, theta))
}

/// The three test sets: a head-weighted general mix, the held-out domain,
/// and the full synthetic distribution with band labels.
pub fn build_eval_sets(
    cfg: &PipelineConfig,
    templates: &[keeplm::querygen::Template],
    catalog: &keeplm::querygen::EntityCatalog,
    corpus: &[Vec<String>],
) -> Result<Vec<EvalSet>> {
    // TTS-All analogue: a fresh instance from the same templates
    let tts = expand(templates, catalog, cfg.test_tts, cfg.test_seed)
        .context("stage eval sets: tts expansion")?;
    let bands = partition_bands(&tts);
    let tts_items: Vec<EvalItem> = tts
        .queries
        .iter()
        .zip(&bands)
        .map(|(q, b)| EvalItem {
            tokens: q.tokens.clone(),
            band: Some(*b),
        })
        .collect();

    // held-out domain sample
    let holdout_templates: Vec<keeplm::querygen::Template> = templates
        .iter()
        .filter(|t| t.domain == cfg.holdout_domain)
        .cloned()
        .collect();
    if holdout_templates.is_empty() {
        bail!("no templates for holdout domain {:?}", cfg.holdout_domain);
    }
    let heldout = expand(
        &holdout_templates,
        catalog,
        cfg.test_heldout,
        cfg.test_seed.wrapping_add(1),
    )
    .context("stage eval sets: holdout expansion")?;
    let heldout_items: Vec<EvalItem> = heldout
        .queries
        .iter()
        .map(|q| EvalItem {
            tokens: q.tokens.clone(),
            band: None,
        })
        .collect();

    // general set: base-corpus sentences mixed with a head-weighted sample
    let general_pool = expand(templates, catalog, cfg.query_limit, cfg.test_seed.wrapping_add(2))
        .context("stage eval sets: general expansion")?;
    let mut general_items = Vec::with_capacity(cfg.test_general);
    let n_corpus = cfg.test_general / 2;
    for i in 0..n_corpus {
        general_items.push(EvalItem {
            tokens: corpus[i % corpus.len()].clone(),
            band: None,
        });
    }
    {
        // sampling by probability is naturally head-heavy
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.test_seed.wrapping_add(3));
        let cumulative: Vec<f64> = general_pool
            .queries
            .iter()
            .scan(0.0, |acc, q| {
                *acc += q.prob;
                Some(*acc)
            })
            .collect();
        let total = *cumulative.last().unwrap();
        for _ in n_corpus..cfg.test_general {
            let r = rng.gen::<f64>() * total;
            let idx = cumulative
                .partition_point(|&c| c < r)
                .min(general_pool.queries.len() - 1);
            general_items.push(EvalItem {
                tokens: general_pool.queries[idx].tokens.clone(),
                band: None,
            });
        }
    }

    Ok(vec![
        EvalSet { name: "general".into(), items: general_items },
        EvalSet { name: "heldout".into(), items: heldout_items },
        EvalSet { name: "tts_all".into(), items: tts_items },
    ])
}

/// WER of every strategy on every set (and per band for the synthetic set),
/// averaged over the evaluation channel seeds. The corrupted audio is
/// shared across models, so differences come from the language models.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    cfg: &PipelineConfig,
    strategies: &[Strategy],
    eval_sets: &[EvalSet],
    lexicon: &Lexicon,
    rules: &G2PRules,
    inventory: &PhonemeInventory,
    channel: &NoiseChannel,
    params: &DecoderParams,
) -> BTreeMap<String, BTreeMap<String, f64>> {
    // one shared pronunciation index: all strategies share the vocabulary
    let index = PronIndex::build(lexicon, strategies[0].model.vocab());
    let mut tallies: BTreeMap<(String, String), WerStats> = BTreeMap::new();

    for set in eval_sets {
        for (qi, item) in set.items.iter().enumerate() {
            let mut spoken = Vec::new();
            for w in &item.tokens {
                spoken.extend(lexicon.spoken(w, rules));
            }
            for (si, &seed) in cfg.eval_seeds.iter().enumerate() {
                let stream = (qi as u64).wrapping_mul(31).wrapping_add(si as u64);
                let corrupted = channel.with_seed(seed).corrupt(&spoken, inventory, stream);
                let encoded = index.encode(&corrupted);
                let cands = span_candidates(&index, &encoded, params.d_max);
                for strat in strategies {
                    let alignment = match decode_spans(
                        &index,
                        &cands,
                        encoded.len(),
                        &strat.model,
                        params,
                    ) {
                        Ok(r) => align(&item.tokens, &r.hypothesis),
                        Err(_) => Alignment::all_deletions(item.tokens.len()),
                    };
                    let mut keys = vec![set.name.clone()];
                    if let Some(band) = item.band {
                        keys.push(format!("{}_{}", set.name, band.as_str()));
                    }
                    for key in keys {
                        tallies
                            .entry((strat.name.clone(), key))
                            .or_default()
                            .add_alignment(&alignment, item.tokens.len());
                    }
                }
            }
        }
    }

    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for ((strategy, set), stats) in tallies {
        out.entry(strategy).or_default().insert(set, stats.wer());
    }
    out
}
