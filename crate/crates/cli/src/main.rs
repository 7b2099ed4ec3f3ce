//! Command-line interface: one subcommand per library operation plus the
//! full pipeline. Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use keeplm::align::{align, Alignment, WerStats};
use keeplm::arpa::{read_arpa, write_arpa};
use keeplm::channel::NoiseChannel;
use keeplm::counts::{count_ngrams, tokenize_corpus};
use keeplm::decoder::{decode, DecoderParams};
use keeplm::eep::{label_instances, parse_dataset, write_dataset, ErrorCorpus, ErrorRecord, LabeledDataset};
use keeplm::features::{extract_batch, FeatureContext};
use keeplm::forest::{parse_forest, predict_proba, recall_at_k, select_top_k, top_features, train, write_forest, ForestConfig};
use keeplm::keeplist::KeepList;
use keeplm::model::BackoffModel;
use keeplm::phonetics::{G2PRules, Lexicon, PhonemeInventory};
use keeplm::prune::{prune, PruneConfig};
use keeplm::querygen::{expand, extract_qep_keeplist, parse_catalog, parse_templates, partition_bands, QuerySet};
use keeplm::smoothing::{estimate, SmoothingConfig};
use keeplm::vocab::{BOS, EOS, UNK};

use keeplm_cli::config::PipelineConfig;
use keeplm_cli::pipeline::run_pipeline;

#[derive(Parser)]
#[command(name = "keeplm", about = "Backoff n-gram language models with keep-list entropy pruning", version)]
struct Cli {
    /// Override the random seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pipeline config file supplying defaults for shared parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Verbose logging.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ChannelArgs {
    #[arg(long)]
    p_sub: Option<f64>,
    #[arg(long)]
    p_del: Option<f64>,
    #[arg(long)]
    p_ins: Option<f64>,
}

#[derive(Args)]
struct DecoderArgs {
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    d_max: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Count n-grams in a tokenized corpus.
    Count {
        #[arg(long)]
        text: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a Katz backoff model with Good-Turing discounting.
    Train {
        #[arg(long)]
        text: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        kgt: Option<u64>,
        /// Per-order minimum counts, comma-separated.
        #[arg(long)]
        min_counts: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Entropy-prune a model with an optional keep list.
    Prune {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        theta_keep: Option<f64>,
        #[arg(long)]
        keep_list: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Corpus perplexity under a model.
    Ppl {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        text: PathBuf,
    },
    /// Build the query-driven keep list (all query n-grams).
    Qep {
        /// Pre-expanded query set file; otherwise templates+catalog expand.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the expanded query set.
        #[arg(long)]
        queries_out: Option<PathBuf>,
    },
    /// Run the simulated recognition loop over a query set.
    Loop {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        decoder: DecoderArgs,
        /// Output pairs file: reference TAB hypothesis.
        #[arg(long)]
        out: PathBuf,
    },
    /// Label n-gram instances from loop output.
    Label {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fill feature vectors for a labeled dataset.
    Features {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the misrecognition random forest (leave one domain out).
    RfTrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        holdout: String,
        #[arg(long)]
        trees: Option<usize>,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        min_leaf: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a forest on the held-out domain.
    RfEval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        holdout: String,
        #[arg(long)]
        recall_curve: Option<PathBuf>,
    },
    /// Select the top-k% classifier-ranked n-grams as a keep list.
    RfSelect {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        holdout: String,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the m highest-importance features of a forest.
    RfTopFeatures {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        m: usize,
    },
    /// Decode phoneme observations to word sequences.
    Decode {
        /// Inline phoneme string, space-separated.
        #[arg(long)]
        phonemes: Option<String>,
        /// File of phoneme strings, one observation per line.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        lexicon: PathBuf,
        /// Optional G2P rules to cover the model vocabulary.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        decoder: DecoderArgs,
    },
    /// Score a pairs file (reference TAB hypothesis [TAB band]).
    Wer {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the full pipeline and emit the comparison report.
    Report {
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(
        if cli.verbose { "info" } else { "warn" },
    ))
    .format_timestamp(None)
    .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Shared defaults: config file when given, built-ins otherwise; --seed
/// overrides both.
fn effective_config(cli_config: &Option<PathBuf>, seed: Option<u64>) -> Result<PipelineConfig> {
    let mut cfg = match cli_config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn read_model(path: &Path) -> Result<BackoffModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(read_arpa(&text, &path.display().to_string())?)
}

fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let corpus = tokenize_corpus(&text);
    if corpus.is_empty() {
        bail!("{}: no sentences", path.display());
    }
    Ok(corpus)
}

fn read_queries(path: &Path) -> Result<QuerySet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(QuerySet::parse(&text, &path.display().to_string())?)
}

fn read_lexicon_rules(lexicon: &Path, rules: &Path) -> Result<(Lexicon, G2PRules)> {
    let ltext = fs::read_to_string(lexicon).with_context(|| format!("reading {}", lexicon.display()))?;
    let lex = Lexicon::parse(&ltext, &lexicon.display().to_string())?;
    let rtext = fs::read_to_string(rules).with_context(|| format!("reading {}", rules.display()))?;
    let rules = G2PRules::parse(&rtext, &rules.display().to_string())?;
    Ok((lex, rules))
}

/// Extend a lexicon with G2P pronunciations for every model-vocabulary word.
fn cover_vocab(lexicon: &mut Lexicon, rules: &G2PRules, model: &BackoffModel) {
    lexicon.add_generated(
        model.vocab().words().filter(|w| *w != BOS && *w != EOS && *w != UNK),
        rules,
    );
}

fn run(cli: Cli) -> Result<()> {
    let cfg = effective_config(&cli.config, cli.seed)?;
    match cli.command {
        Command::Count { text, order, out } => {
            let corpus = read_corpus(&text)?;
            let counts = count_ngrams(&corpus, order.unwrap_or(cfg.order))?;
            let mut w = String::new();
            for n in 1..=counts.order() {
                for (key, c) in counts.table(n) {
                    let words: Vec<&str> =
                        key.iter().map(|&id| counts.vocab().word(id)).collect();
                    w.push_str(&format!("{n}\t{c}\t{}\n", words.join(" ")));
                }
            }
            fs::write(&out, w)?;
        }
        Command::Train { text, order, kgt, min_counts, out } => {
            let corpus = read_corpus(&text)?;
            let counts = count_ngrams(&corpus, order.unwrap_or(cfg.order))?;
            let mut smoothing = SmoothingConfig::with_k_gt(kgt.unwrap_or(cfg.kgt));
            if let Some(mc) = min_counts {
                smoothing.min_counts = mc
                    .split(',')
                    .map(|s| s.trim().parse::<u64>())
                    .collect::<std::result::Result<_, _>>()
                    .context("parsing --min-counts")?;
            }
            let model = estimate(&counts, &smoothing)?;
            fs::write(&out, write_arpa(&model))?;
        }
        Command::Prune { input, theta, theta_keep, keep_list, out, report } => {
            let model = read_model(&input)?;
            let keep = match keep_list {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    KeepList::parse(&text, &path.display().to_string())?
                }
                None => KeepList::new(keeplm::Provenance::File),
            };
            let pcfg = PruneConfig {
                theta: theta.unwrap_or(cfg.theta),
                theta_keep: theta_keep.unwrap_or(cfg.theta_keep),
            };
            let (pruned, prune_report) = prune(&model, &pcfg, &keep);
            fs::write(&out, write_arpa(&pruned))?;
            if let Some(rp) = report {
                fs::write(&rp, serde_json::to_string_pretty(&prune_report)?)?;
            }
            println!(
                "pruned {} -> {} n-grams ({} keep entries protected)",
                prune_report.before.iter().sum::<usize>(),
                prune_report.after.iter().sum::<usize>(),
                prune_report.keep_protected
            );
        }
        Command::Ppl { model, text } => {
            let model = read_model(&model)?;
            let corpus = read_corpus(&text)?;
            println!("{:.4}", model.perplexity(&corpus));
        }
        Command::Qep { queries, templates, catalog, limit, order, out, queries_out } => {
            let qs = match (queries, templates, catalog) {
                (Some(q), _, _) => read_queries(&q)?,
                (None, Some(t), Some(c)) => {
                    let ttext = fs::read_to_string(&t)?;
                    let templates = parse_templates(&ttext, &t.display().to_string())?;
                    let ctext = fs::read_to_string(&c)?;
                    let catalog = parse_catalog(&ctext, &c.display().to_string())?;
                    expand(&templates, &catalog, limit.unwrap_or(cfg.query_limit), cfg.seed)?
                }
                _ => bail!("qep needs either --queries or both --templates and --catalog"),
            };
            if let Some(qo) = queries_out {
                fs::write(&qo, qs.to_text())?;
            }
            let kl = extract_qep_keeplist(&qs, order.unwrap_or(cfg.order));
            fs::write(&out, kl.to_text())?;
            println!("{} n-grams", kl.len());
        }
        Command::Loop { queries, model, lexicon, rules, channel, decoder, out } => {
            let qs = read_queries(&queries)?;
            let model = read_model(&model)?;
            let (mut lex, rules) = read_lexicon_rules(&lexicon, &rules)?;
            cover_vocab(&mut lex, &rules, &model);
            let ch = NoiseChannel::new(
                channel.p_sub.unwrap_or(cfg.p_sub),
                channel.p_del.unwrap_or(cfg.p_del),
                channel.p_ins.unwrap_or(cfg.p_ins),
                cfg.seed,
            );
            let params = DecoderParams {
                beam: decoder.beam.unwrap_or(cfg.beam),
                lambda: decoder.lambda.unwrap_or(cfg.lambda),
                d_max: decoder.d_max.unwrap_or(cfg.d_max),
            };
            let ec = keeplm::eep::run_loop(&qs, &model, &lex, &rules, &ch, &params);
            let mut w = String::new();
            for rec in &ec.records {
                w.push_str(&format!(
                    "{}\t{}\n",
                    rec.tokens.join(" "),
                    rec.hypothesis.join(" ")
                ));
            }
            fs::write(&out, w)?;
            let errs = ec
                .records
                .iter()
                .filter(|r| r.alignment.cost() > 0)
                .count();
            println!("{} queries, {} with errors", ec.records.len(), errs);
        }
        Command::Label { pairs, queries, order, out } => {
            let qs = read_queries(&queries)?;
            let text = fs::read_to_string(&pairs)?;
            let ec = pairs_to_corpus(&text, &pairs.display().to_string(), &qs)?;
            let ds = label_instances(&ec, order.unwrap_or(cfg.order));
            fs::write(&out, write_dataset(&ds))?;
            println!("{} instances, {} positive", ds.instances.len(), ds.positives());
        }
        Command::Features { data, queries, model, lexicon, rules, order, out } => {
            let ds = read_dataset(&data)?;
            let qs = read_queries(&queries)?;
            let model = read_model(&model)?;
            let (mut lex, rules) = read_lexicon_rules(&lexicon, &rules)?;
            cover_vocab(&mut lex, &rules, &model);
            let inventory = PhonemeInventory::from_lexicon(&lex, 0.10);
            let sentences: Vec<Vec<String>> =
                qs.queries.iter().map(|q| q.tokens.clone()).collect();
            let counts = count_ngrams(&sentences, order.unwrap_or(cfg.order))?;
            let fctx = FeatureContext {
                counts: &counts,
                model: &model,
                lexicon: &lex,
                rules: &rules,
                inventory: &inventory,
            };
            let (filled, summary) = extract_batch(&ds, &fctx);
            fs::write(&out, write_dataset(&filled))?;
            for (name, n) in summary.sentinel_counts.iter().filter(|(_, n)| *n > 0) {
                log::info!("{name}: {n} sentinel values");
            }
        }
        Command::RfTrain { data, holdout, trees, max_depth, min_leaf, out } => {
            let ds = read_dataset(&data)?;
            let (train_ds, _) = ds.split_by_domain(&holdout);
            if train_ds.instances.is_empty() {
                bail!("no training instances outside domain {holdout:?}");
            }
            let fcfg = ForestConfig {
                trees: trees.unwrap_or(cfg.rf_trees),
                max_depth: max_depth.unwrap_or(cfg.rf_max_depth),
                min_leaf: min_leaf.unwrap_or(cfg.rf_min_leaf),
                split_features: None,
                seed: cfg.seed,
                weight_by_count: false,
            };
            let forest = train(&train_ds, &fcfg)?;
            fs::write(&out, write_forest(&forest))?;
        }
        Command::RfEval { data, forest, holdout, recall_curve } => {
            let ds = read_dataset(&data)?;
            let forest = read_forest(&forest)?;
            let (_, test_ds) = ds.split_by_domain(&holdout);
            if test_ds.instances.is_empty() {
                bail!("no instances in domain {holdout:?}");
            }
            let scores = score_dataset(&forest, &test_ds)?;
            if let Some(path) = recall_curve {
                let mut w = String::from("k,recall\n");
                for step in 0..=20 {
                    let k = step as f64 * 5.0;
                    w.push_str(&format!("{k},{:.6}\n", recall_at_k(&scores, k)?));
                }
                fs::write(&path, w)?;
            }
            println!("recall@40 {:.4}", recall_at_k(&scores, 40.0)?);
        }
        Command::RfSelect { data, forest, holdout, k, order, out } => {
            let ds = read_dataset(&data)?;
            let forest = read_forest(&forest)?;
            let (_, test_ds) = ds.split_by_domain(&holdout);
            let kl = select_top_k(
                &test_ds,
                &forest,
                k.unwrap_or(cfg.k_percent),
                order.unwrap_or(cfg.order),
            )?;
            fs::write(&out, kl.to_text())?;
            println!("{} n-grams", kl.len());
        }
        Command::RfTopFeatures { forest, m } => {
            let forest = read_forest(&forest)?;
            for (rank, name) in top_features(&forest, m).iter().enumerate() {
                let idx = forest.feature_names.iter().position(|n| n == name).unwrap();
                println!("{} {name} {:.6}", rank + 1, forest.importance[idx]);
            }
        }
        Command::Decode { phonemes, input, lexicon, rules, model, decoder } => {
            let model = read_model(&model)?;
            let ltext = fs::read_to_string(&lexicon)?;
            let mut lex = Lexicon::parse(&ltext, &lexicon.display().to_string())?;
            if let Some(rpath) = rules {
                let rtext = fs::read_to_string(&rpath)?;
                let rules = G2PRules::parse(&rtext, &rpath.display().to_string())?;
                cover_vocab(&mut lex, &rules, &model);
            }
            let params = DecoderParams {
                beam: decoder.beam.unwrap_or(cfg.beam),
                lambda: decoder.lambda.unwrap_or(cfg.lambda),
                d_max: decoder.d_max.unwrap_or(cfg.d_max),
            };
            let observations: Vec<String> = match (phonemes, input) {
                (Some(p), None) => vec![p],
                (None, Some(path)) => fs::read_to_string(&path)?
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                    .map(str::to_string)
                    .collect(),
                _ => bail!("decode needs exactly one of --phonemes or --input"),
            };
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            for obs in observations {
                let seq: Vec<String> = obs.split_whitespace().map(str::to_string).collect();
                match decode(&seq, &lex, &model, &params) {
                    Ok(r) => writeln!(
                        w,
                        "{}\tscore={:.4}\tacoustic={:.1}\tlm={:.4}",
                        r.hypothesis.join(" "),
                        r.score,
                        r.acoustic,
                        r.lm
                    )?,
                    Err(keeplm::Error::UnreachableInput) => bail!("unreachable input: {obs}"),
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Command::Wer { pairs, json } => {
            let text = fs::read_to_string(&pairs)?;
            let (total, by_band) = score_pairs(&text, &pairs.display().to_string())?;
            if json {
                let mut bands = BTreeMap::new();
                for (band, stats) in &by_band {
                    bands.insert(band.clone(), serde_json::json!({
                        "substitutions": stats.substitutions,
                        "deletions": stats.deletions,
                        "insertions": stats.insertions,
                        "ref_tokens": stats.ref_tokens,
                        "wer": stats.wer(),
                    }));
                }
                println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({
                        "substitutions": total.substitutions,
                        "deletions": total.deletions,
                        "insertions": total.insertions,
                        "ref_tokens": total.ref_tokens,
                        "wer": total.wer(),
                        "bands": bands,
                    }))?
                );
            } else {
                println!(
                    "WER {:.2} (S={} D={} I={} N={})",
                    total.wer(),
                    total.substitutions,
                    total.deletions,
                    total.insertions,
                    total.ref_tokens
                );
                for (band, stats) in &by_band {
                    println!(
                        "  {band}: WER {:.2} (S={} D={} I={} N={})",
                        stats.wer(),
                        stats.substitutions,
                        stats.deletions,
                        stats.insertions,
                        stats.ref_tokens
                    );
                }
            }
        }
        Command::Report { out_dir } => {
            let outcome = run_pipeline(&cfg, out_dir.as_deref())?;
            print!("{}", outcome.report.to_text());
        }
    }
    Ok(())
}

fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_dataset(&text, &path.display().to_string())?)
}

fn read_forest(path: &Path) -> Result<keeplm::RandomForest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_forest(&text, &path.display().to_string())?)
}

fn score_dataset(
    forest: &keeplm::RandomForest,
    ds: &LabeledDataset,
) -> Result<Vec<(f64, bool)>> {
    ds.instances
        .iter()
        .map(|i| {
            let f = i
                .features
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("instance has no features"))?;
            Ok((predict_proba(forest, f)?, i.label))
        })
        .collect()
}

/// Join loop pairs back to their queries (by reference tokens) so labeling
/// has domains and tags.
fn pairs_to_corpus(text: &str, name: &str, qs: &QuerySet) -> Result<ErrorCorpus> {
    let bands = partition_bands(qs);
    let mut by_tokens: BTreeMap<&[String], usize> = BTreeMap::new();
    for (i, q) in qs.queries.iter().enumerate() {
        by_tokens.insert(&q.tokens, i);
    }
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim_end();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut fields = t.split('\t');
        let reference: Vec<String> = fields
            .next()
            .unwrap_or("")
            .split_whitespace()
            .map(str::to_string)
            .collect();
        let hypothesis: Vec<String> = fields
            .next()
            .map(|h| h.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default();
        if reference.is_empty() {
            bail!("{name}:{}: empty reference", i + 1);
        }
        let qi = *by_tokens
            .get(reference.as_slice())
            .ok_or_else(|| anyhow::anyhow!("{name}:{}: reference not in the query set", i + 1))?;
        let q = &qs.queries[qi];
        let alignment = align(&reference, &hypothesis);
        records.push(ErrorRecord {
            tokens: reference,
            tags: q.tags.clone(),
            domain: q.domain.clone(),
            band: bands[qi],
            hypothesis,
            alignment,
        });
    }
    if records.is_empty() {
        bail!("{name}: no pairs");
    }
    Ok(ErrorCorpus { records })
}

/// Pairs file scoring with an optional third band column.
fn score_pairs(text: &str, name: &str) -> Result<(WerStats, BTreeMap<String, WerStats>)> {
    let mut total = WerStats::default();
    let mut by_band: BTreeMap<String, WerStats> = BTreeMap::new();
    let mut any = false;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim_end();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split('\t').collect();
        if fields.is_empty() || fields.len() > 3 {
            bail!("{name}:{}: expected 2 or 3 tab-separated fields", i + 1);
        }
        let reference: Vec<String> = fields[0].split_whitespace().map(str::to_string).collect();
        if reference.is_empty() {
            bail!("{name}:{}: empty reference", i + 1);
        }
        let hypothesis: Vec<String> = fields
            .get(1)
            .map(|h| h.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default();
        let a: Alignment = align(&reference, &hypothesis);
        total.add_alignment(&a, reference.len());
        if let Some(band) = fields.get(2) {
            by_band
                .entry(band.to_string())
                .or_default()
                .add_alignment(&a, reference.len());
        }
        any = true;
    }
    if !any {
        bail!("{name}: no pairs");
    }
    Ok((total, by_band))
}
