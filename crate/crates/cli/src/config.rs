//! Flat key=value pipeline configuration with documented defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Everything the pipeline needs. Every key has a default; path keys must
/// exist at validation time.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    // inputs
    pub corpus: PathBuf,
    pub templates: PathBuf,
    pub catalog: PathBuf,
    pub lexicon: PathBuf,
    pub rules: PathBuf,

    // language model
    pub order: usize,
    pub kgt: u64,

    // pruning
    pub theta: f64,
    pub theta_keep: f64,

    // queries
    pub query_limit: usize,
    pub lm_query_sample: usize,
    pub seed: u64,

    // noise channel
    pub p_sub: f64,
    pub p_del: f64,
    pub p_ins: f64,

    // decoder
    pub beam: usize,
    pub lambda: f64,
    pub d_max: usize,

    // classifier
    pub rf_trees: usize,
    pub rf_max_depth: usize,
    pub rf_min_leaf: usize,
    pub k_percent: f64,
    pub holdout_domain: String,

    // evaluation
    pub eval_seeds: Vec<u64>,
    pub test_general: usize,
    pub test_heldout: usize,
    pub test_tts: usize,
    pub test_seed: u64,
    pub ep_match_tolerance: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: "data/demo/corpus.txt".into(),
            templates: "data/demo/templates.tsv".into(),
            catalog: "data/demo/catalog.tsv".into(),
            lexicon: "data/demo/lexicon.tsv".into(),
            rules: "data/demo/rules.tsv".into(),
            order: 4,
            kgt: 7,
            theta: 6e-9,
            theta_keep: 0.0,
            query_limit: 4000,
            lm_query_sample: 20000,
            seed: 42,
            p_sub: 0.08,
            p_del: 0.02,
            p_ins: 0.02,
            beam: 64,
            lambda: 1.0,
            d_max: 1,
            rf_trees: 100,
            rf_max_depth: 12,
            rf_min_leaf: 5,
            k_percent: 40.0,
            holdout_domain: "sports".into(),
            eval_seeds: vec![1001, 1002, 1003],
            test_general: 150,
            test_heldout: 150,
            test_tts: 300,
            test_seed: 777,
            ep_match_tolerance: 0.02,
        }
    }
}

impl PipelineConfig {
    /// Parse `key=value` lines; `#` starts a comment. Unknown keys are
    /// rejected. Relative paths resolve against the config file's directory.
    pub fn parse(text: &str, base_dir: &Path) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        let mut seen = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.split('#').next().unwrap_or("").trim();
            if t.is_empty() {
                continue;
            }
            let (key, value) = t
                .split_once('=')
                .with_context(|| format!("line {}: expected key=value, found {t:?}", i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), ()).is_some() {
                bail!("line {}: duplicate key {key:?}", i + 1);
            }
            cfg.set(key, value, base_dir)
                .with_context(|| format!("line {}: key {key:?}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        match key {
            "corpus" => self.corpus = path(value),
            "templates" => self.templates = path(value),
            "catalog" => self.catalog = path(value),
            "lexicon" => self.lexicon = path(value),
            "rules" => self.rules = path(value),
            "order" => self.order = value.parse()?,
            "kgt" => self.kgt = value.parse()?,
            "theta" => self.theta = value.parse()?,
            "theta_keep" => self.theta_keep = value.parse()?,
            "query_limit" => self.query_limit = value.parse()?,
            "lm_query_sample" => self.lm_query_sample = value.parse()?,
            "seed" => self.seed = value.parse()?,
            "p_sub" => self.p_sub = value.parse()?,
            "p_del" => self.p_del = value.parse()?,
            "p_ins" => self.p_ins = value.parse()?,
            "beam" => self.beam = value.parse()?,
            "lambda" => self.lambda = value.parse()?,
            "d_max" => self.d_max = value.parse()?,
            "rf_trees" => self.rf_trees = value.parse()?,
            "rf_max_depth" => self.rf_max_depth = value.parse()?,
            "rf_min_leaf" => self.rf_min_leaf = value.parse()?,
            "k_percent" => self.k_percent = value.parse()?,
            "holdout_domain" => self.holdout_domain = value.to_string(),
            "eval_seeds" => {
                self.eval_seeds = value
                    .split(',')
                    .map(|s| s.trim().parse::<u64>())
                    .collect::<std::result::Result<_, _>>()?;
            }
            "test_general" => self.test_general = value.parse()?,
            "test_heldout" => self.test_heldout = value.parse()?,
            "test_tts" => self.test_tts = value.parse()?,
            "test_seed" => self.test_seed = value.parse()?,
            "ep_match_tolerance" => self.ep_match_tolerance = value.parse()?,
            _ => bail!("unknown config key"),
        }
        Ok(())
    }

    /// Check numeric ranges and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("corpus", &self.corpus),
            ("templates", &self.templates),
            ("catalog", &self.catalog),
            ("lexicon", &self.lexicon),
            ("rules", &self.rules),
        ] {
            if !p.is_file() {
                bail!("{name} file not found: {}", p.display());
            }
        }
        if self.order < 2 {
            bail!("order must be at least 2");
        }
        if self.theta < 0.0 || self.theta_keep < 0.0 {
            bail!("thresholds must be non-negative");
        }
        if self.p_sub + self.p_del + self.p_ins >= 1.0 {
            bail!("noise probabilities must sum below 1");
        }
        if !(0.0..=100.0).contains(&self.k_percent) {
            bail!("k_percent must be in 0..=100");
        }
        if self.eval_seeds.is_empty() {
            bail!("eval_seeds must not be empty");
        }
        if self.beam == 0 || self.lambda <= 0.0 {
            bail!("beam must be >= 1 and lambda positive");
        }
        Ok(())
    }
}
