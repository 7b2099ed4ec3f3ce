//! The five feature categories computed per labeled n-gram instance:
//! word-level counts, language-model scores, phoneme-level properties,
//! template/entity flags, and the phonetic-confusion score.

use crate::counts::NGramCounts;
use crate::eep::{Instance, LabeledDataset};
use crate::model::BackoffModel;
use crate::phonetics::{confusion_neighbors, pronounce_ngram, G2PRules, Lexicon, PhonemeInventory};
use crate::querygen::Tag;
use crate::vocab::BOS;

/// Missing-value sentinel for features that are undefined for an instance.
/// Features where -1 would be ambiguous carry a paired presence flag.
pub const SENTINEL: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Word,
    Lm,
    Phoneme,
    Template,
    Confusion,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Word => "word",
            Category::Lm => "lm",
            Category::Phoneme => "phoneme",
            Category::Template => "template",
            Category::Confusion => "confusion",
        }
    }
}

/// Fixed, versioned feature order.
#[derive(Debug, Clone)]
pub struct FeatureSchema {
    pub version: String,
    pub names: Vec<(String, Category)>,
}

pub const SCHEMA_V1: &[(&str, Category)] = &[
    ("ngram_count", Category::Word),
    ("ngram_relfreq", Category::Word),
    ("context_oov", Category::Word),
    ("target_oov", Category::Word),
    ("logp_target", Category::Lm),
    ("logp_ngram", Category::Lm),
    ("ppl_ngram", Category::Lm),
    ("entropy_context", Category::Lm),
    ("phoneme_count", Category::Phoneme),
    ("has_infrequent_phoneme", Category::Phoneme),
    ("target_in_lexicon", Category::Phoneme),
    ("lex_dist_present", Category::Phoneme),
    ("g2p_lex_distance", Category::Phoneme),
    ("target_is_entity", Category::Template),
    ("any_entity", Category::Template),
    ("confusion_present", Category::Confusion),
    ("confusion_best_logp", Category::Confusion),
];

impl FeatureSchema {
    pub fn v1() -> FeatureSchema {
        FeatureSchema {
            version: "v1".into(),
            names: SCHEMA_V1
                .iter()
                .map(|(n, c)| (n.to_string(), *c))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|(n, _)| n == name)
    }

    /// Header form: `v1: name:category,...`
    pub fn header(&self) -> String {
        let cols: Vec<String> = self
            .names
            .iter()
            .map(|(n, c)| format!("{n}:{}", c.as_str()))
            .collect();
        format!("{}: {}", self.version, cols.join(","))
    }
}

/// Real-valued vector aligned to a schema; never NaN or infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> FeatureVector {
        assert!(values.iter().all(|v| v.is_finite()), "non-finite feature value");
        FeatureVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn project(&self, indices: &[usize]) -> FeatureVector {
        FeatureVector(indices.iter().map(|&i| self.0[i]).collect())
    }
}

/// Shared read-only inputs for feature extraction. Counts are over the
/// classifier training distribution; the model is the baseline
/// entropy-pruned one.
pub struct FeatureContext<'a> {
    pub counts: &'a NGramCounts,
    pub model: &'a BackoffModel,
    pub lexicon: &'a Lexicon,
    pub rules: &'a G2PRules,
    pub inventory: &'a PhonemeInventory,
}

/// Chain-rule log10 probability of the n-gram under the model, skipping the
/// `<s>` padding as a predicted token, plus the number of predicted tokens.
fn chain_logprob(model: &BackoffModel, ngram: &[String]) -> (f64, usize) {
    let start = usize::from(ngram[0] == BOS);
    let mut sum = 0.0;
    for i in start..ngram.len() {
        sum += model.logprob(&ngram[..i], &ngram[i]);
    }
    (sum, ngram.len() - start)
}

/// Compute the schema-v1 feature vector for one instance n-gram.
pub fn extract(ngram: &[String], tags: &[Tag], ctx: &FeatureContext) -> FeatureVector {
    assert!(ngram.len() >= 2, "instances are n-grams of order >= 2");
    assert_eq!(tags.len(), ngram.len());
    let vocab = ctx.model.vocab();
    let target = ngram.last().unwrap();
    let context = &ngram[..ngram.len() - 1];
    let mut v = Vec::with_capacity(SCHEMA_V1.len());

    // word-level
    let count = ctx.counts.get_words(ngram);
    v.push(count as f64);
    let order_total = ctx.counts.order_total(ngram.len());
    v.push(if order_total > 0 {
        count as f64 / order_total as f64
    } else {
        0.0
    });
    v.push(f64::from(context.iter().any(|w| !vocab.contains(w))));
    v.push(f64::from(!vocab.contains(target)));

    // language model
    let logp_target = ctx.model.logprob(context, target);
    v.push(logp_target);
    let (logp_ngram, predicted) = chain_logprob(ctx.model, ngram);
    v.push(logp_ngram);
    v.push(10f64.powf(-logp_ngram / predicted as f64));
    v.push(context_entropy(ctx.model, context));

    // phoneme-level
    let phonemes = pronounce_ngram(ctx.rules, ngram);
    v.push(phonemes.len() as f64);
    v.push(f64::from(phonemes.iter().any(|p| ctx.inventory.is_infrequent(p))));
    v.push(f64::from(ctx.lexicon.is_predefined(target)));
    let g2p_target = ctx.rules.g2p(target);
    match ctx.lexicon.predefined_prons(target) {
        Some(prons) if !g2p_target.is_empty() => {
            let d = prons
                .iter()
                .map(|p| crate::phonetics::phoneme_edit_distance(&g2p_target, p))
                .min()
                .unwrap();
            v.push(1.0);
            v.push(d as f64);
        }
        _ => {
            v.push(0.0);
            v.push(SENTINEL);
        }
    }

    // template
    v.push(f64::from(*tags.last().unwrap() == Tag::Entity));
    v.push(f64::from(tags.iter().any(|t| *t == Tag::Entity)));

    // phonetic confusion: best full-chain score with the target replaced by
    // any vocabulary word whose pronunciation is one edit away
    let mut best: Option<f64> = None;
    if !g2p_target.is_empty() {
        for neighbor in confusion_neighbors(ctx.inventory, &g2p_target) {
            for word in ctx.lexicon.reverse_lookup(&neighbor) {
                let mut replaced: Vec<String> = ngram.to_vec();
                *replaced.last_mut().unwrap() = word;
                let (lp, _) = chain_logprob(ctx.model, &replaced);
                if best.map_or(true, |b| lp > b) {
                    best = Some(lp);
                }
            }
        }
    }
    match best {
        Some(b) => {
            v.push(1.0);
            v.push(b);
        }
        None => {
            v.push(0.0);
            v.push(SENTINEL);
        }
    }

    FeatureVector::new(v)
}

/// Exact next-word entropy (log10) of the model distribution after
/// `context`, by enumeration over the vocabulary.
fn context_entropy(model: &BackoffModel, context: &[String]) -> f64 {
    assert!(
        model.vocab().len() <= 100_000,
        "entropy enumeration needs a bounded vocabulary"
    );
    let ids: Vec<u32> = context
        .iter()
        .map(|w| model.vocab().id_or_unk(w))
        .collect();
    let mut h = 0.0;
    for w in model.vocab().ids() {
        let lp = model.logprob_ids(&ids, w);
        h -= 10f64.powf(lp) * lp;
    }
    h.max(0.0)
}

/// Number of instances whose feature remained at the sentinel, per feature.
#[derive(Debug, Clone)]
pub struct ExtractSummary {
    pub sentinel_counts: Vec<(String, usize)>,
}

/// Fill feature vectors for a whole dataset.
pub fn extract_batch(ds: &LabeledDataset, ctx: &FeatureContext) -> (LabeledDataset, ExtractSummary) {
    let schema = FeatureSchema::v1();
    let mut sentinels = vec![0usize; schema.len()];
    let mut out = Vec::with_capacity(ds.instances.len());
    for inst in &ds.instances {
        let fv = extract(&inst.ngram, &inst.tags, ctx);
        for (i, x) in fv.values().iter().enumerate() {
            if *x == SENTINEL {
                sentinels[i] += 1;
            }
        }
        out.push(Instance {
            features: Some(fv),
            ..inst.clone()
        });
    }
    let summary = ExtractSummary {
        sentinel_counts: schema
            .names
            .iter()
            .map(|(n, _)| n.clone())
            .zip(sentinels)
            .collect(),
    };
    (
        LabeledDataset {
            instances: out,
            schema: Some(schema.header()),
        },
        summary,
    )
}

/// Project a dataset onto a subset of schema-v1 features by name.
pub fn project_dataset(ds: &LabeledDataset, names: &[String]) -> LabeledDataset {
    let schema = FeatureSchema::v1();
    let indices: Vec<usize> = names
        .iter()
        .map(|n| schema.index_of(n).expect("unknown feature name"))
        .collect();
    let cols: Vec<String> = indices
        .iter()
        .map(|&i| format!("{}:{}", schema.names[i].0, schema.names[i].1.as_str()))
        .collect();
    LabeledDataset {
        instances: ds
            .instances
            .iter()
            .map(|inst| Instance {
                features: inst.features.as_ref().map(|f| f.project(&indices)),
                ..inst.clone()
            })
            .collect(),
        schema: Some(format!("{}-proj: {}", schema.version, cols.join(","))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::count_ngrams;
    use crate::smoothing::{estimate, SmoothingConfig};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    struct Fixture {
        counts: NGramCounts,
        model: BackoffModel,
        lexicon: Lexicon,
        rules: G2PRules,
        inventory: PhonemeInventory,
    }

    fn fixture() -> Fixture {
        let rules_text = "\
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
        let rules = G2PRules::parse(rules_text, "rules").unwrap();
        let corpus: Vec<Vec<String>> = ["play dot now", "play dot now", "play cot now", "stop dot"]
            .iter()
            .map(|l| toks(l))
            .collect();
        let counts = count_ngrams(&corpus, 3).unwrap();
        let model = estimate(&counts, &SmoothingConfig::default()).unwrap();
        let mut lexicon = Lexicon::default();
        lexicon.add("play", toks("P L AH Y"), true);
        lexicon.add("stop", toks("S T OW P"), true);
        lexicon.add("now", toks("N OW W"), true);
        lexicon.add("dot", toks("D OW T"), true);
        lexicon.add("cot", toks("K OW T"), true);
        lexicon.add_generated(["play", "stop", "now", "dot", "cot"].into_iter(), &rules);
        let inventory = PhonemeInventory::from_lexicon(&lexicon, 0.10);
        Fixture { counts, model, lexicon, rules, inventory }
    }

    fn ctx(f: &Fixture) -> FeatureContext<'_> {
        FeatureContext {
            counts: &f.counts,
            model: &f.model,
            lexicon: &f.lexicon,
            rules: &f.rules,
            inventory: &f.inventory,
        }
    }

    #[test]
    fn oov_flags_fire() {
        let f = fixture();
        let schema = FeatureSchema::v1();
        let v = extract(&toks("play zebra"), &[Tag::Template, Tag::Entity], &ctx(&f));
        assert_eq!(v.values()[schema.index_of("target_oov").unwrap()], 1.0);
        assert_eq!(v.values()[schema.index_of("context_oov").unwrap()], 0.0);
        let v = extract(&toks("zebra play"), &[Tag::Entity, Tag::Template], &ctx(&f));
        assert_eq!(v.values()[schema.index_of("context_oov").unwrap()], 1.0);
        assert_eq!(v.values()[schema.index_of("target_oov").unwrap()], 0.0);
    }

    #[test]
    fn word_features_match_direct_recount() {
        let f = fixture();
        let schema = FeatureSchema::v1();
        let ng = toks("play dot");
        let v = extract(&ng, &[Tag::Template, Tag::Entity], &ctx(&f));
        assert_eq!(v.values()[schema.index_of("ngram_count").unwrap()], 2.0);
        let total = f.counts.order_total(2);
        assert!(
            (v.values()[schema.index_of("ngram_relfreq").unwrap()] - 2.0 / total as f64).abs()
                < 1e-15
        );
    }

    #[test]
    fn lm_features_match_direct_computation() {
        let f = fixture();
        let schema = FeatureSchema::v1();
        let ng = toks("play dot now");
        let v = extract(&ng, &[Tag::Template, Tag::Entity, Tag::Template], &ctx(&f));
        let lp_t = f.model.logprob(&toks("play dot"), "now");
        assert_eq!(v.values()[schema.index_of("logp_target").unwrap()], lp_t);
        let lp_full = f.model.logprob(&[] as &[&str], "play")
            + f.model.logprob(&toks("play"), "dot")
            + lp_t;
        let got = v.values()[schema.index_of("logp_ngram").unwrap()];
        assert!((got - lp_full).abs() < 1e-12);
        let ppl = 10f64.powf(-lp_full / 3.0);
        assert!((v.values()[schema.index_of("ppl_ngram").unwrap()] - ppl).abs() < 1e-9);
        // <s>-initial chains skip the padding token
        let v2 = extract(&toks("<s> play"), &[Tag::Template, Tag::Template], &ctx(&f));
        let want = f.model.logprob(&toks("<s>"), "play");
        assert!((v2.values()[schema.index_of("logp_ngram").unwrap()] - want).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_bounded_and_matches_enumeration() {
        let f = fixture();
        let schema = FeatureSchema::v1();
        let ng = toks("play dot");
        let v = extract(&ng, &[Tag::Template, Tag::Entity], &ctx(&f));
        let h = v.values()[schema.index_of("entropy_context").unwrap()];
        assert!(h >= 0.0);
        assert!(h <= (f.model.vocab().len() as f64).log10());
        // independent recomputation
        let mut want = 0.0;
        for w in f.model.vocab().words().collect::<Vec<_>>() {
            let lp = f.model.logprob(&toks("play"), w);
            want -= 10f64.powf(lp) * lp;
        }
        assert!((h - want).abs() < 1e-12);
    }

    #[test]
    fn phoneme_features_match_hand_values() {
        let f = fixture();
        let schema = FeatureSchema::v1();
        let ng = toks("play dot");
        let v = extract(&ng, &[Tag::Template, Tag::Entity], &ctx(&f));
        // g2p(play)=P L AH Y, g2p(dot)=D OW T -> 7 phonemes
        assert_eq!(v.values()[schema.index_of("phoneme_count").unwrap()], 7.0);
        assert_eq!(v.values()[schema.index_of("target_in_lexicon").unwrap()], 1.0);
        assert_eq!(v.values()[schema.index_of("lex_dist_present").unwrap()], 1.0);
        // g2p(dot) = D OW T equals the lexicon entry -> distance 0
        assert_eq!(v.values()[schema.index_of("g2p_lex_distance").unwrap()], 0.0);
        // an unlisted target gets the sentinel and a 0 presence flag
        let v = extract(&toks("play zebra"), &[Tag::Template, Tag::Entity], &ctx(&f));
        assert_eq!(v.values()[schema.index_of("lex_dist_present").unwrap()], 0.0);
        assert_eq!(v.values()[schema.index_of("g2p_lex_distance").unwrap()], SENTINEL);
    }

    #[test]
    fn confusion_feature_finds_distance_one_rival() {
        let f = fixture();
        let schema = FeatureSchema::v1();
        // target "cot": g2p K OW T; neighbor D OW T maps to "dot", and
        // "play dot" outscores "play cot" in the model
        let ng = toks("play cot");
        let v = extract(&ng, &[Tag::Template, Tag::Entity], &ctx(&f));
        assert_eq!(v.values()[schema.index_of("confusion_present").unwrap()], 1.0);
        let conf = v.values()[schema.index_of("confusion_best_logp").unwrap()];
        let own = v.values()[schema.index_of("logp_ngram").unwrap()];
        assert!(conf > own, "confusion {conf} should beat own score {own}");
        // brute force over every vocabulary word at pronunciation distance 1
        let mut want = f64::NEG_INFINITY;
        let g2p_cot = f.rules.g2p("cot");
        for w in ["play", "stop", "now", "dot", "cot"] {
            let close = f
                .lexicon
                .prons(w)
                .unwrap()
                .iter()
                .any(|p| crate::phonetics::phoneme_edit_distance(p, &g2p_cot) == 1);
            if close {
                let (lp, _) = chain_logprob(&f.model, &toks(&format!("play {w}")));
                want = want.max(lp);
            }
        }
        assert!((conf - want).abs() < 1e-12);
    }

    #[test]
    fn batch_is_deterministic_and_counts_sentinels() {
        let f = fixture();
        let mut ds = LabeledDataset::default();
        for (ng, tags) in [
            ("play dot", vec![Tag::Template, Tag::Entity]),
            ("play zebra", vec![Tag::Template, Tag::Entity]),
        ] {
            ds.instances.push(crate::eep::Instance {
                ngram: toks(ng),
                label: false,
                count: 1,
                domain: "d".into(),
                tags,
                features: None,
            });
        }
        let (a, summary) = extract_batch(&ds, &ctx(&f));
        let (b, _) = extract_batch(&ds, &ctx(&f));
        for (x, y) in a.instances.iter().zip(&b.instances) {
            assert_eq!(x.features, y.features, "bit-for-bit determinism");
        }
        let dist_sentinels = summary
            .sentinel_counts
            .iter()
            .find(|(n, _)| n == "g2p_lex_distance")
            .unwrap()
            .1;
        assert_eq!(dist_sentinels, 1); // only the zebra instance
        // empty dataset still carries the schema header
        let (empty, _) = extract_batch(&LabeledDataset::default(), &ctx(&f));
        assert!(empty.schema.unwrap().starts_with("v1:"));
    }

    #[test]
    fn projection_keeps_only_selected_columns() {
        let f = fixture();
        let mut ds = LabeledDataset::default();
        ds.instances.push(crate::eep::Instance {
            ngram: toks("play dot"),
            label: true,
            count: 1,
            domain: "d".into(),
            tags: vec![Tag::Template, Tag::Entity],
            features: None,
        });
        let (full, _) = extract_batch(&ds, &ctx(&f));
        let schema = FeatureSchema::v1();
        let names = vec!["logp_target".to_string(), "confusion_best_logp".to_string()];
        let proj = project_dataset(&full, &names);
        let pv = proj.instances[0].features.as_ref().unwrap();
        let fv = full.instances[0].features.as_ref().unwrap();
        assert_eq!(pv.len(), 2);
        assert_eq!(pv.values()[0], fv.values()[schema.index_of("logp_target").unwrap()]);
        assert_eq!(pv.values()[1], fv.values()[schema.index_of("confusion_best_logp").unwrap()]);
    }
}
