//! The simulated recognition loop over a query set, misrecognition
//! labeling of n-gram instances, and the error-driven keep list.

use std::collections::HashMap;

use crate::align::{align, Alignment};
use crate::channel::NoiseChannel;
use crate::decoder::{decode_spans, span_candidates, DecoderParams, PronIndex};
use crate::error::Result;
use crate::features::FeatureVector;
use crate::keeplist::{KeepList, Provenance};
use crate::model::BackoffModel;
use crate::phonetics::{G2PRules, Lexicon, PhonemeInventory, Pron};
use crate::querygen::{partition_bands, Band, QuerySet, Tag};
use crate::vocab::BOS;

/// One query through the loop: what was spoken, what came back, and how
/// they align.
#[derive(Debug, Clone)]
pub struct ErrorRecord {
    pub tokens: Vec<String>,
    pub tags: Vec<Tag>,
    pub domain: String,
    pub band: Band,
    pub hypothesis: Vec<String>,
    pub alignment: Alignment,
}

#[derive(Debug, Clone, Default)]
pub struct ErrorCorpus {
    pub records: Vec<ErrorRecord>,
}

/// One n-gram with its misrecognition label. The target token is the final
/// token; features are filled by the feature extractor.
#[derive(Debug, Clone)]
pub struct Instance {
    pub ngram: Vec<String>,
    pub label: bool,
    pub count: u64,
    pub domain: String,
    pub tags: Vec<Tag>,
    pub features: Option<FeatureVector>,
}

#[derive(Debug, Clone, Default)]
pub struct LabeledDataset {
    pub instances: Vec<Instance>,
    /// Schema version of the filled feature vectors, when present.
    pub schema: Option<String>,
}

impl LabeledDataset {
    pub fn positives(&self) -> usize {
        self.instances.iter().filter(|i| i.label).count()
    }

    /// Instances from one domain / from every other domain.
    pub fn split_by_domain(&self, holdout: &str) -> (LabeledDataset, LabeledDataset) {
        let (test, train): (Vec<Instance>, Vec<Instance>) = self
            .instances
            .iter()
            .cloned()
            .partition(|i| i.domain == holdout);
        (
            LabeledDataset { instances: train, schema: self.schema.clone() },
            LabeledDataset { instances: test, schema: self.schema.clone() },
        )
    }
}

/// Pronounce-corrupt-decode-align every unique query. The spoken form uses
/// the full lexicon pronunciation per word (G2P only for uncovered words);
/// decode failures are recorded as all-deletion alignments.
pub fn run_loop(
    qs: &QuerySet,
    model: &BackoffModel,
    lexicon: &Lexicon,
    rules: &G2PRules,
    channel: &NoiseChannel,
    params: &DecoderParams,
) -> ErrorCorpus {
    let inventory = PhonemeInventory::from_lexicon(lexicon, 0.10);
    let index = PronIndex::build(lexicon, model.vocab());
    let bands = partition_bands(qs);
    let mut records = Vec::with_capacity(qs.queries.len());
    for (qi, q) in qs.queries.iter().enumerate() {
        let mut spoken = Pron::new();
        for w in &q.tokens {
            spoken.extend(lexicon.spoken(w, rules));
        }
        let corrupted = channel.corrupt(&spoken, &inventory, qi as u64);
        let encoded = index.encode(&corrupted);
        let cands = span_candidates(&index, &encoded, params.d_max);
        let (hypothesis, alignment) =
            match decode_spans(&index, &cands, encoded.len(), model, params) {
                Ok(r) => {
                    let a = align(&q.tokens, &r.hypothesis);
                    (r.hypothesis, a)
                }
                Err(_) => (Vec::new(), Alignment::all_deletions(q.tokens.len())),
            };
        records.push(ErrorRecord {
            tokens: q.tokens.clone(),
            tags: q.tags.clone(),
            domain: q.domain.clone(),
            band: bands[qi],
            hypothesis,
            alignment,
        });
    }
    ErrorCorpus { records }
}

/// Label all maximal-order n-grams ending at each reference token: positive
/// when the target token was substituted or deleted. Instances are
/// deduplicated per (domain, n-gram) with label = OR and counts summed.
pub fn label_instances(ec: &ErrorCorpus, order: usize) -> LabeledDataset {
    assert!(order >= 2);
    let mut instances: Vec<Instance> = Vec::new();
    let mut index: HashMap<(String, Vec<String>), usize> = HashMap::new();
    for rec in &ec.records {
        for i in 0..rec.tokens.len() {
            let (ngram, tags) = instance_ngram(&rec.tokens, &rec.tags, i, order);
            let positive = !rec.alignment.ref_token_matched(i);
            let key = (rec.domain.clone(), ngram.clone());
            match index.get(&key) {
                Some(&at) => {
                    instances[at].label |= positive;
                    instances[at].count += 1;
                }
                None => {
                    index.insert(key, instances.len());
                    instances.push(Instance {
                        ngram,
                        label: positive,
                        count: 1,
                        domain: rec.domain.clone(),
                        tags,
                        features: None,
                    });
                }
            }
        }
    }
    LabeledDataset { instances, schema: None }
}

/// The n-gram of up to `order` tokens ending at position i, padded with
/// `<s>` on the left when the query is too short.
fn instance_ngram(
    tokens: &[String],
    tags: &[Tag],
    i: usize,
    order: usize,
) -> (Vec<String>, Vec<Tag>) {
    if i + 1 >= order {
        let start = i + 1 - order;
        (tokens[start..=i].to_vec(), tags[start..=i].to_vec())
    } else {
        let mut ng = Vec::with_capacity(i + 2);
        let mut tg = Vec::with_capacity(i + 2);
        ng.push(BOS.to_string());
        tg.push(Tag::Template);
        ng.extend(tokens[..=i].iter().cloned());
        tg.extend(tags[..=i].iter().cloned());
        (ng, tg)
    }
}

/// Keep list from the positively labeled instances: all contiguous
/// sub-n-grams of orders 2..=len of each positive n-gram.
pub fn error_keeplist(ds: &LabeledDataset) -> KeepList {
    let mut kl = KeepList::new(Provenance::Eep);
    for inst in ds.instances.iter().filter(|i| i.label) {
        insert_sub_ngrams(&mut kl, &inst.ngram);
    }
    kl
}

pub(crate) fn insert_sub_ngrams(kl: &mut KeepList, ngram: &[String]) {
    for n in 2..=ngram.len() {
        for win in ngram.windows(n) {
            kl.insert(win);
        }
    }
}

/// Dataset file: `label TAB count TAB ngram TAB features TAB domain TAB tags`
/// with a `#schema` header when features are filled. Features are
/// comma-separated; `-` marks unfilled vectors.
pub fn write_dataset(ds: &LabeledDataset) -> String {
    let mut out = String::new();
    if let Some(schema) = &ds.schema {
        out.push_str(&format!("#schema {schema}\n"));
    }
    for inst in &ds.instances {
        let feats = match &inst.features {
            Some(v) => v
                .values()
                .iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(","),
            None => "-".to_string(),
        };
        let tags: String = inst.tags.iter().map(|t| t.as_char()).collect();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            u8::from(inst.label),
            inst.count,
            inst.ngram.join(" "),
            feats,
            inst.domain,
            tags
        ));
    }
    out
}

pub fn parse_dataset(text: &str, name: &str) -> Result<LabeledDataset> {
    use crate::error::Error;
    let mut ds = LabeledDataset::default();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim_end();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix("#schema ") {
            ds.schema = Some(rest.trim().to_string());
            continue;
        }
        if t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split('\t').collect();
        if fields.len() != 6 {
            return Err(Error::parse(name, i + 1, "expected 6 tab-separated fields"));
        }
        let label = match fields[0] {
            "0" => false,
            "1" => true,
            other => return Err(Error::parse(name, i + 1, format!("bad label {other:?}"))),
        };
        let count: u64 = fields[1]
            .parse()
            .map_err(|_| Error::parse(name, i + 1, format!("bad count {:?}", fields[1])))?;
        let ngram: Vec<String> = fields[2].split_whitespace().map(str::to_string).collect();
        if ngram.is_empty() {
            return Err(Error::parse(name, i + 1, "empty n-gram"));
        }
        let features = if fields[3] == "-" {
            None
        } else {
            let vals: std::result::Result<Vec<f64>, _> =
                fields[3].split(',').map(str::parse::<f64>).collect();
            let vals =
                vals.map_err(|_| Error::parse(name, i + 1, "non-numeric feature value"))?;
            Some(FeatureVector::new(vals))
        };
        let tags: Vec<Tag> = fields[5]
            .chars()
            .map(|c| if c == 'E' { Tag::Entity } else { Tag::Template })
            .collect();
        if tags.len() != ngram.len() {
            return Err(Error::parse(name, i + 1, "tag string length differs from n-gram"));
        }
        ds.instances.push(Instance {
            ngram,
            label,
            count,
            domain: fields[4].to_string(),
            tags,
            features,
        });
    }
    Ok(ds)
}
