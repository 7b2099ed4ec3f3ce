//! Synthetic query expansion from templates and entity catalogs, band
//! partitioning by cumulative probability mass, and QEP keep-list
//! extraction.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::keeplist::{KeepList, Provenance};
use crate::vocab::{BOS, EOS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateToken {
    Literal(String),
    Slot(String),
}

/// One query template: literal tokens and slot tags, with a prior weight
/// and a domain label.
#[derive(Debug, Clone)]
pub struct Template {
    pub weight: f64,
    pub domain: String,
    pub tokens: Vec<TemplateToken>,
}

/// Entities that can fill each slot tag, with prior weights. Entities may
/// span several tokens.
#[derive(Debug, Clone, Default)]
pub struct EntityCatalog {
    pub slots: BTreeMap<String, Vec<(Vec<String>, f64)>>,
}

/// Per-token origin: filled from an entity list or part of the template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Entity,
    Template,
}

impl Tag {
    pub fn as_char(self) -> char {
        match self {
            Tag::Entity => 'E',
            Tag::Template => 'T',
        }
    }
}

#[derive(Debug, Clone)]
pub struct Query {
    pub tokens: Vec<String>,
    pub prob: f64,
    pub domain: String,
    pub tags: Vec<Tag>,
}

/// Unique queries with probabilities normalized to 1 over the set.
#[derive(Debug, Clone, Default)]
pub struct QuerySet {
    pub queries: Vec<Query>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Head,
    Torso,
    Tail,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::Head => "head",
            Band::Torso => "torso",
            Band::Tail => "tail",
        }
    }
}

/// Expand templates against the catalog. If the full expansion exceeds
/// `limit`, unique queries are sampled without replacement proportionally to
/// their probability, deterministically under `seed`.
pub fn expand(
    templates: &[Template],
    catalog: &EntityCatalog,
    limit: usize,
    seed: u64,
) -> Result<QuerySet> {
    assert!(limit >= 1);
    for t in templates {
        for tok in &t.tokens {
            if let TemplateToken::Slot(tag) = tok {
                if !catalog.slots.contains_key(tag) {
                    return Err(Error::UnknownSlotTag(tag.clone()));
                }
            }
        }
    }

    let combos_of = |t: &Template| -> usize {
        t.tokens
            .iter()
            .map(|tok| match tok {
                TemplateToken::Slot(tag) => catalog.slots[tag].len(),
                _ => 1,
            })
            .product()
    };
    let total: usize = templates.iter().map(combos_of).sum();

    let mut queries: Vec<Query> = Vec::new();
    let mut index: HashMap<Vec<String>, usize> = HashMap::new();

    let push = |queries: &mut Vec<Query>, index: &mut HashMap<Vec<String>, usize>, q: Query, merge: bool| {
        if let Some(&i) = index.get(&q.tokens) {
            if merge {
                queries[i].prob += q.prob;
            }
        } else {
            index.insert(q.tokens.clone(), queries.len());
            queries.push(q);
        }
    };

    if total <= limit {
        for t in templates {
            let slots: Vec<&str> = t
                .tokens
                .iter()
                .filter_map(|tok| match tok {
                    TemplateToken::Slot(tag) => Some(tag.as_str()),
                    _ => None,
                })
                .collect();
            let mut choice = vec![0usize; slots.len()];
            loop {
                let q = instantiate(t, catalog, &choice);
                push(&mut queries, &mut index, q, true);
                // mixed-radix increment over the slot choices
                let mut pos = slots.len();
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    choice[pos] += 1;
                    if choice[pos] < catalog.slots[slots[pos]].len() {
                        break;
                    }
                    choice[pos] = 0;
                    if pos == 0 {
                        pos = usize::MAX;
                        break;
                    }
                }
                if pos == usize::MAX || slots.is_empty() {
                    break;
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tweights: Vec<f64> = templates.iter().map(|t| t.weight).collect();
        let mut attempts = 0usize;
        let max_attempts = limit.saturating_mul(50);
        while queries.len() < limit && attempts < max_attempts {
            attempts += 1;
            let t = &templates[weighted_pick(&mut rng, &tweights)];
            let choice: Vec<usize> = t
                .tokens
                .iter()
                .filter_map(|tok| match tok {
                    TemplateToken::Slot(tag) => {
                        let weights: Vec<f64> =
                            catalog.slots[tag].iter().map(|(_, w)| *w).collect();
                        Some(weighted_pick(&mut rng, &weights))
                    }
                    _ => None,
                })
                .collect();
            let q = instantiate(t, catalog, &choice);
            push(&mut queries, &mut index, q, false);
        }
    }

    let mass: f64 = queries.iter().map(|q| q.prob).sum();
    for q in &mut queries {
        q.prob /= mass;
    }
    Ok(QuerySet { queries })
}

fn instantiate(t: &Template, catalog: &EntityCatalog, choice: &[usize]) -> Query {
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let mut weight = t.weight;
    let mut slot_idx = 0;
    for tok in &t.tokens {
        match tok {
            TemplateToken::Literal(w) => {
                tokens.push(w.clone());
                tags.push(Tag::Template);
            }
            TemplateToken::Slot(tag) => {
                let (entity, w) = &catalog.slots[tag][choice[slot_idx]];
                slot_idx += 1;
                weight *= w;
                for e in entity {
                    tokens.push(e.clone());
                    tags.push(Tag::Entity);
                }
            }
        }
    }
    Query {
        tokens,
        prob: weight,
        domain: t.domain.clone(),
        tags,
    }
}

fn weighted_pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        r -= w;
        if r <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Head/torso/tail label per query by descending-probability cumulative
/// mass (10% / 50% boundaries); a query straddling a boundary goes to the
/// earlier band. Ties sort lexicographically for determinism.
pub fn partition_bands(qs: &QuerySet) -> Vec<Band> {
    let mut order: Vec<usize> = (0..qs.queries.len()).collect();
    order.sort_by(|&a, &b| {
        let qa = &qs.queries[a];
        let qb = &qs.queries[b];
        qb.prob
            .partial_cmp(&qa.prob)
            .unwrap()
            .then_with(|| qa.tokens.cmp(&qb.tokens))
    });
    let total: f64 = qs.queries.iter().map(|q| q.prob).sum();
    let mut bands = vec![Band::Tail; qs.queries.len()];
    let mut cum_before = 0.0;
    for &i in &order {
        let band = if cum_before < 0.10 * total - 1e-9 {
            Band::Head
        } else if cum_before < 0.50 * total - 1e-9 {
            Band::Torso
        } else {
            Band::Tail
        };
        bands[i] = band;
        cum_before += qs.queries[i].prob;
    }
    bands
}

/// All n-grams of orders 2..=order from every query, with sentence padding,
/// deduplicated.
pub fn extract_qep_keeplist(qs: &QuerySet, order: usize) -> KeepList {
    let mut kl = KeepList::new(Provenance::Qep);
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    for q in &qs.queries {
        let mut padded = Vec::with_capacity(q.tokens.len() + 2);
        padded.push(BOS.to_string());
        padded.extend(q.tokens.iter().cloned());
        padded.push(EOS.to_string());
        for n in 2..=order {
            for win in padded.windows(n) {
                if seen.insert(win.to_vec()) {
                    kl.insert(win);
                }
            }
        }
    }
    kl
}

/// Templates file: `weight TAB domain TAB tokens`, slot tags written `<tag>`.
pub fn parse_templates(text: &str, name: &str) -> Result<Vec<Template>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.splitn(3, '\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(name, i + 1, "expected weight TAB domain TAB tokens"));
        }
        let weight: f64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(name, i + 1, format!("bad weight {:?}", fields[0])))?;
        if weight <= 0.0 {
            return Err(Error::parse(name, i + 1, "weights must be positive"));
        }
        let tokens: Vec<TemplateToken> = fields[2]
            .split_whitespace()
            .map(|tok| {
                if tok.len() > 2 && tok.starts_with('<') && tok.ends_with('>') {
                    TemplateToken::Slot(tok[1..tok.len() - 1].to_string())
                } else {
                    TemplateToken::Literal(tok.to_string())
                }
            })
            .collect();
        if tokens.is_empty() {
            return Err(Error::parse(name, i + 1, "template has no tokens"));
        }
        out.push(Template {
            weight,
            domain: fields[1].trim().to_string(),
            tokens,
        });
    }
    if out.is_empty() {
        return Err(Error::parse(name, 0, "no templates"));
    }
    Ok(out)
}

/// Catalog file: `tag TAB weight TAB entity tokens`.
pub fn parse_catalog(text: &str, name: &str) -> Result<EntityCatalog> {
    let mut cat = EntityCatalog::default();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.splitn(3, '\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(name, i + 1, "expected tag TAB weight TAB entity"));
        }
        let weight: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(name, i + 1, format!("bad weight {:?}", fields[1])))?;
        if weight <= 0.0 {
            return Err(Error::parse(name, i + 1, "weights must be positive"));
        }
        let entity: Vec<String> = fields[2].split_whitespace().map(str::to_string).collect();
        if entity.is_empty() {
            return Err(Error::parse(name, i + 1, "empty entity"));
        }
        cat.slots
            .entry(fields[0].trim().to_string())
            .or_default()
            .push((entity, weight));
    }
    if cat.slots.is_empty() {
        return Err(Error::parse(name, 0, "no catalog entries"));
    }
    Ok(cat)
}

impl QuerySet {
    /// Query set file: `probability TAB domain TAB tokens TAB tag-string`.
    pub fn parse(text: &str, name: &str) -> Result<QuerySet> {
        let mut queries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = t.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    name,
                    i + 1,
                    "expected probability TAB domain TAB tokens TAB tags",
                ));
            }
            let prob: f64 = fields[0]
                .parse()
                .map_err(|_| Error::parse(name, i + 1, format!("bad probability {:?}", fields[0])))?;
            let tokens: Vec<String> = fields[2].split_whitespace().map(str::to_string).collect();
            let tags: Vec<Tag> = fields[3]
                .chars()
                .map(|c| if c == 'E' { Tag::Entity } else { Tag::Template })
                .collect();
            if tags.len() != tokens.len() {
                return Err(Error::parse(name, i + 1, "tag string length differs from tokens"));
            }
            queries.push(Query {
                tokens,
                prob,
                domain: fields[1].to_string(),
                tags,
            });
        }
        Ok(QuerySet { queries })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for q in &self.queries {
            let tags: String = q.tags.iter().map(|t| t.as_char()).collect();
            out.push_str(&format!(
                "{:.12e}\t{}\t{}\t{}\n",
                q.prob,
                q.domain,
                q.tokens.join(" "),
                tags
            ));
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.queries.iter().map(|q| q.prob).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog(entries: &[(&str, &str, f64)]) -> EntityCatalog {
        let mut cat = EntityCatalog::default();
        for (tag, ent, w) in entries {
            cat.slots
                .entry(tag.to_string())
                .or_default()
                .push((ent.split_whitespace().map(str::to_string).collect(), *w));
        }
        cat
    }

    fn template(weight: f64, domain: &str, spec: &str) -> Template {
        Template {
            weight,
            domain: domain.to_string(),
            tokens: spec
                .split_whitespace()
                .map(|t| {
                    if t.starts_with('<') {
                        TemplateToken::Slot(t[1..t.len() - 1].to_string())
                    } else {
                        TemplateToken::Literal(t.to_string())
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn two_way_expansion_is_uniform() {
        let cat = catalog(&[("x", "donda", 0.5), ("x", "hello", 0.5)]);
        let ts = vec![template(1.0, "music", "play <x>")];
        let qs = expand(&ts, &cat, 100, 1).unwrap();
        assert_eq!(qs.queries.len(), 2);
        for q in &qs.queries {
            assert!((q.prob - 0.5).abs() < 1e-12);
            assert_eq!(q.tags, vec![Tag::Template, Tag::Entity]);
        }
    }

    #[test]
    fn template_weights_normalize() {
        let cat = catalog(&[("a", "one", 1.0), ("b", "two", 1.0)]);
        let ts = vec![template(3.0, "d1", "go <a>"), template(1.0, "d2", "stop <b>")];
        let qs = expand(&ts, &cat, 100, 1).unwrap();
        assert_eq!(qs.queries.len(), 2);
        assert!((qs.queries[0].prob - 0.75).abs() < 1e-12);
        assert!((qs.queries[1].prob - 0.25).abs() < 1e-12);
    }

    #[test]
    fn unknown_tag_is_named() {
        let cat = catalog(&[("x", "one", 1.0)]);
        let ts = vec![template(1.0, "d", "play <missing>")];
        match expand(&ts, &cat, 10, 1) {
            Err(Error::UnknownSlotTag(tag)) => assert_eq!(tag, "missing"),
            other => panic!("expected UnknownSlotTag, got {other:?}"),
        }
    }

    #[test]
    fn sampling_is_deterministic_and_unique() {
        let mut entries = Vec::new();
        let names = ["ada", "bo", "cy", "dee", "ed", "fi", "gil", "hank", "ivy", "jo"];
        for (i, n) in names.iter().enumerate() {
            entries.push(("p", *n, 1.0 / (i + 1) as f64));
            entries.push(("q", *n, 1.0));
        }
        let cat = catalog(&entries);
        let ts = vec![template(1.0, "d", "call <p> for <q>")];
        let a = expand(&ts, &cat, 20, 42).unwrap();
        let b = expand(&ts, &cat, 20, 42).unwrap();
        assert_eq!(a.queries.len(), 20);
        assert!((a.total_mass() - 1.0).abs() < 1e-9);
        let ta: Vec<_> = a.queries.iter().map(|q| q.tokens.clone()).collect();
        let tb: Vec<_> = b.queries.iter().map(|q| q.tokens.clone()).collect();
        assert_eq!(ta, tb);
        let uniq: HashSet<_> = ta.iter().collect();
        assert_eq!(uniq.len(), ta.len());
    }

    #[test]
    fn uniform_ten_queries_band_1_4_5() {
        let mut qs = QuerySet::default();
        for i in 0..10 {
            qs.queries.push(Query {
                tokens: vec![format!("q{i}")],
                prob: 0.1,
                domain: "d".into(),
                tags: vec![Tag::Template],
            });
        }
        let bands = partition_bands(&qs);
        // ties broken lexicographically: q0 sorts first
        assert_eq!(bands[0], Band::Head);
        for b in &bands[1..5] {
            assert_eq!(*b, Band::Torso);
        }
        for b in &bands[5..] {
            assert_eq!(*b, Band::Tail);
        }
    }

    #[test]
    fn dominant_query_is_head() {
        let mut qs = QuerySet::default();
        qs.queries.push(Query {
            tokens: vec!["big".into()],
            prob: 0.6,
            domain: "d".into(),
            tags: vec![Tag::Template],
        });
        for i in 0..4 {
            qs.queries.push(Query {
                tokens: vec![format!("q{i}")],
                prob: 0.1,
                domain: "d".into(),
                tags: vec![Tag::Template],
            });
        }
        let bands = partition_bands(&qs);
        assert_eq!(bands[0], Band::Head);
        // everything after the 0.6 query sits past the 50% boundary
        for b in &bands[1..] {
            assert_eq!(*b, Band::Tail);
        }
    }

    #[test]
    fn band_mass_within_discretization_bound() {
        let cat = catalog(&[
            ("x", "a", 8.0),
            ("x", "b", 4.0),
            ("x", "c", 2.0),
            ("x", "d", 1.0),
            ("x", "e", 0.5),
            ("x", "f", 0.25),
        ]);
        let ts = vec![template(1.0, "d", "play <x>"), template(0.5, "d", "find <x>")];
        let qs = expand(&ts, &cat, 100, 3).unwrap();
        let bands = partition_bands(&qs);
        let max_p = qs.queries.iter().map(|q| q.prob).fold(0.0, f64::max);
        let head_mass: f64 = qs
            .queries
            .iter()
            .zip(&bands)
            .filter(|(_, b)| **b == Band::Head)
            .map(|(q, _)| q.prob)
            .sum();
        let ht_mass: f64 = qs
            .queries
            .iter()
            .zip(&bands)
            .filter(|(_, b)| **b != Band::Tail)
            .map(|(q, _)| q.prob)
            .sum();
        assert!((head_mass - 0.10).abs() <= max_p + 1e-12);
        assert!((ht_mass - 0.50).abs() <= max_p + 1e-12);
    }

    #[test]
    fn qep_bigrams_of_one_query() {
        let mut qs = QuerySet::default();
        qs.queries.push(Query {
            tokens: vec!["a".into(), "b".into()],
            prob: 1.0,
            domain: "d".into(),
            tags: vec![Tag::Template, Tag::Template],
        });
        let kl = extract_qep_keeplist(&qs, 2);
        assert_eq!(kl.len(), 3);
        assert!(kl.contains(&["<s>".into(), "a".into()]));
        assert!(kl.contains(&["a".into(), "b".into()]));
        assert!(kl.contains(&["b".into(), "</s>".into()]));
        // duplicates add nothing
        let dup = qs.queries[0].clone();
        qs.queries.push(dup);
        assert_eq!(extract_qep_keeplist(&qs, 2).len(), 3);
    }

    #[test]
    fn files_round_trip() {
        let ttext = "3.0\tmusic\tplay <artist>\n1.0\tsports\twho won the game\n";
        let ts = parse_templates(ttext, "t").unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[0].tokens.len(), 2);
        let ctext = "artist\t2.0\tkanye west\nartist\t1.0\tadele\n";
        let cat = parse_catalog(ctext, "c").unwrap();
        assert_eq!(cat.slots["artist"].len(), 2);
        let qs = expand(&ts, &cat, 10, 1).unwrap();
        let parsed = QuerySet::parse(&qs.to_text(), "q").unwrap();
        assert_eq!(parsed.queries.len(), qs.queries.len());
        for (a, b) in parsed.queries.iter().zip(&qs.queries) {
            assert_eq!(a.tokens, b.tokens);
            assert!((a.prob - b.prob).abs() < 1e-15);
            assert_eq!(a.tags, b.tags);
        }
    }
}
