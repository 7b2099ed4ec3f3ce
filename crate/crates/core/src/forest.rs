//! Random-forest misrecognition classifier: bootstrapped CART trees on
//! Gini impurity, per-feature importance, recall@k evaluation, and keep-list
//! selection from ranked instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eep::{insert_sub_ngrams, LabeledDataset};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::keeplist::{KeepList, Provenance};

#[derive(Debug, Clone)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features considered per split; None means ceil(sqrt(F)).
    pub split_features: Option<usize>,
    pub seed: u64,
    /// Weight instances by their occurrence count (off by default:
    /// deduplicated instances are used as-is).
    pub weight_by_count: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 100,
            max_depth: 12,
            min_leaf: 5,
            split_features: None,
            seed: 0,
            weight_by_count: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Fraction of positive training weight at the leaf.
        prob: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    fn leaf_prob(&self, v: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { prob } => return *prob,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if v[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
    pub feature_names: Vec<String>,
    pub schema: String,
    pub config: ForestConfig,
    /// Mean Gini impurity decrease per feature, normalized to sum 1.
    pub importance: Vec<f64>,
}

/// Deterministic bootstrap sample for one tree (shared with out-of-bag
/// evaluation).
pub fn bootstrap_indices(seed: u64, tree: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(tree as u64));
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

struct TrainData<'a> {
    rows: Vec<&'a [f64]>,
    labels: Vec<bool>,
    weights: Vec<f64>,
}

fn train_data<'a>(ds: &'a LabeledDataset, cfg: &ForestConfig) -> Result<TrainData<'a>> {
    let mut rows = Vec::with_capacity(ds.instances.len());
    let mut labels = Vec::with_capacity(ds.instances.len());
    let mut weights = Vec::with_capacity(ds.instances.len());
    for inst in &ds.instances {
        let f = inst
            .features
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("instance has no features".into()))?;
        rows.push(f.values());
        labels.push(inst.label);
        weights.push(if cfg.weight_by_count { inst.count as f64 } else { 1.0 });
    }
    Ok(TrainData { rows, labels, weights })
}

/// Train a forest. Errors when fewer than two instances or only one class
/// is present.
pub fn train(ds: &LabeledDataset, cfg: &ForestConfig) -> Result<RandomForest> {
    let data = train_data(ds, cfg)?;
    let n = data.rows.len();
    if n < 2 {
        return Err(Error::DegenerateLabels);
    }
    let any_pos = data.labels.iter().any(|&l| l);
    let any_neg = data.labels.iter().any(|&l| !l);
    if !any_pos || !any_neg {
        return Err(Error::DegenerateLabels);
    }
    let n_features = data.rows[0].len();
    if data.rows.iter().any(|r| r.len() != n_features) {
        return Err(Error::SchemaMismatch {
            expected: format!("{n_features} features"),
            got: "ragged feature rows".into(),
        });
    }
    let split_features = cfg
        .split_features
        .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
        .clamp(1, n_features);

    let (schema, feature_names) = schema_of(ds, n_features);
    let mut importance = vec![0.0f64; n_features];
    let mut trees = Vec::with_capacity(cfg.trees);
    for t in 0..cfg.trees {
        let sample = bootstrap_indices(cfg.seed, t, n);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed_0000).wrapping_add(t as u64));
        let root_weight: f64 = sample.iter().map(|&i| data.weights[i]).sum();
        let mut tree = Tree::default();
        grow(
            &data, &sample, 0, cfg, split_features, root_weight, &mut rng, &mut tree,
            &mut importance,
        );
        trees.push(tree);
    }
    for imp in importance.iter_mut() {
        *imp /= cfg.trees as f64;
    }
    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        for imp in importance.iter_mut() {
            *imp /= total;
        }
    } else {
        importance.fill(1.0 / n_features as f64);
    }

    Ok(RandomForest {
        trees,
        feature_names,
        schema,
        config: cfg.clone(),
        importance,
    })
}

fn schema_of(ds: &LabeledDataset, n_features: usize) -> (String, Vec<String>) {
    match &ds.schema {
        Some(header) => {
            let names: Vec<String> = header
                .split_once(':')
                .map(|(_, cols)| {
                    cols.trim()
                        .split(',')
                        .map(|c| c.split(':').next().unwrap_or(c).to_string())
                        .collect()
                })
                .unwrap_or_default();
            if names.len() == n_features {
                (header.clone(), names)
            } else {
                (header.clone(), (0..n_features).map(|i| format!("f{i}")).collect())
            }
        }
        None => (
            "unversioned".to_string(),
            (0..n_features).map(|i| format!("f{i}")).collect(),
        ),
    }
}

fn gini(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

#[allow(clippy::too_many_arguments)]
fn grow(
    data: &TrainData,
    idxs: &[usize],
    depth: usize,
    cfg: &ForestConfig,
    split_features: usize,
    root_weight: f64,
    rng: &mut ChaCha8Rng,
    tree: &mut Tree,
    importance: &mut [f64],
) -> usize {
    let total: f64 = idxs.iter().map(|&i| data.weights[i]).sum();
    let pos: f64 = idxs
        .iter()
        .filter(|&&i| data.labels[i])
        .map(|&i| data.weights[i])
        .sum();
    let node_impurity = gini(pos, total);
    let make_leaf = |tree: &mut Tree| {
        tree.nodes.push(TreeNode::Leaf { prob: if total > 0.0 { pos / total } else { 0.0 } });
        tree.nodes.len() - 1
    };
    if depth >= cfg.max_depth || idxs.len() < 2 * cfg.min_leaf || node_impurity == 0.0 {
        return make_leaf(tree);
    }

    // sample distinct candidate features
    let n_features = data.rows[0].len();
    let mut pool: Vec<usize> = (0..n_features).collect();
    for i in 0..split_features.min(n_features) {
        let j = rng.gen_range(i..n_features);
        pool.swap(i, j);
    }
    let candidates = &pool[..split_features.min(n_features)];

    let mut best: Option<(f64, usize, f64)> = None; // (decrease, feature, threshold)
    let mut column: Vec<(f64, bool, f64)> = Vec::with_capacity(idxs.len());
    for &f in candidates {
        column.clear();
        column.extend(idxs.iter().map(|&i| (data.rows[i][f], data.labels[i], data.weights[i])));
        column.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut left_pos = 0.0;
        let mut left_total = 0.0;
        let mut left_count = 0usize;
        for k in 0..column.len() - 1 {
            let (value, label, weight) = column[k];
            left_total += weight;
            left_count += 1;
            if label {
                left_pos += weight;
            }
            let next = column[k + 1].0;
            if next <= value {
                continue; // no boundary between equal values
            }
            if left_count < cfg.min_leaf || column.len() - left_count < cfg.min_leaf {
                continue;
            }
            let right_total = total - left_total;
            let right_pos = pos - left_pos;
            let decrease = node_impurity
                - left_total / total * gini(left_pos, left_total)
                - right_total / total * gini(right_pos, right_total);
            if decrease > best.map_or(0.0, |(d, _, _)| d) + 1e-15 {
                best = Some((decrease, f, 0.5 * (value + next)));
            }
        }
    }

    let Some((decrease, feature, threshold)) = best else {
        return make_leaf(tree);
    };
    importance[feature] += decrease * total / root_weight;
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idxs
        .iter()
        .partition(|&&i| data.rows[i][feature] <= threshold);
    let at = tree.nodes.len();
    tree.nodes.push(TreeNode::Split { feature, threshold, left: 0, right: 0 });
    let left = grow(data, &left_idx, depth + 1, cfg, split_features, root_weight, rng, tree, importance);
    let right = grow(data, &right_idx, depth + 1, cfg, split_features, root_weight, rng, tree, importance);
    if let TreeNode::Split { left: l, right: r, .. } = &mut tree.nodes[at] {
        *l = left;
        *r = right;
    }
    at
}

/// Mean of the per-tree leaf probabilities.
pub fn predict_proba(forest: &RandomForest, v: &FeatureVector) -> Result<f64> {
    if v.len() != forest.feature_names.len() {
        return Err(Error::SchemaMismatch {
            expected: format!("{} features ({})", forest.feature_names.len(), forest.schema),
            got: format!("{} features", v.len()),
        });
    }
    let sum: f64 = forest.trees.iter().map(|t| t.leaf_prob(v.values())).sum();
    Ok(sum / forest.trees.len() as f64)
}

/// Out-of-bag accuracy at the 0.5 decision threshold, over instances left
/// out of at least one bootstrap sample.
pub fn oob_accuracy(forest: &RandomForest, ds: &LabeledDataset) -> Result<f64> {
    let data = train_data(ds, &forest.config)?;
    let n = data.rows.len();
    let mut votes: Vec<(f64, usize)> = vec![(0.0, 0); n];
    for (t, tree) in forest.trees.iter().enumerate() {
        let mut in_bag = vec![false; n];
        for i in bootstrap_indices(forest.config.seed, t, n) {
            in_bag[i] = true;
        }
        for i in 0..n {
            if !in_bag[i] {
                votes[i].0 += tree.leaf_prob(data.rows[i]);
                votes[i].1 += 1;
            }
        }
    }
    let mut correct = 0usize;
    let mut counted = 0usize;
    for i in 0..n {
        if votes[i].1 == 0 {
            continue;
        }
        counted += 1;
        let pred = votes[i].0 / votes[i].1 as f64 >= 0.5;
        if pred == data.labels[i] {
            correct += 1;
        }
    }
    if counted == 0 {
        return Err(Error::InvalidArgument("no out-of-bag instances".into()));
    }
    Ok(correct as f64 / counted as f64)
}

/// Fraction of true positives captured when the top k% of the ranking is
/// assigned to the positive class. Ties keep input order.
pub fn recall_at_k(scores: &[(f64, bool)], k: f64) -> Result<f64> {
    assert!((0.0..=100.0).contains(&k));
    let total_pos = scores.iter().filter(|(_, l)| *l).count();
    if total_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].0.partial_cmp(&scores[a].0).unwrap());
    let take = (k * scores.len() as f64 / 100.0).floor() as usize;
    let captured = order[..take.min(scores.len())]
        .iter()
        .filter(|&&i| scores[i].1)
        .count();
    Ok(captured as f64 / total_pos as f64)
}

/// Score every instance and keep the top k% as ranked by the classifier,
/// with the same sub-n-gram closure as the error-driven keep list.
pub fn select_top_k(
    ds: &LabeledDataset,
    forest: &RandomForest,
    k: f64,
    order: usize,
) -> Result<KeepList> {
    assert!((0.0..=100.0).contains(&k));
    let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(ds.instances.len());
    for (i, inst) in ds.instances.iter().enumerate() {
        let f = inst
            .features
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("instance has no features".into()))?;
        ranked.push((predict_proba(forest, f)?, i));
    }
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
    let take = (k * ranked.len() as f64 / 100.0).floor() as usize;
    let mut kl = KeepList::new(Provenance::Aeep);
    for &(_, i) in ranked.iter().take(take) {
        let ng = &ds.instances[i].ngram;
        let capped = &ng[ng.len().saturating_sub(order)..];
        insert_sub_ngrams(&mut kl, capped);
    }
    Ok(kl)
}

/// The m highest-importance feature names, ties broken by schema order.
pub fn top_features(forest: &RandomForest, m: usize) -> Vec<String> {
    assert!(m >= 1);
    let m = if m > forest.feature_names.len() {
        log::warn!(
            "requested top-{m} of {} features; clamping",
            forest.feature_names.len()
        );
        forest.feature_names.len()
    } else {
        m
    };
    let mut order: Vec<usize> = (0..forest.feature_names.len()).collect();
    order.sort_by(|&a, &b| {
        forest.importance[b]
            .partial_cmp(&forest.importance[a])
            .unwrap()
            .then_with(|| a.cmp(&b))
    });
    order[..m]
        .iter()
        .map(|&i| forest.feature_names[i].clone())
        .collect()
}

/// Uniform random instance selection of the same closure shape, as the
/// sanity-check baseline. `fraction` in (0, 1]; exact floor(fraction * n)
/// instances are drawn without replacement.
pub fn random_keeplist(ds: &LabeledDataset, fraction: f64, seed: u64, order: usize) -> KeepList {
    assert!(fraction > 0.0 && fraction <= 1.0);
    let n = ds.instances.len();
    let amount = ((fraction * n as f64).floor() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..amount {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    let mut chosen: Vec<usize> = pool[..amount].to_vec();
    chosen.sort_unstable();
    let mut kl = KeepList::new(Provenance::Random);
    for i in chosen {
        let ng = &ds.instances[i].ngram;
        let capped = &ng[ng.len().saturating_sub(order)..];
        insert_sub_ngrams(&mut kl, capped);
    }
    kl
}

/// Same closure as select_top_k but over every instance (k = 100 ignores
/// the ranking entirely).
pub fn closure_over_all(ds: &LabeledDataset, order: usize) -> KeepList {
    let mut kl = KeepList::new(Provenance::Aeep);
    for inst in &ds.instances {
        let ng = &inst.ngram;
        let capped = &ng[ng.len().saturating_sub(order)..];
        insert_sub_ngrams(&mut kl, capped);
    }
    kl
}

/// Versioned text serialization, byte-stable across platforms.
pub fn write_forest(forest: &RandomForest) -> String {
    let mut out = String::new();
    out.push_str("#forest v1\n");
    out.push_str(&format!("schema\t{}\n", forest.schema));
    out.push_str(&format!("features\t{}\n", forest.feature_names.join(",")));
    let c = &forest.config;
    out.push_str(&format!(
        "config\ttrees={} max_depth={} min_leaf={} split_features={} seed={} weight_by_count={}\n",
        c.trees,
        c.max_depth,
        c.min_leaf,
        c.split_features.map_or("auto".to_string(), |v| v.to_string()),
        c.seed,
        c.weight_by_count
    ));
    let imp: Vec<String> = forest.importance.iter().map(|v| format!("{v}")).collect();
    out.push_str(&format!("importance\t{}\n", imp.join(",")));
    for (t, tree) in forest.trees.iter().enumerate() {
        out.push_str(&format!("tree\t{t}\n"));
        for node in &tree.nodes {
            match node {
                TreeNode::Split { feature, threshold, left, right } => {
                    out.push_str(&format!("s\t{feature}\t{threshold}\t{left}\t{right}\n"));
                }
                TreeNode::Leaf { prob } => out.push_str(&format!("l\t{prob}\n")),
            }
        }
    }
    out.push_str("end\n");
    out
}

pub fn parse_forest(text: &str, name: &str) -> Result<RandomForest> {
    let mut lines = text.lines().enumerate();
    let perr = |i: usize, msg: String| Error::parse(name, i + 1, msg);
    match lines.next() {
        Some((_, "#forest v1")) => {}
        other => {
            return Err(perr(0, format!("expected #forest v1 header, found {other:?}")));
        }
    }
    let mut schema = String::new();
    let mut feature_names: Vec<String> = Vec::new();
    let mut config = ForestConfig::default();
    let mut importance: Vec<f64> = Vec::new();
    let mut trees: Vec<Tree> = Vec::new();
    let mut done = false;
    for (i, line) in lines {
        let t = line.trim_end();
        if t.is_empty() {
            continue;
        }
        if done {
            return Err(perr(i, "content after end".into()));
        }
        if t == "end" {
            done = true;
            continue;
        }
        let (kind, rest) = t.split_once('\t').unwrap_or((t, ""));
        match kind {
            "schema" => schema = rest.to_string(),
            "features" => {
                feature_names = rest.split(',').map(str::to_string).collect();
            }
            "config" => {
                for kv in rest.split_whitespace() {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| perr(i, format!("bad config item {kv:?}")))?;
                    match k {
                        "trees" => config.trees = v.parse().map_err(|_| perr(i, "bad trees".into()))?,
                        "max_depth" => config.max_depth = v.parse().map_err(|_| perr(i, "bad max_depth".into()))?,
                        "min_leaf" => config.min_leaf = v.parse().map_err(|_| perr(i, "bad min_leaf".into()))?,
                        "split_features" => {
                            config.split_features = if v == "auto" {
                                None
                            } else {
                                Some(v.parse().map_err(|_| perr(i, "bad split_features".into()))?)
                            }
                        }
                        "seed" => config.seed = v.parse().map_err(|_| perr(i, "bad seed".into()))?,
                        "weight_by_count" => {
                            config.weight_by_count = v.parse().map_err(|_| perr(i, "bad weight_by_count".into()))?
                        }
                        _ => return Err(perr(i, format!("unknown config key {k:?}"))),
                    }
                }
            }
            "importance" => {
                let vals: std::result::Result<Vec<f64>, _> =
                    rest.split(',').map(str::parse::<f64>).collect();
                importance = vals.map_err(|_| perr(i, "non-numeric importance".into()))?;
            }
            "tree" => trees.push(Tree::default()),
            "s" => {
                let tree = trees.last_mut().ok_or_else(|| perr(i, "node before tree".into()))?;
                let fields: Vec<&str> = rest.split('\t').collect();
                if fields.len() != 4 {
                    return Err(perr(i, "split node needs 4 fields".into()));
                }
                tree.nodes.push(TreeNode::Split {
                    feature: fields[0].parse().map_err(|_| perr(i, "bad feature".into()))?,
                    threshold: fields[1].parse().map_err(|_| perr(i, "bad threshold".into()))?,
                    left: fields[2].parse().map_err(|_| perr(i, "bad left".into()))?,
                    right: fields[3].parse().map_err(|_| perr(i, "bad right".into()))?,
                });
            }
            "l" => {
                let tree = trees.last_mut().ok_or_else(|| perr(i, "node before tree".into()))?;
                tree.nodes.push(TreeNode::Leaf {
                    prob: rest.parse().map_err(|_| perr(i, "bad leaf".into()))?,
                });
            }
            _ => return Err(perr(i, format!("unknown record {kind:?}"))),
        }
    }
    if !done {
        return Err(Error::parse(name, 0, "missing end record"));
    }
    if trees.is_empty() || feature_names.is_empty() {
        return Err(Error::parse(name, 0, "empty forest"));
    }
    Ok(RandomForest {
        trees,
        feature_names,
        schema,
        config,
        importance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eep::Instance;
    use crate::querygen::Tag;

    fn dataset(rows: &[(Vec<f64>, bool)]) -> LabeledDataset {
        LabeledDataset {
            instances: rows
                .iter()
                .enumerate()
                .map(|(i, (v, label))| Instance {
                    ngram: vec![format!("w{i}"), format!("x{i}")],
                    label: *label,
                    count: 1,
                    domain: "d".into(),
                    tags: vec![Tag::Template, Tag::Template],
                    features: Some(FeatureVector::new(v.clone())),
                })
                .collect(),
            schema: Some("v1-test: a:word,b:word".into()),
        }
    }

    fn separable(n: usize) -> LabeledDataset {
        let rows: Vec<(Vec<f64>, bool)> = (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                (vec![x, 0.5], x > 0.6)
            })
            .collect();
        dataset(&rows)
    }

    #[test]
    fn separable_data_reaches_perfect_training_accuracy() {
        let ds = separable(200);
        let cfg = ForestConfig { trees: 20, min_leaf: 1, seed: 3, ..Default::default() };
        let forest = train(&ds, &cfg).unwrap();
        for inst in &ds.instances {
            let p = predict_proba(&forest, inst.features.as_ref().unwrap()).unwrap();
            assert_eq!(p >= 0.5, inst.label, "misclassified {:?}", inst.features);
        }
        // the informative feature dominates the importance ranking
        assert_eq!(top_features(&forest, 1), vec!["a".to_string()]);
        let total: f64 = forest.importance.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn same_seed_gives_byte_equal_serialization() {
        let ds = separable(100);
        let cfg = ForestConfig { trees: 10, seed: 42, ..Default::default() };
        let a = write_forest(&train(&ds, &cfg).unwrap());
        let b = write_forest(&train(&ds, &cfg).unwrap());
        assert_eq!(a, b);
        // round trip
        let parsed = parse_forest(&a, "forest").unwrap();
        assert_eq!(write_forest(&parsed), a);
    }

    #[test]
    fn single_class_is_rejected() {
        let rows: Vec<(Vec<f64>, bool)> = (0..10).map(|i| (vec![i as f64], false)).collect();
        match train(&dataset(&rows), &ForestConfig::default()) {
            Err(Error::DegenerateLabels) => {}
            other => panic!("expected DegenerateLabels, got {other:?}"),
        }
    }

    #[test]
    fn xor_clusters_reach_high_oob_accuracy() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(9);
        let rows: Vec<(Vec<f64>, bool)> = (0..1000)
            .map(|_| {
                let cx = f64::from(rng.gen::<bool>());
                let cy = f64::from(rng.gen::<bool>());
                let x = cx + rng.gen::<f64>() * 0.3 - 0.15;
                let y = cy + rng.gen::<f64>() * 0.3 - 0.15;
                (vec![x, y], (cx > 0.5) != (cy > 0.5))
            })
            .collect();
        let ds = dataset(&rows);
        let cfg = ForestConfig { trees: 100, max_depth: 6, min_leaf: 5, seed: 7, ..Default::default() };
        let forest = train(&ds, &cfg).unwrap();
        let acc = oob_accuracy(&forest, &ds).unwrap();
        assert!(acc >= 0.95, "out-of-bag accuracy {acc}");
    }

    #[test]
    fn predict_matches_single_tree_and_schema_checked() {
        let ds = separable(60);
        let cfg = ForestConfig { trees: 1, min_leaf: 1, seed: 5, ..Default::default() };
        let forest = train(&ds, &cfg).unwrap();
        let v = FeatureVector::new(vec![0.9, 0.5]);
        let p = predict_proba(&forest, &v).unwrap();
        assert_eq!(p, forest.trees[0].leaf_prob(v.values()));
        let bad = FeatureVector::new(vec![0.9]);
        assert!(matches!(predict_proba(&forest, &bad), Err(Error::SchemaMismatch { .. })));
    }

    #[test]
    fn recall_at_k_endpoints_and_perfect_ranking() {
        let scores: Vec<(f64, bool)> = (0..100)
            .map(|i| (1.0 - i as f64 / 100.0, i < 30))
            .collect();
        assert_eq!(recall_at_k(&scores, 100.0).unwrap(), 1.0);
        assert_eq!(recall_at_k(&scores, 0.0).unwrap(), 0.0);
        assert_eq!(recall_at_k(&scores, 30.0).unwrap(), 1.0);
        assert!((recall_at_k(&scores, 15.0).unwrap() - 0.5).abs() < 1e-12);
        // monotone non-decreasing in k
        let mut prev = 0.0;
        for k in 0..=20 {
            let r = recall_at_k(&scores, k as f64 * 5.0).unwrap();
            assert!(r >= prev);
            prev = r;
        }
        assert!(matches!(
            recall_at_k(&[(0.5, false)], 50.0),
            Err(Error::NoPositives)
        ));
    }

    #[test]
    fn select_top_k_endpoints() {
        let ds = separable(50);
        let cfg = ForestConfig { trees: 10, min_leaf: 1, seed: 2, ..Default::default() };
        let forest = train(&ds, &cfg).unwrap();
        let all = select_top_k(&ds, &forest, 100.0, 4).unwrap();
        assert_eq!(all.len(), closure_over_all(&ds, 4).len());
        let none = select_top_k(&ds, &forest, 0.0, 4).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn random_keeplist_is_seeded_and_sized() {
        let ds = separable(50);
        let a = random_keeplist(&ds, 0.4, 11, 4);
        let b = random_keeplist(&ds, 0.4, 11, 4);
        let c = random_keeplist(&ds, 0.4, 12, 4);
        assert_eq!(a.to_text(), b.to_text());
        assert!(a.len() <= 20); // 20 bigram instances, dedup may shrink
        assert!(!a.is_empty());
        let full = random_keeplist(&ds, 1.0, 1, 4);
        assert_eq!(full.len(), closure_over_all(&ds, 4).len());
        let _ = c;
    }

    #[test]
    fn top_features_clamps_and_orders() {
        let ds = separable(100);
        let cfg = ForestConfig { trees: 10, min_leaf: 1, seed: 8, ..Default::default() };
        let forest = train(&ds, &cfg).unwrap();
        let all = top_features(&forest, 10);
        assert_eq!(all.len(), 2);
        assert_eq!(all[0], "a");
    }
}
