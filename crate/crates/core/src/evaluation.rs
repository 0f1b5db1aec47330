//! Link-prediction metrics and linear-probe node classification.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, Edge, Graph};
use crate::models::{self, ModelParams};
use crate::numcore::{adam_step, AdamConfig, AdamState, DenseMatrix, Tape};
use crate::rng::{self, derive_seed};

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    Ok(())
}

/// Area under the ROC curve via the rank-sum statistic with average ranks
/// for ties, so a tied (positive, negative) pair counts one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateMetric("AUC needs both positive and negative labels"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Ranks are 1-based; a tie block spanning positions i..j gets (i + j + 1) / 2.
    // Doubled to stay in integers.
    let mut pos_rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let rank2 = (i + 1 + j) as u128;
        let pos_in_block = order[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        pos_rank_sum2 += rank2 * pos_in_block;
        i = j;
    }
    let (p, n) = (n_pos as u128, n_neg as u128);
    // U = R_pos - p(p+1)/2, doubled.
    let u2 = pos_rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

/// Average precision with step interpolation: the sum over positives, in
/// descending score order, of precision at that rank divided by the number
/// of positives. Equal scores keep their input order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::DegenerateMetric("AP needs at least one positive label"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &k) in order.iter().enumerate() {
        if labels[k] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

/// A named set of metric values from one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    /// Hyperparameters the metrics depend on.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub settings: BTreeMap<String, f64>,
    pub runtime_s: f64,
}

impl MetricsReport {
    pub fn new(task: impl Into<String>) -> Self {
        Self {
            task: task.into(),
            metrics: BTreeMap::new(),
            seed: None,
            config_digest: None,
            settings: BTreeMap::new(),
            runtime_s: 0.0,
        }
    }

    pub fn with_metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Mean and sample standard deviation of each metric over runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub task: String,
    pub n_runs: usize,
    pub seeds: Vec<u64>,
    pub mean: BTreeMap<String, f64>,
    pub std: BTreeMap<String, f64>,
}

impl MetricsSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Aggregates reports of one task. The standard deviation uses `n - 1` and
/// is 0 for a single run.
pub fn aggregate(reports: &[MetricsReport]) -> Result<MetricsSummary> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidArgument("no reports to aggregate".into()))?;
    if let Some(r) = reports.iter().find(|r| r.task != first.task) {
        return Err(Error::InvalidArgument(format!(
            "cannot aggregate tasks {} and {}",
            first.task, r.task
        )));
    }
    let n = reports.len() as f64;
    let mut mean = BTreeMap::new();
    let mut std = BTreeMap::new();
    for name in first.metrics.keys() {
        let values: Vec<f64> = reports
            .iter()
            .map(|r| {
                r.metrics.get(name).copied().ok_or_else(|| {
                    Error::InvalidArgument(format!("metric {name} missing from a report"))
                })
            })
            .collect::<Result<_>>()?;
        let m = values.iter().sum::<f64>() / n;
        let s = if values.len() > 1 {
            (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        mean.insert(name.clone(), m);
        std.insert(name.clone(), s);
    }
    Ok(MetricsSummary {
        task: first.task.clone(),
        n_runs: reports.len(),
        seeds: reports.iter().filter_map(|r| r.seed).collect(),
        mean,
        std,
    })
}

/// Decoder logits for positives then negatives, with matching labels.
///
/// Logits rank candidates exactly like their sigmoid probabilities but do not
/// saturate to equal values at large magnitude.
pub fn score_candidates(
    params: &ModelParams,
    z: &DenseMatrix<f32>,
    pos: &[Edge],
    neg: &[Edge],
) -> Result<(Vec<f64>, Vec<bool>)> {
    let edges: Vec<Edge> = pos.iter().chain(neg).copied().collect();
    let logits = models::decode_structure(params, z, &edges)?;
    let labels = (0..edges.len()).map(|i| i < pos.len()).collect();
    Ok((logits.into_iter().map(f64::from).collect(), labels))
}

/// Test-time link prediction: encode the full train graph, score candidate
/// edges with the structure decoder, report `auc` and `ap`.
pub fn eval_link_prediction(
    params: &ModelParams,
    train_graph: &Graph,
    features: &DenseMatrix<f32>,
    pos_edges: &[Edge],
    neg_edges: &[Edge],
) -> Result<MetricsReport> {
    let start = std::time::Instant::now();
    if let Some(e) = pos_edges.iter().find(|e| neg_edges.contains(e)) {
        return Err(Error::InvalidArgument(format!(
            "edge {e:?} is both a positive and a negative candidate"
        )));
    }
    let adj = Arc::new(normalized_adjacency(train_graph, true));
    let (z, _) = models::encode(params, features, &adj)?;
    let (scores, labels) = score_candidates(params, &z, pos_edges, neg_edges)?;
    let mut report = MetricsReport::new("linkpred")
        .with_metric("auc", auc(&scores, &labels)?)
        .with_metric("ap", average_precision(&scores, &labels)?);
    report.runtime_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Column concatenation of every encoder layer's output on the full train
/// graph. Computed without gradients.
pub fn build_probe_embeddings(
    params: &ModelParams,
    train_graph: &Graph,
    features: &DenseMatrix<f32>,
) -> Result<DenseMatrix<f32>> {
    let adj = Arc::new(normalized_adjacency(train_graph, true));
    let (_, layers) = models::encode(params, features, &adj)?;
    let refs: Vec<&DenseMatrix<f32>> = layers.iter().collect();
    DenseMatrix::hconcat(&refs)
}

/// Train/validation/test node indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl NodeSplit {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        let mut seen = vec![false; n_nodes];
        for (name, set) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            if set.is_empty() {
                return Err(Error::InvalidArgument(format!("{name} node set is empty")));
            }
            for &v in set {
                if v >= n_nodes {
                    return Err(Error::NodeOutOfRange { node: v, n_nodes });
                }
                if seen[v] {
                    return Err(Error::InvalidArgument(format!(
                        "node {v} appears in more than one split"
                    )));
                }
                seen[v] = true;
            }
        }
        Ok(())
    }
}

/// `per_class` training nodes from each class, then `n_val` and `n_test`
/// further nodes, all drawn uniformly without replacement.
pub fn random_node_split(
    labels: &[usize],
    per_class: usize,
    n_val: usize,
    n_test: usize,
    seed: u64,
) -> Result<NodeSplit> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut rng::rng(seed));
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut taken = vec![0usize; n_classes];
    let mut split = NodeSplit::default();
    let mut rest = Vec::new();
    for v in order {
        if taken[labels[v]] < per_class {
            taken[labels[v]] += 1;
            split.train.push(v);
        } else {
            rest.push(v);
        }
    }
    if rest.len() < n_val + n_test {
        return Err(Error::InvalidArgument(format!(
            "{} nodes left for {n_val} validation and {n_test} test nodes",
            rest.len()
        )));
    }
    split.val = rest[..n_val].to_vec();
    split.test = rest[n_val..n_val + n_test].to_vec();
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub lr: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    /// Standardize each embedding column with train-node statistics.
    pub standardize: bool,
    pub split: NodeSplit,
}

impl ProbeConfig {
    pub fn new(split: NodeSplit) -> Self {
        Self {
            lr: 0.01,
            epochs: 300,
            weight_decay: 1e-5,
            standardize: false,
            split,
        }
    }
}

fn accuracy(logits: &DenseMatrix<f32>, labels: &[usize], idx: &[usize]) -> f64 {
    let correct = idx
        .iter()
        .filter(|&&v| {
            let row = logits.row(v);
            let best = (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .expect("at least one class");
            best == labels[v]
        })
        .count();
    correct as f64 / idx.len() as f64
}

fn standardize(x: &DenseMatrix<f32>, rows: &[usize]) -> DenseMatrix<f32> {
    let c = x.cols();
    let n = rows.len() as f64;
    let mut mean = vec![0f64; c];
    let mut var = vec![0f64; c];
    for &r in rows {
        for (j, &v) in x.row(r).iter().enumerate() {
            mean[j] += v as f64 / n;
        }
    }
    for &r in rows {
        for (j, &v) in x.row(r).iter().enumerate() {
            var[j] += (v as f64 - mean[j]).powi(2) / n;
        }
    }
    DenseMatrix::from_fn(x.rows(), c, |i, j| {
        let sd = var[j].sqrt();
        if sd > 0.0 {
            ((x.get(i, j) as f64 - mean[j]) / sd) as f32
        } else {
            0.0
        }
    })
}

/// Multinomial logistic regression on frozen embeddings, trained full-batch
/// with Adam on the train nodes. The epoch with the best validation accuracy
/// (earliest on ties) is used for the reported `test_acc`.
pub fn linear_probe(
    embeddings: &DenseMatrix<f32>,
    labels: &[usize],
    config: &ProbeConfig,
    seed: u64,
) -> Result<MetricsReport> {
    let start = std::time::Instant::now();
    let n = embeddings.rows();
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!("{} labels for {n} embeddings", labels.len())));
    }
    config.split.validate(n)?;
    if config.epochs == 0 || config.lr.is_nan() || config.lr <= 0.0 || config.weight_decay.is_nan() || config.weight_decay < 0.0 {
        return Err(Error::InvalidArgument(
            "probe needs epochs >= 1, lr > 0, weight_decay >= 0".into(),
        ));
    }
    let x = if config.standardize {
        standardize(embeddings, &config.split.train)
    } else {
        embeddings.clone()
    };
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1).max(2);
    let d = x.cols();
    let mut r = rng::rng(derive_seed(seed, &[0x9_0BE]));
    let bound = (6.0 / (d + n_classes) as f64).sqrt();
    let mut weight = DenseMatrix::from_fn(d, n_classes, |_, _| {
        use rand::Rng as _;
        ((r.random::<f64>() * 2.0 - 1.0) * bound) as f32
    });
    let mut bias = DenseMatrix::<f32>::zeros(1, n_classes);
    let adam = AdamConfig {
        weight_decay: config.weight_decay,
        ..AdamConfig::with_lr(config.lr)
    };
    let mut state = AdamState::new();
    let x_train = x.gather_rows(&config.split.train)?;
    let y_train: Vec<usize> = config.split.train.iter().map(|&v| labels[v]).collect();

    let predict = |w: &DenseMatrix<f32>, b: &DenseMatrix<f32>| -> Result<DenseMatrix<f32>> {
        let mut out = x.matmul(w)?;
        for i in 0..out.rows() {
            for (o, &bb) in out.row_mut(i).iter_mut().zip(b.row(0)) {
                *o += bb;
            }
        }
        Ok(out)
    };

    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_test = 0.0;
    let mut best_train = 0.0;
    for epoch in 1..=config.epochs {
        let mut tape = Tape::new();
        let xv = tape.constant(x_train.clone());
        let wv = tape.param(weight.clone());
        let bv = tape.param(bias.clone());
        let h = tape.matmul(xv, wv)?;
        let logits = tape.add_row_bias(h, bv)?;
        let loss = tape.softmax_cross_entropy(logits, &y_train)?;
        if !tape.scalar(loss).is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                loss: tape.scalar(loss),
                gae: f64::NAN,
                deg: f64::NAN,
            });
        }
        let mut grads = tape.backward(loss)?;
        let gw = grads.take(wv).expect("weight is a parameter");
        let gb = grads.take(bv).expect("bias is a parameter");
        adam_step(&mut [&mut weight, &mut bias], &[&gw, &gb], &mut state, &adam)?;

        let all = predict(&weight, &bias)?;
        let val = accuracy(&all, labels, &config.split.val);
        if val > best_val {
            best_val = val;
            best_epoch = epoch;
            best_test = accuracy(&all, labels, &config.split.test);
            best_train = accuracy(&all, labels, &config.split.train);
        }
    }

    let mut report = MetricsReport::new("nodeclf")
        .with_metric("test_acc", best_test)
        .with_metric("val_acc", best_val)
        .with_metric("train_acc", best_train)
        .with_metric("best_epoch", best_epoch as f64);
    report.seed = Some(seed);
    report.settings = BTreeMap::from([
        ("lr".to_string(), config.lr),
        ("epochs".to_string(), config.epochs as f64),
        ("weight_decay".to_string(), config.weight_decay),
        ("standardize".to_string(), f64::from(u8::from(config.standardize))),
    ]);
    report.runtime_s = start.elapsed().as_secs_f64();
    Ok(report)
}
