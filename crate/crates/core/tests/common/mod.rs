//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use maskgae::evaluation::NodeSplit;
use maskgae::graph::{load_graph, normalized_adjacency, Edge, Graph};
use maskgae::masking::MaskingStrategy;
use maskgae::models::{init_params, DecoderMode, EncoderConfig, ModelConfig, ModelParams};
use maskgae::numcore::{DenseMatrix, SparseMatrix, Tape, Var};
use maskgae::trainer::{negative_sample, step_gradients, step_loss, StepInputs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- gradients

/// Builds a scalar loss from parameter leaves.
pub type Build = dyn Fn(&mut Tape<f64>, &[Var]) -> Var;

fn eval(build: &Build, inputs: &[DenseMatrix<f64>]) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let out = build(&mut tape, &vars);
    tape.scalar(out)
}

/// Largest relative error `|analytic - numeric| / max(|analytic|, |numeric|)`
/// over all inputs, measured on whole gradient tensors (Frobenius norms).
pub fn fd_relative_error(build: &Build, inputs: &[DenseMatrix<f64>], h: f64) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let out = build(&mut tape, &vars);
    let mut grads = tape.backward(out).expect("scalar loss");
    let mut worst: f64 = 0.0;
    for (i, &v) in vars.iter().enumerate() {
        let analytic = grads.take(v).expect("parameter gradient");
        let mut diff2 = 0.0;
        let mut a2 = 0.0;
        let mut n2 = 0.0;
        for j in 0..inputs[i].as_slice().len() {
            let mut plus = inputs.to_vec();
            plus[i].as_mut_slice()[j] += h;
            let mut minus = inputs.to_vec();
            minus[i].as_mut_slice()[j] -= h;
            let numeric = (eval(build, &plus) - eval(build, &minus)) / (2.0 * h);
            let a = analytic.as_slice()[j];
            diff2 += (a - numeric).powi(2);
            a2 += a * a;
            n2 += numeric * numeric;
        }
        let scale = a2.sqrt().max(n2.sqrt());
        if scale > 1e-12 {
            worst = worst.max(diff2.sqrt() / scale);
        }
    }
    worst
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows, cols, |_, _| r.random::<f64>() * 2.0 - 1.0)
}

/// Same, with entries bounded away from zero (for kinked activations).
pub fn random_matrix_off_zero(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(rows, cols, |_, _| {
        let m = 0.1 + 0.9 * r.random::<f64>();
        if r.random::<bool>() {
            m
        } else {
            -m
        }
    })
}

/// Reduces a matrix output to a scalar with fixed random weights so every
/// entry of the output gradient differs.
pub fn project(tape: &mut Tape<f64>, y: Var, seed: u64) -> Var {
    let (rows, cols) = tape.value(y).shape();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let w = tape.constant(random_matrix(&mut r, rows, cols));
    let p = tape.hadamard(y, w).unwrap();
    tape.sum(p)
}

fn random_sparse(r: &mut ChaCha8Rng, n: usize, m: usize) -> SparseMatrix<f64> {
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if r.random::<f64>() < 0.4 {
                t.push((i, j, r.random::<f64>() * 2.0 - 1.0));
            }
        }
    }
    SparseMatrix::from_triplets(n, m, &t).unwrap()
}

/// One named op check: builder plus inputs.
pub struct OpCase {
    pub name: &'static str,
    pub build: Box<Build>,
    pub inputs: Vec<DenseMatrix<f64>>,
}

/// Every differentiable tape op at random shapes drawn from `seed`.
pub fn op_cases(seed: u64) -> Vec<OpCase> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = r.random_range(2..6);
    let k = r.random_range(1..5);
    let m = r.random_range(1..5);
    let ps = seed.wrapping_mul(31);
    let adj = Arc::new(random_sparse(&mut r, n, n));
    let idx: Vec<usize> = (0..n + 2).map(|_| r.random_range(0..n)).collect();
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..m.max(2))).collect();
    let mse_target = random_matrix(&mut r, n, k);
    let keep = DenseMatrix::from_fn(n, k, |_, _| if r.random::<f64>() < 0.7 { 1.0 / 0.7 } else { 0.0 });
    let scale = r.random::<f64>() * 4.0 - 2.0;

    let mut cases: Vec<OpCase> = Vec::new();
    let mut add = |name, build: Box<Build>, inputs| cases.push(OpCase { name, build, inputs });

    add(
        "spmm",
        Box::new(move |t, v| {
            let y = t.spmm(Arc::clone(&adj), v[0]).unwrap();
            project(t, y, ps)
        }),
        vec![random_matrix(&mut r, n, k)],
    );
    add(
        "matmul",
        Box::new(move |t, v| {
            let y = t.matmul(v[0], v[1]).unwrap();
            project(t, y, ps)
        }),
        vec![random_matrix(&mut r, n, k), random_matrix(&mut r, k, m)],
    );
    add(
        "add_row_bias",
        Box::new(move |t, v| {
            let y = t.add_row_bias(v[0], v[1]).unwrap();
            project(t, y, ps)
        }),
        vec![random_matrix(&mut r, n, k), random_matrix(&mut r, 1, k)],
    );
    add(
        "add",
        Box::new(move |t, v| {
            let y = t.add(v[0], v[1]).unwrap();
            project(t, y, ps)
        }),
        vec![random_matrix(&mut r, n, k), random_matrix(&mut r, n, k)],
    );
    add(
        "hadamard",
        Box::new(move |t, v| {
            let y = t.hadamard(v[0], v[1]).unwrap();
            project(t, y, ps)
        }),
        vec![random_matrix(&mut r, n, k), random_matrix(&mut r, n, k)],
    );
    add(
        "concat_cols",
        Box::new(move |t, v| {
            let y = t.concat_cols(&[v[0], v[1], v[0]]).unwrap();
            project(t, y, ps)
        }),
        vec![random_matrix(&mut r, n, k), random_matrix(&mut r, n, m)],
    );
    add(
        "elu",
        Box::new(move |t, v| {
            let y = t.elu(v[0]);
            project(t, y, ps)
        }),
        vec![random_matrix_off_zero(&mut r, n, k)],
    );
    add(
        "relu",
        Box::new(move |t, v| {
            let y = t.relu(v[0]);
            project(t, y, ps)
        }),
        vec![random_matrix_off_zero(&mut r, n, k)],
    );
    add(
        "sigmoid",
        Box::new(move |t, v| {
            let y = t.sigmoid(v[0]);
            project(t, y, ps)
        }),
        vec![random_matrix(&mut r, n, k).map(|x| 3.0 * x)],
    );
    add(
        "batch_norm",
        Box::new(move |t, v| {
            let y = t.batch_norm(v[0], v[1], v[2], 1e-5).unwrap();
            project(t, y, ps)
        }),
        vec![
            random_matrix(&mut r, n, k),
            random_matrix(&mut r, 1, k),
            random_matrix(&mut r, 1, k),
        ],
    );
    let gidx = idx.clone();
    add(
        "gather_rows",
        Box::new(move |t, v| {
            let y = t.gather_rows(v[0], &gidx).unwrap();
            project(t, y, ps)
        }),
        vec![random_matrix(&mut r, n, k)],
    );
    add(
        "row_dot",
        Box::new(move |t, v| {
            let y = t.row_dot(v[0], v[1]).unwrap();
            project(t, y, ps)
        }),
        vec![random_matrix(&mut r, n, k), random_matrix(&mut r, n, k)],
    );
    add(
        "dropout",
        Box::new(move |t, v| {
            let y = t.dropout(v[0], keep.clone()).unwrap();
            project(t, y, ps)
        }),
        vec![random_matrix(&mut r, n, k)],
    );
    add(
        "scale_sum",
        Box::new(move |t, v| {
            let y = t.scale(v[0], scale);
            let sq = t.hadamard(y, v[0]).unwrap();
            t.sum(sq)
        }),
        vec![random_matrix(&mut r, n, k)],
    );
    add(
        "bce_with_logits",
        Box::new(move |t, v| {
            let a = t.bce_with_logits(v[0], 1.0).unwrap();
            let b = t.bce_with_logits(v[1], 0.0).unwrap();
            t.add(a, b).unwrap()
        }),
        vec![
            random_matrix(&mut r, n, 1).map(|x| 4.0 * x),
            random_matrix(&mut r, k, 1).map(|x| 4.0 * x),
        ],
    );
    add(
        "mse",
        Box::new(move |t, v| t.mse(v[0], mse_target.clone()).unwrap()),
        vec![random_matrix(&mut r, n, k)],
    );
    add(
        "softmax_cross_entropy",
        Box::new(move |t, v| t.softmax_cross_entropy(v[0], &labels).unwrap()),
        vec![random_matrix(&mut r, n, m.max(2)).map(|x| 3.0 * x)],
    );
    cases
}

/// Worst relative error per op over `trials` random instances.
pub fn op_gradcheck(trials: u64) -> BTreeMap<&'static str, f64> {
    let mut worst = BTreeMap::new();
    for s in 0..trials {
        for case in op_cases(s) {
            let e = fd_relative_error(case.build.as_ref(), &case.inputs, 1e-6);
            let w = worst.entry(case.name).or_insert(0.0f64);
            *w = w.max(e);
        }
    }
    worst
}

/// Six-node fixture: a triangle joined by a path to a square's corner.
pub fn six_node_fixture() -> (Graph, DenseMatrix<f32>) {
    let g = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(17);
    let x = DenseMatrix::from_fn(6, 5, |_, _| (r.random::<f64>() * 2.0 - 1.0) as f32);
    (g, x)
}

/// Relative error between the analytic directional derivative of the full
/// mask/encode/decode/loss step and a central difference, for every
/// parameter tensor and a few random directions, evaluated in `f64`. Also
/// folds in how far the `f32` gradient strays from the `f64` one.
pub fn pipeline_gradcheck(decoder: DecoderMode, seed: u64) -> f64 {
    let (g, x) = six_node_fixture();
    let config = ModelConfig {
        in_dim: x.cols(),
        encoder: EncoderConfig {
            n_layers: 3,
            hidden_dim: 4,
            use_batchnorm: true,
            dropout: 0.0,
        },
        decoder,
    };
    let params = init_params(config, seed).unwrap();
    let mask = MaskingStrategy::Edge { p: 0.5 }
        .apply(&g, seed)
        .unwrap();
    let mask = if mask.masked_edges.is_empty() {
        MaskingStrategy::Edge { p: 1.0 }.apply(&g, seed).unwrap()
    } else {
        mask
    };
    let negatives = negative_sample(&g, mask.masked_edges.len(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let degrees = mask.masked_degrees(6);
    let adj = Arc::new(normalized_adjacency(&mask.visible_graph, true));
    let inputs = StepInputs::new(&x, &adj, &mask, &degrees, &negatives, 0.3);
    let (_, grads32) = step_gradients(&params, &inputs, None).unwrap();

    // Finite differences run in f64 so the step can be small enough to stay
    // clear of ReLU kinks without drowning in rounding noise.
    let params = params.cast::<f64>();
    let x = x.cast::<f64>();
    let adj = Arc::new(adj.cast::<f64>());
    let inputs = StepInputs::new(&x, &adj, &mask, &degrees, &negatives, 0.3);
    let (_, grads) = step_gradients(&params, &inputs, None).unwrap();

    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0xD1);
    let mut worst: f64 = 0.0;
    for t in 0..grads.len() {
        let diff = grads[t]
            .as_slice()
            .iter()
            .zip(grads32[t].as_slice())
            .map(|(a, b)| (a - *b as f64).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = grads[t].as_slice().iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            worst = worst.max(diff / norm);
        }
        for _ in 0..3 {
            let shape = grads[t].shape();
            let dir = DenseMatrix::from_fn(shape.0, shape.1, |_, _| r.random::<f64>() * 2.0 - 1.0);
            let norm = dir.as_slice().iter().map(|d| d * d).sum::<f64>().sqrt();
            let analytic: f64 = grads[t].as_slice().iter().zip(dir.as_slice()).map(|(g, d)| g * d).sum::<f64>() / norm;
            let h = 1e-5;
            let shifted = |sign: f64| {
                let mut p = params.clone();
                let target = &mut p.tensors_mut()[t];
                for (w, d) in target.as_mut_slice().iter_mut().zip(dir.as_slice()) {
                    *w += sign * h * d / norm;
                }
                step_loss(&p, &inputs).unwrap().loss
            };
            let numeric = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs());
            if scale > 1e-6 {
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
    }
    worst
}

// ------------------------------------------------------------------ metrics

/// Pair counting: P(score_pos > score_neg) + 0.5 P(tie).
pub fn auc_brute(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// Sum over every cut-off k of (recall_k - recall_{k-1}) * precision_k, with
/// each item's position found by counting the items ranked ahead of it.
pub fn ap_brute(scores: &[f64], labels: &[bool]) -> f64 {
    let n = scores.len();
    let mut at = vec![false; n];
    for i in 0..n {
        let ahead = (0..n)
            .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
            .count();
        at[ahead] = labels[i];
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let mut hits = 0.0;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for (k, &pos) in at.iter().enumerate() {
        if pos {
            hits += 1.0;
        }
        let recall = hits / n_pos;
        ap += (recall - prev_recall) * (hits / (k + 1) as f64);
        prev_recall = recall;
    }
    ap
}

/// Random scores (with deliberate ties) and labels with both classes.
pub fn random_metric_instance(r: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    loop {
        let n = r.random_range(2..=64);
        let levels = r.random_range(1..=n);
        let scores: Vec<f64> = (0..n)
            .map(|_| r.random_range(0..levels) as f64 / levels as f64)
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| r.random::<bool>()).collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            return (scores, labels);
        }
    }
}

// ------------------------------------------------------------------ masking

/// Exact distribution of the masked edge set produced by `n_walk` uniform
/// walks of length `l_walk` from `root`, by enumerating every walk.
pub fn enumerate_walk_masks(g: &Graph, root: usize, n_walk: usize, l_walk: usize) -> BTreeMap<Vec<Edge>, f64> {
    fn walks(g: &Graph, cur: usize, left: usize, p: f64, trail: &mut Vec<Edge>, out: &mut Vec<(Vec<Edge>, f64)>) {
        let nb = g.neighbors(cur);
        if left == 0 || nb.is_empty() {
            out.push((trail.clone(), p));
            return;
        }
        for &next in nb {
            trail.push((cur.min(next), cur.max(next)));
            walks(g, next, left - 1, p / nb.len() as f64, trail, out);
            trail.pop();
        }
    }
    let mut single = Vec::new();
    walks(g, root, l_walk, 1.0, &mut Vec::new(), &mut single);
    let mut dist: BTreeMap<Vec<Edge>, f64> = BTreeMap::from([(Vec::new(), 1.0)]);
    for _ in 0..n_walk {
        let mut next = BTreeMap::new();
        for (set, p) in &dist {
            for (trail, q) in &single {
                let mut s: Vec<Edge> = set.iter().chain(trail).copied().collect();
                s.sort_unstable();
                s.dedup();
                *next.entry(s).or_insert(0.0) += p * q;
            }
        }
        dist = next;
    }
    dist
}

pub fn random_graph(r: &mut ChaCha8Rng, max_nodes: usize) -> Graph {
    let n = r.random_range(2..=max_nodes);
    let density = r.random::<f64>();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.random::<f64>() < density {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

// ------------------------------------------------------------------ dataset

pub struct Cora {
    pub graph: Graph,
    pub node_split: NodeSplit,
}

/// Directory searched for the citation dataset.
pub fn cora_dir() -> PathBuf {
    let base = std::env::var_os("MASKGAE_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"));
    base.join("cora")
}

/// Loads `cora.edges`, `cora.features`, `cora.labels`, `cora.split.json`.
pub fn load_cora() -> Result<Cora, String> {
    let dir = cora_dir();
    let f = |name: &str| dir.join(name);
    for name in ["cora.edges", "cora.features", "cora.labels", "cora.split.json"] {
        if !f(name).is_file() {
            return Err(format!(
                "Cora dataset not found: {} is missing (set MASKGAE_DATA_DIR; see README)",
                f(name).display()
            ));
        }
    }
    let graph = load_graph(
        &f("cora.edges"),
        Some(&f("cora.features")),
        Some(&f("cora.labels")),
    )
    .map_err(|e| e.to_string())?;
    let node_split = NodeSplit::load(&f("cora.split.json")).map_err(|e| e.to_string())?;
    Ok(Cora { graph, node_split })
}

pub fn checked_params(p: &ModelParams) -> bool {
    p.tensors().iter().all(|(_, m)| m.is_finite())
}
