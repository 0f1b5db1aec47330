#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use maskgae::graph::{normalized_adjacency, Graph};
use maskgae::masking::MaskingStrategy;
use maskgae::models::{
    decode_degree, decode_structure, encode, init_params, DecoderMode, EncoderConfig, ModelConfig,
    ModelParams, BATCHNORM_EPS,
};
use maskgae::numcore::{DenseMatrix, SparseMatrix};
use maskgae::trainer::{negative_sample, step_loss, StepInputs};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Rows = Vec<Vec<f64>>;

fn rows(m: &DenseMatrix<f64>) -> Rows {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn matmul(a: &Rows, b: &Rows) -> Rows {
    a.iter()
        .map(|r| (0..b[0].len()).map(|j| r.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect())
        .collect()
}

/// Plain nested-loop forward pass of the encoder.
fn encode_oracle(p: &ModelParams<f64>, adj: &Rows, x: &Rows) -> Rows {
    let mut h = x.clone();
    let n_layers = p.gcn.len();
    for (l, lin) in p.gcn.iter().enumerate() {
        let mut out = matmul(adj, &matmul(&h, &rows(&lin.weight)));
        for r in out.iter_mut() {
            for (v, b) in r.iter_mut().zip(lin.bias.row(0)) {
                *v += b;
            }
        }
        if l + 1 < n_layers {
            for v in out.iter_mut().flatten() {
                if *v <= 0.0 {
                    *v = v.exp() - 1.0;
                }
            }
            if let Some(bn) = p.norms.get(l) {
                let n = out.len() as f64;
                for j in 0..out[0].len() {
                    let mean = out.iter().map(|r| r[j]).sum::<f64>() / n;
                    let var = out.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                    for r in out.iter_mut() {
                        r[j] = bn.gamma.get(0, j) * (r[j] - mean) / (var + BATCHNORM_EPS).sqrt() + bn.beta.get(0, j);
                    }
                }
            }
        }
        h = out;
    }
    h
}

fn perturbed(config: ModelConfig, seed: u64) -> ModelParams {
    let mut p = init_params(config, seed).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
    for t in p.tensors_mut() {
        for v in t.as_mut_slice() {
            *v += (r.random::<f64>() * 0.4 - 0.2) as f32;
        }
    }
    p
}

fn small_config(in_dim: usize, decoder: DecoderMode) -> ModelConfig {
    ModelConfig {
        in_dim,
        encoder: EncoderConfig {
            n_layers: 3,
            hidden_dim: 5,
            use_batchnorm: true,
            dropout: 0.0,
        },
        decoder,
    }
}

#[test]
fn encode_matches_nested_loop_oracle_on_path() {
    let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
    // D^-1/2 (A + I) D^-1/2 with self-loop degrees 2, 3, 3, 2
    let s6 = 1.0 / 6f64.sqrt();
    let adj = vec![
        vec![0.5, s6, 0.0, 0.0],
        vec![s6, 1.0 / 3.0, 1.0 / 3.0, 0.0],
        vec![0.0, 1.0 / 3.0, 1.0 / 3.0, s6],
        vec![0.0, 0.0, s6, 0.5],
    ];
    let x32 = DenseMatrix::from_fn(4, 3, |i, j| ((i * 3 + j) as f32 * 0.37).cos());
    let p32 = perturbed(small_config(3, DecoderMode::Mlp), 2);
    let p = p32.cast::<f64>();
    let x = x32.cast::<f64>();
    let want = encode_oracle(&p, &adj, &rows(&x));

    let a = normalized_adjacency(&g, true);
    let triplets: Vec<(usize, usize, f64)> = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .filter(|&(i, j)| adj[i][j] != 0.0)
        .map(|(i, j)| (i, j, adj[i][j]))
        .collect();
    let a64 = SparseMatrix::from_triplets(4, 4, &triplets).unwrap();
    assert!((a.cast::<f64>().to_dense().as_slice().iter())
        .zip(a64.to_dense().as_slice())
        .all(|(x, y)| (x - y).abs() < 1e-7));
    let (z64, _) = encode(&p, &x, &Arc::new(a64)).unwrap();
    let (z32, _) = encode(&p32, &x32, &Arc::new(a)).unwrap();
    for i in 0..4 {
        for j in 0..5 {
            assert!((z64.get(i, j) - want[i][j]).abs() < 1e-10, "({i},{j})");
            assert!((z32.get(i, j) as f64 - want[i][j]).abs() < 1e-5, "({i},{j}) f32");
        }
    }
}

fn graph_and_perm() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<usize>, u64)> {
    (3usize..10).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::vec((0..n, 0..n), 1..25),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            any::<u64>(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_is_permutation_equivariant((n, pairs, perm, seed) in graph_and_perm()) {
        let edges: Vec<(usize, usize)> = pairs.into_iter().filter(|(u, v)| u != v).collect();
        let g = Graph::from_edges(n, edges.clone()).unwrap();
        let gp = Graph::from_edges(n, edges.iter().map(|&(u, v)| (perm[u], perm[v]))).unwrap();
        let x = DenseMatrix::from_fn(n, 4, |i, j| ((i * 4 + j) as f32 + seed as f32 * 1e-3).sin());
        // row perm[i] of xp is row i of x
        let mut xp = DenseMatrix::zeros(n, 4);
        for i in 0..n {
            xp.row_mut(perm[i]).copy_from_slice(x.row(i));
        }
        let p = perturbed(small_config(4, DecoderMode::Mlp), seed);
        let (z, _) = encode(&p, &x, &Arc::new(normalized_adjacency(&g, true))).unwrap();
        let (zp, _) = encode(&p, &xp, &Arc::new(normalized_adjacency(&gp, true))).unwrap();
        for i in 0..n {
            for j in 0..5 {
                let (a, b) = (z.get(i, j), zp.get(perm[i], j));
                prop_assert!((a - b).abs() <= 1e-5 * (1.0 + a.abs()), "{a} vs {b}");
            }
        }
        let e: Vec<(usize, usize)> = g.edges().to_vec();
        let ep: Vec<(usize, usize)> = e.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let s = decode_structure(&p, &z, &e).unwrap();
        let sp = decode_structure(&p, &zp, &ep).unwrap();
        for (a, b) in s.iter().zip(&sp) {
            prop_assert!((a - b).abs() <= 1e-4 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn structure_decoder_is_symmetric(seed in any::<u64>(), dot in any::<bool>()) {
        let decoder = if dot { DecoderMode::Dot } else { DecoderMode::Mlp };
        let p = perturbed(small_config(2, decoder), seed);
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let z = DenseMatrix::from_fn(6, 5, |_, _| r.random::<f32>() * 2.0 - 1.0);
        let fwd: Vec<(usize, usize)> = vec![(0, 1), (2, 5), (3, 4)];
        let bwd: Vec<(usize, usize)> = fwd.iter().map(|&(u, v)| (v, u)).collect();
        prop_assert_eq!(decode_structure(&p, &z, &fwd).unwrap(), decode_structure(&p, &z, &bwd).unwrap());
    }
}

#[test]
fn loss_reads_only_masked_and_negative_pairs() {
    let g = Graph::from_edges(7, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (0, 6), (1, 5)]).unwrap();
    let x = DenseMatrix::from_fn(7, 3, |i, j| ((i + 2 * j) as f32 * 0.3).sin());
    let p = perturbed(small_config(3, DecoderMode::Mlp), 9);
    let mask = MaskingStrategy::Edge { p: 0.5 }.apply(&g, 4).unwrap();
    assert!(!mask.masked_edges.is_empty() && !mask.visible_edges.is_empty());
    let neg = negative_sample(&g, mask.masked_edges.len(), &mut maskgae::rng::rng(1)).unwrap();
    let degrees = mask.masked_degrees(7);
    let adj = Arc::new(normalized_adjacency(&mask.visible_graph, true));
    let inputs = StepInputs::new(&x, &adj, &mask, &degrees, &neg, 0.25);
    let got = step_loss(&p, &inputs).unwrap();

    let (z, _) = encode(&p, &x, &adj).unwrap();
    let bce = |logits: Vec<f32>, y: f64| {
        let n = logits.len() as f64;
        logits
            .into_iter()
            .map(|l| {
                let s = 1.0 / (1.0 + (-(l as f64)).exp());
                -(y * s.ln() + (1.0 - y) * (1.0 - s).ln())
            })
            .sum::<f64>()
            / n
    };
    let gae = bce(decode_structure(&p, &z, &mask.masked_edges).unwrap(), 1.0)
        + bce(decode_structure(&p, &z, &neg).unwrap(), 0.0);
    let deg = decode_degree(&p, &z)
        .unwrap()
        .iter()
        .zip(&degrees)
        .map(|(&d, &t)| (d as f64 - t as f64).powi(2))
        .sum::<f64>()
        / 7.0;
    assert!((got.gae - gae).abs() < 1e-5, "{} vs {gae}", got.gae);
    assert!((got.deg - deg).abs() < 1e-5, "{} vs {deg}", got.deg);
    assert!((got.loss - (gae + 0.25 * deg)).abs() < 1e-5);
}

#[test]
fn glorot_init_is_centred_and_bounded() {
    let config = ModelConfig::new(300);
    let p = init_params(config, 0).unwrap();
    let w = &p.gcn[0].weight;
    let bound = (6.0 / (300.0 + 64.0)) as f32;
    let bound = bound.sqrt();
    assert!(w.as_slice().iter().all(|v| v.abs() <= bound));
    let n = w.as_slice().len() as f64;
    let mean = w.sum() / n;
    // uniform on [-b, b] has sd b/sqrt(3); the mean of n draws is within 4 sd/sqrt(n)
    assert!(mean.abs() < 4.0 * bound as f64 / 3f64.sqrt() / n.sqrt(), "{mean}");
    assert!(p.gcn.iter().all(|l| l.bias.as_slice().iter().all(|&b| b == 0.0)));
}

#[test]
fn encoder_without_batchnorm_has_no_norm_tensors() {
    let mut config = small_config(3, DecoderMode::Dot);
    config.encoder.use_batchnorm = false;
    let p = init_params(config, 1).unwrap();
    assert!(p.norms.is_empty() && p.edge_mlp.is_none());
    let names: Vec<String> = p.tensors().into_iter().map(|(n, _)| n).collect();
    assert!(names.iter().all(|n| !n.contains("bn") && !n.starts_with("edge_decoder")));
    assert_eq!(ModelParams::from_named(&p.to_named()).unwrap(), p);
}
