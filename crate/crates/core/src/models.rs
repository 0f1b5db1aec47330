//! GCN encoder plus structure and degree decoders.
//!
//! Encoder layer `l` computes `A_hat (H W_l) + b_l`; hidden layers then apply
//! ELU followed by batch normalization, the last layer stays linear. The
//! structure decoder scores a pair either by `z_u . z_v` or by a two-layer MLP
//! on `z_u * z_v` (element-wise); the degree decoder is a two-layer MLP on
//! `z_v`. All decoders return raw logits / reals.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Edge;
use crate::numcore::{DenseMatrix, NamedTensor, Scalar, SparseMatrix, Tape, Var};
use crate::rng::{self, Rng};

pub const BATCHNORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderMode {
    Dot,
    Mlp,
}

impl std::str::FromStr for DecoderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(DecoderMode::Dot),
            "mlp" => Ok(DecoderMode::Mlp),
            other => Err(Error::InvalidArgument(format!(
                "decoder must be `dot` or `mlp`, got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for DecoderMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecoderMode::Dot => "dot",
            DecoderMode::Mlp => "mlp",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub use_batchnorm: bool,
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            n_layers: 3,
            hidden_dim: 64,
            use_batchnorm: true,
            dropout: 0.0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "encoder needs n_layers >= 1 and hidden_dim >= 1, got {} and {}",
                self.n_layers, self.hidden_dim
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub in_dim: usize,
    pub encoder: EncoderConfig,
    pub decoder: DecoderMode,
}

impl ModelConfig {
    pub fn new(in_dim: usize) -> Self {
        Self {
            in_dim,
            encoder: EncoderConfig::default(),
            decoder: DecoderMode::Mlp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 {
            return Err(Error::InvalidArgument("input dimension must be >= 1".into()));
        }
        self.encoder.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T = f32> {
    pub weight: DenseMatrix<T>,
    pub bias: DenseMatrix<T>,
}

impl<T: Scalar> Linear<T> {
    fn cast<U: Scalar>(&self) -> Linear<U> {
        Linear {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }
}

impl Linear {
    fn glorot(fan_in: usize, fan_out: usize, r: &mut Rng) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = DenseMatrix::from_fn(fan_in, fan_out, |_, _| {
            (r.random::<f64>() * 2.0 - 1.0) as f32 * bound as f32
        });
        Self {
            weight,
            bias: DenseMatrix::zeros(1, fan_out),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormParams<T = f32> {
    pub gamma: DenseMatrix<T>,
    pub beta: DenseMatrix<T>,
}

/// Encoder and decoder weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T = f32> {
    pub config: ModelConfig,
    pub gcn: Vec<Linear<T>>,
    /// One per hidden layer when batch norm is on.
    pub norms: Vec<BatchNormParams<T>>,
    /// Present in MLP decoder mode.
    pub edge_mlp: Option<[Linear<T>; 2]>,
    pub degree_mlp: [Linear<T>; 2],
}

/// Glorot-uniform weights, zero biases, unit gamma, zero beta.
pub fn init_params(config: ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut r = rng::rng(seed);
    let h = config.encoder.hidden_dim;
    let mut gcn = Vec::with_capacity(config.encoder.n_layers);
    let mut norms = Vec::new();
    for l in 0..config.encoder.n_layers {
        let fan_in = if l == 0 { config.in_dim } else { h };
        gcn.push(Linear::glorot(fan_in, h, &mut r));
        if config.encoder.use_batchnorm && l + 1 < config.encoder.n_layers {
            norms.push(BatchNormParams {
                gamma: DenseMatrix::filled(1, h, 1.0),
                beta: DenseMatrix::zeros(1, h),
            });
        }
    }
    let edge_mlp = match config.decoder {
        DecoderMode::Mlp => Some([Linear::glorot(h, h, &mut r), Linear::glorot(h, 1, &mut r)]),
        DecoderMode::Dot => None,
    };
    let degree_mlp = [Linear::glorot(h, h, &mut r), Linear::glorot(h, 1, &mut r)];
    Ok(ModelParams {
        config,
        gcn,
        norms,
        edge_mlp,
        degree_mlp,
    })
}

/// Tape handles for every parameter tensor, in [`ModelParams::tensors`] order.
pub struct BoundParams {
    vars: Vec<Var>,
}

impl BoundParams {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

struct Cursor<'a> {
    vars: &'a [Var],
    pos: usize,
}

impl Cursor<'_> {
    fn next(&mut self) -> Var {
        let v = self.vars[self.pos];
        self.pos += 1;
        v
    }
}

/// Slot positions of each parameter group inside the flat tensor list.
struct Layout {
    gcn: usize,
    norms: usize,
    edge_mlp: usize,
    degree_mlp: usize,
}

impl<T: Scalar> ModelParams<T> {
    fn layout(&self) -> Layout {
        let gcn = 0;
        let norms = gcn + 2 * self.gcn.len();
        let edge_mlp = norms + 2 * self.norms.len();
        let degree_mlp = edge_mlp + if self.edge_mlp.is_some() { 4 } else { 0 };
        Layout {
            gcn,
            norms,
            edge_mlp,
            degree_mlp,
        }
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &DenseMatrix<T>)> {
        let mut out = Vec::new();
        for (l, lin) in self.gcn.iter().enumerate() {
            out.push((format!("encoder.{l}.weight"), &lin.weight));
            out.push((format!("encoder.{l}.bias"), &lin.bias));
        }
        for (l, bn) in self.norms.iter().enumerate() {
            out.push((format!("encoder.{l}.bn.gamma"), &bn.gamma));
            out.push((format!("encoder.{l}.bn.beta"), &bn.beta));
        }
        if let Some(mlp) = &self.edge_mlp {
            for (i, lin) in mlp.iter().enumerate() {
                out.push((format!("edge_decoder.{i}.weight"), &lin.weight));
                out.push((format!("edge_decoder.{i}.bias"), &lin.bias));
            }
        }
        for (i, lin) in self.degree_mlp.iter().enumerate() {
            out.push((format!("degree_decoder.{i}.weight"), &lin.weight));
            out.push((format!("degree_decoder.{i}.bias"), &lin.bias));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix<T>> {
        let mut out = Vec::new();
        for lin in &mut self.gcn {
            out.push(&mut lin.weight);
            out.push(&mut lin.bias);
        }
        for bn in &mut self.norms {
            out.push(&mut bn.gamma);
            out.push(&mut bn.beta);
        }
        if let Some(mlp) = &mut self.edge_mlp {
            for lin in mlp.iter_mut() {
                out.push(&mut lin.weight);
                out.push(&mut lin.bias);
            }
        }
        for lin in &mut self.degree_mlp {
            out.push(&mut lin.weight);
            out.push(&mut lin.bias);
        }
        out
    }

    /// Same parameters in another precision.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config,
            gcn: self.gcn.iter().map(Linear::cast).collect(),
            norms: self
                .norms
                .iter()
                .map(|bn| BatchNormParams {
                    gamma: bn.gamma.cast(),
                    beta: bn.beta.cast(),
                })
                .collect(),
            edge_mlp: self.edge_mlp.as_ref().map(|m| [m[0].cast(), m[1].cast()]),
            degree_mlp: [self.degree_mlp[0].cast(), self.degree_mlp[1].cast()],
        }
    }

    /// Registers every tensor as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape<T>) -> BoundParams {
        BoundParams {
            vars: self
                .tensors()
                .into_iter()
                .map(|(_, m)| tape.param(m.clone()))
                .collect(),
        }
    }

    /// Registers every tensor as a constant (no gradients).
    pub fn bind_frozen(&self, tape: &mut Tape<T>) -> BoundParams {
        BoundParams {
            vars: self
                .tensors()
                .into_iter()
                .map(|(_, m)| tape.constant(m.clone()))
                .collect(),
        }
    }

    pub fn n_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.as_slice().len()).sum()
    }
}

impl ModelParams {
    pub fn to_named(&self) -> Vec<NamedTensor> {
        self.tensors()
            .into_iter()
            .map(|(name, m)| NamedTensor {
                name,
                value: m.clone(),
            })
            .collect()
    }

    /// Rebuilds parameters from checkpoint tensors; the architecture is read
    /// off the tensor names and shapes.
    pub fn from_named(tensors: &[NamedTensor]) -> Result<Self> {
        let find = |name: &str| {
            tensors
                .iter()
                .find(|t| t.name == name)
                .map(|t| t.value.clone())
        };
        let need = |name: &str| {
            find(name).ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))
        };
        let n_layers = (0..)
            .take_while(|l| find(&format!("encoder.{l}.weight")).is_some())
            .count();
        if n_layers == 0 {
            return Err(Error::Checkpoint("no encoder layers".into()));
        }
        let w0 = need("encoder.0.weight")?;
        let (in_dim, hidden_dim) = w0.shape();
        let use_batchnorm = find("encoder.0.bn.gamma").is_some();
        let decoder = if find("edge_decoder.0.weight").is_some() {
            DecoderMode::Mlp
        } else {
            DecoderMode::Dot
        };
        let config = ModelConfig {
            in_dim,
            encoder: EncoderConfig {
                n_layers,
                hidden_dim,
                use_batchnorm,
                dropout: 0.0,
            },
            decoder,
        };
        let lin = |prefix: String| -> Result<Linear> {
            Ok(Linear {
                weight: need(&format!("{prefix}.weight"))?,
                bias: need(&format!("{prefix}.bias"))?,
            })
        };
        let gcn = (0..n_layers)
            .map(|l| lin(format!("encoder.{l}")))
            .collect::<Result<Vec<_>>>()?;
        let norms = if use_batchnorm {
            (0..n_layers - 1)
                .map(|l| {
                    Ok(BatchNormParams {
                        gamma: need(&format!("encoder.{l}.bn.gamma"))?,
                        beta: need(&format!("encoder.{l}.bn.beta"))?,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let edge_mlp = match decoder {
            DecoderMode::Mlp => Some([lin("edge_decoder.0".into())?, lin("edge_decoder.1".into())?]),
            DecoderMode::Dot => None,
        };
        let degree_mlp = [lin("degree_decoder.0".into())?, lin("degree_decoder.1".into())?];
        let p = ModelParams {
            config,
            gcn,
            norms,
            edge_mlp,
            degree_mlp,
        };
        let fresh = init_params(config, 0)?;
        for ((name, a), (_, b)) in p.tensors().into_iter().zip(fresh.tensors()) {
            if a.shape() != b.shape() {
                return Err(Error::Checkpoint(format!(
                    "{name} has shape {:?}, expected {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        Ok(p)
    }

}

/// Dropout applied to encoder layer inputs during training.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut Rng,
}

/// Output of the encoder on a tape.
pub struct Encoded {
    pub z: Var,
    pub layers: Vec<Var>,
}

/// Runs the encoder on `tape`. `x` must have `adj.rows()` rows.
pub fn encode_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    bound: &BoundParams,
    x: Var,
    adj: &Arc<SparseMatrix<T>>,
    mut dropout: Option<Dropout<'_>>,
) -> Result<Encoded> {
    let (rows, cols) = tape.value(x).shape();
    if rows != adj.rows() || adj.rows() != adj.cols() {
        return Err(Error::shape(
            "encode",
            format!("{rows} feature rows for a {}x{} adjacency", adj.rows(), adj.cols()),
        ));
    }
    if cols != params.config.in_dim {
        return Err(Error::shape(
            "encode",
            format!("{cols} feature columns, model expects {}", params.config.in_dim),
        ));
    }
    let layout = params.layout();
    let mut cur = Cursor {
        vars: &bound.vars[layout.gcn..layout.norms],
        pos: 0,
    };
    let mut norms = Cursor {
        vars: &bound.vars[layout.norms..layout.edge_mlp],
        pos: 0,
    };
    let n_layers = params.gcn.len();
    let mut h = x;
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        if let Some(d) = dropout.as_mut().filter(|d| d.rate > 0.0) {
            let (r, c) = tape.value(h).shape();
            let keep = 1.0 - d.rate;
            let mask = DenseMatrix::from_fn(r, c, |_, _| {
                if d.rng.random::<f64>() < keep {
                    T::from_f64(1.0 / keep)
                } else {
                    T::zero()
                }
            });
            h = tape.dropout(h, mask)?;
        }
        let (w, b) = (cur.next(), cur.next());
        let xw = tape.matmul(h, w)?;
        let ax = tape.spmm(Arc::clone(adj), xw)?;
        let mut out = tape.add_row_bias(ax, b)?;
        if l + 1 < n_layers {
            out = tape.elu(out);
            if params.config.encoder.use_batchnorm {
                let (g, bt) = (norms.next(), norms.next());
                out = tape.batch_norm(out, g, bt, BATCHNORM_EPS)?;
            }
        }
        layers.push(out);
        h = out;
    }
    Ok(Encoded { z: h, layers })
}

fn mlp2<T: Scalar>(tape: &mut Tape<T>, vars: &[Var], x: Var) -> Result<Var> {
    let h = tape.matmul(x, vars[0])?;
    let h = tape.add_row_bias(h, vars[1])?;
    let h = tape.relu(h);
    let o = tape.matmul(h, vars[2])?;
    tape.add_row_bias(o, vars[3])
}

fn check_edges(z_rows: usize, edges: &[Edge]) -> Result<()> {
    if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= z_rows || v >= z_rows) {
        return Err(Error::NodeOutOfRange {
            node: u.max(v),
            n_nodes: z_rows,
        });
    }
    Ok(())
}

/// Edge logits (`edges.len()` x 1).
pub fn decode_structure_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    bound: &BoundParams,
    z: Var,
    edges: &[Edge],
) -> Result<Var> {
    check_edges(tape.value(z).rows(), edges)?;
    let us: Vec<usize> = edges.iter().map(|e| e.0).collect();
    let vs: Vec<usize> = edges.iter().map(|e| e.1).collect();
    let zu = tape.gather_rows(z, &us)?;
    let zv = tape.gather_rows(z, &vs)?;
    match params.config.decoder {
        DecoderMode::Dot => tape.row_dot(zu, zv),
        DecoderMode::Mlp => {
            let layout = params.layout();
            let prod = tape.hadamard(zu, zv)?;
            mlp2(tape, &bound.vars[layout.edge_mlp..layout.degree_mlp], prod)
        }
    }
}

/// Degree predictions (`n_nodes` x 1).
pub fn decode_degree_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    bound: &BoundParams,
    z: Var,
) -> Result<Var> {
    let layout = params.layout();
    mlp2(tape, &bound.vars[layout.degree_mlp..layout.degree_mlp + 4], z)
}

/// Final embeddings and every layer's output, without gradients.
pub fn encode<T: Scalar>(
    params: &ModelParams<T>,
    features: &DenseMatrix<T>,
    adj: &Arc<SparseMatrix<T>>,
) -> Result<(DenseMatrix<T>, Vec<DenseMatrix<T>>)> {
    let mut tape = Tape::new();
    let bound = params.bind_frozen(&mut tape);
    let x = tape.constant(features.clone());
    let enc = encode_on_tape(&mut tape, params, &bound, x, adj, None)?;
    let layers = enc.layers.iter().map(|&l| tape.value(l).clone()).collect();
    Ok((tape.value(enc.z).clone(), layers))
}

/// Structure-decoder logits for each edge given fixed embeddings.
pub fn decode_structure(params: &ModelParams, z: &DenseMatrix<f32>, edges: &[Edge]) -> Result<Vec<f32>> {
    if z.cols() != params.config.encoder.hidden_dim {
        return Err(Error::shape(
            "decode_structure",
            format!("embedding width {} vs hidden_dim {}", z.cols(), params.config.encoder.hidden_dim),
        ));
    }
    let mut tape = Tape::new();
    let bound = params.bind_frozen(&mut tape);
    let zv = tape.constant(z.clone());
    let out = decode_structure_on_tape(&mut tape, params, &bound, zv, edges)?;
    Ok(tape.value(out).as_slice().to_vec())
}

/// Degree-decoder output for every row of `z`.
pub fn decode_degree(params: &ModelParams, z: &DenseMatrix<f32>) -> Result<Vec<f32>> {
    if z.cols() != params.config.encoder.hidden_dim {
        return Err(Error::shape(
            "decode_degree",
            format!("embedding width {} vs hidden_dim {}", z.cols(), params.config.encoder.hidden_dim),
        ));
    }
    let mut tape = Tape::new();
    let bound = params.bind_frozen(&mut tape);
    let zv = tape.constant(z.clone());
    let out = decode_degree_on_tape(&mut tape, params, &bound, zv)?;
    Ok(tape.value(out).as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_adjacency, Graph};

    fn cfg(in_dim: usize, n_layers: usize, hidden: usize, decoder: DecoderMode) -> ModelConfig {
        ModelConfig {
            in_dim,
            encoder: EncoderConfig {
                n_layers,
                hidden_dim: hidden,
                use_batchnorm: true,
                dropout: 0.0,
            },
            decoder,
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let c = cfg(7, 3, 5, DecoderMode::Mlp);
        let a = init_params(c, 11).unwrap();
        assert_eq!(a, init_params(c, 11).unwrap());
        assert_ne!(a, init_params(c, 12).unwrap());
        for lin in a.gcn.iter().chain(a.degree_mlp.iter()) {
            let (fi, fo) = lin.weight.shape();
            let bound = (6.0 / (fi + fo) as f64).sqrt() as f32;
            assert!(lin.weight.as_slice().iter().all(|w| w.abs() <= bound));
            assert!(lin.bias.as_slice().iter().all(|&b| b == 0.0));
        }
        assert_eq!(a.norms.len(), 2);
        assert!(a.norms[0].gamma.as_slice().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn zero_weights_give_zero_embeddings() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let adj = Arc::new(normalized_adjacency(&g, true));
        let mut p = init_params(cfg(3, 3, 4, DecoderMode::Mlp), 0).unwrap();
        for lin in &mut p.gcn {
            lin.weight = DenseMatrix::zeros(lin.weight.rows(), lin.weight.cols());
        }
        let x = DenseMatrix::from_fn(4, 3, |i, j| (i + 2 * j) as f32);
        let (z, layers) = encode(&p, &x, &adj).unwrap();
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(layers.len(), 3);
        for lin in &mut p.degree_mlp {
            lin.weight = DenseMatrix::zeros(lin.weight.rows(), lin.weight.cols());
        }
        assert_eq!(decode_degree(&p, &z).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn single_identity_layer_passes_features_through() {
        let mut p = init_params(cfg(3, 1, 3, DecoderMode::Dot), 0).unwrap();
        p.gcn[0].weight = DenseMatrix::identity(3);
        let adj = Arc::new(SparseMatrix::identity(5));
        let x = DenseMatrix::from_fn(5, 3, |i, j| i as f32 - j as f32 * 0.5);
        let (z, layers) = encode(&p, &x, &adj).unwrap();
        assert_eq!(z, x);
        assert_eq!(layers, vec![x]);
    }

    #[test]
    fn dot_decoder_examples() {
        let p = init_params(cfg(2, 1, 2, DecoderMode::Dot), 0).unwrap();
        let z = DenseMatrix::from_rows(&[vec![0.0f32, 0.0], vec![0.0, 0.0], vec![10.0, 0.0], vec![10.0, 0.0]])
            .unwrap();
        let logits = decode_structure(&p, &z, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(logits[0], 0.0);
        let prob = 1.0 / (1.0 + (-(logits[1] as f64)).exp());
        assert!(prob > 0.9999);
        assert!(decode_structure(&p, &z, &[(0, 4)]).is_err());
    }

    #[test]
    fn mlp_decoder_by_hand() {
        // z_u = [1, 2], z_v = [3, -1] -> product [3, -2]
        // hidden = relu([3, -2] W1 + b1), W1 = [[1, 0], [0, 1]], b1 = [0, 0.5] -> [3, 0]
        // out = hidden . [2, 7] + 0.25 = 6.25
        let mut p = init_params(cfg(2, 1, 2, DecoderMode::Mlp), 0).unwrap();
        let mlp = p.edge_mlp.as_mut().unwrap();
        mlp[0].weight = DenseMatrix::identity(2);
        mlp[0].bias = DenseMatrix::from_rows(&[vec![0.0, 0.5]]).unwrap();
        mlp[1].weight = DenseMatrix::from_rows(&[vec![2.0], vec![7.0]]).unwrap();
        mlp[1].bias = DenseMatrix::filled(1, 1, 0.25);
        let z = DenseMatrix::from_rows(&[vec![1.0f32, 2.0], vec![3.0, -1.0]]).unwrap();
        assert_eq!(decode_structure(&p, &z, &[(0, 1)]).unwrap(), vec![6.25]);
    }

    #[test]
    fn degree_decoder_by_hand() {
        // z = [2, -1]; hidden = relu(z W1 + b1) with W1 = [[1, 1], [1, -1]], b1 = [0, 0]
        // -> relu([1, 3]) = [1, 3]; out = [1, 3] . [0.5, 2] - 1 = 5.5
        let mut p = init_params(cfg(2, 1, 2, DecoderMode::Dot), 0).unwrap();
        p.degree_mlp[0].weight = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        p.degree_mlp[1].weight = DenseMatrix::from_rows(&[vec![0.5], vec![2.0]]).unwrap();
        p.degree_mlp[1].bias = DenseMatrix::filled(1, 1, -1.0);
        let z = DenseMatrix::from_rows(&[vec![2.0f32, -1.0]]).unwrap();
        assert_eq!(decode_degree(&p, &z).unwrap(), vec![5.5]);
        let z = DenseMatrix::zeros(9, 2);
        assert_eq!(decode_degree(&p, &z).unwrap().len(), 9);
    }

    #[test]
    fn checkpoint_tensors_round_trip() {
        for mode in [DecoderMode::Dot, DecoderMode::Mlp] {
            let p = init_params(cfg(6, 3, 4, mode), 5).unwrap();
            let back = ModelParams::from_named(&p.to_named()).unwrap();
            assert_eq!(back, p);
        }
        let mut named = init_params(cfg(6, 2, 4, DecoderMode::Mlp), 5).unwrap().to_named();
        named.retain(|t| t.name != "degree_decoder.1.bias");
        assert!(ModelParams::from_named(&named).is_err());
    }

    #[test]
    fn shape_checks() {
        let p = init_params(cfg(3, 2, 4, DecoderMode::Mlp), 0).unwrap();
        let adj = Arc::new(SparseMatrix::identity(4));
        assert!(encode(&p, &DenseMatrix::zeros(5, 3), &adj).is_err());
        assert!(encode(&p, &DenseMatrix::zeros(4, 2), &adj).is_err());
    }
}
