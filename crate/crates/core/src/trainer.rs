//! Self-supervised pretraining: mask, encode the visible graph, reconstruct
//! the masked edges and their degrees, step Adam, early-stop on validation AUC.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation;
use crate::graph::{canonical, normalized_adjacency, Edge, Graph};
use crate::masking::{MaskSplit, MaskingStrategy};
use crate::models::{
    self, decode_degree_on_tape, decode_structure_on_tape, encode_on_tape, DecoderMode, Dropout,
    EncoderConfig, ModelConfig, ModelParams,
};
use crate::numcore::{adam_step, AdamConfig, AdamState, DenseMatrix, Scalar, SparseMatrix, Tape, Var};
use crate::rng::{self, derive_seed, Rng};

/// Degree-loss weights searched in the reference hyperparameter grid.
pub const ALPHA_GRID: [f64; 11] = [
    0.0, 1e-3, 2e-3, 3e-3, 4e-3, 5e-3, 6e-3, 7e-3, 8e-3, 9e-3, 1e-2,
];

const TAG_INIT: u64 = 0;
const TAG_MASK: u64 = 1;
const TAG_NEG: u64 = 2;
const TAG_DROPOUT: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub strategy: MaskingStrategy,
    pub alpha: f64,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub encoder: EncoderConfig,
    pub decoder: DecoderMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            strategy: MaskingStrategy::DEFAULT_PATH,
            alpha: 2e-3,
            lr: 0.01,
            max_epochs: 500,
            patience: 50,
            encoder: EncoderConfig::default(),
            decoder: DecoderMode::Mlp,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        self.encoder.validate()?;
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.patience == 0 {
            return Err(Error::InvalidArgument("patience must be >= 1".into()));
        }
        Ok(())
    }

    pub fn model_config(&self, in_dim: usize) -> ModelConfig {
        ModelConfig {
            in_dim,
            encoder: self.encoder,
            decoder: self.decoder,
        }
    }
}

/// One epoch of the loss history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub gae: f64,
    pub deg: f64,
    pub val_auc: Option<f64>,
    pub n_masked: usize,
}

impl EpochRecord {
    /// `epoch=<n> loss=<f> gae=<f> deg=<f> val_auc=<f> masked=<n>`
    pub fn log_line(&self) -> String {
        let auc = self.val_auc.map_or_else(|| "nan".to_string(), |a| format!("{a:.6}"));
        format!(
            "epoch={} loss={:.6} gae={:.6} deg={:.6} val_auc={auc} masked={}",
            self.epoch, self.loss, self.gae, self.deg, self.n_masked
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Epochs completed.
    pub epoch: usize,
    pub best_epoch: usize,
    pub best_val_auc: Option<f64>,
    pub stopped_early: bool,
    pub history: Vec<EpochRecord>,
}

/// Held-out edges used for model selection.
#[derive(Clone, Copy, Debug)]
pub struct Validation<'a> {
    pub pos: &'a [Edge],
    pub neg: &'a [Edge],
}

/// `count` non-edges of `g` drawn uniformly with replacement by rejection.
pub fn negative_sample(g: &Graph, count: usize, rng: &mut Rng) -> Result<Vec<Edge>> {
    let n = g.n_nodes();
    let available = g.n_non_edges();
    if count > 0 && available == 0 {
        return Err(Error::NotEnoughNonEdges {
            requested: count,
            available,
        });
    }
    let budget = 10_000 + 100 * count;
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        if attempts == budget {
            return Err(Error::SamplingExhausted { attempts });
        }
        attempts += 1;
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && !g.has_edge(u, v) {
            out.push(canonical(u, v));
        }
    }
    Ok(out)
}

/// Mean BCE over positives plus mean BCE over negatives.
pub fn gae_loss<T: Scalar>(tape: &mut Tape<T>, pos_logits: Var, neg_logits: Var) -> Result<Var> {
    if tape.value(pos_logits).as_slice().is_empty() {
        return Err(Error::NothingToReconstruct("no positive edges".into()));
    }
    if tape.value(neg_logits).as_slice().is_empty() {
        return Err(Error::InvalidArgument("no negative edges".into()));
    }
    let pos = tape.bce_with_logits(pos_logits, 1.0)?;
    let neg = tape.bce_with_logits(neg_logits, 0.0)?;
    tape.add(pos, neg)
}

/// Mean squared error between per-node predictions and masked degrees.
pub fn degree_loss<T: Scalar>(tape: &mut Tape<T>, predictions: Var, masked_degrees: &[usize]) -> Result<Var> {
    let rows = tape.value(predictions).rows();
    if masked_degrees.len() != rows {
        return Err(Error::InvalidArgument(format!(
            "{} degree targets for {rows} predictions",
            masked_degrees.len()
        )));
    }
    let target = DenseMatrix::from_vec(rows, 1, masked_degrees.iter().map(|&d| T::from_f64(d as f64)).collect())?;
    tape.mse(predictions, target)
}

/// `gae + alpha * deg`.
pub fn total_loss<T: Scalar>(tape: &mut Tape<T>, gae: Var, deg: Var, alpha: f64) -> Result<Var> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(gae);
    }
    let weighted = tape.scale(deg, alpha);
    tape.add(gae, weighted)
}

/// Loss values of one forward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub loss: f64,
    pub gae: f64,
    pub deg: f64,
}

/// Everything a reconstruction step needs besides the parameters.
pub struct StepInputs<'a, T = f32> {
    pub features: &'a DenseMatrix<T>,
    pub visible_adj: &'a Arc<SparseMatrix<T>>,
    pub masked: &'a [Edge],
    pub negatives: &'a [Edge],
    pub masked_degrees: &'a [usize],
    pub alpha: f64,
}

impl<'a, T: Scalar> StepInputs<'a, T> {
    pub fn new(
        features: &'a DenseMatrix<T>,
        visible_adj: &'a Arc<SparseMatrix<T>>,
        mask: &'a MaskSplit,
        masked_degrees: &'a [usize],
        negatives: &'a [Edge],
        alpha: f64,
    ) -> Self {
        Self {
            features,
            visible_adj,
            masked: &mask.masked_edges,
            negatives,
            masked_degrees,
            alpha,
        }
    }
}

fn forward<T: Scalar>(
    params: &ModelParams<T>,
    inputs: &StepInputs<'_, T>,
    dropout: Option<Dropout<'_>>,
    trainable: bool,
) -> Result<(Tape<T>, Vec<Var>, Var, LossParts)> {
    let mut tape = Tape::new();
    let bound = if trainable {
        params.bind(&mut tape)
    } else {
        params.bind_frozen(&mut tape)
    };
    let x = tape.constant(inputs.features.clone());
    let enc = encode_on_tape(&mut tape, params, &bound, x, inputs.visible_adj, dropout)?;
    let pos = decode_structure_on_tape(&mut tape, params, &bound, enc.z, inputs.masked)?;
    let neg = decode_structure_on_tape(&mut tape, params, &bound, enc.z, inputs.negatives)?;
    let gae = gae_loss(&mut tape, pos, neg)?;
    let deg_pred = decode_degree_on_tape(&mut tape, params, &bound, enc.z)?;
    let deg = degree_loss(&mut tape, deg_pred, inputs.masked_degrees)?;
    let loss = total_loss(&mut tape, gae, deg, inputs.alpha)?;
    let parts = LossParts {
        loss: tape.scalar(loss),
        gae: tape.scalar(gae),
        deg: tape.scalar(deg),
    };
    Ok((tape, bound.vars().to_vec(), loss, parts))
}

/// Loss of one reconstruction step without gradients.
pub fn step_loss<T: Scalar>(params: &ModelParams<T>, inputs: &StepInputs<'_, T>) -> Result<LossParts> {
    Ok(forward(params, inputs, None, false)?.3)
}

/// Loss and gradients (in [`ModelParams::tensors`] order) of one step.
pub fn step_gradients<T: Scalar>(
    params: &ModelParams<T>,
    inputs: &StepInputs<'_, T>,
    dropout: Option<Dropout<'_>>,
) -> Result<(LossParts, Vec<DenseMatrix<T>>)> {
    let (mut tape, vars, loss, parts) = forward(params, inputs, dropout, true)?;
    let mut grads = tape.backward(loss)?;
    let grads = vars
        .iter()
        .map(|&v| grads.take(v).expect("every bound tensor is a parameter"))
        .collect();
    Ok((parts, grads))
}

/// Validation AUC with embeddings from the full train graph.
fn validation_auc(
    params: &ModelParams,
    features: &DenseMatrix<f32>,
    full_adj: &Arc<SparseMatrix<f32>>,
    val: &Validation<'_>,
) -> Result<f64> {
    let (z, _) = models::encode(params, features, full_adj)?;
    let (scores, labels) = evaluation::score_candidates(params, &z, val.pos, val.neg)?;
    evaluation::auc(&scores, &labels)
}

/// Pretrains a fresh model, calling `on_epoch` after every epoch.
///
/// Returns the parameters of the epoch with the best validation AUC (the
/// last epoch when there is no validation set) and the training state.
pub fn pretrain_with(
    train_graph: &Graph,
    features: &DenseMatrix<f32>,
    validation: Option<Validation<'_>>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelParams, TrainState)> {
    config.validate()?;
    if train_graph.n_edges() == 0 {
        return Err(Error::NothingToReconstruct("train graph has no edges".into()));
    }
    if features.rows() != train_graph.n_nodes() {
        return Err(Error::InvalidArgument(format!(
            "{} feature rows for {} nodes",
            features.rows(),
            train_graph.n_nodes()
        )));
    }
    let validation = validation.filter(|v| !v.pos.is_empty() && !v.neg.is_empty());
    let full_adj = Arc::new(normalized_adjacency(train_graph, true));
    let mut params = models::init_params(
        config.model_config(features.cols()),
        derive_seed(config.seed, &[TAG_INIT]),
    )?;
    let adam = AdamConfig::with_lr(config.lr);
    let mut adam_state = AdamState::new();
    let mut state = TrainState::default();
    let mut best = params.clone();

    for epoch in 1..=config.max_epochs {
        let e = epoch as u64;
        let mask = config
            .strategy
            .apply(train_graph, derive_seed(config.seed, &[TAG_MASK, e]))?;
        if mask.masked_edges.is_empty() {
            return Err(Error::NothingToReconstruct(format!(
                "epoch {epoch}: the {} mask selected no edges",
                config.strategy.name()
            )));
        }
        let negatives = negative_sample(
            train_graph,
            mask.masked_edges.len(),
            &mut rng::rng(derive_seed(config.seed, &[TAG_NEG, e])),
        )?;
        let masked_degrees = mask.masked_degrees(train_graph.n_nodes());
        let visible_adj = Arc::new(normalized_adjacency(&mask.visible_graph, true));
        let inputs = StepInputs::new(features, &visible_adj, &mask, &masked_degrees, &negatives, config.alpha);
        let mut drop_rng = rng::rng(derive_seed(config.seed, &[TAG_DROPOUT, e]));
        let dropout = (config.encoder.dropout > 0.0).then_some(Dropout {
            rate: config.encoder.dropout,
            rng: &mut drop_rng,
        });
        let (parts, grads) = step_gradients(&params, &inputs, dropout)?;
        if !(parts.loss.is_finite() && parts.gae.is_finite() && parts.deg.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                loss: parts.loss,
                gae: parts.gae,
                deg: parts.deg,
            });
        }
        let grad_refs: Vec<&DenseMatrix<f32>> = grads.iter().collect();
        adam_step(&mut params.tensors_mut(), &grad_refs, &mut adam_state, &adam)?;

        let val_auc = validation
            .as_ref()
            .map(|v| validation_auc(&params, features, &full_adj, v))
            .transpose()?;
        let record = EpochRecord {
            epoch,
            loss: parts.loss,
            gae: parts.gae,
            deg: parts.deg,
            val_auc,
            n_masked: mask.masked_edges.len(),
        };
        log::debug!("{}", record.log_line());
        on_epoch(&record);
        state.history.push(record);
        state.epoch = epoch;

        match val_auc {
            Some(auc) if state.best_val_auc.is_none_or(|b| auc > b) => {
                state.best_val_auc = Some(auc);
                state.best_epoch = epoch;
                best = params.clone();
            }
            Some(_) => {
                if epoch - state.best_epoch >= config.patience {
                    state.stopped_early = true;
                    break;
                }
            }
            None => {
                state.best_epoch = epoch;
            }
        }
    }
    if validation.is_none() {
        best = params;
    }
    Ok((best, state))
}

/// [`pretrain_with`] without an epoch callback.
pub fn pretrain(
    train_graph: &Graph,
    features: &DenseMatrix<f32>,
    validation: Option<Validation<'_>>,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainState)> {
    pretrain_with(train_graph, features, validation, config, |_| {})
}
