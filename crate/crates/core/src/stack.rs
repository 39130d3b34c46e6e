//! Greedy layer-wise stacking of trained encoders into a frozen feature
//! extractor.

use std::path::Path;

use crate::autoencoder::TiedAutoencoder;
use crate::backprop::{train_layer_backprop, BackpropConfig, LayerResult};
use crate::error::{Error, Result};
use crate::format::{decode_layers, encode_layers, LayerRecord};
use crate::ga::{self, GaConfig};
use crate::numerics::{sigmoid_in_place, Matrix, RandomStream, Vector};

/// Encoder half of a trained autoencoder. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenLayer {
    weights: Matrix,
    enc_bias: Vector,
}

impl FrozenLayer {
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn enc_bias(&self) -> &Vector {
        &self.enc_bias
    }

    pub fn width(&self) -> usize {
        self.weights.rows()
    }

    pub fn sparsity(&self, threshold: f64) -> f64 {
        crate::autoencoder::weight_sparsity(self.weights.as_slice(), threshold)
    }

    fn encode(&self, x: &[f64]) -> Result<Vector> {
        let mut h = self.weights.matvec(x)?;
        for (hi, b) in h.iter_mut().zip(self.enc_bias.iter()) {
            *hi += b;
        }
        sigmoid_in_place(&mut h);
        Ok(h)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeepStack {
    input_width: usize,
    layers: Vec<FrozenLayer>,
}

impl DeepStack {
    pub fn new(input_width: usize) -> Result<Self> {
        if input_width == 0 {
            return Err(Error::InvalidConfig(
                "stack input width must be at least 1".into(),
            ));
        }
        Ok(DeepStack {
            input_width,
            layers: Vec::new(),
        })
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    /// Width of the last layer, or the input width when empty.
    pub fn output_width(&self) -> usize {
        self.layers
            .last()
            .map_or(self.input_width, FrozenLayer::width)
    }

    pub fn layers(&self) -> &[FrozenLayer] {
        &self.layers
    }

    /// `[input, layer 1, …]` widths.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width)
            .chain(self.layers.iter().map(FrozenLayer::width))
            .collect()
    }

    /// Freezes the encoder of `ae` on top of the stack; the decoder bias is
    /// dropped.
    pub fn push_trained_layer(&mut self, ae: TiedAutoencoder) -> Result<()> {
        if ae.visible() != self.output_width() {
            return Err(Error::dim(
                "push_trained_layer",
                self.output_width(),
                ae.visible(),
            ));
        }
        let (weights, enc_bias, _) = ae.into_parts();
        self.layers.push(FrozenLayer { weights, enc_bias });
        Ok(())
    }

    pub fn extract_features(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.input_width {
            return Err(Error::dim("extract_features", self.input_width, x.len()));
        }
        let mut out = Vector::from(x);
        for layer in &self.layers {
            out = layer.encode(&out)?;
        }
        Ok(out)
    }

    pub fn extract_all(&self, samples: &[Vector]) -> Result<Vec<Vector>> {
        samples.iter().map(|x| self.extract_features(x)).collect()
    }

    pub fn to_gadl_bytes(&self) -> Result<Vec<u8>> {
        let records: Vec<LayerRecord> = self
            .layers
            .iter()
            .map(|l| LayerRecord {
                weights: l.weights.clone(),
                enc_bias: l.enc_bias.clone(),
                dec_bias: None,
            })
            .collect();
        encode_layers(&records)
    }

    /// Reads a stack file. An empty stack has no recorded input width, so
    /// `input_width` supplies it; otherwise it must match the first layer
    /// if given.
    pub fn from_gadl_bytes(bytes: &[u8], input_width: Option<usize>) -> Result<Self> {
        let records = decode_layers(bytes)?;
        let width = match (records.first(), input_width) {
            (Some(r), Some(w)) if r.weights.cols() != w => {
                return Err(Error::dim("stack input width", w, r.weights.cols()))
            }
            (Some(r), _) => r.weights.cols(),
            (None, Some(w)) => w,
            (None, None) => {
                return Err(Error::Format(
                    "empty stack file carries no input width".into(),
                ))
            }
        };
        let mut stack = DeepStack::new(width)?;
        for r in records {
            if r.weights.cols() != stack.output_width() {
                return Err(Error::dim(
                    "stack layer chain",
                    stack.output_width(),
                    r.weights.cols(),
                ));
            }
            stack.layers.push(FrozenLayer {
                weights: r.weights,
                enc_bias: r.enc_bias,
            });
        }
        Ok(stack)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_gadl_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        DeepStack::from_gadl_bytes(&std::fs::read(path)?, None)
    }
}

/// How each layer of a stack is trained. The configured budget covers the
/// whole stack and is split evenly across layers.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerTrainer {
    Ga(GaConfig),
    Backprop(BackpropConfig),
}

impl LayerTrainer {
    pub fn total_budget(&self) -> u64 {
        match self {
            LayerTrainer::Ga(c) => c.budget_total_updates,
            LayerTrainer::Backprop(c) => c.budget_total_updates,
        }
    }

    fn train(
        &self,
        layer_budget: u64,
        shape: (usize, usize),
        train: &[Vector],
        eval: &[Vector],
        rng: &RandomStream,
    ) -> Result<LayerResult> {
        match self {
            LayerTrainer::Ga(c) => {
                let cfg = GaConfig {
                    budget_total_updates: layer_budget,
                    ..c.clone()
                };
                ga::train_layer(&cfg, shape, train, eval, rng)
            }
            LayerTrainer::Backprop(c) => {
                let cfg = BackpropConfig {
                    budget_total_updates: layer_budget,
                    ..c.clone()
                };
                train_layer_backprop(&cfg, shape, train, eval, rng)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct StackResult {
    pub stack: DeepStack,
    pub layers: Vec<LayerResult>,
}

impl StackResult {
    pub fn updates_consumed(&self) -> u64 {
        self.layers.iter().map(|l| l.updates_consumed).sum()
    }

    /// Reconstruction RMSE of the top layer on its evaluation features.
    pub fn final_rmse(&self) -> f64 {
        self.layers.last().map_or(0.0, |l| l.best_rmse)
    }
}

/// Trains one autoencoder per consecutive width pair, each on the frozen
/// outputs of the layers below. `eval_indices` selects the training samples
/// whose features score each layer. Layer `k` draws from
/// `rng.fork_indexed("layer", k)`.
pub fn train_stack(
    architecture: &[usize],
    train: &[Vector],
    eval_indices: &[usize],
    trainer: &LayerTrainer,
    rng: &RandomStream,
) -> Result<StackResult> {
    if architecture.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "architecture needs at least 2 widths, got {architecture:?}"
        )));
    }
    if architecture.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "architecture widths must be positive: {architecture:?}"
        )));
    }
    if train.is_empty() {
        return Err(Error::EmptyInput("stack training data"));
    }
    if eval_indices.is_empty() {
        return Err(Error::EmptyInput("stack evaluation indices"));
    }
    if let Some(&bad) = eval_indices.iter().find(|&&i| i >= train.len()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: train.len(),
        });
    }
    if train[0].len() != architecture[0] {
        return Err(Error::dim(
            "train_stack input",
            architecture[0],
            train[0].len(),
        ));
    }
    let n_layers = architecture.len() - 1;
    let layer_budget = trainer.total_budget() / n_layers as u64;
    if layer_budget == 0 {
        return Err(Error::BudgetTooSmall {
            budget: trainer.total_budget(),
            per_generation: n_layers as u64,
        });
    }

    let mut stack = DeepStack::new(architecture[0])?;
    let mut layers = Vec::with_capacity(n_layers);
    let mut features: Vec<Vector> = train.to_vec();
    for (k, pair) in architecture.windows(2).enumerate() {
        let shape = (pair[1], pair[0]);
        let eval: Vec<Vector> = eval_indices.iter().map(|&i| features[i].clone()).collect();
        let result = trainer.train(
            layer_budget,
            shape,
            &features,
            &eval,
            &rng.fork_indexed("layer", k as u64),
        )?;
        let encoder = result.best.clone();
        if k + 1 < n_layers {
            features = features
                .iter()
                .map(|x| encoder.encode(x))
                .collect::<Result<_>>()?;
        }
        stack.push_trained_layer(encoder)?;
        layers.push(result);
    }
    Ok(StackResult { stack, layers })
}
