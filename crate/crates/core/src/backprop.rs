//! Plain mini-batch backpropagation for one layer, and the deterministic
//! mini-batch schedule shared with the GA's survivor refinement.

use crate::autoencoder::TiedAutoencoder;
use crate::error::{Error, Result};
use crate::numerics::{RandomStream, Vector};

/// Mini-batches drawn from one shuffled pass over `n` samples. Batch `k`
/// covers permutation positions `[k·B, (k+1)·B)`; indices past the last full
/// batch wrap around, so any `k` is valid.
#[derive(Clone, Debug)]
pub struct BatchPlan {
    order: Vec<usize>,
    batch_size: usize,
}

impl BatchPlan {
    pub fn new(n: usize, batch_size: usize, rng: &mut RandomStream) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput("mini-batch schedule"));
        }
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        Ok(BatchPlan {
            order,
            batch_size: batch_size.min(n),
        })
    }

    /// Full batches per pass (at least one).
    pub fn batches_per_pass(&self) -> usize {
        self.order.len() / self.batch_size
    }

    pub fn indices(&self, k: usize) -> &[usize] {
        let k = k % self.batches_per_pass();
        &self.order[k * self.batch_size..(k + 1) * self.batch_size]
    }

    pub fn batch<'a>(&self, data: &'a [Vector], k: usize) -> Vec<&'a Vector> {
        self.indices(k).iter().map(|&i| &data[i]).collect()
    }
}

/// Full mini-batches in one epoch of `n` samples (at least one).
pub fn batches_per_epoch(n: usize, batch_size: usize) -> usize {
    if batch_size == 0 || n <= batch_size {
        1
    } else {
        n / batch_size
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackpropConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub budget_total_updates: u64,
}

impl Default for BackpropConfig {
    fn default() -> Self {
        BackpropConfig {
            learning_rate: 0.1,
            batch_size: 20,
            budget_total_updates: 4_000,
        }
    }
}

impl BackpropConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.budget_total_updates == 0 {
            return Err(Error::InvalidConfig(
                "budget_total_updates must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-generation (GA) or per-epoch (backprop) training record.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub generation: u64,
    pub best_rmse: f64,
    pub mean_rmse: f64,
    pub best_sparsity_exact: f64,
    pub updates_consumed: u64,
}

/// Outcome of training one layer by either method.
#[derive(Clone, Debug)]
pub struct LayerResult {
    pub best: TiedAutoencoder,
    /// RMSE of `best` on the evaluation samples.
    pub best_rmse: f64,
    pub history: Vec<GenerationRecord>,
    pub updates_consumed: u64,
}

pub const HISTORY_CSV_HEADER: &str =
    "generation,best_rmse,mean_rmse,best_sparsity_exact,updates_consumed";

pub fn history_to_csv(history: &[GenerationRecord]) -> String {
    let mut out = String::from(HISTORY_CSV_HEADER);
    out.push('\n');
    for r in history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.generation, r.best_rmse, r.mean_rmse, r.best_sparsity_exact, r.updates_consumed
        ));
    }
    out
}

/// Trains a freshly initialized autoencoder with exactly
/// `cfg.budget_total_updates` SGD steps, reshuffling every epoch. History has
/// one record per completed epoch plus one for a trailing partial epoch.
pub fn train_layer_backprop(
    cfg: &BackpropConfig,
    shape: (usize, usize),
    train: &[Vector],
    eval: &[Vector],
    rng: &RandomStream,
) -> Result<LayerResult> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("backprop training data"));
    }
    if eval.is_empty() {
        return Err(Error::EmptyInput("backprop evaluation data"));
    }
    let (hidden, visible) = shape;
    let mut ae = TiedAutoencoder::random(hidden, visible, &mut rng.fork("init"))?;
    let per_epoch = batches_per_epoch(train.len(), cfg.batch_size) as u64;
    let mut history = Vec::new();
    let mut plan = None;
    for step in 0..cfg.budget_total_updates {
        let epoch = step / per_epoch;
        let k = (step % per_epoch) as usize;
        if k == 0 {
            plan = Some(BatchPlan::new(
                train.len(),
                cfg.batch_size,
                &mut rng.fork_indexed("epoch", epoch),
            )?);
        }
        let batch = plan
            .as_ref()
            .expect("plan built at epoch start")
            .batch(train, k);
        let g = ae.gradient(&batch)?;
        ae.apply_gradients(&g, cfg.learning_rate)?;
        let done = step + 1;
        if done % per_epoch == 0 || done == cfg.budget_total_updates {
            let rmse = ae.rmse(eval)?;
            history.push(GenerationRecord {
                generation: history.len() as u64 + 1,
                best_rmse: rmse,
                mean_rmse: rmse,
                best_sparsity_exact: ae.sparsity(0.0),
                updates_consumed: done,
            });
        }
    }
    let best_rmse = history
        .last()
        .map(|r| r.best_rmse)
        .expect("budget is at least one update");
    Ok(LayerResult {
        best: ae,
        best_rmse,
        history,
        updates_consumed: cfg.budget_total_updates,
    })
}
