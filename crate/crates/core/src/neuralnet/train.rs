use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network, Workspace};
use super::optim::{Optimizer, OptimizerKind};
use crate::patching::PatchInstance;
use crate::util::{argmax, compensated_sum, derive_seed, rng};
use crate::{Error, Result};

/// Batches are reduced in shards of this many examples, shard sums in shard
/// order. Serial and parallel mode therefore produce the same bits.
const SHARD: usize = 16;

/// Anything the network can be trained on.
pub trait Example: Sync {
    fn input(&self) -> &[f64];
    fn label(&self) -> usize;
}

impl Example for PatchInstance {
    fn input(&self) -> &[f64] {
        &self.values
    }

    fn label(&self) -> usize {
        self.label
    }
}

impl Example for (Vec<f64>, usize) {
    fn input(&self) -> &[f64] {
        &self.0
    }

    fn label(&self) -> usize {
        self.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Stop after this many epochs without a validation-accuracy improvement.
    pub early_stopping_patience: usize,
    pub seed: u64,
    /// Compute batch shards on the rayon pool.
    pub parallel: bool,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            early_stopping_patience: 5,
            seed: 0,
            parallel: false,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.early_stopping_patience == 0 {
            return Err(Error::Config("epochs, batch_size and patience must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.early_stopping_patience >= self.epochs {
            return Err(Error::Config(format!(
                "early stopping patience ({}) must be below epochs ({})",
                self.early_stopping_patience, self.epochs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub stopped_early: bool,
}

struct Shard {
    ws: Workspace,
    grads: Gradients,
    losses: Vec<f64>,
}

impl Shard {
    fn run<E: Example>(&mut self, net: &Network, items: &[&E]) {
        self.grads.fill(0.0);
        self.losses.clear();
        for e in items {
            let loss = net.accumulate_gradient(e.input(), e.label(), &mut self.ws, &mut self.grads);
            self.losses.push(loss);
        }
    }
}

/// Argmax accuracy of the network on labeled examples.
pub fn accuracy<E: Example>(net: &Network, examples: &[E]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let mut ws = Workspace::new(net);
    let correct = examples
        .iter()
        .filter(|e| {
            net.forward_into(e.input(), &mut ws);
            argmax(ws.probs()) == e.label()
        })
        .count();
    correct as f64 / examples.len() as f64
}

/// Mini-batch training on the mean patch cross-entropy. The parameters of the
/// epoch with the best validation accuracy are returned.
pub fn train<E: Example>(mut net: Network, train: &[E], val: &[E], spec: &TrainSpec) -> Result<(Network, TrainLog)> {
    spec.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Validation(
            "training and validation sets must be non-empty".into(),
        ));
    }
    for e in train.iter().chain(val) {
        if e.input().len() != net.input_len() {
            return Err(Error::dimension(net.input_len(), e.input().len()));
        }
        if e.label() >= net.class_count() {
            return Err(Error::Index {
                index: e.label(),
                limit: net.class_count(),
            });
        }
    }

    let mut opt = Optimizer::new(spec.optimizer, spec.learning_rate, &net);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = rng(derive_seed(spec.seed, 0x5eed));
    let shards_per_batch = spec.batch_size.div_ceil(SHARD);
    let mut shards: Vec<Shard> = (0..shards_per_batch)
        .map(|_| Shard {
            ws: Workspace::new(&net),
            grads: Gradients::zeros_like(&net),
            losses: Vec::with_capacity(SHARD),
        })
        .collect();
    let mut total = Gradients::zeros_like(&net);

    let mut log = TrainLog {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_accuracy: f64::NEG_INFINITY,
        stopped_early: false,
    };
    let mut best = net.flat_params();

    for epoch in 1..=spec.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_losses = Vec::with_capacity(train.len());
        for batch in order.chunks(spec.batch_size) {
            let items: Vec<&E> = batch.iter().map(|&i| &train[i]).collect();
            let chunks: Vec<&[&E]> = items.chunks(SHARD).collect();
            let active = &mut shards[..chunks.len()];
            if spec.parallel {
                let net_ref = &net;
                active
                    .par_iter_mut()
                    .zip(chunks.par_iter())
                    .for_each(|(shard, chunk)| shard.run(net_ref, chunk));
            } else {
                for (shard, chunk) in active.iter_mut().zip(&chunks) {
                    shard.run(&net, chunk);
                }
            }
            total.fill(0.0);
            for shard in active.iter() {
                total.add_assign(&shard.grads);
                epoch_losses.extend_from_slice(&shard.losses);
            }
            total.scale(1.0 / batch.len() as f64);
            opt.step(&mut net, &total);
        }
        let train_loss = compensated_sum(epoch_losses.iter().copied()) / epoch_losses.len() as f64;
        if !train_loss.is_finite() || !net.flat_params().iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                loss: train_loss,
            });
        }
        let val_accuracy = accuracy(&net, val);
        log.epochs.push(EpochLog {
            epoch,
            train_loss,
            val_accuracy,
        });
        if val_accuracy > log.best_val_accuracy {
            log.best_val_accuracy = val_accuracy;
            log.best_epoch = epoch;
            best = net.flat_params();
        } else if epoch - log.best_epoch >= spec.early_stopping_patience {
            log.stopped_early = epoch < spec.epochs;
            break;
        }
    }
    net.set_flat_params(&best)?;
    Ok((net, log))
}
