//! The patch classification network and everything needed to train it:
//! layers with hand-written backward passes, Adam/SGD, a deterministic
//! mini-batch trainer and a finite-difference gradient checker.

pub mod gradcheck;
pub mod layers;
mod network;
mod optim;
mod tensor;
pub mod train;

pub use layers::Activation;
pub use network::{patch_cross_entropy, softmax, ConvBlock, Gradients, Network, NetworkSpec, Workspace, LOG_CLAMP};
pub use optim::{Optimizer, OptimizerKind};
pub use tensor::Tensor;
pub use train::{accuracy, train, EpochLog, Example, TrainLog, TrainSpec};

use crate::patching::PatchInstance;
use crate::util::compensated_sum;
use crate::{Error, Result};

/// Softmax prediction for one patch.
pub fn forward(net: &Network, patch: &PatchInstance) -> Result<Vec<f64>> {
    net.check_input(patch.channels, patch.length)?;
    net.forward(&patch.values)
}

/// Softmax predictions for many patches, in order.
pub fn predict_patches(net: &Network, patches: &[PatchInstance]) -> Result<Vec<Vec<f64>>> {
    let mut ws = Workspace::new(net);
    patches
        .iter()
        .map(|p| {
            net.check_input(p.channels, p.length)?;
            net.forward_into(&p.values, &mut ws);
            Ok(ws.probs().to_vec())
        })
        .collect()
}

/// Mean patch cross-entropy over all instances (compensated summation, so
/// the result does not depend on patch order beyond rounding of the mean).
pub fn dataset_loss(net: &Network, patches: &[PatchInstance]) -> Result<f64> {
    if patches.is_empty() {
        return Err(Error::Validation("dataset_loss needs at least one patch".into()));
    }
    let predictions = predict_patches(net, patches)?;
    let losses = predictions
        .iter()
        .zip(patches)
        .map(|(p, patch)| patch_cross_entropy(p, patch.label))
        .collect::<Result<Vec<_>>>()?;
    Ok(compensated_sum(losses) / patches.len() as f64)
}

/// Wraps a tensor of shape `[channels, length]` as a network input.
pub fn forward_tensor(net: &Network, input: &Tensor) -> Result<Vec<f64>> {
    match input.shape() {
        [c, l] => {
            net.check_input(*c, *l)?;
            net.forward(input.data())
        }
        other => Err(Error::dimension("[channels, length]", format!("{other:?}"))),
    }
}
