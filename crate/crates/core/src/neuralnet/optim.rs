use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" | "sgd-momentum" | "sgd_momentum" => Ok(OptimizerKind::SgdMomentum),
            other => Err(crate::Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

const MOMENTUM: f64 = 0.9;
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Optimizer state shaped like the network parameters.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    first: Gradients,
    second: Gradients,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, net: &Network) -> Self {
        Optimizer {
            kind,
            lr,
            step: 0,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) {
        self.step += 1;
        match self.kind {
            OptimizerKind::SgdMomentum => {
                for ((layer, g), vel) in net.layers.iter_mut().zip(&grads.0).zip(&mut self.first.0) {
                    for ((p, &gi), v) in layer.params_mut().iter_mut().zip(g).zip(vel.iter_mut()) {
                        *v = MOMENTUM * *v - self.lr * gi;
                        *p += *v;
                    }
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - BETA1.powi(self.step);
                let c2 = 1.0 - BETA2.powi(self.step);
                for (((layer, g), m), v) in net
                    .layers
                    .iter_mut()
                    .zip(&grads.0)
                    .zip(&mut self.first.0)
                    .zip(&mut self.second.0)
                {
                    for (((p, &gi), mi), vi) in layer.params_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut())
                    {
                        *mi = BETA1 * *mi + (1.0 - BETA1) * gi;
                        *vi = BETA2 * *vi + (1.0 - BETA2) * gi * gi;
                        *p -= self.lr * (*mi / c1) / ((*vi / c2).sqrt() + EPS);
                    }
                }
            }
        }
    }
}
