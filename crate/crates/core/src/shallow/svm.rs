//! Linear SVM trained by sub-gradient descent on the L2-regularized hinge
//! loss `lambda/2 |w|^2 + mean_i max(0, 1 - y_i (w.x_i + b))` with
//! `lambda = 1 / (C * n)`. Multiclass problems use one-vs-rest.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::util::{argmax, derive_seed, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c_reg: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c_reg: 1.0,
            epochs: 100,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

/// One binary machine; positive scores mean the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl BinaryMachine {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    /// `targets[i]` is +1 or -1. The visiting order is drawn from `seed`
    /// only, so machines trained with the same seed see the same sequence.
    pub fn fit(features: &[Vec<f64>], targets: &[f64], params: &SvmParams) -> Self {
        let dim = features.first().map_or(0, Vec::len);
        let n = features.len();
        let lambda = 1.0 / (params.c_reg * n as f64);
        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        let mut order: Vec<usize> = (0..n).collect();
        let mut r = rng(derive_seed(params.seed, 0x5_u64));
        for epoch in 0..params.epochs {
            order.shuffle(&mut r);
            let eta = params.learning_rate / (1.0 + epoch as f64 / 10.0);
            for &i in &order {
                let (x, y) = (&features[i], targets[i]);
                let margin = y * (b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>());
                let shrink = 1.0 - eta * lambda;
                if margin < 1.0 {
                    for (wj, &xj) in w.iter_mut().zip(x) {
                        *wj = *wj * shrink + eta * y * xj;
                    }
                    b += eta * y;
                } else {
                    for wj in w.iter_mut() {
                        *wj *= shrink;
                    }
                }
            }
        }
        BinaryMachine { weights: w, bias: b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub class_count: usize,
    /// A single machine (class 1 vs class 0) for two classes unless
    /// one-vs-rest was forced, otherwise one machine per class.
    pub machines: Vec<BinaryMachine>,
}

impl LinearSvm {
    pub fn fit(features: &[Vec<f64>], labels: &[usize], class_count: usize, params: &SvmParams) -> Self {
        Self::fit_with(features, labels, class_count, params, false)
    }

    pub fn fit_with(
        features: &[Vec<f64>],
        labels: &[usize],
        class_count: usize,
        params: &SvmParams,
        force_ovr: bool,
    ) -> Self {
        let targets_for =
            |positive: usize| -> Vec<f64> { labels.iter().map(|&l| if l == positive { 1.0 } else { -1.0 }).collect() };
        let machines = if class_count == 2 && !force_ovr {
            vec![BinaryMachine::fit(features, &targets_for(1), params)]
        } else {
            (0..class_count)
                .map(|c| BinaryMachine::fit(features, &targets_for(c), params))
                .collect()
        };
        LinearSvm { class_count, machines }
    }

    /// Per-class decision values.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        if self.machines.len() == 1 {
            let s = self.machines[0].score(x);
            vec![-s, s]
        } else {
            self.machines.iter().map(|m| m.score(x)).collect()
        }
    }

    /// Highest score wins; exact ties go to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }
}
