//! Central finite-difference verification of analytic gradients.

use rand::Rng;
use serde::Serialize;

use super::layers::Layer;
use super::network::{Gradients, Network};
use crate::util::rng;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Step is `step * max(1, |theta|)`.
    pub step: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Denominator floor so that vanishing gradients compare absolutely.
    pub floor: f64,
    pub report_worst: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-6,
            tolerance: 1e-3,
            floor: 1e-6,
            report_worst: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Mismatch {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub passed: bool,
    /// Largest relative errors, worst first.
    pub worst: Vec<Mismatch>,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares two gradient vectors entry by entry.
pub fn compare_gradients(analytic: &[f64], numeric: &[f64], cfg: &GradCheckConfig) -> GradCheckReport {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    let mut all: Vec<Mismatch> = analytic
        .iter()
        .zip(numeric)
        .enumerate()
        .map(|(index, (&a, &n))| Mismatch {
            index,
            analytic: a,
            numeric: n,
            rel_error: relative_error(a, n, cfg.floor),
        })
        .collect();
    all.sort_by(|x, y| y.rel_error.total_cmp(&x.rel_error));
    let max_rel_error = all.first().map_or(0.0, |m| m.rel_error);
    all.truncate(cfg.report_worst);
    GradCheckReport {
        checked: analytic.len(),
        max_rel_error,
        passed: max_rel_error < cfg.tolerance && max_rel_error.is_finite(),
        worst: all,
    }
}

/// Central differences of `f` around `x`, one coordinate at a time.
pub fn numeric_gradient(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Analytic gradient of the mean batch cross-entropy w.r.t. all parameters.
pub fn analytic_network_gradient(net: &Network, batch: &[(Vec<f64>, usize)]) -> Vec<f64> {
    net.batch_gradient(batch.iter().map(|(x, y)| (x.as_slice(), *y)))
        .1
        .flatten()
}

/// Finite-difference check of every network parameter on a labeled batch.
pub fn check_network(net: &Network, batch: &[(Vec<f64>, usize)], cfg: &GradCheckConfig) -> GradCheckReport {
    check_network_with(net, batch, cfg, |_| {})
}

/// Like [`check_network`], with a hook that may tamper with the analytic
/// gradient before comparison.
pub fn check_network_with(
    net: &Network,
    batch: &[(Vec<f64>, usize)],
    cfg: &GradCheckConfig,
    tamper: impl FnOnce(&mut Vec<f64>),
) -> GradCheckReport {
    let mut analytic = analytic_network_gradient(net, batch);
    tamper(&mut analytic);
    let mut probe = net.clone();
    let numeric = numeric_gradient(&net.flat_params(), cfg.step, |p| {
        probe.set_flat_params(p).expect("same parameter count");
        probe.batch_loss(batch.iter().map(|(x, y)| (x.as_slice(), *y)))
    });
    compare_gradients(&analytic, &numeric, cfg)
}

/// Checks one layer in isolation against the scalar `sum(r * output)` for a
/// fixed random projection `r`. Both parameter and input gradients are
/// covered; the returned report concatenates them, parameters first.
pub fn check_layer(layer: &Layer, input: &[f64], seed: u64, cfg: &GradCheckConfig) -> GradCheckReport {
    let mut r = rng(seed);
    let proj: Vec<f64> = (0..layer.output_len()).map(|_| r.random_range(-1.0..1.0)).collect();
    let objective = |l: &Layer, x: &[f64]| {
        let mut out = vec![0.0; l.output_len()];
        l.forward(x, &mut out);
        out.iter().zip(&proj).map(|(a, b)| a * b).sum::<f64>()
    };

    let mut out = vec![0.0; layer.output_len()];
    layer.forward(input, &mut out);
    let mut grad_params = vec![0.0; layer.params().len()];
    let mut grad_in = vec![0.0; input.len()];
    layer.backward(input, &out, &proj, Some(&mut grad_in), &mut grad_params);

    let mut probe = layer.clone();
    let num_params = numeric_gradient(layer.params(), cfg.step, |p| {
        probe.params_mut().copy_from_slice(p);
        objective(&probe, input)
    });
    let num_in = numeric_gradient(input, cfg.step, |x| objective(layer, x));

    let analytic: Vec<f64> = grad_params.into_iter().chain(grad_in).collect();
    let numeric: Vec<f64> = num_params.into_iter().chain(num_in).collect();
    compare_gradients(&analytic, &numeric, cfg)
}

/// Gradient-norm helper used by sanity checks.
pub fn gradient_norm(net: &Network, batch: &[(Vec<f64>, usize)]) -> f64 {
    let (_, g): (f64, Gradients) = net.batch_gradient(batch.iter().map(|(x, y)| (x.as_slice(), *y)));
    g.norm()
}
