//! Layer kernels. Activations are channel-major `[channels x length]` buffers.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(crate::Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

/// 1-D convolution with "same" zero padding, so the length is preserved.
/// Parameters are the weights `[out][in][kernel]` followed by `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub length: usize,
    pub params: Vec<f64>,
}

impl Conv1d {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, length: usize) -> Self {
        Conv1d {
            in_channels,
            out_channels,
            kernel,
            length,
            params: vec![0.0; out_channels * in_channels * kernel + out_channels],
        }
    }

    fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel
    }

    fn pad(&self) -> usize {
        (self.kernel - 1) / 2
    }

    /// For kernel tap `kk`, output step `t` reads input step `t + shift`.
    /// Returns the output range for which that read is in bounds.
    #[inline]
    fn tap(&self, kk: usize) -> (isize, usize, usize) {
        let shift = kk as isize - self.pad() as isize;
        let len = self.length as isize;
        let t0 = (-shift).max(0) as usize;
        let t1 = (len - shift).min(len).max(0) as usize;
        (shift, t0, t1.max(t0))
    }

    pub fn forward(&self, input: &[f64], output: &mut [f64]) {
        let l = self.length;
        let (weights, bias) = self.params.split_at(self.weight_count());
        for o in 0..self.out_channels {
            let out = &mut output[o * l..(o + 1) * l];
            out.fill(bias[o]);
            for i in 0..self.in_channels {
                let x = &input[i * l..(i + 1) * l];
                if x.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for kk in 0..self.kernel {
                    let w = weights[(o * self.in_channels + i) * self.kernel + kk];
                    let (shift, t0, t1) = self.tap(kk);
                    let src = &x[(t0 as isize + shift) as usize..(t1 as isize + shift) as usize];
                    for (y, &v) in out[t0..t1].iter_mut().zip(src) {
                        *y += w * v;
                    }
                }
            }
        }
    }

    pub fn backward(&self, input: &[f64], grad_out: &[f64], mut grad_in: Option<&mut [f64]>, grad_params: &mut [f64]) {
        let l = self.length;
        let wc = self.weight_count();
        let weights = &self.params[..wc];
        let (gw, gb) = grad_params.split_at_mut(wc);
        if let Some(gi) = grad_in.as_deref_mut() {
            gi.fill(0.0);
        }
        for o in 0..self.out_channels {
            let g = &grad_out[o * l..(o + 1) * l];
            gb[o] += g.iter().sum::<f64>();
            for i in 0..self.in_channels {
                let x = &input[i * l..(i + 1) * l];
                let x_zero = x.iter().all(|&v| v == 0.0);
                for kk in 0..self.kernel {
                    let widx = (o * self.in_channels + i) * self.kernel + kk;
                    let (shift, t0, t1) = self.tap(kk);
                    let lo = (t0 as isize + shift) as usize;
                    let hi = (t1 as isize + shift) as usize;
                    if !x_zero {
                        let mut acc = 0.0;
                        for (&gv, &xv) in g[t0..t1].iter().zip(&x[lo..hi]) {
                            acc += gv * xv;
                        }
                        gw[widx] += acc;
                    }
                    if let Some(gi) = grad_in.as_deref_mut() {
                        let w = weights[widx];
                        for (d, &gv) in gi[i * l + lo..i * l + hi].iter_mut().zip(&g[t0..t1]) {
                            *d += w * gv;
                        }
                    }
                }
            }
        }
    }
}

/// Elementwise nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationLayer {
    pub kind: Activation,
    pub size: usize,
}

impl ActivationLayer {
    pub fn forward(&self, input: &[f64], output: &mut [f64]) {
        match self.kind {
            Activation::Relu => {
                for (y, &x) in output.iter_mut().zip(input) {
                    *y = x.max(0.0);
                }
            }
            Activation::Tanh => {
                for (y, &x) in output.iter_mut().zip(input) {
                    *y = x.tanh();
                }
            }
            Activation::Identity => output.copy_from_slice(input),
        }
    }

    pub fn backward(&self, output: &[f64], grad_out: &[f64], grad_in: &mut [f64]) {
        match self.kind {
            Activation::Relu => {
                for ((d, &g), &y) in grad_in.iter_mut().zip(grad_out).zip(output) {
                    *d = if y > 0.0 { g } else { 0.0 };
                }
            }
            Activation::Tanh => {
                for ((d, &g), &y) in grad_in.iter_mut().zip(grad_out).zip(output) {
                    *d = g * (1.0 - y * y);
                }
            }
            Activation::Identity => grad_in.copy_from_slice(grad_out),
        }
    }
}

/// Mean over time per channel: `[channels x length] -> [channels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalAvgPool {
    pub channels: usize,
    pub length: usize,
}

impl GlobalAvgPool {
    pub fn forward(&self, input: &[f64], output: &mut [f64]) {
        let inv = 1.0 / self.length as f64;
        for (c, y) in output.iter_mut().enumerate() {
            *y = input[c * self.length..(c + 1) * self.length].iter().sum::<f64>() * inv;
        }
    }

    pub fn backward(&self, grad_out: &[f64], grad_in: &mut [f64]) {
        let inv = 1.0 / self.length as f64;
        for (c, &g) in grad_out.iter().enumerate() {
            grad_in[c * self.length..(c + 1) * self.length].fill(g * inv);
        }
    }
}

/// Fully connected layer; parameters are `W[out][in]` then `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub params: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            params: vec![0.0; inputs * outputs + outputs],
        }
    }

    pub fn forward(&self, input: &[f64], output: &mut [f64]) {
        let (w, b) = self.params.split_at(self.inputs * self.outputs);
        for (o, y) in output.iter_mut().enumerate() {
            let row = &w[o * self.inputs..(o + 1) * self.inputs];
            *y = b[o] + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>();
        }
    }

    pub fn backward(&self, input: &[f64], grad_out: &[f64], grad_in: Option<&mut [f64]>, grad_params: &mut [f64]) {
        let n = self.inputs * self.outputs;
        let (gw, gb) = grad_params.split_at_mut(n);
        for (o, &g) in grad_out.iter().enumerate() {
            gb[o] += g;
            for (d, &x) in gw[o * self.inputs..(o + 1) * self.inputs].iter_mut().zip(input) {
                *d += g * x;
            }
        }
        if let Some(gi) = grad_in {
            let w = &self.params[..n];
            gi.fill(0.0);
            for (o, &g) in grad_out.iter().enumerate() {
                for (d, &a) in gi.iter_mut().zip(&w[o * self.inputs..(o + 1) * self.inputs]) {
                    *d += g * a;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv1d(Conv1d),
    Activation(ActivationLayer),
    GlobalAvgPool(GlobalAvgPool),
    Dense(Dense),
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv1d(_) => "conv1d",
            Layer::Activation(a) => match a.kind {
                Activation::Relu => "relu",
                Activation::Tanh => "tanh",
                Activation::Identity => "identity",
            },
            Layer::GlobalAvgPool(_) => "global_avg_pool",
            Layer::Dense(_) => "dense",
        }
    }

    pub fn input_len(&self) -> usize {
        match self {
            Layer::Conv1d(c) => c.in_channels * c.length,
            Layer::Activation(a) => a.size,
            Layer::GlobalAvgPool(p) => p.channels * p.length,
            Layer::Dense(d) => d.inputs,
        }
    }

    pub fn output_len(&self) -> usize {
        match self {
            Layer::Conv1d(c) => c.out_channels * c.length,
            Layer::Activation(a) => a.size,
            Layer::GlobalAvgPool(p) => p.channels,
            Layer::Dense(d) => d.outputs,
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Layer::Conv1d(c) => &c.params,
            Layer::Dense(d) => &d.params,
            _ => &[],
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Layer::Conv1d(c) => &mut c.params,
            Layer::Dense(d) => &mut d.params,
            _ => &mut [],
        }
    }

    pub fn forward(&self, input: &[f64], output: &mut [f64]) {
        match self {
            Layer::Conv1d(c) => c.forward(input, output),
            Layer::Activation(a) => a.forward(input, output),
            Layer::GlobalAvgPool(p) => p.forward(input, output),
            Layer::Dense(d) => d.forward(input, output),
        }
    }

    /// Accumulates parameter gradients into `grad_params` and overwrites
    /// `grad_in` (when requested) with the gradient w.r.t. the input.
    pub fn backward(
        &self,
        input: &[f64],
        output: &[f64],
        grad_out: &[f64],
        grad_in: Option<&mut [f64]>,
        grad_params: &mut [f64],
    ) {
        match self {
            Layer::Conv1d(c) => c.backward(input, grad_out, grad_in, grad_params),
            Layer::Dense(d) => d.backward(input, grad_out, grad_in, grad_params),
            Layer::Activation(a) => {
                if let Some(gi) = grad_in {
                    a.backward(output, grad_out, gi);
                }
            }
            Layer::GlobalAvgPool(p) => {
                if let Some(gi) = grad_in {
                    p.backward(grad_out, gi);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct definition of a same-padded correlation.
    fn naive_conv(c: &Conv1d, x: &[f64]) -> Vec<f64> {
        let pad = (c.kernel - 1) / 2;
        let l = c.length as isize;
        let mut out = vec![0.0; c.out_channels * c.length];
        for o in 0..c.out_channels {
            for t in 0..c.length {
                let mut acc = c.params[c.out_channels * c.in_channels * c.kernel + o];
                for i in 0..c.in_channels {
                    for k in 0..c.kernel {
                        let src = t as isize + k as isize - pad as isize;
                        if src >= 0 && src < l {
                            acc += c.params[(o * c.in_channels + i) * c.kernel + k] * x[i * c.length + src as usize];
                        }
                    }
                }
                out[o * c.length + t] = acc;
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive_definition() {
        for kernel in [1, 2, 3, 4, 5] {
            let mut c = Conv1d::new(2, 3, kernel, 7);
            for (i, p) in c.params.iter_mut().enumerate() {
                *p = ((i * 7919) % 13) as f64 / 13.0 - 0.5;
            }
            let x: Vec<f64> = (0..14).map(|i| (i as f64 * 0.37).sin()).collect();
            let mut out = vec![0.0; 21];
            c.forward(&x, &mut out);
            let expect = naive_conv(&c, &x);
            for (a, b) in out.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12, "kernel {kernel}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn pool_and_dense_shapes() {
        let p = GlobalAvgPool { channels: 2, length: 3 };
        let mut out = [0.0; 2];
        p.forward(&[1.0, 2.0, 3.0, 4.0, 4.0, 4.0], &mut out);
        assert_eq!(out, [2.0, 4.0]);
        let mut d = Dense::new(2, 1);
        d.params.copy_from_slice(&[1.0, -1.0, 0.5]);
        let mut y = [0.0];
        d.forward(&out, &mut y);
        assert_eq!(y, [-1.5]);
    }
}
