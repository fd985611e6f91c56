//! Fully connected regressor: ReLU hidden stack, linear scalar output,
//! squared-error loss, Adam, inverted dropout on the last hidden layer.
//!
//! Targets are z-scored internally (an affine map stored with the model), so
//! predictions come back in the original units.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    pub dropout_before_output: f64,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
}

impl Default for MlpSpec {
    fn default() -> Self {
        MlpSpec {
            hidden_sizes: vec![32, 64, 128, 128, 128, 128],
            activation: Activation::Relu,
            dropout_before_output: 0.2,
            epochs: 300,
            batch: 128,
            learning_rate: 0.001,
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Row-major `fan_out x fan_in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    /// Uniform in ±sqrt(6 / fan_in), zero bias.
    fn init(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / fan_in as f64).sqrt();
        DenseLayer {
            fan_in,
            fan_out,
            weights: (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect(),
            bias: vec![0.0; fan_out],
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(o, b)| {
            let row = &self.weights[o * self.fan_in..(o + 1) * self.fan_in];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

/// Gradients with the same layout as the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    fn zeros(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub layers: Vec<DenseLayer>,
    pub target_mean: f64,
    pub target_scale: f64,
    pub optimizer: String,
}

impl Mlp {
    pub fn init(n_inputs: usize, spec: MlpSpec, rng: &mut impl Rng) -> Mlp {
        let mut widths = vec![n_inputs];
        widths.extend(&spec.hidden_sizes);
        widths.push(1);
        let layers = widths
            .windows(2)
            .map(|w| DenseLayer::init(w[0], w[1], rng))
            .collect();
        Mlp {
            spec,
            layers,
            target_mean: 0.0,
            target_scale: 1.0,
            optimizer: "adam".into(),
        }
    }

    /// `[inputs, hidden..., 1]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].fan_in];
        w.extend(self.layers.iter().map(|l| l.fan_out));
        w
    }

    /// Network output in the internal (scaled) target units; no dropout.
    pub fn output(&self, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[0]
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.output(x) * self.target_scale + self.target_mean
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, p: &[f64]) {
        let mut it = p.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| {
                *v = it.next().expect("parameter count");
            });
        }
    }

    /// Mean squared error over the batch and its gradient. `masks`, when
    /// given, scale the last hidden layer's activations per sample.
    pub fn loss_and_grad(
        &self,
        xs: &[&[f64]],
        targets: &[f64],
        masks: Option<&[Vec<f64>]>,
    ) -> (f64, Gradients) {
        let mut grads = Gradients::zeros(self);
        let n = xs.len() as f64;
        let last = self.layers.len() - 1;
        let mut loss = 0.0;
        let mut acts: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len() + 1];
        let mut delta = Vec::new();
        let mut prev_delta = Vec::new();
        for (s, (x, &t)) in xs.iter().zip(targets).enumerate() {
            acts[0].clear();
            acts[0].extend_from_slice(x);
            for (i, layer) in self.layers.iter().enumerate() {
                let (lo, hi) = acts.split_at_mut(i + 1);
                layer.forward(&lo[i], &mut hi[0]);
                if i < last {
                    hi[0].iter_mut().for_each(|v| *v = v.max(0.0));
                    if i == last - 1 {
                        if let Some(m) = masks {
                            hi[0].iter_mut().zip(&m[s]).for_each(|(v, k)| *v *= k);
                        }
                    }
                }
            }
            let err = acts[last + 1][0] - t;
            loss += err * err / n;
            delta.clear();
            delta.push(2.0 * err / n);
            for i in (0..=last).rev() {
                let layer = &self.layers[i];
                let input = &acts[i];
                let (gw, gb) = &mut grads.layers[i];
                for o in 0..layer.fan_out {
                    let d = delta[o];
                    gb[o] += d;
                    if d != 0.0 {
                        let row = &mut gw[o * layer.fan_in..(o + 1) * layer.fan_in];
                        row.iter_mut().zip(input).for_each(|(g, a)| *g += d * a);
                    }
                }
                if i == 0 {
                    break;
                }
                prev_delta.clear();
                prev_delta.resize(layer.fan_in, 0.0);
                for (&d, row) in delta.iter().zip(layer.weights.chunks_exact(layer.fan_in)) {
                    if d != 0.0 {
                        prev_delta
                            .iter_mut()
                            .zip(row)
                            .for_each(|(p, w)| *p += d * w);
                    }
                }
                // back through dropout mask and ReLU of layer i-1's output
                let mask = if i - 1 == last - 1 {
                    masks.map(|m| &m[s])
                } else {
                    None
                };
                for (j, p) in prev_delta.iter_mut().enumerate() {
                    if input[j] <= 0.0 {
                        *p = 0.0;
                    } else if let Some(m) = mask {
                        *p *= m[j];
                    }
                }
                std::mem::swap(&mut delta, &mut prev_delta);
            }
        }
        (loss, grads)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, net: &mut Mlp, grads: &Gradients, lr: f64) {
        self.t += 1;
        let b1t = 1.0 - ADAM_BETA1.powi(self.t);
        let b2t = 1.0 - ADAM_BETA2.powi(self.t);
        let mut k = 0;
        for (layer, (gw, gb)) in net.layers.iter_mut().zip(&grads.layers) {
            for (p, g) in layer
                .weights
                .iter_mut()
                .chain(layer.bias.iter_mut())
                .zip(gw.iter().chain(gb.iter()))
            {
                self.m[k] = ADAM_BETA1 * self.m[k] + (1.0 - ADAM_BETA1) * g;
                self.v[k] = ADAM_BETA2 * self.v[k] + (1.0 - ADAM_BETA2) * g * g;
                let mh = self.m[k] / b1t;
                let vh = self.v[k] / b2t;
                *p -= lr * mh / (vh.sqrt() + ADAM_EPS);
                k += 1;
            }
        }
    }
}

/// Trains on (already standardized) inputs. Deterministic under `seed`.
pub fn fit_mlp(x: &[Vec<f64>], y: &[f64], spec: MlpSpec, seed: u64) -> Result<Mlp> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mlp input"));
    }
    if !(0.0..1.0).contains(&spec.dropout_before_output) || spec.batch == 0 {
        return Err(Error::InvalidConfig(vec![
            "mlp dropout must be in [0, 1) and batch >= 1".into(),
        ]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::init(x[0].len(), spec.clone(), &mut rng);
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let std = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    net.target_mean = mean;
    net.target_scale = if std > 1e-12 { std } else { 1.0 };
    let scaled: Vec<f64> = y.iter().map(|v| (v - mean) / net.target_scale).collect();

    let n_params = net.flat_params().len();
    let mut adam = Adam {
        m: vec![0.0; n_params],
        v: vec![0.0; n_params],
        t: 0,
    };
    let keep = 1.0 - spec.dropout_before_output;
    let last_hidden = *spec.hidden_sizes.last().unwrap_or(&0);
    let mut order: Vec<usize> = (0..y.len()).collect();
    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(spec.batch) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| x[i].as_slice()).collect();
            let ts: Vec<f64> = chunk.iter().map(|&i| scaled[i]).collect();
            let masks: Option<Vec<Vec<f64>>> =
                (spec.dropout_before_output > 0.0 && !spec.hidden_sizes.is_empty()).then(|| {
                    chunk
                        .iter()
                        .map(|_| {
                            (0..last_hidden)
                                .map(|_| {
                                    if rng.random::<f64>() < keep {
                                        1.0 / keep
                                    } else {
                                        0.0
                                    }
                                })
                                .collect()
                        })
                        .collect()
                });
            let (_, grads) = net.loss_and_grad(&xs, &ts, masks.as_deref());
            adam.step(&mut net, &grads, spec.learning_rate);
        }
    }
    Ok(net)
}
