//! Fully-connected feed-forward network: input -> 16 -> 16 -> 1.
//!
//! Hidden units are ReLU. The output unit is sigmoid with binary
//! cross-entropy loss in classification mode and ReLU with squared loss in
//! regression mode. Training is full-batch gradient descent, deterministic
//! for a fixed seed.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

use super::{TaskMode, TrainConfig};

pub const HIDDEN_SIZE: usize = 16;

/// Weight scale for initialization. Kept independent of the input width so
/// that models trained on matrices differing only by all-zero columns
/// produce identical scores.
const INIT_SCALE: f64 = 0.2;

/// One dense layer; `weights[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn zeros_like(&self) -> DenseLayer {
        DenseLayer {
            weights: self.weights.iter().map(|r| vec![0.0; r.len()]).collect(),
            biases: vec![0.0; self.biases.len()],
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.biases.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone)]
pub struct NeuralNet {
    pub layers: Vec<DenseLayer>,
    pub mode: TaskMode,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl NeuralNet {
    /// Seeded initialization. Each (layer, unit) draws its row from its own
    /// derived stream, so widening the input only appends draws.
    pub fn init(n_inputs: usize, mode: TaskMode, net_seed: u64, output_bias: f64) -> Self {
        let dims = [n_inputs, HIDDEN_SIZE, HIDDEN_SIZE, 1];
        let mut layers = Vec::with_capacity(3);
        for layer_idx in 0..3 {
            let (fan_in, fan_out) = (dims[layer_idx], dims[layer_idx + 1]);
            let mut weights = Vec::with_capacity(fan_out);
            for row in 0..fan_out {
                let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(
                    net_seed,
                    &[layer_idx as u64, row as u64],
                ));
                weights.push((0..fan_in).map(|_| rng.gen_range(-INIT_SCALE..INIT_SCALE)).collect());
            }
            let mut biases = vec![0.0; fan_out];
            if layer_idx == 2 {
                biases[0] = output_bias;
            }
            layers.push(DenseLayer { weights, biases });
        }
        NeuralNet { layers, mode }
    }

    pub fn from_layers(layers: Vec<DenseLayer>, mode: TaskMode) -> Result<Self> {
        if layers.len() != 3 {
            return Err(Error::Invalid(format!(
                "network needs 3 layers, got {}",
                layers.len()
            )));
        }
        Ok(NeuralNet { layers, mode })
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_inputs()
    }

    /// Pre-activations and activations per layer for one batch.
    fn forward_full(&self, x: &Array2<f64>) -> Vec<(Array2<f64>, Array2<f64>)> {
        let mut activations = x.clone();
        let mut stages = Vec::with_capacity(3);
        for (idx, layer) in self.layers.iter().enumerate() {
            let n = activations.nrows();
            let out_dim = layer.n_outputs();
            let mut z = Array2::<f64>::zeros((n, out_dim));
            for i in 0..n {
                for (o, row) in layer.weights.iter().enumerate() {
                    let mut acc = layer.biases[o];
                    for (k, w) in row.iter().enumerate() {
                        acc += w * activations[[i, k]];
                    }
                    z[[i, o]] = acc;
                }
            }
            let a = if idx < 2 {
                z.mapv(|v| v.max(0.0))
            } else {
                match self.mode {
                    TaskMode::Classification => z.mapv(sigmoid),
                    TaskMode::Regression => z.mapv(|v| v.max(0.0)),
                }
            };
            stages.push((z, a.clone()));
            activations = a;
        }
        stages
    }

    /// Network output for each row of `x`.
    pub fn predict(&self, x: &Array2<f64>) -> Array1<f64> {
        let stages = self.forward_full(x);
        stages.last().unwrap().1.column(0).to_owned()
    }

    /// Smallest |pre-activation| over every ReLU unit and batch row (the
    /// output unit included in regression mode). Finite-difference
    /// gradient checks are only valid when this margin comfortably
    /// exceeds the probe step, since the loss is non-differentiable at
    /// ReLU kinks.
    pub fn kink_margin(&self, x: &Array2<f64>) -> f64 {
        let stages = self.forward_full(x);
        let mut margin = f64::INFINITY;
        for (idx, (z, _)) in stages.iter().enumerate() {
            let is_relu = idx < 2 || self.mode == TaskMode::Regression;
            if !is_relu {
                continue;
            }
            for v in z {
                margin = margin.min(v.abs());
            }
        }
        margin
    }

    /// Mean loss over the batch: binary cross-entropy (classification) or
    /// squared error (regression).
    pub fn loss(&self, x: &Array2<f64>, y: &Array1<f64>) -> f64 {
        let out = self.predict(x);
        let n = x.nrows() as f64;
        match self.mode {
            TaskMode::Classification => {
                out.iter()
                    .zip(y.iter())
                    .map(|(&p, &t)| {
                        let p = p.clamp(1e-12, 1.0 - 1e-12);
                        -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
                    })
                    .sum::<f64>()
                    / n
            }
            TaskMode::Regression => {
                out.iter().zip(y.iter()).map(|(&p, &t)| (p - t) * (p - t)).sum::<f64>() / n
            }
        }
    }

    /// Analytic gradients of the batch loss for every layer.
    pub fn gradients(&self, x: &Array2<f64>, y: &Array1<f64>) -> Vec<DenseLayer> {
        let n = x.nrows();
        let stages = self.forward_full(x);
        let mut grads: Vec<DenseLayer> = self.layers.iter().map(DenseLayer::zeros_like).collect();

        // delta at the output pre-activation
        let (z_out, a_out) = &stages[2];
        let mut delta = Array2::<f64>::zeros((n, 1));
        for i in 0..n {
            delta[[i, 0]] = match self.mode {
                // BCE through sigmoid: (p - y) / N
                TaskMode::Classification => (a_out[[i, 0]] - y[i]) / n as f64,
                // squared loss through ReLU
                TaskMode::Regression => {
                    if z_out[[i, 0]] > 0.0 {
                        2.0 * (a_out[[i, 0]] - y[i]) / n as f64
                    } else {
                        0.0
                    }
                }
            };
        }

        for layer_idx in (0..3).rev() {
            let inputs: &Array2<f64> = if layer_idx == 0 { x } else { &stages[layer_idx - 1].1 };
            let g = &mut grads[layer_idx];
            for i in 0..n {
                for o in 0..delta.ncols() {
                    let d = delta[[i, o]];
                    if d == 0.0 {
                        continue;
                    }
                    g.biases[o] += d;
                    for k in 0..inputs.ncols() {
                        g.weights[o][k] += d * inputs[[i, k]];
                    }
                }
            }
            if layer_idx == 0 {
                break;
            }
            // propagate through the previous ReLU
            let z_prev = &stages[layer_idx - 1].0;
            let mut next = Array2::<f64>::zeros((n, z_prev.ncols()));
            for i in 0..n {
                for k in 0..z_prev.ncols() {
                    if z_prev[[i, k]] <= 0.0 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for o in 0..delta.ncols() {
                        acc += delta[[i, o]] * self.layers[layer_idx].weights[o][k];
                    }
                    next[[i, k]] = acc;
                }
            }
            delta = next;
        }
        grads
    }
}

/// Full-batch gradient descent; returns the trained network and the loss
/// recorded after every epoch.
pub fn train_network(
    x: &Array2<f64>,
    y: &Array1<f64>,
    mode: TaskMode,
    cfg: &TrainConfig,
) -> Result<(NeuralNet, Vec<f64>)> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "{} rows vs {} targets",
            x.nrows(),
            y.len()
        )));
    }
    let output_bias = match mode {
        TaskMode::Classification => 0.0,
        // start the ReLU output in its active region
        TaskMode::Regression => y.sum() / y.len() as f64,
    };
    let mut net = NeuralNet::init(x.ncols(), mode, cfg.seed, output_bias);
    let mut losses = Vec::with_capacity(cfg.max_epochs);
    for epoch in 0..cfg.max_epochs {
        let lr = cfg.learning_rate / (1.0 + cfg.lr_decay * epoch as f64);
        let grads = net.gradients(x, y);
        for (layer, g) in net.layers.iter_mut().zip(&grads) {
            for (row, grow) in layer.weights.iter_mut().zip(&g.weights) {
                for (w, gw) in row.iter_mut().zip(grow) {
                    *w -= lr * gw;
                }
            }
            for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= lr * gb;
            }
        }
        let loss = net.loss(x, y);
        if !loss.is_finite() {
            return Err(Error::Numerical {
                iteration: epoch + 1,
                message: "network loss became non-finite".into(),
            });
        }
        losses.push(loss);
    }
    Ok((net, losses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn random_batch(seed: u64, n: usize, d: usize, mode: TaskMode) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.5..1.5));
        let y = match mode {
            TaskMode::Classification => {
                Array1::from_shape_fn(n, |_| if rng.gen_range(0.0..1.0) < 0.5 { 0.0 } else { 1.0 })
            }
            TaskMode::Regression => Array1::from_shape_fn(n, |_| rng.gen_range(1.0..7.0)),
        };
        (x, y)
    }

    /// Central finite differences over every parameter of the network.
    pub(crate) fn finite_difference_check(
        net: &NeuralNet,
        x: &Array2<f64>,
        y: &Array1<f64>,
    ) -> f64 {
        let grads = net.gradients(x, y);
        let h = 1e-5;
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for l in 0..net.layers.len() {
            for o in 0..net.layers[l].n_outputs() {
                for k in 0..net.layers[l].n_inputs() {
                    analytic.push(grads[l].weights[o][k]);
                    let mut plus = net.clone();
                    plus.layers[l].weights[o][k] += h;
                    let mut minus = net.clone();
                    minus.layers[l].weights[o][k] -= h;
                    numeric.push((plus.loss(x, y) - minus.loss(x, y)) / (2.0 * h));
                }
                analytic.push(grads[l].biases[o]);
                let mut plus = net.clone();
                plus.layers[l].biases[o] += h;
                let mut minus = net.clone();
                minus.layers[l].biases[o] -= h;
                numeric.push((plus.loss(x, y) - minus.loss(x, y)) / (2.0 * h));
            }
        }
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = analytic
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(numeric.iter().map(|v| v * v).sum::<f64>().sqrt())
            .max(1e-12);
        diff / scale
    }

    #[test]
    fn gradients_match_finite_differences_at_init() {
        for (seed, mode) in [
            (1, TaskMode::Classification),
            (2, TaskMode::Classification),
            (3, TaskMode::Regression),
            (4, TaskMode::Regression),
            (5, TaskMode::Classification),
        ] {
            let (x, y) = random_batch(seed, 6, 4, mode);
            let bias = if mode == TaskMode::Regression { y.sum() / y.len() as f64 } else { 0.0 };
            let net = NeuralNet::init(4, mode, seed, bias);
            let err = finite_difference_check(&net, &x, &y);
            assert!(err <= 1e-3, "seed {seed}: gradient error {err}");
        }
    }

    #[test]
    fn gradients_match_finite_differences_after_training() {
        let (x, y) = random_batch(11, 8, 3, TaskMode::Classification);
        let cfg = TrainConfig {
            max_epochs: 10,
            learning_rate: 0.1,
            seed: 11,
            ..Default::default()
        };
        let (net, _) = train_network(&x, &y, TaskMode::Classification, &cfg).unwrap();
        let err = finite_difference_check(&net, &x, &y);
        assert!(err <= 1e-3, "gradient error {err}");
    }

    #[test]
    fn constant_labels_drive_predictions_up() {
        let (x, _) = random_batch(21, 12, 3, TaskMode::Classification);
        let y = Array1::ones(12);
        let cfg = TrainConfig {
            max_epochs: 400,
            learning_rate: 0.05,
            lr_decay: 0.0,
            seed: 21,
            ..Default::default()
        };
        let (net, losses) = train_network(&x, &y, TaskMode::Classification, &cfg).unwrap();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss increased: {} -> {}", w[0], w[1]);
        }
        assert!(net.predict(&x).iter().all(|&p| p >= 0.9));
    }

    #[test]
    fn xor_is_learned_exactly() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = array![0.0, 1.0, 1.0, 0.0];
        let cfg = TrainConfig {
            max_epochs: 6000,
            learning_rate: 0.5,
            lr_decay: 0.0,
            seed: 7,
            ..Default::default()
        };
        let (net, _) = train_network(&x, &y, TaskMode::Classification, &cfg).unwrap();
        let out = net.predict(&x);
        for (p, t) in out.iter().zip(y.iter()) {
            assert_eq!((p >= &0.5) as i32 as f64, *t, "prediction {p} for label {t}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = random_batch(31, 10, 4, TaskMode::Regression);
        let cfg = TrainConfig {
            max_epochs: 50,
            seed: 31,
            ..Default::default()
        };
        let (n1, l1) = train_network(&x, &y, TaskMode::Regression, &cfg).unwrap();
        let (n2, l2) = train_network(&x, &y, TaskMode::Regression, &cfg).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(n1.layers, n2.layers);
    }
}
