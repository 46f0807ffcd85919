//! From-scratch predictors of per-pattern meaningfulness: an L1-penalized
//! sigmoid-squared-loss linear model, a max-margin linear model, linear
//! discriminant analysis, and a small feed-forward network, each usable for
//! classification (binary labels) and regression (raw 1..7 ratings).
//!
//! All optimizers are full-batch and deterministic for a fixed seed; the
//! dataset is hundreds of rows, so reproducibility outweighs speed.

mod net;

pub use net::{train_network, DenseLayer, NeuralNet, HIDDEN_SIZE};

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sufficient-decrease constant for the proximal line search.
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
/// Coefficients with magnitude above this count as nonzero (weight
/// analysis, sparsity checks).
pub const NONZERO_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lasso,
    MaxMargin,
    Lda,
    NeuralNet,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Lasso,
        ModelKind::MaxMargin,
        ModelKind::Lda,
        ModelKind::NeuralNet,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Lasso => "lasso",
            ModelKind::MaxMargin => "max_margin",
            ModelKind::Lda => "lda",
            ModelKind::NeuralNet => "neural_net",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lasso" => Some(ModelKind::Lasso),
            "max_margin" => Some(ModelKind::MaxMargin),
            "lda" => Some(ModelKind::Lda),
            "neural_net" => Some(ModelKind::NeuralNet),
            _ => None,
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, ModelKind::NeuralNet)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    Classification,
    Regression,
}

impl TaskMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskMode::Classification => "classification",
            TaskMode::Regression => "regression",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "classification" => Some(TaskMode::Classification),
            "regression" => Some(TaskMode::Regression),
            _ => None,
        }
    }
}

/// Training hyperparameters shared by all model kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// L1 weight for the lasso. `None` means "select by cross-validation"
    /// (resolved by the caller; see `eval::select_lasso_lambda`).
    pub lasso_lambda: Option<f64>,
    /// Margin penalty: the ridge term is `1/(2C) ||beta||^2`.
    pub margin_c: f64,
    /// Insensitive-loss width for max-margin regression.
    pub epsilon: f64,
    pub learning_rate: f64,
    /// Step decay: `lr_t = learning_rate / (1 + lr_decay * t)`.
    pub lr_decay: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lasso_lambda: None,
            margin_c: 1.0,
            epsilon: 0.1,
            learning_rate: 0.1,
            lr_decay: 0.0,
            max_epochs: 500,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lasso_lambda {
            if !(l > 0.0) {
                return Err(Error::Invalid("lasso lambda must be positive".into()));
            }
        }
        for (name, v) in [
            ("margin_c", self.margin_c),
            ("epsilon", self.epsilon),
            ("learning_rate", self.learning_rate),
        ] {
            if !(v > 0.0) {
                return Err(Error::Invalid(format!("{name} must be positive")));
            }
        }
        if self.lr_decay < 0.0 {
            return Err(Error::Invalid("lr_decay must be nonnegative".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Invalid("max_epochs must be >= 1".into()));
        }
        Ok(())
    }

    /// The lasso L1 weight, falling back to the documented default when no
    /// explicit value or cross-validated choice was supplied.
    pub fn lasso_lambda_or_default(&self) -> f64 {
        self.lasso_lambda.unwrap_or(0.01)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ModelParams {
    Linear { coefficients: Vec<f64>, intercept: f64 },
    Network { layers: Vec<DenseLayer> },
}

/// A trained predictor plus everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub kind: ModelKind,
    pub mode: TaskMode,
    pub params: ModelParams,
    pub hyperparameters: TrainConfig,
    pub seed: u64,
    /// Digest of the feature-column manifest the model was trained on;
    /// guards against train/test schema drift.
    pub columns_digest: Option<u64>,
}

impl ModelWeights {
    pub fn coefficients(&self) -> Option<&[f64]> {
        match &self.params {
            ModelParams::Linear { coefficients, .. } => Some(coefficients),
            ModelParams::Network { .. } => None,
        }
    }

    pub fn n_features(&self) -> usize {
        match &self.params {
            ModelParams::Linear { coefficients, .. } => coefficients.len(),
            ModelParams::Network { layers } => layers[0].n_inputs(),
        }
    }

    pub fn nonzero_count(&self) -> usize {
        self.coefficients()
            .map(|c| c.iter().filter(|v| v.abs() > NONZERO_EPS).count())
            .unwrap_or(0)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("model serializes");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, 1, e.to_string()))
    }
}

fn check_xy(x: &ArrayView2<f64>, y: &Array1<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "{} rows vs {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::Invalid("cannot fit on an empty dataset".into()));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("training data has a non-finite value".into()));
    }
    Ok(())
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn xbeta(x: &ArrayView2<f64>, beta: &Array1<f64>, intercept: f64) -> Array1<f64> {
    let mut z = x.dot(beta);
    z.mapv_inplace(|v| v + intercept);
    z
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Smooth part of the lasso objective and its gradient.
///
/// Classification: `(1/N) * ||y - sigmoid(X beta + b)||^2` (squared error on
/// the sigmoid output). Regression drops the sigmoid.
fn lasso_smooth(
    x: &ArrayView2<f64>,
    y: &Array1<f64>,
    beta: &Array1<f64>,
    intercept: f64,
    mode: TaskMode,
) -> (f64, Array1<f64>, f64) {
    let n = x.nrows() as f64;
    let z = xbeta(x, beta, intercept);
    let mut dz = Array1::<f64>::zeros(y.len());
    let mut loss = 0.0;
    for i in 0..y.len() {
        match mode {
            TaskMode::Classification => {
                let p = sigmoid(z[i]);
                let r = y[i] - p;
                loss += r * r;
                dz[i] = -2.0 * r * p * (1.0 - p) / n;
            }
            TaskMode::Regression => {
                let r = z[i] - y[i];
                loss += r * r;
                dz[i] = 2.0 * r / n;
            }
        }
    }
    let grad_beta = x.t().dot(&dz);
    let grad_intercept = dz.sum();
    (loss / n, grad_beta, grad_intercept)
}

/// Proximal-gradient LASSO (Eq-style sigmoid squared loss in classification
/// mode, plain squared loss in regression mode), soft-thresholding the
/// coefficients after every gradient step. The intercept is unpenalized and
/// initialized at its optimum for the zero coefficient vector.
pub fn fit_lasso(
    x: &ArrayView2<f64>,
    y: &Array1<f64>,
    mode: TaskMode,
    cfg: &TrainConfig,
) -> Result<ModelWeights> {
    check_xy(x, y)?;
    cfg.validate()?;
    let lambda = cfg.lasso_lambda_or_default();
    let d = x.ncols();
    let n = x.nrows() as f64;
    let y_mean = y.sum() / n;

    let mut beta = Array1::<f64>::zeros(d);
    let mut intercept = match mode {
        TaskMode::Classification => {
            let p = y_mean.clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
        TaskMode::Regression => y_mean,
    };

    let (mut smooth, mut grad_beta, mut grad_b) = lasso_smooth(x, y, &beta, intercept, mode);
    let mut objective = smooth + lambda * beta.iter().map(|v| v.abs()).sum::<f64>();
    let mut step = 1.0;
    for epoch in 0..cfg.max_epochs {
        let mut accepted = false;
        loop {
            let trial_beta =
                Array1::from_shape_fn(d, |j| soft_threshold(beta[j] - step * grad_beta[j], step * lambda));
            let trial_b = intercept - step * grad_b;
            let dist: f64 = trial_beta
                .iter()
                .zip(beta.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                + (trial_b - intercept) * (trial_b - intercept);
            if dist == 0.0 {
                break;
            }
            let (trial_smooth, tg_beta, tg_b) = lasso_smooth(x, y, &trial_beta, trial_b, mode);
            let trial_objective =
                trial_smooth + lambda * trial_beta.iter().map(|v| v.abs()).sum::<f64>();
            if trial_objective <= objective - ARMIJO * dist / step {
                beta = trial_beta;
                intercept = trial_b;
                smooth = trial_smooth;
                grad_beta = tg_beta;
                grad_b = tg_b;
                let previous = objective;
                objective = trial_objective;
                accepted = true;
                if !objective.is_finite() {
                    return Err(Error::Numerical {
                        iteration: epoch + 1,
                        message: "lasso objective became non-finite".into(),
                    });
                }
                // modest growth so the search adapts in both directions
                step = (step * 1.5).min(1e6);
                if previous - objective <= 1e-12 * previous.max(1.0) {
                    accepted = false; // converged
                }
                break;
            }
            step *= 0.5;
            if step < MIN_STEP {
                break;
            }
        }
        if !accepted {
            break;
        }
        let _ = smooth;
    }

    Ok(ModelWeights {
        kind: ModelKind::Lasso,
        mode,
        params: ModelParams::Linear {
            coefficients: beta.to_vec(),
            intercept,
        },
        hyperparameters: TrainConfig {
            lasso_lambda: Some(lambda),
            ..cfg.clone()
        },
        seed: cfg.seed,
        columns_digest: None,
    })
}

fn hinge_objective(
    x: &ArrayView2<f64>,
    y_signed: &Array1<f64>,
    beta: &Array1<f64>,
    intercept: f64,
    c: f64,
) -> f64 {
    let n = x.nrows() as f64;
    let z = xbeta(x, beta, intercept);
    let hinge: f64 = z
        .iter()
        .zip(y_signed.iter())
        .map(|(&zi, &yi)| (1.0 - yi * zi).max(0.0))
        .sum();
    hinge / n + beta.dot(beta) / (2.0 * c)
}

fn epsilon_objective(
    x: &ArrayView2<f64>,
    y: &Array1<f64>,
    beta: &Array1<f64>,
    intercept: f64,
    c: f64,
    epsilon: f64,
) -> f64 {
    let n = x.nrows() as f64;
    let z = xbeta(x, beta, intercept);
    let loss: f64 = z
        .iter()
        .zip(y.iter())
        .map(|(&zi, &yi)| ((zi - yi).abs() - epsilon).max(0.0))
        .sum();
    loss / n + beta.dot(beta) / (2.0 * c)
}

/// Linear max-margin model: hinge loss (classification, labels mapped to
/// +-1 internally) or epsilon-insensitive loss (regression), plus
/// `1/(2C) ||beta||^2`, minimized by deterministic full-batch subgradient
/// descent with averaging over the second half of the epochs.
pub fn fit_max_margin(
    x: &ArrayView2<f64>,
    y: &Array1<f64>,
    mode: TaskMode,
    cfg: &TrainConfig,
) -> Result<ModelWeights> {
    check_xy(x, y)?;
    cfg.validate()?;
    let d = x.ncols();
    let n = x.nrows() as f64;
    let c = cfg.margin_c;

    let y_signed = match mode {
        TaskMode::Classification => y.mapv(|v| if v > 0.5 { 1.0 } else { -1.0 }),
        TaskMode::Regression => y.clone(),
    };

    let mut beta = Array1::<f64>::zeros(d);
    let mut intercept = match mode {
        TaskMode::Classification => 0.0,
        TaskMode::Regression => y.sum() / n,
    };

    let mut avg_beta = Array1::<f64>::zeros(d);
    let mut avg_intercept = 0.0;
    let mut averaged = 0usize;
    let tail_start = cfg.max_epochs / 2;

    for epoch in 0..cfg.max_epochs {
        let z = xbeta(x, &beta, intercept);
        let mut grad = beta.mapv(|v| v / c);
        let mut grad_b = 0.0;
        for i in 0..x.nrows() {
            match mode {
                TaskMode::Classification => {
                    if y_signed[i] * z[i] < 1.0 {
                        let scale = -y_signed[i] / n;
                        for j in 0..d {
                            grad[j] += scale * x[[i, j]];
                        }
                        grad_b += scale;
                    }
                }
                TaskMode::Regression => {
                    let r = z[i] - y_signed[i];
                    if r.abs() > cfg.epsilon {
                        let scale = r.signum() / n;
                        for j in 0..d {
                            grad[j] += scale * x[[i, j]];
                        }
                        grad_b += scale;
                    }
                }
            }
        }
        let lr = cfg.learning_rate / (1.0 + cfg.lr_decay * epoch as f64);
        beta.scaled_add(-lr, &grad);
        intercept -= lr * grad_b;
        if beta.iter().any(|v| !v.is_finite()) || !intercept.is_finite() {
            return Err(Error::Numerical {
                iteration: epoch + 1,
                message: "max-margin iterate became non-finite".into(),
            });
        }
        if epoch >= tail_start {
            avg_beta += &beta;
            avg_intercept += intercept;
            averaged += 1;
        }
    }
    if averaged > 0 {
        avg_beta.mapv_inplace(|v| v / averaged as f64);
        avg_intercept /= averaged as f64;
    }

    // keep whichever iterate scores better on the training objective
    let (final_beta, final_intercept) = {
        let last = match mode {
            TaskMode::Classification => hinge_objective(x, &y_signed, &beta, intercept, c),
            TaskMode::Regression => epsilon_objective(x, y, &beta, intercept, c, cfg.epsilon),
        };
        let avg = match mode {
            TaskMode::Classification => hinge_objective(x, &y_signed, &avg_beta, avg_intercept, c),
            TaskMode::Regression => epsilon_objective(x, y, &avg_beta, avg_intercept, c, cfg.epsilon),
        };
        if avg <= last {
            (avg_beta, avg_intercept)
        } else {
            (beta, intercept)
        }
    };

    Ok(ModelWeights {
        kind: ModelKind::MaxMargin,
        mode,
        params: ModelParams::Linear {
            coefficients: final_beta.to_vec(),
            intercept: final_intercept,
        },
        hyperparameters: cfg.clone(),
        seed: cfg.seed,
        columns_digest: None,
    })
}

/// Gaussian elimination with partial pivoting; consumes its inputs.
fn solve_linear_system(mut a: Array2<f64>, mut b: Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[[row, col]].abs() > a[[pivot, col]].abs() {
                pivot = row;
            }
        }
        if a[[pivot, col]].abs() < 1e-300 {
            return Err(Error::Numerical {
                iteration: col,
                message: "singular matrix in linear solve".into(),
            });
        }
        if pivot != col {
            for k in 0..n {
                a.swap([pivot, k], [col, k]);
            }
            b.swap(pivot, col);
        }
        let diag = a[[col, col]];
        for row in (col + 1)..n {
            let factor = a[[row, col]] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[[row, k]] -= factor * a[[col, k]];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = Array1::<f64>::zeros(n);
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in (col + 1)..n {
            acc -= a[[col, k]] * x[k];
        }
        x[col] = acc / a[[col, col]];
    }
    Ok(x)
}

/// Classification: Fisher direction through the ridge-stabilized pooled
/// within-class covariance, intercept at the projected class-mean midpoint.
/// Regression: ordinary least squares (with the same 1e-6 ridge).
pub fn fit_lda(x: &ArrayView2<f64>, y: &Array1<f64>, mode: TaskMode) -> Result<ModelWeights> {
    check_xy(x, y)?;
    let d = x.ncols();
    let n = x.nrows();
    const RIDGE: f64 = 1e-6;

    let (coefficients, intercept) = match mode {
        TaskMode::Classification => {
            let pos: Vec<usize> = (0..n).filter(|&i| y[i] > 0.5).collect();
            let neg: Vec<usize> = (0..n).filter(|&i| y[i] <= 0.5).collect();
            if pos.is_empty() || neg.is_empty() {
                return Err(Error::Invalid(
                    "discriminant analysis needs both classes present".into(),
                ));
            }
            let mean_of = |rows: &[usize]| {
                let mut m = Array1::<f64>::zeros(d);
                for &i in rows {
                    for j in 0..d {
                        m[j] += x[[i, j]];
                    }
                }
                m.mapv(|v| v / rows.len() as f64)
            };
            let mu0 = mean_of(&neg);
            let mu1 = mean_of(&pos);
            let delta = &mu1 - &mu0;
            if delta.iter().all(|v| v.abs() < 1e-12) {
                return Err(Error::Invalid(
                    "class means coincide; no separating direction".into(),
                ));
            }
            let mut cov = Array2::<f64>::zeros((d, d));
            for (rows, mu) in [(&neg, &mu0), (&pos, &mu1)] {
                for &i in rows.iter() {
                    for a in 0..d {
                        let da = x[[i, a]] - mu[a];
                        for b in a..d {
                            cov[[a, b]] += da * (x[[i, b]] - mu[b]);
                        }
                    }
                }
            }
            let denom = (n as f64 - 2.0).max(1.0);
            for a in 0..d {
                for b in a..d {
                    let v = cov[[a, b]] / denom;
                    cov[[a, b]] = v;
                    cov[[b, a]] = v;
                }
                cov[[a, a]] += RIDGE;
            }
            let w = solve_linear_system(cov, delta)?;
            let midpoint = 0.5 * (w.dot(&mu0) + w.dot(&mu1));
            (w, -midpoint)
        }
        TaskMode::Regression => {
            let col_means = Array1::from_shape_fn(d, |j| x.column(j).sum() / n as f64);
            let y_mean = y.sum() / n as f64;
            let mut gram = Array2::<f64>::zeros((d, d));
            let mut rhs = Array1::<f64>::zeros(d);
            for i in 0..n {
                for a in 0..d {
                    let da = x[[i, a]] - col_means[a];
                    rhs[a] += da * (y[i] - y_mean);
                    for b in a..d {
                        gram[[a, b]] += da * (x[[i, b]] - col_means[b]);
                    }
                }
            }
            for a in 0..d {
                for b in a..d {
                    gram[[b, a]] = gram[[a, b]];
                }
                gram[[a, a]] += RIDGE;
            }
            let beta = solve_linear_system(gram, rhs)?;
            let intercept = y_mean - beta.dot(&col_means);
            (beta, intercept)
        }
    };

    Ok(ModelWeights {
        kind: ModelKind::Lda,
        mode,
        params: ModelParams::Linear {
            coefficients: coefficients.to_vec(),
            intercept,
        },
        hyperparameters: TrainConfig::default(),
        seed: 0,
        columns_digest: None,
    })
}

/// 122 -> 16 -> 16 -> 1 feed-forward network (see [`net`] for the details).
pub fn fit_neural_net(
    x: &ArrayView2<f64>,
    y: &Array1<f64>,
    mode: TaskMode,
    cfg: &TrainConfig,
) -> Result<ModelWeights> {
    check_xy(x, y)?;
    cfg.validate()?;
    let (network, _losses) = train_network(&x.to_owned(), y, mode, cfg)?;
    Ok(ModelWeights {
        kind: ModelKind::NeuralNet,
        mode,
        params: ModelParams::Network {
            layers: network.layers,
        },
        hyperparameters: cfg.clone(),
        seed: cfg.seed,
        columns_digest: None,
    })
}

/// Trains the requested model kind.
pub fn fit_model(
    kind: ModelKind,
    x: &ArrayView2<f64>,
    y: &Array1<f64>,
    mode: TaskMode,
    cfg: &TrainConfig,
) -> Result<ModelWeights> {
    match kind {
        ModelKind::Lasso => fit_lasso(x, y, mode, cfg),
        ModelKind::MaxMargin => fit_max_margin(x, y, mode, cfg),
        ModelKind::Lda => fit_lda(x, y, mode),
        ModelKind::NeuralNet => fit_neural_net(x, y, mode, cfg),
    }
}

/// Real-valued scores, monotone in class-1 confidence for classifiers;
/// predicted ratings for regressors.
pub fn predict(model: &ModelWeights, x: &ArrayView2<f64>) -> Result<Array1<f64>> {
    if x.ncols() != model.n_features() {
        return Err(Error::Dimension(format!(
            "model expects {} features, matrix has {}",
            model.n_features(),
            x.ncols()
        )));
    }
    match &model.params {
        ModelParams::Linear {
            coefficients,
            intercept,
        } => {
            let beta = Array1::from_vec(coefficients.clone());
            let z = xbeta(x, &beta, *intercept);
            Ok(match (model.kind, model.mode) {
                (ModelKind::Lasso, TaskMode::Classification) => z.mapv(sigmoid),
                _ => z,
            })
        }
        ModelParams::Network { layers } => {
            let network = NeuralNet::from_layers(layers.clone(), model.mode)?;
            Ok(network.predict(&x.to_owned()))
        }
    }
}

/// Greedy backward elimination: repeatedly drop the column whose removal
/// maximizes the scorer until `target_count` columns remain. Ties resolve
/// to the lowest original column index; the round index is mixed into the
/// seed handed to the scorer so every candidate in a round is scored under
/// identical randomness.
pub fn backward_eliminate(
    x: &ArrayView2<f64>,
    y: &Array1<f64>,
    target_count: usize,
    scorer: &dyn Fn(&ArrayView2<f64>, &Array1<f64>, u64) -> Result<f64>,
    seed: u64,
) -> Result<Vec<usize>> {
    check_xy(x, y)?;
    if target_count == 0 || target_count >= x.ncols() {
        return Err(Error::Invalid(format!(
            "target_count {} must be in 1..{} (the starting column count)",
            target_count,
            x.ncols()
        )));
    }
    let mut remaining: Vec<usize> = (0..x.ncols()).collect();
    let mut round = 0u64;
    while remaining.len() > target_count {
        let round_seed = crate::seed::derive(seed, &[round]);
        let mut best: Option<(f64, usize)> = None;
        for drop_pos in 0..remaining.len() {
            let keep: Vec<usize> = remaining
                .iter()
                .enumerate()
                .filter(|(pos, _)| *pos != drop_pos)
                .map(|(_, &col)| col)
                .collect();
            let sub = select_columns(x, &keep);
            let score = scorer(&sub.view(), y, round_seed)?;
            let candidate = remaining[drop_pos];
            let better = match best {
                None => true,
                Some((s, c)) => score > s || (score == s && candidate < c),
            };
            if better {
                best = Some((score, candidate));
            }
        }
        let (_, drop_col) = best.expect("at least one candidate per round");
        remaining.retain(|&c| c != drop_col);
        round += 1;
    }
    Ok(remaining)
}

/// Copies the named columns of `x` into a fresh matrix.
pub fn select_columns(x: &ArrayView2<f64>, columns: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((x.nrows(), columns.len()), |(i, j)| x[[i, columns[j]]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn separated_1d() -> (Array2<f64>, Array1<f64>) {
        let x = array![[-1.0], [-1.0], [1.0], [1.0]];
        let y = array![0.0, 0.0, 1.0, 1.0];
        (x, y)
    }

    #[test]
    fn lasso_zero_vector_is_stationary_above_lambda_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((40, 6), |_| rng.gen_range(-1.0..1.0));
        let y = Array1::from_shape_fn(40, |i| if i % 2 == 0 { 1.0 } else { 0.0 });

        // numerically determine the smallest lambda that keeps beta = 0
        // stationary: the gradient of the smooth term at (0, b0)
        let y_mean: f64 = y.sum() / 40.0;
        let b0 = (y_mean / (1.0 - y_mean)).ln();
        let (_, grad, _) =
            lasso_smooth(&x.view(), &y, &Array1::zeros(6), b0, TaskMode::Classification);
        let lambda_max = grad.iter().map(|v| v.abs()).fold(0.0, f64::max);

        let cfg = TrainConfig {
            lasso_lambda: Some(lambda_max * 1.01),
            max_epochs: 200,
            ..Default::default()
        };
        let model = fit_lasso(&x.view(), &y, TaskMode::Classification, &cfg).unwrap();
        assert_eq!(model.nonzero_count(), 0);

        // and just below lambda_max some coefficient activates
        let cfg = TrainConfig {
            lasso_lambda: Some(lambda_max * 0.5),
            max_epochs: 200,
            ..Default::default()
        };
        let model = fit_lasso(&x.view(), &y, TaskMode::Classification, &cfg).unwrap();
        assert!(model.nonzero_count() > 0);
    }

    #[test]
    fn lasso_learns_separated_sign() {
        let (x, y) = separated_1d();
        let cfg = TrainConfig {
            lasso_lambda: Some(1e-3),
            max_epochs: 2000,
            ..Default::default()
        };
        let model = fit_lasso(&x.view(), &y, TaskMode::Classification, &cfg).unwrap();
        let beta = model.coefficients().unwrap()[0];
        assert!(beta > 0.0, "beta = {beta}");
        let scores = predict(&model, &x.view()).unwrap();
        assert!(scores[0] < 0.5 && scores[3] > 0.5);
    }

    #[test]
    fn lasso_regression_recovers_slope() {
        let x = Array2::from_shape_fn((20, 1), |(i, _)| i as f64 / 10.0 - 1.0);
        let y = Array1::from_shape_fn(20, |i| 2.0 * (i as f64 / 10.0 - 1.0));
        let cfg = TrainConfig {
            lasso_lambda: Some(1e-9),
            max_epochs: 5000,
            ..Default::default()
        };
        let model = fit_lasso(&x.view(), &y, TaskMode::Regression, &cfg).unwrap();
        let beta = model.coefficients().unwrap()[0];
        assert!((beta - 2.0).abs() < 1e-3, "beta = {beta}");
    }

    #[test]
    fn lasso_sparsity_is_monotone_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((60, 10), |_| rng.gen_range(-1.0..1.0));
        let w = array![1.5, -2.0, 0.8, 0.0, 0.0, 0.0, 0.0, 0.3, 0.0, 0.0];
        let y = Array1::from_shape_fn(60, |i| {
            let z: f64 = (0..10).map(|j| x[[i, j]] * w[j]).sum();
            if z + rng.gen_range(-0.3..0.3) > 0.0 {
                1.0
            } else {
                0.0
            }
        });
        let mut previous = usize::MAX;
        for lambda in [1e-3, 1e-2, 1e-1, 1.0] {
            let cfg = TrainConfig {
                lasso_lambda: Some(lambda),
                max_epochs: 500,
                ..Default::default()
            };
            let model = fit_lasso(&x.view(), &y, TaskMode::Classification, &cfg).unwrap();
            let count = model.nonzero_count();
            assert!(
                count <= previous,
                "lambda {lambda}: {count} nonzero after {previous}"
            );
            previous = count;
        }
    }

    #[test]
    fn max_margin_symmetric_pair() {
        let x = array![[-1.0], [1.0]];
        let y = array![0.0, 1.0];
        let cfg = TrainConfig {
            margin_c: 100.0,
            max_epochs: 2000,
            learning_rate:
0.5,
            ..Default::default()
        };
        let model = fit_max_margin(&x.view(), &y, TaskMode::Classification, &cfg).unwrap();
        let scores = predict(&model, &x.view()).unwrap();
        assert!(scores[0] < 0.0 && scores[1] > 0.0);
        // symmetric problem: boundary at 0
        match &model.params {
            ModelParams::Linear { intercept, .. } => {
                assert!(intercept.abs() < 0.05, "intercept {intercept}")
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn max_margin_conflicting_duplicates_shrink_weight() {
        // the same x with both labels, duplicated: any |beta| > 0 pays
        // ridge plus symmetric hinge, so 0 wins
        let x = array![[1.0], [1.0], [1.0], [1.0]];
        let y = array![1.0, 0.0, 1.0, 0.0];
        let cfg = TrainConfig {
            max_epochs: 3000,
            learning_rate: 0.2,
            lr_decay: 0.01,
            ..Default::default()
        };
        let model = fit_max_margin(&x.view(), &y, TaskMode::Classification, &cfg).unwrap();
        let beta = model.coefficients().unwrap()[0];
        let objective_zero = hinge_objective(
            &x.view(),
            &array![1.0, -1.0, 1.0, -1.0],
            &Array1::zeros(1),
            0.0,
            cfg.margin_c,
        );
        let objective_fit = hinge_objective(
            &x.view(),
            &array![1.0, -1.0, 1.0, -1.0],
            &Array1::from_vec(vec![beta]),
            match &model.params {
                ModelParams::Linear { intercept, .. } => *intercept,
                _ => unreachable!(),
            },
            cfg.margin_c,
        );
        assert!(objective_fit <= objective_zero + 1e-6);
        assert!(beta.abs() < 0.1, "beta = {beta}");
    }

    #[test]
    fn max_margin_regression_stays_zero_inside_epsilon() {
        let x = array![[1.0], [2.0], [3.0]];
        let y = array![5.0, 5.05, 4.95];
        let cfg = TrainConfig {
            epsilon: 0.1,
            max_epochs: 500,
            ..Default::default()
        };
        let model = fit_max_margin(&x.view(), &y, TaskMode::Regression, &cfg).unwrap();
        assert_eq!(model.coefficients().unwrap()[0], 0.0);
    }

    #[test]
    fn lda_direction_matches_mean_difference_for_spherical_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let d = 4;
        let mu0 = array![0.0, 0.0, 0.0, 0.0];
        let mu1 = array![2.0, 1.0, -1.0, 0.5];
        let n = 400;
        let mut x = Array2::<f64>::zeros((2 * n, d));
        let mut y = Array1::<f64>::zeros(2 * n);
        for i in 0..n {
            for j in 0..d {
                x[[i, j]] = mu0[j] + rng.gen_range(-1.0..1.0);
                x[[n + i, j]] = mu1[j] + rng.gen_range(-1.0..1.0);
            }
            y[n + i] = 1.0;
        }
        let model = fit_lda(&x.view(), &y, TaskMode::Classification).unwrap();
        let w = Array1::from_vec(model.coefficients().unwrap().to_vec());
        let delta = &mu1 - &mu0;
        let cosine = w.dot(&delta) / (w.dot(&w).sqrt() * delta.dot(&delta).sqrt());
        assert!(cosine >= 0.99, "cosine = {cosine}");
    }

    #[test]
    fn lda_identical_means_is_an_error() {
        let x = array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        let y = array![0.0, 1.0, 0.0, 1.0];
        assert!(fit_lda(&x.view(), &y, TaskMode::Classification).is_err());
    }

    #[test]
    fn lda_requires_both_classes() {
        let x = array![[1.0], [2.0]];
        let y = array![1.0, 1.0];
        assert!(fit_lda(&x.view(), &y, TaskMode::Classification).is_err());
    }

    #[test]
    fn lda_regression_recovers_exact_linear_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = Array2::from_shape_fn((50, 3), |_| rng.gen_range(-2.0..2.0));
        let true_beta = array![1.5, -0.5, 3.0];
        let y = Array1::from_shape_fn(50, |i| {
             (0..3).map(|j| x[[i, j]] * true_beta[j]).sum::<f64>() + 0.7
        });
        let model = fit_lda(&x.view(), &y, TaskMode::Regression).unwrap();
        let beta = model.coefficients().unwrap();
        for (b, t) in beta.iter().zip(true_beta.iter()) {
            assert_abs_diff_eq!(b, t, epsilon = 1e-6);
        }
        let scores = predict(&model, &x.view()).unwrap();
        for (s, t) in scores.iter().zip(y.iter()) {
            assert_abs_diff_eq!(s, t, epsilon = 1e-5);
        }
    }

    #[test]
    fn predict_baseline_scores() {
        let zero_lasso = ModelWeights {
            kind: ModelKind::Lasso,
            mode: TaskMode::Classification,
            params: ModelParams::Linear {
                coefficients: vec![0.0, 0.0],
                intercept: 0.0,
            },
            hyperparameters: TrainConfig::default(),
            seed: 0,
            columns_digest: None,
        };
        let x = array![[1.0, 2.0], [-3.0, 4.0]];
        let scores = predict(&zero_lasso, &x.view()).unwrap();
        assert!(scores.iter().all(|&s| s == 0.5));

        let zero_margin = ModelWeights {
            kind: ModelKind::MaxMargin,
            ..zero_lasso.clone()
        };
        let scores = predict(&zero_margin, &x.view()).unwrap();
        assert!(scores.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn predict_rejects_wrong_width() {
        let (x, y) = separated_1d();
        let model = fit_lda(&x.view(), &y, TaskMode::Classification).unwrap();
        let wide = array![[1.0, 2.0]];
        assert!(predict(&model, &wide.view()).is_err());
    }

    #[test]
    fn fits_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((30, 5), |_| rng.gen_range(-1.0..1.0));
        let y = Array1::from_shape_fn(30, |i| if i % 3 == 0 { 1.0 } else { 0.0 });
        let cfg = TrainConfig {
            lasso_lambda: Some(0.01),
            max_epochs: 100,
            seed: 77,
            ..Default::default()
        };
        for kind in ModelKind::ALL {
            let a = fit_model(kind, &x.view(), &y, TaskMode::Classification, &cfg).unwrap();
            let b = fit_model(kind, &x.view(), &y, TaskMode::Classification, &cfg).unwrap();
            assert_eq!(a, b, "{kind:?} not deterministic");
        }
    }

    #[test]
    fn appending_a_zero_column_leaves_scores_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 30;
        let x = Array2::from_shape_fn((n, 4), |_| rng.gen_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |i| if x[[i, 0]] + 0.5 * x[[i, 2]] > 0.0 { 1.0 } else { 0.0 });
        let mut padded = Array2::<f64>::zeros((n, 5));
        padded.slice_mut(ndarray::s![.., 0..4]).assign(&x);

        let cfg = TrainConfig {
            lasso_lambda: Some(0.01),
            max_epochs: 200,
            seed: 5,
            ..Default::default()
        };
        for kind in ModelKind::ALL {
            let base = fit_model(kind, &x.view(), &y, TaskMode::Classification, &cfg).unwrap();
            let wide = fit_model(kind, &padded.view(), &y, TaskMode::Classification, &cfg).unwrap();
            let s1 = predict(&base, &x.view()).unwrap();
            let s2 = predict(&wide, &padded.view()).unwrap();
            assert_eq!(s1, s2, "{kind:?} scores changed under zero padding");
        }
    }

    #[test]
    fn backward_elimination_prefers_dropping_noise() {
        // scorer that knows which columns are informative: the fraction of
        // informative columns retained (a stand-in for CV AUC, which lives
        // in the eval module)
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((12, 4), |_| rng.gen_range(-1.0..1.0));
        let y = Array1::from_shape_fn(12, |i| (i % 2) as f64);
        let scorer = |sub: &ArrayView2<f64>, _y: &Array1<f64>, _seed: u64| -> Result<f64> {
            // columns are distinguishable by their first-row values
            let informative = [0usize, 2];
            let mut kept = 0;
            for j in 0..sub.ncols() {
                if informative
                    .iter()
                    .any(|&c| (sub[[0, j]] - x[[0, c]]).abs() < 1e-12)
                {
                    kept += 1;
                }
            }
            Ok(kept as f64 / informative.len() as f64)
        };
        let selected = backward_eliminate(&x.view(), &y, 2, &scorer, 0).unwrap();
        assert_eq!(selected, vec![0, 2]);

        assert!(backward_eliminate(&x.view(), &y, 4, &scorer, 0).is_err());
        assert!(backward_eliminate(&x.view(), &y, 0, &scorer, 0).is_err());
    }

    #[test]
    fn model_weights_roundtrip_json() {
        let (x, y) = separated_1d();
        let cfg = TrainConfig {
            lasso_lambda: Some(0.01),
            max_epochs: 50,
            ..Default::default()
        };
        let mut model = fit_lasso(&x.view(), &y, TaskMode::Classification, &cfg).unwrap();
        model.columns_digest = Some(12345);
        let f = tempfile::NamedTempFile::new().unwrap();
        model.write_json(f.path()).unwrap();
        let back = ModelWeights::load_json(f.path()).unwrap();
        assert_eq!(model, back);

        let nn = fit_neural_net(
            &x.view(),
            &y,
            TaskMode::Regression,
            &TrainConfig {
                max_epochs: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        nn.write_json(f.path()).unwrap();
        assert_eq!(nn, ModelWeights::load_json(f.path()).unwrap());
    }
}
