//! Shift-invariant sparse coding: factor a multichannel signal into a small
//! dictionary of short patterns convolved with nonnegative sparse impulse
//! trains.
//!
//! The decomposition minimizes
//!
//! ```text
//!   1/2 * || f - sum_d alpha_d (*) psi_d ||^2  +  lambda * ||alpha||_1
//!   subject to  ||psi_d||_F <= 1  and  alpha_d[n] >= 0
//! ```
//!
//! by alternating projected gradient steps on the patterns and proximal
//! (soft-thresholded) gradient steps on the activations, each with a
//! backtracking line search so the objective trace never increases.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{MultichannelSignal, TimeWindow};

/// Sufficient-decrease constant for the backtracking line searches.
const ARMIJO: f64 = 1e-4;
/// Smallest step size tried before a block update is skipped.
const MIN_STEP: f64 = 1e-20;

/// The learned patterns: D tensors of shape M x C, each with Frobenius
/// norm at most 1.
#[derive(Debug, Clone)]
pub struct PatternDictionary {
    patterns: Vec<Array2<f64>>,
    sample_rate_hz: f64,
}

impl PatternDictionary {
    pub fn new(patterns: Vec<Array2<f64>>, sample_rate_hz: f64) -> Result<Self> {
        if patterns.is_empty() {
            return Err(Error::Invalid("dictionary needs at least one pattern".into()));
        }
        let (m, c) = patterns[0].dim();
        if m == 0 || c == 0 {
            return Err(Error::Invalid("patterns must be non-empty".into()));
        }
        for (d, p) in patterns.iter().enumerate() {
            if p.dim() != (m, c) {
                return Err(Error::Dimension(format!(
                    "pattern {d} has shape {:?}, expected {:?}",
                    p.dim(),
                    (m, c)
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("pattern {d} has a non-finite entry")));
            }
        }
        Ok(PatternDictionary {
            patterns,
            sample_rate_hz,
        })
    }

    pub fn n_patterns(&self) -> usize {
        self.patterns.len()
    }

    /// Pattern length in samples.
    pub fn pattern_len(&self) -> usize {
        self.patterns[0].nrows()
    }

    pub fn pattern_seconds(&self) -> f64 {
        self.pattern_len() as f64 / self.sample_rate_hz
    }

    pub fn n_channels(&self) -> usize {
        self.patterns[0].ncols()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn patterns(&self) -> &[Array2<f64>] {
        &self.patterns
    }

    pub fn frobenius_norms(&self) -> Vec<f64> {
        self.patterns
            .iter()
            .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

/// The activation trains: one nonnegative length-N vector per pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSet {
    trains: Vec<Array1<f64>>,
}

impl ActivationSet {
    pub fn new(trains: Vec<Array1<f64>>) -> Result<Self> {
        if trains.is_empty() {
            return Err(Error::Invalid("activation set needs at least one train".into()));
        }
        let n = trains[0].len();
        for (d, t) in trains.iter().enumerate() {
            if t.len() != n {
                return Err(Error::Dimension(format!(
                    "train {d} has length {}, expected {n}",
                    t.len()
                )));
            }
        }
        Ok(ActivationSet { trains })
    }

    pub fn zeros(n_patterns: usize, n: usize) -> Self {
        ActivationSet {
            trains: vec![Array1::zeros(n); n_patterns],
        }
    }

    pub fn n_patterns(&self) -> usize {
        self.trains.len()
    }

    pub fn len(&self) -> usize {
        self.trains[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn trains(&self) -> &[Array1<f64>] {
        &self.trains
    }

    pub fn l1_norm(&self) -> f64 {
        self.trains
            .iter()
            .map(|t| t.iter().map(|v| v.abs()).sum::<f64>())
            .sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.trains.iter().all(|t| t.iter().all(|&v| v >= 0.0))
    }
}

/// Solver settings. `pattern_seconds * sample_rate >= 2` must hold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Maximum number of patterns learned per signal.
    pub n_patterns: usize,
    /// Pattern length in seconds.
    pub pattern_seconds: f64,
    /// L1 penalty on the activations.
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop when the relative objective decrease over one full alternation
    /// falls below this.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_patterns: 5,
            pattern_seconds: 2.0,
            lambda: 0.1,
            max_iters: 500,
            rel_tol: 1e-5,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if self.n_patterns == 0 {
            return Err(Error::Invalid("n_patterns must be >= 1".into()));
        }
        if !(self.pattern_seconds > 0.0) {
            return Err(Error::Invalid("pattern_seconds must be positive".into()));
        }
        if self.pattern_seconds * sample_rate_hz < 2.0 {
            return Err(Error::Invalid(format!(
                "pattern length {}s at {}Hz is below 2 samples",
                self.pattern_seconds, sample_rate_hz
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Invalid("lambda must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Invalid("max_iters must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Invalid("rel_tol must be positive".into()));
        }
        Ok(())
    }

    /// Pattern length in samples at the given rate.
    pub fn pattern_len(&self, sample_rate_hz: f64) -> usize {
        (self.pattern_seconds * sample_rate_hz).round() as usize
    }
}

/// One discrete appearance of a pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternOccurrence {
    pub pattern_id: u32,
    pub start_index: usize,
    pub start_s: f64,
    pub amplitude: f64,
}

impl PatternOccurrence {
    /// The window this occurrence spans.
    pub fn window(&self, pattern_seconds: f64) -> TimeWindow {
        TimeWindow::new(self.start_s, self.start_s + pattern_seconds)
    }
}

/// Objective values recorded across the optimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveTrace {
    /// Objective after initialization and after each full alternation.
    pub objectives: Vec<f64>,
    pub final_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SolveTrace {
    pub fn is_non_increasing(&self) -> bool {
        self.objectives.windows(2).all(|w| w[1] <= w[0] + 1e-12)
    }
}

/// Convolves each activation train with its pattern and sums:
/// `out[n] = sum_d sum_m alpha_d[n - m] * psi_d[m]`.
pub fn reconstruct(
    dict: &PatternDictionary,
    acts: &ActivationSet,
    n_samples: usize,
) -> Result<Array2<f64>> {
    if dict.n_patterns() != acts.n_patterns() {
        return Err(Error::Dimension(format!(
            "{} patterns vs {} activation trains",
            dict.n_patterns(),
            acts.n_patterns()
        )));
    }
    if acts.len() != n_samples {
        return Err(Error::Dimension(format!(
            "activation length {} vs requested {} samples",
            acts.len(),
            n_samples
        )));
    }
    let m = dict.pattern_len();
    let c = dict.n_channels();
    let mut out = Array2::<f64>::zeros((n_samples, c));
    for (pattern, train) in dict.patterns().iter().zip(acts.trains()) {
        for (t, &a) in train.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let end = m.min(n_samples - t);
            for i in 0..end {
                let row = t + i;
                for ch in 0..c {
                    out[[row, ch]] += a * pattern[[i, ch]];
                }
            }
        }
    }
    Ok(out)
}

fn check_dims(f: &Array2<f64>, dict: &PatternDictionary, acts: &ActivationSet) -> Result<()> {
    if dict.n_patterns() != acts.n_patterns() {
        return Err(Error::Dimension(format!(
            "{} patterns vs {} activation trains",
            dict.n_patterns(),
            acts.n_patterns()
        )));
    }
    if f.nrows() != acts.len() {
        return Err(Error::Dimension(format!(
            "signal has {} samples, activations {}",
            f.nrows(),
            acts.len()
        )));
    }
    if f.ncols() != dict.n_channels() {
        return Err(Error::Dimension(format!(
            "signal has {} channels, patterns {}",
            f.ncols(),
            dict.n_channels()
        )));
    }
    if f.nrows() < dict.pattern_len() {
        return Err(Error::Dimension(format!(
            "signal length {} shorter than pattern length {}",
            f.nrows(),
            dict.pattern_len()
        )));
    }
    Ok(())
}

/// Penalized residual: `1/2 ||f - reconstruction||^2 + lambda ||alpha||_1`.
pub fn objective(
    f: &Array2<f64>,
    dict: &PatternDictionary,
    acts: &ActivationSet,
    lambda: f64,
) -> Result<f64> {
    check_dims(f, dict, acts)?;
    let model = reconstruct(dict, acts, f.nrows())?;
    let residual_term: f64 = f
        .iter()
        .zip(model.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(0.5 * residual_term + lambda * acts.l1_norm())
}

fn smooth_term(f: &Array2<f64>, model: &Array2<f64>) -> f64 {
    0.5 * f
        .iter()
        .zip(model.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
}

/// Gradient of the residual term with respect to each pattern: the negative
/// cross-correlation of the residual with that pattern's activation train.
pub fn grad_psi(
    f: &Array2<f64>,
    dict: &PatternDictionary,
    acts: &ActivationSet,
) -> Result<Vec<Array2<f64>>> {
    check_dims(f, dict, acts)?;
    let n = f.nrows();
    let m = dict.pattern_len();
    let c = dict.n_channels();
    let model = reconstruct(dict, acts, n)?;
    let residual = f - &model;
    let mut grads = Vec::with_capacity(dict.n_patterns());
    for train in acts.trains() {
        let mut g = Array2::<f64>::zeros((m, c));
        for (t, &a) in train.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let end = m.min(n - t);
            for i in 0..end {
                for ch in 0..c {
                    g[[i, ch]] -= a * residual[[t + i, ch]];
                }
            }
        }
        grads.push(g);
    }
    Ok(grads)
}

/// Gradient of the residual term with respect to each activation train: the
/// negative cross-correlation of the residual with that pattern.
///
/// Entries past `N - M` stay zero so every activation keeps its pattern
/// inside the signal.
pub fn grad_alpha(
    f: &Array2<f64>,
    dict: &PatternDictionary,
    acts: &ActivationSet,
) -> Result<Vec<Array1<f64>>> {
    check_dims(f, dict, acts)?;
    let n = f.nrows();
    let m = dict.pattern_len();
    let c = dict.n_channels();
    let model = reconstruct(dict, acts, n)?;
    let residual = f - &model;
    let support = n - m;
    let mut grads = Vec::with_capacity(dict.n_patterns());
    for pattern in dict.patterns() {
        let mut g = Array1::<f64>::zeros(n);
        for t in 0..=support {
            let mut acc = 0.0;
            for i in 0..m {
                for ch in 0..c {
                    acc += pattern[[i, ch]] * residual[[t + i, ch]];
                }
            }
            g[t] = -acc;
        }
        grads.push(g);
    }
    Ok(grads)
}

/// Soft-thresholding: `sgn(a) * max(0, |a| - threshold)` elementwise.
pub fn shrink(acts: &ActivationSet, threshold: f64) -> Result<ActivationSet> {
    if threshold < 0.0 {
        return Err(Error::Invalid(format!("negative shrink threshold {threshold}")));
    }
    let trains = acts
        .trains()
        .iter()
        .map(|t| t.mapv(|a| a.signum() * (a.abs() - threshold).max(0.0)))
        .collect();
    Ok(ActivationSet { trains })
}

/// Scales every pattern with Frobenius norm above 1 back onto the unit
/// ball; feasible patterns are unchanged.
pub fn project_dictionary(dict: &PatternDictionary) -> PatternDictionary {
    let patterns = dict
        .patterns()
        .iter()
        .map(|p| {
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1.0 {
                p.mapv(|v| v / norm)
            } else {
                p.clone()
            }
        })
        .collect();
    PatternDictionary {
        patterns,
        sample_rate_hz: dict.sample_rate_hz,
    }
}

/// Clamps negative activation entries to zero.
pub fn project_activations(acts: &ActivationSet) -> ActivationSet {
    let trains = acts
        .trains()
        .iter()
        .map(|t| t.mapv(|a| a.max(0.0)))
        .collect();
    ActivationSet { trains }
}

/// Proximal update used for the activation block: gradient step, shrink,
/// then nonnegativity projection, with the tail past `N - M` forced to 0.
fn alpha_trial(
    acts: &ActivationSet,
    grads: &[Array1<f64>],
    step: f64,
    lambda: f64,
    support: usize,
) -> ActivationSet {
    let trains = acts
        .trains()
        .iter()
        .zip(grads)
        .map(|(t, g)| {
            let mut new = Array1::<f64>::zeros(t.len());
            for idx in 0..=support {
                let moved = t[idx] - step * g[idx];
                let shrunk = moved.signum() * (moved.abs() - step * lambda).max(0.0);
                new[idx] = shrunk.max(0.0);
            }
            new
        })
        .collect();
    ActivationSet { trains }
}

fn squared_distance_trains(a: &ActivationSet, b: &ActivationSet) -> f64 {
    a.trains()
        .iter()
        .zip(b.trains())
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(u, v)| (u - v) * (u - v)).sum::<f64>())
        .sum()
}

fn squared_distance_patterns(a: &[Array2<f64>], b: &[Array2<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(u, v)| (u - v) * (u - v)).sum::<f64>())
        .sum()
}

/// Learns a dictionary and activations from a signal by alternating
/// projected/proximal gradient descent.
///
/// Deterministic for a fixed seed: patterns initialize i.i.d. uniform in
/// [-0.5, 0.5] (then projected), activations start at zero.
pub fn fit(
    signal: &MultichannelSignal,
    cfg: &SolverConfig,
) -> Result<(PatternDictionary, ActivationSet, SolveTrace)> {
    cfg.validate(signal.sample_rate_hz())?;
    let f = signal.samples();
    let n = f.nrows();
    let c = f.ncols();
    let m = cfg.pattern_len(signal.sample_rate_hz());
    if n <= m {
        return Err(Error::Invalid(format!(
            "signal has {n} samples; need more than the pattern length {m}"
        )));
    }
    let support = n - m;
    let lambda = cfg.lambda;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let patterns: Vec<Array2<f64>> = (0..cfg.n_patterns)
        .map(|_| Array2::from_shape_fn((m, c), |_| rng.gen_range(-0.5..0.5)))
        .collect();
    let mut dict = project_dictionary(&PatternDictionary {
        patterns,
        sample_rate_hz: signal.sample_rate_hz(),
    });
    let mut acts = ActivationSet::zeros(cfg.n_patterns, n);

    let mut model = reconstruct(&dict, &acts, n)?;
    let mut smooth = smooth_term(f, &model);
    let mut objective_now = smooth + lambda * acts.l1_norm();
    let mut objectives = vec![objective_now];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iters {
        iterations = iter;

        // Pattern block: projected gradient step with backtracking.
        let residual = f - &model;
        let mut grads_psi: Vec<Array2<f64>> = Vec::with_capacity(dict.n_patterns());
        for train in acts.trains() {
            let mut g = Array2::<f64>::zeros((m, c));
            for (t, &a) in train.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for i in 0..m.min(n - t) {
                    for ch in 0..c {
                        g[[i, ch]] -= a * residual[[t + i, ch]];
                    }
                }
            }
            grads_psi.push(g);
        }
        let grad_norm_sq: f64 = grads_psi.iter().map(|g| g.iter().map(|v| v * v).sum::<f64>()).sum();
        if grad_norm_sq > 0.0 {
            let mut step = 1.0;
            loop {
                let trial: Vec<Array2<f64>> = dict
                    .patterns()
                    .iter()
                    .zip(&grads_psi)
                    .map(|(p, g)| p - &(g * step))
                    .collect();
                let trial_dict = project_dictionary(&PatternDictionary {
                    patterns: trial,
                    sample_rate_hz: dict.sample_rate_hz,
                });
                let trial_model = reconstruct(&trial_dict, &acts, n)?;
                let trial_smooth = smooth_term(f, &trial_model);
                let dist = squared_distance_patterns(trial_dict.patterns(), dict.patterns());
                if dist == 0.0 {
                    break;
                }
                if trial_smooth <= smooth - ARMIJO * dist / step {
                    dict = trial_dict;
                    model = trial_model;
                    smooth = trial_smooth;
                    break;
                }
                step *= 0.5;
                if step < MIN_STEP {
                    break;
                }
            }
        }

        // Activation block: proximal gradient step with backtracking on the
        // full objective.
        let residual = f - &model;
        let mut grads_alpha: Vec<Array1<f64>> = Vec::with_capacity(dict.n_patterns());
        for pattern in dict.patterns() {
            let mut g = Array1::<f64>::zeros(n);
            for t in 0..=support {
                let mut acc = 0.0;
                for i in 0..m {
                    for ch in 0..c {
                        acc += pattern[[i, ch]] * residual[[t + i, ch]];
                    }
                }
                g[t] = -acc;
            }
            grads_alpha.push(g);
        }
        let objective_before = smooth + lambda * acts.l1_norm();
        let mut step = 1.0;
        loop {
            let trial = alpha_trial(&acts, &grads_alpha, step, lambda, support);
            let dist = squared_distance_trains(&trial, &acts);
            if dist == 0.0 {
                break;
            }
            let trial_model = reconstruct(&dict, &trial, n)?;
            let trial_smooth = smooth_term(f, &trial_model);
            let trial_objective = trial_smooth + lambda * trial.l1_norm();
            if trial_objective <= objective_before - ARMIJO * dist / step {
                acts = trial;
                model = trial_model;
                smooth = trial_smooth;
                break;
            }
            step *= 0.5;
            if step < MIN_STEP {
                break;
            }
        }

        let previous = objective_now;
        objective_now = smooth + lambda * acts.l1_norm();
        if !objective_now.is_finite() {
            return Err(Error::Numerical {
                iteration: iter,
                message: "objective became non-finite".into(),
            });
        }
        objectives.push(objective_now);

        let rel_decrease = (previous - objective_now) / previous.max(f64::MIN_POSITIVE);
        if rel_decrease < cfg.rel_tol {
            converged = true;
            break;
        }
    }

    let trace = SolveTrace {
        final_objective: objective_now,
        objectives,
        iterations,
        converged,
    };
    Ok((dict, acts, trace))
}

/// Discretizes activation trains into pattern occurrences: local maxima at
/// or above `min_amplitude_frac` times the train's global maximum, with
/// maxima closer than M/2 samples merged keeping the larger.
pub fn extract_occurrences(
    dict: &PatternDictionary,
    acts: &ActivationSet,
    min_amplitude_frac: f64,
) -> Result<Vec<PatternOccurrence>> {
    if !(min_amplitude_frac > 0.0 && min_amplitude_frac <= 1.0) {
        return Err(Error::Invalid(format!(
            "min_amplitude_frac must be in (0, 1], got {min_amplitude_frac}"
        )));
    }
    if dict.n_patterns() != acts.n_patterns() {
        return Err(Error::Dimension(format!(
            "{} patterns vs {} activation trains",
            dict.n_patterns(),
            acts.n_patterns()
        )));
    }
    let merge_radius = dict.pattern_len() as f64 / 2.0;
    let rate = dict.sample_rate_hz();
    let mut occurrences = Vec::new();
    for (d, train) in acts.trains().iter().enumerate() {
        let global_max = train.iter().cloned().fold(0.0_f64, f64::max);
        if global_max <= 0.0 {
            continue;
        }
        let threshold = min_amplitude_frac * global_max;
        let n = train.len();
        let mut peaks: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            let v = train[i];
            if v <= 0.0 || v < threshold {
                continue;
            }
            let left = if i > 0 { train[i - 1] } else { f64::NEG_INFINITY };
            let right = if i + 1 < n { train[i + 1] } else { f64::NEG_INFINITY };
            if v >= left && v >= right {
                peaks.push((i, v));
            }
        }
        // Keep larger peaks first; a peak survives if no kept peak is
        // within the merge radius. Ties go to the earlier index.
        peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let mut kept: Vec<(usize, f64)> = Vec::new();
        for (idx, amp) in peaks {
            if kept
                .iter()
                .all(|&(k, _)| (idx as f64 - k as f64).abs() >= merge_radius)
            {
                kept.push((idx, amp));
            }
        }
        kept.sort_by_key(|&(idx, _)| idx);
        for (idx, amp) in kept {
            occurrences.push(PatternOccurrence {
                pattern_id: d as u32,
                start_index: idx,
                start_s: idx as f64 / rate,
                amplitude: amp,
            });
        }
    }
    Ok(occurrences)
}

/// Serialized decomposition: pattern tensors row-major, activations as
/// sparse index-to-value maps.
#[derive(Debug, Serialize, Deserialize)]
pub struct DecompositionFile {
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    pub n_channels: usize,
    pub pattern_len: usize,
    /// One row-major `pattern_len * n_channels` array per pattern.
    pub patterns: Vec<Vec<f64>>,
    /// One sparse map per pattern: sample index -> amplitude.
    pub activations: Vec<BTreeMap<usize, f64>>,
}

impl DecompositionFile {
    pub fn from_parts(dict: &PatternDictionary, acts: &ActivationSet) -> Self {
        let patterns = dict
            .patterns()
            .iter()
            .map(|p| p.iter().cloned().collect())
            .collect();
        let activations = acts
            .trains()
            .iter()
            .map(|t| {
                t.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(i, &v)| (i, v))
                    .collect()
            })
            .collect();
        DecompositionFile {
            sample_rate_hz: dict.sample_rate_hz(),
            n_samples: acts.len(),
            n_channels: dict.n_channels(),
            pattern_len: dict.pattern_len(),
            patterns,
            activations,
        }
    }

    pub fn into_parts(self) -> Result<(PatternDictionary, ActivationSet)> {
        let mut patterns = Vec::with_capacity(self.patterns.len());
        for (d, flat) in self.patterns.iter().enumerate() {
            if flat.len() != self.pattern_len * self.n_channels {
                return Err(Error::Invalid(format!(
                    "pattern {d} has {} values, expected {}",
                    flat.len(),
                    self.pattern_len * self.n_channels
                )));
            }
            patterns.push(
                Array2::from_shape_vec((self.pattern_len, self.n_channels), flat.clone())
                    .expect("length checked above"),
            );
        }
        let dict = PatternDictionary::new(patterns, self.sample_rate_hz)?;
        let mut trains = Vec::with_capacity(self.activations.len());
        for (d, sparse) in self.activations.iter().enumerate() {
            let mut train = Array1::<f64>::zeros(self.n_samples);
            for (&idx, &v) in sparse {
                if idx >= self.n_samples {
                    return Err(Error::Invalid(format!(
                        "activation index {idx} out of range in train {d}"
                    )));
                }
                train[idx] = v;
            }
            trains.push(train);
        }
        let acts = ActivationSet::new(trains)?;
        if dict.n_patterns() != acts.n_patterns() {
            return Err(Error::Invalid("pattern/activation count mismatch".into()));
        }
        Ok((dict, acts))
    }
}

pub fn write_decomposition(
    path: impl AsRef<Path>,
    dict: &PatternDictionary,
    acts: &ActivationSet,
) -> Result<()> {
    let path = path.as_ref();
    let file = DecompositionFile::from_parts(dict, acts);
    let json = serde_json::to_string_pretty(&file).expect("decomposition serializes");
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_decomposition(path: impl AsRef<Path>) -> Result<(PatternDictionary, ActivationSet)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: DecompositionFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, 1, e.to_string()))?;
    file.into_parts()
}

/// Writes occurrences as CSV: `video_id,pattern_id,start_s,amplitude`.
pub fn write_occurrences(
    path: impl AsRef<Path>,
    video_id: &str,
    occurrences: &[PatternOccurrence],
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("video_id,pattern_id,start_s,amplitude\n");
    for occ in occurrences {
        out.push_str(&format!(
            "{},{},{},{}\n",
            video_id, occ.pattern_id, occ.start_s, occ.amplitude
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One row of an occurrence CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct OccurrenceRow {
    pub video_id: String,
    pub pattern_id: u32,
    pub start_s: f64,
    pub amplitude: f64,
}

pub fn load_occurrences(path: impl AsRef<Path>) -> Result<Vec<OccurrenceRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    if header.trim() != "video_id,pattern_id,start_s,amplitude" {
        return Err(Error::parse(path, 1, "unexpected occurrence CSV header"));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(path, idx + 1, "expected 4 columns"));
        }
        let pattern_id: u32 = fields[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, "invalid pattern id"))?;
        let start_s: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, "invalid start_s"))?;
        let amplitude: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, "invalid amplitude"))?;
        rows.push(OccurrenceRow {
            video_id: fields[0].trim().to_string(),
            pattern_id,
            start_s,
            amplitude,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn dict1(pattern: Array2<f64>, rate: f64) -> PatternDictionary {
        PatternDictionary::new(vec![pattern], rate).unwrap()
    }

    fn impulse(n: usize, at: usize, amp: f64) -> Array1<f64> {
        let mut a = Array1::zeros(n);
        a[at] = amp;
        a
    }

    #[test]
    fn reconstruct_unit_impulse() {
        let dict = dict1(array![[1.0], [2.0]], 10.0);
        let acts = ActivationSet::new(vec![impulse(6, 3, 1.0)]).unwrap();
        let out = reconstruct(&dict, &acts, 6).unwrap();
        let expected = array![[0.0], [0.0], [0.0], [1.0], [2.0], [0.0]];
        assert_eq!(out, expected);
    }

    #[test]
    fn reconstruct_zero_and_scaled() {
        let dict = dict1(array![[1.0], [2.0]], 10.0);
        let zero = ActivationSet::zeros(1, 6);
        assert!(reconstruct(&dict, &zero, 6).unwrap().iter().all(|&v| v == 0.0));

        let acts = ActivationSet::new(vec![impulse(4, 0, 2.0)]).unwrap();
        let out = reconstruct(&dict, &acts, 4).unwrap();
        assert_eq!(out, array![[2.0], [4.0], [0.0], [0.0]]);
    }

    #[test]
    fn reconstruct_is_linear_in_activations() {
        let dict = dict1(array![[0.5], [-0.25], [1.0]], 10.0);
        let a1 = ActivationSet::new(vec![impulse(8, 1, 1.5)]).unwrap();
        let a2 = ActivationSet::new(vec![impulse(8, 4, 0.75)]).unwrap();
        let sum = ActivationSet::new(vec![&a1.trains()[0] + &a2.trains()[0]]).unwrap();
        let r1 = reconstruct(&dict, &a1, 8).unwrap();
        let r2 = reconstruct(&dict, &a2, 8).unwrap();
        let rs = reconstruct(&dict, &sum, 8).unwrap();
        let diff = (&r1 + &r2 - &rs).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn objective_examples() {
        let dict = dict1(array![[1.0], [2.0]], 10.0);
        let acts = ActivationSet::new(vec![impulse(6, 2, 1.25)]).unwrap();
        let f = reconstruct(&dict, &acts, 6).unwrap();
        // exact fit, no penalty
        assert_eq!(objective(&f, &dict, &acts, 0.0).unwrap(), 0.0);

        // everything zero
        let zero_f = Array2::zeros((6, 1));
        let zero_a = ActivationSet::zeros(1, 6);
        assert_eq!(objective(&zero_f, &dict, &zero_a, 3.0).unwrap(), 0.0);

        // single unexplained sample: 1/2 * 1^2
        let dict_short = dict1(array![[0.0]], 10.0);
        let f1 = array![[1.0]];
        let a1 = ActivationSet::zeros(1, 1);
        assert_eq!(objective(&f1, &dict_short, &a1, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn shrink_examples() {
        let acts = ActivationSet::new(vec![array![0.5, -0.1, 0.3]]).unwrap();
        let out = shrink(&acts, 0.2).unwrap();
        let got = &out.trains()[0];
        assert!((got[0] - 0.3).abs() < 1e-15);
        assert_eq!(got[1], 0.0);
        assert!((got[2] - 0.1).abs() < 1e-15);

        let id = shrink(&acts, 0.0).unwrap();
        assert_eq!(&id, &acts);

        let small = ActivationSet::new(vec![array![0.05]]).unwrap();
        assert_eq!(shrink(&small, 0.2).unwrap().trains()[0][0], 0.0);

        assert!(shrink(&acts, -1.0).is_err());
    }

    #[test]
    fn projection_examples() {
        // norm 2 -> radial projection to norm 1
        let p = array![[2.0, 0.0], [0.0, 0.0]];
        let d = dict1(p, 10.0);
        let proj = project_dictionary(&d);
        assert!((proj.frobenius_norms()[0] - 1.0).abs() < 1e-12);
        assert!((proj.patterns()[0][[0, 0]] - 1.0).abs() < 1e-12);

        // interior point unchanged
        let p = array![[0.3], [0.4]];
        let d = dict1(p.clone(), 10.0);
        assert_eq!(project_dictionary(&d).patterns()[0], p);

        // zero stays zero
        let d = dict1(Array2::zeros((2, 2)), 10.0);
        assert!(project_dictionary(&d).patterns()[0].iter().all(|&v| v == 0.0));

        let acts = ActivationSet::new(vec![array![-1.0, 0.0, 2.0]]).unwrap();
        assert_eq!(project_activations(&acts).trains()[0], array![0.0, 0.0, 2.0]);
        let all_neg = ActivationSet::new(vec![array![-3.0, -0.5]]).unwrap();
        assert!(project_activations(&all_neg).trains()[0].iter().all(|&v| v == 0.0));
    }

    fn random_instance(
        seed: u64,
        n: usize,
        c: usize,
        d: usize,
        m: usize,
    ) -> (Array2<f64>, PatternDictionary, ActivationSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Array2::from_shape_fn((n, c), |_| rng.gen_range(-1.0..1.0));
        let patterns = (0..d)
            .map(|_| Array2::from_shape_fn((m, c), |_| rng.gen_range(-0.5..0.5)))
            .collect();
        let dict = PatternDictionary::new(patterns, 10.0).unwrap();
        let trains = (0..d)
            .map(|_| {
                let mut t = Array1::zeros(n);
                for i in 0..=(n - m) {
                    if rng.gen_range(0.0..1.0) < 0.3 {
                        t[i] = rng.gen_range(0.0..1.0);
                    }
                }
                t
            })
            .collect();
        (f, dict, ActivationSet::new(trains).unwrap())
    }

    fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
        let diff: f64 = analytic
            .iter()
            .zip(numeric)
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
    fn grad_psi_matches_finite_differences() {
        for seed in 0..5 {
            let (f, dict, acts) = random_instance(seed, 20, 2, 2, 3);
            let grads = grad_psi(&f, &dict, &acts).unwrap();
            let h = 1e-6;
            let mut analytic = Vec::new();
            let mut numeric = Vec::new();
            for d in 0..dict.n_patterns() {
                for i in 0..dict.pattern_len() {
                    for ch in 0..dict.n_channels() {
                        analytic.push(grads[d][[i, ch]]);
                        let mut plus = dict.patterns().to_vec();
                        plus[d][[i, ch]] += h;
                        let mut minus = dict.patterns().to_vec();
                        minus[d][[i, ch]] -= h;
                        let dp = PatternDictionary::new(plus, 10.0).unwrap();
                        let dm = PatternDictionary::new(minus, 10.0).unwrap();
                        let op = objective(&f, &dp, &acts, 0.0).unwrap();
                        let om = objective(&f, &dm, &acts, 0.0).unwrap();
                        numeric.push((op - om) / (2.0 * h));
                    }
                }
            }
            assert!(
                rel_err(&analytic, &numeric) <= 1e-4,
                "seed {seed}: psi gradient mismatch {}",
                rel_err(&analytic, &numeric)
            );
        }
    }

    #[test]
    fn grad_alpha_matches_finite_differences() {
        for seed in 10..15 {
            let (f, dict, acts) = random_instance(seed, 20, 2, 2, 3);
            let grads = grad_alpha(&f, &dict, &acts).unwrap();
            let h = 1e-6;
            let mut analytic = Vec::new();
            let mut numeric = Vec::new();
            let support = f.nrows() - dict.pattern_len();
            for d in 0..dict.n_patterns() {
                for t in 0..=support {
                    analytic.push(grads[d][t]);
                    let mut plus = acts.trains().to_vec();
                    plus[d][t] += h;
                    let mut minus = acts.trains().to_vec();
                    minus[d][t] -= h;
                    let ap = ActivationSet::new(plus).unwrap();
                    let am = ActivationSet::new(minus).unwrap();
                    let op = objective(&f, &dict, &ap, 0.0).unwrap();
                    let om = objective(&f, &dict, &am, 0.0).unwrap();
                    numeric.push((op - om) / (2.0 * h));
                }
            }
            assert!(
                rel_err(&analytic, &numeric) <= 1e-4,
                "seed {seed}: alpha gradient mismatch {}",
                rel_err(&analytic, &numeric)
            );
        }
    }

    #[test]
    fn gradients_vanish_at_exact_reconstruction() {
        let (_, dict, acts) = random_instance(99, 20, 2, 2, 3);
        let f = reconstruct(&dict, &acts, 20).unwrap();
        let gp = grad_psi(&f, &dict, &acts).unwrap();
        let ga = grad_alpha(&f, &dict, &acts).unwrap();
        assert!(gp.iter().all(|g| g.iter().all(|&v| v.abs() < 1e-12)));
        assert!(ga.iter().all(|g| g.iter().all(|&v| v.abs() < 1e-12)));
    }

    #[test]
    fn grad_psi_is_linear_in_residual() {
        let (f, dict, acts) = random_instance(7, 20, 2, 2, 3);
        let model = reconstruct(&dict, &acts, 20).unwrap();
        // f2 chosen so its residual is exactly twice the residual of f
        let f2 = &model + &((&f - &model) * 2.0);
        let g1 = grad_psi(&f, &dict, &acts).unwrap();
        let g2 = grad_psi(&f2, &dict, &acts).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            let diff = (&(a * 2.0) - b).iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(diff < 1e-10);
        }
    }

    #[test]
    fn grad_alpha_peaks_at_impulse_location() {
        // f holds a lone impulse of height 2 at sample 2; psi = [1, 0]
        let dict = dict1(array![[1.0], [0.0]], 10.0);
        let f = array![[0.0], [0.0], [2.0], [0.0], [0.0]];
        let acts = ActivationSet::zeros(1, 5);
        let g = grad_alpha(&f, &dict, &acts).unwrap();
        assert_eq!(g[0], array![0.0, 0.0, -2.0, 0.0, 0.0]);
    }

    #[test]
    fn fit_zero_signal_converges_to_zero() {
        let samples = Array2::zeros((30, 2));
        let signal =
            MultichannelSignal::new(samples, 10.0, vec!["a".into(), "b".into()]).unwrap();
        let cfg = SolverConfig {
            n_patterns: 2,
            pattern_seconds: 0.5,
            lambda: 0.1,
            seed: 3,
            ..Default::default()
        };
        let (_, acts, trace) = fit(&signal, &cfg).unwrap();
        assert!(acts.trains().iter().all(|t| t.iter().all(|&v| v == 0.0)));
        assert_eq!(trace.final_objective, 0.0);
        assert!(trace.converged);
    }

    /// Small planted-pattern instance; the full-scale version runs in the
    /// acceptance suite.
    fn planted_signal(seed: u64, n: usize, m: usize, amp: f64) -> (MultichannelSignal, PatternDictionary, ActivationSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = 2;
        let mut pattern = Array2::from_shape_fn((m, c), |(i, _)| {
            let w = (std::f64::consts::PI * (i as f64 + 0.5) / m as f64).sin();
            w * rng.gen_range(-1.0..1.0)
        });
        let norm = pattern.iter().map(|v| v * v).sum::<f64>().sqrt();
        pattern.mapv_inplace(|v| v / norm);
        let dict = PatternDictionary::new(vec![pattern], 10.0).unwrap();
        let mut train = Array1::zeros(n);
        let mut pos = 2;
        while pos + m < n {
            train[pos] = amp * rng.gen_range(0.8..1.2);
            pos += 3 * m + rng.gen_range(0..m);
        }
        let acts = ActivationSet::new(vec![train]).unwrap();
        let clean = reconstruct(&dict, &acts, n).unwrap();
        let noisy = clean.mapv(|v| v) + Array2::from_shape_fn((n, c), |_| rng.gen_range(-0.01..0.01));
        let signal = MultichannelSignal::new(noisy, 10.0, vec!["a".into(), "b".into()]).unwrap();
        (signal, dict, acts)
    }

    #[test]
    fn fit_recovers_planted_pattern_small() {
        let (signal, true_dict, _) = planted_signal(5, 400, 8, 2.0);
        let cfg = SolverConfig {
            n_patterns: 1,
            pattern_seconds: 0.8,
            lambda: 0.2,
            seed: 11,
            ..Default::default()
        };
        let (dict, acts, trace) = fit(&signal, &cfg).unwrap();
        assert!(trace.is_non_increasing());
        assert!(dict.frobenius_norms().iter().all(|&n| n <= 1.0 + 1e-9));
        assert!(acts.is_nonnegative());

        let model = reconstruct(&dict, &acts, signal.n_samples()).unwrap();
        let num: f64 = signal
            .samples()
            .iter()
            .zip(model.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let den: f64 = signal.samples().iter().map(|v| v * v).sum();
        assert!(num / den <= 0.05, "relative error {}", num / den);

        let ncc = best_shift_ncc(&true_dict.patterns()[0], &dict.patterns()[0]);
        assert!(ncc >= 0.9, "normalized cross-correlation {ncc}");
    }

    fn best_shift_ncc(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        let m = a.nrows() as isize;
        let c = a.ncols();
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut best = f64::NEG_INFINITY;
        for shift in (-m + 1)..m {
            let mut dot = 0.0;
            for i in 0..m {
                let j = i + shift;
                if j < 0 || j >= m {
                    continue;
                }
                for ch in 0..c {
                    dot += a[[i as usize, ch]] * b[[j as usize, ch]];
                }
            }
            best = best.max(dot / (na * nb).max(1e-300));
        }
        best
    }

    #[test]
    fn fit_with_huge_lambda_keeps_activations_zero() {
        let (signal, _, _) = planted_signal(6, 200, 8, 2.0);
        let energy: f64 = signal.samples().iter().map(|v| v * v).sum();
        let cfg = SolverConfig {
            n_patterns: 1,
            pattern_seconds: 0.8,
            lambda: energy * 1.1,
            seed: 4,
            ..Default::default()
        };
        let (_, acts, _) = fit(&signal, &cfg).unwrap();
        assert!(acts.trains().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn fit_is_bitwise_reproducible() {
        let (signal, _, _) = planted_signal(8, 300, 8, 2.0);
        let cfg = SolverConfig {
            n_patterns: 2,
            pattern_seconds: 0.8,
            lambda: 0.2,
            seed: 21,
            ..Default::default()
        };
        let (d1, a1, t1) = fit(&signal, &cfg).unwrap();
        let (d2, a2, t2) = fit(&signal, &cfg).unwrap();
        assert_eq!(t1.objectives, t2.objectives);
        assert_eq!(a1.trains(), a2.trains());
        for (p, q) in d1.patterns().iter().zip(d2.patterns()) {
            assert_eq!(p, q);
        }
    }

    #[test]
    fn fit_rejects_short_signal() {
        let samples = Array2::zeros((5, 1));
        let signal = MultichannelSignal::new(samples, 10.0, vec!["a".into()]).unwrap();
        let cfg = SolverConfig {
            n_patterns: 1,
            pattern_seconds: 0.5,
            lambda: 0.1,
            ..Default::default()
        };
        assert!(fit(&signal, &cfg).is_err());
    }

    #[test]
    fn occurrence_extraction_examples() {
        let rate = 1.0;

        // isolated peaks
        let dict = dict1(Array2::zeros((2, 1)), rate);
        let acts = ActivationSet::new(vec![array![0.0, 0.0, 5.0, 0.0, 0.0, 3.0, 0.0]]).unwrap();
        let occ = extract_occurrences(&dict, &acts, 0.1).unwrap();
        let starts: Vec<usize> = occ.iter().map(|o| o.start_index).collect();
        assert_eq!(starts, vec![2, 5]);

        // merge within M/2 keeps the larger
        let dict4 = dict1(Array2::zeros((4, 1)), rate);
        let acts = ActivationSet::new(vec![array![0.0, 5.0, 4.0, 0.0]]).unwrap();
        let occ = extract_occurrences(&dict4, &acts, 0.1).unwrap();
        assert_eq!(occ.len(), 1);
        assert_eq!(occ[0].start_index, 1);
        assert_eq!(occ[0].amplitude, 5.0);

        // below-threshold peak dropped
        let dict = dict1(Array2::zeros((2, 1)), rate);
        let acts = ActivationSet::new(vec![array![0.0, 5.0, 0.0, 0.4, 0.0]]).unwrap();
        let occ = extract_occurrences(&dict, &acts, 0.1).unwrap();
        assert_eq!(occ.len(), 1);
        assert_eq!(occ[0].start_index, 1);

        // all-zero train: empty, not an error
        let acts = ActivationSet::zeros(1, 6);
        assert!(extract_occurrences(&dict, &acts, 0.1).unwrap().is_empty());

        assert!(extract_occurrences(&dict, &acts, 0.0).is_err());
        assert!(extract_occurrences(&dict, &acts, 1.5).is_err());
    }

    #[test]
    fn decomposition_roundtrip() {
        let (_, dict, acts) = random_instance(42, 20, 2, 2, 3);
        let acts = project_activations(&acts);
        let f = tempfile::NamedTempFile::new().unwrap();
        write_decomposition(f.path(), &dict, &acts).unwrap();
        let (d2, a2) = load_decomposition(f.path()).unwrap();
        assert_eq!(acts.trains(), a2.trains());
        for (p, q) in dict.patterns().iter().zip(d2.patterns()) {
            assert_eq!(p, q);
        }
    }

    #[test]
    fn occurrence_csv_roundtrip() {
        let rows = vec![
            PatternOccurrence {
                pattern_id: 0,
                start_index: 10,
                start_s: 1.0,
                amplitude: 2.5,
            },
            PatternOccurrence {
                pattern_id: 3,
                start_index: 40,
                start_s: 4.0,
                amplitude: 0.125,
            },
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_occurrences(f.path(), "vid", &rows).unwrap();
        let back = load_occurrences(f.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].video_id, "vid");
        assert_eq!(back[1].pattern_id, 3);
        assert_eq!(back[1].start_s, 4.0);
        assert_eq!(back[1].amplitude, 0.125);
    }

    proptest::proptest! {
        /// Shrinking then projecting equals projecting then shrinking.
        #[test]
        fn shrink_and_projection_commute(
            values in proptest::collection::vec(-2.0f64..2.0, 1..40),
            threshold in 0.0f64..1.0,
        ) {
            let acts = ActivationSet::new(vec![Array1::from_vec(values)]).unwrap();
            let a = shrink(&project_activations(&acts), threshold).unwrap();
            let b = project_activations(&shrink(&acts, threshold).unwrap());
            for (x, y) in a.trains()[0].iter().zip(b.trains()[0].iter()) {
                proptest::prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
