//! Evaluation protocol: label binarization, ROC/AUC, correlation, repeated
//! random train/test splits, subsampling experiments, Welch t-tests, and
//! per-category weight shares of the linear predictors.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureCategory, Normalization};
use crate::models::{
    fit_model, predict, ModelKind, ModelWeights, TaskMode, TrainConfig, NONZERO_EPS,
};
use crate::seed;

/// Ratings of four or higher are the positive ("meaningful") class;
/// lower ratings are mannerisms.
pub fn binarize(rating: u8) -> Result<bool> {
    if !(1..=7).contains(&rating) {
        return Err(Error::Invalid(format!("rating {rating} outside 1..=7")));
    }
    Ok(rating >= 4)
}

fn check_scores_labels(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Invalid("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Invalid(
            "ROC analysis needs both classes present".into(),
        ));
    }
    Ok((pos, neg))
}

/// ROC points from (0,0) to (1,1), one per distinct score threshold, ties
/// grouped.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = check_scores_labels(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));

    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

/// Trapezoidal area under a curve of (x, y) points.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * 0.5)
        .sum()
}

/// Area under the ROC curve as the Mann-Whitney pair statistic: the
/// fraction of (positive, negative) pairs ranked correctly, ties counting
/// one half. Computed via average ranks in O(n log n).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_scores_labels(scores, labels)?;
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based average rank of the tie group [i, j)
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Pearson product-moment correlation; constant inputs are an error, not 0.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "{} vs {} values",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Invalid("correlation needs at least 2 points".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Invalid(
            "correlation undefined for a constant input".into(),
        ));
    }
    Ok(cov / (va.sqrt() * vb.sqrt()))
}

/// Lanczos approximation of ln Gamma(x) for x > 0.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued-fraction kernel of the regularized incomplete beta function
/// (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front =
        (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTTest {
    pub t: f64,
    pub p: f64,
    pub dof: f64,
}

/// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
/// freedom; two-sided p via the t-distribution CDF.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<WelchTTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Invalid(
            "each sample needs at least 2 observations".into(),
        ));
    }
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (n, m, var)
    };
    let (na, ma, va) = stats(a);
    let (nb, mb, vb) = stats(b);
    if va == 0.0 && vb == 0.0 {
        return Err(Error::Invalid(
            "both samples have zero variance; t statistic undefined".into(),
        ));
    }
    let se2 = va / na + vb / nb;
    let t = (ma - mb) / se2.sqrt();
    let dof =
        se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    let p = if t == 0.0 {
        1.0
    } else {
        regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t))
    };
    Ok(WelchTTest { t, p, dof })
}

/// Per-category share of a linear model's weight mass: mean absolute value
/// over the category's nonzero coefficients (0 when a category has none),
/// reported as percentages that sum to 100.
pub fn category_weights(
    model: &ModelWeights,
    categories: &[FeatureCategory],
) -> Result<Vec<(FeatureCategory, f64)>> {
    let coefficients = model
        .coefficients()
        .ok_or_else(|| Error::Invalid("weight analysis is defined for linear models only".into()))?;
    if coefficients.len() != categories.len() {
        return Err(Error::Dimension(format!(
            "{} coefficients vs {} category tags",
            coefficients.len(),
            categories.len()
        )));
    }
    let mut sums = [0.0f64; 5];
    let mut counts = [0usize; 5];
    for (w, cat) in coefficients.iter().zip(categories) {
        if w.abs() > NONZERO_EPS {
            let slot = FeatureCategory::ALL.iter().position(|c| c == cat).unwrap();
            sums[slot] += w.abs();
            counts[slot] += 1;
        }
    }
    let mut weights = [0.0f64; 5];
    for slot in 0..5 {
        if counts[slot] > 0 {
            weights[slot] = sums[slot] / counts[slot] as f64;
        }
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(Error::Invalid(
            "all coefficients are zero; weight shares undefined".into(),
        ));
    }
    Ok(FeatureCategory::ALL
        .iter()
        .enumerate()
        .map(|(slot, &cat)| (cat, 100.0 * weights[slot] / total))
        .collect())
}

/// Rows plus targets: 0/1 labels in classification, raw ratings in
/// regression.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

impl LabeledDataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "{} rows vs {} targets",
                x.nrows(),
                y.len()
            )));
        }
        Ok(LabeledDataset { x, y })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    fn subset(&self, rows: &[usize]) -> LabeledDataset {
        let x = Array2::from_shape_fn((rows.len(), self.x.ncols()), |(i, j)| self.x[[rows[i], j]]);
        let y = Array1::from_shape_fn(rows.len(), |i| self.y[rows[i]]);
        LabeledDataset { x, y }
    }
}

/// Repeated random-split protocol settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_repeats: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            n_repeats: 30,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_repeats == 0 {
            return Err(Error::Invalid("n_repeats must be >= 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Invalid(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

fn split_is_usable(y_train: &Array1<f64>, y_test: &Array1<f64>, mode: TaskMode) -> bool {
    match mode {
        TaskMode::Classification => {
            let has_both =
                |y: &Array1<f64>| y.iter().any(|&v| v > 0.5) && y.iter().any(|&v| v <= 0.5);
            has_both(y_train) && has_both(y_test)
        }
        TaskMode::Regression => {
            let non_constant = |y: &Array1<f64>| y.len() >= 2 && y.iter().any(|&v| v != y[0]);
            non_constant(y_train) && non_constant(y_test)
        }
    }
}

/// One seeded split plus training: held-out scores and targets. The split
/// is redrawn (bounded at 100 attempts) until both sides can support the
/// metric.
fn split_predictions(
    ds: &LabeledDataset,
    repeat: usize,
    kind: ModelKind,
    mode: TaskMode,
    cfg: &TrainConfig,
    spec: &SplitSpec,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = ds.n_rows();
    let test_size = ((spec.test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    if n - test_size < 2 {
        return Err(Error::Invalid(format!(
            "{n} rows leave only {} training rows at test fraction {}",
            n - test_size,
            spec.test_fraction
        )));
    }

    let mut chosen: Option<(Vec<usize>, Vec<usize>)> = None;
    for attempt in 0..100u64 {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(
            spec.seed,
            &[seed::hash_label("split"), repeat as u64, attempt],
        ));
        order.shuffle(&mut rng);
        let (test_rows, train_rows) = order.split_at(test_size);
        let y_test = Array1::from_shape_fn(test_rows.len(), |i| ds.y[test_rows[i]]);
        let y_train = Array1::from_shape_fn(train_rows.len(), |i| ds.y[train_rows[i]]);
        if split_is_usable(&y_train, &y_test, mode) {
            chosen = Some((train_rows.to_vec(), test_rows.to_vec()));
            break;
        }
    }
    let (train_rows, test_rows) = chosen.ok_or_else(|| {
        Error::Invalid(format!(
            "no usable train/test split found in 100 attempts (repeat {repeat})"
        ))
    })?;

    let train = ds.subset(&train_rows);
    let test = ds.subset(&test_rows);
    let norm = Normalization::fit(&train.x.view())?;
    let x_train = norm.apply(&train.x.view())?;
    let x_test = norm.apply(&test.x.view())?;

    let repeat_cfg = TrainConfig {
        seed: seed::derive(spec.seed, &[seed::hash_label("train"), repeat as u64]),
        ..cfg.clone()
    };
    let model = fit_model(kind, &x_train.view(), &train.y, mode, &repeat_cfg)?;
    let scores = predict(&model, &x_test.view())?;
    Ok((scores, test.y))
}

fn one_split_metric(
    ds: &LabeledDataset,
    repeat: usize,
    kind: ModelKind,
    mode: TaskMode,
    cfg: &TrainConfig,
    spec: &SplitSpec,
) -> Result<f64> {
    let (scores, y_test) = split_predictions(ds, repeat, kind, mode, cfg, spec)?;
    match mode {
        TaskMode::Classification => {
            let labels: Vec<bool> = y_test.iter().map(|&v| v > 0.5).collect();
            auc(scores.as_slice().unwrap(), &labels)
        }
        TaskMode::Regression => pearson(scores.as_slice().unwrap(), y_test.as_slice().unwrap()),
    }
}

/// ROC points of the held-out predictions of one seeded split
/// (classification only).
pub fn split_roc_curve(
    ds: &LabeledDataset,
    repeat: usize,
    kind: ModelKind,
    cfg: &TrainConfig,
    spec: &SplitSpec,
) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    let (scores, y_test) =
        split_predictions(ds, repeat, kind, TaskMode::Classification, cfg, spec)?;
    let labels: Vec<bool> = y_test.iter().map(|&v| v > 0.5).collect();
    roc_curve(scores.as_slice().unwrap(), &labels)
}

/// Runs `n_repeats` seeded random train/test splits; per repeat the
/// z-score transform is fitted on the training rows only, the model is
/// trained, and the metric (AUC or Pearson correlation) is computed on the
/// held-out rows. Repeats run in parallel; each derives its seed from
/// (master seed, repeat index) so parallel and serial runs agree.
pub fn repeated_splits(
    ds: &LabeledDataset,
    kind: ModelKind,
    mode: TaskMode,
    cfg: &TrainConfig,
    spec: &SplitSpec,
) -> Result<Vec<f64>> {
    spec.validate()?;
    (0..spec.n_repeats)
        .into_par_iter()
        .map(|repeat| one_split_metric(ds, repeat, kind, mode, cfg, spec))
        .collect()
}

/// Can some train/test split of rows with these targets support the
/// metric? Classification needs two of each class (one per side);
/// regression needs two rows off the modal value.
fn targets_can_split(y: &Array1<f64>, mode: TaskMode) -> bool {
    match mode {
        TaskMode::Classification => {
            let pos = y.iter().filter(|&&v| v > 0.5).count();
            pos >= 2 && y.len() - pos >= 2
        }
        TaskMode::Regression => {
            let mut counts: std::collections::BTreeMap<u64, usize> = std::collections::BTreeMap::new();
            for v in y {
                *counts.entry(v.to_bits()).or_default() += 1;
            }
            let max_count = counts.values().copied().max().unwrap_or(0);
            y.len() >= 4 && y.len() - max_count >= 2
        }
    }
}

/// Like [`repeated_splits`], but each repeat first subsamples
/// `ceil(fraction * N)` rows (without replacement) and then runs one
/// split/train/evaluate pass on the subsample. A subsample that cannot
/// support any usable split is redrawn with the next seeded attempt,
/// bounded at 100, mirroring the split redraw rule.
pub fn subsample_experiment(
    ds: &LabeledDataset,
    fraction: f64,
    kind: ModelKind,
    mode: TaskMode,
    cfg: &TrainConfig,
    spec: &SplitSpec,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Invalid(format!(
            "subsample fraction must be in (0, 1], got {fraction}"
        )));
    }
    let n = ds.n_rows();
    let k = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    (0..spec.n_repeats)
        .into_par_iter()
        .map(|repeat| {
            for attempt in 0..100u64 {
                let mut order: Vec<usize> = (0..n).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(
                    spec.seed,
                    &[seed::hash_label("subsample"), repeat as u64, attempt],
                ));
                order.shuffle(&mut rng);
                let mut rows = order[..k].to_vec();
                // restore original row order so fraction = 1 reproduces
                // repeated_splits exactly
                rows.sort_unstable();
                let sub = ds.subset(&rows);
                if !targets_can_split(&sub.y, mode) {
                    continue;
                }
                return one_split_metric(&sub, repeat, kind, mode, cfg, spec);
            }
            Err(Error::Invalid(format!(
                "no usable subsample found in 100 attempts (repeat {repeat})"
            )))
        })
        .collect()
}

pub fn mean_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Grid used when no explicit lasso lambda is configured.
pub const LASSO_LAMBDA_GRID: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];

fn stratified_folds(
    y: &Array1<f64>,
    mode: TaskMode,
    folds: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = y.len();
    let mut fold_of = vec![0usize; n];
    match mode {
        TaskMode::Classification => {
            let mut pos: Vec<usize> = (0..n).filter(|&i| y[i] > 0.5).collect();
            let mut neg: Vec<usize> = (0..n).filter(|&i| y[i] <= 0.5).collect();
            pos.shuffle(rng);
            neg.shuffle(rng);
            for (k, &i) in pos.iter().chain(neg.iter()).enumerate() {
                fold_of[i] = k % folds;
            }
        }
        TaskMode::Regression => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            for (k, &i) in order.iter().enumerate() {
                fold_of[i] = k % folds;
            }
        }
    }
    fold_of
}

fn cv_lasso_score(
    ds: &LabeledDataset,
    fold_of: &[usize],
    folds: usize,
    lambda: f64,
    mode: TaskMode,
    cfg: &TrainConfig,
    seed_value: u64,
) -> Option<f64> {
    let n = ds.n_rows();
    let mut scores = Vec::new();
    for fold in 0..folds {
        let train_rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let valid_rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        if train_rows.len() < 2 || valid_rows.is_empty() {
            continue;
        }
        let train = ds.subset(&train_rows);
        let valid = ds.subset(&valid_rows);
        if !split_is_usable(&train.y, &valid.y, mode) {
            continue;
        }
        let norm = match Normalization::fit(&train.x.view()) {
            Ok(n) => n,
            Err(_) => continue,
        };
        let x_train = norm.apply(&train.x.view()).ok()?;
        let x_valid = norm.apply(&valid.x.view()).ok()?;
        let fold_cfg = TrainConfig {
            lasso_lambda: Some(lambda),
            seed: seed_value,
            ..cfg.clone()
        };
        let model = fit_model(ModelKind::Lasso, &x_train.view(), &train.y, mode, &fold_cfg).ok()?;
        let pred = predict(&model, &x_valid.view()).ok()?;
        let metric = match mode {
            TaskMode::Classification => {
                let labels: Vec<bool> = valid.y.iter().map(|&v| v > 0.5).collect();
                auc(pred.as_slice().unwrap(), &labels)
            }
            TaskMode::Regression => pearson(pred.as_slice().unwrap(), valid.y.as_slice().unwrap()),
        };
        if let Ok(m) = metric {
            scores.push(m);
        }
    }
    if scores.is_empty() {
        None
    } else {
        Some(mean_of(&scores))
    }
}

/// Picks the lasso L1 weight by 5-fold cross-validation over
/// [`LASSO_LAMBDA_GRID`], maximizing AUC (classification) or Pearson
/// correlation (regression). Ties prefer the larger (sparser) lambda.
pub fn select_lasso_lambda(
    ds: &LabeledDataset,
    mode: TaskMode,
    cfg: &TrainConfig,
    seed_value: u64,
) -> Result<f64> {
    const FOLDS: usize = 5;
    if ds.n_rows() < 2 * FOLDS {
        return Err(Error::Invalid(format!(
            "lambda selection needs at least {} rows, got {}",
            2 * FOLDS,
            ds.n_rows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed_value, &[seed::hash_label("cv")]));
    let fold_of = stratified_folds(&ds.y, mode, FOLDS, &mut rng);

    let mut best: Option<(f64, f64)> = None;
    for &lambda in &LASSO_LAMBDA_GRID {
        let Some(score) = cv_lasso_score(ds, &fold_of, FOLDS, lambda, mode, cfg, seed_value)
        else {
            continue;
        };
        let better = match best {
            None => true,
            // ties prefer the sparser (larger) lambda
            Some((s, _)) => score >= s,
        };
        if better {
            best = Some((score, lambda));
        }
    }
    best.map(|(_, lambda)| lambda)
        .ok_or_else(|| Error::Invalid("no lambda in the grid produced a scorable fold".into()))
}

/// A 5-fold cross-validated-AUC scorer for
/// [`crate::models::backward_eliminate`].
pub fn cv_auc_scorer(
    lambda: f64,
) -> impl Fn(&ndarray::ArrayView2<f64>, &Array1<f64>, u64) -> Result<f64> {
    move |x, y, seed_value| {
        const FOLDS: usize = 5;
        let ds = LabeledDataset::new(x.to_owned(), y.clone())?;
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed::derive(seed_value, &[seed::hash_label("scorer")]));
        let fold_of = stratified_folds(&ds.y, TaskMode::Classification, FOLDS, &mut rng);
        let cfg = TrainConfig {
            max_epochs: 200,
            ..Default::default()
        };
        cv_lasso_score(
            &ds,
            &fold_of,
            FOLDS,
            lambda,
            TaskMode::Classification,
            &cfg,
            seed_value,
        )
        .ok_or_else(|| Error::Invalid("no scorable fold in CV AUC".into()))
    }
}

/// One protocol run: a metric list over repeats for a model kind, task and
/// annotation source.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub kind: ModelKind,
    pub mode: TaskMode,
    pub source: String,
    pub subsampled: bool,
    pub metrics: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TTestEntry {
    pub kind: ModelKind,
    pub mode: TaskMode,
    /// Which two metric lists were compared.
    pub comparison: String,
    pub t: f64,
    pub p: f64,
    pub dof: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryPercent {
    pub category: FeatureCategory,
    pub percent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightShareEntry {
    pub kind: ModelKind,
    pub mode: TaskMode,
    pub source: String,
    pub percents: Vec<CategoryPercent>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RocEntry {
    pub kind: ModelKind,
    pub source: String,
    pub points: Vec<(f64, f64)>,
}

/// Everything the evaluation stage reports.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub runs: Vec<ProtocolRun>,
    pub t_tests: Vec<TTestEntry>,
    pub weight_shares: Vec<WeightShareEntry>,
    pub roc_curves: Vec<RocEntry>,
}

impl EvalReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, 1, e.to_string()))
    }

    /// `model,task,source,category,percent` rows mirroring the weight
    /// table layout.
    pub fn write_weights_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("model,task,source,category,percent\n");
        for entry in &self.weight_shares {
            for cp in &entry.percents {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    entry.kind.as_str(),
                    entry.mode.as_str(),
                    entry.source,
                    cp.category.as_str(),
                    cp.percent
                );
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Writes one ROC curve as `fpr,tpr` rows.
pub fn write_roc_csv(path: impl AsRef<Path>, points: &[(f64, f64)]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in points {
        let _ = writeln!(out, "{fpr},{tpr}");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelParams;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn binarize_boundary() {
        assert!(binarize(4).unwrap());
        assert!(!binarize(3).unwrap());
        assert!(binarize(7).unwrap());
        assert!(!binarize(1).unwrap());
        assert!(binarize(0).is_err());
        assert!(binarize(8).is_err());
    }

    #[test]
    fn roc_curve_shapes() {
        // perfectly ordered scores pass through (0, 1)
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        let curve = roc_curve(&scores, &labels).unwrap();
        assert!(curve.contains(&(0.0, 1.0)));
        assert_eq!(curve.first(), Some(&(0.0, 0.0)));
        assert_eq!(curve.last(), Some(&(1.0, 1.0)));

        // perfectly inverted scores pass through (1, 0)
        let inverted = [0.1, 0.2, 0.8, 0.9];
        let curve = roc_curve(&inverted, &labels).unwrap();
        assert!(curve.contains(&(1.0, 0.0)));

        // all scores equal collapse to the two endpoints
        let flat = [0.5, 0.5, 0.5, 0.5];
        let curve = roc_curve(&flat, &labels).unwrap();
        assert_eq!(curve, vec![(0.0, 0.0), (1.0, 1.0)]);

        assert!(roc_curve(&scores, &[true, true, true, true]).is_err());
    }

    /// Exhaustive pair counting; the independent oracle for `auc`.
    fn pair_count_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0u64;
        let mut ties = 0u64;
        let mut pairs = 0u64;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1;
                if scores[i] > scores[j] {
                    wins += 1;
                } else if scores[i] == scores[j] {
                    ties += 1;
                }
            }
        }
        (wins as f64 + 0.5 * ties as f64) / pairs as f64
    }

    #[test]
    fn auc_examples() {
        let scores = [0.9, 0.4, 0.6, 0.1];
        let labels = [true, true, false, false];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.75);

        let perfect = [0.9, 0.8, 0.1, 0.2];
        assert_eq!(auc(&perfect, &labels).unwrap(), 1.0);

        let flat = [0.3, 0.3, 0.3, 0.3];
        assert_eq!(auc(&flat, &labels).unwrap(), 0.5);

        assert!(auc(&scores, &[false, false, false, false]).is_err());
    }

    #[test]
    fn auc_matches_pair_counting_and_trapezoid() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 2..10usize {
            for mask in 1..(1u32 << n) - 1 {
                let labels: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                // quantized scores force plenty of ties
                let scores: Vec<f64> =
                    (0..n).map(|_| (rng.gen_range(0..5) as f64) / 4.0).collect();
                let fast = auc(&scores, &labels).unwrap();
                let brute = pair_count_auc(&scores, &labels);
                assert_eq!(fast, brute, "scores {scores:?} labels {labels:?}");
                let curve = roc_curve(&scores, &labels).unwrap();
                assert_abs_diff_eq!(trapezoid_area(&curve), fast, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn auc_complement_and_monotone_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = 12;
            let labels: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
            // tie-free with probability 1
            assert_abs_diff_eq!(
                auc(&scores, &labels).unwrap() + auc(&negated, &labels).unwrap(),
                1.0,
                epsilon = 1e-12
            );
            let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
            assert_eq!(
                auc(&scores, &labels).unwrap(),
                auc(&warped, &labels).unwrap()
            );
        }
    }

    #[test]
    fn pearson_examples() {
        assert_abs_diff_eq!(
            pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            pearson(&[1.0, 5.0, 2.0], &[11.0, 15.0, 12.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn welch_identical_lists() {
        let a = [1.0, 1.2, 0.9, 1.1];
        let result = welch_ttest(&a, &a).unwrap();
        assert_eq!(result.t, 0.0);
        assert_eq!(result.p, 1.0);
    }

    #[test]
    fn welch_shifted_lists_are_significant() {
        let a = [1.0, 1.1, 0.9];
        let b = [11.0, 11.1, 10.9];
        let result = welch_ttest(&a, &b).unwrap();
        assert!(result.p < 0.01, "p = {}", result.p);
        assert!(result.t < 0.0);

        let swapped = welch_ttest(&b, &a).unwrap();
        assert_abs_diff_eq!(swapped.t, -result.t, epsilon = 1e-12);
        assert_abs_diff_eq!(swapped.p, result.p, epsilon = 1e-12);
    }

    #[test]
    fn welch_degenerate_variances_error() {
        assert!(welch_ttest(&[1.0, 1.0], &[2.0, 2.0]).is_err());
    }

    /// Published two-sided critical values of the t distribution: the CDF
    /// evaluated at the tabulated quantile must give back the tail mass.
    #[test]
    fn t_distribution_matches_published_table() {
        for (dof, t, p) in [
            (2.0, 4.303, 0.05),
            (5.0, 2.571, 0.05),
            (10.0, 2.228, 0.05),
            (10.0, 3.169, 0.01),
            (30.0, 2.042, 0.05),
            (29.0, 2.756, 0.01),
        ] {
            let two_sided = regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
            assert_abs_diff_eq!(two_sided, p, epsilon = 2e-3);
        }
    }

    fn linear_model(coefficients: Vec<f64>) -> ModelWeights {
        ModelWeights {
            kind: ModelKind::Lasso,
            mode: TaskMode::Classification,
            params: ModelParams::Linear {
                coefficients,
                intercept: 0.0,
            },
            hyperparameters: TrainConfig::default(),
            seed: 0,
            columns_digest: None,
        }
    }

    #[test]
    fn category_weights_worked_example() {
        // category A: [0.2, -0.4, 0.0] (two nonzero), category B: [0.1]
        let model = linear_model(vec![0.2, -0.4, 0.0, 0.1]);
        let categories = [
            FeatureCategory::Disfluency,
            FeatureCategory::Disfluency,
            FeatureCategory::Disfluency,
            FeatureCategory::Prosody,
        ];
        let shares = category_weights(&model, &categories).unwrap();
        let get = |cat: FeatureCategory| {
            shares.iter().find(|(c, _)| *c == cat).unwrap().1
        };
        assert_abs_diff_eq!(get(FeatureCategory::Disfluency), 75.0, epsilon = 1e-9);
        assert_abs_diff_eq!(get(FeatureCategory::Prosody), 25.0, epsilon = 1e-9);
        assert_eq!(get(FeatureCategory::Body), 0.0);

        let total: f64 = shares.iter().map(|(_, p)| p).sum();
        assert_abs_diff_eq!(total, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn category_weights_scaling_invariance_and_errors() {
        let model = linear_model(vec![0.2, -0.4, 0.0, 0.1]);
        let categories = [
            FeatureCategory::Face,
            FeatureCategory::Face,
            FeatureCategory::Lexical,
            FeatureCategory::Lexical,
        ];
        let shares = category_weights(&model, &categories).unwrap();
        let scaled = linear_model(vec![0.2 * 7.0, -0.4 * 7.0, 0.0, 0.1 * 7.0]);
        let shares_scaled = category_weights(&scaled, &categories).unwrap();
        for ((_, a), (_, b)) in shares.iter().zip(&shares_scaled) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }

        // single populated category takes 100%
        let single = linear_model(vec![0.3, 0.7]);
        let cats = [FeatureCategory::Lexical, FeatureCategory::Lexical];
        let shares = category_weights(&single, &cats).unwrap();
        assert_abs_diff_eq!(
            shares.iter().find(|(c, _)| *c == FeatureCategory::Lexical).unwrap().1,
            100.0,
            epsilon = 1e-9
        );

        // all-zero model is an error
        let zero = linear_model(vec![0.0, 0.0]);
        assert!(category_weights(&zero, &cats).is_err());
    }

    /// Labels driven by a linear score over the first two columns.
    fn synthetic_dataset(seed_value: u64, n: usize, noise: f64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_value);
        let x = Array2::from_shape_fn((n, 6), |_| rng.gen_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |i| {
            let score = 2.0 * x[[i, 0]] - 1.5 * x[[i, 1]] + rng.gen_range(-noise..noise);
            if score > 0.0 {
                1.0
            } else {
                0.0
            }
        });
        LabeledDataset::new(x, y).unwrap()
    }

    #[test]
    fn repeated_splits_separable_and_deterministic() {
        let ds = synthetic_dataset(1, 120, 0.01);
        let cfg = TrainConfig {
            lasso_lambda: Some(0.001),
            max_epochs: 300,
            ..Default::default()
        };
        let spec = SplitSpec {
            n_repeats: 10,
            test_fraction: 0.2,
            seed: 99,
        };
        let metrics =
            repeated_splits(&ds, ModelKind::Lasso, TaskMode::Classification, &cfg, &spec).unwrap();
        assert_eq!(metrics.len(), 10);
        assert!(mean_of(&metrics) >= 0.95, "mean AUC {}", mean_of(&metrics));

        let again =
            repeated_splits(&ds, ModelKind::Lasso, TaskMode::Classification, &cfg, &spec).unwrap();
        assert_eq!(metrics, again);
    }

    #[test]
    fn repeated_splits_null_labels_hover_near_chance() {
        let mut ds = synthetic_dataset(2, 120, 0.01);
        // destroy the signal by shuffling labels
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut y: Vec<f64> = ds.y.to_vec();
        y.shuffle(&mut rng);
        ds.y = Array1::from_vec(y);

        let cfg = TrainConfig {
            lasso_lambda: Some(0.01),
            max_epochs: 200,
            ..Default::default()
        };
        let spec = SplitSpec {
            n_repeats: 30,
            test_fraction: 0.2,
            seed: 5,
        };
        let metrics =
            repeated_splits(&ds, ModelKind::Lasso, TaskMode::Classification, &cfg, &spec).unwrap();
        let mean = mean_of(&metrics);
        assert!((0.4..=0.6).contains(&mean), "null mean AUC {mean}");
    }

    #[test]
    fn subsample_fraction_one_matches_repeated_splits() {
        let ds = synthetic_dataset(3, 60, 0.2);
        let cfg = TrainConfig {
            lasso_lambda: Some(0.01),
            max_epochs: 100,
            ..Default::default()
        };
        let spec = SplitSpec {
            n_repeats: 5,
            test_fraction: 0.25,
            seed: 7,
        };
        let full =
            repeated_splits(&ds, ModelKind::Lasso, TaskMode::Classification, &cfg, &spec).unwrap();
        let sub = subsample_experiment(
            &ds,
            1.0,
            ModelKind::Lasso,
            TaskMode::Classification,
            &cfg,
            &spec,
        )
        .unwrap();
        assert_eq!(full, sub);

        assert!(subsample_experiment(
            &ds,
            0.0,
            ModelKind::Lasso,
            TaskMode::Classification,
            &cfg,
            &spec
        )
        .is_err());
    }

    #[test]
    fn regression_protocol_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 80;
        let x = Array2::from_shape_fn((n, 4), |_| rng.gen_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |i| {
            4.0 + 1.5 * x[[i, 0]] - 1.0 * x[[i, 3]] + rng.gen_range(-0.2..0.2)
        });
        let ds = LabeledDataset::new(x, y).unwrap();
        let spec = SplitSpec {
            n_repeats: 5,
            test_fraction: 0.25,
            seed: 3,
        };
        let metrics = repeated_splits(
            &ds,
            ModelKind::Lda,
            TaskMode::Regression,
            &TrainConfig::default(),
            &spec,
        )
        .unwrap();
        assert!(mean_of(&metrics) > 0.9, "correlation {}", mean_of(&metrics));
    }

    #[test]
    fn lambda_selection_returns_grid_member() {
        let ds = synthetic_dataset(4, 100, 0.3);
        let lambda = select_lasso_lambda(
            &ds,
            TaskMode::Classification,
            &TrainConfig {
                max_epochs: 150,
                ..Default::default()
            },
            42,
        )
        .unwrap();
        assert!(LASSO_LAMBDA_GRID.contains(&lambda));
    }

    #[test]
    fn backward_elimination_drops_planted_noise_column() {
        // three informative columns plus one pure-noise column
        let mut hits = 0;
        for seed_value in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed_value);
            let n = 60;
            let x = Array2::from_shape_fn((n, 4), |_| rng.gen_range(-1.0..1.0));
            let y = Array1::from_shape_fn(n, |i| {
                let score = x[[i, 0]] + x[[i, 1]] - x[[i, 2]] + rng.gen_range(-0.1..0.1);
                if score > 0.0 {
                    1.0
                } else {
                    0.0
                }
            });
            let scorer = cv_auc_scorer(0.01);
            let kept =
                crate::models::backward_eliminate(&x.view(), &y, 3, &scorer, seed_value).unwrap();
            if kept == vec![0, 1, 2] {
                hits += 1;
            }
        }
        assert!(hits >= 9, "noise column survived in {} of 10 runs", 10 - hits);
    }

    #[test]
    fn report_roundtrip_and_csv() {
        let report = EvalReport {
            runs: vec![ProtocolRun {
                kind: ModelKind::Lasso,
                mode: TaskMode::Classification,
                source: "crowd_average".into(),
                subsampled: false,
                metrics: vec![0.8, 0.9],
                mean: 0.85,
            }],
            t_tests: vec![],
            weight_shares: vec![WeightShareEntry {
                kind: ModelKind::Lasso,
                mode: TaskMode::Classification,
                source: "self".into(),
                percents: vec![CategoryPercent {
                    category: FeatureCategory::Lexical,
                    percent: 100.0,
                }],
            }],
            roc_curves: vec![RocEntry {
                kind: ModelKind::Lasso,
                source: "self".into(),
                points: vec![(0.0, 0.0), (1.0, 1.0)],
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let json_path = dir.path().join("report.json");
        report.write_json(&json_path).unwrap();
        let back = EvalReport::load_json(&json_path).unwrap();
        assert_eq!(back.runs[0].mean, 0.85);

        let csv_path = dir.path().join("weights.csv");
        report.write_weights_csv(&csv_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert!(text.contains("lasso,classification,self,lexical,100"));

        let roc_path = dir.path().join("roc.csv");
        write_roc_csv(&roc_path, &report.roc_curves[0].points).unwrap();
        assert_eq!(
            std::fs::read_to_string(&roc_path).unwrap(),
            "fpr,tpr\n0,0\n1,1\n"
        );
    }
}
