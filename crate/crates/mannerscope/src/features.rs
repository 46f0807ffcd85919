//! The five per-pattern feature families, computed over the set of time
//! windows where a pattern occurs, plus z-score normalization of the
//! assembled matrix.
//!
//! All statistics pool every window of a pattern into one sample set before
//! computing means/stds/counts; population standard deviation is used
//! throughout so single-sample windows are well defined. Degenerate cases
//! (empty windows, zero denominators) produce 0 rather than missing values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{
    AlignedTranscript, CategoryLexicon, FaceTrack, JointLayout, MultichannelSignal, ProsodyTrack,
    TimeWindow, TokenKind, FACE_LANDMARKS,
};

pub const DISFLUENCY_COUNT: usize = 9;
pub const PROSODY_COUNT: usize = 26;
pub const BODY_COUNT: usize = 40;
pub const FACE_COUNT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureCategory {
    Disfluency,
    Prosody,
    Body,
    Face,
    Lexical,
}

impl FeatureCategory {
    pub const ALL: [FeatureCategory; 5] = [
        FeatureCategory::Disfluency,
        FeatureCategory::Prosody,
        FeatureCategory::Body,
        FeatureCategory::Face,
        FeatureCategory::Lexical,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureCategory::Disfluency => "disfluency",
            FeatureCategory::Prosody => "prosody",
            FeatureCategory::Body => "body",
            FeatureCategory::Face => "face",
            FeatureCategory::Lexical => "lexical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "disfluency" => Some(FeatureCategory::Disfluency),
            "prosody" => Some(FeatureCategory::Prosody),
            "body" => Some(FeatureCategory::Body),
            "face" => Some(FeatureCategory::Face),
            "lexical" => Some(FeatureCategory::Lexical),
            _ => None,
        }
    }
}

/// A named landmark pair whose pixel distance is a facial feature.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaceDistance {
    pub name: String,
    pub a: usize,
    pub b: usize,
}

/// Landmark index map for the facial distances.
///
/// The landmark semantics of a tracker are not standardized, so the pairs
/// are configuration, not code. `eye_left`/`eye_right` anchor the
/// inter-eye normalization; `distances` must name exactly 9 pairs (the
/// four brow/lid heights per face side plus the lip corner distance).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaceMap {
    pub eye_left: usize,
    pub eye_right: usize,
    pub distances: Vec<FaceDistance>,
}

impl FaceMap {
    pub fn validate(&self) -> Result<()> {
        if self.distances.len() != 9 {
            return Err(Error::Invalid(format!(
                "face map must define exactly 9 distances, got {}",
                self.distances.len()
            )));
        }
        let check = |idx: usize, what: &str| {
            if idx >= FACE_LANDMARKS {
                Err(Error::Invalid(format!(
                    "face map {what} index {idx} out of range (0..{FACE_LANDMARKS})"
                )))
            } else {
                Ok(())
            }
        };
        check(self.eye_left, "eye_left")?;
        check(self.eye_right, "eye_right")?;
        for d in &self.distances {
            check(d.a, &d.name)?;
            check(d.b, &d.name)?;
        }
        Ok(())
    }

    /// A reasonable map for 66-point trackers that follow the common
    /// 68-point indexing with the two inner-lip points dropped.
    pub fn standard_66() -> Self {
        let pair = |name: &str, a: usize, b: usize| FaceDistance {
            name: name.to_string(),
            a,
            b,
        };
        FaceMap {
            eye_left: 36,
            eye_right: 45,
            distances: vec![
                pair("obh_left", 17, 36),
                pair("obh_right", 26, 45),
                pair("ibh_left", 21, 39),
                pair("ibh_right", 22, 42),
                pair("olh_left", 37, 41),
                pair("olh_right", 44, 46),
                pair("ilh_left", 38, 40),
                pair("ilh_right", 43, 47),
                pair("lip_cdt", 48, 54),
            ],
        }
    }
}

/// Column names and category tags shared by every row of a feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    pub names: Vec<String>,
    pub categories: Vec<FeatureCategory>,
}

impl FeatureSchema {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn category_counts(&self) -> [usize; 5] {
        let mut counts = [0usize; 5];
        for c in &self.categories {
            let slot = FeatureCategory::ALL.iter().position(|x| x == c).unwrap();
            counts[slot] += 1;
        }
        counts
    }

    /// Stable digest of the column manifest, stored with trained models to
    /// catch train/test schema drift.
    pub fn digest(&self) -> u64 {
        let mut repr = String::new();
        for (n, c) in self.names.iter().zip(&self.categories) {
            let _ = write!(repr, "{n}:{};", c.as_str());
        }
        crate::seed::hash_label(&repr)
    }
}

/// Builds the column schema implied by a layout, face map and lexicon.
pub fn feature_schema(
    layout: &JointLayout,
    face_map: &FaceMap,
    lexicon: &CategoryLexicon,
) -> Result<FeatureSchema> {
    layout.validate()?;
    face_map.validate()?;
    let mut names = Vec::new();
    let mut categories = Vec::new();
    let mut push = |name: String, cat: FeatureCategory| {
        names.push(name);
        categories.push(cat);
    };

    for kind in ["word", "filler", "pause"] {
        push(format!("avg_{kind}_duration"), FeatureCategory::Disfluency);
    }
    for kind in ["word", "filler", "pause"] {
        push(format!("{kind}_count"), FeatureCategory::Disfluency);
    }
    for kind in ["word", "filler", "pause"] {
        push(format!("{kind}_proportion"), FeatureCategory::Disfluency);
    }

    for signal in ["loudness", "pitch", "f1", "f2", "f3"] {
        for stat in ["mean", "min", "max", "range", "std"] {
            push(format!("{signal}_{stat}"), FeatureCategory::Prosody);
        }
    }
    push("voiced_unvoiced_ratio".into(), FeatureCategory::Prosody);

    for &j in &layout.tracked_joints {
        let joint = &layout.joint_names[j];
        for stat in [
            "position_mean",
            "speed_mean",
            "speed_std",
            "accel_mean",
            "accel_std",
        ] {
            push(format!("{joint}_{stat}"), FeatureCategory::Body);
        }
    }

    for d in &face_map.distances {
        push(format!("{}_mean", d.name), FeatureCategory::Face);
        push(format!("{}_std", d.name), FeatureCategory::Face);
    }
    for angle in ["pitch", "yaw", "roll"] {
        push(format!("head_{angle}_mean"), FeatureCategory::Face);
        push(format!("head_{angle}_std"), FeatureCategory::Face);
    }

    for (name, _) in lexicon.categories() {
        push(format!("lex_{name}"), FeatureCategory::Lexical);
    }

    Ok(FeatureSchema { names, categories })
}

fn in_any_window(windows: &[TimeWindow], t: f64) -> bool {
    windows.iter().any(|w| w.contains(t))
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Mean, min, max, range and population std; all five are 0 when no
/// samples fall in the windows.
fn five_stats(values: &[f64]) -> [f64; 5] {
    if values.is_empty() {
        return [0.0; 5];
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    [mean(values), min, max, max - min, population_std(values)]
}

/// Average word/filler/pause durations, their counts, and their count
/// proportions, over tokens whose midpoint falls in any window.
pub fn disfluency_features(
    transcript: &AlignedTranscript,
    windows: &[TimeWindow],
) -> [f64; DISFLUENCY_COUNT] {
    let mut durations: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for token in transcript.tokens() {
        if !in_any_window(windows, token.midpoint_s()) {
            continue;
        }
        let slot = match token.kind {
            TokenKind::Word => 0,
            TokenKind::Filler => 1,
            TokenKind::Pause => 2,
        };
        durations[slot].push(token.duration_s());
    }
    let total: usize = durations.iter().map(Vec::len).sum();
    let mut out = [0.0; DISFLUENCY_COUNT];
    for k in 0..3 {
        out[k] = mean(&durations[k]);
        out[3 + k] = durations[k].len() as f64;
        out[6 + k] = if total == 0 {
            0.0
        } else {
            durations[k].len() as f64 / total as f64
        };
    }
    out
}

/// Five summary stats for loudness, pitch and the first three formants
/// (pitch/formants over voiced frames only), plus the voiced-to-unvoiced
/// frame ratio.
pub fn prosody_features(track: &ProsodyTrack, windows: &[TimeWindow]) -> [f64; PROSODY_COUNT] {
    let mut loudness = Vec::new();
    let mut pitch = Vec::new();
    let mut formants: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut voiced_count = 0usize;
    let mut unvoiced_count = 0usize;
    for frame in track.frames() {
        if !in_any_window(windows, frame.t_s) {
            continue;
        }
        loudness.push(frame.loudness);
        if frame.voiced {
            voiced_count += 1;
            if let Some(p) = frame.pitch_hz {
                pitch.push(p);
            }
            for (slot, f) in [frame.f1_hz, frame.f2_hz, frame.f3_hz].iter().enumerate() {
                if let Some(v) = f {
                    formants[slot].push(*v);
                }
            }
        } else {
            unvoiced_count += 1;
        }
    }
    let mut out = [0.0; PROSODY_COUNT];
    out[0..5].copy_from_slice(&five_stats(&loudness));
    out[5..10].copy_from_slice(&five_stats(&pitch));
    for k in 0..3 {
        out[10 + 5 * k..15 + 5 * k].copy_from_slice(&five_stats(&formants[k]));
    }
    out[25] = voiced_count as f64 / unvoiced_count.max(1) as f64;
    out
}

/// Mean reference-relative position plus mean/std of speed and acceleration
/// magnitude for each tracked joint.
///
/// Derivatives are central differences scaled by the sample rate, one-sided
/// at window edges; windows shorter than 3 samples contribute no
/// speed/acceleration samples.
pub fn body_features(
    signal: &MultichannelSignal,
    layout: &JointLayout,
    windows: &[TimeWindow],
) -> Result<Vec<f64>> {
    layout.validate()?;
    if layout.n_channels() != signal.n_channels() {
        return Err(Error::Dimension(format!(
            "layout implies {} channels, signal has {}",
            layout.n_channels(),
            signal.n_channels()
        )));
    }
    let rate = signal.sample_rate_hz();
    let samples = signal.samples();
    let n = signal.n_samples();

    // Contiguous sample ranges per window.
    let mut ranges: Vec<(usize, usize)> = Vec::new();
    for w in windows {
        let lo = ((w.start_s * rate) - 1e-9).ceil().max(0.0) as usize;
        let hi = (((w.end_s * rate) - 1e-9).ceil().max(0.0) as usize).min(n);
        if lo < hi {
            ranges.push((lo, hi));
        }
    }

    let joint_xyz = |joint: usize, row: usize| -> [f64; 3] {
        [
            samples[[row, 3 * joint]],
            samples[[row, 3 * joint + 1]],
            samples[[row, 3 * joint + 2]],
        ]
    };
    let norm3 = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();

    let mut out = Vec::with_capacity(layout.tracked_joints.len() * 5);
    for &joint in &layout.tracked_joints {
        let mut positions = Vec::new();
        let mut speeds = Vec::new();
        let mut accels = Vec::new();
        for &(lo, hi) in &ranges {
            let len = hi - lo;
            let rel: Vec<[f64; 3]> = (lo..hi)
                .map(|row| {
                    let j = joint_xyz(joint, row);
                    let r = joint_xyz(layout.reference_joint, row);
                    [j[0] - r[0], j[1] - r[1], j[2] - r[2]]
                })
                .collect();
            positions.extend(rel.iter().map(|v| norm3(*v)));
            if len < 3 {
                continue;
            }
            let sub = |a: [f64; 3], b: [f64; 3], s: f64| {
                [(a[0] - b[0]) * s, (a[1] - b[1]) * s, (a[2] - b[2]) * s]
            };
            for i in 0..len {
                let v = if i == 0 {
                    sub(rel[1], rel[0], rate)
                } else if i == len - 1 {
                    sub(rel[len - 1], rel[len - 2], rate)
                } else {
                    sub(rel[i + 1], rel[i - 1], rate / 2.0)
                };
                speeds.push(norm3(v));

                let (p0, p1, p2) = if i == 0 {
                    (rel[0], rel[1], rel[2])
                } else if i == len - 1 {
                    (rel[len - 3], rel[len - 2], rel[len - 1])
                } else {
                    (rel[i - 1], rel[i], rel[i + 1])
                };
                let acc = [
                    (p2[0] - 2.0 * p1[0] + p0[0]) * rate * rate,
                    (p2[1] - 2.0 * p1[1] + p0[1]) * rate * rate,
                    (p2[2] - 2.0 * p1[2] + p0[2]) * rate * rate,
                ];
                accels.push(norm3(acc));
            }
        }
        out.push(mean(&positions));
        out.push(mean(&speeds));
        out.push(population_std(&speeds));
        out.push(mean(&accels));
        out.push(population_std(&accels));
    }
    Ok(out)
}

/// Mean/std of nine inter-eye-normalized landmark distances plus mean/std
/// of head pitch, yaw and roll.
///
/// Frames whose inter-eye distance is zero are skipped; if every frame is
/// skipped all features are 0.
pub fn face_features(
    track: &FaceTrack,
    windows: &[TimeWindow],
    face_map: &FaceMap,
) -> Result<[f64; FACE_COUNT]> {
    face_map.validate()?;
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut distances: Vec<Vec<f64>> = vec![Vec::new(); 9];
    let mut pitch = Vec::new();
    let mut yaw = Vec::new();
    let mut roll = Vec::new();
    for frame in track.frames() {
        if !in_any_window(windows, frame.t_s) {
            continue;
        }
        let inter_eye = dist(
            frame.landmarks[face_map.eye_left],
            frame.landmarks[face_map.eye_right],
        );
        if inter_eye == 0.0 {
            continue;
        }
        for (slot, d) in face_map.distances.iter().enumerate() {
            distances[slot].push(dist(frame.landmarks[d.a], frame.landmarks[d.b]) / inter_eye);
        }
        pitch.push(frame.pitch);
        yaw.push(frame.yaw);
        roll.push(frame.roll);
    }
    let mut out = [0.0; FACE_COUNT];
    for (slot, values) in distances.iter().enumerate() {
        out[2 * slot] = mean(values);
        out[2 * slot + 1] = population_std(values);
    }
    for (k, values) in [&pitch, &yaw, &roll].iter().enumerate() {
        out[18 + 2 * k] = mean(values);
        out[19 + 2 * k] = population_std(values);
    }
    Ok(out)
}

/// Per-category counts of in-window word tokens matching any stem.
/// A word matching stems in several categories increments each of them.
pub fn lexical_features(
    transcript: &AlignedTranscript,
    lexicon: &CategoryLexicon,
    windows: &[TimeWindow],
) -> Vec<f64> {
    let mut counts = vec![0.0; lexicon.len()];
    for token in transcript.tokens() {
        if token.kind != TokenKind::Word || !in_any_window(windows, token.midpoint_s()) {
            continue;
        }
        for idx in 0..lexicon.len() {
            if lexicon.matches(idx, &token.text) {
                counts[idx] += 1.0;
            }
        }
    }
    counts
}

/// The input tracks of one video.
pub struct TrackBundle<'a> {
    pub signal: &'a MultichannelSignal,
    pub transcript: &'a AlignedTranscript,
    pub prosody: &'a ProsodyTrack,
    pub face: &'a FaceTrack,
}

/// Computes one full feature row for a pattern by pooling all of its
/// occurrence windows into a single sample set.
pub fn assemble_pattern_row(
    tracks: &TrackBundle,
    layout: &JointLayout,
    face_map: &FaceMap,
    lexicon: &CategoryLexicon,
    windows: &[TimeWindow],
) -> Result<Vec<f64>> {
    if windows.is_empty() {
        return Err(Error::Invalid(
            "a pattern needs at least one occurrence window".into(),
        ));
    }
    let mut row = Vec::new();
    row.extend_from_slice(&disfluency_features(tracks.transcript, windows));
    row.extend_from_slice(&prosody_features(tracks.prosody, windows));
    row.extend(body_features(tracks.signal, layout, windows)?);
    row.extend_from_slice(&face_features(tracks.face, windows, face_map)?);
    row.extend(lexical_features(tracks.transcript, lexicon, windows));
    Ok(row)
}

/// One feature row per (video, pattern) pair, with a shared column schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub schema: FeatureSchema,
    /// Row keys, aligned with the rows of `values`.
    pub keys: Vec<(String, u32)>,
    pub values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(
        schema: FeatureSchema,
        keys: Vec<(String, u32)>,
        values: Array2<f64>,
    ) -> Result<Self> {
        if values.nrows() != keys.len() {
            return Err(Error::Dimension(format!(
                "{} keys for {} rows",
                keys.len(),
                values.nrows()
            )));
        }
        if values.ncols() != schema.len() {
            return Err(Error::Dimension(format!(
                "{} columns for schema of {}",
                values.ncols(),
                schema.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("feature matrix has a non-finite value".into()));
        }
        Ok(FeatureMatrix {
            schema,
            keys,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }
}

/// Per-column affine transform learned by [`zscore_normalize`].
///
/// Columns that were constant at fit time store `std = 0` and always map
/// to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Normalization {
    /// Learns per-column mean and population std from raw rows.
    pub fn fit(x: &ArrayView2<f64>) -> Result<Self> {
        if x.nrows() < 2 {
            return Err(Error::Invalid(format!(
                "z-score normalization needs at least 2 rows, got {}",
                x.nrows()
            )));
        }
        let n = x.nrows() as f64;
        let mut means = Vec::with_capacity(x.ncols());
        let mut stds = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let std = var.sqrt();
            means.push(m);
            // Constant columns (up to roundoff) are flagged with std 0.
            stds.push(if std <= 1e-12 * m.abs().max(1.0) { 0.0 } else { std });
        }
        Ok(Normalization { means, stds })
    }

    pub fn apply(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.means.len() {
            return Err(Error::Dimension(format!(
                "normalization fitted on {} columns, applied to {}",
                self.means.len(),
                x.ncols()
            )));
        }
        let mut out = Array2::zeros(x.raw_dim());
        for j in 0..x.ncols() {
            let (m, s) = (self.means[j], self.stds[j]);
            for i in 0..x.nrows() {
                out[[i, j]] = if s == 0.0 { 0.0 } else { (x[[i, j]] - m) / s };
            }
        }
        Ok(out)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("normalization serializes");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, 1, e.to_string()))
    }
}

/// Z-scores every column of the matrix (population std), mapping constant
/// columns to all-zeros, and returns the transform for later application
/// to held-out rows.
pub fn zscore_normalize(matrix: &FeatureMatrix) -> Result<(FeatureMatrix, Normalization)> {
    let params = Normalization::fit(&matrix.values.view())?;
    let values = params.apply(&matrix.values.view())?;
    Ok((
        FeatureMatrix {
            schema: matrix.schema.clone(),
            keys: matrix.keys.clone(),
            values,
        },
        params,
    ))
}

/// Writes a feature matrix as CSV with a `name:category` manifest header:
/// `video_id,pattern_id,<name:category>,...`.
pub fn write_feature_matrix(path: impl AsRef<Path>, matrix: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("video_id,pattern_id");
    for (name, cat) in matrix.schema.names.iter().zip(&matrix.schema.categories) {
        let _ = write!(out, ",{name}:{}", cat.as_str());
    }
    out.push('\n');
    for (key, row) in matrix.keys.iter().zip(matrix.values.rows()) {
        let _ = write!(out, "{},{}", key.0, key.1);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_feature_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "video_id" || cols[1] != "pattern_id" {
        return Err(Error::parse(
            path,
            1,
            "expected `video_id,pattern_id,<name:category>,...`",
        ));
    }
    let mut names = Vec::new();
    let mut categories = Vec::new();
    for col in &cols[2..] {
        let (name, cat) = col
            .rsplit_once(':')
            .ok_or_else(|| Error::parse(path, 1, format!("column `{col}` lacks a category tag")))?;
        let cat = FeatureCategory::parse(cat)
            .ok_or_else(|| Error::parse(path, 1, format!("unknown category in `{col}`")))?;
        names.push(name.to_string());
        categories.push(cat);
    }
    let schema = FeatureSchema { names, categories };

    let mut keys = Vec::new();
    let mut values = Vec::new();
    let mut n_rows = 0;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("expected {} fields, found {}", cols.len(), fields.len()),
            ));
        }
        let pattern_id: u32 = fields[1]
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, "invalid pattern id"))?;
        keys.push((fields[0].to_string(), pattern_id));
        for f in &fields[2..] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(path, idx + 1, format!("invalid number `{f}`")))?;
            values.push(v);
        }
        n_rows += 1;
    }
    let values = Array2::from_shape_vec((n_rows, schema.len()), values)
        .expect("row-major layout matches collected values");
    FeatureMatrix::new(schema, keys, values)
}
