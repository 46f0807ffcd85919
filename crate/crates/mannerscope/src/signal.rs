//! Core time-series and annotation data types, plus readers/writers for the
//! documented input file formats.
//!
//! All types here are immutable after construction and safe to share across
//! threads; the loaders are pure functions of file content.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A half-open time interval `[start_s, end_s)` in seconds.
///
/// Half-open membership makes adjacent windows partition time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub start_s: f64,
    pub end_s: f64,
}

impl TimeWindow {
    pub fn new(start_s: f64, end_s: f64) -> Self {
        TimeWindow { start_s, end_s }
    }

    pub fn contains(&self, t_s: f64) -> bool {
        t_s >= self.start_s && t_s < self.end_s
    }
}

/// Sampled C-channel real-valued sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSignal {
    samples: Array2<f64>,
    sample_rate_hz: f64,
    channel_names: Vec<String>,
}

impl MultichannelSignal {
    pub fn new(
        samples: Array2<f64>,
        sample_rate_hz: f64,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::Invalid("signal must have N >= 1 and C >= 1".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Invalid(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if channel_names.len() != samples.ncols() {
            return Err(Error::Invalid(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                samples.ncols()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("signal contains a non-finite value".into()));
        }
        Ok(MultichannelSignal {
            samples,
            sample_rate_hz,
            channel_names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    /// Timestamp of sample `n` in seconds.
    pub fn timestamp_s(&self, n: usize) -> f64 {
        n as f64 / self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate_hz
    }
}

/// Loads a signal from the CSV format:
/// line 1 `sample_rate_hz=<float>`, line 2 comma-separated channel names,
/// then one row of C floats per sample.
pub fn load_signal(path: impl AsRef<Path>) -> Result<MultichannelSignal> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let rate: f64 = header
        .strip_prefix("sample_rate_hz=")
        .ok_or_else(|| Error::parse(path, 1, "expected `sample_rate_hz=<float>`"))?
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, 1, "invalid sample rate"))?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::parse(path, 1, "sample rate must be positive"));
    }

    let (_, names_line) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 2, "missing channel-name line"))?;
    let names: Vec<String> = names_line.split(',').map(|s| s.trim().to_string()).collect();
    let n_channels = names.len();

    let mut values: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_channels {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("expected {} values, found {}", n_channels, fields.len()),
            ));
        }
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, idx + 1, format!("invalid number `{f}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, idx + 1, "non-finite value"));
            }
            values.push(v);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::parse(path, 3, "signal has no sample rows"));
    }
    let samples = Array2::from_shape_vec((n_rows, n_channels), values)
        .expect("row-major layout matches collected values");
    MultichannelSignal::new(samples, rate, names)
}

/// Writes a signal in the same CSV format `load_signal` reads.
///
/// Floats are written in shortest round-trip form, so write-then-load
/// reproduces the signal exactly.
pub fn write_signal(path: impl AsRef<Path>, signal: &MultichannelSignal) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(out, "sample_rate_hz={}", signal.sample_rate_hz());
    let _ = writeln!(out, "{}", signal.channel_names().join(","));
    for row in signal.samples().rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Skeleton channel layout: which joints exist, which is the reference
/// point, and which joints feed the movement features.
///
/// Joint `j` occupies channels `3j..3j+3` (x, y, z).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointLayout {
    pub joint_names: Vec<String>,
    pub reference_joint: usize,
    pub tracked_joints: Vec<usize>,
}

impl JointLayout {
    pub fn validate(&self) -> Result<()> {
        let n = self.joint_names.len();
        if n == 0 {
            return Err(Error::Invalid("joint layout has no joints".into()));
        }
        if self.reference_joint >= n {
            return Err(Error::Invalid(format!(
                "reference joint {} out of range ({} joints)",
                self.reference_joint, n
            )));
        }
        if self.tracked_joints.len() != 8 {
            return Err(Error::Invalid(format!(
                "expected 8 tracked joints (elbows, wrists, knees, ankles), got {}",
                self.tracked_joints.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for &j in &self.tracked_joints {
            if j >= n {
                return Err(Error::Invalid(format!("tracked joint {j} out of range")));
            }
            if !seen.insert(j) {
                return Err(Error::Invalid(format!("tracked joint {j} listed twice")));
            }
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.joint_names.len() * 3
    }

    /// The 20-joint skeleton produced by common depth-sensor trackers.
    pub fn kinect_v1() -> Self {
        let names = [
            "hip_center",
            "spine",
            "shoulder_center",
            "head",
            "shoulder_left",
            "elbow_left",
            "wrist_left",
            "hand_left",
            "shoulder_right",
            "elbow_right",
            "wrist_right",
            "hand_right",
            "hip_left",
            "knee_left",
            "ankle_left",
            "foot_left",
            "hip_right",
            "knee_right",
            "ankle_right",
            "foot_right",
        ];
        JointLayout {
            joint_names: names.iter().map(|s| s.to_string()).collect(),
            reference_joint: 0,
            tracked_joints: vec![5, 9, 6, 10, 13, 17, 14, 18],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Filler,
    Pause,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start_s: f64,
    pub end_s: f64,
    pub kind: TokenKind,
}

impl Token {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn midpoint_s(&self) -> f64 {
        0.5 * (self.start_s + self.end_s)
    }
}

/// Word/filler/pause tokens with aligned start and end times.
///
/// Pauses are explicit tokens in the file, not inferred from gaps.
#[derive(Debug, Clone)]
pub struct AlignedTranscript {
    tokens: Vec<Token>,
}

impl AlignedTranscript {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        for (i, t) in tokens.iter().enumerate() {
            if !(t.start_s.is_finite() && t.end_s.is_finite() && t.start_s < t.end_s) {
                return Err(Error::Invalid(format!(
                    "token {i} (`{}`) has invalid times [{}, {})",
                    t.text, t.start_s, t.end_s
                )));
            }
            if i > 0 && t.start_s < tokens[i - 1].end_s {
                return Err(Error::Invalid(format!(
                    "token {i} (`{}`) overlaps or precedes the previous token",
                    t.text
                )));
            }
        }
        Ok(AlignedTranscript { tokens })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }
}

/// Loads a transcript from JSON-lines: one object per token with keys
/// `text`, `start_s`, `end_s`, `kind`.
pub fn load_transcript(path: impl AsRef<Path>) -> Result<AlignedTranscript> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut tokens = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let token: Token = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        tokens.push(token);
    }
    AlignedTranscript::new(tokens)
}

pub fn write_transcript(path: impl AsRef<Path>, transcript: &AlignedTranscript) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for token in transcript.tokens() {
        let line = serde_json::to_string(token).expect("token serializes");
        let _ = writeln!(out, "{line}");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProsodyFrame {
    pub t_s: f64,
    pub loudness: f64,
    pub pitch_hz: Option<f64>,
    pub f1_hz: Option<f64>,
    pub f2_hz: Option<f64>,
    pub f3_hz: Option<f64>,
    pub voiced: bool,
}

/// Frame-level loudness/pitch/formant track.
#[derive(Debug, Clone)]
pub struct ProsodyTrack {
    frames: Vec<ProsodyFrame>,
}

impl ProsodyTrack {
    pub fn new(frames: Vec<ProsodyFrame>) -> Result<Self> {
        for (i, f) in frames.iter().enumerate() {
            if i > 0 && f.t_s <= frames[i - 1].t_s {
                return Err(Error::Invalid(format!(
                    "prosody timestamps must be strictly increasing (frame {i})"
                )));
            }
            if f.pitch_hz.is_some() != f.voiced {
                return Err(Error::Invalid(format!(
                    "frame {i}: pitch must be present iff the frame is voiced"
                )));
            }
        }
        Ok(ProsodyTrack { frames })
    }

    pub fn frames(&self) -> &[ProsodyFrame] {
        &self.frames
    }
}

const PROSODY_HEADER: &str = "t_s,loudness,pitch_hz,f1_hz,f2_hz,f3_hz,voiced";

/// Loads a prosody track from CSV with columns
/// `t_s,loudness,pitch_hz,f1_hz,f2_hz,f3_hz,voiced`; pitch and formant
/// fields are empty when absent, `voiced` is 0/1.
pub fn load_prosody(path: impl AsRef<Path>) -> Result<ProsodyTrack> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    if header.trim() != PROSODY_HEADER {
        return Err(Error::parse(path, 1, format!("expected header `{PROSODY_HEADER}`")));
    }

    let opt = |s: &str, idx: usize| -> Result<Option<f64>> {
        let s = s.trim();
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| Error::parse(path, idx + 1, format!("invalid number `{s}`")))
        }
    };

    let mut frames = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::parse(path, idx + 1, "expected 7 columns"));
        }
        let t_s: f64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, "invalid t_s"))?;
        let loudness: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, "invalid loudness"))?;
        let voiced = match fields[6].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::parse(path, idx + 1, format!("invalid voiced flag `{other}`")))
            }
        };
        frames.push(ProsodyFrame {
            t_s,
            loudness,
            pitch_hz: opt(fields[2], idx)?,
            f1_hz: opt(fields[3], idx)?,
            f2_hz: opt(fields[4], idx)?,
            f3_hz: opt(fields[5], idx)?,
            voiced,
        });
    }
    ProsodyTrack::new(frames)
}

pub fn write_prosody(path: impl AsRef<Path>, track: &ProsodyTrack) -> Result<()> {
    let path = path.as_ref();
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from(PROSODY_HEADER);
    out.push('\n');
    for f in track.frames() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            f.t_s,
            f.loudness,
            fmt(f.pitch_hz),
            fmt(f.f1_hz),
            fmt(f.f2_hz),
            fmt(f.f3_hz),
            u8::from(f.voiced)
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub const FACE_LANDMARKS: usize = 66;

#[derive(Debug, Clone, PartialEq)]
pub struct FaceFrame {
    pub t_s: f64,
    /// 66 (x, y) pixel coordinates.
    pub landmarks: Vec<[f64; 2]>,
    /// Head pose in radians.
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

/// Tracked facial landmarks plus head pose per frame.
#[derive(Debug, Clone)]
pub struct FaceTrack {
    frames: Vec<FaceFrame>,
}

impl FaceTrack {
    pub fn new(frames: Vec<FaceFrame>) -> Result<Self> {
        for (i, f) in frames.iter().enumerate() {
            if f.landmarks.len() != FACE_LANDMARKS {
                return Err(Error::Invalid(format!(
                    "face frame {i} has {} landmarks, expected {FACE_LANDMARKS}",
                    f.landmarks.len()
                )));
            }
            if i > 0 && f.t_s <= frames[i - 1].t_s {
                return Err(Error::Invalid(format!(
                    "face timestamps must be strictly increasing (frame {i})"
                )));
            }
        }
        Ok(FaceTrack { frames })
    }

    pub fn frames(&self) -> &[FaceFrame] {
        &self.frames
    }
}

fn face_header() -> String {
    let mut h = String::from("t_s");
    for i in 0..FACE_LANDMARKS {
        let _ = write!(h, ",x{i},y{i}");
    }
    h.push_str(",pitch,yaw,roll");
    h
}

/// Loads a face track from CSV with columns `t_s,x0,y0,...,x65,y65,pitch,yaw,roll`.
pub fn load_face(path: impl AsRef<Path>) -> Result<FaceTrack> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    if header.trim() != face_header() {
        return Err(Error::parse(path, 1, "unexpected face CSV header"));
    }
    let expected = 1 + 2 * FACE_LANDMARKS + 3;
    let mut frames = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("expected {expected} columns, found {}", fields.len()),
            ));
        }
        let mut nums = Vec::with_capacity(expected);
        for f in &fields {
            nums.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, idx + 1, format!("invalid number `{f}`")))?,
            );
        }
        let landmarks = (0..FACE_LANDMARKS)
            .map(|i| [nums[1 + 2 * i], nums[2 + 2 * i]])
            .collect();
        frames.push(FaceFrame {
            t_s: nums[0],
            landmarks,
            pitch: nums[expected - 3],
            yaw: nums[expected - 2],
            roll: nums[expected - 1],
        });
    }
    FaceTrack::new(frames)
}

pub fn write_face(path: impl AsRef<Path>, track: &FaceTrack) -> Result<()> {
    let path = path.as_ref();
    let mut out = face_header();
    out.push('\n');
    for f in track.frames() {
        let _ = write!(out, "{}", f.t_s);
        for p in &f.landmarks {
            let _ = write!(out, ",{},{}", p[0], p[1]);
        }
        let _ = writeln!(out, ",{},{},{}", f.pitch, f.yaw, f.roll);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnnotationSource {
    /// The speaker rated their own pattern.
    SelfRated,
    /// Averaged rating from several independent viewers.
    CrowdAverage,
}

impl AnnotationSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            AnnotationSource::SelfRated => "self",
            AnnotationSource::CrowdAverage => "crowd_average",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "self" => Some(AnnotationSource::SelfRated),
            "crowd_average" => Some(AnnotationSource::CrowdAverage),
            _ => None,
        }
    }
}

/// One meaningfulness rating for one pattern of one video.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub video_id: String,
    pub pattern_id: u32,
    /// Seven-point scale, 1 = not meaningful, 7 = very meaningful.
    pub rating: u8,
    pub source: AnnotationSource,
}

impl AnnotationRecord {
    pub fn new(video_id: String, pattern_id: u32, rating: u8, source: AnnotationSource) -> Result<Self> {
        if !(1..=7).contains(&rating) {
            return Err(Error::Invalid(format!("rating {rating} outside 1..=7")));
        }
        Ok(AnnotationRecord {
            video_id,
            pattern_id,
            rating,
            source,
        })
    }
}

const ANNOTATION_HEADER: &str = "video_id,pattern_id,rating,source";

/// Loads annotations from CSV with columns `video_id,pattern_id,rating,source`.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    if header.trim() != ANNOTATION_HEADER {
        return Err(Error::parse(path, 1, format!("expected header `{ANNOTATION_HEADER}`")));
    }
    let mut records = Vec::new();
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
        let rating: i64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, "invalid rating"))?;
        if !(1..=7).contains(&rating) {
            return Err(Error::parse(path, idx + 1, format!("rating {rating} outside 1..=7")));
        }
        let source = AnnotationSource::parse(fields[3].trim()).ok_or_else(|| {
            Error::parse(path, idx + 1, format!("unknown source tag `{}`", fields[3].trim()))
        })?;
        records.push(AnnotationRecord {
            video_id: fields[0].trim().to_string(),
            pattern_id,
            rating: rating as u8,
            source,
        });
    }
    Ok(records)
}

pub fn write_annotations(path: impl AsRef<Path>, records: &[AnnotationRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(ANNOTATION_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.video_id,
            r.pattern_id,
            r.rating,
            r.source.as_str()
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Collapses several 1..7 ratings for one pattern into one crowd rating:
/// arithmetic mean, rounded half-up, clamped to [1, 7].
pub fn quantize_crowd_ratings(ratings: &[u8]) -> Result<u8> {
    if ratings.is_empty() {
        return Err(Error::Invalid("cannot quantize an empty rating list".into()));
    }
    for &r in ratings {
        if !(1..=7).contains(&r) {
            return Err(Error::Invalid(format!("rating {r} outside 1..=7")));
        }
    }
    let mean = ratings.iter().map(|&r| f64::from(r)).sum::<f64>() / ratings.len() as f64;
    let rounded = (mean + 0.5).floor();
    Ok(rounded.clamp(1.0, 7.0) as u8)
}

/// Word-category dictionary: each category maps to a list of lowercase
/// stems; a stem ending in `*` matches any word with that prefix.
#[derive(Debug, Clone)]
pub struct CategoryLexicon {
    categories: Vec<(String, Vec<String>)>,
}

impl CategoryLexicon {
    pub fn new(categories: Vec<(String, Vec<String>)>) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::Invalid("lexicon must have at least one category".into()));
        }
        let mut seen = std::collections::HashSet::new();
        let mut normalized = Vec::with_capacity(categories.len());
        for (name, stems) in categories {
            if !seen.insert(name.clone()) {
                return Err(Error::Invalid(format!("duplicate lexicon category `{name}`")));
            }
            let mut lowered = Vec::with_capacity(stems.len());
            for stem in stems {
                let stem = stem.to_lowercase();
                if stem.is_empty() || stem == "*" {
                    return Err(Error::Invalid(format!("empty stem in category `{name}`")));
                }
                lowered.push(stem);
            }
            normalized.push((name, lowered));
        }
        Ok(CategoryLexicon {
            categories: normalized,
        })
    }

    pub fn categories(&self) -> &[(String, Vec<String>)] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// Does `word` (case-insensitive) match any stem of category `idx`?
    pub fn matches(&self, idx: usize, word: &str) -> bool {
        let word = word.to_lowercase();
        self.categories[idx].1.iter().any(|stem| {
            if let Some(prefix) = stem.strip_suffix('*') {
                word.starts_with(prefix)
            } else {
                word == *stem
            }
        })
    }
}

/// Loads a lexicon from lines of the form `category: stem1 stem2 ...`.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<CategoryLexicon> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut categories = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(path, idx + 1, "expected `category: stem1 stem2 ...`"))?;
        let stems: Vec<String> = rest.split_whitespace().map(|s| s.to_string()).collect();
        if stems.is_empty() {
            return Err(Error::parse(path, idx + 1, "category has no stems"));
        }
        categories.push((name.trim().to_string(), stems));
    }
    CategoryLexicon::new(categories).map_err(|e| match e {
        Error::Invalid(msg) => Error::parse(path, 1, msg),
        other => other,
    })
}

pub fn write_lexicon(path: impl AsRef<Path>, lexicon: &CategoryLexicon) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (name, stems) in lexicon.categories() {
        let _ = writeln!(out, "{name}: {}", stems.join(" "));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
