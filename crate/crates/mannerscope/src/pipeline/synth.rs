//! Seeded synthetic-fixture generators: planted-pattern signals for solver
//! recovery checks, feature matrices with planted linear structure for the
//! evaluation protocol, and a complete demo project for end-to-end runs.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{feature_schema, FeatureCategory, FeatureMatrix, FaceMap};
use crate::signal::{
    write_annotations, write_face, write_lexicon, write_prosody, write_signal, write_transcript,
    AlignedTranscript, AnnotationRecord, AnnotationSource, CategoryLexicon, FaceFrame, FaceTrack,
    JointLayout, MultichannelSignal, ProsodyFrame, ProsodyTrack, Token, TokenKind,
    FACE_LANDMARKS,
};
use crate::sisc::{reconstruct, ActivationSet, PatternDictionary};
use crate::seed;

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Parameters of a planted-pattern signal fixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiscParams {
    pub n_samples: usize,
    pub n_channels: usize,
    pub n_patterns: usize,
    pub pattern_len: usize,
    pub occurrences_per_pattern: usize,
    pub noise_sigma: f64,
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    pub sample_rate_hz: f64,
}

impl Default for SiscParams {
    fn default() -> Self {
        SiscParams {
            n_samples: 3000,
            n_channels: 6,
            n_patterns: 2,
            pattern_len: 30,
            occurrences_per_pattern: 10,
            noise_sigma: 0.01,
            amplitude_min: 1.5,
            amplitude_max: 2.5,
            sample_rate_hz: 30.0,
        }
    }
}

impl SiscParams {
    pub fn validate(&self) -> Result<()> {
        if self.pattern_len < 2 || self.n_channels == 0 || self.n_patterns == 0 {
            return Err(Error::Invalid("degenerate fixture dimensions".into()));
        }
        let slots = self.n_patterns * self.occurrences_per_pattern;
        // starts at least 2M apart need a span of 2M(k-1), plus M to fit
        // the final occurrence
        if 2 * self.pattern_len * (slots - 1) + self.pattern_len > self.n_samples {
            return Err(Error::Invalid(format!(
                "{} samples cannot hold {} occurrences of length {} at 2x separation",
                self.n_samples, slots, self.pattern_len
            )));
        }
        if self.noise_sigma < 0.0 || self.amplitude_min <= 0.0 || self.amplitude_max < self.amplitude_min {
            return Err(Error::Invalid("bad noise/amplitude parameters".into()));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::Invalid("sample rate must be positive".into()));
        }
        Ok(())
    }
}

/// The planted ground truth written next to a generated signal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiscTruth {
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    pub n_channels: usize,
    pub pattern_len: usize,
    /// Row-major pattern tensors, unit Frobenius norm.
    pub patterns: Vec<Vec<f64>>,
    /// (pattern, start index, amplitude) per planted occurrence.
    pub impulses: Vec<(usize, usize, f64)>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SiscTruth {
    pub fn dictionary(&self) -> Result<PatternDictionary> {
        let patterns = self
            .patterns
            .iter()
            .map(|flat| {
                Array2::from_shape_vec((self.pattern_len, self.n_channels), flat.clone())
                    .map_err(|_| Error::Invalid("pattern shape mismatch in truth file".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        PatternDictionary::new(patterns, self.sample_rate_hz)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("truth serializes");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, 1, e.to_string()))
    }
}

/// Smooth unit-norm pattern: a few random sinusoids per channel under a
/// Hann window, so shifted copies overlap themselves well.
fn random_pattern(rng: &mut ChaCha8Rng, m: usize, c: usize) -> Array2<f64> {
    let mut pattern = Array2::<f64>::zeros((m, c));
    for ch in 0..c {
        let k1 = rng.gen_range(1.0..3.0);
        let k2 = rng.gen_range(3.0..6.0);
        let p1 = rng.gen_range(0.0..std::f64::consts::TAU);
        let p2 = rng.gen_range(0.0..std::f64::consts::TAU);
        let a1 = rng.gen_range(0.5..1.0);
        let a2 = rng.gen_range(0.1..0.5);
        for i in 0..m {
            let t = i as f64 / m as f64;
            let hann = (std::f64::consts::PI * (i as f64 + 0.5) / m as f64).sin().powi(2);
            pattern[[i, ch]] = hann
                * (a1 * (std::f64::consts::TAU * k1 * t + p1).sin()
                    + a2 * (std::f64::consts::TAU * k2 * t + p2).sin());
        }
    }
    let norm = pattern.iter().map(|v| v * v).sum::<f64>().sqrt();
    pattern.mapv(|v| v / norm)
}

/// Generates a signal as planted patterns convolved with sparse impulse
/// trains plus Gaussian noise. Impulses are separated by at least twice the
/// pattern length.
pub fn generate_sisc(
    params: &SiscParams,
    seed_value: u64,
) -> Result<(MultichannelSignal, SiscTruth)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed_value, &[seed::hash_label("sisc")]));
    let m = params.pattern_len;
    let c = params.n_channels;
    let n = params.n_samples;

    let patterns: Vec<Array2<f64>> = (0..params.n_patterns)
        .map(|_| random_pattern(&mut rng, m, c))
        .collect();

    // occurrence starts at least 2M apart: lay k slots on a 2M grid and
    // spread them with sorted random offsets over the leftover slack
    let total_slots = params.n_patterns * params.occurrences_per_pattern;
    let last_start = n - m;
    let slack = last_start - 2 * m * (total_slots - 1);
    let mut offsets: Vec<usize> = (0..total_slots)
        .map(|_| rng.gen_range(0..=slack))
        .collect();
    offsets.sort_unstable();
    let slots: Vec<usize> = offsets
        .iter()
        .enumerate()
        .map(|(k, off)| k * 2 * m + off)
        .collect();
    // deal slots to patterns round-robin after a shuffle so each pattern's
    // occurrences spread over the whole signal
    let mut assignment: Vec<usize> = (0..total_slots)
        .map(|k| k % params.n_patterns)
        .collect();
    assignment.shuffle(&mut rng);

    let mut trains = vec![Array1::<f64>::zeros(n); params.n_patterns];
    let mut impulses = Vec::with_capacity(total_slots);
    for (slot, pattern_id) in slots.iter().zip(&assignment) {
        let amplitude = rng.gen_range(params.amplitude_min..params.amplitude_max);
        trains[*pattern_id][*slot] = amplitude;
        impulses.push((*pattern_id, *slot, amplitude));
    }

    let dict = PatternDictionary::new(patterns.clone(), params.sample_rate_hz)?;
    let acts = ActivationSet::new(trains)?;
    let clean = reconstruct(&dict, &acts, n)?;
    let noisy = clean.mapv(|v| v)
        + Array2::from_shape_fn((n, c), |_| params.noise_sigma * standard_normal(&mut rng));
    let names = (0..c).map(|i| format!("c{i}")).collect();
    let signal = MultichannelSignal::new(noisy, params.sample_rate_hz, names)?;

    let truth = SiscTruth {
        sample_rate_hz: params.sample_rate_hz,
        n_samples: n,
        n_channels: c,
        pattern_len: m,
        patterns: patterns.iter().map(|p| p.iter().cloned().collect()).collect(),
        impulses,
        noise_sigma: params.noise_sigma,
        seed: seed_value,
    };
    Ok((signal, truth))
}

/// Parameters of a planted-structure feature-matrix fixture.
///
/// Crowd ratings follow a linear score over a handful of non-lexical
/// columns; self ratings follow a linear score over lexical columns. A
/// strength of 0 makes the corresponding ratings pure noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationParams {
    pub rows: usize,
    pub crowd_strength: f64,
    pub self_strength: f64,
    pub noise: f64,
}

impl Default for ClassificationParams {
    fn default() -> Self {
        ClassificationParams {
            rows: 300,
            crowd_strength: 2.0,
            self_strength: 1.0,
            noise: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationTruth {
    pub crowd_columns: Vec<usize>,
    pub self_columns: Vec<usize>,
    pub crowd_strength: f64,
    pub self_strength: f64,
    pub noise: f64,
    pub seed: u64,
}

/// Sorts scores into seven equal-count bins; returns a 1..=7 rating per row.
fn rank_binned_ratings(scores: &[f64]) -> Vec<u8> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
    let mut ratings = vec![0u8; n];
    for (rank, &idx) in order.iter().enumerate() {
        ratings[idx] = (rank * 7 / n) as u8 + 1;
    }
    ratings
}

/// Generates a feature matrix over the canonical 122-column schema with
/// separately planted crowd and self rating structure.
pub fn generate_classification(
    params: &ClassificationParams,
    seed_value: u64,
) -> Result<(FeatureMatrix, Vec<AnnotationRecord>, ClassificationTruth)> {
    if params.rows < 14 {
        return Err(Error::Invalid("need at least 14 rows (two per rating bin)".into()));
    }
    if params.noise < 0.0 || params.crowd_strength < 0.0 || params.self_strength < 0.0 {
        return Err(Error::Invalid("strengths and noise must be nonnegative".into()));
    }
    let schema = feature_schema(&demo_layout(), &FaceMap::standard_66(), &demo_lexicon())?;
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed::derive(seed_value, &[seed::hash_label("classification")]));
    let n = params.rows;
    let d = schema.len();
    let x = Array2::from_shape_fn((n, d), |_| standard_normal(&mut rng));

    // three driver columns from each non-lexical category for the crowd
    // score, three lexical columns for the self score
    let columns_of = |cat: FeatureCategory| -> Vec<usize> {
        schema
            .categories
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == cat)
            .map(|(i, _)| i)
            .collect()
    };
    let mut crowd_columns = Vec::new();
    for cat in [
        FeatureCategory::Disfluency,
        FeatureCategory::Prosody,
        FeatureCategory::Body,
        FeatureCategory::Face,
    ] {
        crowd_columns.extend(columns_of(cat).into_iter().take(3));
    }
    let self_columns: Vec<usize> = columns_of(FeatureCategory::Lexical).into_iter().take(3).collect();

    let mut crowd_scores = Vec::with_capacity(n);
    let mut self_scores = Vec::with_capacity(n);
    for i in 0..n {
        let crowd_signal: f64 = crowd_columns.iter().map(|&j| x[[i, j]]).sum();
        let self_signal: f64 = self_columns.iter().map(|&j| x[[i, j]]).sum();
        crowd_scores
            .push(params.crowd_strength * crowd_signal + params.noise * standard_normal(&mut rng));
        self_scores
            .push(params.self_strength * self_signal + params.noise * standard_normal(&mut rng));
    }
    let crowd_ratings = rank_binned_ratings(&crowd_scores);
    let self_ratings = rank_binned_ratings(&self_scores);

    let keys: Vec<(String, u32)> = (0..n).map(|i| ("synth".to_string(), i as u32)).collect();
    let matrix = FeatureMatrix::new(schema, keys, x)?;
    let mut annotations = Vec::with_capacity(2 * n);
    for i in 0..n {
        annotations.push(AnnotationRecord::new(
            "synth".into(),
            i as u32,
            crowd_ratings[i],
            AnnotationSource::CrowdAverage,
        )?);
        annotations.push(AnnotationRecord::new(
            "synth".into(),
            i as u32,
            self_ratings[i],
            AnnotationSource::SelfRated,
        )?);
    }
    let truth = ClassificationTruth {
        crowd_columns,
        self_columns,
        crowd_strength: params.crowd_strength,
        self_strength: params.self_strength,
        noise: params.noise,
        seed: seed_value,
    };
    Ok((matrix, annotations, truth))
}

/// A compact 10-joint layout for demos and fixtures: reference torso plus
/// the eight tracked limb joints and the head.
pub fn demo_layout() -> JointLayout {
    let names = [
        "torso",
        "elbow_left",
        "elbow_right",
        "wrist_left",
        "wrist_right",
        "knee_left",
        "knee_right",
        "ankle_left",
        "ankle_right",
        "head",
    ];
    JointLayout {
        joint_names: names.iter().map(|s| s.to_string()).collect(),
        reference_joint: 0,
        tracked_joints: vec![1, 2, 3, 4, 5, 6, 7, 8],
    }
}

/// A self-contained 23-category word lexicon in the spirit of the usual
/// psycholinguistic category inventories.
pub fn demo_lexicon() -> CategoryLexicon {
    let raw: [(&str, &str); 23] = [
        ("pronoun", "i we you they them he she it"),
        ("article", "a an the"),
        ("negate", "no not never none cannot"),
        ("quant", "few many much lots every all some"),
        ("social", "talk* friend* family people person"),
        ("family", "mother father brother sister parent*"),
        ("posemo", "happ* good great love* nice best"),
        ("negemo", "sad bad hate* awful worst hurt*"),
        ("anx", "worr* nervous afraid fear* anxious"),
        ("anger", "angr* mad furious annoy*"),
        ("insight", "think* know* realiz* understand*"),
        ("cause", "because cause* effect* hence therefore"),
        ("tentat", "maybe perhaps guess* seem* possibl*"),
        ("certain", "always definitely certain* sure never"),
        ("percept", "see* hear* feel* watch* look*"),
        ("body", "hand* arm* leg* head face body"),
        ("motion", "walk* move* run* go going went"),
        ("space", "here there above below around inside"),
        ("time", "now then today yesterday soon while"),
        ("work", "work* job* school* study* project*"),
        ("leisure", "play* game* movie* book* music"),
        ("filler2", "like okay well right actually"),
        ("assent", "yes yeah agree* ok sure"),
    ];
    CategoryLexicon::new(
        raw.iter()
            .map(|(name, stems)| {
                (
                    name.to_string(),
                    stems.split_whitespace().map(|s| s.to_string()).collect(),
                )
            })
            .collect(),
    )
    .expect("demo lexicon is valid")
}

fn demo_transcript(rng: &mut ChaCha8Rng, duration_s: f64) -> AlignedTranscript {
    let words = [
        "i", "think", "the", "game", "was", "great", "because", "we", "played", "happily",
        "maybe", "here", "now", "work", "feels", "good", "you", "know", "moving", "around",
    ];
    let mut tokens = Vec::new();
    let mut t = 0.1;
    let mut k = 0usize;
    while t < duration_s - 0.6 {
        let kind = match k % 5 {
            3 => TokenKind::Filler,
            4 => TokenKind::Pause,
            _ => TokenKind::Word,
        };
        let len = match kind {
            TokenKind::Word => rng.gen_range(0.15..0.45),
            TokenKind::Filler => rng.gen_range(0.1..0.3),
            TokenKind::Pause => rng.gen_range(0.2..0.6),
        };
        let text = match kind {
            TokenKind::Word => words[rng.gen_range(0..words.len())].to_string(),
            TokenKind::Filler => ["um", "uh", "ah"][rng.gen_range(0..3)].to_string(),
            TokenKind::Pause => "<pause>".to_string(),
        };
        tokens.push(Token {
            text,
            start_s: t,
            end_s: t + len,
            kind,
        });
        t += len + rng.gen_range(0.01..0.05);
        k += 1;
    }
    AlignedTranscript::new(tokens).expect("generated tokens are ordered")
}

fn demo_prosody(rng: &mut ChaCha8Rng, duration_s: f64) -> ProsodyTrack {
    let rate = 50.0;
    let n = (duration_s * rate) as usize;
    let frames = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            // one-second voiced/unvoiced alternation
            let voiced = (t as usize) % 2 == 0;
            ProsodyFrame {
                t_s: t,
                loudness: 55.0 + 8.0 * (0.7 * t).sin() + rng.gen_range(-1.0..1.0),
                pitch_hz: voiced.then(|| 120.0 + 25.0 * (0.9 * t).sin() + rng.gen_range(-5.0..5.0)),
                f1_hz: voiced.then(|| 500.0 + rng.gen_range(-40.0..40.0)),
                f2_hz: voiced.then(|| 1500.0 + rng.gen_range(-80.0..80.0)),
                f3_hz: voiced.then(|| 2500.0 + rng.gen_range(-120.0..120.0)),
                voiced,
            }
        })
        .collect();
    ProsodyTrack::new(frames).expect("generated frames are ordered")
}

fn demo_face(rng: &mut ChaCha8Rng, duration_s: f64) -> FaceTrack {
    let rate = 25.0;
    let n = (duration_s * rate) as usize;
    let frames = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let scale = 1.0 + 0.05 * (0.3 * t).sin();
            let landmarks = (0..FACE_LANDMARKS)
                .map(|k| {
                    let x = 100.0 + (k % 10) as f64 * 12.0 * scale + rng.gen_range(-1.0..1.0);
                    let y = 80.0 + (k / 10) as f64 * 15.0 * scale + rng.gen_range(-1.0..1.0);
                    [x, y]
                })
                .collect();
            FaceFrame {
                t_s: t,
                landmarks,
                pitch: 0.1 * (0.5 * t).sin() + rng.gen_range(-0.01..0.01),
                yaw: 0.15 * (0.3 * t).cos() + rng.gen_range(-0.01..0.01),
                roll: 0.05 * (0.8 * t).sin() + rng.gen_range(-0.01..0.01),
            }
        })
        .collect();
    FaceTrack::new(frames).expect("generated frames are ordered")
}

/// Paths of a generated demo project.
#[derive(Debug, Clone)]
pub struct DemoProject {
    pub root: PathBuf,
    pub config: PathBuf,
}

/// Writes a complete runnable project: per-video signal and track files,
/// annotations from both sources, a lexicon, and a config wired to them.
///
/// The motion signals contain planted repetitive patterns so the extract
/// stage has real structure to find.
pub fn write_demo_project(dir: impl AsRef<Path>, seed_value: u64, n_videos: usize) -> Result<DemoProject> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if n_videos == 0 {
        return Err(Error::Invalid("need at least one video".into()));
    }
    let layout = demo_layout();
    let lexicon = demo_lexicon();
    let lexicon_path = dir.join("lexicon.txt");
    write_lexicon(&lexicon_path, &lexicon)?;

    let n_patterns = 3usize;
    let sisc = SiscParams {
        n_samples: 600,
        n_channels: layout.n_channels(),
        n_patterns,
        pattern_len: 20,
        occurrences_per_pattern: 4,
        noise_sigma: 0.01,
        amplitude_min: 1.5,
        amplitude_max: 2.5,
        sample_rate_hz: 20.0,
    };
    let duration = sisc.n_samples as f64 / sisc.sample_rate_hz;

    let mut annotations = Vec::new();
    let mut video_toml = String::new();
    for v in 0..n_videos {
        let id = format!("v{v:02}");
        let video_seed = seed::derive(seed_value, &[seed::hash_label("video"), v as u64]);
        let (signal, _) = generate_sisc(&sisc, video_seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(video_seed, &[seed::hash_label("tracks")]));
        write_signal(dir.join(format!("{id}_signal.csv")), &signal)?;
        write_transcript(
            dir.join(format!("{id}_transcript.jsonl")),
            &demo_transcript(&mut rng, duration),
        )?;
        write_prosody(dir.join(format!("{id}_prosody.csv")), &demo_prosody(&mut rng, duration))?;
        write_face(dir.join(format!("{id}_face.csv")), &demo_face(&mut rng, duration))?;

        // independent ratings per source; the first video pins one rating
        // on each side of the class boundary so every source always has
        // both classes
        for d in 0..n_patterns {
            let rating = |rng: &mut ChaCha8Rng| -> u8 {
                if v == 0 && d == 0 {
                    2
                } else if v == 0 && d == 1 {
                    6
                } else {
                    rng.gen_range(1..=7)
                }
            };
            let crowd = rating(&mut rng);
            let selfr = rating(&mut rng);
            annotations.push(AnnotationRecord::new(
                id.clone(),
                d as u32,
                crowd,
                AnnotationSource::CrowdAverage,
            )?);
            annotations.push(AnnotationRecord::new(
                id.clone(),
                d as u32,
                selfr,
                AnnotationSource::SelfRated,
            )?);
        }

        video_toml.push_str(&format!(
            "[[videos]]\nid = \"{id}\"\nsignal = \"{id}_signal.csv\"\ntranscript = \"{id}_transcript.jsonl\"\nprosody = \"{id}_prosody.csv\"\nface = \"{id}_face.csv\"\n\n"
        ));
    }
    let annotations_path = dir.join("annotations.csv");
    write_annotations(&annotations_path, &annotations)?;

    let face_map = FaceMap::standard_66();
    let mut distances_toml = String::new();
    for d in &face_map.distances {
        distances_toml.push_str(&format!(
            "  {{ name = \"{}\", a = {}, b = {} }},\n",
            d.name, d.a, d.b
        ));
    }
    let joint_names = layout
        .joint_names
        .iter()
        .map(|n| format!("\"{n}\""))
        .collect::<Vec<_>>()
        .join(", ");
    let tracked = layout
        .tracked_joints
        .iter()
        .map(|j| j.to_string())
        .collect::<Vec<_>>()
        .join(", ");

    let config = format!(
        r#"# Generated demo project.
seed = {seed_value}
output_dir = "out"
lexicon = "lexicon.txt"
annotations = "annotations.csv"

[solver]
n_patterns = {n_patterns}
pattern_seconds = 1.0
lambda = 0.05
max_iters = 300
rel_tol = 1e-5
min_amplitude_frac = 0.1

[train]
lasso_lambda = 0.01
margin_c = 1.0
epsilon = 0.1
learning_rate = 0.1
lr_decay = 0.0
max_epochs = 300

[split]
n_repeats = 30
test_fraction = 0.2
subsample_fraction = 0.34

[layout]
joint_names = [{joint_names}]
reference_joint = 0
tracked_joints = [{tracked}]

[face_map]
eye_left = {eye_left}
eye_right = {eye_right}
distances = [
{distances_toml}]

{video_toml}"#,
        eye_left = face_map.eye_left,
        eye_right = face_map.eye_right,
    );
    let config_path = dir.join("config.toml");
    fs::write(&config_path, config).map_err(|e| Error::io(&config_path, e))?;
    Ok(DemoProject {
        root: dir.to_path_buf(),
        config: config_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sisc_fixture_is_deterministic_and_well_separated() {
        let params = SiscParams {
            n_samples: 1700,
            pattern_len: 20,
            ..Default::default()
        };
        let (s1, t1) = generate_sisc(&params, 9).unwrap();
        let (s2, t2) = generate_sisc(&params, 9).unwrap();
        assert_eq!(s1.samples(), s2.samples());
        assert_eq!(t1.impulses, t2.impulses);

        assert_eq!(t1.impulses.len(), 20);
        for (i, &(_, a, _)) in t1.impulses.iter().enumerate() {
            for &(_, b, _) in &t1.impulses[i + 1..] {
                assert!((a as i64 - b as i64).unsigned_abs() >= 40);
            }
        }
        // patterns are unit norm
        let dict = t1.dictionary().unwrap();
        for norm in dict.frobenius_norms() {
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn noiseless_fixture_reconstructs_exactly() {
        let params = SiscParams {
            n_samples: 1300,
            pattern_len: 16,
            noise_sigma: 0.0,
            ..Default::default()
        };
        let (signal, truth) = generate_sisc(&params, 4).unwrap();
        let dict = truth.dictionary().unwrap();
        let mut trains = vec![Array1::<f64>::zeros(truth.n_samples); dict.n_patterns()];
        for &(d, idx, amp) in &truth.impulses {
            trains[d][idx] = amp;
        }
        let acts = ActivationSet::new(trains).unwrap();
        let clean = reconstruct(&dict, &acts, truth.n_samples).unwrap();
        assert_eq!(signal.samples(), &clean);
    }

    #[test]
    fn classification_fixture_has_balanced_ratings_and_both_sources() {
        let params = ClassificationParams::default();
        let (matrix, annotations, truth) = generate_classification(&params, 3).unwrap();
        assert_eq!(matrix.n_rows(), 300);
        assert_eq!(matrix.schema.category_counts(), [9, 26, 40, 24, 23]);
        assert_eq!(annotations.len(), 600);
        assert_eq!(truth.crowd_columns.len(), 12);
        assert_eq!(truth.self_columns.len(), 3);

        // rank binning gives every rating bin and both classes
        for source in [AnnotationSource::CrowdAverage, AnnotationSource::SelfRated] {
            let ratings: Vec<u8> = annotations
                .iter()
                .filter(|a| a.source == source)
                .map(|a| a.rating)
                .collect();
            for bin in 1..=7u8 {
                assert!(ratings.contains(&bin), "{source:?} missing rating {bin}");
            }
        }
    }

    #[test]
    fn strength_zero_ratings_are_noise_driven() {
        let params = ClassificationParams {
            crowd_strength: 0.0,
            ..Default::default()
        };
        let (matrix, annotations, truth) = generate_classification(&params, 5).unwrap();
        // correlation between the crowd driver columns and ratings should
        // be negligible
        let crowd: Vec<f64> = annotations
            .iter()
            .filter(|a| a.source == AnnotationSource::CrowdAverage)
            .map(|a| f64::from(a.rating))
            .collect();
        let driver: Vec<f64> = (0..matrix.n_rows())
            .map(|i| truth.crowd_columns.iter().map(|&j| matrix.values[[i, j]]).sum())
            .collect();
        let r = crate::eval::pearson(&driver, &crowd).unwrap();
        assert!(r.abs() < 0.15, "null fixture leaked signal: r = {r}");
    }

    #[test]
    fn demo_project_files_exist_and_parse() {
        let dir = tempfile::tempdir().unwrap();
        let project = write_demo_project(dir.path(), 1, 2).unwrap();
        assert!(project.config.exists());
        let lexicon = crate::signal::load_lexicon(dir.path().join("lexicon.txt")).unwrap();
        assert_eq!(lexicon.len(), 23);
        let signal = crate::signal::load_signal(dir.path().join("v00_signal.csv")).unwrap();
        assert_eq!(signal.n_channels(), 30);
        crate::signal::load_transcript(dir.path().join("v00_transcript.jsonl")).unwrap();
        crate::signal::load_prosody(dir.path().join("v00_prosody.csv")).unwrap();
        crate::signal::load_face(dir.path().join("v01_face.csv")).unwrap();
        let annotations =
            crate::signal::load_annotations(dir.path().join("annotations.csv")).unwrap();
        assert_eq!(annotations.len(), 2 * 2 * 3);
    }
}
