//! Build the 122-column feature row for one pattern from hand-made tracks:
//! disfluency, prosody, body-movement, facial and lexical families pooled
//! over the pattern's occurrence windows.
//!
//! Run with: cargo run --release --example feature_matrix

use mannerscope::features::{
    assemble_pattern_row, feature_schema, FaceMap, FeatureCategory, TrackBundle,
};
use mannerscope::pipeline::synth::{demo_layout, demo_lexicon};
use mannerscope::signal::{
    AlignedTranscript, FaceFrame, FaceTrack, MultichannelSignal, ProsodyFrame, ProsodyTrack,
    TimeWindow, Token, TokenKind, FACE_LANDMARKS,
};
use ndarray::Array2;

fn main() {
    let layout = demo_layout();
    let lexicon = demo_lexicon();
    let face_map = FaceMap::standard_66();
    let schema = feature_schema(&layout, &face_map, &lexicon).expect("schema builds");

    println!("schema: {} columns", schema.len());
    let counts = schema.category_counts();
    for (cat, count) in FeatureCategory::ALL.iter().zip(counts) {
        println!("  {:<11} {count}", cat.as_str());
    }

    // a 30-channel skeleton: joint 1 sways, everything else holds still
    let rate = 20.0;
    let n = 200;
    let samples = Array2::from_shape_fn((n, layout.n_channels()), |(row, col)| {
        let joint = col / 3;
        let axis = col % 3;
        let t = row as f64 / rate;
        match (joint, axis) {
            (1, 0) => 1.0 + 0.2 * (3.0 * t).sin(),
            (j, 0) => j as f64,
            _ => 0.0,
        }
    });
    let signal = MultichannelSignal::new(
        samples,
        rate,
        (0..layout.n_channels()).map(|i| format!("c{i}")).collect(),
    )
    .expect("signal is valid");

    let transcript = AlignedTranscript::new(vec![
        Token { text: "i".into(), start_s: 0.2, end_s: 0.4, kind: TokenKind::Word },
        Token { text: "think".into(), start_s: 0.4, end_s: 0.8, kind: TokenKind::Word },
        Token { text: "um".into(), start_s: 0.9, end_s: 1.2, kind: TokenKind::Filler },
        Token { text: "happily".into(), start_s: 1.3, end_s: 1.8, kind: TokenKind::Word },
        Token { text: "<pause>".into(), start_s: 1.9, end_s: 2.4, kind: TokenKind::Pause },
        Token { text: "great".into(), start_s: 5.0, end_s: 5.3, kind: TokenKind::Word },
    ])
    .expect("tokens are ordered");

    let prosody = ProsodyTrack::new(
        (0..100)
            .map(|i| {
                let t = i as f64 * 0.05;
                let voiced = i % 3 != 2;
                ProsodyFrame {
                    t_s: t,
                    loudness: 60.0 + 4.0 * (t * 2.0).sin(),
                    pitch_hz: voiced.then(|| 130.0 + 20.0 * (t * 1.5).cos()),
                    f1_hz: voiced.then_some(520.0),
                    f2_hz: voiced.then_some(1480.0),
                    f3_hz: voiced.then_some(2520.0),
                    voiced,
                }
            })
            .collect(),
    )
    .expect("frames are ordered");

    let face = FaceTrack::new(
        (0..60)
            .map(|i| FaceFrame {
                t_s: i as f64 * 0.08,
                landmarks: (0..FACE_LANDMARKS)
                    .map(|k| [100.0 + (k % 10) as f64 * 11.0, 90.0 + (k / 10) as f64 * 13.0])
                    .collect(),
                pitch: 0.05,
                yaw: -0.02,
                roll: 0.1 * if i % 2 == 0 { 1.0 } else { -1.0 },
            })
            .collect(),
    )
    .expect("frames are ordered");

    let tracks = TrackBundle {
        signal: &signal,
        transcript: &transcript,
        prosody: &prosody,
        face: &face,
    };

    // the pattern occurred twice: two 2-second windows pooled into one row
    let windows = [TimeWindow::new(0.0, 2.0), TimeWindow::new(4.0, 6.0)];
    let row = assemble_pattern_row(&tracks, &layout, &face_map, &lexicon, &windows)
        .expect("row assembles");

    println!("\nassembled one row from {} windows:", windows.len());
    for (slot, (name, value)) in schema.names.iter().zip(&row).enumerate() {
        if *value != 0.0 && slot < 15 {
            println!("  {name:<24} = {value:.4}");
        }
    }
    let nonzero = row.iter().filter(|v| **v != 0.0).count();
    println!("  ... {nonzero} of {} features nonzero", row.len());
}
