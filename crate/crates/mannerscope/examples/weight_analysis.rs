//! Per-category weight shares of the linear predictors: train on crowd and
//! self ratings separately and compare where each model puts its weight
//! mass.
//!
//! Run with: cargo run --release --example weight_analysis

use mannerscope::eval::category_weights;
use mannerscope::features::{FeatureCategory, Normalization};
use mannerscope::models::{fit_model, ModelKind, TaskMode, TrainConfig};
use mannerscope::pipeline::synth::{generate_classification, ClassificationParams};
use mannerscope::signal::AnnotationSource;
use ndarray::Array1;

fn main() {
    // crowd ratings follow non-lexical columns, self ratings follow
    // lexical columns
    let params = ClassificationParams {
        rows: 300,
        crowd_strength: 2.0,
        self_strength: 1.0,
        noise: 0.8,
    };
    let (matrix, annotations, truth) =
        generate_classification(&params, 8).expect("fixture generates");
    println!(
        "planted drivers: crowd -> columns {:?}..., self -> columns {:?}",
        &truth.crowd_columns[..4],
        truth.self_columns
    );

    println!(
        "\n{:<12} {:<14} {:>7} {:>8} {:>6} {:>6} {:>8}",
        "model", "ratings", "disf", "prosody", "body", "face", "lexical"
    );
    for source in [AnnotationSource::CrowdAverage, AnnotationSource::SelfRated] {
        let y: Vec<f64> = annotations
            .iter()
            .filter(|a| a.source == source)
            .map(|a| if a.rating >= 4 { 1.0 } else { 0.0 })
            .collect();
        let y = Array1::from_vec(y);
        let norm = Normalization::fit(&matrix.values.view()).expect("enough rows");
        let x = norm.apply(&matrix.values.view()).expect("widths match");

        for kind in [ModelKind::Lasso, ModelKind::MaxMargin, ModelKind::Lda] {
            let cfg = TrainConfig {
                lasso_lambda: Some(0.01),
                max_epochs: 400,
                seed: 1,
                ..Default::default()
            };
            let model = fit_model(kind, &x.view(), &y, TaskMode::Classification, &cfg)
                .expect("model trains");
            let shares = category_weights(&model, &matrix.schema.categories)
                .expect("some weight is nonzero");
            let get = |cat: FeatureCategory| {
                shares.iter().find(|(c, _)| *c == cat).map(|(_, p)| *p).unwrap_or(0.0)
            };
            println!(
                "{:<12} {:<14} {:>7.1} {:>8.1} {:>6.1} {:>6.1} {:>8.1}",
                kind.as_str(),
                source.as_str(),
                get(FeatureCategory::Disfluency),
                get(FeatureCategory::Prosody),
                get(FeatureCategory::Body),
                get(FeatureCategory::Face),
                get(FeatureCategory::Lexical)
            );
        }
    }
    println!("\nthe self-rating models concentrate weight on the lexical family;");
    println!("the crowd-rating models spread theirs over the non-lexical families");
}
