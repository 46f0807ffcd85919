//! Train all four predictor kinds on a synthetic feature matrix and
//! compare their training-set AUC, plus the cross-validated choice of the
//! lasso's L1 weight.
//!
//! Run with: cargo run --release --example train_predictors

use mannerscope::eval::{auc, select_lasso_lambda, LabeledDataset};
use mannerscope::models::{fit_model, predict, ModelKind, TaskMode, TrainConfig};
use mannerscope::pipeline::synth::{generate_classification, ClassificationParams};
use mannerscope::signal::AnnotationSource;
use ndarray::Array1;

fn main() {
    let params = ClassificationParams {
        rows: 240,
        crowd_strength: 1.5,
        self_strength: 0.8,
        noise: 1.0,
    };
    let (matrix, annotations, _) = generate_classification(&params, 3).expect("fixture generates");
    let labels: Vec<f64> = annotations
        .iter()
        .filter(|a| a.source == AnnotationSource::CrowdAverage)
        .map(|a| if a.rating >= 4 { 1.0 } else { 0.0 })
        .collect();
    let ds = LabeledDataset::new(matrix.values.clone(), Array1::from_vec(labels))
        .expect("rows and labels align");
    println!(
        "{} rows x {} features, {} positive",
        ds.n_rows(),
        matrix.schema.len(),
        ds.y.iter().filter(|&&v| v > 0.5).count()
    );

    let base = TrainConfig {
        max_epochs: 400,
        seed: 9,
        ..Default::default()
    };
    let lambda = select_lasso_lambda(&ds, TaskMode::Classification, &base, 9)
        .expect("lambda selection runs");
    println!("cross-validated lasso lambda: {lambda}");

    for kind in ModelKind::ALL {
        let cfg = TrainConfig {
            lasso_lambda: Some(lambda),
            ..base.clone()
        };
        let model = fit_model(kind, &ds.x.view(), &ds.y, TaskMode::Classification, &cfg)
            .expect("model trains");
        let scores = predict(&model, &ds.x.view()).expect("widths match");
        let train_labels: Vec<bool> = ds.y.iter().map(|&v| v > 0.5).collect();
        let train_auc = auc(scores.as_slice().unwrap(), &train_labels).expect("both classes");
        println!(
            "{:<11} training AUC {:.3}, nonzero coefficients {}",
            kind.as_str(),
            train_auc,
            if kind.is_linear() {
                model.nonzero_count().to_string()
            } else {
                "-".to_string()
            }
        );
    }
}
