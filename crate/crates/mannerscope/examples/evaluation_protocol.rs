//! The repeated random-split protocol on a two-source fixture: 30 seeded
//! splits per source, a subsampling experiment, and the Welch t-test
//! between the metric lists.
//!
//! Run with: cargo run --release --example evaluation_protocol

use mannerscope::eval::{
    mean_of, repeated_splits, subsample_experiment, welch_ttest, LabeledDataset, SplitSpec,
};
use mannerscope::models::{ModelKind, TaskMode, TrainConfig};
use mannerscope::pipeline::synth::{generate_classification, ClassificationParams};
use mannerscope::signal::AnnotationSource;
use ndarray::Array1;

fn dataset_for(
    matrix: &mannerscope::features::FeatureMatrix,
    annotations: &[mannerscope::signal::AnnotationRecord],
    source: AnnotationSource,
) -> LabeledDataset {
    let labels: Vec<f64> = annotations
        .iter()
        .filter(|a| a.source == source)
        .map(|a| if a.rating >= 4 { 1.0 } else { 0.0 })
        .collect();
    LabeledDataset::new(matrix.values.clone(), Array1::from_vec(labels)).expect("aligned")
}

fn main() {
    // crowd ratings carry a stronger planted signal than self ratings
    let params = ClassificationParams {
        rows: 300,
        crowd_strength: 2.0,
        self_strength: 0.7,
        noise: 1.0,
    };
    let (matrix, annotations, _) = generate_classification(&params, 5).expect("fixture generates");
    let crowd = dataset_for(&matrix, &annotations, AnnotationSource::CrowdAverage);
    let selfr = dataset_for(&matrix, &annotations, AnnotationSource::SelfRated);

    let cfg = TrainConfig {
        lasso_lambda: Some(0.01),
        max_epochs: 300,
        ..Default::default()
    };
    let spec = SplitSpec {
        n_repeats: 30,
        test_fraction: 0.2,
        seed: 2024,
    };

    let crowd_aucs =
        repeated_splits(&crowd, ModelKind::Lasso, TaskMode::Classification, &cfg, &spec)
            .expect("protocol runs");
    let self_aucs =
        repeated_splits(&selfr, ModelKind::Lasso, TaskMode::Classification, &cfg, &spec)
            .expect("protocol runs");
    let sub_aucs = subsample_experiment(
        &crowd,
        1.0 / 3.0,
        ModelKind::Lasso,
        TaskMode::Classification,
        &cfg,
        &spec,
    )
    .expect("protocol runs");

    println!("lasso classification, {} repeats each:", spec.n_repeats);
    println!("  crowd ratings        mean AUC {:.3}", mean_of(&crowd_aucs));
    println!("  crowd, 1/3 subsample mean AUC {:.3}", mean_of(&sub_aucs));
    println!("  self ratings         mean AUC {:.3}", mean_of(&self_aucs));

    let test = welch_ttest(&self_aucs, &sub_aucs).expect("lists are comparable");
    println!(
        "\nself vs subsampled-crowd: t = {:.2}, p = {:.2e}, dof = {:.1}",
        test.t, test.p, test.dof
    );
    let test = welch_ttest(&crowd_aucs, &self_aucs).expect("lists are comparable");
    println!(
        "crowd vs self:            t = {:.2}, p = {:.2e}, dof = {:.1}",
        test.t, test.p, test.dof
    );
}
