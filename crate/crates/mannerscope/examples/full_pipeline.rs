//! End-to-end pipeline run on a generated demo project: extract patterns,
//! assemble features, train a model, evaluate, and print the report.
//!
//! Run with: cargo run --release --example full_pipeline

use mannerscope::models::{ModelKind, TaskMode};
use mannerscope::pipeline::{
    cmd_evaluate, cmd_extract, cmd_features, cmd_report, cmd_train, synth, PipelineConfig,
    SourceFilter,
};

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let project =
        synth::write_demo_project(dir.path(), 7, 8).expect("demo project generates");
    println!("demo project at {}", project.root.display());

    let cfg = PipelineConfig::load(&project.config).expect("config parses");

    cmd_extract(&cfg).expect("extract succeeds");
    cmd_features(&cfg).expect("features succeed");
    cmd_train(
        &cfg,
        ModelKind::Lasso,
        TaskMode::Classification,
        SourceFilter::CrowdAverage,
    )
    .expect("training succeeds");
    cmd_evaluate(&cfg).expect("evaluation succeeds");

    println!("\n{}", cmd_report(&cfg).expect("report renders"));
}
