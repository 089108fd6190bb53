mod common;

use std::path::Path;

use common::{blobs_config, tree};
use ptp_core::checkpoint::{Checkpoint, FINAL_CHECKPOINT};
use ptp_core::pipeline::ComponentFactory;
use ptp_core::workers::{
    exit_code, run_offline_trainer, run_online_trainer, run_processor, WorkerOptions, CONFIG_COPY, EXIT_CONFIG,
    EXIT_NUMERIC, EXIT_OK, LOG_FILE,
};

fn opts(root: &Path, prefetch: usize) -> WorkerOptions {
    WorkerOptions {
        expdir: root.to_path_buf(),
        prefetch,
    }
}

fn csv_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).map_or(0, |t| t.lines().count().saturating_sub(1))
}

#[test]
fn zero_epochs_writes_no_rows_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let result = run_offline_trainer(
        tree(&blobs_config(0)),
        &ComponentFactory::with_zoo(),
        &opts(dir.path(), 0),
    );
    assert_eq!(exit_code(&result), EXIT_OK);
    let summary = result.unwrap();
    assert_eq!(csv_rows(&summary.exp_dir.join("training.csv")), 0);
    assert_eq!(csv_rows(&summary.exp_dir.join("validation.csv")), 0);
    assert!(summary.exp_dir.join(FINAL_CHECKPOINT).exists());
    assert!(summary.exp_dir.join(CONFIG_COPY).exists());
    assert!(summary.exp_dir.join(LOG_FILE).exists());
}

#[test]
fn online_interval_beyond_budget_never_validates() {
    let dir = tempfile::tempdir().unwrap();
    let config = tree(
        "
training:
  task: {type: parity, num_bits: 2, batch_size: 4}
  terminal_conditions: {max_episodes: 20, validation_interval: 50}
validation:
  task: {type: parity, num_bits: 2}
pipeline:
  classifier: {type: feed_forward, priority: 1, hidden_sizes: [4]}
  nll: {type: nll_loss, priority: 2}
",
    );
    let summary = run_online_trainer(config, &ComponentFactory::with_zoo(), &opts(dir.path(), 0)).unwrap();
    assert_eq!(summary.status.episode, 20);
    assert!(summary.validation.is_empty());
    assert_eq!(csv_rows(&summary.exp_dir.join("validation.csv")), 0);
}

#[test]
fn processor_runs_ceil_n_over_b_batches() {
    let dir = tempfile::tempdir().unwrap();
    // 3 classes x 30 samples at batch 32
    let mut config = tree(&blobs_config(1));
    config.set("test.task.batch_size", 32i64.into());
    let summary = run_processor(config, &ComponentFactory::with_zoo(), &opts(dir.path(), 0)).unwrap();
    assert_eq!(summary.status.episode, 3);
    let text = std::fs::read_to_string(summary.exp_dir.join("test.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("0,1,"));
}

#[test]
fn prefetch_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let factory = ComponentFactory::with_zoo();
    let mut outputs = Vec::new();
    for (i, prefetch) in [0, 3].into_iter().enumerate() {
        let root = dir.path().join(format!("r{i}"));
        let s = run_offline_trainer(tree(&blobs_config(3)), &factory, &opts(&root, prefetch)).unwrap();
        let csv = std::fs::read(s.exp_dir.join("training.csv")).unwrap();
        outputs.push((csv, Checkpoint::read(&s.exp_dir.join(FINAL_CHECKPOINT)).unwrap().models));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn diverging_loss_maps_to_numeric_exit() {
    let dir = tempfile::tempdir().unwrap();
    let config = tree(
        "
training:
  task: {type: gaussian_blobs, num_classes: 3, dim: 2, batch_size: 8}
  optimizer: {type: sgd, lr: 1.0e6}
  terminal_conditions: {max_epochs: 50}
validation:
  task: {type: gaussian_blobs, num_classes: 3, dim: 2}
pipeline:
  encode: {type: one_hot, priority: 0, streams: {indices: targets, one_hot: wanted}}
  regressor: {type: feed_forward, priority: 1, hidden_sizes: [8], final_activation: identity}
  mse: {type: mse_loss, priority: 2, streams: {targets: wanted}}
",
    );
    let result = run_offline_trainer(config, &ComponentFactory::with_zoo(), &opts(dir.path(), 0));
    assert_eq!(exit_code(&result), EXIT_NUMERIC, "{:?}", result.as_ref().err());
}

#[test]
fn trainer_without_loss_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = tree(
        "
training: {task: {type: parity, num_bits: 2}}
validation: {task: {type: parity, num_bits: 2}}
pipeline:
  classifier: {type: feed_forward, priority: 1}
",
    );
    let result = run_offline_trainer(config, &ComponentFactory::with_zoo(), &opts(dir.path(), 0));
    assert_eq!(exit_code(&result), EXIT_CONFIG);
}
