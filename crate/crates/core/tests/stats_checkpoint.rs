mod common;

use common::{parameter_bits, ready_pipeline, tree};
use proptest::prelude::*;
use ptp_core::checkpoint::{
    list_models, load_into_component, track_best, Checkpoint, CheckpointError, TrainingStatus, BEST_CHECKPOINT,
};
use ptp_core::config::Section;
use ptp_core::pipeline::{ComponentFactory, Pipeline};
use ptp_core::stats::{StatisticsCollector, StatsExporter};

fn two_model_pipeline(seed: u64, hidden: usize) -> Pipeline {
    let config = tree(&format!(
        "
seed: {seed}
training: {{task: {{type: gaussian_blobs, num_classes: 3, dim: 2}}}}
pipeline:
  first: {{type: feed_forward, priority: 1, hidden_sizes: [{hidden}], streams: {{predictions: a}}}}
  second: {{type: feed_forward, priority: 2, streams: {{predictions: b}}}}
"
    ));
    ready_pipeline(&ComponentFactory::with_zoo(), &config, &[Section::Training])
}

#[test]
fn track_best_saves_only_on_strict_improvement() {
    let dir = tempfile::tempdir().unwrap();
    let p = two_model_pipeline(1, 4);
    let mut status = TrainingStatus::default();
    let best = dir.path().join(BEST_CHECKPOINT);

    assert!(track_best(&mut status, 1.0, &p, None, dir.path()).unwrap());
    assert!(best.exists());
    assert!(track_best(&mut status, 0.5, &p, None, dir.path()).unwrap());
    let saved = std::fs::read(&best).unwrap();
    assert!(!track_best(&mut status, 0.7, &p, None, dir.path()).unwrap());
    assert!(!track_best(&mut status, 0.5, &p, None, dir.path()).unwrap());
    assert!(!track_best(&mut status, f64::NAN, &p, None, dir.path()).unwrap());
    assert_eq!(status.best_validation_loss, Some(0.5));
    assert_eq!(saved, std::fs::read(&best).unwrap());
    assert_eq!(Checkpoint::read(&best).unwrap().status.best_validation_loss, Some(0.5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn track_best_follows_running_minimum(losses in prop::collection::vec(0.0f64..10.0, 1..12)) {
        let dir = tempfile::tempdir().unwrap();
        let p = two_model_pipeline(2, 2);
        let mut status = TrainingStatus::default();
        let mut running = f64::INFINITY;
        for &l in &losses {
            let saved = track_best(&mut status, l, &p, None, dir.path()).unwrap();
            prop_assert_eq!(saved, l < running);
            running = running.min(l);
        }
        prop_assert_eq!(status.best_validation_loss, Some(running));
    }
}

#[test]
fn models_are_listed_and_shape_mismatch_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let source = two_model_pipeline(1, 4);
    Checkpoint::capture(&source, TrainingStatus::default(), None, "t")
        .write(&path)
        .unwrap();
    assert_eq!(list_models(&path).unwrap(), ["first", "second"]);

    let mut other = two_model_pipeline(1, 5);
    let before = parameter_bits(&other);
    let err = load_into_component(&path, "first", other.component_mut("first").unwrap()).unwrap_err();
    assert!(err.to_string().contains("first"), "{err}");
    assert_eq!(before, parameter_bits(&other));

    assert!(load_into_component(&path, "absent", other.component_mut("second").unwrap()).is_err());
    assert!(matches!(
        Checkpoint::read(&dir.path().join("missing.ckpt")),
        Err(CheckpointError::Io { .. })
    ));
    std::fs::write(dir.path().join("junk.ckpt"), "{ not json").unwrap();
    assert!(Checkpoint::read(&dir.path().join("junk.ckpt")).is_err());
}

#[test]
fn exported_columns_are_sorted_and_rows_append() {
    let dir = tempfile::tempdir().unwrap();
    let mut exporter = StatsExporter::new(dir.path());
    for epoch in 1..=2u64 {
        let mut c = StatisticsCollector::new();
        c.collect("loss", 0.5 * epoch as f64, 4).unwrap();
        c.collect("accuracy", 0.25, 4).unwrap();
        c.end_batch();
        c.collect("loss", 1.0, 2).unwrap();
        c.collect("accuracy", 1.0, 2).unwrap();
        c.end_batch();
        let agg = c.aggregate(epoch * 2, epoch).unwrap();
        exporter.export(&agg, Section::Validation).unwrap();
    }
    let text = std::fs::read_to_string(dir.path().join("validation.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "episode,epoch,accuracy_mean,loss_mean");
    // batch-weighted: (0.25*4 + 1*2)/6 = 0.5, (0.5*4 + 1*2)/6 = 2/3
    assert_eq!(lines[1], "2,1,0.5,0.666667");
    assert_eq!(lines[2], "4,2,0.5,1");
    assert_eq!(lines.len(), 3);
}
