#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ptp_core::checkpoint::Checkpoint;
use ptp_core::config::{ConfigTree, GlobalParams, Section};
use ptp_core::pipeline::{build_pipeline_for, ComponentFactory, Pipeline};
use ptp_core::NDArray;

pub fn tree(yaml: &str) -> ConfigTree {
    ConfigTree::from_yaml_str(yaml, "<test>").expect("test YAML parses")
}

/// Builds, initializes and handshakes; panics on any diagnostic.
pub fn ready_pipeline(factory: &ComponentFactory, config: &ConfigTree, sections: &[Section]) -> Pipeline {
    let mut p = build_pipeline_for(config, factory, sections).expect("pipeline builds");
    let mut globals = GlobalParams::new();
    let mut diags = p.initialize(&mut globals, None);
    for &s in sections {
        diags.extend(p.handshake(s));
    }
    assert!(diags.is_empty(), "unexpected diagnostics: {diags:#?}");
    p
}

pub fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).expect("write test file");
    path
}

/// Parameter values of every model, as raw bit patterns.
pub fn parameter_bits(pipeline: &Pipeline) -> BTreeMap<String, Vec<u64>> {
    let mut out = BTreeMap::new();
    for (model, store) in pipeline.models() {
        for (name, p) in store.iter() {
            out.insert(
                format!("{model}/{name}"),
                p.value.data().iter().map(|x| x.to_bits()).collect(),
            );
        }
    }
    out
}

pub fn checkpoint_bits(path: &Path, model: &str) -> BTreeMap<String, Vec<u64>> {
    let ckpt = Checkpoint::read(path).expect("checkpoint reads");
    ckpt.model(model)
        .expect("model present")
        .into_iter()
        .map(|(k, v): (String, NDArray)| (k, v.data().iter().map(|x| x.to_bits()).collect()))
        .collect()
}

/// The single run directory created under `root`.
pub fn only_run_dir(root: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .expect("experiment root exists")
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    assert_eq!(dirs.len(), 1, "expected one run directory in {}", root.display());
    dirs.into_iter().next().unwrap()
}

/// Blobs classification config; the `pipeline` map is last so callers can append components.
pub fn blobs_config(max_epochs: u64) -> String {
    format!(
        "
seed: 1337
training:
  task: {{type: gaussian_blobs, num_classes: 3, dim: 2, samples_per_class: 100, spread: 0.1, batch_size: 32, sampler: shuffled}}
  optimizer: {{type: sgd, lr: 0.1, momentum: 0.9}}
  terminal_conditions: {{max_epochs: {max_epochs}}}
validation:
  task: {{type: gaussian_blobs, num_classes: 3, dim: 2, samples_per_class: 30, spread: 0.1, batch_size: 30}}
test:
  task: {{type: gaussian_blobs, num_classes: 3, dim: 2, samples_per_class: 30, spread: 0.1, batch_size: 30}}
pipeline:
  classifier: {{type: feed_forward, priority: 1, hidden_sizes: [8]}}
  nll: {{type: nll_loss, priority: 2}}
  accuracy: {{type: accuracy, priority: 3}}
"
    )
}
