mod common;

use std::sync::{Arc, Mutex};

use common::{ready_pipeline, tree};
use ptp_core::config::{ComponentConfig, GlobalParams, Section};
use ptp_core::pipeline::{build_pipeline_for, Component, ComponentFactory, Diagnostic, InitContext, Mode, Role};
use ptp_core::stream::{Batch, Definitions, StreamDefinition, Value};
use ptp_core::{Error, Result};

/// Appends its name to a shared log on every execute and writes `mark`.
struct Probe {
    cfg: ComponentConfig,
    log: Arc<Mutex<Vec<String>>>,
}

impl Component for Probe {
    fn config(&self) -> &ComponentConfig {
        &self.cfg
    }
    fn role(&self) -> Role {
        Role::Transform
    }
    fn initialize(&mut self, _ctx: &mut InitContext<'_>) -> Result<()> {
        Ok(())
    }
    fn input_definitions(&self) -> Definitions {
        Definitions::new()
    }
    fn output_definitions(&self) -> Definitions {
        Definitions::from([("mark".into(), StreamDefinition::scalar(""))])
    }
    fn execute(&mut self, batch: &mut Batch, _mode: Mode) -> Result<()> {
        self.log.lock().unwrap().push(self.cfg.name.clone());
        batch.insert(self.cfg.stream("mark"), Value::Scalar(1.0))?;
        Ok(())
    }
}

fn probe_factory() -> (ComponentFactory, Arc<Mutex<Vec<String>>>) {
    let log = Arc::new(Mutex::new(Vec::new()));
    let mut factory = ComponentFactory::with_zoo();
    let shared = log.clone();
    factory
        .register_component("probe", "{}", move |cfg| {
            Ok(Box::new(Probe {
                cfg,
                log: shared.clone(),
            }) as Box<dyn Component>)
        })
        .unwrap();
    (factory, log)
}

const TASKS: &str = "
training: {task: {type: parity, num_bits: 2}}
validation: {task: {type: parity, num_bits: 2, batch_size: 3}}
test: {task: {type: parity, num_bits: 2}}
";

#[test]
fn forward_follows_numeric_priority_and_honours_disable() {
    let (factory, log) = probe_factory();
    let config = tree(&format!(
        "{TASKS}
pipeline:
  c: {{type: probe, priority: 10, streams: {{mark: m_c}}}}
  a: {{type: probe, priority: 2, streams: {{mark: m_a}}}}
  b: {{type: probe, priority: 2.5, streams: {{mark: m_b}}, disable: [validation]}}
  d: {{type: probe, priority: -1, streams: {{mark: m_d}}, disable: [training, test]}}
"
    ));
    let mut p = ready_pipeline(&factory, &config, &Section::ALL);
    assert_eq!(p.execution_order(Section::Training), ["a", "b", "c"]);
    assert_eq!(p.execution_order(Section::Validation), ["d", "a", "c"]);

    for (section, expected) in [
        (Section::Training, vec!["a", "b", "c"]),
        (Section::Validation, vec!["d", "a", "c"]),
    ] {
        log.lock().unwrap().clear();
        let driver = p.driver(section).unwrap();
        let batch = driver.assemble(&[0, 1]).unwrap();
        let out = p.forward(section, Mode::Eval, batch).unwrap();
        assert_eq!(*log.lock().unwrap(), expected);
        for name in &expected {
            assert!(out.get(&format!("m_{name}")).is_ok());
        }
    }
}

#[test]
fn duplicate_priorities_are_rejected() {
    let (factory, _) = probe_factory();
    let config = tree(&format!(
        "{TASKS}
pipeline:
  a: {{type: probe, priority: 1, streams: {{mark: x}}}}
  b: {{type: probe, priority: 1.0, streams: {{mark: y}}}}
"
    ));
    let err = build_pipeline_for(&config, &factory, &[Section::Training])
        .err()
        .expect("duplicate priority");
    assert!(
        matches!(err, Error::DuplicatePriority { priority, .. } if priority == 1.0),
        "{err}"
    );
}

#[test]
fn missing_priority_and_unknown_type_are_rejected() {
    let (factory, _) = probe_factory();
    let config = tree(&format!("{TASKS}\npipeline: {{a: {{type: probe}}}}\n"));
    assert!(matches!(
        build_pipeline_for(&config, &factory, &[Section::Training]),
        Err(Error::MissingPriority(_))
    ));
    let config = tree(&format!("{TASKS}\npipeline: {{a: {{type: nonesuch, priority: 1}}}}\n"));
    assert!(matches!(
        build_pipeline_for(&config, &factory, &[Section::Training]),
        Err(Error::UnknownType { .. })
    ));
}

#[test]
fn handshake_reports_every_problem_at_once() {
    let factory = ComponentFactory::with_zoo();
    let config = tree(
        "
training: {task: {type: gaussian_blobs, num_classes: 3, dim: 2}}
pipeline:
  model: {type: feed_forward, priority: 1, streams: {inputs: pixels}}
  loss: {type: nll_loss, priority: 2, streams: {targets: answers}}
  shadow: {type: feed_forward, priority: 3}
",
    );
    let mut p = build_pipeline_for(&config, &factory, &[Section::Training]).unwrap();
    let mut diags = p.initialize(&mut GlobalParams::new(), None);
    diags.extend(p.handshake(Section::Training));
    let missing: Vec<&str> = diags
        .iter()
        .filter_map(|d| match d {
            Diagnostic::MissingStream { stream, .. } => Some(stream.as_str()),
            _ => None,
        })
        .collect();
    assert!(
        missing.contains(&"pixels") && missing.contains(&"answers"),
        "{diags:#?}"
    );
    assert!(
        diags
            .iter()
            .any(|d| matches!(d, Diagnostic::Collision { stream, .. } if stream == "predictions")),
        "{diags:#?}"
    );
}

#[test]
fn validation_pass_does_not_touch_training_state() {
    let factory = ComponentFactory::with_zoo();
    let config = tree(&common::blobs_config(1));
    let mut p = ready_pipeline(&factory, &config, &[Section::Training, Section::Validation]);
    let before = common::parameter_bits(&p);
    let mut driver = p.driver(Section::Validation).unwrap();
    for indices in driver.epoch_indices().unwrap() {
        let batch = driver.assemble(&indices).unwrap();
        p.forward(Section::Validation, Mode::Eval, batch).unwrap();
    }
    assert_eq!(before, common::parameter_bits(&p));
    for (_, store) in p.models() {
        for (_, param) in store.iter() {
            assert!(param.grad.data().iter().all(|g| *g == 0.0));
        }
    }
}

#[test]
fn globals_are_write_once_across_components() {
    let factory = ComponentFactory::with_zoo();
    let config = tree(
        "
training: {task: {type: gaussian_blobs, num_classes: 3, dim: 2}}
validation: {task: {type: gaussian_blobs, num_classes: 4, dim: 2}}
pipeline:
  model: {type: feed_forward, priority: 1}
",
    );
    let mut p = build_pipeline_for(&config, &factory, &[Section::Training, Section::Validation]).unwrap();
    let diags = p.initialize(&mut GlobalParams::new(), None);
    assert!(
        diags
            .iter()
            .any(|d| matches!(d, Diagnostic::Initialization { message, .. } if message.contains("num_classes"))),
        "{diags:#?}"
    );
}
