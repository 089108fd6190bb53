use super::{describe, evaluate_batch, log_failure, prepare_pipeline, Experiment, RunSummary, WorkerOptions};
use crate::config::{ConfigTree, Section};
use crate::pipeline::ComponentFactory;
use crate::stats::{StatisticsCollector, StatsExporter};
use crate::Result;

/// Single eval-mode pass over the test task.
pub fn run_processor(config: ConfigTree, factory: &ComponentFactory, opts: &WorkerOptions) -> Result<RunSummary> {
    let mut exp = Experiment::create(&opts.expdir, config)?;
    exp.log
        .info(format!("processor, experiment directory {}", exp.dir.display()));
    let mut summary = RunSummary::new(exp.dir.clone());
    match process(&mut exp, factory, opts, &mut summary) {
        Ok(()) => Ok(summary),
        Err(e) => Err(log_failure(&mut exp, &summary.status, e)),
    }
}

fn process(
    exp: &mut Experiment,
    factory: &ComponentFactory,
    opts: &WorkerOptions,
    summary: &mut RunSummary,
) -> Result<()> {
    let config = exp.config.clone();
    let mut pipeline = prepare_pipeline(&config, factory, &[Section::Test], exp)?;
    let mut driver = pipeline.driver(Section::Test)?;
    let mut collector = StatisticsCollector::new();
    let mut batches = 0u64;
    for batch in driver.epoch(opts.prefetch)? {
        evaluate_batch(&mut pipeline, Section::Test, batch?, &mut collector)?;
        batches += 1;
    }
    summary.status.episode = batches;
    exp.log.info(format!("processed {batches} batches"));
    if collector.is_empty() {
        exp.log.warn("no statistics were collected");
        return Ok(());
    }
    let agg = collector.aggregate(0, 1)?;
    StatsExporter::new(&exp.dir).export(&agg, Section::Test)?;
    exp.log.info(format!("test: {}", describe(&agg)));
    summary.test = Some(agg);
    Ok(())
}
