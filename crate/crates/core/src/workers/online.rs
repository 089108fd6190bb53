use super::{
    describe, evaluate_batch, log_failure, optimizer_from_config, prepare_pipeline, require_training_roles,
    section_loss, train_batch, Experiment, RunSummary, TerminalConditions, WorkerOptions,
};
use crate::checkpoint::{save_checkpoint, track_best, FINAL_CHECKPOINT};
use crate::config::{ConfigTree, Section};
use crate::pipeline::ComponentFactory;
use crate::stats::{StatisticsCollector, StatsExporter};
use crate::{Error, Result};

/// Episode-based training. Every `validation_interval` episodes a single
/// validation batch is evaluated. Stops on `loss_stop` or `max_episodes`.
pub fn run_online_trainer(config: ConfigTree, factory: &ComponentFactory, opts: &WorkerOptions) -> Result<RunSummary> {
    let mut exp = Experiment::create(&opts.expdir, config)?;
    exp.log
        .info(format!("online trainer, experiment directory {}", exp.dir.display()));
    let mut summary = RunSummary::new(exp.dir.clone());
    match train(&mut exp, factory, &mut summary) {
        Ok(()) => {
            exp.log.info("online trainer finished");
            Ok(summary)
        }
        Err(e) => Err(log_failure(&mut exp, &summary.status, e)),
    }
}

fn train(exp: &mut Experiment, factory: &ComponentFactory, summary: &mut RunSummary) -> Result<()> {
    let config = exp.config.clone();
    let terminal = TerminalConditions::from_config(&config)?;
    let max_episodes = terminal
        .max_episodes
        .ok_or_else(|| Error::invalid("online training requires training.terminal_conditions.max_episodes"))?;
    let interval = terminal
        .validation_interval
        .ok_or_else(|| Error::invalid("online training requires training.terminal_conditions.validation_interval"))?;
    let mut optimizer = optimizer_from_config(&config)?;
    let mut pipeline = prepare_pipeline(&config, factory, &[Section::Training, Section::Validation], exp)?;
    require_training_roles(&pipeline)?;
    let weights = pipeline.configured_loss_weights();
    let mut train_driver = pipeline.driver(Section::Training)?;
    let mut valid_driver = pipeline.driver(Section::Validation)?;
    let mut exporter = StatsExporter::new(&exp.dir);
    let status = &mut summary.status;

    let mut collector = StatisticsCollector::new();
    while status.episode < max_episodes {
        let indices = train_driver.next_cycled()?;
        let batch = train_driver.assemble(&indices)?;
        train_batch(&mut pipeline, &mut optimizer, &weights, batch, &mut collector)?;
        status.episode += 1;
        status.epoch = train_driver.epochs_started() as u64;
        if !status.episode.is_multiple_of(interval) {
            continue;
        }
        let train_agg = collector.aggregate(status.episode, status.epoch)?;
        exporter.export(&train_agg, Section::Training)?;
        summary.training.push(train_agg);

        let mut valid = StatisticsCollector::new();
        let indices = valid_driver.next_cycled()?;
        evaluate_batch(
            &mut pipeline,
            Section::Validation,
            valid_driver.assemble(&indices)?,
            &mut valid,
        )?;
        let valid_agg = valid.aggregate(status.episode, status.epoch)?;
        exporter.export(&valid_agg, Section::Validation)?;
        let loss = section_loss(&pipeline, Section::Validation, &valid_agg)?;
        exp.log.info(format!(
            "episode {} validation: {}",
            status.episode,
            describe(&valid_agg)
        ));
        summary.validation.push(valid_agg);
        track_best(status, loss, &pipeline, Some(&optimizer), &exp.dir)?;
        if loss < terminal.loss_stop {
            exp.log
                .info(format!("validation loss {loss} below loss_stop {}", terminal.loss_stop));
            break;
        }
    }
    save_checkpoint(&pipeline, *status, Some(&optimizer), &exp.dir.join(FINAL_CHECKPOINT))?;
    Ok(())
}
