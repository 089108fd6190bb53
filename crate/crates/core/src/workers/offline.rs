use super::{
    describe, evaluate_batch, log_failure, optimizer_from_config, prepare_pipeline, require_training_roles,
    section_loss, train_batch, Experiment, RunSummary, TerminalConditions, WorkerOptions,
};
use crate::checkpoint::{save_checkpoint, track_best, FINAL_CHECKPOINT};
use crate::config::{ConfigTree, Section};
use crate::pipeline::ComponentFactory;
use crate::stats::{StatisticsCollector, StatsExporter};
use crate::Result;

/// Epoch-based training: a full training pass, then a full eval-mode
/// validation pass, per epoch. Stops on `loss_stop` or `max_epochs`.
pub fn run_offline_trainer(config: ConfigTree, factory: &ComponentFactory, opts: &WorkerOptions) -> Result<RunSummary> {
    let mut exp = Experiment::create(&opts.expdir, config)?;
    exp.log
        .info(format!("offline trainer, experiment directory {}", exp.dir.display()));
    let mut summary = RunSummary::new(exp.dir.clone());
    match train(&mut exp, factory, opts, &mut summary) {
        Ok(()) => {
            exp.log.info("offline trainer finished");
            Ok(summary)
        }
        Err(e) => Err(log_failure(&mut exp, &summary.status, e)),
    }
}

fn train(
    exp: &mut Experiment,
    factory: &ComponentFactory,
    opts: &WorkerOptions,
    summary: &mut RunSummary,
) -> Result<()> {
    let config = exp.config.clone();
    let terminal = TerminalConditions::from_config(&config)?;
    let mut optimizer = optimizer_from_config(&config)?;
    let mut pipeline = prepare_pipeline(&config, factory, &[Section::Training, Section::Validation], exp)?;
    require_training_roles(&pipeline)?;
    let weights = pipeline.configured_loss_weights();
    let mut train_driver = pipeline.driver(Section::Training)?;
    let mut valid_driver = pipeline.driver(Section::Validation)?;
    let mut exporter = StatsExporter::new(&exp.dir);
    let status = &mut summary.status;

    let mut epoch = 0u64;
    while terminal.max_epochs.is_none_or(|max| epoch < max) {
        epoch += 1;
        let mut collector = StatisticsCollector::new();
        for batch in train_driver.epoch(opts.prefetch)? {
            train_batch(&mut pipeline, &mut optimizer, &weights, batch?, &mut collector)?;
            status.episode += 1;
        }
        status.epoch = epoch;
        let train_agg = collector.aggregate(status.episode, epoch)?;
        exporter.export(&train_agg, Section::Training)?;
        exp.log
            .info(format!("epoch {epoch} training: {}", describe(&train_agg)));
        summary.training.push(train_agg);

        for batch in valid_driver.epoch(opts.prefetch)? {
            evaluate_batch(&mut pipeline, Section::Validation, batch?, &mut collector)?;
        }
        let valid_agg = collector.aggregate(status.episode, epoch)?;
        exporter.export(&valid_agg, Section::Validation)?;
        let loss = section_loss(&pipeline, Section::Validation, &valid_agg)?;
        exp.log
            .info(format!("epoch {epoch} validation: {}", describe(&valid_agg)));
        summary.validation.push(valid_agg);
        if track_best(status, loss, &pipeline, Some(&optimizer), &exp.dir)? {
            exp.log.info(format!(
                "epoch {epoch}: validation loss {loss} improved, saved best checkpoint"
            ));
        }
        if loss < terminal.loss_stop {
            exp.log
                .info(format!("validation loss {loss} below loss_stop {}", terminal.loss_stop));
            break;
        }
    }
    save_checkpoint(&pipeline, *status, Some(&optimizer), &exp.dir.join(FINAL_CHECKPOINT))?;
    Ok(())
}
