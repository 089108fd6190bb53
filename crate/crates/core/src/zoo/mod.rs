//! Built-in tasks and components.

mod ffn;
mod losses;
mod statistics;
mod tasks;
mod transforms;
mod viewers;

pub use ffn::FeedForward;
pub use losses::{MseLoss, NllLoss};
pub use statistics::Accuracy;
pub use tasks::{CsvClassification, GaussianBlobs, Parity};
pub use transforms::{Concat, LabelIndexer, OneHot, UnkPolicy, Vocabulary};
pub use viewers::{CsvExporter, ExportMode, StreamViewer};

use crate::pipeline::{Component, ComponentFactory, Task};

fn component<C: Component + 'static>(c: crate::Result<C>) -> crate::Result<Box<dyn Component>> {
    c.map(|c| Box::new(c) as Box<dyn Component>)
}

fn task<T: Task + 'static>(t: crate::Result<T>) -> crate::Result<Box<dyn Task>> {
    t.map(|t| Box::new(t) as Box<dyn Task>)
}

/// Registers every built-in type under its `type:` identifier.
pub fn register_all(f: &mut ComponentFactory) {
    let builtin = "built-in defaults parse";
    f.register_task("gaussian_blobs", tasks::BLOBS_DEFAULTS, |c| task(GaussianBlobs::new(c)))
        .expect(builtin);
    f.register_task("parity", tasks::PARITY_DEFAULTS, |c| task(Parity::new(c)))
        .expect(builtin);
    f.register_task("csv_classification", tasks::CSV_DEFAULTS, |c| {
        task(CsvClassification::new(c))
    })
    .expect(builtin);
    f.register_component("feed_forward", ffn::DEFAULTS, |c| component(FeedForward::new(c)))
        .expect(builtin);
    f.register_component("label_indexer", transforms::LABEL_INDEXER_DEFAULTS, |c| {
        component(LabelIndexer::new(c))
    })
    .expect(builtin);
    f.register_component("one_hot", transforms::ONE_HOT_DEFAULTS, |c| component(OneHot::new(c)))
        .expect(builtin);
    f.register_component("concat", transforms::CONCAT_DEFAULTS, |c| component(Concat::new(c)))
        .expect(builtin);
    f.register_component("nll_loss", losses::DEFAULTS, |c| component(NllLoss::new(c)))
        .expect(builtin);
    f.register_component("mse_loss", losses::DEFAULTS, |c| component(MseLoss::new(c)))
        .expect(builtin);
    f.register_component("accuracy", statistics::ACCURACY_DEFAULTS, |c| {
        component(Accuracy::new(c))
    })
    .expect(builtin);
    f.register_component("stream_viewer", viewers::VIEWER_DEFAULTS, |c| {
        component(StreamViewer::new(c))
    })
    .expect(builtin);
    f.register_component("csv_exporter", viewers::EXPORTER_DEFAULTS, |c| {
        component(CsvExporter::new(c))
    })
    .expect(builtin);
}
