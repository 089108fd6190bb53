use std::collections::{BTreeMap, VecDeque};
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::sampler::{chunk, Sampler};
use super::Task;
use crate::stream::Batch;
use crate::{Error, Result};

/// Feeds batches from a task: batching, sampling, stream renaming and
/// optional prefetching on a producer thread.
pub struct TaskDriver {
    task: Arc<dyn Task>,
    remap: BTreeMap<String, String>,
    sampler: Sampler,
    batch_size: usize,
    pending: VecDeque<Vec<usize>>,
    epochs_started: usize,
}

impl TaskDriver {
    pub fn new(task: Arc<dyn Task>) -> Result<Self> {
        let cfg = task.config();
        let batch_size = cfg.param_usize("batch_size")?;
        if batch_size == 0 {
            return Err(Error::invalid(format!("{}.batch_size must be positive", cfg.name)));
        }
        Ok(Self {
            remap: cfg.stream_remap.clone(),
            sampler: Sampler::from_config(cfg)?,
            batch_size,
            task,
            pending: VecDeque::new(),
            epochs_started: 0,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn task(&self) -> &Arc<dyn Task> {
        &self.task
    }

    pub fn epochs_started(&self) -> usize {
        self.epochs_started
    }

    /// Batches of sample indices for one full epoch.
    pub fn epoch_indices(&mut self) -> Result<Vec<Vec<usize>>> {
        self.epochs_started += 1;
        let order = self.sampler.epoch(self.task.len())?;
        Ok(chunk(&order, self.batch_size))
    }

    /// Next batch of indices, starting a new epoch whenever the current one is exhausted.
    pub fn next_cycled(&mut self) -> Result<Vec<usize>> {
        if self.pending.is_empty() {
            let epoch = self.epoch_indices()?;
            if epoch.is_empty() {
                return Err(Error::invalid(format!("task '{}' is empty", self.task.name())));
            }
            self.pending.extend(epoch);
        }
        Ok(self.pending.pop_front().expect("refilled above"))
    }

    pub fn assemble(&self, indices: &[usize]) -> Result<Batch> {
        assemble(self.task.as_ref(), &self.remap, indices)
    }

    /// Iterator over one epoch. With `prefetch > 0` batches are assembled on a
    /// producer thread into a queue holding at most `prefetch` batches.
    pub fn epoch(&mut self, prefetch: usize) -> Result<BatchIter> {
        let lists = self.epoch_indices()?;
        Ok(BatchIter::new(self.task.clone(), self.remap.clone(), lists, prefetch))
    }
}

fn assemble(task: &dyn Task, remap: &BTreeMap<String, String>, indices: &[usize]) -> Result<Batch> {
    let batch = task.sample(indices).map_err(|e| Error::Component {
        name: task.name().to_string(),
        priority: None,
        source: Box::new(e),
    })?;
    Ok(batch.renamed(remap)?)
}

pub struct BatchIter {
    inner: Inner,
}

enum Inner {
    Sync {
        task: Arc<dyn Task>,
        remap: BTreeMap<String, String>,
        lists: std::vec::IntoIter<Vec<usize>>,
    },
    Prefetch {
        rx: Option<Receiver<Result<Batch>>>,
        producer: Option<JoinHandle<()>>,
    },
}

impl BatchIter {
    fn new(task: Arc<dyn Task>, remap: BTreeMap<String, String>, lists: Vec<Vec<usize>>, prefetch: usize) -> Self {
        if prefetch == 0 {
            return Self {
                inner: Inner::Sync {
                    task,
                    remap,
                    lists: lists.into_iter(),
                },
            };
        }
        let (tx, rx) = sync_channel(prefetch);
        let producer = thread::spawn(move || {
            for indices in lists {
                if tx.send(assemble(task.as_ref(), &remap, &indices)).is_err() {
                    break;
                }
            }
        });
        Self {
            inner: Inner::Prefetch {
                rx: Some(rx),
                producer: Some(producer),
            },
        }
    }
}

impl Iterator for BatchIter {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        match &mut self.inner {
            Inner::Sync { task, remap, lists } => {
                let indices = lists.next()?;
                Some(assemble(task.as_ref(), remap, &indices))
            }
            Inner::Prefetch { rx, .. } => rx.as_ref()?.recv().ok(),
        }
    }
}

impl Drop for BatchIter {
    fn drop(&mut self) {
        if let Inner::Prefetch { rx, producer } = &mut self.inner {
            // closing the queue unblocks the producer
            drop(rx.take());
            if let Some(handle) = producer.take() {
                let _ = handle.join();
            }
        }
    }
}
