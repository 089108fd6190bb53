use std::fs::OpenOptions;
use std::path::PathBuf;

use crate::config::ComponentConfig;
use crate::pipeline::{Component, InitContext, Mode, Role};
use crate::stats::format_g6;
use crate::stream::{Batch, Definitions, StreamDefinition, Value};
use crate::{Error, Result};

fn input_streams(cfg: &ComponentConfig) -> Result<Vec<String>> {
    let streams = cfg.param_strings("input_streams")?;
    if streams.is_empty() {
        return Err(Error::invalid(format!("{}: input_streams is empty", cfg.name)));
    }
    Ok(streams)
}

fn any_definitions(streams: &[String]) -> Definitions {
    streams
        .iter()
        .map(|s| (s.clone(), StreamDefinition::any("inspected stream")))
        .collect()
}

/// Full rendering of sample `i` of a stream.
fn render_sample(value: &Value, i: usize) -> String {
    match value {
        Value::Array(a) if a.rank() == 1 => format_g6(a.data()[i]),
        Value::Array(a) => {
            let row: Vec<String> = a.row(i).iter().map(|&v| format_g6(v)).collect();
            format!("[{}]", row.join(", "))
        }
        Value::Indices(v) => v[i].to_string(),
        Value::Strings(v) => v[i].clone(),
        Value::Scalar(s) => format_g6(*s),
    }
}

/// Compact per-sample value: argmax for rank-2 arrays, the token for strings.
fn export_sample(value: &Value, i: usize) -> String {
    match value {
        Value::Array(a) if a.rank() == 2 => {
            let row = a.row(i);
            let best = (0..row.len()).fold(0, |best, j| if row[j] > row[best] { j } else { best });
            best.to_string()
        }
        other => render_sample(other, i),
    }
}

pub const VIEWER_DEFAULTS: &str = "
input_streams: []
sample_count: 1
";

/// Logs the first samples of selected streams; leaves the batch untouched.
pub struct StreamViewer {
    cfg: ComponentConfig,
    streams: Vec<String>,
    sample_count: usize,
}

impl StreamViewer {
    pub fn new(cfg: ComponentConfig) -> Result<Self> {
        let streams = input_streams(&cfg)?;
        let sample_count = cfg.param_usize("sample_count")?;
        Ok(Self {
            cfg,
            streams,
            sample_count,
        })
    }

    /// One line per shown sample and stream.
    pub fn render(&self, batch: &Batch) -> Result<Vec<String>> {
        let shown = self.sample_count.min(batch.batch_size());
        let mut lines = Vec::new();
        for i in 0..shown {
            for s in &self.streams {
                let value = batch.get(self.cfg.stream(s))?;
                lines.push(format!(
                    "[{}] sample {} {s}: {}",
                    self.cfg.name,
                    batch.sample_indices()[i],
                    render_sample(value, i)
                ));
            }
        }
        Ok(lines)
    }
}

impl Component for StreamViewer {
    fn config(&self) -> &ComponentConfig {
        &self.cfg
    }

    fn role(&self) -> Role {
        Role::Viewer
    }

    fn initialize(&mut self, _ctx: &mut InitContext<'_>) -> Result<()> {
        Ok(())
    }

    fn input_definitions(&self) -> Definitions {
        any_definitions(&self.streams)
    }

    fn output_definitions(&self) -> Definitions {
        Definitions::new()
    }

    fn execute(&mut self, batch: &mut Batch, _mode: Mode) -> Result<()> {
        for line in self.render(batch)? {
            log::info!("{line}");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportMode {
    Overwrite,
    Append,
}

pub const EXPORTER_DEFAULTS: &str = "
input_streams: []
# relative paths resolve under the experiment's exports directory
path: export.csv
mode: overwrite
";

/// Writes one CSV row per sample: `sample_index` then each stream's value.
pub struct CsvExporter {
    cfg: ComponentConfig,
    streams: Vec<String>,
    mode: ExportMode,
    path: PathBuf,
    header_pending: bool,
}

impl CsvExporter {
    pub fn new(cfg: ComponentConfig) -> Result<Self> {
        let streams = input_streams(&cfg)?;
        let mode = match cfg.param_str("mode")? {
            "overwrite" => ExportMode::Overwrite,
            "append" => ExportMode::Append,
            other => {
                return Err(Error::invalid(format!(
                    "{}: mode must be 'overwrite' or 'append', got '{other}'",
                    cfg.name
                )))
            }
        };
        let path = PathBuf::from(cfg.param_str("path")?);
        Ok(Self {
            cfg,
            streams,
            mode,
            path,
            header_pending: true,
        })
    }

    pub fn path(&self) -> &std::path::Path {
        &self.path
    }
}

impl Component for CsvExporter {
    fn config(&self) -> &ComponentConfig {
        &self.cfg
    }

    fn role(&self) -> Role {
        Role::Viewer
    }

    fn initialize(&mut self, ctx: &mut InitContext<'_>) -> Result<()> {
        if let (true, Some(dir)) = (self.path.is_relative(), ctx.output_dir) {
            self.path = dir.join(&self.path);
        }
        if let Some(parent) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.header_pending = match self.mode {
            ExportMode::Overwrite => {
                std::fs::File::create(&self.path).map_err(|e| Error::io(&self.path, e))?;
                true
            }
            ExportMode::Append => std::fs::metadata(&self.path).map_or(true, |m| m.len() == 0),
        };
        Ok(())
    }

    fn input_definitions(&self) -> Definitions {
        any_definitions(&self.streams)
    }

    fn output_definitions(&self) -> Definitions {
        Definitions::new()
    }

    fn execute(&mut self, batch: &mut Batch, _mode: Mode) -> Result<()> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let io = |e: csv::Error| Error::io(&self.path, e);
        if self.header_pending {
            let mut header = vec!["sample_index".to_string()];
            header.extend(self.streams.iter().cloned());
            w.write_record(&header).map_err(io)?;
        }
        let values = self
            .streams
            .iter()
            .map(|s| batch.get(self.cfg.stream(s)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        for (i, sample) in batch.sample_indices().iter().enumerate() {
            let mut row = vec![sample.to_string()];
            row.extend(values.iter().map(|v| export_sample(v, i)));
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(&self.path, e))?;
        self.header_pending = false;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{resolve_component_config, ConfigTree, GlobalParams};
    use crate::NDArray;

    fn cfg(defaults: &str, section: &str) -> ComponentConfig {
        let d = ConfigTree::from_yaml_str(defaults, "").unwrap();
        resolve_component_config(&d, &ConfigTree::from_yaml_str(section, "").unwrap(), "v").unwrap()
    }

    fn batch(n: usize) -> Batch {
        let mut b = Batch::new((10..10 + n).collect()).unwrap();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0, i as f64 % 2.0]).collect();
        b.insert("predictions", Value::Array(NDArray::from_rows(&rows).unwrap()))
            .unwrap();
        b.insert("labels", Value::Strings((0..n).map(|i| format!("t{i}")).collect()))
            .unwrap();
        b
    }

    #[test]
    fn viewer_shows_min_of_count_and_batch() {
        let v = StreamViewer::new(cfg(
            VIEWER_DEFAULTS,
            "{type: v, input_streams: [labels], sample_count: 3}",
        ))
        .unwrap();
        assert_eq!(v.render(&batch(2)).unwrap().len(), 2);
        assert_eq!(v.render(&batch(5)).unwrap().len(), 3);
        let none = StreamViewer::new(cfg(
            VIEWER_DEFAULTS,
            "{type: v, input_streams: [labels], sample_count: 0}",
        ))
        .unwrap();
        assert!(none.render(&batch(5)).unwrap().is_empty());
    }

    #[test]
    fn viewer_passes_batch_through() {
        let mut v = StreamViewer::new(cfg(VIEWER_DEFAULTS, "{type: v, input_streams: [predictions, labels]}")).unwrap();
        let mut b = batch(4);
        let before = b.clone();
        v.execute(&mut b, Mode::Eval).unwrap();
        assert_eq!(b, before);
    }

    fn exporter(dir: &std::path::Path, mode: &str) -> CsvExporter {
        let section = format!("{{type: e, input_streams: [predictions, labels], path: out.csv, mode: {mode}}}");
        let mut e = CsvExporter::new(cfg(EXPORTER_DEFAULTS, &section)).unwrap();
        e.initialize(&mut InitContext {
            globals: &mut GlobalParams::new(),
            output_dir: Some(dir),
        })
        .unwrap();
        e
    }

    fn lines(path: &std::path::Path) -> Vec<String> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(str::to_string)
            .collect()
    }

    #[test]
    fn exporter_writes_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut e = exporter(dir.path(), "overwrite");
        e.execute(&mut batch(4), Mode::Eval).unwrap();
        let l = lines(e.path());
        assert_eq!(l.len(), 5);
        assert_eq!(l[0], "sample_index,predictions,labels");
        assert_eq!(l[1], "10,0,t0");
        assert_eq!(l[2], "11,1,t1");
    }

    #[test]
    fn append_and_overwrite_modes() {
        let dir = tempfile::tempdir().unwrap();
        let mut e = exporter(dir.path(), "append");
        e.execute(&mut batch(4), Mode::Eval).unwrap();
        e.execute(&mut batch(4), Mode::Eval).unwrap();
        assert_eq!(lines(e.path()).len(), 9);
        let mut e = exporter(dir.path(), "overwrite");
        e.execute(&mut batch(3), Mode::Eval).unwrap();
        assert_eq!(lines(e.path()).len(), 4);
    }
}
