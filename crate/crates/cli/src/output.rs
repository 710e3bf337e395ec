//! Metrics CSV streaming and logging setup.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;

pub const METRICS_HEADER: &str = "epoch,split,metric,value";

/// Streams `epoch,split,metric,value` rows, flushing after every row.
pub struct MetricsWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{METRICS_HEADER}")?;
        out.flush()?;
        Ok(Self {
            out,
            path: path.to_path_buf(),
        })
    }

    pub fn row(&mut self, epoch: usize, split: &str, metric: &str, value: f64) -> Result<()> {
        writeln!(self.out, "{epoch},{split},{metric},{value}")?;
        self.out.flush()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Log filter from `HYPC_LOG` (`quiet`, `info` or `debug`); defaults to `info`.
pub fn log_level(value: Option<&str>) -> log::LevelFilter {
    match value {
        Some("quiet") => log::LevelFilter::Error,
        Some("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Info,
    }
}

pub fn init_logging() {
    let level = log_level(std::env::var("HYPC_LOG").ok().as_deref());
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}
