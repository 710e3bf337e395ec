//! Output directory layout and helpers shared by the training commands.

use std::fs;
use std::path::{Path, PathBuf};

use hypkit::autodiff::{Tape, Var};
use hypkit::data::{gen_tree, load_edge_list, Graph};
use hypkit::nn::{ParamStore, Session};
use hypkit::optim::Optimizer;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::MetricsWriter;

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "model.hypc";

/// An output directory holding `config.txt`, `metrics.csv` and a checkpoint.
pub struct RunDir {
    pub dir: PathBuf,
    pub metrics: MetricsWriter,
}

impl RunDir {
    pub fn create(dir: &Path, cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(dir)?;
        fs::write(RunConfig::out_file(dir), cfg.to_string())?;
        let metrics = MetricsWriter::create(&dir.join(METRICS_FILE))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            metrics,
        })
    }

    pub fn save(
        &self,
        cfg: &RunConfig,
        store: &ParamStore,
        opt: Option<&Optimizer>,
    ) -> Result<PathBuf> {
        let path = self.dir.join(CHECKPOINT_FILE);
        Checkpoint::capture(&cfg.to_string(), store, opt).save(&path)?;
        Ok(path)
    }
}

/// `tree:<branching>,<depth>` generates a balanced tree; anything else is an edge-list path.
pub fn load_graph(spec: &str, seed: u64) -> Result<Graph> {
    if let Some(rest) = spec.strip_prefix("tree:") {
        let parsed: Vec<usize> = rest
            .split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad tree spec {spec:?}")))
            })
            .collect::<Result<_>>()?;
        let [b, h] = parsed[..] else {
            return Err(CliError::Usage(format!(
                "tree spec {spec:?} needs <branching>,<depth>"
            )));
        };
        return Ok(gen_tree(b, h, seed)?);
    }
    Ok(load_edge_list(spec)?)
}

/// One forward/backward pass over a fresh tape followed by an optimizer step.
/// Returns the loss.
pub fn train_step<F>(store: &mut ParamStore, opt: &mut Optimizer, seed: u64, loss: F) -> Result<f64>
where
    F: for<'t> FnOnce(&Session<'t>) -> hypkit::Result<Var<'t>>,
{
    let tape = Tape::new();
    let s = Session::new(&tape, store, true, seed);
    let l = loss(&s)?;
    let value = l.value().item()?;
    tape.backward(l)?;
    let grads = s.grads();
    opt.step(store, &grads)?;
    Ok(value)
}

/// Index of the largest entry in each row.
pub fn argmax_rows(logits: &hypkit::Tensor) -> Vec<usize> {
    logits
        .rows()
        .map(|r| (0..r.len()).fold(0, |best, j| if r[j] > r[best] { j } else { best }))
        .collect()
}
