//! `key = value` run configuration with per-task key tables.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hypkit::manifolds::Curvature;
use hypkit::optim::{GroupConfig, Method};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Embed,
    Gnn,
    TransformerToy,
    Lora,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Embed => "embed",
            Task::Gnn => "gnn",
            Task::TransformerToy => "transformer-toy",
            Task::Lora => "lora",
        }
    }

    fn keys(self) -> &'static [Key] {
        match self {
            Task::Embed => EMBED_KEYS,
            Task::Gnn => GNN_KEYS,
            Task::TransformerToy => TOY_KEYS,
            Task::Lora => LORA_KEYS,
        }
    }
}

impl FromStr for Task {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        [Task::Embed, Task::Gnn, Task::TransformerToy, Task::Lora]
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown task {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    UInt,
    /// Strictly positive float.
    Pos,
    /// Float in `[0, 1)`.
    Unit,
    Curv,
    CurvList,
    Choice(&'static [&'static str]),
    Text,
}

#[derive(Clone, Copy, Debug)]
pub struct Key {
    pub name: &'static str,
    kind: Kind,
    pub default: &'static str,
    pub doc: &'static str,
}

const fn key(name: &'static str, kind: Kind, default: &'static str, doc: &'static str) -> Key {
    Key {
        name,
        kind,
        default,
        doc,
    }
}

const OPT: Kind = Kind::Choice(&["sgd", "adam"]);

macro_rules! common_keys {
    ($epochs:literal) => {
        [
            key(
                "seed",
                Kind::UInt,
                "0",
                "seed for data generation, initialization and sampling",
            ),
            key("epochs", Kind::UInt, $epochs, "training epochs"),
            key(
                "threads",
                Kind::UInt,
                "1",
                "worker threads for batched evaluation",
            ),
        ]
    };
}

const EMBED_KEYS: &[Key] = &{
    let c = common_keys!("600");
    [
        c[0],
        c[1],
        c[2],
        key(
            "dataset",
            Kind::Text,
            "tree:3,5",
            "edge-list path or tree:<branching>,<depth>",
        ),
        key("dim", Kind::UInt, "10", "embedding dimension"),
        key(
            "curvature",
            Kind::Curv,
            "-1",
            "negative curvature or \"learnable\"",
        ),
        key(
            "manifold",
            Kind::Choice(&["lorentz", "euclidean"]),
            "lorentz",
            "euclidean trains the flat baseline",
        ),
        key(
            "pairs",
            Kind::UInt,
            "0",
            "sampled node pairs per step, 0 for all pairs",
        ),
        key(
            "hyp_lr",
            Kind::Pos,
            "0.2",
            "learning rate for embedding points",
        ),
        key(
            "hyp_optimizer",
            OPT,
            "adam",
            "optimizer for embedding points",
        ),
        key(
            "euclid_lr",
            Kind::Pos,
            "0.01",
            "learning rate for the raw curvature",
        ),
        key(
            "init_std",
            Kind::Pos,
            "0.1",
            "tangent standard deviation of the initial points",
        ),
        key(
            "ramp",
            Kind::Unit,
            "0.5",
            "fraction of epochs over which distance targets grow to full scale",
        ),
    ]
};

const GNN_KEYS: &[Key] = &{
    let c = common_keys!("1000");
    [
        c[0],
        c[1],
        c[2],
        key(
            "dataset",
            Kind::Text,
            "tree:3,6",
            "edge-list path or tree:<branching>,<depth>",
        ),
        key(
            "labels",
            Kind::Text,
            "",
            "node label file (node classification)",
        ),
        key(
            "features",
            Kind::Text,
            "walk:16,1",
            "feature file, walk:<dim>,<sigma> for random-walk features, or empty for one-hot ids",
        ),
        key(
            "gnn_task",
            Kind::Choice(&["lp", "nc"]),
            "lp",
            "link prediction or node classification",
        ),
        key(
            "conv",
            Kind::Choice(&["tangent", "centroid"]),
            "tangent",
            "aggregation variant",
        ),
        key("dim", Kind::UInt, "16", "hidden and output dimension"),
        key("layers", Kind::UInt, "2", "graph convolution layers"),
        key(
            "curvature",
            Kind::Curv,
            "-1",
            "negative curvature or \"learnable\"",
        ),
        key(
            "sweep",
            Kind::CurvList,
            "",
            "comma-separated curvatures to sweep; best validation wins",
        ),
        key("dropout", Kind::Unit, "0", "dropout on tangent features"),
        key("euclid_lr", Kind::Pos, "0.01", "Euclidean learning rate"),
        key("euclid_wd", Kind::Unit, "0.0005", "Euclidean weight decay"),
        key("euclid_optimizer", OPT, "adam", "Euclidean optimizer"),
        key(
            "patience",
            Kind::UInt,
            "100",
            "epochs without validation improvement before stopping",
        ),
    ]
};

const TOY_KEYS: &[Key] = &{
    let c = common_keys!("30");
    [
        c[0],
        c[1],
        c[2],
        key(
            "mode",
            Kind::Choice(&["sequence", "image"]),
            "sequence",
            "majority-token sequences or stripe images",
        ),
        key(
            "vocab",
            Kind::UInt,
            "8",
            "sequence vocabulary size (also the class count)",
        ),
        key("seq_len", Kind::UInt, "16", "sequence length"),
        key("image_size", Kind::UInt, "8", "image side length"),
        key("patch", Kind::UInt, "4", "patch side length"),
        key("classes", Kind::UInt, "2", "image classes"),
        key("noise", Kind::Unit, "0.1", "pixel noise standard deviation"),
        key("train_size", Kind::UInt, "5000", "training samples"),
        key("test_size", Kind::UInt, "1000", "test samples"),
        key("dim", Kind::UInt, "64", "model dimension"),
        key("heads", Kind::UInt, "4", "attention heads"),
        key("layers", Kind::UInt, "2", "transformer blocks"),
        key(
            "curvature",
            Kind::Curv,
            "-1",
            "negative curvature or \"learnable\"",
        ),
        key("dropout", Kind::Unit, "0", "dropout inside the blocks"),
        key("batch_size", Kind::UInt, "32", "minibatch size"),
        key("euclid_lr", Kind::Pos, "0.003", "Euclidean learning rate"),
        key("euclid_wd", Kind::Unit, "0", "Euclidean weight decay"),
        key("euclid_optimizer", OPT, "adam", "Euclidean optimizer"),
        key(
            "hyp_lr",
            Kind::Pos,
            "0.003",
            "learning rate for embedding tables",
        ),
        key(
            "hyp_optimizer",
            OPT,
            "adam",
            "optimizer for embedding tables",
        ),
        key(
            "patience",
            Kind::UInt,
            "3",
            "epochs without validation improvement before stopping",
        ),
    ]
};

const LORA_KEYS: &[Key] = &{
    let c = common_keys!("10");
    [
        c[0],
        c[1],
        c[2],
        key(
            "checkpoint",
            Kind::Text,
            "",
            "output directory of a transformer-toy run",
        ),
        key("rank", Kind::UInt, "4", "adapter rank"),
        key(
            "alpha",
            Kind::Pos,
            "8",
            "adapter scale numerator (scale = alpha / rank)",
        ),
        key("euclid_lr", Kind::Pos, "0.003", "adapter learning rate"),
        key("batch_size", Kind::UInt, "32", "minibatch size"),
    ]
};

/// Curvature setting of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CurvSpec {
    Fixed(f64),
    Learnable,
}

impl CurvSpec {
    /// Learnable curvatures start at `K = -1`.
    pub fn curvature(self) -> hypkit::Result<Curvature> {
        match self {
            CurvSpec::Fixed(k) => Curvature::new(k),
            CurvSpec::Learnable => Curvature::learnable(-1.0),
        }
    }
}

impl fmt::Display for CurvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurvSpec::Fixed(k) => write!(f, "{k}"),
            CurvSpec::Learnable => f.write_str("learnable"),
        }
    }
}

impl FromStr for CurvSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "learnable" {
            return Ok(CurvSpec::Learnable);
        }
        match s.parse::<f64>() {
            Ok(k) if k < 0.0 && k.is_finite() => Ok(CurvSpec::Fixed(k)),
            _ => Err(format!(
                "curvature {s:?} must be a negative number or \"learnable\""
            )),
        }
    }
}

fn check(kind: Kind, value: &str) -> std::result::Result<(), String> {
    let float = || {
        value
            .parse::<f64>()
            .map_err(|_| format!("{value:?} is not a number"))
    };
    match kind {
        Kind::UInt => value
            .parse::<u64>()
            .map(|_| ())
            .map_err(|_| format!("{value:?} is not a non-negative integer")),
        Kind::Pos => match float()? {
            v if v > 0.0 && v.is_finite() => Ok(()),
            _ => Err(format!("{value} must be positive")),
        },
        Kind::Unit => match float()? {
            v if (0.0..1.0).contains(&v) => Ok(()),
            _ => Err(format!("{value} must lie in [0, 1)")),
        },
        Kind::Curv => value.parse::<CurvSpec>().map(|_| ()),
        Kind::CurvList => value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .try_for_each(|s| s.parse::<CurvSpec>().map(|_| ())),
        Kind::Choice(options) => {
            if options.contains(&value) {
                Ok(())
            } else {
                Err(format!("{value:?} is not one of {options:?}"))
            }
        }
        Kind::Text => Ok(()),
    }
}

/// Fully resolved configuration: every key of the task holds a value.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    task: Task,
    values: BTreeMap<&'static str, String>,
}

impl RunConfig {
    pub fn defaults(task: Task) -> Self {
        Self {
            task,
            values: task
                .keys()
                .iter()
                .map(|k| (k.name, k.default.to_string()))
                .collect(),
        }
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn documented_keys(task: Task) -> &'static [Key] {
        task.keys()
    }

    /// Parses `key = value` lines over the task defaults. A `task` line, if
    /// present, must name `task`.
    pub fn parse(task: Task, text: &str) -> Result<Self> {
        let mut cfg = Self::defaults(task);
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let (k, v) = l.split_once('=').ok_or_else(|| CliError::Config {
                line,
                detail: format!("expected key = value, found {l:?}"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(CliError::Config {
                    line,
                    detail: format!("duplicate key {k:?}"),
                });
            }
            if k == "task" {
                if v != task.name() {
                    return Err(CliError::Config {
                        line,
                        detail: format!("config is for task {v:?}, not {:?}", task.name()),
                    });
                }
                continue;
            }
            cfg.set(k, v)
                .map_err(|detail| CliError::Config { line, detail })?;
        }
        Ok(cfg)
    }

    pub fn load(task: Task, path: &Path) -> Result<Self> {
        Self::parse(task, &std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let spec = self
            .task
            .keys()
            .iter()
            .find(|k| k.name == key)
            .ok_or_else(|| format!("unknown key {key:?} for task {}", self.task.name()))?;
        check(spec.kind, value).map_err(|e| format!("{key}: {e}"))?;
        self.values.insert(spec.name, value.to_string());
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("key {key:?} is not defined for task {}", self.task.name()))
    }

    pub fn text(&self, key: &str) -> &str {
        self.raw(key)
    }

    pub fn usize(&self, key: &str) -> usize {
        self.raw(key).parse().expect("validated on set")
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.raw(key).parse().expect("validated on set")
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.raw(key).parse().expect("validated on set")
    }

    pub fn curvature(&self) -> CurvSpec {
        self.raw("curvature").parse().expect("validated on set")
    }

    pub fn sweep(&self) -> Vec<CurvSpec> {
        self.raw("sweep")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().expect("validated on set"))
            .collect()
    }

    /// Optimizer settings from `<prefix>_lr`, `<prefix>_wd` and `<prefix>_optimizer`.
    pub fn group(&self, prefix: &str) -> GroupConfig {
        let lr = self.f64(&format!("{prefix}_lr"));
        let method = self
            .values
            .get(format!("{prefix}_optimizer").as_str())
            .map_or(Method::Adam, |m| m.parse().expect("validated on set"));
        let wd = self
            .values
            .get(format!("{prefix}_wd").as_str())
            .map_or(0.0, |w| w.parse().expect("validated on set"));
        let base = match method {
            Method::Sgd => GroupConfig::sgd(lr),
            Method::Adam => GroupConfig::adam(lr),
        };
        base.with_weight_decay(wd)
    }

    pub fn out_file(dir: &Path) -> PathBuf {
        dir.join("config.txt")
    }
}

/// Echo: `task` first, then every key in sorted order. Parsing the echo
/// reproduces the configuration.
impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "task = {}", self.task.name())?;
        for (k, v) in &self.values {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        for task in [Task::Embed, Task::Gnn, Task::TransformerToy, Task::Lora] {
            let mut cfg = RunConfig::defaults(task);
            cfg.set("seed", "17").unwrap();
            let back = RunConfig::parse(task, &cfg.to_string()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn unknown_and_malformed_keys_are_rejected() {
        let err = RunConfig::parse(Task::Gnn, "dim = 8\nheads = 4\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 2, .. }), "{err}");
        assert!(matches!(
            RunConfig::parse(Task::Gnn, "dim 8"),
            Err(CliError::Config { line: 1, .. })
        ));
        assert!(RunConfig::parse(Task::Gnn, "dim = -3").is_err());
        assert!(RunConfig::parse(Task::Gnn, "curvature = 0.5").is_err());
        assert!(RunConfig::parse(Task::Gnn, "dropout = 1").is_err());
        assert!(RunConfig::parse(Task::Gnn, "dim = 8\ndim = 9").is_err());
        assert!(RunConfig::parse(Task::Gnn, "task = embed").is_err());
    }

    #[test]
    fn typed_access() {
        let cfg = RunConfig::parse(
            Task::Gnn,
            "# comment\ncurvature = learnable\nsweep = -0.25, -1, learnable\neuclid_optimizer = sgd\n",
        )
        .unwrap();
        assert_eq!(cfg.curvature(), CurvSpec::Learnable);
        assert_eq!(
            cfg.sweep(),
            vec![
                CurvSpec::Fixed(-0.25),
                CurvSpec::Fixed(-1.0),
                CurvSpec::Learnable
            ]
        );
        let g = cfg.group("euclid");
        assert_eq!(g.method, Method::Sgd);
        assert_eq!(g.weight_decay, 0.0005);
        assert_eq!(cfg.usize("patience"), 100);
    }
}
