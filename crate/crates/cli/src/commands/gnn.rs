//! Graph convolution training for link prediction and node classification.

use std::path::Path;
use std::sync::Arc;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hypkit::autodiff::{SparseMatrix, Tape, Var};
use hypkit::data::{
    auc, f1_micro, gen_walk_features, load_features, load_labels, sample_negatives_with, split_lp,
    Edge, Graph, LpSplit,
};
use hypkit::nn::{
    dropout, geometry, loss, normalized_adjacency, Activation, CentroidConv, Curv, LorentzMlr,
    ParamId, ParamStore, Session, TangentConv,
};
use hypkit::optim::{GroupConfig, GroupKind, Optimizer, ParamGroup};
use hypkit::Tensor;

use super::common::{argmax_rows, load_graph, train_step, RunDir};
use crate::config::{CurvSpec, RunConfig};
use crate::error::{CliError, Result};

/// Fermi-Dirac decoder radius and temperature.
pub const FD_RADIUS: f64 = 2.0;
pub const FD_TEMPERATURE: f64 = 1.0;
/// Node split for classification: train and validation fractions, rest is test.
pub const NC_TRAIN: f64 = 0.7;
pub const NC_VAL: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GnnTask {
    LinkPrediction,
    NodeClassification,
}

impl GnnTask {
    pub fn metric(self) -> &'static str {
        match self {
            GnnTask::LinkPrediction => "auc",
            GnnTask::NodeClassification => "f1",
        }
    }
}

/// Result of training at one curvature setting.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub curvature: CurvSpec,
    pub best_epoch: usize,
    pub val: f64,
    pub test: f64,
    /// Curvature at the best epoch (differs from the setting when learnable).
    pub k: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GnnOutcome {
    pub task: GnnTask,
    pub results: Vec<SweepResult>,
    /// Index into `results` with the highest validation metric.
    pub best: usize,
}

impl GnnOutcome {
    pub fn best(&self) -> &SweepResult {
        &self.results[self.best]
    }

    pub fn summary(&self) -> String {
        let m = self.task.metric();
        let mut s = String::new();
        for r in &self.results {
            s.push_str(&format!(
                "K {:<10} best epoch {:>4}: val {m} {:.4}, test {m} {:.4} (K at best {:.4})\n",
                r.curvature.to_string(),
                r.best_epoch,
                r.val,
                r.test,
                r.k
            ));
        }
        let b = self.best();
        s.push_str(&format!(
            "selected K {}: test {m} {:.4}",
            b.curvature, b.test
        ));
        s
    }
}

enum Conv {
    Tangent(TangentConv),
    Centroid(CentroidConv),
}

impl Conv {
    fn forward<'t>(
        &self,
        s: &Session<'t>,
        x: Var<'t>,
        adj: &Arc<SparseMatrix>,
    ) -> hypkit::Result<Var<'t>> {
        match self {
            Conv::Tangent(c) => c.forward(s, x, adj),
            Conv::Centroid(c) => c.forward(s, x, adj),
        }
    }
}

struct Model {
    curv: Curv,
    convs: Vec<Conv>,
    head: Option<LorentzMlr>,
    dropout: f64,
    weights: Vec<ParamId>,
}

impl Model {
    fn new(
        store: &mut ParamStore,
        cfg: &RunConfig,
        spec: CurvSpec,
        d_in: usize,
        classes: Option<usize>,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.u64("seed") ^ 0x6e6e);
        let curv = store.curvature("curvature", spec.curvature()?)?;
        let dim = cfg.usize("dim");
        let layers = cfg.usize("layers");
        if layers == 0 || dim == 0 {
            return Err(CliError::Usage(
                "gnn needs at least one layer and a positive dim".into(),
            ));
        }
        let mut convs = Vec::new();
        let mut weights = Vec::new();
        for i in 0..layers {
            let name = format!("conv{i}");
            let d = if i == 0 { d_in } else { dim };
            let act = if i + 1 < layers {
                Activation::Relu
            } else {
                Activation::Identity
            };
            let conv = match cfg.text("conv") {
                "centroid" => {
                    let c = CentroidConv::new(store, &name, d, dim, curv, curv, &mut rng)?
                        .with_activation(act);
                    weights.extend(c.params());
                    Conv::Centroid(c)
                }
                _ => {
                    let c = TangentConv::new(store, &name, d, dim, curv, curv, &mut rng)?
                        .with_activation(act);
                    weights.extend(c.params());
                    Conv::Tangent(c)
                }
            };
            convs.push(conv);
        }
        let head = match classes {
            Some(k) => {
                let h = LorentzMlr::new(store, "head", dim, k, curv, &mut rng)?;
                weights.extend(h.params());
                Some(h)
            }
            None => None,
        };
        Ok(Self {
            curv,
            convs,
            head,
            dropout: cfg.f64("dropout"),
            weights,
        })
    }

    /// Node embeddings `[n, dim + 1]`.
    fn embed<'t>(
        &self,
        s: &Session<'t>,
        features: &Tensor,
        adj: &Arc<SparseMatrix>,
    ) -> hypkit::Result<Var<'t>> {
        let c = s.c(self.curv)?;
        let mut x = dropout(
            s,
            geometry::expmap0(s.constant(features.clone()), c)?,
            self.dropout,
            c,
        )?;
        for conv in &self.convs {
            x = conv.forward(s, x, adj)?;
        }
        Ok(x)
    }

    fn optimizer(&self, cfg: &RunConfig) -> Result<Optimizer> {
        let mut groups = vec![ParamGroup {
            name: "weights".into(),
            kind: GroupKind::Euclidean,
            params: self.weights.clone(),
            config: cfg.group("euclid"),
        }];
        if let Curv::Learned(id) = self.curv {
            // no weight decay on the raw curvature
            let base = cfg.group("euclid");
            groups.push(ParamGroup {
                name: "curvature".into(),
                kind: GroupKind::Euclidean,
                params: vec![id],
                config: GroupConfig {
                    weight_decay: 0.0,
                    ..base
                },
            });
        }
        Ok(Optimizer::new(groups)?)
    }
}

/// Fermi-Dirac logits for node pairs under embeddings `z`.
fn edge_logits<'t>(z: Var<'t>, c: Var<'t>, edges: &[Edge]) -> hypkit::Result<Var<'t>> {
    let (u, v): (Vec<usize>, Vec<usize>) = edges.iter().copied().unzip();
    let d = loss::row_dist_sq(z.index_select(&u)?, z.index_select(&v)?, c)?;
    let t = z.tape();
    loss::fermi_dirac_logits(d, t.scalar(FD_RADIUS), t.scalar(FD_TEMPERATURE))
}

/// Task data shared by every curvature in a sweep.
enum Data {
    Lp {
        split: LpSplit,
        adj: Arc<SparseMatrix>,
    },
    Nc {
        labels: Vec<usize>,
        classes: usize,
        train: Vec<usize>,
        val: Vec<usize>,
        test: Vec<usize>,
        adj: Arc<SparseMatrix>,
    },
}

impl Data {
    fn adj(&self) -> &Arc<SparseMatrix> {
        match self {
            Data::Lp { adj, .. } | Data::Nc { adj, .. } => adj,
        }
    }
}

/// `""` gives one-hot node ids, `walk:<dim>,<sigma>` random-walk features,
/// anything else is a feature file.
fn node_features(spec: &str, graph: &Graph, seed: u64) -> Result<Tensor> {
    let n = graph.num_nodes();
    let raw = if spec.is_empty() {
        Tensor::from_fn(&[n, n], |i| if i / n == i % n { 1.0 } else { 0.0 })
    } else if let Some(rest) = spec.strip_prefix("walk:") {
        let (d, sigma) = rest
            .split_once(',')
            .and_then(|(d, s)| Some((d.trim().parse().ok()?, s.trim().parse().ok()?)))
            .ok_or_else(|| {
                CliError::Usage(format!("feature spec {spec:?} needs walk:<dim>,<sigma>"))
            })?;
        gen_walk_features(graph, d, sigma, seed ^ 0xfea7)?
    } else {
        load_features(spec)?
    };
    if raw.num_rows() != n {
        return Err(CliError::Usage(format!(
            "{} feature rows for {n} nodes",
            raw.num_rows()
        )));
    }
    // one global scale so the mean feature norm is 1
    let mean = raw
        .rows()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum::<f64>()
        / n as f64;
    Ok(if mean > 0.0 {
        raw.scale(1.0 / mean)
    } else {
        raw
    })
}

fn prepare(cfg: &RunConfig, graph: &Graph, task: GnnTask, seed: u64) -> Result<Data> {
    let n = graph.num_nodes();
    match task {
        GnnTask::LinkPrediction => {
            let split = split_lp(graph, seed)?;
            let adj = Arc::new(normalized_adjacency(n, &split.train)?);
            Ok(Data::Lp { split, adj })
        }
        GnnTask::NodeClassification => {
            let labels = match (cfg.text("labels"), graph.labels()) {
                ("", Some(l)) => l.to_vec(),
                ("", None) => {
                    return Err(CliError::Usage("node classification needs labels".into()))
                }
                (path, _) => load_labels(path, n)?,
            };
            let classes = labels.iter().max().map_or(0, |m| m + 1);
            let mut order: Vec<usize> = (0..n).collect();
            // offset so the split does not replay the shuffle that numbered generated trees
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5171));
            let n_train = (NC_TRAIN * n as f64).round() as usize;
            let n_val = (NC_VAL * n as f64).round() as usize;
            let test = order.split_off(n_train + n_val);
            let val = order.split_off(n_train);
            let adj = Arc::new(normalized_adjacency(n, graph.edges())?);
            Ok(Data::Nc {
                labels,
                classes,
                train: order,
                val,
                test,
                adj,
            })
        }
    }
}

/// Validation and test metric for the current parameters.
fn evaluate(
    model: &Model,
    store: &ParamStore,
    features: &Tensor,
    data: &Data,
) -> Result<(f64, f64)> {
    let tape = Tape::new();
    let s = Session::eval(&tape, store);
    let z = model.embed(&s, features, data.adj())?;
    match data {
        Data::Lp { split, .. } => {
            let c = s.c(model.curv)?;
            let score = |pos: &[Edge], neg: &[Edge]| -> Result<f64> {
                let all: Vec<Edge> = pos.iter().chain(neg).copied().collect();
                let logits = edge_logits(z, c, &all)?.value();
                let labels: Vec<bool> = (0..all.len()).map(|i| i < pos.len()).collect();
                Ok(auc(logits.data(), &labels)?)
            };
            Ok((
                score(&split.val, &split.val_neg)?,
                score(&split.test, &split.test_neg)?,
            ))
        }
        Data::Nc {
            labels, val, test, ..
        } => {
            let head = model.head.as_ref().expect("classification head");
            let preds = argmax_rows(&head.forward(&s, z)?.value());
            let f1 = |ids: &[usize]| -> Result<f64> {
                let p: Vec<usize> = ids.iter().map(|&i| preds[i]).collect();
                let l: Vec<usize> = ids.iter().map(|&i| labels[i]).collect();
                Ok(f1_micro(&p, &l)?)
            };
            Ok((f1(val)?, f1(test)?))
        }
    }
}

fn train_one(
    cfg: &RunConfig,
    spec: CurvSpec,
    graph: &Graph,
    features: &Tensor,
    data: &Data,
    run: &mut RunDir,
    tag: &str,
) -> Result<(SweepResult, ParamStore)> {
    let seed = cfg.u64("seed");
    let mut store = ParamStore::new();
    let classes = match data {
        Data::Nc { classes, .. } => Some(*classes),
        Data::Lp { .. } => None,
    };
    let model = Model::new(&mut store, cfg, spec, features.shape()[1], classes)?;
    let mut opt = model.optimizer(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let patience = cfg.usize("patience");
    let metric = format!(
        "{}{tag}",
        match data {
            Data::Lp { .. } => "auc",
            Data::Nc { .. } => "f1",
        }
    );
    let mut best: Option<(f64, f64, usize, ParamStore)> = None;
    for epoch in 1..=cfg.usize("epochs") {
        let step_seed = seed.wrapping_mul(1_000_003).wrapping_add(epoch as u64);
        let loss = match data {
            Data::Lp { split, adj } => {
                let negatives =
                    sample_negatives_with(graph, split.train.len(), &Default::default(), &mut rng)?;
                let pairs: Vec<Edge> = split.train.iter().chain(&negatives).copied().collect();
                let targets = Tensor::from_fn(&[pairs.len()], |i| {
                    if i < split.train.len() {
                        1.0
                    } else {
                        0.0
                    }
                });
                train_step(&mut store, &mut opt, step_seed, |s| {
                    let z = model.embed(s, features, adj)?;
                    loss::bce_with_logits(edge_logits(z, s.c(model.curv)?, &pairs)?, &targets)
                })?
            }
            Data::Nc {
                labels, train, adj, ..
            } => {
                let head = model.head.as_ref().expect("classification head");
                let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
                train_step(&mut store, &mut opt, step_seed, |s| {
                    let z = model.embed(s, features, adj)?.index_select(train)?;
                    loss::cross_entropy(head.forward(s, z)?, &y)
                })?
            }
        };
        let (val, test) = evaluate(&model, &store, features, data)?;
        run.metrics
            .row(epoch, "train", &format!("loss{tag}"), loss)?;
        run.metrics.row(epoch, "val", &metric, val)?;
        run.metrics.row(epoch, "test", &metric, test)?;
        if let Curv::Learned(_) = model.curv {
            run.metrics.row(
                epoch,
                "train",
                &format!("curvature{tag}"),
                store.k(model.curv),
            )?;
        }
        if best.as_ref().is_none_or(|b| val > b.0) {
            best = Some((val, test, epoch, store.clone()));
        } else if epoch - best.as_ref().map_or(0, |b| b.2) >= patience {
            info!("K {spec}: no validation gain for {patience} epochs, stopping at {epoch}");
            break;
        }
        if epoch % 100 == 0 {
            info!("K {spec} epoch {epoch}: loss {loss:.4} val {val:.4} test {test:.4}");
        }
    }
    let (val, test, best_epoch, store) =
        best.ok_or_else(|| CliError::Usage("epochs must be at least 1".into()))?;
    let k = store.k(model.curv);
    Ok((
        SweepResult {
            curvature: spec,
            best_epoch,
            val,
            test,
            k,
        },
        store,
    ))
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<GnnOutcome> {
    let seed = cfg.u64("seed");
    let graph = load_graph(cfg.text("dataset"), seed)?;
    let task = match cfg.text("gnn_task") {
        "nc" => GnnTask::NodeClassification,
        _ => GnnTask::LinkPrediction,
    };
    let features = node_features(cfg.text("features"), &graph, seed)?;
    let data = prepare(cfg, &graph, task, seed)?;
    let mut run = RunDir::create(out, cfg)?;
    let sweep = cfg.sweep();
    let settings = if sweep.is_empty() {
        vec![cfg.curvature()]
    } else {
        sweep
    };
    let mut results: Vec<SweepResult> = Vec::new();
    let mut best: Option<(usize, ParamStore)> = None;
    for (i, &spec) in settings.iter().enumerate() {
        let tag = if settings.len() > 1 {
            format!("@k={spec}")
        } else {
            String::new()
        };
        let (result, store) = train_one(cfg, spec, &graph, &features, &data, &mut run, &tag)?;
        if best
            .as_ref()
            .is_none_or(|(b, _)| result.val > results[*b].val)
        {
            best = Some((i, store));
        }
        results.push(result);
    }
    let (best, store) = best.expect("at least one setting");
    let metric = task.metric();
    for r in &results {
        run.metrics.row(
            r.best_epoch,
            "sweep_val",
            &format!("{metric}@k={}", r.curvature),
            r.val,
        )?;
        run.metrics.row(
            r.best_epoch,
            "sweep_test",
            &format!("{metric}@k={}", r.curvature),
            r.test,
        )?;
    }
    let b = &results[best];
    run.metrics.row(b.best_epoch, "best_test", metric, b.test)?;
    run.save(cfg, &store, None)?;
    Ok(GnnOutcome {
        task,
        results,
        best,
    })
}
