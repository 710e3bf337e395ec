//! Shallow graph embedding by stress minimization.

use std::path::Path;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hypkit::autodiff::{Tape, Var};
use hypkit::data::{distortion, mean_average_precision, Graph};
use hypkit::nn::{geometry, loss, random_points, Curv, ParamId, ParamKind, ParamStore, Session};
use hypkit::optim::{GroupKind, Optimizer, ParamGroup};
use hypkit::Tensor;

use super::common::{load_graph, train_step, RunDir};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedOutcome {
    pub map: f64,
    pub distortion: f64,
    pub loss: f64,
    pub curvature: Option<f64>,
}

/// The embedding table and the geometry it lives in.
struct Embedding {
    points: ParamId,
    curv: Option<Curv>,
}

impl Embedding {
    fn new(
        store: &mut ParamStore,
        cfg: &RunConfig,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let dim = cfg.usize("dim");
        let std = cfg.f64("init_std");
        if cfg.text("manifold") == "euclidean" {
            let points = store.add(
                "points",
                Tensor::randn(&[n, dim], std, rng),
                ParamKind::Euclidean,
            )?;
            return Ok(Self { points, curv: None });
        }
        let curv = store.curvature("curvature", cfg.curvature().curvature()?)?;
        let x = random_points(&store.lorentz(curv)?, &[n, dim], std, rng)?;
        let points = store.add("points", x, ParamKind::Lorentz(curv))?;
        Ok(Self {
            points,
            curv: Some(curv),
        })
    }

    /// Distances between rows `i[p]` and `j[p]`, shape `[P]`.
    fn pair_dist<'t>(&self, s: &Session<'t>, i: &[usize], j: &[usize]) -> hypkit::Result<Var<'t>> {
        let x = s.param(self.points);
        let (a, b) = (x.index_select(i)?, x.index_select(j)?);
        let d = match self.curv {
            Some(curv) => geometry::dist(a, b, s.c(curv)?)?,
            None => a
                .sub(b)?
                .square()?
                .sum_axis(1, false)?
                .clamp(1e-24, f64::INFINITY)?
                .sqrt()?,
        };
        d.reshape(&[i.len()])
    }

    /// Full `[n, n]` distance matrix.
    fn all_dist(&self, store: &ParamStore) -> Result<Tensor> {
        let tape = Tape::new();
        let s = Session::eval(&tape, store);
        let x = s.param(self.points);
        let d = match self.curv {
            Some(curv) => loss::pairwise_dist(x, x, s.c(curv)?)?.value(),
            None => {
                let v = x.value();
                let n = v.num_rows();
                Tensor::from_fn(&[n, n], |k| {
                    let (a, b) = (v.row(k / n), v.row(k % n));
                    a.iter()
                        .zip(b)
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum::<f64>()
                        .sqrt()
                })
            }
        };
        // exact zeros on the diagonal regardless of rounding in the kernel
        let n = d.num_rows();
        Ok(Tensor::from_fn(&[n, n], |k| {
            if k / n == k % n {
                0.0
            } else {
                d.data()[k]
            }
        }))
    }
}

fn all_pairs(n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut i = Vec::with_capacity(n * (n - 1) / 2);
    let mut j = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            i.push(a);
            j.push(b);
        }
    }
    (i, j)
}

fn optimizer(cfg: &RunConfig, emb: &Embedding) -> Result<Optimizer> {
    let mut groups = vec![ParamGroup {
        name: "points".into(),
        kind: if emb.curv.is_some() {
            GroupKind::Manifold
        } else {
            GroupKind::Euclidean
        },
        params: vec![emb.points],
        config: cfg.group("hyp"),
    }];
    if let Some(Curv::Learned(id)) = emb.curv {
        groups.push(ParamGroup {
            name: "curvature".into(),
            kind: GroupKind::Euclidean,
            params: vec![id],
            config: cfg.group("euclid"),
        });
    }
    Ok(Optimizer::new(groups)?)
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<EmbedOutcome> {
    let seed = cfg.u64("seed");
    let graph: Graph = load_graph(cfg.text("dataset"), seed)?;
    if !graph.is_connected() {
        return Err(CliError::Usage(
            "graph is disconnected, so graph distances are undefined".into(),
        ));
    }
    let n = graph.num_nodes();
    let hops = graph.all_pairs_distances()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let emb = Embedding::new(&mut store, cfg, n, &mut rng)?;
    let mut opt = optimizer(cfg, &emb)?;
    let mut run = RunDir::create(out, cfg)?;

    let sampled = cfg.usize("pairs");
    let full = all_pairs(n);
    let epochs = cfg.usize("epochs");
    let ramp = (cfg.f64("ramp") * epochs as f64).ceil();
    let mut last = f64::NAN;
    let mut outcome = None;
    for epoch in 1..=epochs {
        let (i, j) = if sampled == 0 {
            full.clone()
        } else {
            (0..sampled)
                .map(|_| {
                    let a = rng.random_range(0..n);
                    let b = (a + rng.random_range(1..n)) % n;
                    (a, b)
                })
                .unzip()
        };
        // targets grow from near zero to the graph distances over the ramp so
        // the layout forms near the origin before it spreads out
        let scale = if ramp > 0.0 {
            (epoch as f64 / ramp).min(1.0)
        } else {
            1.0
        };
        let target = Tensor::from_fn(&[i.len()], |p| scale * hops[i[p] * n + j[p]] as f64);
        last = train_step(&mut store, &mut opt, seed ^ epoch as u64, |s| {
            emb.pair_dist(s, &i, &j)?
                .sub(s.constant(target))?
                .square()?
                .mean()
        })?;
        let dist = emb.all_dist(&store)?;
        let map = mean_average_precision(&dist, &graph)?;
        let dis = distortion(&dist, &graph)?;
        run.metrics.row(epoch, "train", "stress", last)?;
        run.metrics.row(epoch, "train", "map", map)?;
        run.metrics.row(epoch, "train", "distortion", dis)?;
        if let Some(curv) = emb.curv {
            run.metrics
                .row(epoch, "train", "curvature", store.k(curv))?;
        }
        if epoch % 50 == 0 {
            info!("epoch {epoch}: stress {last:.5} mAP {map:.4} distortion {dis:.4}");
        }
        outcome = Some(EmbedOutcome {
            map,
            distortion: dis,
            loss: last,
            curvature: emb.curv.map(|c| store.k(c)),
        });
    }
    run.save(cfg, &store, Some(&opt))?;
    let outcome = outcome.ok_or_else(|| CliError::Usage("epochs must be at least 1".into()))?;
    info!(
        "final stress {last:.5} mAP {:.4} distortion {:.4}",
        outcome.map, outcome.distortion
    );
    Ok(outcome)
}
