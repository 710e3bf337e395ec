//! Link-prediction splits and negative sampling.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::Graph;
use crate::error::{Error, Result};

pub const VAL_FRACTION: f64 = 0.05;
pub const TEST_FRACTION: f64 = 0.10;

pub type Edge = (usize, usize);

/// Positive edges per split with one sampled non-edge per positive.
#[derive(Clone, Debug, PartialEq)]
pub struct LpSplit {
    pub train: Vec<Edge>,
    pub val: Vec<Edge>,
    pub test: Vec<Edge>,
    pub train_neg: Vec<Edge>,
    pub val_neg: Vec<Edge>,
    pub test_neg: Vec<Edge>,
    pub seed: u64,
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        self.0[a] = b;
        a != b
    }
}

/// 85/5/10 split of the edges. A random spanning forest is reserved for
/// training first so the training graph stays connected whenever the
/// non-forest edges can fill validation and test.
pub fn split_lp(graph: &Graph, seed: u64) -> Result<LpSplit> {
    let m = graph.num_edges();
    let n_val = (VAL_FRACTION * m as f64).round() as usize;
    let n_test = (TEST_FRACTION * m as f64).round() as usize;
    if n_val == 0 || n_test == 0 {
        return Err(Error::invalid(format!(
            "{m} edges are too few for a link-prediction split"
        )));
    }
    if !graph.is_connected() {
        log::warn!("link-prediction split of a disconnected graph");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = graph.edges().to_vec();
    edges.shuffle(&mut rng);

    let mut dsu = DisjointSet((0..graph.num_nodes()).collect());
    let (mut forest, mut rest) = (Vec::new(), Vec::new());
    for e in edges {
        if dsu.union(e.0, e.1) {
            forest.push(e);
        } else {
            rest.push(e);
        }
    }
    if rest.len() < n_val + n_test {
        log::warn!(
            "only {} non-forest edges for {} held-out edges; the training graph will be disconnected",
            rest.len(),
            n_val + n_test
        );
        let need = n_val + n_test - rest.len();
        rest.extend(forest.drain(forest.len() - need..));
    }
    let mut held = rest.drain(..n_val + n_test);
    let mut val: Vec<Edge> = held.by_ref().take(n_val).collect();
    let mut test: Vec<Edge> = held.collect();
    let mut train = forest;
    train.extend(rest);
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();

    let mut neg = sample_negatives_with(graph, m, &HashSet::new(), &mut rng)?;
    let test_neg = neg.split_off(train.len() + val.len());
    let val_neg = neg.split_off(train.len());
    Ok(LpSplit {
        train,
        val,
        test,
        train_neg: neg,
        val_neg,
        test_neg,
        seed,
    })
}

/// `k` distinct non-edges, uniform over unordered pairs.
pub fn sample_negatives(graph: &Graph, k: usize, seed: u64) -> Result<Vec<Edge>> {
    sample_negatives_with(
        graph,
        k,
        &HashSet::new(),
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

/// As [`sample_negatives`], also avoiding the pairs in `exclude` (stored as `(min, max)`).
pub fn sample_negatives_with<R: Rng + ?Sized>(
    graph: &Graph,
    k: usize,
    exclude: &HashSet<Edge>,
    rng: &mut R,
) -> Result<Vec<Edge>> {
    let n = graph.num_nodes();
    let pairs = n * n.saturating_sub(1) / 2;
    let blocked = graph.num_edges()
        + exclude
            .iter()
            .filter(|&&(u, v)| !graph.has_edge(u, v))
            .count();
    let available = pairs - blocked.min(pairs);
    if k > available {
        return Err(Error::invalid(format!(
            "{k} negatives requested, only {available} non-edges available"
        )));
    }
    let free = |u: usize, v: usize| !graph.has_edge(u, v) && !exclude.contains(&(u, v));
    if 2 * k <= available {
        let mut seen = HashSet::with_capacity(k);
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            let e = (u.min(v), u.max(v));
            if u != v && free(e.0, e.1) && seen.insert(e) {
                out.push(e);
            }
        }
        Ok(out)
    } else {
        let mut all: Vec<Edge> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| free(u, v))
            .collect();
        let (picked, _) = all.partial_shuffle(rng, k);
        Ok(picked.to_vec())
    }
}
