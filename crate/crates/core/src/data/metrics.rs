//! Evaluation metrics for the graph and classification tasks.

use super::graph::Graph;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Area under the ROC curve from the rank-sum statistic; tied scores share
/// their average rank.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape(
            "auc",
            format!("{} scores, {} labels", scores.len(), labels.len()),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite { op: "auc" });
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("auc is undefined with a single class"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 averaged
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Micro-averaged F1. For single-label multi-class data it equals accuracy.
pub fn f1_micro(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.len() != labels.len() || preds.is_empty() {
        return Err(Error::shape(
            "f1",
            format!("{} predictions, {} labels", preds.len(), labels.len()),
        ));
    }
    // every sample contributes one prediction: tp + fp = tp + fn = N
    let tp = preds.iter().zip(labels).filter(|(p, l)| p == l).count() as f64;
    let n = preds.len() as f64;
    let (precision, recall) = (tp / n, tp / n);
    Ok(if tp == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    })
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    f1_micro(preds, labels)
}

fn check_square(op: &'static str, dist: &Tensor, g: &Graph) -> Result<()> {
    let n = g.num_nodes();
    if dist.shape() != [n, n] {
        return Err(Error::shape(
            op,
            format!("distances {:?} for {n} nodes", dist.shape()),
        ));
    }
    if !dist.all_finite() {
        return Err(Error::NonFinite { op });
    }
    Ok(())
}

/// Mean over nodes with at least one neighbor of the average precision of
/// their neighbors when all other nodes are ranked by embedding distance.
/// A neighbor at distance `r` scores `|N(u) within r| / |V \ {u} within r|`.
pub fn mean_average_precision(dist: &Tensor, g: &Graph) -> Result<f64> {
    check_square("map", dist, g)?;
    let n = g.num_nodes();
    let mut total = 0.0;
    let mut counted = 0usize;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for u in 0..n {
        let nbrs = g.neighbors(u);
        if nbrs.is_empty() {
            continue;
        }
        let d = dist.row(u);
        order.clear();
        order.extend((0..n).filter(|&v| v != u));
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let mut precision = vec![0.0; nbrs.len()];
        let (mut seen_all, mut seen_nbr) = (0usize, 0usize);
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && d[order[j + 1]] == d[order[i]] {
                j += 1;
            }
            let group = &order[i..=j];
            seen_all += group.len();
            seen_nbr += group
                .iter()
                .filter(|v| nbrs.binary_search(v).is_ok())
                .count();
            for v in group {
                if let Ok(k) = nbrs.binary_search(v) {
                    precision[k] = seen_nbr as f64 / seen_all as f64;
                }
            }
            i = j + 1;
        }
        total += precision.iter().sum::<f64>() / nbrs.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::invalid("map needs at least one edge"));
    }
    Ok(total / counted as f64)
}

/// Mean `|s d_emb / d_graph - 1|` over connected pairs, with the global
/// scale `s` fitted by least squares.
pub fn distortion(dist: &Tensor, g: &Graph) -> Result<f64> {
    check_square("distortion", dist, g)?;
    let n = g.num_nodes();
    let hops = g.all_pairs_distances()?;
    let ratios: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| hops[i * n + j] != usize::MAX)
        .map(|(i, j)| dist.data()[i * n + j] / hops[i * n + j] as f64)
        .collect();
    if ratios.is_empty() {
        return Err(Error::invalid("distortion needs a connected pair"));
    }
    let sq: f64 = ratios.iter().map(|r| r * r).sum();
    let s = if sq > 0.0 {
        ratios.iter().sum::<f64>() / sq
    } else {
        0.0
    };
    Ok(ratios.iter().map(|r| (s * r - 1.0).abs()).sum::<f64>() / ratios.len() as f64)
}
