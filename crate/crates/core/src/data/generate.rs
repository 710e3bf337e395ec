//! Seeded synthetic datasets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, MAX_NODES};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Balanced tree with branching `b` and depth `h`. Node ids are shuffled by
/// `seed`; labels give the root child whose subtree holds the node (root: 0).
pub fn gen_tree(b: usize, h: usize, seed: u64) -> Result<Graph> {
    if b < 2 || h < 1 {
        return Err(Error::invalid(format!(
            "tree needs branching >= 2 and depth >= 1, got {b}, {h}"
        )));
    }
    let mut n: usize = 1;
    let mut level: usize = 1;
    for _ in 0..h {
        level = level
            .checked_mul(b)
            .filter(|&l| l <= MAX_NODES)
            .ok_or_else(too_big)?;
        n = n
            .checked_add(level)
            .filter(|&n| n <= MAX_NODES)
            .ok_or_else(too_big)?;
    }
    // in breadth-first numbering the parent of i is (i - 1) / b
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let edges = (1..n).map(|i| (ids[(i - 1) / b], ids[i]));
    let mut labels = vec![0; n];
    let mut branch = vec![0; n];
    for i in 1..n {
        branch[i] = if i <= b { i - 1 } else { branch[(i - 1) / b] };
        labels[ids[i]] = branch[i];
    }
    Graph::new(n, edges)?.with_labels(labels)
}

/// Node features from a Gaussian random walk over the graph: node 0 (and
/// the first node of every other component) draws from `N(0, I)`, and every
/// breadth-first child adds `N(0, sigma^2 I)` to its parent's vector. On a
/// tree the difference between two nodes is Gaussian with variance
/// `sigma^2 * hops` per coordinate.
pub fn gen_walk_features(graph: &Graph, dim: usize, sigma: f64, seed: u64) -> Result<Tensor> {
    if dim == 0 || !(sigma > 0.0) {
        return Err(Error::invalid(format!(
            "walk features need dim > 0 and sigma > 0, got {dim}, {sigma}"
        )));
    }
    let n = graph.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss =
        |scale: f64| -> Vec<f64> { Tensor::randn(&[dim], scale, &mut rng).data().to_vec() };
    let mut feats: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if feats[start].is_some() {
            continue;
        }
        feats[start] = Some(gauss(1.0));
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in graph.neighbors(u) {
                if feats[v].is_none() {
                    let step = gauss(sigma);
                    let parent = feats[u].as_ref().expect("visited");
                    feats[v] = Some(parent.iter().zip(step).map(|(p, s)| p + s).collect());
                    queue.push_back(v);
                }
            }
        }
    }
    Tensor::new(
        &[n, dim],
        feats
            .into_iter()
            .flat_map(|f| f.expect("all visited"))
            .collect(),
    )
}

fn too_big() -> Error {
    Error::invalid(format!("tree would exceed {MAX_NODES} nodes"))
}

/// Token sequences labeled by their most frequent token.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceData {
    pub vocab: usize,
    pub len: usize,
    /// Row-major `[n, len]` token ids.
    pub tokens: Vec<usize>,
    pub labels: Vec<usize>,
}

impl SequenceData {
    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn sequence(&self, i: usize) -> &[usize] {
        &self.tokens[i * self.len..(i + 1) * self.len]
    }

    /// Token ids of the chosen samples, concatenated.
    pub fn gather(&self, ids: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let tokens = ids
            .iter()
            .flat_map(|&i| self.sequence(i).iter().copied())
            .collect();
        (tokens, ids.iter().map(|&i| self.labels[i]).collect())
    }
}

/// Unique most frequent token, if any.
pub fn majority(seq: &[usize], vocab: usize) -> Option<usize> {
    let mut counts = vec![0usize; vocab];
    seq.iter().for_each(|&t| counts[t] += 1);
    let best = *counts.iter().max()?;
    let mut winners = counts.iter().enumerate().filter(|(_, &c)| c == best);
    let (tok, _) = winners.next()?;
    winners.next().is_none().then_some(tok)
}

/// `n` sequences of length `len`, class-balanced to within one sample.
/// Each sequence is drawn uniformly and redrawn until its unique majority
/// token equals the assigned class.
pub fn gen_sequence_task(vocab: usize, len: usize, n: usize, seed: u64) -> Result<SequenceData> {
    if vocab < 2 || len == 0 {
        return Err(Error::invalid(format!(
            "sequence task needs vocab >= 2 and len >= 1, got {vocab}, {len}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % vocab).collect();
    labels.shuffle(&mut rng);
    let mut tokens = Vec::with_capacity(n * len);
    let mut seq = vec![0; len];
    for &label in &labels {
        loop {
            seq.iter_mut().for_each(|t| *t = rng.random_range(0..vocab));
            if majority(&seq, vocab) == Some(label) {
                break;
            }
        }
        tokens.extend_from_slice(&seq);
    }
    Ok(SequenceData {
        vocab,
        len,
        tokens,
        labels,
    })
}

/// Single-channel images `[n, 1, size, size]` with one stripe pattern per class.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageData {
    pub classes: usize,
    pub images: Tensor,
    pub labels: Vec<usize>,
}

impl ImageData {
    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn gather(&self, ids: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let shape = self.images.shape();
        let per = shape[1] * shape[2] * shape[3];
        let mut data = Vec::with_capacity(ids.len() * per);
        for &i in ids {
            data.extend_from_slice(&self.images.data()[i * per..(i + 1) * per]);
        }
        let images = Tensor::new(&[ids.len(), shape[1], shape[2], shape[3]], data)?;
        Ok((images, ids.iter().map(|&i| self.labels[i]).collect()))
    }
}

pub const IMAGE_NOISE: f64 = 0.1;

/// Noise-free pixel of class `k`: horizontal stripes, vertical stripes, checkerboard.
pub fn pattern(k: usize, r: usize, c: usize) -> f64 {
    let on = match k {
        0 => r.is_multiple_of(2),
        1 => c.is_multiple_of(2),
        _ => (r + c).is_multiple_of(2),
    };
    if on {
        1.0
    } else {
        0.0
    }
}

/// `classes` in 2..=3, even `size`; pixel noise has standard deviation `noise`.
pub fn gen_tiny_images(
    classes: usize,
    size: usize,
    n: usize,
    noise: f64,
    seed: u64,
) -> Result<ImageData> {
    if !(2..=3).contains(&classes) || size < 2 || !size.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "tiny images need 2-3 classes and an even size, got {classes}, {size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);
    let per = size * size;
    let clean = Tensor::from_fn(&[n, 1, size, size], |i| {
        let p = i % per;
        pattern(labels[i / per], p / size, p % size)
    });
    let images = clean.add(&Tensor::randn(&[n, 1, size, size], noise, &mut rng))?;
    Ok(ImageData {
        classes,
        images,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_sizes() {
        let g = gen_tree(2, 1, 0).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (3, 2));
        let g = gen_tree(3, 5, 7).unwrap();
        // geometric series (3^6 - 1) / 2
        assert_eq!(
            (g.num_nodes(), g.num_edges()),
            ((3usize.pow(6) - 1) / 2, 363)
        );
        assert!(g.is_connected());
        // connected with n - 1 edges means acyclic
        assert_eq!(g.num_edges(), g.num_nodes() - 1);
        assert!(gen_tree(1, 3, 0).is_err());
        assert!(gen_tree(2, 0, 0).is_err());
        assert!(gen_tree(10, 7, 0).is_err());
        assert_eq!(gen_tree(3, 5, 7).unwrap(), g);
    }

    #[test]
    fn tree_labels_follow_root_branches() {
        let g = gen_tree(3, 3, 1).unwrap();
        let labels = g.labels().unwrap();
        // the root is the only node with degree b
        let root = (0..g.num_nodes()).find(|&i| g.degree(i) == 3).unwrap();
        for i in 0..g.num_nodes() {
            if i == root {
                continue;
            }
            // the path back to the root passes through a single root child
            let d = g.bfs(i);
            let child = *g
                .neighbors(root)
                .iter()
                .find(|&&c| d[c].unwrap() < d[root].unwrap())
                .unwrap();
            assert_eq!(labels[i], labels[child]);
        }
        let mut counts = [0; 3];
        labels.iter().for_each(|&l| counts[l] += 1);
        assert_eq!(counts, [14, 13, 13]);
    }

    #[test]
    fn walk_features_vary_with_hop_distance() {
        let g = gen_tree(3, 5, 4).unwrap();
        let f = gen_walk_features(&g, 16, 0.5, 1).unwrap();
        assert_eq!(f.shape(), &[364, 16]);
        assert_eq!(f, gen_walk_features(&g, 16, 0.5, 1).unwrap());
        let hops = g.all_pairs_distances().unwrap();
        // mean squared difference per coordinate is sigma^2 * hops
        let mut by_hops = [(0.0, 0usize); 11];
        for i in 0..364 {
            for j in i + 1..364 {
                let d: f64 = f
                    .row(i)
                    .iter()
                    .zip(f.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / 16.0;
                let h = hops[i * 364 + j];
                by_hops[h].0 += d;
                by_hops[h].1 += 1;
            }
        }
        for (h, &(sum, count)) in by_hops.iter().enumerate().skip(1) {
            let mean = sum / count as f64 / (0.25 * h as f64);
            assert!((mean - 1.0).abs() < 0.25, "hops {h}: ratio {mean}");
        }
        assert!(gen_walk_features(&g, 0, 0.5, 1).is_err());
    }

    #[test]
    fn majority_rules() {
        assert_eq!(majority(&[3, 3, 3, 3], 5), Some(3));
        assert_eq!(majority(&[1, 2], 3), None);
        assert_eq!(majority(&[1, 2, 2], 3), Some(2));
    }

    #[test]
    fn sequence_task_is_balanced_and_labeled() {
        let d = gen_sequence_task(8, 16, 1001, 3).unwrap();
        let mut counts = [0usize; 8];
        for i in 0..d.num_samples() {
            assert_eq!(majority(d.sequence(i), 8), Some(d.labels[i]));
            counts[d.labels[i]] += 1;
        }
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        assert_eq!(gen_sequence_task(8, 16, 1001, 3).unwrap(), d);
        assert!(gen_sequence_task(1, 4, 10, 0).is_err());
    }

    #[test]
    fn noiseless_images_are_separated_by_a_one_step_classifier() {
        let train = gen_tiny_images(3, 8, 60, 0.0, 4).unwrap();
        let test = gen_tiny_images(3, 8, 300, IMAGE_NOISE, 5).unwrap();
        // one-step oracle: class means of the noiseless training set, nearest mean wins
        let per = 64;
        let mut means = vec![vec![0.0; per]; 3];
        for (i, &l) in train.labels.iter().enumerate() {
            for (m, v) in means[l]
                .iter_mut()
                .zip(&train.images.data()[i * per..(i + 1) * per])
            {
                *m += v / 20.0;
            }
        }
        let correct = (0..test.num_samples())
            .filter(|&i| {
                let x = &test.images.data()[i * per..(i + 1) * per];
                let d = |m: &Vec<f64>| x.iter().zip(m).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                let pred = (0..3)
                    .min_by(|&a, &b| d(&means[a]).total_cmp(&d(&means[b])))
                    .unwrap();
                pred == test.labels[i]
            })
            .count();
        assert!(correct as f64 / 300.0 >= 0.99, "{correct}/300");
        assert!(gen_tiny_images(4, 8, 10, 0.1, 0).is_err());
    }
}
