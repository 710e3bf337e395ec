//! Graph data, synthetic generators, splits and metrics.

mod generate;
mod graph;
mod metrics;
mod split;

pub use generate::{
    gen_sequence_task, gen_tiny_images, gen_tree, gen_walk_features, majority, pattern, ImageData,
    SequenceData, IMAGE_NOISE,
};
pub use graph::{
    format_edge_list, format_features, format_labels, load_edge_list, load_features, load_labels,
    parse_edge_list, parse_features, parse_labels, save_edge_list, save_features, save_labels,
    Graph, MAX_METRIC_NODES, MAX_NODES,
};
pub use metrics::{accuracy, auc, distortion, f1_micro, mean_average_precision};
pub use split::{
    sample_negatives, sample_negatives_with, split_lp, Edge, LpSplit, TEST_FRACTION, VAL_FRACTION,
};

use rand::seq::SliceRandom;
use rand::Rng;

/// Index batches covering `0..n`, shuffled when an rng is given.
pub fn batches<R: Rng + ?Sized>(n: usize, batch: usize, rng: Option<&mut R>) -> Vec<Vec<usize>> {
    let mut ids: Vec<usize> = (0..n).collect();
    if let Some(rng) = rng {
        ids.shuffle(rng);
    }
    ids.chunks(batch.max(1)).map(<[usize]>::to_vec).collect()
}
