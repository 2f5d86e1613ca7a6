use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;

use super::split::TaskSplit;
use crate::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    /// Positions of these samples in the source split.
    pub indices: Vec<usize>,
}

/// One shuffled pass over a split in fixed-size batches; the last batch may
/// be short. The order depends only on `seed`.
pub struct MiniBatches<'a> {
    split: &'a TaskSplit,
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

pub fn minibatches(split: &TaskSplit, batch_size: usize, seed: u64) -> MiniBatches<'_> {
    let mut order: Vec<usize> = (0..split.len()).collect();
    order.shuffle(&mut SeededRng::seed_from_u64(seed));
    MiniBatches {
        split,
        order,
        batch_size: batch_size.max(1),
        cursor: 0,
    }
}

impl Iterator for MiniBatches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let indices = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        Some(Batch {
            features: self.split.features.select(Axis(0), &indices),
            labels: indices.iter().map(|&i| self.split.labels[i]).collect(),
            indices,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.order.len() - self.cursor).div_ceil(self.batch_size);
        (left, Some(left))
    }
}

impl ExactSizeIterator for MiniBatches<'_> {}
