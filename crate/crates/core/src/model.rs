use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::data::TaskSplit;
use crate::error::{Error, Result};
use crate::SeededRng;

/// A learner that can be streamed through a sequence of tasks.
///
/// Inputs are row-major: each row of `x` is one sample's feature vector.
pub trait ContinualModel: Clone {
    fn register_task(&mut self, task: usize, num_classes: usize, rng: &mut SeededRng) -> Result<()>;

    /// One mini-batch update on `task`. Returns the batch objective (mean
    /// settled discrepancy or mean loss) for tracing.
    fn train_batch(&mut self, task: usize, x: ArrayView2<'_, f64>, labels: &[usize], rng: &mut SeededRng) -> Result<f64>;

    /// Predicted class slot per row, restricted to the task's classes.
    fn predict(&self, task: usize, x: ArrayView2<'_, f64>) -> Result<Vec<usize>>;

    fn num_tasks(&self) -> usize;
}

/// Fraction of `split` whose predicted slot matches the label.
pub fn evaluate_model<M: ContinualModel>(model: &M, task: usize, split: &TaskSplit) -> Result<f64> {
    if split.is_empty() {
        return Err(Error::Data(format!("task {task} has an empty evaluation set")));
    }
    let predicted = model.predict(task, split.features.view())?;
    let hits = predicted.iter().zip(&split.labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / split.len() as f64)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(scores: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate() {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

/// Column-per-sample one-hot targets, `classes × batch`.
pub fn one_hot_columns(labels: &[usize], classes: usize) -> Array2<f64> {
    let mut y = Array2::zeros((classes, labels.len()));
    for (j, &l) in labels.iter().enumerate() {
        y[[l, j]] = 1.0;
    }
    y
}
