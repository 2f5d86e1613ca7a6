use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Per-layer task memory: column `t` of `codes` is the context code for task
/// `t`. Codes of earlier tasks are frozen (snapshotted) when their successor
/// is registered; the mean of those snapshots drives the drift term of the
/// context update.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextStore {
    codes: Array2<f64>,
    snapshots: Vec<Array1<f64>>,
    running_mean: Array1<f64>,
}

impl ContextStore {
    pub fn new(width: usize) -> Self {
        ContextStore {
            codes: Array2::zeros((width, 0)),
            snapshots: Vec::new(),
            running_mean: Array1::zeros(width),
        }
    }

    pub fn width(&self) -> usize {
        self.codes.nrows()
    }

    pub fn num_tasks(&self) -> usize {
        self.codes.ncols()
    }

    pub fn codes(&self) -> &Array2<f64> {
        &self.codes
    }

    /// Mean of the frozen codes of every task registered before the newest one.
    pub fn running_mean(&self) -> &Array1<f64> {
        &self.running_mean
    }

    /// Appends a fresh code drawn from `N(0, init_std²)`.
    pub fn register<R: Rng + ?Sized>(&mut self, init_std: f64, rng: &mut R) -> Result<()> {
        let width = self.width();
        if let Some(last) = self.num_tasks().checked_sub(1) {
            self.snapshots.push(self.codes.column(last).to_owned());
            self.running_mean = mean_of(&self.snapshots, width);
        }
        let normal = Normal::new(0.0, init_std)
            .map_err(|e| Error::Config(format!("context init std {init_std}: {e}")))?;
        let fresh = Array1::from_shape_fn(width, |_| normal.sample(rng));
        self.codes
            .push_column(fresh.view())
            .map_err(|e| Error::Data(e.to_string()))?;
        Ok(())
    }

    /// Retrieves the code for `task` (the product `M · t` for one-hot `t`).
    pub fn lookup(&self, task: usize) -> Result<ArrayView1<'_, f64>> {
        if task >= self.num_tasks() {
            return Err(Error::UnregisteredTask(task));
        }
        Ok(self.codes.column(task))
    }

    /// Retrieval through an explicit descriptor vector, `M · t`.
    pub fn retrieve(&self, descriptor: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if descriptor.len() != self.num_tasks() {
            return Err(Error::dim(
                "task descriptor",
                self.num_tasks(),
                descriptor.len(),
            ));
        }
        Ok(self.codes.dot(&descriptor))
    }

    /// `g ← g + η_e d − η_g (g − mean of earlier codes)`. The drift term is
    /// skipped for the first task, which has no predecessors.
    pub fn update(&mut self, task: usize, d: ArrayView1<'_, f64>, eta_e: f64, eta_g: f64) -> Result<()> {
        self.update_bounded(task, d, eta_e, eta_g, f64::INFINITY)
    }

    /// [`ContextStore::update`] followed by projection onto the ball of radius
    /// `max_norm` when the updated code leaves it.
    pub fn update_bounded(
        &mut self,
        task: usize,
        d: ArrayView1<'_, f64>,
        eta_e: f64,
        eta_g: f64,
        max_norm: f64,
    ) -> Result<()> {
        if task >= self.num_tasks() {
            return Err(Error::UnregisteredTask(task));
        }
        if d.len() != self.width() {
            return Err(Error::dim("context correction", self.width(), d.len()));
        }
        let prior_mean = if task == 0 {
            None
        } else if task + 1 == self.num_tasks() {
            Some(self.running_mean.clone())
        } else {
            Some(mean_of(&self.snapshots[..task], self.width()))
        };
        let mut g = self.codes.column_mut(task);
        g.scaled_add(eta_e, &d);
        if let Some(mean) = prior_mean {
            let drift = &g - &mean;
            g.scaled_add(-eta_g, &drift);
        }
        let norm = g.dot(&g).sqrt();
        if norm > max_norm {
            g *= max_norm / norm;
        }
        Ok(())
    }

    pub(crate) fn from_parts(codes: Array2<f64>) -> Self {
        let width = codes.nrows();
        let snapshots: Vec<Array1<f64>> = (0..codes.ncols().saturating_sub(1))
            .map(|j| codes.column(j).to_owned())
            .collect();
        let running_mean = mean_of(&snapshots, width);
        ContextStore {
            codes,
            snapshots,
            running_mean,
        }
    }
}

fn mean_of(vectors: &[Array1<f64>], width: usize) -> Array1<f64> {
    if vectors.is_empty() {
        return Array1::zeros(width);
    }
    let mut sum = Array1::zeros(width);
    for v in vectors {
        sum += v;
    }
    sum / vectors.len() as f64
}

/// Column mean of a `width × batch` matrix.
pub(crate) fn batch_mean(m: &Array2<f64>) -> Array1<f64> {
    m.mean_axis(Axis(1))
        .unwrap_or_else(|| Array1::zeros(m.nrows()))
}
