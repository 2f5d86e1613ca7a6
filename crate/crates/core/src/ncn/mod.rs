//! The sequential neural coding network: a stack of predictors, each
//! guessing the state of the layer below, settled for `K` steps per sample
//! and trained with purely local updates.

mod context;
mod dynamics;
mod learning;
mod params;

pub use context::ContextStore;
pub use dynamics::{
    compute_errors, correct_states, corrections, infer_states, predict_layers, total_discrepancy, Clamp,
    ErrorUnits, LayerEpisode, Predictions,
};
pub use learning::{apply_deltas, compute_deltas, normalized_step, update_contexts, update_weights, Deltas};
pub use params::{fan_in_gaussian, Hyperparams, LayerSpec, ModelParams};

use ndarray::{s, Array1, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{argmax, one_hot_columns, ContinualModel};
use crate::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Sncn {
    layers: Vec<LayerSpec>,
    hp: Hyperparams,
    params: ModelParams,
    task_classes: Vec<usize>,
}

impl Sncn {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, layers: Vec<LayerSpec>, hp: Hyperparams, rng: &mut R) -> Result<Self> {
        hp.validate()?;
        let params = ModelParams::init(input_dim, &layers, rng)?;
        Ok(Sncn {
            layers,
            hp,
            params,
            task_classes: Vec::new(),
        })
    }

    /// Rebuilds a model around existing parameters. Every registered task is
    /// assumed to use all current output slots.
    pub fn from_params(layers: Vec<LayerSpec>, hp: Hyperparams, params: ModelParams) -> Result<Self> {
        hp.validate()?;
        if layers.len() != params.num_layers() {
            return Err(Error::dim("layer specs", params.num_layers(), layers.len()));
        }
        for (i, (l, w)) in layers.iter().zip(params.widths()).enumerate() {
            l.validate()?;
            if l.width != w {
                return Err(Error::dim(format!("width of hidden layer {}", i + 1), w, l.width));
            }
        }
        params.check_shapes()?;
        let task_classes = vec![params.output_dim(); params.num_tasks()];
        Ok(Sncn {
            layers,
            hp,
            params,
            task_classes,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn task_classes(&self) -> &[usize] {
        &self.task_classes
    }

    /// Settling episode for a column-per-sample batch.
    pub fn infer(
        &self,
        x: Option<ArrayView2<'_, f64>>,
        y: Option<ArrayView2<'_, f64>>,
        task: usize,
        clamp: Clamp,
    ) -> Result<LayerEpisode> {
        infer_states(&self.params, &self.layers, &self.hp, x, y, task, clamp)
    }

    /// Clamps `x` and `y`, settles, then applies the local learning rule.
    /// `x` is row-major (`batch × dim`).
    pub fn train_on(&mut self, task: usize, x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<LayerEpisode> {
        let classes = self.classes_of(task)?;
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Data(format!("label {bad} out of range for task {task} with {classes} classes")));
        }
        if x.nrows() != labels.len() {
            return Err(Error::dim("label count", x.nrows(), labels.len()));
        }
        let y = one_hot_columns(labels, self.params.output_dim());
        let episode = self.infer(Some(x.t()), Some(y.view()), task, Clamp::Train)?;
        update_weights(&mut self.params, &self.layers, &self.hp, &episode, task)?;
        Ok(episode)
    }

    /// Label prediction with `x` clamped and the label block free. Returns the
    /// chosen slot and the label-block scores over the task's classes.
    pub fn predict_label(&self, x: ArrayView1<'_, f64>, task: usize) -> Result<(usize, Array1<f64>)> {
        let classes = self.classes_of(task)?;
        let episode = self.infer(Some(x.insert_axis(Axis(1))), None, task, Clamp::Predict)?;
        let scores = episode.zmu_y.slice(s![..classes, 0]).to_owned();
        Ok((argmax(scores.view()), scores))
    }

    fn classes_of(&self, task: usize) -> Result<usize> {
        self.task_classes
            .get(task)
            .copied()
            .ok_or(Error::UnregisteredTask(task))
    }
}

impl ContinualModel for Sncn {
    fn register_task(&mut self, task: usize, num_classes: usize, rng: &mut SeededRng) -> Result<()> {
        self.params
            .register_task(task, num_classes, self.hp.context_init_std, rng)?;
        self.task_classes.push(num_classes);
        Ok(())
    }

    fn train_batch(&mut self, task: usize, x: ArrayView2<'_, f64>, labels: &[usize], _rng: &mut SeededRng) -> Result<f64> {
        let episode = self.train_on(task, x, labels)?;
        Ok(episode.step_discrepancy.last().copied().unwrap_or(0.0))
    }

    fn predict(&self, task: usize, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let classes = self.classes_of(task)?;
        let episode = self.infer(Some(x.t()), None, task, Clamp::Predict)?;
        Ok(episode
            .zmu_y
            .slice(s![..classes, ..])
            .columns()
            .into_iter()
            .map(argmax)
            .collect())
    }

    fn num_tasks(&self) -> usize {
        self.task_classes.len()
    }
}
