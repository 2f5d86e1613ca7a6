//! Backprop-trained multilayer perceptron. Serves as the forgetting baseline
//! (with and without dropout) and as the independent single-task classifier
//! behind the gold diagonal.
//!
//! Batches are column-per-sample, like the S-NCN. The network input is the
//! sample's features followed by a one-hot task descriptor that grows by one
//! entry per registered task.

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Bernoulli, Distribution};
use serde::{Deserialize, Serialize};

use crate::data::{minibatches, TaskData};
use crate::error::{Error, Result};
use crate::model::{argmax, evaluate_model, ContinualModel};
use crate::ncn::fan_in_gaussian;
use crate::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    /// Probability of dropping a hidden unit during training.
    pub dropout: f64,
    pub lambda: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![500; 3],
            dropout: 0.0,
            lambda: 0.01,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Weights are `out × in`; layer `i` maps `sizes[i]` to `sizes[i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub dropout: f64,
}

/// Gradients with the same layout as [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpParams {
    /// Fan-in scaled Gaussian weights, zero biases.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: &[usize], outputs: usize, dropout: f64, rng: &mut R) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(outputs);
        let weights = sizes.windows(2).map(|p| fan_in_gaussian(p[1], p[0], rng)).collect();
        let biases = sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
        MlpParams {
            weights,
            biases,
            dropout,
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![self.input_dim()];
        out.extend(self.weights.iter().map(|w| w.nrows()));
        out
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().map_or(0, |w| w.nrows())
    }

    /// Appends one input column (a new task-descriptor entry).
    pub fn add_input<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let w = &self.weights[0];
        let col = fan_in_gaussian(w.nrows(), w.ncols() + 1, rng).column(0).to_owned();
        self.weights[0] = concatenate![Axis(1), *w, col.insert_axis(Axis(1))];
    }

    /// Appends `extra` output units.
    pub fn add_outputs<R: Rng + ?Sized>(&mut self, extra: usize, rng: &mut R) {
        let last = self.weights.len() - 1;
        let w = &self.weights[last];
        let rows = fan_in_gaussian(extra, w.ncols(), rng);
        self.weights[last] = concatenate![Axis(0), *w, rows];
        let b = &self.biases[last];
        self.biases[last] = concatenate![Axis(0), *b, Array1::zeros(extra)];
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }
}

/// Forward-pass mode. Dropout masks are drawn from the generator only in
/// training mode.
pub enum Pass<'a> {
    Eval,
    Train(&'a mut SeededRng),
}

/// Intermediate values needed by [`mlp_backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to every layer (after dropout for hidden layers).
    pub inputs: Vec<Array2<f64>>,
    /// Hidden tanh outputs before dropout.
    pub hidden: Vec<Array2<f64>>,
    /// Inverted-dropout multipliers per hidden layer, if dropout was applied.
    pub masks: Vec<Option<Array2<f64>>>,
    pub probs: Array2<f64>,
}

/// Column-wise softmax, shifted by the column maximum.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut col in out.columns_mut() {
        let max = col.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        col.mapv_inplace(|v| (v - max).exp());
        let sum = col.sum();
        col /= sum;
    }
    out
}

/// `x` is `input_dim × batch`. Returns class probabilities (`outputs × batch`)
/// and the cache for the backward pass.
pub fn mlp_forward(params: &MlpParams, x: ArrayView2<'_, f64>, mut pass: Pass<'_>) -> Result<(Array2<f64>, ForwardCache)> {
    if x.nrows() != params.input_dim() {
        return Err(Error::dim("mlp input", params.input_dim(), x.nrows()));
    }
    let n = params.weights.len();
    let mut inputs = Vec::with_capacity(n);
    let mut hidden = Vec::with_capacity(n - 1);
    let mut masks = Vec::with_capacity(n - 1);
    let mut a = x.to_owned();
    for (i, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
        let mut pre = w.dot(&a);
        pre += &b.view().insert_axis(Axis(1));
        inputs.push(a);
        if i + 1 == n {
            let probs = softmax(&pre);
            return Ok((
                probs.clone(),
                ForwardCache {
                    inputs,
                    hidden,
                    masks,
                    probs,
                },
            ));
        }
        let h = pre.mapv(f64::tanh);
        let mask = match &mut pass {
            Pass::Train(rng) if params.dropout > 0.0 => Some(dropout_mask(h.raw_dim(), params.dropout, rng)),
            _ => None,
        };
        a = match &mask {
            Some(m) => &h * m,
            None => h.clone(),
        };
        hidden.push(h);
        masks.push(mask);
    }
    unreachable!("an mlp has at least one layer")
}

fn dropout_mask(dim: ndarray::Ix2, rate: f64, rng: &mut SeededRng) -> Array2<f64> {
    let keep = Bernoulli::new(1.0 - rate).expect("rate in [0, 1)");
    let scale = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn(dim, || if keep.sample(rng) { scale } else { 0.0 })
}

/// Gradients of the batch-mean cross-entropy.
pub fn mlp_backward(params: &MlpParams, cache: &ForwardCache, labels: &[usize]) -> Result<Gradients> {
    let batch = cache.probs.ncols();
    if labels.len() != batch {
        return Err(Error::dim("label count", batch, labels.len()));
    }
    let classes = cache.probs.nrows();
    let mut delta = cache.probs.clone();
    for (j, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Data(format!("label {l} out of range for {classes} outputs")));
        }
        delta[[l, j]] -= 1.0;
    }
    delta /= batch as f64;

    let n = params.weights.len();
    let mut grads = params.zero_gradients();
    for i in (0..n).rev() {
        grads.weights[i] = delta.dot(&cache.inputs[i].t());
        grads.biases[i] = delta.sum_axis(Axis(1));
        if i == 0 {
            break;
        }
        let mut back = params.weights[i].t().dot(&delta);
        if let Some(m) = &cache.masks[i - 1] {
            back *= m;
        }
        Zip::from(&mut back)
            .and(&cache.hidden[i - 1])
            .for_each(|g, &h| *g *= 1.0 - h * h);
        delta = back;
    }
    Ok(grads)
}

/// Plain SGD: `P ← P − λ·grad`.
pub fn sgd_step(params: &mut MlpParams, grads: &Gradients, lambda: f64) {
    for (w, g) in params.weights.iter_mut().zip(&grads.weights) {
        w.scaled_add(-lambda, g);
    }
    for (b, g) in params.biases.iter_mut().zip(&grads.biases) {
        b.scaled_add(-lambda, g);
    }
}

/// Mean cross-entropy of `probs` against `labels`.
pub fn cross_entropy(probs: &Array2<f64>, labels: &[usize]) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(j, &l)| -probs[[l, j]].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / labels.len().max(1) as f64
}

/// Evaluation-mode loss, used by gradient checks.
pub fn mlp_loss(params: &MlpParams, x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    let (probs, _) = mlp_forward(params, x, Pass::Eval)?;
    Ok(cross_entropy(&probs, labels))
}

/// Task-aware MLP learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    config: MlpConfig,
    features: usize,
    params: MlpParams,
    task_classes: Vec<usize>,
}

impl Mlp {
    /// The network starts with no descriptor inputs and no outputs; both grow
    /// as tasks are registered.
    pub fn new<R: Rng + ?Sized>(features: usize, config: MlpConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if features == 0 {
            return Err(Error::Config("mlp needs at least one input feature".into()));
        }
        let params = MlpParams::init(features, &config.hidden, 0, config.dropout, rng);
        Ok(Mlp {
            config,
            features,
            params,
            task_classes: Vec::new(),
        })
    }

    pub fn from_params(config: MlpConfig, features: usize, params: MlpParams, task_classes: Vec<usize>) -> Result<Self> {
        config.validate()?;
        if params.input_dim() != features + task_classes.len() {
            return Err(Error::dim("mlp input width", features + task_classes.len(), params.input_dim()));
        }
        Ok(Mlp {
            config,
            features,
            params,
            task_classes,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn task_classes(&self) -> &[usize] {
        &self.task_classes
    }

    /// `[xᵀ ; one-hot task]`, `input_dim × batch`.
    fn network_input(&self, task: usize, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if task >= self.task_classes.len() {
            return Err(Error::UnregisteredTask(task));
        }
        if x.ncols() != self.features {
            return Err(Error::dim("mlp features", self.features, x.ncols()));
        }
        let mut desc = Array2::zeros((self.task_classes.len(), x.nrows()));
        desc.row_mut(task).fill(1.0);
        Ok(concatenate![Axis(0), x.t(), desc])
    }
}

impl ContinualModel for Mlp {
    fn register_task(&mut self, task: usize, num_classes: usize, rng: &mut SeededRng) -> Result<()> {
        let expected = self.task_classes.len();
        if task != expected {
            return Err(Error::TaskOrder { expected, got: task });
        }
        if num_classes == 0 {
            return Err(Error::Config("a task needs at least one class".into()));
        }
        self.params.add_input(rng);
        let current = self.params.output_dim();
        if num_classes > current {
            self.params.add_outputs(num_classes - current, rng);
        }
        self.task_classes.push(num_classes);
        Ok(())
    }

    fn train_batch(&mut self, task: usize, x: ArrayView2<'_, f64>, labels: &[usize], rng: &mut SeededRng) -> Result<f64> {
        let classes = self.task_classes.get(task).copied().ok_or(Error::UnregisteredTask(task))?;
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Data(format!("label {bad} out of range for task {task} with {classes} classes")));
        }
        let input = self.network_input(task, x)?;
        let (probs, cache) = mlp_forward(&self.params, input.view(), Pass::Train(rng))?;
        let grads = mlp_backward(&self.params, &cache, labels)?;
        sgd_step(&mut self.params, &grads, self.config.lambda);
        Ok(cross_entropy(&probs, labels))
    }

    fn predict(&self, task: usize, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let input = self.network_input(task, x)?;
        let classes = self.task_classes[task];
        let (probs, _) = mlp_forward(&self.params, input.view(), Pass::Eval)?;
        Ok(probs
            .slice(ndarray::s![..classes, ..])
            .columns()
            .into_iter()
            .map(argmax)
            .collect())
    }

    fn num_tasks(&self) -> usize {
        self.task_classes.len()
    }
}

/// Trains a fresh MLP on one task alone (single pass) and returns its test
/// accuracy.
pub fn train_gold(task: &TaskData, config: &MlpConfig, batch_size: usize, seed: u64) -> Result<f64> {
    use rand::SeedableRng;
    let mut rng = SeededRng::seed_from_u64(seed);
    let mut model = Mlp::new(task.train.features.ncols(), config.clone(), &mut rng)?;
    model.register_task(0, task.def.output_slots(), &mut rng)?;
    for batch in minibatches(&task.train, batch_size, seed) {
        model.train_batch(0, batch.features.view(), &batch.labels, &mut rng)?;
    }
    evaluate_model(&model, 0, &task.test)
}
