use ndarray::{concatenate, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::context::ContextStore;
use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::inhibition::InhibitionMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
    pub inhibition: InhibitionMode,
}

impl LayerSpec {
    pub fn new(width: usize, activation: Activation, inhibition: InhibitionMode) -> Self {
        LayerSpec {
            width,
            activation,
            inhibition,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::Config("layer width must be positive".into()));
        }
        self.inhibition.validate(self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    /// State correction rate.
    pub beta: f64,
    /// Inference steps per episode.
    pub steps: usize,
    /// Weight step size (length of every normalized update).
    pub lambda: f64,
    /// Error-weight scaling.
    pub gamma: f64,
    /// Context error drive.
    pub eta_e: f64,
    /// Context drift toward the mean of earlier task codes.
    pub eta_g: f64,
    /// Guard added to the Frobenius norm before dividing.
    pub epsilon: f64,
    /// Standard deviation of freshly registered context codes.
    pub context_init_std: f64,
    /// Context codes longer than this are projected back onto the ball of
    /// this radius after every update. Infinity leaves them unbounded.
    pub context_max_norm: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            beta: 0.05,
            steps: 5,
            lambda: 0.003,
            gamma: 0.9,
            eta_e: 0.1,
            eta_g: 0.001,
            epsilon: 1e-8,
            context_init_std: 0.025,
            context_max_norm: 5.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("eta_e", self.eta_e),
            ("eta_g", self.eta_g),
            ("epsilon", self.epsilon),
            ("context_init_std", self.context_init_std),
        ];
        for (name, v) in rates {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.context_max_norm > 0.0) {
            return Err(Error::Config(format!(
                "context_max_norm must be > 0, got {}",
                self.context_max_norm
            )));
        }
        if self.gamma >= 1.0 {
            return Err(Error::Config(format!("gamma must be < 1, got {}", self.gamma)));
        }
        if self.steps == 0 {
            return Err(Error::Config("at least one inference step is required".into()));
        }
        Ok(())
    }
}

/// Predictor weights `W`, error weights `E` and per-layer context stores.
///
/// Hidden layers are indexed from 0 (the layer adjacent to the clamped
/// outputs). `w_hidden[i]` predicts layer `i` from layer `i + 1` and
/// `e_hidden[i]` carries layer `i`'s error units up to layer `i + 1`, so both
/// are indexed by the lower layer of their pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w_x: Array2<f64>,
    pub w_y: Array2<f64>,
    pub w_hidden: Vec<Array2<f64>>,
    pub e_x: Array2<f64>,
    pub e_y: Array2<f64>,
    pub e_hidden: Vec<Array2<f64>>,
    pub contexts: Vec<ContextStore>,
}

/// Zero-mean Gaussian matrix with standard deviation `1/sqrt(cols)`.
pub fn fan_in_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    if cols == 0 {
        return Array2::zeros((rows, cols));
    }
    let normal = Normal::new(0.0, 1.0 / (cols as f64).sqrt()).expect("finite std");
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng))
}

impl ModelParams {
    /// Fresh parameters with no registered tasks and no output classes.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, layers: &[LayerSpec], rng: &mut R) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("at least one hidden layer is required".into()));
        }
        for layer in layers {
            layer.validate()?;
        }
        let w1 = layers[0].width;
        let w_x = fan_in_gaussian(input_dim, w1, rng);
        let w_y = Array2::zeros((0, w1));
        let w_hidden = layers
            .windows(2)
            .map(|p| fan_in_gaussian(p[0].width, p[1].width, rng))
            .collect();
        let e_x = fan_in_gaussian(w1, input_dim, rng);
        let e_y = Array2::zeros((w1, 0));
        let e_hidden = layers
            .windows(2)
            .map(|p| fan_in_gaussian(p[1].width, p[0].width, rng))
            .collect();
        let contexts = layers.iter().map(|l| ContextStore::new(l.width)).collect();
        Ok(ModelParams {
            w_x,
            w_y,
            w_hidden,
            e_x,
            e_y,
            e_hidden,
            contexts,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w_y.nrows()
    }

    pub fn num_layers(&self) -> usize {
        self.contexts.len()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.contexts.iter().map(ContextStore::width).collect()
    }

    pub fn num_tasks(&self) -> usize {
        self.contexts.first().map_or(0, ContextStore::num_tasks)
    }

    /// Registers task `task_index` with `num_classes` output classes: appends
    /// a context code to every layer and grows the label block if needed.
    pub fn register_task<R: Rng + ?Sized>(
        &mut self,
        task_index: usize,
        num_classes: usize,
        context_init_std: f64,
        rng: &mut R,
    ) -> Result<()> {
        let expected = self.num_tasks();
        if task_index != expected {
            return Err(Error::TaskOrder {
                expected,
                got: task_index,
            });
        }
        if num_classes == 0 {
            return Err(Error::Config("a task needs at least one class".into()));
        }
        for store in &mut self.contexts {
            store.register(context_init_std, rng)?;
        }
        let current = self.output_dim();
        if num_classes > current {
            let extra = num_classes - current;
            let w1 = self.w_x.ncols();
            let rows = fan_in_gaussian(extra, w1, rng);
            // Label error weights start at zero. A random E_y lets the clamped
            // label leak into z¹ during training, and W_y learns to read it
            // back instead of reading x.
            let cols = Array2::zeros((w1, extra));
            self.w_y = concatenate![Axis(0), self.w_y, rows];
            self.e_y = concatenate![Axis(1), self.e_y, cols];
        }
        Ok(())
    }

    /// Visits every trainable matrix in snapshot order
    /// (`W_x, W_y, W_2.., E_x, E_y, E_2..`).
    pub fn matrices(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = vec![("W_x".to_string(), &self.w_x), ("W_y".to_string(), &self.w_y)];
        out.extend(self.w_hidden.iter().enumerate().map(|(i, m)| (format!("W_{}", i + 2), m)));
        out.push(("E_x".to_string(), &self.e_x));
        out.push(("E_y".to_string(), &self.e_y));
        out.extend(self.e_hidden.iter().enumerate().map(|(i, m)| (format!("E_{}", i + 2), m)));
        out
    }

    pub(crate) fn check_shapes(&self) -> Result<()> {
        let widths = self.widths();
        let (dx, dy, w1) = (self.input_dim(), self.output_dim(), widths[0]);
        let check = |name: &str, m: &Array2<f64>, shape: (usize, usize)| {
            if m.dim() != shape {
                Err(Error::dim(name, shape, m.dim()))
            } else {
                Ok(())
            }
        };
        check("W_x", &self.w_x, (dx, w1))?;
        check("W_y", &self.w_y, (dy, w1))?;
        check("E_x", &self.e_x, (w1, dx))?;
        check("E_y", &self.e_y, (w1, dy))?;
        if self.w_hidden.len() + 1 != widths.len() || self.e_hidden.len() + 1 != widths.len() {
            return Err(Error::dim("hidden weight count", widths.len() - 1, self.w_hidden.len()));
        }
        for i in 0..widths.len() - 1 {
            check(&format!("W_{}", i + 2), &self.w_hidden[i], (widths[i], widths[i + 1]))?;
            check(&format!("E_{}", i + 2), &self.e_hidden[i], (widths[i + 1], widths[i]))?;
        }
        Ok(())
    }
}
