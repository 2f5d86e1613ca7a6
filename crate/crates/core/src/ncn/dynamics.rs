//! Settling: layerwise prediction, error units and state correction.
//!
//! All state matrices are `width × batch`; each column is an independent
//! sample. A single sample is a batch of one.

use ndarray::{Array2, ArrayView1, ArrayView2};

use super::params::{Hyperparams, LayerSpec, ModelParams};
use crate::error::{Error, Result};
use crate::inhibition::inhibit_in_place;

/// Which output blocks are clamped during an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clamp {
    /// Both `x` and `y` are clamped and drive corrections.
    Train,
    /// Only `x` is clamped; the label error block is held at zero.
    Predict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    /// `hidden[i]` is the prediction of hidden layer `i` made by layer `i + 1`.
    pub hidden: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorUnits {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub hidden: Vec<Array2<f64>>,
}

impl ErrorUnits {
    pub fn iter(&self) -> impl Iterator<Item = &Array2<f64>> {
        [&self.x, &self.y].into_iter().chain(self.hidden.iter())
    }
}

/// Everything an inference episode leaves behind for the learning rule.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerEpisode {
    /// Settled hidden states after the final correction.
    pub z: Vec<Array2<f64>>,
    /// Output-block predictions from the final step.
    pub zmu_x: Array2<f64>,
    pub zmu_y: Array2<f64>,
    pub zmu_hidden: Vec<Array2<f64>>,
    /// Error units from the final step.
    pub errors: ErrorUnits,
    /// Corrections from the final step, one per hidden layer.
    pub d: Vec<Array2<f64>>,
    /// Mean per-sample total discrepancy measured at each step.
    pub step_discrepancy: Vec<f64>,
}

impl LayerEpisode {
    pub fn batch_size(&self) -> usize {
        self.zmu_x.ncols()
    }
}

fn check_states(params: &ModelParams, states: &[Array2<f64>]) -> Result<usize> {
    let widths = params.widths();
    if states.len() != widths.len() {
        return Err(Error::dim("hidden state count", widths.len(), states.len()));
    }
    let batch = states[0].ncols();
    for (i, (s, &w)) in states.iter().zip(&widths).enumerate() {
        if s.dim() != (w, batch) {
            return Err(Error::dim(format!("state of hidden layer {}", i + 1), (w, batch), s.dim()));
        }
    }
    Ok(batch)
}

/// Every predictor fires from the current (pre-correction) states.
pub fn predict_layers(
    params: &ModelParams,
    layers: &[LayerSpec],
    states: &[Array2<f64>],
) -> Result<Predictions> {
    check_states(params, states)?;
    let phi: Vec<Array2<f64>> = layers
        .iter()
        .zip(states)
        .map(|(l, z)| l.activation.apply(z.view()))
        .collect();
    Ok(predict_from_phi(params, &phi))
}

fn predict_from_phi(params: &ModelParams, phi: &[Array2<f64>]) -> Predictions {
    Predictions {
        x: params.w_x.dot(&phi[0]),
        y: params.w_y.dot(&phi[0]),
        hidden: params
            .w_hidden
            .iter()
            .zip(&phi[1..])
            .map(|(w, p)| w.dot(p))
            .collect(),
    }
}

/// `e = prediction − target`.
pub fn compute_errors(prediction: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if prediction.dim() != target.dim() {
        return Err(Error::dim("error units", prediction.dim(), target.dim()));
    }
    Ok(&prediction - &target)
}

/// Corrections for every hidden layer from one full set of error units.
///
/// The top layer only receives its bottom-up term; every other layer also
/// subtracts its own error units.
pub fn corrections(params: &ModelParams, errors: &ErrorUnits) -> Result<Vec<Array2<f64>>> {
    let depth = params.num_layers();
    if errors.hidden.len() + 1 != depth {
        return Err(Error::dim("hidden error count", depth - 1, errors.hidden.len()));
    }
    if errors.x.nrows() != params.e_x.ncols() || errors.y.nrows() != params.e_y.ncols() {
        return Err(Error::dim(
            "output error units",
            (params.e_x.ncols(), params.e_y.ncols()),
            (errors.x.nrows(), errors.y.nrows()),
        ));
    }
    let mut d = Vec::with_capacity(depth);
    let mut d1 = params.e_x.dot(&errors.x);
    if params.e_y.ncols() > 0 {
        d1 += &params.e_y.dot(&errors.y);
    }
    d.push(d1);
    for (i, e_low) in errors.hidden.iter().enumerate() {
        let e_mat = &params.e_hidden[i];
        if e_low.nrows() != e_mat.ncols() {
            return Err(Error::dim(format!("error units of hidden layer {}", i + 1), e_mat.ncols(), e_low.nrows()));
        }
        d.push(e_mat.dot(e_low));
    }
    for (i, e_own) in errors.hidden.iter().enumerate() {
        d[i] -= e_own;
    }
    Ok(d)
}

/// One correction step: computes `d` for every layer, then replaces each
/// state with `f(φ(z) + β d, g)`. Returns the corrections.
pub fn correct_states(
    params: &ModelParams,
    layers: &[LayerSpec],
    hp: &Hyperparams,
    states: &mut [Array2<f64>],
    errors: &ErrorUnits,
    contexts: &[ArrayView1<'_, f64>],
) -> Result<Vec<Array2<f64>>> {
    check_states(params, states)?;
    let d = corrections(params, errors)?;
    for (i, layer) in layers.iter().enumerate() {
        if d[i].dim() != states[i].dim() {
            return Err(Error::dim(format!("correction of hidden layer {}", i + 1), states[i].dim(), d[i].dim()));
        }
        let mut next = layer.activation.apply(states[i].view());
        next.scaled_add(hp.beta, &d[i]);
        inhibit_in_place(&mut next, contexts[i], &layer.inhibition)?;
        states[i] = next;
    }
    Ok(d)
}

/// Half the summed squared error over every error block and every sample.
pub fn total_discrepancy(episode: &LayerEpisode) -> f64 {
    errors_discrepancy(&episode.errors)
}

fn errors_discrepancy(errors: &ErrorUnits) -> f64 {
    errors.iter().map(|e| 0.5 * e.iter().map(|v| v * v).sum::<f64>()).sum()
}

/// Runs a `K`-step settling episode from all-zero hidden states.
///
/// `x` and `y` are `dim × batch`. An absent block, or `y` under
/// [`Clamp::Predict`], contributes a zero error block so it exerts no
/// corrective force.
pub fn infer_states(
    params: &ModelParams,
    layers: &[LayerSpec],
    hp: &Hyperparams,
    x: Option<ArrayView2<'_, f64>>,
    y: Option<ArrayView2<'_, f64>>,
    task: usize,
    clamp: Clamp,
) -> Result<LayerEpisode> {
    if layers.len() != params.num_layers() {
        return Err(Error::dim("layer specs", params.num_layers(), layers.len()));
    }
    if hp.steps == 0 {
        return Err(Error::Config("at least one inference step is required".into()));
    }
    let y = match clamp {
        Clamp::Train => y,
        Clamp::Predict => None,
    };
    let batch = match (&x, &y) {
        (Some(x), Some(y)) if x.ncols() != y.ncols() => {
            return Err(Error::dim("batch size of y", x.ncols(), y.ncols()))
        }
        (Some(x), _) => x.ncols(),
        (None, Some(y)) => y.ncols(),
        (None, None) => {
            return Err(Error::Config("an episode needs at least one of x or y".into()))
        }
    };
    if let Some(x) = &x {
        if x.nrows() != params.input_dim() {
            return Err(Error::dim("x", params.input_dim(), x.nrows()));
        }
    }
    if let Some(y) = &y {
        if y.nrows() != params.output_dim() {
            return Err(Error::dim("y", params.output_dim(), y.nrows()));
        }
    }
    let contexts: Vec<ArrayView1<'_, f64>> = params
        .contexts
        .iter()
        .map(|c| c.lookup(task))
        .collect::<Result<_>>()?;

    let mut z: Vec<Array2<f64>> = layers.iter().map(|l| Array2::zeros((l.width, batch))).collect();
    let mut step_discrepancy = Vec::with_capacity(hp.steps);
    let mut last = None;
    for _ in 0..hp.steps {
        let phi: Vec<Array2<f64>> = layers
            .iter()
            .zip(&z)
            .map(|(l, s)| l.activation.apply(s.view()))
            .collect();
        let pred = predict_from_phi(params, &phi);
        let ex = match &x {
            Some(x) => compute_errors(pred.x.view(), x.view())?,
            None => Array2::zeros(pred.x.dim()),
        };
        let ey = match &y {
            Some(y) => compute_errors(pred.y.view(), y.view())?,
            None => Array2::zeros(pred.y.dim()),
        };
        let hidden = pred
            .hidden
            .iter()
            .zip(&z)
            .map(|(p, s)| compute_errors(p.view(), s.view()))
            .collect::<Result<Vec<_>>>()?;
        let errors = ErrorUnits { x: ex, y: ey, hidden };
        step_discrepancy.push(errors_discrepancy(&errors) / batch.max(1) as f64);

        let d = corrections(params, &errors)?;
        for (i, layer) in layers.iter().enumerate() {
            let mut next = phi[i].clone();
            next.scaled_add(hp.beta, &d[i]);
            inhibit_in_place(&mut next, contexts[i], &layer.inhibition)?;
            z[i] = next;
        }
        last = Some((pred, errors, d));
    }
    let (pred, errors, d) = last.expect("at least one step");
    Ok(LayerEpisode {
        z,
        zmu_x: pred.x,
        zmu_y: pred.y,
        zmu_hidden: pred.hidden,
        errors,
        d,
        step_discrepancy,
    })
}
