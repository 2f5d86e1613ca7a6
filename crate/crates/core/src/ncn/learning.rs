//! Local weight updates and context-code evolution.
//!
//! Every displacement is built from one pair of locally available vectors
//! (an error block and a state or correction), averaged over the batch, and
//! applied as a step of length `λ` along its normalized direction.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2};

use super::context::batch_mean;
use super::dynamics::LayerEpisode;
use super::params::{Hyperparams, LayerSpec, ModelParams};
use crate::error::{Error, Result};

/// Raw (unnormalized) displacements, laid out like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Deltas {
    pub w_x: Array2<f64>,
    pub w_y: Array2<f64>,
    pub w_hidden: Vec<Array2<f64>>,
    pub e_x: Array2<f64>,
    pub e_y: Array2<f64>,
    pub e_hidden: Vec<Array2<f64>>,
}

/// `scale · a · bᵀ`, i.e. the batch-summed outer products of matching columns.
fn outer(scale: f64, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), b.nrows()));
    if a.ncols() > 0 {
        general_mat_mul(scale, &a, &b.t(), 0.0, &mut out);
    }
    out
}

/// Displacements for every parameter. Depends only on the episode, never on
/// the current weights.
pub fn compute_deltas(layers: &[LayerSpec], hp: &Hyperparams, episode: &LayerEpisode) -> Result<Deltas> {
    if layers.len() != episode.z.len() {
        return Err(Error::dim("episode depth", layers.len(), episode.z.len()));
    }
    let batch = episode.batch_size();
    if batch == 0 {
        return Err(Error::Data("cannot update from an empty batch".into()));
    }
    let inv = 1.0 / batch as f64;
    let phi: Vec<Array2<f64>> = layers
        .iter()
        .zip(&episode.z)
        .map(|(l, z)| l.activation.apply(z.view()))
        .collect();
    let e = &episode.errors;
    Ok(Deltas {
        w_x: outer(inv, e.x.view(), phi[0].view()),
        w_y: outer(inv, e.y.view(), phi[0].view()),
        w_hidden: e
            .hidden
            .iter()
            .zip(&phi[1..])
            .map(|(err, p)| outer(inv, err.view(), p.view()))
            .collect(),
        e_x: outer(hp.gamma * inv, episode.d[0].view(), e.x.view()),
        e_y: outer(hp.gamma * inv, episode.d[0].view(), e.y.view()),
        e_hidden: e
            .hidden
            .iter()
            .zip(&episode.d[1..])
            .map(|(err, d)| outer(hp.gamma * inv, d.view(), err.view()))
            .collect(),
    })
}

/// `P ← P − λ ΔP / (‖ΔP‖_F + ε)`. Returns the Frobenius norm of the applied step.
pub fn normalized_step(param: &mut Array2<f64>, delta: &Array2<f64>, hp: &Hyperparams) -> Result<f64> {
    if param.dim() != delta.dim() {
        return Err(Error::dim("weight delta", param.dim(), delta.dim()));
    }
    let norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = hp.lambda / (norm + hp.epsilon);
    param.scaled_add(-scale, delta);
    Ok(scale * norm)
}

/// Applies every displacement. Returns the applied step norms in snapshot order.
pub fn apply_deltas(params: &mut ModelParams, deltas: &Deltas, hp: &Hyperparams) -> Result<Vec<f64>> {
    if deltas.w_hidden.len() != params.w_hidden.len() || deltas.e_hidden.len() != params.e_hidden.len() {
        return Err(Error::dim("delta depth", params.w_hidden.len(), deltas.w_hidden.len()));
    }
    let mut norms = vec![
        normalized_step(&mut params.w_x, &deltas.w_x, hp)?,
        normalized_step(&mut params.w_y, &deltas.w_y, hp)?,
    ];
    for (p, d) in params.w_hidden.iter_mut().zip(&deltas.w_hidden) {
        norms.push(normalized_step(p, d, hp)?);
    }
    norms.push(normalized_step(&mut params.e_x, &deltas.e_x, hp)?);
    norms.push(normalized_step(&mut params.e_y, &deltas.e_y, hp)?);
    for (p, d) in params.e_hidden.iter_mut().zip(&deltas.e_hidden) {
        norms.push(normalized_step(p, d, hp)?);
    }
    Ok(norms)
}

/// Moves every layer's code for `task` using the batch-averaged corrections.
pub fn update_contexts(params: &mut ModelParams, task: usize, episode: &LayerEpisode, hp: &Hyperparams) -> Result<()> {
    for (store, d) in params.contexts.iter_mut().zip(&episode.d) {
        store.update_bounded(task, batch_mean(d).view(), hp.eta_e, hp.eta_g, hp.context_max_norm)?;
    }
    Ok(())
}

/// Full learning step for one train-mode episode: weights, then contexts.
pub fn update_weights(
    params: &mut ModelParams,
    layers: &[LayerSpec],
    hp: &Hyperparams,
    episode: &LayerEpisode,
    task: usize,
) -> Result<Vec<f64>> {
    let deltas = compute_deltas(layers, hp, episode)?;
    let norms = apply_deltas(params, &deltas, hp)?;
    update_contexts(params, task, episode, hp)?;
    Ok(norms)
}
