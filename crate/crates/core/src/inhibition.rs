//! Task-conditioned lateral competition applied after each state correction.
//!
//! Three forms are supported, all driven by the layer's context code `g`:
//!
//! * `Identity` passes the corrected state through and ignores `g`.
//! * `KwtaMask` keeps the `k` largest-magnitude entries of `g`, forms the
//!   outer product of that sparse code with itself and applies only its
//!   diagonal (Hadamard product with `I`), so winner `i` is scaled by `g_i^2`
//!   and every other unit is silenced.
//! * `Subtractive` subtracts `(A ∘ g gᵀ) ẑ`, where `A` holds `alpha` off the
//!   diagonal and zero on it, then rectifies.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InhibitionMode {
    Identity,
    KwtaMask { k: usize },
    Subtractive { alpha: f64 },
}

impl InhibitionMode {
    /// Default winner count: ten percent of the layer, rounded up.
    pub fn default_k(width: usize) -> usize {
        width.div_ceil(10).max(1)
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        match *self {
            InhibitionMode::KwtaMask { k } if k == 0 || k > width => Err(Error::Config(format!(
                "kwta winner count k={k} must lie in 1..={width}"
            ))),
            InhibitionMode::Subtractive { alpha } if !(alpha >= 0.0) => Err(Error::Config(
                format!("subtractive inhibition strength must be non-negative, got {alpha}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn uses_context(&self) -> bool {
        !matches!(self, InhibitionMode::Identity)
    }
}

/// Indices of the `k` entries of `g` with the largest magnitude. Ties go to
/// the lower index.
pub fn kwta_winners(g: ArrayView1<'_, f64>, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| g[b].abs().total_cmp(&g[a].abs()).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// `kWTA(g)`: the context code with everything but the winners zeroed.
pub fn kwta(g: ArrayView1<'_, f64>, k: usize) -> Array1<f64> {
    let mut out = Array1::zeros(g.len());
    for i in kwta_winners(g, k) {
        out[i] = g[i];
    }
    out
}

/// Applies the competition function to a batch of corrected states.
/// `zhat` is `width × batch`; `g` has length `width`.
pub fn apply_inhibition(
    zhat: ArrayView2<'_, f64>,
    g: ArrayView1<'_, f64>,
    mode: &InhibitionMode,
) -> Result<Array2<f64>> {
    let mut z = zhat.to_owned();
    inhibit_in_place(&mut z, g, mode)?;
    Ok(z)
}

/// Single-vector convenience wrapper around [`apply_inhibition`].
pub fn apply_inhibition_vec(
    zhat: ArrayView1<'_, f64>,
    g: ArrayView1<'_, f64>,
    mode: &InhibitionMode,
) -> Result<Array1<f64>> {
    let z = apply_inhibition(zhat.insert_axis(Axis(1)), g, mode)?;
    Ok(z.remove_axis(Axis(1)))
}

pub fn inhibit_in_place(
    z: &mut Array2<f64>,
    g: ArrayView1<'_, f64>,
    mode: &InhibitionMode,
) -> Result<()> {
    let width = z.nrows();
    mode.validate(width)?;
    if matches!(mode, InhibitionMode::Identity) {
        return Ok(());
    }
    if g.len() != width {
        return Err(Error::dim("inhibition context", width, g.len()));
    }
    match *mode {
        InhibitionMode::Identity => {}
        InhibitionMode::KwtaMask { k } => {
            let code = kwta(g, k);
            let diag = code.mapv(|v| v * v);
            Zip::from(z.rows_mut())
                .and(&diag)
                .for_each(|mut row, &m| row *= m);
        }
        InhibitionMode::Subtractive { alpha } => {
            // (A ∘ g gᵀ) ẑ = alpha * (g (gᵀ ẑ) - g² ∘ ẑ), evaluated without the dense matrix.
            let proj = g.dot(&*z);
            for (i, mut row) in z.rows_mut().into_iter().enumerate() {
                let gi = g[i];
                Zip::from(&mut row).and(&proj).for_each(|v, &p| {
                    let lateral = alpha * (gi * p - gi * gi * *v);
                    *v = (*v - lateral).max(0.0);
                });
            }
        }
    }
    Ok(())
}
