use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// Elementwise nonlinearity applied to a layer state before it is used to
/// predict the layer below. Only forward values are ever needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Heaviside,
}

impl Activation {
    #[inline]
    pub fn eval(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
            Activation::Heaviside => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn apply(self, z: ArrayView2<'_, f64>) -> Array2<f64> {
        match self {
            Activation::Identity => z.to_owned(),
            _ => z.mapv(|v| self.eval(v)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Heaviside => "heaviside",
        }
    }

    /// True when `eval(0) == 0`, which the zero-state fixed point relies on.
    pub fn preserves_zero(self) -> bool {
        self.eval(0.0) == 0.0
    }
}
