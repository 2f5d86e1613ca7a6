//! Fixtures shared by the benchmarks: 3x500 models and random batches.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use sncn::harness::{NetworkConfig, Variant};
use sncn::mlp::{Mlp, MlpConfig};
use sncn::{ContinualModel, Hyperparams, SeededRng, Sncn};

pub const INPUT_DIM: usize = 784;
pub const CLASSES: usize = 5;

/// A 3×500 S-NCN of the given variant with one registered task.
pub fn sncn(variant: Variant, seed: u64) -> Sncn {
    let mut rng = SeededRng::seed_from_u64(seed);
    let layers = variant
        .layer_specs(&NetworkConfig::default())
        .expect("an S-NCN variant");
    let mut model = Sncn::new(INPUT_DIM, layers, Hyperparams::default(), &mut rng).expect("valid model");
    model.register_task(0, CLASSES, &mut rng).expect("first task");
    model
}

/// A 3×500 MLP with one registered task.
pub fn mlp(dropout: f64, seed: u64) -> Mlp {
    let mut rng = SeededRng::seed_from_u64(seed);
    let config = MlpConfig {
        dropout,
        ..Default::default()
    };
    let mut model = Mlp::new(INPUT_DIM, config, &mut rng).expect("valid model");
    model.register_task(0, CLASSES, &mut rng).expect("first task");
    model
}

/// Row-major pixel batch in [0, 1] with labels.
pub fn batch(size: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = SeededRng::seed_from_u64(seed);
    let x = Array2::from_shape_simple_fn((size, INPUT_DIM), || rng.random::<f64>());
    let labels = (0..size).map(|_| rng.random_range(0..CLASSES)).collect();
    (x, labels)
}
