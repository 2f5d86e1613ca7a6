//! Seeded Gaussian class blobs, clipped to `[0, 1]`, for fast tests.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use super::idx::Dataset;
use super::split::DataSource;
use crate::SeededRng;

/// `classes` blobs in `dim` dimensions. Each class centre is drawn uniformly
/// from `[0.2, 0.8]^dim`; samples add isotropic noise of std `spread`.
pub fn synthetic_source(
    classes: usize,
    dim: usize,
    train_per_class: usize,
    test_per_class: usize,
    spread: f64,
    seed: u64,
) -> DataSource {
    let mut rng = SeededRng::seed_from_u64(seed);
    let centres = Array2::from_shape_simple_fn((classes, dim), || rng.random_range(0.2..0.8));
    let noise = Normal::new(0.0, spread).expect("finite spread");
    let draw = |per_class: usize, rng: &mut SeededRng| {
        let n = classes * per_class;
        let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        let features = Array2::from_shape_fn((n, dim), |(i, j)| {
            (centres[[labels[i], j]] + noise.sample(rng)).clamp(0.0, 1.0)
        });
        Dataset { features, labels }
    };
    let train = draw(train_per_class, &mut rng);
    let test = draw(test_per_class, &mut rng);
    DataSource { train, test }
}
