//! Task streams: dataset ingestion, class-subset splits with slot
//! remapping, orderings and single-pass mini-batch iteration.

mod batches;
pub mod idx;
mod sequence;
mod split;
mod synthetic;

pub use batches::{minibatches, Batch, MiniBatches};
pub use idx::{load_idx, Dataset};
pub use sequence::{
    builtin_split, make_sequence, resolve_ordering, Ordering, Scenario, SplitSpec, TaskSequence, ORDERING1_REDUCED,
    ORDERING2_REDUCED,
};
pub use split::{build_split, DataSource, Sample, SourceDataset, SplitLimits, TaskData, TaskDef, TaskSplit};
pub use synthetic::synthetic_source;

use std::path::Path;

use crate::error::Result;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Loads the standard four-file IDX layout from a directory.
pub fn load_source_dir(dir: &Path) -> Result<DataSource> {
    Ok(DataSource {
        train: load_idx(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS))?,
        test: load_idx(&dir.join(TEST_IMAGES), &dir.join(TEST_LABELS))?,
    })
}
