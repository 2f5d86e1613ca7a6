use std::collections::{BTreeSet, HashMap};

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::idx::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceDataset {
    Mnist,
    FashionMnist,
    Synthetic,
}

impl SourceDataset {
    pub fn name(self) -> &'static str {
        match self {
            SourceDataset::Mnist => "mnist",
            SourceDataset::FashionMnist => "fashion-mnist",
            SourceDataset::Synthetic => "synthetic",
        }
    }
}

/// A dataset's published train and test partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSource {
    pub train: Dataset,
    pub test: Dataset,
}

impl DataSource {
    pub fn classes(&self) -> BTreeSet<usize> {
        self.train.labels.iter().chain(&self.test.labels).copied().collect()
    }
}

/// One task of a stream: a subset of a source dataset's classes. Original
/// label `class_subset[i]` maps to output slot `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDef {
    pub id: usize,
    pub name: String,
    pub source: SourceDataset,
    pub class_subset: Vec<usize>,
}

impl TaskDef {
    pub fn output_slots(&self) -> usize {
        self.class_subset.len()
    }

    pub fn slot_of(&self, original: usize) -> Option<usize> {
        self.class_subset.iter().position(|&c| c == original)
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_subset.is_empty() {
            return Err(Error::Config(format!("task {} has an empty class subset", self.name)));
        }
        let distinct: BTreeSet<_> = self.class_subset.iter().collect();
        if distinct.len() != self.class_subset.len() {
            return Err(Error::Config(format!("task {} repeats a class", self.name)));
        }
        Ok(())
    }
}

/// A labeled sample as seen by a learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
    pub task_id: usize,
}

/// Row-major features and slot labels for one partition of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplit {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
}

impl TaskSplit {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn sample(&self, i: usize, task_id: usize) -> Sample {
        Sample {
            features: self.features.row(i).to_vec(),
            label: self.labels[i],
            task_id,
        }
    }

    pub fn select(&self, indices: &[usize]) -> TaskSplit {
        TaskSplit {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Splits off the trailing `fraction` of samples as a development set.
    pub fn carve_dev(&self, fraction: f64) -> (TaskSplit, TaskSplit) {
        let n = self.len();
        let dev = ((n as f64) * fraction.clamp(0.0, 1.0)).round() as usize;
        let cut = n - dev;
        let head: Vec<usize> = (0..cut).collect();
        let tail: Vec<usize> = (cut..n).collect();
        (self.select(&head), self.select(&tail))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub def: TaskDef,
    pub train: TaskSplit,
    pub test: TaskSplit,
}

/// Optional per-class caps, taken in file order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitLimits {
    pub max_train_per_class: Option<usize>,
    pub max_test_per_class: Option<usize>,
}

fn filter(ds: &Dataset, def: &TaskDef, cap: Option<usize>) -> TaskSplit {
    let mut taken: HashMap<usize, usize> = HashMap::new();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, &orig) in ds.labels.iter().enumerate() {
        let Some(slot) = def.slot_of(orig) else { continue };
        let count = taken.entry(orig).or_default();
        if cap.is_some_and(|c| *count >= c) {
            continue;
        }
        *count += 1;
        rows.push(i);
        labels.push(slot);
    }
    TaskSplit {
        features: ds.features.select(Axis(0), &rows),
        labels,
    }
}

/// Keeps only the samples of `def.class_subset` and relabels them by position.
pub fn build_split(source: &DataSource, def: TaskDef, limits: SplitLimits) -> Result<TaskData> {
    def.validate()?;
    let known = source.classes();
    if let Some(missing) = def.class_subset.iter().find(|c| !known.contains(c)) {
        return Err(Error::Data(format!(
            "class {missing} of task {} does not occur in the {} data",
            def.name,
            def.source.name()
        )));
    }
    let train = filter(&source.train, &def, limits.max_train_per_class);
    let test = filter(&source.test, &def, limits.max_test_per_class);
    Ok(TaskData { def, train, test })
}
