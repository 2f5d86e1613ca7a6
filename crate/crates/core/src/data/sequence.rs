use serde::{Deserialize, Serialize};

use super::split::{SourceDataset, TaskDef};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Equal,
    Unequal,
}

/// A named class subset of one source dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub name: String,
    pub dataset: SourceDataset,
    pub classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ordering {
    Preset(String),
    Explicit(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSequence {
    pub tasks: Vec<TaskDef>,
    pub scenario: Scenario,
}

impl TaskSequence {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

pub const ORDERING1_REDUCED: [&str; 4] = ["M1", "M2", "FM1", "FM2"];
pub const ORDERING2_REDUCED: [&str; 4] = ["M1", "FM2", "M2", "FM1"];

/// The built-in equal-class splits. Fashion-MNIST ids: 0 top, 1 trouser,
/// 2 pullover, 3 dress, 4 coat, 5 sandal, 6 shirt, 7 sneaker, 8 bag, 9 ankle boot.
pub fn builtin_split(name: &str) -> Result<SplitSpec> {
    let (dataset, classes) = match name {
        "M1" => (SourceDataset::Mnist, vec![0, 8, 3, 5, 2]),
        "M2" => (SourceDataset::Mnist, vec![1, 4, 6, 7, 9]),
        "FM1" => (SourceDataset::FashionMnist, vec![0, 1, 2, 3, 4]),
        "FM2" => (SourceDataset::FashionMnist, vec![5, 6, 7, 8, 9]),
        "GD1" | "GD2" => {
            return Err(Error::UnsupportedSplit(format!(
                "{name}: Google Draw splits are not available"
            )))
        }
        other => return Err(Error::UnsupportedSplit(other.to_string())),
    };
    Ok(SplitSpec {
        name: name.to_string(),
        dataset,
        classes,
    })
}

pub fn resolve_ordering(ordering: &Ordering) -> Result<Vec<String>> {
    match ordering {
        Ordering::Preset(p) => match p.as_str() {
            "ordering1-reduced" => Ok(ORDERING1_REDUCED.iter().map(|s| s.to_string()).collect()),
            "ordering2-reduced" => Ok(ORDERING2_REDUCED.iter().map(|s| s.to_string()).collect()),
            // A bare split name is a one-task ordering.
            other => Ok(vec![other.to_string()]),
        },
        Ordering::Explicit(names) => Ok(names.clone()),
    }
}

/// Builds a task sequence. Names are looked up in `custom` first, then in
/// the built-in splits. Equal scenarios require identical class counts.
pub fn make_sequence(ordering: &Ordering, scenario: Scenario, custom: &[SplitSpec]) -> Result<TaskSequence> {
    let names = resolve_ordering(ordering)?;
    if names.is_empty() {
        return Err(Error::Config("ordering names no tasks".into()));
    }
    let tasks = names
        .iter()
        .enumerate()
        .map(|(id, name)| {
            let spec = match custom.iter().find(|s| &s.name == name) {
                Some(s) => s.clone(),
                None => builtin_split(name)?,
            };
            let def = TaskDef {
                id,
                name: spec.name,
                source: spec.dataset,
                class_subset: spec.classes,
            };
            def.validate()?;
            Ok(def)
        })
        .collect::<Result<Vec<_>>>()?;
    if scenario == Scenario::Equal {
        let n = tasks[0].output_slots();
        if let Some(bad) = tasks.iter().find(|t| t.output_slots() != n) {
            return Err(Error::Config(format!(
                "equal scenario: task {} has {} classes, expected {n}",
                bad.name,
                bad.output_slots()
            )));
        }
    }
    Ok(TaskSequence { tasks, scenario })
}
