//! Continual-learning metrics over a task matrix `R`, where `R[i][j]` is the
//! accuracy on task `j` measured right after training on task `i`.
//!
//! Formulas use 1-based task numbers; storage is 0-based, so `R_{i,j}` lives
//! at `r[[i - 1, j - 1]]`. [`cbwt`] takes the 1-based task number. Entries
//! above the diagonal are never read by any metric.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TaskMatrix {
    r: Array2<f64>,
}

impl TaskMatrix {
    pub fn new(r: Array2<f64>) -> Result<Self> {
        if r.nrows() != r.ncols() || r.nrows() == 0 {
            return Err(Error::dim("task matrix", "square, T >= 1", r.dim()));
        }
        if let Some(bad) = r.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("task matrix entry {bad} outside [0, 1]")));
        }
        Ok(TaskMatrix { r })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let t = rows.len();
        if rows.iter().any(|row| row.len() != t) {
            return Err(Error::dim("task matrix rows", t, rows.iter().map(Vec::len).collect::<Vec<_>>()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let r = Array2::from_shape_vec((t, t), flat).map_err(|e| Error::Data(e.to_string()))?;
        Self::new(r)
    }

    pub fn tasks(&self) -> usize {
        self.r.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.r
    }

    /// 0-based access.
    pub fn get(&self, stage: usize, task: usize) -> f64 {
        self.r[[stage, task]]
    }
}

/// Accuracy of an independently trained classifier on each task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldDiagonal(pub Vec<f64>);

impl GoldDiagonal {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        if let Some(bad) = g.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("gold accuracy {bad} outside [0, 1]")));
        }
        Ok(GoldDiagonal(g))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Mean of the final row.
pub fn acc(r: &TaskMatrix) -> f64 {
    let t = r.tasks();
    (0..t).map(|i| r.get(t - 1, i)).sum::<f64>() / t as f64
}

fn require_two(r: &TaskMatrix, metric: &'static str) -> Result<usize> {
    match r.tasks() {
        1 => Err(Error::UndefinedMetric {
            metric,
            reason: "needs at least two tasks".into(),
        }),
        t => Ok(t),
    }
}

/// Mean change from each earlier task's just-trained accuracy to its final accuracy.
pub fn bwt(r: &TaskMatrix) -> Result<f64> {
    let t = require_two(r, "BWT")?;
    Ok((0..t - 1).map(|i| r.get(t - 1, i) - r.get(i, i)).sum::<f64>() / (t - 1) as f64)
}

/// Like [`bwt`] but measured against independently trained classifiers.
pub fn tbwt(r: &TaskMatrix, gold: &GoldDiagonal) -> Result<f64> {
    let t = require_two(r, "TBWT")?;
    if gold.len() != t {
        return Err(Error::dim("gold diagonal", t, gold.len()));
    }
    Ok((0..t - 1).map(|i| r.get(t - 1, i) - gold.0[i]).sum::<f64>() / (t - 1) as f64)
}

/// Mean degradation of task `task` (1-based) over every later stage.
pub fn cbwt(r: &TaskMatrix, task: usize) -> Result<f64> {
    let t = r.tasks();
    if task == 0 || task >= t {
        return Err(Error::UndefinedMetric {
            metric: "CBWT",
            reason: format!("task {task} must lie in 1..{t}"),
        });
    }
    let col = task - 1;
    let base = r.get(col, col);
    Ok((task..t).map(|i| r.get(i, col) - base).sum::<f64>() / (t - task) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample mean and `n − 1` standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len();
        if n == 0 {
            return MeanStd { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        MeanStd { mean, std }
    }
}

/// Metrics of one trial. Backward-transfer metrics are absent for a single task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub acc: f64,
    pub bwt: Option<f64>,
    pub tbwt: Option<f64>,
    pub cbwt: Option<f64>,
}

impl TrialMetrics {
    /// Evaluates all four metrics; CBWT at the 1-based `cbwt_task`.
    pub fn compute(r: &TaskMatrix, gold: &GoldDiagonal, cbwt_task: usize) -> Result<Self> {
        if gold.len() != r.tasks() {
            return Err(Error::dim("gold diagonal", r.tasks(), gold.len()));
        }
        if r.tasks() == 1 {
            return Ok(TrialMetrics { acc: acc(r), bwt: None, tbwt: None, cbwt: None });
        }
        Ok(TrialMetrics {
            acc: acc(r),
            bwt: Some(bwt(r)?),
            tbwt: Some(tbwt(r, gold)?),
            cbwt: Some(cbwt(r, cbwt_task)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub cbwt_task: usize,
    pub acc: MeanStd,
    pub bwt: Option<MeanStd>,
    pub tbwt: Option<MeanStd>,
    pub cbwt: Option<MeanStd>,
}

/// Mean ± std of every metric across trials. `gold[k]` pairs with `trials[k]`.
pub fn aggregate(trials: &[TaskMatrix], gold: &[GoldDiagonal], cbwt_task: usize) -> Result<Summary> {
    if trials.is_empty() {
        return Err(Error::Data("aggregation needs at least one trial".into()));
    }
    if gold.len() != trials.len() {
        return Err(Error::dim("gold diagonals", trials.len(), gold.len()));
    }
    let t = trials[0].tasks();
    if let Some(bad) = trials.iter().find(|r| r.tasks() != t) {
        return Err(Error::dim("trial task matrix", t, bad.tasks()));
    }
    let per: Vec<TrialMetrics> = trials
        .iter()
        .zip(gold)
        .map(|(r, g)| TrialMetrics::compute(r, g, cbwt_task))
        .collect::<Result<_>>()?;
    let collect = |f: fn(&TrialMetrics) -> Option<f64>| -> Option<MeanStd> {
        per.iter().map(f).collect::<Option<Vec<f64>>>().map(|v| MeanStd::of(&v))
    };
    Ok(Summary {
        trials: trials.len(),
        cbwt_task,
        acc: MeanStd::of(&per.iter().map(|m| m.acc).collect::<Vec<_>>()),
        bwt: collect(|m| m.bwt),
        tbwt: collect(|m| m.tbwt),
        cbwt: collect(|m| m.cbwt),
    })
}
