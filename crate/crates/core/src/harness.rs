//! Experiment runner: configuration, seeded trials over a task stream,
//! result files.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::data::{
    build_split, load_source_dir, make_sequence, minibatches, synthetic_source, DataSource, Ordering, Scenario,
    SourceDataset, SplitLimits, SplitSpec, TaskData,
};
use crate::error::{Error, Result};
use crate::inhibition::InhibitionMode;
use crate::metrics::{aggregate, GoldDiagonal, Summary, TaskMatrix, TrialMetrics};
use crate::mlp::{train_gold, Mlp, MlpConfig};
use crate::model::ContinualModel;
use crate::ncn::{Hyperparams, LayerSpec, Sncn};
use crate::snapshot::Snapshot;
use crate::SeededRng;

pub use crate::model::evaluate_model;

/// Environment variable that overrides the data root. When set, MNIST is read
/// from `$SNCN_DATA_DIR/mnist` and Fashion-MNIST from
/// `$SNCN_DATA_DIR/fashion-mnist`.
pub const DATA_DIR_ENV: &str = "SNCN_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Sncn,
    SncnRelu,
    Lat1Sncn,
    Lat2Sncn,
    Backprop,
    BackpropDo,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Sncn,
        Variant::SncnRelu,
        Variant::Lat1Sncn,
        Variant::Lat2Sncn,
        Variant::Backprop,
        Variant::BackpropDo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Sncn => "sncn",
            Variant::SncnRelu => "sncn-relu",
            Variant::Lat1Sncn => "lat1-sncn",
            Variant::Lat2Sncn => "lat2-sncn",
            Variant::Backprop => "backprop",
            Variant::BackpropDo => "backprop-do",
        }
    }

    pub fn parse(name: &str) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown variant {name:?}")))
    }

    pub fn is_mlp(self) -> bool {
        matches!(self, Variant::Backprop | Variant::BackpropDo)
    }

    /// Hidden-layer specs of the S-NCN variants; `None` for the MLPs.
    pub fn layer_specs(self, net: &NetworkConfig) -> Option<Vec<LayerSpec>> {
        let spec = |width: usize| {
            let (activation, inhibition) = match self {
                Variant::Sncn => (Activation::Tanh, InhibitionMode::Identity),
                Variant::SncnRelu => (Activation::Relu, InhibitionMode::Identity),
                Variant::Lat1Sncn => (
                    Activation::Tanh,
                    InhibitionMode::KwtaMask {
                        k: net.kwta_k.unwrap_or_else(|| InhibitionMode::default_k(width)),
                    },
                ),
                Variant::Lat2Sncn => (
                    Activation::Relu,
                    InhibitionMode::Subtractive {
                        alpha: net.subtractive_alpha,
                    },
                ),
                Variant::Backprop | Variant::BackpropDo => unreachable!(),
            };
            LayerSpec::new(width, activation, inhibition)
        };
        if self.is_mlp() {
            None
        } else {
            Some(net.hidden.iter().map(|&w| spec(w)).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    /// Winners per layer for Lat1; defaults to 10% of the layer width.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kwta_k: Option<usize>,
    pub subtractive_alpha: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden: vec![500; 3],
            kwta_k: None,
            subtractive_alpha: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpSettings {
    pub lambda: f64,
    /// Hidden dropout of the backprop-do variant.
    pub dropout: f64,
}

impl Default for MlpSettings {
    fn default() -> Self {
        MlpSettings {
            lambda: 0.01,
            dropout: 0.5,
        }
    }
}

/// Parameters of the generated blob dataset used for smoke tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub spread: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 4,
            dim: 16,
            train_per_class: 50,
            test_per_class: 20,
            spread: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub mnist: PathBuf,
    pub fashion_mnist: PathBuf,
    pub synthetic: SyntheticSpec,
}

impl Default for DataPaths {
    fn default() -> Self {
        DataPaths {
            mnist: PathBuf::from("data/mnist"),
            fashion_mnist: PathBuf::from("data/fashion-mnist"),
            synthetic: SyntheticSpec::default(),
        }
    }
}

impl DataPaths {
    /// Both image directories under one root.
    pub fn under(root: &Path) -> Self {
        DataPaths {
            mnist: root.join("mnist"),
            fashion_mnist: root.join("fashion-mnist"),
            synthetic: SyntheticSpec::default(),
        }
    }

    pub fn load(&self, dataset: SourceDataset) -> Result<DataSource> {
        match dataset {
            SourceDataset::Mnist => load_source_dir(&self.mnist),
            SourceDataset::FashionMnist => load_source_dir(&self.fashion_mnist),
            SourceDataset::Synthetic => {
                let s = &self.synthetic;
                Ok(synthetic_source(
                    s.classes,
                    s.dim,
                    s.train_per_class,
                    s.test_per_class,
                    s.spread,
                    s.seed,
                ))
            }
        }
    }
}

fn default_ordering() -> Ordering {
    Ordering::Preset("ordering1-reduced".into())
}

/// A complete experiment description. Serialized as TOML; unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub ordering: Ordering,
    pub scenario: Scenario,
    pub trials: usize,
    pub base_seed: u64,
    pub batch_size: usize,
    /// 1-based task whose column CBWT follows.
    pub cbwt_task: usize,
    pub output_dir: PathBuf,
    /// Class subsets referenced by name in `ordering`, in addition to the
    /// built-in ones.
    pub splits: Vec<SplitSpec>,
    pub limits: SplitLimits,
    pub data: DataPaths,
    pub network: NetworkConfig,
    pub hyperparams: Hyperparams,
    pub mlp: MlpSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            variant: Variant::Sncn,
            ordering: default_ordering(),
            scenario: Scenario::Equal,
            trials: 1,
            base_seed: 1,
            batch_size: 10,
            cbwt_task: 1,
            output_dir: PathBuf::from("results"),
            splits: Vec::new(),
            limits: SplitLimits::default(),
            data: DataPaths::default(),
            network: NetworkConfig::default(),
            hyperparams: Hyperparams::default(),
            mlp: MlpSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(reason) => Error::Parse {
                kind: "config",
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    /// Applies the data-root environment override and validates.
    pub fn resolved(mut self) -> Result<Self> {
        if let Some(root) = std::env::var_os(DATA_DIR_ENV) {
            let synthetic = self.data.synthetic;
            self.data = DataPaths {
                synthetic,
                ..DataPaths::under(Path::new(&root))
            };
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.network.hidden.is_empty() {
            return Err(Error::Config("at least one hidden layer is required".into()));
        }
        let seq = make_sequence(&self.ordering, self.scenario, &self.splits)?;
        if self.cbwt_task == 0 || self.cbwt_task > seq.len() {
            return Err(Error::Config(format!(
                "cbwt_task must be in 1..={}, got {}",
                seq.len(),
                self.cbwt_task
            )));
        }
        if let Some(layers) = self.variant.layer_specs(&self.network) {
            for l in &layers {
                l.validate()?;
            }
            self.hyperparams.validate()?;
        } else {
            self.mlp_config().validate()?;
        }
        self.gold_config().validate()
    }

    /// MLP settings of the backprop variants.
    pub fn mlp_config(&self) -> MlpConfig {
        MlpConfig {
            hidden: self.network.hidden.clone(),
            dropout: if self.variant == Variant::BackpropDo {
                self.mlp.dropout
            } else {
                0.0
            },
            lambda: self.mlp.lambda,
        }
    }

    /// The gold classifier is the plain backprop MLP.
    pub fn gold_config(&self) -> MlpConfig {
        MlpConfig {
            hidden: self.network.hidden.clone(),
            dropout: 0.0,
            lambda: self.mlp.lambda,
        }
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }
}

/// Loads every dataset the ordering needs and builds the task splits.
pub fn load_tasks(config: &ExperimentConfig) -> Result<Vec<TaskData>> {
    let seq = make_sequence(&config.ordering, config.scenario, &config.splits)?;
    let mut sources: HashMap<SourceDataset, DataSource> = HashMap::new();
    let mut tasks = Vec::with_capacity(seq.len());
    for def in seq.tasks {
        if let Entry::Vacant(slot) = sources.entry(def.source) {
            slot.insert(config.data.load(def.source)?);
        }
        tasks.push(build_split(&sources[&def.source], def, config.limits)?);
    }
    Ok(tasks)
}

/// Independent sub-seed for one purpose (`stream`) and index.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream ids for [`derive_seed`]: mini-batch order per task, registration
/// draws of the look-ahead clone, and the gold classifiers.
pub const STREAM_BATCHES: u64 = 1;
pub const STREAM_LOOKAHEAD: u64 = 2;
pub const STREAM_GOLD: u64 = 3;

/// Progress notifications emitted while an experiment runs.
#[derive(Debug, Clone, PartialEq)]
pub enum Progress {
    TaskTrained {
        trial: usize,
        task: usize,
        seconds: f64,
        row: Vec<f64>,
    },
    TrialDone {
        trial: usize,
        metrics: TrialMetrics,
    },
}

/// What one pass through the stream produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutcome<M> {
    pub model: M,
    pub r: TaskMatrix,
    /// Training seconds per task.
    pub wall_clock: Vec<f64>,
    /// Per task, the batch objective after every mini-batch.
    pub trace: Vec<Vec<f64>>,
}

/// Streams `model` through `tasks`: register, single pass, then fill row `i`
/// of R. Entries for tasks not yet seen are measured on a copy of the model
/// with those tasks provisionally registered; the trained model never sees
/// them early.
pub fn run_stream<M: ContinualModel>(
    mut model: M,
    tasks: &[TaskData],
    batch_size: usize,
    seed: u64,
    mut on_task: impl FnMut(usize, f64, &[f64]),
) -> Result<StreamOutcome<M>> {
    let n = tasks.len();
    let mut rng = SeededRng::seed_from_u64(seed);
    let mut r = ndarray::Array2::zeros((n, n));
    let mut wall_clock = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(n);
    for (i, task) in tasks.iter().enumerate() {
        let wrap = |e: Error| Error::Trial {
            trial: 0,
            task: i,
            source: Box::new(e),
        };
        let start = Instant::now();
        model
            .register_task(i, task.def.output_slots(), &mut rng)
            .map_err(wrap)?;
        let mut objective = Vec::new();
        for batch in minibatches(&task.train, batch_size, derive_seed(seed, STREAM_BATCHES, i as u64)) {
            let value = model
                .train_batch(i, batch.features.view(), &batch.labels, &mut rng)
                .map_err(wrap)?;
            objective.push(value);
        }
        wall_clock.push(start.elapsed().as_secs_f64());
        trace.push(objective);

        for (j, seen) in tasks.iter().enumerate().take(i + 1) {
            r[[i, j]] = evaluate_model(&model, j, &seen.test).map_err(wrap)?;
        }
        if i + 1 < n {
            let mut ahead = model.clone();
            let mut ahead_rng = SeededRng::seed_from_u64(derive_seed(seed, STREAM_LOOKAHEAD, i as u64));
            for (j, later) in tasks.iter().enumerate().skip(i + 1) {
                ahead
                    .register_task(j, later.def.output_slots(), &mut ahead_rng)
                    .map_err(wrap)?;
                r[[i, j]] = evaluate_model(&ahead, j, &later.test).map_err(wrap)?;
            }
        }
        on_task(i, wall_clock[i], r.row(i).as_slice().expect("standard layout"));
    }
    Ok(StreamOutcome {
        model,
        r: TaskMatrix::new(r)?,
        wall_clock,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub r: TaskMatrix,
    pub gold: GoldDiagonal,
    pub metrics: TrialMetrics,
    pub wall_clock: Vec<f64>,
    pub trace: Vec<Vec<f64>>,
    /// Final parameters of the streamed model.
    pub snapshot: Snapshot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

fn check_tasks(tasks: &[TaskData]) -> Result<usize> {
    let first = tasks
        .first()
        .ok_or_else(|| Error::Config("the task stream is empty".into()))?;
    let dim = first.train.features.ncols();
    for t in tasks {
        if t.train.features.ncols() != dim || t.test.features.ncols() != dim {
            return Err(Error::dim(
                format!("feature width of task {}", t.def.name),
                dim,
                t.train.features.ncols(),
            ));
        }
    }
    Ok(dim)
}

/// One seeded trial: a fresh model through the stream plus the gold
/// diagonal.
pub fn run_trial(
    config: &ExperimentConfig,
    tasks: &[TaskData],
    trial: usize,
    progress: &mut dyn FnMut(&Progress),
) -> Result<TrialRecord> {
    let dim = check_tasks(tasks)?;
    let seed = config.trial_seed(trial);
    let with_trial = |e: Error| match e {
        Error::Trial { task, source, .. } => Error::Trial { trial, task, source },
        other => Error::Trial {
            trial,
            task: 0,
            source: Box::new(other),
        },
    };
    let mut init_rng = SeededRng::seed_from_u64(seed);
    let mut on_task = |task: usize, seconds: f64, row: &[f64]| {
        progress(&Progress::TaskTrained {
            trial,
            task,
            seconds,
            row: row.to_vec(),
        })
    };
    let (r, wall_clock, trace, snapshot) = match config.variant.layer_specs(&config.network) {
        Some(layers) => {
            let model = Sncn::new(dim, layers, config.hyperparams, &mut init_rng).map_err(with_trial)?;
            let out = run_stream(model, tasks, config.batch_size, seed, &mut on_task).map_err(with_trial)?;
            let snap = Snapshot::from_sncn(out.model.params(), out.model.task_classes());
            (out.r, out.wall_clock, out.trace, snap)
        }
        None => {
            let model = Mlp::new(dim, config.mlp_config(), &mut init_rng).map_err(with_trial)?;
            let out = run_stream(model, tasks, config.batch_size, seed, &mut on_task).map_err(with_trial)?;
            let snap = Snapshot::from_mlp(out.model.params(), out.model.features(), out.model.task_classes());
            (out.r, out.wall_clock, out.trace, snap)
        }
    };
    let gold_cfg = config.gold_config();
    let gold = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            train_gold(t, &gold_cfg, config.batch_size, derive_seed(seed, STREAM_GOLD, i as u64)).map_err(|e| {
                Error::Trial {
                    trial,
                    task: i,
                    source: Box::new(e),
                }
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let gold = GoldDiagonal::new(gold)?;
    let metrics = TrialMetrics::compute(&r, &gold, config.cbwt_task)?;
    progress(&Progress::TrialDone { trial, metrics });
    Ok(TrialRecord {
        trial,
        seed,
        r,
        gold,
        metrics,
        wall_clock,
        trace,
        snapshot,
    })
}

/// Runs every trial of an already loaded stream.
pub fn run_on_tasks(
    config: &ExperimentConfig,
    tasks: &[TaskData],
    progress: &mut dyn FnMut(&Progress),
) -> Result<ExperimentResult> {
    config.validate()?;
    let records = (0..config.trials)
        .map(|t| run_trial(config, tasks, t, progress))
        .collect::<Result<Vec<_>>>()?;
    let rs: Vec<TaskMatrix> = records.iter().map(|r| r.r.clone()).collect();
    let gs: Vec<GoldDiagonal> = records.iter().map(|r| r.gold.clone()).collect();
    let summary = aggregate(&rs, &gs, config.cbwt_task)?;
    Ok(ExperimentResult {
        config: config.clone(),
        records,
        summary,
    })
}

/// Resolves the config, loads its data and runs all trials.
pub fn run_experiment(config: ExperimentConfig, progress: &mut dyn FnMut(&Progress)) -> Result<ExperimentResult> {
    let config = config.resolved()?;
    let tasks = load_tasks(&config)?;
    run_on_tasks(&config, &tasks, progress)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            kind: "csv",
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

fn matrix_header(tasks: usize) -> Vec<String> {
    std::iter::once("stage".to_string())
        .chain((1..=tasks).map(|t| format!("task{t}")))
        .collect()
}

/// Writes a task matrix as `stage,task1..taskT` with 1-based stage numbers.
pub fn write_task_matrix(path: &Path, r: &TaskMatrix) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(matrix_header(r.tasks())).map_err(|e| csv_err(path, e))?;
    for (i, row) in r.matrix().rows().into_iter().enumerate() {
        let rec = std::iter::once((i + 1).to_string()).chain(row.iter().map(|v| format!("{v:.6}")));
        w.write_record(rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a gold diagonal with the task-matrix header and a single `gold` row.
pub fn write_gold(path: &Path, gold: &GoldDiagonal) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(matrix_header(gold.len())).map_err(|e| csv_err(path, e))?;
    let rec = std::iter::once("gold".to_string()).chain(gold.0.iter().map(|v| format!("{v:.6}")));
    w.write_record(rec).map_err(|e| csv_err(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rd.headers().map_err(|e| csv_err(path, e))?.clone();
    let bad = |reason: String| Error::Parse {
        kind: "csv",
        path: path.to_path_buf(),
        reason,
    };
    if header.get(0) != Some("stage") {
        return Err(bad("first column must be `stage`".into()));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let values = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("bad number {v:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    Ok(rows)
}

pub fn read_task_matrix(path: &Path) -> Result<TaskMatrix> {
    let rows = read_rows(path)?;
    TaskMatrix::from_rows(&rows)
}

pub fn read_gold(path: &Path) -> Result<GoldDiagonal> {
    let mut rows = read_rows(path)?;
    if rows.len() != 1 {
        return Err(Error::Parse {
            kind: "csv",
            path: path.to_path_buf(),
            reason: format!("expected one gold row, found {}", rows.len()),
        });
    }
    GoldDiagonal::new(rows.remove(0))
}

fn fmt_metric(m: Option<crate::metrics::MeanStd>) -> (String, String) {
    match m {
        Some(m) => (format!("{:.6}", m.mean), format!("{:.6}", m.std)),
        None => ("NA".into(), "NA".into()),
    }
}

/// Human-readable summary lines, e.g. `ACC      0.412000 ± 0.020000`.
pub fn summary_lines(summary: &Summary) -> Vec<String> {
    let entries = [
        ("ACC".to_string(), Some(summary.acc)),
        ("BWT".to_string(), summary.bwt),
        ("TBWT".to_string(), summary.tbwt),
        (format!("CBWT({})", summary.cbwt_task), summary.cbwt),
    ];
    entries
        .into_iter()
        .map(|(name, m)| {
            let (mean, std) = fmt_metric(m);
            format!("{name:<8} {mean} ± {std}")
        })
        .collect()
}

/// Writes per-trial R, gold, trace and timing files, the metric summary, the
/// resolved config, and a parameter snapshot per trial.
pub fn write_results(result: &ExperimentResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for rec in &result.records {
        let k = rec.trial;
        write_task_matrix(&dir.join(format!("trial{k}_rmatrix.csv")), &rec.r)?;
        write_gold(&dir.join(format!("trial{k}_gold.csv")), &rec.gold)?;

        let path = dir.join(format!("trial{k}_trace.csv"));
        let mut w = csv_writer(&path)?;
        w.write_record(["task", "batch", "objective"]).map_err(|e| csv_err(&path, e))?;
        for (t, values) in rec.trace.iter().enumerate() {
            for (b, v) in values.iter().enumerate() {
                w.write_record([(t + 1).to_string(), b.to_string(), format!("{v:.6}")])
                    .map_err(|e| csv_err(&path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join(format!("trial{k}_timing.csv"));
        let mut w = csv_writer(&path)?;
        w.write_record(["task", "seconds"]).map_err(|e| csv_err(&path, e))?;
        for (t, s) in rec.wall_clock.iter().enumerate() {
            w.write_record([(t + 1).to_string(), format!("{s:.3}")])
                .map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        rec.snapshot.write(&dir.join(format!("trial{k}_model.bin")))?;
    }

    let path = dir.join("summary.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["metric", "mean", "std", "trials"]).map_err(|e| csv_err(&path, e))?;
    let s = &result.summary;
    let rows = [
        ("ACC".to_string(), Some(s.acc)),
        ("BWT".to_string(), s.bwt),
        ("TBWT".to_string(), s.tbwt),
        (format!("CBWT({})", s.cbwt_task), s.cbwt),
    ];
    for (name, m) in rows {
        let (mean, std) = fmt_metric(m);
        w.write_record([name, mean, std, s.trials.to_string()])
            .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("summary.txt");
    let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    writeln!(f, "variant {}  trials {}", result.config.variant.name(), s.trials).map_err(|e| Error::io(&path, e))?;
    for line in summary_lines(s) {
        writeln!(f, "{line}").map_err(|e| Error::io(&path, e))?;
    }

    let path = dir.join("config.toml");
    std::fs::write(&path, result.config.to_toml()?).map_err(|e| Error::io(&path, e))
}
