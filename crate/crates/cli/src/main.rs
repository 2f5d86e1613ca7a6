use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use sncn::harness::{
    read_gold, read_task_matrix, run_experiment, summary_lines, write_results, Progress, DATA_DIR_ENV,
};
use sncn::metrics::TrialMetrics;
use sncn::snapshot::SnapshotKind;
use sncn::{ExperimentConfig, Snapshot, Variant};

#[derive(Parser)]
#[command(name = "sncn", version, about = "Continual-learning experiments with sequential neural coding networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the model variant (sncn, sncn-relu, lat1-sncn, lat2-sncn, backprop, backprop-do).
        #[arg(long)]
        variant: Option<String>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Data root holding `mnist/` and `fashion-mnist/`.
        #[arg(long, env = DATA_DIR_ENV)]
        data_dir: Option<PathBuf>,
    },
    /// Recompute metrics from a task-matrix CSV and a gold CSV.
    Metrics {
        #[arg(long)]
        rmatrix: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// 1-based task for CBWT.
        #[arg(long, default_value_t = 1)]
        cbwt_task: usize,
    },
    /// Print the header and per-matrix shapes and norms of a snapshot.
    Inspect {
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Print a complete config with every default filled in.
    Template {
        #[arg(long, default_value = "sncn")]
        variant: String,
    },
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

fn run(
    config: PathBuf,
    trials: Option<usize>,
    seed: Option<u64>,
    variant: Option<String>,
    out: Option<PathBuf>,
    data_dir: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(v) = variant {
        cfg.variant = Variant::parse(&v)?;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    if let Some(root) = data_dir {
        let synthetic = cfg.data.synthetic;
        cfg.data = sncn::harness::DataPaths {
            synthetic,
            ..sncn::harness::DataPaths::under(&root)
        };
    }
    let out_dir = cfg.output_dir.clone();
    eprintln!(
        "running {} for {} trial(s), base seed {}",
        cfg.variant.name(),
        cfg.trials,
        cfg.base_seed
    );
    let result = run_experiment(cfg, &mut |p| match p {
        Progress::TaskTrained {
            trial,
            task,
            seconds,
            row,
        } => {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
            eprintln!("trial {trial} task {} ({seconds:.1}s): [{}]", task + 1, cells.join(", "));
        }
        Progress::TrialDone { trial, metrics } => {
            eprintln!(
                "trial {trial} done: ACC {:.4} BWT {}",
                metrics.acc,
                fmt_opt(metrics.bwt)
            );
        }
    })?;
    write_results(&result, &out_dir).with_context(|| format!("writing results to {}", out_dir.display()))?;
    println!("variant {}  trials {}", result.config.variant.name(), result.summary.trials);
    for line in summary_lines(&result.summary) {
        println!("{line}");
    }
    println!("results in {}", out_dir.display());
    Ok(())
}

fn metrics(rmatrix: PathBuf, gold: PathBuf, cbwt_task: usize) -> Result<()> {
    let r = read_task_matrix(&rmatrix)?;
    let g = read_gold(&gold)?;
    if cbwt_task == 0 || cbwt_task > r.tasks() {
        bail!("--cbwt-task must be in 1..={}", r.tasks());
    }
    let m = TrialMetrics::compute(&r, &g, cbwt_task)?;
    println!("ACC      {:.6}", m.acc);
    println!("BWT      {}", fmt_opt(m.bwt));
    println!("TBWT     {}", fmt_opt(m.tbwt));
    println!("{:<8} {}", format!("CBWT({cbwt_task})"), fmt_opt(m.cbwt));
    Ok(())
}

fn inspect(path: PathBuf) -> Result<()> {
    let snap = Snapshot::read(&path)?;
    let h = &snap.header;
    let kind = match h.kind {
        SnapshotKind::Sncn => "SNCN",
        SnapshotKind::Mlp => "SMLP",
    };
    println!("format   {kind} v{}", h.version);
    println!("widths   {:?}", h.widths);
    println!("input    {}", h.input_dim);
    println!("output   {}", h.output_dim);
    println!("tasks    {} (classes {:?})", h.num_tasks(), h.task_classes);
    for (name, m) in &snap.matrices {
        let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("{name:<6} {:>4} x {:<4} |.|_F = {norm:.6}", m.nrows(), m.ncols());
    }
    Ok(())
}

fn template(variant: &str) -> Result<()> {
    let cfg = ExperimentConfig {
        variant: Variant::parse(variant)?,
        ..Default::default()
    };
    print!("{}", cfg.to_toml()?);
    Ok(())
}

/// The error chain, skipping causes whose text the outer message already
/// carries.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !msg.contains(&c) {
            msg.push_str(": ");
            msg.push_str(&c);
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            trials,
            seed,
            variant,
            out,
            data_dir,
        } => run(config, trials, seed, variant, out, data_dir),
        Command::Metrics {
            rmatrix,
            gold,
            cbwt_task,
        } => metrics(rmatrix, gold, cbwt_task),
        Command::Inspect { snapshot } => inspect(snapshot),
        Command::Template { variant } => template(&variant),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
