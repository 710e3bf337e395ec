use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use hypkit_cli::commands::{embed, gnn, gradcheck, lora, report, selftest, toy};
use hypkit_cli::config::{RunConfig, Task};
use hypkit_cli::output::init_logging;
use hypkit_cli::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "hypkit",
    version,
    about = "Hyperbolic deep learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check manifold invariants on random points.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Finite-difference gradient checks of every op and layer.
    Gradcheck {
        #[arg(long, default_value_t = gradcheck::SEEDS)]
        seeds: u64,
        #[arg(long, default_value = "runs/gradcheck")]
        out: PathBuf,
    },
    /// Graph reconstruction with free node embeddings.
    Embed(RunArgs),
    /// Graph convolution link prediction or node classification.
    Gnn(RunArgs),
    /// Small transformer on majority-token sequences or tiny images.
    TransformerToy(RunArgs),
    /// Low-rank adapters on a trained transformer-toy checkpoint.
    Lora(RunArgs),
    /// Merge the metrics files of several runs.
    Report {
        /// Directory whose subdirectories hold metrics.csv files.
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Negative number or "learnable".
    #[arg(long)]
    curvature: Option<String>,
    /// Comma-separated curvatures, e.g. "-0.5,-1,learnable".
    #[arg(long)]
    sweep_curvature: Option<String>,
}

impl RunArgs {
    fn resolve(&self, task: Task) -> Result<(RunConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(task, path)?,
            None => RunConfig::defaults(task),
        };
        let overrides = [
            ("seed", self.seed.map(|s| s.to_string())),
            ("threads", self.threads.map(|t| t.to_string())),
            ("curvature", self.curvature.clone()),
            ("sweep", self.sweep_curvature.clone()),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v).map_err(CliError::Usage)?;
            }
        }
        let out = self
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(task.name()));
        Ok((cfg, out))
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Selftest { seed } => {
            let report = selftest::run(seed, None)?;
            print!("{}", selftest::format_report(&report));
            Ok(report.passed())
        }
        Command::Gradcheck { seeds, out } => {
            let rows = gradcheck::run(seeds)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join("gradcheck.csv");
            std::fs::write(&path, gradcheck::to_csv(&rows))?;
            let failed: Vec<_> = rows.iter().filter(|r| !r.report.passed).collect();
            for r in &failed {
                println!(
                    "FAIL {} seed {}: max relative error {:.3e}",
                    r.op, r.seed, r.report.max_rel_err
                );
            }
            let worst = rows
                .iter()
                .map(|r| r.report.max_rel_err)
                .fold(0.0, f64::max);
            println!(
                "{} checks, {} failed, worst relative error {worst:.3e}; wrote {}",
                rows.len(),
                failed.len(),
                path.display()
            );
            Ok(failed.is_empty())
        }
        Command::Embed(args) => {
            let (cfg, out) = args.resolve(Task::Embed)?;
            let o = embed::run(&cfg, &out)?;
            println!(
                "mAP {:.4} distortion {:.4} stress {:.5}",
                o.map, o.distortion, o.loss
            );
            Ok(true)
        }
        Command::Gnn(args) => {
            let (cfg, out) = args.resolve(Task::Gnn)?;
            let o = gnn::run(&cfg, &out)?;
            println!("{}", o.summary());
            Ok(true)
        }
        Command::TransformerToy(args) => {
            let (cfg, out) = args.resolve(Task::TransformerToy)?;
            let o = toy::run(&cfg, &out)?;
            println!("{}", o.summary());
            Ok(o.on_manifold())
        }
        Command::Lora(args) => {
            let (cfg, out) = args.resolve(Task::Lora)?;
            let o = lora::run(&cfg, &out)?;
            println!("{}", o.summary());
            Ok(true)
        }
        Command::Report { dir, out } => {
            let out = out.unwrap_or_else(|| dir.join("report.csv"));
            let rows = report::merge(&dir, &out)?;
            println!("merged {rows} rows into {}", out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    init_logging();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
