//! `sepscan`: separability screening and block discovery for black-box functions.

mod commands;
mod config;
mod report;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use sepscan_core::search::DEFAULT_MAX_CANDIDATES;
use sepscan_core::{Partition, VariableSubset};

use commands::Outcome;
use config::CommonArgs;
use report::{Report, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(name = "sepscan", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test separability with respect to every single variable at once
    Screen {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Estimate the separability index for a given partition
    Index {
        #[command(flatten)]
        common: CommonArgs,
        /// Partition such as "{1}|{2,4}|{3,5}"
        #[arg(long)]
        partition: String,
    },
    /// Estimate lower and upper Sobol' indices of subsets
    Sobol {
        #[command(flatten)]
        common: CommonArgs,
        /// Subset such as "{2,4}" (repeatable)
        #[arg(long = "subset", required = true)]
        subsets: Vec<String>,
    },
    /// Discover the blocks the function is separable with respect to
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Prior partition to re-check and refine
        #[arg(long)]
        partition: Option<String>,
        #[arg(long = "budget-candidates", default_value_t = DEFAULT_MAX_CANDIDATES)]
        budget_candidates: usize,
    },
    /// Exact quantities by tensor quadrature (s <= 6)
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        /// Partition for the exact index and residual check (default: singletons)
        #[arg(long)]
        partition: Option<String>,
        #[arg(long = "subset")]
        subsets: Vec<String>,
        /// Gauss-Legendre nodes per axis
        #[arg(long)]
        nodes: Option<usize>,
    },
}

fn parse_subsets(texts: &[String], dim: usize) -> Result<Vec<VariableSubset>> {
    texts
        .iter()
        .map(|t| {
            let u: VariableSubset = t.parse()?;
            u.check_within(dim)?;
            Ok(u)
        })
        .collect()
}

fn run(command: Command) -> Result<u8> {
    let started = Instant::now();
    let common = match &command {
        Command::Screen { common }
        | Command::Index { common, .. }
        | Command::Sobol { common, .. }
        | Command::Analyze { common, .. }
        | Command::Oracle { common, .. } => common.clone(),
    };
    let name = match &command {
        Command::Screen { .. } => "screen",
        Command::Index { .. } => "index",
        Command::Sobol { .. } => "sobol",
        Command::Analyze { .. } => "analyze",
        Command::Oracle { .. } => "oracle",
    };
    let (f, mut config) = common.resolve(name)?;
    let dim = config.dim;

    let mut execute = || -> Result<Outcome> {
        match &command {
            Command::Screen { .. } => commands::run_screen(&f, &config),
            Command::Index { partition, .. } => {
                let p = Partition::parse(partition, dim).context("invalid --partition")?;
                config.partition = Some(p.to_string());
                commands::run_index(&f, &config, &p)
            }
            Command::Sobol { subsets, .. } => {
                let us = parse_subsets(subsets, dim)?;
                config.subsets = us.iter().map(|u| u.to_string()).collect();
                commands::run_sobol(&f, &config, &us)
            }
            Command::Analyze {
                partition,
                budget_candidates,
                ..
            } => {
                let prior = partition
                    .as_deref()
                    .map(|p| Partition::parse(p, dim).context("invalid --partition"))
                    .transpose()?;
                config.partition = prior.as_ref().map(|p| p.to_string());
                config.budget_candidates = Some(*budget_candidates);
                commands::run_analyze(&f, &config, prior.as_ref(), *budget_candidates)
            }
            Command::Oracle {
                partition,
                subsets,
                nodes,
                ..
            } => {
                let p = partition
                    .as_deref()
                    .map(|p| Partition::parse(p, dim).context("invalid --partition"))
                    .transpose()?;
                let us = parse_subsets(subsets, dim)?;
                let nodes = nodes.unwrap_or_else(|| commands::default_nodes(dim));
                config.partition = p.as_ref().map(|p| p.to_string());
                config.subsets = us.iter().map(|u| u.to_string()).collect();
                config.nodes = Some(nodes);
                commands::run_oracle(&f, &config, p.as_ref(), &us, nodes)
            }
        }
    };
    let outcome = match common.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .context("cannot build thread pool")?
            .install(execute)?,
        None => execute()?,
    };

    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool: "sepscan",
        version: env!("CARGO_PKG_VERSION"),
        config: &config,
        payload: &outcome.payload,
        eval_count: f.evaluations(),
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    let rendered = report.render(common.format);
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(rendered.as_bytes())?;
    stdout.flush()?;
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
