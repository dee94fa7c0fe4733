//! Experiment runner: seeded single-hop / learner runs, the exhaustive
//! routing oracle, and the built-in validation suite.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use emh_core::channel::Scene;
use emh_core::config::{self, ExperimentConfig};
use emh_core::learner::{self, ExperimentTrace, Policy, RunOptions};
use emh_core::metrics;
use emh_core::report;
use emh_core::routing_space::{build_constrained_space, DEFAULT_ENUMERATION_LIMIT};
use emh_core::seeds;
use emh_core::simulator::{self, SimOptions};
use emh_core::validation;

#[derive(Parser)]
#[command(
    name = "emh",
    version,
    about = "LPWAN uplink-routing energy experiments: single-hop baseline vs epsilon-greedy multi-hop search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured (policy, seed) experiments and write trace and
    /// comparison CSVs.
    Run {
        /// JSON config holding the deployment and experiment settings.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the CSV artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for concurrent runs (defaults to all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Measure every feasible routing of a small deployment and print
    /// the ranked table.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Refuse spaces larger than this many routings.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_LIMIT)]
        limit: usize,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the fast invariant suite; with --config also validate the
    /// config file.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, workers } => cmd_run(&config, &out, workers),
        Command::Oracle { config, limit, out } => cmd_oracle(&config, limit, out.as_deref()),
        Command::Validate { config } => cmd_validate(config.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run_options(config: &ExperimentConfig, policy: Policy, seed: u64) -> RunOptions {
    let mut opts = RunOptions::new(policy, config.experiment.iterations, config.cycles(), seed);
    opts.payoff_update = config.experiment.payoff_update;
    opts.sim = SimOptions {
        association_cost: config.experiment.association_cost,
    };
    opts.keep_cycle_reports = config.experiment.verbose_cycles;
    opts
}

fn trace_path(out: &Path, trace: &ExperimentTrace) -> PathBuf {
    out.join(format!("trace_{}_seed{}.csv", trace.policy.as_str(), trace.seed))
}

fn cmd_run(config_path: &Path, out: &Path, workers: Option<usize>) -> Result<ExitCode> {
    let config = config::load_config(config_path)
        .with_context(|| format!("invalid config {}", config_path.display()))?;
    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;

    let mut runs = Vec::new();
    for &seed in &config.experiment.seeds {
        for &policy in &config.experiment.policies {
            runs.push(run_options(&config, policy, seed));
        }
    }

    let traces = execute_runs(&config, &runs, workers)?;

    for trace in &traces {
        report::write_atomic(&trace_path(out, trace), &report::trace_csv(trace))?;
        if config.experiment.verbose_cycles {
            let path = out.join(format!(
                "cycles_{}_seed{}.csv",
                trace.policy.as_str(),
                trace.seed
            ));
            report::write_atomic(&path, &report::cycles_csv(trace))?;
        }
    }

    // Pair the baseline with the learner per seed.
    for &seed in &config.experiment.seeds {
        let sh = traces
            .iter()
            .find(|t| t.seed == seed && t.policy == Policy::SingleHop);
        let emh = traces.iter().find(|t| t.seed == seed && t.policy == Policy::Emh);
        let (Some(sh), Some(emh)) = (sh, emh) else { continue };

        let cmp = metrics::compare(sh, emh, metrics::DEFAULT_SMOOTHING_WINDOW)?;
        let csv_name = format!("comparison_seed{seed}.csv");
        report::write_atomic(&out.join(&csv_name), &report::comparison_csv(&cmp))?;
        report::write_atomic(
            &out.join(format!("plot_seed{seed}.gp")),
            &report::plot_script(&csv_name),
        )?;
        let final_rho = *cmp.rho.last().expect("runs have at least one iteration");
        println!(
            "seed={seed} rho({})={final_rho:.4}",
            config.experiment.iterations
        );
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(feature = "parallel")]
fn execute_runs(
    config: &ExperimentConfig,
    runs: &[RunOptions],
    workers: Option<usize>,
) -> Result<Vec<ExperimentTrace>> {
    let traces = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("cannot build worker pool")?
            .install(|| learner::run_experiments(&config.deployment, runs)),
        None => learner::run_experiments(&config.deployment, runs),
    }?;
    Ok(traces)
}

#[cfg(not(feature = "parallel"))]
fn execute_runs(
    config: &ExperimentConfig,
    runs: &[RunOptions],
    _workers: Option<usize>,
) -> Result<Vec<ExperimentTrace>> {
    Ok(learner::run_experiments_seq(&config.deployment, runs)?)
}

fn cmd_oracle(config_path: &Path, limit: usize, out: Option<&Path>) -> Result<ExitCode> {
    let config = config::load_config(config_path)
        .with_context(|| format!("invalid config {}", config_path.display()))?;
    let master_seed = config.experiment.seeds[0];
    let scene = Scene::new(
        &config.deployment,
        &mut seeds::rng_for(master_seed, seeds::stream::SCENE),
    );
    let space = build_constrained_space(&scene.rssi_vector()?);
    let opts = SimOptions {
        association_cost: config.experiment.association_cost,
    };
    let ranked = simulator::rank_routings(
        &scene,
        &space,
        config.cycles(),
        &opts,
        master_seed,
        limit,
    )?;

    let mut csv = String::from("rank,routing,e_b_J,payoff,optimal\n");
    println!("rank  routing{:>24}e_b_J  optimal", "");
    for (i, row) in ranked.iter().enumerate() {
        let routing = row.routing.to_semicolon_list();
        let mark = if i == 0 { "*" } else { "" };
        println!(
            "{:>4}  {:<28}{}  {}",
            i + 1,
            routing,
            report::format_energy(row.mean_bottleneck_j),
            mark
        );
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            routing,
            report::format_energy(row.mean_bottleneck_j),
            row.payoff,
            i == 0,
        ));
    }
    if let Some(path) = out {
        report::write_atomic(path, &csv)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(config_path: Option<&Path>) -> Result<ExitCode> {
    let mut failed = false;
    for check in validation::builtin_checks() {
        match (check.run)() {
            Ok(()) => println!("ok   {}", check.name),
            Err(why) => {
                failed = true;
                println!("FAIL {}: {why}", check.name);
            }
        }
    }
    if let Some(path) = config_path {
        match config::load_config(path) {
            Ok(_) => println!("ok   config {}", path.display()),
            Err(why) => {
                failed = true;
                println!("FAIL config {}: {why}", path.display());
            }
        }
    }
    if failed {
        bail!("validation failed");
    }
    Ok(ExitCode::SUCCESS)
}
