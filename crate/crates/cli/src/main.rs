use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use patrol_core::bench::{run_bench, BenchOptions, Suite};
use patrol_core::config::{parse_config, MethodTag, SolverConfig};
use patrol_core::equilibrium::{smuggler_equilibrium, verify_epsilon_equilibrium};
use patrol_core::evaluation::{evaluate, simulate, wcer};
use patrol_core::export::{
    export_patroller, export_smuggler, read_json, values_csv, write_atomic, write_json,
    ExportFormat,
};
use patrol_core::game::{GameInstance, PatrollerStrategy};
use patrol_core::presets::Preset;
use patrol_core::shapley::{value_iterate, SolveReport};

/// Thread count for the parallel sweeps and simulations.
const THREADS_VAR: &str = "PATROL_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "patrol",
    version,
    about = "Border patrol stochastic game solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Instance configuration (JSON).
    #[arg(long, global = true, conflicts_with = "example")]
    config: Option<PathBuf>,
    /// Built-in instance used when no config is given.
    #[arg(long, global = true, default_value = "example1")]
    example: Preset,
    /// Number of locations for the built-in instance.
    #[arg(long, global = true, default_value_t = 6)]
    n: usize,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// auto, concave-greedy, scaled-greedy or lazy-greedy.
    #[arg(long, global = true)]
    method: Option<MethodTag>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "csv")]
    format: ExportFormat,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute equilibrium values and strategies and print a summary.
    Solve,
    /// Worst-case expected reward of the equilibrium or a given strategy.
    Wcer {
        /// Patroller strategy as a JSON array of rows.
        #[arg(long)]
        strategy: Option<PathBuf>,
    },
    /// Monte Carlo estimate of the equilibrium pair's value.
    Simulate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
    },
    /// Reproduce one of the experiment tables.
    Bench { suite: Suite },
    /// Write the equilibrium strategies and values to the output directory.
    Export,
}

impl Common {
    fn load(&self) -> Result<(GameInstance, SolverConfig)> {
        let (inst, mut solver) = match &self.config {
            Some(path) => {
                if !path.exists() {
                    bail!("config file {} does not exist", path.display());
                }
                let (config, inst) = parse_config(path)?;
                (inst, config.solver())
            }
            None => (self.example.instance(self.n)?, SolverConfig::default()),
        };
        if let Some(epsilon) = self.epsilon {
            solver.epsilon = epsilon;
        }
        if let Some(delta) = self.delta {
            solver.delta = delta;
        }
        if let Some(method) = self.method {
            solver.method = method;
        }
        solver.validate()?;
        Ok((inst, solver))
    }

    fn solve(&self) -> Result<(GameInstance, SolveReport)> {
        let (inst, solver) = self.load()?;
        let report = value_iterate(&inst, solver.epsilon, solver.inner(&inst)?)?;
        Ok((inst, report))
    }

    fn out_dir(&self) -> Result<&Path> {
        let dir = self
            .out
            .as_deref()
            .context("--out is required for this command")?;
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Solve => {
            let (inst, report) = common.solve()?;
            let xi = smuggler_equilibrium(&inst, &report.pi, &report.values)?;
            let check = verify_epsilon_equilibrium(&inst, &report.pi, &xi, &report.values)?;
            let worst = wcer(&inst, &report.pi)?;
            println!("method\t{}", report.method);
            println!("iterations\t{}", report.iterations);
            println!("final_gap\t{:e}", report.final_gap);
            println!("mean_value\t{:.6}", report.mean_value());
            println!("wcer\t{:.6}", worst.mean_value);
            println!("epsilon_certified\t{:e}", check.epsilon_certified);
            println!("elapsed_secs\t{:.6}", report.elapsed.as_secs_f64());
            for (s, v) in report.values.0.iter().enumerate() {
                println!("value[{}]\t{v:.6}", s + 1);
            }
        }
        Command::Wcer { strategy } => {
            let (inst, pi) = match strategy {
                Some(path) => {
                    let (inst, _) = common.load()?;
                    let pi: PatrollerStrategy = read_json(path)
                        .with_context(|| format!("reading strategy {}", path.display()))?;
                    (inst, pi)
                }
                None => {
                    let (inst, report) = common.solve()?;
                    (inst, report.pi)
                }
            };
            let result = wcer(&inst, &pi)?;
            println!("wcer\t{:.6}", result.mean_value);
            for (s, v) in result.per_state_value.iter().enumerate() {
                println!("state[{}]\t{v:.6}", s + 1);
            }
        }
        Command::Simulate {
            seed,
            horizon,
            reps,
        } => {
            let (inst, report) = common.solve()?;
            let xi = smuggler_equilibrium(&inst, &report.pi, &report.values)?;
            let exact = evaluate(&inst, &report.pi, &xi)?.mean_value;
            let est = simulate(&inst, &report.pi, &xi, *horizon, *reps, *seed)?;
            println!("mean\t{:.6}", est.mean);
            println!("std_error\t{:.6}", est.std_error);
            println!("exact\t{exact:.6}");
            println!("truncation_bound\t{:e}", est.truncation_bound);
            if let Some(dir) = &common.out {
                std::fs::create_dir_all(dir)?;
                write_json(&est, dir.join("simulation.json"))?;
            }
        }
        Command::Bench { suite } => {
            let (_, solver) = common.load()?;
            let opts = BenchOptions {
                epsilon: solver.epsilon,
                delta: solver.delta,
                ..BenchOptions::default()
            };
            let output = run_bench(*suite, &opts)?;
            for (name, table) in &output.tables {
                println!("# {name}");
                print!("{}", table.to_csv()?);
            }
            if common.out.is_some() {
                for path in output.write(common.out_dir()?)? {
                    eprintln!("wrote {}", path.display());
                }
            }
        }
        Command::Export => {
            let dir = common.out_dir()?;
            let (inst, report) = common.solve()?;
            let xi = smuggler_equilibrium(&inst, &report.pi, &report.values)?;
            let ext = common.format.to_string();
            export_patroller(
                &report.pi,
                dir.join(format!("patroller.{ext}")),
                common.format,
            )?;
            export_smuggler(&xi, dir.join(format!("smuggler.{ext}")), common.format)?;
            let values = dir.join(format!("values.{ext}"));
            match common.format {
                ExportFormat::Csv => {
                    write_atomic(&values, values_csv(&report.values.0)?.as_bytes())?
                }
                ExportFormat::Json => write_json(&report.values.0, &values)?,
            }
            for name in ["patroller", "smuggler", "values"] {
                eprintln!("wrote {}", dir.join(format!("{name}.{ext}")).display());
            }
        }
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .with_context(|| format!("{THREADS_VAR} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
