//! Benchmark suites reproducing the experiment tables.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use crate::equilibrium::smuggler_equilibrium;
use crate::error::{PatrolError, Result};
use crate::evaluation::{myopic_baseline, wcer};
use crate::export::{patroller_csv, smuggler_csv, values_csv, write_atomic, Table};
use crate::game::GameInstance;
use crate::presets::{example1, example2, example3};
use crate::shapley::{value_iterate, InnerSolver, SolveReport, DEFAULT_DELTA, DEFAULT_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Example1,
    Example2,
    Example3,
    Table5,
}

impl FromStr for Suite {
    type Err = PatrolError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(Suite::Example1),
            "example2" => Ok(Suite::Example2),
            "example3" => Ok(Suite::Example3),
            "table5" => Ok(Suite::Table5),
            other => Err(PatrolError::Misuse(format!(
                "unknown suite {other:?}, expected example1, example2, example3 or table5"
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Example1 => "example1",
            Suite::Example2 => "example2",
            Suite::Example3 => "example3",
            Suite::Table5 => "table5",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub epsilon: f64,
    /// Grid spacing for Example 1 and Example 3.
    pub delta: f64,
    /// Grid spacing for Example 2 in the baseline comparison.
    pub fine_delta: f64,
    pub sizes: Vec<usize>,
    pub deltas: Vec<f64>,
    /// Each timing is the fastest of this many solves.
    pub timing_reps: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            epsilon: DEFAULT_EPSILON,
            delta: DEFAULT_DELTA,
            fine_delta: 0.04,
            sizes: vec![6, 9, 12, 15],
            deltas: vec![1.0, 0.2, 0.1, 0.04],
            timing_reps: 3,
        }
    }
}

/// Named outputs of a suite; file names are relative to the output directory.
#[derive(Debug, Clone, Default)]
pub struct BenchOutput {
    pub tables: Vec<(String, Table)>,
    pub files: Vec<(String, String)>,
}

impl BenchOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, table) in &self.tables {
            let path = dir.join(name);
            table.write_csv(&path)?;
            written.push(path);
        }
        for (name, text) in &self.files {
            let path = dir.join(name);
            write_atomic(&path, text.as_bytes())?;
            written.push(path);
        }
        Ok(written)
    }
}

fn timed_solve(
    inst: &GameInstance,
    epsilon: f64,
    inner: InnerSolver,
    reps: usize,
) -> Result<(SolveReport, Duration)> {
    let mut report = value_iterate(inst, epsilon, inner)?;
    let mut best = report.elapsed;
    for _ in 1..reps.max(1) {
        report = value_iterate(inst, epsilon, inner)?;
        best = best.min(report.elapsed);
    }
    Ok((report, best))
}

fn size_header(first: &str, sizes: &[usize]) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain(sizes.iter().map(|n| format!("n_{n}")))
        .collect()
}

fn delta_header(deltas: &[f64]) -> Vec<String> {
    std::iter::once("n".to_string())
        .chain(deltas.iter().map(|d| format!("delta_{d}")))
        .collect()
}

/// Solve times in seconds on Example 1: one row per inner method, one
/// column per size.
pub fn example1_timings(opts: &BenchOptions) -> Result<Table> {
    let mut table = Table::new(size_header("algorithm", &opts.sizes));
    let methods: [(&str, fn(usize, f64) -> Result<InnerSolver>); 3] = [
        ("scaled-greedy", InnerSolver::scaled),
        ("lazy-greedy", InnerSolver::lazy),
        ("concave-greedy", |_, _| Ok(InnerSolver::ConcaveGreedy)),
    ];
    for (name, make) in methods {
        let mut row = Vec::new();
        for &n in &opts.sizes {
            let inst = example1(n)?;
            let (_, time) =
                timed_solve(&inst, opts.epsilon, make(n, opts.delta)?, opts.timing_reps)?;
            row.push(time.as_secs_f64());
        }
        table.push(name, row);
    }
    Ok(table)
}

/// Example 2 worst-case rewards and solve times over sizes and grid spacings.
pub fn example2_tables(opts: &BenchOptions) -> Result<BenchOutput> {
    let mut values = Table::new(delta_header(&opts.deltas));
    let mut scaled_time = Table::new(delta_header(&opts.deltas));
    let mut lazy_time = Table::new(delta_header(&opts.deltas));
    for &n in &opts.sizes {
        let inst = example2(n)?;
        let (mut v_row, mut s_row, mut l_row) = (Vec::new(), Vec::new(), Vec::new());
        for &delta in &opts.deltas {
            let (report, time) = timed_solve(
                &inst,
                opts.epsilon,
                InnerSolver::scaled(n, delta)?,
                opts.timing_reps,
            )?;
            v_row.push(wcer(&inst, &report.pi)?.mean_value);
            s_row.push(time.as_secs_f64());
            let (_, time) = timed_solve(
                &inst,
                opts.epsilon,
                InnerSolver::lazy(n, delta)?,
                opts.timing_reps,
            )?;
            l_row.push(time.as_secs_f64());
        }
        values.push(n.to_string(), v_row);
        scaled_time.push(n.to_string(), s_row);
        lazy_time.push(n.to_string(), l_row);
    }
    Ok(BenchOutput {
        tables: vec![
            ("example2_wcer.csv".into(), values),
            ("example2_time_scaled.csv".into(), scaled_time),
            ("example2_time_lazy.csv".into(), lazy_time),
        ],
        files: Vec::new(),
    })
}

/// Equilibrium strategies, values and worst-case reward of Example 3.
pub fn example3_report(opts: &BenchOptions) -> Result<BenchOutput> {
    let inst = example3()?;
    let report = value_iterate(
        &inst,
        opts.epsilon,
        InnerSolver::for_instance(&inst, opts.delta)?,
    )?;
    let xi = smuggler_equilibrium(&inst, &report.pi, &report.values)?;
    let mut summary = Table::new(vec!["quantity".into(), "value".into()]);
    summary.push("wcer", vec![wcer(&inst, &report.pi)?.mean_value]);
    summary.push("mean_state_value", vec![report.mean_value()]);
    summary.push("iterations", vec![report.iterations as f64]);
    Ok(BenchOutput {
        tables: vec![("example3_summary.csv".into(), summary)],
        files: vec![
            ("example3_patroller.csv".into(), patroller_csv(&report.pi)?),
            ("example3_smuggler.csv".into(), smuggler_csv(&xi)?),
            ("example3_values.csv".into(), values_csv(&report.values.0)?),
        ],
    })
}

pub const TABLE5_ROWS: [&str; 3] = [
    "normal-form-without-movement",
    "normal-form-with-movement",
    "stochastic-game",
];

/// Worst-case expected reward of the two myopic baselines and the
/// equilibrium strategy on the six-location examples.
pub fn table5(opts: &BenchOptions) -> Result<Table> {
    let instances = [
        (example1(6)?, opts.delta),
        (example2(6)?, opts.fine_delta),
        (example3()?, opts.delta),
    ];
    let mut columns = Vec::new();
    for (inst, delta) in &instances {
        let blind = wcer(inst, &myopic_baseline(inst, false, *delta)?)?.mean_value;
        let aware = wcer(inst, &myopic_baseline(inst, true, *delta)?)?.mean_value;
        let report = value_iterate(inst, opts.epsilon, InnerSolver::for_instance(inst, *delta)?)?;
        let stochastic = wcer(inst, &report.pi)?.mean_value;
        columns.push([blind, aware, stochastic]);
    }
    let mut table = Table::new(vec![
        "model".into(),
        "example_1".into(),
        "example_2".into(),
        "example_3".into(),
    ]);
    for (i, label) in TABLE5_ROWS.iter().enumerate() {
        table.push(*label, columns.iter().map(|c| c[i]).collect());
    }
    Ok(table)
}

pub fn run_bench(suite: Suite, opts: &BenchOptions) -> Result<BenchOutput> {
    match suite {
        Suite::Example1 => Ok(BenchOutput {
            tables: vec![("example1_time.csv".into(), example1_timings(opts)?)],
            files: Vec::new(),
        }),
        Suite::Example2 => example2_tables(opts),
        Suite::Example3 => example3_report(opts),
        Suite::Table5 => Ok(BenchOutput {
            tables: vec![("table5.csv".into(), table5(opts)?)],
            files: Vec::new(),
        }),
    }
}
