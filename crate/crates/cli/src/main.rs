use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use pams_core::harness::{self, ExperimentConfig};
use pams_core::inner_solver::{self, InnerProblem};
use pams_core::model::{sample_topology, ActivationPattern};
use pams_core::oracle::{self, GridSpec};
use pams_core::schemes::{
    self, Access, ActivationLevel, ActivationSet, Evaluator, OuterSearch, SchemeConfig,
};

/// Joint antenna activation and resource allocation for pinching-antenna
/// wireless-powered edge computing.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and dump every scheme's full solution as JSON.
    Solve(Common),
    /// Run the configured sweep and write the result and figure CSVs.
    Sweep(Common),
    /// Optimise all six configurations and check their ordering.
    Compare(Common),
    /// Cross-check the solvers against the brute-force oracles.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replications: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(r) = self.replications {
            config.replications = r;
        }
        if let Some(out) = &self.out {
            config.output = Some(out.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

fn out_dir(config: &ExperimentConfig) -> PathBuf {
    config
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn init_threads() -> Result<()> {
    if let Ok(value) = std::env::var("PAMS_THREADS") {
        let threads: usize = value
            .parse()
            .with_context(|| format!("PAMS_THREADS must be a thread count, got `{value}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    init_threads()?;
    match cli.command {
        Command::Solve(c) => solve(&c.load()?),
        Command::Sweep(c) => sweep(&c.load()?),
        Command::Compare(c) => compare(&c.load()?),
        Command::Validate(c) => validate(&c.load()?),
    }
}

fn solve(config: &ExperimentConfig) -> Result<()> {
    let report = harness::solve(config)?;
    let json = serde_json::to_string_pretty(&report)?;
    if config.output.is_some() {
        let dir = out_dir(config);
        std::fs::create_dir_all(&dir)?;
        let path = dir.join("solution.json");
        std::fs::write(&path, json + "\n")?;
        for s in &report.solutions {
            println!("{:>20} {:.6e} bits", s.scheme, s.objective_bits);
        }
        println!("wrote {}", path.display());
    } else {
        println!("{json}");
    }
    Ok(())
}

fn sweep(config: &ExperimentConfig) -> Result<()> {
    let output = harness::run(config)?;
    let dir = out_dir(config);
    let summary = harness::report(&output, &dir)?;
    print!("{summary}");
    println!("wrote {}", dir.display());
    Ok(())
}

fn compare(config: &ExperimentConfig) -> Result<()> {
    let reports = harness::compare(config)?;
    let dir = out_dir(config);
    std::fs::create_dir_all(&dir)?;
    harness::write_compare(&reports, &dir.join("compare.csv"))?;
    let mut violations = 0;
    for (seed, report) in &reports {
        for row in &report.rows {
            println!(
                "seed {seed:>4} {:>12} {:.9e}",
                row.config, row.objective_bits
            );
        }
        for v in &report.violations {
            println!("seed {seed:>4} VIOLATION {v}");
        }
        violations += report.violations.len();
    }
    if violations > 0 {
        bail!("{violations} ordering violation(s)");
    }
    println!("ordering holds on {} topologies", reports.len());
    Ok(())
}

struct Check {
    name: &'static str,
    failures: usize,
    total: usize,
}

impl Check {
    fn print(&self) {
        let status = if self.failures == 0 { "PASS" } else { "FAIL" };
        println!(
            "{status} {} ({}/{} ok)",
            self.name,
            self.total - self.failures,
            self.total
        );
    }
}

/// Oracle suites on small instances drawn from the config's seeds: the
/// inner solver against a grid search, and the outer search against
/// enumeration at min(N, 8) antennas.
fn validate(config: &ExperimentConfig) -> Result<()> {
    let params = config.params.resolve()?;
    let seeds = config.replication_seeds();
    let grid = GridSpec::new(200, 200, 200)?;
    let mut checks = Vec::new();

    let mut inner = Check {
        name: "inner solver vs grid oracle",
        failures: 0,
        total: 0,
    };
    for &seed in &seeds {
        let devices = config.devices.min(2);
        let topology = sample_topology(&params, 1, devices, &mut harness::stream(seed, 0))?;
        let evaluator = Evaluator::new(&topology, &params)?;
        let problem: InnerProblem =
            evaluator.problem(&ActivationSet::shared(ActivationPattern::ones(1)))?;
        let solved = inner_solver::solve(&problem)?.objective_bits;
        let best = oracle::brute_force_inner(&problem, &grid).objective_bits;
        inner.total += 1;
        if solved < best * (1.0 - 1e-12) || solved > best * 1.005 {
            inner.failures += 1;
            println!("seed {seed}: solver {solved:.9e}, oracle {best:.9e}");
        }
    }
    checks.push(inner);

    let antennas = config.antennas.min(8);
    let mut outer = Check {
        name: "outer search vs enumeration",
        failures: 0,
        total: 0,
    };
    let pd = SchemeConfig::new(Access::Tdma, ActivationLevel::PartialDynamic);
    let search = match config.search() {
        OuterSearch::Exhaustive => OuterSearch::CrossEntropy(config.ce.clone()),
        ce => ce,
    };
    for &seed in &seeds {
        let topology = sample_topology(
            &params,
            antennas,
            config.devices,
            &mut harness::stream(seed, 0),
        )?;
        let evaluator = Evaluator::new(&topology, &params)?;
        let (_, exact) = oracle::exhaustive_outer_with(&evaluator, pd)?;
        let found =
            schemes::optimize_config(&evaluator, pd, &search, &mut harness::search_rng(seed))?
                .solution
                .objective_bits;
        outer.total += 1;
        if found < exact * (1.0 - 5e-3) {
            outer.failures += 1;
            println!("seed {seed}: search {found:.9e}, optimum {exact:.9e}");
        }
    }
    checks.push(outer);

    let mut chain = Check {
        name: "configuration ordering (exhaustive)",
        failures: 0,
        total: 0,
    };
    for &seed in &seeds {
        let topology = sample_topology(
            &params,
            antennas.min(6),
            config.devices.min(2),
            &mut harness::stream(seed, 0),
        )?;
        let report = schemes::theorem_chain(&topology, &params, &OuterSearch::Exhaustive)?;
        chain.total += 1;
        if !report.violations.is_empty() {
            chain.failures += 1;
            println!("seed {seed}: {:?}", report.violations);
        }
    }
    checks.push(chain);

    for c in &checks {
        c.print();
    }
    let failed = checks.iter().filter(|c| c.failures > 0).count();
    if failed > 0 {
        bail!("{failed} validation suite(s) failed");
    }
    Ok(())
}
