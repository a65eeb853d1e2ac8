//! Experiment CLI: builds a benchmark problem, runs smoother-only, V-cycle,
//! two-grid or direct studies over a list of Robin parameters, and writes
//! machine-readable residual logs plus a summary table.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dualmg::runner::{self, ProblemKind, RunConfig, RunMode};

#[derive(Parser, Debug)]
#[command(
    name = "dualmg",
    about = "Patch-smoothed multigrid experiments for stress-first plane elasticity",
    after_help = "Config file: flat `key = value` lines with the same keys as the flags\n\
                  (problem, mode, refine, alpha, smoother, pre, post, sweeps, tol,\n\
                  max_cycles, seed, init, out). Flags override the file.\n\
                  DUALMG_THREADS caps parallelism across the alpha sweep (default 1)."
)]
struct Cli {
    /// Flat key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Problem: cook | face | dual_poisson | manufactured.
    #[arg(long)]
    problem: Option<String>,

    /// Mode: smooth_only | vcycle | two_grid | direct.
    #[arg(long)]
    mode: Option<String>,

    /// Comma-separated Robin parameters to sweep.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,

    /// Number of uniform refinements above the coarse mesh.
    #[arg(long)]
    refine: Option<usize>,

    /// Relative residual tolerance.
    #[arg(long)]
    tol: Option<f64>,

    /// Output directory for CSV logs and the JSON summary.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Local smoother kind: robin | dirichlet | neumann_rbm | neumann_avg.
    #[arg(long)]
    smoother: Option<String>,

    /// Pre-smoothing sweeps per cycle.
    #[arg(long)]
    pre: Option<usize>,

    /// Post-smoothing sweeps per cycle.
    #[arg(long)]
    post: Option<usize>,

    /// Sweep count for smooth_only runs.
    #[arg(long)]
    sweeps: Option<usize>,

    /// Cycle budget for vcycle / two_grid runs.
    #[arg(long)]
    max_cycles: Option<usize>,

    /// Seed for random initial iterates.
    #[arg(long)]
    seed: Option<u64>,

    /// Initial iterate: zero | random.
    #[arg(long)]
    init: Option<String>,

    /// Print a comparison table for existing summary.json files and exit.
    #[arg(long, num_args = 1.., value_name = "SUMMARY_JSON")]
    summarize: Option<Vec<PathBuf>>,
}

fn build_config(cli: &Cli) -> dualmg::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)?;
        cfg.apply_file(&text)?;
    }
    if let Some(v) = &cli.problem {
        cfg.problem = ProblemKind::parse(v)?;
    }
    if let Some(v) = &cli.mode {
        cfg.mode = RunMode::parse(v)?;
    }
    if let Some(v) = &cli.alpha {
        cfg.alphas = v.clone();
    }
    if let Some(v) = cli.refine {
        cfg.refine = v;
    }
    if let Some(v) = cli.tol {
        cfg.tol = v;
    }
    if let Some(v) = &cli.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &cli.smoother {
        cfg.apply_pair("smoother", v)?;
    }
    if let Some(v) = cli.pre {
        cfg.pre = v;
    }
    if let Some(v) = cli.post {
        cfg.post = v;
    }
    if let Some(v) = cli.sweeps {
        cfg.sweeps = v;
    }
    if let Some(v) = cli.max_cycles {
        cfg.max_cycles = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = &cli.init {
        cfg.apply_pair("init", v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(paths) = &cli.summarize {
        let mut all = Vec::new();
        for path in paths {
            match runner::load_summaries(path) {
                Ok(mut s) => all.append(&mut s),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
        }
        print!("{}", runner::summarize(&all));
        return ExitCode::SUCCESS;
    }

    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    match runner::run(&cfg) {
        Ok(summaries) => {
            // Non-convergence is a reported result, not a failure.
            print!("{}", runner::summarize(&summaries));
            println!("logs written to {}", cfg.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
