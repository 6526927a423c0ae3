use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cardtree::learning::{ClusterMode, FitOptions, MilFitOptions, MilTables};
use cardtree::matching::LbpOptions;
use cardtree::{Backend, Error};
use cardtree_cli::bench::BenchBudgets;
use cardtree_cli::commands::{self, StructureFlag, TablesFlag};
use cardtree_cli::exit_code;

/// Exact inference, sampling, benchmarking and learning for recursive
/// cardinality models.
#[derive(Parser)]
#[command(name = "cardtree", version)]
struct Cli {
    /// Worker threads for the data-parallel paths (sampling, data sweeps).
    #[arg(long, default_value_t = 1, global = true)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for anything randomized; all commands are deterministic given it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Convolution kernel: auto, fft or naive.
    #[arg(long, default_value = "auto")]
    backend: String,
    /// Output file (written atomically).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Exact per-variable marginals, count distributions and log-partition
    /// value of a model file, as CSV.
    Marginals {
        /// Model JSON file.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Exact joint samples in the dataset line format.
    Sample {
        #[arg(long)]
        model: PathBuf,
        /// Number of samples.
        #[arg(long, short = 'n')]
        num_samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Runtime sweep of the marginal algorithms over doubling problem sizes.
    Bench {
        /// Comma-separated subset of fft_tree,tree,chain.
        #[arg(long, default_value = "fft_tree,tree,chain")]
        algorithms: String,
        #[arg(long, default_value_t = 1024)]
        d_min: usize,
        #[arg(long, default_value_t = 524288)]
        d_max: usize,
        /// Timed repetitions per point (after one warm-up); median reported.
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Per-run wall-clock budget in seconds; overruns become DNF rows.
        #[arg(long, default_value_t = 300.0)]
        time_budget_secs: f64,
        /// Analytic peak-memory budget in bytes; estimates above it are DNF.
        #[arg(long, default_value_t = 3 * (1 << 30))]
        mem_budget_bytes: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Loopy-BP marginals for a bipartite matching problem, as CSV.
    Match {
        /// Problem JSON file.
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        max_iters: usize,
        #[arg(long, default_value_t = 0.5)]
        damping: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Maximum-likelihood fit of an RC model; writes the fitted model JSON.
    Fit {
        /// Dataset file (one 0/1 row per line).
        #[arg(long)]
        data: PathBuf,
        /// Tree source: balanced, adaptive or anti (clustering on the data).
        #[arg(long, default_value = "balanced")]
        structure: String,
        /// Which internal nodes carry learnable tables: none, root or all.
        #[arg(long, default_value = "none")]
        tables: String,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        /// L1 penalty on the unary weights.
        #[arg(long, default_value_t = 0.0)]
        l1: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Multiple-instance learning: fit instance weights under a bag-count
    /// model and report per-bag posteriors, as JSON.
    Mil {
        /// Bag file: "label 0|1" header lines, one feature row per instance.
        #[arg(long)]
        bags: PathBuf,
        /// Bag-count model: noisy-or or normal.
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 0.5)]
        lam: f64,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Agglomerative variable clustering; writes the tree as a table-free
    /// model JSON skeleton.
    Struct {
        #[arg(long)]
        data: PathBuf,
        /// adaptive (merge co-varying variables) or anti (worst case).
        #[arg(long, default_value = "adaptive")]
        mode: String,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> cardtree::Result<()> {
    match cli.command {
        Command::Marginals { model, common } => {
            let backend: Backend = common.backend.parse()?;
            commands::cmd_marginals(&model, backend, &common.out)
        }
        Command::Sample {
            model,
            num_samples,
            common,
        } => commands::cmd_sample(&model, num_samples, common.seed, &common.out),
        Command::Bench {
            algorithms,
            d_min,
            d_max,
            reps,
            time_budget_secs,
            mem_budget_bytes,
            common,
        } => {
            let budgets = BenchBudgets {
                time_secs: time_budget_secs,
                mem_bytes: mem_budget_bytes,
            };
            commands::cmd_bench(
                &algorithms,
                d_min,
                d_max,
                reps,
                common.seed,
                &budgets,
                &common.out,
            )
        }
        Command::Match {
            problem,
            max_iters,
            damping,
            tol,
            common,
        } => {
            let opts = LbpOptions {
                max_iters,
                damping,
                tol,
            };
            commands::cmd_match(&problem, &opts, &common.out)
        }
        Command::Fit {
            data,
            structure,
            tables,
            step,
            iters,
            l1,
            common,
        } => {
            let structure: StructureFlag = structure.parse()?;
            let tables: TablesFlag = tables.parse()?;
            let opts = FitOptions {
                step,
                iters,
                l1_lambda: l1,
            };
            commands::cmd_fit(&data, structure, tables, &opts, &common.out)
        }
        Command::Mil {
            bags,
            model,
            eps,
            lam,
            mu,
            sigma,
            step,
            iters,
            common,
        } => {
            let tables = match model.as_str() {
                "noisy-or" => MilTables::NoisyOr { eps, lam },
                "normal" => MilTables::Normal { mu, sigma },
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown MIL model {other:?} (expected noisy-or or normal)"
                    )))
                }
            };
            let opts = MilFitOptions { step, iters };
            commands::cmd_mil(&bags, &tables, &opts, &common.out)
        }
        Command::Struct { data, mode, common } => {
            let mode: ClusterMode = mode.parse()?;
            commands::cmd_struct(&data, mode, &common.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("warning: could not configure the thread pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if cli.threads > 1 {
        eprintln!("warning: built without the parallel feature; --threads ignored");
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
