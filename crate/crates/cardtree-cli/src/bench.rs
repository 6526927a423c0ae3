//! Runtime benchmark harness: times the three marginal algorithms on random
//! standard-cardinality models over doubling problem sizes, with analytic
//! memory estimates and time/memory budgets that turn into DNF records
//! instead of crashes.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cardtree::baselines::{chain_marginals, chain_peak_bytes, quadratic_tree_marginals};
use cardtree::random::random_standard_model;
use cardtree::{marginals, Backend, Error, RCModel, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    /// The hybrid convolution-tree engine (FFT kernel above the length
    /// threshold), the near-linear algorithm.
    FftTree,
    /// The convolution tree with the direct quadratic kernel.
    Tree,
    /// The chain algorithm with its quadratic partial-sum tables.
    Chain,
}

impl Algo {
    pub fn name(&self) -> &'static str {
        match self {
            Algo::FftTree => "fft_tree",
            Algo::Tree => "tree",
            Algo::Chain => "chain",
        }
    }

    /// Conservative growth factor of the runtime when D doubles, used to
    /// predict budget overruns before attempting a run.
    fn growth(&self) -> f64 {
        match self {
            Algo::FftTree => 2.5,
            Algo::Tree | Algo::Chain => 4.5,
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fft_tree" => Ok(Algo::FftTree),
            "tree" => Ok(Algo::Tree),
            "chain" => Ok(Algo::Chain),
            other => Err(Error::InvalidArgument(format!(
                "unknown algorithm {other:?} (expected fft_tree, tree or chain)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BenchStatus {
    Ok,
    DnfMemory,
    DnfTime,
    DnfProjectedTime,
}

impl BenchStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchStatus::Ok => "ok",
            BenchStatus::DnfMemory => "dnf_memory",
            BenchStatus::DnfTime => "dnf_time",
            BenchStatus::DnfProjectedTime => "dnf_projected_time",
        }
    }

    pub fn is_ok(&self) -> bool {
        *self == BenchStatus::Ok
    }
}

/// One timing row: median wall-clock seconds over `reps` measured runs after
/// one warm-up, plus an analytic peak-memory estimate.
#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub algorithm: &'static str,
    pub d: usize,
    pub seconds: f64,
    pub peak_bytes: u64,
    pub reps: usize,
    pub status: BenchStatus,
}

#[derive(Debug, Clone, Copy)]
pub struct BenchBudgets {
    /// A single run projected or measured above this is recorded as DNF.
    pub time_secs: f64,
    /// Runs whose analytic memory estimate exceeds this are not attempted.
    pub mem_bytes: u64,
}

impl Default for BenchBudgets {
    fn default() -> Self {
        BenchBudgets {
            time_secs: 300.0,
            mem_bytes: 3 * (1 << 30),
        }
    }
}

/// Message storage for the tree engines: upward and downward vectors over
/// every node, plus FFT scratch at the root.
fn tree_peak_bytes(d: usize) -> u64 {
    let mut entries: u64 = 0;
    let mut width = d as u64;
    let mut level_len = 1u64;
    while width >= 1 {
        entries += level_len * (width + 1);
        if width == 1 {
            break;
        }
        width = width.div_ceil(2);
        level_len *= 2;
    }
    let fft_scratch = 4 * 16 * (2 * d as u64 + 1).next_power_of_two();
    2 * entries * 8 + fft_scratch
}

pub fn peak_bytes_estimate(algo: Algo, d: usize) -> u64 {
    match algo {
        Algo::FftTree | Algo::Tree => tree_peak_bytes(d),
        Algo::Chain => chain_peak_bytes(d, None),
    }
}

fn run_once(algo: Algo, model: &RCModel) -> Result<f64> {
    let start = Instant::now();
    match algo {
        Algo::FftTree => {
            marginals(model, Backend::Auto)?;
        }
        Algo::Tree => {
            quadratic_tree_marginals(model)?;
        }
        Algo::Chain => {
            let root = model.tree().root();
            let table = model.table(root).expect("standard model has a root table");
            chain_marginals(model.unary(), table, None)?;
        }
    }
    Ok(start.elapsed().as_secs_f64())
}

/// Time `algos` on seeded random standard-cardinality models for every
/// doubling of D in `[d_min, d_max]`.
pub fn run_bench(
    algos: &[Algo],
    d_min: usize,
    d_max: usize,
    reps: usize,
    seed: u64,
    budgets: &BenchBudgets,
) -> Result<Vec<BenchRecord>> {
    if !d_min.is_power_of_two() || !d_max.is_power_of_two() {
        return Err(Error::InvalidArgument(
            "d_min and d_max must be powers of two".into(),
        ));
    }
    if d_min > d_max {
        return Err(Error::InvalidArgument(format!(
            "d_min ({d_min}) exceeds d_max ({d_max})"
        )));
    }
    if d_min < 2 {
        return Err(Error::InvalidArgument("d_min must be at least 2".into()));
    }
    if reps < 3 {
        return Err(Error::InvalidArgument(
            "reps must be at least 3 for a stable median".into(),
        ));
    }

    let mut records = Vec::new();
    for &algo in algos {
        let mut last_ok_secs: Option<f64> = None;
        let mut dead = false;
        let mut d = d_min;
        loop {
            let peak_bytes = peak_bytes_estimate(algo, d);
            let status = if dead {
                BenchStatus::DnfProjectedTime
            } else if peak_bytes > budgets.mem_bytes {
                BenchStatus::DnfMemory
            } else if last_ok_secs.is_some_and(|t| t * algo.growth() > budgets.time_secs) {
                BenchStatus::DnfProjectedTime
            } else {
                BenchStatus::Ok
            };

            match status {
                BenchStatus::Ok => {
                    // The model is a deterministic function of (seed, D).
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(d as u64);
                    let model = random_standard_model(d, &mut rng);
                    let warmup = run_once(algo, &model)?;
                    if warmup > budgets.time_secs {
                        records.push(BenchRecord {
                            algorithm: algo.name(),
                            d,
                            seconds: warmup,
                            peak_bytes,
                            reps: 1,
                            status: BenchStatus::DnfTime,
                        });
                        dead = true;
                    } else {
                        let mut times: Vec<f64> = (0..reps)
                            .map(|_| run_once(algo, &model))
                            .collect::<Result<_>>()?;
                        times.sort_by(f64::total_cmp);
                        let median = times[times.len() / 2];
                        records.push(BenchRecord {
                            algorithm: algo.name(),
                            d,
                            seconds: median,
                            peak_bytes,
                            reps,
                            status: BenchStatus::Ok,
                        });
                        last_ok_secs = Some(median);
                    }
                }
                dnf => {
                    records.push(BenchRecord {
                        algorithm: algo.name(),
                        d,
                        seconds: last_ok_secs.unwrap_or(0.0).max(f64::MIN_POSITIVE),
                        peak_bytes,
                        reps: 0,
                        status: dnf,
                    });
                    dead = true;
                }
            }

            if d == d_max {
                break;
            }
            d *= 2;
        }
    }
    Ok(records)
}

/// Least-squares slope of `ln(seconds)` against `ln(d)` over the completed
/// records of one algorithm.
pub fn loglog_slope(records: &[BenchRecord], algorithm: &str) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.algorithm == algorithm && r.status.is_ok())
        .map(|r| ((r.d as f64).ln(), r.seconds.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

pub fn records_to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from("algorithm,d,seconds,peak_bytes,reps,status\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{:.6e},{},{},{}\n",
            r.algorithm,
            r.d,
            r.seconds,
            r.peak_bytes,
            r.reps,
            r.status.as_str()
        ));
    }
    out
}
