//! Reference algorithms: the quadratic chain algorithm with an O(Dk)
//! truncated variant, the naive-convolution tree variant, and a brute-force
//! enumeration oracle for small models.

use crate::convtree::{marginals, Backend, CountDistribution, InferenceResult};
use crate::error::{Error, Result};
use crate::model::{CardinalityTable, RCModel};
use crate::numeric::LogAcc;
use crate::parallel::map_range;

/// Marginals for the standard cardinality model via chain-structured partial
/// sums `z_d = z_{d-1} + y_d`.
///
/// Forward and backward partial-sum tables are stored in full, which is the
/// O(D^2) space this method is known for; with `max_count = Some(k)` the
/// partial sums are capped at `k`, giving O(Dk) time and space (the table
/// must then be `-inf` above `k`).
///
/// The returned `count_marginals` holds a single entry: the distribution of
/// the full count, at index 0.
pub fn chain_marginals(
    unaries: &[[f64; 2]],
    table: &CardinalityTable,
    max_count: Option<usize>,
) -> Result<InferenceResult> {
    let d = unaries.len();
    if d == 0 {
        return Err(Error::InvalidArgument("no variables".into()));
    }
    if table.n() != d {
        return Err(Error::InvalidArgument(format!(
            "table covers {} variables but {} unaries were given",
            table.n(),
            d
        )));
    }
    let k = match max_count {
        Some(k) => {
            let k = k.min(d);
            for (c, &lf) in table.log_f().iter().enumerate().skip(k + 1) {
                if lf != f64::NEG_INFINITY {
                    return Err(Error::InvalidArgument(format!(
                        "max_count {k} given but the table has mass at count {c}"
                    )));
                }
            }
            k
        }
        None => d,
    };

    // Per-variable weights, max-shifted like the tree engine's leaves.
    let mut w = vec![[0.0f64; 2]; d];
    let mut shift_total = 0.0;
    for (i, u) in unaries.iter().enumerate() {
        let m = u[0].max(u[1]);
        if m == f64::NEG_INFINITY {
            return Err(Error::ZeroMass { node: i });
        }
        w[i] = [(u[0] - m).exp(), (u[1] - m).exp()];
        shift_total += m;
    }

    let row_len = |i: usize| i.min(k) + 1;

    // Forward: alpha[i] is the distribution of the partial sum of the first
    // i variables, renormalized per step with the scale accumulated.
    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let mut alpha_scale = vec![0.0f64; d + 1];
    alpha.push(vec![1.0]);
    for i in 0..d {
        let prev = &alpha[i];
        let mut next = vec![0.0; row_len(i + 1)];
        for (z, &p) in prev.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            if z < next.len() {
                next[z] += p * w[i][0];
            }
            if z + 1 < next.len() {
                next[z + 1] += p * w[i][1];
            }
        }
        let sum: f64 = next.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::ZeroMass { node: i });
        }
        next.iter_mut().for_each(|x| *x /= sum);
        alpha_scale[i + 1] = alpha_scale[i] + sum.ln();
        alpha.push(next);
    }

    // Backward: beta[i][z] is the (normalized) mass of the suffix starting at
    // variable i given partial sum z, with the cardinality table at the end.
    let table_shift = table.max_finite();
    let mut beta: Vec<Vec<f64>> = vec![Vec::new(); d + 1];
    let mut beta_scale = vec![0.0f64; d + 1];
    {
        let mut last: Vec<f64> = (0..row_len(d))
            .map(|z| {
                let lf = table.log_f()[z];
                if lf == f64::NEG_INFINITY {
                    0.0
                } else {
                    (lf - table_shift).exp()
                }
            })
            .collect();
        let sum: f64 = last.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::ZeroMass { node: d - 1 });
        }
        last.iter_mut().for_each(|x| *x /= sum);
        beta_scale[d] = table_shift + sum.ln();
        beta[d] = last;
    }
    for i in (0..d).rev() {
        let next = &beta[i + 1];
        let mut cur = vec![0.0; row_len(i)];
        for (z, c) in cur.iter_mut().enumerate() {
            let stay = next.get(z).copied().unwrap_or(0.0) * w[i][0];
            let step = next.get(z + 1).copied().unwrap_or(0.0) * w[i][1];
            *c = stay + step;
        }
        let sum: f64 = cur.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::ZeroMass { node: i });
        }
        cur.iter_mut().for_each(|x| *x /= sum);
        beta_scale[i] = beta_scale[i + 1] + sum.ln();
        beta[i] = cur;
    }

    // log Z from the cut at position 0: alpha_0 = [1], beta_0(0).
    let z0: f64 = beta[0][0];
    if !(z0 > 0.0) {
        return Err(Error::ZeroMass { node: 0 });
    }
    let log_z = shift_total + beta_scale[0] + z0.ln();

    // Marginals from the cut around each variable; scales cancel in the ratio.
    let mut leaf_marginals = vec![0.0; d];
    for i in 0..d {
        let a = &alpha[i];
        let b = &beta[i + 1];
        let mut on = 0.0;
        let mut off = 0.0;
        for (z, &p) in a.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            off += p * w[i][0] * b.get(z).copied().unwrap_or(0.0);
            on += p * w[i][1] * b.get(z + 1).copied().unwrap_or(0.0);
        }
        let total = on + off;
        if !(total > 0.0) {
            return Err(Error::ZeroMass { node: i });
        }
        leaf_marginals[i] = on / total;
    }

    // Full-count distribution: alpha_D times the table.
    let mut count: Vec<f64> = alpha[d]
        .iter()
        .zip(beta[d].iter())
        .map(|(&a, &b)| a * b)
        .collect();
    count.resize(d + 1, 0.0);
    let csum: f64 = count.iter().sum();
    count.iter_mut().for_each(|x| *x /= csum);

    Ok(InferenceResult {
        leaf_marginals,
        count_marginals: vec![Some(CountDistribution { probs: count })],
        log_z,
    })
}

/// Analytic peak-allocation estimate for [`chain_marginals`], in bytes: both
/// partial-sum tables plus the per-variable weights.
pub fn chain_peak_bytes(d: usize, max_count: Option<usize>) -> u64 {
    let k = max_count.unwrap_or(d).min(d);
    let rows: u64 = (0..=d as u64).map(|i| i.min(k as u64) + 1).sum();
    2 * rows * 8 + (d as u64) * 16
}

/// The naive-convolution tree variant: identical outputs to
/// [`marginals`] with [`Backend::Naive`] (it is that configuration, under the
/// name used in benchmarks).
pub fn quadratic_tree_marginals(model: &RCModel) -> Result<InferenceResult> {
    marginals(model, Backend::Naive)
}

/// Exact results from full enumeration, with the joint table kept when it is
/// small enough to be useful.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub inference: InferenceResult,
    /// Joint probabilities indexed by the configuration bits (variable `d` at
    /// bit `d`); present when `D <= 20`.
    pub joint: Option<Vec<f64>>,
}

/// Hard ceiling for the enumeration oracle.
pub const ORACLE_MAX_VARS: usize = 24;

/// Joint table is kept up to this many variables.
const ORACLE_JOINT_MAX_VARS: usize = 20;

/// Configurations per accumulation block. Fixed, so the log-sum-exp order is
/// a function of the configuration index alone and results are bit-identical
/// for any thread count.
const ORACLE_BLOCK: usize = 1 << 14;

struct BlockStats {
    z: LogAcc,
    marginal: Vec<LogAcc>,
    counts: Vec<Vec<LogAcc>>,
}

/// Exact marginals, count marginals and log-partition value by summing all
/// `2^D` configurations in the log domain.
pub fn brute_force(model: &RCModel) -> Result<OracleResult> {
    let d = model.num_vars();
    if d > ORACLE_MAX_VARS {
        return Err(Error::TooLarge(format!(
            "enumeration oracle refuses D = {d} > {ORACLE_MAX_VARS}"
        )));
    }
    let tree = model.tree();
    let unary = model.unary();

    // Bitmask of the leaf variables under each internal node with a table.
    let node_masks: Vec<(usize, u32, usize)> = model
        .table_nodes()
        .iter()
        .map(|(id, vars)| {
            let mask = vars.iter().fold(0u32, |m, &v| m | (1 << v));
            (*id, mask, vars.len())
        })
        .collect();

    let total = 1usize << d;
    let num_blocks = total.div_ceil(ORACLE_BLOCK);

    let log_weight = |cfg: usize| -> f64 {
        let mut lw = 0.0;
        for (v, u) in unary.iter().enumerate() {
            lw += u[(cfg >> v) & 1];
        }
        for &(id, mask, _) in &node_masks {
            let c = (cfg as u32 & mask).count_ones() as usize;
            let lf = model.table(id).unwrap().log_f()[c];
            if lf == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            lw += lf;
        }
        lw
    };

    let blocks: Vec<BlockStats> = map_range(num_blocks, |bi| {
        let start = bi * ORACLE_BLOCK;
        let end = (start + ORACLE_BLOCK).min(total);
        let mut stats = BlockStats {
            z: LogAcc::new(),
            marginal: vec![LogAcc::new(); d],
            counts: node_masks
                .iter()
                .map(|&(_, _, n)| vec![LogAcc::new(); n + 1])
                .collect(),
        };
        for cfg in start..end {
            let lw = log_weight(cfg);
            if lw == f64::NEG_INFINITY {
                continue;
            }
            stats.z.push(lw);
            for (v, acc) in stats.marginal.iter_mut().enumerate() {
                if (cfg >> v) & 1 == 1 {
                    acc.push(lw);
                }
            }
            for (t, &(_, mask, _)) in node_masks.iter().enumerate() {
                let c = (cfg as u32 & mask).count_ones() as usize;
                stats.counts[t][c].push(lw);
            }
        }
        stats
    });

    // Merge in block order; deterministic for any thread count.
    let mut z = LogAcc::new();
    let mut marginal = vec![LogAcc::new(); d];
    let mut counts: Vec<Vec<LogAcc>> = node_masks
        .iter()
        .map(|&(_, _, n)| vec![LogAcc::new(); n + 1])
        .collect();
    for b in &blocks {
        z.merge(&b.z);
        for (acc, other) in marginal.iter_mut().zip(&b.marginal) {
            acc.merge(other);
        }
        for (accs, others) in counts.iter_mut().zip(&b.counts) {
            for (acc, other) in accs.iter_mut().zip(others) {
                acc.merge(other);
            }
        }
    }

    let log_z = z.value();
    if log_z == f64::NEG_INFINITY {
        return Err(Error::ZeroMass { node: tree.root() });
    }

    let leaf_marginals: Vec<f64> = marginal.iter().map(|a| (a.value() - log_z).exp()).collect();
    let mut count_marginals: Vec<Option<CountDistribution>> = vec![None; tree.num_nodes()];
    for (t, &(id, _, n)) in node_masks.iter().enumerate() {
        let probs: Vec<f64> = (0..=n)
            .map(|c| (counts[t][c].value() - log_z).exp())
            .collect();
        count_marginals[id] = Some(CountDistribution { probs });
    }
    // Table-free internal nodes still have a count distribution; fill them by
    // a second pass so the oracle covers every node, like the tree engine.
    let all_masks: Vec<u32> = (0..tree.num_nodes())
        .map(|id| tree.leaf_vars(id).iter().fold(0u32, |m, &v| m | (1 << v)))
        .collect();
    for id in 0..tree.num_nodes() {
        if tree.is_leaf(id) || count_marginals[id].is_some() {
            continue;
        }
        let n = tree.leaf_count(id);
        let accs: Vec<LogAcc> = {
            let block_accs: Vec<Vec<LogAcc>> = map_range(num_blocks, |bi| {
                let start = bi * ORACLE_BLOCK;
                let end = (start + ORACLE_BLOCK).min(total);
                let mut accs = vec![LogAcc::new(); n + 1];
                for cfg in start..end {
                    let lw = log_weight(cfg);
                    if lw == f64::NEG_INFINITY {
                        continue;
                    }
                    let c = (cfg as u32 & all_masks[id]).count_ones() as usize;
                    accs[c].push(lw);
                }
                accs
            });
            let mut merged = vec![LogAcc::new(); n + 1];
            for b in &block_accs {
                for (acc, other) in merged.iter_mut().zip(b) {
                    acc.merge(other);
                }
            }
            merged
        };
        let probs: Vec<f64> = accs.iter().map(|a| (a.value() - log_z).exp()).collect();
        count_marginals[id] = Some(CountDistribution { probs });
    }

    let joint = if d <= ORACLE_JOINT_MAX_VARS {
        Some(
            (0..total)
                .map(|cfg| {
                    let lw = log_weight(cfg);
                    if lw == f64::NEG_INFINITY {
                        0.0
                    } else {
                        (lw - log_z).exp()
                    }
                })
                .collect(),
        )
    } else {
        None
    };

    Ok(OracleResult {
        inference: InferenceResult {
            leaf_marginals,
            count_marginals,
            log_z,
        },
        joint,
    })
}
