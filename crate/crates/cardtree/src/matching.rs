//! Generalized bipartite matching: a grid of binary variables with
//! cardinality tables on every row and column count.
//!
//! Marginals are approximated with damped loopy belief propagation where each
//! factor's full outgoing message set is one [`factor_messages`] call; exact
//! enumeration, a constraint-blind baseline and a block Gibbs sampler are
//! provided for comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convtree::{factor_messages, Backend};
use crate::error::{Error, Result};
use crate::model::CardinalityTable;
use crate::numeric::{sigmoid, LogAcc};

/// Log-potential form of the matching energy: `p(y) ∝ exp(sum θ_ij y_ij)`
/// times row and column count potentials.
#[derive(Debug, Clone)]
pub struct MatchingModel {
    rows: usize,
    cols: usize,
    theta: Vec<f64>,
    row_tables: Vec<CardinalityTable>,
    col_tables: Vec<CardinalityTable>,
}

impl MatchingModel {
    pub fn new(
        rows: usize,
        cols: usize,
        theta: Vec<f64>,
        row_tables: Vec<CardinalityTable>,
        col_tables: Vec<CardinalityTable>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("empty matching grid".into()));
        }
        if theta.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "theta has {} entries for a {rows}x{cols} grid",
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(
                "theta entries must be finite".into(),
            ));
        }
        if row_tables.len() != rows || col_tables.len() != cols {
            return Err(Error::InvalidArgument(format!(
                "expected {rows} row tables and {cols} column tables, got {} and {}",
                row_tables.len(),
                col_tables.len()
            )));
        }
        for (i, t) in row_tables.iter().enumerate() {
            if t.n() != cols {
                return Err(Error::InvalidArgument(format!(
                    "row table {i} covers {} variables, expected {cols}",
                    t.n()
                )));
            }
        }
        for (j, t) in col_tables.iter().enumerate() {
            if t.n() != rows {
                return Err(Error::InvalidArgument(format!(
                    "column table {j} covers {} variables, expected {rows}",
                    t.n()
                )));
            }
        }
        Ok(MatchingModel {
            rows,
            cols,
            theta,
            row_tables,
            col_tables,
        })
    }

    /// Convenience constructor with one shared table per side.
    pub fn uniform_tables(
        rows: usize,
        cols: usize,
        theta: Vec<f64>,
        row_table: CardinalityTable,
        col_table: CardinalityTable,
    ) -> Result<Self> {
        MatchingModel::new(
            rows,
            cols,
            theta,
            vec![row_table; rows],
            vec![col_table; cols],
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn theta(&self, i: usize, j: usize) -> f64 {
        self.theta[i * self.cols + j]
    }

    pub fn row_table(&self, i: usize) -> &CardinalityTable {
        &self.row_tables[i]
    }

    pub fn col_table(&self, j: usize) -> &CardinalityTable {
        &self.col_tables[j]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LbpOptions {
    pub max_iters: usize,
    /// Fraction of the old message kept at each update, in [0, 1).
    pub damping: f64,
    /// Convergence threshold on the max absolute belief change.
    pub tol: f64,
}

impl Default for LbpOptions {
    fn default() -> Self {
        // Hard count constraints push messages to the simplex boundary and
        // the residual then decays like 1/t^2, so the iteration cap is high;
        // soft problems converge in tens of iterations regardless.
        LbpOptions {
            max_iters: 20_000,
            damping: 0.5,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbpResult {
    /// `P(y_ij = 1)`, row-major.
    pub marginals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Max absolute belief change of the last iteration.
    pub residual: f64,
    /// Residual after every iteration, for convergence diagnostics.
    pub residuals: Vec<f64>,
}

/// Message from variable `(i, j)` into a factor: its unary times the message
/// from the opposite factor, normalized.
fn var_to_factor(theta: f64, other: [f64; 2]) -> Option<[f64; 2]> {
    let a0 = other[0].ln();
    let a1 = other[1].ln() + theta;
    let m = a0.max(a1);
    if m == f64::NEG_INFINITY {
        return None;
    }
    let w0 = (a0 - m).exp();
    let w1 = (a1 - m).exp();
    let s = w0 + w1;
    Some([w0 / s, w1 / s])
}

/// Damped sum-product between the grid variables and the row/column
/// cardinality factors, on a fixed round-robin schedule (all row factors,
/// then all column factors).
pub fn lbp_matching(model: &MatchingModel, opts: &LbpOptions) -> Result<LbpResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if !(0.0..1.0).contains(&opts.damping) {
        return Err(Error::InvalidArgument(format!(
            "damping must be in [0, 1), got {}",
            opts.damping
        )));
    }
    let (r, c) = (model.rows, model.cols);
    let idx = |i: usize, j: usize| i * c + j;
    let mut msg_row: Vec<[f64; 2]> = vec![[0.5, 0.5]; r * c];
    let mut msg_col: Vec<[f64; 2]> = vec![[0.5, 0.5]; r * c];

    let beliefs = |msg_row: &[[f64; 2]], msg_col: &[[f64; 2]]| -> Result<Vec<f64>> {
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                let k = idx(i, j);
                let b0 = msg_row[k][0].ln() + msg_col[k][0].ln();
                let b1 = msg_row[k][1].ln() + msg_col[k][1].ln() + model.theta(i, j);
                if b0 == f64::NEG_INFINITY && b1 == f64::NEG_INFINITY {
                    return Err(Error::Infeasible { row: i, col: j });
                }
                out[k] = sigmoid(b1 - b0);
            }
        }
        Ok(out)
    };

    let mut prev = beliefs(&msg_row, &msg_col)?;
    let mut residuals = Vec::new();
    for iter in 1..=opts.max_iters {
        for i in 0..r {
            let mut incoming = Vec::with_capacity(c);
            for j in 0..c {
                incoming.push(
                    var_to_factor(model.theta(i, j), msg_col[idx(i, j)])
                        .ok_or(Error::Infeasible { row: i, col: j })?,
                );
            }
            let out = factor_messages(&incoming, model.row_table(i), Backend::Auto)?;
            for (j, new) in out.into_iter().enumerate() {
                let k = idx(i, j);
                let mixed = [
                    opts.damping * msg_row[k][0] + (1.0 - opts.damping) * new[0],
                    opts.damping * msg_row[k][1] + (1.0 - opts.damping) * new[1],
                ];
                let s = mixed[0] + mixed[1];
                msg_row[k] = [mixed[0] / s, mixed[1] / s];
            }
        }
        for j in 0..c {
            let mut incoming = Vec::with_capacity(r);
            for i in 0..r {
                incoming.push(
                    var_to_factor(model.theta(i, j), msg_row[idx(i, j)])
                        .ok_or(Error::Infeasible { row: i, col: j })?,
                );
            }
            let out = factor_messages(&incoming, model.col_table(j), Backend::Auto)?;
            for (i, new) in out.into_iter().enumerate() {
                let k = idx(i, j);
                let mixed = [
                    opts.damping * msg_col[k][0] + (1.0 - opts.damping) * new[0],
                    opts.damping * msg_col[k][1] + (1.0 - opts.damping) * new[1],
                ];
                let s = mixed[0] + mixed[1];
                msg_col[k] = [mixed[0] / s, mixed[1] / s];
            }
        }

        let cur = beliefs(&msg_row, &msg_col)?;
        let residual = cur
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        residuals.push(residual);
        prev = cur;
        if residual < opts.tol {
            return Ok(LbpResult {
                marginals: prev,
                converged: true,
                iterations: iter,
                residual,
                residuals,
            });
        }
    }
    let residual = residuals.last().copied().unwrap_or(0.0);
    Ok(LbpResult {
        marginals: prev,
        converged: false,
        iterations: opts.max_iters,
        residual,
        residuals,
    })
}

/// Constraint-blind baseline: marginals of the factorized unary-only
/// distribution, `P(y_ij = 1) = sigmoid(theta_ij)`.
pub fn node_marginal_baseline(model: &MatchingModel) -> Vec<f64> {
    model.theta.iter().map(|&t| sigmoid(t)).collect()
}

fn check_feasible(model: &MatchingModel, y: &[u8]) -> Result<()> {
    let (r, c) = (model.rows, model.cols);
    for i in 0..r {
        let count: usize = (0..c).map(|j| y[i * c + j] as usize).sum();
        if model.row_tables[i].log_f()[count] == f64::NEG_INFINITY {
            return Err(Error::InfeasibleInit(format!(
                "row {i} has count {count}, which the row table forbids"
            )));
        }
    }
    for j in 0..c {
        let count: usize = (0..r).map(|i| y[i * c + j] as usize).sum();
        if model.col_tables[j].log_f()[count] == f64::NEG_INFINITY {
            return Err(Error::InfeasibleInit(format!(
                "column {j} has count {count}, which the column table forbids"
            )));
        }
    }
    Ok(())
}

/// Block Gibbs sampling over 2x2 blocks `(i1, j1), (i1, j2), (i2, j1),
/// (i2, j2)`, resampled jointly from their exact 16-state conditional.
/// Returns post-burn-in mean activations. Deterministic given the seed.
///
/// Not ergodic for disjoint hard count sets (e.g. rows allowing only 0 or 3
/// active): a 2x2 flip cannot cross between the modes, so estimates then
/// depend on the initial configuration.
pub fn block_gibbs(
    model: &MatchingModel,
    init: &[u8],
    seed: u64,
    sweeps: usize,
    burn_in: usize,
) -> Result<Vec<f64>> {
    let (r, c) = (model.rows, model.cols);
    if r < 2 || c < 2 {
        return Err(Error::InvalidArgument(
            "block Gibbs needs at least a 2x2 grid".into(),
        ));
    }
    if init.len() != r * c || init.iter().any(|&b| b > 1) {
        return Err(Error::InvalidArgument(
            "init must be a 0/1 matrix of the grid shape".into(),
        ));
    }
    if sweeps <= burn_in {
        return Err(Error::InvalidArgument(format!(
            "sweeps ({sweeps}) must exceed burn_in ({burn_in})"
        )));
    }
    check_feasible(model, init)?;

    let idx = |i: usize, j: usize| i * c + j;
    let mut y = init.to_vec();
    let mut row_counts: Vec<usize> = (0..r)
        .map(|i| (0..c).map(|j| y[idx(i, j)] as usize).sum())
        .collect();
    let mut col_counts: Vec<usize> = (0..c)
        .map(|j| (0..r).map(|i| y[idx(i, j)] as usize).sum())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = vec![0u64; r * c];
    let kept = (sweeps - burn_in) as f64;

    for sweep in 0..sweeps {
        let i1 = rng.random_range(0..r);
        let mut i2 = rng.random_range(0..r - 1);
        if i2 >= i1 {
            i2 += 1;
        }
        let j1 = rng.random_range(0..c);
        let mut j2 = rng.random_range(0..c - 1);
        if j2 >= j1 {
            j2 += 1;
        }
        let cells = [idx(i1, j1), idx(i1, j2), idx(i2, j1), idx(i2, j2)];
        let cur = [
            y[cells[0]] as usize,
            y[cells[1]] as usize,
            y[cells[2]] as usize,
            y[cells[3]] as usize,
        ];
        let base_r1 = row_counts[i1] - cur[0] - cur[1];
        let base_r2 = row_counts[i2] - cur[2] - cur[3];
        let base_c1 = col_counts[j1] - cur[0] - cur[2];
        let base_c2 = col_counts[j2] - cur[1] - cur[3];

        let mut logw = [0.0f64; 16];
        for (state, lw) in logw.iter_mut().enumerate() {
            let b = [
                state & 1,
                (state >> 1) & 1,
                (state >> 2) & 1,
                (state >> 3) & 1,
            ];
            let mut acc = 0.0;
            acc += b[0] as f64 * model.theta(i1, j1);
            acc += b[1] as f64 * model.theta(i1, j2);
            acc += b[2] as f64 * model.theta(i2, j1);
            acc += b[3] as f64 * model.theta(i2, j2);
            acc += model.row_tables[i1].log_f()[base_r1 + b[0] + b[1]];
            acc += model.row_tables[i2].log_f()[base_r2 + b[2] + b[3]];
            acc += model.col_tables[j1].log_f()[base_c1 + b[0] + b[2]];
            acc += model.col_tables[j2].log_f()[base_c2 + b[1] + b[3]];
            *lw = acc;
        }
        let shift = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logw
            .iter()
            .map(|&lw| {
                if lw == f64::NEG_INFINITY {
                    0.0
                } else {
                    (lw - shift).exp()
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        debug_assert!(total > 0.0, "current state always has positive weight");
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = 0;
        for (state, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                chosen = state;
                if acc >= target {
                    break;
                }
            }
        }
        let b = [
            (chosen & 1) as u8,
            ((chosen >> 1) & 1) as u8,
            ((chosen >> 2) & 1) as u8,
            ((chosen >> 3) & 1) as u8,
        ];
        row_counts[i1] = base_r1 + (b[0] + b[1]) as usize;
        row_counts[i2] = base_r2 + (b[2] + b[3]) as usize;
        col_counts[j1] = base_c1 + (b[0] + b[2]) as usize;
        col_counts[j2] = base_c2 + (b[1] + b[3]) as usize;
        for (cell, &bit) in cells.iter().zip(&b) {
            y[*cell] = bit;
        }

        if sweep >= burn_in {
            for (t, &bit) in tally.iter_mut().zip(&y) {
                *t += bit as u64;
            }
        }
    }
    Ok(tally.iter().map(|&t| t as f64 / kept).collect())
}

/// Exact marginals by constrained enumeration; refuses grids with more than
/// 20 variables (the problem is #P-complete, so this is a small-instance
/// ground truth only).
pub fn exact_matching_marginals(model: &MatchingModel) -> Result<Vec<f64>> {
    let (r, c) = (model.rows, model.cols);
    let n = r * c;
    if n > 20 {
        return Err(Error::TooLarge(format!(
            "exact matching enumeration refuses {r}x{c} = {n} > 20 variables"
        )));
    }
    let mut z = LogAcc::new();
    let mut marg = vec![LogAcc::new(); n];
    for cfg in 0..(1usize << n) {
        let mut lw = 0.0;
        for (k, &t) in model.theta.iter().enumerate() {
            if (cfg >> k) & 1 == 1 {
                lw += t;
            }
        }
        let mut dead = false;
        for i in 0..r {
            let count = ((cfg >> (i * c)) & ((1 << c) - 1)).count_ones() as usize;
            let lf = model.row_tables[i].log_f()[count];
            if lf == f64::NEG_INFINITY {
                dead = true;
                break;
            }
            lw += lf;
        }
        if dead {
            continue;
        }
        for j in 0..c {
            let mut count = 0;
            for i in 0..r {
                count += (cfg >> (i * c + j)) & 1;
            }
            let lf = model.col_tables[j].log_f()[count];
            if lf == f64::NEG_INFINITY {
                dead = true;
                break;
            }
            lw += lf;
        }
        if dead {
            continue;
        }
        z.push(lw);
        for (k, acc) in marg.iter_mut().enumerate() {
            if (cfg >> k) & 1 == 1 {
                acc.push(lw);
            }
        }
    }
    let log_z = z.value();
    if log_z == f64::NEG_INFINITY {
        return Err(Error::ZeroMass { node: 0 });
    }
    Ok(marg.iter().map(|a| (a.value() - log_z).exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hard_count_table;

    fn hard(n: usize, allowed: &[usize]) -> CardinalityTable {
        hard_count_table(n, allowed).unwrap()
    }

    #[test]
    fn one_by_one_pinned_on() {
        let model = MatchingModel::new(
            1,
            1,
            vec![0.0],
            vec![hard(1, &[1])],
            vec![CardinalityTable::uniform(1)],
        )
        .unwrap();
        // Undamped, the hard row factor pins the belief after one sweep.
        let opts = LbpOptions {
            damping: 0.0,
            ..Default::default()
        };
        let res = lbp_matching(&model, &opts).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 2);
        assert!((res.marginals[0] - 1.0).abs() < 1e-12);
        // The default damped run still gets there, within its tolerance.
        let damped = lbp_matching(&model, &LbpOptions::default()).unwrap();
        assert!(damped.converged);
        assert!((damped.marginals[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn permutation_symmetry_two_by_two() {
        let model = MatchingModel::uniform_tables(2, 2, vec![0.0; 4], hard(2, &[1]), hard(2, &[1]))
            .unwrap();
        let res = lbp_matching(&model, &LbpOptions::default()).unwrap();
        for &m in &res.marginals {
            assert!((m - 0.5).abs() < 1e-7, "{m}");
        }
        let exact = exact_matching_marginals(&model).unwrap();
        for &m in &exact {
            assert!((m - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_tables_reduce_to_node_baseline_in_one_sweep() {
        let theta = vec![0.3, -1.2, 0.0, 2.0, -0.4, 0.9];
        let model = MatchingModel::uniform_tables(
            2,
            3,
            theta,
            CardinalityTable::uniform(3),
            CardinalityTable::uniform(2),
        )
        .unwrap();
        let res = lbp_matching(&model, &LbpOptions::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        let baseline = node_marginal_baseline(&model);
        assert_eq!(res.marginals, baseline);
        // Without constraints the baseline is exact.
        let exact = exact_matching_marginals(&model).unwrap();
        for (a, b) in baseline.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn node_baseline_values() {
        let model = MatchingModel::uniform_tables(
            1,
            2,
            vec![0.0, 30.0],
            CardinalityTable::uniform(2),
            CardinalityTable::uniform(1),
        )
        .unwrap();
        let base = node_marginal_baseline(&model);
        assert!((base[0] - 0.5).abs() < 1e-12);
        assert!((base[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lbp_close_to_exact_on_constrained_grid() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let theta: Vec<f64> = (0..9).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let model =
            MatchingModel::uniform_tables(3, 3, theta, hard(3, &[1, 2]), hard(3, &[1, 2])).unwrap();
        let exact = exact_matching_marginals(&model).unwrap();
        let res = lbp_matching(&model, &LbpOptions::default()).unwrap();
        assert!(res.converged);
        let mean_err: f64 = res
            .marginals
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 9.0;
        assert!(mean_err <= 0.05, "mean error {mean_err}");
    }

    #[test]
    fn infeasible_variable_is_named() {
        // Row forces count 2 (both on), column forces count 0 (both off).
        // Undamped messages collapse to the contradiction within two sweeps.
        let model = MatchingModel::new(
            2,
            2,
            vec![0.0; 4],
            vec![hard(2, &[2]), hard(2, &[2])],
            vec![hard(2, &[0]), hard(2, &[0])],
        )
        .unwrap();
        let opts = LbpOptions {
            damping: 0.0,
            ..Default::default()
        };
        match lbp_matching(&model, &opts) {
            Err(Error::Infeasible { .. }) | Err(Error::ZeroMass { .. }) => {}
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn block_gibbs_is_deterministic_and_feasible() {
        let model =
            MatchingModel::uniform_tables(3, 3, vec![0.2; 9], hard(3, &[1, 2]), hard(3, &[1, 2]))
                .unwrap();
        // A feasible start: identity-ish matching.
        let init = vec![1, 0, 0, 0, 1, 0, 0, 0, 1];
        let a = block_gibbs(&model, &init, 5, 4000, 1000).unwrap();
        let b = block_gibbs(&model, &init, 5, 4000, 1000).unwrap();
        assert_eq!(a, b);

        let bad_init = vec![0; 9];
        assert!(matches!(
            block_gibbs(&model, &bad_init, 5, 100, 10),
            Err(Error::InfeasibleInit(_))
        ));
    }

    #[test]
    fn block_gibbs_matches_exact_on_soft_grid() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let theta: Vec<f64> = (0..9).map(|_| rng.random::<f64>() - 0.5).collect();
        let soft_row = CardinalityTable::new(vec![0.0, 0.4, -0.3, 0.1]).unwrap();
        let soft_col = CardinalityTable::new(vec![0.2, -0.2, 0.5, 0.0]).unwrap();
        let model = MatchingModel::uniform_tables(3, 3, theta, soft_row, soft_col).unwrap();
        let exact = exact_matching_marginals(&model).unwrap();
        let est = block_gibbs(&model, &[0u8; 9], 11, 1_000_000, 50_000).unwrap();
        let max_err = est
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err <= 0.02, "max error {max_err}");
    }

    #[test]
    fn block_gibbs_not_ergodic_for_disjoint_counts() {
        // Feasible states are all-on and all-off; a 2x2 block flip cannot move
        // between them, so estimates depend on the initial state.
        let model =
            MatchingModel::uniform_tables(3, 3, vec![0.0; 9], hard(3, &[0, 3]), hard(3, &[0, 3]))
                .unwrap();
        let from_zero = block_gibbs(&model, &[0u8; 9], 3, 2000, 100).unwrap();
        let from_one = block_gibbs(&model, &[1u8; 9], 3, 2000, 100).unwrap();
        assert!(from_zero.iter().all(|&p| p == 0.0));
        assert!(from_one.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn exact_enumeration_guard() {
        let model = MatchingModel::uniform_tables(
            5,
            5,
            vec![0.0; 25],
            CardinalityTable::uniform(5),
            CardinalityTable::uniform(5),
        )
        .unwrap();
        assert!(matches!(
            exact_matching_marginals(&model),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn residual_tail_is_non_increasing_on_converged_run() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let theta: Vec<f64> = (0..16).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let model =
            MatchingModel::uniform_tables(4, 4, theta, hard(4, &[2, 3]), hard(4, &[1, 2])).unwrap();
        let res = lbp_matching(&model, &LbpOptions::default()).unwrap();
        assert!(res.converged);
        let tail = &res.residuals[res.residuals.len().saturating_sub(10)..];
        for w in tail.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "tail residuals increased: {w:?}");
        }
    }
}
