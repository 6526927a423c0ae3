//! Maximum-likelihood learning on top of the exact inference engine:
//! gradients from exact marginals, multiple-instance likelihoods, an
//! agglomerative structure heuristic, count-statistics evaluation, and a
//! synthetic Ising-grid data generator.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convtree::{count_marginal, marginals, sample, Backend, CountDistribution};
use crate::error::{Error, Result};
use crate::model::{CardinalityTable, RCModel, TreeNode, TreeSpec};
use crate::numeric::{log_add, sigmoid};
use crate::parallel::map_range;

/// N binary vectors of common width.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    width: usize,
    rows: Vec<Vec<u8>>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("dataset has no examples".into()));
        }
        let width = rows[0].len();
        if width == 0 {
            return Err(Error::InvalidArgument("dataset rows are empty".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} entries, expected {width}",
                    r.len()
                )));
            }
            if r.iter().any(|&b| b > 1) {
                return Err(Error::InvalidArgument(format!(
                    "row {i} contains a non-binary entry"
                )));
            }
        }
        Ok(Dataset { width, rows })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    /// Per-variable activation frequency.
    pub fn means(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        for r in &self.rows {
            for (m, &b) in out.iter_mut().zip(r) {
                *m += b as f64;
            }
        }
        let n = self.rows.len() as f64;
        out.iter_mut().for_each(|m| *m /= n);
        out
    }

    /// Empirical distribution of the active count over `vars`.
    pub fn count_histogram(&self, vars: &[usize]) -> Vec<f64> {
        let mut hist = vec![0.0; vars.len() + 1];
        for r in &self.rows {
            let c: usize = vars.iter().map(|&v| r[v] as usize).sum();
            hist[c] += 1.0;
        }
        let n = self.rows.len() as f64;
        hist.iter_mut().for_each(|h| *h /= n);
        hist
    }
}

/// The learnable structure of an RC model: a tree plus the internal nodes
/// that carry (free, fully parameterized) cardinality tables.
#[derive(Debug, Clone)]
pub struct Structure {
    tree: TreeSpec,
    table_nodes: Vec<usize>,
}

impl Structure {
    pub fn new(tree: TreeSpec, mut table_nodes: Vec<usize>) -> Result<Self> {
        table_nodes.sort_unstable();
        table_nodes.dedup();
        for &id in &table_nodes {
            if id >= tree.num_nodes() {
                return Err(Error::UnknownNode(id));
            }
            if tree.is_leaf(id) {
                return Err(Error::InvalidArgument(format!(
                    "node {id} is a leaf; leaf count preferences belong in the unary weights"
                )));
            }
        }
        Ok(Structure { tree, table_nodes })
    }

    /// Unary-only structure.
    pub fn unary_only(tree: TreeSpec) -> Self {
        Structure {
            tree,
            table_nodes: Vec::new(),
        }
    }

    /// Tables on every internal node of the tree.
    pub fn all_internal(tree: TreeSpec) -> Self {
        let table_nodes = (0..tree.num_nodes())
            .filter(|&id| !tree.is_leaf(id))
            .collect();
        Structure { tree, table_nodes }
    }

    pub fn tree(&self) -> &TreeSpec {
        &self.tree
    }

    pub fn table_nodes(&self) -> &[usize] {
        &self.table_nodes
    }
}

/// Free parameters for a [`Structure`]: log-odds unary weights (`θ_d(1) =
/// w_d`, `θ_d(0) = 0`) and one free log-potential vector per table node, in
/// [`Structure::table_nodes`] order. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub unary_weights: Vec<f64>,
    pub table_params: Vec<Vec<f64>>,
}

impl Parameters {
    pub fn zeros(structure: &Structure) -> Self {
        Parameters {
            unary_weights: vec![0.0; structure.tree.num_vars()],
            table_params: structure
                .table_nodes
                .iter()
                .map(|&id| vec![0.0; structure.tree.leaf_count(id) + 1])
                .collect(),
        }
    }

    fn check_shapes(&self, structure: &Structure) -> Result<()> {
        if self.unary_weights.len() != structure.tree.num_vars() {
            return Err(Error::InvalidArgument(format!(
                "{} unary weights for {} variables",
                self.unary_weights.len(),
                structure.tree.num_vars()
            )));
        }
        if self.table_params.len() != structure.table_nodes.len() {
            return Err(Error::InvalidArgument(format!(
                "{} table parameter vectors for {} table nodes",
                self.table_params.len(),
                structure.table_nodes.len()
            )));
        }
        for (t, (&id, p)) in structure
            .table_nodes
            .iter()
            .zip(&self.table_params)
            .enumerate()
        {
            if p.len() != structure.tree.leaf_count(id) + 1 {
                return Err(Error::InvalidArgument(format!(
                    "table parameter vector {t} has length {}, expected {}",
                    p.len(),
                    structure.tree.leaf_count(id) + 1
                )));
            }
        }
        let finite = self.unary_weights.iter().all(|w| w.is_finite())
            && self
                .table_params
                .iter()
                .all(|p| p.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::InvalidArgument("parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Instantiate the RC model described by `(structure, params)`.
pub fn params_to_model(params: &Parameters, structure: &Structure) -> Result<RCModel> {
    params.check_shapes(structure)?;
    let unary: Vec<[f64; 2]> = params.unary_weights.iter().map(|&w| [0.0, w]).collect();
    let mut tables = vec![None; structure.tree.num_nodes()];
    for (&id, p) in structure.table_nodes.iter().zip(&params.table_params) {
        tables[id] = Some(CardinalityTable::new(p.clone())?);
    }
    RCModel::new(unary, structure.tree.clone(), tables)
}

/// Fixed-size chunks keep the empirical reductions in a deterministic order
/// under any thread count.
const DATA_CHUNK: usize = 256;

struct EmpiricalStats {
    mean_log_weight: f64,
    means: Vec<f64>,
    count_freqs: Vec<Vec<f64>>,
}

fn empirical_stats(
    params: &Parameters,
    table_vars: &[Vec<usize>],
    data: &Dataset,
) -> EmpiricalStats {
    let n = data.len();
    let d = data.width();
    let chunks = n.div_ceil(DATA_CHUNK);
    let parts: Vec<(f64, Vec<f64>, Vec<Vec<f64>>)> = map_range(chunks, |ci| {
        let rows = &data.rows()[ci * DATA_CHUNK..((ci + 1) * DATA_CHUNK).min(n)];
        let mut lw_sum = 0.0;
        let mut y_sum = vec![0.0; d];
        let mut hists: Vec<Vec<f64>> = table_vars.iter().map(|v| vec![0.0; v.len() + 1]).collect();
        for row in rows {
            for (s, &b) in y_sum.iter_mut().zip(row) {
                *s += b as f64;
            }
            let mut lw: f64 = row
                .iter()
                .zip(&params.unary_weights)
                .map(|(&b, &w)| b as f64 * w)
                .sum();
            for ((vars, hist), p) in table_vars
                .iter()
                .zip(hists.iter_mut())
                .zip(&params.table_params)
            {
                let c: usize = vars.iter().map(|&v| row[v] as usize).sum();
                hist[c] += 1.0;
                lw += p[c];
            }
            lw_sum += lw;
        }
        (lw_sum, y_sum, hists)
    });

    let mut lw_sum = 0.0;
    let mut means = vec![0.0; d];
    let mut count_freqs: Vec<Vec<f64>> =
        table_vars.iter().map(|v| vec![0.0; v.len() + 1]).collect();
    for (lw, ys, hs) in parts {
        lw_sum += lw;
        for (m, y) in means.iter_mut().zip(ys) {
            *m += y;
        }
        for (acc, h) in count_freqs.iter_mut().zip(hs) {
            for (a, v) in acc.iter_mut().zip(h) {
                *a += v;
            }
        }
    }
    let nf = n as f64;
    means.iter_mut().for_each(|m| *m /= nf);
    for h in &mut count_freqs {
        h.iter_mut().for_each(|v| *v /= nf);
    }
    EmpiricalStats {
        mean_log_weight: lw_sum / nf,
        means,
        count_freqs,
    }
}

/// Mean negative log-likelihood of the data and its exact gradient.
///
/// The unary gradient is `E_model[y_d] - mean_n[y_d]`; the gradient of table
/// entry `c` is `P_model(count = c) - empirical frequency`, both from a
/// single marginal computation.
pub fn nll_and_grad(
    params: &Parameters,
    structure: &Structure,
    data: &Dataset,
) -> Result<(f64, Parameters)> {
    params.check_shapes(structure)?;
    if data.width() != structure.tree.num_vars() {
        return Err(Error::InvalidArgument(format!(
            "data width {} does not match the {}-variable structure",
            data.width(),
            structure.tree.num_vars()
        )));
    }
    let model = params_to_model(params, structure)?;
    let inference = marginals(&model, Backend::Auto)?;
    let table_vars: Vec<Vec<usize>> = structure
        .table_nodes
        .iter()
        .map(|&id| structure.tree.leaf_vars(id))
        .collect();
    let stats = empirical_stats(params, &table_vars, data);

    let nll = inference.log_z - stats.mean_log_weight;
    let grad_unary: Vec<f64> = inference
        .leaf_marginals
        .iter()
        .zip(&stats.means)
        .map(|(&m, &e)| m - e)
        .collect();
    let grad_tables: Vec<Vec<f64>> = structure
        .table_nodes
        .iter()
        .zip(&stats.count_freqs)
        .map(|(&id, freq)| {
            let dist = inference.count_marginals[id]
                .as_ref()
                .expect("table nodes are internal");
            dist.probs.iter().zip(freq).map(|(&p, &f)| p - f).collect()
        })
        .collect();

    Ok((
        nll,
        Parameters {
            unary_weights: grad_unary,
            table_params: grad_tables,
        },
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub step: f64,
    pub iters: usize,
    /// L1 penalty on the unary weights, applied by soft thresholding.
    pub l1_lambda: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            step: 0.5,
            iters: 200,
            l1_lambda: 0.0,
        }
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn l1_norm(w: &[f64]) -> f64 {
    w.iter().map(|x| x.abs()).sum()
}

/// Gradient descent from zero-initialized parameters with backtracking: the
/// step is halved whenever the objective (nll plus the L1 term) would
/// increase, so accepted iterates never increase it.
pub fn fit(structure: &Structure, data: &Dataset, opts: &FitOptions) -> Result<Parameters> {
    if !(opts.step >= 0.0) || !opts.step.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "step must be finite and nonnegative, got {}",
            opts.step
        )));
    }
    if opts.l1_lambda < 0.0 {
        return Err(Error::InvalidArgument("l1_lambda must be >= 0".into()));
    }
    let mut params = Parameters::zeros(structure);
    let (mut nll, mut grad) = nll_and_grad(&params, structure, data)?;
    if !nll.is_finite() {
        return Err(Error::Divergence {
            iter: 0,
            reason: format!("initial nll is {nll}"),
        });
    }
    let mut obj = nll + opts.l1_lambda * l1_norm(&params.unary_weights);

    for iter in 1..=opts.iters {
        let mut step = opts.step;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = Parameters {
                unary_weights: params
                    .unary_weights
                    .iter()
                    .zip(&grad.unary_weights)
                    .map(|(&w, &g)| soft_threshold(w - step * g, step * opts.l1_lambda))
                    .collect(),
                table_params: params
                    .table_params
                    .iter()
                    .zip(&grad.table_params)
                    .map(|(p, g)| p.iter().zip(g).map(|(&v, &gv)| v - step * gv).collect())
                    .collect(),
            };
            let (cand_nll, cand_grad) = nll_and_grad(&candidate, structure, data)?;
            let cand_obj = cand_nll + opts.l1_lambda * l1_norm(&candidate.unary_weights);
            if cand_obj.is_finite() && cand_obj <= obj {
                params = candidate;
                nll = cand_nll;
                grad = cand_grad;
                obj = cand_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if !nll.is_finite() {
                return Err(Error::Divergence {
                    iter,
                    reason: "nll is not finite and backtracking cannot recover".into(),
                });
            }
            break; // no descent direction at any step size: converged
        }
    }
    Ok(params)
}

/// A bag of instances with a binary label.
#[derive(Debug, Clone)]
pub struct Bag {
    pub features: Vec<Vec<f64>>,
    pub label: bool,
}

impl Bag {
    pub fn new(features: Vec<Vec<f64>>, label: bool) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidArgument("bag has no instances".into()));
        }
        let p = features[0].len();
        if features.iter().any(|f| f.len() != p) {
            return Err(Error::InvalidArgument(
                "bag instances have inconsistent feature dimensions".into(),
            ));
        }
        Ok(Bag { features, label })
    }

    pub fn num_instances(&self) -> usize {
        self.features.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0].len()
    }
}

struct LabelInference {
    log_z: f64,
    marginals: Vec<f64>,
    root_dist: Option<CountDistribution>,
}

fn bag_label_inference(
    bag: &Bag,
    weights: &[f64],
    table: &CardinalityTable,
) -> Result<LabelInference> {
    let m = bag.num_instances();
    let unary: Vec<[f64; 2]> = bag
        .features
        .iter()
        .map(|x| {
            let theta: f64 = x.iter().zip(weights).map(|(a, b)| a * b).sum();
            [0.0, theta]
        })
        .collect();
    let model = RCModel::standard(unary, table.clone())?;
    match marginals(&model, Backend::Auto) {
        Ok(inf) => {
            let root = model.tree().root();
            let root_dist = if m == 1 {
                Some(count_marginal(&model, root)?)
            } else {
                inf.count_marginals[root].clone()
            };
            Ok(LabelInference {
                log_z: inf.log_z,
                marginals: inf.leaf_marginals,
                root_dist,
            })
        }
        Err(Error::ZeroMass { .. }) => Ok(LabelInference {
            log_z: f64::NEG_INFINITY,
            marginals: vec![0.0; m],
            root_dist: None,
        }),
        Err(e) => Err(e),
    }
}

/// Log-likelihood of a bag's label and its gradient with respect to the
/// instance-level weights.
///
/// The label likelihood is `Z_t / (Z_0 + Z_1)` where `Z_t` is the partition
/// value of the bag model under cardinality table `f_t`; two inference calls
/// supply everything needed.
pub fn mil_loglik_and_grad(
    bag: &Bag,
    weights: &[f64],
    f0: &CardinalityTable,
    f1: &CardinalityTable,
) -> Result<(f64, Vec<f64>)> {
    let m = bag.num_instances();
    let p = bag.feature_dim();
    if weights.len() != p {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {p}-dimensional features",
            weights.len()
        )));
    }
    if f0.n() != m || f1.n() != m {
        return Err(Error::InvalidArgument(format!(
            "label tables cover {} and {} variables but the bag has {m} instances",
            f0.n(),
            f1.n()
        )));
    }
    let inf0 = bag_label_inference(bag, weights, f0)?;
    let inf1 = bag_label_inference(bag, weights, f1)?;
    let log_norm = log_add(inf0.log_z, inf1.log_z);
    if log_norm == f64::NEG_INFINITY {
        return Err(Error::MilZeroMass);
    }
    let post = [(inf0.log_z - log_norm).exp(), (inf1.log_z - log_norm).exp()];
    let (own, other, own_post) = if bag.label {
        (&inf1, &inf0, post[1])
    } else {
        (&inf0, &inf1, post[0])
    };
    let loglik = if bag.label {
        inf1.log_z - log_norm
    } else {
        inf0.log_z - log_norm
    };
    if loglik == f64::NEG_INFINITY {
        // The observed label is impossible; the gradient is undefined there.
        return Ok((f64::NEG_INFINITY, vec![0.0; p]));
    }
    let other_post = 1.0 - own_post;
    let mut grad = vec![0.0; p];
    for (d, x) in bag.features.iter().enumerate() {
        // E_label[y_d] - sum_t P(t | bag) E_t[y_d]
        let blended = own_post * own.marginals[d] + other_post * other.marginals[d];
        let coeff = own.marginals[d] - blended;
        for (g, &xj) in grad.iter_mut().zip(x) {
            *g += coeff * xj;
        }
    }
    Ok((loglik, grad))
}

/// Expected number of active instances in the bag conditioned on a positive
/// label: the mean of the root count distribution under `f1`.
pub fn expected_positive_count(
    bag: &Bag,
    weights: &[f64],
    f0: &CardinalityTable,
    f1: &CardinalityTable,
) -> Result<f64> {
    let m = bag.num_instances();
    if f0.n() != m || f1.n() != m {
        return Err(Error::InvalidArgument(format!(
            "label tables cover {} and {} variables but the bag has {m} instances",
            f0.n(),
            f1.n()
        )));
    }
    if weights.len() != bag.feature_dim() {
        return Err(Error::InvalidArgument(
            "weight vector does not match the feature dimension".into(),
        ));
    }
    let inf1 = bag_label_inference(bag, weights, f1)?;
    match inf1.root_dist {
        Some(dist) => Ok(dist.mean()),
        None => Err(Error::MilZeroMass),
    }
}

/// Cardinality-table family for MIL, instantiated per bag size.
#[derive(Debug, Clone, Copy)]
pub enum MilTables {
    NoisyOr { eps: f64, lam: f64 },
    Normal { mu: f64, sigma: f64 },
}

impl MilTables {
    pub fn tables(&self, m: usize) -> Result<(CardinalityTable, CardinalityTable)> {
        match *self {
            MilTables::NoisyOr { eps, lam } => Ok((
                crate::model::noisy_or_table(m, eps, lam, false)?,
                crate::model::noisy_or_table(m, eps, lam, true)?,
            )),
            MilTables::Normal { mu, sigma } => Ok((
                crate::model::normal_table(m, mu, sigma, false)?,
                crate::model::normal_table(m, mu, sigma, true)?,
            )),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MilFitOptions {
    pub step: f64,
    pub iters: usize,
}

impl Default for MilFitOptions {
    fn default() -> Self {
        MilFitOptions {
            step: 1.0,
            iters: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MilFit {
    pub weights: Vec<f64>,
    pub mean_loglik: f64,
}

fn mil_objective(bags: &[Bag], weights: &[f64], tables: &MilTables) -> Result<(f64, Vec<f64>)> {
    let per_bag: Vec<Result<(f64, Vec<f64>)>> = map_range(bags.len(), |i| {
        let (t0, t1) = tables.tables(bags[i].num_instances())?;
        mil_loglik_and_grad(&bags[i], weights, &t0, &t1)
    });
    let mut loglik = 0.0;
    let mut grad = vec![0.0; weights.len()];
    for r in per_bag {
        let (ll, g) = r?;
        loglik += ll;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    let n = bags.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loglik / n, grad))
}

/// Gradient ascent on the mean bag log-likelihood, with step halving on
/// non-improvement.
pub fn mil_fit(bags: &[Bag], tables: &MilTables, opts: &MilFitOptions) -> Result<MilFit> {
    if bags.is_empty() {
        return Err(Error::InvalidArgument("no bags".into()));
    }
    let p = bags[0].feature_dim();
    if bags.iter().any(|b| b.feature_dim() != p) {
        return Err(Error::InvalidArgument(
            "bags have inconsistent feature dimensions".into(),
        ));
    }
    let mut weights = vec![0.0; p];
    let (mut loglik, mut grad) = mil_objective(bags, &weights, tables)?;
    if !loglik.is_finite() {
        return Err(Error::Divergence {
            iter: 0,
            reason: format!("initial mean log-likelihood is {loglik}"),
        });
    }
    for _ in 1..=opts.iters {
        let mut step = opts.step;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = weights
                .iter()
                .zip(&grad)
                .map(|(&w, &g)| w + step * g)
                .collect();
            let (cand_ll, cand_grad) = mil_objective(bags, &cand, tables)?;
            if cand_ll.is_finite() && cand_ll >= loglik {
                weights = cand;
                loglik = cand_ll;
                grad = cand_grad;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(MilFit {
        weights,
        mean_loglik: loglik,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterMode {
    /// Merge variables that often take the same value.
    Adaptive,
    /// Negate the similarities first (a deliberate worst case).
    Anti,
}

impl std::str::FromStr for ClusterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(ClusterMode::Adaptive),
            "anti" => Ok(ClusterMode::Anti),
            other => Err(Error::InvalidArgument(format!(
                "unknown clustering mode {other:?} (expected adaptive or anti)"
            ))),
        }
    }
}

/// Average-linkage agglomerative clustering on the pairwise agreement rate
/// `s(d, d') = mean_n [y_nd == y_nd']`, returning the merge tree. Ties break
/// towards the lexicographically smallest pair of cluster anchors, so the
/// result is a deterministic function of the data.
pub fn agglomerative_structure(data: &Dataset, mode: ClusterMode) -> Result<TreeSpec> {
    let d = data.width();
    if d < 2 {
        return Err(Error::InvalidArgument(
            "clustering needs at least two variables".into(),
        ));
    }
    if data.len() < 2 {
        return Err(Error::InvalidArgument(
            "clustering needs at least two examples".into(),
        ));
    }
    let n = data.len() as f64;
    let sign = match mode {
        ClusterMode::Adaptive => 1.0,
        ClusterMode::Anti => -1.0,
    };

    // Similarities between active clusters, indexed by cluster id. Cluster
    // ids double as node ids of the output tree.
    let mut sim: Vec<Vec<f64>> = vec![vec![0.0; 2 * d - 1]; 2 * d - 1];
    for a in 0..d {
        for b in (a + 1)..d {
            let agree = data.rows().iter().filter(|r| r[a] == r[b]).count() as f64 / n;
            sim[a][b] = sign * agree;
            sim[b][a] = sign * agree;
        }
    }

    let mut nodes: Vec<TreeNode> = (0..d).map(TreeNode::leaf).collect();
    struct Cluster {
        node: usize,
        size: usize,
        anchor: usize, // smallest variable index inside
    }
    let mut active: Vec<Cluster> = (0..d)
        .map(|v| Cluster {
            node: v,
            size: 1,
            anchor: v,
        })
        .collect();

    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..active.len() {
            for j in (i + 1)..active.len() {
                let s = sim[active[i].node][active[j].node];
                let (lo, hi) = (
                    active[i].anchor.min(active[j].anchor),
                    active[i].anchor.max(active[j].anchor),
                );
                let better = match best {
                    None => true,
                    Some((bs, bi, bj)) => {
                        let (blo, bhi) = (
                            active[bi].anchor.min(active[bj].anchor),
                            active[bi].anchor.max(active[bj].anchor),
                        );
                        s > bs || (s == bs && (lo, hi) < (blo, bhi))
                    }
                };
                if better {
                    best = Some((s, i, j));
                }
            }
        }
        let (_, i, j) = best.unwrap();
        let (i, j) = (i.min(j), i.max(j));
        let cj = active.swap_remove(j);
        let ci = active.swap_remove(i);
        let (first, second) = if ci.anchor < cj.anchor {
            (&ci, &cj)
        } else {
            (&cj, &ci)
        };
        nodes.push(TreeNode::internal(first.node, second.node));
        let new_node = nodes.len() - 1;

        // Average linkage via Lance-Williams.
        let (wa, wb) = (ci.size as f64, cj.size as f64);
        for other in &active {
            let s = (wa * sim[ci.node][other.node] + wb * sim[cj.node][other.node]) / (wa + wb);
            sim[new_node][other.node] = s;
            sim[other.node][new_node] = s;
        }
        active.push(Cluster {
            node: new_node,
            size: ci.size + cj.size,
            anchor: ci.anchor.min(cj.anchor),
        });
    }
    let root = active[0].node;
    TreeSpec::new(nodes, root)
}

/// Root-mean-squared count-distribution error, averaged per subset size.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeRmse {
    pub subset_size: usize,
    pub mean_rmse: f64,
    pub num_subsets: usize,
}

/// Compare the model's count distributions against the data's empirical
/// count histograms on every node of `eval_tree`, grouped by subset size.
///
/// Nodes whose leaf set matches a node of the model tree use the exact count
/// marginal; the rest are estimated from `num_samples` exact joint samples.
pub fn count_statistics_error(
    model: &RCModel,
    data: &Dataset,
    eval_tree: &TreeSpec,
    num_samples: usize,
    seed: u64,
) -> Result<Vec<SizeRmse>> {
    if eval_tree.num_vars() != model.num_vars() || data.width() != model.num_vars() {
        return Err(Error::InvalidArgument(
            "model, data and evaluation tree must agree on the variable count".into(),
        ));
    }
    let inference = marginals(model, Backend::Auto)?;
    let model_sets = model.tree().leaf_sets();
    let mut aligned: HashMap<&[usize], usize> = HashMap::new();
    for (id, s) in model_sets.iter().enumerate() {
        aligned.insert(s.as_slice(), id);
    }

    let eval_sets = eval_tree.leaf_sets();
    let needs_samples = eval_sets
        .iter()
        .any(|s| !aligned.contains_key(s.as_slice()));
    let samples = if needs_samples {
        Some(sample(model, seed, num_samples)?)
    } else {
        None
    };

    let mut by_size: HashMap<usize, (f64, usize)> = HashMap::new();
    for set in &eval_sets {
        let model_dist: Vec<f64> = match aligned.get(set.as_slice()) {
            Some(&id) => match &inference.count_marginals[id] {
                Some(dist) => dist.probs.clone(),
                None => {
                    let p = inference.leaf_marginals[model.tree().node(id).var.unwrap()];
                    vec![1.0 - p, p]
                }
            },
            None => {
                let samples = samples.as_ref().unwrap();
                let mut hist = vec![0.0; set.len() + 1];
                for s in samples {
                    let c: usize = set.iter().map(|&v| s[v] as usize).sum();
                    hist[c] += 1.0;
                }
                let total = samples.len() as f64;
                hist.iter_mut().for_each(|h| *h /= total);
                hist
            }
        };
        let empirical = data.count_histogram(set);
        let mse: f64 = model_dist
            .iter()
            .zip(&empirical)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / model_dist.len() as f64;
        let entry = by_size.entry(set.len()).or_insert((0.0, 0));
        entry.0 += mse.sqrt();
        entry.1 += 1;
    }

    let mut out: Vec<SizeRmse> = by_size
        .into_iter()
        .map(|(size, (total, count))| SizeRmse {
            subset_size: size,
            mean_rmse: total / count as f64,
            num_subsets: count,
        })
        .collect();
    out.sort_by_key(|r| r.subset_size);
    Ok(out)
}

/// Gibbs-sample a dataset from a 2D Ising model with uniform coupling and
/// zero field (open boundaries). Every output row is an independent chain
/// initialized uniformly and swept `sweeps` times in raster order; rows are
/// deterministic functions of `(seed, row index)`.
pub fn ising_gibbs_generate(
    height: usize,
    width: usize,
    coupling: f64,
    num_samples: usize,
    sweeps: usize,
    seed: u64,
) -> Result<Dataset> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    if sweeps == 0 {
        return Err(Error::InvalidArgument("sweeps must be >= 1".into()));
    }
    if num_samples == 0 {
        return Err(Error::InvalidArgument("num_samples must be >= 1".into()));
    }
    let rows = map_range(num_samples, |chain| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chain as u64);
        let mut spin: Vec<i8> = (0..height * width)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        for _ in 0..sweeps {
            for r in 0..height {
                for c in 0..width {
                    let mut field = 0i32;
                    if r > 0 {
                        field += spin[(r - 1) * width + c] as i32;
                    }
                    if r + 1 < height {
                        field += spin[(r + 1) * width + c] as i32;
                    }
                    if c > 0 {
                        field += spin[r * width + c - 1] as i32;
                    }
                    if c + 1 < width {
                        field += spin[r * width + c + 1] as i32;
                    }
                    let p_up = sigmoid(2.0 * coupling * field as f64);
                    spin[r * width + c] = if rng.random::<f64>() < p_up { 1 } else { -1 };
                }
            }
        }
        spin.iter().map(|&s| (s > 0) as u8).collect::<Vec<u8>>()
    });
    Dataset::new(rows)
}
