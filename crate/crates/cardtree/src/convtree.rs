//! The convolution-tree inference engine.
//!
//! Count variables are attached to the internal nodes of the model tree; a
//! parent count is the sum of its children's counts, so sum-product messages
//! over counts are 1D convolutions (upward) and correlations (downward).
//! With balanced trees and the FFT kernel a full marginal computation costs
//! O(D log^2 D) time and O(D log D) space.
//!
//! Every message is renormalized to sum one, with the normalizer accumulated
//! in a log-domain scale factor, so arbitrarily large or small potentials are
//! handled without overflow.

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{balanced_tree, CardinalityTable, RCModel};
use crate::parallel::map_range;

/// Convolution kernel selection.
///
/// `Auto` uses the direct kernel for short operands and the FFT kernel once
/// both operands reach [`FFT_THRESHOLD`]; `Fft` and `Naive` force one kernel,
/// which is mainly useful for equivalence testing and benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Auto,
    Fft,
    Naive,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Backend::Auto),
            "fft" => Ok(Backend::Fft),
            "naive" => Ok(Backend::Naive),
            other => Err(Error::InvalidArgument(format!(
                "unknown backend {other:?} (expected auto, fft or naive)"
            ))),
        }
    }
}

/// Below this operand length the direct O(nm) kernel beats the FFT.
pub const FFT_THRESHOLD: usize = 64;

/// Magnitudes below `max * FLUSH_RELATIVE` after an FFT are rounding noise
/// and are flushed to zero so they cannot create spurious support.
const FLUSH_RELATIVE: f64 = 1e-15;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn convolve_naive(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Clamp FFT rounding noise: negatives and tiny magnitudes become exact zeros.
fn cleanup_fft(out: &mut [f64]) {
    let max = out.iter().copied().fold(0.0f64, f64::max);
    let floor = max * FLUSH_RELATIVE;
    for x in out.iter_mut() {
        if *x < floor {
            *x = 0.0;
        }
    }
}

fn convolve_fft_raw(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let mut fa: Vec<Complex<f64>> = Vec::with_capacity(size);
    fa.extend(a.iter().map(|&x| Complex::new(x, 0.0)));
    fa.resize(size, Complex::new(0.0, 0.0));
    let mut fb: Vec<Complex<f64>> = Vec::with_capacity(size);
    fb.extend(b.iter().map(|&x| Complex::new(x, 0.0)));
    fb.resize(size, Complex::new(0.0, 0.0));

    PLANNER.with(|p| {
        let fwd = p.borrow_mut().plan_fft_forward(size);
        fwd.process(&mut fa);
        fwd.process(&mut fb);
        for (x, y) in fa.iter_mut().zip(fb.iter()) {
            *x *= *y;
        }
        let inv = p.borrow_mut().plan_fft_inverse(size);
        inv.process(&mut fa);
    });

    let scale = 1.0 / size as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

fn use_fft(backend: Backend, a_len: usize, b_len: usize) -> bool {
    match backend {
        Backend::Fft => true,
        Backend::Naive => false,
        Backend::Auto => a_len.min(b_len) >= FFT_THRESHOLD,
    }
}

/// Full discrete convolution: `out[k] = sum_{i+j=k} a[i] * b[j]`, of length
/// `|a| + |b| - 1`.
pub fn convolve(a: &[f64], b: &[f64], backend: Backend) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "convolution operands must be nonempty".into(),
        ));
    }
    if use_fft(backend, a.len(), b.len()) {
        let mut out = convolve_fft_raw(a, b);
        cleanup_fft(&mut out);
        Ok(out)
    } else {
        Ok(convolve_naive(a, b))
    }
}

/// Valid cross-correlation: `out[i] = sum_j parent[i + j] * sibling[j]`, of
/// length `|parent| - |sibling| + 1`. Equals `convolve(parent,
/// reverse(sibling))` restricted to the offsets where the operands fully
/// overlap.
pub fn correlate(parent: &[f64], sibling: &[f64], backend: Backend) -> Result<Vec<f64>> {
    if parent.is_empty() || sibling.is_empty() {
        return Err(Error::InvalidArgument(
            "correlation operands must be nonempty".into(),
        ));
    }
    if sibling.len() > parent.len() {
        return Err(Error::InvalidArgument(format!(
            "sibling message (length {}) longer than parent message (length {})",
            sibling.len(),
            parent.len()
        )));
    }
    if use_fft(backend, parent.len(), sibling.len()) {
        let rev: Vec<f64> = sibling.iter().rev().copied().collect();
        let full = convolve_fft_raw(parent, &rev);
        let mut out = full[sibling.len() - 1..parent.len()].to_vec();
        cleanup_fft(&mut out);
        Ok(out)
    } else {
        let n = parent.len() - sibling.len() + 1;
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &s) in sibling.iter().enumerate() {
                acc += parent[i + j] * s;
            }
            *o = acc;
        }
        Ok(out)
    }
}

/// A sum-product message over a count variable: nonnegative weights that sum
/// to one, plus the accumulated normalizer in the log domain. The message
/// represents `exp(log_scale) * weights`.
#[derive(Debug, Clone)]
pub struct MessageVector {
    pub weights: Vec<f64>,
    pub log_scale: f64,
}

impl MessageVector {
    /// Normalize `weights`, folding the normalizer and `log_extra` into the
    /// scale. Returns `None` when the weights carry no mass.
    pub fn normalized(mut weights: Vec<f64>, log_extra: f64) -> Option<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return None;
        }
        for w in &mut weights {
            *w /= sum;
        }
        Some(MessageVector {
            weights,
            log_scale: log_extra + sum.ln(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Multiply a weight vector by `exp(log_f - max_finite(log_f))` entrywise;
/// returns the shifted weights and the shift.
fn apply_table(weights: &[f64], table: &CardinalityTable) -> (Vec<f64>, f64) {
    let shift = table.max_finite();
    let out = weights
        .iter()
        .zip(table.log_f())
        .map(|(&w, &lf)| {
            if lf == f64::NEG_INFINITY {
                0.0
            } else {
                w * (lf - shift).exp()
            }
        })
        .collect();
    (out, shift)
}

/// Result of the upward (inward) pass: one message per node, giving the
/// unnormalized count distribution of the node's subtree with the node's own
/// table already multiplied in. Log scales accumulate over subtrees, so the
/// root's scale is the log-partition value.
#[derive(Debug, Clone)]
pub struct UpState {
    messages: Vec<MessageVector>,
    root: usize,
}

impl UpState {
    pub fn message(&self, node: usize) -> &MessageVector {
        &self.messages[node]
    }

    /// Log of the total unnormalized mass.
    pub fn log_z(&self) -> f64 {
        self.messages[self.root].log_scale
    }

    /// Count distribution at the root (the belief over the global count).
    pub fn root_distribution(&self) -> CountDistribution {
        CountDistribution {
            probs: self.messages[self.root].weights.clone(),
        }
    }
}

pub fn upward_pass(model: &RCModel, backend: Backend) -> Result<UpState> {
    let tree = model.tree();
    let mut messages: Vec<Option<MessageVector>> = vec![None; tree.num_nodes()];
    for &id in tree.postorder() {
        let msg = match tree.children(id) {
            None => {
                let d = tree.node(id).var.unwrap();
                let [l0, l1] = model.unary()[d];
                let m = l0.max(l1);
                if m == f64::NEG_INFINITY {
                    None
                } else {
                    MessageVector::normalized(vec![(l0 - m).exp(), (l1 - m).exp()], m)
                }
            }
            Some((l, r)) => {
                let left = messages[l].as_ref().unwrap();
                let right = messages[r].as_ref().unwrap();
                let conv = convolve(&left.weights, &right.weights, backend)?;
                let scale = left.log_scale + right.log_scale;
                match model.table(id) {
                    Some(t) => {
                        let (w, shift) = apply_table(&conv, t);
                        MessageVector::normalized(w, scale + shift)
                    }
                    None => MessageVector::normalized(conv, scale),
                }
            }
        };
        messages[id] = Some(msg.ok_or(Error::ZeroMass { node: id })?);
    }
    Ok(UpState {
        messages: messages.into_iter().map(Option::unwrap).collect(),
        root: tree.root(),
    })
}

/// Log-partition value of the model.
pub fn log_partition(model: &RCModel) -> Result<f64> {
    Ok(upward_pass(model, Backend::Auto)?.log_z())
}

/// Downward (outward) messages: for each node, the message arriving from the
/// rest of the model, excluding the node's own table. Weights are normalized;
/// scales are not meaningful and set to zero.
fn downward_pass(model: &RCModel, up: &UpState, backend: Backend) -> Result<Vec<MessageVector>> {
    let tree = model.tree();
    let mut down: Vec<Option<MessageVector>> = vec![None; tree.num_nodes()];
    let root = tree.root();
    let rlen = tree.leaf_count(root) + 1;
    down[root] = Some(MessageVector {
        weights: vec![1.0 / rlen as f64; rlen],
        log_scale: 0.0,
    });
    for &id in tree.postorder().iter().rev() {
        let Some((l, r)) = tree.children(id) else {
            continue;
        };
        // Fold this node's table into its downward message before splitting
        // it towards the children.
        let delta = down[id].as_ref().unwrap();
        let with_table = match model.table(id) {
            Some(t) => {
                let (w, _) = apply_table(&delta.weights, t);
                MessageVector::normalized(w, 0.0).ok_or(Error::ZeroMass { node: id })?
            }
            None => delta.clone(),
        };
        let left_up = up.message(l);
        let right_up = up.message(r);
        let to_left = correlate(&with_table.weights, &right_up.weights, backend)?;
        let to_right = correlate(&with_table.weights, &left_up.weights, backend)?;
        down[l] = Some(MessageVector::normalized(to_left, 0.0).ok_or(Error::ZeroMass { node: l })?);
        down[r] =
            Some(MessageVector::normalized(to_right, 0.0).ok_or(Error::ZeroMass { node: r })?);
    }
    Ok(down.into_iter().map(Option::unwrap).collect())
}

/// Marginal distribution of a count variable.
#[derive(Debug, Clone)]
pub struct CountDistribution {
    pub probs: Vec<f64>,
}

impl CountDistribution {
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(c, &p)| c as f64 * p)
            .sum()
    }

    /// Total variation distance to another distribution over the same range.
    pub fn tv_distance(&self, other: &CountDistribution) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Full inference output: per-variable activation marginals, per-internal-node
/// count distributions (indexed by node id, `None` at leaves), and the
/// log-partition value.
#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub leaf_marginals: Vec<f64>,
    pub count_marginals: Vec<Option<CountDistribution>>,
    pub log_z: f64,
}

/// Exact marginals for every variable and every internal count variable, via
/// one upward and one downward pass.
pub fn marginals(model: &RCModel, backend: Backend) -> Result<InferenceResult> {
    let up = upward_pass(model, backend)?;
    let down = downward_pass(model, &up, backend)?;
    let tree = model.tree();

    let mut leaf_marginals = vec![0.0; model.num_vars()];
    let mut count_marginals: Vec<Option<CountDistribution>> = vec![None; tree.num_nodes()];
    for id in 0..tree.num_nodes() {
        let belief: Vec<f64> = up
            .message(id)
            .weights
            .iter()
            .zip(&down[id].weights)
            .map(|(&u, &d)| u * d)
            .collect();
        let sum: f64 = belief.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::ZeroMass { node: id });
        }
        match tree.node(id).var {
            Some(d) => leaf_marginals[d] = belief[1] / sum,
            None => {
                count_marginals[id] = Some(CountDistribution {
                    probs: belief.iter().map(|&b| b / sum).collect(),
                });
            }
        }
    }
    Ok(InferenceResult {
        leaf_marginals,
        count_marginals,
        log_z: up.log_z(),
    })
}

/// Distribution of the active count under node `node_id` (for a leaf, the
/// Bernoulli marginal of its variable).
pub fn count_marginal(model: &RCModel, node_id: usize) -> Result<CountDistribution> {
    if node_id >= model.tree().num_nodes() {
        return Err(Error::UnknownNode(node_id));
    }
    let result = marginals(model, Backend::Auto)?;
    match &result.count_marginals[node_id] {
        Some(dist) => Ok(dist.clone()),
        None => {
            let d = model.tree().node(node_id).var.unwrap();
            let p = result.leaf_marginals[d];
            Ok(CountDistribution {
                probs: vec![1.0 - p, p],
            })
        }
    }
}

/// Inverse-CDF draw from nonnegative weights with total mass `total`.
fn draw_weighted(weights: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if acc >= target {
                return i;
            }
        }
    }
    last
}

fn rng_for_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw exact iid joint samples.
///
/// The root count is drawn from the root belief; counts are then split
/// recursively, drawing a child pair from the renormalized diagonal of the
/// parent-count-conditioned belief. Each sample uses its own counter-derived
/// RNG stream, so output is deterministic for a given seed regardless of
/// thread count.
pub fn sample(model: &RCModel, seed: u64, num_samples: usize) -> Result<Vec<Vec<u8>>> {
    let up = upward_pass(model, Backend::Auto)?;
    let tree = model.tree();
    let root = tree.root();
    Ok(map_range(num_samples, |idx| {
        let mut rng = rng_for_stream(seed, idx as u64);
        let mut y = vec![0u8; model.num_vars()];
        let root_msg = up.message(root);
        let z0 = draw_weighted(&root_msg.weights, 1.0, rng.random::<f64>());
        let mut stack = vec![(root, z0)];
        while let Some((id, z)) = stack.pop() {
            match tree.children(id) {
                None => y[tree.node(id).var.unwrap()] = z as u8,
                Some((l, r)) => {
                    let lw = &up.message(l).weights;
                    let rw = &up.message(r).weights;
                    let lo = z.saturating_sub(rw.len() - 1);
                    let hi = (lw.len() - 1).min(z);
                    debug_assert!(lo <= hi);
                    let diag: Vec<f64> = (lo..=hi).map(|i| lw[i] * rw[z - i]).collect();
                    let total: f64 = diag.iter().sum();
                    assert!(
                        total > 0.0,
                        "zero-probability diagonal at node {id} for count {z}"
                    );
                    let zl = lo + draw_weighted(&diag, total, rng.random::<f64>());
                    stack.push((l, zl));
                    stack.push((r, z - zl));
                }
            }
        }
        y
    }))
}

/// All outgoing messages of one cardinality factor.
///
/// `incoming[d]` is the (unnormalized, nonnegative) message from variable `d`
/// into the factor; the result is the factor-to-variable message for every
/// variable, normalized. Computed with one upward and one downward pass over
/// a balanced tree whose leaf potentials are the incoming messages, so the
/// receiving variable's own message is excluded by construction rather than
/// by division.
pub fn factor_messages(
    incoming: &[[f64; 2]],
    table: &CardinalityTable,
    backend: Backend,
) -> Result<Vec<[f64; 2]>> {
    let d = incoming.len();
    if d != table.n() {
        return Err(Error::InvalidArgument(format!(
            "{} incoming messages for a table over {} variables",
            d,
            table.n()
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument(
            "factor must touch at least one variable".into(),
        ));
    }
    if d == 1 {
        let (w, _) = apply_table(&[1.0, 1.0], table);
        let m = MessageVector::normalized(w, 0.0).ok_or(Error::ZeroMass { node: 0 })?;
        return Ok(vec![[m.weights[0], m.weights[1]]]);
    }

    let unary: Vec<[f64; 2]> = incoming.iter().map(|m| [m[0].ln(), m[1].ln()]).collect();
    let tree = balanced_tree(d)?;
    let mut tables = vec![None; tree.num_nodes()];
    tables[tree.root()] = Some(table.clone());
    let model = RCModel::new(unary, tree, tables)?;

    let up = upward_pass(&model, backend)?;
    let down = downward_pass(&model, &up, backend)?;
    Ok((0..d)
        .map(|v| {
            let leaf = model.tree().leaf_of_var(v);
            [down[leaf].weights[0], down[leaf].weights[1]]
        })
        .collect())
}
