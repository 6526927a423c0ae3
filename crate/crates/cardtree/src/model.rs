//! Model types: cardinality tables, binary trees over variables, nested
//! subset families, and the recursive cardinality model itself.
//!
//! A recursive cardinality model over `D` binary variables multiplies unary
//! potentials `exp(unary[d][y_d])` with count potentials `exp(log_f[c])`
//! attached to nodes of a binary tree, where `c` is the number of active
//! variables below the node. All potentials are stored in base-e logs;
//! `-inf` entries mean "forbidden".

use crate::error::{Error, Result};
use crate::numeric::ln_one_minus_exp;

/// Log-domain potential over the active-variable count of a subset.
///
/// `log_f[c]` applies when exactly `c` of the `n` covered variables are on,
/// so the vector has length `n + 1`. Entries may be `-inf`; at least one
/// entry must be finite or the model would have zero mass.
#[derive(Debug, Clone, PartialEq)]
pub struct CardinalityTable {
    log_f: Vec<f64>,
}

impl CardinalityTable {
    pub fn new(log_f: Vec<f64>) -> Result<Self> {
        if log_f.is_empty() {
            return Err(Error::InvalidArgument(
                "cardinality table must have at least one entry".into(),
            ));
        }
        let mut any_finite = false;
        for (c, &v) in log_f.iter().enumerate() {
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::InvalidArgument(format!(
                    "cardinality table entry {c} is {v}; entries must be finite or -inf"
                )));
            }
            any_finite |= v.is_finite();
        }
        if !any_finite {
            return Err(Error::InvalidArgument(
                "cardinality table has no finite entry; the model would have zero mass".into(),
            ));
        }
        Ok(CardinalityTable { log_f })
    }

    /// Number of variables the table covers.
    pub fn n(&self) -> usize {
        self.log_f.len() - 1
    }

    pub fn log_f(&self) -> &[f64] {
        &self.log_f
    }

    /// All-zero table (no constraint).
    pub fn uniform(n: usize) -> Self {
        CardinalityTable {
            log_f: vec![0.0; n + 1],
        }
    }

    pub fn max_finite(&self) -> f64 {
        self.log_f.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Noisy-OR cardinality table: with activation strength `lam` shared by all
/// causes and leak `eps`, `P(t=1 | c active) = 1 - (1-eps)(1-lam)^c`. The
/// table for label `t` holds the log of that probability (or its complement).
pub fn noisy_or_table(n: usize, eps: f64, lam: f64, positive: bool) -> Result<CardinalityTable> {
    if !(0.0..=1.0).contains(&eps) || !(0.0..=1.0).contains(&lam) {
        return Err(Error::InvalidArgument(format!(
            "noisy-OR parameters must be probabilities, got eps={eps}, lam={lam}"
        )));
    }
    let log_off = (1.0 - eps).ln(); // ln(1-eps), -inf when eps = 1
    let log_keep = (1.0 - lam).ln(); // ln(1-lam), -inf when lam = 1
    let log_f = (0..=n)
        .map(|c| {
            // a = ln((1-eps)(1-lam)^c), the log probability of t = 0
            let a = if c == 0 {
                log_off
            } else if log_keep == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                log_off + c as f64 * log_keep
            };
            if positive {
                ln_one_minus_exp(a.min(0.0))
            } else {
                a
            }
        })
        .collect();
    CardinalityTable::new(log_f)
}

/// Squared-deviation count preference centered at `mu * n` for the positive
/// label and at zero for the negative label.
pub fn normal_table(n: usize, mu: f64, sigma: f64, positive: bool) -> Result<CardinalityTable> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "normal table needs at least one variable".into(),
        ));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let target = if positive { mu } else { 0.0 };
    let log_f = (0..=n)
        .map(|c| {
            let dev = c as f64 / n as f64 - target;
            -(dev * dev) / (2.0 * sigma * sigma)
        })
        .collect();
    CardinalityTable::new(log_f)
}

/// Hard constraint: zero log-potential on `allowed` counts, `-inf` elsewhere.
pub fn hard_count_table(n: usize, allowed: &[usize]) -> Result<CardinalityTable> {
    if allowed.is_empty() {
        return Err(Error::InvalidArgument(
            "allowed count set must be nonempty".into(),
        ));
    }
    let mut log_f = vec![f64::NEG_INFINITY; n + 1];
    for &c in allowed {
        if c > n {
            return Err(Error::InvalidArgument(format!(
                "allowed count {c} exceeds subset size {n}"
            )));
        }
        log_f[c] = 0.0;
    }
    CardinalityTable::new(log_f)
}

/// One node of a [`TreeSpec`]. Leaves carry a variable index; internal nodes
/// carry exactly two children.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub children: Option<(usize, usize)>,
    pub var: Option<usize>,
}

impl TreeNode {
    pub fn leaf(var: usize) -> Self {
        TreeNode {
            children: None,
            var: Some(var),
        }
    }

    pub fn internal(left: usize, right: usize) -> Self {
        TreeNode {
            children: Some((left, right)),
            var: None,
        }
    }
}

/// A rooted binary tree with `D` leaves, one per variable. Node ids are
/// indices into the node list.
#[derive(Debug, Clone)]
pub struct TreeSpec {
    nodes: Vec<TreeNode>,
    root: usize,
    num_vars: usize,
    postorder: Vec<usize>,
    parent: Vec<Option<usize>>,
    leaf_counts: Vec<usize>,
    leaf_of_var: Vec<usize>,
}

impl TreeSpec {
    pub fn new(nodes: Vec<TreeNode>, root: usize) -> Result<Self> {
        let n = nodes.len();
        let name = |id: usize| format!("{id}");
        if root >= n {
            return Err(Error::InvalidTree {
                node: name(root),
                reason: "root id out of range".into(),
            });
        }
        for (id, node) in nodes.iter().enumerate() {
            match (node.children, node.var) {
                (Some((l, r)), None) => {
                    if l >= n || r >= n {
                        return Err(Error::InvalidTree {
                            node: name(id),
                            reason: format!("child id out of range ({l}, {r})"),
                        });
                    }
                    if l == r {
                        return Err(Error::InvalidTree {
                            node: name(id),
                            reason: "children must be distinct".into(),
                        });
                    }
                }
                (None, Some(_)) => {}
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidTree {
                        node: name(id),
                        reason: "node has both children and a variable".into(),
                    })
                }
                (None, None) => {
                    return Err(Error::InvalidTree {
                        node: name(id),
                        reason: "node has neither children nor a variable".into(),
                    })
                }
            }
        }

        // Walk from the root: every node must be visited exactly once.
        let mut parent = vec![None; n];
        let mut postorder = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        // (node, expanded)
        let mut stack = vec![(root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                postorder.push(id);
                continue;
            }
            if seen[id] {
                return Err(Error::InvalidTree {
                    node: name(id),
                    reason: "node is reachable along two paths (not a tree)".into(),
                });
            }
            seen[id] = true;
            stack.push((id, true));
            if let Some((l, r)) = nodes[id].children {
                parent[l] = Some(id);
                parent[r] = Some(id);
                stack.push((r, false));
                stack.push((l, false));
            }
        }
        if let Some(unused) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidTree {
                node: name(unused),
                reason: "node is not reachable from the root".into(),
            });
        }

        let mut leaf_counts = vec![0usize; n];
        let mut vars = Vec::new();
        for &id in &postorder {
            match nodes[id].children {
                Some((l, r)) => leaf_counts[id] = leaf_counts[l] + leaf_counts[r],
                None => {
                    leaf_counts[id] = 1;
                    vars.push((nodes[id].var.unwrap(), id));
                }
            }
        }
        let num_vars = vars.len();
        let mut leaf_of_var = vec![usize::MAX; num_vars];
        for &(v, id) in &vars {
            if v >= num_vars {
                return Err(Error::InvalidTree {
                    node: name(id),
                    reason: format!("leaf variable index {v} out of range for {num_vars} leaves"),
                });
            }
            if leaf_of_var[v] != usize::MAX {
                return Err(Error::InvalidTree {
                    node: name(id),
                    reason: format!("variable {v} is bound to two leaves"),
                });
            }
            leaf_of_var[v] = id;
        }

        Ok(TreeSpec {
            nodes,
            root,
            num_vars,
            postorder,
            parent,
            leaf_counts,
            leaf_of_var,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_none()
    }

    pub fn children(&self, id: usize) -> Option<(usize, usize)> {
        self.nodes[id].children
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.parent[id]
    }

    /// Number of leaves under `id`.
    pub fn leaf_count(&self, id: usize) -> usize {
        self.leaf_counts[id]
    }

    /// Children-before-parents visit order.
    pub fn postorder(&self) -> &[usize] {
        &self.postorder
    }

    pub fn leaf_of_var(&self, var: usize) -> usize {
        self.leaf_of_var[var]
    }

    /// Sorted variable indices under node `id`.
    pub fn leaf_vars(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.leaf_counts[id]);
        let mut stack = vec![id];
        while let Some(v) = stack.pop() {
            match self.nodes[v].children {
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => out.push(self.nodes[v].var.unwrap()),
            }
        }
        out.sort_unstable();
        out
    }

    /// Sorted leaf-variable set of every node, indexed by node id.
    pub fn leaf_sets(&self) -> Vec<Vec<usize>> {
        let mut sets: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for &id in &self.postorder {
            match self.nodes[id].children {
                Some((l, r)) => {
                    let mut s = Vec::with_capacity(self.leaf_counts[id]);
                    s.extend_from_slice(&sets[l]);
                    s.extend_from_slice(&sets[r]);
                    s.sort_unstable();
                    sets[id] = s;
                }
                None => sets[id] = vec![self.nodes[id].var.unwrap()],
            }
        }
        sets
    }

    /// Maximum root-to-leaf edge count.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for &id in self.postorder.iter().rev() {
            if let Some((l, r)) = self.nodes[id].children {
                depth[l] = depth[id] + 1;
                depth[r] = depth[id] + 1;
                max = max.max(depth[l]);
            }
        }
        max
    }
}

/// Items being stitched together by the balanced-fill construction: either a
/// fresh leaf or an already-built subtree with a known leaf count.
struct BuildItem {
    node: usize,
    leaves: usize,
    min_var: usize,
}

struct TreeBuilder {
    nodes: Vec<TreeNode>,
}

impl TreeBuilder {
    fn leaf(&mut self, var: usize) -> usize {
        self.nodes.push(TreeNode::leaf(var));
        self.nodes.len() - 1
    }

    fn join(&mut self, left: usize, right: usize) -> usize {
        self.nodes.push(TreeNode::internal(left, right));
        self.nodes.len() - 1
    }

    /// Combine items into a balanced binary subtree: split so the left side
    /// takes the ceiling half of the leaves, recursing on both sides.
    fn combine(&mut self, items: &[BuildItem]) -> usize {
        debug_assert!(!items.is_empty());
        if items.len() == 1 {
            return items[0].node;
        }
        let total: usize = items.iter().map(|it| it.leaves).sum();
        let want = total.div_ceil(2);
        let mut cum = 0;
        let mut split = items.len() - 1;
        for (i, it) in items.iter().enumerate() {
            cum += it.leaves;
            if cum >= want {
                split = (i + 1).min(items.len() - 1);
                break;
            }
        }
        let left = self.combine(&items[..split]);
        let right = self.combine(&items[split..]);
        self.join(left, right)
    }
}

/// Balanced binary tree over `num_vars` leaves (variable `d` at leaf `d`,
/// left subtree taking the ceiling half at every split). Depth is
/// `ceil(log2 D)`.
pub fn balanced_tree(num_vars: usize) -> Result<TreeSpec> {
    if num_vars == 0 {
        return Err(Error::InvalidArgument(
            "a tree needs at least one variable".into(),
        ));
    }
    let mut b = TreeBuilder { nodes: Vec::new() };
    let items: Vec<BuildItem> = (0..num_vars)
        .map(|d| BuildItem {
            node: b.leaf(d),
            leaves: 1,
            min_var: d,
        })
        .collect();
    let root = b.combine(&items);
    TreeSpec::new(b.nodes, root)
}

/// A family of variable subsets, the candidate scopes for count potentials.
#[derive(Debug, Clone)]
pub struct SubsetFamily {
    subsets: Vec<Vec<usize>>,
    num_vars: usize,
}

impl SubsetFamily {
    /// Subsets are sorted and checked: nonempty, indices in range, no
    /// duplicate members, no duplicate subsets.
    pub fn new(subsets: Vec<Vec<usize>>, num_vars: usize) -> Result<Self> {
        let mut normalized: Vec<Vec<usize>> = Vec::with_capacity(subsets.len());
        for mut s in subsets {
            if s.is_empty() {
                return Err(Error::InvalidArgument("empty subset in family".into()));
            }
            s.sort_unstable();
            for w in s.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::InvalidArgument(format!(
                        "subset {s:?} lists variable {} twice",
                        w[0]
                    )));
                }
            }
            if *s.last().unwrap() >= num_vars {
                return Err(Error::InvalidArgument(format!(
                    "subset {s:?} references variable {} but the model has {num_vars}",
                    s.last().unwrap()
                )));
            }
            normalized.push(s);
        }
        let mut sorted = normalized.clone();
        sorted.sort();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidArgument(format!(
                    "duplicate subset {:?} in family",
                    w[0]
                )));
            }
        }
        Ok(SubsetFamily {
            subsets: normalized,
            num_vars,
        })
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }
}

/// Relation between two sorted sets.
enum SetRelation {
    Disjoint,
    LeftInRight,
    RightInLeft,
    Equal,
    Crossing,
}

fn relate(a: &[usize], b: &[usize]) -> SetRelation {
    let mut i = 0;
    let mut j = 0;
    let mut common = 0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    if common == 0 {
        SetRelation::Disjoint
    } else if common == a.len() && common == b.len() {
        SetRelation::Equal
    } else if common == a.len() {
        SetRelation::LeftInRight
    } else if common == b.len() {
        SetRelation::RightInLeft
    } else {
        SetRelation::Crossing
    }
}

/// True iff every pair of subsets is disjoint or ordered by containment.
pub fn validate_nested(family: &SubsetFamily) -> bool {
    first_violation(family).is_none()
}

fn first_violation(family: &SubsetFamily) -> Option<(usize, usize)> {
    let subs = &family.subsets;
    for i in 0..subs.len() {
        for j in (i + 1)..subs.len() {
            if let SetRelation::Crossing = relate(&subs[i], &subs[j]) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Build a binary tree in which every family subset is the exact leaf set of
/// some node; returns the tree together with the node id of each subset (in
/// family order). Gaps in the laminar structure are filled with balanced
/// subtrees.
pub fn align_tree_with_nodes(family: &SubsetFamily) -> Result<(TreeSpec, Vec<usize>)> {
    if let Some((i, j)) = first_violation(family) {
        return Err(Error::NotNested {
            a: family.subsets[i].clone(),
            b: family.subsets[j].clone(),
        });
    }
    let num_vars = family.num_vars;
    let subs = &family.subsets;
    let k = subs.len();

    // Immediate parent of each subset: the smallest strict superset.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&i| subs[i].len());
    let mut parent_of: Vec<Option<usize>> = vec![None; k];
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if subs[j].len() == subs[i].len() {
                continue; // same size can only be equal, and duplicates are rejected
            }
            if matches!(relate(&subs[i], &subs[j]), SetRelation::LeftInRight) {
                parent_of[i] = Some(j);
                break;
            }
        }
    }

    // Innermost subset containing each variable, if any.
    let mut innermost: Vec<Option<usize>> = vec![None; num_vars];
    for &i in &order {
        for &v in &subs[i] {
            if innermost[v].is_none() {
                innermost[v] = Some(i);
            }
        }
    }

    let mut children_of: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut top_subsets: Vec<usize> = Vec::new();
    for (i, parent) in parent_of.iter().enumerate() {
        match parent {
            Some(p) => children_of[*p].push(i),
            None => top_subsets.push(i),
        }
    }
    let mut loose_vars: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut top_vars: Vec<usize> = Vec::new();
    for (v, inner) in innermost.iter().enumerate() {
        match inner {
            Some(i) => loose_vars[*i].push(v),
            None => top_vars.push(v),
        }
    }

    let mut b = TreeBuilder { nodes: Vec::new() };
    let mut node_of_subset = vec![usize::MAX; k];

    // Build subsets smallest-first so children exist before their parents.
    for &i in &order {
        let mut items: Vec<BuildItem> = Vec::new();
        for &c in &children_of[i] {
            items.push(BuildItem {
                node: node_of_subset[c],
                leaves: subs[c].len(),
                min_var: subs[c][0],
            });
        }
        for &v in &loose_vars[i] {
            items.push(BuildItem {
                node: b.leaf(v),
                leaves: 1,
                min_var: v,
            });
        }
        items.sort_by_key(|it| it.min_var);
        node_of_subset[i] = b.combine(&items);
    }

    let mut top_items: Vec<BuildItem> = top_subsets
        .iter()
        .map(|&i| BuildItem {
            node: node_of_subset[i],
            leaves: subs[i].len(),
            min_var: subs[i][0],
        })
        .collect();
    for &v in &top_vars {
        top_items.push(BuildItem {
            node: b.leaf(v),
            leaves: 1,
            min_var: v,
        });
    }
    top_items.sort_by_key(|it| it.min_var);
    if top_items.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot build a tree over zero variables".into(),
        ));
    }
    let root = b.combine(&top_items);
    let tree = TreeSpec::new(b.nodes, root)?;
    Ok((tree, node_of_subset))
}

/// [`align_tree_with_nodes`] without the subset-to-node map.
pub fn align_tree(family: &SubsetFamily) -> Result<TreeSpec> {
    align_tree_with_nodes(family).map(|(tree, _)| tree)
}

/// A recursive cardinality model: per-variable unary log-potentials plus
/// optional cardinality tables on tree nodes.
#[derive(Debug, Clone)]
pub struct RCModel {
    unary: Vec<[f64; 2]>,
    tree: TreeSpec,
    tables: Vec<Option<CardinalityTable>>,
    /// Table-bearing internal nodes with their sorted leaf variables.
    table_nodes: Vec<(usize, Vec<usize>)>,
}

impl RCModel {
    /// Validates shapes and folds any leaf table into the leaf's unary.
    pub fn new(
        unary: Vec<[f64; 2]>,
        tree: TreeSpec,
        mut tables: Vec<Option<CardinalityTable>>,
    ) -> Result<Self> {
        if unary.len() != tree.num_vars() {
            return Err(Error::InvalidArgument(format!(
                "{} unary potentials for a tree with {} leaves",
                unary.len(),
                tree.num_vars()
            )));
        }
        let mut unary = unary;
        for (d, u) in unary.iter().enumerate() {
            if u[0].is_nan() || u[1].is_nan() || u[0] == f64::INFINITY || u[1] == f64::INFINITY {
                return Err(Error::InvalidArgument(format!(
                    "unary potential for variable {d} must be finite or -inf, got {u:?}"
                )));
            }
        }
        if tables.len() != tree.num_nodes() {
            return Err(Error::InvalidArgument(format!(
                "{} table slots for a tree with {} nodes",
                tables.len(),
                tree.num_nodes()
            )));
        }
        for (id, t) in tables.iter().enumerate() {
            if let Some(t) = t {
                if t.n() != tree.leaf_count(id) {
                    return Err(Error::InvalidTree {
                        node: format!("{id}"),
                        reason: format!(
                            "table covers {} variables but the node has {} leaves",
                            t.n(),
                            tree.leaf_count(id)
                        ),
                    });
                }
            }
        }
        // Fold leaf tables into unaries.
        for (id, slot) in tables.iter_mut().enumerate() {
            if tree.is_leaf(id) {
                if let Some(t) = slot.take() {
                    let d = tree.node(id).var.unwrap();
                    unary[d][0] += t.log_f()[0];
                    unary[d][1] += t.log_f()[1];
                }
            }
        }
        let table_nodes = (0..tree.num_nodes())
            .filter(|&id| tables[id].is_some())
            .map(|id| (id, tree.leaf_vars(id)))
            .collect();
        Ok(RCModel {
            unary,
            tree,
            tables,
            table_nodes,
        })
    }

    /// Independent variables: balanced tree, no tables.
    pub fn independent(unary: Vec<[f64; 2]>) -> Result<Self> {
        let tree = balanced_tree(unary.len())?;
        let n = tree.num_nodes();
        RCModel::new(unary, tree, vec![None; n])
    }

    /// The standard cardinality model: one table over the full count, housed
    /// at the root of a balanced tree.
    pub fn standard(unary: Vec<[f64; 2]>, table: CardinalityTable) -> Result<Self> {
        let tree = balanced_tree(unary.len())?;
        let mut tables = vec![None; tree.num_nodes()];
        tables[tree.root()] = Some(table);
        RCModel::new(unary, tree, tables)
    }

    /// Build from a nested family of (subset, table) pairs; the tree is the
    /// aligned tree of the family with balanced fill.
    pub fn from_subsets(
        unary: Vec<[f64; 2]>,
        subsets: Vec<(Vec<usize>, CardinalityTable)>,
    ) -> Result<Self> {
        let (sets, tabs): (Vec<_>, Vec<_>) = subsets.into_iter().unzip();
        let family = SubsetFamily::new(sets, unary.len())?;
        let (tree, node_of_subset) = align_tree_with_nodes(&family)?;
        let mut tables = vec![None; tree.num_nodes()];
        for (i, t) in tabs.into_iter().enumerate() {
            tables[node_of_subset[i]] = Some(t);
        }
        RCModel::new(unary, tree, tables)
    }

    pub fn num_vars(&self) -> usize {
        self.unary.len()
    }

    pub fn tree(&self) -> &TreeSpec {
        &self.tree
    }

    pub fn unary(&self) -> &[[f64; 2]] {
        &self.unary
    }

    pub fn table(&self, node: usize) -> Option<&CardinalityTable> {
        self.tables[node].as_ref()
    }

    pub fn tables(&self) -> &[Option<CardinalityTable>] {
        &self.tables
    }

    /// Internal nodes carrying a table, with their sorted leaf variables.
    pub fn table_nodes(&self) -> &[(usize, Vec<usize>)] {
        &self.table_nodes
    }

    /// Log of the unnormalized probability of a configuration.
    pub fn log_weight(&self, y: &[u8]) -> f64 {
        debug_assert_eq!(y.len(), self.num_vars());
        let mut lw = 0.0;
        for (d, &bit) in y.iter().enumerate() {
            lw += self.unary[d][bit as usize];
        }
        for (node, vars) in &self.table_nodes {
            let count: usize = vars.iter().map(|&v| y[v] as usize).sum();
            lw += self.tables[*node].as_ref().unwrap().log_f()[count];
        }
        lw
    }
}
