//! File formats: model JSON, dataset lines, bag files, matching problems,
//! and the CSV emitters, plus an atomic file writer.
//!
//! Log-potential values are base-e; JSON cannot carry infinities, so `-inf`
//! entries are written as the string `"-inf"` and accepted back in that form.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::convtree::InferenceResult;
use crate::error::{Error, Result};
use crate::learning::{Bag, Dataset};
use crate::matching::MatchingModel;
use crate::model::{CardinalityTable, RCModel, TreeNode, TreeSpec};

fn parse_log_value(v: &Value, what: &str) -> Result<f64> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| Error::Parse(format!("{what}: {n} is not a float"))),
        Value::String(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
        other => Err(Error::Parse(format!(
            "{what}: expected a number or \"-inf\", got {other}"
        ))),
    }
}

fn log_value_to_json(x: f64) -> Value {
    if x == f64::NEG_INFINITY {
        Value::String("-inf".into())
    } else {
        json!(x)
    }
}

fn as_object<'v>(v: &'v Value, what: &str) -> Result<&'v Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::Parse(format!("{what}: expected an object")))
}

fn as_array<'v>(v: &'v Value, what: &str) -> Result<&'v Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::Parse(format!("{what}: expected an array")))
}

fn as_usize(v: &Value, what: &str) -> Result<usize> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| Error::Parse(format!("{what}: expected a nonnegative integer")))
}

/// Recursive-descent state for the model tree.
struct TreeReader {
    nodes: Vec<TreeNode>,
    tables: Vec<Option<CardinalityTable>>,
}

impl TreeReader {
    fn read_node(&mut self, v: &Value, path: &str) -> Result<(usize, Vec<usize>)> {
        let obj = as_object(v, path)?;
        let vars_val = obj.get("vars").ok_or_else(|| Error::InvalidTree {
            node: path.to_string(),
            reason: "missing \"vars\"".into(),
        })?;
        let vars: Vec<usize> = as_array(vars_val, &format!("{path}.vars"))?
            .iter()
            .map(|x| as_usize(x, &format!("{path}.vars")))
            .collect::<Result<_>>()?;
        let name = format!("{vars:?}");
        if vars.is_empty() {
            return Err(Error::InvalidTree {
                node: name,
                reason: "empty \"vars\"".into(),
            });
        }
        if vars.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidTree {
                node: name,
                reason: "\"vars\" must be sorted and duplicate-free".into(),
            });
        }

        let id = match obj.get("children") {
            None | Some(Value::Null) => {
                if vars.len() != 1 {
                    return Err(Error::InvalidTree {
                        node: name.clone(),
                        reason: "a node without children must cover exactly one variable".into(),
                    });
                }
                self.nodes.push(TreeNode::leaf(vars[0]));
                self.tables.push(None);
                self.nodes.len() - 1
            }
            Some(children) => {
                let arr = as_array(children, &format!("{path}.children"))?;
                if arr.len() != 2 {
                    return Err(Error::InvalidTree {
                        node: name.clone(),
                        reason: format!(
                            "internal node must have exactly 2 children, found {}",
                            arr.len()
                        ),
                    });
                }
                let (left, left_vars) = self.read_node(&arr[0], &format!("{path}.children[0]"))?;
                let (right, right_vars) =
                    self.read_node(&arr[1], &format!("{path}.children[1]"))?;
                let mut union: Vec<usize> = left_vars.iter().chain(&right_vars).copied().collect();
                union.sort_unstable();
                if union.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::InvalidTree {
                        node: name.clone(),
                        reason: "children cover overlapping variables".into(),
                    });
                }
                if union != vars {
                    return Err(Error::InvalidTree {
                        node: name.clone(),
                        reason: "children do not partition the node's \"vars\"".into(),
                    });
                }
                self.nodes.push(TreeNode::internal(left, right));
                self.tables.push(None);
                self.nodes.len() - 1
            }
        };

        match obj.get("log_f") {
            None | Some(Value::Null) => {}
            Some(lf) => {
                let arr = as_array(lf, &format!("{path}.log_f"))?;
                if arr.len() != vars.len() + 1 {
                    return Err(Error::InvalidTree {
                        node: name.clone(),
                        reason: format!(
                            "log_f has {} entries, expected {}",
                            arr.len(),
                            vars.len() + 1
                        ),
                    });
                }
                let log_f: Vec<f64> = arr
                    .iter()
                    .map(|x| parse_log_value(x, &format!("log_f of node {name}")))
                    .collect::<Result<_>>()?;
                self.tables[id] =
                    Some(
                        CardinalityTable::new(log_f).map_err(|e| Error::InvalidTree {
                            node: name.clone(),
                            reason: e.to_string(),
                        })?,
                    );
            }
        }
        Ok((id, vars))
    }
}

/// Parse a model from its JSON text.
pub fn model_from_json(text: &str) -> Result<RCModel> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("invalid JSON: {e}")))?;
    let obj = as_object(&root, "model")?;
    let num_vars = as_usize(
        obj.get("num_vars")
            .ok_or_else(|| Error::Parse("missing \"num_vars\"".into()))?,
        "num_vars",
    )?;
    let unaries_val = obj
        .get("unaries")
        .ok_or_else(|| Error::Parse("missing \"unaries\"".into()))?;
    let unaries: Vec<[f64; 2]> = as_array(unaries_val, "unaries")?
        .iter()
        .enumerate()
        .map(|(d, pair)| {
            let arr = as_array(pair, &format!("unaries[{d}]"))?;
            if arr.len() != 2 {
                return Err(Error::Parse(format!(
                    "unaries[{d}] must have exactly two entries"
                )));
            }
            Ok([
                parse_log_value(&arr[0], &format!("unaries[{d}][0]"))?,
                parse_log_value(&arr[1], &format!("unaries[{d}][1]"))?,
            ])
        })
        .collect::<Result<_>>()?;
    if unaries.len() != num_vars {
        return Err(Error::Parse(format!(
            "num_vars is {num_vars} but {} unaries were given",
            unaries.len()
        )));
    }
    let tree_val = obj
        .get("tree")
        .ok_or_else(|| Error::Parse("missing \"tree\"".into()))?;
    let mut reader = TreeReader {
        nodes: Vec::new(),
        tables: Vec::new(),
    };
    let (root_id, root_vars) = reader.read_node(tree_val, "tree")?;
    for node in &reader.nodes {
        if let Some(v) = node.var {
            if v >= num_vars {
                return Err(Error::InvalidTree {
                    node: format!("[{v}]"),
                    reason: format!("variable index {v} out of range for num_vars = {num_vars}"),
                });
            }
        }
    }
    if root_vars.len() != num_vars {
        return Err(Error::InvalidTree {
            node: format!("{root_vars:?}"),
            reason: format!(
                "root covers {} variables but num_vars is {num_vars}",
                root_vars.len()
            ),
        });
    }
    let tree = TreeSpec::new(reader.nodes, root_id)?;
    RCModel::new(unaries, tree, reader.tables)
}

fn node_to_json(model: &RCModel, sets: &[Vec<usize>], id: usize) -> Value {
    let mut obj = Map::new();
    obj.insert("vars".into(), json!(sets[id]));
    if let Some((l, r)) = model.tree().children(id) {
        obj.insert(
            "children".into(),
            Value::Array(vec![
                node_to_json(model, sets, l),
                node_to_json(model, sets, r),
            ]),
        );
    }
    let lf = match model.table(id) {
        Some(t) => Value::Array(t.log_f().iter().map(|&x| log_value_to_json(x)).collect()),
        None => Value::Null,
    };
    obj.insert("log_f".into(), lf);
    Value::Object(obj)
}

/// Serialize a model to the JSON format accepted by [`model_from_json`].
pub fn model_to_json(model: &RCModel) -> String {
    let sets = model.tree().leaf_sets();
    let unaries: Vec<Value> = model
        .unary()
        .iter()
        .map(|u| Value::Array(vec![log_value_to_json(u[0]), log_value_to_json(u[1])]))
        .collect();
    let doc = json!({
        "num_vars": model.num_vars(),
        "unaries": unaries,
        "tree": node_to_json(model, &sets, model.tree().root()),
    });
    serde_json::to_string_pretty(&doc).expect("model JSON is always serializable")
}

/// Parse a dataset: one row per line, characters '0'/'1', constant width.
pub fn dataset_from_str(text: &str) -> Result<Dataset> {
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<u8> = line
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(Error::Parse(format!(
                    "line {}: unexpected character {other:?}",
                    ln + 1
                ))),
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    Dataset::new(rows)
}

pub fn dataset_to_string(data: &Dataset) -> String {
    let mut out = String::with_capacity(data.len() * (data.width() + 1));
    for row in data.rows() {
        for &b in row {
            out.push(if b == 1 { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

/// Render sampled configurations in the dataset line format.
pub fn samples_to_string(samples: &[Vec<u8>]) -> String {
    let mut out = String::new();
    for row in samples {
        for &b in row {
            out.push(if b == 1 { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

/// Parse a bag file: each bag starts with a `label 0|1` line followed by one
/// whitespace-separated feature row per instance.
pub fn bags_from_str(text: &str) -> Result<Vec<Bag>> {
    let mut bags: Vec<Bag> = Vec::new();
    let mut current: Option<(bool, Vec<Vec<f64>>)> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("label") {
            if let Some((label, rows)) = current.take() {
                bags.push(Bag::new(rows, label)?);
            }
            let label = match rest.trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse(format!(
                        "line {}: label must be 0 or 1, got {other:?}",
                        ln + 1
                    )))
                }
            };
            current = Some((label, Vec::new()));
        } else {
            let Some((_, rows)) = current.as_mut() else {
                return Err(Error::Parse(format!(
                    "line {}: feature row before any \"label\" line",
                    ln + 1
                )));
            };
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| {
                        Error::Parse(format!("line {}: {tok:?} is not a number", ln + 1))
                    })
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
    }
    if let Some((label, rows)) = current.take() {
        bags.push(Bag::new(rows, label)?);
    }
    if bags.is_empty() {
        return Err(Error::Parse("bag file contains no bags".into()));
    }
    Ok(bags)
}

/// One side's table description: a shared value or one per line.
fn parse_side_tables(
    obj: &Map<String, Value>,
    allowed_key: &str,
    log_f_key: &str,
    count: usize,
    table_len: usize,
) -> Result<Vec<CardinalityTable>> {
    let allowed = obj.get(allowed_key);
    let log_f = obj.get(log_f_key);
    match (allowed, log_f) {
        (Some(_), Some(_)) => Err(Error::Parse(format!(
            "give either {allowed_key:?} or {log_f_key:?}, not both"
        ))),
        (None, None) => Err(Error::Parse(format!(
            "missing {allowed_key:?} or {log_f_key:?}"
        ))),
        (Some(v), None) => {
            let arr = as_array(v, allowed_key)?;
            let per_entry = !arr.is_empty() && arr[0].is_array();
            let parse_one = |v: &Value, what: &str| -> Result<CardinalityTable> {
                let counts: Vec<usize> = as_array(v, what)?
                    .iter()
                    .map(|x| as_usize(x, what))
                    .collect::<Result<_>>()?;
                crate::model::hard_count_table(table_len - 1, &counts)
            };
            if per_entry {
                if arr.len() != count {
                    return Err(Error::Parse(format!(
                        "{allowed_key} lists {} value sets, expected {count}",
                        arr.len()
                    )));
                }
                arr.iter()
                    .enumerate()
                    .map(|(i, v)| parse_one(v, &format!("{allowed_key}[{i}]")))
                    .collect()
            } else {
                let t = parse_one(v, allowed_key)?;
                Ok(vec![t; count])
            }
        }
        (None, Some(v)) => {
            let arr = as_array(v, log_f_key)?;
            let per_entry = !arr.is_empty() && arr[0].is_array();
            let parse_one = |v: &Value, what: &str| -> Result<CardinalityTable> {
                let vals: Vec<f64> = as_array(v, what)?
                    .iter()
                    .map(|x| parse_log_value(x, what))
                    .collect::<Result<_>>()?;
                if vals.len() != table_len {
                    return Err(Error::Parse(format!(
                        "{what} has {} entries, expected {table_len}",
                        vals.len()
                    )));
                }
                CardinalityTable::new(vals)
            };
            if per_entry {
                if arr.len() != count {
                    return Err(Error::Parse(format!(
                        "{log_f_key} lists {} tables, expected {count}",
                        arr.len()
                    )));
                }
                arr.iter()
                    .enumerate()
                    .map(|(i, v)| parse_one(v, &format!("{log_f_key}[{i}]")))
                    .collect()
            } else {
                let t = parse_one(v, log_f_key)?;
                Ok(vec![t; count])
            }
        }
    }
}

/// Parse a matching problem:
/// `{"theta": [[...]], "row_allowed" | "row_log_f": ..., "col_allowed" |
/// "col_log_f": ...}` where the constraint values are either shared (flat
/// array) or given per row/column (array of arrays).
pub fn matching_from_json(text: &str) -> Result<MatchingModel> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("invalid JSON: {e}")))?;
    let obj = as_object(&root, "problem")?;
    let theta_rows = as_array(
        obj.get("theta")
            .ok_or_else(|| Error::Parse("missing \"theta\"".into()))?,
        "theta",
    )?;
    if theta_rows.is_empty() {
        return Err(Error::Parse("theta has no rows".into()));
    }
    let mut theta = Vec::new();
    let mut cols = None;
    for (i, row) in theta_rows.iter().enumerate() {
        let row = as_array(row, &format!("theta[{i}]"))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Parse(format!(
                    "theta[{i}] has {} entries, expected {c}",
                    row.len()
                )))
            }
            _ => {}
        }
        for (j, v) in row.iter().enumerate() {
            theta.push(
                v.as_f64()
                    .ok_or_else(|| Error::Parse(format!("theta[{i}][{j}] is not a number")))?,
            );
        }
    }
    let rows = theta_rows.len();
    let cols = cols.unwrap();
    if cols == 0 {
        return Err(Error::Parse("theta has no columns".into()));
    }
    let row_tables = parse_side_tables(obj, "row_allowed", "row_log_f", rows, cols + 1)?;
    let col_tables = parse_side_tables(obj, "col_allowed", "col_log_f", cols, rows + 1)?;
    MatchingModel::new(rows, cols, theta, row_tables, col_tables)
}

/// CSV with one row per quantity: `log_z`, per-variable marginals, and
/// per-node count distributions. Values carry 12 significant fractional
/// digits.
pub fn marginals_to_csv(result: &InferenceResult) -> String {
    let mut out = String::from("record,index,count,value\n");
    out.push_str(&format!("log_z,,,{:.12e}\n", result.log_z));
    for (d, m) in result.leaf_marginals.iter().enumerate() {
        out.push_str(&format!("marginal,{d},,{m:.12e}\n"));
    }
    for (node, dist) in result.count_marginals.iter().enumerate() {
        if let Some(dist) = dist {
            for (c, p) in dist.probs.iter().enumerate() {
                out.push_str(&format!("count,{node},{c},{p:.12e}\n"));
            }
        }
    }
    out
}

/// CSV of matching marginals: `i,j,p`.
pub fn matching_marginals_to_csv(rows: usize, cols: usize, marginals: &[f64]) -> String {
    let mut out = String::from("i,j,p\n");
    for i in 0..rows {
        for j in 0..cols {
            out.push_str(&format!("{i},{j},{:.12e}\n", marginals[i * cols + j]));
        }
    }
    out
}

/// Write via a temp file in the same directory plus an atomic rename, so a
/// failure never leaves a partial file at `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    fs::write(&tmp, contents)?;
    match fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e.into())
        }
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}
