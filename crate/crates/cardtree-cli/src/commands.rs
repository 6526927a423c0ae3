//! Command implementations. Each returns a library `Result`; the binary maps
//! error variants onto exit codes.

use std::path::Path;

use serde_json::json;

use cardtree::io;
use cardtree::learning::{
    agglomerative_structure, expected_positive_count, fit, mil_fit, mil_loglik_and_grad,
    params_to_model, Bag, ClusterMode, FitOptions, MilFit, MilFitOptions, MilTables, Structure,
};
use cardtree::matching::{lbp_matching, LbpOptions};
use cardtree::model::balanced_tree;
use cardtree::{marginals, sample, Backend, Error, RCModel, Result};

use crate::bench::{records_to_csv, run_bench, Algo, BenchBudgets};

pub fn cmd_marginals(model_path: &Path, backend: Backend, out: &Path) -> Result<()> {
    let model = io::model_from_json(&io::read_to_string(model_path)?)?;
    let result = marginals(&model, backend)?;
    io::write_atomic(out, &io::marginals_to_csv(&result))
}

pub fn cmd_sample(model_path: &Path, n: usize, seed: u64, out: &Path) -> Result<()> {
    let model = io::model_from_json(&io::read_to_string(model_path)?)?;
    let samples = if n == 0 {
        Vec::new()
    } else {
        sample(&model, seed, n)?
    };
    io::write_atomic(out, &io::samples_to_string(&samples))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_bench(
    algorithms: &str,
    d_min: usize,
    d_max: usize,
    reps: usize,
    seed: u64,
    budgets: &BenchBudgets,
    out: &Path,
) -> Result<()> {
    let algos: Vec<Algo> = algorithms
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_>>()?;
    if algos.is_empty() {
        return Err(Error::InvalidArgument("no algorithms requested".into()));
    }
    let records = run_bench(&algos, d_min, d_max, reps, seed, budgets)?;
    io::write_atomic(out, &records_to_csv(&records))
}

pub fn cmd_match(problem_path: &Path, opts: &LbpOptions, out: &Path) -> Result<()> {
    let model = io::matching_from_json(&io::read_to_string(problem_path)?)?;
    let result = lbp_matching(&model, opts)?;
    let csv = io::matching_marginals_to_csv(model.rows(), model.cols(), &result.marginals);
    io::write_atomic(out, &csv)?;
    eprintln!(
        "lbp: converged={} iterations={} residual={:.3e}",
        result.converged, result.iterations, result.residual
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureFlag {
    Balanced,
    Adaptive,
    Anti,
}

impl std::str::FromStr for StructureFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(StructureFlag::Balanced),
            "adaptive" => Ok(StructureFlag::Adaptive),
            "anti" => Ok(StructureFlag::Anti),
            other => Err(Error::InvalidArgument(format!(
                "unknown structure {other:?} (expected balanced, adaptive or anti)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TablesFlag {
    None,
    Root,
    All,
}

impl std::str::FromStr for TablesFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(TablesFlag::None),
            "root" => Ok(TablesFlag::Root),
            "all" => Ok(TablesFlag::All),
            other => Err(Error::InvalidArgument(format!(
                "unknown tables flag {other:?} (expected none, root or all)"
            ))),
        }
    }
}

pub fn cmd_fit(
    data_path: &Path,
    structure: StructureFlag,
    tables: TablesFlag,
    opts: &FitOptions,
    out: &Path,
) -> Result<()> {
    let data = io::dataset_from_str(&io::read_to_string(data_path)?)?;
    let tree = match structure {
        StructureFlag::Balanced => balanced_tree(data.width())?,
        StructureFlag::Adaptive => agglomerative_structure(&data, ClusterMode::Adaptive)?,
        StructureFlag::Anti => agglomerative_structure(&data, ClusterMode::Anti)?,
    };
    let structure = match tables {
        TablesFlag::None => Structure::unary_only(tree),
        TablesFlag::Root => {
            let root = tree.root();
            Structure::new(tree, vec![root])?
        }
        TablesFlag::All => Structure::all_internal(tree),
    };
    let params = fit(&structure, &data, opts)?;
    let model = params_to_model(&params, &structure)?;
    io::write_atomic(out, &io::model_to_json(&model))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_mil(
    bags_path: &Path,
    tables: &MilTables,
    opts: &MilFitOptions,
    out: &Path,
) -> Result<()> {
    let bags = io::bags_from_str(&io::read_to_string(bags_path)?)?;
    let MilFit {
        weights,
        mean_loglik,
    } = mil_fit(&bags, tables, opts)?;

    let mut posteriors = Vec::with_capacity(bags.len());
    let mut expected_counts = Vec::with_capacity(bags.len());
    for bag in &bags {
        let (t0, t1) = tables.tables(bag.num_instances())?;
        let positive = Bag::new(bag.features.clone(), true)?;
        let (ll_pos, _) = mil_loglik_and_grad(&positive, &weights, &t0, &t1)?;
        posteriors.push(ll_pos.exp());
        match expected_positive_count(bag, &weights, &t0, &t1) {
            Ok(e) => expected_counts.push(json!(e)),
            Err(_) => expected_counts.push(json!(null)),
        }
    }
    let labels: Vec<u8> = bags.iter().map(|b| b.label as u8).collect();
    let doc = json!({
        "weights": weights,
        "mean_loglik": mean_loglik,
        "labels": labels,
        "posterior_positive": posteriors,
        "expected_positive_count": expected_counts,
    });
    io::write_atomic(
        out,
        &serde_json::to_string_pretty(&doc).expect("serializable"),
    )
}

pub fn cmd_struct(data_path: &Path, mode: ClusterMode, out: &Path) -> Result<()> {
    let data = io::dataset_from_str(&io::read_to_string(data_path)?)?;
    let tree = agglomerative_structure(&data, mode)?;
    let n = tree.num_nodes();
    let model = RCModel::new(vec![[0.0, 0.0]; data.width()], tree, vec![None; n])?;
    io::write_atomic(out, &io::model_to_json(&model))
}
