//! Seeded random generators for models, trees and subset families. Used by
//! the benchmark harness and by verification suites; everything is a pure
//! function of the supplied RNG.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::{align_tree_with_nodes, CardinalityTable, RCModel, SubsetFamily, TreeSpec};

/// Random laminar family built by recursive splitting: every subset either
/// contains or is disjoint from every other by construction.
pub fn random_laminar_family<R: Rng>(num_vars: usize, rng: &mut R) -> SubsetFamily {
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<Vec<usize>> = vec![(0..num_vars).collect()];
    while let Some(set) = stack.pop() {
        if set.len() < 2 {
            continue;
        }
        if rng.random::<bool>() {
            subsets.push(set.clone());
        }
        if rng.random::<f64>() < 0.8 {
            let cut = rng.random_range(1..set.len());
            stack.push(set[..cut].to_vec());
            stack.push(set[cut..].to_vec());
        }
    }
    SubsetFamily::new(subsets, num_vars).expect("recursive splitting yields a valid family")
}

/// Configuration for [`random_rc_model`].
#[derive(Debug, Clone, Copy)]
pub struct RandomModelConfig {
    /// Probability that a candidate subset receives a table.
    pub table_prob: f64,
    /// Probability that a table entry is `-inf`.
    pub neg_inf_prob: f64,
    /// Unaries are uniform in `[-scale, scale]`.
    pub unary_scale: f64,
}

impl Default for RandomModelConfig {
    fn default() -> Self {
        RandomModelConfig {
            table_prob: 0.7,
            neg_inf_prob: 0.0,
            unary_scale: 1.5,
        }
    }
}

/// Random RC model over a random laminar family. May have zero mass when
/// `neg_inf_prob > 0`; callers that need positive mass should retry with a
/// fresh RNG stream.
pub fn random_rc_model<R: Rng>(num_vars: usize, cfg: &RandomModelConfig, rng: &mut R) -> RCModel {
    let family = random_laminar_family(num_vars, rng);
    let (tree, node_of_subset) = align_tree_with_nodes(&family).expect("laminar by construction");
    let unary: Vec<[f64; 2]> = (0..num_vars)
        .map(|_| {
            [
                rng.random_range(-cfg.unary_scale..=cfg.unary_scale),
                rng.random_range(-cfg.unary_scale..=cfg.unary_scale),
            ]
        })
        .collect();
    let mut tables: Vec<Option<CardinalityTable>> = vec![None; tree.num_nodes()];
    for (&node, subset) in node_of_subset.iter().zip(family.subsets()) {
        if tree.is_leaf(node) || rng.random::<f64>() >= cfg.table_prob {
            continue;
        }
        let n = subset.len();
        let log_f: Vec<f64> = (0..=n)
            .map(|_| {
                if rng.random::<f64>() < cfg.neg_inf_prob {
                    f64::NEG_INFINITY
                } else {
                    rng.sample::<f64, _>(StandardNormal)
                }
            })
            .collect();
        if log_f.iter().all(|v| *v == f64::NEG_INFINITY) {
            continue;
        }
        tables[node] = Some(CardinalityTable::new(log_f).expect("has a finite entry"));
    }
    RCModel::new(unary, tree, tables).expect("tables sized to their nodes")
}

/// Random tree: the aligned tree of a random laminar family.
pub fn random_tree<R: Rng>(num_vars: usize, rng: &mut R) -> TreeSpec {
    let family = random_laminar_family(num_vars, rng);
    crate::model::align_tree(&family).expect("laminar by construction")
}

/// The standard-cardinality benchmark model: one table of iid standard-normal
/// log-potentials at the root of a balanced tree, uniform `[-1, 1]` unaries.
pub fn random_standard_model<R: Rng>(num_vars: usize, rng: &mut R) -> RCModel {
    let unary: Vec<[f64; 2]> = (0..num_vars)
        .map(|_| [0.0, rng.random_range(-1.0..=1.0)])
        .collect();
    let log_f: Vec<f64> = (0..=num_vars)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let table = CardinalityTable::new(log_f).unwrap();
    RCModel::standard(unary, table).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_nested;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn laminar_families_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..100 {
            let d = rng.random_range(1..=20);
            let family = random_laminar_family(d, &mut rng);
            assert!(validate_nested(&family));
        }
    }

    #[test]
    fn aligned_tree_recovers_every_subset() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..50 {
            let d = rng.random_range(2..=16);
            let family = random_laminar_family(d, &mut rng);
            let (tree, nodes) = align_tree_with_nodes(&family).unwrap();
            let sets = tree.leaf_sets();
            for (subset, &node) in family.subsets().iter().zip(&nodes) {
                assert_eq!(&sets[node], subset);
                // Exactly one node carries this leaf set.
                let matches = sets.iter().filter(|s| *s == subset).count();
                assert_eq!(matches, 1, "subset {subset:?} matched {matches} nodes");
            }
        }
    }

    #[test]
    fn random_models_are_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        let cfg = RandomModelConfig {
            neg_inf_prob: 0.15,
            ..Default::default()
        };
        for _ in 0..50 {
            let d = rng.random_range(2..=12);
            let model = random_rc_model(d, &cfg, &mut rng);
            assert_eq!(model.num_vars(), d);
            for (node, _) in model.table_nodes() {
                assert_eq!(
                    model.table(*node).unwrap().n(),
                    model.tree().leaf_count(*node)
                );
            }
        }
    }
}
