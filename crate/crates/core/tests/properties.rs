use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;

use scdt::boosting::{fit_ensemble, BoostParams, BoostedEnsemble};
use scdt::dataset::{split_train_test, Column, Dataset, FeatureSchema, FeatureSpec, Task};
use scdt::encode::Preprocessing;
use scdt::enumerate::maximally_coarse_partitions_explicit;
use scdt::tree::{fit_tree, partition_gain, GradHess, Node, Tree, TreeFeature, TreeParams};
use scdt::{Builtin, LevelGraph, LevelSet, PartitionCache, Terrain};

fn graphs() -> Vec<Arc<LevelGraph>> {
    [
        Builtin::Chain(5),
        Builtin::Cycle(6),
        Builtin::Grid(2, 3),
        Builtin::Grid(3, 3),
    ]
    .into_iter()
    .map(|b| Arc::new(LevelGraph::builtin(b).unwrap()))
    .collect()
}

/// Walks the tree and checks that every split's branches partition the
/// active level set into members of the active terrain.
fn check_branches(tree: &Tree, features: &[TreeFeature]) -> Result<(), String> {
    fn go(
        tree: &Tree,
        features: &[TreeFeature],
        at: usize,
        terrains: &[Option<Terrain>],
    ) -> Result<(), String> {
        let Node::Split {
            feature, branches, ..
        } = &tree.nodes[at]
        else {
            return Ok(());
        };
        let terrain = terrains[*feature]
            .as_ref()
            .ok_or("split on a feature with one active level")?;
        let mut union = BTreeSet::new();
        for b in branches {
            if !terrain.contains(&b.levels).map_err(|e| e.to_string())? {
                return Err(format!("branch {} is not a terrain member", b.levels));
            }
            for &l in b.levels.ids() {
                if !union.insert(l) {
                    return Err("branches overlap".into());
                }
            }
        }
        if union.into_iter().collect::<Vec<_>>() != terrain.universe().ids() {
            return Err("branches do not cover the active set".into());
        }
        for b in branches {
            let mut next = terrains.to_vec();
            next[*feature] = if b.levels.len() > 1 {
                Some(terrain.restrict(&b.levels).map_err(|e| e.to_string())?)
            } else {
                None
            };
            go(tree, features, b.child, &next)?;
        }
        Ok(())
    }
    let terrains: Vec<Option<Terrain>> = features.iter().map(|f| Some(f.terrain.clone())).collect();
    go(tree, features, 0, &terrains)
}

fn random_features(n: usize, picks: &[(usize, Vec<u32>)]) -> Vec<TreeFeature> {
    let gs = graphs();
    picks
        .iter()
        .enumerate()
        .map(|(j, (g, raw))| {
            let g = &gs[*g % gs.len()];
            let m = g.num_levels() as u32;
            TreeFeature {
                name: format!("f{j}"),
                terrain: Terrain::graph_induced(g.clone()),
                column: raw.iter().take(n).map(|v| v % m).collect(),
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn branches_are_members_and_root_gain_is_maximal(
        n in 8usize..80,
        picks in prop::collection::vec((0usize..4, prop::collection::vec(0u32..1000, 80)), 1..3),
        grad in prop::collection::vec(-3.0f64..3.0, 80),
        hess in prop::collection::vec(0.05f64..1.0, 80),
        depth in 1usize..4,
    ) {
        let features = random_features(n, &picks);
        let targets = GradHess { grad: grad[..n].to_vec(), hess: hess[..n].to_vec() };
        let cache = PartitionCache::new();
        let params = TreeParams { max_depth: depth, ..Default::default() };
        let tree = fit_tree(&features, &targets, &params, &cache).unwrap();
        prop_assert!(check_branches(&tree, &features).is_ok(), "{:?}", check_branches(&tree, &features));

        // Exhaustive re-check at the root: no candidate beats the chosen one.
        let mut best = 0.0f64;
        for f in &features {
            let g = f.terrain.graph().unwrap();
            for c in cache.lookup_or_enumerate(g).unwrap().iter() {
                let side = |s: &LevelSet| {
                    (0..n).filter(|&r| s.contains(f.column[r] as usize)).fold((0.0, 0.0), |(a, b), r| {
                        (a + targets.grad[r], b + targets.hess[r])
                    })
                };
                let (a, b) = (side(&c.side_a), side(&c.side_b));
                if a.1 == 0.0 || b.1 == 0.0 {
                    continue;
                }
                best = best.max(partition_gain(&[a, b], 0.0).unwrap());
            }
        }
        match &tree.nodes[0] {
            Node::Split { gain, .. } => prop_assert!((gain - best).abs() <= 1e-9 * best.max(1.0)),
            Node::Leaf { .. } => prop_assert!(best <= 0.0),
        }
    }

    #[test]
    fn explicit_maximal_partitions_match_definition(
        n in 2usize..6,
        raw in prop::collection::vec(prop::collection::btree_set(0usize..6, 2..5), 0..6),
    ) {
        let names: Vec<String> = (0..n).map(|i| format!("l{i}")).collect();
        let members: Vec<Vec<String>> = raw
            .iter()
            .map(|s| s.iter().filter(|&&i| i < n).map(|&i| names[i].clone()).collect::<Vec<_>>())
            .filter(|s| !s.is_empty() && s.len() < n)
            .collect();
        let t = Terrain::explicit(&names, &members).unwrap();
        let member_sets: BTreeSet<Vec<usize>> = t.members().iter().map(|m| m.ids().to_vec()).collect();

        // All set partitions of 0..n by restricted growth strings.
        let mut all = Vec::new();
        let mut rgs = vec![0usize; n];
        loop {
            let k = rgs.iter().max().unwrap() + 1;
            let parts: Vec<Vec<usize>> = (0..k).map(|b| (0..n).filter(|&i| rgs[i] == b).collect()).collect();
            all.push(parts);
            let mut i = n - 1;
            loop {
                if i == 0 { break; }
                let prefix_max = rgs[..i].iter().max().copied().unwrap();
                if rgs[i] <= prefix_max {
                    rgs[i] += 1;
                    for r in rgs.iter_mut().skip(i + 1) { *r = 0; }
                    break;
                }
                i -= 1;
            }
            if i == 0 { break; }
        }
        let conforming: Vec<&Vec<Vec<usize>>> =
            all.iter().filter(|p| p.iter().all(|part| member_sets.contains(part))).collect();
        let coarsens = |q: &Vec<Vec<usize>>, p: &Vec<Vec<usize>>| {
            q.len() < p.len() && p.iter().all(|pp| q.iter().any(|qq| pp.iter().all(|v| qq.contains(v))))
        };
        let brute: BTreeSet<Vec<Vec<usize>>> = conforming
            .iter()
            .filter(|p| !conforming.iter().any(|q| coarsens(q, p)))
            .map(|p| (*p).clone())
            .collect();
        let fast: BTreeSet<Vec<Vec<usize>>> = maximally_coarse_partitions_explicit(&t)
            .unwrap()
            .iter()
            .map(|p| p.parts().iter().map(|s| s.ids().to_vec()).collect())
            .collect();
        prop_assert_eq!(fast, brute);
    }

    #[test]
    fn model_round_trip_and_probabilities(
        seed in 0u64..1000,
        rows in prop::collection::vec((0u32..9, 0u32..6, 0.0f64..10.0, any::<bool>()), 20..120),
    ) {
        let grid = Arc::new(LevelGraph::builtin(Builtin::Grid(3, 3)).unwrap());
        let cyc = Arc::new(LevelGraph::builtin(Builtin::Cycle(6)).unwrap());
        let schema = FeatureSchema::new("y", Task::Binary, vec![
            FeatureSpec::structured("a", grid),
            FeatureSpec::structured("b", cyc),
            FeatureSpec::numeric("x", 8),
        ]).unwrap();
        let d = Dataset::new(
            Arc::new(schema),
            vec![
                Column::Levels(rows.iter().map(|r| r.0).collect()),
                Column::Levels(rows.iter().map(|r| r.1).collect()),
                Column::Numeric(rows.iter().map(|r| r.2).collect()),
            ],
            Some(rows.iter().map(|r| f64::from(u8::from(r.3))).collect()),
        ).unwrap();
        let params = BoostParams {
            n_trees: 15,
            eval_every: 1,
            tree: TreeParams { max_depth: 2, max_splits_to_search: Some(4), seed, ..Default::default() },
            ..Default::default()
        };
        let fit = fit_ensemble(&d, None, &params).unwrap();
        let losses: Vec<f64> = fit.report.checkpoints.iter().map(|c| c.train_loss).collect();
        prop_assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-12));

        let json = fit.model.to_json().unwrap();
        let back = BoostedEnsemble::from_json(&json).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), json);
        let p = fit.model.predict_proba(&d).unwrap();
        let q = back.predict_proba(&d).unwrap();
        prop_assert!(p.iter().zip(&q).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));

        let features = Preprocessing::fit(&d).unwrap().encode(&d).unwrap();
        for tree in &fit.model.trees {
            prop_assert!(check_branches(tree, &features).is_ok());
        }
    }

    #[test]
    fn splits_are_disjoint_and_exhaustive(n in 2usize..200, frac in 0.05f64..0.95, seed: u64) {
        let schema = FeatureSchema::new("y", Task::Regression, vec![FeatureSpec::numeric("x", 8)]).unwrap();
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let d = Dataset::new(Arc::new(schema), vec![Column::Numeric(x)], Some(vec![0.0; n])).unwrap();
        match split_train_test(&d, frac, seed) {
            Ok((a, b)) => {
                let mut seen: Vec<usize> = (0..a.n_rows()).map(|r| a.cell(0, r).parse().unwrap())
                    .chain((0..b.n_rows()).map(|r| b.cell(0, r).parse().unwrap()))
                    .collect();
                seen.sort_unstable();
                prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
            }
            Err(_) => prop_assert!(((n as f64) * frac).round() as usize == 0 || ((n as f64) * frac).round() as usize == n),
        }
    }
}

#[test]
fn level_ids_round_trip_through_names() {
    for g in graphs() {
        for id in 0..g.num_levels() {
            let name = g.level_name(id).unwrap();
            assert_eq!(g.level_id(name), Some(id));
        }
    }
}
