//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each, and exits nonzero if any fails.
//!
//! Set `SCDT_SLOW=1` to include the optional 5x6 grid counts.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scdt::bench::{run_bench, BenchConfig, Method};
use scdt::boosting::{fit_ensemble, logloss_grad_hess, BoostParams, BoostedEnsemble};
use scdt::dataset::{Column, Dataset, FeatureSchema, FeatureSpec, Task};
use scdt::encode::Preprocessing;
use scdt::enumerate::{graph_counts, maximally_coarse_partitions};
use scdt::synth::{generate_synthetic, SyntheticRainConfig};
use scdt::tree::{fit_tree, GradHess, Node, TreeParams};
use scdt::{Builtin, LevelGraph, PartitionCache};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("table1_golden_counts", table1_golden_counts),
        ("binary_maximal_partitions", binary_maximal_partitions),
        ("chain_matches_threshold_search", chain_matches_threshold_search),
        ("logloss_gradient_oracle", logloss_gradient_oracle),
        ("benchmark_ordering", benchmark_ordering),
        ("siloed_convergence", siloed_convergence),
        ("subsampling_sanity", subsampling_sanity),
        ("determinism_and_round_trip", determinism_and_round_trip),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let o = std::panic::catch_unwind(run)
            .unwrap_or_else(|_| outcome(false, "panicked"));
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {} [{:.1?}]", o.detail, start.elapsed());
        if !o.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn table1_golden_counts() -> Outcome {
    let mut rows = vec![
        (3, 3, 53, 79, 218),
        (3, 4, 146, 425, 1126),
        (4, 4, 627, 3331, 11506),
        (4, 5, 2471, 25850, 116166),
        (5, 5, 16213, 285938, 2301877),
    ];
    let slow = std::env::var("SCDT_SLOW").is_ok_and(|v| v == "1");
    let start = Instant::now();
    let mut bad = Vec::new();
    for &(r, c, mp, half, cs) in &rows {
        let g = LevelGraph::builtin(Builtin::Grid(r, c)).unwrap();
        let got = graph_counts(&g);
        if (got.mp, got.cs_half, got.cs) != (mp, half, cs) {
            bad.push(format!(
                "Gr{r},{c}: got {}/{}/{}, want {mp}/{half}/{cs}",
                got.mp, got.cs_half, got.cs
            ));
        }
    }
    let elapsed = start.elapsed();
    if slow {
        let g = LevelGraph::builtin(Builtin::Grid(5, 6)).unwrap();
        let got = graph_counts(&g);
        if (got.mp, got.cs_half) != (111367, 5616968) {
            bad.push(format!("Gr5,6: got {}/{}", got.mp, got.cs_half));
        }
        rows.push((5, 6, 111367, 5616968, got.cs));
    }
    let fast_enough = elapsed < Duration::from_secs(120);
    if !fast_enough {
        bad.push(format!("took {elapsed:.1?}, budget 120 s"));
    }
    let detail = if bad.is_empty() {
        format!(
            "MP, CS' and CS exact for {} grids in {elapsed:.1?}{}",
            rows.len(),
            if slow { " (including Gr5,6)" } else { "" }
        )
    } else {
        bad.join("; ")
    };
    outcome(bad.is_empty(), detail)
}

/// Random connected graph: a random spanning tree plus extra edges.
fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize) -> LevelGraph {
    let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut edges = BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.insert((u, v));
    }
    let p = rng.random_range(0.0..0.6);
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                edges.insert((a, b));
            }
        }
    }
    let pairs: Vec<(&str, &str)> = edges
        .iter()
        .map(|&(a, b)| (names[a].as_str(), names[b].as_str()))
        .collect();
    LevelGraph::build("random", &names, &pairs).unwrap()
}

/// All set partitions of `0..n`, parts as sorted id lists.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn go(i: usize, n: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for k in 0..cur.len() {
            cur[k].push(i);
            go(i + 1, n, cur, out);
            cur[k].pop();
        }
        cur.push(vec![i]);
        go(i + 1, n, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    go(0, n, &mut Vec::new(), &mut out);
    out
}

fn is_connected(adj: &[Vec<usize>], set: &[usize]) -> bool {
    let mut seen = vec![set[0]];
    let mut stack = vec![set[0]];
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if set.contains(&u) && !seen.contains(&u) {
                seen.push(u);
                stack.push(u);
            }
        }
    }
    seen.len() == set.len()
}

/// Literal definition: the terrain is every connected proper subset; a
/// partition conforms if all parts are members; it is maximally coarse if
/// no conforming partition with fewer parts has each of its parts inside
/// one of theirs.
fn brute_maximal(g: &LevelGraph) -> BTreeSet<Vec<Vec<usize>>> {
    let n = g.num_levels();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in g.edges() {
        adj[a].push(b);
        adj[b].push(a);
    }
    let conforming: Vec<Vec<Vec<usize>>> = set_partitions(n)
        .into_iter()
        .filter(|p| p.iter().all(|part| part.len() < n && is_connected(&adj, part)))
        .collect();
    let block_of = |p: &Vec<Vec<usize>>| {
        let mut b = vec![0; n];
        for (k, part) in p.iter().enumerate() {
            for &v in part {
                b[v] = k;
            }
        }
        b
    };
    let blocks: Vec<Vec<usize>> = conforming.iter().map(block_of).collect();
    let coarsens = |q: usize, p: usize| {
        conforming[q].len() < conforming[p].len()
            && conforming[p].iter().all(|part| {
                part.iter().all(|&v| blocks[q][v] == blocks[q][part[0]])
            })
    };
    (0..conforming.len())
        .filter(|&p| !(0..conforming.len()).any(|q| coarsens(q, p)))
        .map(|p| {
            let mut parts = conforming[p].clone();
            parts.sort();
            parts
        })
        .collect()
}

fn binary_maximal_partitions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e57);
    let mut checked = 0;
    for trial in 0..200 {
        let n = rng.random_range(2..=8);
        let g = random_connected_graph(&mut rng, n);
        let brute = brute_maximal(&g);
        if let Some(p) = brute.iter().find(|p| p.len() != 2) {
            return outcome(false, format!("graph {trial}: maximal partition with {} parts", p.len()));
        }
        let fast: BTreeSet<Vec<Vec<usize>>> = maximally_coarse_partitions(&g)
            .unwrap()
            .iter()
            .map(|c| {
                let mut parts = vec![c.side_a.ids().to_vec(), c.side_b.ids().to_vec()];
                parts.sort();
                parts
            })
            .collect();
        if fast != brute {
            return outcome(
                false,
                format!("graph {trial} (n={n}): {} enumerated vs {} by brute force", fast.len(), brute.len()),
            );
        }
        checked += 1;
    }
    outcome(true, format!("{checked} random connected graphs, all maximal partitions binary and equal"))
}

fn chain_matches_threshold_search() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xca27);
    let cache = PartitionCache::new();
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let n = rng.random_range(10..=200);
        let distinct = rng.random_range(2..=n.min(60));
        let x: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(0..distinct as u32)) * 0.37 - 3.0)
            .collect();
        if x.iter().all(|&v| v == x[0]) {
            continue;
        }
        // Squared-error targets at margin 0 with random weights in the hessian.
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let h: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let targets = GradHess {
            grad: y.iter().map(|v| -v).collect(),
            hess: h.clone(),
        };

        // Brute force over every threshold between adjacent distinct values.
        let mut values = x.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let score = |g: f64, h: f64| g * g / h;
        let (gt, ht) = (targets.grad.iter().sum::<f64>(), h.iter().sum::<f64>());
        let mut best: Option<(f64, f64)> = None;
        for w in values.windows(2) {
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..n {
                if x[i] <= w[0] {
                    gl += targets.grad[i];
                    hl += h[i];
                }
            }
            let gain = 0.5 * (score(gl, hl) + score(gt - gl, ht - hl) - score(gt, ht));
            if best.is_none_or(|(b, _)| gain > b) {
                best = Some((gain, w[0]));
            }
        }
        let (best_gain, cut) = best.unwrap();

        let schema = FeatureSchema::new("y", Task::Regression, vec![FeatureSpec::numeric("x", 256)]).unwrap();
        let d = Dataset::new(Arc::new(schema), vec![Column::Numeric(x.clone())], Some(y)).unwrap();
        let features = Preprocessing::fit(&d).unwrap().encode(&d).unwrap();
        let params = TreeParams {
            max_depth: 1,
            ..Default::default()
        };
        let tree = fit_tree(&features, &targets, &params, &cache).unwrap();
        let Node::Split { gain, branches, .. } = &tree.nodes[0] else {
            if best_gain <= 0.0 {
                continue;
            }
            return outcome(false, format!("dataset {trial}: no split, brute-force gain {best_gain}"));
        };
        let diff = (gain - best_gain).abs();
        worst = worst.max(diff);
        if diff > 1e-10 {
            return outcome(false, format!("dataset {trial}: gain {gain} vs {best_gain}"));
        }
        let left = &branches[0].levels;
        for i in 0..n {
            let in_left = left.contains(features[0].column[i] as usize);
            if in_left != (x[i] <= cut) {
                return outcome(false, format!("dataset {trial}: row {i} on the wrong side"));
            }
        }
    }
    outcome(true, format!("50 datasets, max gain difference {worst:.1e}, row partitions identical"))
}

fn logloss_gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9bad);
    let loss = |m: f64, y: f64| -> f64 {
        let p = 1.0 / (1.0 + (-m).exp());
        -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
    };
    let step = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(-6.0..6.0);
        let y = f64::from(rng.random_range(0..2u8));
        let fd = (loss(m + step, y) - loss(m - step, y)) / (2.0 * step);
        let (g, hess) = logloss_grad_hess(m, y);
        let fd_h = (logloss_grad_hess(m + step, y).0 - logloss_grad_hess(m - step, y).0) / (2.0 * step);
        worst = worst.max((g - fd).abs()).max((hess - fd_h).abs());
    }
    outcome(worst < 1e-6, format!("100 points, max |analytic - finite difference| = {worst:.1e}"))
}

fn benchmark_ordering() -> Outcome {
    let config = BenchConfig {
        methods: vec![Method::OneHot, Method::Ordinal, Method::Structured],
        ..Default::default()
    };
    let start = Instant::now();
    let res = match run_bench(&config, None) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let mut ok = elapsed < Duration::from_secs(15 * 60);
    let mut parts = Vec::new();
    for &size in &config.sizes {
        let get = |m| res.mean_best(m, size).unwrap();
        let (oh, or, st) = (get("one_hot"), get("ordinal"), get("structured"));
        ok &= st < oh.min(or);
        parts.push(format!("n={size}: structured {st:.5}, one_hot {oh:.5}, ordinal {or:.5}"));
    }
    outcome(ok, parts.join("; "))
}

fn siloed_convergence() -> Outcome {
    let config = BenchConfig {
        sizes: vec![100_000],
        methods: vec![Method::Siloed],
        ..Default::default()
    };
    let res = run_bench(&config, None).unwrap();
    let siloed = res.mean_best("siloed", 100_000).unwrap();
    let optimal = res.mean_best("optimal", 100_000).unwrap();
    outcome(
        siloed - optimal < 0.01,
        format!("siloed {siloed:.5} vs optimal {optimal:.5} (gap {:.5}, limit 0.01)", siloed - optimal),
    )
}

fn subsampling_sanity() -> Outcome {
    let run = |cap: Option<usize>| {
        let mut config = BenchConfig {
            sizes: vec![2000],
            methods: vec![Method::Structured],
            ..Default::default()
        };
        config.boost.tree.max_splits_to_search = cap;
        run_bench(&config, None).unwrap().mean_best("structured", 2000).unwrap()
    };
    let capped = run(Some(5));
    let full = run(None);
    outcome(
        (capped - full).abs() <= 0.02,
        format!("cap 5 {capped:.5} vs unlimited {full:.5} (difference {:.5}, limit 0.02)", (capped - full).abs()),
    )
}

fn determinism_and_round_trip() -> Outcome {
    let cfg = SyntheticRainConfig {
        n_rows: 3000,
        seed: 5,
        ..Default::default()
    };
    let (data, _) = generate_synthetic(&cfg, None).unwrap();
    let params = BoostParams {
        n_trees: 60,
        tree: TreeParams {
            max_depth: 3,
            max_splits_to_search: Some(7),
            seed: 42,
            ..Default::default()
        },
        ..Default::default()
    };
    let a = fit_ensemble(&data, None, &params).unwrap().model;
    let b = fit_ensemble(&data, None, &params).unwrap().model;
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.json"), dir.path().join("b.json"));
    a.save(&pa).unwrap();
    b.save(&pb).unwrap();
    let bytes_equal = std::fs::read(&pa).unwrap() == std::fs::read(&pb).unwrap();

    let loaded = BoostedEnsemble::load(&pa).unwrap();
    let before = a.predict_margin(&data).unwrap();
    let after = loaded.predict_margin(&data).unwrap();
    let bits_equal = before.iter().zip(&after).all(|(x, y)| x.to_bits() == y.to_bits());
    let resave = dir.path().join("c.json");
    loaded.save(&resave).unwrap();
    let resave_equal = std::fs::read(&pa).unwrap() == std::fs::read(&resave).unwrap();

    let other = fit_ensemble(
        &data,
        None,
        &BoostParams {
            tree: TreeParams {
                seed: 43,
                ..params.tree.clone()
            },
            ..params
        },
    )
    .unwrap()
    .model;
    let seed_matters = other.to_json().unwrap() != a.to_json().unwrap();

    outcome(
        bytes_equal && bits_equal && resave_equal && seed_matters,
        format!(
            "same seed byte-identical: {bytes_equal}; reload predictions bit-identical: {bits_equal}; \
             re-save identical: {resave_equal}; different seed differs: {seed_matters}"
        ),
    )
}
