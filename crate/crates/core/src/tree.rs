//! Structured categorical decision trees fitted to gradient/hessian targets.
//!
//! Every feature seen by a tree is categorical with a terrain. At each node
//! the candidate splits of a feature are the maximally coarse conforming
//! partitions of the node's active level set; children continue with the
//! terrain restricted to their branch.

use std::cmp::Ordering;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::enumerate::{maximally_coarse_partitions_explicit, PartitionCache};
use crate::error::{Error, Result};
use crate::graph::LevelSet;
use crate::terrain::{Terrain, TerrainRepr};

/// One categorical column together with the terrain over its levels.
#[derive(Debug, Clone)]
pub struct TreeFeature {
    pub name: String,
    pub terrain: Terrain,
    pub column: Vec<u32>,
}

impl TreeFeature {
    pub fn level_names(&self) -> &[String] {
        self.terrain.level_names()
    }
}

/// First and second derivatives of the loss at the current margin, per row.
#[derive(Debug, Clone, PartialEq)]
pub struct GradHess {
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl GradHess {
    pub fn len(&self) -> usize {
        self.grad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grad.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_gain: f64,
    /// `None` evaluates every candidate.
    pub max_splits_to_search: Option<usize>,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 3,
            min_samples_leaf: 1,
            min_gain: 0.0,
            max_splits_to_search: None,
            lambda: 0.0,
            seed: 0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::InvalidParams("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidParams("min_samples_leaf must be at least 1".into()));
        }
        if !(self.min_gain >= 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::InvalidParams("min_gain and lambda must be >= 0".into()));
        }
        if self.max_splits_to_search == Some(0) {
            return Err(Error::InvalidParams("max_splits_to_search must be at least 1".into()));
        }
        Ok(())
    }
}

/// Second-order gain of a binary split; `None` when either side has
/// `h + lambda <= 0`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> Option<f64> {
    partition_gain(&[(gl, hl), (gr, hr)], lambda)
}

/// Gain of splitting a node into parts with the given gradient/hessian sums.
pub fn partition_gain(parts: &[(f64, f64)], lambda: f64) -> Option<f64> {
    let mut score = 0.0;
    let (mut g, mut h) = (0.0, 0.0);
    for &(gp, hp) in parts {
        if !(hp + lambda > 0.0) {
            return None;
        }
        score += gp * gp / (hp + lambda);
        g += gp;
        h += hp;
    }
    Some(0.5 * (score - g * g / (h + lambda)))
}

pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    if h + lambda > 0.0 {
        -g / (h + lambda)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub levels: LevelSet,
    pub child: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        weight: f64,
    },
    Split {
        feature: usize,
        gain: f64,
        branches: Vec<Branch>,
    },
}

/// A fitted tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(weight: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { weight }],
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { branches, .. } => {
                    1 + branches.iter().map(|b| go(nodes, b.child)).max().unwrap_or(0)
                }
            }
        }
        go(&self.nodes, 0)
    }

    /// Routes a row given as one level id per feature. On failure returns the
    /// feature whose level matched no branch.
    pub fn predict_levels(&self, levels: &[u32]) -> std::result::Result<f64, usize> {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { weight } => return Ok(*weight),
                Node::Split {
                    feature, branches, ..
                } => {
                    let level = *levels.get(*feature).ok_or(*feature)? as usize;
                    at = branches
                        .iter()
                        .find(|b| b.levels.contains(level))
                        .ok_or(*feature)?
                        .child;
                }
            }
        }
    }
}

/// Prediction for one row of `features`.
pub fn predict_tree(tree: &Tree, features: &[TreeFeature], row: usize) -> Result<f64> {
    let levels: Vec<u32> = features.iter().map(|f| f.column[row]).collect();
    tree.predict_levels(&levels).map_err(|f| {
        let level = levels.get(f).copied().unwrap_or(u32::MAX) as usize;
        Error::UnknownLevelAtPredict {
            row,
            feature: features.get(f).map(|x| x.name.clone()).unwrap_or_default(),
            value: features
                .get(f)
                .and_then(|x| x.level_names().get(level).cloned())
                .unwrap_or_else(|| level.to_string()),
        }
    })
}

pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    // splitmix64 over the combined words
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Default, Clone, Copy)]
struct Stats {
    g: f64,
    h: f64,
    n: usize,
}

struct Best {
    gain: f64,
    feature: usize,
    parts: Vec<LevelSet>,
}

/// Total order on split choices: larger gain, then smaller canonical
/// candidate, then earlier feature.
fn better(gain: f64, feature: usize, parts: &[LevelSet], best: &Best) -> bool {
    match gain.partial_cmp(&best.gain) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Equal) => match parts.cmp(&best.parts[..]) {
            Ordering::Less => true,
            Ordering::Equal => feature < best.feature,
            Ordering::Greater => false,
        },
        _ => false,
    }
}

struct Grower<'a> {
    features: &'a [TreeFeature],
    targets: &'a GradHess,
    params: &'a TreeParams,
    cache: &'a PartitionCache,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn grow(&mut self, rows: &[u32], terrains: &[Option<Terrain>], depth: usize) -> Result<usize> {
        let id = self.nodes.len();
        let (g, h) = rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.targets.grad[r as usize], h + self.targets.hess[r as usize])
        });
        self.nodes.push(Node::Leaf {
            weight: leaf_weight(g, h, self.params.lambda),
        });
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_samples_leaf {
            return Ok(id);
        }
        let Some(best) = self.best_split(id, rows, terrains)? else {
            return Ok(id);
        };
        if !(best.gain > self.params.min_gain) {
            return Ok(id);
        }

        let column = &self.features[best.feature].column;
        let parent = terrains[best.feature]
            .as_ref()
            .expect("split feature has a terrain");
        let mut branches = Vec::with_capacity(best.parts.len());
        for part in &best.parts {
            let child_rows: Vec<u32> = rows
                .iter()
                .copied()
                .filter(|&r| part.contains(column[r as usize] as usize))
                .collect();
            let mut child_terrains = terrains.to_vec();
            child_terrains[best.feature] = if part.len() >= 2 {
                Some(parent.restrict(part)?)
            } else {
                None
            };
            let child = self.grow(&child_rows, &child_terrains, depth + 1)?;
            branches.push(Branch {
                levels: part.clone(),
                child,
            });
        }
        self.nodes[id] = Node::Split {
            feature: best.feature,
            gain: best.gain,
            branches,
        };
        Ok(id)
    }

    fn best_split(
        &self,
        node_id: usize,
        rows: &[u32],
        terrains: &[Option<Terrain>],
    ) -> Result<Option<Best>> {
        let lambda = self.params.lambda;
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<Best> = None;

        for (f, terrain) in terrains.iter().enumerate() {
            let Some(terrain) = terrain else { continue };
            let universe = terrain.universe();
            if universe.len() < 2 {
                continue;
            }
            let feature = &self.features[f];
            let mut stats = vec![Stats::default(); feature.level_names().len()];
            for &r in rows {
                let s = &mut stats[feature.column[r as usize] as usize];
                s.g += self.targets.grad[r as usize];
                s.h += self.targets.hess[r as usize];
                s.n += 1;
            }
            let sum = |ids: &mut dyn Iterator<Item = usize>| {
                ids.fold(Stats::default(), |acc, i| Stats {
                    g: acc.g + stats[i].g,
                    h: acc.h + stats[i].h,
                    n: acc.n + stats[i].n,
                })
            };
            let mut consider = |parts_stats: &[Stats], parts: &dyn Fn() -> Vec<LevelSet>| {
                if parts_stats.iter().any(|s| s.n < min_leaf) {
                    return;
                }
                let gh: Vec<(f64, f64)> = parts_stats.iter().map(|s| (s.g, s.h)).collect();
                let Some(gain) = partition_gain(&gh, lambda) else {
                    return;
                };
                if !gain.is_finite() {
                    return;
                }
                let take = match &best {
                    None => true,
                    Some(b) if gain > b.gain => true,
                    Some(b) if gain == b.gain => better(gain, f, &parts(), b),
                    Some(_) => false,
                };
                if take {
                    best = Some(Best {
                        gain,
                        feature: f,
                        parts: parts(),
                    });
                }
            };

            let seed = mix_seed(mix_seed(self.params.seed, node_id as u64), f as u64);
            match terrain.repr() {
                TerrainRepr::GraphInduced(graph) => {
                    let local = self.cache.lookup_within(graph, universe)?;
                    let global = universe.ids();
                    let picked = sample_indices(local.len(), self.params.max_splits_to_search, seed);
                    for i in picked {
                        let c = &local[i];
                        let a = sum(&mut c.side_a.ids().iter().map(|&l| global[l]));
                        let b = sum(&mut c.side_b.ids().iter().map(|&l| global[l]));
                        let to_global = |s: &LevelSet| -> LevelSet {
                            s.ids().iter().map(|&l| global[l]).collect()
                        };
                        consider(&[a, b], &|| vec![to_global(&c.side_a), to_global(&c.side_b)]);
                    }
                }
                TerrainRepr::Explicit(_) => {
                    let partitions = maximally_coarse_partitions_explicit(terrain)?;
                    let picked =
                        sample_indices(partitions.len(), self.params.max_splits_to_search, seed);
                    for i in picked {
                        let p = &partitions[i];
                        let part_stats: Vec<Stats> = p
                            .parts()
                            .iter()
                            .map(|s| sum(&mut s.ids().iter().copied()))
                            .collect();
                        consider(&part_stats, &|| p.parts().to_vec());
                    }
                }
            }
        }
        Ok(best)
    }
}

/// Indices to evaluate, in canonical order: all of them, or a uniform
/// sample without replacement when over the cap.
fn sample_indices(len: usize, cap: Option<usize>, seed: u64) -> Vec<usize> {
    match cap {
        Some(k) if len > k => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = index::sample(&mut rng, len, k).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..len).collect(),
    }
}

/// Fits one tree greedily to the given gradients and hessians.
pub fn fit_tree(
    features: &[TreeFeature],
    targets: &GradHess,
    params: &TreeParams,
    cache: &PartitionCache,
) -> Result<Tree> {
    params.validate()?;
    let n = targets.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if targets.hess.len() != n {
        return Err(Error::MisalignedTargets {
            targets: targets.hess.len(),
            rows: n,
        });
    }
    if let Some(f) = features.iter().find(|f| f.column.len() != n) {
        return Err(Error::MisalignedTargets {
            targets: n,
            rows: f.column.len(),
        });
    }
    let rows: Vec<u32> = (0..n as u32).collect();
    let terrains: Vec<Option<Terrain>> = features
        .iter()
        .map(|f| (f.terrain.universe().len() >= 2).then(|| f.terrain.clone()))
        .collect();
    let mut grower = Grower {
        features,
        targets,
        params,
        cache,
        nodes: Vec::new(),
    };
    grower.grow(&rows, &terrains, 0)?;
    Ok(Tree {
        nodes: grower.nodes,
    })
}
