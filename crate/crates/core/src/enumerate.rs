//! Enumeration of connected level sets and of maximally coarse partitions.
//!
//! Connected sets are generated by growing a set from a root vertex. The
//! root is the smallest member, so every vertex with a smaller id is
//! forbidden for that root; each extension step either takes the next
//! candidate or forbids it for the remaining siblings. Every connected set
//! is therefore produced exactly once, in a deterministic order.
//!
//! For a graph-induced terrain the maximally coarse partitions are exactly
//! the bipartitions `{S, V \ S}` with both sides connected, found by
//! scanning connected sets with `|S| <= |V| / 2`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::bits::{self, Mask};
use crate::error::{io_err, Error, Result};
use crate::graph::{LevelGraph, LevelSet};
use crate::terrain::{Partition, Terrain};

/// Largest universe accepted by the exhaustive explicit-terrain search.
pub const MAX_EXPLICIT_LEVELS: usize = 16;

struct Frame {
    set: Mask,
    candidates: Mask,
    forbidden: Mask,
}

/// Iterator over the connected subsets of the vertices in `within`, as
/// masks.
pub(crate) struct ConnectedMasks<'a> {
    adj: &'a [Mask],
    within: Mask,
    roots: Mask,
    max_size: usize,
    stack: Vec<Frame>,
}

impl<'a> ConnectedMasks<'a> {
    pub(crate) fn new(adj: &'a [Mask], within: Mask, max_size: usize) -> Self {
        ConnectedMasks {
            adj,
            within,
            roots: if max_size == 0 { Mask::EMPTY } else { within },
            max_size,
            stack: Vec::new(),
        }
    }
}

impl Iterator for ConnectedMasks<'_> {
    type Item = Mask;

    fn next(&mut self) -> Option<Mask> {
        loop {
            if let Some(top) = self.stack.last_mut() {
                if !top.candidates.is_empty() && top.set.count() < self.max_size {
                    let u = top.candidates.lowest();
                    let ub = Mask::bit(u);
                    top.candidates &= !ub;
                    let set = top.set | ub;
                    let forbidden = top.forbidden;
                    let candidates = (top.candidates | self.adj[u]) & !(set | forbidden);
                    top.forbidden |= ub;
                    self.stack.push(Frame {
                        set,
                        candidates,
                        forbidden,
                    });
                    return Some(set);
                }
                self.stack.pop();
                continue;
            }
            if self.roots.is_empty() {
                return None;
            }
            let v = self.roots.lowest();
            let vb = Mask::bit(v);
            self.roots &= !vb;
            let forbidden = !self.within | Mask::below(v);
            self.stack.push(Frame {
                set: vb,
                candidates: self.adj[v] & !forbidden & !vb,
                forbidden,
            });
            return Some(vb);
        }
    }
}

pub(crate) fn connected_masks_within(adj: &[Mask], within: Mask, max_size: usize) -> Vec<Mask> {
    ConnectedMasks::new(adj, within, max_size).collect()
}

/// Streams every non-empty connected subset of `g` with at most `max_size`
/// levels (`None` for unlimited, which includes the full level set).
pub fn connected_sets(g: &LevelGraph, max_size: Option<usize>) -> impl Iterator<Item = LevelSet> + '_ {
    ConnectedMasks::new(g.adjacency(), g.full_mask(), max_size.unwrap_or(usize::MAX))
        .map(LevelSet::from_mask)
}

pub fn count_connected_sets(g: &LevelGraph, max_size: Option<usize>) -> u64 {
    ConnectedMasks::new(g.adjacency(), g.full_mask(), max_size.unwrap_or(usize::MAX)).count() as u64
}

/// A bipartition `{side_a, side_b}` of a universe with both sides connected.
/// `side_a` holds the smallest id of the universe.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinarySplitCandidate {
    pub side_a: LevelSet,
    pub side_b: LevelSet,
}

impl BinarySplitCandidate {
    pub fn to_partition(&self) -> Partition {
        Partition::canonical(vec![self.side_a.clone(), self.side_b.clone()])
    }
}

/// Named form of a candidate, used by the candidate-list JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedCandidate {
    pub side_a: Vec<String>,
    pub side_b: Vec<String>,
}

/// Maximally coarse bipartitions of the part of the graph inside `within`,
/// in ids of the original graph, sorted by `side_a`.
pub(crate) fn bipartitions_within(adj: &[Mask], within: Mask) -> Vec<BinarySplitCandidate> {
    let n = within.count();
    let root = Mask::bit(within.lowest());
    let half = n / 2;
    let mut out: Vec<BinarySplitCandidate> = ConnectedMasks::new(adj, within, half)
        .filter_map(|s| {
            let rest = within & !s;
            if s.count() * 2 == n && !s.intersects(root) {
                // The complement, which holds the root, is emitted on its own.
                return None;
            }
            if !bits::connected(adj, rest) {
                return None;
            }
            let (a, b) = if s.intersects(root) { (s, rest) } else { (rest, s) };
            Some(BinarySplitCandidate {
                side_a: LevelSet::from_mask(a),
                side_b: LevelSet::from_mask(b),
            })
        })
        .collect();
    out.sort();
    out
}

/// All maximally coarse partitions of the terrain induced by `g`.
pub fn maximally_coarse_partitions(g: &LevelGraph) -> Result<Vec<BinarySplitCandidate>> {
    if g.num_levels() < 2 {
        return Err(Error::SingletonUniverse);
    }
    Ok(bipartitions_within(g.adjacency(), g.full_mask()))
}

/// Counts of one Table-1 style row: bipartitions, half-size connected sets
/// and all connected sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphCounts {
    pub mp: u64,
    pub cs_half: u64,
    pub cs: u64,
}

pub fn count_bipartitions(g: &LevelGraph) -> u64 {
    let adj = g.adjacency();
    let within = g.full_mask();
    let n = g.num_levels();
    ConnectedMasks::new(adj, within, n / 2)
        .filter(|&s| {
            (s.count() * 2 != n || s.contains(0)) && bits::connected(adj, within & !s)
        })
        .count() as u64
}

pub fn graph_counts(g: &LevelGraph) -> GraphCounts {
    GraphCounts {
        mp: count_bipartitions(g),
        cs_half: count_connected_sets(g, Some(g.num_levels() / 2)),
        cs: count_connected_sets(g, None),
    }
}

/// Maximally coarse conforming partitions of any terrain, by exhaustive
/// search over conforming partitions. Parts may number more than two.
pub fn maximally_coarse_partitions_explicit(t: &Terrain) -> Result<Vec<Partition>> {
    let n = t.universe().len();
    if n > MAX_EXPLICIT_LEVELS {
        return Err(Error::UniverseTooLarge(n));
    }
    let members: Vec<Mask> = t
        .members()
        .iter()
        .map(|m| m.to_mask())
        .collect::<Result<_>>()?;
    let mut conforming = Vec::new();
    let mut current = Vec::new();
    conforming_partitions(&members, t.universe().to_mask()?, &mut current, &mut conforming);

    let multi: Vec<Mask> = members.into_iter().filter(|m| m.count() > 1).collect();
    let mut out: Vec<Partition> = conforming
        .into_iter()
        .filter(|blocks| !multi.iter().any(|&m| is_union_of_blocks(m, blocks)))
        .map(|blocks| Partition::from_masks(&blocks))
        .collect();
    out.sort();
    Ok(out)
}

fn conforming_partitions(
    members: &[Mask],
    remaining: Mask,
    current: &mut Vec<Mask>,
    out: &mut Vec<Vec<Mask>>,
) {
    if remaining.is_empty() {
        out.push(current.clone());
        return;
    }
    let v = Mask::bit(remaining.lowest());
    for &m in members {
        if m.intersects(v) && m.is_subset_of(remaining) {
            current.push(m);
            conforming_partitions(members, remaining & !m, current, out);
            current.pop();
        }
    }
}

/// A member that is a union of two or more blocks gives a strictly coarser
/// conforming partition.
fn is_union_of_blocks(member: Mask, blocks: &[Mask]) -> bool {
    let mut covered = Mask::EMPTY;
    let mut used = 0;
    for &b in blocks {
        if b.is_subset_of(member) {
            covered |= b;
            used += 1;
        } else if b.intersects(member) {
            return false;
        }
    }
    used >= 2 && covered == member
}

/// Label-exact identity of a graph: level names in id order plus the sorted
/// edge list by name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphKey {
    levels: Vec<String>,
    edges: Vec<(String, String)>,
}

impl GraphKey {
    pub fn of(g: &LevelGraph) -> Self {
        Self::within(g, &g.all_levels())
    }

    /// Key of the subgraph of `g` induced by `s`, without building it.
    pub(crate) fn within(g: &LevelGraph, s: &LevelSet) -> Self {
        let levels = g.names_of(s);
        let edges = g
            .edges()
            .iter()
            .filter(|&&(a, b)| s.contains(a) && s.contains(b))
            .map(|&(a, b)| (g.levels()[a].clone(), g.levels()[b].clone()))
            .collect();
        GraphKey { levels, edges }
    }
}

/// Memo of maximally coarse bipartitions keyed by exact graph labels.
/// Reads are shared; inserts take the write lock briefly.
#[derive(Debug, Default)]
pub struct PartitionCache {
    entries: RwLock<HashMap<GraphKey, Arc<Vec<BinarySplitCandidate>>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    entries: Vec<CacheFileEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheFileEntry {
    levels: Vec<String>,
    edges: Vec<[String; 2]>,
    candidates: Vec<NamedCandidate>,
}

impl PartitionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    /// Bipartitions of `g`, from the cache when present.
    pub fn lookup_or_enumerate(&self, g: &LevelGraph) -> Result<Arc<Vec<BinarySplitCandidate>>> {
        self.lookup_within(g, &g.all_levels())
    }

    /// Bipartitions of the subgraph of `g` induced by `s`, in the local ids
    /// of that subgraph (position within `s`).
    pub fn lookup_within(
        &self,
        g: &LevelGraph,
        s: &LevelSet,
    ) -> Result<Arc<Vec<BinarySplitCandidate>>> {
        let key = GraphKey::within(g, s);
        if let Some(hit) = self.entries.read().expect("cache lock").get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(Arc::clone(hit));
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let sub = g.induced_subgraph(s)?;
        let fresh = Arc::new(maximally_coarse_partitions(&sub)?);
        let mut map = self.entries.write().expect("cache lock");
        Ok(Arc::clone(map.entry(key).or_insert(fresh)))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let map = self.entries.read().expect("cache lock");
        let mut keys: Vec<&GraphKey> = map.keys().collect();
        keys.sort();
        let entries = keys
            .into_iter()
            .map(|k| {
                let names = |s: &LevelSet| s.ids().iter().map(|&i| k.levels[i].clone()).collect();
                CacheFileEntry {
                    levels: k.levels.clone(),
                    edges: k.edges.iter().map(|(a, b)| [a.clone(), b.clone()]).collect(),
                    candidates: map[k]
                        .iter()
                        .map(|c| NamedCandidate {
                            side_a: names(&c.side_a),
                            side_b: names(&c.side_b),
                        })
                        .collect(),
                }
            })
            .collect();
        let text = serde_json::to_string(&CacheFile { entries })?;
        std::fs::write(path, text).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let file: CacheFile = serde_json::from_str(&text)?;
        let cache = PartitionCache::new();
        {
            let mut map = cache.entries.write().expect("cache lock");
            for entry in file.entries {
                let edges: Vec<(&str, &str)> = entry
                    .edges
                    .iter()
                    .map(|[a, b]| (a.as_str(), b.as_str()))
                    .collect();
                let g = LevelGraph::build("cached", &entry.levels, &edges)?;
                let resolve = |names: &[String]| -> Result<LevelSet> {
                    names
                        .iter()
                        .map(|n| {
                            g.level_id(n)
                                .ok_or_else(|| Error::UnknownEndpoint(n.clone()))
                        })
                        .collect()
                };
                let candidates = entry
                    .candidates
                    .iter()
                    .map(|c| {
                        Ok(BinarySplitCandidate {
                            side_a: resolve(&c.side_a)?,
                            side_b: resolve(&c.side_b)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                map.insert(GraphKey::of(&g), Arc::new(candidates));
            }
        }
        Ok(cache)
    }
}

pub fn named_candidates(g: &LevelGraph, candidates: &[BinarySplitCandidate]) -> Vec<NamedCandidate> {
    candidates
        .iter()
        .map(|c| NamedCandidate {
            side_a: g.names_of(&c.side_a),
            side_b: g.names_of(&c.side_b),
        })
        .collect()
}
