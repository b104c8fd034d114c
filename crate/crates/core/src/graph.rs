//! Level graphs: undirected connected graphs over the levels of one
//! categorical variable.
//!
//! Levels are addressed internally by their position in the declared level
//! list; names are only used at the I/O boundary.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bits::{self, Mask};
use crate::error::{io_err, Error, Result};

/// Upper bound on the number of levels of a single graph.
pub const MAX_LEVELS: usize = bits::CAPACITY;

/// A sorted, deduplicated set of level ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LevelSet(Vec<usize>);

impl LevelSet {
    pub fn new(ids: impl IntoIterator<Item = usize>) -> Self {
        let mut ids: Vec<usize> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        LevelSet(ids)
    }

    pub fn singleton(id: usize) -> Self {
        LevelSet(vec![id])
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn smallest(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn is_subset(&self, other: &LevelSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    pub(crate) fn to_mask(&self) -> Result<Mask> {
        let mut m = Mask::EMPTY;
        for &i in &self.0 {
            if i >= MAX_LEVELS {
                return Err(Error::OutOfRangeId(i));
            }
            m |= Mask::bit(i);
        }
        Ok(m)
    }

    pub(crate) fn from_mask(mask: Mask) -> Self {
        LevelSet(mask.ones().collect())
    }
}

impl fmt::Display for LevelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, id) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{id}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<usize> for LevelSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        LevelSet::new(iter)
    }
}

/// Undirected, connected, simple graph over named levels.
#[derive(Debug, Clone)]
pub struct LevelGraph {
    name: String,
    levels: Vec<String>,
    edges: Vec<(usize, usize)>,
    adj: Vec<Mask>,
    index: HashMap<String, usize>,
}

impl PartialEq for LevelGraph {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.levels == other.levels && self.edges == other.edges
    }
}

impl Eq for LevelGraph {}

/// On-disk JSON form of a graph.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct GraphFile {
    pub name: String,
    pub levels: Vec<String>,
    pub edges: Vec<[String; 2]>,
}

/// Builtin graph families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Chain(usize),
    Cycle(usize),
    Grid(usize, usize),
}

impl LevelGraph {
    /// Validates and builds a graph from level names and name pairs.
    pub fn build<S: AsRef<str>, E: AsRef<str>>(
        name: impl Into<String>,
        levels: &[S],
        edges: &[(E, E)],
    ) -> Result<Self> {
        let levels: Vec<String> = levels.iter().map(|s| s.as_ref().to_owned()).collect();
        let mut index = HashMap::with_capacity(levels.len());
        for (i, l) in levels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::EmptyLevelName);
            }
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::DuplicateLevel(l.clone()));
            }
        }
        let lookup = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| Error::UnknownEndpoint(s.to_owned()))
        };
        let mut ids = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            let (ia, ib) = (lookup(a)?, lookup(b)?);
            if ia == ib {
                return Err(Error::SelfLoop(a.to_owned()));
            }
            ids.push((ia, ib));
        }
        Self::from_parts(name.into(), levels, index, ids)
    }

    fn from_parts(
        name: String,
        levels: Vec<String>,
        index: HashMap<String, usize>,
        raw_edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if levels.len() > MAX_LEVELS {
            return Err(Error::TooManyLevels(levels.len()));
        }
        let edges: Vec<(usize, usize)> = raw_edges
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut adj = vec![Mask::EMPTY; levels.len()];
        for &(a, b) in &edges {
            adj[a] |= Mask::bit(b);
            adj[b] |= Mask::bit(a);
        }
        let g = LevelGraph {
            name,
            levels,
            edges,
            adj,
            index,
        };
        if !bits::connected(&g.adj, g.full_mask()) {
            return Err(Error::DisconnectedGraph(g.name.clone()));
        }
        Ok(g)
    }

    pub fn builtin(kind: Builtin) -> Result<Self> {
        let (name, levels, edges): (String, Vec<String>, Vec<(usize, usize)>) = match kind {
            Builtin::Chain(n) => {
                if n < 2 {
                    return Err(Error::InvalidDimensions(format!("chain:{n} needs n >= 2")));
                }
                (
                    format!("chain:{n}"),
                    (0..n).map(|i| i.to_string()).collect(),
                    (1..n).map(|i| (i - 1, i)).collect(),
                )
            }
            Builtin::Cycle(n) => {
                if n < 3 {
                    return Err(Error::InvalidDimensions(format!("cycle:{n} needs n >= 3")));
                }
                (
                    format!("cycle:{n}"),
                    (0..n).map(|i| i.to_string()).collect(),
                    (0..n).map(|i| (i, (i + 1) % n)).collect(),
                )
            }
            Builtin::Grid(rows, cols) => {
                if rows == 0 || cols == 0 || rows * cols < 2 {
                    return Err(Error::InvalidDimensions(format!(
                        "grid:{rows}x{cols} needs rows, cols >= 1 and at least 2 cells"
                    )));
                }
                let mut edges = Vec::new();
                for r in 0..rows {
                    for c in 0..cols {
                        let i = r * cols + c;
                        if c + 1 < cols {
                            edges.push((i, i + 1));
                        }
                        if r + 1 < rows {
                            edges.push((i, i + cols));
                        }
                    }
                }
                let levels = (0..rows)
                    .flat_map(|r| (0..cols).map(move |c| format!("r{r}c{c}")))
                    .collect();
                (format!("grid:{rows}x{cols}"), levels, edges)
            }
        };
        let index = levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Self::from_parts(name, levels, index, edges)
    }

    /// Parses `builtin:chain:N`, `builtin:cycle:N` or `builtin:grid:RxC`.
    pub fn parse_builtin(spec: &str) -> Result<Self> {
        let bad = || Error::InvalidGraphSpec(spec.to_owned());
        let rest = spec.strip_prefix("builtin:").ok_or_else(bad)?;
        let (kind, dims) = rest.split_once(':').ok_or_else(bad)?;
        let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
        let builtin = match kind {
            "chain" => Builtin::Chain(num(dims)?),
            "cycle" => Builtin::Cycle(num(dims)?),
            "grid" => {
                let (r, c) = dims.split_once(['x', 'X']).ok_or_else(bad)?;
                Builtin::Grid(num(r)?, num(c)?)
            }
            _ => return Err(bad()),
        };
        Self::builtin(builtin)
    }

    /// Resolves a graph source: a builtin spec or a path to a graph JSON file.
    /// Relative paths are resolved against `base_dir` when given.
    pub fn from_source(source: &str, base_dir: Option<&Path>) -> Result<Self> {
        if source.starts_with("builtin:") {
            return Self::parse_builtin(source);
        }
        let path = match base_dir {
            Some(dir) if Path::new(source).is_relative() => dir.join(source),
            _ => Path::new(source).to_path_buf(),
        };
        Self::load(&path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let file: GraphFile = serde_json::from_str(&text)?;
        Self::from_file(&file)
    }

    pub fn from_file(file: &GraphFile) -> Result<Self> {
        let edges: Vec<(&str, &str)> = file
            .edges
            .iter()
            .map(|[a, b]| (a.as_str(), b.as_str()))
            .collect();
        let levels: Vec<&str> = file.levels.iter().map(String::as_str).collect();
        Self::build(file.name.clone(), &levels, &edges)
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            name: self.name.clone(),
            levels: self.levels.clone(),
            edges: self
                .edges
                .iter()
                .map(|&(a, b)| [self.levels[a].clone(), self.levels[b].clone()])
                .collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn level_name(&self, id: usize) -> Option<&str> {
        self.levels.get(id).map(String::as_str)
    }

    pub fn level_id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Edges as `(a, b)` id pairs with `a < b`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[id].ones()
    }

    pub(crate) fn adjacency(&self) -> &[Mask] {
        &self.adj
    }

    pub(crate) fn full_mask(&self) -> Mask {
        Mask::full(self.levels.len())
    }

    pub fn all_levels(&self) -> LevelSet {
        LevelSet::new(0..self.levels.len())
    }

    pub(crate) fn check_ids(&self, s: &LevelSet) -> Result<Mask> {
        if let Some(&bad) = s.ids().iter().find(|&&i| i >= self.levels.len()) {
            return Err(Error::OutOfRangeId(bad));
        }
        s.to_mask()
    }

    /// True iff the subgraph induced by `s` is connected. Singletons are
    /// connected; the empty set is not.
    pub fn is_connected(&self, s: &LevelSet) -> Result<bool> {
        let mask = self.check_ids(s)?;
        Ok(bits::connected(&self.adj, mask))
    }

    /// The subgraph induced by `s`, keeping level names and their relative
    /// order.
    pub fn induced_subgraph(&self, s: &LevelSet) -> Result<LevelGraph> {
        let mask = self.check_ids(s)?;
        if !bits::connected(&self.adj, mask) {
            return Err(Error::DisconnectedInduced);
        }
        let mut remap = vec![usize::MAX; self.levels.len()];
        for (new, &old) in s.ids().iter().enumerate() {
            remap[old] = new;
        }
        let levels: Vec<String> = s.ids().iter().map(|&i| self.levels[i].clone()).collect();
        let edges = self
            .edges
            .iter()
            .filter(|&&(a, b)| remap[a] != usize::MAX && remap[b] != usize::MAX)
            .map(|&(a, b)| (remap[a], remap[b]))
            .collect();
        let index = levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Self::from_parts(
            format!("{}[{}]", self.name, s.len()),
            levels,
            index,
            edges,
        )
    }

    pub fn names_of(&self, s: &LevelSet) -> Vec<String> {
        s.ids().iter().map(|&i| self.levels[i].clone()).collect()
    }
}
