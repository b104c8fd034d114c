//! Terrains: families of "averageable" level subsets, together with the
//! partition relations used to pick candidate splits.
//!
//! A terrain always contains every singleton of its universe and never the
//! empty set or the universe itself. Terrains are either induced by a level
//! graph (members are the connected proper subsets) or listed explicitly.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bits::{self, Mask};
use crate::error::{io_err, Error, Result};
use crate::graph::{LevelGraph, LevelSet, MAX_LEVELS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TerrainRepr {
    /// Members are the connected proper subsets of the universe. The graph
    /// is the full original graph; the universe selects the active part.
    GraphInduced(Arc<LevelGraph>),
    Explicit(ExplicitMembers),
}

/// Non-singleton members of an explicit terrain, over a named level list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitMembers {
    levels: Arc<Vec<String>>,
    members: BTreeSet<LevelSet>,
}

impl ExplicitMembers {
    /// Listed members, excluding the implied singletons.
    pub fn members(&self) -> impl Iterator<Item = &LevelSet> {
        self.members.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Terrain {
    universe: LevelSet,
    repr: TerrainRepr,
}

/// JSON form of an explicit terrain. Singletons may be omitted.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ExplicitTerrainFile {
    pub universe: Vec<String>,
    pub members: Vec<Vec<String>>,
}

impl Terrain {
    /// The terrain induced by `graph` over all of its levels.
    pub fn graph_induced(graph: Arc<LevelGraph>) -> Self {
        Terrain {
            universe: graph.all_levels(),
            repr: TerrainRepr::GraphInduced(graph),
        }
    }

    /// An explicit terrain over `levels` (ids by position). Singletons are
    /// added implicitly; duplicates are dropped.
    pub fn explicit<S: AsRef<str>>(levels: &[S], members: &[Vec<S>]) -> Result<Self> {
        let levels: Vec<String> = levels.iter().map(|s| s.as_ref().to_owned()).collect();
        if levels.len() < 2 {
            return Err(Error::InvalidTerrain(
                "a terrain needs a universe of at least two levels".into(),
            ));
        }
        if levels.len() > MAX_LEVELS {
            return Err(Error::TooManyLevels(levels.len()));
        }
        let mut index = HashMap::new();
        for (i, l) in levels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::EmptyLevelName);
            }
            if index.insert(l.as_str(), i).is_some() {
                return Err(Error::DuplicateLevel(l.clone()));
            }
        }
        let mut set = BTreeSet::new();
        for member in members {
            let mut ids = Vec::with_capacity(member.len());
            for name in member {
                let name = name.as_ref();
                let id = index.get(name).copied().ok_or_else(|| {
                    Error::InvalidTerrain(format!("member level `{name}` is not in the universe"))
                })?;
                ids.push(id);
            }
            let s = LevelSet::new(ids);
            if s.is_empty() {
                return Err(Error::InvalidTerrain("empty member".into()));
            }
            if s.len() == levels.len() {
                return Err(Error::InvalidTerrain(
                    "the full universe cannot be a member".into(),
                ));
            }
            if s.len() > 1 {
                set.insert(s);
            }
        }
        let universe = LevelSet::new(0..levels.len());
        Ok(Terrain {
            universe,
            repr: TerrainRepr::Explicit(ExplicitMembers {
                levels: Arc::new(levels),
                members: set,
            }),
        })
    }

    pub fn from_explicit_file(file: &ExplicitTerrainFile) -> Result<Self> {
        Self::explicit(&file.universe, &file.members)
    }

    pub fn load_explicit(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_explicit_file(&serde_json::from_str(&text)?)
    }

    /// Explicit-file form over the current universe. Graph-induced terrains
    /// are expanded into their full member list.
    pub fn to_explicit_file(&self) -> ExplicitTerrainFile {
        let names = self.level_names();
        let universe = self.universe.ids().iter().map(|&i| names[i].clone()).collect();
        let members = self
            .members()
            .into_iter()
            .filter(|m| m.len() > 1)
            .map(|m| m.ids().iter().map(|&i| names[i].clone()).collect())
            .collect();
        ExplicitTerrainFile { universe, members }
    }

    pub fn universe(&self) -> &LevelSet {
        &self.universe
    }

    pub fn repr(&self) -> &TerrainRepr {
        &self.repr
    }

    pub fn graph(&self) -> Option<&Arc<LevelGraph>> {
        match &self.repr {
            TerrainRepr::GraphInduced(g) => Some(g),
            TerrainRepr::Explicit(_) => None,
        }
    }

    /// Names of all levels in the underlying id space, not only the universe.
    pub fn level_names(&self) -> &[String] {
        match &self.repr {
            TerrainRepr::GraphInduced(g) => g.levels(),
            TerrainRepr::Explicit(e) => &e.levels,
        }
    }

    /// For graph terrains, the graph induced by the current universe.
    pub fn induced_graph(&self) -> Option<Result<LevelGraph>> {
        self.graph().map(|g| g.induced_subgraph(&self.universe))
    }

    pub(crate) fn universe_mask(&self) -> Mask {
        // Universe ids are validated on construction.
        self.universe.to_mask().unwrap_or(Mask::EMPTY)
    }

    pub(crate) fn contains_mask(&self, s: Mask) -> bool {
        let u = self.universe_mask();
        if s.is_empty() || !s.is_subset_of(u) || s == u {
            return false;
        }
        if s.count() == 1 {
            return true;
        }
        match &self.repr {
            TerrainRepr::GraphInduced(g) => bits::connected(g.adjacency(), s),
            TerrainRepr::Explicit(e) => e.members.contains(&LevelSet::from_mask(s)),
        }
    }

    /// Whether `s` is a member of the terrain.
    pub fn contains(&self, s: &LevelSet) -> Result<bool> {
        if !s.is_subset(&self.universe) {
            return Err(Error::NotASubset);
        }
        Ok(self.contains_mask(s.to_mask()?))
    }

    /// All members, including singletons, in canonical order.
    pub fn members(&self) -> Vec<LevelSet> {
        match &self.repr {
            TerrainRepr::GraphInduced(g) => {
                let u = self.universe_mask();
                let mut out: Vec<LevelSet> =
                    crate::enumerate::connected_masks_within(g.adjacency(), u, usize::MAX)
                        .into_iter()
                        .filter(|&m| m != u)
                        .map(LevelSet::from_mask)
                        .collect();
                out.sort();
                out
            }
            TerrainRepr::Explicit(e) => {
                let mut out: BTreeSet<LevelSet> = e.members.clone();
                out.extend(self.universe.ids().iter().map(|&i| LevelSet::singleton(i)));
                out.into_iter().collect()
            }
        }
    }

    /// Whether every part of `p` is a member. `p` must partition the universe.
    pub fn conforms(&self, p: &Partition) -> Result<bool> {
        if p.universe() != self.universe {
            return Err(Error::WrongUniverse);
        }
        for part in p.parts() {
            if !self.contains_mask(part.to_mask()?) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The restriction to `b`: members of this terrain that are proper
    /// subsets of `b`.
    pub fn restrict(&self, b: &LevelSet) -> Result<Terrain> {
        if !b.is_subset(&self.universe) {
            return Err(Error::NotASubset);
        }
        if b.len() < 2 || b.len() == self.universe.len() {
            return Err(Error::NotProperSubset);
        }
        let repr = match &self.repr {
            TerrainRepr::GraphInduced(g) => {
                if !g.is_connected(b)? {
                    return Err(Error::DisconnectedInduced);
                }
                TerrainRepr::GraphInduced(Arc::clone(g))
            }
            TerrainRepr::Explicit(e) => TerrainRepr::Explicit(ExplicitMembers {
                levels: Arc::clone(&e.levels),
                members: e
                    .members
                    .iter()
                    .filter(|m| m.len() < b.len() && m.is_subset(b))
                    .cloned()
                    .collect(),
            }),
        };
        Ok(Terrain {
            universe: b.clone(),
            repr,
        })
    }
}

/// A set partition in canonical order (parts sorted by smallest id).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    parts: Vec<LevelSet>,
}

impl Partition {
    /// Validates that parts are non-empty and pairwise disjoint.
    pub fn new(parts: Vec<LevelSet>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for part in &parts {
            if part.is_empty() {
                return Err(Error::InvalidTerrain("empty part in partition".into()));
            }
            for &id in part.ids() {
                if !seen.insert(id) {
                    return Err(Error::InvalidTerrain(format!(
                        "level {id} appears in two parts"
                    )));
                }
            }
        }
        Ok(Self::canonical(parts))
    }

    pub(crate) fn canonical(mut parts: Vec<LevelSet>) -> Self {
        parts.sort_by_key(|p| p.smallest());
        Partition { parts }
    }

    pub(crate) fn from_masks(masks: &[Mask]) -> Self {
        Self::canonical(masks.iter().map(|&m| LevelSet::from_mask(m)).collect())
    }

    pub fn parts(&self) -> &[LevelSet] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn universe(&self) -> LevelSet {
        LevelSet::new(self.parts.iter().flat_map(|p| p.ids().iter().copied()))
    }

    /// True iff `self` has fewer parts than `finer` and every part of
    /// `finer` lies inside some part of `self`.
    pub fn is_coarsening_of(&self, finer: &Partition) -> Result<bool> {
        if self.universe() != finer.universe() {
            return Err(Error::WrongUniverse);
        }
        if self.len() >= finer.len() {
            return Ok(false);
        }
        Ok(finer
            .parts
            .iter()
            .all(|small| self.parts.iter().any(|big| small.is_subset(big))))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::graph::Builtin;

    pub(crate) const MAMMALS: [&str; 6] = ["Monkey", "Chimp", "Car", "Truck", "Dog", "Wolf"];

    pub(crate) fn mammal_terrain() -> Terrain {
        let m = |xs: &[&'static str]| xs.to_vec();
        Terrain::explicit(
            &MAMMALS,
            &[
                m(&["Monkey", "Chimp"]),
                m(&["Car", "Truck"]),
                m(&["Dog", "Wolf"]),
                m(&["Monkey", "Chimp", "Dog", "Wolf"]),
            ],
        )
        .unwrap()
    }

    fn ids(names: &[&str]) -> LevelSet {
        names
            .iter()
            .map(|n| MAMMALS.iter().position(|m| m == n).unwrap())
            .collect()
    }

    fn chain(n: usize) -> Terrain {
        Terrain::graph_induced(Arc::new(LevelGraph::builtin(Builtin::Chain(n)).unwrap()))
    }

    #[test]
    fn contains_examples() {
        let t = chain(3);
        assert!(t.contains(&LevelSet::new([0, 1])).unwrap());
        assert!(!t.contains(&LevelSet::new([0, 1, 2])).unwrap());
        assert!(!t.contains(&LevelSet::new([0, 2])).unwrap());
        assert!(matches!(
            t.contains(&LevelSet::new([5])),
            Err(Error::NotASubset)
        ));
        let m = mammal_terrain();
        assert!(!m.contains(&ids(&["Chimp", "Dog"])).unwrap());
        assert!(m.contains(&ids(&["Chimp"])).unwrap());
        assert!(m.contains(&ids(&["Dog", "Wolf", "Monkey", "Chimp"])).unwrap());
    }

    #[test]
    fn conforms_examples() {
        let m = mammal_terrain();
        let singletons = Partition::new((0..6).map(LevelSet::singleton).collect()).unwrap();
        assert!(m.conforms(&singletons).unwrap());
        let whole = Partition::new(vec![LevelSet::new(0..6)]).unwrap();
        assert!(!m.conforms(&whole).unwrap());
        let p = Partition::new(vec![
            ids(&["Monkey", "Chimp", "Dog", "Wolf"]),
            ids(&["Car", "Truck"]),
        ])
        .unwrap();
        assert!(m.conforms(&p).unwrap());
        let short = Partition::new(vec![ids(&["Car", "Truck"])]).unwrap();
        assert!(matches!(m.conforms(&short), Err(Error::WrongUniverse)));
    }

    #[test]
    fn coarsening_examples() {
        let p = |parts: &[&[usize]]| {
            Partition::new(parts.iter().map(|x| LevelSet::new(x.iter().copied())).collect())
                .unwrap()
        };
        let fine = p(&[&[0], &[1], &[2]]);
        assert!(p(&[&[0, 1], &[2]]).is_coarsening_of(&fine).unwrap());
        assert!(!fine.is_coarsening_of(&fine).unwrap());
        assert!(!p(&[&[0, 1], &[2, 3]])
            .is_coarsening_of(&p(&[&[0, 2], &[1], &[3]]))
            .unwrap());
        assert!(matches!(
            p(&[&[0, 1]]).is_coarsening_of(&fine),
            Err(Error::WrongUniverse)
        ));
    }

    #[test]
    fn restrict_graph_terrain() {
        let t = chain(5);
        let r = t.restrict(&LevelSet::new([1, 2, 3])).unwrap();
        let g = r.induced_graph().unwrap().unwrap();
        assert_eq!(g.num_levels(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(!r.contains(&LevelSet::new([1, 2, 3])).unwrap());
        assert!(r.contains(&LevelSet::new([2, 3])).unwrap());
        assert!(matches!(
            t.restrict(&LevelSet::new([0, 4])),
            Err(Error::DisconnectedInduced)
        ));
        assert!(matches!(
            t.restrict(&LevelSet::new([2])),
            Err(Error::NotProperSubset)
        ));
        assert!(matches!(
            t.restrict(&LevelSet::new(0..5)),
            Err(Error::NotProperSubset)
        ));
    }

    #[test]
    fn restrict_mammals_to_animals() {
        let m = mammal_terrain();
        let b = ids(&["Monkey", "Chimp", "Dog", "Wolf"]);
        let r = m.restrict(&b).unwrap();
        // Independent route: filter the hand-written member list.
        let mut expected: Vec<LevelSet> = vec![
            ids(&["Monkey"]),
            ids(&["Chimp"]),
            ids(&["Dog"]),
            ids(&["Wolf"]),
            ids(&["Monkey", "Chimp"]),
            ids(&["Dog", "Wolf"]),
        ];
        expected.sort();
        assert_eq!(r.members(), expected);
        assert!(!r.contains(&b).unwrap());
        assert!(matches!(
            m.restrict(&ids(&["Dog"])),
            Err(Error::NotProperSubset)
        ));
    }

    #[test]
    fn explicit_validation() {
        assert!(Terrain::explicit(&["a"], &[]).is_err());
        assert!(Terrain::explicit(&["a", "b"], &[vec!["a", "b"]]).is_err());
        assert!(Terrain::explicit(&["a", "b"], &[vec!["c"]]).is_err());
        let t = Terrain::explicit(&["a", "b", "c"], &[vec!["a", "b"], vec!["b", "a"]]).unwrap();
        assert_eq!(t.members().len(), 4);
    }

    #[test]
    fn explicit_file_round_trip() {
        let m = mammal_terrain();
        let file = m.to_explicit_file();
        assert_eq!(file.members.len(), 4);
        let back = Terrain::from_explicit_file(&file).unwrap();
        assert_eq!(back.members(), m.members());
    }
}
