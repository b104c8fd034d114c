//! Comparison encodings: one-hot indicators, ordinal ranks, and the siloed
//! per-combination mean model.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{Column, Dataset};
use crate::error::{Error, Result};
use crate::graph::{Builtin, LevelGraph};
use crate::terrain::Terrain;
use crate::tree::TreeFeature;

fn level_column<'a>(d: &'a Dataset, feature: &str) -> Result<(&'a [u32], &'a [String])> {
    let idx = d
        .schema()
        .feature_index(feature)
        .ok_or_else(|| Error::MissingColumn(feature.to_owned()))?;
    let spec = &d.schema().features[idx];
    match (&d.columns()[idx], spec.levels()) {
        (Column::Levels(ids), Some(levels)) => Ok((ids, levels)),
        _ => Err(Error::InvalidSchema(format!(
            "feature `{feature}` is not categorical"
        ))),
    }
}

pub(crate) fn indicator_terrain() -> Terrain {
    let g = LevelGraph::builtin(Builtin::Chain(2)).expect("chain:2 is valid");
    Terrain::graph_induced(Arc::new(g))
}

/// Name of the indicator column for `level` of `feature`.
pub fn one_hot_name(feature: &str, level: &str) -> String {
    format!("{feature}={level}")
}

/// One chain:2 feature per level of `feature`, with values 0 and 1. A
/// feature with a single level yields nothing.
pub fn encode_one_hot(d: &Dataset, feature: &str) -> Result<Vec<TreeFeature>> {
    let (ids, levels) = level_column(d, feature)?;
    Ok(one_hot_columns(feature, levels, ids))
}

pub(crate) fn one_hot_columns(feature: &str, levels: &[String], ids: &[u32]) -> Vec<TreeFeature> {
    if levels.len() < 2 {
        log::warn!("feature `{feature}` has a single level; dropping its indicator column");
        return Vec::new();
    }
    let terrain = indicator_terrain();
    levels
        .iter()
        .enumerate()
        .map(|(l, name)| TreeFeature {
            name: one_hot_name(feature, name),
            terrain: terrain.clone(),
            column: ids.iter().map(|&v| u32::from(v as usize == l)).collect(),
        })
        .collect()
}

/// Level ranks for an ordinal encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalMap {
    pub feature: String,
    /// Declared level names; `ranks[i]` is the rank of `levels[i]`.
    pub levels: Vec<String>,
    pub ranks: Vec<u32>,
    /// Training target means used for ranking; absent for declared order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<f64>>,
}

impl OrdinalMap {
    /// Ranks follow the declared level order.
    pub fn declared(feature: &str, levels: &[String]) -> Self {
        OrdinalMap {
            feature: feature.to_owned(),
            levels: levels.to_vec(),
            ranks: (0..levels.len() as u32).collect(),
            means: None,
        }
    }

    /// Ranks by ascending training mean of `target`, ties to the lower id.
    /// Levels without training rows take the global mean.
    pub fn by_target_mean(feature: &str, levels: &[String], ids: &[u32], target: &[f64]) -> Self {
        let m = levels.len();
        let mut sums = vec![(0.0, 0usize); m];
        for (&l, &y) in ids.iter().zip(target) {
            sums[l as usize].0 += y;
            sums[l as usize].1 += 1;
        }
        let global = if target.is_empty() {
            0.0
        } else {
            target.iter().sum::<f64>() / target.len() as f64
        };
        let means: Vec<f64> = sums
            .iter()
            .enumerate()
            .map(|(l, &(s, n))| {
                if n == 0 {
                    log::warn!(
                        "level `{}` of `{feature}` has no training rows; ranking it at the global mean",
                        levels[l]
                    );
                    global
                } else {
                    s / n as f64
                }
            })
            .collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
        let mut ranks = vec![0u32; m];
        for (r, &l) in order.iter().enumerate() {
            ranks[l] = r as u32;
        }
        OrdinalMap {
            feature: feature.to_owned(),
            levels: levels.to_vec(),
            ranks,
            means: Some(means),
        }
    }

    /// Level names sorted by rank.
    pub fn order(&self) -> Vec<String> {
        let mut order = vec![String::new(); self.levels.len()];
        for (l, &r) in self.ranks.iter().enumerate() {
            order[r as usize] = self.levels[l].clone();
        }
        order
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.levels.len();
        let mut seen = vec![false; m];
        if self.ranks.len() != m || self.means.as_ref().is_some_and(|v| v.len() != m) {
            return Err(Error::InvalidModel(format!(
                "ordinal map for `{}` has inconsistent lengths",
                self.feature
            )));
        }
        for &r in &self.ranks {
            if r as usize >= m || std::mem::replace(&mut seen[r as usize], true) {
                return Err(Error::InvalidModel(format!(
                    "ordinal ranks for `{}` are not a permutation",
                    self.feature
                )));
            }
        }
        Ok(())
    }

    /// Chain terrain over the levels in rank order; level ids of this
    /// terrain are ranks.
    pub fn terrain(&self) -> Result<Terrain> {
        let order = self.order();
        let edges: Vec<(&str, &str)> = order
            .windows(2)
            .map(|w| (w[0].as_str(), w[1].as_str()))
            .collect();
        let g = LevelGraph::build(&self.feature, &order, &edges)?;
        Ok(Terrain::graph_induced(Arc::new(g)))
    }

    pub fn apply(&self, ids: &[u32]) -> Vec<u32> {
        ids.iter().map(|&l| self.ranks[l as usize]).collect()
    }
}

/// Fits a target-mean ordinal map on `train` and returns it with the
/// encoded training column.
pub fn encode_ordinal(train: &Dataset, feature: &str) -> Result<(OrdinalMap, TreeFeature)> {
    let (ids, levels) = level_column(train, feature)?;
    let target = train.require_target()?;
    let map = OrdinalMap::by_target_mean(feature, levels, ids, target);
    let encoded = TreeFeature {
        name: feature.to_owned(),
        terrain: map.terrain()?,
        column: map.apply(ids),
    };
    Ok((map, encoded))
}

/// Empirical target mean per combination of levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SiloedTable {
    features: Vec<String>,
    cells: HashMap<Vec<u32>, (usize, f64)>,
    global_mean: f64,
}

impl SiloedTable {
    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    /// `(count, mean)` for a stored combination.
    pub fn cell(&self, key: &[u32]) -> Option<(usize, f64)> {
        self.cells.get(key).copied()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn predict_key(&self, key: &[u32]) -> f64 {
        self.cells.get(key).map_or(self.global_mean, |&(_, m)| m)
    }

    pub fn predict(&self, d: &Dataset) -> Result<Vec<f64>> {
        let cols = self
            .features
            .iter()
            .map(|f| level_column(d, f).map(|(ids, _)| ids))
            .collect::<Result<Vec<_>>>()?;
        let mut key = vec![0u32; cols.len()];
        Ok((0..d.n_rows())
            .map(|r| {
                for (k, c) in key.iter_mut().zip(&cols) {
                    *k = c[r];
                }
                self.predict_key(&key)
            })
            .collect())
    }
}

pub fn fit_siloed(train: &Dataset, features: &[&str]) -> Result<SiloedTable> {
    if features.is_empty() {
        return Err(Error::InvalidParams(
            "the siloed model needs at least one categorical feature".into(),
        ));
    }
    let target = train.require_target()?;
    if target.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let cols = features
        .iter()
        .map(|f| level_column(train, f).map(|(ids, _)| ids))
        .collect::<Result<Vec<_>>>()?;
    let mut sums: HashMap<Vec<u32>, (usize, f64)> = HashMap::new();
    for (r, &y) in target.iter().enumerate() {
        let key: Vec<u32> = cols.iter().map(|c| c[r]).collect();
        let e = sums.entry(key).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += y;
    }
    let cells = sums
        .into_iter()
        .map(|(k, (n, s))| (k, (n, s / n as f64)))
        .collect();
    Ok(SiloedTable {
        features: features.iter().map(|f| f.to_string()).collect(),
        cells,
        global_mean: target.iter().sum::<f64>() / target.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureKind, FeatureSchema, FeatureSpec, Task};

    fn toy(levels: &[&str], ids: Vec<u32>, y: Vec<f64>) -> Dataset {
        let edges: Vec<(&str, &str)> = levels.windows(2).map(|w| (w[0], w[1])).collect();
        let g = LevelGraph::build("x", levels, &edges).unwrap();
        let schema = FeatureSchema::new(
            "y",
            Task::Binary,
            vec![FeatureSpec::categorical("x", FeatureKind::OneHot, Arc::new(g))],
        )
        .unwrap();
        Dataset::new(Arc::new(schema), vec![Column::Levels(ids)], Some(y)).unwrap()
    }

    #[test]
    fn one_hot_columns_match_levels() {
        let d = toy(&["a", "b", "c"], vec![1, 0, 1, 2], vec![0.0; 4]);
        let cols = encode_one_hot(&d, "x").unwrap();
        assert_eq!(cols.len(), 3);
        assert_eq!(
            cols.iter().map(|c| c.column[0]).collect::<Vec<_>>(),
            vec![0, 1, 0]
        );
        let sums: Vec<u32> = cols.iter().map(|c| c.column.iter().sum()).collect();
        assert_eq!(sums, vec![1, 2, 1]);
        assert_eq!(cols[2].name, "x=c");
        assert_eq!(cols[0].level_names(), ["0", "1"]);
    }

    #[test]
    fn one_hot_single_level_is_dropped() {
        let d = toy(&["only"], vec![0, 0], vec![0.0, 1.0]);
        assert!(encode_one_hot(&d, "x").unwrap().is_empty());
    }

    #[test]
    fn ordinal_ranks_by_mean() {
        // means a:0.9 b:0.1 c:0.5
        let mut ids = Vec::new();
        let mut y = Vec::new();
        for (l, pos) in [(0u32, 9), (1, 1), (2, 5)] {
            for i in 0..10 {
                ids.push(l);
                y.push(if i < pos { 1.0 } else { 0.0 });
            }
        }
        let d = toy(&["a", "b", "c"], ids, y);
        let (map, col) = encode_ordinal(&d, "x").unwrap();
        assert_eq!(map.ranks, vec![2, 0, 1]);
        assert_eq!(map.order(), vec!["b", "c", "a"]);
        assert_eq!(col.column[0], 2);
        assert_eq!(col.level_names(), ["b", "c", "a"]);
        map.validate().unwrap();
    }

    #[test]
    fn ordinal_ties_and_unseen_levels() {
        let levels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let map = OrdinalMap::by_target_mean("x", &levels, &[0, 1], &[0.5, 0.5]);
        // c is unseen and takes the global mean 0.5: a tie with a and b.
        assert_eq!(map.ranks, vec![0, 1, 2]);
        let declared = OrdinalMap::declared("m", &levels);
        assert_eq!(declared.apply(&[2, 0]), vec![2, 0]);
    }

    #[test]
    fn siloed_means_and_fallback() {
        let mut ids = vec![0u32; 10];
        let mut y = vec![0.0; 10];
        y[..3].fill(1.0);
        ids.extend([1, 1]);
        y.extend([1.0, 1.0]);
        let d = toy(&["a", "b", "c"], ids, y);
        let table = fit_siloed(&d, &["x"]).unwrap();
        assert_eq!(table.cell(&[0]), Some((10, 0.3)));
        assert_eq!(table.predict_key(&[2]), 5.0 / 12.0);
        assert_eq!(table.num_cells(), 2);
        assert!(fit_siloed(&d, &[]).is_err());
    }
}
