//! Fitted per-feature encoders that turn a [`Dataset`] into tree inputs.

use serde::{Deserialize, Serialize};

use crate::baselines::{indicator_terrain, one_hot_columns, one_hot_name, OrdinalMap};
use crate::dataset::{bin_numeric, bin_of, Column, Dataset, FeatureKind, FeatureSchema, FeatureSource};
use crate::error::{Error, Result};
use crate::graph::{Builtin, LevelGraph};
use crate::terrain::Terrain;
use crate::tree::TreeFeature;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "snake_case")]
pub enum FeatureEncoder {
    /// Level ids pass through with the declared graph or terrain.
    Structured { feature: String },
    OneHot { feature: String, levels: Vec<String> },
    Ordinal(OrdinalMap),
    Numeric { feature: String, thresholds: Vec<f64> },
    /// Constant at fit time; contributes no columns.
    Dropped { feature: String },
}

impl FeatureEncoder {
    pub fn feature(&self) -> &str {
        match self {
            FeatureEncoder::Structured { feature }
            | FeatureEncoder::OneHot { feature, .. }
            | FeatureEncoder::Numeric { feature, .. }
            | FeatureEncoder::Dropped { feature } => feature,
            FeatureEncoder::Ordinal(m) => &m.feature,
        }
    }
}

/// Encoders for every schema feature plus the terrains of their outputs.
#[derive(Debug, Clone)]
pub struct Preprocessing {
    encoders: Vec<FeatureEncoder>,
    outputs: Vec<(String, Terrain)>,
}

impl PartialEq for Preprocessing {
    fn eq(&self, other: &Self) -> bool {
        self.encoders == other.encoders
    }
}

impl Preprocessing {
    /// Fits encoders on training rows. Only ordinal-by-target encoders look
    /// at the target.
    pub fn fit(train: &Dataset) -> Result<Self> {
        let schema = train.schema().clone();
        let mut encoders = Vec::with_capacity(schema.features.len());
        for (spec, column) in schema.features.iter().zip(train.columns()) {
            let name = spec.name.clone();
            let enc = match (spec.kind, column) {
                (FeatureKind::Structured, _) => FeatureEncoder::Structured { feature: name },
                (FeatureKind::OneHot, _) => {
                    let levels = spec.levels().unwrap_or_default();
                    if levels.len() < 2 {
                        log::warn!("feature `{name}` has a single level; dropping it");
                        FeatureEncoder::Dropped { feature: name }
                    } else {
                        FeatureEncoder::OneHot {
                            feature: name,
                            levels: levels.to_vec(),
                        }
                    }
                }
                (FeatureKind::OrdinalTarget, Column::Levels(ids)) => {
                    let levels = spec.levels().unwrap_or_default();
                    FeatureEncoder::Ordinal(OrdinalMap::by_target_mean(
                        &name,
                        levels,
                        ids,
                        train.require_target()?,
                    ))
                }
                (FeatureKind::OrdinalDeclared, _) => FeatureEncoder::Ordinal(
                    OrdinalMap::declared(&name, spec.levels().unwrap_or_default()),
                ),
                (FeatureKind::Numeric, Column::Numeric(values)) => {
                    let FeatureSource::Numeric { max_bins } = spec.source else {
                        return Err(Error::InvalidSchema(format!("`{name}` has no bin count")));
                    };
                    match bin_numeric(values, max_bins) {
                        Ok(b) => FeatureEncoder::Numeric {
                            feature: name,
                            thresholds: b.thresholds,
                        },
                        Err(Error::ConstantColumn) => {
                            log::warn!("numeric feature `{name}` is constant; dropping it");
                            FeatureEncoder::Dropped { feature: name }
                        }
                        Err(e) => return Err(e),
                    }
                }
                _ => {
                    return Err(Error::InvalidSchema(format!(
                        "column type of `{name}` does not match its kind"
                    )))
                }
            };
            encoders.push(enc);
        }
        Self::from_encoders(&schema, encoders)
    }

    /// Rebuilds output terrains from stored encoders, checking them against
    /// the schema.
    pub fn from_encoders(schema: &FeatureSchema, encoders: Vec<FeatureEncoder>) -> Result<Self> {
        if encoders.len() != schema.features.len() {
            return Err(Error::InvalidModel(
                "preprocessing does not cover every schema feature".into(),
            ));
        }
        let mut outputs = Vec::new();
        for (spec, enc) in schema.features.iter().zip(&encoders) {
            if enc.feature() != spec.name {
                return Err(Error::InvalidModel(format!(
                    "encoder for `{}` found where `{}` was expected",
                    enc.feature(),
                    spec.name
                )));
            }
            let mismatch = || Error::InvalidModel(format!("encoder for `{}` does not fit its schema entry", spec.name));
            match enc {
                FeatureEncoder::Structured { .. } => {
                    let terrain = match &spec.source {
                        FeatureSource::Graph(g) => Terrain::graph_induced(Arc::clone(g)),
                        FeatureSource::Terrain(t) => t.clone(),
                        FeatureSource::Numeric { .. } => return Err(mismatch()),
                    };
                    outputs.push((spec.name.clone(), terrain));
                }
                FeatureEncoder::OneHot { levels, .. } => {
                    if spec.levels() != Some(&levels[..]) {
                        return Err(mismatch());
                    }
                    for l in levels {
                        outputs.push((one_hot_name(&spec.name, l), indicator_terrain()));
                    }
                }
                FeatureEncoder::Ordinal(map) => {
                    if spec.levels() != Some(&map.levels[..]) {
                        return Err(mismatch());
                    }
                    map.validate()?;
                    outputs.push((spec.name.clone(), map.terrain()?));
                }
                FeatureEncoder::Numeric { thresholds, .. } => {
                    if !matches!(spec.source, FeatureSource::Numeric { .. })
                        || thresholds.windows(2).any(|w| !(w[0] < w[1]))
                    {
                        return Err(mismatch());
                    }
                    let g = LevelGraph::builtin(Builtin::Chain(thresholds.len() + 1))?;
                    outputs.push((spec.name.clone(), Terrain::graph_induced(Arc::new(g))));
                }
                FeatureEncoder::Dropped { .. } => {}
            }
        }
        Ok(Preprocessing { encoders, outputs })
    }

    pub fn encoders(&self) -> &[FeatureEncoder] {
        &self.encoders
    }

    /// Names of the encoded features, in the order trees index them.
    pub fn output_names(&self) -> impl Iterator<Item = &str> {
        self.outputs.iter().map(|(n, _)| n.as_str())
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn output_terrain(&self, i: usize) -> &Terrain {
        &self.outputs[i].1
    }

    pub fn output_index(&self, name: &str) -> Option<usize> {
        self.outputs.iter().position(|(n, _)| n == name)
    }

    pub fn encode(&self, d: &Dataset) -> Result<Vec<TreeFeature>> {
        let schema = d.schema();
        if schema.features.len() != self.encoders.len() {
            return Err(Error::InvalidSchema(
                "dataset schema does not match the preprocessing".into(),
            ));
        }
        let mut out = Vec::with_capacity(self.outputs.len());
        for (enc, column) in self.encoders.iter().zip(d.columns()) {
            match (enc, column) {
                (FeatureEncoder::Structured { .. }, Column::Levels(ids)) => {
                    out.push(ids.clone());
                }
                (FeatureEncoder::OneHot { feature, levels }, Column::Levels(ids)) => {
                    out.extend(one_hot_columns(feature, levels, ids).into_iter().map(|f| f.column));
                }
                (FeatureEncoder::Ordinal(map), Column::Levels(ids)) => out.push(map.apply(ids)),
                (FeatureEncoder::Numeric { thresholds, .. }, Column::Numeric(values)) => {
                    out.push(values.iter().map(|&x| bin_of(thresholds, x)).collect());
                }
                (FeatureEncoder::Dropped { .. }, _) => {}
                _ => {
                    return Err(Error::InvalidSchema(format!(
                        "column type of `{}` does not match its encoder",
                        enc.feature()
                    )))
                }
            }
        }
        Ok(out
            .into_iter()
            .zip(&self.outputs)
            .map(|(column, (name, terrain))| TreeFeature {
                name: name.clone(),
                terrain: terrain.clone(),
                column,
            })
            .collect())
    }
}
