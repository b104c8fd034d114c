//! Columnar training data under a feature schema.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::graph::{Builtin, GraphFile, LevelGraph};
use crate::terrain::{ExplicitTerrainFile, Terrain};

pub const DEFAULT_MAX_BINS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Binary,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Splits follow the declared graph or explicit terrain.
    Structured,
    /// One binary indicator per level.
    OneHot,
    /// Levels ranked by training target mean, then split as a chain.
    OrdinalTarget,
    /// Levels in declared order, split as a chain.
    OrdinalDeclared,
    /// Real values, binned onto a chain.
    Numeric,
}

impl FeatureKind {
    pub fn is_categorical(self) -> bool {
        !matches!(self, FeatureKind::Numeric)
    }
}

/// One feature entry of a schema file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDecl {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    /// Path to an explicit terrain file; structured features only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terrain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bins: Option<usize>,
}

/// Schema file as written by users.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub target: String,
    pub task: Task,
    pub features: Vec<FeatureDecl>,
}

/// Where a feature's levels and structure come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureSource {
    Graph(Arc<LevelGraph>),
    Terrain(Terrain),
    Numeric { max_bins: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub source: FeatureSource,
}

impl FeatureSpec {
    pub fn structured(name: impl Into<String>, graph: Arc<LevelGraph>) -> Self {
        Self::categorical(name, FeatureKind::Structured, graph)
    }

    pub fn categorical(name: impl Into<String>, kind: FeatureKind, graph: Arc<LevelGraph>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind,
            source: FeatureSource::Graph(graph),
        }
    }

    pub fn numeric(name: impl Into<String>, max_bins: usize) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Numeric,
            source: FeatureSource::Numeric { max_bins },
        }
    }

    /// Declared level names for categorical features.
    pub fn levels(&self) -> Option<&[String]> {
        match &self.source {
            FeatureSource::Graph(g) => Some(g.levels()),
            FeatureSource::Terrain(t) => Some(t.level_names()),
            FeatureSource::Numeric { .. } => None,
        }
    }
}

/// A schema with every graph and terrain resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    pub target: String,
    pub task: Task,
    pub features: Vec<FeatureSpec>,
}

/// Self-contained schema form embedded in model files: graphs and terrains
/// are inlined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaRecord {
    pub target: String,
    pub task: Task,
    pub features: Vec<FeatureRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terrain: Option<ExplicitTerrainFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bins: Option<usize>,
}

impl FeatureSchema {
    pub fn new(target: impl Into<String>, task: Task, features: Vec<FeatureSpec>) -> Result<Self> {
        let schema = FeatureSchema {
            target: target.into(),
            task,
            features,
        };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for f in &self.features {
            if f.name.is_empty() {
                return Err(Error::InvalidSchema("empty feature name".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate feature `{}`", f.name)));
            }
            if f.name == self.target {
                return Err(Error::InvalidSchema(format!(
                    "feature `{}` is also the target",
                    f.name
                )));
            }
            match (&f.source, f.kind) {
                (FeatureSource::Numeric { max_bins }, FeatureKind::Numeric) => {
                    if *max_bins < 2 || *max_bins > crate::graph::MAX_LEVELS {
                        return Err(Error::InvalidSchema(format!(
                            "feature `{}`: max_bins must be in 2..={}",
                            f.name,
                            crate::graph::MAX_LEVELS
                        )));
                    }
                }
                (FeatureSource::Terrain(_), FeatureKind::Structured) => {}
                (FeatureSource::Graph(_), k) if k.is_categorical() => {}
                _ => {
                    return Err(Error::InvalidSchema(format!(
                        "feature `{}`: kind {:?} does not match its level source",
                        f.name, f.kind
                    )))
                }
            }
        }
        Ok(())
    }

    /// Resolves a schema file. Relative graph and terrain paths are taken
    /// relative to `base_dir`.
    pub fn resolve(file: &SchemaFile, base_dir: Option<&Path>) -> Result<Self> {
        let mut features = Vec::with_capacity(file.features.len());
        for decl in &file.features {
            let source = match decl.kind {
                FeatureKind::Numeric => FeatureSource::Numeric {
                    max_bins: decl.max_bins.unwrap_or(DEFAULT_MAX_BINS),
                },
                _ => match (&decl.graph, &decl.terrain) {
                    (Some(g), None) => {
                        FeatureSource::Graph(Arc::new(LevelGraph::from_source(g, base_dir)?))
                    }
                    (None, Some(t)) if decl.kind == FeatureKind::Structured => {
                        let path = match base_dir {
                            Some(dir) if Path::new(t).is_relative() => dir.join(t),
                            _ => Path::new(t).to_path_buf(),
                        };
                        FeatureSource::Terrain(Terrain::load_explicit(&path)?)
                    }
                    _ => {
                        return Err(Error::InvalidSchema(format!(
                            "feature `{}` needs exactly one of `graph` or `terrain` \
                             (`terrain` only for structured features)",
                            decl.name
                        )))
                    }
                },
            };
            features.push(FeatureSpec {
                name: decl.name.clone(),
                kind: decl.kind,
                source,
            });
        }
        Self::new(file.target.clone(), file.task, features)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let file: SchemaFile = serde_json::from_str(&text)?;
        Self::resolve(&file, path.parent())
    }

    pub fn to_record(&self) -> SchemaRecord {
        SchemaRecord {
            target: self.target.clone(),
            task: self.task,
            features: self
                .features
                .iter()
                .map(|f| {
                    let mut rec = FeatureRecord {
                        name: f.name.clone(),
                        kind: f.kind,
                        graph: None,
                        terrain: None,
                        max_bins: None,
                    };
                    match &f.source {
                        FeatureSource::Graph(g) => rec.graph = Some(g.to_file()),
                        FeatureSource::Terrain(t) => rec.terrain = Some(t.to_explicit_file()),
                        FeatureSource::Numeric { max_bins } => rec.max_bins = Some(*max_bins),
                    }
                    rec
                })
                .collect(),
        }
    }

    pub fn from_record(rec: &SchemaRecord) -> Result<Self> {
        let features = rec
            .features
            .iter()
            .map(|f| {
                let source = match (&f.graph, &f.terrain) {
                    (Some(g), _) => FeatureSource::Graph(Arc::new(LevelGraph::from_file(g)?)),
                    (None, Some(t)) => FeatureSource::Terrain(Terrain::from_explicit_file(t)?),
                    (None, None) => FeatureSource::Numeric {
                        max_bins: f.max_bins.unwrap_or(DEFAULT_MAX_BINS),
                    },
                };
                Ok(FeatureSpec {
                    name: f.name.clone(),
                    kind: f.kind,
                    source,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rec.target.clone(), rec.task, features)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Copy of the schema with feature kinds replaced by name.
    pub fn with_kinds(&self, kinds: &[(&str, FeatureKind)]) -> Result<Self> {
        let mut out = self.clone();
        for (name, kind) in kinds {
            let idx = self
                .feature_index(name)
                .ok_or_else(|| Error::InvalidSchema(format!("no feature `{name}`")))?;
            out.features[idx].kind = *kind;
        }
        out.validate()?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    /// Level ids into the feature's declared level list.
    Levels(Vec<u32>),
    Numeric(Vec<f64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Levels(v) => v.len(),
            Column::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Levels(v) => Column::Levels(rows.iter().map(|&r| v[r]).collect()),
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

/// Validated columnar data. The target is optional so that prediction
/// inputs can be loaded under the training schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<FeatureSchema>,
    columns: Vec<Column>,
    target: Option<Vec<f64>>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(
        schema: Arc<FeatureSchema>,
        columns: Vec<Column>,
        target: Option<Vec<f64>>,
    ) -> Result<Self> {
        if columns.len() != schema.features.len() {
            return Err(Error::InvalidSchema(format!(
                "{} columns for {} features",
                columns.len(),
                schema.features.len()
            )));
        }
        let n_rows = target
            .as_ref()
            .map(Vec::len)
            .or_else(|| columns.first().map(Column::len))
            .unwrap_or(0);
        for (spec, col) in schema.features.iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::LengthMismatch(col.len(), n_rows));
            }
            match (col, spec.levels()) {
                (Column::Levels(ids), Some(levels)) => {
                    if let Some(row) = ids.iter().position(|&i| i as usize >= levels.len()) {
                        return Err(Error::UnknownLevel {
                            row,
                            feature: spec.name.clone(),
                            value: ids[row].to_string(),
                        });
                    }
                }
                (Column::Numeric(_), None) => {}
                _ => {
                    return Err(Error::InvalidSchema(format!(
                        "column type of `{}` does not match its kind",
                        spec.name
                    )))
                }
            }
        }
        if let (Some(t), Task::Binary) = (&target, schema.task) {
            if let Some(row) = t.iter().position(|&y| y != 0.0 && y != 1.0) {
                return Err(Error::NonBinaryTarget {
                    row,
                    value: t[row].to_string(),
                });
            }
        }
        Ok(Dataset {
            schema,
            columns,
            target,
            n_rows,
        })
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.schema.feature_index(name).map(|i| &self.columns[i])
    }

    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    pub fn require_target(&self) -> Result<&[f64]> {
        self.target()
            .ok_or_else(|| Error::MissingColumn(self.schema.target.clone()))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Same rows under a different schema with identical level sources.
    pub fn with_schema(&self, schema: Arc<FeatureSchema>) -> Result<Self> {
        Dataset::new(schema, self.columns.clone(), self.target.clone())
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            target: self
                .target
                .as_ref()
                .map(|t| rows.iter().map(|&r| t[r]).collect()),
            n_rows: rows.len(),
        }
    }

    /// Level name (or formatted number) of one cell.
    pub fn cell(&self, feature: usize, row: usize) -> String {
        match &self.columns[feature] {
            Column::Levels(ids) => self.schema.features[feature]
                .levels()
                .map(|l| l[ids[row] as usize].clone())
                .unwrap_or_default(),
            Column::Numeric(v) => v[row].to_string(),
        }
    }
}

/// Writes `d` as CSV: one column per feature, then the target if present.
pub fn write_dataset<W: std::io::Write>(d: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let schema = d.schema();
    let mut header: Vec<&str> = schema.features.iter().map(|f| f.name.as_str()).collect();
    if d.target().is_some() {
        header.push(&schema.target);
    }
    w.write_record(&header)?;
    for r in 0..d.n_rows() {
        let mut rec: Vec<String> = (0..schema.features.len()).map(|f| d.cell(f, r)).collect();
        if let Some(t) = d.target() {
            rec.push(t[r].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(Path::new("<csv output>")))?;
    Ok(())
}

/// How [`load_dataset_with`] treats the target column and unknown levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    /// Target required; unknown levels are data errors.
    Training,
    /// Target read if present; unknown levels are reported as prediction
    /// errors.
    Prediction,
}

pub fn load_dataset(csv_path: &Path, schema: Arc<FeatureSchema>) -> Result<Dataset> {
    load_dataset_with(csv_path, schema, LoadMode::Training)
}

pub fn load_dataset_with(
    csv_path: &Path,
    schema: Arc<FeatureSchema>,
    mode: LoadMode,
) -> Result<Dataset> {
    let file = std::fs::File::open(csv_path).map_err(io_err(csv_path))?;
    read_dataset(file, schema, mode)
}

pub fn read_dataset<R: std::io::Read>(
    reader: R,
    schema: Arc<FeatureSchema>,
    mode: LoadMode,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();

    let mut col_idx = Vec::with_capacity(schema.features.len());
    for f in &schema.features {
        let i = position
            .get(f.name.as_str())
            .copied()
            .ok_or_else(|| Error::MissingColumn(f.name.clone()))?;
        col_idx.push(i);
    }
    let target_idx = match (position.get(schema.target.as_str()), mode) {
        (Some(&i), _) => Some(i),
        (None, LoadMode::Prediction) => None,
        (None, LoadMode::Training) => return Err(Error::MissingColumn(schema.target.clone())),
    };
    let lookups: Vec<Option<HashMap<&str, u32>>> = schema
        .features
        .iter()
        .map(|f| {
            f.levels().map(|levels| {
                levels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.as_str(), i as u32))
                    .collect()
            })
        })
        .collect();

    let mut columns: Vec<Column> = schema
        .features
        .iter()
        .map(|f| match f.levels() {
            Some(_) => Column::Levels(Vec::new()),
            None => Column::Numeric(Vec::new()),
        })
        .collect();
    let mut target = target_idx.map(|_| Vec::new());

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |i: usize, column: &str| -> Result<&str> {
            match record.get(i).map(str::trim) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(Error::MissingValue {
                    row,
                    column: column.to_owned(),
                }),
            }
        };
        for (f, ((spec, &ci), col)) in schema
            .features
            .iter()
            .zip(&col_idx)
            .zip(columns.iter_mut())
            .enumerate()
        {
            let value = field(ci, &spec.name)?;
            match col {
                Column::Levels(ids) => {
                    let lookup = lookups[f].as_ref().expect("categorical lookup");
                    let id = lookup.get(value).copied().ok_or_else(|| match mode {
                        LoadMode::Training => Error::UnknownLevel {
                            row,
                            feature: spec.name.clone(),
                            value: value.to_owned(),
                        },
                        LoadMode::Prediction => Error::UnknownLevelAtPredict {
                            row,
                            feature: spec.name.clone(),
                            value: value.to_owned(),
                        },
                    })?;
                    ids.push(id);
                }
                Column::Numeric(xs) => {
                    let x: f64 = value.parse().map_err(|_| Error::ParseNumber {
                        row,
                        column: spec.name.clone(),
                        value: value.to_owned(),
                    })?;
                    if !x.is_finite() {
                        return Err(Error::ParseNumber {
                            row,
                            column: spec.name.clone(),
                            value: value.to_owned(),
                        });
                    }
                    xs.push(x);
                }
            }
        }
        if let (Some(ti), Some(t)) = (target_idx, target.as_mut()) {
            let value = field(ti, &schema.target)?;
            let y = match schema.task {
                Task::Binary => match value {
                    "0" | "0.0" => 0.0,
                    "1" | "1.0" => 1.0,
                    _ => {
                        return Err(Error::NonBinaryTarget {
                            row,
                            value: value.to_owned(),
                        })
                    }
                },
                Task::Regression => value.parse().map_err(|_| Error::ParseNumber {
                    row,
                    column: schema.target.clone(),
                    value: value.to_owned(),
                })?,
            };
            t.push(y);
        }
    }
    Dataset::new(schema, columns, target)
}

/// Bin assignment for a numeric column onto a chain of bins.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericBinning {
    /// Sorted cut points; a value goes to the number of cuts strictly below it.
    pub thresholds: Vec<f64>,
    pub ids: Vec<u32>,
    pub graph: LevelGraph,
}

impl NumericBinning {
    pub fn num_bins(&self) -> usize {
        self.thresholds.len() + 1
    }
}

/// Bin index for `x` given sorted cut points. Values outside the training
/// range clamp to the extreme bins.
pub fn bin_of(thresholds: &[f64], x: f64) -> u32 {
    thresholds.partition_point(|&t| t < x) as u32
}

/// One bin per distinct value when there are at most `max_bins` of them,
/// otherwise equal-frequency bins. Cut points sit halfway between adjacent
/// distinct values.
pub fn bin_numeric(values: &[f64], max_bins: usize) -> Result<NumericBinning> {
    if max_bins < 2 {
        return Err(Error::InvalidParams("max_bins must be at least 2".into()));
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::ConstantColumn);
    }
    let thresholds: Vec<f64> = if distinct.len() <= max_bins {
        distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect()
    } else {
        let n = sorted.len();
        let mut cuts = Vec::with_capacity(max_bins - 1);
        for j in 1..max_bins {
            let idx = j * n / max_bins;
            // Move the cut onto the next change of value.
            let mut k = idx.max(1);
            while k < n && sorted[k - 1] == sorted[k] {
                k += 1;
            }
            if k < n {
                let cut = midpoint(sorted[k - 1], sorted[k]);
                if cuts.last().map_or(true, |&last| cut > last) {
                    cuts.push(cut);
                }
            }
        }
        cuts
    };
    let ids = values.iter().map(|&x| bin_of(&thresholds, x)).collect();
    let graph = LevelGraph::builtin(Builtin::Chain(thresholds.len() + 1))?;
    Ok(NumericBinning {
        thresholds,
        ids,
        graph,
    })
}

fn midpoint(a: f64, b: f64) -> f64 {
    a + (b - a) / 2.0
}

/// Seeded disjoint split into `(train, test)`; rows keep their original
/// relative order on each side.
pub fn split_train_test(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::EmptySplit);
    }
    let n = d.n_rows();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::EmptySplit);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test: Vec<usize> = order[..n_test].to_vec();
    let mut train: Vec<usize> = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((d.select(&train), d.select(&test)))
}
