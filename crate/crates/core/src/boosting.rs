//! Gradient boosting with log-loss or squared error over structured trees.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureSchema, SchemaRecord, Task};
use crate::encode::{FeatureEncoder, Preprocessing};
use crate::enumerate::PartitionCache;
use crate::error::{io_err, Error, Result};
use crate::graph::LevelSet;
use crate::tree::{fit_tree, mix_seed, Branch, GradHess, Node, Tree, TreeFeature, TreeParams};

/// Probability floor and ceiling used inside log-loss.
pub const PROB_CLIP: f64 = 1e-15;

pub fn logistic(margin: f64) -> f64 {
    if margin >= 0.0 {
        1.0 / (1.0 + (-margin).exp())
    } else {
        let e = margin.exp();
        e / (1.0 + e)
    }
}

/// Gradient and hessian of the log-loss with respect to the margin.
pub fn logloss_grad_hess(margin: f64, y: f64) -> (f64, f64) {
    let p = logistic(margin);
    (p - y, p * (1.0 - p))
}

/// Mean negative log-likelihood of `targets` under `probs`.
pub fn evaluate_logloss(probs: &[f64], targets: &[f64]) -> Result<f64> {
    if probs.len() != targets.len() {
        return Err(Error::LengthMismatch(probs.len(), targets.len()));
    }
    if probs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total: f64 = probs
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / probs.len() as f64)
}

pub fn mean_squared_error(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch(preds.len(), targets.len()));
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total: f64 = preds.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok(total / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    /// Validation loss is recorded after every `eval_every` trees.
    pub eval_every: usize,
    pub tree: TreeParams,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_trees: 100,
            learning_rate: 0.1,
            eval_every: 20,
            tree: TreeParams::default(),
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::InvalidParams("n_trees must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidParams("learning_rate must be in (0, 1]".into()));
        }
        if self.eval_every < 1 {
            return Err(Error::InvalidParams("eval_every must be at least 1".into()));
        }
        self.tree.validate()
    }
}

/// Loss at one checkpoint of the boosting loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub checkpoints: Vec<Checkpoint>,
    /// Number of trees kept in the returned model.
    pub best_iteration: usize,
    pub best_valid_loss: Option<f64>,
    /// Training loss of the returned model.
    pub train_loss: f64,
}

/// Additive model: `base_score + learning_rate * sum of tree outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedEnsemble {
    pub task: Task,
    pub base_score: f64,
    pub learning_rate: f64,
    pub schema: Arc<FeatureSchema>,
    pub preprocessing: Preprocessing,
    pub trees: Vec<Tree>,
}

struct Loss {
    task: Task,
}

impl Loss {
    fn grad_hess(&self, margins: &[f64], y: &[f64]) -> GradHess {
        let (grad, hess) = match self.task {
            Task::Binary => margins
                .iter()
                .zip(y)
                .map(|(&m, &y)| logloss_grad_hess(m, y))
                .unzip(),
            Task::Regression => margins.iter().zip(y).map(|(&m, &y)| (m - y, 1.0)).unzip(),
        };
        GradHess { grad, hess }
    }

    fn evaluate(&self, margins: &[f64], y: &[f64]) -> Result<f64> {
        match self.task {
            Task::Binary => {
                let p: Vec<f64> = margins.iter().map(|&m| logistic(m)).collect();
                evaluate_logloss(&p, y)
            }
            Task::Regression => mean_squared_error(margins, y),
        }
    }

    fn base_score(&self, y: &[f64]) -> f64 {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        match self.task {
            Task::Regression => mean,
            Task::Binary => {
                let lo = 0.5 / n;
                let p = if mean < lo || mean > 1.0 - lo {
                    log::warn!("training target is all {}; clamping the base rate", mean.round());
                    mean.clamp(lo, 1.0 - lo)
                } else {
                    mean
                };
                (p / (1.0 - p)).ln()
            }
        }
    }
}

/// Row-major level ids, one slot per encoded feature.
struct Rows {
    width: usize,
    ids: Vec<u32>,
}

impl Rows {
    fn new(features: &[TreeFeature], n: usize) -> Self {
        let width = features.len();
        let mut ids = vec![0; n * width];
        for (j, f) in features.iter().enumerate() {
            for (r, &v) in f.column.iter().enumerate() {
                ids[r * width + j] = v;
            }
        }
        Rows { width, ids }
    }

    fn row(&self, r: usize) -> &[u32] {
        &self.ids[r * self.width..(r + 1) * self.width]
    }
}

fn add_tree(
    margins: &mut [f64],
    tree: &Tree,
    rows: &Rows,
    features: &[TreeFeature],
    lr: f64,
) -> Result<()> {
    for (r, m) in margins.iter_mut().enumerate() {
        let levels = rows.row(r);
        let w = tree.predict_levels(levels).map_err(|f| {
            let feature = &features[f];
            Error::UnknownLevelAtPredict {
                row: r,
                feature: feature.name.clone(),
                value: feature
                    .level_names()
                    .get(levels[f] as usize)
                    .cloned()
                    .unwrap_or_else(|| levels[f].to_string()),
            }
        })?;
        *m += lr * w;
    }
    Ok(())
}

/// Result of [`fit_ensemble`].
#[derive(Debug, Clone)]
pub struct Fit {
    pub model: BoostedEnsemble,
    pub report: FitReport,
}

pub fn fit_ensemble(train: &Dataset, valid: Option<&Dataset>, params: &BoostParams) -> Result<Fit> {
    fit_ensemble_with_cache(train, valid, params, &PartitionCache::new())
}

/// Boosts trees on `train`. With `valid`, the loss is checked every
/// `eval_every` trees and after the last one, and the model is cut back to
/// the best checkpoint.
pub fn fit_ensemble_with_cache(
    train: &Dataset,
    valid: Option<&Dataset>,
    params: &BoostParams,
    cache: &PartitionCache,
) -> Result<Fit> {
    params.validate()?;
    let y = train.require_target()?;
    let n = train.n_rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let schema = train.schema().clone();
    let loss = Loss { task: schema.task };

    let preprocessing = Preprocessing::fit(train)?;
    let features = preprocessing.encode(train)?;
    let rows = Rows::new(&features, n);

    let valid = match valid {
        Some(v) => {
            if v.schema() != &schema {
                return Err(Error::InvalidSchema(
                    "validation data uses a different schema".into(),
                ));
            }
            let vf = preprocessing.encode(v)?;
            let vr = Rows::new(&vf, v.n_rows());
            Some((v.require_target()?, vf, vr))
        }
        None => None,
    };

    let base_score = loss.base_score(y);
    let lr = params.learning_rate;
    let mut margins = vec![base_score; n];
    let mut valid_margins = valid
        .as_ref()
        .map(|(vy, _, _)| vec![base_score; vy.len()]);

    let mut trees = Vec::with_capacity(params.n_trees);
    let mut checkpoints = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for t in 0..params.n_trees {
        let targets = loss.grad_hess(&margins, y);
        let tree_params = TreeParams {
            seed: mix_seed(params.tree.seed, t as u64),
            ..params.tree.clone()
        };
        let tree = fit_tree(&features, &targets, &tree_params, cache)?;
        add_tree(&mut margins, &tree, &rows, &features, lr)?;
        if let (Some((_, vf, vr)), Some(vm)) = (&valid, valid_margins.as_mut()) {
            add_tree(vm, &tree, vr, vf, lr)?;
        }
        trees.push(tree);

        let done = t + 1;
        if done % params.eval_every == 0 || done == params.n_trees {
            let train_loss = loss.evaluate(&margins, y)?;
            let valid_loss = match (&valid, &valid_margins) {
                (Some((vy, _, _)), Some(vm)) => Some(loss.evaluate(vm, vy)?),
                _ => None,
            };
            if let Some(v) = valid_loss {
                if best.map_or(true, |(_, b)| v < b) {
                    best = Some((done, v));
                }
            }
            log::debug!("trees={done} train_loss={train_loss:.6} valid_loss={valid_loss:?}");
            checkpoints.push(Checkpoint {
                iteration: done,
                train_loss,
                valid_loss,
            });
        }
    }

    let (best_iteration, best_valid_loss) = match best {
        Some((i, v)) => (i, Some(v)),
        None => (trees.len(), None),
    };
    trees.truncate(best_iteration);
    let train_loss = checkpoints
        .iter()
        .find(|c| c.iteration == best_iteration)
        .map(|c| c.train_loss)
        .expect("best iteration is a checkpoint");

    Ok(Fit {
        model: BoostedEnsemble {
            task: schema.task,
            base_score,
            learning_rate: lr,
            schema,
            preprocessing,
            trees,
        },
        report: FitReport {
            checkpoints,
            best_iteration,
            best_valid_loss,
            train_loss,
        },
    })
}

impl BoostedEnsemble {
    fn check_schema(&self, d: &Dataset) -> Result<()> {
        if d.schema().as_ref() != self.schema.as_ref() {
            return Err(Error::InvalidSchema(
                "data schema does not match the model".into(),
            ));
        }
        Ok(())
    }

    pub fn predict_margin(&self, d: &Dataset) -> Result<Vec<f64>> {
        self.check_schema(d)?;
        let features = self.preprocessing.encode(d)?;
        let rows = Rows::new(&features, d.n_rows());
        let mut margins = vec![self.base_score; d.n_rows()];
        for tree in &self.trees {
            add_tree(&mut margins, tree, &rows, &features, self.learning_rate)?;
        }
        Ok(margins)
    }

    pub fn predict_proba(&self, d: &Dataset) -> Result<Vec<f64>> {
        Ok(self.predict_margin(d)?.into_iter().map(logistic).collect())
    }

    /// Probabilities for binary models, raw margins for regression.
    pub fn predict(&self, d: &Dataset) -> Result<Vec<f64>> {
        match self.task {
            Task::Binary => self.predict_proba(d),
            Task::Regression => self.predict_margin(d),
        }
    }

    /// Log-loss (binary) or mean squared error (regression) on `d`.
    pub fn evaluate(&self, d: &Dataset) -> Result<f64> {
        let loss = Loss { task: self.task };
        loss.evaluate(&self.predict_margin(d)?, d.require_target()?)
    }

    pub fn to_record(&self) -> ModelRecord {
        let trees = self
            .trees
            .iter()
            .map(|t| TreeRecord {
                nodes: t
                    .nodes
                    .iter()
                    .enumerate()
                    .map(|(id, node)| match node {
                        Node::Leaf { weight } => NodeRecord {
                            id,
                            weight: Some(*weight),
                            ..Default::default()
                        },
                        Node::Split {
                            feature,
                            gain,
                            branches,
                        } => {
                            let terrain = self.preprocessing.output_terrain(*feature);
                            let names = terrain.level_names();
                            NodeRecord {
                                id,
                                feature: self
                                    .preprocessing
                                    .output_names()
                                    .nth(*feature)
                                    .map(str::to_owned),
                                gain: Some(*gain),
                                branches: Some(
                                    branches
                                        .iter()
                                        .map(|b| BranchRecord {
                                            levels: b
                                                .levels
                                                .ids()
                                                .iter()
                                                .map(|&i| names[i].clone())
                                                .collect(),
                                            child: b.child,
                                        })
                                        .collect(),
                                ),
                                weight: None,
                            }
                        }
                    })
                    .collect(),
            })
            .collect();
        ModelRecord {
            task: self.task,
            base_score: self.base_score,
            learning_rate: self.learning_rate,
            schema: self.schema.to_record(),
            preprocessing: self.preprocessing.encoders().to_vec(),
            trees,
        }
    }

    pub fn from_record(rec: &ModelRecord) -> Result<Self> {
        let schema = Arc::new(FeatureSchema::from_record(&rec.schema)?);
        if schema.task != rec.task {
            return Err(Error::InvalidModel("model task differs from its schema".into()));
        }
        if !rec.base_score.is_finite() || !(rec.learning_rate > 0.0) {
            return Err(Error::InvalidModel("bad base_score or learning_rate".into()));
        }
        let preprocessing = Preprocessing::from_encoders(&schema, rec.preprocessing.clone())?;
        let trees = rec
            .trees
            .iter()
            .map(|t| tree_from_record(t, &preprocessing))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoostedEnsemble {
            task: rec.task,
            base_score: rec.base_score,
            learning_rate: rec.learning_rate,
            schema,
            preprocessing,
            trees,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_record(&serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = self.to_json()?;
        json.push('\n');
        std::fs::write(path, json).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&s)
    }
}

fn tree_from_record(rec: &TreeRecord, pre: &Preprocessing) -> Result<Tree> {
    let bad = |msg: String| Error::InvalidModel(msg);
    if rec.nodes.is_empty() {
        return Err(bad("tree without nodes".into()));
    }
    let mut nodes = Vec::with_capacity(rec.nodes.len());
    for (pos, n) in rec.nodes.iter().enumerate() {
        if n.id != pos {
            return Err(bad(format!("node id {} at position {pos}", n.id)));
        }
        let node = match (&n.feature, &n.branches, n.weight) {
            (None, None, Some(weight)) if weight.is_finite() => Node::Leaf { weight },
            (Some(name), Some(branches), None) => {
                let feature = pre
                    .output_index(name)
                    .ok_or_else(|| bad(format!("unknown feature `{name}` in tree")))?;
                let terrain = pre.output_terrain(feature);
                let names = terrain.level_names();
                let mut seen = LevelSet::new([]);
                let mut out = Vec::with_capacity(branches.len());
                for b in branches {
                    if b.child <= pos || b.child >= rec.nodes.len() {
                        return Err(bad(format!("node {pos} has invalid child {}", b.child)));
                    }
                    let ids = b
                        .levels
                        .iter()
                        .map(|l| {
                            names
                                .iter()
                                .position(|x| x == l)
                                .ok_or_else(|| bad(format!("unknown level `{l}` of `{name}`")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let levels = LevelSet::new(ids);
                    if levels.is_empty() || levels.ids().iter().any(|&i| seen.contains(i)) {
                        return Err(bad(format!("branches of node {pos} overlap or are empty")));
                    }
                    seen = seen.ids().iter().chain(levels.ids()).copied().collect();
                    out.push(Branch {
                        levels,
                        child: b.child,
                    });
                }
                if out.len() < 2 {
                    return Err(bad(format!("node {pos} has fewer than two branches")));
                }
                Node::Split {
                    feature,
                    gain: n.gain.unwrap_or(f64::NAN),
                    branches: out,
                }
            }
            _ => return Err(bad(format!("node {pos} is neither a leaf nor a split"))),
        };
        nodes.push(node);
    }
    Ok(Tree { nodes })
}

/// Serialized model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub task: Task,
    pub base_score: f64,
    pub learning_rate: f64,
    pub schema: SchemaRecord,
    pub preprocessing: Vec<FeatureEncoder>,
    pub trees: Vec<TreeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<Vec<BranchRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub levels: Vec<String>,
    pub child: usize,
}
