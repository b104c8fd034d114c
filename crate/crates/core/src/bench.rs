//! Benchmark harness comparing categorical encodings on synthetic rain data.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::baselines::fit_siloed;
use crate::boosting::{evaluate_logloss, fit_ensemble_with_cache, BoostParams};
use crate::dataset::{Dataset, FeatureKind};
use crate::enumerate::PartitionCache;
use crate::error::{Error, Result};
use crate::synth::{RainTruth, SyntheticRainConfig};
use crate::tree::{mix_seed, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    OneHot,
    Ordinal,
    Structured,
    Siloed,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::OneHot,
        Method::Ordinal,
        Method::Structured,
        Method::Siloed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::OneHot => "one_hot",
            Method::Ordinal => "ordinal",
            Method::Structured => "structured",
            Method::Siloed => "siloed",
        }
    }

    fn is_boosted(self) -> bool {
        self != Method::Siloed
    }

    /// Feature kinds for `county` and `month` under this method.
    fn kinds(self) -> [(&'static str, FeatureKind); 2] {
        match self {
            Method::OneHot => [("county", FeatureKind::OneHot), ("month", FeatureKind::OneHot)],
            Method::Ordinal => [
                ("county", FeatureKind::OrdinalTarget),
                ("month", FeatureKind::OrdinalDeclared),
            ],
            Method::Structured | Method::Siloed => [
                ("county", FeatureKind::Structured),
                ("month", FeatureKind::Structured),
            ],
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub synth: SyntheticRainConfig,
    /// Training sizes, ascending.
    pub sizes: Vec<usize>,
    /// One repeat per seed; each draws its own training stream and test set.
    pub repeats: Vec<u64>,
    pub methods: Vec<Method>,
    /// Depths tried for every boosted method.
    pub depths: Vec<usize>,
    pub test_size: usize,
    /// Tree depth is taken from `depths`. `max_splits_to_search` applies
    /// to the structured method only.
    pub boost: BoostParams,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            synth: SyntheticRainConfig::default(),
            sizes: vec![500, 2000],
            repeats: vec![1, 2, 3],
            methods: Method::ALL.to_vec(),
            depths: vec![2, 3],
            test_size: 20_000,
            boost: BoostParams {
                n_trees: 500,
                learning_rate: 0.05,
                tree: TreeParams {
                    max_splits_to_search: Some(20),
                    ..Default::default()
                },
                ..Default::default()
            },
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return bad("sizes must be non-empty and positive");
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sizes must be strictly ascending");
        }
        if self.repeats.is_empty() || self.methods.is_empty() {
            return bad("at least one repeat and one method are required");
        }
        if self.methods.iter().any(|m| m.is_boosted()) && self.depths.is_empty() {
            return bad("boosted methods need at least one depth");
        }
        if self.test_size == 0 {
            return bad("test_size must be positive");
        }
        self.synth.validate()?;
        self.boost.validate()
    }
}

/// A row of the results table. `None` in `repeat` marks a mean over
/// repeats; `None` in `max_depth` on a boosted method marks the best depth
/// per repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: String,
    pub size: usize,
    pub repeat: Option<u64>,
    pub logloss: f64,
    pub best_iteration: Option<usize>,
    pub max_depth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResults {
    /// Every (method, size, repeat, depth) cell plus the optimal rows.
    pub cells: Vec<BenchRow>,
    /// Means over repeats.
    pub summary: Vec<BenchRow>,
}

impl BenchResults {
    /// Mean over repeats of the best depth's test loss.
    pub fn mean_best(&self, method: &str, size: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.method == method && r.size == size && r.max_depth.is_none())
            .map(|r| r.logloss)
    }

    /// Mean over repeats at a fixed depth.
    pub fn mean_at_depth(&self, method: &str, size: usize, depth: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.method == method && r.size == size && r.max_depth == Some(depth))
            .map(|r| r.logloss)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "size", "repeat", "logloss", "best_iteration", "max_depth"])?;
        for r in self.cells.iter().chain(&self.summary) {
            let repeat = r.repeat.map_or("mean".to_owned(), |s| s.to_string());
            let depth = match (r.max_depth, r.method.as_str()) {
                (Some(d), _) => d.to_string(),
                (None, "siloed" | "optimal") => String::new(),
                (None, _) => "best".to_owned(),
            };
            w.write_record([
                r.method.clone(),
                r.size.to_string(),
                repeat,
                format!("{:.6}", r.logloss),
                r.best_iteration.map_or(String::new(), |i| i.to_string()),
                depth,
            ])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<bench output>".into(),
            source: e,
        })?;
        Ok(())
    }
}

struct Repeat {
    train: Dataset,
    test: Dataset,
    optimal: f64,
}

#[derive(Clone, Copy)]
struct Cell {
    method: Method,
    size: usize,
    repeat: usize,
    depth: Option<usize>,
}

/// Runs every requested cell. Cells run in parallel; output order is fixed.
pub fn run_bench(config: &BenchConfig, base_dir: Option<&Path>) -> Result<BenchResults> {
    config.validate()?;
    let truth = RainTruth::new(&config.synth, base_dir)?;
    let max_size = *config.sizes.last().expect("validated");
    let repeats: Vec<Repeat> = config
        .repeats
        .iter()
        .map(|&seed| {
            let train = truth.sample(max_size, mix_seed(seed, 0x7472_6169_6e))?;
            let test = truth.sample(config.test_size, mix_seed(seed, 0x7465_7374))?;
            let optimal = truth.optimal_logloss(&test)?;
            Ok(Repeat {
                train,
                test,
                optimal,
            })
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for &method in &config.methods {
        for &size in &config.sizes {
            for repeat in 0..repeats.len() {
                if method.is_boosted() {
                    for &d in &config.depths {
                        cells.push(Cell {
                            method,
                            size,
                            repeat,
                            depth: Some(d),
                        });
                    }
                } else {
                    cells.push(Cell {
                        method,
                        size,
                        repeat,
                        depth: None,
                    });
                }
            }
        }
    }

    let cache = PartitionCache::new();
    let rows: Vec<BenchRow> = cells
        .par_iter()
        .map(|c| run_cell(config, &repeats[c.repeat], c, &cache))
        .collect::<Result<_>>()?;

    let mut all = rows;
    for &size in &config.sizes {
        for (i, r) in repeats.iter().enumerate() {
            all.push(BenchRow {
                method: "optimal".into(),
                size,
                repeat: Some(config.repeats[i]),
                logloss: r.optimal,
                best_iteration: None,
                max_depth: None,
            });
        }
    }
    let summary = summarize(config, &all);
    Ok(BenchResults {
        cells: all,
        summary,
    })
}

fn run_cell(config: &BenchConfig, rep: &Repeat, cell: &Cell, cache: &PartitionCache) -> Result<BenchRow> {
    let rows: Vec<usize> = (0..cell.size).collect();
    let train = rep.train.select(&rows);
    let (logloss, best_iteration) = match cell.method {
        Method::Siloed => {
            let table = fit_siloed(&train, &["county", "month"])?;
            let p = table.predict(&rep.test)?;
            (evaluate_logloss(&p, rep.test.require_target()?)?, None)
        }
        m => {
            let schema = std::sync::Arc::new(train.schema().with_kinds(&m.kinds())?);
            let train = train.with_schema(schema.clone())?;
            let test = rep.test.with_schema(schema)?;
            let mut params = config.boost.clone();
            params.tree.max_depth = cell.depth.expect("boosted cells have a depth");
            if m != Method::Structured {
                params.tree.max_splits_to_search = None;
            }
            let fit = fit_ensemble_with_cache(&train, Some(&test), &params, cache)?;
            (
                fit.report.best_valid_loss.expect("validation was supplied"),
                Some(fit.report.best_iteration),
            )
        }
    };
    log::info!(
        "{} size={} repeat={} depth={:?} logloss={logloss:.5}",
        cell.method,
        cell.size,
        config.repeats[cell.repeat],
        cell.depth
    );
    Ok(BenchRow {
        method: cell.method.name().to_owned(),
        size: cell.size,
        repeat: Some(config.repeats[cell.repeat]),
        logloss,
        best_iteration,
        max_depth: cell.depth,
    })
}

fn summarize(config: &BenchConfig, cells: &[BenchRow]) -> Vec<BenchRow> {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut names: Vec<&str> = config.methods.iter().map(|m| m.name()).collect();
    names.push("optimal");
    let mut out = Vec::new();
    for name in names {
        for &size in &config.sizes {
            let of = |repeat: u64| -> Vec<&BenchRow> {
                cells
                    .iter()
                    .filter(|r| r.method == name && r.size == size && r.repeat == Some(repeat))
                    .collect()
            };
            let boosted = name != "siloed" && name != "optimal";
            if boosted {
                for &d in &config.depths {
                    let v: Vec<f64> = config
                        .repeats
                        .iter()
                        .flat_map(|&s| of(s).into_iter().filter(|r| r.max_depth == Some(d)))
                        .map(|r| r.logloss)
                        .collect();
                    out.push(BenchRow {
                        method: name.to_owned(),
                        size,
                        repeat: None,
                        logloss: mean(&v),
                        best_iteration: None,
                        max_depth: Some(d),
                    });
                }
            }
            let best: Vec<f64> = config
                .repeats
                .iter()
                .map(|&s| {
                    of(s)
                        .iter()
                        .map(|r| r.logloss)
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            out.push(BenchRow {
                method: name.to_owned(),
                size,
                repeat: None,
                logloss: mean(&best),
                best_iteration: None,
                max_depth: None,
            });
        }
    }
    out
}
