//! Synthetic rain data: a spatially smooth county effect plus a seasonal
//! month effect, with known generating probabilities.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::boosting::{evaluate_logloss, logistic};
use crate::dataset::{Column, Dataset, FeatureSchema, FeatureSpec, Task};
use crate::error::{Error, Result};
use crate::graph::LevelGraph;
use crate::tree::mix_seed;

pub const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRainConfig {
    /// County graph source: `builtin:...` or a graph file path.
    pub counties: String,
    /// Neighbour-averaging passes applied to the iid county noise.
    pub smoothness: usize,
    pub amplitude: f64,
    pub phase: f64,
    /// Standard deviation of the county effect after smoothing.
    pub spatial_scale: f64,
    /// Overall margin shift.
    pub offset: f64,
    pub seed: u64,
    pub n_rows: usize,
}

impl Default for SyntheticRainConfig {
    fn default() -> Self {
        SyntheticRainConfig {
            counties: "builtin:grid:4x5".into(),
            smoothness: 4,
            amplitude: 1.0,
            phase: 0.0,
            spatial_scale: 1.0,
            offset: -1.0,
            seed: 0,
            n_rows: 10_000,
        }
    }
}

impl SyntheticRainConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.amplitude, self.phase, self.spatial_scale, self.offset]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.amplitude < 0.0 || self.spatial_scale < 0.0 {
            return Err(Error::InvalidConfig(
                "amplitude and spatial_scale must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// The month graph: a 12-cycle over month abbreviations.
pub fn month_graph() -> LevelGraph {
    let edges: Vec<(&str, &str)> = (0..12).map(|i| (MONTHS[i], MONTHS[(i + 1) % 12])).collect();
    LevelGraph::build("months", &MONTHS, &edges).expect("month cycle is valid")
}

/// Generating probabilities for every (county, month) pair.
#[derive(Debug, Clone)]
pub struct RainTruth {
    counties: Arc<LevelGraph>,
    months: Arc<LevelGraph>,
    field: Vec<f64>,
    probs: Vec<f64>,
    schema: Arc<FeatureSchema>,
}

impl RainTruth {
    pub fn new(config: &SyntheticRainConfig, base_dir: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let counties = Arc::new(LevelGraph::from_source(&config.counties, base_dir)?);
        let months = Arc::new(month_graph());
        let n = counties.num_levels();

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..config.smoothness {
            z = (0..n)
                .map(|v| {
                    let (s, k) = counties
                        .neighbors(v)
                        .fold((z[v], 1.0), |(s, k), u| (s + z[u], k + 1.0));
                    s / k
                })
                .collect();
        }
        let mean = z.iter().sum::<f64>() / n as f64;
        let sd = (z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let field: Vec<f64> = z
            .iter()
            .map(|x| {
                let std = if sd > 0.0 { (x - mean) / sd } else { 0.0 };
                config.offset + config.spatial_scale * std
            })
            .collect();

        let mut probs = Vec::with_capacity(n * 12);
        for &f in &field {
            for m in 0..12 {
                let season = config.amplitude * (2.0 * PI * m as f64 / 12.0 + config.phase).cos();
                probs.push(logistic(f + season));
            }
        }
        let schema = FeatureSchema::new(
            "rain",
            Task::Binary,
            vec![
                FeatureSpec::structured("county", counties.clone()),
                FeatureSpec::structured("month", months.clone()),
            ],
        )?;
        Ok(RainTruth {
            counties,
            months,
            field,
            probs,
            schema: Arc::new(schema),
        })
    }

    pub fn counties(&self) -> &Arc<LevelGraph> {
        &self.counties
    }

    pub fn months(&self) -> &Arc<LevelGraph> {
        &self.months
    }

    /// County effect on the margin scale.
    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn prob(&self, county: usize, month: usize) -> f64 {
        self.probs[county * 12 + month]
    }

    /// Schema with `county` and `month` as structured features.
    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    /// `n` rows with uniform county and month and Bernoulli rain.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nc = self.counties.num_levels();
        let mut county = Vec::with_capacity(n);
        let mut month = Vec::with_capacity(n);
        let mut rain = Vec::with_capacity(n);
        for _ in 0..n {
            let c = rng.random_range(0..nc);
            let m = rng.random_range(0..12);
            let y = rng.random::<f64>() < self.prob(c, m);
            county.push(c as u32);
            month.push(m as u32);
            rain.push(f64::from(u8::from(y)));
        }
        Dataset::new(
            self.schema.clone(),
            vec![Column::Levels(county), Column::Levels(month)],
            Some(rain),
        )
    }

    /// True probability for each row of `d`, which must use this schema.
    pub fn row_probs(&self, d: &Dataset) -> Result<Vec<f64>> {
        match d.columns() {
            [Column::Levels(c), Column::Levels(m)] if d.n_rows() == c.len() => Ok(c
                .iter()
                .zip(m)
                .map(|(&c, &m)| self.prob(c as usize, m as usize))
                .collect()),
            _ => Err(Error::InvalidSchema(
                "expected county and month level columns".into(),
            )),
        }
    }

    /// Log-loss of the generating probabilities on `d`.
    pub fn optimal_logloss(&self, d: &Dataset) -> Result<f64> {
        evaluate_logloss(&self.row_probs(d)?, d.require_target()?)
    }

    /// Table rows `(county, month, p)`.
    pub fn table(&self) -> Vec<(String, String, f64)> {
        let mut out = Vec::with_capacity(self.probs.len());
        for (c, name) in self.counties.levels().iter().enumerate() {
            for (m, month) in MONTHS.iter().enumerate() {
                out.push((name.clone(), month.to_string(), self.prob(c, m)));
            }
        }
        out
    }
}

/// Dataset of `config.n_rows` rows and the truth behind it. The county
/// field uses `config.seed`; rows use a seed derived from it.
pub fn generate_synthetic(
    config: &SyntheticRainConfig,
    base_dir: Option<&Path>,
) -> Result<(Dataset, RainTruth)> {
    let truth = RainTruth::new(config, base_dir)?;
    let data = truth.sample(config.n_rows, mix_seed(config.seed, 1))?;
    Ok((data, truth))
}
