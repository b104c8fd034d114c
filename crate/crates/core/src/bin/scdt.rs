use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use scdt::bench::{run_bench, BenchConfig, Method};
use scdt::boosting::{fit_ensemble, BoostParams, BoostedEnsemble};
use scdt::dataset::{
    load_dataset, load_dataset_with, split_train_test, write_dataset, FeatureDecl, FeatureKind,
    FeatureSchema, LoadMode, SchemaFile,
};
use scdt::enumerate::{connected_sets, graph_counts, maximally_coarse_partitions};
use scdt::synth::{generate_synthetic, SyntheticRainConfig};
use scdt::tree::TreeParams;
use scdt::{Error, LevelGraph, Result};

#[derive(Parser)]
#[command(name = "scdt", version, about = "Gradient boosting with structured categorical splits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count or list connected sets and maximally coarse bipartitions of a graph.
    Enumerate(EnumerateArgs),
    /// Fit a boosted model from a CSV file and a schema.
    Train(TrainArgs),
    /// Write predictions for a CSV file.
    Predict(PredictArgs),
    /// Compare encodings on synthetic rain data and write a results CSV.
    Bench(BenchArgs),
    /// Write a synthetic rain dataset with its schema and true probabilities.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Bipartitions with both sides connected.
    Mp,
    /// All connected sets, the full level set included.
    Cs,
    /// Connected sets with at most half of the levels.
    #[value(name = "cs_half")]
    CsHalf,
}

#[derive(Args)]
struct EnumerateArgs {
    /// `builtin:chain:N`, `builtin:cycle:N`, `builtin:grid:RxC`, or a graph JSON file.
    #[arg(long)]
    graph: String,
    #[arg(long, value_enum, default_value = "mp")]
    mode: Mode,
    /// Print only the count.
    #[arg(long, conflicts_with_all = ["list", "table"])]
    count: bool,
    /// Print one JSON array per line.
    #[arg(long, conflicts_with = "table")]
    list: bool,
    /// Print `graph,levels,edges,mp,cs_half,cs` for the graph.
    #[arg(long)]
    table: bool,
}

#[derive(Args, Clone)]
struct BoostFlags {
    #[arg(long, default_value_t = 3)]
    max_depth: usize,
    #[arg(long, default_value_t = 100)]
    n_trees: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    /// Candidate partitions evaluated per node and feature; unlimited when omitted.
    #[arg(long)]
    max_splits_to_search: Option<usize>,
    /// Validation checks happen every this many trees.
    #[arg(long, default_value_t = 20)]
    eval_every: usize,
    #[arg(long, default_value_t = 1)]
    min_samples_leaf: usize,
    #[arg(long, default_value_t = 0.0)]
    min_gain: f64,
    /// Leaf-weight penalty.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl BoostFlags {
    fn params(&self) -> BoostParams {
        BoostParams {
            n_trees: self.n_trees,
            learning_rate: self.learning_rate,
            eval_every: self.eval_every,
            tree: TreeParams {
                max_depth: self.max_depth,
                min_samples_leaf: self.min_samples_leaf,
                min_gain: self.min_gain,
                max_splits_to_search: self.max_splits_to_search,
                lambda: self.lambda,
                seed: self.seed,
            },
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Output model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Validation CSV; the model keeps the best checkpoint on it.
    #[arg(long, conflicts_with = "valid_fraction")]
    valid: Option<PathBuf>,
    /// Hold out this fraction of `--data` for validation instead.
    #[arg(long)]
    valid_fraction: Option<f64>,
    #[command(flatten)]
    boost: BoostFlags,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SynthFlags {
    /// County graph source.
    #[arg(long, default_value = "builtin:grid:4x5")]
    counties: String,
    /// Neighbour-averaging passes over the county noise.
    #[arg(long, default_value_t = 4)]
    smoothness: usize,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 0.0)]
    phase: f64,
    #[arg(long, default_value_t = 1.0)]
    spatial_scale: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    offset: f64,
    /// Seed of the county field.
    #[arg(long, default_value_t = 0)]
    synth_seed: u64,
}

impl SynthFlags {
    fn config(&self, n_rows: usize) -> SyntheticRainConfig {
        SyntheticRainConfig {
            counties: self.counties.clone(),
            smoothness: self.smoothness,
            amplitude: self.amplitude,
            phase: self.phase,
            spatial_scale: self.spatial_scale,
            offset: self.offset,
            seed: self.synth_seed,
            n_rows,
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "500,2000")]
    sizes: Vec<usize>,
    /// One repeat per seed.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    repeats: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "one_hot,ordinal,structured,siloed")]
    methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    depths: Vec<usize>,
    #[arg(long, default_value_t = 20_000)]
    test_size: usize,
    #[arg(long, default_value_t = 500)]
    n_trees: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    /// Cap for the structured method; `0` means unlimited.
    #[arg(long, default_value_t = 20)]
    max_splits_to_search: usize,
    #[arg(long, default_value_t = 20)]
    eval_every: usize,
    #[arg(long, default_value_t = 1)]
    min_samples_leaf: usize,
    #[arg(long, default_value_t = 0.0)]
    min_gain: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Base seed for tree subsampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    synth: SynthFlags,
    /// Results CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10_000)]
    n_rows: usize,
    #[command(flatten)]
    synth: SynthFlags,
    /// Directory for data.csv, truth.csv, schema.json and the graph files.
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Enumerate(a) => enumerate(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Bench(a) => bench(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| io_error(p, e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn enumerate(a: EnumerateArgs) -> Result<()> {
    let g = LevelGraph::from_source(&a.graph, None)?;
    let mut out = output(None)?;
    let w = |out: &mut Box<dyn Write>, line: String| {
        writeln!(out, "{line}").map_err(|e| io_error(Path::new("<stdout>"), e))
    };
    if a.table {
        let c = graph_counts(&g);
        w(&mut out, "graph,levels,edges,mp,cs_half,cs".into())?;
        w(
            &mut out,
            format!("{},{},{},{},{},{}", g.name(), g.num_levels(), g.num_edges(), c.mp, c.cs_half, c.cs),
        )?;
    } else if a.list {
        match a.mode {
            Mode::Mp => {
                for c in maximally_coarse_partitions(&g)? {
                    let pair = [g.names_of(&c.side_a), g.names_of(&c.side_b)];
                    w(&mut out, serde_json::to_string(&pair)?)?;
                }
            }
            Mode::Cs | Mode::CsHalf => {
                let max = matches!(a.mode, Mode::CsHalf).then_some(g.num_levels() / 2);
                for s in connected_sets(&g, max) {
                    w(&mut out, serde_json::to_string(&g.names_of(&s))?)?;
                }
            }
        }
    } else {
        let c = graph_counts(&g);
        let n = match a.mode {
            Mode::Mp => c.mp,
            Mode::Cs => c.cs,
            Mode::CsHalf => c.cs_half,
        };
        w(&mut out, n.to_string())?;
    }
    out.flush().map_err(|e| io_error(Path::new("<stdout>"), e))
}

fn train(a: TrainArgs) -> Result<()> {
    let schema = Arc::new(FeatureSchema::load(&a.schema)?);
    let data = load_dataset(&a.data, schema.clone())?;
    let (train, valid) = match (&a.valid, a.valid_fraction) {
        (Some(p), _) => (data, Some(load_dataset(p, schema)?)),
        (None, Some(f)) => {
            let (t, v) = split_train_test(&data, f, a.boost.seed)?;
            (t, Some(v))
        }
        (None, None) => (data, None),
    };
    let fit = fit_ensemble(&train, valid.as_ref(), &a.boost.params())?;
    fit.model.save(&a.model)?;
    let metric = match fit.model.task {
        scdt::dataset::Task::Binary => "logloss",
        scdt::dataset::Task::Regression => "mse",
    };
    let mut line = format!(
        "trees={} train_{metric}={:.6}",
        fit.report.best_iteration, fit.report.train_loss
    );
    if let Some(v) = fit.report.best_valid_loss {
        line.push_str(&format!(" valid_{metric}={v:.6}"));
    }
    println!("{line}");
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = BoostedEnsemble::load(&a.model)?;
    let data = load_dataset_with(&a.data, model.schema.clone(), LoadMode::Prediction)?;
    let preds = model.predict(&data)?;
    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    let col = match model.task {
        scdt::dataset::Task::Binary => "probability",
        scdt::dataset::Task::Regression => "prediction",
    };
    w.write_record(["row", col])?;
    for (i, p) in preds.iter().enumerate() {
        w.write_record([i.to_string(), p.to_string()])?;
    }
    w.flush().map_err(|e| io_error(Path::new("<output>"), e))
}

fn bench(a: BenchArgs) -> Result<()> {
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<Result<Vec<_>>>()?;
    let config = BenchConfig {
        synth: a.synth.config(0),
        sizes: a.sizes,
        repeats: a.repeats,
        methods,
        depths: a.depths,
        test_size: a.test_size,
        boost: BoostParams {
            n_trees: a.n_trees,
            learning_rate: a.learning_rate,
            eval_every: a.eval_every,
            tree: TreeParams {
                max_depth: 1,
                min_samples_leaf: a.min_samples_leaf,
                min_gain: a.min_gain,
                max_splits_to_search: (a.max_splits_to_search > 0).then_some(a.max_splits_to_search),
                lambda: a.lambda,
                seed: a.seed,
            },
        },
    };
    log::info!(
        "structured max_splits_to_search={}",
        config
            .boost
            .tree
            .max_splits_to_search
            .map_or("unlimited".to_owned(), |k| k.to_string())
    );
    let results = run_bench(&config, None)?;
    results.write_csv(output(a.out.as_deref())?)
}

fn synth(a: SynthArgs) -> Result<()> {
    let config = a.synth.config(a.n_rows);
    let (data, truth) = generate_synthetic(&config, None)?;
    let dir = &a.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;

    write_json(dir, "counties.json", &truth.counties().to_file())?;
    write_json(dir, "months.json", &truth.months().to_file())?;
    let schema = SchemaFile {
        target: "rain".into(),
        task: scdt::dataset::Task::Binary,
        features: vec![
            FeatureDecl {
                name: "county".into(),
                kind: FeatureKind::Structured,
                graph: Some("counties.json".into()),
                terrain: None,
                max_bins: None,
            },
            FeatureDecl {
                name: "month".into(),
                kind: FeatureKind::Structured,
                graph: Some("months.json".into()),
                terrain: None,
                max_bins: None,
            },
        ],
    };
    write_json(dir, "schema.json", &schema)?;

    let data_path = dir.join("data.csv");
    write_dataset(&data, File::create(&data_path).map_err(|e| io_error(&data_path, e))?)?;

    let truth_path = dir.join("truth.csv");
    let mut w = csv::Writer::from_path(&truth_path)?;
    w.write_record(["county", "month", "p"])?;
    for (c, m, p) in truth.table() {
        w.write_record([c, m, p.to_string()])?;
    }
    w.flush().map_err(|e| io_error(&truth_path, e))?;
    println!(
        "wrote {} rows to {}; optimal logloss on them {:.6}",
        data.n_rows(),
        dir.display(),
        truth.optimal_logloss(&data)?
    );
    Ok(())
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(&path, s).map_err(|e| io_error(&path, e))
}
