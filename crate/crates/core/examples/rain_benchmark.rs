//! Compares one-hot, ordinal, structured and siloed models on synthetic
//! rain data and prints the mean test log-loss per training size.
//!
//! Run with `cargo run --release --example rain_benchmark`.

use scdt::bench::{run_bench, BenchConfig};

fn main() -> scdt::Result<()> {
    env_logger::init();
    let config = BenchConfig::default();
    let start = std::time::Instant::now();
    let results = run_bench(&config, None)?;
    println!(
        "{:>6}  {:>10} {:>10} {:>10} {:>10} {:>10}",
        "size", "one_hot", "ordinal", "structured", "siloed", "optimal"
    );
    for &size in &config.sizes {
        let get = |m| results.mean_best(m, size).unwrap_or(f64::NAN);
        println!(
            "{size:>6}  {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            get("one_hot"),
            get("ordinal"),
            get("structured"),
            get("siloed"),
            get("optimal")
        );
    }
    eprintln!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
