//! Shows the baseline encodings of a structured feature: one-hot columns,
//! a target-ordered ordinal map and a siloed per-cell table.
//!
//! Run with `cargo run --example baselines`.

use scdt::baselines::{encode_one_hot, encode_ordinal, fit_siloed};
use scdt::synth::{generate_synthetic, SyntheticRainConfig};

fn main() -> scdt::Result<()> {
    env_logger::init();
    let config = SyntheticRainConfig { n_rows: 4000, ..Default::default() };
    let (train, truth) = generate_synthetic(&config, None)?;

    let one_hot = encode_one_hot(&train, "month")?;
    let names: Vec<&str> = one_hot.iter().map(|f| f.name.as_str()).collect();
    println!("one-hot month columns: {}", names.join(", "));

    let (map, _) = encode_ordinal(&train, "county")?;
    println!("counties by mean rain: {}", map.order().join(" < "));

    let silo = fit_siloed(&train, &["county", "month"])?;
    let test = truth.sample(5000, 7)?;
    let p = silo.predict(&test)?;
    println!(
        "siloed table: {} cells, test log-loss {:.5} (truth {:.5})",
        silo.num_cells(),
        scdt::boosting::evaluate_logloss(&p, test.require_target()?)?,
        truth.optimal_logloss(&test)?
    );
    Ok(())
}
