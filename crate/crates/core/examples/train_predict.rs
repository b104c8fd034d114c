//! Trains a boosted model on synthetic rain data, saves it, reloads it and
//! checks that both copies agree on held-out rows.
//!
//! Run with `cargo run --release --example train_predict`.

use scdt::boosting::{fit_ensemble, BoostParams, BoostedEnsemble};
use scdt::synth::{generate_synthetic, SyntheticRainConfig};
use scdt::tree::TreeParams;

fn main() -> scdt::Result<()> {
    env_logger::init();
    let config = SyntheticRainConfig { n_rows: 3000, ..Default::default() };
    let (train, truth) = generate_synthetic(&config, None)?;
    let test = truth.sample(5000, 99)?;

    let params = BoostParams {
        n_trees: 200,
        learning_rate: 0.05,
        tree: TreeParams { max_depth: 3, max_splits_to_search: Some(20), ..Default::default() },
        ..Default::default()
    };
    let fit = fit_ensemble(&train, Some(&test), &params)?;
    println!(
        "kept {} trees, test log-loss {:.5} (truth {:.5})",
        fit.model.trees.len(),
        fit.report.best_valid_loss.unwrap_or(f64::NAN),
        truth.optimal_logloss(&test)?
    );

    let path = std::env::temp_dir().join("scdt_example_model.json");
    fit.model.save(&path)?;
    let back = BoostedEnsemble::load(&path)?;
    let same = fit.model.predict_proba(&test)? == back.predict_proba(&test)?;
    println!("saved to {}, reload agrees: {same}", path.display());

    let first = &fit.model.predict_proba(&test)?[..5];
    println!("first probabilities: {first:.3?}");
    Ok(())
}
