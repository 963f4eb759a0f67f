//! Train a small neural choice model and watch the per-epoch training and
//! validation log-likelihood.
//!
//! ```bash
//! cargo run --example train_neural_model
//! ```

use workloc::domain::split_dataset;
use workloc::neural::{train, FeatureSpec, TrainConfig};
use workloc::synthgen::{simulate_dataset, CityConfig, PopulationConfig, SimConfig};

fn main() -> workloc::Result<()> {
    let config = SimConfig {
        city: CityConfig {
            grid_rows: 6,
            grid_cols: 6,
            cbd_zone: 14,
            job_scale: 1500.0,
            ..CityConfig::default()
        },
        population: PopulationConfig {
            n_individuals: 1500,
            ..PopulationConfig::default()
        },
        ..SimConfig::default()
    };
    let dataset = simulate_dataset(&config, 7)?;
    let (train_view, val_view) = split_dataset(&dataset, 0.75, 7)?;

    // Scaled-down network so the example finishes in seconds; the defaults
    // (hidden [100, 150], 200 epochs) are what a full run would use.
    let train_config = TrainConfig {
        hidden_sizes: vec![32, 24],
        epochs: 15,
        seed: 7,
        ..TrainConfig::default()
    };
    let (model, history) = train(&train_view, &val_view, &FeatureSpec::car(), &train_config)?;

    println!("epoch  train LL      validation LL");
    for (epoch, (t, v)) in history.train_ll.iter().zip(&history.val_ll).enumerate() {
        println!("{epoch:>5}  {t:>12.2}  {v:>13.2}");
    }
    println!();
    println!(
        "trained {} parameters (+{} zone constants) in {:.1}s",
        model.mlp.param_count(),
        model.asc.len(),
        history.wall_time_s
    );
    Ok(())
}
