//! The full three-way comparison: estimate the nested logit and train both
//! network variants on data whose generating process contains interactions
//! the nested-logit utility cannot express, then compare validation average
//! log-likelihoods.
//!
//! The oracle adds `gamma * has_car * log(1 + office jobs)` and
//! `delta * gender * accessibility^2` on top of the nested-logit utility.
//! The car-only network sees the inputs for the first interaction, the
//! all-attributes network sees both, and the nested logit can express
//! neither, so the expected validation ordering is
//! DNN-All > DNN-Car > DCM.
//!
//! ```bash
//! cargo run --release --example compare_models
//! ```

use std::path::PathBuf;

use workloc::nested_logit::{NlParams, NlSettings};
use workloc::neural::{FeatureMode, TrainConfig};
use workloc::pipeline::{
    cmd_compare, cmd_estimate_nl, cmd_simulate, cmd_train_dnn, validation_avg_ll,
};
use workloc::synthgen::{
    AccessibilityConfig, CityConfig, Oracle, PopulationConfig, SimConfig,
};

fn main() -> workloc::Result<()> {
    let base = PathBuf::from("target/example-compare");
    let data_dir = base.join("data");

    let config = SimConfig {
        city: CityConfig {
            grid_rows: 20,
            grid_cols: 20,
            cbd_zone: 210,
            job_scale: 8000.0,
            distance_decay: 0.25,
            cell_size_km: 1.2,
            mix_sigma: 1.5,
        },
        population: PopulationConfig {
            n_individuals: 8000,
            ..PopulationConfig::default()
        },
        accessibility: AccessibilityConfig {
            a0: 10.0,
            decay: 0.2,
            noise_sigma: 1.5,
        },
        oracle: Oracle::Nonlinear {
            params: NlParams::new([0.5; 6], 1.2, 0.6, -0.1)?,
            gamma: 1.0,
            delta: 0.03,
        },
    };
    cmd_simulate(&config, &data_dir, 7)?;

    let nl_path = base.join("nl.json");
    cmd_estimate_nl(&data_dir, &nl_path, &NlSettings::default(), 0.75, 7)?;

    // Small network and few epochs keep the example quick; a full-scale
    // run would use the defaults (hidden [100, 150], 200 epochs).
    let train_config = TrainConfig {
        hidden_sizes: vec![32, 24],
        epochs: 30,
        seed: 7,
        ..TrainConfig::default()
    };
    let car_path = base.join("dnn_car.json");
    let all_path = base.join("dnn_all.json");
    cmd_train_dnn(&data_dir, FeatureMode::Car, &train_config, &car_path, 0.75, 7)?;
    cmd_train_dnn(&data_dir, FeatureMode::All, &train_config, &all_path, 0.75, 7)?;

    println!("validation average log-likelihood (weighted, nats/obs):");
    for (label, path) in [("DCM", &nl_path), ("DNN-Car", &car_path), ("DNN-All", &all_path)] {
        println!("  {label:<8} {:>9.4}", validation_avg_ll(&data_dir, path)?);
    }

    let report_dir = base.join("report");
    let report = cmd_compare(
        &data_dir,
        &[nl_path, car_path, all_path],
        &report_dir,
        7,
    )?;
    println!("\nside-by-side report: {}", report.manifest_path.display());
    Ok(())
}
