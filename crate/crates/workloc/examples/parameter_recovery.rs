//! Simulate choices from known nested-logit parameters and check that
//! maximum-likelihood estimation recovers them.
//!
//! ```bash
//! cargo run --release --example parameter_recovery
//! ```

use std::time::Instant;

use workloc::nested_logit::{estimate_nl, NlParams, NlSettings, NL_PARAM_NAMES};
use workloc::synthgen::{
    AccessibilityConfig, CityConfig, Oracle, PopulationConfig, SimConfig, simulate_dataset,
};

fn main() -> workloc::Result<()> {
    let truth = NlParams::new([0.5; 6], 1.2, 0.6, -0.1)?;
    let config = SimConfig {
        city: CityConfig {
            grid_rows: 10,
            grid_cols: 10,
            cbd_zone: 55,
            job_scale: 6000.0,
            distance_decay: 0.29,
            cell_size_km: 1.4,
            mix_sigma: 2.5,
        },
        population: PopulationConfig {
            n_individuals: 5000,
            ..PopulationConfig::default()
        },
        accessibility: AccessibilityConfig {
            a0: 10.0,
            decay: 0.25,
            noise_sigma: 2.0,
        },
        oracle: Oracle::Nl {
            params: truth.clone(),
        },
    };

    let started = Instant::now();
    let dataset = simulate_dataset(&config, 42)?;
    let view = dataset.view_all();
    let result = estimate_nl(&view, None, &NlSettings::default())?;
    let elapsed = started.elapsed();

    let mut true_values = truth.alpha.to_vec();
    true_values.extend([truth.lambda, truth.beta_a, truth.beta_acr]);
    let estimates = result.estimates();
    let se = result.std_errors.as_ref().expect("standard errors");

    println!(
        "{:<18} {:>8} {:>9} {:>8} {:>6}",
        "parameter", "true", "estimate", "std", "z"
    );
    for i in 0..estimates.len() {
        let z = (estimates[i] - true_values[i]) / se[i];
        println!(
            "{:<18} {:>8.4} {:>9.4} {:>8.4} {:>6.2}",
            NL_PARAM_NAMES[i], true_values[i], estimates[i], se[i], z
        );
    }
    println!();
    println!(
        "converged: {} in {} iterations, {:.2?} total (simulation + estimation)",
        result.converged, result.iterations, elapsed
    );
    Ok(())
}
