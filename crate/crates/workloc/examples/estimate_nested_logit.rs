//! Estimate the nested-logit model on simulated data and print the
//! parameter table with standard errors and t-statistics.
//!
//! ```bash
//! cargo run --example estimate_nested_logit
//! ```

use workloc::domain::split_dataset;
use workloc::nested_logit::{estimate_nl, nl_log_likelihood, NlParams, NlSettings, NL_PARAM_NAMES};
use workloc::synthgen::{simulate_dataset, PopulationConfig, SimConfig, Oracle};

fn main() -> workloc::Result<()> {
    let truth = NlParams::new([0.5; 6], 1.2, 0.6, -0.1)?;
    let config = SimConfig {
        population: PopulationConfig {
            n_individuals: 3000,
            ..PopulationConfig::default()
        },
        oracle: Oracle::Nl {
            params: truth.clone(),
        },
        ..SimConfig::default()
    };
    let dataset = simulate_dataset(&config, 42)?;
    let (train, val) = split_dataset(&dataset, 0.75, 42)?;

    let result = estimate_nl(&train, None, &NlSettings::default())?;
    let ll_val = nl_log_likelihood(&result.params, &val)?;

    println!(
        "{:<18} {:>9} {:>8} {:>8} {:>8}",
        "parameter", "estimate", "std", "t", "t vs 1"
    );
    let estimates = result.estimates();
    for (i, name) in NL_PARAM_NAMES.iter().enumerate() {
        let std = result.std_errors.as_ref().map(|s| s[i]);
        let t = result.t_values.as_ref().map(|t| t[i]);
        print!("{name:<18} {:>9.4}", estimates[i]);
        match (std, t) {
            (Some(s), Some(t)) => print!(" {s:>8.4} {t:>8.2}"),
            _ => print!(" {:>8} {:>8}", "-", "-"),
        }
        if name == &"lambda" {
            if let Some(t1) = result.t_against_1 {
                print!(" {t1:>8.2}");
            }
        }
        println!();
    }
    println!();
    println!("LL(beta) train      {:>12.2}", result.ll_final);
    println!("LL(beta) validation {ll_val:>12.2}");
    println!("LL(0)    train      {:>12.2}", result.ll_null);
    println!(
        "converged: {} after {} iterations over {} observations",
        result.converged, result.iterations, result.n_obs
    );
    Ok(())
}
