//! Run the full evaluation protocol for one model: average log-likelihood,
//! zone-attribute correlations, KS tests on commute distances (overall and
//! segmented), and SVG distance histograms.
//!
//! ```bash
//! cargo run --example evaluate_model
//! ```

use std::path::PathBuf;

use workloc::nested_logit::NlSettings;
use workloc::pipeline::{cmd_estimate_nl, cmd_evaluate, cmd_simulate};
use workloc::synthgen::{CityConfig, PopulationConfig, SimConfig};

fn main() -> workloc::Result<()> {
    let data_dir = PathBuf::from("target/example-eval/data");
    let config = SimConfig {
        city: CityConfig {
            grid_rows: 6,
            grid_cols: 6,
            cbd_zone: 14,
            job_scale: 1500.0,
            ..CityConfig::default()
        },
        population: PopulationConfig {
            n_individuals: 1200,
            ..PopulationConfig::default()
        },
        ..SimConfig::default()
    };
    cmd_simulate(&config, &data_dir, 42)?;

    let model_path = PathBuf::from("target/example-eval/nl.json");
    let outcome = cmd_estimate_nl(&data_dir, &model_path, &NlSettings::default(), 0.75, 42)?;
    println!(
        "estimated nested logit: LL {:.1} (converged: {})",
        outcome.result.ll_final, outcome.result.converged
    );

    let report_dir = PathBuf::from("target/example-eval/report");
    let report = cmd_evaluate(&data_dir, &model_path, &report_dir, 42)?;
    println!("report written to {}:", report.out_dir.display());
    for file in &report.files {
        println!("  {}", file.file_name().unwrap().to_string_lossy());
    }
    println!("  manifest.json");

    let results = std::fs::read_to_string(report_dir.join("results.csv"))?;
    println!("\nresults.csv:\n{results}");
    Ok(())
}
