//! Simulate a synthetic city, population, accessibility matrix, and
//! observed workplace choices, then write the dataset files.
//!
//! ```bash
//! cargo run --example simulate_dataset
//! ```

use workloc::nested_logit::NlParams;
use workloc::pipeline::cmd_simulate;
use workloc::synthgen::{
    AccessibilityConfig, CityConfig, Oracle, PopulationConfig, SimConfig,
};

fn main() -> workloc::Result<()> {
    let config = SimConfig {
        city: CityConfig {
            grid_rows: 8,
            grid_cols: 8,
            cbd_zone: 27,
            job_scale: 2000.0,
            distance_decay: 0.3,
            cell_size_km: 1.5,
            mix_sigma: 1.5,
        },
        population: PopulationConfig {
            n_individuals: 2000,
            ..PopulationConfig::default()
        },
        accessibility: AccessibilityConfig::default(),
        oracle: Oracle::Nl {
            params: NlParams::new([0.5; 6], 1.2, 0.6, -0.1)?,
        },
    };

    let out = std::path::PathBuf::from("target/example-data");
    let provenance = cmd_simulate(&config, &out, 42)?;
    println!("dataset fingerprint: {}", provenance.dataset_fingerprint);
    println!("files written under {}:", out.display());
    for f in &provenance.files {
        println!("  {f}");
    }
    Ok(())
}
