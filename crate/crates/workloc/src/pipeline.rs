//! End-to-end pipelines behind the CLI subcommands: simulate a dataset,
//! estimate the nested logit, train a network, evaluate a model file, and
//! compare several model files side by side.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{build_dataset, split_dataset, Dataset};
use crate::error::{Error, Result};
use crate::io::{
    self, fingerprint_hex, format_f64, load_accessibility, load_individuals, load_model,
    load_zones, nl_param_names, save_model, write_csv, DnnModelFile, ModelFile, NlModelFile,
};
use crate::model::ChoiceModel;
use crate::nested_logit::{
    estimate_nl, nl_log_likelihood, EstimationResult, NlSettings, FREE_ALPHA_COUNT,
};
#[cfg(test)]
use crate::nested_logit::NlParams;
use crate::neural::{self, FeatureMode, FeatureSpec, NeuralModel, TrainConfig};
use crate::report::{
    evaluate_data, evaluate_model, write_report, ModelEvaluation, Report, ReportManifest,
    DEFAULT_DRAWS_PER_INDIVIDUAL,
};
use crate::synthgen::{simulate_dataset, SimConfig};

pub const DEFAULT_SPLIT_FRACTION: f64 = 0.75;

/// Provenance document written next to simulated datasets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationProvenance {
    pub seed: u64,
    pub config: SimConfig,
    pub dataset_fingerprint: String,
    pub files: Vec<String>,
}

/// Simulates a dataset and writes `zones.csv`, `individuals.csv`,
/// `accessibility.bin`, and `provenance.json` into `out_dir`.
pub fn cmd_simulate(config: &SimConfig, out_dir: &Path, seed: u64) -> Result<SimulationProvenance> {
    let dataset = simulate_dataset(config, seed)?;
    fs::create_dir_all(out_dir)?;
    io::write_zones_csv(&out_dir.join("zones.csv"), dataset.zones())?;
    io::write_individuals_csv(&out_dir.join("individuals.csv"), dataset.individuals())?;
    io::write_accessibility_binary(&out_dir.join("accessibility.bin"), dataset.accessibility())?;
    let provenance = SimulationProvenance {
        seed,
        config: config.clone(),
        dataset_fingerprint: fingerprint_hex(dataset.fingerprint()),
        files: vec![
            "zones.csv".into(),
            "individuals.csv".into(),
            "accessibility.bin".into(),
        ],
    };
    fs::write(
        out_dir.join("provenance.json"),
        serde_json::to_string_pretty(&provenance)?,
    )?;
    Ok(provenance)
}

/// Loads the three dataset files from a directory (binary accessibility
/// preferred, CSV fallback).
pub fn load_dataset(data_dir: &Path) -> Result<Dataset> {
    let zones = load_zones(&data_dir.join("zones.csv"))?;
    let individuals = load_individuals(&data_dir.join("individuals.csv"), &zones.id_map)?;
    let bin = data_dir.join("accessibility.bin");
    let accessibility = if bin.exists() {
        load_accessibility(&bin)?
    } else {
        load_accessibility(&data_dir.join("accessibility.csv"))?
    };
    build_dataset(zones.zones, individuals, accessibility)
}

/// Outcome of `estimate-nl`: the fitted result plus where it was written.
#[derive(Debug)]
pub struct EstimateOutcome {
    pub result: EstimationResult,
    pub ll_validation: f64,
    pub model_path: PathBuf,
    pub table_path: PathBuf,
}

/// Estimates the nested logit on the train split and writes the model JSON
/// plus a parameter table CSV (9 parameter rows, then the log-likelihood
/// and observation-count rows).
pub fn cmd_estimate_nl(
    data_dir: &Path,
    out_path: &Path,
    settings: &NlSettings,
    split_fraction: f64,
    seed: u64,
) -> Result<EstimateOutcome> {
    let dataset = load_dataset(data_dir)?;
    let (train, val) = split_dataset(&dataset, split_fraction, seed)?;
    let result = estimate_nl(&train, None, settings)?;
    let ll_validation = nl_log_likelihood(&result.params, &val)?;

    let file = ModelFile::NestedLogit(NlModelFile {
        param_names: nl_param_names(),
        result: result.clone(),
        ll_validation,
        settings: settings.clone(),
        split_seed: seed,
        split_fraction,
        dataset_fingerprint: fingerprint_hex(dataset.fingerprint()),
    });
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    save_model(out_path, &file)?;
    let table_path = out_path.with_extension("csv");
    write_nl_table(&table_path, &result, ll_validation, val.len())?;
    Ok(EstimateOutcome {
        result,
        ll_validation,
        model_path: out_path.to_path_buf(),
        table_path,
    })
}

const NL_ATTRIBUTES: [&str; 9] = [
    "Restaurant",
    "Shopping",
    "Office",
    "Education",
    "Health",
    "Business",
    "log-sum (occupations)",
    "accessibility",
    "accessibility x has-car",
];

fn write_nl_table(
    path: &Path,
    result: &EstimationResult,
    ll_validation: f64,
    n_val: usize,
) -> Result<()> {
    let estimates = result.estimates();
    let mut rows = Vec::new();
    for i in 0..estimates.len() {
        let std = result.std_errors.as_ref().map(|s| s[i]);
        let t = result.t_values.as_ref().map(|t| t[i]);
        let t1 = if i == FREE_ALPHA_COUNT {
            result.t_against_1
        } else {
            None
        };
        rows.push(vec![
            io::nl_param_names()[i].clone(),
            NL_ATTRIBUTES[i].to_string(),
            format_f64(estimates[i]),
            std.map(format_f64).unwrap_or_default(),
            t.map(format_f64).unwrap_or_default(),
            t1.map(format_f64).unwrap_or_default(),
        ]);
    }
    let summary = [
        ("ll_beta_train", format_f64(result.ll_final)),
        ("ll_beta_validation", format_f64(ll_validation)),
        ("ll_null_train", format_f64(result.ll_null)),
        ("n_obs_train", result.n_obs.to_string()),
        ("n_obs_validation", n_val.to_string()),
    ];
    for (name, value) in summary {
        rows.push(vec![
            name.to_string(),
            String::new(),
            value,
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    write_csv(
        path,
        "parameter,attribute,estimate,std_error,t_value,t_value_against_1",
        &rows,
    )
}

/// Outcome of `train-dnn`.
#[derive(Debug)]
pub struct TrainOutcome {
    pub ll_train_final: f64,
    pub ll_val_final: f64,
    pub model_path: PathBuf,
    pub history_path: PathBuf,
}

/// Trains a network on the train split and writes the model JSON plus a
/// per-epoch history CSV.
pub fn cmd_train_dnn(
    data_dir: &Path,
    mode: FeatureMode,
    config: &TrainConfig,
    out_path: &Path,
    split_fraction: f64,
    seed: u64,
) -> Result<TrainOutcome> {
    let dataset = load_dataset(data_dir)?;
    let (train, val) = split_dataset(&dataset, split_fraction, seed)?;
    let spec = FeatureSpec::for_mode(mode);
    let (model, history) = neural::train(&train, &val, &spec, config)?;
    let ll_train_final = *history.train_ll.last().expect("at least one epoch");
    let ll_val_final = *history.val_ll.last().expect("at least one epoch");

    let label = match mode {
        FeatureMode::Car => "DNN-Car",
        FeatureMode::All => "DNN-All",
    };
    let file = ModelFile::Dnn(DnnModelFile::from_model(
        &model,
        label.to_string(),
        config,
        ll_train_final,
        ll_val_final,
        seed,
        split_fraction,
        fingerprint_hex(dataset.fingerprint()),
    ));
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    save_model(out_path, &file)?;

    let history_path = out_path.with_extension("history.csv");
    let rows: Vec<Vec<String>> = history
        .train_ll
        .iter()
        .zip(&history.val_ll)
        .enumerate()
        .map(|(epoch, (t, v))| vec![epoch.to_string(), format_f64(*t), format_f64(*v)])
        .collect();
    write_csv(&history_path, "epoch,train_ll,val_ll", &rows)?;

    Ok(TrainOutcome {
        ll_train_final,
        ll_val_final,
        model_path: out_path.to_path_buf(),
        history_path,
    })
}

/// A model file materialized for evaluation.
struct LoadedModel {
    label: String,
    inner: Box<dyn ChoiceModel>,
}

fn materialize(file: &ModelFile) -> Result<LoadedModel> {
    match file {
        ModelFile::NestedLogit(m) => Ok(LoadedModel {
            label: file.label(),
            inner: Box::new(m.result.params.clone()),
        }),
        ModelFile::Dnn(m) => {
            let model: NeuralModel = m.to_model()?;
            Ok(LoadedModel {
                label: file.label(),
                inner: Box::new(model),
            })
        }
    }
}

fn check_fingerprint(file: &ModelFile, dataset: &Dataset, path: &Path) -> Result<()> {
    let expected = fingerprint_hex(dataset.fingerprint());
    if file.dataset_fingerprint() != expected {
        return Err(Error::FingerprintMismatch(format!(
            "model {} was fitted on dataset {}, but the loaded data has fingerprint {expected}",
            path.display(),
            file.dataset_fingerprint()
        )));
    }
    Ok(())
}

fn evaluate_files(
    dataset: &Dataset,
    files: &[(PathBuf, ModelFile)],
    out_dir: &Path,
    eval_seed: u64,
    draws_per_individual: usize,
) -> Result<Report> {
    let first = &files[0].1;
    let split_seed = first.split_seed();
    let split_fraction = first.split_fraction();
    for (path, file) in files {
        check_fingerprint(file, dataset, path)?;
        if file.split_seed() != split_seed || file.split_fraction() != split_fraction {
            return Err(Error::FingerprintMismatch(format!(
                "model {} uses split seed {} fraction {}, expected seed {split_seed} fraction {split_fraction}",
                path.display(),
                file.split_seed(),
                file.split_fraction()
            )));
        }
    }

    let (train, val) = split_dataset(dataset, split_fraction, split_seed)?;
    let data = evaluate_data(&val)?;
    let mut evals: Vec<ModelEvaluation> = Vec::with_capacity(files.len());
    let mut labels_seen: Vec<String> = Vec::new();
    for (_, file) in files {
        let model = materialize(file)?;
        let mut label = model.label.clone();
        let duplicates = labels_seen.iter().filter(|l| **l == model.label).count();
        if duplicates > 0 {
            label = format!("{label}#{}", duplicates + 1);
        }
        labels_seen.push(model.label.clone());
        evals.push(evaluate_model(
            model.inner.as_ref(),
            &label,
            &train,
            &val,
            &data,
            draws_per_individual,
            eval_seed,
        )?);
    }

    write_report(
        out_dir,
        &data,
        &evals,
        ReportManifest {
            models: evals.iter().map(|e| e.label.clone()).collect(),
            dataset_fingerprint: fingerprint_hex(dataset.fingerprint()),
            split_seed,
            split_fraction,
            eval_seed,
            draws_per_individual,
            files: vec![],
        },
    )
}

/// Evaluates one model file against its dataset, writing the full table and
/// figure set.
pub fn cmd_evaluate(
    data_dir: &Path,
    model_path: &Path,
    out_dir: &Path,
    seed: u64,
) -> Result<Report> {
    let dataset = load_dataset(data_dir)?;
    let file = load_model(model_path)?;
    evaluate_files(
        &dataset,
        &[(model_path.to_path_buf(), file)],
        out_dir,
        seed,
        DEFAULT_DRAWS_PER_INDIVIDUAL,
    )
}

/// Evaluates two or more model files side by side into one report.
pub fn cmd_compare(
    data_dir: &Path,
    model_paths: &[PathBuf],
    out_dir: &Path,
    seed: u64,
) -> Result<Report> {
    if model_paths.len() < 2 {
        return Err(Error::invalid("compare needs at least 2 models"));
    }
    let dataset = load_dataset(data_dir)?;
    let mut files = Vec::with_capacity(model_paths.len());
    for path in model_paths {
        files.push((path.clone(), load_model(path)?));
    }
    evaluate_files(
        &dataset,
        &files,
        out_dir,
        seed,
        DEFAULT_DRAWS_PER_INDIVIDUAL,
    )
}

/// Average validation log-likelihood (weighted mean) straight from a model
/// file against a dataset directory; convenience for examples and tests.
pub fn validation_avg_ll(data_dir: &Path, model_path: &Path) -> Result<f64> {
    let dataset = load_dataset(data_dir)?;
    let file = load_model(model_path)?;
    check_fingerprint(&file, &dataset, model_path)?;
    let (_, val) = split_dataset(&dataset, file.split_fraction(), file.split_seed())?;
    let model = materialize(&file)?;
    Ok(crate::metrics::average_loglikelihood(model.inner.as_ref(), &val)?.weighted_mean)
}
