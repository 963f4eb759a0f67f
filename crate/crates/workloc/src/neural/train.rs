//! Mini-batch Adam training for the neural choice model.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::domain::DatasetView;
use crate::error::{Error, Result};
use crate::optim::AdamState;
use crate::rng::Rng;

use super::{
    batch_forward_loss, batch_step, BatchWorkspace, FeatureSpec, Gradients, Mlp, NeuralModel,
    ZoneFeaturePlan,
};

/// Training hyperparameters. Defaults: two hidden layers of 100 and 150
/// neurons, learning rate 0.01, 200 epochs, batch size 64, Adam betas
/// (0.9, 0.999) with epsilon 1e-8.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Apply ReLU at the output layer as well (fidelity switch).
    pub relu_output: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_sizes: vec![100, 150],
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 64,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            relu_output: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err(Error::invalid("hidden_sizes must be nonempty and positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        Ok(())
    }
}

/// Per-epoch log-likelihood traces and timing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Weighted training log-likelihood after each epoch.
    pub train_ll: Vec<f64>,
    /// Weighted validation log-likelihood after each epoch.
    pub val_ll: Vec<f64>,
    pub wall_time_s: f64,
    pub final_epoch: usize,
}

fn flatten_params(model: &NeuralModel, out: &mut Vec<f64>) {
    out.clear();
    for layer in &model.mlp.hidden {
        out.extend_from_slice(layer.weights.data());
        out.extend_from_slice(&layer.bias);
    }
    out.extend_from_slice(&model.mlp.output_weights);
    out.extend_from_slice(&model.asc);
}

fn unflatten_params(model: &mut NeuralModel, flat: &[f64]) {
    let mut idx = 0;
    for layer in model.mlp.hidden.iter_mut() {
        let w_len = layer.weights.data().len();
        layer.weights.data_mut().copy_from_slice(&flat[idx..idx + w_len]);
        idx += w_len;
        let b_len = layer.bias.len();
        layer.bias.copy_from_slice(&flat[idx..idx + b_len]);
        idx += b_len;
    }
    let ow_len = model.mlp.output_weights.len();
    model
        .mlp
        .output_weights
        .copy_from_slice(&flat[idx..idx + ow_len]);
    idx += ow_len;
    let asc_len = model.asc.len();
    model.asc.copy_from_slice(&flat[idx..idx + asc_len]);
    idx += asc_len;
    debug_assert_eq!(idx, flat.len());
}

fn flatten_grads(grads: &Gradients, out: &mut Vec<f64>) {
    out.clear();
    for (w, b) in grads.weights.iter().zip(&grads.biases) {
        out.extend_from_slice(w.data());
        out.extend_from_slice(b);
    }
    out.extend_from_slice(&grads.output_weights);
    out.extend_from_slice(&grads.asc);
}

fn param_norms(model: &NeuralModel) -> String {
    let mut parts = Vec::new();
    for (i, layer) in model.mlp.hidden.iter().enumerate() {
        let m = layer.weights.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        parts.push(format!("|W{}|max={m:.3e}", i + 1));
    }
    let out = model
        .mlp
        .output_weights
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    parts.push(format!("|Wout|max={out:.3e}"));
    let asc = model.asc.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    parts.push(format!("|asc|max={asc:.3e}"));
    parts.join(" ")
}

/// Trains a fresh model: He-uniform initialization and zero ASCs (seeded),
/// a z-score scaler fitted on the training split only, seeded epoch
/// shuffling, and one Adam update per mini-batch. Returns the final-epoch
/// model; validation likelihood is recorded but never used for selection.
///
/// Deterministic for a fixed seed: same seed, bit-identical parameters.
pub fn train(
    train_view: &DatasetView<'_>,
    val_view: &DatasetView<'_>,
    feature_spec: &FeatureSpec,
    config: &TrainConfig,
) -> Result<(NeuralModel, TrainHistory)> {
    config.validate()?;
    if train_view.is_empty() {
        return Err(Error::invalid("training view is empty"));
    }
    let started = Instant::now();
    let dataset = train_view.dataset();

    let scaler =
        ZoneFeaturePlan::fit_scaler_for_training(dataset, feature_spec, train_view)?;
    let mut init_rng = Rng::stream(config.seed, 0x10);
    let mlp = Mlp::init_he_uniform(
        feature_spec.input_dim,
        &config.hidden_sizes,
        config.relu_output,
        &mut init_rng,
    )?;
    let mut model = NeuralModel {
        feature_spec: *feature_spec,
        scaler,
        mlp,
        asc: vec![0.0; dataset.n_zones()],
    };

    let plan = ZoneFeaturePlan::new(dataset, feature_spec, &model.scaler)?;
    let max_batch = config.batch_size.min(train_view.len());
    let mut workspace = BatchWorkspace::new(&model.mlp, &plan, max_batch);
    let mut grads = Gradients::zeros_like(&model.mlp, dataset.n_zones());

    let n_params = model.mlp.param_count() + model.asc.len();
    let mut adam = AdamState::new(
        n_params,
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.epsilon,
    );
    let mut flat_params = Vec::with_capacity(n_params);
    let mut flat_grads = Vec::with_capacity(n_params);

    let mut shuffle_rng = Rng::stream(config.seed, 0x20);
    let mut order: Vec<usize> = (0..train_view.len()).collect();
    let mut history = TrainHistory {
        train_ll: Vec::with_capacity(config.epochs),
        val_ll: Vec::with_capacity(config.epochs),
        wall_time_s: 0.0,
        final_epoch: 0,
    };

    for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            grads.clear();
            let loss = batch_step(&model, &plan, train_view, batch, &mut workspace, &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::NanLoss {
                    epoch,
                    batch: batch_idx,
                    diagnostics: param_norms(&model),
                });
            }
            flatten_params(&model, &mut flat_params);
            flatten_grads(&grads, &mut flat_grads);
            adam.step(&mut flat_params, &flat_grads);
            unflatten_params(&mut model, &flat_params);
        }

        let train_ll = epoch_log_likelihood(&model, &plan, train_view, &mut workspace)?;
        let val_ll = if val_view.is_empty() {
            0.0
        } else {
            epoch_log_likelihood(&model, &plan, val_view, &mut workspace)?
        };
        history.train_ll.push(train_ll);
        history.val_ll.push(val_ll);
        history.final_epoch = epoch;
    }
    history.wall_time_s = started.elapsed().as_secs_f64();
    Ok((model, history))
}

fn epoch_log_likelihood(
    model: &NeuralModel,
    plan: &ZoneFeaturePlan,
    view: &DatasetView<'_>,
    ws: &mut BatchWorkspace,
) -> Result<f64> {
    let chunk = ws.max_batch_size();
    let rows: Vec<usize> = (0..view.len()).collect();
    let mut total = 0.0;
    for batch in rows.chunks(chunk) {
        total -= batch_forward_loss(model, plan, view, batch, ws, false)?;
    }
    Ok(total)
}
