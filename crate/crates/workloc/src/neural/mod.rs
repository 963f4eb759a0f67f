//! Feed-forward neural workplace choice model.
//!
//! One shared multi-layer perceptron (the "zone block") maps a zone's
//! features, the individual's attributes, and the accessibility value to a
//! scalar systematic utility; a per-zone alternative-specific constant is
//! added on top, and choice probabilities are the softmax over zones. The
//! MLP weights are shared across all zones; only the ASC differs per zone,
//! which keeps the parameter count independent of the size of the choice
//! set.
//!
//! Hidden layers use ReLU. The output layer is linear and bias-free: the
//! ASC plays the role of the per-zone output bias, and a ReLU at the output
//! would clamp utilities to be nonnegative before the ASC and kill half the
//! gradient range. A config switch restores the ReLU output for fidelity
//! experiments.

mod train;

pub use train::{train, TrainConfig, TrainHistory};

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, DatasetView, Individual, Zone, OCCUPATION_COUNT};
use crate::error::{Error, Result};
use crate::linalg::{gemm, Matrix, Op};
use crate::prob::{softmax, ChoiceProbabilities};
use crate::rng::Rng;

/// Which individual attributes enter the feature vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Jobs, accessibility, and the has-car dummy only (9 inputs).
    Car,
    /// Jobs, accessibility, and all six survey attributes (14 inputs).
    All,
}

/// Feature layout: 7 `log(1 + jobs)` terms, the accessibility value, then
/// the attribute block according to the mode. Attribute categories enter as
/// ordinal numeric codes; everything is z-scored downstream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub mode: FeatureMode,
    pub input_dim: usize,
}

impl FeatureSpec {
    pub fn car() -> Self {
        FeatureSpec {
            mode: FeatureMode::Car,
            input_dim: 9,
        }
    }

    pub fn all() -> Self {
        FeatureSpec {
            mode: FeatureMode::All,
            input_dim: 14,
        }
    }

    pub fn for_mode(mode: FeatureMode) -> Self {
        match mode {
            FeatureMode::Car => FeatureSpec::car(),
            FeatureMode::All => FeatureSpec::all(),
        }
    }

    /// Encoding descriptors, in vector order.
    pub fn feature_names(&self) -> Vec<&'static str> {
        let mut names = vec![
            "log1p_jobs_restaurant",
            "log1p_jobs_shopping",
            "log1p_jobs_office",
            "log1p_jobs_education",
            "log1p_jobs_health",
            "log1p_jobs_business",
            "log1p_jobs_recreation",
            "accessibility",
        ];
        match self.mode {
            FeatureMode::Car => names.push("has_car"),
            FeatureMode::All => names.extend([
                "household_type",
                "has_kids",
                "has_car",
                "gender",
                "income_class",
                "employment",
            ]),
        }
        names
    }

    fn validate(&self) -> Result<()> {
        let expected = match self.mode {
            FeatureMode::Car => 9,
            FeatureMode::All => 14,
        };
        if self.input_dim != expected {
            return Err(Error::dim("feature_spec input_dim", expected, self.input_dim));
        }
        Ok(())
    }
}

fn check_attr(name: &str, value: u8, lo: u8, hi: u8, person_id: u64) -> Result<()> {
    if value < lo || value > hi {
        return Err(Error::invalid(format!(
            "individual {person_id}: {name}={value} outside {lo}..={hi}"
        )));
    }
    Ok(())
}

/// Raw (unscaled) feature vector for one individual-zone pair.
pub fn build_features(
    individual: &Individual,
    zone: &Zone,
    accessibility_value: f64,
    spec: &FeatureSpec,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let pid = individual.person_id;
    check_attr("household_type", individual.household_type, 1, 6, pid)?;
    check_attr("has_kids", individual.has_kids, 0, 1, pid)?;
    check_attr("has_car", individual.has_car, 0, 1, pid)?;
    check_attr("gender", individual.gender, 0, 1, pid)?;
    check_attr("income_class", individual.income_class, 1, 11, pid)?;
    check_attr("employment", individual.employment, 1, 4, pid)?;

    let mut out = Vec::with_capacity(spec.input_dim);
    for k in 0..OCCUPATION_COUNT {
        out.push((1.0 + zone.jobs[k] as f64).ln());
    }
    out.push(accessibility_value);
    match spec.mode {
        FeatureMode::Car => out.push(individual.has_car as f64),
        FeatureMode::All => out.extend([
            individual.household_type as f64,
            individual.has_kids as f64,
            individual.has_car as f64,
            individual.gender as f64,
            individual.income_class as f64,
            individual.employment as f64,
        ]),
    }
    debug_assert_eq!(out.len(), spec.input_dim);
    Ok(out)
}

/// Per-feature z-score transform fitted on training data. Constant features
/// keep a standard deviation of 1, so they pass through centered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Identity transform of the given width.
    pub fn identity(dim: usize) -> Self {
        Scaler {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_in_place(&self, features: &mut [f64]) {
        for (i, v) in features.iter_mut().enumerate() {
            *v = (*v - self.mean[i]) / self.std[i];
        }
    }

    pub fn apply(&self, features: &[f64]) -> Vec<f64> {
        let mut out = features.to_vec();
        self.apply_in_place(&mut out);
        out
    }
}

/// Fits a z-score scaler on explicit training rows (population standard
/// deviation; training statistics only).
pub fn fit_scaler(training_rows: &[Vec<f64>]) -> Result<Scaler> {
    if training_rows.len() < 2 {
        return Err(Error::invalid(format!(
            "scaler needs at least 2 training rows, got {}",
            training_rows.len()
        )));
    }
    let dim = training_rows[0].len();
    let n = training_rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in training_rows {
        if row.len() != dim {
            return Err(Error::dim("scaler row", dim, row.len()));
        }
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = vec![0.0; dim];
    for row in training_rows {
        for (s, (v, m)) in var.iter_mut().zip(row.iter().zip(&mean)) {
            let d = v - m;
            *s += d * d;
        }
    }
    let std = var
        .iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    Ok(Scaler { mean, std })
}

/// One dense layer: row-major weights `[out, in]` and a bias per output.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// The shared zone-block MLP: ReLU hidden layers, linear bias-free output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub hidden: Vec<DenseLayer>,
    /// Output weights, length = last hidden size.
    pub output_weights: Vec<f64>,
    /// Apply ReLU at the output layer too (fidelity switch; default off).
    pub relu_output: bool,
}

impl Mlp {
    /// He-uniform initialization for the ReLU layers, zero biases, seeded.
    pub fn init_he_uniform(
        input_dim: usize,
        hidden_sizes: &[usize],
        relu_output: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        if hidden_sizes.is_empty() {
            return Err(Error::invalid("network needs at least one hidden layer"));
        }
        if hidden_sizes.iter().any(|&h| h == 0) || input_dim == 0 {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        let mut hidden = Vec::with_capacity(hidden_sizes.len());
        let mut fan_in = input_dim;
        for &h in hidden_sizes {
            let limit = (6.0 / fan_in as f64).sqrt();
            let data: Vec<f64> = (0..h * fan_in)
                .map(|_| (2.0 * rng.next_f64() - 1.0) * limit)
                .collect();
            hidden.push(DenseLayer {
                weights: Matrix::from_rows(h, fan_in, data),
                bias: vec![0.0; h],
            });
            fan_in = h;
        }
        let limit = (6.0 / fan_in as f64).sqrt();
        let output_weights = (0..fan_in)
            .map(|_| (2.0 * rng.next_f64() - 1.0) * limit)
            .collect();
        Ok(Mlp {
            hidden,
            output_weights,
            relu_output,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.hidden[0].weights.cols()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.hidden.iter().map(|l| l.weights.rows()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.hidden
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.bias.len())
            .sum::<usize>()
            + self.output_weights.len()
    }

    /// Scalar utility for one already-scaled input vector.
    pub fn forward_scalar(&self, scaled_input: &[f64]) -> Result<f64> {
        if scaled_input.len() != self.input_dim() {
            return Err(Error::dim("network input", self.input_dim(), scaled_input.len()));
        }
        let mut activation = scaled_input.to_vec();
        for layer in &self.hidden {
            let mut next = vec![0.0; layer.weights.rows()];
            for (out, (row, b)) in next
                .iter_mut()
                .zip((0..layer.weights.rows()).map(|r| (layer.weights.row(r), layer.bias[r])))
            {
                let z: f64 = row.iter().zip(&activation).map(|(w, a)| w * a).sum::<f64>() + b;
                *out = z.max(0.0);
            }
            activation = next;
        }
        let v: f64 = self
            .output_weights
            .iter()
            .zip(&activation)
            .map(|(w, a)| w * a)
            .sum();
        Ok(if self.relu_output { v.max(0.0) } else { v })
    }
}

/// The full neural choice model: feature layout, training-set scaler, the
/// shared MLP, and one ASC per zone.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralModel {
    pub feature_spec: FeatureSpec,
    pub scaler: Scaler,
    pub mlp: Mlp,
    pub asc: Vec<f64>,
}

impl NeuralModel {
    /// Scalar zone-block utility for an already-scaled input (no ASC).
    pub fn forward_zone_block(&self, scaled_input: &[f64]) -> Result<f64> {
        self.mlp.forward_scalar(scaled_input)
    }

    /// Systematic utilities `V_j = mlp(features(n, j)) + asc_j` over all
    /// zones for one individual. Zones without jobs are excluded from the
    /// choice set and get `-inf`.
    pub fn model_utilities(&self, view: &DatasetView<'_>, row: usize) -> Result<Vec<f64>> {
        let plan = ZoneFeaturePlan::new(view.dataset(), &self.feature_spec, &self.scaler)?;
        self.utilities_with_plan(&plan, view, row)
    }

    /// Softmax of [`NeuralModel::model_utilities`].
    pub fn predict_probabilities(
        &self,
        view: &DatasetView<'_>,
        row: usize,
    ) -> Result<ChoiceProbabilities> {
        let utilities = self.model_utilities(view, row)?;
        softmax(&utilities).map_err(|_| Error::EmptyChoiceSet)
    }

    pub(crate) fn utilities_with_plan(
        &self,
        plan: &ZoneFeaturePlan,
        view: &DatasetView<'_>,
        row: usize,
    ) -> Result<Vec<f64>> {
        if self.asc.len() != view.n_zones() {
            return Err(Error::dim("asc length", view.n_zones(), self.asc.len()));
        }
        let n_active = plan.active_zones.len();
        let mut x = Matrix::zeros(n_active, self.feature_spec.input_dim);
        let mut scratch = ForwardScratch::new(&self.mlp, n_active);
        plan.fill_rows(view, row, &mut x, 0)?;
        forward_batch(&self.mlp, &x, &mut scratch);
        let mut utilities = vec![f64::NEG_INFINITY; view.n_zones()];
        for (i, &zone) in plan.active_zones.iter().enumerate() {
            utilities[zone] = scratch.output[i] + self.asc[zone];
        }
        Ok(utilities)
    }
}

/// Precomputed, already-scaled per-zone feature block plus the bookkeeping
/// needed to assemble full feature rows quickly. Zones without jobs are not
/// part of the plan.
pub(crate) struct ZoneFeaturePlan {
    pub(crate) active_zones: Vec<usize>,
    /// Scaled `log1p(jobs)` block, `[n_active, 7]`.
    zone_block: Matrix,
    /// Index of a zone in `active_zones`, or None when it has no jobs.
    pub(crate) active_index: Vec<Option<usize>>,
    spec: FeatureSpec,
    scaler: Scaler,
}

impl ZoneFeaturePlan {
    pub(crate) fn new(dataset: &Dataset, spec: &FeatureSpec, scaler: &Scaler) -> Result<Self> {
        spec.validate()?;
        if scaler.dim() != spec.input_dim {
            return Err(Error::dim("scaler width", spec.input_dim, scaler.dim()));
        }
        let active_zones = dataset.nonempty_zones();
        if active_zones.is_empty() {
            return Err(Error::EmptyChoiceSet);
        }
        let mut active_index = vec![None; dataset.n_zones()];
        let mut zone_block = Matrix::zeros(active_zones.len(), OCCUPATION_COUNT);
        for (i, &z) in active_zones.iter().enumerate() {
            active_index[z] = Some(i);
            let row = zone_block.row_mut(i);
            for k in 0..OCCUPATION_COUNT {
                let raw = (1.0 + dataset.zones()[z].jobs[k] as f64).ln();
                row[k] = (raw - scaler.mean[k]) / scaler.std[k];
            }
        }
        Ok(ZoneFeaturePlan {
            active_zones,
            zone_block,
            active_index,
            spec: *spec,
            scaler: scaler.clone(),
        })
    }

    pub(crate) fn n_active(&self) -> usize {
        self.active_zones.len()
    }

    /// Scaled attribute tail for one individual (everything after the
    /// accessibility column).
    fn scaled_tail(&self, ind: &Individual) -> Vec<f64> {
        let raw: Vec<f64> = match self.spec.mode {
            FeatureMode::Car => vec![ind.has_car as f64],
            FeatureMode::All => vec![
                ind.household_type as f64,
                ind.has_kids as f64,
                ind.has_car as f64,
                ind.gender as f64,
                ind.income_class as f64,
                ind.employment as f64,
            ],
        };
        raw.iter()
            .enumerate()
            .map(|(i, v)| {
                let col = OCCUPATION_COUNT + 1 + i;
                (v - self.scaler.mean[col]) / self.scaler.std[col]
            })
            .collect()
    }

    /// Writes the scaled feature rows of one individual (one row per active
    /// zone) into `x` starting at `row_offset`.
    pub(crate) fn fill_rows(
        &self,
        view: &DatasetView<'_>,
        row: usize,
        x: &mut Matrix,
        row_offset: usize,
    ) -> Result<()> {
        let ind = view.individual(row);
        let access = view.accessibility_row(row);
        let tail = self.scaled_tail(ind);
        let acc_mean = self.scaler.mean[OCCUPATION_COUNT];
        let acc_std = self.scaler.std[OCCUPATION_COUNT];
        for (i, &zone) in self.active_zones.iter().enumerate() {
            let out = x.row_mut(row_offset + i);
            out[..OCCUPATION_COUNT].copy_from_slice(self.zone_block.row(i));
            out[OCCUPATION_COUNT] = (access[zone] - acc_mean) / acc_std;
            out[OCCUPATION_COUNT + 1..].copy_from_slice(&tail);
        }
        Ok(())
    }

    /// Fits the scaler over every (training individual, active zone) feature
    /// row without materializing them: job columns vary over zones only,
    /// attribute columns over individuals only, and the accessibility column
    /// over both.
    pub(crate) fn fit_scaler_for_training(
        dataset: &Dataset,
        spec: &FeatureSpec,
        train: &DatasetView<'_>,
    ) -> Result<Scaler> {
        spec.validate()?;
        let active: Vec<usize> = dataset.nonempty_zones();
        if active.is_empty() {
            return Err(Error::EmptyChoiceSet);
        }
        if train.is_empty() {
            return Err(Error::invalid("scaler needs a nonempty training set"));
        }
        let n_active = active.len() as f64;
        let n_train = train.len() as f64;
        let mut mean = vec![0.0; spec.input_dim];
        let mut var = vec![0.0; spec.input_dim];

        // Job columns: statistics over active zones.
        for k in 0..OCCUPATION_COUNT {
            let values: Vec<f64> = active
                .iter()
                .map(|&z| (1.0 + dataset.zones()[z].jobs[k] as f64).ln())
                .collect();
            let m: f64 = values.iter().sum::<f64>() / n_active;
            let v: f64 = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n_active;
            mean[k] = m;
            var[k] = v;
        }

        // Accessibility: statistics over the train x active submatrix.
        {
            let mut sum = 0.0;
            for r in 0..train.len() {
                let row = train.accessibility_row(r);
                for &z in &active {
                    sum += row[z];
                }
            }
            let m = sum / (n_train * n_active);
            let mut ss = 0.0;
            for r in 0..train.len() {
                let row = train.accessibility_row(r);
                for &z in &active {
                    let d = row[z] - m;
                    ss += d * d;
                }
            }
            mean[OCCUPATION_COUNT] = m;
            var[OCCUPATION_COUNT] = ss / (n_train * n_active);
        }

        // Attribute columns: statistics over training individuals.
        let attr_values: Vec<fn(&Individual) -> f64> = match spec.mode {
            FeatureMode::Car => vec![|i: &Individual| i.has_car as f64],
            FeatureMode::All => vec![
                |i: &Individual| i.household_type as f64,
                |i: &Individual| i.has_kids as f64,
                |i: &Individual| i.has_car as f64,
                |i: &Individual| i.gender as f64,
                |i: &Individual| i.income_class as f64,
                |i: &Individual| i.employment as f64,
            ],
        };
        for (offset, getter) in attr_values.iter().enumerate() {
            let col = OCCUPATION_COUNT + 1 + offset;
            let m: f64 = train.individuals().map(|i| getter(i)).sum::<f64>() / n_train;
            let v: f64 = train
                .individuals()
                .map(|i| {
                    let d = getter(i) - m;
                    d * d
                })
                .sum::<f64>()
                / n_train;
            mean[col] = m;
            var[col] = v;
        }

        let std = var
            .iter()
            .map(|s| {
                let sd = s.sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Scaler { mean, std })
    }
}

/// Activations kept for the backward pass, reused across batches.
pub(crate) struct ForwardScratch {
    /// Post-ReLU activations per hidden layer, `[rows, h_l]`.
    pub(crate) activations: Vec<Matrix>,
    /// Pre-activation output (before the optional output ReLU).
    pub(crate) output_pre: Vec<f64>,
    /// Final scalar utility per row.
    pub(crate) output: Vec<f64>,
}

impl ForwardScratch {
    pub(crate) fn new(mlp: &Mlp, rows: usize) -> Self {
        ForwardScratch {
            activations: mlp
                .hidden
                .iter()
                .map(|l| Matrix::zeros(rows, l.weights.rows()))
                .collect(),
            output_pre: vec![0.0; rows],
            output: vec![0.0; rows],
        }
    }

    fn resize_rows(&mut self, mlp: &Mlp, rows: usize) {
        if self.output.len() != rows {
            *self = ForwardScratch::new(mlp, rows);
        }
    }
}

/// Batched forward pass over `x` (`[rows, input_dim]`), filling the scratch.
pub(crate) fn forward_batch(mlp: &Mlp, x: &Matrix, scratch: &mut ForwardScratch) {
    scratch.resize_rows(mlp, x.rows());
    for (l, layer) in mlp.hidden.iter().enumerate() {
        if l == 0 {
            gemm(&mut scratch.activations[0], 1.0, x, Op::NoTrans, &layer.weights, Op::Trans, 0.0);
        } else {
            let (prev, rest) = scratch.activations.split_at_mut(l);
            gemm(&mut rest[0], 1.0, &prev[l - 1], Op::NoTrans, &layer.weights, Op::Trans, 0.0);
        }
        let act = &mut scratch.activations[l];
        for r in 0..act.rows() {
            let row = act.row_mut(r);
            for (v, b) in row.iter_mut().zip(&layer.bias) {
                *v = (*v + b).max(0.0);
            }
        }
    }
    let last = scratch.activations.last().expect("at least one hidden layer");
    for r in 0..last.rows() {
        let v: f64 = last
            .row(r)
            .iter()
            .zip(&mlp.output_weights)
            .map(|(a, w)| a * w)
            .sum();
        scratch.output_pre[r] = v;
        scratch.output[r] = if mlp.relu_output { v.max(0.0) } else { v };
    }
}

/// Parameter gradients mirroring the model structure.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub output_weights: Vec<f64>,
    pub asc: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp, n_zones: usize) -> Self {
        Gradients {
            weights: mlp
                .hidden
                .iter()
                .map(|l| Matrix::zeros(l.weights.rows(), l.weights.cols()))
                .collect(),
            biases: mlp.hidden.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            output_weights: vec![0.0; mlp.output_weights.len()],
            asc: vec![0.0; n_zones],
        }
    }

    fn clear(&mut self) {
        for w in self.weights.iter_mut() {
            w.fill(0.0);
        }
        for b in self.biases.iter_mut() {
            b.fill(0.0);
        }
        self.output_weights.fill(0.0);
        self.asc.fill(0.0);
    }
}

/// Reverse pass: given `d loss / d output` per row, accumulates gradients
/// for every weight, bias, and (via `zone_of_row`) ASC.
pub(crate) fn backward_batch(
    mlp: &Mlp,
    x: &Matrix,
    scratch: &ForwardScratch,
    d_output: &[f64],
    zone_of_row: &[usize],
    grads: &mut Gradients,
) {
    let rows = x.rows();
    let last_idx = mlp.hidden.len() - 1;
    let last = &scratch.activations[last_idx];

    // ASC gradients and the output-layer chain.
    let mut dv = d_output.to_vec();
    if mlp.relu_output {
        for (d, &pre) in dv.iter_mut().zip(&scratch.output_pre) {
            if pre <= 0.0 {
                *d = 0.0;
            }
        }
    }
    for (r, &zone) in zone_of_row.iter().enumerate() {
        grads.asc[zone] += d_output[r];
    }
    for r in 0..rows {
        let d = dv[r];
        if d == 0.0 {
            continue;
        }
        for (g, a) in grads.output_weights.iter_mut().zip(last.row(r)) {
            *g += d * a;
        }
    }

    // delta at the last hidden layer: dv ⊗ w_out, masked by ReLU.
    let mut delta = Matrix::zeros(rows, mlp.output_weights.len());
    for r in 0..rows {
        let d = dv[r];
        let act = last.row(r);
        let out = delta.row_mut(r);
        for (c, (w, a)) in mlp.output_weights.iter().zip(act).enumerate() {
            out[c] = if *a > 0.0 { d * w } else { 0.0 };
        }
    }

    for l in (0..=last_idx).rev() {
        let input: &Matrix = if l == 0 { x } else { &scratch.activations[l - 1] };
        // dW_l += delta^T . input ; db_l += column sums of delta.
        gemm(&mut grads.weights[l], 1.0, &delta, Op::Trans, input, Op::NoTrans, 1.0);
        for r in 0..rows {
            for (b, d) in grads.biases[l].iter_mut().zip(delta.row(r)) {
                *b += d;
            }
        }
        if l > 0 {
            // delta_{l-1} = (delta_l . W_l) masked by the previous ReLU.
            let mut prev = Matrix::zeros(rows, mlp.hidden[l].weights.cols());
            gemm(&mut prev, 1.0, &delta, Op::NoTrans, &mlp.hidden[l].weights, Op::NoTrans, 0.0);
            let prev_act = &scratch.activations[l - 1];
            for r in 0..rows {
                let act = prev_act.row(r);
                let row = prev.row_mut(r);
                for (v, a) in row.iter_mut().zip(act) {
                    if *a <= 0.0 {
                        *v = 0.0;
                    }
                }
            }
            delta = prev;
        }
    }
}

/// Loss and exact gradients for a batch of view rows.
///
/// The loss is the negative weighted log-likelihood of the observed choices
/// in the batch; the chosen-zone log-probability is computed in the log
/// domain, so extremely unlikely choices do not underflow.
pub fn loss_and_gradients(
    model: &NeuralModel,
    batch_rows: &[usize],
    view: &DatasetView<'_>,
) -> Result<(f64, Gradients)> {
    if batch_rows.is_empty() {
        return Err(Error::invalid("batch must be nonempty"));
    }
    let plan = ZoneFeaturePlan::new(view.dataset(), &model.feature_spec, &model.scaler)?;
    let mut workspace = BatchWorkspace::new(&model.mlp, &plan, batch_rows.len());
    let mut grads = Gradients::zeros_like(&model.mlp, view.n_zones());
    let loss = batch_step(model, &plan, view, batch_rows, &mut workspace, &mut grads)?;
    Ok((loss, grads))
}

/// Reusable buffers for batched loss/gradient evaluation.
pub(crate) struct BatchWorkspace {
    pub(crate) x: Matrix,
    pub(crate) scratch: ForwardScratch,
    zone_of_row: Vec<usize>,
    d_output: Vec<f64>,
    max_batch: usize,
}

impl BatchWorkspace {
    pub(crate) fn new(mlp: &Mlp, plan: &ZoneFeaturePlan, max_batch: usize) -> Self {
        let rows = max_batch * plan.n_active();
        BatchWorkspace {
            x: Matrix::zeros(rows, mlp.input_dim()),
            scratch: ForwardScratch::new(mlp, rows),
            zone_of_row: vec![0; rows],
            d_output: vec![0.0; rows],
            max_batch,
        }
    }

    pub(crate) fn max_batch_size(&self) -> usize {
        self.max_batch
    }
}

/// Assembles a batch, runs forward + softmax + backward, accumulating into
/// `grads`; returns the batch loss.
pub(crate) fn batch_step(
    model: &NeuralModel,
    plan: &ZoneFeaturePlan,
    view: &DatasetView<'_>,
    batch_rows: &[usize],
    ws: &mut BatchWorkspace,
    grads: &mut Gradients,
) -> Result<f64> {
    let loss = batch_forward_loss(model, plan, view, batch_rows, ws, true)?;
    backward_batch(
        &model.mlp,
        &ws.x,
        &ws.scratch,
        &ws.d_output[..batch_rows.len() * plan.n_active()],
        &ws.zone_of_row[..batch_rows.len() * plan.n_active()],
        grads,
    );
    Ok(loss)
}

/// Forward pass for a batch of observations; fills `d_output` with softmax
/// gradients when `with_gradient` is set. Returns the total negative
/// weighted log-likelihood of the batch.
pub(crate) fn batch_forward_loss(
    model: &NeuralModel,
    plan: &ZoneFeaturePlan,
    view: &DatasetView<'_>,
    batch_rows: &[usize],
    ws: &mut BatchWorkspace,
    with_gradient: bool,
) -> Result<f64> {
    assert!(batch_rows.len() <= ws.max_batch, "batch exceeds workspace");
    let n_active = plan.n_active();
    let rows = batch_rows.len() * n_active;
    ws.x.truncate_rows(rows);

    for (b, &view_row) in batch_rows.iter().enumerate() {
        plan.fill_rows(view, view_row, &mut ws.x, b * n_active)?;
        for (i, &zone) in plan.active_zones.iter().enumerate() {
            ws.zone_of_row[b * n_active + i] = zone;
        }
    }
    forward_batch(&model.mlp, &ws.x, &mut ws.scratch);

    let mut loss = 0.0;
    for (b, &view_row) in batch_rows.iter().enumerate() {
        let ind = view.individual(view_row);
        let chosen = ind.work_zone.ok_or(Error::MissingWorkZone {
            person_id: ind.person_id,
        })?;
        let chosen_active = plan.active_index[chosen].ok_or(Error::ZeroProbabilityChoice {
            person_id: ind.person_id,
            zone_id: chosen,
        })?;
        let slice = &ws.scratch.output[b * n_active..(b + 1) * n_active];

        let mut max_u = f64::NEG_INFINITY;
        for (i, &zone) in plan.active_zones.iter().enumerate() {
            let u = slice[i] + model.asc[zone];
            if u > max_u {
                max_u = u;
            }
        }
        let mut sum = 0.0;
        let w = ind.weight;
        if with_gradient {
            let d = &mut ws.d_output[b * n_active..(b + 1) * n_active];
            for (i, &zone) in plan.active_zones.iter().enumerate() {
                let e = (slice[i] + model.asc[zone] - max_u).exp();
                d[i] = e;
                sum += e;
            }
            let inv = 1.0 / sum;
            for (i, d_i) in d.iter_mut().enumerate() {
                let p = *d_i * inv;
                let indicator = if i == chosen_active { 1.0 } else { 0.0 };
                *d_i = w * (p - indicator);
            }
        } else {
            for (i, &zone) in plan.active_zones.iter().enumerate() {
                sum += (slice[i] + model.asc[zone] - max_u).exp();
            }
        }
        let log_prob = slice[chosen_active] + model.asc[chosen] - max_u - sum.ln();
        loss -= w * log_prob;
    }
    Ok(loss)
}

/// Weighted log-likelihood of observed choices under the model, evaluated
/// in chunks through the batched forward path.
pub fn model_log_likelihood(model: &NeuralModel, view: &DatasetView<'_>) -> Result<f64> {
    let plan = ZoneFeaturePlan::new(view.dataset(), &model.feature_spec, &model.scaler)?;
    let chunk = 64.min(view.len()).max(1);
    let mut ws = BatchWorkspace::new(&model.mlp, &plan, chunk);
    let mut total = 0.0;
    let rows: Vec<usize> = (0..view.len()).collect();
    for batch in rows.chunks(chunk) {
        total -= batch_forward_loss(model, &plan, view, batch, &mut ws, false)?;
    }
    Ok(total)
}
