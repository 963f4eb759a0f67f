//! Dataset and model files.
//!
//! Datasets are three files: `zones.csv`, `individuals.csv`, and an
//! accessibility matrix stored either as CSV or in the compact `WLAC1`
//! binary layout (5-byte magic, u64 LE row count, u64 LE column count, then
//! row-major f64 LE values). Floats in CSV are written with 17 significant
//! digits, which round-trips every f64 bit pattern exactly. Models are JSON
//! documents dispatched on a top-level `model_kind` field, with bulk weight
//! arrays packed as base64 little-endian f64 bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::domain::{AccessibilityMatrix, Individual, Zone, OCCUPATION_COUNT};
use crate::error::{Error, Result};
use crate::nested_logit::{EstimationResult, NlSettings, NL_PARAM_NAMES};
use crate::neural::{DenseLayer, FeatureSpec, Mlp, NeuralModel, Scaler, TrainConfig};

/// 17 significant digits: enough to reproduce any f64 exactly on re-parse.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fingerprint_hex(fp: u64) -> String {
    format!("{fp:016x}")
}

const ZONES_HEADER: &str = "zone_id,x_km,y_km,jobs_restaurant,jobs_shopping,jobs_office,jobs_education,jobs_health,jobs_business,jobs_recreation";
const INDIVIDUALS_HEADER: &str =
    "person_id,home_zone,work_zone,household_type,has_kids,has_car,gender,income_class,employment,weight";
const ACCESSIBILITY_MAGIC: &[u8; 5] = b"WLAC1";

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn field<'a>(
    fields: &'a [&'a str],
    idx: usize,
    path: &Path,
    line: usize,
    name: &str,
) -> Result<&'a str> {
    fields
        .get(idx)
        .copied()
        .ok_or_else(|| parse_err(path, line, format!("missing column {name}")))
}

fn parse_num<T: std::str::FromStr>(s: &str, path: &Path, line: usize, name: &str) -> Result<T> {
    s.trim()
        .parse::<T>()
        .map_err(|_| parse_err(path, line, format!("cannot parse {name} from {s:?}")))
}

pub fn write_zones_csv(path: &Path, zones: &[Zone]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{ZONES_HEADER}")?;
    for z in zones {
        write!(
            w,
            "{},{},{}",
            z.zone_id,
            format_f64(z.centroid_x_km),
            format_f64(z.centroid_y_km)
        )?;
        for k in 0..OCCUPATION_COUNT {
            write!(w, ",{}", z.jobs[k])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Zones with the original-id-to-dense-index map built at load time.
#[derive(Clone, Debug)]
pub struct LoadedZones {
    pub zones: Vec<Zone>,
    /// Original file id to dense 0-based zone index.
    pub id_map: BTreeMap<u64, usize>,
}

/// Loads zones, remapping arbitrary file ids to dense 0-based indices in
/// file order. Duplicate ids are an error.
pub fn load_zones(path: &Path) -> Result<LoadedZones> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == ZONES_HEADER => {}
        Some((_, header)) => {
            return Err(parse_err(path, 1, format!("unexpected zones header {header:?}")))
        }
        None => return Err(parse_err(path, 1, "empty zones file")),
    }
    let mut zones = Vec::new();
    let mut id_map = BTreeMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let original_id: u64 = parse_num(field(&fields, 0, path, line_no, "zone_id")?, path, line_no, "zone_id")?;
        if id_map.insert(original_id, zones.len()).is_some() {
            return Err(parse_err(path, line_no, format!("duplicate zone id {original_id}")));
        }
        let x: f64 = parse_num(field(&fields, 1, path, line_no, "x_km")?, path, line_no, "x_km")?;
        let y: f64 = parse_num(field(&fields, 2, path, line_no, "y_km")?, path, line_no, "y_km")?;
        let mut jobs = [0u64; OCCUPATION_COUNT];
        for (k, slot) in jobs.iter_mut().enumerate() {
            *slot = parse_num(
                field(&fields, 3 + k, path, line_no, "jobs")?,
                path,
                line_no,
                "job count",
            )?;
        }
        zones.push(Zone {
            zone_id: zones.len(),
            centroid_x_km: x,
            centroid_y_km: y,
            jobs,
        });
    }
    Ok(LoadedZones { zones, id_map })
}

pub fn write_individuals_csv(path: &Path, individuals: &[Individual]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{INDIVIDUALS_HEADER}")?;
    for p in individuals {
        let work = match p.work_zone {
            Some(z) => z.to_string(),
            None => String::new(),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            p.person_id,
            p.home_zone,
            work,
            p.household_type,
            p.has_kids,
            p.has_car,
            p.gender,
            p.income_class,
            p.employment,
            format_f64(p.weight)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Loads individuals; zone references go through the id map from
/// [`load_zones`]. An empty `work_zone` column means unobserved.
pub fn load_individuals(path: &Path, id_map: &BTreeMap<u64, usize>) -> Result<Vec<Individual>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == INDIVIDUALS_HEADER => {}
        Some((_, header)) => {
            return Err(parse_err(path, 1, format!("unexpected individuals header {header:?}")))
        }
        None => return Err(parse_err(path, 1, "empty individuals file")),
    }
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let person_id: u64 =
            parse_num(field(&fields, 0, path, line_no, "person_id")?, path, line_no, "person_id")?;
        if !seen.insert(person_id) {
            return Err(parse_err(path, line_no, format!("duplicate person id {person_id}")));
        }
        let map_zone = |raw: u64| -> Result<usize> {
            id_map
                .get(&raw)
                .copied()
                .ok_or_else(|| parse_err(path, line_no, format!("unknown zone id {raw}")))
        };
        let home_raw: u64 =
            parse_num(field(&fields, 1, path, line_no, "home_zone")?, path, line_no, "home_zone")?;
        let work_field = field(&fields, 2, path, line_no, "work_zone")?.trim();
        let work_zone = if work_field.is_empty() {
            None
        } else {
            Some(map_zone(parse_num(work_field, path, line_no, "work_zone")?)?)
        };
        out.push(Individual {
            person_id,
            home_zone: map_zone(home_raw)?,
            work_zone,
            household_type: parse_num(field(&fields, 3, path, line_no, "household_type")?, path, line_no, "household_type")?,
            has_kids: parse_num(field(&fields, 4, path, line_no, "has_kids")?, path, line_no, "has_kids")?,
            has_car: parse_num(field(&fields, 5, path, line_no, "has_car")?, path, line_no, "has_car")?,
            gender: parse_num(field(&fields, 6, path, line_no, "gender")?, path, line_no, "gender")?,
            income_class: parse_num(field(&fields, 7, path, line_no, "income_class")?, path, line_no, "income_class")?,
            employment: parse_num(field(&fields, 8, path, line_no, "employment")?, path, line_no, "employment")?,
            weight: parse_num(field(&fields, 9, path, line_no, "weight")?, path, line_no, "weight")?,
        });
    }
    Ok(out)
}

pub fn write_accessibility_binary(path: &Path, matrix: &AccessibilityMatrix) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(ACCESSIBILITY_MAGIC)?;
    w.write_all(&(matrix.n_rows() as u64).to_le_bytes())?;
    w.write_all(&(matrix.n_cols() as u64).to_le_bytes())?;
    for v in matrix.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_accessibility_csv(path: &Path, matrix: &AccessibilityMatrix) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in 0..matrix.n_rows() {
        let row = matrix.row(r);
        let mut first = true;
        for v in row {
            if !first {
                write!(w, ",")?;
            }
            write!(w, "{}", format_f64(*v))?;
            first = false;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Loads an accessibility matrix, sniffing the `WLAC1` magic and falling
/// back to CSV.
pub fn load_accessibility(path: &Path) -> Result<AccessibilityMatrix> {
    let mut file = fs::File::open(path)?;
    let mut magic = [0u8; 5];
    let n_read = file.read(&mut magic)?;
    if n_read == 5 && &magic == ACCESSIBILITY_MAGIC {
        let mut header = [0u8; 16];
        file.read_exact(&mut header)
            .map_err(|_| parse_err(path, 0, "truncated accessibility header"))?;
        let rows = u64::from_le_bytes(header[..8].try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(header[8..].try_into().unwrap()) as usize;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let expected = rows * cols * 8;
        if bytes.len() != expected {
            return Err(parse_err(
                path,
                0,
                format!("accessibility payload is {} bytes, expected {expected}", bytes.len()),
            ));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        return AccessibilityMatrix::new(rows, cols, values);
    }

    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| parse_num::<f64>(s, path, i + 1, "accessibility value"))
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(parse_err(
                    path,
                    i + 1,
                    format!("row has {} columns, expected {c}", row.len()),
                ))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_err(path, 1, "empty accessibility file"))?;
    AccessibilityMatrix::new(rows, cols, values)
}

fn f64s_to_b64(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    BASE64.encode(bytes)
}

fn b64_to_f64s(encoded: &str, what: &str) -> Result<Vec<f64>> {
    let bytes = BASE64
        .decode(encoded)
        .map_err(|e| Error::invalid(format!("{what}: bad base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::invalid(format!(
            "{what}: byte length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Serialized dense layer: row-major weights and bias as base64 f64 LE.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerData {
    pub rows: usize,
    pub cols: usize,
    pub weights_b64: String,
    pub bias_b64: String,
}

/// Nested-logit model file payload.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NlModelFile {
    pub param_names: Vec<String>,
    pub result: EstimationResult,
    /// Weighted log-likelihood on the validation split.
    pub ll_validation: f64,
    pub settings: NlSettings,
    pub split_seed: u64,
    pub split_fraction: f64,
    pub dataset_fingerprint: String,
}

/// Neural model file payload.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DnnModelFile {
    pub label: String,
    pub feature_spec: FeatureSpec,
    pub scaler: Scaler,
    pub hidden_sizes: Vec<usize>,
    pub relu_output: bool,
    pub layers: Vec<LayerData>,
    pub output_weights_b64: String,
    pub asc_b64: String,
    pub train_config: TrainConfig,
    pub ll_train_final: f64,
    pub ll_val_final: f64,
    pub split_seed: u64,
    pub split_fraction: f64,
    pub dataset_fingerprint: String,
}

impl DnnModelFile {
    pub fn from_model(
        model: &NeuralModel,
        label: String,
        train_config: &TrainConfig,
        ll_train_final: f64,
        ll_val_final: f64,
        split_seed: u64,
        split_fraction: f64,
        dataset_fingerprint: String,
    ) -> Self {
        DnnModelFile {
            label,
            feature_spec: model.feature_spec,
            scaler: model.scaler.clone(),
            hidden_sizes: model.mlp.hidden_sizes(),
            relu_output: model.mlp.relu_output,
            layers: model
                .mlp
                .hidden
                .iter()
                .map(|l| LayerData {
                    rows: l.weights.rows(),
                    cols: l.weights.cols(),
                    weights_b64: f64s_to_b64(l.weights.data()),
                    bias_b64: f64s_to_b64(&l.bias),
                })
                .collect(),
            output_weights_b64: f64s_to_b64(&model.mlp.output_weights),
            asc_b64: f64s_to_b64(&model.asc),
            train_config: train_config.clone(),
            ll_train_final,
            ll_val_final,
            split_seed,
            split_fraction,
            dataset_fingerprint,
        }
    }

    pub fn to_model(&self) -> Result<NeuralModel> {
        let mut hidden = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let weights = b64_to_f64s(&layer.weights_b64, "layer weights")?;
            if weights.len() != layer.rows * layer.cols {
                return Err(Error::dim(
                    format!("layer {i} weights"),
                    layer.rows * layer.cols,
                    weights.len(),
                ));
            }
            let bias = b64_to_f64s(&layer.bias_b64, "layer bias")?;
            if bias.len() != layer.rows {
                return Err(Error::dim(format!("layer {i} bias"), layer.rows, bias.len()));
            }
            hidden.push(DenseLayer {
                weights: crate::linalg::Matrix::from_rows(layer.rows, layer.cols, weights),
                bias,
            });
        }
        if hidden.is_empty() {
            return Err(Error::invalid("model file has no layers"));
        }
        let output_weights = b64_to_f64s(&self.output_weights_b64, "output weights")?;
        let asc = b64_to_f64s(&self.asc_b64, "asc")?;
        Ok(NeuralModel {
            feature_spec: self.feature_spec,
            scaler: self.scaler.clone(),
            mlp: Mlp {
                hidden,
                output_weights,
                relu_output: self.relu_output,
            },
            asc,
        })
    }
}

/// A model file, dispatched on `model_kind`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "model_kind")]
pub enum ModelFile {
    #[serde(rename = "nested-logit")]
    NestedLogit(NlModelFile),
    #[serde(rename = "dnn")]
    Dnn(DnnModelFile),
}

impl ModelFile {
    pub fn label(&self) -> String {
        match self {
            ModelFile::NestedLogit(_) => "DCM".to_string(),
            ModelFile::Dnn(d) => d.label.clone(),
        }
    }

    pub fn dataset_fingerprint(&self) -> &str {
        match self {
            ModelFile::NestedLogit(m) => &m.dataset_fingerprint,
            ModelFile::Dnn(m) => &m.dataset_fingerprint,
        }
    }

    pub fn split_seed(&self) -> u64 {
        match self {
            ModelFile::NestedLogit(m) => m.split_seed,
            ModelFile::Dnn(m) => m.split_seed,
        }
    }

    pub fn split_fraction(&self) -> f64 {
        match self {
            ModelFile::NestedLogit(m) => m.split_fraction,
            ModelFile::Dnn(m) => m.split_fraction,
        }
    }
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    let json = serde_json::to_string_pretty(model)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Helper assembling the 9 reported names for NL files.
pub fn nl_param_names() -> Vec<String> {
    NL_PARAM_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Writes a generic CSV table: a header line plus rows of preformatted
/// cells. Cells must not contain commas or newlines.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}
