//! Domain types: zones, individuals, the accessibility matrix, and the
//! assembled dataset with train/validation views.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Number of occupation types per zone.
pub const OCCUPATION_COUNT: usize = 7;

/// Occupation names in job-count order.
pub const OCCUPATION_NAMES: [&str; OCCUPATION_COUNT] = [
    "restaurant",
    "shopping",
    "office",
    "education",
    "health",
    "business",
    "recreation",
];

/// Spatial alternative in the choice set: a zone with a centroid and a job
/// count per occupation type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub zone_id: usize,
    pub centroid_x_km: f64,
    pub centroid_y_km: f64,
    pub jobs: [u64; OCCUPATION_COUNT],
}

impl Zone {
    pub fn total_jobs(&self) -> u64 {
        self.jobs.iter().sum()
    }

    pub fn has_jobs(&self) -> bool {
        self.jobs.iter().any(|&j| j > 0)
    }
}

/// Euclidean distance between zone centroids, in km.
pub fn zone_distance(a: &Zone, b: &Zone) -> f64 {
    let dx = a.centroid_x_km - b.centroid_x_km;
    let dy = a.centroid_y_km - b.centroid_y_km;
    (dx * dx + dy * dy).sqrt()
}

/// One survey record: home zone, optional observed work zone, the person's
/// attributes, and a sampling weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub person_id: u64,
    pub home_zone: usize,
    pub work_zone: Option<usize>,
    /// Household type, 1-6.
    pub household_type: u8,
    /// 0 = no, 1 = yes.
    pub has_kids: u8,
    /// 0 = no, 1 = yes.
    pub has_car: u8,
    /// 0 = male, 1 = female.
    pub gender: u8,
    /// Household income class, 1-11.
    pub income_class: u8,
    /// Employment status, 1-4.
    pub employment: u8,
    pub weight: f64,
}

impl Individual {
    fn validate(&self, zone_count: usize) -> Result<()> {
        if !(self.weight > 0.0) {
            return Err(Error::NonPositiveWeight {
                person_id: self.person_id,
                weight: self.weight,
            });
        }
        if self.home_zone >= zone_count {
            return Err(Error::DanglingZone {
                person_id: self.person_id,
                zone_id: self.home_zone,
                zone_count,
            });
        }
        if let Some(w) = self.work_zone {
            if w >= zone_count {
                return Err(Error::DanglingZone {
                    person_id: self.person_id,
                    zone_id: w,
                    zone_count,
                });
            }
        }
        let range_checks = [
            ("household_type", self.household_type, 1, 6),
            ("has_kids", self.has_kids, 0, 1),
            ("has_car", self.has_car, 0, 1),
            ("gender", self.gender, 0, 1),
            ("income_class", self.income_class, 1, 11),
            ("employment", self.employment, 1, 4),
        ];
        for (name, value, lo, hi) in range_checks {
            if value < lo || value > hi {
                return Err(Error::invalid(format!(
                    "individual {}: {name}={value} outside {lo}..={hi}",
                    self.person_id
                )));
            }
        }
        Ok(())
    }
}

/// Dense N x J matrix of spare-time accessibility values, rows bound to
/// individuals by position.
#[derive(Clone, Debug, PartialEq)]
pub struct AccessibilityMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl AccessibilityMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::dim(
                "accessibility values",
                n_rows * n_cols,
                values.len(),
            ));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "accessibility matrix contains non-finite value {bad}"
            )));
        }
        Ok(AccessibilityMatrix {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Cross-validated bundle of zones, individuals, and accessibility.
#[derive(Clone, Debug)]
pub struct Dataset {
    zones: Vec<Zone>,
    individuals: Vec<Individual>,
    accessibility: AccessibilityMatrix,
}

/// Validates the pieces against each other; fails rather than truncating.
pub fn build_dataset(
    zones: Vec<Zone>,
    individuals: Vec<Individual>,
    accessibility: AccessibilityMatrix,
) -> Result<Dataset> {
    if zones.is_empty() {
        return Err(Error::invalid("dataset needs at least one zone"));
    }
    for (i, z) in zones.iter().enumerate() {
        if z.zone_id != i {
            return Err(Error::invalid(format!(
                "zone ids must be dense and 0-based: index {i} holds zone_id {}",
                z.zone_id
            )));
        }
    }
    if accessibility.n_rows() != individuals.len() {
        return Err(Error::dim(
            "accessibility rows",
            individuals.len(),
            accessibility.n_rows(),
        ));
    }
    if accessibility.n_cols() != zones.len() {
        return Err(Error::dim(
            "accessibility columns",
            zones.len(),
            accessibility.n_cols(),
        ));
    }
    for ind in &individuals {
        ind.validate(zones.len())?;
    }
    Ok(Dataset {
        zones,
        individuals,
        accessibility,
    })
}

impl Dataset {
    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn accessibility(&self) -> &AccessibilityMatrix {
        &self.accessibility
    }

    pub fn n_individuals(&self) -> usize {
        self.individuals.len()
    }

    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    /// Zone ids with at least one job: the effective choice set.
    pub fn nonempty_zones(&self) -> Vec<usize> {
        self.zones
            .iter()
            .filter(|z| z.has_jobs())
            .map(|z| z.zone_id)
            .collect()
    }

    /// View covering every individual, in stored order.
    pub fn view_all(&self) -> DatasetView<'_> {
        DatasetView {
            dataset: self,
            rows: (0..self.individuals.len()).collect(),
        }
    }

    /// Replace work zones by position; used when simulating choices.
    pub fn with_work_zones(mut self, work_zones: &[usize]) -> Result<Self> {
        if work_zones.len() != self.individuals.len() {
            return Err(Error::dim(
                "work zones",
                self.individuals.len(),
                work_zones.len(),
            ));
        }
        for (ind, &wz) in self.individuals.iter_mut().zip(work_zones) {
            if wz >= self.zones.len() {
                return Err(Error::DanglingZone {
                    person_id: ind.person_id,
                    zone_id: wz,
                    zone_count: self.zones.len(),
                });
            }
            ind.work_zone = Some(wz);
        }
        Ok(self)
    }

    /// FNV-1a hash over the canonical byte encoding of the dataset,
    /// used to detect models evaluated against the wrong data.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_u64(self.zones.len() as u64);
        for z in &self.zones {
            h.write_u64(z.zone_id as u64);
            h.write_f64(z.centroid_x_km);
            h.write_f64(z.centroid_y_km);
            for &j in &z.jobs {
                h.write_u64(j);
            }
        }
        h.write_u64(self.individuals.len() as u64);
        for ind in &self.individuals {
            h.write_u64(ind.person_id);
            h.write_u64(ind.home_zone as u64);
            h.write_u64(match ind.work_zone {
                Some(w) => w as u64 + 1,
                None => 0,
            });
            for v in [
                ind.household_type,
                ind.has_kids,
                ind.has_car,
                ind.gender,
                ind.income_class,
                ind.employment,
            ] {
                h.write_u64(v as u64);
            }
            h.write_f64(ind.weight);
        }
        for &a in self.accessibility.values() {
            h.write_f64(a);
        }
        h.finish()
    }
}

/// Borrowed subset of a dataset's individuals. Accessibility rows are
/// resolved through the parent matrix, so views never copy the dense block.
#[derive(Clone, Debug)]
pub struct DatasetView<'a> {
    dataset: &'a Dataset,
    rows: Vec<usize>,
}

impl<'a> DatasetView<'a> {
    pub fn from_rows(dataset: &'a Dataset, rows: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= dataset.n_individuals()) {
            return Err(Error::invalid(format!(
                "view row {bad} out of range for {} individuals",
                dataset.n_individuals()
            )));
        }
        Ok(DatasetView { dataset, rows })
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn zones(&self) -> &'a [Zone] {
        self.dataset.zones()
    }

    pub fn n_zones(&self) -> usize {
        self.dataset.n_zones()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row indices into the parent dataset, in view order.
    pub fn parent_rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn individual(&self, i: usize) -> &'a Individual {
        &self.dataset.individuals()[self.rows[i]]
    }

    pub fn accessibility_row(&self, i: usize) -> &'a [f64] {
        self.dataset.accessibility().row(self.rows[i])
    }

    pub fn individuals(&self) -> impl Iterator<Item = &'a Individual> + '_ {
        self.rows.iter().map(|&r| &self.dataset.individuals()[r])
    }

    pub fn total_weight(&self) -> f64 {
        self.individuals().map(|ind| ind.weight).sum()
    }

    /// Observed home-to-work distance for row `i`; errors when the work
    /// zone is absent.
    pub fn commute_km(&self, i: usize) -> Result<f64> {
        let ind = self.individual(i);
        let work = ind.work_zone.ok_or(Error::MissingWorkZone {
            person_id: ind.person_id,
        })?;
        Ok(zone_distance(
            &self.zones()[ind.home_zone],
            &self.zones()[work],
        ))
    }
}

/// Deterministic train/validation split: a seeded permutation of individual
/// indices cut at `round(N * train_fraction)`. The two views partition the
/// dataset exactly.
pub fn split_dataset(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(DatasetView<'_>, DatasetView<'_>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = dataset.n_individuals();
    let mut rng = Rng::stream(seed, 0xB5);
    let perm = rng.permutation(n);
    let n_train = (n as f64 * train_fraction).round() as usize;
    let train_rows = perm[..n_train].to_vec();
    let val_rows = perm[n_train..].to_vec();
    Ok((
        DatasetView {
            dataset,
            rows: train_rows,
        },
        DatasetView {
            dataset,
            rows: val_rows,
        },
    ))
}

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x1_0000_0000_01b3);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.write_bytes(&v.to_le_bytes());
    }

    fn write_f64(&mut self, v: f64) {
        self.write_bytes(&v.to_le_bytes());
    }

    fn finish(&self) -> u64 {
        self.0
    }
}
