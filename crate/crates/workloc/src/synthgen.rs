//! Synthetic city, population, accessibility, and choice simulation.
//!
//! These generators stand in for the real travel survey, per-zone job
//! registers, and the activity-based accessibility model, and they provide
//! the known ground truth behind parameter-recovery and model-ordering
//! tests. Everything is bit-deterministic for a fixed seed; independent
//! entity streams (city, population, accessibility, choices) are derived
//! from the one user-facing seed.

use serde::{Deserialize, Serialize};

use crate::domain::{
    build_dataset, zone_distance, AccessibilityMatrix, Dataset, Individual, Zone, OCCUPATION_COUNT,
};
use crate::error::{Error, Result};
use crate::nested_logit::NlParams;
use crate::prob::softmax;
use crate::rng::Rng;

/// Zone lattice configuration. Jobs per occupation are Poisson draws whose
/// mean decays exponentially with distance from the CBD zone, normalized so
/// `job_scale` is the expected citywide total per occupation. On top of the
/// shared decay profile, each zone gets a lognormal specialization
/// multiplier per occupation (`mix_sigma`), so occupation mixes vary across
/// zones the way they do in real job registers; without that variation the
/// occupation constants of a choice model are barely identified.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CityConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Zone index of the central business district.
    pub cbd_zone: usize,
    /// Expected total jobs per occupation type across the whole city.
    pub job_scale: f64,
    /// Exponential falloff rate of job density with km from the CBD.
    pub distance_decay: f64,
    pub cell_size_km: f64,
    /// Lognormal sigma of the per-zone, per-occupation specialization
    /// multiplier; 0 reproduces a flat occupation mix everywhere.
    pub mix_sigma: f64,
}

impl CityConfig {
    pub fn n_zones(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    fn validate(&self) -> Result<()> {
        if self.n_zones() < 2 {
            return Err(Error::invalid("city needs at least 2 zones"));
        }
        if self.cbd_zone >= self.n_zones() {
            return Err(Error::invalid(format!(
                "cbd_zone {} out of range for {} zones",
                self.cbd_zone,
                self.n_zones()
            )));
        }
        if !(self.job_scale >= 0.0)
            || !(self.cell_size_km > 0.0)
            || !(self.distance_decay >= 0.0)
            || !(self.mix_sigma >= 0.0)
        {
            return Err(Error::invalid("city scales must be nonnegative"));
        }
        Ok(())
    }
}

impl Default for CityConfig {
    fn default() -> Self {
        CityConfig {
            grid_rows: 10,
            grid_cols: 10,
            cbd_zone: 44,
            job_scale: 3000.0,
            distance_decay: 0.25,
            cell_size_km: 2.0,
            mix_sigma: 0.8,
        }
    }
}

/// Marginal category probabilities for one attribute.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Marginals(pub Vec<f64>);

impl Marginals {
    fn from_counts(counts: &[u64]) -> Self {
        let total: u64 = counts.iter().sum();
        Marginals(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::invalid(format!("{name}: empty marginals")));
        }
        if self.0.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::invalid(format!("{name}: probabilities outside [0,1]")));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("{name}: marginals sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Population generator configuration. The default marginals are the survey
/// frequency tables; attributes are drawn independently, which is a
/// deliberate simplification relative to real survey correlations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub n_individuals: usize,
    pub household_type: Marginals,
    pub has_kids: Marginals,
    pub has_car: Marginals,
    pub gender: Marginals,
    pub income_class: Marginals,
    pub employment: Marginals,
    /// Lognormal weight distribution parameters.
    pub weight_mu: f64,
    pub weight_sigma: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            n_individuals: 1000,
            household_type: Marginals::from_counts(&[1072, 2441, 102, 768, 92, 1729]),
            has_kids: Marginals::from_counts(&[3513, 2691]),
            has_car: Marginals::from_counts(&[1998, 4206]),
            gender: Marginals::from_counts(&[2781, 3423]),
            income_class: Marginals::from_counts(&[
                12, 28, 43, 115, 319, 557, 954, 2154, 1378, 405, 239,
            ]),
            employment: Marginals::from_counts(&[5350, 818, 29, 7]),
            weight_mu: 0.0,
            weight_sigma: 0.25,
        }
    }
}

impl PopulationConfig {
    fn validate(&self) -> Result<()> {
        if self.n_individuals == 0 {
            return Err(Error::invalid("population needs n_individuals >= 1"));
        }
        self.household_type.validate("household_type")?;
        self.has_kids.validate("has_kids")?;
        self.has_car.validate("has_car")?;
        self.gender.validate("gender")?;
        self.income_class.validate("income_class")?;
        self.employment.validate("employment")?;
        if !(self.weight_sigma >= 0.0) {
            return Err(Error::invalid("weight_sigma must be nonnegative"));
        }
        Ok(())
    }
}

/// Synthetic accessibility model: `A[n, j] = a0 - decay * dist(home_n, j)`
/// plus Gaussian noise.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AccessibilityConfig {
    pub a0: f64,
    pub decay: f64,
    pub noise_sigma: f64,
}

impl Default for AccessibilityConfig {
    fn default() -> Self {
        AccessibilityConfig {
            a0: 10.0,
            decay: 0.3,
            noise_sigma: 1.0,
        }
    }
}

/// Ground-truth choice process used to simulate observed work zones.
///
/// The `Nl` oracle draws from the nested-logit model itself. The `Nonlinear`
/// oracle adds two interaction terms that the nested-logit utility cannot
/// express but a network can learn:
///
/// ```text
/// v += gamma * has_car * log(1 + office_jobs)
///    + delta * gender * accessibility^2
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Oracle {
    Nl {
        params: NlParams,
    },
    Nonlinear {
        params: NlParams,
        gamma: f64,
        delta: f64,
    },
}

impl Oracle {
    pub fn params(&self) -> &NlParams {
        match self {
            Oracle::Nl { params } => params,
            Oracle::Nonlinear { params, .. } => params,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Oracle::Nl { .. } => "oracle-nl",
            Oracle::Nonlinear { .. } => "oracle-nonlinear",
        }
    }

    /// Systematic utilities over all zones for one individual.
    pub fn utilities(
        &self,
        zones: &[Zone],
        access: &[f64],
        individual: &Individual,
    ) -> Result<Vec<f64>> {
        let params = self.params();
        let coef = params.beta_a + params.beta_acr * individual.has_car as f64;
        let mut utilities = Vec::with_capacity(zones.len());
        for (zone, &a) in zones.iter().zip(access) {
            let logsum =
                crate::nested_logit::occupation_logsum(&params.alpha, params.lambda, &zone.jobs)?;
            let mut v = if logsum == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                coef * a + logsum
            };
            if let Oracle::Nonlinear { gamma, delta, .. } = self {
                if v > f64::NEG_INFINITY {
                    let office = zone.jobs[2] as f64;
                    v += gamma * individual.has_car as f64 * (1.0 + office).ln();
                    v += delta * individual.gender as f64 * a * a;
                }
            }
            utilities.push(v);
        }
        Ok(utilities)
    }
}

/// Lattice of zones with Poisson job counts decaying from the CBD.
pub fn generate_city(config: &CityConfig, seed: u64) -> Result<Vec<Zone>> {
    config.validate()?;
    let mut rng = Rng::stream(seed, 0x01);
    let n = config.n_zones();
    let centroid = |id: usize| {
        let row = id / config.grid_cols;
        let col = id % config.grid_cols;
        (
            (col as f64 + 0.5) * config.cell_size_km,
            (row as f64 + 0.5) * config.cell_size_km,
        )
    };
    let (cbd_x, cbd_y) = centroid(config.cbd_zone);
    let weights: Vec<f64> = (0..n)
        .map(|id| {
            let (x, y) = centroid(id);
            let d = ((x - cbd_x).powi(2) + (y - cbd_y).powi(2)).sqrt();
            (-config.distance_decay * d).exp()
        })
        .collect();
    let total_weight: f64 = weights.iter().sum();

    let mut zones = Vec::with_capacity(n);
    for id in 0..n {
        let (x, y) = centroid(id);
        // Expected zone total across occupations follows the CBD decay.
        let zone_total = OCCUPATION_COUNT as f64 * config.job_scale * weights[id] / total_weight;
        // Logistic-normal occupation shares: lognormal draws normalized per
        // zone, so mixes specialize without inflating zone totals.
        let mut mix = [1.0 / OCCUPATION_COUNT as f64; OCCUPATION_COUNT];
        if config.mix_sigma > 0.0 {
            let mut sum = 0.0;
            for m in mix.iter_mut() {
                *m = rng.lognormal(0.0, config.mix_sigma);
                sum += *m;
            }
            for m in mix.iter_mut() {
                *m /= sum;
            }
        }
        let mut jobs = [0u64; OCCUPATION_COUNT];
        for (slot, share) in jobs.iter_mut().zip(mix) {
            *slot = rng.poisson(zone_total * share);
        }
        zones.push(Zone {
            zone_id: id,
            centroid_x_km: x,
            centroid_y_km: y,
            jobs,
        });
    }
    Ok(zones)
}

/// Individuals with independent attribute draws from the marginals, uniform
/// home zones, lognormal weights, and no observed work zone yet.
pub fn generate_population(
    config: &PopulationConfig,
    zones: &[Zone],
    seed: u64,
) -> Result<Vec<Individual>> {
    config.validate()?;
    let mut rng = Rng::stream(seed, 0x02);
    let mut individuals = Vec::with_capacity(config.n_individuals);
    for id in 0..config.n_individuals {
        let draw = |rng: &mut Rng, m: &Marginals, base: u8| -> u8 {
            base + rng.categorical(&m.0).expect("validated marginals") as u8
        };
        individuals.push(Individual {
            person_id: id as u64,
            home_zone: rng.next_below(zones.len() as u64) as usize,
            work_zone: None,
            household_type: draw(&mut rng, &config.household_type, 1),
            has_kids: draw(&mut rng, &config.has_kids, 0),
            has_car: draw(&mut rng, &config.has_car, 0),
            gender: draw(&mut rng, &config.gender, 0),
            income_class: draw(&mut rng, &config.income_class, 1),
            employment: draw(&mut rng, &config.employment, 1),
            weight: rng.lognormal(config.weight_mu, config.weight_sigma),
        });
    }
    Ok(individuals)
}

/// Accessibility from each individual's home to every zone.
pub fn generate_accessibility(
    zones: &[Zone],
    individuals: &[Individual],
    config: &AccessibilityConfig,
    seed: u64,
) -> Result<AccessibilityMatrix> {
    if !(config.decay > 0.0) {
        return Err(Error::invalid("accessibility decay must be positive"));
    }
    let mut rng = Rng::stream(seed, 0x03);
    let mut values = Vec::with_capacity(individuals.len() * zones.len());
    for ind in individuals {
        let home = &zones[ind.home_zone];
        for zone in zones {
            let noise = if config.noise_sigma > 0.0 {
                config.noise_sigma * rng.normal()
            } else {
                0.0
            };
            values.push(config.a0 - config.decay * zone_distance(home, zone) + noise);
        }
    }
    AccessibilityMatrix::new(individuals.len(), zones.len(), values)
}

/// Samples one work zone per individual from the oracle's choice
/// probabilities, returning the dataset with work zones filled in.
pub fn simulate_choices(oracle: &Oracle, dataset: Dataset, seed: u64) -> Result<Dataset> {
    let mut rng = Rng::stream(seed, 0x04);
    let mut work_zones = Vec::with_capacity(dataset.n_individuals());
    for row in 0..dataset.n_individuals() {
        let ind = &dataset.individuals()[row];
        let access = dataset.accessibility().row(row);
        let utilities = oracle.utilities(dataset.zones(), access, ind)?;
        let probs = softmax(&utilities).map_err(|_| Error::EmptyChoiceSet)?;
        let chosen = rng
            .categorical(probs.as_slice())
            .ok_or(Error::EmptyChoiceSet)?;
        work_zones.push(chosen);
    }
    dataset.with_work_zones(&work_zones)
}

/// Convenience bundle: full simulate pipeline from configs to a dataset with
/// observed choices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub city: CityConfig,
    pub population: PopulationConfig,
    pub accessibility: AccessibilityConfig,
    pub oracle: Oracle,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            city: CityConfig::default(),
            population: PopulationConfig::default(),
            accessibility: AccessibilityConfig::default(),
            oracle: Oracle::Nl {
                params: NlParams {
                    alpha: [0.5; 6],
                    lambda: 1.2,
                    beta_a: 0.6,
                    beta_acr: -0.1,
                },
            },
        }
    }
}

/// Runs city, population, accessibility, and choice simulation off one seed.
pub fn simulate_dataset(config: &SimConfig, seed: u64) -> Result<Dataset> {
    let zones = generate_city(&config.city, seed)?;
    let individuals = generate_population(&config.population, &zones, seed)?;
    let accessibility =
        generate_accessibility(&zones, &individuals, &config.accessibility, seed)?;
    let dataset = build_dataset(zones, individuals, accessibility)?;
    simulate_choices(&config.oracle, dataset, seed)
}
