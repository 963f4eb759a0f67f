//! Model comparison statistics: Pearson correlations between zone
//! attributes and choices, two-sample Kolmogorov-Smirnov tests on commute
//! distance distributions (overall and segmented by gender or car access),
//! probability-weighted choice sampling, and average log-likelihoods.

use serde::{Deserialize, Serialize};

use crate::domain::{zone_distance, DatasetView, Zone, OCCUPATION_COUNT, OCCUPATION_NAMES};
use crate::error::{Error, Result};
use crate::model::ChoiceModel;
use crate::rng::Rng;
use crate::special::{kolmogorov_q, student_t_two_sided_p};

/// Pearson correlation with its two-tailed p-value.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Two-sample KS statistic with its asymptotic p-value.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// One home-to-work distance with the segmentation labels carried along.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceObs {
    pub km: f64,
    pub gender: u8,
    pub has_car: u8,
}

/// Distances between chosen work zones and home zones.
#[derive(Clone, Debug, Default)]
pub struct DistanceSample {
    pub observations: Vec<DistanceObs>,
}

impl DistanceSample {
    pub fn distances(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.km).collect()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    fn segment_values(&self, segment: Segment, value: u8) -> Vec<f64> {
        self.observations
            .iter()
            .filter(|o| segment.value_of(o) == value)
            .map(|o| o.km)
            .collect()
    }
}

/// Individual attribute used to split distance distributions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    Gender,
    Car,
}

impl Segment {
    fn value_of(&self, obs: &DistanceObs) -> u8 {
        match self {
            Segment::Gender => obs.gender,
            Segment::Car => obs.has_car,
        }
    }

    /// (value, label) pairs in report order.
    pub fn levels(&self) -> [(u8, &'static str); 2] {
        match self {
            Segment::Gender => [(1, "female"), (0, "male")],
            Segment::Car => [(1, "car_yes"), (0, "car_no")],
        }
    }
}

/// Pearson correlation coefficient between two equal-length vectors, with a
/// two-tailed p-value from the Student-t transform
/// `t = r sqrt((n-2) / (1-r^2))`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::dim("pearson inputs", x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "pearson needs at least 3 observations, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_x = x.iter().sum::<f64>() / nf;
    let mean_y = y.iter().sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::invalid(
            "pearson is undefined for a constant input vector",
        ));
    }
    let r = (cov / (var_x.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let p_value = if 1.0 - r * r <= f64::EPSILON {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        student_t_two_sided_p(t, df)
    };
    Ok(CorrelationResult {
        statistic: r,
        p_value,
        n,
    })
}

/// Histogram of chosen zones.
pub fn zone_choice_counts(work_zones: &[usize], n_zones: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; n_zones];
    for &z in work_zones {
        if z >= n_zones {
            return Err(Error::invalid(format!(
                "chosen zone {z} out of range for {n_zones} zones"
            )));
        }
        counts[z] += 1;
    }
    Ok(counts)
}

/// Pearson correlation between per-zone job counts and per-zone choice
/// counts, for each occupation type and for the zone totals.
pub fn attribute_choice_correlations(
    zones: &[Zone],
    choice_counts: &[u64],
) -> Result<Vec<(String, CorrelationResult)>> {
    if zones.len() != choice_counts.len() {
        return Err(Error::dim("choice counts", zones.len(), choice_counts.len()));
    }
    if zones.len() < 3 {
        return Err(Error::invalid("need at least 3 zones for correlations"));
    }
    let counts: Vec<f64> = choice_counts.iter().map(|&c| c as f64).collect();
    let mut table = Vec::with_capacity(OCCUPATION_COUNT + 1);
    for k in 0..OCCUPATION_COUNT {
        let jobs: Vec<f64> = zones.iter().map(|z| z.jobs[k] as f64).collect();
        table.push((OCCUPATION_NAMES[k].to_string(), pearson(&jobs, &counts)?));
    }
    let totals: Vec<f64> = zones.iter().map(|z| z.total_jobs() as f64).collect();
    table.push(("total".to_string(), pearson(&totals, &counts)?));
    Ok(table)
}

/// Two-sample Kolmogorov-Smirnov test.
///
/// The statistic is the exact supremum of |ECDF_a - ECDF_b| over the pooled
/// sample points (ties handled exactly); the p-value uses the asymptotic
/// Kolmogorov distribution with effective size `n1 n2 / (n1 + n2)`.
pub fn ks_two_sample(sample_a: &[f64], sample_b: &[f64]) -> Result<KsResult> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::invalid("KS test needs nonempty samples"));
    }
    let mut a = sample_a.to_vec();
    let mut b = sample_b.to_vec();
    a.sort_unstable_by(|x, y| x.total_cmp(y));
    b.sort_unstable_by(|x, y| x.total_cmp(y));
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n1 || j < n2 {
        let x = match (a.get(i), b.get(j)) {
            (Some(&va), Some(&vb)) => va.min(vb),
            (Some(&va), None) => va,
            (None, Some(&vb)) => vb,
            (None, None) => break,
        };
        while i < n1 && a[i] == x {
            i += 1;
        }
        while j < n2 && b[j] == x {
            j += 1;
        }
        let diff = (i as f64 / n1 as f64 - j as f64 / n2 as f64).abs();
        if diff > d {
            d = diff;
        }
    }
    let n_eff = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let lambda = (n_eff.sqrt() + 0.12 + 0.11 / n_eff.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
        n1,
        n2,
    })
}

/// Draws `draws_per_individual` work zones per individual from the model's
/// predicted probabilities, in view order, seeded.
pub fn sample_choices(
    model: &dyn ChoiceModel,
    view: &DatasetView<'_>,
    draws_per_individual: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if draws_per_individual == 0 {
        return Err(Error::invalid("draws_per_individual must be >= 1"));
    }
    let mut rng = Rng::stream(seed, 0x05);
    let mut all = Vec::with_capacity(view.len());
    for row in 0..view.len() {
        let probs = model.probabilities(view, row)?;
        let mut draws = Vec::with_capacity(draws_per_individual);
        for _ in 0..draws_per_individual {
            let z = rng.categorical(&probs).ok_or(Error::DegenerateUtilities)?;
            draws.push(z);
        }
        all.push(draws);
    }
    Ok(all)
}

/// Observed home-to-work distances with segmentation labels.
pub fn observed_distances(view: &DatasetView<'_>) -> Result<DistanceSample> {
    let mut observations = Vec::with_capacity(view.len());
    for row in 0..view.len() {
        let ind = view.individual(row);
        let km = view.commute_km(row)?;
        observations.push(DistanceObs {
            km,
            gender: ind.gender,
            has_car: ind.has_car,
        });
    }
    Ok(DistanceSample { observations })
}

/// Distances of sampled work-zone draws (one entry per draw), labels taken
/// from the drawing individual.
pub fn drawn_distances(view: &DatasetView<'_>, draws: &[Vec<usize>]) -> Result<DistanceSample> {
    if draws.len() != view.len() {
        return Err(Error::dim("draw rows", view.len(), draws.len()));
    }
    let zones = view.zones();
    let mut observations = Vec::new();
    for (row, row_draws) in draws.iter().enumerate() {
        let ind = view.individual(row);
        let home = &zones[ind.home_zone];
        for &chosen in row_draws {
            if chosen >= zones.len() {
                return Err(Error::invalid(format!(
                    "drawn zone {chosen} out of range for {} zones",
                    zones.len()
                )));
            }
            observations.push(DistanceObs {
                km: zone_distance(home, &zones[chosen]),
                gender: ind.gender,
                has_car: ind.has_car,
            });
        }
    }
    Ok(DistanceSample { observations })
}

/// KS test per segment level (female/male or car/no-car), model sample
/// against data sample.
pub fn segmented_ks(
    model_sample: &DistanceSample,
    data_sample: &DistanceSample,
    segment: Segment,
) -> Result<Vec<(String, KsResult)>> {
    let mut out = Vec::with_capacity(2);
    for (value, label) in segment.levels() {
        let m = model_sample.segment_values(segment, value);
        let d = data_sample.segment_values(segment, value);
        if m.is_empty() || d.is_empty() {
            return Err(Error::invalid(format!(
                "segment {label} is empty in one of the samples"
            )));
        }
        out.push((label.to_string(), ks_two_sample(&m, &d)?));
    }
    Ok(out)
}

/// Pearson correlation of each individual attribute (ordinal code) with the
/// observed home-to-work distance.
pub fn individual_attribute_correlations(
    view: &DatasetView<'_>,
) -> Result<Vec<(String, CorrelationResult)>> {
    let distances: Vec<f64> = (0..view.len())
        .map(|row| view.commute_km(row))
        .collect::<Result<_>>()?;
    let attributes: [(&str, fn(&crate::domain::Individual) -> f64); 6] = [
        ("household_type", |i| i.household_type as f64),
        ("has_kids", |i| i.has_kids as f64),
        ("has_car", |i| i.has_car as f64),
        ("gender", |i| i.gender as f64),
        ("income_class", |i| i.income_class as f64),
        ("employment", |i| i.employment as f64),
    ];
    let mut out = Vec::with_capacity(attributes.len());
    for (name, getter) in attributes {
        let codes: Vec<f64> = view.individuals().map(getter).collect();
        out.push((name.to_string(), pearson(&codes, &distances)?));
    }
    Ok(out)
}

/// Average log-likelihood of the observed choices under a model.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AverageLogLikelihood {
    /// `sum w ln Pr(chosen) / sum w`.
    pub weighted_mean: f64,
    /// Unweighted per-observation mean of `ln Pr(chosen)`.
    pub per_obs_mean: f64,
    /// Total weighted log-likelihood.
    pub total_weighted: f64,
    pub n_obs: usize,
}

pub fn average_loglikelihood(
    model: &dyn ChoiceModel,
    view: &DatasetView<'_>,
) -> Result<AverageLogLikelihood> {
    if view.is_empty() {
        return Err(Error::invalid("average log-likelihood of an empty view"));
    }
    let mut total_weighted = 0.0;
    let mut total_plain = 0.0;
    let mut total_weight = 0.0;
    for row in 0..view.len() {
        let ind = view.individual(row);
        let chosen = ind.work_zone.ok_or(Error::MissingWorkZone {
            person_id: ind.person_id,
        })?;
        let probs = model.probabilities(view, row)?;
        let p = probs[chosen];
        if p <= 0.0 {
            return Err(Error::ZeroProbabilityChoice {
                person_id: ind.person_id,
                zone_id: chosen,
            });
        }
        total_weighted += ind.weight * p.ln();
        total_plain += p.ln();
        total_weight += ind.weight;
    }
    Ok(AverageLogLikelihood {
        weighted_mean: total_weighted / total_weight,
        per_obs_mean: total_plain / view.len() as f64,
        total_weighted,
        n_obs: view.len(),
    })
}

/// Null log-likelihood: equal probability over the zones that offer jobs,
/// `sum_n w_n ln(1 / J_nonempty)`.
pub fn null_loglikelihood(view: &DatasetView<'_>) -> f64 {
    let nonempty = view.zones().iter().filter(|z| z.has_jobs()).count();
    if nonempty == 0 {
        return f64::NEG_INFINITY;
    }
    -view.total_weight() * (nonempty as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_dataset, AccessibilityMatrix, Dataset, Individual};
    use crate::rng::Rng;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    fn zone(id: usize, x: f64, y: f64, jobs: [u64; 7]) -> Zone {
        Zone {
            zone_id: id,
            centroid_x_km: x,
            centroid_y_km: y,
            jobs,
        }
    }

    fn person(id: u64, home: usize, work: usize, gender: u8, has_car: u8) -> Individual {
        Individual {
            person_id: id,
            home_zone: home,
            work_zone: Some(work),
            household_type: 2,
            has_kids: 0,
            has_car,
            gender,
            income_class: 6,
            employment: 1,
            weight: 1.0,
        }
    }

    #[test]
    fn pearson_exact_hand_cases() {
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r.statistic - 1.0).abs() < TOL);
        // df = 1: even a numerically perfect correlation leaves Cauchy mass.
        assert!(r.p_value < 1e-6);

        let r = pearson(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap();
        assert!((r.statistic + 1.0).abs() < TOL);

        // Covariance 4 over sqrt(5) * sqrt(5).
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r.statistic - 0.8).abs() < TOL);
        // With df = 2 and t^2 = 32/9 the two-sided p-value is exactly
        // 1 - sqrt(1 - 0.36) = 0.2.
        assert!((r.p_value - 0.2).abs() < 1e-12, "p {}", r.p_value);
    }

    #[test]
    fn pearson_rejects_degenerate_inputs() {
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn pearson_symmetry_and_affine_invariance(
            xs in proptest::collection::vec(-100.0f64..100.0, 5..40),
            scale in 0.1f64..10.0,
            shift in -50.0f64..50.0,
        ) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * ((i % 3) as f64 - 1.0) + i as f64).collect();
            let vx = xs.iter().cloned().fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
            let vy = ys.iter().cloned().fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
            prop_assume!(vx.0 < vx.1 && vy.0 < vy.1);

            let a = pearson(&xs, &ys).unwrap();
            let b = pearson(&ys, &xs).unwrap();
            prop_assert_eq!(a.statistic, b.statistic);
            prop_assert!(a.p_value >= 0.0 && a.p_value <= 1.0);

            let scaled: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
            let c = pearson(&scaled, &ys).unwrap();
            prop_assert!((a.statistic - c.statistic).abs() < 1e-12);

            let flipped: Vec<f64> = xs.iter().map(|x| -scale * x + shift).collect();
            let d = pearson(&flipped, &ys).unwrap();
            prop_assert!((a.statistic + d.statistic).abs() < 1e-12);
        }
    }

    #[test]
    fn choice_counts_histogram() {
        assert_eq!(zone_choice_counts(&[0, 0, 1], 3).unwrap(), vec![2, 1, 0]);
        assert_eq!(zone_choice_counts(&[], 3).unwrap(), vec![0, 0, 0]);
        let counts = zone_choice_counts(&[0, 2, 2, 1, 2], 3).unwrap();
        assert_eq!(counts.iter().sum::<u64>(), 5);
        assert!(zone_choice_counts(&[3], 3).is_err());
    }

    #[test]
    fn ks_known_cases() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);

        let r = ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.statistic, 1.0);

        let r = ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]).unwrap();
        assert_eq!(r.statistic, 0.5);

        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    /// O(n^2) oracle: evaluate both ECDFs at every pooled point.
    fn ks_brute_force(a: &[f64], b: &[f64]) -> f64 {
        let mut d: f64 = 0.0;
        for &x in a.iter().chain(b) {
            let fa = a.iter().filter(|&&v| v <= x).count() as f64 / a.len() as f64;
            let fb = b.iter().filter(|&&v| v <= x).count() as f64 / b.len() as f64;
            d = d.max((fa - fb).abs());
        }
        d
    }

    #[test]
    fn ks_matches_brute_force_on_random_samples() {
        let mut rng = Rng::seeded(2024);
        for _ in 0..200 {
            let n1 = 1 + rng.next_below(50) as usize;
            let n2 = 1 + rng.next_below(50) as usize;
            // Include ties on purpose: draw from a small integer grid.
            let a: Vec<f64> = (0..n1).map(|_| rng.next_below(12) as f64 * 0.5).collect();
            let b: Vec<f64> = (0..n2).map(|_| rng.next_below(12) as f64 * 0.5).collect();
            let fast = ks_two_sample(&a, &b).unwrap();
            let slow = ks_brute_force(&a, &b);
            assert_eq!(fast.statistic, slow, "a={a:?} b={b:?}");
            assert!(fast.statistic >= 0.0 && fast.statistic <= 1.0);
            assert!(fast.p_value >= 0.0 && fast.p_value <= 1.0);
        }
    }

    #[test]
    fn ks_invariant_under_monotone_transforms() {
        let mut rng = Rng::seeded(55);
        let a: Vec<f64> = (0..40).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..25).map(|_| rng.normal() * 1.4 + 0.3).collect();
        let base = ks_two_sample(&a, &b).unwrap();
        let ta: Vec<f64> = a.iter().map(|v| v.exp()).collect();
        let tb: Vec<f64> = b.iter().map(|v| v.exp()).collect();
        let transformed = ks_two_sample(&ta, &tb).unwrap();
        assert_eq!(base.statistic, transformed.statistic);
    }

    struct UniformModel;

    impl ChoiceModel for UniformModel {
        fn label(&self) -> String {
            "uniform".to_string()
        }

        fn probabilities(&self, view: &DatasetView<'_>, _row: usize) -> Result<Vec<f64>> {
            let nonempty: Vec<bool> = view.zones().iter().map(|z| z.has_jobs()).collect();
            let count = nonempty.iter().filter(|&&b| b).count();
            Ok(nonempty
                .iter()
                .map(|&b| if b { 1.0 / count as f64 } else { 0.0 })
                .collect())
        }
    }

    struct PerfectModel;

    impl ChoiceModel for PerfectModel {
        fn label(&self) -> String {
            "perfect".to_string()
        }

        fn probabilities(&self, view: &DatasetView<'_>, row: usize) -> Result<Vec<f64>> {
            let mut p = vec![0.0; view.n_zones()];
            p[view.individual(row).work_zone.unwrap()] = 1.0;
            Ok(p)
        }
    }

    fn four_zone_dataset(n: usize) -> Dataset {
        let zones: Vec<Zone> = (0..4)
            .map(|i| zone(i, i as f64 * 3.0, (i as f64) * 4.0, [1, 0, 0, 0, 0, 0, 0]))
            .collect();
        let individuals: Vec<Individual> = (0..n)
            .map(|i| {
                let mut p = person(i as u64, 0, i % 4, (i % 2) as u8, ((i / 2) % 2) as u8);
                p.weight = 1.0 + (i % 3) as f64;
                p
            })
            .collect();
        let acc = AccessibilityMatrix::new(n, 4, vec![0.0; 4 * n]).unwrap();
        build_dataset(zones, individuals, acc).unwrap()
    }

    #[test]
    fn average_ll_uniform_and_perfect() {
        let ds = four_zone_dataset(12);
        let view = ds.view_all();
        let uniform = average_loglikelihood(&UniformModel, &view).unwrap();
        assert!((uniform.weighted_mean - 0.25f64.ln()).abs() < TOL);
        assert!((uniform.per_obs_mean - 0.25f64.ln()).abs() < TOL);

        let perfect = average_loglikelihood(&PerfectModel, &view).unwrap();
        assert_eq!(perfect.weighted_mean, 0.0);
        assert_eq!(perfect.total_weighted, 0.0);
    }

    #[test]
    fn null_ll_counts_nonempty_zones_and_scales_with_weights() {
        let zones = vec![
            zone(0, 0.0, 0.0, [1, 0, 0, 0, 0, 0, 0]),
            zone(1, 1.0, 0.0, [0; 7]),
            zone(2, 2.0, 0.0, [2, 0, 0, 0, 0, 0, 0]),
            zone(3, 3.0, 0.0, [1, 1, 0, 0, 0, 0, 0]),
            zone(4, 4.0, 0.0, [5, 0, 0, 0, 0, 0, 0]),
        ];
        let inds = vec![person(1, 0, 0, 0, 0)];
        let acc = AccessibilityMatrix::new(1, 5, vec![0.0; 5]).unwrap();
        let ds = build_dataset(zones, inds, acc).unwrap();
        let view = ds.view_all();
        assert!((null_loglikelihood(&view) - 0.25f64.ln()).abs() < TOL);

        let mut doubled = ds.individuals().to_vec();
        for p in doubled.iter_mut() {
            p.weight *= 2.0;
        }
        let ds2 = build_dataset(ds.zones().to_vec(), doubled, ds.accessibility().clone()).unwrap();
        assert_eq!(null_loglikelihood(&ds2.view_all()), 2.0 * null_loglikelihood(&view));
    }

    #[test]
    fn uniform_average_ll_equals_null_over_total_weight() {
        let ds = four_zone_dataset(9);
        let view = ds.view_all();
        let avg = average_loglikelihood(&UniformModel, &view).unwrap();
        let null = null_loglikelihood(&view);
        assert!((avg.weighted_mean - null / view.total_weight()).abs() < 1e-12);
    }

    #[test]
    fn sampling_degenerate_and_uniform() {
        let ds = four_zone_dataset(4);
        let view = ds.view_all();
        let draws = sample_choices(&PerfectModel, &view, 50, 9).unwrap();
        for (row, row_draws) in draws.iter().enumerate() {
            let expected = view.individual(row).work_zone.unwrap();
            assert!(row_draws.iter().all(|&z| z == expected));
        }

        // Uniform over two zones: share of zone 0 in (0.48, 0.52) at 10k.
        let zones = vec![
            zone(0, 0.0, 0.0, [1, 0, 0, 0, 0, 0, 0]),
            zone(1, 1.0, 0.0, [1, 0, 0, 0, 0, 0, 0]),
        ];
        let inds = vec![person(1, 0, 0, 0, 0)];
        let acc = AccessibilityMatrix::new(1, 2, vec![0.0, 0.0]).unwrap();
        let ds = build_dataset(zones, inds, acc).unwrap();
        let view = ds.view_all();
        let draws = sample_choices(&UniformModel, &view, 10_000, 4).unwrap();
        let share = draws[0].iter().filter(|&&z| z == 0).count() as f64 / 10_000.0;
        assert!(share > 0.48 && share < 0.52, "share {share}");

        let again = sample_choices(&UniformModel, &view, 10_000, 4).unwrap();
        assert_eq!(draws, again);
    }

    #[test]
    fn distance_samples_and_segments() {
        // Individual at (0,0) choosing the zone at (3,4): distance 5.
        let zones = vec![
            zone(0, 0.0, 0.0, [1, 0, 0, 0, 0, 0, 0]),
            zone(1, 3.0, 4.0, [1, 0, 0, 0, 0, 0, 0]),
        ];
        let inds = vec![person(1, 0, 1, 1, 0), person(2, 0, 0, 0, 1)];
        let acc = AccessibilityMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        let ds = build_dataset(zones, inds, acc).unwrap();
        let view = ds.view_all();
        let sample = observed_distances(&view).unwrap();
        assert_eq!(sample.len(), 2);
        assert_eq!(sample.observations[0].km, 5.0);
        assert_eq!(sample.observations[1].km, 0.0);

        // Segment partition sizes sum to the total.
        let by_gender: usize = Segment::Gender
            .levels()
            .iter()
            .map(|(v, _)| sample.segment_values(Segment::Gender, *v).len())
            .sum();
        assert_eq!(by_gender, sample.len());

        // Identical samples per segment give D = 0 everywhere.
        let ks = segmented_ks(&sample, &sample, Segment::Gender).unwrap();
        for (_, r) in &ks {
            assert_eq!(r.statistic, 0.0);
        }

        // All draws at the home zone: distances all zero.
        let draws = vec![vec![0, 0, 0], vec![0]];
        let drawn = drawn_distances(&view, &draws).unwrap();
        assert_eq!(drawn.len(), 4);
        assert!(drawn.observations.iter().all(|o| o.km == 0.0));

        // An empty segment is an error naming the segment.
        let male_only = DistanceSample {
            observations: vec![DistanceObs {
                km: 1.0,
                gender: 0,
                has_car: 0,
            }],
        };
        let err = segmented_ks(&male_only, &sample, Segment::Gender).unwrap_err();
        assert!(err.to_string().contains("female"), "{err}");
    }

    #[test]
    fn attribute_correlations_track_construction() {
        // Choices proportional to total jobs: total correlation near 1.
        let mut rng = Rng::seeded(5);
        let zones: Vec<Zone> = (0..20)
            .map(|i| {
                let mut jobs = [0u64; 7];
                for slot in jobs.iter_mut() {
                    *slot = rng.next_below(40);
                }
                jobs[0] += 1;
                zone(i, i as f64, 0.0, jobs)
            })
            .collect();
        let totals: Vec<f64> = zones.iter().map(|z| z.total_jobs() as f64).collect();
        let total_sum: f64 = totals.iter().sum();
        let probs: Vec<f64> = totals.iter().map(|t| t / total_sum).collect();

        let n = 50_000;
        let mut proportional = vec![0u64; 20];
        let mut uniform = vec![0u64; 20];
        for _ in 0..n {
            proportional[rng.categorical(&probs).unwrap()] += 1;
            uniform[rng.next_below(20) as usize] += 1;
        }

        let table = attribute_choice_correlations(&zones, &proportional).unwrap();
        let (label, total_row) = table.last().unwrap();
        assert_eq!(label, "total");
        assert!(total_row.statistic > 0.95, "r {}", total_row.statistic);

        let table = attribute_choice_correlations(&zones, &uniform).unwrap();
        let (_, total_row) = table.last().unwrap();
        assert!(total_row.statistic.abs() < 0.1, "r {}", total_row.statistic);
        assert_eq!(table.len(), 8);
    }

    #[test]
    fn individual_correlations_reflect_travel_patterns() {
        // Car owners placed so they always travel farther.
        let zones = vec![
            zone(0, 0.0, 0.0, [1, 0, 0, 0, 0, 0, 0]),
            zone(1, 1.0, 0.0, [1, 0, 0, 0, 0, 0, 0]),
            zone(2, 10.0, 0.0, [1, 0, 0, 0, 0, 0, 0]),
        ];
        let n = 300;
        let mut rng = Rng::seeded(77);
        let individuals: Vec<Individual> = (0..n)
            .map(|i| {
                let has_car = (i % 2) as u8;
                let work = if has_car == 1 { 2 } else { 1 };
                let mut p = person(i as u64, 0, work, rng.next_below(2) as u8, has_car);
                p.income_class = 1 + rng.next_below(11) as u8;
                p.household_type = 1 + rng.next_below(6) as u8;
                p.has_kids = rng.next_below(2) as u8;
                p.employment = 1 + rng.next_below(4) as u8;
                p
            })
            .collect();
        let acc = AccessibilityMatrix::new(n, 3, vec![0.0; 3 * n]).unwrap();
        let ds = build_dataset(zones, individuals, acc).unwrap();
        let view = ds.view_all();
        let table = individual_attribute_correlations(&view).unwrap();
        let car = table.iter().find(|(name, _)| name == "has_car").unwrap();
        assert!(car.1.statistic > 0.9, "car r {}", car.1.statistic);
        // Gender was assigned independently of distance.
        let gender = table.iter().find(|(name, _)| name == "gender").unwrap();
        assert!(gender.1.statistic.abs() < 0.15, "gender r {}", gender.1.statistic);
    }

    #[test]
    fn independent_attribute_correlation_vanishes_at_scale() {
        // 10k individuals, attribute independent of commute distance.
        let zones = vec![
            zone(0, 0.0, 0.0, [1, 0, 0, 0, 0, 0, 0]),
            zone(1, 2.0, 0.0, [1, 0, 0, 0, 0, 0, 0]),
            zone(2, 5.0, 0.0, [1, 0, 0, 0, 0, 0, 0]),
        ];
        let n = 10_000;
        let mut rng = Rng::seeded(31);
        let individuals: Vec<Individual> = (0..n)
            .map(|i| {
                let mut p = person(
                    i as u64,
                    0,
                    rng.next_below(3) as usize,
                    rng.next_below(2) as u8,
                    rng.next_below(2) as u8,
                );
                p.household_type = 1 + rng.next_below(6) as u8;
                p.has_kids = rng.next_below(2) as u8;
                p.income_class = 1 + rng.next_below(11) as u8;
                p.employment = 1 + rng.next_below(4) as u8;
                p
            })
            .collect();
        let acc = AccessibilityMatrix::new(n, 3, vec![0.0; 3 * n]).unwrap();
        let ds = build_dataset(zones, individuals, acc).unwrap();
        let table = individual_attribute_correlations(&ds.view_all()).unwrap();
        let car = table.iter().find(|(name, _)| name == "has_car").unwrap();
        assert!(car.1.statistic.abs() < 0.05, "r {}", car.1.statistic);
    }

    #[test]
    fn report_layout_fixture_rows() {
        // Reference-shaped values exercising the result containers.
        let total = CorrelationResult {
            statistic: 0.675,
            p_value: 1.4e-183,
            n: 1375,
        };
        assert!(total.statistic.abs() <= 1.0);
        assert!(total.p_value >= 0.0 && total.p_value <= 1.0);
        let car_no = KsResult {
            statistic: 0.092,
            p_value: 2.59e-11,
            n1: 1551,
            n2: 1551,
        };
        assert!(car_no.statistic >= 0.0 && car_no.statistic <= 1.0);
    }
}
