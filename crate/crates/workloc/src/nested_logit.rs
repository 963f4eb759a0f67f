//! Nested-logit workplace location choice model.
//!
//! Systematic utility for individual `n`, home zone `i`, work zone `j`:
//!
//! ```text
//! v = (beta_a + beta_acr * has_car) * A[n, j]
//!     + lambda * log( sum_k exp(alpha_k / lambda + log(jobs[j, k])) )
//! ```
//!
//! The logsum runs over the 7 occupation types with a positive job count;
//! the recreation constant is pinned to 0 as the reference category. Choice
//! probabilities are the softmax of `v` over zones, and the weighted
//! log-likelihood is maximized by L-BFGS over the unconstrained vector
//! `(alpha_1..alpha_6, log lambda, beta_a, beta_acr)`, which keeps
//! `lambda > 0` without constrained optimization.

use serde::{Deserialize, Serialize};

use crate::domain::{DatasetView, Zone, OCCUPATION_COUNT};
use crate::error::{Error, Result};
use crate::optim::{self, LbfgsSettings};
use crate::prob::{log_sum_exp, softmax, ChoiceProbabilities};

/// Number of free parameters: 6 occupation constants, the logsum parameter,
/// and the two accessibility coefficients.
pub const NL_PARAM_COUNT: usize = 9;

/// Parameter names in estimation order.
pub const NL_PARAM_NAMES: [&str; NL_PARAM_COUNT] = [
    "alpha_restaurant",
    "alpha_shopping",
    "alpha_office",
    "alpha_education",
    "alpha_health",
    "alpha_business",
    "lambda",
    "beta_a",
    "beta_acr",
];

/// Free occupation constants (recreation is the fixed reference at 0).
pub const FREE_ALPHA_COUNT: usize = 6;

/// Nested-logit parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlParams {
    /// Occupation constants for restaurant..business; recreation is 0.
    pub alpha: [f64; FREE_ALPHA_COUNT],
    /// Structural logsum parameter, strictly positive.
    pub lambda: f64,
    /// Accessibility coefficient.
    pub beta_a: f64,
    /// Accessibility x has-car interaction.
    pub beta_acr: f64,
}

impl NlParams {
    pub fn new(alpha: [f64; FREE_ALPHA_COUNT], lambda: f64, beta_a: f64, beta_acr: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(NlParams {
            alpha,
            lambda,
            beta_a,
            beta_acr,
        })
    }

    /// Zero constants, unit logsum parameter, zero accessibility effects.
    pub fn zeros() -> Self {
        NlParams {
            alpha: [0.0; FREE_ALPHA_COUNT],
            lambda: 1.0,
            beta_a: 0.0,
            beta_acr: 0.0,
        }
    }

    /// Unconstrained estimation coordinates `(alpha.., log lambda, betas)`.
    pub fn to_theta(&self) -> [f64; NL_PARAM_COUNT] {
        let mut theta = [0.0; NL_PARAM_COUNT];
        theta[..FREE_ALPHA_COUNT].copy_from_slice(&self.alpha);
        theta[6] = self.lambda.ln();
        theta[7] = self.beta_a;
        theta[8] = self.beta_acr;
        theta
    }

    pub fn from_theta(theta: &[f64]) -> Self {
        let mut alpha = [0.0; FREE_ALPHA_COUNT];
        alpha.copy_from_slice(&theta[..FREE_ALPHA_COUNT]);
        NlParams {
            alpha,
            lambda: theta[6].exp(),
            beta_a: theta[7],
            beta_acr: theta[8],
        }
    }

    /// Constant for occupation index `k` (0-based); recreation (k = 6) is
    /// the reference and returns 0.
    pub fn alpha_for(&self, k: usize) -> f64 {
        if k < FREE_ALPHA_COUNT {
            self.alpha[k]
        } else {
            0.0
        }
    }
}

/// Expected maximum utility of the occupation nest in one zone:
/// `lambda * log(sum over k with jobs of exp(alpha_k / lambda + log jobs_k))`.
/// Returns `-inf` for zones without any jobs.
pub fn occupation_logsum(
    alpha: &[f64; FREE_ALPHA_COUNT],
    lambda: f64,
    job_counts: &[u64; OCCUPATION_COUNT],
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let mut terms = [f64::NEG_INFINITY; OCCUPATION_COUNT];
    for k in 0..OCCUPATION_COUNT {
        if job_counts[k] > 0 {
            let a = if k < FREE_ALPHA_COUNT { alpha[k] } else { 0.0 };
            terms[k] = a / lambda + (job_counts[k] as f64).ln();
        }
    }
    Ok(lambda * log_sum_exp(&terms))
}

/// Systematic utility of one zone for one individual.
pub fn nl_systematic_utility(
    params: &NlParams,
    accessibility_value: f64,
    has_car: u8,
    zone: &Zone,
) -> Result<f64> {
    let logsum = occupation_logsum(&params.alpha, params.lambda, &zone.jobs)?;
    let coef = params.beta_a + params.beta_acr * has_car as f64;
    Ok(coef * accessibility_value + logsum)
}

/// Per-zone quantities that do not depend on the individual: the logsum,
/// the within-nest occupation shares, and the logsum derivative with respect
/// to `log lambda`. Computed once per parameter vector.
struct ZoneTerms {
    logsum: Vec<f64>,
    occ_shares: Vec<[f64; OCCUPATION_COUNT]>,
    dlogsum_dloglambda: Vec<f64>,
}

impl ZoneTerms {
    fn compute(params: &NlParams, zones: &[Zone]) -> Self {
        let lambda = params.lambda;
        let mut logsum = Vec::with_capacity(zones.len());
        let mut occ_shares = Vec::with_capacity(zones.len());
        let mut dloglam = Vec::with_capacity(zones.len());
        for zone in zones {
            let mut terms = [f64::NEG_INFINITY; OCCUPATION_COUNT];
            for k in 0..OCCUPATION_COUNT {
                if zone.jobs[k] > 0 {
                    terms[k] = params.alpha_for(k) / lambda + (zone.jobs[k] as f64).ln();
                }
            }
            let lse = log_sum_exp(&terms);
            if lse == f64::NEG_INFINITY {
                logsum.push(f64::NEG_INFINITY);
                occ_shares.push([0.0; OCCUPATION_COUNT]);
                dloglam.push(0.0);
                continue;
            }
            let mut shares = [0.0; OCCUPATION_COUNT];
            let mut weighted_alpha = 0.0;
            for k in 0..OCCUPATION_COUNT {
                if terms[k] > f64::NEG_INFINITY {
                    shares[k] = (terms[k] - lse).exp();
                    weighted_alpha += shares[k] * params.alpha_for(k);
                }
            }
            let l = lambda * lse;
            logsum.push(l);
            occ_shares.push(shares);
            // d(lambda * ln S)/d(ln lambda) = L - sum_k share_k * alpha_k
            dloglam.push(l - weighted_alpha);
        }
        ZoneTerms {
            logsum,
            occ_shares,
            dlogsum_dloglambda: dloglam,
        }
    }
}

fn utilities_for_row(
    params: &NlParams,
    terms: &ZoneTerms,
    view: &DatasetView<'_>,
    row: usize,
) -> Vec<f64> {
    let ind = view.individual(row);
    let access = view.accessibility_row(row);
    let coef = params.beta_a + params.beta_acr * ind.has_car as f64;
    terms
        .logsum
        .iter()
        .zip(access)
        .map(|(&l, &a)| {
            if l == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                coef * a + l
            }
        })
        .collect()
}

/// Choice probabilities over all zones for one individual in the view.
pub fn nl_choice_probabilities(
    params: &NlParams,
    view: &DatasetView<'_>,
    row: usize,
) -> Result<ChoiceProbabilities> {
    let terms = ZoneTerms::compute(params, view.zones());
    let utilities = utilities_for_row(params, &terms, view, row);
    softmax(&utilities).map_err(|_| Error::EmptyChoiceSet)
}

/// Weighted log-likelihood `sum_n w_n * ln Pr(chosen_n)`. The value is the
/// quantity being maximized; the optimizer minimizes its negation.
pub fn nl_log_likelihood(params: &NlParams, view: &DatasetView<'_>) -> Result<f64> {
    let terms = ZoneTerms::compute(params, view.zones());
    let mut ll = 0.0;
    for row in 0..view.len() {
        let ind = view.individual(row);
        let chosen = ind.work_zone.ok_or(Error::MissingWorkZone {
            person_id: ind.person_id,
        })?;
        let utilities = utilities_for_row(params, &terms, view, row);
        if utilities[chosen] == f64::NEG_INFINITY {
            return Err(Error::ZeroProbabilityChoice {
                person_id: ind.person_id,
                zone_id: chosen,
            });
        }
        let lse = log_sum_exp(&utilities);
        if lse == f64::NEG_INFINITY {
            return Err(Error::EmptyChoiceSet);
        }
        ll += ind.weight * (utilities[chosen] - lse);
    }
    Ok(ll)
}

/// Analytic gradient of the weighted log-likelihood in the estimation
/// coordinates `(alpha_1..alpha_6, log lambda, beta_a, beta_acr)`.
pub fn nl_gradient(params: &NlParams, view: &DatasetView<'_>) -> Result<Vec<f64>> {
    Ok(nl_ll_and_gradient(params, view)?.1)
}

/// Log-likelihood and its gradient in one pass; the shared inner loop for
/// the estimator. Buffers are reused across individuals and the softmax is
/// a single exp sweep, since this runs a few thousand times per estimation.
pub fn nl_ll_and_gradient(params: &NlParams, view: &DatasetView<'_>) -> Result<(f64, Vec<f64>)> {
    let zones = view.zones();
    let n_zones = zones.len();
    let terms = ZoneTerms::compute(params, zones);
    let mut ll = 0.0;
    let mut grad = vec![0.0; NL_PARAM_COUNT];
    let mut utilities = vec![0.0f64; n_zones];
    let mut probs = vec![0.0f64; n_zones];

    for row in 0..view.len() {
        let ind = view.individual(row);
        let chosen = ind.work_zone.ok_or(Error::MissingWorkZone {
            person_id: ind.person_id,
        })?;
        let access = view.accessibility_row(row);
        let coef = params.beta_a + params.beta_acr * ind.has_car as f64;

        let mut max_u = f64::NEG_INFINITY;
        for j in 0..n_zones {
            let l = terms.logsum[j];
            let u = if l == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                coef * access[j] + l
            };
            utilities[j] = u;
            if u > max_u {
                max_u = u;
            }
        }
        if utilities[chosen] == f64::NEG_INFINITY {
            return Err(Error::ZeroProbabilityChoice {
                person_id: ind.person_id,
                zone_id: chosen,
            });
        }
        let mut sum = 0.0;
        for j in 0..n_zones {
            let e = (utilities[j] - max_u).exp();
            probs[j] = e;
            sum += e;
        }
        let w = ind.weight;
        let car = ind.has_car as f64;
        ll += w * (utilities[chosen] - max_u - sum.ln());

        // Expected derivative terms under the choice distribution.
        let inv_sum = 1.0 / sum;
        let mut exp_shares = [0.0; FREE_ALPHA_COUNT];
        let mut exp_dloglam = 0.0;
        let mut exp_access = 0.0;
        for j in 0..n_zones {
            let p = probs[j] * inv_sum;
            if p == 0.0 {
                continue;
            }
            let shares = &terms.occ_shares[j];
            for k in 0..FREE_ALPHA_COUNT {
                exp_shares[k] += p * shares[k];
            }
            exp_dloglam += p * terms.dlogsum_dloglambda[j];
            exp_access += p * access[j];
        }

        let chosen_shares = &terms.occ_shares[chosen];
        for k in 0..FREE_ALPHA_COUNT {
            grad[k] += w * (chosen_shares[k] - exp_shares[k]);
        }
        grad[6] += w * (terms.dlogsum_dloglambda[chosen] - exp_dloglam);
        let d_access = access[chosen] - exp_access;
        grad[7] += w * d_access;
        grad[8] += w * car * d_access;
    }
    Ok((ll, grad))
}

/// Settings for [`estimate_nl`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NlSettings {
    pub memory: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NlSettings {
    fn default() -> Self {
        NlSettings {
            memory: 10,
            tolerance: 1e-6,
            max_iterations: 500,
        }
    }
}

impl NlSettings {
    fn to_lbfgs(&self) -> LbfgsSettings {
        LbfgsSettings {
            memory: self.memory,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            ..LbfgsSettings::default()
        }
    }
}

/// Maximum-likelihood estimate with standard errors and t-statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimationResult {
    pub params: NlParams,
    /// Standard errors in reported scale (lambda via the delta method from
    /// log lambda); absent when the Hessian is not negative definite.
    pub std_errors: Option<Vec<f64>>,
    /// est / std per parameter.
    pub t_values: Option<Vec<f64>>,
    /// (lambda - 1) / std(lambda), the test against the simple-logit value.
    pub t_against_1: Option<f64>,
    /// Maximized weighted log-likelihood.
    pub ll_final: f64,
    /// Log-likelihood of the equal-probability model over zones with jobs.
    pub ll_null: f64,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl EstimationResult {
    /// Estimates in reporting order (lambda in its natural scale).
    pub fn estimates(&self) -> [f64; NL_PARAM_COUNT] {
        let mut est = [0.0; NL_PARAM_COUNT];
        est[..FREE_ALPHA_COUNT].copy_from_slice(&self.params.alpha);
        est[6] = self.params.lambda;
        est[7] = self.params.beta_a;
        est[8] = self.params.beta_acr;
        est
    }
}

/// Maximizes the weighted log-likelihood with L-BFGS.
///
/// Non-convergence within the iteration budget is not an error: the result
/// is returned with `converged = false`. A Hessian that is not negative
/// definite leaves `std_errors` absent.
pub fn estimate_nl(
    view: &DatasetView<'_>,
    init: Option<NlParams>,
    settings: &NlSettings,
) -> Result<EstimationResult> {
    let theta0 = init.unwrap_or_else(NlParams::zeros).to_theta();
    let outcome = optim::lbfgs_minimize(
        |theta| {
            let params = NlParams::from_theta(theta);
            let (ll, grad) = nl_ll_and_gradient(&params, view)?;
            Ok((-ll, grad.iter().map(|g| -g).collect()))
        },
        &theta0,
        &settings.to_lbfgs(),
    )?;

    let params = NlParams::from_theta(&outcome.x);
    let ll_final = -outcome.f;
    let ll_null = crate::metrics::null_loglikelihood(view);

    let (std_errors, t_values, t_against_1) = match nl_std_errors(&params, view) {
        Ok(se) => {
            let est_values = {
                let mut e = [0.0; NL_PARAM_COUNT];
                e[..FREE_ALPHA_COUNT].copy_from_slice(&params.alpha);
                e[6] = params.lambda;
                e[7] = params.beta_a;
                e[8] = params.beta_acr;
                e
            };
            let t: Vec<f64> = est_values.iter().zip(&se).map(|(e, s)| e / s).collect();
            let t1 = (params.lambda - 1.0) / se[6];
            (Some(se), Some(t), Some(t1))
        }
        Err(Error::HessianNotNegativeDefinite) => (None, None, None),
        Err(e) => return Err(e),
    };

    Ok(EstimationResult {
        params,
        std_errors,
        t_values,
        t_against_1,
        ll_final,
        ll_null,
        n_obs: view.len(),
        converged: outcome.converged,
        iterations: outcome.iterations,
    })
}

/// Standard errors from the observed information at `params`.
///
/// The Hessian of the log-likelihood is taken in the estimation coordinates
/// by central finite differences of the analytic gradient (relative step
/// 1e-5); the covariance is the inverse of its negation, and lambda's
/// standard error is mapped back from log scale by the delta method.
pub fn nl_std_errors(params: &NlParams, view: &DatasetView<'_>) -> Result<Vec<f64>> {
    let theta = params.to_theta();
    let hessian = optim::hessian_from_gradient(
        |t| {
            let p = NlParams::from_theta(t);
            nl_gradient(&p, view)
        },
        &theta,
        1e-5,
    )?;
    let neg_hessian: Vec<Vec<f64>> = hessian
        .iter()
        .map(|row| row.iter().map(|v| -v).collect())
        .collect();
    let cov = optim::invert_spd(&neg_hessian)?;
    let mut se: Vec<f64> = (0..NL_PARAM_COUNT).map(|i| cov[i][i].sqrt()).collect();
    // Delta method: se(lambda) = lambda * se(log lambda).
    se[6] *= params.lambda;
    Ok(se)
}
