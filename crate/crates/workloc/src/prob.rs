//! Numerically stable probability kernels shared by both model families.

use crate::error::{Error, Result};

/// `log(sum(exp(values)))` computed with a max shift so large utilities do
/// not overflow. Returns `-inf` when every entry is `-inf` (empty support).
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    // exp(-inf - max) is 0, so -inf entries drop out without a branch.
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Choice probability vector over the zone set.
///
/// Entries are in `[0, 1]` and sum to 1; alternatives with utility `-inf`
/// (zones without any jobs) carry probability exactly 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceProbabilities {
    probs: Vec<f64>,
}

impl ChoiceProbabilities {
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, zone: usize) -> f64 {
        self.probs[zone]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

/// Softmax over utilities, computed through [`log_sum_exp`].
///
/// `-inf` utilities map to probability exactly 0. Errors when no utility is
/// finite, since the distribution is then undefined.
pub fn softmax(utilities: &[f64]) -> Result<ChoiceProbabilities> {
    let lse = log_sum_exp(utilities);
    if lse == f64::NEG_INFINITY {
        return Err(Error::DegenerateUtilities);
    }
    let probs = utilities
        .iter()
        .map(|&v| {
            if v == f64::NEG_INFINITY {
                0.0
            } else {
                (v - lse).exp()
            }
        })
        .collect();
    Ok(ChoiceProbabilities { probs })
}

/// Log-probability of one alternative: `v[chosen] - log_sum_exp(v)`.
///
/// Staying in the log domain avoids underflow for very unlikely choices.
pub fn log_softmax_at(utilities: &[f64], chosen: usize) -> f64 {
    utilities[chosen] - log_sum_exp(utilities)
}
