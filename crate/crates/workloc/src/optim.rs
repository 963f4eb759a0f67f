//! Shared optimizers and numerical oracles: L-BFGS for maximum-likelihood
//! estimation, Adam for network training, and finite-difference helpers used
//! as independent gradient/curvature checks.

use crate::error::{Error, Result};

/// L-BFGS configuration. Defaults: memory 10, gradient max-norm tolerance
/// 1e-6, 500 iterations, Armijo backtracking with c = 1e-4 and shrink 0.5.
#[derive(Clone, Debug)]
pub struct LbfgsSettings {
    pub memory: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub armijo_c: f64,
    pub backtrack_shrink: f64,
    /// Consecutive iterations without measurable objective progress before
    /// the loop exits early. Near the floating-point noise floor of a large
    /// likelihood sum, curvature pairs degrade into noise and further
    /// iterations cannot help.
    pub stall_patience: usize,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        LbfgsSettings {
            memory: 10,
            tolerance: 1e-6,
            max_iterations: 500,
            armijo_c: 1e-4,
            backtrack_shrink: 0.5,
            stall_patience: 15,
        }
    }
}

/// Outcome of an L-BFGS run.
#[derive(Clone, Debug)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` with the standard two-loop-recursion L-BFGS and Armijo
/// backtracking line search. `objective` returns `(f(x), grad f(x))`.
///
/// Converged means the gradient max-norm fell below `settings.tolerance`;
/// otherwise the best iterate found within the iteration budget is returned
/// with `converged = false`.
pub fn lbfgs_minimize<F>(
    mut objective: F,
    x0: &[f64],
    settings: &LbfgsSettings,
) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut grad) = objective(&x)?;
    if !fx.is_finite() {
        return Err(Error::NonFiniteObjective);
    }

    // History of (s, y, rho) pairs, newest last.
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut iterations = 0;
    let mut best = (x.clone(), fx, grad.clone());
    let mut stalled_for = 0;

    for iter in 0..settings.max_iterations {
        iterations = iter;
        if max_abs(&grad) < settings.tolerance {
            return Ok(LbfgsOutcome {
                x,
                f: fx,
                converged: true,
                iterations: iter,
            });
        }
        if stalled_for >= settings.stall_patience {
            break;
        }

        // Two-loop recursion for the search direction -H * grad.
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let alpha = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= alpha * yi;
            }
            alphas.push(alpha);
        }
        if let Some((s, y, _)) = history.last() {
            let gamma = dot(s, y) / dot(y, y);
            for qi in q.iter_mut() {
                *qi *= gamma;
            }
        }
        for ((s, y, rho), alpha) in history.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (alpha - beta) * si;
            }
        }
        let direction: Vec<f64> = q.iter().map(|v| -v).collect();

        let mut slope = dot(&grad, &direction);
        let descent = if slope < 0.0 {
            direction
        } else {
            // Fall back to steepest descent when curvature info is stale.
            let d: Vec<f64> = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &d);
            d
        };

        // Armijo backtracking. Failed trials shrink by a safeguarded
        // quadratic fit (at most `backtrack_shrink`, at least 10x). A first
        // trial that passes is refined once toward the fitted 1-D minimizer,
        // which makes the search exact on quadratic objectives.
        let mut step = 1.0;
        let mut accepted = None;
        let mut first_trial = true;
        while step > 1e-20 {
            let candidate: Vec<f64> = x
                .iter()
                .zip(&descent)
                .map(|(xi, di)| xi + step * di)
                .collect();
            let (f_new, g_new) = objective(&candidate)?;
            let quad_min = {
                let denom = 2.0 * (f_new - fx - slope * step);
                if f_new.is_finite() && denom > 0.0 {
                    Some(-slope * step * step / denom)
                } else {
                    None
                }
            };
            if f_new.is_finite() && f_new <= fx + settings.armijo_c * step * slope {
                if first_trial {
                    if let Some(t_star) = quad_min {
                        let interior = t_star > 0.05 * step && t_star < 0.95 * step;
                        let extension = t_star > 1.05 * step && t_star < 20.0 * step;
                        if interior || extension {
                            let refined: Vec<f64> = x
                                .iter()
                                .zip(&descent)
                                .map(|(xi, di)| xi + t_star * di)
                                .collect();
                            let (f_ref, g_ref) = objective(&refined)?;
                            if f_ref.is_finite()
                                && f_ref < f_new
                                && f_ref <= fx + settings.armijo_c * t_star * slope
                            {
                                accepted = Some((refined, f_ref, g_ref));
                                break;
                            }
                        }
                    }
                }
                accepted = Some((candidate, f_new, g_new));
                break;
            }
            step = match quad_min {
                Some(t) => t.clamp(0.1 * step, settings.backtrack_shrink * step),
                None => settings.backtrack_shrink * step,
            };
            first_trial = false;
        }
        let (x_new, f_new, g_new) = accepted.ok_or(Error::LineSearchFailure { iteration: iter })?;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        // Armijo acceptance does not guarantee the curvature condition.
        // Pairs with non-positive s.y would break positive definiteness, and
        // keeping stale history after rejecting one stalls the iteration, so
        // the memory is cleared instead.
        if sy > 1e-12 * max_abs(&s) * max_abs(&y) {
            if history.len() == settings.memory {
                history.remove(0);
            }
            history.push((s, y, 1.0 / sy));
        } else {
            history.clear();
        }

        if f_new < best.1 - 1e-14 * (1.0 + best.1.abs()) {
            best = (x_new.clone(), f_new, g_new.clone());
            stalled_for = 0;
        } else {
            stalled_for += 1;
        }

        x = x_new;
        fx = f_new;
        grad = g_new;
        debug_assert_eq!(x.len(), n);
    }

    // Out of budget or stalled at the numerical floor: report the best
    // iterate seen rather than wherever the last noisy step landed.
    let (x, fx, grad) = best;
    let converged = max_abs(&grad) < settings.tolerance;
    Ok(LbfgsOutcome {
        x,
        f: fx,
        converged,
        iterations: iterations + 1,
    })
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub timestep: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        AdamState {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            timestep: 0,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
        }
    }

    /// Canonical bias-corrected Adam step applied in place.
    pub fn step(&mut self, params: &mut [f64], gradients: &[f64]) {
        assert_eq!(params.len(), self.first_moment.len(), "parameter shape");
        assert_eq!(gradients.len(), params.len(), "gradient shape");
        self.timestep += 1;
        let bc1 = 1.0 - self.beta1.powi(self.timestep as i32);
        let bc2 = 1.0 - self.beta2.powi(self.timestep as i32);
        for i in 0..params.len() {
            let g = gradients[i];
            self.first_moment[i] = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            self.second_moment[i] =
                self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first_moment[i] / bc1;
            let v_hat = self.second_moment[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Central-difference gradient oracle: `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_diff_gradient<F>(mut objective: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = objective(&probe)?;
        probe[i] = x[i] - h;
        let minus = objective(&probe)?;
        probe[i] = x[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        grad[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Hessian by central finite differences of a gradient function, with a
/// relative step `h_i = rel_h * max(1, |x_i|)`. The result is symmetrized.
pub fn hessian_from_gradient<F>(mut gradient: F, x: &[f64], rel_h: f64) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut hessian = vec![vec![0.0; n]; n];
    let mut probe = x.to_vec();
    for i in 0..n {
        let h = rel_h * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let g_plus = gradient(&probe)?;
        probe[i] = x[i] - h;
        let g_minus = gradient(&probe)?;
        probe[i] = x[i];
        for j in 0..n {
            hessian[i][j] = (g_plus[j] - g_minus[j]) / (2.0 * h);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (hessian[i][j] + hessian[j][i]);
            hessian[i][j] = avg;
            hessian[j][i] = avg;
        }
    }
    Ok(hessian)
}

/// Inverts a symmetric positive-definite matrix via Cholesky; errors when the
/// matrix is not positive definite.
pub fn invert_spd(matrix: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = matrix.len();
    // Cholesky factor L with matrix = L L^T.
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = matrix[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::HessianNotNegativeDefinite);
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    // Solve L L^T X = I column by column.
    let mut inverse = vec![vec![0.0; n]; n];
    for col in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                sum -= l[i][k] * y[k];
            }
            y[i] = sum / l[i][i];
        }
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in (i + 1)..n {
                sum -= l[k][i] * inverse[k][col];
            }
            inverse[i][col] = sum / l[i][i];
        }
    }
    Ok(inverse)
}
