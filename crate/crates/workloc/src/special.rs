//! Special functions for p-values: log-gamma, the regularized incomplete
//! beta function (Student-t tails), and the asymptotic Kolmogorov
//! distribution.

/// ln Γ(z) for z > 0, Lanczos approximation.
pub fn ln_gamma(z: f64) -> f64 {
    debug_assert!(z > 0.0, "ln_gamma needs z > 0, got {z}");
    const COEFFS: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut series = 1.000000000190015;
    for (i, c) in COEFFS.iter().enumerate() {
        series += c / (z + i as f64 + 1.0);
    }
    let tmp = z + 5.5;
    (z + 0.5) * tmp.ln() - tmp + (2.5066282746310005 * series / z).ln()
}

/// Regularized incomplete beta function I_x(a, b), evaluated by Lentz's
/// continued fraction to 1e-14.
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) || a <= 0.0 || b <= 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    // Use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) where it converges faster.
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - inc_beta(1.0 - x, b, a);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_gamma(a) - ln_gamma(b) + ln_gamma(a + b);
    let front = ln_front.exp();

    const EPSILON: f64 = 1e-14;
    const TINY: f64 = 1e-30;
    let mut f = 1.0;
    let mut c = 1.0;
    let mut d = 0.0;
    let step = |numerator: f64, f: &mut f64, c: &mut f64, d: &mut f64| {
        *d = 1.0 + numerator * *d;
        if d.abs() < TINY {
            *d = TINY;
        }
        *d = 1.0 / *d;
        *c = 1.0 + numerator / *c;
        if c.abs() < TINY {
            *c = TINY;
        }
        let delta = *c * *d;
        *f *= delta;
        delta
    };
    for m in 0..200 {
        let m_f = m as f64;
        let odd = -(a + m_f) * (a + b + m_f) * x / ((a + 2.0 * m_f) * (a + 2.0 * m_f + 1.0));
        let delta = step(odd, &mut f, &mut c, &mut d);
        if (delta - 1.0).abs() < EPSILON {
            break;
        }
        let even =
            (m_f + 1.0) * (b - m_f - 1.0) * x / ((a + 2.0 * m_f + 1.0) * (a + 2.0 * m_f + 2.0));
        let delta = step(even, &mut f, &mut c, &mut d);
        if (delta - 1.0).abs() < EPSILON {
            break;
        }
    }
    front / (f * a)
}

/// Two-sided p-value for a Student-t statistic with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    inc_beta(df / (df + t * t), df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Asymptotic Kolmogorov survival function
/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`,
/// truncated when terms fall below 1e-12, clamped to [0, 1].
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut converged = false;
    for k in 1..=200 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 {
            converged = true;
            break;
        }
        sign = -sign;
    }
    if !converged {
        // Terms decay too slowly only when lambda is tiny, where the
        // survival probability is 1 for any practical purpose.
        return 1.0;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        // Gamma(5) = 24, Gamma(1) = Gamma(2) = 1, Gamma(0.5) = sqrt(pi).
        assert!((ln_gamma(5.0) - 24.0_f64.ln()).abs() < 1e-10);
        assert!(ln_gamma(1.0).abs() < 1e-10);
        assert!(ln_gamma(2.0).abs() < 1e-10);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-10);
    }

    #[test]
    fn inc_beta_closed_forms() {
        // I_x(1, b) = 1 - (1 - x)^b and I_x(a, 1) = x^a.
        for &(x, b) in &[(0.2f64, 3.0f64), (0.36, 0.5), (0.75, 2.0)] {
            let expected = 1.0 - (1.0 - x).powf(b);
            assert!((inc_beta(x, 1.0, b) - expected).abs() < 1e-13);
        }
        for &(x, a) in &[(0.3f64, 2.0f64), (0.9, 0.5)] {
            assert!((inc_beta(x, a, 1.0) - x.powf(a)).abs() < 1e-13);
        }
        // Symmetric case: I_{1/2}(a, a) = 1/2. The continued fraction runs
        // at 1e-14 step convergence; the value lands within ~1e-11.
        for &a in &[0.5, 1.0, 3.5, 10.0] {
            assert!((inc_beta(0.5, a, a) - 0.5).abs() < 1e-11);
        }
        assert_eq!(inc_beta(0.0, 2.0, 3.0), 0.0);
        assert_eq!(inc_beta(1.0, 2.0, 3.0), 1.0);
    }

    #[test]
    fn student_t_edge_cases() {
        // t = 0 gives p = 1; huge t gives p near 0; df = 1 is the Cauchy
        // whose two-sided p at t=1 is exactly 1/2.
        assert!((student_t_two_sided_p(0.0, 5.0) - 1.0).abs() < 1e-13);
        assert!(student_t_two_sided_p(50.0, 5.0) < 1e-6);
        assert!((student_t_two_sided_p(1.0, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_q_limits() {
        assert_eq!(kolmogorov_q(0.0), 1.0);
        assert!(kolmogorov_q(1e-3) > 0.999999 || kolmogorov_q(1e-3) == 1.0);
        assert!(kolmogorov_q(5.0) < 1e-10);
        // Monotone decreasing.
        let mut prev = 1.0;
        for i in 1..60 {
            let q = kolmogorov_q(i as f64 * 0.1);
            assert!(q <= prev + 1e-15);
            prev = q;
        }
        // Q(1) = 2(e^-2 - e^-8 + e^-18 - ...)
        let expected = 2.0 * ((-2.0f64).exp() - (-8.0f64).exp() + (-18.0f64).exp());
        assert!((kolmogorov_q(1.0) - expected).abs() < 1e-12);
    }
}
