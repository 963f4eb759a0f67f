//! Deterministic pseudo-random number generation for reproducible pipelines.
//!
//! Everything random in this crate flows through [`Rng`], a xoshiro256++
//! generator seeded through SplitMix64. Both algorithms are fixed 64-bit
//! integer recurrences, so identical seeds produce identical streams on every
//! platform, which is what makes the simulate/estimate/evaluate pipelines
//! byte-reproducible.

/// SplitMix64 stepper, used only to expand seeds into generator state.
#[derive(Clone, Debug)]
struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    fn next(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// xoshiro256++ generator.
#[derive(Clone, Debug)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    /// Seed the generator, expanding the 64-bit seed via SplitMix64.
    pub fn seeded(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        Rng {
            s: [sm.next(), sm.next(), sm.next(), sm.next()],
        }
    }

    /// Independent stream derived from `(seed, stream_id)`.
    ///
    /// Distinct ids give streams that never share state, so e.g. city and
    /// population generation can both be keyed off one user-facing seed.
    pub fn stream(seed: u64, stream_id: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        let base = sm.next();
        Rng::seeded(base ^ stream_id.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[0]
            .wrapping_add(self.s[3])
            .rotate_left(23)
            .wrapping_add(self.s[0]);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in the open interval `(0, 1)`; safe to pass to `ln`.
    fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased uniform integer in `[0, n)` via Lemire's method.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below requires n > 0");
        let mut x = self.next_u64();
        let mut m = (x as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                x = self.next_u64();
                m = (x as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Standard normal via Box-Muller (one draw per call, two uniforms).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn lognormal(&mut self, mu: f64, sigma: f64) -> f64 {
        (mu + sigma * self.normal()).exp()
    }

    /// Poisson draw. Knuth's product-of-uniforms method for small means;
    /// larger means are split in half recursively (Poisson sums are Poisson),
    /// which keeps exp(-mean) away from underflow.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        if mean > 60.0 {
            let half = mean / 2.0;
            return self.poisson(half) + self.poisson(half);
        }
        let limit = (-mean).exp();
        let mut k = 0u64;
        let mut product = 1.0;
        loop {
            product *= self.next_f64_open();
            if product <= limit {
                return k;
            }
            k += 1;
        }
    }

    /// Sample an index from a probability vector.
    ///
    /// Entries must be nonnegative; indices with probability 0 are never
    /// returned, even when cumulative rounding would land past the last
    /// positive entry. Returns `None` when all entries are 0.
    pub fn categorical(&mut self, probs: &[f64]) -> Option<usize> {
        let u = self.next_f64();
        let mut cumulative = 0.0;
        let mut last_positive = None;
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = Some(i);
                cumulative += p;
                if u < cumulative {
                    return Some(i);
                }
            }
        }
        last_positive
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Seeded permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}
