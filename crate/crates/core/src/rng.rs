//! Deterministic pseudo-random numbers.
//!
//! Every random decision in the crate (splits, bootstraps, subsamples,
//! synthetic data) is driven by a SplitMix64 sequence, so golden outputs can
//! be reproduced by any implementation of the same 64-bit mixing function.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Tags for deriving independent per-component seeds from the global seed.
pub mod tag {
    pub const SPLIT: u64 = 0x0053_504c_4954;
    pub const CROSS_VALIDATION: u64 = 0x0043_464f_4c44;
    pub const SYNTHETIC: u64 = 0x0053_594e_5448;
}

/// The SplitMix64 output finalizer.
#[inline]
pub fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a component tag or index.
#[inline]
pub fn mix(seed: u64, tag: u64) -> u64 {
    finalize(seed ^ finalize(tag.wrapping_add(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        finalize(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, bound). Unbiased (multiply-shift with rejection).
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "bound must be positive");
        let bound = bound as u64;
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = (self.next_u64() as u128) * (bound as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Standard normal deviate via Box-Muller (one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Draw `k` distinct indices from `0..n` (partial Fisher-Yates), in draw order.
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
