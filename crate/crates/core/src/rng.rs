//! Seeded random streams.
//!
//! The generator is xoshiro256** seeded through SplitMix64, so any language
//! can reproduce a stream from the description below:
//!
//! 1. State words `s[0..4]` are four successive SplitMix64 outputs starting
//!    from the 64-bit seed.
//! 2. `next_u64` is the reference xoshiro256** step.
//! 3. `uniform()` is `(next_u64() >> 11) * 2^-53`, in `[0, 1)`.
//! 4. Normals use Box–Muller on two uniforms: `u1 = 1 - uniform()`,
//!    `u2 = uniform()`, `r = sqrt(-2 ln u1)`; the pair `r cos(2π u2)`,
//!    `r sin(2π u2)` is returned in that order, one value per call.
//! 5. `below(n)` is `(next_u64() * n) >> 64` in 128-bit arithmetic.

use core::f64::consts::PI;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 step. Also used to derive independent sub-seeds.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a seed for a named stream so that, e.g., probe noise never
/// shares a stream with latent sampling.
pub fn derive_seed(seed: u64, domain: u64) -> u64 {
    let mut s = seed ^ domain.wrapping_mul(GOLDEN_GAMMA);
    splitmix64(&mut s)
}

/// Stream domains used across the crate.
pub mod domain {
    pub const INIT_GEN: u64 = 1;
    pub const INIT_DISC: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const EVAL_REAL: u64 = 4;
    pub const EVAL_LATENT: u64 = 5;
    pub const PROBES: u64 = 6;
}

#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng {
            s,
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Integer in `0..n` by multiply-shift.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * PI * u2;
        self.spare_normal = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }
}
