//! Deterministic pseudo-randomness for simulations.
//!
//! Everything downstream (item sets, rewards, posterior perturbations) must
//! replay bit-for-bit from a seed, on any platform, regardless of how many
//! threads the harness uses. We therefore avoid platform- or version-dependent
//! generators and keep a small fixed-constant SplitMix64 core: one 64-bit
//! state, one additive constant, one finalizer. Gaussians come from a plain
//! Box-Muller transform (two uniforms per draw, no cached spare), so the
//! stream position after any call is a simple function of the call sequence.
//!
//! Independent streams are derived, not split by convention: `stream(seed,
//! tag)` and `run_stream(seed, run, tag)` push the inputs through the same
//! finalizer so that distinct (seed, run, purpose) triples get uncorrelated
//! states. The harness gives context generation, reward sampling, and learner
//! noise their own tags, which keeps the environment trajectory identical
//! across algorithms that consume different amounts of learner noise.

/// Weyl-sequence increment; the classic SplitMix64 constant (golden ratio in
/// 64-bit fixed point).
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream tags used by the harness. Kept here so library tests and the
/// harness agree on the derivation.
pub const TAG_THETA_STAR: u64 = 1;
pub const TAG_FIXED_SETS: u64 = 2;
pub const TAG_CONTEXT: u64 = 3;
pub const TAG_REWARD: u64 = 4;
pub const TAG_LEARNER: u64 = 5;

/// SplitMix64: `state += GOLDEN_GAMMA`, then a two-round xor-multiply
/// finalizer. Passes BigCrush as a 64-bit generator and is trivially
/// portable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Derive an independent stream from `(seed, tag)`.
    pub fn stream(seed: u64, tag: u64) -> Self {
        let mut s = SplitMix64::new(seed);
        let a = s.next_u64();
        let mut t = SplitMix64::new(a ^ tag.wrapping_mul(GOLDEN_GAMMA));
        SplitMix64::new(t.next_u64())
    }

    /// Derive an independent stream from `(seed, run index, tag)`: the
    /// per-run streams of different purposes never overlap.
    pub fn run_stream(seed: u64, run: u64, tag: u64) -> Self {
        let mut base = SplitMix64::stream(seed, run);
        let inner = base.next_u64();
        SplitMix64::stream(inner, tag)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1), using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0, 1]; used where a logarithm must not see zero.
    fn next_f64_pos(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n) via the multiply-shift map. The bias is
    /// below 2^-53 for every n we use; in exchange the draw consumes exactly
    /// one `u64` regardless of n, which keeps streams aligned.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (((self.next_u64() as u128) * (n as u128)) >> 64) as usize
    }

    /// Standard normal via Box-Muller. Always consumes exactly two uniforms
    /// and discards the paired sine draw: slightly wasteful, but the stream
    /// position stays a pure function of the number of calls.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.next_f64_pos();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Vector of iid standard normals.
    pub fn gaussian_vec(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.gaussian()).collect()
    }
}
