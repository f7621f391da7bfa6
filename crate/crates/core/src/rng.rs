//! Portable pseudo-random streams.
//!
//! Load perturbations and experiment trials must be reproducible from a seed
//! in any language, so the generator is fixed here rather than delegated to a
//! crate whose algorithm may change between releases.
//!
//! * Generator: SplitMix64 (Steele, Lea, Flood 2014). State is one `u64`;
//!   each step adds `0x9E3779B97F4A7C15` and returns the finalizer
//!   `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
//!   z *= 0x94D049BB133111EB; z ^= z >> 31` of the new state.
//! * Streams: stream `i` under seed `s` starts from state
//!   `mix(s) ^ mix(i + 0x9E3779B97F4A7C15)` where `mix` is the finalizer
//!   above, so bus `i` always draws from the same stream regardless of how
//!   many other buses exist.
//! * Uniforms: `(next >> 11) * 2^-53`, in `[0, 1)`.
//! * Normals: one Box-Muller draw per pair of uniforms,
//!   `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent stream `stream` of the family identified by `seed`.
    pub fn stream(seed: u64, stream: u64) -> Self {
        Self {
            state: mix(seed) ^ mix(stream.wrapping_add(GOLDEN)),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform index in `0..n`; `n` must be positive.
    pub fn next_index(&mut self, n: usize) -> usize {
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }
}
