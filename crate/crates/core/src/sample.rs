//! Reproducible generic-point sampling.
//!
//! Generic sample points (for transition-matrix extraction and identity
//! checks) come from a fixed-seed ChaCha stream inside a configurable box, so
//! every run of the artifact is bit-reproducible for a given seed.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A rectangular sampling box in ℂ.
#[derive(Debug, Clone, Copy)]
pub struct ComplexBox {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl ComplexBox {
    pub fn new(re: (f64, f64), im: (f64, f64)) -> Self {
        ComplexBox { re, im }
    }
}

/// Deterministic sampler; `stream` separates independent uses of one seed.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Sampler { rng }
    }

    pub fn complex_in(&mut self, b: &ComplexBox) -> C64 {
        C64::new(
            self.rng.random_range(b.re.0..b.re.1),
            self.rng.random_range(b.im.0..b.im.1),
        )
    }

    pub fn complex_vec(&mut self, b: &ComplexBox, len: usize) -> Vec<C64> {
        (0..len).map(|_| self.complex_in(b)).collect()
    }
}
