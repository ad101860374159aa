use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Settings of the verifier's low-discrepancy sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifierSampling {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Radius of the sampled position offsets around the reference orbit, m.
    pub rel_r_max: f64,
    /// Radius of the sampled velocity offsets from the velocity of the
    /// neighbouring orbit through the sampled position, m/s.
    pub rel_v_max: f64,
}

fn default_samples() -> usize {
    4096
}

/// Halton sequence with a seeded Cranley-Patterson rotation.
#[derive(Debug, Clone)]
pub struct HaltonSampler {
    shift: Vec<f64>,
    index: u64,
}

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    out
}

impl HaltonSampler {
    pub fn new(dims: usize, seed: u64) -> Self {
        assert!(dims <= PRIMES.len(), "at most {} dimensions", PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dims).map(|_| rng.gen::<f64>()).collect();
        Self { shift, index: 1 }
    }

    pub fn dims(&self) -> usize {
        self.shift.len()
    }

    /// Point with the given index, each coordinate in `[0, 1)`.
    pub fn point(&self, index: u64) -> Vec<f64> {
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, p)| (radical_inverse(index, p) + s).fract())
            .collect()
    }
}

impl Iterator for HaltonSampler {
    type Item = Vec<f64>;
    fn next(&mut self) -> Option<Vec<f64>> {
        let p = self.point(self.index);
        self.index += 1;
        Some(p)
    }
}

/// Map uniform coordinates to a uniform point in the `dim`-ball of radius
/// `radius` (`dim` is 2 or 3; the result always has three components).
pub fn ball_point(u: &[f64], dim: usize, radius: f64) -> [f64; 3] {
    let tau = std::f64::consts::TAU;
    if dim == 2 {
        let r = radius * u[0].sqrt();
        let th = tau * u[1];
        [r * th.cos(), r * th.sin(), 0.0]
    } else {
        let r = radius * u[0].cbrt();
        let z = 2.0 * u[1] - 1.0;
        let s = (1.0 - z * z).max(0.0).sqrt();
        let th = tau * u[2];
        [r * s * th.cos(), r * s * th.sin(), r * z]
    }
}
