use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::uncertainty::DisturbanceBounds;

/// How realized disturbances are drawn within their bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceMode {
    None,
    /// Uniform direction, magnitude uniform in `[0.9, 1]` of the bound.
    #[default]
    RandomBall,
    /// Full magnitude along a caller-supplied direction (the gradient of the
    /// most active barrier); radial outward when none is given.
    WorstCaseRadial,
    /// Full magnitude along a fixed direction.
    FixedDirection([f64; 3]),
}

/// Seeded source of flow and impulse disturbances.
#[derive(Debug, Clone)]
pub struct DisturbanceGenerator {
    mode: DisturbanceMode,
    bounds: DisturbanceBounds,
    dim: usize,
    rng: ChaCha8Rng,
}

impl DisturbanceGenerator {
    pub fn new(mode: DisturbanceMode, bounds: DisturbanceBounds, dim: usize, seed: u64) -> Self {
        Self {
            mode,
            bounds,
            dim,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn mode(&self) -> DisturbanceMode {
        self.mode
    }

    fn unit(&mut self) -> Vec3 {
        loop {
            let mut v = Vec3::zeros();
            for k in 0..self.dim {
                v[k] = self.rng.gen_range(-1.0..1.0);
            }
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                return v / n;
            }
        }
    }

    fn draw(&mut self, bound: f64, hint: Option<&Vec3>) -> Vec3 {
        if bound <= 0.0 {
            return Vec3::zeros();
        }
        match self.mode {
            DisturbanceMode::None => Vec3::zeros(),
            DisturbanceMode::RandomBall => {
                let m = self.rng.gen_range(0.9..=1.0) * bound;
                self.unit() * m
            }
            DisturbanceMode::WorstCaseRadial => match hint.and_then(|h| h.try_normalize(0.0)) {
                Some(d) => d * bound,
                None => Vec3::zeros(),
            },
            DisturbanceMode::FixedDirection(d) => {
                let d = Vec3::from(d);
                d.try_normalize(0.0).map_or(Vec3::zeros(), |u| u * bound)
            }
        }
    }

    /// Flow disturbance for the next integrator step.
    pub fn flow(&mut self, hint: Option<&Vec3>) -> Vec3 {
        let b = self.bounds.w_c;
        self.draw(b, hint)
    }

    /// Actuation error for an impulse or continuous thrust `u`.
    pub fn actuation(&mut self, u: &Vec3, hint: Option<&Vec3>) -> Vec3 {
        let b = self.bounds.w_g(u.norm());
        self.draw(b, hint)
    }
}
