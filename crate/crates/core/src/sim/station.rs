use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cbf::ball_point;
use crate::dynamics::{PlantState, Vec3};
use crate::observer::{EstimateState, Measurement};
use crate::timing::TimingConfig;
use crate::uncertainty::UncertaintyBound;

/// Simulated measurement source. Reports the truth corrupted by noise
/// uniform in a ball of radius `noise_fraction * rho_bar`, and schedules the
/// next measurement.
#[derive(Debug, Clone)]
pub struct GroundStation {
    rho_bar: UncertaintyBound,
    noise_fraction: f64,
    pin_interval: bool,
    dim: usize,
    rng: ChaCha8Rng,
}

impl GroundStation {
    pub fn new(
        rho_bar: UncertaintyBound,
        noise_fraction: f64,
        pin_interval: bool,
        dim: usize,
        seed: u64,
    ) -> Self {
        Self {
            rho_bar,
            noise_fraction,
            pin_interval,
            dim,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn noise(&mut self, radius: f64) -> Vec3 {
        let u: [f64; 3] = [self.rng.gen(), self.rng.gen(), self.rng.gen()];
        Vec3::from(ball_point(&u, self.dim, radius))
    }

    /// Next measurement of `truth`. While the estimate covers the truth, the
    /// noise and the reported radii are shrunk just enough for the
    /// measurement balls to fit inside the estimate balls.
    pub fn measure(
        &mut self,
        truth: &PlantState,
        est: &EstimateState,
        timing: &TimingConfig,
    ) -> Measurement {
        let nr = self.noise(self.noise_fraction * self.rho_bar.rho_r);
        let nv = self.noise(self.noise_fraction * self.rho_bar.rho_v);
        let (r, rho_r) = fit(
            &truth.r,
            &est.x_hat.r,
            est.rho_hat.rho_r,
            nr,
            self.rho_bar.rho_r,
        );
        let (v, rho_v) = fit(
            &truth.v,
            &est.x_hat.v,
            est.rho_hat.rho_v,
            nv,
            self.rho_bar.rho_v,
        );
        let x_bar = PlantState::new(r, v);
        let rho_bar = UncertaintyBound::new(rho_r, rho_v);
        let sigma_m_next = if self.pin_interval || timing.t_l >= timing.t_mx {
            timing.t_mx
        } else {
            self.rng.gen_range(timing.t_l..=timing.t_mx)
        };
        Measurement {
            x_bar,
            rho_bar,
            sigma_m_next,
        }
    }
}

/// Measured value and reported radius for one component. Keeps the nominal
/// values when they already pass containment, otherwise scales the noise so
/// that `|x_bar - x_hat| + |x_bar - truth| < rho_hat` and reports the room left.
fn fit(truth: &Vec3, x_hat: &Vec3, rho_hat: f64, noise: Vec3, rho: f64) -> (Vec3, f64) {
    let x_bar = truth + noise;
    if !rho_hat.is_finite() {
        return (x_bar, rho);
    }
    let room = shave(rho_hat - (x_bar - x_hat).norm(), rho_hat);
    if room >= rho {
        return (x_bar, rho);
    }
    if room >= noise.norm() {
        return (x_bar, room);
    }
    let slack = rho_hat - (truth - x_hat).norm();
    if !(slack >= 0.0) {
        return (x_bar, rho);
    }
    let n = noise.norm();
    let s = if n > 0.0 {
        (0.45 * slack / n).min(1.0)
    } else {
        0.0
    };
    let x_bar = truth + noise * s;
    (
        x_bar,
        shave(rho_hat - (x_bar - x_hat).norm(), rho_hat).min(rho),
    )
}

/// Room reduced by a few ulps of `scale` so the containment sum never rounds
/// above the estimate radius.
fn shave(room: f64, scale: f64) -> f64 {
    room - 4.0 * f64::EPSILON * scale.abs()
}
