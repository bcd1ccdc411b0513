use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamics::IonSpecies;
use crate::error::{Error, Result};
use crate::units::BOLTZMANN;

/// Generator for one trial: ChaCha8 keyed by `seed`, stream `stream`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialDistribution {
    /// Every trial starts from the configured `(z_init, v_init)`.
    Delta,
    /// Gaussian in v with σ_v = √(k_B T / m) and in z with σ_z = σ_v / ω_z,
    /// added to the configured start.
    Thermal { temperature: f64 },
}

impl Default for InitialDistribution {
    fn default() -> Self {
        InitialDistribution::Thermal { temperature: 0.5e-3 }
    }
}

impl InitialDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InitialDistribution::Thermal { temperature } if !(temperature >= 0.0) => Err(
                Error::InvalidInput(format!("temperature must be >= 0, got {temperature} K")),
            ),
            _ => Ok(()),
        }
    }

    /// Draws `(Δz, Δv)`.
    pub fn sample(&self, rng: &mut impl Rng, ion: &IonSpecies, omega_z: f64) -> (f64, f64) {
        match *self {
            InitialDistribution::Delta => (0.0, 0.0),
            InitialDistribution::Thermal { temperature } => {
                let sigma_v = (BOLTZMANN * temperature / ion.mass).sqrt();
                if sigma_v == 0.0 {
                    return (0.0, 0.0);
                }
                let sigma_z = sigma_v / omega_z;
                let v = Normal::new(0.0, sigma_v).expect("finite sigma").sample(rng);
                let z = Normal::new(0.0, sigma_z).expect("finite sigma").sample(rng);
                (z, v)
            }
        }
    }

    pub fn is_random(&self) -> bool {
        !matches!(self, InitialDistribution::Delta)
    }
}

/// Per-trial loss from background-gas collisions during the wait before
/// extraction, applied after the dynamical verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundLoss {
    /// Collisions per second.
    pub rate: f64,
    /// Wait time per trial in seconds.
    pub wait: f64,
}

impl Default for BackgroundLoss {
    fn default() -> Self {
        BackgroundLoss {
            rate: 1.0 / 60.0,
            wait: 1.0,
        }
    }
}

impl BackgroundLoss {
    pub fn probability(&self) -> f64 {
        (self.rate * self.wait).clamp(0.0, 1.0)
    }
}
