//! Seeded test data: Gaussians, shifted and modulated Gaussians, and random
//! Gaussian mixtures.

use crate::error::Result;
use crate::spectral::{Field, GridSpec};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One Gaussian bump `amp * exp(-|x - c|^2 / (2 sigma^2) + i k.x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: Complex64,
    pub center: Vec<f64>,
    pub sigma: f64,
    pub modulation: Vec<f64>,
}

impl Bump {
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for a in 0..x.len() {
            r2 += (x[a] - self.center[a]).powi(2);
            phase += self.modulation[a] * x[a];
        }
        self.amplitude * Complex64::from_polar((-0.5 * r2 / (self.sigma * self.sigma)).exp(), phase)
    }
}

/// Sum of bumps, sampled on the spatial lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub name: String,
    pub bumps: Vec<Bump>,
}

impl Mixture {
    pub fn gaussian(d: usize, sigma: f64) -> Self {
        Mixture {
            name: format!("gaussian(sigma={sigma})"),
            bumps: vec![Bump {
                amplitude: Complex64::new(1.0, 0.0),
                center: vec![0.0; d],
                sigma,
                modulation: vec![0.0; d],
            }],
        }
    }

    pub fn sample(&self, grid: GridSpec) -> Result<Field> {
        Field::from_space_fn(grid, |x| self.bumps.iter().map(|b| b.eval(x)).sum())
    }
}

/// Random mixture of one to three bumps with centres within `spread`,
/// widths in `[0.7, 1.4]` and modulations up to `max_freq` per axis.
pub fn random_mixture(d: usize, seed: u64, spread: f64, max_freq: f64) -> Mixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(1..=3);
    let bumps = (0..count)
        .map(|_| Bump {
            amplitude: Complex64::from_polar(rng.random_range(0.4..1.0), rng.random_range(0.0..std::f64::consts::TAU)),
            center: (0..d).map(|_| rng.random_range(-spread..=spread)).collect(),
            sigma: rng.random_range(0.7..1.4),
            modulation: (0..d).map(|_| rng.random_range(-max_freq..=max_freq)).collect(),
        })
        .collect();
    Mixture { name: format!("mixture(seed={seed})"), bumps }
}

/// The standard corpus: a centred Gaussian, a shifted and modulated
/// Gaussian, and `random` seeded mixtures.
pub fn standard(d: usize, seed: u64, random: usize) -> Vec<Mixture> {
    let mut out = vec![Mixture::gaussian(d, 1.0)];
    let mut shifted = Mixture::gaussian(d, 0.8);
    shifted.name = "shifted-modulated".into();
    shifted.bumps[0].center[0] = 1.5;
    shifted.bumps[0].modulation[0] = 0.7;
    out.push(shifted);
    out.extend((0..random as u64).map(|k| random_mixture(d, seed.wrapping_add(k), 2.0, 1.0)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixtures_are_reproducible() {
        assert_eq!(random_mixture(2, 5, 2.0, 1.0), random_mixture(2, 5, 2.0, 1.0));
        assert_ne!(random_mixture(2, 5, 2.0, 1.0), random_mixture(2, 6, 2.0, 1.0));
        let c = standard(1, 3, 3);
        assert_eq!(c.len(), 5);
        assert!(c.iter().all(|m| m.bumps.iter().all(|b| b.center.len() == 1)));
    }

    #[test]
    fn gaussian_sample() {
        let grid = GridSpec::new(1, 64, 8.0).unwrap();
        let f = Mixture::gaussian(1, 1.0).sample(grid).unwrap();
        let mid = grid.n() / 2;
        assert!((f.values()[mid].re - 1.0).abs() < 1e-15);
    }
}
