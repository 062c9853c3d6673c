//! Kinetic transport: macroscopic densities, space-time X-ray and plane
//! transforms, the Riesz-potential form and a fast diffusion flow.

mod diffusion;
mod hls;
mod planes;
mod transport;

pub use diffusion::{
    calibrate_c_star, ccl_check, fast_diffusion_step, CclReport, DiffusionState, Functional, StepOutcome,
    FAST_DIFFUSION_M,
};
pub use hls::{hls_form, HlsKernel};
pub use planes::{drury_check, radon3, xray, DruryReport, DruryRow, PlaneGrid, PlaneTransform};
pub use transport::{purenorm_ratio, rho, rho_star, space_time_from_fn, space_time_pairing, PhaseField};

use crate::error::{Error, Result};
use crate::spectral::GridSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Real samples on a spatial lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} samples for {} lattice points", values.len(), grid.len())));
        }
        if let Some(index) = values.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self> {
        let d = grid.d();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut x = [0.0; 3];
                grid.point(i, &mut x[..d]);
                f(&x[..d])
            })
            .collect();
        ScalarField::new(grid, values)
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `(int |g|^p)^{1/p}`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        (self.values.iter().map(|a| a.abs().powf(p)).sum::<f64>() * self.grid.cell_volume()).powf(1.0 / p)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
