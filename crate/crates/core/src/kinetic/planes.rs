//! Integrals over affine lines in the plane and planes in space, and the
//! comparison of the plane transform's `L^2` norm with the Riesz form.

use super::hls::HlsKernel;
use super::ScalarField;
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Direction count and offset sampling for a transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneGrid {
    pub directions: usize,
    /// Offsets run over `[-half_range, half_range]` with spacing `step`.
    pub half_range: f64,
    pub step: f64,
}

impl PlaneGrid {
    /// Offsets at the lattice spacing, covering every hyperplane that meets
    /// the box.
    pub fn covering(g: &ScalarField, directions: usize) -> Self {
        let d = g.grid.d() as f64;
        PlaneGrid { directions, half_range: d.sqrt() * g.grid.half_width(), step: g.grid.spacing() }
    }

    fn offsets(&self) -> usize {
        2 * (self.half_range / self.step).ceil() as usize + 1
    }
}

/// Samples `T(omega_i, p_j)`, direction-major. Each direction is a unit
/// normal; the directions tile a half sphere (or half circle) with equal
/// weights, and `T(-omega, -p) = T(omega, p)` supplies the other half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneTransform {
    pub ambient_dim: usize,
    pub directions: Vec<[f64; 3]>,
    pub offset_start: f64,
    pub offset_step: f64,
    pub offsets: usize,
    pub values: Vec<f64>,
}

impl PlaneTransform {
    pub fn profile(&self, i: usize) -> &[f64] {
        &self.values[i * self.offsets..(i + 1) * self.offsets]
    }

    /// Measure of the full sphere (or circle) of directions.
    fn sphere_measure(&self) -> f64 {
        if self.ambient_dim == 3 {
            4.0 * PI
        } else {
            2.0 * PI
        }
    }

    /// `int |T|^2 dp domega` over all oriented hyperplanes.
    pub fn l2_norm_sq(&self) -> f64 {
        let w = self.sphere_measure() / self.directions.len() as f64;
        self.values.iter().map(|a| a * a).sum::<f64>() * self.offset_step * w
    }
}

/// Equal-area spiral directions on the upper half sphere.
pub fn fibonacci_hemisphere(count: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

fn half_circle(count: usize) -> Vec<[f64; 3]> {
    (0..count)
        .map(|i| {
            let th = PI * (i as f64 + 0.5) / count as f64;
            [th.cos(), th.sin(), 0.0]
        })
        .collect()
}

/// Relative amplitude below which samples count as outside the support.
const SUPPORT_REL: f64 = 1e-12;

fn transform(g: &ScalarField, grid: &PlaneGrid, directions: Vec<[f64; 3]>) -> Result<PlaneTransform> {
    if grid.directions == 0 || !(grid.step > 0.0) || !(grid.half_range > 0.0) {
        return Err(Error::InvalidParameter(format!("degenerate plane grid {grid:?}")));
    }
    let d = g.grid.d();
    let cutoff = SUPPORT_REL * g.values.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let mut reach: f64 = 0.0;
    let mut x = [0.0; 3];
    for (i, a) in g.values.iter().enumerate() {
        if a.abs() > cutoff {
            g.grid.point(i, &mut x[..d]);
            reach = reach.max(x[..d].iter().map(|c| c * c).sum::<f64>().sqrt());
        }
    }
    if reach > grid.half_range {
        return Err(Error::SupportExceeded(format!(
            "support reaches radius {reach}, offsets only cover {}",
            grid.half_range
        )));
    }
    let count = grid.offsets();
    let start = -grid.step * ((count - 1) / 2) as f64;
    let cell = g.grid.cell_volume() / grid.step;
    let support: Vec<([f64; 3], f64)> = g
        .values
        .iter()
        .enumerate()
        .filter(|(_, a)| a.abs() > cutoff)
        .map(|(i, a)| {
            let mut x = [0.0; 3];
            g.grid.point(i, &mut x[..d]);
            (x, *a * cell)
        })
        .collect();
    let values: Vec<Vec<f64>> = directions
        .par_iter()
        .map(|w| {
            let mut prof = vec![0.0; count];
            for (x, a) in &support {
                let p = x[0] * w[0] + x[1] * w[1] + x[2] * w[2];
                let r = (p - start) / grid.step;
                let j = r.floor() as usize;
                let frac = r - j as f64;
                prof[j] += a * (1.0 - frac);
                if j + 1 < count {
                    prof[j + 1] += a * frac;
                }
            }
            prof
        })
        .collect();
    Ok(PlaneTransform {
        ambient_dim: d,
        directions,
        offset_start: start,
        offset_step: grid.step,
        offsets: count,
        values: values.into_iter().flatten().collect(),
    })
}

/// Line integrals of a function on the plane.
pub fn xray(g: &ScalarField, grid: &PlaneGrid) -> Result<PlaneTransform> {
    if g.grid.d() != 2 {
        return Err(Error::InvalidGrid(format!("line transform needs a 2-d lattice, got d = {}", g.grid.d())));
    }
    transform(g, grid, half_circle(grid.directions))
}

/// Plane integrals of a function on space.
pub fn radon3(g: &ScalarField, grid: &PlaneGrid) -> Result<PlaneTransform> {
    if g.grid.d() != 3 {
        return Err(Error::InvalidGrid(format!("plane transform needs a 3-d lattice, got d = {}", g.grid.d())));
    }
    transform(g, grid, fibonacci_hemisphere(grid.directions))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DruryRow {
    pub name: String,
    pub transform_norm_sq: f64,
    pub hls: f64,
    pub ratio: f64,
}

/// Ratios `||T g||^2 / int int g g / |x - y|` over a corpus; a constant
/// ratio is the identity between the two. With these normalisations the
/// constant is `2 pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DruryReport {
    pub rows: Vec<DruryRow>,
    pub mean: f64,
    /// `(max - min) / mean` of the ratios.
    pub spread: f64,
}

pub fn drury_check(corpus: &[(String, ScalarField)], directions: usize) -> Result<DruryReport> {
    let first = corpus.first().ok_or_else(|| Error::InvalidParameter("empty corpus".into()))?;
    let kernel = HlsKernel::new(first.1.grid, 1.0)?;
    let mut rows = Vec::with_capacity(corpus.len());
    for (name, g) in corpus {
        let t = radon3(g, &PlaneGrid::covering(g, directions))?.l2_norm_sq();
        let hls = kernel.form(g)?;
        if !(hls > 0.0) {
            return Err(Error::InvalidParameter(format!("{name}: Riesz form {hls} is not positive")));
        }
        rows.push(DruryRow { name: name.clone(), transform_norm_sq: t, hls, ratio: t / hls });
    }
    let mean = rows.iter().map(|r| r.ratio).sum::<f64>() / rows.len() as f64;
    let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.ratio), b.max(r.ratio)));
    Ok(DruryReport { rows, mean, spread: (hi - lo) / mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridSpec;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_line_integrals() {
        let grid = GridSpec::new(2, 128, 6.0).unwrap();
        let g = ScalarField::from_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
        let t = xray(&g, &PlaneGrid::covering(&g, 16)).unwrap();
        for i in 0..16 {
            let prof = t.profile(i);
            for (j, a) in prof.iter().enumerate().step_by(5) {
                let p = t.offset_start + j as f64 * t.offset_step;
                assert!((a - PI.sqrt() * (-p * p).exp()).abs() < 5e-3, "dir {i} p {p}: {a}");
            }
        }
    }

    #[test]
    fn gaussian_plane_integrals_are_rotation_invariant() {
        let grid = GridSpec::new(3, 64, 6.0).unwrap();
        let g = ScalarField::from_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()).unwrap();
        let t = radon3(&g, &PlaneGrid::covering(&g, 64)).unwrap();
        let norms: Vec<f64> = (0..64).map(|i| t.profile(i).iter().map(|a| a * a).sum::<f64>()).collect();
        let mean = norms.iter().sum::<f64>() / 64.0;
        assert!(norms.iter().all(|n| (n / mean - 1.0).abs() < 1e-2));
        let mid = (t.offsets - 1) / 2;
        // linear binning smooths the profile by O(h^2)
        assert_relative_eq!(t.profile(10)[mid], PI, max_relative = 1e-2);
    }

    #[test]
    fn coverage_is_checked() {
        let grid = GridSpec::new(2, 64, 6.0).unwrap();
        let g = ScalarField::from_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1]) / 8.0).exp()).unwrap();
        let narrow = PlaneGrid { directions: 8, half_range: 2.0, step: 0.1 };
        assert!(matches!(xray(&g, &narrow), Err(Error::SupportExceeded(_))));
    }

    #[test]
    fn drury_ratio_matches_fourier_constant() {
        // ||T g||^2 = (1/pi) int |g^|^2 / |xi|^2 and the Coulomb form is
        // (1/(2 pi^2)) int |g^|^2 / |xi|^2, so the ratio is 2 pi
        let grid = GridSpec::new(3, 32, 6.0).unwrap();
        let g = ScalarField::from_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()).unwrap();
        let r = drury_check(&[("gauss".into(), g)], 128).unwrap();
        assert_relative_eq!(r.mean, 2.0 * PI, max_relative = 2e-2);
    }
}
