//! Macroscopic density of free transport and its adjoint, the space-time
//! X-ray transform.

use crate::error::{Error, Result};
use crate::spectral::{GridSpec, SpaceTimeField, TimeGrid};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Samples of `f(x, v)` on a product of a position and a velocity lattice,
/// position-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseField {
    pub x: GridSpec,
    pub v: GridSpec,
    pub values: Vec<f64>,
}

impl PhaseField {
    pub fn new(x: GridSpec, v: GridSpec, values: Vec<f64>) -> Result<Self> {
        if x.d() != v.d() || !(1..=2).contains(&x.d()) {
            return Err(Error::GridMismatch(format!(
                "phase space needs matching dimension 1 or 2, got {} and {}",
                x.d(),
                v.d()
            )));
        }
        if values.len() != x.len() * v.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for {} x {} lattice",
                values.len(),
                x.len(),
                v.len()
            )));
        }
        if let Some(index) = values.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(PhaseField { x, v, values })
    }

    pub fn from_fn(x: GridSpec, v: GridSpec, f: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> Result<Self> {
        let d = x.d();
        let values = (0..x.len() * v.len())
            .into_par_iter()
            .map(|i| {
                let (mut xp, mut vp) = ([0.0; 2], [0.0; 2]);
                x.point(i / v.len(), &mut xp[..d]);
                v.point(i % v.len(), &mut vp[..d]);
                f(&xp[..d], &vp[..d])
            })
            .collect();
        PhaseField::new(x, v, values)
    }

    fn cell(&self) -> f64 {
        self.x.cell_volume() * self.v.cell_volume()
    }

    /// `int f dx dv`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell()
    }

    /// `int |f|^p dx dv`.
    pub fn lp_power(&self, p: f64) -> f64 {
        self.values.iter().map(|a| a.abs().powf(p)).sum::<f64>() * self.cell()
    }

    /// `int f g dx dv` for fields on the same lattices.
    pub fn pairing(&self, other: &PhaseField) -> Result<f64> {
        if self.x != other.x || self.v != other.v {
            return Err(Error::GridMismatch("pairing of phase fields on different lattices".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.cell())
    }
}

/// Multilinear interpolation weights of the lattice points around `y`;
/// points off the lattice get no weight.
fn interp(grid: &GridSpec, y: &[f64], mut visit: impl FnMut(usize, f64)) {
    let d = grid.d();
    let h = grid.spacing();
    let n = grid.n();
    let mut base = [0usize; 2];
    let mut frac = [0.0; 2];
    for a in 0..d {
        let r = (y[a] + grid.half_width()) / h;
        if !(r >= 0.0) || r > (n - 1) as f64 {
            return;
        }
        let j = (r.floor() as usize).min(n - 2);
        base[a] = j;
        frac[a] = r - j as f64;
    }
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut flat = 0;
        for a in 0..d {
            let bit = (corner >> a) & 1;
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            flat = flat * n + base[a] + bit;
        }
        if w != 0.0 {
            visit(flat, w);
        }
    }
}

/// Relative amplitude below which samples count as outside the support.
const SUPPORT_REL: f64 = 1e-12;

/// Checks that free transport over the window keeps the support inside the
/// position lattice.
fn check_shear(f: &PhaseField, s_max: f64) -> Result<()> {
    let d = f.x.d();
    let cutoff = SUPPORT_REL * f.values.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let l = f.x.half_width();
    let (mut xp, mut vp) = ([0.0; 2], [0.0; 2]);
    for (i, a) in f.values.iter().enumerate() {
        if a.abs() <= cutoff {
            continue;
        }
        f.x.point(i / f.v.len(), &mut xp[..d]);
        f.v.point(i % f.v.len(), &mut vp[..d]);
        if (0..d).any(|k| xp[k].abs() + s_max * vp[k].abs() > l) {
            return Err(Error::SupportExceeded(format!(
                "transport to |s| = {s_max} carries ({:?}, {:?}) off the position lattice",
                &xp[..d],
                &vp[..d]
            )));
        }
    }
    Ok(())
}

/// `rho(f)(s, x) = int f(x - v s, v) dv`, with linear interpolation in `x`.
pub fn rho(f: &PhaseField, s: &TimeGrid) -> Result<SpaceTimeField> {
    check_shear(f, s.max_abs())?;
    let (x, v) = (f.x, f.v);
    let d = x.d();
    let vcell = v.cell_volume();
    let slices: Vec<Vec<Complex64>> = (0..s.count)
        .into_par_iter()
        .map(|k| {
            let sk = s.at(k);
            let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
            let (mut xp, mut vp, mut y) = ([0.0; 2], [0.0; 2], [0.0; 2]);
            for (ix, o) in out.iter_mut().enumerate() {
                x.point(ix, &mut xp[..d]);
                let mut acc = 0.0;
                for iv in 0..v.len() {
                    v.point(iv, &mut vp[..d]);
                    for a in 0..d {
                        y[a] = xp[a] - vp[a] * sk;
                    }
                    interp(&x, &y[..d], |j, w| acc += w * f.values[j * v.len() + iv]);
                }
                *o = Complex64::new(acc * vcell, 0.0);
            }
            out
        })
        .collect();
    SpaceTimeField::new(x, *s, slices.into_iter().flatten().collect())
}

/// `rho*(g)(x, v) = int g(s, x + v s) ds` on `g`'s position lattice and the
/// velocity lattice `v`; the `s` integral is the trapezoid rule.
pub fn rho_star(g: &SpaceTimeField, v: GridSpec) -> Result<PhaseField> {
    let x = *g.grid();
    let s = *g.times();
    if v.d() != x.d() {
        return Err(Error::GridMismatch("velocity lattice dimension differs from position".into()));
    }
    if s.count < 2 {
        return Err(Error::InvalidParameter("the s integral needs at least two samples".into()));
    }
    let d = x.d();
    let weights: Vec<f64> = (0..s.count)
        .map(|k| if k == 0 || k + 1 == s.count { 0.5 * s.step } else { s.step })
        .collect();
    let values = (0..x.len() * v.len())
        .into_par_iter()
        .map(|i| {
            let (mut xp, mut vp, mut y) = ([0.0; 2], [0.0; 2], [0.0; 2]);
            x.point(i / v.len(), &mut xp[..d]);
            v.point(i % v.len(), &mut vp[..d]);
            let mut acc = 0.0;
            for (k, w) in weights.iter().enumerate() {
                let sk = s.at(k);
                for a in 0..d {
                    y[a] = xp[a] + vp[a] * sk;
                }
                let slice = g.slice(k);
                interp(&x, &y[..d], |j, wj| acc += w * wj * slice[j].re);
            }
            acc
        })
        .collect();
    PhaseField::new(x, v, values)
}

/// `int rho(f) g ds dx` with the trapezoid rule in `s`, the pairing under
/// which [`rho_star`] is the adjoint of [`rho`].
pub fn space_time_pairing(a: &SpaceTimeField, b: &SpaceTimeField) -> Result<f64> {
    if a.grid() != b.grid() || a.times() != b.times() {
        return Err(Error::GridMismatch("pairing of space-time fields on different grids".into()));
    }
    let s = a.times();
    let cell = a.grid().cell_volume();
    let mut total = 0.0;
    for k in 0..s.count {
        let w = if k == 0 || k + 1 == s.count { 0.5 * s.step } else { s.step };
        let dot: f64 = a.slice(k).iter().zip(b.slice(k)).map(|(p, q)| p.re * q.re).sum();
        total += w * dot * cell;
    }
    Ok(total)
}

/// `||rho*(g)||_{L^{d+2}} / ||g||_{L^{(d+2)/2}}`, the ratio in the dual
/// pure-norm transport estimate.
pub fn purenorm_ratio(g: &SpaceTimeField, v: GridSpec) -> Result<f64> {
    let d = g.grid().d() as f64;
    let r = rho_star(g, v)?;
    let top = r.lp_power(d + 2.0).powf(1.0 / (d + 2.0));
    let pg = 0.5 * (d + 2.0);
    let s = g.times();
    let cell = g.grid().cell_volume();
    let mut bottom = 0.0;
    for k in 0..s.count {
        let w = if k == 0 || k + 1 == s.count { 0.5 * s.step } else { s.step };
        bottom += w * g.slice(k).iter().map(|z| z.norm().powf(pg)).sum::<f64>() * cell;
    }
    if bottom == 0.0 {
        return Err(Error::InvalidParameter("zero space-time datum".into()));
    }
    Ok(top / bottom.powf(1.0 / pg))
}

/// Real samples `g(s, x)` as a space-time field.
pub fn space_time_from_fn(x: GridSpec, s: TimeGrid, g: impl Fn(f64, &[f64]) -> f64 + Sync) -> Result<SpaceTimeField> {
    let d = x.d();
    let values = (0..s.count * x.len())
        .into_par_iter()
        .map(|i| {
            let mut xp = [0.0; 3];
            x.point(i % x.len(), &mut xp[..d]);
            Complex64::new(g(s.at(i / x.len()), &xp[..d]), 0.0)
        })
        .collect();
    SpaceTimeField::new(x, s, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn gaussian_phase(nx: usize, lx: f64) -> PhaseField {
        let x = GridSpec::new(1, nx, lx).unwrap();
        let v = GridSpec::new(1, 128, 6.0).unwrap();
        PhaseField::from_fn(x, v, |x, v| (-x[0] * x[0] - v[0] * v[0]).exp()).unwrap()
    }

    #[test]
    fn gaussian_density() {
        let f = gaussian_phase(512, 16.0);
        let s = TimeGrid { start: -1.0, step: 0.5, count: 5 };
        let r = rho(&f, &s).unwrap();
        let x = f.x;
        let mass0 = f.integral();
        for k in 0..s.count {
            let sk = s.at(k);
            let a = 1.0 + sk * sk;
            for j in (0..x.n()).step_by(37) {
                let xj = x.coord(j);
                let exact = (PI / a).sqrt() * (-xj * xj / a).exp();
                assert!((r.slice(k)[j].re - exact).abs() < 2e-3, "s={sk} x={xj}");
            }
            let mass: f64 = r.slice(k).iter().map(|z| z.re).sum::<f64>() * x.spacing();
            assert_relative_eq!(mass, mass0, max_relative = 1e-6);
        }
    }

    #[test]
    fn shear_leaving_grid_is_rejected() {
        let f = gaussian_phase(64, 4.0);
        assert!(matches!(rho(&f, &TimeGrid::single(3.0)), Err(Error::SupportExceeded(_))));
    }

    #[test]
    fn xray_of_separated_gaussian() {
        let x = GridSpec::new(1, 256, 8.0).unwrap();
        let s = TimeGrid { start: -6.0, step: 0.05, count: 241 };
        let g = space_time_from_fn(x, s, |s, x| (-s * s - x[0] * x[0]).exp()).unwrap();
        let v = GridSpec::new(1, 16, 1.0).unwrap();
        let r = rho_star(&g, v).unwrap();
        let zero_v = v.n() / 2;
        for j in (0..x.n()).step_by(17) {
            let xj = x.coord(j);
            let got = r.values[j * v.len() + zero_v];
            assert!((got - PI.sqrt() * (-xj * xj).exp()).abs() < 1e-6);
        }
        assert!(r.values.iter().all(|a| *a >= 0.0));
    }

    #[test]
    fn adjoint_pairing() {
        let f = gaussian_phase(128, 8.0);
        let s = TimeGrid { start: -1.0, step: 0.1, count: 21 };
        let x = f.x;
        let g = space_time_from_fn(x, s, |s, x| (-(x[0] - 0.3 * s).powi(2) - 0.5 * s * s).exp() * (1.0 + 0.2 * x[0])).unwrap();
        let lhs = space_time_pairing(&rho(&f, &s).unwrap(), &g).unwrap();
        let rhs = f.pairing(&rho_star(&g, f.v).unwrap()).unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-4);
    }

    #[test]
    fn adjoint_pairing_in_the_plane() {
        let x = GridSpec::new(2, 32, 6.0).unwrap();
        let v = GridSpec::new(2, 16, 2.0).unwrap();
        let f = PhaseField::from_fn(x, v, |x, v| (-(x[0] * x[0] + x[1] * x[1]) - (v[0] * v[0] + v[1] * v[1])).exp()).unwrap();
        let s = TimeGrid { start: -0.5, step: 0.25, count: 5 };
        let g = space_time_from_fn(x, s, |s, x| (-(x[0] * x[0] + (x[1] - s).powi(2))).exp()).unwrap();
        let lhs = space_time_pairing(&rho(&f, &s).unwrap(), &g).unwrap();
        let rhs = f.pairing(&rho_star(&g, v).unwrap()).unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-4);
    }

    #[test]
    fn purenorm_ratio_is_scale_free() {
        let x = GridSpec::new(1, 128, 8.0).unwrap();
        let s = TimeGrid { start: -4.0, step: 0.1, count: 81 };
        let v = GridSpec::new(1, 64, 4.0).unwrap();
        let g = space_time_from_fn(x, s, |s, x| 1.0 / (1.0 + s * s + x[0] * x[0])).unwrap();
        let g2 = space_time_from_fn(x, s, |s, x| 3.0 / (1.0 + s * s + x[0] * x[0])).unwrap();
        let a = purenorm_ratio(&g, v).unwrap();
        assert!(a.is_finite() && a > 0.0);
        assert_relative_eq!(a, purenorm_ratio(&g2, v).unwrap(), max_relative = 1e-12);
    }
}
