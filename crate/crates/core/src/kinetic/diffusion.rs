//! Explicit fast diffusion `u_t = Lap(u^m)` on a box with no-flux walls, and
//! the transport functional `c ||u||_{6/5}^2 - ||T u||^2` along the flow.

use super::hls::HlsKernel;
use super::ScalarField;
use crate::error::{Error, Result};
use crate::spectral::GridSpec;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Exponent `(d + 1) / (d + 3)` for velocity dimension `d = 2`.
pub const FAST_DIFFUSION_M: f64 = 0.6;
/// Lebesgue exponent `2 (d + 1) / (d + 3)` paired with the plane transform.
const P_NORM: f64 = 1.2;
/// Added to `u` wherever the degenerate factor `u^{m-1}` is evaluated.
pub const DEGENERATE_FLOOR: f64 = 1e-12;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionState {
    pub u: ScalarField,
    pub time: f64,
    /// Last accepted step.
    pub dt: f64,
    pub m: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub dt: f64,
    pub rejections: usize,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    grid: GridSpec,
    time: f64,
    dt: f64,
    m: f64,
    steps: usize,
    len: usize,
}

impl DiffusionState {
    pub fn new(u: ScalarField) -> Result<Self> {
        if u.grid.d() != 3 {
            return Err(Error::InvalidGrid(format!("fast diffusion runs on a 3-d lattice, got d = {}", u.grid.d())));
        }
        if u.min() < 0.0 {
            return Err(Error::InvalidParameter("fast diffusion needs nonnegative data".into()));
        }
        Ok(DiffusionState { u, time: 0.0, dt: 0.0, m: FAST_DIFFUSION_M, steps: 0 })
    }

    /// Largest step the stability bound `h^2 / (6 m max (u + floor)^{m-1})` allows.
    pub fn stable_step(&self) -> f64 {
        let h = self.u.grid.spacing();
        let umin = self.u.values.iter().copied().fold(f64::INFINITY, f64::min);
        // m < 1, so the factor peaks at the smallest value
        let factor = (umin + DEGENERATE_FLOOR).powf(self.m - 1.0);
        h * h / (6.0 * self.m * factor)
    }

    fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// Raw little-endian samples at `path` and metadata next to it as JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.u.values.iter().flat_map(|a| a.to_le_bytes()).collect();
        std::fs::write(path, bytes)?;
        let meta = Sidecar {
            grid: self.u.grid,
            time: self.time,
            dt: self.dt,
            m: self.m,
            steps: self.steps,
            len: self.u.values.len(),
        };
        let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(Self::sidecar_path(path), json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta: Sidecar = serde_json::from_str(&std::fs::read_to_string(Self::sidecar_path(path))?)
            .map_err(|e| Error::Parse(format!("checkpoint metadata: {e}")))?;
        let bytes = std::fs::read(path)?;
        if bytes.len() != 8 * meta.len {
            return Err(Error::Parse(format!("checkpoint holds {} bytes, expected {}", bytes.len(), 8 * meta.len)));
        }
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let u = ScalarField::new(meta.grid, values)?;
        Ok(DiffusionState { u, time: meta.time, dt: meta.dt, m: meta.m, steps: meta.steps })
    }
}

/// `dt / h^2 * sum over the six neighbours of (phi_nb - phi)`, with a missing
/// neighbour at a wall standing in for the point itself.
fn increment(grid: &GridSpec, phi: &[f64], out: &mut [f64]) {
    let n = grid.n();
    let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let i = idx(a, b, c);
                let p = phi[i];
                let mut s = 0.0;
                if a > 0 {
                    s += phi[idx(a - 1, b, c)] - p;
                }
                if a + 1 < n {
                    s += phi[idx(a + 1, b, c)] - p;
                }
                if b > 0 {
                    s += phi[idx(a, b - 1, c)] - p;
                }
                if b + 1 < n {
                    s += phi[idx(a, b + 1, c)] - p;
                }
                if c > 0 {
                    s += phi[idx(a, b, c - 1)] - p;
                }
                if c + 1 < n {
                    s += phi[idx(a, b, c + 1)] - p;
                }
                out[i] = s;
            }
        }
    }
}

/// One explicit conservative step at the stable step size, halved until the
/// update stays nonnegative.
///
/// The flux uses `(u + floor)^m - floor^m`, whose slope is bounded by the
/// floored degenerate factor; under the stable step the update is then
/// monotone and keeps `u >= 0` without rejections at the advancing front.
pub fn fast_diffusion_step(state: &mut DiffusionState) -> Result<StepOutcome> {
    let grid = state.u.grid;
    let h = grid.spacing();
    let base = DEGENERATE_FLOOR.powf(state.m);
    let phi: Vec<f64> = state
        .u
        .values
        .iter()
        .map(|a| base * (state.m * (a / DEGENERATE_FLOOR).ln_1p()).exp_m1())
        .collect();
    let mut lap = vec![0.0; phi.len()];
    increment(&grid, &phi, &mut lap);
    let mut dt = state.stable_step();
    for rejections in 0..=MAX_HALVINGS {
        let r = dt / (h * h);
        let next: Vec<f64> = state.u.values.iter().zip(&lap).map(|(u, l)| u + r * l).collect();
        if next.iter().all(|a| *a >= 0.0) {
            state.u.values = next;
            state.time += dt;
            state.dt = dt;
            state.steps += 1;
            return Ok(StepOutcome { dt, rejections });
        }
        dt *= 0.5;
    }
    Err(Error::Scheme(format!("no nonnegative step after {MAX_HALVINGS} halvings at t = {}", state.time)))
}

/// `c_star ||u||_{6/5}^2 - drury_c * int int u u / |x - y|`, the second term
/// standing in for `||T u||^2`.
pub struct Functional {
    pub c_star: f64,
    pub drury_c: f64,
    kernel: HlsKernel,
}

/// `drury_c * int int g g / |x - y| / ||g||_{6/5}^2` for
/// `g = (1 + |z|^2)^{-exponent}` sampled on `grid`.
pub fn calibrate_c_star(grid: GridSpec, exponent: f64, drury_c: f64) -> Result<f64> {
    let g = ScalarField::from_fn(grid, |z| (1.0 + z.iter().map(|c| c * c).sum::<f64>()).powf(-exponent))?;
    let kernel = HlsKernel::new(grid, 1.0)?;
    Ok(drury_c * kernel.form(&g)? / g.lp_norm(P_NORM).powi(2))
}

impl Functional {
    /// Calibrated so the functional vanishes at `(1 + |z|^2)^{-5/2}`, the
    /// profile that optimises the `L^{6/5}` Coulomb inequality.
    pub fn calibrated(grid: GridSpec, drury_c: f64) -> Result<Self> {
        let c_star = calibrate_c_star(grid, 2.5, drury_c)?;
        Ok(Functional { c_star, drury_c, kernel: HlsKernel::new(grid, 1.0)? })
    }

    pub fn eval(&self, u: &ScalarField) -> Result<f64> {
        Ok(self.c_star * u.lp_norm(P_NORM).powi(2) - self.drury_c * self.kernel.form(u)?)
    }
}

/// Functional values along a fast diffusion run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CclReport {
    pub grid: GridSpec,
    pub m: f64,
    pub c_star: f64,
    pub drury_c: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub rejections: usize,
    pub initial_mass: f64,
    pub final_mass: f64,
    /// `|final - initial| / initial`.
    pub mass_drift: f64,
    pub min_u: f64,
    /// Largest `F(t_{k+1}) - F(t_k)`.
    pub max_increase: f64,
    pub tolerance: f64,
    pub monotone: bool,
}

#[derive(Serialize)]
struct CclHeader<'a> {
    theorem: &'a str,
    grid: GridSpec,
    m: f64,
    c_star: f64,
    drury_c: f64,
    initial_mass: f64,
    final_mass: f64,
}

impl CclReport {
    /// Same layout as a `Q` trace: a JSON header line, then `t,Q,err_bound`
    /// with the functional in the `Q` column.
    pub fn to_csv(&self) -> String {
        let header = CclHeader {
            theorem: "fast_diffusion_functional",
            grid: self.grid,
            m: self.m,
            c_star: self.c_star,
            drury_c: self.drury_c,
            initial_mass: self.initial_mass,
            final_mass: self.final_mass,
        };
        let mut out = format!("# {}\nt,Q,err_bound\n", serde_json::to_string(&header).expect("header serialises"));
        for (t, f) in self.times.iter().zip(&self.values) {
            out.push_str(&format!("{t:.17e},{f:.17e},{:.17e}\n", self.tolerance));
        }
        out
    }
}

/// Relative slack, against `max |F|`, allowed in a single increment.
pub const F_TOL_REL: f64 = 1e-6;

pub fn ccl_check(g0: &ScalarField, steps: usize, functional: &Functional) -> Result<CclReport> {
    let mut state = DiffusionState::new(g0.clone())?;
    let initial_mass = g0.integral();
    let mut times = vec![0.0];
    let mut values = vec![functional.eval(g0)?];
    let mut rejections = 0;
    let mut min_u = g0.min();
    for _ in 0..steps {
        rejections += fast_diffusion_step(&mut state)?.rejections;
        min_u = min_u.min(state.u.min());
        times.push(state.time);
        values.push(functional.eval(&state.u)?);
    }
    let final_mass = state.u.integral();
    let max_increase = values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = F_TOL_REL * scale;
    Ok(CclReport {
        grid: g0.grid,
        m: state.m,
        c_star: functional.c_star,
        drury_c: functional.drury_c,
        times,
        values,
        rejections,
        initial_mass,
        final_mass,
        mass_drift: (final_mass - initial_mass).abs() / initial_mass,
        min_u,
        max_increase,
        tolerance,
        monotone: max_increase <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(grid: GridSpec, r: f64) -> ScalarField {
        ScalarField::from_fn(grid, |x| {
            let q = 1.0 - x.iter().map(|c| c * c).sum::<f64>() / (r * r);
            if q > 0.0 {
                q * q
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn step_conserves_mass_and_sign() {
        let grid = GridSpec::new(3, 16, 4.0).unwrap();
        let mut s = DiffusionState::new(bump(grid, 2.0)).unwrap();
        let m0 = s.u.integral();
        for _ in 0..5 {
            fast_diffusion_step(&mut s).unwrap();
        }
        assert!(s.u.min() >= 0.0);
        assert!(((s.u.integral() - m0) / m0).abs() < 1e-12);
        assert!(s.time > 0.0);
    }

    #[test]
    fn short_run_decreases_functional() {
        let grid = GridSpec::new(3, 16, 4.0).unwrap();
        let f = Functional::calibrated(grid, 2.0 * std::f64::consts::PI).unwrap();
        let r = ccl_check(&bump(grid, 2.0), 5, &f).unwrap();
        assert!(r.monotone && r.rejections == 0 && r.min_u >= 0.0 && r.mass_drift < 1e-10);
        let csv = r.to_csv();
        assert!(csv.starts_with("# {") && csv.lines().count() == 8);
    }

    #[test]
    fn checkpoint_round_trip() {
        let grid = GridSpec::new(3, 8, 2.0).unwrap();
        let mut s = DiffusionState::new(bump(grid, 1.5)).unwrap();
        fast_diffusion_step(&mut s).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.bin");
        s.save(&path).unwrap();
        assert_eq!(DiffusionState::load(&path).unwrap(), s);
    }

    #[test]
    fn functional_vanishes_at_calibration_profile_and_is_positive_elsewhere() {
        let grid = GridSpec::new(3, 32, 8.0).unwrap();
        let f = Functional::calibrated(grid, 2.0 * std::f64::consts::PI).unwrap();
        let star = ScalarField::from_fn(grid, |z| (1.0 + z.iter().map(|c| c * c).sum::<f64>()).powf(-2.5)).unwrap();
        assert!(f.eval(&star).unwrap().abs() < 1e-10 * f.c_star * star.lp_norm(P_NORM).powi(2));
        let gauss = ScalarField::from_fn(grid, |z| (-z.iter().map(|c| c * c).sum::<f64>()).exp()).unwrap();
        assert!(f.eval(&gauss).unwrap() > 0.0);
        let mut perturbed = star.clone();
        for (p, b) in perturbed.values.iter_mut().zip(&bump(grid, 1.0).values) {
            *p += 0.3 * b;
        }
        assert!(f.eval(&perturbed).unwrap() > 0.0);
        // the functional is invariant under u -> a u(b x)
        let wide = ScalarField::from_fn(grid, |z| 3.0 * (1.0 + 0.25 * z.iter().map(|c| c * c).sum::<f64>()).powf(-2.5)).unwrap();
        let r = f.eval(&wide).unwrap() / (f.c_star * wide.lp_norm(P_NORM).powi(2));
        assert!(r.abs() < 2e-2, "{r}");
    }
}
