//! Grids, scaled discrete Fourier transforms, Fourier-multiplier propagators,
//! tensor products and the canonical initial data.
//!
//! Conventions: the spatial lattice is `x_j = -L + j h` with `h = 2L/n`, the
//! frequency lattice is `xi_k = (k - n/2) * pi/L`, and
//!
//! ```text
//! f^(xi) = int f(x) e^{-i x.xi} dx        (approximated by h^d * DFT)
//! f(x)   = (2 pi)^{-d} int f^(xi) e^{i x.xi} dxi
//! ```
//!
//! so that every constant quoted for the continuum problem holds literally on
//! the lattice. Both transforms are exact inverses of each other.

use crate::error::{Error, Result};
use crate::fft::{checkerboard, NdFft};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest number of lattice points a single field may hold.
pub const MAX_POINTS: u128 = 1 << 24;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    d: usize,
    n: usize,
    half_width: f64,
}

impl GridSpec {
    pub fn new(d: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!("dimension {d} not in 1..=3")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n = {n} must be a power of two >= 4")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!("half width {half_width} must be positive")));
        }
        let points = (n as u128).pow(d as u32);
        if points > MAX_POINTS {
            return Err(Error::BudgetExceeded { points, budget: MAX_POINTS });
        }
        Ok(GridSpec { d, n, half_width })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spatial spacing `h = 2L/n`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Frequency spacing `pi/L`.
    pub fn freq_spacing(&self) -> f64 {
        PI / self.half_width
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    pub fn freq_cell_volume(&self) -> f64 {
        self.freq_spacing().powi(self.d as i32)
    }

    pub fn coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    pub fn freq(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.freq_spacing()
    }

    /// Index of the zero frequency along one axis.
    pub fn zero_freq_index(&self) -> usize {
        self.n / 2
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.d).rev() {
            out[a] = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut idx = [0usize; 3];
        self.unravel(flat, &mut idx[..self.d]);
        for a in 0..self.d {
            out[a] = self.coord(idx[a]);
        }
    }

    pub fn freq_point(&self, flat: usize, out: &mut [f64]) {
        let mut idx = [0usize; 3];
        self.unravel(flat, &mut idx[..self.d]);
        for a in 0..self.d {
            out[a] = self.freq(idx[a]);
        }
    }

    /// Same `n` and `L` in a different dimension.
    pub fn with_dim(&self, d: usize) -> Result<Self> {
        GridSpec::new(d, self.n, self.half_width)
    }

    /// Flat index of the zero-frequency lattice point.
    pub fn zero_freq_flat(&self) -> usize {
        let z = self.zero_freq_index();
        (0..self.d).fold(0, |acc, _| acc * self.n + z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Space,
    Frequency,
}

/// Complex samples of a function on a grid, on one side of the transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    side: Side,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: GridSpec, side: Side, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} lattice points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Field { grid, side, values })
    }

    pub fn zeros(grid: GridSpec, side: Side) -> Self {
        Field { grid, side, values: vec![ZERO; grid.len()] }
    }

    /// Samples `f(x)` on the spatial lattice.
    pub fn from_space_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Complex64 + Sync) -> Result<Self> {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut x = [0.0; 3];
                grid.point(i, &mut x[..grid.d()]);
                f(&x[..grid.d()])
            })
            .collect();
        Field::new(grid, Side::Space, values)
    }

    /// Samples `g(xi)` on the frequency lattice.
    pub fn from_freq_fn(grid: GridSpec, g: impl Fn(&[f64]) -> Complex64 + Sync) -> Result<Self> {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut xi = [0.0; 3];
                grid.freq_point(i, &mut xi[..grid.d()]);
                g(&xi[..grid.d()])
            })
            .collect();
        Field::new(grid, Side::Frequency, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn scale(&self, factor: Complex64) -> Field {
        Field {
            grid: self.grid,
            side: self.side,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Squared L² norm with the measure of the field's side (`dx` or `dxi`).
    pub fn l2_norm_sq(&self) -> f64 {
        let cell = match self.side {
            Side::Space => self.grid.cell_volume(),
            Side::Frequency => self.grid.freq_cell_volume(),
        };
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell
    }

    /// Maximum modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn require(&self, side: Side) -> Result<()> {
        if self.side != side {
            return Err(Error::WrongSide {
                expected: match side {
                    Side::Space => "space",
                    Side::Frequency => "frequency",
                },
            });
        }
        Ok(())
    }

    /// Returns the frequency-side representation, transforming if needed.
    pub fn to_frequency(&self) -> Result<Field> {
        match self.side {
            Side::Frequency => Ok(self.clone()),
            Side::Space => forward_transform(self),
        }
    }

    pub fn to_space(&self) -> Result<Field> {
        match self.side {
            Side::Space => Ok(self.clone()),
            Side::Frequency => inverse_transform(self),
        }
    }
}

fn check_finite(values: &[Complex64]) -> Result<()> {
    match values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

pub fn forward_transform(f: &Field) -> Result<Field> {
    f.require(Side::Space)?;
    check_finite(&f.values)?;
    let g = f.grid;
    let mut data = f.values.clone();
    checkerboard(&mut data, g.n(), g.d());
    NdFft::new(g.n(), g.d()).process(&mut data, false);
    checkerboard(&mut data, g.n(), g.d());
    let scale = g.cell_volume();
    data.iter_mut().for_each(|v| *v *= scale);
    Ok(Field { grid: g, side: Side::Frequency, values: data })
}

pub fn inverse_transform(fhat: &Field) -> Result<Field> {
    fhat.require(Side::Frequency)?;
    check_finite(&fhat.values)?;
    let g = fhat.grid;
    let mut data = fhat.values.clone();
    inverse_in_place(&g, &NdFft::new(g.n(), g.d()), &mut data);
    Ok(Field { grid: g, side: Side::Space, values: data })
}

/// Frequency samples to spatial samples, in place.
pub(crate) fn inverse_in_place(g: &GridSpec, plan: &NdFft, data: &mut [Complex64]) {
    checkerboard(data, g.n(), g.d());
    plan.process(data, true);
    checkerboard(data, g.n(), g.d());
    let scale = (1.0 / (g.n() as f64 * g.spacing())).powi(g.d() as i32);
    data.iter_mut().for_each(|v| *v *= scale);
}

/// Spatial samples to frequency samples, in place.
pub(crate) fn forward_in_place(g: &GridSpec, plan: &NdFft, data: &mut [Complex64]) {
    checkerboard(data, g.n(), g.d());
    plan.process(data, false);
    checkerboard(data, g.n(), g.d());
    let scale = g.cell_volume();
    data.iter_mut().for_each(|v| *v *= scale);
}

pub(crate) fn plan_for(g: &GridSpec) -> NdFft {
    NdFft::new(g.n(), g.d())
}

/// `phi(r) = sqrt(1 + r^2)`, the Klein-Gordon dispersion relation.
pub fn kg_phi(r: f64) -> f64 {
    (1.0 + r * r).sqrt()
}

/// Named Fourier multipliers, all radial in `|xi|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Symbol {
    /// `e^{-t|xi|^2}`
    Heat { t: f64 },
    /// `e^{-is|xi|^2}`
    Schrodinger { s: f64 },
    /// `e^{-t|xi|}`
    Poisson { t: f64 },
    /// `e^{is|xi|}`
    HalfWave { s: f64 },
    /// `e^{-t phi(|xi|)}`
    KgDamping { t: f64 },
    /// `e^{is phi(|xi|)}`
    KgPropagator { s: f64 },
    /// `|xi|^alpha`; singular at the origin for negative alpha.
    FractionalPower { alpha: f64 },
    /// `phi(|xi|)^{1/2} = (1 + |xi|^2)^{1/4}`
    PhiHalf,
}

impl Symbol {
    /// Value at radius `r = |xi|`, or `None` where the symbol is singular.
    pub fn eval(&self, r: f64) -> Option<Complex64> {
        let v = match *self {
            Symbol::Heat { t } => Complex64::new((-t * r * r).exp(), 0.0),
            Symbol::Schrodinger { s } => Complex64::from_polar(1.0, -s * r * r),
            Symbol::Poisson { t } => Complex64::new((-t * r).exp(), 0.0),
            Symbol::HalfWave { s } => Complex64::from_polar(1.0, s * r),
            Symbol::KgDamping { t } => Complex64::new((-t * kg_phi(r)).exp(), 0.0),
            Symbol::KgPropagator { s } => Complex64::from_polar(1.0, s * kg_phi(r)),
            Symbol::FractionalPower { alpha } => {
                if alpha == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else if r == 0.0 {
                    if alpha > 0.0 {
                        ZERO
                    } else {
                        return None;
                    }
                } else {
                    Complex64::new(r.powf(alpha), 0.0)
                }
            }
            Symbol::PhiHalf => Complex64::new(kg_phi(r).sqrt(), 0.0),
        };
        Some(v)
    }
}

/// Pointwise product with a named symbol. `zero_override` supplies the value
/// used at the zero-frequency lattice point where the symbol is singular.
pub fn apply_multiplier(fhat: &Field, symbol: &Symbol, zero_override: Option<Complex64>) -> Result<Field> {
    fhat.require(Side::Frequency)?;
    let g = fhat.grid;
    let mut out = Vec::with_capacity(g.len());
    let mut xi = [0.0; 3];
    for (i, v) in fhat.values.iter().enumerate() {
        g.freq_point(i, &mut xi[..g.d()]);
        let r = norm(&xi[..g.d()]);
        let m = match symbol.eval(r) {
            Some(m) => m,
            None => match zero_override {
                Some(o) => o,
                None if *v == ZERO => ZERO,
                None => return Err(Error::SingularSymbol),
            },
        };
        out.push(v * m);
    }
    Ok(Field { grid: g, side: Side::Frequency, values: out })
}

/// Pointwise product with an arbitrary symbol `m(xi)`.
pub fn apply_multiplier_fn(fhat: &Field, m: impl Fn(&[f64]) -> Complex64 + Sync) -> Result<Field> {
    fhat.require(Side::Frequency)?;
    let g = fhat.grid;
    let values: Vec<Complex64> = fhat
        .values
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let mut xi = [0.0; 3];
            g.freq_point(i, &mut xi[..g.d()]);
            v * m(&xi[..g.d()])
        })
        .collect();
    Field::new(g, Side::Frequency, values)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dispersive propagator families `e^{is omega(D)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Propagator {
    /// `e^{-is|xi|^2}`
    Schrodinger,
    /// `e^{is|xi|}`
    HalfWave,
    /// `e^{is phi(|xi|)}`
    KleinGordon,
}

impl Propagator {
    /// Phase of the symbol at time `s` and radius `r`.
    pub fn phase(&self, s: f64, r: f64) -> f64 {
        match self {
            Propagator::Schrodinger => -s * r * r,
            Propagator::HalfWave => s * r,
            Propagator::KleinGordon => s * kg_phi(r),
        }
    }

    /// Spread `omega(r) - omega(0)` of the dispersion relation.
    pub fn spread(&self, r: f64) -> f64 {
        match self {
            Propagator::Schrodinger => r * r,
            Propagator::HalfWave => r,
            Propagator::KleinGordon => kg_phi(r) - 1.0,
        }
    }

    /// Group velocity bound for frequencies up to `r`.
    pub fn group_velocity(&self, r: f64) -> f64 {
        match self {
            Propagator::Schrodinger => 2.0 * r,
            Propagator::HalfWave => 1.0,
            Propagator::KleinGordon => r / kg_phi(r),
        }
    }

    pub fn symbol(&self, s: f64) -> Symbol {
        match self {
            Propagator::Schrodinger => Symbol::Schrodinger { s },
            Propagator::HalfWave => Symbol::HalfWave { s },
            Propagator::KleinGordon => Symbol::KgPropagator { s },
        }
    }
}

/// Uniform time samples `start + k * step`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl TimeGrid {
    /// Grid on `[-s_max, s_max]` with spacing at most `max_step`.
    pub fn symmetric(s_max: f64, max_step: f64) -> Result<Self> {
        if !(s_max > 0.0) || !(max_step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "symmetric time grid needs positive s_max and step, got {s_max}, {max_step}"
            )));
        }
        let half = (s_max / max_step).ceil() as usize;
        Ok(TimeGrid { start: -s_max, step: s_max / half as f64, count: 2 * half + 1 })
    }

    pub fn single(s: f64) -> Self {
        TimeGrid { start: s, step: 0.0, count: 1 }
    }

    pub fn at(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.at(self.count.saturating_sub(1))
    }

    pub fn max_abs(&self) -> f64 {
        self.start.abs().max(self.end().abs())
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.at(k)).collect()
    }
}

/// Solution samples `u(s, x)` on a time grid times a spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: GridSpec,
    times: TimeGrid,
    values: Vec<Complex64>,
}

impl SpaceTimeField {
    pub fn new(grid: GridSpec, times: TimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() * times.count {
            return Err(Error::InvalidGrid("space-time value count mismatch".into()));
        }
        check_finite(&values)?;
        Ok(SpaceTimeField { grid, times, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn slice(&self, k: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.values[k * len..(k + 1) * len]
    }

    /// Slice `k` as a space-side field.
    pub fn slice_field(&self, k: usize) -> Field {
        Field { grid: self.grid, side: Side::Space, values: self.slice(k).to_vec() }
    }

    /// Restriction to the time samples `range`.
    pub fn restrict(&self, range: std::ops::Range<usize>) -> Result<SpaceTimeField> {
        if range.end > self.times.count || range.is_empty() {
            return Err(Error::InvalidParameter("time restriction out of range".into()));
        }
        let len = self.grid.len();
        let times = TimeGrid {
            start: self.times.at(range.start),
            step: self.times.step,
            count: range.len(),
        };
        Ok(SpaceTimeField {
            grid: self.grid,
            times,
            values: self.values[range.start * len..range.end * len].to_vec(),
        })
    }
}

/// Largest `|xi|` on the lattice where `|f^| >= rel * max|f^|`.
pub fn effective_bandwidth(fhat: &Field, rel: f64) -> f64 {
    let g = fhat.grid;
    let cutoff = rel * fhat.max_abs();
    let mut xi = [0.0; 3];
    let mut best: f64 = 0.0;
    for (i, v) in fhat.values.iter().enumerate() {
        if v.norm() >= cutoff && cutoff > 0.0 {
            g.freq_point(i, &mut xi[..g.d()]);
            best = best.max(norm(&xi[..g.d()]));
        }
    }
    best
}

/// Relative amplitude defining the effective bandwidth used by the time-step
/// and dispersion-budget checks.
pub const BANDWIDTH_REL: f64 = 1e-6;

/// Validates a time grid against the Nyquist and dispersion-budget rules.
pub fn check_time_grid(fhat: &Field, family: Propagator, times: &TimeGrid) -> Result<()> {
    let band = effective_bandwidth(fhat, BANDWIDTH_REL);
    if times.count > 1 {
        let increment = times.step.abs() * family.spread(band);
        if increment > PI {
            return Err(Error::Nyquist { step: times.step, increment });
        }
    }
    let budget = fhat.grid.half_width();
    let reach = times.max_abs() * family.group_velocity(band);
    if reach > budget * (1.0 + 1e-12) {
        return Err(Error::DispersionBudget { s_max: times.max_abs(), budget: budget / family.group_velocity(band) });
    }
    Ok(())
}

/// Default time grid for a datum: the widest window allowed by the
/// dispersion budget, sampled at a quarter of the Nyquist step.
pub fn default_time_grid(fhat: &Field, family: Propagator) -> Result<TimeGrid> {
    let band = effective_bandwidth(fhat, BANDWIDTH_REL).max(fhat.grid.freq_spacing());
    let l = fhat.grid.half_width();
    let s_max = match family {
        Propagator::Schrodinger => l / family.group_velocity(band),
        // leave room for the spatial extent of the data itself
        _ => 0.5 * l / family.group_velocity(band).max(0.25),
    };
    let step = 0.5 * PI / family.spread(band).max(1e-12);
    TimeGrid::symmetric(s_max, step.min(s_max / 8.0))
}

/// Applies `visit` to every propagated slice `e^{is omega(D)} f`, in parallel
/// over `s`; results are returned in time order.
pub fn map_slices<T: Send>(
    fhat: &Field,
    family: Propagator,
    times: &TimeGrid,
    visit: impl Fn(usize, &[Complex64]) -> T + Sync,
) -> Result<Vec<T>> {
    fhat.require(Side::Frequency)?;
    check_finite(&fhat.values)?;
    check_time_grid(fhat, family, times)?;
    let g = fhat.grid;
    let plan = plan_for(&g);
    let radii: Vec<f64> = (0..g.len())
        .map(|i| {
            let mut xi = [0.0; 3];
            g.freq_point(i, &mut xi[..g.d()]);
            norm(&xi[..g.d()])
        })
        .collect();
    Ok((0..times.count)
        .into_par_iter()
        .map(|k| {
            let s = times.at(k);
            let mut buf: Vec<Complex64> = fhat
                .values
                .iter()
                .zip(&radii)
                .map(|(v, &r)| v * Complex64::from_polar(1.0, family.phase(s, r)))
                .collect();
            inverse_in_place(&g, &plan, &mut buf);
            visit(k, &buf)
        })
        .collect())
}

/// Propagates `f` over the time grid.
pub fn evolve(f: &Field, family: Propagator, times: &TimeGrid) -> Result<SpaceTimeField> {
    let fhat = f.to_frequency()?;
    let slices = map_slices(&fhat, family, times, |_, u| u.to_vec())?;
    let values = slices.into_iter().flatten().collect();
    SpaceTimeField::new(fhat.grid, *times, values)
}

/// Tensor product `f(x) g(y)` on the product grid.
pub fn tensor(f: &Field, g: &Field) -> Result<Field> {
    if f.side != g.side {
        return Err(Error::GridMismatch("tensor factors on different sides".into()));
    }
    if f.grid.n() != g.grid.n() || f.grid.half_width() != g.grid.half_width() {
        return Err(Error::GridMismatch("tensor factors need the same n and L".into()));
    }
    let grid = GridSpec::new(f.grid.d() + g.grid.d(), f.grid.n(), f.grid.half_width())?;
    let mut values = Vec::with_capacity(grid.len());
    for a in &f.values {
        for b in &g.values {
            values.push(a * b);
        }
    }
    Ok(Field { grid, side: f.side, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extremiser {
    /// `f(x) = e^{-|x|^2 / (2 sigma^2)}`
    Gaussian { sigma: f64 },
    /// `f^(xi) = e^{-|xi|} / |xi|`, zero at the origin.
    Wave,
    /// `f^_a(xi) = e^{-a phi(|xi|)} / phi(|xi|)`
    KgSequence { a: f64 },
}

/// Frequency-side samples of the canonical data.
pub fn make_extremiser(kind: Extremiser, grid: GridSpec) -> Result<Field> {
    match kind {
        Extremiser::Gaussian { sigma } => {
            if !(sigma > 0.0) {
                return Err(Error::InvalidParameter(format!("gaussian width {sigma}")));
            }
            let d = grid.d() as i32;
            let amp = (2.0 * PI * sigma * sigma).powf(d as f64 / 2.0);
            Field::from_freq_fn(grid, |xi| {
                let r2: f64 = xi.iter().map(|x| x * x).sum();
                Complex64::new(amp * (-0.5 * sigma * sigma * r2).exp(), 0.0)
            })
        }
        Extremiser::Wave => Field::from_freq_fn(grid, |xi| {
            let r = norm(xi);
            if r == 0.0 {
                ZERO
            } else {
                Complex64::new((-r).exp() / r, 0.0)
            }
        }),
        Extremiser::KgSequence { a } => {
            if !(a > 0.0) {
                return Err(Error::InvalidParameter(format!("kg sequence parameter a = {a} must be positive")));
            }
            Field::from_freq_fn(grid, |xi| {
                let p = kg_phi(norm(xi));
                Complex64::new((-a * p).exp() / p, 0.0)
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gaussian_1d(grid: GridSpec) -> Field {
        Field::from_space_fn(grid, |x| Complex64::new((-0.5 * x[0] * x[0]).exp(), 0.0)).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1, 6, 1.0).is_err());
        assert!(GridSpec::new(4, 8, 1.0).is_err());
        assert!(GridSpec::new(1, 8, 0.0).is_err());
        assert!(matches!(GridSpec::new(3, 512, 1.0), Err(Error::BudgetExceeded { .. })));
        let g = GridSpec::new(2, 8, 4.0).unwrap();
        assert_eq!(g.len(), 64);
        assert_relative_eq!(g.spacing(), 1.0);
        assert_relative_eq!(g.freq(4), 0.0);
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let grid = GridSpec::new(1, 256, 16.0).unwrap();
        let fhat = forward_transform(&gaussian_1d(grid)).unwrap();
        for k in 0..grid.n() {
            let xi = grid.freq(k);
            let exact = (2.0 * PI).sqrt() * (-0.5 * xi * xi).exp();
            assert!((fhat.values()[k] - exact).norm() < 1e-6, "k={k}");
        }
    }

    #[test]
    fn zero_and_nonfinite_input() {
        let grid = GridSpec::new(2, 16, 4.0).unwrap();
        let z = forward_transform(&Field::zeros(grid, Side::Space)).unwrap();
        assert!(z.values().iter().all(|v| *v == ZERO));
        let mut vals = vec![ZERO; grid.len()];
        vals[3] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(Field::new(grid, Side::Space, vals), Err(Error::NonFinite { index: 3 })));
        assert!(forward_transform(&z).is_err());
    }

    #[test]
    fn translation_becomes_modulation() {
        let grid = GridSpec::new(1, 256, 16.0).unwrap();
        let a = 1.5;
        let shifted =
            Field::from_space_fn(grid, |x| Complex64::new((-0.5 * (x[0] - a).powi(2)).exp(), 0.0)).unwrap();
        let fhat = forward_transform(&gaussian_1d(grid)).unwrap();
        let shat = forward_transform(&shifted).unwrap();
        for k in 0..grid.n() {
            let expect = fhat.values()[k] * Complex64::from_polar(1.0, -a * grid.freq(k));
            assert!((shat.values()[k] - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn heat_symbols() {
        let grid = GridSpec::new(1, 256, 16.0).unwrap();
        let fhat = forward_transform(&gaussian_1d(grid)).unwrap();
        let same = apply_multiplier(&fhat, &Symbol::Heat { t: 0.0 }, None).unwrap();
        assert_eq!(same, fhat);
        let half = apply_multiplier(&fhat, &Symbol::Heat { t: 0.5 }, None).unwrap();
        for k in 0..grid.n() {
            let xi = grid.freq(k);
            let exact = (2.0 * PI).sqrt() * (-xi * xi).exp();
            assert!((half.values()[k] - exact).norm() < 1e-6);
        }
        let twice = apply_multiplier(
            &apply_multiplier(&fhat, &Symbol::Heat { t: 0.3 }, None).unwrap(),
            &Symbol::Heat { t: 0.2 },
            None,
        )
        .unwrap();
        for (a, b) in twice.values().iter().zip(half.values()) {
            assert!((a - b).norm() <= 1e-15 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn unimodular_symbol_preserves_norm() {
        let grid = GridSpec::new(2, 32, 8.0).unwrap();
        let fhat = make_extremiser(Extremiser::Gaussian { sigma: 1.0 }, grid).unwrap();
        let evolved = apply_multiplier(&fhat, &Symbol::Schrodinger { s: 0.7 }, None).unwrap();
        assert_relative_eq!(evolved.l2_norm_sq(), fhat.l2_norm_sq(), max_relative = 1e-14);
    }

    #[test]
    fn singular_symbol_needs_override() {
        let grid = GridSpec::new(1, 16, 4.0).unwrap();
        let ones = Field::from_freq_fn(grid, |_| Complex64::new(1.0, 0.0)).unwrap();
        let sym = Symbol::FractionalPower { alpha: -0.5 };
        assert_eq!(apply_multiplier(&ones, &sym, None), Err(Error::SingularSymbol));
        let ok = apply_multiplier(&ones, &sym, Some(ZERO)).unwrap();
        assert_eq!(ok.values()[grid.zero_freq_index()], ZERO);
        let wave = make_extremiser(Extremiser::Wave, grid).unwrap();
        assert!(apply_multiplier(&wave, &sym, None).is_ok());
        // exponent zero is the constant symbol, including at the origin
        let id = apply_multiplier(&ones, &Symbol::FractionalPower { alpha: 0.0 }, None).unwrap();
        assert_eq!(id, ones);
    }

    #[test]
    fn gaussian_schrodinger_evolution() {
        let grid = GridSpec::new(1, 256, 32.0).unwrap();
        let f = gaussian_1d(grid);
        let times = TimeGrid { start: -1.0, step: 0.1, count: 21 };
        let u = evolve(&f, Propagator::Schrodinger, &times).unwrap();
        for k in 0..times.count {
            let s = times.at(k);
            let w = 1.0 + 4.0 * s * s;
            for (j, v) in u.slice(k).iter().enumerate() {
                let x = grid.coord(j);
                let exact = (-x * x / w).exp() / w.sqrt();
                assert!((v.norm_sqr() - exact).abs() < 1e-4);
            }
        }
        let zero = evolve(&f, Propagator::Schrodinger, &TimeGrid::single(0.0)).unwrap();
        for (a, b) in zero.slice(0).iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn half_wave_is_unitary() {
        let grid = GridSpec::new(2, 64, 16.0).unwrap();
        let f = Field::from_space_fn(grid, |x| {
            Complex64::new((-(x[0] - 1.0).powi(2) - 0.5 * x[1] * x[1]).exp(), 0.3 * x[0])
        })
        .unwrap();
        let norm0 = f.l2_norm_sq();
        let times = TimeGrid { start: -4.0, step: 0.25, count: 33 };
        let u = evolve(&f, Propagator::HalfWave, &times).unwrap();
        for k in 0..times.count {
            assert_relative_eq!(u.slice_field(k).l2_norm_sq(), norm0, max_relative = 1e-8);
        }
    }

    #[test]
    fn coarse_time_grid_rejected() {
        let grid = GridSpec::new(1, 256, 16.0).unwrap();
        let f = gaussian_1d(grid);
        let times = TimeGrid { start: -1.0, step: 0.5, count: 5 };
        assert!(matches!(evolve(&f, Propagator::Schrodinger, &times), Err(Error::Nyquist { .. })));
        let far = TimeGrid { start: -40.0, step: 0.01, count: 3 };
        assert!(matches!(
            evolve(&f, Propagator::Schrodinger, &far),
            Err(Error::DispersionBudget { .. })
        ));
    }

    #[test]
    fn tensor_products() {
        let g1 = GridSpec::new(1, 64, 8.0).unwrap();
        let f = gaussian_1d(g1);
        let ff = tensor(&f, &f).unwrap();
        let g2 = GridSpec::new(2, 64, 8.0).unwrap();
        let radial = Field::from_space_fn(g2, |x| Complex64::new((-0.5 * (x[0] * x[0] + x[1] * x[1])).exp(), 0.0))
            .unwrap();
        for (a, b) in ff.values().iter().zip(radial.values()) {
            assert!((a - b).norm() < 1e-14);
        }
        assert_relative_eq!(ff.l2_norm_sq(), f.l2_norm_sq().powi(2), max_relative = 1e-12);
        let zero = tensor(&Field::zeros(g1, Side::Space), &f).unwrap();
        assert!(zero.values().iter().all(|v| *v == ZERO));
        let other = GridSpec::new(1, 32, 8.0).unwrap();
        assert!(tensor(&f, &gaussian_1d(other)).is_err());
    }

    #[test]
    fn extremiser_profiles() {
        let grid = GridSpec::new(2, 32, 8.0).unwrap();
        let g = make_extremiser(Extremiser::Gaussian { sigma: 1.0 }, grid).unwrap();
        let mut xi = [0.0; 2];
        for (i, v) in g.values().iter().enumerate() {
            grid.freq_point(i, &mut xi);
            let r2 = xi[0] * xi[0] + xi[1] * xi[1];
            assert_relative_eq!(v.re, 2.0 * PI * (-0.5 * r2).exp(), max_relative = 1e-14);
        }
        let w = make_extremiser(Extremiser::Wave, grid).unwrap();
        assert_eq!(w.values()[grid.zero_freq_flat()], ZERO);
        let kg = make_extremiser(Extremiser::KgSequence { a: 2.0 }, grid).unwrap();
        assert_relative_eq!(kg.values()[grid.zero_freq_flat()].re, (-2.0f64).exp());
        assert!(make_extremiser(Extremiser::KgSequence { a: 0.0 }, grid).is_err());
    }

    #[test]
    fn gaussian_transform_matches_space_samples() {
        let grid = GridSpec::new(2, 64, 10.0).unwrap();
        let fhat = make_extremiser(Extremiser::Gaussian { sigma: 1.2 }, grid).unwrap();
        let f = inverse_transform(&fhat).unwrap();
        let mut x = [0.0; 2];
        for (i, v) in f.values().iter().enumerate() {
            grid.point(i, &mut x);
            let exact = (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * 1.44)).exp();
            assert!((v.re - exact).abs() < 1e-10 && v.im.abs() < 1e-10);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn round_trip_and_plancherel(
                vals in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64),
                half_width in 1.0f64..20.0,
            ) {
                let grid = GridSpec::new(2, 8, half_width).unwrap();
                let values: Vec<Complex64> = vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
                let f = Field::new(grid, Side::Space, values).unwrap();
                let fhat = forward_transform(&f).unwrap();
                let back = inverse_transform(&fhat).unwrap();
                let scale = f.max_abs().max(1e-300);
                for (a, b) in back.values().iter().zip(f.values()) {
                    prop_assert!((a - b).norm() <= 1e-10 * scale);
                }
                let lhs = f.l2_norm_sq();
                let rhs = fhat.l2_norm_sq() / (2.0 * PI).powi(2);
                prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1e-300));
            }
        }
    }
}
