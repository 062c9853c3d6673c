//! Fourier extension from a compact convex graph over a planar domain, the
//! density of the self-convolution of its surface measure, and the damped
//! extension quantity `Q(t)`.

use crate::error::{Error, Result};
use crate::flows::{self, Point, QTrace, TraceSpec};
use crate::norms;
use crate::spectral::{self, Field, GridSpec, Side, SpaceTimeField, TimeGrid};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Compact parameter domain in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Disk { radius: f64 },
    /// `[-half_side, half_side]^2`
    Square { half_side: f64 },
}

impl Domain {
    pub fn contains(&self, u: [f64; 2]) -> bool {
        match *self {
            Domain::Disk { radius } => u[0] * u[0] + u[1] * u[1] <= radius * radius,
            Domain::Square { half_side } => u[0].abs() <= half_side && u[1].abs() <= half_side,
        }
    }

    /// Radius of the smallest centred disk containing the domain.
    pub fn outer_radius(&self) -> f64 {
        match *self {
            Domain::Disk { radius } => radius,
            Domain::Square { half_side } => half_side * std::f64::consts::SQRT_2,
        }
    }

    /// Maps a point of the unit square onto the domain, uniformly in area.
    fn from_unit(&self, a: f64, b: f64) -> [f64; 2] {
        match *self {
            Domain::Disk { radius } => {
                let (r, th) = (radius * a.sqrt(), 2.0 * PI * b);
                [r * th.cos(), r * th.sin()]
            }
            Domain::Square { half_side } => [half_side * (2.0 * a - 1.0), half_side * (2.0 * b - 1.0)],
        }
    }

    fn scaled(&self, factor: f64) -> Domain {
        match *self {
            Domain::Disk { radius } => Domain::Disk { radius: radius * factor },
            Domain::Square { half_side } => Domain::Square { half_side: half_side * factor },
        }
    }
}

/// Radial graphing function `phi(xi) = sum_k c_k |xi|^{2k}`, `k = 1, 2, ...`.
///
/// With `c_1 > 0` and the other coefficients nonnegative the graph is convex
/// with Gaussian curvature bounded below; `[1]` is the paraboloid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub coeffs: Vec<f64>,
}

impl Graph {
    pub fn paraboloid() -> Self {
        Graph { coeffs: vec![1.0] }
    }

    /// `(psi(r), psi'(r) / r, psi''(r))` for the radial profile `psi`.
    fn radial(&self, r2: f64) -> (f64, f64, f64) {
        let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
        let mut pow = 1.0; // r^{2k-2}
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = (i + 1) as f64;
            v += c * pow * r2;
            d1 += 2.0 * k * c * pow;
            d2 += 2.0 * k * (2.0 * k - 1.0) * c * pow;
            pow *= r2;
        }
        (v, d1, d2)
    }

    pub fn eval(&self, u: [f64; 2]) -> f64 {
        self.radial(u[0] * u[0] + u[1] * u[1]).0
    }

    pub fn gradient(&self, u: [f64; 2]) -> [f64; 2] {
        let d1 = self.radial(u[0] * u[0] + u[1] * u[1]).1;
        [d1 * u[0], d1 * u[1]]
    }

    /// Determinant of the Hessian.
    pub fn hessian_det(&self, u: [f64; 2]) -> f64 {
        let (_, d1, d2) = self.radial(u[0] * u[0] + u[1] * u[1]);
        d1 * d2
    }
}

/// A surface over a planar domain with a curvature floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub domain: Domain,
    pub graph: Graph,
    pub curvature_floor: f64,
}

/// Points per axis of the curvature check.
const CURVATURE_SAMPLES: usize = 33;

impl SurfaceSpec {
    pub fn new(domain: Domain, graph: Graph, curvature_floor: f64) -> Result<Self> {
        let spec = SurfaceSpec { domain, graph, curvature_floor };
        spec.validate()?;
        Ok(spec)
    }

    pub fn paraboloid(domain: Domain) -> Self {
        SurfaceSpec { domain, graph: Graph::paraboloid(), curvature_floor: 1.0 }
    }

    /// Checks the coefficient signs and the Hessian floor on a lattice of `U`.
    pub fn validate(&self) -> Result<()> {
        let size = self.domain.outer_radius();
        if !(size > 0.0) || !size.is_finite() {
            return Err(Error::InvalidParameter(format!("degenerate domain {:?}", self.domain)));
        }
        match self.graph.coeffs.split_first() {
            Some((c1, rest)) if *c1 > 0.0 && rest.iter().all(|c| *c >= 0.0) => {}
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "graph coefficients {:?} are not convex-positive",
                    self.graph.coeffs
                )))
            }
        }
        if !(self.curvature_floor > 0.0) {
            return Err(Error::InvalidParameter("curvature floor must be positive".into()));
        }
        for i in 0..CURVATURE_SAMPLES {
            for j in 0..CURVATURE_SAMPLES {
                let a = i as f64 / (CURVATURE_SAMPLES - 1) as f64;
                let b = j as f64 / (CURVATURE_SAMPLES - 1) as f64;
                let u = [size * (2.0 * a - 1.0), size * (2.0 * b - 1.0)];
                if self.domain.contains(u) && self.graph.hessian_det(u) < self.curvature_floor {
                    return Err(Error::InvalidParameter(format!(
                        "Hessian determinant {} below floor {} at {u:?}",
                        self.graph.hessian_det(u),
                        self.curvature_floor
                    )));
                }
            }
        }
        Ok(())
    }

    /// `U ∩ (zeta - U)`.
    fn in_both(&self, u: [f64; 2], zeta: [f64; 2]) -> bool {
        self.domain.contains(u) && self.domain.contains([zeta[0] - u[0], zeta[1] - u[1]])
    }
}

/// Density `mu * mu` at one point with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct POne {
    pub value: f64,
    /// The level set degenerated to (nearly) a point; `value` is then the
    /// limit taken at a slightly raised level.
    pub degenerate: bool,
}

/// Angular nodes on the level curve.
const ANGLES: usize = 1024;
/// Relative gradient floor below which the level curve counts as degenerate.
const GRADIENT_FLOOR: f64 = 1e-9;

/// `P1(xi_1, xi_2) = mu * mu(xi_1 + xi_2, phi(xi_1) + phi(xi_2))`, by the
/// co-area formula along the level curve of `u -> phi(u) + phi(zeta - u)`.
///
/// The curve is star-shaped about `zeta / 2`, the minimiser of that convex
/// function, so it is parametrised by angle there and each radius found by
/// bisection; arcs leaving `U ∩ (zeta - U)` are clipped at interpolated
/// crossings.
pub fn p_one(xi1: [f64; 2], xi2: [f64; 2], spec: &SurfaceSpec) -> Result<POne> {
    for x in [xi1, xi2] {
        if !spec.domain.contains(x) {
            return Err(Error::InvalidParameter(format!("{x:?} lies outside U")));
        }
    }
    let zeta = [xi1[0] + xi2[0], xi1[1] + xi2[1]];
    let tau = spec.graph.eval(xi1) + spec.graph.eval(xi2);
    let centre = [0.5 * zeta[0], 0.5 * zeta[1]];
    let f = |u: [f64; 2]| spec.graph.eval(u) + spec.graph.eval([zeta[0] - u[0], zeta[1] - u[1]]);
    let f_min = f(centre);
    let scale = tau.abs().max(spec.domain.outer_radius().powi(2)).max(1e-300);
    let (level, degenerate) = if tau - f_min <= GRADIENT_FLOOR * scale {
        (f_min + 1e-6 * scale, true)
    } else {
        (tau, false)
    };
    // radius and co-area weight r / |d_r F| on each ray
    let ray = |theta: f64| -> (f64, f64, [f64; 2]) {
        let e = [theta.cos(), theta.sin()];
        let at = |r: f64| [centre[0] + r * e[0], centre[1] + r * e[1]];
        let mut hi = spec.domain.outer_radius().max(1e-3);
        while f(at(hi)) < level {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f(at(mid)) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        let u = at(r);
        let g1 = spec.graph.gradient(u);
        let g2 = spec.graph.gradient([zeta[0] - u[0], zeta[1] - u[1]]);
        let dr = (g1[0] - g2[0]) * e[0] + (g1[1] - g2[1]) * e[1];
        (r, r / dr, u)
    };
    let dtheta = 2.0 * PI / ANGLES as f64;
    let nodes: Vec<(f64, bool)> = (0..ANGLES)
        .map(|k| {
            let (_, w, u) = ray(k as f64 * dtheta);
            (w, spec.in_both(u, zeta))
        })
        .collect();
    let mut total = 0.0;
    for k in 0..ANGLES {
        let (wa, ina) = nodes[k];
        let (wb, inb) = nodes[(k + 1) % ANGLES];
        let ta = k as f64 * dtheta;
        total += match (ina, inb) {
            (true, true) => 0.5 * (wa + wb) * dtheta,
            (false, false) => 0.0,
            _ => {
                // bisect for the crossing angle
                let (mut lo, mut hi) = (ta, ta + dtheta);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    let inside = spec.in_both(ray(mid).2, zeta);
                    if inside == ina {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let frac = (0.5 * (lo + hi) - ta) / dtheta;
                let wc = wa + frac * (wb - wa);
                if ina {
                    0.5 * (wa + wc) * frac * dtheta
                } else {
                    0.5 * (wc + wb) * (1.0 - frac) * dtheta
                }
            }
        };
    }
    Ok(POne { value: total, degenerate })
}

/// Sampled supremum of `P1` over `U x U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CConstant {
    pub c: f64,
    pub argmax: ([f64; 2], [f64; 2]),
    pub samples: usize,
}

/// `k`-th term of the van der Corput sequence in `base`.
fn radical_inverse(mut k: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

/// Refinement rounds of the local pattern search.
const REFINE_ROUNDS: usize = 40;

/// Supremum of [`p_one`] over a Halton sample of `U x U`, refined by a
/// shrinking coordinate search around the best sample.
pub fn c_constant(spec: &SurfaceSpec, samples: usize) -> Result<CConstant> {
    spec.validate()?;
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let candidates: Vec<([f64; 2], [f64; 2], f64)> = (1..=samples)
        .into_par_iter()
        .map(|k| {
            let a = spec.domain.from_unit(radical_inverse(k, 2), radical_inverse(k, 3));
            let b = spec.domain.from_unit(radical_inverse(k, 5), radical_inverse(k, 7));
            p_one(a, b, spec).map(|p| (a, b, p.value))
        })
        .collect::<Result<_>>()?;
    let (mut a, mut b, mut best) = candidates.into_iter().fold(([0.0; 2], [0.0; 2], f64::NEG_INFINITY), |acc, x| {
        if x.2 > acc.2 {
            x
        } else {
            acc
        }
    });
    let mut step = 0.1 * spec.domain.outer_radius();
    for _ in 0..REFINE_ROUNDS {
        let mut improved = false;
        for axis in 0..4 {
            for sign in [-1.0, 1.0] {
                let (mut a2, mut b2) = (a, b);
                if axis < 2 {
                    a2[axis] += sign * step;
                } else {
                    b2[axis - 2] += sign * step;
                }
                if !spec.domain.contains(a2) || !spec.domain.contains(b2) {
                    continue;
                }
                let v = p_one(a2, b2, spec)?.value;
                if v > best {
                    (a, b, best) = (a2, b2, v);
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(CConstant { c: best, argmax: (a, b), samples })
}

/// Frequency-side datum on `grid`, restricted to `U`.
pub fn restrict(g: &Field, spec: &SurfaceSpec) -> Result<Field> {
    if g.side() != Side::Frequency {
        return Err(Error::WrongSide { expected: "frequency" });
    }
    if g.grid().d() != 2 {
        return Err(Error::GridMismatch("the extension operator lives on a planar grid".into()));
    }
    let grid = *g.grid();
    let (first, last) = (grid.freq(0), grid.freq(grid.n() - 1));
    let mut xi = [0.0; 2];
    let alive = spectral::BANDWIDTH_REL * g.max_abs();
    let mut values = Vec::with_capacity(grid.len());
    for (i, v) in g.values().iter().enumerate() {
        grid.freq_point(i, &mut xi);
        if !spec.domain.contains(xi) {
            values.push(Complex64::new(0.0, 0.0));
            continue;
        }
        // U would continue past the lattice edge while g is still resolved there
        let on_edge = xi.iter().any(|&x| x == first || x == last);
        if on_edge && v.norm() > alive {
            return Err(Error::SupportExceeded(format!("U reaches the frequency lattice edge at {xi:?}")));
        }
        values.push(*v);
    }
    Field::new(grid, Side::Frequency, values)
}

/// Effective bandwidth and `max |grad phi|` over the support of `g`.
fn surface_reach(g: &Field, spec: &SurfaceSpec) -> (f64, f64, f64) {
    let grid = *g.grid();
    let cutoff = spectral::BANDWIDTH_REL * g.max_abs();
    let mut xi = [0.0; 2];
    let (mut lo, mut hi, mut slope) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for (i, v) in g.values().iter().enumerate() {
        if v.norm() >= cutoff && cutoff > 0.0 {
            grid.freq_point(i, &mut xi);
            let p = spec.graph.eval(xi);
            lo = lo.min(p);
            hi = hi.max(p);
            let gr = spec.graph.gradient(xi);
            slope = slope.max(gr[0].hypot(gr[1]));
        }
    }
    (lo, hi, slope)
}

/// Time grid for the extension of `g`: the dispersion budget
/// `s max|grad phi| <= L` and a quarter of the Nyquist step for the phase
/// spread of `phi` on the support.
pub fn extension_time_grid(g: &Field, spec: &SurfaceSpec) -> Result<TimeGrid> {
    let (lo, hi, slope) = surface_reach(g, spec);
    let l = g.grid().half_width();
    let slope = slope.max(g.grid().freq_spacing());
    let spread = if hi > lo { hi - lo } else { g.grid().freq_spacing() };
    let s_max = l / slope;
    TimeGrid::symmetric(s_max, (0.5 * PI / spread).min(s_max / 8.0))
}

fn check_extension_grid(g: &Field, spec: &SurfaceSpec, s: &TimeGrid) -> Result<()> {
    let (lo, hi, slope) = surface_reach(g, spec);
    if s.count > 1 && s.step.abs() * (hi - lo).max(0.0) > PI {
        return Err(Error::Nyquist { step: s.step, increment: s.step.abs() * (hi - lo) });
    }
    let budget = g.grid().half_width();
    if s.max_abs() * slope > budget * (1.0 + 1e-12) {
        return Err(Error::DispersionBudget { s_max: s.max_abs(), budget: budget / slope });
    }
    Ok(())
}

fn map_extension<T: Send>(
    g: &Field,
    spec: &SurfaceSpec,
    s: &TimeGrid,
    visit: impl Fn(&[Complex64]) -> T + Sync,
) -> Result<Vec<T>> {
    let g = restrict(g, spec)?;
    check_extension_grid(&g, spec, s)?;
    let grid = *g.grid();
    let plan = spectral::plan_for(&grid);
    let phi: Vec<f64> = (0..grid.len())
        .map(|i| {
            let mut xi = [0.0; 2];
            grid.freq_point(i, &mut xi);
            spec.graph.eval(xi)
        })
        .collect();
    let factor = (2.0 * PI).powi(2);
    Ok((0..s.count)
        .into_par_iter()
        .map(|k| {
            let sk = s.at(k);
            let mut buf: Vec<Complex64> =
                g.values().iter().zip(&phi).map(|(v, p)| v * Complex64::from_polar(factor, sk * p)).collect();
            spectral::inverse_in_place(&grid, &plan, &mut buf);
            visit(&buf)
        })
        .collect())
}

/// `Eg(x, s) = int_U g(xi) e^{i(s phi(xi) + x.xi)} dxi` on the spatial
/// lattice of `g`'s grid.
pub fn extension(g: &Field, spec: &SurfaceSpec, s: &TimeGrid) -> Result<SpaceTimeField> {
    let slices = map_extension(g, spec, s, |u| u.to_vec())?;
    SpaceTimeField::new(*g.grid(), *s, slices.into_iter().flatten().collect())
}

/// `||Eg||^4_{L^4_{x,s}}` with its tail uncertainty.
pub fn extension_l4(g: &Field, spec: &SurfaceSpec, s: &TimeGrid) -> Result<(f64, f64)> {
    let cell = g.grid().cell_volume();
    let powers = map_extension(g, spec, s, |u| norms::slice_lq_power(u, 4.0, cell))?;
    let t = norms::integrate_with_tail(s, &powers);
    let total = t.windowed + t.tail;
    Ok((total, t.tail_uncertainty))
}

/// Largest tail uncertainty, relative to the norm, accepted by [`q_steintomas`].
pub const TAIL_LIMIT: f64 = 1e-2;

/// `Q(t) = (2 pi)^3 c ||g_t||^4_{L^2(U)} - ||E g_t||^4_{L^4}` with
/// `g_t = e^{-t phi} g`. The factor `(2 pi)^3` is the Plancherel constant
/// turning `||Eg||^4` into the pairing with `P`.
pub fn q_steintomas(g: &Field, spec: &SurfaceSpec, c: f64, t: &TimeGrid) -> Result<QTrace> {
    flows::check_t_grid(t)?;
    let g = restrict(g, spec)?;
    let grid = *g.grid();
    let phi: Vec<f64> = (0..grid.len())
        .map(|i| {
            let mut xi = [0.0; 2];
            grid.freq_point(i, &mut xi);
            spec.graph.eval(xi)
        })
        .collect();
    let damp = |tt: f64| -> Result<Field> {
        let v = g.values().iter().zip(&phi).map(|(v, p)| v * (-tt * p).exp()).collect();
        Field::new(grid, Side::Frequency, v)
    };
    let s_grid = extension_time_grid(&damp(t.start)?, spec)?;
    let cell = grid.freq_cell_volume();
    let plancherel = (2.0 * PI).powi(3);
    let points = flows::compute_points(t, |tt| {
        let gt = damp(tt)?;
        let l2: f64 = gt.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * cell;
        let (second, err) = extension_l4(&gt, spec, &s_grid)?;
        if err > TAIL_LIMIT * second {
            return Err(Error::Unresolved { bound: err, limit: TAIL_LIMIT * second });
        }
        Ok(Point { first: plancherel * c * l2 * l2, second, err })
    })?;
    let spec_out = TraceSpec {
        theorem: "stein_tomas".into(),
        constants: BTreeMap::from([("c".to_string(), c)]),
        grid,
        s_grid,
    };
    flows::assemble(spec_out, t, points)
}

/// Grid whose frequency lattice covers `U` with margin.
pub fn grid_for(spec: &SurfaceSpec, n: usize, half_width: f64) -> Result<GridSpec> {
    let grid = GridSpec::new(2, n, half_width)?;
    if grid.freq(grid.n() - 1) < spec.domain.outer_radius() {
        return Err(Error::SupportExceeded(format!(
            "lattice reaches {} but U needs {}",
            grid.freq(grid.n() - 1),
            spec.domain.outer_radius()
        )));
    }
    Ok(grid)
}

/// A domain shrunk by `factor`, for monotonicity checks of `c` in `U`.
pub fn shrink(spec: &SurfaceSpec, factor: f64) -> SurfaceSpec {
    SurfaceSpec { domain: spec.domain.scaled(factor), ..spec.clone() }
}
