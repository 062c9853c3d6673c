//! Mixed space-time Lebesgue norms and Sobolev norms.

use crate::error::{Error, Result};
use crate::spectral::{self, Field, Propagator, SpaceTimeField, Symbol, TimeGrid};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Exponents of `L^p_s L^q_x`; `f64::INFINITY` stands for the sup norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedNormSpec {
    pub p: f64,
    pub q: f64,
}

impl MixedNormSpec {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("q", q)] {
            if v.is_nan() || v < 1.0 {
                return Err(Error::InvalidExponent(format!("{name} = {v} is below 1")));
            }
        }
        Ok(MixedNormSpec { p, q })
    }
}

/// `int |F(s)|^p ds` over the sampled window, the estimated contribution
/// of `|s|` beyond it, and the spread between two tail models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeNorm {
    pub p: f64,
    pub windowed: f64,
    pub tail: f64,
    pub tail_uncertainty: f64,
}

impl SpaceTimeNorm {
    /// `||u||^p` including the tail estimate.
    pub fn power(&self) -> f64 {
        if self.p.is_infinite() {
            self.windowed
        } else {
            self.windowed + self.tail
        }
    }

    /// The norm itself, tail included.
    pub fn norm(&self) -> f64 {
        if self.p.is_infinite() {
            self.windowed
        } else {
            self.power().powf(1.0 / self.p)
        }
    }

    /// The norm restricted to the sampled window.
    pub fn windowed_norm(&self) -> f64 {
        if self.p.is_infinite() {
            self.windowed
        } else {
            self.windowed.powf(1.0 / self.p)
        }
    }
}

/// Trapezoid integral of a sampled time profile plus analytic tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailedIntegral {
    pub windowed: f64,
    pub tail: f64,
    pub tail_uncertainty: f64,
}

/// Integrates samples of a nonnegative profile `I(s)` on a uniform grid and
/// adds an estimate of `int_{|s| > S} I`.
///
/// The tails are fitted from `I(S/2)` and `I(S)` on each side, with
/// `A / (s^2 + b)` for decay rates up to about 2 and `A s^{-gamma}` for
/// faster decay; refitting from `I(3S/4)` gives the uncertainty.
pub fn integrate_with_tail(times: &TimeGrid, values: &[f64]) -> TailedIntegral {
    let n = values.len();
    if n == 0 {
        return TailedIntegral { windowed: 0.0, tail: 0.0, tail_uncertainty: 0.0 };
    }
    if n == 1 {
        return TailedIntegral { windowed: 0.0, tail: 0.0, tail_uncertainty: f64::INFINITY };
    }
    let h = times.step;
    let interior: f64 = values[1..n - 1].iter().sum();
    let windowed = h * (interior + 0.5 * (values[0] + values[n - 1]));
    let mut tail = 0.0;
    let mut unc = 0.0;
    // left tail uses samples mirrored so that index 0 is the far end
    let right: Vec<(f64, f64)> = (0..n).map(|k| (times.at(k), values[k])).collect();
    let left: Vec<(f64, f64)> = right.iter().rev().map(|&(s, v)| (-s, v)).collect();
    for side in [&right, &left] {
        let (t, u) = side_tail(side);
        tail += t;
        unc += u;
    }
    TailedIntegral { windowed, tail, tail_uncertainty: unc }
}

/// Tail beyond `s1` of the model through `(s0, i0)` and `(s1, i1)`: the
/// Lorentzian `A / (s^2 + b)` when the local decay rate is at most about 2,
/// a power law otherwise. `None` when neither model decays integrably.
fn fitted_tail(s0: f64, i0: f64, s1: f64, i1: f64) -> Option<f64> {
    if s0 >= s1 || i0 <= i1 {
        return None;
    }
    let gamma = (i0 / i1).ln() / (s1 / s0).ln();
    let b = (i1 * s1 * s1 - i0 * s0 * s0) / (i0 - i1);
    if gamma < 2.25 {
        let a = i1 * (s1 * s1 + b);
        if b > 0.0 {
            let rb = b.sqrt();
            return Some(a / rb * (std::f64::consts::FRAC_PI_2 - (s1 / rb).atan()));
        }
        if b > -s0 * s0 {
            // small negative b still decays like s^{-2}
            let c = (-b).sqrt();
            return Some(a / (2.0 * c) * ((s1 + c) / (s1 - c)).ln());
        }
    }
    (gamma > 1.0).then(|| i1 * s1 / (gamma - 1.0))
}

/// Tail estimate from the pair `(S/2, S)`; the uncertainty is its change
/// when the inner point moves to `3S/4`.
fn side_tail(samples: &[(f64, f64)]) -> (f64, f64) {
    let (s_end, i_end) = *samples.last().unwrap();
    if s_end <= 0.0 || i_end <= 0.0 {
        return (0.0, 0.0);
    }
    let nearest = |target: f64| {
        *samples
            .iter()
            .filter(|(s, _)| *s > 0.0 && *s < s_end)
            .min_by(|a, b| (a.0 - target).abs().total_cmp(&(b.0 - target).abs()))
            .unwrap_or(&(s_end, i_end))
    };
    let (s_mid, i_mid) = nearest(0.5 * s_end);
    let (s_q, i_q) = nearest(0.75 * s_end);
    let Some(main) = fitted_tail(s_mid, i_mid, s_end, i_end) else {
        // not decaying: no credible tail
        return (0.0, f64::INFINITY);
    };
    match fitted_tail(s_q, i_q, s_end, i_end) {
        Some(alt) => (main, (main - alt).abs()),
        None => (main, main),
    }
}

/// Spatial integral `int |u|^q dx` of one slice (or its max for `q = inf`).
pub fn slice_lq_power(values: &[Complex64], q: f64, cell: f64) -> f64 {
    if q.is_infinite() {
        values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    } else if q == 2.0 {
        values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell
    } else {
        values.iter().map(|v| v.norm_sqr().powf(0.5 * q)).sum::<f64>() * cell
    }
}

/// Turns per-slice spatial integrals into the mixed norm.
pub fn combine_slices(times: &TimeGrid, slice_powers: &[f64], spec: MixedNormSpec) -> SpaceTimeNorm {
    let MixedNormSpec { p, q } = spec;
    let profile: Vec<f64> = slice_powers
        .iter()
        .map(|&a| {
            let lq = if q.is_infinite() { a } else { a.powf(1.0 / q) };
            if p.is_infinite() {
                lq
            } else {
                lq.powf(p)
            }
        })
        .collect();
    if p.is_infinite() {
        let m = profile.iter().cloned().fold(0.0, f64::max);
        return SpaceTimeNorm { p, windowed: m, tail: 0.0, tail_uncertainty: 0.0 };
    }
    let t = integrate_with_tail(times, &profile);
    SpaceTimeNorm { p, windowed: t.windowed, tail: t.tail, tail_uncertainty: t.tail_uncertainty }
}

pub fn mixed_norm(u: &SpaceTimeField, spec: MixedNormSpec) -> Result<SpaceTimeNorm> {
    MixedNormSpec::new(spec.p, spec.q)?;
    let cell = u.grid().cell_volume();
    let powers: Vec<f64> = (0..u.times().count).map(|k| slice_lq_power(u.slice(k), spec.q, cell)).collect();
    Ok(combine_slices(u.times(), &powers, spec))
}

/// Mixed norm of `e^{is omega(D)} f` computed slice by slice without storing
/// the space-time array.
pub fn mixed_norm_of_evolution(
    fhat: &Field,
    family: Propagator,
    times: &TimeGrid,
    spec: MixedNormSpec,
) -> Result<SpaceTimeNorm> {
    MixedNormSpec::new(spec.p, spec.q)?;
    let cell = fhat.grid().cell_volume();
    let powers = spectral::map_slices(fhat, family, times, |_, u| slice_lq_power(u, spec.q, cell))?;
    Ok(combine_slices(times, &powers, spec))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SobolevVariant {
    /// weight `|xi|^{2s}`
    Homogeneous,
    /// weight `(1 + |xi|^2)^s`
    Inhomogeneous,
}

/// `||f||_{H^s}` with `||f||^2 = (2 pi)^{-d} int w(xi) |f^(xi)|^2 dxi`.
pub fn sobolev_norm(f: &Field, order: f64, variant: SobolevVariant) -> Result<f64> {
    let fhat = f.to_frequency()?;
    let weighted = match variant {
        SobolevVariant::Homogeneous => spectral::apply_multiplier(
            &fhat,
            &Symbol::FractionalPower { alpha: order },
            Some(Complex64::new(0.0, 0.0)),
        )?,
        SobolevVariant::Inhomogeneous => {
            spectral::apply_multiplier_fn(&fhat, |xi| {
                let r2: f64 = xi.iter().map(|x| x * x).sum();
                Complex64::new((1.0 + r2).powf(0.5 * order), 0.0)
            })?
        }
    };
    let d = fhat.grid().d() as i32;
    Ok((weighted.l2_norm_sq() / (2.0 * std::f64::consts::PI).powi(d)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{evolve, make_extremiser, Extremiser, GridSpec, Side};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn gaussian_1d(grid: GridSpec) -> Field {
        Field::from_space_fn(grid, |x| Complex64::new((-0.5 * x[0] * x[0]).exp(), 0.0)).unwrap()
    }

    #[test]
    fn rejects_small_exponents() {
        assert!(MixedNormSpec::new(0.5, 2.0).is_err());
        assert!(MixedNormSpec::new(2.0, f64::NAN).is_err());
        assert!(MixedNormSpec::new(f64::INFINITY, 1.0).is_ok());
    }

    #[test]
    fn gaussian_l6_norm() {
        let grid = GridSpec::new(1, 256, 64.0).unwrap();
        let fhat = gaussian_1d(grid).to_frequency().unwrap();
        let times = spectral::default_time_grid(&fhat, Propagator::Schrodinger).unwrap();
        let n = mixed_norm_of_evolution(&fhat, Propagator::Schrodinger, &times, MixedNormSpec { p: 6.0, q: 6.0 })
            .unwrap();
        let exact = PI.powf(1.5) / (2.0 * 3f64.sqrt());
        assert_relative_eq!(n.power(), exact, max_relative = 1e-2);
        assert!(n.tail_uncertainty < 1e-2 * exact);
        let u = evolve(&gaussian_1d(grid), Propagator::Schrodinger, &times).unwrap();
        let direct = mixed_norm(&u, MixedNormSpec { p: 6.0, q: 6.0 }).unwrap();
        assert_relative_eq!(direct.power(), n.power(), max_relative = 1e-12);
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let grid = GridSpec::new(1, 64, 8.0).unwrap();
        let times = TimeGrid { start: -1.0, step: 0.1, count: 21 };
        let u = evolve(&Field::zeros(grid, Side::Space), Propagator::Schrodinger, &times).unwrap();
        let n = mixed_norm(&u, MixedNormSpec { p: 4.0, q: 4.0 }).unwrap();
        assert_eq!(n.norm(), 0.0);
    }

    #[test]
    fn l2_l2_is_fubini() {
        let grid = GridSpec::new(1, 128, 32.0).unwrap();
        let f = gaussian_1d(grid);
        let times = TimeGrid { start: -1.0, step: 0.05, count: 41 };
        let u = evolve(&f, Propagator::Schrodinger, &times).unwrap();
        let n = mixed_norm(&u, MixedNormSpec { p: 2.0, q: 2.0 }).unwrap();
        // every slice carries ||f||^2, so the windowed integral is 2 ||f||^2
        assert_relative_eq!(n.windowed, 2.0 * f.l2_norm_sq(), max_relative = 1e-8);
    }

    #[test]
    fn sobolev_examples() {
        let g3 = GridSpec::new(3, 128, 32.0).unwrap();
        let w = make_extremiser(Extremiser::Wave, g3).unwrap();
        let h = sobolev_norm(&w, 0.5, SobolevVariant::Homogeneous).unwrap();
        assert_relative_eq!(h * h, 1.0 / (8.0 * PI * PI), max_relative = 1e-2);

        let g1 = GridSpec::new(1, 256, 16.0).unwrap();
        let f = gaussian_1d(g1);
        assert_relative_eq!(sobolev_norm(&f, 0.0, SobolevVariant::Homogeneous).unwrap(), PI.powf(0.25), max_relative = 1e-10);
        assert_relative_eq!(
            sobolev_norm(&f, 0.0, SobolevVariant::Inhomogeneous).unwrap(),
            f.l2_norm_sq().sqrt(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn sobolev_order_zero_matches_single_slice_norm() {
        let grid = GridSpec::new(2, 32, 8.0).unwrap();
        let f = Field::from_space_fn(grid, |x| Complex64::new((-x[0] * x[0] - 0.3 * x[1] * x[1]).exp(), x[0] * 0.1))
            .unwrap();
        let u = SpaceTimeField::new(grid, TimeGrid::single(0.0), f.values().to_vec()).unwrap();
        let slice = slice_lq_power(u.slice(0), 2.0, grid.cell_volume()).sqrt();
        let s = sobolev_norm(&f, 0.0, SobolevVariant::Homogeneous).unwrap();
        assert_relative_eq!(s, slice, max_relative = 1e-10);
    }

    #[test]
    fn lorentzian_tail_is_exact() {
        let times = TimeGrid::symmetric(10.0, 0.01).unwrap();
        let vals: Vec<f64> = times.times().iter().map(|s| 1.0 / (1.0 + 4.0 * s * s)).collect();
        let t = integrate_with_tail(&times, &vals);
        assert_relative_eq!(t.windowed + t.tail, PI / 2.0, max_relative = 1e-5);
    }

    #[test]
    fn window_monotonicity_and_restriction() {
        let grid = GridSpec::new(1, 128, 32.0).unwrap();
        let f = gaussian_1d(grid);
        let times = TimeGrid { start: -2.0, step: 0.05, count: 81 };
        let u = evolve(&f, Propagator::Schrodinger, &times).unwrap();
        let spec = MixedNormSpec { p: 6.0, q: 6.0 };
        let full = mixed_norm(&u, spec).unwrap();
        for (a, b) in [(20, 61), (10, 71), (0, 81)] {
            let sub = mixed_norm(&u.restrict(a..b).unwrap(), spec).unwrap();
            assert!(sub.windowed <= full.windowed * (1.0 + 1e-14));
        }
        let inner = mixed_norm(&u.restrict(30..51).unwrap(), spec).unwrap();
        let outer = mixed_norm(&u.restrict(20..61).unwrap(), spec).unwrap();
        assert!(inner.windowed <= outer.windowed);
    }
}
