//! Monte-Carlo evaluation of the masses of the delta measures `dSigma_xi`,
//! independent of the closed forms they are compared against.
//!
//! The momentum delta is removed by solving for the last frequency; the free
//! variables `y` live in `R^D`. The energy delta is replaced by a Gaussian
//! `delta_eps`. Samples are drawn in polar coordinates around an interior
//! centre `c`: a uniform direction `omega`, then a radius from a Gaussian
//! centred on the crossing `r*` of the energy surface along that ray, with a
//! width matched to the mollifier. Each width gets its own seeded stream and
//! the widths are extrapolated to zero.

use crate::error::{Error, Result};
use crate::multilinear::{self, Family, FamilyTag};
use crate::spectral::{kg_phi, norm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::PI;

/// Mollifier widths, in units of the evaluation point's energy scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub widths: Vec<f64>,
}

impl MollifierSpec {
    pub fn new(widths: Vec<f64>) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::InvalidParameter("at least three mollifier widths are needed".into()));
        }
        if widths.iter().any(|w| !(*w > 0.0)) || widths.windows(2).any(|p| p[1] >= p[0]) {
            return Err(Error::InvalidParameter("mollifier widths must be positive and strictly decreasing".into()));
        }
        Ok(MollifierSpec { widths })
    }

    /// `eps0, eps0/2, ..., eps0/2^{count-1}`.
    pub fn halving(eps0: f64, count: usize) -> Result<Self> {
        MollifierSpec::new((0..count).map(|k| eps0 / 2f64.powi(k as i32)).collect())
    }
}

impl Default for MollifierSpec {
    fn default() -> Self {
        MollifierSpec::halving(0.04, 4).expect("valid default widths")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaId {
    Schrodinger,
    OzawaTsutsumi,
    Wave,
    KleinGordon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: LemmaId,
    pub m: usize,
    pub d: usize,
    pub xi: Vec<f64>,
    /// Absolute mollifier widths used.
    pub widths: Vec<f64>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub extrapolated: f64,
    pub extrapolated_se: f64,
    /// Bias order in `eps` used for the extrapolation.
    pub order: f64,
    pub closed_form: f64,
    /// Relative error against the closed form (absolute error when it is zero).
    pub rel_error: f64,
    pub samples: usize,
    pub seed: u64,
    /// True when the energy level was shifted off a degenerate surface.
    pub shifted_level: bool,
    /// False when the estimates did not approach a limit monotonically.
    pub converged: bool,
    pub skipped_rays: usize,
}

impl LemmaReport {
    /// `|extrapolated - closed| <= max(rel_tol |closed|, 3 SE)`.
    pub fn within(&self, rel_tol: f64) -> bool {
        let diff = (self.extrapolated - self.closed_form).abs();
        diff <= (rel_tol * self.closed_form.abs()).max(3.0 * self.extrapolated_se)
    }
}

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Sync + Send>;

/// `int w(y) delta(E(y) - level) dy` over `R^dim`.
struct Problem {
    dim: usize,
    center: Vec<f64>,
    level: f64,
    scale: f64,
    energy: ScalarFn,
    weight: ScalarFn,
    /// The centre sits on a regular part of the surface rather than at an
    /// isolated minimum of the energy.
    center_on_surface: bool,
}

/// Ratio of the radial proposal width to the mollified integrand's width.
const PROPOSAL_WIDTH: f64 = 2.0;
/// Level offset, in widths, used on degenerate surfaces.
const LEVEL_SHIFT: f64 = 3.0;
const BATCH: usize = 2048;

#[derive(Default, Clone, Copy)]
struct Moments {
    sum: f64,
    sum_sq: f64,
    count: usize,
    skipped: usize,
}

impl Moments {
    fn merge(self, o: Moments) -> Moments {
        Moments {
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
            count: self.count + o.count,
            skipped: self.skipped + o.skipped,
        }
    }

    fn mean_se(&self) -> (f64, f64) {
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0);
        (mean, (var / (n - 1.0).max(1.0)).sqrt())
    }
}

impl Problem {
    fn at(&self, omega: &[f64], r: f64, buf: &mut [f64]) {
        for ((b, c), w) in buf.iter_mut().zip(&self.center).zip(omega) {
            *b = c + r * w;
        }
    }

    fn g(&self, omega: &[f64], r: f64, buf: &mut [f64], level: f64) -> f64 {
        self.at(omega, r, buf);
        (self.energy)(buf) - level
    }

    /// Crossing of the level along the ray and the radial slope there.
    fn ray_root(&self, omega: &[f64], level: f64, buf: &mut [f64]) -> Option<(f64, f64)> {
        let mut hi = self.scale.sqrt().max(1e-3);
        let mut tries = 0;
        while self.g(omega, hi, buf, level) < 0.0 {
            hi *= 2.0;
            tries += 1;
            if tries > 80 {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.g(omega, mid, buf, level) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let r = 0.5 * (lo + hi);
        let h = 1e-6 * r.max(1e-9);
        let slope = (self.g(omega, r + h, buf, level) - self.g(omega, (r - h).max(0.0), buf, level))
            / (r + h - (r - h).max(0.0));
        Some((r, slope.abs().max(1e-300)))
    }

    fn batch(&self, eps: f64, level: f64, count: usize, rng: &mut ChaCha8Rng) -> Moments {
        let dim = self.dim;
        let area = multilinear::sphere_area(dim - 1);
        let norm_const = 1.0 / (2.0 * PI).sqrt();
        let mut omega = vec![0.0; dim];
        let mut buf = vec![0.0; dim];
        let mut m = Moments::default();
        for _ in 0..count {
            loop {
                for w in omega.iter_mut() {
                    *w = rng.sample(StandardNormal);
                }
                let n = norm(&omega);
                if n > 1e-12 {
                    omega.iter_mut().for_each(|w| *w /= n);
                    break;
                }
            }
            m.count += 1;
            let Some((root, slope)) = self.ray_root(&omega, level, &mut buf) else {
                m.skipped += 1;
                continue;
            };
            let s = PROPOSAL_WIDTH * eps / slope;
            // truncated Gaussian on r > 0
            let mass = 0.5 * erfc(-root / (s * std::f64::consts::SQRT_2));
            let r = loop {
                let z: f64 = rng.sample(StandardNormal);
                let r = root + s * z;
                if r > 0.0 {
                    break r;
                }
            };
            let density = norm_const / s * (-0.5 * ((r - root) / s).powi(2)).exp() / mass;
            let gval = self.g(&omega, r, &mut buf, level);
            let moll = norm_const / eps * (-0.5 * (gval / eps).powi(2)).exp();
            let value = area * (self.weight)(&buf) * moll * r.powi(dim as i32 - 1) / density;
            if value.is_finite() {
                m.sum += value;
                m.sum_sq += value * value;
            } else {
                m.skipped += 1;
            }
        }
        m
    }
}

fn stream_rng(seed: u64, width_index: usize, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((width_index as u64) << 40) | batch as u64);
    rng
}

struct Extrapolation {
    value: f64,
    se: f64,
    order: f64,
    converged: bool,
}

/// Extrapolates estimates at halving widths to zero width.
///
/// When the last change is within noise the finest estimate is kept.
/// Otherwise the bias order is estimated from the ratio of the last two
/// changes (falling back to `default_order` when that ratio is not
/// resolved) and one Richardson step of that order is taken.
fn extrapolate(est: &[f64], se: &[f64], default_order: f64) -> Extrapolation {
    let k = est.len();
    let diff = |i: usize| est[i + 1] - est[i];
    let noise = |i: usize| 3.0 * (se[i].powi(2) + se[i + 1].powi(2)).sqrt();
    let last = k - 2;
    // a consistent sign of the changes means the estimates approach a limit
    let resolved: Vec<usize> = (0..=last).filter(|&i| diff(i).abs() > noise(i)).collect();
    let converged = resolved.windows(2).all(|w| diff(w[0]).signum() == diff(w[1]).signum())
        && resolved.windows(2).all(|w| diff(w[1]).abs() < diff(w[0]).abs() * 1.05);
    if diff(last).abs() <= noise(last) && diff(last - 1).abs() <= noise(last - 1) {
        return Extrapolation { value: est[k - 1], se: se[k - 1], order: default_order, converged };
    }
    let mut order = default_order;
    if diff(last).abs() > noise(last) && diff(last - 1).abs() > noise(last - 1) {
        let ratio = diff(last - 1) / diff(last);
        if ratio > 0.0 {
            order = ratio.log2().clamp(0.25, 4.0);
        }
    }
    let c = 1.0 / (2f64.powf(order) - 1.0);
    let value = est[k - 1] + c * diff(last);
    let se_val = (((1.0 + c) * se[k - 1]).powi(2) + (c * se[k - 2]).powi(2)).sqrt();
    Extrapolation { value, se: se_val, order, converged }
}

/// Full Richardson table for a known sequence of bias orders; the standard
/// error is propagated through the resulting linear combination.
fn richardson(est: &[f64], se: &[f64], orders: &[f64]) -> Extrapolation {
    let k = est.len();
    let steps = orders.len().min(k - 1);
    // each row entry is a weight vector over the raw estimates
    let mut row: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut w = vec![0.0; k];
            w[i] = 1.0;
            w
        })
        .collect();
    for &gamma in &orders[..steps] {
        let f = 2f64.powf(gamma);
        row = row
            .windows(2)
            .map(|p| p[0].iter().zip(&p[1]).map(|(a, b)| (f * b - a) / (f - 1.0)).collect())
            .collect();
    }
    let w = &row[row.len() - 1];
    let value = w.iter().zip(est).map(|(a, b)| a * b).sum();
    let var: f64 = w.iter().zip(se).map(|(a, s)| (a * s).powi(2)).sum();
    let diffs: Vec<f64> = est.windows(2).map(|p| p[1] - p[0]).collect();
    let converged = diffs.windows(2).all(|p| p[0].signum() == p[1].signum() || p[1].abs() < 3.0 * se[k - 1]);
    Extrapolation { value, se: var.sqrt(), order: orders[0], converged }
}

fn run(
    lemma: LemmaId,
    family_md: (usize, usize),
    xi: &[f64],
    problem: Problem,
    closed_form: f64,
    moll: &MollifierSpec,
    samples: usize,
    seed: u64,
) -> Result<LemmaReport> {
    if samples < 1000 {
        return Err(Error::InvalidParameter(format!("{samples} samples is too few")));
    }
    let mut buf = problem.center.clone();
    let g_center = (problem.energy)(&buf) - problem.level;
    buf.copy_from_slice(&problem.center);
    let degenerate = g_center >= -1e-12 * problem.scale;
    if g_center > 1e-9 * problem.scale {
        return Err(Error::InvalidParameter("oracle centre lies outside the energy surface".into()));
    }
    let widths: Vec<f64> = moll.widths.iter().map(|w| w * problem.scale).collect();
    let batches = samples.div_ceil(BATCH);
    let mut estimates = Vec::new();
    let mut errors = Vec::new();
    let mut skipped = 0;
    for (wi, &eps) in widths.iter().enumerate() {
        let level = if degenerate { problem.level + LEVEL_SHIFT * eps } else { problem.level };
        let parts: Vec<Moments> = (0..batches)
            .into_par_iter()
            .map(|b| {
                let count = BATCH.min(samples - b * BATCH);
                let mut rng = stream_rng(seed, wi, b);
                problem.batch(eps, level, count, &mut rng)
            })
            .collect();
        let total = parts.into_iter().fold(Moments::default(), Moments::merge);
        let (mean, se) = total.mean_se();
        estimates.push(mean);
        errors.push(se);
        skipped += total.skipped;
    }
    let ex = if problem.center_on_surface {
        extrapolate(&estimates, &errors, 1.0)
    } else if degenerate {
        // near an isolated minimum of the energy the mass is a series in
        // powers of the level: integer powers in even dimension, half-integer
        // and integer powers in odd dimension
        let orders: Vec<f64> = if problem.dim % 2 == 0 { vec![1.0, 2.0, 3.0] } else { vec![0.5, 1.0, 1.5] };
        richardson(&estimates, &errors, &orders)
    } else {
        extrapolate(&estimates, &errors, 2.0)
    };
    let rel_error = if closed_form != 0.0 {
        (ex.value - closed_form).abs() / closed_form.abs()
    } else {
        ex.value.abs()
    };
    Ok(LemmaReport {
        lemma,
        m: family_md.0,
        d: family_md.1,
        xi: xi.to_vec(),
        widths,
        estimates,
        std_errors: errors,
        extrapolated: ex.value,
        extrapolated_se: ex.se,
        order: ex.order,
        closed_form,
        rel_error,
        samples,
        seed,
        shifted_level: degenerate,
        converged: ex.converged,
        skipped_rays: skipped,
    })
}

fn check_xi(xi: &[f64], m: usize, d: usize) -> Result<()> {
    if xi.len() != m * d {
        return Err(Error::InvalidParameter(format!("expected {} frequency components, got {}", m * d, xi.len())));
    }
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite evaluation point".into()));
    }
    Ok(())
}

fn total_momentum(xi: &[f64], m: usize, d: usize) -> Vec<f64> {
    (0..d).map(|a| (0..m).map(|j| xi[j * d + a]).sum()).collect()
}

/// Rebuilds `eta_1..eta_m` from the free variables and the total momentum.
fn complete(y: &[f64], z: &[f64], m: usize, d: usize, eta: &mut [f64]) {
    eta[..(m - 1) * d].copy_from_slice(y);
    for a in 0..d {
        let s: f64 = (0..m - 1).map(|j| y[j * d + a]).sum();
        eta[(m - 1) * d + a] = z[a] - s;
    }
}

fn momentum_problem(
    xi: &[f64],
    m: usize,
    d: usize,
    omega: fn(f64) -> f64,
    weight: fn(f64) -> f64,
) -> Problem {
    let z = total_momentum(xi, m, d);
    let level: f64 = (0..m).map(|j| omega(norm(&xi[j * d..(j + 1) * d]))).sum();
    let center: Vec<f64> = (0..(m - 1) * d).map(|i| z[i % d] / m as f64).collect();
    let z_e = z.clone();
    let energy = move |y: &[f64]| {
        let mut eta = vec![0.0; m * d];
        complete(y, &z_e, m, d, &mut eta);
        (0..m).map(|j| omega(norm(&eta[j * d..(j + 1) * d]))).sum()
    };
    let w = move |y: &[f64]| {
        let mut eta = vec![0.0; m * d];
        complete(y, &z, m, d, &mut eta);
        (0..m).map(|j| weight(norm(&eta[j * d..(j + 1) * d]))).product()
    };
    Problem {
        dim: (m - 1) * d,
        center,
        level,
        scale: if level > 0.0 { level } else { 1.0 },
        energy: Box::new(energy),
        weight: Box::new(w),
        center_on_surface: false,
    }
}

/// Mass of `delta(sum xi - sum eta) delta(sum |xi|^2 - sum |eta|^2) deta`.
pub fn mass_schrodinger(
    xi: &[f64],
    m: usize,
    d: usize,
    moll: &MollifierSpec,
    samples: usize,
    seed: u64,
) -> Result<LemmaReport> {
    let family = Family::schrodinger(m, d)?;
    check_xi(xi, m, d)?;
    let problem = momentum_problem(xi, m, d, |r| r * r, |_| 1.0);
    let closed = multilinear::sphere_area((m - 1) * d - 1)
        / (2.0 * (m as f64).powf((d * m) as f64 / 2.0 - 1.0))
        * multilinear::kernel(&family, xi);
    run(LemmaId::Schrodinger, (m, d), xi, problem, closed, moll, samples, seed)
}

/// Mass of the measure
/// `|xi_1 + eta_2|^{2-d} delta(|eta|^2 - |xi|^2) delta(eta_1 - eta_2 - (xi_1 - xi_2)) deta`.
pub fn mass_ot(xi: &[f64], d: usize, moll: &MollifierSpec, samples: usize, seed: u64) -> Result<LemmaReport> {
    if d < 2 {
        return Err(Error::Inadmissible(format!("d = {d} is below 2")));
    }
    check_xi(xi, 2, d)?;
    let x1 = xi[..d].to_vec();
    let x2 = xi[d..].to_vec();
    let diff: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
    let level = norm(&x1).powi(2) + norm(&x2).powi(2);
    let energy = {
        let diff = diff.clone();
        move |eta2: &[f64]| {
            let e1: f64 = eta2.iter().zip(&diff).map(|(e, c)| (e + c) * (e + c)).sum();
            e1 + eta2.iter().map(|e| e * e).sum::<f64>()
        }
    };
    let weight = {
        let x1 = x1.clone();
        move |eta2: &[f64]| {
            let r: f64 = eta2.iter().zip(&x1).map(|(e, a)| (e + a) * (e + a)).sum::<f64>().sqrt();
            r.powi(2 - d as i32)
        }
    };
    // centred on the weight's singularity, which lies on the energy surface;
    // the polar Jacobian cancels the singular weight
    let center: Vec<f64> = x1.iter().map(|a| -a).collect();
    let problem = Problem {
        dim: d,
        center,
        level,
        scale: if level > 0.0 { level } else { 1.0 },
        energy: Box::new(energy),
        weight: Box::new(weight),
        center_on_surface: true,
    };
    let closed = multilinear::sphere_area(d - 1) / 4.0;
    run(LemmaId::OzawaTsutsumi, (2, d), xi, problem, closed, moll, samples, seed)
}

/// Mass of `Phi dSigma_xi` for the wave family.
pub fn mass_wave(
    xi: &[f64],
    m: usize,
    d: usize,
    moll: &MollifierSpec,
    samples: usize,
    seed: u64,
) -> Result<LemmaReport> {
    let family = Family::wave(m, d)?;
    check_xi(xi, m, d)?;
    if (0..m).any(|j| norm(&xi[j * d..(j + 1) * d]) == 0.0) {
        return Err(Error::InvalidParameter("wave weight is singular at a zero frequency".into()));
    }
    let xi_factor: f64 = (0..m).map(|j| norm(&xi[j * d..(j + 1) * d])).product();
    let mut problem = momentum_problem(xi, m, d, |r| r, |r| 1.0 / r.sqrt());
    // Phi = (prod|xi| / prod|eta|)^{1/2} times the measure factor
    // prod |eta_j|^{-1/2} |xi_j|^{-1/2}
    let inner = problem.weight;
    let phi_xi = xi_factor.sqrt();
    problem.weight = Box::new(move |y: &[f64]| {
        let eta_factor = inner(y); // prod |eta_j|^{-1/2}
        phi_xi * eta_factor * eta_factor / phi_xi
    });
    let closed = 2f64.powf(multilinear::wave_beta(m, d)) * multilinear::wave_a(m, d) * multilinear::kernel(&family, xi);
    run(LemmaId::Wave, (m, d), xi, problem, closed, moll, samples, seed)
}

/// Mass of `Phi dSigma_xi` for the Klein-Gordon family.
pub fn mass_kg(xi: &[f64], d: usize, moll: &MollifierSpec, samples: usize, seed: u64) -> Result<LemmaReport> {
    let family = Family::klein_gordon(d)?;
    check_xi(xi, 2, d)?;
    let xi_factor: f64 = (0..2).map(|j| kg_phi(norm(&xi[j * d..(j + 1) * d]))).product();
    let mut problem = momentum_problem(xi, 2, d, kg_phi, |r| 1.0 / kg_phi(r).sqrt());
    let inner = problem.weight;
    let phi_xi = xi_factor.sqrt();
    problem.weight = Box::new(move |y: &[f64]| {
        let eta_factor = inner(y);
        phi_xi * eta_factor * eta_factor / phi_xi
    });
    let closed = multilinear::sphere_area(d - 1) / 2f64.powf((d as f64 - 1.0) / 2.0) * multilinear::kernel(&family, xi);
    run(LemmaId::KleinGordon, (2, d), xi, problem, closed, moll, samples, seed)
}

/// Dispatches on a family tag (`Schrodinger` uses the Schrödinger measure).
pub fn mass_for_family(
    tag: FamilyTag,
    xi: &[f64],
    m: usize,
    d: usize,
    moll: &MollifierSpec,
    samples: usize,
    seed: u64,
) -> Result<LemmaReport> {
    match tag {
        FamilyTag::Schrodinger => mass_schrodinger(xi, m, d, moll, samples, seed),
        FamilyTag::Wave => mass_wave(xi, m, d, moll, samples, seed),
        FamilyTag::KleinGordon => mass_kg(xi, d, moll, samples, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moll() -> MollifierSpec {
        MollifierSpec::default()
    }

    #[test]
    fn mollifier_validation() {
        assert!(MollifierSpec::new(vec![0.1, 0.05]).is_err());
        assert!(MollifierSpec::new(vec![0.1, 0.1, 0.05]).is_err());
        assert!(MollifierSpec::new(vec![0.1, 0.05, 0.0]).is_err());
        assert!(MollifierSpec::halving(0.1, 3).is_ok());
    }

    #[test]
    fn extrapolation_removes_quadratic_bias() {
        let est: Vec<f64> = (0..4).map(|k| 1.0 + 0.3 * 0.25f64.powi(k)).collect();
        let ex = extrapolate(&est, &[1e-9; 4], 2.0);
        assert!((ex.value - 1.0).abs() < 1e-6);
        assert!((ex.order - 2.0).abs() < 1e-6);
        assert!(ex.converged);
        let lin: Vec<f64> = (0..4).map(|k| 2.0 - 0.4 * 0.5f64.powi(k)).collect();
        let ex = extrapolate(&lin, &[1e-9; 4], 2.0);
        assert!((ex.value - 2.0).abs() < 1e-6);
        let sq: Vec<f64> = (0..4).map(|k| 0.5f64.powi(k)).map(|e| e.sqrt() * (1.0 - 0.3 * e)).collect();
        let ex = richardson(&sq, &[1e-9; 4], &[0.5, 1.0, 1.5]);
        assert!(ex.value.abs() < 1e-6, "{}", ex.value);
        let wild = [1.0, 2.0, 0.5, 3.0];
        assert!(!extrapolate(&wild, &[1e-9; 4], 2.0).converged);
    }

    #[test]
    fn schrodinger_22_is_half_pi() {
        let r = mass_schrodinger(&[0.3, -0.2, 1.0, 0.4], 2, 2, &moll(), 20_000, 7).unwrap();
        assert!((r.closed_form - PI / 2.0).abs() < 1e-14);
        assert!(r.within(0.02), "{r:?}");
        let other = mass_schrodinger(&[2.0, 0.0, -1.0, 1.0], 2, 2, &moll(), 20_000, 8).unwrap();
        assert!((other.extrapolated - r.extrapolated).abs() < 0.02 * PI / 2.0);
    }

    #[test]
    fn schrodinger_23_antipodal() {
        let r = mass_schrodinger(&[1.0, 0.0, 0.0, -1.0, 0.0, 0.0], 2, 3, &moll(), 20_000, 3).unwrap();
        assert!((r.closed_form - PI).abs() < 1e-13);
        assert!(r.within(0.02), "{r:?}");
    }

    #[test]
    fn ot_masses() {
        let r2 = mass_ot(&[0.5, 0.1, -0.2, 0.7], 2, &moll(), 20_000, 11).unwrap();
        assert!(r2.within(0.02), "{r2:?}");
        let r3 = mass_ot(&[0.5, 0.1, 0.3, -0.2, 0.7, 0.0], 3, &moll(), 20_000, 12).unwrap();
        assert!((r3.closed_form - PI).abs() < 1e-14);
        assert!(r3.within(0.02), "{r3:?}");
    }

    #[test]
    fn wave_and_kg_masses() {
        let w = mass_wave(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], 2, 3, &moll(), 20_000, 5).unwrap();
        assert!((w.closed_form - 2.0 * PI).abs() < 1e-13);
        assert!(w.within(0.02), "{w:?}");
        let k = mass_kg(&[0.0; 4], 2, &moll(), 20_000, 6).unwrap();
        assert!(k.shifted_level);
        assert!((k.closed_form - PI).abs() < 1e-13);
        assert!(k.within(0.02), "{k:?}");
        assert!(mass_wave(&[0.0, 0.0, 0.0, 0.0, 1.0, 0.0], 2, 3, &moll(), 20_000, 5).is_err());
    }

    #[test]
    fn reproducible_and_error_scaling() {
        let xi = [0.3, -0.2, 1.0, 0.4];
        let a = mass_schrodinger(&xi, 2, 2, &moll(), 4_000, 99).unwrap();
        let b = mass_schrodinger(&xi, 2, 2, &moll(), 4_000, 99).unwrap();
        assert_eq!(a, b);
        let big = mass_schrodinger(&xi, 2, 2, &moll(), 16_000, 99).unwrap();
        let ratio = a.std_errors[0] / big.std_errors[0];
        assert!((1.5..2.7).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn wave_three_fold_in_the_plane() {
        // the zero kernel exponent makes the mass the constant A(3, 2) = 4 pi^2
        let w = mass_wave(&[1.0, 0.0, 0.3, 0.5, -0.7, 0.2], 3, 2, &moll(), 40_000, 1).unwrap();
        assert!((w.closed_form - 4.0 * PI * PI).abs() < 1e-12);
        assert!(w.within(0.03), "{w:?}");
    }

    #[test]
    fn kg_degenerate_and_symmetric_points() {
        let zero = mass_kg(&[0.0; 6], 3, &moll(), 40_000, 1).unwrap();
        assert_eq!(zero.closed_form, 0.0);
        assert!(zero.extrapolated.abs() <= 3.0 * zero.extrapolated_se, "{zero:?}");
        let a = mass_kg(&[0.5, 0.2, -1.0, 0.3], 2, &moll(), 20_000, 4).unwrap();
        let b = mass_kg(&[-1.0, 0.3, 0.5, 0.2], 2, &moll(), 20_000, 4).unwrap();
        let noise = 3.0 * (a.extrapolated_se.powi(2) + b.extrapolated_se.powi(2)).sqrt();
        assert!((a.extrapolated - b.extrapolated).abs() <= noise.max(1e-12));
        assert!(a.within(0.02));
    }

    #[test]
    fn wave_scaling_tracks_formula() {
        let xi = [1.0, 0.0, 0.0, 0.3, 0.8, 0.0];
        let doubled: Vec<f64> = xi.iter().map(|v| 2.0 * v).collect();
        let a = mass_wave(&xi, 2, 3, &moll(), 20_000, 2).unwrap();
        let b = mass_wave(&doubled, 2, 3, &moll(), 20_000, 2).unwrap();
        let formula = b.closed_form / a.closed_form;
        assert!((b.extrapolated / a.extrapolated - formula).abs() <= 0.02 * formula);
    }
}
