//! Kernels, sharp constants and the weighted multilinear frequency integral
//! `I_m(f) = int |Pi(f)^(xi)|^2 K(xi) dxi` for the Schrödinger, wave and
//! Klein-Gordon families.

use crate::error::{Error, Result};
use crate::spectral::{kg_phi, norm, Field, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Schrodinger,
    Wave,
    KleinGordon,
}

/// An equation family with its multilinearity degree `m` and dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Family {
    pub tag: FamilyTag,
    pub m: usize,
    pub d: usize,
}

impl Family {
    pub fn new(tag: FamilyTag, m: usize, d: usize) -> Result<Self> {
        let ok = match tag {
            FamilyTag::Schrodinger => (d >= 2 && m >= 2) || (m, d) == (3, 1),
            FamilyTag::Wave => (d >= 3 && m >= 2) || (d == 2 && m >= 3),
            FamilyTag::KleinGordon => m == 2 && d >= 2,
        };
        if ok {
            Ok(Family { tag, m, d })
        } else {
            Err(Error::Inadmissible(format!("{tag:?} with (m, d) = ({m}, {d})")))
        }
    }

    pub fn schrodinger(m: usize, d: usize) -> Result<Self> {
        Family::new(FamilyTag::Schrodinger, m, d)
    }

    pub fn wave(m: usize, d: usize) -> Result<Self> {
        Family::new(FamilyTag::Wave, m, d)
    }

    pub fn klein_gordon(d: usize) -> Result<Self> {
        Family::new(FamilyTag::KleinGordon, 2, d)
    }

    /// Exponent on the kernel base (the numerator base for Klein-Gordon).
    pub fn kernel_exponent(&self) -> f64 {
        let (m, d) = (self.m as f64, self.d as f64);
        match self.tag {
            FamilyTag::Schrodinger => 0.5 * (d * (m - 1.0) - 2.0),
            FamilyTag::Wave => wave_beta(self.m, self.d),
            FamilyTag::KleinGordon => 0.5 * (d - 2.0),
        }
    }

    /// True when the kernel is identically one.
    pub fn kernel_is_constant(&self) -> bool {
        self.tag != FamilyTag::KleinGordon && self.kernel_exponent() == 0.0
    }
}

/// `base^exponent` with `0^0 = 1`.
fn pow0(base: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        1.0
    } else {
        base.max(0.0).powf(exponent)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `K(xi)` for `xi` given as `m` consecutive `d`-vectors.
pub fn kernel(family: &Family, xi: &[f64]) -> f64 {
    let (m, d) = (family.m, family.d);
    debug_assert_eq!(xi.len(), m * d);
    let v = |j: usize| &xi[j * d..(j + 1) * d];
    match family.tag {
        FamilyTag::Schrodinger => {
            let mut s = 0.0;
            for i in 0..m {
                for j in i + 1..m {
                    s += v(i).iter().zip(v(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                }
            }
            pow0(s, family.kernel_exponent())
        }
        FamilyTag::Wave => {
            let mut s = 0.0;
            for i in 0..m {
                for j in i + 1..m {
                    s += norm(v(i)) * norm(v(j)) - dot(v(i), v(j));
                }
            }
            pow0(s, family.kernel_exponent())
        }
        FamilyTag::KleinGordon => {
            let pp = kg_phi(norm(v(0))) * kg_phi(norm(v(1))) - dot(v(0), v(1));
            pow0(pp - 1.0, family.kernel_exponent()) / (pp + 1.0).sqrt()
        }
    }
}

/// Surface area `|S^k|` of the unit `k`-sphere in `R^{k+1}`.
pub fn sphere_area(k: usize) -> f64 {
    // |S^k| = 2 pi / (k - 1) |S^{k-2}|
    let mut area = if k % 2 == 0 { 2.0 } else { 2.0 * PI };
    let mut j = if k % 2 == 0 { 0 } else { 1 };
    while j < k {
        j += 2;
        area *= 2.0 * PI / (j - 1) as f64;
    }
    area
}

/// `B(n, y)` for a positive integer `n`.
pub fn beta_int(n: usize, y: f64) -> f64 {
    // B(n, y) = (n-1)! / (y (y+1) ... (y+n-1))
    let mut b = 1.0 / y;
    for k in 1..n {
        b *= k as f64 / (y + k as f64);
    }
    b
}

/// `S(m, d) = |S^{(m-1)d-1}| / (2 m^{(dm-2)/2} (2 pi)^{(2m-1)d-1})`.
pub fn schrodinger_s(m: usize, d: usize) -> f64 {
    let (mf, df) = (m as f64, d as f64);
    sphere_area((m - 1) * d - 1)
        / (2.0 * mf.powf((df * mf - 2.0) / 2.0) * (2.0 * PI).powi(((2 * m - 1) * d - 1) as i32))
}

/// `beta(m) = ((d-1)(m-1) - 2) / 2`.
pub fn wave_beta(m: usize, d: usize) -> f64 {
    0.5 * ((d as f64 - 1.0) * (m as f64 - 1.0) - 2.0)
}

/// `A(m, d)` of the wave mass formula.
pub fn wave_a(m: usize, d: usize) -> f64 {
    let s = sphere_area(d - 1);
    if m == 2 {
        return s / 2f64.powi(d as i32 - 2);
    }
    let prod: f64 = (2..m).map(|j| beta_int(d - 1, wave_beta(j, d) + 1.0)).product();
    s.powi(m as i32 - 1) / 2f64.powf(2.0 * wave_beta(m, d) + 1.0) * prod
}

/// `W(m, d) = 2^beta A(m, d) / (2 pi)^{(2m-1)d-1}`.
pub fn wave_w(m: usize, d: usize) -> f64 {
    2f64.powf(wave_beta(m, d)) * wave_a(m, d) / (2.0 * PI).powi(((2 * m - 1) * d - 1) as i32)
}

/// Constant in front of `I_2` for Klein-Gordon.
pub fn kg_constant(d: usize) -> f64 {
    sphere_area(d - 1) / (2f64.powf((d as f64 - 1.0) / 2.0) * (2.0 * PI).powi(3 * d as i32 - 1))
}

/// Sharp constant of `|(-Delta)^{(2-d)/4} |u|^2|_{L^2}^2 <= c ||f||^4`.
pub fn ozawa_tsutsumi(d: usize) -> f64 {
    sphere_area(d - 1) / (4.0 * (2.0 * PI).powi(d as i32 - 1))
}

/// Schrödinger Strichartz constant `C_{p,q}` in dimension `d`.
pub fn strichartz_schrodinger(p: u32, q: u32, d: usize) -> Result<f64> {
    match (p, q, d) {
        (6, 6, 1) => Ok(12f64.powf(-1.0 / 12.0)),
        (8, 4, 1) => Ok(2f64.powf(-0.25)),
        (4, 4, 2) => Ok(2f64.powf(-0.5)),
        _ => Err(Error::Inadmissible(format!("no sharp constant for (p, q, d) = ({p}, {q}, {d})"))),
    }
}

/// Wave Strichartz constant `C_p` (`d = 2` for `p = 6`, `d = 3` for `p = 4`).
pub fn strichartz_wave(p: u32, d: usize) -> Result<f64> {
    match (p, d) {
        (4, 3) => Ok((2.0 * PI).powf(-0.25)),
        (6, 2) => Ok((2.0 * PI).powf(-1.0 / 6.0)),
        _ => Err(Error::Inadmissible(format!("no sharp wave constant for (p, d) = ({p}, {d})"))),
    }
}

/// Klein-Gordon Strichartz constant `C_d`.
pub fn strichartz_kg(d: usize) -> Result<f64> {
    match d {
        2 => Ok(2f64.powf(-0.25)),
        3 => Ok((2.0 * PI).powf(-0.25)),
        _ => Err(Error::Inadmissible(format!("no sharp Klein-Gordon constant for d = {d}"))),
    }
}

/// Pointwise bound `C~_d` on the Klein-Gordon kernel.
pub fn kg_kernel_bound(d: usize) -> Result<f64> {
    match d {
        2 => Ok(std::f64::consts::FRAC_1_SQRT_2),
        3 => Ok(1.0),
        _ => Err(Error::Inadmissible(format!("no kernel bound for d = {d}"))),
    }
}

/// Every named constant relevant to one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsTable {
    pub family: Family,
    pub sphere_area: f64,
    pub kernel_exponent: f64,
    /// `S(m, d)`, `W(m, d)` or the Klein-Gordon constant: the factor on `I_m`.
    pub flow_constant: f64,
    pub beta: Option<f64>,
    pub a: Option<f64>,
    pub beta_factors: Vec<f64>,
    pub strichartz: Option<f64>,
    pub kernel_bound: Option<f64>,
    pub ozawa_tsutsumi: Option<f64>,
}

/// Constants for a family; `pq` selects the Strichartz constant, given as
/// `(p, q)` for Schrödinger and `(p, _)` for wave.
pub fn constants(family: &Family, pq: Option<(u32, u32)>) -> Result<ConstantsTable> {
    let Family { tag, m, d } = *family;
    Family::new(tag, m, d)?;
    let mut table = ConstantsTable {
        family: *family,
        sphere_area: sphere_area(d - 1),
        kernel_exponent: family.kernel_exponent(),
        flow_constant: 0.0,
        beta: None,
        a: None,
        beta_factors: Vec::new(),
        strichartz: None,
        kernel_bound: None,
        ozawa_tsutsumi: None,
    };
    match tag {
        FamilyTag::Schrodinger => {
            table.flow_constant = schrodinger_s(m, d);
            if d >= 2 {
                table.ozawa_tsutsumi = Some(ozawa_tsutsumi(d));
            }
            if let Some((p, q)) = pq {
                table.strichartz = Some(strichartz_schrodinger(p, q, d)?);
            }
        }
        FamilyTag::Wave => {
            table.flow_constant = wave_w(m, d);
            table.beta = Some(wave_beta(m, d));
            table.a = Some(wave_a(m, d));
            table.beta_factors = (2..m.max(2)).map(|j| beta_int(d - 1, wave_beta(j, d) + 1.0)).collect();
            if let Some((p, _)) = pq {
                table.strichartz = Some(strichartz_wave(p, d)?);
            }
        }
        FamilyTag::KleinGordon => {
            table.flow_constant = kg_constant(d);
            table.strichartz = strichartz_kg(d).ok();
            table.kernel_bound = kg_kernel_bound(d).ok();
        }
    }
    Ok(table)
}

/// Largest `m * d` accepted by the tensor-grid quadrature.
pub const MAX_TENSOR_DIM: usize = 6;

/// Upper bound on kernel evaluations for one tensor-grid sum.
const EVAL_BUDGET: f64 = 6e8;

/// Amplitudes below this fraction of the maximum are dropped from the sum.
const SUPPORT_REL: f64 = 1e-13;

/// Result of a tensor-grid quadrature with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub coarsening: usize,
}

/// `|Pi(e^{-t omega(D)} f)^|^2` per lattice point, i.e. the squared one-body
/// amplitude of the family.
pub fn amplitude_sq(fhat: &Field, tag: FamilyTag, t: f64) -> Result<Vec<f64>> {
    if fhat.side() != Side::Frequency {
        return Err(Error::WrongSide { expected: "frequency" });
    }
    let g = *fhat.grid();
    Ok(fhat
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let mut xi = [0.0; 3];
            g.freq_point(i, &mut xi[..g.d()]);
            let r = norm(&xi[..g.d()]);
            let (weight, rate) = match tag {
                FamilyTag::Schrodinger => (1.0, r * r),
                FamilyTag::Wave => (r, r),
                FamilyTag::KleinGordon => (kg_phi(r), kg_phi(r)),
            };
            v.norm_sqr() * weight * (-2.0 * t * rate).exp()
        })
        .collect())
}

struct Support {
    points: Vec<f64>,
    weights: Vec<f64>,
    cell: f64,
}

fn support(fhat: &Field, amp: &[f64], coarsening: usize) -> Support {
    let g = fhat.grid();
    let d = g.d();
    let max = amp.iter().cloned().fold(0.0, f64::max);
    let zero = g.zero_freq_index() as isize;
    let mut idx = [0usize; 3];
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (i, &a) in amp.iter().enumerate() {
        if a <= SUPPORT_REL * max || a == 0.0 {
            continue;
        }
        g.unravel(i, &mut idx[..d]);
        if idx[..d].iter().any(|&k| (k as isize - zero).rem_euclid(coarsening as isize) != 0) {
            continue;
        }
        let mut xi = [0.0; 3];
        g.freq_point(i, &mut xi[..d]);
        points.extend_from_slice(&xi[..d]);
        weights.push(a);
    }
    Support { points, weights, cell: (g.freq_spacing() * coarsening as f64).powi(d as i32) }
}

fn tensor_sum(s: &Support, m: usize, d: usize, kern: &(dyn Fn(&[f64]) -> f64 + Sync)) -> f64 {
    let n = s.weights.len();
    let partial: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut xi = vec![0.0; m * d];
            xi[..d].copy_from_slice(&s.points[i * d..(i + 1) * d]);
            let wi = s.weights[i];
            let mut acc = 0.0;
            match m {
                2 => {
                    for j in 0..n {
                        xi[d..].copy_from_slice(&s.points[j * d..(j + 1) * d]);
                        acc += s.weights[j] * kern(&xi);
                    }
                }
                3 => {
                    for j in 0..n {
                        xi[d..2 * d].copy_from_slice(&s.points[j * d..(j + 1) * d]);
                        let wj = s.weights[j];
                        let mut inner = 0.0;
                        for k in 0..n {
                            xi[2 * d..].copy_from_slice(&s.points[k * d..(k + 1) * d]);
                            inner += s.weights[k] * kern(&xi);
                        }
                        acc += wj * inner;
                    }
                }
                _ => unreachable!("degree checked by caller"),
            }
            wi * acc
        })
        .collect();
    partial.iter().sum::<f64>() * s.cell.powi(m as i32)
}

/// `int prod_j w(xi_j) k(xi) dxi` over `m` copies of the lattice, with the
/// one-body weights `w` sampled on `fhat`'s grid.
///
/// The lattice is coarsened until the sum fits the evaluation budget; the
/// error estimate is the change when the coarsening factor is doubled.
pub fn weighted_tensor_integral(
    fhat: &Field,
    weights: &[f64],
    m: usize,
    kern: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<Quadrature> {
    let d = fhat.grid().d();
    if m * d > MAX_TENSOR_DIM || !(2..=3).contains(&m) {
        let points = (fhat.grid().n() as u128).pow((m * d) as u32);
        return Err(Error::BudgetExceeded { points, budget: 1 << 24 });
    }
    let mut c = 1;
    let mut fine = support(fhat, weights, c);
    while (fine.weights.len() as f64).powi(m as i32) > EVAL_BUDGET {
        c *= 2;
        fine = support(fhat, weights, c);
    }
    let value = tensor_sum(&fine, m, d, kern);
    let coarse = support(fhat, weights, 2 * c);
    let error = if coarse.weights.is_empty() {
        value.abs()
    } else {
        (value - tensor_sum(&coarse, m, d, kern)).abs()
    };
    Ok(Quadrature { value, error, coarsening: c })
}

/// `I_m(e^{-t omega(D)} f)` for the family, by tensor-grid quadrature.
///
/// Constant kernels factorise into the `m`-th power of a single lattice sum,
/// which is evaluated exactly.
pub fn i_m(fhat: &Field, family: &Family, t: f64) -> Result<Quadrature> {
    if fhat.grid().d() != family.d {
        return Err(Error::GridMismatch(format!(
            "field of dimension {} for family dimension {}",
            fhat.grid().d(),
            family.d
        )));
    }
    let amp = amplitude_sq(fhat, family.tag, t)?;
    if family.kernel_is_constant() {
        let one: f64 = amp.iter().sum::<f64>() * fhat.grid().freq_cell_volume();
        return Ok(Quadrature { value: one.powi(family.m as i32), error: 0.0, coarsening: 1 });
    }
    let fam = *family;
    weighted_tensor_integral(fhat, &amp, family.m, &move |xi| kernel(&fam, xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_extremiser, Extremiser, GridSpec};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn admissibility() {
        assert!(Family::schrodinger(2, 1).is_err());
        assert!(Family::schrodinger(3, 1).is_ok());
        assert!(Family::wave(2, 2).is_err());
        assert!(Family::wave(3, 2).is_ok());
        assert!(Family::klein_gordon(1).is_err());
        assert!(Family::new(FamilyTag::KleinGordon, 3, 2).is_err());
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(0), 2.0);
        assert_relative_eq!(sphere_area(1), 2.0 * PI);
        assert_relative_eq!(sphere_area(2), 4.0 * PI);
        assert_relative_eq!(sphere_area(3), 2.0 * PI * PI);
        assert_relative_eq!(sphere_area(4), 8.0 * PI * PI / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn printed_constants() {
        assert_relative_eq!(schrodinger_s(2, 2), 1.0 / (4.0 * (2.0 * PI).powi(4)), max_relative = 1e-15);
        assert_relative_eq!(schrodinger_s(2, 2) * (2.0 * PI).powi(4), 2f64.powf(-0.5).powi(4), max_relative = 1e-15);
        assert_relative_eq!(wave_a(2, 3), 2.0 * PI, max_relative = 1e-15);
        assert_eq!(wave_beta(2, 3), 0.0);
        assert_eq!(wave_beta(3, 2), 0.0);
        assert_relative_eq!(wave_a(3, 2), 4.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(beta_int(1, 0.5), 2.0);
        assert_relative_eq!(beta_int(3, 2.5), statrs::function::beta::beta(3.0, 2.5), max_relative = 1e-12);
        assert_relative_eq!(ozawa_tsutsumi(2), PI / 2.0 / (2.0 * PI), max_relative = 1e-15);
        let t = constants(&Family::wave(2, 3).unwrap(), Some((4, 0))).unwrap();
        assert_relative_eq!(t.flow_constant, 2.0 * PI / (2.0 * PI).powi(8), max_relative = 1e-15);
        assert_relative_eq!(t.strichartz.unwrap(), (2.0 * PI).powf(-0.25));
        assert!(constants(&Family::klein_gordon(2).unwrap(), None).unwrap().kernel_bound.is_some());
        assert!(strichartz_schrodinger(4, 4, 1).is_err());
    }

    #[test]
    fn wave_constants_match_strichartz_for_zero_beta() {
        // with beta = 0, W (2 pi)^{dm} equals C^{2m}
        let w = wave_w(2, 3) * (2.0 * PI).powi(6);
        assert_relative_eq!(w, strichartz_wave(4, 3).unwrap().powi(4), max_relative = 1e-14);
        let w = wave_w(3, 2) * (2.0 * PI).powi(6);
        assert_relative_eq!(w, strichartz_wave(6, 2).unwrap().powi(6), max_relative = 1e-14);
    }

    #[test]
    fn kernel_examples() {
        let s22 = Family::schrodinger(2, 2).unwrap();
        assert_eq!(kernel(&s22, &[1.0, 2.0, -3.0, 0.5]), 1.0);
        let kg2 = Family::klein_gordon(2).unwrap();
        assert_relative_eq!(kernel(&kg2, &[0.0; 4]), std::f64::consts::FRAC_1_SQRT_2);
        let w23 = Family::wave(2, 3).unwrap();
        assert_eq!(kernel(&w23, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]), 1.0);
        let s23 = Family::schrodinger(2, 3).unwrap();
        assert_relative_eq!(kernel(&s23, &[1.0, 0.0, 0.0, -1.0, 0.0, 0.0]), 2.0);
        let kg3 = Family::klein_gordon(3).unwrap();
        assert_eq!(kernel(&kg3, &[0.0; 6]), 0.0);
    }

    #[test]
    fn i2_plancherel_for_constant_kernel() {
        let grid = GridSpec::new(2, 64, 12.0).unwrap();
        let fhat = make_extremiser(Extremiser::Gaussian { sigma: 1.0 }, grid).unwrap();
        let fam = Family::schrodinger(2, 2).unwrap();
        let q = i_m(&fhat, &fam, 0.0).unwrap();
        let f = fhat.to_space().unwrap();
        assert_relative_eq!(q.value, (2.0 * PI).powi(4) * f.l2_norm_sq().powi(2), max_relative = 1e-10);
        // the generic quadrature agrees with the factorised sum
        let amp = amplitude_sq(&fhat, FamilyTag::Schrodinger, 0.0).unwrap();
        let generic = weighted_tensor_integral(&fhat, &amp, 2, &|_| 1.0).unwrap();
        assert_relative_eq!(generic.value, q.value, max_relative = 1e-3);
        let zero = Field::zeros(grid, Side::Frequency);
        assert_eq!(i_m(&zero, &fam, 0.0).unwrap().value, 0.0);
    }

    #[test]
    fn wave_i2_is_sobolev_power() {
        let grid = GridSpec::new(3, 128, 32.0).unwrap();
        let fhat = make_extremiser(Extremiser::Wave, grid).unwrap();
        let q = i_m(&fhat, &Family::wave(2, 3).unwrap(), 0.0).unwrap();
        let h = crate::norms::sobolev_norm(&fhat, 0.5, crate::norms::SobolevVariant::Homogeneous).unwrap();
        assert_relative_eq!(q.value, (2.0 * PI).powi(6) * h.powi(4), max_relative = 2e-2);
        assert_relative_eq!(q.value, (2.0 * PI).powi(6) / (64.0 * PI.powi(4)), max_relative = 2e-2);
    }

    #[test]
    fn kg_quadrature_converges() {
        let grid = GridSpec::new(2, 128, 64.0).unwrap();
        let fhat = make_extremiser(Extremiser::KgSequence { a: 5.0 }, grid).unwrap();
        let q = i_m(&fhat, &Family::klein_gordon(2).unwrap(), 0.1).unwrap();
        assert!(q.value > 0.0);
        assert!(q.error < 1e-2 * q.value, "{q:?}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vecs(len: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-3.0f64..3.0, len)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn kernels_nonnegative_and_symmetric(a in vecs(3), b in vecs(3), c in vecs(3)) {
                for fam in [Family::schrodinger(3, 2).unwrap(), Family::wave(3, 3).unwrap()] {
                    let d = fam.d;
                    let xi: Vec<f64> = [&a[..d], &b[..d], &c[..d]].concat();
                    let perm: Vec<f64> = [&c[..d], &a[..d], &b[..d]].concat();
                    let k = kernel(&fam, &xi);
                    prop_assert!(k >= 0.0);
                    prop_assert!((k - kernel(&fam, &perm)).abs() <= 1e-10 * (1.0 + k));
                }
                for d in [2usize, 3] {
                    let fam = Family::klein_gordon(d).unwrap();
                    let xi: Vec<f64> = [&a[..d], &b[..d]].concat();
                    let sw: Vec<f64> = [&b[..d], &a[..d]].concat();
                    let k = kernel(&fam, &xi);
                    prop_assert!(k >= 0.0);
                    prop_assert!(k <= kg_kernel_bound(d).unwrap() + 1e-12);
                    prop_assert!((k - kernel(&fam, &sw)).abs() <= 1e-12);
                }
            }

            #[test]
            fn i_m_decreasing_in_t_and_homogeneous(scale in 0.1f64..3.0, t in 0.0f64..1.0) {
                let grid = GridSpec::new(2, 32, 8.0).unwrap();
                let fhat = Field::from_freq_fn(grid, |xi| {
                    Complex64::new((-(xi[0] - 0.5).powi(2) - xi[1] * xi[1]).exp(), 0.2 * xi[1])
                }).unwrap();
                let fam = Family::klein_gordon(2).unwrap();
                let a = i_m(&fhat, &fam, t).unwrap().value;
                let b = i_m(&fhat, &fam, t + 0.1).unwrap().value;
                prop_assert!(b <= a);
                let scaled = i_m(&fhat.scale(Complex64::new(scale, 0.0)), &fam, t).unwrap().value;
                prop_assert!((scaled - scale.powi(4) * a).abs() <= 1e-10 * scaled.abs().max(1e-300));
            }
        }
    }
}
