//! General-exponent Strichartz flow quantity, the integration-by-parts
//! formula for its derivative, and an empirical search for the smallest
//! constant making a corpus of traces nonincreasing.

use crate::error::{Error, Result};
use crate::flows::{self, check_cm_values, Point, QTrace, TraceSpec};
use crate::multilinear::FamilyTag;
use crate::norms::{self, MixedNormSpec};
use crate::spectral::{self, Field, Propagator, TimeGrid};
use num_complex::Complex64;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// A Lebesgue exponent in `[1, inf]`, finite values kept as exact rationals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(Ratio<i64>),
    Infinite,
}

impl Exponent {
    pub fn integer(n: i64) -> Self {
        Exponent::Finite(Ratio::from_integer(n))
    }

    pub fn value(&self) -> f64 {
        match self {
            Exponent::Finite(r) => *r.numer() as f64 / *r.denom() as f64,
            Exponent::Infinite => f64::INFINITY,
        }
    }

    /// `1 / self`, exactly.
    fn reciprocal(&self) -> Ratio<i64> {
        match self {
            Exponent::Finite(r) => r.recip(),
            Exponent::Infinite => Ratio::from_integer(0),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t, "inf" | "infinity" | "∞") {
            return Ok(Exponent::Infinite);
        }
        let r = Ratio::<i64>::from_str(t).map_err(|e| Error::Parse(format!("exponent {t}: {e}")))?;
        if *r.denom() == 0 || r <= Ratio::from_integer(0) {
            return Err(Error::InvalidExponent(t.to_string()));
        }
        Ok(Exponent::Finite(r))
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(r) => write!(f, "{r}"),
            Exponent::Infinite => write!(f, "inf"),
        }
    }
}

/// `(p, q, d)` with `2/p + d/q = d/2`, `2 <= p, q <= inf` and
/// `(p, q, d) != (2, inf, 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissibleTriple {
    pub p: Exponent,
    pub q: Exponent,
    pub d: usize,
}

/// Exact admissibility check.
pub fn admissible(p: Exponent, q: Exponent, d: usize) -> bool {
    let two = Ratio::from_integer(2);
    let at_least_two = |e: Exponent| match e {
        Exponent::Finite(r) => r >= two,
        Exponent::Infinite => true,
    };
    if d == 0 || !at_least_two(p) || !at_least_two(q) {
        return false;
    }
    if p == Exponent::integer(2) && q == Exponent::Infinite && d == 2 {
        return false;
    }
    let d = Ratio::from_integer(d as i64);
    two * p.reciprocal() + d * q.reciprocal() == d / two
}

impl AdmissibleTriple {
    pub fn new(p: Exponent, q: Exponent, d: usize) -> Result<Self> {
        if !admissible(p, q, d) {
            return Err(Error::Inadmissible(format!("(p, q, d) = ({p}, {q}, {d})")));
        }
        Ok(AdmissibleTriple { p, q, d })
    }

    /// Finite `p` and `q` as floats; the flow quantities need both.
    fn finite(&self) -> Result<(f64, f64)> {
        let (p, q) = (self.p.value(), self.q.value());
        if !p.is_finite() || !q.is_finite() {
            return Err(Error::InvalidExponent(format!(
                "({}, {}) has an infinite exponent; the flow quantity needs finite p and q",
                self.p, self.q
            )));
        }
        Ok((p, q))
    }
}

/// Largest grid dimension handled by the general-exponent routines.
pub const MAX_DIM: usize = 2;

fn check_field(f: &Field, triple: &AdmissibleTriple) -> Result<()> {
    if f.grid().d() != triple.d {
        return Err(Error::GridMismatch(format!(
            "field of dimension {} for d = {}",
            f.grid().d(),
            triple.d
        )));
    }
    if triple.d > MAX_DIM {
        return Err(Error::InvalidParameter(format!("d = {} exceeds {MAX_DIM}", triple.d)));
    }
    Ok(())
}

/// The two terms `(||u_0||_2^2, ||u||^p_{L^p_s L^q_x})` and the tail uncertainty.
fn terms(fhat: &Field, p: f64, q: f64, s_grid: &TimeGrid, t: f64) -> Result<(f64, f64, f64)> {
    let d = fhat.grid().d() as i32;
    let g = flows::flowed(fhat, FamilyTag::Schrodinger, t)?;
    let l2 = g.l2_norm_sq() / (2.0 * PI).powi(d);
    let n = norms::mixed_norm_of_evolution(&g, Propagator::Schrodinger, s_grid, MixedNormSpec::new(p, q)?)?;
    Ok((l2, n.power(), n.tail_uncertainty))
}

/// `c^p ||e^{t Delta} f||_2^p - ||e^{is Delta} e^{t Delta} f||^p_{L^p_s L^q_x}`.
pub fn q_general(f: &Field, triple: &AdmissibleTriple, c: f64, t: &TimeGrid) -> Result<QTrace> {
    flows::check_t_grid(t)?;
    check_field(f, triple)?;
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("c = {c} must be positive")));
    }
    let (p, q) = triple.finite()?;
    let fhat = f.to_frequency()?;
    let s_grid = flows::shared_s_grid(&fhat, FamilyTag::Schrodinger, t)?;
    let points = flows::compute_points(t, |tt| {
        let (l2, second, err) = terms(&fhat, p, q, &s_grid, tt)?;
        Ok(Point { first: c.powf(p) * l2.powf(0.5 * p), second, err })
    })?;
    let spec = TraceSpec {
        theorem: format!("general_strichartz(p={},q={},d={})", triple.p, triple.q, triple.d),
        constants: BTreeMap::from([("c".to_string(), c)]),
        grid: *f.grid(),
        s_grid,
    };
    flows::assemble(spec, t, points)
}

/// Pieces of the derivative formula at one `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QPrime {
    pub t: f64,
    /// `p^{-1} Q'(t)` times `p`, i.e. `Q'(t)` itself.
    pub value: f64,
    /// `int (int |u|^q)^{p/q-1} { int |u|^{q-2}|grad u|^2 + (q-2)/4 int |u|^{q-4}|grad |u|^2|^2 } ds`
    pub positive: f64,
    /// The `int |u|^{q-2}|grad u|^2` part of `positive` alone.
    pub gradient_part: f64,
    /// `c^p ||u_0||_2^{p-2} ||grad u_0||_2^2`
    pub negative: f64,
    /// `int (int |u|^q)^{(p-2)/q} (int |grad u|^q)^{2/q} ds`
    pub holder_middle: f64,
    /// Tail uncertainty of the `s` integrals, in units of `Q'`.
    pub tail_uncertainty: f64,
    /// Share of the `|grad |u|^2|^2` integral coming from points where
    /// `|u|^2` is within ten times the regularisation floor.
    pub floor_share: f64,
}

impl QPrime {
    /// `gradient_part <= holder_middle` and `positive <= (q-1) gradient_part`,
    /// each up to `rel_tol`.
    pub fn holder_chain_holds(&self, q: f64, rel_tol: f64) -> bool {
        let first = self.gradient_part <= self.holder_middle * (1.0 + rel_tol);
        let second = self.positive <= (q - 1.0).max(1.0) * self.gradient_part * (1.0 + rel_tol);
        first && second
    }
}

/// Regularisation floor relative to `max |u|^2`.
const FLOOR_REL: f64 = 1e-12;

/// Largest tolerated [`QPrime::floor_share`].
const FLOOR_SHARE_LIMIT: f64 = 1e-3;

struct SliceIntegrals {
    lq: f64,
    grad: f64,
    modulus: f64,
    grad_lq: f64,
    near_floor: f64,
}

/// `Q'(t)` from the integration-by-parts formula, with spectral gradients.
pub fn qprime_identity(f: &Field, triple: &AdmissibleTriple, c: f64, t: f64) -> Result<QPrime> {
    check_field(f, triple)?;
    let (p, q) = triple.finite()?;
    let fhat = f.to_frequency()?;
    let s_grid = spectral::default_time_grid(&flows::flowed(&fhat, FamilyTag::Schrodinger, t)?, Propagator::Schrodinger)?;
    qprime_on_grid(&fhat, p, q, c, t, &s_grid)
}

fn qprime_on_grid(fhat: &Field, p: f64, q: f64, c: f64, t: f64, s_grid: &TimeGrid) -> Result<QPrime> {
    let grid = *fhat.grid();
    let d = grid.d();
    let g = flows::flowed(fhat, FamilyTag::Schrodinger, t)?;
    let freq_cell = grid.freq_cell_volume() / (2.0 * PI).powi(d as i32);
    let mut xi = vec![0.0; grid.len() * d];
    for (i, chunk) in xi.chunks_mut(d).enumerate() {
        grid.freq_point(i, chunk);
    }
    let l2: f64 = g.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * freq_cell;
    let grad0: f64 = g
        .values()
        .iter()
        .zip(xi.chunks(d))
        .map(|(v, x)| v.norm_sqr() * x.iter().map(|a| a * a).sum::<f64>())
        .sum::<f64>()
        * freq_cell;
    let negative = c.powf(p) * l2.powf(0.5 * p - 1.0) * grad0;
    if l2 == 0.0 {
        return Ok(QPrime {
            t,
            value: 0.0,
            positive: 0.0,
            gradient_part: 0.0,
            negative: 0.0,
            holder_middle: 0.0,
            tail_uncertainty: 0.0,
            floor_share: 0.0,
        });
    }
    spectral::check_time_grid(&g, Propagator::Schrodinger, s_grid)?;
    let max_u2 = g.to_space()?.values().iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let plan = spectral::plan_for(&grid);
    let cell = grid.cell_volume();
    let slices: Vec<SliceIntegrals> = (0..s_grid.count)
        .into_par_iter()
        .map(|k| {
            let s = s_grid.at(k);
            let evolved: Vec<Complex64> = g
                .values()
                .iter()
                .zip(xi.chunks(d))
                .map(|(v, x)| {
                    let r = spectral::norm(x);
                    v * Complex64::from_polar(1.0, Propagator::Schrodinger.phase(s, r))
                })
                .collect();
            let mut u = evolved.clone();
            spectral::inverse_in_place(&grid, &plan, &mut u);
            let grads: Vec<Vec<Complex64>> = (0..d)
                .map(|a| {
                    let mut buf: Vec<Complex64> =
                        evolved.iter().zip(xi.chunks(d)).map(|(v, x)| v * Complex64::new(0.0, x[a])).collect();
                    spectral::inverse_in_place(&grid, &plan, &mut buf);
                    buf
                })
                .collect();
            let delta = FLOOR_REL * max_u2;
            let mut acc = SliceIntegrals { lq: 0.0, grad: 0.0, modulus: 0.0, grad_lq: 0.0, near_floor: 0.0 };
            for (i, ui) in u.iter().enumerate() {
                let m2 = ui.norm_sqr();
                let mut grad_sq = 0.0;
                let mut mod_grad_sq = 0.0;
                for ga in &grads {
                    grad_sq += ga[i].norm_sqr();
                    // d|u|^2 = 2 Re(conj(u) du)
                    mod_grad_sq += (2.0 * (ui.conj() * ga[i]).re).powi(2);
                }
                acc.lq += m2.powf(0.5 * q);
                acc.grad += m2.powf(0.5 * q - 1.0) * grad_sq;
                let term = m2.powf(0.5 * q - 1.0) * mod_grad_sq / (m2 + delta);
                acc.modulus += term;
                if m2 < 10.0 * delta {
                    acc.near_floor += term;
                }
                acc.grad_lq += grad_sq.powf(0.5 * q);
            }
            acc.lq *= cell;
            acc.grad *= cell;
            acc.modulus *= cell;
            acc.grad_lq *= cell;
            acc.near_floor *= cell;
            acc
        })
        .collect();
    let weight = |sl: &SliceIntegrals| if sl.lq > 0.0 { sl.lq.powf(p / q - 1.0) } else { 0.0 };
    let pos_profile: Vec<f64> =
        slices.iter().map(|sl| weight(sl) * (sl.grad + 0.25 * (q - 2.0) * sl.modulus)).collect();
    let grad_profile: Vec<f64> = slices.iter().map(|sl| weight(sl) * sl.grad).collect();
    let mid_profile: Vec<f64> =
        slices.iter().map(|sl| sl.lq.max(0.0).powf((p - 2.0) / q) * sl.grad_lq.max(0.0).powf(2.0 / q)).collect();
    let pos = norms::integrate_with_tail(s_grid, &pos_profile);
    let grad = norms::integrate_with_tail(s_grid, &grad_profile);
    let mid = norms::integrate_with_tail(s_grid, &mid_profile);
    let modulus_total: f64 = slices.iter().map(|sl| weight(sl) * sl.modulus).sum();
    let floor_total: f64 = slices.iter().map(|sl| weight(sl) * sl.near_floor).sum();
    let floor_share = if modulus_total > 0.0 { floor_total / modulus_total } else { 0.0 };
    if floor_share > FLOOR_SHARE_LIMIT {
        return Err(Error::Unresolved { bound: floor_share, limit: FLOOR_SHARE_LIMIT });
    }
    let positive = pos.windowed + pos.tail;
    Ok(QPrime {
        t,
        value: p * (positive - negative),
        positive,
        gradient_part: grad.windowed + grad.tail,
        negative,
        holder_middle: mid.windowed + mid.tail,
        tail_uncertainty: p * pos.tail_uncertainty,
        floor_share,
    })
}

/// `Q'(t)` from the formula next to a centred difference of `Q`, both on the
/// same `s` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityCheck {
    pub identity: QPrime,
    pub finite_difference: f64,
    pub step: f64,
    /// `|identity - difference| / |difference|`
    pub rel_error: f64,
}

/// Step of the centred difference.
pub const FD_STEP: f64 = 1e-2;

pub fn duality_check(f: &Field, triple: &AdmissibleTriple, c: f64, t: f64) -> Result<DualityCheck> {
    check_field(f, triple)?;
    let (p, q) = triple.finite()?;
    if t < FD_STEP {
        return Err(Error::InvalidParameter(format!("t = {t} is below the difference step {FD_STEP}")));
    }
    let fhat = f.to_frequency()?;
    let s_grid =
        spectral::default_time_grid(&flows::flowed(&fhat, FamilyTag::Schrodinger, t - FD_STEP)?, Propagator::Schrodinger)?;
    let q_at = |tt: f64| -> Result<f64> {
        let (l2, second, _) = terms(&fhat, p, q, &s_grid, tt)?;
        Ok(c.powf(p) * l2.powf(0.5 * p) - second)
    };
    let fd = (q_at(t + FD_STEP)? - q_at(t - FD_STEP)?) / (2.0 * FD_STEP);
    let identity = qprime_on_grid(&fhat, p, q, c, t, &s_grid)?;
    let rel_error = (identity.value - fd).abs() / fd.abs().max(f64::MIN_POSITIVE);
    Ok(DualityCheck { identity, finite_difference: fd, step: FD_STEP, rel_error })
}

/// Outcome of the bisection for the smallest monotone-feasible constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindCReport {
    pub c: f64,
    pub bracket: (f64, f64),
    pub corpus: Vec<String>,
    pub rel_tol: f64,
    pub iterations: usize,
    pub note: String,
}

/// Relative width at which the bisection stops.
const FIND_C_TOL: f64 = 1e-4;

/// Smallest `c` in `bracket` for which every corpus trace is nonincreasing
/// within the trace tolerance. Feasibility is monotone in `c` because the
/// first term is nonincreasing in `t`.
pub fn find_c(
    corpus: &[(String, Field)],
    triple: &AdmissibleTriple,
    t: &TimeGrid,
    bracket: (f64, f64),
    rel_tol: f64,
) -> Result<FindCReport> {
    flows::check_t_grid(t)?;
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("bracket ({lo}, {hi}) is not increasing and positive")));
    }
    let (p, _) = triple.finite()?;
    // one trace per datum with c = 1, so that Q_c = c^p * first - second
    let traces: Vec<QTrace> = corpus.iter().map(|(_, f)| q_general(f, triple, 1.0, t)).collect::<Result<_>>()?;
    let feasible = |c: f64| {
        traces.iter().all(|tr| {
            let q: Vec<f64> = tr.first.iter().zip(&tr.second).map(|(a, b)| c.powf(p) * a - b).collect();
            check_cm_values(&q, &tr.err_bound, tr.t.step, 1, rel_tol).passes_to(1)
        })
    };
    let report = |c: f64, iterations: usize| FindCReport {
        c,
        bracket,
        corpus: corpus.iter().map(|(name, _)| name.clone()).collect(),
        rel_tol,
        iterations,
        note: "empirical lower evidence, not a proof".into(),
    };
    if feasible(lo) {
        return Ok(report(lo, 0));
    }
    if !feasible(hi) {
        return Err(Error::BracketExhausted { upper: hi });
    }
    let (mut a, mut b) = (lo, hi);
    let mut iterations = 0;
    while b - a > FIND_C_TOL * b {
        let mid = 0.5 * (a + b);
        if feasible(mid) {
            b = mid;
        } else {
            a = mid;
        }
        iterations += 1;
    }
    Ok(report(b, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_mixture, Mixture};
    use crate::multilinear::strichartz_schrodinger;
    use crate::spectral::GridSpec;
    use proptest::prelude::*;

    fn ex(s: &str) -> Exponent {
        s.parse().unwrap()
    }

    fn short_t() -> TimeGrid {
        TimeGrid { start: 0.05, step: 0.2, count: 8 }
    }

    #[test]
    fn admissibility_examples() {
        assert!(admissible(ex("6"), ex("6"), 1));
        assert!(!admissible(ex("2"), ex("inf"), 2));
        assert!(!admissible(ex("4"), ex("4"), 3));
        assert!(admissible(ex("20/3"), ex("5"), 1));
        assert!(admissible(ex("8"), ex("4"), 1));
        assert!(admissible(ex("2"), ex("6"), 3));
        assert!(admissible(ex("inf"), ex("2"), 2));
        assert!(!admissible(ex("3/2"), ex("inf"), 1));
        assert!("0".parse::<Exponent>().is_err());
        assert!("x".parse::<Exponent>().is_err());
    }

    proptest! {
        #[test]
        fn admissible_pairs_from_q(qn in 2i64..40, qd in 1i64..12, d in 1usize..4) {
            let q = Ratio::new(qn, qd);
            prop_assume!(q >= Ratio::from_integer(2));
            // 2/p = d/2 - d/q
            let dd = Ratio::from_integer(d as i64);
            let two_over_p = dd / 2 - dd / q;
            prop_assume!(two_over_p > Ratio::from_integer(0));
            let p = Ratio::from_integer(2) / two_over_p;
            let ok = admissible(Exponent::Finite(p), Exponent::Finite(q), d);
            prop_assert_eq!(ok, p >= Ratio::from_integer(2));
            prop_assert!(!admissible(Exponent::Finite(p + Ratio::new(1, 7)), Exponent::Finite(q), d));
        }
    }

    #[test]
    fn general_matches_strichartz_trace() {
        let grid = GridSpec::new(2, 64, 16.0).unwrap();
        let f = random_mixture(2, 3, 1.5, 0.5).sample(grid).unwrap();
        let triple = AdmissibleTriple::new(ex("4"), ex("4"), 2).unwrap();
        let c = strichartz_schrodinger(4, 4, 2).unwrap();
        let a = q_general(&f, &triple, c, &short_t()).unwrap();
        let b = flows::q_strichartz(&f, 4, 4, &short_t()).unwrap().direct;
        for (x, y) in a.q.iter().zip(&b.q) {
            assert!((x - y).abs() <= 1e-8 * a.scale());
        }
        let doubled = q_general(&f, &triple, 2.0 * c, &short_t()).unwrap();
        for (x, y) in doubled.first.iter().zip(&a.first) {
            assert!((x / y - 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fractional_exponents_run() {
        let grid = GridSpec::new(1, 128, 32.0).unwrap();
        let f = Mixture::gaussian(1, 1.0).sample(grid).unwrap();
        let triple = AdmissibleTriple::new(ex("20/3"), ex("5"), 1).unwrap();
        let tr = q_general(&f, &triple, 1.0, &short_t()).unwrap();
        assert!(tr.q.iter().all(|v| v.is_finite()));
        // the energy endpoint is admissible but has no flow quantity
        let energy = AdmissibleTriple::new(ex("inf"), ex("2"), 1).unwrap();
        assert!(matches!(q_general(&f, &energy, 1.0, &short_t()), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn identity_matches_difference() {
        let grid = GridSpec::new(2, 64, 16.0).unwrap();
        let f = Mixture::gaussian(2, 1.0).sample(grid).unwrap();
        let triple = AdmissibleTriple::new(ex("4"), ex("4"), 2).unwrap();
        let chk = duality_check(&f, &triple, 1.0, 0.2).unwrap();
        assert!(chk.rel_error < 1e-2, "{chk:?}");
        assert!(chk.identity.holder_chain_holds(4.0, 1e-9));
        let g = random_mixture(1, 7, 1.5, 0.5).sample(GridSpec::new(1, 128, 32.0).unwrap()).unwrap();
        let t661 = AdmissibleTriple::new(ex("6"), ex("6"), 1).unwrap();
        let chk = duality_check(&g, &t661, 1.0, 0.3).unwrap();
        assert!(chk.rel_error < 1e-2, "{chk:?}");
        assert!(chk.identity.holder_chain_holds(6.0, 1e-9));
    }

    #[test]
    fn identity_sign_for_large_c_and_zero_data() {
        let grid = GridSpec::new(1, 128, 32.0).unwrap();
        let f = random_mixture(1, 11, 1.5, 0.5).sample(grid).unwrap();
        let triple = AdmissibleTriple::new(ex("6"), ex("6"), 1).unwrap();
        assert!(qprime_identity(&f, &triple, 3.0, 0.2).unwrap().value <= 0.0);
        let z = Field::zeros(grid, spectral::Side::Space);
        assert_eq!(qprime_identity(&z, &triple, 1.0, 0.2).unwrap().value, 0.0);
    }

    #[test]
    fn find_c_gaussian_and_lower_end() {
        let grid = GridSpec::new(2, 64, 16.0).unwrap();
        let f = Mixture::gaussian(2, 1.0).sample(grid).unwrap();
        let triple = AdmissibleTriple::new(ex("4"), ex("4"), 2).unwrap();
        let corpus = vec![("gaussian".to_string(), f)];
        let t = flows::default_t_grid();
        let r = find_c(&corpus, &triple, &t, (0.3, 2.0), flows::CM_REL_TOL).unwrap();
        let sharp = strichartz_schrodinger(4, 4, 2).unwrap();
        assert!((r.c / sharp - 1.0).abs() < 0.05, "{} vs {sharp}", r.c);
        let r = find_c(&corpus, &triple, &t, (10.0, 20.0), flows::CM_REL_TOL).unwrap();
        assert_eq!(r.c, 10.0);
        assert!(matches!(
            find_c(&corpus, &triple, &t, (0.1, 0.2), flows::CM_REL_TOL),
            Err(Error::BracketExhausted { .. })
        ));
    }
}
