//! The heat-, Poisson- and Klein-Gordon-flow quantities `Q(t)` and a finite
//! difference certificate of complete monotonicity.

use crate::error::{Error, Result};
use crate::multilinear::{self, Family, FamilyTag};
use crate::norms::{self, MixedNormSpec, SobolevVariant};
use crate::quadrature::unit_cube_power_integral;
use crate::spectral::{self, norm, Field, GridSpec, Propagator, Symbol, TimeGrid};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Sampled `t -> Q(t) = first(t) - second(t)` with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTrace {
    pub theorem: String,
    pub datum: String,
    pub t: TimeGrid,
    pub q: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub err_bound: Vec<f64>,
    pub constants: BTreeMap<String, f64>,
    pub grid: GridSpec,
    pub s_grid: TimeGrid,
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct CsvHeader {
    theorem: String,
    datum: String,
    t: TimeGrid,
    constants: BTreeMap<String, f64>,
    grid: GridSpec,
    s_grid: TimeGrid,
    seed: Option<u64>,
}

impl QTrace {
    pub fn times(&self) -> Vec<f64> {
        self.t.times()
    }

    /// Magnitude of the terms whose difference is `Q`.
    pub fn scale(&self) -> f64 {
        self.first.iter().chain(&self.second).map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `t,Q,err_bound` rows under a `# {json}` provenance line.
    pub fn to_csv(&self) -> String {
        let header = CsvHeader {
            theorem: self.theorem.clone(),
            datum: self.datum.clone(),
            t: self.t,
            constants: self.constants.clone(),
            grid: self.grid,
            s_grid: self.s_grid,
            seed: self.seed,
        };
        let mut out = format!("# {}\nt,Q,err_bound\n", serde_json::to_string(&header).expect("header serialises"));
        for (k, (q, e)) in self.q.iter().zip(&self.err_bound).enumerate() {
            out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", self.t.at(k), q, e));
        }
        out
    }

    /// Parses the CSV form; the split into first and second terms is not
    /// stored there and comes back as `(Q, 0)`.
    pub fn from_csv(text: &str) -> Result<QTrace> {
        let mut lines = text.lines();
        let head = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| Error::Parse("missing provenance header".into()))?;
        let header: CsvHeader = serde_json::from_str(head)?;
        if lines.next() != Some("t,Q,err_bound") {
            return Err(Error::Parse("missing column header".into()));
        }
        let mut q = Vec::new();
        let mut err = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{line}: {e}"))))
                .collect::<Result<_>>()?;
            if cols.len() != 3 {
                return Err(Error::Parse(format!("expected three columns in {line}")));
            }
            q.push(cols[1]);
            err.push(cols[2]);
        }
        if q.len() != header.t.count {
            return Err(Error::Parse(format!("{} rows for {} t samples", q.len(), header.t.count)));
        }
        Ok(QTrace {
            theorem: header.theorem,
            datum: header.datum,
            t: header.t,
            first: q.clone(),
            second: vec![0.0; q.len()],
            q,
            err_bound: err,
            constants: header.constants,
            grid: header.grid,
            s_grid: header.s_grid,
            seed: header.seed,
        })
    }
}

/// Sixteen points on `[0.05, 1.6]`.
pub fn default_t_grid() -> TimeGrid {
    TimeGrid { start: 0.05, step: 1.55 / 15.0, count: 16 }
}

pub(crate) fn check_t_grid(t: &TimeGrid) -> Result<()> {
    if t.count < 8 || !(t.step > 0.0) || t.start < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "flow time grid needs at least 8 increasing nonnegative samples, got {t:?}"
        )));
    }
    Ok(())
}

/// Fraction of the terms' scale that the error bound may reach.
const RESOLUTION_LIMIT: f64 = 0.1;

pub(crate) struct Point {
    pub(crate) first: f64,
    pub(crate) second: f64,
    pub(crate) err: f64,
}

pub(crate) struct TraceSpec {
    pub(crate) theorem: String,
    pub(crate) constants: BTreeMap<String, f64>,
    pub(crate) grid: GridSpec,
    pub(crate) s_grid: TimeGrid,
}

pub(crate) fn assemble(spec: TraceSpec, t: &TimeGrid, points: Vec<Point>) -> Result<QTrace> {
    let trace = QTrace {
        theorem: spec.theorem,
        datum: String::new(),
        t: *t,
        q: points.iter().map(|p| p.first - p.second).collect(),
        first: points.iter().map(|p| p.first).collect(),
        second: points.iter().map(|p| p.second).collect(),
        err_bound: points.iter().map(|p| p.err).collect(),
        constants: spec.constants,
        grid: spec.grid,
        s_grid: spec.s_grid,
        seed: None,
    };
    if let Some(i) = trace.q.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let limit = RESOLUTION_LIMIT * trace.scale();
    let bound = trace.err_bound.iter().cloned().fold(0.0, f64::max);
    if bound > limit && trace.scale() > 0.0 {
        return Err(Error::Unresolved { bound, limit });
    }
    Ok(trace)
}

pub(crate) fn compute_points(t: &TimeGrid, f: impl Fn(f64) -> Result<Point> + Sync) -> Result<Vec<Point>> {
    (0..t.count).into_par_iter().map(|k| f(t.at(k))).collect()
}

/// The flowed datum `e^{-t a(D)} f` on the frequency side.
pub(crate) fn flowed(fhat: &Field, damping: FamilyTag, t: f64) -> Result<Field> {
    let symbol = match damping {
        FamilyTag::Schrodinger => Symbol::Heat { t },
        FamilyTag::Wave => Symbol::Poisson { t },
        FamilyTag::KleinGordon => Symbol::KgDamping { t },
    };
    spectral::apply_multiplier(fhat, &symbol, None)
}

fn propagator(tag: FamilyTag) -> Propagator {
    match tag {
        FamilyTag::Schrodinger => Propagator::Schrodinger,
        FamilyTag::Wave => Propagator::HalfWave,
        FamilyTag::KleinGordon => Propagator::KleinGordon,
    }
}

/// Time grid shared by every point of a trace, fixed from the least-smoothed
/// datum so that later (smoother) data satisfy the same checks.
pub(crate) fn shared_s_grid(fhat: &Field, tag: FamilyTag, t: &TimeGrid) -> Result<TimeGrid> {
    spectral::default_time_grid(&flowed(fhat, tag, t.start)?, propagator(tag))
}

/// `||e^{is omega(D)} g||^p_{L^p_s L^q_x}` with the tail uncertainty.
fn space_time_power(ghat: &Field, tag: FamilyTag, s: &TimeGrid, p: f64, q: f64) -> Result<(f64, f64)> {
    let n = norms::mixed_norm_of_evolution(ghat, propagator(tag), s, MixedNormSpec::new(p, q)?)?;
    Ok((n.power(), n.tail_uncertainty))
}

/// Schrödinger flow quantity `S(m,d) I_m(e^{t Delta} f) - ||e^{is Delta} e^{t Delta} f||^{2m}`.
pub fn q_schrodinger(f: &Field, m: usize, t: &TimeGrid) -> Result<QTrace> {
    check_t_grid(t)?;
    let d = f.grid().d();
    let family = Family::schrodinger(m, d)?;
    let fhat = f.to_frequency()?;
    let s_grid = shared_s_grid(&fhat, FamilyTag::Schrodinger, t)?;
    let c = multilinear::schrodinger_s(m, d);
    let points = compute_points(t, |tt| {
        let i = multilinear::i_m(&fhat, &family, tt)?;
        let g = flowed(&fhat, FamilyTag::Schrodinger, tt)?;
        let p = 2.0 * m as f64;
        let (second, tail_err) = space_time_power(&g, FamilyTag::Schrodinger, &s_grid, p, p)?;
        Ok(Point { first: c * i.value, second, err: c * i.error + tail_err })
    })?;
    let spec = TraceSpec {
        theorem: format!("schrodinger(m={m},d={d})"),
        constants: BTreeMap::from([("S".to_string(), c)]),
        grid: *f.grid(),
        s_grid,
    };
    assemble(spec, t, points)
}

/// Strichartz trace with, for `(8,4,1)`, the tensor-product route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrichartzTraces {
    pub direct: QTrace,
    pub tensor_route: Option<QTrace>,
    /// Largest `|Q_direct - Q_tensor|` relative to the trace scale.
    pub max_discrepancy: Option<f64>,
}

fn strichartz_trace(f: &Field, p: u32, q: u32, t: &TimeGrid) -> Result<QTrace> {
    let d = f.grid().d();
    let c = multilinear::strichartz_schrodinger(p, q, d)?;
    let fhat = f.to_frequency()?;
    let s_grid = shared_s_grid(&fhat, FamilyTag::Schrodinger, t)?;
    let pf = p as f64;
    let points = compute_points(t, |tt| {
        let g = flowed(&fhat, FamilyTag::Schrodinger, tt)?;
        let l2 = g.l2_norm_sq() / (2.0 * PI).powi(d as i32);
        let (second, tail_err) = space_time_power(&g, FamilyTag::Schrodinger, &s_grid, pf, q as f64)?;
        Ok(Point { first: c.powf(pf) * l2.powf(0.5 * pf), second, err: tail_err })
    })?;
    let spec = TraceSpec {
        theorem: format!("strichartz(p={p},q={q},d={d})"),
        constants: BTreeMap::from([("C".to_string(), c)]),
        grid: *f.grid(),
        s_grid,
    };
    assemble(spec, t, points)
}

/// `C_{p,q}^p ||e^{t Delta} f||_2^p - ||e^{is Delta} e^{t Delta} f||^p_{L^p_s L^q_x}`.
pub fn q_strichartz(f: &Field, p: u32, q: u32, t: &TimeGrid) -> Result<StrichartzTraces> {
    check_t_grid(t)?;
    let direct = strichartz_trace(f, p, q, t)?;
    if (p, q, f.grid().d()) != (8, 4, 1) {
        return Ok(StrichartzTraces { direct, tensor_route: None, max_discrepancy: None });
    }
    let ff = spectral::tensor(&f.to_space()?, &f.to_space()?)?;
    let mut tensor = strichartz_trace(&ff, 4, 4, t)?;
    tensor.theorem = "strichartz(p=8,q=4,d=1) via f(x)f(y)".into();
    let scale = direct.scale().max(tensor.scale());
    let disc = direct
        .q
        .iter()
        .zip(&tensor.q)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / if scale > 0.0 { scale } else { 1.0 };
    Ok(StrichartzTraces { direct, tensor_route: Some(tensor), max_discrepancy: Some(disc) })
}

/// Per-lattice-point weights `|zeta|^{2-d}` for the fractional derivative
/// of order `(2-d)/2`; in three dimensions the zero cell carries the cell
/// average of `|zeta|^{-1}`.
fn ot_weights(grid: &GridSpec) -> Vec<f64> {
    let d = grid.d();
    let dz = grid.freq_spacing();
    let zero = grid.zero_freq_flat();
    (0..grid.len())
        .map(|i| {
            if d == 2 {
                return 1.0;
            }
            if i == zero {
                return unit_cube_power_integral((d - 2) as f64) / dz.powi(d as i32 - 2);
            }
            let mut z = [0.0; 3];
            grid.freq_point(i, &mut z[..d]);
            norm(&z[..d]).powi(2 - d as i32)
        })
        .collect()
}

/// `||(-Delta)^{(2-d)/4} |e^{is Delta} g|^2||^2_{L^2_{s,x}}`, slice by slice.
fn ot_second_term(ghat: &Field, s: &TimeGrid, weights: &[f64]) -> Result<(f64, f64)> {
    let grid = *ghat.grid();
    let d = grid.d();
    let plan = spectral::plan_for(&grid);
    let cell = grid.freq_cell_volume() / (2.0 * PI).powi(d as i32);
    let per_slice = spectral::map_slices(ghat, Propagator::Schrodinger, s, |_, u| {
        let mut density: Vec<Complex64> = u.iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)).collect();
        spectral::forward_in_place(&grid, &plan, &mut density);
        density.iter().zip(weights).map(|(v, w)| v.norm_sqr() * w).sum::<f64>() * cell
    })?;
    let t = norms::integrate_with_tail(s, &per_slice);
    Ok((t.windowed + t.tail, t.tail_uncertainty))
}

/// Ozawa-Tsutsumi flow quantity.
pub fn q_ozawa_tsutsumi(f: &Field, t: &TimeGrid) -> Result<QTrace> {
    check_t_grid(t)?;
    let d = f.grid().d();
    if d < 2 {
        return Err(Error::Inadmissible(format!("d = {d} is below 2")));
    }
    let c = multilinear::ozawa_tsutsumi(d);
    let fhat = f.to_frequency()?;
    let s_grid = shared_s_grid(&fhat, FamilyTag::Schrodinger, t)?;
    let weights = ot_weights(f.grid());
    let points = compute_points(t, |tt| {
        let g = flowed(&fhat, FamilyTag::Schrodinger, tt)?;
        let l2 = g.l2_norm_sq() / (2.0 * PI).powi(d as i32);
        let (second, err) = ot_second_term(&g, &s_grid, &weights)?;
        Ok(Point { first: c * l2 * l2, second, err })
    })?;
    let spec = TraceSpec {
        theorem: format!("ozawa_tsutsumi(d={d})"),
        constants: BTreeMap::from([("OT".to_string(), c)]),
        grid: *f.grid(),
        s_grid,
    };
    assemble(spec, t, points)
}

/// Wave flow quantity `W(m,d) I_m(e^{-tD} f) - ||e^{isD} e^{-tD} f||^{2m}`.
pub fn q_wave(f: &Field, m: usize, t: &TimeGrid) -> Result<QTrace> {
    check_t_grid(t)?;
    let d = f.grid().d();
    let family = Family::wave(m, d)?;
    let fhat = f.to_frequency()?;
    let s_grid = shared_s_grid(&fhat, FamilyTag::Wave, t)?;
    let c = multilinear::wave_w(m, d);
    let points = compute_points(t, |tt| {
        let i = multilinear::i_m(&fhat, &family, tt)?;
        let g = flowed(&fhat, FamilyTag::Wave, tt)?;
        let p = 2.0 * m as f64;
        let (second, tail_err) = space_time_power(&g, FamilyTag::Wave, &s_grid, p, p)?;
        Ok(Point { first: c * i.value, second, err: c * i.error + tail_err })
    })?;
    let spec = TraceSpec {
        theorem: format!("wave(m={m},d={d})"),
        constants: BTreeMap::from([("W".to_string(), c)]),
        grid: *f.grid(),
        s_grid,
    };
    assemble(spec, t, points)
}

/// `C_p^p ||e^{-tD} f||^p_{H^{1/2}} - ||e^{isD} e^{-tD} f||^p_{L^p}` for
/// `(p, d)` in `{(6, 2), (4, 3)}`.
pub fn q_wave_strichartz(f: &Field, p: u32, t: &TimeGrid) -> Result<QTrace> {
    check_t_grid(t)?;
    let d = f.grid().d();
    let c = multilinear::strichartz_wave(p, d)?;
    let fhat = f.to_frequency()?;
    let s_grid = shared_s_grid(&fhat, FamilyTag::Wave, t)?;
    let pf = p as f64;
    let points = compute_points(t, |tt| {
        let g = flowed(&fhat, FamilyTag::Wave, tt)?;
        let h = norms::sobolev_norm(&g, 0.5, SobolevVariant::Homogeneous)?;
        let (second, tail_err) = space_time_power(&g, FamilyTag::Wave, &s_grid, pf, pf)?;
        Ok(Point { first: c.powf(pf) * h.powf(pf), second, err: tail_err })
    })?;
    let spec = TraceSpec {
        theorem: format!("wave_strichartz(p={p},d={d})"),
        constants: BTreeMap::from([("C".to_string(), c)]),
        grid: *f.grid(),
        s_grid,
    };
    assemble(spec, t, points)
}

/// `Q_0 = C_d^4 ||e^{-t phi(D)} f||^4_{H^{1/2}} - ||e^{is phi(D)} e^{-t phi(D)} f||^4_{L^4}`
/// alone, without the tensor-grid integrals of [`q_klein_gordon`].
pub fn q_klein_gordon_strichartz(f: &Field, t: &TimeGrid) -> Result<QTrace> {
    check_t_grid(t)?;
    let d = f.grid().d();
    let c = multilinear::strichartz_kg(d)?;
    let fhat = f.to_frequency()?;
    let s_grid = shared_s_grid(&fhat, FamilyTag::KleinGordon, t)?;
    let cell = fhat.grid().freq_cell_volume() / (2.0 * PI).powi(d as i32);
    let points = compute_points(t, |tt| {
        let amp = multilinear::amplitude_sq(&fhat, FamilyTag::KleinGordon, tt)?;
        let h = amp.iter().sum::<f64>() * cell;
        let g = flowed(&fhat, FamilyTag::KleinGordon, tt)?;
        let (second, err) = space_time_power(&g, FamilyTag::KleinGordon, &s_grid, 4.0, 4.0)?;
        Ok(Point { first: c.powi(4) * h * h, second, err })
    })?;
    let spec = TraceSpec {
        theorem: format!("klein_gordon_strichartz(d={d})"),
        constants: BTreeMap::from([("C_d".to_string(), c)]),
        grid: *f.grid(),
        s_grid,
    };
    assemble(spec, t, points)
}

/// The three Klein-Gordon traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgTraces {
    /// `Q = K_d I_2(e^{-t phi(D)} f) - ||e^{is phi(D)} e^{-t phi(D)} f||^4`
    pub q: QTrace,
    /// `Q_0 = C_d^4 ||e^{-t phi(D)} f||^4_{H^{1/2}} - (same)`, `d` in `{2, 3}`.
    pub q0: Option<QTrace>,
    /// `R` from its defining relation `(Q_0 - Q) / K_d`.
    pub r: Option<QTrace>,
    /// `R` as the direct integral with weight `C~_d - K(xi)`.
    pub r_direct: Option<QTrace>,
    /// Largest `|Q_0 - Q - K_d R_direct|` relative to the trace scale.
    pub identity_residual: Option<f64>,
}

/// Klein-Gordon flow quantities.
pub fn q_klein_gordon(f: &Field, t: &TimeGrid) -> Result<KgTraces> {
    check_t_grid(t)?;
    let d = f.grid().d();
    let family = Family::klein_gordon(d)?;
    let fhat = f.to_frequency()?;
    let s_grid = shared_s_grid(&fhat, FamilyTag::KleinGordon, t)?;
    let kc = multilinear::kg_constant(d);
    let sharp = multilinear::strichartz_kg(d).ok();
    let bound = multilinear::kg_kernel_bound(d).ok();
    let cell = fhat.grid().freq_cell_volume();
    struct KgPoint {
        i2: f64,
        i2_err: f64,
        second: f64,
        tail_err: f64,
        h: f64,
        r: f64,
        r_err: f64,
    }
    let raw: Vec<KgPoint> = (0..t.count)
        .into_par_iter()
        .map(|k| {
            let tt = t.at(k);
            let amp = multilinear::amplitude_sq(&fhat, FamilyTag::KleinGordon, tt)?;
            let i2 = multilinear::weighted_tensor_integral(&fhat, &amp, 2, &|xi| multilinear::kernel(&family, xi))?;
            let g = flowed(&fhat, FamilyTag::KleinGordon, tt)?;
            let (second, tail_err) = space_time_power(&g, FamilyTag::KleinGordon, &s_grid, 4.0, 4.0)?;
            // (2 pi)^{-d} int phi |g^|^2 is the squared H^{1/2} norm
            let h = amp.iter().sum::<f64>() * cell / (2.0 * PI).powi(d as i32);
            let (r, r_err) = match bound {
                Some(b) => {
                    let q = multilinear::weighted_tensor_integral(&fhat, &amp, 2, &|xi| {
                        b - multilinear::kernel(&family, xi)
                    })?;
                    (q.value, q.error)
                }
                None => (0.0, 0.0),
            };
            Ok(KgPoint { i2: i2.value, i2_err: i2.error, second, tail_err, h, r, r_err })
        })
        .collect::<Result<_>>()?;
    let mut constants = BTreeMap::from([("K_d".to_string(), kc)]);
    if let (Some(c), Some(b)) = (sharp, bound) {
        constants.insert("C_d".into(), c);
        constants.insert("C~_d".into(), b);
    }
    let spec = |name: &str| TraceSpec {
        theorem: format!("{name}(d={d})"),
        constants: constants.clone(),
        grid: *f.grid(),
        s_grid,
    };
    let q = assemble(
        spec("klein_gordon"),
        t,
        raw.iter()
            .map(|p| Point { first: kc * p.i2, second: p.second, err: kc * p.i2_err + p.tail_err })
            .collect(),
    )?;
    let (Some(c), Some(_)) = (sharp, bound) else {
        return Ok(KgTraces { q, q0: None, r: None, r_direct: None, identity_residual: None });
    };
    let q0 = assemble(
        spec("klein_gordon_strichartz"),
        t,
        raw.iter()
            .map(|p| Point { first: c.powi(4) * p.h * p.h, second: p.second, err: p.tail_err })
            .collect(),
    )?;
    let r_vals: Vec<Point> = q0
        .q
        .iter()
        .zip(&q.q)
        .zip(&raw)
        .map(|((a, b), p)| Point { first: (a - b) / kc, second: 0.0, err: p.i2_err })
        .collect();
    let r = assemble(spec("klein_gordon_remainder"), t, r_vals)?;
    let r_direct = assemble(
        spec("klein_gordon_remainder_direct"),
        t,
        raw.iter().map(|p| Point { first: p.r, second: 0.0, err: p.r_err }).collect(),
    )?;
    let scale = q0.scale().max(q.scale());
    let residual = q0
        .q
        .iter()
        .zip(&q.q)
        .zip(&r_direct.q)
        .map(|((a, b), rd)| (a - b - kc * rd).abs())
        .fold(0.0, f64::max)
        / if scale > 0.0 { scale } else { 1.0 };
    Ok(KgTraces { q, q0: Some(q0), r: Some(r), r_direct: Some(r_direct), identity_residual: Some(residual) })
}

/// Verdict for one order of alternating differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderVerdict {
    pub order: usize,
    /// `min_i (-1)^j Delta^j Q_i / (h^j max|Q|)`; negative values are violations.
    pub worst_scaled: f64,
    /// Smallest raw value `min_i (-1)^j Delta^j Q_i`.
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CMReport {
    pub max_order: usize,
    pub rel_tol: f64,
    pub orders: Vec<OrderVerdict>,
}

impl CMReport {
    /// True when every order up to `k` passes.
    pub fn passes_to(&self, k: usize) -> bool {
        self.orders.iter().filter(|o| o.order <= k).all(|o| o.pass)
    }

    /// Highest order `k` such that orders `0..=k` all pass.
    pub fn certified_order(&self) -> Option<usize> {
        self.orders.iter().take_while(|o| o.pass).last().map(|o| o.order)
    }
}

/// Alternating forward differences of uniformly spaced samples.
///
/// Order `j` passes when `min (-1)^j Delta^j Q >= -2^j (rel_tol max|Q| + max err)`;
/// the factor `2^j` bounds how pointwise errors grow under differencing.
pub fn check_cm_values(values: &[f64], err: &[f64], step: f64, max_order: usize, rel_tol: f64) -> CMReport {
    let max_q = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let max_err = err.iter().cloned().fold(0.0, f64::max);
    let base = rel_tol * max_q + max_err;
    let mut diff = values.to_vec();
    let mut orders = Vec::new();
    for j in 0..=max_order.min(values.len().saturating_sub(1)) {
        if j > 0 {
            diff = diff.windows(2).map(|w| w[1] - w[0]).collect();
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let worst = diff.iter().map(|v| sign * v).fold(f64::INFINITY, f64::min);
        let tolerance = 2f64.powi(j as i32) * base;
        let denom = step.powi(j as i32) * max_q;
        orders.push(OrderVerdict {
            order: j,
            worst_scaled: if denom > 0.0 { worst / denom } else { 0.0 },
            worst,
            tolerance,
            pass: worst >= -tolerance,
        });
    }
    CMReport { max_order, rel_tol, orders }
}

pub fn check_complete_monotone(trace: &QTrace, max_order: usize, rel_tol: f64) -> Result<CMReport> {
    if max_order + 1 > trace.q.len() {
        return Err(Error::InvalidParameter(format!(
            "order {max_order} needs more than {} samples",
            trace.q.len()
        )));
    }
    Ok(check_cm_values(&trace.q, &trace.err_bound, trace.t.step, max_order, rel_tol))
}

/// Default relative tolerance for complete-monotonicity checks.
pub const CM_REL_TOL: f64 = 1e-2;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_mixture, Mixture};
    use crate::spectral::{make_extremiser, Extremiser};
    use approx::assert_relative_eq;

    fn short_t() -> TimeGrid {
        TimeGrid { start: 0.05, step: 0.2, count: 8 }
    }

    #[test]
    fn cm_examples() {
        let t: Vec<f64> = (0..16).map(|k| 2.0 * k as f64 / 15.0).collect();
        let exp: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        let r = check_cm_values(&exp, &[0.0; 16], 2.0 / 15.0, 4, CM_REL_TOL);
        assert!(r.passes_to(4));
        let t6: Vec<f64> = (0..16).map(|k| 6.0 * k as f64 / 15.0).collect();
        let sin: Vec<f64> = t6.iter().map(|t| t.sin()).collect();
        let r = check_cm_values(&sin, &[0.0; 16], 0.4, 4, CM_REL_TOL);
        assert!(!r.orders[1].pass);
        let inv: Vec<f64> = t.iter().map(|t| 1.0 / (1.0 + t)).collect();
        assert!(check_cm_values(&inv, &[0.0; 16], 2.0 / 15.0, 4, CM_REL_TOL).passes_to(4));
        assert_eq!(check_cm_values(&inv, &[0.0; 16], 2.0 / 15.0, 4, CM_REL_TOL).certified_order(), Some(4));
    }

    #[test]
    fn gaussian_22_gap_vanishes() {
        let grid = GridSpec::new(2, 128, 24.0).unwrap();
        let f = Mixture::gaussian(2, 1.0).sample(grid).unwrap();
        let tr = q_schrodinger(&f, 2, &short_t()).unwrap();
        for (q, first) in tr.q.iter().zip(&tr.first) {
            assert!(q.abs() <= 1e-2 * first, "{q} vs {first}");
        }
    }

    #[test]
    fn gaussian_661_terms() {
        let grid = GridSpec::new(1, 256, 64.0).unwrap();
        let f = Mixture::gaussian(1, 1.0).sample(grid).unwrap();
        let t = TimeGrid { start: 0.0, step: 0.1, count: 8 };
        let tr = q_strichartz(&f, 6, 6, &t).unwrap().direct;
        let exact = PI.powf(1.5) / (2.0 * 3f64.sqrt());
        assert_relative_eq!(tr.first[0], exact, max_relative = 1e-2);
        assert_relative_eq!(tr.second[0], exact, max_relative = 1e-2);
        assert!(tr.q.iter().zip(&tr.first).all(|(q, a)| q.abs() <= 1e-2 * a));
    }

    #[test]
    fn tensor_route_matches() {
        let grid = GridSpec::new(1, 128, 32.0).unwrap();
        let f = random_mixture(1, 4, 2.0, 0.5).sample(grid).unwrap();
        let tr = q_strichartz(&f, 8, 4, &short_t()).unwrap();
        assert!(tr.max_discrepancy.unwrap() < 1e-2, "{:?}", tr.max_discrepancy);
    }

    #[test]
    fn zero_data_gives_zero_trace() {
        let grid = GridSpec::new(2, 32, 8.0).unwrap();
        let f = Field::zeros(grid, spectral::Side::Space);
        // a zero datum has no bandwidth, so the default s-grid degenerates
        // to the coarsest admissible one; every term vanishes
        let tr = q_strichartz(&f, 4, 4, &short_t()).unwrap().direct;
        assert!(tr.q.iter().all(|q| *q == 0.0));
    }

    #[test]
    fn ot_d2_matches_l4_term() {
        let grid = GridSpec::new(2, 64, 16.0).unwrap();
        let f = random_mixture(2, 9, 1.5, 0.5).sample(grid).unwrap();
        let ot = q_ozawa_tsutsumi(&f, &short_t()).unwrap();
        let st = q_strichartz(&f, 4, 4, &short_t()).unwrap().direct;
        for (a, b) in ot.second.iter().zip(&st.second) {
            assert!((a - b).abs() <= 1e-6 * b, "{a} {b}");
        }
        let g = Mixture::gaussian(2, 1.0).sample(grid).unwrap();
        let ot = q_ozawa_tsutsumi(&g, &short_t()).unwrap();
        assert!(ot.q.iter().zip(&ot.first).all(|(q, a)| q.abs() <= 1e-2 * a));
    }

    #[test]
    fn scaling_covariance() {
        let grid = GridSpec::new(2, 64, 16.0).unwrap();
        let f = random_mixture(2, 2, 1.5, 0.5).sample(grid).unwrap();
        let a = q_strichartz(&f, 4, 4, &short_t()).unwrap().direct;
        let lam = Complex64::new(0.6, -1.1);
        let b = q_strichartz(&f.scale(lam), 4, 4, &short_t()).unwrap().direct;
        let l4 = lam.norm_sqr().powi(2);
        for (x, y) in a.q.iter().zip(&b.q) {
            assert!((y - l4 * x).abs() <= 1e-8 * (l4 * a.scale()));
        }
    }

    #[test]
    fn kg_identity_and_remainder_sign() {
        let grid = GridSpec::new(2, 64, 32.0).unwrap();
        let f = make_extremiser(Extremiser::KgSequence { a: 5.0 }, grid).unwrap();
        let tr = q_klein_gordon(&f, &short_t()).unwrap();
        assert!(tr.identity_residual.unwrap() < 1e-8, "{:?}", tr.identity_residual);
        assert!(tr.r_direct.unwrap().q.iter().all(|r| *r >= 0.0));
    }

    #[test]
    fn csv_round_trip() {
        let grid = GridSpec::new(1, 64, 16.0).unwrap();
        let f = Mixture::gaussian(1, 1.0).sample(grid).unwrap();
        let tr = q_strichartz(&f, 6, 6, &short_t()).unwrap().direct;
        let back = QTrace::from_csv(&tr.to_csv()).unwrap();
        assert_eq!(back.q, tr.q);
        assert_eq!(back.err_bound, tr.err_bound);
        assert_eq!(back.grid, tr.grid);
        assert!(QTrace::from_csv("t,Q,err_bound\n").is_err());
    }

    #[test]
    fn short_t_grid_rejected() {
        let grid = GridSpec::new(1, 64, 16.0).unwrap();
        let f = Mixture::gaussian(1, 1.0).sample(grid).unwrap();
        let t = TimeGrid { start: 0.05, step: 0.1, count: 4 };
        assert!(q_strichartz(&f, 6, 6, &t).is_err());
        assert!(q_strichartz(&f, 4, 4, &short_t()).is_err());
    }
}
