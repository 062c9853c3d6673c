//! The acceptance battery: each criterion runs at its pinned scale and
//! tolerance and reports one pass/fail outcome.

use crate::corpus::{random_mixture, standard, Mixture};
use crate::error::Result;
use crate::flows::{self, check_complete_monotone, default_t_grid, QTrace, CM_REL_TOL};
use crate::kinetic::{self, ScalarField};
use crate::multilinear::{self, Family};
use crate::oracles::{self, MollifierSpec};
use crate::pdeflow::{self, AdmissibleTriple, Exponent};
use crate::spectral::{Field, GridSpec, TimeGrid};
use crate::steintomas::{self, Domain, SurfaceSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

/// Relative agreement demanded of closed-form constants.
pub const CONSTANTS_REL_TOL: f64 = 1e-14;
pub const GAUSSIAN_REL_TOL: f64 = 1e-2;
pub const LEMMA_REL_TOL: f64 = 2e-2;
pub const LEMMA_SAMPLES: usize = 100_000;
pub const CM_ORDER: usize = 3;
pub const CM_SEEDS: u64 = 5;
pub const KG_KERNEL_SLACK: f64 = 1e-12;
pub const KG_KERNEL_SAMPLES: usize = 10_000;
pub const TENSOR_REL_TOL: f64 = 1e-2;
pub const DUALITY_REL_TOL: f64 = 1e-2;
pub const DUALITY_TIMES: [f64; 5] = [0.1, 0.2, 0.4, 0.8, 1.6];
pub const STEIN_TOMAS_REL_TOL: f64 = 2e-2;
pub const STEIN_TOMAS_ORDER: usize = 2;
pub const DRURY_SPREAD: f64 = 2e-2;
pub const DRURY_DIRECTIONS: usize = 128;
pub const CCL_STEPS: usize = 50;
pub const CCL_MASS_DRIFT: f64 = 5e-3;
/// Slack on the sharp-constant ratio before quadrature error.
pub const SHARP_SLACK: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub outcomes: Vec<CriterionOutcome>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }
}

/// Criterion ids in run order; 11 is the directional sharp-constant check.
pub const CRITERIA: [u32; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

pub fn criterion_name(id: u32) -> &'static str {
    match id {
        1 => "constants table",
        2 => "Gaussian equality (6,6,1)",
        3 => "delta-measure masses",
        4 => "complete monotonicity battery",
        5 => "Klein-Gordon kernel bound and R >= 0",
        6 => "tensor identity (8,4,1) vs (4,4,2)",
        7 => "duality identity vs finite difference",
        8 => "Stein-Tomas constant and monotonicity",
        9 => "Drury ratio spread",
        10 => "fast diffusion monotonicity",
        11 => "directional sharp constants",
        _ => "unknown",
    }
}

/// Runs one criterion; an error inside it counts as a failure.
pub fn run_criterion(id: u32) -> CriterionOutcome {
    let start = Instant::now();
    let result = match id {
        1 => constants_table(),
        2 => gaussian_661(),
        3 => lemma_masses(),
        4 => cm_battery(),
        5 => kg_bound(),
        6 => tensor_identity(),
        7 => duality(),
        8 => stein_tomas(),
        9 => drury(),
        10 => fast_diffusion(),
        11 => sharp_directional(),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let (pass, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionOutcome { id, name: criterion_name(id).into(), pass, detail, seconds: start.elapsed().as_secs_f64() }
}

pub fn run_suite(ids: &[u32]) -> SuiteReport {
    SuiteReport { outcomes: ids.iter().map(|id| run_criterion(*id)).collect() }
}

type Check = Result<(bool, String)>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn constants_table() -> Check {
    let tau = 2.0 * PI;
    let rows = [
        ("S(2,2)", multilinear::schrodinger_s(2, 2), 1.0 / (4.0 * tau.powi(4))),
        ("C_{6,6}", multilinear::strichartz_schrodinger(6, 6, 1)?, 1.0 / 12f64.powf(1.0 / 12.0)),
        ("C_{8,4}", multilinear::strichartz_schrodinger(8, 4, 1)?, 1.0 / 2f64.powf(0.25)),
        ("C_{4,4}", multilinear::strichartz_schrodinger(4, 4, 2)?, 1.0 / 2f64.sqrt()),
        ("C_4", multilinear::strichartz_wave(4, 3)?, 1.0 / tau.powf(0.25)),
        ("C_6", multilinear::strichartz_wave(6, 2)?, 1.0 / tau.powf(1.0 / 6.0)),
        ("C_2", multilinear::strichartz_kg(2)?, 1.0 / 2f64.powf(0.25)),
        ("C_3", multilinear::strichartz_kg(3)?, 1.0 / tau.powf(0.25)),
        ("A(2,3)", multilinear::wave_a(2, 3), tau),
        // circle length 2 pi, sphere area 4 pi
        ("OT(d=2)", multilinear::ozawa_tsutsumi(2), tau / 4.0 / tau),
        ("OT(d=3)", multilinear::ozawa_tsutsumi(3), 4.0 * PI / (4.0 * tau * tau)),
    ];
    let worst = rows.iter().map(|(_, a, b)| rel(*a, *b)).fold(0.0, f64::max);
    let bad: Vec<&str> = rows.iter().filter(|(_, a, b)| rel(*a, *b) > CONSTANTS_REL_TOL).map(|r| r.0).collect();
    Ok((bad.is_empty(), format!("{} constants, worst relative error {worst:.1e}; failing {bad:?}", rows.len())))
}

fn gaussian_661() -> Check {
    let grid = GridSpec::new(1, 256, 64.0)?;
    let f = Mixture::gaussian(1, 1.0).sample(grid)?;
    let exact = PI.powf(1.5) / (2.0 * 3f64.sqrt());
    let at_zero = flows::q_strichartz(&f, 6, 6, &TimeGrid { start: 0.0, step: 0.1, count: 8 })?.direct;
    let value_err = rel(at_zero.second[0], exact);
    let tr = flows::q_strichartz(&f, 6, 6, &default_t_grid())?.direct;
    let worst = tr.q.iter().zip(&tr.first).map(|(q, a)| q.abs() / a).fold(0.0, f64::max);
    Ok((
        value_err <= GAUSSIAN_REL_TOL && worst <= GAUSSIAN_REL_TOL,
        format!("L6 power {:.6} vs {exact:.6} (rel {value_err:.1e}); max |Q|/first {worst:.1e} over 16 t", at_zero.second[0]),
    ))
}

fn lemma_masses() -> Check {
    let moll = MollifierSpec::default();
    let n = LEMMA_SAMPLES;
    let reports = [
        ("schrodinger(2,2)", oracles::mass_schrodinger(&[0.3, -0.2, 1.0, 0.4], 2, 2, &moll, n, 7)?),
        ("ot(d=2)", oracles::mass_ot(&[0.5, 0.1, -0.2, 0.7], 2, &moll, n, 11)?),
        ("ot(d=3)", oracles::mass_ot(&[0.5, 0.1, 0.3, -0.2, 0.7, 0.0], 3, &moll, n, 12)?),
        ("wave(2,3)", oracles::mass_wave(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], 2, 3, &moll, n, 5)?),
        ("kg(d=2, origin)", oracles::mass_kg(&[0.0; 4], 2, &moll, n, 6)?),
    ];
    let expected = [PI / 2.0, PI / 2.0, PI, 2.0 * PI, PI];
    let mut pass = true;
    let mut parts = Vec::new();
    for ((name, r), want) in reports.iter().zip(expected) {
        let ok = r.within(LEMMA_REL_TOL) && rel(r.closed_form, want) < 1e-12;
        pass &= ok;
        parts.push(format!("{name} {:.4}±{:.4} vs {want:.4}{}", r.extrapolated, r.extrapolated_se, if ok { "" } else { " FAIL" }));
    }
    Ok((pass, parts.join("; ")))
}

fn cm_traces(kind: &str, seed: u64) -> Result<QTrace> {
    let t = default_t_grid();
    match kind {
        "schrodinger(2,2)" => {
            let f = random_mixture(2, seed, 2.0, 1.0).sample(GridSpec::new(2, 128, 24.0)?)?;
            flows::q_schrodinger(&f, 2, &t)
        }
        "ozawa-tsutsumi(d=2)" => {
            let f = random_mixture(2, seed, 2.0, 1.0).sample(GridSpec::new(2, 128, 24.0)?)?;
            flows::q_ozawa_tsutsumi(&f, &t)
        }
        "wave-strichartz(4,3)" => {
            let f = random_mixture(3, seed, 2.0, 1.0).sample(GridSpec::new(3, 64, 12.0)?)?;
            flows::q_wave_strichartz(&f, 4, &t)
        }
        _ => {
            let f = random_mixture(2, seed, 2.0, 1.0).sample(GridSpec::new(2, 128, 24.0)?)?;
            flows::q_klein_gordon_strichartz(&f, &t)
        }
    }
}

const CM_CASES: [&str; 4] = ["schrodinger(2,2)", "ozawa-tsutsumi(d=2)", "wave-strichartz(4,3)", "klein-gordon-strichartz(d=2)"];

fn cm_battery() -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in CM_CASES {
        let mut passed = 0;
        for seed in 0..CM_SEEDS {
            let report = check_complete_monotone(&cm_traces(kind, seed)?, CM_ORDER, CM_REL_TOL)?;
            if report.passes_to(CM_ORDER) {
                passed += 1;
            }
        }
        pass &= passed == CM_SEEDS;
        parts.push(format!("{kind} {passed}/{CM_SEEDS}"));
    }
    Ok((pass, format!("order {CM_ORDER}: {}", parts.join(", "))))
}

fn kg_bound() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_excess = f64::NEG_INFINITY;
    for d in [2usize, 3] {
        let family = Family::klein_gordon(d)?;
        let bound = multilinear::kg_kernel_bound(d)?;
        for _ in 0..KG_KERNEL_SAMPLES {
            let xi: Vec<f64> = (0..2 * d)
                .map(|_| {
                    let magnitude = 10f64.powf(rng.random_range(-3.0..3.0));
                    magnitude * rng.random_range(-1.0..1.0)
                })
                .collect();
            worst_excess = worst_excess.max(multilinear::kernel(&family, &xi) - bound);
        }
    }
    let grid = GridSpec::new(2, 64, 24.0)?;
    let mut min_r = f64::INFINITY;
    let mut min_direct = f64::INFINITY;
    let mut worst_slack = f64::INFINITY;
    for seed in 0..CM_SEEDS {
        let f = random_mixture(2, seed, 2.0, 1.0).sample(grid)?;
        let tr = flows::q_klein_gordon(&f, &default_t_grid())?;
        if let Some(direct) = &tr.r_direct {
            min_direct = direct.q.iter().copied().fold(min_direct, f64::min);
        }
        if let Some(r) = &tr.r {
            for (v, e) in r.q.iter().zip(&r.err_bound) {
                min_r = min_r.min(*v);
                worst_slack = worst_slack.min(v + e);
            }
        }
    }
    let pass = worst_excess <= KG_KERNEL_SLACK && min_direct >= 0.0 && worst_slack >= 0.0;
    Ok((
        pass,
        format!(
            "max K - C~ = {worst_excess:.2e} over 2x{KG_KERNEL_SAMPLES} pairs; min R_direct {min_direct:.3e}, min R {min_r:.3e} (with error {worst_slack:.3e})"
        ),
    ))
}

fn tensor_identity() -> Check {
    let grid = GridSpec::new(1, 128, 32.0)?;
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let f = random_mixture(1, seed, 2.0, 0.5).sample(grid)?;
        let tr = flows::q_strichartz(&f, 8, 4, &default_t_grid())?;
        worst = worst.max(tr.max_discrepancy.unwrap_or(f64::INFINITY));
    }
    Ok((worst <= TENSOR_REL_TOL, format!("max |Q_direct - Q_tensor| / scale = {worst:.2e} over 3 data")))
}

fn duality() -> Check {
    // the heat-flowed Gaussian at t = 1.6 has variance 4.2 and needs the wide box
    let grid = GridSpec::new(2, 128, 24.0)?;
    let f = Mixture::gaussian(2, 1.0).sample(grid)?;
    let triple = AdmissibleTriple::new(Exponent::integer(4), Exponent::integer(4), 2)?;
    let mut worst: f64 = 0.0;
    for t in DUALITY_TIMES {
        worst = worst.max(pdeflow::duality_check(&f, &triple, 1.0, t)?.rel_error);
    }
    Ok((worst <= DUALITY_REL_TOL, format!("max relative error {worst:.2e} at t in {DUALITY_TIMES:?}")))
}

fn stein_tomas() -> Check {
    let spec = SurfaceSpec::paraboloid(Domain::Disk { radius: 3.0 });
    let c = steintomas::c_constant(&spec, 1024)?;
    let c_err = rel(c.c, PI / 2.0);
    let grid = steintomas::grid_for(&spec, 128, 32.0)?;
    let mut passed = 0;
    for seed in 0..3u64 {
        let m = random_mixture(2, seed, 1.0, 2.0);
        let g = Field::from_freq_fn(grid, |xi| m.bumps.iter().map(|b| b.eval(xi)).sum())?;
        let tr = steintomas::q_steintomas(&g, &spec, c.c, &default_t_grid())?;
        if check_complete_monotone(&tr, STEIN_TOMAS_ORDER, CM_REL_TOL)?.passes_to(STEIN_TOMAS_ORDER) {
            passed += 1;
        }
    }
    Ok((
        c_err <= STEIN_TOMAS_REL_TOL && passed == 3,
        format!("c = {:.6} vs pi/2 (rel {c_err:.1e}); {passed}/3 traces pass order {STEIN_TOMAS_ORDER}", c.c),
    ))
}

/// The 64^3 box of half width 8 used by the kinetic criteria.
pub fn kinetic_grid() -> Result<GridSpec> {
    GridSpec::new(3, 64, 8.0)
}

/// Gaussian, shifted Gaussian and a two-bump mixture.
pub fn drury_corpus(grid: GridSpec) -> Result<Vec<(String, ScalarField)>> {
    let r2 = |x: &[f64], c: [f64; 3]| (0..3).map(|i| (x[i] - c[i]).powi(2)).sum::<f64>();
    Ok(vec![
        ("gaussian".into(), ScalarField::from_fn(grid, |x| (-r2(x, [0.0; 3])).exp())?),
        ("shifted".into(), ScalarField::from_fn(grid, |x| (-r2(x, [1.0, -0.5, 0.7])).exp())?),
        (
            "mixture".into(),
            ScalarField::from_fn(grid, |x| {
                (-r2(x, [1.5, 0.0, 0.0])).exp() + 0.5 * (-0.5 * r2(x, [-1.0, 1.0, 0.5])).exp()
            })?,
        ),
    ])
}

fn drury() -> Check {
    let r = kinetic::drury_check(&drury_corpus(kinetic_grid()?)?, DRURY_DIRECTIONS)?;
    let ratios: Vec<String> = r.rows.iter().map(|row| format!("{} {:.4}", row.name, row.ratio)).collect();
    Ok((r.spread <= DRURY_SPREAD, format!("spread {:.2e}; mean {:.4}; {}", r.spread, r.mean, ratios.join(", "))))
}

/// Compact bump `(1 - |x|^2 / 4)_+^2`.
pub fn ccl_datum(grid: GridSpec) -> Result<ScalarField> {
    ScalarField::from_fn(grid, |x| {
        let q = 1.0 - x.iter().map(|c| c * c).sum::<f64>() / 4.0;
        if q > 0.0 {
            q * q
        } else {
            0.0
        }
    })
}

fn fast_diffusion() -> Check {
    let drury_c = kinetic::drury_check(&drury_corpus(kinetic_grid()?)?, DRURY_DIRECTIONS)?.mean;
    let g0 = ccl_datum(kinetic_grid()?)?;
    let functional = kinetic::Functional::calibrated(g0.grid, drury_c)?;
    let r = kinetic::ccl_check(&g0, CCL_STEPS, &functional)?;
    let pass = r.monotone && r.mass_drift <= CCL_MASS_DRIFT && r.min_u >= 0.0;
    Ok((
        pass,
        format!(
            "F {:.6} -> {:.6}, max increment {:.2e} (tol {:.1e}); mass drift {:.1e}; min u {:.1e}; {} rejections",
            r.values[0],
            r.values[r.values.len() - 1],
            r.max_increase,
            r.tolerance,
            r.mass_drift,
            r.min_u,
            r.rejections
        ),
    ))
}

/// Largest `||u||^p / (C^p ||f||_2^p)` over a trace, less its error share.
fn worst_ratio(tr: &QTrace) -> f64 {
    tr.second
        .iter()
        .zip(&tr.first)
        .zip(&tr.err_bound)
        .map(|((s, a), e)| (s - e) / a)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn sharp_directional() -> Check {
    let t = default_t_grid();
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    let cases: [(&str, usize, GridSpec); 2] =
        [("schrodinger(4,4,2)", 2, GridSpec::new(2, 128, 24.0)?), ("schrodinger(6,6,1)", 1, GridSpec::new(1, 256, 64.0)?)];
    for (name, d, grid) in cases {
        let (p, q) = if d == 2 { (4, 4) } else { (6, 6) };
        let mut case_worst = f64::NEG_INFINITY;
        for m in standard(d, 17, 3) {
            let tr = flows::q_strichartz(&m.sample(grid)?, p, q, &t)?.direct;
            case_worst = case_worst.max(worst_ratio(&tr));
        }
        worst = worst.max(case_worst);
        parts.push(format!("{name} max ratio {case_worst:.4}"));
    }
    let mut wave_worst = f64::NEG_INFINITY;
    for m in standard(3, 17, 2) {
        let tr = flows::q_wave_strichartz(&m.sample(GridSpec::new(3, 64, 12.0)?)?, 4, &t)?;
        wave_worst = wave_worst.max(worst_ratio(&tr));
    }
    worst = worst.max(wave_worst);
    parts.push(format!("wave(4,3) max ratio {wave_worst:.4}"));
    Ok((worst <= 1.0 + SHARP_SLACK, format!("{} (limit {})", parts.join("; "), 1.0 + SHARP_SLACK)))
}
