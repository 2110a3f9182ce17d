//! Maxwell-Boltzmann averages over the atomic velocity.
//!
//! With `k_1 = k_3` the dark-manifold dynamics depend on the velocity only
//! through its projection on `k_2 - k_1`. For the default geometry this is
//! `u = v_x - v_y`, Gaussian with standard deviation `sqrt2 vbar`, so the
//! ensemble average is a 1-D Gauss-Hermite sum. Monte-Carlo sampling of the
//! full 3-D distribution is available as a cross-check.

use gauss_quad::GaussHermite;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::num::NonZeroUsize;

use crate::dynamics::{dark_bare_populations, evolve_adiabatic_exact, PhaseProgram, Schedule};
use crate::error::{Error, Result};
use crate::holonomy::{holonomy, PhaseLoop, PhasePoint};
use crate::qmath::{CMat2, CVec, C64};
use crate::tripod::{dot, TripodConfig, Vec3};
use crate::units;

/// Tolerance on the change of any output when the quadrature order doubles.
pub const QUADRATURE_TOL: f64 = 1e-6;
const MC_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
}

/// Velocity distribution and how to average over it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalSpec {
    /// `vbar = sqrt(k_B T / M)` in um/us.
    pub thermal_velocity: f64,
    /// Gauss-Hermite order.
    pub order: usize,
    pub monte_carlo: Option<MonteCarlo>,
}

impl ThermalSpec {
    pub fn new(thermal_velocity: f64) -> Self {
        Self { thermal_velocity, order: 64, monte_carlo: None }
    }

    pub fn from_config(cfg: &TripodConfig) -> Self {
        Self::new(cfg.thermal_velocity)
    }

    pub fn sr87(temperature_uk: f64) -> Self {
        Self::new(units::sr87_thermal_velocity(temperature_uk))
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn with_monte_carlo(mut self, samples: usize, seed: u64) -> Self {
        self.monte_carlo = Some(MonteCarlo { samples, seed });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.thermal_velocity >= 0.0) || !self.thermal_velocity.is_finite() {
            return Err(Error::Config("thermal velocity must be non-negative".into()));
        }
        match self.monte_carlo {
            Some(mc) if mc.samples < 2 => Err(Error::Config("Monte-Carlo needs at least two samples".into())),
            None if self.order < 8 => Err(Error::Config("quadrature order must be at least 8".into())),
            _ => Ok(()),
        }
    }
}

/// Nodes and weights for `int e^{-x^2} f(x) dx`.
pub fn gauss_hermite(order: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(order.max(1)).expect("order is positive");
    GaussHermite::new(n).as_node_weight_pairs().to_vec()
}

/// Closed-form thermal populations of `D_2` after a hold of `t`.
pub fn mean_populations(cfg: &TripodConfig, spec: &ThermalSpec, t: f64) -> [f64; 3] {
    let c = envelope(cfg, spec.thermal_velocity, t) * (4.0 / 3.0 * cfg.recoil * t).cos();
    [5.0 / 12.0 - c / 4.0, 1.0 / 6.0, 5.0 / 12.0 + c / 4.0]
}

/// `exp(-(4/9)(k vbar t)^2)`
pub fn envelope(cfg: &TripodConfig, thermal_velocity: f64, t: f64) -> f64 {
    let x = cfg.k() * thermal_velocity * t;
    (-4.0 / 9.0 * x * x).exp()
}

/// Decay time `3 / (2 k vbar)`.
pub fn decoherence_time(cfg: &TripodConfig, thermal_velocity: f64) -> f64 {
    1.5 / (cfg.k() * thermal_velocity)
}

/// What the atoms do while being averaged.
#[derive(Clone, Debug, PartialEq)]
pub enum Scenario {
    /// Fixed phases, sampled at `times`.
    Static { phases: PhasePoint, times: Vec<f64> },
    /// A phase path starting at `t = 0`, sampled on `samples + 1` points.
    Loop { path: PhaseLoop, samples: usize },
}

impl Scenario {
    pub fn schedule(&self) -> Result<Schedule> {
        match self {
            Scenario::Static { phases, times } => Schedule::new(times.clone(), PhaseProgram::Static(*phases)),
            Scenario::Loop { path, samples } => Schedule::sweep(path.clone(), *samples),
        }
    }
}

/// Velocity-averaged populations and dark-manifold density matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub populations: Vec<[f64; 3]>,
    pub rho: Vec<CMat2>,
    pub purity: Vec<f64>,
    /// Monte-Carlo standard error of each population.
    pub standard_error: Option<Vec<[f64; 3]>>,
    pub nodes: usize,
}

impl EnsembleResult {
    pub fn final_populations(&self) -> [f64; 3] {
        *self.populations.last().expect("result has samples")
    }

    pub fn final_rho(&self) -> CMat2 {
        *self.rho.last().expect("result has samples")
    }

    pub fn final_purity(&self) -> f64 {
        *self.purity.last().expect("result has samples")
    }

    fn max_diff(&self, other: &Self) -> f64 {
        let mut d = 0.0f64;
        for (a, b) in self.populations.iter().zip(&other.populations) {
            for i in 0..3 {
                d = d.max((a[i] - b[i]).abs());
            }
        }
        for (a, b) in self.rho.iter().zip(&other.rho) {
            d = d.max(a.max_abs_diff(b));
        }
        d
    }
}

/// Neumaier-compensated sum.
#[derive(Clone, Copy, Default)]
struct Acc {
    sum: f64,
    comp: f64,
}

impl Acc {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Unit direction along which the dark dynamics depend on the velocity.
fn doppler_axis(cfg: &TripodConfig) -> Result<Vec3> {
    let k = &cfg.wavevectors;
    let g1 = [k[0][0] - k[2][0], k[0][1] - k[2][1], k[0][2] - k[2][2]];
    let g2 = [k[1][0] - k[2][0], k[1][1] - k[2][1], k[1][2] - k[2][2]];
    let (n1, n2) = (dot(&g1, &g1).sqrt(), dot(&g2, &g2).sqrt());
    let tol = 1e-12 * cfg.k();
    let axis = match (n1 > tol, n2 > tol) {
        (false, false) => return Ok([1.0, 0.0, 0.0]),
        (true, false) => g1.map(|x| x / n1),
        (false, true) => g2.map(|x| x / n2),
        (true, true) => {
            let c = dot(&g1, &g2) / (n1 * n2);
            if (c.abs() - 1.0).abs() > 1e-12 {
                return Err(Error::Config(
                    "1-D quadrature needs parallel Doppler axes; use Monte-Carlo for this geometry".into(),
                ));
            }
            g2.map(|x| x / n2)
        }
    };
    Ok(axis)
}

struct NodeResult {
    weight: f64,
    states: Vec<CVec<2>>,
    populations: Vec<[f64; 3]>,
}

fn run_node(cfg: &TripodConfig, sched: &Schedule, v: &Vec3, d0: &CVec<2>, weight: f64) -> Result<NodeResult> {
    let traj = evolve_adiabatic_exact(cfg, sched, v, d0)?;
    Ok(NodeResult { weight, states: traj.states, populations: traj.populations })
}

fn accumulate(times: Vec<f64>, nodes: &[NodeResult], mc: bool) -> Result<EnsembleResult> {
    let n_t = times.len();
    let mut pop = vec![[Acc::default(); 3]; n_t];
    let mut pop_sq = vec![[Acc::default(); 3]; n_t];
    let mut rho = vec![[[Acc::default(); 2]; 4]; n_t];
    for node in nodes {
        for s in 0..n_t {
            let p = node.populations[s];
            for i in 0..3 {
                pop[s][i].add(node.weight * p[i]);
                pop_sq[s][i].add(node.weight * p[i] * p[i]);
            }
            let d = node.states[s];
            for j in 0..2 {
                for k in 0..2 {
                    let z = d[j] * d[k].conj() * node.weight;
                    rho[s][2 * j + k][0].add(z.re);
                    rho[s][2 * j + k][1].add(z.im);
                }
            }
        }
    }
    let populations: Vec<[f64; 3]> = pop.iter().map(|p| p.map(|a| a.value())).collect();
    let rho: Vec<CMat2> = rho
        .iter()
        .map(|r| {
            let e = |i: usize| C64::new(r[i][0].value(), r[i][1].value());
            CMat2::from_rows([[e(0), e(1)], [e(2), e(3)]])
        })
        .collect();
    let purity = rho.iter().map(purity).collect::<Result<Vec<_>>>()?;
    let standard_error = mc.then(|| {
        let n = nodes.len() as f64;
        populations
            .iter()
            .zip(&pop_sq)
            .map(|(m, sq)| [0, 1, 2].map(|i| ((sq[i].value() - m[i] * m[i]).max(0.0) / (n - 1.0)).sqrt()))
            .collect()
    });
    Ok(EnsembleResult { times, populations, rho, purity, standard_error, nodes: nodes.len() })
}

/// Averages the adiabatic evolution of `d0` over the thermal velocity distribution.
pub fn ensemble_average(cfg: &TripodConfig, spec: &ThermalSpec, scenario: &Scenario, d0: &CVec<2>) -> Result<EnsembleResult> {
    spec.validate()?;
    cfg.validate()?;
    let sched = scenario.schedule()?;
    let vbar = spec.thermal_velocity;
    if let Some(mc) = spec.monte_carlo {
        let normal = Normal::new(0.0, vbar).map_err(|e| Error::Config(e.to_string()))?;
        let chunks = mc.samples.div_ceil(MC_CHUNK);
        let nodes: Vec<NodeResult> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
                rng.set_stream(c as u64);
                let count = MC_CHUNK.min(mc.samples - c * MC_CHUNK);
                (0..count)
                    .map(|_| {
                        let v = [normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)];
                        run_node(cfg, &sched, &v, d0, 1.0 / mc.samples as f64)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        return accumulate(sched.samples.clone(), &nodes, true);
    }
    let axis = doppler_axis(cfg)?;
    let rule = if vbar == 0.0 { vec![(0.0, std::f64::consts::PI.sqrt())] } else { gauss_hermite(spec.order) };
    let norm = std::f64::consts::PI.sqrt();
    let nodes: Vec<NodeResult> = rule
        .par_iter()
        .map(|&(x, w)| {
            // projection s ~ N(0, vbar^2): s = sqrt2 vbar x
            let s = 2f64.sqrt() * vbar * x;
            run_node(cfg, &sched, &axis.map(|a| a * s), d0, w / norm)
        })
        .collect::<Result<Vec<_>>>()?;
    accumulate(sched.samples.clone(), &nodes, false)
}

/// [`ensemble_average`] plus an order-doubling convergence check.
pub fn ensemble_average_checked(
    cfg: &TripodConfig,
    spec: &ThermalSpec,
    scenario: &Scenario,
    d0: &CVec<2>,
) -> Result<EnsembleResult> {
    let base = ensemble_average(cfg, spec, scenario, d0)?;
    if spec.monte_carlo.is_some() || spec.thermal_velocity == 0.0 {
        return Ok(base);
    }
    let fine = ensemble_average(cfg, &spec.with_order(2 * spec.order), scenario, d0)?;
    let change = base.max_diff(&fine);
    if change > QUADRATURE_TOL {
        return Err(Error::NotConverged { change });
    }
    Ok(base)
}

/// `Tr(rho^2)` of a 2x2 density matrix.
pub fn purity(rho: &CMat2) -> Result<f64> {
    let tol = 1e-8;
    if rho.hermitian_deviation() > tol {
        return Err(Error::InvalidState("density matrix is not Hermitian".into()));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
        return Err(Error::InvalidState(format!("density matrix has trace {tr}")));
    }
    let det = rho.det().re;
    // eigenvalues of a unit-trace 2x2 are (1 +- sqrt(1 - 4 det)) / 2
    if det < -tol || 1.0 - 4.0 * det < -tol {
        return Err(Error::InvalidState("density matrix is not positive semidefinite".into()));
    }
    Ok((*rho * *rho).trace().re)
}

/// Eigenvalues of a Hermitian unit-trace 2x2 matrix, ascending.
pub fn density_eigenvalues(rho: &CMat2) -> [f64; 2] {
    let tr = rho.trace().re;
    let det = rho.det().re;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    [tr / 2.0 - disc, tr / 2.0 + disc]
}

/// One time-stamped population measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopulationRecord {
    pub t: f64,
    pub populations: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FitOptions {
    /// Fit a free amplitude and offset alongside `vbar`.
    pub nuisance: bool,
    /// Upper end of the `vbar` search; defaults to fifty times the value whose
    /// decay time equals the span of the data.
    pub v_max: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemperatureFit {
    pub thermal_velocity: f64,
    pub temperature_uk: f64,
    /// Root-mean-square residual of `P_3 - P_1`.
    pub residual: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// Upper end of the search interval.
    pub v_max: f64,
    /// Recovered `vbar` is indistinguishable from zero.
    pub no_decay: bool,
}

/// Least-squares fit of `P_3 - P_1 = a cos((4/3) omega_R t) exp(-(4/9)(k vbar t)^2) + b`.
pub fn fit_temperature(series: &[PopulationRecord], cfg: &TripodConfig, opts: &FitOptions) -> Result<TemperatureFit> {
    if series.len() < 3 {
        return Err(Error::FitFailure("need at least three points".into()));
    }
    let t: Vec<f64> = series.iter().map(|r| r.t).collect();
    let y: Vec<f64> = series.iter().map(|r| r.populations[2] - r.populations[0]).collect();
    let t_max = t.iter().cloned().fold(0.0, f64::max);
    if !(t_max > 0.0) {
        return Err(Error::FitFailure("series does not extend past t = 0".into()));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let spread = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread < 1e-6 {
        return Err(Error::FitFailure("difference signal is flat; vbar is not identifiable".into()));
    }
    let k = cfg.k();
    let w = 4.0 / 3.0 * cfg.recoil;
    let basis = |v: f64| -> Vec<f64> { t.iter().map(|&ti| (w * ti).cos() * envelope(cfg, v, ti)).collect() };
    let solve = |v: f64| -> (f64, f64, f64) {
        let f = basis(v);
        let (a, b) = if opts.nuisance {
            let n = f.len() as f64;
            let (sf, sy) = (f.iter().sum::<f64>(), y.iter().sum::<f64>());
            let sff: f64 = f.iter().map(|x| x * x).sum();
            let sfy: f64 = f.iter().zip(&y).map(|(a, b)| a * b).sum();
            let det = n * sff - sf * sf;
            if det.abs() < 1e-14 * n * sff.max(1e-300) {
                (0.0, sy / n)
            } else {
                ((n * sfy - sf * sy) / det, (sff * sy - sf * sfy) / det)
            }
        } else {
            (0.5, 0.0)
        };
        let ssr: f64 = f.iter().zip(&y).map(|(fi, yi)| (a * fi + b - yi).powi(2)).sum();
        (ssr, a, b)
    };
    let v_max = opts.v_max.unwrap_or(50.0 * 1.5 / (k * t_max));
    let n_grid = 1000;
    let grid: Vec<f64> = (0..=n_grid).map(|i| v_max * i as f64 / n_grid as f64).collect();
    let ssr: Vec<f64> = grid.iter().map(|&v| solve(v).0).collect();
    let best = (0..=n_grid).min_by(|&a, &b| ssr[a].total_cmp(&ssr[b])).expect("grid is non-empty");
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n_grid)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (solve(x1).0, solve(x2).0);
    while hi - lo > 1e-12 * v_max {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = solve(x1).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = solve(x2).0;
        }
    }
    let mut v = 0.5 * (lo + hi);
    if solve(0.0).0 <= solve(v).0 {
        v = 0.0;
    }
    let (ssr, a, b) = solve(v);
    if opts.nuisance && a.abs() < 1e-6 {
        return Err(Error::FitFailure("fitted oscillation amplitude vanishes".into()));
    }
    let mass = units::mass_from_recoil(k, cfg.recoil);
    Ok(TemperatureFit {
        thermal_velocity: v,
        temperature_uk: units::temperature_from_velocity(v, mass),
        residual: (ssr / y.len() as f64).sqrt(),
        amplitude: a,
        offset: b,
        v_max,
        no_decay: v < 1e-3 * v_max,
    })
}

/// Closed-form thermal series at `times` with Gaussian noise of standard
/// deviation `sigma / sqrt(shots)` on each population.
pub fn synthetic_series(
    cfg: &TripodConfig,
    thermal_velocity: f64,
    times: &[f64],
    sigma: f64,
    shots: usize,
    seed: u64,
) -> Result<Vec<PopulationRecord>> {
    let spec = ThermalSpec::new(thermal_velocity);
    let scale = sigma / (shots.max(1) as f64).sqrt();
    let normal = Normal::new(0.0, scale).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(times
        .iter()
        .map(|&t| {
            let mut p = mean_populations(cfg, &spec, t);
            if scale > 0.0 {
                for x in p.iter_mut() {
                    *x += normal.sample(&mut rng);
                }
            }
            PopulationRecord { t, populations: p }
        })
        .collect())
}

/// `sqrt(sum_i (P_i - P0_i)^2)` between thermal final populations and the
/// pinned-atom prediction for the same loop.
pub fn thermal_vs_pinned_distance(cfg: &TripodConfig, spec: &ThermalSpec, lp: &PhaseLoop, d0: &CVec<2>) -> Result<f64> {
    let thermal = ensemble_average(cfg, spec, &Scenario::Loop { path: lp.clone(), samples: 1 }, d0)?;
    let pinned = pinned_populations(cfg, lp, d0)?;
    let p = thermal.final_populations();
    Ok((0..3).map(|i| (p[i] - pinned[i]).powi(2)).sum::<f64>().sqrt())
}

/// Final bare populations of a pinned atom after `lp`.
pub fn pinned_populations(cfg: &TripodConfig, lp: &PhaseLoop, d0: &CVec<2>) -> Result<[f64; 3]> {
    let d = holonomy(lp, 1)?.mul_vec(d0);
    dark_bare_populations(cfg.steady_rabi(), &d)
}
