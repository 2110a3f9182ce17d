//! Time evolution of the tripod atom at a fixed centre-of-mass velocity.
//!
//! The full model works in the closed momentum family
//! `{|e, P>, |i, P - k_i>}` with `P = M v + k_3`, so the internal state
//! `|3>` carries momentum `M v`. Dropping the common `(M v)^2 / 2M` leaves
//! ground energies `E_i = -(k_i - k_3).v + omega_R |k_i - k_3|^2 / k^2`,
//! an excited energy `E_e = k_3.v + omega_R`, and position-independent
//! couplings `(Omega_i / 2) e^{i theta_i}`. This keeps the recoil shifts that
//! a classical `r = v t` Doppler model drops; the classical model is kept as
//! [`evolve_full_classical`].
//!
//! The adiabatic model evolves dark amplitudes with
//! `i d' = [E(v) - omega_t] d`, `E(v) = A^2/2M + W - A.v`.

use crate::error::{Error, Result};
use crate::holonomy::{PhaseLoop, PhasePoint};
use crate::qmath::{cis, norm_sqr, r, CMat, CMat2, CMat4, CVec, C64, ZERO};
use crate::tripod::{
    bare_hamiltonian, connection_general, coupling_hamiltonian, dot, gauge_potentials, real_dark_vectors, DarkFrame,
    Envelope, RampShape, Side, TripodConfig, Vec3,
};

/// Refinement stops once halving the step changes every sampled population by less than this.
pub const POPULATION_TOL: f64 = 1e-8;
/// Largest accepted `| |psi|^2 - 1 |`.
pub const NORM_DRIFT_TOL: f64 = 1e-6;
const MAX_HALVINGS: usize = 12;

/// Time dependence of the controlled phases `(phi_1, phi_2)`.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseProgram {
    Static(PhasePoint),
    /// Held at the path start until `start`, swept along `path`, then held at its end.
    Path { path: PhaseLoop, start: f64 },
}

impl PhaseProgram {
    pub fn phases(&self, t: f64) -> PhasePoint {
        match self {
            PhaseProgram::Static(p) => *p,
            PhaseProgram::Path { path, start } => path.phases_at(t - start),
        }
    }

    pub fn rates(&self, t: f64, side: Side) -> (f64, f64) {
        match self {
            PhaseProgram::Static(_) => (0.0, 0.0),
            PhaseProgram::Path { path, start } => {
                let s = t - start;
                let total = path.total_duration();
                if s < 0.0 || s > total || (s == 0.0 && side == Side::Left) || (s == total && side == Side::Right) {
                    return (0.0, 0.0);
                }
                let (i, _) = path.locate(s, side == Side::Left);
                path.segments()[i].rates()
            }
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            PhaseProgram::Static(_) => vec![],
            PhaseProgram::Path { path, start } => {
                let mut t = *start;
                let mut out = vec![t];
                for s in path.segments() {
                    t += s.duration;
                    out.push(t);
                }
                out
            }
        }
    }
}

/// Sample times, phase program and optional Rabi envelopes overriding the config.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub samples: Vec<f64>,
    pub phases: PhaseProgram,
    pub rabi: Option<[Envelope; 3]>,
}

impl Schedule {
    pub fn new(samples: Vec<f64>, phases: PhaseProgram) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("schedule needs at least one sample time".into()));
        }
        if samples[0] < 0.0 || samples.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("sample times must be non-negative and strictly increasing".into()));
        }
        Ok(Self { samples, phases, rabi: None })
    }

    /// Static phases sampled on `n + 1` evenly spaced points of `[0, t_end]`.
    pub fn hold(phases: PhasePoint, t_end: f64, n: usize) -> Result<Self> {
        Self::new(linspace(t_end, n), PhaseProgram::Static(phases))
    }

    /// A path starting at `t = 0`, sampled on `n + 1` points over its duration.
    pub fn sweep(path: PhaseLoop, n: usize) -> Result<Self> {
        let t = path.total_duration();
        Self::new(linspace(t, n), PhaseProgram::Path { path, start: 0.0 })
    }

    pub fn with_rabi(mut self, rabi: [Envelope; 3]) -> Self {
        self.rabi = Some(rabi);
        self
    }

    pub fn end(&self) -> f64 {
        *self.samples.last().expect("schedule has samples")
    }

    /// Config with this schedule's envelopes applied.
    pub fn apply(&self, cfg: &TripodConfig) -> TripodConfig {
        match self.rabi {
            Some(rabi) => cfg.clone().with_rabi(rabi),
            None => cfg.clone(),
        }
    }

    fn breakpoints(&self, cfg: &TripodConfig) -> Vec<f64> {
        let end = self.end();
        let mut bp: Vec<f64> = self.phases.breakpoints();
        for env in &cfg.rabi {
            bp.extend(env.breakpoints());
        }
        bp.extend(self.samples.iter().copied());
        bp.push(0.0);
        bp.retain(|&t| (0.0..=end).contains(&t));
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        bp
    }
}

fn linspace(t_end: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
}

/// Sampled solution of either integrator.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    /// Bare-basis 4-vectors or dark amplitudes.
    pub states: Vec<CVec<N>>,
    /// `(P_1, P_2, P_3)` at each sample.
    pub populations: Vec<[f64; 3]>,
    /// `P_e` at each sample; zero in the adiabatic model.
    pub excited: Vec<f64>,
    /// Largest `P_e` seen on any integration step.
    pub max_leakage: f64,
    /// Largest `| |psi|^2 - 1 |` seen on any integration step.
    pub norm_drift: f64,
    /// Accepted step size (zero for exact propagation).
    pub step: f64,
}

impl<const N: usize> Trajectory<N> {
    pub fn final_state(&self) -> CVec<N> {
        *self.states.last().expect("trajectory has samples")
    }

    pub fn final_populations(&self) -> [f64; 3] {
        *self.populations.last().expect("trajectory has samples")
    }

    fn max_population_diff(&self, other: &Self) -> f64 {
        self.populations
            .iter()
            .zip(&other.populations)
            .flat_map(|(a, b)| (0..3).map(move |i| (a[i] - b[i]).abs()))
            .fold(0.0, f64::max)
    }
}

/// Step-size policy for the RK4 integrators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPolicy {
    /// First step tried; `None` picks one from the Hamiltonian scale.
    pub initial_dt: Option<f64>,
    pub tolerance: f64,
    pub max_halvings: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self { initial_dt: None, tolerance: POPULATION_TOL, max_halvings: MAX_HALVINGS }
    }
}

fn rk4_step<const N: usize>(h: &dyn Fn(f64, Side) -> CMat<N>, t: f64, dt: f64, psi: &CVec<N>, last: bool) -> CVec<N> {
    let f = |tt: f64, side: Side, y: &CVec<N>| -> CVec<N> { h(tt, side).mul_vec(y).map(|x| C64::new(x.im, -x.re)) };
    let axpy = |y: &CVec<N>, k: &CVec<N>, a: f64| -> CVec<N> {
        let mut out = *y;
        for (o, kk) in out.iter_mut().zip(k) {
            *o += kk * a;
        }
        out
    };
    let k1 = f(t, Side::Right, psi);
    let k2 = f(t + 0.5 * dt, Side::Right, &axpy(psi, &k1, 0.5 * dt));
    let k3 = f(t + 0.5 * dt, Side::Right, &axpy(psi, &k2, 0.5 * dt));
    let k4 = f(t + dt, if last { Side::Left } else { Side::Right }, &axpy(psi, &k3, dt));
    let mut out = *psi;
    for i in 0..N {
        out[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
    }
    out
}

/// Fixed-step RK4 for `i psi' = H(t) psi`, restarting at every breakpoint so
/// the generator is smooth on each sub-interval.
fn integrate_fixed<const N: usize>(
    h: &dyn Fn(f64, Side) -> CMat<N>,
    psi0: CVec<N>,
    samples: &[f64],
    breakpoints: &[f64],
    dt: f64,
    observe: &dyn Fn(f64, &CVec<N>) -> ([f64; 3], f64),
) -> Trajectory<N> {
    let mut traj = Trajectory {
        times: Vec::with_capacity(samples.len()),
        states: Vec::with_capacity(samples.len()),
        populations: Vec::with_capacity(samples.len()),
        excited: Vec::with_capacity(samples.len()),
        max_leakage: 0.0,
        norm_drift: 0.0,
        step: dt,
    };
    let mut psi = psi0;
    let record = |t: f64, psi: &CVec<N>, traj: &mut Trajectory<N>| {
        let (p, e) = observe(t, psi);
        traj.times.push(t);
        traj.states.push(*psi);
        traj.populations.push(p);
        traj.excited.push(e);
    };
    let mut next_sample = 0;
    if samples[0] == 0.0 {
        record(0.0, &psi, &mut traj);
        next_sample = 1;
    }
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = ((b - a) / dt).ceil().max(1.0) as usize;
        let h_step = (b - a) / n as f64;
        for s in 0..n {
            let t = a + s as f64 * h_step;
            psi = rk4_step(h, t, h_step, &psi, s == n - 1);
            let (_, e) = observe(t + h_step, &psi);
            traj.max_leakage = traj.max_leakage.max(e);
            traj.norm_drift = traj.norm_drift.max((norm_sqr(&psi) - 1.0).abs());
        }
        if next_sample < samples.len() && samples[next_sample] == b {
            record(b, &psi, &mut traj);
            next_sample += 1;
        }
    }
    traj
}

fn integrate_converged<const N: usize>(
    h: &dyn Fn(f64, Side) -> CMat<N>,
    psi0: CVec<N>,
    samples: &[f64],
    breakpoints: &[f64],
    dt0: f64,
    policy: &StepPolicy,
    observe: &dyn Fn(f64, &CVec<N>) -> ([f64; 3], f64),
) -> Result<Trajectory<N>> {
    let mut dt = policy.initial_dt.unwrap_or(dt0);
    let mut coarse = integrate_fixed(h, psi0, samples, breakpoints, dt, observe);
    for _ in 0..policy.max_halvings {
        dt *= 0.5;
        let fine = integrate_fixed(h, psi0, samples, breakpoints, dt, observe);
        if fine.max_population_diff(&coarse) < policy.tolerance {
            if fine.norm_drift > NORM_DRIFT_TOL {
                return Err(Error::StepSizeFailure { drift: fine.norm_drift });
            }
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(Error::StepSizeFailure { drift: coarse.norm_drift })
}

fn check_normalized<const N: usize>(psi: &CVec<N>) -> Result<()> {
    let n = norm_sqr(psi);
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!("initial state has norm^2 {n}")));
    }
    Ok(())
}

/// Ground and excited energies of the momentum family at velocity `v`.
pub fn family_energies(cfg: &TripodConfig, v: &Vec3) -> [f64; 4] {
    let k = &cfg.wavevectors;
    let k2 = cfg.k() * cfg.k();
    let mut e = [0.0; 4];
    for i in 0..3 {
        let g = [k[i][0] - k[2][0], k[i][1] - k[2][1], k[i][2] - k[2][2]];
        e[i] = -dot(&g, v) + cfg.recoil * dot(&g, &g) / k2;
    }
    e[3] = dot(&k[2], v) + cfg.recoil;
    e
}

fn full_generator<'a>(cfg: &'a TripodConfig, sched: &'a Schedule, v: &Vec3) -> impl Fn(f64, Side) -> CMat4 + 'a {
    let e = family_energies(cfg, v);
    move |t, side| {
        let (p1, p2) = sched.phases.phases(t);
        let mut h = coupling_hamiltonian(cfg.rabi_at(t, side), [p1, p2, 0.0]);
        for (i, ei) in e.iter().enumerate() {
            h.m[i][i] = r(*ei);
        }
        h
    }
}

fn scale_estimate(cfg: &TripodConfig, sched: &Schedule, v: &Vec3) -> f64 {
    let rabi: f64 = cfg.rabi.iter().map(|e| e.final_value()).sum();
    let doppler = 2.0 * cfg.k() * v.iter().map(|x| x.abs()).sum::<f64>();
    let rates = sched
        .phases
        .breakpoints()
        .iter()
        .map(|&t| {
            let (a, b) = sched.phases.rates(t, Side::Right);
            a.abs() + b.abs()
        })
        .fold(0.0, f64::max);
    (rabi + doppler + 4.0 * cfg.recoil + rates).max(1e-3)
}

fn bare_observe(_t: f64, psi: &CVec<4>) -> ([f64; 3], f64) {
    ([psi[0].norm_sqr(), psi[1].norm_sqr(), psi[2].norm_sqr()], psi[3].norm_sqr())
}

/// Full four-level evolution in the momentum family, RK4 with step halving.
pub fn evolve_full(cfg: &TripodConfig, sched: &Schedule, v: &Vec3, psi0: &CVec<4>) -> Result<Trajectory<4>> {
    evolve_full_with(cfg, sched, v, psi0, &StepPolicy::default())
}

pub fn evolve_full_with(
    cfg: &TripodConfig,
    sched: &Schedule,
    v: &Vec3,
    psi0: &CVec<4>,
    policy: &StepPolicy,
) -> Result<Trajectory<4>> {
    check_normalized(psi0)?;
    let cfg = sched.apply(cfg);
    cfg.validate()?;
    let h = full_generator(&cfg, sched, v);
    let dt0 = 0.1 / scale_estimate(&cfg, sched, v);
    integrate_converged(&h, *psi0, &sched.samples, &sched.breakpoints(&cfg), dt0, policy, &bare_observe)
}

/// Four-level evolution with classical Doppler phases `k_i.(v t)` and no
/// kinetic energy; misses the recoil shifts.
pub fn evolve_full_classical(cfg: &TripodConfig, sched: &Schedule, v: &Vec3, psi0: &CVec<4>) -> Result<Trajectory<4>> {
    check_normalized(psi0)?;
    let base = sched.apply(cfg);
    base.validate()?;
    let h = |t: f64, side: Side| {
        let (p1, p2) = sched.phases.phases(t);
        let mut c = base.clone().with_offset_phases([p1, p2, 0.0]);
        c.rabi = base.rabi_at(t, side).map(Envelope::Constant);
        bare_hamiltonian(&c, &[v[0] * t, v[1] * t, v[2] * t], t)
    };
    let dt0 = 0.1 / scale_estimate(&base, sched, v);
    integrate_converged(&h, *psi0, &sched.samples, &sched.breakpoints(&base), dt0, &StepPolicy::default(), &bare_observe)
}

/// `E(v) = A^2/2M + W - A.v` projected from the family energies onto the real
/// dark vectors for the given amplitudes.
pub fn dark_energy(cfg: &TripodConfig, amplitudes: [f64; 3], v: &Vec3) -> Result<CMat2> {
    let x = real_dark_vectors(amplitudes)?;
    let e = family_energies(cfg, v);
    let mut m = CMat2::zeros();
    for j in 0..2 {
        for k in 0..2 {
            m.m[j][k] = r((0..3).map(|i| x[j][i] * x[k][i] * e[i]).sum());
        }
    }
    Ok(m)
}

/// Generator `E(v) - omega_t(t)` of the adiabatic model.
fn adiabatic_generator(cfg: &TripodConfig, sched: &Schedule, v: &Vec3) -> Result<impl Fn(f64, Side) -> CMat2> {
    let constant = cfg.rabi.iter().all(Envelope::is_constant);
    let fixed = if constant { Some(gauge_potentials(cfg)?.scalar_energy(v)) } else { None };
    let cfg = cfg.clone();
    let phases = sched.phases.clone();
    let v = *v;
    Ok(move |t: f64, side: Side| {
        let amps = cfg.rabi_at(t, side);
        let e = match fixed {
            Some(e) => e,
            None => dark_energy(&cfg, amps, &v).expect("dark manifold defined along the schedule"),
        };
        let (r1, r2) = phases.rates(t, side);
        let w = connection_general(amps, cfg.rabi_rates_at(t, side), r1, r2)
            .expect("dark manifold defined along the schedule");
        e - w
    })
}

/// Bare populations of dark amplitudes `d` for the given Rabi amplitudes.
pub fn dark_bare_populations(amplitudes: [f64; 3], d: &CVec<2>) -> Result<[f64; 3]> {
    let x = real_dark_vectors(amplitudes)?;
    Ok([0, 1, 2].map(|i| (d[0] * x[0][i] + d[1] * x[1][i]).norm_sqr()))
}

/// Adiabatic evolution of dark amplitudes, RK4 with step halving.
pub fn evolve_adiabatic(cfg: &TripodConfig, sched: &Schedule, v: &Vec3, d0: &CVec<2>) -> Result<Trajectory<2>> {
    evolve_adiabatic_with(cfg, sched, v, d0, &StepPolicy::default())
}

pub fn evolve_adiabatic_with(
    cfg: &TripodConfig,
    sched: &Schedule,
    v: &Vec3,
    d0: &CVec<2>,
    policy: &StepPolicy,
) -> Result<Trajectory<2>> {
    check_normalized(d0)?;
    let cfg = sched.apply(cfg);
    cfg.validate()?;
    let h = adiabatic_generator(&cfg, sched, v)?;
    let observe = |t: f64, d: &CVec<2>| -> ([f64; 3], f64) {
        let p = dark_bare_populations(cfg.rabi_at(t, Side::Right), d).expect("dark manifold defined");
        (p, 0.0)
    };
    let dt0 = 0.1 / scale_estimate(&cfg, sched, v);
    integrate_converged(&h, *d0, &sched.samples, &sched.breakpoints(&cfg), dt0, policy, &observe)
}

/// Exact adiabatic propagation for constant envelopes: the generator is
/// piecewise constant, so each piece is a closed-form exponential.
pub fn evolve_adiabatic_exact(cfg: &TripodConfig, sched: &Schedule, v: &Vec3, d0: &CVec<2>) -> Result<Trajectory<2>> {
    check_normalized(d0)?;
    let cfg = sched.apply(cfg);
    let h = piecewise_generator(&cfg, sched, v)?;
    let amps = cfg.steady_rabi();
    let mut traj = Trajectory {
        times: vec![],
        states: vec![],
        populations: vec![],
        excited: vec![],
        max_leakage: 0.0,
        norm_drift: 0.0,
        step: 0.0,
    };
    let bp = sched.breakpoints(&cfg);
    let mut d = *d0;
    let push = |t: f64, d: &CVec<2>, traj: &mut Trajectory<2>| -> Result<()> {
        traj.times.push(t);
        traj.states.push(*d);
        traj.populations.push(dark_bare_populations(amps, d)?);
        traj.excited.push(0.0);
        Ok(())
    };
    let mut next = 0;
    if sched.samples[0] == 0.0 {
        push(0.0, &d, &mut traj)?;
        next = 1;
    }
    for w in bp.windows(2) {
        d = h(w[0]).exp_i_hermitian(-(w[1] - w[0]))?.mul_vec(&d);
        if next < sched.samples.len() && sched.samples[next] == w[1] {
            push(w[1], &d, &mut traj)?;
            next += 1;
        }
    }
    traj.norm_drift = (norm_sqr(&d) - 1.0).abs();
    Ok(traj)
}

fn piecewise_generator(cfg: &TripodConfig, sched: &Schedule, v: &Vec3) -> Result<impl Fn(f64) -> CMat2> {
    if !cfg.rabi.iter().all(Envelope::is_constant) {
        return Err(Error::Config("exact propagation needs constant Rabi frequencies".into()));
    }
    cfg.validate()?;
    let h = adiabatic_generator(cfg, sched, v)?;
    Ok(move |t| h(t, Side::Right))
}

/// Exact adiabatic propagator from `0` to `t_end` for constant envelopes.
pub fn adiabatic_propagator(cfg: &TripodConfig, phases: &PhaseProgram, v: &Vec3, t_end: f64) -> Result<CMat2> {
    let sched = Schedule::new(vec![t_end], phases.clone())?;
    let h = piecewise_generator(cfg, &sched, v)?;
    let mut bp = phases.breakpoints();
    bp.push(0.0);
    bp.push(t_end);
    bp.retain(|&t| (0.0..=t_end).contains(&t));
    bp.sort_by(f64::total_cmp);
    bp.dedup();
    let mut u = CMat2::identity();
    for w in bp.windows(2) {
        u = h(w[0]).exp_i_hermitian(-(w[1] - w[0]))? * u;
    }
    Ok(u)
}

/// Oscillation frequency `omega_v = (2/3)[k (v_x - v_y) + 2 omega_R]` for the default geometry.
pub fn omega_v(cfg: &TripodConfig, v: &Vec3) -> f64 {
    2.0 / 3.0 * (cfg.k() * (v[0] - v[1]) + 2.0 * cfg.recoil)
}

/// Closed-form bare populations of `D_2` at velocity `v`, weighted by `p0`.
pub fn ballistic_populations(cfg: &TripodConfig, v: &Vec3, t: f64, p0: f64) -> [f64; 3] {
    let c = (omega_v(cfg, v) * t).cos();
    [p0 * (5.0 / 12.0 - c / 4.0), p0 / 6.0, p0 * (5.0 / 12.0 + c / 4.0)]
}

/// `P_i = |sum_j d_j <i|D_j>|^2`.
pub fn bare_populations(d: &CVec<2>, frame: &DarkFrame) -> [f64; 3] {
    let psi = frame.bare_amplitudes(d);
    [psi[0].norm_sqr(), psi[1].norm_sqr(), psi[2].norm_sqr()]
}

pub fn preset_d2() -> CVec<2> {
    [ZERO, r(1.0)]
}

/// `(|D_1> + sqrt3 |D_2>) / 2`
pub fn preset_mixed_ideal() -> CVec<2> {
    [r(0.5), r(3f64.sqrt() / 2.0)]
}

/// `0.6 |D_1> + 0.8 e^{0.15 i pi} |D_2>`
pub fn preset_mixed_measured() -> CVec<2> {
    [r(0.6), cis(0.15 * std::f64::consts::PI) * 0.8]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IgnitionStyle {
    /// Beams 1 and 2 on at once, beam 3 ramped up.
    D2,
    /// Beam 1 on at once, beam 3 ramped up, then beam 2 on at once.
    Mixed,
}

/// Outcome of a turn-on sequence starting from `|3>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ignition {
    /// Normalised projection onto the final dark frame.
    pub dark: CVec<2>,
    /// Probability left in the dark manifold.
    pub dark_weight: f64,
    /// `|<D_2|psi>|^2` for the D2 sequence, `|<target|psi>|^2` for the mixed one.
    pub fidelity: f64,
    pub max_leakage: f64,
    /// Leakage above 5%.
    pub failed: bool,
}

/// Turn-on sequence with a ramp of length `t0` and the given ramp shape.
pub fn ignite(cfg: &TripodConfig, style: IgnitionStyle, t0: f64, shape: RampShape) -> Result<Ignition> {
    let amp = cfg.steady_rabi();
    let ramp = Envelope::Ramp { amplitude: amp[2], start: 0.0, duration: t0, shape };
    let (rabi, target) = match style {
        IgnitionStyle::D2 => ([Envelope::Constant(amp[0]), Envelope::Constant(amp[1]), ramp], preset_d2()),
        IgnitionStyle::Mixed => {
            let late = Envelope::step(amp[1], t0);
            ([Envelope::Constant(amp[0]), late, ramp], preset_mixed_ideal())
        }
    };
    let phases = cfg.controlled_phases();
    let sched = Schedule::new(vec![t0], PhaseProgram::Static(phases))?.with_rabi(rabi);
    let psi0 = [ZERO, ZERO, r(1.0), ZERO];
    let traj = evolve_full(cfg, &sched, &[0.0; 3], &psi0)?;
    let frame = DarkFrame::from_relative_phases(amp, phases.0, phases.1)?;
    let d = frame.project(&traj.final_state());
    let weight = norm_sqr(&d);
    let dark = if weight > 0.0 { d.map(|x| x / weight.sqrt()) } else { d };
    let overlap = (target[0].conj() * d[0] + target[1].conj() * d[1]).norm_sqr();
    Ok(Ignition { dark, dark_weight: weight, fidelity: overlap, max_leakage: traj.max_leakage, failed: traj.max_leakage > 0.05 })
}
