//! The tripod atom: three ground states `|1>, |2>, |3>` resonantly coupled to
//! one excited state `|e>` by three laser beams.
//!
//! Bare basis order is `(|1>, |2>, |3>, |e>)`. With `hbar = 1` the coupling is
//! `H = sum_i (Omega_i / 2) e^{i Phi_i(r)} |e><i| + h.c.` with
//! `Phi_i(r) = k_i . r + theta_i`. The dark states are written as
//! `D_j = diag(e^{-i Phi_13}, e^{-i Phi_23}, 1) x_j` where `x_j` are real null
//! vectors of the amplitude row `(Omega_1, Omega_2, Omega_3)`:
//!
//! ```text
//! x_1 ~ (Omega_2, -Omega_1, 0)
//! x_2 ~ (Omega_1 Omega_3, Omega_2 Omega_3, -(Omega_1^2 + Omega_2^2))
//! ```
//!
//! For equal amplitudes this is `(1,-1,0)/sqrt2` and `(1,1,-2)/sqrt6`.

use crate::error::{Error, Result};
use crate::qmath::{cis, inner, r, CMat2, CMat4, CVec, C64, I, ZERO};
use crate::units;

pub type Vec3 = [f64; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm3(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Which one-sided limit to take for piecewise quantities evaluated exactly
/// on a breakpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RampShape {
    Linear,
    SineSquared,
}

/// Time dependence of one Rabi frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Envelope {
    Constant(f64),
    /// Zero before `start`, then rises to `amplitude` over `duration`
    /// (a step when `duration == 0`).
    Ramp {
        amplitude: f64,
        start: f64,
        duration: f64,
        shape: RampShape,
    },
}

impl Envelope {
    pub fn step(amplitude: f64, start: f64) -> Self {
        Envelope::Ramp { amplitude, start, duration: 0.0, shape: RampShape::Linear }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.value_sided(t, Side::Right)
    }

    pub fn value_sided(&self, t: f64, side: Side) -> f64 {
        match *self {
            Envelope::Constant(a) => a,
            Envelope::Ramp { amplitude, start, duration, shape } => {
                if t < start || (t == start && side == Side::Left) {
                    return 0.0;
                }
                if duration <= 0.0 || t >= start + duration {
                    return amplitude;
                }
                let x = (t - start) / duration;
                let f = match shape {
                    RampShape::Linear => x,
                    RampShape::SineSquared => (0.5 * std::f64::consts::PI * x).sin().powi(2),
                };
                amplitude * f
            }
        }
    }

    /// Time derivative, one-sided at breakpoints.
    pub fn rate(&self, t: f64, side: Side) -> f64 {
        match *self {
            Envelope::Constant(_) => 0.0,
            Envelope::Ramp { amplitude, start, duration, shape } => {
                if duration <= 0.0 {
                    return 0.0;
                }
                let end = start + duration;
                let inside = (t > start && t < end)
                    || (t == start && side == Side::Right)
                    || (t == end && side == Side::Left);
                if !inside {
                    return 0.0;
                }
                match shape {
                    RampShape::Linear => amplitude / duration,
                    RampShape::SineSquared => {
                        let x = (t - start) / duration;
                        amplitude * std::f64::consts::PI / (2.0 * duration) * (std::f64::consts::PI * x).sin()
                    }
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Envelope::Constant(_))
    }

    /// Value once the envelope has settled.
    pub fn final_value(&self) -> f64 {
        match *self {
            Envelope::Constant(a) => a,
            Envelope::Ramp { amplitude, .. } => amplitude,
        }
    }

    /// Times where the envelope or its derivative is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Envelope::Constant(_) => vec![],
            Envelope::Ramp { start, duration, .. } if duration > 0.0 => vec![start, start + duration],
            Envelope::Ramp { start, .. } => vec![start],
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            Envelope::Constant(a) => a >= 0.0 && a.is_finite(),
            Envelope::Ramp { amplitude, duration, start, .. } => {
                amplitude >= 0.0 && duration >= 0.0 && start.is_finite() && amplitude.is_finite()
            }
        }
    }
}

/// Laser geometry, Rabi envelopes and atomic constants.
#[derive(Clone, Debug, PartialEq)]
pub struct TripodConfig {
    /// `k_1, k_2, k_3` in rad/um.
    pub wavevectors: [Vec3; 3],
    /// `Omega_i(t)` in rad/us.
    pub rabi: [Envelope; 3],
    /// `theta_1, theta_2, theta_3`; the controlled phases are `phi_i = theta_i - theta_3`.
    pub offset_phases: [f64; 3],
    /// `omega_R = hbar k^2 / 2M` in rad/us; zero is the pinned (infinite mass) limit.
    pub recoil: f64,
    /// `sqrt(k_B T / M)` in um/us.
    pub thermal_velocity: f64,
}

impl TripodConfig {
    /// Sr-87 on the 689 nm line with beams 1 and 3 along x, beam 2 along y,
    /// equal constant Rabi frequencies `rabi` (rad/us) and a gas at 0.5 uK.
    pub fn sr87(rabi: f64) -> Self {
        let k = units::wavenumber(units::SR87_WAVELENGTH_UM);
        Self {
            wavevectors: [[k, 0.0, 0.0], [0.0, k, 0.0], [k, 0.0, 0.0]],
            rabi: [Envelope::Constant(rabi); 3],
            offset_phases: [0.0; 3],
            recoil: units::sr87_recoil_frequency(),
            thermal_velocity: units::sr87_thermal_velocity(0.5),
        }
    }

    pub fn with_temperature_uk(mut self, temperature_uk: f64) -> Self {
        self.thermal_velocity = units::sr87_thermal_velocity(temperature_uk);
        self
    }

    pub fn with_thermal_velocity(mut self, v: f64) -> Self {
        self.thermal_velocity = v;
        self
    }

    pub fn with_recoil(mut self, recoil: f64) -> Self {
        self.recoil = recoil;
        self
    }

    pub fn with_rabi(mut self, rabi: [Envelope; 3]) -> Self {
        self.rabi = rabi;
        self
    }

    /// Multiplies each beam's amplitude, e.g. `[1.0, 1.1, 1.0]` for a 10% excess on beam 2.
    pub fn with_rabi_scale(mut self, scale: [f64; 3]) -> Self {
        for (env, s) in self.rabi.iter_mut().zip(scale) {
            *env = match *env {
                Envelope::Constant(a) => Envelope::Constant(a * s),
                Envelope::Ramp { amplitude, start, duration, shape } => {
                    Envelope::Ramp { amplitude: amplitude * s, start, duration, shape }
                }
            };
        }
        self
    }

    pub fn with_offset_phases(mut self, phases: [f64; 3]) -> Self {
        self.offset_phases = phases;
        self
    }

    /// Laser wavenumber `|k_i|`.
    pub fn k(&self) -> f64 {
        norm3(&self.wavevectors[0])
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if !(k > 0.0) {
            return Err(Error::Config("wavevectors must be nonzero".into()));
        }
        for kv in &self.wavevectors {
            if (norm3(kv) - k).abs() > 1e-9 * k {
                return Err(Error::Config("all wavevectors must share the same magnitude".into()));
            }
        }
        if !self.rabi.iter().all(Envelope::is_valid) {
            return Err(Error::Config("Rabi envelopes must be non-negative".into()));
        }
        if !(self.recoil >= 0.0) {
            return Err(Error::Config("recoil frequency must be non-negative".into()));
        }
        if !(self.thermal_velocity >= 0.0) {
            return Err(Error::Config("thermal velocity must be non-negative".into()));
        }
        Ok(())
    }

    pub fn rabi_at(&self, t: f64, side: Side) -> [f64; 3] {
        [0, 1, 2].map(|i| self.rabi[i].value_sided(t, side))
    }

    pub fn rabi_rates_at(&self, t: f64, side: Side) -> [f64; 3] {
        [0, 1, 2].map(|i| self.rabi[i].rate(t, side))
    }

    pub fn steady_rabi(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.rabi[i].final_value())
    }

    pub fn has_equal_rabi(&self) -> bool {
        let a = self.steady_rabi();
        let scale = a.iter().cloned().fold(0.0, f64::max);
        scale > 0.0 && a.iter().all(|x| (x - a[0]).abs() <= 1e-12 * scale)
    }

    /// `(phi_1, phi_2)` from the offset phases.
    pub fn controlled_phases(&self) -> (f64, f64) {
        let t = &self.offset_phases;
        (t[0] - t[2], t[1] - t[2])
    }

    /// `1 / 2M` in internal units, `omega_R / k^2`.
    pub fn inverse_two_mass(&self) -> f64 {
        self.recoil / (self.k() * self.k())
    }

    /// Dark frame at `r` for the configured offset phases.
    pub fn dark_frame_at(&self, r: &Vec3) -> Result<DarkFrame> {
        let (p1, p2) = self.controlled_phases();
        dark_basis(self, r, p1, p2)
    }
}

/// `H = sum_i (Omega_i/2) e^{i Phi_i} |e><i| + h.c.` for given amplitudes and phases.
pub fn coupling_hamiltonian(amplitudes: [f64; 3], phases: [f64; 3]) -> CMat4 {
    let mut h = CMat4::zeros();
    for i in 0..3 {
        let g = cis(phases[i]) * (0.5 * amplitudes[i]);
        h.m[3][i] = g;
        h.m[i][3] = g.conj();
    }
    h
}

/// The rotating-wave interaction Hamiltonian at position `r` and time `t`.
pub fn bare_hamiltonian(cfg: &TripodConfig, r: &Vec3, t: f64) -> CMat4 {
    let phases = [0, 1, 2].map(|i| dot(&cfg.wavevectors[i], r) + cfg.offset_phases[i]);
    coupling_hamiltonian(cfg.rabi_at(t, Side::Right), phases)
}

/// Real orthonormal null vectors `x_1, x_2` of the amplitude row.
pub fn real_dark_vectors(amplitudes: [f64; 3]) -> Result<[[f64; 3]; 2]> {
    let [a1, a2, a3] = amplitudes;
    let scale = a1.abs().max(a2.abs()).max(a3.abs());
    if !(scale > 0.0) {
        return Err(Error::DegenerateCoupling);
    }
    let (a1, a2, a3) = (a1 / scale, a2 / scale, a3 / scale);
    let s12 = a1 * a1 + a2 * a2;
    if s12 < 1e-24 {
        // only beam 3 is on: |1> and |2> are both dark
        return Ok([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
    }
    let n1 = s12.sqrt();
    let x1 = [a2 / n1, -a1 / n1, 0.0];
    let v2 = [a1 * a3, a2 * a3, -s12];
    let n2 = (v2[0] * v2[0] + v2[1] * v2[1] + v2[2] * v2[2]).sqrt();
    Ok([x1, v2.map(|x| x / n2)])
}

/// Orthonormal basis of the dark manifold at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DarkFrame {
    /// `|D_1>, |D_2>` in the bare basis; the excited component is zero.
    pub vectors: [CVec<4>; 2],
    pub position: Vec3,
    pub phases: (f64, f64),
}

impl DarkFrame {
    /// Builds `D_j = diag(e^{-i Phi_13}, e^{-i Phi_23}, 1) x_j`.
    pub fn from_relative_phases(amplitudes: [f64; 3], phi13: f64, phi23: f64) -> Result<Self> {
        let x = real_dark_vectors(amplitudes)?;
        let ph = [cis(-phi13), cis(-phi23), r(1.0)];
        let vectors = x.map(|xj| [ph[0] * xj[0], ph[1] * xj[1], ph[2] * xj[2], ZERO]);
        Ok(Self { vectors, position: [0.0; 3], phases: (phi13, phi23) })
    }

    /// `sum_j d_j |D_j>` in the bare basis.
    pub fn bare_amplitudes(&self, d: &CVec<2>) -> CVec<4> {
        let mut out = [ZERO; 4];
        for (j, dj) in d.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(&self.vectors[j]) {
                *o += dj * v;
            }
        }
        out
    }

    /// Components `<D_j|psi>`.
    pub fn project(&self, psi: &CVec<4>) -> CVec<2> {
        [inner(&self.vectors[0], psi), inner(&self.vectors[1], psi)]
    }

    /// Overlap matrix `O_jk = <self_j | other_k>`.
    pub fn overlap(&self, other: &DarkFrame) -> CMat2 {
        let mut o = CMat2::zeros();
        for j in 0..2 {
            for k in 0..2 {
                o.m[j][k] = inner(&self.vectors[j], &other.vectors[k]);
            }
        }
        o
    }

    /// Re-expresses this frame with the unitary rotation that maximises its
    /// overlap with `prev`, so frames sampled along a path vary smoothly.
    pub fn aligned_to(&self, prev: &DarkFrame) -> Result<DarkFrame> {
        // new_k' = sum_j new_j G_jk with G the polar factor of <new|prev>
        let g = self.overlap(prev).closest_unitary()?;
        let mut vectors = [[ZERO; 4]; 2];
        for k in 0..2 {
            for j in 0..2 {
                for i in 0..4 {
                    vectors[k][i] += self.vectors[j][i] * g.m[j][k];
                }
            }
        }
        Ok(DarkFrame { vectors, ..*self })
    }

    pub fn orthonormality_error(&self) -> f64 {
        let o = self.overlap(self);
        o.max_abs_diff(&CMat2::identity())
    }
}

/// Dark-state basis at position `r` for controlled phases `(phi_1, phi_2)`.
///
/// Amplitudes are the settled values of the configured envelopes.
pub fn dark_basis(cfg: &TripodConfig, r: &Vec3, phi1: f64, phi2: f64) -> Result<DarkFrame> {
    let k = &cfg.wavevectors;
    let phi13 = dot(&sub(&k[0], &k[2]), r) + phi1;
    let phi23 = dot(&sub(&k[1], &k[2]), r) + phi2;
    let mut frame = DarkFrame::from_relative_phases(cfg.steady_rabi(), phi13, phi23)?;
    frame.position = *r;
    frame.phases = (phi1, phi2);
    Ok(frame)
}

/// `omega_t` for equal, constant Rabi frequencies and phase rates `(phi1_dot, phi2_dot)`.
pub fn connection_omega_t(rate1: f64, rate2: f64) -> CMat2 {
    let s3 = 3f64.sqrt();
    let sum = rate1 + rate2;
    let diff = (rate1 - rate2) / s3;
    CMat2::from_real([[sum, diff], [diff, sum / 3.0]]).scale_re(0.5)
}

/// `omega_t = i <D_j | dD_k/dt>` for arbitrary amplitudes.
///
/// `amplitude_rates` are `dOmega_i/dt`; the amplitude contribution
/// `i x_j . dx_k/dt` is evaluated by central differences of the real frame.
pub fn connection_general(
    amplitudes: [f64; 3],
    amplitude_rates: [f64; 3],
    rate1: f64,
    rate2: f64,
) -> Result<CMat2> {
    let x = real_dark_vectors(amplitudes)?;
    let rates = [rate1, rate2, 0.0];
    let mut w = CMat2::zeros();
    for j in 0..2 {
        for k in 0..2 {
            let s: f64 = (0..3).map(|i| rates[i] * x[j][i] * x[k][i]).sum();
            w.m[j][k] = r(s);
        }
    }
    if amplitude_rates.iter().any(|&a| a != 0.0) {
        let scale = amplitudes.iter().cloned().fold(0.0, f64::max);
        let rate_scale = amplitude_rates.iter().map(|a| a.abs()).fold(0.0, f64::max);
        let h = 1e-5 * scale / rate_scale;
        let plus = real_dark_vectors([0, 1, 2].map(|i| amplitudes[i] + h * amplitude_rates[i]))?;
        let minus = real_dark_vectors([0, 1, 2].map(|i| amplitudes[i] - h * amplitude_rates[i]))?;
        for j in 0..2 {
            for k in 0..2 {
                let xdot: f64 = (0..3).map(|i| x[j][i] * (plus[k][i] - minus[k][i]) / (2.0 * h)).sum();
                w.m[j][k] += I * xdot;
            }
        }
        // antisymmetric part is exact only to O(h^2); restore Hermiticity
        w = (w + w.adjoint()).scale_re(0.5);
    }
    Ok(w)
}

/// The rank-one projector `(1 + s.sigma)/2` with `s = (-sqrt3/2, 0, 1/2)`
/// shared by `A`, `A^2/2M` and `W` in the equal-amplitude geometry.
pub fn projector_m() -> CMat2 {
    let s3 = 3f64.sqrt();
    CMat2::from_real([[0.75, -s3 / 4.0], [-s3 / 4.0, 0.25]])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialMethod {
    ClosedForm,
    FiniteDifference,
}

/// Synthetic gauge potentials of the dark manifold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugePotentials {
    /// Cartesian components of `A` (momentum units, rad/um).
    pub vector: [CMat2; 3],
    /// `A^2 / 2M` in rad/us.
    pub a_sq_over_2m: CMat2,
    /// Scalar potential `W` in rad/us.
    pub scalar: CMat2,
    /// Common matrix form `M`, when one exists.
    pub projector: Option<CMat2>,
    pub method: PotentialMethod,
}

impl GaugePotentials {
    /// `A . v`
    pub fn vector_dot(&self, v: &Vec3) -> CMat2 {
        self.vector[0].scale_re(v[0]) + self.vector[1].scale_re(v[1]) + self.vector[2].scale_re(v[2])
    }

    /// Internal energy of a plane wave with velocity `v`, `p^2/2M` dropped:
    /// `A^2/2M + W - A.v`.
    pub fn scalar_energy(&self, v: &Vec3) -> CMat2 {
        self.a_sq_over_2m + self.scalar - self.vector_dot(v)
    }
}

/// `A`, `A^2/2M`, `W` and `M`.
///
/// Closed forms are used for equal amplitudes with `k_1 = k_3`; any other
/// configuration goes through central finite differences of [`dark_basis`].
/// `W` always follows from its definition
/// `W = (<grad D_j|grad D_k> - (A^2)_jk) / 2M`.
pub fn gauge_potentials(cfg: &TripodConfig) -> Result<GaugePotentials> {
    cfg.validate()?;
    let k = &cfg.wavevectors;
    let co_propagating_13 = norm3(&sub(&k[0], &k[2])) <= 1e-12 * cfg.k();
    if !(cfg.has_equal_rabi() && co_propagating_13) {
        let h = 1e-4 * 2.0 * std::f64::consts::PI / cfg.k();
        return gauge_potentials_finite_difference(cfg, h);
    }
    let q = sub(&k[1], &k[0]);
    let m = projector_m();
    let vector = [0, 1, 2].map(|a| m.scale_re(2.0 * q[a] / 3.0));
    let a_sq_over_2m = m.scale_re(cfg.inverse_two_mass() * 4.0 * dot(&q, &q) / 9.0);
    let scalar = scalar_potential_analytic(cfg)?;
    Ok(GaugePotentials {
        vector,
        a_sq_over_2m,
        scalar,
        projector: Some(m),
        method: PotentialMethod::ClosedForm,
    })
}

/// `W` from the analytic gradients of the dark frame,
/// `grad D_j,i = -i (k_i - k_3) D_j,i`.
pub fn scalar_potential_analytic(cfg: &TripodConfig) -> Result<CMat2> {
    let x = real_dark_vectors(cfg.steady_rabi())?;
    let k = &cfg.wavevectors;
    let g = [sub(&k[0], &k[2]), sub(&k[1], &k[2]), [0.0; 3]];
    let mut grad_sq = CMat2::zeros();
    let mut a = [CMat2::zeros(); 3];
    for j in 0..2 {
        for l in 0..2 {
            for i in 0..3 {
                let w = x[j][i] * x[l][i];
                grad_sq.m[j][l] += r(w * dot(&g[i], &g[i]));
                for (ax, comp) in a.iter_mut().zip(g[i]) {
                    ax.m[j][l] += r(w * comp);
                }
            }
        }
    }
    let a_sq = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
    Ok((grad_sq - a_sq).scale_re(cfg.inverse_two_mass()))
}

/// Finite-difference evaluation of `A_jk = i <D_j|grad D_k>` and `W` at `r = 0`.
pub fn gauge_potentials_finite_difference(cfg: &TripodConfig, step: f64) -> Result<GaugePotentials> {
    let (p1, p2) = cfg.controlled_phases();
    let origin = [0.0; 3];
    let centre = dark_basis(cfg, &origin, p1, p2)?;
    let mut vector = [CMat2::zeros(); 3];
    let mut grad_sq = CMat2::zeros();
    for axis in 0..3 {
        let mut rp = origin;
        let mut rm = origin;
        rp[axis] += step;
        rm[axis] -= step;
        let fp = dark_basis(cfg, &rp, p1, p2)?;
        let fm = dark_basis(cfg, &rm, p1, p2)?;
        let mut jump = 0.0f64;
        let mut deriv = [[ZERO; 4]; 2];
        for j in 0..2 {
            for i in 0..4 {
                deriv[j][i] = (fp.vectors[j][i] - fm.vectors[j][i]) / (2.0 * step);
                jump = jump.max((fp.vectors[j][i] - centre.vectors[j][i]).norm());
                jump = jump.max((centre.vectors[j][i] - fm.vectors[j][i]).norm());
            }
        }
        // a smooth gauge moves each component by about |k| * step
        if jump > 10.0 * 2.0 * cfg.k() * step + 1e-12 {
            return Err(Error::GaugeDiscontinuity { residual: jump });
        }
        for j in 0..2 {
            for l in 0..2 {
                vector[axis].m[j][l] = I * inner(&centre.vectors[j], &deriv[l]);
                grad_sq.m[j][l] += inner(&deriv[j], &deriv[l]);
            }
        }
        vector[axis] = (vector[axis] + vector[axis].adjoint()).scale_re(0.5);
    }
    let grad_sq = (grad_sq + grad_sq.adjoint()).scale_re(0.5);
    let a_sq = vector[0] * vector[0] + vector[1] * vector[1] + vector[2] * vector[2];
    let inv2m = cfg.inverse_two_mass();
    Ok(GaugePotentials {
        vector,
        a_sq_over_2m: a_sq.scale_re(inv2m),
        scalar: (grad_sq - a_sq).scale_re(inv2m),
        projector: None,
        method: PotentialMethod::FiniteDifference,
    })
}

/// Real null-space check: largest `|<e|H|D_j>|` relative to the coupling scale.
pub fn dark_residual(amplitudes: [f64; 3], phases: [f64; 3], frame: &DarkFrame) -> f64 {
    let row: [C64; 3] = [0, 1, 2].map(|i| cis(phases[i]) * amplitudes[i]);
    frame
        .vectors
        .iter()
        .map(|d| (0..3).map(|i| row[i] * d[i]).sum::<C64>().norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::c;
    use std::f64::consts::PI;

    fn cfg() -> TripodConfig {
        TripodConfig::sr87(units::khz_to_rad_per_us(450.0))
    }

    #[test]
    fn envelope_rates_match_differences() {
        for shape in [RampShape::Linear, RampShape::SineSquared] {
            let e = Envelope::Ramp { amplitude: 2.0, start: 1.0, duration: 8.0, shape };
            for t in [1.5, 3.0, 6.2, 8.9] {
                let num = (e.value(t + 1e-6) - e.value(t - 1e-6)) / 2e-6;
                assert!((e.rate(t, Side::Right) - num).abs() < 1e-6);
            }
            assert_eq!(e.value_sided(1.0, Side::Left), 0.0);
            assert_eq!(e.rate(0.5, Side::Right), 0.0);
            assert_eq!(e.value(20.0), 2.0);
        }
        let s = Envelope::step(1.5, 2.0);
        assert_eq!(s.value_sided(2.0, Side::Left), 0.0);
        assert_eq!(s.value_sided(2.0, Side::Right), 1.5);
        assert_eq!(s.breakpoints(), vec![2.0]);
    }

    #[test]
    fn uncoupled_hamiltonian_is_zero() {
        let cfg = cfg().with_rabi([Envelope::Constant(0.0); 3]);
        assert_eq!(bare_hamiltonian(&cfg, &[0.3, 0.2, 0.0], 1.0).max_abs(), 0.0);
    }

    #[test]
    fn bright_splitting() {
        let omega = units::khz_to_rad_per_us(450.0);
        let h = bare_hamiltonian(&cfg(), &[0.1, -0.4, 0.2], 0.0);
        let ev = h.hermitian_eigenvalues().unwrap();
        let half = 3f64.sqrt() / 2.0 * omega;
        assert!((ev[0] + half).abs() < 1e-12 && (ev[3] - half).abs() < 1e-12);
        assert!(ev[1].abs() < 1e-12 && ev[2].abs() < 1e-12);
        let split_khz = units::rad_per_us_to_khz(ev[3] - ev[0]);
        assert!((split_khz - 780.0).abs() < 1.0, "{split_khz}");
    }

    #[test]
    fn eq1_dark_states_are_dark() {
        let cfg = cfg().with_offset_phases([0.4, -1.3, 0.2]);
        let r = [0.37, -0.12, 0.05];
        let h = bare_hamiltonian(&cfg, &r, 0.0);
        let frame = cfg.dark_frame_at(&r).unwrap();
        for d in &frame.vectors {
            let hd = h.mul_vec(d);
            assert!(hd.iter().all(|x| x.norm() < 1e-14));
        }
    }

    #[test]
    fn dark_basis_at_origin() {
        let f = dark_basis(&cfg(), &[0.0; 3], 0.0, 0.0).unwrap();
        let s2 = 2f64.sqrt();
        let s6 = 6f64.sqrt();
        let d1 = [r(1.0 / s2), r(-1.0 / s2), ZERO, ZERO];
        let d2 = [r(1.0 / s6), r(1.0 / s6), r(-2.0 / s6), ZERO];
        for i in 0..4 {
            assert!((f.vectors[0][i] - d1[i]).norm() < 1e-15);
            assert!((f.vectors[1][i] - d2[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn dark_basis_matches_eq1_with_phases() {
        let cfg = cfg();
        let pos = [0.21, 0.83, 0.0];
        let (p1, p2) = (0.7, 2.1);
        let f = dark_basis(&cfg, &pos, p1, p2).unwrap();
        let k = cfg.k();
        let phi13 = p1; // k1 = k3
        let phi23 = k * pos[1] - k * pos[0] + p2;
        let s2 = 2f64.sqrt();
        let s6 = 6f64.sqrt();
        let d1 = [cis(-phi13) / s2, -cis(-phi23) / s2, ZERO, ZERO];
        let d2 = [cis(-phi13) / s6, cis(-phi23) / s6, r(-2.0 / s6), ZERO];
        for i in 0..4 {
            assert!((f.vectors[0][i] - d1[i]).norm() < 1e-14);
            assert!((f.vectors[1][i] - d2[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn imbalanced_frame_is_orthonormal_and_dark() {
        let cfg = cfg().with_rabi_scale([1.0, 1.1, 1.0]);
        let frame = dark_basis(&cfg, &[0.0; 3], 0.9, -0.4).unwrap();
        assert!(frame.orthonormality_error() < 1e-12);
        let res = dark_residual(cfg.steady_rabi(), [0.9, -0.4, 0.0], &frame);
        assert!(res < 1e-12, "{res}");
    }

    #[test]
    fn common_phase_shift_leaves_frame_unchanged() {
        let a = cfg().with_offset_phases([0.3, 1.2, -0.5]);
        let b = cfg().with_offset_phases([0.3 + 2.2, 1.2 + 2.2, -0.5 + 2.2]);
        let r = [0.4, 0.1, 0.0];
        let fa = a.dark_frame_at(&r).unwrap();
        let fb = b.dark_frame_at(&r).unwrap();
        for j in 0..2 {
            for i in 0..4 {
                assert!((fa.vectors[j][i] - fb.vectors[j][i]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn all_beams_off_is_degenerate() {
        let cfg = cfg().with_rabi([Envelope::Constant(0.0); 3]);
        assert!(matches!(dark_basis(&cfg, &[0.0; 3], 0.0, 0.0), Err(Error::DegenerateCoupling)));
    }

    #[test]
    fn single_beam_frames() {
        for amps in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]] {
            let f = DarkFrame::from_relative_phases(amps, 0.3, -0.2).unwrap();
            assert!(f.orthonormality_error() < 1e-14);
            assert!(dark_residual(amps, [0.3, -0.2, 0.0], &f) < 1e-14);
        }
    }

    #[test]
    fn projector_properties() {
        let m = projector_m();
        assert!((m * m).max_abs_diff(&m) < 1e-15);
        let [a0, ax, ay, az] = m.pauli_coefficients();
        assert!((a0 - 0.5).abs() < 1e-15);
        assert!((2.0 * ax + 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(ay.abs() < 1e-15 && (2.0 * az - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_potentials() {
        let cfg = cfg();
        let gp = gauge_potentials(&cfg).unwrap();
        assert_eq!(gp.method, PotentialMethod::ClosedForm);
        let m = projector_m();
        let wr = cfg.recoil;
        assert!(gp.a_sq_over_2m.max_abs_diff(&m.scale_re(8.0 * wr / 9.0)) < 1e-15);
        // W from its definition has the positive sign
        assert!(gp.scalar.max_abs_diff(&m.scale_re(4.0 * wr / 9.0)) < 1e-15);
        let k = cfg.k();
        assert!(gp.vector[0].max_abs_diff(&m.scale_re(-2.0 * k / 3.0)) < 1e-13);
        assert!(gp.vector[1].max_abs_diff(&m.scale_re(2.0 * k / 3.0)) < 1e-13);
        // scalar gap (A^2/2M + W) = (4/3) omega_R
        let gap = (gp.a_sq_over_2m + gp.scalar).trace().re;
        assert!((gap - 4.0 * wr / 3.0).abs() < 1e-15);
    }

    #[test]
    fn finite_differences_agree_with_closed_forms() {
        let cfg = cfg().with_offset_phases([0.8, -0.3, 0.1]);
        let closed = gauge_potentials(&cfg).unwrap();
        let step = 1e-4 * units::SR87_WAVELENGTH_UM;
        let fd = gauge_potentials_finite_difference(&cfg, step).unwrap();
        for a in 0..3 {
            assert!(fd.vector[a].max_abs_diff(&closed.vector[a]) < 1e-6);
        }
        assert!(fd.a_sq_over_2m.max_abs_diff(&closed.a_sq_over_2m) < 1e-6);
        assert!(fd.scalar.max_abs_diff(&closed.scalar) < 1e-6);
    }

    #[test]
    fn co_propagating_beams_have_no_vector_potential() {
        let mut cfg = cfg();
        cfg.wavevectors[1] = cfg.wavevectors[0];
        let gp = gauge_potentials(&cfg).unwrap();
        for a in &gp.vector {
            assert!(a.max_abs() < 1e-15);
        }
    }

    #[test]
    fn imbalanced_potentials_use_finite_differences() {
        let cfg = cfg().with_rabi_scale([1.0, 1.1, 1.0]);
        let gp = gauge_potentials(&cfg).unwrap();
        assert_eq!(gp.method, PotentialMethod::FiniteDifference);
        assert!(gp.scalar.is_hermitian() || gp.scalar.hermitian_deviation() < 1e-10);
        assert!(gp.projector.is_none());
    }

    #[test]
    fn omega_t_examples() {
        assert_eq!(connection_omega_t(0.0, 0.0).max_abs(), 0.0);
        let g = 0.8;
        let diag = connection_omega_t(g, g);
        assert!(diag.max_abs_diff(&CMat2::diag([r(g), r(g / 3.0)])) < 1e-15);
        let s3 = 3f64.sqrt();
        let want = CMat2::from_real([[1.0, 1.0 / s3], [1.0 / s3, 1.0 / 3.0]]).scale_re(g / 2.0);
        assert!(connection_omega_t(g, 0.0).max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn omega_t_is_linear_and_non_commuting() {
        let a = connection_omega_t(0.3, -1.1);
        assert!(connection_omega_t(0.6, -2.2).max_abs_diff(&a.scale_re(2.0)) < 1e-15);
        let comm = connection_omega_t(1.0, 0.0).commutator(&connection_omega_t(0.0, 1.0));
        assert!(comm.norm_fro() > 0.1, "{}", comm.norm_fro());
    }

    #[test]
    fn general_connection_reduces_to_closed_form() {
        let w = connection_general([2.0; 3], [0.0; 3], 0.4, -0.9).unwrap();
        assert!(w.max_abs_diff(&connection_omega_t(0.4, -0.9)) < 1e-15);
    }

    #[test]
    fn general_connection_matches_numerical_derivative() {
        // i <D_j | dD_k/dt> by differentiating frames along a trajectory
        let amps = |t: f64| [1.0 + 0.2 * t, 1.3, 0.4 + 0.5 * t];
        let phases = |t: f64| (0.3 * t, -0.7 * t);
        let t = 0.6;
        let h = 1e-5;
        let frame = |t: f64| {
            let (a, b) = phases(t);
            DarkFrame::from_relative_phases(amps(t), a, b).unwrap()
        };
        let (f0, fp, fm) = (frame(t), frame(t + h), frame(t - h));
        let mut num = CMat2::zeros();
        for j in 0..2 {
            for k in 0..2 {
                let d: [C64; 4] = [0, 1, 2, 3].map(|i| (fp.vectors[k][i] - fm.vectors[k][i]) / (2.0 * h));
                num.m[j][k] = I * inner(&f0.vectors[j], &d);
            }
        }
        let w = connection_general(amps(t), [0.2, 0.0, 0.5], 0.3, -0.7).unwrap();
        assert!(w.max_abs_diff(&num) < 1e-7, "{}", w.max_abs_diff(&num));
    }

    #[test]
    fn aligned_frame_follows_previous() {
        let a = dark_basis(&cfg(), &[0.0; 3], 0.0, 0.0).unwrap();
        // a frame rotated by an arbitrary unitary spans the same manifold
        let u = CMat2::from_rows([[c(0.0, 1.0), ZERO], [ZERO, c(-1.0, 0.0)]]);
        let mut rotated = a;
        for k in 0..2 {
            for i in 0..4 {
                rotated.vectors[k][i] = (0..2).map(|j| a.vectors[j][i] * u.m[j][k]).sum();
            }
        }
        let aligned = rotated.aligned_to(&a).unwrap();
        assert!(aligned.overlap(&a).max_abs_diff(&CMat2::identity()) < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        #[test]
        fn null_space_on_phase_grid() {
            let cfg = cfg();
            let amps = cfg.steady_rabi();
            let mut worst = 0.0f64;
            for i in 0..16 {
                for j in 0..16 {
                    let (p1, p2) = (2.0 * PI * i as f64 / 16.0, 2.0 * PI * j as f64 / 16.0);
                    let f = dark_basis(&cfg, &[0.0; 3], p1, p2).unwrap();
                    worst = worst.max(dark_residual(amps, [p1, p2, 0.0], &f) / amps[0]);
                    worst = worst.max(f.orthonormality_error());
                }
            }
            assert!(worst < 1e-12, "{worst}");
        }

        proptest! {
            #[test]
            fn frames_are_dark_for_any_amplitudes(
                a1 in 0.0..3.0f64, a2 in 0.0..3.0f64, a3 in 0.01..3.0f64,
                p1 in -PI..PI, p2 in -PI..PI,
            ) {
                let f = DarkFrame::from_relative_phases([a1, a2, a3], p1, p2).unwrap();
                prop_assert!(f.orthonormality_error() < 1e-12);
                prop_assert!(dark_residual([a1, a2, a3], [p1, p2, 0.0], &f) < 1e-12 * (1.0 + a3));
            }
        }
    }
}
