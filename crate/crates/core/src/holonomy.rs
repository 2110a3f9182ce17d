//! Path-ordered holonomies over loops in the `(phi_1, phi_2)` phase plane.
//!
//! Ordering convention: states evolve as `psi <- U_step psi`, so a path made
//! of segments `a, b, c` (in traversal order) has holonomy `U = U_c U_b U_a`.
//! Each linear segment sweeps the phases at constant rates, so its unitary is
//! the exact exponential `exp(i omega_t dt)`.

use crate::error::{Error, Result};
use crate::qmath::{frobenius_distance, frobenius_distance_phase_min, CMat2};
use crate::tripod::connection_omega_t;

const CHAIN_TOL: f64 = 1e-12;

pub type PhasePoint = (f64, f64);

/// Linear sweep from `start` to `end` over `duration` microseconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: PhasePoint,
    pub end: PhasePoint,
    pub duration: f64,
}

impl Segment {
    pub fn new(start: PhasePoint, end: PhasePoint, duration: f64) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::InvalidLoop(format!("segment duration must be positive, got {duration}")));
        }
        Ok(Self { start, end, duration })
    }

    /// Sweep rates `(d phi_1/dt, d phi_2/dt)`.
    pub fn rates(&self) -> (f64, f64) {
        ((self.end.0 - self.start.0) / self.duration, (self.end.1 - self.start.1) / self.duration)
    }

    /// Phases after `s` microseconds into the segment.
    pub fn phases_at(&self, s: f64) -> PhasePoint {
        let (r1, r2) = self.rates();
        (self.start.0 + r1 * s, self.start.1 + r2 * s)
    }

    pub fn omega_t(&self) -> CMat2 {
        let (r1, r2) = self.rates();
        connection_omega_t(r1, r2)
    }

    pub fn reversed(&self) -> Self {
        Self { start: self.end, end: self.start, duration: self.duration }
    }
}

/// Ordered chain of linear segments.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseLoop {
    segments: Vec<Segment>,
}

fn same_point(a: PhasePoint, b: PhasePoint) -> bool {
    (a.0 - b.0).abs() <= CHAIN_TOL && (a.1 - b.1).abs() <= CHAIN_TOL
}

impl PhaseLoop {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidLoop("path has no segments".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.duration > 0.0) {
                return Err(Error::InvalidLoop(format!("segment {i} has non-positive duration")));
            }
        }
        for (i, w) in segments.windows(2).enumerate() {
            if !same_point(w[0].end, w[1].start) {
                return Err(Error::InvalidLoop(format!("segment {} does not start where {} ends", i + 1, i)));
            }
        }
        Ok(Self { segments })
    }

    /// `vertices[0] -> vertices[1] -> ...` with one duration per edge; a
    /// closing edge back to `vertices[0]` is added when
    /// `durations.len() == vertices.len()`.
    pub fn from_vertices(vertices: &[PhasePoint], durations: &[f64]) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidLoop("need at least two vertices".into()));
        }
        let n = vertices.len();
        let edges = match durations.len() {
            d if d == n => n,
            d if d == n - 1 => n - 1,
            d => {
                return Err(Error::InvalidLoop(format!("{n} vertices need {} or {n} durations, got {d}", n - 1)));
            }
        };
        let segments = (0..edges)
            .map(|i| Segment::new(vertices[i], vertices[(i + 1) % n], durations[i]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(segments)
    }

    /// Triangle `(0,0) -> (phi0,0) -> (phi0,phi0) -> (0,0)` in `(phi_1, phi_2)`,
    /// each edge taking `dt`.
    pub fn canonical(phi0: f64, dt: f64) -> Result<Self> {
        Self::from_vertices(&[(0.0, 0.0), (phi0, 0.0), (phi0, phi0)], &[dt; 3])
    }

    /// Mirror image of [`PhaseLoop::canonical`] with `phi_2` swept first:
    /// `(0,0) -> (0,phi0) -> (phi0,phi0) -> (0,0)`.
    pub fn canonical_phi2_first(phi0: f64, dt: f64) -> Result<Self> {
        Self::from_vertices(&[(0.0, 0.0), (0.0, phi0), (phi0, phi0)], &[dt; 3])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        same_point(self.segments[self.segments.len() - 1].end, self.segments[0].start)
    }

    /// Segment start points, in traversal order.
    pub fn vertices(&self) -> Vec<PhasePoint> {
        self.segments.iter().map(|s| s.start).collect()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Same path traversed backwards.
    pub fn reversed(&self) -> Self {
        Self { segments: self.segments.iter().rev().map(Segment::reversed).collect() }
    }

    /// Segment active at time `t` from the start of the path, and the time into it.
    ///
    /// On a shared endpoint `Left` picks the earlier segment.
    pub fn locate(&self, t: f64, left: bool) -> (usize, f64) {
        let mut t0 = 0.0;
        let last = self.segments.len() - 1;
        for (i, s) in self.segments.iter().enumerate() {
            let t1 = t0 + s.duration;
            if t < t1 || (left && t <= t1) || i == last {
                return (i, (t - t0).clamp(0.0, s.duration));
            }
            t0 = t1;
        }
        unreachable!()
    }

    /// Phases at time `t` along the path; constant outside `[0, total_duration]`.
    pub fn phases_at(&self, t: f64) -> PhasePoint {
        if t <= 0.0 {
            return self.segments[0].start;
        }
        let (i, s) = self.locate(t, false);
        self.segments[i].phases_at(s)
    }
}

/// `exp(i omega_t dt)` for one linear segment.
pub fn segment_unitary(seg: &Segment) -> CMat2 {
    seg.omega_t().exp_i_hermitian(seg.duration).expect("omega_t is Hermitian by construction")
}

/// Ordered product of segment unitaries for an open or closed path.
pub fn path_unitary(segments: &[Segment]) -> CMat2 {
    segments.iter().fold(CMat2::identity(), |acc, s| segment_unitary(s) * acc)
}

/// Holonomy of a closed loop as the ordered product of `steps_per_segment`
/// sub-steps per segment; the result does not depend on the step count for
/// linear segments.
pub fn holonomy(lp: &PhaseLoop, steps_per_segment: usize) -> Result<CMat2> {
    if !lp.is_closed() {
        return Err(Error::InvalidLoop("path is not closed".into()));
    }
    if steps_per_segment == 0 {
        return Err(Error::InvalidLoop("steps_per_segment must be at least 1".into()));
    }
    let mut u = CMat2::identity();
    for seg in lp.segments() {
        let step = seg.omega_t().exp_i_hermitian(seg.duration / steps_per_segment as f64)?;
        for _ in 0..steps_per_segment {
            u = step * u;
        }
    }
    Ok(u)
}

/// Midpoint-rule time-ordered exponential of `exp(i G(t) dt)` over `[t0, t1]`
/// for an arbitrary Hermitian generator.
pub fn ordered_exponential(generator: impl Fn(f64) -> CMat2, t0: f64, t1: f64, steps: usize) -> Result<CMat2> {
    if steps == 0 {
        return Err(Error::InvalidLoop("steps must be at least 1".into()));
    }
    let dt = (t1 - t0) / steps as f64;
    let mut u = CMat2::identity();
    for n in 0..steps {
        let tm = t0 + (n as f64 + 0.5) * dt;
        u = generator(tm).exp_i_hermitian(dt)? * u;
    }
    Ok(u)
}

/// Holonomy of a loop whose phases follow an arbitrary smooth curve
/// `phases(s)`, `s` in `[0, duration]`, via central-difference rates and the
/// midpoint rule.
pub fn curve_holonomy(phases: impl Fn(f64) -> (f64, f64), duration: f64, steps: usize) -> Result<CMat2> {
    let h = 1e-6 * duration;
    ordered_exponential(
        |s| {
            let (a1, a2) = phases(s + h);
            let (b1, b2) = phases(s - h);
            connection_omega_t((a1 - b1) / (2.0 * h), (a2 - b2) / (2.0 * h))
        },
        0.0,
        duration,
        steps,
    )
}

/// Same closed loop started from vertex `start_vertex`.
pub fn cyclic_shift(lp: &PhaseLoop, start_vertex: usize) -> Result<PhaseLoop> {
    if !lp.is_closed() {
        return Err(Error::InvalidLoop("only closed loops can be shifted".into()));
    }
    let n = lp.len();
    if start_vertex > n {
        return Err(Error::IndexOutOfRange { index: start_vertex, len: n });
    }
    let s = start_vertex % n;
    let mut segments = lp.segments[s..].to_vec();
    segments.extend_from_slice(&lp.segments[..s]);
    Ok(PhaseLoop { segments })
}

/// Comparison of a loop's holonomy with that of its cyclic shift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonAbelianWitness {
    pub u: CMat2,
    pub u_shifted: CMat2,
    /// `sqrt(2 - |Tr(U^H U')|)`
    pub distance: f64,
    /// `sqrt(4 - 2|Tr(U^H U')|)`
    pub distance_phase_min: f64,
    /// Holonomy of the open path from the original to the shifted start.
    pub connector: CMat2,
    /// `max |U' - V U V^H|`
    pub conjugacy_residual: f64,
    /// `| |Tr U| - |Tr U'| |`
    pub trace_mismatch: f64,
}

impl NonAbelianWitness {
    pub fn is_conjugate(&self, tol: f64) -> bool {
        self.conjugacy_residual <= tol && self.trace_mismatch <= tol
    }
}

pub fn nonabelian_witness(lp: &PhaseLoop, start_vertex: usize) -> Result<NonAbelianWitness> {
    if lp.len() < 2 {
        return Err(Error::InvalidLoop("need at least two segments".into()));
    }
    let shifted = cyclic_shift(lp, start_vertex)?;
    let u = holonomy(lp, 1)?;
    let u_shifted = holonomy(&shifted, 1)?;
    let connector = path_unitary(&lp.segments[..start_vertex % lp.len()]);
    let conj = connector * u * connector.adjoint();
    Ok(NonAbelianWitness {
        u,
        u_shifted,
        distance: frobenius_distance(&u, &u_shifted),
        distance_phase_min: frobenius_distance_phase_min(&u, &u_shifted),
        connector,
        conjugacy_residual: conj.max_abs_diff(&u_shifted),
        trace_mismatch: (u.trace().norm() - u_shifted.trace().norm()).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::cis;
    use std::f64::consts::PI;

    fn series_exp_i(h: &CMat2, s: f64) -> CMat2 {
        let a = h.scale(crate::qmath::I * s);
        let mut scaled = a;
        let mut sq = 0;
        while scaled.norm_fro() > 0.1 {
            scaled = scaled.scale_re(0.5);
            sq += 1;
        }
        let mut term = CMat2::identity();
        let mut sum = term;
        for k in 1..30 {
            term = (term * scaled).scale_re(1.0 / k as f64);
            sum = sum + term;
        }
        for _ in 0..sq {
            sum = sum * sum;
        }
        sum
    }

    #[test]
    fn zero_length_segment_is_identity() {
        let s = Segment::new((0.3, 0.3), (0.3, 0.3), 4.0).unwrap();
        assert!(segment_unitary(&s).max_abs_diff(&CMat2::identity()) < 1e-15);
    }

    #[test]
    fn segment_a_matches_series() {
        let lp = PhaseLoop::canonical(PI, 4.0).unwrap();
        let ua = segment_unitary(&lp.segments()[0]);
        let s3 = 3f64.sqrt();
        let g = CMat2::from_real([[1.0, 1.0 / s3], [1.0 / s3, 1.0 / 3.0]]);
        assert!(ua.max_abs_diff(&series_exp_i(&g, PI / 2.0)) < 1e-12);
    }

    #[test]
    fn segment_c_is_diagonal() {
        let lp = PhaseLoop::canonical(PI, 4.0).unwrap();
        let uc = segment_unitary(&lp.segments()[2]);
        let want = CMat2::diag([cis(-PI), cis(-PI / 3.0)]);
        assert!(uc.max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn open_path_is_rejected() {
        let lp = PhaseLoop::from_vertices(&[(0.0, 0.0), (1.0, 0.0)], &[1.0]).unwrap();
        assert!(!lp.is_closed());
        assert!(matches!(holonomy(&lp, 1), Err(Error::InvalidLoop(_))));
    }

    #[test]
    fn broken_chain_and_bad_durations_are_rejected() {
        let a = Segment::new((0.0, 0.0), (1.0, 0.0), 1.0).unwrap();
        let b = Segment::new((0.5, 0.0), (0.0, 0.0), 1.0).unwrap();
        assert!(PhaseLoop::new(vec![a, b]).is_err());
        assert!(Segment::new((0.0, 0.0), (1.0, 0.0), 0.0).is_err());
        assert!(PhaseLoop::from_vertices(&[(0.0, 0.0), (1.0, 0.0)], &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn out_and_back_is_identity() {
        let lp = PhaseLoop::from_vertices(&[(0.0, 0.0), (2.0, -1.0)], &[3.0, 3.0]).unwrap();
        let u = holonomy(&lp, 1).unwrap();
        assert!(u.max_abs_diff(&CMat2::identity()) < 1e-10);
    }

    #[test]
    fn canonical_holonomy_is_ordered_product() {
        let lp = PhaseLoop::canonical(PI, 4.0).unwrap();
        let [a, b, c] = [0, 1, 2].map(|i| segment_unitary(&lp.segments()[i]));
        let u = holonomy(&lp, 1).unwrap();
        assert!(u.max_abs_diff(&(c * b * a)) < 1e-14);
        assert!(holonomy(&lp, 17).unwrap().max_abs_diff(&u) < 1e-12);
    }

    #[test]
    fn shift_examples() {
        let lp = PhaseLoop::canonical(PI, 4.0).unwrap();
        assert_eq!(cyclic_shift(&lp, 0).unwrap(), lp);
        assert_eq!(cyclic_shift(&lp, 3).unwrap(), lp);
        let s = cyclic_shift(&lp, 2).unwrap();
        let seg = lp.segments();
        assert_eq!(s.segments(), &[seg[2], seg[0], seg[1]]);
        assert!(matches!(cyclic_shift(&lp, 4), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn shifted_holonomy_is_ub_ua_uc() {
        let lp = PhaseLoop::canonical(PI, 4.0).unwrap();
        let [a, b, c] = [0, 1, 2].map(|i| segment_unitary(&lp.segments()[i]));
        let w = nonabelian_witness(&lp, 2).unwrap();
        assert!(w.u_shifted.max_abs_diff(&(b * a * c)) < 1e-14);
        assert!(w.connector.max_abs_diff(&(b * a)) < 1e-14);
        assert!(w.is_conjugate(1e-10));
    }

    #[test]
    fn pinned_distance_at_pi() {
        // |Tr(U^H U')| = 47/64 for this loop, for either sweep orientation
        let w = nonabelian_witness(&PhaseLoop::canonical(PI, 4.0).unwrap(), 2).unwrap();
        assert!((w.distance - 1.125).abs() < 1e-12, "{}", w.distance);
        assert!((w.distance_phase_min - 2f64.sqrt() * w.distance).abs() < 1e-12);
    }

    #[test]
    fn mirrored_loop_has_same_pinned_distance() {
        let w = nonabelian_witness(&PhaseLoop::canonical_phi2_first(PI, 4.0).unwrap(), 2).unwrap();
        assert!((w.distance - 1.125).abs() < 1e-12);
    }

    #[test]
    fn diagonal_loop_is_abelian() {
        let lp = PhaseLoop::from_vertices(&[(0.0, 0.0), (1.0, 1.0), (2.5, 2.5)], &[2.0, 1.0, 4.0]).unwrap();
        let w = nonabelian_witness(&lp, 1).unwrap();
        assert!(w.distance < 1e-7, "{}", w.distance);
    }

    #[test]
    fn small_loop_distance_vanishes() {
        let w = nonabelian_witness(&PhaseLoop::canonical(0.01 * PI, 4.0).unwrap(), 2).unwrap();
        assert!(w.distance < 0.01, "{}", w.distance);
    }

    #[test]
    fn discretised_curve_converges() {
        // linear segment as a generic curve: midpoint rule is exact for constant generators
        let lp = PhaseLoop::canonical(PI, 4.0).unwrap();
        let exact = holonomy(&lp, 1).unwrap();
        let u = curve_holonomy(|s| lp.phases_at(s), lp.total_duration(), 3000).unwrap();
        assert!(u.max_abs_diff(&exact) < 1e-3);
        // smooth circle: error shrinks at least linearly with step count
        let circle = |s: f64| {
            let th = 2.0 * PI * s / 12.0;
            (th.cos() - 1.0, th.sin())
        };
        let fine = curve_holonomy(circle, 12.0, 4096).unwrap();
        let e1 = curve_holonomy(circle, 12.0, 64).unwrap().max_abs_diff(&fine);
        let e2 = curve_holonomy(circle, 12.0, 128).unwrap().max_abs_diff(&fine);
        assert!(e2 < 0.6 * e1, "{e1} {e2}");
    }

    #[test]
    fn locate_sides() {
        let lp = PhaseLoop::canonical(PI, 4.0).unwrap();
        assert_eq!(lp.locate(4.0, true), (0, 4.0));
        assert_eq!(lp.locate(4.0, false), (1, 0.0));
        assert_eq!(lp.phases_at(6.0), (PI, PI / 2.0));
        assert_eq!(lp.phases_at(20.0), (0.0, 0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_loop() -> impl Strategy<Value = PhaseLoop> {
            (2usize..6)
                .prop_flat_map(|n| {
                    (
                        prop::collection::vec((-4.0..4.0f64, -4.0..4.0f64), n),
                        prop::collection::vec(0.5..6.0f64, n),
                    )
                })
                .prop_map(|(v, d)| PhaseLoop::from_vertices(&v, &d).unwrap())
        }

        proptest! {
            #[test]
            fn holonomy_is_unitary(lp in arb_loop()) {
                prop_assert!(holonomy(&lp, 1).unwrap().unitary_deviation() < 1e-10);
            }

            #[test]
            fn reversed_loop_inverts(lp in arb_loop()) {
                let u = holonomy(&lp, 1).unwrap();
                let v = holonomy(&lp.reversed(), 1).unwrap();
                prop_assert!((u * v).max_abs_diff(&CMat2::identity()) < 1e-10);
            }

            #[test]
            fn shift_preserves_trace_modulus(lp in arb_loop(), k in 0usize..6) {
                let k = k % lp.len();
                let w = nonabelian_witness(&lp, k).unwrap();
                prop_assert!(w.trace_mismatch < 1e-10);
                prop_assert!(w.conjugacy_residual < 1e-10);
            }
        }
    }
}
