//! Inverse problem: dark amplitudes from bare populations, and an SU(2)
//! operator from two input/output state pairs.
//!
//! Writing `d = (|d_1|, |d_2| e^{i phi})`, the populations give
//!
//! ```text
//! |d_2| = sqrt(3 P_3 / 2)
//! cos phi = (P_1 - P_2) / sqrt(P_3 (2 - 3 P_3))
//! ```
//!
//! which leaves the sign of `phi` open; it is fixed against a prediction.

use crate::error::{Error, Result};
use crate::qmath::{cis, frobenius_distance, inner, r, CMat2, CVec, C64};

/// Default tolerance on `sum P_i = 1`.
pub const NORMALIZATION_TOL: f64 = 0.02;
/// Branches whose overlaps with the prediction differ by less than this are not resolved.
pub const BRANCH_TOL: f64 = 1e-6;
/// Smallest `|b'_1 b'_2|` accepted by [`unitary_from_two_states`].
pub const CONDITIONING_TOL: f64 = 1e-6;
/// Infidelity above which a pair is reported as inconsistent with the fitted operator.
pub const CONSISTENCY_TOL: f64 = 0.05;
const POLE_TOL: f64 = 1e-12;

/// How the sign of `phi` was settled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseSign {
    /// `phi` is the non-negative root; the negative one is equally consistent.
    Unresolved,
    PredictionResolved,
    /// Both branches are equally close to the prediction.
    Ambiguous,
    /// Pole state: `phi` carries no information.
    Undefined,
    /// `sin phi = 0`: both branches coincide.
    NoAmbiguity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DarkReconstruction {
    pub d1: f64,
    pub d2: f64,
    /// `arg d_2 - arg d_1` in `[-pi, pi]`.
    pub phi: f64,
    pub sign: PhaseSign,
    /// A population or `cos phi` was clamped into its physical range.
    pub clamped: bool,
}

impl DarkReconstruction {
    /// State `(|d_1|, |d_2| e^{i phi})` for the current sign of `phi`.
    pub fn state(&self) -> CVec<2> {
        [r(self.d1), cis(self.phi) * self.d2]
    }

    /// The two states compatible with the populations.
    pub fn branches(&self) -> [CVec<2>; 2] {
        let a = self.phi.abs();
        [[r(self.d1), cis(a) * self.d2], [r(self.d1), cis(-a) * self.d2]]
    }

    pub fn is_pole(&self) -> bool {
        self.sign == PhaseSign::Undefined
    }
}

/// Dark amplitudes from `(P_1, P_2, P_3)`, renormalised proportionally to unit sum.
pub fn dark_from_populations(p: [f64; 3]) -> Result<DarkReconstruction> {
    dark_from_populations_tol(p, NORMALIZATION_TOL)
}

pub fn dark_from_populations_tol(p: [f64; 3], eps: f64) -> Result<DarkReconstruction> {
    if p.iter().any(|x| !x.is_finite() || *x < -eps) {
        return Err(Error::InconsistentPopulations(format!("{p:?} has negative entries")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > eps {
        return Err(Error::InconsistentPopulations(format!("populations sum to {sum}")));
    }
    let mut clamped = p.iter().any(|x| *x < 0.0);
    let p = p.map(|x| x.max(0.0) / sum);
    let mut p3 = p[2];
    if p3 > 2.0 / 3.0 + eps {
        return Err(Error::InconsistentPopulations(format!("P_3 = {p3} exceeds 2/3")));
    }
    if p3 > 2.0 / 3.0 {
        p3 = 2.0 / 3.0;
        clamped = true;
    }
    let d2 = (1.5 * p3).sqrt();
    let d1 = (1.0 - d2 * d2).max(0.0).sqrt();
    let denom = p3 * (2.0 - 3.0 * p3);
    if denom < POLE_TOL {
        return Ok(DarkReconstruction { d1, d2, phi: 0.0, sign: PhaseSign::Undefined, clamped });
    }
    let mut cos = (p[0] - p[1]) / denom.sqrt();
    if cos.abs() > 1.0 + eps {
        return Err(Error::InconsistentPopulations(format!("|cos phi| = {} exceeds 1", cos.abs())));
    }
    if cos.abs() > 1.0 {
        cos = cos.signum();
        clamped = true;
    }
    let phi = cos.acos();
    let sign = if phi.sin().abs() < POLE_TOL { PhaseSign::NoAmbiguity } else { PhaseSign::Unresolved };
    Ok(DarkReconstruction { d1, d2, phi, sign, clamped })
}

/// Picks the branch of `phi` with the larger overlap with `predicted`.
pub fn sign_resolve(rec: &DarkReconstruction, predicted: &CVec<2>) -> DarkReconstruction {
    if matches!(rec.sign, PhaseSign::Undefined | PhaseSign::NoAmbiguity) {
        return *rec;
    }
    let [plus, minus] = rec.branches();
    let op = inner(predicted, &plus).norm();
    let om = inner(predicted, &minus).norm();
    let mut out = *rec;
    if (op - om).abs() < BRANCH_TOL {
        out.phi = rec.phi.abs();
        out.sign = PhaseSign::Ambiguous;
    } else {
        out.phi = if op > om { rec.phi.abs() } else { -rec.phi.abs() };
        out.sign = PhaseSign::PredictionResolved;
    }
    out
}

/// `[[x_1, -x_2^*], [x_2, x_1^*]]`, the SU(2) matrix with first column `x`.
pub fn su2_with_column(x: &CVec<2>) -> CMat2 {
    CMat2::from_rows([[x[0], -x[1].conj()], [x[1], x[0].conj()]])
}

/// `U / sqrt(det U)` with the principal root.
pub fn su2_part(u: &CMat2) -> CMat2 {
    u.scale(u.det().sqrt().inv())
}

/// `(alpha, beta)` of `U = [[alpha, -beta^*], [beta, alpha^*]]` for an SU(2) matrix.
pub fn su2_parameters(u: &CMat2) -> (C64, C64) {
    (u.m[0][0], u.m[1][0])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitaryFit {
    /// Reconstructed SU(2) operator.
    pub u: CMat2,
    pub alpha: C64,
    pub beta: C64,
    /// Largest infidelity `1 - |<out|U in>|^2` over the two pairs.
    pub residual: f64,
    /// Entrywise distance moved by the final projection onto the unitaries.
    pub projection_distance: f64,
    /// `|b'_1 b'_2|`, small when the inputs are nearly parallel or antipodal.
    pub conditioning: f64,
    /// Frobenius distance to the prediction.
    pub distance_to_prediction: f64,
    pub consistent: bool,
}

/// SU(2) operator mapping both inputs onto their reconstructed outputs,
/// with discrete ambiguities resolved by the smallest entrywise distance to
/// the SU(2) part of `predicted`.
pub fn unitary_from_two_states(pairs: [(CVec<2>, DarkReconstruction); 2], predicted: &CMat2) -> Result<UnitaryFit> {
    let target = su2_part(predicted);
    let (a, rec_a) = pairs[0];
    let (b, rec_b) = pairs[1];
    let sa = su2_with_column(&a);
    let bp = sa.adjoint().mul_vec(&b);
    let conditioning = (bp[0] * bp[1]).norm();
    if conditioning < CONDITIONING_TOL {
        return Err(Error::IllConditioned(
            "input states are parallel or have antipodal Bloch vectors".into(),
        ));
    }
    let branch_set = |rec: &DarkReconstruction| -> Vec<CVec<2>> {
        match rec.sign {
            PhaseSign::Unresolved | PhaseSign::Ambiguous => rec.branches().to_vec(),
            _ => vec![rec.state()],
        }
    };
    let mut best: Option<(f64, CMat2, [CVec<2>; 2])> = None;
    for psi_a in branch_set(&rec_a) {
        for psi_b in branch_set(&rec_b) {
            let s_out = su2_with_column(&psi_a);
            let c = s_out.adjoint().mul_vec(&psi_b);
            let p = c[0].conj() * bp[0];
            let q = c[1].conj() * bp[1];
            let mu = 0.5 * (q.arg() - p.arg());
            for shift in [0.0, std::f64::consts::PI] {
                let m = mu + shift;
                let u = s_out * CMat2::diag([cis(m), cis(-m)]) * sa.adjoint();
                let d = (u - target).norm_fro();
                if best.as_ref().is_none_or(|(bd, _, _)| d < *bd) {
                    best = Some((d, u, [psi_a, psi_b]));
                }
            }
        }
    }
    let (_, raw, outputs) = best.expect("at least one branch");
    let u = raw.closest_unitary()?;
    let projection_distance = (u - raw).max_abs();
    let residual = [a, b]
        .iter()
        .zip(&outputs)
        .map(|(input, out)| 1.0 - inner(out, &u.mul_vec(input)).norm_sqr())
        .fold(0.0, f64::max);
    let (alpha, beta) = su2_parameters(&u);
    Ok(UnitaryFit {
        u,
        alpha,
        beta,
        residual,
        projection_distance,
        conditioning,
        distance_to_prediction: frobenius_distance(&u, predicted),
        consistent: residual <= CONSISTENCY_TOL,
    })
}

/// Full pipeline: populations measured after the process on each input,
/// signs resolved against `predicted` applied to the inputs, then the operator fit.
pub fn unitary_from_populations(
    inputs: [CVec<2>; 2],
    populations: [[f64; 3]; 2],
    predicted: &CMat2,
) -> Result<(UnitaryFit, [DarkReconstruction; 2])> {
    let mut recs = [dark_from_populations(populations[0])?, dark_from_populations(populations[1])?];
    for (rec, input) in recs.iter_mut().zip(&inputs) {
        *rec = sign_resolve(rec, &predicted.mul_vec(input));
    }
    let fit = unitary_from_two_states([(inputs[0], recs[0]), (inputs[1], recs[1])], predicted)?;
    Ok((fit, recs))
}

/// Bare populations of `d` in the equal-amplitude frame at zero phases.
pub fn populations_of(d: &CVec<2>) -> [f64; 3] {
    let s2 = 2f64.sqrt();
    let s6 = 6f64.sqrt();
    let a = d[0] / s2;
    let b = d[1] / s6;
    [(a + b).norm_sqr(), (b - a).norm_sqr(), (b * 2.0).norm_sqr()]
}
