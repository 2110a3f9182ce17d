//! Fixed-size complex linear algebra for the 2-, 3- and 4-dimensional objects
//! that appear in the tripod problem: dark-manifold unitaries, 4-level
//! Hamiltonians and state vectors.
//!
//! Matrices are row-major `[[C64; N]; N]` wrapped in [`CMat`]. State vectors
//! are plain arrays, see [`CVec`].

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix4, SymmetricEigen};
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Hermiticity tolerance on matrix entries.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Unitarity tolerance on `U^H U - 1`.
pub const UNITARY_TOL: f64 = 1e-10;

pub type CVec<const N: usize> = [C64; N];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `e^{i theta}`
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat<const N: usize> {
    pub m: [[C64; N]; N],
}

pub type CMat2 = CMat<2>;
pub type CMat3 = CMat<3>;
pub type CMat4 = CMat<4>;

impl<const N: usize> Default for CMat<N> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<const N: usize> CMat<N> {
    pub fn zeros() -> Self {
        Self { m: [[ZERO; N]; N] }
    }

    pub fn identity() -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            out.m[i][i] = ONE;
        }
        out
    }

    pub fn from_rows(m: [[C64; N]; N]) -> Self {
        Self { m }
    }

    pub fn from_real(m: [[f64; N]; N]) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                out.m[i][j] = r(m[i][j]);
            }
        }
        out
    }

    pub fn diag(d: [C64; N]) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            out.m[i][i] = d[i];
        }
        out
    }

    /// Outer product `|a><b|`.
    pub fn outer(a: &CVec<N>, b: &CVec<N>) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                out.m[i][j] = a[i] * b[j].conj();
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                out.m[i][j] = self.m[j][i].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..N).map(|i| self.m[i][i]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        out
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(r(s))
    }

    pub fn mul_vec(&self, v: &CVec<N>) -> CVec<N> {
        let mut out = [ZERO; N];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..N).map(|j| self.m[i][j] * v[j]).sum();
        }
        out
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.m
            .iter()
            .flat_map(|row| row.iter())
            .map(|x| x.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }

    /// Frobenius norm `sqrt(sum |m_ij|^2)`.
    pub fn norm_fro(&self) -> f64 {
        self.m
            .iter()
            .flat_map(|row| row.iter())
            .map(|x| x.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    pub fn hermitian_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn unitary_deviation(&self) -> f64 {
        (self.adjoint() * *self).max_abs_diff(&Self::identity())
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_deviation() <= HERMITIAN_TOL
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary_deviation() <= UNITARY_TOL
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let deviation = self.hermitian_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }

    pub fn check_unitary(&self) -> Result<()> {
        let deviation = self.unitary_deviation();
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(())
    }
}

impl<const N: usize> Add for CMat<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for i in 0..N {
            for j in 0..N {
                self.m[i][j] += rhs.m[i][j];
            }
        }
        self
    }
}

impl<const N: usize> Sub for CMat<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..N {
            for j in 0..N {
                self.m[i][j] -= rhs.m[i][j];
            }
        }
        self
    }
}

impl<const N: usize> Neg for CMat<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale_re(-1.0)
    }
}

impl<const N: usize> Mul for CMat<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let a = self.m[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..N {
                    out.m[i][j] += a * rhs.m[k][j];
                }
            }
        }
        out
    }
}

impl CMat2 {
    pub fn det(&self) -> C64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn pauli_x() -> Self {
        Self::from_real([[0.0, 1.0], [1.0, 0.0]])
    }

    pub fn pauli_y() -> Self {
        Self::from_rows([[ZERO, -I], [I, ZERO]])
    }

    pub fn pauli_z() -> Self {
        Self::from_real([[1.0, 0.0], [0.0, -1.0]])
    }

    /// Real coefficients `(a0, ax, ay, az)` with `H = a0 1 + a . sigma`.
    /// Only meaningful for Hermitian `H`.
    pub fn pauli_coefficients(&self) -> [f64; 4] {
        let m = &self.m;
        let a0 = 0.5 * (m[0][0].re + m[1][1].re);
        let az = 0.5 * (m[0][0].re - m[1][1].re);
        let off = 0.5 * (m[0][1] + m[1][0].conj());
        [a0, off.re, -off.im, az]
    }

    /// `exp(i s H)` for Hermitian `H`, via `e^{i s a0}(cos(s|a|) 1 + i sin(s|a|) n.sigma)`.
    pub fn exp_i_hermitian(&self, s: f64) -> Result<Self> {
        self.check_hermitian()?;
        let [a0, ax, ay, az] = self.pauli_coefficients();
        let norm = (ax * ax + ay * ay + az * az).sqrt();
        let theta = s * norm;
        let (sin, cos) = theta.sin_cos();
        // sin(s|a|)/|a|, finite as |a| -> 0
        let sinc = if norm > 1e-300 { sin / norm } else { s };
        let phase = cis(s * a0);
        let u = Self::from_rows([
            [c(cos, sinc * az), c(sinc * ay, sinc * ax)],
            [c(-sinc * ay, sinc * ax), c(cos, -sinc * az)],
        ]);
        Ok(u.scale(phase))
    }

    /// `f(H)` for Hermitian `H` through its two spectral projectors.
    pub fn map_hermitian(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.check_hermitian()?;
        let [a0, ax, ay, az] = self.pauli_coefficients();
        let norm = (ax * ax + ay * ay + az * az).sqrt();
        let (fp, fm) = (f(a0 + norm), f(a0 - norm));
        let mean = 0.5 * (fp + fm);
        if norm < 1e-300 {
            return Ok(Self::identity().scale_re(mean));
        }
        let half_diff = 0.5 * (fp - fm) / norm;
        let n_sigma = Self::pauli_x().scale_re(ax) + Self::pauli_y().scale_re(ay) + Self::pauli_z().scale_re(az);
        Ok(Self::identity().scale_re(mean) + n_sigma.scale_re(half_diff))
    }

    /// Unitary polar factor `A (A^H A)^{-1/2}`, the unitary closest to `A`
    /// in Frobenius norm.
    pub fn closest_unitary(&self) -> Result<Self> {
        let gram = self.adjoint() * *self;
        // symmetrise round-off before the Hermitian check
        let gram = (gram + gram.adjoint()).scale_re(0.5);
        let smallest = {
            let [a0, ax, ay, az] = gram.pauli_coefficients();
            a0 - (ax * ax + ay * ay + az * az).sqrt()
        };
        if smallest <= 1e-24 {
            return Err(Error::IllConditioned("singular matrix has no polar factor".into()));
        }
        Ok(*self * gram.map_hermitian(|x| 1.0 / x.sqrt())?)
    }
}

impl CMat4 {
    /// `exp(i s H)` for Hermitian 4x4 `H` through its eigendecomposition.
    pub fn exp_i_hermitian(&self, s: f64) -> Result<Self> {
        self.check_hermitian()?;
        let h = Matrix4::<C64>::from_fn(|i, j| 0.5 * (self.m[i][j] + self.m[j][i].conj()));
        let eig = SymmetricEigen::new(h);
        let v = eig.eigenvectors;
        let mut out = Self::zeros();
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            let ph = cis(s * lambda);
            for i in 0..4 {
                for j in 0..4 {
                    out.m[i][j] += ph * v[(i, k)] * v[(j, k)].conj();
                }
            }
        }
        Ok(out)
    }

    /// Eigenvalues of a Hermitian 4x4 matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<[f64; 4]> {
        self.check_hermitian()?;
        let h = Matrix4::<C64>::from_fn(|i, j| self.m[i][j]);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok([ev[0], ev[1], ev[2], ev[3]])
    }
}

pub fn inner<const N: usize>(a: &CVec<N>, b: &CVec<N>) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr<const N: usize>(a: &CVec<N>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn normalized<const N: usize>(a: &CVec<N>) -> CVec<N> {
    let n = norm_sqr(a).sqrt();
    a.map(|x| x / n)
}

/// Frobenius distance in the form `sqrt(2 - |Tr(U^H V)|)`.
///
/// Insensitive to global phases of either argument. Its maximum over
/// `U(2)` is `sqrt(2)`.
pub fn frobenius_distance(u: &CMat2, v: &CMat2) -> f64 {
    let t = (u.adjoint() * *v).trace().norm();
    (2.0 - t).max(0.0).sqrt()
}

/// Phase-minimised Frobenius norm `min_chi ||U - e^{i chi} V||_F = sqrt(4 - 2|Tr(U^H V)|)`,
/// which reaches 2 for orthogonal unitaries.
pub fn frobenius_distance_phase_min(u: &CMat2, v: &CMat2) -> f64 {
    let t = (u.adjoint() * *v).trace().norm();
    (4.0 - 2.0 * t).max(0.0).sqrt()
}
