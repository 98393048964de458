//! Density operators on the single-photon two-mode subspace
//! `{|01>, |10>}`.
//!
//! Index 0 is `|01>` (the photon sits in Bob's mode), index 1 is `|10>`
//! (Alice's mode).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance for the Hermitian, trace and positivity checks.
pub const DENSITY_TOLERANCE: f64 = 1e-12;

pub type Ket = [Complex64; 2];
type Matrix = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityOperator2Mode {
    m: Matrix,
}

impl DensityOperator2Mode {
    pub fn new(m: [[Complex64; 2]; 2]) -> Result<Self> {
        let herm = (m[0][1] - m[1][0].conj()).norm() + m[0][0].im.abs() + m[1][1].im.abs();
        if herm > DENSITY_TOLERANCE {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let trace = m[0][0].re + m[1][1].re;
        if (trace - 1.0).abs() > DENSITY_TOLERANCE {
            return Err(Error::InvalidDensity(format!("trace {trace} != 1")));
        }
        let rho = DensityOperator2Mode { m };
        let (low, _) = rho.eigenvalues();
        if low < -DENSITY_TOLERANCE {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {low:e}"
            )));
        }
        Ok(rho)
    }

    /// `|psi><psi|` for a ket normalised on the fly.
    pub fn pure(psi: Ket) -> Result<Self> {
        let norm = (psi[0].norm_sqr() + psi[1].norm_sqr()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidDensity("zero ket".into()));
        }
        let psi = [psi[0] / norm, psi[1] / norm];
        Self::new(outer(psi, psi))
    }

    /// Convex combination `sum w_i rho_i`; weights must sum to one.
    pub fn mixture(parts: &[(f64, DensityOperator2Mode)]) -> Result<Self> {
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (w, rho) in parts {
            if *w < 0.0 {
                return Err(Error::InvalidDensity(format!("negative weight {w}")));
            }
            for (row, src) in m.iter_mut().zip(rho.m.iter()) {
                for (dst, s) in row.iter_mut().zip(src.iter()) {
                    *dst += *s * *w;
                }
            }
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        self.m
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> (f64, f64) {
        hermitian_eigenvalues(&self.m)
    }
}

fn outer(a: Ket, b: Ket) -> Matrix {
    [
        [a[0] * b[0].conj(), a[0] * b[1].conj()],
        [a[1] * b[0].conj(), a[1] * b[1].conj()],
    ]
}

fn hermitian_eigenvalues(m: &Matrix) -> (f64, f64) {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + m[0][1].norm_sqr()).sqrt();
    (mean - radius, mean + radius)
}

/// Trace distance `1/2 ||a - b||_1`.
pub fn density_distance(a: &DensityOperator2Mode, b: &DensityOperator2Mode) -> f64 {
    let mut diff = a.m;
    for (row, src) in diff.iter_mut().zip(b.m.iter()) {
        for (dst, s) in row.iter_mut().zip(src.iter()) {
            *dst -= *s;
        }
    }
    let (l0, l1) = hermitian_eigenvalues(&diff);
    (0.5 * (l0.abs() + l1.abs())).min(1.0)
}

/// `|01>`
pub fn z0() -> Ket {
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
}

/// `|10>`
pub fn z1() -> Ket {
    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
}
