use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::stokes::StokesParams;
use crate::error::{domain, Result};
use crate::quantum::CVector;

/// Weights of the four Bell states in a Bell-diagonal Choi operator.
///
/// `p_kl` weights `ψ(k,l)`: `k` flags a bit flip, `l` a phase flip, so
/// `ψ(0,0) = (|00>+|11>)/√2`, `ψ(1,0) = (|01>+|10>)/√2`,
/// `ψ(0,1) = (|00>−|11>)/√2`, `ψ(1,1) = (|01>−|10>)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellDistribution {
    pub p00: f64,
    pub p10: f64,
    pub p01: f64,
    pub p11: f64,
}

impl BellDistribution {
    pub fn new(p00: f64, p10: f64, p01: f64, p11: f64) -> Result<Self> {
        let b = Self { p00, p10, p01, p11 };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.as_array();
        if p.iter().any(|&v| !(v >= -1e-12) || !v.is_finite()) {
            return domain(format!("Bell weights {p:?} leave the simplex"));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return domain(format!("Bell weights sum to {s}"));
        }
        Ok(())
    }

    pub fn depolarizing(e: f64) -> Result<Self> {
        Self::new(1.0 - 1.5 * e, 0.5 * e, 0.5 * e, 0.5 * e)
    }

    /// `P_KL(k, l)`.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        match (k, l) {
            (0, 0) => self.p00,
            (1, 0) => self.p10,
            (0, 1) => self.p01,
            _ => self.p11,
        }
    }

    /// `[p00, p10, p01, p11]`.
    pub fn as_array(&self) -> [f64; 4] {
        [self.p00, self.p10, self.p01, self.p11]
    }

    /// Diagonal Stokes entries `(e_z, e_x, e_y)`.
    pub fn to_diagonal(&self) -> [f64; 3] {
        let (a, b, c, d) = (self.p00, self.p10, self.p01, self.p11);
        [a + c - b - d, a - c + b - d, a - c - b + d]
    }

    pub fn from_diagonal(e: [f64; 3]) -> Result<Self> {
        let [ez, ex, ey] = e;
        Self::new(
            (1.0 + ez + ex + ey) / 4.0,
            (1.0 - ez + ex - ey) / 4.0,
            (1.0 + ez - ex - ey) / 4.0,
            (1.0 - ez - ex + ey) / 4.0,
        )
    }

    pub fn to_stokes(&self) -> StokesParams {
        StokesParams::diagonal(self.to_diagonal())
    }

    /// The Bell vector `ψ(k,l)` in the computational basis.
    pub fn bell_vector(k: usize, l: usize) -> CVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sign = if l == 0 { 1.0 } else { -1.0 };
        let mut v = CVector::zeros(4);
        if k == 0 {
            v[0] = Complex64::new(s, 0.0);
            v[3] = Complex64::new(sign * s, 0.0);
        } else {
            v[1] = Complex64::new(s, 0.0);
            v[2] = Complex64::new(sign * s, 0.0);
        }
        v
    }
}
