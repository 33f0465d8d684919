use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{partial_trace, CMatrix, DenseOperator};

/// Pauli axes, ordered (z, x, y) throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Z, Basis::X, Basis::Y];

    pub fn index(self) -> usize {
        match self {
            Basis::Z => 0,
            Basis::X => 1,
            Basis::Y => 2,
        }
    }

    pub fn from_index(i: usize) -> Basis {
        Basis::ALL[i]
    }

    pub fn symbol(self) -> char {
        ['z', 'x', 'y'][self.index()]
    }

    /// The Pauli matrix for this axis.
    pub fn pauli(self) -> CMatrix {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        let i = Complex64::new(0.0, 1.0);
        match self {
            Basis::Z => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
            Basis::X => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            Basis::Y => CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        }
    }

    /// Entrywise complex conjugate of the Pauli matrix.
    pub fn pauli_conj(self) -> CMatrix {
        self.pauli().map(|c| c.conj())
    }

    /// Eigenvector of the Pauli matrix for outcome bit `x` (eigenvalue `(-1)^x`).
    pub fn eigenvector(self, x: usize) -> [Complex64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sign = if x == 0 { 1.0 } else { -1.0 };
        match self {
            Basis::Z => {
                if x == 0 {
                    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
                } else {
                    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
                }
            }
            Basis::X => [Complex64::new(s, 0.0), Complex64::new(sign * s, 0.0)],
            Basis::Y => [Complex64::new(s, 0.0), Complex64::new(0.0, sign * s)],
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "z" | "Z" => Ok(Basis::Z),
            "x" | "X" => Ok(Basis::X),
            "y" | "Y" => Ok(Basis::Y),
            _ => Err(Error::Parse(format!("unknown basis `{s}`"))),
        }
    }
}

/// Affine Bloch-sphere action of a qubit channel, indices (z, x, y).
///
/// `r[b][a]` is the response of Bob's axis `b` to Alice's axis `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesParams {
    pub r: [[f64; 3]; 3],
    pub t: [f64; 3],
}

impl StokesParams {
    pub fn new(r: [[f64; 3]; 3], t: [f64; 3]) -> Self {
        Self { r, t }
    }

    pub fn identity() -> Self {
        Self::diagonal([1.0; 3])
    }

    pub fn diagonal(e: [f64; 3]) -> Self {
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            r[i][i] = e[i];
        }
        Self { r, t: [0.0; 3] }
    }

    pub fn get(&self, b: Basis, a: Basis) -> f64 {
        self.r[b.index()][a.index()]
    }

    /// Convex combination `λ self + (1 − λ) other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Self {
        let mut out = *self;
        for b in 0..3 {
            for a in 0..3 {
                out.r[b][a] = lambda * self.r[b][a] + (1.0 - lambda) * other.r[b][a];
            }
            out.t[b] = lambda * self.t[b] + (1.0 - lambda) * other.t[b];
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.r.iter().flatten().chain(self.t.iter()).all(|v| v.is_finite())
    }

    /// Choi matrix without the positivity check.
    pub fn choi_matrix(&self) -> CMatrix {
        let id = CMatrix::identity(2, 2);
        let mut m = CMatrix::identity(4, 4);
        for b in Basis::ALL {
            m += id.kronecker(&b.pauli()).scale(self.t[b.index()]);
            for a in Basis::ALL {
                m += a.pauli_conj().kronecker(&b.pauli()).scale(self.get(b, a));
            }
        }
        m.scale(0.25)
    }

    /// Smallest eigenvalue of the Choi matrix.
    pub fn min_choi_eigenvalue(&self) -> f64 {
        DenseOperator::wrap(self.choi_matrix()).eigh().min()
    }
}

/// Tolerance on the most negative Choi eigenvalue accepted as a channel.
pub const CHOI_PSD_TOL: f64 = 1e-9;

/// Normalized Choi operator `(id ⊗ E)(|ψ><ψ|)`, ordering A ⊗ B.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiOperator {
    op: DenseOperator,
}

impl ChoiOperator {
    /// Validates Hermiticity, positivity, trace and the Alice marginal.
    pub fn new(op: DenseOperator) -> Result<Self> {
        if op.dim() != 4 {
            return Err(Error::Dimension(format!("Choi operator must be 4x4, got {}", op.dim())));
        }
        if !op.is_hermitian(1e-9) {
            return Err(Error::Domain("Choi operator is not Hermitian".into()));
        }
        let min = op.eigh().min();
        if min < -CHOI_PSD_TOL {
            return Err(Error::InvalidChannel { min_eigenvalue: min });
        }
        let ra = partial_trace(&op, &[2, 2], &[0])?;
        if (ra.matrix() - DenseOperator::maximally_mixed(2).matrix()).camax() > 1e-9 {
            return Err(Error::Domain("Alice marginal of Choi operator is not I/2".into()));
        }
        Ok(Self { op })
    }

    pub fn operator(&self) -> &DenseOperator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn mix(&self, other: &Self, lambda: f64) -> Self {
        let m = self.op.matrix().scale(lambda) + other.op.matrix().scale(1.0 - lambda);
        Self { op: DenseOperator::wrap(m) }
    }

    pub fn identity() -> Self {
        Self { op: DenseOperator::wrap(StokesParams::identity().choi_matrix()) }
    }

    /// Skips validation; for completions already known to be feasible.
    pub(crate) fn from_stokes_unchecked(s: &StokesParams) -> Self {
        Self { op: DenseOperator::wrap(s.choi_matrix()) }
    }
}

/// Builds the Choi operator, rejecting parameters that are not completely positive.
pub fn stokes_to_choi(s: &StokesParams) -> Result<ChoiOperator> {
    if !s.is_finite() {
        return Err(Error::Domain("Stokes parameters must be finite".into()));
    }
    let m = s.choi_matrix();
    let min = DenseOperator::wrap(m.clone()).eigh().min();
    if min < -CHOI_PSD_TOL {
        return Err(Error::InvalidChannel { min_eigenvalue: min });
    }
    Ok(ChoiOperator { op: DenseOperator::wrap(m) })
}

/// Reads `R_ba = Tr[ρ (σ̄_a ⊗ σ_b)]` and `t_b = Tr[ρ (I ⊗ σ_b)]`.
pub fn choi_to_stokes(c: &ChoiOperator) -> StokesParams {
    let rho = c.matrix();
    let id = CMatrix::identity(2, 2);
    let mut s = StokesParams::new([[0.0; 3]; 3], [0.0; 3]);
    for b in Basis::ALL {
        s.t[b.index()] = (rho * id.kronecker(&b.pauli())).trace().re;
        for a in Basis::ALL {
            s.r[b.index()][a.index()] = (rho * a.pauli_conj().kronecker(&b.pauli())).trace().re;
        }
    }
    s
}
