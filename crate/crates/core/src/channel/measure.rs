use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::stokes::{Basis, ChoiOperator};
use crate::error::{Error, Result};
use crate::quantum::{purify, CVector, Distribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Bb84,
    SixState,
}

impl Protocol {
    pub fn bases(self) -> &'static [Basis] {
        match self {
            Protocol::Bb84 => &[Basis::Z, Basis::X],
            Protocol::SixState => &Basis::ALL,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Bb84 => "bb84",
            Protocol::SixState => "sixstate",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bb84" => Ok(Protocol::Bb84),
            "sixstate" | "six-state" | "6state" => Ok(Protocol::SixState),
            _ => Err(Error::Parse(format!("unknown protocol `{s}`"))),
        }
    }
}

/// Alice's measurement vector for bit `x` in `basis`. Alice's side uses the
/// conjugate basis so that the identity channel is perfectly correlated in
/// every basis.
pub(crate) fn alice_vector(basis: Basis, x: usize) -> [Complex64; 2] {
    let v = basis.eigenvector(x);
    [v[0].conj(), v[1].conj()]
}

pub(crate) fn bob_vector(basis: Basis, y: usize) -> [Complex64; 2] {
    basis.eigenvector(y)
}

/// `P(x, y)` for Alice measuring `basis_a` and Bob `basis_b`, indexed `2x + y`.
pub fn joint_distribution(rho: &ChoiOperator, basis_a: Basis, basis_b: Basis) -> Distribution {
    let m = rho.matrix();
    let mut p = vec![0.0; 4];
    for x in 0..2 {
        let a = alice_vector(basis_a, x);
        for y in 0..2 {
            let b = bob_vector(basis_b, y);
            let v = CVector::from_iterator(4, (0..4).map(|i| a[i / 2] * b[i % 2]));
            p[2 * x + y] = (v.adjoint() * m * &v)[(0, 0)].re.max(0.0);
        }
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    Distribution::new(p).expect("normalized")
}

/// One sifting-phase observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub x: u8,
    pub basis_a: Basis,
    pub y: u8,
    pub basis_b: Basis,
}

/// Outcome alphabet in its fixed order: basis of A, basis of B, then x, then y.
pub fn outcome_alphabet(protocol: Protocol) -> Vec<SampleOutcome> {
    let mut out = Vec::new();
    for &a in protocol.bases() {
        for &b in protocol.bases() {
            for x in 0..2u8 {
                for y in 0..2u8 {
                    out.push(SampleOutcome { x, basis_a: a, y, basis_b: b });
                }
            }
        }
    }
    out
}

/// Distribution over [`outcome_alphabet`].
pub fn sample_distribution(rho: &ChoiOperator, protocol: Protocol) -> Distribution {
    let bases = protocol.bases();
    let w = 1.0 / (bases.len() * bases.len()) as f64;
    let mut p = Vec::with_capacity(4 * bases.len() * bases.len());
    for &a in bases {
        for &b in bases {
            p.extend(joint_distribution(rho, a, b).probs().iter().map(|v| v * w));
        }
    }
    Distribution::new(p).expect("normalized")
}

/// Matched-basis outcomes keep only the parity; mismatched ones keep only the bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DegradedSymbol {
    Matched { parity: u8, basis: Basis },
    Mismatched { basis_a: Basis, basis_b: Basis },
}

pub fn degrade(z: &SampleOutcome) -> DegradedSymbol {
    if z.basis_a == z.basis_b {
        DegradedSymbol::Matched { parity: z.x ^ z.y, basis: z.basis_a }
    } else {
        DegradedSymbol::Mismatched { basis_a: z.basis_a, basis_b: z.basis_b }
    }
}

/// Eve's unnormalized conditional vectors after Alice measures `basis_a` and
/// Bob `basis_b` on a purification of `rho`: entry `2x + y` is `|e_xy>` with
/// `P(x,y) = <e_xy|e_xy>`.
pub fn eve_vectors(rho: &ChoiOperator, basis_a: Basis, basis_b: Basis) -> (Vec<CVector>, usize) {
    let (psi, r) = purify(rho.operator());
    let amp = psi.amplitudes();
    let mut out = Vec::with_capacity(4);
    for x in 0..2 {
        let a = alice_vector(basis_a, x);
        for y in 0..2 {
            let b = bob_vector(basis_b, y);
            let mut v = CVector::zeros(r);
            for i in 0..2 {
                for j in 0..2 {
                    let c = (a[i] * b[j]).conj();
                    for e in 0..r {
                        v[e] += c * amp[(2 * i + j) * r + e];
                    }
                }
            }
            out.push(v);
        }
    }
    (out, r)
}
