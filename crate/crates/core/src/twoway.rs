//! Two-way postprocessing rates over blocks of two channel uses.
//!
//! Registers: `U1 = X1 + X2`, `V1 = Y1 + Y2`, `W1 = U1 + V1`, and the kept
//! second bits `U2 = ζ_A(X2, U1, V1)`, `V2 = ζ_B(Y2, U1, V1)`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{
    bell_ryy_interval, eve_vectors, stokes_to_choi, Basis, BellDistribution, ChoiOperator, Omega, Protocol,
    StokesParams,
};
use crate::error::{domain, Error, Result};
use crate::oneway::{ChannelInput, Direction, RYY_PRESCAN, RYY_TOL};
use crate::optimize::minimize_scalar;
use crate::quantum::{h, shannon, CMatrix, CVector, CcqState, DenseOperator};

/// Truth tables of `χ_A, χ_B : F2² → F2`, indexed `2·u1 + v1`.
///
/// The second bit is kept where the table is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BlockFunctions {
    pub chi_a: [u8; 4],
    pub chi_b: [u8; 4],
}

impl BlockFunctions {
    pub fn new(chi_a: [u8; 4], chi_b: [u8; 4]) -> Result<Self> {
        if chi_a.iter().chain(&chi_b).any(|&v| v > 1) {
            return domain("truth-table entries must be bits");
        }
        Ok(Self { chi_a, chi_b })
    }

    /// Alice keeps `X2` when `U1 = V1`; Bob never keeps `Y2`.
    pub fn advantage_distillation() -> Self {
        Self { chi_a: [0, 1, 1, 0], chi_b: [1, 1, 1, 1] }
    }

    /// Alice never keeps `X2`; Bob keeps `Y2` when `U1 = V1`.
    pub fn bob_keeps() -> Self {
        Self { chi_a: [1, 1, 1, 1], chi_b: [0, 1, 1, 0] }
    }

    fn table(i: usize) -> [u8; 4] {
        [(i >> 3 & 1) as u8, (i >> 2 & 1) as u8, (i >> 1 & 1) as u8, (i & 1) as u8]
    }

    /// All 256 pairs in lexicographic `(χ_A, χ_B)` order.
    pub fn all() -> Vec<Self> {
        (0..16).flat_map(|a| (0..16).map(move |b| Self { chi_a: Self::table(a), chi_b: Self::table(b) })).collect()
    }

    pub fn zeta_a(&self, x2: usize, u1: usize, v1: usize) -> usize {
        if self.chi_a[2 * u1 + v1] == 0 {
            x2
        } else {
            0
        }
    }

    pub fn zeta_b(&self, y2: usize, u1: usize, v1: usize) -> usize {
        if self.chi_b[2 * u1 + v1] == 0 {
            y2
        } else {
            0
        }
    }
}

impl Default for BlockFunctions {
    fn default() -> Self {
        Self::advantage_distillation()
    }
}

impl fmt::Display for BlockFunctions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |t: &[u8; 4]| t.iter().map(|b| char::from(b'0' + b)).collect::<String>();
        write!(f, "{}/{}", s(&self.chi_a), s(&self.chi_b))
    }
}

impl FromStr for BlockFunctions {
    type Err = Error;

    /// `"0110/1111"`, or the names `ad` and `bob-keeps`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ad" | "advantage-distillation" => return Ok(Self::advantage_distillation()),
            "bob-keeps" => return Ok(Self::bob_keeps()),
            _ => {}
        }
        let parse = |t: &str| -> Result<[u8; 4]> {
            let b = t.as_bytes();
            if b.len() != 4 || b.iter().any(|c| *c != b'0' && *c != b'1') {
                return Err(Error::Parse(format!("bad truth table `{t}`")));
            }
            Ok([b[0] - b'0', b[1] - b'0', b[2] - b'0', b[3] - b'0'])
        };
        let (a, b) = s.split_once('/').ok_or_else(|| Error::Parse(format!("expected `χA/χB`, got `{s}`")))?;
        Self::new(parse(a)?, parse(b)?)
    }
}

pub const REGISTERS: [&str; 9] = ["X1", "X2", "Y1", "Y2", "U1", "V1", "W1", "U2", "V2"];

/// Two-copy state over the raw bits, the auxiliary registers and `E1E2`.
#[derive(Debug, Clone)]
pub struct TwoWayState {
    state: CcqState,
    functions: BlockFunctions,
}

impl TwoWayState {
    pub fn ccq(&self) -> &CcqState {
        &self.state
    }

    pub fn functions(&self) -> BlockFunctions {
        self.functions
    }

    /// `H(target | given [E1E2])`.
    pub fn h(&self, target: &[&str], given: &[&str], eve: bool) -> f64 {
        self.state.conditional_entropy(target, given, eve).expect("register names are fixed")
    }

    /// The reduced state on `(U1, U2, V2, W1)` and `E1E2`.
    pub fn key_registers(&self) -> CcqState {
        self.state.marginal(&["U1", "U2", "V2", "W1"]).expect("register names are fixed")
    }
}

/// Purifies `rho`, takes two copies and measures both halves in the z basis.
pub fn derive_two_way_state(rho: &ChoiOperator, f: BlockFunctions) -> TwoWayState {
    let (vecs, r) = eve_vectors(rho, Basis::Z, Basis::Z);
    let regs: Vec<(&str, usize)> = REGISTERS.iter().map(|n| (*n, 2)).collect();
    let mut state = CcqState::new(&regs, r * r);
    for x1 in 0..2 {
        for y1 in 0..2 {
            for x2 in 0..2 {
                for y2 in 0..2 {
                    let v = vecs[2 * x1 + y1].kronecker(&vecs[2 * x2 + y2]);
                    let (u1, v1) = (x1 ^ x2, y1 ^ y2);
                    let outcome = [x1, x2, y1, y2, u1, v1, u1 ^ v1, f.zeta_a(x2, u1, v1), f.zeta_b(y2, u1, v1)];
                    state.add_weighted(&outcome, &v * v.adjoint()).expect("register shapes match");
                }
            }
        }
    }
    TwoWayState { state, functions: f }
}

/// Eve's ambiguities of the two branches: `H(U1U2V2|W1E)` and `H(U2V2|U1W1E)`
/// (direct), or `H(V1U2V2|W1E)` and `H(U2V2|V1W1E)` (reverse).
pub fn two_way_ambiguities(s: &TwoWayState, direction: Direction) -> [f64; 2] {
    let first = match direction {
        Direction::Direct => "U1",
        Direction::Reverse => "V1",
    };
    [s.h(&[first, "U2", "V2"], &["W1"], true), s.h(&["U2", "V2"], &[first, "W1"], true)]
}

/// The two branch values (before halving) of the two-way rate.
pub fn branch_values(s: &TwoWayState, direction: Direction) -> [f64; 2] {
    let [e1, e2] = two_way_ambiguities(s, direction);
    let second = s.h(&["U2"], &["W1", "Y1", "Y2"], false) + s.h(&["V2"], &["W1", "X1", "X2"], false);
    let first = match direction {
        Direction::Direct => s.h(&["U1"], &["Y1", "Y2"], false),
        Direction::Reverse => s.h(&["V1"], &["X1", "X2"], false),
    };
    [e1 - first - second, e2 - second]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TwoWayRate {
    /// `max(0, raw)`, in bits per channel use.
    pub rate: f64,
    pub raw: f64,
    /// Branch values before halving, at the worst-case channel.
    pub branches: [f64; 2],
    pub functions: BlockFunctions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_case: Option<StokesParams>,
}

impl TwoWayRate {
    fn new(branches: [f64; 2], functions: BlockFunctions, worst_case: Option<StokesParams>) -> Self {
        let raw = 0.5 * branches[0].max(branches[1]);
        Self { rate: raw.max(0.0), raw, branches, functions, worst_case }
    }
}

fn stokes_of(input: &ChannelInput) -> Option<StokesParams> {
    match input {
        ChannelInput::Choi(c) => Some(crate::channel::choi_to_stokes(c)),
        ChannelInput::Slice(crate::channel::ParameterSlice::Full(s)) => Some(*s),
        _ => None,
    }
}

fn omega_of(input: &ChannelInput) -> Result<Omega> {
    match input {
        ChannelInput::Slice(crate::channel::ParameterSlice::Omega(o)) => Ok(*o),
        other => stokes_of(other)
            .map(|s| Omega::from_stokes(&s))
            .ok_or_else(|| Error::Domain("BB84 rates need an ω slice or the full channel".into())),
    }
}

/// Minimizes `g` over the `R_yy` interval of `omega`; returns `(value, R_yy)`.
fn worst_over_ryy<G: Fn(&ChoiOperator) -> f64>(omega: &Omega, g: G) -> Result<(f64, f64)> {
    let (lo, hi) = omega.ryy_interval()?;
    let f = |r: f64| g(&ChoiOperator::from_stokes_unchecked(&omega.completion(r)));
    let (r, v) = minimize_scalar(f, lo, hi, RYY_PRESCAN, RYY_TOL);
    Ok((v, r))
}

/// Two-way rate; for BB84 the worst case over the `R_yy` interval.
pub fn rate_twoway(
    input: &ChannelInput,
    protocol: Protocol,
    direction: Direction,
    f: BlockFunctions,
) -> Result<TwoWayRate> {
    match protocol {
        Protocol::SixState => {
            let s = stokes_of(input).ok_or_else(|| Error::Domain("six-state rates need the full channel".into()))?;
            let rho = stokes_to_choi(&s)?;
            Ok(TwoWayRate::new(branch_values(&derive_two_way_state(&rho, f), direction), f, Some(s)))
        }
        Protocol::Bb84 => {
            let omega = omega_of(input)?;
            let g = |rho: &ChoiOperator| {
                let b = branch_values(&derive_two_way_state(rho, f), direction);
                0.5 * b[0].max(b[1])
            };
            let (_, r) = worst_over_ryy(&omega, g)?;
            let worst = omega.completion(r);
            let rho = ChoiOperator::from_stokes_unchecked(&worst);
            Ok(TwoWayRate::new(branch_values(&derive_two_way_state(&rho, f), direction), f, Some(worst)))
        }
    }
}

/// Closed-form two-way rate of a Bell-diagonal channel with the
/// advantage-distillation block functions.
pub fn pauli_closed_form(p: &BellDistribution) -> Result<f64> {
    p.validate()?;
    let [p00, p10, p01, p11] = p.as_array().map(|v| v.max(0.0));
    let (a, b) = (p00 + p01, p10 + p11);
    let pk0 = a * a + b * b;
    let pk1 = 2.0 * a * b;
    let hkl = shannon(&[p00, p10, p01, p11]);
    let mix = if a * b > 0.0 { h((p00 * p10 + p01 * p11) / (a * b)) } else { 0.0 };
    let first = 1.0 - hkl + 0.5 * pk1 * mix;
    let second = if pk0 > 0.0 {
        let q = [p00 * p00 + p01 * p01, 2.0 * p00 * p01, p10 * p10 + p11 * p11, 2.0 * p10 * p11].map(|v| v / pk0);
        0.5 * pk0 * (1.0 - shannon(&q))
    } else {
        0.0
    };
    Ok(first.max(second))
}

/// Yield of the breeding-based two-way distillation protocol on a Bell-diagonal state.
pub fn vollbrecht_yield(p: &BellDistribution) -> Result<f64> {
    p.validate()?;
    let [p00, p10, p01, p11] = p.as_array().map(|v| v.max(0.0));
    let (a, b) = (p00 + p01, p10 + p11);
    let ratio = |n: f64, d: f64| if d > 0.0 { h(n / d) } else { 0.0 };
    Ok(1.0 - shannon(&[p00, p10, p01, p11]) + 0.5 * a * b * (ratio(p01, a) + ratio(p11, b)))
}

/// `½[H(U2|U1W1E) − H(U2|W1Y1Y2)]` with the advantage-distillation functions.
pub fn advantage_distillation_rate(rho: &ChoiOperator) -> f64 {
    let s = derive_two_way_state(rho, BlockFunctions::advantage_distillation());
    0.5 * (s.h(&["U2"], &["U1", "W1"], true) - s.h(&["U2"], &["W1", "Y1", "Y2"], false))
}

/// The rate obtained by adapting the classical two-way key-agreement formula
/// of Gohari and Anantharam; a diagnostic, not a bound.
pub fn gohari_rate(rho: &ChoiOperator, f: BlockFunctions) -> f64 {
    let s = derive_two_way_state(rho, f);
    let t = s.h(&["U1"], &[], true) - s.h(&["U1"], &["Y1", "Y2"], false) + s.h(&["W1"], &["U1"], true)
        - s.h(&["W1"], &["U1", "X1", "X2"], false)
        + s.h(&["U2"], &["U1", "W1"], true)
        - s.h(&["U2"], &["U1", "W1", "Y1", "Y2"], false)
        + s.h(&["V2"], &["U1", "W1", "U2"], true)
        - s.h(&["V2"], &["U1", "W1", "U2", "X1", "X2"], false);
    0.5 * t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ComparisonRates {
    pub advantage_distillation: f64,
    /// Only defined for Pauli channels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vollbrecht: Option<f64>,
    pub gohari: f64,
}

fn bell_of(s: &StokesParams) -> Option<BellDistribution> {
    let off = (0..3).flat_map(|b| (0..3).filter(move |&a| a != b).map(move |a| (b, a)));
    let diagonal = off.clone().all(|(b, a)| s.r[b][a].abs() < 1e-12) && s.t.iter().all(|v| v.abs() < 1e-12);
    diagonal.then(|| BellDistribution::from_diagonal([s.r[0][0], s.r[1][1], s.r[2][2]]).ok()).flatten()
}

/// Advantage distillation, the distillation-protocol yield and the adapted
/// Gohari–Anantharam formula; BB84 takes each at its own worst case.
pub fn comparison_rates(input: &ChannelInput, protocol: Protocol) -> Result<ComparisonRates> {
    let f = BlockFunctions::advantage_distillation();
    match protocol {
        Protocol::SixState => {
            let s = stokes_of(input).ok_or_else(|| Error::Domain("six-state rates need the full channel".into()))?;
            let rho = stokes_to_choi(&s)?;
            Ok(ComparisonRates {
                advantage_distillation: advantage_distillation_rate(&rho),
                vollbrecht: bell_of(&s).map(|p| vollbrecht_yield(&p)).transpose()?,
                gohari: gohari_rate(&rho, f),
            })
        }
        Protocol::Bb84 => {
            let omega = omega_of(input)?;
            let (ad, _) = worst_over_ryy(&omega, advantage_distillation_rate)?;
            let (go, _) = worst_over_ryy(&omega, |r| gohari_rate(r, f))?;
            let pauli = [omega.r_zx, omega.r_xz, omega.t_z, omega.t_x].iter().all(|v| v.abs() < 1e-12);
            let vollbrecht = if pauli {
                let (lo, hi) = bell_ryy_interval(omega.r_zz, omega.r_xx)
                    .ok_or(Error::EmptyCandidateSet { best_eigenvalue: f64::NAN })?;
                let g = |r: f64| {
                    BellDistribution::from_diagonal([omega.r_zz, omega.r_xx, r])
                        .and_then(|p| vollbrecht_yield(&p))
                        .unwrap_or(f64::INFINITY)
                };
                Some(minimize_scalar(g, lo, hi, RYY_PRESCAN, RYY_TOL).1)
            } else {
                None
            };
            Ok(ComparisonRates { advantage_distillation: ad, vollbrecht, gohari: go })
        }
    }
}

/// Result of the exhaustive block-function search.
#[derive(Debug, Clone, Serialize)]
pub struct BlockSearch {
    pub best: BlockFunctions,
    pub result: TwoWayRate,
    /// Every pair within [`TIE_TOL`] of the maximum, in lexicographic order.
    pub ties: Vec<BlockFunctions>,
    /// Raw rate of every pair, in lexicographic order.
    pub table: Vec<(BlockFunctions, f64)>,
}

/// Rates closer than this to the maximum count as ties.
pub const TIE_TOL: f64 = 1e-12;

/// Exhaustive search over all 256 pairs of truth tables. Ties go to the
/// lexicographically smallest pair.
pub fn optimize_block_functions(input: &ChannelInput, protocol: Protocol, direction: Direction) -> Result<BlockSearch> {
    let all = BlockFunctions::all();
    let results: Vec<TwoWayRate> =
        all.par_iter().map(|f| rate_twoway(input, protocol, direction, *f)).collect::<Result<_>>()?;
    let max = results.iter().map(|r| r.raw).fold(f64::NEG_INFINITY, f64::max);
    let i = results.iter().position(|r| r.raw >= max - TIE_TOL).expect("nonempty");
    Ok(BlockSearch {
        best: all[i],
        result: results[i].clone(),
        ties: all.iter().zip(&results).filter(|(_, r)| r.raw >= max - TIE_TOL).map(|(f, _)| *f).collect(),
        table: all.iter().zip(&results).map(|(f, r)| (*f, r.raw)).collect(),
    })
}

/// Spectral data of a uniform mixture of Eve's two-copy Bell-basis states over a coset.
#[derive(Debug, Clone)]
pub struct CosetSpectrum {
    /// Coset representatives `j` of `F2^m / C^⊥`.
    pub representatives: Vec<u32>,
    /// `P_{J|K=k}(j)`.
    pub values: Vec<f64>,
    /// `|ϑ(a, k, j)>` on the `2^m`-dimensional phase register.
    pub vectors: Vec<CVector>,
}

fn dot(a: u32, b: u32) -> u32 {
    (a & b).count_ones() & 1
}

fn span(generators: &[u32]) -> Vec<u32> {
    let mut out = vec![0u32];
    for &g in generators {
        if !out.contains(&g) {
            let shifted: Vec<u32> = out.iter().map(|v| v ^ g).collect();
            out.extend(shifted);
        }
    }
    out.sort_unstable();
    out
}

fn check_coset_args(m: usize, generators: &[u32], a: u32, k: u32) -> Result<()> {
    if m == 0 || m > 4 {
        return domain(format!("block length {m} outside 1..=4"));
    }
    let mask = (1u32 << m) - 1;
    if generators.iter().chain([&a, &k]).any(|v| v & !mask != 0) {
        return domain(format!("vectors must lie in F2^{m}"));
    }
    Ok(())
}

/// `P^m_KL(k, l)` for i.i.d. coordinates; bit `i` of `k`, `l` is coordinate `i`.
fn product_prob(p: &BellDistribution, m: usize, k: u32, l: u32) -> f64 {
    (0..m).map(|i| p.get((k >> i & 1) as usize, (l >> i & 1) as usize)).product()
}

/// `|φ(x, k)>` on the phase register, normalized by `P^m_K(k)`.
fn phi(p: &BellDistribution, m: usize, x: u32, k: u32) -> Result<CVector> {
    let pk: f64 = (0..1u32 << m).map(|l| product_prob(p, m, k, l)).sum();
    if pk <= 0.0 {
        return domain("conditioning on a zero-probability bit-flip pattern");
    }
    Ok(CVector::from_iterator(
        1 << m,
        (0..1u32 << m).map(|l| {
            let s = if dot(x, l) == 1 { -1.0 } else { 1.0 };
            num_complex::Complex64::new(s * (product_prob(p, m, k, l) / pk).sqrt(), 0.0)
        }),
    ))
}

/// `Σ_{x∈C} |C|⁻¹ |φ(x+a, k)><φ(x+a, k)|`, built directly.
pub fn coset_mixture(generators: &[u32], m: usize, a: u32, k: u32, p: &BellDistribution) -> Result<CMatrix> {
    check_coset_args(m, generators, a, k)?;
    let code = span(generators);
    let mut out = CMatrix::zeros(1 << m, 1 << m);
    for &x in &code {
        let v = phi(p, m, x ^ a, k)?;
        out += &v * v.adjoint();
    }
    Ok(out.scale(1.0 / code.len() as f64))
}

/// Eigen-decomposition of [`coset_mixture`] in closed form. The mixture has
/// one eigenvector per coset of the dual code `C^⊥`.
pub fn coset_mixture_eigendecomposition(
    generators: &[u32],
    m: usize,
    a: u32,
    k: u32,
    p: &BellDistribution,
) -> Result<CosetSpectrum> {
    check_coset_args(m, generators, a, k)?;
    let code = span(generators);
    let dual: Vec<u32> = (0..1u32 << m).filter(|&c| code.iter().all(|&x| dot(x, c) == 0)).collect();
    let pk: f64 = (0..1u32 << m).map(|l| product_prob(p, m, k, l)).sum();
    if pk <= 0.0 {
        return domain("conditioning on a zero-probability bit-flip pattern");
    }
    let mut seen = vec![false; 1 << m];
    let (mut reps, mut values, mut vectors) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..1u32 << m {
        if seen[j as usize] {
            continue;
        }
        let mut v = CVector::zeros(1 << m);
        let mut mass = 0.0;
        for &c in &dual {
            seen[(j ^ c) as usize] = true;
            let w = product_prob(p, m, k, j ^ c);
            mass += w;
            let s = if dot(a, c) == 1 { -1.0 } else { 1.0 };
            v[(j ^ c) as usize] = num_complex::Complex64::new(s * w.sqrt(), 0.0);
        }
        if mass > 0.0 {
            v /= num_complex::Complex64::new(mass.sqrt(), 0.0);
        }
        reps.push(j);
        values.push(mass / pk);
        vectors.push(v);
    }
    Ok(CosetSpectrum { representatives: reps, values, vectors })
}

/// Largest deviation between the closed-form spectrum and a dense solve.
pub fn coset_spectrum_residual(spec: &CosetSpectrum, mixture: &CMatrix) -> f64 {
    let mut recon = CMatrix::zeros(mixture.nrows(), mixture.ncols());
    for (v, w) in spec.vectors.iter().zip(&spec.values) {
        recon += (v * v.adjoint()).scale(*w);
    }
    let mut dense = DenseOperator::wrap(mixture.clone()).eigenvalues();
    let mut closed = spec.values.clone();
    closed.resize(dense.len(), 0.0);
    closed.sort_by(f64::total_cmp);
    dense.sort_by(f64::total_cmp);
    let ev = dense.iter().zip(&closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ev.max((recon - mixture).iter().map(|c| c.norm()).fold(0.0, f64::max))
}
