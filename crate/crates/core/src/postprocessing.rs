//! Desk-scale information reconciliation, privacy amplification, finite-key
//! lengths and exact secrecy audits.
//!
//! Bit vectors are `&[u8]` with entries in `{0, 1}`. Internally a vector of
//! length `n ≤ 64` is packed with coordinate 0 in the most significant
//! position, so integer order is lexicographic order.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{joint_distribution, Basis, ChoiOperator};
use crate::error::{domain, Error, Result};
use crate::quantum::{CMatrix, CcqState, DenseOperator};
use crate::twoway::{derive_two_way_state, BlockFunctions};

fn pack(v: &[u8]) -> u64 {
    v.iter().fold(0u64, |acc, &b| acc << 1 | u64::from(b & 1))
}

fn unpack(x: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| (x >> (n - 1 - i) & 1) as u8).collect()
}

fn check_bits(v: &[u8], n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::Dimension(format!("{what} has length {}, expected {n}", v.len())));
    }
    if v.iter().any(|&b| b > 1) {
        return domain(format!("{what} has a non-binary entry"));
    }
    Ok(())
}

/// Parity-check matrix `M` of a binary linear code, full row rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearCode {
    n: usize,
    rows: Vec<u64>,
}

/// Largest supported block length of a [`LinearCode`].
pub const MAX_CODE_LENGTH: usize = 64;

fn rank(rows: &[u64]) -> usize {
    let mut basis: Vec<u64> = Vec::new();
    for &r in rows {
        let mut v = r;
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len()
}

impl LinearCode {
    pub fn new(n: usize, rows: Vec<Vec<u8>>) -> Result<Self> {
        if n == 0 || n > MAX_CODE_LENGTH {
            return domain(format!("block length {n} outside 1..={MAX_CODE_LENGTH}"));
        }
        for r in &rows {
            check_bits(r, n, "parity-check row")?;
        }
        Self::from_packed(n, rows.iter().map(|r| pack(r)).collect())
    }

    fn from_packed(n: usize, rows: Vec<u64>) -> Result<Self> {
        if rank(&rows) != rows.len() {
            return domain("parity-check rows are linearly dependent");
        }
        Ok(Self { n, rows })
    }

    /// Uniformly random full-rank `k × n` parity-check matrix.
    pub fn random<R: Rng>(n: usize, k: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || n > MAX_CODE_LENGTH || k > n {
            return domain(format!("no {k} x {n} parity-check matrix"));
        }
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut rows = Vec::with_capacity(k);
        while rows.len() < k {
            let r = rng.random::<u64>() & mask;
            rows.push(r);
            if rank(&rows) < rows.len() {
                rows.pop();
            }
        }
        Self::from_packed(n, rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Syndrome length.
    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.rows.iter().map(|&r| unpack(r, self.n)).collect()
    }

    fn syndrome_packed(&self, x: u64) -> u64 {
        self.rows.iter().fold(0u64, |acc, r| acc << 1 | u64::from((r & x).count_ones() & 1))
    }

    /// A particular solution of `Mx = t` and a basis of the kernel.
    fn coset(&self, t: u64) -> (u64, Vec<u64>) {
        let k = self.k();
        // Row-reduce [M | t].
        let mut rows: Vec<(u64, u8)> =
            self.rows.iter().enumerate().map(|(i, &r)| (r, (t >> (k - 1 - i) & 1) as u8)).collect();
        let mut pivots = Vec::new();
        let mut r = 0;
        for col in (0..self.n).rev() {
            let bit = 1u64 << col;
            let Some(p) = (r..k).find(|&i| rows[i].0 & bit != 0) else { continue };
            rows.swap(r, p);
            for i in 0..k {
                if i != r && rows[i].0 & bit != 0 {
                    rows[i].0 ^= rows[r].0;
                    rows[i].1 ^= rows[r].1;
                }
            }
            pivots.push(bit);
            r += 1;
        }
        let x0 = rows.iter().zip(&pivots).filter(|((_, b), _)| *b == 1).fold(0u64, |acc, (_, p)| acc | p);
        let pivot_mask = pivots.iter().fold(0u64, |acc, p| acc | p);
        let kernel = (0..self.n)
            .map(|c| 1u64 << c)
            .filter(|f| pivot_mask & f == 0)
            .map(|f| rows.iter().zip(&pivots).filter(|((row, _), _)| row & f != 0).fold(f, |acc, (_, p)| acc | p))
            .collect();
        (x0, kernel)
    }
}

impl fmt::Display for LinearCode {
    /// First line `n k`, then one line of `n` bits per row.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.n, self.k())?;
        for r in self.rows() {
            writeln!(f, "{}", r.iter().map(|b| char::from(b'0' + b)).collect::<String>())?;
        }
        Ok(())
    }
}

impl FromStr for LinearCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty());
        let head = lines.next().ok_or_else(|| Error::Parse("empty code file".into()))?;
        let nums: Vec<usize> = head
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| Error::Parse(format!("bad header `{head}`"))))
            .collect::<Result<_>>()?;
        let [n, k] = nums[..] else { return Err(Error::Parse(format!("expected `n k`, got `{head}`"))) };
        let rows: Vec<Vec<u8>> = lines
            .map(|l| {
                l.bytes()
                    .map(|c| match c {
                        b'0' => Ok(0),
                        b'1' => Ok(1),
                        _ => Err(Error::Parse(format!("bad row `{l}`"))),
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        if rows.len() != k {
            return Err(Error::Parse(format!("header promises {k} rows, found {}", rows.len())));
        }
        Self::new(n, rows)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Syndrome {
    pub bits: Vec<u8>,
}

pub fn syndrome(code: &LinearCode, x: &[u8]) -> Result<Syndrome> {
    check_bits(x, code.n, "input")?;
    Ok(Syndrome { bits: unpack(code.syndrome_packed(pack(x)), code.k()) })
}

/// Exhaustive decoding limits: block length and coset dimension.
pub const DECODE_MAX_N: usize = 24;
pub const DECODE_MAX_COSET_DIM: usize = 20;

/// Scores closer than this count as ties.
const SCORE_TIE: f64 = 1e-9;

/// The member of `{x : Mx = t}` whose joint type with `side` has the least
/// entropy; ties go to the lexicographically smallest `x`.
pub fn min_entropy_decode(code: &LinearCode, t: &Syndrome, side: &[usize]) -> Result<Vec<u8>> {
    let n = code.n;
    if n > DECODE_MAX_N || n - code.k() > DECODE_MAX_COSET_DIM {
        return Err(Error::BudgetExceeded(format!(
            "decoding n={n}, k={} exceeds n ≤ {DECODE_MAX_N}, n−k ≤ {DECODE_MAX_COSET_DIM}",
            code.k()
        )));
    }
    check_bits(&t.bits, code.k(), "syndrome")?;
    if side.len() != n {
        return Err(Error::Dimension(format!("side information has length {}, expected {n}", side.len())));
    }
    let s = side.iter().max().map_or(1, |m| m + 1);
    let (x0, kernel) = code.coset(pack(&t.bits));
    // Maximizing Σ c log c over the joint type minimizes its entropy.
    let clog: Vec<f64> = (0..=n).map(|c| if c == 0 { 0.0 } else { c as f64 * (c as f64).log2() }).collect();
    let mut counts = vec![0usize; 2 * s];
    let bit = |x: u64, i: usize| (x >> (n - 1 - i) & 1) as usize;
    for i in 0..n {
        counts[bit(x0, i) * s + side[i]] += 1;
    }
    let score = |c: &[usize]| c.iter().map(|&v| clog[v]).sum::<f64>();
    let (mut x, mut best_x, mut best) = (x0, x0, score(&counts));
    for step in 1u64..1u64 << kernel.len() {
        let g = kernel[step.trailing_zeros() as usize];
        let mut rest = g;
        while rest != 0 {
            let pos = 63 - rest.leading_zeros() as usize;
            rest &= !(1u64 << pos);
            let i = n - 1 - pos;
            let b = bit(x, i);
            counts[b * s + side[i]] -= 1;
            counts[(1 - b) * s + side[i]] += 1;
        }
        x ^= g;
        let v = score(&counts);
        if v > best + SCORE_TIE || (v >= best - SCORE_TIE && x < best_x) {
            best = best.max(v);
            best_x = x;
        }
    }
    Ok(unpack(best_x, n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneWayIr {
    pub x_hat: Vec<u8>,
    /// The only public message.
    pub syndrome: Syndrome,
}

/// Alice sends `Mx`; Bob decodes with `y` as side information.
pub fn one_way_ir(x: &[u8], y: &[u8], code: &LinearCode) -> Result<OneWayIr> {
    check_bits(y, code.n, "Bob's string")?;
    let t = syndrome(code, x)?;
    let side: Vec<usize> = y.iter().map(|&b| b as usize).collect();
    Ok(OneWayIr { x_hat: min_entropy_decode(code, &t, &side)?, syndrome: t })
}

/// Parity-check matrices for the three syndromes of the two-way procedure.
#[derive(Debug, Clone)]
pub struct TwoWayCodes {
    pub m1: LinearCode,
    pub ma2: LinearCode,
    pub mb2: LinearCode,
}

/// Public messages of the two-way procedure, in the order they are sent.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TwoWayTranscript {
    pub t1: Syndrome,
    pub w1_hat: Vec<u8>,
    pub ta2: Syndrome,
    pub tb2: Syndrome,
}

/// Registers Eve holds when privacy amplification starts: the transcript
/// and the hash choice.
pub const TWO_WAY_PUBLIC_REGISTERS: [&str; 5] = ["W1", "T1", "TA2", "TB2", "F"];

/// Key triple `(u1, u2, v2)`.
pub type KeyTriple = [Vec<u8>; 3];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoWayIr {
    pub alice: KeyTriple,
    pub bob: KeyTriple,
    /// The triple both parties would hold without decoding errors.
    pub truth: KeyTriple,
    pub transcript: TwoWayTranscript,
    pub success: bool,
}

/// The two-way reconciliation on `n` blocks; block `i` is `(x[2i], x[2i+1])`.
pub fn two_way_ir(x: &[u8], y: &[u8], codes: &TwoWayCodes, f: BlockFunctions) -> Result<TwoWayIr> {
    let n = codes.m1.n;
    if codes.ma2.n != n || codes.mb2.n != n {
        return Err(Error::Dimension("the three codes need a common block length".into()));
    }
    check_bits(x, 2 * n, "Alice's string")?;
    check_bits(y, 2 * n, "Bob's string")?;
    let (x1, x2): (Vec<usize>, Vec<usize>) = (0..n).map(|i| (x[2 * i] as usize, x[2 * i + 1] as usize)).unzip();
    let (y1, y2): (Vec<usize>, Vec<usize>) = (0..n).map(|i| (y[2 * i] as usize, y[2 * i + 1] as usize)).unzip();
    let bits = |v: &[usize]| v.iter().map(|&b| b as u8).collect::<Vec<u8>>();

    // (i) Alice announces the syndrome of u1.
    let u1: Vec<usize> = (0..n).map(|i| x1[i] ^ x2[i]).collect();
    let v1: Vec<usize> = (0..n).map(|i| y1[i] ^ y2[i]).collect();
    let t1 = syndrome(&codes.m1, &bits(&u1))?;
    // (ii) Bob decodes u1 and announces ŵ1.
    let side_b: Vec<usize> = (0..n).map(|i| 2 * y1[i] + y2[i]).collect();
    let u1_hat: Vec<usize> = min_entropy_decode(&codes.m1, &t1, &side_b)?.iter().map(|&b| b as usize).collect();
    let w1_hat: Vec<usize> = (0..n).map(|i| u1_hat[i] ^ v1[i]).collect();
    // (iii) Both apply the block functions.
    let u2_tilde: Vec<usize> = (0..n).map(|i| f.zeta_a(x2[i], u1[i], u1[i] ^ w1_hat[i])).collect();
    let v2_tilde: Vec<usize> = (0..n).map(|i| f.zeta_b(y2[i], u1_hat[i], v1[i])).collect();
    // (iv) Cross syndromes.
    let ta2 = syndrome(&codes.ma2, &bits(&u2_tilde))?;
    let tb2 = syndrome(&codes.mb2, &bits(&v2_tilde))?;
    // (v) Cross decoding.
    let side_b2: Vec<usize> = (0..n).map(|i| 4 * w1_hat[i] + side_b[i]).collect();
    let side_a2: Vec<usize> = (0..n).map(|i| 4 * w1_hat[i] + 2 * x1[i] + x2[i]).collect();
    let u2_hat = min_entropy_decode(&codes.ma2, &ta2, &side_b2)?;
    let v2_hat = min_entropy_decode(&codes.mb2, &tb2, &side_a2)?;

    let w1: Vec<usize> = (0..n).map(|i| u1[i] ^ v1[i]).collect();
    let truth = [
        bits(&u1),
        (0..n).map(|i| f.zeta_a(x2[i], u1[i], v1[i]) as u8).collect(),
        (0..n).map(|i| f.zeta_b(y2[i], u1[i], u1[i] ^ w1[i]) as u8).collect(),
    ];
    let alice = [bits(&u1), bits(&u2_tilde), v2_hat];
    let bob = [bits(&u1_hat), u2_hat, bits(&v2_tilde)];
    let success = alice == bob && alice == truth;
    Ok(TwoWayIr { alice, bob, truth, transcript: TwoWayTranscript { t1, w1_hat: bits(&w1_hat), ta2, tb2 }, success })
}

/// Syndrome rates the two-way procedure needs per block:
/// `[H(U1|Y1Y2), H(U2|W1Y1Y2), H(V2|W1X1X2)]`.
pub fn two_way_thresholds(rho: &ChoiOperator, f: BlockFunctions) -> [f64; 3] {
    let s = derive_two_way_state(rho, f);
    [
        s.h(&["U1"], &["Y1", "Y2"], false),
        s.h(&["U2"], &["W1", "Y1", "Y2"], false),
        s.h(&["V2"], &["W1", "X1", "X2"], false),
    ]
}

/// Draws `n` i.i.d. pairs from `P_XY` indexed `2x + y`.
pub fn draw_pairs<R: Rng>(p_xy: &[f64; 4], n: usize, rng: &mut R) -> (Vec<u8>, Vec<u8>) {
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut i = 3;
        for (j, p) in p_xy.iter().enumerate() {
            acc += p;
            if u < acc {
                i = j;
                break;
            }
        }
        x.push((i >> 1) as u8);
        y.push((i & 1) as u8);
    }
    (x, y)
}

/// `P_XY` of `rho` measured in the z basis.
pub fn z_basis_pairs(rho: &ChoiOperator) -> [f64; 4] {
    joint_distribution(rho, Basis::Z, Basis::Z).probs().try_into().expect("four outcomes")
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return domain("at least one trial is required");
    }
    Ok(())
}

/// Empirical block error of one-way reconciliation with a fresh random code per trial.
pub fn one_way_ir_error(p_xy: &[f64; 4], n: usize, k: usize, trials: usize, seed: u64) -> Result<f64> {
    check_trials(trials)?;
    let fails: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let code = LinearCode::random(n, k, &mut rng)?;
            let (x, y) = draw_pairs(p_xy, n, &mut rng);
            Ok(usize::from(one_way_ir(&x, &y, &code)?.x_hat != x))
        })
        .sum::<Result<usize>>()?;
    Ok(fails as f64 / trials as f64)
}

/// Largest block error over a grid of distributions, one random code per
/// trial shared by every grid point.
pub fn universal_ir_error(grid: &[[f64; 4]], n: usize, k: usize, trials: usize, seed: u64) -> Result<f64> {
    check_trials(trials)?;
    let per_trial: Vec<Vec<u8>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let code = LinearCode::random(n, k, &mut rng)?;
            grid.iter()
                .map(|p| {
                    let (x, y) = draw_pairs(p, n, &mut rng);
                    Ok(u8::from(one_way_ir(&x, &y, &code)?.x_hat != x))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let worst = (0..grid.len()).map(|g| per_trial.iter().map(|r| r[g] as usize).sum::<usize>()).max().unwrap_or(0);
    Ok(worst as f64 / trials as f64)
}

/// Empirical success rate of [`two_way_ir`] on `n` blocks drawn from `rho`
/// with syndrome lengths `k = [k1, kA2, kB2]`.
pub fn two_way_ir_success(
    rho: &ChoiOperator,
    f: BlockFunctions,
    n: usize,
    k: [usize; 3],
    trials: usize,
    seed: u64,
) -> Result<f64> {
    check_trials(trials)?;
    let p = z_basis_pairs(rho);
    let wins: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let codes = TwoWayCodes {
                m1: LinearCode::random(n, k[0], &mut rng)?,
                ma2: LinearCode::random(n, k[1], &mut rng)?,
                mb2: LinearCode::random(n, k[2], &mut rng)?,
            };
            let (x, y) = draw_pairs(&p, 2 * n, &mut rng);
            Ok(usize::from(two_way_ir(&x, &y, &codes, f)?.success))
        })
        .sum::<Result<usize>>()?;
    Ok(wins as f64 / trials as f64)
}

/// Toeplitz hash `{0,1}^n → {0,1}^ℓ`; entry `(i, j)` of the matrix is
/// `seed[i − j + n − 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzHash {
    n: usize,
    l: usize,
    seed: Vec<u8>,
}

impl ToeplitzHash {
    pub fn new(n: usize, l: usize, seed: Vec<u8>) -> Result<Self> {
        if l > n {
            return domain(format!("output length {l} exceeds input length {n}"));
        }
        if n == 0 {
            return domain("input length must be positive");
        }
        check_bits(&seed, n + l - 1, "Toeplitz seed")?;
        Ok(Self { n, l, seed })
    }

    /// The hash whose seed bits are the binary digits of `index`, lowest first.
    pub fn from_index(n: usize, l: usize, index: u64) -> Result<Self> {
        let len = (n + l).saturating_sub(1);
        Self::new(n, l, (0..len).map(|i| if i < 64 { (index >> i & 1) as u8 } else { 0 }).collect())
    }

    pub fn seed_bits(n: usize, l: usize) -> usize {
        (n + l).saturating_sub(1)
    }

    pub fn in_bits(&self) -> usize {
        self.n
    }

    pub fn out_bits(&self) -> usize {
        self.l
    }

    /// Row masks over the packed input.
    fn row_masks(&self) -> Vec<u64> {
        (0..self.l)
            .map(|i| (0..self.n).fold(0u64, |acc, j| acc << 1 | u64::from(self.seed[i + self.n - 1 - j])))
            .collect()
    }

    fn apply_packed(masks: &[u64], x: u64) -> u64 {
        masks.iter().fold(0u64, |acc, m| acc << 1 | u64::from((m & x).count_ones() & 1))
    }
}

pub fn toeplitz_apply(h: &ToeplitzHash, x: &[u8]) -> Result<Vec<u8>> {
    check_bits(x, h.n, "hash input")?;
    if h.n > 64 {
        // Long inputs: plain matrix-vector product.
        return Ok((0..h.l).map(|i| (0..h.n).fold(0u8, |acc, j| acc ^ (h.seed[i + h.n - 1 - j] & x[j]))).collect());
    }
    Ok(unpack(ToeplitzHash::apply_packed(&h.row_masks(), pack(x)), h.l))
}

/// Largest `Pr_f[f(x) = f(x′)]` over distinct pairs, by exhaustive seed enumeration.
pub fn toeplitz_collision_max(n: usize, l: usize) -> Result<f64> {
    let bits = ToeplitzHash::seed_bits(n, l);
    if n > 12 || bits > 20 {
        return Err(Error::BudgetExceeded(format!("collision enumeration at n={n}, ℓ={l}")));
    }
    let seeds = 1u64 << bits;
    let masks: Vec<Vec<u64>> =
        (0..seeds).map(|s| ToeplitzHash::from_index(n, l, s).map(|h| h.row_masks())).collect::<Result<_>>()?;
    // Linearity: f(x) = f(x′) iff f(x ⊕ x′) = 0.
    let worst = (1u64..1 << n)
        .into_par_iter()
        .map(|d| masks.iter().filter(|m| ToeplitzHash::apply_packed(m, d) == 0).count())
        .max()
        .unwrap_or(0);
    Ok(worst as f64 / seeds as f64)
}

/// Finite-key inputs shared by both procedures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteKeyParams {
    /// Key-generation length (blocks for the two-way procedure).
    pub n: u64,
    /// Number of samples used for estimation.
    pub m: u64,
    pub eps: f64,
    pub delta: f64,
    pub alpha: f64,
    /// `η(α)`.
    pub eta: f64,
}

impl FiniteKeyParams {
    fn check(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if self.n == 0 || self.m == 0 || !unit(self.eps) || !unit(self.delta) || !unit(self.alpha) {
            return domain("finite-key parameters need n, m > 0 and ε, δ, α in (0, 1)");
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return domain("η must be finite and nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", tag = "mode")]
pub enum KeyMode {
    /// `Ĥ(X|E)` and the syndrome length `k`.
    OneWay { h: f64, k: u64 },
    /// `[Ĥ(U1U2V2|W1E1E2), Ĥ(U2V2|U1W1E1E2)]` and the three syndrome lengths.
    TwoWay { h: [f64; 2], k1: u64, ka2: u64, kb2: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FiniteKeyResult {
    /// Key bits; zero on abort.
    pub length: u64,
    pub aborted: bool,
    /// Right-hand side of the length condition, per key-generation bit.
    pub margin: f64,
    pub nu: f64,
    /// `ε + δ` (one-way) or `ε + 3δ` (two-way); add `μ(α, m)` for the full security parameter.
    pub security: f64,
}

/// `ν_n` of the one-way procedure.
pub fn nu_one_way(n: u64, eps: f64) -> f64 {
    let n = n as f64;
    5.0 * ((3.0 / eps).log2() / n).sqrt() + 2.0 * (3.0 / (2.0 * eps)).log2() / n
}

/// `ν_n` of the two-way procedure.
pub fn nu_two_way(n: u64, eps: f64) -> f64 {
    let n = n as f64;
    5.0 * ((36.0 / (eps * eps)).log2() / n).sqrt() + 2.0 * (3.0 / eps).log2() / n
}

/// Largest integer strictly below `v`.
fn floor_strict(v: f64) -> u64 {
    let f = v.floor();
    (if f == v { f - 1.0 } else { f }).max(0.0) as u64
}

/// Largest secure key length; a nonpositive margin aborts.
pub fn finite_key_length(params: &FiniteKeyParams, mode: &KeyMode) -> Result<FiniteKeyResult> {
    params.check()?;
    let n = params.n as f64;
    let (margin, nu, scale, security) = match *mode {
        KeyMode::OneWay { h, k } => {
            let nu = nu_one_way(params.n, params.eps);
            (h - params.eta - k as f64 / n - nu, nu, n, params.eps + params.delta)
        }
        KeyMode::TwoWay { h, k1, ka2, kb2 } => {
            let nu = nu_two_way(params.n, params.eps);
            let b1 = h[0] - params.eta - (k1 + ka2 + kb2) as f64 / n;
            let b2 = h[1] - params.eta - (ka2 + kb2) as f64 / n;
            (0.5 * b1.max(b2) - nu, nu, 2.0 * n, params.eps + 3.0 * params.delta)
        }
    };
    if !(margin > 0.0) {
        return Ok(FiniteKeyResult { length: 0, aborted: true, margin, nu, security });
    }
    Ok(FiniteKeyResult { length: floor_strict(scale * margin), aborted: false, margin, nu, security })
}

/// The key register together with Eve's side information.
#[derive(Debug, Clone)]
pub enum AuditState {
    /// `P(x, e)` indexed `x · e_size + e`.
    Classical { n: usize, e_size: usize, p: Vec<f64> },
    /// `P(x) ρ_E^x` for each `x`.
    Quantum { n: usize, ops: Vec<CMatrix> },
}

/// Input-size limits of [`secrecy_audit`].
pub const AUDIT_MAX_CLASSICAL_BITS: usize = 16;
pub const AUDIT_MAX_QUANTUM_DIM: usize = 1024;
/// Seed spaces up to this size are enumerated exhaustively.
pub const AUDIT_EXHAUSTIVE_SEEDS: u64 = 1 << 20;
/// Size of the strided subsample used beyond [`AUDIT_EXHAUSTIVE_SEEDS`].
pub const AUDIT_SUBSAMPLE: u64 = 1 << 16;

impl AuditState {
    pub fn n(&self) -> usize {
        match self {
            AuditState::Classical { n, .. } | AuditState::Quantum { n, .. } => *n,
        }
    }

    /// Key bits from the named registers (their joint value, first register
    /// most significant); the rest of the state is Eve's.
    pub fn from_ccq(state: &CcqState, key: &[&str]) -> Result<Self> {
        let regs = state.registers();
        let idx: Vec<usize> = key.iter().map(|k| state.register_index(k)).collect::<Result<_>>()?;
        let key_size: usize = idx.iter().map(|&i| regs[i].size).product();
        if !key_size.is_power_of_two() {
            return domain("key registers must span a power-of-two alphabet");
        }
        let n = key_size.trailing_zeros() as usize;
        let rest: Vec<usize> = (0..regs.len()).filter(|i| !idx.contains(i)).collect();
        let flat = |o: &[usize], which: &[usize]| which.iter().fold(0, |acc, &i| acc * regs[i].size + o[i]);
        if state.is_classical() {
            let e_size: usize = rest.iter().map(|&i| regs[i].size).product();
            let mut p = vec![0.0; key_size * e_size];
            for (o, w) in state.joint() {
                p[flat(&o, &idx) * e_size + flat(&o, &rest)] += w;
            }
            return Ok(AuditState::Classical { n, e_size, p });
        }
        if !rest.is_empty() {
            return domain("a quantum audit takes every classical register as key");
        }
        let d = state.eve_dim();
        let mut ops = vec![CMatrix::zeros(d, d); key_size];
        for (o, w) in state.joint() {
            if let Some(c) = state.conditional(&o) {
                ops[flat(&o, &idx)] += c.matrix().scale(w);
            }
        }
        Ok(AuditState::Quantum { n, ops })
    }

    fn check(&self) -> Result<()> {
        match self {
            AuditState::Classical { n, e_size, p } => {
                if *n > AUDIT_MAX_CLASSICAL_BITS {
                    return Err(Error::BudgetExceeded(format!("classical audit at n={n}")));
                }
                if p.len() != (1 << n) * e_size {
                    return Err(Error::Dimension("P(x, e) has the wrong size".into()));
                }
            }
            AuditState::Quantum { n, ops } => {
                let d = ops.first().map_or(0, |o| o.nrows());
                if *n > 5 || (1usize << n) * d > AUDIT_MAX_QUANTUM_DIM {
                    return Err(Error::BudgetExceeded(format!("quantum audit at n={n}, dim E={d}")));
                }
                if ops.len() != 1 << n {
                    return Err(Error::Dimension("one operator per key value is required".into()));
                }
            }
        }
        Ok(())
    }
}

/// Iterations of the discrimination search in [`guessing_probability`].
const GUESS_ITERATIONS: usize = 400;

fn inverse_sqrt(m: &CMatrix) -> CMatrix {
    let spec = DenseOperator::wrap(m.clone()).eigh();
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (i, &v) in spec.values.iter().enumerate() {
        if v > 1e-14 {
            let c = spec.vectors.column(i);
            out += (c * c.adjoint()).scale(1.0 / v.sqrt());
        }
    }
    out
}

fn max_eigenvalue(m: &CMatrix) -> f64 {
    let h = (m + m.adjoint()).scale(0.5);
    DenseOperator::wrap(h).eigh().max()
}

/// Bounds `(lower, upper)` on Eve's optimal guessing probability of `x`
/// from `ops[x] = P(x) ρ_E^x`. The lower bound is attained by an explicit
/// measurement, the upper bound by a dual-feasible operator.
pub fn guessing_probability(ops: &[CMatrix]) -> (f64, f64) {
    let d = ops[0].nrows();
    let id = CMatrix::identity(d, d);
    let value = |pi: &[CMatrix]| ops.iter().zip(pi).map(|(a, p)| (a * p).trace().re).sum::<f64>();
    // Start from the pretty-good measurement.
    let total: CMatrix = ops.iter().fold(CMatrix::zeros(d, d), |acc, a| acc + a);
    let g = inverse_sqrt(&total);
    let mut pi: Vec<CMatrix> = ops.iter().map(|a| &g * a * &g).collect();
    let complete = |pi: &mut Vec<CMatrix>| {
        let s: CMatrix = pi.iter().fold(CMatrix::zeros(d, d), |acc, p| acc + p);
        pi[0] += &id - s;
    };
    complete(&mut pi);
    for _ in 0..GUESS_ITERATIONS {
        let gamma: CMatrix = ops.iter().zip(&pi).fold(CMatrix::zeros(d, d), |acc, (a, p)| acc + a * p * a);
        let g = inverse_sqrt(&gamma);
        let next: Vec<CMatrix> = ops.iter().zip(&pi).map(|(a, p)| &g * a * p * a * &g).collect();
        let mut next = next;
        complete(&mut next);
        if value(&next) < value(&pi) {
            break;
        }
        pi = next;
    }
    let lower = value(&pi);
    let sigma: CMatrix = ops.iter().zip(&pi).fold(CMatrix::zeros(d, d), |acc, (a, p)| acc + a * p);
    let sigma = (&sigma + sigma.adjoint()).scale(0.5);
    let shift = ops.iter().map(|a| max_eigenvalue(&(a - &sigma))).fold(0.0, f64::max);
    let upper = sigma.trace().re + d as f64 * shift;
    (lower, upper.max(lower))
}

/// `H_min(X|E)` as `−log2` of the guessing probability; for quantum Eve, a
/// certified lower bound.
pub fn audit_min_entropy(state: &AuditState) -> f64 {
    match state {
        AuditState::Classical { e_size, p, .. } => {
            let nx = p.len() / e_size;
            let guess: f64 = (0..*e_size).map(|e| (0..nx).map(|x| p[x * e_size + e]).fold(0.0, f64::max)).sum();
            -guess.log2()
        }
        AuditState::Quantum { ops, .. } => -guessing_probability(ops).1.log2(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditReport {
    /// `d(ρ_{F(X)EF} | EF)`, trace norm not halved.
    pub distance: f64,
    /// `2^{−½(H_min − ℓ)}`.
    pub bound: f64,
    pub min_entropy: f64,
    pub seeds_evaluated: u64,
    pub exhaustive: bool,
}

impl AuditReport {
    pub fn holds(&self) -> bool {
        self.distance <= self.bound + 1e-9
    }
}

fn trace_norm(m: &CMatrix) -> f64 {
    DenseOperator::wrap(m.clone()).eigenvalues().iter().map(|v| v.abs()).sum()
}

/// Exact distance from uniform of the Toeplitz-hashed key, averaged over the
/// hash family (a strided subsample beyond [`AUDIT_EXHAUSTIVE_SEEDS`]).
pub fn secrecy_audit(state: &AuditState, l: usize) -> Result<AuditReport> {
    state.check()?;
    let n = state.n();
    if l > n {
        return domain(format!("output length {l} exceeds input length {n}"));
    }
    let h_min = audit_min_entropy(state);
    let bound = 2f64.powf(-0.5 * (h_min - l as f64));
    if l == 0 {
        return Ok(AuditReport { distance: 0.0, bound, min_entropy: h_min, seeds_evaluated: 0, exhaustive: true });
    }
    let bits = ToeplitzHash::seed_bits(n, l);
    let space = 1u64 << bits;
    let (count, stride) =
        if space <= AUDIT_EXHAUSTIVE_SEEDS { (space, 1) } else { (AUDIT_SUBSAMPLE, space / AUDIT_SUBSAMPLE) };
    let out = 1usize << l;
    let uniform = 1.0 / out as f64;
    let distance_of = |seed: u64| -> f64 {
        let masks = ToeplitzHash::from_index(n, l, seed).expect("valid sizes").row_masks();
        match state {
            AuditState::Classical { e_size, p, .. } => {
                let mut q = vec![0.0; out * e_size];
                let mut pe = vec![0.0; *e_size];
                for x in 0..1usize << n {
                    let s = ToeplitzHash::apply_packed(&masks, x as u64) as usize;
                    for e in 0..*e_size {
                        q[s * e_size + e] += p[x * e_size + e];
                        pe[e] += p[x * e_size + e];
                    }
                }
                (0..out)
                    .flat_map(|s| (0..*e_size).map(move |e| (s, e)))
                    .map(|(s, e)| (q[s * e_size + e] - uniform * pe[e]).abs())
                    .sum()
            }
            AuditState::Quantum { ops, .. } => {
                let d = ops[0].nrows();
                let mut blocks = vec![CMatrix::zeros(d, d); out];
                for (x, a) in ops.iter().enumerate() {
                    blocks[ToeplitzHash::apply_packed(&masks, x as u64) as usize] += a;
                }
                let rho_e: CMatrix = ops.iter().fold(CMatrix::zeros(d, d), |acc, a| acc + a).scale(uniform);
                blocks.iter().map(|b| trace_norm(&(b - &rho_e))).sum()
            }
        }
    };
    let total: f64 = (0..count).into_par_iter().map(|i| distance_of(i * stride)).sum();
    Ok(AuditReport {
        distance: total / count as f64,
        bound,
        min_entropy: h_min,
        seeds_evaluated: count,
        exhaustive: stride == 1,
    })
}
