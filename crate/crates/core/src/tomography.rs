//! Finite-sample channel estimation from the sifting-phase statistics.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    bell_ryy_interval, choi_to_stokes, degrade, outcome_alphabet, sample_distribution, stokes_to_choi, Basis,
    BellDistribution, ChoiOperator, DegradedSymbol, Omega, ParameterSlice, Protocol, SampleOutcome, SliceKind,
    StokesParams, FEASIBILITY_TOL,
};
use crate::error::{domain, Error, Result};
use crate::oneway::{rate, ChannelInput, Direction, Estimation, RateQuery};
use crate::optimize::{golden_min, nelder_mead, NelderMeadOptions};
use crate::twoway::{derive_two_way_state, rate_twoway, two_way_ambiguities, BlockFunctions};

/// Outcome counts over [`outcome_alphabet`], in its fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub protocol: Protocol,
    pub m: u64,
    pub counts: Vec<u64>,
    /// `None` for data read from disk.
    pub seed: Option<u64>,
}

impl SampleSet {
    pub fn new(protocol: Protocol, counts: Vec<u64>, seed: Option<u64>) -> Result<Self> {
        let n = outcome_alphabet(protocol).len();
        if counts.len() != n {
            return Err(Error::Dimension(format!("{protocol} histogram needs {n} counts, got {}", counts.len())));
        }
        let m = counts.iter().sum();
        if m == 0 {
            return domain("sample set is empty");
        }
        Ok(Self { protocol, m, counts, seed })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Writes `x,basisA,y,basisB,count` rows for the whole alphabet.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        out.write_record(["x", "basisA", "y", "basisB", "count"]).map_err(io)?;
        for (z, c) in outcome_alphabet(self.protocol).iter().zip(&self.counts) {
            out.write_record([
                z.x.to_string(),
                z.basis_a.to_string(),
                z.y.to_string(),
                z.basis_b.to_string(),
                c.to_string(),
            ])
            .map_err(io)?;
        }
        out.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads the CSV form. The protocol is six-state iff a y basis appears.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        let mut reader = csv::Reader::from_reader(r);
        let header = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != ["x", "basisA", "y", "basisB", "count"] {
            return Err(Error::Parse("expected header `x,basisA,y,basisB,count`".into()));
        }
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let bit = |s: &str| match s {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                _ => Err(Error::Parse(format!("bad bit `{s}`"))),
            };
            let z = SampleOutcome {
                x: bit(&rec[0])?,
                basis_a: rec[1].parse()?,
                y: bit(&rec[2])?,
                basis_b: rec[3].parse()?,
            };
            let c: u64 = rec[4].trim().parse().map_err(|_| Error::Parse(format!("bad count `{}`", &rec[4])))?;
            rows.push((z, c));
        }
        let six = rows.iter().any(|(z, _)| z.basis_a == Basis::Y || z.basis_b == Basis::Y);
        let protocol = if six { Protocol::SixState } else { Protocol::Bb84 };
        let alphabet = outcome_alphabet(protocol);
        let mut counts = vec![0u64; alphabet.len()];
        for (z, c) in rows {
            let i = alphabet.iter().position(|a| *a == z).expect("bases belong to the protocol");
            counts[i] += c;
        }
        Self::new(protocol, counts, None)
    }
}

/// I.i.d. draws from [`sample_distribution`] by inverse CDF over the fixed
/// outcome order, using ChaCha8 seeded with `seed`.
pub fn draw_samples(rho: &ChoiOperator, protocol: Protocol, m: u64, seed: u64) -> Result<SampleSet> {
    if m == 0 {
        return domain("at least one sample is required");
    }
    let p = sample_distribution(rho, protocol);
    let mut cdf: Vec<f64> = p
        .probs()
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    *cdf.last_mut().expect("nonempty alphabet") = f64::INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; cdf.len()];
    for _ in 0..m {
        let u: f64 = rng.random();
        let i = cdf.partition_point(|&c| c <= u);
        counts[i] += 1;
    }
    SampleSet::new(protocol, counts, Some(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimationMode {
    /// All twelve Stokes parameters from six-state data.
    FullSixstate,
    /// `ω` from BB84 data.
    Bb84Omega,
    /// `(R_zz, R_xx, R_yy)` from matched-basis parities of six-state data.
    DegradedGamma,
    /// `(R_zz, R_xx)` from matched-basis parities of BB84 data.
    DegradedUpsilon,
}

impl EstimationMode {
    pub fn protocol(self) -> Protocol {
        match self {
            EstimationMode::FullSixstate | EstimationMode::DegradedGamma => Protocol::SixState,
            EstimationMode::Bb84Omega | EstimationMode::DegradedUpsilon => Protocol::Bb84,
        }
    }

    pub fn slice_kind(self) -> SliceKind {
        match self {
            EstimationMode::FullSixstate => SliceKind::Full,
            EstimationMode::Bb84Omega => SliceKind::Bb84Omega,
            EstimationMode::DegradedGamma => SliceKind::SixstateGamma,
            EstimationMode::DegradedUpsilon => SliceKind::Bb84Upsilon,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            EstimationMode::FullSixstate => 12,
            EstimationMode::Bb84Omega => 6,
            EstimationMode::DegradedGamma => 3,
            EstimationMode::DegradedUpsilon => 2,
        }
    }

    /// The parameter vector in [`ParameterSlice::observed`] order.
    pub fn params_of(self, s: &StokesParams) -> Vec<f64> {
        ParameterSlice::of(self.slice_kind(), s).observed()
    }

    pub fn slice(self, theta: &[f64]) -> ParameterSlice {
        match self {
            EstimationMode::FullSixstate => ParameterSlice::Full(full_stokes(theta)),
            EstimationMode::Bb84Omega => {
                ParameterSlice::Omega(Omega::from_array(theta.try_into().expect("six parameters")))
            }
            EstimationMode::DegradedGamma => ParameterSlice::Gamma([theta[0], theta[1], theta[2]]),
            EstimationMode::DegradedUpsilon => ParameterSlice::Upsilon([theta[0], theta[1]]),
        }
    }

    /// Stokes parameters carrying `theta`, zero elsewhere.
    fn stokes(self, theta: &[f64]) -> StokesParams {
        match self.slice(theta) {
            ParameterSlice::Full(s) => s,
            ParameterSlice::Omega(o) => o.completion(0.0),
            ParameterSlice::Gamma(g) => StokesParams::diagonal(g),
            ParameterSlice::Upsilon([a, b]) => StokesParams::diagonal([a, b, 0.0]),
        }
    }

    /// Whether some channel is consistent with `theta`.
    pub fn feasible(self, theta: &[f64]) -> bool {
        if theta.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return false;
        }
        match self {
            EstimationMode::FullSixstate => full_stokes(theta).min_choi_eigenvalue() >= -FEASIBILITY_TOL,
            EstimationMode::Bb84Omega => {
                let o = Omega::from_array(theta.try_into().expect("six parameters"));
                let (_, neg) = golden_min(|r| -o.completion(r).min_choi_eigenvalue(), -1.0, 1.0, 1e-9);
                -neg >= -FEASIBILITY_TOL
            }
            EstimationMode::DegradedGamma => {
                let [ez, ex, ey] = [theta[0], theta[1], theta[2]];
                [1.0 + ez + ex + ey, 1.0 - ez + ex - ey, 1.0 + ez - ex - ey, 1.0 - ez - ex + ey]
                    .iter()
                    .all(|v| *v / 4.0 >= -FEASIBILITY_TOL)
            }
            EstimationMode::DegradedUpsilon => bell_ryy_interval(theta[0], theta[1]).is_some(),
        }
    }
}

impl fmt::Display for EstimationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimationMode::FullSixstate => "full-sixstate",
            EstimationMode::Bb84Omega => "bb84-omega",
            EstimationMode::DegradedGamma => "degraded-gamma",
            EstimationMode::DegradedUpsilon => "degraded-upsilon",
        })
    }
}

impl FromStr for EstimationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-sixstate" | "full" => Ok(EstimationMode::FullSixstate),
            "bb84-omega" | "omega" => Ok(EstimationMode::Bb84Omega),
            "degraded-gamma" | "gamma" => Ok(EstimationMode::DegradedGamma),
            "degraded-upsilon" | "upsilon" => Ok(EstimationMode::DegradedUpsilon),
            _ => Err(Error::Parse(format!("unknown estimation mode `{s}`"))),
        }
    }
}

fn full_stokes(theta: &[f64]) -> StokesParams {
    StokesParams::new(
        [[theta[0], theta[1], theta[2]], [theta[3], theta[4], theta[5]], [theta[6], theta[7], theta[8]]],
        [theta[9], theta[10], theta[11]],
    )
}

fn sign(bit: u8) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `P(x, y | a, b) = ¼(1 + (−1)^y t_b + (−1)^{x+y} R_ba)`.
fn outcome_probability(s: &StokesParams, z: &SampleOutcome) -> f64 {
    let (a, b) = (z.basis_a.index(), z.basis_b.index());
    0.25 * (1.0 + sign(z.y) * s.t[b] + sign(z.x) * sign(z.y) * s.r[b][a])
}

/// Degraded histogram: `(symbol, weight)` in first-occurrence order.
fn degraded_histogram(protocol: Protocol, weights: &[f64]) -> Vec<(DegradedSymbol, f64)> {
    let mut out: Vec<(DegradedSymbol, f64)> = Vec::new();
    for (z, w) in outcome_alphabet(protocol).iter().zip(weights) {
        let d = degrade(z);
        match out.iter_mut().find(|(s, _)| *s == d) {
            Some(e) => e.1 += w,
            None => out.push((d, *w)),
        }
    }
    out
}

/// `Σ_z n(z) log P_θ(z)` under the observation model of `mode`; weights may
/// be real-valued. Natural logarithm.
pub fn log_likelihood(mode: EstimationMode, weights: &[f64], s: &StokesParams) -> f64 {
    let protocol = mode.protocol();
    let nb = protocol.bases().len() as f64;
    let w = 1.0 / (nb * nb);
    let term = |n: f64, p: f64| {
        if n == 0.0 {
            0.0
        } else if p <= 0.0 {
            f64::NEG_INFINITY
        } else {
            n * p.ln()
        }
    };
    match mode {
        EstimationMode::FullSixstate | EstimationMode::Bb84Omega => {
            outcome_alphabet(protocol).iter().zip(weights).map(|(z, &n)| term(n, w * outcome_probability(s, z))).sum()
        }
        EstimationMode::DegradedGamma | EstimationMode::DegradedUpsilon => degraded_histogram(protocol, weights)
            .iter()
            .map(|(d, n)| match d {
                DegradedSymbol::Matched { parity, basis } => {
                    let r = s.r[basis.index()][basis.index()];
                    term(*n, w * 0.5 * (1.0 + sign(*parity) * r))
                }
                DegradedSymbol::Mismatched { .. } => term(*n, w),
            })
            .sum(),
    }
}

/// Empirical frequencies inverted through the linear outcome relations.
pub fn moment_estimate(mode: EstimationMode, weights: &[f64]) -> Vec<f64> {
    let protocol = mode.protocol();
    let mut r = [[0.0; 3]; 3];
    let mut rn = [[0.0; 3]; 3];
    let mut t = [0.0; 3];
    let mut tn = [0.0; 3];
    for (z, &n) in outcome_alphabet(protocol).iter().zip(weights) {
        let (a, b) = (z.basis_a.index(), z.basis_b.index());
        r[b][a] += n * sign(z.x) * sign(z.y);
        rn[b][a] += n;
        t[b] += n * sign(z.y);
        tn[b] += n;
    }
    let ratio = |v: f64, n: f64| if n > 0.0 { (v / n).clamp(-1.0, 1.0) } else { 0.0 };
    let mut s = StokesParams::new([[0.0; 3]; 3], [0.0; 3]);
    for b in 0..3 {
        for a in 0..3 {
            s.r[b][a] = ratio(r[b][a], rn[b][a]);
        }
        s.t[b] = ratio(t[b], tn[b]);
    }
    mode.params_of(&s)
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EstimationReport {
    pub mode: EstimationMode,
    /// Estimated parameters in [`ParameterSlice::observed`] order.
    pub estimate: Vec<f64>,
    pub log_likelihood: f64,
    /// Log-likelihood at the moment-matching initializer.
    pub initial_log_likelihood: f64,
    /// `Ĥ_z(X|E)` in the direct direction; `None` if it could not be evaluated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ambiguity_estimate: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl EstimationReport {
    pub fn slice(&self) -> ParameterSlice {
        self.mode.slice(&self.estimate)
    }
}

/// Step tolerance and iteration cap of the likelihood search.
pub const ML_XTOL: f64 = 1e-8;
pub const ML_MAX_ITER: usize = 5000;

/// Maximum-likelihood estimate over histogram weights (integer counts or
/// expected counts).
pub fn ml_estimate_weights(mode: EstimationMode, weights: &[f64]) -> Result<EstimationReport> {
    let n = outcome_alphabet(mode.protocol()).len();
    if weights.len() != n {
        return Err(Error::Dimension(format!("{mode} needs {n} weights, got {}", weights.len())));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
        return domain("histogram weights must be nonnegative and not all zero");
    }
    // Shrink toward the completely depolarizing channel until feasible.
    let mut x0 = moment_estimate(mode, weights);
    while !mode.feasible(&x0) {
        x0.iter_mut().for_each(|v| *v *= 0.999);
    }
    let nll = |theta: &[f64]| {
        if !mode.feasible(theta) {
            return f64::INFINITY;
        }
        -log_likelihood(mode, weights, &mode.stokes(theta))
    };
    let initial = -nll(&x0);
    let opts = NelderMeadOptions { initial_step: 0.02, xtol: ML_XTOL, max_iter: ML_MAX_ITER };
    let res = nelder_mead(nll, &x0, &opts);
    let mut report = EstimationReport {
        mode,
        estimate: res.x,
        log_likelihood: -res.fx,
        initial_log_likelihood: initial,
        ambiguity_estimate: None,
        converged: res.converged,
        iterations: res.iterations,
    };
    report.ambiguity_estimate = ambiguity_of(&report.slice(), mode.protocol()).ok();
    Ok(report)
}

/// Maximum-likelihood estimate from a sample set.
pub fn ml_estimate(s: &SampleSet, mode: EstimationMode) -> Result<EstimationReport> {
    if s.protocol != mode.protocol() {
        return domain(format!("{mode} estimation needs {} data, got {}", mode.protocol(), s.protocol));
    }
    ml_estimate_weights(mode, &s.weights())
}

fn ambiguity_of(slice: &ParameterSlice, protocol: Protocol) -> Result<f64> {
    let estimation = match slice {
        ParameterSlice::Full(_) | ParameterSlice::Omega(_) => Estimation::Proposed,
        _ => Estimation::Conventional,
    };
    let q = RateQuery::new(ChannelInput::Slice(*slice), protocol).estimation(estimation);
    Ok(rate(&q)?.eve_ambiguity)
}

/// `Ĥ_z(X|E)`: the estimate plugged into Eve's ambiguity, worst case over
/// the candidate set for partial slices.
pub fn estimated_ambiguity(report: &EstimationReport, protocol: Protocol) -> Result<f64> {
    if !report.converged {
        return domain("estimate did not converge");
    }
    ambiguity_of(&report.slice(), protocol)
}

/// Number of probe directions for [`eta_hat`].
pub const ETA_DIRECTIONS: usize = 26;

/// Unit probe directions in `d` dimensions: the signed coordinate axes, then
/// fixed pseudo-random directions, [`ETA_DIRECTIONS`] in total.
fn probe_directions(d: usize) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        for s in [1.0, -1.0] {
            if dirs.len() < ETA_DIRECTIONS {
                let mut v = vec![0.0; d];
                v[i] = s;
                dirs.push(v);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    while dirs.len() < ETA_DIRECTIONS {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            dirs.push(v.iter().map(|x| x / n).collect());
        }
    }
    dirs
}

/// Largest `|g(θ) − g(θ̂)|` over feasible probe points at distance `α`.
fn probe_max<G>(report: &EstimationReport, alpha: f64, g: G) -> Result<f64>
where
    G: Fn(&ParameterSlice) -> Result<Vec<f64>> + Sync,
{
    if !(alpha > 0.0) {
        return domain("α must be positive");
    }
    if !report.converged {
        return domain("estimate did not converge");
    }
    let base = g(&report.slice())?;
    let deltas: Vec<f64> = probe_directions(report.estimate.len())
        .par_iter()
        .filter_map(|u| {
            let theta: Vec<f64> = report.estimate.iter().zip(u).map(|(x, v)| x + alpha * v).collect();
            if !report.mode.feasible(&theta) {
                return None;
            }
            let v = g(&report.mode.slice(&theta)).ok()?;
            Some(v.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect();
    Ok(deltas.into_iter().fold(0.0, f64::max))
}

/// `η̂(α)`: the largest change of `Ĥ` over feasible points at distance `α`
/// from the estimate, probed along the coordinate axes and fixed
/// pseudo-random directions.
pub fn eta_hat(report: &EstimationReport, protocol: Protocol, alpha: f64) -> Result<f64> {
    probe_max(report, alpha, |s| Ok(vec![ambiguity_of(s, protocol)?]))
}

/// `η̂(α)` for the two branch ambiguities of the direct two-way procedure,
/// each taken at the worst-case channel; the larger change of the two.
pub fn eta_hat_two_way(report: &EstimationReport, protocol: Protocol, alpha: f64, f: BlockFunctions) -> Result<f64> {
    probe_max(report, alpha, |s| Ok(two_way_ambiguities_at(s, protocol, f)?.to_vec()))
}

/// Branch ambiguities of the direct two-way procedure at the worst case over the slice.
pub fn two_way_ambiguities_at(slice: &ParameterSlice, protocol: Protocol, f: BlockFunctions) -> Result<[f64; 2]> {
    let r = rate_twoway(&ChannelInput::Slice(*slice), protocol, Direction::Direct, f)?;
    let worst = r.worst_case.ok_or_else(|| Error::Domain("two-way rate has no worst case".into()))?;
    let rho = stokes_to_choi(&worst)?;
    Ok(two_way_ambiguities(&derive_two_way_state(&rho, f), Direction::Direct))
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConsistencyRow {
    pub m: u64,
    pub trials: usize,
    /// Fraction of trials whose estimation error exceeds `α`.
    pub mu: f64,
    pub max_error: f64,
}

/// Seed of trial `t` at sample size index `j`.
pub fn trial_seed(seed: u64, j: usize, t: usize) -> u64 {
    seed.wrapping_add((j as u64) << 32).wrapping_add(t as u64)
}

/// `μ̂(α, m)`: empirical probability that the Euclidean distance between the
/// estimate and the true slice exceeds `α`.
pub fn consistency_report(
    rho: &ChoiOperator,
    mode: EstimationMode,
    alpha: f64,
    m_list: &[u64],
    trials: usize,
    seed: u64,
) -> Result<Vec<ConsistencyRow>> {
    if !(alpha > 0.0) {
        return domain("α must be positive");
    }
    if trials == 0 {
        return domain("at least one trial is required");
    }
    let truth = mode.params_of(&choi_to_stokes(rho));
    m_list
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let errors: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let s = draw_samples(rho, mode.protocol(), m, trial_seed(seed, j, t))?;
                    let r = ml_estimate(&s, mode)?;
                    Ok(r.estimate.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                })
                .collect::<Result<_>>()?;
            let bad = errors.iter().filter(|e| **e > alpha).count();
            Ok(ConsistencyRow {
                m,
                trials,
                mu: bad as f64 / trials as f64,
                max_error: errors.iter().copied().fold(0.0, f64::max),
            })
        })
        .collect()
}

/// Best log-likelihood over Pauli channels for full six-state data.
pub fn pauli_log_likelihood(weights: &[f64]) -> f64 {
    // Pauli channels are fixed by the matched-basis parities.
    let gamma = ml_estimate_weights(EstimationMode::DegradedGamma, weights);
    let start = gamma.map(|r| r.estimate).unwrap_or_else(|_| vec![0.0; 3]);
    let nll = |e: &[f64]| match BellDistribution::from_diagonal([e[0], e[1], e[2]]) {
        Ok(_) => -log_likelihood(EstimationMode::FullSixstate, weights, &StokesParams::diagonal([e[0], e[1], e[2]])),
        Err(_) => f64::INFINITY,
    };
    let opts = NelderMeadOptions { initial_step: 0.02, xtol: ML_XTOL, max_iter: ML_MAX_ITER };
    -nelder_mead(nll, &start, &opts).fx
}
