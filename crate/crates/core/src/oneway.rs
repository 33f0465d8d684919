//! One-way postprocessing key rates for BB84 and the six-state protocol.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    bell_ryy_interval, choi_to_stokes, eve_vectors, Basis, BellDistribution, ChoiOperator, Omega, ParameterSlice,
    Protocol, SliceRegion, StokesParams, FEASIBILITY_TOL,
};
use crate::error::{domain, Error, Result};
use crate::optimize::{golden_min, minimize_scalar, nelder_mead, NelderMeadOptions};
use crate::quantum::{h, shannon, CcqState};

/// Pre-scan points used before golden-section refinement of `R_yy`.
pub const RYY_PRESCAN: usize = 200;
/// Golden-section tolerance on `R_yy`.
pub const RYY_TOL: f64 = 1e-7;
/// Grid step for the noisy-preprocessing flip probability.
pub const Q_STEP: f64 = 1e-3;
/// Coarser `R_yy` pre-scan used inside the flip-probability grid.
const RYY_PRESCAN_INNER: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Direct,
    Reverse,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Direct => "direct",
            Direction::Reverse => "reverse",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" | "forward" => Ok(Direction::Direct),
            "reverse" => Ok(Direction::Reverse),
            _ => Err(Error::Parse(format!("unknown direction `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimation {
    /// Every sample outcome is used.
    Proposed,
    /// Mismatched bases are discarded and only error parities are kept.
    Conventional,
}

impl fmt::Display for Estimation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimation::Proposed => "proposed",
            Estimation::Conventional => "conventional",
        })
    }
}

impl FromStr for Estimation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "proposed" => Ok(Estimation::Proposed),
            "conventional" => Ok(Estimation::Conventional),
            _ => Err(Error::Parse(format!("unknown estimation `{s}`"))),
        }
    }
}

/// The channel a rate is computed for: fully known, or only a parameter slice.
#[derive(Debug, Clone)]
pub enum ChannelInput {
    Choi(ChoiOperator),
    Slice(ParameterSlice),
}

impl ChannelInput {
    fn stokes(&self) -> Option<StokesParams> {
        match self {
            ChannelInput::Choi(c) => Some(choi_to_stokes(c)),
            ChannelInput::Slice(ParameterSlice::Full(s)) => Some(*s),
            _ => None,
        }
    }
}

/// Flip probability applied to the key bit before reconciliation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Preprocessing {
    #[default]
    None,
    Fixed(f64),
    /// Grid search over `[0, 1/2]` with step [`Q_STEP`], then golden refinement.
    Optimize,
}

#[derive(Debug, Clone)]
pub struct RateQuery {
    pub channel: ChannelInput,
    pub protocol: Protocol,
    pub estimation: Estimation,
    pub direction: Direction,
    pub key_basis: Basis,
    pub preprocessing: Preprocessing,
}

impl RateQuery {
    /// Proposed estimation, direct reconciliation, z key basis, no added noise.
    pub fn new(channel: ChannelInput, protocol: Protocol) -> Self {
        Self {
            channel,
            protocol,
            estimation: Estimation::Proposed,
            direction: Direction::Direct,
            key_basis: Basis::Z,
            preprocessing: Preprocessing::None,
        }
    }

    pub fn choi(rho: &ChoiOperator, protocol: Protocol) -> Self {
        Self::new(ChannelInput::Choi(rho.clone()), protocol)
    }

    pub fn estimation(mut self, e: Estimation) -> Self {
        self.estimation = e;
        self
    }

    pub fn direction(mut self, d: Direction) -> Self {
        self.direction = d;
        self
    }

    pub fn key_basis(mut self, b: Basis) -> Self {
        self.key_basis = b;
        self
    }

    pub fn preprocessing(mut self, p: Preprocessing) -> Self {
        self.preprocessing = p;
        self
    }

    fn check(&self) -> Result<()> {
        if self.key_basis == Basis::Y && self.protocol == Protocol::Bb84 {
            return domain("the y key basis needs the six-state protocol");
        }
        if let Preprocessing::Fixed(q) = self.preprocessing {
            if !(0.0..=0.5).contains(&q) {
                return domain(format!("flip probability {q} outside [0, 1/2]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RateResult {
    /// `max(0, raw)`.
    pub rate: f64,
    pub raw: f64,
    pub eve_ambiguity: f64,
    pub reconciliation_cost: f64,
    /// The candidate channel attaining the inner minimum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_case: Option<StokesParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimal_q: Option<f64>,
    /// Numeric worst case minus the unital closed form, for BB84 with `t = 0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unital_gap: Option<f64>,
}

impl RateResult {
    fn new(eve_ambiguity: f64, reconciliation_cost: f64) -> Self {
        let raw = eve_ambiguity - reconciliation_cost;
        Self {
            rate: raw.max(0.0),
            raw,
            eve_ambiguity,
            reconciliation_cost,
            worst_case: None,
            optimal_q: None,
            unital_gap: None,
        }
    }
}

/// `ρ_{XYE}` after both parties measure `basis` on a purification of `rho`.
pub fn key_state(rho: &ChoiOperator, basis: Basis) -> CcqState {
    let (vecs, r) = eve_vectors(rho, basis, basis);
    let mut s = CcqState::new(&[("X", 2), ("Y", 2)], r);
    for x in 0..2 {
        for y in 0..2 {
            let v = &vecs[2 * x + y];
            s.add_weighted(&[x, y], v * v.adjoint()).expect("register shapes match");
        }
    }
    s
}

fn key_names(direction: Direction) -> (&'static str, &'static str) {
    match direction {
        Direction::Direct => ("X", "Y"),
        Direction::Reverse => ("Y", "X"),
    }
}

/// `(H(K|E), H(K|O))` for key register `K` after a flip with probability `q`.
fn terms(rho: &ChoiOperator, direction: Direction, basis: Basis, q: f64) -> (f64, f64) {
    let (key, other) = key_names(direction);
    let mut s = key_state(rho, basis);
    if q > 0.0 {
        s = s.bit_flip(key, q).expect("binary key register");
    }
    let amb = s.conditional_entropy(&[key], &[], true).expect("registers exist");
    let cost = s.conditional_entropy(&[key], &[other], false).expect("registers exist");
    (amb, cost)
}

/// `H(X|E)` for the direct direction, `H(Y|E)` for the reverse one.
pub fn eve_ambiguity(rho: &ChoiOperator, direction: Direction, basis: Basis) -> f64 {
    terms(rho, direction, basis, 0.0).0
}

/// `H(X|Y)` for the direct direction, `H(Y|X)` for the reverse one.
pub fn reconciliation_cost(rho: &ChoiOperator, direction: Direction, basis: Basis) -> f64 {
    terms(rho, direction, basis, 0.0).1
}

/// Maximizes `f` over `q ∈ [0, 1/2]`: grid of step [`Q_STEP`], then golden refinement.
fn maximize_q<F: Fn(f64) -> f64 + Sync>(f: F) -> f64 {
    let n = (0.5 / Q_STEP).round() as usize;
    let vals: Vec<f64> = (0..=n).into_par_iter().map(|i| f(i as f64 * Q_STEP)).collect();
    let best = (0..=n).max_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(b.cmp(&a))).unwrap();
    let lo = best.saturating_sub(1) as f64 * Q_STEP;
    let hi = ((best + 1).min(n)) as f64 * Q_STEP;
    let (q, neg) = golden_min(|q| -f(q), lo, hi, 1e-9);
    if -neg > vals[best] {
        q
    } else {
        best as f64 * Q_STEP
    }
}

/// Dispatches on protocol and estimation.
pub fn rate(query: &RateQuery) -> Result<RateResult> {
    match (query.estimation, query.protocol) {
        (Estimation::Conventional, _) => rate_conventional(query),
        (Estimation::Proposed, Protocol::SixState) => rate_sixstate(query),
        (Estimation::Proposed, Protocol::Bb84) => rate_bb84(query),
    }
}

/// Six-state rate with proposed estimation: the channel is known exactly.
pub fn rate_sixstate(query: &RateQuery) -> Result<RateResult> {
    query.check()?;
    let s = query.channel.stokes().ok_or_else(|| Error::Domain("six-state rates need the full channel".into()))?;
    let rho = crate::channel::stokes_to_choi(&s)?;
    let (d, b) = (query.direction, query.key_basis);
    let q = match query.preprocessing {
        Preprocessing::None => 0.0,
        Preprocessing::Fixed(q) => q,
        Preprocessing::Optimize => maximize_q(|q| {
            let (a, c) = terms(&rho, d, b, q);
            a - c
        }),
    };
    let (amb, cost) = terms(&rho, d, b, q);
    let mut out = RateResult::new(amb, cost);
    out.worst_case = Some(s);
    if query.preprocessing != Preprocessing::None {
        out.optimal_q = Some(q);
    }
    Ok(out)
}

fn omega_of(input: &ChannelInput) -> Result<Omega> {
    match input {
        ChannelInput::Slice(ParameterSlice::Omega(o)) => Ok(*o),
        other => other
            .stokes()
            .map(|s| Omega::from_stokes(&s))
            .ok_or_else(|| Error::Domain("BB84 proposed rates need an ω slice or the full channel".into())),
    }
}

/// Worst case of `H(K|E)` over the `R_yy` interval: `(value, argmin)`.
fn bb84_worst(omega: &Omega, lo: f64, hi: f64, d: Direction, b: Basis, q: f64, prescan: usize) -> (f64, f64) {
    let f = |r: f64| terms(&ChoiOperator::from_stokes_unchecked(&omega.completion(r)), d, b, q).0;
    let (r, v) = minimize_scalar(f, lo, hi, prescan, RYY_TOL);
    (v, r)
}

/// Closed-form worst-case ambiguity over the ω candidate set when `t = 0`.
pub fn unital_bb84_bound(omega: &Omega, direction: Direction, basis: Basis) -> Result<f64> {
    let m = nalgebra::Matrix2::new(omega.r_zz, omega.r_zx, omega.r_xz, omega.r_xx);
    let sv = m.singular_values();
    let k = match basis {
        Basis::Z => 0,
        Basis::X => 1,
        Basis::Y => return domain("the BB84 bound is defined for the z and x key bases"),
    };
    let norm = match direction {
        Direction::Direct => (m[(0, k)].powi(2) + m[(1, k)].powi(2)).sqrt(),
        Direction::Reverse => (m[(k, 0)].powi(2) + m[(k, 1)].powi(2)).sqrt(),
    };
    Ok(1.0 - h((1.0 + sv[0]) / 2.0) - h((1.0 + sv[1]) / 2.0) + h((1.0 + norm.min(1.0)) / 2.0))
}

/// BB84 rate with proposed estimation: worst case over the `R_yy` interval.
pub fn rate_bb84(query: &RateQuery) -> Result<RateResult> {
    query.check()?;
    let omega = omega_of(&query.channel)?;
    let (lo, hi) = omega.ryy_interval()?;
    let (d, b) = (query.direction, query.key_basis);
    // The reconciliation cost depends only on ω.
    let cost_at = |q: f64| terms(&ChoiOperator::from_stokes_unchecked(&omega.completion(lo)), d, b, q).1;
    let q = match query.preprocessing {
        Preprocessing::None => 0.0,
        Preprocessing::Fixed(q) => q,
        Preprocessing::Optimize => {
            maximize_q(|q| bb84_worst(&omega, lo, hi, d, b, q, RYY_PRESCAN_INNER).0 - cost_at(q))
        }
    };
    let (amb, r_yy) = bb84_worst(&omega, lo, hi, d, b, q, RYY_PRESCAN);
    let mut out = RateResult::new(amb, cost_at(q));
    out.worst_case = Some(omega.completion(r_yy));
    if query.preprocessing != Preprocessing::None {
        out.optimal_q = Some(q);
    }
    if q == 0.0 && omega.t_z.abs() < 1e-12 && omega.t_x.abs() < 1e-12 {
        out.unital_gap = Some(amb - unital_bb84_bound(&omega, d, b)?);
    }
    Ok(out)
}

/// Bell weights for diagonal `(e_z, e_x, e_y)`, allowing the feasibility slack.
fn bell_weights(e: [f64; 3]) -> Result<[f64; 4]> {
    let [ez, ex, ey] = e;
    let p = [
        (1.0 + ez + ex + ey) / 4.0,
        (1.0 - ez + ex - ey) / 4.0,
        (1.0 + ez - ex - ey) / 4.0,
        (1.0 - ez - ex + ey) / 4.0,
    ];
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -FEASIBILITY_TOL {
        return Err(Error::EmptyCandidateSet { best_eigenvalue: min });
    }
    Ok(p.map(|v| v.max(0.0)))
}

fn bell_choi(e: [f64; 3]) -> Result<ChoiOperator> {
    let p = bell_weights(e)?;
    let s: f64 = p.iter().sum();
    let b = BellDistribution::new(p[0] / s, p[1] / s, p[2] / s, p[3] / s)?;
    Ok(ChoiOperator::from_stokes_unchecked(&b.to_stokes()))
}

fn gamma_of(input: &ChannelInput) -> Result<[f64; 3]> {
    match input {
        ChannelInput::Slice(ParameterSlice::Gamma(g)) => Ok(*g),
        other => other
            .stokes()
            .map(|s| [s.r[0][0], s.r[1][1], s.r[2][2]])
            .ok_or_else(|| Error::Domain("six-state conventional rates need a γ slice or the full channel".into())),
    }
}

fn upsilon_of(input: &ChannelInput) -> Result<[f64; 2]> {
    match input {
        ChannelInput::Slice(ParameterSlice::Upsilon(u)) => Ok(*u),
        ChannelInput::Slice(ParameterSlice::Omega(o)) => Ok([o.r_zz, o.r_xx]),
        other => other
            .stokes()
            .map(|s| [s.r[0][0], s.r[1][1]])
            .ok_or_else(|| Error::Domain("BB84 conventional rates need a υ slice or the full channel".into())),
    }
}

/// Conventional-estimation rate. Without added noise this is the closed form;
/// with noise the worst case is searched over Bell-diagonal completions.
pub fn rate_conventional(query: &RateQuery) -> Result<RateResult> {
    query.check()?;
    let (d, b) = (query.direction, query.key_basis);
    match query.protocol {
        Protocol::SixState => {
            let g = gamma_of(&query.channel)?;
            let rho = bell_choi(g)?;
            let worst = BellDistribution::from_diagonal(g).map(|p| p.to_stokes()).unwrap_or(StokesParams::diagonal(g));
            if query.preprocessing == Preprocessing::None {
                let cost = h((1.0 + g[b.index()]) / 2.0);
                let rate = 1.0 - shannon(&bell_weights(g)?);
                let mut out = RateResult::new(rate + cost, cost);
                out.worst_case = Some(worst);
                return Ok(out);
            }
            let q = match query.preprocessing {
                Preprocessing::Fixed(q) => q,
                _ => maximize_q(|q| {
                    let (a, c) = terms(&rho, d, b, q);
                    a - c
                }),
            };
            let (amb, cost) = terms(&rho, d, b, q);
            let mut out = RateResult::new(amb, cost);
            out.worst_case = Some(worst);
            out.optimal_q = Some(q);
            Ok(out)
        }
        Protocol::Bb84 => {
            let [zz, xx] = upsilon_of(&query.channel)?;
            let (lo, hi) = bell_ryy_interval(zz, xx).ok_or(Error::EmptyCandidateSet { best_eigenvalue: f64::NAN })?;
            let (rk, ro) = if b == Basis::Z { (zz, xx) } else { (xx, zz) };
            if query.preprocessing == Preprocessing::None {
                let cost = h((1.0 + rk) / 2.0);
                let amb = 1.0 - h((1.0 + ro) / 2.0);
                let mut out = RateResult::new(amb, cost);
                out.worst_case = Some(StokesParams::diagonal([zz, xx, (zz * xx).clamp(lo, hi)]));
                return Ok(out);
            }
            let worst = |q: f64, prescan: usize| -> (f64, f64, f64) {
                let f = |r: f64| {
                    let (a, c) =
                        terms(&ChoiOperator::from_stokes_unchecked(&StokesParams::diagonal([zz, xx, r])), d, b, q);
                    a - c
                };
                let (r, _) = minimize_scalar(f, lo, hi, prescan, RYY_TOL);
                let (a, c) = terms(&ChoiOperator::from_stokes_unchecked(&StokesParams::diagonal([zz, xx, r])), d, b, q);
                (a, c, r)
            };
            let q = match query.preprocessing {
                Preprocessing::Fixed(q) => q,
                _ => maximize_q(|q| {
                    let (a, c, _) = worst(q, RYY_PRESCAN_INNER);
                    a - c
                }),
            };
            let (amb, cost, r) = worst(q, RYY_PRESCAN);
            let mut out = RateResult::new(amb, cost);
            out.worst_case = Some(StokesParams::diagonal([zz, xx, r]));
            out.optimal_q = Some(q);
            Ok(out)
        }
    }
}

/// Settings for [`conventional_numeric`].
#[derive(Debug, Clone)]
pub struct NumericOptions {
    /// Random feasible starting points.
    pub starts: usize,
    /// Restarts of the simplex search from the incumbent.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for NumericOptions {
    fn default() -> Self {
        Self { starts: 4, restarts: 3, seed: 0 }
    }
}

/// Conventional rate by direct minimization of `H(K|E) − H(K|O)` over the
/// free coordinates of a γ or υ slice, without using the closed form.
pub fn conventional_numeric(
    slice: &ParameterSlice,
    direction: Direction,
    basis: Basis,
    opts: &NumericOptions,
) -> Result<RateResult> {
    let region = SliceRegion::new(*slice)?;
    if matches!(slice, ParameterSlice::Upsilon(_)) && basis == Basis::Y {
        return domain("the y key basis needs the six-state protocol");
    }
    crate::channel::candidate_set_bounds(slice)?;
    let objective = |v: &[f64]| -> f64 {
        let s = region.complete(v);
        if s.min_choi_eigenvalue() < 0.0 {
            return f64::INFINITY;
        }
        let (a, c) = terms(&ChoiOperator::from_stokes_unchecked(&s), direction, basis, 0.0);
        a - c
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let nm = NelderMeadOptions { initial_step: 0.05, xtol: 1e-9, max_iter: 20000 };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..opts.starts.max(1) {
        let mut x = region.sample(&mut rng);
        let mut fx = objective(&x);
        for k in 0..=opts.restarts {
            let step = 0.05 / (1 << k.min(4)) as f64;
            let r = nelder_mead(objective, &x, &NelderMeadOptions { initial_step: step, ..nm.clone() });
            if r.fx <= fx {
                x = r.x;
                fx = r.fx;
            }
        }
        if best.as_ref().is_none_or(|(_, b)| fx < *b) {
            best = Some((x, fx));
        }
    }
    let (x, _) = best.expect("at least one start");
    let s = region.complete(&x);
    let (a, c) = terms(&ChoiOperator::from_stokes_unchecked(&s), direction, basis, 0.0);
    let mut out = RateResult::new(a, c);
    out.worst_case = Some(s);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Improvement {
    Equal,
    Strict,
}

/// Proposed vs conventional BB84 rates (direct reconciliation) in both key bases.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ImprovementReport {
    pub class: Improvement,
    /// The class expected from `t` and the off-diagonal ω entries.
    pub predicted: Improvement,
    /// Raw-rate gains `(z, x)` of proposed over conventional estimation.
    pub delta: [f64; 2],
    pub proposed: [f64; 2],
    pub conventional: [f64; 2],
}

/// Threshold on the rate gain separating "equal" from "strict".
pub const IMPROVEMENT_THRESHOLD: f64 = 1e-8;

pub fn strict_improvement_check(slice: &ParameterSlice) -> Result<ImprovementReport> {
    let omega = match slice {
        ParameterSlice::Omega(o) => *o,
        ParameterSlice::Full(s) => Omega::from_stokes(s),
        _ => return domain("strict-improvement check needs an ω slice"),
    };
    if omega.r_zz.abs() < 1e-12 || omega.r_xx.abs() < 1e-12 {
        return domain("degenerate slice: R_zz and R_xx must be nonzero");
    }
    let input = ChannelInput::Slice(ParameterSlice::Omega(omega));
    let mut proposed = [0.0; 2];
    let mut conventional = [0.0; 2];
    for (i, b) in [Basis::Z, Basis::X].into_iter().enumerate() {
        let q = RateQuery::new(input.clone(), Protocol::Bb84).key_basis(b);
        proposed[i] = rate_bb84(&q)?.raw;
        conventional[i] = rate_conventional(&q.estimation(Estimation::Conventional))?.raw;
    }
    let delta = [proposed[0] - conventional[0], proposed[1] - conventional[1]];
    let class = if delta.iter().any(|&d| d > IMPROVEMENT_THRESHOLD) { Improvement::Strict } else { Improvement::Equal };
    let off = [omega.t_z, omega.t_x, omega.r_zx, omega.r_xz];
    let predicted = if off.iter().any(|v| *v != 0.0) { Improvement::Strict } else { Improvement::Equal };
    Ok(ImprovementReport { class, predicted, delta, proposed, conventional })
}
