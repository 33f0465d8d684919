//! Subcommand bodies.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use qkd_ratelab::oneway::{key_state, rate as oneway_rate, ChannelInput, Direction, Preprocessing, RateQuery};
use qkd_ratelab::postprocessing::{
    finite_key_length, one_way_ir_error, secrecy_audit, toeplitz_collision_max, two_way_ir_success, two_way_thresholds,
    z_basis_pairs, AuditState, FiniteKeyParams, KeyMode,
};
use qkd_ratelab::tomography::{
    draw_samples, estimated_ambiguity, eta_hat, eta_hat_two_way, ml_estimate, two_way_ambiguities_at, EstimationMode,
    SampleSet,
};
use qkd_ratelab::twoway::{optimize_block_functions, rate_twoway, BlockFunctions};
use qkd_ratelab::{make_channel, stokes_to_choi, ChannelSpec, ChoiOperator, Error, Protocol, StokesParams};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::curves::{self, Curve, Family, Functions};
use crate::{AuditCommand, EstimateArgs, FigureArgs, RateArgs, SimulateArgs, SweepArgs};

/// Inline spec, `@file.json` (tagged spec) or `raw:@file.json` (`R` and `t`).
pub fn parse_channel(arg: &str) -> Result<ChannelSpec> {
    let path = arg.strip_prefix("raw:@").or_else(|| arg.strip_prefix('@'));
    let Some(path) = path else {
        return Ok(arg.parse()?);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading channel file `{path}`"))?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{path}: {e}")))?;
    if arg.starts_with("raw:") {
        if let Value::Object(m) = &mut v {
            m.entry("kind").or_insert_with(|| json!("raw"));
        }
    }
    Ok(ChannelSpec::from_json(&v.to_string())?)
}

fn channel_choi(arg: &str) -> Result<ChoiOperator> {
    Ok(stokes_to_choi(&make_channel(&parse_channel(arg)?)?)?)
}

fn stokes_json(s: &StokesParams) -> Value {
    json!({ "R": s.r, "t": s.t })
}

fn print_json(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string(v)?);
    Ok(())
}

fn output_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating `{}`", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn parse_preprocessing(s: &str) -> Result<Preprocessing> {
    Ok(match s {
        "none" => Preprocessing::None,
        "optimize" => Preprocessing::Optimize,
        q => Preprocessing::Fixed(q.parse().map_err(|_| Error::Parse(format!("bad preprocessing `{q}`")))?),
    })
}

pub fn rate(a: RateArgs) -> Result<()> {
    let input = ChannelInput::Choi(channel_choi(&a.channel)?);
    if a.twoway {
        let (r, ties) = match a.functions {
            Functions::Fixed(f) => (rate_twoway(&input, a.protocol, a.direction, f)?, None),
            Functions::Optimize => {
                let s = optimize_block_functions(&input, a.protocol, a.direction)?;
                (s.result, Some(s.ties.iter().map(ToString::to_string).collect::<Vec<_>>()))
            }
        };
        let mut v = json!({
            "rate": r.rate,
            "raw": r.raw,
            "branches": r.branches,
            "functions": r.functions.to_string(),
        });
        if let Some(w) = &r.worst_case {
            v["worstCase"] = stokes_json(w);
        }
        if let Some(t) = ties {
            v["ties"] = json!(t);
        }
        return print_json(&v);
    }
    let q = RateQuery::new(input, a.protocol)
        .estimation(a.estimation)
        .direction(a.direction)
        .key_basis(a.basis)
        .preprocessing(parse_preprocessing(&a.preprocessing)?);
    let r = oneway_rate(&q)?;
    let mut v = json!({
        "rate": r.rate,
        "raw": r.raw,
        "eveAmbiguity": r.eve_ambiguity,
        "cost": r.reconciliation_cost,
    });
    if let Some(w) = &r.worst_case {
        v["worstCase"] = stokes_json(w);
    }
    if let Some(q) = r.optimal_q {
        v["optimalQ"] = json!(q);
    }
    if let Some(g) = r.unital_gap {
        v["unitalGap"] = json!(g);
    }
    print_json(&v)
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let family = Family::new(&a.channel)?;
    let grid = curves::grid(a.start, a.stop, a.steps)?;
    let named: Vec<(String, Curve)> = a.curves.iter().map(|c| Ok((c.clone(), c.parse()?))).collect::<Result<_>>()?;
    let rows = curves::sweep(&family, &grid, &named)?;
    let names: Vec<&str> = a.curves.iter().map(String::as_str).collect();
    curves::write_csv(output_writer(a.output.as_deref())?, &grid, &names, &rows)
}

pub fn figure(a: FigureArgs) -> Result<()> {
    let fig = curves::figure(&a.name)?;
    let family = Family::new(fig.family)?;
    let grid = curves::grid(fig.start, fig.stop, a.points)?;
    let named: Vec<(String, Curve)> =
        fig.curves.iter().map(|(n, c)| Ok((n.to_string(), c.parse()?))).collect::<Result<_>>()?;
    let rows = curves::sweep(&family, &grid, &named)?;
    let names: Vec<&str> = fig.curves.iter().map(|(n, _)| *n).collect();
    curves::write_csv(output_writer(a.output.as_deref())?, &grid, &names, &rows)
}

fn default_mode(p: Protocol) -> EstimationMode {
    match p {
        Protocol::SixState => EstimationMode::FullSixstate,
        Protocol::Bb84 => EstimationMode::Bb84Omega,
    }
}

pub fn estimate(a: EstimateArgs) -> Result<()> {
    let samples = match (&a.samples, &a.channel) {
        (Some(path), _) => {
            let f = File::open(path).with_context(|| format!("opening `{}`", path.display()))?;
            SampleSet::read_csv(f)?
        }
        (None, Some(ch)) => draw_samples(&channel_choi(ch)?, a.protocol, a.m, a.seed)?,
        (None, None) => bail!("either --samples or --channel is required"),
    };
    if let Some(path) = &a.write_samples {
        samples.write_csv(BufWriter::new(File::create(path)?))?;
    }
    let mode = a.mode.unwrap_or(default_mode(samples.protocol));
    let report = ml_estimate(&samples, mode)?;
    let protocol = mode.protocol();
    let mut v = json!({ "report": report });
    v["estimatedAmbiguity"] = json!(estimated_ambiguity(&report, protocol)?);
    v["alpha"] = json!(a.alpha);
    v["etaHat"] = json!(eta_hat(&report, protocol, a.alpha)?);
    print_json(&v)
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let rho = channel_choi(&a.channel)?;
    let samples = draw_samples(&rho, a.protocol, a.m, a.seed)?;
    let report = ml_estimate(&samples, default_mode(a.protocol))?;
    let slice = report.slice();
    let params = |eta: f64| FiniteKeyParams { n: a.n, m: a.m, eps: a.eps, delta: a.delta, alpha: a.alpha, eta };
    let syndrome = |rate: f64, n: u64| (n as f64 * (rate + a.ir_margin)).ceil() as u64;
    let mut v = json!({
        "protocol": a.protocol.to_string(),
        "m": a.m,
        "n": a.n,
        "estimate": report,
    });
    if a.twoway {
        let f: BlockFunctions = a.functions.parse()?;
        let tw = rate_twoway(&ChannelInput::Slice(slice), a.protocol, Direction::Direct, f)?;
        let worst = tw.worst_case.ok_or_else(|| Error::Domain("two-way rate has no worst case".into()))?;
        let thresholds = two_way_thresholds(&stokes_to_choi(&worst)?, f);
        let h = two_way_ambiguities_at(&slice, a.protocol, f)?;
        let eta = eta_hat_two_way(&report, a.protocol, a.alpha, f)?;
        let k = thresholds.map(|t| syndrome(t, a.n));
        let fk = finite_key_length(&params(eta), &KeyMode::TwoWay { h, k1: k[0], ka2: k[1], kb2: k[2] })?;
        v["functions"] = json!(f.to_string());
        v["asymptoticRate"] = json!(tw.rate);
        v["ambiguities"] = json!(h);
        v["thresholds"] = json!(thresholds);
        v["etaHat"] = json!(eta);
        v["syndromeLengths"] = json!(k);
        v["finiteKey"] = json!(fk);
        if a.ir_trials > 0 {
            let kb = thresholds.map(|t| syndrome(t, a.ir_block as u64).min(a.ir_block as u64) as usize);
            let success = two_way_ir_success(&rho, f, a.ir_block, kb, a.ir_trials, a.seed)?;
            v["irCheck"] =
                json!({ "blocks": a.ir_block, "syndromeLengths": kb, "trials": a.ir_trials, "success": success });
        }
    } else {
        let r = oneway_rate(&RateQuery::new(ChannelInput::Slice(slice), a.protocol))?;
        let eta = eta_hat(&report, a.protocol, a.alpha)?;
        let k = syndrome(r.reconciliation_cost, a.n);
        let fk = finite_key_length(&params(eta), &KeyMode::OneWay { h: r.eve_ambiguity, k })?;
        v["asymptoticRate"] = json!(r.rate);
        v["eveAmbiguity"] = json!(r.eve_ambiguity);
        v["cost"] = json!(r.reconciliation_cost);
        v["etaHat"] = json!(eta);
        v["syndromeLength"] = json!(k);
        v["finiteKey"] = json!(fk);
        if a.ir_trials > 0 {
            let kb = syndrome(r.reconciliation_cost, a.ir_block as u64).min(a.ir_block as u64) as usize;
            let error = one_way_ir_error(&z_basis_pairs(&rho), a.ir_block, kb, a.ir_trials, a.seed)?;
            v["irCheck"] = json!({ "n": a.ir_block, "k": kb, "trials": a.ir_trials, "error": error });
        }
    }
    print_json(&v)
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ClassicalStateDoc {
    n: usize,
    e_size: usize,
    p: Vec<f64>,
}

/// `copies` independent copies of the key register of `rho` against Eve's purification.
fn quantum_key_state(rho: &ChoiOperator, basis: qkd_ratelab::Basis, copies: usize) -> Result<AuditState> {
    let single = AuditState::from_ccq(&key_state(rho, basis).marginal(&["X"])?, &["X"])?;
    let AuditState::Quantum { ops, .. } = single else {
        bail!("key state has no quantum side information");
    };
    if copies == 0 {
        bail!(Error::Domain("at least one copy is required".into()));
    }
    let d = ops[0].nrows();
    let dim = u32::try_from(copies).ok().and_then(|c| d.checked_pow(c)).unwrap_or(usize::MAX);
    if copies > 5 || (1usize << copies).saturating_mul(dim) > qkd_ratelab::postprocessing::AUDIT_MAX_QUANTUM_DIM {
        bail!(Error::BudgetExceeded(format!("quantum audit of {copies} copies with dim E={d}")));
    }
    let mut out = ops.clone();
    for _ in 1..copies {
        out = out.iter().flat_map(|a| ops.iter().map(move |b| a.kronecker(b))).collect();
    }
    Ok(AuditState::Quantum { n: copies, ops: out })
}

pub fn audit(cmd: AuditCommand) -> Result<()> {
    let v = match cmd {
        AuditCommand::Toeplitz { n, l } => {
            let c = toeplitz_collision_max(n, l)?;
            let bound = 2f64.powi(-(l as i32));
            json!({ "n": n, "l": l, "collisionMax": c, "bound": bound, "holds": c <= bound + 1e-12 })
        }
        AuditCommand::Secrecy { channel, copies, basis, state, l } => {
            let st = match (channel, state) {
                (Some(ch), _) => quantum_key_state(&channel_choi(&ch)?, basis, copies)?,
                (None, Some(path)) => {
                    let text =
                        std::fs::read_to_string(&path).with_context(|| format!("reading `{}`", path.display()))?;
                    let d: ClassicalStateDoc =
                        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                    AuditState::Classical { n: d.n, e_size: d.e_size, p: d.p }
                }
                (None, None) => bail!("either --channel or --state is required"),
            };
            let r = secrecy_audit(&st, l)?;
            let mut v = json!(r);
            v["holds"] = json!(r.holds());
            v
        }
        AuditCommand::Ir { n, k, q, trials, seed } => {
            if !(0.0..=0.5).contains(&q) {
                bail!(Error::Domain(format!("crossover probability {q} outside [0, 1/2]")));
            }
            let p = [(1.0 - q) / 2.0, q / 2.0, q / 2.0, (1.0 - q) / 2.0];
            json!({ "n": n, "k": k, "q": q, "trials": trials, "error": one_way_ir_error(&p, n, k, trials, seed)? })
        }
        AuditCommand::IrTwoWay { channel, functions, n, k, trials, seed } => {
            let f: BlockFunctions = functions.parse()?;
            let Ok(k) = <[usize; 3]>::try_from(k) else {
                bail!(Error::Parse("--k takes three syndrome lengths k1,kA2,kB2".into()));
            };
            let s = two_way_ir_success(&channel_choi(&channel)?, f, n, k, trials, seed)?;
            json!({ "blocks": n, "k": k, "functions": f.to_string(), "trials": trials, "success": s })
        }
    };
    print_json(&v)
}
