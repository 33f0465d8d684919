use std::f64::consts::PI;
use std::str::FromStr;

use serde::Deserialize;
use serde_json::Value;

use super::bell::BellDistribution;
use super::stokes::{stokes_to_choi, StokesParams};
use crate::error::{domain, Error, Result};

/// A channel from the built-in families.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    Identity,
    Pauli(BellDistribution),
    Depolarizing {
        e: f64,
    },
    AmplitudeDamping {
        p: f64,
    },
    /// Rotation by `theta` in the z-x plane.
    Rotation {
        theta: f64,
    },
    RotatedDepolarizing {
        e: f64,
        angle: f64,
    },
    Unital {
        r: [[f64; 3]; 3],
    },
    Raw {
        r: [[f64; 3]; 3],
        t: [f64; 3],
    },
}

fn rotation_matrix(theta: f64) -> [[f64; 3]; 3] {
    let (s, c) = theta.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn check_unit(name: &str, v: f64, hi: f64) -> Result<()> {
    if !(0.0..=hi).contains(&v) {
        return domain(format!("{name} = {v} outside [0, {hi}]"));
    }
    Ok(())
}

/// Stokes parameters of a channel spec; fails when the result is not a channel.
pub fn make_channel(spec: &ChannelSpec) -> Result<StokesParams> {
    let s = match *spec {
        ChannelSpec::Identity => StokesParams::identity(),
        ChannelSpec::Pauli(b) => {
            b.validate()?;
            b.to_stokes()
        }
        ChannelSpec::Depolarizing { e } => {
            check_unit("e", e, 2.0 / 3.0)?;
            StokesParams::diagonal([1.0 - 2.0 * e; 3])
        }
        ChannelSpec::AmplitudeDamping { p } => {
            check_unit("p", p, 1.0)?;
            let q = (1.0 - p).sqrt();
            StokesParams::new([[1.0 - p, 0.0, 0.0], [0.0, q, 0.0], [0.0, 0.0, q]], [p, 0.0, 0.0])
        }
        ChannelSpec::Rotation { theta } => {
            if !theta.is_finite() {
                return domain("rotation angle must be finite");
            }
            StokesParams::new(rotation_matrix(theta), [0.0; 3])
        }
        ChannelSpec::RotatedDepolarizing { e, angle } => {
            check_unit("e", e, 2.0 / 3.0)?;
            if !angle.is_finite() {
                return domain("rotation angle must be finite");
            }
            let rot = rotation_matrix(angle);
            let mut r = [[0.0; 3]; 3];
            for (i, row) in rot.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    r[i][j] = (1.0 - 2.0 * e) * v;
                }
            }
            StokesParams::new(r, [0.0; 3])
        }
        ChannelSpec::Unital { r } => StokesParams::new(r, [0.0; 3]),
        ChannelSpec::Raw { r, t } => StokesParams::new(r, t),
    };
    stokes_to_choi(&s)?;
    Ok(s)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EParams {
    e: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PParams {
    p: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaParams {
    theta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RotDepParams {
    e: f64,
    angle: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitalParams {
    #[serde(rename = "R")]
    r: [[f64; 3]; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmptyParams {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    #[allow(dead_code)]
    kind: String,
    #[serde(rename = "R")]
    r: [[f64; 3]; 3],
    t: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaggedDoc {
    kind: String,
    #[serde(default)]
    params: Option<Value>,
}

fn params<T: for<'de> Deserialize<'de>>(kind: &str, v: Option<Value>) -> Result<T> {
    let v = v.ok_or_else(|| Error::Parse(format!("channel kind `{kind}` needs params")))?;
    serde_json::from_value(v).map_err(|e| Error::Parse(format!("{kind} params: {e}")))
}

impl ChannelSpec {
    /// Parses `{"kind": ..., "params": {...}}` or `{"kind": "raw", "R": ..., "t": ...}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let kind = v
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Parse("missing string field `kind`".into()))?
            .to_string();
        if kind == "raw" {
            let raw: RawDoc = serde_json::from_value(v).map_err(|e| Error::Parse(format!("raw channel: {e}")))?;
            return Ok(ChannelSpec::Raw { r: raw.r, t: raw.t });
        }
        let doc: TaggedDoc = serde_json::from_value(v).map_err(|e| Error::Parse(e.to_string()))?;
        let p = doc.params;
        Ok(match doc.kind.as_str() {
            "identity" => {
                if let Some(v) = p {
                    let _: EmptyParams = serde_json::from_value(v).map_err(|e| Error::Parse(e.to_string()))?;
                }
                ChannelSpec::Identity
            }
            "pauli" => ChannelSpec::Pauli(params(&kind, p)?),
            "depolarizing" => ChannelSpec::Depolarizing { e: params::<EParams>(&kind, p)?.e },
            "amplitude_damping" => ChannelSpec::AmplitudeDamping { p: params::<PParams>(&kind, p)?.p },
            "rotation" => ChannelSpec::Rotation { theta: params::<ThetaParams>(&kind, p)?.theta },
            "rotated_depolarizing" => {
                let rp: RotDepParams = params(&kind, p)?;
                ChannelSpec::RotatedDepolarizing { e: rp.e, angle: rp.angle }
            }
            "unital" => ChannelSpec::Unital { r: params::<UnitalParams>(&kind, p)?.r },
            other => return Err(Error::Parse(format!("unknown channel kind `{other}`"))),
        })
    }
}

fn parse_num(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Parse(format!("bad number `{s}`"));
    let float = |t: &str| -> Result<f64> { t.parse::<f64>().map_err(|_| bad()) };
    if let Some((left, right)) = s.split_once("pi") {
        let left = left.trim_end_matches('*');
        let coef = if left.is_empty() { 1.0 } else { float(left)? };
        let div = match right {
            "" => 1.0,
            r => float(r.strip_prefix('/').ok_or_else(bad)?)?,
        };
        return Ok(coef * PI / div);
    }
    match s.split_once('/') {
        Some((a, b)) => Ok(float(a)? / float(b)?),
        None => float(s),
    }
}

/// Inline form used on the command line, e.g. `amplitude_damping:0.2`,
/// `rotated_depolarizing:0.05,pi/4`, `pauli:0.85,0.05,0.05,0.05`.
/// Angles accept a `pi` suffix.
impl FromStr for ChannelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> =
            if args.is_empty() { Vec::new() } else { args.split(',').map(parse_num).collect::<Result<_>>()? };
        let want = |n: usize| -> Result<()> {
            if nums.len() != n {
                return Err(Error::Parse(format!("`{kind}` takes {n} argument(s), got {}", nums.len())));
            }
            Ok(())
        };
        Ok(match kind {
            "identity" => {
                want(0)?;
                ChannelSpec::Identity
            }
            "depolarizing" => {
                want(1)?;
                ChannelSpec::Depolarizing { e: nums[0] }
            }
            "amplitude_damping" => {
                want(1)?;
                ChannelSpec::AmplitudeDamping { p: nums[0] }
            }
            "rotation" => {
                want(1)?;
                ChannelSpec::Rotation { theta: nums[0] }
            }
            "rotated_depolarizing" => {
                want(2)?;
                ChannelSpec::RotatedDepolarizing { e: nums[0], angle: nums[1] }
            }
            "pauli" => {
                want(4)?;
                ChannelSpec::Pauli(BellDistribution { p00: nums[0], p10: nums[1], p01: nums[2], p11: nums[3] })
            }
            _ => return Err(Error::Parse(format!("unknown inline channel `{s}`"))),
        })
    }
}
