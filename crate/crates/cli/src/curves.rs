//! Rate curves for sweeps and the built-in figures.

use std::io::Write;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use qkd_ratelab::oneway::{rate, ChannelInput, Direction, Estimation, Preprocessing, RateQuery};
use qkd_ratelab::twoway::{comparison_rates, optimize_block_functions, rate_twoway, BlockFunctions};
use qkd_ratelab::{make_channel, stokes_to_choi, Basis, ChannelSpec, Protocol};
use rayon::prelude::*;

/// Functions applied in the two-way curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functions {
    Fixed(BlockFunctions),
    Optimize,
}

impl FromStr for Functions {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "optimize" => Functions::Optimize,
            table => Functions::Fixed(table.parse()?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    OneWay {
        protocol: Protocol,
        estimation: Estimation,
        direction: Direction,
        basis: Basis,
        preprocessing: Preprocessing,
    },
    TwoWay {
        protocol: Protocol,
        direction: Direction,
        functions: Functions,
    },
    AdvantageDistillation(Protocol),
    Vollbrecht(Protocol),
    Gohari(Protocol),
}

/// Curve syntax: `protocol[/option...]`, options from `direct`, `reverse`,
/// `proposed`, `conventional`, `z`, `x`, `y`, `noisy` (optimized flip
/// probability), `q=<v>`, `twoway`, `chi=<ad|bob-keeps|optimize|table>`,
/// `ad`, `vollbrecht`, `gohari`.
impl FromStr for Curve {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split('/');
        let protocol: Protocol = parts.next().unwrap_or_default().parse()?;
        let mut estimation = Estimation::Proposed;
        let mut direction = Direction::Direct;
        let mut basis = Basis::Z;
        let mut preprocessing = Preprocessing::None;
        let mut functions = Functions::Fixed(BlockFunctions::advantage_distillation());
        let mut kind = "oneway";
        for opt in parts {
            match opt {
                "direct" | "reverse" => direction = opt.parse()?,
                "proposed" | "conventional" => estimation = opt.parse()?,
                "z" | "x" | "y" => basis = opt.parse()?,
                "noisy" => preprocessing = Preprocessing::Optimize,
                "twoway" | "ad" | "vollbrecht" | "gohari" => kind = opt,
                _ => {
                    if let Some(q) = opt.strip_prefix("q=") {
                        preprocessing = Preprocessing::Fixed(q.parse().with_context(|| format!("bad q in `{s}`"))?);
                    } else if let Some(f) = opt.strip_prefix("chi=") {
                        functions = f.parse()?;
                    } else {
                        bail!("unknown curve option `{opt}` in `{s}`");
                    }
                }
            }
        }
        Ok(match kind {
            "twoway" => Curve::TwoWay { protocol, direction, functions },
            "ad" => Curve::AdvantageDistillation(protocol),
            "vollbrecht" => Curve::Vollbrecht(protocol),
            "gohari" => Curve::Gohari(protocol),
            _ => Curve::OneWay { protocol, estimation, direction, basis, preprocessing },
        })
    }
}

impl Curve {
    /// Clamped rate of the channel described by `spec`.
    pub fn eval(&self, spec: &ChannelSpec) -> Result<f64> {
        let input = ChannelInput::Choi(stokes_to_choi(&make_channel(spec)?)?);
        Ok(match *self {
            Curve::OneWay { protocol, estimation, direction, basis, preprocessing } => {
                let q = RateQuery::new(input, protocol)
                    .estimation(estimation)
                    .direction(direction)
                    .key_basis(basis)
                    .preprocessing(preprocessing);
                rate(&q)?.rate
            }
            Curve::TwoWay { protocol, direction, functions } => match functions {
                Functions::Fixed(f) => rate_twoway(&input, protocol, direction, f)?.rate,
                Functions::Optimize => optimize_block_functions(&input, protocol, direction)?.result.rate,
            },
            Curve::AdvantageDistillation(p) => comparison_rates(&input, p)?.advantage_distillation.max(0.0),
            Curve::Gohari(p) => comparison_rates(&input, p)?.gohari.max(0.0),
            Curve::Vollbrecht(p) => comparison_rates(&input, p)?
                .vollbrecht
                .ok_or_else(|| anyhow!("the distillation yield needs a Pauli channel"))?
                .max(0.0),
        })
    }
}

/// Channel family with a single `{}` placeholder for the swept parameter.
#[derive(Debug, Clone)]
pub struct Family(String);

impl Family {
    pub fn new(template: &str) -> Result<Self> {
        if template.matches("{}").count() != 1 {
            bail!("channel template `{template}` needs exactly one `{{}}` placeholder");
        }
        Ok(Family(template.to_string()))
    }

    pub fn at(&self, v: f64) -> Result<ChannelSpec> {
        Ok(self.0.replace("{}", &format!("{v}")).parse()?)
    }
}

/// `steps` evenly spaced points from `start` to `stop` inclusive.
pub fn grid(start: f64, stop: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        bail!("a sweep needs at least 2 steps");
    }
    if !start.is_finite() || !stop.is_finite() {
        bail!("sweep bounds must be finite");
    }
    Ok((0..steps)
        .map(|i| if i + 1 == steps { stop } else { start + (stop - start) * i as f64 / (steps - 1) as f64 })
        .collect())
}

/// Evaluates every curve at every grid point in parallel; rows come back in grid order.
pub fn sweep(family: &Family, grid: &[f64], curves: &[(String, Curve)]) -> Result<Vec<Vec<f64>>> {
    grid.par_iter()
        .map(|&v| {
            let spec = family.at(v)?;
            curves.iter().map(|(name, c)| c.eval(&spec).with_context(|| format!("curve `{name}` at {v}"))).collect()
        })
        .collect()
}

pub fn write_csv<W: Write>(w: W, grid: &[f64], names: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(std::iter::once("param").chain(names.iter().copied()))?;
    for (v, row) in grid.iter().zip(rows) {
        out.write_record(std::iter::once(*v).chain(row.iter().copied()).map(|x| format!("{x}")))?;
    }
    out.flush()?;
    Ok(())
}

pub struct Figure {
    pub family: &'static str,
    pub start: f64,
    pub stop: f64,
    pub curves: Vec<(&'static str, &'static str)>,
}

pub const FIGURES: [&str; 7] = [
    "amp-damping-z",
    "amp-damping-x",
    "depolarizing-sixstate",
    "depolarizing-bb84",
    "quarter-rotated-bb84",
    "quarter-rotated-sixstate",
    "amp-damping-twoway",
];

/// Curve sets of the built-in figures, as `(column, curve)` pairs. Two-way
/// curves use the advantage-distillation functions except on amplitude
/// damping, where they are optimized per point.
pub fn figure(name: &str) -> Result<Figure> {
    let amp = |b: &'static str| -> Vec<(&'static str, &'static str)> {
        match b {
            "z" => vec![
                ("reverse", "sixstate/reverse/z"),
                ("direct", "sixstate/direct/z"),
                ("conventional-sixstate", "sixstate/conventional/direct/z/noisy"),
                ("conventional-bb84", "bb84/conventional/direct/z/noisy"),
            ],
            _ => vec![
                ("reverse", "sixstate/reverse/x"),
                ("direct", "sixstate/direct/x"),
                ("conventional-sixstate", "sixstate/conventional/direct/x/noisy"),
                ("conventional-bb84", "bb84/conventional/direct/x/noisy"),
            ],
        }
    };
    let depol = |p: &'static str| -> Vec<(&'static str, &'static str)> {
        match p {
            "sixstate" => vec![
                ("two-way", "sixstate/twoway"),
                ("vollbrecht", "sixstate/vollbrecht"),
                ("advantage-distillation", "sixstate/ad"),
                ("one-way", "sixstate/conventional/noisy"),
            ],
            _ => vec![
                ("two-way", "bb84/twoway"),
                ("vollbrecht", "bb84/vollbrecht"),
                ("advantage-distillation", "bb84/ad"),
                ("one-way", "bb84/conventional/noisy"),
            ],
        }
    };
    let rot = "rotated_depolarizing:{},pi/4";
    Ok(match name {
        "amp-damping-z" => Figure { family: "amplitude_damping:{}", start: 0.0, stop: 1.0, curves: amp("z") },
        "amp-damping-x" => Figure { family: "amplitude_damping:{}", start: 0.0, stop: 1.0, curves: amp("x") },
        "depolarizing-sixstate" => {
            Figure { family: "depolarizing:{}", start: 0.0, stop: 0.3, curves: depol("sixstate") }
        }
        "depolarizing-bb84" => Figure { family: "depolarizing:{}", start: 0.0, stop: 0.3, curves: depol("bb84") },
        "quarter-rotated-bb84" => {
            Figure { family: rot, start: 0.0, stop: 0.3, curves: vec![("two-way", "bb84/twoway"), ("one-way", "bb84")] }
        }
        "quarter-rotated-sixstate" => Figure {
            family: rot,
            start: 0.0,
            stop: 0.3,
            curves: vec![("two-way", "sixstate/twoway"), ("one-way", "sixstate")],
        },
        "amp-damping-twoway" => Figure {
            family: "amplitude_damping:{}",
            start: 0.0,
            stop: 1.0,
            curves: vec![
                ("two-way-reverse", "sixstate/twoway/reverse/chi=optimize"),
                ("one-way-reverse", "sixstate/reverse"),
                ("two-way-direct", "sixstate/twoway/direct/chi=optimize"),
                ("two-way-nonoptimal", "sixstate/twoway/direct/chi=ad"),
                ("one-way-direct", "sixstate/direct"),
            ],
        },
        other => bail!("unknown figure `{other}`; expected one of {}", FIGURES.join(", ")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_syntax() {
        let c: Curve = "bb84/conventional/reverse/x/q=0.1".parse().unwrap();
        assert_eq!(
            c,
            Curve::OneWay {
                protocol: Protocol::Bb84,
                estimation: Estimation::Conventional,
                direction: Direction::Reverse,
                basis: Basis::X,
                preprocessing: Preprocessing::Fixed(0.1),
            }
        );
        assert!(matches!(
            "sixstate/twoway/chi=optimize".parse().unwrap(),
            Curve::TwoWay { functions: Functions::Optimize, .. }
        ));
        assert!("bb84/sideways".parse::<Curve>().is_err());
        assert!("qubit".parse::<Curve>().is_err());
    }

    #[test]
    fn every_figure_parses() {
        for name in FIGURES {
            let f = figure(name).unwrap();
            Family::new(f.family).unwrap().at(f.start).unwrap();
            for (_, c) in f.curves {
                c.parse::<Curve>().unwrap();
            }
        }
        assert!(figure("nope").is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = grid(0.0, 0.3, 4).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[3], 0.3);
        assert!(grid(0.0, 1.0, 1).is_err());
    }
}
