use rand::Rng;
use serde::{Deserialize, Serialize};

use super::stokes::StokesParams;
use crate::error::{domain, Error, Result};
use crate::optimize::golden_min;
use crate::quantum::DenseOperator;

/// The statistics a BB84 run observes: the z/x block of `R` and `(t_z, t_x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Omega {
    pub r_zz: f64,
    pub r_zx: f64,
    pub r_xz: f64,
    pub r_xx: f64,
    pub t_z: f64,
    pub t_x: f64,
}

impl Omega {
    pub fn from_stokes(s: &StokesParams) -> Self {
        Self { r_zz: s.r[0][0], r_zx: s.r[0][1], r_xz: s.r[1][0], r_xx: s.r[1][1], t_z: s.t[0], t_x: s.t[1] }
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self { r_zz: v[0], r_zx: v[1], r_xz: v[2], r_xx: v[3], t_z: v[4], t_x: v[5] }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.r_zz, self.r_zx, self.r_xz, self.r_xx, self.t_z, self.t_x]
    }

    /// Completion with zero y-couplings, `t_y = 0` and the given `R_yy`.
    pub fn completion(&self, r_yy: f64) -> StokesParams {
        StokesParams::new(
            [[self.r_zz, self.r_zx, 0.0], [self.r_xz, self.r_xx, 0.0], [0.0, 0.0, r_yy]],
            [self.t_z, self.t_x, 0.0],
        )
    }

    /// Feasible interval of `R_yy` for [`Omega::completion`].
    ///
    /// The smallest Choi eigenvalue is concave in `R_yy`. Its peak is located
    /// by golden section and each boundary by bisection. When the peak is at
    /// zero the set is a single point at which the two smallest eigenvalues
    /// vanish together; the smallest one alone can be flat there to second
    /// order, so the point is refined on `|λ1| + |λ2|`, which has a sharp kink.
    pub fn ryy_interval(&self) -> Result<(f64, f64)> {
        let g = |r: f64| self.completion(r).min_choi_eigenvalue();
        let (r_star, neg) = golden_min(|r| -g(r), -1.0, 1.0, 1e-14);
        let best = -neg;
        if best < -FEASIBILITY_TOL {
            return Err(Error::EmptyCandidateSet { best_eigenvalue: best });
        }
        let edge = |level: f64, mut inside: f64, mut outside: f64| -> f64 {
            if g(outside) >= level {
                return outside;
            }
            for _ in 0..100 {
                let mid = 0.5 * (inside + outside);
                if g(mid) >= level {
                    inside = mid;
                } else {
                    outside = mid;
                }
                if (inside - outside).abs() < 1e-16 {
                    break;
                }
            }
            inside
        };
        if best > DEGENERATE_PEAK {
            return Ok((edge(0.0, r_star, -1.0), edge(0.0, r_star, 1.0)));
        }
        let pair = |r: f64| {
            let v = DenseOperator::wrap(self.completion(r).choi_matrix()).eigenvalues();
            v[0].abs() + v[1].abs()
        };
        let w = 1e-6;
        let (r0, _) = golden_min(pair, (r_star - w).max(-1.0), (r_star + w).min(1.0), 1e-15);
        Ok((r0, r0))
    }
}

/// Peak eigenvalue below which the `R_yy` range is treated as a single point.
const DEGENERATE_PEAK: f64 = 1e-10;

/// Slack on the boundary eigenvalue when deciding whether a slice is feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SliceKind {
    Full,
    Bb84Omega,
    SixstateGamma,
    Bb84Upsilon,
}

/// The part of the Stokes parameters an estimation procedure pins down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParameterSlice {
    Full(StokesParams),
    Omega(Omega),
    /// `(R_zz, R_xx, R_yy)`.
    Gamma([f64; 3]),
    /// `(R_zz, R_xx)`.
    Upsilon([f64; 2]),
}

impl ParameterSlice {
    pub fn of(kind: SliceKind, s: &StokesParams) -> Self {
        match kind {
            SliceKind::Full => ParameterSlice::Full(*s),
            SliceKind::Bb84Omega => ParameterSlice::Omega(Omega::from_stokes(s)),
            SliceKind::SixstateGamma => ParameterSlice::Gamma([s.r[0][0], s.r[1][1], s.r[2][2]]),
            SliceKind::Bb84Upsilon => ParameterSlice::Upsilon([s.r[0][0], s.r[1][1]]),
        }
    }

    pub fn kind(&self) -> SliceKind {
        match self {
            ParameterSlice::Full(_) => SliceKind::Full,
            ParameterSlice::Omega(_) => SliceKind::Bb84Omega,
            ParameterSlice::Gamma(_) => SliceKind::SixstateGamma,
            ParameterSlice::Upsilon(_) => SliceKind::Bb84Upsilon,
        }
    }

    /// The observed coordinates in their canonical order.
    pub fn observed(&self) -> Vec<f64> {
        match self {
            ParameterSlice::Full(s) => s.r.iter().flatten().chain(s.t.iter()).copied().collect(),
            ParameterSlice::Omega(o) => o.to_array().to_vec(),
            ParameterSlice::Gamma(g) => g.to_vec(),
            ParameterSlice::Upsilon(u) => u.to_vec(),
        }
    }

    fn check_range(&self) -> Result<()> {
        if self.observed().iter().any(|v| !(-1.0 - 1e-12..=1.0 + 1e-12).contains(v)) {
            return domain("observed Stokes components must lie in [-1, 1]");
        }
        Ok(())
    }
}

/// Candidate set of channels consistent with a slice.
#[derive(Debug, Clone)]
pub enum CandidateSet {
    Point(StokesParams),
    /// The `R_yy` range of [`Omega::completion`].
    RyyInterval {
        omega: Omega,
        lo: f64,
        hi: f64,
    },
    Region(SliceRegion),
}

pub fn candidate_set_bounds(slice: &ParameterSlice) -> Result<CandidateSet> {
    slice.check_range()?;
    match *slice {
        ParameterSlice::Full(s) => {
            let min = s.min_choi_eigenvalue();
            if min < -FEASIBILITY_TOL {
                return Err(Error::EmptyCandidateSet { best_eigenvalue: min });
            }
            Ok(CandidateSet::Point(s))
        }
        ParameterSlice::Omega(o) => {
            let (lo, hi) = o.ryy_interval()?;
            Ok(CandidateSet::RyyInterval { omega: o, lo, hi })
        }
        ParameterSlice::Gamma(_) | ParameterSlice::Upsilon(_) => {
            let region = SliceRegion { slice: *slice };
            let c = region.center()?;
            let min = region.complete(&c).min_choi_eigenvalue();
            if min < -FEASIBILITY_TOL {
                return Err(Error::EmptyCandidateSet { best_eigenvalue: min });
            }
            Ok(CandidateSet::Region(region))
        }
    }
}

/// Interval of `R_yy` keeping the Bell-diagonal channel `(R_zz, R_xx, R_yy)` valid.
pub fn bell_ryy_interval(r_zz: f64, r_xx: f64) -> Option<(f64, f64)> {
    let lo = (-1.0 - r_zz - r_xx).max(r_zz + r_xx - 1.0);
    let hi = (1.0 + r_zz - r_xx).min(1.0 - r_zz + r_xx);
    (lo <= hi + 1e-12).then_some((lo, hi.max(lo)))
}

/// Free coordinates of a γ or υ slice.
///
/// γ: `(R_zx, R_zy, R_xz, R_xy, R_yz, R_yx, t_z, t_x, t_y)`;
/// υ: the same followed by `R_yy`.
#[derive(Debug, Clone)]
pub struct SliceRegion {
    slice: ParameterSlice,
}

impl SliceRegion {
    pub fn new(slice: ParameterSlice) -> Result<Self> {
        match slice {
            ParameterSlice::Gamma(_) | ParameterSlice::Upsilon(_) => Ok(Self { slice }),
            _ => domain("free-coordinate regions exist only for γ and υ slices"),
        }
    }

    pub fn dim(&self) -> usize {
        match self.slice {
            ParameterSlice::Gamma(_) => 9,
            _ => 10,
        }
    }

    pub fn complete(&self, free: &[f64]) -> StokesParams {
        let (zz, xx, yy) = match self.slice {
            ParameterSlice::Gamma([a, b, c]) => (a, b, c),
            ParameterSlice::Upsilon([a, b]) => (a, b, free[9]),
            _ => unreachable!(),
        };
        StokesParams::new(
            [[zz, free[0], free[1]], [free[2], xx, free[3]], [free[4], free[5], yy]],
            [free[6], free[7], free[8]],
        )
    }

    /// Reads the free coordinates back from a completion.
    pub fn free_of(&self, s: &StokesParams) -> Vec<f64> {
        let mut v = vec![s.r[0][1], s.r[0][2], s.r[1][0], s.r[1][2], s.r[2][0], s.r[2][1], s.t[0], s.t[1], s.t[2]];
        if self.dim() == 10 {
            v.push(s.r[2][2]);
        }
        v
    }

    pub fn feasible(&self, free: &[f64]) -> bool {
        self.complete(free).min_choi_eigenvalue() >= -FEASIBILITY_TOL
    }

    /// The Bell-diagonal completion (middle of the `R_yy` range for υ).
    pub fn center(&self) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.dim()];
        if let ParameterSlice::Upsilon([zz, xx]) = self.slice {
            let (lo, hi) =
                bell_ryy_interval(zz, xx).ok_or(Error::EmptyCandidateSet { best_eigenvalue: f64::NEG_INFINITY })?;
            v[9] = 0.5 * (lo + hi);
        }
        Ok(v)
    }

    /// Rejection sample from the region, shrinking toward the center.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let c = self.center().expect("nonempty region");
        let mut scale = 1.0;
        loop {
            let v: Vec<f64> = c.iter().map(|&x| x + scale * rng.random_range(-1.0..1.0)).collect();
            if self.feasible(&v) {
                return v;
            }
            scale *= 0.9;
        }
    }
}
