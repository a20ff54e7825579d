//! Piecewise-smooth self-maps of the unit interval.
//!
//! A map is an ordered list of branches on half-open domains `[a, b)` that
//! tile `[0, 1)`. Each branch is split at its interior extrema into monotone
//! laps, which is what preimage computation and the pullback partitions work
//! with. Branches whose laps are too numerous to list (the oscillating blocks
//! of the counterexample map) are kept as dense branches and only ever
//! handled as a whole.

mod branch;
mod document;

pub use branch::{BranchFn, Extrema, PROBE_POINTS};
pub use document::{custom, BranchDescriptor, MapDocument, MapKind};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{normalize, Interval};
use crate::roots::solve_monotone;

/// Laps beyond this count per branch are not enumerated.
pub const LAP_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    NonMonotone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub domain: Interval,
    pub func: BranchFn,
    pub monotonicity: Monotonicity,
    /// The `C^r` class the branch claims.
    pub smoothness: f64,
}

impl Branch {
    pub fn new(domain: Interval, func: BranchFn, smoothness: f64) -> Self {
        let monotonicity = match func.extrema(domain.lo, domain.hi, LAP_CAP) {
            Extrema::Points(p) if p.is_empty() => {
                let d = func.deriv(domain.mid());
                if d >= 0.0 {
                    Monotonicity::Increasing
                } else {
                    Monotonicity::Decreasing
                }
            }
            _ => Monotonicity::NonMonotone,
        };
        Branch { domain, func, monotonicity, smoothness }
    }

    /// Hölder exponent of the derivative, `min(r - 1, 1)`.
    pub fn holder_alpha(&self) -> f64 {
        (self.smoothness - 1.0).min(1.0)
    }
}

/// Degenerate points of a map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CriticalFeature {
    /// An isolated zero of `f'`; `numerical` marks detected (not analytic) points.
    Point { x: f64, numerical: bool },
    /// An interval packed with critical points (an oscillation block).
    Cluster { lo: f64, hi: f64 },
}

impl CriticalFeature {
    pub fn hull(&self) -> Interval {
        match *self {
            CriticalFeature::Point { x, .. } => Interval::new(x, x),
            CriticalFeature::Cluster { lo, hi } => Interval::new(lo, hi),
        }
    }

    pub fn distance(&self, x: f64) -> f64 {
        self.hull().distance(x)
    }
}

/// A monotone piece of a branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lap {
    pub domain: Interval,
    pub branch: usize,
    pub increasing: bool,
}

#[derive(Debug, Clone)]
pub struct PiecewiseMap {
    branches: Vec<Branch>,
    critical_set: Vec<CriticalFeature>,
    lipschitz: f64,
    wrap: bool,
    laps: Vec<Lap>,
    dense: Vec<usize>,
    document: MapDocument,
}

impl PiecewiseMap {
    /// Assembles a map; `critical_set` of `None` triggers numerical detection.
    pub fn from_branches(
        branches: Vec<Branch>,
        critical_set: Option<Vec<CriticalFeature>>,
        wrap: bool,
        document: MapDocument,
    ) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidArgument("a map needs at least one branch".into()));
        }
        let mut expect = 0.0;
        for b in &branches {
            if (b.domain.lo - expect).abs() > 1e-12 || b.domain.hi <= b.domain.lo {
                return Err(Error::DomainGap(expect));
            }
            if !(b.smoothness > 1.0) {
                return Err(Error::InvalidArgument(format!("smoothness {} must exceed 1", b.smoothness)));
            }
            expect = b.domain.hi;
        }
        if (expect - 1.0).abs() > 1e-12 {
            return Err(Error::DomainGap(expect));
        }

        let mut laps = Vec::new();
        let mut dense = Vec::new();
        let mut detected = Vec::new();
        for (i, b) in branches.iter().enumerate() {
            let (lo, hi) = (b.domain.lo, b.domain.hi);
            match b.func.extrema(lo, hi, LAP_CAP) {
                Extrema::Points(pts) => {
                    let numerical = matches!(b.func, BranchFn::Poly { .. });
                    let mut cuts = vec![lo];
                    for &x in &pts {
                        detected.push(CriticalFeature::Point { x, numerical });
                        cuts.push(x);
                    }
                    cuts.push(hi);
                    for w in cuts.windows(2) {
                        let d = Interval::new(w[0], w[1]);
                        let increasing = b.func.eval(d.hi) >= b.func.eval(d.lo);
                        laps.push(Lap { domain: d, branch: i, increasing });
                    }
                }
                Extrema::Dense { .. } => {
                    dense.push(i);
                    detected.push(CriticalFeature::Cluster { lo, hi });
                }
            }
            for x in [lo, hi] {
                if b.func.deriv(x).abs() <= 1e-12 {
                    detected.push(CriticalFeature::Point { x, numerical: true });
                }
            }
        }
        let critical_set = critical_set.unwrap_or_else(|| {
            detected.dedup_by(|a, b| a == b);
            detected
        });
        let lipschitz = branches
            .iter()
            .map(|b| b.func.deriv_bound(b.domain.lo, b.domain.hi))
            .fold(0.0, f64::max);
        let mut document = document;
        document.wrap = wrap;
        document.branches = branches
            .iter()
            .map(|b| BranchDescriptor { domain: [b.domain.lo, b.domain.hi], smoothness: b.smoothness, func: b.func.clone() })
            .collect();
        document.critical_set = Some(critical_set.clone());
        Ok(PiecewiseMap { branches, critical_set, lipschitz, wrap, laps, dense, document })
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn critical_set(&self) -> &[CriticalFeature] {
        &self.critical_set
    }

    /// An upper bound for `sup |f'|`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn laps(&self) -> &[Lap] {
        &self.laps
    }

    /// Branches whose laps are not enumerated.
    pub fn dense_branches(&self) -> &[usize] {
        &self.dense
    }

    pub fn is_circle_map(&self) -> bool {
        self.wrap
    }

    pub fn document(&self) -> &MapDocument {
        &self.document
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.document).expect("map documents serialize")
    }

    /// Index of the branch containing `x`; `x = 1` belongs to the last branch.
    pub fn branch_index(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::DomainGap(x));
        }
        let idx = self.branches.partition_point(|b| b.domain.lo <= x);
        if idx == 0 {
            return Err(Error::DomainGap(x));
        }
        let i = idx - 1;
        if self.branches[i].domain.contains(x) || (x == 1.0 && i == self.branches.len() - 1) {
            Ok(i)
        } else {
            Err(Error::DomainGap(x))
        }
    }

    fn wrap_value(&self, y: f64) -> f64 {
        if !self.wrap {
            return y;
        }
        let w = y - y.floor();
        if 1.0 - w < 1e-15 {
            0.0
        } else {
            w
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let i = self.branch_index(x)?;
        Ok(self.wrap_value(self.branches[i].func.eval(x)))
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        let i = self.branch_index(x)?;
        Ok(self.branches[i].func.deriv(x))
    }

    /// `[x0, f(x0), ..., f^{n-1}(x0)]`.
    pub fn orbit(&self, x0: f64, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidArgument("orbit length must be at least 1".into()));
        }
        let mut out = Vec::with_capacity(n);
        let mut x = x0;
        out.push(x);
        for _ in 1..n {
            x = self.eval(x)?;
            out.push(x);
        }
        Ok(out)
    }

    /// Image of a lap as the half-open interval matching the domain convention.
    pub fn lap_image(&self, lap: &Lap) -> Interval {
        let f = &self.branches[lap.branch].func;
        let (a, b) = (f.eval(lap.domain.lo), f.eval(lap.domain.hi));
        Interval::new(a.min(b), a.max(b))
    }

    /// Solves `f(x) = y` inside one lap, or returns `None` when `y` is not in
    /// the lap's half-open image.
    pub fn invert_lap(&self, lap: &Lap, y: f64, tol: f64) -> Result<Option<f64>> {
        let f = &self.branches[lap.branch].func;
        let (ya, yb) = (f.eval(lap.domain.lo), f.eval(lap.domain.hi));
        let inside = if lap.increasing { ya <= y && y < yb } else { yb < y && y <= ya };
        if !inside {
            return Ok(None);
        }
        let x = match f {
            BranchFn::Affine { slope, intercept } => ((y - intercept) / slope).clamp(lap.domain.lo, lap.domain.hi),
            _ => solve_monotone(|t| f.eval(t), |t| f.deriv(t), lap.domain.lo, lap.domain.hi, y, tol)?,
        };
        Ok(Some(x))
    }

    /// The point of `lap` mapped to `y`, with `y` clamped to the closed lap image.
    pub fn lap_inverse(&self, lap: &Lap, y: f64) -> Result<f64> {
        let f = &self.branches[lap.branch].func;
        let (ya, yb) = (f.eval(lap.domain.lo), f.eval(lap.domain.hi));
        let (ymin, ymax) = (ya.min(yb), ya.max(yb));
        let at_lo = if lap.increasing { lap.domain.lo } else { lap.domain.hi };
        let at_hi = if lap.increasing { lap.domain.hi } else { lap.domain.lo };
        if y <= ymin {
            return Ok(at_lo);
        }
        if y >= ymax {
            return Ok(at_hi);
        }
        match f {
            BranchFn::Affine { slope, intercept } => Ok(((y - intercept) / slope).clamp(lap.domain.lo, lap.domain.hi)),
            _ => solve_monotone(|t| f.eval(t), |t| f.deriv(t), lap.domain.lo, lap.domain.hi, y, 1e-13),
        }
    }

    /// All solutions of `f(x) = y`, one per lap whose image contains `y`, ascending.
    pub fn preimages(&self, y: f64, tol: f64) -> Result<Vec<(f64, usize)>> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        for &i in &self.dense {
            let b = &self.branches[i];
            let r = b.func.range_on(b.domain.lo, b.domain.hi);
            if r.contains_closed(y) {
                return Err(Error::CombinatorialBlowup { limit: LAP_CAP });
            }
        }
        let mut out = Vec::new();
        for lap in &self.laps {
            if let Some(x) = self.invert_lap(lap, y, tol)? {
                out.push((x, lap.branch));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(out)
    }

    /// `{x : |f'(x)| < eps}` as a normalized interval list.
    pub fn sublevel_set(&self, eps: f64) -> Vec<Interval> {
        let mut all = Vec::new();
        for b in &self.branches {
            all.extend(b.func.sublevel(b.domain.lo, b.domain.hi, eps, 1e-10, LAP_CAP));
        }
        normalize(all, 0.0)
    }

    /// Closed image of `[lo, hi]`; exact for continuous maps.
    pub fn image_hull(&self, lo: f64, hi: f64) -> Result<Interval> {
        let lo = lo.max(0.0);
        let hi = hi.min(1.0);
        let mut acc: Option<Interval> = None;
        for b in &self.branches {
            let a = lo.max(b.domain.lo);
            let c = hi.min(b.domain.hi);
            if a > c || (a == c && c == b.domain.hi && c < 1.0) {
                continue;
            }
            let r = b.func.range_on(a, c);
            acc = Some(match acc {
                None => r,
                Some(prev) => prev.hull(&r),
            });
        }
        acc.ok_or(Error::DomainGap(lo))
    }

    /// Distance from `x` to the critical set (infinite when it is empty).
    pub fn critical_distance(&self, x: f64) -> f64 {
        self.critical_set.iter().map(|c| c.distance(x)).fold(f64::INFINITY, f64::min)
    }
}

/// `x ↦ N x mod 1`.
pub fn nfold(n: u32) -> Result<PiecewiseMap> {
    if n == 0 {
        return Err(Error::InvalidArgument("nfold needs N >= 1".into()));
    }
    let nf = n as f64;
    let branches = (0..n)
        .map(|i| {
            Branch::new(
                Interval::new(i as f64 / nf, (i + 1) as f64 / nf),
                BranchFn::Affine { slope: nf, intercept: -(i as f64) },
                2.0,
            )
        })
        .collect();
    PiecewiseMap::from_branches(branches, Some(Vec::new()), true, MapDocument::nfold(n))
}

/// `px` on `[0, 1/p)` and `p/(p-1) (1 - x)` on `[1/p, 1)`.
pub fn skewed_tent(p: f64) -> Result<PiecewiseMap> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("skewed tent needs p > 1, got {p}")));
    }
    let q = p / (p - 1.0);
    let branches = vec![
        Branch::new(Interval::new(0.0, 1.0 / p), BranchFn::Affine { slope: p, intercept: 0.0 }, 2.0),
        Branch::new(Interval::new(1.0 / p, 1.0), BranchFn::Affine { slope: -q, intercept: q }, 2.0),
    ];
    PiecewiseMap::from_branches(branches, Some(Vec::new()), false, MapDocument::skewed_tent(p))
}

/// `c x (1 - x)` for `0 < c <= 4`.
pub fn logistic(c: f64) -> Result<PiecewiseMap> {
    if !(c > 0.0 && c <= 4.0) {
        return Err(Error::InvalidArgument(format!("logistic parameter must lie in (0, 4], got {c}")));
    }
    let branches = vec![Branch::new(Interval::UNIT, BranchFn::Poly { coeffs: vec![0.0, c, -c] }, 2.0)];
    let crit = vec![CriticalFeature::Point { x: 0.5, numerical: false }];
    PiecewiseMap::from_branches(branches, Some(crit), false, MapDocument::logistic(c))
}

pub fn identity() -> PiecewiseMap {
    let branches = vec![Branch::new(Interval::UNIT, BranchFn::Affine { slope: 1.0, intercept: 0.0 }, 2.0)];
    PiecewiseMap::from_branches(branches, Some(Vec::new()), false, MapDocument::identity())
        .expect("identity is well formed")
}
