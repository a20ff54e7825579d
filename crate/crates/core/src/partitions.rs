//! Dyadic partitions and their pullbacks under a map.
//!
//! `Γ_k` is the dyadic partition of `[0, 1)` into `2^k` cells. Its pullback
//! `Γ_k^{-1,c}` consists of the connected components of the preimages of the
//! cells, where every component meeting `{|f'| < ε_k}` is merged into the
//! single degenerate component `B_k`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::{normalize, set_contains, set_overlaps, Interval};
use crate::maps::{BranchFn, PiecewiseMap};

pub const MAX_LEVEL: u32 = 24;

/// Components shorter than this are merged into a neighbour.
pub const SLIVER: f64 = 1e-12;

/// Coarse components may be overshot by this much before classification fails.
const STRADDLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicPartition {
    pub k: u32,
    pub cells: Vec<Interval>,
}

pub fn build_dyadic(k: u32) -> Result<DyadicPartition> {
    if k > MAX_LEVEL {
        return Err(Error::LevelOverflow(k));
    }
    let n = 1usize << k;
    let w = 1.0 / n as f64;
    Ok(DyadicPartition { k, cells: (0..n).map(|q| Interval::new(q as f64 * w, (q + 1) as f64 * w)).collect() })
}

/// Index of the level-`k` dyadic cell containing `y` (`y = 1` goes to the last cell).
pub fn cell_index(y: f64, k: u32) -> usize {
    let n = 1usize << k;
    ((y * n as f64).floor().max(0.0) as usize).min(n - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderParams {
    pub alpha: f64,
    pub k_holder: f64,
    pub beta: f64,
    pub eps0: f64,
}

impl HolderParams {
    /// `eps0 = None` selects `(2 (4K)^{1/α})^β`.
    pub fn new(alpha: f64, k_holder: f64, eps0: Option<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("Hölder exponent {alpha} outside (0, 1]")));
        }
        if !(k_holder > 0.0) {
            return Err(Error::InvalidArgument("Hölder constant must be positive".into()));
        }
        let beta = alpha / (2.0 + alpha);
        let eps0 = match eps0 {
            Some(e) if e > 0.0 => e,
            Some(e) => return Err(Error::InvalidArgument(format!("eps0 must be positive, got {e}"))),
            None => (2.0 * (4.0 * k_holder).powf(1.0 / alpha)).powf(beta),
        };
        Ok(HolderParams { alpha, k_holder, beta, eps0 })
    }

    pub fn with_eps0(self, eps0: f64) -> Result<Self> {
        Self::new(self.alpha, self.k_holder, Some(eps0))
    }

    /// `ε_k = ε_0 2^{-kβ}`.
    pub fn eps_k(&self, k: u32) -> f64 {
        self.eps0 * 2f64.powf(-(k as f64) * self.beta)
    }

    /// `r_ε = (ε² / 4K)^{1/α}`.
    pub fn radius(&self, eps: f64) -> f64 {
        (eps * eps / (4.0 * self.k_holder)).powf(1.0 / self.alpha)
    }

    /// `C` with `ε_k + K r_{ε_k}^α <= C 2^{-kβ}` for every `k`.
    pub fn degenerate_constant(&self) -> f64 {
        self.eps0 * (1.0 + self.eps0 / 4.0)
    }
}

/// Probe-grid estimate of the Hölder constant of `f'`, inflated by 1.5.
pub fn estimate_holder(map: &PiecewiseMap, r: f64) -> Result<HolderParams> {
    if !(r > 1.0) {
        return Err(Error::InvalidArgument(format!("smoothness r = {r} must exceed 1")));
    }
    let alpha = (r - 1.0).min(1.0);
    let bits = 14;
    let n = 1usize << bits;
    let d: Vec<f64> = (0..=n).map(|i| map.derivative(i as f64 / n as f64)).collect::<Result<_>>()?;
    let mut k: f64 = 0.0;
    for j in 1..=bits {
        let m = 1usize << (bits - j);
        let s = (m as f64 / n as f64).powf(alpha);
        for i in 0..=(n - m) {
            k = k.max((d[i] - d[i + m]).abs() / s);
        }
    }
    // Oscillating branches alias on any fixed grid; bound them analytically by
    // |f'(x) - f'(y)| <= min(2 sup|f'|, sup|f''| |x - y|).
    for b in map.branches() {
        if let BranchFn::Cosine { amplitude, omega, .. } = b.func {
            let s1 = amplitude.abs() * omega.abs();
            let s2 = s1 * omega.abs();
            if s1.is_finite() && s2.is_finite() {
                k = k.max((2.0 * s1).powf(1.0 - alpha) * s2.powf(alpha));
            }
        }
    }
    HolderParams::new(alpha, (1.5 * k).max(1e-6), None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Component {
    pub iv: Interval,
    /// Index of the dyadic cell `P` with `f(Q) ⊆ closure(P)`.
    pub cell: usize,
    pub branch: usize,
}

#[derive(Debug, Clone)]
pub struct PullbackPartition {
    pub k: u32,
    pub eps_k: f64,
    pub params: HolderParams,
    /// Components disjoint from `B_k`, sorted by position.
    pub regular: Vec<Component>,
    /// Monotone components merged into `B_k`, with their image cells.
    pub absorbed: Vec<Component>,
    /// Oscillating branches merged into `B_k` as a whole.
    pub dense: Vec<Interval>,
    /// `B_k` as a normalized interval list.
    pub degenerate: Vec<Interval>,
    /// Regular components lying inside `B_{k-1}` (the set `Ω_k`); filled by
    /// [`PartitionLadder`].
    pub emergent: Vec<bool>,
    /// Number of sub-1e-12 components merged into neighbours.
    pub slivers: usize,
}

/// Builds `Γ_k^{-1,c}`. Level 0 (the single cell `[0, 1)`) is accepted.
pub fn build_pullback(map: &PiecewiseMap, k: u32, hp: &HolderParams) -> Result<PullbackPartition> {
    if k > MAX_LEVEL {
        return Err(Error::LevelOverflow(k));
    }
    let eps = hp.eps_k(k);
    let sublevel = map.sublevel_set(eps);
    let mut dense = Vec::new();
    for &i in map.dense_branches() {
        let b = &map.branches()[i];
        if b.func.deriv_bound(b.domain.lo, b.domain.hi) < eps {
            dense.push(b.domain);
        } else {
            return Err(Error::CombinatorialBlowup { limit: crate::maps::LAP_CAP });
        }
    }
    let per_lap: Vec<Result<(Vec<Component>, usize)>> =
        map.laps().par_iter().map(|lap| lap_components(map, lap, k)).collect();
    let mut regular = Vec::new();
    let mut absorbed = Vec::new();
    let mut slivers = 0;
    for r in per_lap {
        let (comps, s) = r?;
        slivers += s;
        for c in comps {
            if set_overlaps(&sublevel, &c.iv) {
                absorbed.push(c);
            } else {
                regular.push(c);
            }
        }
    }
    regular.sort_by(|a, b| a.iv.lo.total_cmp(&b.iv.lo));
    let mut bk: Vec<Interval> = absorbed.iter().map(|c| c.iv).collect();
    bk.extend(dense.iter().copied());
    let degenerate = normalize(bk, 0.0);
    let emergent = vec![false; regular.len()];
    Ok(PullbackPartition { k, eps_k: eps, params: *hp, regular, absorbed, dense, degenerate, emergent, slivers })
}

fn lap_components(map: &PiecewiseMap, lap: &crate::maps::Lap, k: u32) -> Result<(Vec<Component>, usize)> {
    let n = (1u64 << k) as f64;
    let img = map.lap_image(lap);
    let q_lo = cell_index(img.lo, k);
    let q_hi = if img.hi >= 1.0 { (1usize << k) - 1 } else { ((img.hi * n).ceil() as usize).max(1) - 1 };
    let mut comps: Vec<Component> = Vec::new();
    for q in q_lo..=q_hi.max(q_lo) {
        let (p_lo, p_hi) = (q as f64 / n, (q + 1) as f64 / n);
        let ya = p_lo.max(img.lo);
        let yb = p_hi.min(img.hi);
        if yb <= ya {
            continue;
        }
        let xa = map.lap_inverse(lap, ya)?;
        let xb = map.lap_inverse(lap, yb)?;
        let iv = Interval::new(xa.min(xb), xa.max(xb));
        comps.push(Component { iv, cell: q, branch: lap.branch });
    }
    comps.sort_by(|a, b| a.iv.lo.total_cmp(&b.iv.lo));
    // snap neighbours together and fold slivers into the previous component
    let mut out: Vec<Component> = Vec::with_capacity(comps.len());
    let mut slivers = 0;
    for c in comps {
        if c.iv.len() < SLIVER {
            slivers += 1;
            if let Some(last) = out.last_mut() {
                last.iv.hi = last.iv.hi.max(c.iv.hi);
                continue;
            }
        }
        if let Some(last) = out.last_mut() {
            if last.iv.len() < SLIVER {
                let lo = last.iv.lo;
                *last = c;
                last.iv.lo = lo;
                continue;
            }
        }
        out.push(c);
    }
    Ok((out, slivers))
}

impl PullbackPartition {
    /// Index of the regular component containing `x`.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let idx = self.regular.partition_point(|c| c.iv.hi <= x);
        (idx < self.regular.len() && self.regular[idx].iv.contains(x)).then_some(idx)
    }

    pub fn in_degenerate(&self, x: f64) -> bool {
        set_contains(&self.degenerate, x)
    }

    /// CSV rows: left, right, kind, image cell, branch.
    pub fn rows(&self) -> Vec<(f64, f64, &'static str, Option<usize>, Option<usize>)> {
        let mut rows: Vec<_> =
            self.regular.iter().map(|c| (c.iv.lo, c.iv.hi, "regular", Some(c.cell), Some(c.branch))).collect();
        rows.extend(self.degenerate.iter().map(|iv| (iv.lo, iv.hi, "degenerate", None, None)));
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows
    }
}

/// Partitions `Γ_0^{-1,c}, ..., Γ_{k_max}^{-1,c}` with the emergent flags set.
#[derive(Debug, Clone)]
pub struct PartitionLadder {
    pub levels: Vec<PullbackPartition>,
}

impl PartitionLadder {
    pub fn build(map: &PiecewiseMap, k_max: u32, hp: &HolderParams) -> Result<Self> {
        if k_max > MAX_LEVEL {
            return Err(Error::LevelOverflow(k_max));
        }
        let mut levels: Vec<PullbackPartition> = Vec::with_capacity(k_max as usize + 1);
        for k in 0..=k_max {
            let mut p = build_pullback(map, k, hp)?;
            if let Some(prev) = levels.last() {
                p.emergent = p.regular.iter().map(|c| prev.in_degenerate(c.iv.mid())).collect();
            }
            levels.push(p);
        }
        Ok(PartitionLadder { levels })
    }

    pub fn level(&self, k: u32) -> &PullbackPartition {
        &self.levels[k as usize]
    }

    pub fn k_max(&self) -> u32 {
        self.levels.len() as u32 - 1
    }
}

/// Fine regular components inside coarse regular components (`W_{k,j}`) and,
/// among those, the ones inside coarse emergent components (`Ω'_{k,j}`),
/// as indices into `fine.regular`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Classes {
    pub w: Vec<usize>,
    pub omega_prime: Vec<usize>,
}

pub fn refine_classes(coarse: &PullbackPartition, fine: &PullbackPartition) -> Result<Classes> {
    if fine.k < coarse.k {
        return Err(Error::InvalidArgument("the fine level must not be coarser".into()));
    }
    let mut out = Classes::default();
    for (i, q) in fine.regular.iter().enumerate() {
        let Some(j) = coarse.locate(q.iv.mid()) else { continue };
        let parent = &coarse.regular[j];
        if !q.iv.within(&parent.iv, STRADDLE_TOL) {
            return Err(Error::ClassificationGap { lo: q.iv.lo, hi: q.iv.hi });
        }
        out.w.push(i);
        if coarse.emergent.get(j).copied().unwrap_or(false) {
            out.omega_prime.push(i);
        }
    }
    Ok(out)
}
