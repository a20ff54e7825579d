use serde::{Deserialize, Serialize};

use crate::interval::Interval;
use crate::roots::bisect_sign_change;

/// Probe resolution used whenever a branch has no analytic answer.
pub const PROBE_POINTS: usize = 1 << 14;

/// Closed-form branch families a map can be assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BranchFn {
    /// `slope * x + intercept`
    Affine { slope: f64, intercept: f64 },
    /// Polynomial with coefficients in ascending powers.
    Poly { coeffs: Vec<f64> },
    /// `amplitude * cos(omega * (x - center)) + offset`
    Cosine { amplitude: f64, omega: f64, center: f64, offset: f64 },
    /// Cubic Hermite segment through `(x0, y0)` and `(x1, y1)` with end slopes `d0`, `d1`.
    Hermite { x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64 },
}

/// What a branch does between `lo` and `hi` with respect to extrema.
#[derive(Debug, Clone, PartialEq)]
pub enum Extrema {
    Points(Vec<f64>),
    /// Too many interior extrema to list.
    Dense { count: f64 },
}

impl BranchFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            BranchFn::Affine { slope, intercept } => slope * x + intercept,
            BranchFn::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            BranchFn::Cosine { amplitude, omega, center, offset } => {
                if *amplitude == 0.0 {
                    return *offset;
                }
                let phase = omega * (x - center);
                if phase.is_finite() {
                    amplitude * phase.cos() + offset
                } else {
                    // oscillation below floating-point resolution: the midline
                    *offset
                }
            }
            BranchFn::Hermite { x0, x1, y0, y1, d0, d1 } => {
                let h = x1 - x0;
                let t = (x - x0) / h;
                let t2 = t * t;
                let t3 = t2 * t;
                (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                    + (t3 - 2.0 * t2 + t) * h * d0
                    + (-2.0 * t3 + 3.0 * t2) * y1
                    + (t3 - t2) * h * d1
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            BranchFn::Affine { slope, .. } => *slope,
            BranchFn::Poly { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * x + i as f64 * c),
            BranchFn::Cosine { amplitude, omega, center, .. } => {
                if *amplitude == 0.0 {
                    return 0.0;
                }
                let phase = omega * (x - center);
                if phase.is_finite() {
                    -amplitude * omega * phase.sin()
                } else {
                    0.0
                }
            }
            BranchFn::Hermite { x0, x1, .. } => {
                let (a, b, c) = self.hermite_deriv_coeffs().unwrap();
                let h = x1 - x0;
                let t = (x - x0) / h;
                (a * t * t + b * t + c) / h
            }
        }
    }

    /// Coefficients of `h * f'` as a quadratic in the local parameter `t`.
    fn hermite_deriv_coeffs(&self) -> Option<(f64, f64, f64)> {
        match self {
            BranchFn::Hermite { x0, x1, y0, y1, d0, d1 } => {
                let h = x1 - x0;
                let a = 6.0 * y0 + 3.0 * h * d0 - 6.0 * y1 + 3.0 * h * d1;
                let b = -6.0 * y0 - 4.0 * h * d0 + 6.0 * y1 - 2.0 * h * d1;
                let c = h * d0;
                Some((a, b, c))
            }
            _ => None,
        }
    }

    /// Upper bound for `sup |f'|` on `[lo, hi]`.
    pub fn deriv_bound(&self, lo: f64, hi: f64) -> f64 {
        match self {
            BranchFn::Affine { slope, .. } => slope.abs(),
            BranchFn::Cosine { amplitude, omega, .. } => {
                let b = amplitude.abs() * omega.abs();
                if b.is_finite() {
                    b
                } else {
                    0.0
                }
            }
            BranchFn::Hermite { x0, x1, .. } => {
                let (a, b, c) = self.hermite_deriv_coeffs().unwrap();
                let h = x1 - x0;
                let tl = ((lo - x0) / h).clamp(0.0, 1.0);
                let th = ((hi - x0) / h).clamp(0.0, 1.0);
                let q = |t: f64| ((a * t * t + b * t + c) / h).abs();
                let mut m = q(tl).max(q(th));
                if a != 0.0 {
                    let tv = -b / (2.0 * a);
                    if tv > tl && tv < th {
                        m = m.max(q(tv));
                    }
                }
                m
            }
            BranchFn::Poly { .. } => {
                let n = PROBE_POINTS;
                let step = (hi - lo) / n as f64;
                (0..=n).map(|i| self.deriv(lo + step * i as f64).abs()).fold(0.0, f64::max) * 1.01
            }
        }
    }

    /// Interior points of `(lo, hi)` where `f'` changes sign.
    pub fn extrema(&self, lo: f64, hi: f64, cap: usize) -> Extrema {
        match self {
            BranchFn::Affine { .. } => Extrema::Points(Vec::new()),
            BranchFn::Cosine { amplitude, omega, center, .. } => {
                if *amplitude == 0.0 || !omega.is_finite() {
                    return Extrema::Dense { count: f64::INFINITY };
                }
                let period = std::f64::consts::PI / omega;
                let jlo = ((lo - center) / period).floor() + 1.0;
                let jhi = ((hi - center) / period).ceil() - 1.0;
                let count = (jhi - jlo + 1.0).max(0.0);
                if count > cap as f64 {
                    return Extrema::Dense { count };
                }
                let pts = (0..count as usize)
                    .map(|i| center + (jlo + i as f64) * period)
                    .filter(|&x| x > lo && x < hi)
                    .collect();
                Extrema::Points(pts)
            }
            BranchFn::Hermite { x0, x1, .. } => {
                let (a, b, c) = self.hermite_deriv_coeffs().unwrap();
                let h = x1 - x0;
                let mut roots = quadratic_roots(a, b, c);
                roots.retain(|t| t.is_finite());
                let mut pts: Vec<f64> = roots
                    .into_iter()
                    .map(|t| x0 + t * h)
                    .filter(|&x| x > lo && x < hi)
                    .collect();
                pts.sort_by(f64::total_cmp);
                pts.dedup_by(|p, q| (*p - *q).abs() < 1e-15);
                Extrema::Points(pts)
            }
            BranchFn::Poly { .. } => Extrema::Points(self.probe_sign_changes(lo, hi)),
        }
    }

    fn probe_sign_changes(&self, lo: f64, hi: f64) -> Vec<f64> {
        let n = PROBE_POINTS;
        let step = (hi - lo) / n as f64;
        let mut out = Vec::new();
        let mut prev_x = lo;
        let mut prev = self.deriv(lo);
        for i in 1..=n {
            let x = if i == n { hi } else { lo + step * i as f64 };
            let d = self.deriv(x);
            if prev != 0.0 && d != 0.0 && prev.signum() != d.signum() {
                out.push(bisect_sign_change(|t| self.deriv(t), prev_x, x, 1e-15));
            } else if d == 0.0 && i < n {
                let dn = self.deriv(x + step);
                if prev != 0.0 && dn != 0.0 && prev.signum() != dn.signum() {
                    out.push(x);
                    prev = dn;
                }
            }
            prev_x = x;
            if d != 0.0 {
                prev = d;
            }
        }
        out
    }

    /// Closed image of `[lo, hi]`.
    pub fn range_on(&self, lo: f64, hi: f64) -> Interval {
        let mut ymin = self.eval(lo).min(self.eval(hi));
        let mut ymax = self.eval(lo).max(self.eval(hi));
        match self.extrema(lo, hi, 4096) {
            Extrema::Points(pts) => {
                for x in pts {
                    let y = self.eval(x);
                    ymin = ymin.min(y);
                    ymax = ymax.max(y);
                }
            }
            Extrema::Dense { .. } => {
                if let BranchFn::Cosine { amplitude, offset, .. } = self {
                    ymin = ymin.min(offset - amplitude.abs());
                    ymax = ymax.max(offset + amplitude.abs());
                }
            }
        }
        Interval::new(ymin, ymax)
    }

    /// `{x in [lo, hi) : |f'(x)| < eps}` as a list of intervals, conservative
    /// by `pad` at each detected endpoint.
    pub fn sublevel(&self, lo: f64, hi: f64, eps: f64, pad: f64, cap: usize) -> Vec<Interval> {
        let whole = vec![Interval::new(lo, hi)];
        match self {
            BranchFn::Affine { slope, .. } => {
                if slope.abs() < eps {
                    whole
                } else {
                    Vec::new()
                }
            }
            BranchFn::Cosine { amplitude, omega, center, .. } => {
                let peak = self.deriv_bound(lo, hi);
                if peak < eps {
                    return whole;
                }
                let s = (eps / (amplitude.abs() * omega.abs())).min(1.0);
                let half = s.asin() / omega.abs();
                match self.extrema(lo - half, hi + half, cap) {
                    Extrema::Dense { .. } => whole,
                    Extrema::Points(pts) => {
                        let _ = center;
                        pts.into_iter()
                            .filter_map(|c| {
                                Interval::new(c - half - pad, c + half + pad)
                                    .intersect(&Interval::new(lo, hi))
                            })
                            .collect()
                    }
                }
            }
            _ => {
                let n = PROBE_POINTS;
                let step = (hi - lo) / n as f64;
                let mut grid: Vec<f64> = (0..=n).map(|i| lo + step * i as f64).collect();
                grid[n] = hi;
                if let Extrema::Points(pts) = self.extrema(lo, hi, cap) {
                    grid.extend(pts);
                    grid.sort_by(f64::total_cmp);
                }
                let h = |x: f64| self.deriv(x).abs() - eps;
                let mut out = Vec::new();
                let mut start: Option<f64> = if h(lo) < 0.0 { Some(lo) } else { None };
                for w in grid.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let (ha, hb) = (h(a), h(b));
                    match start {
                        None if hb < 0.0 => {
                            let x = if ha >= 0.0 { bisect_sign_change(h, a, b, 1e-13) } else { a };
                            start = Some(x);
                        }
                        Some(s) if hb >= 0.0 => {
                            let x = bisect_sign_change(h, a, b, 1e-13);
                            out.push(Interval::new(s, x));
                            start = None;
                        }
                        _ => {}
                    }
                }
                if let Some(s) = start {
                    out.push(Interval::new(s, hi));
                }
                out.into_iter()
                    .filter_map(|iv| {
                        Interval::new(iv.lo - pad, iv.hi + pad).intersect(&Interval::new(lo, hi))
                    })
                    .collect()
            }
        }
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a.abs() < 1e-300 {
        if b.abs() < 1e-300 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let mut r = vec![q / a];
    if q != 0.0 {
        r.push(c / q);
    }
    r
}
