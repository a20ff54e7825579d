//! Probability measures on `[0, 1]` in four computable forms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::horseshoe::{HorseshoeMeasure, EXPANSION_CAP};
use crate::interval::Interval;
use crate::maps::{MapKind, PiecewiseMap};

pub const DEFAULT_GRID: usize = 1 << 16;

/// Integrand values below this are replaced by it.
pub const CLAMP: f64 = -1e3;

/// Derivatives smaller than this count as degenerate in the transfer operator.
const DEGENERATE_SLOPE: f64 = 1e-12;

// Five-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

/// Sorted weighted points with prefix sums for CDF queries.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMasses {
    points: Vec<f64>,
    weights: Vec<f64>,
    cum: Vec<f64>,
    samples: usize,
}

impl PointMasses {
    /// Sorts, merges points closer than `merge_tol` and normalizes to mass 1.
    pub fn new(mut pairs: Vec<(f64, f64)>, merge_tol: f64) -> Result<Self> {
        for &(x, w) in &pairs {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Domain(x));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!("weight {w} is not a nonnegative number")));
            }
        }
        let samples = pairs.len();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            match points.last() {
                Some(&last) if x - last <= merge_tol => *weights.last_mut().unwrap() += w,
                _ => {
                    points.push(x);
                    weights.push(w);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("a measure needs positive total mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        let mut cum = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in &weights {
            acc += w;
            cum.push(acc);
        }
        Ok(PointMasses { points, weights, cum, samples })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Number of input points before ties were merged.
    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn prefix(&self, count: usize) -> f64 {
        if count == 0 {
            0.0
        } else {
            self.cum[count - 1]
        }
    }

    /// `μ([0, t])`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.prefix(self.points.partition_point(|&p| p <= t))
    }

    /// `μ([0, t))`.
    pub fn cdf_left(&self, t: f64) -> f64 {
        self.prefix(self.points.partition_point(|&p| p < t))
    }

    /// Index range of the points in the open interval `(lo, hi)`.
    pub fn range_open(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.points.partition_point(|&p| p <= lo);
        let b = self.points.partition_point(|&p| p < hi);
        a..b.max(a)
    }

    /// Smallest support point with `μ([0, x]) >= u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cum.partition_point(|&c| c < u).min(self.points.len() - 1);
        self.points[i]
    }
}

/// A piecewise-constant density on a uniform power-of-two grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    heights: Vec<f64>,
    cum: Vec<f64>,
}

impl Density {
    pub fn new(mut heights: Vec<f64>) -> Result<Self> {
        let n = heights.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("density grids need a power-of-two cell count, got {n}")));
        }
        if heights.iter().any(|&h| !(h >= 0.0) || !h.is_finite()) {
            return Err(Error::InvalidArgument("density heights must be finite and nonnegative".into()));
        }
        let total: f64 = heights.iter().sum::<f64>() / n as f64;
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("a density needs positive total mass".into()));
        }
        heights.iter_mut().for_each(|h| *h /= total);
        let mut cum = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for &h in &heights {
            acc += h / n as f64;
            cum.push(acc);
        }
        Ok(Density { heights, cum })
    }

    pub fn uniform(grid_n: usize) -> Result<Self> {
        Self::new(vec![1.0; grid_n])
    }

    pub fn grid_n(&self) -> usize {
        self.heights.len()
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.heights.len() as f64
    }

    pub fn cell_of(&self, x: f64) -> usize {
        ((x * self.heights.len() as f64).floor().max(0.0) as usize).min(self.heights.len() - 1)
    }

    pub fn height_at(&self, x: f64) -> f64 {
        self.heights[self.cell_of(x)]
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let i = self.cell_of(t);
        self.cum[i] + self.heights[i] * (t - i as f64 * self.cell_width())
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let i = self.cum.partition_point(|&c| c < u).clamp(1, self.heights.len()) - 1;
        let h = self.heights[i];
        let x0 = i as f64 * self.cell_width();
        if h > 0.0 {
            (x0 + (u - self.cum[i]) / h).clamp(x0, x0 + self.cell_width())
        } else {
            x0
        }
    }

    /// `∫_lo^hi ρ φ` by a Gauss rule on each grid cell piece.
    fn integrate_piece(&self, lo: f64, hi: f64, phi: &dyn Fn(f64) -> f64, acc: &mut Integral) {
        if hi <= lo {
            return;
        }
        let n = self.heights.len() as f64;
        let first = self.cell_of(lo);
        let last = (((hi * n).ceil()) as usize).min(self.heights.len()).saturating_sub(1);
        for c in first..=last {
            let a = lo.max(c as f64 / n);
            let b = hi.min((c + 1) as f64 / n);
            let h = self.heights[c];
            if b <= a || h == 0.0 {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (t, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
                acc.add(w * half * h, phi(mid + half * t));
            }
        }
    }
}

/// A Borel probability measure on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureDoc", into = "MeasureDoc")]
pub enum MeasureRep {
    Empirical(PointMasses),
    Density(Density),
    Atomic(PointMasses),
    CodedMarkov(HorseshoeMeasure),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum MeasureDoc {
    Empirical {
        points: Vec<f64>,
        #[serde(default)]
        weights: Vec<f64>,
    },
    Density {
        #[serde(default)]
        grid_n: Option<usize>,
        heights: Vec<f64>,
    },
    Atomic {
        atoms: Vec<(f64, f64)>,
    },
    Markov(HorseshoeMeasure),
    /// Input shorthand for the uniform density.
    Lebesgue {
        #[serde(default)]
        grid_n: Option<usize>,
    },
}

impl TryFrom<MeasureDoc> for MeasureRep {
    type Error = Error;

    fn try_from(doc: MeasureDoc) -> Result<Self> {
        match doc {
            MeasureDoc::Empirical { points, weights } => {
                let weights = if weights.is_empty() { vec![1.0; points.len()] } else { weights };
                if weights.len() != points.len() {
                    return Err(Error::DimensionMismatch { expected: points.len(), got: weights.len() });
                }
                MeasureRep::empirical(points.into_iter().zip(weights).collect())
            }
            MeasureDoc::Density { grid_n, heights } => {
                if let Some(n) = grid_n {
                    if n != heights.len() {
                        return Err(Error::DimensionMismatch { expected: n, got: heights.len() });
                    }
                }
                Ok(MeasureRep::Density(Density::new(heights)?))
            }
            MeasureDoc::Atomic { atoms } => MeasureRep::atomic(atoms),
            MeasureDoc::Markov(m) => Ok(MeasureRep::CodedMarkov(HorseshoeMeasure::new(m.system, m.law)?)),
            MeasureDoc::Lebesgue { grid_n } => MeasureRep::lebesgue(grid_n.unwrap_or(DEFAULT_GRID)),
        }
    }
}

impl From<MeasureRep> for MeasureDoc {
    fn from(m: MeasureRep) -> Self {
        match m {
            MeasureRep::Empirical(p) => MeasureDoc::Empirical { points: p.points, weights: p.weights },
            MeasureRep::Density(d) => MeasureDoc::Density { grid_n: Some(d.heights.len()), heights: d.heights },
            MeasureRep::Atomic(p) => MeasureDoc::Atomic { atoms: p.points.into_iter().zip(p.weights).collect() },
            MeasureRep::CodedMarkov(h) => MeasureDoc::Markov(h),
        }
    }
}

/// Result of a clamped integral.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Integral {
    pub value: f64,
    /// Number of integrand evaluations that hit the clamp.
    pub clamped: usize,
    /// Total weight carried by clamped evaluations.
    pub clamped_mass: f64,
    nonfinite: bool,
}

impl Integral {
    fn add(&mut self, weight: f64, v: f64) {
        if weight == 0.0 {
            return;
        }
        let v = if v.is_nan() || v == f64::INFINITY {
            self.nonfinite = true;
            0.0
        } else if v < CLAMP {
            self.clamped += 1;
            self.clamped_mass += weight;
            CLAMP
        } else {
            v
        };
        self.value += weight * v;
    }

    fn finish(self, what: &str) -> Result<Self> {
        if self.nonfinite || !self.value.is_finite() {
            return Err(Error::NonFinite(format!("integrating {what}")));
        }
        Ok(self)
    }
}

/// A metric ball (`bowen_depth == 1`) or Bowen ball `B_n(x, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: f64,
    pub radius: f64,
    pub bowen_depth: usize,
}

impl BallSpec {
    pub fn new(center: f64, radius: f64, bowen_depth: usize) -> Result<Self> {
        if !(radius > 0.0) || bowen_depth == 0 {
            return Err(Error::InvalidArgument("balls need radius > 0 and depth >= 1".into()));
        }
        Ok(BallSpec { center, radius, bowen_depth })
    }
}

/// Image of a measure plus the number of transfer-operator evaluations that
/// met a degenerate preimage.
#[derive(Debug, Clone)]
pub struct Pushforward {
    pub measure: MeasureRep,
    pub degenerate_cells: usize,
}

impl MeasureRep {
    pub fn lebesgue(grid_n: usize) -> Result<Self> {
        Ok(MeasureRep::Density(Density::uniform(grid_n)?))
    }

    pub fn density(heights: Vec<f64>) -> Result<Self> {
        Ok(MeasureRep::Density(Density::new(heights)?))
    }

    /// Empirical measure; exactly repeated points are merged.
    pub fn empirical(pairs: Vec<(f64, f64)>) -> Result<Self> {
        Ok(MeasureRep::Empirical(PointMasses::new(pairs, 0.0)?))
    }

    pub fn uniform_empirical(points: Vec<f64>) -> Result<Self> {
        Self::empirical(points.into_iter().map(|x| (x, 1.0)).collect())
    }

    /// Atomic measure; atoms within 1e-12 of each other are merged.
    pub fn atomic(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Ok(MeasureRep::Atomic(PointMasses::new(atoms, 1e-12)?))
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::atomic(vec![(x, 1.0)])
    }

    pub fn coded(m: HorseshoeMeasure) -> Self {
        MeasureRep::CodedMarkov(m)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MeasureRep::Empirical(_) => "empirical",
            MeasureRep::Density(_) => "density",
            MeasureRep::Atomic(_) => "atomic",
            MeasureRep::CodedMarkov(_) => "markov",
        }
    }

    /// Weighted points standing in for the measure where a discrete support
    /// is needed; coded measures are expanded into cylinder midpoints.
    pub fn discretize(&self) -> Result<PointMasses> {
        match self {
            MeasureRep::Empirical(p) | MeasureRep::Atomic(p) => Ok(p.clone()),
            MeasureRep::Density(d) => {
                let w = d.cell_width();
                PointMasses::new(d.heights.iter().enumerate().map(|(i, h)| ((i as f64 + 0.5) * w, h * w)).collect(), 0.0)
            }
            MeasureRep::CodedMarkov(h) => PointMasses::new(h.expand(EXPANSION_CAP)?, 0.0),
        }
    }

    /// `μ([0, t])`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        match self {
            MeasureRep::Empirical(p) | MeasureRep::Atomic(p) => Ok(p.cdf(t)),
            MeasureRep::Density(d) => Ok(d.cdf(t)),
            MeasureRep::CodedMarkov(h) => h.cdf(t),
        }
    }

    /// `μ([0, t))`.
    pub fn cdf_left(&self, t: f64) -> Result<f64> {
        match self {
            MeasureRep::Empirical(p) | MeasureRep::Atomic(p) => Ok(p.cdf_left(t)),
            _ => self.cdf(t),
        }
    }

    /// Mass of the half-open interval `[lo, hi)`.
    pub fn mass(&self, iv: &Interval) -> Result<f64> {
        if iv.hi <= iv.lo {
            return Ok(0.0);
        }
        let upper = if iv.hi >= 1.0 { self.cdf(iv.hi)? } else { self.cdf_left(iv.hi)? };
        Ok((upper - self.cdf_left(iv.lo)?).max(0.0))
    }

    pub fn mass_set(&self, set: &[Interval]) -> Result<f64> {
        set.iter().map(|iv| self.mass(iv)).sum()
    }

    /// `∫ φ dμ` with the clamp rule.
    pub fn integrate(&self, phi: &dyn Fn(f64) -> f64) -> Result<Integral> {
        self.integrate_on(&[Interval::UNIT], phi)
    }

    /// `∫_S φ dμ` over a union of half-open intervals, with the clamp rule.
    pub fn integrate_on(&self, set: &[Interval], phi: &dyn Fn(f64) -> f64) -> Result<Integral> {
        let mut acc = Integral::default();
        match self {
            MeasureRep::Density(d) => {
                for iv in set {
                    d.integrate_piece(iv.lo.max(0.0), iv.hi.min(1.0), phi, &mut acc);
                }
            }
            _ => {
                let pm = self.discretize()?;
                for iv in set {
                    let a = pm.points.partition_point(|&p| p < iv.lo);
                    let b = if iv.hi >= 1.0 {
                        pm.points.partition_point(|&p| p <= iv.hi)
                    } else {
                        pm.points.partition_point(|&p| p < iv.hi)
                    };
                    for i in a..b.max(a) {
                        acc.add(pm.weights[i], phi(pm.points[i]));
                    }
                }
            }
        }
        acc.finish("a measure")
    }

    /// Image measure `fμ`.
    pub fn pushforward(&self, map: &PiecewiseMap) -> Result<Pushforward> {
        match self {
            MeasureRep::Empirical(p) => {
                let pairs = p.points.iter().zip(&p.weights).map(|(&x, &w)| Ok((map.eval(x)?, w))).collect::<Result<_>>()?;
                Ok(Pushforward { measure: MeasureRep::empirical(pairs)?, degenerate_cells: 0 })
            }
            MeasureRep::Atomic(p) => {
                let pairs = p.points.iter().zip(&p.weights).map(|(&x, &w)| Ok((map.eval(x)?, w))).collect::<Result<_>>()?;
                Ok(Pushforward { measure: MeasureRep::atomic(pairs)?, degenerate_cells: 0 })
            }
            MeasureRep::Density(d) => {
                let n = d.grid_n();
                let w = d.cell_width();
                let mut degenerate = 0;
                let mut heights = Vec::with_capacity(n);
                for c in 0..n {
                    let y = (c as f64 + 0.5) * w;
                    let mut h = 0.0;
                    let mut flagged = false;
                    for (x, _) in map.preimages(y, 1e-13)? {
                        let slope = map.derivative(x)?.abs();
                        if slope < DEGENERATE_SLOPE {
                            flagged = true;
                        }
                        h += d.height_at(x) / slope.max(DEGENERATE_SLOPE);
                    }
                    if flagged {
                        degenerate += 1;
                    }
                    heights.push(h);
                }
                Ok(Pushforward { measure: MeasureRep::density(heights)?, degenerate_cells: degenerate })
            }
            MeasureRep::CodedMarkov(_) => Ok(Pushforward { measure: self.clone(), degenerate_cells: 0 }),
        }
    }

    /// Mass of a metric or Bowen ball; `map` is required for depth > 1.
    pub fn ball_mass(&self, ball: &BallSpec, map: Option<&PiecewiseMap>) -> Result<f64> {
        if ball.bowen_depth == 1 {
            let (lo, hi) = (ball.center - ball.radius, ball.center + ball.radius);
            return Ok((self.cdf_left(hi)? - self.cdf(lo)?).max(0.0));
        }
        let map = map.ok_or_else(|| Error::InvalidArgument("Bowen balls need a map".into()))?;
        let profile = self.bowen_profile(ball.center, ball.radius, ball.bowen_depth, map)?;
        Ok(profile.last().map(|p| p.0).unwrap_or(0.0))
    }

    /// `(μ(B_n(x, δ)), support points in the ball)` for `n = 1..=n_max`,
    /// by co-evolving the support points inside `B(x, δ)` with the orbit of `x`.
    pub fn bowen_profile(&self, x: f64, delta: f64, n_max: usize, map: &PiecewiseMap) -> Result<Vec<(f64, usize)>> {
        let pm = self.discretize()?;
        let range = pm.range_open(x - delta, x + delta);
        let mut alive: Vec<(f64, f64)> = range.map(|i| (pm.points[i], pm.weights[i])).collect();
        let mut center = x;
        let mut out = Vec::with_capacity(n_max);
        for step in 0..n_max {
            if step > 0 {
                center = map.eval(center)?;
                let mut next = Vec::with_capacity(alive.len());
                for (y, w) in alive {
                    let fy = map.eval(y)?;
                    if (fy - center).abs() < delta {
                        next.push((fy, w));
                    }
                }
                alive = next;
            }
            out.push((alive.iter().map(|p| p.1).sum(), alive.len()));
        }
        Ok(out)
    }

    /// Smallest `x` with `μ([0, x]) >= u`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        match self {
            MeasureRep::Empirical(p) | MeasureRep::Atomic(p) => Ok(p.quantile(u)),
            MeasureRep::Density(d) => Ok(d.quantile(u)),
            MeasureRep::CodedMarkov(_) => Ok(self.discretize()?.quantile(u)),
        }
    }

    /// `(coordinate, weight or height)` rows for CSV export.
    pub fn rows(&self) -> Result<Vec<(f64, f64)>> {
        match self {
            MeasureRep::Density(d) => {
                let w = d.cell_width();
                Ok(d.heights.iter().enumerate().map(|(i, &h)| (i as f64 * w, h)).collect())
            }
            _ => {
                let pm = self.discretize()?;
                Ok(pm.points.iter().copied().zip(pm.weights.iter().copied()).collect())
            }
        }
    }
}

/// Exact `∫_0^1 |F_μ − F_ν|` between piecewise-linear CDFs; coded measures
/// enter through their cylinder expansion.
pub fn w1_distance(mu: &MeasureRep, nu: &MeasureRep) -> Result<f64> {
    let mu = w1_form(mu)?;
    let nu = w1_form(nu)?;
    let mut breaks = vec![0.0, 1.0];
    for m in [&mu, &nu] {
        match m {
            MeasureRep::Density(d) => breaks.extend((1..d.grid_n()).map(|i| i as f64 * d.cell_width())),
            MeasureRep::Empirical(p) | MeasureRep::Atomic(p) => breaks.extend_from_slice(&p.points),
            MeasureRep::CodedMarkov(_) => unreachable!(),
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = b - a;
        if h <= 0.0 {
            continue;
        }
        let u0 = mu.cdf(a)? - nu.cdf(a)?;
        let u1 = mu.cdf_left(b)? - nu.cdf_left(b)?;
        total += if u0 * u1 >= 0.0 {
            0.5 * h * (u0.abs() + u1.abs())
        } else {
            0.5 * h * (u0 * u0 + u1 * u1) / (u0.abs() + u1.abs())
        };
    }
    Ok(total)
}

fn w1_form(m: &MeasureRep) -> Result<MeasureRep> {
    match m {
        MeasureRep::CodedMarkov(_) => Ok(MeasureRep::Atomic(m.discretize()?)),
        other => Ok(other.clone()),
    }
}

/// Denominators up to this bound are treated as exact rational seeds.
const RATIONAL_DENOMINATOR: u64 = 1 << 20;

/// `p/q` with `q <= RATIONAL_DENOMINATOR` and `|x - p/q| < 1e-15`, if any.
fn small_rational(x: f64) -> Option<(u64, u64)> {
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e12 {
            break;
        }
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > RATIONAL_DENOMINATOR {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h2 as f64 / k2 as f64).abs() < 1e-15 {
            return Some((h2, k2));
        }
        let frac = r - r.floor();
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// Uniform empirical measure on `f^{burn_in}(x0), ..., f^{burn_in+n-1}(x0)`.
///
/// For `x -> N x mod 1` floating-point iteration collapses onto 0 after about
/// 53 binary digits, so those orbits are followed symbolically: seeds within
/// 1e-15 of a rational with denominator at most 2^20 are iterated exactly
/// as rationals, other seeds by shifting their base-N expansion, extended
/// past double precision by digits drawn from a generator keyed on the seed.
pub fn birkhoff_measure(map: &PiecewiseMap, x0: f64, burn_in: usize, n: usize) -> Result<MeasureRep> {
    if n == 0 {
        return Err(Error::InvalidArgument("birkhoff averages need n >= 1".into()));
    }
    let points = match nfold_base(map) {
        Some(base) => digit_orbit(base, x0, burn_in, n)?,
        None => {
            let mut x = x0;
            for _ in 0..burn_in {
                x = map.eval(x)?;
            }
            map.orbit(x, n)?
        }
    };
    MeasureRep::uniform_empirical(points)
}

fn nfold_base(map: &PiecewiseMap) -> Option<u64> {
    let doc = map.document();
    if doc.kind == MapKind::Nfold {
        doc.params.get("n").and_then(|v| v.as_u64())
    } else {
        None
    }
}

fn digit_orbit(base: u64, x0: f64, burn_in: usize, n: usize) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&x0) {
        return Err(Error::Domain(x0));
    }
    if let Some((p, q)) = small_rational(x0) {
        let mut num = (p % q) as u128;
        let (b, q) = (base as u128, q as u128);
        for _ in 0..burn_in {
            num = num * b % q;
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(num as f64 / q as f64);
            num = num * b % q;
        }
        return Ok(out);
    }
    let bf = base as f64;
    let window = (53.0 / bf.log2()).ceil() as usize + 2;
    let mut digits = Vec::with_capacity(burn_in + n + window);
    let mut y = x0;
    for _ in 0..window {
        let d = (y * bf).floor();
        digits.push(d as u8);
        y = y * bf - d;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(x0.to_bits());
    while digits.len() < burn_in + n + window {
        digits.push(rng.gen_range(0..base) as u8);
    }
    let out = (burn_in..burn_in + n)
        .map(|i| {
            let mut v = 0.0;
            for &d in digits[i..i + window].iter().rev() {
                v = (v + d as f64) / bf;
            }
            v.min(1.0 - f64::EPSILON / 2.0)
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::horseshoe::{HorseshoeSystem, SymbolLaw};
    use crate::maps::{logistic, nfold, skewed_tent};
    use proptest::prelude::*;

    fn leb() -> MeasureRep {
        MeasureRep::lebesgue(1 << 12).unwrap()
    }

    fn bernoulli() -> MeasureRep {
        MeasureRep::coded(
            HorseshoeMeasure::new(HorseshoeSystem::nfold(2).unwrap(), SymbolLaw::Bernoulli { p: vec![0.3, 0.7] }).unwrap(),
        )
    }

    #[test]
    fn integrate_examples() {
        let f = nfold(2).unwrap();
        let v = leb().integrate(&|x| f.derivative(x).unwrap().abs().ln()).unwrap();
        assert!((v.value - 2f64.ln()).abs() < 1e-12);
        let v = MeasureRep::dirac(0.5).unwrap().integrate(&|x| x).unwrap();
        assert_eq!(v.value, 0.5);
        let t = skewed_tent(3.0).unwrap();
        let exact = 3f64.ln() / 3.0 + 2.0 / 3.0 * 1.5f64.ln();
        let v = leb().integrate(&|x| t.derivative(x).unwrap().abs().ln()).unwrap();
        assert!((v.value - exact).abs() < 1e-3, "{}", v.value);
        assert!((exact - 0.6365).abs() < 1e-4);
    }

    #[test]
    fn integrate_unit_is_one() {
        for m in [leb(), bernoulli(), MeasureRep::atomic(vec![(0.1, 0.2), (0.9, 0.8)]).unwrap()] {
            assert!((m.integrate(&|_| 1.0).unwrap().value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clamp_counts() {
        let v = MeasureRep::dirac(0.5).unwrap().integrate(&|x: f64| (4.0 - 8.0 * x).abs().ln()).unwrap();
        assert_eq!(v.value, CLAMP);
        assert_eq!(v.clamped, 1);
    }

    #[test]
    fn log_singularity_quadrature() {
        // ∫_0^1 ln|4 - 8x| dx = ln 4 - 1.
        let v = MeasureRep::lebesgue(1 << 16).unwrap().integrate(&|x: f64| (4.0 - 8.0 * x).abs().ln()).unwrap();
        assert!((v.value - (4f64.ln() - 1.0)).abs() < 1e-5, "{}", v.value);
    }

    #[test]
    fn pushforward_examples() {
        let pf = leb().pushforward(&nfold(2).unwrap()).unwrap();
        if let MeasureRep::Density(d) = &pf.measure {
            assert!(d.heights().iter().all(|&h| (h - 1.0).abs() < 1e-12));
        } else {
            panic!("density expected");
        }
        let pf = MeasureRep::dirac(0.1).unwrap().pushforward(&nfold(2).unwrap()).unwrap();
        assert!((pf.measure.cdf(0.2 + 1e-15).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(pf.measure.cdf(0.19).unwrap(), 0.0);
        let pf = leb().pushforward(&skewed_tent(3.0).unwrap()).unwrap();
        if let MeasureRep::Density(d) = &pf.measure {
            assert!(d.heights().iter().all(|&h| (h - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn invariance_within_grid() {
        for f in [nfold(3).unwrap(), skewed_tent(5.0).unwrap()] {
            let m = leb();
            let pf = m.pushforward(&f).unwrap();
            assert!(w1_distance(&pf.measure, &m).unwrap() < 1.0 / 4096.0);
        }
    }

    #[test]
    fn pushforward_flags_degenerate_cells() {
        let pf = MeasureRep::lebesgue(1 << 10).unwrap().pushforward(&logistic(4.0).unwrap()).unwrap();
        let total = pf.measure.integrate(&|_| 1.0).unwrap().value;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ball_examples() {
        let b = BallSpec::new(0.5, 0.1, 1).unwrap();
        assert!((leb().ball_mass(&b, None).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(MeasureRep::dirac(0.3).unwrap().ball_mass(&b, None).unwrap(), 0.0);
        assert!(BallSpec::new(0.5, 0.0, 1).is_err());
        assert!(leb().ball_mass(&BallSpec::new(0.5, 0.1, 2).unwrap(), None).is_err());
    }

    #[test]
    fn bowen_ball_doubling_matches_brute_force() {
        let f = nfold(2).unwrap();
        let m = MeasureRep::lebesgue(1 << 16).unwrap();
        let (x, delta) = (0.41, 0.05);
        for n in 1..=5 {
            // brute force on a fine grid, independent of the co-evolution code
            let grid = 1 << 18;
            let mut inside = 0usize;
            for i in 0..grid {
                let y = (i as f64 + 0.5) / grid as f64;
                let (mut a, mut b) = (x, y);
                let mut ok = true;
                for step in 0..n {
                    if step > 0 {
                        a = (2.0 * a) % 1.0;
                        b = (2.0 * b) % 1.0;
                    }
                    if (a - b).abs() >= delta {
                        ok = false;
                        break;
                    }
                }
                inside += ok as usize;
            }
            let brute = inside as f64 / grid as f64;
            let exact = 2.0 * delta * 0.5f64.powi(n as i32 - 1);
            assert!((brute - exact).abs() < 1e-4);
            let got = m.ball_mass(&BallSpec::new(x, delta, n).unwrap(), Some(&f)).unwrap();
            assert!((got - brute).abs() < 1e-4, "n={n} got={got} brute={brute}");
        }
    }

    #[test]
    fn w1_examples() {
        let d0 = MeasureRep::dirac(0.0).unwrap();
        let d1 = MeasureRep::dirac(1.0).unwrap();
        assert!((w1_distance(&d0, &d1).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(w1_distance(&leb(), &leb()).unwrap(), 0.0);
        let half = MeasureRep::dirac(0.5).unwrap();
        assert!((w1_distance(&leb(), &half).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn birkhoff_examples() {
        let f = nfold(2).unwrap();
        let m = birkhoff_measure(&f, 0.0, 0, 50).unwrap();
        assert!((m.cdf(0.0).unwrap() - 1.0).abs() < 1e-15);
        let m = birkhoff_measure(&f, 1.0 / 3.0, 0, 100).unwrap();
        match &m {
            MeasureRep::Empirical(p) => {
                assert_eq!(p.len(), 2);
                assert!(p.weights().iter().all(|&w| (w - 0.5).abs() < 1e-15));
            }
            _ => panic!(),
        }
        let t = skewed_tent(3.0).unwrap();
        let m = birkhoff_measure(&t, 0.6, 3, 10).unwrap();
        assert!((m.cdf(0.6 + 1e-9).unwrap() - 1.0).abs() < 1e-15);
        let m = birkhoff_measure(&f, 0.123_456_789_012_345, 100, 1_000_000).unwrap();
        assert!(w1_distance(&m, &leb()).unwrap() < 5e-3);
    }

    #[test]
    fn serde_round_trip() {
        for m in [leb(), bernoulli(), MeasureRep::atomic(vec![(0.25, 1.0), (0.75, 3.0)]).unwrap()] {
            let text = serde_json::to_string(&m).unwrap();
            let back: MeasureRep = serde_json::from_str(&text).unwrap();
            assert_eq!(back, m);
        }
        let m: MeasureRep = serde_json::from_str(r#"{"kind":"lebesgue","grid_n":1024}"#).unwrap();
        assert_eq!(m, MeasureRep::lebesgue(1024).unwrap());
        assert!(serde_json::from_str::<MeasureRep>(r#"{"kind":"density","heights":[1,1,1]}"#).is_err());
    }

    #[test]
    fn bernoulli_mass_of_first_cylinder() {
        let m = bernoulli();
        assert!((m.mass(&Interval::new(0.0, 0.5)).unwrap() - 0.3).abs() < 1e-12);
    }

    fn arb_measure() -> impl Strategy<Value = MeasureRep> {
        prop_oneof![
            prop::collection::vec((0.0f64..1.0, 0.01f64..1.0), 1..20).prop_map(|v| MeasureRep::atomic(v).unwrap()),
            prop::collection::vec(0.0f64..4.0, 16).prop_map(|mut h| {
                h[0] += 0.1;
                MeasureRep::density(h).unwrap()
            }),
        ]
    }

    proptest! {
        #[test]
        fn w1_is_a_metric(a in arb_measure(), b in arb_measure(), c in arb_measure()) {
            let ab = w1_distance(&a, &b).unwrap();
            let ba = w1_distance(&b, &a).unwrap();
            let bc = w1_distance(&b, &c).unwrap();
            let ac = w1_distance(&a, &c).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn pushforward_keeps_mass(m in arb_measure(), which in 0usize..3) {
            let f = [nfold(2).unwrap(), skewed_tent(3.0).unwrap(), logistic(3.8).unwrap()][which].clone();
            let pf = m.pushforward(&f).unwrap();
            prop_assert!((pf.measure.integrate(&|_| 1.0).unwrap().value - 1.0).abs() < 1e-12);
        }

        #[test]
        fn ball_mass_monotone(x in 0.0f64..1.0, r1 in 0.001f64..0.2, r2 in 0.001f64..0.2, n in 1usize..6) {
            let f = skewed_tent(3.0).unwrap();
            let m = MeasureRep::lebesgue(1 << 12).unwrap();
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let a = m.ball_mass(&BallSpec::new(x, lo, n).unwrap(), Some(&f)).unwrap();
            let b = m.ball_mass(&BallSpec::new(x, hi, n).unwrap(), Some(&f)).unwrap();
            let c = m.ball_mass(&BallSpec::new(x, lo, n + 1).unwrap(), Some(&f)).unwrap();
            prop_assert!(a <= b + 1e-12);
            prop_assert!(c <= a + 1e-12);
        }
    }
}
