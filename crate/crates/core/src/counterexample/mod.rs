//! The accumulating-horseshoe map: two expanding linear branches carrying a
//! low-entropy Bernoulli measure `μ`, and cosine blocks `J_k` piling up at a
//! critical point `z0` whose horseshoes `Λ_k` carry measures `ν_k → μ` with
//! entropy close to `(1/r) log λ`.
//!
//! Layout on `[0, 1]` (with `a = x*`, `δ0 = a / (2λ)`):
//! `I1 = [a, 2a]` and `I2 = [4a, 5a]` with slopes `±λ` on their
//! `δ0`-neighbourhoods, a hump with maximum at `3a` between them, a dip right
//! of `I2`, then `z0 = 6a` followed by the blocks and a monotone tail.
//! Everything outside the linear pieces and the blocks is a C¹ cubic.
//!
//! Block amplitudes leave the double range quickly, so block data are kept as
//! logarithms and the map carries floating-point shadows of the blocks
//! (amplitude clamped at `SHADOW_FLOOR`).

mod probe;

pub use probe::{semicontinuity_probe, ProbeFlags, ProbeReport, ProbeRow, BK_LAP_LIMIT};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::horseshoe::{HorseshoeMeasure, HorseshoeSystem, SymbolLaw};
use crate::interval::Interval;
use crate::maps::{Branch, BranchFn, CriticalFeature, MapDocument, MapKind, PiecewiseMap};
use crate::measures::{w1_distance, MeasureRep};

/// Symbols scanned before a return-time search gives up.
pub const RETURN_BUDGET: usize = 10_000_000;
/// Iterates tried before a covering search gives up.
pub const COVER_BUDGET: u32 = 10_000;
/// Smallest block amplitude `A_k^r` carried by the map itself.
pub const SHADOW_FLOOR: f64 = 1e-290;
/// `W1(ν_k, μ)` is kept nonincreasing from this block on.
const W1_FROM: usize = 4;

const ZETA2: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
const ZETA3: f64 = 1.202_056_903_159_594_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleParams {
    pub r: f64,
    pub lambda: f64,
    /// `x* = |I1| = |I2|`.
    pub a: f64,
    pub gamma0: f64,
    #[serde(rename = "K_blocks")]
    pub k_blocks: usize,
    /// Probabilities of the symbols `I1`, `I2` under `μ`.
    pub p_vec: Vec<f64>,
    pub seed_x0: u64,
    #[serde(rename = "L_big")]
    pub l_big: f64,
    /// `n_k` is the first admissible return at or after `return_spacing · k`.
    #[serde(default = "default_spacing")]
    pub return_spacing: u64,
    /// Level of the neighbourhood `V_m` used for the degenerate rate.
    #[serde(default = "default_rate_level")]
    pub rate_level: u32,
}

fn default_spacing() -> u64 {
    12
}

fn default_rate_level() -> u32 {
    14
}

/// `-p log p - (1-p) log(1-p)`.
fn binary_entropy(p: f64) -> f64 {
    let phi = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    phi(p) + phi(1.0 - p)
}

/// The `p > 1/2` with binary entropy `c`.
pub fn bernoulli_for_entropy(c: f64) -> Result<f64> {
    if !(c > 0.0 && c < std::f64::consts::LN_2) {
        return Err(Error::Constraint(format!("target entropy {c} must lie in (0, log 2)")));
    }
    let (mut lo, mut hi) = (0.5, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid) > c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl Default for CounterexampleParams {
    fn default() -> Self {
        let (r, lambda) = (2.0, 64.0);
        let c = 0.5 * std::f64::consts::LN_2.min(f64::ln(lambda) / r);
        let p = bernoulli_for_entropy(c).expect("default entropy is admissible");
        let a = 1.0 / 128.0;
        CounterexampleParams {
            r,
            lambda,
            a,
            gamma0: 0.5 * a,
            k_blocks: 8,
            p_vec: vec![p, 1.0 - p],
            seed_x0: 7,
            l_big: lambda,
            return_spacing: default_spacing(),
            rate_level: default_rate_level(),
        }
    }
}

impl CounterexampleParams {
    /// `h_μ = -Σ p log p`.
    pub fn c(&self) -> f64 {
        self.p_vec.iter().map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 }).sum()
    }

    pub fn delta0(&self) -> f64 {
        self.a / (2.0 * self.lambda)
    }

    pub fn z0(&self) -> f64 {
        6.0 * self.a
    }

    /// `(1/r) log λ`, the limit of `h_{ν_k}`.
    pub fn entropy_limit(&self) -> f64 {
        self.lambda.ln() / self.r
    }

    /// `((r-1)/(2r)) log λ`, the rate the `ν_k` eventually exceed.
    pub fn rate_threshold(&self) -> f64 {
        (self.r - 1.0) / (2.0 * self.r) * self.lambda.ln()
    }

    /// Top of the hump between `I1` and `I2`.
    fn hump_top(&self) -> f64 {
        self.edge_value() + 0.5 * self.lambda * (self.a - self.delta0())
    }

    /// `f` at the outer ends of the `δ0`-neighbourhoods facing the hump.
    fn edge_value(&self) -> f64 {
        self.a + self.lambda * self.a + 0.5 * self.a
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Constraint(m));
        if !(self.r > 1.0) {
            return fail(format!("r = {} must exceed 1", self.r));
        }
        if self.p_vec.len() != 2 || self.p_vec.iter().any(|&p| !(p > 0.0)) || (self.p_vec.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return fail("p_vec must be a positive probability pair".into());
        }
        let c0 = std::f64::consts::LN_2.min(self.entropy_limit());
        if !(self.c() < c0) {
            return fail(format!("c = {:.6} must be below min{{log 2, (1/r) log λ}} = {c0:.6}", self.c()));
        }
        if !(self.lambda >= 8.0) {
            return fail(format!("λ = {} must be at least 8", self.lambda));
        }
        if !(self.a > 0.0) || self.hump_top() > 1.0 {
            return fail(format!("a = {} leaves no room for f(I1) and the hump inside [0, 1]", self.a));
        }
        if self.k_blocks == 0 {
            return fail("K_blocks must be at least 1".into());
        }
        let budget: f64 = (1..=self.k_blocks).map(|k| self.gamma0 / (k * k) as f64).sum();
        if !(self.gamma0 > 0.0) || budget >= self.a {
            return fail(format!("Σ γ0/k² = {budget:.3e} must stay below a = {:.3e}", self.a));
        }
        if self.gamma0 * (ZETA2 + ZETA3) >= 2.0 * self.a {
            return fail("the blocks and their gaps do not fit in [z0, z0 + 2a]".into());
        }
        if !(self.l_big >= self.lambda) {
            return fail(format!("L = {} must be at least λ = {}", self.l_big, self.lambda));
        }
        if self.return_spacing == 0 || self.rate_level == 0 {
            return fail("return_spacing and rate_level must be positive".into());
        }
        Ok(())
    }
}

/// One oscillation block, with the huge and tiny quantities as logarithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub k: usize,
    pub n_k: u64,
    /// `log A_k`, `A_k = (δ0 λ^{-n_k} / 2)^{1/r}`.
    pub ln_a: f64,
    /// `log ω_k`, `ω_k = L / A_k`.
    pub ln_omega: f64,
    /// `log M_k`, `M_k = L γ0 (2 λ^{n_k} / δ0)^{1/r} / (2π k²)`.
    pub ln_m: f64,
    /// Phase centre (the right end, where the cosine peaks).
    pub c_k: f64,
    pub interval: Interval,
}

impl BlockSpec {
    /// `|J_k| = 2π M_k / ω_k`.
    pub fn length_from_oscillations(&self) -> f64 {
        2.0 * std::f64::consts::PI * (self.ln_m - self.ln_omega).exp()
    }

    /// `log(L A_k^{r-1})`, the log of `sup |f'|` on the block.
    pub fn ln_sup_deriv(&self, p: &CounterexampleParams) -> f64 {
        p.l_big.ln() + (p.r - 1.0) * self.ln_a
    }

    /// `log(2 M_k)`, the log of the number of laps.
    pub fn ln_laps(&self) -> f64 {
        std::f64::consts::LN_2 + self.ln_m
    }

    /// `A_k^r` is below `SHADOW_FLOOR`; the map then carries the block with
    /// amplitude `SHADOW_FLOOR` and every quantity comes from the logarithms.
    pub fn shadowed(&self, p: &CounterexampleParams) -> bool {
        p.r * self.ln_a < SHADOW_FLOOR.ln()
    }

    fn branch(&self, p: &CounterexampleParams, x0: f64) -> BranchFn {
        let ln_amp = (p.r * self.ln_a).max(SHADOW_FLOOR.ln());
        let amplitude = ln_amp.exp();
        let omega = (p.l_big.ln() - ln_amp / p.r).exp();
        BranchFn::Cosine { amplitude, omega, center: self.c_k, offset: x0 + amplitude }
    }
}

/// The coding of `x0`: a fixed prefix, then Bernoulli digits.
#[derive(Debug, Clone)]
pub struct SymbolicOrbit {
    symbols: Vec<u8>,
    rng: ChaCha8Rng,
    p0: f64,
}

impl SymbolicOrbit {
    pub fn new(prefix: &[u8], p0: f64, seed: u64) -> Self {
        SymbolicOrbit { symbols: prefix.to_vec(), rng: ChaCha8Rng::seed_from_u64(seed), p0 }
    }

    pub fn ensure(&mut self, len: usize) {
        while self.symbols.len() < len {
            let s = if self.rng.gen::<f64>() < self.p0 { 0 } else { 1 };
            self.symbols.push(s);
        }
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }
}

/// Data of the skeleton needed to place the blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaseData {
    pub x0: f64,
    pub z0: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub eta: f64,
    pub n1: u32,
    pub n2: u32,
    /// Coding of `x0` (0 for `I1`, 1 for `I2`), long enough for every block.
    pub symbols: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Counterexample {
    pub params: CounterexampleParams,
    pub map: PiecewiseMap,
    pub base: BaseData,
    pub blocks: Vec<BlockSpec>,
    /// The two-interval horseshoe `Λ` on `[a, 5a]`.
    pub system: HorseshoeSystem,
    pub mu: HorseshoeMeasure,
}

/// Inverse branches of `f` on the `I1`/`I2` linear pieces.
fn linear_system(p: &CounterexampleParams) -> Result<HorseshoeSystem> {
    let (a, l) = (p.a, p.lambda);
    HorseshoeSystem::affine(Interval::new(a, 5.0 * a), vec![(1.0 / l, a - a / l), (-1.0 / l, 5.0 * a + a / l)], 1)
}

fn hermite(lo: f64, hi: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> (Interval, BranchFn) {
    (Interval::new(lo, hi), BranchFn::Hermite { x0: lo, x1: hi, y0, y1, d0, d1 })
}

/// The parts of the map that do not depend on the blocks, split at `z0`.
fn skeleton(p: &CounterexampleParams, x0: f64) -> (Vec<(Interval, BranchFn)>, Vec<CriticalFeature>) {
    let (a, l, d0) = (p.a, p.lambda, p.delta0());
    let edge = p.edge_value();
    let left_min = a - d0 - 1.5 * a / l;
    let right_min = 5.0 * a + 2.0 * d0;
    let pieces = vec![
        hermite(0.0, left_min, 0.25 * a, 0.0, 0.0, 0.0),
        hermite(left_min, a - d0, 0.0, 0.5 * a, 0.0, l),
        (Interval::new(a - d0, 2.0 * a + d0), BranchFn::Affine { slope: l, intercept: a - l * a }),
        hermite(2.0 * a + d0, 3.0 * a, edge, p.hump_top(), l, 0.0),
        hermite(3.0 * a, 4.0 * a - d0, p.hump_top(), edge, 0.0, -l),
        (Interval::new(4.0 * a - d0, 5.0 * a + d0), BranchFn::Affine { slope: -l, intercept: a + 5.0 * l * a }),
        hermite(5.0 * a + d0, right_min, 0.5 * a, 0.25 * a, -l, 0.0),
        hermite(right_min, p.z0(), 0.25 * a, x0, 0.0, 0.0),
    ];
    let critical = vec![
        CriticalFeature::Point { x: 0.0, numerical: false },
        CriticalFeature::Point { x: left_min, numerical: false },
        CriticalFeature::Point { x: 3.0 * a, numerical: false },
        CriticalFeature::Point { x: right_min, numerical: false },
    ];
    (pieces, critical)
}

fn assemble(
    p: &CounterexampleParams,
    x0: f64,
    blocks: &[BlockSpec],
) -> Result<PiecewiseMap> {
    let (mut pieces, mut critical) = skeleton(p, x0);
    let mut x = p.z0();
    let (mut y, mut d) = (x0, 0.0);
    // blocks from the one nearest z0 outwards
    for b in blocks.iter().rev() {
        let f = b.branch(p, x0);
        let (yl, dl) = (f.eval(b.interval.lo), f.deriv(b.interval.lo));
        if b.interval.lo > x {
            pieces.push(hermite(x, b.interval.lo, y, yl, d, dl));
        }
        pieces.push((b.interval, f.clone()));
        x = b.interval.hi;
        y = f.eval(x);
        d = f.deriv(x);
    }
    let tail_end = 0.5;
    pieces.push(hermite(x, 1.0, y, tail_end, d, 0.0));
    critical.push(CriticalFeature::Cluster { lo: p.z0(), hi: x });
    critical.push(CriticalFeature::Point { x: 1.0, numerical: false });
    let branches = pieces.into_iter().map(|(dom, f)| Branch::new(dom, f, p.r)).collect();
    let doc = MapDocument::named(MapKind::Counterexample, serde_json::to_value(p).map_err(|e| Error::Document(e.to_string()))?);
    PiecewiseMap::from_branches(branches, Some(critical), false, doc)
}

/// First `count` times `n >= 1` with `|f^n(x0) - x0| <= eta`, read off the
/// coding of `x0`.
pub fn find_return_times(
    system: &HorseshoeSystem,
    orbit: &mut SymbolicOrbit,
    eta: f64,
    count: usize,
) -> Result<Vec<u64>> {
    let depth = system.depth_for(1e-17);
    orbit.ensure(depth);
    let x0 = decode(system, &orbit.symbols()[..depth])?;
    let mut out = Vec::with_capacity(count);
    let mut n = 1;
    while out.len() < count {
        if n > RETURN_BUDGET {
            return Err(Error::BudgetExceeded(format!("{} of {count} returns within {RETURN_BUDGET} symbols", out.len())));
        }
        orbit.ensure(n + depth);
        if (decode(system, &orbit.symbols()[n..n + depth])? - x0).abs() <= eta {
            out.push(n as u64);
        }
        n += 1;
    }
    Ok(out)
}

fn decode(system: &HorseshoeSystem, window: &[u8]) -> Result<f64> {
    let w: Vec<usize> = window.iter().map(|&s| s as usize).collect();
    system.point(&w)
}

/// Smallest `N` with `f^N(seed) ⊇ target`, by iterating interval images.
fn covering_time(map: &PiecewiseMap, seed: Interval, target: Interval) -> Result<u32> {
    let mut iv = seed;
    for n in 1..=COVER_BUDGET {
        iv = map.image_hull(iv.lo, iv.hi)?;
        if target.within(&iv, 0.0) {
            return Ok(n);
        }
    }
    Err(Error::BudgetExceeded(format!("no cover of [{}, {}] within {COVER_BUDGET} iterates", target.lo, target.hi)))
}

/// `(N1, N2)` with `f^{N1}([x0 - δ1, x0])` and `f^{N2}([x0, x0 + δ1])` covering `[z0 - a, z0 + 3a]`.
pub fn find_covering_times(map: &PiecewiseMap, x0: f64, delta1: f64, a: f64, z0: f64) -> Result<(u32, u32)> {
    let target = Interval::new(z0 - a, z0 + 3.0 * a);
    let n1 = covering_time(map, Interval::new(x0 - delta1, x0), target)?;
    let n2 = covering_time(map, Interval::new(x0, x0 + delta1), target)?;
    Ok((n1, n2))
}

/// The coded Markov measure of a horseshoe.
pub fn horseshoe_measure(system: HorseshoeSystem, prob: Vec<f64>) -> Result<MeasureRep> {
    Ok(MeasureRep::coded(HorseshoeMeasure::new(system, SymbolLaw::Bernoulli { p: prob })?))
}

/// Block intervals of the infinite family: `J_k` starts after the tail
/// `Σ_{j>k} (γ0/j² + γ0/j³)` measured from `z0`.
fn block_intervals(p: &CounterexampleParams) -> Vec<Interval> {
    let tail = |k: usize| {
        let partial: f64 = (1..=k).map(|j| 1.0 / (j * j) as f64 + 1.0 / (j * j * j) as f64).sum();
        p.gamma0 * (ZETA2 + ZETA3 - partial)
    };
    (1..=p.k_blocks)
        .map(|k| {
            let lo = p.z0() + tail(k);
            Interval::new(lo, lo + p.gamma0 / (k * k) as f64)
        })
        .collect()
}

impl BlockSpec {
    fn new(p: &CounterexampleParams, k: usize, n_k: u64, interval: Interval) -> Self {
        let ln_l = p.lambda.ln();
        let ln_a = ((p.delta0() / 2.0).ln() - n_k as f64 * ln_l) / p.r;
        let ln_omega = p.l_big.ln() - ln_a;
        let ln_m = (p.l_big * p.gamma0 / (2.0 * std::f64::consts::PI * (k * k) as f64)).ln()
            + ((2.0 / p.delta0()).ln() + n_k as f64 * ln_l) / p.r;
        BlockSpec { k, n_k, ln_a, ln_omega, ln_m, c_k: interval.hi, interval }
    }
}

/// Builds the map in two phases: the skeleton fixes `x0`, `δ1`, `η`, `N1`,
/// `N2` and the return times; the blocks are then placed using them.
pub fn build_counterexample(params: CounterexampleParams) -> Result<Counterexample> {
    params.validate()?;
    let p = &params;
    let system = linear_system(p)?;
    let mu = HorseshoeMeasure::new(system.clone(), SymbolLaw::Bernoulli { p: p.p_vec.clone() })?;

    // x0: I1 symbols then one I2 symbol pin it inside (x*, x* + δ0/2),
    // bounded away from the fixed point x*
    let mut zeros = 1;
    while system.cylinder(&[vec![0; zeros], vec![1]].concat())?.hi > p.a + 0.5 * p.delta0() {
        zeros += 1;
    }
    let prefix: Vec<u8> = [vec![0u8; zeros], vec![1]].concat();
    let mut orbit = SymbolicOrbit::new(&prefix, p.p_vec[0], p.seed_x0);
    let depth = system.depth_for(1e-17);
    orbit.ensure(depth);
    let x0 = decode(&system, &orbit.symbols()[..depth])?;
    let delta1 = x0 - p.a;
    if !(delta1 > 0.0 && delta1 < 0.5 * p.delta0()) {
        return Err(Error::Constraint(format!("x0 = {x0} does not lie in (x*, x* + δ0/2)")));
    }

    let skeleton_map = assemble(p, x0, &[])?;
    let (n1, n2) = find_covering_times(&skeleton_map, x0, delta1, p.a, p.z0())?;

    // η: shrink until every spot-checked x near x0 still covers [z0, z0 + 2a]
    let target = Interval::new(p.z0(), p.z0() + 2.0 * p.a);
    let mut eta = delta1 / 2.0;
    let mut accepted = false;
    for _ in 0..40 {
        let mut ok = true;
        for i in 0..10 {
            let x = x0 - eta + 2.0 * eta * i as f64 / 9.0;
            let mut iv = Interval::new(x - delta1, x);
            for _ in 0..n1 {
                iv = skeleton_map.image_hull(iv.lo, iv.hi)?;
            }
            ok &= target.within(&iv, 0.0);
        }
        if ok {
            accepted = true;
            break;
        }
        eta *= 0.5;
    }
    if !accepted {
        return Err(Error::Constraint("no η > 0 keeps the N1 covering near x0".into()));
    }

    // n_k: a return at or after spacing·k with an odd number of I2 symbols
    // before it. The orientation is then reversed, so f^{n_k + 1}(J_k) lies
    // left of f^{n_k}(x0) and N1 iterates finish the cover. Among those,
    // take the first that raises log(2 M_k) / R and does not move ν_k
    // farther from μ in W1.
    let intervals = block_intervals(p);
    let mu_rep = MeasureRep::coded(mu.clone());
    let mut blocks: Vec<BlockSpec> = Vec::with_capacity(p.k_blocks);
    let mut n = 1usize;
    let mut ones = 0usize;
    let (mut last_h, mut last_w1) = (f64::NEG_INFINITY, f64::INFINITY);
    orbit.ensure(depth + 1);
    for (k, iv) in (1..=p.k_blocks).zip(intervals) {
        let floor = p.return_spacing as usize * k;
        loop {
            if n > RETURN_BUDGET {
                return Err(Error::BudgetExceeded(format!("return time for block {k} not found")));
            }
            ones += orbit.symbols()[n - 1] as usize;
            orbit.ensure(n + depth + 1);
            let x = decode(&system, &orbit.symbols()[n..n + depth])?;
            let candidate = n >= floor && ones % 2 == 1 && (x - x0).abs() <= eta;
            n += 1;
            if candidate {
                let spec = BlockSpec::new(p, k, (n - 1) as u64, iv);
                let h = spec.ln_laps() / (spec.n_k + n1 as u64 + 1) as f64;
                let w1 = if h <= last_h {
                    f64::INFINITY
                } else if k < W1_FROM {
                    0.0
                } else {
                    let mut trial_blocks = blocks.clone();
                    trial_blocks.push(spec.clone());
                    let trial = Counterexample {
                        params: params.clone(),
                        map: assemble(p, x0, &trial_blocks)?,
                        base: BaseData {
                            x0,
                            z0: p.z0(),
                            delta0: p.delta0(),
                            delta1,
                            eta,
                            n1,
                            n2,
                            symbols: orbit.symbols().to_vec(),
                        },
                        blocks: trial_blocks,
                        system: system.clone(),
                        mu: mu.clone(),
                    };
                    match trial.nu_measure(&spec) {
                        Ok(nu) => w1_distance(&nu, &mu_rep)?,
                        Err(Error::Constraint(_)) => f64::INFINITY,
                        Err(e) => return Err(e),
                    }
                };
                if w1.is_finite() && w1 <= last_w1 {
                    last_h = h;
                    if k >= W1_FROM {
                        last_w1 = w1;
                    }
                    blocks.push(spec);
                    break;
                }
            }
        }
    }
    orbit.ensure(n + 4 * depth);
    let map = assemble(p, x0, &blocks)?;
    let base = BaseData {
        x0,
        z0: p.z0(),
        delta0: p.delta0(),
        delta1,
        eta,
        n1,
        n2,
        symbols: orbit.symbols().to_vec(),
    };
    Ok(Counterexample { params: params.clone(), map, base, blocks, system, mu })
}

impl Counterexample {
    /// `f^j(x0)`, decoded from the coding.
    pub fn orbit_point(&self, j: usize) -> Result<f64> {
        let depth = self.system.depth_for(1e-17);
        let s = &self.base.symbols;
        if j + depth > s.len() {
            return Err(Error::InvalidArgument(format!("orbit index {j} beyond the stored coding")));
        }
        decode(&self.system, &s[j..j + depth])
    }

    /// Inverse of `f` on the linear piece of symbol `s`.
    pub(crate) fn inverse_linear(&self, s: u8, y: f64) -> f64 {
        let (a, l) = (self.params.a, self.params.lambda);
        if s == 0 {
            a + (y - a) / l
        } else {
            5.0 * a - (y - a) / l
        }
    }

    /// `R = n_k + N1 + 1`.
    pub fn return_time(&self, b: &BlockSpec) -> u64 {
        b.n_k + self.base.n1 as u64 + 1
    }

    /// `h_{ν_k} = log(2 M_k) / R`.
    pub fn block_entropy(&self, b: &BlockSpec) -> f64 {
        b.ln_laps() / self.return_time(b) as f64
    }

    /// The lap horseshoe `Λ_k` with its uniform measure, while the lap
    /// count is a finite double.
    pub fn block_measure(&self, b: &BlockSpec) -> Result<HorseshoeMeasure> {
        let count = b.ln_laps().exp();
        if !count.is_finite() {
            return Err(Error::Constraint(format!("block {} has e^{:.1} laps", b.k, b.ln_laps())));
        }
        let system = HorseshoeSystem {
            coding: crate::horseshoe::Coding::Laps { count, block: b.interval },
            return_time: self.return_time(b),
        };
        HorseshoeMeasure::new(system, SymbolLaw::Uniform { count })
    }

    /// `D = f^{n_k + 1}(J_k) = [f^{n_k}(x0) - δ0, f^{n_k}(x0)]`.
    pub fn landing_interval(&self, b: &BlockSpec) -> Result<Interval> {
        let x = self.orbit_point(b.n_k as usize)?;
        Ok(Interval::new(x - self.base.delta0, x))
    }

    /// Checks `f^{N1}(D) ⊇ J_k` by interval images (the first `n_k + 1`
    /// steps are affine and tracked exactly by the coding).
    pub fn check_block_cover(&self, b: &BlockSpec) -> Result<bool> {
        let mut iv = self.landing_interval(b)?;
        for _ in 0..self.base.n1 {
            iv = self.map.image_hull(iv.lo, iv.hi)?;
        }
        Ok(b.interval.within(&iv, 0.0))
    }

    /// `(i, predicted |f^{i+1}(J_k)|, measured)` for the steps whose length
    /// is resolvable in double precision.
    pub fn orbit_growth(&self, b: &BlockSpec) -> Result<Vec<(u64, f64, f64)>> {
        let p = &self.params;
        let ln_len0 = std::f64::consts::LN_2 + p.r * b.ln_a;
        let mut parity = 0usize;
        let mut out = Vec::new();
        for i in 0..=b.n_k {
            if i > 0 {
                parity += self.base.symbols[i as usize - 1] as usize;
            }
            let len = (ln_len0 + i as f64 * p.lambda.ln()).exp();
            if len < 1e-10 || i == b.n_k {
                continue;
            }
            let x = self.orbit_point(i as usize)?;
            let iv = if parity.is_multiple_of(2) { Interval::new(x, x + len) } else { Interval::new(x - len, x) };
            let image = self.map.image_hull(iv.lo, iv.hi)?;
            out.push((i + 1, len * p.lambda, image.len()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn built() -> &'static Counterexample {
        use std::sync::OnceLock;
        static CE: OnceLock<Counterexample> = OnceLock::new();
        CE.get_or_init(|| build_counterexample(CounterexampleParams::default()).unwrap())
    }

    #[test]
    fn default_parameters() {
        let p = CounterexampleParams::default();
        p.validate().unwrap();
        assert!((p.c() - 0.5 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!(p.p_vec[0] > 0.5);
        let mut bad = p.clone();
        bad.p_vec = vec![0.5, 0.5];
        assert!(matches!(bad.validate(), Err(Error::Constraint(m)) if m.contains("c =")));
        let mut bad = p.clone();
        bad.gamma0 = p.a;
        assert!(matches!(bad.validate(), Err(Error::Constraint(m)) if m.contains("γ0")));
        let mut bad = p.clone();
        bad.l_big = 10.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn entropy_inversion() {
        for c in [0.1, 0.3466, 0.69] {
            let p = bernoulli_for_entropy(c).unwrap();
            let h = -(p * p.ln() + (1.0 - p) * (1.0 - p).ln());
            assert!((h - c).abs() < 1e-12);
        }
        assert!(bernoulli_for_entropy(0.7).is_err());
    }

    #[test]
    fn fixed_points_and_linear_pieces() {
        let ce = built();
        let (f, a, l) = (&ce.map, ce.params.a, ce.params.lambda);
        assert!((f.eval(a).unwrap() - a).abs() < 1e-15);
        assert!((f.eval(5.0 * a).unwrap() - a).abs() < 1e-15);
        // f(I_i) ⊇ I1 ∪ I2 at the endpoints
        for (lo, hi) in [(a, 2.0 * a), (4.0 * a, 5.0 * a)] {
            let im = f.image_hull(lo, hi).unwrap();
            assert!(Interval::new(a, 5.0 * a).within(&im, 1e-15));
        }
        let d0 = ce.params.delta0();
        for x in [a - d0 * 0.99, 2.0 * a + d0 * 0.99, 4.0 * a - d0 * 0.99, 5.0 * a + d0 * 0.99] {
            assert_eq!(f.derivative(x).unwrap().abs(), l);
        }
    }

    #[test]
    fn continuity_and_range() {
        let ce = built();
        let f = &ce.map;
        for b in f.branches().windows(2) {
            let x = b[0].domain.hi;
            let (l, r) = (b[0].func.eval(x), b[1].func.eval(x));
            assert!((l - r).abs() < 1e-12, "jump at {x}: {l} vs {r}");
            let (dl, dr) = (b[0].func.deriv(x), b[1].func.deriv(x));
            assert!((dl - dr).abs() < 1e-9 * (1.0 + dl.abs()), "kink at {x}");
        }
        for i in 0..=4096 {
            let y = f.eval(i as f64 / 4096.0).unwrap();
            assert!((0.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn block_geometry() {
        let ce = built();
        let p = &ce.params;
        let mut prev: Option<Interval> = None;
        let total: f64 = ce.blocks.iter().map(|b| b.interval.len()).sum();
        assert!(total < p.a);
        for b in &ce.blocks {
            let k2 = (b.k * b.k) as f64;
            assert!((b.interval.len() - p.gamma0 / k2).abs() < 1e-9);
            // |J_k| = 2π M_k / ω_k, with M_k and ω_k rebuilt from A_k alone
            let ln_a_r = (p.delta0() / 2.0).ln() - b.n_k as f64 * p.lambda.ln();
            assert!((p.r * b.ln_a - ln_a_r).abs() < 1e-9);
            let ln_omega = p.l_big.ln() - b.ln_a;
            let ln_m = (p.l_big * p.gamma0 / (2.0 * std::f64::consts::PI * k2)).ln() - ln_a_r / p.r;
            let len = 2.0 * std::f64::consts::PI * (ln_m - ln_omega).exp();
            assert!((len / b.interval.len() - 1.0).abs() < 1e-9);
            assert!((b.length_from_oscillations() / b.interval.len() - 1.0).abs() < 1e-9);
            assert!(b.interval.lo > p.z0() && b.interval.hi < p.z0() + 2.0 * p.a);
            if let Some(q) = prev {
                assert!(b.interval.hi < q.lo && b.c_k < q.hi);
            }
            prev = Some(b.interval);
            // the branch derivative bound equals L A^{r-1} while A^r is a normal double
            let i = ce.map.branch_index(b.interval.mid()).unwrap();
            let bound = ce.map.branches()[i].func.deriv_bound(b.interval.lo, b.interval.hi);
            let expect = p.l_big * ((p.r - 1.0) * b.ln_a).exp();
            if !b.shadowed(p) {
                assert!((bound / expect - 1.0).abs() < 1e-6);
                assert!((b.ln_sup_deriv(p) - expect.ln()).abs() < 1e-9);
            }
            let range = ce.map.branches()[i].func.range_on(b.interval.lo, b.interval.hi);
            assert!(range.contains_closed(ce.base.x0));
        }
    }

    #[test]
    fn return_times_are_admissible() {
        let ce = built();
        let mut last = 0;
        for b in &ce.blocks {
            assert!(b.n_k > last && b.n_k >= ce.params.return_spacing * b.k as u64);
            last = b.n_k;
            let ones = ce.base.symbols[..b.n_k as usize].iter().filter(|&&s| s == 1).count();
            assert_eq!(ones % 2, 1);
            let x = ce.orbit_point(b.n_k as usize).unwrap();
            assert!((x - ce.base.x0).abs() <= ce.base.eta);
        }
    }

    #[test]
    fn block_horseshoes_cover() {
        let ce = built();
        for b in &ce.blocks {
            assert!(ce.check_block_cover(b).unwrap(), "block {}", b.k);
            match ce.block_measure(b) {
                Ok(m) => assert!((m.entropy() - ce.block_entropy(b)).abs() < 1e-9),
                Err(e) => assert!(matches!(e, Error::Constraint(_)) && b.ln_laps() > f64::MAX.ln()),
            }
        }
    }

    #[test]
    fn orbit_growth_bookkeeping() {
        let ce = built();
        for b in &ce.blocks {
            let rows = ce.orbit_growth(b).unwrap();
            assert!(!rows.is_empty());
            for (_, predicted, measured) in rows {
                assert!((measured / predicted - 1.0).abs() < 1e-6, "{predicted} vs {measured}");
            }
            let ln_final = std::f64::consts::LN_2 + ce.params.r * b.ln_a + b.n_k as f64 * ce.params.lambda.ln();
            assert!((ln_final.exp() / ce.base.delta0 - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn covering_times() {
        let ce = built();
        let (p, base) = (&ce.params, &ce.base);
        let (n1, n2) = find_covering_times(&ce.map, base.x0, base.delta1, p.a, p.z0()).unwrap();
        assert_eq!((n1, n2), (base.n1, base.n2));
        // a longer seed interval never needs more iterates
        let target = Interval::new(p.z0() - p.a, p.z0() + 3.0 * p.a);
        let wider = covering_time(&ce.map, Interval::new(base.x0 - 2.0 * base.delta1, base.x0), target).unwrap();
        assert!(wider <= n1);
        // the spot checks of the construction, repeated on the final map
        for i in 0..10 {
            let x = base.x0 - base.eta + 2.0 * base.eta * i as f64 / 9.0;
            let mut iv = Interval::new(x - base.delta1, x);
            for _ in 0..n1 {
                iv = ce.map.image_hull(iv.lo, iv.hi).unwrap();
            }
            assert!(Interval::new(p.z0(), p.z0() + 2.0 * p.a).within(&iv, 0.0));
        }
    }

    #[test]
    fn returns_of_a_fixed_point() {
        let p = CounterexampleParams::default();
        let system = linear_system(&p).unwrap();
        let mut orbit = SymbolicOrbit::new(&[0; 64], 1.0, 0);
        let n = find_return_times(&system, &mut orbit, 1e-9, 10).unwrap();
        assert_eq!(n, (1..=10).collect::<Vec<u64>>());
    }

    #[test]
    fn return_times_against_hand_decoder() {
        let ce = built();
        let p = &ce.params;
        let system = linear_system(p).unwrap();
        let mut orbit = SymbolicOrbit::new(&[], 0.5, 11);
        orbit.ensure(64);
        // decode by composing the explicit inverses of the linear pieces
        let decode_by_hand = |s: &[u8]| s.iter().rev().fold(3.0 * p.a, |y, &c| ce.inverse_linear(c, y));
        let x0 = decode_by_hand(&orbit.symbols()[..12]);
        let eta = 1e-3 * p.a;
        let times = find_return_times(&system, &mut orbit, eta, 50).unwrap();
        let horizon = *times.last().unwrap() as usize;
        orbit.ensure(horizon + 12);
        let s = orbit.symbols().to_vec();
        let brute: Vec<u64> = (1..=horizon)
            .filter(|&n| (decode_by_hand(&s[n..n + 12]) - x0).abs() <= eta)
            .map(|n| n as u64)
            .collect();
        assert_eq!(brute, times);
    }

    #[test]
    fn map_document_round_trip() {
        let ce = built();
        let back = MapDocument::from_json(&ce.map.to_json()).unwrap();
        assert_eq!(back.document().kind, MapKind::Counterexample);
        for i in 0..200 {
            let x = i as f64 / 200.0;
            assert_eq!(ce.map.eval(x).unwrap(), back.eval(x).unwrap());
        }
    }

    #[test]
    fn estimators_skip_massless_dense_branches() {
        use crate::entropy::{folding_entropy_branch, metric_entropy_partition};
        let ce = built();
        let mu = MeasureRep::coded(ce.mu.clone());
        let c = ce.params.c();
        assert!((folding_entropy_branch(&ce.map, &mu).unwrap().value - c).abs() < 1e-9);
        let a = ce.params.a;
        let xi = vec![vec![Interval::new(0.0, 3.0 * a)], vec![Interval::new(3.0 * a, 1.0)]];
        assert!((metric_entropy_partition(&ce.map, &mu, &xi, 4).unwrap().value - c).abs() < 1e-9);
        let leb = MeasureRep::lebesgue(1 << 10).unwrap();
        assert!(matches!(folding_entropy_branch(&ce.map, &leb), Err(Error::CombinatorialBlowup { .. })));
    }
}
