//! Coded invariant sets and their Markov measures.
//!
//! A horseshoe is a family of disjoint intervals each of whose images under
//! `f^T` covers all of them. When the inverse branches are affine (the
//! `[a, 5a]` horseshoe of the counterexample, or the full-branch codings of
//! `nfold`) points and cylinder masses are computed exactly from the coding.
//! The oscillation horseshoes have far too many laps to list, so they keep
//! only their count and location.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::maps::PiecewiseMap;

/// Largest number of cylinders a measure is expanded into.
pub const EXPANSION_CAP: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "coding", rename_all = "snake_case")]
pub enum Coding {
    /// Inverse branches `g_i(x) = slope_i x + shift_i`, each mapping `hull`
    /// onto the coded interval `i`.
    Affine { hull: Interval, inverse: Vec<(f64, f64)> },
    /// `count` monotone laps packed inside `block`.
    Laps { count: f64, block: Interval },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeSystem {
    pub coding: Coding,
    pub return_time: u64,
}

impl HorseshoeSystem {
    pub fn affine(hull: Interval, inverse: Vec<(f64, f64)>, return_time: u64) -> Result<Self> {
        if inverse.len() < 2 {
            return Err(Error::InvalidArgument("a horseshoe needs at least two symbols".into()));
        }
        for &(s, _) in &inverse {
            if !(s.abs() < 1.0 && s != 0.0) {
                return Err(Error::InvalidArgument(format!("inverse branch slope {s} is not a contraction")));
            }
        }
        let sys = HorseshoeSystem { coding: Coding::Affine { hull, inverse }, return_time };
        let iv = sys.intervals();
        for w in iv.windows(2) {
            if w[0].hi > w[1].lo {
                return Err(Error::InvalidArgument("coded intervals overlap".into()));
            }
        }
        Ok(sys)
    }

    /// The full-branch coding of `x -> N x mod 1`.
    pub fn nfold(n: u32) -> Result<Self> {
        let nf = n as f64;
        Self::affine(Interval::UNIT, (0..n).map(|i| (1.0 / nf, i as f64 / nf)).collect(), 1)
    }

    pub fn symbol_count(&self) -> f64 {
        match &self.coding {
            Coding::Affine { inverse, .. } => inverse.len() as f64,
            Coding::Laps { count, .. } => *count,
        }
    }

    /// Coded intervals in ascending order (affine codings only; empty otherwise).
    pub fn intervals(&self) -> Vec<Interval> {
        match &self.coding {
            Coding::Affine { hull, inverse } => {
                let mut v: Vec<Interval> = inverse.iter().map(|&(s, t)| image(*hull, s, t)).collect();
                v.sort_by(|a, b| a.lo.total_cmp(&b.lo));
                v
            }
            Coding::Laps { .. } => Vec::new(),
        }
    }

    fn affine_parts(&self) -> Result<(Interval, &[(f64, f64)])> {
        match &self.coding {
            Coding::Affine { hull, inverse } => Ok((*hull, inverse)),
            Coding::Laps { .. } => Err(Error::InvalidArgument("lap codings have no explicit decoder".into())),
        }
    }

    /// The cylinder `g_{s_0} ∘ ... ∘ g_{s_{d-1}}(hull)`.
    pub fn cylinder(&self, symbols: &[usize]) -> Result<Interval> {
        let (hull, inv) = self.affine_parts()?;
        let mut iv = hull;
        for &s in symbols.iter().rev() {
            let &(sl, sh) = inv.get(s).ok_or(Error::DimensionMismatch { expected: inv.len(), got: s + 1 })?;
            iv = image(iv, sl, sh);
        }
        Ok(iv)
    }

    /// Depth at which cylinders are shorter than `width`.
    pub fn depth_for(&self, width: f64) -> usize {
        match &self.coding {
            Coding::Affine { hull, inverse } => {
                let c = inverse.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
                ((width / hull.len()).ln() / c.ln()).ceil().max(1.0) as usize
            }
            Coding::Laps { .. } => 1,
        }
    }

    /// Decodes a symbol window to the point `g_{s_0} ∘ ... (hull midpoint)`.
    pub fn point(&self, symbols: &[usize]) -> Result<f64> {
        let (hull, inv) = self.affine_parts()?;
        let mut x = hull.mid();
        for &s in symbols.iter().rev() {
            let (sl, sh) = inv[s];
            x = sl * x + sh;
        }
        Ok(x)
    }

    /// Checks `f^T(I_i) ⊇ hull` for every coded interval by endpoint images.
    pub fn check_cover(&self, map: &PiecewiseMap) -> Result<bool> {
        let (hull, _) = self.affine_parts()?;
        for iv in self.intervals() {
            let mut im = iv;
            for _ in 0..self.return_time {
                im = map.image_hull(im.lo, im.hi)?;
            }
            if !hull.within(&im, 1e-12) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn image(iv: Interval, slope: f64, shift: f64) -> Interval {
    let (a, b) = (slope * iv.lo + shift, slope * iv.hi + shift);
    Interval::new(a.min(b), a.max(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum SymbolLaw {
    /// Independent symbols with fixed probabilities.
    Bernoulli { p: Vec<f64> },
    /// Stationary Markov chain with row-stochastic `matrix`.
    Markov { matrix: Vec<Vec<f64>> },
    /// Equal weights on `count` symbols (counts may exceed memory).
    Uniform { count: f64 },
}

/// A Markov measure carried by a horseshoe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeMeasure {
    pub system: HorseshoeSystem,
    pub law: SymbolLaw,
}

impl HorseshoeMeasure {
    pub fn new(system: HorseshoeSystem, law: SymbolLaw) -> Result<Self> {
        let l = system.symbol_count();
        let check_row = |row: &[f64]| -> Result<()> {
            if row.len() as f64 != l {
                return Err(Error::DimensionMismatch { expected: l as usize, got: row.len() });
            }
            if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument("probabilities must be nonnegative and sum to 1".into()));
            }
            Ok(())
        };
        match &law {
            SymbolLaw::Bernoulli { p } => check_row(p)?,
            SymbolLaw::Markov { matrix } => {
                if matrix.len() as f64 != l {
                    return Err(Error::DimensionMismatch { expected: l as usize, got: matrix.len() });
                }
                for row in matrix {
                    check_row(row)?;
                }
            }
            SymbolLaw::Uniform { count } => {
                if *count != l {
                    return Err(Error::DimensionMismatch { expected: l as usize, got: *count as usize });
                }
            }
        }
        Ok(HorseshoeMeasure { system, law })
    }

    /// Stationary distribution of the first symbol.
    pub fn stationary(&self) -> Vec<f64> {
        match &self.law {
            SymbolLaw::Bernoulli { p } => p.clone(),
            SymbolLaw::Uniform { count } => vec![1.0 / count; *count as usize],
            SymbolLaw::Markov { matrix } => {
                let n = matrix.len();
                let mut pi = vec![1.0 / n as f64; n];
                for _ in 0..10_000 {
                    let mut next = vec![0.0; n];
                    for i in 0..n {
                        for j in 0..n {
                            next[j] += pi[i] * matrix[i][j];
                        }
                    }
                    let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
                    pi = next;
                    if diff < 1e-15 {
                        break;
                    }
                }
                let s: f64 = pi.iter().sum();
                pi.iter().map(|p| p / s).collect()
            }
        }
    }

    fn row(&self, prev: usize) -> &[f64] {
        match &self.law {
            SymbolLaw::Bernoulli { p } => p,
            SymbolLaw::Markov { matrix } => &matrix[prev],
            SymbolLaw::Uniform { .. } => unreachable!("uniform laws are expanded before row access"),
        }
    }

    /// Entropy per iterate of `f`: the shift entropy divided by the return time.
    pub fn entropy(&self) -> f64 {
        let phi = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
        let h = match &self.law {
            SymbolLaw::Bernoulli { p } => p.iter().map(|&q| phi(q)).sum(),
            SymbolLaw::Uniform { count } => count.ln(),
            SymbolLaw::Markov { matrix } => {
                let pi = self.stationary();
                matrix.iter().zip(&pi).map(|(row, w)| w * row.iter().map(|&q| phi(q)).sum::<f64>()).sum()
            }
        };
        h / self.system.return_time as f64
    }

    fn symbol_rows(&self) -> Result<Option<Vec<f64>>> {
        match &self.law {
            SymbolLaw::Uniform { count } => {
                if *count > EXPANSION_CAP as f64 {
                    return Err(Error::CombinatorialBlowup { limit: EXPANSION_CAP });
                }
                Ok(Some(vec![1.0 / count; *count as usize]))
            }
            _ => Ok(None),
        }
    }

    /// `μ([0, t])`, by following the single cylinder chain that straddles `t`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        let (hull, inv) = self.system.affine_parts()?;
        let uniform = self.symbol_rows()?;
        let mut weights = uniform.clone().unwrap_or_else(|| self.stationary());
        let (mut a, mut b) = (0.0, 1.0);
        let mut y = t;
        for _ in 0..200 {
            let mut c = 0.0;
            let mut next: Option<(usize, bool, f64)> = None;
            for (j, &(sl, sh)) in inv.iter().enumerate() {
                let cyl = image(hull, sl, sh);
                if y >= cyl.hi {
                    c += weights[j];
                } else if y >= cyl.lo {
                    next = Some((j, sl > 0.0, (y - sh) / sl));
                }
            }
            match next {
                None => return Ok((a + b * c).clamp(0.0, 1.0)),
                Some((j, inc, y_next)) => {
                    let w = weights[j];
                    if inc {
                        a += b * c;
                        b *= w;
                    } else {
                        a += b * (c + w);
                        b *= -w;
                    }
                    y = y_next;
                    if b.abs() < 1e-18 {
                        return Ok((a + 0.5 * b).clamp(0.0, 1.0));
                    }
                    weights = match &uniform {
                        Some(u) => u.clone(),
                        None => self.row(j).to_vec(),
                    };
                }
            }
        }
        Ok((a + 0.5 * b).clamp(0.0, 1.0))
    }

    /// Cylinder masses at the deepest level with at most `cap` cylinders,
    /// as `(midpoint, mass)` pairs sorted by position.
    pub fn expand(&self, cap: usize) -> Result<Vec<(f64, f64)>> {
        let (_, inv) = self.system.affine_parts()?;
        let l = inv.len();
        let depth = ((cap as f64).ln() / (l as f64).ln()).floor().max(1.0) as usize;
        let first = self.symbol_rows()?.unwrap_or_else(|| self.stationary());
        // (cylinder, mass, last symbol); cylinders refine by applying the
        // inverse branches innermost, so track symbol words explicitly.
        let mut words: Vec<(Vec<usize>, f64)> = (0..l).map(|j| (vec![j], first[j])).collect();
        for _ in 1..depth {
            let mut next = Vec::with_capacity(words.len() * l);
            for (w, m) in &words {
                let last = *w.last().unwrap();
                let row: Vec<f64> = match &self.law {
                    SymbolLaw::Uniform { .. } => first.clone(),
                    _ => self.row(last).to_vec(),
                };
                for j in 0..l {
                    let mut w2 = w.clone();
                    w2.push(j);
                    next.push((w2, m * row[j]));
                }
            }
            words = next;
        }
        let mut out: Vec<(f64, f64)> = words
            .iter()
            .map(|(w, m)| Ok((self.system.cylinder(w)?.mid(), *m)))
            .collect::<Result<_>>()?;
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(out)
    }

    /// A typical symbol sequence of length `n`.
    pub fn sample_symbols(&self, seed: u64, n: usize) -> Result<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = self.symbol_rows()?.unwrap_or_else(|| self.stationary());
        let draw = |rng: &mut ChaCha8Rng, w: &[f64]| {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (j, &p) in w.iter().enumerate() {
                acc += p;
                if u < acc {
                    return j;
                }
            }
            w.len() - 1
        };
        let mut out = Vec::with_capacity(n);
        let mut s = draw(&mut rng, &first);
        out.push(s);
        for _ in 1..n {
            s = match &self.law {
                SymbolLaw::Uniform { .. } => draw(&mut rng, &first),
                _ => draw(&mut rng, self.row(s)),
            };
            out.push(s);
        }
        Ok(out)
    }

    /// Points `x, f^T x, f^{2T} x, ...` of a typical orbit, decoded from a
    /// sampled sequence by shifting the symbol window.
    pub fn sample_path(&self, seed: u64, n: usize) -> Result<Vec<f64>> {
        let depth = self.system.depth_for(1e-16);
        let symbols = self.sample_symbols(seed, n + depth)?;
        (0..n).map(|i| self.system.point(&symbols[i..i + depth])).collect()
    }
}
