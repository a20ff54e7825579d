//! The measures `ν_k` on the block horseshoes and the quantities that show
//! entropy jumping up in the limit `ν_k → μ`.
//!
//! `ν_k` is modelled by one uniform piece per iterate of its return cycle:
//! `J_k`, then the pieces `T_1, ..., T_{n_k}` that shadow the orbit of `x0`
//! and end in the landing set `S ⊂ D`, then `f^i(S)` for `i < N1`. Each piece
//! carries mass `1/R`, `R = n_k + N1 + 1`.

use serde::Serialize;

use super::{BlockSpec, Counterexample, CounterexampleParams};
use crate::entropy::{log_slope, rate_neighborhood, RateScheme};
use crate::error::{Error, Result};
use crate::interval::{set_contains, Interval};
use crate::measures::{w1_distance, MeasureRep};

/// Brin–Katok is attempted on `Λ_k` only below this many laps.
pub const BK_LAP_LIMIT: f64 = 1e6;
/// Atoms per resolvable piece of `ν_k`.
const ATOMS_PER_PIECE: usize = 256;
/// Pieces shorter than this become a single atom.
const MIN_PIECE: f64 = 1e-12;

/// `∫_{u0}^{u1} log(2 sqrt(u (1 - u))) du / (u1 - u0)`.
fn mean_log_sine(u0: f64, u1: f64) -> f64 {
    let g = |u: f64| if u > 0.0 { u * u.ln() - u } else { 0.0 };
    if u1 - u0 < 1e-9 {
        let u = 0.5 * (u0 + u1);
        return std::f64::consts::LN_2 + 0.5 * (u.ln() + (1.0 - u).ln());
    }
    let w = u1 - u0;
    let e_ln_u = (g(u1) - g(u0)) / w;
    let e_ln_1mu = (g(1.0 - u0) - g(1.0 - u1)) / w;
    std::f64::consts::LN_2 + 0.5 * (e_ln_u + e_ln_1mu)
}

impl Counterexample {
    /// `S_0 ⊂ D, S_1, ..., S_{N1} = J_k` with `f(S_i) = S_{i+1}`, found by
    /// pulling `J_k` back through the images of `D` one lap at a time.
    pub fn landing_chain(&self, b: &BlockSpec) -> Result<Vec<Interval>> {
        let n1 = self.base.n1 as usize;
        let mut images = vec![self.landing_interval(b)?];
        for i in 0..n1 {
            let d = images[i];
            images.push(self.map.image_hull(d.lo, d.hi)?);
        }
        let mut chain = vec![b.interval];
        for i in (0..n1).rev() {
            let t = *chain.last().expect("chain starts non-empty");
            let d = images[i];
            let mut found = None;
            for lap in self.map.laps() {
                let Some(piece) = lap.domain.intersect(&d) else { continue };
                let (y0, y1) = (self.map.eval(piece.lo)?, self.map.eval(piece.hi)?);
                if t.within(&Interval::new(y0.min(y1), y0.max(y1)), 0.0) {
                    let (x0, x1) = (self.map.lap_inverse(lap, t.lo)?, self.map.lap_inverse(lap, t.hi)?);
                    found = Some(Interval::new(x0.min(x1), x0.max(x1)));
                    break;
                }
            }
            let s = found.ok_or_else(|| {
                Error::Constraint(format!("block {}: step {i} of the landing chain straddles two laps", b.k))
            })?;
            chain.push(s);
        }
        chain.reverse();
        Ok(chain)
    }

    /// The `R` pieces of the return cycle of `ν_k`, in time order starting at `J_k`.
    pub fn nu_pieces(&self, b: &BlockSpec) -> Result<Vec<Interval>> {
        let chain = self.landing_chain(b)?;
        let n = b.n_k as usize;
        let mut shadow = vec![chain[0]];
        for j in (0..n).rev() {
            let t = *shadow.last().expect("non-empty");
            let s = self.base.symbols[j];
            let (x0, x1) = (self.inverse_linear(s, t.lo), self.inverse_linear(s, t.hi));
            shadow.push(Interval::new(x0.min(x1), x0.max(x1)));
        }
        shadow.reverse();
        // shadow = [T_1, ..., T_n, S]; S starts the chain part
        let mut pieces = Vec::with_capacity(self.return_time(b) as usize);
        pieces.push(b.interval);
        pieces.extend_from_slice(&shadow[..n]);
        pieces.extend_from_slice(&chain[..chain.len() - 1]);
        Ok(pieces)
    }

    /// `ν_k` as an atomic measure.
    pub fn nu_measure(&self, b: &BlockSpec) -> Result<MeasureRep> {
        let pieces = self.nu_pieces(b)?;
        let w = 1.0 / pieces.len() as f64;
        let mut atoms = Vec::new();
        for iv in pieces {
            if iv.len() > MIN_PIECE {
                let q = ATOMS_PER_PIECE as f64;
                atoms.extend((0..ATOMS_PER_PIECE).map(|i| (iv.lo + (i as f64 + 0.5) / q * iv.len(), w / q)));
            } else {
                atoms.push((iv.mid(), w));
            }
        }
        MeasureRep::atomic(atoms)
    }

    /// `|∫_{V_m} log|f'| dν_k|`. The block piece is integrated in closed
    /// form: on `Λ_k ∩ J_k`, `log|f'| = log(L A_k^{r-1}) + log(2 sqrt(u(1-u)))`
    /// with `u` uniform on the position of `S` inside `D`.
    pub fn rate_integral(&self, b: &BlockSpec, m: u32) -> Result<f64> {
        let v = rate_neighborhood(&self.map, m, RateScheme::Distance);
        let pieces = self.nu_pieces(b)?;
        let w = 1.0 / pieces.len() as f64;
        let d = self.landing_interval(b)?;
        let s = self.landing_chain(b)?[0];
        // u is the relative distance of f^{n_k + 1}(y) from f^{n_k}(x0)
        let (u0, u1) = ((d.hi - s.hi) / self.base.delta0, (d.hi - s.lo) / self.base.delta0);
        let mut total = 0.0;
        if set_contains(&v, b.interval.mid()) {
            total += w * (b.ln_sup_deriv(&self.params) + mean_log_sine(u0.max(0.0), u1.min(1.0)));
        }
        for iv in &pieces[1..] {
            let xs: Vec<f64> = if iv.len() > MIN_PIECE {
                let q = ATOMS_PER_PIECE as f64;
                (0..ATOMS_PER_PIECE).map(|i| iv.lo + (i as f64 + 0.5) / q * iv.len()).collect()
            } else {
                vec![iv.mid()]
            };
            let share = w / xs.len() as f64;
            total += xs.iter().filter(|&&x| set_contains(&v, x)).map(|&x| share * log_slope(&self.map, x)).sum::<f64>();
        }
        Ok(total.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub k: usize,
    pub n_k: u64,
    pub return_time: u64,
    pub w1: f64,
    /// `log(2 M_k) / R`.
    pub h_formula: f64,
    /// Entropy of the uniform lap horseshoe measure, when the lap count is a double.
    pub h_measure: Option<f64>,
    pub h_brin_katok: Option<f64>,
    /// Brin–Katok skipped because `2 M_k > BK_LAP_LIMIT`.
    pub bk_skipped: bool,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeFlags {
    pub entropy_increasing: bool,
    /// `W1(ν_k, μ)` nonincreasing from `k = 4` on (vacuous below 5 blocks).
    pub w1_nonincreasing: bool,
    /// `h_{ν_K} > h_μ + 0.2 ((1/r) log λ - c)`.
    pub entropy_gap: bool,
    /// `η(ν_K) > ((r-1)/(2r)) log λ`.
    pub rate_exceeds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub params: CounterexampleParams,
    pub rows: Vec<ProbeRow>,
    pub h_mu: f64,
    pub c: f64,
    /// `(1/r) log λ`.
    pub limit: f64,
    /// `((r-1)/(2r)) log λ`.
    pub rate_threshold: f64,
    pub flags: ProbeFlags,
}

/// Builds the map with `k_max` blocks and tabulates `ν_k` for `k = 1..=k_max`.
pub fn semicontinuity_probe(params: &CounterexampleParams, k_max: usize) -> Result<ProbeReport> {
    let mut p = params.clone();
    p.k_blocks = k_max;
    let ce = super::build_counterexample(p)?;
    probe_built(&ce)
}

impl Counterexample {
    /// Tabulates `ν_k` for every built block.
    pub fn probe(&self) -> Result<ProbeReport> {
        probe_built(self)
    }
}

pub(crate) fn probe_built(ce: &Counterexample) -> Result<ProbeReport> {
    let p = &ce.params;
    let mu = MeasureRep::coded(ce.mu.clone());
    let mut rows = Vec::with_capacity(ce.blocks.len());
    for b in &ce.blocks {
        let nu = ce.nu_measure(b)?;
        let bk_skipped = b.ln_laps() > BK_LAP_LIMIT.ln();
        rows.push(ProbeRow {
            k: b.k,
            n_k: b.n_k,
            return_time: ce.return_time(b),
            w1: w1_distance(&nu, &mu)?,
            h_formula: ce.block_entropy(b),
            h_measure: ce.block_measure(b).ok().map(|m| m.entropy()),
            h_brin_katok: None,
            bk_skipped,
            eta: ce.rate_integral(b, p.rate_level)?,
        });
    }
    let h_mu = ce.mu.entropy();
    let (c, limit, threshold) = (p.c(), p.entropy_limit(), p.rate_threshold());
    let last = rows.last().ok_or_else(|| Error::InvalidArgument("the probe needs at least one block".into()))?;
    let flags = ProbeFlags {
        entropy_increasing: rows.windows(2).all(|w| w[1].h_formula > w[0].h_formula),
        w1_nonincreasing: rows.iter().skip(3).collect::<Vec<_>>().windows(2).all(|w| w[1].w1 <= w[0].w1),
        entropy_gap: last.h_formula > h_mu + 0.2 * (limit - c),
        rate_exceeds: last.eta > threshold,
    };
    Ok(ProbeReport { params: p.clone(), rows, h_mu, c, limit, rate_threshold: threshold, flags })
}

#[cfg(test)]
mod tests {
    use super::super::build_counterexample;
    use super::*;

    #[test]
    fn mean_log_sine_closed_form() {
        // midpoint-rule oracle
        let (u0, u1) = (0.1, 0.7);
        let n = 200_000;
        let brute: f64 = (0..n)
            .map(|i| {
                let u = u0 + (i as f64 + 0.5) / n as f64 * (u1 - u0);
                (2.0 * (u * (1.0 - u)).sqrt()).ln()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean_log_sine(u0, u1) - brute).abs() < 1e-8);
        // over [0, 1]: log 2 + E log u = log 2 - 1
        assert!((mean_log_sine(0.0, 1.0) - (2f64.ln() - 1.0)).abs() < 1e-12);
        assert!((mean_log_sine(0.5, 0.5) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn landing_chain_maps_onto_the_block() {
        let ce = build_counterexample(CounterexampleParams { k_blocks: 4, ..Default::default() }).unwrap();
        for b in &ce.blocks {
            let chain = ce.landing_chain(b).unwrap();
            assert_eq!(chain.len(), ce.base.n1 as usize + 1);
            assert!(chain[0].within(&ce.landing_interval(b).unwrap(), 0.0));
            for w in chain.windows(2) {
                let img = ce.map.image_hull(w[0].lo, w[0].hi).unwrap();
                assert!((img.lo - w[1].lo).abs() < 1e-12 && (img.hi - w[1].hi).abs() < 1e-12);
            }
            let pieces = ce.nu_pieces(b).unwrap();
            assert_eq!(pieces.len() as u64, ce.return_time(b));
            // shadow pieces sit next to the orbit of x0
            for j in [1usize, 5, b.n_k as usize] {
                let x = ce.orbit_point(j - 1).unwrap();
                assert!(pieces[j].distance(x) < 2.0 * ce.base.delta0, "piece {j}");
            }
        }
    }

    #[test]
    fn probe_flags_hold_at_defaults() {
        let r = semicontinuity_probe(&CounterexampleParams::default(), 8).unwrap();
        assert_eq!(r.rows.len(), 8);
        for row in &r.rows {
            if let Some(h) = row.h_measure {
                assert!((row.h_formula - h).abs() < 1e-9);
            }
            assert!(row.bk_skipped && row.h_brin_katok.is_none());
        }
        assert!(r.flags.entropy_increasing, "{:?}", r.rows);
        assert!(r.flags.w1_nonincreasing, "{:?}", r.rows.iter().map(|x| x.w1).collect::<Vec<_>>());
        assert!(r.flags.entropy_gap);
        assert!(r.flags.rate_exceeds, "{}", r.rows.last().unwrap().eta);
        assert!((r.h_mu - r.c).abs() < 1e-12);
        assert!(r.rows.last().unwrap().h_formula < r.limit);
    }
}
