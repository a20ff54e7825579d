//! Folding entropy: the pullback-partition estimator with its Δ / I
//! bookkeeping, and the direct disintegration estimator for densities.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{cond_term, phi_unchecked, EntropyReport};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::maps::PiecewiseMap;
use crate::measures::MeasureRep;
use crate::partitions::{cell_index, refine_classes, HolderParams, PartitionLadder, PullbackPartition};

/// Preimages with `|f'|` below this get their weight from the clamped slope.
const DEGENERATE_PREIMAGE: f64 = 1e-9;

/// Measure of every piece of `Γ_k^{-1,c}` and of every `f^{-1}P`.
#[derive(Debug, Clone)]
pub struct LevelMasses {
    pub k: u32,
    /// `μ(Q)` per regular component, aligned with `PullbackPartition::regular`.
    pub regular: Vec<f64>,
    /// `μ(B_k ∩ f^{-1}P)` per cell.
    pub degenerate_cell: Vec<f64>,
    /// `μ(f^{-1}P)` per cell.
    pub cell_total: Vec<f64>,
    pub b_mass: f64,
}

impl LevelMasses {
    pub fn compute(map: &PiecewiseMap, part: &PullbackPartition, mu: &MeasureRep) -> Result<Self> {
        let cells = 1usize << part.k;
        let regular: Vec<f64> = part.regular.iter().map(|c| mu.mass(&c.iv)).collect::<Result<_>>()?;
        let mut degenerate_cell = vec![0.0; cells];
        for c in &part.absorbed {
            degenerate_cell[c.cell] += mu.mass(&c.iv)?;
        }
        for iv in &part.dense {
            dense_cell_masses(map, mu, iv, part.k, &mut degenerate_cell)?;
        }
        let mut cell_total = degenerate_cell.clone();
        for (c, m) in part.regular.iter().zip(&regular) {
            cell_total[c.cell] += m;
        }
        let b_mass = degenerate_cell.iter().sum();
        Ok(LevelMasses { k: part.k, regular, degenerate_cell, cell_total, b_mass })
    }

    /// `-μ(Q) log(μ(Q) / μ(f^{-1} fQ))` for the regular component `i`.
    pub fn term(&self, part: &PullbackPartition, i: usize) -> f64 {
        cond_term(self.regular[i], self.cell_total[part.regular[i].cell])
    }

    pub fn delta1(&self) -> f64 {
        self.degenerate_cell.iter().zip(&self.cell_total).map(|(&b, &t)| cond_term(b, t)).sum()
    }

    pub fn delta2(&self, part: &PullbackPartition) -> f64 {
        (0..self.regular.len()).map(|i| self.term(part, i)).sum()
    }

    /// `H_μ(Γ_k^{-1,c} | f^{-1}Γ_k)` as `Σ_P μ(f^{-1}P) Σ_A φ(μ(A ∩ f^{-1}P) / μ(f^{-1}P))`.
    pub fn conditional_entropy(&self, part: &PullbackPartition) -> f64 {
        let mut inner = vec![0.0; self.cell_total.len()];
        for (i, c) in part.regular.iter().enumerate() {
            let t = self.cell_total[c.cell];
            if t > 0.0 {
                inner[c.cell] += phi_unchecked((self.regular[i] / t).min(1.0));
            }
        }
        self.cell_total
            .iter()
            .zip(&self.degenerate_cell)
            .zip(&inner)
            .map(|((&t, &b), &s)| if t > 0.0 { t * (s + phi_unchecked((b / t).min(1.0))) } else { 0.0 })
            .sum()
    }
}

/// Spreads the mass of an oscillating block over the cells hit by its image.
fn dense_cell_masses(map: &PiecewiseMap, mu: &MeasureRep, iv: &Interval, k: u32, out: &mut [f64]) -> Result<()> {
    match mu {
        MeasureRep::Density(d) => {
            let w = d.cell_width();
            let first = d.cell_of(iv.lo);
            let last = d.cell_of(iv.hi);
            for c in first..=last {
                let a = iv.lo.max(c as f64 * w);
                let b = iv.hi.min((c + 1) as f64 * w);
                if b > a {
                    let y = map.eval(0.5 * (a + b))?;
                    out[cell_index(y, k)] += d.heights()[c] * (b - a);
                }
            }
        }
        _ => {
            let pm = mu.discretize()?;
            let a = pm.points().partition_point(|&p| p < iv.lo);
            let b = pm.points().partition_point(|&p| p < iv.hi);
            for i in a..b.max(a) {
                let y = map.eval(pm.points()[i])?;
                out[cell_index(y, k)] += pm.weights()[i];
            }
        }
    }
    Ok(())
}

/// The ladder `Γ_0^{-1,c}, ..., Γ_{k_max}^{-1,c}` with masses, valid for any measure.
#[derive(Debug, Clone)]
pub struct LadderAnalysis {
    pub ladder: PartitionLadder,
    pub masses: Vec<LevelMasses>,
}

impl LadderAnalysis {
    pub fn build(map: &PiecewiseMap, mu: &MeasureRep, k_max: u32, hp: &HolderParams) -> Result<Self> {
        let ladder = PartitionLadder::build(map, k_max, hp)?;
        let masses = ladder.levels.iter().map(|p| LevelMasses::compute(map, p, mu)).collect::<Result<_>>()?;
        Ok(LadderAnalysis { ladder, masses })
    }

    /// `(I_{k,j}, I'_{k,j})` for `j <= k`.
    pub fn i_terms(&self, j: u32, k: u32) -> Result<(f64, f64)> {
        let fine = self.ladder.level(k);
        let classes = refine_classes(self.ladder.level(j), fine)?;
        let m = &self.masses[k as usize];
        let i: f64 = classes.w.iter().map(|&q| m.term(fine, q)).sum();
        let ip: f64 = classes.omega_prime.iter().map(|&q| m.term(fine, q)).sum();
        Ok((i, ip))
    }

    /// Smallest level `k >= 1` with `μ(B_k) < 0.01` (the largest level otherwise).
    pub fn default_anchor(&self) -> u32 {
        let k_max = self.ladder.k_max();
        (1..=k_max).find(|&k| self.masses[k as usize].b_mass < 0.01).unwrap_or(k_max)
    }

    /// Largest increase `I_{k',j} - I_{k,j}` (and the same for `I'`) over
    /// `1 <= j <= k < k' <= k_max`; non-positive when the sequences are
    /// non-increasing.
    pub fn monotonicity_violation(&self) -> Result<f64> {
        let k_max = self.ladder.k_max();
        let mut worst = f64::NEG_INFINITY;
        for j in 1..=k_max {
            let seq: Vec<(f64, f64)> = (j..=k_max).map(|k| self.i_terms(j, k)).collect::<Result<_>>()?;
            for w in seq.windows(2) {
                worst = worst.max(w[1].0 - w[0].0).max(w[1].1 - w[0].1);
            }
        }
        Ok(worst)
    }
}

fn check_critical_mass(map: &PiecewiseMap, mu: &MeasureRep) -> Result<()> {
    let m = mu.mass_set(&map.sublevel_set(1e-9))?;
    if m >= 1e-6 {
        return Err(Error::Precondition(format!("the measure gives mass {m:.3e} to {{|f'| < 1e-9}}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub k: u32,
    pub delta1: f64,
    pub delta2: f64,
    pub delta21: f64,
    pub delta22: f64,
    /// `I_{k,k0}`, defined for `k >= k0`.
    pub i_anchor: Option<f64>,
    pub b_mass: f64,
    pub conditional_entropy: f64,
    /// `|Δ_k^{(2)} - I_{k,k0} - Σ_{j=k0+1}^{k} I'_{k,j}|`, for `k >= k0`.
    pub split_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaTable {
    pub k0: u32,
    pub rows: Vec<DeltaRow>,
    pub monotonicity_violation: f64,
}

impl DeltaTable {
    pub fn max_split_residual(&self) -> f64 {
        self.rows.iter().filter_map(|r| r.split_residual).fold(0.0, f64::max)
    }
}

/// Δ_k^{(1)}, Δ_k^{(2,1)}, Δ_k^{(2,2)}, I_{k,k0} and μ(B_k) for `k = 1..=k_max`.
pub fn delta_decomposition(
    map: &PiecewiseMap,
    mu: &MeasureRep,
    k_max: u32,
    k0: Option<u32>,
    hp: &HolderParams,
) -> Result<DeltaTable> {
    check_critical_mass(map, mu)?;
    let analysis = LadderAnalysis::build(map, mu, k_max, hp)?;
    table_from(&analysis, k0)
}

fn table_from(analysis: &LadderAnalysis, k0: Option<u32>) -> Result<DeltaTable> {
    let k_max = analysis.ladder.k_max();
    let k0 = k0.unwrap_or_else(|| analysis.default_anchor());
    if k0 == 0 || k0 > k_max {
        return Err(Error::InvalidArgument(format!("anchor level {k0} outside 1..={k_max}")));
    }
    let mut rows = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        let part = analysis.ladder.level(k);
        let m = &analysis.masses[k as usize];
        let delta2 = m.delta2(part);
        let (delta21, _) = analysis.i_terms(k - 1, k)?;
        let (_, delta22) = analysis.i_terms(k, k)?;
        let (i_anchor, split_residual) = if k >= k0 {
            let (ia, _) = analysis.i_terms(k0, k)?;
            let mut rebuilt = ia;
            for j in (k0 + 1)..=k {
                rebuilt += analysis.i_terms(j, k)?.1;
            }
            (Some(ia), Some((delta2 - rebuilt).abs()))
        } else {
            (None, None)
        };
        rows.push(DeltaRow {
            k,
            delta1: m.delta1(),
            delta2,
            delta21,
            delta22,
            i_anchor,
            b_mass: m.b_mass,
            conditional_entropy: m.conditional_entropy(part),
            split_residual,
        });
    }
    Ok(DeltaTable { k0, rows, monotonicity_violation: analysis.monotonicity_violation()? })
}

/// `H_μ(Γ_k^{-1,c} | f^{-1}Γ_k)` for `k = 1..=k_max`; the value is the level-`k_max` term.
pub fn folding_entropy_partition(
    map: &PiecewiseMap,
    mu: &MeasureRep,
    k_max: u32,
    hp: &HolderParams,
    k0: Option<u32>,
) -> Result<EntropyReport> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    check_critical_mass(map, mu)?;
    let analysis = LadderAnalysis::build(map, mu, k_max, hp)?;
    let table = table_from(&analysis, k0)?;
    let last = table.rows.last().expect("k_max >= 1");
    let mut report = EntropyReport::new(
        "folding_partition",
        last.conditional_entropy,
        json!({ "k_max": k_max, "k0": table.k0, "holder": hp }),
    );
    report.index_name = "k".into();
    report.index = table.rows.iter().map(|r| r.k as f64).collect();
    let col = |f: &dyn Fn(&DeltaRow) -> f64| table.rows.iter().map(f).collect::<Vec<f64>>();
    report.push_series("conditional_entropy", col(&|r| r.conditional_entropy));
    report.push_series("delta1", col(&|r| r.delta1));
    report.push_series("delta2", col(&|r| r.delta2));
    report.push_series("delta21", col(&|r| r.delta21));
    report.push_series("delta22", col(&|r| r.delta22));
    report.push_series("i_anchor", col(&|r| r.i_anchor.unwrap_or(f64::NAN)));
    report.push_series("b_mass", col(&|r| r.b_mass));
    let identity = table.rows.iter().map(|r| (r.conditional_entropy - r.delta1 - r.delta2).abs()).fold(0.0, f64::max);
    if identity > 1e-9 {
        report.warnings.push(format!("Δ(1) + Δ(2) differs from the conditional entropy by {identity:.3e}"));
    }
    if last.b_mass > 0.05 {
        report.warnings.push(format!(
            "degenerate component still carries mass {:.3} at level {k_max}; the estimate is resolution limited",
            last.b_mass
        ));
    }
    let slivers: usize = analysis.ladder.levels.iter().map(|p| p.slivers).sum();
    if slivers > 0 {
        report.warnings.push(format!("{slivers} sub-1e-12 components merged into neighbours"));
    }
    Ok(report)
}

/// `F = ∫ Σ_i φ(p_i(y)) d(fμ)(y)` with `p_i = ρ(x_i) / (|f'(x_i)| (Lρ)(y))`
/// over the preimages `x_i` of each grid cell centre `y`.
pub fn folding_entropy_branch(map: &PiecewiseMap, mu: &MeasureRep) -> Result<EntropyReport> {
    super::check_dense(map, mu)?;
    let MeasureRep::Density(d) = mu else {
        return folding_entropy_cells(map, mu);
    };
    let n = d.grid_n();
    let w = d.cell_width();
    let per_cell: Vec<Result<(f64, f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|c| {
            let y = (c as f64 + 0.5) * w;
            let mut g = Vec::new();
            let mut flagged = 0;
            for (x, _) in map.preimages(y, 1e-13)? {
                let slope = map.derivative(x)?.abs();
                if slope < DEGENERATE_PREIMAGE {
                    flagged += 1;
                }
                g.push(d.height_at(x) / slope.max(DEGENERATE_PREIMAGE));
            }
            let l: f64 = g.iter().sum();
            let h = if l > 0.0 { g.iter().map(|&gi| phi_unchecked(gi / l)).sum() } else { 0.0 };
            Ok((l * w, h, flagged))
        })
        .collect();
    let (mut mass, mut f, mut flagged) = (0.0, 0.0, 0);
    for r in per_cell {
        let (m, h, fl) = r?;
        mass += m;
        f += m * h;
        flagged += fl;
    }
    if !(mass > 0.0) {
        return Err(Error::NonFinite("the transfer operator returned no mass".into()));
    }
    let mut report = EntropyReport::new("folding_branch", f / mass, json!({ "grid_n": n }));
    if flagged > 0 {
        report.warnings.push(format!("{flagged} preimages with |f'| < 1e-9 weighted by the clamped slope"));
    }
    Ok(report)
}

/// Image resolution for measures without a density.
const BRANCH_LEVEL: u32 = 16;

/// `H_μ(laps | f^{-1}Γ_k)` at a fine dyadic level: the disintegration over
/// preimages read off the masses `μ(lap ∩ f^{-1}P)`.
fn folding_entropy_cells(map: &PiecewiseMap, mu: &MeasureRep) -> Result<EntropyReport> {
    super::check_dense(map, mu)?;
    let cells = 1usize << BRANCH_LEVEL;
    let w = 1.0 / cells as f64;
    let per_cell: Vec<Result<(f64, f64)>> = (0..cells)
        .into_par_iter()
        .map(|c| {
            let (lo, hi) = (c as f64 * w, (c + 1) as f64 * w);
            let mut masses = Vec::new();
            for lap in map.laps() {
                let img = map.lap_image(lap);
                let (a, b) = (lo.max(img.lo), hi.min(img.hi));
                if b <= a {
                    continue;
                }
                let (x1, x2) = (map.lap_inverse(lap, a)?, map.lap_inverse(lap, b)?);
                masses.push(mu.mass(&Interval::new(x1.min(x2), x1.max(x2)))?);
            }
            let t: f64 = masses.iter().sum();
            Ok((t, masses.iter().map(|&m| cond_term(m, t)).sum()))
        })
        .collect();
    let (mut mass, mut f) = (0.0, 0.0);
    for r in per_cell {
        let (m, h) = r?;
        mass += m;
        f += h;
    }
    if !(mass > 0.0) {
        return Err(Error::NonFinite("no mass found on any lap".into()));
    }
    Ok(EntropyReport::new("folding_branch", f / mass, json!({ "level": BRANCH_LEVEL })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{identity, logistic, nfold, skewed_tent};
    use crate::partitions::estimate_holder;

    fn tent_value(p: f64) -> f64 {
        p.ln() / p + (p - 1.0) / p * (p / (p - 1.0)).ln()
    }

    #[test]
    fn branch_estimator_closed_forms() {
        let leb = MeasureRep::lebesgue(1 << 12).unwrap();
        for n in 2..=4 {
            let r = folding_entropy_branch(&nfold(n).unwrap(), &leb).unwrap();
            assert!((r.value - (n as f64).ln()).abs() < 1e-6);
        }
        let r = folding_entropy_branch(&skewed_tent(3.0).unwrap(), &leb).unwrap();
        assert!((r.value - tent_value(3.0)).abs() < 1e-4);
        assert!((tent_value(3.0) - 0.636514).abs() < 1e-6);
        assert_eq!(folding_entropy_branch(&identity(), &leb).unwrap().value, 0.0);
        assert!(folding_entropy_branch(&nfold(2).unwrap(), &MeasureRep::dirac(0.2).unwrap()).unwrap().value.abs() < 1e-15);
    }

    /// Independent brute force: sum over the 2^10 cells of the image grid of
    /// the preimage weights of the doubling map, written out by hand.
    fn doubling_brute_force(rho: &dyn Fn(f64) -> f64) -> f64 {
        let n = 1 << 10;
        let (mut mass, mut f) = (0.0, 0.0);
        for c in 0..n {
            let y = (c as f64 + 0.5) / n as f64;
            let (a, b) = (rho(y / 2.0) / 2.0, rho((y + 1.0) / 2.0) / 2.0);
            let l = a + b;
            let phi = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
            mass += l / n as f64;
            f += l / n as f64 * (phi(a / l) + phi(b / l));
        }
        f / mass
    }

    #[test]
    fn branch_estimator_against_brute_force() {
        let n = 1 << 10;
        let steps = |lo: f64, hi: f64| move |x: f64| if x < 0.5 { lo } else { hi };
        for (lo, hi) in [(2.0, 0.0), (1.5, 0.5), (0.7, 1.3)] {
            let rho = steps(lo, hi);
            let heights: Vec<f64> = (0..n).map(|i| rho((i as f64 + 0.5) / n as f64)).collect();
            let mu = MeasureRep::density(heights).unwrap();
            let r = folding_entropy_branch(&nfold(2).unwrap(), &mu).unwrap();
            assert!((r.value - doubling_brute_force(&rho)).abs() < 1e-12);
        }
        let phi = |p: f64| -p * p.ln();
        assert!((doubling_brute_force(&steps(1.5, 0.5)) - (phi(0.75) + phi(0.25))).abs() < 1e-12);
        assert!((phi(0.75) + phi(0.25) - 0.5623).abs() < 1e-4);
    }

    #[test]
    fn partition_estimator_closed_forms() {
        let leb = MeasureRep::lebesgue(1 << 16).unwrap();
        let map = nfold(2).unwrap();
        let hp = estimate_holder(&map, 2.0).unwrap();
        let r = folding_entropy_partition(&map, &leb, 10, &hp, None).unwrap();
        assert!((r.value - 2f64.ln()).abs() < 1e-6);
        // the corner inflates the Hölder constant, so the default ε0 swallows everything
        let map = skewed_tent(3.0).unwrap();
        let hp = estimate_holder(&map, 2.0).unwrap();
        let r = folding_entropy_partition(&map, &leb, 6, &hp, None).unwrap();
        assert!(r.value.abs() < 1e-12 && !r.warnings.is_empty());
        let hp = hp.with_eps0(1.0).unwrap();
        let r = folding_entropy_partition(&map, &leb, 12, &hp, None).unwrap();
        assert!((r.value - tent_value(3.0)).abs() < 5e-3, "{}", r.value);
        let r = folding_entropy_partition(&identity(), &leb, 6, &hp, None).unwrap();
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn doubling_decomposition() {
        let leb = MeasureRep::lebesgue(1 << 12).unwrap();
        let map = nfold(2).unwrap();
        let hp = estimate_holder(&map, 2.0).unwrap();
        let t = delta_decomposition(&map, &leb, 6, None, &hp).unwrap();
        assert_eq!(t.k0, 1);
        for r in &t.rows {
            assert!(r.delta1.abs() < 1e-15 && r.delta22.abs() < 1e-15);
            assert!((r.delta21 - 2f64.ln()).abs() < 1e-9);
            assert!((r.i_anchor.unwrap() - 2f64.ln()).abs() < 1e-9);
        }
        assert!(t.max_split_residual() < 1e-9);
        assert!(t.monotonicity_violation <= 1e-9);
    }

    #[test]
    fn skewed_tent_decomposition() {
        let leb = MeasureRep::lebesgue(1 << 14).unwrap();
        let map = skewed_tent(3.0).unwrap();
        let hp = estimate_holder(&map, 2.0).unwrap().with_eps0(1.0).unwrap();
        let t = delta_decomposition(&map, &leb, 10, None, &hp).unwrap();
        let ia: Vec<f64> = t.rows.iter().filter_map(|r| r.i_anchor).collect();
        assert!(ia.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        assert!((ia.last().unwrap() - tent_value(3.0)).abs() < 5e-3);
        assert!(t.rows.iter().all(|r| r.delta1 == 0.0));
    }

    #[test]
    fn logistic_bookkeeping() {
        let leb = MeasureRep::lebesgue(1 << 14).unwrap();
        let map = logistic(4.0).unwrap();
        let hp = estimate_holder(&map, 2.0).unwrap().with_eps0(0.05).unwrap();
        let t = delta_decomposition(&map, &leb, 10, Some(2), &hp).unwrap();
        for r in &t.rows {
            assert!((r.conditional_entropy - r.delta1 - r.delta2).abs() < 1e-9);
            assert!((r.delta2 - r.delta21 - r.delta22).abs() < 1e-9, "{:?}", r);
        }
        assert!(t.max_split_residual() < 1e-9);
        assert!(t.monotonicity_violation <= 1e-9);
    }

    #[test]
    fn precondition_rejects_critical_atoms() {
        let map = logistic(4.0).unwrap();
        let hp = estimate_holder(&map, 2.0).unwrap();
        let r = folding_entropy_partition(&map, &MeasureRep::dirac(0.5).unwrap(), 4, &hp, None);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
