//! `H_μ(ξ | ⋁_{i=1}^n f^{-i}ξ)` by repeated pullback of interval partitions.

use std::collections::HashMap;

use serde_json::json;

use super::{cond_term, EntropyReport, Partition};
use crate::error::{Error, Result};
use crate::interval::{total_length, Interval};
use crate::maps::PiecewiseMap;
use crate::measures::{w1_distance, MeasureRep};

/// Refinements with more atoms than this are refused.
pub const MAX_CELLS: usize = 10_000_000;

/// An interval piece of a partition element, tagged with the element id.
type Atom = (Interval, usize);

/// The monotone pieces (laps) of the map, one interval per element.
pub fn branch_partition(map: &PiecewiseMap) -> Partition {
    map.laps().iter().map(|l| vec![l.domain]).collect()
}

fn atoms_of(xi: &Partition) -> Result<Vec<Atom>> {
    let mut atoms: Vec<Atom> = xi
        .iter()
        .enumerate()
        .flat_map(|(i, el)| el.iter().filter(|iv| !iv.is_empty()).map(move |&iv| (iv, i)))
        .collect();
    atoms.sort_by(|a, b| a.0.lo.total_cmp(&b.0.lo));
    let ivs: Vec<Interval> = atoms.iter().map(|a| a.0).collect();
    let overlap = ivs.windows(2).any(|w| w[1].lo < w[0].hi - 1e-12);
    if overlap || (total_length(&ivs) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("ξ must tile [0, 1) by disjoint intervals".into()));
    }
    Ok(atoms)
}

/// `f^{-1}` of a sorted atom list, lap by lap.
fn pullback(map: &PiecewiseMap, eta: &[Atom]) -> Result<Vec<Atom>> {
    let mut out = Vec::new();
    for lap in map.laps() {
        let img = map.lap_image(lap);
        let start = eta.partition_point(|a| a.0.hi <= img.lo);
        for &(iv, label) in &eta[start..] {
            if iv.lo >= img.hi {
                break;
            }
            let (a, b) = (iv.lo.max(img.lo), iv.hi.min(img.hi));
            if b <= a {
                continue;
            }
            let (x1, x2) = (map.lap_inverse(lap, a)?, map.lap_inverse(lap, b)?);
            if x1 != x2 {
                if out.len() == MAX_CELLS {
                    return Err(Error::CombinatorialBlowup { limit: MAX_CELLS });
                }
                out.push((Interval::new(x1.min(x2), x1.max(x2)), label));
            }
        }
    }
    out.sort_by(|a, b| a.0.lo.total_cmp(&b.0.lo));
    Ok(out)
}

/// Common refinement of two sorted atom lists, as `(piece, left label, right label)`.
fn join(left: &[Atom], right: &[Atom]) -> Vec<(Interval, usize, usize)> {
    let mut out = Vec::with_capacity(left.len() + right.len());
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        let (a, b) = (&left[i], &right[j]);
        let lo = a.0.lo.max(b.0.lo);
        let hi = a.0.hi.min(b.0.hi);
        if hi > lo {
            out.push((Interval::new(lo, hi), a.1, b.1));
        }
        if a.0.hi <= b.0.hi {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// The sequence `H_μ(ξ | ⋁_{i=1}^n f^{-i}ξ)`, `n = 1..=n_max`; the value is the last term.
pub fn metric_entropy_partition(map: &PiecewiseMap, mu: &MeasureRep, xi: &Partition, n_max: u32) -> Result<EntropyReport> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    super::check_dense(map, mu)?;
    let base = atoms_of(xi)?;
    let mut eta = base.clone();
    let mut terms = Vec::with_capacity(n_max as usize);
    let mut sizes = Vec::with_capacity(n_max as usize);
    for _ in 1..=n_max {
        let pulled = pullback(map, &eta)?;
        let pieces = join(&base, &pulled);
        if pieces.len() > MAX_CELLS {
            return Err(Error::CombinatorialBlowup { limit: MAX_CELLS });
        }
        let mut cond: HashMap<usize, f64> = HashMap::new();
        let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
        let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(pieces.len());
        for &(iv, a, c) in &pieces {
            let m = mu.mass(&iv)?;
            *cond.entry(c).or_default() += m;
            *joint.entry((a, c)).or_default() += m;
            let fresh = ids.len();
            next.push((iv, *ids.entry((a, c)).or_insert(fresh)));
        }
        let mut keys: Vec<_> = joint.keys().copied().collect();
        keys.sort_unstable();
        terms.push(keys.iter().map(|k| cond_term(joint[k], cond[&k.1])).sum::<f64>());
        sizes.push(ids.len() as f64);
        eta = next;
    }
    let mut report = EntropyReport::new(
        "metric_partition",
        *terms.last().expect("n_max >= 1"),
        json!({ "n_max": n_max, "elements": xi.len() }),
    );
    report.index_name = "n".into();
    report.index = (1..=n_max).map(f64::from).collect();
    if terms.windows(2).any(|w| w[1] > w[0] + 1e-9) {
        report.warnings.push("conditional entropies increase with n; the measure is probably not invariant".into());
    }
    report.push_series("conditional_entropy", terms);
    report.push_series("elements", sizes);
    let pf = mu.pushforward(map)?;
    let drift = w1_distance(&pf.measure, mu)?;
    if drift >= 0.01 {
        report.warnings.push(format!("W1(f_*μ, μ) = {drift:.3e}; the measure is not approximately invariant"));
    }
    Ok(report)
}
