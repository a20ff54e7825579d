//! Entropy-type quantities: conditional, folding and metric entropy,
//! Lyapunov exponents, local dimension, entropy production and degenerate
//! rates. Everything is in nats.

mod folding;
mod local;
mod metric;

pub use folding::{
    delta_decomposition, folding_entropy_branch, folding_entropy_partition, DeltaRow, DeltaTable, LadderAnalysis, LevelMasses,
};
pub use local::{local_dimension, metric_entropy_brin_katok, BrinKatokConfig};
pub use metric::{branch_partition, metric_entropy_partition, MAX_CELLS};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::{normalize, Interval};
use crate::maps::{CriticalFeature, PiecewiseMap};
use crate::measures::{Integral, MeasureRep};

/// `φ(x) = -x log x` with `φ(0) = 0`.
pub fn phi(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(x));
    }
    Ok(phi_unchecked(x))
}

pub(crate) fn phi_unchecked(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// `-a log(a / c)`, the contribution of a piece of mass `a` inside a
/// conditioning element of mass `c`.
pub(crate) fn cond_term(a: f64, c: f64) -> f64 {
    if a <= 0.0 || c <= 0.0 {
        0.0
    } else {
        -a * (a / c).min(1.0).ln()
    }
}

/// A partition of `[0, 1)` whose elements are finite unions of intervals.
pub type Partition = Vec<Vec<Interval>>;

/// `H_μ(ξ | ζ) = Σ_{A, C} -μ(A ∩ C) log(μ(A ∩ C) / μ(C))`.
pub fn conditional_entropy(mu: &MeasureRep, xi: &Partition, zeta: &Partition) -> Result<f64> {
    let mut h = 0.0;
    for c in zeta {
        let mc = mu.mass_set(c)?;
        if mc <= 0.0 {
            continue;
        }
        for a in xi {
            let mut m = 0.0;
            for ia in a {
                for ic in c {
                    if let Some(iv) = ia.intersect(ic) {
                        m += mu.mass(&iv)?;
                    }
                }
            }
            h += cond_term(m, mc);
        }
    }
    Ok(h)
}

/// One named diagnostic column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub value: f64,
    pub estimator: String,
    pub parameters: serde_json::Value,
    /// Name of the column that indexes the diagnostics (level, n, sample).
    pub index_name: String,
    pub index: Vec<f64>,
    pub diagnostics: Vec<Series>,
    pub warnings: Vec<String>,
}

impl EntropyReport {
    pub fn new(estimator: &str, value: f64, parameters: serde_json::Value) -> Self {
        EntropyReport {
            value,
            estimator: estimator.to_string(),
            parameters,
            index_name: "index".to_string(),
            index: Vec::new(),
            diagnostics: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.diagnostics.iter().find(|s| s.name == name).map(|s| s.values.as_slice())
    }

    pub(crate) fn push_series(&mut self, name: &str, values: Vec<f64>) {
        self.diagnostics.push(Series { name: name.to_string(), values });
    }
}

/// `∫ log|f'| dμ` with the clamp rule; `clamped > 0` flags clamp-dominated values.
pub fn lyapunov(map: &PiecewiseMap, mu: &MeasureRep) -> Result<Integral> {
    mu.integrate(&|x| log_slope(map, x))
}

/// Dense branches have no lap structure; they are skipped when `μ` gives them no mass.
pub(crate) fn check_dense(map: &PiecewiseMap, mu: &MeasureRep) -> Result<()> {
    for &i in map.dense_branches() {
        if mu.mass(&map.branches()[i].domain)? > 0.0 {
            return Err(Error::CombinatorialBlowup { limit: map.laps().len() });
        }
    }
    Ok(())
}

pub(crate) fn log_slope(map: &PiecewiseMap, x: f64) -> f64 {
    map.derivative(x).map(|d| d.abs().ln()).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldingEstimator {
    Branch,
    /// `eps0` overrides the threshold scale derived from the Hölder estimate.
    Partition { k_max: u32, eps0: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductionReport {
    pub value: f64,
    pub folding: f64,
    pub lyapunov: f64,
    pub clamped: usize,
}

/// `e_f(μ) = F_f(μ) - ∫ log|f'| dμ`.
pub fn entropy_production(map: &PiecewiseMap, mu: &MeasureRep, estimator: FoldingEstimator) -> Result<ProductionReport> {
    let folding = match estimator {
        FoldingEstimator::Branch => folding_entropy_branch(map, mu)?.value,
        FoldingEstimator::Partition { k_max, eps0 } => {
            let mut hp = crate::partitions::estimate_holder(map, 2.0)?;
            if let Some(e) = eps0 {
                hp = hp.with_eps0(e)?;
            }
            folding_entropy_partition(map, mu, k_max, &hp, None)?.value
        }
    };
    let lyap = lyapunov(map, mu)?;
    Ok(ProductionReport { value: folding - lyap.value, folding, lyapunov: lyap.value, clamped: lyap.clamped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateScheme {
    /// `V_m = {x : dist(x, Σ_f) < 2^{-m}}`.
    Distance,
    /// `V_m = {x : |f'(x)| < 2^{-m}}`.
    Sublevel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub m: u32,
    pub neighborhood: Vec<Interval>,
    pub eta: f64,
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerateRateProfile {
    pub scheme: RateScheme,
    pub rows: Vec<RateRow>,
}

impl DegenerateRateProfile {
    pub fn etas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.eta).collect()
    }
}

/// The neighbourhood `V_m` of the critical set.
pub fn rate_neighborhood(map: &PiecewiseMap, m: u32, scheme: RateScheme) -> Vec<Interval> {
    let h = 2f64.powi(-(m as i32));
    match scheme {
        RateScheme::Sublevel => map.sublevel_set(h),
        RateScheme::Distance => {
            let ivs = map
                .critical_set()
                .iter()
                .filter_map(|c| {
                    let (lo, hi) = match *c {
                        CriticalFeature::Point { x, .. } => (x, x),
                        CriticalFeature::Cluster { lo, hi } => (lo, hi),
                    };
                    Interval::new(lo - h, hi + h).intersect(&Interval::UNIT)
                })
                .collect();
            normalize(ivs, 0.0)
        }
    }
}

/// `η_m = |∫_{V_m} log|f'| dμ|` for `m = 1..=m_max`.
pub fn degenerate_rate(map: &PiecewiseMap, mu: &MeasureRep, m_max: u32, scheme: RateScheme) -> Result<DegenerateRateProfile> {
    let mut rows = Vec::with_capacity(m_max as usize);
    for m in 1..=m_max {
        let v = rate_neighborhood(map, m, scheme);
        let integral = if v.is_empty() { Integral::default() } else { mu.integrate_on(&v, &|x| log_slope(map, x))? };
        rows.push(RateRow { m, neighborhood: v, eta: integral.value.abs(), clamped: integral.clamped });
    }
    Ok(DegenerateRateProfile { scheme, rows })
}

/// Least-squares slope of `ys` against `xs`.
pub(crate) fn ls_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{identity, logistic, nfold, skewed_tent};
    use crate::partitions::build_dyadic;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn dyadic(k: u32) -> Partition {
        build_dyadic(k).unwrap().cells.into_iter().map(|c| vec![c]).collect()
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(0.0).unwrap(), 0.0);
        assert_eq!(phi(1.0).unwrap(), 0.0);
        assert!((phi(0.5).unwrap() - 2f64.ln() / 2.0).abs() < 1e-15);
        assert!((phi(0.5).unwrap() - 0.3466).abs() < 1e-4);
        assert_eq!(phi(1.5), Err(Error::Domain(1.5)));
    }

    #[test]
    fn conditional_entropy_examples() {
        let leb = MeasureRep::lebesgue(1 << 10).unwrap();
        let trivial = vec![vec![Interval::UNIT]];
        assert!((conditional_entropy(&leb, &dyadic(1), &trivial).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(conditional_entropy(&leb, &dyadic(3), &dyadic(3)).unwrap().abs() < 1e-12);
        assert!((conditional_entropy(&leb, &dyadic(2), &dyadic(1)).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn concavity_on_random_vectors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.gen_range(1..20);
            let mut p: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|q| *q /= s);
            let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let lhs: f64 = p.iter().zip(&x).map(|(p, x)| p * phi(*x).unwrap()).sum();
            let mean: f64 = p.iter().zip(&x).map(|(p, x)| p * x).sum();
            assert!(lhs <= phi(mean.min(1.0)).unwrap() + 1e-12);
            let hp: f64 = p.iter().map(|&q| phi(q).unwrap()).sum();
            assert!(hp <= (n as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn lyapunov_examples() {
        let leb = MeasureRep::lebesgue(1 << 12).unwrap();
        let l = lyapunov(&nfold(2).unwrap(), &MeasureRep::dirac(0.3).unwrap()).unwrap();
        assert!((l.value - 2f64.ln()).abs() < 1e-15);
        let exact = 3f64.ln() / 3.0 + 2.0 / 3.0 * 1.5f64.ln();
        assert!((lyapunov(&skewed_tent(3.0).unwrap(), &leb).unwrap().value - exact).abs() < 1e-3);
        // the critical point of the logistic map is not fixed, but the clamp contract is the same
        let l = lyapunov(&logistic(4.0).unwrap(), &MeasureRep::dirac(0.5).unwrap()).unwrap();
        assert_eq!(l.clamped, 1);
        assert_eq!(l.value, crate::measures::CLAMP);
    }

    #[test]
    fn production_examples() {
        let leb = MeasureRep::lebesgue(1 << 12).unwrap();
        for map in [nfold(2).unwrap(), nfold(3).unwrap(), identity()] {
            let e = entropy_production(&map, &leb, FoldingEstimator::Branch).unwrap();
            assert!(e.value.abs() < 1e-9, "{:?}", e);
        }
        let e = entropy_production(&skewed_tent(3.0).unwrap(), &leb, FoldingEstimator::Branch).unwrap();
        assert!(e.value.abs() < 1e-3);
    }

    #[test]
    fn degenerate_rate_nfold_is_zero() {
        let leb = MeasureRep::lebesgue(1 << 12).unwrap();
        for scheme in [RateScheme::Distance, RateScheme::Sublevel] {
            let p = degenerate_rate(&nfold(3).unwrap(), &leb, 10, scheme).unwrap();
            assert!(p.etas().iter().all(|&e| e == 0.0));
        }
    }

    /// Adaptive Simpson quadrature, independent of the measure code.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let s = |a: f64, b: f64| (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
        let whole = s(a, b);
        let (l, r) = (s(a, m), s(m, b));
        if depth == 0 || (l + r - whole).abs() < 15.0 * tol {
            l + r + (l + r - whole) / 15.0
        } else {
            adaptive_simpson(f, a, m, tol / 2.0, depth - 1) + adaptive_simpson(f, m, b, tol / 2.0, depth - 1)
        }
    }

    #[test]
    fn logistic_rate_against_quadrature() {
        let map = logistic(4.0).unwrap();
        let leb = MeasureRep::lebesgue(1 << 16).unwrap();
        let p = degenerate_rate(&map, &leb, 10, RateScheme::Distance).unwrap();
        // the integrand is symmetric about 1/2 with a log singularity there,
        // so integrate t in (0, h] away from the singular endpoint
        let g = |t: f64| (8.0 * t).ln();
        for row in &p.rows {
            let h = 2f64.powi(-(row.m as i32));
            let eps = 1e-14;
            let oracle = 2.0 * (adaptive_simpson(&g, eps, h, 1e-12, 60) + eps * ((8.0 * eps).ln() - 1.0));
            assert!((row.eta - oracle.abs()).abs() < 1e-4, "m={} eta={} oracle={}", row.m, row.eta, oracle);
        }
        // 2h(1 - log 8h) only starts to decrease once h <= 1/8
        let e = p.etas();
        assert!(e[2..].windows(2).all(|w| w[1] < w[0]));
        assert!(e.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn slope_fit() {
        assert!((ls_slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(ls_slope(&[1.0], &[1.0]).is_none());
    }

    proptest! {
        #[test]
        fn rate_neighborhoods_nest(m in 1u32..20) {
            let map = logistic(3.7).unwrap();
            for scheme in [RateScheme::Distance, RateScheme::Sublevel] {
                let a = rate_neighborhood(&map, m + 1, scheme);
                let b = rate_neighborhood(&map, m, scheme);
                prop_assert!(crate::interval::set_within(&a, &b, 1e-9));
            }
        }
    }
}
