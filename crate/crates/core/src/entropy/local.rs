//! Ball-mass estimators: Brin–Katok entropy and local dimension.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use super::{ls_slope, EntropyReport};
use crate::error::{Error, Result};
use crate::maps::PiecewiseMap;
use crate::measures::{BallSpec, MeasureRep, PointMasses};

/// Balls must hold at least this many samples' worth of mass to enter a fit.
const MIN_BALL_SAMPLES: f64 = 30.0;
/// Fewer support points than this only earns a warning.
const RECOMMENDED_SUPPORT: usize = 10_000;

/// Radius function `ψ`; the estimator uses `min(ψ(x), δ)`.
pub type RadiusFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct BrinKatokConfig {
    pub sample_x: usize,
    /// Ball radii, largest first.
    pub deltas: Vec<f64>,
    pub n_min: usize,
    pub n_max: usize,
    pub seed: u64,
    pub psi: Option<RadiusFn>,
}

impl std::fmt::Debug for BrinKatokConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BrinKatokConfig")
            .field("sample_x", &self.sample_x)
            .field("deltas", &self.deltas)
            .field("n_min", &self.n_min)
            .field("n_max", &self.n_max)
            .field("seed", &self.seed)
            .field("psi", &self.psi.is_some())
            .finish()
    }
}

impl Default for BrinKatokConfig {
    fn default() -> Self {
        BrinKatokConfig {
            sample_x: 200,
            deltas: (0..6).map(|j| 0.1 * 0.5f64.powi(j)).collect(),
            n_min: 1,
            n_max: 24,
            seed: 0,
            psi: None,
        }
    }
}

fn sample_points(pm: &PointMasses, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| pm.quantile(rng.gen::<f64>())).collect()
}

/// `μ(B_n(x, r))` for `n = 1..=n_max` with the radius `r(f^i x)` at step `i`.
fn bowen_masses(pm: &PointMasses, map: &PiecewiseMap, x: f64, radius: &dyn Fn(f64) -> f64, n_max: usize) -> Result<Vec<f64>> {
    let r0 = radius(x);
    let range = pm.range_open(x - r0, x + r0);
    let mut alive: Vec<(f64, f64)> = range.map(|i| (pm.points()[i], pm.weights()[i])).collect();
    let mut center = x;
    let mut out = Vec::with_capacity(n_max);
    for step in 0..n_max {
        if step > 0 {
            center = map.eval(center)?;
            let r = radius(center);
            let mut next = Vec::with_capacity(alive.len());
            for (y, w) in alive {
                let fy = map.eval(y)?;
                if (fy - center).abs() < r {
                    next.push((fy, w));
                }
            }
            alive = next;
        }
        out.push(alive.iter().map(|p| p.1).sum());
    }
    Ok(out)
}

/// Slope of `-log μ(B_n(x, δ))` against `n` over the window where the ball
/// still holds enough samples, with the window length.
fn window_slope(masses: &[f64], n_min: usize, floor: f64) -> (Option<f64>, usize) {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, &m) in masses.iter().enumerate().skip(n_min - 1) {
        if m < floor || m <= 0.0 {
            break;
        }
        xs.push((i + 1) as f64);
        ys.push(-m.ln());
    }
    let len = xs.len();
    (if len >= 2 { ls_slope(&xs, &ys) } else { None }, len)
}

/// Mean over sampled `x` of the decay rate of `μ(B_n(x, δ))`, at the smallest
/// `δ` for which at least 90% of the points have a fit window of 3 or more.
pub fn metric_entropy_brin_katok(map: &PiecewiseMap, mu: &MeasureRep, cfg: &BrinKatokConfig) -> Result<EntropyReport> {
    let pm = match mu {
        MeasureRep::Empirical(p) | MeasureRep::Atomic(p) => p,
        _ => return Err(Error::InvalidArgument("Brin–Katok needs an empirical measure".into())),
    };
    if cfg.sample_x == 0 || cfg.deltas.is_empty() || cfg.n_min == 0 || cfg.n_max <= cfg.n_min {
        return Err(Error::InvalidArgument("need sample_x >= 1, some δ and 1 <= n_min < n_max".into()));
    }
    if cfg.deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidArgument("δ values must be positive".into()));
    }
    let mut deltas = cfg.deltas.clone();
    deltas.sort_by(|a, b| b.total_cmp(a));
    let floor = MIN_BALL_SAMPLES / pm.samples() as f64;
    let xs = sample_points(pm, cfg.sample_x, cfg.seed);

    // surface[d][s] = (slope, window length, deepest mass)
    let surface: Vec<Vec<(Option<f64>, usize, f64)>> = deltas
        .iter()
        .map(|&delta| {
            let rows: Vec<Result<(Option<f64>, usize, f64)>> = xs
                .par_iter()
                .map(|&x| {
                    let radius = |y: f64| match &cfg.psi {
                        Some(psi) => psi(y).min(delta),
                        None => delta,
                    };
                    let masses = bowen_masses(pm, map, x, &radius, cfg.n_max)?;
                    let (slope, len) = window_slope(&masses, cfg.n_min, floor);
                    Ok((slope, len, *masses.last().expect("n_max >= 1")))
                })
                .collect();
            rows.into_iter().collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    if pm.len() < RECOMMENDED_SUPPORT {
        warnings.push(format!("only {} support points; at least 10^4 are recommended", pm.len()));
    }
    let stable = |row: &[(Option<f64>, usize, f64)]| row.iter().filter(|r| r.1 >= 3).count() as f64 >= 0.9 * row.len() as f64;
    let chosen = match (0..deltas.len()).rev().find(|&d| stable(&surface[d])) {
        Some(d) => d,
        None => {
            warnings.push("no δ gives stable windows; Bowen balls are starved or do not shrink".into());
            0
        }
    };
    let row = &surface[chosen];
    // Balls that never shrink (periodic support) carry the full n-range with slope 0.
    let slopes: Vec<f64> = row
        .iter()
        .zip(&xs)
        .map(|(r, _)| r.0.unwrap_or(0.0))
        .collect();
    let starved = row.iter().filter(|r| r.2 < floor).count();
    if starved > 0 {
        warnings.push(format!(
            "{starved} of {} deepest Bowen balls hold fewer than 30 samples' worth of mass",
            row.len()
        ));
    }
    let value = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let mut report = EntropyReport::new(
        "brin_katok",
        value,
        json!({
            "sample_x": cfg.sample_x,
            "deltas": deltas,
            "delta": deltas[chosen],
            "n_min": cfg.n_min,
            "n_max": cfg.n_max,
            "seed": cfg.seed,
            "radius_function": cfg.psi.is_some(),
        }),
    );
    report.index_name = "x".into();
    report.index = xs;
    for (d, row) in surface.iter().enumerate() {
        report.push_series(&format!("slope_d{d}"), row.iter().map(|r| r.0.unwrap_or(f64::NAN)).collect());
        report.push_series(&format!("window_d{d}"), row.iter().map(|r| r.1 as f64).collect());
    }
    report.warnings = warnings;
    Ok(report)
}

/// Mean over sampled `x` of the slope of `log μ(B(x, δ))` against `log δ`.
pub fn local_dimension(mu: &MeasureRep, sample_x: usize, deltas: &[f64], seed: u64) -> Result<EntropyReport> {
    if deltas.len() < 2 || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidArgument("need at least two positive δ values".into()));
    }
    let (lo, hi) = deltas.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &d| (l.min(d), h.max(d)));
    if hi / lo < 10.0 - 1e-9 {
        return Err(Error::InvalidArgument("the δ values must span at least one decade".into()));
    }
    if sample_x == 0 {
        return Err(Error::InvalidArgument("sample_x must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let us: Vec<f64> = (0..sample_x).map(|_| rng.gen::<f64>()).collect();
    let xs: Vec<f64> = us.iter().map(|&u| mu.quantile(u)).collect::<Result<_>>()?;
    let log_d: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let rows: Vec<Result<(Option<f64>, f64)>> = xs
        .par_iter()
        .map(|&x| {
            let mut ys = Vec::with_capacity(deltas.len());
            let mut smallest = f64::INFINITY;
            for &d in deltas {
                let m = mu.ball_mass(&BallSpec::new(x, d, 1)?, None)?;
                smallest = smallest.min(m);
                ys.push(m.ln());
            }
            let slope = if ys.iter().all(|y| y.is_finite()) { ls_slope(&log_d, &ys) } else { None };
            Ok((slope, smallest))
        })
        .collect();
    let rows: Vec<(Option<f64>, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let slopes: Vec<f64> = rows.iter().filter_map(|r| r.0).collect();
    if slopes.is_empty() {
        return Err(Error::NonFinite("no sampled point has positive ball masses".into()));
    }
    let value = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let (min, max) = slopes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    let mut report = EntropyReport::new(
        "local_dimension",
        value,
        json!({ "sample_x": sample_x, "deltas": deltas, "seed": seed, "min_slope": min, "max_slope": max }),
    );
    report.index_name = "x".into();
    report.index = xs;
    report.push_series("slope", rows.iter().map(|r| r.0.unwrap_or(f64::NAN)).collect());
    if slopes.len() < rows.len() {
        report.warnings.push(format!("{} points had an empty ball and were skipped", rows.len() - slopes.len()));
    }
    let floor = match mu {
        MeasureRep::Empirical(p) => MIN_BALL_SAMPLES / p.samples() as f64,
        _ => 0.0,
    };
    let starved = rows.iter().filter(|r| r.1 < floor).count();
    if starved > 0 {
        report.warnings.push(format!("{starved} smallest balls hold fewer than 30 samples' worth of mass"));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::horseshoe::{HorseshoeMeasure, HorseshoeSystem, SymbolLaw};
    use crate::maps::nfold;
    use crate::measures::birkhoff_measure;

    fn bernoulli_path(n: usize) -> MeasureRep {
        let h = HorseshoeMeasure::new(HorseshoeSystem::nfold(2).unwrap(), SymbolLaw::Bernoulli { p: vec![0.3, 0.7] })
            .unwrap();
        MeasureRep::uniform_empirical(h.sample_path(7, n).unwrap()).unwrap()
    }

    #[test]
    fn doubling_birkhoff() {
        let map = nfold(2).unwrap();
        let mu = birkhoff_measure(&map, 0.1234567, 0, 200_000).unwrap();
        let cfg = BrinKatokConfig { sample_x: 64, ..Default::default() };
        let r = metric_entropy_brin_katok(&map, &mu, &cfg).unwrap();
        assert!((r.value - 2f64.ln()).abs() < 0.05, "{}", r.value);
    }

    #[test]
    fn periodic_orbit_has_zero_entropy() {
        let map = nfold(2).unwrap();
        let mu = MeasureRep::uniform_empirical(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let r = metric_entropy_brin_katok(&map, &mu, &BrinKatokConfig::default()).unwrap();
        assert!(r.value.abs() < 1e-9);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn radius_function_only_shrinks_balls() {
        let map = nfold(2).unwrap();
        let mu = birkhoff_measure(&map, 0.3141, 0, 50_000).unwrap();
        let pm = mu.discretize().unwrap();
        let full = bowen_masses(&pm, &map, 0.4, &|_| 0.05, 8).unwrap();
        let cut = bowen_masses(&pm, &map, 0.4, &|y: f64| (0.5 * y).min(0.05), 8).unwrap();
        assert!(full.iter().zip(&cut).all(|(a, b)| b <= a));
        assert!(full.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn dimension_of_lebesgue_and_dirac() {
        let deltas: Vec<f64> = (4..12).map(|j| 0.5f64.powi(j)).collect();
        let leb = MeasureRep::lebesgue(1 << 16).unwrap();
        let r = local_dimension(&leb, 200, &deltas, 1).unwrap();
        assert!((r.value - 1.0).abs() < 0.02, "{}", r.value);
        let r = local_dimension(&MeasureRep::dirac(0.3).unwrap(), 20, &deltas, 1).unwrap();
        assert!(r.value.abs() < 1e-9);
        assert!(local_dimension(&leb, 10, &[0.1, 0.05], 1).is_err());
    }

    #[test]
    fn dimension_of_bernoulli_path() {
        let target = -(0.3f64 * 0.3f64.ln() + 0.7 * 0.7f64.ln()) / 2f64.ln();
        assert!((target - 0.8813).abs() < 1e-4);
        let mu = bernoulli_path(400_000);
        let deltas: Vec<f64> = (3..12).map(|j| 0.5f64.powi(j)).collect();
        let r = local_dimension(&mu, 300, &deltas, 3).unwrap();
        assert!((r.value - target).abs() < 0.05, "{}", r.value);
    }

    #[test]
    fn window_stops_at_the_floor() {
        let masses = [0.5, 0.25, 0.125, 0.01, 0.001];
        let (s, len) = window_slope(&masses, 1, 0.1);
        assert_eq!(len, 3);
        assert!((s.unwrap() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(window_slope(&masses, 1, 0.6).1, 0);
    }
}
