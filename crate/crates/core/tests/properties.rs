//! Cross-module invariants checked on random inputs.

use foldent::entropy::{branch_partition, folding_entropy_branch, lyapunov, metric_entropy_partition, phi};
use foldent::horseshoe::{HorseshoeMeasure, HorseshoeSystem, SymbolLaw};
use foldent::maps::{nfold, skewed_tent};
use foldent::measures::{w1_distance, MeasureRep};
use proptest::prelude::*;

fn shannon(p: &[f64]) -> f64 {
    p.iter().map(|&q| if q > 0.0 { -q * q.ln() } else { 0.0 }).sum()
}

fn probability(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn atoms() -> impl Strategy<Value = MeasureRep> {
    prop::collection::vec((0.0f64..1.0, 0.01f64..1.0), 1..12).prop_map(|a| MeasureRep::atomic(a).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // for a Bernoulli measure on the full N-shift both entropies equal H(p)
    #[test]
    fn bernoulli_entropies_agree(p in (2usize..=4).prop_flat_map(probability)) {
        let n = p.len() as u32;
        let map = nfold(n).unwrap();
        let mu = MeasureRep::coded(
            HorseshoeMeasure::new(HorseshoeSystem::nfold(n).unwrap(), SymbolLaw::Bernoulli { p: p.clone() }).unwrap(),
        );
        let target = shannon(&p);
        let f = folding_entropy_branch(&map, &mu).unwrap().value;
        let h = metric_entropy_partition(&map, &mu, &branch_partition(&map), 3).unwrap().value;
        prop_assert!((f - target).abs() < 1e-6, "F = {f}, H(p) = {target}");
        prop_assert!((h - target).abs() < 1e-6, "h = {h}, H(p) = {target}");
        let lyap = lyapunov(&map, &mu).unwrap().value;
        prop_assert!(h <= lyap + 1e-9);
    }

    #[test]
    fn skewed_tent_folding_is_binary_entropy(p in 1.2f64..8.0) {
        let leb = MeasureRep::lebesgue(1 << 12).unwrap();
        let f = folding_entropy_branch(&skewed_tent(p).unwrap(), &leb).unwrap().value;
        let q = 1.0 / p;
        prop_assert!((f - shannon(&[q, 1.0 - q])).abs() < 1e-4, "p = {p}: {f}");
    }

    #[test]
    fn w1_is_a_metric(a in atoms(), b in atoms(), c in atoms()) {
        let (ab, ba) = (w1_distance(&a, &b).unwrap(), w1_distance(&b, &a).unwrap());
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(w1_distance(&a, &a).unwrap().abs() < 1e-12);
        let (ac, cb) = (w1_distance(&a, &c).unwrap(), w1_distance(&c, &b).unwrap());
        prop_assert!(ab <= ac + cb + 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn phi_is_concave(x in 0.0f64..1.0, y in 0.0f64..1.0, t in 0.0f64..1.0) {
        let mid = phi(t * x + (1.0 - t) * y).unwrap();
        prop_assert!(t * phi(x).unwrap() + (1.0 - t) * phi(y).unwrap() <= mid + 1e-12);
    }
}
