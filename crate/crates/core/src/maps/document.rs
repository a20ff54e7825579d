//! JSON form of a map: a named family with parameters, or an explicit branch list.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Branch, BranchFn, CriticalFeature, PiecewiseMap};
use crate::error::{Error, Result};
use crate::interval::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Nfold,
    SkewedTent,
    Logistic,
    Identity,
    Counterexample,
    Custom,
}

fn default_smoothness() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDescriptor {
    pub domain: [f64; 2],
    #[serde(default = "default_smoothness")]
    pub smoothness: f64,
    #[serde(flatten)]
    pub func: BranchFn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub kind: MapKind,
    #[serde(default)]
    pub params: Value,
    /// Reduce values mod 1 (circle maps).
    #[serde(default)]
    pub wrap: bool,
    #[serde(default)]
    pub branches: Vec<BranchDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_set: Option<Vec<CriticalFeature>>,
}

impl MapDocument {
    pub fn named(kind: MapKind, params: Value) -> Self {
        MapDocument { kind, params, wrap: false, branches: Vec::new(), critical_set: None }
    }

    pub fn nfold(n: u32) -> Self {
        Self::named(MapKind::Nfold, json!({ "n": n }))
    }

    pub fn skewed_tent(p: f64) -> Self {
        Self::named(MapKind::SkewedTent, json!({ "p": p }))
    }

    pub fn logistic(c: f64) -> Self {
        Self::named(MapKind::Logistic, json!({ "c": c }))
    }

    pub fn identity() -> Self {
        Self::named(MapKind::Identity, Value::Null)
    }

    fn param(&self, key: &str) -> Result<f64> {
        self.params
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::Document(format!("missing numeric parameter `{key}`")))
    }

    /// Builds the map. Named families are rebuilt from their parameters;
    /// anything else from the branch list.
    pub fn build(&self) -> Result<PiecewiseMap> {
        match self.kind {
            MapKind::Nfold => {
                let n = self.param("n")?;
                if n.fract() != 0.0 || n < 1.0 {
                    return Err(Error::Document(format!("nfold needs a positive integer n, got {n}")));
                }
                super::nfold(n as u32)
            }
            MapKind::SkewedTent => super::skewed_tent(self.param("p")?),
            MapKind::Logistic => super::logistic(self.param("c")?),
            MapKind::Identity => Ok(super::identity()),
            MapKind::Counterexample | MapKind::Custom => {
                if self.branches.is_empty() {
                    return Err(Error::Document("explicit maps need a non-empty `branches` list".into()));
                }
                let branches = self
                    .branches
                    .iter()
                    .map(|d| Branch::new(Interval::new(d.domain[0], d.domain[1]), d.func.clone(), d.smoothness))
                    .collect();
                let mut doc = self.clone();
                doc.branches.clear();
                PiecewiseMap::from_branches(branches, self.critical_set.clone(), self.wrap, doc)
            }
        }
    }

    pub fn from_json(text: &str) -> Result<PiecewiseMap> {
        let doc: MapDocument = serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
        doc.build()
    }
}

/// A map given only by branch formulas, with numerically detected critical points.
pub fn custom(branches: Vec<(Interval, BranchFn)>) -> Result<PiecewiseMap> {
    let branches = branches.into_iter().map(|(d, f)| Branch::new(d, f, 2.0)).collect();
    PiecewiseMap::from_branches(branches, None, false, MapDocument::named(MapKind::Custom, Value::Null))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_round_trip() {
        for m in [super::super::nfold(3).unwrap(), super::super::skewed_tent(5.0).unwrap(), super::super::logistic(4.0).unwrap()] {
            let back = MapDocument::from_json(&m.to_json()).unwrap();
            for i in 0..100 {
                let x = i as f64 / 100.0;
                assert_eq!(m.eval(x).unwrap(), back.eval(x).unwrap());
            }
        }
    }

    #[test]
    fn explicit_branches() {
        let text = r#"{"kind":"custom","branches":[
            {"domain":[0,0.5],"type":"affine","slope":2,"intercept":0},
            {"domain":[0.5,1],"type":"poly","coeffs":[2,-2]}]}"#;
        let m = MapDocument::from_json(text).unwrap();
        assert!((m.eval(0.75).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(m.preimages(0.5, 1e-12).unwrap().len(), 2);
    }

    #[test]
    fn malformed() {
        assert!(matches!(MapDocument::from_json("{"), Err(Error::Document(_))));
        assert!(matches!(MapDocument::from_json(r#"{"kind":"nfold","params":{}}"#), Err(Error::Document(_))));
        let gap = r#"{"kind":"custom","branches":[{"domain":[0,0.4],"type":"affine","slope":1,"intercept":0}]}"#;
        assert!(matches!(MapDocument::from_json(gap), Err(Error::DomainGap(_))));
    }

    #[test]
    fn custom_detects_critical_points() {
        let m = custom(vec![(Interval::UNIT, BranchFn::Poly { coeffs: vec![0.0, 4.0, -4.0] })]).unwrap();
        let pts: Vec<_> = m.critical_set().iter().filter_map(|c| match c {
            CriticalFeature::Point { x, numerical } => Some((*x, *numerical)),
            _ => None,
        }).collect();
        assert_eq!(pts.len(), 1);
        assert!((pts[0].0 - 0.5).abs() < 1e-9 && pts[0].1);
    }
}
