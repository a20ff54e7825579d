//! Textual map and measure specifications such as `nfold:2`,
//! `skewed_tent:3`, `lebesgue`, `bernoulli:0.3,0.7` or a JSON document
//! (inline or as a file path).

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde_json::Value;

use crate::counterexample::{build_counterexample, Counterexample, CounterexampleParams};
use crate::error::Result;
use crate::horseshoe::{HorseshoeMeasure, HorseshoeSystem, SymbolLaw};
use crate::maps::{identity, logistic, nfold, skewed_tent, MapDocument, MapKind, PiecewiseMap};
use crate::measures::{birkhoff_measure, MeasureRep, DEFAULT_GRID};
use crate::verify::arcsine_density;

#[derive(Debug, Clone, PartialEq)]
pub enum MapSpec {
    Nfold(u32),
    SkewedTent(f64),
    Logistic(f64),
    Identity,
    /// Built from parameters (defaults unless the config supplies them).
    Counterexample,
    Document(MapDocument),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    Lebesgue(usize),
    Arcsine(usize),
    Dirac(f64),
    /// Coded Bernoulli measure on the full `nfold` horseshoe.
    Bernoulli(Vec<f64>),
    /// Empirical measure of a seeded Bernoulli sample path.
    Path(Vec<f64>, usize),
    Birkhoff { x0: f64, n: usize, burn_in: usize },
    /// The measure `μ` of the counterexample.
    Horseshoe,
    Document(MeasureRep),
}

/// A built map, with the counterexample kept when there is one.
pub struct MapChoice {
    pub map: PiecewiseMap,
    pub counterexample: Option<Counterexample>,
}

/// Inline JSON, a path to a JSON file, or `None` for a short spec.
fn document_text(spec: &str) -> anyhow::Result<Option<String>> {
    let t = spec.trim();
    if t.starts_with('{') {
        return Ok(Some(t.to_string()));
    }
    if t.ends_with(".json") || Path::new(t).is_file() {
        return fs::read_to_string(t).map(Some).with_context(|| format!("reading {t}"));
    }
    Ok(None)
}

fn split(spec: &str) -> (String, Option<&str>) {
    match spec.split_once(':') {
        Some((name, arg)) => (name.trim().to_ascii_lowercase(), Some(arg.trim())),
        None => (spec.trim().to_ascii_lowercase(), None),
    }
}

/// A float, also accepting `p/q`.
pub fn parse_number(s: &str) -> anyhow::Result<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((p, q)) => p.trim().parse::<f64>()? / q.trim().parse::<f64>()?,
        None => s.parse::<f64>()?,
    };
    if !v.is_finite() {
        bail!("{s} is not a finite number");
    }
    Ok(v)
}

fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',').map(parse_number).collect()
}

fn need<'a>(arg: Option<&'a str>, name: &str) -> anyhow::Result<&'a str> {
    arg.filter(|a| !a.is_empty()).ok_or_else(|| anyhow!("`{name}` needs a parameter, e.g. `{name}:2`"))
}

pub fn parse_map(spec: &str) -> anyhow::Result<MapSpec> {
    if let Some(text) = document_text(spec)? {
        let doc: MapDocument = serde_json::from_str(&text).context("malformed map document")?;
        return Ok(MapSpec::Document(doc));
    }
    let (name, arg) = split(spec);
    Ok(match name.as_str() {
        "nfold" => {
            let n: u32 = need(arg, "nfold")?.parse().context("nfold needs a positive integer")?;
            if n == 0 {
                bail!("nfold needs a positive integer");
            }
            MapSpec::Nfold(n)
        }
        "skewed_tent" | "tent" => MapSpec::SkewedTent(parse_number(need(arg, "skewed_tent")?)?),
        "logistic" => MapSpec::Logistic(arg.map(parse_number).transpose()?.unwrap_or(4.0)),
        "identity" => MapSpec::Identity,
        "counterexample" => MapSpec::Counterexample,
        other => bail!("unknown map `{other}` (expected nfold:N, skewed_tent:p, logistic[:c], identity, counterexample or JSON)"),
    })
}

pub fn parse_measure(spec: &str) -> anyhow::Result<MeasureSpec> {
    if let Some(text) = document_text(spec)? {
        let mu: MeasureRep = serde_json::from_str(&text).context("malformed measure document")?;
        return Ok(MeasureSpec::Document(mu));
    }
    let (name, arg) = split(spec);
    let grid = |arg: Option<&str>| -> anyhow::Result<usize> {
        match arg {
            Some(a) => a.parse().with_context(|| format!("grid size `{a}`")),
            None => Ok(DEFAULT_GRID),
        }
    };
    Ok(match name.as_str() {
        "lebesgue" | "leb" => MeasureSpec::Lebesgue(grid(arg)?),
        "arcsine" => MeasureSpec::Arcsine(grid(arg)?),
        "dirac" => MeasureSpec::Dirac(parse_number(need(arg, "dirac")?)?),
        "bernoulli" => MeasureSpec::Bernoulli(parse_list(need(arg, "bernoulli")?)?),
        "path" => {
            let a = need(arg, "path")?;
            let (p, n) = match a.split_once(':') {
                Some((p, n)) => (p, n.parse().context("path length")?),
                None => (a, 400_000),
            };
            MeasureSpec::Path(parse_list(p)?, n)
        }
        "birkhoff" => {
            let mut parts = need(arg, "birkhoff")?.split(':');
            let x0 = parse_number(parts.next().unwrap_or(""))?;
            let n = parts.next().map(|s| s.parse()).transpose().context("orbit length")?.unwrap_or(1_000_000);
            let burn_in = parts.next().map(|s| s.parse()).transpose().context("burn-in")?.unwrap_or(0);
            MeasureSpec::Birkhoff { x0, n, burn_in }
        }
        "horseshoe" => MeasureSpec::Horseshoe,
        other => bail!(
            "unknown measure `{other}` (expected lebesgue, arcsine, dirac:x, bernoulli:p,.., path:p,..[:n], birkhoff:x0[:n[:burn]], horseshoe or JSON)"
        ),
    })
}

impl MapSpec {
    pub fn build(&self, params: &CounterexampleParams) -> Result<MapChoice> {
        let plain = |map: PiecewiseMap| MapChoice { map, counterexample: None };
        Ok(match self {
            MapSpec::Nfold(n) => plain(nfold(*n)?),
            MapSpec::SkewedTent(p) => plain(skewed_tent(*p)?),
            MapSpec::Logistic(c) => plain(logistic(*c)?),
            MapSpec::Identity => plain(identity()),
            MapSpec::Counterexample => {
                let ce = build_counterexample(params.clone())?;
                MapChoice { map: ce.map.clone(), counterexample: Some(ce) }
            }
            MapSpec::Document(doc) => plain(doc.build()?),
        })
    }

    /// Counterexample parameters carried by a saved counterexample document.
    pub fn document_params(&self) -> Option<Value> {
        match self {
            MapSpec::Document(doc) if doc.kind == MapKind::Counterexample => Some(doc.params.clone()),
            _ => None,
        }
    }
}

impl MeasureSpec {
    pub fn build(&self, choice: &MapChoice, params: &CounterexampleParams, seed: u64) -> Result<MeasureRep> {
        let bernoulli = |p: &[f64]| -> Result<HorseshoeMeasure> {
            HorseshoeMeasure::new(HorseshoeSystem::nfold(p.len() as u32)?, SymbolLaw::Bernoulli { p: p.to_vec() })
        };
        match self {
            MeasureSpec::Lebesgue(n) => MeasureRep::lebesgue(*n),
            MeasureSpec::Arcsine(n) => arcsine_density(*n),
            MeasureSpec::Dirac(x) => MeasureRep::dirac(*x),
            MeasureSpec::Bernoulli(p) => Ok(MeasureRep::coded(bernoulli(p)?)),
            MeasureSpec::Path(p, n) => MeasureRep::uniform_empirical(bernoulli(p)?.sample_path(seed, *n)?),
            MeasureSpec::Birkhoff { x0, n, burn_in } => birkhoff_measure(&choice.map, *x0, *burn_in, *n),
            MeasureSpec::Horseshoe => match &choice.counterexample {
                Some(ce) => Ok(MeasureRep::coded(ce.mu.clone())),
                None => Ok(MeasureRep::coded(build_counterexample(params.clone())?.mu)),
            },
            MeasureSpec::Document(mu) => Ok(mu.clone()),
        }
    }
}
