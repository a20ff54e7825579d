//! CSV tables and JSON envelopes for every result type.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::counterexample::ProbeReport;
use crate::entropy::{DeltaTable, DegenerateRateProfile, EntropyReport};
use crate::error::{Error, Result};
use crate::measures::MeasureRep;
use crate::partitions::PullbackPartition;

/// `x` with 12 significant digits, `%g` style.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let fixed = format!("{:.*}", (11 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn opt_int(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Output unit for entropies; only applied when writing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    pub fn scale(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
        }
    }
}

/// Diagnostic columns holding entropies (rescaled under `Units::Bits`).
fn is_entropy_series(estimator: &str, name: &str) -> bool {
    match name {
        "conditional_entropy" | "delta1" | "delta2" | "delta21" | "delta22" | "i_anchor" => true,
        "slope" => estimator != "local_dimension",
        _ => false,
    }
}

/// A header plus formatted rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Document(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Document(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Document(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?).map_err(|e| Error::Document(format!("{}: {e}", path.display())))
    }

    /// Column `name` parsed back to numbers (blank cells become NaN).
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect())
    }
}

/// One row per diagnostic level; a single `estimator, value` row when there are none.
pub fn entropy_table(r: &EntropyReport, units: Units) -> Table {
    if r.diagnostics.is_empty() || r.index.is_empty() {
        let mut t = Table::new(&["estimator", "value"]);
        let v = if r.estimator == "local_dimension" { r.value } else { units.scale(r.value) };
        t.push(vec![r.estimator.clone(), fmt_num(v)]);
        return t;
    }
    let mut header = vec![r.index_name.as_str()];
    header.extend(r.diagnostics.iter().map(|s| s.name.as_str()));
    let mut t = Table::new(&header);
    for (i, &x) in r.index.iter().enumerate() {
        let mut row = vec![fmt_num(x)];
        for s in &r.diagnostics {
            let v = s.values.get(i).copied().unwrap_or(f64::NAN);
            row.push(fmt_num(if is_entropy_series(&r.estimator, &s.name) { units.scale(v) } else { v }));
        }
        t.push(row);
    }
    t
}

pub fn rate_table(p: &DegenerateRateProfile, units: Units) -> Table {
    let mut t = Table::new(&["m", "eta", "neighborhood_length", "pieces", "clamped"]);
    for r in &p.rows {
        let len: f64 = r.neighborhood.iter().map(|iv| iv.len()).sum();
        t.push(vec![
            r.m.to_string(),
            fmt_num(units.scale(r.eta)),
            fmt_num(len),
            r.neighborhood.len().to_string(),
            r.clamped.to_string(),
        ]);
    }
    t
}

/// Two columns: support coordinate and weight (height for densities).
pub fn measure_table(mu: &MeasureRep) -> Result<Table> {
    let second = if matches!(mu, MeasureRep::Density(_)) { "height" } else { "weight" };
    let mut t = Table::new(&["x", second]);
    for (x, w) in mu.rows()? {
        t.push(vec![fmt_num(x), fmt_num(w)]);
    }
    Ok(t)
}

pub fn partition_table(p: &PullbackPartition) -> Table {
    let mut t = Table::new(&["left", "right", "kind", "image_cell", "branch"]);
    for (lo, hi, kind, cell, branch) in p.rows() {
        t.push(vec![fmt_num(lo), fmt_num(hi), kind.to_string(), opt_int(cell), opt_int(branch)]);
    }
    t
}

pub fn delta_table(d: &DeltaTable, units: Units) -> Table {
    let mut t = Table::new(&[
        "k",
        "delta1",
        "delta2",
        "delta21",
        "delta22",
        "i_anchor",
        "b_mass",
        "conditional_entropy",
        "split_residual",
    ]);
    let s = |x: f64| fmt_num(units.scale(x));
    for r in &d.rows {
        t.push(vec![
            r.k.to_string(),
            s(r.delta1),
            s(r.delta2),
            s(r.delta21),
            s(r.delta22),
            r.i_anchor.map(s).unwrap_or_default(),
            fmt_num(r.b_mass),
            s(r.conditional_entropy),
            opt_num(r.split_residual),
        ]);
    }
    t
}

/// The Brin–Katok column appears only when some block was sampled.
pub fn probe_table(p: &ProbeReport, units: Units) -> Table {
    let with_bk = p.rows.iter().any(|r| r.h_brin_katok.is_some());
    let mut header = vec!["k", "n_k", "return_time", "w1", "h_formula", "h_measure"];
    if with_bk {
        header.push("h_brin_katok");
    }
    header.extend(["bk_skipped", "eta", "h_mu", "limit", "entropy_gap"]);
    let mut t = Table::new(&header);
    let s = |x: f64| fmt_num(units.scale(x));
    for r in &p.rows {
        let mut row = vec![
            r.k.to_string(),
            r.n_k.to_string(),
            r.return_time.to_string(),
            fmt_num(r.w1),
            s(r.h_formula),
            r.h_measure.map(s).unwrap_or_default(),
        ];
        if with_bk {
            row.push(r.h_brin_katok.map(s).unwrap_or_default());
        }
        row.extend([
            r.bk_skipped.to_string(),
            s(r.eta),
            s(p.h_mu),
            s(p.limit),
            p.flags.entropy_gap.to_string(),
        ]);
        t.push(row);
    }
    t
}

/// `{"config": ..., "report": ...}`.
pub fn envelope<T: Serialize>(config: &Value, report: &T) -> Result<Value> {
    let report = serde_json::to_value(report).map_err(|e| Error::Document(e.to_string()))?;
    Ok(json!({ "config": config, "report": report }))
}

pub fn write_json<T: Serialize>(path: &Path, config: &Value, report: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(&envelope(config, report)?).map_err(|e| Error::Document(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::Document(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(2f64.ln()), "0.69314718056");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-12.5), "-12.5");
        assert_eq!(fmt_num(1e-7), "1e-7");
        assert_eq!(fmt_num(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(fmt_num(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
    }

    proptest! {
        #[test]
        fn twelve_significant_digits(x in -1e30f64..1e30) {
            let back: f64 = fmt_num(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 1e-11 * x.abs());
        }
    }

    #[test]
    fn entropy_csv_layout() {
        let mut r = EntropyReport::new("demo", 2f64.ln(), json!({}));
        assert_eq!(entropy_table(&r, Units::Bits).to_csv().unwrap(), "estimator,value\ndemo,1\n");
        r.index_name = "k".into();
        r.index = vec![1.0, 2.0];
        r.push_series("conditional_entropy", vec![2f64.ln(), 2f64.ln()]);
        r.push_series("b_mass", vec![0.5, 0.25]);
        let t = entropy_table(&r, Units::Bits);
        assert_eq!(t.to_csv().unwrap(), "k,conditional_entropy,b_mass\n1,1,0.5\n2,1,0.25\n");
        assert_eq!(t.column("b_mass").unwrap(), vec![0.5, 0.25]);
    }

    #[test]
    fn measure_csv() {
        let t = measure_table(&MeasureRep::atomic(vec![(0.25, 0.5), (0.75, 0.5)]).unwrap()).unwrap();
        assert_eq!(t.to_csv().unwrap(), "x,weight\n0.25,0.5\n0.75,0.5\n");
        let t = measure_table(&MeasureRep::lebesgue(2).unwrap()).unwrap();
        assert_eq!(t.header[1], "height");
    }

    #[test]
    fn envelope_embeds_config() {
        let v = envelope(&json!({ "seed": 3 }), &vec![1.0]).unwrap();
        assert_eq!(v["config"]["seed"], 3);
        assert_eq!(v["report"][0], 1.0);
    }
}
