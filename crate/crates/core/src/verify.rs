//! The acceptance suite behind `foldent verify`: ten criteria, each a list
//! of numeric checks written to its own CSV table.

use std::f64::consts::{LN_2, PI};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::counterexample::{build_counterexample, Counterexample, CounterexampleParams};
use crate::entropy::{
    branch_partition, degenerate_rate, delta_decomposition, folding_entropy_branch, folding_entropy_partition,
    local_dimension, lyapunov, metric_entropy_brin_katok, metric_entropy_partition, phi, BrinKatokConfig,
    LadderAnalysis, Partition, RateScheme,
};
use crate::error::{Error, Result};
use crate::horseshoe::{HorseshoeMeasure, HorseshoeSystem, SymbolLaw};
use crate::interval::{set_difference, total_length, Interval};
use crate::maps::{identity, logistic, nfold, skewed_tent, PiecewiseMap};
use crate::measures::{birkhoff_measure, MeasureRep};
use crate::partitions::{build_pullback, estimate_holder};
use crate::report::{fmt_num, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Criterion {
    pub id: u8,
    pub key: &'static str,
    pub title: &'static str,
}

pub const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, key: "closed_forms", title: "folding entropy of nfold maps" },
    Criterion { id: 2, key: "skewed_tent", title: "folding entropy of skewed tents" },
    Criterion { id: 3, key: "thm41", title: "metric entropy equals folding entropy" },
    Criterion { id: 4, key: "thm42", title: "dimension formula" },
    Criterion { id: 5, key: "inequalities", title: "Ruelle-type inequalities on the zoo" },
    Criterion { id: 6, key: "machinery", title: "pullback partition machinery" },
    Criterion { id: 7, key: "probe", title: "counterexample probe" },
    Criterion { id: 8, key: "degrate", title: "degenerate rate profiles" },
    Criterion { id: 9, key: "brin_katok", title: "Brin-Katok consistency" },
    Criterion { id: 10, key: "determinism", title: "seeded tables are reproducible" },
];

const BUDGETS: [(u8, u64); 3] = [(1, 30), (3, 60), (7, 300)];

#[derive(Debug, Clone, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Criterion numbers or keys; empty runs everything.
    pub only: Vec<String>,
    /// Multiplies every tolerance; only values in `[0, 1]` are accepted.
    pub tolerance_scale: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: 7, only: Vec::new(), tolerance_scale: 1.0 }
    }
}

impl VerifyConfig {
    pub fn selected(&self) -> Result<Vec<Criterion>> {
        if !(0.0..=1.0).contains(&self.tolerance_scale) {
            return Err(Error::InvalidArgument(format!(
                "tolerance_scale = {} must lie in [0, 1]",
                self.tolerance_scale
            )));
        }
        if self.only.is_empty() {
            return Ok(CRITERIA.to_vec());
        }
        let mut out = Vec::new();
        for tag in &self.only {
            let tag = tag.trim().to_ascii_lowercase();
            let c = CRITERIA
                .iter()
                .find(|c| c.key == tag || c.id.to_string() == tag)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown criterion {tag:?}")))?;
            if !out.contains(c) {
                out.push(*c);
            }
        }
        out.sort_by_key(|c| c.id);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|value − reference| ≤ tolerance`.
    Near,
    /// `value ≤ reference + tolerance`.
    AtMost,
    /// `value > reference`.
    Above,
}

impl Relation {
    fn as_str(self) -> &'static str {
        match self {
            Relation::Near => "near",
            Relation::AtMost => "at_most",
            Relation::Above => "above",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub case: String,
    pub value: f64,
    pub relation: Relation,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(case: String, value: f64, relation: Relation, reference: f64, tolerance: f64) -> Self {
        let pass = match relation {
            Relation::Near => (value - reference).abs() <= tolerance,
            Relation::AtMost => value <= reference + tolerance,
            Relation::Above => value > reference,
        };
        Check { case, value, relation, reference, tolerance, pass }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub criterion: Criterion,
    pub checks: Vec<Check>,
    /// A computation error; the criterion then fails.
    pub error: Option<String>,
    pub elapsed: Duration,
    pub budget: Option<Duration>,
}

impl CriterionResult {
    pub fn within_budget(&self) -> bool {
        self.budget.is_none_or(|b| self.elapsed <= b)
    }

    pub fn pass(&self) -> bool {
        self.error.is_none() && !self.checks.is_empty() && self.checks.iter().all(|c| c.pass) && self.within_budget()
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// Deterministic table of checks (no timings).
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["case", "value", "relation", "reference", "tolerance", "pass"]);
        for c in &self.checks {
            t.push(vec![
                c.case.clone(),
                fmt_num(c.value),
                c.relation.as_str().into(),
                fmt_num(c.reference),
                fmt_num(c.tolerance),
                c.pass.to_string(),
            ]);
        }
        if let Some(e) = &self.error {
            t.push(vec![format!("error: {e}"), String::new(), String::new(), String::new(), String::new(), "false".into()]);
        }
        t
    }

    pub fn file_name(&self) -> String {
        format!("criterion_{:02}_{}.csv", self.criterion.id, self.criterion.key)
    }
}

/// Collects checks with the configured tolerance scale.
struct Checks {
    scale: f64,
    list: Vec<Check>,
}

impl Checks {
    fn new(scale: f64) -> Self {
        Checks { scale, list: Vec::new() }
    }

    fn near(&mut self, case: impl Into<String>, value: f64, reference: f64, tol: f64) {
        self.list.push(Check::new(case.into(), value, Relation::Near, reference, tol * self.scale));
    }

    fn at_most(&mut self, case: impl Into<String>, value: f64, bound: f64, tol: f64) {
        self.list.push(Check::new(case.into(), value, Relation::AtMost, bound, tol * self.scale));
    }

    fn above(&mut self, case: impl Into<String>, value: f64, bound: f64) {
        self.list.push(Check::new(case.into(), value, Relation::Above, bound, 0.0));
    }
}

/// Shared inputs that are costly to rebuild.
#[derive(Default)]
struct Cache {
    ce: Option<Counterexample>,
}

impl Cache {
    fn counterexample(&mut self) -> Result<&Counterexample> {
        if self.ce.is_none() {
            self.ce = Some(build_counterexample(CounterexampleParams::default())?);
        }
        Ok(self.ce.as_ref().expect("just built"))
    }
}

pub fn tent_value(p: f64) -> f64 {
    p.ln() / p + (p - 1.0) / p * (p / (p - 1.0)).ln()
}

fn bernoulli_03() -> Result<MeasureRep> {
    Ok(MeasureRep::coded(HorseshoeMeasure::new(
        HorseshoeSystem::nfold(2)?,
        SymbolLaw::Bernoulli { p: vec![0.3, 0.7] },
    )?))
}

/// The arcsine density, invariant for `logistic(4)`, as exact cell averages.
pub fn arcsine_density(grid_n: usize) -> Result<MeasureRep> {
    let w = 1.0 / grid_n as f64;
    let cdf = |x: f64| 2.0 / PI * x.sqrt().asin();
    MeasureRep::density((0..grid_n).map(|i| (cdf((i + 1) as f64 * w) - cdf(i as f64 * w)) / w).collect())
}

fn leb() -> Result<MeasureRep> {
    MeasureRep::lebesgue(1 << 16)
}

fn closed_forms(c: &mut Checks) -> Result<()> {
    let leb = leb()?;
    for n in 2..=4u32 {
        let map = nfold(n)?;
        let target = (n as f64).ln();
        c.near(format!("nfold{n} branch"), folding_entropy_branch(&map, &leb)?.value, target, 1e-6);
        let hp = estimate_holder(&map, 2.0)?;
        let r = folding_entropy_partition(&map, &leb, 12, &hp, None)?;
        c.near(format!("nfold{n} partition k12"), r.value, target, 5e-3);
    }
    Ok(())
}

fn skewed_tents(c: &mut Checks) -> Result<()> {
    let leb = leb()?;
    c.near("closed form p3", tent_value(3.0), 0.636514, 1e-6);
    for p in [3.0, 5.0] {
        let map = skewed_tent(p)?;
        let target = tent_value(p);
        c.near(format!("tent{p} branch"), folding_entropy_branch(&map, &leb)?.value, target, 5e-3);
        let hp = estimate_holder(&map, 2.0)?.with_eps0(1.0)?;
        let r = folding_entropy_partition(&map, &leb, 12, &hp, None)?;
        c.near(format!("tent{p} partition k12"), r.value, target, 5e-3);
    }
    Ok(())
}

fn thm41(c: &mut Checks) -> Result<()> {
    let leb = leb()?;
    let pairs: Vec<(&str, PiecewiseMap, MeasureRep)> = vec![
        ("nfold2 leb", nfold(2)?, leb.clone()),
        ("nfold3 leb", nfold(3)?, leb.clone()),
        ("tent3 leb", skewed_tent(3.0)?, leb),
        ("nfold2 bernoulli", nfold(2)?, bernoulli_03()?),
    ];
    for (name, map, mu) in pairs {
        let h = metric_entropy_partition(&map, &mu, &branch_partition(&map), 6)?.value;
        let f = folding_entropy_branch(&map, &mu)?.value;
        c.near(format!("{name} h-F"), h - f, 0.0, 2e-2);
    }
    Ok(())
}

fn thm42(c: &mut Checks, seed: u64) -> Result<()> {
    let h = -(0.3f64 * 0.3f64.ln() + 0.7 * 0.7f64.ln());
    c.near("h over lyapunov", h / LN_2, 0.8813, 1e-4);
    let law = HorseshoeMeasure::new(HorseshoeSystem::nfold(2)?, SymbolLaw::Bernoulli { p: vec![0.3, 0.7] })?;
    let path = MeasureRep::uniform_empirical(law.sample_path(seed, 400_000)?)?;
    let deltas: Vec<f64> = (3..12).map(|j| 0.5f64.powi(j)).collect();
    c.near("bernoulli path dimension", local_dimension(&path, 300, &deltas, seed)?.value, 0.8813, 0.05);
    let deltas: Vec<f64> = (4..12).map(|j| 0.5f64.powi(j)).collect();
    c.near("lebesgue dimension", local_dimension(&leb()?, 200, &deltas, seed)?.value, 1.0, 0.02);
    Ok(())
}

fn inequalities(c: &mut Checks, cache: &mut Cache) -> Result<()> {
    let leb = MeasureRep::lebesgue(1 << 12)?;
    let mut zoo: Vec<(String, PiecewiseMap, MeasureRep, Option<Partition>)> = Vec::new();
    for n in 2..=4 {
        zoo.push((format!("nfold{n} leb"), nfold(n)?, leb.clone(), None));
    }
    for p in [3.0, 5.0] {
        zoo.push((format!("tent{p} leb"), skewed_tent(p)?, leb.clone(), None));
    }
    zoo.push(("logistic4 arcsine".into(), logistic(4.0)?, arcsine_density(1 << 12)?, None));
    zoo.push(("identity leb".into(), identity(), leb.clone(), None));
    zoo.push(("nfold2 bernoulli".into(), nfold(2)?, bernoulli_03()?, None));
    let map = nfold(2)?;
    zoo.push(("nfold2 period2".into(), map.clone(), birkhoff_measure(&map, 1.0 / 3.0, 0, 1000)?, None));
    let ce = cache.counterexample()?;
    let a = ce.params.a;
    let xi = vec![vec![Interval::new(0.0, 3.0 * a)], vec![Interval::new(3.0 * a, 1.0)]];
    zoo.push(("section5 horseshoe".into(), ce.map.clone(), MeasureRep::coded(ce.mu.clone()), Some(xi)));
    for (name, map, mu, xi) in zoo {
        let xi = xi.unwrap_or_else(|| branch_partition(&map));
        let h = metric_entropy_partition(&map, &mu, &xi, 7)?.value;
        let lyap = lyapunov(&map, &mu)?.value;
        let f = folding_entropy_branch(&map, &mu)?.value;
        c.at_most(format!("{name} margulis-ruelle"), h, lyap.max(0.0), 2e-2);
        c.at_most(format!("{name} folding-ruelle"), h, f + (-lyap).max(0.0), 2e-2);
    }
    Ok(())
}

fn machinery(c: &mut Checks, cache: &mut Cache, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut jensen, mut bound) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let n = rng.gen_range(1..20);
        let mut p: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|q| *q /= s);
        let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let lhs: f64 = p.iter().zip(&x).map(|(p, x)| p * phi(*x).unwrap_or(f64::NAN)).sum();
        let mean: f64 = p.iter().zip(&x).map(|(p, x)| p * x).sum::<f64>().min(1.0);
        jensen = jensen.max(lhs - phi(mean)?);
        let hp: f64 = p.iter().map(|&q| phi(q).unwrap_or(f64::NAN)).sum();
        bound = bound.max(hp - (n as f64).ln());
    }
    c.at_most("concavity jensen excess", jensen, 0.0, 1e-12);
    c.at_most("concavity log n excess", bound, 0.0, 1e-12);

    let leb = leb()?;
    let tent = skewed_tent(3.0)?;
    let hp = estimate_holder(&tent, 2.0)?.with_eps0(1.0)?;
    c.at_most("tent3 monotonicity", LadderAnalysis::build(&tent, &leb, 12, &hp)?.monotonicity_violation()?, 0.0, 1e-9);
    c.at_most("tent3 split residual", delta_decomposition(&tent, &leb, 12, None, &hp)?.max_split_residual(), 0.0, 1e-9);
    let lg = logistic(4.0)?;
    let hp = estimate_holder(&lg, 2.0)?.with_eps0(0.05)?;
    let t = delta_decomposition(&lg, &leb, 10, Some(2), &hp)?;
    c.at_most("logistic4 split residual", t.max_split_residual(), 0.0, 1e-9);

    let ce = cache.counterexample()?;
    let mu = MeasureRep::coded(ce.mu.clone());
    let hp = estimate_holder(&ce.map, 2.0)?;
    c.at_most("section5 monotonicity", LadderAnalysis::build(&ce.map, &mu, 12, &hp)?.monotonicity_violation()?, 0.0, 1e-9);
    c.at_most("section5 split residual", delta_decomposition(&ce.map, &mu, 12, None, &hp)?.max_split_residual(), 0.0, 1e-9);
    for k in 1..=12 {
        let p = build_pullback(&ce.map, k, &hp)?;
        let u = ce.map.sublevel_set(hp.degenerate_constant() * 2f64.powf(-(k as f64) * hp.beta));
        c.at_most(format!("section5 B_{k} outside U"), total_length(&set_difference(&p.degenerate, &u)), 0.0, 1e-9);
    }
    Ok(())
}

fn probe(c: &mut Checks, cache: &mut Cache) -> Result<()> {
    let ce = cache.counterexample()?;
    let report = ce.probe()?;
    for (row, b) in report.rows.iter().zip(&ce.blocks) {
        let oracle = (LN_2 + b.ln_m) / (b.n_k + u64::from(ce.base.n1) + 1) as f64;
        c.near(format!("h formula k{}", row.k), row.h_formula, oracle, 1e-9);
    }
    for w in report.rows.windows(2) {
        c.above(format!("h increasing k{}", w[1].k), w[1].h_formula, w[0].h_formula);
    }
    let last = report.rows.last().ok_or_else(|| Error::InvalidArgument("no blocks".into()))?;
    c.above("entropy gap", last.h_formula, report.h_mu + 0.2 * (report.limit - report.c));
    for w in report.rows.windows(2).filter(|w| w[0].k >= 4) {
        c.at_most(format!("w1 nonincreasing k{}", w[1].k), w[1].w1, w[0].w1, 0.0);
    }
    c.above("rate exceeds threshold", last.eta, report.rate_threshold);
    Ok(())
}

/// Recursive 5-point Gauss–Legendre; nodes stay inside the open interval.
pub fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    const X: [f64; 5] = [0.0, 0.538469310105683, -0.538469310105683, 0.906179845938664, -0.906179845938664];
    const W: [f64; 5] = [0.568888888888889, 0.478628670499366, 0.478628670499366, 0.236926885056189, 0.236926885056189];
    let rule = |a: f64, b: f64| {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        h * X.iter().zip(&W).map(|(x, w)| w * f(m + h * x)).sum::<f64>()
    };
    let m = 0.5 * (a + b);
    let (whole, halves) = (rule(a, b), rule(a, m) + rule(m, b));
    if depth == 0 || (whole - halves).abs() <= tol {
        halves
    } else {
        gauss_legendre(f, a, m, 0.5 * tol, depth - 1) + gauss_legendre(f, m, b, 0.5 * tol, depth - 1)
    }
}

fn degrate(c: &mut Checks) -> Result<()> {
    let map = logistic(4.0)?;
    let p = degenerate_rate(&map, &leb()?, 10, RateScheme::Distance)?;
    // |4 − 8x| = 8t at distance t from 1/2 on either side; integrating in t
    // keeps every node off the critical point
    let g = |t: f64| (8.0 * t).ln();
    for row in p.rows.iter().filter(|r| r.m >= 2) {
        let h = 2f64.powi(-(row.m as i32));
        let oracle = 2.0 * gauss_legendre(&g, 0.0, h, 1e-12, 60);
        c.near(format!("logistic4 m{}", row.m), row.eta, oracle.abs(), 1e-4);
    }
    let leb = MeasureRep::lebesgue(1 << 12)?;
    for n in 2..=4 {
        for scheme in [RateScheme::Distance, RateScheme::Sublevel] {
            let p = degenerate_rate(&nfold(n)?, &leb, 10, scheme)?;
            let worst = p.etas().iter().fold(0.0f64, |m, e| m.max(e.abs()));
            c.at_most(format!("nfold{n} {scheme:?} profile"), worst, 0.0, 0.0);
        }
    }
    Ok(())
}

fn brin_katok(c: &mut Checks, seed: u64) -> Result<()> {
    let map = nfold(2)?;
    let mu = birkhoff_measure(&map, 0.1234567, 0, 1_000_000)?;
    let cfg = BrinKatokConfig { sample_x: 64, seed, ..Default::default() };
    c.near("doubling birkhoff", metric_entropy_brin_katok(&map, &mu, &cfg)?.value, LN_2, 0.05);
    let per2 = birkhoff_measure(&map, 1.0 / 3.0, 0, 1000)?;
    c.near("period two", metric_entropy_brin_katok(&map, &per2, &BrinKatokConfig { seed, ..Default::default() })?.value, 0.0, 1e-9);
    Ok(())
}

/// Criteria whose inputs depend on the seed.
const SEEDED: [u8; 3] = [4, 6, 9];

fn run_one(id: u8, cfg: &VerifyConfig, cache: &mut Cache, done: &[CriterionResult]) -> CriterionResult {
    let criterion = CRITERIA[(id - 1) as usize];
    let start = Instant::now();
    let mut c = Checks::new(cfg.tolerance_scale);
    let out = match id {
        1 => closed_forms(&mut c),
        2 => skewed_tents(&mut c),
        3 => thm41(&mut c),
        4 => thm42(&mut c, cfg.seed),
        5 => inequalities(&mut c, cache),
        6 => machinery(&mut c, cache, cfg.seed),
        7 => probe(&mut c, cache),
        8 => degrate(&mut c),
        9 => brin_katok(&mut c, cfg.seed),
        _ => determinism(&mut c, cfg, cache, done),
    };
    let budget = BUDGETS.iter().find(|b| b.0 == id).map(|b| Duration::from_secs(b.1));
    CriterionResult { criterion, checks: c.list, error: out.err().map(|e| e.to_string()), elapsed: start.elapsed(), budget }
}

/// Reruns the seeded criteria and compares their tables byte for byte.
fn determinism(c: &mut Checks, cfg: &VerifyConfig, cache: &mut Cache, done: &[CriterionResult]) -> Result<()> {
    for id in SEEDED {
        let first = match done.iter().find(|r| r.criterion.id == id) {
            Some(r) => r.table().to_csv()?,
            None => run_one(id, cfg, cache, &[]).table().to_csv()?,
        };
        let second = run_one(id, cfg, cache, &[]).table().to_csv()?;
        let differing = first.lines().zip(second.lines()).filter(|(a, b)| a != b).count()
            + first.lines().count().abs_diff(second.lines().count());
        c.at_most(format!("criterion {id} differing lines"), differing as f64, 0.0, 0.0);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub results: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass())
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(&["id", "key", "title", "checks", "failed", "pass"]);
        for r in &self.results {
            t.push(vec![
                r.criterion.id.to_string(),
                r.criterion.key.into(),
                r.criterion.title.into(),
                r.checks.len().to_string(),
                (r.failed().len() + r.error.is_some() as usize).to_string(),
                r.pass().to_string(),
            ]);
        }
        t
    }

    /// `verify.csv`, one CSV per criterion and `verify.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::Document(format!("{}: {e}", dir.display())))?;
        self.summary_table().write_csv(&dir.join("verify.csv"))?;
        for r in &self.results {
            r.table().write_csv(&dir.join(r.file_name()))?;
        }
        let results: Vec<_> = self
            .results
            .iter()
            .map(|r| json!({ "criterion": r.criterion, "pass": r.pass(), "error": r.error, "checks": r.checks }))
            .collect();
        crate::report::write_json(&dir.join("verify.json"), &json!(self.config), &results)
    }
}

pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    run_verify_with(cfg, |_| {})
}

/// Like [`run_verify`], calling `progress` after each criterion.
pub fn run_verify_with(cfg: &VerifyConfig, mut progress: impl FnMut(&CriterionResult)) -> Result<VerifyReport> {
    let selected = cfg.selected()?;
    let mut cache = Cache::default();
    let mut results: Vec<CriterionResult> = Vec::with_capacity(selected.len());
    for c in selected {
        let r = run_one(c.id, cfg, &mut cache, &results);
        progress(&r);
        results.push(r);
    }
    Ok(VerifyReport { config: cfg.clone(), results })
}
