//! The `foldent` command line: argument and config handling, dispatch, and
//! artifact emission.
//!
//! Exit codes: 0 success, 1 config or argument error, 2 computation error,
//! 3 failed acceptance check.

mod spec;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::counterexample::{CounterexampleParams, ProbeReport};
use crate::entropy::{
    branch_partition, degenerate_rate, entropy_production, folding_entropy_branch, folding_entropy_partition,
    local_dimension, lyapunov, metric_entropy_brin_katok, metric_entropy_partition, BrinKatokConfig, EntropyReport,
    FoldingEstimator, RateScheme,
};
use crate::interval::Interval;
use crate::measures::MeasureRep;
use crate::partitions::estimate_holder;
use crate::report::{self, fmt_num, Table, Units};
use crate::svg::LinePlot;
use crate::verify::{run_verify_with, VerifyConfig};

pub use spec::{parse_map, parse_measure, parse_number, MapChoice, MapSpec, MeasureSpec};

#[derive(Parser, Debug)]
#[command(name = "foldent", version, about = "Folding entropy and related quantities for interval maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Lyapunov exponent ∫ log|f'| dμ.
    Lyapunov,
    /// Folding entropy F_f(μ).
    Folding,
    /// Metric entropy h_μ(f).
    Entropy,
    /// Local dimension of μ.
    Dimension,
    /// Degenerate-rate profile η_m.
    Degrate,
    /// Entropy production F_f(μ) − ∫ log|f'| dμ.
    Production,
    /// Build the semicontinuity counterexample and probe its measures ν_k.
    Counterexample,
    /// Run the acceptance suite.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Lyapunov => "lyapunov",
            Command::Folding => "folding",
            Command::Entropy => "entropy",
            Command::Dimension => "dimension",
            Command::Degrate => "degrate",
            Command::Production => "production",
            Command::Counterexample => "counterexample",
            Command::Verify => "verify",
        }
    }
}

#[derive(Args, Debug, Default, Clone)]
pub struct Opts {
    /// Map: nfold:N, skewed_tent:p, logistic[:c], identity, counterexample, or JSON (inline or path).
    #[arg(long, global = true)]
    pub map: Option<String>,
    /// Measure: lebesgue[:grid], arcsine[:grid], dirac:x, bernoulli:p,.., path:p,..[:n],
    /// birkhoff:x0[:n[:burn]], horseshoe, or JSON.
    #[arg(long, global = true)]
    pub measure: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report entropies in bits.
    #[arg(long, global = true)]
    pub bits: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Refinement levels (k_max, n_max, m_max; number of blocks for counterexample).
    #[arg(long, global = true)]
    pub levels: Option<u32>,
    /// Sample count for sampled estimators.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Print the JSON report instead of the scalar.
    #[arg(long, global = true)]
    pub json: bool,
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Criteria to run (numbers or keys, comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub only: Vec<String>,
    /// folding/production: branch | partition; entropy: partition | brin_katok.
    #[arg(long, global = true)]
    pub estimator: Option<String>,
    /// degrate: distance | sublevel.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Override of the ε0 threshold scale for partition estimators.
    #[arg(long, global = true)]
    pub eps0: Option<f64>,
    /// Skip SVG output.
    #[arg(long, global = true)]
    pub no_svg: bool,
}

/// Config file layout; every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub map: Option<Value>,
    pub measure: Option<Value>,
    pub out: Option<PathBuf>,
    pub units: Option<String>,
    pub seed: Option<u64>,
    pub levels: Option<u32>,
    pub samples: Option<usize>,
    pub deltas: Option<Vec<f64>>,
    pub estimator: Option<String>,
    pub scheme: Option<String>,
    pub eps0: Option<f64>,
    pub svg: Option<bool>,
    pub json: Option<bool>,
    /// Counterexample parameters, merged over the defaults.
    pub params: Option<Value>,
    pub only: Option<Vec<String>>,
    pub tolerance_scale: Option<f64>,
}

/// Everything a run depends on; embedded in every JSON artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub map: Option<Value>,
    pub measure: Value,
    pub out: PathBuf,
    pub units: Units,
    pub seed: u64,
    pub levels: Option<u32>,
    pub samples: Option<usize>,
    pub deltas: Vec<f64>,
    pub estimator: Option<String>,
    pub scheme: Option<String>,
    pub eps0: Option<f64>,
    pub svg: bool,
    pub json: bool,
    pub params: CounterexampleParams,
    pub only: Vec<String>,
    pub tolerance_scale: f64,
}

/// A failure with its exit code.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Compute(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Compute(_) => 2,
        }
    }

    /// One JSON line for standard error.
    pub fn to_line(&self) -> String {
        let (class, e) = match self {
            Failure::Config(e) => ("config", e),
            Failure::Compute(e) => ("computation", e),
        };
        let kind = e.chain().find_map(|c| c.downcast_ref::<crate::Error>()).map(|e| e.kind()).unwrap_or(class);
        let message = format!("{e:#}").replace('\n', " ");
        json!({ "error": class, "kind": kind, "message": message }).to_string()
    }
}

fn config_err<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Config)
}

fn compute<T>(r: crate::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Compute(e.into()))
}

fn spec_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn default_deltas() -> Vec<f64> {
    (4..12).map(|j| 0.5f64.powi(j)).collect()
}

/// Merges the config file and the flags (flags win).
pub fn resolve(command: Command, opts: &Opts) -> anyhow::Result<RunConfig> {
    let file: ConfigFile = match &opts.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => ConfigFile::default(),
    };
    let units = if opts.bits {
        Units::Bits
    } else {
        match file.units.as_deref() {
            None | Some("nats") => Units::Nats,
            Some("bits") => Units::Bits,
            Some(u) => bail!("units must be nats or bits, got {u:?}"),
        }
    };
    let mut params = serde_json::to_value(CounterexampleParams::default())?;
    let mut overlay = |extra: &Value| -> anyhow::Result<()> {
        let Value::Object(extra) = extra else { bail!("params must be a JSON object") };
        let base = params.as_object_mut().expect("params serialize to an object");
        for (k, v) in extra {
            if !base.contains_key(k) {
                bail!("unknown counterexample parameter {k:?}");
            }
            base.insert(k.clone(), v.clone());
        }
        Ok(())
    };
    let map = opts.map.clone().map(Value::String).or(file.map);
    if let Some(m) = &map {
        if let Some(p) = parse_map(&spec_text(m))?.document_params() {
            overlay(&p)?;
        }
    }
    if let Some(p) = &file.params {
        overlay(p)?;
    }
    let mut params: CounterexampleParams = serde_json::from_value(params).context("counterexample params")?;
    let levels = opts.levels.or(file.levels);
    if command == Command::Counterexample {
        if let Some(k) = levels {
            params.k_blocks = k as usize;
        }
    }
    let deltas = file.deltas.unwrap_or_else(default_deltas);
    let tolerance_scale = file.tolerance_scale.unwrap_or(1.0);
    let cfg = RunConfig {
        command,
        map,
        measure: opts.measure.clone().map(Value::String).or(file.measure).unwrap_or_else(|| json!("lebesgue")),
        out: opts.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("foldent_out")),
        units,
        seed: opts.seed.or(file.seed).unwrap_or(7),
        levels,
        samples: opts.samples.or(file.samples),
        deltas,
        estimator: opts.estimator.clone().or(file.estimator),
        scheme: opts.scheme.clone().or(file.scheme),
        eps0: opts.eps0.or(file.eps0),
        svg: !opts.no_svg && file.svg.unwrap_or(true),
        json: opts.json || file.json.unwrap_or(false),
        params,
        only: if opts.only.is_empty() { file.only.unwrap_or_default() } else { opts.only.clone() },
        tolerance_scale,
    };
    Ok(cfg)
}

/// What a command produced, ready to be written.
struct Outcome {
    stem: &'static str,
    /// Already in output units.
    scalar: f64,
    table: Table,
    report: Value,
    plot: Option<LinePlot>,
    extra: Vec<(&'static str, String)>,
}

fn series_plot(r: &EntropyReport, name: &str, title: &str, units: Units, scale: bool) -> Option<LinePlot> {
    let ys = r.series(name)?;
    let pts: Vec<(f64, f64)> =
        r.index.iter().zip(ys).map(|(&x, &y)| (x, if scale { units.scale(y) } else { y })).collect();
    let mut pts = pts;
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Some(LinePlot::new(title, &r.index_name, name).series(name, pts))
}

fn estimator_name(cfg: &RunConfig, default: &str, allowed: &[&str]) -> Result<String, Failure> {
    let e = cfg.estimator.clone().unwrap_or_else(|| default.to_string());
    if !allowed.contains(&e.as_str()) {
        return Err(Failure::Config(anyhow!("estimator {e:?} is not one of {allowed:?} for {}", cfg.command.name())));
    }
    Ok(e)
}

fn holder(cfg: &RunConfig, choice: &MapChoice) -> Result<crate::partitions::HolderParams, Failure> {
    let hp = compute(estimate_holder(&choice.map, 2.0))?;
    match cfg.eps0 {
        Some(e) => compute(hp.with_eps0(e)),
        None => Ok(hp),
    }
}

fn folding_estimator(cfg: &RunConfig) -> Result<FoldingEstimator, Failure> {
    Ok(match estimator_name(cfg, "branch", &["branch", "partition"])?.as_str() {
        "branch" => FoldingEstimator::Branch,
        _ => FoldingEstimator::Partition { k_max: cfg.levels.unwrap_or(12), eps0: cfg.eps0 },
    })
}

/// Generator for metric entropy: the two horseshoe intervals on the
/// counterexample, the lap partition otherwise.
fn generator(choice: &MapChoice) -> Vec<Vec<Interval>> {
    match &choice.counterexample {
        Some(ce) => {
            let a = ce.params.a;
            vec![vec![Interval::new(0.0, 3.0 * a)], vec![Interval::new(3.0 * a, 1.0)]]
        }
        None => branch_partition(&choice.map),
    }
}

fn load(cfg: &RunConfig) -> Result<(MapChoice, MeasureRep), Failure> {
    let map_text = cfg
        .map
        .as_ref()
        .map(spec_text)
        .ok_or_else(|| Failure::Config(anyhow!("{} needs --map", cfg.command.name())))?;
    let map_spec = config_err(parse_map(&map_text))?;
    let measure_spec = config_err(parse_measure(&spec_text(&cfg.measure)))?;
    let choice = match &map_spec {
        MapSpec::Document(_) => map_spec.build(&cfg.params).map_err(|e| Failure::Config(e.into()))?,
        _ => compute(map_spec.build(&cfg.params))?,
    };
    let mu = compute(measure_spec.build(&choice, &cfg.params, cfg.seed))?;
    Ok((choice, mu))
}

fn quantity(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let (choice, mu) = load(cfg)?;
    let map = &choice.map;
    let u = cfg.units;
    let entropy_outcome = |stem: &'static str, r: EntropyReport, plot: Option<LinePlot>| -> Result<Outcome, Failure> {
        let scalar = if r.estimator == "local_dimension" { r.value } else { u.scale(r.value) };
        Ok(Outcome {
            stem,
            scalar,
            table: report::entropy_table(&r, u),
            report: serde_json::to_value(&r).map_err(|e| Failure::Compute(e.into()))?,
            plot,
            extra: Vec::new(),
        })
    };
    match cfg.command {
        Command::Lyapunov => {
            let i = compute(lyapunov(map, &mu))?;
            let mut t = Table::new(&["estimator", "value", "clamped", "clamped_mass"]);
            t.push(vec!["lyapunov".into(), fmt_num(u.scale(i.value)), i.clamped.to_string(), fmt_num(i.clamped_mass)]);
            Ok(Outcome {
                stem: "lyapunov",
                scalar: u.scale(i.value),
                table: t,
                report: json!(i),
                plot: None,
                extra: Vec::new(),
            })
        }
        Command::Folding => {
            let r = match folding_estimator(cfg)? {
                FoldingEstimator::Branch => compute(folding_entropy_branch(map, &mu))?,
                FoldingEstimator::Partition { k_max, .. } => {
                    let hp = holder(cfg, &choice)?;
                    compute(folding_entropy_partition(map, &mu, k_max, &hp, None))?
                }
            };
            let plot = series_plot(&r, "conditional_entropy", "folding entropy by level", u, true);
            entropy_outcome("folding", r, plot)
        }
        Command::Entropy => {
            let r = match estimator_name(cfg, "partition", &["partition", "brin_katok"])?.as_str() {
                "partition" => compute(metric_entropy_partition(map, &mu, &generator(&choice), cfg.levels.unwrap_or(8)))?,
                _ => {
                    let bk = BrinKatokConfig {
                        sample_x: cfg.samples.unwrap_or(200),
                        seed: cfg.seed,
                        ..Default::default()
                    };
                    compute(metric_entropy_brin_katok(map, &mu, &bk))?
                }
            };
            let plot = series_plot(&r, "conditional_entropy", "metric entropy by refinement", u, true)
                .or_else(|| series_plot(&r, "slope", "Brin-Katok local slopes", u, true));
            entropy_outcome("entropy", r, plot)
        }
        Command::Dimension => {
            let r = compute(local_dimension(&mu, cfg.samples.unwrap_or(200), &cfg.deltas, cfg.seed))?;
            let plot = series_plot(&r, "slope", "local dimension slopes", u, false);
            entropy_outcome("dimension", r, plot)
        }
        Command::Degrate => {
            let scheme = match cfg.scheme.as_deref().unwrap_or("distance") {
                "distance" => RateScheme::Distance,
                "sublevel" => RateScheme::Sublevel,
                s => return Err(Failure::Config(anyhow!("scheme must be distance or sublevel, got {s:?}"))),
            };
            let p = compute(degenerate_rate(map, &mu, cfg.levels.unwrap_or(10), scheme))?;
            let pts: Vec<(f64, f64)> = p.rows.iter().map(|r| (r.m as f64, u.scale(r.eta))).collect();
            let scalar = pts.last().map(|p| p.1).unwrap_or(0.0);
            Ok(Outcome {
                stem: "degrate",
                scalar,
                table: report::rate_table(&p, u),
                report: json!(p),
                plot: Some(LinePlot::new("degenerate rate", "m", "eta").series("eta", pts)),
                extra: Vec::new(),
            })
        }
        Command::Production => {
            let e = compute(entropy_production(map, &mu, folding_estimator(cfg)?))?;
            let mut t = Table::new(&["production", "folding", "lyapunov", "clamped"]);
            t.push(vec![
                fmt_num(u.scale(e.value)),
                fmt_num(u.scale(e.folding)),
                fmt_num(u.scale(e.lyapunov)),
                e.clamped.to_string(),
            ]);
            Ok(Outcome {
                stem: "production",
                scalar: u.scale(e.value),
                table: t,
                report: json!(e),
                plot: None,
                extra: Vec::new(),
            })
        }
        Command::Counterexample | Command::Verify => unreachable!("handled separately"),
    }
}

fn probe_plot(p: &ProbeReport, u: Units) -> LinePlot {
    let pts = p.rows.iter().map(|r| (r.k as f64, u.scale(r.h_formula))).collect();
    LinePlot::new("entropy of the block measures", "k", "h")
        .series("h(nu_k)", pts)
        .hline("(1/r) log lambda", u.scale(p.limit))
        .hline("h(mu)", u.scale(p.h_mu))
}

fn counterexample(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let ce = compute(crate::counterexample::build_counterexample(cfg.params.clone()))?;
    let probe = compute(ce.probe())?;
    let u = cfg.units;
    let scalar = probe.rows.last().map(|r| u.scale(r.h_formula)).unwrap_or(f64::NAN);
    Ok(Outcome {
        stem: "probe",
        scalar,
        table: report::probe_table(&probe, u),
        report: json!({ "probe": probe, "base": ce.base, "blocks": ce.blocks }),
        plot: Some(probe_plot(&probe, u)),
        extra: vec![("map.json", ce.map.to_json() + "\n")],
    })
}

fn write_outcome(cfg: &RunConfig, o: &Outcome) -> anyhow::Result<()> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let path = |ext: &str| cfg.out.join(format!("{}.{ext}", o.stem));
    o.table.write_csv(&path("csv"))?;
    let config = serde_json::to_value(cfg)?;
    let summary = json!({ "value": o.scalar, "units": cfg.units });
    let mut doc = report::envelope(&config, &o.report)?;
    doc["summary"] = summary;
    fs::write(path("json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    if cfg.svg {
        if let Some(p) = &o.plot {
            fs::write(path("svg"), p.render())?;
        }
    }
    for (name, text) in &o.extra {
        fs::write(cfg.out.join(name), text)?;
    }
    if cfg.json {
        println!("{}", serde_json::to_string(&doc)?);
    } else {
        println!("{}", fmt_sig6(o.scalar));
    }
    Ok(())
}

/// Terminal display with 6 significant digits.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0.000000".into() } else { format!("{x}") };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        format!("{:.5e}", x)
    }
}

fn verify(cfg: &RunConfig, out_given: bool) -> Result<i32, Failure> {
    let vc = VerifyConfig { seed: cfg.seed, only: cfg.only.clone(), tolerance_scale: cfg.tolerance_scale };
    config_err(vc.selected().map_err(anyhow::Error::from))?;
    println!("{:<4} {:<14} {:<6} {:>7} {:>9}  note", "id", "criterion", "result", "checks", "seconds");
    let report = compute(run_verify_with(&vc, |r| {
        let note = match (&r.error, r.failed().first(), r.within_budget()) {
            (Some(e), _, _) => format!("error: {e}"),
            (None, Some(c), _) => format!("failed: {}", c.case),
            (None, None, false) => "over runtime budget".to_string(),
            _ => String::new(),
        };
        println!(
            "{:<4} {:<14} {:<6} {:>7} {:>9.2}  {note}",
            r.criterion.id,
            r.criterion.key,
            if r.pass() { "PASS" } else { "FAIL" },
            r.checks.len(),
            r.elapsed.as_secs_f64()
        );
    }))?;
    let dir = if out_given { cfg.out.clone() } else { cfg.out.join("verify") };
    report.write(&dir).map_err(|e| Failure::Compute(e.into()))?;
    let failed: Vec<_> = report.results.iter().filter(|r| !r.pass()).map(|r| r.criterion.key).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", report.results.len());
        Ok(0)
    } else {
        println!("FAILED: {}", failed.join(", "));
        Ok(3)
    }
}

fn dispatch(cli: &Cli) -> Result<i32, Failure> {
    let cfg = config_err(resolve(cli.command, &cli.opts))?;
    match cli.command {
        Command::Verify => verify(&cfg, cli.opts.out.is_some()),
        Command::Counterexample => {
            let o = counterexample(&cfg)?;
            write_outcome(&cfg, &o).map_err(Failure::Compute)?;
            Ok(0)
        }
        _ => {
            let o = quantity(&cfg)?;
            write_outcome(&cfg, &o).map_err(Failure::Compute)?;
            Ok(0)
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("invalid arguments").to_string();
            eprintln!("{}", Failure::Config(anyhow!(first)).to_line());
            return 1;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", f.to_line());
            f.exit_code()
        }
    }
}

/// Resolved config for `args`, without running anything.
pub fn resolved_config<I, T>(args: I) -> anyhow::Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    resolve(cli.command, &cli.opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig6(2f64.ln()), "0.693147");
        assert_eq!(fmt_sig6(0.0), "0.000000");
        assert_eq!(fmt_sig6(12.3456789), "12.3457");
        assert_eq!(fmt_sig6(-0.000123456789), "-0.000123457");
        assert_eq!(fmt_sig6(1.5e-9), "1.50000e-9");
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"map": "nfold:3", "seed": 3, "units": "bits", "params": {"K_blocks": 2}}"#).unwrap();
        let p = path.to_str().unwrap();
        let cfg = resolved_config(["foldent", "folding", "--config", p, "--seed", "9"]).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.units, Units::Bits);
        assert_eq!(cfg.map, Some(json!("nfold:3")));
        assert_eq!(cfg.params.k_blocks, 2);
        let cfg = resolved_config(["foldent", "counterexample", "--config", p, "--levels", "1"]).unwrap();
        assert_eq!(cfg.params.k_blocks, 1);
    }

    #[test]
    fn bad_config_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"colour": "blue"}"#).unwrap();
        assert!(resolved_config(["foldent", "folding", "--config", path.to_str().unwrap()]).is_err());
        fs::write(&path, r#"{"params": {"bogus": 1}}"#).unwrap();
        assert!(resolved_config(["foldent", "counterexample", "--config", path.to_str().unwrap()]).is_err());
    }

    #[test]
    fn failure_lines_are_single_line_json() {
        let f = Failure::Compute(crate::Error::Constraint("c too large\nreally".into()).into());
        let line = f.to_line();
        assert!(!line.contains('\n'));
        let v: Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["kind"], "constraint");
        assert_eq!(f.exit_code(), 2);
    }
}
