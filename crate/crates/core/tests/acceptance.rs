//! One PASS/FAIL line per acceptance criterion. Criteria 1–9 come from the
//! verify suite; criterion 10 runs the whole suite twice into separate
//! directories and compares every CSV byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use foldent::verify::{run_verify, VerifyConfig, VerifyReport};

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("output directory")
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).expect("csv")))
        .collect()
}

fn run_into(dir: &Path) -> VerifyReport {
    let report = run_verify(&VerifyConfig::default()).expect("verify runs");
    report.write(dir).expect("artifacts written");
    report
}

fn main() -> ExitCode {
    let (a, b) = (tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir"));
    let first = run_into(a.path());
    let mut all = true;
    for r in first.results.iter().filter(|r| r.criterion.id <= 9) {
        let status = if r.pass() { "PASS" } else { "FAIL" };
        all &= r.pass();
        println!("criterion {:>2} {status}  {} ({:.1} s)", r.criterion.id, r.criterion.title, r.elapsed.as_secs_f64());
        for c in r.failed() {
            println!("    {}: value {} {:?} {} (tol {})", c.case, c.value, c.relation, c.reference, c.tolerance);
        }
        if let Some(e) = &r.error {
            println!("    error: {e}");
        }
    }
    let second = run_into(b.path());
    let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
    let differing: Vec<&String> = fa.keys().filter(|k| fa.get(*k) != fb.get(*k)).collect();
    let internal = first.results.iter().chain(&second.results).filter(|r| r.criterion.id == 10).all(|r| r.pass());
    let same = !fa.is_empty() && fa.len() == fb.len() && differing.is_empty() && internal;
    all &= same;
    println!(
        "criterion 10 {}  verify twice gives byte-identical CSVs ({} files compared)",
        if same { "PASS" } else { "FAIL" },
        fa.len()
    );
    for k in differing {
        println!("    differs: {k}");
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
