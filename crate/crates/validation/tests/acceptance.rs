//! Runs every acceptance criterion and prints one PASS/FAIL line each.
//!
//! Benchmark criteria drive the `metadrift` binary built alongside this
//! target, exactly as a user would. The process exits non-zero if any
//! criterion fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use metadrift::evalharness::ExperimentReport;
use serde_json::Value;
use validation::{
    active_gain, benchmark_ordering, detector_sanity, determinism, dn_trend, meta_quality, numerical_suite,
    window_trend, Check,
};

/// `target/<profile>/metadrift`, next to the `deps` directory holding this
/// test binary.
fn binary() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let name = format!("metadrift{}", std::env::consts::EXE_SUFFIX);
    exe.ancestors().skip(1).take(3).map(|d| d.join(&name)).find(|p| p.is_file())
}

struct Bench {
    report: ExperimentReport,
    bytes: Vec<u8>,
    wall_clock_seconds: f64,
}

fn bench(bin: &Path, out: &Path, args: &[&str]) -> Result<Bench, String> {
    let o = Command::new(bin)
        .arg("--out")
        .arg(out)
        .arg("bench")
        .args(args)
        .env_remove("METADRIFT_OUT")
        .output()
        .map_err(|e| format!("running {}: {e}", bin.display()))?;
    if !o.status.success() {
        return Err(format!("bench {args:?} failed: {}", String::from_utf8_lossy(&o.stderr).trim()));
    }
    let path = out.join(format!("{}_report.json", args[0]));
    let bytes = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let report = serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    let manifest: Value = std::fs::read(out.join("bench_manifest.json"))
        .ok()
        .and_then(|b| serde_json::from_slice(&b).ok())
        .ok_or("missing bench manifest")?;
    let wall_clock_seconds = manifest["wall_clock_seconds"].as_f64().ok_or("manifest lacks wall-clock time")?;
    Ok(Bench {
        report,
        bytes,
        wall_clock_seconds,
    })
}

fn failed(name: &'static str, why: &str) -> Check {
    Check {
        name,
        pass: false,
        detail: why.to_string(),
    }
}

fn report(name: &'static str, check: Check) -> Check {
    println!("{check}");
    Check { name, ..check }
}

fn main() -> ExitCode {
    let mut checks = Vec::new();
    checks.push(report("numerical suite", numerical_suite(20_260_101)));
    checks.push(report("detector sanity", detector_sanity(1000)));

    let Some(bin) = binary() else {
        for name in ["meta-detector quality", "determinism", "window-size trend", "benchmark ordering", "active-learning gain", "DN trend"] {
            checks.push(report(name, failed(name, "metadrift binary not found; build the workspace first")));
        }
        return summary(&checks);
    };
    let dir = tempfile::tempdir().expect("temporary directory");
    let sub = |name: &str| {
        let d = dir.path().join(name);
        std::fs::create_dir_all(&d).expect("output directory");
        d
    };

    let first = bench(&bin, &sub("exp1a"), &["exp1", "--seed", "7"]);
    let second = bench(&bin, &sub("exp1b"), &["exp1", "--seed", "7"]);
    match (&first, &second) {
        (Ok(a), Ok(b)) => {
            checks.push(report("meta-detector quality", meta_quality(&a.report, a.wall_clock_seconds)));
            checks.push(report("determinism", determinism(&a.bytes, &b.bytes)));
        }
        (Err(e), _) | (_, Err(e)) => {
            checks.push(report("meta-detector quality", failed("meta-detector quality", e)));
            checks.push(report("determinism", failed("determinism", e)));
        }
    }

    match bench(&bin, &sub("exp2"), &["exp2", "--seed", "7"]) {
        Ok(b) => checks.push(report("window-size trend", window_trend(&b.report))),
        Err(e) => checks.push(report("window-size trend", failed("window-size trend", &e))),
    }

    match bench(&bin, &sub("exp3"), &["exp3", "--seed", "7", "--generators", "sea,hyp"]) {
        Ok(b) => {
            checks.push(report("benchmark ordering", benchmark_ordering(&b.report)));
            checks.push(report("active-learning gain", active_gain(&b.report)));
        }
        Err(e) => {
            checks.push(report("benchmark ordering", failed("benchmark ordering", &e)));
            checks.push(report("active-learning gain", failed("active-learning gain", &e)));
        }
    }

    match bench(&bin, &sub("exp4"), &["exp4", "--seed", "7"]) {
        Ok(b) => checks.push(report("DN trend", dn_trend(&b.report))),
        Err(e) => checks.push(report("DN trend", failed("DN trend", &e))),
    }

    summary(&checks)
}

fn summary(checks: &[Check]) -> ExitCode {
    let passed = checks.iter().filter(|c| c.pass).count();
    println!("{passed}/{} criteria passed", checks.len());
    if passed == checks.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
