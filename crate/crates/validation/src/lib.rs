//! Acceptance criteria for the workbench, as checks over benchmark reports
//! and over the numerical building blocks.
//!
//! Every check returns a [`Check`]; the `acceptance` test target runs them
//! all and prints one line per criterion.

use std::collections::BTreeSet;
use std::fmt;

use metadrift::active::entropy;
use metadrift::baselearner::GaussianNaiveBayes;
use metadrift::detectors::{make_detector, scan, DetectorKind, DetectorState};
use metadrift::evalharness::{ExperimentReport, MethodRun};
use metadrift::metafeat::{make_meta_sample, StreamingView, WindowSpec};
use metadrift::protonet::{classify, episode_loss_and_grad, EmbeddingNet, Episode, PrototypeSet};
use metadrift::streamgen::Sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LN4: f64 = std::f64::consts::LN_2 * 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            pass,
            detail: detail.into(),
        }
    }

    /// Folds sub-checks into one criterion that passes only if all do.
    pub fn all(name: &'static str, parts: Vec<Check>) -> Self {
        let pass = parts.iter().all(|c| c.pass);
        let detail = parts
            .iter()
            .map(|c| format!("{}{} {}", if c.pass { "" } else { "FAILED " }, c.name, c.detail))
            .collect::<Vec<_>>()
            .join("; ");
        Self::new(name, pass, detail)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.name, self.detail)
    }
}

fn macro_accuracy(report: &ExperimentReport, label: &str) -> Option<f64> {
    report
        .meta_accuracy
        .iter()
        .find(|m| m.label.eq_ignore_ascii_case(label))
        .map(|m| m.macro_accuracy)
}

/// FCN macro accuracy at least 0.85, FCN no worse than RNN, and the run
/// finished within five minutes.
pub fn meta_quality(report: &ExperimentReport, wall_clock_seconds: f64) -> Check {
    let name = "meta-detector quality";
    let (Some(fcn), Some(rnn)) = (macro_accuracy(report, "fcn"), macro_accuracy(report, "rnn")) else {
        return Check::new(name, false, "report lacks an FCN or RNN row");
    };
    let pass = fcn >= 0.85 && fcn >= rnn && wall_clock_seconds <= 300.0;
    Check::new(
        name,
        pass,
        format!("FCN macro {fcn:.3} (>= 0.85), RNN macro {rnn:.3}, {wall_clock_seconds:.1} s (<= 300 s)"),
    )
}

/// Accuracy at n = 50 strictly above accuracy at n = 1 for every L.
pub fn window_trend(report: &ExperimentReport) -> Check {
    let name = "window-size trend";
    let ls: BTreeSet<usize> = report.grid.iter().map(|c| c.l).collect();
    if ls.is_empty() {
        return Check::new(name, false, "empty grid");
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for l in ls {
        let at = |n: usize| report.grid.iter().find(|c| c.l == l && c.n == n).map(|c| c.accuracy);
        match (at(50), at(1)) {
            (Some(a50), Some(a1)) => {
                pass &= a50 > a1;
                parts.push(format!("L={l}: n=50 {a50:.3} vs n=1 {a1:.3}"));
            }
            _ => {
                pass = false;
                parts.push(format!("L={l}: missing n=1 or n=50"));
            }
        }
    }
    Check::new(name, pass, parts.join(", "))
}

fn is_baseline(method: &str) -> bool {
    !matches!(method, "*" | "Meta-DD" | "Meta-ADD")
}

fn streams(runs: &[MethodRun]) -> BTreeSet<String> {
    runs.iter().map(|r| r.stream.clone()).collect()
}

/// Means over seeds of accuracy and F1 (a method that never fires scores
/// an F1 of zero).
fn seed_means(runs: &[MethodRun], stream: &str, method: &str) -> Option<(f64, f64)> {
    let rs: Vec<&MethodRun> = runs.iter().filter(|r| r.stream == stream && r.method == method).collect();
    if rs.is_empty() {
        return None;
    }
    let n = rs.len() as f64;
    let acc = rs.iter().map(|r| r.accuracy).sum::<f64>() / n;
    let f1 = rs.iter().map(|r| r.f1.unwrap_or(0.0)).sum::<f64>() / n;
    Some((acc, f1))
}

/// Per stream: mean Meta-ADD accuracy ≥ mean Meta-DD accuracy ≥ best
/// baseline mean accuracy − 0.01, and Meta-ADD mean F1 at least every
/// baseline's.
pub fn benchmark_ordering(report: &ExperimentReport) -> Check {
    let name = "benchmark ordering";
    let streams = streams(&report.runs);
    if streams.is_empty() {
        return Check::new(name, false, "no runs");
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for stream in &streams {
        let methods: BTreeSet<&str> = report
            .runs
            .iter()
            .filter(|r| &r.stream == stream && is_baseline(&r.method))
            .map(|r| r.method.as_str())
            .collect();
        let (Some((add_acc, add_f1)), Some((dd_acc, _))) =
            (seed_means(&report.runs, stream, "Meta-ADD"), seed_means(&report.runs, stream, "Meta-DD"))
        else {
            pass = false;
            parts.push(format!("{stream}: missing Meta-DD or Meta-ADD"));
            continue;
        };
        let baselines: Vec<(&str, f64, f64)> = methods
            .into_iter()
            .filter_map(|m| seed_means(&report.runs, stream, m).map(|(a, f)| (m, a, f)))
            .collect();
        let (best_name, best_acc) = baselines
            .iter()
            .fold(("none", f64::NEG_INFINITY), |b, &(m, a, _)| if a > b.1 { (m, a) } else { b });
        let (top_f1_name, top_f1) = baselines
            .iter()
            .fold(("none", f64::NEG_INFINITY), |b, &(m, _, f)| if f > b.1 { (m, f) } else { b });
        let ok = !baselines.is_empty() && add_acc >= dd_acc && dd_acc >= best_acc - 0.01 && add_f1 >= top_f1;
        pass &= ok;
        parts.push(format!(
            "{stream}: ADD {add_acc:.4} / DD {dd_acc:.4} / {best_name} {best_acc:.4}, F1 ADD {add_f1:.3} vs {top_f1_name} {top_f1:.3}"
        ));
    }
    Check::new(name, pass, parts.join(", "))
}

/// Meta-ADD accuracy strictly above Meta-DD on at least 4 of 5 seeds for
/// every stream.
pub fn active_gain(report: &ExperimentReport) -> Check {
    let name = "active-learning gain";
    let streams = streams(&report.runs);
    if streams.is_empty() {
        return Check::new(name, false, "no runs");
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for stream in &streams {
        let of = |method: &str| -> Vec<&MethodRun> {
            report.runs.iter().filter(|r| &r.stream == stream && r.method == method).collect()
        };
        let add = of("Meta-ADD");
        let dd = of("Meta-DD");
        let mut wins = 0;
        let mut total = 0;
        for a in &add {
            if let Some(d) = dd.iter().find(|d| d.seed == a.seed) {
                total += 1;
                wins += usize::from(a.accuracy > d.accuracy);
            }
        }
        let queries: usize = add.iter().map(|r| r.queries).sum();
        pass &= total >= 5 && wins >= 4;
        parts.push(format!("{stream}: ADD > DD on {wins}/{total} seeds ({queries} labels used)"));
    }
    Check::new(name, pass, parts.join(", "))
}

/// Detection count at n = 25 no higher than at n = 1, for each
/// meta-detector present in the report.
pub fn dn_trend(report: &ExperimentReport) -> Check {
    let name = "DN trend";
    let mut pass = true;
    let mut parts = Vec::new();
    for base in ["Meta-DD", "Meta-ADD"] {
        for stream in streams(&report.runs) {
            let dn = |n: usize| {
                let method = format!("{base} (n={n})");
                report
                    .runs
                    .iter()
                    .find(|r| r.stream == stream && r.method == method)
                    .map(|r| r.dn)
            };
            match (dn(25), dn(1)) {
                (Some(d25), Some(d1)) => {
                    pass &= d25 <= d1;
                    parts.push(format!("{stream} {base}: n=25 {d25} vs n=1 {d1}"));
                }
                (None, None) => {}
                _ => {
                    pass = false;
                    parts.push(format!("{stream} {base}: missing n=1 or n=25"));
                }
            }
        }
    }
    if parts.is_empty() {
        return Check::new(name, false, "no meta-detector rows");
    }
    Check::new(name, pass, parts.join(", "))
}

/// Byte-for-byte comparison of two report files.
pub fn determinism(first: &[u8], second: &[u8]) -> Check {
    let name = "determinism";
    if first.is_empty() {
        return Check::new(name, false, "empty report");
    }
    let pass = first == second;
    let detail = match first.iter().zip(second).position(|(a, b)| a != b) {
        _ if pass => format!("{} bytes identical", first.len()),
        Some(i) => format!("reports differ at byte {i}"),
        None => format!("lengths differ: {} vs {}", first.len(), second.len()),
    };
    Check::new(name, pass, detail)
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_net<R: Rng>(rng: &mut R, i: usize) -> EmbeddingNet {
    let input = rng.random_range(3..=10);
    let embed = rng.random_range(2..=5);
    if i.is_multiple_of(2) {
        let hidden: Vec<usize> = (0..rng.random_range(1..=2)).map(|_| rng.random_range(3..=10)).collect();
        EmbeddingNet::fcn(input, &hidden, embed, rng).expect("valid FCN shape")
    } else {
        EmbeddingNet::rnn(input, rng.random_range(2..=6), embed, rng).expect("valid RNN shape")
    }
}

/// Largest relative error between the analytic episode gradient and
/// central differences over `instances` random small networks and episodes.
pub fn gradient_check(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let net = random_net(&mut rng, i);
        let support_n = rng.random_range(1..=3);
        let query_n = rng.random_range(1..=3);
        let data: Vec<Vec<Vec<f64>>> = (0..4)
            .map(|_| (0..support_n + query_n).map(|_| random_vec(&mut rng, net.input_dim)).collect())
            .collect();
        let episode = Episode {
            support: data.iter().map(|c| c[..support_n].iter().map(Vec::as_slice).collect()).collect(),
            query: data.iter().map(|c| c[support_n..].iter().map(Vec::as_slice).collect()).collect(),
        };
        let loss = |n: &EmbeddingNet| episode_loss_and_grad(n, &episode).expect("episode is well formed").0;
        let (_, grads) = episode_loss_and_grad(&net, &episode).expect("episode is well formed");
        let h = 1e-5;
        for (pi, p) in net.params.iter().enumerate() {
            for j in 0..p.len() {
                let mut plus = net.clone();
                plus.params[pi].data[j] += h;
                let mut minus = net.clone();
                minus.params[pi].data[j] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                worst = worst.max(relative_error(grads[pi][j], fd));
            }
        }
    }
    Check::new(
        "gradients",
        worst < 1e-4,
        format!("max relative error {worst:.2e} over {instances} instances"),
    )
}

/// Worst |Σp − 1| of `classify` over random networks, prototypes and inputs.
pub fn normalization_check(trials: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..trials {
        let net = random_net(&mut rng, i);
        let scale = 10f64.powi(rng.random_range(-3..=3));
        let prototypes = PrototypeSet {
            centroids: (0..4).map(|_| random_vec(&mut rng, net.embed_dim)).collect(),
            counts: vec![1; 4],
        };
        let x: Vec<f64> = random_vec(&mut rng, net.input_dim).into_iter().map(|v| v * scale).collect();
        let p = classify(&net, &prototypes, &x).expect("dimensions match");
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    Check::new(
        "normalization",
        worst < 1e-12,
        format!("max |sum p - 1| {worst:.2e} over {trials} inputs"),
    )
}

/// Entropy stays within [0, ln 4] on random points of the 4-simplex,
/// including points on its faces.
pub fn entropy_check(points: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut bad = 0;
    for i in 0..points {
        // Exponential spacings give a uniform draw from the simplex.
        let mut w: Vec<f64> = (0..4).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        if i % 4 == 0 {
            let keep = rng.random_range(0..4);
            w.iter_mut().enumerate().filter(|&(k, _)| k != keep).for_each(|(_, v)| {
                if rng.random::<bool>() {
                    *v = 0.0;
                }
            });
        }
        let total: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|v| v / total).collect();
        match entropy(&p) {
            Ok(h) if (0.0..=LN4).contains(&h) => {
                lo = lo.min(h);
                hi = hi.max(h);
            }
            _ => bad += 1,
        }
    }
    Check::new(
        "entropy",
        bad == 0,
        format!("{bad} of {points} points out of bounds, range [{lo:.4}, {hi:.4}]"),
    )
}

/// Incremental naive Bayes class moments against a two-pass batch
/// computation on random streams.
pub fn moments_check(streams: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..streams {
        let dim = rng.random_range(1..=6);
        let offsets: Vec<f64> = (0..dim).map(|_| rng.random_range(-1e3..1e3)).collect();
        let scales: Vec<f64> = (0..dim).map(|_| 10f64.powi(rng.random_range(-2..=2))).collect();
        let samples: Vec<Sample> = (0..rng.random_range(50..=500))
            .map(|_| Sample {
                features: (0..dim).map(|k| offsets[k] + scales[k] * rng.random_range(-1.0..1.0)).collect(),
                label: rng.random_range(0..3),
            })
            .collect();
        let mut nb = GaussianNaiveBayes::new();
        for s in &samples {
            nb.partial_fit(s).expect("consistent dimension");
        }
        for class in 0..3 {
            let rows: Vec<&[f64]> = samples
                .iter()
                .filter(|s| s.label == class)
                .map(|s| s.features.as_slice())
                .collect();
            let Some(m) = nb.class_moments(class) else {
                continue;
            };
            let n = rows.len() as f64;
            let variance = m.variance();
            for k in 0..dim {
                let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
                let var = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
                worst = worst.max((m.mean()[k] - mean).abs() / mean.abs().max(f64::MIN_POSITIVE));
                worst = worst.max((variance[k] - var).abs() / var.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    Check::new(
        "moments",
        worst < 1e-9,
        format!("max relative error {worst:.2e} over {streams} streams"),
    )
}

/// Every sample emitted by the streaming view equals the batch extraction
/// over the same prefix, and the view emits exactly once per window
/// boundary after the first `L + 1` windows.
pub fn streaming_check(traces: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    let mut emitted = 0;
    for _ in 0..traces {
        let spec = WindowSpec {
            n: rng.random_range(1..=10),
            l: rng.random_range(1..=20),
            sign_agnostic: rng.random::<bool>(),
        };
        let len = rng.random_range(0..=3 * spec.extent());
        let rate = rng.random::<f64>();
        let trace: Vec<u8> = (0..len).map(|_| u8::from(rng.random::<f64>() < rate)).collect();
        let mut view = StreamingView::new(spec, "check").expect("valid spec");
        let mut count = 0;
        for (t, &e) in trace.iter().enumerate() {
            let Some(sample) = view.push(e) else {
                continue;
            };
            count += 1;
            let batch = make_meta_sample(&trace[..=t], &spec, None).expect("prefix is long enough");
            if sample.gaps != batch.gaps || (t + 1) % spec.n != 0 {
                mismatches += 1;
            }
        }
        let expected = (len / spec.n).saturating_sub(spec.l);
        if count != expected {
            mismatches += 1;
        }
        emitted += count;
    }
    Check::new(
        "streaming view",
        mismatches == 0,
        format!("{mismatches} mismatches over {traces} traces ({emitted} samples)"),
    )
}

/// The five numerical checks at their stated sizes.
pub fn numerical_suite(seed: u64) -> Check {
    Check::all(
        "numerical suite",
        vec![
            gradient_check(20, seed),
            normalization_check(1000, seed + 1),
            entropy_check(10_000, seed + 2),
            moments_check(20, seed + 3),
            streaming_check(100, seed + 4),
        ],
    )
}

fn drift_points(kind: DetectorKind, values: &[f64]) -> Vec<usize> {
    let mut d = make_detector(kind.as_str(), None).expect("known detector");
    scan(&mut d, values.iter().copied())
        .expect("values in range")
        .into_iter()
        .filter(|s| s.state == DetectorState::Drift)
        .map(|s| s.at)
        .collect()
}

/// DDM and Page-Hinkley flag a 0 → 1 step within 50 elements and every
/// detector stays at or under 5 false alarms over 20 stationary traces.
pub fn detector_sanity(seed: u64) -> Check {
    let step: Vec<f64> = (0..1000).map(|t| f64::from(u8::from(t >= 200))).collect();
    let mut parts = Vec::new();
    for kind in [DetectorKind::Ddm, DetectorKind::PageHinkley] {
        let first = drift_points(kind, &step).first().copied();
        let ok = first.is_some_and(|t| (200..=250).contains(&t));
        let at = first.map_or("never".to_string(), |t| t.to_string());
        parts.push(Check::new(kind.as_str(), ok, format!("step at 200 flagged at {at}")));
    }
    let traces: Vec<Vec<f64>> = (0..20)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + s);
            (0..10_000).map(|_| f64::from(u8::from(rng.random::<f64>() < 0.2))).collect()
        })
        .collect();
    let counts: Vec<String> = DetectorKind::ALL
        .into_iter()
        .map(|kind| {
            let n: usize = traces.iter().map(|t| drift_points(kind, t).len()).sum();
            parts.push(Check::new(kind.as_str(), n <= 5, format!("{n} false alarms")));
            format!("{kind} {n}")
        })
        .collect();
    let pass = parts.iter().all(|c| c.pass);
    let failed: Vec<String> = parts.iter().filter(|c| !c.pass).map(|c| format!("{} {}", c.name, c.detail)).collect();
    let detail = format!(
        "{} {}; {} {}; false alarms: {}{}",
        parts[0].name,
        parts[0].detail,
        parts[1].name,
        parts[1].detail,
        counts.join(", "),
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
    );
    Check::new("detector sanity", pass, detail)
}
