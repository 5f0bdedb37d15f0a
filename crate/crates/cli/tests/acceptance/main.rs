//! Acceptance suite: one PASS/FAIL/BLOCKED line per criterion.
//!
//! Everything runs inside one test so the timing criterion never overlaps
//! a training run. Criteria that need the CIFAR-10 binary batches read
//! them from `$DATA_DIR` and report BLOCKED when they are absent; a
//! BLOCKED line is not a pass.

#[path = "../common/mod.rs"]
mod common;
mod criteria;

use std::io::Write as _;
use std::time::Instant;

use criteria::{Outcome, Verdict};
use sclc_cli::ExperimentConfig;

/// Writes to the process stdout directly so the lines show up even when
/// the test harness captures output.
fn report(args: std::fmt::Arguments<'_>) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{args}");
    let _ = out.flush();
}

struct Line {
    id: usize,
    name: &'static str,
    verdict: Verdict,
    seconds: f64,
}

fn evaluate(id: usize, name: &'static str, f: impl FnOnce() -> Outcome) -> Line {
    let start = Instant::now();
    let verdict = match f() {
        Ok(v) => v,
        Err(e) => Verdict::Fail(format!("error: {e}")),
    };
    let line = Line {
        id,
        name,
        verdict,
        seconds: start.elapsed().as_secs_f64(),
    };
    let (tag, detail) = match &line.verdict {
        Verdict::Pass(d) => ("PASS", d),
        Verdict::Fail(d) => ("FAIL", d),
        Verdict::Blocked(d) => ("BLOCKED", d),
    };
    report(format_args!(
        "[{tag}] criterion {id:>2} {name}: {detail} [{:.1} s]",
        line.seconds
    ));
    line
}

/// Synthetic stand-in data for the criteria that only need some dataset
/// in the CIFAR-10 layout.
fn synthetic(root: &std::path::Path, out: &str) -> ExperimentConfig {
    ExperimentConfig {
        out_dir: root.join(out).to_string_lossy().into_owned(),
        ..common::tiny_config(&root.join("data"), &root.join(out))
    }
}

#[test]
fn acceptance_criteria() {
    let scratch = tempfile::tempdir().unwrap();
    common::write_synthetic_cifar(&scratch.path().join("data"), 40, 100, 0xacce);
    let cifar = criteria::cifar_root();
    let full = cifar
        .as_ref()
        .map(|root| criteria::cifar_config(root, &scratch.path().join("cifar")));
    let needs_cifar = |f: fn(&ExperimentConfig) -> Outcome| -> Outcome {
        match &full {
            Some(cfg) => f(cfg),
            None => Ok(Verdict::Blocked(criteria::blocked_reason())),
        }
    };

    let mut lines = vec![
        evaluate(1, "convolution theorem", criteria::conv_theorem),
        evaluate(2, "gradient suite", criteria::gradients),
        evaluate(3, "frontend linearity", criteria::linearity),
        evaluate(4, "KD trend", || needs_cifar(criteria::kd_trend)),
    ];
    let square_cfg = ExperimentConfig {
        side: 32,
        train_size: 200,
        test_size: 100,
        teacher_epochs: 2,
        student_epochs: 3,
        ..synthetic(scratch.path(), "square")
    };
    lines.push(evaluate(
        5,
        "square-nonlinearity student (synthetic CIFAR-layout data)",
        || criteria::square_variant(&square_cfg),
    ));
    lines.push(evaluate(6, "ablation ordering", || {
        needs_cifar(criteria::ablation_ordering)
    }));
    lines.push(evaluate(7, "resolution trend", || {
        needs_cifar(criteria::resolution_trend)
    }));
    lines.push(evaluate(8, "latency model", criteria::latency));
    lines.push(evaluate(9, "scaling fits", || {
        criteria::scaling(&criteria::SCALING_SIDES)
    }));
    let det_cfg = synthetic(scratch.path(), "determinism");
    lines.push(evaluate(10, "determinism (synthetic CIFAR-layout data)", || {
        criteria::determinism(&det_cfg, &scratch.path().join("determinism"))
    }));

    let count = |pred: fn(&Verdict) -> bool| lines.iter().filter(|l| pred(&l.verdict)).count();
    let passed = count(|v| matches!(v, Verdict::Pass(_)));
    let blocked = count(|v| matches!(v, Verdict::Blocked(_)));
    report(format_args!(
        "acceptance: {passed} passed, {blocked} blocked, {} failed of {}",
        lines.len() - passed - blocked,
        lines.len()
    ));
    let failed: Vec<String> = lines
        .iter()
        .filter(|l| matches!(l.verdict, Verdict::Fail(_)))
        .map(|l| format!("{} ({})", l.id, l.name))
        .collect();
    assert!(failed.is_empty(), "failing criteria: {}", failed.join(", "));
}
