//! Command implementations. Every command writes CSV tables and a markdown
//! report into the configured output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sclc_bench::{
    latency_estimate, summary_markdown, time_layer_with, LayerKind, ScalingSummary, TimeOptions, TimingTable,
};
use sclc_core::dataset::{Dataset, Split};
use sclc_core::distill::{evaluate, train_plain, train_student_kd, History, TrainConfig};
use sclc_core::layers::Pointwise;
use sclc_core::network::{
    backend_only, copy_backend, forward, linear_counterpart, load_params_for, max_pool_counterpart, mini_teacher,
    save_params, NetworkSpec, ParamStore,
};
use sclc_core::Error;

use crate::config::{DatasetName, ExperimentConfig, StudentArch};
use crate::data::{load_cifar10, load_mnist, resample};
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    TrainTeacher,
    TrainStudent,
    Ablate,
    SweepResolution,
    Bench,
    Latency,
    Gridsearch,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::TrainTeacher,
        Command::TrainStudent,
        Command::Ablate,
        Command::SweepResolution,
        Command::Bench,
        Command::Latency,
        Command::Gridsearch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::TrainTeacher => "train-teacher",
            Command::TrainStudent => "train-student",
            Command::Ablate => "ablate",
            Command::SweepResolution => "sweep-resolution",
            Command::Bench => "bench",
            Command::Latency => "latency",
            Command::Gridsearch => "gridsearch",
        }
    }
}

/// Files a command wrote, in write order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
}

struct Writer {
    dir: PathBuf,
    outcome: Outcome,
}

impl Writer {
    fn new(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(Writer {
            dir,
            outcome: Outcome::default(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.outcome.files.push(path);
        Ok(())
    }

    fn params(&mut self, name: &str, params: &ParamStore) -> Result<(), CliError> {
        let path = self.path(name);
        save_params(params, &path)?;
        self.outcome.files.push(path);
        Ok(())
    }
}

pub fn run(cmd: Command, cfg: &ExperimentConfig, kd: bool) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let mut out = Writer::new(cfg.out_path())?;
    match cmd {
        Command::TrainTeacher => cmd_train_teacher(cfg, &mut out)?,
        Command::TrainStudent => cmd_train_student(cfg, kd, &mut out)?,
        Command::Ablate => cmd_ablate(cfg, &mut out)?,
        Command::SweepResolution => cmd_sweep(cfg, &mut out)?,
        Command::Bench => cmd_bench(cfg, &mut out)?,
        Command::Latency => cmd_latency(cfg, &mut out)?,
        Command::Gridsearch => cmd_gridsearch(cfg, &mut out)?,
    }
    Ok(out.outcome)
}

/// Train and test splits at the configured size and side.
pub fn load_splits(cfg: &ExperimentConfig, side: usize) -> Result<(Dataset, Dataset), CliError> {
    let root = cfg.data_root()?;
    let load = |split, limit| match cfg.dataset {
        DatasetName::Cifar10 => load_cifar10(&root, split, Some(limit)),
        DatasetName::Mnist => load_mnist(&root, split, Some(limit)),
    };
    let train = load(Split::Train, cfg.train_size)?;
    let test = load(Split::Test, cfg.test_size)?;
    Ok((resample(&train, side)?, resample(&test, side)?))
}

pub fn teacher_spec(data: &Dataset) -> NetworkSpec {
    let s = data.image_shape();
    mini_teacher(s.c, s.h, data.class_count(), Pointwise::Relu)
}

pub fn student_spec(arch: StudentArch, teacher: &NetworkSpec) -> Result<NetworkSpec, CliError> {
    Ok(match arch {
        StudentArch::Sclc => linear_counterpart(teacher)?,
        StudentArch::SclcMaxpool => max_pool_counterpart(teacher)?,
        StudentArch::Square => {
            let s = teacher.input_shape;
            mini_teacher(s.c, s.h, teacher.class_count, Pointwise::Square)
        }
    })
}

fn arch_name(arch: StudentArch) -> &'static str {
    match arch {
        StudentArch::Sclc => "sclc",
        StudentArch::SclcMaxpool => "sclc-maxpool",
        StudentArch::Square => "square",
    }
}

/// Parameter-init seed for the student, distinct from the teacher's.
fn student_init_seed(seed: u64) -> u64 {
    seed ^ 0x5c1c_0000_0000_0001
}

fn load_teacher(cfg: &ExperimentConfig, spec: &NetworkSpec) -> Result<ParamStore, CliError> {
    let path = cfg.teacher_path();
    if !path.is_file() {
        return Err(CliError::MissingFile {
            path,
            hint: "train it first with `--cmd train-teacher` using the same config, or point teacher_checkpoint at an existing file".into(),
        });
    }
    Ok(load_params_for(spec, &path)?)
}

/// How a training run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Completed,
    /// Training stopped on a non-finite value; the message says where.
    Diverged(String),
}

pub struct TrainedNet {
    pub spec: NetworkSpec,
    pub params: ParamStore,
    pub history: History,
    pub status: RunStatus,
    pub test_accuracy: f64,
}

fn finish(
    spec: NetworkSpec,
    params: ParamStore,
    result: sclc_core::Result<History>,
    test: &Dataset,
) -> Result<TrainedNet, CliError> {
    let (history, status) = match result {
        Ok(h) => (h, RunStatus::Completed),
        Err(Error::NonFinite { context }) => (History::default(), RunStatus::Diverged(context)),
        Err(e) => return Err(e.into()),
    };
    let test_accuracy = match status {
        RunStatus::Completed => evaluate(&spec, &params, test)?,
        RunStatus::Diverged(_) => f64::NAN,
    };
    Ok(TrainedNet {
        spec,
        params,
        history,
        status,
        test_accuracy,
    })
}

pub fn train_teacher_on(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<TrainedNet, CliError> {
    let spec = teacher_spec(train);
    let mut params = ParamStore::init(&spec, cfg.seed)?;
    let result = train_plain(&spec, &mut params, train, test, &cfg.teacher_train());
    finish(spec, params, result, test)
}

/// Trains a student. With `kd` set the teacher's logits drive the soft
/// term; the teacher also seeds the dense backend when
/// `teacher_init_backend` is on.
pub fn train_student_on(
    cfg: &ExperimentConfig,
    spec: NetworkSpec,
    teacher: Option<(&NetworkSpec, &ParamStore)>,
    kd: bool,
    train_cfg: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<TrainedNet, CliError> {
    let mut params = ParamStore::init(&spec, student_init_seed(cfg.seed))?;
    if let (true, Some((tspec, tparams))) = (cfg.teacher_init_backend, teacher) {
        copy_backend(tspec, tparams, &spec, &mut params)?;
    }
    let result = match teacher {
        Some((tspec, tparams)) if kd => train_student_kd(tspec, tparams, &spec, &mut params, train, test, train_cfg),
        None if kd => return Err(CliError::Config("distillation needs a teacher".into())),
        _ => train_plain(&spec, &mut params, train, test, train_cfg),
    };
    finish(spec, params, result, test)
}

fn fmt_acc(a: f64) -> String {
    if a.is_nan() {
        "diverged".into()
    } else {
        format!("{a:.6}")
    }
}

fn pct(a: f64) -> String {
    if a.is_nan() {
        "diverged".into()
    } else {
        format!("{:.2}%", a * 100.0)
    }
}

fn status_line(status: &RunStatus) -> String {
    match status {
        RunStatus::Completed => "completed".into(),
        RunStatus::Diverged(why) => format!("diverged ({why})"),
    }
}

fn cmd_train_teacher(cfg: &ExperimentConfig, out: &mut Writer) -> Result<(), CliError> {
    let (train, test) = load_splits(cfg, cfg.side)?;
    let net = train_teacher_on(cfg, &train, &test)?;
    out.text("teacher_history.csv", &net.history.to_csv())?;
    if net.status == RunStatus::Completed {
        let path = cfg.teacher_path();
        save_params(&net.params, &path)?;
        out.outcome.files.push(path);
    }
    let mut md = String::from("# Teacher training\n\n");
    let _ = writeln!(
        md,
        "- network: {} ({} parameters)",
        net.spec.name,
        net.spec.param_count()
    );
    let _ = writeln!(
        md,
        "- data: {} train / {} test, side {}",
        train.len(),
        test.len(),
        cfg.side
    );
    let _ = writeln!(md, "- epochs: {}, seed {}", cfg.teacher_epochs, cfg.seed);
    let _ = writeln!(md, "- status: {}", status_line(&net.status));
    let _ = writeln!(md, "- test accuracy: {}", pct(net.test_accuracy));
    out.text("train-teacher.md", &md)
}

fn cmd_train_student(cfg: &ExperimentConfig, kd: bool, out: &mut Writer) -> Result<(), CliError> {
    let (train, test) = load_splits(cfg, cfg.side)?;
    let tspec = teacher_spec(&train);
    let teacher = if kd || cfg.teacher_init_backend {
        Some(load_teacher(cfg, &tspec)?)
    } else {
        None
    };
    let spec = student_spec(cfg.student_arch, &tspec)?;
    let mode = if kd { "kd" } else { "plain" };
    let tag = format!("student_{}_{mode}", arch_name(cfg.student_arch));
    let net = train_student_on(
        cfg,
        spec,
        teacher.as_ref().map(|p| (&tspec, p)),
        kd,
        &cfg.student_train(),
        &train,
        &test,
    )?;
    out.text(&format!("{tag}_history.csv"), &net.history.to_csv())?;
    if net.status == RunStatus::Completed {
        out.params(&format!("{tag}.sclp"), &net.params)?;
    }
    let mut md = format!("# Student training ({mode})\n\n");
    let _ = writeln!(
        md,
        "- network: {} ({} parameters)",
        net.spec.name,
        net.spec.param_count()
    );
    let _ = writeln!(
        md,
        "- data: {} train / {} test, side {}",
        train.len(),
        test.len(),
        cfg.side
    );
    let _ = writeln!(md, "- epochs: {}, seed {}", cfg.student_epochs, cfg.seed);
    if kd {
        let _ = writeln!(
            md,
            "- alpha {}, temperature {}, t² scaling {}",
            cfg.alpha, cfg.temperature, cfg.t_squared_scaling
        );
    }
    let _ = writeln!(md, "- status: {}", status_line(&net.status));
    let _ = writeln!(md, "- test accuracy: {}", pct(net.test_accuracy));
    out.text(&format!("{tag}.md"), &md)
}

pub const ABLATION_ROWS: [&str; 5] = [
    "max-pool student + KD",
    "spectral-pool student + KD",
    "backend only",
    "frontend + backend",
    "frontend + backend + KD",
];

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn cmd_ablate(cfg: &ExperimentConfig, out: &mut Writer) -> Result<(), CliError> {
    let (train, test) = load_splits(cfg, cfg.side)?;
    let tspec = teacher_spec(&train);
    let tparams = load_teacher(cfg, &tspec)?;
    let teacher = Some((&tspec, &tparams));
    let teacher_acc = evaluate(&tspec, &tparams, &test)?;
    let mut per_row: Vec<Vec<f64>> = vec![Vec::new(); ABLATION_ROWS.len()];
    let mut csv = String::from("row,seed,accuracy\n");
    for &seed in &cfg.seeds {
        let c = cfg.with_seed(seed);
        let tc = c.student_train();
        let maxpool = train_student_on(&c, max_pool_counterpart(&tspec)?, teacher, true, &tc, &train, &test)?;
        let spectral = train_student_on(&c, linear_counterpart(&tspec)?, teacher, true, &tc, &train, &test)?;
        let pixels = backend_only(train.image_shape(), train.class_count());
        let backend = train_student_on(&c, pixels, None, false, &tc, &train, &test)?;
        let frontend = train_student_on(&c, linear_counterpart(&tspec)?, None, false, &tc, &train, &test)?;
        // the KD row is the spectral-pool student run again; reuse it
        let accs = [
            maxpool.test_accuracy,
            spectral.test_accuracy,
            backend.test_accuracy,
            frontend.test_accuracy,
            spectral.test_accuracy,
        ];
        for (i, a) in accs.into_iter().enumerate() {
            per_row[i].push(a);
            let _ = writeln!(csv, "{},{seed},{}", ABLATION_ROWS[i], fmt_acc(a));
        }
    }
    out.text("ablation.csv", &csv)?;
    let mut summary = String::from("row,mean_accuracy\n");
    let mut md = String::from("# Ablation\n\n| row | mean accuracy |\n|---|---|\n");
    for (name, accs) in ABLATION_ROWS.iter().zip(&per_row) {
        let m = mean(accs);
        let _ = writeln!(summary, "{name},{}", fmt_acc(m));
        let _ = writeln!(md, "| {name} | {} |", pct(m));
    }
    let _ = writeln!(
        md,
        "\nTeacher test accuracy {}. Means over seeds {:?}, {} student epochs each.",
        pct(teacher_acc),
        cfg.seeds,
        cfg.student_epochs
    );
    out.text("ablation_summary.csv", &summary)?;
    out.text("ablate.md", &md)
}

/// Ranks with ties sharing their average rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; `None` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some(cov / (vx * vy).sqrt())
    }
}

fn forward_ms(spec: &NetworkSpec, params: &ParamStore, data: &Dataset) -> Result<f64, CliError> {
    let n = data.len().min(64);
    let batch = data.images().batch_slice(0..n);
    let start = Instant::now();
    forward(spec, params, &batch, false)?;
    Ok(start.elapsed().as_secs_f64() * 1e3 / n as f64)
}

fn cmd_sweep(cfg: &ExperimentConfig, out: &mut Writer) -> Result<(), CliError> {
    let root = cfg.data_root()?;
    let (train_full, test_full) = match cfg.dataset {
        DatasetName::Cifar10 => (
            load_cifar10(&root, Split::Train, Some(cfg.train_size))?,
            load_cifar10(&root, Split::Test, Some(cfg.test_size))?,
        ),
        DatasetName::Mnist => (
            load_mnist(&root, Split::Train, Some(cfg.train_size))?,
            load_mnist(&root, Split::Test, Some(cfg.test_size))?,
        ),
    };
    let mut csv = String::from("side,seed,teacher_accuracy,student_accuracy\n");
    let (mut sides, mut teacher_accs, mut student_accs) = (Vec::new(), Vec::new(), Vec::new());
    let mut timing = String::new();
    for &side in &cfg.resolutions {
        let train = resample(&train_full, side)?;
        let test = resample(&test_full, side)?;
        for &seed in &cfg.seeds {
            let c = cfg.with_seed(seed);
            let teacher = train_teacher_on(&c, &train, &test)?;
            let spec = linear_counterpart(&teacher.spec)?;
            let student = train_student_on(
                &c,
                spec,
                Some((&teacher.spec, &teacher.params)),
                true,
                &c.student_train(),
                &train,
                &test,
            )?;
            let _ = writeln!(
                csv,
                "{side},{seed},{},{}",
                fmt_acc(teacher.test_accuracy),
                fmt_acc(student.test_accuracy)
            );
            if seed == cfg.seeds[0] {
                let _ = writeln!(
                    timing,
                    "| {side} | {:.4} | {:.4} |",
                    forward_ms(&teacher.spec, &teacher.params, &test)?,
                    forward_ms(&student.spec, &student.params, &test)?
                );
            }
            sides.push(side as f64);
            teacher_accs.push(teacher.test_accuracy);
            student_accs.push(student.test_accuracy);
        }
    }
    out.text("sweep.csv", &csv)?;
    let rho = |acc: &[f64]| spearman(&sides, acc).map_or("undefined".to_string(), |r| format!("{r:.4}"));
    let mut summary = String::from("network,spearman\n");
    let _ = writeln!(summary, "teacher,{}", rho(&teacher_accs));
    let _ = writeln!(summary, "student,{}", rho(&student_accs));
    out.text("sweep_summary.csv", &summary)?;
    let mut md = String::from("# Resolution sweep\n\n| side | teacher mean | student mean |\n|---|---|---|\n");
    for &side in &cfg.resolutions {
        let pick = |acc: &[f64]| {
            let v: Vec<f64> = sides
                .iter()
                .zip(acc)
                .filter(|(s, _)| **s == side as f64)
                .map(|(_, a)| *a)
                .collect();
            pct(mean(&v))
        };
        let _ = writeln!(md, "| {side} | {} | {} |", pick(&teacher_accs), pick(&student_accs));
    }
    let _ = writeln!(
        md,
        "\nSpearman(side, accuracy) over seeds {:?}: teacher {}, student {}.",
        cfg.seeds,
        rho(&teacher_accs),
        rho(&student_accs)
    );
    let _ = writeln!(
        md,
        "\n| side | teacher ms/img | student ms/img |\n|---|---|---|\n{timing}"
    );
    out.text("sweep-resolution.md", &md)
}

/// Timing for every configured kernel (convolutions) plus both pools.
pub fn bench_table(cfg: &ExperimentConfig) -> Result<TimingTable, CliError> {
    let opts = TimeOptions {
        reps: cfg.bench_reps,
        seed: cfg.seed,
        include_input_fft: cfg.bench_include_fft,
    };
    let mut table = TimingTable::default();
    for &k in &cfg.bench_kernels {
        for kind in [LayerKind::SpatialConv, LayerKind::SpectralConv] {
            table.extend(time_layer_with(kind, &cfg.bench_sides, k, &opts)?);
        }
    }
    for kind in [LayerKind::MaxPool, LayerKind::SpectralPool] {
        table.extend(time_layer_with(kind, &cfg.bench_sides, 0, &opts)?);
    }
    Ok(table)
}

fn cmd_bench(cfg: &ExperimentConfig, out: &mut Writer) -> Result<(), CliError> {
    let table = bench_table(cfg)?;
    out.text("bench.csv", &table.to_csv())?;
    let mut md = String::from("# Layer timing\n\n");
    for &k in &cfg.bench_kernels {
        let sub = TimingTable {
            rows: table
                .rows
                .iter()
                .filter(|r| r.kernel == k && matches!(r.kind, LayerKind::SpatialConv | LayerKind::SpectralConv))
                .cloned()
                .collect(),
        };
        let _ = writeln!(md, "## {k}×{k} kernel\n");
        md.push_str(&summary_markdown(&sub, &ScalingSummary::from_table(&sub)));
        md.push('\n');
    }
    let pools = TimingTable {
        rows: table.rows.iter().filter(|r| r.kernel == 0).cloned().collect(),
    };
    md.push_str("## Pooling\n\n");
    md.push_str(&summary_markdown(&pools, &ScalingSummary::from_table(&pools)));
    out.text("bench.md", &md)
}

fn cmd_latency(cfg: &ExperimentConfig, out: &mut Writer) -> Result<(), CliError> {
    let model = cfg.latency_model();
    let b = latency_estimate(&model)?;
    out.text("latency.csv", &b.to_csv())?;
    let md = format!(
        "# Optical latency estimate\n\n{} B over {} bit/s, backend {} ms, optical {} ms.\n\n{}",
        model.payload_bytes,
        model.link_rate_bits_per_s,
        model.backend_ms,
        model.optical_ms,
        b.to_markdown()
    );
    out.text("latency.md", &md)
}

fn cmd_gridsearch(cfg: &ExperimentConfig, out: &mut Writer) -> Result<(), CliError> {
    let (train, test) = load_splits(cfg, cfg.side)?;
    let tspec = teacher_spec(&train);
    let tparams = load_teacher(cfg, &tspec)?;
    let mut csv = String::from("alpha,temperature,accuracy\n");
    let mut best: Option<(f64, f64, f64)> = None;
    for &alpha in &cfg.grid_alphas {
        for &temperature in &cfg.grid_temperatures {
            let tc = TrainConfig {
                alpha,
                temperature,
                ..cfg.student_train()
            };
            let spec = student_spec(cfg.student_arch, &tspec)?;
            let net = train_student_on(cfg, spec, Some((&tspec, &tparams)), true, &tc, &train, &test)?;
            let _ = writeln!(csv, "{alpha},{temperature},{}", fmt_acc(net.test_accuracy));
            if !net.test_accuracy.is_nan() && best.is_none_or(|b| net.test_accuracy > b.2) {
                best = Some((alpha, temperature, net.test_accuracy));
            }
        }
    }
    out.text("gridsearch.csv", &csv)?;
    let md = match best {
        Some((a, t, acc)) => format!(
            "# KD grid search\n\nBest: alpha {a}, temperature {t}, accuracy {}.\n",
            pct(acc)
        ),
        None => "# KD grid search\n\nEvery run diverged.\n".to_string(),
    };
    out.text("gridsearch.md", &md)
}

pub fn output_dir_of(outcome: &Outcome) -> Option<&Path> {
    outcome.files.first().and_then(|p| p.parent())
}
