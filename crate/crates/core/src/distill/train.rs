use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{argmax, cross_entropy, kd_loss, softmax};
use super::{sgd_step, TrainConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::{backward, forward, NetworkSpec, ParamStore};
use crate::tensor::{RealTensor4, Shape4};

const EVAL_BATCH: usize = 64;

static ACTIVE_RUNS: AtomicUsize = AtomicUsize::new(0);

/// True while a training loop is running anywhere in the process.
pub fn training_active() -> bool {
    ACTIVE_RUNS.load(Ordering::SeqCst) > 0
}

struct ActiveGuard;

impl ActiveGuard {
    fn enter() -> Self {
        ACTIVE_RUNS.fetch_add(1, Ordering::SeqCst);
        ActiveGuard
    }
}

impl Drop for ActiveGuard {
    fn drop(&mut self) {
        ACTIVE_RUNS.fetch_sub(1, Ordering::SeqCst);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample loss over the epoch.
    pub train_loss: f64,
    /// Mean cross-entropy against the labels.
    pub student_loss_term: f64,
    /// Mean soft (teacher) term; zero for plain training.
    pub temp_loss_term: f64,
    pub test_accuracy: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,student_loss_term,temp_loss_term,test_accuracy,wall_ms";

    pub fn final_accuracy(&self) -> Option<f64> {
        self.records.last().map(|r| r.test_accuracy)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:.12},{:.12},{:.12},{:.6},{:.3}",
                r.epoch, r.train_loss, r.student_loss_term, r.temp_loss_term, r.test_accuracy, r.wall_ms
            );
        }
        out
    }
}

/// Predicted class per image.
pub fn predict(net: &NetworkSpec, params: &ParamStore, images: &RealTensor4) -> Result<Vec<usize>> {
    let logits = logits_for(net, params, images)?;
    let k = net.class_count;
    Ok(logits.data().chunks(k).map(argmax).collect())
}

/// Fraction of samples whose argmax prediction equals the label.
pub fn evaluate(net: &NetworkSpec, params: &ParamStore, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset(format!("{} {} split", data.name(), data.split())));
    }
    let preds = predict(net, params, data.images())?;
    let correct = preds.iter().zip(data.labels()).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / data.len() as f64)
}

fn logits_for(net: &NetworkSpec, params: &ParamStore, images: &RealTensor4) -> Result<RealTensor4> {
    let n = images.shape().s;
    let k = net.class_count;
    let mut out = Vec::with_capacity(n * k);
    for start in (0..n).step_by(EVAL_BATCH) {
        let batch = images.batch_slice(start..(start + EVAL_BATCH).min(n));
        out.extend_from_slice(forward(net, params, &batch, false)?.0.data());
    }
    RealTensor4::from_vec(Shape4::new(n, k, 1, 1), out)
}

/// Trains on the labels alone with cross-entropy.
pub fn train_plain(
    net: &NetworkSpec,
    params: &mut ParamStore,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
) -> Result<History> {
    run(net, params, train, test, cfg, None)
}

/// Distills the frozen `teacher` into the student. Teacher logits are
/// computed once up front; the teacher is only ever borrowed immutably.
pub fn train_student_kd(
    teacher: &NetworkSpec,
    teacher_params: &ParamStore,
    student: &NetworkSpec,
    student_params: &mut ParamStore,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
) -> Result<History> {
    if teacher.class_count != student.class_count {
        return Err(Error::Config(format!(
            "teacher predicts {} classes, student {}",
            teacher.class_count, student.class_count
        )));
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset(format!("{} {} split", train.name(), train.split())));
    }
    let teacher_logits = logits_for(teacher, teacher_params, train.images())?;
    run(student, student_params, train, test, cfg, Some(&teacher_logits))
}

fn run(
    net: &NetworkSpec,
    params: &mut ParamStore,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
    teacher_logits: Option<&RealTensor4>,
) -> Result<History> {
    cfg.validate()?;
    for d in [train, test] {
        if d.is_empty() {
            return Err(Error::EmptyDataset(format!("{} {} split", d.name(), d.split())));
        }
        if d.class_count() != net.class_count {
            return Err(Error::Config(format!(
                "{} has {} classes but {} predicts {}",
                d.name(),
                d.class_count(),
                net.name,
                net.class_count
            )));
        }
    }
    params.check_against(net)?;
    let _guard = ActiveGuard::enter();
    let k = net.class_count;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let (mut total, mut hard, mut soft) = (0.0, 0.0, 0.0);
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (x, labels) = train.gather(idx);
            let (logits, tape) = forward(net, params, &x, true)?;
            let mut grad = vec![0.0; idx.len() * k];
            let inv = 1.0 / idx.len() as f64;
            for (s, (&i, &label)) in idx.iter().zip(&labels).enumerate() {
                let z = &logits.data()[s * k..(s + 1) * k];
                let (l, h, t, g) = match teacher_logits {
                    Some(tl) => {
                        let r = kd_loss(z, &tl.data()[i * k..(i + 1) * k], label, cfg)?;
                        (r.loss, r.hard, r.soft, r.grad)
                    }
                    None => {
                        let r = cross_entropy(&softmax(z)?, label)?;
                        (r.loss, r.loss, 0.0, r.grad)
                    }
                };
                if !l.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("{} training loss {l} at epoch {epoch}, batch {b}, sample {i}", net.name),
                    });
                }
                total += l;
                hard += h;
                soft += t;
                for (d, gv) in grad[s * k..(s + 1) * k].iter_mut().zip(g) {
                    *d = gv * inv;
                }
            }
            let grad = RealTensor4::from_vec(Shape4::new(idx.len(), k, 1, 1), grad)?;
            let grads = backward(net, params, &tape.expect("recorded tape"), &grad)?;
            sgd_step(params, &grads, cfg)?;
        }
        let n = train.len() as f64;
        let test_accuracy = evaluate(net, params, test)?;
        history.records.push(EpochRecord {
            epoch,
            train_loss: total / n,
            student_loss_term: hard / n,
            temp_loss_term: soft / n,
            test_accuracy,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(history)
}
