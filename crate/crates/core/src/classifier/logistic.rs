//! Multinomial logistic regression trained with minibatch Adam.
//!
//! A fixed validation subset is held out. After every update the validation
//! loss is evaluated: the learning rate halves after `lr_patience` updates
//! without improvement, and training stops after `stop_patience` updates
//! without improvement, but never before the first epoch is complete. The
//! returned parameters are those with the best validation loss seen.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{check_finite, linear_scores, ScalerStats};
use crate::{HydraError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticProtocol {
    pub validation_size: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    /// Updates without improvement before the learning rate halves.
    pub lr_patience: usize,
    /// Updates without improvement before training stops (after epoch 1).
    pub stop_patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for LogisticProtocol {
    fn default() -> Self {
        Self {
            validation_size: 2048,
            minibatch: 256,
            learning_rate: 1e-4,
            lr_patience: 50,
            stop_patience: 100,
            max_epochs: 1000,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ScheduleEvent {
    LrHalved { update: usize, learning_rate: f64 },
    Stopped { update: usize },
}

/// What happened at one observed update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScheduleStep {
    pub improved: bool,
    pub halved: bool,
    pub stop: bool,
}

/// Plateau bookkeeping over a stream of validation losses.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauSchedule {
    pub learning_rate: f64,
    lr_patience: usize,
    stop_patience: usize,
    best: f64,
    since_best: usize,
    since_lr_change: usize,
    pub events: Vec<ScheduleEvent>,
}

impl PlateauSchedule {
    pub fn new(learning_rate: f64, lr_patience: usize, stop_patience: usize) -> Self {
        Self {
            learning_rate,
            lr_patience,
            stop_patience,
            best: f64::INFINITY,
            since_best: 0,
            since_lr_change: 0,
            events: Vec::new(),
        }
    }

    /// Record the validation loss after update number `update` (1-based).
    pub fn observe(&mut self, update: usize, loss: f64, first_epoch_done: bool) -> ScheduleStep {
        let mut step = ScheduleStep::default();
        if loss < self.best {
            self.best = loss;
            self.since_best = 0;
            self.since_lr_change = 0;
            step.improved = true;
        } else {
            self.since_best += 1;
            self.since_lr_change += 1;
            if self.since_lr_change >= self.lr_patience {
                self.learning_rate /= 2.0;
                self.since_lr_change = 0;
                step.halved = true;
                self.events.push(ScheduleEvent::LrHalved {
                    update,
                    learning_rate: self.learning_rate,
                });
            }
        }
        if first_epoch_done && self.since_best >= self.stop_patience {
            step.stop = true;
            self.events.push(ScheduleEvent::Stopped { update });
        }
        step
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Validation loss after each update.
    pub validation_losses: Vec<f64>,
    pub events: Vec<ScheduleEvent>,
    pub updates: usize,
    pub updates_per_epoch: usize,
    pub best_update: usize,
    pub stopped_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// `C x F`, in standardized feature space.
    pub weights: Array2<f64>,
    pub intercepts: Vec<f64>,
    pub scaler: ScalerStats,
    pub protocol: LogisticProtocol,
    pub training_log: TrainingLog,
}

impl LogisticModel {
    pub fn predict_proba(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let x = self.scaler.apply(features)?;
        let mut scores = linear_scores(&x, &self.weights, &self.intercepts);
        softmax_rows(&mut scores);
        Ok(scores)
    }
}

fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.axis_iter_mut(Axis(0)) {
        let top = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - top).exp());
        let total = row.sum();
        row.mapv_inplace(|v| v / total);
    }
}

/// Mean cross-entropy of `softmax(x W' + b)` and its gradient with respect
/// to `W` (`C x F`) and `b`.
pub fn loss_and_gradient(
    weights: &Array2<f64>,
    intercepts: &Array1<f64>,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let mut probs = x.dot(&weights.t()) + intercepts;
    softmax_rows(&mut probs);
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        loss -= probs[[i, y]].max(f64::MIN_POSITIVE).ln();
        probs[[i, y]] -= 1.0;
    }
    probs /= n;
    let grad_w = probs.t().dot(&x);
    let grad_b = probs.sum_axis(Axis(0));
    (loss / n, grad_w, grad_b)
}

fn mean_loss(weights: &Array2<f64>, intercepts: &Array1<f64>, x: ArrayView2<'_, f64>, labels: &[usize]) -> f64 {
    let logits = x.dot(&weights.t()) + intercepts;
    let mut loss = 0.0;
    for (row, &y) in logits.axis_iter(Axis(0)).zip(labels) {
        let top = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let log_sum = row.iter().map(|v| (v - top).exp()).sum::<f64>().ln() + top;
        loss += log_sum - row[y];
    }
    loss / labels.len() as f64
}

struct Adam {
    m_w: Array2<f64>,
    v_w: Array2<f64>,
    m_b: Array1<f64>,
    v_b: Array1<f64>,
    t: i32,
}

impl Adam {
    fn new(c: usize, f: usize) -> Self {
        Self {
            m_w: Array2::zeros((c, f)),
            v_w: Array2::zeros((c, f)),
            m_b: Array1::zeros(c),
            v_b: Array1::zeros(c),
            t: 0,
        }
    }

    fn step(
        &mut self,
        p: &LogisticProtocol,
        lr: f64,
        w: &mut Array2<f64>,
        b: &mut Array1<f64>,
        gw: &Array2<f64>,
        gb: &Array1<f64>,
    ) {
        self.t += 1;
        let c1 = 1.0 - p.beta1.powi(self.t);
        let c2 = 1.0 - p.beta2.powi(self.t);
        let update = |param: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = p.beta1 * *m + (1.0 - p.beta1) * g;
            *v = p.beta2 * *v + (1.0 - p.beta2) * g * g;
            *param -= lr * (*m / c1) / ((*v / c2).sqrt() + p.epsilon);
        };
        ndarray::Zip::from(w)
            .and(&mut self.m_w)
            .and(&mut self.v_w)
            .and(gw)
            .for_each(|param, m, v, &g| update(param, m, v, g));
        ndarray::Zip::from(b)
            .and(&mut self.m_b)
            .and(&mut self.v_b)
            .and(gb)
            .for_each(|param, m, v, &g| update(param, m, v, g));
    }
}

pub fn fit_logistic(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    protocol: &LogisticProtocol,
) -> Result<LogisticModel> {
    check_finite(features)?;
    let n = features.nrows();
    if labels.len() != n {
        return Err(HydraError::LengthMismatch {
            expected: n,
            found: labels.len(),
            line: None,
        });
    }
    if n <= protocol.validation_size {
        return Err(HydraError::InsufficientData(format!(
            "logistic regression needs more than {} training examples (the validation size), got {n}",
            protocol.validation_size
        )));
    }
    if protocol.minibatch == 0 || protocol.learning_rate.is_nan() || protocol.learning_rate <= 0.0 || protocol.max_epochs == 0 {
        return Err(HydraError::InvalidConfig(
            "minibatch, learning rate and max_epochs must be positive".into(),
        ));
    }

    let scaler = ScalerStats::fit(features)?;
    let x = scaler.apply(features)?;

    let mut rng = ChaCha20Rng::seed_from_u64(protocol.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (val_idx, train_idx) = order.split_at(protocol.validation_size);
    let x_val = x.select(Axis(0), val_idx);
    let y_val: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();
    let mut train_idx = train_idx.to_vec();

    let f = x.ncols();
    let mut w = Array2::<f64>::zeros((n_classes, f));
    let mut b = Array1::<f64>::zeros(n_classes);
    let mut best = (w.clone(), b.clone());
    let mut adam = Adam::new(n_classes, f);
    let mut schedule = PlateauSchedule::new(protocol.learning_rate, protocol.lr_patience, protocol.stop_patience);
    let updates_per_epoch = train_idx.len().div_ceil(protocol.minibatch);
    let mut log = TrainingLog {
        updates_per_epoch,
        ..TrainingLog::default()
    };

    'epochs: for _ in 0..protocol.max_epochs {
        train_idx.shuffle(&mut rng);
        for batch in train_idx.chunks(protocol.minibatch) {
            let xb = x.select(Axis(0), batch);
            let yb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (_, gw, gb) = loss_and_gradient(&w, &b, xb.view(), &yb);
            adam.step(protocol, schedule.learning_rate, &mut w, &mut b, &gw, &gb);
            log.updates += 1;

            let val_loss = mean_loss(&w, &b, x_val.view(), &y_val);
            log.validation_losses.push(val_loss);
            let step = schedule.observe(log.updates, val_loss, log.updates >= updates_per_epoch);
            if step.improved {
                best = (w.clone(), b.clone());
                log.best_update = log.updates;
            }
            if step.stop {
                log.stopped_at = Some(log.updates);
                break 'epochs;
            }
        }
    }
    log.events = schedule.events;
    Ok(LogisticModel {
        weights: best.0,
        intercepts: best.1.to_vec(),
        scaler,
        protocol: protocol.clone(),
        training_log: log,
    })
}
