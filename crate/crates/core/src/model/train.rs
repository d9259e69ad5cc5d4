//! Training loop: beam-structured batches, decoupled-weight-decay adaptive
//! moments, and a linear warmup/decay schedule. Deterministic given a seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;
use crate::metrics::{roc_auc, ScoredExample};

use super::forward::{backward_pair, forward_pair, loss_and_grad, predict};
use super::params::{Gradients, Parameters};
use super::prep::PairExample;
use super::{ModelConfig, TrainConfig};

/// All labeled examples of one beam; a batch consumes whole beams.
#[derive(Debug, Clone)]
pub struct TrainBeam {
    pub examples: Vec<PairExample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub dev_acc: Option<f64>,
    pub dev_auc: Option<f64>,
}

impl LogRow {
    pub fn csv_header() -> &'static str {
        "epoch,step,loss,dev_acc,dev_auc"
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            self.epoch,
            self.step,
            self.loss,
            opt(self.dev_acc),
            opt(self.dev_auc)
        )
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best dev accuracy.
    pub params: Parameters,
    pub log: Vec<LogRow>,
    pub best_epoch: usize,
    pub best_dev_acc: f64,
}

/// Decoupled-weight-decay adaptive-moments optimizer.
pub struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl AdamW {
    pub fn new(n_params: usize, cfg: &TrainConfig) -> AdamW {
        AdamW {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
        }
    }

    pub fn step(&mut self, params: &mut Parameters, grads: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.data.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params.data[i] -=
                lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * params.data[i]);
        }
    }
}

/// Linear warmup to `lr_max`, then linear decay to zero. `step` is 1-based.
pub fn schedule_lr(step: usize, total_steps: usize, warmup_steps: usize, lr_max: f64) -> f64 {
    if step <= warmup_steps {
        lr_max * step as f64 / warmup_steps as f64
    } else {
        lr_max * (total_steps - step) as f64 / (total_steps - warmup_steps).max(1) as f64
    }
}

fn dev_metrics(params: &Parameters, dev: &[PairExample]) -> Result<(f64, Option<f64>), ModelError> {
    if dev.is_empty() {
        return Ok((0.0, None));
    }
    let scores = predict(params, dev)?;
    let correct = scores
        .iter()
        .zip(dev)
        .filter(|(s, ex)| (**s >= 0.5) == ex.label)
        .count();
    let acc = correct as f64 / dev.len() as f64;
    let examples: Vec<ScoredExample> = scores
        .iter()
        .zip(dev)
        .map(|(s, ex)| ScoredExample {
            question_id: ex.question_id.clone(),
            db_id: ex.db_id.clone(),
            score: *s,
            label: ex.label,
            beam_rank: ex.beam_rank,
        })
        .collect();
    Ok((acc, roc_auc(&examples).ok()))
}

/// Trains from a fresh initialization and returns the checkpoint of the
/// epoch with the highest dev accuracy, plus the per-step training log.
pub fn train(
    beams: &[TrainBeam],
    dev: &[PairExample],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    train_cfg.validate()?;
    let beams: Vec<&TrainBeam> = beams.iter().filter(|b| !b.examples.is_empty()).collect();
    if beams.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut params = Parameters::init(model_cfg)?;
    let mut optimizer = AdamW::new(params.data.len(), train_cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);

    let steps_per_epoch = beams.len().div_ceil(train_cfg.batch_beams);
    let total_steps = steps_per_epoch * train_cfg.epochs;
    let warmup_steps = ((total_steps as f64 * train_cfg.warmup_fraction).ceil() as usize).max(1);

    let mut log = Vec::new();
    let mut best: Option<(usize, f64, Parameters)> = None;
    let mut step = 0usize;
    let dropout = model_cfg.dropout_rate;

    for epoch in 1..=train_cfg.epochs {
        let mut order: Vec<usize> = (0..beams.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(train_cfg.batch_beams) {
            step += 1;
            let batch: Vec<&PairExample> =
                chunk.iter().flat_map(|&bi| beams[bi].examples.iter()).collect();
            let mut grads = Gradients::zeros(&params);
            let mut scores = Vec::with_capacity(batch.len());
            let mut labels = Vec::with_capacity(batch.len());
            let mut traces = Vec::with_capacity(batch.len());
            for ex in &batch {
                let dropout_arg = (dropout > 0.0).then_some((&mut rng, dropout));
                let trace = forward_pair(ex, &params, dropout_arg)?;
                scores.push(trace.score);
                labels.push(ex.label);
                traces.push(trace);
            }
            let (batch_loss, _) = loss_and_grad(&scores, &labels)?;
            let n = batch.len() as f64;
            for ((ex, trace), &label) in batch.iter().zip(&traces).zip(&labels) {
                let y = if label { 1.0 } else { 0.0 };
                let d_logit = (trace.score - y) / n;
                backward_pair(ex, trace, d_logit, &params, &mut grads);
            }
            let lr = schedule_lr(step, total_steps, warmup_steps, train_cfg.learning_rate);
            optimizer.step(&mut params, &grads.data, lr);
            if !params.all_finite() {
                return Err(ModelError::Numerical(format!("parameters after step {step}")));
            }
            log.push(LogRow { epoch, step, loss: batch_loss, dev_acc: None, dev_auc: None });
        }
        let (dev_acc, dev_auc) = dev_metrics(&params, dev)?;
        if let Some(row) = log.last_mut() {
            row.dev_acc = Some(dev_acc);
            row.dev_auc = dev_auc;
        }
        if best.as_ref().is_none_or(|(_, acc, _)| dev_acc > *acc) {
            best = Some((epoch, dev_acc, params.clone()));
        }
    }
    let (best_epoch, best_dev_acc, best_params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { params: best_params, log, best_epoch, best_dev_acc })
}
