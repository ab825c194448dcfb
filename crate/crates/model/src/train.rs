//! Training loop: shuffled mini-batches, warmup schedule, early stopping
//! on dev macro-F1, and a per-epoch history.
//!
//! Batch members are independent; standard precision evaluates them in
//! parallel and reduces gradients in example order, so results are
//! bit-identical to the sequential high-precision mode.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use skg_core::{evaluate, Label};

use crate::config::{ModelConfig, PrecisionMode};
use crate::data::PreparedExample;
use crate::net::{loss_and_gradients, predict, DropoutState};
use crate::optim::{AdamW, WarmupSchedule};
use crate::params::Parameters;
use crate::tensor::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: Option<f64>,
    pub dev_macro_f1: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_macro_f1: Option<f64>,
    pub stopped_early: bool,
    pub optimizer_steps: usize,
}

/// Deterministic per-example RNG so dropout masks do not depend on thread
/// scheduling.
fn example_rng(seed: u64, draw: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ draw.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn batch_gradients(
    params: &Parameters,
    config: &ModelConfig,
    batch: &[(usize, &PreparedExample)],
    seed: u64,
    epoch: usize,
) -> Result<(f64, Vec<Matrix>)> {
    let run_one = |&(index, example): &(usize, &PreparedExample)| -> Result<(f64, Vec<Matrix>)> {
        let mut rng = example_rng(seed, (epoch as u64) << 32 | index as u64);
        let dropout = if config.dropout > 0.0 {
            Some(DropoutState {
                rng: &mut rng,
                rate: config.dropout,
            })
        } else {
            None
        };
        loss_and_gradients(params, config, example, config.fusion_mode, dropout)
    };

    let per_example: Vec<(f64, Vec<Matrix>)> = match config.precision {
        PrecisionMode::High => batch.iter().map(run_one).collect::<Result<_>>()?,
        PrecisionMode::Standard => batch
            .par_iter()
            .map(run_one)
            .collect::<Result<Vec<_>>>()?,
    };

    // Fixed-order reduction keeps parallel runs reproducible.
    let scale = 1.0 / batch.len() as f64;
    let mut total_loss = 0.0;
    let mut accumulated: Vec<Matrix> = params
        .tensors()
        .iter()
        .map(|t| Matrix::zeros(t.rows, t.cols))
        .collect();
    for (loss, grads) in &per_example {
        total_loss += loss * scale;
        for (acc, g) in accumulated.iter_mut().zip(grads) {
            acc.add_assign_scaled(g, scale);
        }
    }
    Ok((total_loss, accumulated))
}

fn dev_metrics(
    params: &Parameters,
    config: &ModelConfig,
    dev: &[PreparedExample],
) -> Result<Option<(f64, f64)>> {
    if dev.is_empty() {
        return Ok(None);
    }
    let mut predictions = Vec::with_capacity(dev.len());
    let mut golds = Vec::with_capacity(dev.len());
    for example in dev {
        let class = predict(params, config, example, config.fusion_mode)?;
        predictions.push(Label::from_index(class).expect("class index"));
        golds.push(Label::from_index(example.label).expect("label index"));
    }
    let report = evaluate(&predictions, &golds)?;
    Ok(Some((report.accuracy, report.macro_f1)))
}

fn diagnostic_dump(step: usize, loss: f64, params: &Parameters) -> String {
    let norms: Vec<String> = Parameters::NAMES
        .iter()
        .zip(params.tensors())
        .map(|(name, t)| {
            let norm = t.data.iter().map(|v| v * v).sum::<f64>().sqrt();
            format!("{name}={norm:.4e}")
        })
        .collect();
    format!("step {step}: loss {loss}; tensor norms: {}", norms.join(", "))
}

/// Train in place; returns the per-epoch history. The best-dev parameters
/// are restored before returning whenever a dev set is present.
pub fn train(
    params: &mut Parameters,
    train_set: &[PreparedExample],
    dev_set: &[PreparedExample],
    config: &ModelConfig,
    seed: u64,
) -> Result<TrainReport> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }

    let mut optimizer = AdamW::new(params, config.weight_decay);
    let schedule = WarmupSchedule {
        base_rate: config.learning_rate,
        warmup_steps: config.warmup_steps,
    };
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed);

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, Parameters)> = None;
    let mut non_improving = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(usize, &PreparedExample)> =
                chunk.iter().map(|&i| (i, &train_set[i])).collect();
            let (loss, grads) = batch_gradients(params, config, &batch, seed, epoch)?;
            if !loss.is_finite() {
                return Err(Error::Train(format!(
                    "non-finite loss; {}",
                    diagnostic_dump(optimizer.step_count() + 1, loss, params)
                )));
            }
            let rate = schedule.rate(optimizer.step_count() + 1);
            optimizer.step(params, &grads, rate);
            if !params.all_finite() {
                return Err(Error::Train(format!(
                    "non-finite parameters after update; {}",
                    diagnostic_dump(optimizer.step_count(), loss, params)
                )));
            }
            epoch_loss += loss;
            batches += 1;
        }
        let train_loss = epoch_loss / batches as f64;

        let dev = dev_metrics(params, config, dev_set)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            dev_accuracy: dev.map(|(a, _)| a),
            dev_macro_f1: dev.map(|(_, f)| f),
        });

        if let Some((_, macro_f1)) = dev {
            let improved = best
                .as_ref()
                .map(|&(_, best_f1, _)| macro_f1 > best_f1)
                .unwrap_or(true);
            if improved {
                best = Some((epoch, macro_f1, params.clone()));
                non_improving = 0;
            } else {
                non_improving += 1;
                if non_improving >= config.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let (best_epoch, best_f1) = match best {
        Some((epoch, f1, snapshot)) => {
            *params = snapshot;
            (epoch, Some(f1))
        }
        None => (history.len(), None),
    };

    Ok(TrainReport {
        history,
        best_epoch,
        best_dev_macro_f1: best_f1,
        stopped_early,
        optimizer_steps: optimizer.step_count(),
    })
}
