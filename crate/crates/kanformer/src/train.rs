//! The epoch loop: seeded shuffling, AdamW steps, per-epoch evaluation and
//! early stopping on the validation metric.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use kanformer_core::metrics::{classification_report, rmse, RmseTracker};
use kanformer_core::optim::AdamW;
use kanformer_core::transformer::{Encoder, EncoderInput};
use kanformer_core::{Graph, Mode, ParamStore, Rng, Tensor};
use serde::{Deserialize, Serialize};

use crate::dataset::{stream, Dataset, TaskData, Targets};
use crate::error::{Error, Result};
use crate::settings::{RunConfig, TrainConfig};

const EVAL_BATCH: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EvalMetrics {
    Regression { rmse: f64, lowest_so_far: f64 },
    Classification { acc1: f64, acc5: f64, f1_macro: f64 },
}

impl EvalMetrics {
    /// The early-stopping score; lower is better.
    pub fn score(&self) -> f64 {
        match *self {
            EvalMetrics::Regression { rmse, .. } => rmse,
            EvalMetrics::Classification { acc1, .. } => -acc1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub train_loss: f64,
    #[serde(flatten)]
    pub metrics: EvalMetrics,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub history: Vec<MetricRecord>,
    pub best_epoch: usize,
    pub best: EvalMetrics,
    /// Parameters as of the best epoch.
    pub best_params: ParamStore<f32>,
}

/// Model outputs for every sample, in dataset order: `n` regression values
/// or `n × classes` logits.
pub fn predict(encoder: &Encoder, store: &ParamStore<f32>, data: &Dataset, scalars: bool) -> Result<Vec<f32>> {
    let mut out = Vec::new();
    let mut rng = Rng::new(0);
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(EVAL_BATCH) {
        let (shape, x) = data.gather_inputs(chunk);
        let x = Tensor::new(shape, x)?;
        let mut g = Graph::with_params(store);
        let input = if scalars { EncoderInput::Scalars(&x) } else { EncoderInput::Images(&x) };
        let y = encoder.forward(&mut g, input, Mode::Eval, &mut rng)?;
        out.extend_from_slice(g.value(y));
    }
    Ok(out)
}

pub fn is_scalar_input(data: &Dataset) -> bool {
    data.sample_shape.len() == 1
}

/// Test-set metrics; `tracker` carries the running RMSE minimum.
pub fn evaluate(encoder: &Encoder, store: &ParamStore<f32>, data: &Dataset, tracker: &mut RmseTracker) -> Result<EvalMetrics> {
    let pred = predict(encoder, store, data, is_scalar_input(data))?;
    let pred: Vec<f64> = pred.iter().map(|&v| v as f64).collect();
    Ok(match &data.targets {
        Targets::Regression(t) => {
            let t: Vec<f64> = t.iter().map(|&v| v as f64).collect();
            let r = tracker.update(rmse(&pred, &t)?);
            EvalMetrics::Regression {
                rmse: r.rmse,
                lowest_so_far: r.lowest_so_far,
            }
        }
        Targets::Classes { labels, count } => {
            let r = classification_report(&pred, *count, labels)?;
            EvalMetrics::Classification {
                acc1: r.acc1,
                acc5: r.acc5,
                f1_macro: r.f1_macro,
            }
        }
    })
}

/// Mean training loss of one batch, recorded on `g`.
pub fn batch_loss<'p>(
    g: &mut Graph<'p, f32>,
    encoder: &Encoder,
    data: &Dataset,
    batch: &[usize],
    mode: Mode,
    rng: &mut Rng,
) -> Result<kanformer_core::Var> {
    let (shape, x) = data.gather_inputs(batch);
    let x = Tensor::new(shape, x)?;
    let input = if is_scalar_input(data) { EncoderInput::Scalars(&x) } else { EncoderInput::Images(&x) };
    let y = encoder.forward(g, input, mode, rng)?;
    Ok(match &data.targets {
        Targets::Regression(t) => {
            let target = g.constant(Tensor::new([batch.len()], batch.iter().map(|&i| t[i]).collect())?);
            g.mse(y, target)?
        }
        Targets::Classes { labels, .. } => {
            let l: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            g.cross_entropy(y, &l)?
        }
    })
}

/// Train `store` in place; `on_epoch` sees every record as it is produced.
pub fn train_loop(
    cfg: &TrainConfig,
    encoder: &Encoder,
    store: &mut ParamStore<f32>,
    data: &TaskData,
    mut on_epoch: impl FnMut(&MetricRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    let start = Instant::now();
    let mut opt = AdamW::new(cfg.optim);
    let mut shuffle = Rng::derive(cfg.seed, stream::SHUFFLE);
    let mut dropout = Rng::derive(cfg.seed, stream::DROPOUT);
    let mut tracker = RmseTracker::default();
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(usize, EvalMetrics, ParamStore<f32>)> = None;

    for epoch in 1..=cfg.max_epochs {
        shuffle.shuffle(&mut order);
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let grads = {
                let mut g = Graph::with_params(&*store);
                let loss = batch_loss(&mut g, encoder, &data.train, batch, Mode::Train, &mut dropout)?;
                let value = g.value(loss)[0] as f64;
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: b, loss: value });
                }
                total += value * batch.len() as f64;
                g.backward(loss)?
            };
            opt.step(store, &grads)?;
        }
        let metrics = evaluate(encoder, store, &data.test, &mut tracker)?;
        let record = MetricRecord {
            epoch,
            train_loss: total / data.train.len() as f64,
            metrics,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record)?;
        history.push(record);
        if best.as_ref().map_or(true, |(_, m, _)| metrics.score() < m.score()) {
            best = Some((epoch, metrics, store.clone()));
        }
        let best_epoch = best.as_ref().unwrap().0;
        if epoch - best_epoch >= cfg.patience {
            break;
        }
    }
    let (best_epoch, best, best_params) = best.expect("max_epochs >= 1");
    Ok(TrainOutcome {
        history,
        best_epoch,
        best,
        best_params,
    })
}

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_DIR: &str = "checkpoint";

/// Build the model, train it, and write the metrics stream, resolved
/// configuration and best checkpoint under `out`.
pub fn run_training(run: &RunConfig, data: &TaskData, out: &Path) -> Result<TrainOutcome> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let cfg_path = out.join(CONFIG_FILE);
    fs::write(&cfg_path, run.resolved.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;

    let mut store = ParamStore::new();
    let encoder = Encoder::new(&run.model, &mut store, &mut Rng::derive(run.train.seed, stream::INIT))?;
    let metrics_path = out.join(METRICS_FILE);
    let mut metrics = fs::File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let outcome = train_loop(&run.train, &encoder, &mut store, data, |r| {
        let line = serde_json::to_string(r).map_err(|e| Error::Runtime(e.to_string()))?;
        writeln!(metrics, "{line}").map_err(|e| Error::io(&metrics_path, e))
    })?;
    crate::checkpoint::save(&out.join(CHECKPOINT_DIR), &run.resolved, &outcome.best_params)?;
    Ok(outcome)
}
