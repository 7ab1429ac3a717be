//! Training with a per-sample estimate bank.
//!
//! Each sample `i` carries its current clean-data estimate `x₀⁽ⁿ⁾[i]`. One
//! epoch visits every sample once in shuffled order, noises it at a fresh
//! step, predicts `f_θ(bank[i], x_t, t) = x_t − F_θ(bank[i], x_t, t)`, takes
//! the metric loss against the true sample, and writes the prediction back
//! into the bank. The stored value comes from the forward pass that produced
//! the loss, i.e. it is computed with the pre-step parameters.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::MetricSpec;
use crate::micronet::{Adam, Architecture, EmaParams, ModelParams};
use crate::points::{dist, SampleSet};
use crate::rng::{self, Purpose};
use crate::scheduler::Schedule;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub metric: MetricSpec,
    pub ema_decay: f64,
    pub seed: u64,
    /// Record wall-clock seconds in the report; off keeps reports reproducible.
    pub timing: bool,
}

impl TrainConfig {
    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > dataset_len {
            return Err(Error::InvalidArgument(format!(
                "batch_size {} must be in 1..={dataset_len}",
                self.batch_size
            )));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidArgument(format!("lr = {} must be finite and >= 0", self.lr)));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::InvalidArgument(format!("ema_decay = {} outside [0, 1)", self.ema_decay)));
        }
        Ok(())
    }
}

/// Current estimate `x₀⁽ⁿ⁾` for every training sample, index-aligned with the
/// dataset. Values are detached: no gradient ever flows into them.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateBank {
    dim: usize,
    estimates: Vec<f64>,
    epoch: u64,
}

impl EstimateBank {
    /// Epoch-0 bank: standard normal draws from the bank stream of `seed`.
    pub fn init(len: usize, dim: usize, seed: u64) -> Self {
        let mut r = rng::derive(seed, Purpose::Bank, 0);
        EstimateBank {
            dim,
            estimates: rng::normal_vec(&mut r, len * dim),
            epoch: 0,
        }
    }

    pub fn from_parts(dim: usize, estimates: Vec<f64>, epoch: u64) -> Result<Self> {
        if dim == 0 || estimates.len() % dim != 0 {
            return Err(Error::InvalidArgument("bank buffer is not a whole number of rows".into()));
        }
        if estimates.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("estimate bank".into()));
        }
        Ok(EstimateBank { dim, estimates, epoch })
    }

    pub fn len(&self) -> usize {
        self.estimates.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.estimates[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.estimates
    }

    pub fn memory_bytes(&self, bytes_per_scalar: u64) -> u64 {
        bank_memory_bytes(self.len() as u64, self.dim as u64, bytes_per_scalar)
    }
}

/// Storage for `n` estimates of dimension `d`: exactly `n · d · bytes_per_scalar`.
pub fn bank_memory_bytes(n: u64, d: u64, bytes_per_scalar: u64) -> u64 {
    n * d * bytes_per_scalar
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: u64,
    pub mean_loss: f64,
    pub mean_drift: f64,
    pub seconds: f64,
    pub bank_bytes: u64,
}

pub const REPORT_HEADER: &str = "epoch,mean_loss,mean_drift,seconds,bank_bytes";

impl EpochRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.epoch, self.mean_loss, self.mean_drift, self.seconds, self.bank_bytes
        )
    }
}

/// Per-sample draws of one epoch, indexed by dataset position.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochTrace {
    pub order: Vec<usize>,
    pub steps: Vec<usize>,
    pub noise: Vec<f64>,
    pub losses: Vec<f64>,
}

/// `f_θ(x₀_est, x_t, t) = x_t − F_θ(x₀_est, x_t, t)`
pub fn f_theta(params: &ModelParams, x0_est: &[f64], x_t: &[f64], t: usize) -> Result<Vec<f64>> {
    let out = params.forward(x0_est, x_t, t)?;
    Ok(x_t.iter().zip(out).map(|(x, f)| x - f).collect())
}

/// Everything that evolves during training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    pub ema: EmaParams,
    pub adam: Adam,
    pub bank: EstimateBank,
}

impl TrainState {
    pub fn new(arch: Architecture, dataset_len: usize, seed: u64, ema_decay: f64) -> Result<Self> {
        let mut init_rng = rng::derive(seed, Purpose::Init, 0);
        let dim = arch.data_dim;
        let params = ModelParams::init(arch, &mut init_rng);
        let ema = EmaParams::new(&params, ema_decay)?;
        let adam = Adam::new(params.as_slice().len());
        Ok(TrainState {
            params,
            ema,
            adam,
            bank: EstimateBank::init(dataset_len, dim, seed),
        })
    }
}

/// One full shuffled pass over `data`. On a non-finite loss the epoch stops
/// and the error carries the offending batch, sample and step; the parameter
/// update for that batch is not applied.
pub fn train_epoch(
    state: &mut TrainState,
    data: &SampleSet,
    sched: &Schedule,
    cfg: &TrainConfig,
) -> Result<(EpochRecord, EpochTrace)> {
    let started = Instant::now();
    let n = data.len();
    let d = data.dim();
    Error::check_dim(state.bank.len(), n)?;
    Error::check_dim(state.bank.dim(), d)?;
    Error::check_dim(state.params.arch().data_dim, d)?;
    if state.params.arch().steps != sched.steps() {
        return Err(Error::InvalidArgument(format!(
            "network embeds {} steps but schedule has {}",
            state.params.arch().steps,
            sched.steps()
        )));
    }
    cfg.validate(n)?;

    let epoch = state.bank.epoch;
    let mut r = rng::derive(cfg.seed, Purpose::Train, epoch);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);

    let mut trace = EpochTrace {
        order: order.clone(),
        steps: vec![0; n],
        noise: vec![0.0; n * d],
        losses: vec![0.0; n],
    };
    let mut loss_sum = 0.0;
    let mut drift_sum = 0.0;

    for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
        let b = batch.len();
        let mut x_t = vec![0.0; b * d];
        let mut est = vec![0.0; b * d];
        let mut steps = vec![0; b];
        for (k, &i) in batch.iter().enumerate() {
            let t = r.gen_range(1..=sched.steps());
            let eps = &mut trace.noise[i * d..(i + 1) * d];
            rng::fill_normal(&mut r, eps);
            sched.perturb_into(data.point(i), t, eps, &mut x_t[k * d..(k + 1) * d]);
            est[k * d..(k + 1) * d].copy_from_slice(state.bank.get(i));
            steps[k] = t;
            trace.steps[i] = t;
        }

        let inputs = state.params.build_inputs(&x_t, &est, &steps)?;
        let fwd = state.params.forward_batch(&inputs, b)?;
        let pred: Vec<f64> = x_t.iter().zip(fwd.output()).map(|(x, f)| x - f).collect();

        // d(loss)/dF = −d(loss)/dprediction, averaged over the batch
        let mut upstream = vec![0.0; b * d];
        for (k, &i) in batch.iter().enumerate() {
            let p = &pred[k * d..(k + 1) * d];
            let (loss, g) = cfg.metric.loss_and_grad(p, data.point(i))?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss at epoch {epoch}, batch {batch_no}, sample {i}, t = {}: {loss}; prediction {p:?}",
                    steps[k]
                )));
            }
            trace.losses[i] = loss;
            loss_sum += loss;
            for (u, gv) in upstream[k * d..(k + 1) * d].iter_mut().zip(g) {
                *u = -gv / b as f64;
            }
        }

        let grads = state.params.backward_batch(&fwd, &upstream)?;
        state.adam.step(&mut state.params, &grads, cfg.lr)?;
        state.ema.update(&state.params)?;

        for (k, &i) in batch.iter().enumerate() {
            let p = &pred[k * d..(k + 1) * d];
            let slot = &mut state.bank.estimates[i * d..(i + 1) * d];
            drift_sum += dist(p, slot);
            slot.copy_from_slice(p);
        }
    }

    state.bank.epoch += 1;
    let record = EpochRecord {
        epoch: state.bank.epoch,
        mean_loss: loss_sum / n as f64,
        mean_drift: drift_sum / n as f64,
        seconds: if cfg.timing { started.elapsed().as_secs_f64() } else { 0.0 },
        bank_bytes: state.bank.memory_bytes(std::mem::size_of::<f64>() as u64),
    };
    Ok((record, trace))
}
