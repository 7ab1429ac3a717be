//! The work behind each CLI subcommand, callable without a process boundary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::data::{self, Dataset};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport};
use crate::micronet::ModelParams;
use crate::oracle::{self, DivergenceConfig, DivergenceReport, GaussianSpec};
use crate::sampler::{self, SampleOutput, SampleRun};
use crate::trainer::{self, EpochRecord, TrainState, REPORT_HEADER};

/// Upper bound on points per set fed to the O(n²) MMD.
pub const MMD_CAP: usize = 2048;

pub struct TrainOutcome {
    pub dataset: Dataset,
    pub records: Vec<EpochRecord>,
    pub checkpoint: Checkpoint,
}

/// Train in memory. `on_epoch` sees each record and the state after it.
pub fn train_run(cfg: &RunConfig, mut on_epoch: impl FnMut(&EpochRecord, &TrainState) -> Result<()>) -> Result<TrainOutcome> {
    let dataset = data::make_dataset(&cfg.dataset, cfg.n, cfg.seed)?;
    let schedule = cfg.schedule()?;
    let tc = cfg.train_config();
    tc.validate(dataset.len())?;
    let mut state = TrainState::new(cfg.architecture()?, dataset.len(), cfg.seed, cfg.ema_decay)?;
    let mut records = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (rec, _) = trainer::train_epoch(&mut state, &dataset.points, &schedule, &tc)?;
        on_epoch(&rec, &state)?;
        records.push(rec);
    }
    Ok(TrainOutcome {
        dataset,
        records,
        checkpoint: Checkpoint { schedule, state },
    })
}

pub fn report_csv(records: &[EpochRecord]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Full training run writing into `cfg.out_dir`:
/// `config.txt`, `dataset.csv`, `heldout.csv`, `train_report.csv`,
/// `checkpoint.bin` (final) and `checkpoint_<epoch>.bin` at the cadence.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("config.txt"), cfg.to_text())?;

    let schedule = cfg.schedule()?;
    let every = cfg.checkpoint_every;
    let outcome = train_run(cfg, |rec, state| {
        if every > 0 && rec.epoch % every as u64 == 0 {
            let ck = Checkpoint {
                schedule: schedule.clone(),
                state: state.clone(),
            };
            ck.save(&dir.join(format!("checkpoint_{:05}.bin", rec.epoch)))?;
        }
        Ok(())
    })?;

    data::write_dataset_csv(&dir.join("dataset.csv"), &outcome.dataset)?;
    let held = data::make_heldout(&cfg.dataset, cfg.eval_count, cfg.seed, &outcome.dataset.normalization)?;
    data::write_points_csv(&dir.join("heldout.csv"), &held)?;
    write(&dir.join("train_report.csv"), report_csv(&outcome.records))?;
    outcome.checkpoint.save(&dir.join("checkpoint.bin"))?;
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct SampleArgs {
    pub checkpoint: PathBuf,
    pub run: SampleRun,
    pub out: PathBuf,
    pub trajectory_out: Option<PathBuf>,
    pub use_ema: bool,
    pub plot: Option<PathBuf>,
}

fn weights(ck: &Checkpoint, use_ema: bool) -> &ModelParams {
    if use_ema {
        &ck.state.ema.shadow
    } else {
        &ck.state.params
    }
}

pub fn cmd_sample(args: &SampleArgs) -> Result<SampleOutput> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let run = SampleRun {
        log_trajectory: args.trajectory_out.is_some(),
        ..args.run.clone()
    };
    let out = sampler::sample(weights(&ck, args.use_ema), &ck.schedule, &run)?;
    data::write_points_csv(&args.out, &out.samples)?;
    if let (Some(path), Some(traj)) = (&args.trajectory_out, &out.trajectory) {
        write(path, trajectory_csv(traj))?;
    }
    if let Some(path) = &args.plot {
        eval::scatter_svg(&[(&out.samples, "samples")], path)?;
    }
    Ok(out)
}

/// `sample_id,iteration,x0,...` with iterations counted from 1.
pub fn trajectory_csv(traj: &[crate::SampleSet]) -> String {
    let dim = traj.first().map_or(0, |s| s.dim());
    let mut out = String::from("sample_id,iteration");
    for k in 0..dim {
        let _ = write!(out, ",x{k}");
    }
    out.push('\n');
    let count = traj.first().map_or(0, |s| s.len());
    for i in 0..count {
        for (n, step) in traj.iter().enumerate() {
            let _ = write!(out, "{i},{}", n + 1);
            for v in step.point(i) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub samples: PathBuf,
    pub reference: PathBuf,
    pub out: PathBuf,
    pub n_proj: usize,
    pub seed: u64,
    pub plot: Option<PathBuf>,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let a = data::read_points_csv(&args.samples)?;
    let b = data::read_points_csv(&args.reference)?;
    let report = eval::evaluate(&a, &b, args.n_proj, args.seed, MMD_CAP)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Format {
        what: "eval report",
        msg: e.to_string(),
    })?;
    write(&args.out, json + "\n")?;
    if let Some(path) = &args.plot {
        eval::scatter_svg(&[(&b, "reference"), (&a, "samples")], path)?;
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct OracleArgs {
    pub checkpoint: PathBuf,
    pub spec: GaussianSpec,
    pub divergence: DivergenceConfig,
    pub out: Option<PathBuf>,
    pub use_ema: bool,
}

pub fn cmd_oracle_check(args: &OracleArgs) -> Result<DivergenceReport> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let report = oracle::oracle_divergence(weights(&ck, args.use_ema), &args.spec, &ck.schedule, &args.divergence)?;
    if let Some(path) = &args.out {
        write(path, divergence_csv(&report))?;
    }
    Ok(report)
}

pub fn divergence_csv(report: &DivergenceReport) -> String {
    let dim = report.samples.first().map_or(0, |s| s.x_t.len());
    let mut out = String::from("sample_id,t,error");
    for prefix in ["x_t", "learned", "reference"] {
        for k in 0..dim {
            let _ = write!(out, ",{prefix}{k}");
        }
    }
    out.push('\n');
    for (i, s) in report.samples.iter().enumerate() {
        let _ = write!(out, "{i},{},{}", s.t, s.error);
        for v in s.x_t.iter().chain(&s.learned).chain(&s.reference) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
