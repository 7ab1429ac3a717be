//! Fixed-point generation: `x₀⁽ⁿ⁺¹⁾ = x_T − F_θ(x₀⁽ⁿ⁾, x_T, T)` with `x_T` and
//! `t = T` held fixed, started from an independent `x₀⁽⁰⁾ ~ N(0, I)`.

use crate::error::{Error, Result};
use crate::micronet::ModelParams;
use crate::points::{dist, SampleSet};
use crate::rng::{self, Purpose};
use crate::scheduler::Schedule;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRun {
    /// Number of fixed-point iterations `s` (= NFE per sample).
    pub steps: usize,
    pub seed: u64,
    pub count: usize,
    pub log_trajectory: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutput {
    pub samples: SampleSet,
    /// The `x_T` draws, one per sample.
    pub noise: SampleSet,
    /// `trajectory[n]` holds `x₀⁽ⁿ⁺¹⁾` for every sample.
    pub trajectory: Option<Vec<SampleSet>>,
}

/// Seeded `(x₀⁽⁰⁾, x_T)` pairs; sample `i` draws its start and then its noise.
pub fn initial_draws(seed: u64, count: usize, dim: usize) -> (SampleSet, SampleSet) {
    let mut r = rng::derive(seed, Purpose::Sample, 0);
    let mut start = Vec::with_capacity(count * dim);
    let mut noise = Vec::with_capacity(count * dim);
    for _ in 0..count {
        start.extend(rng::normal_vec(&mut r, dim));
        noise.extend(rng::normal_vec(&mut r, dim));
    }
    (
        SampleSet::new(dim, start).expect("whole rows"),
        SampleSet::new(dim, noise).expect("whole rows"),
    )
}

/// Result of [`iterate`].
#[derive(Debug, Clone)]
pub struct Iterates {
    pub last: SampleSet,
    pub trajectory: Option<Vec<SampleSet>>,
    pub iterations: usize,
}

/// Run the estimate iteration on fixed `(x_t, t)` rows for at most `max_iters`
/// steps. With `stop_below`, stops after the first iteration whose largest
/// per-sample change falls under the threshold.
pub fn iterate(
    params: &ModelParams,
    x_t: &SampleSet,
    steps: &[usize],
    start: SampleSet,
    max_iters: usize,
    stop_below: Option<f64>,
    log_trajectory: bool,
) -> Result<Iterates> {
    let d = params.arch().data_dim;
    Error::check_dim(d, x_t.dim())?;
    Error::check_dim(d, start.dim())?;
    Error::check_dim(x_t.len(), start.len())?;
    Error::check_dim(x_t.len(), steps.len())?;
    let mut current = start;
    let mut trajectory = log_trajectory.then(Vec::new);
    let mut done = 0;
    while done < max_iters {
        let inputs = params.build_inputs(x_t.as_slice(), current.as_slice(), steps)?;
        let out = params.forward_batch(&inputs, steps.len())?;
        let next: Vec<f64> = x_t.as_slice().iter().zip(out.output()).map(|(x, f)| x - f).collect();
        let next = SampleSet::new(d, next)?;
        let change = next
            .iter()
            .zip(current.iter())
            .map(|(a, b)| dist(a, b))
            .fold(0.0, f64::max);
        current = next;
        done += 1;
        if let Some(tr) = trajectory.as_mut() {
            tr.push(current.clone());
        }
        if stop_below.is_some_and(|tol| change < tol) {
            break;
        }
    }
    Ok(Iterates {
        last: current,
        trajectory,
        iterations: done,
    })
}

pub fn sample(params: &ModelParams, sched: &Schedule, run: &SampleRun) -> Result<SampleOutput> {
    if run.steps == 0 {
        return Err(Error::InvalidArgument("sampling needs at least one iteration".into()));
    }
    let big_t = sched.steps();
    if params.arch().steps != big_t {
        return Err(Error::InvalidArgument(format!(
            "network embeds {} steps but schedule has {big_t}",
            params.arch().steps
        )));
    }
    let d = params.arch().data_dim;
    let (start, noise) = initial_draws(run.seed, run.count, d);
    let steps = vec![big_t; run.count];
    let it = iterate(params, &noise, &steps, start, run.steps, None, run.log_trajectory)?;
    Ok(SampleOutput {
        samples: it.last,
        noise,
        trajectory: it.trajectory,
    })
}
