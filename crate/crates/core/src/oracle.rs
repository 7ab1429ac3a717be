//! Ground truth for Gaussian data: the closed-form marginal score and an RK4
//! solver for the probability-flow ODE
//!
//! ```text
//! dx/dt = −½ β(t) [x + ∇log q_t(x)]
//! ```
//!
//! integrated from `t_start` down to 0 on the continuous schedule.

use crate::error::{Error, Result};
use crate::micronet::ModelParams;
use crate::points::{dist, norm, SampleSet};
use crate::rng::{self, Purpose};
use crate::sampler;
use crate::scheduler::Schedule;
use rand::Rng;

/// Anything with a time-dependent score on the continuous schedule.
pub trait Score {
    fn dim(&self) -> usize;
    fn score(&self, x: &[f64], alpha_bar: f64) -> Vec<f64>;
}

/// Isotropic Gaussian data `N(mu, sigma2 · I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub mu: Vec<f64>,
    pub sigma2: f64,
}

impl GaussianSpec {
    pub fn new(mu: Vec<f64>, sigma2: f64) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidArgument("mu must be nonempty".into()));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma2 = {sigma2} must be positive")));
        }
        Ok(GaussianSpec { mu, sigma2 })
    }
}

impl Score for GaussianSpec {
    fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `−(x − √ᾱ mu) / (ᾱ σ² + 1 − ᾱ)`
    fn score(&self, x: &[f64], ab: f64) -> Vec<f64> {
        let m = ab.sqrt();
        let v = ab * self.sigma2 + 1.0 - ab;
        x.iter().zip(&self.mu).map(|(xi, mi)| -(xi - m * mi) / v).collect()
    }
}

/// Equal-variance isotropic Gaussian mixture. Its ODE is nonlinear, so the
/// solver output is a numerical reference only. Experimental.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub means: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub sigma2: f64,
}

impl Score for MixtureSpec {
    fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    fn score(&self, x: &[f64], ab: f64) -> Vec<f64> {
        let m = ab.sqrt();
        let v = ab * self.sigma2 + 1.0 - ab;
        let logits: Vec<f64> = self
            .means
            .iter()
            .zip(&self.weights)
            .map(|(mu, w)| {
                let d2: f64 = x.iter().zip(mu).map(|(a, b)| (a - m * b).powi(2)).sum();
                w.ln() - d2 / (2.0 * v)
            })
            .collect();
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let resp: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = resp.iter().sum();
        let mut out = vec![0.0; x.len()];
        for (mu, r) in self.means.iter().zip(&resp) {
            for ((o, xi), mi) in out.iter_mut().zip(x).zip(mu) {
                *o -= r / z * (xi - m * mi) / v;
            }
        }
        out
    }
}

pub fn gaussian_score(spec: &GaussianSpec, x: &[f64], t: f64, sched: &Schedule) -> Result<Vec<f64>> {
    Error::check_dim(spec.mu.len(), x.len())?;
    Ok(spec.score(x, sched.continuous_alpha_bar(t)?))
}

fn drift<S: Score>(spec: &S, sched: &Schedule, x: &[f64], t: f64) -> Vec<f64> {
    let ab = (-sched.integrated_beta(t)).exp();
    let half_beta = 0.5 * sched.continuous_beta(t);
    x.iter()
        .zip(spec.score(x, ab))
        .map(|(xi, si)| -half_beta * (xi + si))
        .collect()
}

/// Classical RK4 from `t_start` to 0 with `n_steps` uniform steps.
pub fn solve_pf_ode<S: Score>(
    spec: &S,
    x_start: &[f64],
    t_start: f64,
    sched: &Schedule,
    n_steps: usize,
) -> Result<Vec<f64>> {
    Error::check_dim(spec.dim(), x_start.len())?;
    if !(t_start > 0.0 && t_start <= sched.steps() as f64) {
        return Err(Error::TimeOutOfRange {
            t: t_start,
            steps: sched.steps(),
        });
    }
    if n_steps == 0 {
        return Err(Error::InvalidArgument("ODE solve needs at least one step".into()));
    }
    let h = -t_start / n_steps as f64;
    let mut x = x_start.to_vec();
    let axpy = |x: &[f64], k: &[f64], a: f64| -> Vec<f64> { x.iter().zip(k).map(|(u, v)| u + a * v).collect() };
    for i in 0..n_steps {
        let t = t_start + i as f64 * h;
        let k1 = drift(spec, sched, &x, t);
        let k2 = drift(spec, sched, &axpy(&x, &k1, 0.5 * h), t + 0.5 * h);
        let k3 = drift(spec, sched, &axpy(&x, &k2, 0.5 * h), t + 0.5 * h);
        // pin the final node to exactly 0 to avoid drifting below the domain
        let t_next = if i + 1 == n_steps { 0.0 } else { t + h };
        let k4 = drift(spec, sched, &axpy(&x, &k3, h), t_next);
        for j in 0..x.len() {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceConfig {
    pub batch: usize,
    pub seed: u64,
    /// Maximum estimate iterations per draw.
    pub iters: usize,
    /// Early stop once the largest per-sample change drops below this.
    pub stop_below: f64,
    pub ode_steps: usize,
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        DivergenceConfig {
            batch: 1024,
            seed: 0,
            iters: 10,
            stop_below: 1e-6,
            ode_steps: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceSample {
    pub t: usize,
    pub x0: Vec<f64>,
    pub x_t: Vec<f64>,
    pub learned: Vec<f64>,
    pub reference: Vec<f64>,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub mean: f64,
    pub iterations: usize,
    pub samples: Vec<DivergenceSample>,
}

/// Mean distance between the learned fixed-point iterate and the PF-ODE
/// solution over `(x₀ ~ spec, t ~ U{1..T}, ε ~ N(0, I))` draws.
pub fn oracle_divergence(
    params: &ModelParams,
    spec: &GaussianSpec,
    sched: &Schedule,
    cfg: &DivergenceConfig,
) -> Result<DivergenceReport> {
    let d = spec.mu.len();
    Error::check_dim(params.arch().data_dim, d)?;
    if cfg.batch == 0 {
        return Err(Error::InvalidArgument("divergence batch must be positive".into()));
    }
    let mut r = rng::derive(cfg.seed, Purpose::Oracle, 0);
    let s = spec.sigma2.sqrt();
    let mut x0s = Vec::with_capacity(cfg.batch * d);
    let mut xts = Vec::with_capacity(cfg.batch * d);
    let mut steps = Vec::with_capacity(cfg.batch);
    for _ in 0..cfg.batch {
        let x0: Vec<f64> = spec.mu.iter().map(|m| m + s * rng::normal_vec(&mut r, 1)[0]).collect();
        let t = r.gen_range(1..=sched.steps());
        let eps = rng::normal_vec(&mut r, d);
        xts.extend(sched.perturb(&x0, t, &eps)?);
        x0s.extend(x0);
        steps.push(t);
    }
    let start = SampleSet::new(d, rng::normal_vec(&mut r, cfg.batch * d))?;
    let x_t = SampleSet::new(d, xts)?;
    let it = sampler::iterate(params, &x_t, &steps, start, cfg.iters, Some(cfg.stop_below), false)?;

    let mut samples = Vec::with_capacity(cfg.batch);
    for (i, &t) in steps.iter().enumerate() {
        let reference = solve_pf_ode(spec, x_t.point(i), t as f64, sched, cfg.ode_steps)?;
        let learned = it.last.point(i).to_vec();
        samples.push(DivergenceSample {
            t,
            x0: x0s[i * d..(i + 1) * d].to_vec(),
            x_t: x_t.point(i).to_vec(),
            error: dist(&learned, &reference),
            learned,
            reference,
        });
    }
    let mean = samples.iter().map(|s| s.error).sum::<f64>() / cfg.batch as f64;
    Ok(DivergenceReport {
        mean,
        iterations: it.iterations,
        samples,
    })
}

/// Expected divergence of the zero network for `sigma2 = 1`:
/// `‖mu‖ · (1/T) Σ_t (1 − √ᾱ(t))`.
pub fn zero_network_divergence(spec: &GaussianSpec, sched: &Schedule) -> f64 {
    let big_t = sched.steps();
    let avg = (1..=big_t)
        .map(|t| 1.0 - (-sched.integrated_beta(t as f64)).exp().sqrt())
        .sum::<f64>()
        / big_t as f64;
    norm(&spec.mu) * avg
}
