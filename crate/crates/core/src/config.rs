//! Flat `key = value` run configuration. `#` starts a comment; unknown keys
//! and repeated keys are errors; every key has a default.

use std::path::{Path, PathBuf};

use crate::data::{self, DatasetSpec};
use crate::error::{Error, Result};
use crate::metrics::{BaseMetric, FeatureMap, MetricSpec};
use crate::micronet::Architecture;
use crate::scheduler::Schedule;
use crate::trainer::TrainConfig;

/// `(key, default, description)` for every recognised key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "root seed; split per purpose into independent streams"),
    ("dataset", "mixture8", "gauss | mixture8 | two_moons | swiss_roll_2d"),
    ("n", "8192", "training set size"),
    ("mu", "2,0", "gauss: mean (comma separated)"),
    ("sigma2", "1", "gauss: isotropic variance"),
    ("normalize", "true", "gauss: standardize (other sets always do)"),
    ("radius", "4", "mixture8: circle radius"),
    ("std", "0.3", "mixture8: component standard deviation"),
    ("noise", "0.1", "two_moons / swiss_roll_2d: noise level"),
    ("steps", "1000", "diffusion steps T"),
    ("beta_min", "1e-4", "first beta of the linear ramp"),
    ("beta_max", "0.02", "last beta of the linear ramp"),
    ("hidden", "128,128,128", "hidden layer widths"),
    ("embed_dim", "32", "time embedding width (even)"),
    ("epochs", "300", "passes over the training set"),
    ("batch_size", "256", "samples per optimizer step"),
    ("lr", "2e-3", "Adam learning rate"),
    ("metric", "squared_l2", "l1 | squared_l2 | feature"),
    ("c", "0.01", "pseudo wrapper constant (0 = unwrapped)"),
    ("feature_width", "8", "feature metric: projection width"),
    ("ema_decay", "0.999", "EMA decay per optimizer step"),
    ("checkpoint_every", "100", "epochs between numbered checkpoints (0 = final only)"),
    ("timing", "false", "record wall-clock seconds in the report"),
    ("sample_steps", "1", "default fixed-point iterations when sampling"),
    ("sample_count", "4096", "default number of generated samples"),
    ("use_ema", "true", "sample with EMA weights"),
    ("eval_n_proj", "256", "sliced Wasserstein projections"),
    ("eval_count", "4096", "held-out reference size"),
    ("out_dir", "runs/default", "output directory"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub n: usize,
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub metric_name: String,
    pub c: f64,
    pub feature_width: usize,
    pub ema_decay: f64,
    pub checkpoint_every: usize,
    pub timing: bool,
    pub sample_steps: usize,
    pub sample_count: usize,
    pub use_ema: bool,
    pub eval_n_proj: usize,
    pub eval_count: usize,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_pairs(&[]).expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(Error::Config {
                line: Some(i + 1),
                msg: format!("expected 'key = value', got {line:?}"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.iter().any(|(name, _, _)| *name == k) {
                return Err(Error::Config {
                    line: Some(i + 1),
                    msg: format!("unknown key {k:?}"),
                });
            }
            if pairs.iter().any(|(p, _)| p == k) {
                return Err(Error::Config {
                    line: Some(i + 1),
                    msg: format!("duplicate key {k:?}"),
                });
            }
            pairs.push((k.to_string(), v.to_string()));
            lines.push(i + 1);
        }
        let refs: Vec<(&str, &str)> = pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        RunConfig::from_pairs(&refs).map_err(|e| match e {
            // value errors name their key first; point at the line that set it
            Error::Config { line: None, msg } => {
                let line = pairs
                    .iter()
                    .zip(&lines)
                    .find(|((k, _), _)| msg.starts_with(&format!("{k} =")))
                    .map(|(_, l)| *l);
                Error::Config { line, msg }
            }
            other => other,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text)
    }

    /// Build from explicit overrides on top of the defaults.
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Result<Self> {
        let get = |k: &str| -> String {
            pairs
                .iter()
                .rev()
                .find(|(p, _)| *p == k)
                .map(|(_, v)| v.to_string())
                .unwrap_or_else(|| KEYS.iter().find(|(n, _, _)| *n == k).expect("known key").1.to_string())
        };
        fn num<T: std::str::FromStr>(k: &str, v: String) -> Result<T> {
            v.parse().map_err(|_| Error::Config {
                line: None,
                msg: format!("{k} = {v:?} is not a valid value"),
            })
        }
        let boolean = |k: &str| -> Result<bool> {
            match get(k).as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                v => Err(Error::Config {
                    line: None,
                    msg: format!("{k} = {v:?} is not true/false"),
                }),
            }
        };
        let hidden = get("hidden")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| num::<usize>("hidden", s.to_string()))
            .collect::<Result<Vec<_>>>()?;
        let dataset = data::parse_spec(&get("dataset"), |k| Some(get(k)))?;
        let cfg = RunConfig {
            seed: num("seed", get("seed"))?,
            dataset,
            n: num("n", get("n"))?,
            steps: num("steps", get("steps"))?,
            beta_min: num("beta_min", get("beta_min"))?,
            beta_max: num("beta_max", get("beta_max"))?,
            hidden,
            embed_dim: num("embed_dim", get("embed_dim"))?,
            epochs: num("epochs", get("epochs"))?,
            batch_size: num("batch_size", get("batch_size"))?,
            lr: num("lr", get("lr"))?,
            metric_name: get("metric"),
            c: num("c", get("c"))?,
            feature_width: num("feature_width", get("feature_width"))?,
            ema_decay: num("ema_decay", get("ema_decay"))?,
            checkpoint_every: num("checkpoint_every", get("checkpoint_every"))?,
            timing: boolean("timing")?,
            sample_steps: num("sample_steps", get("sample_steps"))?,
            sample_count: num("sample_count", get("sample_count"))?,
            use_ema: boolean("use_ema")?,
            eval_n_proj: num("eval_n_proj", get("eval_n_proj"))?,
            eval_count: num("eval_count", get("eval_count"))?,
            out_dir: PathBuf::from(get("out_dir")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        self.schedule()?;
        self.architecture()?;
        self.metric()?;
        self.train_config().validate(self.n)?;
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::linear(self.steps, self.beta_min, self.beta_max)
    }

    pub fn architecture(&self) -> Result<Architecture> {
        Architecture::new(self.dataset.dim(), self.embed_dim, self.hidden.clone(), self.steps)
    }

    pub fn metric(&self) -> Result<MetricSpec> {
        let base = match self.metric_name.as_str() {
            "l1" => BaseMetric::L1,
            "squared_l2" => BaseMetric::SquaredL2,
            "feature" => BaseMetric::Feature(FeatureMap::new(self.seed, self.dataset.dim(), self.feature_width)?),
            other => return Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        };
        MetricSpec::new(base, self.c)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            metric: self.metric().unwrap_or_else(|_| MetricSpec::new(BaseMetric::SquaredL2, 0.0).expect("valid")),
            ema_decay: self.ema_decay,
            seed: self.seed,
            timing: self.timing,
        }
    }

    /// Canonical rendering: every key, one per line, parseable by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let ds = &self.dataset;
        let (mu, sigma2, normalize, radius, std, noise) = match ds {
            DatasetSpec::Gauss { mu, sigma2, normalize } => (
                mu.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
                sigma2.to_string(),
                normalize.to_string(),
                None,
                None,
                None,
            ),
            DatasetSpec::Mixture8 { radius, std } => {
                (String::new(), String::new(), String::new(), Some(*radius), Some(*std), None)
            }
            DatasetSpec::TwoMoons { noise } | DatasetSpec::SwissRoll2d { noise } => {
                (String::new(), String::new(), String::new(), None, None, Some(*noise))
            }
        };
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut lines = vec![
            "# resolved run configuration".to_string(),
            "# seed streams: data=1 init=2 bank=3 train=4 sample=5 eval=6 feature=7 oracle=8 heldout=9".to_string(),
            format!("seed = {}", self.seed),
            format!("dataset = {}", ds.name()),
            format!("n = {}", self.n),
        ];
        if !mu.is_empty() {
            lines.push(format!("mu = {mu}"));
            lines.push(format!("sigma2 = {sigma2}"));
            lines.push(format!("normalize = {normalize}"));
        }
        if let (Some(r), Some(s)) = (radius, std) {
            lines.push(format!("radius = {r}"));
            lines.push(format!("std = {s}"));
        }
        if let Some(nz) = noise {
            lines.push(format!("noise = {nz}"));
        }
        lines.extend([
            format!("steps = {}", self.steps),
            format!("beta_min = {}", self.beta_min),
            format!("beta_max = {}", self.beta_max),
            format!("hidden = {}", join(&self.hidden)),
            format!("embed_dim = {}", self.embed_dim),
            format!("epochs = {}", self.epochs),
            format!("batch_size = {}", self.batch_size),
            format!("lr = {}", self.lr),
            format!("metric = {}", self.metric_name),
            format!("c = {}", self.c),
            format!("feature_width = {}", self.feature_width),
            format!("ema_decay = {}", self.ema_decay),
            format!("checkpoint_every = {}", self.checkpoint_every),
            format!("timing = {}", self.timing),
            format!("sample_steps = {}", self.sample_steps),
            format!("sample_count = {}", self.sample_count),
            format!("use_ema = {}", self.use_ema),
            format!("eval_n_proj = {}", self.eval_n_proj),
            format!("eval_count = {}", self.eval_count),
            format!("out_dir = {}", self.out_dir.display()),
        ]);
        lines.join("\n") + "\n"
    }
}
