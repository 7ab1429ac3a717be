//! Seeded toy datasets with stable per-sample indexing.
//!
//! Every dataset is generated in raw coordinates and then standardized per
//! dimension; the shift/scale record maps between the two spaces. The Gaussian
//! set can opt out of standardization so that its raw mean survives (the
//! probability-flow oracle is only informative when `mu ≠ 0`).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::points::SampleSet;
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Gauss { mu: Vec<f64>, sigma2: f64, normalize: bool },
    Mixture8 { radius: f64, std: f64 },
    TwoMoons { noise: f64 },
    SwissRoll2d { noise: f64 },
}

impl DatasetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetSpec::Gauss { .. } => "gauss",
            DatasetSpec::Mixture8 { .. } => "mixture8",
            DatasetSpec::TwoMoons { .. } => "two_moons",
            DatasetSpec::SwissRoll2d { .. } => "swiss_roll_2d",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DatasetSpec::Gauss { mu, .. } => mu.len(),
            _ => 2,
        }
    }

    fn normalizes(&self) -> bool {
        !matches!(self, DatasetSpec::Gauss { normalize: false, .. })
    }

    /// `key=value;...` rendering stored in the CSV cache header.
    pub fn params_string(&self) -> String {
        match self {
            DatasetSpec::Gauss { mu, sigma2, normalize } => format!(
                "mu={};sigma2={sigma2};normalize={normalize}",
                join(mu, " ")
            ),
            DatasetSpec::Mixture8 { radius, std } => format!("radius={radius};std={std}"),
            DatasetSpec::TwoMoons { noise } | DatasetSpec::SwissRoll2d { noise } => format!("noise={noise}"),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self {
            DatasetSpec::Gauss { mu, sigma2, .. } => {
                if mu.is_empty() || mu.iter().any(|v| !v.is_finite()) {
                    return bad("gauss mu must be a nonempty finite vector".into());
                }
                if !(*sigma2 > 0.0) || !sigma2.is_finite() {
                    return bad(format!("gauss sigma2 = {sigma2} must be positive"));
                }
            }
            DatasetSpec::Mixture8 { radius, std } => {
                if !(*radius > 0.0) || !(*std >= 0.0) {
                    return bad(format!("mixture8 needs radius > 0 and std >= 0, got {radius}, {std}"));
                }
            }
            DatasetSpec::TwoMoons { noise } | DatasetSpec::SwissRoll2d { noise } => {
                if !(*noise >= 0.0) {
                    return bad(format!("noise = {noise} must be >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Raw points plus, for mixture8, the component of each point.
    fn generate_raw<R: Rng>(&self, n: usize, rng: &mut R) -> (SampleSet, Vec<usize>) {
        let d = self.dim();
        let mut pts = Vec::with_capacity(n * d);
        let mut labels = Vec::new();
        let gauss = |rng: &mut R| -> f64 { StandardNormal.sample(rng) };
        match self {
            DatasetSpec::Gauss { mu, sigma2, .. } => {
                let s = sigma2.sqrt();
                for _ in 0..n {
                    for m in mu {
                        pts.push(m + s * gauss(rng));
                    }
                }
            }
            DatasetSpec::Mixture8 { radius, std } => {
                for _ in 0..n {
                    let k = rng.gen_range(0..8);
                    let ang = 2.0 * PI * k as f64 / 8.0;
                    pts.push(radius * ang.cos() + std * gauss(rng));
                    pts.push(radius * ang.sin() + std * gauss(rng));
                    labels.push(k);
                }
            }
            DatasetSpec::TwoMoons { noise } => {
                for i in 0..n {
                    let theta = PI * rng.gen::<f64>();
                    let (x, y) = if i % 2 == 0 {
                        (theta.cos(), theta.sin())
                    } else {
                        (1.0 - theta.cos(), 0.5 - theta.sin())
                    };
                    pts.push(x + noise * gauss(rng));
                    pts.push(y + noise * gauss(rng));
                }
            }
            DatasetSpec::SwissRoll2d { noise } => {
                for _ in 0..n {
                    let t = 1.5 * PI * (1.0 + 2.0 * rng.gen::<f64>());
                    pts.push(t * t.cos() / 10.0 + noise * gauss(rng));
                    pts.push(t * t.sin() / 10.0 + noise * gauss(rng));
                }
            }
        }
        (SampleSet::new(d, pts).expect("row width matches spec dim"), labels)
    }
}

fn join(v: &[f64], sep: &str) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

/// Per-dimension affine map `normalized = (raw − shift) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Normalization {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn fit(points: &SampleSet) -> Self {
        let shift = points.mean();
        let scale = points.std().into_iter().map(|s| if s > 0.0 { s } else { 1.0 }).collect();
        Normalization { shift, scale }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    pub fn invert(&self, normalized: &[f64]) -> Vec<f64> {
        normalized
            .iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((x, m), s)| x * s + m)
            .collect()
    }

    fn apply_set(&self, set: &SampleSet) -> SampleSet {
        let data = set.iter().flat_map(|p| self.apply(p)).collect();
        SampleSet::new(set.dim(), data).expect("same width")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub seed: u64,
    pub points: SampleSet,
    pub normalization: Normalization,
    /// Mixture component per point (mixture8 only, empty otherwise).
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }
}

pub fn make_dataset(spec: &DatasetSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset size must be at least 1".into()));
    }
    spec.validate()?;
    let (raw, labels) = spec.generate_raw(n, &mut rng::derive(seed, Purpose::Data, 0));
    let normalization = if spec.normalizes() {
        Normalization::fit(&raw)
    } else {
        Normalization::identity(spec.dim())
    };
    Ok(Dataset {
        spec: spec.clone(),
        seed,
        points: normalization.apply_set(&raw),
        normalization,
        labels,
    })
}

/// Fresh draws from the same distribution, mapped with an existing
/// normalization (typically the training set's) so they share its space.
pub fn make_heldout(spec: &DatasetSpec, n: usize, seed: u64, normalization: &Normalization) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset size must be at least 1".into()));
    }
    spec.validate()?;
    Error::check_dim(spec.dim(), normalization.shift.len())?;
    let (raw, _) = spec.generate_raw(n, &mut rng::derive(seed, Purpose::Heldout, 0));
    Ok(normalization.apply_set(&raw))
}

/// Parse a dataset selector plus its parameters from `key → value` lookups.
pub fn parse_spec(name: &str, get: impl Fn(&str) -> Option<String>) -> Result<DatasetSpec> {
    let num = |k: &str, default: f64| -> Result<f64> {
        match get(k) {
            None => Ok(default),
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("{k} = {v:?} is not a number"))),
        }
    };
    let spec = match name {
        "gauss" => {
            let mu = match get("mu") {
                None => vec![2.0, 0.0],
                Some(v) => parse_list(&v)?,
            };
            let normalize = match get("normalize").as_deref().map(str::trim) {
                None | Some("true") => true,
                Some("false") => false,
                Some(o) => return Err(Error::InvalidArgument(format!("normalize = {o:?} is not a bool"))),
            };
            DatasetSpec::Gauss {
                mu,
                sigma2: num("sigma2", 1.0)?,
                normalize,
            }
        }
        "mixture8" => DatasetSpec::Mixture8 {
            radius: num("radius", 4.0)?,
            std: num("std", 0.3)?,
        },
        "two_moons" => DatasetSpec::TwoMoons { noise: num("noise", 0.1)? },
        "swiss_roll_2d" => DatasetSpec::SwissRoll2d { noise: num("noise", 0.1)? },
        other => return Err(Error::InvalidArgument(format!("unknown dataset {other:?}"))),
    };
    spec.validate()?;
    Ok(spec)
}

/// Comma- or space-separated list of floats.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse()
                .map_err(|_| Error::InvalidArgument(format!("{p:?} in {s:?} is not a number")))
        })
        .collect()
}

fn write_rows(out: &mut String, set: &SampleSet) {
    let header: Vec<String> = (0..set.dim()).map(|i| format!("x{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for p in set.iter() {
        out.push_str(&join(p, ","));
        out.push('\n');
    }
}

/// Plain point CSV: a `x0,x1,...` header and one row per point. Values use the
/// shortest round-trip float representation.
pub fn write_points_csv(path: &Path, set: &SampleSet) -> Result<()> {
    let mut out = String::new();
    write_rows(&mut out, set);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads point CSVs: `#` lines and a non-numeric header row are skipped.
pub fn read_points_csv(path: &Path) -> Result<SampleSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut dim = None;
    let mut data = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                let d = *dim.get_or_insert(vals.len());
                if vals.len() != d {
                    return Err(Error::Format {
                        what: "point CSV",
                        msg: format!("line {}: {} columns, expected {d}", lineno + 1, vals.len()),
                    });
                }
                data.extend(vals);
            }
            Err(_) if dim.is_none() && data.is_empty() => {
                dim = Some(fields.len());
            }
            Err(_) => {
                return Err(Error::Format {
                    what: "point CSV",
                    msg: format!("line {}: non-numeric row", lineno + 1),
                })
            }
        }
    }
    let dim = dim.ok_or(Error::Format {
        what: "point CSV",
        msg: "no header or rows".into(),
    })?;
    SampleSet::new(dim, data)
}

/// Dataset cache: comment header with name, seed, params and normalization,
/// followed by a plain point CSV.
pub fn write_dataset_csv(path: &Path, ds: &Dataset) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# name={}", ds.spec.name());
    let _ = writeln!(out, "# seed={}", ds.seed);
    let _ = writeln!(out, "# params={}", ds.spec.params_string());
    let _ = writeln!(out, "# shift={}", join(&ds.normalization.shift, " "));
    let _ = writeln!(out, "# scale={}", join(&ds.normalization.scale, " "));
    if !ds.labels.is_empty() {
        let labels: Vec<String> = ds.labels.iter().map(|l| l.to_string()).collect();
        let _ = writeln!(out, "# labels={}", labels.join(" "));
    }
    write_rows(&mut out, &ds.points);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut meta = std::collections::BTreeMap::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let field = |k: &str| {
        meta.get(k).cloned().ok_or(Error::Format {
            what: "dataset cache",
            msg: format!("missing '# {k}=' header"),
        })
    };
    let name = field("name")?;
    let params: std::collections::BTreeMap<String, String> = field("params")?
        .split(';')
        .filter_map(|kv| kv.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();
    let spec = parse_spec(&name, |k| params.get(k).cloned())?;
    let seed = field("seed")?.parse().map_err(|_| Error::Format {
        what: "dataset cache",
        msg: "seed is not an integer".into(),
    })?;
    let normalization = Normalization {
        shift: parse_list(&field("shift")?)?,
        scale: parse_list(&field("scale")?)?,
    };
    let labels = match meta.get("labels") {
        None => Vec::new(),
        Some(s) => s
            .split_whitespace()
            .map(|v| {
                v.parse().map_err(|_| Error::Format {
                    what: "dataset cache",
                    msg: format!("bad label {v:?}"),
                })
            })
            .collect::<Result<_>>()?,
    };
    let points = read_points_csv(path)?;
    Error::check_dim(points.dim(), normalization.shift.len())?;
    Ok(Dataset {
        spec,
        seed,
        points,
        normalization,
        labels,
    })
}
