//! Distribution distances between sample sets, and a minimal SVG scatter.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::SampleSet;
use crate::rng::{self, Purpose};

fn check_pair(a: &SampleSet, b: &SampleSet) -> Result<()> {
    Error::check_dim(a.dim(), b.dim())?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("distance between empty sample sets".into()));
    }
    Ok(())
}

/// Seeded directions uniform on the unit sphere.
pub fn random_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::derive(seed, Purpose::Eval, 0);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = rng::normal_vec(&mut r, dim);
        let n = crate::points::norm(&v);
        if n > 1e-12 {
            out.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Squared 2-Wasserstein distance between two 1-D empirical measures with
/// uniform weights, by walking both quantile functions.
pub fn wasserstein2_sq_1d(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        return a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut level = 0.0;
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        let next_a = (i + 1) as f64 / na;
        let next_b = (j + 1) as f64 / nb;
        let next = next_a.min(next_b);
        acc += (next - level) * (a[i] - b[j]).powi(2);
        level = next;
        if next_a <= next {
            i += 1;
        }
        if next_b <= next {
            j += 1;
        }
    }
    acc
}

/// Mean over `n_proj` seeded directions of the 1-D 2-Wasserstein distance
/// between the projected sets.
pub fn sliced_wasserstein(a: &SampleSet, b: &SampleSet, n_proj: usize, seed: u64) -> Result<f64> {
    check_pair(a, b)?;
    if n_proj == 0 {
        return Err(Error::InvalidArgument("n_proj must be positive".into()));
    }
    let dirs = random_directions(a.dim(), n_proj, seed);
    let project = |set: &SampleSet, u: &[f64]| -> Vec<f64> {
        set.iter().map(|p| p.iter().zip(u).map(|(x, y)| x * y).sum()).collect()
    };
    let total: f64 = dirs
        .iter()
        .map(|u| wasserstein2_sq_1d(&mut project(a, u), &mut project(b, u)).sqrt())
        .sum();
    Ok(total / n_proj as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Median pairwise distance over `A ∪ B` (on at most 1000 seeded points).
    Median,
    Fixed(f64),
}

const MEDIAN_SUBSAMPLE: usize = 1000;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn median_bandwidth(a: &SampleSet, b: &SampleSet, seed: u64) -> f64 {
    let all: Vec<&[f64]> = a.iter().chain(b.iter()).collect();
    let pool: Vec<&[f64]> = if all.len() > MEDIAN_SUBSAMPLE {
        let mut r = rng::derive(seed, Purpose::Eval, 1);
        let mut idx = sample_indices(&mut r, all.len(), MEDIAN_SUBSAMPLE).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| all[i]).collect()
    } else {
        all
    };
    let mut d: Vec<f64> = Vec::with_capacity(pool.len() * pool.len() / 2);
    for i in 0..pool.len() {
        for j in i + 1..pool.len() {
            d.push(sq_dist(pool[i], pool[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// `√max(MMD², 0)` with the unbiased MMD² estimator and an RBF kernel
/// `exp(−‖x − y‖² / (2σ²))`.
pub fn mmd_rbf_with(a: &SampleSet, b: &SampleSet, bandwidth: Bandwidth, seed: u64) -> Result<f64> {
    Error::check_dim(a.dim(), b.dim())?;
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument("MMD needs at least two points per set".into()));
    }
    let sigma = match bandwidth {
        Bandwidth::Median => median_bandwidth(a, b, seed),
        Bandwidth::Fixed(s) => s,
    };
    let sigma = if sigma > 0.0 { sigma } else { 1.0 };
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let within = |s: &SampleSet| -> f64 {
        let mut acc = 0.0;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                acc += (-gamma * sq_dist(s.point(i), s.point(j))).exp();
            }
        }
        2.0 * acc / (s.len() * (s.len() - 1)) as f64
    };
    let mut cross = 0.0;
    for p in a.iter() {
        for q in b.iter() {
            cross += (-gamma * sq_dist(p, q)).exp();
        }
    }
    cross /= (a.len() * b.len()) as f64;
    let mmd2 = within(a) + within(b) - 2.0 * cross;
    Ok(mmd2.max(0.0).sqrt())
}

pub fn mmd_rbf(a: &SampleSet, b: &SampleSet, seed: u64) -> Result<f64> {
    mmd_rbf_with(a, b, Bandwidth::Median, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub swd: f64,
    pub mmd: f64,
    pub n_proj: usize,
    pub count_a: usize,
    pub count_b: usize,
    pub seed: u64,
}

/// Both distances. MMD is O(n²), so each set is capped at `mmd_cap` seeded points.
pub fn evaluate(a: &SampleSet, b: &SampleSet, n_proj: usize, seed: u64, mmd_cap: usize) -> Result<EvalReport> {
    let swd = sliced_wasserstein(a, b, n_proj, seed)?;
    let cap = |s: &SampleSet, sub: u64| -> SampleSet {
        if s.len() <= mmd_cap {
            return s.clone();
        }
        let mut r = rng::derive(seed, Purpose::Eval, sub);
        let mut idx = sample_indices(&mut r, s.len(), mmd_cap).into_vec();
        idx.sort_unstable();
        let data = idx.iter().flat_map(|&i| s.point(i).to_vec()).collect();
        SampleSet::new(s.dim(), data).expect("whole rows")
    };
    let mmd = mmd_rbf(&cap(a, 2), &cap(b, 3), seed)?;
    Ok(EvalReport {
        swd,
        mmd,
        n_proj,
        count_a: a.len(),
        count_b: b.len(),
        seed,
    })
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Self-contained SVG scatter of labelled 2-D sets with equal-aspect axes
/// centred on the bounding box of all points.
pub fn scatter_svg(sets: &[(&SampleSet, &str)], path: &Path) -> Result<()> {
    let svg = render_scatter(sets)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

pub fn render_scatter(sets: &[(&SampleSet, &str)]) -> Result<String> {
    for (s, _) in sets {
        if s.dim() != 2 {
            return Err(Error::InvalidArgument(format!("scatter needs 2-D points, got {}", s.dim())));
        }
    }
    const SIZE: f64 = 480.0;
    const PAD: f64 = 20.0;
    const LEGEND: f64 = 140.0;
    let plot = SIZE - 2.0 * PAD;

    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for (s, _) in sets {
        for p in s.iter() {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
    }
    let (center, half) = if lo[0].is_finite() {
        let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        let h = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / 2.0) * 1.05;
        (c, if h > 0.0 { h } else { 1.0 })
    } else {
        ([0.0, 0.0], 1.0)
    };
    let scale = plot / (2.0 * half);
    let to_px = |p: &[f64]| -> (f64, f64) {
        (
            PAD + plot / 2.0 + (p[0] - center[0]) * scale,
            PAD + plot / 2.0 - (p[1] - center[1]) * scale,
        )
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = SIZE + LEGEND,
        h = SIZE
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{}" height="{SIZE}" fill="white"/>"#, SIZE + LEGEND);
    let _ = writeln!(
        out,
        r#"<rect id="plot-area" x="{PAD}" y="{PAD}" width="{plot}" height="{plot}" fill="none" stroke="gray"/>"#
    );
    for (k, (s, label)) in sets.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(out, r#"<g fill="{color}" fill-opacity="0.6">"#);
        for p in s.iter() {
            let (x, y) = to_px(p);
            let _ = writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="1.5"/>"#);
        }
        out.push_str("</g>\n");
        let ly = PAD + 16.0 * k as f64 + 10.0;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12">{}</text>"#,
            SIZE + 4.0,
            ly - 9.0,
            SIZE + 18.0,
            ly,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
