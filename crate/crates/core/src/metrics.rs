//! Base distances and the pseudo wrapper `d ↦ √(d + c²) − c`.
//!
//! The wrapper is evaluated as `d / (√(d + c²) + c)`, which is algebraically
//! identical and keeps precision when `d ≪ c²`.

use crate::error::{Error, Result};
use crate::rng;

/// Fixed seeded linear feature map `z ↦ P z`, `P ∈ R^{width × dim}`, entries
/// `N(0, 1/width)`. Stands in for a perceptual feature extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    seed: u64,
    dim: usize,
    width: usize,
    matrix: Vec<f64>,
}

impl FeatureMap {
    pub fn new(seed: u64, dim: usize, width: usize) -> Result<Self> {
        if dim == 0 || width < dim {
            return Err(Error::InvalidArgument(format!(
                "feature width {width} must be at least the data dimension {dim}"
            )));
        }
        let mut r = rng::derive(seed, rng::Purpose::Feature, 0);
        let scale = 1.0 / (width as f64).sqrt();
        let matrix = rng::normal_vec(&mut r, width * dim).into_iter().map(|v| v * scale).collect();
        Ok(FeatureMap {
            seed,
            dim,
            width,
            matrix,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        self.matrix
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(z).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn project_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (row, yk) in self.matrix.chunks_exact(self.dim).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yk;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaseMetric {
    L1,
    SquaredL2,
    Feature(FeatureMap),
}

impl BaseMetric {
    pub fn name(&self) -> &'static str {
        match self {
            BaseMetric::L1 => "l1",
            BaseMetric::SquaredL2 => "squared_l2",
            BaseMetric::Feature(_) => "feature",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub base: BaseMetric,
    c: f64,
}

impl MetricSpec {
    pub fn new(base: BaseMetric, c: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("pseudo constant c = {c} must be finite and >= 0")));
        }
        Ok(MetricSpec { base, c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn base_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Error::check_dim(x.len(), y.len())?;
        Ok(match &self.base {
            BaseMetric::L1 => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
            BaseMetric::SquaredL2 => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
            BaseMetric::Feature(fm) => {
                Error::check_dim(fm.dim, x.len())?;
                let delta: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                fm.project(&delta).iter().map(|v| v * v).sum()
            }
        })
    }

    pub fn pseudo_wrap(&self, d: f64) -> Result<f64> {
        if !(d >= 0.0) {
            return Err(Error::InvalidArgument(format!("distance {d} must be nonnegative")));
        }
        Ok(wrap(d, self.c))
    }

    /// Loss `pseudo_wrap(base_distance(prediction, target))` and its gradient
    /// with respect to `prediction`. At `d + c² = 0` the gradient is zero.
    pub fn loss_and_grad(&self, prediction: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d = self.base_distance(prediction, target)?;
        let loss = wrap(d, self.c);
        let denom = 2.0 * (d + self.c * self.c).sqrt();
        if denom == 0.0 {
            return Ok((loss, vec![0.0; prediction.len()]));
        }
        let delta: Vec<f64> = prediction.iter().zip(target).map(|(a, b)| a - b).collect();
        let dd: Vec<f64> = match &self.base {
            BaseMetric::L1 => delta
                .iter()
                .map(|v| if *v == 0.0 { 0.0 } else { v.signum() })
                .collect(),
            BaseMetric::SquaredL2 => delta.iter().map(|v| 2.0 * v).collect(),
            BaseMetric::Feature(fm) => fm
                .project_transpose(&fm.project(&delta))
                .into_iter()
                .map(|v| 2.0 * v)
                .collect(),
        };
        Ok((loss, dd.into_iter().map(|g| g / denom).collect()))
    }
}

fn wrap(d: f64, c: f64) -> f64 {
    let s = (d + c * c).sqrt() + c;
    if s == 0.0 {
        0.0
    } else {
        d / s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn specs(c: f64) -> Vec<MetricSpec> {
        vec![
            MetricSpec::new(BaseMetric::L1, c).unwrap(),
            MetricSpec::new(BaseMetric::SquaredL2, c).unwrap(),
            MetricSpec::new(BaseMetric::Feature(FeatureMap::new(7, 2, 8).unwrap()), c).unwrap(),
        ]
    }

    #[test]
    fn identical_points_have_zero_distance() {
        for s in specs(0.1) {
            assert_eq!(s.base_distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn l1_direct_sum() {
        let s = MetricSpec::new(BaseMetric::L1, 0.0).unwrap();
        assert_eq!(s.base_distance(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 3.0);
    }

    #[test]
    fn feature_distance_matches_independent_projection() {
        let fm = FeatureMap::new(42, 2, 8).unwrap();
        let s = MetricSpec::new(BaseMetric::Feature(fm.clone()), 0.0).unwrap();
        let (x, y) = ([0.3, -1.1], [2.0, 0.7]);
        // second route: project each point, then take the squared norm of the difference
        let m = fm.matrix();
        let mut want = 0.0;
        for k in 0..8 {
            let px = m[2 * k] * x[0] + m[2 * k + 1] * x[1];
            let py = m[2 * k] * y[0] + m[2 * k + 1] * y[1];
            want += (px - py).powi(2);
        }
        assert!((s.base_distance(&x, &y).unwrap() - want).abs() < 1e-12);
        assert_eq!(FeatureMap::new(42, 2, 8).unwrap(), fm);
        assert!(FeatureMap::new(42, 3, 2).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        for s in specs(0.0) {
            assert!(s.base_distance(&[1.0], &[1.0, 2.0]).is_err());
            assert!(s.loss_and_grad(&[1.0], &[1.0, 2.0]).is_err());
        }
    }

    #[test]
    fn wrapper_values() {
        let s = MetricSpec::new(BaseMetric::SquaredL2, 0.3).unwrap();
        assert_eq!(s.pseudo_wrap(0.0).unwrap(), 0.0);
        let s0 = MetricSpec::new(BaseMetric::SquaredL2, 0.0).unwrap();
        assert_eq!(s0.pseudo_wrap(4.0).unwrap(), 2.0);
        let best = MetricSpec::new(BaseMetric::SquaredL2, 0.000069).unwrap();
        // 25-digit reference: 0.9999310023804999971666099
        assert!((best.pseudo_wrap(1.0).unwrap() - 0.9999310023805).abs() < 1e-13);
        assert!(s.pseudo_wrap(-1e-9).is_err());
        assert!(MetricSpec::new(BaseMetric::L1, -0.1).is_err());
    }

    #[test]
    fn gradient_at_minimum_is_zero() {
        for c in [0.0, 0.5] {
            for s in specs(c) {
                let (l, g) = s.loss_and_grad(&[0.2, 0.1], &[0.2, 0.1]).unwrap();
                assert_eq!(l, 0.0);
                assert_eq!(g, vec![0.0, 0.0]);
            }
        }
    }

    #[test]
    fn euclidean_norm_case() {
        let s = MetricSpec::new(BaseMetric::SquaredL2, 0.0).unwrap();
        let (l, g) = s.loss_and_grad(&[3.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(l, 3.0);
        assert_eq!(g, vec![1.0, 0.0]);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let target = [0.4, -0.9];
        for c in [0.0, 0.05, 1.0] {
            for s in specs(c) {
                for p in [[1.3, 0.2], [-0.7, -2.1], [0.41, 0.5]] {
                    let (_, g) = s.loss_and_grad(&p, &target).unwrap();
                    for i in 0..2 {
                        let h = 1e-6;
                        let (mut a, mut b) = (p, p);
                        a[i] += h;
                        b[i] -= h;
                        let fd = (s.loss_and_grad(&a, &target).unwrap().0
                            - s.loss_and_grad(&b, &target).unwrap().0)
                            / (2.0 * h);
                        let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-8);
                        assert!(rel < 1e-4, "{} c={c} p={p:?}: fd {fd} vs {}", s.base.name(), g[i]);
                    }
                }
            }
        }
    }

    #[test]
    fn small_distance_linear_regime() {
        for c in [1e-3, 0.069, 2.0] {
            let s = MetricSpec::new(BaseMetric::SquaredL2, c).unwrap();
            let d = c * c / 100.0;
            let lin = d / (2.0 * c);
            assert!((s.pseudo_wrap(d).unwrap() - lin).abs() / lin < 0.02);
        }
    }

    proptest! {
        #[test]
        fn loss_nonnegative_and_zero_only_on_diagonal(
            x in prop::collection::vec(-5.0f64..5.0, 2),
            y in prop::collection::vec(-5.0f64..5.0, 2),
            c in 0.0f64..2.0,
        ) {
            for s in specs(c) {
                let (l, _) = s.loss_and_grad(&x, &y).unwrap();
                prop_assert!(l >= 0.0);
                prop_assert_eq!(l == 0.0, x == y);
                prop_assert_eq!(s.loss_and_grad(&x, &x).unwrap().0, 0.0);
            }
        }

        #[test]
        fn wrapper_monotone_and_bounded(d1 in 0.0f64..100.0, gap in 1e-6f64..10.0, c in 0.0f64..3.0) {
            let s = MetricSpec::new(BaseMetric::L1, c).unwrap();
            let lo = s.pseudo_wrap(d1).unwrap();
            let hi = s.pseudo_wrap(d1 + gap).unwrap();
            prop_assert!(hi > lo);
            prop_assert!(lo <= d1.sqrt() + 1e-15);
        }
    }
}
