#![allow(dead_code)]

use dddm::micronet::{Architecture, ModelParams};
use dddm::rng::{self, Purpose};
use rand::Rng;

pub struct FdResult {
    pub checked: usize,
    pub worst: f64,
}

/// Central differences of `upstream · F(inputs)` against `backward_batch` on
/// `samples` random parameter coordinates.
pub fn fd_check(arch: Architecture, seed: u64, samples: usize) -> FdResult {
    let mut r = rng::derive(seed, Purpose::Init, 99);
    let mut params = ModelParams::init(arch.clone(), &mut r);
    // init shrinks the last layer; spread everything so no coordinate is tiny
    for p in params.as_mut_slice() {
        *p += r.gen_range(-0.5..0.5);
    }
    let d = arch.data_dim;
    let rows = 3;
    let x_t: Vec<f64> = (0..rows * d).map(|_| r.gen_range(-2.0..2.0)).collect();
    let est: Vec<f64> = (0..rows * d).map(|_| r.gen_range(-2.0..2.0)).collect();
    let steps: Vec<usize> = (0..rows).map(|_| r.gen_range(1..=arch.steps)).collect();
    let upstream: Vec<f64> = (0..rows * d).map(|_| r.gen_range(-1.0..1.0)).collect();

    let objective = |p: &ModelParams| -> f64 {
        let inputs = p.build_inputs(&x_t, &est, &steps).unwrap();
        let tr = p.forward_batch(&inputs, rows).unwrap();
        tr.output().iter().zip(&upstream).map(|(a, b)| a * b).sum()
    };
    let inputs = params.build_inputs(&x_t, &est, &steps).unwrap();
    let trace = params.forward_batch(&inputs, rows).unwrap();
    let grads = params.backward_batch(&trace, &upstream).unwrap();

    let n = params.as_slice().len();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let k = r.gen_range(0..n);
        let orig = params.as_slice()[k];
        params.as_mut_slice()[k] = orig + h;
        let up = objective(&params);
        params.as_mut_slice()[k] = orig - h;
        let down = objective(&params);
        params.as_mut_slice()[k] = orig;
        let fd = (up - down) / (2.0 * h);
        let an = grads.as_slice()[k];
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    FdResult { checked: samples, worst }
}

pub fn fd_architectures() -> Vec<Architecture> {
    vec![
        Architecture::new(2, 8, vec![16], 50).unwrap(),
        Architecture::new(2, 16, vec![24, 12], 1000).unwrap(),
        Architecture::new(3, 32, vec![32, 32, 32], 100).unwrap(),
    ]
}
