//! The conditioned MLP `F_θ(x₀_est, x_t, t)` with explicit reverse mode.
//!
//! Input row layout is `[x_t (D) | x₀_est (D) | embed(t) (E)]`; hidden layers
//! use SiLU, the output layer is affine with width `D`. Parameters live in one
//! flat buffer, layer by layer, each layer as `W (out × in, row-major)` then
//! `b (out)`. Gradients, EMA shadows and Adam moments share that layout.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub data_dim: usize,
    pub embed_dim: usize,
    pub hidden: Vec<usize>,
    /// Number of diffusion steps T; fixes the embedding frequencies.
    pub steps: usize,
}

impl Architecture {
    pub fn new(data_dim: usize, embed_dim: usize, hidden: Vec<usize>, steps: usize) -> Result<Self> {
        if data_dim == 0 || steps == 0 {
            return Err(Error::InvalidArgument("data_dim and steps must be positive".into()));
        }
        if embed_dim == 0 || embed_dim % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "embedding width must be even and positive, got {embed_dim}"
            )));
        }
        if hidden.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument("hidden widths must be positive".into()));
        }
        Ok(Architecture {
            data_dim,
            embed_dim,
            hidden,
            steps,
        })
    }

    pub fn input_dim(&self) -> usize {
        2 * self.data_dim + self.embed_dim
    }

    /// `(fan_in, fan_out)` per layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim()];
        dims.extend(&self.hidden);
        dims.push(self.data_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.layer_shapes()
            .iter()
            .map(|(i, o)| {
                let start = off;
                off += i * o + o;
                start
            })
            .collect()
    }
}

/// Sinusoidal features of step `t`: pairs `(sin tω_k, cos tω_k)` with periods
/// log-spaced from 4 to 4T.
pub fn time_embedding(t: usize, embed_dim: usize, steps: usize) -> Result<Vec<f64>> {
    if embed_dim == 0 || embed_dim % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "embedding width must be even and positive, got {embed_dim}"
        )));
    }
    if t == 0 || t > steps {
        return Err(Error::StepOutOfRange { t, steps });
    }
    let mut out = vec![0.0; embed_dim];
    write_embedding(t, steps, &mut out);
    Ok(out)
}

fn write_embedding(t: usize, steps: usize, out: &mut [f64]) {
    let pairs = out.len() / 2;
    let tf = t as f64;
    for k in 0..pairs {
        let frac = if pairs == 1 { 0.0 } else { k as f64 / (pairs - 1) as f64 };
        let period = 4.0 * (steps as f64).powf(frac);
        let (s, c) = (2.0 * PI * tf / period).sin_cos();
        out[2 * k] = s;
        out[2 * k + 1] = c;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: Architecture,
    data: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(arch: Architecture) -> Self {
        let n = arch.param_count();
        ModelParams { arch, data: vec![0.0; n] }
    }

    /// Uniform fan-in init, `U(−1/√fan_in, 1/√fan_in)`, zero biases; the output
    /// layer is scaled by 0.1 so early predictions stay close to `x_t`.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut p = ModelParams::zeros(arch);
        let shapes = p.arch.layer_shapes();
        let offsets = p.arch.offsets();
        let last = shapes.len() - 1;
        for (l, ((fan_in, fan_out), off)) in shapes.iter().zip(offsets).enumerate() {
            let bound = 1.0 / (*fan_in as f64).sqrt() * if l == last { 0.1 } else { 1.0 };
            for w in &mut p.data[off..off + fan_in * fan_out] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        p
    }

    pub fn from_flat(arch: Architecture, data: Vec<f64>) -> Result<Self> {
        Error::check_dim(arch.param_count(), data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter buffer".into()));
        }
        Ok(ModelParams { arch, data })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn layer(&self, l: usize, off: usize) -> (&[f64], &[f64]) {
        let (i, o) = self.arch.layer_shapes()[l];
        let w = &self.data[off..off + i * o];
        let b = &self.data[off + i * o..off + i * o + o];
        (w, b)
    }

    /// Assemble a batch of network inputs from rows of `x_t`, estimates and steps.
    pub fn build_inputs(&self, x_t: &[f64], x0_est: &[f64], steps: &[usize]) -> Result<Vec<f64>> {
        let d = self.arch.data_dim;
        let rows = steps.len();
        Error::check_dim(rows * d, x_t.len())?;
        Error::check_dim(rows * d, x0_est.len())?;
        let width = self.arch.input_dim();
        let mut inputs = vec![0.0; rows * width];
        for (r, row) in inputs.chunks_exact_mut(width).enumerate() {
            let t = steps[r];
            if t == 0 || t > self.arch.steps {
                return Err(Error::StepOutOfRange { t, steps: self.arch.steps });
            }
            row[..d].copy_from_slice(&x_t[r * d..(r + 1) * d]);
            row[d..2 * d].copy_from_slice(&x0_est[r * d..(r + 1) * d]);
            write_embedding(t, self.arch.steps, &mut row[2 * d..]);
        }
        Ok(inputs)
    }

    /// Batched forward pass over `rows` input rows; keeps what backward needs.
    pub fn forward_batch(&self, inputs: &[f64], rows: usize) -> Result<Trace> {
        Error::check_dim(rows * self.arch.input_dim(), inputs.len())?;
        let shapes = self.arch.layer_shapes();
        let offsets = self.arch.offsets();
        let last = shapes.len() - 1;
        let mut layer_inputs = Vec::with_capacity(shapes.len());
        let mut pre_acts = Vec::with_capacity(last);
        let mut x = inputs.to_vec();
        for (l, (&(fan_in, fan_out), &off)) in shapes.iter().zip(&offsets).enumerate() {
            let (w, b) = self.layer(l, off);
            let mut z = vec![0.0; rows * fan_out];
            for row in z.chunks_exact_mut(fan_out) {
                row.copy_from_slice(b);
            }
            if rows > 0 {
                // z += x · Wᵀ
                unsafe {
                    matrixmultiply::dgemm(
                        rows, fan_in, fan_out,
                        1.0,
                        x.as_ptr(), fan_in as isize, 1,
                        w.as_ptr(), 1, fan_in as isize,
                        1.0,
                        z.as_mut_ptr(), fan_out as isize, 1,
                    );
                }
            }
            if l == last {
                layer_inputs.push(x);
                return Ok(Trace {
                    rows,
                    layer_inputs,
                    pre_acts,
                    output: z,
                });
            }
            let act = z.iter().map(|&v| silu(v)).collect();
            layer_inputs.push(x);
            pre_acts.push(z);
            x = act;
        }
        unreachable!("architecture always has an output layer")
    }

    /// Reverse pass: `upstream` is ∂loss/∂output (rows × D). Returns parameter
    /// gradients summed over rows. Inputs (including the estimate) get none.
    pub fn backward_batch(&self, trace: &Trace, upstream: &[f64]) -> Result<Gradients> {
        let rows = trace.rows;
        Error::check_dim(rows * self.arch.data_dim, upstream.len())?;
        let shapes = self.arch.layer_shapes();
        let offsets = self.arch.offsets();
        let mut grads = Gradients::zeros(self.arch.clone());
        let mut delta = upstream.to_vec();
        for l in (0..shapes.len()).rev() {
            let (fan_in, fan_out) = shapes[l];
            let off = offsets[l];
            let x = &trace.layer_inputs[l];
            {
                let (gw, gb) = grads.data[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                if rows > 0 {
                    // gW += δᵀ · x
                    unsafe {
                        matrixmultiply::dgemm(
                            fan_out, rows, fan_in,
                            1.0,
                            delta.as_ptr(), 1, fan_out as isize,
                            x.as_ptr(), fan_in as isize, 1,
                            1.0,
                            gw.as_mut_ptr(), fan_in as isize, 1,
                        );
                    }
                }
                for row in delta.chunks_exact(fan_out) {
                    for (g, d) in gb.iter_mut().zip(row) {
                        *g += d;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let (w, _) = self.layer(l, off);
            let mut dx = vec![0.0; rows * fan_in];
            if rows > 0 {
                unsafe {
                    matrixmultiply::dgemm(
                        rows, fan_out, fan_in,
                        1.0,
                        delta.as_ptr(), fan_out as isize, 1,
                        w.as_ptr(), fan_in as isize, 1,
                        0.0,
                        dx.as_mut_ptr(), fan_in as isize, 1,
                    );
                }
            }
            for (g, z) in dx.iter_mut().zip(&trace.pre_acts[l - 1]) {
                *g *= silu_grad(*z);
            }
            delta = dx;
        }
        Ok(grads)
    }

    /// `F_θ(x₀_est, x_t, t)` for a single point.
    pub fn forward(&self, x0_est: &[f64], x_t: &[f64], t: usize) -> Result<Vec<f64>> {
        Error::check_dim(self.arch.data_dim, x_t.len())?;
        Error::check_dim(self.arch.data_dim, x0_est.len())?;
        let inputs = self.build_inputs(x_t, x0_est, &[t])?;
        Ok(self.forward_batch(&inputs, 1)?.output)
    }

    pub fn backward(&self, x0_est: &[f64], x_t: &[f64], t: usize, upstream: &[f64]) -> Result<Gradients> {
        Error::check_dim(self.arch.data_dim, x_t.len())?;
        Error::check_dim(self.arch.data_dim, x0_est.len())?;
        let inputs = self.build_inputs(x_t, x0_est, &[t])?;
        let trace = self.forward_batch(&inputs, 1)?;
        self.backward_batch(&trace, upstream)
    }
}

/// Activations retained by [`ModelParams::forward_batch`].
#[derive(Debug, Clone)]
pub struct Trace {
    rows: usize,
    layer_inputs: Vec<Vec<f64>>,
    pre_acts: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Trace {
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Network output, `rows × D` row-major.
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
pub(crate) fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

#[inline]
pub(crate) fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    arch: Architecture,
    data: Vec<f64>,
}

impl Gradients {
    pub fn zeros(arch: Architecture) -> Self {
        let n = arch.param_count();
        Gradients { arch, data: vec![0.0; n] }
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|g| *g *= k);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|g| g.is_finite())
    }
}

/// Adam moments and hyperparameters; bias-corrected.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(param_count: usize) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    /// One Adam update. Refuses non-finite gradients without touching state.
    pub fn step(&mut self, params: &mut ModelParams, grads: &Gradients, lr: f64) -> Result<()> {
        if params.arch != grads.arch {
            return Err(Error::InvalidArgument("gradient shape differs from parameters".into()));
        }
        Error::check_dim(self.m.len(), params.data.len())?;
        if !(lr >= 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate {lr} must be nonnegative")));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient; Adam step refused".into()));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .data
            .iter_mut()
            .zip(&grads.data)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Exponential moving average of the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaParams {
    pub shadow: ModelParams,
    pub decay: f64,
}

impl EmaParams {
    pub fn new(params: &ModelParams, decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&decay) {
            return Err(Error::InvalidArgument(format!("EMA decay {decay} outside [0, 1)")));
        }
        Ok(EmaParams {
            shadow: params.clone(),
            decay,
        })
    }

    /// `shadow ← decay · shadow + (1 − decay) · params`
    pub fn update(&mut self, params: &ModelParams) -> Result<()> {
        if self.shadow.arch != params.arch {
            return Err(Error::InvalidArgument("EMA shape differs from parameters".into()));
        }
        let d = self.decay;
        for (s, p) in self.shadow.data.iter_mut().zip(&params.data) {
            *s = d * *s + (1.0 - d) * p;
        }
        Ok(())
    }
}
