//! Dense multilayer perceptrons with hand-written backpropagation.
//!
//! Parameters of a network live in one flat buffer so optimizers and
//! checkpoints can treat them as a single vector. Weights of a layer are
//! stored input-major (`w[i * outputs + j]`), which turns both the forward
//! pass and the weight gradient into contiguous axpy loops.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    LeakyRelu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative given pre-activation `z` and activation `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    weight_offset: usize,
    bias_offset: usize,
    activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    layers: Vec<LayerShape>,
    params: Vec<f64>,
}

/// Activations kept from a batched forward pass.
#[derive(Debug, Clone, Default)]
pub struct BatchCache {
    batch: usize,
    /// `acts[0]` is the input; `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl BatchCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

impl Mlp {
    /// All-zero network with `sizes = [in, h1, ..., out]`; hidden layers use
    /// `hidden`, the final layer `output`.
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least one layer");
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let mut offset = 0;
        for l in 0..sizes.len() - 1 {
            let (inputs, outputs) = (sizes[l], sizes[l + 1]);
            let activation = if l + 2 == sizes.len() { output } else { hidden };
            layers.push(LayerShape { inputs, outputs, weight_offset: offset, bias_offset: offset + inputs * outputs, activation });
            offset += inputs * outputs + outputs;
        }
        Self { sizes: sizes.to_vec(), layers, params: vec![0.0; offset] }
    }

    /// Orthogonal initialization: each weight matrix has orthonormal rows or
    /// columns scaled by the layer's gain; biases start at zero.
    pub fn init_orthogonal<R: Rng + ?Sized>(&mut self, rng: &mut R, gains: &[f64]) {
        assert_eq!(gains.len(), self.layers.len());
        for (l, layer) in self.layers.clone().iter().enumerate() {
            let q = orthogonal(rng, layer.inputs, layer.outputs);
            let w = &mut self.params[layer.weight_offset..layer.weight_offset + layer.inputs * layer.outputs];
            for (dst, src) in w.iter_mut().zip(q) {
                *dst = gains[l] * src;
            }
            for b in &mut self.params[layer.bias_offset..layer.bias_offset + layer.outputs] {
                *b = 0.0;
            }
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.inputs());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let mut next = self.params[layer.bias_offset..layer.bias_offset + layer.outputs].to_vec();
            for (i, &xi) in cur.iter().enumerate() {
                let row = layer.weight_offset + i * layer.outputs;
                axpy(&mut next, xi, &self.params[row..row + layer.outputs]);
            }
            for v in next.iter_mut() {
                *v = layer.activation.apply(*v);
            }
            cur = next;
        }
        cur
    }

    /// Forward pass over `batch` row-major samples, keeping activations for
    /// [`Mlp::backward_batch`].
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> BatchCache {
        assert_eq!(x.len(), batch * self.inputs());
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        acts.push(x.to_vec());
        for layer in &self.layers {
            let input = acts.last().expect("input pushed");
            let bias = &self.params[layer.bias_offset..layer.bias_offset + layer.outputs];
            let mut z = vec![0.0; batch * layer.outputs];
            for r in 0..batch {
                let zr = &mut z[r * layer.outputs..(r + 1) * layer.outputs];
                zr.copy_from_slice(bias);
                let xr = &input[r * layer.inputs..(r + 1) * layer.inputs];
                for (i, &xi) in xr.iter().enumerate() {
                    let row = layer.weight_offset + i * layer.outputs;
                    axpy(zr, xi, &self.params[row..row + layer.outputs]);
                }
            }
            let a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            acts.push(a);
        }
        BatchCache { batch, acts, pre }
    }

    /// Accumulate `∂L/∂params` into `grad` given `∂L/∂output` for every
    /// sample of the cached batch.
    pub fn backward_batch(&self, cache: &BatchCache, grad_output: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        assert_eq!(grad_output.len(), cache.batch * self.outputs());
        let batch = cache.batch;
        let mut delta = grad_output.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre[l];
            let a = &cache.acts[l + 1];
            for ((d, &zi), &ai) in delta.iter_mut().zip(z).zip(a) {
                *d *= layer.activation.derivative(zi, ai);
            }
            let input = &cache.acts[l];
            for r in 0..batch {
                let dr = &delta[r * layer.outputs..(r + 1) * layer.outputs];
                axpy(&mut grad[layer.bias_offset..layer.bias_offset + layer.outputs], 1.0, dr);
                let xr = &input[r * layer.inputs..(r + 1) * layer.inputs];
                for (i, &xi) in xr.iter().enumerate() {
                    let row = layer.weight_offset + i * layer.outputs;
                    axpy(&mut grad[row..row + layer.outputs], xi, dr);
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; batch * layer.inputs];
                for r in 0..batch {
                    let dr = &delta[r * layer.outputs..(r + 1) * layer.outputs];
                    for i in 0..layer.inputs {
                        let row = layer.weight_offset + i * layer.outputs;
                        prev[r * layer.inputs + i] = dot(dr, &self.params[row..row + layer.outputs]);
                    }
                }
                delta = prev;
            }
        }
    }
}

/// `rows × cols` (input-major) matrix with orthonormal rows or columns.
fn orthogonal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Vec<f64> {
    let (long, short) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    // `short` vectors of length `long`, Gram–Schmidt orthonormalized.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for b in &basis {
                let p = dot(&v, b);
                axpy(&mut v, -p, b);
            }
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = if rows >= cols { basis[c][r] } else { basis[r][c] };
        }
    }
    out
}
