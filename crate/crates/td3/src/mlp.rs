//! Fully connected networks with ReLU hidden layers and manual backpropagation.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use ndarray::{linalg::general_mat_mul, Array1, Array2, ArrayView2, Axis, LinalgScalar, ScalarOperand, Zip};
use rand::Rng;

/// Floating-point element type of a network.
pub trait Float:
    num_traits::Float
    + LinalgScalar
    + ScalarOperand
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;
}

impl Float for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Float for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Output {
    Linear,
    Tanh,
}

/// `y = x W + b`, with `W` stored as `inputs x outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Float> Layer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            w: Array2::zeros((inputs, outputs)),
            b: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn cast<U: Float>(&self) -> Layer<U> {
        Layer {
            w: self.w.mapv(|v| U::of(v.f64())),
            b: self.b.mapv(|v| U::of(v.f64())),
        }
    }
}

/// Parameter gradients, one `(dW, db)` per layer.
pub type Grads<T> = Vec<Layer<T>>;

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    /// Input of each layer.
    inputs: Vec<Array2<T>>,
    /// Output of the network after the output activation.
    output: Array2<T>,
}

impl<T> Cache<T> {
    pub fn output(&self) -> &Array2<T> {
        &self.output
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Layer<T>>,
    output: Output,
}

impl<T: Float> Mlp<T> {
    /// Layer sizes `dims = [in, h1, ..., out]`, all parameters zero.
    pub fn zeros(dims: &[usize], output: Output) -> Self {
        assert!(dims.len() >= 2, "a network needs input and output sizes");
        Mlp {
            layers: dims.windows(2).map(|d| Layer::zeros(d[0], d[1])).collect(),
            output,
        }
    }

    /// Uniform `+-1/sqrt(fan_in)` initialization; the last layer is further scaled by
    /// `last_scale`.
    pub fn init<R: Rng>(dims: &[usize], output: Output, last_scale: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(dims, output);
        let n = net.layers.len();
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let bound = 1.0 / (layer.inputs() as f64).sqrt();
            let scale = if l + 1 == n { last_scale } else { 1.0 };
            for v in layer.w.iter_mut().chain(layer.b.iter_mut()) {
                *v = T::of(scale * rng.gen_range(-bound..bound));
            }
        }
        net
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn output_kind(&self) -> Output {
        self.output
    }

    /// Layer sizes `[in, h1, ..., out]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].inputs()];
        d.extend(self.layers.iter().map(Layer::outputs));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// All parameters in layer order, each layer's weights row-major then its biases.
    pub fn params(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    fn affine(layer: &Layer<T>, x: &ArrayView2<T>) -> Array2<T> {
        let mut y = Array2::from_shape_fn((x.nrows(), layer.outputs()), |(_, j)| layer.b[j]);
        general_mat_mul(T::one(), x, &layer.w, T::one(), &mut y);
        y
    }

    fn activate_output(&self, y: &mut Array2<T>) {
        if self.output == Output::Tanh {
            y.mapv_inplace(T::tanh);
        }
    }

    /// Batch forward pass; rows are samples.
    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        assert_eq!(x.ncols(), self.input_dim(), "input width mismatch");
        let mut h = Self::affine(&self.layers[0], &x);
        for layer in &self.layers[1..] {
            h.mapv_inplace(relu);
            h = Self::affine(layer, &h.view());
        }
        self.activate_output(&mut h);
        h
    }

    pub fn forward_cached(&self, x: ArrayView2<T>) -> Cache<T> {
        assert_eq!(x.ncols(), self.input_dim(), "input width mismatch");
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut y = Self::affine(layer, &h.view());
            if l + 1 < self.layers.len() {
                y.mapv_inplace(relu);
            }
            inputs.push(h);
            h = y;
        }
        self.activate_output(&mut h);
        Cache { inputs, output: h }
    }

    /// Backpropagates `d_out` (gradient w.r.t. the network output). Returns parameter
    /// gradients when `params` is set, and the gradient w.r.t. the input when `input`
    /// is set.
    pub fn backward(
        &self,
        cache: &Cache<T>,
        d_out: &Array2<T>,
        params: bool,
        input: bool,
    ) -> (Option<Grads<T>>, Option<Array2<T>>) {
        let mut delta = d_out.clone();
        if self.output == Output::Tanh {
            Zip::from(&mut delta)
                .and(&cache.output)
                .for_each(|d, &y| *d *= T::one() - y * y);
        }
        let mut grads: Vec<Layer<T>> = Vec::new();
        let mut d_input = None;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let x = &cache.inputs[l];
            if params {
                grads.push(Layer {
                    w: x.t().dot(&delta),
                    b: delta.sum_axis(Axis(0)),
                });
            }
            if l == 0 && !input {
                break;
            }
            let mut dx = delta.dot(&layer.w.t());
            if l == 0 {
                d_input = Some(dx);
                break;
            }
            // x is a ReLU output here
            Zip::from(&mut dx).and(x).for_each(|d, &a| {
                if a <= T::zero() {
                    *d = T::zero();
                }
            });
            delta = dx;
        }
        grads.reverse();
        (params.then_some(grads), d_input)
    }

    /// `self <- rate * online + (1 - rate) * self`.
    pub fn soft_update(&mut self, online: &Mlp<T>, rate: f64) {
        assert_eq!(self.dims(), online.dims(), "network shapes differ");
        let (r, keep) = (T::of(rate), T::of(1.0 - rate));
        for (t, o) in self.params_mut().zip(online.params()) {
            *t = r * *o + keep * *t;
        }
    }

    pub fn cast<U: Float>(&self) -> Mlp<U> {
        Mlp {
            layers: self.layers.iter().map(Layer::cast).collect(),
            output: self.output,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }
}

fn relu<T: Float>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}
