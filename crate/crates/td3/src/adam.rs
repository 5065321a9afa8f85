use ndarray::Zip;

use crate::mlp::{Float, Grads, Layer, Mlp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adaptive moment estimation state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub cfg: AdamConfig,
    pub m: Vec<Layer<T>>,
    pub v: Vec<Layer<T>>,
    pub t: u64,
}

impl<T: Float> Adam<T> {
    pub fn new(net: &Mlp<T>, cfg: AdamConfig) -> Self {
        let zeros = || {
            net.layers()
                .iter()
                .map(|l| Layer::zeros(l.inputs(), l.outputs()))
                .collect::<Vec<_>>()
        };
        Adam {
            cfg,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn cast<U: Float>(&self) -> Adam<U> {
        Adam {
            cfg: self.cfg,
            m: self.m.iter().map(Layer::cast).collect(),
            v: self.v.iter().map(Layer::cast).collect(),
            t: self.t,
        }
    }

    /// One descent step along `grads`.
    pub fn step(&mut self, net: &mut Mlp<T>, grads: &Grads<T>) {
        self.t += 1;
        let c = self.cfg;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (ob1, ob2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
        let step = T::of(c.lr / (1.0 - c.beta1.powi(self.t as i32)));
        let corr2 = T::of(1.0 / (1.0 - c.beta2.powi(self.t as i32)));
        let eps = T::of(c.eps);
        let update = |p: &mut T, m: &mut T, v: &mut T, g: &T| {
            *m = b1 * *m + ob1 * *g;
            *v = b2 * *v + ob2 * *g * *g;
            *p -= step * *m / ((*v * corr2).sqrt() + eps);
        };
        for (((layer, m), v), g) in net.layers_mut().iter_mut().zip(&mut self.m).zip(&mut self.v).zip(grads) {
            Zip::from(&mut layer.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .and(&g.w)
                .for_each(update);
            Zip::from(&mut layer.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .and(&g.b)
                .for_each(update);
        }
    }
}
