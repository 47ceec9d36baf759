//! Dense feed-forward networks with rectifier hidden layers, manual
//! backpropagation and Adam.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `inputs x outputs`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }
}

/// Hidden layers use the rectifier; the last layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Intermediate values of a forward pass needed for backpropagation.
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation output of each hidden layer.
    hidden_pre: Vec<Array2<f64>>,
}

/// Parameter gradients, one `(weight, bias)` pair per layer.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|(w, b)| w.iter().chain(b.iter()).map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        for (w, b) in &mut self.layers {
            w.mapv_inplace(|x| x * k);
            b.mapv_inplace(|x| x * k);
        }
    }

    pub fn clip_norm(&mut self, max_norm: f64) {
        let n = self.norm();
        if n > max_norm {
            self.scale(max_norm / n);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
            .collect()
    }
}

impl Mlp {
    /// Layer widths `[in, hidden.., out]`, weights drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output widths");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Dense {
                    weight: Array2::from_shape_fn((w[0], w[1]), |_| dist.sample(rng)),
                    bias: Array1::from_shape_fn(w[1], |_| dist.sample(rng)),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(Dense::outputs));
        s
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            h = h.dot(&layer.weight) + &layer.bias;
            if i < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        h
    }

    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        self.forward(view).into_raw_vec_and_offset().0
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> (Array2<f64>, ForwardCache) {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut hidden_pre = Vec::with_capacity(last);
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = h.dot(&layer.weight) + &layer.bias;
            inputs.push(h);
            if i < last {
                h = z.mapv(|v| v.max(0.0));
                hidden_pre.push(z);
            } else {
                h = z;
            }
        }
        (h, ForwardCache { inputs, hidden_pre })
    }

    /// Backpropagates `grad_out` (d loss / d output) and returns parameter
    /// gradients together with d loss / d input.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Array2<f64>) -> (Gradients, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if i < self.layers.len() - 1 {
                let pre = &cache.hidden_pre[i];
                g.zip_mut_with(pre, |gv, &z| {
                    if z <= 0.0 {
                        *gv = 0.0
                    }
                });
            }
            let gw = cache.inputs[i].t().dot(&g);
            let gb = g.sum_axis(Axis(0));
            let gin = g.dot(&layer.weight.t());
            grads.push((gw, gb));
            g = gin;
        }
        grads.reverse();
        (Gradients { layers: grads }, g)
    }

    /// `self <- tau * source + (1 - tau) * self`.
    pub fn soft_update(&mut self, source: &Mlp, tau: f64) {
        for (dst, src) in self.layers.iter_mut().zip(&source.layers) {
            dst.weight.zip_mut_with(&src.weight, |d, &s| *d = tau * s + (1.0 - tau) * *d);
            dst.bias.zip_mut_with(&src.bias, |d, &s| *d = tau * s + (1.0 - tau) * *d);
        }
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied().collect::<Vec<_>>())
            .collect()
    }

    /// Overwrites all parameters from a flat slice in `params()` order.
    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "parameter count");
        let mut it = flat.iter();
        for l in &mut self.layers {
            for w in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *w = *it.next().expect("length checked");
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|x| x.is_finite()))
    }
}

/// Adaptive moment estimation.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<(Array2<f64>, Array1<f64>)>,
    v: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let zeros: Vec<_> = net
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.raw_dim())))
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = self.lr;
        for (i, (gw, gb)) in grads.layers.iter().enumerate() {
            let layer = &mut net.layers[i];
            let (mw, mb) = &mut self.m[i];
            let (vw, vb) = &mut self.v[i];
            update(&mut layer.weight, gw, mw, vw, lr, b1, b2, c1, c2, eps);
            update(&mut layer.bias, gb, mb, vb, lr, b1, b2, c1, c2, eps);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update<D: ndarray::Dimension>(
    param: &mut ndarray::Array<f64, D>,
    grad: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    lr: f64,
    b1: f64,
    b2: f64,
    c1: f64,
    c2: f64,
    eps: f64,
) {
    ndarray::Zip::from(param)
        .and(grad)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        });
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mse(net: &Mlp, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
        let out = net.forward(x.view());
        (&out - y).mapv(|e| e * e).mean().unwrap()
    }

    #[test]
    fn toy_net_gradient_matches_finite_differences() {
        // 1 -> 1 -> 1: exactly four parameters
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = Mlp::new(&[1, 1, 1], &mut rng);
        net.set_params(&[0.8, 0.3, -1.2, 0.5]);
        assert_eq!(net.num_params(), 4);
        let x = array![[0.5], [1.5], [-0.2], [2.0]];
        let y = array![[0.1], [-0.4], [0.3], [0.0]];
        let (out, cache) = net.forward_cached(x.view());
        let grad_out = (&out - &y) * (2.0 / out.len() as f64);
        let (grads, _) = net.backward(&cache, &grad_out);
        let analytic = grads.flatten();
        let base = net.params();
        let h = 1e-6;
        for k in 0..base.len() {
            let mut p = base.clone();
            p[k] += h;
            net.set_params(&p);
            let up = mse(&net, &x, &y);
            p[k] -= 2.0 * h;
            net.set_params(&p);
            let down = mse(&net, &x, &y);
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-7);
            assert!(rel < 1e-4, "param {k}: fd {fd} analytic {}", analytic[k]);
        }
    }

    #[test]
    fn soft_update_with_unit_tau_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let online = Mlp::new(&[3, 8, 2], &mut rng);
        let mut target = Mlp::new(&[3, 8, 2], &mut rng);
        assert_ne!(online, target);
        target.soft_update(&online, 1.0);
        assert_eq!(online, target);
    }

    #[test]
    fn adam_fits_a_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::new(&[1, 16, 1], &mut rng);
        let mut opt = Adam::new(&net, 1e-2);
        let x = Array2::from_shape_fn((32, 1), |(i, _)| i as f64 / 16.0 - 1.0);
        let y = x.mapv(|v| 0.5 * v + 0.2);
        for _ in 0..2000 {
            let (out, cache) = net.forward_cached(x.view());
            let g = (&out - &y) * (2.0 / out.len() as f64);
            let (grads, _) = net.backward(&cache, &g);
            opt.step(&mut net, &grads);
        }
        assert!(mse(&net, &x, &y) < 1e-4);
    }
}
