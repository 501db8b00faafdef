//! Dense ReLU network with a linear scalar head, batched through ndarray.

use std::fmt::Debug;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, LinalgScalar, ScalarOperand};
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub trait Real:
    LinalgScalar + ScalarOperand + Float + std::ops::AddAssign + Debug + Send + Sync
{
}
impl<T> Real for T where
    T: LinalgScalar + ScalarOperand + Float + std::ops::AddAssign + Debug + Send + Sync
{
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<F> {
    /// `in x out` weight matrices.
    weights: Vec<Array2<F>>,
    biases: Vec<Array1<F>>,
}

#[derive(Clone, Debug)]
pub struct MlpGradients<F> {
    pub weights: Vec<Array2<F>>,
    pub biases: Vec<Array1<F>>,
}

impl<F: Real> Mlp<F> {
    /// He-initialized network; the output bias starts at `out_bias`.
    pub fn new(sizes: &[usize], out_bias: F, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2 && *sizes.last().unwrap() == 1);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let std = (2.0 / w[0] as f64).sqrt();
            let m = Array2::from_shape_fn((w[0], w[1]), |_| {
                let z: f64 = StandardNormal.sample(rng);
                F::from(z * std).unwrap()
            });
            weights.push(m);
            biases.push(Array1::zeros(w[1]));
        }
        *biases.last_mut().unwrap() = Array1::from_elem(1, out_bias);
        Self { weights, biases }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let weights = sizes
            .windows(2)
            .map(|w| Array2::zeros((w[0], w[1])))
            .collect();
        let biases = sizes.windows(2).map(|w| Array1::zeros(w[1])).collect();
        Self { weights, biases }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Activations of every layer; the first entry is the input, the last the
    /// `batch x 1` output.
    fn activations(&self, x: ArrayView2<F>) -> Vec<Array2<F>> {
        let last = self.weights.len() - 1;
        let mut acts = vec![x.to_owned()];
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(w);
            z += b;
            if l < last {
                z.mapv_inplace(|v| v.max(F::zero()));
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, x: ArrayView2<F>) -> Array1<F> {
        let out = self.activations(x).pop().unwrap();
        out.index_axis_move(Axis(1), 0)
    }

    pub fn forward_one(&self, x: ArrayView1<F>) -> F {
        let row = x.insert_axis(Axis(0));
        self.forward(row)[0]
    }

    /// Mean absolute percentage error of `scale * output` against `targets`
    /// and its gradient. The kink at zero error takes subgradient 0.
    pub fn mape_loss_and_grad(
        &self,
        x: ArrayView2<F>,
        targets: ArrayView1<F>,
        scale: F,
    ) -> (F, MlpGradients<F>) {
        let acts = self.activations(x);
        let out = acts.last().unwrap();
        let n = F::from(x.nrows()).unwrap();
        let mut loss = F::zero();
        let mut delta = Array2::zeros(out.raw_dim());
        for ((d, &y), &m) in delta.iter_mut().zip(out.iter()).zip(targets.iter()) {
            let err = scale * y - m;
            loss = loss + err.abs() / m;
            let sign = if err > F::zero() {
                F::one()
            } else if err < F::zero() {
                -F::one()
            } else {
                F::zero()
            };
            *d = sign * scale / (m * n);
        }
        (loss / n, self.backward(&acts, delta))
    }

    fn backward(&self, acts: &[Array2<F>], mut delta: Array2<F>) -> MlpGradients<F> {
        let layers = self.weights.len();
        let mut gw = Vec::with_capacity(layers);
        let mut gb = Vec::with_capacity(layers);
        for l in (0..layers).rev() {
            gw.push(acts[l].t().dot(&delta));
            gb.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                let mut prev = delta.dot(&self.weights[l].t());
                prev.zip_mut_with(&acts[l], |d, &a| {
                    if a <= F::zero() {
                        *d = F::zero();
                    }
                });
                delta = prev;
            }
        }
        gw.reverse();
        gb.reverse();
        MlpGradients {
            weights: gw,
            biases: gb,
        }
    }

    /// Flat parameter access for finite-difference checks.
    pub fn param_mut(&mut self, mut k: usize) -> &mut F {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            if k < w.len() {
                return w.as_slice_mut().unwrap().get_mut(k).unwrap();
            }
            k -= w.len();
            if k < b.len() {
                return &mut b[k];
            }
            k -= b.len();
        }
        panic!("parameter index out of range")
    }

    pub fn layers(&self) -> Vec<LayerData<F>>
    where
        F: Copy,
    {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| LayerData {
                inputs: w.nrows(),
                outputs: w.ncols(),
                weights: w.iter().copied().collect(),
                bias: b.to_vec(),
            })
            .collect()
    }

    pub fn from_layers(layers: Vec<LayerData<F>>) -> crate::Result<Self> {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut prev: Option<usize> = None;
        for l in layers {
            if prev.is_some_and(|p| p != l.inputs) || l.bias.len() != l.outputs {
                return Err(crate::Error::invalid("inconsistent layer shapes"));
            }
            prev = Some(l.outputs);
            let w = Array2::from_shape_vec((l.inputs, l.outputs), l.weights)
                .map_err(|e| crate::Error::invalid(e.to_string()))?;
            weights.push(w);
            biases.push(Array1::from_vec(l.bias));
        }
        if weights.is_empty() || prev != Some(1) {
            return Err(crate::Error::invalid("network must end in one output"));
        }
        Ok(Self { weights, biases })
    }
}

impl<F: Real> MlpGradients<F> {
    pub fn get(&self, mut k: usize) -> F {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            if k < w.len() {
                return w.as_slice().unwrap()[k];
            }
            k -= w.len();
            if k < b.len() {
                return b[k];
            }
            k -= b.len();
        }
        panic!("parameter index out of range")
    }
}

/// Row-major serialized layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerData<F> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<F>,
    pub bias: Vec<F>,
}

/// Adaptive-moment optimizer state for one network.
#[derive(Clone, Debug)]
pub struct Adam<F> {
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
    step: i32,
    m: MlpGradients<F>,
    v: MlpGradients<F>,
}

impl<F: Real> Adam<F> {
    pub fn new(net: &Mlp<F>, lr: F) -> Self {
        let zeros = || MlpGradients {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        };
        Self {
            lr,
            beta1: F::from(0.9).unwrap(),
            beta2: F::from(0.999).unwrap(),
            eps: F::from(1e-8).unwrap(),
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn set_lr(&mut self, lr: F) {
        self.lr = lr;
    }

    pub fn step(&mut self, net: &mut Mlp<F>, grads: &MlpGradients<F>) {
        self.step += 1;
        let one = F::one();
        let c1 = one - self.beta1.powi(self.step);
        let c2 = one - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let update = |p: &mut F, g: F, m: &mut F, v: &mut F| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p = *p - lr * mh / (vh.sqrt() + eps);
        };
        for l in 0..net.weights.len() {
            ndarray::Zip::from(&mut net.weights[l])
                .and(&grads.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut net.biases[l])
                .and(&grads.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::<f64>::zeros(&[3, 5, 1]);
        let x = Array2::from_elem((4, 3), 1.5);
        assert!(net.forward(x.view()).iter().all(|&y| y == 0.0));
    }

    #[test]
    fn serialization_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::<f32>::new(&[3, 4, 1], 1.0, &mut rng);
        let back = Mlp::from_layers(net.layers()).unwrap();
        assert_eq!(net, back);
        assert!(Mlp::<f32>::from_layers(Vec::new()).is_err());
    }

    #[test]
    fn adam_fits_a_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::<f64>::new(&[1, 16, 1], 1.0, &mut rng);
        let mut opt = Adam::new(&net, 1e-2);
        let x = Array2::from_shape_fn((32, 1), |(i, _)| i as f64 / 32.0);
        let y = x.column(0).mapv(|v| 1.0 + 2.0 * v);
        let mut last = f64::MAX;
        for _ in 0..2000 {
            let (loss, g) = net.mape_loss_and_grad(x.view(), y.view(), 1.0);
            opt.step(&mut net, &g);
            last = loss;
        }
        assert!(last < 0.02, "loss {last}");
    }
}
