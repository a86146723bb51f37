//! Conditional noise predictor: a stack of affine layers with SiLU
//! activations over `[x_t, normalized gains, time embedding]`.
//!
//! Forward and backward passes are written out by hand over row-major
//! batches so the gradients can be checked against finite differences.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::schedule::write_time_embedding;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    /// Number of nodes: width of the sample, the condition and the output.
    pub n: usize,
    pub hidden: Vec<usize>,
    pub time_dim: usize,
}

impl DenoiserConfig {
    pub fn input_width(&self) -> usize {
        2 * self.n + self.time_dim
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_width()];
        w.extend(&self.hidden);
        w.push(self.n);
        w
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Shape("denoiser needs n >= 1".into()));
        }
        if !self.time_dim.is_multiple_of(2) {
            return Err(Error::Shape(format!("time embedding width {} is odd", self.time_dim)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Shape("hidden layers must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `(fan_in, fan_out)`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Parameters of the noise predictor. Also used as the container for
/// gradients and optimizer moments, which share its shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    pub config: DenoiserConfig,
    pub layers: Vec<Layer>,
}

fn silu(z: f64) -> f64 {
    z / (1.0 + (-z).exp())
}

fn silu_grad(z: f64) -> f64 {
    let s = 1.0 / (1.0 + (-z).exp());
    s * (1.0 + z * (1.0 - s))
}

/// Activations kept from a forward pass for the backward pass.
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
}

impl Denoiser {
    pub fn zeros(config: DenoiserConfig) -> Self {
        let widths = config.widths();
        let layers = widths
            .windows(2)
            .map(|w| Layer { w: Array2::zeros((w[0], w[1])), b: Array1::zeros(w[1]) })
            .collect();
        Denoiser { config, layers }
    }

    /// He-normal hidden layers; the output layer starts at zero so an
    /// untrained model predicts no noise.
    pub fn init<R: Rng + ?Sized>(config: DenoiserConfig, rng: &mut R) -> Self {
        let mut d = Self::zeros(config);
        let last = d.layers.len() - 1;
        for layer in &mut d.layers[..last] {
            let fan_in = layer.w.nrows() as f64;
            let dist = Normal::new(0.0, (2.0 / fan_in).sqrt()).unwrap();
            layer.w.mapv_inplace(|_| dist.sample(rng));
        }
        d
    }

    /// Same as [`Denoiser::init`] but with a random output layer too, for
    /// tests that need every parameter to matter.
    pub fn init_dense<R: Rng + ?Sized>(config: DenoiserConfig, rng: &mut R) -> Self {
        let mut d = Self::zeros(config);
        for layer in &mut d.layers {
            let fan_in = layer.w.nrows() as f64;
            let dist = Normal::new(0.0, (1.0 / fan_in).sqrt()).unwrap();
            layer.w.mapv_inplace(|_| dist.sample(rng));
            layer.b.mapv_inplace(|_| 0.1 * dist.sample(rng));
        }
        d
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config.clone())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Parameter tensors as flat slices, weights then bias per layer.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.w.as_slice().expect("standard layout"), l.b.as_slice().expect("standard layout")])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                let Layer { w, b } = l;
                [w.as_slice_mut().expect("standard layout"), b.as_slice_mut().expect("standard layout")]
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Assemble `[x_t, cond, emb(t)]` rows.
    pub fn build_input(&self, x_t: ArrayView2<f64>, t: &[usize], cond: ArrayView2<f64>) -> Result<Array2<f64>> {
        let n = self.config.n;
        let rows = x_t.nrows();
        if x_t.ncols() != n || cond.ncols() != n || cond.nrows() != rows || t.len() != rows {
            return Err(Error::Shape(format!(
                "denoiser for n = {n} got x_t {:?}, cond {:?}, {} steps",
                x_t.dim(),
                cond.dim(),
                t.len()
            )));
        }
        let width = self.config.input_width();
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            data.extend(x_t.row(r).iter());
            data.extend(cond.row(r).iter());
            write_time_embedding(t[r] as f64, &mut data, self.config.time_dim);
        }
        Ok(Array2::from_shape_vec((rows, width), data).expect("row widths add up"))
    }

    /// Predicted noise for a batch.
    pub fn forward(&self, x_t: ArrayView2<f64>, t: &[usize], cond: ArrayView2<f64>) -> Result<Array2<f64>> {
        let input = self.build_input(x_t, t, cond)?;
        Ok(self.forward_input(input, None))
    }

    pub fn forward_cached(&self, x_t: ArrayView2<f64>, t: &[usize], cond: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        let input = self.build_input(x_t, t, cond)?;
        let mut cache = ForwardCache { inputs: Vec::new(), pre: Vec::new() };
        let out = self.forward_input(input, Some(&mut cache));
        Ok((out, cache))
    }

    fn forward_input(&self, input: Array2<f64>, mut cache: Option<&mut ForwardCache>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut a = input;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.w);
            z += &layer.b;
            if let Some(c) = cache.as_deref_mut() {
                c.inputs.push(a);
            }
            if i == last {
                return z;
            }
            let act = z.mapv(silu);
            if let Some(c) = cache.as_deref_mut() {
                c.pre.push(z);
            }
            a = act;
        }
        unreachable!("denoiser has at least one layer")
    }

    /// Gradients of a scalar loss with respect to every parameter, given
    /// its gradient with respect to the output.
    pub fn backward(&self, cache: &ForwardCache, d_out: ArrayView2<f64>) -> Denoiser {
        let mut grads = self.zeros_like();
        let mut d = d_out.to_owned();
        for i in (0..self.layers.len()).rev() {
            if i < self.layers.len() - 1 {
                let z = &cache.pre[i];
                d.zip_mut_with(z, |dv, &zv| *dv *= silu_grad(zv));
            }
            // into the row-major buffer: a fresh product may come back column-major
            general_mat_mul(1.0, &cache.inputs[i].t(), &d, 0.0, &mut grads.layers[i].w);
            grads.layers[i].b = d.sum_axis(Axis(0));
            if i > 0 {
                d = d.dot(&self.layers[i].w.t());
            }
        }
        grads
    }
}

/// Serialized form of [`Denoiser`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserData {
    pub config: DenoiserConfig,
    pub layers: Vec<LayerData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerData {
    pub fan_in: usize,
    pub fan_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl From<&Denoiser> for DenoiserData {
    fn from(d: &Denoiser) -> Self {
        DenoiserData {
            config: d.config.clone(),
            layers: d
                .layers
                .iter()
                .map(|l| LayerData {
                    fan_in: l.w.nrows(),
                    fan_out: l.w.ncols(),
                    w: l.w.iter().copied().collect(),
                    b: l.b.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<DenoiserData> for Denoiser {
    type Error = Error;

    fn try_from(d: DenoiserData) -> Result<Self> {
        d.config.validate()?;
        let expect = d.config.widths();
        if d.layers.len() + 1 != expect.len() {
            return Err(Error::Shape(format!("{} layers stored, {} expected", d.layers.len(), expect.len() - 1)));
        }
        let mut layers = Vec::with_capacity(d.layers.len());
        for (i, l) in d.layers.into_iter().enumerate() {
            if l.fan_in != expect[i] || l.fan_out != expect[i + 1] || l.b.len() != l.fan_out {
                return Err(Error::Shape(format!("layer {i} has shape {}x{}", l.fan_in, l.fan_out)));
            }
            let w = Array2::from_shape_vec((l.fan_in, l.fan_out), l.w).map_err(|e| Error::Shape(e.to_string()))?;
            layers.push(Layer { w, b: Array1::from(l.b) });
        }
        Ok(Denoiser { config: d.config, layers })
    }
}

/// Mean squared error over all entries and its gradient.
pub fn mse_with_grad(pred: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>) {
    let count = pred.len() as f64;
    let diff = pred - target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
    (loss, diff * (2.0 / count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> DenoiserConfig {
        DenoiserConfig { n: 3, hidden: vec![8, 6], time_dim: 4 }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let d = Denoiser::zeros(cfg());
        let x = Array2::from_elem((2, 3), 0.7);
        let out = d.forward(x.view(), &[3, 9], Array2::from_elem((2, 3), -1.0).view()).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Denoiser::init_dense(cfg(), &mut rng);
        let x = array![[0.1, -0.4, 0.9]];
        let g = array![[1.0, 0.0, -0.5]];
        let a = d.forward(x.view(), &[17], g.view()).unwrap();
        let b = d.forward(x.view(), &[17], g.view()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn condition_reaches_the_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = Denoiser::init_dense(cfg(), &mut rng);
        let x = array![[0.1, -0.4, 0.9]];
        let a = d.forward(x.view(), &[5], array![[1.0, 0.0, -0.5]].view()).unwrap();
        let b = d.forward(x.view(), &[5], array![[1.0, 0.3, -0.5]].view()).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let d = Denoiser::zeros(cfg());
        let x = Array2::zeros((1, 2));
        assert!(matches!(d.forward(x.view(), &[1], Array2::zeros((1, 3)).view()), Err(Error::Shape(_))));
        assert!(matches!(d.forward(Array2::zeros((1, 3)).view(), &[1, 2], Array2::zeros((1, 3)).view()), Err(Error::Shape(_))));
    }

    #[test]
    fn gradients_are_row_major_for_any_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = Denoiser::init_dense(DenoiserConfig { n: 1, hidden: vec![64, 64], time_dim: 16 }, &mut rng);
        for rows in [1, 2, 32] {
            let x = Array2::from_elem((rows, 1), 0.3);
            let t: Vec<usize> = (1..=rows).collect();
            let (out, cache) = d.forward_cached(x.view(), &t, x.view()).unwrap();
            let g = d.backward(&cache, out.view());
            assert_eq!(g.tensors().len(), 6);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Denoiser::init_dense(cfg(), &mut rng);
        let x = array![[0.1, -0.4, 0.9], [0.0, 0.2, 0.3]];
        let g = array![[1.0, 0.0, -0.5], [0.2, 0.1, 0.0]];
        let (pred, cache) = d.forward_cached(x.view(), &[4, 8], g.view()).unwrap();
        let (loss, d_out) = mse_with_grad(&pred, &pred.clone());
        assert_eq!(loss, 0.0);
        let grads = d.backward(&cache, d_out.view());
        assert!(grads.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn serialization_roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = Denoiser::init_dense(cfg(), &mut rng);
        let back = Denoiser::try_from(DenoiserData::from(&d)).unwrap();
        assert_eq!(back, d);
        let mut bad = DenoiserData::from(&d);
        bad.layers[0].fan_in += 1;
        assert!(Denoiser::try_from(bad).is_err());
    }
}
