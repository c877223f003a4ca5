//! Fully connected stack with a forward cache and manual backpropagation.
//!
//! Both adversarial networks are instances of this type; they differ only
//! in layer widths and activations. Parameters flatten to one vector in a
//! fixed order (per layer: weights row-major, then biases), which is what
//! the optimizer and the score-only gradient estimator operate on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{Activation, DenseMatrix, Scalar, SplitMix64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer<S: Scalar> {
    /// Weight block, `[fan_in x fan_out]`.
    pub w: DenseMatrix<S>,
    pub b: Vec<S>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<S: Scalar> {
    pub layers: Vec<Layer<S>>,
}

/// Per-layer activations kept from a forward pass; consumed by backward.
#[derive(Debug, Clone)]
pub struct MlpCache<S: Scalar> {
    input: DenseMatrix<S>,
    pre: Vec<DenseMatrix<S>>,
    post: Vec<DenseMatrix<S>>,
}

impl<S: Scalar> MlpCache<S> {
    pub fn output(&self) -> &DenseMatrix<S> {
        self.post.last().expect("networks have at least one layer")
    }
}

/// Loss gradients from one backward pass, flattened in parameter order,
/// plus the gradient with respect to the network input.
#[derive(Debug, Clone)]
pub struct MlpGradients<S: Scalar> {
    pub flat: Vec<S>,
    pub d_input: DenseMatrix<S>,
}

impl<S: Scalar> Mlp<S> {
    /// Builds the stack with uniform Xavier limits per layer, drawing from
    /// `rng` in layer order.
    pub fn init(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Config(format!(
                "a network needs an input and an output width, got {widths:?}"
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Config(format!(
                "layer widths must be positive, got {widths:?}"
            )));
        }
        hidden.validate()?;
        output.validate()?;

        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (l, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = S::from_f64_lossy((6.0 / (fan_in + fan_out) as f64).sqrt());
            let w = rng.sample_uniform(fan_in, fan_out, -limit, limit);
            let activation = if l + 2 == widths.len() { output } else { hidden };
            layers.push(Layer {
                w,
                b: vec![S::zero(); fan_out],
                activation,
            });
        }
        Ok(Mlp { layers })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].w.rows()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").w.cols()
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.rows() * l.w.cols() + l.b.len())
            .sum()
    }

    /// Copies all parameters out in the flat order.
    pub fn params(&self) -> Vec<S> {
        let mut flat = Vec::with_capacity(self.n_params());
        for layer in &self.layers {
            flat.extend_from_slice(layer.w.data());
            flat.extend_from_slice(&layer.b);
        }
        flat
    }

    /// Overwrites all parameters from the flat order.
    pub fn set_params(&mut self, flat: &[S]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::shape(
                "network parameters",
                format!("{} values", self.n_params()),
                format!("{} values", flat.len()),
            ));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let w_len = layer.w.rows() * layer.w.cols();
            layer.w.data_mut().copy_from_slice(&flat[offset..offset + w_len]);
            offset += w_len;
            let b_len = layer.b.len();
            layer.b.copy_from_slice(&flat[offset..offset + b_len]);
            offset += b_len;
        }
        Ok(())
    }

    pub fn forward(&self, x: &DenseMatrix<S>) -> Result<MlpCache<S>> {
        if x.cols() != self.input_width() {
            return Err(Error::shape(
                "network input",
                format!("{} features", self.input_width()),
                format!("{}x{} batch", x.rows(), x.cols()),
            ));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for layer in &self.layers {
            let z = current.affine(&layer.w, &layer.b)?;
            current = z.map(|v| layer.activation.apply_scalar(v));
            pre.push(z);
            post.push(current.clone());
        }
        Ok(MlpCache {
            input: x.clone(),
            pre,
            post,
        })
    }

    /// Convenience forward that discards the cache.
    pub fn output(&self, x: &DenseMatrix<S>) -> Result<DenseMatrix<S>> {
        Ok(self.forward(x)?.output().clone())
    }

    /// Backpropagates `d_output` (the loss gradient at the network output,
    /// after the output activation) through the cached pass.
    pub fn backward(&self, cache: &MlpCache<S>, d_output: &DenseMatrix<S>) -> Result<MlpGradients<S>> {
        let last = self.layers.len() - 1;
        if d_output.shape() != cache.post[last].shape() {
            return Err(Error::shape(
                "backward seed",
                format!("{:?}", cache.post[last].shape()),
                format!("{:?}", d_output.shape()),
            ));
        }

        let mut layer_grads: Vec<(DenseMatrix<S>, Vec<S>)> = Vec::with_capacity(self.layers.len());
        let mut d_post = d_output.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let dz = d_post.zip_with(&cache.pre[l], |d, z| {
                d * layer.activation.derivative_scalar(z)
            })?;
            let a_prev = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            let dw = a_prev.transpose().matmul(&dz)?;
            let db = dz.column_sums();
            d_post = dz.matmul(&layer.w.transpose())?;
            layer_grads.push((dw, db));
        }
        layer_grads.reverse();

        let mut flat = Vec::with_capacity(self.n_params());
        for (dw, db) in &layer_grads {
            flat.extend_from_slice(dw.data());
            flat.extend_from_slice(db);
        }
        Ok(MlpGradients {
            flat,
            d_input: d_post,
        })
    }
}
