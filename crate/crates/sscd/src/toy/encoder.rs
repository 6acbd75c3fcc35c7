//! A small encoder: linear (or one-hidden-layer MLP) projection followed by
//! L2 normalization, with exact analytic backprop.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::descriptor::{Matrix, Vector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum EncoderKind {
    Linear,
    Mlp { hidden: usize },
}

/// Weights are stored (out x in); forward is `x W^T + b` per layer with a
/// ReLU between layers for the MLP, then row-wise L2 normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    w1: Matrix,
    b1: Vector,
    w2: Option<Matrix>,
    b2: Option<Vector>,
}

/// Intermediate activations needed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    pre1: Matrix,
    hidden: Option<Matrix>,
    norms: Vector,
    z: Matrix,
}

impl ForwardCache {
    pub fn descriptors(&self) -> &Matrix {
        &self.z
    }
}

/// Parameter gradients, same shapes as the encoder weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Matrix,
    pub b1: Vector,
    pub w2: Option<Matrix>,
    pub b2: Option<Vector>,
}

fn xavier(rows: usize, cols: usize, rng: &mut ChaCha12Rng) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
}

impl Encoder {
    pub fn new(kind: EncoderKind, input_dim: usize, descriptor_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        match kind {
            EncoderKind::Linear => Self {
                w1: xavier(descriptor_dim, input_dim, &mut rng),
                b1: Vector::zeros(descriptor_dim),
                w2: None,
                b2: None,
            },
            EncoderKind::Mlp { hidden } => Self {
                w1: xavier(hidden, input_dim, &mut rng),
                b1: Vector::zeros(hidden),
                w2: Some(xavier(descriptor_dim, hidden, &mut rng)),
                b2: Some(Vector::zeros(descriptor_dim)),
            },
        }
    }

    /// Build directly from weights (out x in) and biases.
    pub fn from_weights(
        w1: Matrix,
        b1: Vector,
        second: Option<(Matrix, Vector)>,
    ) -> Result<Self> {
        if b1.len() != w1.nrows() {
            return Err(Error::LengthMismatch {
                what: "b1",
                expected: w1.nrows(),
                actual: b1.len(),
            });
        }
        if let Some((w2, b2)) = &second {
            if w2.ncols() != w1.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: w1.nrows(),
                    actual: w2.ncols(),
                });
            }
            if b2.len() != w2.nrows() {
                return Err(Error::LengthMismatch {
                    what: "b2",
                    expected: w2.nrows(),
                    actual: b2.len(),
                });
            }
        }
        let (w2, b2) = match second {
            Some((w, b)) => (Some(w), Some(b)),
            None => (None, None),
        };
        Ok(Self { w1, b1, w2, b2 })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn descriptor_dim(&self) -> usize {
        self.w2.as_ref().map_or(self.w1.nrows(), |w| w.nrows())
    }

    pub fn kind(&self) -> EncoderKind {
        match self.w2 {
            None => EncoderKind::Linear,
            Some(_) => EncoderKind::Mlp {
                hidden: self.w1.nrows(),
            },
        }
    }

    /// Encode a batch (rows = inputs) into unit descriptors.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        let pre1 = x.dot(&self.w1.t()) + &self.b1.view().insert_axis(Axis(0));
        let (hidden, pre_norm) = match (&self.w2, &self.b2) {
            (Some(w2), Some(b2)) => {
                let h = pre1.mapv(|v| v.max(0.0));
                let y = h.dot(&w2.t()) + &b2.view().insert_axis(Axis(0));
                (Some(h), y)
            }
            _ => (None, pre1.clone()),
        };
        let mut norms = Vector::zeros(pre_norm.nrows());
        let mut z = pre_norm.clone();
        for (i, mut row) in z.rows_mut().into_iter().enumerate() {
            let n = row.dot(&row).sqrt();
            if !(n > 0.0) {
                return Err(Error::ZeroVector);
            }
            norms[i] = n;
            row.mapv_inplace(|v| v / n);
        }
        let cache = ForwardCache {
            input: x.clone(),
            pre1,
            hidden,
            norms,
            z: z.clone(),
        };
        Ok((z, cache))
    }

    /// Exact chain rule from a descriptor gradient back to the parameters:
    /// tangent projection and 1/norm scaling through the normalization, ReLU
    /// mask, then the linear layers.
    pub fn backward(&self, cache: &ForwardCache, dz: &Matrix) -> Gradients {
        let radial = (dz * &cache.z).sum_axis(Axis(1));
        let mut dy = dz - &(&cache.z * &radial.insert_axis(Axis(1)));
        for (i, mut row) in dy.rows_mut().into_iter().enumerate() {
            let n = cache.norms[i];
            row.mapv_inplace(|v| v / n);
        }

        match (&self.w2, cache.hidden.as_ref()) {
            (Some(w2), Some(h)) => {
                let dw2 = dy.t().dot(h);
                let db2 = dy.sum_axis(Axis(0));
                let dh = dy.dot(w2);
                let dpre1 = &dh * &cache.pre1.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                let dw1 = dpre1.t().dot(&cache.input);
                let db1 = dpre1.sum_axis(Axis(0));
                Gradients {
                    w1: dw1,
                    b1: db1,
                    w2: Some(dw2),
                    b2: Some(db2),
                }
            }
            _ => {
                let dw1 = dy.t().dot(&cache.input);
                let db1 = dy.sum_axis(Axis(0));
                Gradients {
                    w1: dw1,
                    b1: db1,
                    w2: None,
                    b2: None,
                }
            }
        }
    }

    /// One plain gradient-descent step.
    pub fn apply_step(&mut self, grads: &Gradients, lr: f64) {
        self.w1 = &self.w1 - &(&grads.w1 * lr);
        self.b1 = &self.b1 - &(&grads.b1 * lr);
        if let (Some(w2), Some(gw2)) = (self.w2.as_mut(), grads.w2.as_ref()) {
            *w2 = &*w2 - &(gw2 * lr);
        }
        if let (Some(b2), Some(gb2)) = (self.b2.as_mut(), grads.b2.as_ref()) {
            *b2 = &*b2 - &(gb2 * lr);
        }
    }

    /// Flatten all parameters (w1 rows, b1, w2 rows, b2).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.w1.iter().copied().collect();
        out.extend(self.b1.iter().copied());
        if let Some(w2) = &self.w2 {
            out.extend(w2.iter().copied());
        }
        if let Some(b2) = &self.b2 {
            out.extend(b2.iter().copied());
        }
        out
    }

    /// Rebuild parameters from a flat slice in `to_flat` order.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.to_flat().len();
        if flat.len() != expected {
            return Err(Error::LengthMismatch {
                what: "parameters",
                expected,
                actual: flat.len(),
            });
        }
        let mut pos = 0;
        for v in self.w1.iter_mut() {
            *v = flat[pos];
            pos += 1;
        }
        for v in self.b1.iter_mut() {
            *v = flat[pos];
            pos += 1;
        }
        if let Some(w2) = self.w2.as_mut() {
            for v in w2.iter_mut() {
                *v = flat[pos];
                pos += 1;
            }
        }
        if let Some(b2) = self.b2.as_mut() {
            for v in b2.iter_mut() {
                *v = flat[pos];
                pos += 1;
            }
        }
        Ok(())
    }

    pub fn grads_to_flat(&self, grads: &Gradients) -> Vec<f64> {
        let mut out: Vec<f64> = grads.w1.iter().copied().collect();
        out.extend(grads.b1.iter().copied());
        if let Some(w2) = &grads.w2 {
            out.extend(w2.iter().copied());
        }
        if let Some(b2) = &grads.b2 {
            out.extend(b2.iter().copied());
        }
        out
    }
}
