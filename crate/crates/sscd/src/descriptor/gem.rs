//! Generalized mean (GeM) pooling over activation grids.

use ndarray::Array3;

use crate::descriptor::Vector;
use crate::error::{Error, Result};

/// Pooling exponent: a finite p >= 1 or the max-pooling limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GemPower {
    P(f64),
    Max,
}

/// Non-negative activation map of shape (height, width, channels).
///
/// Values must be >= 0 (post-nonlinearity convention), which keeps the
/// generalized mean real-valued for arbitrary p.
#[derive(Debug, Clone)]
pub struct ActivationGrid {
    values: Array3<f64>,
}

impl ActivationGrid {
    pub fn new(values: Array3<f64>) -> Result<Self> {
        let (h, w, c) = values.dim();
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: format!("empty grid ({h}x{w}x{c})"),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "activation grid".to_string(),
            });
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "activation values must be non-negative".to_string(),
            });
        }
        Ok(Self { values })
    }

    pub fn height(&self) -> usize {
        self.values.dim().0
    }

    pub fn width(&self) -> usize {
        self.values.dim().1
    }

    pub fn channels(&self) -> usize {
        self.values.dim().2
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }
}

/// Pool a grid to one value per channel: `(mean of v^p)^(1/p)`.
///
/// p = 1 reduces to average pooling exactly; `GemPower::Max` is the
/// max-pooling limit. Retrieval models commonly fix p = 3.
pub fn gem_pool(grid: &ActivationGrid, p: GemPower) -> Result<Vector> {
    match p {
        GemPower::P(p) if !p.is_finite() => Err(Error::InvalidParameter {
            name: "p",
            reason: "exponent must be finite (use GemPower::Max for max pooling)".to_string(),
        }),
        GemPower::P(p) if p < 1.0 => Err(Error::InvalidParameter {
            name: "p",
            reason: format!("exponent must be >= 1, got {p}"),
        }),
        GemPower::P(p) => {
            let (h, w, c) = grid.values.dim();
            let area = (h * w) as f64;
            let mut out = Vector::zeros(c);
            for ch in 0..c {
                let channel = grid.values.slice(ndarray::s![.., .., ch]);
                if p == 1.0 {
                    // exact mean, no powf round-trip
                    out[ch] = channel.sum() / area;
                } else {
                    let sum: f64 = channel.iter().map(|&v| v.powf(p)).sum();
                    out[ch] = (sum / area).powf(1.0 / p);
                }
            }
            Ok(out)
        }
        GemPower::Max => {
            let (_, _, c) = grid.values.dim();
            let mut out = Vector::zeros(c);
            for ch in 0..c {
                out[ch] = grid
                    .values
                    .slice(ndarray::s![.., .., ch])
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
            }
            Ok(out)
        }
    }
}
