//! Training objectives: InfoNCE, KoLeo differential-entropy regularization,
//! the mix-aware InfoNCE variant, and their weighted combination.
//!
//! Every loss returns its value together with the analytic gradient with
//! respect to the (already L2-normalized) descriptor batch. Gradients are
//! ambient-space gradients of the written formulas; composing through an
//! encoder's normalization layer is done with [`project_gradient_to_sphere`].
//!
//! All softmax denominators are stabilized by max subtraction, and pairwise
//! distances are computed as `sqrt(max(0, |a|^2 - 2 a.b + |b|^2))`.

mod batch;

pub use batch::{BatchStructure, MixMode, MixWeight};

use ndarray::Array2;

use crate::descriptor::{Matrix, Vector};
use crate::error::{Error, Result};

/// Coincidence threshold below which the entropy term is singular.
const SINGULARITY_EPS: f64 = 1e-12;
/// Unit-norm validation tolerance for descriptor batches.
const UNIT_TOL: f64 = 1e-6;

/// Loss hyperparameters: softmax temperature and entropy weight.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossConfig {
    pub tau: f64,
    pub lambda: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            tau: 0.05,
            lambda: 30.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("temperature must be > 0, got {}", self.tau),
            });
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("entropy weight must be >= 0, got {}", self.lambda),
            });
        }
        Ok(())
    }
}

/// A loss value and its gradient with respect to the descriptor batch.
#[derive(Debug, Clone)]
pub struct LossResult {
    pub value: f64,
    /// Same shape as the descriptor batch (views x dim).
    pub grad: Matrix,
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("temperature must be > 0, got {tau}"),
        });
    }
    Ok(())
}

fn check_batch(z: &Matrix, batch: &BatchStructure) -> Result<()> {
    if z.nrows() != batch.size() {
        return Err(Error::LengthMismatch {
            what: "batch structure",
            expected: z.nrows(),
            actual: batch.size(),
        });
    }
    Ok(())
}

fn check_unit_rows(z: &Matrix) -> Result<()> {
    for (row, r) in z.rows().into_iter().enumerate() {
        let norm = r.dot(&r).sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotNormalized { row, norm });
        }
    }
    Ok(())
}

/// Raw pairwise dot products z_i . z_j.
fn gram(z: &Matrix) -> Matrix {
    z.dot(&z.t())
}

/// InfoNCE over a repeated-augmentation batch (exactly one positive per
/// view): the mean over ordered positive pairs (i, j) of
/// `-log( exp(s_ij) / sum_{k != i} exp(s_ik) )` with s = cosine / tau.
pub fn infonce(z: &Matrix, batch: &BatchStructure, tau: f64) -> Result<LossResult> {
    check_unit_rows(z)?;
    infonce_impl(z, batch, tau, true)
}

/// InfoNCE objective value at an arbitrary point (no unit-norm validation);
/// the independent finite-difference checks differentiate this.
pub fn infonce_value(z: &Matrix, batch: &BatchStructure, tau: f64) -> Result<f64> {
    Ok(infonce_impl(z, batch, tau, false)?.value)
}

fn infonce_impl(z: &Matrix, batch: &BatchStructure, tau: f64, want_grad: bool) -> Result<LossResult> {
    check_tau(tau)?;
    check_batch(z, batch)?;
    if !batch.single_positive() {
        return Err(Error::InvalidBatch(
            "infonce requires exactly one positive per view; use infonce_mix for mixed batches"
                .to_string(),
        ));
    }
    let m = batch.size();
    let s = gram(z) / tau;
    let pair_count = batch.pair_count() as f64;

    let mut value = 0.0;
    // A[i][k] = dL/ds_ik; gradient is (A + A^T) Z / tau
    let mut coeff = Array2::<f64>::zeros((m, m));

    for i in 0..m {
        let j = batch.matches(i)[0];
        let row = s.row(i);
        let mut max = f64::NEG_INFINITY;
        for k in 0..m {
            if k != i {
                max = max.max(row[k]);
            }
        }
        let mut denom = 0.0;
        for k in 0..m {
            if k != i {
                denom += (row[k] - max).exp();
            }
        }
        value += (-(row[j] - max) + denom.ln()) / pair_count;
        if want_grad {
            for k in 0..m {
                if k != i {
                    let p = (row[k] - max).exp() / denom;
                    let delta = if k == j { 1.0 } else { 0.0 };
                    coeff[[i, k]] += (p - delta) / pair_count;
                }
            }
        }
    }

    let grad = if want_grad {
        (&coeff + &coeff.t()).dot(z) / tau
    } else {
        Array2::zeros((0, 0))
    };
    Ok(LossResult { value, grad })
}

/// Mix-aware InfoNCE: per-view mean over positives j of
/// `-log( exp(s_ij) / (exp(s_ij) + sum_{k not in self-set} exp(s_ik)) )`,
/// averaged over views so each source image contributes equally.
///
/// Unmixed batches (every |P_i| = 1) reduce to plain InfoNCE exactly and are
/// routed through it.
pub fn infonce_mix(z: &Matrix, batch: &BatchStructure, tau: f64) -> Result<LossResult> {
    check_unit_rows(z)?;
    infonce_mix_impl(z, batch, tau, true)
}

/// Mix-aware InfoNCE objective value, without unit-norm validation.
pub fn infonce_mix_value(z: &Matrix, batch: &BatchStructure, tau: f64) -> Result<f64> {
    Ok(infonce_mix_impl(z, batch, tau, false)?.value)
}

fn infonce_mix_impl(
    z: &Matrix,
    batch: &BatchStructure,
    tau: f64,
    want_grad: bool,
) -> Result<LossResult> {
    if batch.single_positive() {
        return infonce_impl(z, batch, tau, want_grad);
    }
    check_tau(tau)?;
    check_batch(z, batch)?;

    let m = batch.size();
    let s = gram(z) / tau;
    let views = m as f64;

    let mut value = 0.0;
    let mut coeff = Array2::<f64>::zeros((m, m));

    for i in 0..m {
        let positives = batch.matches(i);
        if positives.is_empty() {
            continue;
        }
        let row = s.row(i);
        // negatives: everything outside the self-inclusive set
        let negatives: Vec<usize> = (0..m).filter(|&k| !batch.in_self_set(i, k)).collect();
        let weight = 1.0 / (views * positives.len() as f64);
        for &j in positives {
            let mut max = row[j];
            for &k in &negatives {
                max = max.max(row[k]);
            }
            let pos_term = (row[j] - max).exp();
            let mut denom = pos_term;
            for &k in &negatives {
                denom += (row[k] - max).exp();
            }
            value += weight * (-(row[j] - max) + denom.ln());
            if want_grad {
                coeff[[i, j]] += weight * (pos_term / denom - 1.0);
                for &k in &negatives {
                    coeff[[i, k]] += weight * (row[k] - max).exp() / denom;
                }
            }
        }
    }

    let grad = if want_grad {
        (&coeff + &coeff.t()).dot(z) / tau
    } else {
        Array2::zeros((0, 0))
    };
    Ok(LossResult { value, grad })
}

/// For each view, the nearest view outside its self-inclusive set.
/// Ties break to the lowest index. Errors if a view has no non-match or if
/// the nearest non-match coincides with the view.
fn nearest_non_matches(z: &Matrix, batch: &BatchStructure) -> Result<Vec<(usize, f64)>> {
    let m = batch.size();
    let g = gram(z);
    let norms: Vec<f64> = (0..m).map(|i| g[[i, i]]).collect();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..m {
            if batch.in_self_set(i, j) {
                continue;
            }
            let d2 = (norms[i] - 2.0 * g[[i, j]] + norms[j]).max(0.0);
            let d = d2.sqrt();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, d) = best.ok_or_else(|| {
            Error::InvalidBatch(format!("view {i} has no non-matching view to regularize against"))
        })?;
        if d < SINGULARITY_EPS {
            return Err(Error::EntropySingularity { i, j, distance: d });
        }
        out.push((j, d));
    }
    Ok(out)
}

/// KoLeo differential-entropy regularizer:
/// `-(1/M) sum_i log( min_{j not in self-set} |z_i - z_j| )` over all M
/// views. Pushes each descriptor away from its nearest non-matching
/// neighbor; the per-view gradient flows to the view and to that neighbor.
pub fn koleo(z: &Matrix, batch: &BatchStructure) -> Result<LossResult> {
    check_unit_rows(z)?;
    koleo_impl(z, batch, true)
}

/// KoLeo objective value, without unit-norm validation.
pub fn koleo_value(z: &Matrix, batch: &BatchStructure) -> Result<f64> {
    Ok(koleo_impl(z, batch, false)?.value)
}

fn koleo_impl(z: &Matrix, batch: &BatchStructure, want_grad: bool) -> Result<LossResult> {
    check_batch(z, batch)?;
    let m = batch.size();
    let nearest = nearest_non_matches(z, batch)?;
    let scale = 1.0 / m as f64;

    let mut value = 0.0;
    let mut grad = if want_grad {
        Array2::zeros(z.raw_dim())
    } else {
        Array2::zeros((0, 0))
    };
    for (i, &(j, d)) in nearest.iter().enumerate() {
        value -= scale * d.ln();
        if want_grad {
            let coef = scale / (d * d);
            for c in 0..z.ncols() {
                let diff = z[[i, c]] - z[[j, c]];
                grad[[i, c]] -= coef * diff;
                grad[[j, c]] += coef * diff;
            }
        }
    }
    Ok(LossResult { value, grad })
}

/// Combined objective: mix-aware InfoNCE plus `lambda` times the KoLeo term.
pub fn combined_loss(z: &Matrix, batch: &BatchStructure, config: &LossConfig) -> Result<LossResult> {
    config.validate()?;
    check_unit_rows(z)?;
    let contrastive = infonce_mix_impl(z, batch, config.tau, true)?;
    let entropy = koleo_impl(z, batch, true)?;
    Ok(LossResult {
        value: contrastive.value + config.lambda * entropy.value,
        grad: contrastive.grad + entropy.grad * config.lambda,
    })
}

/// Combined objective value, without unit-norm validation.
pub fn combined_value(z: &Matrix, batch: &BatchStructure, config: &LossConfig) -> Result<f64> {
    config.validate()?;
    let contrastive = infonce_mix_impl(z, batch, config.tau, false)?;
    let entropy = koleo_impl(z, batch, false)?;
    Ok(contrastive.value + config.lambda * entropy.value)
}

/// Tangent-space projection `(I - z z^T) g`: removes the radial component of
/// a gradient at a point on the unit sphere. Composing an encoder through
/// L2 normalization additionally divides by the pre-normalization norm.
pub fn project_gradient_to_sphere(z: &Vector, g: &Vector) -> Vector {
    let radial = z.dot(g);
    g - &(z * radial)
}
