//! Central finite-difference verification of analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::Result;

/// Coordinates sampled when the parameter vector is large.
const SAMPLE_COORDS: usize = 256;
/// One-sided slopes disagreeing by more than this (relative) flag a
/// non-smooth point (subgradient) and exclude the coordinate.
const KINK_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinates compared against the analytic gradient.
    pub checked: usize,
    /// Coordinates skipped because the one-sided slopes disagree
    /// (tie/subgradient points).
    pub excluded: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_error < self.tolerance
    }
}

/// Compare an analytic gradient against central finite differences of
/// `value_fn` on a random subset of coordinates (all of them when the vector
/// is small).
pub fn gradient_check<F>(
    mut value_fn: F,
    params: &[f64],
    analytic: &[f64],
    step: f64,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    assert_eq!(
        params.len(),
        analytic.len(),
        "analytic gradient length must match parameters"
    );
    let coords: Vec<usize> = if params.len() <= SAMPLE_COORDS {
        (0..params.len()).collect()
    } else {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, params.len(), SAMPLE_COORDS).into_vec()
    };

    let base = value_fn(params)?;
    let mut work = params.to_vec();
    let mut max_rel_error: f64 = 0.0;
    let mut checked = 0;
    let mut excluded = 0;

    for &i in &coords {
        let orig = work[i];
        work[i] = orig + step;
        let plus = value_fn(&work)?;
        work[i] = orig - step;
        let minus = value_fn(&work)?;
        work[i] = orig;

        let forward = (plus - base) / step;
        let backward = (base - minus) / step;
        if (forward - backward).abs() > KINK_TOL * forward.abs().max(backward.abs()).max(1.0) {
            excluded += 1;
            continue;
        }
        let central = (plus - minus) / (2.0 * step);
        let rel = (analytic[i] - central).abs() / analytic[i].abs().max(central.abs()).max(1e-8);
        max_rel_error = max_rel_error.max(rel);
        checked += 1;
    }

    Ok(GradCheckReport {
        max_rel_error,
        checked,
        excluded,
        tolerance,
    })
}
