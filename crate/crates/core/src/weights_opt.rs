//! Optimal block weights.
//!
//! Substituting `v = τ·ω` turns the threshold objective into the separable
//! function `f(v) = σ + Σ_i ρ_i(α_i v_i² + (1 − α_i)φ(v_i))`. Each term is
//! strictly convex in `v_i`, so the minimizer solves the `k` scalar equations
//! `α_i v_i = (1 − α_i)·√(2/π)∫_{v_i}^∞ (x − v_i)e^{−x²/2} dx`, none of which
//! involve `ρ`. The optimal weights are the roots rescaled to unit maximum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian_kernels::{phi_prime_unchecked, phi_unchecked};
use crate::model::{PartitionModel, Weights};

/// Largest accepted equation residual.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalWeights {
    /// Per-block roots `v*_i`.
    pub raw: Vec<f64>,
    /// `raw / max(raw)`.
    pub normalized: Weights,
    pub residuals: Vec<f64>,
}

/// Left side minus right side of the weight equation; increasing in `omega`.
pub fn weight_equation_residual(alpha: f64, omega: f64) -> f64 {
    // the tail integral equals −φ'(ω)/2
    alpha * omega + 0.5 * (1.0 - alpha) * phi_prime_unchecked(omega)
}

/// Unique non-negative root of the weight equation for support fraction `alpha`.
pub fn optimal_weight_single(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} is outside (0, 1]")));
    }
    if alpha == 1.0 {
        return Ok(0.0);
    }
    let f = |w: f64| weight_equation_residual(alpha, w);
    let mut hi = 1.0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numerical(format!(
                "no bracket for the weight equation at alpha = {alpha}"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    if f(root).abs() > RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "weight equation residual {} at alpha = {alpha}",
            f(root)
        )));
    }
    Ok(root)
}

/// Optimal weights of every block, raw and max-normalized.
pub fn optimal_weights(model: &PartitionModel) -> Result<OptimalWeights> {
    let alpha = model.alpha();
    let raw = alpha
        .iter()
        .map(|&a| optimal_weight_single(a))
        .collect::<Result<Vec<_>>>()?;
    let residuals = alpha
        .iter()
        .zip(&raw)
        .map(|(&a, &w)| weight_equation_residual(a, w).abs())
        .collect();
    let normalized = Weights::new(raw.clone())?.normalized()?;
    Ok(OptimalWeights {
        raw,
        normalized,
        residuals,
    })
}

/// The separable objective `f(v) = σ + Σ_i ρ_i(α_i v_i² + (1 − α_i)φ(v_i))`.
pub fn eval_weight_objective(model: &PartitionModel, v: &[f64]) -> Result<f64> {
    if v.len() != model.k() {
        return Err(Error::Dimension(format!(
            "{} entries for {} blocks",
            v.len(),
            model.k()
        )));
    }
    if let Some(bad) = v.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::Domain(format!("objective needs v >= 0, got {bad}")));
    }
    let terms: f64 = model
        .alpha()
        .iter()
        .zip(model.rho())
        .zip(v)
        .map(|((&a, r), &x)| r * (a * x * x + (1.0 - a) * phi_unchecked(x)))
        .sum();
    Ok(model.sigma() + terms)
}
