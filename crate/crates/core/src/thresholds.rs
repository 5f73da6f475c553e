//! Threshold objective `J(τ) = σ + Σ_i ρ_i(α_i(ω_iτ)² + (1 − α_i)φ(ω_iτ))`,
//! its minimum `m̃` (the normalized phase-transition threshold), the
//! unweighted threshold `μ_{s,d}`, the statistical-dimension bounds and the
//! per-block synthesis `Σ_i ρ_i μ_{α_i|S_i|,|S_i|}`.
//!
//! All thresholds are fractions of `d`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian_kernels::{phi_prime_unchecked, phi_unchecked};
use crate::model::{PartitionModel, Weights};

/// Left end of the bisection bracket for the minimizer.
const TAU_MIN: f64 = 1e-8;

/// Model-free view of the objective: σ and one `(ρ, α, ω)` triple per block.
#[derive(Debug, Clone)]
struct Objective {
    sigma: f64,
    terms: Vec<(f64, f64, f64)>,
}

impl Objective {
    fn new(model: &PartitionModel, weights: &Weights) -> Result<Self> {
        weights.check_blocks(model)?;
        let terms = model
            .rho()
            .into_iter()
            .zip(model.alpha())
            .zip(weights.omega())
            .map(|((r, a), &w)| (r, a, w))
            .collect();
        Ok(Objective {
            sigma: model.sigma(),
            terms,
        })
    }

    /// One block with ρ = 1, ω = 1: the unweighted objective `J_α`.
    fn single(alpha: f64) -> Self {
        Objective {
            sigma: alpha,
            terms: vec![(1.0, alpha, 1.0)],
        }
    }

    fn value(&self, tau: f64) -> f64 {
        self.sigma
            + self
                .terms
                .iter()
                .map(|&(r, a, w)| {
                    let v = w * tau;
                    r * (a * v * v + (1.0 - a) * phi_unchecked(v))
                })
                .sum::<f64>()
    }

    fn slope(&self, tau: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(r, a, w)| {
                let v = w * tau;
                r * w * (2.0 * a * v + (1.0 - a) * phi_prime_unchecked(v))
            })
            .sum()
    }

    /// Minimize the convex objective over τ > 0 by bisection on the slope.
    /// Returns `(τ*, J(τ*))`; when the slope is already non-negative at the
    /// bracket start the infimum is the limit `J(0)` and `τ* = 0`.
    fn minimize(&self) -> Result<(f64, f64)> {
        if self.slope(TAU_MIN) >= 0.0 {
            return Ok((0.0, self.value(0.0)));
        }
        let mut lo = TAU_MIN;
        let mut hi = 1.0;
        while self.slope(hi) <= 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Numerical(
                    "threshold objective has no finite minimizer".into(),
                ));
            }
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let s = self.slope(mid);
            if s == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if s < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = if self.slope(lo).abs() <= self.slope(hi).abs() {
            lo
        } else {
            hi
        };
        Ok((tau, self.value(tau)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub tau_star: f64,
    /// Normalized threshold `m̃ = inf_τ J(τ)`.
    pub m_tilde: f64,
    /// `m̃ − (2/d)·√(1/ᾱ)`.
    pub delta_lower: f64,
    /// `m̃ − 2/√d`.
    pub delta_lower_loose: f64,
    /// `m̃`.
    pub delta_upper: f64,
    pub d: usize,
}

impl ThresholdResult {
    /// Threshold in measurements, `m̃·d`.
    pub fn measurements(&self) -> f64 {
        self.m_tilde * self.d as f64
    }

    /// Half-width of the transition window at failure probability `eta`.
    pub fn window(&self, eta: f64) -> Result<f64> {
        phase_window(self.d, eta)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::Domain(format!(
            "tau must be non-negative, got {tau}"
        )));
    }
    Ok(())
}

/// `J(τ)`, which equals `d⁻¹ E dist²(g, τ·∂‖·‖_{1,w}(x₀))`.
pub fn eval_j(model: &PartitionModel, weights: &Weights, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(Objective::new(model, weights)?.value(tau))
}

/// `dJ/dτ = Σ_i ρ_i ω_i(2α_i ω_i τ + (1 − α_i)φ'(ω_i τ))`.
pub fn eval_j_slope(model: &PartitionModel, weights: &Weights, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(Objective::new(model, weights)?.slope(tau))
}

pub fn minimize_j(model: &PartitionModel, weights: &Weights) -> Result<ThresholdResult> {
    if weights.is_degenerate() {
        return Err(Error::Domain(
            "all weights are zero; the objective is constant".into(),
        ));
    }
    let (tau_star, m_tilde) = Objective::new(model, weights)?.minimize()?;
    let bounds = delta_bounds(model, m_tilde);
    Ok(ThresholdResult {
        tau_star,
        m_tilde,
        delta_lower: bounds.tight.0,
        delta_lower_loose: bounds.loose.0,
        delta_upper: m_tilde,
        d: model.d(),
    })
}

/// `inf_τ α(1 + τ²) + (1 − α)φ(τ)` for a support fraction α ∈ [0, 1].
fn fraction_threshold(alpha: f64) -> Result<f64> {
    if alpha == 0.0 {
        return Ok(0.0);
    }
    Ok(Objective::single(alpha).minimize()?.1)
}

/// Normalized threshold `μ_{s,d}` of unweighted basis pursuit.
pub fn mu(s: usize, d: usize) -> Result<f64> {
    if s >= d {
        return Err(Error::Domain(format!(
            "mu needs s < d, got s = {s}, d = {d}"
        )));
    }
    fraction_threshold(s as f64 / d as f64)
}

/// Lower/upper bound pairs on `δ/d`: `tight` uses ᾱ = min α_i, `loose` is α-free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaBounds {
    pub tight: (f64, f64),
    pub loose: (f64, f64),
}

pub fn delta_bounds(model: &PartitionModel, m_tilde: f64) -> DeltaBounds {
    let d = model.d() as f64;
    DeltaBounds {
        tight: (
            m_tilde - (2.0 / d) * (1.0 / model.alpha_min()).sqrt(),
            m_tilde,
        ),
        loose: (m_tilde - 2.0 / d.sqrt(), m_tilde),
    }
}

/// `Σ_i ρ_i μ_{α_i|S_i|, |S_i|}`. A fully supported block contributes `ρ_i`.
pub fn synthesis_threshold(model: &PartitionModel) -> Result<f64> {
    model
        .rho()
        .iter()
        .zip(model.alpha())
        .map(|(r, a)| Ok(r * fraction_threshold(a)?))
        .sum()
}

/// `√(8 log(4/η))·√d`, in measurements.
pub fn phase_window(d: usize, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain(format!(
            "failure probability must lie in (0, 1), got {eta}"
        )));
    }
    Ok((8.0 * (4.0 / eta).ln()).sqrt() * (d as f64).sqrt())
}
