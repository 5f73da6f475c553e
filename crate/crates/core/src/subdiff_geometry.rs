//! Squared distance from a point to the scaled subdifferential
//! `τ·∂‖·‖_{1,w}(x₀)`, its Monte Carlo mean over Gaussian points, and the
//! weighted dual norm.
//!
//! The subdifferential fixes `w_j·sgn(x₀_j)` on the support and allows any
//! value in `[−w_j, w_j]` elsewhere, so the projection decouples by
//! coordinate:
//!
//! ```text
//! dist² = Σ_{j∈T} (g_j − τ w_j sgn x₀_j)² + Σ_{j∉T} pos(|g_j| − τ w_j)²
//! ```

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian_kernels::pos;
use crate::model::{generate_instance, PartitionModel, SupportInstance, Weights};
use crate::rng::{derive_seed, rng_from};

/// Samples per independently seeded chunk.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceSample {
    pub value: f64,
    /// Per-coordinate terms; they sum to `value`.
    pub contributions: Vec<f64>,
}

fn check_dims(g: &[f64], instance: &SupportInstance, w: &[f64], tau: f64) -> Result<()> {
    if g.len() != instance.d || w.len() != instance.d {
        return Err(Error::Dimension(format!(
            "point has {} entries and weights {}, instance dimension is {}",
            g.len(),
            w.len(),
            instance.d
        )));
    }
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::Domain(format!(
            "tau must be non-negative, got {tau}"
        )));
    }
    Ok(())
}

/// Per-coordinate `(on_support, target)`: the fixed value `τ w_j sgn x₀_j`
/// on the support, the box half-width `τ w_j` off it.
fn targets(instance: &SupportInstance, w: &[f64], tau: f64) -> Vec<(bool, f64)> {
    let signs = instance.sign_vector();
    let mask = instance.in_support();
    (0..instance.d)
        .map(|j| {
            if mask[j] {
                (true, tau * w[j] * signs[j])
            } else {
                (false, tau * w[j])
            }
        })
        .collect()
}

#[inline]
fn term(g: f64, (on_support, t): (bool, f64)) -> f64 {
    if on_support {
        (g - t) * (g - t)
    } else {
        let p = pos(g.abs() - t);
        p * p
    }
}

pub fn dist_sq_to_scaled_subdiff(
    g: &[f64],
    instance: &SupportInstance,
    w: &[f64],
    tau: f64,
) -> Result<DistanceSample> {
    check_dims(g, instance, w, tau)?;
    let contributions: Vec<f64> = g
        .iter()
        .zip(targets(instance, w, tau))
        .map(|(&gj, t)| term(gj, t))
        .collect();
    Ok(DistanceSample {
        value: contributions.iter().sum(),
        contributions,
    })
}

/// Same as [`dist_sq_to_scaled_subdiff`] without the per-coordinate breakdown.
pub fn dist_sq(g: &[f64], instance: &SupportInstance, w: &[f64], tau: f64) -> Result<f64> {
    check_dims(g, instance, w, tau)?;
    Ok(g.iter()
        .zip(targets(instance, w, tau))
        .map(|(&gj, t)| term(gj, t))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub n_samples: usize,
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        if other.n == 0.0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }
}

/// Monte Carlo estimate of `d⁻¹ E dist²(g, τ·∂‖·‖_{1,w}(x₀))` for standard
/// Gaussian `g`, with `x₀` drawn once from the model. Deterministic in `seed`
/// regardless of the number of worker threads.
pub fn mc_expected_dist_sq(
    model: &PartitionModel,
    weights: &Weights,
    tau: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::Domain(format!(
            "tau must be non-negative, got {tau}"
        )));
    }
    let w = weights.expand(model)?;
    let instance = generate_instance(model, derive_seed(&[seed, u64::MAX]));
    let targets = targets(&instance, &w, tau);
    let d = model.d() as f64;
    let n_chunks = n_samples.div_ceil(CHUNK);

    let chunks: Vec<Moments> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_from(&[seed, c as u64]);
            let len = CHUNK.min(n_samples - c * CHUNK);
            let mut acc = Moments::default();
            for _ in 0..len {
                let s: f64 = targets
                    .iter()
                    .map(|&t| term(StandardNormal.sample(&mut rng), t))
                    .sum();
                acc.push(s / d);
            }
            acc
        })
        .collect();
    let total = chunks.into_iter().fold(Moments::default(), Moments::merge);
    let variance = total.m2 / (total.n - 1.0);
    Ok(McEstimate {
        estimate: total.mean,
        standard_error: (variance / total.n).sqrt(),
        n_samples,
    })
}

/// Dual norm of `‖·‖_{1,w}`, i.e. `max_j |p_j|/w_j`, cross-checked against
/// `⟨p, v⟩` at the extremal unit vector `v = sgn(p_j)/w_j·e_j`.
pub fn dual_norm_check(p: &[f64], w: &[f64]) -> Result<f64> {
    if p.len() != w.len() {
        return Err(Error::Dimension(format!(
            "{} entries against {} weights",
            p.len(),
            w.len()
        )));
    }
    if p.is_empty() {
        return Err(Error::Dimension("empty vector".into()));
    }
    if let Some(j) = w.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::Domain(format!(
            "dual norm needs positive weights, w_{} = {}",
            j + 1,
            w[j]
        )));
    }
    let (j_max, ratio) = p
        .iter()
        .zip(w)
        .map(|(pj, wj)| pj.abs() / wj)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, r)| {
            if r > best.1 {
                (j, r)
            } else {
                best
            }
        });
    // ⟨p, v⟩ with v supported on j_max and ‖v‖_{1,w} = 1
    let pairing = p[j_max] * p[j_max].signum() / w[j_max];
    if (pairing - ratio).abs() > 1e-12 * ratio.max(1.0) {
        return Err(Error::Numerical(format!(
            "extremal pairing {pairing} disagrees with ratio {ratio}"
        )));
    }
    Ok(ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn instance() -> (PartitionModel, SupportInstance) {
        let m = PartitionModel::from_counts(8, vec![3, 5], vec![2, 1]).unwrap();
        let inst = generate_instance(&m, 9);
        (m, inst)
    }

    #[test]
    fn point_in_the_subdifferential_has_zero_distance() {
        let (m, inst) = instance();
        let w = Weights::new(vec![0.5, 1.5]).unwrap().expand(&m).unwrap();
        let tau = 0.8;
        let s = inst.sign_vector();
        let mut g: Vec<f64> = (0..8).map(|j| tau * w[j] * s[j]).collect();
        assert_eq!(dist_sq(&g, &inst, &w, tau).unwrap(), 0.0);
        let mask = inst.in_support();
        for j in 0..8 {
            if !mask[j] {
                g[j] = if j % 2 == 0 { 0.99 } else { -0.99 } * tau * w[j];
            }
        }
        assert_eq!(dist_sq(&g, &inst, &w, tau).unwrap(), 0.0);
    }

    #[test]
    fn contributions_sum_to_value() {
        let (m, inst) = instance();
        let w = Weights::new(vec![0.5, 1.5]).unwrap().expand(&m).unwrap();
        let g = [0.3, -1.2, 2.0, 0.1, -0.4, 1.7, -2.2, 0.0];
        let s = dist_sq_to_scaled_subdiff(&g, &inst, &w, 1.1).unwrap();
        assert!(s.contributions.iter().all(|c| *c >= 0.0));
        assert_abs_diff_eq!(
            s.value,
            s.contributions.iter().sum::<f64>(),
            epsilon = 1e-15
        );
        assert_eq!(s.value, dist_sq(&g, &inst, &w, 1.1).unwrap());
    }

    #[test]
    fn dimension_errors() {
        let (_, inst) = instance();
        assert!(dist_sq(&[0.0; 7], &inst, &[1.0; 8], 1.0).is_err());
        assert!(dist_sq(&[0.0; 8], &inst, &[1.0; 8], -1.0).is_err());
    }

    #[test]
    fn tau_zero_gives_mean_square_norm() {
        let m = PartitionModel::from_counts(50, vec![10, 40], vec![4, 4]).unwrap();
        let w = Weights::new(vec![0.4, 1.0]).unwrap();
        let e = mc_expected_dist_sq(&m, &w, 0.0, 20_000, 5).unwrap();
        assert!((e.estimate - 1.0).abs() <= 4.0 * e.standard_error);
    }

    #[test]
    fn standard_error_scales_with_root_n() {
        let m = PartitionModel::from_counts(50, vec![10, 40], vec![4, 4]).unwrap();
        let w = Weights::new(vec![0.4, 1.0]).unwrap();
        let a = mc_expected_dist_sq(&m, &w, 1.0, 20_000, 1).unwrap();
        let b = mc_expected_dist_sq(&m, &w, 1.0, 80_000, 2).unwrap();
        let ratio = a.standard_error / b.standard_error;
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn mc_is_deterministic() {
        let m = PartitionModel::from_counts(30, vec![30], vec![3]).unwrap();
        let w = Weights::uniform(1, 1.0).unwrap();
        let a = mc_expected_dist_sq(&m, &w, 1.2, 10_000, 77).unwrap();
        let b = mc_expected_dist_sq(&m, &w, 1.2, 10_000, 77).unwrap();
        assert_eq!(a, b);
        assert!(mc_expected_dist_sq(&m, &w, 1.2, 1, 77).is_err());
    }

    #[test]
    fn dual_norm_examples() {
        assert_eq!(
            dual_norm_check(&[1.0, 2.0, 0.5], &[1.0, 2.0, 0.5]).unwrap(),
            1.0
        );
        assert_eq!(
            dual_norm_check(&[0.5, 3.0, 0.2], &[1.0, 2.0, 1.0]).unwrap(),
            1.5
        );
        assert_eq!(
            dual_norm_check(&[-1.0, 6.0, 0.4], &[1.0, 2.0, 1.0]).unwrap(),
            3.0
        );
        assert!(dual_norm_check(&[1.0, 1.0], &[1.0, 0.0]).is_err());
        assert!(dual_norm_check(&[1.0], &[1.0, 1.0]).is_err());
    }
}
