//! Seeded Monte Carlo phase-transition experiments.
//!
//! For every strategy and measurement count `m`, each trial draws a support
//! instance and an `m × d` matrix with i.i.d. standard-normal entries, solves
//! weighted basis pursuit on `b = A x₀` and declares success when
//! `‖x̂ − x₀‖₂ ≤ success_threshold`. Each trial is seeded from
//! `(master_seed, strategy index, m, trial index)`, so tallies do not depend
//! on how rayon schedules the work.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    generate_instance, weights_for_strategy, AlphaSpec, ModelConfig, PartitionModel, Strategy,
};
use crate::rng::{derive_seed, rng_from};
use crate::solver::{success, weighted_bp, BpProblem, BpStatus, DEFAULT_TOL};
use crate::thresholds::minimize_j;

pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_TRIALS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: PartitionModel,
    pub strategies: Vec<Strategy>,
    pub m_values: Vec<usize>,
    pub trials_per_m: usize,
    pub master_seed: u64,
    pub success_threshold: f64,
}

impl ExperimentConfig {
    pub fn new(
        model: PartitionModel,
        strategies: Vec<Strategy>,
        m_values: Vec<usize>,
        trials_per_m: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let cfg = ExperimentConfig {
            model,
            strategies,
            m_values,
            trials_per_m,
            master_seed,
            success_threshold: DEFAULT_SUCCESS_THRESHOLD,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies given".into()));
        }
        if self.m_values.is_empty() {
            return Err(Error::Config("no measurement counts given".into()));
        }
        if let Some(&m) = self
            .m_values
            .iter()
            .find(|&&m| m == 0 || m > self.model.d())
        {
            return Err(Error::Config(format!(
                "measurement count {m} is outside [1, {}]",
                self.model.d()
            )));
        }
        if self.trials_per_m == 0 {
            return Err(Error::Config("trials_per_m must be at least 1".into()));
        }
        if !(self.success_threshold >= 0.0 && self.success_threshold.is_finite()) {
            return Err(Error::Config(format!(
                "success threshold must be finite and non-negative, got {}",
                self.success_threshold
            )));
        }
        for s in &self.strategies {
            weights_for_strategy(&self.model, s)?;
        }
        Ok(())
    }
}

/// JSON form of an experiment: the model config fields plus the experiment
/// parameters. `strategy` and `strategies` may both be given; they are
/// concatenated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub d: usize,
    pub blocks: Vec<usize>,
    pub alpha: Vec<AlphaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub seed: u64,
    pub m_values: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials_per_m: usize,
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_threshold() -> f64 {
    DEFAULT_SUCCESS_THRESHOLD
}

impl ExperimentFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))
    }

    pub fn config(&self) -> Result<ExperimentConfig> {
        let model = ModelConfig {
            d: self.d,
            blocks: self.blocks.clone(),
            alpha: self.alpha.clone(),
            strategy: None,
            seed: None,
        }
        .model()?;
        let mut strategies: Vec<Strategy> = self.strategy.iter().cloned().collect();
        strategies.extend(self.strategies.iter().cloned());
        let cfg = ExperimentConfig {
            model,
            strategies,
            m_values: self.m_values.clone(),
            trials_per_m: self.trials_per_m,
            master_seed: self.seed,
            success_threshold: self.success_threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialOutcome {
    pub success: bool,
    /// The solver reported infeasibility or failed numerically.
    pub solver_issue: bool,
}

fn trial_with_weights(
    cfg: &ExperimentConfig,
    strategy_index: usize,
    w: &[f64],
    m: usize,
    trial_index: usize,
) -> TrialOutcome {
    let seed = derive_seed(&[
        cfg.master_seed,
        strategy_index as u64,
        m as u64,
        trial_index as u64,
    ]);
    let instance = generate_instance(&cfg.model, derive_seed(&[seed, 0]));
    let d = cfg.model.d();
    let mut rng = rng_from(&[seed, 1]);
    let a = DMatrix::from_fn(m, d, |_, _| StandardNormal.sample(&mut rng));
    let x0 = instance.signal();
    let b = &a * DVector::from_column_slice(&x0);
    let outcome = BpProblem::new(a, b, w.to_vec()).and_then(|p| weighted_bp(&p, DEFAULT_TOL));
    match outcome {
        Ok(sol) if sol.status != BpStatus::Infeasible => TrialOutcome {
            success: success(&sol.x_hat, &x0, cfg.success_threshold),
            solver_issue: false,
        },
        _ => TrialOutcome {
            success: false,
            solver_issue: true,
        },
    }
}

/// One seeded trial of strategy `strategy_index` at `m` measurements.
pub fn run_trial(
    cfg: &ExperimentConfig,
    strategy_index: usize,
    m: usize,
    trial_index: usize,
) -> Result<TrialOutcome> {
    let strategy = cfg
        .strategies
        .get(strategy_index)
        .ok_or_else(|| Error::Config(format!("no strategy with index {strategy_index}")))?;
    if m == 0 || m > cfg.model.d() {
        return Err(Error::Config(format!(
            "measurement count {m} is outside [1, {}]",
            cfg.model.d()
        )));
    }
    let w = weights_for_strategy(&cfg.model, strategy)?.expand(&cfg.model)?;
    Ok(trial_with_weights(cfg, strategy_index, &w, m, trial_index))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    pub strategy: String,
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    /// `3·√(rate(1 − rate)/trials)`.
    pub halfwidth3: f64,
    /// Predicted threshold `m̃·d` in measurements.
    pub predicted_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCurve {
    pub rows: Vec<PhaseRow>,
    /// Trials whose solve failed or reported infeasibility (counted as failures).
    pub solver_issues: usize,
}

/// Binomial standard deviation of a rate estimated from `n` trials.
pub fn binomial_se(rate: f64, n: usize) -> f64 {
    (rate * (1.0 - rate) / n as f64).sqrt()
}

impl PhaseCurve {
    pub fn rows_for<'a>(&'a self, strategy: &'a str) -> impl Iterator<Item = &'a PhaseRow> + 'a {
        self.rows.iter().filter(move |r| r.strategy == strategy)
    }

    pub fn row(&self, strategy: &str, m: usize) -> Option<&PhaseRow> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && r.m == m)
    }

    /// Measurement count where the success rate first reaches 1/2, linearly
    /// interpolated between neighbouring `m` values.
    pub fn crossing(&self, strategy: &str) -> Option<f64> {
        let mut prev: Option<&PhaseRow> = None;
        for r in self.rows_for(strategy) {
            if r.rate >= 0.5 {
                return Some(match prev {
                    Some(p) if p.rate < 0.5 => {
                        p.m as f64 + (0.5 - p.rate) / (r.rate - p.rate) * (r.m - p.m) as f64
                    }
                    _ => r.m as f64,
                });
            }
            prev = Some(r);
        }
        None
    }

    /// CSV with columns
    /// `strategy,m,trials,successes,rate,halfwidth3,predicted_threshold`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("strategy,m,trials,successes,rate,halfwidth3,predicted_threshold\n");
        for r in &self.rows {
            let label = if r.strategy.contains(',') || r.strategy.contains('"') {
                format!("\"{}\"", r.strategy.replace('"', "\"\""))
            } else {
                r.strategy.clone()
            };
            out.push_str(&format!(
                "{label},{},{},{},{:.6},{:.6},{:.6}\n",
                r.m, r.trials, r.successes, r.rate, r.halfwidth3, r.predicted_threshold
            ));
        }
        out
    }
}

/// Run every `(strategy, m, trial)` combination and tally success rates.
pub fn run_phase_curve(cfg: &ExperimentConfig) -> Result<PhaseCurve> {
    cfg.validate()?;
    let mut prepared = Vec::with_capacity(cfg.strategies.len());
    for s in &cfg.strategies {
        let weights = weights_for_strategy(&cfg.model, s)?;
        let predicted = minimize_j(&cfg.model, &weights)?.measurements();
        prepared.push((s.to_string(), weights.expand(&cfg.model)?, predicted));
    }

    let jobs: Vec<(usize, usize, usize)> = (0..prepared.len())
        .flat_map(|si| {
            cfg.m_values
                .iter()
                .flat_map(move |&m| (0..cfg.trials_per_m).map(move |t| (si, m, t)))
        })
        .collect();
    let outcomes: Vec<((usize, usize), TrialOutcome)> = jobs
        .par_iter()
        .map(|&(si, m, t)| ((si, m), trial_with_weights(cfg, si, &prepared[si].1, m, t)))
        .collect();

    let mut tallies: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    let mut solver_issues = 0;
    for (key, o) in outcomes {
        let e = tallies.entry(key).or_default();
        e.0 += 1;
        e.1 += o.success as usize;
        solver_issues += o.solver_issue as usize;
    }

    let mut rows = Vec::with_capacity(tallies.len());
    for (si, (label, _, predicted)) in prepared.iter().enumerate() {
        for &m in &cfg.m_values {
            let (trials, successes) = tallies[&(si, m)];
            let rate = successes as f64 / trials as f64;
            rows.push(PhaseRow {
                strategy: label.clone(),
                m,
                trials,
                successes,
                rate,
                halfwidth3: 3.0 * binomial_se(rate, trials),
                predicted_threshold: *predicted,
            });
        }
    }
    Ok(PhaseCurve {
        rows,
        solver_issues,
    })
}
