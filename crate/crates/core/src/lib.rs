//! Optimal weights for weighted ℓ1-minimization with prior support information.
//!
//! The crate computes, for a partition of the index set into blocks with known
//! support fractions, the per-block weights that minimize the Gaussian
//! phase-transition threshold of weighted basis pursuit, evaluates that
//! threshold through the statistical-dimension objective, and checks the
//! predictions empirically with an interior-point weighted basis pursuit
//! solver and a seeded Monte Carlo harness.
//!
//! ```
//! use wl1_core::model::PartitionModel;
//! use wl1_core::weights_opt::optimal_weights;
//!
//! let model = PartitionModel::from_counts(100, vec![10, 90], vec![3, 7]).unwrap();
//! let w = optimal_weights(&model).unwrap();
//! assert!((w.normalized.omega()[0] - 0.5539).abs() < 5e-4);
//! ```

pub mod error;
pub mod experiments;
pub mod gaussian_kernels;
pub mod model;
pub mod rng;
pub mod solver;
pub mod subdiff_geometry;
pub mod thresholds;
pub mod weights_opt;

pub use error::{Error, Result};
pub use model::{PartitionModel, Strategy, SupportInstance, Weights};
pub use thresholds::ThresholdResult;
