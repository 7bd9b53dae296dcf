//! Bayesian causal inference for staged software rollouts.
//!
//! Three designs share one NUTS sampler: propensity-score matching
//! ([`bpsm`]), difference-in-differences ([`bdid`]) and regression
//! discontinuity ([`brdd`]). [`pipeline`] turns trip telemetry into design
//! matrices, [`simulator`] produces studies with known effects and
//! [`advisor`] picks a design from a short questionnaire.

pub mod advisor;
pub mod bdid;
pub mod bpsm;
pub mod brdd;
pub mod cli;
pub mod design;
pub mod error;
pub mod estimate;
pub mod nuts;
pub mod pipeline;
pub mod prob;
pub mod simulator;

pub use design::{ColumnScaling, DesignMatrix};
pub use error::{BoatError, Result};
pub use estimate::{ATEEstimate, Estimand};
pub use nuts::{sample, PosteriorSamples, SamplerConfig};
pub use prob::{ModelSpec, PriorSpec};
