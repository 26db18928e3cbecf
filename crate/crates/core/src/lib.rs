//! Training-free guided sampling for graph diffusion models.
//!
//! A pretrained score model over graph states is steered at sampling time
//! toward high values of a reward, either with analytic reward gradients or
//! with zeroth-order estimates built from reward evaluations alone.

pub mod checks;
pub mod cli;
pub mod error;
pub mod graphs;
pub mod guidance;
pub mod metrics;
pub mod oracle;
pub mod prior;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod state;

pub use error::{Error, Result};
pub use prior::{EmpiricalMixturePrior, GaussianPrior, ScoreModel};
pub use schedule::NoiseSchedule;
pub use state::GraphState;
