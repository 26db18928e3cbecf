//! Graph-domain layer: statistics, rewards, validity predicates, synthetic
//! datasets and the on-disk record format.

pub mod datasets;
pub mod fairness;
pub mod io;
pub mod observation;
pub mod rewards;
pub mod stats;
pub mod validity;

pub use datasets::{generate_dataset, percentile_bound, DatasetFamily, StatKind};
pub use fairness::{fairness_metrics, FairnessReward, SensitiveAttributes};
pub use io::{read_graphs, write_records, GraphRecord};
pub use observation::{LinkObservationReward, ObservationMask, ObservationMode};
pub use rewards::{
    constraint_reward, star_reward, ConstraintAux, ConstraintKind, ConstraintSpec, CountReward, CountStat,
    LinearReward, LossVariant, QuadraticReward, Reward, StarReward,
};
pub use stats::{edge_count, max_degree, quantize, triangle_count};
pub use validity::{is_star, is_valid_egonet, sbm_valid, validity_checks, ValidityRecord};
