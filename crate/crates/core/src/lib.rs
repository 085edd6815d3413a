//! Clearing vectors of a random financial network with one big bank and many
//! small banks, the two-dimensional mean-field limit of the clearing system,
//! closed-form default regimes for binary shocks, and experiments comparing
//! finite networks with the limit.

pub mod analytic;
pub mod fixed_point;
pub mod experiments;
pub mod finance;
pub mod graph;
pub mod model;

pub use finance::{DefaultMetrics, LimitRecord, SurplusReport};
pub use fixed_point::{ClearingVector, InitPolicy, LimitSolution, SolverOptions};
pub use graph::{derive_seed, sample_network, BankDraw, NetworkRealization};
pub use model::{DiscreteDist, ModelParams, Recovery, Scenario, ValidatedParams};
