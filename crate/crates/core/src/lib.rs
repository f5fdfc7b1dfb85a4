//! Boosting laboratory: AdaBoost and penalized functional gradient descent
//! over tree base learners, with simulation and experiment tooling for
//! studying overfitting and probability estimation.

pub mod dataset;
pub mod engine;
pub mod error;
pub mod fmt;
pub mod harness;
pub mod loss;
pub mod metrics;
pub mod oracle;
pub mod simdata;
pub mod tree;
pub mod verify;

pub use dataset::Dataset;
pub use engine::{run_boost, Algorithm, BoostConfig, BoostState, Ensemble, Penalty, Status};
pub use error::{Error, Result};
pub use harness::{run_experiment, ExperimentConfig, ExperimentName};
pub use loss::Loss;
pub use metrics::{CurvePoint, Split};
pub use simdata::{SimModel, SimSpec};
pub use tree::{Tree, TreeConfig, TreeMode};
