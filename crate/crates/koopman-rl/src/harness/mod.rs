//! Experiment harness: configuration, dataset collection, model files,
//! training drivers, evaluation, ablation sweeps, and interpretability
//! reports. The `koopman-rl` binary is a thin wrapper over this module.

pub mod ablate;
pub mod config;
pub mod dataset;
pub mod interpret;
pub mod model;
pub mod run;

pub use ablate::{AblateOutcome, AblateSettings, run_ablation};
pub use config::ExperimentConfig;
pub use dataset::{Dataset, collect, read_transitions, write_transitions};
pub use interpret::{sparsify_keep, sparsify_zero, symbolic_value};
pub use model::{AgentModel, Model, SkviModel, TensorModel, load_model, load_tensor, save_tensor};
pub use run::{EvalRow, RunRecord, evaluate_model, mean_return, report, train_agent, train_skvi};
