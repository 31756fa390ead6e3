//! The hybrid attack: a deterministic module that proves a target's
//! sensitive value (or membership) from the release when only one value is
//! feasible, and a stochastic module trained on shadow datasets for
//! everyone else.

mod attack;
mod deterministic;
mod logistic;
mod shadow;

pub use attack::{
    desia_attack, desia_attack_mia, record_id, stochastic_predict, train_meta_classifier, AttackContext, AttackResult,
    DesiaConfig,
};
pub use deterministic::{
    deterministic_aia, deterministic_mia, prepare_problem, probe_aia, probe_mia, DeterministicOptions, Finder, Probe,
};
pub use logistic::{
    fit_logistic_l2, logistic_loss_grad, select_and_fit, FeatureMatrix, MetaClassifier, DEFAULT_LAMBDA_GRID,
    MAX_ITERATIONS,
};
pub use shadow::{sample_shadow_datasets_aia, sample_shadow_datasets_mia, ShadowBatch};
