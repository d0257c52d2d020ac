//! AUROC and the validation strategies behind the optimisation objective:
//! efficient leave-one-out for NND, LNND and ALP, stratified five-fold for
//! LOF and the SVM.

mod auroc;
mod cv;
mod loo;
mod objective;

pub use auroc::{auroc, masked_auroc};
pub use cv::{cv5_validate, cv_mean, inner_folds, lof_cv_max, InnerFold, LofCv, INNER_FOLDS};
pub use loo::{
    lnnd_loo_max, log_k_cap, loo_validate_alp, loo_validate_lnnd, loo_validate_nnd, nnd_loo_max, LooState,
};
pub use objective::{
    Dimension, Evaluation, EvaluationCache, ObjectiveHandle, SearchSpace, Strategy, ValidationPlan,
};
