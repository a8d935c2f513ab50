//! Waiting-time laws for the competing birth processes, their symmetrized
//! differences, and the dispersion functional evaluated on them.

mod analytic;
mod feedback;
mod model;

pub use analytic::{analytic_d, laplace_d, law_d, quadrature_d, QUADRATURE_REL_TOL};
pub use feedback::{FeedbackCache, FeedbackFunction, TailRule, DEFAULT_MEMO_CAP};
pub use model::{
    make_exponential_model, sample_increment, symmetrized_sampler, LevelLaw, LevelSampler, SymmetrizedIncrement,
    WaitingTimeModel,
};
