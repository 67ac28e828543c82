//! Identifiability analysis, estimation, and classification for Q-matrix
//! based cognitive diagnosis models (DINA and DINO).
//!
//! The attribute-profile space `{0,1}^K` is partitioned into equivalence
//! classes of profiles that share an ideal response vector. Class
//! proportions are estimated by marginal maximum likelihood (EM), and
//! respondents are classified per attribute into mastered, not mastered, or
//! unclassified using posterior mass bounds that do not depend on how a
//! prior splits mass inside a class.
//!
//! Bit strings follow one convention everywhere: attribute 1 (or item 1) is
//! the leftmost character and the most significant bit.

pub mod classify;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod exec;
pub mod io;
pub mod model;
pub mod qspace;
pub mod quadrature;
pub mod simulate;
pub mod tmatrix;

pub use classify::{
    class_posterior, marginal_posterior, mastery_bounds, misclassification_report, niad_classify,
    zeta_rates, Decision, MarginalPosterior, MasteryBounds, MisclassificationReport, ZetaReport,
};
pub use error::{Error, Result};
pub use estimate::{em_fit, parameter_count, unreduced_parameter_count, EmOptions, FitResult, Variant};
pub use exec::Exec;
pub use model::{
    class_conditional_prob, log_likelihood, prior_class_probs, prior_profile_probs, response_prob,
    ItemParams, ModelSpec, PriorSpec, ResponseMatrix,
};
pub use qspace::{
    ideal_response, is_complete, marginal_identifiability, partition, separable, EquivalenceClass,
    IdealResponse, Link, Partition, Profile, QMatrix,
};
pub use simulate::{builtin_scenarios, draw_population, generate_responses, Population, Scenario};
pub use tmatrix::{identifiability_rank_check, t_matrix, RankCheck, TMatrix};
