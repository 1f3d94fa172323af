//! Estimators of treatment effects for binary matched-pairs data with
//! pair-level heterogeneity.
//!
//! The centerpiece is a conditional maximum-likelihood estimator that
//! eliminates the shared pair effect through the discordant-pair probability
//! G(s) / (G(s) + G(-s)), where G(x) = -sqrt(pi) x Phi(-x/sqrt(2)) +
//! exp(-x^2/4). Alongside it: a random-effects probit ML fit integrated by
//! Gauss-Hermite quadrature, a conditional-logit comparator, an
//! inverse-probability-weighted ATE, plug-in asymptotic inference, a seeded
//! Monte-Carlo harness, and the two embedded replication datasets.

mod erf;
mod error;
mod optim;

pub mod data;
pub mod estimators;
pub mod inference;
pub mod model;
pub mod numerics;
pub mod simulation;

pub use error::{Error, Result};

pub use data::{
    load_lead_dataset, load_leukaemia_dataset, parse_dataset, parse_dataset_path,
    CensoringConvention,
};
pub use estimators::{
    ate_closed_form_mixture, ate_closed_form_normal, fit_cml_logit, fit_conditional_mle,
    fit_heckman_ml, heckman_loglik, ipw_ate, naive_ate, EstimateResult, FitOptions, HeckmanResult,
    UnpairedSample,
};
pub use inference::{
    asymptotic_variance, observed_info_se, treatment_odds, wald_test, InferenceResult,
    TauDistribution,
};
pub use model::{
    check_identifiability, conditional_loglik, conditional_loglik_grad, conditional_prob,
    k_integral, Dataset, IdentifiabilityReport, MatchedPair, Theta,
};
pub use numerics::{g_function, g_prime, gauss_hermite, std_normal_cdf, QuadratureRule};
pub use simulation::{
    emit_table, generate_pairs, parse_summary_csv, preset, run_replications, CovariateLaw,
    EstimatorKind, Scenario, SimulationSummary, SummaryRow, TableFormat, TreatmentLaw,
};
