//! Spectral-risk (mean + lambda * CVaR) simulation optimisation under
//! decision-dependent uncertainty.
//!
//! The crate holds the two benchmark processes, the forest-conditioned
//! sampler, the four-phase optimiser, four competitor optimisers, the paired
//! comparison statistics, and the experiment harness used by the `acfs` CLI.

pub mod baselines;
pub mod error;
pub mod experiment;
pub mod forest;
pub mod pipeline;
pub mod risk;
pub mod scenario;
pub mod search;
pub mod seed;
pub mod special;
pub mod stats;

pub use baselines::{run_cem_so, run_gp_bo, run_kde_so, run_sgd_cvar, BaselineConfig};
pub use error::{Error, Result};
pub use pipeline::{run_acfs, Ablation, AcfsConfig, Solution};
pub use risk::{empirical_cvar, oracle_evaluate, spectral_risk, RiskEstimate, RiskParams};
pub use scenario::{feasible_project, Decision, Dgp, DgpKind, Oracle, ScenarioMatrix, Simulator};
