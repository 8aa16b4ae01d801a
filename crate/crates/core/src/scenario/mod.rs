//! The two decision-dependent processes, their cost functions, and the
//! metered oracle used by every optimiser.

pub mod constants;
pub mod correlation;
pub mod crn;
pub mod decision;
pub mod dgp;
pub mod dgp1;
pub mod dgp2;
pub mod matrix;
pub mod oracle;
pub mod testbed;

pub use constants::CostConstants;
pub use correlation::correlation_repair;
pub use crn::CrnCache;
pub use decision::{feasible_project, Decision, ALLOC_BUDGET, ALLOC_MAX, DIM_W, DIM_X};
pub use dgp::{Dgp, DgpKind, MarginalParams};
pub use matrix::{standard_normals, Row, ScenarioMatrix, Simulator};
pub use oracle::{Ledger, Oracle};
pub use testbed::QuadraticTestbed;
