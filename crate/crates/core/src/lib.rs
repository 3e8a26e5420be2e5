//! Data-driven risk-averse design of unmanned aerial mobility networks.
//!
//! A design opens airports and builds aerial channels; after demand is
//! revealed, flows are routed at minimum transport cost. Designs are scored
//! against the worst demand distribution within a Wasserstein ball around the
//! historical samples, which reduces to a per-sample maximisation over the
//! vertices of the demand box (see [`dro`]).
//!
//! Entry points:
//!
//! * [`dro::solve_enumeration`] for exact search over the design lattice,
//! * [`dro::solve_lagrangian`] for the multiplier-based decomposition,
//! * [`oracle`] for slow, independently coded reference answers.

pub mod dro;
pub mod extensive;
pub mod linprog;
pub mod model;
pub mod oracle;
pub mod par;
pub mod report;
pub mod sampling;

pub use model::{
    BetaMode, DemandModel, Design, DroConfig, NetworkSpec, SolveMode, Tolerances, WorstCaseStrategy,
};
pub use report::{SolveError, SolveReport};
