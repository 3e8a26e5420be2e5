//! The distributionally robust two-stage engine.

pub mod enumeration;
pub mod lagrangian;
pub mod lemma;
pub mod objective;
pub mod penalty;
pub mod second_stage;
pub mod worst_case;

pub use enumeration::{solve_enumeration, DesignSpace};
pub use lagrangian::solve_lagrangian;
pub use lemma::{prop1_smallscale_check, LemmaCheck};
pub use objective::{beta_saturation, dro_objective, saa_objective, Evaluation, ObjectiveBreakdown};
pub use penalty::{wasserstein_penalty, VertexPattern, VertexState};
pub use second_stage::{second_stage_value, Recourse, SecondStage};
pub use worst_case::{worst_case_sample, WorstCaseEntry};
