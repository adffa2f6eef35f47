//! PDDL emission for external planners and plan-file parsing.

mod emit;
mod names;
mod plans;

pub use emit::{emit_domain, emit_problem, PddlDocument, PddlError, PddlKind, DOMAIN_NAME};
pub use names::NameTable;
pub use plans::{parse_plan_file, parse_plan_file_with_tokens, PlanParseError};
