//! Relation-tuple model of cloud IAM configurations with an optimal
//! forward-search attack planner.
//!
//! A snapshot of identities, datastores, and policy documents compiles into
//! a set of 3- and 4-ary permission tuples. Grounded actions over that
//! state — permission flows, wildcard activation, tuple addition, and
//! attack-enabling terminals — are searched breadth-first for minimum-cost
//! attack plans (privilege escalation, ransomware, data exfiltration,
//! impact, persistence, lateral movement). The same model emits PDDL domain
//! and problem files for external planners and validates their plans.

pub mod catalog;
pub mod ingest;
pub mod model;
pub mod pddl;
pub mod plan;
pub mod scenario;
pub mod textio;
pub mod vocab;
