//! Action semantics and optimal forward search for minimum-cost attack
//! plans, per-user enumeration, and the layered attack graph.

mod actions;
mod enumerate;
mod graph;
mod search;

pub use actions::{
    applicable_actions, apply, attack_precondition, goal_satisfied, is_flow_active,
    precondition_holds, ApplyError, AssumeConstraint, FlowMode, Goal, GroundAction, Param,
    PlanningDomain, Schema,
};
pub use enumerate::{
    enumerate_compromisable_users, enumerate_compromisable_users_sequential, UserSearch,
};
pub use graph::{
    build_attack_graph, graph_lower_bound, AttackGraph, GraphActionNode, GraphBound, GraphFact,
    GraphLayer,
};
pub use search::{
    check_plan, find_min_plan, validate_plan, AttackPlan, ExhaustReason, PlanViolation,
    SearchLimits, SearchOutcome, SearchStats,
};
