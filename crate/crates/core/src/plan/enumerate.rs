//! Per-user compromise enumeration: run an independent search for every
//! user pre-compromised, in parallel when the `parallel` feature is on.

use crate::model::{EntityId, IamState};
use crate::plan::actions::{Goal, PlanningDomain};
use crate::plan::search::{find_min_plan, AttackPlan, SearchLimits, SearchOutcome, SearchStats};

/// Outcome of one per-user search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSearch {
    pub user: EntityId,
    pub outcome: SearchOutcome,
    pub stats: SearchStats,
}

impl UserSearch {
    pub fn plan(&self) -> Option<&AttackPlan> {
        self.outcome.plan()
    }
}

fn search_one(
    domain: &PlanningDomain,
    initial: &IamState,
    goal: Goal,
    limits: &SearchLimits,
    user: &EntityId,
) -> UserSearch {
    let mut start = initial.clone();
    start.compromised.insert(user.clone());
    let (outcome, stats) = find_min_plan(domain, &start, goal, limits);
    UserSearch { user: user.clone(), outcome, stats }
}

/// For each user, search with that user pre-compromised (the select action
/// is then inapplicable, so plans are one action shorter than planner-chosen
/// compromise). Results are in user-name order regardless of scheduling;
/// per-user resource exhaustion is recorded, not fatal.
pub fn enumerate_compromisable_users(
    domain: &PlanningDomain,
    initial: &IamState,
    goal: Goal,
    limits: &SearchLimits,
) -> Vec<UserSearch> {
    let users: Vec<EntityId> = domain.catalog().users().cloned().collect();
    run_searches(domain, initial, goal, limits, &users)
}

#[cfg(feature = "parallel")]
fn run_searches(
    domain: &PlanningDomain,
    initial: &IamState,
    goal: Goal,
    limits: &SearchLimits,
    users: &[EntityId],
) -> Vec<UserSearch> {
    use rayon::prelude::*;
    users
        .par_iter()
        .map(|u| search_one(domain, initial, goal, limits, u))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_searches(
    domain: &PlanningDomain,
    initial: &IamState,
    goal: Goal,
    limits: &SearchLimits,
    users: &[EntityId],
) -> Vec<UserSearch> {
    enumerate_sequential_impl(domain, initial, goal, limits, users)
}

/// Sequential enumeration, always available; the benchmark suite compares it
/// against the data-parallel path.
pub fn enumerate_compromisable_users_sequential(
    domain: &PlanningDomain,
    initial: &IamState,
    goal: Goal,
    limits: &SearchLimits,
) -> Vec<UserSearch> {
    let users: Vec<EntityId> = domain.catalog().users().cloned().collect();
    enumerate_sequential_impl(domain, initial, goal, limits, &users)
}

fn enumerate_sequential_impl(
    domain: &PlanningDomain,
    initial: &IamState,
    goal: Goal,
    limits: &SearchLimits,
    users: &[EntityId],
) -> Vec<UserSearch> {
    users.iter().map(|u| search_one(domain, initial, goal, limits, u)).collect()
}
