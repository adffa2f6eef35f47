//! Optimal forward search: breadth-first expansion over unit-cost ground
//! actions with full-state duplicate detection.
//!
//! Unit costs make breadth-first layers equivalent to uniform-cost search,
//! so the first goal state generated is optimal. FIFO expansion plus sorted
//! successor generation makes the returned plan the lexicographically least
//! among the optimal ones, so identical inputs produce byte-identical plans.

use std::fmt;
use std::time::{Duration, Instant};

use indexmap::IndexMap;

use crate::model::IamState;
use crate::plan::actions::{
    applicable_actions, apply, goal_satisfied, precondition_holds, Goal, GroundAction, PlanningDomain,
};

/// Resource limits for one search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    /// Cap on expanded states.
    pub max_states: usize,
    /// Wall-clock budget, `None` for unlimited.
    pub max_time: Option<Duration>,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_states: 1_000_000, max_time: None }
    }
}

/// An ordered action sequence ending in an attack-enabling action.
/// Cost equals length because every action costs one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AttackPlan {
    pub actions: Vec<GroundAction>,
}

impl AttackPlan {
    pub fn cost(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

impl fmt::Display for AttackPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.actions {
            writeln!(f, "{a}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExhaustReason {
    States,
    Time,
}

/// Search result. `NoPlan` means the reachable state space was exhausted
/// without finding the goal, which is a proof of absence; `Exhausted` only
/// means the answer is unknown within the limits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Plan(AttackPlan),
    NoPlan,
    Exhausted(ExhaustReason),
}

impl SearchOutcome {
    pub fn plan(&self) -> Option<&AttackPlan> {
        match self {
            SearchOutcome::Plan(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expanded: usize,
    pub generated: usize,
    pub duplicates: usize,
    pub wall_time: Duration,
    pub peak_frontier: usize,
}

struct NodeMeta {
    parent: usize,
    action: Option<GroundAction>,
}

/// Find a minimum-cost plan achieving `goal` from `initial`.
pub fn find_min_plan(
    domain: &PlanningDomain,
    initial: &IamState,
    goal: Goal,
    limits: &SearchLimits,
) -> (SearchOutcome, SearchStats) {
    let start = Instant::now();
    let mut stats = SearchStats::default();

    if goal_satisfied(initial, goal) {
        stats.wall_time = start.elapsed();
        return (SearchOutcome::Plan(AttackPlan::default()), stats);
    }

    // Insertion order is both the arena index and the FIFO queue order.
    let mut nodes: IndexMap<IamState, NodeMeta> = IndexMap::new();
    nodes.insert(initial.clone(), NodeMeta { parent: usize::MAX, action: None });

    let mut cursor = 0usize;
    while cursor < nodes.len() {
        if stats.expanded >= limits.max_states {
            stats.wall_time = start.elapsed();
            return (SearchOutcome::Exhausted(ExhaustReason::States), stats);
        }
        if let Some(budget) = limits.max_time {
            if stats.expanded % 256 == 0 && start.elapsed() > budget {
                stats.wall_time = start.elapsed();
                return (SearchOutcome::Exhausted(ExhaustReason::Time), stats);
            }
        }

        let state = nodes.get_index(cursor).expect("cursor in bounds").0.clone();
        stats.expanded += 1;

        for action in applicable_actions(domain, &state, goal) {
            let next = apply(domain, &state, &action).expect("generated actions are applicable");
            stats.generated += 1;
            if nodes.contains_key(&next) {
                stats.duplicates += 1;
                continue;
            }
            let reached_goal = goal_satisfied(&next, goal);
            nodes.insert(next, NodeMeta { parent: cursor, action: Some(action) });
            if reached_goal {
                let plan = extract_plan(&nodes, nodes.len() - 1);
                stats.peak_frontier = stats.peak_frontier.max(nodes.len() - cursor);
                stats.wall_time = start.elapsed();
                return (SearchOutcome::Plan(plan), stats);
            }
        }
        cursor += 1;
        stats.peak_frontier = stats.peak_frontier.max(nodes.len() - cursor);
    }

    stats.wall_time = start.elapsed();
    (SearchOutcome::NoPlan, stats)
}

fn extract_plan(nodes: &IndexMap<IamState, NodeMeta>, mut idx: usize) -> AttackPlan {
    let mut actions = Vec::new();
    loop {
        let meta = &nodes[idx];
        match &meta.action {
            Some(a) => actions.push(a.clone()),
            None => break,
        }
        idx = meta.parent;
    }
    actions.reverse();
    AttackPlan { actions }
}

/// Where and why a plan fails to validate.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanViolation {
    #[error("action #{index} {action} is not applicable")]
    NotApplicable { index: usize, action: String },
    #[error("plan ends without satisfying goal `{goal}`")]
    GoalUnsatisfied { goal: String },
}

/// Simulate the plan from `initial`; every action must be applicable in
/// sequence and the final state must satisfy the goal.
pub fn validate_plan(domain: &PlanningDomain, initial: &IamState, plan: &AttackPlan, goal: Goal) -> bool {
    check_plan(domain, initial, plan, goal).is_ok()
}

/// Like [`validate_plan`] but reports the first failing action.
pub fn check_plan(
    domain: &PlanningDomain,
    initial: &IamState,
    plan: &AttackPlan,
    goal: Goal,
) -> Result<IamState, PlanViolation> {
    let mut state = initial.clone();
    for (i, action) in plan.actions.iter().enumerate() {
        if !precondition_holds(domain, &state, action) {
            return Err(PlanViolation::NotApplicable { index: i + 1, action: action.to_string() });
        }
        state = apply(domain, &state, action).expect("checked precondition");
    }
    if goal_satisfied(&state, goal) {
        Ok(state)
    } else {
        Err(PlanViolation::GoalUnsatisfied { goal: goal.name().to_string() })
    }
}
