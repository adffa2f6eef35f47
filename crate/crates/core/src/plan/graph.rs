//! Layered attack-graph construction: delete-relaxed reachability with
//! pairwise mutex propagation, alternating fact and action levels.
//!
//! The construction is a serial planning graph: any two proper actions in
//! one level are mutually exclusive (plans execute one action per step), two
//! facts are exclusive when every way of achieving them is, and persistence
//! is free. Negative preconditions and delete effects (the move action's
//! sensitivity transfer, the create-bucket dummy consumption) are dropped,
//! so the level at which the goal flag first appears is an admissible lower
//! bound on plan cost — a pruning bound and sanity oracle, never the answer.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{AttackType, EntityId, IamState, RelTuple, ANY_USER};
use crate::plan::actions::{FlowMode, Goal, GroundAction, Param, PlanningDomain, Schema};
use crate::vocab::{self, TokenRole};

/// One node of a fact level: a relation tuple or a status predicate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GraphFact {
    Tuple(RelTuple),
    Compromised(EntityId),
    Sensitive(EntityId),
    Created(EntityId),
    Flag(Goal),
}

/// An action instance applied at some level, with its precondition and
/// effect links. Flow and activation actions are split per supporting
/// tuple so mutex propagation sees each justification separately.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GraphActionNode {
    pub action: GroundAction,
    pub preconditions: Vec<GraphFact>,
    pub effects: Vec<GraphFact>,
}

/// One alternating level: the facts reachable at this depth, the pairwise
/// fact mutexes, and the actions applicable on top of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphLayer {
    pub facts: BTreeSet<GraphFact>,
    pub mutex: BTreeSet<(GraphFact, GraphFact)>,
    pub actions: Vec<GraphActionNode>,
}

#[derive(Debug, Clone)]
pub struct AttackGraph {
    pub goal: Goal,
    pub layers: Vec<GraphLayer>,
    /// Two consecutive identical levels were reached.
    pub reached_fixpoint: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphBound {
    /// Index of the first fact level containing the goal flag.
    Levels(usize),
    /// Fixpoint reached without the goal fact: the goal is unreachable.
    Unreachable,
    /// Construction stopped at the level cap before a fixpoint.
    Truncated,
}

fn pair(a: &GraphFact, b: &GraphFact) -> (GraphFact, GraphFact) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

fn initial_facts(state: &IamState) -> BTreeSet<GraphFact> {
    let mut facts = BTreeSet::new();
    for t in &state.tuples {
        facts.insert(GraphFact::Tuple(t.clone()));
    }
    for c in &state.compromised {
        facts.insert(GraphFact::Compromised(c.clone()));
    }
    for s in &state.sensitive {
        facts.insert(GraphFact::Sensitive(s.clone()));
    }
    for c in &state.created_entities {
        facts.insert(GraphFact::Created(c.clone()));
    }
    for a in state.attack_flags.iter() {
        facts.insert(GraphFact::Flag(Goal::Attack(a)));
    }
    if state.attack_flags.contains_set_cover() {
        facts.insert(GraphFact::Flag(Goal::SetCover));
    }
    facts
}

/// View a fact level as a relaxed state so tuple-indexed generation can be
/// reused.
fn relaxed_state(facts: &BTreeSet<GraphFact>) -> IamState {
    let mut s = IamState::new();
    for f in facts {
        match f {
            GraphFact::Tuple(t) => {
                s.insert_tuple(t.clone());
            }
            GraphFact::Compromised(id) => {
                s.compromised.insert(id.clone());
            }
            GraphFact::Sensitive(d) => {
                s.sensitive.insert(d.clone());
            }
            GraphFact::Created(c) => {
                s.created_entities.insert(c.clone());
            }
            GraphFact::Flag(_) => {}
        }
    }
    s
}

/// Build the graph for `goal`, stopping at a fixpoint (two identical
/// consecutive levels, facts and mutexes alike) or after `max_levels` action
/// levels. Goal-irrelevant attack schemas are pruned exactly as in the
/// forward search.
pub fn build_attack_graph(
    domain: &PlanningDomain,
    initial: &IamState,
    goal: Goal,
    max_levels: usize,
) -> AttackGraph {
    assert!(max_levels >= 1, "max_levels must be at least 1");
    let mut layers = vec![GraphLayer { facts: initial_facts(initial), mutex: BTreeSet::new(), actions: Vec::new() }];
    let mut reached_fixpoint = false;

    for _ in 0..max_levels {
        let actions = relaxed_actions(domain, layers.last().unwrap(), goal);
        let (next_facts, next_mutex) = propagate(layers.last().unwrap(), &actions);
        let last = layers.last_mut().unwrap();
        let fixpoint = next_facts == last.facts && next_mutex == last.mutex;
        last.actions = actions;
        if fixpoint {
            reached_fixpoint = true;
            break;
        }
        layers.push(GraphLayer { facts: next_facts, mutex: next_mutex, actions: Vec::new() });
    }

    AttackGraph { goal, layers, reached_fixpoint }
}

/// First fact level containing the goal flag; admissible because the
/// construction only relaxes the real semantics.
pub fn graph_lower_bound(graph: &AttackGraph, goal: Goal) -> GraphBound {
    for (i, layer) in graph.layers.iter().enumerate() {
        if layer.facts.contains(&GraphFact::Flag(goal)) {
            return GraphBound::Levels(i);
        }
    }
    if graph.reached_fixpoint {
        GraphBound::Unreachable
    } else {
        GraphBound::Truncated
    }
}

/// Compute the next fact level and its mutex set from the current layer and
/// its applicable actions.
fn propagate(layer: &GraphLayer, actions: &[GraphActionNode]) -> (BTreeSet<GraphFact>, BTreeSet<(GraphFact, GraphFact)>) {
    let mut next: BTreeSet<GraphFact> = layer.facts.clone();
    let mut achievers: BTreeMap<&GraphFact, Vec<usize>> = BTreeMap::new();
    for (i, a) in actions.iter().enumerate() {
        for e in &a.effects {
            next.insert(e.clone());
            achievers.entry(e).or_default().push(i);
        }
    }

    // noop_g is compatible with action a iff g conflicts with none of a's
    // preconditions at the current level.
    let noop_ok = |g: &GraphFact, a: &GraphActionNode| -> bool {
        layer.facts.contains(g)
            && a.preconditions.iter().all(|p| p == g || !layer.mutex.contains(&pair(g, p)))
    };

    let facts: Vec<&GraphFact> = next.iter().collect();
    let mut mutex = BTreeSet::new();
    for (i, f) in facts.iter().enumerate() {
        for g in facts.iter().skip(i + 1) {
            let both_old = layer.facts.contains(*f) && layer.facts.contains(*g);
            if both_old && !layer.mutex.contains(&pair(f, g)) {
                continue; // persists together
            }
            let via_f = achievers.get(*f).map(Vec::as_slice).unwrap_or(&[]);
            let via_g = achievers.get(*g).map(Vec::as_slice).unwrap_or(&[]);
            // One action producing both.
            if via_f.iter().any(|i| via_g.contains(i)) {
                continue;
            }
            // Achiever of one alongside persistence of the other; any two
            // proper actions are serially exclusive.
            if via_f.iter().any(|&i| noop_ok(g, &actions[i]))
                || via_g.iter().any(|&i| noop_ok(f, &actions[i]))
            {
                continue;
            }
            mutex.insert(pair(f, g));
        }
    }
    (next, mutex)
}

struct Emit<'a> {
    layer_facts: &'a BTreeSet<GraphFact>,
    mutex: &'a BTreeSet<(GraphFact, GraphFact)>,
    seen: BTreeSet<(GroundAction, Vec<GraphFact>)>,
    out: Vec<GraphActionNode>,
}

impl Emit<'_> {
    /// Record a relaxed action instance if its preconditions are present and
    /// pairwise non-exclusive at this level.
    fn push(&mut self, action: GroundAction, pre: Vec<GraphFact>, eff: Vec<GraphFact>) {
        if !pre.iter().all(|p| self.layer_facts.contains(p)) {
            return;
        }
        for (i, p) in pre.iter().enumerate() {
            for q in pre.iter().skip(i + 1) {
                if self.mutex.contains(&pair(p, q)) {
                    return;
                }
            }
        }
        if self.seen.insert((action.clone(), pre.clone())) {
            self.out.push(GraphActionNode { action, preconditions: pre, effects: eff });
        }
    }
}

fn ent(e: &EntityId) -> Param {
    Param::Entity(e.clone())
}

fn perm(p: &crate::model::PermissionName) -> Param {
    Param::Perm(p.clone())
}

/// Relaxed action instances on a level: negative preconditions are dropped,
/// each flow/activation is split per supporting tuple, attack schemas are
/// restricted to the goal, and an action is admitted only if its positive
/// preconditions are present and pairwise non-exclusive.
fn relaxed_actions(domain: &PlanningDomain, layer: &GraphLayer, goal: Goal) -> Vec<GraphActionNode> {
    let state = relaxed_state(&layer.facts);
    let mut emit = Emit { layer_facts: &layer.facts, mutex: &layer.mutex, seen: BTreeSet::new(), out: Vec::new() };
    relaxed_actions_inner(domain, &state, domain.catalog(), goal, &mut emit);
    emit.out.sort();
    emit.out
}

fn relaxed_actions_inner(
    domain: &PlanningDomain,
    state: &IamState,
    cat: &crate::catalog::EntityCatalog,
    goal: Goal,
    emit: &mut Emit<'_>,
) {
    let fc = crate::model::PermissionName::new(vocab::FULL_CONTROL);
    let any_u = EntityId::any_user();
    let any_d = EntityId::any_datastore();

    // Compromise selection: static precondition only.
    for u in cat.users() {
        emit.push(
            GroundAction { schema: Schema::SelectCompromisedUser, params: vec![ent(u)] },
            vec![],
            vec![GraphFact::Compromised(u.clone())],
        );
    }

    // Flows, one instance per justifying edge.
    let mut edges: Vec<(EntityId, EntityId, RelTuple)> = Vec::new();
    for t in &state.tuples {
        if let RelTuple::Id3 { src: dst, perm: p, dst: src } = t {
            if domain.flow_perms_contains(p) && src != dst {
                edges.push((src.clone(), dst.clone(), t.clone()));
            }
        }
    }
    for (src, dst, edge) in &edges {
        match domain.mode() {
            FlowMode::Bulk => {
                let effects: Vec<GraphFact> = state
                    .tuples_of(src)
                    .map(|t| GraphFact::Tuple(t.with_holder(dst.clone())))
                    .collect();
                emit.push(
                    GroundAction { schema: Schema::PermFlowBulk, params: vec![ent(src), ent(dst)] },
                    vec![GraphFact::Tuple(edge.clone())],
                    effects,
                );
            }
            FlowMode::PerTuple => {
                for t in state.tuples_of(src) {
                    let (schema, params) = match t {
                        RelTuple::Id3 { perm: p, dst: obj, .. } => (
                            Schema::PermFlowId3,
                            vec![ent(src), perm(p), ent(obj), ent(dst)],
                        ),
                        RelTuple::Ds3 { perm: p, ds: obj, .. } => (
                            Schema::PermFlowDs3,
                            vec![ent(src), perm(p), ent(obj), ent(dst)],
                        ),
                        RelTuple::Id4 { subj, perm: p, dst: tgt, .. } => (
                            Schema::PermFlowId4,
                            vec![ent(dst), ent(src), ent(subj), perm(p), ent(tgt)],
                        ),
                        RelTuple::Ds4 { subj, perm: p, ds: tgt, .. } => (
                            Schema::PermFlowDs4,
                            vec![ent(dst), ent(src), ent(subj), perm(p), ent(tgt)],
                        ),
                    };
                    emit.push(
                        GroundAction { schema, params },
                        vec![GraphFact::Tuple(edge.clone()), GraphFact::Tuple(t.clone())],
                        vec![GraphFact::Tuple(t.with_holder(dst.clone()))],
                    );
                }
            }
        }
    }

    // Tuple additions.
    for actor in &state.compromised {
        for t in state.tuples_of(actor) {
            let (subj, p, tgt, datastore) = match t {
                RelTuple::Id4 { subj, perm, dst, .. } => (subj, perm, dst, false),
                RelTuple::Ds4 { subj, perm, ds, .. } => (subj, perm, ds, true),
                _ => continue,
            };
            let schema = if datastore { Schema::AddDs3 } else { Schema::AddId3 };
            let mk3 = |s: &EntityId| {
                if datastore {
                    RelTuple::ds3(s.clone(), p.clone(), tgt.clone())
                } else {
                    RelTuple::id3(s.clone(), p.clone(), tgt.clone())
                }
            };
            let subjects: Vec<EntityId> = if subj.name() == ANY_USER {
                cat.users().cloned().collect()
            } else {
                vec![subj.clone()]
            };
            for s in subjects {
                emit.push(
                    GroundAction { schema, params: vec![ent(actor), ent(&s), perm(p), ent(tgt)] },
                    vec![GraphFact::Compromised(actor.clone()), GraphFact::Tuple(t.clone())],
                    vec![GraphFact::Tuple(mk3(&s))],
                );
            }
        }
    }

    // Activations, one instance per supporting disjunct.
    let (id_perms, ds_perms) = crate::plan::actions::activation_universes(domain, state, goal);
    let id_targets: Vec<EntityId> = cat.identities().map(|e| e.id.clone()).collect();
    let ds_targets: Vec<EntityId> = cat.datastores().map(|e| e.id.clone()).collect();
    for t in &state.tuples {
        match t {
            RelTuple::Id3 { src: id1, perm: p, dst } => {
                if p == &fc && !dst.is_sentinel() {
                    for pm in &id_perms {
                        emit_activate_id(emit, id1, pm, dst, t);
                    }
                } else if p == &fc && dst == &any_u {
                    for pm in &id_perms {
                        for tgt in &id_targets {
                            emit_activate_id(emit, id1, pm, tgt, t);
                        }
                    }
                } else if dst == &any_u && p != &fc {
                    for tgt in &id_targets {
                        emit_activate_id(emit, id1, p, tgt, t);
                    }
                }
            }
            RelTuple::Ds3 { src: id1, perm: p, ds } => {
                if p == &fc && !ds.is_sentinel() {
                    for pm in &ds_perms {
                        emit_activate_ds(emit, id1, pm, ds, t);
                    }
                } else if p == &fc && ds == &any_d {
                    for pm in &ds_perms {
                        for tgt in &ds_targets {
                            emit_activate_ds(emit, id1, pm, tgt, t);
                        }
                    }
                } else if ds == &any_d && p != &fc {
                    for tgt in &ds_targets {
                        emit_activate_ds(emit, id1, p, tgt, t);
                    }
                }
            }
            _ => {}
        }
    }

    // Attack actions for the goal.
    relaxed_attacks(state, cat, goal, emit);
}

fn emit_activate_id(emit: &mut Emit<'_>, id1: &EntityId, pm: &crate::model::PermissionName, id2: &EntityId, support: &RelTuple) {
    emit.push(
        GroundAction { schema: Schema::ActivateId3, params: vec![ent(id1), perm(pm), ent(id2)] },
        vec![GraphFact::Tuple(support.clone())],
        vec![GraphFact::Tuple(RelTuple::id3(id1.clone(), pm.clone(), id2.clone()))],
    );
}

fn emit_activate_ds(emit: &mut Emit<'_>, id1: &EntityId, pm: &crate::model::PermissionName, ds: &EntityId, support: &RelTuple) {
    emit.push(
        GroundAction { schema: Schema::ActivateDs3, params: vec![ent(id1), perm(pm), ent(ds)] },
        vec![GraphFact::Tuple(support.clone())],
        vec![GraphFact::Tuple(RelTuple::ds3(id1.clone(), pm.clone(), ds.clone()))],
    );
}

fn relaxed_attacks(
    state: &IamState,
    cat: &crate::catalog::EntityCatalog,
    goal: Goal,
    emit: &mut Emit<'_>,
) {
    let stores: Vec<EntityId> = cat.datastores().map(|e| e.id.clone()).collect();
    for id in &state.compromised {
        let comp = GraphFact::Compromised(id.clone());
        match goal {
            Goal::Attack(AttackType::SensitiveDataExfiltration) => {
                for ds1 in stores.iter().filter(|d| state.is_sensitive(d)) {
                    let get = RelTuple::ds3(id.clone(), vocab::S3_GET_OBJECT, ds1.clone());
                    if !state.contains_tuple(&get) {
                        continue;
                    }
                    let del = RelTuple::ds3(id.clone(), vocab::S3_DELETE_OBJECT, ds1.clone());
                    for ds2 in stores.iter().filter(|d| *d != ds1) {
                        let put = RelTuple::ds3(id.clone(), vocab::S3_PUT_OBJECT, ds2.clone());
                        if !state.contains_tuple(&put) {
                            continue;
                        }
                        let public_now = cat.is_public(ds2, state);
                        let mut base_pre = vec![
                            comp.clone(),
                            GraphFact::Sensitive(ds1.clone()),
                            GraphFact::Tuple(get.clone()),
                            GraphFact::Tuple(put.clone()),
                        ];
                        if cat.is_dummy(ds2) && public_now {
                            base_pre.push(GraphFact::Created(ds2.clone()));
                        }
                        let mut eff = vec![GraphFact::Sensitive(ds2.clone())];
                        if public_now {
                            eff.push(GraphFact::Flag(goal));
                        }
                        emit.push(
                            GroundAction { schema: Schema::CopyObject, params: vec![ent(id), ent(ds1), ent(ds2)] },
                            base_pre.clone(),
                            eff.clone(),
                        );
                        if state.contains_tuple(&del) {
                            let mut pre = base_pre.clone();
                            pre.push(GraphFact::Tuple(del.clone()));
                            emit.push(
                                GroundAction { schema: Schema::MoveObject, params: vec![ent(id), ent(ds1), ent(ds2)] },
                                pre,
                                eff,
                            );
                        }
                    }
                }
                if let Some(dummy) = cat.dummy_datastore() {
                    for t in state.tuples_of(id) {
                        if let RelTuple::Ds3 { perm: p, .. } = t {
                            if vocab::token_def(p.as_str()).is_some_and(|d| d.role == TokenRole::CreateBucket) {
                                emit.push(
                                    GroundAction {
                                        schema: Schema::CreatePublicBucket,
                                        params: vec![ent(id), perm(p), ent(t.target()), ent(dummy)],
                                    },
                                    vec![comp.clone(), GraphFact::Tuple(t.clone())],
                                    vec![GraphFact::Created(dummy.clone())],
                                );
                            }
                        }
                    }
                }
            }
            Goal::Attack(AttackType::Impact) => {
                for t in state.tuples_of(id) {
                    match t {
                        RelTuple::Ds3 { perm: p, ds, .. }
                            if p.as_str() == vocab::DELETE_BUCKET && !ds.is_sentinel() =>
                        {
                            emit.push(
                                GroundAction { schema: Schema::DeleteBucket, params: vec![ent(id), ent(ds)] },
                                vec![comp.clone(), GraphFact::Sensitive(ds.clone()), GraphFact::Tuple(t.clone())],
                                vec![GraphFact::Flag(goal)],
                            );
                        }
                        RelTuple::Id3 { perm: p, dst, .. }
                            if vocab::token_def(p.as_str()).is_some_and(|d| d.role == TokenRole::ImpactIdentity)
                                && !dst.is_sentinel()
                                && !cat.is_dummy(dst) =>
                        {
                            emit.push(
                                GroundAction {
                                    schema: Schema::EnableAttack,
                                    params: vec![ent(id), perm(p), ent(dst)],
                                },
                                vec![comp.clone(), GraphFact::Tuple(t.clone())],
                                vec![GraphFact::Flag(goal)],
                            );
                        }
                        _ => {}
                    }
                }
            }
            Goal::Attack(AttackType::Persistence) => {
                for t in state.tuples_of(id) {
                    if matches!(t, RelTuple::Id3 { .. } | RelTuple::Ds3 { .. })
                        && vocab::token_def(t.perm().as_str()).is_some_and(|d| d.role == TokenRole::Persistence)
                    {
                        emit.push(
                            GroundAction {
                                schema: Schema::GainPersistence,
                                params: vec![ent(id), perm(t.perm()), ent(t.target())],
                            },
                            vec![comp.clone(), GraphFact::Tuple(t.clone())],
                            vec![GraphFact::Flag(goal), GraphFact::Created(EntityId::dummy_user())],
                        );
                    }
                }
            }
            Goal::Attack(AttackType::LateralMovement) => {
                for t in state.tuples_of(id) {
                    if let RelTuple::Id3 { perm: p, dst, .. } = t {
                        if vocab::token_def(p.as_str()).is_some_and(|d| d.role == TokenRole::LoginChange)
                            && dst != id
                            && cat.is_user(dst)
                            && !cat.is_dummy(dst)
                        {
                            emit.push(
                                GroundAction {
                                    schema: Schema::ChangeUserLogin,
                                    params: vec![ent(id), perm(p), ent(dst)],
                                },
                                vec![comp.clone(), GraphFact::Tuple(t.clone())],
                                vec![GraphFact::Flag(goal)],
                            );
                        }
                    }
                }
            }
            Goal::Attack(AttackType::PrivilegeEscalation) => {
                let t = RelTuple::id3(id.clone(), vocab::HAS_POLICY, EntityId::admin_policy());
                if state.contains_tuple(&t) {
                    emit.push(
                        GroundAction { schema: Schema::ReachAdminPolicy, params: vec![ent(id)] },
                        vec![comp.clone(), GraphFact::Tuple(t)],
                        vec![GraphFact::Flag(goal)],
                    );
                }
            }
            Goal::Attack(AttackType::Ransomware) => {
                for ds in stores.iter().filter(|d| state.is_sensitive(d)) {
                    if cat.versioning_enabled(ds) || cat.mfa_delete_enabled(ds) {
                        continue;
                    }
                    let put = RelTuple::ds3(id.clone(), vocab::S3_PUT_OBJECT, ds.clone());
                    if !state.contains_tuple(&put) {
                        continue;
                    }
                    for t in state.tuples_of(id) {
                        if let RelTuple::Ds3 { perm: p, ds: w, .. } = t {
                            if p.as_str() == vocab::KMS_CREATE_KEY {
                                emit.push(
                                    GroundAction {
                                        schema: Schema::EncryptSensitiveData,
                                        params: vec![ent(id), ent(ds), ent(w)],
                                    },
                                    vec![
                                        comp.clone(),
                                        GraphFact::Sensitive(ds.clone()),
                                        GraphFact::Tuple(put.clone()),
                                        GraphFact::Tuple(t.clone()),
                                    ],
                                    vec![GraphFact::Flag(goal)],
                                );
                            }
                        }
                    }
                }
            }
            Goal::SetCover => {
                let elements: Vec<RelTuple> = cat
                    .datastores()
                    .filter(|e| !e.dummy)
                    .map(|e| RelTuple::ds3(id.clone(), "hasElement", e.id.clone()))
                    .collect();
                if elements.iter().all(|t| state.contains_tuple(t)) {
                    let mut pre = vec![comp.clone()];
                    pre.extend(elements.into_iter().map(GraphFact::Tuple));
                    emit.push(
                        GroundAction { schema: Schema::SetCoverAttack, params: vec![ent(id)] },
                        pre,
                        vec![GraphFact::Flag(goal)],
                    );
                }
            }
        }
    }
}
