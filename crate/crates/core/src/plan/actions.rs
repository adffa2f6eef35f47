//! Grounded action schemas: applicability tests and the state-transition
//! function, in both bulk (one flow moves everything) and per-tuple (one
//! flow moves one tuple) granularity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::catalog::EntityCatalog;
use crate::model::{AttackType, EntityId, EntityKind, IamState, PermissionName, RelTuple};
use crate::vocab::{self, TargetFamily, TokenRole};

/// Flow granularity. A single planning run uses exactly one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlowMode {
    /// One action transfers every tuple of the source at once.
    Bulk,
    /// One action transfers a single tuple.
    PerTuple,
}

/// Whether an identity may take assume-justified flows from more than one
/// source within a plan. Applies only to `assumeRole`-justified flows;
/// membership and policy flows are never restricted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AssumeConstraint {
    SingleSource,
    Unrestricted,
}

/// Planning objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Goal {
    Attack(AttackType),
    /// Goal of the set-cover reduction used as a correctness oracle: it is
    /// satisfiable only under a test vocabulary extension and is not exposed
    /// by the CLI.
    SetCover,
}

impl Goal {
    pub fn name(self) -> &'static str {
        match self {
            Goal::Attack(a) => a.name(),
            Goal::SetCover => "setcover",
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Action schemas. Declaration order is the tie-breaking order for plans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Schema {
    SelectCompromisedUser,
    PermFlowBulk,
    PermFlowId3,
    PermFlowDs3,
    PermFlowId4,
    PermFlowDs4,
    AddId3,
    AddDs3,
    ActivateId3,
    ActivateDs3,
    CopyObject,
    MoveObject,
    DeleteBucket,
    CreatePublicBucket,
    EncryptSensitiveData,
    GainPersistence,
    ChangeUserLogin,
    ReachAdminPolicy,
    /// Identity-deletion impact: removal of users, roles, groups, policies,
    /// access keys, or MFA devices.
    EnableAttack,
    /// Terminal action of the set-cover reduction (test oracle only).
    SetCoverAttack,
}

impl Schema {
    /// The action name used in PDDL documents and plan files.
    pub fn pddl_name(self) -> &'static str {
        match self {
            Schema::SelectCompromisedUser => "selectCompromisedUser",
            Schema::PermFlowBulk => "permissionFlow_bulk",
            Schema::PermFlowId3 => "permissionFlow_id_3tpl",
            Schema::PermFlowDs3 => "permissionFlow_ds_3tpl",
            Schema::PermFlowId4 => "permissionFlow_id_4tpl",
            Schema::PermFlowDs4 => "permissionFlow_ds_4tpl",
            Schema::AddId3 => "add_id_3tpl",
            Schema::AddDs3 => "add_ds_3tpl",
            Schema::ActivateId3 => "activate_id_3tpl",
            Schema::ActivateDs3 => "activate_ds_3tpl",
            Schema::CopyObject => "copyObject",
            Schema::MoveObject => "moveObject",
            Schema::DeleteBucket => "deleteBucket",
            Schema::CreatePublicBucket => "createPublicBucket",
            Schema::EncryptSensitiveData => "encryptSensitiveData",
            Schema::GainPersistence => "gainPersistenceAction",
            Schema::ChangeUserLogin => "changeUserLogin",
            Schema::ReachAdminPolicy => "reachAdminPolicy",
            Schema::EnableAttack => "deleteIdentity",
            Schema::SetCoverAttack => "setcover",
        }
    }
}

/// One parameter binding of a ground action.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    Entity(EntityId),
    Perm(PermissionName),
}

impl Param {
    pub fn name(&self) -> &str {
        match self {
            Param::Entity(e) => e.name(),
            Param::Perm(p) => p.as_str(),
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully bound instance of one action schema. Every action costs one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAction {
    pub schema: Schema,
    pub params: Vec<Param>,
}

impl GroundAction {
    pub fn cost(&self) -> u32 {
        1
    }

    pub fn arg_names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name().to_string()).collect()
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.schema.pddl_name())?;
        for p in &self.params {
            write!(f, " {p}")?;
        }
        write!(f, ")")
    }
}

fn ent(e: &EntityId) -> Param {
    Param::Entity(e.clone())
}

fn perm(p: &PermissionName) -> Param {
    Param::Perm(p.clone())
}

/// The static planning context: entity universe, flow granularity, assume
/// constraint, and the flow-activating permission set (extensible for the
/// test-only reduction vocabulary).
#[derive(Debug, Clone)]
pub struct PlanningDomain {
    catalog: EntityCatalog,
    mode: FlowMode,
    constraint: AssumeConstraint,
    flow_perms: BTreeSet<PermissionName>,
    extra_tokens: BTreeMap<PermissionName, TargetFamily>,
}

impl PlanningDomain {
    pub fn new(catalog: EntityCatalog, mode: FlowMode, constraint: AssumeConstraint) -> Self {
        let flow_perms = [vocab::ASSUME_ROLE, vocab::BELONGS_TO, vocab::HAS_POLICY]
            .into_iter()
            .map(PermissionName::new)
            .collect();
        PlanningDomain { catalog, mode, constraint, flow_perms, extra_tokens: BTreeMap::new() }
    }

    /// Register an additional flow-activating permission (test configuration).
    pub fn with_flow_permission(mut self, token: &str) -> Self {
        let p = PermissionName::new(token);
        self.flow_perms.insert(p.clone());
        self.extra_tokens.insert(p, TargetFamily::Identity);
        self
    }

    /// Register an additional plain permission token (test configuration).
    pub fn with_extra_token(mut self, token: &str, family: TargetFamily) -> Self {
        self.extra_tokens.insert(PermissionName::new(token), family);
        self
    }

    pub fn catalog(&self) -> &EntityCatalog {
        &self.catalog
    }

    pub fn mode(&self) -> FlowMode {
        self.mode
    }

    pub fn constraint(&self) -> AssumeConstraint {
        self.constraint
    }

    pub fn with_mode(mut self, mode: FlowMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_constraint(mut self, constraint: AssumeConstraint) -> Self {
        self.constraint = constraint;
        self
    }

    pub(crate) fn flow_perms_contains(&self, p: &PermissionName) -> bool {
        self.flow_perms.contains(p)
    }

    fn token_family(&self, p: &PermissionName) -> Option<TargetFamily> {
        if let Some(def) = vocab::token_def(p.as_str()) {
            return Some(def.family);
        }
        self.extra_tokens.get(p).copied()
    }

    fn is_assume(&self, p: &PermissionName) -> bool {
        p.as_str() == vocab::ASSUME_ROLE
    }

    /// A dummy entity participates only once materialized.
    fn exists(&self, id: &EntityId, state: &IamState) -> bool {
        self.catalog.exists_in(id, state)
    }

    /// Users that can appear as concrete bindings of `any_user`.
    fn live_users<'a>(&'a self, state: &'a IamState) -> impl Iterator<Item = &'a EntityId> {
        self.catalog
            .identities()
            .filter(move |e| e.kind == EntityKind::User && (!e.dummy || state.is_created(&e.id)))
            .map(|e| &e.id)
    }
}

/// True iff permissions can flow from `src` to `dst`: `dst` holds a
/// flow-activating edge over `src` (assumeRole, belongsTo, or hasPolicy; test
/// configurations may register more).
pub fn is_flow_active(domain: &PlanningDomain, state: &IamState, src: &EntityId, dst: &EntityId) -> bool {
    debug_assert!(src != dst);
    domain.flow_perms.iter().any(|p| {
        state.contains_tuple(&RelTuple::Id3 { src: dst.clone(), perm: p.clone(), dst: src.clone() })
    })
}

/// Whether a flow `src -> dst` is justified by a non-assume edge. When it is,
/// the single-source constraint does not apply and no binding is recorded.
fn has_non_assume_edge(domain: &PlanningDomain, state: &IamState, src: &EntityId, dst: &EntityId) -> bool {
    domain.flow_perms.iter().filter(|p| !domain.is_assume(p)).any(|p| {
        state.contains_tuple(&RelTuple::Id3 { src: dst.clone(), perm: p.clone(), dst: src.clone() })
    })
}

/// Flow permitted under the assume constraint, plus whether applying it must
/// record a source binding.
fn flow_admissible(domain: &PlanningDomain, state: &IamState, src: &EntityId, dst: &EntityId) -> Option<bool> {
    if !is_flow_active(domain, state, src, dst) {
        return None;
    }
    if has_non_assume_edge(domain, state, src, dst) {
        return Some(false);
    }
    // Assume-justified flow.
    match domain.constraint {
        AssumeConstraint::Unrestricted => Some(false),
        AssumeConstraint::SingleSource => match state.flow_bound.get(dst) {
            None => Some(true),
            Some(bound) if bound == src => Some(true),
            Some(_) => None,
        },
    }
}

/// Ordered pairs `(src, dst)` with an active flow edge in `state`.
fn active_flow_pairs(domain: &PlanningDomain, state: &IamState) -> BTreeSet<(EntityId, EntityId)> {
    let mut pairs = BTreeSet::new();
    for t in &state.tuples {
        if let RelTuple::Id3 { src: dst, perm, dst: src } = t {
            if domain.flow_perms.contains(perm) && src != dst {
                pairs.insert((src.clone(), dst.clone()));
            }
        }
    }
    pairs
}

/// Identity-family and datastore-family permission universes for activation
/// grounding: tokens present in the state, the structural and flow tokens,
/// and the tokens the goal's attack preconditions read. Tokens outside this
/// set can never satisfy a precondition relevant to the goal, so leaving
/// them ungrounded preserves optimality while keeping the branching factor
/// proportional to the instance.
pub(crate) fn activation_universes(
    domain: &PlanningDomain,
    state: &IamState,
    goal: Goal,
) -> (BTreeSet<PermissionName>, BTreeSet<PermissionName>) {
    let mut id_perms: BTreeSet<PermissionName> = domain.flow_perms.clone();
    let mut ds_perms: BTreeSet<PermissionName> = BTreeSet::new();
    for t in &state.tuples {
        let p = t.perm();
        if p.as_str() == vocab::FULL_CONTROL {
            continue;
        }
        match domain.token_family(p) {
            Some(TargetFamily::Identity) => {
                id_perms.insert(p.clone());
            }
            Some(TargetFamily::Datastore) => {
                ds_perms.insert(p.clone());
            }
            None => {}
        }
    }
    let mut add_role = |role: TokenRole| {
        for def in vocab::tokens_with_role(role) {
            let p = PermissionName::new(def.token);
            match def.family {
                TargetFamily::Identity => id_perms.insert(p),
                TargetFamily::Datastore => ds_perms.insert(p),
            };
        }
    };
    match goal {
        Goal::Attack(AttackType::SensitiveDataExfiltration) => {
            add_role(TokenRole::ObjectRw);
            add_role(TokenRole::CreateBucket);
        }
        Goal::Attack(AttackType::Impact) => {
            add_role(TokenRole::DeleteBucket);
            add_role(TokenRole::ImpactIdentity);
        }
        Goal::Attack(AttackType::Persistence) => add_role(TokenRole::Persistence),
        Goal::Attack(AttackType::LateralMovement) => add_role(TokenRole::LoginChange),
        Goal::Attack(AttackType::PrivilegeEscalation) => {}
        Goal::Attack(AttackType::Ransomware) => {
            ds_perms.insert(PermissionName::new(vocab::S3_PUT_OBJECT));
            ds_perms.insert(PermissionName::new(vocab::KMS_CREATE_KEY));
        }
        Goal::SetCover => {}
    }
    (id_perms, ds_perms)
}

const FULL_CONTROL_LAZY: &str = vocab::FULL_CONTROL;

fn full_control() -> PermissionName {
    PermissionName::new(FULL_CONTROL_LAZY)
}

/// Exact applicability test for one bound action. The generator in
/// [`applicable_actions`] enumerates satisfying bindings; this re-checks a
/// given binding, and is what plan validation uses.
pub fn precondition_holds(domain: &PlanningDomain, state: &IamState, action: &GroundAction) -> bool {
    use Param::{Entity, Perm};
    let cat = domain.catalog();
    let p = &action.params;
    // Selection must come first: while nothing is compromised, only
    // selectCompromisedUser is applicable, and it never applies again.
    if state.compromised.is_empty() && action.schema != Schema::SelectCompromisedUser {
        return false;
    }
    match (action.schema, p.as_slice()) {
        (Schema::SelectCompromisedUser, [Entity(id)]) => {
            state.compromised.is_empty() && cat.is_user(id) && !cat.is_dummy(id)
        }
        (Schema::PermFlowBulk, [Entity(src), Entity(dst)]) => {
            domain.mode == FlowMode::Bulk && src != dst && flow_admissible(domain, state, src, dst).is_some()
        }
        (Schema::PermFlowId3, [Entity(src), Perm(pm), Entity(obj), Entity(dst)]) => {
            domain.mode == FlowMode::PerTuple
                && src != dst
                && flow_admissible(domain, state, src, dst).is_some()
                && state.contains_tuple(&RelTuple::id3(src.clone(), pm.clone(), obj.clone()))
                && !state.contains_tuple(&RelTuple::id3(dst.clone(), pm.clone(), obj.clone()))
        }
        (Schema::PermFlowDs3, [Entity(src), Perm(pm), Entity(obj), Entity(dst)]) => {
            domain.mode == FlowMode::PerTuple
                && src != dst
                && flow_admissible(domain, state, src, dst).is_some()
                && state.contains_tuple(&RelTuple::ds3(src.clone(), pm.clone(), obj.clone()))
                && !state.contains_tuple(&RelTuple::ds3(dst.clone(), pm.clone(), obj.clone()))
        }
        (Schema::PermFlowId4, [Entity(dst), Entity(src), Entity(subj), Perm(pm), Entity(tgt)]) => {
            domain.mode == FlowMode::PerTuple
                && src != dst
                && flow_admissible(domain, state, src, dst).is_some()
                && state.contains_tuple(&RelTuple::id4(src.clone(), subj.clone(), pm.clone(), tgt.clone()))
                && !state.contains_tuple(&RelTuple::id4(dst.clone(), subj.clone(), pm.clone(), tgt.clone()))
        }
        (Schema::PermFlowDs4, [Entity(dst), Entity(src), Entity(subj), Perm(pm), Entity(tgt)]) => {
            domain.mode == FlowMode::PerTuple
                && src != dst
                && flow_admissible(domain, state, src, dst).is_some()
                && state.contains_tuple(&RelTuple::ds4(src.clone(), subj.clone(), pm.clone(), tgt.clone()))
                && !state.contains_tuple(&RelTuple::ds4(dst.clone(), subj.clone(), pm.clone(), tgt.clone()))
        }
        (Schema::AddId3, [Entity(actor), Entity(subj), Perm(pm), Entity(tgt)]) => {
            state.is_compromised(actor)
                && !state.contains_tuple(&RelTuple::id3(subj.clone(), pm.clone(), tgt.clone()))
                && holds_tuple4(domain, state, actor, subj, pm, tgt, false)
        }
        (Schema::AddDs3, [Entity(actor), Entity(subj), Perm(pm), Entity(tgt)]) => {
            state.is_compromised(actor)
                && !state.contains_tuple(&RelTuple::ds3(subj.clone(), pm.clone(), tgt.clone()))
                && holds_tuple4(domain, state, actor, subj, pm, tgt, true)
        }
        (Schema::ActivateId3, [Entity(id1), Perm(pm), Entity(id2)]) => {
            let fc = full_control();
            let any = EntityId::any_user();
            !state.contains_tuple(&RelTuple::id3(id1.clone(), pm.clone(), id2.clone()))
                && (state.contains_tuple(&RelTuple::id3(id1.clone(), fc.clone(), id2.clone()))
                    || state.contains_tuple(&RelTuple::id3(id1.clone(), fc, any.clone()))
                    || state.contains_tuple(&RelTuple::id3(id1.clone(), pm.clone(), any)))
        }
        (Schema::ActivateDs3, [Entity(id1), Perm(pm), Entity(ds)]) => {
            let fc = full_control();
            let any = EntityId::any_datastore();
            !state.contains_tuple(&RelTuple::ds3(id1.clone(), pm.clone(), ds.clone()))
                && (state.contains_tuple(&RelTuple::ds3(id1.clone(), fc.clone(), ds.clone()))
                    || state.contains_tuple(&RelTuple::ds3(id1.clone(), fc, any.clone()))
                    || state.contains_tuple(&RelTuple::ds3(id1.clone(), pm.clone(), any)))
        }
        (Schema::CopyObject, [Entity(id), Entity(ds1), Entity(ds2)]) => {
            ds1 != ds2
                && state.is_compromised(id)
                && state.is_sensitive(ds1)
                && !ds1.is_sentinel()
                && !ds2.is_sentinel()
                && domain.exists(ds1, state)
                && domain.exists(ds2, state)
                && state.contains_tuple(&RelTuple::ds3(id.clone(), vocab::S3_GET_OBJECT, ds1.clone()))
                && state.contains_tuple(&RelTuple::ds3(id.clone(), vocab::S3_PUT_OBJECT, ds2.clone()))
        }
        (Schema::MoveObject, [Entity(id), Entity(ds1), Entity(ds2)]) => {
            ds1 != ds2
                && state.is_compromised(id)
                && state.is_sensitive(ds1)
                && !ds1.is_sentinel()
                && !ds2.is_sentinel()
                && domain.exists(ds1, state)
                && domain.exists(ds2, state)
                && state.contains_tuple(&RelTuple::ds3(id.clone(), vocab::S3_GET_OBJECT, ds1.clone()))
                && state.contains_tuple(&RelTuple::ds3(id.clone(), vocab::S3_DELETE_OBJECT, ds1.clone()))
                && state.contains_tuple(&RelTuple::ds3(id.clone(), vocab::S3_PUT_OBJECT, ds2.clone()))
        }
        (Schema::DeleteBucket, [Entity(id), Entity(ds)]) => {
            state.is_compromised(id)
                && state.is_sensitive(ds)
                && !ds.is_sentinel()
                && domain.exists(ds, state)
                && state.contains_tuple(&RelTuple::ds3(id.clone(), vocab::DELETE_BUCKET, ds.clone()))
        }
        (Schema::CreatePublicBucket, [Entity(id), Perm(pm), Entity(witness), Entity(dummy)]) => {
            state.is_compromised(id)
                && vocab::token_def(pm.as_str()).is_some_and(|d| d.role == TokenRole::CreateBucket)
                && cat.dummy_datastore() == Some(dummy)
                && !state.is_created(dummy)
                && state.contains_tuple(&RelTuple::ds3(id.clone(), pm.clone(), witness.clone()))
        }
        (Schema::EncryptSensitiveData, [Entity(id), Entity(ds), Entity(witness)]) => {
            state.is_compromised(id)
                && state.is_sensitive(ds)
                && !ds.is_sentinel()
                && domain.exists(ds, state)
                && !cat.versioning_enabled(ds)
                && !cat.mfa_delete_enabled(ds)
                && state.contains_tuple(&RelTuple::ds3(id.clone(), vocab::S3_PUT_OBJECT, ds.clone()))
                && state.contains_tuple(&RelTuple::ds3(id.clone(), vocab::KMS_CREATE_KEY, witness.clone()))
        }
        (Schema::GainPersistence, [Entity(id), Perm(pm), Entity(witness)]) => {
            state.is_compromised(id)
                && vocab::token_def(pm.as_str()).is_some_and(|d| d.role == TokenRole::Persistence)
                && holds_tuple3_either(state, id, pm, witness)
        }
        (Schema::ChangeUserLogin, [Entity(id), Perm(pm), Entity(target)]) => {
            state.is_compromised(id)
                && id != target
                && cat.is_user(target)
                && !cat.is_dummy(target)
                && vocab::token_def(pm.as_str()).is_some_and(|d| d.role == TokenRole::LoginChange)
                && state.contains_tuple(&RelTuple::id3(id.clone(), pm.clone(), target.clone()))
        }
        (Schema::ReachAdminPolicy, [Entity(id)]) => {
            state.is_compromised(id)
                && state.contains_tuple(&RelTuple::id3(id.clone(), vocab::HAS_POLICY, EntityId::admin_policy()))
        }
        (Schema::EnableAttack, [Entity(id), Perm(pm), Entity(target)]) => {
            state.is_compromised(id)
                && !target.is_sentinel()
                && domain.exists(target, state)
                && cat.kind_of(target).is_some_and(EntityKind::is_identity)
                && vocab::token_def(pm.as_str()).is_some_and(|d| d.role == TokenRole::ImpactIdentity)
                && state.contains_tuple(&RelTuple::id3(id.clone(), pm.clone(), target.clone()))
        }
        (Schema::SetCoverAttack, [Entity(id)]) => {
            state.is_compromised(id)
                && cat.datastores().filter(|e| !e.dummy).all(|e| {
                    state.contains_tuple(&RelTuple::ds3(id.clone(), "hasElement", e.id.clone()))
                })
        }
        _ => false,
    }
}

/// Whether `actor` holds the 4-tuple naming `(subj, perm, tgt)`, either with
/// the exact subject or with the `any_user` sentinel standing for any user.
fn holds_tuple4(
    domain: &PlanningDomain,
    state: &IamState,
    actor: &EntityId,
    subj: &EntityId,
    pm: &PermissionName,
    tgt: &EntityId,
    datastore: bool,
) -> bool {
    let mk = |s: &EntityId| {
        if datastore {
            RelTuple::ds4(actor.clone(), s.clone(), pm.clone(), tgt.clone())
        } else {
            RelTuple::id4(actor.clone(), s.clone(), pm.clone(), tgt.clone())
        }
    };
    if state.contains_tuple(&mk(subj)) {
        return true;
    }
    // The any_user keyword lets the actor bind any concrete user.
    !subj.is_sentinel()
        && domain.catalog().is_user(subj)
        && state.contains_tuple(&mk(&EntityId::any_user()))
}

fn holds_tuple3_either(state: &IamState, id: &EntityId, pm: &PermissionName, target: &EntityId) -> bool {
    state.contains_tuple(&RelTuple::id3(id.clone(), pm.clone(), target.clone()))
        || state.contains_tuple(&RelTuple::ds3(id.clone(), pm.clone(), target.clone()))
}

/// Enumerate every ground action applicable in `state`, restricted to the
/// structural schemas plus the attack schemas relevant to `goal`. Output is
/// sorted by `(schema, params)`, the deterministic tie-break order.
///
/// Grounding is lazy: bindings are read off the state's tuples rather than
/// instantiated up front over the whole universe.
pub fn applicable_actions(domain: &PlanningDomain, state: &IamState, goal: Goal) -> Vec<GroundAction> {
    let mut out: Vec<GroundAction> = Vec::new();
    let cat = domain.catalog();

    // Compromise selection is the mandatory first step: until something is
    // compromised, nothing else may act.
    if state.compromised.is_empty() {
        for u in cat.users() {
            out.push(GroundAction { schema: Schema::SelectCompromisedUser, params: vec![ent(u)] });
        }
        out.sort();
        return out;
    }

    // Permission flows.
    for (src, dst) in active_flow_pairs(domain, state) {
        if flow_admissible(domain, state, &src, &dst).is_none() {
            continue;
        }
        match domain.mode {
            FlowMode::Bulk => {
                out.push(GroundAction { schema: Schema::PermFlowBulk, params: vec![ent(&src), ent(&dst)] });
            }
            FlowMode::PerTuple => {
                for t in state.tuples_of(&src) {
                    if state.contains_tuple(&t.with_holder(dst.clone())) {
                        continue;
                    }
                    let action = match t {
                        RelTuple::Id3 { perm: pm, dst: obj, .. } => GroundAction {
                            schema: Schema::PermFlowId3,
                            params: vec![ent(&src), perm(pm), ent(obj), ent(&dst)],
                        },
                        RelTuple::Ds3 { perm: pm, ds: obj, .. } => GroundAction {
                            schema: Schema::PermFlowDs3,
                            params: vec![ent(&src), perm(pm), ent(obj), ent(&dst)],
                        },
                        RelTuple::Id4 { subj, perm: pm, dst: tgt, .. } => GroundAction {
                            schema: Schema::PermFlowId4,
                            params: vec![ent(&dst), ent(&src), ent(subj), perm(pm), ent(tgt)],
                        },
                        RelTuple::Ds4 { subj, perm: pm, ds: tgt, .. } => GroundAction {
                            schema: Schema::PermFlowDs4,
                            params: vec![ent(&dst), ent(&src), ent(subj), perm(pm), ent(tgt)],
                        },
                    };
                    out.push(action);
                }
            }
        }
    }

    // Tuple additions from held 4-tuples.
    for actor in &state.compromised {
        for t in state.tuples_of(actor) {
            let (subj, pm, tgt, datastore) = match t {
                RelTuple::Id4 { subj, perm, dst, .. } => (subj, perm, dst, false),
                RelTuple::Ds4 { subj, perm, ds, .. } => (subj, perm, ds, true),
                _ => continue,
            };
            let schema = if datastore { Schema::AddDs3 } else { Schema::AddId3 };
            let mk3 = |s: &EntityId| {
                if datastore {
                    RelTuple::ds3(s.clone(), pm.clone(), tgt.clone())
                } else {
                    RelTuple::id3(s.clone(), pm.clone(), tgt.clone())
                }
            };
            if subj.name() == crate::model::ANY_USER {
                // Bind any_user to every live user.
                let users: Vec<EntityId> = domain.live_users(state).cloned().collect();
                for u in users {
                    if !state.contains_tuple(&mk3(&u)) {
                        out.push(GroundAction {
                            schema,
                            params: vec![ent(actor), ent(&u), perm(pm), ent(tgt)],
                        });
                    }
                }
            } else if !state.contains_tuple(&mk3(subj)) {
                out.push(GroundAction { schema, params: vec![ent(actor), ent(subj), perm(pm), ent(tgt)] });
            }
        }
    }

    // Wildcard activation.
    push_activations(domain, state, goal, &mut out);

    // Attack-enabling actions for the goal.
    push_attacks(domain, state, goal, &mut out);

    out.sort();
    out.dedup();
    out
}

fn push_activations(domain: &PlanningDomain, state: &IamState, goal: Goal, out: &mut Vec<GroundAction>) {
    let (id_perms, ds_perms) = activation_universes(domain, state, goal);
    let cat = domain.catalog();
    let fc = full_control();
    let any_u = EntityId::any_user();
    let any_d = EntityId::any_datastore();

    let id_targets: Vec<EntityId> = cat
        .identities()
        .filter(|e| domain.exists(&e.id, state))
        .map(|e| e.id.clone())
        .collect();
    let ds_targets: Vec<EntityId> = cat
        .datastores()
        .filter(|e| domain.exists(&e.id, state))
        .map(|e| e.id.clone())
        .collect();

    // Holders of wildcard-bearing tuples.
    let holders: BTreeSet<&EntityId> = state
        .tuples
        .iter()
        .filter(|t| t.perm() == &fc || t.target() == &any_u || t.target() == &any_d)
        .map(|t| t.holder())
        .collect();

    for id1 in holders {
        let has_fc_any_u = state.contains_tuple(&RelTuple::id3(id1.clone(), fc.clone(), any_u.clone()));
        let has_fc_any_d = state.contains_tuple(&RelTuple::ds3(id1.clone(), fc.clone(), any_d.clone()));

        for t in state.tuples_of(id1) {
            match t {
                RelTuple::Id3 { perm: pm, dst, .. } => {
                    if pm == &fc && !dst.is_sentinel() {
                        // full_control over a concrete identity.
                        for p in &id_perms {
                            push_activate_id(state, out, id1, p, dst);
                        }
                    } else if dst == &any_u && pm != &fc {
                        // Concrete permission over any_user.
                        for t2 in &id_targets {
                            push_activate_id(state, out, id1, pm, t2);
                        }
                    }
                }
                RelTuple::Ds3 { perm: pm, ds, .. } => {
                    if pm == &fc && !ds.is_sentinel() {
                        for p in &ds_perms {
                            push_activate_ds(state, out, id1, p, ds);
                        }
                    } else if ds == &any_d && pm != &fc {
                        for t2 in &ds_targets {
                            push_activate_ds(state, out, id1, pm, t2);
                        }
                    }
                }
                _ => {}
            }
        }
        if has_fc_any_u {
            for p in &id_perms {
                for t2 in &id_targets {
                    push_activate_id(state, out, id1, p, t2);
                }
            }
        }
        if has_fc_any_d {
            for p in &ds_perms {
                for t2 in &ds_targets {
                    push_activate_ds(state, out, id1, p, t2);
                }
            }
        }
    }
}

fn push_activate_id(state: &IamState, out: &mut Vec<GroundAction>, id1: &EntityId, pm: &PermissionName, id2: &EntityId) {
    if !state.contains_tuple(&RelTuple::id3(id1.clone(), pm.clone(), id2.clone())) {
        out.push(GroundAction { schema: Schema::ActivateId3, params: vec![ent(id1), perm(pm), ent(id2)] });
    }
}

fn push_activate_ds(state: &IamState, out: &mut Vec<GroundAction>, id1: &EntityId, pm: &PermissionName, ds: &EntityId) {
    if !state.contains_tuple(&RelTuple::ds3(id1.clone(), pm.clone(), ds.clone())) {
        out.push(GroundAction { schema: Schema::ActivateDs3, params: vec![ent(id1), perm(pm), ent(ds)] });
    }
}

fn push_attacks(domain: &PlanningDomain, state: &IamState, goal: Goal, out: &mut Vec<GroundAction>) {
    let cat = domain.catalog();
    let live_stores: Vec<EntityId> = cat
        .datastores()
        .filter(|e| domain.exists(&e.id, state))
        .map(|e| e.id.clone())
        .collect();

    for id in &state.compromised {
        match goal {
            Goal::Attack(AttackType::SensitiveDataExfiltration) => {
                for ds1 in live_stores.iter().filter(|d| state.is_sensitive(d)) {
                    let get = state.contains_tuple(&RelTuple::ds3(id.clone(), vocab::S3_GET_OBJECT, ds1.clone()));
                    if !get {
                        continue;
                    }
                    let del = state.contains_tuple(&RelTuple::ds3(id.clone(), vocab::S3_DELETE_OBJECT, ds1.clone()));
                    for ds2 in live_stores.iter().filter(|d| *d != ds1) {
                        if state.contains_tuple(&RelTuple::ds3(id.clone(), vocab::S3_PUT_OBJECT, ds2.clone())) {
                            out.push(GroundAction {
                                schema: Schema::CopyObject,
                                params: vec![ent(id), ent(ds1), ent(ds2)],
                            });
                            if del {
                                out.push(GroundAction {
                                    schema: Schema::MoveObject,
                                    params: vec![ent(id), ent(ds1), ent(ds2)],
                                });
                            }
                        }
                    }
                }
                push_create_public_bucket(domain, state, id, out);
            }
            Goal::Attack(AttackType::Impact) => {
                for t in state.tuples_of(id) {
                    match t {
                        RelTuple::Ds3 { perm: pm, ds, .. } if pm.as_str() == vocab::DELETE_BUCKET => {
                            if state.is_sensitive(ds) && !ds.is_sentinel() && domain.exists(ds, state) {
                                out.push(GroundAction {
                                    schema: Schema::DeleteBucket,
                                    params: vec![ent(id), ent(ds)],
                                });
                            }
                        }
                        RelTuple::Id3 { perm: pm, dst, .. } => {
                            let impact = vocab::token_def(pm.as_str())
                                .is_some_and(|d| d.role == TokenRole::ImpactIdentity);
                            if impact && !dst.is_sentinel() && domain.exists(dst, state) {
                                out.push(GroundAction {
                                    schema: Schema::EnableAttack,
                                    params: vec![ent(id), perm(pm), ent(dst)],
                                });
                            }
                        }
                        _ => {}
                    }
                }
            }
            Goal::Attack(AttackType::Persistence) => {
                for t in state.tuples_of(id) {
                    let pm = t.perm();
                    if matches!(t, RelTuple::Id3 { .. } | RelTuple::Ds3 { .. })
                        && vocab::token_def(pm.as_str()).is_some_and(|d| d.role == TokenRole::Persistence)
                    {
                        out.push(GroundAction {
                            schema: Schema::GainPersistence,
                            params: vec![ent(id), perm(pm), ent(t.target())],
                        });
                    }
                }
            }
            Goal::Attack(AttackType::LateralMovement) => {
                for t in state.tuples_of(id) {
                    if let RelTuple::Id3 { perm: pm, dst, .. } = t {
                        let login = vocab::token_def(pm.as_str())
                            .is_some_and(|d| d.role == TokenRole::LoginChange);
                        if login && dst != id && cat.is_user(dst) && !cat.is_dummy(dst) {
                            out.push(GroundAction {
                                schema: Schema::ChangeUserLogin,
                                params: vec![ent(id), perm(pm), ent(dst)],
                            });
                        }
                    }
                }
            }
            Goal::Attack(AttackType::PrivilegeEscalation) => {
                if state.contains_tuple(&RelTuple::id3(id.clone(), vocab::HAS_POLICY, EntityId::admin_policy())) {
                    out.push(GroundAction { schema: Schema::ReachAdminPolicy, params: vec![ent(id)] });
                }
            }
            Goal::Attack(AttackType::Ransomware) => {
                let witnesses: Vec<EntityId> = state
                    .tuples_of(id)
                    .filter_map(|t| match t {
                        RelTuple::Ds3 { perm: pm, ds, .. } if pm.as_str() == vocab::KMS_CREATE_KEY => {
                            Some(ds.clone())
                        }
                        _ => None,
                    })
                    .collect();
                if witnesses.is_empty() {
                    continue;
                }
                for ds in live_stores.iter().filter(|d| state.is_sensitive(d)) {
                    if cat.versioning_enabled(ds) || cat.mfa_delete_enabled(ds) {
                        continue;
                    }
                    if state.contains_tuple(&RelTuple::ds3(id.clone(), vocab::S3_PUT_OBJECT, ds.clone())) {
                        for w in &witnesses {
                            out.push(GroundAction {
                                schema: Schema::EncryptSensitiveData,
                                params: vec![ent(id), ent(ds), ent(w)],
                            });
                        }
                    }
                }
            }
            Goal::SetCover => {
                let covered = cat.datastores().filter(|e| !e.dummy).all(|e| {
                    state.contains_tuple(&RelTuple::ds3(id.clone(), "hasElement", e.id.clone()))
                });
                if covered {
                    out.push(GroundAction { schema: Schema::SetCoverAttack, params: vec![ent(id)] });
                }
            }
        }
    }
}

fn push_create_public_bucket(domain: &PlanningDomain, state: &IamState, id: &EntityId, out: &mut Vec<GroundAction>) {
    let Some(dummy) = domain.catalog().dummy_datastore() else {
        return;
    };
    if state.is_created(dummy) {
        return;
    }
    for t in state.tuples_of(id) {
        if let RelTuple::Ds3 { perm: pm, ds, .. } = t {
            if vocab::token_def(pm.as_str()).is_some_and(|d| d.role == TokenRole::CreateBucket) {
                out.push(GroundAction {
                    schema: Schema::CreatePublicBucket,
                    params: vec![ent(id), perm(pm), ent(ds), ent(dummy)],
                });
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ApplyError {
    #[error("action {0} is not applicable in this state")]
    NotApplicable(String),
}

/// Apply an action, returning the successor state. The action's
/// precondition must hold; violations are contract errors, never no-ops.
pub fn apply(domain: &PlanningDomain, state: &IamState, action: &GroundAction) -> Result<IamState, ApplyError> {
    use Param::{Entity, Perm};
    if !precondition_holds(domain, state, action) {
        return Err(ApplyError::NotApplicable(action.to_string()));
    }
    let mut next = state.clone();
    let p = &action.params;
    match (action.schema, p.as_slice()) {
        (Schema::SelectCompromisedUser, [Entity(id)]) => {
            next.compromised.insert(id.clone());
        }
        (Schema::PermFlowBulk, [Entity(src), Entity(dst)]) => {
            let moved: Vec<RelTuple> = state.tuples_of(src).map(|t| t.with_holder(dst.clone())).collect();
            for t in moved {
                next.insert_tuple(t);
            }
            record_flow_binding(domain, state, &mut next, src, dst);
        }
        (Schema::PermFlowId3, [Entity(src), Perm(pm), Entity(obj), Entity(dst)]) => {
            next.insert_tuple(RelTuple::id3(dst.clone(), pm.clone(), obj.clone()));
            record_flow_binding(domain, state, &mut next, src, dst);
        }
        (Schema::PermFlowDs3, [Entity(src), Perm(pm), Entity(obj), Entity(dst)]) => {
            next.insert_tuple(RelTuple::ds3(dst.clone(), pm.clone(), obj.clone()));
            record_flow_binding(domain, state, &mut next, src, dst);
        }
        (Schema::PermFlowId4, [Entity(dst), Entity(src), Entity(subj), Perm(pm), Entity(tgt)]) => {
            next.insert_tuple(RelTuple::id4(dst.clone(), subj.clone(), pm.clone(), tgt.clone()));
            record_flow_binding(domain, state, &mut next, src, dst);
        }
        (Schema::PermFlowDs4, [Entity(dst), Entity(src), Entity(subj), Perm(pm), Entity(tgt)]) => {
            next.insert_tuple(RelTuple::ds4(dst.clone(), subj.clone(), pm.clone(), tgt.clone()));
            record_flow_binding(domain, state, &mut next, src, dst);
        }
        (Schema::AddId3, [Entity(_), Entity(subj), Perm(pm), Entity(tgt)]) => {
            next.insert_tuple(RelTuple::id3(subj.clone(), pm.clone(), tgt.clone()));
        }
        (Schema::AddDs3, [Entity(_), Entity(subj), Perm(pm), Entity(tgt)]) => {
            next.insert_tuple(RelTuple::ds3(subj.clone(), pm.clone(), tgt.clone()));
        }
        (Schema::ActivateId3, [Entity(id1), Perm(pm), Entity(id2)]) => {
            next.insert_tuple(RelTuple::id3(id1.clone(), pm.clone(), id2.clone()));
        }
        (Schema::ActivateDs3, [Entity(id1), Perm(pm), Entity(ds)]) => {
            next.insert_tuple(RelTuple::ds3(id1.clone(), pm.clone(), ds.clone()));
        }
        (Schema::CopyObject, [Entity(_), Entity(_), Entity(ds2)]) => {
            next.sensitive.insert(ds2.clone());
            if domain.catalog().is_public(ds2, state) {
                next.attack_flags.insert(AttackType::SensitiveDataExfiltration);
            }
        }
        (Schema::MoveObject, [Entity(_), Entity(ds1), Entity(ds2)]) => {
            next.sensitive.remove(ds1);
            next.sensitive.insert(ds2.clone());
            if domain.catalog().is_public(ds2, state) {
                next.attack_flags.insert(AttackType::SensitiveDataExfiltration);
            }
        }
        (Schema::DeleteBucket, _) | (Schema::EnableAttack, _) => {
            next.attack_flags.insert(AttackType::Impact);
        }
        (Schema::CreatePublicBucket, [Entity(_), Perm(_), Entity(_), Entity(dummy)]) => {
            next.created_entities.insert(dummy.clone());
        }
        (Schema::EncryptSensitiveData, _) => {
            next.attack_flags.insert(AttackType::Ransomware);
        }
        (Schema::GainPersistence, _) => {
            next.attack_flags.insert(AttackType::Persistence);
            next.created_entities.insert(EntityId::dummy_user());
        }
        (Schema::ChangeUserLogin, _) => {
            next.attack_flags.insert(AttackType::LateralMovement);
        }
        (Schema::ReachAdminPolicy, _) => {
            next.attack_flags.insert(AttackType::PrivilegeEscalation);
        }
        (Schema::SetCoverAttack, _) => {
            next.attack_flags.insert_set_cover();
        }
        _ => unreachable!("precondition_holds admitted a malformed action"),
    }
    Ok(next)
}

/// Record `flow_bound[dst] = src` when the flow had to be justified by an
/// assume edge under the single-source constraint.
fn record_flow_binding(
    domain: &PlanningDomain,
    before: &IamState,
    next: &mut IamState,
    src: &EntityId,
    dst: &EntityId,
) {
    if domain.constraint == AssumeConstraint::SingleSource && !has_non_assume_edge(domain, before, src, dst) {
        next.flow_bound.insert(dst.clone(), src.clone());
    }
}

/// Whether `id` could fire some attack-enabling action of type `attack` in
/// `state` (the terminal action's precondition).
pub fn attack_precondition(domain: &PlanningDomain, state: &IamState, id: &EntityId, attack: AttackType) -> bool {
    if !state.is_compromised(id) {
        return false;
    }
    let mut candidates = Vec::new();
    push_attacks(domain, state, Goal::Attack(attack), &mut candidates);
    candidates
        .iter()
        .any(|a| matches!(&a.params[0], Param::Entity(actor) if actor == id))
}

/// Whether the goal's attack flag has been raised.
pub fn goal_satisfied(state: &IamState, goal: Goal) -> bool {
    match goal {
        Goal::Attack(a) => state.attack_flags.contains(a),
        Goal::SetCover => state.attack_flags.contains_set_cover(),
    }
}
