//! Core vocabulary of the relation-tuple model: entities, permissions,
//! 3-/4-ary relation tuples, and the IAM state container used as the
//! planner's search node.
//!
//! States are immutable values: every mutation returns (or builds) a new
//! state, so they can be shared freely across threads and used as keys in
//! duplicate-detection sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, LazyLock};

use serde::{Deserialize, Serialize};

/// Reserved name matching any user-kind identity.
pub const ANY_USER: &str = "any_user";
/// Reserved name matching any datastore.
pub const ANY_DATASTORE: &str = "any_datastore";
/// Reserved policy identity standing for an unrestricted policy.
pub const ADMIN_POLICY: &str = "adminPolicy";
/// Reserved placeholder datastore that an attacker may materialize.
pub const DUMMY_DATASTORE: &str = "dummy_datastore";
/// Reserved placeholder user that an attacker may materialize.
pub const DUMMY_USER: &str = "dummy_user";

/// Names a snapshot must not declare for itself.
pub const RESERVED_NAMES: &[&str] = &[ANY_USER, ANY_DATASTORE, ADMIN_POLICY, DUMMY_DATASTORE, DUMMY_USER];

static ANY_USER_ID: LazyLock<EntityId> = LazyLock::new(|| EntityId::named(ANY_USER));
static ANY_DATASTORE_ID: LazyLock<EntityId> = LazyLock::new(|| EntityId::named(ANY_DATASTORE));
static ADMIN_POLICY_ID: LazyLock<EntityId> = LazyLock::new(|| EntityId::named(ADMIN_POLICY));
static DUMMY_DATASTORE_ID: LazyLock<EntityId> = LazyLock::new(|| EntityId::named(DUMMY_DATASTORE));
static DUMMY_USER_ID: LazyLock<EntityId> = LazyLock::new(|| EntityId::named(DUMMY_USER));

/// Opaque identifier of an identity or datastore.
///
/// Names are unique within a snapshot across all entity kinds; the account
/// string may be empty for synthetic instances. Backed by shared strings so
/// tuples and states clone cheaply during search.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId {
    name: Arc<str>,
    account: Arc<str>,
}

impl EntityId {
    pub fn new(name: &str, account: &str) -> Self {
        EntityId { name: Arc::from(name), account: Arc::from(account) }
    }

    /// An id with an empty account, the common case for synthetic data.
    pub fn named(name: &str) -> Self {
        EntityId::new(name, "")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn account(&self) -> &str {
        &self.account
    }

    pub fn any_user() -> Self {
        ANY_USER_ID.clone()
    }

    pub fn any_datastore() -> Self {
        ANY_DATASTORE_ID.clone()
    }

    pub fn admin_policy() -> Self {
        ADMIN_POLICY_ID.clone()
    }

    pub fn dummy_datastore() -> Self {
        DUMMY_DATASTORE_ID.clone()
    }

    pub fn dummy_user() -> Self {
        DUMMY_USER_ID.clone()
    }

    pub fn is_sentinel(&self) -> bool {
        self.name() == ANY_USER || self.name() == ANY_DATASTORE
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

#[derive(Serialize, Deserialize)]
struct EntityIdRepr {
    name: String,
    #[serde(default)]
    account: String,
}

impl Serialize for EntityId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        EntityIdRepr { name: self.name().to_string(), account: self.account().to_string() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = EntityIdRepr::deserialize(d)?;
        Ok(EntityId::new(&repr.name, &repr.account))
    }
}

/// Kind of an identity. Policies are identities too: they can be the target
/// of `hasPolicy` tuples and permissions flow out of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IdentityKind {
    User,
    Group,
    Role,
    Policy,
}

/// Kind of any entity a tuple slot can reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityKind {
    User,
    Group,
    Role,
    Policy,
    Datastore,
}

impl From<IdentityKind> for EntityKind {
    fn from(k: IdentityKind) -> Self {
        match k {
            IdentityKind::User => EntityKind::User,
            IdentityKind::Group => EntityKind::Group,
            IdentityKind::Role => EntityKind::Role,
            IdentityKind::Policy => EntityKind::Policy,
        }
    }
}

impl EntityKind {
    pub fn is_datastore(self) -> bool {
        self == EntityKind::Datastore
    }

    pub fn is_identity(self) -> bool {
        !self.is_datastore()
    }
}

/// A cloud identity: user, group, role, or policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identity {
    pub id: EntityId,
    pub kind: IdentityKind,
}

/// A datastore (object storage bucket) with its security-relevant flags.
///
/// A dummy datastore is a creatable placeholder: it starts non-public,
/// non-sensitive and only becomes real once the attacker materializes it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Datastore {
    pub id: EntityId,
    #[serde(default)]
    pub is_public: bool,
    #[serde(default)]
    pub has_sensitive_data: bool,
    #[serde(default)]
    pub versioning_enabled: bool,
    #[serde(default)]
    pub mfa_delete_enabled: bool,
    #[serde(default)]
    pub is_dummy: bool,
}

/// Canonical permission token, e.g. `s3_GetObject`, `assumeRole`,
/// `full_control`. Tokens are drawn from the closed vocabulary in
/// [`crate::vocab`] plus any test-only extensions.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PermissionName(Arc<str>);

impl PermissionName {
    pub fn new(token: &str) -> Self {
        PermissionName(Arc::from(token))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for PermissionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for PermissionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for PermissionName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for PermissionName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Ok(PermissionName::new(&raw))
    }
}

impl From<&str> for PermissionName {
    fn from(s: &str) -> Self {
        PermissionName::new(s)
    }
}

/// A 3- or 4-ary permission relation, the atom of every IAM state.
///
/// * `Id3(src, perm, dst)` — `src` has `perm` over identity `dst`.
/// * `Ds3(src, perm, ds)` — `src` has `perm` over datastore `ds`.
/// * `Id4(actor, subj, perm, dst)` — `actor` may add `Id3(subj, perm, dst)`.
/// * `Ds4(actor, subj, perm, ds)` — `actor` may add `Ds3(subj, perm, ds)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelTuple {
    Id3 { src: EntityId, perm: PermissionName, dst: EntityId },
    Ds3 { src: EntityId, perm: PermissionName, ds: EntityId },
    Id4 { actor: EntityId, subj: EntityId, perm: PermissionName, dst: EntityId },
    Ds4 { actor: EntityId, subj: EntityId, perm: PermissionName, ds: EntityId },
}

impl RelTuple {
    pub fn id3(src: EntityId, perm: impl Into<PermissionName>, dst: EntityId) -> Self {
        RelTuple::Id3 { src, perm: perm.into(), dst }
    }

    pub fn ds3(src: EntityId, perm: impl Into<PermissionName>, ds: EntityId) -> Self {
        RelTuple::Ds3 { src, perm: perm.into(), ds }
    }

    pub fn id4(actor: EntityId, subj: EntityId, perm: impl Into<PermissionName>, dst: EntityId) -> Self {
        RelTuple::Id4 { actor, subj, perm: perm.into(), dst }
    }

    pub fn ds4(actor: EntityId, subj: EntityId, perm: impl Into<PermissionName>, ds: EntityId) -> Self {
        RelTuple::Ds4 { actor, subj, perm: perm.into(), ds }
    }

    /// The identity holding the permission (first slot).
    pub fn holder(&self) -> &EntityId {
        match self {
            RelTuple::Id3 { src, .. } | RelTuple::Ds3 { src, .. } => src,
            RelTuple::Id4 { actor, .. } | RelTuple::Ds4 { actor, .. } => actor,
        }
    }

    pub fn perm(&self) -> &PermissionName {
        match self {
            RelTuple::Id3 { perm, .. }
            | RelTuple::Ds3 { perm, .. }
            | RelTuple::Id4 { perm, .. }
            | RelTuple::Ds4 { perm, .. } => perm,
        }
    }

    /// The final slot: the entity the permission applies to.
    pub fn target(&self) -> &EntityId {
        match self {
            RelTuple::Id3 { dst, .. } => dst,
            RelTuple::Ds3 { ds, .. } => ds,
            RelTuple::Id4 { dst, .. } => dst,
            RelTuple::Ds4 { ds, .. } => ds,
        }
    }

    /// The subject slot of a 4-tuple, if any.
    pub fn subject(&self) -> Option<&EntityId> {
        match self {
            RelTuple::Id4 { subj, .. } | RelTuple::Ds4 { subj, .. } => Some(subj),
            _ => None,
        }
    }

    /// True for `Ds3`/`Ds4`, whose final slot references a datastore.
    pub fn targets_datastore(&self) -> bool {
        matches!(self, RelTuple::Ds3 { .. } | RelTuple::Ds4 { .. })
    }

    /// Rebind the holder slot, keeping everything else. This is the tuple a
    /// permission flow adds for the flow target.
    pub fn with_holder(&self, new_holder: EntityId) -> RelTuple {
        match self {
            RelTuple::Id3 { perm, dst, .. } => RelTuple::Id3 { src: new_holder, perm: perm.clone(), dst: dst.clone() },
            RelTuple::Ds3 { perm, ds, .. } => RelTuple::Ds3 { src: new_holder, perm: perm.clone(), ds: ds.clone() },
            RelTuple::Id4 { subj, perm, dst, .. } => {
                RelTuple::Id4 { actor: new_holder, subj: subj.clone(), perm: perm.clone(), dst: dst.clone() }
            }
            RelTuple::Ds4 { subj, perm, ds, .. } => {
                RelTuple::Ds4 { actor: new_holder, subj: subj.clone(), perm: perm.clone(), ds: ds.clone() }
            }
        }
    }
}

impl fmt::Debug for RelTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::textio::format_tuple_line(self))
    }
}

/// The closed set of attack objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackType {
    SensitiveDataExfiltration,
    Impact,
    Persistence,
    LateralMovement,
    PrivilegeEscalation,
    Ransomware,
}

impl AttackType {
    pub const ALL: [AttackType; 6] = [
        AttackType::SensitiveDataExfiltration,
        AttackType::Impact,
        AttackType::Persistence,
        AttackType::LateralMovement,
        AttackType::PrivilegeEscalation,
        AttackType::Ransomware,
    ];

    /// Stable snake_case name, also used as the PDDL goal predicate.
    pub fn name(self) -> &'static str {
        match self {
            AttackType::SensitiveDataExfiltration => "sensitive_data_exfiltration",
            AttackType::Impact => "impact",
            AttackType::Persistence => "persistence",
            AttackType::LateralMovement => "lateral_movement",
            AttackType::PrivilegeEscalation => "privilege_escalation",
            AttackType::Ransomware => "ransomware",
        }
    }

    pub fn from_name(name: &str) -> Option<AttackType> {
        AttackType::ALL.iter().copied().find(|a| a.name() == name)
    }

    fn bit(self) -> u8 {
        match self {
            AttackType::SensitiveDataExfiltration => 1 << 0,
            AttackType::Impact => 1 << 1,
            AttackType::Persistence => 1 << 2,
            AttackType::LateralMovement => 1 << 3,
            AttackType::PrivilegeEscalation => 1 << 4,
            AttackType::Ransomware => 1 << 5,
        }
    }
}

impl fmt::Display for AttackType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const SETCOVER_BIT: u8 = 1 << 6;

/// Set of attack flags raised in a state. Includes one extra test-only bit
/// for the set-cover reduction goal, which is not a user-facing attack type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttackFlags(u8);

impl AttackFlags {
    pub fn empty() -> Self {
        AttackFlags(0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, attack: AttackType) -> bool {
        self.0 & attack.bit() != 0
    }

    pub fn insert(&mut self, attack: AttackType) {
        self.0 |= attack.bit();
    }

    pub fn contains_set_cover(self) -> bool {
        self.0 & SETCOVER_BIT != 0
    }

    pub fn insert_set_cover(&mut self) {
        self.0 |= SETCOVER_BIT;
    }

    pub fn iter(self) -> impl Iterator<Item = AttackType> {
        AttackType::ALL.into_iter().filter(move |a| self.contains(*a))
    }
}

/// The IAM state: the set of relation tuples plus status predicates.
///
/// Structural equality over all fields is what the planner's duplicate
/// detection relies on, so every field uses an ordered container.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IamState {
    /// The permission relations currently true.
    pub tuples: BTreeSet<RelTuple>,
    /// Identities under attacker control.
    pub compromised: BTreeSet<EntityId>,
    /// Role-assumption binding per flow target, recorded only under the
    /// single-source assume constraint: once `target -> source` is bound,
    /// further assume-justified flows into `target` must come from `source`.
    pub flow_bound: BTreeMap<EntityId, EntityId>,
    /// Attack goals already achieved.
    pub attack_flags: AttackFlags,
    /// Dummy entities materialized so far.
    pub created_entities: BTreeSet<EntityId>,
    /// Datastores currently holding sensitive data. Mutable state because a
    /// move action transfers sensitivity between stores.
    pub sensitive: BTreeSet<EntityId>,
}

impl IamState {
    pub fn new() -> Self {
        IamState::default()
    }

    /// Insert a tuple, returning whether the state changed. Idempotent.
    pub fn insert_tuple(&mut self, t: RelTuple) -> bool {
        self.tuples.insert(t)
    }

    /// Functional form of [`IamState::insert_tuple`].
    pub fn with_tuple(mut self, t: RelTuple) -> Self {
        self.insert_tuple(t);
        self
    }

    pub fn contains_tuple(&self, t: &RelTuple) -> bool {
        self.tuples.contains(t)
    }

    pub fn is_compromised(&self, id: &EntityId) -> bool {
        self.compromised.contains(id)
    }

    pub fn is_sensitive(&self, ds: &EntityId) -> bool {
        self.sensitive.contains(ds)
    }

    pub fn is_created(&self, id: &EntityId) -> bool {
        self.created_entities.contains(id)
    }

    /// Tuples held by `id` (first slot).
    pub fn tuples_of<'a>(&'a self, id: &'a EntityId) -> impl Iterator<Item = &'a RelTuple> {
        self.tuples.iter().filter(move |t| t.holder() == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(name: &str) -> EntityId {
        EntityId::named(name)
    }

    #[test]
    fn insert_is_idempotent() {
        let t = RelTuple::id3(u("u1"), "belongsTo", u("g1"));
        let s1 = IamState::new().with_tuple(t.clone());
        let s2 = s1.clone().with_tuple(t.clone());
        assert_eq!(s1, s2);
        assert!(s2.contains_tuple(&t));
    }

    #[test]
    fn insert_singleton_into_empty_state() {
        let t = RelTuple::id3(u("u1"), "belongsTo", u("g1"));
        let s = IamState::new().with_tuple(t.clone());
        assert_eq!(s.tuples.len(), 1);
        assert!(s.contains_tuple(&t));
    }

    #[test]
    fn contains_requires_exact_match() {
        let t = RelTuple::id3(u("u1"), "belongsTo", u("g1"));
        let other = RelTuple::id3(u("u1"), "belongsTo", u("g2"));
        let s = IamState::new().with_tuple(t.clone());
        assert!(s.contains_tuple(&t));
        assert!(!s.contains_tuple(&other));
        assert!(!IamState::new().contains_tuple(&t));
    }

    #[test]
    fn equal_states_hash_equal() {
        use std::collections::hash_map::DefaultHasher;
        use std::hash::{Hash, Hasher};

        let a = RelTuple::id3(u("u1"), "belongsTo", u("g1"));
        let b = RelTuple::ds3(u("u1"), "s3_GetObject", u("ds1"));
        // Same content, different insertion order.
        let s1 = IamState::new().with_tuple(a.clone()).with_tuple(b.clone());
        let s2 = IamState::new().with_tuple(b).with_tuple(a);
        assert_eq!(s1, s2);
        let hash = |s: &IamState| {
            let mut h = DefaultHasher::new();
            s.hash(&mut h);
            h.finish()
        };
        assert_eq!(hash(&s1), hash(&s2));
    }

    #[test]
    fn attack_flags_roundtrip() {
        let mut flags = AttackFlags::empty();
        assert!(!flags.contains(AttackType::Ransomware));
        flags.insert(AttackType::Ransomware);
        flags.insert(AttackType::Impact);
        assert!(flags.contains(AttackType::Ransomware));
        assert!(flags.contains(AttackType::Impact));
        assert!(!flags.contains(AttackType::Persistence));
        assert_eq!(flags.iter().count(), 2);
        assert!(!flags.contains_set_cover());
        flags.insert_set_cover();
        assert!(flags.contains_set_cover());
        assert_eq!(flags.iter().count(), 2);
    }
}
