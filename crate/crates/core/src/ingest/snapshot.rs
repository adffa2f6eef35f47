//! The snapshot document: a parsed cloud inventory of identities,
//! datastores, policy documents, and their wiring.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{Datastore, EntityId, Identity, IdentityKind, RESERVED_NAMES};

/// Schema version accepted by [`parse_snapshot`].
pub const SNAPSHOT_SCHEMA: &str = "cloudlens-snapshot/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Effect {
    Allow,
    Deny,
}

/// One statement of an IAM policy. Action and resource patterns may contain
/// wildcards; the optional condition is preserved verbatim even when
/// unmodeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStatement {
    pub effect: Effect,
    pub actions: Vec<String>,
    pub resources: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<serde_json::Value>,
}

impl PolicyStatement {
    pub fn allow(actions: &[&str], resources: &[&str]) -> Self {
        PolicyStatement {
            effect: Effect::Allow,
            actions: actions.iter().map(|s| s.to_string()).collect(),
            resources: resources.iter().map(|s| s.to_string()).collect(),
            condition: None,
        }
    }

    pub fn deny(actions: &[&str], resources: &[&str]) -> Self {
        PolicyStatement { effect: Effect::Deny, ..PolicyStatement::allow(actions, resources) }
    }

    pub fn with_condition(mut self, condition: serde_json::Value) -> Self {
        self.condition = Some(condition);
        self
    }

    /// Look up a `StringEquals` request-tag condition value, the only
    /// condition form the model interprets.
    pub fn condition_tag(&self, key: &str) -> Option<&str> {
        self.condition
            .as_ref()?
            .get("StringEquals")?
            .get(format!("aws:RequestTag/{key}"))?
            .as_str()
    }
}

/// A named policy document with its ordered statements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub id: EntityId,
    pub statements: Vec<PolicyStatement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub identity: String,
    pub policy: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub user: String,
    pub group: String,
}

/// A trust-policy entry: `principal` (a name or glob pattern, `*` meaning
/// any user) may assume `role`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustEntry {
    pub principal: String,
    pub role: String,
}

/// A parsed cloud inventory. Every reference must resolve to a declared
/// entity or a sentinel; cycles in role-assumption chains are allowed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(default)]
    pub identities: Vec<Identity>,
    #[serde(default)]
    pub datastores: Vec<Datastore>,
    #[serde(default)]
    pub policies: Vec<PolicyDocument>,
    #[serde(default)]
    pub attachments: Vec<Attachment>,
    #[serde(default)]
    pub memberships: Vec<Membership>,
    #[serde(default)]
    pub trust: Vec<TrustEntry>,
}

fn default_schema() -> String {
    SNAPSHOT_SCHEMA.to_string()
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema `{0}`, expected `{SNAPSHOT_SCHEMA}`")]
    Schema(String),
    #[error("duplicate entity name `{0}`")]
    DuplicateName(String),
    #[error("`{0}` is a reserved name and cannot be declared")]
    ReservedName(String),
    #[error("{kind} reference `{name}` does not resolve to a declared {expected}")]
    DanglingReference { kind: &'static str, name: String, expected: &'static str },
    #[error("policy `{policy}` statement #{index} has an empty {field} list")]
    EmptyStatementField { policy: String, index: usize, field: &'static str },
    #[error("dummy datastore `{0}` must start non-public and non-sensitive")]
    DummyWithFlags(String),
    #[error("at most one dummy datastore may be declared, found `{0}` and `{1}`")]
    MultipleDummies(String, String),
    #[error("policies cannot be attached to policy `{0}`")]
    AttachmentToPolicy(String),
}

impl Snapshot {
    pub fn new() -> Self {
        Snapshot { schema: default_schema(), ..Default::default() }
    }

    fn kind_of(&self, name: &str) -> Option<&'static str> {
        for i in &self.identities {
            if i.id.name() == name {
                return Some(match i.kind {
                    IdentityKind::User => "user",
                    IdentityKind::Group => "group",
                    IdentityKind::Role => "role",
                    IdentityKind::Policy => "policy",
                });
            }
        }
        if self.policies.iter().any(|p| p.id.name() == name) {
            return Some("policy");
        }
        if self.datastores.iter().any(|d| d.id.name() == name) {
            return Some("datastore");
        }
        None
    }

    /// Check internal consistency: unique non-reserved names, resolvable
    /// references, well-formed statements and dummies.
    pub fn validate(&self) -> Result<(), SnapshotError> {
        if self.schema != SNAPSHOT_SCHEMA {
            return Err(SnapshotError::Schema(self.schema.clone()));
        }
        let mut names = BTreeSet::new();
        let declared = self
            .identities
            .iter()
            .map(|i| i.id.name())
            .chain(self.policies.iter().map(|p| p.id.name()))
            .chain(self.datastores.iter().map(|d| d.id.name()));
        for name in declared {
            if RESERVED_NAMES.contains(&name) {
                return Err(SnapshotError::ReservedName(name.to_string()));
            }
            if !names.insert(name) {
                return Err(SnapshotError::DuplicateName(name.to_string()));
            }
        }

        let mut dummy: Option<&str> = None;
        for ds in &self.datastores {
            if ds.is_dummy {
                if ds.is_public || ds.has_sensitive_data {
                    return Err(SnapshotError::DummyWithFlags(ds.id.name().to_string()));
                }
                if let Some(first) = dummy {
                    return Err(SnapshotError::MultipleDummies(first.to_string(), ds.id.name().to_string()));
                }
                dummy = Some(ds.id.name());
            }
        }

        for st in &self.policies {
            for (idx, s) in st.statements.iter().enumerate() {
                if s.actions.is_empty() {
                    return Err(SnapshotError::EmptyStatementField {
                        policy: st.id.name().to_string(),
                        index: idx + 1,
                        field: "actions",
                    });
                }
                if s.resources.is_empty() {
                    return Err(SnapshotError::EmptyStatementField {
                        policy: st.id.name().to_string(),
                        index: idx + 1,
                        field: "resources",
                    });
                }
            }
        }

        let dangling = |kind: &'static str, name: &str, expected: &'static str| SnapshotError::DanglingReference {
            kind,
            name: name.to_string(),
            expected,
        };
        for a in &self.attachments {
            match self.kind_of(&a.identity) {
                Some("policy") => return Err(SnapshotError::AttachmentToPolicy(a.identity.clone())),
                Some("user") | Some("group") | Some("role") => {}
                _ => return Err(dangling("attachment", &a.identity, "identity")),
            }
            if self.kind_of(&a.policy) != Some("policy") {
                return Err(dangling("attachment", &a.policy, "policy"));
            }
        }
        for m in &self.memberships {
            if self.kind_of(&m.user) != Some("user") {
                return Err(dangling("membership", &m.user, "user"));
            }
            if self.kind_of(&m.group) != Some("group") {
                return Err(dangling("membership", &m.group, "group"));
            }
        }
        for t in &self.trust {
            if t.role != "*" && self.kind_of(&t.role) != Some("role") {
                return Err(dangling("trust", &t.role, "role"));
            }
            let is_pattern = t.principal.contains('*') || t.principal.contains('?');
            if !is_pattern {
                match self.kind_of(&t.principal) {
                    Some("user") | Some("group") | Some("role") => {}
                    _ => return Err(dangling("trust", &t.principal, "identity")),
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        // Trailing newline keeps generated fixture files diff-friendly.
        let mut text = serde_json::to_string_pretty(self).expect("snapshot serializes");
        text.push('\n');
        text
    }
}

/// Parse and validate a snapshot document.
pub fn parse_snapshot(document: &str) -> Result<Snapshot, SnapshotError> {
    let snap: Snapshot = serde_json::from_str(document)?;
    snap.validate()?;
    Ok(snap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(name: &str) -> Identity {
        Identity { id: EntityId::named(name), kind: IdentityKind::User }
    }

    fn ident(name: &str, kind: IdentityKind) -> Identity {
        Identity { id: EntityId::named(name), kind }
    }

    fn store(name: &str) -> Datastore {
        Datastore {
            id: EntityId::named(name),
            is_public: false,
            has_sensitive_data: false,
            versioning_enabled: false,
            mfa_delete_enabled: false,
            is_dummy: false,
        }
    }

    #[test]
    fn four_entity_snapshot_parses() {
        let mut snap = Snapshot::new();
        snap.identities = vec![user("u1"), ident("g1", IdentityKind::Group), ident("r1", IdentityKind::Role)];
        snap.datastores = vec![store("ds1")];
        snap.memberships = vec![Membership { user: "u1".into(), group: "g1".into() }];
        let parsed = parse_snapshot(&snap.to_json()).unwrap();
        assert_eq!(parsed.identities.len(), 3);
        assert_eq!(parsed.datastores.len(), 1);
        assert_eq!(parsed.memberships.len(), 1);
    }

    #[test]
    fn empty_identity_list_is_valid() {
        let snap = parse_snapshot(&Snapshot::new().to_json()).unwrap();
        assert!(snap.identities.is_empty());
    }

    #[test]
    fn dangling_attachment_is_rejected() {
        let mut snap = Snapshot::new();
        snap.identities = vec![user("u1")];
        snap.attachments = vec![Attachment { identity: "u1".into(), policy: "ghost".into() }];
        let err = parse_snapshot(&snap.to_json()).unwrap_err();
        assert!(matches!(err, SnapshotError::DanglingReference { .. }), "{err}");
    }

    #[test]
    fn reserved_and_duplicate_names_are_rejected() {
        let mut snap = Snapshot::new();
        snap.identities = vec![user("any_user")];
        assert!(matches!(snap.validate(), Err(SnapshotError::ReservedName(_))));

        let mut snap = Snapshot::new();
        snap.identities = vec![user("x")];
        snap.datastores = vec![store("x")];
        assert!(matches!(snap.validate(), Err(SnapshotError::DuplicateName(_))));
    }

    #[test]
    fn schema_version_is_enforced() {
        let mut snap = Snapshot::new();
        snap.schema = "cloudlens-snapshot/0".into();
        assert!(matches!(snap.validate(), Err(SnapshotError::Schema(_))));
    }

    #[test]
    fn condition_tag_lookup_follows_the_request_tag_shape() {
        let s = PolicyStatement::allow(&["iam:AttachGroupPolicy"], &["g1"]).with_condition(serde_json::json!({
            "StringEquals": { "aws:RequestTag/policy-id": "PID" }
        }));
        assert_eq!(s.condition_tag("policy-id"), Some("PID"));
        assert_eq!(s.condition_tag("user-name"), None);
    }
}
