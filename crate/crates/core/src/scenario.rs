//! Deterministic generators: the worked example scenarios, seeded random
//! snapshots, and the set-cover reduction with its brute-force oracle.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::catalog::EntityCatalog;
use crate::ingest::{Attachment, Membership, PolicyDocument, PolicyStatement, Snapshot, TrustEntry};
use crate::model::{AttackType, Datastore, EntityId, IamState, Identity, IdentityKind, RelTuple};
use crate::plan::{AssumeConstraint, FlowMode, PlanningDomain};

/// The named example scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioName {
    RansomwareListing,
    ImpactListing,
    ExfiltrationListing,
    AdminChainListing,
    FlowWalkthrough,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] = [
        ScenarioName::RansomwareListing,
        ScenarioName::ImpactListing,
        ScenarioName::ExfiltrationListing,
        ScenarioName::AdminChainListing,
        ScenarioName::FlowWalkthrough,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioName::RansomwareListing => "ransomware_listing",
            ScenarioName::ImpactListing => "impact_listing",
            ScenarioName::ExfiltrationListing => "exfiltration_listing",
            ScenarioName::AdminChainListing => "admin_chain_listing",
            ScenarioName::FlowWalkthrough => "flow_walkthrough",
        }
    }

    pub fn from_name(name: &str) -> Option<ScenarioName> {
        ScenarioName::ALL.iter().copied().find(|s| s.name() == name)
    }
}

/// A scenario with its expected outcome: the goal it demonstrates, the
/// pinned optimal plan cost, and the flow mode that cost was pinned under.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: ScenarioName,
    pub snapshot: Snapshot,
    pub goal: AttackType,
    pub optimal_cost: usize,
    pub mode: FlowMode,
}

impl Scenario {
    /// Compile the snapshot and assemble a planning domain in the
    /// scenario's pinned mode.
    pub fn planning_setup(&self) -> (PlanningDomain, IamState) {
        let comp = crate::ingest::compile(&self.snapshot).expect("scenarios are valid");
        (
            PlanningDomain::new(comp.catalog, self.mode, AssumeConstraint::Unrestricted),
            comp.initial,
        )
    }
}

fn user(name: &str) -> Identity {
    Identity { id: EntityId::named(name), kind: IdentityKind::User }
}

fn group(name: &str) -> Identity {
    Identity { id: EntityId::named(name), kind: IdentityKind::Group }
}

fn role(name: &str) -> Identity {
    Identity { id: EntityId::named(name), kind: IdentityKind::Role }
}

fn store(name: &str, sensitive: bool, public: bool) -> Datastore {
    Datastore {
        id: EntityId::named(name),
        is_public: public,
        has_sensitive_data: sensitive,
        versioning_enabled: false,
        mfa_delete_enabled: false,
        is_dummy: false,
    }
}

fn policy(name: &str, statements: Vec<PolicyStatement>) -> PolicyDocument {
    PolicyDocument { id: EntityId::named(name), statements }
}

fn attach(identity: &str, policy: &str) -> Attachment {
    Attachment { identity: identity.into(), policy: policy.into() }
}

/// Build one of the example scenarios.
pub fn scenario(name: ScenarioName) -> Scenario {
    match name {
        ScenarioName::RansomwareListing => {
            // A user holds object-level access to a sensitive bucket and may
            // assume a role with blanket key-management access. Versioning
            // and MFA delete are off, the stated prerequisite.
            let mut snap = Snapshot::new();
            snap.identities = vec![user("user_1"), role("keyManagementRole")];
            snap.datastores = vec![store("sensitiveDataBucket", true, false)];
            snap.policies = vec![
                policy(
                    "object_and_assume_policy",
                    vec![
                        PolicyStatement::allow(&["s3:*Object"], &["s3:sensitiveDataBucket"]),
                        PolicyStatement::allow(&["sts:AssumeRole"], &["iam:keyManagementRole"]),
                    ],
                ),
                policy("key_management_policy", vec![PolicyStatement::allow(&["kms:*Key*"], &["*"])]),
            ];
            snap.attachments = vec![
                attach("user_1", "object_and_assume_policy"),
                attach("keyManagementRole", "key_management_policy"),
            ];
            Scenario {
                name,
                snapshot: snap,
                goal: AttackType::Ransomware,
                optimal_cost: 3,
                mode: FlowMode::PerTuple,
            }
        }
        ScenarioName::ImpactListing => {
            // user_181 has comprehensive (full_control) access rights over a
            // bucket that holds sensitive data.
            let mut snap = Snapshot::new();
            snap.identities = vec![user("user_181")];
            snap.datastores = vec![store("data_store_71", true, false)];
            snap.policies = vec![policy(
                "full_access_data_store_71",
                vec![PolicyStatement::allow(&["*"], &["arn:aws:s3:data_store_71"])],
            )];
            snap.attachments = vec![attach("user_181", "full_access_data_store_71")];
            Scenario { name, snapshot: snap, goal: AttackType::Impact, optimal_cost: 3, mode: FlowMode::PerTuple }
        }
        ScenarioName::ExfiltrationListing => {
            // user_0 can read a sensitive store and write a public one.
            let mut snap = Snapshot::new();
            snap.identities = vec![user("user_0")];
            snap.datastores =
                vec![store("data_store_0", true, false), store("data_store_138", false, true)];
            snap.policies = vec![policy(
                "object_access",
                vec![
                    PolicyStatement::allow(&["s3:GetObject"], &["arn:aws:s3:data_store_0"]),
                    PolicyStatement::allow(&["s3:PutObject"], &["arn:aws:s3:data_store_138"]),
                ],
            )];
            snap.attachments = vec![attach("user_0", "object_access")];
            Scenario {
                name,
                snapshot: snap,
                goal: AttackType::SensitiveDataExfiltration,
                optimal_cost: 2,
                mode: FlowMode::PerTuple,
            }
        }
        ScenarioName::AdminChainListing => {
            // user_9 assumes role_10, which assumes role_13, which may
            // attach the unrestricted admin policy to role_10.
            let mut snap = Snapshot::new();
            snap.identities = vec![user("user_9"), role("role_10"), role("role_13")];
            snap.policies = vec![policy(
                "attach_role_policy",
                vec![PolicyStatement::allow(&["iam:AttachRolePolicy"], &["arn:aws:iam:role_10"])],
            )];
            snap.attachments = vec![attach("role_13", "attach_role_policy")];
            snap.trust = vec![
                TrustEntry { principal: "user_9".into(), role: "role_10".into() },
                TrustEntry { principal: "role_10".into(), role: "role_13".into() },
            ];
            Scenario {
                name,
                snapshot: snap,
                goal: AttackType::PrivilegeEscalation,
                optimal_cost: 6,
                mode: FlowMode::PerTuple,
            }
        }
        ScenarioName::FlowWalkthrough => {
            // u1 belongs to g1; g1 may let any user assume r1; r1 can delete
            // ds1. The bucket is marked sensitive so deletion constitutes
            // impact.
            let mut snap = Snapshot::new();
            snap.identities = vec![user("u1"), group("g1"), role("r1")];
            snap.datastores = vec![store("ds1", true, false)];
            snap.policies = vec![
                policy(
                    "assume_role_management",
                    vec![PolicyStatement::allow(&["iam:UpdateAssumeRolePolicy"], &["arn:aws:iam:r1"])],
                ),
                policy("bucket_deletion", vec![PolicyStatement::allow(&["s3:DeleteBucket"], &["arn:aws:s3:ds1"])]),
            ];
            snap.attachments = vec![attach("g1", "assume_role_management"), attach("r1", "bucket_deletion")];
            snap.memberships = vec![Membership { user: "u1".into(), group: "g1".into() }];
            Scenario { name, snapshot: snap, goal: AttackType::Impact, optimal_cost: 5, mode: FlowMode::PerTuple }
        }
    }
}

/// A set-cover instance: `n` elements and `m` candidate subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetCoverInstance {
    pub universe: Vec<String>,
    pub subsets: Vec<(String, BTreeSet<String>)>,
}

impl SetCoverInstance {
    pub fn new(universe: Vec<String>, subsets: Vec<(String, BTreeSet<String>)>) -> Self {
        assert!(universe.len() <= 20, "oracle instances are capped at 20 elements");
        assert!(subsets.len() <= 20, "oracle enumeration is exponential in subset count");
        SetCoverInstance { universe, subsets }
    }

    /// Random instance with elements drawn into subsets independently.
    pub fn random(seed: u64, n: usize, m: usize, membership_prob: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let universe: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let subsets = (0..m)
            .map(|j| {
                let members: BTreeSet<String> =
                    universe.iter().filter(|_| rng.gen::<f64>() < membership_prob).cloned().collect();
                (format!("s{j}"), members)
            })
            .collect();
        SetCoverInstance::new(universe, subsets)
    }
}

/// Exact minimum cover size by exhaustive enumeration of subset selections,
/// smallest cardinality first. `None` means the instance is uncoverable.
pub fn brute_force_min_cover(inst: &SetCoverInstance) -> Option<usize> {
    let m = inst.subsets.len();
    let want: BTreeSet<&str> = inst.universe.iter().map(String::as_str).collect();
    if want.is_empty() {
        return Some(0);
    }
    let mut best: Option<usize> = None;
    for mask in 0u32..(1 << m) {
        let size = mask.count_ones() as usize;
        if best.is_some_and(|b| size >= b) {
            continue;
        }
        let mut covered: BTreeSet<&str> = BTreeSet::new();
        for (j, (_, members)) in inst.subsets.iter().enumerate() {
            if mask & (1 << j) != 0 {
                covered.extend(members.iter().map(String::as_str));
            }
        }
        if want.iter().all(|v| covered.contains(v)) {
            best = Some(size);
        }
    }
    best
}

/// Reduction state: identity `S` is pre-compromised and holds `canAssume`
/// over each subset identity; each subset identity holds `hasElement` over
/// its member datastores. `canAssume` is registered as flow-activating in
/// the returned domain, and the goal is the test-only set-cover attack whose
/// precondition is the conjunction over all elements. With unit costs the
/// optimal plan is one bulk flow per chosen subset plus the terminal action.
pub fn set_cover_snapshot(inst: &SetCoverInstance) -> (PlanningDomain, IamState) {
    let mut catalog = EntityCatalog::new();
    let s_id = EntityId::named("S");
    catalog.add_identity(s_id.clone(), IdentityKind::User).expect("fresh catalog");
    for (name, _) in &inst.subsets {
        catalog.add_identity(EntityId::named(name), IdentityKind::Role).expect("unique subset names");
    }
    for v in &inst.universe {
        catalog
            .add_datastore(&Datastore {
                id: EntityId::named(v),
                is_public: false,
                has_sensitive_data: false,
                versioning_enabled: false,
                mfa_delete_enabled: false,
                is_dummy: false,
            })
            .expect("unique element names");
    }

    let mut initial = IamState::new();
    initial.compromised.insert(s_id.clone());
    for (name, members) in &inst.subsets {
        let subset_id = EntityId::named(name);
        initial.insert_tuple(RelTuple::id3(s_id.clone(), "canAssume", subset_id.clone()));
        for v in members {
            initial.insert_tuple(RelTuple::ds3(subset_id.clone(), "hasElement", EntityId::named(v)));
        }
    }

    let domain = PlanningDomain::new(catalog, FlowMode::Bulk, AssumeConstraint::Unrestricted)
        .with_flow_permission("canAssume")
        .with_extra_token("hasElement", crate::vocab::TargetFamily::Datastore);
    (domain, initial)
}

/// Shape parameters for the random snapshot generator. Identical parameters
/// always produce identical snapshots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    pub seed: u64,
    pub users: usize,
    pub groups: usize,
    pub roles: usize,
    pub datastores: usize,
    pub policies: usize,
    /// Probability of each (user, group) membership.
    pub membership_density: f64,
    /// Probability of each (principal, role) trust edge; principals are
    /// users and other roles.
    pub trust_density: f64,
    /// Probability of each (identity, policy) attachment.
    pub attachment_density: f64,
    /// Probability of each (policy, action, datastore) grant.
    pub grant_density: f64,
    pub sensitive_fraction: f64,
    pub public_fraction: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            seed: 0,
            users: 3,
            groups: 1,
            roles: 2,
            datastores: 2,
            policies: 2,
            membership_density: 0.3,
            trust_density: 0.25,
            attachment_density: 0.4,
            grant_density: 0.3,
            sensitive_fraction: 0.5,
            public_fraction: 0.25,
        }
    }
}

/// Actions the generator grants over datastores.
pub const GENERATED_ACTIONS: [&str; 5] =
    ["s3:GetObject", "s3:PutObject", "s3:DeleteObject", "s3:DeleteBucket", "kms:CreateKey"];

/// Seeded random snapshot with the requested shape. Draw order is fixed
/// (memberships, trust, attachments, grants) so outputs are reproducible.
pub fn random_snapshot(params: &GenParams) -> Snapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut snap = Snapshot::new();

    let users: Vec<String> = (0..params.users).map(|i| format!("user_{i}")).collect();
    let groups: Vec<String> = (0..params.groups).map(|i| format!("group_{i}")).collect();
    let roles: Vec<String> = (0..params.roles).map(|i| format!("role_{i}")).collect();
    let stores: Vec<String> = (0..params.datastores).map(|i| format!("data_store_{i}")).collect();
    let policies: Vec<String> = (0..params.policies).map(|i| format!("policy_{i}")).collect();

    snap.identities.extend(users.iter().map(|n| user(n)));
    snap.identities.extend(groups.iter().map(|n| group(n)));
    snap.identities.extend(roles.iter().map(|n| role(n)));

    let sensitive_count = (params.sensitive_fraction * params.datastores as f64).round() as usize;
    let public_count = (params.public_fraction * params.datastores as f64).round() as usize;
    for (i, name) in stores.iter().enumerate() {
        let sensitive = i < sensitive_count;
        let public = i >= params.datastores.saturating_sub(public_count);
        snap.datastores.push(store(name, sensitive, public));
    }

    for u in &users {
        for g in &groups {
            if rng.gen::<f64>() < params.membership_density {
                snap.memberships.push(Membership { user: u.clone(), group: g.clone() });
            }
        }
    }
    for principal in users.iter().chain(roles.iter()) {
        for r in &roles {
            if principal == r {
                continue;
            }
            if rng.gen::<f64>() < params.trust_density {
                snap.trust.push(TrustEntry { principal: principal.clone(), role: r.clone() });
            }
        }
    }
    for identity in users.iter().chain(groups.iter()).chain(roles.iter()) {
        for p in &policies {
            if rng.gen::<f64>() < params.attachment_density {
                snap.attachments.push(Attachment { identity: identity.clone(), policy: p.clone() });
            }
        }
    }
    for p in &policies {
        let mut statements = Vec::new();
        for action in GENERATED_ACTIONS {
            let resources: Vec<&str> = stores
                .iter()
                .filter(|_| rng.gen::<f64>() < params.grant_density)
                .map(String::as_str)
                .collect();
            if !resources.is_empty() {
                statements.push(PolicyStatement::allow(&[action], &resources));
            }
        }
        if statements.is_empty() {
            // Statements must be non-empty lists; keep the policy harmless.
            statements.push(PolicyStatement::allow(&["s3:GetObject"], &["none_declared_*"]));
        }
        snap.policies.push(policy(p, statements));
    }
    snap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::compile;

    #[test]
    fn scenarios_compile_cleanly() {
        for name in ScenarioName::ALL {
            let sc = scenario(name);
            sc.snapshot.validate().unwrap_or_else(|e| panic!("{}: {e}", name.name()));
            let comp = compile(&sc.snapshot).unwrap();
            assert!(comp.report.tuples_emitted > 0, "{} compiled empty", name.name());
        }
    }

    #[test]
    fn brute_force_cover_on_the_worked_example() {
        // V={v1,v2,v3}, S1={v1,v2}, S2={v3}, S3={v2,v3}: minimum cover 2.
        let inst = SetCoverInstance::new(
            vec!["v1".into(), "v2".into(), "v3".into()],
            vec![
                ("s1".into(), ["v1", "v2"].into_iter().map(String::from).collect()),
                ("s2".into(), ["v3"].into_iter().map(String::from).collect()),
                ("s3".into(), ["v2", "v3"].into_iter().map(String::from).collect()),
            ],
        );
        assert_eq!(brute_force_min_cover(&inst), Some(2));
    }

    #[test]
    fn brute_force_cover_edge_cases() {
        let empty = SetCoverInstance::new(vec![], vec![]);
        assert_eq!(brute_force_min_cover(&empty), Some(0));
        let uncoverable = SetCoverInstance::new(vec!["v1".into()], vec![("s1".into(), BTreeSet::new())]);
        assert_eq!(brute_force_min_cover(&uncoverable), None);
    }

    #[test]
    fn same_seed_same_snapshot() {
        let params = GenParams { seed: 42, ..GenParams::default() };
        assert_eq!(random_snapshot(&params), random_snapshot(&params));
        let other = GenParams { seed: 43, ..params };
        assert_ne!(random_snapshot(&params), random_snapshot(&other));
    }

    #[test]
    fn zero_densities_yield_relation_free_snapshot() {
        let params = GenParams {
            seed: 7,
            membership_density: 0.0,
            trust_density: 0.0,
            attachment_density: 0.0,
            grant_density: 0.0,
            ..GenParams::default()
        };
        let snap = random_snapshot(&params);
        assert!(snap.memberships.is_empty());
        assert!(snap.trust.is_empty());
        assert!(snap.attachments.is_empty());
        let comp = compile(&snap).unwrap();
        assert!(comp.initial.tuples.is_empty());
    }

    #[test]
    fn full_densities_enumerate_every_edge() {
        let params = GenParams {
            seed: 1,
            users: 2,
            groups: 2,
            roles: 2,
            datastores: 2,
            policies: 2,
            membership_density: 1.0,
            trust_density: 1.0,
            attachment_density: 1.0,
            grant_density: 1.0,
            sensitive_fraction: 1.0,
            public_fraction: 0.0,
        };
        let snap = random_snapshot(&params);
        assert_eq!(snap.memberships.len(), 2 * 2);
        // Principals are users and other roles: u*r + r*(r-1).
        assert_eq!(snap.trust.len(), 2 * 2 + 2);
        assert_eq!(snap.attachments.len(), (2 + 2 + 2) * 2);
        for p in &snap.policies {
            assert_eq!(p.statements.len(), GENERATED_ACTIONS.len());
            for s in &p.statements {
                assert_eq!(s.resources.len(), 2);
            }
        }
    }
}
