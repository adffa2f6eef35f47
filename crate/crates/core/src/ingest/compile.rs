//! Compile a snapshot into the initial IAM state: structural tuples from
//! memberships, attachments, and trust, plus the expansion of every Allow
//! statement on an attached policy, with Deny subtraction.

use std::collections::BTreeSet;

use crate::catalog::EntityCatalog;
use crate::ingest::snapshot::{Effect, PolicyStatement, Snapshot, SnapshotError, TrustEntry};
use crate::model::{EntityId, IamState, PermissionName, RelTuple};
use crate::vocab::{self, ActionExpansion, Api4Def, TargetFamily, Tuple4Shape};

/// A statement (or part of one) that compilation could not model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedStatement {
    pub locator: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompilationReport {
    pub tuples_emitted: usize,
    pub statements_skipped: Vec<SkippedStatement>,
    pub deny_subtractions: usize,
}

/// Result of compiling a snapshot: the entity universe, the initial state,
/// and the diagnostics report.
#[derive(Debug, Clone)]
pub struct Compilation {
    pub catalog: EntityCatalog,
    pub initial: IamState,
    pub report: CompilationReport,
}

/// Strip ARN-style prefixes from a resource pattern: the name is the last
/// non-empty `:`- or `/`-separated segment.
fn resource_name(pattern: &str) -> &str {
    pattern
        .rsplit([':', '/'])
        .find(|seg| !seg.is_empty())
        .unwrap_or(pattern)
}

/// Expand a resource pattern against the snapshot's declared entities of one
/// family. A bare `*` (or `*` final segment) maps to the family's sentinel;
/// concrete names resolve exactly; globs resolve against declared names.
pub fn expand_resource_pattern(pattern: &str, family: TargetFamily, snapshot: &Snapshot) -> BTreeSet<EntityId> {
    let name = resource_name(pattern);
    let mut out = BTreeSet::new();
    if name == "*" {
        out.insert(match family {
            TargetFamily::Identity => EntityId::any_user(),
            TargetFamily::Datastore => EntityId::any_datastore(),
        });
        return out;
    }
    let is_glob = name.contains('*') || name.contains('?');
    let mut try_add = |id: &EntityId| {
        if is_glob {
            if vocab::glob_match(name, id.name()) {
                out.insert(id.clone());
            }
        } else if id.name() == name {
            out.insert(id.clone());
        }
    };
    match family {
        TargetFamily::Identity => {
            for i in &snapshot.identities {
                try_add(&i.id);
            }
            for p in &snapshot.policies {
                try_add(&p.id);
            }
        }
        TargetFamily::Datastore => {
            for d in &snapshot.datastores {
                try_add(&d.id);
            }
        }
    }
    out
}

fn trust_principals(entry: &TrustEntry, snapshot: &Snapshot) -> Vec<EntityId> {
    if entry.principal == "*" {
        return vec![EntityId::any_user()];
    }
    let is_glob = entry.principal.contains('*') || entry.principal.contains('?');
    if !is_glob {
        return snapshot
            .identities
            .iter()
            .filter(|i| i.id.name() == entry.principal)
            .map(|i| i.id.clone())
            .collect();
    }
    snapshot
        .identities
        .iter()
        .filter(|i| vocab::glob_match(&entry.principal, i.id.name()))
        .map(|i| i.id.clone())
        .collect()
}

struct Compiler<'a> {
    snapshot: &'a Snapshot,
    tuples: BTreeSet<RelTuple>,
    skipped: Vec<SkippedStatement>,
    needs_admin_policy: bool,
}

impl Compiler<'_> {
    fn skip(&mut self, locator: String, reason: String) {
        self.skipped.push(SkippedStatement { locator, reason });
    }

    /// Emit the tuples of one Allow statement for `holder`.
    fn allow_statement(&mut self, holder: &EntityId, stmt: &PolicyStatement, locator: &str) {
        let mut produced_any = false;
        for action in &stmt.actions {
            let exp: ActionExpansion = vocab::expand_action_pattern(action);
            if exp.is_empty() {
                self.skip(locator.to_string(), format!("unmodeled action `{action}`"));
                continue;
            }
            for resource in &stmt.resources {
                let mut produced_here = false;
                if exp.full_control {
                    // The bare wildcard grants hold-anything over both
                    // resource families.
                    for target in expand_resource_pattern(resource, TargetFamily::Identity, self.snapshot) {
                        self.tuples.insert(RelTuple::id3(holder.clone(), vocab::FULL_CONTROL, target));
                        produced_here = true;
                    }
                    for target in expand_resource_pattern(resource, TargetFamily::Datastore, self.snapshot) {
                        self.tuples.insert(RelTuple::ds3(holder.clone(), vocab::FULL_CONTROL, target));
                        produced_here = true;
                    }
                }
                for token in &exp.tokens {
                    let def = vocab::token_def(token.as_str()).expect("expansion yields vocabulary tokens");
                    for target in expand_resource_pattern(resource, def.family, self.snapshot) {
                        let t = match def.family {
                            TargetFamily::Identity => RelTuple::id3(holder.clone(), token.clone(), target),
                            TargetFamily::Datastore => RelTuple::ds3(holder.clone(), token.clone(), target),
                        };
                        self.tuples.insert(t);
                        produced_here = true;
                    }
                }
                for api in &exp.apis4 {
                    produced_here |= self.tuple4_grant(holder, api, stmt, resource, locator);
                }
                if !produced_here {
                    self.skip(
                        locator.to_string(),
                        format!("resource `{resource}` resolves to no declared entity"),
                    );
                }
                produced_any |= produced_here;
            }
        }
        let _ = produced_any;
    }

    fn tuple4_grant(
        &mut self,
        holder: &EntityId,
        api: &Api4Def,
        stmt: &PolicyStatement,
        resource: &str,
        locator: &str,
    ) -> bool {
        let resolved = expand_resource_pattern(resource, TargetFamily::Identity, self.snapshot);
        if resolved.is_empty() {
            return false;
        }
        let mut produced = false;
        for entity in resolved {
            let tuple = match api.shape {
                Tuple4Shape::PolicyAttachment => {
                    // Resource names the attach subject; the policy comes
                    // from the request-tag condition, defaulting to the
                    // unrestricted adminPolicy.
                    let target = match stmt.condition_tag("policy-id") {
                        Some(tag) => {
                            let hits = expand_resource_pattern(tag, TargetFamily::Identity, self.snapshot);
                            match hits.into_iter().next() {
                                Some(p) => p,
                                None => {
                                    self.skip(
                                        locator.to_string(),
                                        format!("condition policy-id `{tag}` does not resolve"),
                                    );
                                    continue;
                                }
                            }
                        }
                        None => {
                            self.needs_admin_policy = true;
                            EntityId::admin_policy()
                        }
                    };
                    RelTuple::id4(holder.clone(), entity, api.perm, target)
                }
                Tuple4Shape::SubjectGrant => {
                    // Resource names the target; the subject comes from the
                    // request-tag condition, defaulting to any_user.
                    let subj = match stmt.condition_tag("user-name") {
                        Some(tag) => {
                            let hits = expand_resource_pattern(tag, TargetFamily::Identity, self.snapshot);
                            match hits.into_iter().next() {
                                Some(u) => u,
                                None => {
                                    self.skip(
                                        locator.to_string(),
                                        format!("condition user-name `{tag}` does not resolve"),
                                    );
                                    continue;
                                }
                            }
                        }
                        None => EntityId::any_user(),
                    };
                    RelTuple::id4(holder.clone(), subj, api.perm, entity)
                }
            };
            self.tuples.insert(tuple);
            produced = true;
        }
        produced
    }
}

/// Outcome of subtracting Deny statements from a tuple set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenyOutcome {
    pub retained: BTreeSet<RelTuple>,
    pub removed: usize,
    pub conditional_ignored: usize,
}

fn deny_action_matches_token(pattern: &str, perm: &PermissionName) -> bool {
    if pattern == "*" {
        return true;
    }
    match vocab::token_def(perm.as_str()).and_then(|d| d.aws_name) {
        Some(aws) => vocab::glob_match(pattern, aws),
        None => false,
    }
}

fn deny_resource_matches(pattern: &str, target: &EntityId) -> bool {
    let name = resource_name(pattern);
    if name == "*" {
        return true;
    }
    if name.contains('*') || name.contains('?') {
        vocab::glob_match(name, target.name())
    } else {
        name == target.name()
    }
}

fn deny_matches(stmt: &PolicyStatement, tuple: &RelTuple) -> bool {
    match tuple {
        RelTuple::Id3 { perm, dst, .. } => stmt.actions.iter().any(|a| deny_action_matches_token(a, perm))
            && stmt.resources.iter().any(|r| deny_resource_matches(r, dst)),
        RelTuple::Ds3 { perm, ds, .. } => stmt.actions.iter().any(|a| deny_action_matches_token(a, perm))
            && stmt.resources.iter().any(|r| deny_resource_matches(r, ds)),
        RelTuple::Id4 { subj, perm, dst, .. } | RelTuple::Ds4 { subj, perm, ds: dst, .. } => {
            // Match through the API table: the deny's resource refers to the
            // same slot the original grant's resource landed in.
            stmt.actions.iter().any(|a| {
                if a != "*" && vocab::TUPLE4_APIS.iter().all(|api| !vocab::glob_match(a, api.aws_name)) {
                    return false;
                }
                vocab::TUPLE4_APIS.iter().any(|api| {
                    (a == "*" || vocab::glob_match(a, api.aws_name))
                        && api.perm == perm.as_str()
                        && stmt.resources.iter().any(|r| match api.shape {
                            Tuple4Shape::PolicyAttachment => deny_resource_matches(r, subj),
                            Tuple4Shape::SubjectGrant => deny_resource_matches(r, dst),
                        })
                })
            })
        }
    }
}

/// Subtract every tuple matched by an unconditional Deny statement.
/// Condition-bearing Deny statements are ignored (the tuple is retained),
/// which over-approximates attacker power — the reviewable direction for a
/// vulnerability finder.
pub fn apply_deny(tuples: &BTreeSet<RelTuple>, deny_statements: &[&PolicyStatement]) -> DenyOutcome {
    let mut conditional_ignored = 0;
    let unconditional: Vec<&&PolicyStatement> = deny_statements
        .iter()
        .filter(|s| {
            if s.condition.is_some() {
                conditional_ignored += 1;
                false
            } else {
                true
            }
        })
        .collect();
    let mut retained = BTreeSet::new();
    let mut removed = 0;
    for t in tuples {
        if unconditional.iter().any(|s| deny_matches(s, t)) {
            removed += 1;
        } else {
            retained.insert(t.clone());
        }
    }
    DenyOutcome { retained, removed, conditional_ignored }
}

/// Compile a snapshot into its initial state. Pure: identical snapshots
/// yield identical compilations. Unmodeled statements degrade to report
/// entries, never errors.
pub fn compile(snapshot: &Snapshot) -> Result<Compilation, SnapshotError> {
    snapshot.validate()?;

    let mut catalog = EntityCatalog::new();
    for i in &snapshot.identities {
        catalog.add_identity(i.id.clone(), i.kind).expect("validated names are unique");
    }
    for p in &snapshot.policies {
        catalog
            .add_identity(p.id.clone(), crate::model::IdentityKind::Policy)
            .expect("validated names are unique");
    }
    for d in &snapshot.datastores {
        catalog.add_datastore(d).expect("validated names are unique");
    }
    catalog.ensure_dummy_datastore();

    let mut compiler = Compiler {
        snapshot,
        tuples: BTreeSet::new(),
        skipped: Vec::new(),
        needs_admin_policy: false,
    };

    // Structural relations.
    for m in &snapshot.memberships {
        compiler.tuples.insert(RelTuple::id3(
            EntityId::named(&m.user).resolve_in(snapshot),
            vocab::BELONGS_TO,
            EntityId::named(&m.group).resolve_in(snapshot),
        ));
    }
    for a in &snapshot.attachments {
        compiler.tuples.insert(RelTuple::id3(
            EntityId::named(&a.identity).resolve_in(snapshot),
            vocab::HAS_POLICY,
            EntityId::named(&a.policy).resolve_in(snapshot),
        ));
    }
    for t in &snapshot.trust {
        let role = EntityId::named(&t.role).resolve_in(snapshot);
        for principal in trust_principals(t, snapshot) {
            compiler.tuples.insert(RelTuple::id3(principal, vocab::ASSUME_ROLE, role.clone()));
        }
    }

    // Statements of attached policies, expanded for each holder.
    let mut attached: BTreeSet<&str> = BTreeSet::new();
    for a in &snapshot.attachments {
        attached.insert(a.policy.as_str());
        let holder = EntityId::named(&a.identity).resolve_in(snapshot);
        let policy = snapshot.policies.iter().find(|p| p.id.name() == a.policy).expect("validated");
        for (idx, stmt) in policy.statements.iter().enumerate() {
            if stmt.effect == Effect::Allow {
                let locator = format!("policy `{}` statement #{}", policy.id.name(), idx + 1);
                compiler.allow_statement(&holder, stmt, &locator);
            }
        }
    }
    for p in &snapshot.policies {
        if !p.statements.is_empty() && !attached.contains(p.id.name()) {
            compiler.skip(
                format!("policy `{}`", p.id.name()),
                "not attached to any identity; statements not expanded".to_string(),
            );
        }
    }

    let Compiler { tuples, mut skipped, needs_admin_policy, .. } = compiler;

    // Deny resolution per holder: an identity's Deny statements subtract
    // from everything that identity holds, regardless of which policy or
    // structural relation granted it.
    let mut deny_subtractions = 0;
    let mut conditional_notes = 0;
    let mut final_tuples: BTreeSet<RelTuple> = BTreeSet::new();
    let holders: BTreeSet<EntityId> = tuples.iter().map(|t| t.holder().clone()).collect();
    for holder in &holders {
        let denies: Vec<&PolicyStatement> = snapshot
            .attachments
            .iter()
            .filter(|a| a.identity == holder.name())
            .flat_map(|a| {
                snapshot
                    .policies
                    .iter()
                    .find(|p| p.id.name() == a.policy)
                    .map(|p| p.statements.iter().filter(|s| s.effect == Effect::Deny))
                    .into_iter()
                    .flatten()
            })
            .collect();
        let held: BTreeSet<RelTuple> = tuples.iter().filter(|t| t.holder() == holder).cloned().collect();
        if denies.is_empty() {
            final_tuples.extend(held);
            continue;
        }
        let outcome = apply_deny(&held, &denies);
        deny_subtractions += outcome.removed;
        conditional_notes += outcome.conditional_ignored;
        final_tuples.extend(outcome.retained);
    }
    if conditional_notes > 0 {
        log::warn!("{conditional_notes} conditional Deny statement(s) ignored (tuples retained)");
    }

    // Joint Get+Put on the same store implies the copy capability; the
    // derived tuple is still subject to the holder's Deny statements.
    let derived: Vec<RelTuple> = holders
        .iter()
        .flat_map(|h| {
            snapshot.datastores.iter().filter_map(|d| {
                let get = RelTuple::ds3(h.clone(), vocab::S3_GET_OBJECT, d.id.clone());
                let put = RelTuple::ds3(h.clone(), vocab::S3_PUT_OBJECT, d.id.clone());
                if final_tuples.contains(&get) && final_tuples.contains(&put) {
                    Some(RelTuple::ds3(h.clone(), vocab::S3_COPY_OBJECT, d.id.clone()))
                } else {
                    None
                }
            })
        })
        .collect();
    for t in derived {
        let holder = t.holder().clone();
        let denies: Vec<&PolicyStatement> = snapshot
            .attachments
            .iter()
            .filter(|a| a.identity == holder.name())
            .flat_map(|a| {
                snapshot
                    .policies
                    .iter()
                    .find(|p| p.id.name() == a.policy)
                    .map(|p| p.statements.iter().filter(|s| s.effect == Effect::Deny))
                    .into_iter()
                    .flatten()
            })
            .collect();
        let blocked = denies.iter().any(|s| s.condition.is_none() && deny_matches(s, &t));
        if !blocked {
            final_tuples.insert(t);
        }
    }

    if needs_admin_policy {
        catalog
            .add_identity(EntityId::admin_policy(), crate::model::IdentityKind::Policy)
            .expect("adminPolicy is reserved");
    }

    let mut initial = IamState::new();
    initial.tuples = final_tuples;
    for d in &snapshot.datastores {
        if d.has_sensitive_data {
            initial.sensitive.insert(d.id.clone());
        }
    }

    skipped.sort_by(|a, b| (&a.locator, &a.reason).cmp(&(&b.locator, &b.reason)));
    skipped.dedup();
    let report = CompilationReport {
        tuples_emitted: initial.tuples.len(),
        statements_skipped: skipped,
        deny_subtractions,
    };
    Ok(Compilation { catalog, initial, report })
}

trait ResolveIn {
    fn resolve_in(self, snapshot: &Snapshot) -> EntityId;
}

impl ResolveIn for EntityId {
    /// Re-key a bare name against the snapshot so the account field is
    /// carried through.
    fn resolve_in(self, snapshot: &Snapshot) -> EntityId {
        for i in &snapshot.identities {
            if i.id.name() == self.name() {
                return i.id.clone();
            }
        }
        for p in &snapshot.policies {
            if p.id.name() == self.name() {
                return p.id.clone();
            }
        }
        for d in &snapshot.datastores {
            if d.id.name() == self.name() {
                return d.id.clone();
            }
        }
        self
    }
}
