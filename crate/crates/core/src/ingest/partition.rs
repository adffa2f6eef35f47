//! Snapshot partitioning: split by account, then split oversized accounts
//! into user groups closed under breadth-first reachability over tuple
//! edges. Admin users are excluded throughout, since compromising them
//! trivially dominates the analysis.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::ingest::compile::{compile, expand_resource_pattern, Compilation};
use crate::ingest::snapshot::{Effect, Snapshot, SnapshotError};
use crate::model::{EntityId, IdentityKind, RelTuple};
use crate::vocab::{self, TargetFamily};

/// Users directly holding hold-anything over the identity or datastore
/// sentinel after compilation. This is the minimal unambiguous admin
/// criterion.
pub fn admin_users(compilation: &Compilation) -> BTreeSet<EntityId> {
    let state = &compilation.initial;
    compilation
        .catalog
        .users()
        .filter(|u| {
            state.contains_tuple(&RelTuple::id3((*u).clone(), vocab::FULL_CONTROL, EntityId::any_user()))
                || state.contains_tuple(&RelTuple::ds3(
                    (*u).clone(),
                    vocab::FULL_CONTROL,
                    EntityId::any_datastore(),
                ))
        })
        .cloned()
        .collect()
}

/// Directed reference edges between declared entity names: from each tuple's
/// holder to its other slots, and from each policy to the entities its
/// statements resolve to.
fn edge_map(snapshot: &Snapshot, compilation: &Compilation) -> BTreeMap<String, BTreeSet<String>> {
    let declared: BTreeSet<&str> = snapshot
        .identities
        .iter()
        .map(|i| i.id.name())
        .chain(snapshot.policies.iter().map(|p| p.id.name()))
        .chain(snapshot.datastores.iter().map(|d| d.id.name()))
        .collect();
    let mut edges: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut add = |from: &str, to: &str| {
        if declared.contains(from) && declared.contains(to) && from != to {
            edges.entry(from.to_string()).or_default().insert(to.to_string());
        }
    };
    for t in &compilation.initial.tuples {
        let holder = t.holder().name();
        add(holder, t.target().name());
        if let Some(subj) = t.subject() {
            add(holder, subj.name());
        }
    }
    for p in &snapshot.policies {
        for stmt in p.statements.iter().filter(|s| s.effect == Effect::Allow) {
            for r in &stmt.resources {
                for hit in expand_resource_pattern(r, TargetFamily::Identity, snapshot) {
                    add(p.id.name(), hit.name());
                }
                for hit in expand_resource_pattern(r, TargetFamily::Datastore, snapshot) {
                    add(p.id.name(), hit.name());
                }
            }
        }
    }
    edges
}

fn bfs_closure(seeds: &BTreeSet<String>, edges: &BTreeMap<String, BTreeSet<String>>) -> BTreeSet<String> {
    let mut seen = seeds.clone();
    let mut queue: VecDeque<String> = seeds.iter().cloned().collect();
    while let Some(node) = queue.pop_front() {
        if let Some(succ) = edges.get(&node) {
            for s in succ {
                if seen.insert(s.clone()) {
                    queue.push_back(s.clone());
                }
            }
        }
    }
    seen
}

/// Restrict a snapshot to the named entities, dropping admin users and every
/// relation with an endpoint outside the kept set.
fn restrict(snapshot: &Snapshot, keep: &BTreeSet<String>, admins: &BTreeSet<String>) -> Snapshot {
    let kept = |name: &str| keep.contains(name) && !admins.contains(name);
    Snapshot {
        schema: snapshot.schema.clone(),
        identities: snapshot.identities.iter().filter(|i| kept(i.id.name())).cloned().collect(),
        datastores: snapshot.datastores.iter().filter(|d| kept(d.id.name())).cloned().collect(),
        policies: snapshot.policies.iter().filter(|p| kept(p.id.name())).cloned().collect(),
        attachments: snapshot
            .attachments
            .iter()
            .filter(|a| kept(&a.identity) && kept(&a.policy))
            .cloned()
            .collect(),
        memberships: snapshot
            .memberships
            .iter()
            .filter(|m| kept(&m.user) && kept(&m.group))
            .cloned()
            .collect(),
        trust: snapshot
            .trust
            .iter()
            .filter(|t| {
                let principal_ok =
                    t.principal.contains('*') || t.principal.contains('?') || kept(&t.principal);
                principal_ok && kept(&t.role)
            })
            .cloned()
            .collect(),
    }
}

/// Split a snapshot into analyzable partitions of at most `max_entities`
/// entities each (best effort: a single user's closure may exceed the
/// budget and then forms its own partition).
///
/// Accounts split first. A within-budget account keeps all its entities
/// plus anything reachable across accounts; an oversized account is split
/// into non-overlapping seed groups of users, each closed under BFS
/// reachability. The union of partition users is exactly the snapshot's
/// non-admin users.
pub fn partition(snapshot: &Snapshot, max_entities: usize) -> Result<Vec<Snapshot>, SnapshotError> {
    assert!(max_entities >= 1, "max_entities must be at least 1");
    let compilation = compile(snapshot)?;
    let admins: BTreeSet<String> =
        admin_users(&compilation).iter().map(|u| u.name().to_string()).collect();
    let edges = edge_map(snapshot, &compilation);

    // Group declared entities and users by account.
    let mut accounts: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut account_users: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for i in &snapshot.identities {
        accounts.entry(i.id.account().to_string()).or_default().insert(i.id.name().to_string());
        if i.kind == IdentityKind::User && !admins.contains(i.id.name()) {
            account_users.entry(i.id.account().to_string()).or_default().push(i.id.name().to_string());
        }
    }
    for p in &snapshot.policies {
        accounts.entry(p.id.account().to_string()).or_default().insert(p.id.name().to_string());
    }
    for d in &snapshot.datastores {
        accounts.entry(d.id.account().to_string()).or_default().insert(d.id.name().to_string());
    }

    let mut partitions = Vec::new();
    for (account, entities) in &accounts {
        let base: BTreeSet<String> = entities.iter().filter(|n| !admins.contains(*n)).cloned().collect();
        if base.is_empty() {
            continue;
        }
        let full = bfs_closure(&base, &edges);
        if full.len() <= max_entities {
            partitions.push(restrict(snapshot, &full, &admins));
            continue;
        }
        // Oversized: greedy user chunks, each closed under reachability.
        let users = account_users.get(account).cloned().unwrap_or_default();
        if users.is_empty() {
            // No users to seed from; emit the whole account as one partition.
            partitions.push(restrict(snapshot, &full, &admins));
            continue;
        }
        let mut chunk_users: Vec<String> = Vec::new();
        let mut chunk_closure: BTreeSet<String> = BTreeSet::new();
        for user in users {
            let mut seed = BTreeSet::new();
            seed.insert(user.clone());
            let user_closure = bfs_closure(&seed, &edges);
            let grown: BTreeSet<String> = chunk_closure.union(&user_closure).cloned().collect();
            if !chunk_users.is_empty() && grown.len() > max_entities {
                partitions.push(restrict(snapshot, &chunk_closure, &admins));
                chunk_users.clear();
                chunk_closure = user_closure;
            } else {
                chunk_closure = grown;
            }
            chunk_users.push(user);
        }
        if !chunk_users.is_empty() {
            partitions.push(restrict(snapshot, &chunk_closure, &admins));
        }
    }
    Ok(partitions)
}
