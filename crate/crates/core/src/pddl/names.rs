//! Entity-name sanitization for PDDL identifiers, with the inverse map kept
//! for de-aliasing external planner output.
//!
//! Entity names are lower-cased and scrubbed to `[a-z0-9_-]`, with a numeric
//! suffix appended on collision, so the map is always injective. Permission
//! tokens are already PDDL-safe and keep their spelling.

use std::collections::BTreeMap;

use crate::catalog::EntityCatalog;

#[derive(Debug, Clone, Default)]
pub struct NameTable {
    forward: BTreeMap<String, String>,
    reverse: BTreeMap<String, String>,
}

fn sanitize(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.to_lowercase().chars() {
        if ch.is_ascii_lowercase() || ch.is_ascii_digit() || ch == '_' || ch == '-' {
            out.push(ch);
        } else {
            out.push('_');
        }
    }
    if out.is_empty() || !out.starts_with(|c: char| c.is_ascii_lowercase()) {
        out.insert_str(0, "e_");
    }
    out
}

impl NameTable {
    /// Build the table over every catalog entry, in name order so suffix
    /// assignment is deterministic.
    pub fn for_catalog(catalog: &EntityCatalog) -> NameTable {
        let mut table = NameTable::default();
        for entry in catalog.entries() {
            table.add(entry.id.name());
        }
        table
    }

    fn add(&mut self, name: &str) -> String {
        if let Some(existing) = self.forward.get(name) {
            return existing.clone();
        }
        let base = sanitize(name);
        let mut candidate = base.clone();
        let mut n = 1usize;
        while self.reverse.contains_key(&candidate) {
            n += 1;
            candidate = format!("{base}_{n}");
        }
        self.forward.insert(name.to_string(), candidate.clone());
        self.reverse.insert(candidate.clone(), name.to_string());
        candidate
    }

    /// PDDL identifier for an entity name.
    pub fn ident(&self, name: &str) -> Option<&str> {
        self.forward.get(name).map(String::as_str)
    }

    /// Entity name for a PDDL identifier, case-insensitively (planners
    /// commonly lower-case identifiers in their output).
    pub fn entity(&self, ident: &str) -> Option<&str> {
        self.reverse.get(&ident.to_lowercase()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.forward.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntityId, IdentityKind};

    #[test]
    fn sanitization_lowercases_and_scrubs() {
        assert_eq!(sanitize("keyManagementRole"), "keymanagementrole");
        assert_eq!(sanitize("arn:aws:foo"), "arn_aws_foo");
        assert_eq!(sanitize("9lives"), "e_9lives");
    }

    #[test]
    fn collisions_get_numeric_suffixes_and_stay_invertible() {
        let mut cat = EntityCatalog::new();
        cat.add_identity(EntityId::named("Alice"), IdentityKind::User).unwrap();
        cat.add_identity(EntityId::named("alice"), IdentityKind::Role).unwrap();
        cat.add_identity(EntityId::named("ALICE"), IdentityKind::Group).unwrap();
        let table = NameTable::for_catalog(&cat);
        let idents: Vec<&str> = ["ALICE", "Alice", "alice"].iter().map(|n| table.ident(n).unwrap()).collect();
        assert_eq!(idents.len(), 3);
        for (i, a) in idents.iter().enumerate() {
            for b in idents.iter().skip(i + 1) {
                assert_ne!(a, b);
            }
        }
        for name in ["ALICE", "Alice", "alice"] {
            assert_eq!(table.entity(table.ident(name).unwrap()), Some(name));
        }
    }

    #[test]
    fn reverse_lookup_is_case_insensitive() {
        let mut cat = EntityCatalog::new();
        cat.add_identity(EntityId::named("user_9"), IdentityKind::User).unwrap();
        let table = NameTable::for_catalog(&cat);
        assert_eq!(table.entity("USER_9"), Some("user_9"));
    }
}
