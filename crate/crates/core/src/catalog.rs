//! Entity catalog: the static universe a state's tuples refer to.
//!
//! The catalog resolves names to kinds and carries the datastore flags that
//! never change during search (public, versioning, MFA). Fluent facts
//! (sensitivity, materialized dummies, compromise) live in
//! [`crate::model::IamState`]. The sentinels and the creatable dummy pair
//! are always present.

use std::collections::BTreeMap;

use crate::model::{Datastore, EntityId, EntityKind, IamState, IdentityKind};

/// Static flags of a datastore.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DatastoreFlags {
    pub is_public: bool,
    pub versioning_enabled: bool,
    pub mfa_delete_enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub id: EntityId,
    pub kind: EntityKind,
    /// `any_user` / `any_datastore`.
    pub sentinel: bool,
    /// Creatable placeholder; not part of the environment until materialized.
    pub dummy: bool,
    pub ds: Option<DatastoreFlags>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("duplicate entity name `{0}`")]
    DuplicateName(String),
}

/// Name-keyed entity table. Names are unique across all entity kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityCatalog {
    entries: BTreeMap<String, CatalogEntry>,
}

impl Default for EntityCatalog {
    fn default() -> Self {
        Self::new()
    }
}

impl EntityCatalog {
    /// A catalog holding only the sentinels and the dummy pair.
    pub fn new() -> Self {
        let mut cat = EntityCatalog { entries: BTreeMap::new() };
        cat.insert(CatalogEntry {
            id: EntityId::any_user(),
            kind: EntityKind::User,
            sentinel: true,
            dummy: false,
            ds: None,
        });
        cat.insert(CatalogEntry {
            id: EntityId::any_datastore(),
            kind: EntityKind::Datastore,
            sentinel: true,
            dummy: false,
            ds: Some(DatastoreFlags::default()),
        });
        cat.insert(CatalogEntry {
            id: EntityId::dummy_user(),
            kind: EntityKind::User,
            sentinel: false,
            dummy: true,
            ds: None,
        });
        cat
    }

    /// The creatable placeholder datastore. A snapshot may declare its own
    /// dummy store; otherwise the reserved one is added on demand. Exactly
    /// one is instantiable per problem.
    pub fn ensure_dummy_datastore(&mut self) -> EntityId {
        if let Some(existing) = self
            .entries
            .values()
            .find(|e| e.kind.is_datastore() && e.dummy)
            .map(|e| e.id.clone())
        {
            return existing;
        }
        let id = EntityId::dummy_datastore();
        self.insert(CatalogEntry {
            id: id.clone(),
            kind: EntityKind::Datastore,
            sentinel: false,
            dummy: true,
            ds: Some(DatastoreFlags::default()),
        });
        id
    }

    /// The dummy datastore, if one has been ensured or declared.
    pub fn dummy_datastore(&self) -> Option<&EntityId> {
        self.entries.values().find(|e| e.kind.is_datastore() && e.dummy).map(|e| &e.id)
    }

    fn insert(&mut self, entry: CatalogEntry) {
        self.entries.insert(entry.id.name().to_string(), entry);
    }

    pub fn add_identity(&mut self, id: EntityId, kind: IdentityKind) -> Result<(), CatalogError> {
        if self.entries.contains_key(id.name()) {
            return Err(CatalogError::DuplicateName(id.name().to_string()));
        }
        self.insert(CatalogEntry { id, kind: kind.into(), sentinel: false, dummy: false, ds: None });
        Ok(())
    }

    pub fn add_datastore(&mut self, ds: &Datastore) -> Result<(), CatalogError> {
        if self.entries.contains_key(ds.id.name()) {
            return Err(CatalogError::DuplicateName(ds.id.name().to_string()));
        }
        self.insert(CatalogEntry {
            id: ds.id.clone(),
            kind: EntityKind::Datastore,
            sentinel: false,
            dummy: ds.is_dummy,
            ds: Some(DatastoreFlags {
                is_public: ds.is_public,
                versioning_enabled: ds.versioning_enabled,
                mfa_delete_enabled: ds.mfa_delete_enabled,
            }),
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&CatalogEntry> {
        self.entries.get(name)
    }

    pub fn entry_of(&self, id: &EntityId) -> Option<&CatalogEntry> {
        self.get(id.name())
    }

    pub fn kind_of(&self, id: &EntityId) -> Option<EntityKind> {
        self.entry_of(id).map(|e| e.kind)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values()
    }

    /// Real (non-sentinel, non-dummy) user identities, in name order. These
    /// are the candidates for compromise.
    pub fn users(&self) -> impl Iterator<Item = &EntityId> {
        self.entries
            .values()
            .filter(|e| e.kind == EntityKind::User && !e.sentinel && !e.dummy)
            .map(|e| &e.id)
    }

    /// All identity-kind entities including dummies, excluding sentinels.
    pub fn identities(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values().filter(|e| e.kind.is_identity() && !e.sentinel)
    }

    /// All datastores including the dummy, excluding the sentinel.
    pub fn datastores(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values().filter(|e| e.kind.is_datastore() && !e.sentinel)
    }

    pub fn is_user(&self, id: &EntityId) -> bool {
        self.entry_of(id).is_some_and(|e| e.kind == EntityKind::User && !e.sentinel)
    }

    pub fn is_datastore(&self, id: &EntityId) -> bool {
        self.entry_of(id).is_some_and(|e| e.kind.is_datastore())
    }

    pub fn is_dummy(&self, id: &EntityId) -> bool {
        self.entry_of(id).is_some_and(|e| e.dummy)
    }

    /// A dummy entity counts as existing only once materialized.
    pub fn exists_in(&self, id: &EntityId, state: &IamState) -> bool {
        match self.entry_of(id) {
            Some(e) if e.dummy => state.is_created(id),
            Some(_) => true,
            None => false,
        }
    }

    /// Whether `ds` is effectively public in `state`: statically public, or a
    /// dummy materialized by the create-public-bucket action.
    pub fn is_public(&self, ds: &EntityId, state: &IamState) -> bool {
        match self.entry_of(ds) {
            Some(e) => {
                let static_public = e.ds.map(|f| f.is_public).unwrap_or(false);
                static_public || (e.dummy && state.is_created(ds))
            }
            None => false,
        }
    }

    pub fn versioning_enabled(&self, ds: &EntityId) -> bool {
        self.entry_of(ds).and_then(|e| e.ds).map(|f| f.versioning_enabled).unwrap_or(false)
    }

    pub fn mfa_delete_enabled(&self, ds: &EntityId) -> bool {
        self.entry_of(ds).and_then(|e| e.ds).map(|f| f.mfa_delete_enabled).unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinels_and_dummies_always_present() {
        let mut cat = EntityCatalog::new();
        assert!(cat.contains("any_user"));
        assert!(cat.contains("any_datastore"));
        assert!(cat.contains("dummy_user"));
        assert!(!cat.contains("dummy_datastore"));
        cat.ensure_dummy_datastore();
        assert!(cat.contains("dummy_datastore"));
        assert_eq!(cat.users().count(), 0, "sentinel and dummy users are not compromisable");
    }

    #[test]
    fn declared_dummy_store_preempts_the_reserved_one() {
        let mut cat = EntityCatalog::new();
        cat.add_datastore(&Datastore {
            id: EntityId::named("staging_area"),
            is_public: false,
            has_sensitive_data: false,
            versioning_enabled: false,
            mfa_delete_enabled: false,
            is_dummy: true,
        })
        .unwrap();
        let dummy = cat.ensure_dummy_datastore();
        assert_eq!(dummy.name(), "staging_area");
        assert!(!cat.contains("dummy_datastore"));
    }

    #[test]
    fn duplicate_names_rejected_across_kinds() {
        let mut cat = EntityCatalog::new();
        cat.add_identity(EntityId::named("x"), IdentityKind::User).unwrap();
        let err = cat.add_datastore(&Datastore {
            id: EntityId::named("x"),
            is_public: false,
            has_sensitive_data: false,
            versioning_enabled: false,
            mfa_delete_enabled: false,
            is_dummy: false,
        });
        assert_eq!(err, Err(CatalogError::DuplicateName("x".into())));
    }

    #[test]
    fn dummy_datastore_becomes_public_once_created() {
        let mut cat = EntityCatalog::new();
        let dummy = cat.ensure_dummy_datastore();
        let mut state = IamState::new();
        assert!(!cat.is_public(&dummy, &state));
        assert!(!cat.exists_in(&dummy, &state));
        state.created_entities.insert(dummy.clone());
        assert!(cat.is_public(&dummy, &state));
        assert!(cat.exists_in(&dummy, &state));
    }
}
