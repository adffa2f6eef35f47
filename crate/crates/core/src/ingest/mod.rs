//! Snapshot ingestion: parse a cloud inventory, compile policy statements
//! into relation tuples, and partition oversized snapshots.

mod compile;
mod partition;
mod snapshot;

pub use compile::{
    apply_deny, compile, expand_resource_pattern, Compilation, CompilationReport, DenyOutcome,
    SkippedStatement,
};
pub use partition::{admin_users, partition};
pub use snapshot::{
    parse_snapshot, Attachment, Effect, Membership, PolicyDocument, PolicyStatement, Snapshot,
    SnapshotError, TrustEntry, SNAPSHOT_SCHEMA,
};
