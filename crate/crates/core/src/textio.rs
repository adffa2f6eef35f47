//! Text serialization of relation tuples: one tuple per line,
//! `(id3|ds3|id4|ds4 <field>...)`, `#` begins a comment, UTF-8, LF endings.
//!
//! The format exists so an analyst can read and edit the compiled state
//! directly. Parsing validates tokens against the permission vocabulary and
//! entity slots against a catalog.

use std::collections::BTreeSet;

use crate::catalog::EntityCatalog;
use crate::model::{EntityId, PermissionName, RelTuple};
use crate::vocab;

/// Canonical single-line form of a tuple.
pub fn format_tuple_line(t: &RelTuple) -> String {
    match t {
        RelTuple::Id3 { src, perm, dst } => format!("(id3 {src} {perm} {dst})"),
        RelTuple::Ds3 { src, perm, ds } => format!("(ds3 {src} {perm} {ds})"),
        RelTuple::Id4 { actor, subj, perm, dst } => format!("(id4 {actor} {subj} {perm} {dst})"),
        RelTuple::Ds4 { actor, subj, perm, ds } => format!("(ds4 {actor} {subj} {perm} {ds})"),
    }
}

/// Serialize a tuple set in canonical (sorted) order.
pub fn write_tuples<'a>(tuples: impl IntoIterator<Item = &'a RelTuple>) -> String {
    let mut out = String::new();
    for t in tuples {
        out.push_str(&format_tuple_line(t));
        out.push('\n');
    }
    out
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TupleTextError {
    #[error("line {line}: unterminated parenthesis")]
    Unterminated { line: usize },
    #[error("line {line}: expected `(tag fields...)`")]
    NotATuple { line: usize },
    #[error("line {line}: unknown tuple tag `{tag}`")]
    UnknownTag { line: usize, tag: String },
    #[error("line {line}: `{tag}` takes {expected} fields, found {found}")]
    Arity { line: usize, tag: String, expected: usize, found: usize },
    #[error("line {line}: unknown permission token `{token}`")]
    UnknownToken { line: usize, token: String },
    #[error("line {line}: unknown entity `{name}`")]
    UnknownEntity { line: usize, name: String },
    #[error("line {line}: `{name}` is not a datastore")]
    NotADatastore { line: usize, name: String },
    #[error("line {line}: `{name}` is not an identity")]
    NotAnIdentity { line: usize, name: String },
}

/// Parses tuple lines against a catalog, optionally extended with test-only
/// permission tokens.
pub struct TupleReader<'a> {
    catalog: &'a EntityCatalog,
    extra_tokens: BTreeSet<String>,
}

impl<'a> TupleReader<'a> {
    pub fn new(catalog: &'a EntityCatalog) -> Self {
        TupleReader { catalog, extra_tokens: BTreeSet::new() }
    }

    pub fn with_extra_tokens(mut self, tokens: impl IntoIterator<Item = String>) -> Self {
        self.extra_tokens.extend(tokens);
        self
    }

    fn known_token(&self, token: &str) -> bool {
        token == vocab::FULL_CONTROL
            || vocab::token_def(token).is_some()
            || self.extra_tokens.contains(token)
    }

    fn entity(&self, name: &str, line: usize) -> Result<EntityId, TupleTextError> {
        match self.catalog.get(name) {
            Some(e) => Ok(e.id.clone()),
            None => Err(TupleTextError::UnknownEntity { line, name: name.to_string() }),
        }
    }

    fn datastore_slot(&self, name: &str, line: usize) -> Result<EntityId, TupleTextError> {
        let id = self.entity(name, line)?;
        if self.catalog.is_datastore(&id) {
            Ok(id)
        } else {
            Err(TupleTextError::NotADatastore { line, name: name.to_string() })
        }
    }

    fn identity_slot(&self, name: &str, line: usize) -> Result<EntityId, TupleTextError> {
        let id = self.entity(name, line)?;
        if self.catalog.is_datastore(&id) {
            Err(TupleTextError::NotAnIdentity { line, name: name.to_string() })
        } else {
            Ok(id)
        }
    }

    fn perm(&self, token: &str, line: usize) -> Result<PermissionName, TupleTextError> {
        if self.known_token(token) {
            Ok(PermissionName::new(token))
        } else {
            Err(TupleTextError::UnknownToken { line, token: token.to_string() })
        }
    }

    /// Parse one line. Returns `Ok(None)` for blank and comment lines.
    /// Whitespace between fields is insignificant.
    pub fn parse_line(&self, raw: &str, line: usize) -> Result<Option<RelTuple>, TupleTextError> {
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            return Ok(None);
        }
        let Some(body) = text.strip_prefix('(') else {
            return Err(TupleTextError::NotATuple { line });
        };
        let Some(body) = body.strip_suffix(')') else {
            return Err(TupleTextError::Unterminated { line });
        };
        let fields: Vec<&str> = body.split_whitespace().collect();
        let Some((&tag, args)) = fields.split_first() else {
            return Err(TupleTextError::NotATuple { line });
        };
        let expect = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(TupleTextError::Arity { line, tag: tag.to_string(), expected: n, found: args.len() })
            }
        };
        let tuple = match tag {
            "id3" => {
                expect(3)?;
                RelTuple::Id3 {
                    src: self.identity_slot(args[0], line)?,
                    perm: self.perm(args[1], line)?,
                    dst: self.identity_slot(args[2], line)?,
                }
            }
            "ds3" => {
                expect(3)?;
                RelTuple::Ds3 {
                    src: self.identity_slot(args[0], line)?,
                    perm: self.perm(args[1], line)?,
                    ds: self.datastore_slot(args[2], line)?,
                }
            }
            "id4" => {
                expect(4)?;
                RelTuple::Id4 {
                    actor: self.identity_slot(args[0], line)?,
                    subj: self.identity_slot(args[1], line)?,
                    perm: self.perm(args[2], line)?,
                    dst: self.identity_slot(args[3], line)?,
                }
            }
            "ds4" => {
                expect(4)?;
                RelTuple::Ds4 {
                    actor: self.identity_slot(args[0], line)?,
                    subj: self.identity_slot(args[1], line)?,
                    perm: self.perm(args[2], line)?,
                    ds: self.datastore_slot(args[3], line)?,
                }
            }
            other => return Err(TupleTextError::UnknownTag { line, tag: other.to_string() }),
        };
        Ok(Some(tuple))
    }

    /// Parse a whole document, reporting the first error with its line number.
    pub fn parse_text(&self, text: &str) -> Result<Vec<RelTuple>, TupleTextError> {
        let mut out = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            if let Some(t) = self.parse_line(raw, idx + 1)? {
                out.push(t);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Datastore, IdentityKind};

    fn catalog() -> EntityCatalog {
        let mut cat = EntityCatalog::new();
        cat.add_identity(EntityId::named("u1"), IdentityKind::User).unwrap();
        cat.add_identity(EntityId::named("g1"), IdentityKind::Group).unwrap();
        cat.add_identity(EntityId::named("GID"), IdentityKind::Group).unwrap();
        cat.add_identity(EntityId::named("PID"), IdentityKind::Policy).unwrap();
        cat.add_identity(EntityId::named("id"), IdentityKind::User).unwrap();
        cat.add_datastore(&Datastore {
            id: EntityId::named("ds1"),
            is_public: false,
            has_sensitive_data: false,
            versioning_enabled: false,
            mfa_delete_enabled: false,
            is_dummy: false,
        })
        .unwrap();
        cat
    }

    #[test]
    fn parses_the_grammar_example() {
        let cat = catalog();
        let reader = TupleReader::new(&cat);
        let t = reader.parse_line("(id3 u1 belongsTo g1)", 1).unwrap().unwrap();
        assert_eq!(t, RelTuple::id3(EntityId::named("u1"), "belongsTo", EntityId::named("g1")));
    }

    #[test]
    fn ds_slot_must_be_a_datastore() {
        let cat = catalog();
        let reader = TupleReader::new(&cat);
        let err = reader.parse_line("(ds4 id GID hasPolicy PID)", 7).unwrap_err();
        assert_eq!(err, TupleTextError::NotADatastore { line: 7, name: "PID".into() });
    }

    #[test]
    fn whitespace_between_fields_is_insignificant() {
        let cat = catalog();
        let reader = TupleReader::new(&cat);
        let t = reader.parse_line("(  ds3   u1  s3_GetObject    ds1 )", 1).unwrap().unwrap();
        assert_eq!(format_tuple_line(&t), "(ds3 u1 s3_GetObject ds1)");
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let cat = catalog();
        let reader = TupleReader::new(&cat);
        let tuples = reader.parse_text("# header\n\n(id3 u1 belongsTo g1)\n").unwrap();
        assert_eq!(tuples.len(), 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cat = catalog();
        let reader = TupleReader::new(&cat);
        let err = reader.parse_text("(id3 u1 belongsTo g1)\n(id3 u1 notAPerm g1)\n").unwrap_err();
        assert_eq!(err, TupleTextError::UnknownToken { line: 2, token: "notAPerm".into() });
        let err = reader.parse_text("(id3 u1 belongsTo g1").unwrap_err();
        assert_eq!(err, TupleTextError::Unterminated { line: 1 });
        let err = reader.parse_text("(id3 u1 belongsTo)").unwrap_err();
        assert!(matches!(err, TupleTextError::Arity { expected: 3, found: 2, .. }));
    }

    #[test]
    fn extra_tokens_extend_the_vocabulary() {
        let cat = catalog();
        let strict = TupleReader::new(&cat);
        assert!(strict.parse_line("(id3 u1 canAssume g1)", 1).is_err());
        let extended = TupleReader::new(&cat).with_extra_tokens(["canAssume".to_string()]);
        assert!(extended.parse_line("(id3 u1 canAssume g1)", 1).unwrap().is_some());
    }
}
