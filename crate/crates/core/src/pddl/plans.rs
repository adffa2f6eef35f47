//! Parse external planner output back into ground actions.
//!
//! Accepts both the bare form solvers emit (`(actionName arg1 arg2)`, one
//! per line) and the annotated form `(:action name :parameters (a, b))`,
//! possibly spanning lines. `;` starts a comment; commas count as
//! whitespace; names resolve case-insensitively through the emission name
//! table.

use crate::catalog::EntityCatalog;
use crate::model::{EntityId, PermissionName};
use crate::pddl::names::NameTable;
use crate::plan::{AttackPlan, GroundAction, Param, Schema};
use crate::vocab;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PlanParseError {
    #[error("line {line}: unbalanced parenthesis")]
    Unbalanced { line: usize },
    #[error("line {line}: empty action form")]
    EmptyForm { line: usize },
    #[error("line {line}: unknown action name `{name}`")]
    UnknownAction { line: usize, name: String },
    #[error("line {line}: `{name}` takes {expected} arguments, found {found}")]
    Arity { line: usize, name: String, expected: usize, found: usize },
    #[error("line {line}: unknown entity `{name}`")]
    UnknownEntity { line: usize, name: String },
    #[error("line {line}: unknown permission token `{name}`")]
    UnknownToken { line: usize, name: String },
}

/// Parameter slot kinds per schema, in PDDL parameter order.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Entity,
    Token,
}

fn schema_slots(schema: Schema) -> &'static [Slot] {
    use Slot::{Entity as E, Token as T};
    match schema {
        Schema::SelectCompromisedUser | Schema::ReachAdminPolicy | Schema::SetCoverAttack => &[E],
        Schema::PermFlowBulk | Schema::DeleteBucket => &[E, E],
        Schema::PermFlowId3 | Schema::PermFlowDs3 => &[E, T, E, E],
        Schema::PermFlowId4 | Schema::PermFlowDs4 => &[E, E, E, T, E],
        Schema::AddId3 | Schema::AddDs3 => &[E, E, T, E],
        Schema::CreatePublicBucket => &[E, T, E, E],
        Schema::ActivateId3 | Schema::ActivateDs3 => &[E, T, E],
        Schema::CopyObject | Schema::MoveObject | Schema::EncryptSensitiveData => &[E, E, E],
        Schema::GainPersistence | Schema::ChangeUserLogin | Schema::EnableAttack => &[E, T, E],
    }
}

fn schema_by_name(name: &str) -> Option<Schema> {
    let lower = name.to_lowercase();
    // The emitted domain realizes the any_user subject binding of the add
    // schemas as dedicated actions.
    if lower == "add_id_3tpl_any_user" {
        return Some(Schema::AddId3);
    }
    if lower == "add_ds_3tpl_any_user" {
        return Some(Schema::AddDs3);
    }
    [
        Schema::SelectCompromisedUser,
        Schema::PermFlowBulk,
        Schema::PermFlowId3,
        Schema::PermFlowDs3,
        Schema::PermFlowId4,
        Schema::PermFlowDs4,
        Schema::AddId3,
        Schema::AddDs3,
        Schema::ActivateId3,
        Schema::ActivateDs3,
        Schema::CopyObject,
        Schema::MoveObject,
        Schema::DeleteBucket,
        Schema::CreatePublicBucket,
        Schema::EncryptSensitiveData,
        Schema::GainPersistence,
        Schema::ChangeUserLogin,
        Schema::ReachAdminPolicy,
        Schema::EnableAttack,
        Schema::SetCoverAttack,
    ]
    .into_iter()
    .find(|s| s.pddl_name().to_lowercase() == lower)
}

struct Form {
    line: usize,
    atoms: Vec<String>,
}

/// Tokenize into balanced top-level forms, flattening nesting; `;` comments
/// stripped, commas treated as whitespace.
fn scan_forms(text: &str) -> Result<Vec<Form>, PlanParseError> {
    let mut forms = Vec::new();
    let mut depth = 0usize;
    let mut current = Form { line: 0, atoms: Vec::new() };
    let mut atom = String::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let code = raw.split(';').next().unwrap_or("");
        for ch in code.chars() {
            match ch {
                '(' => {
                    if !atom.is_empty() {
                        current.atoms.push(std::mem::take(&mut atom));
                    }
                    if depth == 0 {
                        current = Form { line, atoms: Vec::new() };
                    }
                    depth += 1;
                }
                ')' => {
                    if !atom.is_empty() {
                        current.atoms.push(std::mem::take(&mut atom));
                    }
                    if depth == 0 {
                        return Err(PlanParseError::Unbalanced { line });
                    }
                    depth -= 1;
                    if depth == 0 {
                        forms.push(std::mem::replace(&mut current, Form { line, atoms: Vec::new() }));
                    }
                }
                c if c.is_whitespace() || c == ',' => {
                    if !atom.is_empty() {
                        current.atoms.push(std::mem::take(&mut atom));
                    }
                }
                c => atom.push(c),
            }
        }
        if !atom.is_empty() {
            current.atoms.push(std::mem::take(&mut atom));
        }
    }
    if depth != 0 {
        return Err(PlanParseError::Unbalanced { line: text.lines().count().max(1) });
    }
    Ok(forms)
}

fn resolve_token(name: &str, extra: &[&str]) -> Option<PermissionName> {
    let lower = name.to_lowercase();
    if lower == vocab::FULL_CONTROL.to_lowercase() {
        return Some(PermissionName::new(vocab::FULL_CONTROL));
    }
    for def in vocab::TOKENS {
        if def.token.to_lowercase() == lower {
            return Some(PermissionName::new(def.token));
        }
    }
    extra.iter().find(|t| t.to_lowercase() == lower).map(|t| PermissionName::new(t))
}

/// Parse a plan file against the emitted domain's action names and the
/// problem's de-aliasing table.
pub fn parse_plan_file(
    text: &str,
    table: &NameTable,
    catalog: &EntityCatalog,
) -> Result<AttackPlan, PlanParseError> {
    parse_plan_file_with_tokens(text, table, catalog, &[])
}

/// [`parse_plan_file`] with extra permission tokens (test vocabulary).
pub fn parse_plan_file_with_tokens(
    text: &str,
    table: &NameTable,
    catalog: &EntityCatalog,
    extra_tokens: &[&str],
) -> Result<AttackPlan, PlanParseError> {
    let mut actions = Vec::new();
    for form in scan_forms(text)? {
        let line = form.line;
        let mut atoms = form.atoms.iter();
        // Annotated form: (:action name :parameters (args)).
        let (name, args): (String, Vec<String>) = match form.atoms.first().map(String::as_str) {
            None => return Err(PlanParseError::EmptyForm { line }),
            Some(":action") => {
                atoms.next();
                let name = atoms.next().ok_or(PlanParseError::EmptyForm { line })?.clone();
                let rest: Vec<String> =
                    atoms.filter(|a| a.as_str() != ":parameters").cloned().collect();
                (name, rest)
            }
            Some(_) => {
                let name = atoms.next().expect("nonempty").clone();
                (name, atoms.cloned().collect())
            }
        };
        let schema = schema_by_name(&name)
            .ok_or_else(|| PlanParseError::UnknownAction { line, name: name.clone() })?;
        let slots = schema_slots(schema);
        if slots.len() != args.len() {
            return Err(PlanParseError::Arity {
                line,
                name,
                expected: slots.len(),
                found: args.len(),
            });
        }
        let mut params = Vec::with_capacity(args.len());
        for (slot, arg) in slots.iter().zip(&args) {
            match slot {
                Slot::Entity => {
                    let entity_name = table
                        .entity(arg)
                        .or_else(|| catalog.get(arg).map(|e| e.id.name()))
                        .ok_or_else(|| PlanParseError::UnknownEntity { line, name: arg.clone() })?;
                    let id: EntityId = catalog
                        .get(entity_name)
                        .map(|e| e.id.clone())
                        .ok_or_else(|| PlanParseError::UnknownEntity { line, name: arg.clone() })?;
                    params.push(Param::Entity(id));
                }
                Slot::Token => {
                    let token = resolve_token(arg, extra_tokens)
                        .ok_or_else(|| PlanParseError::UnknownToken { line, name: arg.clone() })?;
                    params.push(Param::Perm(token));
                }
            }
        }
        actions.push(GroundAction { schema, params });
    }
    Ok(AttackPlan { actions })
}
