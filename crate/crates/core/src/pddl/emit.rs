//! PDDL emission: the action domain (per flow mode) and per-instance
//! problem files for external planners. Output is deterministic and
//! byte-identical for identical inputs.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::catalog::EntityCatalog;
use crate::model::{AttackType, EntityKind, IamState, RelTuple};
use crate::pddl::names::NameTable;
use crate::plan::FlowMode;
use crate::vocab::{self, TokenRole};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PddlKind {
    Domain,
    Problem,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PddlDocument {
    pub kind: PddlKind,
    pub text: String,
}

pub const DOMAIN_NAME: &str = "cloudlens";

/// Tokens referenced literally inside action bodies become domain constants.
fn domain_constants() -> Vec<&'static str> {
    vec![
        "any_user",
        "any_datastore",
        "adminPolicy",
        "dummy_user",
        vocab::ASSUME_ROLE,
        vocab::BELONGS_TO,
        vocab::HAS_POLICY,
        vocab::FULL_CONTROL,
        vocab::S3_GET_OBJECT,
        vocab::S3_PUT_OBJECT,
        vocab::S3_DELETE_OBJECT,
        vocab::DELETE_BUCKET,
        vocab::KMS_CREATE_KEY,
    ]
}

const FLOW_DISJUNCTION_ID1_ID2: &str =
    "(or (id_tpl ?id1 assumeRole ?id2) (id_tpl ?id1 belongsTo ?id2) (id_tpl ?id1 hasPolicy ?id2))";

/// Emit the action domain for one flow mode. Per-tuple mode carries the
/// four single-tuple flow actions; bulk mode carries one whole-holdings
/// flow with quantified conditional effects. Everything else is shared.
pub fn emit_domain(mode: FlowMode) -> PddlDocument {
    let mut s = String::new();
    let w = &mut s;
    writeln!(w, "(define (domain {DOMAIN_NAME})").unwrap();
    writeln!(
        w,
        "  (:requirements :strips :negative-preconditions :disjunctive-preconditions :conditional-effects)"
    )
    .unwrap();
    writeln!(w, "  (:constants {})", domain_constants().join(" ")).unwrap();
    writeln!(w, "  (:predicates").unwrap();
    for p in [
        "(id_tpl ?src ?perm ?dst)",
        "(ds_tpl ?src ?perm ?ds)",
        "(id_4tpl ?actor ?subj ?perm ?dst)",
        "(ds_4tpl ?actor ?subj ?perm ?ds)",
        "(compromised_id ?id)",
        "(selection_open)",
        "(user_pred ?id)",
        "(group_pred ?id)",
        "(role_pred ?id)",
        "(policy_pred ?id)",
        "(datastore_pred ?ds)",
        "(has_sensitive_data ?ds)",
        "(is_public_datastore ?ds)",
        "(is_dummy_datastore ?ds)",
        "(versioning_enabled ?ds)",
        "(mfa_enabled ?ds)",
        "(persistence_permission ?perm)",
        "(login_permission ?perm)",
        "(impact_permission ?perm)",
        "(create_bucket_permission ?perm)",
    ] {
        writeln!(w, "    {p}").unwrap();
    }
    for a in AttackType::ALL {
        writeln!(w, "    ({})", a.name()).unwrap();
    }
    writeln!(w, "  )").unwrap();

    // Compromise selection: forced first and once via the selection window.
    writeln!(
        w,
        "\n  (:action selectCompromisedUser\n    :parameters (?id)\n    :precondition (and (user_pred ?id) (selection_open))\n    :effect (and (compromised_id ?id) (not (selection_open))))"
    )
    .unwrap();

    match mode {
        FlowMode::PerTuple => {
            writeln!(
                w,
                "\n  (:action permissionFlow_id_3tpl\n    :parameters (?id2 ?perm ?id ?id1)\n    :precondition (and\n      (not (selection_open))\n      {FLOW_DISJUNCTION_ID1_ID2}\n      (id_tpl ?id2 ?perm ?id)\n      (not (id_tpl ?id1 ?perm ?id)))\n    :effect (id_tpl ?id1 ?perm ?id))"
            )
            .unwrap();
            writeln!(
                w,
                "\n  (:action permissionFlow_ds_3tpl\n    :parameters (?id2 ?perm ?ds ?id1)\n    :precondition (and\n      (not (selection_open))\n      {FLOW_DISJUNCTION_ID1_ID2}\n      (ds_tpl ?id2 ?perm ?ds)\n      (not (ds_tpl ?id1 ?perm ?ds)))\n    :effect (ds_tpl ?id1 ?perm ?ds))"
            )
            .unwrap();
            writeln!(
                w,
                "\n  (:action permissionFlow_id_4tpl\n    :parameters (?id1 ?id2 ?id3 ?perm ?id4)\n    :precondition (and\n      (not (selection_open))\n      (id_4tpl ?id2 ?id3 ?perm ?id4)\n      {FLOW_DISJUNCTION_ID1_ID2}\n      (not (id_4tpl ?id1 ?id3 ?perm ?id4)))\n    :effect (id_4tpl ?id1 ?id3 ?perm ?id4))"
            )
            .unwrap();
            writeln!(
                w,
                "\n  (:action permissionFlow_ds_4tpl\n    :parameters (?id1 ?id2 ?id3 ?perm ?ds)\n    :precondition (and\n      (not (selection_open))\n      (ds_4tpl ?id2 ?id3 ?perm ?ds)\n      {FLOW_DISJUNCTION_ID1_ID2}\n      (not (ds_4tpl ?id1 ?id3 ?perm ?ds)))\n    :effect (ds_4tpl ?id1 ?id3 ?perm ?ds))"
            )
            .unwrap();
        }
        FlowMode::Bulk => {
            writeln!(
                w,
                "\n  (:action permissionFlow_bulk\n    :parameters (?id2 ?id1)\n    :precondition (and\n      (not (selection_open))\n      {FLOW_DISJUNCTION_ID1_ID2})\n    :effect (and\n      (forall (?perm ?x) (when (id_tpl ?id2 ?perm ?x) (id_tpl ?id1 ?perm ?x)))\n      (forall (?perm ?x) (when (ds_tpl ?id2 ?perm ?x) (ds_tpl ?id1 ?perm ?x)))\n      (forall (?a ?perm ?b) (when (id_4tpl ?id2 ?a ?perm ?b) (id_4tpl ?id1 ?a ?perm ?b)))\n      (forall (?a ?perm ?b) (when (ds_4tpl ?id2 ?a ?perm ?b) (ds_4tpl ?id1 ?a ?perm ?b)))))"
            )
            .unwrap();
        }
    }

    writeln!(
        w,
        "\n  (:action add_id_3tpl\n    :parameters (?id1 ?id2 ?perm ?id3)\n    :precondition (and\n      (not (selection_open))\n      (not (id_tpl ?id2 ?perm ?id3))\n      (compromised_id ?id1)\n      (id_4tpl ?id1 ?id2 ?perm ?id3))\n    :effect (id_tpl ?id2 ?perm ?id3))"
    )
    .unwrap();
    writeln!(
        w,
        "\n  (:action add_ds_3tpl\n    :parameters (?id1 ?id2 ?perm ?ds)\n    :precondition (and\n      (not (selection_open))\n      (not (ds_tpl ?id2 ?perm ?ds))\n      (compromised_id ?id1)\n      (ds_4tpl ?id1 ?id2 ?perm ?ds))\n    :effect (ds_tpl ?id2 ?perm ?ds))"
    )
    .unwrap();
    // The any_user keyword in a held 4-tuple's subject slot may be bound to
    // any concrete user when the tuple is added.
    writeln!(
        w,
        "\n  (:action add_id_3tpl_any_user\n    :parameters (?id1 ?id2 ?perm ?id3)\n    :precondition (and\n      (not (selection_open))\n      (not (id_tpl ?id2 ?perm ?id3))\n      (compromised_id ?id1)\n      (user_pred ?id2)\n      (id_4tpl ?id1 any_user ?perm ?id3))\n    :effect (id_tpl ?id2 ?perm ?id3))"
    )
    .unwrap();
    writeln!(
        w,
        "\n  (:action add_ds_3tpl_any_user\n    :parameters (?id1 ?id2 ?perm ?ds)\n    :precondition (and\n      (not (selection_open))\n      (not (ds_tpl ?id2 ?perm ?ds))\n      (compromised_id ?id1)\n      (user_pred ?id2)\n      (ds_4tpl ?id1 any_user ?perm ?ds))\n    :effect (ds_tpl ?id2 ?perm ?ds))"
    )
    .unwrap();

    writeln!(
        w,
        "\n  (:action activate_id_3tpl\n    :parameters (?id1 ?perm ?id2)\n    :precondition (and\n      (not (selection_open))\n      (not (id_tpl ?id1 ?perm ?id2))\n      (or\n        (id_tpl ?id1 full_control ?id2)\n        (id_tpl ?id1 full_control any_user)\n        (id_tpl ?id1 ?perm any_user)))\n    :effect (id_tpl ?id1 ?perm ?id2))"
    )
    .unwrap();
    writeln!(
        w,
        "\n  (:action activate_ds_3tpl\n    :parameters (?id1 ?perm ?ds)\n    :precondition (and\n      (not (selection_open))\n      (not (ds_tpl ?id1 ?perm ?ds))\n      (or\n        (ds_tpl ?id1 full_control ?ds)\n        (ds_tpl ?id1 full_control any_datastore)\n        (ds_tpl ?id1 ?perm any_datastore)))\n    :effect (ds_tpl ?id1 ?perm ?ds))"
    )
    .unwrap();

    writeln!(
        w,
        "\n  (:action copyObject\n    :parameters (?id ?ds1 ?ds2)\n    :precondition (and\n      (not (selection_open))\n      (compromised_id ?id)\n      (has_sensitive_data ?ds1)\n      (not (is_dummy_datastore ?ds1))\n      (not (is_dummy_datastore ?ds2))\n      (ds_tpl ?id s3_GetObject ?ds1)\n      (ds_tpl ?id s3_PutObject ?ds2))\n    :effect (and\n      (has_sensitive_data ?ds2)\n      (when (is_public_datastore ?ds2) (sensitive_data_exfiltration))))"
    )
    .unwrap();
    writeln!(
        w,
        "\n  (:action moveObject\n    :parameters (?id ?ds1 ?ds2)\n    :precondition (and\n      (not (selection_open))\n      (compromised_id ?id)\n      (has_sensitive_data ?ds1)\n      (not (is_dummy_datastore ?ds1))\n      (not (is_dummy_datastore ?ds2))\n      (ds_tpl ?id s3_GetObject ?ds1)\n      (ds_tpl ?id s3_DeleteObject ?ds1)\n      (ds_tpl ?id s3_PutObject ?ds2))\n    :effect (and\n      (has_sensitive_data ?ds2)\n      (not (has_sensitive_data ?ds1))\n      (when (is_public_datastore ?ds2) (sensitive_data_exfiltration))))"
    )
    .unwrap();
    writeln!(
        w,
        "\n  (:action deleteBucket\n    :parameters (?id ?ds)\n    :precondition (and\n      (not (selection_open))\n      (compromised_id ?id)\n      (has_sensitive_data ?ds)\n      (not (is_dummy_datastore ?ds))\n      (ds_tpl ?id deleteBucket ?ds))\n    :effect (impact))"
    )
    .unwrap();
    writeln!(
        w,
        "\n  (:action deleteIdentity\n    :parameters (?id ?perm ?target)\n    :precondition (and\n      (not (selection_open))\n      (compromised_id ?id)\n      (impact_permission ?perm)\n      (or (user_pred ?target) (group_pred ?target) (role_pred ?target) (policy_pred ?target))\n      (id_tpl ?id ?perm ?target))\n    :effect (impact))"
    )
    .unwrap();
    writeln!(
        w,
        "\n  (:action createPublicBucket\n    :parameters (?id ?perm ?x ?dummy)\n    :precondition (and\n      (not (selection_open))\n      (compromised_id ?id)\n      (create_bucket_permission ?perm)\n      (is_dummy_datastore ?dummy)\n      (ds_tpl ?id ?perm ?x))\n    :effect (and\n      (not (is_dummy_datastore ?dummy))\n      (is_public_datastore ?dummy)))"
    )
    .unwrap();
    writeln!(
        w,
        "\n  (:action gainPersistenceAction\n    :parameters (?id ?perm ?x)\n    :precondition (and\n      (not (selection_open))\n      (compromised_id ?id)\n      (persistence_permission ?perm)\n      (or (id_tpl ?id ?perm ?x) (ds_tpl ?id ?perm ?x)))\n    :effect (and (persistence) (user_pred dummy_user)))"
    )
    .unwrap();
    writeln!(
        w,
        "\n  (:action changeUserLogin\n    :parameters (?id ?perm ?target)\n    :precondition (and\n      (not (selection_open))\n      (compromised_id ?id)\n      (login_permission ?perm)\n      (user_pred ?target)\n      (id_tpl ?id ?perm ?target))\n    :effect (lateral_movement))"
    )
    .unwrap();
    writeln!(
        w,
        "\n  (:action reachAdminPolicy\n    :parameters (?id)\n    :precondition (and\n      (not (selection_open))\n      (compromised_id ?id)\n      (id_tpl ?id hasPolicy adminPolicy))\n    :effect (privilege_escalation))"
    )
    .unwrap();
    writeln!(
        w,
        "\n  (:action encryptSensitiveData\n    :parameters (?id ?ds ?anyds)\n    :precondition (and\n      (not (selection_open))\n      (compromised_id ?id)\n      (has_sensitive_data ?ds)\n      (not (is_dummy_datastore ?ds))\n      (not (versioning_enabled ?ds))\n      (not (mfa_enabled ?ds))\n      (ds_tpl ?id s3_PutObject ?ds)\n      (ds_tpl ?id kms_CreateKey ?anyds))\n    :effect (ransomware))"
    )
    .unwrap();
    writeln!(w, ")").unwrap();
    PddlDocument { kind: PddlKind::Domain, text: s }
}

#[derive(Debug, thiserror::Error)]
pub enum PddlError {
    #[error("goal `{0}` has no PDDL encoding")]
    UnsupportedGoal(String),
}

/// Emit a problem file for one compiled state and goal, returning the
/// document together with the name table needed to de-alias plans.
pub fn emit_problem(
    initial: &IamState,
    catalog: &EntityCatalog,
    goal: AttackType,
    problem_name: &str,
) -> (PddlDocument, NameTable) {
    let table = NameTable::for_catalog(catalog);
    let constants: BTreeSet<&str> = domain_constants().into_iter().collect();
    let id = |e: &crate::model::EntityId| -> String {
        let name = e.name();
        if constants.contains(name) {
            return name.to_string();
        }
        table.ident(name).expect("catalog entity has a table entry").to_string()
    };

    let mut objects: BTreeSet<String> = BTreeSet::new();
    for entry in catalog.entries() {
        let ident = id(&entry.id);
        if !constants.contains(ident.as_str()) {
            objects.insert(ident);
        }
    }
    // Permission tokens referenced in init but not fixed as constants.
    for def in vocab::TOKENS {
        if !constants.contains(def.token) {
            objects.insert(def.token.to_string());
        }
    }
    for t in &initial.tuples {
        let tok = t.perm().as_str();
        if !constants.contains(tok) {
            objects.insert(tok.to_string());
        }
    }

    let mut init: Vec<String> = Vec::new();
    if initial.compromised.is_empty() {
        init.push("(selection_open)".to_string());
    }
    for c in &initial.compromised {
        init.push(format!("(compromised_id {})", id(c)));
    }
    for entry in catalog.entries() {
        if entry.sentinel {
            continue;
        }
        let ident = id(&entry.id);
        match entry.kind {
            EntityKind::User => {
                // The dummy user only becomes a user once materialized.
                if !entry.dummy || initial.is_created(&entry.id) {
                    init.push(format!("(user_pred {ident})"));
                }
            }
            EntityKind::Group => init.push(format!("(group_pred {ident})")),
            EntityKind::Role => init.push(format!("(role_pred {ident})")),
            EntityKind::Policy => init.push(format!("(policy_pred {ident})")),
            EntityKind::Datastore => {
                init.push(format!("(datastore_pred {ident})"));
                let created = initial.is_created(&entry.id);
                if entry.dummy && !created {
                    init.push(format!("(is_dummy_datastore {ident})"));
                }
                if catalog.is_public(&entry.id, initial) {
                    init.push(format!("(is_public_datastore {ident})"));
                }
                if catalog.versioning_enabled(&entry.id) {
                    init.push(format!("(versioning_enabled {ident})"));
                }
                if catalog.mfa_delete_enabled(&entry.id) {
                    init.push(format!("(mfa_enabled {ident})"));
                }
            }
        }
    }
    for s in &initial.sensitive {
        init.push(format!("(has_sensitive_data {})", id(s)));
    }
    for t in &initial.tuples {
        init.push(match t {
            RelTuple::Id3 { src, perm, dst } => {
                format!("(id_tpl {} {} {})", id(src), perm, id(dst))
            }
            RelTuple::Ds3 { src, perm, ds } => {
                format!("(ds_tpl {} {} {})", id(src), perm, id(ds))
            }
            RelTuple::Id4 { actor, subj, perm, dst } => {
                format!("(id_4tpl {} {} {} {})", id(actor), id(subj), perm, id(dst))
            }
            RelTuple::Ds4 { actor, subj, perm, ds } => {
                format!("(ds_4tpl {} {} {} {})", id(actor), id(subj), perm, id(ds))
            }
        });
    }
    // Static permission classification.
    for (role, pred) in [
        (TokenRole::Persistence, "persistence_permission"),
        (TokenRole::LoginChange, "login_permission"),
        (TokenRole::ImpactIdentity, "impact_permission"),
        (TokenRole::CreateBucket, "create_bucket_permission"),
    ] {
        for def in vocab::tokens_with_role(role) {
            init.push(format!("({pred} {})", def.token));
        }
    }
    init.sort();
    init.dedup();

    let mut s = String::new();
    let w = &mut s;
    writeln!(w, "(define (problem {problem_name})").unwrap();
    writeln!(w, "  (:domain {DOMAIN_NAME})").unwrap();
    writeln!(w, "  (:objects").unwrap();
    for o in &objects {
        writeln!(w, "    {o}").unwrap();
    }
    writeln!(w, "  )").unwrap();
    writeln!(w, "  (:init").unwrap();
    for fact in &init {
        writeln!(w, "    {fact}").unwrap();
    }
    writeln!(w, "  )").unwrap();
    writeln!(w, "  (:goal ({}))", goal.name()).unwrap();
    writeln!(w, ")").unwrap();

    (PddlDocument { kind: PddlKind::Problem, text: s }, table)
}
