//! The closed permission vocabulary and the AWS-API-to-token mapping.
//!
//! This table is the single source of truth shared by policy compilation and
//! PDDL emission. AWS action strings are canonicalized at ingest
//! (`s3:GetObject` becomes `s3_GetObject`) because PDDL identifiers cannot
//! contain colons.

use std::collections::BTreeSet;

use crate::model::PermissionName;

/// Structural permission: flow via role assumption.
pub const ASSUME_ROLE: &str = "assumeRole";
/// Structural permission: flow via group membership.
pub const BELONGS_TO: &str = "belongsTo";
/// Structural permission: flow via policy attachment.
pub const HAS_POLICY: &str = "hasPolicy";
/// Wildcard token matching any permission.
pub const FULL_CONTROL: &str = "full_control";

pub const S3_GET_OBJECT: &str = "s3_GetObject";
pub const S3_PUT_OBJECT: &str = "s3_PutObject";
pub const S3_DELETE_OBJECT: &str = "s3_DeleteObject";
pub const S3_COPY_OBJECT: &str = "s3_CopyObject";
pub const S3_CREATE_BUCKET: &str = "s3_CreateBucket";
pub const S3_PUT_BUCKET_ACL: &str = "s3_PutBucketAcl";
pub const DELETE_BUCKET: &str = "deleteBucket";
pub const KMS_CREATE_KEY: &str = "kms_CreateKey";

/// Which slot family a permission's final tuple slot references.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetFamily {
    Identity,
    Datastore,
}

/// What the planner reads a token for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenRole {
    /// Activates permission flow between identities.
    Structural,
    /// Object-level read/write/delete/copy on a datastore.
    ObjectRw,
    /// Enables the bucket-deletion impact action.
    DeleteBucket,
    /// Enables materializing the public dummy bucket.
    CreateBucket,
    /// Key-creation capability required by the ransomware action.
    EncryptKey,
    /// Enables the persistence action.
    Persistence,
    /// Password/login takeover, enables lateral movement.
    LoginChange,
    /// Deletion or removal of identities, keys, or policies.
    ImpactIdentity,
}

/// One canonical 3-tuple-producing token.
#[derive(Debug, Clone, Copy)]
pub struct TokenDef {
    pub token: &'static str,
    /// AWS API string this token canonicalizes, when one exists. Action
    /// patterns in policy documents are matched against these.
    pub aws_name: Option<&'static str>,
    pub family: TargetFamily,
    pub role: TokenRole,
}

/// The Table-2 surface: every modeled AWS API that grants a plain permission
/// tuple, plus the structural permissions and the derived copy token.
pub const TOKENS: &[TokenDef] = &[
    TokenDef { token: ASSUME_ROLE, aws_name: Some("sts:AssumeRole"), family: TargetFamily::Identity, role: TokenRole::Structural },
    TokenDef { token: BELONGS_TO, aws_name: None, family: TargetFamily::Identity, role: TokenRole::Structural },
    TokenDef { token: HAS_POLICY, aws_name: None, family: TargetFamily::Identity, role: TokenRole::Structural },
    TokenDef { token: S3_GET_OBJECT, aws_name: Some("s3:GetObject"), family: TargetFamily::Datastore, role: TokenRole::ObjectRw },
    TokenDef { token: S3_PUT_OBJECT, aws_name: Some("s3:PutObject"), family: TargetFamily::Datastore, role: TokenRole::ObjectRw },
    TokenDef { token: S3_DELETE_OBJECT, aws_name: Some("s3:DeleteObject"), family: TargetFamily::Datastore, role: TokenRole::ObjectRw },
    // Derived token: emitted when GetObject and PutObject coexist for the
    // same (identity, datastore) pair; also matches `s3:*Object` patterns.
    TokenDef { token: S3_COPY_OBJECT, aws_name: Some("s3:CopyObject"), family: TargetFamily::Datastore, role: TokenRole::ObjectRw },
    TokenDef { token: S3_CREATE_BUCKET, aws_name: Some("s3:CreateBucket"), family: TargetFamily::Datastore, role: TokenRole::CreateBucket },
    TokenDef { token: S3_PUT_BUCKET_ACL, aws_name: Some("s3:PutBucketAcl"), family: TargetFamily::Datastore, role: TokenRole::CreateBucket },
    TokenDef { token: DELETE_BUCKET, aws_name: Some("s3:DeleteBucket"), family: TargetFamily::Datastore, role: TokenRole::DeleteBucket },
    TokenDef { token: KMS_CREATE_KEY, aws_name: Some("kms:CreateKey"), family: TargetFamily::Datastore, role: TokenRole::EncryptKey },
    TokenDef { token: "iam_CreateUser", aws_name: Some("iam:CreateUser"), family: TargetFamily::Identity, role: TokenRole::Persistence },
    TokenDef { token: "iam_CreateLoginProfile", aws_name: Some("iam:CreateLoginProfile"), family: TargetFamily::Identity, role: TokenRole::LoginChange },
    TokenDef { token: "iam_UpdateLoginProfile", aws_name: Some("iam:UpdateLoginProfile"), family: TargetFamily::Identity, role: TokenRole::Persistence },
    TokenDef { token: "iam_ChangePassword", aws_name: Some("iam:ChangePassword"), family: TargetFamily::Identity, role: TokenRole::LoginChange },
    TokenDef { token: "iam_DeleteUserPolicy", aws_name: Some("iam:DeleteUserPolicy"), family: TargetFamily::Identity, role: TokenRole::ImpactIdentity },
    TokenDef { token: "iam_DetachUserPolicy", aws_name: Some("iam:DetachUserPolicy"), family: TargetFamily::Identity, role: TokenRole::ImpactIdentity },
    TokenDef { token: "iam_DeleteAccessKey", aws_name: Some("iam:DeleteAccessKey"), family: TargetFamily::Identity, role: TokenRole::ImpactIdentity },
    TokenDef { token: "iam_UpdateAccessKey", aws_name: Some("iam:UpdateAccessKey"), family: TargetFamily::Identity, role: TokenRole::ImpactIdentity },
    TokenDef { token: "iam_DeactivateMFADevice", aws_name: Some("iam:DeactivateMFADevice"), family: TargetFamily::Identity, role: TokenRole::ImpactIdentity },
    TokenDef { token: "iam_DeleteGroup", aws_name: Some("iam:DeleteGroup"), family: TargetFamily::Identity, role: TokenRole::ImpactIdentity },
    TokenDef { token: "iam_RemoveUserFromGroup", aws_name: Some("iam:RemoveUserFromGroup"), family: TargetFamily::Identity, role: TokenRole::ImpactIdentity },
    TokenDef { token: "iam_DeleteRole", aws_name: Some("iam:DeleteRole"), family: TargetFamily::Identity, role: TokenRole::ImpactIdentity },
    TokenDef { token: "iam_DeleteRolePolicy", aws_name: Some("iam:DeleteRolePolicy"), family: TargetFamily::Identity, role: TokenRole::ImpactIdentity },
    TokenDef { token: "iam_DetachRolePolicy", aws_name: Some("iam:DetachRolePolicy"), family: TargetFamily::Identity, role: TokenRole::ImpactIdentity },
    TokenDef { token: "iam_DeletePolicy", aws_name: Some("iam:DeletePolicy"), family: TargetFamily::Identity, role: TokenRole::ImpactIdentity },
    TokenDef { token: "lambda_CreateFunction", aws_name: Some("lambda:CreateFunction"), family: TargetFamily::Datastore, role: TokenRole::Persistence },
    TokenDef { token: "lambda_UpdateFunctionCode", aws_name: Some("lambda:UpdateFunctionCode"), family: TargetFamily::Datastore, role: TokenRole::Persistence },
    TokenDef { token: "ec2_RunInstances", aws_name: Some("ec2:RunInstances"), family: TargetFamily::Datastore, role: TokenRole::Persistence },
    TokenDef { token: "ec2_ModifyInstanceAttribute", aws_name: Some("ec2:ModifyInstanceAttribute"), family: TargetFamily::Datastore, role: TokenRole::Persistence },
    TokenDef { token: "ssm_SendCommand", aws_name: Some("ssm:SendCommand"), family: TargetFamily::Datastore, role: TokenRole::Persistence },
    TokenDef { token: "ssm_StartSession", aws_name: Some("ssm:StartSession"), family: TargetFamily::Datastore, role: TokenRole::Persistence },
];

/// How a tuple-adding API binds its 4-tuple slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tuple4Shape {
    /// The policy resource names the subject; the attached policy comes from
    /// the `aws:RequestTag/policy-id` condition, defaulting to `adminPolicy`.
    /// Yields `(holder, resource, hasPolicy, policy-id | adminPolicy)`.
    PolicyAttachment,
    /// The resource names the target; the subject comes from the
    /// `aws:RequestTag/user-name` condition, defaulting to `any_user`.
    /// Yields `(holder, user-name | any_user, perm, resource)`.
    SubjectGrant,
}

/// One AWS API that compiles to a 4-tuple rather than a plain permission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Api4Def {
    pub aws_name: &'static str,
    /// Structural permission written into the 4-tuple.
    pub perm: &'static str,
    pub shape: Tuple4Shape,
}

pub const TUPLE4_APIS: &[Api4Def] = &[
    Api4Def { aws_name: "iam:PutUserPolicy", perm: HAS_POLICY, shape: Tuple4Shape::PolicyAttachment },
    Api4Def { aws_name: "iam:AttachUserPolicy", perm: HAS_POLICY, shape: Tuple4Shape::PolicyAttachment },
    Api4Def { aws_name: "iam:PutGroupPolicy", perm: HAS_POLICY, shape: Tuple4Shape::PolicyAttachment },
    Api4Def { aws_name: "iam:AttachGroupPolicy", perm: HAS_POLICY, shape: Tuple4Shape::PolicyAttachment },
    Api4Def { aws_name: "iam:PutRolePolicy", perm: HAS_POLICY, shape: Tuple4Shape::PolicyAttachment },
    Api4Def { aws_name: "iam:AttachRolePolicy", perm: HAS_POLICY, shape: Tuple4Shape::PolicyAttachment },
    Api4Def { aws_name: "iam:CreatePolicyVersion", perm: HAS_POLICY, shape: Tuple4Shape::PolicyAttachment },
    Api4Def { aws_name: "iam:AddUserToGroup", perm: BELONGS_TO, shape: Tuple4Shape::SubjectGrant },
    Api4Def { aws_name: "iam:UpdateAssumeRolePolicy", perm: ASSUME_ROLE, shape: Tuple4Shape::SubjectGrant },
    Api4Def { aws_name: "iam:CreateAccessKey", perm: ASSUME_ROLE, shape: Tuple4Shape::SubjectGrant },
];

pub fn token_def(token: &str) -> Option<&'static TokenDef> {
    TOKENS.iter().find(|d| d.token == token)
}

pub fn api4_def(aws_name: &str) -> Option<&'static Api4Def> {
    TUPLE4_APIS.iter().find(|d| d.aws_name == aws_name)
}

/// Tokens with a given role.
pub fn tokens_with_role(role: TokenRole) -> impl Iterator<Item = &'static TokenDef> {
    TOKENS.iter().filter(move |d| d.role == role)
}

/// Glob match for AWS action patterns: `*` matches any run of characters,
/// `?` a single character. Everything else is literal.
pub fn glob_match(pattern: &str, candidate: &str) -> bool {
    fn rec(p: &[u8], c: &[u8]) -> bool {
        match p.split_first() {
            None => c.is_empty(),
            Some((b'*', rest)) => (0..=c.len()).any(|k| rec(rest, &c[k..])),
            Some((b'?', rest)) => !c.is_empty() && rec(rest, &c[1..]),
            Some((&ch, rest)) => c.first() == Some(&ch) && rec(rest, &c[1..]),
        }
    }
    rec(pattern.as_bytes(), candidate.as_bytes())
}

/// Result of expanding an action pattern against the vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionExpansion {
    /// The pattern was the bare wildcard `*`, standing for every permission.
    pub full_control: bool,
    /// Matched canonical 3-tuple tokens.
    pub tokens: BTreeSet<PermissionName>,
    /// Matched tuple-adding APIs.
    pub apis4: Vec<&'static Api4Def>,
}

impl ActionExpansion {
    pub fn is_empty(&self) -> bool {
        !self.full_control && self.tokens.is_empty() && self.apis4.is_empty()
    }
}

/// Expand an action pattern from a policy statement.
///
/// A bare `*` stands for hold-anything (`full_control`) rather than an
/// enumeration. Service-scoped patterns expand to every vocabulary entry
/// whose AWS name matches; anything outside the modeled vocabulary expands
/// to nothing and is left to the caller to report.
pub fn expand_action_pattern(pattern: &str) -> ActionExpansion {
    let mut out = ActionExpansion::default();
    if pattern == "*" {
        out.full_control = true;
        return out;
    }
    for def in TOKENS {
        if let Some(aws) = def.aws_name {
            if glob_match(pattern, aws) {
                out.tokens.insert(PermissionName::new(def.token));
            }
        }
    }
    for api in TUPLE4_APIS {
        if glob_match(pattern, api.aws_name) {
            out.apis4.push(api);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tokens(pattern: &str) -> Vec<String> {
        expand_action_pattern(pattern).tokens.iter().map(|p| p.as_str().to_string()).collect()
    }

    #[test]
    fn star_object_expands_to_the_four_object_tokens() {
        assert_eq!(
            tokens("s3:*Object"),
            vec!["s3_CopyObject", "s3_DeleteObject", "s3_GetObject", "s3_PutObject"]
        );
    }

    #[test]
    fn bare_star_is_full_control_not_an_enumeration() {
        let exp = expand_action_pattern("*");
        assert!(exp.full_control);
        assert!(exp.tokens.is_empty());
        assert!(exp.apis4.is_empty());
    }

    #[test]
    fn kms_star_key_star_expands_to_create_key() {
        assert_eq!(tokens("kms:*Key*"), vec![KMS_CREATE_KEY]);
    }

    #[test]
    fn unknown_action_expands_to_nothing() {
        assert!(expand_action_pattern("sagemaker:CreateNotebookInstance").is_empty());
    }

    #[test]
    fn attach_group_policy_maps_to_a_tuple4_api() {
        let exp = expand_action_pattern("iam:AttachGroupPolicy");
        assert!(exp.tokens.is_empty());
        assert_eq!(exp.apis4.len(), 1);
        assert_eq!(exp.apis4[0].shape, Tuple4Shape::PolicyAttachment);
        assert_eq!(exp.apis4[0].perm, HAS_POLICY);
    }

    #[test]
    fn glob_match_basics() {
        assert!(glob_match("s3:*", "s3:GetObject"));
        assert!(glob_match("s3:Get?bject", "s3:GetObject"));
        assert!(!glob_match("s3:*Object", "s3:DeleteBucket"));
        assert!(glob_match("*", "anything:AtAll"));
    }

    #[test]
    fn vocabulary_tokens_are_unique() {
        let mut seen = BTreeSet::new();
        for def in TOKENS {
            assert!(seen.insert(def.token), "duplicate token {}", def.token);
        }
    }
}
