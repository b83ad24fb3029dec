use std::fmt;

use serde::{Deserialize, Serialize};

/// Why a request, transaction or check was refused. Recorded verbatim in
/// audit entries and returned to callers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenyReason {
    BadSignature,
    StaleRequest,
    UnknownActor,
    UnknownKey,
    Role,
    UnknownDataId,
    UnknownGrantee,
    ConsentMissing,
    CountersignatureMissing,
    OwnerAuthorizationMissing,
    NotGranted,
    Revoked,
    Expired,
    WrongPermission,
    AlreadyGranted,
    NoActiveGrant,
    DuplicateDataId,
    DuplicateActiveRecord,
    NoActiveRecord,
    Erased,
    UnauthorizedSubmitter,
    InvalidRequest,
    TokenRejected,
    StoreFailure,
}

impl DenyReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DenyReason::BadSignature => "bad_signature",
            DenyReason::StaleRequest => "stale_request",
            DenyReason::UnknownActor => "unknown_actor",
            DenyReason::UnknownKey => "unknown_key",
            DenyReason::Role => "role",
            DenyReason::UnknownDataId => "unknown_data_id",
            DenyReason::UnknownGrantee => "unknown_grantee",
            DenyReason::ConsentMissing => "consent_missing",
            DenyReason::CountersignatureMissing => "countersignature_missing",
            DenyReason::OwnerAuthorizationMissing => "owner_authorization_missing",
            DenyReason::NotGranted => "not_granted",
            DenyReason::Revoked => "revoked",
            DenyReason::Expired => "expired",
            DenyReason::WrongPermission => "wrong_permission",
            DenyReason::AlreadyGranted => "already_granted",
            DenyReason::NoActiveGrant => "no_active_grant",
            DenyReason::DuplicateDataId => "duplicate_data_id",
            DenyReason::DuplicateActiveRecord => "duplicate_active_record",
            DenyReason::NoActiveRecord => "no_active_record",
            DenyReason::Erased => "erased",
            DenyReason::UnauthorizedSubmitter => "unauthorized_submitter",
            DenyReason::InvalidRequest => "invalid_request",
            DenyReason::TokenRejected => "token_rejected",
            DenyReason::StoreFailure => "store_failure",
        }
    }
}

impl fmt::Display for DenyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
