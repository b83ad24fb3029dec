use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::Hash32;
use crate::ids::{ActorId, DataId};

use super::reason::DenyReason;
use super::state::ChainState;

/// Flat permission set: no permission implies another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Permission {
    Read,
    Verify,
    Modify,
    Delete,
}

impl Permission {
    pub const ALL: [Permission; 4] = [
        Permission::Read,
        Permission::Verify,
        Permission::Modify,
        Permission::Delete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Permission::Read => "READ",
            Permission::Verify => "VERIFY",
            Permission::Modify => "MODIFY",
            Permission::Delete => "DELETE",
        }
    }
}

impl fmt::Display for Permission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Permission {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Permission::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown permission {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PolicyStatus {
    Active,
    Revoked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessPolicyEntry {
    pub data_id: DataId,
    pub grantee: ActorId,
    pub permission: Permission,
    pub granted_by: ActorId,
    pub status: PolicyStatus,
    /// Id of the transaction carrying the owner's signed consent.
    pub consent_ref: Hash32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expiry: Option<i64>,
}

impl AccessPolicyEntry {
    pub fn is_live(&self, now: i64) -> bool {
        self.status == PolicyStatus::Active && self.expiry.is_none_or(|e| now < e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Grant {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        link: Option<String>,
    },
    Deny { reason: DenyReason },
}

impl Decision {
    pub fn is_grant(&self) -> bool {
        matches!(self, Decision::Grant { .. })
    }
}

/// Grants the owner, or a holder of a live entry for exactly `permission`.
/// The audit entry for the call is written by the `AccessCheck`
/// transaction that wraps it.
pub fn evaluate_access(
    state: &ChainState,
    actor: &ActorId,
    data_id: &DataId,
    permission: Permission,
    now: i64,
) -> Result<Decision, DenyReason> {
    let owner = state.owners.get(data_id).ok_or(DenyReason::UnknownDataId)?;
    let link = state.integrity.get(data_id).map(|r| r.link.clone());
    if owner == actor {
        return Ok(Decision::Grant { link });
    }
    let mine: Vec<&AccessPolicyEntry> = state
        .policies
        .get(data_id)
        .into_iter()
        .flatten()
        .filter(|e| &e.grantee == actor)
        .collect();
    if mine.iter().any(|e| e.permission == permission && e.is_live(now)) {
        return Ok(Decision::Grant { link });
    }
    let same_perm = mine.iter().filter(|e| e.permission == permission);
    let reason = if same_perm.clone().any(|e| e.status == PolicyStatus::Active) {
        DenyReason::Expired
    } else if same_perm.clone().any(|e| e.status == PolicyStatus::Revoked) {
        DenyReason::Revoked
    } else if mine.iter().any(|e| e.is_live(now)) {
        DenyReason::WrongPermission
    } else {
        DenyReason::NotGranted
    };
    Ok(Decision::Deny { reason })
}
