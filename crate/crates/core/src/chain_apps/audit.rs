use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{ActorId, DataId};

use super::reason::DenyReason;
use super::state::{ChainState, Role};

/// The eight gateway use cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UseCase {
    #[serde(rename = "UC1")]
    Register,
    #[serde(rename = "UC2")]
    Grant,
    #[serde(rename = "UC3")]
    Revoke,
    #[serde(rename = "UC4")]
    Access,
    #[serde(rename = "UC5")]
    Verify,
    #[serde(rename = "UC6")]
    OwnerChange,
    #[serde(rename = "UC7")]
    ControllerChange,
    #[serde(rename = "UC8")]
    AuditLog,
}

impl UseCase {
    pub const ALL: [UseCase; 8] = [
        UseCase::Register,
        UseCase::Grant,
        UseCase::Revoke,
        UseCase::Access,
        UseCase::Verify,
        UseCase::OwnerChange,
        UseCase::ControllerChange,
        UseCase::AuditLog,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            UseCase::Register => "UC1",
            UseCase::Grant => "UC2",
            UseCase::Revoke => "UC3",
            UseCase::Access => "UC4",
            UseCase::Verify => "UC5",
            UseCase::OwnerChange => "UC6",
            UseCase::ControllerChange => "UC7",
            UseCase::AuditLog => "UC8",
        }
    }
}

impl fmt::Display for UseCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Tag of an audit entry: a use case, or one of the audited sub-steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Operation {
    #[serde(rename = "UC1")]
    Uc1,
    #[serde(rename = "UC2")]
    Uc2,
    #[serde(rename = "UC3")]
    Uc3,
    #[serde(rename = "UC4")]
    Uc4,
    #[serde(rename = "UC5")]
    Uc5,
    #[serde(rename = "UC6")]
    Uc6,
    #[serde(rename = "UC7")]
    Uc7,
    #[serde(rename = "UC8")]
    Uc8,
    AccessCheck,
    TokenValidate,
    IntegrityCheck,
    Notify,
    /// A policy transaction the chain refused.
    Policy,
    /// An integrity transaction the chain refused.
    Integrity,
    /// A transaction from a submitter outside the permissioned set.
    Submission,
}

impl Operation {
    pub fn use_case(self) -> Option<UseCase> {
        Some(match self {
            Operation::Uc1 => UseCase::Register,
            Operation::Uc2 => UseCase::Grant,
            Operation::Uc3 => UseCase::Revoke,
            Operation::Uc4 => UseCase::Access,
            Operation::Uc5 => UseCase::Verify,
            Operation::Uc6 => UseCase::OwnerChange,
            Operation::Uc7 => UseCase::ControllerChange,
            Operation::Uc8 => UseCase::AuditLog,
            _ => return None,
        })
    }
}

impl From<UseCase> for Operation {
    fn from(uc: UseCase) -> Operation {
        match uc {
            UseCase::Register => Operation::Uc1,
            UseCase::Grant => Operation::Uc2,
            UseCase::Revoke => Operation::Uc3,
            UseCase::Access => Operation::Uc4,
            UseCase::Verify => Operation::Uc5,
            UseCase::OwnerChange => Operation::Uc6,
            UseCase::ControllerChange => Operation::Uc7,
            UseCase::AuditLog => Operation::Uc8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Granted,
    Denied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub timestamp: i64,
    pub actor: ActorId,
    pub operation: Operation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_id: Option<DataId>,
    pub outcome: Outcome,
    pub detail: String,
}

/// Entry fields before a sequence number is assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditDraft {
    pub actor: ActorId,
    pub operation: Operation,
    pub data_id: Option<DataId>,
    pub outcome: Outcome,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_id: Option<DataId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<ActorId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_seq: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_seq: Option<u64>,
}

impl AuditFilter {
    pub fn for_data(data_id: DataId) -> AuditFilter {
        AuditFilter {
            data_id: Some(data_id),
            ..AuditFilter::default()
        }
    }

    fn matches(&self, e: &AuditEntry) -> bool {
        self.data_id.as_ref().is_none_or(|d| e.data_id.as_ref() == Some(d))
            && self.actor.as_ref().is_none_or(|a| &e.actor == a)
            && self.from_seq.is_none_or(|s| e.seq >= s)
            && self.to_seq.is_none_or(|s| e.seq <= s)
    }
}

/// Appends with the next dense sequence number (the first entry is 1).
pub fn append_audit(state: &mut ChainState, draft: AuditDraft, timestamp: i64) -> AuditEntry {
    let entry = AuditEntry {
        seq: state.audit.len() as u64 + 1,
        timestamp,
        actor: draft.actor,
        operation: draft.operation,
        data_id: draft.data_id,
        outcome: draft.outcome,
        detail: draft.detail,
    };
    state.audit.push(entry.clone());
    entry
}

/// Controller, processors and the supervisory authority may read the whole
/// log; an owner may read the entries of a record they own. The caller
/// records the query itself.
pub fn query_audit_log(
    state: &ChainState,
    requester: &ActorId,
    filter: &AuditFilter,
) -> Result<Vec<AuditEntry>, DenyReason> {
    let full_access = matches!(state.role_of(requester), Some(Role::Controller | Role::Processor))
        || state.is_supervisory(requester);
    if !full_access {
        let owns = filter
            .data_id
            .as_ref()
            .is_some_and(|d| state.owners.get(d) == Some(requester));
        if !owns {
            return Err(DenyReason::Role);
        }
    }
    Ok(state.audit.iter().filter(|e| filter.matches(e)).cloned().collect())
}
