use serde::{Deserialize, Serialize};

use crate::codec::SaltedDigest;
use crate::ids::DataId;

use super::reason::DenyReason;
use super::state::ChainState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordStatus {
    Active,
    Erased,
}

/// On-chain anchor of an off-chain record. An erased record keeps its
/// digest but is never used to verify anything again.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityRecord {
    pub data_id: DataId,
    pub link: String,
    pub digest: SaltedDigest,
    pub version: u32,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub erased_at: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerifyResult {
    Valid,
    Invalid,
    Erased,
    Unknown,
}

impl VerifyResult {
    pub fn as_str(self) -> &'static str {
        match self {
            VerifyResult::Valid => "VALID",
            VerifyResult::Invalid => "INVALID",
            VerifyResult::Erased => "ERASED",
            VerifyResult::Unknown => "UNKNOWN",
        }
    }
}

pub(crate) fn check_record(state: &ChainState, data_id: &DataId) -> Result<(), DenyReason> {
    if !state.owners.contains_key(data_id) {
        return Err(DenyReason::UnknownDataId);
    }
    match state.integrity.get(data_id).map(|r| r.status) {
        None => Ok(()),
        Some(RecordStatus::Active) => Err(DenyReason::DuplicateActiveRecord),
        Some(RecordStatus::Erased) => Err(DenyReason::Erased),
    }
}

fn active_mut<'a>(
    state: &'a mut ChainState,
    data_id: &DataId,
) -> Result<&'a mut IntegrityRecord, DenyReason> {
    match state.integrity.get_mut(data_id) {
        None => Err(DenyReason::NoActiveRecord),
        Some(r) if r.status == RecordStatus::Erased => Err(DenyReason::Erased),
        Some(r) => Ok(r),
    }
}

/// Creates version 1 of the anchor for `data_id`.
pub fn record_integrity(
    state: &mut ChainState,
    data_id: &DataId,
    link: &str,
    digest: SaltedDigest,
) -> Result<IntegrityRecord, DenyReason> {
    check_record(state, data_id)?;
    let record = IntegrityRecord {
        data_id: data_id.clone(),
        link: link.to_string(),
        digest,
        version: 1,
        status: RecordStatus::Active,
        erased_at: None,
    };
    state.integrity.insert(data_id.clone(), record.clone());
    Ok(record)
}

/// Replaces the digest after a modification and bumps the version.
pub fn update_integrity(
    state: &mut ChainState,
    data_id: &DataId,
    digest: SaltedDigest,
) -> Result<IntegrityRecord, DenyReason> {
    let r = active_mut(state, data_id)?;
    r.digest = digest;
    r.version += 1;
    Ok(r.clone())
}

pub fn erase_integrity(
    state: &mut ChainState,
    data_id: &DataId,
    at: i64,
) -> Result<IntegrityRecord, DenyReason> {
    let r = active_mut(state, data_id)?;
    r.status = RecordStatus::Erased;
    r.erased_at = Some(at);
    Ok(r.clone())
}

/// Compares a candidate digest with the active anchor. A missing candidate
/// (the store could not produce one) is INVALID unless the record is gone.
pub fn verify_integrity(
    state: &ChainState,
    data_id: &DataId,
    candidate: Option<&SaltedDigest>,
) -> VerifyResult {
    match state.integrity.get(data_id) {
        None => VerifyResult::Unknown,
        Some(r) if r.status == RecordStatus::Erased => VerifyResult::Erased,
        Some(r) if candidate == Some(&r.digest) => VerifyResult::Valid,
        Some(_) => VerifyResult::Invalid,
    }
}
