use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::chain_apps::{AuditEntry, AuditFilter, Permission, Role, SignedStatement, UseCase};
use crate::codec::{
    from_canonical, to_canonical, CanonicalBytes, CodecError, Hash32, KeyPair, SaltedDigest,
    Signature, VerificationKey,
};
use crate::ids::{ActorId, DataId};

/// A signed invocation of one use case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UseCaseRequest {
    pub actor: ActorId,
    pub role_claim: Role,
    pub operation: UseCase,
    pub parameters: serde_json::Value,
    pub issued_at: i64,
    pub key: VerificationKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attestation: Option<Signature>,
    pub request_signature: Signature,
}

#[derive(Serialize)]
struct RequestBody<'a> {
    actor: &'a ActorId,
    #[serde(skip_serializing_if = "Option::is_none")]
    attestation: &'a Option<Signature>,
    issued_at: i64,
    key: &'a VerificationKey,
    operation: UseCase,
    parameters: &'a serde_json::Value,
    role_claim: Role,
}

impl UseCaseRequest {
    #[allow(clippy::too_many_arguments)]
    pub fn sign<P: Serialize>(
        actor: ActorId,
        role_claim: Role,
        operation: UseCase,
        parameters: &P,
        issued_at: i64,
        key: &KeyPair,
        attestation: Option<Signature>,
    ) -> Result<UseCaseRequest, CodecError> {
        let parameters = serde_json::to_value(parameters)
            .map_err(|e| CodecError::UnsupportedValue(e.to_string()))?;
        let mut req = UseCaseRequest {
            actor,
            role_claim,
            operation,
            parameters,
            issued_at,
            key: key.verification_key(),
            attestation,
            request_signature: Signature([0; 64]),
        };
        req.request_signature = key.sign(&req.body_bytes()?);
        Ok(req)
    }

    /// The bytes covered by `request_signature`.
    pub fn body_bytes(&self) -> Result<CanonicalBytes, CodecError> {
        to_canonical(&RequestBody {
            actor: &self.actor,
            attestation: &self.attestation,
            issued_at: self.issued_at,
            key: &self.key,
            operation: self.operation,
            parameters: &self.parameters,
            role_claim: self.role_claim,
        })
    }

    pub fn signature_valid(&self) -> bool {
        self.body_bytes()
            .is_ok_and(|b| self.key.verifies(&b, &self.request_signature))
    }

    pub fn params<P: DeserializeOwned>(&self) -> Result<P, String> {
        serde_json::from_value(self.parameters.clone()).map_err(|e| e.to_string())
    }

    pub fn to_canonical(&self) -> Result<CanonicalBytes, CodecError> {
        to_canonical(self)
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<UseCaseRequest, CodecError> {
        from_canonical(bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterParams {
    pub data_id: DataId,
    pub owner: ActorId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner_consent: Option<SignedStatement>,
    /// Canonical bytes of the record, hex encoded.
    pub plaintext: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantParams {
    pub data_id: DataId,
    pub grantee: ActorId,
    /// Enrols a recipient the chain has not seen before.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grantee_key: Option<VerificationKey>,
    pub permission: Permission,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expiry: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consent: Option<SignedStatement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevokeParams {
    pub data_id: DataId,
    pub grantee: ActorId,
    pub permission: Permission,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessParams {
    pub data_id: DataId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    /// Hex-encoded canonical bytes; salted inside the store.
    Plaintext(String),
    Digest(SaltedDigest),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyParams {
    pub data_id: DataId,
    pub candidate: Candidate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeAction {
    Modify { new_plaintext: String },
    Erase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeParams {
    pub data_id: DataId,
    pub action: ChangeAction,
    /// Staff countersignature (owner changes) or owner authorization
    /// (controller modifications).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approval: Option<SignedStatement>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditParams {
    #[serde(default)]
    pub filter: AuditFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResultOutcome {
    Granted,
    Denied,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UseCaseResult {
    pub outcome: ResultOutcome,
    pub operation: UseCase,
    pub payload: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// Sequence number of the audit entry recording this call.
    pub audit_seq: u64,
    /// Whether the signing key is now known to the chain.
    pub signer_recorded: bool,
}

impl UseCaseResult {
    pub fn is_granted(&self) -> bool {
        self.outcome == ResultOutcome::Granted
    }

    pub fn payload_as<P: DeserializeOwned>(&self) -> Result<P, String> {
        serde_json::from_value(self.payload.clone()).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterResult {
    pub data_id: DataId,
    pub link: String,
    pub digest: SaltedDigest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyResult {
    pub data_id: DataId,
    pub grantee: ActorId,
    pub permission: Permission,
    pub status: crate::chain_apps::PolicyStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expiry: Option<i64>,
    pub consent_ref: Hash32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessResult {
    pub data_id: DataId,
    pub link: String,
    /// Hex-encoded canonical bytes.
    pub plaintext: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub data_id: DataId,
    pub result: crate::chain_apps::VerifyResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnerNotice {
    pub owner: ActorId,
    pub data_id: DataId,
    pub action: crate::chain_apps::ChangeKind,
    pub notified_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeResult {
    pub data_id: DataId,
    pub action: crate::chain_apps::ChangeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<SaltedDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub erased_at: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner_notice: Option<OwnerNotice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditResult {
    pub entries: Vec<AuditEntry>,
}
