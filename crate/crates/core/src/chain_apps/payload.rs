//! Transaction payloads for the three logical networks and the signed
//! statements actors embed in them.

use serde::{Deserialize, Serialize};

use crate::codec::{
    to_canonical, CanonicalBytes, Hash32, KeyPair, SaltedDigest, Signature, TokenId,
    VerificationKey,
};
use crate::ids::{ActorId, DataId};

use super::audit::{Outcome, UseCase};
use super::policy::Permission;
use super::token::CapabilityToken;

/// A verification key an actor used, with the proof linking it to a key
/// the chain already knows for that actor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyClaim {
    pub actor: ActorId,
    pub key: VerificationKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attestation: Option<Signature>,
}

#[derive(Serialize)]
struct AttestationBody<'a> {
    attest: &'a ActorId,
    key: &'a VerificationKey,
}

/// Bytes a parent key signs to vouch for `key` as another key of `actor`.
pub fn attestation_bytes(actor: &ActorId, key: &VerificationKey) -> CanonicalBytes {
    to_canonical(&AttestationBody { attest: actor, key }).expect("attestation body is canonical")
}

pub fn attest_key(parent: &KeyPair, actor: &ActorId, key: &VerificationKey) -> Signature {
    parent.sign(&attestation_bytes(actor, key))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Modify,
    Erase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Statement {
    /// Owner consents to `registrar` recording `data_id`.
    RegisterConsent { data_id: DataId, registrar: ActorId },
    /// Owner consents to `grantee` exercising `permission` on `data_id`.
    GrantConsent {
        data_id: DataId,
        grantee: ActorId,
        permission: Permission,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expiry: Option<i64>,
    },
    /// Countersignature or owner authorization for a change to `data_id`
    /// requested by `requester`. `content_digest` is the plain SHA-256 of
    /// the new content for modifications; it never goes on-chain.
    ChangeApproval {
        data_id: DataId,
        requester: ActorId,
        action: ChangeKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        content_digest: Option<Hash32>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedStatement {
    pub signer: ActorId,
    pub key: VerificationKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attestation: Option<Signature>,
    pub statement: Statement,
    pub signature: Signature,
}

#[derive(Serialize)]
struct StatementBody<'a> {
    key: &'a VerificationKey,
    signer: &'a ActorId,
    statement: &'a Statement,
}

impl SignedStatement {
    pub fn sign(
        signer: ActorId,
        key: &KeyPair,
        attestation: Option<Signature>,
        statement: Statement,
    ) -> SignedStatement {
        let vk = key.verification_key();
        let signature = key.sign(&Self::body_bytes(&signer, &vk, &statement));
        SignedStatement {
            signer,
            key: vk,
            attestation,
            statement,
            signature,
        }
    }

    fn body_bytes(signer: &ActorId, key: &VerificationKey, statement: &Statement) -> CanonicalBytes {
        to_canonical(&StatementBody {
            key,
            signer,
            statement,
        })
        .expect("statement body is canonical")
    }

    pub fn signature_valid(&self) -> bool {
        self.key.verifies(
            &Self::body_bytes(&self.signer, &self.key, &self.statement),
            &self.signature,
        )
    }

    pub fn claim(&self) -> KeyClaim {
        KeyClaim {
            actor: self.signer.clone(),
            key: self.key,
            attestation: self.attestation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PolicyTx {
    /// Registers `consent.signer` as owner of `data_id` and grants the
    /// controller and processors MODIFY/DELETE under that consent.
    RegisterOwner {
        data_id: DataId,
        registrar: ActorId,
        consent: SignedStatement,
    },
    Grant {
        data_id: DataId,
        grantee: ActorId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grantee_key: Option<VerificationKey>,
        permission: Permission,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expiry: Option<i64>,
        granted_by: ActorId,
        consent: SignedStatement,
    },
    Revoke {
        data_id: DataId,
        grantee: ActorId,
        permission: Permission,
        revoked_by: ActorId,
    },
}

impl PolicyTx {
    pub fn data_id(&self) -> &DataId {
        match self {
            PolicyTx::RegisterOwner { data_id, .. }
            | PolicyTx::Grant { data_id, .. }
            | PolicyTx::Revoke { data_id, .. } => data_id,
        }
    }

    pub fn actor(&self) -> &ActorId {
        match self {
            PolicyTx::RegisterOwner { registrar, .. } => registrar,
            PolicyTx::Grant { granted_by, .. } => granted_by,
            PolicyTx::Revoke { revoked_by, .. } => revoked_by,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum IntegrityTx {
    Record {
        data_id: DataId,
        link: String,
        digest: SaltedDigest,
    },
    Update {
        data_id: DataId,
        digest: SaltedDigest,
    },
    Erase {
        data_id: DataId,
    },
}

impl IntegrityTx {
    pub fn data_id(&self) -> &DataId {
        match self {
            IntegrityTx::Record { data_id, .. }
            | IntegrityTx::Update { data_id, .. }
            | IntegrityTx::Erase { data_id } => data_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AuditTx {
    /// Runs the access-policy evaluation and logs its decision.
    AccessCheck {
        actor: ActorId,
        data_id: DataId,
        permission: Permission,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        token_id: Option<TokenId>,
    },
    /// Runs token validation on behalf of the off-chain store.
    TokenValidate {
        token: CapabilityToken,
        data_id: DataId,
        permission: Permission,
    },
    IntegrityCheck {
        actor: ActorId,
        data_id: DataId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        candidate: Option<SaltedDigest>,
    },
    /// The single entry recording one gateway use-case invocation.
    UseCase {
        operation: UseCase,
        actor: ActorId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_id: Option<DataId>,
        outcome: Outcome,
        detail: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        signers: Vec<KeyClaim>,
    },
    Notify {
        actor: ActorId,
        owner: ActorId,
        data_id: DataId,
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "snake_case")]
pub enum Payload {
    Policy(PolicyTx),
    Integrity(IntegrityTx),
    Audit(AuditTx),
}

impl Payload {
    pub const KINDS: [&'static str; 3] = ["policy", "integrity", "audit"];

    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Policy(_) => "policy",
            Payload::Integrity(_) => "integrity",
            Payload::Audit(_) => "audit",
        }
    }

    /// Every verification key carried inside the payload.
    pub fn verification_keys(&self) -> Vec<VerificationKey> {
        match self {
            Payload::Policy(PolicyTx::RegisterOwner { consent, .. }) => vec![consent.key],
            Payload::Policy(PolicyTx::Grant {
                consent,
                grantee_key,
                ..
            }) => std::iter::once(consent.key).chain(*grantee_key).collect(),
            Payload::Policy(PolicyTx::Revoke { .. }) | Payload::Integrity(_) => Vec::new(),
            Payload::Audit(AuditTx::UseCase { signers, .. }) => {
                signers.iter().map(|c| c.key).collect()
            }
            Payload::Audit(_) => Vec::new(),
        }
    }
}
