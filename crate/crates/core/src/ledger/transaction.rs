use serde::{Deserialize, Serialize};

use crate::chain_apps::Payload;
use crate::codec::{
    from_canonical, sha256, to_canonical, CanonicalBytes, Hash32, KeyPair, Signature,
    VerificationKey,
};

use super::LedgerError;

/// A signed request to change chain state. `tx_id` is the SHA-256 of the
/// canonical body and the submitter signs the same bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub tx_id: Hash32,
    pub submitter: VerificationKey,
    pub nonce: u64,
    pub timestamp: i64,
    /// Links a fresh submitter key to an already recorded one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attestation: Option<Signature>,
    pub payload: Payload,
    pub signature: Signature,
}

#[derive(Serialize)]
struct Body<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    attestation: &'a Option<Signature>,
    nonce: u64,
    payload: &'a Payload,
    submitter: &'a VerificationKey,
    timestamp: i64,
}

impl Transaction {
    pub fn new(
        submitter: &KeyPair,
        nonce: u64,
        timestamp: i64,
        attestation: Option<Signature>,
        payload: Payload,
    ) -> Transaction {
        let vk = submitter.verification_key();
        let body = Body {
            attestation: &attestation,
            nonce,
            payload: &payload,
            submitter: &vk,
            timestamp,
        };
        let bytes = to_canonical(&body).expect("transaction body is canonical");
        let tx_id = sha256(&bytes);
        let signature = submitter.sign(&bytes);
        Transaction {
            tx_id,
            submitter: vk,
            nonce,
            timestamp,
            attestation,
            payload,
            signature,
        }
    }

    pub fn body_bytes(&self) -> CanonicalBytes {
        to_canonical(&Body {
            attestation: &self.attestation,
            nonce: self.nonce,
            payload: &self.payload,
            submitter: &self.submitter,
            timestamp: self.timestamp,
        })
        .expect("transaction body is canonical")
    }

    pub fn compute_id(&self) -> Hash32 {
        sha256(&self.body_bytes())
    }

    /// Checks the id and the submitter signature.
    pub fn check(&self) -> Result<(), LedgerError> {
        let body = self.body_bytes();
        if sha256(&body) != self.tx_id {
            return Err(LedgerError::BadTxId);
        }
        if !self.submitter.verifies(&body, &self.signature) {
            return Err(LedgerError::BadSignature);
        }
        Ok(())
    }

    pub fn to_canonical(&self) -> CanonicalBytes {
        to_canonical(self).expect("transaction is canonical")
    }

    /// Parses a canonical transaction, naming an unknown payload kind
    /// explicitly instead of reporting a generic parse error.
    pub fn from_canonical(bytes: &[u8]) -> Result<Transaction, LedgerError> {
        let raw: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| LedgerError::Malformed(e.to_string()))?;
        if let Some(kind) = raw.pointer("/payload/kind").and_then(|k| k.as_str()) {
            if !Payload::KINDS.contains(&kind) {
                return Err(LedgerError::UnknownPayloadKind(kind.to_string()));
            }
        }
        from_canonical(bytes).map_err(|e| LedgerError::Malformed(e.to_string()))
    }
}
