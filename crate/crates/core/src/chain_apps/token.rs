//! Capability tokens: short-lived, MAC-sealed proof of a GRANT decision.
//!
//! Validation re-reads the policy, so a revocation takes effect on the
//! next validation regardless of the token's remaining lifetime.

use std::fmt;

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::codec::{to_canonical, Hash32, TokenId};
use crate::ids::{ActorId, DataId};

use super::policy::{evaluate_access, Decision, Permission, PolicyStatus};
use super::reason::DenyReason;
use super::state::ChainState;

pub const DEFAULT_TOKEN_TTL: u64 = 300;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityToken {
    pub token_id: TokenId,
    pub subject: ActorId,
    pub data_id: DataId,
    pub permission: Permission,
    pub issued_at: i64,
    pub ttl_seconds: u64,
    pub mac: Hash32,
}

#[derive(Serialize)]
struct TokenBody<'a> {
    data_id: &'a DataId,
    issued_at: i64,
    permission: Permission,
    subject: &'a ActorId,
    token_id: &'a TokenId,
    ttl_seconds: u64,
}

impl CapabilityToken {
    fn body(&self) -> TokenBody<'_> {
        TokenBody {
            data_id: &self.data_id,
            issued_at: self.issued_at,
            permission: self.permission,
            subject: &self.subject,
            token_id: &self.token_id,
            ttl_seconds: self.ttl_seconds,
        }
    }

    pub fn expires_at(&self) -> i64 {
        self.issued_at.saturating_add(self.ttl_seconds.min(i64::MAX as u64) as i64)
    }
}

fn compute_mac(secret: &Hash32, body: &TokenBody<'_>) -> Hash32 {
    let mut mac = Hmac::<Sha256>::new_from_slice(&secret.0).expect("HMAC accepts any key length");
    mac.update(&to_canonical(body).expect("token body is canonical"));
    Hash32(mac.finalize().into_bytes().into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenRejection {
    BadMac,
    Expired,
    NotYetValid,
    DataMismatch,
    PermissionMismatch,
    Revoked,
    NoPolicy,
    UnknownDataId,
}

impl TokenRejection {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenRejection::BadMac => "bad_mac",
            TokenRejection::Expired => "expired",
            TokenRejection::NotYetValid => "not_yet_valid",
            TokenRejection::DataMismatch => "data_mismatch",
            TokenRejection::PermissionMismatch => "permission_mismatch",
            TokenRejection::Revoked => "revoked",
            TokenRejection::NoPolicy => "no_policy",
            TokenRejection::UnknownDataId => "unknown_data_id",
        }
    }
}

impl fmt::Display for TokenRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `Ok(())` when the token may be used right now.
pub type TokenCheck = Result<(), TokenRejection>;

/// Issues a token for a decision that evaluates to GRANT at `now`.
pub fn issue_token(
    state: &ChainState,
    actor: &ActorId,
    data_id: &DataId,
    permission: Permission,
    now: i64,
    ttl_seconds: u64,
    token_id: TokenId,
) -> Result<CapabilityToken, DenyReason> {
    match evaluate_access(state, actor, data_id, permission, now)? {
        Decision::Grant { .. } => {}
        Decision::Deny { reason } => return Err(reason),
    }
    let mut token = CapabilityToken {
        token_id,
        subject: actor.clone(),
        data_id: data_id.clone(),
        permission,
        issued_at: now,
        ttl_seconds,
        mac: Hash32::ZERO,
    };
    token.mac = compute_mac(&state.token_secret, &token.body());
    Ok(token)
}

pub fn validate_token(
    state: &ChainState,
    token: &CapabilityToken,
    data_id: &DataId,
    permission: Permission,
    now: i64,
) -> TokenCheck {
    // Constant-time comparison through the MAC API.
    let mut mac =
        Hmac::<Sha256>::new_from_slice(&state.token_secret.0).expect("HMAC accepts any key length");
    mac.update(&to_canonical(&token.body()).expect("token body is canonical"));
    if mac.verify_slice(&token.mac.0).is_err() {
        return Err(TokenRejection::BadMac);
    }
    if now < token.issued_at {
        return Err(TokenRejection::NotYetValid);
    }
    if now >= token.expires_at() {
        return Err(TokenRejection::Expired);
    }
    if &token.data_id != data_id {
        return Err(TokenRejection::DataMismatch);
    }
    if token.permission != permission {
        return Err(TokenRejection::PermissionMismatch);
    }
    let owner = state
        .owners
        .get(data_id)
        .ok_or(TokenRejection::UnknownDataId)?;
    if owner == &token.subject {
        return Ok(());
    }
    let entries = state.policies.get(data_id).into_iter().flatten().filter(|e| {
        e.grantee == token.subject && e.permission == permission
    });
    let mut revoked = false;
    for e in entries {
        if e.is_live(now) {
            return Ok(());
        }
        revoked |= e.status == PolicyStatus::Revoked;
    }
    Err(if revoked {
        TokenRejection::Revoked
    } else {
        TokenRejection::NoPolicy
    })
}
