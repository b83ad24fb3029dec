use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::chain_apps::{
    check_policy, issue_token, query_audit_log, AuditTx, CapabilityToken, ChangeKind, Decision,
    DenyReason, Effect, IntegrityTx, KeyClaim, KeyStatus, Outcome, Payload, Permission,
    PolicyStatus, PolicyTx, Role, SignedStatement, Statement, TokenCheck, TokenRejection, UseCase,
};
use crate::codec::{sha256, CanonicalBytes, TokenId};
use crate::ids::{ActorId, DataId};
use crate::offchain_store::{OffchainStore, StoreError, TokenAuthority};

use super::request::*;
use super::{Engine, GatewayError, GatewaySettings, Step};

enum Stop {
    Denied(DenyReason, Option<String>),
    Error(&'static str, String),
}

impl From<DenyReason> for Stop {
    fn from(r: DenyReason) -> Stop {
        Stop::Denied(r, None)
    }
}

impl From<GatewayError> for Stop {
    fn from(e: GatewayError) -> Stop {
        Stop::Error("internal", e.to_string())
    }
}

impl From<StoreError> for Stop {
    fn from(e: StoreError) -> Stop {
        let msg = Some(e.to_string());
        match e {
            StoreError::Erased(_) | StoreError::AlreadyErased(_) => Stop::Denied(DenyReason::Erased, msg),
            StoreError::TokenRejected(_) => Stop::Denied(DenyReason::TokenRejected, msg),
            StoreError::DuplicateDataId(_) => Stop::Denied(DenyReason::DuplicateDataId, msg),
            StoreError::NotFound(_) => Stop::Denied(DenyReason::NoActiveRecord, msg),
            other => Stop::Error("store_failure", other.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Stop {
    Stop::Error("invalid_request", msg.into())
}

struct Granted {
    payload: serde_json::Value,
    detail: String,
}

fn granted<P: Serialize>(payload: &P, detail: impl Into<String>) -> Result<Granted, Stop> {
    Ok(Granted {
        payload: serde_json::to_value(payload).map_err(|e| Stop::Error("internal", e.to_string()))?,
        detail: detail.into(),
    })
}

struct Call<'a> {
    engine: &'a mut Engine,
    store: &'a OffchainStore,
    settings: GatewaySettings,
    now: i64,
    req: &'a UseCaseRequest,
    /// Keys used in this invocation that the chain may not know yet.
    claims: Vec<KeyClaim>,
}

/// Token validation backed by an on-chain transaction.
struct ChainAuthority<'e> {
    engine: &'e mut Engine,
    now: i64,
    failure: Option<GatewayError>,
}

impl TokenAuthority for ChainAuthority<'_> {
    fn validate_token(
        &mut self,
        token: &CapabilityToken,
        data_id: &DataId,
        permission: Permission,
    ) -> TokenCheck {
        self.engine.step(Step::ValidateToken);
        let tx = AuditTx::TokenValidate {
            token: token.clone(),
            data_id: data_id.clone(),
            permission,
        };
        match self.engine.submit_outcome(Payload::Audit(tx), self.now) {
            Ok(o) => match o.effect {
                Effect::Token(check) => check,
                _ => Err(TokenRejection::NoPolicy),
            },
            Err(e) => {
                self.failure = Some(e);
                Err(TokenRejection::NoPolicy)
            }
        }
    }
}

fn decode_hex(s: &str, what: &str) -> Result<Vec<u8>, Stop> {
    hex::decode(s).map_err(|e| invalid(format!("{what} is not hex: {e}")))
}

fn decode_canonical(s: &str, what: &str) -> Result<CanonicalBytes, Stop> {
    CanonicalBytes::parse(&decode_hex(s, what)?)
        .map_err(|e| invalid(format!("{what} is not canonical: {e}")))
}

fn request_data_id(req: &UseCaseRequest) -> Option<DataId> {
    let p = &req.parameters;
    p.get("data_id")
        .or_else(|| p.pointer("/filter/data_id"))
        .and_then(|v| v.as_str())
        .and_then(|s| DataId::new(s).ok())
}

pub(super) fn run(
    engine: &mut Engine,
    store: &OffchainStore,
    settings: GatewaySettings,
    now: i64,
    req: &UseCaseRequest,
) -> UseCaseResult {
    let mut call = Call {
        engine,
        store,
        settings,
        now,
        req,
        claims: Vec::new(),
    };
    let result = call.authenticate().and_then(|()| call.dispatch());
    call.finish(result)
}

impl Call<'_> {
    fn actor(&self) -> &ActorId {
        &self.req.actor
    }

    fn role(&self) -> Option<Role> {
        self.engine.state().role_of(&self.req.actor)
    }

    fn is_staff(&self) -> bool {
        matches!(self.role(), Some(Role::Controller | Role::Processor))
    }

    fn require_staff(&self) -> Result<(), Stop> {
        if self.is_staff() {
            Ok(())
        } else {
            Err(DenyReason::Role.into())
        }
    }

    fn params<P: DeserializeOwned>(&self) -> Result<P, Stop> {
        self.req.params().map_err(invalid)
    }

    fn owner_of(&self, data_id: &DataId) -> Result<ActorId, Stop> {
        self.engine
            .state()
            .owner_of(data_id)
            .cloned()
            .ok_or(DenyReason::UnknownDataId.into())
    }

    fn submit(&mut self, payload: Payload) -> Result<crate::ledger::SubmitReceipt, Stop> {
        Ok(self.engine.submit(payload, self.now)?)
    }

    /// Submits and turns a chain-side refusal into a denial.
    fn submit_applied(&mut self, payload: Payload) -> Result<crate::ledger::SubmitReceipt, Stop> {
        let receipt = self.submit(payload)?;
        match receipt.outcome.effect {
            Effect::Rejected(r) => Err(r.into()),
            _ => Ok(receipt),
        }
    }

    fn authenticate(&mut self) -> Result<(), Stop> {
        let req = self.req;
        if !req.signature_valid() {
            return Err(DenyReason::BadSignature.into());
        }
        let window = self.settings.request_window;
        if (self.now - req.issued_at).abs() > window {
            return Err(DenyReason::StaleRequest.into());
        }
        let horizon = self.now - window;
        self.engine.seen.retain(|_, t| *t >= horizon);
        if self.engine.seen.contains_key(&req.request_signature.0) {
            return Err(Stop::Denied(DenyReason::StaleRequest, Some("replayed request".into())));
        }
        let role = self.role().ok_or(DenyReason::UnknownActor)?;
        if role == Role::Service || role != req.role_claim {
            return Err(DenyReason::Role.into());
        }
        self.engine
            .state()
            .key_status(&req.actor, &req.key, req.attestation.as_ref())?;
        self.engine.seen.insert(req.request_signature.0, req.issued_at);
        self.claims.push(KeyClaim {
            actor: req.actor.clone(),
            key: req.key,
            attestation: req.attestation,
        });
        Ok(())
    }

    fn dispatch(&mut self) -> Result<Granted, Stop> {
        match self.req.operation {
            UseCase::Register => self.register(),
            UseCase::Grant => self.grant(),
            UseCase::Revoke => self.revoke(),
            UseCase::Access => self.access(),
            UseCase::Verify => self.verify(),
            UseCase::OwnerChange => self.owner_change(),
            UseCase::ControllerChange => self.controller_change(),
            UseCase::AuditLog => self.audit_log(),
        }
    }

    /// Appends the use-case audit entry and seals the block.
    fn finish(mut self, result: Result<Granted, Stop>) -> UseCaseResult {
        let (outcome, detail, payload, reason, message) = match result {
            Ok(g) => (ResultOutcome::Granted, g.detail, g.payload, None, None),
            Err(Stop::Denied(r, msg)) => (
                ResultOutcome::Denied,
                r.as_str().to_string(),
                serde_json::json!({}),
                Some(r.as_str().to_string()),
                msg,
            ),
            Err(Stop::Error(code, msg)) => (
                ResultOutcome::Error,
                format!("error: {code}"),
                serde_json::json!({}),
                Some(code.to_string()),
                Some(msg),
            ),
        };
        let mut signers: Vec<KeyClaim> = Vec::new();
        for c in std::mem::take(&mut self.claims) {
            let fresh = self.engine.state().check_claim(&c) == Ok(KeyStatus::Attested);
            if fresh && !signers.iter().any(|s| s.key == c.key) {
                signers.push(c);
            }
        }
        let tx = AuditTx::UseCase {
            operation: self.req.operation,
            actor: self.req.actor.clone(),
            data_id: request_data_id(self.req),
            outcome: if outcome == ResultOutcome::Granted {
                Outcome::Granted
            } else {
                Outcome::Denied
            },
            detail,
            signers,
        };
        self.engine.step(Step::AppendAudit);
        let mut result = UseCaseResult {
            outcome,
            operation: self.req.operation,
            payload,
            reason,
            message,
            audit_seq: 0,
            signer_recorded: false,
        };
        let appended = self.engine.submit_outcome(Payload::Audit(tx), self.now);
        self.engine.step(Step::SealBlock);
        let sealed = self.engine.seal(self.now);
        match appended.and(sealed.map(|_| ())) {
            Ok(()) => {}
            Err(e) => {
                result.outcome = ResultOutcome::Error;
                result.reason = Some("internal".into());
                result.message = Some(e.to_string());
            }
        }
        result.audit_seq = self.engine.state().audit.len() as u64;
        result.signer_recorded = self
            .engine
            .state()
            .key_status(&self.req.actor, &self.req.key, None)
            == Ok(KeyStatus::Known);
        result
    }

    /// Runs the on-chain access check and, when asked, issues a token.
    fn authorize(
        &mut self,
        data_id: &DataId,
        permission: Permission,
        with_token: bool,
    ) -> Result<Option<CapabilityToken>, Stop> {
        self.engine.step(Step::EvaluateAccess);
        let token_id = with_token.then(|| {
            let mut raw = [0u8; 16];
            self.engine.rng.fill_bytes(&mut raw);
            TokenId(raw)
        });
        let tx = AuditTx::AccessCheck {
            actor: self.actor().clone(),
            data_id: data_id.clone(),
            permission,
            token_id,
        };
        match self.submit(Payload::Audit(tx))?.outcome.effect {
            Effect::Access(Decision::Grant { .. }) => {}
            Effect::Access(Decision::Deny { reason }) => return Err(reason.into()),
            other => return Err(Stop::Error("internal", format!("unexpected effect {other:?}"))),
        }
        let Some(token_id) = token_id else {
            return Ok(None);
        };
        self.engine.step(Step::IssueToken);
        let token = issue_token(
            self.engine.state(),
            self.actor(),
            data_id,
            permission,
            self.now,
            self.settings.token_ttl,
            token_id,
        )?;
        Ok(Some(token))
    }

    /// Runs a token-gated store operation with on-chain validation.
    fn with_store<T>(
        &mut self,
        op: impl FnOnce(&OffchainStore, &mut dyn TokenAuthority) -> Result<T, StoreError>,
    ) -> Result<T, Stop> {
        let mut authority = ChainAuthority {
            engine: self.engine,
            now: self.now,
            failure: None,
        };
        let result = op(self.store, &mut authority);
        if let Some(e) = authority.failure {
            return Err(e.into());
        }
        Ok(result?)
    }

    fn register(&mut self) -> Result<Granted, Stop> {
        self.require_staff()?;
        let p: RegisterParams = self.params()?;
        let consent = match p.owner_consent {
            Some(c) if c.signer == p.owner => c,
            _ => return Err(DenyReason::ConsentMissing.into()),
        };
        let plaintext = decode_canonical(&p.plaintext, "plaintext")?;
        if self.store.contains(&p.data_id) || self.store.is_erased(&p.data_id) {
            return Err(DenyReason::DuplicateDataId.into());
        }
        self.engine.step(Step::RegisterPolicy);
        let tx = PolicyTx::RegisterOwner {
            data_id: p.data_id.clone(),
            registrar: self.actor().clone(),
            consent,
        };
        check_policy(self.engine.state(), &tx, self.now)?;
        self.submit_applied(Payload::Policy(tx))?;
        self.engine.step(Step::StoreRecord);
        let (link, digest) = self
            .store
            .store_record(&p.data_id, &plaintext, &p.owner, self.now)?;
        self.engine.step(Step::RecordIntegrity);
        self.submit_applied(Payload::Integrity(IntegrityTx::Record {
            data_id: p.data_id.clone(),
            link: link.to_string(),
            digest,
        }))?;
        granted(
            &RegisterResult {
                data_id: p.data_id,
                link: link.to_string(),
                digest,
            },
            "registered",
        )
    }

    fn grant(&mut self) -> Result<Granted, Stop> {
        let p: GrantParams = self.params()?;
        let owner = self.owner_of(&p.data_id)?;
        if self.actor() != &owner && !self.is_staff() {
            return Err(DenyReason::Role.into());
        }
        let consent = p.consent.ok_or(DenyReason::ConsentMissing)?;
        // A key the chain already holds is left out so it does not show up
        // in a second transaction.
        let grantee_key = match (self.engine.state().actors.get(&p.grantee), p.grantee_key) {
            (Some(rec), Some(k)) if rec.keys.contains(&k) => None,
            (_, k) => k,
        };
        self.engine.step(Step::GrantPolicy);
        let tx = PolicyTx::Grant {
            data_id: p.data_id.clone(),
            grantee: p.grantee.clone(),
            grantee_key,
            permission: p.permission,
            expiry: p.expiry,
            granted_by: self.actor().clone(),
            consent,
        };
        check_policy(self.engine.state(), &tx, self.now)?;
        let receipt = self.submit_applied(Payload::Policy(tx))?;
        let detail = format!("{} to {}", p.permission, p.grantee);
        granted(
            &PolicyResult {
                data_id: p.data_id,
                grantee: p.grantee,
                permission: p.permission,
                status: PolicyStatus::Active,
                expiry: p.expiry,
                consent_ref: receipt.tx_id,
            },
            detail,
        )
    }

    fn revoke(&mut self) -> Result<Granted, Stop> {
        let p: RevokeParams = self.params()?;
        let owner = self.owner_of(&p.data_id)?;
        if self.actor() != &owner && !self.is_staff() {
            return Err(DenyReason::Role.into());
        }
        self.engine.step(Step::RevokePolicy);
        let tx = PolicyTx::Revoke {
            data_id: p.data_id.clone(),
            grantee: p.grantee.clone(),
            permission: p.permission,
            revoked_by: self.actor().clone(),
        };
        check_policy(self.engine.state(), &tx, self.now)?;
        let receipt = self.submit_applied(Payload::Policy(tx))?;
        let detail = format!("{} from {}", p.permission, p.grantee);
        granted(
            &PolicyResult {
                data_id: p.data_id,
                grantee: p.grantee,
                permission: p.permission,
                status: PolicyStatus::Revoked,
                expiry: None,
                consent_ref: receipt.tx_id,
            },
            detail,
        )
    }

    fn access(&mut self) -> Result<Granted, Stop> {
        let p: AccessParams = self.params()?;
        let token = self
            .authorize(&p.data_id, Permission::Read, true)?
            .expect("token requested");
        self.engine.step(Step::FetchRecord);
        let bytes = self.with_store(|s, auth| s.fetch_record(auth, &token, &p.data_id))?;
        let link = self.store.link_for(&p.data_id).to_string();
        granted(
            &AccessResult {
                data_id: p.data_id,
                link,
                plaintext: hex::encode(bytes.as_bytes()),
            },
            "read",
        )
    }

    fn verify(&mut self) -> Result<Granted, Stop> {
        let p: VerifyParams = self.params()?;
        let candidate = match &p.candidate {
            Candidate::Plaintext(h) => {
                let bytes = decode_hex(h, "candidate")?;
                let token = self
                    .authorize(&p.data_id, Permission::Verify, true)?
                    .expect("token requested");
                self.engine.step(Step::DigestCandidate);
                
                self.with_store(|s, auth| {
                    match s.digest_candidate(auth, &token, &p.data_id, &bytes) {
                        Ok(d) => Ok(Some(d)),
                        // The chain reports ERASED or UNKNOWN from here on.
                        Err(StoreError::Erased(_) | StoreError::NotFound(_)) => Ok(None),
                        Err(e) => Err(e),
                    }
                })?
            }
            Candidate::Digest(d) => {
                self.authorize(&p.data_id, Permission::Verify, false)?;
                Some(*d)
            }
        };
        self.engine.step(Step::VerifyIntegrity);
        let tx = AuditTx::IntegrityCheck {
            actor: self.actor().clone(),
            data_id: p.data_id.clone(),
            candidate,
        };
        let result = match self.submit(Payload::Audit(tx))?.outcome.effect {
            Effect::Integrity(r) => r,
            other => return Err(Stop::Error("internal", format!("unexpected effect {other:?}"))),
        };
        granted(
            &VerifyOutput {
                data_id: p.data_id,
                result,
            },
            result.as_str(),
        )
    }

    fn change_kind(action: &ChangeAction) -> ChangeKind {
        match action {
            ChangeAction::Modify { .. } => ChangeKind::Modify,
            ChangeAction::Erase => ChangeKind::Erase,
        }
    }

    fn content(action: &ChangeAction) -> Result<Option<CanonicalBytes>, Stop> {
        match action {
            ChangeAction::Modify { new_plaintext } => {
                Ok(Some(decode_canonical(new_plaintext, "new_plaintext")?))
            }
            ChangeAction::Erase => Ok(None),
        }
    }

    /// Checks that `approval` is a change approval for exactly this change,
    /// signed with a key the chain accepts for `signer_ok`'s actor.
    fn check_approval(
        &mut self,
        approval: Option<&SignedStatement>,
        expected: Statement,
        signer_ok: impl Fn(&ActorId) -> bool,
        missing: DenyReason,
    ) -> Result<(), Stop> {
        let approval = approval.ok_or(missing)?;
        if approval.statement != expected || !signer_ok(&approval.signer) {
            return Err(missing.into());
        }
        self.engine
            .state()
            .check_statement(approval, &approval.signer, missing)?;
        self.claims.push(approval.claim());
        Ok(())
    }

    fn owner_change(&mut self) -> Result<Granted, Stop> {
        let p: ChangeParams = self.params()?;
        let owner = self.owner_of(&p.data_id)?;
        if self.actor() != &owner {
            return Err(DenyReason::Role.into());
        }
        let content = Self::content(&p.action)?;
        let expected = Statement::ChangeApproval {
            data_id: p.data_id.clone(),
            requester: self.actor().clone(),
            action: Self::change_kind(&p.action),
            content_digest: content.as_ref().map(|c| sha256(c)),
        };
        let state = self.engine.state().clone();
        self.check_approval(
            p.approval.as_ref(),
            expected,
            |a| matches!(state.role_of(a), Some(Role::Controller | Role::Processor)),
            DenyReason::CountersignatureMissing,
        )?;
        self.change(&p.data_id, &owner, content, false)
    }

    fn controller_change(&mut self) -> Result<Granted, Stop> {
        self.require_staff()?;
        let p: ChangeParams = self.params()?;
        let owner = self.owner_of(&p.data_id)?;
        let content = Self::content(&p.action)?;
        if let Some(c) = &content {
            let expected = Statement::ChangeApproval {
                data_id: p.data_id.clone(),
                requester: self.actor().clone(),
                action: ChangeKind::Modify,
                content_digest: Some(sha256(c)),
            };
            let o = owner.clone();
            self.check_approval(
                p.approval.as_ref(),
                expected,
                move |a| a == &o,
                DenyReason::OwnerAuthorizationMissing,
            )?;
        }
        self.change(&p.data_id, &owner, content, true)
    }

    fn change(
        &mut self,
        data_id: &DataId,
        owner: &ActorId,
        content: Option<CanonicalBytes>,
        notify: bool,
    ) -> Result<Granted, Stop> {
        let permission = if content.is_some() {
            Permission::Modify
        } else {
            Permission::Delete
        };
        let token = self
            .authorize(data_id, permission, true)?
            .expect("token requested");
        let now = self.now;
        let mut out = match &content {
            Some(c) => {
                self.engine.step(Step::UpdateRecord);
                let digest = self.with_store(|s, auth| s.update_record(auth, &token, data_id, c, now))?;
                self.engine.step(Step::UpdateIntegrity);
                self.submit_applied(Payload::Integrity(IntegrityTx::Update {
                    data_id: data_id.clone(),
                    digest,
                }))?;
                let version = self.engine.state().integrity.get(data_id).map(|r| r.version);
                ChangeResult {
                    data_id: data_id.clone(),
                    action: ChangeKind::Modify,
                    version,
                    digest: Some(digest),
                    erased_at: None,
                    owner_notice: None,
                }
            }
            None => {
                self.engine.step(Step::EraseRecord);
                let receipt = self.with_store(|s, auth| s.erase_record(auth, &token, data_id, now))?;
                self.engine.step(Step::EraseIntegrity);
                self.submit_applied(Payload::Integrity(IntegrityTx::Erase {
                    data_id: data_id.clone(),
                }))?;
                ChangeResult {
                    data_id: data_id.clone(),
                    action: ChangeKind::Erase,
                    version: None,
                    digest: None,
                    erased_at: Some(receipt.erased_at),
                    owner_notice: None,
                }
            }
        };
        let detail = match out.action {
            ChangeKind::Modify => format!("modified to version {}", out.version.unwrap_or(0)),
            ChangeKind::Erase => "erased".to_string(),
        };
        if notify {
            self.engine.step(Step::Notify);
            let what = match out.action {
                ChangeKind::Modify => "record modified",
                ChangeKind::Erase => "record erased",
            };
            self.submit_applied(Payload::Audit(AuditTx::Notify {
                actor: self.actor().clone(),
                owner: owner.clone(),
                data_id: data_id.clone(),
                detail: what.to_string(),
            }))?;
            out.owner_notice = Some(OwnerNotice {
                owner: owner.clone(),
                data_id: data_id.clone(),
                action: out.action,
                notified_at: now,
            });
        }
        granted(&out, detail)
    }

    fn audit_log(&mut self) -> Result<Granted, Stop> {
        let p: AuditParams = self.params()?;
        self.engine.step(Step::QueryAuditLog);
        let entries = query_audit_log(self.engine.state(), self.actor(), &p.filter)?;
        let detail = format!("{} entries", entries.len());
        granted(&AuditResult { entries }, detail)
    }
}
