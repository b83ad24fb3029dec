use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::{Hash32, Signature, VerificationKey};
use crate::genesis::Genesis;
use crate::ids::{ActorId, DataId};
use crate::ledger::Transaction;

use super::audit::{append_audit, AuditDraft, AuditEntry, Operation, Outcome};
use super::integrity::{
    erase_integrity, record_integrity, update_integrity, verify_integrity, IntegrityRecord,
    VerifyResult,
};
use super::payload::{attestation_bytes, AuditTx, IntegrityTx, KeyClaim, Payload, PolicyTx, SignedStatement, Statement};
use super::policy::{evaluate_access, AccessPolicyEntry, Decision, Permission, PolicyStatus};
use super::reason::DenyReason;
use super::token::{validate_token, TokenCheck};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "DO")]
    DataOwner,
    #[serde(rename = "DC")]
    Controller,
    #[serde(rename = "DP")]
    Processor,
    #[serde(rename = "RECIPIENT")]
    Recipient,
    /// Infrastructure submitter (the gateway).
    #[serde(rename = "SERVICE")]
    Service,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::DataOwner => "DO",
            Role::Controller => "DC",
            Role::Processor => "DP",
            Role::Recipient => "RECIPIENT",
            Role::Service => "SERVICE",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Role, String> {
        [
            Role::DataOwner,
            Role::Controller,
            Role::Processor,
            Role::Recipient,
            Role::Service,
        ]
        .into_iter()
        .find(|r| r.as_str().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown role {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActorRecord {
    pub role: Role,
    pub supervisory: bool,
    /// Every key the actor has used, in the order the chain learnt them.
    pub keys: Vec<VerificationKey>,
}

/// Everything the chain knows, rebuilt by folding transactions in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainState {
    pub policies: BTreeMap<DataId, Vec<AccessPolicyEntry>>,
    pub integrity: BTreeMap<DataId, IntegrityRecord>,
    pub audit: Vec<AuditEntry>,
    pub owners: BTreeMap<DataId, ActorId>,
    pub nonces: BTreeMap<VerificationKey, u64>,
    pub actors: BTreeMap<ActorId, ActorRecord>,
    pub controller: ActorId,
    pub processors: Vec<ActorId>,
    pub token_secret: Hash32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyStatus {
    Known,
    /// Not yet recorded, but vouched for by a recorded key of the actor.
    Attested,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    /// A policy or integrity change took effect.
    Applied,
    /// The chain refused the transaction and logged a DENIED entry.
    Rejected(DenyReason),
    Access(Decision),
    Token(TokenCheck),
    Integrity(VerifyResult),
    Recorded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplyOutcome {
    pub effect: Effect,
    /// Sequence number of the audit entry the transaction produced.
    pub audit_seq: Option<u64>,
}

/// Mutations a policy transaction will make, computed without touching
/// the state so the gateway can dry-run it.
#[derive(Debug, Default)]
pub struct PolicyPlan {
    new_actor: Option<(ActorId, Role, VerificationKey)>,
    attested: Vec<(ActorId, VerificationKey)>,
    owner: Option<ActorId>,
    grants: Vec<(ActorId, Permission, ActorId, Option<i64>)>,
    revoke: Vec<usize>,
}

impl ChainState {
    pub fn genesis(genesis: &Genesis) -> ChainState {
        let mut actors = BTreeMap::new();
        let mut add = |id: &ActorId, role, supervisory, key| {
            actors.insert(
                id.clone(),
                ActorRecord {
                    role,
                    supervisory,
                    keys: vec![key],
                },
            );
        };
        add(&genesis.controller.id, Role::Controller, false, genesis.controller.key);
        for p in &genesis.processors {
            add(&p.id, Role::Processor, false, p.key);
        }
        if let Some(a) = &genesis.authority {
            add(&a.id, Role::Recipient, true, a.key);
        }
        for s in &genesis.services {
            add(&s.id, Role::Service, false, s.key);
        }
        ChainState {
            policies: BTreeMap::new(),
            integrity: BTreeMap::new(),
            audit: Vec::new(),
            owners: BTreeMap::new(),
            nonces: BTreeMap::new(),
            actors,
            controller: genesis.controller.id.clone(),
            processors: genesis.processors.iter().map(|p| p.id.clone()).collect(),
            token_secret: genesis.token_secret,
        }
    }

    pub fn role_of(&self, actor: &ActorId) -> Option<Role> {
        self.actors.get(actor).map(|a| a.role)
    }

    pub fn is_supervisory(&self, actor: &ActorId) -> bool {
        self.actors.get(actor).is_some_and(|a| a.supervisory)
    }

    pub fn is_controller_or_processor(&self, actor: &ActorId) -> bool {
        matches!(self.role_of(actor), Some(Role::Controller | Role::Processor))
    }

    pub fn owner_of(&self, data_id: &DataId) -> Option<&ActorId> {
        self.owners.get(data_id)
    }

    pub fn last_nonce(&self, key: &VerificationKey) -> u64 {
        self.nonces.get(key).copied().unwrap_or(0)
    }

    pub fn key_status(
        &self,
        actor: &ActorId,
        key: &VerificationKey,
        attestation: Option<&Signature>,
    ) -> Result<KeyStatus, DenyReason> {
        let record = self.actors.get(actor).ok_or(DenyReason::UnknownActor)?;
        if record.keys.contains(key) {
            return Ok(KeyStatus::Known);
        }
        let attestation = attestation.ok_or(DenyReason::UnknownKey)?;
        let msg = attestation_bytes(actor, key);
        if record.keys.iter().any(|k| k.verifies(&msg, attestation)) {
            Ok(KeyStatus::Attested)
        } else {
            Err(DenyReason::UnknownKey)
        }
    }

    pub fn check_claim(&self, claim: &KeyClaim) -> Result<KeyStatus, DenyReason> {
        self.key_status(&claim.actor, &claim.key, claim.attestation.as_ref())
    }

    fn accept_claim(&mut self, claim: &KeyClaim) -> Result<(), DenyReason> {
        if self.check_claim(claim)? == KeyStatus::Attested {
            self.push_key(&claim.actor, claim.key);
        }
        Ok(())
    }

    fn push_key(&mut self, actor: &ActorId, key: VerificationKey) {
        if let Some(a) = self.actors.get_mut(actor) {
            if !a.keys.contains(&key) {
                a.keys.push(key);
            }
        }
    }

    /// Checks a statement signed by `expected` with a recorded or
    /// attested key.
    pub fn check_statement(
        &self,
        st: &SignedStatement,
        expected: &ActorId,
        missing: DenyReason,
    ) -> Result<KeyStatus, DenyReason> {
        if &st.signer != expected {
            return Err(missing);
        }
        let status = self.key_status(&st.signer, &st.key, st.attestation.as_ref())?;
        if !st.signature_valid() {
            return Err(DenyReason::BadSignature);
        }
        Ok(status)
    }

    /// The service actor a submitter key belongs to, if any.
    pub fn submitter_status(
        &self,
        key: &VerificationKey,
        attestation: Option<&Signature>,
    ) -> Result<(ActorId, KeyStatus), DenyReason> {
        let services = self.actors.iter().filter(|(_, a)| a.role == Role::Service);
        for (id, a) in services.clone() {
            if a.keys.contains(key) {
                return Ok((id.clone(), KeyStatus::Known));
            }
        }
        if let Some(att) = attestation {
            for (id, _) in services {
                if self.key_status(id, key, Some(att)) == Ok(KeyStatus::Attested) {
                    return Ok((id.clone(), KeyStatus::Attested));
                }
            }
        }
        Err(DenyReason::UnauthorizedSubmitter)
    }
}

fn is_owner_or_staff(state: &ChainState, actor: &ActorId, owner: &ActorId) -> bool {
    actor == owner || state.is_controller_or_processor(actor)
}

/// Validates a policy transaction against `state` without mutating it.
pub fn check_policy(state: &ChainState, tx: &PolicyTx, now: i64) -> Result<PolicyPlan, DenyReason> {
    let mut plan = PolicyPlan::default();
    match tx {
        PolicyTx::RegisterOwner {
            data_id,
            registrar,
            consent,
        } => {
            if !state.is_controller_or_processor(registrar) {
                return Err(DenyReason::Role);
            }
            if state.owners.contains_key(data_id) {
                return Err(DenyReason::DuplicateDataId);
            }
            let expected = Statement::RegisterConsent {
                data_id: data_id.clone(),
                registrar: registrar.clone(),
            };
            if consent.statement != expected {
                return Err(DenyReason::ConsentMissing);
            }
            let owner = &consent.signer;
            match state.actors.get(owner) {
                Some(rec) if rec.role != Role::DataOwner => return Err(DenyReason::Role),
                Some(_) => {
                    if state.check_statement(consent, owner, DenyReason::ConsentMissing)?
                        == KeyStatus::Attested
                    {
                        plan.attested.push((owner.clone(), consent.key));
                    }
                }
                None => {
                    // First appearance: the consent key enrols the owner.
                    if consent.attestation.is_some() {
                        return Err(DenyReason::UnknownKey);
                    }
                    if !consent.signature_valid() {
                        return Err(DenyReason::BadSignature);
                    }
                    plan.new_actor = Some((owner.clone(), Role::DataOwner, consent.key));
                }
            }
            plan.owner = Some(owner.clone());
            for staff in std::iter::once(&state.controller).chain(&state.processors) {
                for p in [Permission::Modify, Permission::Delete] {
                    plan.grants.push((staff.clone(), p, owner.clone(), None));
                }
            }
        }
        PolicyTx::Grant {
            data_id,
            grantee,
            grantee_key,
            permission,
            expiry,
            granted_by,
            consent,
        } => {
            let owner = state.owners.get(data_id).ok_or(DenyReason::UnknownDataId)?;
            if !is_owner_or_staff(state, granted_by, owner) {
                return Err(DenyReason::Role);
            }
            let expected = Statement::GrantConsent {
                data_id: data_id.clone(),
                grantee: grantee.clone(),
                permission: *permission,
                expiry: *expiry,
            };
            if consent.statement != expected {
                return Err(DenyReason::ConsentMissing);
            }
            if state.check_statement(consent, owner, DenyReason::ConsentMissing)?
                == KeyStatus::Attested
            {
                plan.attested.push((owner.clone(), consent.key));
            }
            if grantee == owner {
                return Err(DenyReason::InvalidRequest);
            }
            if expiry.is_some_and(|e| e <= now) {
                return Err(DenyReason::InvalidRequest);
            }
            match (state.actors.get(grantee), grantee_key) {
                (Some(rec), Some(k)) if !rec.keys.contains(k) => return Err(DenyReason::UnknownKey),
                (Some(_), _) => {}
                (None, Some(k)) => plan.new_actor = Some((grantee.clone(), Role::Recipient, *k)),
                (None, None) => return Err(DenyReason::UnknownGrantee),
            }
            let live = state
                .policies
                .get(data_id)
                .into_iter()
                .flatten()
                .any(|e| &e.grantee == grantee && e.permission == *permission && e.is_live(now));
            if live {
                return Err(DenyReason::AlreadyGranted);
            }
            plan.grants
                .push((grantee.clone(), *permission, granted_by.clone(), *expiry));
        }
        PolicyTx::Revoke {
            data_id,
            grantee,
            permission,
            revoked_by,
        } => {
            let owner = state.owners.get(data_id).ok_or(DenyReason::UnknownDataId)?;
            if !is_owner_or_staff(state, revoked_by, owner) {
                return Err(DenyReason::Role);
            }
            plan.revoke = state
                .policies
                .get(data_id)
                .into_iter()
                .flatten()
                .enumerate()
                .filter(|(_, e)| {
                    &e.grantee == grantee
                        && e.permission == *permission
                        && e.status == PolicyStatus::Active
                })
                .map(|(i, _)| i)
                .collect();
            if plan.revoke.is_empty() {
                return Err(DenyReason::NoActiveGrant);
            }
        }
    }
    Ok(plan)
}

fn apply_plan(state: &mut ChainState, plan: PolicyPlan, data_id: &DataId, consent_ref: Hash32) {
    if let Some((id, role, key)) = plan.new_actor {
        state.actors.insert(
            id,
            ActorRecord {
                role,
                supervisory: false,
                keys: vec![key],
            },
        );
    }
    for (actor, key) in plan.attested {
        state.push_key(&actor, key);
    }
    if let Some(owner) = plan.owner {
        state.owners.insert(data_id.clone(), owner);
    }
    let entries = state.policies.entry(data_id.clone()).or_default();
    for i in plan.revoke {
        entries[i].status = PolicyStatus::Revoked;
    }
    for (grantee, permission, granted_by, expiry) in plan.grants {
        entries.push(AccessPolicyEntry {
            data_id: data_id.clone(),
            grantee,
            permission,
            granted_by,
            status: PolicyStatus::Active,
            consent_ref,
            expiry,
        });
    }
}

fn logged(state: &mut ChainState, effect: Effect, draft: AuditDraft, at: i64) -> ApplyOutcome {
    let entry = append_audit(state, draft, at);
    ApplyOutcome {
        effect,
        audit_seq: Some(entry.seq),
    }
}

fn rejected(
    state: &mut ChainState,
    operation: Operation,
    actor: ActorId,
    data_id: Option<DataId>,
    reason: DenyReason,
    at: i64,
) -> ApplyOutcome {
    let draft = AuditDraft {
        actor,
        operation,
        data_id,
        outcome: Outcome::Denied,
        detail: reason.as_str().to_string(),
    };
    logged(state, Effect::Rejected(reason), draft, at)
}

/// The on-chain state transition. Total: a transaction the rules refuse
/// leaves the state untouched apart from a DENIED audit entry and the
/// submitter's nonce. All time comes from the transaction timestamp.
pub fn apply_transaction(state: &mut ChainState, tx: &Transaction) -> ApplyOutcome {
    let last = state.nonces.entry(tx.submitter).or_insert(0);
    *last = (*last).max(tx.nonce);
    let now = tx.timestamp;

    let service = match state.submitter_status(&tx.submitter, tx.attestation.as_ref()) {
        Ok((actor, status)) => {
            if status == KeyStatus::Attested {
                state.push_key(&actor, tx.submitter);
            }
            actor
        }
        Err(reason) => {
            let actor = ActorId::new("unknown-submitter").expect("static id");
            return rejected(state, Operation::Submission, actor, None, reason, now);
        }
    };

    match &tx.payload {
        Payload::Policy(p) => match check_policy(state, p, now) {
            Ok(plan) => {
                apply_plan(state, plan, p.data_id(), tx.tx_id);
                ApplyOutcome {
                    effect: Effect::Applied,
                    audit_seq: None,
                }
            }
            Err(reason) => rejected(
                state,
                Operation::Policy,
                p.actor().clone(),
                Some(p.data_id().clone()),
                reason,
                now,
            ),
        },
        Payload::Integrity(i) => {
            let result = match i {
                IntegrityTx::Record {
                    data_id,
                    link,
                    digest,
                } => record_integrity(state, data_id, link, *digest),
                IntegrityTx::Update { data_id, digest } => update_integrity(state, data_id, *digest),
                IntegrityTx::Erase { data_id } => erase_integrity(state, data_id, now),
            };
            match result {
                Ok(_) => ApplyOutcome {
                    effect: Effect::Applied,
                    audit_seq: None,
                },
                Err(reason) => rejected(
                    state,
                    Operation::Integrity,
                    service,
                    Some(i.data_id().clone()),
                    reason,
                    now,
                ),
            }
        }
        Payload::Audit(a) => apply_audit(state, a, now),
    }
}

fn apply_audit(state: &mut ChainState, tx: &AuditTx, now: i64) -> ApplyOutcome {
    match tx {
        AuditTx::AccessCheck {
            actor,
            data_id,
            permission,
            token_id,
        } => {
            let decision = evaluate_access(state, actor, data_id, *permission, now)
                .unwrap_or_else(|reason| Decision::Deny { reason });
            let (outcome, detail) = match (&decision, token_id) {
                (Decision::Grant { .. }, Some(t)) => (Outcome::Granted, format!("{permission} token {t}")),
                (Decision::Grant { .. }, None) => (Outcome::Granted, permission.to_string()),
                (Decision::Deny { reason }, _) => (Outcome::Denied, format!("{permission} {reason}")),
            };
            let draft = AuditDraft {
                actor: actor.clone(),
                operation: Operation::AccessCheck,
                data_id: Some(data_id.clone()),
                outcome,
                detail,
            };
            logged(state, Effect::Access(decision), draft, now)
        }
        AuditTx::TokenValidate {
            token,
            data_id,
            permission,
        } => {
            let check = validate_token(state, token, data_id, *permission, now);
            let (outcome, detail) = match check {
                Ok(()) => (Outcome::Granted, format!("{permission} token {} ok", token.token_id)),
                Err(r) => (Outcome::Denied, format!("{permission} token {} {r}", token.token_id)),
            };
            let draft = AuditDraft {
                actor: token.subject.clone(),
                operation: Operation::TokenValidate,
                data_id: Some(data_id.clone()),
                outcome,
                detail,
            };
            logged(state, Effect::Token(check), draft, now)
        }
        AuditTx::IntegrityCheck {
            actor,
            data_id,
            candidate,
        } => {
            let result = verify_integrity(state, data_id, candidate.as_ref());
            let outcome = if result == VerifyResult::Valid {
                Outcome::Granted
            } else {
                Outcome::Denied
            };
            let draft = AuditDraft {
                actor: actor.clone(),
                operation: Operation::IntegrityCheck,
                data_id: Some(data_id.clone()),
                outcome,
                detail: result.as_str().to_string(),
            };
            logged(state, Effect::Integrity(result), draft, now)
        }
        AuditTx::UseCase {
            operation,
            actor,
            data_id,
            outcome,
            detail,
            signers,
        } => {
            let mut detail = detail.clone();
            for claim in signers {
                if state.accept_claim(claim).is_err() {
                    detail.push_str(&format!(" [unverified key of {}]", claim.actor));
                }
            }
            let draft = AuditDraft {
                actor: actor.clone(),
                operation: (*operation).into(),
                data_id: data_id.clone(),
                outcome: *outcome,
                detail,
            };
            logged(state, Effect::Recorded, draft, now)
        }
        AuditTx::Notify {
            actor,
            owner,
            data_id,
            detail,
        } => {
            let draft = AuditDraft {
                actor: actor.clone(),
                operation: Operation::Notify,
                data_id: Some(data_id.clone()),
                outcome: Outcome::Granted,
                detail: format!("notice to {owner}: {detail}"),
            };
            logged(state, Effect::Recorded, draft, now)
        }
    }
}
