//! Deterministic on-chain applications: access policy, integrity anchors,
//! capability tokens and the audit log. Every decision is a pure function
//! of the chain state and the transaction being applied.

pub mod audit;
pub mod integrity;
pub mod payload;
pub mod policy;
pub mod reason;
pub mod state;
pub mod token;

pub use audit::{
    append_audit, query_audit_log, AuditDraft, AuditEntry, AuditFilter, Operation, Outcome,
    UseCase,
};
pub use integrity::{
    erase_integrity, record_integrity, update_integrity, verify_integrity, IntegrityRecord,
    RecordStatus, VerifyResult,
};
pub use payload::{
    attest_key, attestation_bytes, AuditTx, ChangeKind, IntegrityTx, KeyClaim, Payload, PolicyTx,
    SignedStatement, Statement,
};
pub use policy::{evaluate_access, AccessPolicyEntry, Decision, Permission, PolicyStatus};
pub use reason::DenyReason;
pub use state::{
    apply_transaction, check_policy, ActorRecord, ApplyOutcome, ChainState, Effect, KeyStatus,
    PolicyPlan, Role,
};
pub use token::{
    issue_token, validate_token, CapabilityToken, TokenCheck, TokenRejection, DEFAULT_TOKEN_TTL,
};
