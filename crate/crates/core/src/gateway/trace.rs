use serde::{Deserialize, Serialize};

/// Cross-module calls made while serving a use case, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    RegisterPolicy,
    GrantPolicy,
    RevokePolicy,
    EvaluateAccess,
    IssueToken,
    StoreRecord,
    FetchRecord,
    DigestCandidate,
    UpdateRecord,
    EraseRecord,
    ValidateToken,
    RecordIntegrity,
    VerifyIntegrity,
    UpdateIntegrity,
    EraseIntegrity,
    Notify,
    QueryAuditLog,
    AppendAudit,
    SealBlock,
}

impl Step {
    /// Steps that read or write personal data in the store.
    pub fn touches_data(self) -> bool {
        matches!(
            self,
            Step::StoreRecord
                | Step::FetchRecord
                | Step::DigestCandidate
                | Step::UpdateRecord
                | Step::EraseRecord
        )
    }
}
