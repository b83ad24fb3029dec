//! Network parameters fixed before the first block.

use serde::{Deserialize, Serialize};

use crate::codec::{Hash32, VerificationKey};
use crate::ids::ActorId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisActor {
    pub id: ActorId,
    pub key: VerificationKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Genesis {
    /// Round-robin sealing order; the sealer of height `k` is
    /// `validators[k % validators.len()]`.
    pub validators: Vec<VerificationKey>,
    /// Secret keying the capability-token MACs.
    pub token_secret: Hash32,
    pub controller: GenesisActor,
    #[serde(default)]
    pub processors: Vec<GenesisActor>,
    /// Supervisory authority allowed to read the whole audit log.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authority: Option<GenesisActor>,
    /// Infrastructure identities allowed to submit transactions.
    pub services: Vec<GenesisActor>,
}

impl Genesis {
    pub fn validate(&self) -> Result<(), String> {
        if self.validators.is_empty() {
            return Err("validator set must not be empty".into());
        }
        if self.services.is_empty() {
            return Err("at least one service submitter is required".into());
        }
        if self.processors.iter().any(|p| p.id == self.controller.id) {
            return Err("controller must not also be a processor".into());
        }
        let mut ids: Vec<&ActorId> = std::iter::once(&self.controller.id)
            .chain(self.processors.iter().map(|p| &p.id))
            .chain(self.authority.iter().map(|a| &a.id))
            .chain(self.services.iter().map(|s| &s.id))
            .collect();
        let n = ids.len();
        ids.sort();
        ids.dedup();
        if ids.len() != n {
            return Err("genesis actor ids must be distinct".into());
        }
        Ok(())
    }
}
