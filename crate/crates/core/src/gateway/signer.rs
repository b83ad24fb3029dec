use serde::{Deserialize, Serialize};

use crate::chain_apps::{attest_key, ChainState};
use crate::codec::{generate_keypair, sha256, KeyPair, Signature};
use crate::ids::ActorId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyMode {
    #[default]
    #[serde(alias = "STATIC_KEY")]
    Static,
    /// A fresh key per transaction, each attested by its predecessor.
    #[serde(alias = "KEY_PER_TRANSACTION")]
    KeyPerTransaction,
}

/// Keys the gateway submits transactions with.
#[derive(Debug)]
pub struct ServiceSigner {
    actor: ActorId,
    mode: KeyMode,
    seed: [u8; 32],
    index: u64,
    current: KeyPair,
    nonce: u64,
}

/// A key ready to sign the next transaction.
#[derive(Debug)]
pub struct NextKey {
    pub key: KeyPair,
    pub attestation: Option<Signature>,
    pub nonce: u64,
    index: u64,
}

/// Key `index` of the rotation derived from `seed`; index 0 is the
/// enrolment key.
pub fn service_key(seed: &[u8; 32], index: u64) -> KeyPair {
    if index == 0 {
        return generate_keypair(Some(seed)).expect("32-byte seed");
    }
    let mut material = b"svc-key".to_vec();
    material.extend_from_slice(seed);
    material.extend_from_slice(&index.to_be_bytes());
    generate_keypair(Some(&sha256(&material).0)).expect("32-byte seed")
}

impl ServiceSigner {
    pub fn new(actor: ActorId, seed: [u8; 32], mode: KeyMode) -> ServiceSigner {
        ServiceSigner {
            actor,
            mode,
            current: service_key(&seed, 0),
            seed,
            index: 0,
            nonce: 0,
        }
    }

    pub fn actor(&self) -> &ActorId {
        &self.actor
    }

    pub fn mode(&self) -> KeyMode {
        self.mode
    }

    pub fn enrolment_key(&self) -> KeyPair {
        service_key(&self.seed, 0)
    }

    /// Picks up where an earlier run stopped, from the keys and nonces the
    /// chain has recorded.
    pub fn resume(&mut self, state: &ChainState) {
        let known = state
            .actors
            .get(&self.actor)
            .map(|a| a.keys.clone())
            .unwrap_or_default();
        let mut index = 0;
        while known.contains(&service_key(&self.seed, index + 1).verification_key()) {
            index += 1;
        }
        self.index = index;
        self.current = service_key(&self.seed, index);
        self.nonce = state.last_nonce(&self.current.verification_key());
    }

    pub fn next(&self) -> NextKey {
        match self.mode {
            KeyMode::Static => NextKey {
                key: self.current.clone(),
                attestation: None,
                nonce: self.nonce + 1,
                index: self.index,
            },
            KeyMode::KeyPerTransaction if self.index == 0 && self.nonce == 0 => NextKey {
                key: self.current.clone(),
                attestation: None,
                nonce: 1,
                index: 0,
            },
            KeyMode::KeyPerTransaction => {
                let key = service_key(&self.seed, self.index + 1);
                let attestation = attest_key(&self.current, &self.actor, &key.verification_key());
                NextKey {
                    key,
                    attestation: Some(attestation),
                    nonce: 1,
                    index: self.index + 1,
                }
            }
        }
    }

    /// Marks a key as used once the chain accepted the transaction.
    pub fn commit(&mut self, used: NextKey) {
        self.index = used.index;
        self.nonce = used.nonce;
        self.current = used.key;
    }
}
