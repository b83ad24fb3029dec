use serde::{Deserialize, Serialize};

use crate::codec::{sha256, to_canonical, CanonicalBytes, Hash32, KeyPair, Signature, VerificationKey};

use super::Transaction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub index: u64,
    pub prev_hash: Hash32,
    pub timestamp: i64,
    pub transactions: Vec<Transaction>,
    pub sealer: VerificationKey,
    pub block_hash: Hash32,
    /// Sealer's signature over `block_hash`.
    pub seal_signature: Signature,
}

#[derive(Serialize)]
struct Header<'a> {
    index: u64,
    prev_hash: &'a Hash32,
    sealer: &'a VerificationKey,
    timestamp: i64,
    tx_ids: Vec<&'a Hash32>,
}

/// Hash over the header and the ordered transaction ids.
pub fn block_hash(
    index: u64,
    prev_hash: &Hash32,
    timestamp: i64,
    sealer: &VerificationKey,
    transactions: &[Transaction],
) -> Hash32 {
    let header = Header {
        index,
        prev_hash,
        sealer,
        timestamp,
        tx_ids: transactions.iter().map(|t| &t.tx_id).collect(),
    };
    sha256(&to_canonical(&header).expect("block header is canonical"))
}

impl Block {
    pub fn seal(
        index: u64,
        prev_hash: Hash32,
        timestamp: i64,
        transactions: Vec<Transaction>,
        sealer: &KeyPair,
    ) -> Block {
        let vk = sealer.verification_key();
        let hash = block_hash(index, &prev_hash, timestamp, &vk, &transactions);
        Block {
            index,
            prev_hash,
            timestamp,
            transactions,
            sealer: vk,
            block_hash: hash,
            seal_signature: sealer.sign(&hash.0),
        }
    }

    pub fn compute_hash(&self) -> Hash32 {
        block_hash(
            self.index,
            &self.prev_hash,
            self.timestamp,
            &self.sealer,
            &self.transactions,
        )
    }

    pub fn to_canonical(&self) -> CanonicalBytes {
        to_canonical(self).expect("block is canonical")
    }
}
