use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chain_apps::{apply_transaction, ChainState};
use crate::codec::Hash32;
use crate::genesis::Genesis;

use super::Block;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ValidationReport {
    Ok { height: u64 },
    Invalid { first_bad_height: u64, reason: String },
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, ValidationReport::Ok { .. })
    }

    pub fn first_bad_height(&self) -> Option<u64> {
        match self {
            ValidationReport::Ok { .. } => None,
            ValidationReport::Invalid { first_bad_height, .. } => Some(*first_bad_height),
        }
    }
}

fn check_block(
    genesis: &Genesis,
    block: &Block,
    height: u64,
    prev: Option<&Block>,
    nonces: &mut BTreeMap<crate::codec::VerificationKey, u64>,
) -> Result<(), String> {
    if block.index != height {
        return Err(format!("index {} at height {height}", block.index));
    }
    let expected_prev = prev.map_or(Hash32::ZERO, |b| b.block_hash);
    if block.prev_hash != expected_prev {
        return Err("prev_hash does not link to the previous block".into());
    }
    if let Some(p) = prev {
        if block.timestamp < p.timestamp {
            return Err("timestamp goes backwards".into());
        }
    }
    let sealer = genesis.validators[(height % genesis.validators.len() as u64) as usize];
    if block.sealer != sealer {
        return Err("sealer out of round-robin turn".into());
    }
    if block.compute_hash() != block.block_hash {
        return Err("block_hash does not match contents".into());
    }
    if !block.sealer.verifies(&block.block_hash.0, &block.seal_signature) {
        return Err("seal signature does not verify".into());
    }
    for (i, tx) in block.transactions.iter().enumerate() {
        tx.check().map_err(|e| format!("transaction {i}: {e}"))?;
        if tx.timestamp > block.timestamp {
            return Err(format!("transaction {i} is newer than its block"));
        }
        let last = nonces.entry(tx.submitter).or_insert(0);
        if tx.nonce <= *last {
            return Err(format!("transaction {i}: nonce {} replayed", tx.nonce));
        }
        *last = tx.nonce;
    }
    Ok(())
}

/// Checks links, hashes, seals, sealer rotation, timestamps, transaction
/// ids, signatures and nonce monotonicity, reporting the lowest bad height.
pub fn validate_chain(genesis: &Genesis, blocks: &[Block]) -> ValidationReport {
    let mut nonces = BTreeMap::new();
    for (h, block) in blocks.iter().enumerate() {
        let prev = h.checked_sub(1).map(|p| &blocks[p]);
        if let Err(reason) = check_block(genesis, block, h as u64, prev, &mut nonces) {
            return ValidationReport::Invalid {
                first_bad_height: h as u64,
                reason,
            };
        }
    }
    ValidationReport::Ok {
        height: blocks.len() as u64,
    }
}

/// Folds every sealed transaction from the genesis state.
pub fn replay_state(genesis: &Genesis, blocks: &[Block]) -> ChainState {
    let mut state = ChainState::genesis(genesis);
    for tx in blocks.iter().flat_map(|b| &b.transactions) {
        apply_transaction(&mut state, tx);
    }
    state
}
