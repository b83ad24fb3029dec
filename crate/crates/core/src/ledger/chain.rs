use crate::chain_apps::{apply_transaction, ApplyOutcome, ChainState};
use crate::codec::{Hash32, KeyPair};
use crate::genesis::Genesis;

use super::{Block, LedgerError, Transaction};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmitReceipt {
    pub tx_id: Hash32,
    pub outcome: ApplyOutcome,
}

/// A single node's view of the chain. Transactions take effect on
/// `state` when they enter the mempool, in the order they will be sealed,
/// so the state always equals a replay of sealed blocks plus the mempool.
#[derive(Debug, Clone)]
pub struct Chain {
    genesis: Genesis,
    blocks: Vec<Block>,
    mempool: Vec<Transaction>,
    state: ChainState,
}

impl Chain {
    pub fn new(genesis: Genesis) -> Chain {
        let state = ChainState::genesis(&genesis);
        Chain {
            genesis,
            blocks: Vec::new(),
            mempool: Vec::new(),
            state,
        }
    }

    /// Rebuilds a chain from already validated blocks.
    pub fn from_blocks(genesis: Genesis, blocks: Vec<Block>) -> Chain {
        let mut chain = Chain::new(genesis);
        for block in &blocks {
            for tx in &block.transactions {
                apply_transaction(&mut chain.state, tx);
            }
        }
        chain.blocks = blocks;
        chain
    }

    pub fn genesis(&self) -> &Genesis {
        &self.genesis
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn mempool(&self) -> &[Transaction] {
        &self.mempool
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn head_hash(&self) -> Hash32 {
        self.blocks.last().map_or(Hash32::ZERO, |b| b.block_hash)
    }

    /// Index into the validator list of the next block's sealer.
    pub fn next_sealer_index(&self) -> usize {
        (self.height() % self.genesis.validators.len() as u64) as usize
    }

    pub fn submit_transaction(&mut self, tx: Transaction) -> Result<SubmitReceipt, LedgerError> {
        tx.check()?;
        let last = self.state.last_nonce(&tx.submitter);
        if tx.nonce <= last {
            return Err(LedgerError::StaleNonce { last, got: tx.nonce });
        }
        if self
            .state
            .submitter_status(&tx.submitter, tx.attestation.as_ref())
            .is_err()
        {
            return Err(LedgerError::UnauthorizedSubmitter);
        }
        let outcome = apply_transaction(&mut self.state, &tx);
        let tx_id = tx.tx_id;
        self.mempool.push(tx);
        Ok(SubmitReceipt { tx_id, outcome })
    }

    /// Seals the whole mempool in FIFO order. An empty block is only sealed
    /// when `heartbeat` is set.
    pub fn seal_block(
        &mut self,
        sealer: &KeyPair,
        now: i64,
        heartbeat: bool,
    ) -> Result<&Block, LedgerError> {
        let height = self.height();
        if sealer.verification_key() != self.genesis.validators[self.next_sealer_index()] {
            return Err(LedgerError::WrongSealer { height });
        }
        if self.mempool.is_empty() && !heartbeat {
            return Err(LedgerError::EmptyMempool);
        }
        let floor = self.blocks.last().map_or(i64::MIN, |b| b.timestamp);
        let newest_tx = self.mempool.iter().map(|t| t.timestamp).max().unwrap_or(i64::MIN);
        let timestamp = now.max(floor).max(newest_tx);
        let txs = std::mem::take(&mut self.mempool);
        let block = Block::seal(height, self.head_hash(), timestamp, txs, sealer);
        self.blocks.push(block);
        Ok(self.blocks.last().expect("just pushed"))
    }
}
