//! Permissioned hash-chained ledger: signed transactions, round-robin
//! sealed blocks, validation, replay and a line-per-block file format.

mod block;
mod chain;
mod file;
mod transaction;
mod validate;

pub use block::{block_hash, Block};
pub use chain::{Chain, SubmitReceipt};
pub use file::{load_blocks, parse_blocks, validate_persisted, ChainFile};
pub use transaction::Transaction;
pub use validate::{replay_state, validate_chain, ValidationReport};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("transaction signature does not verify")]
    BadSignature,
    #[error("transaction id does not match its body")]
    BadTxId,
    #[error("nonce {got} is not above the last accepted nonce {last}")]
    StaleNonce { last: u64, got: u64 },
    #[error("submitter key is not authorised")]
    UnauthorizedSubmitter,
    #[error("unknown payload kind {0:?}")]
    UnknownPayloadKind(String),
    #[error("malformed transaction or block: {0}")]
    Malformed(String),
    #[error("key is not the sealer for height {height}")]
    WrongSealer { height: u64 },
    #[error("mempool is empty")]
    EmptyMempool,
    #[error("chain file: {0}")]
    Io(String),
}

impl From<std::io::Error> for LedgerError {
    fn from(e: std::io::Error) -> LedgerError {
        LedgerError::Io(e.to_string())
    }
}
