//! Hybrid ledger for credential records: personal data stays encrypted
//! off-chain and can be erased, while the chain keeps salted digests,
//! access policies and an append-only audit trail.

pub mod certs;
pub mod chain_apps;
pub mod client;
pub mod clock;
pub mod codec;
pub mod gateway;
pub mod genesis;
pub mod ids;
pub mod keystore;
pub mod ledger;
pub mod offchain_store;
