//! Single entry point for the eight use cases. Each invocation runs its
//! cross-module calls in a fixed order, appends exactly one use-case audit
//! transaction and seals exactly one block.

mod config;
mod flows;
mod request;
mod signer;
mod trace;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use rand::RngCore;

use crate::chain_apps::{ApplyOutcome, ChainState, Payload};
use crate::clock::Clock;
use crate::codec::KeyPair;
use crate::genesis::Genesis;
use crate::ledger::{
    load_blocks, validate_chain, validate_persisted, Block, Chain, ChainFile, LedgerError,
    SubmitReceipt, Transaction, ValidationReport,
};
use crate::offchain_store::{OffchainStore, StoreError};

pub use config::{ActorConfig, GatewayConfig, GenesisConfig, ServiceConfig};
pub use request::{
    AccessParams, AccessResult, AuditParams, AuditResult, Candidate, ChangeAction, ChangeParams,
    ChangeResult, GrantParams, OwnerNotice, PolicyResult, RegisterParams, RegisterResult,
    ResultOutcome, RevokeParams, UseCaseRequest, UseCaseResult, VerifyOutput, VerifyParams,
};
pub use signer::{service_key, KeyMode, NextKey, ServiceSigner};
pub use trace::Step;

pub const DEFAULT_REQUEST_WINDOW: i64 = 300;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("genesis: {0}")]
    Genesis(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("persisted chain does not validate: {0:?}")]
    InvalidChain(ValidationReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatewaySettings {
    pub token_ttl: u64,
    /// Maximum distance in seconds between `issued_at` and the gateway clock.
    pub request_window: i64,
}

impl Default for GatewaySettings {
    fn default() -> GatewaySettings {
        GatewaySettings {
            token_ttl: crate::chain_apps::DEFAULT_TOKEN_TTL,
            request_window: DEFAULT_REQUEST_WINDOW,
        }
    }
}

/// Everything needed to start a gateway.
pub struct GatewayParts {
    pub genesis: Genesis,
    /// Signing keys of every validator, in genesis order.
    pub validators: Vec<KeyPair>,
    pub signer: ServiceSigner,
    pub store: Arc<OffchainStore>,
    pub clock: Arc<dyn Clock>,
    pub settings: GatewaySettings,
    pub chain_file: Option<PathBuf>,
    /// Source of token ids; the OS generator when absent.
    pub rng: Option<Box<dyn RngCore + Send>>,
}

pub(crate) struct Engine {
    chain: Chain,
    chain_file: Option<ChainFile>,
    signer: ServiceSigner,
    validators: Vec<KeyPair>,
    rng: Box<dyn RngCore + Send>,
    trace: Option<Vec<Step>>,
    /// Signatures of recently served requests, with their `issued_at`.
    seen: BTreeMap<[u8; 64], i64>,
}

impl Engine {
    fn step(&mut self, s: Step) {
        if let Some(t) = &mut self.trace {
            t.push(s);
        }
    }

    fn submit(&mut self, payload: Payload, now: i64) -> Result<SubmitReceipt, GatewayError> {
        let next = self.signer.next();
        let tx = Transaction::new(&next.key, next.nonce, now, next.attestation, payload);
        let receipt = self.chain.submit_transaction(tx)?;
        self.signer.commit(next);
        Ok(receipt)
    }

    fn submit_outcome(&mut self, payload: Payload, now: i64) -> Result<ApplyOutcome, GatewayError> {
        Ok(self.submit(payload, now)?.outcome)
    }

    fn seal(&mut self, now: i64) -> Result<(), GatewayError> {
        let sealer = self.validators[self.chain.next_sealer_index()].clone();
        let block = self.chain.seal_block(&sealer, now, true)?;
        if let Some(f) = &mut self.chain_file {
            f.append(block)?;
        }
        Ok(())
    }

    fn state(&self) -> &ChainState {
        self.chain.state()
    }
}

pub struct Gateway {
    engine: Mutex<Engine>,
    store: Arc<OffchainStore>,
    clock: Arc<dyn Clock>,
    settings: GatewaySettings,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("store", &self.store)
            .field("settings", &self.settings)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    /// Starts a gateway, resuming from the chain file when it exists.
    pub fn new(parts: GatewayParts) -> Result<Gateway, GatewayError> {
        let GatewayParts {
            genesis,
            validators,
            mut signer,
            store,
            clock,
            settings,
            chain_file,
            rng,
        } = parts;
        genesis.validate().map_err(GatewayError::Genesis)?;
        let vks: Vec<_> = validators.iter().map(|k| k.verification_key()).collect();
        if vks != genesis.validators {
            return Err(GatewayError::Genesis(
                "validator keys do not match the genesis validator set".into(),
            ));
        }
        let service = genesis
            .services
            .iter()
            .find(|s| &s.id == signer.actor())
            .ok_or_else(|| GatewayError::Genesis(format!("{} is not a genesis service", signer.actor())))?;
        if service.key != signer.enrolment_key().verification_key() {
            return Err(GatewayError::Genesis("service key does not match genesis".into()));
        }
        let (chain, file) = match chain_file {
            Some(path) => {
                let blocks = load_blocks(&path)?;
                let report = validate_chain(&genesis, &blocks);
                if !report.is_ok() {
                    return Err(GatewayError::InvalidChain(report));
                }
                (Chain::from_blocks(genesis, blocks), Some(ChainFile::open(&path)?))
            }
            None => (Chain::new(genesis), None),
        };
        signer.resume(chain.state());
        Ok(Gateway {
            engine: Mutex::new(Engine {
                chain,
                chain_file: file,
                signer,
                validators,
                rng: rng.unwrap_or_else(|| Box::new(rand::rngs::OsRng)),
                trace: None,
                seen: BTreeMap::new(),
            }),
            store,
            clock,
            settings,
        })
    }

    fn lock(&self) -> MutexGuard<'_, Engine> {
        self.engine.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn store(&self) -> &Arc<OffchainStore> {
        &self.store
    }

    pub fn settings(&self) -> GatewaySettings {
        self.settings
    }

    pub fn now(&self) -> i64 {
        self.clock.now()
    }

    pub fn genesis(&self) -> Genesis {
        self.lock().chain.genesis().clone()
    }

    pub fn state(&self) -> ChainState {
        self.lock().chain.state().clone()
    }

    pub fn blocks(&self) -> Vec<Block> {
        self.lock().chain.blocks().to_vec()
    }

    pub fn height(&self) -> u64 {
        self.lock().chain.height()
    }

    /// Validates the chain as persisted, or the in-memory chain when the
    /// gateway runs without a file.
    pub fn validate(&self) -> ValidationReport {
        let engine = self.lock();
        match &engine.chain_file {
            Some(f) => match std::fs::read(f.path()) {
                Ok(bytes) => validate_persisted(engine.chain.genesis(), &bytes),
                Err(e) => ValidationReport::Invalid {
                    first_bad_height: 0,
                    reason: format!("cannot read chain file: {e}"),
                },
            },
            None => validate_chain(engine.chain.genesis(), engine.chain.blocks()),
        }
    }

    /// Starts recording the call order of subsequent use cases.
    pub fn enable_trace(&self) {
        self.lock().trace = Some(Vec::new());
    }

    pub fn take_trace(&self) -> Vec<Step> {
        self.lock().trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Serves one use case. Never panics on bad input: every outcome,
    /// including errors, is audited and sealed.
    pub fn handle(&self, req: &UseCaseRequest) -> UseCaseResult {
        let mut engine = self.lock();
        let now = self.clock.now();
        flows::run(&mut engine, &self.store, self.settings, now, req)
    }
}
