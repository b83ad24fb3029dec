use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::codec::{generate_keypair, Hash32, KeyPair, VerificationKey};
use crate::genesis::{Genesis, GenesisActor};
use crate::ids::ActorId;
use crate::offchain_store::{OffchainStore, StoreConfig};

use super::{Gateway, GatewayError, GatewayParts, GatewaySettings, KeyMode, ServiceSigner};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorConfig {
    pub id: ActorId,
    pub key: VerificationKey,
}

impl From<&ActorConfig> for GenesisActor {
    fn from(a: &ActorConfig) -> GenesisActor {
        GenesisActor {
            id: a.id.clone(),
            key: a.key,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub actor: ActorId,
    /// Hex seed of the gateway's submitter key.
    pub seed: Hash32,
    #[serde(default)]
    pub key_mode: KeyMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisConfig {
    pub token_secret: Hash32,
    pub controller: ActorConfig,
    #[serde(default)]
    pub processors: Vec<ActorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authority: Option<ActorConfig>,
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_ttl() -> u64 {
    crate::chain_apps::DEFAULT_TOKEN_TTL
}

fn default_window() -> i64 {
    super::DEFAULT_REQUEST_WINDOW
}

/// Gateway configuration file (TOML).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    pub chain_file: PathBuf,
    #[serde(default = "default_ttl")]
    pub token_ttl: u64,
    #[serde(default = "default_window")]
    pub request_window: i64,
    /// Hex seeds of the validator signing keys, in sealing order.
    pub validator_seeds: Vec<Hash32>,
    pub service: ServiceConfig,
    pub store: StoreConfig,
    pub genesis: GenesisConfig,
}

impl GatewayConfig {
    pub fn from_toml(text: &str) -> Result<GatewayConfig, GatewayError> {
        toml::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))
    }

    /// Loads a file; relative paths inside it are taken relative to the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<GatewayConfig, GatewayError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = GatewayConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.chain_file,
            &mut cfg.store.key_file,
            &mut cfg.store.data_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validator_keys(&self) -> Vec<KeyPair> {
        self.validator_seeds
            .iter()
            .map(|s| generate_keypair(Some(&s.0)).expect("32-byte seed"))
            .collect()
    }

    pub fn genesis(&self) -> Genesis {
        let service_key = generate_keypair(Some(&self.service.seed.0)).expect("32-byte seed");
        Genesis {
            validators: self
                .validator_keys()
                .iter()
                .map(|k| k.verification_key())
                .collect(),
            token_secret: self.genesis.token_secret,
            controller: (&self.genesis.controller).into(),
            processors: self.genesis.processors.iter().map(Into::into).collect(),
            authority: self.genesis.authority.as_ref().map(Into::into),
            services: vec![GenesisActor {
                id: self.service.actor.clone(),
                key: service_key.verification_key(),
            }],
        }
    }

    pub fn settings(&self) -> GatewaySettings {
        GatewaySettings {
            token_ttl: self.token_ttl,
            request_window: self.request_window,
        }
    }

    pub fn build(&self, clock: Arc<dyn Clock>) -> Result<Gateway, GatewayError> {
        let store = OffchainStore::open(self.store.clone())?;
        Gateway::new(GatewayParts {
            genesis: self.genesis(),
            validators: self.validator_keys(),
            signer: ServiceSigner::new(
                self.service.actor.clone(),
                self.service.seed.0,
                self.service.key_mode,
            ),
            store: Arc::new(store),
            clock,
            settings: self.settings(),
            chain_file: Some(self.chain_file.clone()),
            rng: None,
        })
    }
}
