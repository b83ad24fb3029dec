//! Passphrase-encrypted client keystore with optional key-per-transaction
//! rotation.

use std::path::Path;

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use zeroize::Zeroizing;

use crate::chain_apps::{attest_key, Role, SignedStatement, Statement, UseCase};
use crate::client::RequestSigner;
use crate::codec::{generate_keypair, sha256, to_canonical, Hash32, KeyPair, Signature, VerificationKey};
use crate::gateway::{KeyMode, UseCaseRequest, UseCaseResult};
use crate::ids::ActorId;

pub const DEFAULT_KDF_ROUNDS: u32 = 100_000;

#[derive(Debug, thiserror::Error)]
pub enum KeystoreError {
    #[error("keystore i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("keystore format: {0}")]
    Format(String),
    #[error("wrong passphrase or corrupted keystore")]
    Decrypt,
}

#[derive(Clone, Serialize, Deserialize)]
pub struct KeyEntry {
    seed: Hash32,
    pub created_at: i64,
    /// Has signed something.
    pub used: bool,
    /// Is known to the chain and may attest newer keys.
    pub recorded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attestation: Option<Signature>,
}

impl std::fmt::Debug for KeyEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyEntry")
            .field("key", &self.keypair().verification_key())
            .field("created_at", &self.created_at)
            .field("used", &self.used)
            .field("recorded", &self.recorded)
            .finish()
    }
}

impl KeyEntry {
    pub fn keypair(&self) -> KeyPair {
        generate_keypair(Some(&self.seed.0)).expect("32-byte seed")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Keystore {
    pub actor: ActorId,
    pub role: Role,
    pub mode: KeyMode,
    keys: Vec<KeyEntry>,
    /// Clock used to stamp new keys.
    #[serde(default)]
    now: i64,
    /// Latest `issued_at` handed out by `request_time`.
    #[serde(default)]
    last_issued_at: i64,
    #[serde(skip)]
    last_request_key: Option<usize>,
}

/// A key handed out for one signature.
#[derive(Debug)]
pub struct IssuedKey {
    pub key: KeyPair,
    pub attestation: Option<Signature>,
    pub index: usize,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    ciphertext: String,
    kdf: String,
    nonce: String,
    rounds: u32,
    salt: String,
    version: u32,
}

fn derive_key(passphrase: &str, salt: &[u8], rounds: u32) -> Zeroizing<[u8; 32]> {
    let mut key = Zeroizing::new([0u8; 32]);
    pbkdf2::pbkdf2_hmac::<sha2::Sha256>(passphrase.as_bytes(), salt, rounds, key.as_mut());
    key
}

impl Keystore {
    /// Creates a keystore whose enrolment key comes from `seed`.
    pub fn new(actor: ActorId, role: Role, mode: KeyMode, seed: [u8; 32], now: i64) -> Keystore {
        Keystore {
            actor,
            role,
            mode,
            keys: vec![KeyEntry {
                seed: Hash32(seed),
                created_at: now,
                used: false,
                // Enrolment keys reach the chain at genesis, on registration
                // or through a grant.
                recorded: true,
                attestation: None,
            }],
            now,
            last_issued_at: 0,
            last_request_key: None,
        }
    }

    pub fn generate(actor: ActorId, role: Role, mode: KeyMode, now: i64) -> Keystore {
        let mut seed = [0u8; 32];
        rand::rngs::OsRng.fill_bytes(&mut seed);
        Keystore::new(actor, role, mode, seed, now)
    }

    /// A request timestamp later than any handed out before, so that
    /// repeating a request within one second does not look like a replay.
    pub fn request_time(&mut self, now: i64) -> i64 {
        self.last_issued_at = now.max(self.last_issued_at + 1);
        self.last_issued_at
    }

    pub fn set_time(&mut self, now: i64) {
        self.now = now;
    }

    pub fn keys(&self) -> &[KeyEntry] {
        &self.keys
    }

    pub fn enrolment_key(&self) -> VerificationKey {
        self.keys[0].keypair().verification_key()
    }

    /// STATIC_KEY always returns the enrolment key. KEY_PER_TRANSACTION
    /// hands out each key once, minting a new one attested by the latest
    /// recorded key when the previous one is spent.
    pub fn next_key(&mut self) -> IssuedKey {
        if self.mode == KeyMode::Static || !self.keys[0].used {
            self.keys[0].used = true;
            return IssuedKey {
                key: self.keys[0].keypair(),
                attestation: None,
                index: 0,
            };
        }
        let index = self.keys.len();
        let mut material = b"kpt".to_vec();
        material.extend_from_slice(&self.keys[0].seed.0);
        material.extend_from_slice(&(index as u64).to_be_bytes());
        let seed = sha256(&material);
        let key = generate_keypair(Some(&seed.0)).expect("32-byte seed");
        let parent = self
            .keys
            .iter()
            .rev()
            .find(|k| k.recorded)
            .expect("enrolment key is recorded")
            .keypair();
        let attestation = attest_key(&parent, &self.actor, &key.verification_key());
        self.keys.push(KeyEntry {
            seed,
            created_at: self.now,
            used: true,
            recorded: false,
            attestation: Some(attestation),
        });
        IssuedKey {
            key,
            attestation: Some(attestation),
            index,
        }
    }

    pub fn mark_recorded(&mut self, index: usize) {
        if let Some(k) = self.keys.get_mut(index) {
            k.recorded = true;
        }
    }

    pub fn to_encrypted(&self, passphrase: &str, rounds: u32) -> Result<Vec<u8>, KeystoreError> {
        let mut salt = [0u8; 16];
        let mut nonce = [0u8; 12];
        rand::rngs::OsRng.fill_bytes(&mut salt);
        rand::rngs::OsRng.fill_bytes(&mut nonce);
        let key = derive_key(passphrase, &salt, rounds);
        let body = Zeroizing::new(
            to_canonical(self)
                .map_err(|e| KeystoreError::Format(e.to_string()))?
                .into_vec(),
        );
        let ct = ChaCha20Poly1305::new(Key::from_slice(key.as_ref()))
            .encrypt(Nonce::from_slice(&nonce), body.as_slice())
            .map_err(|_| KeystoreError::Decrypt)?;
        let env = Envelope {
            ciphertext: hex::encode(ct),
            kdf: "pbkdf2-sha256".into(),
            nonce: hex::encode(nonce),
            rounds,
            salt: hex::encode(salt),
            version: 1,
        };
        let mut out = to_canonical(&env).expect("envelope is canonical").into_vec();
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_encrypted(bytes: &[u8], passphrase: &str) -> Result<Keystore, KeystoreError> {
        let env: Envelope =
            serde_json::from_slice(bytes).map_err(|e| KeystoreError::Format(e.to_string()))?;
        if env.version != 1 || env.kdf != "pbkdf2-sha256" {
            return Err(KeystoreError::Format("unsupported keystore version".into()));
        }
        let hexd = |s: &str| hex::decode(s).map_err(|e| KeystoreError::Format(e.to_string()));
        let salt = hexd(&env.salt)?;
        let nonce = hexd(&env.nonce)?;
        if nonce.len() != 12 {
            return Err(KeystoreError::Format("bad nonce length".into()));
        }
        let key = derive_key(passphrase, &salt, env.rounds);
        let body = ChaCha20Poly1305::new(Key::from_slice(key.as_ref()))
            .decrypt(Nonce::from_slice(&nonce), hexd(&env.ciphertext)?.as_slice())
            .map(Zeroizing::new)
            .map_err(|_| KeystoreError::Decrypt)?;
        serde_json::from_slice(&body).map_err(|e| KeystoreError::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>, passphrase: &str, rounds: u32) -> Result<(), KeystoreError> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        let mut opts = std::fs::OpenOptions::new();
        opts.write(true).create(true).truncate(true);
        #[cfg(unix)]
        std::os::unix::fs::OpenOptionsExt::mode(&mut opts, 0o600);
        std::io::Write::write_all(&mut opts.open(&tmp)?, &self.to_encrypted(passphrase, rounds)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, passphrase: &str) -> Result<Keystore, KeystoreError> {
        Keystore::from_encrypted(&std::fs::read(path)?, passphrase)
    }
}

impl RequestSigner for Keystore {
    fn actor(&self) -> &ActorId {
        &self.actor
    }

    fn role(&self) -> Role {
        self.role
    }

    fn sign_request(&mut self, operation: UseCase, parameters: Json, issued_at: i64) -> UseCaseRequest {
        let k = self.next_key();
        self.last_request_key = Some(k.index);
        UseCaseRequest::sign(
            self.actor.clone(),
            self.role,
            operation,
            &parameters,
            issued_at,
            &k.key,
            k.attestation,
        )
        .expect("parameters are canonical")
    }

    fn sign_statement(&mut self, statement: Statement) -> SignedStatement {
        let k = self.next_key();
        SignedStatement::sign(self.actor.clone(), &k.key, k.attestation, statement)
    }

    fn observe(&mut self, result: &UseCaseResult) {
        if let (true, Some(i)) = (result.signer_recorded, self.last_request_key.take()) {
            self.mark_recorded(i);
        }
    }
}
