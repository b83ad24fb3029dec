//! Encrypted off-chain record store. Personal data and the salts that
//! blind its on-chain digests live only here; erasure destroys both and
//! leaves a tombstone line behind.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chacha20poly1305::aead::{Aead, KeyInit, Payload as AeadPayload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use zeroize::{Zeroize, Zeroizing};

use crate::chain_apps::{CapabilityToken, Permission, TokenCheck, TokenRejection};
use crate::codec::{from_canonical, salted_hash, to_canonical, CanonicalBytes, Salt, SaltedDigest};
use crate::ids::{ActorId, DataId};

const TOMBSTONES: &str = ".tombstones";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("record {0} already exists")]
    DuplicateDataId(DataId),
    #[error("record {0} not found")]
    NotFound(DataId),
    #[error("record {0} has been erased")]
    Erased(DataId),
    #[error("record {0} was already erased")]
    AlreadyErased(DataId),
    #[error("capability token rejected: {0}")]
    TokenRejected(TokenRejection),
    #[error("storage i/o: {0}")]
    Io(String),
    #[error("decryption failed for {0}")]
    Crypto(DataId),
    #[error("invalid data link {0:?}")]
    BadLink(String),
    #[error("corrupt record {0}")]
    Corrupt(DataId),
    #[error("store key: {0}")]
    Key(String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> StoreError {
        StoreError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreConfig {
    pub store_id: String,
    /// File holding the 32-byte encryption key as hex. Created on first
    /// open if missing.
    pub key_file: PathBuf,
    pub data_dir: PathBuf,
}

/// `offchain://<store-id>/<data-id>`
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DataLink {
    store_id: String,
    data_id: DataId,
}

impl DataLink {
    pub fn new(store_id: &str, data_id: DataId) -> DataLink {
        DataLink {
            store_id: store_id.to_string(),
            data_id,
        }
    }

    pub fn store_id(&self) -> &str {
        &self.store_id
    }

    pub fn data_id(&self) -> &DataId {
        &self.data_id
    }
}

impl fmt::Display for DataLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "offchain://{}/{}", self.store_id, self.data_id)
    }
}

impl FromStr for DataLink {
    type Err = StoreError;
    fn from_str(s: &str) -> Result<DataLink, StoreError> {
        let bad = || StoreError::BadLink(s.to_string());
        let rest = s.strip_prefix("offchain://").ok_or_else(bad)?;
        let (store, id) = rest.split_once('/').ok_or_else(bad)?;
        if store.is_empty() || store.contains('/') {
            return Err(bad());
        }
        Ok(DataLink {
            store_id: store.to_string(),
            data_id: DataId::new(id).map_err(|_| bad())?,
        })
    }
}

impl TryFrom<String> for DataLink {
    type Error = StoreError;
    fn try_from(s: String) -> Result<DataLink, StoreError> {
        s.parse()
    }
}

impl From<DataLink> for String {
    fn from(l: DataLink) -> String {
        l.to_string()
    }
}

/// Proof that a record's ciphertext and salt were destroyed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErasureReceipt {
    pub data_id: DataId,
    pub link: DataLink,
    pub erased_at: i64,
}

/// Decides whether a capability token may be used. The gateway backs this
/// with an on-chain validation transaction.
pub trait TokenAuthority {
    fn validate_token(
        &mut self,
        token: &CapabilityToken,
        data_id: &DataId,
        permission: Permission,
    ) -> TokenCheck;
}

#[derive(Serialize, Deserialize)]
struct StoredRecord {
    ciphertext: String,
    created_at: i64,
    data_id: DataId,
    nonce: String,
    owner: ActorId,
    salt_nonce: String,
    sealed_salt: String,
    updated_at: i64,
}

#[derive(Serialize, Deserialize)]
struct Tombstone {
    data_id: DataId,
    erased_at: i64,
    store_id: String,
}

type Rng = Box<dyn RngCore + Send>;

pub struct OffchainStore {
    config: StoreConfig,
    cipher: ChaCha20Poly1305,
    rng: Mutex<Rng>,
    locks: RwLock<BTreeMap<DataId, Arc<Mutex<()>>>>,
    erased: RwLock<BTreeSet<DataId>>,
    access_count: AtomicU64,
}

impl fmt::Debug for OffchainStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OffchainStore")
            .field("store_id", &self.config.store_id)
            .field("data_dir", &self.config.data_dir)
            .finish_non_exhaustive()
    }
}

fn load_or_create_key(path: &Path, rng: &mut dyn RngCore) -> Result<Zeroizing<[u8; 32]>, StoreError> {
    let mut key = Zeroizing::new([0u8; 32]);
    if path.exists() {
        let text = Zeroizing::new(fs::read_to_string(path)?);
        hex::decode_to_slice(text.trim(), key.as_mut())
            .map_err(|e| StoreError::Key(format!("{}: {e}", path.display())))?;
        return Ok(key);
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    rng.fill_bytes(key.as_mut());
    let mut opts = OpenOptions::new();
    opts.write(true).create_new(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut f = opts.open(path)?;
    let mut text = hex::encode(key.as_ref());
    f.write_all(text.as_bytes())?;
    text.zeroize();
    f.sync_all()?;
    Ok(key)
}

impl OffchainStore {
    pub fn open(config: StoreConfig) -> Result<OffchainStore, StoreError> {
        Self::open_with_rng(config, Box::new(rand::rngs::OsRng))
    }

    /// Opens with an explicit randomness source for salts, nonces and a
    /// newly created key.
    pub fn open_with_rng(config: StoreConfig, mut rng: Rng) -> Result<OffchainStore, StoreError> {
        fs::create_dir_all(&config.data_dir)?;
        let key = load_or_create_key(&config.key_file, rng.as_mut())?;
        let cipher = ChaCha20Poly1305::new(Key::from_slice(key.as_ref()));
        let mut erased = BTreeSet::new();
        let tomb_path = config.data_dir.join(TOMBSTONES);
        if tomb_path.exists() {
            for line in fs::read(&tomb_path)?.split(|&b| b == b'\n').filter(|l| !l.is_empty()) {
                if let Ok(t) = from_canonical::<Tombstone>(line) {
                    erased.insert(t.data_id);
                }
            }
        }
        Ok(OffchainStore {
            config,
            cipher,
            rng: Mutex::new(rng),
            locks: RwLock::new(BTreeMap::new()),
            erased: RwLock::new(erased),
            access_count: AtomicU64::new(0),
        })
    }

    pub fn store_id(&self) -> &str {
        &self.config.store_id
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn link_for(&self, data_id: &DataId) -> DataLink {
        DataLink::new(&self.config.store_id, data_id.clone())
    }

    /// Number of successful plaintext reads.
    pub fn access_count(&self) -> u64 {
        self.access_count.load(Ordering::SeqCst)
    }

    pub fn record_path(&self, data_id: &DataId) -> PathBuf {
        self.config.data_dir.join(data_id.as_str())
    }

    pub fn is_erased(&self, data_id: &DataId) -> bool {
        self.erased.read().expect("erased set lock").contains(data_id)
    }

    pub fn contains(&self, data_id: &DataId) -> bool {
        !self.is_erased(data_id) && self.record_path(data_id).exists()
    }

    fn lock_for(&self, data_id: &DataId) -> Arc<Mutex<()>> {
        if let Some(l) = self.locks.read().expect("lock map").get(data_id) {
            return l.clone();
        }
        self.locks
            .write()
            .expect("lock map")
            .entry(data_id.clone())
            .or_default()
            .clone()
    }

    fn fill(&self, buf: &mut [u8]) {
        self.rng.lock().expect("rng lock").fill_bytes(buf);
    }

    fn seal(&self, aad: &str, plaintext: &[u8]) -> Result<(String, String), StoreError> {
        let mut nonce = [0u8; 12];
        self.fill(&mut nonce);
        let ct = self
            .cipher
            .encrypt(
                Nonce::from_slice(&nonce),
                AeadPayload {
                    msg: plaintext,
                    aad: aad.as_bytes(),
                },
            )
            .map_err(|_| StoreError::Io("encryption failed".into()))?;
        Ok((hex::encode(nonce), hex::encode(ct)))
    }

    fn open_sealed(
        &self,
        data_id: &DataId,
        aad: &str,
        nonce: &str,
        ct: &str,
    ) -> Result<Zeroizing<Vec<u8>>, StoreError> {
        let corrupt = || StoreError::Corrupt(data_id.clone());
        let nonce: [u8; 12] = hex::decode(nonce)
            .ok()
            .and_then(|n| n.try_into().ok())
            .ok_or_else(corrupt)?;
        let ct = hex::decode(ct).map_err(|_| corrupt())?;
        self.cipher
            .decrypt(
                Nonce::from_slice(&nonce),
                AeadPayload {
                    msg: &ct,
                    aad: aad.as_bytes(),
                },
            )
            .map(Zeroizing::new)
            .map_err(|_| StoreError::Crypto(data_id.clone()))
    }

    fn encrypt_record(
        &self,
        data_id: &DataId,
        owner: &ActorId,
        plaintext: &[u8],
        salt: &Salt,
        created_at: i64,
        updated_at: i64,
    ) -> Result<Zeroizing<Vec<u8>>, StoreError> {
        let (nonce, ciphertext) = self.seal(&format!("data:{data_id}"), plaintext)?;
        let (salt_nonce, sealed_salt) = self.seal(&format!("salt:{data_id}"), salt.as_bytes())?;
        let rec = StoredRecord {
            ciphertext,
            created_at,
            data_id: data_id.clone(),
            nonce,
            owner: owner.clone(),
            salt_nonce,
            sealed_salt,
            updated_at,
        };
        let mut bytes = Zeroizing::new(to_canonical(&rec).expect("record is canonical").into_vec());
        bytes.push(b'\n');
        Ok(bytes)
    }

    fn read_record(&self, data_id: &DataId) -> Result<StoredRecord, StoreError> {
        if self.is_erased(data_id) {
            return Err(StoreError::Erased(data_id.clone()));
        }
        let path = self.record_path(data_id);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(data_id.clone()))
            }
            Err(e) => return Err(e.into()),
        };
        let line = bytes.strip_suffix(b"\n").unwrap_or(&bytes);
        let rec: StoredRecord =
            from_canonical(line).map_err(|_| StoreError::Corrupt(data_id.clone()))?;
        if &rec.data_id != data_id {
            return Err(StoreError::Corrupt(data_id.clone()));
        }
        Ok(rec)
    }

    fn decrypt_parts(
        &self,
        rec: &StoredRecord,
    ) -> Result<(Zeroizing<Vec<u8>>, Salt), StoreError> {
        let id = &rec.data_id;
        let plaintext = self.open_sealed(id, &format!("data:{id}"), &rec.nonce, &rec.ciphertext)?;
        let raw = self.open_sealed(id, &format!("salt:{id}"), &rec.salt_nonce, &rec.sealed_salt)?;
        let salt_bytes: [u8; 32] = raw.as_slice().try_into().map_err(|_| StoreError::Corrupt(id.clone()))?;
        Ok((plaintext, Salt::from_bytes(salt_bytes)))
    }

    /// Overwrites the file in place so no earlier version survives on disk
    /// under this name.
    fn overwrite(path: &Path, contents: &[u8]) -> Result<(), StoreError> {
        let mut f = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(path)?;
        let old_len = f.metadata()?.len();
        wipe(&mut f, old_len)?;
        f.set_len(0)?;
        f.seek(SeekFrom::Start(0))?;
        f.write_all(contents)?;
        f.sync_all()?;
        Ok(())
    }

    /// Encrypts and stores a new record under a fresh salt and returns its
    /// link and salted digest.
    pub fn store_record(
        &self,
        data_id: &DataId,
        plaintext: &CanonicalBytes,
        owner: &ActorId,
        now: i64,
    ) -> Result<(DataLink, SaltedDigest), StoreError> {
        let lock = self.lock_for(data_id);
        let _g = lock.lock().expect("record lock");
        let path = self.record_path(data_id);
        if self.is_erased(data_id) || path.exists() {
            return Err(StoreError::DuplicateDataId(data_id.clone()));
        }
        let mut raw = [0u8; 32];
        self.fill(&mut raw);
        let salt = Salt::from_bytes(raw);
        raw.zeroize();
        let digest = salted_hash(&salt, plaintext);
        let bytes = self.encrypt_record(data_id, owner, plaintext, &salt, now, now)?;
        let mut f = OpenOptions::new().write(true).create_new(true).open(&path)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        Ok((self.link_for(data_id), digest))
    }

    fn authorize(
        auth: &mut dyn TokenAuthority,
        token: &CapabilityToken,
        data_id: &DataId,
        permission: Permission,
    ) -> Result<(), StoreError> {
        auth.validate_token(token, data_id, permission)
            .map_err(StoreError::TokenRejected)
    }

    /// Returns the plaintext of a record for a READ token.
    pub fn fetch_record(
        &self,
        auth: &mut dyn TokenAuthority,
        token: &CapabilityToken,
        data_id: &DataId,
    ) -> Result<CanonicalBytes, StoreError> {
        Self::authorize(auth, token, data_id, Permission::Read)?;
        let lock = self.lock_for(data_id);
        let _g = lock.lock().expect("record lock");
        let rec = self.read_record(data_id)?;
        let (plaintext, _salt) = self.decrypt_parts(&rec)?;
        let out = CanonicalBytes::parse(&plaintext).map_err(|_| StoreError::Corrupt(data_id.clone()))?;
        self.access_count.fetch_add(1, Ordering::SeqCst);
        Ok(out)
    }

    /// Salts a candidate with the record's salt for a VERIFY token. Only
    /// the digest leaves the store.
    pub fn digest_candidate(
        &self,
        auth: &mut dyn TokenAuthority,
        token: &CapabilityToken,
        data_id: &DataId,
        candidate: &[u8],
    ) -> Result<SaltedDigest, StoreError> {
        Self::authorize(auth, token, data_id, Permission::Verify)?;
        let lock = self.lock_for(data_id);
        let _g = lock.lock().expect("record lock");
        let rec = self.read_record(data_id)?;
        let (_plaintext, salt) = self.decrypt_parts(&rec)?;
        Ok(salted_hash(&salt, candidate))
    }

    /// Replaces a record's content under a fresh salt for a MODIFY token.
    pub fn update_record(
        &self,
        auth: &mut dyn TokenAuthority,
        token: &CapabilityToken,
        data_id: &DataId,
        plaintext: &CanonicalBytes,
        now: i64,
    ) -> Result<SaltedDigest, StoreError> {
        Self::authorize(auth, token, data_id, Permission::Modify)?;
        let lock = self.lock_for(data_id);
        let _g = lock.lock().expect("record lock");
        let rec = self.read_record(data_id)?;
        // Proves the record is readable under our key before replacing it.
        self.decrypt_parts(&rec)?;
        let mut raw = [0u8; 32];
        self.fill(&mut raw);
        let salt = Salt::from_bytes(raw);
        raw.zeroize();
        let digest = salted_hash(&salt, plaintext);
        let bytes = self.encrypt_record(data_id, &rec.owner, plaintext, &salt, rec.created_at, now)?;
        Self::overwrite(&self.record_path(data_id), &bytes)?;
        Ok(digest)
    }

    /// Destroys ciphertext and salt for a DELETE token. The on-chain digest
    /// can never be matched again once the salt is gone.
    pub fn erase_record(
        &self,
        auth: &mut dyn TokenAuthority,
        token: &CapabilityToken,
        data_id: &DataId,
        now: i64,
    ) -> Result<ErasureReceipt, StoreError> {
        Self::authorize(auth, token, data_id, Permission::Delete)?;
        let lock = self.lock_for(data_id);
        let _g = lock.lock().expect("record lock");
        if self.is_erased(data_id) {
            return Err(StoreError::AlreadyErased(data_id.clone()));
        }
        let path = self.record_path(data_id);
        if !path.exists() {
            return Err(StoreError::NotFound(data_id.clone()));
        }
        Self::overwrite(&path, &[])?;
        let tomb = Tombstone {
            data_id: data_id.clone(),
            erased_at: now,
            store_id: self.config.store_id.clone(),
        };
        let mut line = to_canonical(&tomb).expect("tombstone is canonical").into_vec();
        line.push(b'\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.config.data_dir.join(TOMBSTONES))?;
        f.write_all(&line)?;
        f.sync_all()?;
        self.erased.write().expect("erased set lock").insert(data_id.clone());
        Ok(ErasureReceipt {
            data_id: data_id.clone(),
            link: self.link_for(data_id),
            erased_at: now,
        })
    }

    /// Recomputes the salted digest of the stored content. Used for
    /// consistency checks between the store and the chain.
    pub fn integrity_digest(&self, data_id: &DataId) -> Result<SaltedDigest, StoreError> {
        let lock = self.lock_for(data_id);
        let _g = lock.lock().expect("record lock");
        let rec = self.read_record(data_id)?;
        let (plaintext, salt) = self.decrypt_parts(&rec)?;
        Ok(salted_hash(&salt, &plaintext))
    }

    /// Raw bytes currently on disk for a record, for inspection.
    pub fn raw_file(&self, data_id: &DataId) -> Result<Vec<u8>, StoreError> {
        let mut out = Vec::new();
        File::open(self.record_path(data_id))?.read_to_end(&mut out)?;
        Ok(out)
    }
}

fn wipe(f: &mut File, len: u64) -> Result<(), StoreError> {
    f.seek(SeekFrom::Start(0))?;
    let zeros = [0u8; 4096];
    let mut left = len;
    while left > 0 {
        let n = left.min(zeros.len() as u64) as usize;
        f.write_all(&zeros[..n])?;
        left -= n as u64;
    }
    f.sync_all()?;
    Ok(())
}
