mod common;

use std::path::Path;

use certchain_core::chain_apps::{CapabilityToken, Permission, TokenCheck, TokenRejection};
use certchain_core::codec::{salted_hash, Hash32, Salt, TokenId};
use certchain_core::ids::DataId;
use certchain_core::offchain_store::{DataLink, OffchainStore, StoreConfig, StoreError, TokenAuthority};
use common::*;

/// Answers every validation with `answer` and remembers what it was asked.
struct Authority {
    answer: TokenCheck,
    asked: Vec<(DataId, Permission)>,
}

impl Authority {
    fn accept() -> Authority {
        Authority {
            answer: Ok(()),
            asked: Vec::new(),
        }
    }

    fn reject(r: TokenRejection) -> Authority {
        Authority {
            answer: Err(r),
            asked: Vec::new(),
        }
    }
}

impl TokenAuthority for Authority {
    fn validate_token(&mut self, _: &CapabilityToken, data_id: &DataId, permission: Permission) -> TokenCheck {
        self.asked.push((data_id.clone(), permission));
        self.answer
    }
}

fn token() -> CapabilityToken {
    CapabilityToken {
        token_id: TokenId([1; 16]),
        subject: actor("student-1"),
        data_id: data("dip-1"),
        permission: Permission::Read,
        issued_at: START,
        ttl_seconds: 300,
        mac: Hash32([0; 32]),
    }
}

fn open(dir: &Path) -> OffchainStore {
    OffchainStore::open(StoreConfig {
        store_id: "registry".into(),
        key_file: dir.join("keys/store.key"),
        data_dir: dir.join("records"),
    })
    .unwrap()
}

#[test]
fn store_fetch_round_trip_and_digest() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let id = data("dip-1");
    let bytes = record("Ana", "9");
    let (link, digest) = store.store_record(&id, &bytes, &actor("student-1"), START).unwrap();
    assert_eq!(link.to_string(), "offchain://registry/dip-1");
    assert_eq!(store.integrity_digest(&id).unwrap(), digest);

    let mut auth = Authority::accept();
    assert_eq!(store.fetch_record(&mut auth, &token(), &id).unwrap(), bytes);
    assert_eq!(store.access_count(), 1);
    let d = store.digest_candidate(&mut auth, &token(), &id, bytes.as_bytes()).unwrap();
    assert_eq!(d, digest);
    let other = store.digest_candidate(&mut auth, &token(), &id, b"{}").unwrap();
    assert_ne!(other, digest);
    assert_eq!(
        auth.asked,
        [(id.clone(), Permission::Read), (id.clone(), Permission::Verify), (id, Permission::Verify)]
    );
}

#[test]
fn ciphertext_hides_plaintext_and_salts_differ() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let bytes = record("Ana Ruiz Plaintext", "9");
    let (_, d1) = store.store_record(&data("a"), &bytes, &actor("s"), START).unwrap();
    let (_, d2) = store.store_record(&data("b"), &bytes, &actor("s"), START).unwrap();
    assert_ne!(d1, d2, "same content under two salts must not collide");
    for id in ["a", "b"] {
        let raw = store.raw_file(&data(id)).unwrap();
        assert!(!raw.windows(9).any(|w| w == b"Plaintext"));
        assert!(!String::from_utf8_lossy(&raw).contains(&hex::encode(bytes.as_bytes())));
    }
}

#[test]
fn rejected_tokens_never_reach_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let id = data("dip-1");
    let bytes = record("Ana", "9");
    let (_, digest) = store.store_record(&id, &bytes, &actor("student-1"), START).unwrap();
    for r in [TokenRejection::Expired, TokenRejection::Revoked, TokenRejection::BadMac] {
        let mut auth = Authority::reject(r);
        assert_eq!(store.fetch_record(&mut auth, &token(), &id), Err(StoreError::TokenRejected(r)));
        assert_eq!(
            store.update_record(&mut auth, &token(), &id, &record("X", "0"), START),
            Err(StoreError::TokenRejected(r))
        );
        assert_eq!(store.erase_record(&mut auth, &token(), &id, START), Err(StoreError::TokenRejected(r)));
    }
    assert_eq!(store.access_count(), 0);
    assert_eq!(store.integrity_digest(&id).unwrap(), digest);
}

#[test]
fn update_overwrites_in_place_under_a_new_salt() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let id = data("dip-1");
    let (_, old) = store.store_record(&id, &record("Ana", "7"), &actor("s"), START).unwrap();
    let new_bytes = record("Ana", "8");
    let mut auth = Authority::accept();
    let new = store.update_record(&mut auth, &token(), &id, &new_bytes, START + 5).unwrap();
    assert_ne!(new, old);
    assert_eq!(store.integrity_digest(&id).unwrap(), new);
    assert_eq!(store.fetch_record(&mut auth, &token(), &id).unwrap(), new_bytes);
    let entries: Vec<_> = std::fs::read_dir(dir.path().join("records")).unwrap().collect();
    assert_eq!(entries.len(), 1, "update must not leave extra files behind");
}

#[test]
fn erase_destroys_content_and_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let id = data("dip-1");
    {
        let store = open(dir.path());
        store.store_record(&id, &record("Ana", "7"), &actor("s"), START).unwrap();
        let mut auth = Authority::accept();
        let receipt = store.erase_record(&mut auth, &token(), &id, START + 9).unwrap();
        assert_eq!(receipt.erased_at, START + 9);
        assert_eq!(receipt.link, "offchain://registry/dip-1".parse::<DataLink>().unwrap());
        assert!(store.raw_file(&id).unwrap().is_empty());
        assert_eq!(store.erase_record(&mut auth, &token(), &id, START), Err(StoreError::AlreadyErased(id.clone())));
    }
    let store = open(dir.path());
    assert!(store.is_erased(&id));
    let mut auth = Authority::accept();
    assert_eq!(store.fetch_record(&mut auth, &token(), &id), Err(StoreError::Erased(id.clone())));
    assert_eq!(
        store.store_record(&id, &record("Ana", "7"), &actor("s"), START),
        Err(StoreError::DuplicateDataId(id.clone()))
    );
    let tomb = std::fs::read_to_string(dir.path().join("records/.tombstones")).unwrap();
    assert_eq!(tomb, format!("{{\"data_id\":\"dip-1\",\"erased_at\":{},\"store_id\":\"registry\"}}\n", START + 9));
}

#[test]
fn records_and_key_persist_across_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let id = data("dip-1");
    let bytes = record("Ana", "9");
    let digest = {
        let store = open(dir.path());
        store.store_record(&id, &bytes, &actor("s"), START).unwrap().1
    };
    let store = open(dir.path());
    assert!(store.contains(&id));
    assert_eq!(store.integrity_digest(&id).unwrap(), digest);
    assert_eq!(
        store.store_record(&id, &bytes, &actor("s"), START),
        Err(StoreError::DuplicateDataId(id.clone()))
    );
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let mode = std::fs::metadata(dir.path().join("keys/store.key")).unwrap().permissions().mode();
        assert_eq!(mode & 0o777, 0o600);
    }
}

#[test]
fn wrong_key_or_damaged_record_fails_closed() {
    let dir = tempfile::tempdir().unwrap();
    let id = data("dip-1");
    open(dir.path()).store_record(&id, &record("Ana", "9"), &actor("s"), START).unwrap();
    let key_file = dir.path().join("keys/store.key");
    std::fs::write(&key_file, hex::encode([0xEE; 32])).unwrap();
    let store = open(dir.path());
    let mut auth = Authority::accept();
    assert_eq!(store.fetch_record(&mut auth, &token(), &id), Err(StoreError::Crypto(id.clone())));

    let other = tempfile::tempdir().unwrap();
    let store = open(other.path());
    store.store_record(&id, &record("Ana", "9"), &actor("s"), START).unwrap();
    let path = store.record_path(&id);
    let mut raw = std::fs::read(&path).unwrap();
    let at = raw.iter().position(|b| *b == b':').unwrap() + 5;
    raw[at] = if raw[at] == b'0' { b'1' } else { b'0' };
    std::fs::write(&path, raw).unwrap();
    assert!(store.fetch_record(&mut auth, &token(), &id).is_err());
    assert_eq!(store.access_count(), 0);
}

#[test]
fn missing_records_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let mut auth = Authority::accept();
    let id = data("nope");
    assert_eq!(store.fetch_record(&mut auth, &token(), &id), Err(StoreError::NotFound(id.clone())));
    assert_eq!(store.erase_record(&mut auth, &token(), &id, START), Err(StoreError::NotFound(id)));
}

#[test]
fn links_parse_strictly() {
    let l: DataLink = "offchain://registry/dip-1".parse().unwrap();
    assert_eq!((l.store_id(), l.data_id().as_str()), ("registry", "dip-1"));
    for bad in ["http://registry/dip-1", "offchain://registry", "offchain:///dip-1", "offchain://a/b/c"] {
        assert!(bad.parse::<DataLink>().is_err(), "{bad}");
    }
}

#[test]
fn salted_digest_matches_the_codec() {
    let salt = Salt::from_bytes([0; 32]);
    assert_eq!(salted_hash(&salt, b"").digest.to_hex(), {
        use sha2::Digest;
        hex::encode(sha2::Sha256::digest([0u8; 33]))
    });
}
