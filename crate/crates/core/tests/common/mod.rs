#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use serde_json::json;
use tempfile::TempDir;

use certchain_core::chain_apps::{AuditFilter, ChangeKind, Permission, Role, Statement, UseCase};
use certchain_core::client::{call, RequestSigner};
use certchain_core::clock::ManualClock;
use certchain_core::codec::{generate_keypair, sha256, to_canonical, CanonicalBytes, Hash32, KeyPair, SaltedDigest};
use certchain_core::gateway::{
    AccessParams, AuditParams, Candidate, ChangeAction, ChangeParams, Gateway, GatewayParts,
    GatewaySettings, GrantParams, KeyMode, RegisterParams, RevokeParams, ServiceSigner,
    UseCaseResult, VerifyParams,
};
use certchain_core::genesis::{Genesis, GenesisActor};
use certchain_core::ids::{ActorId, DataId};
use certchain_core::keystore::Keystore;
use certchain_core::offchain_store::{OffchainStore, StoreConfig};

pub mod session;
pub mod world;

pub const START: i64 = 1_700_000_000;
pub const SERVICE_SEED: [u8; 32] = [9; 32];
pub const VALIDATOR_SEEDS: [[u8; 32]; 3] = [[0x10; 32], [0x11; 32], [0x12; 32]];
pub const TOKEN_SECRET: [u8; 32] = [0x42; 32];

pub fn actor(s: &str) -> ActorId {
    ActorId::new(s).unwrap()
}

pub fn data(s: &str) -> DataId {
    DataId::new(s).unwrap()
}

pub fn key(seed: [u8; 32]) -> KeyPair {
    generate_keypair(Some(&seed)).unwrap()
}

/// RNG that remembers every byte it hands out.
pub struct RecordingRng {
    inner: ChaCha20Rng,
    log: Arc<Mutex<Vec<Vec<u8>>>>,
}

impl RecordingRng {
    pub fn new(seed: u64) -> (RecordingRng, Arc<Mutex<Vec<Vec<u8>>>>) {
        let log = Arc::new(Mutex::new(Vec::new()));
        (
            RecordingRng {
                inner: ChaCha20Rng::seed_from_u64(seed),
                log: log.clone(),
            },
            log,
        )
    }
}

impl RngCore for RecordingRng {
    fn next_u32(&mut self) -> u32 {
        let mut b = [0u8; 4];
        self.fill_bytes(&mut b);
        u32::from_le_bytes(b)
    }
    fn next_u64(&mut self) -> u64 {
        let mut b = [0u8; 8];
        self.fill_bytes(&mut b);
        u64::from_le_bytes(b)
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest);
        self.log.lock().unwrap().push(dest.to_vec());
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

pub fn genesis() -> Genesis {
    Genesis {
        validators: VALIDATOR_SEEDS.iter().map(|s| key(*s).verification_key()).collect(),
        token_secret: Hash32(TOKEN_SECRET),
        controller: GenesisActor {
            id: actor("seciu"),
            key: key([1; 32]).verification_key(),
        },
        processors: vec![
            GenesisActor {
                id: actor("office-math"),
                key: key([2; 32]).verification_key(),
            },
            GenesisActor {
                id: actor("office-law"),
                key: key([3; 32]).verification_key(),
            },
        ],
        authority: Some(GenesisActor {
            id: actor("aepd"),
            key: key([4; 32]).verification_key(),
        }),
        services: vec![GenesisActor {
            id: actor("gateway"),
            key: key(SERVICE_SEED).verification_key(),
        }],
    }
}

fn build_gateway(
    dir: &Path,
    clock: &Arc<ManualClock>,
    options: Options,
) -> (Gateway, Arc<Mutex<Vec<Vec<u8>>>>) {
    let (store_rng, store_log) = RecordingRng::new(options.seed);
    let store = OffchainStore::open_with_rng(
        StoreConfig {
            store_id: "registry".into(),
            key_file: dir.join("store.key"),
            data_dir: dir.join("records"),
        },
        Box::new(store_rng),
    )
    .unwrap();
    let gateway = Gateway::new(GatewayParts {
        genesis: genesis(),
        validators: VALIDATOR_SEEDS.iter().map(|s| key(*s)).collect(),
        signer: ServiceSigner::new(actor("gateway"), SERVICE_SEED, options.key_mode),
        store: Arc::new(store),
        clock: clock.clone(),
        settings: GatewaySettings::default(),
        chain_file: options.persist.then(|| dir.join("chain.jsonl")),
        rng: Some(Box::new(ChaCha20Rng::seed_from_u64(options.seed ^ 0x5eed))),
    })
    .unwrap();
    (gateway, store_log)
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub key_mode: KeyMode,
    pub persist: bool,
    pub seed: u64,
}

impl Default for Options {
    fn default() -> Options {
        Options {
            key_mode: KeyMode::Static,
            persist: true,
            seed: 7,
        }
    }
}

pub struct Fixture {
    pub dir: TempDir,
    pub clock: Arc<ManualClock>,
    pub gateway: Gateway,
    pub genesis: Genesis,
    pub store_rng: Arc<Mutex<Vec<Vec<u8>>>>,
    pub options: Options,
    pub invocations: u64,
}

impl Fixture {
    pub fn new() -> Fixture {
        Fixture::with(Options::default())
    }

    pub fn with(options: Options) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let clock = Arc::new(ManualClock::new(START));
        let (gateway, store_rng) = build_gateway(dir.path(), &clock, options);
        Fixture {
            dir,
            clock,
            gateway,
            genesis: genesis(),
            store_rng,
            options,
            invocations: 0,
        }
    }

    /// Replaces the gateway with a fresh one over the same files, as after
    /// a restart.
    pub fn restart(&mut self) {
        let (gateway, store_rng) = build_gateway(self.dir.path(), &self.clock, self.options);
        self.gateway = gateway;
        self.store_rng = store_rng;
    }

    pub fn chain_path(&self) -> PathBuf {
        self.dir.path().join("chain.jsonl")
    }

    pub fn records_dir(&self) -> PathBuf {
        self.dir.path().join("records")
    }

    fn keystore(&self, id: &str, role: Role, seed: [u8; 32]) -> Keystore {
        Keystore::new(actor(id), role, self.options.key_mode, seed, START)
    }

    pub fn dc(&self) -> Keystore {
        self.keystore("seciu", Role::Controller, [1; 32])
    }

    pub fn office(&self) -> Keystore {
        self.keystore("office-math", Role::Processor, [2; 32])
    }

    pub fn office_law(&self) -> Keystore {
        self.keystore("office-law", Role::Processor, [3; 32])
    }

    pub fn authority(&self) -> Keystore {
        self.keystore("aepd", Role::Recipient, [4; 32])
    }

    pub fn student(&self, n: u8) -> Keystore {
        self.keystore(&format!("student-{n}"), Role::DataOwner, [0x20 + n; 32])
    }

    pub fn employer(&self, n: u8) -> Keystore {
        self.keystore(&format!("employer-{n}"), Role::Recipient, [0x60 + n; 32])
    }

    /// Sends one request, one second after the previous one.
    pub fn call<P: Serialize>(
        &mut self,
        signer: &mut dyn RequestSigner,
        op: UseCase,
        params: &P,
    ) -> UseCaseResult {
        let now = self.clock.advance(1);
        let mut transport = &self.gateway;
        self.invocations += 1;
        call(signer, &mut transport, op, serde_json::to_value(params).unwrap(), now).unwrap()
    }

    pub fn register(
        &mut self,
        office: &mut Keystore,
        owner: &mut Keystore,
        data_id: &str,
        plaintext: &CanonicalBytes,
    ) -> UseCaseResult {
        let consent = owner.sign_statement(Statement::RegisterConsent {
            data_id: data(data_id),
            registrar: office.actor.clone(),
        });
        let params = RegisterParams {
            data_id: data(data_id),
            owner: owner.actor.clone(),
            owner_consent: Some(consent),
            plaintext: hex::encode(plaintext.as_bytes()),
        };
        self.call(office, UseCase::Register, &params)
    }

    fn grant_params(
        owner: &mut Keystore,
        data_id: &str,
        grantee: &Keystore,
        permission: Permission,
        expiry: Option<i64>,
    ) -> GrantParams {
        let consent = owner.sign_statement(Statement::GrantConsent {
            data_id: data(data_id),
            grantee: grantee.actor.clone(),
            permission,
            expiry,
        });
        GrantParams {
            data_id: data(data_id),
            grantee: grantee.actor.clone(),
            grantee_key: Some(grantee.enrolment_key()),
            permission,
            expiry,
            consent: Some(consent),
        }
    }

    /// The owner grants directly.
    pub fn grant(
        &mut self,
        owner: &mut Keystore,
        data_id: &str,
        grantee: &Keystore,
        permission: Permission,
    ) -> UseCaseResult {
        let params = Self::grant_params(owner, data_id, grantee, permission, None);
        self.call(owner, UseCase::Grant, &params)
    }

    pub fn grant_until(
        &mut self,
        owner: &mut Keystore,
        data_id: &str,
        grantee: &Keystore,
        permission: Permission,
        expiry: i64,
    ) -> UseCaseResult {
        let params = Self::grant_params(owner, data_id, grantee, permission, Some(expiry));
        self.call(owner, UseCase::Grant, &params)
    }

    /// Staff relay a grant carrying the owner's consent.
    pub fn grant_via(
        &mut self,
        staff: &mut Keystore,
        owner: &mut Keystore,
        data_id: &str,
        grantee: &Keystore,
        permission: Permission,
    ) -> UseCaseResult {
        let params = Self::grant_params(owner, data_id, grantee, permission, None);
        self.call(staff, UseCase::Grant, &params)
    }

    pub fn revoke(
        &mut self,
        requester: &mut Keystore,
        data_id: &str,
        grantee: &ActorId,
        permission: Permission,
    ) -> UseCaseResult {
        let params = RevokeParams {
            data_id: data(data_id),
            grantee: grantee.clone(),
            permission,
        };
        self.call(requester, UseCase::Revoke, &params)
    }

    pub fn access(&mut self, signer: &mut Keystore, data_id: &str) -> UseCaseResult {
        self.call(signer, UseCase::Access, &AccessParams { data_id: data(data_id) })
    }

    pub fn verify(&mut self, signer: &mut Keystore, data_id: &str, candidate: &[u8]) -> UseCaseResult {
        let params = VerifyParams {
            data_id: data(data_id),
            candidate: Candidate::Plaintext(hex::encode(candidate)),
        };
        self.call(signer, UseCase::Verify, &params)
    }

    pub fn verify_digest(&mut self, signer: &mut Keystore, data_id: &str, digest: SaltedDigest) -> UseCaseResult {
        let params = VerifyParams {
            data_id: data(data_id),
            candidate: Candidate::Digest(digest),
        };
        self.call(signer, UseCase::Verify, &params)
    }

    fn action(new: Option<&CanonicalBytes>) -> ChangeAction {
        match new {
            Some(b) => ChangeAction::Modify {
                new_plaintext: hex::encode(b.as_bytes()),
            },
            None => ChangeAction::Erase,
        }
    }

    fn approval(
        approver: &mut Keystore,
        data_id: &str,
        requester: &ActorId,
        new: Option<&CanonicalBytes>,
    ) -> certchain_core::chain_apps::SignedStatement {
        approver.sign_statement(Statement::ChangeApproval {
            data_id: data(data_id),
            requester: requester.clone(),
            action: if new.is_some() {
                ChangeKind::Modify
            } else {
                ChangeKind::Erase
            },
            content_digest: new.map(|b| sha256(b)),
        })
    }

    /// Owner change countersigned by `staff` (when given).
    pub fn owner_change(
        &mut self,
        owner: &mut Keystore,
        staff: Option<&mut Keystore>,
        data_id: &str,
        new: Option<&CanonicalBytes>,
    ) -> UseCaseResult {
        let owner_id = owner.actor.clone();
        let approval = staff.map(|s| Self::approval(s, data_id, &owner_id, new));
        let params = ChangeParams {
            data_id: data(data_id),
            action: Self::action(new),
            approval,
        };
        self.call(owner, UseCase::OwnerChange, &params)
    }

    /// Controller or office change, authorized by `owner` when given.
    pub fn controller_change(
        &mut self,
        staff: &mut Keystore,
        owner: Option<&mut Keystore>,
        data_id: &str,
        new: Option<&CanonicalBytes>,
    ) -> UseCaseResult {
        let staff_id = staff.actor.clone();
        let approval = owner.map(|o| Self::approval(o, data_id, &staff_id, new));
        let params = ChangeParams {
            data_id: data(data_id),
            action: Self::action(new),
            approval,
        };
        self.call(staff, UseCase::ControllerChange, &params)
    }

    pub fn audit(&mut self, signer: &mut Keystore, data_id: Option<&str>) -> UseCaseResult {
        let params = AuditParams {
            filter: AuditFilter {
                data_id: data_id.map(data),
                ..AuditFilter::default()
            },
        };
        self.call(signer, UseCase::AuditLog, &params)
    }
}

pub fn record(name: &str, grade: &str) -> CanonicalBytes {
    to_canonical(&json!({"degree": "BSc Mathematics", "full_name": name, "grade": grade})).unwrap()
}

pub fn reason(r: &UseCaseResult) -> &str {
    r.reason.as_deref().unwrap_or("")
}

/// A fixed ten-use-case session: two registrations, two grants, two reads,
/// two verifications, one revocation and one owner amendment. Each call
/// seals one block.
pub fn scripted_session(fx: &mut Fixture) -> Vec<UseCaseResult> {
    let (mut office, mut dc) = (fx.office(), fx.dc());
    let (mut s1, mut s2) = (fx.student(1), fx.student(2));
    let (mut e1, mut e2) = (fx.employer(1), fx.employer(2));
    let d1 = record("Ana Ruiz", "9");
    let d2 = record("Bruno Gil", "7");
    vec![
        fx.register(&mut office, &mut s1, "dip-1", &d1),
        fx.register(&mut office, &mut s2, "dip-2", &d2),
        fx.grant(&mut s1, "dip-1", &e1, Permission::Verify),
        fx.grant(&mut s2, "dip-2", &e2, Permission::Read),
        fx.access(&mut s1, "dip-1"),
        fx.access(&mut e2, "dip-2"),
        fx.verify(&mut e1, "dip-1", d1.as_bytes()),
        fx.verify(&mut s2, "dip-2", record("Bruno Gil", "10").as_bytes()),
        fx.revoke(&mut s1, "dip-1", &e1.actor.clone(), Permission::Verify),
        fx.owner_change(&mut s2, Some(&mut dc), "dip-2", Some(&record("Bruno Gil Sanz", "7"))),
    ]
}
