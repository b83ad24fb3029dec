//! Randomized use-case sessions over a fixed cast.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use certchain_core::chain_apps::{Permission, UseCase};
use certchain_core::codec::{salted_hash, CanonicalBytes, Salt};
use certchain_core::gateway::{KeyMode, RegisterResult, UseCaseResult};
use certchain_core::keystore::Keystore;

use super::{record, Fixture, Options};

const STAFF: [usize; 3] = [0, 1, 2];
const STUDENTS: [usize; 3] = [4, 5, 6];
const EMPLOYERS: [usize; 3] = [7, 8, 9];
const DATA_IDS: [&str; 4] = ["dip-0", "dip-1", "dip-2", "dip-3"];
const PERMISSIONS: [Permission; 4] = [
    Permission::Read,
    Permission::Verify,
    Permission::Modify,
    Permission::Delete,
];

pub struct Session {
    pub fx: Fixture,
    pub ops: Vec<UseCase>,
    pub results: Vec<UseCaseResult>,
}

fn cast(fx: &Fixture) -> Vec<Keystore> {
    let mut v = vec![fx.dc(), fx.office(), fx.office_law(), fx.authority()];
    v.extend((1..=3).map(|n| fx.student(n)));
    v.extend((1..=3).map(|n| fx.employer(n)));
    v
}

fn pair(v: &mut [Keystore], i: usize, j: usize) -> (&mut Keystore, &mut Keystore) {
    assert_ne!(i, j);
    if i < j {
        let (a, b) = v.split_at_mut(j);
        (&mut a[i], &mut b[0])
    } else {
        let (a, b) = v.split_at_mut(i);
        (&mut b[0], &mut a[j])
    }
}

/// Mostly plausible requests with a share of wrong actors, missing
/// consents and tampered candidates, so outcomes are mixed.
pub fn random_session(seed: u64, steps: usize) -> Session {
    random_session_hooked(seed, steps, |_| {})
}

/// As `random_session`, running `setup` on the fixture before the first call.
pub fn random_session_hooked(seed: u64, steps: usize, setup: impl FnOnce(&mut Fixture)) -> Session {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key_mode = if seed % 4 == 3 {
        KeyMode::KeyPerTransaction
    } else {
        KeyMode::Static
    };
    let mut fx = Fixture::with(Options {
        key_mode,
        persist: true,
        seed,
    });
    setup(&mut fx);
    let mut who = cast(&fx);
    let mut current: BTreeMap<&str, CanonicalBytes> = BTreeMap::new();
    let mut ops = Vec::with_capacity(steps);
    let mut results = Vec::with_capacity(steps);

    for step in 0..steps {
        if rng.gen_bool(0.1) {
            fx.clock.advance(rng.gen_range(10..40));
        }
        let op = if step < 2 {
            UseCase::Register
        } else {
            *UseCase::ALL.choose(&mut rng).unwrap()
        };
        let id = *DATA_IDS.choose(&mut rng).unwrap();
        let student = *STUDENTS.choose(&mut rng).unwrap();
        let staff = *STAFF.choose(&mut rng).unwrap();
        let anyone = rng.gen_range(0..who.len());
        let bytes = record(&format!("holder {seed} {step}"), &rng.gen_range(0..11).to_string());

        let r = match op {
            UseCase::Register => {
                let registrar = if rng.gen_bool(0.85) { staff } else { *EMPLOYERS.choose(&mut rng).unwrap() };
                let (office, owner) = pair(&mut who, registrar, student);
                let r = if rng.gen_bool(0.9) {
                    fx.register(office, owner, id, &bytes)
                } else {
                    let params = certchain_core::gateway::RegisterParams {
                        data_id: super::data(id),
                        owner: owner.actor.clone(),
                        owner_consent: None,
                        plaintext: hex::encode(bytes.as_bytes()),
                    };
                    fx.call(office, UseCase::Register, &params)
                };
                if r.is_granted() {
                    let _: RegisterResult = r.payload_as().unwrap();
                    current.insert(id, bytes.clone());
                }
                r
            }
            UseCase::Grant => {
                let grantee = who[*EMPLOYERS.choose(&mut rng).unwrap()].clone();
                let perm = *PERMISSIONS.choose(&mut rng).unwrap();
                if rng.gen_bool(0.2) {
                    let until = fx.clock.advance(0) + rng.gen_range(1..30);
                    fx.grant_until(&mut who[student], id, &grantee, perm, until)
                } else if rng.gen_bool(0.2) {
                    let (relay, owner) = pair(&mut who, staff, student);
                    fx.grant_via(relay, owner, id, &grantee, perm)
                } else {
                    fx.grant(&mut who[student], id, &grantee, perm)
                }
            }
            UseCase::Revoke => {
                let grantee = who[*EMPLOYERS.choose(&mut rng).unwrap()].actor.clone();
                let perm = *PERMISSIONS.choose(&mut rng).unwrap();
                let requester = if rng.gen_bool(0.7) { student } else { anyone };
                fx.revoke(&mut who[requester], id, &grantee, perm)
            }
            UseCase::Access => fx.access(&mut who[anyone], id),
            UseCase::Verify => {
                let candidate = match current.get(id) {
                    Some(b) if rng.gen_bool(0.7) => b.clone(),
                    _ => bytes.clone(),
                };
                if rng.gen_bool(0.15) {
                    let d = salted_hash(&Salt::from_bytes(rng.gen()), candidate.as_bytes());
                    fx.verify_digest(&mut who[anyone], id, d)
                } else {
                    fx.verify(&mut who[anyone], id, candidate.as_bytes())
                }
            }
            UseCase::OwnerChange => {
                let new = rng.gen_bool(0.6).then_some(&bytes);
                let (owner, counter) = pair(&mut who, student, staff);
                let counter = rng.gen_bool(0.8).then_some(counter);
                let r = fx.owner_change(owner, counter, id, new);
                if r.is_granted() {
                    match new {
                        Some(b) => current.insert(id, b.clone()),
                        None => current.remove(id),
                    };
                }
                r
            }
            UseCase::ControllerChange => {
                let new = rng.gen_bool(0.6).then_some(&bytes);
                let requester = if rng.gen_bool(0.85) { staff } else { *EMPLOYERS.choose(&mut rng).unwrap() };
                let (requester, owner) = pair(&mut who, requester, student);
                let owner = rng.gen_bool(0.7).then_some(owner);
                let r = fx.controller_change(requester, owner, id, new);
                if r.is_granted() {
                    match new {
                        Some(b) => current.insert(id, b.clone()),
                        None => current.remove(id),
                    };
                }
                r
            }
            UseCase::AuditLog => {
                let requester = if rng.gen_bool(0.5) { student } else { anyone };
                let filter = rng.gen_bool(0.7).then_some(id);
                fx.audit(&mut who[requester], filter)
            }
        };
        ops.push(op);
        results.push(r);
    }
    Session { fx, ops, results }
}
