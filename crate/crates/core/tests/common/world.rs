//! A chain where student-1 owns dip-1 and dip-2 and employer-1 holds READ
//! on dip-1, for token checks.

use certchain_core::chain_apps::{
    issue_token, validate_token, CapabilityToken, Payload, Permission, PolicyTx, SignedStatement,
    Statement, TokenRejection,
};
use certchain_core::codec::TokenId;
use certchain_core::ledger::{Chain, Transaction};

use super::*;

pub const TTL: u64 = 300;

pub struct World {
    pub chain: Chain,
    nonce: u64,
}

impl World {
    pub fn new() -> World {
        let mut w = World {
            chain: Chain::new(genesis()),
            nonce: 0,
        };
        let student = key([0x21; 32]);
        for id in ["dip-1", "dip-2"] {
            let consent = SignedStatement::sign(
                actor("student-1"),
                &student,
                None,
                Statement::RegisterConsent {
                    data_id: data(id),
                    registrar: actor("office-math"),
                },
            );
            w.submit(PolicyTx::RegisterOwner {
                data_id: data(id),
                registrar: actor("office-math"),
                consent,
            });
        }
        let consent = SignedStatement::sign(
            actor("student-1"),
            &student,
            None,
            Statement::GrantConsent {
                data_id: data("dip-1"),
                grantee: actor("employer-1"),
                permission: Permission::Read,
                expiry: None,
            },
        );
        w.submit(PolicyTx::Grant {
            data_id: data("dip-1"),
            grantee: actor("employer-1"),
            grantee_key: Some(key([0x61; 32]).verification_key()),
            permission: Permission::Read,
            expiry: None,
            granted_by: actor("student-1"),
            consent,
        });
        w
    }

    pub fn submit(&mut self, tx: PolicyTx) {
        self.nonce += 1;
        let tx = Transaction::new(&key(SERVICE_SEED), self.nonce, START, None, Payload::Policy(tx));
        let receipt = self.chain.submit_transaction(tx).unwrap();
        assert!(receipt.outcome.audit_seq.is_none(), "{:?}", receipt.outcome);
    }

    pub fn revoke(&mut self) {
        self.submit(PolicyTx::Revoke {
            data_id: data("dip-1"),
            grantee: actor("employer-1"),
            permission: Permission::Read,
            revoked_by: actor("student-1"),
        });
    }

    pub fn issue(&self, now: i64) -> CapabilityToken {
        let state = self.chain.state();
        issue_token(state, &actor("employer-1"), &data("dip-1"), Permission::Read, now, TTL, TokenId([3; 16])).unwrap()
    }

    pub fn check(&self, token: &CapabilityToken, data_id: &str, perm: Permission, now: i64) -> Result<(), TokenRejection> {
        validate_token(self.chain.state(), token, &data(data_id), perm, now)
    }
}
