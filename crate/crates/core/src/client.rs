//! Client-side plumbing shared by the command-line tool and the
//! certificate helpers: who signs a request and how it reaches a gateway.

use serde_json::Value as Json;

use crate::chain_apps::{Role, SignedStatement, Statement, UseCase};
use crate::codec::KeyPair;
use crate::gateway::{Gateway, UseCaseRequest, UseCaseResult};
use crate::ids::ActorId;

pub trait RequestSigner {
    fn actor(&self) -> &ActorId;
    fn role(&self) -> Role;
    fn sign_request(&mut self, operation: UseCase, parameters: Json, issued_at: i64) -> UseCaseRequest;
    fn sign_statement(&mut self, statement: Statement) -> SignedStatement;
    /// Lets the signer learn whether its key is now on-chain.
    fn observe(&mut self, _result: &UseCaseResult) {}
}

pub trait Transport {
    fn invoke(&mut self, request: &UseCaseRequest) -> Result<UseCaseResult, String>;
}

impl Transport for &Gateway {
    fn invoke(&mut self, request: &UseCaseRequest) -> Result<UseCaseResult, String> {
        Ok(self.handle(request))
    }
}

/// Signs every request with one fixed key.
#[derive(Debug, Clone)]
pub struct StaticSigner {
    pub actor: ActorId,
    pub role: Role,
    pub key: KeyPair,
}

impl StaticSigner {
    pub fn new(actor: ActorId, role: Role, key: KeyPair) -> StaticSigner {
        StaticSigner { actor, role, key }
    }
}

impl RequestSigner for StaticSigner {
    fn actor(&self) -> &ActorId {
        &self.actor
    }

    fn role(&self) -> Role {
        self.role
    }

    fn sign_request(&mut self, operation: UseCase, parameters: Json, issued_at: i64) -> UseCaseRequest {
        UseCaseRequest::sign(
            self.actor.clone(),
            self.role,
            operation,
            &parameters,
            issued_at,
            &self.key,
            None,
        )
        .expect("parameters are canonical")
    }

    fn sign_statement(&mut self, statement: Statement) -> SignedStatement {
        SignedStatement::sign(self.actor.clone(), &self.key, None, statement)
    }
}

/// Signs, sends and lets the signer observe the result.
pub fn call(
    signer: &mut dyn RequestSigner,
    transport: &mut dyn Transport,
    operation: UseCase,
    parameters: Json,
    issued_at: i64,
) -> Result<UseCaseResult, String> {
    let req = signer.sign_request(operation, parameters, issued_at);
    let result = transport.invoke(&req)?;
    signer.observe(&result);
    Ok(result)
}
