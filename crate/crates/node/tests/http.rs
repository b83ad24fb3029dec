use std::path::Path;
use std::sync::Arc;

use reqwest::StatusCode;
use serde::Serialize;

use certchain_core::chain_apps::{AuditFilter, Role, Statement, UseCase, VerifyResult};
use certchain_core::client::RequestSigner;
use certchain_core::clock::ManualClock;
use certchain_core::codec::{generate_keypair, to_canonical, CanonicalBytes, VerificationKey};
use certchain_core::gateway::{
    AuditParams, AuditResult, Candidate, Gateway, GatewayConfig, KeyMode, RegisterParams, ResultOutcome,
    UseCaseRequest, UseCaseResult, VerifyOutput, VerifyParams,
};
use certchain_core::ids::{ActorId, DataId};
use certchain_core::keystore::Keystore;
use certchain_core::ledger::{validate_chain, Block, ValidationReport};
use certchain_node::{route_of, ErrorBody};

const START: i64 = 1_700_000_000;

fn vk(seed: u8) -> VerificationKey {
    generate_keypair(Some(&[seed; 32])).unwrap().verification_key()
}

fn seed_hex(seed: u8) -> String {
    hex::encode([seed; 32])
}

/// Writes a configuration with relative paths, as an operator would.
fn write_config(dir: &Path) -> std::path::PathBuf {
    let text = format!(
        r#"listen = "127.0.0.1:0"
chain_file = "chain.jsonl"
token_ttl = 300
validator_seeds = ["{v0}", "{v1}"]

[service]
actor = "gateway"
seed = "{service}"

[store]
store_id = "registry"
key_file = "keys/store.key"
data_dir = "records"

[genesis]
token_secret = "{secret}"
controller = {{ id = "seciu", key = "{dc}" }}
processors = [{{ id = "office-math", key = "{office}" }}]
authority = {{ id = "aepd", key = "{aepd}" }}
"#,
        v0 = seed_hex(0x10),
        v1 = seed_hex(0x11),
        service = seed_hex(9),
        secret = seed_hex(0x42),
        dc = vk(1).to_hex(),
        office = vk(2).to_hex(),
        aepd = vk(4).to_hex(),
    );
    let path = dir.join("gateway.toml");
    std::fs::write(&path, text).unwrap();
    path
}

struct Node {
    url: String,
    http: reqwest::Client,
    clock: Arc<ManualClock>,
    gateway: Arc<Gateway>,
    _stop: tokio::sync::oneshot::Sender<()>,
}

async fn start(dir: &Path) -> Node {
    let config = GatewayConfig::load(write_config(dir)).unwrap();
    let clock = Arc::new(ManualClock::new(START));
    let gateway = Arc::new(config.build(clock.clone()).unwrap());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    tokio::spawn(certchain_node::serve(listener, gateway.clone(), async {
        let _ = rx.await;
    }));
    Node {
        url,
        http: reqwest::Client::new(),
        clock,
        gateway,
        _stop: tx,
    }
}

fn office() -> Keystore {
    Keystore::new(ActorId::new("office-math").unwrap(), Role::Processor, KeyMode::Static, [2; 32], START)
}

fn student() -> Keystore {
    Keystore::new(ActorId::new("student-1").unwrap(), Role::DataOwner, KeyMode::Static, [0x21; 32], START)
}

fn employer() -> Keystore {
    Keystore::new(ActorId::new("employer-1").unwrap(), Role::Recipient, KeyMode::Static, [0x61; 32], START)
}

fn dip() -> DataId {
    DataId::new("dip-1").unwrap()
}

const RECORD: &[u8] = br#"{"grade":"9","name":"Ana"}"#;

fn signed<P: Serialize>(who: &mut Keystore, op: UseCase, params: &P, at: i64) -> UseCaseRequest {
    who.sign_request(op, serde_json::to_value(params).unwrap(), at)
}

impl Node {
    async fn post(&self, path: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
        let r = self.http.post(format!("{}{path}", self.url)).body(body).send().await.unwrap();
        (r.status(), r.bytes().await.unwrap().to_vec())
    }

    async fn get(&self, path_and_query: &str) -> (StatusCode, Vec<u8>) {
        let r = self.http.get(format!("{}{path_and_query}", self.url)).send().await.unwrap();
        (r.status(), r.bytes().await.unwrap().to_vec())
    }

    async fn invoke(&self, req: &UseCaseRequest) -> (StatusCode, Vec<u8>) {
        let body = req.to_canonical().unwrap().into_vec();
        if req.operation == UseCase::AuditLog {
            let q = url_encode(std::str::from_utf8(&body).unwrap());
            self.get(&format!("/uc/audit?request={q}")).await
        } else {
            self.post(route_of(req.operation), body).await
        }
    }

    async fn register(&self) -> (StatusCode, Vec<u8>) {
        let (mut o, mut s) = (office(), student());
        let consent = s.sign_statement(Statement::RegisterConsent {
            data_id: dip(),
            registrar: o.actor().clone(),
        });
        let params = RegisterParams {
            data_id: dip(),
            owner: s.actor().clone(),
            owner_consent: Some(consent),
            plaintext: hex::encode(RECORD),
        };
        self.invoke(&signed(&mut o, UseCase::Register, &params, self.clock.advance(1))).await
    }
}

fn url_encode(s: &str) -> String {
    let mut out = String::new();
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || b"-._~".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn result(body: &[u8]) -> UseCaseResult {
    let r: UseCaseResult = serde_json::from_slice(body).unwrap();
    // Responses are already canonical.
    assert_eq!(to_canonical(&r).unwrap().as_bytes(), body);
    r
}

fn error(body: &[u8]) -> ErrorBody {
    assert!(CanonicalBytes::parse(body).is_ok(), "{}", String::from_utf8_lossy(body));
    serde_json::from_slice(body).unwrap()
}

#[tokio::test]
async fn granted_and_denied_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let node = start(dir.path()).await;
    let (status, body) = node.register().await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    assert_eq!(result(&body).outcome, ResultOutcome::Granted);

    let verify = VerifyParams {
        data_id: dip(),
        candidate: Candidate::Plaintext(hex::encode(RECORD)),
    };
    let (status, body) = node
        .invoke(&signed(&mut student(), UseCase::Verify, &verify, node.clock.advance(1)))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(result(&body).payload_as::<VerifyOutput>().unwrap().result, VerifyResult::Valid);

    // The employer holds no grant and is not known on chain.
    let (status, body) = node
        .invoke(&signed(&mut employer(), UseCase::Verify, &verify, node.clock.advance(1)))
        .await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let denied = result(&body);
    assert_eq!(denied.outcome, ResultOutcome::Denied);
    assert!(denied.reason.is_some());
    assert_eq!(denied.audit_seq as usize, node.gateway.state().audit.len());
}

#[tokio::test]
async fn audit_log_is_served_over_get() {
    let dir = tempfile::tempdir().unwrap();
    let node = start(dir.path()).await;
    node.register().await;
    // A student may read the log of their own record, not the whole log.
    let all = AuditParams::default();
    let req = signed(&mut student(), UseCase::AuditLog, &all, node.clock.advance(1));
    assert_eq!(node.invoke(&req).await.0, StatusCode::FORBIDDEN);
    let own = AuditParams {
        filter: AuditFilter {
            data_id: Some(dip()),
            ..AuditFilter::default()
        },
    };
    let req = signed(&mut student(), UseCase::AuditLog, &own, node.clock.advance(1));
    let (status, body) = node.invoke(&req).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let entries = result(&body).payload_as::<AuditResult>().unwrap().entries;
    assert!(!entries.is_empty());
    assert!(entries.iter().all(|e| e.data_id.as_ref() == Some(&dip())), "{entries:?}");

    // POST is not accepted for the log.
    let (status, _) = node.post("/uc/audit", req.to_canonical().unwrap().into_vec()).await;
    assert_eq!(status, StatusCode::METHOD_NOT_ALLOWED);
    let (status, body) = node.get("/uc/audit").await;
    assert_eq!((status, error(&body).error.code.as_str()), (StatusCode::BAD_REQUEST, "invalid_request"));
}

#[tokio::test]
async fn malformed_requests_get_an_error_body() {
    let dir = tempfile::tempdir().unwrap();
    let node = start(dir.path()).await;

    let (status, body) = node.post("/uc/register", b"not json".to_vec()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error(&body).error.code, "invalid_request");

    // Valid JSON but not in canonical form.
    let req = signed(&mut student(), UseCase::Verify, &AuditParams::default(), START);
    let pretty = serde_json::to_vec_pretty(&req).unwrap();
    let (status, _) = node.post("/uc/verify", pretty).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // A request sent to another use case's endpoint.
    let (status, body) = node.post("/uc/grant", req.to_canonical().unwrap().into_vec()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(error(&body).error.message.contains("/uc/grant"));
    assert_eq!(node.gateway.height(), 0, "nothing reached the chain");

    // Well-formed envelope with unusable parameters is audited.
    let bad = serde_json::json!({"data_id": "dip-1", "candidate": {"plaintext": "zz"}});
    let req = signed(&mut office(), UseCase::Verify, &bad, node.clock.advance(1));
    let (status, body) = node.invoke(&req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{}", String::from_utf8_lossy(&body));
    assert_eq!(error(&body).error.audit_seq, Some(1));

    let (status, body) = node.get("/nowhere").await;
    assert_eq!((status, error(&body).error.code.as_str()), (StatusCode::NOT_FOUND, "not_found"));
}

#[tokio::test]
async fn chain_inspection_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let node = start(dir.path()).await;
    node.register().await;
    let verify = VerifyParams {
        data_id: dip(),
        candidate: Candidate::Plaintext(hex::encode(b"forged")),
    };
    node.invoke(&signed(&mut student(), UseCase::Verify, &verify, node.clock.advance(1)))
        .await;

    let (status, body) = node.get("/chain/validate").await;
    assert_eq!(status, StatusCode::OK);
    let report: ValidationReport = serde_json::from_slice(&body).unwrap();
    assert_eq!(report, ValidationReport::Ok { height: 2 });

    let (_, body) = node.get("/chain/blocks").await;
    assert!(CanonicalBytes::parse(&body).is_ok());
    let blocks: Vec<Block> = serde_json::from_slice(&body).unwrap();
    assert_eq!(blocks, node.gateway.blocks());
    assert!(validate_chain(&node.gateway.genesis(), &blocks).is_ok());

    let (_, body) = node.get("/chain/blocks?from=1&limit=5").await;
    let tail: Vec<Block> = serde_json::from_slice(&body).unwrap();
    assert_eq!(tail, blocks[1..]);
    let (status, _) = node.get("/chain/blocks?from=x").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn restarted_node_keeps_its_chain_and_records() {
    let dir = tempfile::tempdir().unwrap();
    {
        let node = start(dir.path()).await;
        assert_eq!(node.register().await.0, StatusCode::OK);
    }
    assert!(dir.path().join("chain.jsonl").exists());
    assert!(dir.path().join("keys/store.key").exists());
    let node = start(dir.path()).await;
    assert_eq!(node.gateway.height(), 1);
    node.clock.advance(10);
    let verify = VerifyParams {
        data_id: dip(),
        candidate: Candidate::Plaintext(hex::encode(RECORD)),
    };
    let (status, body) = node
        .invoke(&signed(&mut student(), UseCase::Verify, &verify, node.clock.advance(1)))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(result(&body).payload_as::<VerifyOutput>().unwrap().result, VerifyResult::Valid);
}

#[test]
fn background_node_serves_and_stops() {
    let dir = tempfile::tempdir().unwrap();
    let config = GatewayConfig::load(write_config(dir.path())).unwrap();
    let gateway = Arc::new(config.build(Arc::new(ManualClock::new(START))).unwrap());
    let node = certchain_node::BackgroundNode::start(gateway, "127.0.0.1:0".parse().unwrap()).unwrap();
    let addr = node.addr();
    assert!(std::net::TcpStream::connect(addr).is_ok());
    drop(node);
    assert!(std::net::TcpStream::connect(addr).is_err());
}
