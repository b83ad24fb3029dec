//! `certchain`: signs use-case requests with a local keystore and sends
//! them to a gateway node.
//!
//! Exit codes: 0 when the gateway grants the request, 3 when it denies it,
//! 1 on transport or gateway errors, 2 on usage errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use certchain_core::chain_apps::{AuditFilter, ChangeKind, Permission, Role, SignedStatement, Statement, UseCase};
use certchain_core::client::{call, RequestSigner, Transport};
use certchain_core::codec::{generate_keypair, sha256, to_canonical, CanonicalBytes, SaltedDigest, VerificationKey};
use certchain_core::gateway::{
    AccessParams, AccessResult, AuditParams, Candidate, ChangeAction, ChangeParams, GrantParams, KeyMode,
    RegisterParams, ResultOutcome, RevokeParams, UseCaseRequest, UseCaseResult, VerifyOutput, VerifyParams,
};
use certchain_core::ids::{ActorId, DataId};
use certchain_core::keystore::{Keystore, DEFAULT_KDF_ROUNDS};
use certchain_core::ledger::ValidationReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DENIED: i32 = 3;

/// Environment variable holding the keystore passphrase.
pub const PASSPHRASE_ENV: &str = "CERTCHAIN_PASSPHRASE";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Parser)]
#[command(name = "certchain", version, about = "Client for the credential ledger gateway")]
struct Cli {
    /// Base URL of the gateway node.
    #[arg(long, global = true, default_value = "http://127.0.0.1:8080")]
    gateway: String,
    /// Encrypted keystore of the acting user.
    #[arg(long, global = true)]
    keystore: Option<PathBuf>,
    /// Key mode; stored in the keystore once set.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<KeyMode>,
    #[arg(long, global = true, value_enum, default_value_t = Output::Text)]
    output: Output,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Text,
    /// The gateway's canonical JSON, unchanged.
    Canonical,
}

#[derive(Subcommand)]
enum Command {
    /// Creates a keystore.
    Keygen(KeygenArgs),
    /// Prints the identity held in a keystore.
    Whoami,
    /// Signs a consent or approval statement for someone else to submit.
    #[command(subcommand)]
    Consent(ConsentCommand),
    /// UC1: records a data item for an owner (registry staff).
    Register {
        #[arg(long)]
        data_id: DataId,
        #[arg(long)]
        owner: ActorId,
        /// Owner's signed registration consent.
        #[arg(long)]
        consent: PathBuf,
        /// Canonical JSON record, for example a `.cert` file.
        #[arg(long)]
        file: PathBuf,
    },
    /// UC2: grants a permission on a data item.
    Grant {
        #[arg(long)]
        data_id: DataId,
        #[arg(long)]
        grantee: ActorId,
        #[arg(long, value_parser = parse_permission)]
        permission: Permission,
        /// Enrolment key of a grantee the chain has not seen yet.
        #[arg(long, value_parser = parse_key)]
        grantee_key: Option<VerificationKey>,
        /// Unix time after which the grant lapses.
        #[arg(long)]
        expiry: Option<i64>,
        /// Owner consent when relaying for an owner; signed here otherwise.
        #[arg(long)]
        consent: Option<PathBuf>,
    },
    /// UC3: revokes a grant.
    Revoke {
        #[arg(long)]
        data_id: DataId,
        #[arg(long)]
        grantee: ActorId,
        #[arg(long, value_parser = parse_permission)]
        permission: Permission,
    },
    /// UC4: reads a data item.
    Access {
        #[arg(long)]
        data_id: DataId,
        /// Writes the record here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// UC5: checks a candidate against the anchored digest.
    Verify(VerifyArgs),
    /// UC6 for owners, UC7 for the controller and registry staff.
    Change(ChangeArgs),
    /// UC8: reads the audit log.
    Audit {
        #[arg(long)]
        data_id: Option<DataId>,
        #[arg(long)]
        actor: Option<ActorId>,
        #[arg(long)]
        from_seq: Option<u64>,
        #[arg(long)]
        to_seq: Option<u64>,
    },
    /// Asks the gateway to validate its chain.
    ChainValidate,
}

#[derive(Args)]
struct KeygenArgs {
    #[arg(long)]
    actor: ActorId,
    #[arg(long, value_parser = parse_role)]
    role: Role,
    /// Hex seed for a reproducible enrolment key.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, default_value_t = DEFAULT_KDF_ROUNDS)]
    kdf_rounds: u32,
    /// Replaces an existing keystore.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum ConsentCommand {
    /// Owner consent for a registrar to record a data item.
    Register {
        #[arg(long)]
        data_id: DataId,
        #[arg(long)]
        registrar: ActorId,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Owner consent for a grant, to be relayed by staff.
    Grant {
        #[arg(long)]
        data_id: DataId,
        #[arg(long)]
        grantee: ActorId,
        #[arg(long, value_parser = parse_permission)]
        permission: Permission,
        #[arg(long)]
        expiry: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Countersignature (from staff) or authorization (from the owner) for a change.
    Change {
        #[arg(long)]
        data_id: DataId,
        #[arg(long)]
        requester: ActorId,
        /// New content; approves an erasure when absent.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "candidate")]
struct CandidateArgs {
    /// Candidate record in canonical JSON.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Candidate salted digest as JSON.
    #[arg(long)]
    digest_file: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    data_id: DataId,
    #[command(flatten)]
    candidate: CandidateArgs,
}

#[derive(Args)]
struct ChangeArgs {
    #[arg(long)]
    data_id: DataId,
    /// Replacement content.
    #[arg(long, conflicts_with = "erase", required_unless_present = "erase")]
    file: Option<PathBuf>,
    #[arg(long)]
    erase: bool,
    /// Countersignature or owner authorization.
    #[arg(long)]
    approval: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<KeyMode, String> {
    match s {
        "static" => Ok(KeyMode::Static),
        "per-tx" | "key-per-transaction" => Ok(KeyMode::KeyPerTransaction),
        _ => Err(format!("unknown mode {s:?}; use static or per-tx")),
    }
}

fn parse_role(s: &str) -> Result<Role, String> {
    s.parse()
}

fn parse_permission(s: &str) -> Result<Permission, String> {
    s.parse()
}

fn parse_key(s: &str) -> Result<VerificationKey, String> {
    VerificationKey::from_hex(s).map_err(|e| e.to_string())
}

/// A failure that ends the command with an exit code.
struct Fail(i32, String);

impl Fail {
    fn usage(msg: impl Into<String>) -> Fail {
        Fail(EXIT_USAGE, msg.into())
    }

    fn error(msg: impl std::fmt::Display) -> Fail {
        Fail(EXIT_ERROR, msg.to_string())
    }
}

#[derive(Default)]
struct Out {
    stdout: String,
}

impl Out {
    fn line(&mut self, s: impl AsRef<str>) {
        self.stdout.push_str(s.as_ref());
        self.stdout.push('\n');
    }
}

#[derive(Deserialize)]
struct ErrorBody {
    error: ErrorDetail,
}

#[derive(Deserialize)]
struct ErrorDetail {
    code: String,
    message: String,
}

/// Blocking HTTP client for the gateway; keeps the last raw body so it
/// can be echoed verbatim.
struct Http {
    base: String,
    client: reqwest::blocking::Client,
    last_body: Vec<u8>,
}

impl Http {
    fn new(base: &str) -> Http {
        Http {
            base: base.trim_end_matches('/').to_string(),
            client: reqwest::blocking::Client::new(),
            last_body: Vec::new(),
        }
    }

    fn read(&mut self, resp: reqwest::Result<reqwest::blocking::Response>) -> Result<u16, String> {
        let resp = resp.map_err(|e| format!("cannot reach gateway: {e}"))?;
        let status = resp.status().as_u16();
        self.last_body = resp.bytes().map_err(|e| e.to_string())?.to_vec();
        Ok(status)
    }

    fn get(&mut self, path: &str) -> Result<u16, String> {
        let resp = self.client.get(format!("{}{path}", self.base)).send();
        self.read(resp)
    }
}

impl Transport for Http {
    fn invoke(&mut self, request: &UseCaseRequest) -> Result<UseCaseResult, String> {
        let body = request.to_canonical().map_err(|e| e.to_string())?.into_vec();
        let route = route_of(request.operation);
        let resp = if request.operation == UseCase::AuditLog {
            let body = String::from_utf8(body).expect("canonical bytes are UTF-8");
            self.client
                .get(format!("{}{route}", self.base))
                .query(&[("request", body)])
                .send()
        } else {
            self.client.post(format!("{}{route}", self.base)).body(body).send()
        };
        let status = self.read(resp)?;
        match status {
            200 | 403 => serde_json::from_slice(&self.last_body).map_err(|e| format!("bad gateway response: {e}")),
            _ => match serde_json::from_slice::<ErrorBody>(&self.last_body) {
                Ok(b) => Err(format!("{}: {}", b.error.code, b.error.message)),
                Err(_) => Err(format!("gateway answered HTTP {status}")),
            },
        }
    }
}

fn route_of(op: UseCase) -> &'static str {
    match op {
        UseCase::Register => "/uc/register",
        UseCase::Grant => "/uc/grant",
        UseCase::Revoke => "/uc/revoke",
        UseCase::Access => "/uc/access",
        UseCase::Verify => "/uc/verify",
        UseCase::OwnerChange => "/uc/owner-change",
        UseCase::ControllerChange => "/uc/controller-change",
        UseCase::AuditLog => "/uc/audit",
    }
}

fn now() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

/// An opened keystore that is written back after every use.
struct Wallet {
    path: PathBuf,
    passphrase: String,
    rounds: u32,
    keys: Keystore,
}

impl Wallet {
    fn open(path: Option<&Path>, passphrase: Option<&str>, mode: Option<KeyMode>) -> Result<Wallet, Fail> {
        let path = path.ok_or_else(|| Fail::usage("--keystore is required"))?;
        let passphrase = passphrase.ok_or_else(|| Fail::usage(format!("set {PASSPHRASE_ENV}")))?;
        let bytes = std::fs::read(path).map_err(|e| Fail::error(format!("{}: {e}", path.display())))?;
        let rounds = serde_json::from_slice::<serde_json::Value>(&bytes)
            .ok()
            .and_then(|v| v["rounds"].as_u64())
            .unwrap_or(DEFAULT_KDF_ROUNDS as u64) as u32;
        let mut keys = Keystore::from_encrypted(&bytes, passphrase).map_err(Fail::error)?;
        keys.set_time(now());
        let mut w = Wallet {
            path: path.to_path_buf(),
            passphrase: passphrase.to_string(),
            rounds,
            keys,
        };
        if let Some(m) = mode.filter(|m| *m != w.keys.mode) {
            w.keys.mode = m;
            w.save()?;
        }
        Ok(w)
    }

    fn save(&self) -> Result<(), Fail> {
        self.keys
            .save(&self.path, &self.passphrase, self.rounds)
            .map_err(Fail::error)
    }

    fn sign_statement(&mut self, s: Statement) -> Result<SignedStatement, Fail> {
        let signed = self.keys.sign_statement(s);
        self.save()?;
        Ok(signed)
    }

    fn invoke<P: Serialize>(&mut self, http: &mut Http, op: UseCase, params: &P) -> Result<UseCaseResult, String> {
        let params = serde_json::to_value(params).map_err(|e| e.to_string())?;
        let at = self.keys.request_time(now());
        let result = call(&mut self.keys, http, op, params, at);
        // The key has signed something even when the call failed.
        self.save().map_err(|Fail(_, m)| m)?;
        result
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, Fail> {
    std::fs::read(path).map_err(|e| Fail::error(format!("{}: {e}", path.display())))
}

fn read_canonical(path: &Path) -> Result<CanonicalBytes, Fail> {
    let raw = read_file(path)?;
    let trimmed = raw.strip_suffix(b"\n").unwrap_or(&raw);
    CanonicalBytes::parse(trimmed).map_err(|e| Fail::error(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Fail> {
    serde_json::from_slice(&read_file(path)?).map_err(|e| Fail::error(format!("{}: {e}", path.display())))
}

fn emit_statement(out: &mut Out, s: &SignedStatement, dest: Option<&Path>) -> Result<(), Fail> {
    let bytes = to_canonical(s).map_err(Fail::error)?;
    match dest {
        Some(p) => {
            let mut b = bytes.into_vec();
            b.push(b'\n');
            std::fs::write(p, b).map_err(|e| Fail::error(format!("{}: {e}", p.display())))?;
        }
        None => out.line(bytes.as_str()),
    }
    Ok(())
}

fn identity(ks: &Keystore) -> serde_json::Value {
    let mode = match ks.mode {
        KeyMode::Static => "static",
        KeyMode::KeyPerTransaction => "per-tx",
    };
    serde_json::json!({
        "actor": ks.actor,
        "key": ks.enrolment_key(),
        "mode": mode,
        "role": ks.role,
    })
}

fn print_identity(out: &mut Out, ks: &Keystore, output: Output) {
    let id = identity(ks);
    match output {
        Output::Canonical => out.line(to_canonical(&id).expect("identity is canonical").as_str()),
        Output::Text => {
            for k in ["actor", "role", "mode", "key"] {
                out.line(format!("{k}: {}", id[k].as_str().unwrap_or_default()));
            }
        }
    }
}

/// Prints a use-case result and maps it to an exit code.
fn report(out: &mut Out, http: &Http, result: Result<UseCaseResult, String>, output: Output, access_out: Option<&Path>) -> Result<i32, Fail> {
    let r = match result {
        Ok(r) => r,
        Err(msg) => {
            if output == Output::Canonical && !http.last_body.is_empty() {
                out.line(String::from_utf8_lossy(&http.last_body));
            }
            return Err(Fail::error(msg));
        }
    };
    if output == Output::Canonical {
        out.line(String::from_utf8_lossy(&http.last_body));
    }
    match r.outcome {
        ResultOutcome::Granted => {
            if output == Output::Text {
                match r.operation {
                    UseCase::Verify => {
                        let v: VerifyOutput = r.payload_as().map_err(Fail::error)?;
                        out.line(v.result.as_str());
                    }
                    UseCase::Access => {
                        let a: AccessResult = r.payload_as().map_err(Fail::error)?;
                        let bytes = hex::decode(&a.plaintext).map_err(Fail::error)?;
                        match access_out {
                            Some(p) => std::fs::write(p, &bytes).map_err(|e| Fail::error(format!("{}: {e}", p.display())))?,
                            None => out.line(String::from_utf8_lossy(&bytes)),
                        }
                    }
                    _ => {
                        out.line(format!("GRANTED (audit_seq {})", r.audit_seq));
                        out.line(to_canonical(&r.payload).map_err(Fail::error)?.as_str());
                    }
                }
            } else if let (UseCase::Access, Some(p)) = (r.operation, access_out) {
                let a: AccessResult = r.payload_as().map_err(Fail::error)?;
                std::fs::write(p, hex::decode(&a.plaintext).map_err(Fail::error)?)
                    .map_err(|e| Fail::error(format!("{}: {e}", p.display())))?;
            }
            Ok(EXIT_OK)
        }
        ResultOutcome::Denied => {
            if output == Output::Text {
                let reason = r.reason.as_deref().unwrap_or("unspecified");
                out.line(format!("DENIED {reason} (audit_seq {})", r.audit_seq));
                if let Some(m) = &r.message {
                    out.line(m);
                }
            }
            Ok(EXIT_DENIED)
        }
        ResultOutcome::Error => Err(Fail::error(format!(
            "{}: {}",
            r.reason.unwrap_or_default(),
            r.message.unwrap_or_default()
        ))),
    }
}

fn execute(cli: Cli, passphrase: Option<&str>, out: &mut Out) -> Result<i32, Fail> {
    let output = cli.output;
    let mut http = Http::new(&cli.gateway);
    let keystore = cli.keystore.as_deref();
    let open = |mode| Wallet::open(keystore, passphrase, mode);
    match cli.command {
        Command::Keygen(a) => {
            let path = keystore.ok_or_else(|| Fail::usage("--keystore is required"))?;
            let passphrase = passphrase.ok_or_else(|| Fail::usage(format!("set {PASSPHRASE_ENV}")))?;
            if path.exists() && !a.force {
                return Err(Fail::error(format!("{} exists; pass --force to replace it", path.display())));
            }
            let mode = cli.mode.unwrap_or_default();
            let ks = match a.seed {
                Some(h) => {
                    let seed = hex::decode(&h).map_err(|e| Fail::usage(format!("--seed: {e}")))?;
                    generate_keypair(Some(&seed)).map_err(|e| Fail::usage(format!("--seed: {e}")))?;
                    let seed: [u8; 32] = seed.try_into().expect("length checked");
                    Keystore::new(a.actor, a.role, mode, seed, now())
                }
                None => Keystore::generate(a.actor, a.role, mode, now()),
            };
            ks.save(path, passphrase, a.kdf_rounds).map_err(Fail::error)?;
            print_identity(out, &ks, output);
            Ok(EXIT_OK)
        }
        Command::Whoami => {
            let w = open(None)?;
            print_identity(out, &w.keys, output);
            Ok(EXIT_OK)
        }
        Command::Consent(c) => {
            let mut w = open(cli.mode)?;
            let (statement, dest) = match c {
                ConsentCommand::Register { data_id, registrar, out } => {
                    (Statement::RegisterConsent { data_id, registrar }, out)
                }
                ConsentCommand::Grant {
                    data_id,
                    grantee,
                    permission,
                    expiry,
                    out,
                } => (
                    Statement::GrantConsent {
                        data_id,
                        grantee,
                        permission,
                        expiry,
                    },
                    out,
                ),
                ConsentCommand::Change {
                    data_id,
                    requester,
                    file,
                    out,
                } => {
                    let (action, content_digest) = match file {
                        Some(f) => (ChangeKind::Modify, Some(sha256(&read_canonical(&f)?))),
                        None => (ChangeKind::Erase, None),
                    };
                    (
                        Statement::ChangeApproval {
                            data_id,
                            requester,
                            action,
                            content_digest,
                        },
                        out,
                    )
                }
            };
            let signed = w.sign_statement(statement)?;
            emit_statement(out, &signed, dest.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Register {
            data_id,
            owner,
            consent,
            file,
        } => {
            let consent: SignedStatement = read_json(&consent)?;
            let params = RegisterParams {
                data_id,
                owner,
                owner_consent: Some(consent),
                plaintext: hex::encode(read_canonical(&file)?.as_bytes()),
            };
            let mut w = open(cli.mode)?;
            let r = w.invoke(&mut http, UseCase::Register, &params);
            report(out, &http, r, output, None)
        }
        Command::Grant {
            data_id,
            grantee,
            permission,
            grantee_key,
            expiry,
            consent,
        } => {
            let mut w = open(cli.mode)?;
            let consent = match consent {
                Some(p) => read_json(&p)?,
                None => w.sign_statement(Statement::GrantConsent {
                    data_id: data_id.clone(),
                    grantee: grantee.clone(),
                    permission,
                    expiry,
                })?,
            };
            let params = GrantParams {
                data_id,
                grantee,
                grantee_key,
                permission,
                expiry,
                consent: Some(consent),
            };
            let r = w.invoke(&mut http, UseCase::Grant, &params);
            report(out, &http, r, output, None)
        }
        Command::Revoke {
            data_id,
            grantee,
            permission,
        } => {
            let mut w = open(cli.mode)?;
            let params = RevokeParams {
                data_id,
                grantee,
                permission,
            };
            let r = w.invoke(&mut http, UseCase::Revoke, &params);
            report(out, &http, r, output, None)
        }
        Command::Access { data_id, out: dest } => {
            let mut w = open(cli.mode)?;
            let r = w.invoke(&mut http, UseCase::Access, &AccessParams { data_id });
            report(out, &http, r, output, dest.as_deref())
        }
        Command::Verify(a) => {
            let candidate = match (a.candidate.file, a.candidate.digest_file) {
                (Some(f), _) => Candidate::Plaintext(hex::encode(read_canonical(&f)?.as_bytes())),
                (None, Some(d)) => Candidate::Digest(read_json::<SaltedDigest>(&d)?),
                (None, None) => unreachable!("clap requires one candidate"),
            };
            let mut w = open(cli.mode)?;
            let params = VerifyParams {
                data_id: a.data_id,
                candidate,
            };
            let r = w.invoke(&mut http, UseCase::Verify, &params);
            report(out, &http, r, output, None)
        }
        Command::Change(a) => {
            let mut w = open(cli.mode)?;
            let action = match &a.file {
                Some(f) => ChangeAction::Modify {
                    new_plaintext: hex::encode(read_canonical(f)?.as_bytes()),
                },
                None => ChangeAction::Erase,
            };
            let approval = a.approval.as_deref().map(read_json).transpose()?;
            let op = if w.keys.role == Role::DataOwner {
                UseCase::OwnerChange
            } else {
                UseCase::ControllerChange
            };
            let params = ChangeParams {
                data_id: a.data_id,
                action,
                approval,
            };
            let r = w.invoke(&mut http, op, &params);
            report(out, &http, r, output, None)
        }
        Command::Audit {
            data_id,
            actor,
            from_seq,
            to_seq,
        } => {
            let mut w = open(cli.mode)?;
            let params = AuditParams {
                filter: AuditFilter {
                    data_id,
                    actor,
                    from_seq,
                    to_seq,
                },
            };
            let r = w.invoke(&mut http, UseCase::AuditLog, &params);
            report(out, &http, r, output, None)
        }
        Command::ChainValidate => {
            let status = http.get("/chain/validate").map_err(Fail::error)?;
            if status != 200 {
                return Err(Fail::error(format!("gateway answered HTTP {status}")));
            }
            let report: ValidationReport = serde_json::from_slice(&http.last_body).map_err(Fail::error)?;
            match output {
                Output::Canonical => out.line(String::from_utf8_lossy(&http.last_body)),
                Output::Text => match &report {
                    ValidationReport::Ok { height } => out.line(format!("OK height {height}")),
                    ValidationReport::Invalid { first_bad_height, reason } => {
                        out.line(format!("INVALID at height {first_bad_height}: {reason}"))
                    }
                },
            }
            Ok(if report.is_ok() { EXIT_OK } else { EXIT_ERROR })
        }
    }
}

/// Runs one command with an explicit passphrase instead of reading the
/// environment.
pub fn run_command_with<I, T>(argv: I, passphrase: Option<&str>) -> CommandOutput
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            return if code == EXIT_OK {
                CommandOutput {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                CommandOutput {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    let mut out = Out::default();
    match execute(cli, passphrase, &mut out) {
        Ok(code) => CommandOutput {
            code,
            stdout: out.stdout,
            stderr: String::new(),
        },
        Err(Fail(code, msg)) => CommandOutput {
            code,
            stdout: out.stdout,
            stderr: format!("error: {msg}\n"),
        },
    }
}

/// Runs one command; the passphrase comes from `CERTCHAIN_PASSPHRASE`.
pub fn run_command<I, T>(argv: I) -> CommandOutput
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let passphrase = std::env::var(PASSPHRASE_ENV).ok();
    run_command_with(argv, passphrase.as_deref())
}
