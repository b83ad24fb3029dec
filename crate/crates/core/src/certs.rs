//! Academic certificates on top of the generic use cases. The registry
//! offices are processors, the central university service is the
//! controller, students own their certificates and employers receive them.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as Json};

use crate::chain_apps::{ChangeKind, Role, Statement, UseCase, VerifyResult};
use crate::client::{call, RequestSigner, Transport};
use crate::codec::{sha256, to_canonical, CanonicalBytes};
use crate::gateway::{
    Candidate, ChangeAction, ChangeParams, ChangeResult, RegisterParams, RegisterResult,
    ResultOutcome, UseCaseResult, VerifyOutput, VerifyParams,
};
use crate::genesis::Genesis;
use crate::ids::{ActorId, DataId};

pub const CERT_EXTENSION: &str = "cert";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeRecord {
    pub course: String,
    pub grade: String,
    pub date: NaiveDate,
}

/// An optional field. Only declared extensions are part of the hashed
/// bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extension {
    pub value: String,
    pub declared: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub student_id: String,
    pub full_name: String,
    pub degree: String,
    pub institution: String,
    pub issue_date: NaiveDate,
    pub grade_records: Vec<GradeRecord>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extensions: BTreeMap<String, Extension>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CertError {
    #[error("invalid certificate: {0}")]
    Invalid(String),
    #[error("denied: {reason}")]
    Denied { reason: String, audit_seq: Option<u64> },
    #[error("gateway error: {0}")]
    Gateway(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("i/o: {0}")]
    Io(String),
}

const CORE_FIELDS: [&str; 7] = [
    "student_id",
    "full_name",
    "degree",
    "institution",
    "issue_date",
    "grade_records",
    "extensions",
];

/// Canonical bytes without validity checks. Verification uses this so a
/// malformed candidate still gets compared, and fails.
pub fn certificate_bytes(cert: &Certificate) -> CanonicalBytes {
    let mut map = Map::new();
    map.insert("student_id".into(), json!(cert.student_id));
    map.insert("full_name".into(), json!(cert.full_name));
    map.insert("degree".into(), json!(cert.degree));
    map.insert("institution".into(), json!(cert.institution));
    map.insert("issue_date".into(), json!(cert.issue_date.to_string()));
    let grades: Vec<Json> = cert
        .grade_records
        .iter()
        .map(|g| json!({"course": g.course, "grade": g.grade, "date": g.date.to_string()}))
        .collect();
    map.insert("grade_records".into(), Json::Array(grades));
    let declared: Map<String, Json> = cert
        .extensions
        .iter()
        .filter(|(_, e)| e.declared)
        .map(|(k, e)| (k.clone(), json!(e.value)))
        .collect();
    if !declared.is_empty() {
        map.insert("extensions".into(), Json::Object(declared));
    }
    to_canonical(&Json::Object(map)).expect("certificate fields are canonical")
}

/// The exact byte stream that is stored and hashed for a certificate.
pub fn canonicalize_certificate(cert: &Certificate, today: NaiveDate) -> Result<CanonicalBytes, CertError> {
    let required = [
        ("student_id", &cert.student_id),
        ("full_name", &cert.full_name),
        ("degree", &cert.degree),
        ("institution", &cert.institution),
    ];
    for (name, value) in required {
        if value.trim().is_empty() {
            return Err(CertError::Invalid(format!("{name} is empty")));
        }
    }
    if cert.issue_date > today {
        return Err(CertError::Invalid(format!(
            "issue_date {} is after {today}",
            cert.issue_date
        )));
    }
    for g in &cert.grade_records {
        if g.course.trim().is_empty() || g.grade.trim().is_empty() {
            return Err(CertError::Invalid("grade record with empty course or grade".into()));
        }
        if g.date > today {
            return Err(CertError::Invalid(format!("grade date {} is in the future", g.date)));
        }
    }
    if let Some(k) = cert.extensions.keys().find(|k| k.is_empty() || CORE_FIELDS.contains(&k.as_str())) {
        return Err(CertError::Invalid(format!("extension name {k:?} is reserved")));
    }
    Ok(certificate_bytes(cert))
}

/// Reads back a certificate from its canonical bytes. Extensions come back
/// declared.
pub fn parse_certificate(bytes: &[u8]) -> Result<Certificate, CertError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Wire {
        student_id: String,
        full_name: String,
        degree: String,
        institution: String,
        issue_date: NaiveDate,
        grade_records: Vec<GradeRecord>,
        #[serde(default)]
        extensions: BTreeMap<String, String>,
    }
    CanonicalBytes::parse(bytes).map_err(|e| CertError::Invalid(e.to_string()))?;
    let w: Wire = serde_json::from_slice(bytes).map_err(|e| CertError::Invalid(e.to_string()))?;
    Ok(Certificate {
        student_id: w.student_id,
        full_name: w.full_name,
        degree: w.degree,
        institution: w.institution,
        issue_date: w.issue_date,
        grade_records: w.grade_records,
        extensions: w
            .extensions
            .into_iter()
            .map(|(k, value)| (k, Extension { value, declared: true }))
            .collect(),
    })
}

pub fn write_cert_file(path: impl AsRef<Path>, bytes: &CanonicalBytes) -> Result<(), CertError> {
    std::fs::write(path, bytes.as_bytes()).map_err(|e| CertError::Io(e.to_string()))
}

pub fn read_cert_file(path: impl AsRef<Path>) -> Result<CanonicalBytes, CertError> {
    let bytes = std::fs::read(path).map_err(|e| CertError::Io(e.to_string()))?;
    CanonicalBytes::parse(&bytes).map_err(|e| CertError::Invalid(e.to_string()))
}

/// Who plays which role in the certificate deployment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleMap {
    pub dc: ActorId,
    pub dps: Vec<ActorId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authority: Option<ActorId>,
}

impl RoleMap {
    pub fn new(dc: ActorId, dps: Vec<ActorId>, authority: Option<ActorId>) -> Result<RoleMap, CertError> {
        if dps.contains(&dc) {
            return Err(CertError::Invalid("the controller cannot also be a registry office".into()));
        }
        Ok(RoleMap { dc, dps, authority })
    }

    pub fn from_genesis(genesis: &Genesis) -> RoleMap {
        RoleMap {
            dc: genesis.controller.id.clone(),
            dps: genesis.processors.iter().map(|p| p.id.clone()).collect(),
            authority: genesis.authority.as_ref().map(|a| a.id.clone()),
        }
    }

    pub fn is_office(&self, actor: &ActorId) -> bool {
        self.dps.contains(actor)
    }
}

fn expect_granted(result: UseCaseResult) -> Result<UseCaseResult, CertError> {
    match result.outcome {
        ResultOutcome::Granted => Ok(result),
        ResultOutcome::Denied => Err(CertError::Denied {
            reason: result.reason.unwrap_or_default(),
            audit_seq: Some(result.audit_seq),
        }),
        ResultOutcome::Error => Err(CertError::Gateway(
            result.message.or(result.reason).unwrap_or_default(),
        )),
    }
}

/// Consent a student signs before a registry office records a certificate.
pub fn registration_consent(data_id: &DataId, office: &ActorId) -> Statement {
    Statement::RegisterConsent {
        data_id: data_id.clone(),
        registrar: office.clone(),
    }
}

/// Registers a certificate through a registry office.
#[allow(clippy::too_many_arguments)]
pub fn issue_certificate(
    roles: &RoleMap,
    office: &mut dyn RequestSigner,
    transport: &mut dyn Transport,
    cert: &Certificate,
    data_id: &DataId,
    owner: &ActorId,
    consent: crate::chain_apps::SignedStatement,
    today: NaiveDate,
    now: i64,
) -> Result<RegisterResult, CertError> {
    if !roles.is_office(office.actor()) || office.role() != Role::Processor {
        return Err(CertError::Denied {
            reason: "role".into(),
            audit_seq: None,
        });
    }
    let bytes = canonicalize_certificate(cert, today)?;
    let params = RegisterParams {
        data_id: data_id.clone(),
        owner: owner.clone(),
        owner_consent: Some(consent),
        plaintext: hex::encode(bytes.as_bytes()),
    };
    let result = call(
        office,
        transport,
        UseCase::Register,
        serde_json::to_value(params).expect("params serialize"),
        now,
    )
    .map_err(CertError::Transport)?;
    expect_granted(result)?
        .payload_as()
        .map_err(CertError::Gateway)
}

/// Checks a presented certificate against the anchor of `data_id`.
pub fn verify_certificate(
    verifier: &mut dyn RequestSigner,
    transport: &mut dyn Transport,
    data_id: &DataId,
    candidate: &Certificate,
    now: i64,
) -> Result<VerifyResult, CertError> {
    let params = VerifyParams {
        data_id: data_id.clone(),
        candidate: Candidate::Plaintext(hex::encode(certificate_bytes(candidate).as_bytes())),
    };
    let result = call(
        verifier,
        transport,
        UseCase::Verify,
        serde_json::to_value(params).expect("params serialize"),
        now,
    )
    .map_err(CertError::Transport)?;
    let out: VerifyOutput = expect_granted(result)?
        .payload_as()
        .map_err(CertError::Gateway)?;
    Ok(out.result)
}

/// Owner authorization for the controller or an office to replace a
/// certificate with `amended`.
pub fn amendment_approval(data_id: &DataId, requester: &ActorId, amended: &CanonicalBytes) -> Statement {
    Statement::ChangeApproval {
        data_id: data_id.clone(),
        requester: requester.clone(),
        action: ChangeKind::Modify,
        content_digest: Some(sha256(amended)),
    }
}

/// Replaces a certificate on behalf of the controller or an office, with
/// the student's authorization.
#[allow(clippy::too_many_arguments)]
pub fn amend_certificate(
    staff: &mut dyn RequestSigner,
    transport: &mut dyn Transport,
    data_id: &DataId,
    amended: &Certificate,
    approval: crate::chain_apps::SignedStatement,
    today: NaiveDate,
    now: i64,
) -> Result<ChangeResult, CertError> {
    let bytes = canonicalize_certificate(amended, today)?;
    let params = ChangeParams {
        data_id: data_id.clone(),
        action: ChangeAction::Modify {
            new_plaintext: hex::encode(bytes.as_bytes()),
        },
        approval: Some(approval),
    };
    let result = call(
        staff,
        transport,
        UseCase::ControllerChange,
        serde_json::to_value(params).expect("params serialize"),
        now,
    )
    .map_err(CertError::Transport)?;
    expect_granted(result)?
        .payload_as()
        .map_err(CertError::Gateway)
}
