mod common;

use std::collections::BTreeMap;

use chrono::NaiveDate;

use certchain_core::certs::{
    amend_certificate, amendment_approval, canonicalize_certificate, certificate_bytes, issue_certificate,
    parse_certificate, read_cert_file, registration_consent, verify_certificate, write_cert_file, CertError,
    Certificate, Extension, GradeRecord, RoleMap,
};
use certchain_core::chain_apps::{Permission, VerifyResult};
use certchain_core::client::RequestSigner;
use certchain_core::keystore::Keystore;
use common::*;

fn day(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

fn today() -> NaiveDate {
    day("2024-01-01")
}

fn cert() -> Certificate {
    Certificate {
        student_id: "S-77".into(),
        full_name: "Marta Gil".into(),
        degree: "Grado en Derecho".into(),
        institution: "Universidad de Murcia".into(),
        issue_date: day("2023-07-10"),
        grade_records: vec![
            GradeRecord {
                course: "Derecho Civil I".into(),
                grade: "8.5".into(),
                date: day("2021-06-20"),
            },
            GradeRecord {
                course: "Derecho Penal".into(),
                grade: "7".into(),
                date: day("2022-06-18"),
            },
        ],
        extensions: BTreeMap::new(),
    }
}

fn issue(fx: &mut Fixture, office: &mut Keystore, owner: &mut Keystore, id: &str, c: &Certificate) -> Result<(), CertError> {
    let roles = RoleMap::from_genesis(&fx.genesis);
    let id = data(id);
    let consent = owner.sign_statement(registration_consent(&id, office.actor()));
    let now = fx.clock.advance(1);
    let mut gw = &fx.gateway;
    issue_certificate(&roles, office, &mut gw, c, &id, &owner.actor.clone(), consent, today(), now).map(|_| ())
}

fn verify(fx: &Fixture, who: &mut Keystore, id: &str, c: &Certificate) -> Result<VerifyResult, CertError> {
    let now = fx.clock.advance(1);
    let mut gw = &fx.gateway;
    verify_certificate(who, &mut gw, &data(id), c, now)
}

#[test]
fn issued_certificate_verifies_for_its_owner() {
    let mut fx = Fixture::new();
    let (mut office, mut s1) = (fx.office(), fx.student(1));
    issue(&mut fx, &mut office, &mut s1, "cert-1", &cert()).unwrap();
    assert_eq!(verify(&fx, &mut s1, "cert-1", &cert()), Ok(VerifyResult::Valid));
    let mut forged = cert();
    forged.grade_records[1].grade = "9".into();
    assert_eq!(verify(&fx, &mut s1, "cert-1", &forged), Ok(VerifyResult::Invalid));
}

#[test]
fn only_registry_offices_issue() {
    let mut fx = Fixture::new();
    let mut s1 = fx.student(1);
    for mut who in [fx.dc(), fx.authority(), fx.employer(1)] {
        let r = issue(&mut fx, &mut who, &mut s1, "cert-1", &cert());
        assert!(matches!(r, Err(CertError::Denied { ref reason, audit_seq: None }) if reason == "role"), "{r:?}");
    }
    assert_eq!(fx.gateway.height(), 0, "local refusals never reach the gateway");
}

#[test]
fn invalid_certificates_are_refused_before_submission() {
    let mut fx = Fixture::new();
    let (mut office, mut s1) = (fx.office(), fx.student(1));
    let mut c = cert();
    c.issue_date = day("2030-01-01");
    assert!(matches!(issue(&mut fx, &mut office, &mut s1, "cert-1", &c), Err(CertError::Invalid(_))));
    let mut c = cert();
    c.full_name = "  ".into();
    assert!(matches!(issue(&mut fx, &mut office, &mut s1, "cert-1", &c), Err(CertError::Invalid(_))));
    let mut c = cert();
    c.extensions.insert("degree".into(), Extension { value: "x".into(), declared: true });
    assert!(matches!(issue(&mut fx, &mut office, &mut s1, "cert-1", &c), Err(CertError::Invalid(_))));
    assert_eq!(fx.gateway.height(), 0);
}

#[test]
fn controller_amends_with_student_approval() {
    let mut fx = Fixture::new();
    let (mut office, mut s1, mut dc, mut e1) = (fx.office(), fx.student(1), fx.dc(), fx.employer(1));
    issue(&mut fx, &mut office, &mut s1, "cert-1", &cert()).unwrap();
    assert!(fx.grant(&mut s1, "cert-1", &e1, Permission::Verify).is_granted());

    let mut amended = cert();
    amended.full_name = "Marta Gil Ortuño".into();
    let bytes = canonicalize_certificate(&amended, today()).unwrap();
    let id = data("cert-1");

    // Approval for different content does not cover this amendment.
    let wrong = s1.sign_statement(amendment_approval(&id, dc.actor(), &certificate_bytes(&cert())));
    let now = fx.clock.advance(1);
    let mut gw = &fx.gateway;
    let r = amend_certificate(&mut dc, &mut gw, &id, &amended, wrong, today(), now);
    assert!(matches!(r, Err(CertError::Denied { .. })), "{r:?}");

    let approval = s1.sign_statement(amendment_approval(&id, dc.actor(), &bytes));
    let now = fx.clock.advance(1);
    let changed = amend_certificate(&mut dc, &mut gw, &id, &amended, approval, today(), now).unwrap();
    assert_eq!(changed.version, Some(2));

    assert_eq!(verify(&fx, &mut e1, "cert-1", &cert()), Ok(VerifyResult::Invalid));
    assert_eq!(verify(&fx, &mut e1, "cert-1", &amended), Ok(VerifyResult::Valid));
    assert!(fx.gateway.validate().is_ok());
}

#[test]
fn bytes_ignore_field_order_but_not_grade_order() {
    let c = cert();
    let json = serde_json::to_value(&c).unwrap();
    let mut reversed = serde_json::Map::new();
    for (k, v) in json.as_object().unwrap().iter().rev() {
        reversed.insert(k.clone(), v.clone());
    }
    let back: Certificate = serde_json::from_value(serde_json::Value::Object(reversed)).unwrap();
    assert_eq!(certificate_bytes(&back), certificate_bytes(&c));

    let mut swapped = c.clone();
    swapped.grade_records.swap(0, 1);
    assert_ne!(certificate_bytes(&swapped), certificate_bytes(&c));
}

#[test]
fn cert_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cert();
    c.extensions.insert("honours".into(), Extension { value: "cum laude".into(), declared: true });
    let bytes = canonicalize_certificate(&c, today()).unwrap();
    let path = dir.path().join("marta.cert");
    write_cert_file(&path, &bytes).unwrap();
    let read = read_cert_file(&path).unwrap();
    assert_eq!(read, bytes);
    assert_eq!(parse_certificate(read.as_bytes()).unwrap(), c);

    std::fs::write(&path, b"{\"b\":1,\"a\":2}").unwrap();
    assert!(read_cert_file(&path).is_err());
}
