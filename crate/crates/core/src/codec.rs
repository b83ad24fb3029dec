//! Canonical encoding, salted hashing and Ed25519 signatures.
//!
//! Every digest and signature in the system is computed over
//! [`CanonicalBytes`]: compact JSON with map keys in ascending byte order,
//! no insignificant whitespace, integers only (floats are rejected) and
//! byte blobs written as lowercase hex strings. A byte blob and the string
//! holding its hex encoding are the same canonical value.
//!
//! Salted digests use the layout `SHA-256(salt || 0x00 || payload)`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;

use ed25519_dalek::{Signer as _, SigningKey, Verifier as _};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use zeroize::Zeroize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("unsupported value: {0}")]
    UnsupportedValue(String),
    #[error("input is not in canonical form")]
    NonCanonical,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("seed must be 32 bytes, got {0}")]
    BadSeedLength(usize),
    #[error("malformed verification key")]
    MalformedKey,
    #[error("malformed signature")]
    MalformedSignature,
    #[error("bad hex: {0}")]
    BadHex(String),
}

/// Structured value accepted by the canonical encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Bool(bool),
    /// Integers in the union of the `i64` and `u64` ranges.
    Int(i128),
    Str(String),
    Bytes(Vec<u8>),
    List(Vec<Value>),
    Map(BTreeMap<String, Value>),
}

impl Value {
    pub fn map<K: Into<String>>(entries: impl IntoIterator<Item = (K, Value)>) -> Value {
        Value::Map(entries.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    /// Converts a JSON tree, rejecting floats and nulls.
    pub fn from_json(json: &serde_json::Value) -> Result<Value, CodecError> {
        Ok(match json {
            serde_json::Value::Null => {
                return Err(CodecError::UnsupportedValue("null".into()));
            }
            serde_json::Value::Bool(b) => Value::Bool(*b),
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Value::Int(i as i128)
                } else if let Some(u) = n.as_u64() {
                    Value::Int(u as i128)
                } else {
                    return Err(CodecError::UnsupportedValue(format!("float {n}")));
                }
            }
            serde_json::Value::String(s) => Value::Str(s.clone()),
            serde_json::Value::Array(items) => Value::List(
                items
                    .iter()
                    .map(Value::from_json)
                    .collect::<Result<_, _>>()?,
            ),
            serde_json::Value::Object(obj) => {
                let mut out = BTreeMap::new();
                for (k, v) in obj {
                    out.insert(k.clone(), Value::from_json(v)?);
                }
                Value::Map(out)
            }
        })
    }

    /// Replaces byte blobs by their hex strings, the form a parser sees.
    pub fn normalized(&self) -> Value {
        match self {
            Value::Bytes(b) => Value::Str(hex::encode(b)),
            Value::List(items) => Value::List(items.iter().map(Value::normalized).collect()),
            Value::Map(m) => Value::Map(m.iter().map(|(k, v)| (k.clone(), v.normalized())).collect()),
            other => other.clone(),
        }
    }
}

/// Byte stream produced by the canonical encoder.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct CanonicalBytes(Vec<u8>);

impl CanonicalBytes {
    /// Accepts `bytes` only if they already are a canonical encoding.
    pub fn parse(bytes: &[u8]) -> Result<CanonicalBytes, CodecError> {
        parse_canonical(bytes)?;
        Ok(CanonicalBytes(bytes.to_vec()))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }

    pub fn as_str(&self) -> &str {
        // The encoder only ever emits UTF-8.
        std::str::from_utf8(&self.0).expect("canonical bytes are UTF-8")
    }
}

impl Deref for CanonicalBytes {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.0
    }
}

impl AsRef<[u8]> for CanonicalBytes {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for CanonicalBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalBytes({})", String::from_utf8_lossy(&self.0))
    }
}

pub fn canonical_serialize(value: &Value) -> CanonicalBytes {
    let mut out = Vec::with_capacity(64);
    write_value(value, &mut out);
    CanonicalBytes(out)
}

/// Canonical encoding of any serde-serializable value.
pub fn to_canonical<T: Serialize + ?Sized>(value: &T) -> Result<CanonicalBytes, CodecError> {
    let json =
        serde_json::to_value(value).map_err(|e| CodecError::UnsupportedValue(e.to_string()))?;
    Ok(canonical_serialize(&Value::from_json(&json)?))
}

/// Parses canonical bytes back into a [`Value`]; byte blobs come back as
/// hex strings. Fails with [`CodecError::NonCanonical`] on valid JSON that
/// is not in canonical form.
pub fn parse_canonical(bytes: &[u8]) -> Result<Value, CodecError> {
    let json: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| CodecError::Parse(e.to_string()))?;
    let value = Value::from_json(&json)?;
    if canonical_serialize(&value).as_bytes() != bytes {
        return Err(CodecError::NonCanonical);
    }
    Ok(value)
}

/// Deserializes a typed value, insisting the input is canonical.
pub fn from_canonical<T: serde::de::DeserializeOwned + Serialize>(
    bytes: &[u8],
) -> Result<T, CodecError> {
    let value: T = serde_json::from_slice(bytes).map_err(|e| CodecError::Parse(e.to_string()))?;
    if to_canonical(&value)?.as_bytes() != bytes {
        return Err(CodecError::NonCanonical);
    }
    Ok(value)
}

fn write_value(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Bool(true) => out.extend_from_slice(b"true"),
        Value::Bool(false) => out.extend_from_slice(b"false"),
        Value::Int(i) => out.extend_from_slice(i.to_string().as_bytes()),
        Value::Str(s) => write_str(s, out),
        Value::Bytes(b) => {
            out.push(b'"');
            out.extend_from_slice(hex::encode(b).as_bytes());
            out.push(b'"');
        }
        Value::List(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out);
            }
            out.push(b']');
        }
        Value::Map(entries) => {
            out.push(b'{');
            for (i, (k, v)) in entries.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_str(k, out);
                out.push(b':');
                write_value(v, out);
            }
            out.push(b'}');
        }
    }
}

fn write_str(s: &str, out: &mut Vec<u8>) {
    const HEX: &[u8; 16] = b"0123456789abcdef";
    out.push(b'"');
    for &b in s.as_bytes() {
        match b {
            b'"' => out.extend_from_slice(b"\\\""),
            b'\\' => out.extend_from_slice(b"\\\\"),
            b'\n' => out.extend_from_slice(b"\\n"),
            b'\r' => out.extend_from_slice(b"\\r"),
            b'\t' => out.extend_from_slice(b"\\t"),
            0x08 => out.extend_from_slice(b"\\b"),
            0x0c => out.extend_from_slice(b"\\f"),
            0x00..=0x1f => {
                out.extend_from_slice(b"\\u00");
                out.push(HEX[(b >> 4) as usize]);
                out.push(HEX[(b & 0xf) as usize]);
            }
            _ => out.push(b),
        }
    }
    out.push(b'"');
}

macro_rules! hex_array {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;

            pub fn from_slice(bytes: &[u8]) -> Option<Self> {
                <[u8; $len]>::try_from(bytes).ok().map(Self)
            }

            pub fn from_hex(s: &str) -> Result<Self, CodecError> {
                if s.bytes().any(|c| c.is_ascii_uppercase()) {
                    return Err(CodecError::BadHex("uppercase hex".into()));
                }
                let raw = hex::decode(s).map_err(|e| CodecError::BadHex(e.to_string()))?;
                Self::from_slice(&raw)
                    .ok_or_else(|| CodecError::BadHex(format!("expected {} bytes", $len)))
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn as_bytes(&self) -> &[u8] {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Self::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_array!(
    /// A SHA-256 output.
    Hash32,
    32
);
hex_array!(
    /// Ed25519 public key bytes.
    VerificationKey,
    32
);
hex_array!(
    /// Ed25519 signature bytes.
    Signature,
    64
);

hex_array!(
    /// Random capability-token identifier.
    TokenId,
    16
);

impl Hash32 {
    pub const ZERO: Hash32 = Hash32([0u8; 32]);
}

pub fn sha256(bytes: &[u8]) -> Hash32 {
    Hash32(Sha256::digest(bytes).into())
}

/// Single-use random salt. Never leaves the off-chain store.
#[derive(Clone, PartialEq, Eq)]
pub struct Salt([u8; 32]);

impl Salt {
    pub fn generate(rng: &mut dyn RngCore) -> Salt {
        let mut raw = [0u8; 32];
        rng.fill_bytes(&mut raw);
        Salt(raw)
    }

    pub fn from_bytes(raw: [u8; 32]) -> Salt {
        Salt(raw)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for Salt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Salt(..)")
    }
}

impl Drop for Salt {
    fn drop(&mut self) {
        self.0.zeroize();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashAlgorithm {
    Sha256,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SaltedDigest {
    pub algorithm: HashAlgorithm,
    pub digest: Hash32,
}

pub fn salted_hash(salt: &Salt, payload: &[u8]) -> SaltedDigest {
    let mut h = Sha256::new();
    h.update(salt.0);
    h.update([0u8]);
    h.update(payload);
    SaltedDigest {
        algorithm: HashAlgorithm::Sha256,
        digest: Hash32(h.finalize().into()),
    }
}

/// An Ed25519 signing key with its verification key.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    pub fn verification_key(&self) -> VerificationKey {
        VerificationKey(self.signing.verifying_key().to_bytes())
    }

    /// Secret seed bytes, for keystores.
    pub fn seed(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn sign(&self, payload: &[u8]) -> Signature {
        Signature(self.signing.sign(payload).to_bytes())
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyPair({})", self.verification_key())
    }
}

/// Deterministic from `seed`, random otherwise.
pub fn generate_keypair(seed: Option<&[u8]>) -> Result<KeyPair, CodecError> {
    match seed {
        Some(seed) => {
            let raw: [u8; 32] = seed
                .try_into()
                .map_err(|_| CodecError::BadSeedLength(seed.len()))?;
            Ok(KeyPair {
                signing: SigningKey::from_bytes(&raw),
            })
        }
        None => Ok(generate_keypair_with(&mut OsRng)),
    }
}

pub fn generate_keypair_with(rng: &mut dyn RngCore) -> KeyPair {
    let mut raw = [0u8; 32];
    rng.fill_bytes(&mut raw);
    let pair = KeyPair {
        signing: SigningKey::from_bytes(&raw),
    };
    raw.zeroize();
    pair
}

pub fn sign(key: &KeyPair, payload: &[u8]) -> Signature {
    key.sign(payload)
}

/// Checks `sig` over `payload` under the raw verification key `vk`.
pub fn verify_signature(vk: &[u8], payload: &[u8], sig: &[u8]) -> Result<bool, CodecError> {
    let vk: [u8; 32] = vk.try_into().map_err(|_| CodecError::MalformedKey)?;
    let sig: [u8; 64] = sig.try_into().map_err(|_| CodecError::MalformedSignature)?;
    let key = ed25519_dalek::VerifyingKey::from_bytes(&vk).map_err(|_| CodecError::MalformedKey)?;
    let sig = ed25519_dalek::Signature::from_bytes(&sig);
    Ok(key.verify(payload, &sig).is_ok())
}

impl VerificationKey {
    /// False for keys that are not valid curve points.
    pub fn verifies(&self, payload: &[u8], sig: &Signature) -> bool {
        verify_signature(&self.0, payload, &sig.0).unwrap_or(false)
    }
}
