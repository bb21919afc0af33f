//! Actors, key pairs, addresses, signatures and passphrase credentials.
//!
//! Keys are Ed25519, derived deterministically from a seed so that a scenario
//! replays to byte-identical identities. An address is the last 20 bytes of
//! the SHA-256 digest of the public key.

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{Canonical, Decode, DecodeError, Decoder, Encoder};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdentityError {
    #[error("passphrase must not be empty")]
    EmptyPassphrase,
    #[error("invalid hex: {0}")]
    BadHex(String),
    #[error("expected {expected} bytes, got {actual}")]
    BadLength { expected: usize, actual: usize },
}

/// Implements hex display, `FromStr` and serde for fixed-width byte newtypes.
macro_rules! hex_newtype {
    ($name:ident, $len:expr) => {
        impl $name {
            pub const LEN: usize = $len;

            pub const fn from_bytes(bytes: [u8; $len]) -> Self {
                Self(bytes)
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                format!("0x{}", hex::encode(self.0))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl FromStr for $name {
            type Err = IdentityError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let digits = s.strip_prefix("0x").unwrap_or(s);
                let bytes = hex::decode(digits).map_err(|e| IdentityError::BadHex(e.to_string()))?;
                let arr: [u8; $len] = bytes
                    .as_slice()
                    .try_into()
                    .map_err(|_| IdentityError::BadLength { expected: $len, actual: bytes.len() })?;
                Ok(Self(arr))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }

        impl Canonical for $name {
            fn encode(&self, enc: &mut Encoder) {
                enc.raw(&self.0);
            }
        }

        impl Decode for $name {
            fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
                Ok(Self(dec.raw::<$len>()?))
            }
        }
    };
}

/// 32-byte SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Hash32([u8; 32]);
hex_newtype!(Hash32, 32);

impl Hash32 {
    pub const ZERO: Hash32 = Hash32([0; 32]);

    pub fn digest(data: &[u8]) -> Self {
        Self(Sha256::digest(data).into())
    }

    pub fn of<T: Canonical + ?Sized>(value: &T) -> Self {
        let mut enc = Encoder::new();
        value.encode(&mut enc);
        Self::digest(&enc.finish())
    }
}

/// 20-byte account address.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address([u8; 20]);
hex_newtype!(Address, 20);

impl Address {
    pub const ZERO: Address = Address([0; 20]);

    pub fn from_public_key(pk: &PublicKey) -> Self {
        Self::from_digest_tail(&Hash32::digest(pk.as_bytes()))
    }

    pub(crate) fn from_digest_tail(h: &Hash32) -> Self {
        let mut out = [0u8; 20];
        out.copy_from_slice(&h.as_bytes()[12..]);
        Self(out)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey([u8; 32]);
hex_newtype!(PublicKey, 32);

/// Signing half of a key pair. Never serialized.
#[derive(Clone)]
pub struct PrivateKey(SigningKey);

impl PrivateKey {
    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.0.verifying_key().to_bytes())
    }
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PrivateKey(..)")
    }
}

/// Signature bytes. Kept as a vector so malformed or truncated signatures can be
/// represented and rejected by [`verify`] rather than at construction.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Signature(Vec<u8>);

impl Signature {
    pub fn from_vec(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature(0x{})", hex::encode(&self.0))
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("0x{}", hex::encode(&self.0)))
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let digits = s.strip_prefix("0x").unwrap_or(&s);
        hex::decode(digits).map(Signature).map_err(serde::de::Error::custom)
    }
}

impl Canonical for Signature {
    fn encode(&self, enc: &mut Encoder) {
        enc.bytes(&self.0);
    }
}

impl Decode for Signature {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Self(dec.bytes()?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Driller,
    Refinery,
    Storage,
    Pump,
    OtherFactory,
    Consumer,
}

impl Role {
    pub const ALL: [Role; 6] =
        [Role::Driller, Role::Refinery, Role::Storage, Role::Pump, Role::OtherFactory, Role::Consumer];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Driller => "driller",
            Role::Refinery => "refinery",
            Role::Storage => "storage",
            Role::Pump => "pump",
            Role::OtherFactory => "other_factory",
            Role::Consumer => "consumer",
        }
    }

    fn tag(self) -> u8 {
        match self {
            Role::Driller => 0,
            Role::Refinery => 1,
            Role::Storage => 2,
            Role::Pump => 3,
            Role::OtherFactory => 4,
            Role::Consumer => 5,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL.into_iter().find(|r| r.as_str() == s).ok_or_else(|| format!("unknown role `{s}`"))
    }
}

/// A signing identity: private key plus the public key and address derived from it.
#[derive(Clone, Debug)]
pub struct Keypair {
    private_key: PrivateKey,
    public_key: PublicKey,
    address: Address,
}

impl Keypair {
    /// Deterministic key pair from a domain label and seed.
    pub fn from_seed(domain: &str, seed: u64) -> Self {
        let mut enc = Encoder::new();
        enc.str("oilchain/keygen").str(domain).u64(seed);
        let secret = Hash32::digest(&enc.finish());
        let signing = SigningKey::from_bytes(secret.as_bytes());
        let private_key = PrivateKey(signing);
        let public_key = private_key.public_key();
        Self { address: Address::from_public_key(&public_key), public_key, private_key }
    }

    pub fn address(&self) -> Address {
        self.address
    }

    pub fn public_key(&self) -> PublicKey {
        self.public_key
    }

    pub fn private_key(&self) -> &PrivateKey {
        &self.private_key
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        sign(message, &self.private_key)
    }
}

/// A supply-chain participant.
#[derive(Clone, Debug)]
pub struct Actor {
    role: Role,
    keys: Keypair,
}

impl Actor {
    pub fn role(&self) -> Role {
        self.role
    }

    pub fn address(&self) -> Address {
        self.keys.address
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.public_key
    }

    pub fn private_key(&self) -> &PrivateKey {
        &self.keys.private_key
    }

    pub fn keys(&self) -> &Keypair {
        &self.keys
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        self.keys.sign(message)
    }
}

pub fn generate_actor(role: Role, seed: u64) -> Actor {
    let domain = format!("actor/{}", role.tag());
    Actor { role, keys: Keypair::from_seed(&domain, seed) }
}

pub fn sign(message: &[u8], key: &PrivateKey) -> Signature {
    Signature(key.0.sign(message).to_bytes().to_vec())
}

/// True iff `sig` is a valid signature over `message` by the holder of `pk`.
/// Malformed keys or signatures yield `false`.
pub fn verify(message: &[u8], sig: &Signature, pk: &PublicKey) -> bool {
    let Ok(key) = VerifyingKey::from_bytes(pk.as_bytes()) else {
        return false;
    };
    let Ok(sig) = ed25519_dalek::Signature::from_slice(sig.as_bytes()) else {
        return false;
    };
    key.verify(message, &sig).is_ok()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CredentialKind {
    Signature,
    Passphrase,
}

/// Proof material used in the acceptance handshake.
///
/// For `Signature`, `payload` is the signature bytes. For `Passphrase`, it is
/// the canonical encoding of `(salt, SHA-256(salt, passphrase))`; the
/// passphrase itself is never kept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Credential {
    pub kind: CredentialKind,
    pub payload: Vec<u8>,
}

impl Credential {
    pub fn signature(sig: Signature) -> Self {
        Self { kind: CredentialKind::Signature, payload: sig.into_bytes() }
    }

    /// Salt stored in a passphrase credential, if well-formed.
    pub fn salt(&self) -> Option<Vec<u8>> {
        self.passphrase_parts().map(|(salt, _)| salt)
    }

    fn passphrase_parts(&self) -> Option<(Vec<u8>, [u8; 32])> {
        if self.kind != CredentialKind::Passphrase {
            return None;
        }
        let mut dec = Decoder::new(&self.payload);
        let salt = dec.bytes().ok()?;
        let digest = dec.raw::<32>().ok()?;
        dec.finish().ok()?;
        Some((salt, digest))
    }

    /// Checks a candidate passphrase against a stored passphrase credential.
    pub fn check(&self, passphrase: &str) -> bool {
        match self.passphrase_parts() {
            Some((salt, digest)) => passphrase_digest(passphrase, &salt).as_bytes() == &digest,
            None => false,
        }
    }
}

fn passphrase_digest(passphrase: &str, salt: &[u8]) -> Hash32 {
    let mut enc = Encoder::new();
    enc.str("oilchain/passphrase").bytes(salt).str(passphrase);
    Hash32::digest(&enc.finish())
}

pub fn make_passphrase_credential(passphrase: &str, salt: &[u8]) -> Result<Credential, IdentityError> {
    if passphrase.is_empty() {
        return Err(IdentityError::EmptyPassphrase);
    }
    let digest = passphrase_digest(passphrase, salt);
    let mut enc = Encoder::new();
    enc.bytes(salt).raw(digest.as_bytes());
    Ok(Credential { kind: CredentialKind::Passphrase, payload: enc.finish() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_role_and_seed_give_identical_actor() {
        let a = generate_actor(Role::Driller, 1);
        let b = generate_actor(Role::Driller, 1);
        assert_eq!(a.address(), b.address());
        assert_eq!(a.public_key(), b.public_key());
    }

    #[test]
    fn distinct_seeds_and_roles_give_distinct_addresses() {
        let a = generate_actor(Role::Driller, 1);
        assert_ne!(a.address(), generate_actor(Role::Driller, 2).address());
        assert_ne!(a.address(), generate_actor(Role::Refinery, 1).address());
    }

    #[test]
    fn address_is_tail_of_public_key_digest() {
        let actor = generate_actor(Role::Consumer, 7);
        // Independent recomputation straight from sha2.
        let digest = Sha256::digest(actor.public_key().as_bytes());
        assert_eq!(&actor.address().as_bytes()[..], &digest[12..32]);
    }

    #[test]
    fn sign_verify_round_trip_and_rejections() {
        let alice = generate_actor(Role::Refinery, 3);
        let mallory = generate_actor(Role::Storage, 3);
        let msg = b"accept shipment 101";
        let sig = sign(msg, alice.private_key());
        assert!(verify(msg, &sig, &alice.public_key()));
        assert!(!verify(msg, &sig, &mallory.public_key()));

        let mut flipped = msg.to_vec();
        flipped[0] ^= 0x01;
        assert!(!verify(&flipped, &sig, &alice.public_key()));
    }

    #[test]
    fn truncated_and_empty_signatures_are_rejected() {
        let alice = generate_actor(Role::Pump, 9);
        let sig = alice.sign(b"m");
        for len in [0, 1, 32, 63] {
            let short = Signature::from_vec(sig.as_bytes()[..len].to_vec());
            assert!(!verify(b"m", &short, &alice.public_key()));
        }
        let mut long = sig.as_bytes().to_vec();
        long.push(0);
        assert!(!verify(b"m", &Signature::from_vec(long), &alice.public_key()));
    }

    #[test]
    fn passphrase_credential_checks() {
        let cred = make_passphrase_credential("open-sesame", b"salt-1").unwrap();
        assert!(cred.check("open-sesame"));
        assert!(!cred.check("Open-Sesame"));
        assert!(!cred.check(""));
        assert_eq!(cred.salt().unwrap(), b"salt-1");
    }

    #[test]
    fn passphrase_salt_changes_stored_digest() {
        let a = make_passphrase_credential("open-sesame", b"salt-1").unwrap();
        let b = make_passphrase_credential("open-sesame", b"salt-2").unwrap();
        assert_ne!(a.payload[a.payload.len() - 32..], b.payload[b.payload.len() - 32..]);
    }

    #[test]
    fn passphrase_never_stored_in_clear() {
        let cred = make_passphrase_credential("open-sesame", b"s").unwrap();
        let needle = b"open-sesame";
        assert!(!cred.payload.windows(needle.len()).any(|w| w == needle));
    }

    #[test]
    fn empty_passphrase_rejected() {
        assert_eq!(make_passphrase_credential("", b"s"), Err(IdentityError::EmptyPassphrase));
    }

    #[test]
    fn hex_round_trip() {
        let a = generate_actor(Role::Storage, 4).address();
        assert_eq!(a.to_hex().parse::<Address>().unwrap(), a);
        assert!("0x1234".parse::<Address>().is_err());
    }
}
