//! Hash, KDF and MAC primitives plus the AKA f-function family.
//!
//! Everything here is a pure function of its inputs. ML-KEM-768 and X25519
//! are reached through [`PrimitiveProvider`] so the lattice and curve
//! arithmetic stays in a vetted backend.

mod provider;

pub use provider::{
    MlKemDecapsKey, PrimitiveProvider, ProviderError, RustCryptoProvider, MLKEM_CT_LEN,
    MLKEM_EK_LEN, X25519_BASE_POINT, X25519_LEN,
};

use std::fmt;
use std::sync::Arc;

use hmac::{Hmac, KeyInit, Mac};
use sha2::{Digest, Sha256};
use sha3::Sha3_256;
use shake::{ExtendableOutput, Shake256, Update, XofReader};
use subtle::ConstantTimeEq;

/// Backends selectable by name.
pub const BACKENDS: &[&str] = &["rustcrypto"];

pub fn provider_by_name(name: &str) -> Option<Arc<dyn PrimitiveProvider>> {
    match name {
        "rustcrypto" => Some(Arc::new(RustCryptoProvider)),
        _ => None,
    }
}
use thiserror::Error;
use zeroize::{Zeroize, ZeroizeOnDrop};

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrimError {
    #[error("output length must be a positive multiple of 8 bits, got {0}")]
    BadOutputLength(usize),
    #[error("KDF shared secret must not be empty")]
    EmptySecret,
    #[error("cannot take {n_bits} bits from a {available}-byte string")]
    LeftTooLong { n_bits: usize, available: usize },
    #[error("f-function input must not be empty")]
    EmptyInput,
    #[error("long-term key must be 16 or 32 bytes, got {0}")]
    BadKeyLength(usize),
}

/// Subscriber long-term key `K`, shared by the USIM and the home network.
///
/// 256-bit by default; 128-bit keys are accepted for 3GPP compatibility.
#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct LongTermKey(Vec<u8>);

impl LongTermKey {
    pub const DEFAULT_LEN: usize = 32;

    pub fn new(bytes: &[u8]) -> Result<Self, PrimError> {
        match bytes.len() {
            16 | 32 => Ok(Self(bytes.to_vec())),
            n => Err(PrimError::BadKeyLength(n)),
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for LongTermKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LongTermKey({} bytes)", self.0.len())
    }
}

/// The f-function family: f1, f1*, f2, f3, f4, f5, f5*.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FTag {
    /// Network authentication MAC.
    F1,
    /// Resynchronisation MAC.
    F1S,
    /// Response RES / XRES.
    F2,
    /// Cipher key CK.
    F3,
    /// Integrity key IK.
    F4,
    /// Anonymity key AK.
    F5,
    /// Resynchronisation anonymity key AK*.
    F5S,
}

impl FTag {
    pub const ALL: [FTag; 7] = [
        FTag::F1,
        FTag::F1S,
        FTag::F2,
        FTag::F3,
        FTag::F4,
        FTag::F5,
        FTag::F5S,
    ];

    /// Domain-separation byte prepended to the HMAC input.
    pub const fn domain_byte(self) -> u8 {
        match self {
            FTag::F1 => 0x01,
            FTag::F1S => 0x11,
            FTag::F2 => 0x02,
            FTag::F3 => 0x03,
            FTag::F4 => 0x04,
            FTag::F5 => 0x05,
            FTag::F5S => 0x15,
        }
    }

    /// Output length in bytes.
    pub const fn output_len(self) -> usize {
        match self {
            FTag::F1 | FTag::F1S => 8,
            FTag::F2 | FTag::F3 | FTag::F4 => 16,
            FTag::F5 | FTag::F5S => 6,
        }
    }
}

/// `HMAC-SHA-256(k, tag ∥ data)` truncated to the tag's output length.
pub fn f(tag: FTag, k: &LongTermKey, data: &[u8]) -> Result<Vec<u8>, PrimError> {
    if data.is_empty() {
        return Err(PrimError::EmptyInput);
    }
    let full = hmac_sha256_parts(k.as_bytes(), &[&[tag.domain_byte()], data]);
    let out = full[..tag.output_len()].to_vec();
    debug_assert_eq!(out.len(), tag.output_len());
    Ok(out)
}

/// Same as [`f`] but writes into a fixed-size array; `N` must match the tag.
pub(crate) fn f_array<const N: usize>(tag: FTag, k: &LongTermKey, data: &[u8]) -> [u8; N] {
    assert_eq!(N, tag.output_len(), "output size mismatch for {tag:?}");
    assert!(!data.is_empty(), "f-function input must not be empty");
    let full = hmac_sha256_parts(k.as_bytes(), &[&[tag.domain_byte()], data]);
    let mut out = [0u8; N];
    out.copy_from_slice(&full[..N]);
    out
}

/// ANSI X9.63 KDF over SHA-256.
///
/// `Hash(Z ∥ counter ∥ SharedInfo)` for counter = 1, 2, … as a 4-byte
/// big-endian integer, concatenated and truncated to `out_len_bits / 8`.
pub fn kdf_x963(
    shared_secret: &[u8],
    shared_info: &[u8],
    out_len_bits: usize,
) -> Result<Vec<u8>, PrimError> {
    if out_len_bits == 0 || !out_len_bits.is_multiple_of(8) {
        return Err(PrimError::BadOutputLength(out_len_bits));
    }
    if shared_secret.is_empty() {
        return Err(PrimError::EmptySecret);
    }
    let out_len = out_len_bits / 8;
    let mut out = Vec::with_capacity(out_len + 32);
    let mut counter: u32 = 1;
    while out.len() < out_len {
        let mut h = Sha256::new();
        Digest::update(&mut h, shared_secret);
        Digest::update(&mut h, counter.to_be_bytes());
        Digest::update(&mut h, shared_info);
        out.extend_from_slice(&h.finalize());
        counter += 1;
    }
    out.truncate(out_len);
    Ok(out)
}

/// HMAC-SHA-256 used as the key-hierarchy KDF (XRES*, K_AUSF, K_SEAF).
pub fn kdf_hmac(key: &[u8], info: &[u8]) -> [u8; 32] {
    hmac_sha256(key, info)
}

/// First `n_bits / 8` bytes of `data`.
pub fn left(n_bits: usize, data: &[u8]) -> Result<Vec<u8>, PrimError> {
    if n_bits == 0 || !n_bits.is_multiple_of(8) {
        return Err(PrimError::BadOutputLength(n_bits));
    }
    let n = n_bits / 8;
    if n > data.len() {
        return Err(PrimError::LeftTooLong {
            n_bits,
            available: data.len(),
        });
    }
    Ok(data[..n].to_vec())
}

pub fn sha3_256(data: &[u8]) -> [u8; 32] {
    sha3_256_parts(&[data])
}

pub fn sha3_256_parts(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha3_256::new();
    for p in parts {
        Digest::update(&mut h, p);
    }
    h.finalize().into()
}

pub fn shake256(data: &[u8], out_len: usize) -> Vec<u8> {
    let mut h = Shake256::default();
    h.update(data);
    let mut reader = h.finalize_xof();
    let mut out = vec![0u8; out_len];
    reader.read(&mut out);
    out
}

pub fn hmac_sha256(key: &[u8], data: &[u8]) -> [u8; 32] {
    hmac_sha256_parts(key, &[data])
}

pub fn hmac_sha256_parts(key: &[u8], parts: &[&[u8]]) -> [u8; 32] {
    let mut mac = <HmacSha256 as KeyInit>::new_from_slice(key).expect("HMAC takes any key length");
    for p in parts {
        Mac::update(&mut mac, p);
    }
    mac.finalize().into_bytes().into()
}

/// Bytewise XOR of equal-length strings.
pub fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    assert_eq!(a.len(), b.len(), "xor operands differ in length");
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

pub(crate) fn xor_array<const N: usize>(a: &[u8; N], b: &[u8; N]) -> [u8; N] {
    let mut out = [0u8; N];
    for i in 0..N {
        out[i] = a[i] ^ b[i];
    }
    out
}

/// Constant-time equality; unequal lengths compare false.
pub fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && bool::from(a.ct_eq(b))
}
