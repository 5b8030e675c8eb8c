//! X-Wing hybrid KEM over ML-KEM-768 and X25519.
//!
//! Keys are 32-byte seeds expanded with SHAKE256 into an ML-KEM key pair and
//! an X25519 scalar. The shared secret is
//! `SHA3-256(ss_mlkem ∥ ss_x25519 ∥ c_x25519 ∥ pk_x25519 ∥ label)`.
//!
//! Two eseed conventions exist. [`encapsulate`] follows the protocol's own
//! variant, where `eseed[32:64]` *is* the X25519 ciphertext and `eseed[0:32]`
//! is the matching scalar. [`encapsulate_draft`] follows the IETF draft,
//! where the eseed supplies ML-KEM randomness and the ephemeral scalar; it
//! exists for known-answer interop only.

use std::fmt;

use rand::{CryptoRng, TryRngCore};
use thiserror::Error;
use zeroize::{Zeroize, ZeroizeOnDrop, Zeroizing};

use crate::prims::{
    ct_eq, sha3_256_parts, shake256, MlKemDecapsKey, PrimitiveProvider, ProviderError,
    MLKEM_CT_LEN, MLKEM_EK_LEN, X25519_LEN,
};

pub const SECRET_KEY_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = MLKEM_EK_LEN + X25519_LEN;
pub const CIPHERTEXT_LEN: usize = MLKEM_CT_LEN + X25519_LEN;
pub const SHARED_SECRET_LEN: usize = 32;
pub const ESEED_LEN: usize = 64;

/// `\./` `/^\`
pub const XWING_LABEL: [u8; 6] = [0x5c, 0x2e, 0x2f, 0x2f, 0x5e, 0x5c];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XWingError {
    #[error("{what} must be {expected} bytes, got {got}")]
    BadLength {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("encapsulation key rejected: {0}")]
    Provider(#[from] ProviderError),
    #[error("entropy source failed")]
    Entropy,
}

fn fixed<const N: usize>(what: &'static str, bytes: &[u8]) -> Result<[u8; N], XWingError> {
    bytes.try_into().map_err(|_| XWingError::BadLength {
        what,
        expected: N,
        got: bytes.len(),
    })
}

#[derive(Clone, Zeroize, ZeroizeOnDrop)]
pub struct XWingSecretKey([u8; SECRET_KEY_LEN]);

impl XWingSecretKey {
    pub fn from_bytes(bytes: [u8; SECRET_KEY_LEN]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, XWingError> {
        fixed("X-Wing secret key", bytes).map(Self)
    }

    pub fn as_bytes(&self) -> &[u8; SECRET_KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for XWingSecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("XWingSecretKey(..)")
    }
}

/// `pk1 (ML-KEM-768 encapsulation key) ∥ pk2 (X25519 public key)`.
#[derive(Clone, PartialEq, Eq)]
pub struct XWingPublicKey([u8; PUBLIC_KEY_LEN]);

impl XWingPublicKey {
    pub fn from_bytes(bytes: [u8; PUBLIC_KEY_LEN]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, XWingError> {
        fixed("X-Wing public key", bytes).map(Self)
    }

    pub fn from_parts(pk1: &[u8; MLKEM_EK_LEN], pk2: &[u8; X25519_LEN]) -> Self {
        let mut out = [0u8; PUBLIC_KEY_LEN];
        out[..MLKEM_EK_LEN].copy_from_slice(pk1);
        out[MLKEM_EK_LEN..].copy_from_slice(pk2);
        Self(out)
    }

    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }

    pub fn mlkem_part(&self) -> &[u8; MLKEM_EK_LEN] {
        self.0[..MLKEM_EK_LEN].try_into().unwrap()
    }

    pub fn x25519_part(&self) -> &[u8; X25519_LEN] {
        self.0[MLKEM_EK_LEN..].try_into().unwrap()
    }
}

impl fmt::Debug for XWingPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "XWingPublicKey({}..)", hex::encode(&self.0[..8]))
    }
}

/// `c1 (ML-KEM-768 ciphertext) ∥ c2 (X25519 public value)`.
#[derive(Clone, PartialEq, Eq)]
pub struct XWingCiphertext([u8; CIPHERTEXT_LEN]);

impl XWingCiphertext {
    pub fn from_bytes(bytes: [u8; CIPHERTEXT_LEN]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, XWingError> {
        fixed("X-Wing ciphertext", bytes).map(Self)
    }

    pub fn from_parts(c1: &[u8; MLKEM_CT_LEN], c2: &[u8; X25519_LEN]) -> Self {
        let mut out = [0u8; CIPHERTEXT_LEN];
        out[..MLKEM_CT_LEN].copy_from_slice(c1);
        out[MLKEM_CT_LEN..].copy_from_slice(c2);
        Self(out)
    }

    pub fn as_bytes(&self) -> &[u8; CIPHERTEXT_LEN] {
        &self.0
    }

    pub fn mlkem_part(&self) -> &[u8; MLKEM_CT_LEN] {
        self.0[..MLKEM_CT_LEN].try_into().unwrap()
    }

    pub fn x25519_part(&self) -> &[u8; X25519_LEN] {
        self.0[MLKEM_CT_LEN..].try_into().unwrap()
    }
}

impl fmt::Debug for XWingCiphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "XWingCiphertext({}..)", hex::encode(&self.0[..8]))
    }
}

/// 64-byte expanded seed: `[0:32]` ECDH scalar, `[32:64]` ECDH public value.
#[derive(Clone, Zeroize, ZeroizeOnDrop)]
pub struct Eseed([u8; ESEED_LEN]);

impl Eseed {
    pub fn from_bytes(bytes: [u8; ESEED_LEN]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, XWingError> {
        fixed("eseed", bytes).map(Self)
    }

    /// Reuse a fresh key pair's X25519 half as the ECDH ephemeral:
    /// `shake256(sk, 96)[64:96] ∥ pk[1184:1216]`.
    pub fn from_keypair(sk: &XWingSecretKey, pk: &XWingPublicKey) -> Self {
        let e = Zeroizing::new(shake256(sk.as_bytes(), 96));
        let mut out = [0u8; ESEED_LEN];
        out[..32].copy_from_slice(&e[64..96]);
        out[32..].copy_from_slice(pk.x25519_part());
        Self(out)
    }

    pub fn as_bytes(&self) -> &[u8; ESEED_LEN] {
        &self.0
    }

    pub fn ecdh_scalar(&self) -> &[u8; 32] {
        self.0[..32].try_into().unwrap()
    }

    pub fn ecdh_public(&self) -> &[u8; 32] {
        self.0[32..].try_into().unwrap()
    }
}

impl fmt::Debug for Eseed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Eseed(..)")
    }
}

#[derive(Clone, Zeroize, ZeroizeOnDrop)]
pub struct SharedSecret([u8; SHARED_SECRET_LEN]);

impl SharedSecret {
    pub fn from_bytes(bytes: [u8; SHARED_SECRET_LEN]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SHARED_SECRET_LEN] {
        &self.0
    }
}

impl PartialEq for SharedSecret {
    fn eq(&self, other: &Self) -> bool {
        ct_eq(&self.0, &other.0)
    }
}

impl Eq for SharedSecret {}

impl fmt::Debug for SharedSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SharedSecret(..)")
    }
}

#[derive(Debug, Clone)]
pub struct XWingKeyPair {
    pub sk: XWingSecretKey,
    pub pk: XWingPublicKey,
}

/// Everything `shake256(sk, 96)` expands into.
pub struct ExpandedKey {
    pub mlkem_dk: MlKemDecapsKey,
    pub pk1: [u8; MLKEM_EK_LEN],
    pub sk2: Zeroizing<[u8; 32]>,
    pub pk2: [u8; X25519_LEN],
}

impl ExpandedKey {
    pub fn public_key(&self) -> XWingPublicKey {
        XWingPublicKey::from_parts(&self.pk1, &self.pk2)
    }
}

pub fn expand(provider: &dyn PrimitiveProvider, sk: &XWingSecretKey) -> ExpandedKey {
    let e = Zeroizing::new(shake256(sk.as_bytes(), 96));
    let d: &[u8; 32] = e[0..32].try_into().unwrap();
    let z: &[u8; 32] = e[32..64].try_into().unwrap();
    let (mlkem_dk, pk1) = provider.mlkem_keygen_internal(d, z);
    let sk2 = Zeroizing::new(<[u8; 32]>::try_from(&e[64..96]).unwrap());
    let pk2 = provider.x25519_dh(&sk2, &provider.x25519_base_point());
    ExpandedKey {
        mlkem_dk,
        pk1,
        sk2,
        pk2,
    }
}

/// Derive the key pair for a given 32-byte secret.
pub fn keygen_from_secret(provider: &dyn PrimitiveProvider, sk: XWingSecretKey) -> XWingKeyPair {
    let pk = expand(provider, &sk).public_key();
    XWingKeyPair { sk, pk }
}

pub fn keygen<R: CryptoRng + ?Sized>(provider: &dyn PrimitiveProvider, rng: &mut R) -> XWingKeyPair {
    let mut sk = [0u8; SECRET_KEY_LEN];
    rng.fill_bytes(&mut sk);
    keygen_from_secret(provider, XWingSecretKey(sk))
}

/// [`keygen`] drawing from the operating system; entropy failure is an error.
pub fn keygen_os(provider: &dyn PrimitiveProvider) -> Result<XWingKeyPair, XWingError> {
    let mut sk = [0u8; SECRET_KEY_LEN];
    rand::rngs::OsRng
        .try_fill_bytes(&mut sk)
        .map_err(|_| XWingError::Entropy)?;
    Ok(keygen_from_secret(provider, XWingSecretKey(sk)))
}

/// `SHA3-256(ss1 ∥ ss2 ∥ c2 ∥ pk2 ∥ XWING_LABEL)`.
pub fn combine(ss1: &[u8; 32], ss2: &[u8; 32], c2: &[u8; 32], pk2: &[u8; 32]) -> SharedSecret {
    SharedSecret(sha3_256_parts(&[ss1, ss2, c2, pk2, &XWING_LABEL]))
}

/// Encapsulate to `pk`.
///
/// Without an eseed a fresh ephemeral scalar is drawn. With one, `c2` is
/// taken verbatim from `eseed[32:64]` and `ss2 = X25519(eseed[0:32], pk2)`;
/// the caller is responsible for the two halves matching. ML-KEM randomness
/// always comes from `rng`.
pub fn encapsulate<R: CryptoRng + ?Sized>(
    provider: &dyn PrimitiveProvider,
    pk: &XWingPublicKey,
    eseed: Option<&Eseed>,
    rng: &mut R,
) -> Result<(SharedSecret, XWingCiphertext), XWingError> {
    let pk2 = pk.x25519_part();
    let (c2, ss2) = match eseed {
        Some(eseed) => (
            *eseed.ecdh_public(),
            Zeroizing::new(provider.x25519_dh(eseed.ecdh_scalar(), pk2)),
        ),
        None => {
            let mut ske = Zeroizing::new([0u8; 32]);
            rng.fill_bytes(ske.as_mut());
            let c2 = provider.x25519_dh(&ske, &provider.x25519_base_point());
            (c2, Zeroizing::new(provider.x25519_dh(&ske, pk2)))
        }
    };
    let mut m = Zeroizing::new([0u8; 32]);
    rng.fill_bytes(m.as_mut());
    let (ss1, c1) = provider.mlkem_encaps(pk.mlkem_part(), &m)?;
    let ss1 = Zeroizing::new(ss1);
    let ss = combine(&ss1, &ss2, &c2, pk2);
    Ok((ss, XWingCiphertext::from_parts(&c1, &c2)))
}

/// IETF-draft derandomised encapsulation: `m = eseed[0:32]`,
/// `ek_x = eseed[32:64]`, `c2 = X25519(ek_x, G)`.
pub fn encapsulate_draft(
    provider: &dyn PrimitiveProvider,
    pk: &XWingPublicKey,
    eseed: &Eseed,
) -> Result<(SharedSecret, XWingCiphertext), XWingError> {
    let pk2 = pk.x25519_part();
    let m: &[u8; 32] = eseed.as_bytes()[..32].try_into().unwrap();
    let ek_x: &[u8; 32] = eseed.as_bytes()[32..].try_into().unwrap();
    let (ss1, c1) = provider.mlkem_encaps(pk.mlkem_part(), m)?;
    let ss1 = Zeroizing::new(ss1);
    let c2 = provider.x25519_dh(ek_x, &provider.x25519_base_point());
    let ss2 = Zeroizing::new(provider.x25519_dh(ek_x, pk2));
    let ss = combine(&ss1, &ss2, &c2, pk2);
    Ok((ss, XWingCiphertext::from_parts(&c1, &c2)))
}

/// Decapsulate. ML-KEM implicit rejection means a tampered ciphertext
/// yields an unrelated shared secret rather than an error.
pub fn decapsulate(
    provider: &dyn PrimitiveProvider,
    ct: &XWingCiphertext,
    sk: &XWingSecretKey,
) -> SharedSecret {
    let ex = expand(provider, sk);
    let ss1 = Zeroizing::new(provider.mlkem_decaps(ct.mlkem_part(), &ex.mlkem_dk));
    let c2 = ct.x25519_part();
    let ss2 = Zeroizing::new(provider.x25519_dh(&ex.sk2, c2));
    combine(&ss1, &ss2, c2, &ex.pk2)
}
