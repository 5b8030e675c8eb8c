//! SUPI concealment (UE side) and deconcealment (HN side).
//!
//! The UE draws a fresh X-Wing key pair, encapsulates to the home network
//! reusing that pair's X25519 half as the ephemeral, and seals
//! `SUPI ∥ pk1_UE` under the resulting keys:
//!
//! ```text
//! k_UE = X9.63-KDF(ss_UE, "", 512)      k1 = k_UE[0:32], k2 = k_UE[32:64]
//! C0   = c_UE
//! C1   = AES-128-CTR(key = k1[0:16], ctr0 = k1[16:32], SUPI ∥ pk1_UE)
//! C2   = HMAC-SHA-256(k2, C1)
//! ```

use std::fmt;

use aes::cipher::{KeyIvInit, StreamCipher};
use rand::CryptoRng;
use thiserror::Error;
use zeroize::Zeroizing;

use crate::prims::{ct_eq, hmac_sha256, kdf_x963, PrimitiveProvider, MLKEM_EK_LEN};
use crate::xwing::{
    self, Eseed, SharedSecret, XWingCiphertext, XWingError, XWingPublicKey, XWingSecretKey,
};

type Aes128Ctr = ctr::Ctr128BE<aes::Aes128>;

pub const SUPI_MAX_LEN: usize = 64;
pub const SUPI_DEFAULT_LEN: usize = 16;
pub const MAC_TAG_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("SUPI must be 1..={SUPI_MAX_LEN} bytes, got {0}")]
    BadSupiLength(usize),
    #[error(transparent)]
    XWing(#[from] XWingError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeconcealError {
    #[error("SUCI MAC does not verify")]
    MacMismatch,
    #[error("C1 is {0} bytes, expected SUPI (1..=64) plus 1184")]
    BadC1Length(usize),
}

/// Subscription permanent identifier: opaque, 1 to 64 bytes.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Supi(Vec<u8>);

impl Supi {
    pub fn new(bytes: &[u8]) -> Result<Self, IdentityError> {
        if bytes.is_empty() || bytes.len() > SUPI_MAX_LEN {
            return Err(IdentityError::BadSupiLength(bytes.len()));
        }
        Ok(Self(bytes.to_vec()))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Supi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Supi({})", hex::encode(&self.0))
    }
}

/// Concealed identity `(C0, C1, C2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Suci {
    pub c0: XWingCiphertext,
    pub c1: Vec<u8>,
    pub c2: [u8; MAC_TAG_LEN],
}

impl Suci {
    /// Wire payload size: `|C0| + |C1| + |C2|`.
    pub fn payload_len(&self) -> usize {
        self.c0.as_bytes().len() + self.c1.len() + self.c2.len()
    }
}

/// UE output of concealment. `sk_ue` stays on the UE until the challenge
/// is processed.
#[derive(Debug, Clone)]
pub struct ConcealmentResult {
    pub suci: Suci,
    pub sk_ue: XWingSecretKey,
    pub pk_ue: XWingPublicKey,
}

/// `(k1, k2)` halves of `X9.63-KDF(ss_UE, "", 512)`.
struct SealKeys {
    k1: Zeroizing<[u8; 32]>,
    k2: Zeroizing<[u8; 32]>,
}

fn seal_keys(ss_ue: &[u8; 32]) -> SealKeys {
    let k_ue = Zeroizing::new(kdf_x963(ss_ue, b"", 512).expect("512 is byte aligned"));
    SealKeys {
        k1: Zeroizing::new(k_ue[..32].try_into().unwrap()),
        k2: Zeroizing::new(k_ue[32..].try_into().unwrap()),
    }
}

fn ctr_apply(k1: &[u8; 32], buf: &mut [u8]) {
    let mut cipher = Aes128Ctr::new_from_slices(&k1[..16], &k1[16..]).expect("fixed key/iv sizes");
    cipher.apply_keystream(buf);
}

/// Raw AES-128-CTR under `k1` with no tag check.
pub fn ctr_decrypt(k1: &[u8; 32], c1: &[u8]) -> Vec<u8> {
    let mut out = c1.to_vec();
    ctr_apply(k1, &mut out);
    out
}

/// Symmetric half of concealment: `(C1, C2)` for `supi ∥ pk1` under `ss_ue`.
pub fn seal_payload(
    ss_ue: &[u8; 32],
    supi: &Supi,
    pk1: &[u8; MLKEM_EK_LEN],
) -> (Vec<u8>, [u8; MAC_TAG_LEN]) {
    let keys = seal_keys(ss_ue);
    let mut c1 = Vec::with_capacity(supi.len() + MLKEM_EK_LEN);
    c1.extend_from_slice(supi.as_bytes());
    c1.extend_from_slice(pk1);
    ctr_apply(&keys.k1, &mut c1);
    let c2 = hmac_sha256(keys.k2.as_ref(), &c1);
    (c1, c2)
}

/// Inverse of [`seal_payload`]; checks `C2` before decrypting.
pub fn open_payload(
    ss_ue: &[u8; 32],
    c1: &[u8],
    c2: &[u8; MAC_TAG_LEN],
) -> Result<(Supi, [u8; MLKEM_EK_LEN]), DeconcealError> {
    let keys = seal_keys(ss_ue);
    if !ct_eq(&hmac_sha256(keys.k2.as_ref(), c1), c2) {
        return Err(DeconcealError::MacMismatch);
    }
    let supi_len = c1
        .len()
        .checked_sub(MLKEM_EK_LEN)
        .filter(|n| (1..=SUPI_MAX_LEN).contains(n))
        .ok_or(DeconcealError::BadC1Length(c1.len()))?;
    let mut plain = Zeroizing::new(c1.to_vec());
    ctr_apply(&keys.k1, &mut plain);
    let supi = Supi(plain[..supi_len].to_vec());
    let pk1 = plain[supi_len..].try_into().unwrap();
    Ok((supi, pk1))
}

/// Conceal `supi` to the home network key `pk_hn`.
pub fn conceal_supi<R: CryptoRng + ?Sized>(
    supi: &Supi,
    pk_hn: &XWingPublicKey,
    provider: &dyn PrimitiveProvider,
    rng: &mut R,
) -> Result<ConcealmentResult, IdentityError> {
    let ue = xwing::keygen(provider, rng);
    let eseed = Eseed::from_keypair(&ue.sk, &ue.pk);
    let (ss_ue, c0) = xwing::encapsulate(provider, pk_hn, Some(&eseed), rng)?;
    let (c1, c2) = seal_payload(ss_ue.as_bytes(), supi, ue.pk.mlkem_part());
    Ok(ConcealmentResult {
        suci: Suci { c0, c1, c2 },
        sk_ue: ue.sk,
        pk_ue: ue.pk,
    })
}

/// Recover `(SUPI, pk1_UE)`; a bad tag is the protocol's silent abort.
pub fn deconceal_suci(
    suci: &Suci,
    sk_hn: &XWingSecretKey,
    provider: &dyn PrimitiveProvider,
) -> Result<(Supi, [u8; MLKEM_EK_LEN]), DeconcealError> {
    let ss_ue: SharedSecret = xwing::decapsulate(provider, &suci.c0, sk_hn);
    open_payload(ss_ue.as_bytes(), &suci.c1, &suci.c2)
}
