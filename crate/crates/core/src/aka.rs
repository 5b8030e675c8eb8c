//! Authentication vectors, challenge processing, resynchronisation and the
//! key hierarchy.
//!
//! `RAND` is the home network's X-Wing ciphertext to the UE's per-session
//! key, and every f-function is keyed by `k` over `RAND ⊕ HPK`, where
//! `HPK = X9.63-KDF(ss_HN, "", 8960)`.
//!
//! ```text
//! masked  = RAND ⊕ HPK
//! MAC     = f1(k, SQN ∥ AMF ∥ masked)     AK  = f5(k, masked)
//! CK      = f3(k, masked)                 IK  = f4(k, masked)
//! XRES    = f2(k, masked)
//! XRES*   = HMAC(CK ∥ IK, ID_SN ∥ RAND ∥ XRES)
//! HXRES*  = LEFT(128, SHA3-256(RAND ∥ XRES*))
//! K_AUSF  = HMAC(CK ∥ IK, ID_SN ∥ (AK ⊕ SQN) ∥ HPK)
//! K_SEAF  = HMAC(K_AUSF, ID_SN)
//! ```

use std::fmt;

use rand::CryptoRng;
use thiserror::Error;
use zeroize::{Zeroize, ZeroizeOnDrop, Zeroizing};

use crate::identity::Supi;
use crate::prims::{
    ct_eq, f_array, hmac_sha256, hmac_sha256_parts, kdf_hmac, kdf_x963, sha3_256_parts, xor,
    xor_array, FTag, LongTermKey, PrimitiveProvider, MLKEM_CT_LEN, MLKEM_EK_LEN,
};
use crate::xwing::{self, XWingCiphertext, XWingError, XWingPublicKey, XWingSecretKey, CIPHERTEXT_LEN};

pub const RAND_LEN: usize = CIPHERTEXT_LEN;
pub const HPK_LEN: usize = RAND_LEN;
pub const HPK_BITS: usize = HPK_LEN * 8;
pub const SQN_LEN: usize = 6;
pub const AMF_LEN: usize = 2;
pub const MAC_LEN: usize = 8;
pub const AK_LEN: usize = 6;
pub const RES_LEN: usize = 16;
pub const RES_STAR_LEN: usize = 32;
pub const HXRES_STAR_LEN: usize = 16;
pub const AUTN_LEN: usize = SQN_LEN + AMF_LEN + MAC_LEN;
pub const AUTS_LEN: usize = AUTN_LEN;
pub const KEY_LEN: usize = 32;

pub const DEFAULT_DELTA: u64 = 1 << 28;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AkaError {
    #[error("{what} must be {expected} bytes, got {got}")]
    BadLength {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("sequence number would exceed 2^48 - 1")]
    SqnOverflow,
    #[error("AUTS MAC* does not verify; subscriber state unchanged")]
    ResyncRejected,
    #[error(transparent)]
    XWing(#[from] XWingError),
}

fn check_len(what: &'static str, expected: usize, got: &[u8]) -> Result<(), AkaError> {
    if got.len() != expected {
        return Err(AkaError::BadLength {
            what,
            expected,
            got: got.len(),
        });
    }
    Ok(())
}

/// 48-bit sequence number. Never wraps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Sqn(u64);

impl Sqn {
    pub const MAX: u64 = (1 << 48) - 1;

    pub fn new(value: u64) -> Result<Self, AkaError> {
        if value > Self::MAX {
            return Err(AkaError::SqnOverflow);
        }
        Ok(Self(value))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn to_bytes(self) -> [u8; SQN_LEN] {
        self.0.to_be_bytes()[2..].try_into().unwrap()
    }

    pub fn from_bytes(bytes: [u8; SQN_LEN]) -> Self {
        let mut wide = [0u8; 8];
        wide[2..].copy_from_slice(&bytes);
        Self(u64::from_be_bytes(wide))
    }

    pub fn next(self) -> Result<Self, AkaError> {
        Self::new(self.0 + 1)
    }
}

impl fmt::Display for Sqn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Authentication management field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Amf(pub [u8; AMF_LEN]);

impl Default for Amf {
    /// Separation bit set.
    fn default() -> Self {
        Amf([0x80, 0x00])
    }
}

impl Amf {
    pub fn from_u16(v: u16) -> Self {
        Amf(v.to_be_bytes())
    }
}

/// `(AK ⊕ SQN_HN) ∥ AMF ∥ MAC`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Autn {
    pub conc: [u8; SQN_LEN],
    pub amf: Amf,
    pub mac: [u8; MAC_LEN],
}

/// `(AK* ⊕ SQN_UE) ∥ AMF ∥ MAC*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Auts {
    pub conc_star: [u8; SQN_LEN],
    pub amf: Amf,
    pub mac_star: [u8; MAC_LEN],
}

fn pack16(a: &[u8; 6], amf: &Amf, m: &[u8; 8]) -> [u8; 16] {
    let mut out = [0u8; 16];
    out[..6].copy_from_slice(a);
    out[6..8].copy_from_slice(&amf.0);
    out[8..].copy_from_slice(m);
    out
}

fn unpack16(b: &[u8; 16]) -> ([u8; 6], Amf, [u8; 8]) {
    (
        b[..6].try_into().unwrap(),
        Amf(b[6..8].try_into().unwrap()),
        b[8..].try_into().unwrap(),
    )
}

impl Autn {
    pub fn to_bytes(&self) -> [u8; AUTN_LEN] {
        pack16(&self.conc, &self.amf, &self.mac)
    }

    pub fn from_bytes(bytes: &[u8; AUTN_LEN]) -> Self {
        let (conc, amf, mac) = unpack16(bytes);
        Self { conc, amf, mac }
    }
}

impl Auts {
    pub fn to_bytes(&self) -> [u8; AUTS_LEN] {
        pack16(&self.conc_star, &self.amf, &self.mac_star)
    }

    pub fn from_bytes(bytes: &[u8; AUTS_LEN]) -> Self {
        let (conc_star, amf, mac_star) = unpack16(bytes);
        Self {
            conc_star,
            amf,
            mac_star,
        }
    }
}

/// `X9.63-KDF(ss_HN, "", 8960)`, the 1120-byte mask over RAND.
#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct Hpk(Vec<u8>);

impl Hpk {
    pub fn from_shared_secret(ss: &[u8; 32]) -> Self {
        Self(kdf_x963(ss, b"", HPK_BITS).expect("fixed, byte-aligned length"))
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, AkaError> {
        check_len("HPK", HPK_LEN, bytes)?;
        Ok(Self(bytes.to_vec()))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Hpk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Hpk(..)")
    }
}

#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct KeyHierarchy {
    pub hpk: Vec<u8>,
    pub mac: [u8; MAC_LEN],
    pub ak: [u8; AK_LEN],
    pub ck: [u8; 16],
    pub ik: [u8; 16],
    /// RES on the UE, XRES on the HN.
    pub res: [u8; RES_LEN],
    pub res_star: [u8; RES_STAR_LEN],
    pub hxres_star: [u8; HXRES_STAR_LEN],
    pub k_ausf: [u8; KEY_LEN],
    pub k_seaf: [u8; KEY_LEN],
}

impl fmt::Debug for KeyHierarchy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("KeyHierarchy(..)")
    }
}

/// `LEFT(128, SHA3-256(rand ∥ res*))`.
pub fn hres_star(rand: &[u8], res_star: &[u8]) -> [u8; HXRES_STAR_LEN] {
    sha3_256_parts(&[rand, res_star])[..HXRES_STAR_LEN]
        .try_into()
        .unwrap()
}

/// Every session key as a function of `(k, rand, hpk, sqn, amf, id_sn)`.
pub fn derive_hierarchy(
    k: &LongTermKey,
    rand: &[u8],
    hpk: &[u8],
    sqn: Sqn,
    amf: Amf,
    id_sn: &[u8],
) -> Result<KeyHierarchy, AkaError> {
    check_len("RAND", RAND_LEN, rand)?;
    check_len("HPK", HPK_LEN, hpk)?;
    let masked = Zeroizing::new(xor(rand, hpk));
    let sqn_b = sqn.to_bytes();

    let mut mac_in = Vec::with_capacity(SQN_LEN + AMF_LEN + RAND_LEN);
    mac_in.extend_from_slice(&sqn_b);
    mac_in.extend_from_slice(&amf.0);
    mac_in.extend_from_slice(&masked);
    let mac = f_array(FTag::F1, k, &mac_in);

    let ak: [u8; AK_LEN] = f_array(FTag::F5, k, &masked);
    let ck: [u8; 16] = f_array(FTag::F3, k, &masked);
    let ik: [u8; 16] = f_array(FTag::F4, k, &masked);
    let res: [u8; RES_LEN] = f_array(FTag::F2, k, &masked);

    let mut ckik = Zeroizing::new([0u8; 32]);
    ckik[..16].copy_from_slice(&ck);
    ckik[16..].copy_from_slice(&ik);

    let res_star = hmac_sha256_parts(ckik.as_ref(), &[id_sn, rand, &res]);
    let hxres_star = hres_star(rand, &res_star);
    let conc = xor_array(&ak, &sqn_b);
    let k_ausf = hmac_sha256_parts(ckik.as_ref(), &[id_sn, &conc, hpk]);
    let k_seaf = kdf_hmac(&k_ausf, id_sn);

    Ok(KeyHierarchy {
        hpk: hpk.to_vec(),
        mac,
        ak,
        ck,
        ik,
        res,
        res_star,
        hxres_star,
        k_ausf,
        k_seaf,
    })
}

/// Home-network record for one subscriber.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubscriberRecord {
    pub supi: Supi,
    pub k: LongTermKey,
    /// Next sequence number the HN will put in an AUTN.
    pub sqn_hn: Sqn,
    pub amf: Amf,
}

/// Serving-network authentication vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeAv {
    pub rand: XWingCiphertext,
    pub autn: Autn,
    pub hxres_star: [u8; HXRES_STAR_LEN],
}

/// Home-network authentication vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeAv {
    pub rand: XWingCiphertext,
    pub autn: Autn,
    pub xres_star: [u8; RES_STAR_LEN],
    pub k_ausf: [u8; KEY_LEN],
}

impl HeAv {
    pub fn to_se_av(&self) -> SeAv {
        SeAv {
            rand: self.rand.clone(),
            autn: self.autn,
            hxres_star: hres_star(self.rand.as_bytes(), &self.xres_star),
        }
    }
}

/// Output of [`generate_av`]. The HN keeps `hierarchy` for response
/// verification and resync.
#[derive(Debug, Clone)]
pub struct GeneratedAv {
    pub he_av: HeAv,
    pub se_av: SeAv,
    pub subscriber: SubscriberRecord,
    /// Computed with the pre-increment SQN.
    pub hierarchy: KeyHierarchy,
    pub sqn_used: Sqn,
}

/// Build one vector for the UE whose SUCI carried `c0` and `pk1_ue`.
pub fn generate_av<R: CryptoRng + ?Sized>(
    sub: &SubscriberRecord,
    suci_c0: &XWingCiphertext,
    pk1_ue: &[u8; MLKEM_EK_LEN],
    id_sn: &[u8],
    provider: &dyn PrimitiveProvider,
    rng: &mut R,
) -> Result<GeneratedAv, AkaError> {
    let next_sqn = sub.sqn_hn.next()?;
    let pk_ue = XWingPublicKey::from_parts(pk1_ue, suci_c0.x25519_part());
    let (ss_hn, c_hn) = xwing::encapsulate(provider, &pk_ue, None, rng)?;
    let hpk = Hpk::from_shared_secret(ss_hn.as_bytes());
    let sqn = sub.sqn_hn;
    let hierarchy = derive_hierarchy(&sub.k, c_hn.as_bytes(), hpk.as_bytes(), sqn, sub.amf, id_sn)?;
    let autn = Autn {
        conc: xor_array(&hierarchy.ak, &sqn.to_bytes()),
        amf: sub.amf,
        mac: hierarchy.mac,
    };
    let he_av = HeAv {
        rand: c_hn,
        autn,
        xres_star: hierarchy.res_star,
        k_ausf: hierarchy.k_ausf,
    };
    let se_av = he_av.to_se_av();
    let mut subscriber = sub.clone();
    subscriber.sqn_hn = next_sqn;
    Ok(GeneratedAv {
        he_av,
        se_av,
        subscriber,
        hierarchy,
        sqn_used: sqn,
    })
}

/// `SQN_UE < SQN_HN < SQN_UE + Δ`, without modular wrap.
pub fn sqn_window_check(sqn_ue: u64, sqn_hn: u64, delta: u64) -> bool {
    sqn_ue < sqn_hn && sqn_hn - sqn_ue < delta
}

/// `(f5*(k, masked) ⊕ SQN_UE) ∥ AMF ∥ f1*(k, SQN_UE ∥ AMF ∥ masked)`.
pub fn make_auts(
    k: &LongTermKey,
    rand: &[u8],
    hpk: &[u8],
    sqn_ue: Sqn,
    amf: Amf,
) -> Result<Auts, AkaError> {
    check_len("RAND", RAND_LEN, rand)?;
    check_len("HPK", HPK_LEN, hpk)?;
    let masked = Zeroizing::new(xor(rand, hpk));
    Ok(auts_from_masked(k, &masked, sqn_ue, amf))
}

fn auts_from_masked(k: &LongTermKey, masked: &[u8], sqn_ue: Sqn, amf: Amf) -> Auts {
    let ak_star: [u8; AK_LEN] = f_array(FTag::F5S, k, masked);
    Auts {
        conc_star: xor_array(&ak_star, &sqn_ue.to_bytes()),
        amf,
        mac_star: mac_star(k, masked, sqn_ue, amf),
    }
}

fn mac_star(k: &LongTermKey, masked: &[u8], sqn_ue: Sqn, amf: Amf) -> [u8; MAC_LEN] {
    let mut input = Vec::with_capacity(SQN_LEN + AMF_LEN + masked.len());
    input.extend_from_slice(&sqn_ue.to_bytes());
    input.extend_from_slice(&amf.0);
    input.extend_from_slice(masked);
    f_array(FTag::F1S, k, &input)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChallengeOutcome {
    /// AUTN MAC did not verify.
    MacFailure,
    /// MAC fine, SQN outside the window.
    SyncFailure(Auts),
    Success {
        res_star: [u8; RES_STAR_LEN],
        k_seaf: [u8; KEY_LEN],
        keys: Box<KeyHierarchy>,
    },
}

/// UE side of the challenge. `sk_ue` is consumed and wiped whatever the
/// outcome; the returned SQN is the UE's new counter.
#[allow(clippy::too_many_arguments)]
pub fn ue_process_challenge(
    k: &LongTermKey,
    sqn_ue: Sqn,
    sk_ue: XWingSecretKey,
    rand: &XWingCiphertext,
    autn: &Autn,
    id_sn: &[u8],
    delta: u64,
    provider: &dyn PrimitiveProvider,
) -> (ChallengeOutcome, Sqn) {
    let ss_hn = xwing::decapsulate(provider, rand, &sk_ue);
    drop(sk_ue);
    let hpk = Hpk::from_shared_secret(ss_hn.as_bytes());
    let masked = Zeroizing::new(xor(rand.as_bytes(), hpk.as_bytes()));

    let ak: [u8; AK_LEN] = f_array(FTag::F5, k, &masked);
    let sqn_hn = Sqn::from_bytes(xor_array(&autn.conc, &ak));

    let mut mac_in = Vec::with_capacity(SQN_LEN + AMF_LEN + RAND_LEN);
    mac_in.extend_from_slice(&sqn_hn.to_bytes());
    mac_in.extend_from_slice(&autn.amf.0);
    mac_in.extend_from_slice(&masked);
    let xmac: [u8; MAC_LEN] = f_array(FTag::F1, k, &mac_in);
    if !ct_eq(&xmac, &autn.mac) {
        return (ChallengeOutcome::MacFailure, sqn_ue);
    }

    if !sqn_window_check(sqn_ue.value(), sqn_hn.value(), delta) {
        let auts = auts_from_masked(k, &masked, sqn_ue, autn.amf);
        return (ChallengeOutcome::SyncFailure(auts), sqn_ue);
    }

    let keys = derive_hierarchy(k, rand.as_bytes(), hpk.as_bytes(), sqn_hn, autn.amf, id_sn)
        .expect("lengths fixed by types");
    (
        ChallengeOutcome::Success {
            res_star: keys.res_star,
            k_seaf: keys.k_seaf,
            keys: Box::new(keys),
        },
        sqn_hn,
    )
}

/// HN handling of an AUTS: recover `SQN_UE`, check MAC*, set
/// `SQN_HN = SQN_UE + 1`.
pub fn hn_resync(
    sub: &SubscriberRecord,
    auts: &Auts,
    rand: &[u8],
    hpk: &[u8],
) -> Result<SubscriberRecord, AkaError> {
    check_len("RAND", RAND_LEN, rand)?;
    check_len("HPK", HPK_LEN, hpk)?;
    let masked = Zeroizing::new(xor(rand, hpk));
    let ak_star: [u8; AK_LEN] = f_array(FTag::F5S, &sub.k, &masked);
    let sqn_ue = Sqn::from_bytes(xor_array(&auts.conc_star, &ak_star));
    let expected = mac_star(&sub.k, &masked, sqn_ue, auts.amf);
    if !ct_eq(&expected, &auts.mac_star) {
        return Err(AkaError::ResyncRejected);
    }
    let mut out = sub.clone();
    out.sqn_hn = sqn_ue.next()?;
    Ok(out)
}

/// SN gate: `LEFT(128, SHA3-256(rand ∥ res*)) == HXRES*`.
pub fn sn_verify_response(rand: &[u8], res_star: &[u8], stored_hxres_star: &[u8]) -> bool {
    ct_eq(&hres_star(rand, res_star), stored_hxres_star)
}

/// HN gate: `RES* == XRES*`.
pub fn hn_verify_response(xres_star: &[u8], res_star: &[u8]) -> bool {
    ct_eq(xres_star, res_star)
}

const KEY_CONFIRM_LABEL: &[u8] = b"HPQC key confirmation";

/// Tag proving possession of `k_seaf` over a peer nonce.
pub fn key_confirmation_tag(k_seaf: &[u8; KEY_LEN], nonce: &[u8]) -> [u8; 32] {
    hmac_sha256_parts(k_seaf, &[KEY_CONFIRM_LABEL, nonce])
}

pub fn verify_key_confirmation(k_seaf: &[u8; KEY_LEN], nonce: &[u8], tag: &[u8]) -> bool {
    ct_eq(&key_confirmation_tag(k_seaf, nonce), tag)
}

/// Digest for logging keys without exposing them.
pub fn key_digest(key: &[u8]) -> [u8; 32] {
    hmac_sha256(b"HPQC key digest", key)
}

const _: () = assert!(MLKEM_CT_LEN + 32 == RAND_LEN);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::conceal_supi;
    use crate::prims::RustCryptoProvider;
    use crate::xwing::keygen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    const ID_SN: &[u8] = b"5G:mnc093.mcc208.3gppnetwork.org";

    struct World {
        rng: ChaCha20Rng,
        hn: xwing::XWingKeyPair,
        sub: SubscriberRecord,
        sqn_ue: Sqn,
    }

    fn world() -> World {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let hn = keygen(&RustCryptoProvider, &mut rng);
        let sub = SubscriberRecord {
            supi: Supi::new(&[0x42; 16]).unwrap(),
            k: LongTermKey::new(&[0x22; 32]).unwrap(),
            sqn_hn: Sqn::new(33).unwrap(),
            amf: Amf::default(),
        };
        World {
            rng,
            hn,
            sub,
            sqn_ue: Sqn::new(32).unwrap(),
        }
    }

    /// One conceal + AV generation; returns (UE sk, generated AV).
    fn round(w: &mut World) -> (XWingSecretKey, GeneratedAv) {
        let p = RustCryptoProvider;
        let c = conceal_supi(&w.sub.supi, &w.hn.pk, &p, &mut w.rng).unwrap();
        let (_, pk1) = crate::identity::deconceal_suci(&c.suci, &w.hn.sk, &p).unwrap();
        let av = generate_av(&w.sub, &c.suci.c0, &pk1, ID_SN, &p, &mut w.rng).unwrap();
        (c.sk_ue, av)
    }

    #[test]
    fn sqn_bytes_round_trip() {
        let s = Sqn::new(0x0000_1234_5678_9abc).unwrap();
        assert_eq!(s.to_bytes(), [0x12, 0x34, 0x56, 0x78, 0x9a, 0xbc]);
        assert_eq!(Sqn::from_bytes(s.to_bytes()), s);
        assert_eq!(Sqn::new(Sqn::MAX).unwrap().next(), Err(AkaError::SqnOverflow));
        assert!(Sqn::new(1 << 48).is_err());
    }

    #[test]
    fn window_edges() {
        assert!(sqn_window_check(5, 6, DEFAULT_DELTA));
        assert!(!sqn_window_check(5, 5, DEFAULT_DELTA));
        assert!(!sqn_window_check(5, 4, DEFAULT_DELTA));
        assert!(!sqn_window_check(5, 5 + DEFAULT_DELTA, DEFAULT_DELTA));
        assert!(sqn_window_check(5, 4 + DEFAULT_DELTA, DEFAULT_DELTA));
        assert!(!sqn_window_check(Sqn::MAX, Sqn::MAX, u64::MAX));
    }

    #[test]
    fn zero_hpk_leaves_rand_unmasked() {
        let k = LongTermKey::new(&[1; 32]).unwrap();
        let rand = [0x5au8; RAND_LEN];
        let h = derive_hierarchy(&k, &rand, &[0; HPK_LEN], Sqn::new(1).unwrap(), Amf::default(), b"sn").unwrap();
        assert_eq!(h.ak, f_array::<6>(FTag::F5, &k, &rand));
    }

    #[test]
    fn length_checks() {
        let k = LongTermKey::new(&[1; 32]).unwrap();
        let r = derive_hierarchy(&k, &[0; 140], &[0; 140], Sqn::default(), Amf::default(), b"");
        assert!(matches!(r, Err(AkaError::BadLength { expected: 1120, got: 140, .. })));
    }

    #[test]
    fn honest_round_agrees() {
        let mut w = world();
        let (sk_ue, av) = round(&mut w);
        assert_eq!(av.subscriber.sqn_hn.value(), w.sub.sqn_hn.value() + 1);
        assert_eq!(
            av.se_av.hxres_star,
            hres_star(av.he_av.rand.as_bytes(), &av.he_av.xres_star)
        );
        let (outcome, sqn_ue) = ue_process_challenge(
            &w.sub.k, w.sqn_ue, sk_ue, &av.se_av.rand, &av.se_av.autn, ID_SN, DEFAULT_DELTA,
            &RustCryptoProvider,
        );
        let ChallengeOutcome::Success { res_star, k_seaf, keys } = outcome else {
            panic!("expected success, got {outcome:?}");
        };
        assert_eq!(*keys, av.hierarchy);
        assert_eq!(sqn_ue, w.sub.sqn_hn);
        assert!(sn_verify_response(av.se_av.rand.as_bytes(), &res_star, &av.se_av.hxres_star));
        assert!(hn_verify_response(&av.he_av.xres_star, &res_star));
        assert_eq!(k_seaf, kdf_hmac(&av.he_av.k_ausf, ID_SN));
    }

    #[test]
    fn replayed_challenge_is_sync_failure() {
        let mut w = world();
        let (sk_ue, av) = round(&mut w);
        let p = RustCryptoProvider;
        let (_, sqn_ue) = ue_process_challenge(
            &w.sub.k, w.sqn_ue, sk_ue.clone(), &av.se_av.rand, &av.se_av.autn, ID_SN,
            DEFAULT_DELTA, &p,
        );
        let (outcome, after) = ue_process_challenge(
            &w.sub.k, sqn_ue, sk_ue, &av.se_av.rand, &av.se_av.autn, ID_SN, DEFAULT_DELTA, &p,
        );
        assert!(matches!(outcome, ChallengeOutcome::SyncFailure(_)));
        assert_eq!(after, sqn_ue);
    }

    #[test]
    fn flipped_mac_is_mac_failure() {
        let mut w = world();
        let (sk_ue, av) = round(&mut w);
        let mut autn = av.se_av.autn;
        autn.mac[0] ^= 0x01;
        let (outcome, sqn) = ue_process_challenge(
            &w.sub.k, w.sqn_ue, sk_ue, &av.se_av.rand, &autn, ID_SN, DEFAULT_DELTA,
            &RustCryptoProvider,
        );
        assert_eq!(outcome, ChallengeOutcome::MacFailure);
        assert_eq!(sqn, w.sqn_ue);
    }

    #[test]
    fn resync_then_success() {
        let mut w = world();
        // UE is ahead of the HN
        w.sqn_ue = Sqn::new(1000).unwrap();
        let (sk_ue, av) = round(&mut w);
        let p = RustCryptoProvider;
        let (outcome, _) = ue_process_challenge(
            &w.sub.k, w.sqn_ue, sk_ue, &av.se_av.rand, &av.se_av.autn, ID_SN, DEFAULT_DELTA, &p,
        );
        let ChallengeOutcome::SyncFailure(auts) = outcome else {
            panic!("expected sync failure");
        };
        let resynced =
            hn_resync(&av.subscriber, &auts, av.he_av.rand.as_bytes(), &av.hierarchy.hpk).unwrap();
        assert_eq!(resynced.sqn_hn.value(), 1001);

        let mut forged = auts;
        forged.mac_star[7] ^= 1;
        assert_eq!(
            hn_resync(&av.subscriber, &forged, av.he_av.rand.as_bytes(), &av.hierarchy.hpk),
            Err(AkaError::ResyncRejected)
        );

        w.sub = resynced;
        let (sk_ue, av) = round(&mut w);
        let (outcome, sqn) = ue_process_challenge(
            &w.sub.k, w.sqn_ue, sk_ue, &av.se_av.rand, &av.se_av.autn, ID_SN, DEFAULT_DELTA, &p,
        );
        assert!(matches!(outcome, ChallengeOutcome::Success { .. }));
        assert_eq!(sqn.value(), 1001);
    }

    #[test]
    fn cross_session_response_rejected() {
        let mut w = world();
        let (_, av1) = round(&mut w);
        w.sub = av1.subscriber.clone();
        let (_, av2) = round(&mut w);
        assert!(!sn_verify_response(
            av2.se_av.rand.as_bytes(),
            &av1.he_av.xres_star,
            &av2.se_av.hxres_star
        ));
        assert!(!hn_verify_response(&av2.he_av.xres_star, &av1.he_av.xres_star));
    }

    #[test]
    fn generate_av_refuses_overflow() {
        let mut w = world();
        w.sub.sqn_hn = Sqn::new(Sqn::MAX).unwrap();
        let c = conceal_supi(&w.sub.supi, &w.hn.pk, &RustCryptoProvider, &mut w.rng).unwrap();
        let r = generate_av(
            &w.sub, &c.suci.c0, c.pk_ue.mlkem_part(), ID_SN, &RustCryptoProvider, &mut w.rng,
        );
        assert_eq!(r.err(), Some(AkaError::SqnOverflow));
    }

    #[test]
    fn key_confirmation() {
        let k = [3u8; 32];
        let tag = key_confirmation_tag(&k, b"nonce");
        assert!(verify_key_confirmation(&k, b"nonce", &tag));
        assert!(!verify_key_confirmation(&[4; 32], b"nonce", &tag));
    }
}
