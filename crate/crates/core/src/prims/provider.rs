use std::any::Any;
use std::fmt;
use std::sync::Arc;

use ml_kem::array::Array;
use ml_kem::{Decapsulate, DecapsulationKey, EncapsulationKey, KeyExport, MlKem768};
use thiserror::Error;
use zeroize::Zeroizing;

pub const MLKEM_EK_LEN: usize = 1184;
pub const MLKEM_CT_LEN: usize = 1088;
pub const X25519_LEN: usize = 32;

/// The X25519 base point, u = 9.
pub const X25519_BASE_POINT: [u8; 32] = {
    let mut p = [0u8; 32];
    p[0] = 9;
    p
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("ML-KEM encapsulation key failed validation")]
    MalformedEncapsulationKey,
}

/// ML-KEM-768 decapsulation key.
///
/// Always carries the 64-byte `d ∥ z` seed; a provider may attach its own
/// expanded form so repeated decapsulations skip key generation.
#[derive(Clone)]
pub struct MlKemDecapsKey {
    seed: Zeroizing<[u8; 64]>,
    expanded: Option<Arc<dyn Any + Send + Sync>>,
}

impl MlKemDecapsKey {
    pub fn from_seed(d: &[u8; 32], z: &[u8; 32]) -> Self {
        let mut seed = Zeroizing::new([0u8; 64]);
        seed[..32].copy_from_slice(d);
        seed[32..].copy_from_slice(z);
        Self {
            seed,
            expanded: None,
        }
    }

    pub fn seed(&self) -> &[u8; 64] {
        &self.seed
    }

    fn with_expanded<T: Any + Send + Sync>(mut self, value: T) -> Self {
        self.expanded = Some(Arc::new(value));
        self
    }

    fn expanded<T: Any>(&self) -> Option<&T> {
        self.expanded.as_deref().and_then(|e| e.downcast_ref())
    }
}

impl fmt::Debug for MlKemDecapsKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MlKemDecapsKey(..)")
    }
}

/// ML-KEM-768 and X25519 as black boxes.
///
/// Encapsulation randomness `m` is passed in so callers can drive it from a
/// seeded generator; implementations must be stateless.
pub trait PrimitiveProvider: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// ML-KEM.KeyGen_internal(d, z).
    fn mlkem_keygen_internal(&self, d: &[u8; 32], z: &[u8; 32])
        -> (MlKemDecapsKey, [u8; MLKEM_EK_LEN]);

    /// ML-KEM.Encaps_internal(ek, m) -> (shared key, ciphertext).
    fn mlkem_encaps(
        &self,
        ek: &[u8; MLKEM_EK_LEN],
        m: &[u8; 32],
    ) -> Result<([u8; 32], [u8; MLKEM_CT_LEN]), ProviderError>;

    /// ML-KEM.Decaps with implicit rejection; never fails.
    fn mlkem_decaps(&self, c1: &[u8; MLKEM_CT_LEN], dk: &MlKemDecapsKey) -> [u8; 32];

    /// X25519(scalar, u-coordinate) with RFC 7748 clamping.
    fn x25519_dh(&self, scalar: &[u8; 32], point: &[u8; 32]) -> [u8; 32];

    fn x25519_base_point(&self) -> [u8; 32] {
        X25519_BASE_POINT
    }
}

/// Backend over the RustCrypto `ml-kem` and dalek `x25519-dalek` crates.
#[derive(Debug, Default, Clone, Copy)]
pub struct RustCryptoProvider;

type Dk768 = DecapsulationKey<MlKem768>;
type Ek768 = EncapsulationKey<MlKem768>;

impl RustCryptoProvider {
    fn dk_from_seed(seed: &[u8; 64]) -> Dk768 {
        Dk768::from_seed(Array::from(*seed))
    }
}

impl PrimitiveProvider for RustCryptoProvider {
    fn name(&self) -> &'static str {
        "rustcrypto"
    }

    fn mlkem_keygen_internal(
        &self,
        d: &[u8; 32],
        z: &[u8; 32],
    ) -> (MlKemDecapsKey, [u8; MLKEM_EK_LEN]) {
        let handle = MlKemDecapsKey::from_seed(d, z);
        let dk = Self::dk_from_seed(handle.seed());
        let ek: [u8; MLKEM_EK_LEN] = dk.encapsulation_key().to_bytes().into();
        (handle.with_expanded(dk), ek)
    }

    fn mlkem_encaps(
        &self,
        ek: &[u8; MLKEM_EK_LEN],
        m: &[u8; 32],
    ) -> Result<([u8; 32], [u8; MLKEM_CT_LEN]), ProviderError> {
        let ek = Ek768::new(&Array::from(*ek)).map_err(|_| ProviderError::MalformedEncapsulationKey)?;
        let (ct, ss) = ek.encapsulate_deterministic(&Array::from(*m));
        Ok((ss.into(), ct.into()))
    }

    fn mlkem_decaps(&self, c1: &[u8; MLKEM_CT_LEN], dk: &MlKemDecapsKey) -> [u8; 32] {
        let ct = Array::from(*c1);
        match dk.expanded::<Dk768>() {
            Some(expanded) => expanded.decapsulate(&ct).into(),
            None => Self::dk_from_seed(dk.seed()).decapsulate(&ct).into(),
        }
    }

    fn x25519_dh(&self, scalar: &[u8; 32], point: &[u8; 32]) -> [u8; 32] {
        x25519_dalek::x25519(*scalar, *point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlkem_round_trip() {
        let p = RustCryptoProvider;
        let (dk, ek) = p.mlkem_keygen_internal(&[1; 32], &[2; 32]);
        let (ss, ct) = p.mlkem_encaps(&ek, &[3; 32]).unwrap();
        assert_eq!(p.mlkem_decaps(&ct, &dk), ss);
    }

    #[test]
    fn decaps_without_cached_expansion() {
        let p = RustCryptoProvider;
        let (dk, ek) = p.mlkem_keygen_internal(&[5; 32], &[6; 32]);
        let (ss, ct) = p.mlkem_encaps(&ek, &[7; 32]).unwrap();
        let bare = MlKemDecapsKey::from_seed(&[5; 32], &[6; 32]);
        assert_eq!(p.mlkem_decaps(&ct, &bare), ss);
        assert_eq!(dk.seed(), bare.seed());
    }

    #[test]
    fn x25519_commutes() {
        let p = RustCryptoProvider;
        let base = p.x25519_base_point();
        let a = [0x11; 32];
        let b = [0x22; 32];
        let pa = p.x25519_dh(&a, &base);
        let pb = p.x25519_dh(&b, &base);
        assert_eq!(p.x25519_dh(&a, &pb), p.x25519_dh(&b, &pa));
    }

    #[test]
    fn malformed_ek_is_rejected() {
        // every coefficient 0xfff > q
        let ek = [0xffu8; MLKEM_EK_LEN];
        assert_eq!(
            RustCryptoProvider.mlkem_encaps(&ek, &[0; 32]),
            Err(ProviderError::MalformedEncapsulationKey)
        );
    }
}
