use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::prims::{
    MlKemDecapsKey, PrimitiveProvider, ProviderError, MLKEM_CT_LEN, MLKEM_EK_LEN, X25519_BASE_POINT,
};

/// Ground truth captured while the honest parties run. Break-oracle rules
/// consult it instead of solving discrete logs or lattice problems.
#[derive(Debug, Default, Clone)]
pub struct Trapdoors {
    /// X25519 public value -> scalar.
    pub x25519: HashMap<[u8; 32], [u8; 32]>,
    /// ML-KEM ciphertext -> shared key.
    pub mlkem: HashMap<Vec<u8>, [u8; 32]>,
}

/// Wraps a backend and records every base-point multiplication and every
/// ML-KEM encapsulation.
#[derive(Debug)]
pub struct RecordingProvider {
    inner: Arc<dyn PrimitiveProvider>,
    log: Mutex<Trapdoors>,
}

impl RecordingProvider {
    pub fn new(inner: Arc<dyn PrimitiveProvider>) -> Self {
        Self {
            inner,
            log: Mutex::new(Trapdoors::default()),
        }
    }

    pub fn inner(&self) -> &Arc<dyn PrimitiveProvider> {
        &self.inner
    }

    pub fn trapdoors(&self) -> Trapdoors {
        self.log.lock().expect("trapdoor log poisoned").clone()
    }
}

impl PrimitiveProvider for RecordingProvider {
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn mlkem_keygen_internal(
        &self,
        d: &[u8; 32],
        z: &[u8; 32],
    ) -> (MlKemDecapsKey, [u8; MLKEM_EK_LEN]) {
        self.inner.mlkem_keygen_internal(d, z)
    }

    fn mlkem_encaps(
        &self,
        ek: &[u8; MLKEM_EK_LEN],
        m: &[u8; 32],
    ) -> Result<([u8; 32], [u8; MLKEM_CT_LEN]), ProviderError> {
        let (ss, c1) = self.inner.mlkem_encaps(ek, m)?;
        self.log
            .lock()
            .expect("trapdoor log poisoned")
            .mlkem
            .insert(c1.to_vec(), ss);
        Ok((ss, c1))
    }

    fn mlkem_decaps(&self, c1: &[u8; MLKEM_CT_LEN], dk: &MlKemDecapsKey) -> [u8; 32] {
        self.inner.mlkem_decaps(c1, dk)
    }

    fn x25519_dh(&self, scalar: &[u8; 32], point: &[u8; 32]) -> [u8; 32] {
        let out = self.inner.x25519_dh(scalar, point);
        if *point == X25519_BASE_POINT {
            self.log
                .lock()
                .expect("trapdoor log poisoned")
                .x25519
                .insert(out, *scalar);
        }
        out
    }
}
