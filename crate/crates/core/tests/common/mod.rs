//! Shared generators for the fuzz and acceptance targets.

use aka_hpqc::aka::{Autn, Auts, AUTN_LEN, AUTS_LEN};
use aka_hpqc::identity::{Suci, Supi};
use aka_hpqc::wire::{Envelope, Message, SessionId};
use aka_hpqc::xwing::XWingCiphertext;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;

pub const TRIALS: usize = 10_000;

pub fn bytes<const N: usize>(rng: &mut ChaCha20Rng) -> [u8; N] {
    let mut b = [0u8; N];
    rng.fill_bytes(&mut b);
    b
}

pub fn vec(rng: &mut ChaCha20Rng, n: usize) -> Vec<u8> {
    let mut b = vec![0u8; n];
    rng.fill_bytes(&mut b);
    b
}

fn suci(rng: &mut ChaCha20Rng) -> Suci {
    let supi_len = rng.random_range(1..=64);
    Suci {
        c0: XWingCiphertext::from_bytes(bytes(rng)),
        c1: vec(rng, supi_len + 1184),
        c2: bytes(rng),
    }
}

pub fn random_envelope(rng: &mut ChaCha20Rng) -> Envelope {
    let msg = match rng.random_range(0..9) {
        0 => Message::Registration { suci: suci(rng) },
        1 => {
            let n = rng.random_range(0..=200);
            Message::AuthRequest {
                suci: suci(rng),
                id_sn: vec(rng, n),
            }
        }
        2 => Message::SeAvMsg {
            rand: XWingCiphertext::from_bytes(bytes(rng)),
            autn: Autn::from_bytes(&bytes::<AUTN_LEN>(rng)),
            hxres_star: bytes(rng),
        },
        3 => Message::Challenge {
            rand: XWingCiphertext::from_bytes(bytes(rng)),
            autn: Autn::from_bytes(&bytes::<AUTN_LEN>(rng)),
        },
        4 => Message::Response { res_star: bytes(rng) },
        5 => Message::ResponseFwd { res_star: bytes(rng) },
        6 => Message::MacFailure,
        7 => Message::SyncFailure {
            auts: Auts::from_bytes(&bytes::<AUTS_LEN>(rng)),
            rand: XWingCiphertext::from_bytes(bytes(rng)),
            suci: suci(rng),
        },
        _ => {
            let n = rng.random_range(1..=64);
            Message::KeyRelease {
                supi: Supi::new(&vec(rng, n)).unwrap(),
                k_seaf: bytes(rng),
            }
        }
    };
    Envelope {
        session: SessionId(bytes(rng)),
        msg,
    }
}

/// TLV fields in an encoded message.
pub fn field_count(m: &Message) -> usize {
    match m {
        Message::Registration { .. } => 3,
        Message::AuthRequest { .. } => 4,
        Message::SeAvMsg { .. } => 3,
        Message::Challenge { .. } => 2,
        Message::Response { .. } | Message::ResponseFwd { .. } => 1,
        Message::MacFailure => 0,
        Message::SyncFailure { .. } => 5,
        Message::KeyRelease { .. } => 2,
    }
}
