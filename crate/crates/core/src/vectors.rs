//! Line-oriented known-answer vectors.
//!
//! One record per line, space separated, first token names the kind,
//! remaining tokens are lowercase hex (or `-` for an absent field):
//!
//! ```text
//! xwing <protocol|draft|random> <sk> <pk> <eseed|-> <c> <ss>
//! hier  <k> <rand> <hpk> <sqn> <amf> <id_sn> <ck> <ik> <xres> <xres*> <hxres*> <k_ausf> <k_seaf>
//! seal  <ss_ue> <supi> <pk1> <c1> <c2>
//! auts  <k> <rand> <hpk> <sqn_ue> <amf> <auts>
//! mlkem <d||z> <ek> <c> <ss>
//! ```
//!
//! Lines starting with `#` and blank lines are ignored.

use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::aka::{derive_hierarchy, make_auts, Amf, Hpk, Sqn};
use crate::identity::{seal_payload, Supi};
use crate::prims::{LongTermKey, PrimitiveProvider};
use crate::sim::DEFAULT_ID_SN;
use crate::xwing::{self, Eseed, XWingCiphertext, XWingPublicKey, XWingSecretKey};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VectorError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: field `{field}` does not match")]
    Mismatch { line: usize, field: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XWingMode {
    /// Encapsulation seed sets `c2` verbatim; ML-KEM randomness is free.
    Protocol,
    /// IETF draft derandomised encapsulation.
    Draft,
    /// Fresh randomness; only decapsulation is checkable.
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    XWing {
        mode: XWingMode,
        sk: Vec<u8>,
        pk: Vec<u8>,
        eseed: Option<Vec<u8>>,
        c: Vec<u8>,
        ss: Vec<u8>,
    },
    /// `[k, rand, hpk, sqn, amf, id_sn, ck, ik, xres, xres*, hxres*, k_ausf, k_seaf]`
    Hier([Vec<u8>; 13]),
    /// `[ss_ue, supi, pk1, c1, c2]`
    Seal([Vec<u8>; 5]),
    /// `[k, rand, hpk, sqn_ue, amf, auts]`
    Auts([Vec<u8>; 6]),
    /// `[d||z, ek, c, ss]`
    MlKem([Vec<u8>; 4]),
}

const HIER_FIELDS: [&str; 13] = [
    "k", "rand", "hpk", "sqn", "amf", "id_sn", "ck", "ik", "xres", "xres*", "hxres*", "k_ausf",
    "k_seaf",
];

fn hex_field(line: usize, tok: &str) -> Result<Vec<u8>, VectorError> {
    hex::decode(tok).map_err(|e| VectorError::Parse {
        line,
        reason: format!("bad hex: {e}"),
    })
}

fn fields<const N: usize>(line: usize, toks: &[&str]) -> Result<[Vec<u8>; N], VectorError> {
    if toks.len() != N {
        return Err(VectorError::Parse {
            line,
            reason: format!("expected {N} fields, got {}", toks.len()),
        });
    }
    let v: Vec<Vec<u8>> = toks.iter().map(|t| hex_field(line, t)).collect::<Result<_, _>>()?;
    Ok(v.try_into().expect("length checked"))
}

/// Parse a vector file into `(line number, record)` pairs.
pub fn parse(text: &str) -> Result<Vec<(usize, Record)>, VectorError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let rec = match toks[0] {
            "xwing" => {
                if toks.len() != 7 {
                    return Err(VectorError::Parse {
                        line,
                        reason: format!("xwing needs 6 fields, got {}", toks.len() - 1),
                    });
                }
                let mode = match toks[1] {
                    "protocol" => XWingMode::Protocol,
                    "draft" => XWingMode::Draft,
                    "random" => XWingMode::Random,
                    m => {
                        return Err(VectorError::Parse {
                            line,
                            reason: format!("unknown mode {m:?}"),
                        })
                    }
                };
                let eseed = match toks[4] {
                    "-" => None,
                    t => Some(hex_field(line, t)?),
                };
                Record::XWing {
                    mode,
                    sk: hex_field(line, toks[2])?,
                    pk: hex_field(line, toks[3])?,
                    eseed,
                    c: hex_field(line, toks[5])?,
                    ss: hex_field(line, toks[6])?,
                }
            }
            "hier" => Record::Hier(fields(line, &toks[1..])?),
            "seal" => Record::Seal(fields(line, &toks[1..])?),
            "auts" => Record::Auts(fields(line, &toks[1..])?),
            "mlkem" => Record::MlKem(fields(line, &toks[1..])?),
            other => {
                return Err(VectorError::Parse {
                    line,
                    reason: format!("unknown record kind {other:?}"),
                })
            }
        };
        out.push((line, rec));
    }
    Ok(out)
}

fn check(line: usize, field: &'static str, got: &[u8], want: &[u8]) -> Result<(), VectorError> {
    if got == want {
        Ok(())
    } else {
        Err(VectorError::Mismatch { line, field })
    }
}

fn bad(line: usize, field: &'static str) -> VectorError {
    VectorError::Mismatch { line, field }
}

/// Recompute one record, failing on the first field that differs.
pub fn verify_record(
    line: usize,
    rec: &Record,
    p: &dyn PrimitiveProvider,
) -> Result<(), VectorError> {
    match rec {
        Record::XWing {
            mode,
            sk,
            pk,
            eseed,
            c,
            ss,
        } => {
            let sk = XWingSecretKey::from_slice(sk).map_err(|_| bad(line, "sk"))?;
            let kp = xwing::keygen_from_secret(p, sk);
            check(line, "pk", kp.pk.as_bytes(), pk)?;
            let ct = XWingCiphertext::from_slice(c).map_err(|_| bad(line, "c"))?;
            match (mode, eseed) {
                (XWingMode::Draft, Some(e)) => {
                    let e = Eseed::from_slice(e).map_err(|_| bad(line, "eseed"))?;
                    let (ss2, c2) = xwing::encapsulate_draft(p, &kp.pk, &e).map_err(|_| bad(line, "pk"))?;
                    check(line, "c", c2.as_bytes(), c)?;
                    check(line, "ss", ss2.as_bytes(), ss)?;
                }
                (XWingMode::Protocol, Some(e)) => {
                    let e = Eseed::from_slice(e).map_err(|_| bad(line, "eseed"))?;
                    check(line, "c", ct.x25519_part(), e.ecdh_public())?;
                }
                (XWingMode::Random, None) => {}
                _ => return Err(bad(line, "eseed")),
            }
            check(line, "ss", xwing::decapsulate(p, &ct, &kp.sk).as_bytes(), ss)
        }
        Record::Hier(f) => {
            let k = LongTermKey::new(&f[0]).map_err(|_| bad(line, "k"))?;
            let sqn = Sqn::from_bytes(f[3].as_slice().try_into().map_err(|_| bad(line, "sqn"))?);
            let amf: [u8; 2] = f[4].as_slice().try_into().map_err(|_| bad(line, "amf"))?;
            let h = derive_hierarchy(&k, &f[1], &f[2], sqn, Amf(amf), &f[5])
                .map_err(|_| bad(line, "rand"))?;
            let got: [&[u8]; 7] = [
                &h.ck,
                &h.ik,
                &h.res,
                &h.res_star,
                &h.hxres_star,
                &h.k_ausf,
                &h.k_seaf,
            ];
            for (i, g) in got.iter().enumerate() {
                check(line, HIER_FIELDS[6 + i], g, &f[6 + i])?;
            }
            Ok(())
        }
        Record::Seal(f) => {
            let ss: [u8; 32] = f[0].as_slice().try_into().map_err(|_| bad(line, "ss_ue"))?;
            let supi = Supi::new(&f[1]).map_err(|_| bad(line, "supi"))?;
            let pk1 = f[2].as_slice().try_into().map_err(|_| bad(line, "pk1"))?;
            let (c1, c2) = seal_payload(&ss, &supi, pk1);
            check(line, "c1", &c1, &f[3])?;
            check(line, "c2", &c2, &f[4])
        }
        Record::Auts(f) => {
            let k = LongTermKey::new(&f[0]).map_err(|_| bad(line, "k"))?;
            let sqn = Sqn::from_bytes(f[3].as_slice().try_into().map_err(|_| bad(line, "sqn_ue"))?);
            let amf: [u8; 2] = f[4].as_slice().try_into().map_err(|_| bad(line, "amf"))?;
            let auts = make_auts(&k, &f[1], &f[2], sqn, Amf(amf)).map_err(|_| bad(line, "rand"))?;
            check(line, "auts", &auts.to_bytes(), &f[5])
        }
        Record::MlKem(f) => {
            if f[0].len() != 64 {
                return Err(bad(line, "d||z"));
            }
            let d = f[0][..32].try_into().unwrap();
            let z = f[0][32..].try_into().unwrap();
            let (dk, ek) = p.mlkem_keygen_internal(d, z);
            check(line, "ek", &ek, &f[1])?;
            let c = f[2].as_slice().try_into().map_err(|_| bad(line, "c"))?;
            check(line, "ss", &p.mlkem_decaps(c, &dk), &f[3])
        }
    }
}

/// Verify every record; returns how many were checked.
pub fn verify(text: &str, p: &dyn PrimitiveProvider) -> Result<usize, VectorError> {
    let recs = parse(text)?;
    for (line, rec) in &recs {
        verify_record(*line, rec, p)?;
    }
    Ok(recs.len())
}

/// Deterministic vector file: `count` records of each X-Wing mode plus
/// hierarchy, seal and AUTS records.
pub fn emit(seed: u64, count: usize, p: &dyn PrimitiveProvider) -> String {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = String::new();
    let _ = writeln!(out, "# seed {seed}");
    let _ = writeln!(out, "# xwing <mode> <sk> <pk> <eseed|-> <c> <ss>");
    let bytes = |rng: &mut ChaCha20Rng, n: usize| {
        let mut b = vec![0u8; n];
        rng.fill_bytes(&mut b);
        b
    };
    for _ in 0..count {
        let kp = xwing::keygen(p, &mut rng);
        // protocol mode needs a matching (scalar, public) pair, as the UE uses
        let ue = xwing::keygen(p, &mut rng);
        let eseed = Eseed::from_keypair(&ue.sk, &ue.pk);
        let (ss, c) = xwing::encapsulate(p, &kp.pk, Some(&eseed), &mut rng).expect("valid pk");
        xwing_line(&mut out, "protocol", &kp.sk, &kp.pk, Some(&eseed), &c, ss.as_bytes());
        let eseed = Eseed::from_slice(&bytes(&mut rng, 64)).expect("64 bytes");
        let (ss, c) = xwing::encapsulate_draft(p, &kp.pk, &eseed).expect("valid pk");
        xwing_line(&mut out, "draft", &kp.sk, &kp.pk, Some(&eseed), &c, ss.as_bytes());
    }
    let _ = writeln!(out, "# hier {}", HIER_FIELDS.join(" "));
    for i in 0..count {
        let k = LongTermKey::new(&bytes(&mut rng, 32)).expect("32 bytes");
        let rand = bytes(&mut rng, xwing::CIPHERTEXT_LEN);
        let hpk = Hpk::from_shared_secret(&bytes(&mut rng, 32).try_into().unwrap());
        let sqn = Sqn::new(rng.next_u64() >> 16).expect("48 bits");
        let amf = Amf::default();
        let id_sn = if i % 2 == 0 { DEFAULT_ID_SN.to_vec() } else { bytes(&mut rng, 32) };
        let h = derive_hierarchy(&k, &rand, hpk.as_bytes(), sqn, amf, &id_sn).expect("fixed sizes");
        let fields: [&[u8]; 13] = [
            k.as_bytes(),
            &rand,
            hpk.as_bytes(),
            &sqn.to_bytes(),
            &amf.0,
            &id_sn,
            &h.ck,
            &h.ik,
            &h.res,
            &h.res_star,
            &h.hxres_star,
            &h.k_ausf,
            &h.k_seaf,
        ];
        record_line(&mut out, "hier", &fields);
    }
    let _ = writeln!(out, "# seal ss_ue supi pk1 c1 c2");
    for _ in 0..count {
        let ss: [u8; 32] = bytes(&mut rng, 32).try_into().unwrap();
        let supi = Supi::new(&bytes(&mut rng, 16)).expect("16 bytes");
        let pk1: [u8; 1184] = bytes(&mut rng, 1184).try_into().unwrap();
        let (c1, c2) = seal_payload(&ss, &supi, &pk1);
        record_line(&mut out, "seal", &[&ss, supi.as_bytes(), &pk1, &c1, &c2]);
    }
    let _ = writeln!(out, "# auts k rand hpk sqn_ue amf auts");
    for _ in 0..count {
        let k = LongTermKey::new(&bytes(&mut rng, 32)).expect("32 bytes");
        let rand = bytes(&mut rng, xwing::CIPHERTEXT_LEN);
        let hpk = Hpk::from_shared_secret(&bytes(&mut rng, 32).try_into().unwrap());
        let sqn = Sqn::new(rng.next_u64() >> 16).expect("48 bits");
        let amf = Amf::default();
        let auts = make_auts(&k, &rand, hpk.as_bytes(), sqn, amf).expect("fixed sizes");
        record_line(
            &mut out,
            "auts",
            &[k.as_bytes(), &rand, hpk.as_bytes(), &sqn.to_bytes(), &amf.0, &auts.to_bytes()],
        );
    }
    out
}

fn xwing_line(
    out: &mut String,
    mode: &str,
    sk: &XWingSecretKey,
    pk: &XWingPublicKey,
    eseed: Option<&Eseed>,
    c: &XWingCiphertext,
    ss: &[u8],
) {
    let e = eseed.map_or_else(|| "-".to_string(), |e| hex::encode(e.as_bytes()));
    let _ = writeln!(
        out,
        "xwing {mode} {} {} {e} {} {}",
        hex::encode(sk.as_bytes()),
        hex::encode(pk.as_bytes()),
        hex::encode(c.as_bytes()),
        hex::encode(ss)
    );
}

fn record_line(out: &mut String, kind: &str, fields: &[&[u8]]) {
    out.push_str(kind);
    for f in fields {
        out.push(' ');
        out.push_str(&hex::encode(f));
    }
    out.push('\n');
}
