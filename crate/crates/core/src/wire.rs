//! Byte layout of every protocol message.
//!
//! ```text
//! "HPQC" (4) ∥ version 0x01 (1) ∥ message tag (1) ∥ session id (16) ∥ TLV*
//! TLV = field tag (1) ∥ length (2, big endian) ∥ value
//! ```
//!
//! Each message kind has a fixed field order; decoding is strict about
//! order, lengths and trailing bytes.

use std::fmt;

use thiserror::Error;

use crate::aka::{Autn, Auts, AUTN_LEN, AUTS_LEN, HXRES_STAR_LEN, KEY_LEN, RES_STAR_LEN};
use crate::identity::{Suci, Supi, MAC_TAG_LEN, SUPI_MAX_LEN};
use crate::prims::MLKEM_EK_LEN;
use crate::xwing::{XWingCiphertext, CIPHERTEXT_LEN};

pub const MAGIC: [u8; 4] = *b"HPQC";
pub const VERSION: u8 = 0x01;
pub const SESSION_ID_LEN: usize = 16;
pub const HEADER_LEN: usize = MAGIC.len() + 2 + SESSION_ID_LEN;
pub const TLV_HEADER_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SessionId(pub [u8; SESSION_ID_LEN]);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FieldTag {
    C0 = 0x01,
    C1 = 0x02,
    C2 = 0x03,
    IdSn = 0x10,
    Rand = 0x20,
    Autn = 0x21,
    HxresStar = 0x22,
    ResStar = 0x30,
    Auts = 0x40,
    Supi = 0x50,
    KSeaf = 0x51,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MessageKind {
    Registration = 0x01,
    AuthRequest = 0x02,
    SeAvMsg = 0x03,
    Challenge = 0x04,
    Response = 0x05,
    ResponseFwd = 0x06,
    MacFailure = 0x07,
    SyncFailure = 0x08,
    KeyRelease = 0x09,
}

impl MessageKind {
    pub const ALL: [MessageKind; 9] = [
        MessageKind::Registration,
        MessageKind::AuthRequest,
        MessageKind::SeAvMsg,
        MessageKind::Challenge,
        MessageKind::Response,
        MessageKind::ResponseFwd,
        MessageKind::MacFailure,
        MessageKind::SyncFailure,
        MessageKind::KeyRelease,
    ];

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| *k as u8 == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Registration => "Registration",
            MessageKind::AuthRequest => "AuthRequest",
            MessageKind::SeAvMsg => "SeAv",
            MessageKind::Challenge => "Challenge",
            MessageKind::Response => "Response",
            MessageKind::ResponseFwd => "ResponseFwd",
            MessageKind::MacFailure => "MacFailure",
            MessageKind::SyncFailure => "SyncFailure",
            MessageKind::KeyRelease => "KeyRelease",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Registration {
        suci: Suci,
    },
    AuthRequest {
        suci: Suci,
        id_sn: Vec<u8>,
    },
    SeAvMsg {
        rand: XWingCiphertext,
        autn: Autn,
        hxres_star: [u8; HXRES_STAR_LEN],
    },
    Challenge {
        rand: XWingCiphertext,
        autn: Autn,
    },
    Response {
        res_star: [u8; RES_STAR_LEN],
    },
    ResponseFwd {
        res_star: [u8; RES_STAR_LEN],
    },
    MacFailure,
    SyncFailure {
        auts: Auts,
        rand: XWingCiphertext,
        suci: Suci,
    },
    KeyRelease {
        supi: Supi,
        k_seaf: [u8; KEY_LEN],
    },
}

/// A message together with the session it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub session: SessionId,
    pub msg: Message,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("field {tag:?} is {len} bytes, above the 65535-byte TLV limit")]
    Oversize { tag: FieldTag, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("input ends before the declared structure")]
    Truncated,
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0:#04x}")]
    BadVersion(u8),
    #[error("unknown message tag {0:#04x}")]
    BadTag(u8),
    #[error("expected field tag {expected:#04x}, found {found:#04x}")]
    UnexpectedField { expected: u8, found: u8 },
    #[error("field {field:#04x} has length {got}, outside {min}..={max}")]
    BadLength {
        field: u8,
        min: usize,
        max: usize,
        got: usize,
    },
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
}

const C1_MIN: usize = MLKEM_EK_LEN + 1;
const C1_MAX: usize = MLKEM_EK_LEN + SUPI_MAX_LEN;

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Registration { .. } => MessageKind::Registration,
            Message::AuthRequest { .. } => MessageKind::AuthRequest,
            Message::SeAvMsg { .. } => MessageKind::SeAvMsg,
            Message::Challenge { .. } => MessageKind::Challenge,
            Message::Response { .. } => MessageKind::Response,
            Message::ResponseFwd { .. } => MessageKind::ResponseFwd,
            Message::MacFailure => MessageKind::MacFailure,
            Message::SyncFailure { .. } => MessageKind::SyncFailure,
            Message::KeyRelease { .. } => MessageKind::KeyRelease,
        }
    }

    /// Fields in wire order.
    fn fields(&self) -> Vec<(FieldTag, Vec<u8>)> {
        fn suci_fields(s: &Suci) -> [(FieldTag, Vec<u8>); 3] {
            [
                (FieldTag::C0, s.c0.as_bytes().to_vec()),
                (FieldTag::C1, s.c1.clone()),
                (FieldTag::C2, s.c2.to_vec()),
            ]
        }
        match self {
            Message::Registration { suci } => suci_fields(suci).to_vec(),
            Message::AuthRequest { suci, id_sn } => {
                let mut v = suci_fields(suci).to_vec();
                v.push((FieldTag::IdSn, id_sn.clone()));
                v
            }
            Message::SeAvMsg {
                rand,
                autn,
                hxres_star,
            } => vec![
                (FieldTag::Rand, rand.as_bytes().to_vec()),
                (FieldTag::Autn, autn.to_bytes().to_vec()),
                (FieldTag::HxresStar, hxres_star.to_vec()),
            ],
            Message::Challenge { rand, autn } => vec![
                (FieldTag::Rand, rand.as_bytes().to_vec()),
                (FieldTag::Autn, autn.to_bytes().to_vec()),
            ],
            Message::Response { res_star } | Message::ResponseFwd { res_star } => {
                vec![(FieldTag::ResStar, res_star.to_vec())]
            }
            Message::MacFailure => Vec::new(),
            Message::SyncFailure { auts, rand, suci } => {
                let mut v = vec![
                    (FieldTag::Auts, auts.to_bytes().to_vec()),
                    (FieldTag::Rand, rand.as_bytes().to_vec()),
                ];
                v.extend(suci_fields(suci));
                v
            }
            Message::KeyRelease { supi, k_seaf } => vec![
                (FieldTag::Supi, supi.as_bytes().to_vec()),
                (FieldTag::KSeaf, k_seaf.to_vec()),
            ],
        }
    }

    /// Sum of field value lengths, without headers.
    pub fn payload_len(&self) -> usize {
        self.fields().iter().map(|(_, v)| v.len()).sum()
    }

    /// One-line human summary for transcripts.
    pub fn summary(&self) -> String {
        let parts: Vec<String> = self
            .fields()
            .iter()
            .map(|(t, v)| format!("{:?}[{}]", t, v.len()))
            .collect();
        format!("{}({})", self.kind().name(), parts.join(", "))
    }
}

pub fn encode(env: &Envelope) -> Result<Vec<u8>, EncodeError> {
    let fields = env.msg.fields();
    let mut out = Vec::with_capacity(
        HEADER_LEN
            + fields
                .iter()
                .map(|(_, v)| TLV_HEADER_LEN + v.len())
                .sum::<usize>(),
    );
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(env.msg.kind() as u8);
    out.extend_from_slice(&env.session.0);
    for (tag, value) in fields {
        let len = u16::try_from(value.len()).map_err(|_| EncodeError::Oversize {
            tag,
            len: value.len(),
        })?;
        out.push(tag as u8);
        out.extend_from_slice(&len.to_be_bytes());
        out.extend_from_slice(&value);
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() < n {
            return Err(DecodeError::Truncated);
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn field(&mut self, tag: FieldTag, min: usize, max: usize) -> Result<&'a [u8], DecodeError> {
        let h = self.take(TLV_HEADER_LEN)?;
        if h[0] != tag as u8 {
            return Err(DecodeError::UnexpectedField {
                expected: tag as u8,
                found: h[0],
            });
        }
        let len = u16::from_be_bytes([h[1], h[2]]) as usize;
        if len < min || len > max {
            return Err(DecodeError::BadLength {
                field: tag as u8,
                min,
                max,
                got: len,
            });
        }
        self.take(len)
    }

    fn fixed<const N: usize>(&mut self, tag: FieldTag) -> Result<[u8; N], DecodeError> {
        Ok(self.field(tag, N, N)?.try_into().unwrap())
    }

    fn rand(&mut self) -> Result<XWingCiphertext, DecodeError> {
        Ok(XWingCiphertext::from_bytes(self.fixed::<CIPHERTEXT_LEN>(FieldTag::Rand)?))
    }

    fn suci(&mut self) -> Result<Suci, DecodeError> {
        let c0 = XWingCiphertext::from_bytes(self.fixed::<CIPHERTEXT_LEN>(FieldTag::C0)?);
        let c1 = self.field(FieldTag::C1, C1_MIN, C1_MAX)?.to_vec();
        let c2 = self.fixed::<MAC_TAG_LEN>(FieldTag::C2)?;
        Ok(Suci { c0, c1, c2 })
    }
}

pub fn decode(bytes: &[u8]) -> Result<Envelope, DecodeError> {
    let mut r = Reader { buf: bytes };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    let version = r.take(1)?[0];
    if version != VERSION {
        return Err(DecodeError::BadVersion(version));
    }
    let tag = r.take(1)?[0];
    let kind = MessageKind::from_tag(tag).ok_or(DecodeError::BadTag(tag))?;
    let session = SessionId(r.take(SESSION_ID_LEN)?.try_into().unwrap());

    let msg = match kind {
        MessageKind::Registration => Message::Registration { suci: r.suci()? },
        MessageKind::AuthRequest => {
            let suci = r.suci()?;
            let id_sn = r.field(FieldTag::IdSn, 0, u16::MAX as usize)?.to_vec();
            Message::AuthRequest { suci, id_sn }
        }
        MessageKind::SeAvMsg => Message::SeAvMsg {
            rand: r.rand()?,
            autn: Autn::from_bytes(&r.fixed::<AUTN_LEN>(FieldTag::Autn)?),
            hxres_star: r.fixed(FieldTag::HxresStar)?,
        },
        MessageKind::Challenge => Message::Challenge {
            rand: r.rand()?,
            autn: Autn::from_bytes(&r.fixed::<AUTN_LEN>(FieldTag::Autn)?),
        },
        MessageKind::Response => Message::Response {
            res_star: r.fixed(FieldTag::ResStar)?,
        },
        MessageKind::ResponseFwd => Message::ResponseFwd {
            res_star: r.fixed(FieldTag::ResStar)?,
        },
        MessageKind::MacFailure => Message::MacFailure,
        MessageKind::SyncFailure => Message::SyncFailure {
            auts: Auts::from_bytes(&r.fixed::<AUTS_LEN>(FieldTag::Auts)?),
            rand: r.rand()?,
            suci: r.suci()?,
        },
        MessageKind::KeyRelease => {
            let supi = r.field(FieldTag::Supi, 1, SUPI_MAX_LEN)?;
            Message::KeyRelease {
                supi: Supi::new(supi).expect("length checked"),
                k_seaf: r.fixed(FieldTag::KSeaf)?,
            }
        }
    };
    if !r.buf.is_empty() {
        return Err(DecodeError::TrailingBytes(r.buf.len()));
    }
    Ok(Envelope { session, msg })
}
