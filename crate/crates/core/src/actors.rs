//! UE, SN and HN state machines.
//!
//! Each actor consumes one input at a time and returns the messages it
//! wants delivered plus the audit events it raised. Time is a logical
//! clock in milliseconds supplied by the caller.

use std::collections::BTreeMap;
use std::fmt;

use rand::CryptoRng;
use serde::Serialize;
use thiserror::Error;
use zeroize::Zeroizing;

use crate::aka::{
    self, hn_resync, hn_verify_response, sn_verify_response, ue_process_challenge,
    ChallengeOutcome, KeyHierarchy, Sqn, SubscriberRecord, HXRES_STAR_LEN, KEY_LEN,
};
use crate::identity::{conceal_supi, deconceal_suci, Suci, Supi};
use crate::prims::{sha3_256_parts, LongTermKey, PrimitiveProvider};
use crate::wire::{Envelope, Message, SessionId};
use crate::xwing::{XWingCiphertext, XWingPublicKey, XWingSecretKey};

pub const DEFAULT_TIMEOUT_MS: u64 = 60_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    Ue,
    Sn,
    Hn,
    Adversary,
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Actor::Ue => "UE",
            Actor::Sn => "SN",
            Actor::Hn => "HN",
            Actor::Adversary => "ADV",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EventKind {
    #[serde(rename = "beginUE_HN_SUPI")]
    BeginUeHnSupi,
    #[serde(rename = "endUE_HN_SUPI")]
    EndUeHnSupi,
    #[serde(rename = "beginHN_UE_MAC")]
    BeginHnUeMac,
    #[serde(rename = "endUE_HN_MAC")]
    EndUeHnMac,
    #[serde(rename = "beginUE_RES")]
    BeginUeRes,
    #[serde(rename = "middleSN_RES")]
    MiddleSnRes,
    #[serde(rename = "middleHN_RES")]
    MiddleHnRes,
    #[serde(rename = "endSN_ANCHOR_KEY")]
    EndSnAnchorKey,
    #[serde(rename = "mac_failure")]
    MacFailure,
    #[serde(rename = "sync_failure")]
    SyncFailure,
    #[serde(rename = "resync")]
    Resync,
    #[serde(rename = "abort")]
    Abort,
    #[serde(rename = "timeout")]
    Timeout,
    #[serde(rename = "rejected")]
    Rejected,
    #[serde(rename = "deconceal_failed")]
    DeconcealFailed,
    #[serde(rename = "key_confirmed")]
    KeyConfirmed,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::BeginUeHnSupi => "beginUE_HN_SUPI",
            EventKind::EndUeHnSupi => "endUE_HN_SUPI",
            EventKind::BeginHnUeMac => "beginHN_UE_MAC",
            EventKind::EndUeHnMac => "endUE_HN_MAC",
            EventKind::BeginUeRes => "beginUE_RES",
            EventKind::MiddleSnRes => "middleSN_RES",
            EventKind::MiddleHnRes => "middleHN_RES",
            EventKind::EndSnAnchorKey => "endSN_ANCHOR_KEY",
            EventKind::MacFailure => "mac_failure",
            EventKind::SyncFailure => "sync_failure",
            EventKind::Resync => "resync",
            EventKind::Abort => "abort",
            EventKind::Timeout => "timeout",
            EventKind::Rejected => "rejected",
            EventKind::DeconcealFailed => "deconceal_failed",
            EventKind::KeyConfirmed => "key_confirmed",
        }
    }
}

/// Audit record. `digest` covers the event's arguments only, so a begin
/// and its matching end carry the same digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditEvent {
    pub actor: Actor,
    #[serde(serialize_with = "ser_session")]
    pub session: SessionId,
    pub kind: EventKind,
    #[serde(serialize_with = "ser_hex")]
    pub digest: [u8; 32],
    pub note: String,
}

fn ser_session<S: serde::Serializer>(s: &SessionId, ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_str(&s.to_string())
}

fn ser_hex<S: serde::Serializer>(d: &[u8; 32], ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_str(&hex::encode(d))
}

impl AuditEvent {
    pub fn new(actor: Actor, session: SessionId, kind: EventKind, args: &[&[u8]]) -> Self {
        Self {
            actor,
            session,
            kind,
            digest: args_digest(args),
            note: String::new(),
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// `session actor kind digest [note]`
    pub fn to_line(&self) -> String {
        let mut s = format!(
            "{} {} {} {}",
            self.session,
            self.actor,
            self.kind.name(),
            hex::encode(self.digest)
        );
        if !self.note.is_empty() {
            s.push(' ');
            s.push_str(&self.note);
        }
        s
    }
}

/// SHA3-256 over length-prefixed arguments.
pub fn args_digest(args: &[&[u8]]) -> [u8; 32] {
    let lens: Vec<[u8; 4]> = args.iter().map(|a| (a.len() as u32).to_be_bytes()).collect();
    let mut parts: Vec<&[u8]> = Vec::with_capacity(args.len() * 2);
    for (len, arg) in lens.iter().zip(args) {
        parts.push(len);
        parts.push(arg);
    }
    sha3_256_parts(&parts)
}

/// A message an actor wants sent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub to: Actor,
    pub env: Envelope,
}

#[derive(Debug, Default)]
pub struct StepOutput {
    pub outgoing: Vec<Outgoing>,
    pub events: Vec<AuditEvent>,
}

impl StepOutput {
    fn send(&mut self, to: Actor, session: SessionId, msg: Message) {
        self.outgoing.push(Outgoing {
            to,
            env: Envelope { session, msg },
        });
    }

    fn event(&mut self, e: AuditEvent) {
        self.events.push(e);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActorError {
    #[error("{actor} got {kind} while {phase}")]
    ProtocolViolation {
        actor: Actor,
        phase: &'static str,
        kind: &'static str,
    },
    #[error("{actor}: {reason}")]
    Internal { actor: Actor, reason: String },
}

/// Shared per-step context.
pub struct Ctx<'a> {
    pub now_ms: u64,
    pub provider: &'a dyn PrimitiveProvider,
    pub rng: &'a mut dyn CryptoRng,
}


// ---------------------------------------------------------------- UE

#[derive(Debug)]
pub enum UePhase {
    Idle,
    AwaitingChallenge {
        session: SessionId,
        sk_ue: XWingSecretKey,
        suci: Suci,
        deadline_ms: u64,
    },
    Done {
        session: SessionId,
        k_seaf: Zeroizing<[u8; KEY_LEN]>,
        keys: Box<KeyHierarchy>,
    },
    Failed {
        session: SessionId,
        reason: &'static str,
    },
}

impl UePhase {
    pub fn name(&self) -> &'static str {
        match self {
            UePhase::Idle => "Idle",
            UePhase::AwaitingChallenge { .. } => "AwaitingChallenge",
            UePhase::Done { .. } => "Done",
            UePhase::Failed { .. } => "Failed",
        }
    }
}

#[derive(Debug, Clone)]
pub enum UeInput {
    Start(SessionId),
    Receive(Envelope),
}

/// USIM plus mobile equipment. One registration at a time.
#[derive(Debug)]
pub struct UeState {
    pub supi: Supi,
    pub k: LongTermKey,
    pub pk_hn: XWingPublicKey,
    /// Name of the serving network the UE is attached to.
    pub id_sn: Vec<u8>,
    pub sqn_ue: Sqn,
    pub delta: u64,
    pub timeout_ms: u64,
    pub phase: UePhase,
}

impl UeState {
    pub fn new(
        supi: Supi,
        k: LongTermKey,
        pk_hn: XWingPublicKey,
        id_sn: Vec<u8>,
        sqn_ue: Sqn,
        delta: u64,
    ) -> Self {
        Self {
            supi,
            k,
            pk_hn,
            id_sn,
            sqn_ue,
            delta,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            phase: UePhase::Idle,
        }
    }

    pub fn k_seaf(&self) -> Option<&[u8; KEY_LEN]> {
        match &self.phase {
            UePhase::Done { k_seaf, .. } => Some(k_seaf),
            _ => None,
        }
    }

    pub fn keys(&self) -> Option<&KeyHierarchy> {
        match &self.phase {
            UePhase::Done { keys, .. } => Some(keys),
            _ => None,
        }
    }

    /// The ephemeral X-Wing secret, present only while a challenge is awaited.
    pub fn ephemeral_secret(&self) -> Option<&XWingSecretKey> {
        match &self.phase {
            UePhase::AwaitingChallenge { sk_ue, .. } => Some(sk_ue),
            _ => None,
        }
    }

    pub fn current_session(&self) -> Option<SessionId> {
        match &self.phase {
            UePhase::Idle => None,
            UePhase::AwaitingChallenge { session, .. }
            | UePhase::Done { session, .. }
            | UePhase::Failed { session, .. } => Some(*session),
        }
    }

    fn violation(&mut self, kind: &'static str) -> ActorError {
        let phase = self.phase.name();
        let session = self.current_session().unwrap_or_default();
        self.phase = UePhase::Failed {
            session,
            reason: "protocol violation",
        };
        ActorError::ProtocolViolation {
            actor: Actor::Ue,
            phase,
            kind,
        }
    }

    pub fn step(&mut self, input: UeInput, ctx: &mut Ctx<'_>) -> Result<StepOutput, ActorError> {
        let mut out = StepOutput::default();
        match input {
            UeInput::Start(session) => {
                if matches!(self.phase, UePhase::AwaitingChallenge { .. }) {
                    return Err(self.violation("Start"));
                }
                let c = conceal_supi(&self.supi, &self.pk_hn, ctx.provider, &mut *ctx.rng)
                    .map_err(|e| ActorError::Internal {
                        actor: Actor::Ue,
                        reason: e.to_string(),
                    })?;
                out.event(AuditEvent::new(
                    Actor::Ue,
                    session,
                    EventKind::BeginUeHnSupi,
                    &[self.supi.as_bytes(), c.suci.c0.as_bytes(), self.pk_hn.as_bytes()],
                ));
                out.send(
                    Actor::Sn,
                    session,
                    Message::Registration {
                        suci: c.suci.clone(),
                    },
                );
                self.phase = UePhase::AwaitingChallenge {
                    session,
                    sk_ue: c.sk_ue,
                    suci: c.suci,
                    deadline_ms: ctx.now_ms + self.timeout_ms,
                };
            }
            UeInput::Receive(env) => {
                let Message::Challenge { rand, autn } = env.msg else {
                    return Err(self.violation(env.msg.kind().name()));
                };
                let UePhase::AwaitingChallenge { session, .. } = &self.phase else {
                    return Err(self.violation("Challenge"));
                };
                if *session != env.session {
                    out.event(
                        AuditEvent::new(Actor::Ue, env.session, EventKind::Rejected, &[])
                            .with_note("challenge for another session"),
                    );
                    return Ok(out);
                }
                let UePhase::AwaitingChallenge {
                    session, sk_ue, suci, ..
                } = std::mem::replace(&mut self.phase, UePhase::Idle)
                else {
                    unreachable!("phase checked above")
                };
                let (outcome, sqn) = ue_process_challenge(
                    &self.k,
                    self.sqn_ue,
                    sk_ue,
                    &rand,
                    &autn,
                    &self.id_sn,
                    self.delta,
                    ctx.provider,
                );
                self.sqn_ue = sqn;
                self.finish_challenge(session, suci, rand, outcome, &mut out);
            }
        }
        Ok(out)
    }

    fn finish_challenge(
        &mut self,
        session: SessionId,
        suci: Suci,
        rand: XWingCiphertext,
        outcome: ChallengeOutcome,
        out: &mut StepOutput,
    ) {
        match outcome {
            ChallengeOutcome::MacFailure => {
                out.event(AuditEvent::new(
                    Actor::Ue,
                    session,
                    EventKind::MacFailure,
                    &[rand.as_bytes()],
                ));
                out.send(Actor::Sn, session, Message::MacFailure);
                self.phase = UePhase::Failed {
                    session,
                    reason: "MAC failure",
                };
            }
            ChallengeOutcome::SyncFailure(auts) => {
                out.event(AuditEvent::new(
                    Actor::Ue,
                    session,
                    EventKind::SyncFailure,
                    &[rand.as_bytes(), &auts.to_bytes()],
                ));
                out.send(Actor::Sn, session, Message::SyncFailure { auts, rand, suci });
                self.phase = UePhase::Failed {
                    session,
                    reason: "synchronisation failure",
                };
            }
            ChallengeOutcome::Success {
                res_star,
                k_seaf,
                keys,
            } => {
                out.event(AuditEvent::new(
                    Actor::Ue,
                    session,
                    EventKind::EndUeHnMac,
                    &[
                        self.supi.as_bytes(),
                        self.k.as_bytes(),
                        rand.as_bytes(),
                        &self.sqn_ue.to_bytes(),
                    ],
                ));
                out.event(AuditEvent::new(
                    Actor::Ue,
                    session,
                    EventKind::BeginUeRes,
                    &[&res_star, rand.as_bytes()],
                ));
                out.send(Actor::Sn, session, Message::Response { res_star });
                self.phase = UePhase::Done {
                    session,
                    k_seaf: Zeroizing::new(k_seaf),
                    keys,
                };
            }
        }
    }

    /// Abandon a registration whose challenge never arrived.
    pub fn tick(&mut self, now_ms: u64) -> Vec<AuditEvent> {
        match &self.phase {
            UePhase::AwaitingChallenge {
                session,
                deadline_ms,
                ..
            } if *deadline_ms <= now_ms => {
                let session = *session;
                self.phase = UePhase::Failed {
                    session,
                    reason: "timeout",
                };
                vec![AuditEvent::new(Actor::Ue, session, EventKind::Timeout, &[])]
            }
            _ => Vec::new(),
        }
    }
}

// ---------------------------------------------------------------- SN

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SnStage {
    AwaitingAv,
    AwaitingResponse {
        rand: XWingCiphertext,
        hxres_star: [u8; HXRES_STAR_LEN],
    },
    AwaitingKey,
}

#[derive(Debug, Clone)]
pub struct SnPending {
    pub stage: SnStage,
    pub deadline_ms: u64,
}

#[derive(Debug, Clone)]
pub struct SnCompleted {
    pub supi: Supi,
    pub k_seaf: Zeroizing<[u8; KEY_LEN]>,
}

#[derive(Debug, Clone)]
pub struct SnState {
    pub id_sn: Vec<u8>,
    pub timeout_ms: u64,
    pub pending: BTreeMap<SessionId, SnPending>,
    pub completed: BTreeMap<SessionId, SnCompleted>,
}

impl SnState {
    pub fn new(id_sn: Vec<u8>) -> Self {
        Self {
            id_sn,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            pending: BTreeMap::new(),
            completed: BTreeMap::new(),
        }
    }

    fn reject(out: &mut StepOutput, session: SessionId, note: &str) {
        out.event(AuditEvent::new(Actor::Sn, session, EventKind::Rejected, &[]).with_note(note));
    }

    pub fn step(&mut self, env: Envelope, ctx: &mut Ctx<'_>) -> Result<StepOutput, ActorError> {
        let mut out = StepOutput::default();
        let s = env.session;
        match env.msg {
            Message::Registration { suci } => {
                if self.pending.contains_key(&s) || self.completed.contains_key(&s) {
                    Self::reject(&mut out, s, "duplicate session");
                    return Ok(out);
                }
                self.pending.insert(
                    s,
                    SnPending {
                        stage: SnStage::AwaitingAv,
                        deadline_ms: ctx.now_ms + self.timeout_ms,
                    },
                );
                out.send(
                    Actor::Hn,
                    s,
                    Message::AuthRequest {
                        suci,
                        id_sn: self.id_sn.clone(),
                    },
                );
            }
            Message::SeAvMsg {
                rand,
                autn,
                hxres_star,
            } => match self.pending.get_mut(&s) {
                Some(p) if p.stage == SnStage::AwaitingAv => {
                    p.stage = SnStage::AwaitingResponse {
                        rand: rand.clone(),
                        hxres_star,
                    };
                    out.send(Actor::Ue, s, Message::Challenge { rand, autn });
                }
                _ => Self::reject(&mut out, s, "unsolicited SE-AV"),
            },
            Message::Response { res_star } => {
                let Some(SnPending {
                    stage: SnStage::AwaitingResponse { rand, hxres_star },
                    ..
                }) = self.pending.get(&s)
                else {
                    Self::reject(&mut out, s, "unsolicited response");
                    return Ok(out);
                };
                if sn_verify_response(rand.as_bytes(), &res_star, hxres_star) {
                    out.event(AuditEvent::new(
                        Actor::Sn,
                        s,
                        EventKind::MiddleSnRes,
                        &[&res_star, rand.as_bytes()],
                    ));
                    out.send(Actor::Hn, s, Message::ResponseFwd { res_star });
                    self.pending.get_mut(&s).unwrap().stage = SnStage::AwaitingKey;
                } else {
                    self.pending.remove(&s);
                    out.event(
                        AuditEvent::new(Actor::Sn, s, EventKind::Abort, &[&res_star])
                            .with_note("HRES* mismatch"),
                    );
                }
            }
            Message::MacFailure => {
                if self.pending.remove(&s).is_some() {
                    out.event(AuditEvent::new(Actor::Sn, s, EventKind::MacFailure, &[]));
                    out.send(Actor::Hn, s, Message::MacFailure);
                } else {
                    Self::reject(&mut out, s, "unsolicited MAC failure");
                }
            }
            msg @ Message::SyncFailure { .. } => {
                if self.pending.remove(&s).is_some() {
                    out.event(AuditEvent::new(Actor::Sn, s, EventKind::SyncFailure, &[]));
                    out.send(Actor::Hn, s, msg);
                } else {
                    Self::reject(&mut out, s, "unsolicited sync failure");
                }
            }
            Message::KeyRelease { supi, k_seaf } => match self.pending.get(&s) {
                Some(p) if p.stage == SnStage::AwaitingKey => {
                    self.pending.remove(&s);
                    out.event(AuditEvent::new(
                        Actor::Sn,
                        s,
                        EventKind::EndSnAnchorKey,
                        &[supi.as_bytes(), &k_seaf],
                    ));
                    self.completed.insert(
                        s,
                        SnCompleted {
                            supi,
                            k_seaf: Zeroizing::new(k_seaf),
                        },
                    );
                }
                _ => Self::reject(&mut out, s, "unsolicited key release"),
            },
            other => {
                return Err(ActorError::ProtocolViolation {
                    actor: Actor::Sn,
                    phase: "serving",
                    kind: other.kind().name(),
                })
            }
        }
        Ok(out)
    }

    pub fn tick(&mut self, now_ms: u64) -> Vec<AuditEvent> {
        let expired: Vec<SessionId> = self
            .pending
            .iter()
            .filter(|(_, p)| p.deadline_ms <= now_ms)
            .map(|(s, _)| *s)
            .collect();
        expired
            .into_iter()
            .map(|s| {
                self.pending.remove(&s);
                AuditEvent::new(Actor::Sn, s, EventKind::Timeout, &[])
            })
            .collect()
    }
}

// ---------------------------------------------------------------- HN

/// What the HN keeps per outstanding vector until response, failure report
/// or timeout.
#[derive(Debug, Clone)]
pub struct OutstandingAv {
    pub supi: Supi,
    pub id_sn: Vec<u8>,
    pub rand: XWingCiphertext,
    pub hierarchy: KeyHierarchy,
    pub deadline_ms: u64,
}

#[derive(Debug, Clone)]
pub struct HnState {
    pub sk_hn: XWingSecretKey,
    pub pk_hn: XWingPublicKey,
    pub subscribers: BTreeMap<Supi, SubscriberRecord>,
    pub outstanding: BTreeMap<SessionId, OutstandingAv>,
    pub released: BTreeMap<SessionId, (Supi, Zeroizing<[u8; KEY_LEN]>)>,
    pub timeout_ms: u64,
}

impl HnState {
    pub fn new(sk_hn: XWingSecretKey, pk_hn: XWingPublicKey) -> Self {
        Self {
            sk_hn,
            pk_hn,
            subscribers: BTreeMap::new(),
            outstanding: BTreeMap::new(),
            released: BTreeMap::new(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }

    pub fn provision(&mut self, sub: SubscriberRecord) {
        self.subscribers.insert(sub.supi.clone(), sub);
    }

    fn note(out: &mut StepOutput, s: SessionId, kind: EventKind, note: &str) {
        out.event(AuditEvent::new(Actor::Hn, s, kind, &[]).with_note(note));
    }

    pub fn step(&mut self, env: Envelope, ctx: &mut Ctx<'_>) -> Result<StepOutput, ActorError> {
        let mut out = StepOutput::default();
        let s = env.session;
        match env.msg {
            Message::AuthRequest { suci, id_sn } => {
                if self.outstanding.contains_key(&s) {
                    Self::note(&mut out, s, EventKind::Rejected, "session already has an AV");
                    return Ok(out);
                }
                let Ok((supi, pk1)) = deconceal_suci(&suci, &self.sk_hn, ctx.provider) else {
                    out.event(AuditEvent::new(
                        Actor::Hn,
                        s,
                        EventKind::DeconcealFailed,
                        &[suci.c0.as_bytes()],
                    ));
                    return Ok(out);
                };
                out.event(AuditEvent::new(
                    Actor::Hn,
                    s,
                    EventKind::EndUeHnSupi,
                    &[supi.as_bytes(), suci.c0.as_bytes(), self.pk_hn.as_bytes()],
                ));
                let Some(sub) = self.subscribers.get(&supi) else {
                    Self::note(&mut out, s, EventKind::Rejected, "unknown subscriber");
                    return Ok(out);
                };
                let av = match aka::generate_av(sub, &suci.c0, &pk1, &id_sn, ctx.provider, &mut *ctx.rng)
                {
                    Ok(av) => av,
                    Err(e) => {
                        Self::note(&mut out, s, EventKind::Abort, &e.to_string());
                        return Ok(out);
                    }
                };
                out.event(AuditEvent::new(
                    Actor::Hn,
                    s,
                    EventKind::BeginHnUeMac,
                    &[
                        supi.as_bytes(),
                        sub.k.as_bytes(),
                        av.he_av.rand.as_bytes(),
                        &av.sqn_used.to_bytes(),
                    ],
                ));
                self.subscribers.insert(supi.clone(), av.subscriber);
                out.send(
                    Actor::Sn,
                    s,
                    Message::SeAvMsg {
                        rand: av.se_av.rand,
                        autn: av.se_av.autn,
                        hxres_star: av.se_av.hxres_star,
                    },
                );
                self.outstanding.insert(
                    s,
                    OutstandingAv {
                        supi,
                        id_sn,
                        rand: av.he_av.rand,
                        hierarchy: av.hierarchy,
                        deadline_ms: ctx.now_ms + self.timeout_ms,
                    },
                );
            }
            Message::ResponseFwd { res_star } => {
                let Some(av) = self.outstanding.remove(&s) else {
                    Self::note(&mut out, s, EventKind::Rejected, "no outstanding AV");
                    return Ok(out);
                };
                if hn_verify_response(&av.hierarchy.res_star, &res_star) {
                    out.event(AuditEvent::new(
                        Actor::Hn,
                        s,
                        EventKind::MiddleHnRes,
                        &[&res_star, av.rand.as_bytes()],
                    ));
                    let k_seaf = av.hierarchy.k_seaf;
                    out.send(
                        Actor::Sn,
                        s,
                        Message::KeyRelease {
                            supi: av.supi.clone(),
                            k_seaf,
                        },
                    );
                    self.released.insert(s, (av.supi, Zeroizing::new(k_seaf)));
                } else {
                    out.event(
                        AuditEvent::new(Actor::Hn, s, EventKind::Abort, &[&res_star])
                            .with_note("RES* != XRES*"),
                    );
                }
            }
            Message::SyncFailure { auts, rand, .. } => {
                let Some(av) = self.outstanding.remove(&s) else {
                    Self::note(&mut out, s, EventKind::Rejected, "no outstanding AV");
                    return Ok(out);
                };
                if rand != av.rand {
                    Self::note(&mut out, s, EventKind::Rejected, "RAND does not match AV");
                    return Ok(out);
                }
                let Some(sub) = self.subscribers.get(&av.supi) else {
                    Self::note(&mut out, s, EventKind::Rejected, "unknown subscriber");
                    return Ok(out);
                };
                match hn_resync(sub, &auts, rand.as_bytes(), &av.hierarchy.hpk) {
                    Ok(updated) => {
                        let note = format!("sqn_hn={}", updated.sqn_hn);
                        out.event(
                            AuditEvent::new(Actor::Hn, s, EventKind::Resync, &[&auts.to_bytes()])
                                .with_note(note),
                        );
                        self.subscribers.insert(av.supi, updated);
                    }
                    Err(e) => Self::note(&mut out, s, EventKind::Rejected, &e.to_string()),
                }
            }
            Message::MacFailure => {
                if self.outstanding.remove(&s).is_some() {
                    Self::note(&mut out, s, EventKind::MacFailure, "session closed");
                } else {
                    Self::note(&mut out, s, EventKind::Rejected, "no outstanding AV");
                }
            }
            other => {
                return Err(ActorError::ProtocolViolation {
                    actor: Actor::Hn,
                    phase: "home",
                    kind: other.kind().name(),
                })
            }
        }
        Ok(out)
    }

    pub fn tick(&mut self, now_ms: u64) -> Vec<AuditEvent> {
        let expired: Vec<SessionId> = self
            .outstanding
            .iter()
            .filter(|(_, av)| av.deadline_ms <= now_ms)
            .map(|(s, _)| *s)
            .collect();
        expired
            .into_iter()
            .map(|s| {
                self.outstanding.remove(&s);
                AuditEvent::new(Actor::Hn, s, EventKind::Timeout, &[])
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aka::{Sqn, SubscriberRecord};
    use crate::prims::RustCryptoProvider;
    use crate::wire::MessageKind;
    use crate::xwing;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    const ID_SN: &[u8] = b"5G:mnc001.mcc001.3gppnetwork.org";

    struct Net {
        ue: UeState,
        sn: SnState,
        hn: HnState,
        rng: ChaCha20Rng,
    }

    fn net(sqn_ue: u64, sqn_hn: u64) -> Net {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let hn_keys = xwing::keygen(&RustCryptoProvider, &mut rng);
        let supi = Supi::new(b"imsi-001010000000001").unwrap();
        let k = LongTermKey::new(&[9; 32]).unwrap();
        let ue = UeState::new(
            supi.clone(),
            k.clone(),
            hn_keys.pk.clone(),
            ID_SN.to_vec(),
            Sqn::new(sqn_ue).unwrap(),
            crate::aka::DEFAULT_DELTA,
        );
        let mut hn = HnState::new(hn_keys.sk, hn_keys.pk);
        hn.provision(SubscriberRecord {
            supi,
            k,
            sqn_hn: Sqn::new(sqn_hn).unwrap(),
            amf: Default::default(),
        });
        Net {
            ue,
            sn: SnState::new(ID_SN.to_vec()),
            hn,
            rng,
        }
    }

    impl Net {
        fn deliver(&mut self, to: Actor, env: Envelope) -> Result<StepOutput, ActorError> {
            let mut ctx = Ctx {
                now_ms: 0,
                provider: &RustCryptoProvider,
                rng: &mut self.rng,
            };
            match to {
                Actor::Ue => self.ue.step(UeInput::Receive(env), &mut ctx),
                Actor::Sn => self.sn.step(env, &mut ctx),
                _ => self.hn.step(env, &mut ctx),
            }
        }

        fn start(&mut self, s: SessionId) -> Outgoing {
            let mut ctx = Ctx {
                now_ms: 0,
                provider: &RustCryptoProvider,
                rng: &mut self.rng,
            };
            self.ue.step(UeInput::Start(s), &mut ctx).unwrap().outgoing.remove(0)
        }

        /// Forward single outputs until `stop` is the next message kind.
        fn pump_until(&mut self, mut o: Outgoing, stop: MessageKind) -> Outgoing {
            while o.env.msg.kind() != stop {
                o = self.deliver(o.to, o.env).unwrap().outgoing.remove(0);
            }
            o
        }
    }

    #[test]
    fn out_of_phase_challenge_fails_ue() {
        let mut n = net(0, 1);
        let o = n.start(SessionId([1; 16]));
        let ch = n.pump_until(o, MessageKind::Challenge);
        let mut idle = net(0, 1);
        let err = idle.deliver(Actor::Ue, ch.env).unwrap_err();
        assert!(matches!(err, ActorError::ProtocolViolation { actor: Actor::Ue, .. }));
        assert!(matches!(idle.ue.phase, UePhase::Failed { .. }));
    }

    #[test]
    fn challenge_for_other_session_is_ignored() {
        let mut n = net(0, 1);
        let o = n.start(SessionId([1; 16]));
        let mut ch = n.pump_until(o, MessageKind::Challenge);
        ch.env.session = SessionId([2; 16]);
        let out = n.deliver(Actor::Ue, ch.env).unwrap();
        assert!(out.outgoing.is_empty());
        assert_eq!(out.events[0].kind, EventKind::Rejected);
        assert!(matches!(n.ue.phase, UePhase::AwaitingChallenge { .. }));
    }

    #[test]
    fn forged_response_stops_at_sn() {
        let mut n = net(0, 1);
        let s = SessionId([3; 16]);
        let o = n.start(s);
        let resp = n.pump_until(o, MessageKind::Response);
        let forged = Envelope {
            session: s,
            msg: Message::Response { res_star: [0; 32] },
        };
        let out = n.deliver(Actor::Sn, forged).unwrap();
        assert!(out.outgoing.is_empty());
        assert_eq!(out.events[0].kind, EventKind::Abort);
        // the session is gone, so the genuine response is now unsolicited
        let out = n.deliver(Actor::Sn, resp.env).unwrap();
        assert!(out.outgoing.is_empty());
        assert_eq!(out.events[0].kind, EventKind::Rejected);
    }

    #[test]
    fn stale_sqn_resyncs_via_sn() {
        let mut n = net(500, 10);
        let s = SessionId([4; 16]);
        let o = n.start(s);
        let sync = n.pump_until(o, MessageKind::SyncFailure);
        assert_eq!(sync.to, Actor::Sn);
        let fwd = n.deliver(Actor::Sn, sync.env.clone()).unwrap().outgoing.remove(0);
        assert_eq!(fwd.to, Actor::Hn);
        assert_eq!(fwd.env, sync.env);
        let out = n.deliver(Actor::Hn, fwd.env).unwrap();
        assert!(out.events.iter().any(|e| e.kind == EventKind::Resync));
        let sub = n.hn.subscribers.values().next().unwrap();
        assert_eq!(sub.sqn_hn.value(), 501);
    }

    #[test]
    fn sync_failure_with_foreign_rand_is_rejected() {
        let mut n = net(500, 10);
        let s = SessionId([5; 16]);
        let o = n.start(s);
        let sync = n.pump_until(o, MessageKind::SyncFailure);
        let Message::SyncFailure { auts, suci, .. } = sync.env.msg else { unreachable!() };
        let bogus = Envelope {
            session: s,
            msg: Message::SyncFailure {
                auts,
                rand: XWingCiphertext::from_bytes([7; 1120]),
                suci,
            },
        };
        let out = n.deliver(Actor::Hn, bogus).unwrap();
        assert_eq!(out.events[0].kind, EventKind::Rejected);
        assert_eq!(n.hn.subscribers.values().next().unwrap().sqn_hn.value(), 11);
    }

    #[test]
    fn bad_suci_mac_is_silent_abort() {
        let mut n = net(0, 1);
        let s = SessionId([6; 16]);
        let o = n.start(s);
        let mut req = n.pump_until(o, MessageKind::AuthRequest);
        if let Message::AuthRequest { suci, .. } = &mut req.env.msg {
            suci.c2[0] ^= 1;
        }
        let out = n.deliver(Actor::Hn, req.env).unwrap();
        assert!(out.outgoing.is_empty());
        assert_eq!(out.events[0].kind, EventKind::DeconcealFailed);
    }

    #[test]
    fn audit_digest_is_argument_only() {
        let a = AuditEvent::new(Actor::Ue, SessionId([1; 16]), EventKind::BeginUeRes, &[b"x", b"y"]);
        let b = AuditEvent::new(Actor::Sn, SessionId([2; 16]), EventKind::MiddleSnRes, &[b"x", b"y"]);
        let c = AuditEvent::new(Actor::Sn, SessionId([2; 16]), EventKind::MiddleSnRes, &[b"xy"]);
        assert_eq!(a.digest, b.digest);
        assert_ne!(b.digest, c.digest);
    }
}
