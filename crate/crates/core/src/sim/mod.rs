//! In-memory three-party network with a scripted adversary.
//!
//! All randomness comes from one ChaCha20 stream seeded by the config, so
//! `(config, script)` fixes the transcript byte for byte. The clock is
//! logical: every delivery costs one millisecond and `Advance` jumps.

pub mod deduce;
pub mod recording;
pub mod scenario;

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::actors::{
    Actor, ActorError, AuditEvent, Ctx, EventKind, HnState, SnState, StepOutput, UeInput, UePhase,
    UeState, DEFAULT_TIMEOUT_MS,
};
use crate::aka::{
    key_confirmation_tag, verify_key_confirmation, Amf, Sqn, SubscriberRecord, DEFAULT_DELTA,
    KEY_LEN,
};
use crate::identity::{Supi, SUPI_DEFAULT_LEN};
use crate::prims::{provider_by_name, LongTermKey, PrimitiveProvider};
use crate::wire::{self, Envelope, Message, MessageKind, SessionId};
use crate::xwing::{self, XWingPublicKey, XWingSecretKey};

use deduce::{Knowledge, Sort};
use recording::{RecordingProvider, Trapdoors};

pub const DEFAULT_ID_SN: &[u8] = b"5G:mnc093.mcc208.3gppnetwork.org";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("action {action} refers to message #{index}, which does not exist at that point")]
    NoSuchMessage { action: usize, index: usize },
    #[error("filter on message #{index} never fired; the run only produced {produced} messages")]
    FilterNeverFired { index: usize, produced: usize },
    #[error("action {action}: {reason}")]
    Invalid { action: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Actor(#[from] ActorError),
    #[error("unknown backend {0:?}")]
    UnknownBackend(String),
    #[error("bad configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub seed: u64,
    pub delta: u64,
    /// Explicit SUPI; otherwise `supi_len` random bytes.
    pub supi: Option<Vec<u8>>,
    pub supi_len: usize,
    pub amf: Amf,
    pub id_sn: Vec<u8>,
    pub sch_public: bool,
    pub timeout_ms: u64,
    pub sqn_ue: u64,
    /// Defaults to `sqn_ue + 1`.
    pub sqn_hn: Option<u64>,
    pub k_len: usize,
    pub key_confirmation: bool,
    pub backend: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            delta: DEFAULT_DELTA,
            supi: None,
            supi_len: SUPI_DEFAULT_LEN,
            amf: Amf::default(),
            id_sn: DEFAULT_ID_SN.to_vec(),
            sch_public: false,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            sqn_ue: 0,
            sqn_hn: None,
            k_len: LongTermKey::DEFAULT_LEN,
            key_confirmation: false,
            backend: "rustcrypto".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// UE <-> SN radio link, always adversary-visible.
    Usch,
    /// SN <-> HN core link.
    Sch,
}

impl Channel {
    /// Anything touching the UE is radio; adversary frames to the SN
    /// arrive over the radio side, those to the HN over the core link.
    fn between(from: Actor, to: Actor) -> Self {
        match (from, to) {
            (Actor::Ue, _) | (_, Actor::Ue) => Channel::Usch,
            (Actor::Adversary, Actor::Sn) => Channel::Usch,
            _ => Channel::Sch,
        }
    }
}

/// Which session id a replayed or injected message carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionRef {
    Keep,
    Fresh,
    /// The UE's current session.
    Current,
    Fixed(SessionId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ByteEdit {
    Xor { offset: usize, mask: u8 },
    Truncate(usize),
    Overwrite { offset: usize, bytes: Vec<u8> },
}

impl ByteEdit {
    fn apply(&self, bytes: &mut Vec<u8>) {
        match self {
            ByteEdit::Xor { offset, mask } => {
                if let Some(b) = bytes.get_mut(*offset) {
                    *b ^= mask;
                }
            }
            ByteEdit::Truncate(n) => bytes.truncate(*n),
            ByteEdit::Overwrite { offset, bytes: with } => {
                for (i, b) in with.iter().enumerate() {
                    if let Some(slot) = bytes.get_mut(offset + i) {
                        *slot = *b;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakKey {
    SkHn,
    K,
    /// Ephemeral UE secrets, captured at concealment time.
    SkUe,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// UE starts a registration; the network then runs until quiet.
    Start,
    /// No-op marker; visible traffic is always observed.
    Observe,
    /// Never deliver message `n`.
    Drop(usize),
    /// Alter message `n` in transit.
    Modify(usize, ByteEdit),
    /// Deliver a copy of message `index` to `to`.
    Replay {
        index: usize,
        to: Actor,
        session: SessionRef,
    },
    Inject {
        to: Actor,
        session: SessionRef,
        msg: Message,
    },
    Advance(u64),
    /// Reveal long-term keys. Only valid once every honest session is over.
    LeakAtPhase(Vec<LeakKey>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdversaryScript {
    pub actions: Vec<Action>,
}

impl AdversaryScript {
    pub fn new(actions: Vec<Action>) -> Self {
        Self { actions }
    }

    /// `n` honest registrations and nothing else.
    pub fn honest(n: usize) -> Self {
        Self::new(vec![Action::Start; n])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Honest,
    Replay(usize),
    Injected,
}

#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub index: usize,
    pub time_ms: u64,
    pub channel: Channel,
    pub from: Actor,
    pub to: Actor,
    pub origin: Origin,
    pub kind: &'static str,
    pub summary: String,
    #[serde(serialize_with = "ser_hex")]
    pub sent: Vec<u8>,
    /// What reached `to`; `None` when dropped.
    #[serde(serialize_with = "ser_hex_opt")]
    pub delivered: Option<Vec<u8>>,
}

fn ser_hex<S: serde::Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode(b))
}

fn ser_hex_opt<S: serde::Serializer>(b: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
    match b {
        Some(b) => s.serialize_str(&hex::encode(b)),
        None => s.serialize_none(),
    }
}

impl Entry {
    pub fn to_line(&self) -> String {
        let status = match &self.delivered {
            None => "dropped",
            Some(d) if *d != self.sent => "modified",
            Some(_) => "delivered",
        };
        let origin = match self.origin {
            Origin::Honest => String::new(),
            Origin::Replay(i) => format!(" replay-of=#{i}"),
            Origin::Injected => " injected".into(),
        };
        format!(
            "#{} t={} {:?} {}->{} {}{} {} {}",
            self.index,
            self.time_ms,
            self.channel,
            self.from,
            self.to,
            status,
            origin,
            self.summary,
            hex::encode(&self.sent)
        )
    }
}

/// Keys each party ended a registration with.
#[derive(Debug, Clone, Serialize)]
pub struct SessionRecord {
    #[serde(serialize_with = "ser_session")]
    pub session: SessionId,
    #[serde(serialize_with = "ser_key_opt")]
    pub ue_k_seaf: Option<[u8; KEY_LEN]>,
    #[serde(serialize_with = "ser_key_opt")]
    pub sn_k_seaf: Option<[u8; KEY_LEN]>,
    #[serde(serialize_with = "ser_key_opt")]
    pub hn_k_seaf: Option<[u8; KEY_LEN]>,
}

fn ser_session<S: serde::Serializer>(v: &SessionId, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn ser_key_opt<S: serde::Serializer>(v: &Option<[u8; KEY_LEN]>, s: S) -> Result<S::Ok, S::Error> {
    // keys are logged as digests only
    match v {
        Some(k) => s.serialize_str(&hex::encode(crate::aka::key_digest(k))),
        None => s.serialize_none(),
    }
}

impl SessionRecord {
    /// All three parties hold the same anchor key.
    pub fn agreed(&self) -> bool {
        matches!((self.ue_k_seaf, self.sn_k_seaf, self.hn_k_seaf),
            (Some(a), Some(b), Some(c)) if a == b && b == c)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Transcript {
    pub entries: Vec<Entry>,
    pub events: Vec<AuditEvent>,
    pub sessions: Vec<SessionRecord>,
    /// Entry count at the moment keys leaked.
    pub leak_at: Option<usize>,
    #[serde(skip)]
    pub leaked: Vec<(LeakKey, Vec<u8>)>,
}

impl Transcript {
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let _ = writeln!(s, "{}", e.to_line());
        }
        s
    }

    pub fn audit_log(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            let _ = writeln!(s, "{}", e.to_line());
        }
        s
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &AuditEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

pub struct RunResult {
    pub config: SimConfig,
    pub transcript: Transcript,
    pub ue: UeState,
    pub sn: SnState,
    pub hn: HnState,
    pub pk_hn: XWingPublicKey,
    pub trapdoors: Trapdoors,
    pub provider: Arc<dyn PrimitiveProvider>,
}

impl RunResult {
    /// Whether the adversary sees entry `e`.
    pub fn visible(&self, e: &Entry) -> bool {
        e.channel == Channel::Usch || self.config.sch_public || e.origin != Origin::Honest
    }

    /// Every adversary-visible wire byte string, as sent and as delivered.
    pub fn public_bytes(&self) -> Vec<&[u8]> {
        let mut out = Vec::new();
        for e in self.transcript.entries.iter().filter(|e| self.visible(e)) {
            out.push(e.sent.as_slice());
            if let Some(d) = &e.delivered {
                out.push(d.as_slice());
            }
        }
        out
    }

    /// Adversary knowledge from visible entries before `upto` plus the
    /// selected leaks, not yet closed.
    pub fn knowledge(&self, upto: Option<usize>, leaks: &[LeakKey]) -> Knowledge {
        let mut k = Knowledge::with_public(&self.pk_hn, &self.config.id_sn);
        let end = upto.unwrap_or(self.transcript.entries.len());
        for e in self.transcript.entries[..end].iter().filter(|e| self.visible(e)) {
            for bytes in [Some(&e.sent), e.delivered.as_ref()].into_iter().flatten() {
                if let Ok(env) = wire::decode(bytes) {
                    k.observe(e.index, &env.msg);
                }
            }
        }
        for (key, bytes) in &self.transcript.leaked {
            if leaks.contains(key) {
                let sort = match key {
                    LeakKey::SkHn | LeakKey::SkUe => Sort::XWingSk,
                    LeakKey::K => Sort::LongTermKey,
                };
                k.add_leak(sort, bytes.clone());
            }
        }
        k
    }

    pub fn supi(&self) -> &Supi {
        &self.ue.supi
    }
}

struct Sim {
    cfg: SimConfig,
    provider: Arc<RecordingProvider>,
    rng: ChaCha20Rng,
    now_ms: u64,
    ue: UeState,
    sn: SnState,
    hn: HnState,
    queue: VecDeque<usize>,
    transcript: Transcript,
    drops: BTreeSet<usize>,
    edits: Vec<(usize, ByteEdit)>,
    ue_secrets: Vec<XWingSecretKey>,
}

/// Execute `script` against freshly provisioned parties.
///
/// A script that refers to a message index that never materialises is
/// rejected as a whole; no partial transcript is returned.
pub fn run_session(cfg: &SimConfig, script: &AdversaryScript) -> Result<RunResult, SimError> {
    let mut sim = Sim::provision(cfg)?;
    // filters apply wherever they appear in the script
    for a in &script.actions {
        match a {
            Action::Drop(n) => {
                sim.drops.insert(*n);
            }
            Action::Modify(n, edit) => sim.edits.push((*n, edit.clone())),
            _ => {}
        }
    }
    for (i, a) in script.actions.iter().enumerate() {
        sim.act(i, a)?;
    }
    let produced = sim.transcript.entries.len();
    let filtered = sim.drops.iter().copied().chain(sim.edits.iter().map(|(n, _)| *n));
    for index in filtered {
        if index >= produced {
            return Err(ScriptError::FilterNeverFired { index, produced }.into());
        }
    }
    Ok(sim.finish())
}

impl Sim {
    fn provision(cfg: &SimConfig) -> Result<Self, SimError> {
        let backend =
            provider_by_name(&cfg.backend).ok_or_else(|| SimError::UnknownBackend(cfg.backend.clone()))?;
        let provider = Arc::new(RecordingProvider::new(backend));
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);

        let hn_keys = xwing::keygen(&*provider, &mut rng);
        let supi_bytes = match &cfg.supi {
            Some(s) => s.clone(),
            None => {
                let mut b = vec![0u8; cfg.supi_len];
                rng.fill_bytes(&mut b);
                b
            }
        };
        let supi = Supi::new(&supi_bytes).map_err(|e| SimError::Config(e.to_string()))?;
        let mut k = vec![0u8; cfg.k_len];
        rng.fill_bytes(&mut k);
        let k = LongTermKey::new(&k).map_err(|e| SimError::Config(e.to_string()))?;
        let sqn_ue = Sqn::new(cfg.sqn_ue).map_err(|e| SimError::Config(e.to_string()))?;
        let sqn_hn = Sqn::new(cfg.sqn_hn.unwrap_or(cfg.sqn_ue + 1))
            .map_err(|e| SimError::Config(e.to_string()))?;

        let mut ue = UeState::new(
            supi.clone(),
            k.clone(),
            hn_keys.pk.clone(),
            cfg.id_sn.clone(),
            sqn_ue,
            cfg.delta,
        );
        ue.timeout_ms = cfg.timeout_ms;
        let mut sn = SnState::new(cfg.id_sn.clone());
        sn.timeout_ms = cfg.timeout_ms;
        let mut hn = HnState::new(hn_keys.sk, hn_keys.pk);
        hn.timeout_ms = cfg.timeout_ms;
        hn.provision(SubscriberRecord {
            supi,
            k,
            sqn_hn,
            amf: cfg.amf,
        });

        Ok(Self {
            cfg: cfg.clone(),
            provider,
            rng,
            now_ms: 0,
            ue,
            sn,
            hn,
            queue: VecDeque::new(),
            transcript: Transcript::default(),
            drops: BTreeSet::new(),
            edits: Vec::new(),
            ue_secrets: Vec::new(),
        })
    }

    fn fresh_session(&mut self) -> SessionId {
        let mut id = [0u8; 16];
        self.rng.fill_bytes(&mut id);
        SessionId(id)
    }

    fn resolve(&mut self, r: &SessionRef, keep: SessionId) -> SessionId {
        match r {
            SessionRef::Keep => keep,
            SessionRef::Fresh => self.fresh_session(),
            SessionRef::Current => self.ue.current_session().unwrap_or(keep),
            SessionRef::Fixed(s) => *s,
        }
    }

    fn act(&mut self, i: usize, action: &Action) -> Result<(), SimError> {
        match action {
            Action::Start => {
                if self.transcript.leak_at.is_some() {
                    return Err(ScriptError::Invalid {
                        action: i,
                        reason: "no honest sessions after the leak phase".into(),
                    }
                    .into());
                }
                let session = self.fresh_session();
                let out = {
                    let mut ctx = Ctx {
                        now_ms: self.now_ms,
                        provider: &*self.provider,
                        rng: &mut self.rng,
                    };
                    self.ue.step(UeInput::Start(session), &mut ctx)
                };
                if let Some(sk) = self.ue.ephemeral_secret() {
                    self.ue_secrets.push(sk.clone());
                }
                self.absorb(Actor::Ue, out)?;
                self.quiesce()?;
                self.key_confirmation(session);
                self.record_session(session);
            }
            Action::Observe | Action::Drop(_) | Action::Modify(..) => {}
            Action::Replay { index, to, session } => {
                let Some(entry) = self.transcript.entries.get(*index) else {
                    return Err(ScriptError::NoSuchMessage {
                        action: i,
                        index: *index,
                    }
                    .into());
                };
                let bytes = entry.sent.clone();
                let mut env = wire::decode(&bytes).map_err(|e| ScriptError::Invalid {
                    action: i,
                    reason: format!("message #{index} does not decode: {e}"),
                })?;
                env.session = self.resolve(session, env.session);
                self.emit(Actor::Adversary, *to, env, Origin::Replay(*index));
                self.quiesce()?;
            }
            Action::Inject { to, session, msg } => {
                let fallback = self.fresh_session();
                let session = self.resolve(session, fallback);
                let env = Envelope {
                    session,
                    msg: msg.clone(),
                };
                self.emit(Actor::Adversary, *to, env, Origin::Injected);
                self.quiesce()?;
            }
            Action::Advance(ms) => {
                self.now_ms += ms;
                let now = self.now_ms;
                let mut ev = self.ue.tick(now);
                ev.extend(self.sn.tick(now));
                ev.extend(self.hn.tick(now));
                self.transcript.events.extend(ev);
            }
            Action::LeakAtPhase(keys) => {
                self.transcript.leak_at = Some(self.transcript.entries.len());
                for key in keys {
                    match key {
                        LeakKey::SkHn => self
                            .transcript
                            .leaked
                            .push((LeakKey::SkHn, self.hn.sk_hn.as_bytes().to_vec())),
                        LeakKey::K => self
                            .transcript
                            .leaked
                            .push((LeakKey::K, self.ue.k.as_bytes().to_vec())),
                        LeakKey::SkUe => {
                            for sk in &self.ue_secrets {
                                self.transcript
                                    .leaked
                                    .push((LeakKey::SkUe, sk.as_bytes().to_vec()));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn emit(&mut self, from: Actor, to: Actor, env: Envelope, origin: Origin) -> usize {
        let index = self.transcript.entries.len();
        let sent = wire::encode(&env).expect("actor messages fit the TLV limits");
        let delivered = if self.drops.contains(&index) {
            None
        } else {
            let mut d = sent.clone();
            for (_, edit) in self.edits.iter().filter(|(n, _)| *n == index) {
                edit.apply(&mut d);
            }
            Some(d)
        };
        let channel = Channel::between(from, to);
        self.transcript.entries.push(Entry {
            index,
            time_ms: self.now_ms,
            channel,
            from,
            to,
            origin,
            kind: env.msg.kind().name(),
            summary: env.msg.summary(),
            sent,
            delivered,
        });
        self.queue.push_back(index);
        index
    }

    fn absorb(&mut self, from: Actor, out: Result<StepOutput, ActorError>) -> Result<(), SimError> {
        match out {
            Ok(out) => {
                self.transcript.events.extend(out.events);
                for o in out.outgoing {
                    self.emit(from, o.to, o.env, Origin::Honest);
                }
                Ok(())
            }
            Err(e @ ActorError::ProtocolViolation { .. }) => {
                let session = self.ue.current_session().unwrap_or_default();
                let mut ev = AuditEvent::new(from, session, EventKind::Rejected, &[]);
                ev.note = e.to_string();
                self.transcript.events.push(ev);
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    }

    fn quiesce(&mut self) -> Result<(), SimError> {
        while let Some(index) = self.queue.pop_front() {
            let entry = &self.transcript.entries[index];
            let Some(bytes) = entry.delivered.clone() else { continue };
            let to = entry.to;
            self.now_ms += 1;
            let env = match wire::decode(&bytes) {
                Ok(env) => env,
                Err(e) => {
                    let mut ev = AuditEvent::new(to, SessionId::default(), EventKind::Rejected, &[]);
                    ev.note = format!("undecodable message #{index}: {e}");
                    self.transcript.events.push(ev);
                    continue;
                }
            };
            let out = {
                let mut ctx = Ctx {
                    now_ms: self.now_ms,
                    provider: &*self.provider,
                    rng: &mut self.rng,
                };
                match to {
                    Actor::Ue => self.ue.step(UeInput::Receive(env), &mut ctx),
                    Actor::Sn => self.sn.step(env, &mut ctx),
                    Actor::Hn => self.hn.step(env, &mut ctx),
                    Actor::Adversary => Ok(StepOutput::default()),
                }
            };
            self.absorb(to, out)?;
        }
        Ok(())
    }

    /// Optional tag exchange proving both ends hold the same anchor key.
    fn key_confirmation(&mut self, session: SessionId) {
        if !self.cfg.key_confirmation {
            return;
        }
        let (Some(ue_key), Some(done)) = (self.ue.k_seaf(), self.sn.completed.get(&session)) else {
            return;
        };
        let mut nonce = [0u8; 16];
        self.rng.fill_bytes(&mut nonce);
        let tag = key_confirmation_tag(ue_key, &nonce);
        let ok = verify_key_confirmation(&done.k_seaf, &nonce, &tag);
        let mut ev = AuditEvent::new(
            Actor::Sn,
            session,
            if ok { EventKind::KeyConfirmed } else { EventKind::Abort },
            &[&nonce, &tag],
        );
        if !ok {
            ev.note = "key confirmation failed".into();
        }
        self.transcript.events.push(ev);
    }

    fn record_session(&mut self, session: SessionId) {
        let ue_k_seaf = match &self.ue.phase {
            UePhase::Done { session: s, k_seaf, .. } if *s == session => Some(**k_seaf),
            _ => None,
        };
        self.transcript.sessions.push(SessionRecord {
            session,
            ue_k_seaf,
            sn_k_seaf: self.sn.completed.get(&session).map(|c| *c.k_seaf),
            hn_k_seaf: self.hn.released.get(&session).map(|(_, k)| **k),
        });
    }

    fn finish(self) -> RunResult {
        RunResult {
            trapdoors: self.provider.trapdoors(),
            provider: self.provider.inner().clone(),
            config: self.cfg,
            transcript: self.transcript,
            pk_hn: self.hn.pk_hn.clone(),
            ue: self.ue,
            sn: self.sn,
            hn: self.hn,
        }
    }
}

/// Kind of the message sent as entry `index`.
pub fn kind_at(result: &RunResult, index: usize) -> Option<MessageKind> {
    result
        .transcript
        .entries
        .get(index)
        .and_then(|e| wire::decode(&e.sent).ok())
        .map(|env| env.msg.kind())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64) -> SimConfig {
        SimConfig {
            seed,
            ..SimConfig::default()
        }
    }

    #[test]
    fn honest_sessions_agree_and_follow_layout() {
        let run = run_session(&cfg(1), &AdversaryScript::honest(3)).unwrap();
        assert_eq!(run.transcript.entries.len(), 3 * scenario::MSGS_PER_SESSION);
        assert!(run.transcript.sessions.iter().all(SessionRecord::agreed));
        let kinds: Vec<&str> = run.transcript.entries[..7].iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            [
                "Registration",
                "AuthRequest",
                "SeAv",
                "Challenge",
                "Response",
                "ResponseFwd",
                "KeyRelease"
            ]
        );
        assert_eq!(run.ue.sqn_ue.value(), 3);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = run_session(&cfg(5), &AdversaryScript::honest(2)).unwrap();
        let b = run_session(&cfg(5), &AdversaryScript::honest(2)).unwrap();
        let c = run_session(&cfg(6), &AdversaryScript::honest(2)).unwrap();
        assert_eq!(a.transcript.dump(), b.transcript.dump());
        assert_eq!(a.transcript.audit_log(), b.transcript.audit_log());
        assert_ne!(a.transcript.dump(), c.transcript.dump());
    }

    #[test]
    fn dropped_challenge_times_out() {
        let script = AdversaryScript::new(vec![Action::Start, Action::Drop(3), Action::Advance(DEFAULT_TIMEOUT_MS + 1)]);
        let run = run_session(&cfg(2), &script).unwrap();
        assert!(run.transcript.entries[3].delivered.is_none());
        assert_eq!(run.transcript.entries.len(), 4);
        let timeouts: Vec<Actor> = run.transcript.events_of(EventKind::Timeout).map(|e| e.actor).collect();
        assert!(timeouts.contains(&Actor::Ue));
        assert!(timeouts.contains(&Actor::Sn));
        assert!(timeouts.contains(&Actor::Hn));
        assert!(run.hn.outstanding.is_empty());
    }

    #[test]
    fn missing_indices_are_script_errors() {
        let e = run_session(&cfg(2), &AdversaryScript::new(vec![Action::Start, Action::Drop(40)]));
        assert!(matches!(e, Err(SimError::Script(ScriptError::FilterNeverFired { index: 40, produced: 7 }))));
        let replay = Action::Replay {
            index: 9,
            to: Actor::Sn,
            session: SessionRef::Keep,
        };
        let e = run_session(&cfg(2), &AdversaryScript::new(vec![Action::Start, replay]));
        assert!(matches!(e, Err(SimError::Script(ScriptError::NoSuchMessage { action: 1, index: 9 }))));
        let e = run_session(&cfg(2), &AdversaryScript::new(vec![Action::LeakAtPhase(vec![]), Action::Start]));
        assert!(matches!(e, Err(SimError::Script(ScriptError::Invalid { action: 1, .. }))));
    }

    #[test]
    fn truncated_frame_is_rejected_not_fatal() {
        let script = AdversaryScript::new(vec![Action::Start, Action::Modify(0, ByteEdit::Truncate(10))]);
        let run = run_session(&cfg(3), &script).unwrap();
        assert_eq!(run.transcript.entries.len(), 1);
        assert!(run.transcript.events_of(EventKind::Rejected).any(|e| e.note.contains("undecodable")));
    }

    #[test]
    fn core_link_hidden_unless_public() {
        let run = run_session(&cfg(4), &AdversaryScript::honest(1)).unwrap();
        let visible = run.transcript.entries.iter().filter(|e| run.visible(e)).count();
        assert_eq!(visible, 3);
        let open = run_session(&SimConfig { sch_public: true, ..cfg(4) }, &AdversaryScript::honest(1)).unwrap();
        assert_eq!(open.transcript.entries.iter().filter(|e| open.visible(e)).count(), 7);
    }

    #[test]
    fn key_confirmation_event() {
        let run = run_session(&SimConfig { key_confirmation: true, ..cfg(8) }, &AdversaryScript::honest(1)).unwrap();
        assert_eq!(run.transcript.events_of(EventKind::KeyConfirmed).count(), 1);
        assert_eq!(run.transcript.entries.len(), 7);
    }

    #[test]
    fn unknown_backend() {
        let c = SimConfig { backend: "nope".into(), ..cfg(0) };
        assert!(matches!(run_session(&c, &AdversaryScript::honest(1)), Err(SimError::UnknownBackend(_))));
    }

    #[test]
    fn leaked_ue_secrets_are_snapshotted() {
        let script = AdversaryScript::new(vec![Action::Start, Action::Start, Action::LeakAtPhase(vec![LeakKey::SkUe])]);
        let run = run_session(&cfg(9), &script).unwrap();
        assert_eq!(run.transcript.leaked.len(), 2);
        assert_eq!(run.transcript.leak_at, Some(14));
    }
}
