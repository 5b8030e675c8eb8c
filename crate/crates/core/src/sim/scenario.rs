//! Named adversary scenarios and their verdicts.
//!
//! Secrecy targets are checked by closing the adversary's knowledge under
//! the deduction rules; agreement targets by matching audit events.
//! Every failing verdict carries a witness: a derivation tree or the
//! offending event trace.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use super::deduce::{Knowledge, RuleSet, Sort, DEFAULT_DEPTH};
use super::{
    kind_at, run_session, Action, AdversaryScript, LeakKey, RunResult, SessionRef, SimConfig,
    SimError,
};
use crate::actors::{Actor, AuditEvent, EventKind};
use crate::aka::RES_STAR_LEN;
use crate::wire::{Message, MessageKind};

/// Per-session message layout of an honest registration.
pub const MSGS_PER_SESSION: usize = 7;
const CHALLENGE: usize = 3;
const RESPONSE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ScenarioName {
    S0,
    S1,
    S2,
    S3,
    S4,
    S4Replay,
    S5,
    S6,
    Fs,
    FsSanity,
    BreakX25519,
    BreakMlKem,
    BreakBoth,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 13] = [
        Self::S0,
        Self::S1,
        Self::S2,
        Self::S3,
        Self::S4,
        Self::S4Replay,
        Self::S5,
        Self::S6,
        Self::Fs,
        Self::FsSanity,
        Self::BreakX25519,
        Self::BreakMlKem,
        Self::BreakBoth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::S0 => "s0",
            Self::S1 => "s1",
            Self::S2 => "s2",
            Self::S3 => "s3",
            Self::S4 => "s4",
            Self::S4Replay => "s4-replay",
            Self::S5 => "s5",
            Self::S6 => "s6",
            Self::Fs => "fs",
            Self::FsSanity => "fs-sanity",
            Self::BreakX25519 => "break-x25519",
            Self::BreakMlKem => "break-mlkem",
            Self::BreakBoth => "break-both",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::S0 => "SUPI secrecy against a radio-link observer",
            Self::S1 => "secrecy of the UE's anchor key",
            Self::S2 => "secrecy of the SN's anchor key",
            Self::S3 => "secrecy of the HN's anchor key",
            Self::S4 => "injective agreement on the SUPI (UE to HN)",
            Self::S4Replay => "SUCI replayed under a fresh session (expected to break injectivity)",
            Self::S5 => "injective agreement on the challenge MAC under challenge replay",
            Self::S6 => "anchor-key chain agreement with a public core link and forged responses",
            Self::Fs => "forward secrecy of the anchor key after sk_HN and K leak",
            Self::FsSanity => "FS sanity: leaking the UE ephemeral as well must expose the anchor key",
            Self::BreakX25519 => "anchor key secrecy with X25519 broken",
            Self::BreakMlKem => "anchor key secrecy with ML-KEM broken",
            Self::BreakBoth => "anchor key secrecy with both components broken (expected to fail)",
        }
    }

    /// Whether a correct implementation passes this scenario.
    pub fn expected_pass(self) -> bool {
        !matches!(self, Self::S4Replay | Self::FsSanity | Self::BreakBoth)
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown scenario {0:?}")]
pub struct UnknownScenario(pub String);

impl FromStr for ScenarioName {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub scenario: ScenarioName,
    pub description: &'static str,
    pub passed: bool,
    pub expected_pass: bool,
    /// Individual checks, one line each.
    pub checks: Vec<String>,
    pub witness: Option<String>,
}

impl Verdict {
    pub fn as_expected(&self) -> bool {
        self.passed == self.expected_pass
    }

    pub fn report(&self) -> String {
        let mut s = format!(
            "{} {}: {} (expected {})\n",
            if self.as_expected() { "OK  " } else { "BAD " },
            self.scenario,
            if self.passed { "pass" } else { "fail" },
            if self.expected_pass { "pass" } else { "fail" },
        );
        s.push_str(&format!("  {}\n", self.description));
        for c in &self.checks {
            s.push_str(&format!("  - {c}\n"));
        }
        if let Some(w) = &self.witness {
            s.push_str("  witness:\n");
            for line in w.lines() {
                s.push_str(&format!("    {line}\n"));
            }
        }
        s
    }
}

/// Every `end` event must consume a distinct earlier `begin` with the same
/// argument digest. Returns the number of matched ends.
pub fn injective_agreement(
    events: &[AuditEvent],
    begin: EventKind,
    end: EventKind,
) -> Result<usize, String> {
    let mut used = vec![false; events.len()];
    let mut matched = 0;
    for (i, e) in events.iter().enumerate().filter(|(_, e)| e.kind == end) {
        let partner = events[..i]
            .iter()
            .enumerate()
            .position(|(j, b)| !used[j] && b.kind == begin && b.digest == e.digest);
        match partner {
            Some(j) => {
                used[j] = true;
                matched += 1;
            }
            None => {
                let earlier: Vec<String> = events[..i]
                    .iter()
                    .filter(|b| b.kind == begin && b.digest == e.digest)
                    .map(|b| format!("already consumed: {}", b.to_line()))
                    .collect();
                let mut w = format!("unmatched: {}\n", e.to_line());
                for line in earlier {
                    w.push_str(&line);
                    w.push('\n');
                }
                if w.lines().count() == 1 {
                    w.push_str(&format!("no {} with the same arguments\n", begin.name()));
                }
                return Err(w);
            }
        }
    }
    Ok(matched)
}

/// `endSN_ANCHOR_KEY` in a session needs `middleHN_RES` before it in the
/// same session, which needs `middleSN_RES` and then `beginUE_RES` with
/// the same `(RES*, RAND)`, all injectively.
pub fn anchor_chain(events: &[AuditEvent]) -> Result<usize, String> {
    let mut used = vec![false; events.len()];
    let mut chains = 0;
    let take = |used: &mut Vec<bool>, upto: usize, pred: &dyn Fn(&AuditEvent) -> bool| {
        let j = (0..upto).rev().find(|&j| !used[j] && pred(&events[j]))?;
        used[j] = true;
        Some(j)
    };
    for (i, end) in events.iter().enumerate() {
        if end.kind != EventKind::EndSnAnchorKey {
            continue;
        }
        let fail = |what: &str| format!("{}\nno matching {what} before it\n", end.to_line());
        let hn = take(&mut used, i, &|e| {
            e.kind == EventKind::MiddleHnRes && e.session == end.session
        })
        .ok_or_else(|| fail("middleHN_RES"))?;
        let d = events[hn].digest;
        let sn = take(&mut used, hn, &|e| e.kind == EventKind::MiddleSnRes && e.digest == d)
            .ok_or_else(|| fail("middleSN_RES"))?;
        take(&mut used, sn, &|e| e.kind == EventKind::BeginUeRes && e.digest == d)
            .ok_or_else(|| fail("beginUE_RES"))?;
        chains += 1;
    }
    Ok(chains)
}

/// Close `k` and test for `target` bytes of sort `sort`.
fn derive(
    run: &RunResult,
    k: Knowledge,
    rules: &RuleSet,
    sort: Sort,
    target: &[u8],
) -> (Knowledge, Option<usize>) {
    let closed = k.closure(DEFAULT_DEPTH, rules, &*run.provider, &run.trapdoors);
    let hit = closed.get(sort, target);
    (closed, hit)
}

fn secrecy_check(
    run: &RunResult,
    k: Knowledge,
    rules: &RuleSet,
    sort: Sort,
    target: &[u8],
    label: &str,
    checks: &mut Vec<String>,
) -> Result<(), String> {
    let (closed, hit) = derive(run, k, rules, sort, target);
    match hit {
        None => {
            checks.push(format!(
                "{label} not derivable ({} terms, depth {DEFAULT_DEPTH})",
                closed.len()
            ));
            Ok(())
        }
        Some(id) => {
            let replayed = closed.replay(id, &*run.provider, &run.trapdoors);
            checks.push(format!(
                "{label} derivable at depth {} (derivation replays: {replayed})",
                closed.term(id).depth
            ));
            Err(closed.witness(id))
        }
    }
}

fn expect_kind(run: &RunResult, index: usize, kind: MessageKind) -> Result<(), SimError> {
    match kind_at(run, index) {
        Some(k) if k == kind => Ok(()),
        other => Err(SimError::Config(format!(
            "message #{index} is {other:?}, scenario expects {kind:?}"
        ))),
    }
}

/// Anchor key of the first session as held by `who`.
fn anchor_key(run: &RunResult, who: Actor) -> Option<[u8; 32]> {
    let s = run.transcript.sessions.first()?;
    match who {
        Actor::Ue => s.ue_k_seaf,
        Actor::Sn => s.sn_k_seaf,
        _ => s.hn_k_seaf,
    }
}

/// Run one scenario on top of `base` (seed, SUPI and so on).
pub fn run_scenario(name: ScenarioName, base: &SimConfig) -> Result<Verdict, SimError> {
    let mut cfg = base.clone();
    let mut checks = Vec::new();
    let leak_hn_k = || Action::LeakAtPhase(vec![LeakKey::SkHn, LeakKey::K]);

    let outcome: Result<(), String> = match name {
        ScenarioName::S0 => {
            cfg.sch_public = false;
            let run = run_session(&cfg, &AdversaryScript::honest(1))?;
            let supi = run.supi().as_bytes().to_vec();
            let k = run.knowledge(None, &[]);
            secrecy_check(&run, k, &RuleSet::default(), Sort::Supi, &supi, "SUPI", &mut checks)
        }
        ScenarioName::S1 | ScenarioName::S2 | ScenarioName::S3 => {
            let who = match name {
                ScenarioName::S1 => Actor::Ue,
                ScenarioName::S2 => Actor::Sn,
                _ => Actor::Hn,
            };
            let run = run_session(&cfg, &AdversaryScript::honest(1))?;
            let key = anchor_key(&run, who)
                .ok_or_else(|| SimError::Config(format!("{who} holds no anchor key")))?;
            checks.push(format!("{who} completed with an anchor key"));
            let k = run.knowledge(None, &[]);
            let label = format!("K_SEAF held by {who}");
            secrecy_check(&run, k, &RuleSet::default(), Sort::KSeaf, &key, &label, &mut checks)
        }
        ScenarioName::S4 => {
            let run = run_session(&cfg, &AdversaryScript::honest(1))?;
            injective_agreement(
                &run.transcript.events,
                EventKind::BeginUeHnSupi,
                EventKind::EndUeHnSupi,
            )
            .map(|n| checks.push(format!("{n} endUE_HN_SUPI matched injectively")))
        }
        ScenarioName::S4Replay => {
            let script = AdversaryScript::new(vec![
                Action::Start,
                Action::Replay {
                    index: 0,
                    to: Actor::Sn,
                    session: SessionRef::Fresh,
                },
            ]);
            let run = run_session(&cfg, &script)?;
            expect_kind(&run, 0, MessageKind::Registration)?;
            let ends = run.transcript.events_of(EventKind::EndUeHnSupi).count();
            checks.push(format!("HN deconcealed {ends} times for one UE registration"));
            injective_agreement(
                &run.transcript.events,
                EventKind::BeginUeHnSupi,
                EventKind::EndUeHnSupi,
            )
            .map(|n| checks.push(format!("{n} endUE_HN_SUPI matched injectively")))
        }
        ScenarioName::S5 => {
            let second_challenge = MSGS_PER_SESSION + CHALLENGE;
            let script = AdversaryScript::new(vec![
                Action::Start,
                Action::Drop(second_challenge),
                Action::Start,
                Action::Replay {
                    index: CHALLENGE,
                    to: Actor::Ue,
                    session: SessionRef::Current,
                },
            ]);
            let run = run_session(&cfg, &script)?;
            expect_kind(&run, CHALLENGE, MessageKind::Challenge)?;
            expect_kind(&run, second_challenge, MessageKind::Challenge)?;
            let mac_failures = run
                .transcript
                .events_of(EventKind::MacFailure)
                .filter(|e| e.actor == Actor::Ue)
                .count();
            checks.push(format!("UE reported {mac_failures} MAC failure(s) on the replayed challenge"));
            let agree = injective_agreement(
                &run.transcript.events,
                EventKind::BeginHnUeMac,
                EventKind::EndUeHnMac,
            );
            match agree {
                Ok(n) if mac_failures == 1 => {
                    checks.push(format!("{n} endUE_HN_MAC matched injectively"));
                    Ok(())
                }
                Ok(_) => Err(format!(
                    "replayed challenge was not rejected by MAC check\n{}",
                    run.transcript.audit_log()
                )),
                Err(w) => Err(w),
            }
        }
        ScenarioName::S6 => {
            cfg.sch_public = true;
            let second_response = MSGS_PER_SESSION + RESPONSE;
            let forged = [0xA5u8; RES_STAR_LEN];
            let script = AdversaryScript::new(vec![
                Action::Start,
                Action::Drop(second_response),
                Action::Start,
                Action::Inject {
                    to: Actor::Sn,
                    session: SessionRef::Current,
                    msg: Message::Response { res_star: forged },
                },
                Action::Inject {
                    to: Actor::Hn,
                    session: SessionRef::Current,
                    msg: Message::ResponseFwd { res_star: forged },
                },
            ]);
            let run = run_session(&cfg, &script)?;
            expect_kind(&run, second_response, MessageKind::Response)?;
            let ev = &run.transcript.events;
            let releases = ev.iter().filter(|e| e.kind == EventKind::EndSnAnchorKey).count();
            checks.push(format!("{releases} anchor key(s) released across 2 sessions"));
            let first_release = run
                .transcript
                .entries
                .iter()
                .position(|e| e.kind == MessageKind::KeyRelease.name())
                .unwrap_or(run.transcript.entries.len());
            let key = anchor_key(&run, Actor::Ue)
                .ok_or_else(|| SimError::Config("session 1 did not complete".into()))?;
            let prefix = run.knowledge(Some(first_release), &[]);
            let secrecy = secrecy_check(
                &run,
                prefix,
                &RuleSet::default(),
                Sort::KSeaf,
                &key,
                "K_SEAF before its release on the public core link",
                &mut checks,
            );
            anchor_chain(ev)
                .and_then(|n| {
                    checks.push(format!("{n} endSN_ANCHOR_KEY with a full injective chain"));
                    if releases == 1 {
                        Ok(())
                    } else {
                        Err(format!("forged responses led to {releases} key releases\n"))
                    }
                })
                .and(secrecy)
        }
        ScenarioName::Fs => {
            let script = AdversaryScript::new(vec![Action::Start, leak_hn_k()]);
            let run = run_session(&cfg, &script)?;
            let key = anchor_key(&run, Actor::Ue)
                .ok_or_else(|| SimError::Config("session did not complete".into()))?;
            let supi = run.supi().as_bytes().to_vec();
            let full = run.knowledge(None, &[LeakKey::SkHn, LeakKey::K]);
            let r1 = secrecy_check(
                &run,
                full,
                &RuleSet::default(),
                Sort::KSeaf,
                &key,
                "K_SEAF after sk_HN and K leak",
                &mut checks,
            );
            let k_only = run.knowledge(None, &[LeakKey::K]);
            let (closed, supi_hit) = derive(&run, k_only, &RuleSet::default(), Sort::Supi, &supi);
            let key_hit = closed.get(Sort::KSeaf, &key);
            checks.push(format!(
                "after K-only leak: SUPI derivable {}, K_SEAF derivable {}",
                supi_hit.is_some(),
                key_hit.is_some()
            ));
            let r2 = match supi_hit.or(key_hit) {
                None => Ok(()),
                Some(id) => Err(closed.witness(id)),
            };
            r1.and(r2)
        }
        ScenarioName::FsSanity => {
            let script = AdversaryScript::new(vec![
                Action::Start,
                Action::LeakAtPhase(vec![LeakKey::SkHn, LeakKey::K, LeakKey::SkUe]),
            ]);
            let run = run_session(&cfg, &script)?;
            let key = anchor_key(&run, Actor::Ue)
                .ok_or_else(|| SimError::Config("session did not complete".into()))?;
            let k = run.knowledge(None, &[LeakKey::SkHn, LeakKey::K, LeakKey::SkUe]);
            secrecy_check(
                &run,
                k,
                &RuleSet::default(),
                Sort::KSeaf,
                &key,
                "K_SEAF after sk_HN, K and sk_UE leak",
                &mut checks,
            )
        }
        ScenarioName::BreakX25519 | ScenarioName::BreakMlKem | ScenarioName::BreakBoth => {
            let rules = RuleSet {
                break_x25519: name != ScenarioName::BreakMlKem,
                break_mlkem: name != ScenarioName::BreakX25519,
                adversary_encaps: false,
            };
            let script = AdversaryScript::new(vec![Action::Start, leak_hn_k()]);
            let run = run_session(&cfg, &script)?;
            let key = anchor_key(&run, Actor::Ue)
                .ok_or_else(|| SimError::Config("session did not complete".into()))?;
            let k = run.knowledge(None, &[LeakKey::SkHn, LeakKey::K]);
            let label = format!(
                "K_SEAF after sk_HN and K leak (x25519 broken: {}, ML-KEM broken: {})",
                rules.break_x25519, rules.break_mlkem
            );
            secrecy_check(&run, k, &rules, Sort::KSeaf, &key, &label, &mut checks)
        }
    };

    let (passed, witness) = match outcome {
        Ok(()) => (true, None),
        Err(w) => (false, Some(w)),
    };
    Ok(Verdict {
        scenario: name,
        description: name.description(),
        passed,
        expected_pass: name.expected_pass(),
        checks,
        witness,
    })
}
