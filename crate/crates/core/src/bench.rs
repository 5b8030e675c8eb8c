//! Per-step timings and per-message byte accounting.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::aka::{
    generate_av, ue_process_challenge, ChallengeOutcome, Sqn, SubscriberRecord, AUTN_LEN,
    HXRES_STAR_LEN,
};
use crate::identity::{conceal_supi, deconceal_suci, Supi, MAC_TAG_LEN};
use crate::prims::{provider_by_name, LongTermKey, MLKEM_EK_LEN};
use crate::sim::{run_session, AdversaryScript, SimConfig, SimError};
use crate::wire::{self, MessageKind};
use crate::xwing::{self, CIPHERTEXT_LEN};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("benchmark step failed: {0}")]
    Step(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct StepTiming {
    pub step: &'static str,
    pub what: &'static str,
    pub median_us: f64,
    pub min_us: f64,
    pub max_us: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeRow {
    pub message: &'static str,
    /// Sum of field value bytes.
    pub payload: usize,
    /// Full frame: header, TLV headers and payload.
    pub encoded: usize,
    /// Closed-form payload from component sizes, where one is defined.
    pub derived: Option<usize>,
    pub formula: Option<String>,
}

impl SizeRow {
    pub fn matches(&self) -> bool {
        self.derived.is_none_or(|d| d == self.payload)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub iterations: usize,
    pub backend: String,
    pub timings: Vec<StepTiming>,
    pub sizes: Vec<SizeRow>,
}

impl BenchReport {
    pub fn sizes_match(&self) -> bool {
        self.sizes.iter().all(SizeRow::matches)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("backend {} iterations {}\n", self.backend, self.iterations);
        s.push_str("step              median_us      min_us      max_us  what\n");
        for t in &self.timings {
            s.push_str(&format!(
                "{:<17} {:>10.1} {:>11.1} {:>11.1}  {}\n",
                t.step, t.median_us, t.min_us, t.max_us, t.what
            ));
        }
        s.push_str("message        payload  encoded  derived\n");
        for r in &self.sizes {
            let derived = match (&r.derived, &r.formula) {
                (Some(d), Some(f)) => format!(
                    "{d} = {f} {}",
                    if r.matches() { "ok" } else { "MISMATCH" }
                ),
                _ => "-".into(),
            };
            s.push_str(&format!("{:<14} {:>7} {:>8}  {}\n", r.message, r.payload, r.encoded, derived));
        }
        s
    }
}

/// Payload sizes implied by component lengths alone.
pub fn derived_payload(kind: MessageKind, supi_len: usize) -> Option<(usize, String)> {
    match kind {
        MessageKind::Registration => Some((
            CIPHERTEXT_LEN + supi_len + MLKEM_EK_LEN + MAC_TAG_LEN,
            format!("{CIPHERTEXT_LEN} + ({supi_len}+{MLKEM_EK_LEN}) + {MAC_TAG_LEN}"),
        )),
        MessageKind::Challenge => Some((
            CIPHERTEXT_LEN + AUTN_LEN,
            format!("{CIPHERTEXT_LEN} + {AUTN_LEN}"),
        )),
        MessageKind::SeAvMsg => Some((
            CIPHERTEXT_LEN + AUTN_LEN + HXRES_STAR_LEN,
            format!("{CIPHERTEXT_LEN} + {AUTN_LEN} + {HXRES_STAR_LEN}"),
        )),
        _ => None,
    }
}

/// Byte counts measured on an honest run's transcript.
pub fn size_accounting(cfg: &SimConfig) -> Result<Vec<SizeRow>, SimError> {
    let run = run_session(cfg, &AdversaryScript::honest(1))?;
    let supi_len = run.supi().len();
    let mut rows = Vec::new();
    for e in &run.transcript.entries {
        let env = wire::decode(&e.sent).expect("honest frames decode");
        let kind = env.msg.kind();
        let (derived, formula) = derived_payload(kind, supi_len).unzip();
        rows.push(SizeRow {
            message: kind.name(),
            payload: env.msg.payload_len(),
            encoded: e.sent.len(),
            derived,
            formula,
        });
    }
    Ok(rows)
}

fn stats(step: &'static str, what: &'static str, mut v: Vec<Duration>) -> StepTiming {
    v.sort();
    let us = |d: Duration| d.as_secs_f64() * 1e6;
    let n = v.len();
    let median = if n % 2 == 1 {
        us(v[n / 2])
    } else {
        (us(v[n / 2 - 1]) + us(v[n / 2])) / 2.0
    };
    StepTiming {
        step,
        what,
        median_us: median,
        min_us: us(v[0]),
        max_us: us(v[n - 1]),
    }
}

/// Time the four cryptographic steps `iterations` times each.
pub fn run(cfg: &SimConfig, iterations: usize) -> Result<BenchReport, BenchError> {
    if iterations == 0 {
        return Err(BenchError::NoIterations);
    }
    let provider = provider_by_name(&cfg.backend)
        .ok_or_else(|| SimError::UnknownBackend(cfg.backend.clone()))?;
    let p = &*provider;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let hn = xwing::keygen(p, &mut rng);
    let supi = Supi::new(&vec![0x42; cfg.supi_len]).map_err(|e| BenchError::Step(e.to_string()))?;
    let k = LongTermKey::new(&[7u8; 32]).expect("32 bytes");
    let mut sub = SubscriberRecord {
        supi: supi.clone(),
        k: k.clone(),
        sqn_hn: Sqn::new(1).expect("small"),
        amf: cfg.amf,
    };
    let mut sqn_ue = Sqn::new(0).expect("small");
    let mut t = [const { Vec::new() }; 4];

    for _ in 0..iterations {
        let start = Instant::now();
        let conc = conceal_supi(&supi, &hn.pk, p, &mut rng).map_err(|e| BenchError::Step(e.to_string()))?;
        t[0].push(start.elapsed());

        let start = Instant::now();
        let (_, pk1) = deconceal_suci(&conc.suci, &hn.sk, p).map_err(|e| BenchError::Step(e.to_string()))?;
        t[1].push(start.elapsed());

        let start = Instant::now();
        let av = generate_av(&sub, &conc.suci.c0, &pk1, &cfg.id_sn, p, &mut rng)
            .map_err(|e| BenchError::Step(e.to_string()))?;
        t[2].push(start.elapsed());
        sub = av.subscriber;

        let start = Instant::now();
        let (outcome, next) = ue_process_challenge(
            &k,
            sqn_ue,
            conc.sk_ue,
            &av.se_av.rand,
            &av.se_av.autn,
            &cfg.id_sn,
            cfg.delta,
            p,
        );
        t[3].push(start.elapsed());
        if !matches!(outcome, ChallengeOutcome::Success { .. }) {
            return Err(BenchError::Step("challenge rejected".into()));
        }
        sqn_ue = next;
    }

    let [t11, t13, t21, t23] = t;
    Ok(BenchReport {
        iterations,
        backend: p.name().to_string(),
        timings: vec![
            stats("conceal", "UE: X-Wing keygen, encapsulate, seal SUCI", t11),
            stats("deconceal", "HN: decapsulate, verify and open SUCI", t13),
            stats("generate_av", "HN: encapsulate to UE, derive AV", t21),
            stats("process_challenge", "UE: decapsulate, verify AUTN, derive keys", t23),
        ],
        sizes: size_accounting(cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_iteration_and_sizes() {
        let r = run(&SimConfig::default(), 1).unwrap();
        assert_eq!(r.timings.len(), 4);
        assert!(r.sizes_match());
        let payload = |m: &str| r.sizes.iter().find(|s| s.message == m).unwrap().payload;
        assert_eq!(payload(MessageKind::Registration.name()), 2352);
        assert_eq!(payload(MessageKind::Challenge.name()), 1136);
        assert_eq!(payload(MessageKind::SeAvMsg.name()), 1152);
        assert!(matches!(run(&SimConfig::default(), 0), Err(BenchError::NoIterations)));
    }
}
