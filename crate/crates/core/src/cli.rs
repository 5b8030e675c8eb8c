//! `hpqc` command-line driver.
//!
//! Exit codes: 0 success or expected verdict, 1 mismatch, 2 usage error.
//! Settings resolve as defaults, then `--config` file, then flags.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use crate::aka::{key_digest, Amf};
use crate::bench;
use crate::sim::scenario::{run_scenario, ScenarioName};
use crate::sim::{
    run_session, Action, AdversaryScript, ByteEdit, RunResult, SimConfig, SimError,
};
use crate::vectors::{self, VectorError};
use crate::wire::HEADER_LEN;

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hpqc", version, about = "Hybrid post-quantum 5G AKA: handshakes, vectors, attacks, overheads")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// key=value settings file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream; equal seeds give identical transcripts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// SQN acceptance window.
    #[arg(long, global = true)]
    pub delta: Option<u64>,
    /// SUPI as text; random bytes of `--supi-len` otherwise.
    #[arg(long, global = true)]
    pub supi: Option<String>,
    /// Length of the random SUPI, 1 to 64 bytes.
    #[arg(long, global = true)]
    pub supi_len: Option<usize>,
    /// Primitive backend.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Let the adversary see the SN-HN link.
    #[arg(long, global = true)]
    pub sch_public: bool,
    /// Deadline for pending SN and HN state.
    #[arg(long, global = true)]
    pub timeout_ms: Option<u64>,
    /// Output directory (handshake) or file (vectors emit).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one honest registration and compare the three anchor keys.
    Handshake {
        /// Flip a bit of the challenge MAC in transit.
        #[arg(long)]
        corrupt: bool,
    },
    /// Emit or verify known-answer vector files.
    Vectors {
        #[command(subcommand)]
        action: VectorsCmd,
    },
    /// Run an adversary scenario (or `all`) and report its verdict.
    Attack {
        /// Scenario name, or `all` to run every scenario.
        scenario: String,
    },
    /// Time the protocol steps and account message sizes.
    Bench {
        /// Timed repetitions per step.
        #[arg(long, default_value_t = 100)]
        iterations: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum VectorsCmd {
    /// Write a freshly generated vector file.
    Emit {
        /// Records per kind.
        #[arg(long, default_value_t = 4)]
        count: usize,
    },
    /// Recompute every record of a vector file; exit 1 on the first mismatch.
    Verify { path: PathBuf },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected key=value")]
    Syntax { path: String, line: usize },
    #[error("{path}:{line}: unknown key {key:?}")]
    UnknownKey { path: String, line: usize, key: String },
    #[error("{path}:{line}: bad value for {key}: {value:?}")]
    BadValue { path: String, line: usize, key: String, value: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

fn parse_u64(v: &str) -> Option<u64> {
    if let Some(h) = v.strip_prefix("0x") {
        u64::from_str_radix(h, 16).ok()
    } else if let Some(e) = v.strip_prefix("2^") {
        e.parse::<u32>().ok().and_then(|e| 1u64.checked_shl(e))
    } else {
        v.parse().ok()
    }
}

/// Apply a `key=value` settings file on top of `cfg`.
pub fn apply_config_text(cfg: &mut SimConfig, text: &str, path: &str) -> Result<(), ConfigError> {
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let Some((key, value)) = raw.split_once('=') else {
            return Err(ConfigError::Syntax { path: path.into(), line });
        };
        let (key, value) = (key.trim(), value.trim());
        let bad = || ConfigError::BadValue {
            path: path.into(),
            line,
            key: key.into(),
            value: value.into(),
        };
        let num = || parse_u64(value).ok_or_else(bad);
        match key {
            "seed" => cfg.seed = num()?,
            "delta" => cfg.delta = num()?,
            "supi" => cfg.supi = Some(value.as_bytes().to_vec()),
            "supi_len" => cfg.supi_len = num()? as usize,
            "amf" => cfg.amf = Amf::from_u16(u16::try_from(num()?).map_err(|_| bad())?),
            "backend" => cfg.backend = value.into(),
            "sch_public" => cfg.sch_public = parse_bool(value).ok_or_else(bad)?,
            "timeout_ms" => cfg.timeout_ms = num()?,
            "sqn_ue" => cfg.sqn_ue = num()?,
            "sqn_hn" => cfg.sqn_hn = Some(num()?),
            "key_len" => cfg.k_len = num()? as usize,
            "key_confirmation" => cfg.key_confirmation = parse_bool(value).ok_or_else(bad)?,
            "id_sn" => cfg.id_sn = value.as_bytes().to_vec(),
            _ => {
                return Err(ConfigError::UnknownKey {
                    path: path.into(),
                    line,
                    key: key.into(),
                })
            }
        }
    }
    Ok(())
}

/// Defaults, then config file, then flags.
pub fn resolve_config(g: &GlobalOpts) -> Result<SimConfig, ConfigError> {
    let mut cfg = SimConfig::default();
    if let Some(path) = &g.config {
        let p = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: p.clone(), source })?;
        apply_config_text(&mut cfg, &text, &p)?;
    }
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = g.delta {
        cfg.delta = v;
    }
    if let Some(v) = &g.supi {
        cfg.supi = Some(v.as_bytes().to_vec());
    }
    if let Some(v) = g.supi_len {
        cfg.supi_len = v;
    }
    if let Some(v) = &g.backend {
        cfg.backend = v.clone();
    }
    if g.sch_public {
        cfg.sch_public = true;
    }
    if let Some(v) = g.timeout_ms {
        cfg.timeout_ms = v;
    }
    Ok(cfg)
}

/// Parse `args` and execute; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let cfg = match resolve_config(&cli.global) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let g = &cli.global;
    let result = match &cli.command {
        Command::Handshake { corrupt } => handshake(&cfg, *corrupt, g, out),
        Command::Vectors { action } => vectors_cmd(&cfg, action, g, out, err),
        Command::Attack { scenario } => attack(&cfg, scenario, g.format, out, err),
        Command::Bench { iterations } => bench_cmd(&cfg, *iterations, g.format, out),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Io(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_MISMATCH
        }
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Offset of the first AUTN MAC byte in an encoded challenge frame:
/// header, RAND TLV, AUTN TLV header, then CONC and AMF.
const CHALLENGE_MAC_OFFSET: usize = HEADER_LEN + 3 + crate::xwing::CIPHERTEXT_LEN + 3 + 8;

fn handshake(cfg: &SimConfig, corrupt: bool, g: &GlobalOpts, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut actions = vec![Action::Start];
    if corrupt {
        actions.push(Action::Modify(
            3,
            ByteEdit::Xor {
                offset: CHALLENGE_MAC_OFFSET,
                mask: 0x01,
            },
        ));
    }
    let run = run_session(cfg, &AdversaryScript::new(actions))?;
    let rec = &run.transcript.sessions[0];
    let digest = |k: Option<[u8; 32]>| k.map_or_else(|| "none".to_string(), |k| hex::encode(key_digest(&k)));
    let views = [
        ("UE", digest(rec.ue_k_seaf)),
        ("SN", digest(rec.sn_k_seaf)),
        ("HN", digest(rec.hn_k_seaf)),
    ];
    let agreed = rec.agreed();

    if let Some(dir) = &g.out {
        write_transcript(&run, dir)?;
    }
    match g.format {
        Format::Json => {
            let v = json!({
                "session": rec.session.to_string(),
                "k_seaf_digest": { "ue": views[0].1, "sn": views[1].1, "hn": views[2].1 },
                "match": agreed,
                "transcript": run.transcript.entries,
                "events": run.transcript.events,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("serializable"))?;
        }
        Format::Text => {
            writeln!(out, "session {}", rec.session)?;
            for (who, d) in &views {
                writeln!(out, "k_seaf digest {who} {d}")?;
            }
            if agreed {
                writeln!(out, "match: all three views agree")?;
            } else {
                writeln!(out, "MISMATCH:")?;
                for (who, d) in &views {
                    if *d != views[0].1 || d == "none" {
                        writeln!(out, "  {who} differs: {d}")?;
                    }
                }
                write!(out, "{}", run.transcript.audit_log())?;
            }
        }
    }
    Ok(if agreed { EXIT_OK } else { EXIT_MISMATCH })
}

/// `transcript.txt`, `audit.log` and `transcript.json` under `dir`.
fn write_transcript(run: &RunResult, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("transcript.txt"), run.transcript.dump())?;
    fs::write(dir.join("audit.log"), run.transcript.audit_log())?;
    let json = serde_json::to_string_pretty(&run.transcript).expect("serializable");
    fs::write(dir.join("transcript.json"), json)
}

fn vectors_cmd(
    cfg: &SimConfig,
    action: &VectorsCmd,
    g: &GlobalOpts,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let provider = crate::prims::provider_by_name(&cfg.backend)
        .ok_or_else(|| CliError::Usage(format!("unknown backend {:?}", cfg.backend)))?;
    match action {
        VectorsCmd::Emit { count } => {
            let text = vectors::emit(cfg.seed, *count, &*provider);
            match &g.out {
                Some(path) => fs::write(path, text)?,
                None => out.write_all(text.as_bytes())?,
            }
            Ok(EXIT_OK)
        }
        VectorsCmd::Verify { path } => {
            let text = fs::read_to_string(path)?;
            let res = vectors::verify(&text, &*provider);
            match (g.format, &res) {
                (Format::Json, Ok(n)) => writeln!(out, "{}", json!({ "ok": true, "records": n }))?,
                (Format::Json, Err(e)) => writeln!(out, "{}", json_vector_error(e))?,
                (Format::Text, Ok(n)) => writeln!(out, "ok: {n} records verified")?,
                (Format::Text, Err(e)) => writeln!(err, "{}: {e}", path.display())?,
            }
            Ok(if res.is_ok() { EXIT_OK } else { EXIT_MISMATCH })
        }
    }
}

fn json_vector_error(e: &VectorError) -> serde_json::Value {
    match e {
        VectorError::Mismatch { line, field } => {
            json!({ "ok": false, "line": line, "field": field })
        }
        VectorError::Parse { line, reason } => {
            json!({ "ok": false, "line": line, "error": reason })
        }
    }
}

fn attack(
    cfg: &SimConfig,
    name: &str,
    format: Format,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let names: Vec<ScenarioName> = if name == "all" {
        ScenarioName::ALL.to_vec()
    } else {
        match name.parse() {
            Ok(n) => vec![n],
            Err(e) => {
                let all: Vec<&str> = ScenarioName::ALL.iter().map(|n| n.as_str()).collect();
                writeln!(err, "error: {e}; known: all, {}", all.join(", "))?;
                return Ok(EXIT_USAGE);
            }
        }
    };
    let mut verdicts = Vec::new();
    for n in names {
        verdicts.push(run_scenario(n, cfg)?);
    }
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&verdicts).expect("serializable"))?,
        Format::Text => {
            for v in &verdicts {
                write!(out, "{}", v.report())?;
            }
        }
    }
    Ok(if verdicts.iter().all(|v| v.as_expected()) {
        EXIT_OK
    } else {
        EXIT_MISMATCH
    })
}

fn bench_cmd(cfg: &SimConfig, iterations: usize, format: Format, out: &mut dyn Write) -> Result<i32, CliError> {
    let report = bench::run(cfg, iterations).map_err(|e| CliError::Usage(e.to_string()))?;
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("serializable"))?,
        Format::Text => write!(out, "{}", report.to_text())?,
    }
    Ok(if report.sizes_match() { EXIT_OK } else { EXIT_MISMATCH })
}
