//! Batch commands behind the `sac` binary: run a scenario, scan a
//! transcript for slashable votes, fuzz light-client SPV.

pub mod bundled;
pub mod fixtures;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sac_core::checks::{catchup_detail, evaluate, p1_applies, p2_applies, CatchupDetail, Checks};
use sac_core::forensics::{hotstuff_scan, streamlet_attribute, streamlet_scan, verify_evidence, Attribution, Evidence, ForensicsError, HotstuffReport};
use sac_core::netsim::{plot_csv, trace_csv, Sim, Transcript};
use sac_core::scenario::{Scenario, ScenarioError};
use sac_core::spv::{spv_fuzz, SpvReport};
use sac_core::{Hash, NodeId, TxId};

/// Queries spent on the SPV summary inside `run`.
pub const RUN_SPV_QUERIES: u64 = 200;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("forensics: {0}")]
    Forensics(#[from] ForensicsError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Scenario(_) => "scenario",
            CliError::Forensics(_) => "forensics",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    CheckFailed = 1,
    InputError = 2,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.into(), source })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|source| CliError::Parse { path: path.into(), source })
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let sc: Scenario = parse(path)?;
    sc.validate()?;
    Ok(sc)
}

pub fn load_transcript(path: &Path) -> Result<Transcript, CliError> {
    parse(path)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ForensicSummary {
    pub accused_count: usize,
    pub accused: BTreeSet<NodeId>,
    pub witness: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpvSummary {
    pub queries: u64,
    pub accepted: u64,
    pub unavailable: u64,
    pub false_accepts: u64,
}

impl From<&SpvReport> for SpvSummary {
    fn from(r: &SpvReport) -> Self {
        let asked = r.honest_available.asked + r.honest_finalized.asked + r.byzantine.asked;
        let accepted = r.honest_available.accepted + r.honest_finalized.accepted + r.byzantine.accepted;
        SpvSummary { queries: r.queries, accepted, unavailable: asked - accepted, false_accepts: r.false_accepts() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub scenario: String,
    pub scenario_digest: Hash,
    pub checks: Checks,
    pub forensics: ForensicSummary,
    pub spv: SpvSummary,
    pub catchup: Vec<Option<CatchupDetail>>,
    pub passed: bool,
}

/// Streamlet scan plus, when the transcript carries a witness, attribution.
pub fn streamlet_forensics(t: &Transcript) -> (Vec<Evidence>, Option<Result<Attribution, ForensicsError>>) {
    let evidence = streamlet_scan(&t.votes);
    let attribution = t.witness.as_ref().map(|w| streamlet_attribute(w, t));
    (evidence, attribution)
}

pub fn cmd_run(sc: &Scenario, out: &Path) -> Result<(RunReport, Status), CliError> {
    sc.validate()?;
    fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.into(), source })?;
    let run = Sim::run(sc.clone())?;
    write(&out.join("trace.csv"), &trace_csv(&run.trace))?;
    write(&out.join("plot.csv"), &plot_csv(&run.monitor.series))?;
    write(&out.join("transcript.json"), &pretty(&run.transcript))?;

    let checks = evaluate(sc, &run.monitor);
    let (evidence, attribution) = streamlet_forensics(&run.transcript);
    let mut accused: BTreeSet<NodeId> = evidence.iter().map(|e| e.accused).collect();
    if let Some(Ok(a)) = &attribution {
        accused.extend(a.accused.iter().copied());
    }
    let spv = spv_fuzz(sc, RUN_SPV_QUERIES, sc.seed, liveness_from(sc).unwrap_or(u64::MAX))?;
    let spv = SpvSummary::from(&spv);
    let passed = !checks.any_failed() && spv.false_accepts == 0;
    let report = RunReport {
        scenario: sc.name.clone(),
        scenario_digest: sc.digest(),
        catchup: sc.partitions.iter().map(|p| catchup_detail(sc, &run.monitor, p.start_slot, p.end_slot)).collect(),
        checks,
        forensics: ForensicSummary { accused_count: accused.len(), accused, witness: run.transcript.witness.is_some() },
        spv,
        passed,
    };
    write(&out.join("report.json"), &pretty(&report))?;
    Ok((report, if passed { Status::Pass } else { Status::CheckFailed }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolArg {
    Streamlet,
    Hotstuff,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ForensicsReport {
    pub protocol: ProtocolArg,
    pub evidence: Vec<Evidence>,
    /// Whether each piece of evidence checks out against the transcript.
    pub verified: Vec<bool>,
    pub accused: BTreeSet<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribution: Option<Attribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribution_error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suppressed: Vec<sac_core::forensics::Suppressed>,
}

pub fn forensics(t: &Transcript, protocol: ProtocolArg) -> Result<ForensicsReport, CliError> {
    let lookup = t.bft_index();
    let (evidence, attribution, suppressed) = match protocol {
        ProtocolArg::Streamlet => {
            let (ev, attr) = streamlet_forensics(t);
            (ev, attr, Vec::new())
        }
        ProtocolArg::Hotstuff => {
            let HotstuffReport { evidence, suppressed } = hotstuff_scan(&t.votes, &lookup, t.n)?;
            (evidence, None, suppressed)
        }
    };
    let verified = evidence.iter().map(|e| verify_evidence(e, &lookup, t.n)).collect();
    let mut accused: BTreeSet<NodeId> = evidence.iter().map(|e| e.accused).collect();
    let (attribution, attribution_error) = match attribution {
        Some(Ok(a)) => {
            accused.extend(a.accused.iter().copied());
            (Some(a), None)
        }
        Some(Err(e)) => (None, Some(e.to_string())),
        None => (None, None),
    };
    Ok(ForensicsReport { protocol, evidence, verified, accused, attribution, attribution_error, suppressed })
}

pub fn cmd_forensics(transcript: &Path, protocol: ProtocolArg, out: &Path) -> Result<(ForensicsReport, Status), CliError> {
    let report = forensics(&load_transcript(transcript)?, protocol)?;
    write(out, &pretty(&report))?;
    Ok((report, Status::Pass))
}

/// First slot from which light clients must answer as fast as full
/// clients, or `None` when the scenario gives no such guarantee.
pub fn liveness_from(sc: &Scenario) -> Option<u64> {
    if p2_applies(sc) {
        Some(0)
    } else if p1_applies(sc) && !sc.partitions.is_empty() {
        Some(sc.gst.max(sc.got) + 2 * sc.delta)
    } else {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpvFuzzOutput {
    pub scenario: String,
    pub seed: u64,
    pub liveness_window: Option<u64>,
    pub summary: SpvSummary,
    pub report: SpvReport,
    pub passed: bool,
}

pub fn cmd_spv_fuzz(sc: &Scenario, queries: u64, seed: u64, out: &Path) -> Result<(SpvFuzzOutput, Status), CliError> {
    sc.validate()?;
    let window = liveness_from(sc);
    let report = spv_fuzz(sc, queries, seed, window.unwrap_or(u64::MAX))?;
    let passed = report.false_accepts() == 0 && report.misses == 0;
    let output = SpvFuzzOutput {
        scenario: sc.name.clone(),
        seed,
        liveness_window: window,
        summary: SpvSummary::from(&report),
        report,
        passed,
    };
    write(out, &pretty(&output))?;
    Ok((output, if passed { Status::Pass } else { Status::CheckFailed }))
}

/// `(slot, node, tx)` of the first false accept, else of the first miss.
pub fn offending(r: &SpvReport) -> Option<(u64, NodeId, TxId)> {
    r.first_false_accept.or(r.first_miss)
}
