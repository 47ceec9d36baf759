//! Line-delimited JSON episode traces.
//!
//! A trace file holds one header line, one line per step and, unless the
//! episode was cut short, an end line. Lines are only ever appended.

use super::violation::ViolationRecord;
use crate::error::{Error, Result};
use crate::fuzzer::{FuzzEvent, PatternKind, SvDecision};
use crate::sim::VehicleState;
use crate::sut::SutDecision;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: u32,
    pub crate_version: String,
    pub method: String,
    pub sut: String,
    pub scenario: String,
    pub lanes: usize,
    pub master_seed: u64,
    pub repetition: usize,
    pub episode: usize,
    pub episode_seed: u64,
    pub lane_width: f64,
    pub route_length: f64,
    pub step_cap: usize,
    /// Snapshot of the full configuration.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub time: f64,
    /// States after the step.
    pub ego: VehicleState,
    pub surrounding: Vec<VehicleState>,
    pub sut: SutDecision,
    pub decisions: Vec<SvDecision>,
    /// Pattern currently driving each surrounding vehicle.
    pub owners: Vec<Option<PatternKind>>,
    pub frozen: Vec<bool>,
    pub events: Vec<FuzzEvent>,
    /// Smallest ego-to-SV footprint gap, m.
    pub min_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum Outcome {
    Destination,
    Violation,
    /// The ego crashed without enough surrounding vehicles nearby.
    EgoCrash,
    StepCap,
    /// A controller failed; the trace is poisoned.
    Aborted { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEnd {
    pub outcome: Outcome,
    pub steps: u64,
    pub violation: Option<ViolationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
enum Line {
    Header(TraceHeader),
    Step(StepRecord),
    End(TraceEnd),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub steps: Vec<StepRecord>,
    pub end: Option<TraceEnd>,
}

impl EpisodeTrace {
    pub fn new(header: TraceHeader) -> Self {
        Self {
            header,
            steps: Vec::new(),
            end: None,
        }
    }

    pub fn is_poisoned(&self) -> bool {
        matches!(
            self.end,
            Some(TraceEnd {
                outcome: Outcome::Aborted { .. },
                ..
            })
        )
    }

    /// Writes the trace as JSON lines.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = |l: &Line| -> Result<()> {
            serde_json::to_writer(&mut w, l)?;
            w.write_all(b"\n").map_err(|e| Error::io("<trace>", e))
        };
        line(&Line::Header(self.header.clone()))?;
        for s in &self.steps {
            line(&Line::Step(s.clone()))?;
        }
        if let Some(end) = &self.end {
            line(&Line::End(end.clone()))?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(String::from_utf8(buf).expect("json is utf-8"))
    }

    /// Parses a trace; a missing end line is accepted.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut header = None;
        let mut steps: Vec<StepRecord> = Vec::new();
        let mut end = None;
        for (no, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<trace>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: &str| Error::InvalidTrace(format!("line {}: {m}", no + 1));
            if end.is_some() {
                return Err(bad("content after end record"));
            }
            match serde_json::from_str::<Line>(&line).map_err(|e| bad(&e.to_string()))? {
                Line::Header(h) if header.is_none() => header = Some(h),
                Line::Header(_) => return Err(bad("duplicate header")),
                _ if header.is_none() => return Err(bad("missing header")),
                Line::Step(s) => {
                    if steps.last().is_some_and(|p| p.step >= s.step) {
                        return Err(bad("step index not increasing"));
                    }
                    steps.push(s);
                }
                Line::End(e) => end = Some(e),
            }
        }
        let header = header.ok_or_else(|| Error::InvalidTrace("empty trace".into()))?;
        Ok(Self { header, steps, end })
    }

    pub fn from_jsonl(s: &str) -> Result<Self> {
        Self::read_from(s.as_bytes())
    }

    /// Hex sha256 of the JSON-lines encoding.
    pub fn hash(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        self.write_to(HashWriter(&mut hasher))?;
        Ok(hex::encode(hasher.finalize()))
    }
}

struct HashWriter<'a>(&'a mut Sha256);

impl Write for HashWriter<'_> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

pub fn export_trace(trace: &EpisodeTrace, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    trace.write_to(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_trace(path: &Path) -> Result<EpisodeTrace> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    EpisodeTrace::read_from(BufReader::new(file))
}
