use super::config::{Config, Method};
use super::episode::{mix_seed, run_episode, EpisodeId, EpisodeResult, FuzzerController, RandomController, Scenario, SequenceController, SvController};
use super::metrics::{aggregate_top_k, top_k_index, violation_rate};
use super::trace::{export_trace, Outcome};
use super::violation::ViolationRecord;
use crate::baselines::{nsga2, Evaluation};
use crate::error::{Error, Result};
use crate::fuzzer::FuzzerConfig;
use crate::marl::{Checkpoint, TrainMethod};
use crate::sut::SutKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Rank of the violation the TOP-K metric looks for.
pub const TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationEntry {
    /// 1-based episode index within the repetition.
    pub episode: usize,
    pub record: ViolationRecord,
    pub trace_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub repetition: usize,
    pub seed: u64,
    pub violations: usize,
    pub violation_rate: f64,
    pub top_k: Option<usize>,
    pub violated: Vec<bool>,
    pub outcomes: BTreeMap<String, usize>,
    pub entries: Vec<ViolationEntry>,
    /// sha256 over the episode trace hashes in order.
    pub trace_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub method: Method,
    pub scenario: String,
    pub lanes: usize,
    pub sut: SutKind,
    pub budget: usize,
    pub repetitions: usize,
    pub master_seed: u64,
    pub k: usize,
    pub per_repetition: Vec<RepetitionReport>,
    /// Mean violation rate over repetitions, percent.
    pub violation_rate: f64,
    pub top_k: Option<f64>,
}

impl CampaignReport {
    pub fn violation_counts(&self) -> Vec<usize> {
        self.per_repetition.iter().map(|r| r.violations).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// What a campaign worker keeps from one episode.
struct EpisodeSummary {
    violation: Option<ViolationRecord>,
    outcome: Outcome,
    min_gap: f64,
    hash: String,
}

fn outcome_name(o: &Outcome) -> &'static str {
    match o {
        Outcome::Destination => "destination",
        Outcome::Violation => "violation",
        Outcome::EgoCrash => "ego_crash",
        Outcome::StepCap => "step_cap",
        Outcome::Aborted { .. } => "aborted",
    }
}

fn trace_path(dir: &Path, id: EpisodeId) -> PathBuf {
    dir.join(format!("rep{:02}_ep{:04}.jsonl", id.repetition, id.episode + 1))
}

fn summarize(scenario: &Scenario, id: EpisodeId, mut result: EpisodeResult) -> Result<EpisodeSummary> {
    let hash = result.trace.hash()?;
    let cfg = &scenario.config;
    if let Some(dir) = &cfg.trace_dir {
        if result.violation.is_some() || cfg.save_all_traces {
            let path = trace_path(dir, id);
            export_trace(&result.trace, &path)?;
            if let Some(v) = &mut result.violation {
                v.trace = Some(path.display().to_string());
            }
        }
    }
    Ok(EpisodeSummary {
        violation: result.violation,
        outcome: result.outcome,
        min_gap: result.min_gap,
        hash,
    })
}

fn method_checkpoint(method: Method, checkpoint: Option<&Checkpoint>, agents: usize) -> Result<Option<&Checkpoint>> {
    if !method.needs_checkpoint() {
        return Ok(None);
    }
    let ck = checkpoint.ok_or_else(|| Error::InvalidConfig(format!("method {method} needs a checkpoint")))?;
    let expected = if method == Method::MarlOt {
        TrainMethod::Maddpg
    } else {
        TrainMethod::SingleRl
    };
    if ck.meta.method != expected {
        return Err(Error::InvalidConfig(format!(
            "method {method} needs a {expected:?} checkpoint, got {:?}",
            ck.meta.method
        )));
    }
    ck.require_agents(agents)?;
    Ok(Some(ck))
}

/// Builds the controller a method uses for one episode.
pub fn controller_for<'a>(method: Method, checkpoint: Option<&'a Checkpoint>, scenario: &Scenario) -> Result<Box<dyn SvController + 'a>> {
    let cfg = &scenario.config;
    let n = cfg.surrounding;
    Ok(match method {
        Method::Random => Box::new(RandomController),
        Method::Ga => return Err(Error::InvalidConfig("GA episodes are driven by chromosomes".into())),
        Method::MarlOt => {
            let ck = method_checkpoint(method, checkpoint, n)?.expect("checked");
            Box::new(FuzzerController::new(ck, n, cfg.fuzzer.clone()))
        }
        Method::SingleRl => {
            let ck = method_checkpoint(method, checkpoint, n)?.expect("checked");
            let fuzz = FuzzerConfig {
                patterns: false,
                ..cfg.fuzzer.clone()
            };
            Box::new(FuzzerController::new(ck, n, fuzz))
        }
    })
}

fn run_controlled(scenario: &Scenario, checkpoint: Option<&Checkpoint>, id: EpisodeId) -> Result<EpisodeSummary> {
    let mut ctl = controller_for(scenario.config.method, checkpoint, scenario)?;
    let result = run_episode(scenario, id, ctl.as_mut())?;
    summarize(scenario, id, result)
}

fn run_repetition(scenario: &Scenario, checkpoint: Option<&Checkpoint>, repetition: usize) -> Result<Vec<EpisodeSummary>> {
    let cfg = &scenario.config;
    let id = |episode| EpisodeId {
        master_seed: cfg.seed,
        repetition,
        episode,
    };
    match cfg.method {
        Method::Ga => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, u64::MAX - repetition as u64));
            let mut all: Vec<EpisodeSummary> = Vec::with_capacity(cfg.budget);
            nsga2(
                &cfg.ga,
                cfg.budget,
                cfg.surrounding,
                scenario.step_cap,
                &mut rng,
                |batch, spent| {
                    let done: Vec<EpisodeSummary> = batch
                        .par_iter()
                        .enumerate()
                        .map(|(j, c)| {
                            let eid = id(spent + j);
                            let mut ctl = SequenceController::new(c.genes.clone());
                            summarize(scenario, eid, run_episode(scenario, eid, &mut ctl)?)
                        })
                        .collect::<Result<_>>()?;
                    let evals = done
                        .iter()
                        .map(|s| Evaluation {
                            violation: s.violation.is_some(),
                            min_gap: s.min_gap,
                        })
                        .collect();
                    all.extend(done);
                    Ok(evals)
                },
            )?;
            Ok(all)
        }
        _ => (0..cfg.budget)
            .into_par_iter()
            .map(|e| run_controlled(scenario, checkpoint, id(e)))
            .collect(),
    }
}

fn repetition_report(repetition: usize, seed: u64, budget: usize, episodes: Vec<EpisodeSummary>) -> RepetitionReport {
    let violated: Vec<bool> = episodes.iter().map(|e| e.violation.is_some()).collect();
    let violations = violated.iter().filter(|&&v| v).count();
    let mut outcomes = BTreeMap::new();
    let mut digest = Sha256::new();
    let mut entries = Vec::new();
    for (i, e) in episodes.into_iter().enumerate() {
        *outcomes.entry(outcome_name(&e.outcome).to_string()).or_insert(0) += 1;
        digest.update(e.hash.as_bytes());
        if let Some(record) = e.violation {
            entries.push(ViolationEntry {
                episode: i + 1,
                record,
                trace_hash: e.hash,
            });
        }
    }
    RepetitionReport {
        repetition,
        seed,
        violations,
        violation_rate: violation_rate(violations, budget),
        top_k: top_k_index(&violated, TOP_K),
        violated,
        outcomes,
        entries,
        trace_digest: hex::encode(digest.finalize()),
    }
}

/// Loads the checkpoint named in the configuration when the method needs
/// one, then runs the campaign.
pub fn run_campaign(config: &Config) -> Result<CampaignReport> {
    let checkpoint = match (&config.checkpoint, config.method.needs_checkpoint()) {
        (Some(path), true) => Some(Checkpoint::load(path)?),
        (None, true) => return Err(Error::InvalidConfig(format!("method {} needs a checkpoint path", config.method))),
        _ => None,
    };
    run_campaign_with(config, checkpoint.as_ref(), |_| {})
}

/// Runs `budget` episodes in each of `repetitions` repetitions. Episodes
/// within a repetition may run in parallel; each owns a seed derived from
/// the master seed, the repetition and its index.
pub fn run_campaign_with<F: FnMut(&RepetitionReport)>(
    config: &Config,
    checkpoint: Option<&Checkpoint>,
    mut on_repetition: F,
) -> Result<CampaignReport> {
    let scenario = Scenario::new(config.clone())?;
    let checkpoint = method_checkpoint(config.method, checkpoint, config.surrounding)?;
    let mut per_repetition = Vec::with_capacity(config.repetitions);
    for rep in 0..config.repetitions {
        let episodes = run_repetition(&scenario, checkpoint, rep)?;
        debug_assert_eq!(episodes.len(), config.budget);
        let report = repetition_report(rep, mix_seed(config.seed, rep as u64), config.budget, episodes);
        on_repetition(&report);
        per_repetition.push(report);
    }
    let violation_rate = per_repetition.iter().map(|r| r.violation_rate).sum::<f64>() / per_repetition.len() as f64;
    let tops: Vec<Option<usize>> = per_repetition.iter().map(|r| r.top_k).collect();
    Ok(CampaignReport {
        method: config.method,
        scenario: config.scenario_name(),
        lanes: config.lanes,
        sut: config.sut,
        budget: config.budget,
        repetitions: config.repetitions,
        master_seed: config.seed,
        k: TOP_K,
        per_repetition,
        violation_rate,
        top_k: aggregate_top_k(&tops),
    })
}
