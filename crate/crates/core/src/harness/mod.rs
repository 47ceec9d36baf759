//! Episode and campaign execution, the violation oracle, metrics, traces
//! and replay rendering.

pub mod campaign;
pub mod config;
pub mod episode;
pub mod metrics;
pub mod replay;
pub mod report;
pub mod trace;
pub mod violation;

pub use campaign::{controller_for, run_campaign, run_campaign_with, CampaignReport, RepetitionReport, ViolationEntry, TOP_K};
pub use config::{Config, Method};
pub use episode::{
    mix_seed, run_episode, run_episode_from, spawn, EpisodeId, EpisodeResult, FuzzerController, RandomController,
    Scenario, SequenceController, StepContext, SvController,
};
pub use metrics::{aggregate_top_k, top_k_index, violation_rate};
pub use replay::{polyline_points, render_replay, ReplayFiles};
pub use report::aggregate_csv;
pub use trace::{export_trace, load_trace, EpisodeTrace, Outcome, StepRecord, TraceEnd, TraceHeader};
pub use violation::{detect_violation, AbnormalKind, OracleHistory, ViolationConfig, ViolationKind, ViolationRecord};
