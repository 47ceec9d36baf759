use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use marlot::baselines::single_rl_train;
use marlot::harness::{aggregate_csv, load_trace, render_replay, run_campaign_with, CampaignReport, Config, Method};
use marlot::marl::{evaluate, train_with_progress, Checkpoint, TrainMethod};
use marlot::sim::BlockKind;
use marlot::sut::SutKind;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "marl-ot", version, about = "Multi-agent RL guided online fuzzing of driving policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainKind {
    Maddpg,
    SingleRl,
}

#[derive(Subcommand)]
enum Command {
    /// Train surrounding-vehicle actors in the arena and save a checkpoint.
    Train {
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "maddpg")]
        method: TrainKind,
        #[arg(long)]
        out: PathBuf,
        /// TOML file; its `train` and `reward` sections are used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        agents: Option<usize>,
        /// Evaluation episodes run after training.
        #[arg(long, default_value_t = 100)]
        eval_episodes: usize,
    },
    /// Run a testing campaign and write its report as JSON.
    Run {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        method: Option<String>,
        /// Comma-separated road blocks, e.g. `merge` or `straight,roundabout`.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        lanes: Option<usize>,
        #[arg(long)]
        sut: Option<String>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        trace_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a trace as SVG frames plus a summary plot.
    Replay {
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate campaign reports into a CSV table.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train {
            seed,
            method,
            out,
            config,
            episodes,
            agents,
            eval_episodes,
        } => {
            let mut cfg = load_config(&config)?.train_settings();
            cfg.seed = seed;
            cfg.method = match method {
                TrainKind::Maddpg => TrainMethod::Maddpg,
                TrainKind::SingleRl => TrainMethod::SingleRl,
            };
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            if let Some(a) = agents {
                cfg.agents = a;
            }
            let total = cfg.episodes;
            let progress = |ep: usize, ret: f64, ok: bool| {
                if (ep + 1) % 25 == 0 || ep + 1 == total {
                    eprintln!("episode {:>5}/{total} return {ret:>9.3} enclosed {ok}", ep + 1);
                }
            };
            let outcome = match cfg.method {
                TrainMethod::Maddpg => train_with_progress(&cfg, progress),
                TrainMethod::SingleRl => single_rl_train(&cfg, progress),
            }?;
            outcome.checkpoint.save(&out)?;
            let eval = evaluate(&outcome.checkpoint, &cfg.arena, &cfg.reward, eval_episodes, seed.wrapping_add(1))?;
            println!("{}", serde_json::to_string_pretty(&eval)?);
            eprintln!("saved {}", out.display());
        }
        Command::Run {
            seed,
            config,
            method,
            scenario,
            lanes,
            sut,
            budget,
            repetitions,
            checkpoint,
            trace_dir,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            cfg.seed = seed;
            if let Some(m) = method {
                cfg.method = m.parse::<Method>()?;
            }
            if let Some(s) = scenario {
                cfg.scenario = s.split(',').map(str::parse::<BlockKind>).collect::<Result<_, _>>()?;
            }
            if let Some(l) = lanes {
                cfg.lanes = l;
            }
            if let Some(s) = sut {
                cfg.sut = s.parse::<SutKind>()?;
            }
            if let Some(b) = budget {
                cfg.budget = b;
            }
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            if checkpoint.is_some() {
                cfg.checkpoint = checkpoint;
            }
            if trace_dir.is_some() {
                cfg.trace_dir = trace_dir;
            }
            cfg.validate()?;
            let ck = match (&cfg.checkpoint, cfg.method.needs_checkpoint()) {
                (Some(p), true) => Some(Checkpoint::load(p).with_context(|| format!("loading {}", p.display()))?),
                (None, true) => bail!("method {} needs --checkpoint", cfg.method),
                _ => None,
            };
            let report = run_campaign_with(&cfg, ck.as_ref(), |rep| {
                eprintln!(
                    "repetition {}: {} violations ({:.1}%), top-5 {:?}",
                    rep.repetition + 1,
                    rep.violations,
                    rep.violation_rate,
                    rep.top_k
                );
            })?;
            let top = report.top_k.map_or_else(|| "None".to_string(), |t| format!("{t:.1}"));
            println!(
                "{} {} {} lanes={} sut={} rate={:.2}% top{}={top}",
                report.method, report.scenario, report.budget, report.lanes, report.sut, report.violation_rate, report.k
            );
            if let Some(path) = out {
                report.save(&path)?;
                eprintln!("report written to {}", path.display());
            }
        }
        Command::Replay { trace, out } => {
            let t = load_trace(&trace).with_context(|| format!("reading {}", trace.display()))?;
            let files = render_replay(&t, &out)?;
            println!("{} frames, summary {}", files.frames.len(), files.summary.display());
        }
        Command::Report { reports, out } => {
            let loaded = reports
                .iter()
                .map(|p| CampaignReport::load(p).with_context(|| format!("reading {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            let csv = aggregate_csv(&loaded);
            match out {
                Some(p) => std::fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}
