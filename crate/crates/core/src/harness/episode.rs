use super::config::Config;
use super::trace::{EpisodeTrace, Outcome, StepRecord, TraceEnd, TraceHeader, TRACE_FORMAT_VERSION};
use super::violation::{observe, to_record, OracleHistory, ViolationRecord};
use crate::baselines::random_policy_step;
use crate::error::{Error, Result};
use crate::fuzzer::{apply_constraints, orchestrate_step, FuzzEvent, FuzzerConfig, FuzzerState, PatternKind, Source, SvDecision};
use crate::marl::Checkpoint;
use crate::sim::{build_road, detect_collisions, step_ego, step_vehicle, Maneuver, RoadNetwork, VehicleState, WorldState, EGO_ID};
use crate::sut::policy_step;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Longitudinal offsets of the spawn slots around the ego, m.
pub const SPAWN_OFFSETS: [f64; 4] = [-16.0, -8.0, 8.0, 16.0];
const SPAWN_JITTER: f64 = 1.0;
const SPEED_JITTER: f64 = 1.0;
/// Ego spawn distance past the start of the spawn range, m.
const EGO_SPAWN_OFFSET: f64 = 20.0;

/// A configuration with its road network built once.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: Config,
    pub network: RoadNetwork,
    pub step_cap: usize,
}

impl Scenario {
    pub fn new(config: Config) -> Result<Self> {
        config.validate()?;
        let network = build_road(&config.blocks(), config.lanes, config.seed)?;
        let step_cap = config.step_cap(network.route_length());
        Ok(Self {
            config,
            network,
            step_cap,
        })
    }
}

/// Identity and seed of one episode within a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeId {
    pub master_seed: u64,
    pub repetition: usize,
    pub episode: usize,
}

impl EpisodeId {
    pub fn seed(&self) -> u64 {
        mix_seed(mix_seed(self.master_seed, self.repetition as u64), self.episode as u64)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed())
    }
}

/// Derives a child seed (splitmix64 finaliser over the pair).
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything a controller may look at when choosing maneuvers.
pub struct StepContext<'a> {
    pub world: &'a WorldState,
    pub network: &'a RoadNetwork,
    /// Crashed surrounding vehicles, which must not receive decisions.
    pub frozen: &'a [bool],
    pub fuzzer: &'a FuzzerConfig,
}

/// Drives the surrounding vehicles. Every implementation must route its
/// maneuvers through [`apply_constraints`] and return one decision per
/// vehicle that is not frozen.
pub trait SvController {
    fn decide(&mut self, ctx: &StepContext<'_>, rng: &mut ChaCha8Rng, events: &mut Vec<FuzzEvent>) -> Result<Vec<SvDecision>>;

    /// Pattern currently owning each vehicle, for traces.
    fn owners(&self, n: usize) -> Vec<Option<PatternKind>> {
        vec![None; n]
    }
}

/// Actor-driven control with the online fuzzer. With patterns disabled this
/// is the single-agent baseline.
pub struct FuzzerController<'a> {
    checkpoint: &'a Checkpoint,
    state: FuzzerState,
    cfg: FuzzerConfig,
}

impl<'a> FuzzerController<'a> {
    pub fn new(checkpoint: &'a Checkpoint, vehicles: usize, cfg: FuzzerConfig) -> Self {
        Self {
            checkpoint,
            state: FuzzerState::new(vehicles),
            cfg,
        }
    }
}

impl SvController for FuzzerController<'_> {
    fn decide(&mut self, ctx: &StepContext<'_>, rng: &mut ChaCha8Rng, events: &mut Vec<FuzzEvent>) -> Result<Vec<SvDecision>> {
        orchestrate_step(ctx.world, ctx.network, &mut self.state, self.checkpoint, &self.cfg, ctx.frozen, rng, events)
    }

    fn owners(&self, _n: usize) -> Vec<Option<PatternKind>> {
        self.state.owners.iter().map(|o| o.pattern()).collect()
    }
}

fn constrained(id: usize, proposed: Maneuver, source: Source, ctx: &StepContext<'_>) -> SvDecision {
    let (maneuver, overridden) = apply_constraints(proposed, id, ctx.world, ctx.network, ctx.fuzzer);
    SvDecision {
        id,
        proposed,
        maneuver,
        source,
        overridden,
    }
}

/// Uniformly random maneuvers.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomController;

impl SvController for RandomController {
    fn decide(&mut self, ctx: &StepContext<'_>, rng: &mut ChaCha8Rng, _events: &mut Vec<FuzzEvent>) -> Result<Vec<SvDecision>> {
        let proposals = random_policy_step(ctx.world.surrounding.len(), rng);
        Ok(ctx
            .world
            .surrounding
            .iter()
            .zip(proposals)
            .enumerate()
            .filter(|(i, _)| !ctx.frozen[*i])
            .map(|(_, (sv, m))| constrained(sv.id, m, Source::Random, ctx))
            .collect())
    }
}

/// Replays a fixed maneuver sequence per vehicle, indexed by step. Past the
/// end of a sequence the vehicle decelerates.
#[derive(Debug, Clone)]
pub struct SequenceController {
    pub genes: Vec<Vec<Maneuver>>,
    pub source: Source,
}

impl SequenceController {
    pub fn new(genes: Vec<Vec<Maneuver>>) -> Self {
        Self {
            genes,
            source: Source::Sequence,
        }
    }

    pub fn script(genes: Vec<Vec<Maneuver>>) -> Self {
        Self {
            genes,
            source: Source::Script,
        }
    }
}

impl SvController for SequenceController {
    fn decide(&mut self, ctx: &StepContext<'_>, _rng: &mut ChaCha8Rng, _events: &mut Vec<FuzzEvent>) -> Result<Vec<SvDecision>> {
        let n = ctx.world.surrounding.len();
        if self.genes.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.genes.len(),
            });
        }
        let t = ctx.world.step as usize;
        Ok(ctx
            .world
            .surrounding
            .iter()
            .enumerate()
            .filter(|(i, _)| !ctx.frozen[*i])
            .map(|(i, sv)| {
                let m = self.genes[i].get(t).copied().unwrap_or(Maneuver::Decelerate);
                constrained(sv.id, m, self.source, ctx)
            })
            .collect())
    }
}

/// Places the ego in a random lane and the surrounding vehicles in distinct
/// random slots ahead of and behind it.
pub fn spawn<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<WorldState> {
    let cfg = &scenario.config;
    let net = &scenario.network;
    let lanes = cfg.lanes;
    let slots = lanes * SPAWN_OFFSETS.len();
    if cfg.surrounding > slots {
        return Err(Error::InvalidConfig(format!(
            "{} surrounding vehicles do not fit in {slots} spawn slots",
            cfg.surrounding
        )));
    }
    let s0 = net.spawn_range.0 + EGO_SPAWN_OFFSET;
    let ego_lane = rng.random_range(0..lanes);
    let ego = VehicleState::on_lane(EGO_ID, net, ego_lane, s0, cfg.ego_speed, &cfg.vehicle);
    let mut chosen = sample(rng, slots, cfg.surrounding).into_vec();
    chosen.sort_unstable();
    let mut surrounding = Vec::with_capacity(chosen.len());
    for (k, slot) in chosen.into_iter().enumerate() {
        let lane = slot / SPAWN_OFFSETS.len();
        let ds = SPAWN_OFFSETS[slot % SPAWN_OFFSETS.len()] + rng.random_range(-SPAWN_JITTER..=SPAWN_JITTER);
        let speed = cfg.sv_speed + rng.random_range(-SPEED_JITTER..=SPEED_JITTER);
        surrounding.push(VehicleState::on_lane(k + 1, net, lane, s0 + ds, speed, &cfg.vehicle));
    }
    Ok(WorldState {
        ego,
        surrounding,
        step: 0,
        dt: cfg.dt,
    })
}

/// Result of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub trace: EpisodeTrace,
    pub violation: Option<ViolationRecord>,
    pub outcome: Outcome,
    /// Smallest ego-to-SV footprint gap over the episode, m.
    pub min_gap: f64,
}

fn min_gap(world: &WorldState) -> f64 {
    let ego = world.ego.footprint();
    world
        .surrounding
        .iter()
        .map(|sv| ego.gap(&sv.footprint()))
        .fold(f64::INFINITY, f64::min)
}

pub fn header(scenario: &Scenario, id: EpisodeId) -> TraceHeader {
    let cfg = &scenario.config;
    TraceHeader {
        format: TRACE_FORMAT_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        method: cfg.method.to_string(),
        sut: cfg.sut.to_string(),
        scenario: cfg.scenario_name(),
        lanes: cfg.lanes,
        master_seed: id.master_seed,
        repetition: id.repetition,
        episode: id.episode,
        episode_seed: id.seed(),
        lane_width: scenario.network.lane_width,
        route_length: scenario.network.route_length(),
        step_cap: scenario.step_cap,
        config: serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
    }
}

/// Spawns a world from the episode seed and runs it to termination.
pub fn run_episode(scenario: &Scenario, id: EpisodeId, controller: &mut dyn SvController) -> Result<EpisodeResult> {
    let mut rng = id.rng();
    let world = spawn(scenario, &mut rng)?;
    Ok(run_episode_from(scenario, id, world, controller, &mut rng))
}

/// Runs an episode from a given initial world. Ends on reaching the
/// destination, a violation, any ego collision, or the step cap. A
/// controller error ends the episode with a poisoned trace.
pub fn run_episode_from(
    scenario: &Scenario,
    id: EpisodeId,
    mut world: WorldState,
    controller: &mut dyn SvController,
    rng: &mut ChaCha8Rng,
) -> EpisodeResult {
    let cfg = &scenario.config;
    let net = &scenario.network;
    let sut_cfg = cfg.sut_settings();
    let n = world.surrounding.len();
    let mut trace = EpisodeTrace::new(header(scenario, id));
    let mut history = OracleHistory::default();
    let mut frozen = vec![false; n];
    let mut lowest = f64::INFINITY;
    let mut violation = None;

    let outcome = loop {
        if world.step as usize >= scenario.step_cap {
            break Outcome::StepCap;
        }
        let sut = policy_step(cfg.sut, &world, net, &sut_cfg);
        let mut events = Vec::new();
        let ctx = StepContext {
            world: &world,
            network: net,
            frozen: &frozen,
            fuzzer: &cfg.fuzzer,
        };
        let decisions = match controller.decide(&ctx, rng, &mut events) {
            Ok(d) => d,
            Err(e) => break Outcome::Aborted { reason: e.to_string() },
        };

        let mut next = world.clone();
        next.ego = step_ego(&world.ego, sut.to_command(&cfg.vehicle), cfg.dt, net, &cfg.vehicle).state;
        let mut missing = None;
        for (i, sv) in world.surrounding.iter().enumerate() {
            if frozen[i] {
                continue;
            }
            match decisions.iter().find(|d| d.id == sv.id) {
                Some(d) => next.surrounding[i] = step_vehicle(sv, d.maneuver, cfg.dt, net, &cfg.vehicle).state,
                None => missing = Some(sv.id),
            }
        }
        if let Some(id) = missing {
            break Outcome::Aborted {
                reason: format!("controller returned no decision for vehicle {id}"),
            };
        }
        next.step += 1;

        for (a, b) in detect_collisions(&next) {
            if a == EGO_ID {
                continue;
            }
            for v in [a, b] {
                if let Some(i) = next.surrounding.iter().position(|sv| sv.id == v) {
                    frozen[i] = true;
                    next.surrounding[i].speed = 0.0;
                    next.surrounding[i].lane_change = None;
                }
            }
        }

        let obs = observe(&next, net, &mut history, &cfg.violation);
        violation = to_record(&next, &obs, &cfg.violation, true);
        let gap = min_gap(&next);
        lowest = lowest.min(gap);
        trace.steps.push(StepRecord {
            step: next.step,
            time: next.time(),
            ego: next.ego.clone(),
            surrounding: next.surrounding.clone(),
            sut,
            decisions,
            owners: controller.owners(n),
            frozen: frozen.clone(),
            events,
            min_gap: gap,
        });
        world = next;

        if violation.is_some() {
            break Outcome::Violation;
        }
        if obs.ego_crashed() {
            break Outcome::EgoCrash;
        }
        if world.ego.frenet.s >= net.destination_s {
            break Outcome::Destination;
        }
    };

    trace.end = Some(TraceEnd {
        outcome: outcome.clone(),
        steps: world.step,
        violation: violation.clone(),
    });
    EpisodeResult {
        trace,
        violation,
        outcome,
        min_gap: lowest,
    }
}
