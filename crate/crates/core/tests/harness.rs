use marlot::error::Error;
use marlot::harness::violation::observe;
use marlot::harness::{
    aggregate_csv, aggregate_top_k, detect_violation, export_trace, load_trace, polyline_points, render_replay,
    run_campaign_with, run_episode, run_episode_from, top_k_index, violation_rate, AbnormalKind, CampaignReport,
    Config, EpisodeId, EpisodeTrace, Method, OracleHistory, Outcome, RandomController, Scenario, SequenceController,
    ViolationConfig, ViolationKind,
};
use marlot::sim::{
    build_road, detect_collisions, BlockKind, Maneuver, RoadNetwork, VehicleParams, VehicleState, WorldState,
    EGO_ID,
};
use marlot::sut::SutKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn road(lanes: usize) -> RoadNetwork {
    build_road(&[marlot::sim::BlockSpec::new(BlockKind::Straight, lanes)], lanes, 0).unwrap()
}

fn car(id: usize, net: &RoadNetwork, lane: usize, s: f64, speed: f64) -> VehicleState {
    VehicleState::on_lane(id, net, lane, s, speed, &VehicleParams::default())
}

fn world(ego: VehicleState, surrounding: Vec<VehicleState>) -> WorldState {
    WorldState {
        ego,
        surrounding,
        step: 10,
        dt: 0.1,
    }
}

#[test]
fn violation_definitions() {
    let cfg = ViolationConfig::default();
    let net = road(3);
    let len = VehicleParams::default().length;
    let ego = car(0, &net, 1, 80.0, 5.0);

    // rear contact plus a second vehicle alongside within 2 m
    let w = world(ego.clone(), vec![car(1, &net, 1, 80.0 + len - 0.2, 5.0), car(2, &net, 0, 79.0, 5.0)]);
    let v = detect_violation(&w, &net, &mut OracleHistory::default(), &cfg, true).unwrap();
    assert_eq!(v.kind, ViolationKind::MultiVehicleCrash);
    assert!((v.time - 1.0).abs() < 1e-12);
    assert_eq!(v.nearby_svs, 2);

    // single-vehicle contact is not a violation
    let w = world(ego.clone(), vec![car(1, &net, 1, 80.0 + len - 0.2, 5.0), car(2, &net, 0, 140.0, 5.0)]);
    assert!(detect_violation(&w, &net, &mut OracleHistory::default(), &cfg, true).is_none());

    // off-road with two vehicles close by
    let mut off = car(0, &net, 2, 80.0, 5.0);
    off.frenet.d -= 1.5;
    off.position = net.to_world(off.frenet).position;
    let w = world(off, vec![car(1, &net, 2, 80.0 + len + 1.0, 5.0), car(2, &net, 2, 80.0 - len - 1.0, 5.0)]);
    let v = detect_violation(&w, &net, &mut OracleHistory::default(), &cfg, true).unwrap();
    assert_eq!(v.kind, ViolationKind::AbnormalTrajectory(AbnormalKind::OffRoad));

    // reverse needs five consecutive steps
    let mut back = ego.clone();
    back.speed = -0.5;
    let w = world(back, vec![car(1, &net, 1, 80.0 + len + 1.0, 5.0), car(2, &net, 0, 80.0, 5.0)]);
    let mut h = OracleHistory::default();
    for _ in 0..4 {
        assert!(detect_violation(&w, &net, &mut h, &cfg, true).is_none());
    }
    let v = detect_violation(&w, &net, &mut h, &cfg, true).unwrap();
    assert_eq!(v.kind, ViolationKind::AbnormalTrajectory(AbnormalKind::Reverse));

    // stall needs a hundred
    let mut still = ego;
    still.speed = 0.0;
    let w = world(still, vec![car(1, &net, 1, 80.0 + len + 1.0, 0.0), car(2, &net, 0, 80.0, 0.0)]);
    let mut h = OracleHistory::default();
    for _ in 0..99 {
        assert!(detect_violation(&w, &net, &mut h, &cfg, true).is_none());
    }
    let v = detect_violation(&w, &net, &mut h, &cfg, true).unwrap();
    assert_eq!(v.kind, ViolationKind::AbnormalTrajectory(AbnormalKind::Stall));
}

#[test]
fn dropping_the_proximity_condition_only_adds_violations() {
    let cfg = ViolationConfig::default();
    let net = road(3);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (mut strict, mut loose) = (0, 0);
    for _ in 0..5000 {
        let mut ego = car(0, &net, rng.random_range(0..3), 80.0, rng.random_range(-1.0..3.0));
        if rng.random_bool(0.2) {
            ego.frenet.d += rng.random_range(-3.0..3.0);
            ego.position = net.to_world(ego.frenet).position;
        }
        let svs = (1..=3)
            .map(|id| car(id, &net, rng.random_range(0..3), 80.0 + rng.random_range(-8.0..8.0), 5.0))
            .collect();
        let w = world(ego, svs);
        let mut history = OracleHistory {
            reverse_run: rng.random_range(0..6),
            stall_run: rng.random_range(90..101),
        };
        let obs = observe(&w, &net, &mut history, &cfg);
        let a = marlot::harness::violation::to_record(&w, &obs, &cfg, true);
        let b = marlot::harness::violation::to_record(&w, &obs, &cfg, false);
        if a.is_some() {
            assert_eq!(a, b);
        }
        strict += usize::from(a.is_some());
        loose += usize::from(b.is_some());
    }
    assert!(strict > 0 && loose > strict, "{strict} {loose}");
}

fn config(surrounding: usize) -> Config {
    Config {
        surrounding,
        budget: 6,
        repetitions: 2,
        method: Method::Random,
        ..Default::default()
    }
}

#[test]
fn empty_road_reaches_destination() {
    for sut in [SutKind::Idm, SutKind::Heuristic] {
        let scenario = Scenario::new(Config { sut, ..config(0) }).unwrap();
        let id = EpisodeId {
            master_seed: 0,
            repetition: 0,
            episode: 0,
        };
        let r = run_episode(&scenario, id, &mut RandomController).unwrap();
        assert_eq!(r.outcome, Outcome::Destination, "{sut}");
        assert!(r.violation.is_none());
        let last = r.trace.steps.last().unwrap();
        assert!(last.ego.frenet.s >= scenario.network.destination_s);
    }
}

#[test]
fn scripted_box_in_ends_in_multi_vehicle_crash() {
    let scenario = Scenario::new(config(3)).unwrap();
    let net = &scenario.network;
    let len = VehicleParams::default().length;
    let s = 80.0;
    // stopped leader, a neighbour alongside in the only other lane and a fast
    // follower that keeps accelerating
    let ego = car(EGO_ID, net, 0, s, 8.0);
    let leader = car(1, net, 0, s + len + 6.0, 0.0);
    let side = car(2, net, 1, s + 0.5, 8.0);
    let follower = car(3, net, 0, s - len - 4.0, 16.0);
    let start = WorldState {
        ego,
        surrounding: vec![leader, side, follower],
        step: 0,
        dt: 0.1,
    };
    let genes = vec![
        vec![Maneuver::Brake; 100],
        vec![Maneuver::Decelerate; 100],
        vec![Maneuver::Accelerate; 100],
    ];
    let id = EpisodeId {
        master_seed: 1,
        repetition: 0,
        episode: 0,
    };
    let mut rng = id.rng();
    let r = run_episode_from(&scenario, id, start, &mut SequenceController::script(genes), &mut rng);
    let v = r.violation.expect("the box-in produces a violation");
    assert_eq!(v.kind, ViolationKind::MultiVehicleCrash);
    assert_eq!(r.outcome, Outcome::Violation);
    assert!(v.nearby_svs >= 2);

    let end = r.trace.end.as_ref().unwrap();
    assert_eq!(end.violation.as_ref(), Some(&v));
    let last = r.trace.steps.last().unwrap();
    assert_eq!(last.step, v.step);
    let replayed = WorldState {
        ego: last.ego.clone(),
        surrounding: last.surrounding.clone(),
        step: last.step,
        dt: 0.1,
    };
    assert!(detect_collisions(&replayed).iter().any(|&(a, _)| a == EGO_ID));
}

#[test]
fn same_seed_same_trace_hash() {
    let scenario = Scenario::new(config(3)).unwrap();
    let id = |episode| EpisodeId {
        master_seed: 9,
        repetition: 1,
        episode,
    };
    let a = run_episode(&scenario, id(2), &mut RandomController).unwrap();
    let b = run_episode(&scenario, id(2), &mut RandomController).unwrap();
    assert_eq!(a.trace.hash().unwrap(), b.trace.hash().unwrap());
    let c = run_episode(&scenario, id(3), &mut RandomController).unwrap();
    assert_ne!(a.trace.hash().unwrap(), c.trace.hash().unwrap());
}

#[test]
fn trace_round_trip_and_validation() {
    let scenario = Scenario::new(config(3)).unwrap();
    let id = EpisodeId {
        master_seed: 4,
        repetition: 0,
        episode: 0,
    };
    let r = run_episode(&scenario, id, &mut RandomController).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/trace.jsonl");
    export_trace(&r.trace, &path).unwrap();
    let back = load_trace(&path).unwrap();
    assert_eq!(back, r.trace);
    assert_eq!(back.hash().unwrap(), r.trace.hash().unwrap());
    assert!(back.steps.windows(2).all(|w| w[0].step < w[1].step));

    let text = r.trace.to_jsonl().unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), r.trace.steps.len() + 2);

    // a trace cut before its end record is still readable
    let cut = lines[..lines.len() - 1].join("\n");
    let partial = EpisodeTrace::from_jsonl(&cut).unwrap();
    assert!(partial.end.is_none());

    let mut swapped = lines.clone();
    swapped.swap(1, 2);
    assert!(matches!(EpisodeTrace::from_jsonl(&swapped.join("\n")), Err(Error::InvalidTrace(_))));
    assert!(matches!(EpisodeTrace::from_jsonl(&lines[1..].join("\n")), Err(Error::InvalidTrace(_))));
}

#[test]
fn replay_frames_follow_the_trace() {
    let scenario = Scenario::new(Config {
        scenario: vec![BlockKind::Straight, BlockKind::Circular],
        ..config(3)
    })
    .unwrap();
    let id = EpisodeId {
        master_seed: 2,
        repetition: 0,
        episode: 1,
    };
    let r = run_episode(&scenario, id, &mut RandomController).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = render_replay(&r.trace, dir.path()).unwrap();
    assert_eq!(files.frames.len(), r.trace.steps.len());
    assert!(files.summary.exists());

    let last = std::fs::read_to_string(files.frames.last().unwrap()).unwrap();
    let path = polyline_points(&last, "ego-path").unwrap();
    assert_eq!(path.len(), r.trace.steps.len());
    for (p, rec) in path.iter().zip(&r.trace.steps) {
        assert!(p.distance(rec.ego.position) <= 1e-3);
    }
    let first = std::fs::read_to_string(&files.frames[0]).unwrap();
    assert_eq!(polyline_points(&first, "ego-path").unwrap().len(), 1);
    let summary = std::fs::read_to_string(&files.summary).unwrap();
    assert_eq!(polyline_points(&summary, "ego-speed").unwrap().len(), r.trace.steps.len());
    assert!(render_replay(&r.trace, &dir.path().join("frame_00001.svg")).is_err());
}

#[test]
fn metric_examples() {
    assert_eq!(violation_rate(20, 200), 10.0);
    let mut runs = vec![false; 200];
    for i in [3, 10, 11, 50, 80, 120] {
        runs[i - 1] = true;
    }
    assert_eq!(top_k_index(&runs, 5), Some(80));
    let four: Vec<bool> = (1..=200).map(|i| [3, 10, 11, 50].contains(&i)).collect();
    assert_eq!(top_k_index(&four, 5), None);
    assert_eq!(aggregate_top_k(&[None, None, None, None, None]), None);
    assert_eq!(aggregate_top_k(&[Some(80), Some(40), None]), Some(60.0));
    assert_eq!(aggregate_top_k(&[Some(80), None, None]), None);
}

fn digest(hashes: &[String]) -> String {
    let mut h = Sha256::new();
    for x in hashes {
        h.update(x.as_bytes());
    }
    hex::encode(h.finalize())
}

#[test]
fn campaign_is_deterministic_and_accounted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config {
        trace_dir: Some(dir.path().to_path_buf()),
        save_all_traces: true,
        ..config(3)
    };
    let a = run_campaign_with(&cfg, None, |_| {}).unwrap();
    let b = run_campaign_with(&cfg, None, |_| {}).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.per_repetition.len(), 2);
    for rep in &a.per_repetition {
        assert_eq!(rep.violated.len(), cfg.budget);
        assert_eq!(rep.violations, rep.violated.iter().filter(|&&v| v).count());
        assert!((0.0..=100.0).contains(&rep.violation_rate));
        assert_eq!(rep.top_k, top_k_index(&rep.violated, 5));
        let hashes: Vec<String> = (1..=cfg.budget)
            .map(|e| {
                let path = dir.path().join(format!("rep{:02}_ep{e:04}.jsonl", rep.repetition));
                load_trace(&path).unwrap().hash().unwrap()
            })
            .collect();
        assert_eq!(rep.trace_digest, digest(&hashes));
    }
    let mean = a.per_repetition.iter().map(|r| r.violation_rate).sum::<f64>() / 2.0;
    assert!((a.violation_rate - mean).abs() < 1e-12);

    let other = run_campaign_with(&Config { seed: 1, ..cfg.clone() }, None, |_| {}).unwrap();
    assert_ne!(a.per_repetition[0].trace_digest, other.per_repetition[0].trace_digest);
}

#[test]
fn ga_campaign_spends_the_budget_exactly() {
    let cfg = Config {
        method: Method::Ga,
        budget: 15,
        repetitions: 1,
        ..config(3)
    };
    let r = run_campaign_with(&cfg, None, |_| {}).unwrap();
    assert_eq!(r.per_repetition[0].violated.len(), 15);
    let small = Config { budget: 5, ..cfg };
    assert!(matches!(run_campaign_with(&small, None, |_| {}), Err(Error::InvalidConfig(_))));
}

#[test]
fn methods_needing_a_checkpoint_fail_without_one() {
    for method in [Method::MarlOt, Method::SingleRl] {
        let cfg = Config { method, ..config(3) };
        assert!(run_campaign_with(&cfg, None, |_| {}).is_err());
    }
}

fn fabricated(method: Method, lanes: usize, scenario: &str, rate: f64, top: Option<f64>) -> CampaignReport {
    CampaignReport {
        method,
        scenario: scenario.into(),
        lanes,
        sut: SutKind::Idm,
        budget: 200,
        repetitions: 5,
        master_seed: 0,
        k: 5,
        per_repetition: Vec::new(),
        violation_rate: rate,
        top_k: top,
    }
}

#[test]
fn csv_table_layout() {
    let csv = aggregate_csv(&[
        fabricated(Method::MarlOt, 2, "merge", 35.5, Some(12.0)),
        fabricated(Method::Random, 2, "merge", 4.0, None),
        fabricated(Method::MarlOt, 2, "straight", 30.0, Some(14.2)),
    ]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "scenario,marl_ot/idm/2lanes rate%,marl_ot/idm/2lanes top5,random/idm/2lanes rate%,random/idm/2lanes top5"
    );
    assert_eq!(lines[1], "merge,35.50,12.0,4.00,None");
    assert_eq!(lines[2], "straight,30.00,14.2,,");
}

#[test]
fn config_file_round_trip_and_validation() {
    let cfg = Config {
        scenario: vec![BlockKind::Merge, BlockKind::Roundabout],
        lanes: 3,
        sut: SutKind::Heuristic,
        ..Default::default()
    };
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(Config::from_toml_str(&text).unwrap(), cfg);
    let parsed = Config::from_toml_str("lanes = 4\nbudget = 50\n[fuzzer]\nd_safe = 5.0\n").unwrap();
    assert_eq!((parsed.lanes, parsed.budget, parsed.fuzzer.d_safe), (4, 50, 5.0));
    assert!(matches!(Config::from_toml_str("lanes = 5\n"), Err(Error::InvalidConfig(_))));
    assert!(Config::from_toml_str("unknown_key = 1\n").is_err());
    assert!(Config {
        scenario: Vec::new(),
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(Config {
        budget: 0,
        ..Default::default()
    }
    .validate()
    .is_err());
}
