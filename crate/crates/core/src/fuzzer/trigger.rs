use super::FuzzerConfig;
use crate::sim::VehicleState;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Ahead,
    SideFront,
    Behind,
    SideBehind,
}

impl PatternKind {
    pub const ALL: [PatternKind; 4] = [
        PatternKind::Ahead,
        PatternKind::SideFront,
        PatternKind::Behind,
        PatternKind::SideBehind,
    ];
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatternKind::Ahead => "ahead",
            PatternKind::SideFront => "side_front",
            PatternKind::Behind => "behind",
            PatternKind::SideBehind => "side_behind",
        })
    }
}

/// Position of a surrounding vehicle relative to the ego along the route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relation {
    /// Arc-length offset of the SV centre ahead of the ego centre.
    pub ds: f64,
    /// Bumper-to-bumper gap; negative when the footprints overlap longitudinally.
    pub gap: f64,
    pub same_lane: bool,
    pub adjacent_lane: bool,
}

impl Relation {
    pub fn of(sv: &VehicleState, ego: &VehicleState) -> Self {
        let ds = sv.frenet.s - ego.frenet.s;
        Self {
            ds,
            gap: ds.abs() - 0.5 * (sv.length + ego.length),
            same_lane: sv.lane == ego.lane,
            adjacent_lane: sv.lane.abs_diff(ego.lane) == 1,
        }
    }

    pub fn ahead(&self) -> bool {
        self.ds > 0.0
    }

    /// In an adjacent lane and fully ahead of the ego.
    pub fn side_front(&self) -> bool {
        self.adjacent_lane && self.ahead() && self.gap >= 0.0
    }
}

/// Zone test deciding which action pattern, if any, a vehicle triggers.
/// Lane relation is checked before longitudinal position.
pub fn classify_trigger(sv: &VehicleState, ego: &VehicleState, cfg: &FuzzerConfig) -> Option<PatternKind> {
    let r = Relation::of(sv, ego);
    if r.same_lane {
        if r.ahead() {
            (r.gap < cfg.d_safe).then_some(PatternKind::Ahead)
        } else {
            Some(PatternKind::Behind)
        }
    } else if r.adjacent_lane {
        if r.ahead() {
            (r.gap < cfg.d_safe).then_some(PatternKind::SideFront)
        } else {
            (r.gap < cfg.side_behind_range).then_some(PatternKind::SideBehind)
        }
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_road, BlockKind, BlockSpec, VehicleParams};

    fn pair(lane: usize, ds: f64) -> (VehicleState, VehicleState) {
        let net = build_road(&[BlockSpec::new(BlockKind::Straight, 3)], 3, 0).unwrap();
        let p = VehicleParams::default();
        let ego = VehicleState::on_lane(0, &net, 1, 80.0, 10.0, &p);
        let sv = VehicleState::on_lane(1, &net, lane, 80.0 + ds, 10.0, &p);
        (sv, ego)
    }

    #[test]
    fn zones() {
        let cfg = FuzzerConfig::default();
        let bumper = VehicleParams::default().length;
        let cases = [
            (1, bumper + 3.0, Some(PatternKind::Ahead)),
            (1, bumper + 4.0, None),
            (0, bumper + 3.0, Some(PatternKind::SideFront)),
            (2, bumper + 3.0, Some(PatternKind::SideFront)),
            (1, -(bumper + 10.0), Some(PatternKind::Behind)),
            (1, -(bumper + 60.0), Some(PatternKind::Behind)),
            (2, -(bumper + 10.0), Some(PatternKind::SideBehind)),
            (2, -(bumper + 20.0), None),
        ];
        for (lane, ds, expected) in cases {
            let (sv, ego) = pair(lane, ds);
            assert_eq!(classify_trigger(&sv, &ego, &cfg), expected, "lane {lane} ds {ds}");
        }
    }
}
