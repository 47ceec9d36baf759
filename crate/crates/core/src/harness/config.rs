use super::violation::ViolationConfig;
use crate::arena::RewardWeights;
use crate::baselines::GaConfig;
use crate::error::{Error, Result};
use crate::fuzzer::FuzzerConfig;
use crate::marl::TrainConfig;
use crate::sim::{BlockKind, BlockSpec, VehicleParams};
use crate::sut::{SutConfig, SutKind};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// How surrounding vehicles are controlled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MarlOt,
    Random,
    Ga,
    SingleRl,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::MarlOt, Method::Random, Method::Ga, Method::SingleRl];

    pub fn name(self) -> &'static str {
        match self {
            Method::MarlOt => "marl_ot",
            Method::Random => "random",
            Method::Ga => "ga",
            Method::SingleRl => "single_rl",
        }
    }

    pub fn needs_checkpoint(self) -> bool {
        matches!(self, Method::MarlOt | Method::SingleRl)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == norm || (norm == "marlot" && *m == Method::MarlOt))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

/// Full harness configuration; every section has defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Road blocks in driving order.
    pub scenario: Vec<BlockKind>,
    pub lanes: usize,
    pub sut: SutKind,
    pub method: Method,
    pub budget: usize,
    pub repetitions: usize,
    /// Master seed for the campaign.
    pub seed: u64,
    pub surrounding: usize,
    pub ego_speed: f64,
    pub sv_speed: f64,
    pub dt: f64,
    /// Hard episode step cap floor.
    pub min_step_cap: usize,
    pub checkpoint: Option<PathBuf>,
    /// Directory for violation traces; nothing is written when unset.
    pub trace_dir: Option<PathBuf>,
    /// Also persist traces of episodes without violations.
    pub save_all_traces: bool,
    pub vehicle: VehicleParams,
    pub fuzzer: FuzzerConfig,
    pub violation: ViolationConfig,
    pub reward: RewardWeights,
    pub sut_config: SutConfig,
    pub ga: GaConfig,
    pub train: TrainConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            scenario: vec![BlockKind::Straight],
            lanes: 2,
            sut: SutKind::Idm,
            method: Method::MarlOt,
            budget: 200,
            repetitions: 5,
            seed: 0,
            surrounding: 3,
            ego_speed: 10.0,
            sv_speed: 10.0,
            dt: 0.1,
            min_step_cap: 600,
            checkpoint: None,
            trace_dir: None,
            save_all_traces: false,
            vehicle: VehicleParams::default(),
            fuzzer: FuzzerConfig::default(),
            violation: ViolationConfig::default(),
            reward: RewardWeights::default(),
            sut_config: SutConfig::default(),
            ga: GaConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(2..=4).contains(&self.lanes) {
            return bad("lanes must be between 2 and 4");
        }
        if self.scenario.is_empty() || self.scenario.len() > 3 {
            return bad("scenario needs 1 to 3 blocks");
        }
        if self.budget == 0 || self.repetitions == 0 {
            return bad("budget and repetitions must be at least 1");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.surrounding > 4 * self.lanes {
            return bad("too many surrounding vehicles for the spawn slots");
        }
        if self.method == Method::Ga && self.budget < self.ga.population {
            return bad("GA budget must cover at least one population");
        }
        Ok(())
    }

    pub fn blocks(&self) -> Vec<BlockSpec> {
        self.scenario.iter().map(|&k| BlockSpec::new(k, self.lanes)).collect()
    }

    pub fn scenario_name(&self) -> String {
        self.scenario.iter().map(|k| k.name()).collect::<Vec<_>>().join("+")
    }

    /// SUT settings with the shared vehicle parameters and safety distance.
    pub fn sut_settings(&self) -> SutConfig {
        SutConfig {
            vehicle: self.vehicle.clone(),
            d_safe: self.fuzzer.d_safe,
            ..self.sut_config.clone()
        }
    }

    /// Training settings with the shared reward weights and agent count.
    pub fn train_settings(&self) -> TrainConfig {
        TrainConfig {
            reward: self.reward,
            agents: self.surrounding,
            ..self.train.clone()
        }
    }

    /// Episode step cap: time to cover the route at half the IDM desired
    /// speed, never below `min_step_cap`.
    pub fn step_cap(&self, route_length: f64) -> usize {
        let v = 0.5 * self.sut_config.idm.desired_speed;
        let steps = (route_length / v / self.dt).ceil() as usize;
        steps.max(self.min_step_cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = Config {
            scenario: vec![BlockKind::Merge, BlockKind::TIntersection],
            method: Method::Ga,
            ..Default::default()
        };
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(Config::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg = Config::from_toml_str("scenario = [\"merge\"]\nlanes = 3\nmethod = \"random\"\n[fuzzer]\nd_safe = 4.0\n").unwrap();
        assert_eq!(cfg.lanes, 3);
        assert_eq!(cfg.method, Method::Random);
        assert_eq!(cfg.fuzzer.d_safe, 4.0);
        assert_eq!(cfg.budget, 200);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::from_toml_str("lanes = 5").is_err());
        assert!(Config::from_toml_str("budget = 0").is_err());
        assert!(Config::from_toml_str("colour = 1").is_err());
    }

    #[test]
    fn step_cap_floor() {
        let cfg = Config::default();
        assert_eq!(cfg.step_cap(200.0), 600);
        assert_eq!(cfg.step_cap(1000.0), 1000);
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("MARL-OT".parse::<Method>().unwrap(), Method::MarlOt);
    }
}
