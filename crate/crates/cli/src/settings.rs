//! Typed views of the keyed configuration files, one per subcommand.

use std::path::Path;

use panos_core::config::{require_positive, KeyedConfig};
use panos_core::control::{ControllerSpec, DEFAULT_CONTROL_RATE, PAYLOAD_HEAVY, PAYLOAD_NONE};
use panos_core::dataset::DEFAULT_WINDOW;
use panos_core::network::ModelConfig;
use panos_core::simworld::TerrainClass;
use panos_core::training::TrainConfig;
use panos_core::{Error, Result};
use serde::Serialize;

/// Loads a config file (or an empty one) and applies a `--seed` override to `seed_key`.
pub fn load(path: Option<&Path>, seed_key: &str, seed: Option<u64>) -> Result<KeyedConfig> {
    let mut cfg = match path {
        Some(p) => KeyedConfig::from_file(p)?,
        None => KeyedConfig::default(),
    };
    if let Some(s) = seed {
        cfg.set(seed_key, s);
    }
    Ok(cfg)
}

fn terrains(
    cfg: &mut KeyedConfig,
    key: &str,
    default: &[TerrainClass],
) -> Result<Vec<TerrainClass>> {
    let list = cfg
        .take_list::<TerrainClass>(key)?
        .unwrap_or_else(|| default.to_vec());
    if list.is_empty() {
        return Err(Error::Config {
            key: key.into(),
            message: "needs at least one terrain".into(),
        });
    }
    Ok(list)
}

fn payloads(cfg: &mut KeyedConfig, key: &str) -> Result<Vec<f64>> {
    let list = cfg
        .take_list::<f64>(key)?
        .unwrap_or_else(|| vec![PAYLOAD_NONE, PAYLOAD_HEAVY]);
    for &p in &list {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::Config {
                key: key.into(),
                message: format!("payload {p} must be >= 0"),
            });
        }
    }
    Ok(list)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollectSettings {
    pub terrains: Vec<TerrainClass>,
    pub payloads: Vec<f64>,
    pub rollouts: usize,
    /// s per rollout
    pub duration: f64,
    /// s per constant-velocity segment
    pub segment: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub window: f64,
    pub seed: u64,
    pub write_runlogs: bool,
}

impl Default for CollectSettings {
    fn default() -> Self {
        CollectSettings {
            terrains: TerrainClass::ALL.to_vec(),
            payloads: vec![PAYLOAD_NONE, PAYLOAD_HEAVY],
            rollouts: 2,
            duration: 60.0,
            segment: 5.0,
            v_min: 0.3,
            v_max: 2.5,
            window: DEFAULT_WINDOW,
            seed: 1,
            write_runlogs: false,
        }
    }
}

impl CollectSettings {
    pub fn from_config(mut cfg: KeyedConfig) -> Result<Self> {
        let d = Self::default();
        let s = CollectSettings {
            terrains: terrains(&mut cfg, "collect.terrains", &d.terrains)?,
            payloads: payloads(&mut cfg, "collect.payloads")?,
            rollouts: cfg.take_or("collect.rollouts", d.rollouts)?,
            duration: require_positive(
                "collect.duration",
                cfg.take_or("collect.duration", d.duration)?,
            )?,
            segment: require_positive(
                "collect.segment",
                cfg.take_or("collect.segment", d.segment)?,
            )?,
            v_min: cfg.take_or("collect.v_min", d.v_min)?,
            v_max: cfg.take_or("collect.v_max", d.v_max)?,
            window: require_positive("collect.window", cfg.take_or("collect.window", d.window)?)?,
            seed: cfg.take_or("collect.seed", d.seed)?,
            write_runlogs: cfg.take_or("collect.write_runlogs", d.write_runlogs)?,
        };
        cfg.finish()?;
        if s.rollouts == 0 {
            return Err(Error::Config {
                key: "collect.rollouts".into(),
                message: "must be >= 1".into(),
            });
        }
        if !(s.v_min >= 0.0 && s.v_max >= s.v_min) {
            return Err(Error::Config {
                key: "collect.v_max".into(),
                message: format!(
                    "velocity range [{}, {}] is empty or negative",
                    s.v_min, s.v_max
                ),
            });
        }
        Ok(s)
    }
}

/// Training settings; `train.*` keys map onto `TrainConfig`, `model.*` onto its model.
pub fn train_from_config(mut cfg: KeyedConfig) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let m = ModelConfig::default();
    let model = ModelConfig {
        n_v: cfg.take_or("model.n_v", m.n_v)?,
        d_v: cfg.take_or("model.d_v", m.d_v)?,
        d_p: cfg.take_or("model.d_p", m.d_p)?,
        patch: cfg.take_or("model.patch", m.patch)?,
        image_size: cfg.take_or("model.image_size", m.image_size)?,
        encoder_hidden: cfg.take_or("model.encoder_hidden", m.encoder_hidden)?,
        head_hidden: cfg.take_or("model.head_hidden", m.head_hidden)?,
        tokenizer_seed: cfg.take_or("model.tokenizer_seed", m.tokenizer_seed)?,
        param_seed: m.param_seed,
    };
    let t = TrainConfig {
        epochs: cfg.take_or("train.epochs", d.epochs)?,
        batch_size: cfg.take_or("train.batch_size", d.batch_size)?,
        learning_rate: require_positive(
            "train.learning_rate",
            cfg.take_or("train.learning_rate", d.learning_rate)?,
        )?,
        selection_fraction: cfg.take_or("train.selection_fraction", d.selection_fraction)?,
        seed: cfg.take_or("train.seed", d.seed)?,
        checkpoint_interval: cfg.take_or("train.checkpoint_interval", d.checkpoint_interval)?,
        alpha_weight_decay: require_positive(
            "train.alpha_weight_decay",
            cfg.take_or("train.alpha_weight_decay", d.alpha_weight_decay)?,
        )?,
        model,
    };
    cfg.finish()?;
    t.validate().map_err(|e| Error::Config {
        key: "train".into(),
        message: e.to_string(),
    })?;
    Ok(t)
}

/// Which controllers a comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ControllerKind {
    Panos,
    Fixed,
    Reactive,
}

impl std::str::FromStr for ControllerKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "panos" => Ok(ControllerKind::Panos),
            "fixed" => Ok(ControllerKind::Fixed),
            "reactive" => Ok(ControllerKind::Reactive),
            other => Err(format!(
                "unknown controller `{other}` (expected panos, fixed or reactive)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSettings {
    pub controllers: Vec<ControllerKind>,
    pub terrains: Vec<TerrainClass>,
    pub payloads: Vec<f64>,
    pub seeds: Vec<u64>,
    pub duration: f64,
    pub control_rate: f64,
    pub fixed_velocity: f64,
    pub reactive_gain: f64,
    pub terrain_seed: u64,
}

impl Default for CompareSettings {
    fn default() -> Self {
        CompareSettings {
            controllers: vec![
                ControllerKind::Panos,
                ControllerKind::Fixed,
                ControllerKind::Reactive,
            ],
            terrains: vec![
                TerrainClass::Grass,
                TerrainClass::Gravel,
                TerrainClass::PebbleSidewalk,
            ],
            payloads: vec![PAYLOAD_NONE, PAYLOAD_HEAVY],
            seeds: vec![1, 2],
            duration: 30.0,
            control_rate: DEFAULT_CONTROL_RATE,
            fixed_velocity: 2.0,
            reactive_gain: 0.5,
            terrain_seed: 101,
        }
    }
}

impl CompareSettings {
    pub fn from_config(mut cfg: KeyedConfig) -> Result<Self> {
        let d = Self::default();
        let s = CompareSettings {
            controllers: cfg
                .take_list("compare.controllers")?
                .unwrap_or(d.controllers),
            terrains: terrains(&mut cfg, "compare.terrains", &d.terrains)?,
            payloads: payloads(&mut cfg, "compare.payloads")?,
            seeds: cfg.take_list("compare.seeds")?.unwrap_or(d.seeds),
            duration: require_positive(
                "compare.duration",
                cfg.take_or("compare.duration", d.duration)?,
            )?,
            control_rate: require_positive(
                "compare.control_rate",
                cfg.take_or("compare.control_rate", d.control_rate)?,
            )?,
            fixed_velocity: cfg.take_or("compare.fixed_velocity", d.fixed_velocity)?,
            reactive_gain: require_positive(
                "compare.reactive_gain",
                cfg.take_or("compare.reactive_gain", d.reactive_gain)?,
            )?,
            terrain_seed: cfg.take_or("compare.terrain_seed", d.terrain_seed)?,
        };
        cfg.finish()?;
        if s.controllers.is_empty() || s.seeds.is_empty() {
            return Err(Error::Config {
                key: "compare.controllers".into(),
                message: "controller and seed lists must be nonempty".into(),
            });
        }
        Ok(s)
    }

    pub fn controller_spec(
        &self,
        kind: ControllerKind,
        checkpoint: Option<&Path>,
    ) -> Result<ControllerSpec> {
        Ok(match kind {
            ControllerKind::Panos => ControllerSpec::Panos(
                checkpoint
                    .ok_or_else(|| {
                        Error::InvalidArgument("the panos controller needs --checkpoint".into())
                    })?
                    .to_path_buf(),
            ),
            ControllerKind::Fixed => ControllerSpec::FixedVelocity(self.fixed_velocity),
            ControllerKind::Reactive => ControllerSpec::ReactiveSlip(self.reactive_gain),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSettings {
    pub controller: ControllerKind,
    pub terrain: TerrainClass,
    pub payload: f64,
    pub duration: f64,
    pub seed: u64,
    pub control_rate: f64,
    pub fixed_velocity: f64,
    pub reactive_gain: f64,
    pub terrain_seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        let c = CompareSettings::default();
        EvalSettings {
            controller: ControllerKind::Panos,
            terrain: TerrainClass::Gravel,
            payload: PAYLOAD_NONE,
            duration: c.duration,
            seed: 1,
            control_rate: c.control_rate,
            fixed_velocity: c.fixed_velocity,
            reactive_gain: c.reactive_gain,
            terrain_seed: c.terrain_seed,
        }
    }
}

impl EvalSettings {
    pub fn from_config(mut cfg: KeyedConfig) -> Result<Self> {
        let d = Self::default();
        let s = EvalSettings {
            controller: cfg.take_or("eval.controller", d.controller)?,
            terrain: cfg.take_or("eval.terrain", d.terrain)?,
            payload: cfg.take_or("eval.payload", d.payload)?,
            duration: require_positive("eval.duration", cfg.take_or("eval.duration", d.duration)?)?,
            seed: cfg.take_or("eval.seed", d.seed)?,
            control_rate: require_positive(
                "eval.control_rate",
                cfg.take_or("eval.control_rate", d.control_rate)?,
            )?,
            fixed_velocity: cfg.take_or("eval.fixed_velocity", d.fixed_velocity)?,
            reactive_gain: require_positive(
                "eval.reactive_gain",
                cfg.take_or("eval.reactive_gain", d.reactive_gain)?,
            )?,
            terrain_seed: cfg.take_or("eval.terrain_seed", d.terrain_seed)?,
        };
        cfg.finish()?;
        Ok(s)
    }

    pub fn as_compare(&self) -> CompareSettings {
        CompareSettings {
            controllers: vec![self.controller],
            terrains: vec![self.terrain],
            payloads: vec![self.payload],
            seeds: vec![self.seed],
            duration: self.duration,
            control_rate: self.control_rate,
            fixed_velocity: self.fixed_velocity,
            reactive_gain: self.reactive_gain,
            terrain_seed: self.terrain_seed,
        }
    }
}
