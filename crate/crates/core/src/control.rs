//! Closed-loop velocity controllers and evaluation trials.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::network::{forward_with_tokens, load_checkpoint, tokenize_image, ModelParams};
use crate::simworld::runlog::{drive, step_count};
use crate::simworld::{Observation, ProprioState, RunLog, SimParams, TerrainSpec, PROPRIO_DIM};
use crate::{Error, Result};

pub const V_MIN: f64 = 0.2;
pub const V_MAX: f64 = 2.0;
pub const DEFAULT_CONTROL_RATE: f64 = 5.0;
/// Commanded-slip threshold of the reactive baseline.
pub const SLIP_THRESHOLD: f64 = 0.2;
/// Proprio history the learned controller averages over, s.
pub const PROPRIO_WINDOW: f64 = 1.0;
pub const PAYLOAD_NONE: f64 = 1.0;
pub const PAYLOAD_HEAVY: f64 = 6.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ControllerSpec {
    Panos(PathBuf),
    FixedVelocity(f64),
    ReactiveSlip(f64),
}

impl ControllerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerSpec::Panos(_) => "panos",
            ControllerSpec::FixedVelocity(_) => "fixed",
            ControllerSpec::ReactiveSlip(_) => "reactive",
        }
    }

    pub fn build(&self) -> Result<Controller> {
        Ok(match self {
            ControllerSpec::Panos(path) => {
                Controller::Panos(Box::new(load_checkpoint(path, None)?))
            }
            ControllerSpec::FixedVelocity(v) => {
                if !(0.0..=V_MAX).contains(v) {
                    return Err(Error::invalid(format!(
                        "fixed velocity {v} outside [0, {V_MAX}]"
                    )));
                }
                Controller::FixedVelocity(*v)
            }
            ControllerSpec::ReactiveSlip(gain) => {
                if !(*gain > 0.0 && gain.is_finite()) {
                    return Err(Error::invalid("reactive gain must be positive"));
                }
                Controller::ReactiveSlip(*gain)
            }
        })
    }
}

/// A ready-to-run controller; `Panos` holds the loaded model.
#[derive(Debug, Clone)]
pub enum Controller {
    Panos(Box<ModelParams>),
    FixedVelocity(f64),
    ReactiveSlip(f64),
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Panos(_) => "panos",
            Controller::FixedVelocity(_) => "fixed",
            Controller::ReactiveSlip(_) => "reactive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub controller: ControllerSpec,
    pub terrain: TerrainSpec,
    pub payload_mass: f64,
    /// s
    pub duration: f64,
    pub seed: u64,
    /// Hz
    pub control_rate: f64,
}

impl TrialSpec {
    /// Simulator steps per control tick.
    pub fn steps_per_control(&self, dt: f64) -> Result<usize> {
        if !(self.control_rate > 0.0 && self.control_rate.is_finite()) {
            return Err(Error::invalid("control rate must be positive"));
        }
        let ratio = 1.0 / (self.control_rate * dt);
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "control rate {} Hz does not divide the {} Hz simulator rate",
                self.control_rate,
                1.0 / dt
            )));
        }
        Ok(steps as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.terrain.validate()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid(format!(
                "duration must be > 0, got {}",
                self.duration
            )));
        }
        if !(self.payload_mass >= 0.0 && self.payload_mass.is_finite()) {
            return Err(Error::invalid("payload mass must be >= 0"));
        }
        self.steps_per_control(SimParams::default().dt).map(|_| ())
    }
}

/// Learned command: the model's velocity for the current frame and the mean
/// of the recent proprioception, clamped to `[V_MIN, V_MAX]`.
pub fn panos_command(
    params: &ModelParams,
    image: &Observation,
    recent: &[ProprioState],
) -> Result<f64> {
    if recent.is_empty() {
        return Err(Error::invalid(
            "learned controller needs at least one proprio sample",
        ));
    }
    let mut mean = vec![0.0; PROPRIO_DIM];
    for p in recent {
        for (m, v) in mean.iter_mut().zip(p.to_vec()) {
            *m += v;
        }
    }
    let n = recent.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    let slip = (mean[PROPRIO_DIM - 4..].iter().sum::<f64>() / 4.0).clamp(0.0, 1.0);
    let tokens = tokenize_image(image, params)?;
    let trace = forward_with_tokens(tokens, &mean, slip, params)?;
    Ok(trace.v_hat.clamp(V_MIN, V_MAX))
}

/// One step of the reactive baseline.
pub fn reactive_update(v: f64, gain: f64, mean_slip: f64) -> f64 {
    (v - gain * (mean_slip - SLIP_THRESHOLD).max(0.0)).clamp(V_MIN, V_MAX)
}

pub fn run_trial(spec: &TrialSpec) -> Result<RunLog> {
    let controller = spec.controller.build()?;
    run_trial_with(&controller, spec)
}

/// Runs a trial with an already-built controller (avoids reloading checkpoints).
pub fn run_trial_with(controller: &Controller, spec: &TrialSpec) -> Result<RunLog> {
    spec.validate()?;
    let params = SimParams::default();
    let steps = step_count(spec.duration, params.dt)?;
    let per_control = spec.steps_per_control(params.dt)?;
    let window = (PROPRIO_WINDOW / params.dt).round() as usize;
    let mut current = 0.0;
    drive(
        spec.terrain,
        params,
        spec.payload_mass,
        steps,
        spec.seed,
        |k, sim, log| {
            if k % per_control != 0 {
                return Ok(current);
            }
            current = match controller {
                Controller::FixedVelocity(v) => *v,
                Controller::ReactiveSlip(gain) => {
                    if k == 0 {
                        V_MAX
                    } else {
                        let recent = &log.steps[k - per_control..k];
                        let slip = recent.iter().map(|s| s.proprio.mean_slip()).sum::<f64>()
                            / recent.len() as f64;
                        reactive_update(current, *gain, slip)
                    }
                }
                Controller::Panos(model) => {
                    let frame = log
                        .frames
                        .last()
                        .expect("a frame is rendered before the first step");
                    let history: Vec<ProprioState> = if k == 0 {
                        vec![sim.standing_proprio(spec.payload_mass)]
                    } else {
                        log.steps[k.saturating_sub(window)..k]
                            .iter()
                            .map(|s| s.proprio)
                            .collect()
                    };
                    panos_command(model, frame, &history)?
                }
            };
            Ok(current)
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ModelConfig;
    use crate::simworld::{make_terrain, TerrainClass};

    fn spec(controller: ControllerSpec, class: TerrainClass, duration: f64) -> TrialSpec {
        TrialSpec {
            controller,
            terrain: make_terrain(class, 3),
            payload_mass: PAYLOAD_NONE,
            duration,
            seed: 9,
            control_rate: DEFAULT_CONTROL_RATE,
        }
    }

    #[test]
    fn fixed_velocity_commands_are_constant() {
        let log = run_trial(&spec(
            ControllerSpec::FixedVelocity(2.0),
            TerrainClass::Grass,
            30.0,
        ))
        .unwrap();
        assert_eq!(log.len(), 3000);
        assert!(log.steps.iter().all(|s| s.commanded_velocity == 2.0));
    }

    #[test]
    fn reactive_law_holds_per_tick() {
        let gain = 0.5;
        let s = spec(
            ControllerSpec::ReactiveSlip(gain),
            TerrainClass::Gravel,
            10.0,
        );
        let log = run_trial(&s).unwrap();
        let per = 20;
        assert_eq!(log.steps[0].commanded_velocity, V_MAX);
        let mut decreased = 0;
        for tick in 1..log.len() / per {
            let k = tick * per;
            let prev = log.steps[k - 1].commanded_velocity;
            let slip = log.steps[k - per..k]
                .iter()
                .map(|s| s.proprio.mean_slip())
                .sum::<f64>()
                / per as f64;
            let now = log.steps[k].commanded_velocity;
            assert_eq!(now, reactive_update(prev, gain, slip));
            if slip > SLIP_THRESHOLD && prev > V_MIN {
                assert!(now < prev);
                decreased += 1;
            }
            // zero-order hold between ticks
            assert!(log.steps[k..k + per]
                .iter()
                .all(|s| s.commanded_velocity == now));
        }
        assert!(
            decreased > 0,
            "gravel at 2 m/s should trigger the reactive law"
        );
    }

    #[test]
    fn trials_are_deterministic() {
        let s = spec(
            ControllerSpec::ReactiveSlip(0.3),
            TerrainClass::PebbleSidewalk,
            5.0,
        );
        assert_eq!(run_trial(&s).unwrap(), run_trial(&s).unwrap());
    }

    #[test]
    fn learned_command_is_clamped_and_pure() {
        let mut params = ModelParams::new(ModelConfig::default()).unwrap();
        let img = Observation::zeros();
        let rest = [ProprioState::zeros()];
        for b2 in [-20.0, 0.0, 20.0] {
            params.trainable.head_b2[0] = b2;
            let v = panos_command(&params, &img, &rest).unwrap();
            assert!((V_MIN..=V_MAX).contains(&v));
            assert_eq!(v, panos_command(&params, &img, &rest).unwrap());
        }
    }

    #[test]
    fn control_rate_must_divide_sim_rate() {
        let mut s = spec(ControllerSpec::FixedVelocity(1.0), TerrainClass::Grass, 1.0);
        s.control_rate = 3.0;
        assert!(s.validate().is_err());
        s.control_rate = 5.0;
        s.duration = 0.0;
        assert!(s.validate().is_err());
    }
}
