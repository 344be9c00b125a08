use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::terrain::TerrainSpec;
use crate::{Error, Result};

/// Length of the flattened proprioceptive vector fed to the encoder.
pub const PROPRIO_DIM: usize = 60;

/// Nominal leg length used to turn hip angles into arc lengths, meters.
pub const LEG_LENGTH: f64 = 0.35;

/// Leg order used throughout: front-right, front-left, hind-right, hind-left.
const HIP_X: [f64; 4] = [0.30, 0.30, -0.30, -0.30];
const HIP_Y: [f64; 4] = [-0.15, 0.15, -0.15, 0.15];
/// Trot: diagonal pairs share a phase offset.
const LEG_PHASE_OFFSET: [f64; 4] = [0.0, 0.5, 0.5, 0.0];
const STANDING_HEIGHT: f64 = 0.5;

/// Per-joint (hip abduction, hip flexion, knee) excursion per unit speed, rad/m.
const JOINT_AMPLITUDE: [f64; 3] = [0.10, 1.20, 1.60];
const JOINT_PHASE: [f64; 3] = [0.0, 0.0, -PI / 2.0];
/// Load-bearing moment arms, meters.
const JOINT_LEVER: [f64; 3] = [0.03, 0.12, 0.22];
/// Speed-proportional actuation torque, N*m per m/s.
const JOINT_DRIVE: [f64; 3] = [0.5, 4.0, 6.0];

const HIP_POSTURE: f64 = 0.008;
const HIP_SWAY: f64 = 0.03;
const IMPACT_DECAY: f64 = 0.6;

/// Sensor noise standard deviations per proprio block (before `sensor_noise` scaling).
const NOISE_JOINT_VEL: f64 = 0.02;
const NOISE_EFFORT: f64 = 0.2;
const NOISE_HIP_POS: f64 = 0.001;
const NOISE_HIP_VEL: f64 = 0.01;
const NOISE_FOOT_POS: f64 = 0.001;
const NOISE_FOOT_VEL: f64 = 0.01;

/// Simulator constants. Every field enters the constants hash of a run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub body_mass: f64,
    pub gravity: f64,
    pub slip_gain: f64,
    pub roughness_gain: f64,
    pub vibration_gain: f64,
    pub slip_noise: f64,
    pub dt: f64,
    pub frame_rate: f64,
    pub duty_factor: f64,
    pub impact_gain: f64,
    pub imu_noise: f64,
    pub vibration_bandwidth: f64,
    pub terrain_load_gain: f64,
    /// Multiplier on proprioceptive sensor noise; 0 disables it.
    pub sensor_noise: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            body_mass: 32.0,
            gravity: 9.81,
            slip_gain: 0.08,
            roughness_gain: 1.0,
            vibration_gain: 25.0,
            slip_noise: 0.005,
            dt: 0.01,
            frame_rate: 10.0,
            duty_factor: 0.6,
            impact_gain: 0.6,
            imu_noise: 0.02,
            vibration_bandwidth: 8.0,
            terrain_load_gain: 0.4,
            sensor_noise: 1.0,
        }
    }
}

impl SimParams {
    pub fn constants_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("sim params serialize");
        crate::util::sha256_hex(&bytes)[..16].to_string()
    }

    /// Gait frequency in Hz for a commanded speed.
    pub fn gait_frequency(&self, v_cmd: f64) -> f64 {
        (2.0 * v_cmd).clamp(1.0, 4.0)
    }

    /// Number of simulator steps between observation frames.
    pub fn steps_per_frame(&self) -> usize {
        (1.0 / (self.frame_rate * self.dt)).round().max(1.0) as usize
    }
}

/// Flat proprioceptive reading for one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProprioState {
    /// rad/s, leg-major (FR, FL, HR, HL) x (abduction, flexion, knee).
    pub joint_velocity: [f64; 12],
    /// N*m, same layout as `joint_velocity`.
    pub joint_effort: [f64; 12],
    /// Hip abduction angle per leg, rad.
    pub hip_position: [f64; 4],
    pub hip_velocity: [f64; 4],
    /// Body-frame foot positions, m.
    pub foot_position: [[f64; 3]; 4],
    pub foot_velocity: [[f64; 3]; 4],
    /// Normalized stance slip per foot, in [0, 1].
    pub foot_slip: [f64; 4],
}

impl ProprioState {
    pub fn zeros() -> Self {
        ProprioState {
            joint_velocity: [0.0; 12],
            joint_effort: [0.0; 12],
            hip_position: [0.0; 4],
            hip_velocity: [0.0; 4],
            foot_position: [[0.0; 3]; 4],
            foot_velocity: [[0.0; 3]; 4],
            foot_slip: [0.0; 4],
        }
    }

    /// Flattens to the `PROPRIO_DIM` layout: joint velocity (12), joint effort (12),
    /// hip position (4), hip velocity (4), foot position (12), foot velocity (12),
    /// foot slip (4).
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(PROPRIO_DIM);
        v.extend_from_slice(&self.joint_velocity);
        v.extend_from_slice(&self.joint_effort);
        v.extend_from_slice(&self.hip_position);
        v.extend_from_slice(&self.hip_velocity);
        v.extend(self.foot_position.iter().flatten());
        v.extend(self.foot_velocity.iter().flatten());
        v.extend_from_slice(&self.foot_slip);
        v
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != PROPRIO_DIM {
            return Err(Error::invalid(format!(
                "proprio vector must have {PROPRIO_DIM} values, got {}",
                values.len()
            )));
        }
        let mut p = ProprioState::zeros();
        p.joint_velocity.copy_from_slice(&values[0..12]);
        p.joint_effort.copy_from_slice(&values[12..24]);
        p.hip_position.copy_from_slice(&values[24..28]);
        p.hip_velocity.copy_from_slice(&values[28..32]);
        for leg in 0..4 {
            p.foot_position[leg].copy_from_slice(&values[32 + 3 * leg..35 + 3 * leg]);
            p.foot_velocity[leg].copy_from_slice(&values[44 + 3 * leg..47 + 3 * leg]);
        }
        p.foot_slip.copy_from_slice(&values[56..60]);
        Ok(p)
    }

    /// Typical magnitude of each flattened coordinate; the encoder divides by it.
    pub fn nominal_scale() -> [f64; PROPRIO_DIM] {
        let mut s = [0.0; PROPRIO_DIM];
        s[0..12].fill(5.0);
        s[12..24].fill(50.0);
        s[24..28].fill(0.1);
        s[28..32].fill(1.0);
        s[32..44].fill(0.5);
        s[44..56].fill(2.0);
        s[56..60].fill(0.2);
        s
    }

    pub fn mean_slip(&self) -> f64 {
        self.foot_slip.iter().sum::<f64>() / 4.0
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ImuId {
    FR,
    FL,
    HR,
    HL,
    /// Body center.
    C,
}

impl ImuId {
    pub const ALL: [ImuId; 5] = [ImuId::FR, ImuId::FL, ImuId::HR, ImuId::HL, ImuId::C];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ImuId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub imu_id: ImuId,
    /// m/s^2, body frame; z includes gravity.
    pub accel: [f64; 3],
    pub timestamp: f64,
}

/// Coupling of each leg's touchdown impulse into each IMU (rows follow [`ImuId::ALL`]).
const IMPACT_COUPLING: [[f64; 4]; 5] = [
    [1.0, 0.25, 0.25, 0.25],
    [0.25, 1.0, 0.25, 0.25],
    [0.25, 0.25, 1.0, 0.25],
    [0.25, 0.25, 0.25, 1.0],
    [0.5, 0.5, 0.25, 0.25],
];
const VIBRATION_AXIS: [f64; 3] = [0.4, 0.4, 1.0];

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub proprio: ProprioState,
    pub imu: [ImuSample; 5],
    pub achieved_velocity: f64,
}

/// Internal simulator state. Stepping mutates it in place.
#[derive(Debug, Clone)]
pub struct SimState {
    terrain: TerrainSpec,
    params: SimParams,
    rng: ChaCha8Rng,
    time: f64,
    position: f64,
    gait_phase: f64,
    vibration: [[f64; 3]; 5],
    impact: [f64; 4],
    in_stance: [bool; 4],
    step_index: u64,
}

/// Normal draws consumed per step, in a fixed order independent of inputs.
const SLIP_DRAWS: usize = 4;
const VIB_DRAWS: usize = 15;
const FLOOR_DRAWS: usize = 15;
const PROPRIO_DRAWS: usize = 56;
const DRAWS_PER_STEP: usize = SLIP_DRAWS + VIB_DRAWS + FLOOR_DRAWS + PROPRIO_DRAWS;

impl SimState {
    pub fn new(terrain: TerrainSpec, seed: u64) -> Self {
        Self::with_params(terrain, SimParams::default(), seed)
    }

    pub fn with_params(terrain: TerrainSpec, params: SimParams, seed: u64) -> Self {
        SimState {
            terrain,
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            time: 0.0,
            position: 0.0,
            gait_phase: 0.0,
            vibration: [[0.0; 3]; 5],
            impact: [0.0; 4],
            in_stance: [true; 4],
            step_index: 0,
        }
    }

    pub fn terrain(&self) -> &TerrainSpec {
        &self.terrain
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Distance travelled along the path, meters.
    pub fn position(&self) -> f64 {
        self.position
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    fn mass_factor(&self, payload_mass: f64) -> f64 {
        1.0 + payload_mass / self.params.body_mass
    }

    /// Deterministic slip magnitude before gating and noise.
    pub fn slip_base(&self, v_cmd: f64, payload_mass: f64) -> f64 {
        let p = &self.params;
        p.slip_gain
            * v_cmd
            * v_cmd
            * (1.0 - self.terrain.friction_coeff)
            * self.mass_factor(payload_mass)
            * (1.0 + p.roughness_gain * self.terrain.roughness / 0.02)
    }

    /// Noise-free reading of the robot standing still at the current position.
    pub fn standing_proprio(&self, payload_mass: f64) -> ProprioState {
        let stance = [true; 4];
        self.kinematics(0.0, payload_mass, [0.0; 4], [0.0; 4], &stance)
    }

    fn kinematics(
        &self,
        v_cmd: f64,
        payload_mass: f64,
        leg_phase: [f64; 4],
        slip: [f64; 4],
        stance: &[bool; 4],
    ) -> ProprioState {
        let p = &self.params;
        let t = &self.terrain;
        let mass_factor = self.mass_factor(payload_mass);
        let total_weight = (p.body_mass + payload_mass) * p.gravity;
        let freq = if v_cmd > 0.0 {
            p.gait_frequency(v_cmd)
        } else {
            0.0
        };
        let n_stance = stance.iter().filter(|s| **s).count().max(1) as f64;
        let duty = p.duty_factor;
        let stride = if freq > 0.0 { v_cmd * duty / freq } else { 0.0 };
        let sway = HIP_SWAY * (1.0 + t.roughness / 0.02);

        // Uneven ground shifts load between legs; a uniform rise under all four does not.
        let heights: [f64; 4] =
            std::array::from_fn(|leg| t.height_at(self.position + HIP_X[leg], HIP_Y[leg]));
        let mean_height = heights.iter().sum::<f64>() / 4.0;

        let mut out = ProprioState::zeros();
        for leg in 0..4 {
            let angle = 2.0 * PI * leg_phase[leg];
            for j in 0..3 {
                let k = 3 * leg + j;
                out.joint_velocity[k] =
                    JOINT_AMPLITUDE[j] * PI * v_cmd * (angle + JOINT_PHASE[j]).cos();
                let load = if stance[leg] {
                    total_weight / n_stance
                } else {
                    0.0
                };
                out.joint_effort[k] = JOINT_LEVER[j]
                    * load
                    * (1.0 + 0.5 * t.compliance)
                    * (1.0 + p.terrain_load_gain * (heights[leg] - mean_height) / 0.02)
                    + JOINT_DRIVE[j] * v_cmd;
            }

            out.hip_position[leg] =
                mass_factor * v_cmd * (HIP_POSTURE + sway * (2.0 * angle).sin());
            out.hip_velocity[leg] =
                mass_factor * v_cmd * sway * (2.0 * angle).cos() * 4.0 * PI * freq;

            let ground = heights[leg];
            let (x, z, vx, vz) = if stance[leg] {
                let progress = if duty > 0.0 {
                    leg_phase[leg] / duty
                } else {
                    0.0
                };
                let x = stride * (0.5 - progress);
                (x, 0.0, -v_cmd * (1.0 + slip[leg]), 0.0)
            } else {
                let s = (leg_phase[leg] - duty) / (1.0 - duty);
                let clearance = 0.05 + 0.02 * v_cmd;
                let swing_rate = freq / (1.0 - duty);
                (
                    stride * (s - 0.5),
                    clearance * (PI * s).sin(),
                    v_cmd * duty / (1.0 - duty),
                    clearance * PI * (PI * s).cos() * swing_rate,
                )
            };
            out.foot_position[leg] = [HIP_X[leg] + x, HIP_Y[leg], -STANDING_HEIGHT + ground + z];
            out.foot_velocity[leg] = [vx, 0.0, vz];
            out.foot_slip[leg] = slip[leg];
        }
        out
    }

    /// Advances the simulator by `dt` seconds under commanded forward speed `v_cmd`.
    pub fn step(&mut self, v_cmd: f64, payload_mass: f64, dt: f64) -> Result<StepOutput> {
        if !(v_cmd >= 0.0 && v_cmd.is_finite()) {
            return Err(Error::invalid(format!(
                "v_cmd must be finite and >= 0, got {v_cmd}"
            )));
        }
        if !(dt > 0.0 && dt <= 0.1) {
            return Err(Error::invalid(format!("dt must lie in (0, 0.1], got {dt}")));
        }
        if !(payload_mass >= 0.0 && payload_mass.is_finite()) {
            return Err(Error::invalid(format!(
                "payload_mass must be >= 0, got {payload_mass}"
            )));
        }

        let mut draws = [0.0f64; DRAWS_PER_STEP];
        for d in draws.iter_mut() {
            *d = self.rng.sample(StandardNormal);
        }
        let (slip_noise, rest) = draws.split_at(SLIP_DRAWS);
        let (vib_noise, rest) = rest.split_at(VIB_DRAWS);
        let (floor_noise, proprio_noise) = rest.split_at(FLOOR_DRAWS);

        let moving = v_cmd > 0.0;
        let duty = self.params.duty_factor;
        if moving {
            self.gait_phase = (self.gait_phase + self.params.gait_frequency(v_cmd) * dt).fract();
        }
        let mut leg_phase = [0.0; 4];
        let mut stance = [true; 4];
        for leg in 0..4 {
            leg_phase[leg] = (self.gait_phase + LEG_PHASE_OFFSET[leg]).fract();
            stance[leg] = !moving || leg_phase[leg] < duty;
        }

        let base = self.slip_base(v_cmd, payload_mass);
        let mut slip = [0.0; 4];
        if moving {
            for leg in 0..4 {
                if stance[leg] {
                    slip[leg] = (base + self.params.slip_noise * slip_noise[leg]).clamp(0.0, 1.0);
                }
            }
        }
        let mean_slip = slip.iter().sum::<f64>() / 4.0;
        let achieved_velocity = v_cmd * (1.0 - mean_slip);

        let mut proprio = self.kinematics(v_cmd, payload_mass, leg_phase, slip, &stance);
        let sn = self.params.sensor_noise;
        let mut it = proprio_noise.iter();
        let mut noisy =
            |x: &mut f64, sigma: f64| *x += sn * sigma * it.next().expect("draw budget");
        proprio
            .joint_velocity
            .iter_mut()
            .for_each(|x| noisy(x, NOISE_JOINT_VEL));
        proprio
            .joint_effort
            .iter_mut()
            .for_each(|x| noisy(x, NOISE_EFFORT));
        proprio
            .hip_position
            .iter_mut()
            .for_each(|x| noisy(x, NOISE_HIP_POS));
        proprio
            .hip_velocity
            .iter_mut()
            .for_each(|x| noisy(x, NOISE_HIP_VEL));
        proprio
            .foot_position
            .iter_mut()
            .flatten()
            .for_each(|x| noisy(x, NOISE_FOOT_POS));
        proprio
            .foot_velocity
            .iter_mut()
            .flatten()
            .for_each(|x| noisy(x, NOISE_FOOT_VEL));

        // Touchdown impulses and band-limited vibration.
        let mass_factor = self.mass_factor(payload_mass);
        let terrain = self.terrain;
        for leg in 0..4 {
            self.impact[leg] *= IMPACT_DECAY;
            if moving && stance[leg] && !self.in_stance[leg] {
                let strike = self.params.impact_gain
                    * v_cmd
                    * mass_factor
                    * (1.0 - 0.5 * terrain.compliance)
                    * (1.0 + terrain.roughness / 0.02);
                self.impact[leg] = self.impact[leg].max(strike);
            }
        }
        self.in_stance = stance;

        let rho = (-2.0 * PI * self.params.vibration_bandwidth * dt).exp();
        let innovation = (1.0 - rho * rho).sqrt();
        let amplitude = self.params.vibration_gain * v_cmd * terrain.roughness * mass_factor;
        self.time += dt;
        self.position += achieved_velocity * dt;
        self.step_index += 1;

        let mut imu = [ImuSample {
            imu_id: ImuId::FR,
            accel: [0.0; 3],
            timestamp: self.time,
        }; 5];
        for (i, id) in ImuId::ALL.iter().enumerate() {
            let impulse: f64 = (0..4)
                .map(|leg| IMPACT_COUPLING[i][leg] * self.impact[leg])
                .sum();
            let mut accel = [0.0, 0.0, self.params.gravity];
            for axis in 0..3 {
                let state = &mut self.vibration[i][axis];
                *state = rho * *state + innovation * vib_noise[3 * i + axis];
                accel[axis] += amplitude * VIBRATION_AXIS[axis] * *state
                    + self.params.imu_noise * floor_noise[3 * i + axis];
            }
            accel[0] += 0.3 * impulse;
            accel[2] += impulse;
            imu[i] = ImuSample {
                imu_id: *id,
                accel,
                timestamp: self.time,
            };
        }

        let finite = proprio.is_finite()
            && achieved_velocity.is_finite()
            && self.position.is_finite()
            && imu.iter().all(|s| s.accel.iter().all(|a| a.is_finite()));
        if !finite {
            return Err(Error::Divergence {
                step: self.step_index,
                message: "non-finite simulator state".into(),
            });
        }

        Ok(StepOutput {
            proprio,
            imu,
            achieved_velocity,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::{make_terrain, TerrainClass};

    fn mean_slip_over(terrain: TerrainSpec, v: f64, payload: f64, steps: usize) -> f64 {
        let mut sim = SimState::new(terrain, 5);
        let mut acc = 0.0;
        for _ in 0..steps {
            acc += sim.step(v, payload, 0.01).unwrap().proprio.mean_slip();
        }
        acc / steps as f64
    }

    #[test]
    fn flattened_layout_round_trips() {
        let mut sim = SimState::new(make_terrain(TerrainClass::Gravel, 1), 3);
        let out = sim.step(1.3, 2.0, 0.01).unwrap();
        let flat = out.proprio.to_vec();
        assert_eq!(flat.len(), PROPRIO_DIM);
        assert_eq!(ProprioState::from_slice(&flat).unwrap(), out.proprio);
        assert!(ProprioState::from_slice(&flat[..59]).is_err());
    }

    #[test]
    fn rest_is_slip_free_and_quiet() {
        let params = SimParams {
            sensor_noise: 0.0,
            ..SimParams::default()
        };
        for class in TerrainClass::ALL {
            let mut sim = SimState::with_params(make_terrain(class, 4), params.clone(), 9);
            for _ in 0..200 {
                let out = sim.step(0.0, 6.8, 0.01).unwrap();
                assert_eq!(out.proprio.foot_slip, [0.0; 4]);
                assert_eq!(out.achieved_velocity, 0.0);
                assert!(out.proprio.joint_velocity.iter().all(|v| v.abs() < 1e-6));
                for s in &out.imu {
                    // gravity plus the white noise floor only
                    assert!((s.accel[2] - 9.81).abs() < 6.0 * params.imu_noise);
                    assert!(s.accel[0].abs() < 6.0 * params.imu_noise);
                }
            }
        }
    }

    #[test]
    fn ideal_traction_barely_slips() {
        let t = TerrainSpec::new(TerrainClass::Concrete, 1.0, 0.0, 0.0, 1).unwrap();
        let mut sim = SimState::new(t, 2);
        let mut slip = 0.0;
        let mut achieved = 0.0;
        for _ in 0..1000 {
            let out = sim.step(1.0, 0.0, 0.01).unwrap();
            slip += out.proprio.mean_slip();
            achieved += out.achieved_velocity;
        }
        assert!(slip / 1000.0 < 0.01);
        assert!((achieved / 1000.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn payload_increases_slip_on_gravel() {
        let g = make_terrain(TerrainClass::Gravel, 7);
        let light = mean_slip_over(g, 2.0, 0.0, 1000);
        let heavy = mean_slip_over(g, 2.0, 6.8, 1000);
        assert!(heavy > light, "{heavy} <= {light}");
    }

    #[test]
    fn slip_monotone_in_speed_payload_and_friction() {
        let g = make_terrain(TerrainClass::Grass, 7);
        let speeds = [0.3, 0.8, 1.3, 1.8, 2.3, 2.5];
        let by_speed: Vec<f64> = speeds
            .iter()
            .map(|&v| mean_slip_over(g, v, 1.0, 1000))
            .collect();
        assert!(by_speed.windows(2).all(|w| w[1] >= w[0]), "{by_speed:?}");

        let payloads = [0.0, 1.0, 3.0, 6.8, 10.0];
        let by_payload: Vec<f64> = payloads
            .iter()
            .map(|&m| mean_slip_over(g, 2.0, m, 1000))
            .collect();
        assert!(
            by_payload.windows(2).all(|w| w[1] >= w[0]),
            "{by_payload:?}"
        );

        let frictions = [1.0, 0.85, 0.7, 0.55, 0.4, 0.25];
        let by_friction: Vec<f64> = frictions
            .iter()
            .map(|&mu| {
                let t = TerrainSpec {
                    friction_coeff: mu,
                    ..g
                };
                mean_slip_over(t, 2.0, 1.0, 1000)
            })
            .collect();
        assert!(
            by_friction.windows(2).all(|w| w[1] >= w[0]),
            "{by_friction:?}"
        );
    }

    #[test]
    fn terrain_slip_ordering_at_two_meters_per_second() {
        let slip = |c| mean_slip_over(make_terrain(c, 3), 2.0, 1.0, 1000);
        let concrete = slip(TerrainClass::Concrete);
        let grass = slip(TerrainClass::Grass);
        let gravel = slip(TerrainClass::Gravel);
        assert!(
            gravel > grass && grass > concrete,
            "{gravel} {grass} {concrete}"
        );
        assert!(gravel < 0.5);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let mut sim = SimState::new(make_terrain(TerrainClass::Grass, 1), 1);
        assert!(sim.step(-0.1, 0.0, 0.01).is_err());
        assert!(sim.step(1.0, -1.0, 0.01).is_err());
        assert!(sim.step(1.0, 0.0, 0.0).is_err());
        assert!(sim.step(1.0, 0.0, 0.2).is_err());
        assert!(sim.step(f64::NAN, 0.0, 0.01).is_err());
    }

    #[test]
    fn imu_timestamps_increase() {
        let mut sim = SimState::new(make_terrain(TerrainClass::Gravel, 1), 1);
        let mut last = 0.0;
        for _ in 0..50 {
            let out = sim.step(1.5, 0.0, 0.01).unwrap();
            let ids: Vec<ImuId> = out.imu.iter().map(|s| s.imu_id).collect();
            assert_eq!(ids, ImuId::ALL);
            assert!(out.imu[0].timestamp > last);
            last = out.imu[0].timestamp;
        }
    }
}
