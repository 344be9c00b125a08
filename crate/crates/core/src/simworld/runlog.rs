use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::render::{render_observation, Observation, OBSERVATION_LEN};
use super::sim::{ImuSample, ProprioState, SimParams, SimState};
use super::terrain::TerrainSpec;
use crate::{Error, Result};

const RUNLOG_FORMAT: &str = "panos-runlog";
const RUNLOG_VERSION: u16 = 1;

/// One simulator step as logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub commanded_velocity: f64,
    pub achieved_velocity: f64,
    pub proprio: ProprioState,
    pub imu: [ImuSample; 5],
    /// Index of the most recent observation frame at the start of this step.
    pub frame_index: usize,
}

/// Closed- or open-loop trial record.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub terrain: TerrainSpec,
    pub payload_mass: f64,
    pub dt: f64,
    pub seed: u64,
    pub constants_hash: String,
    pub steps: Vec<StepRecord>,
    pub frames: Vec<Observation>,
}

/// First line of a serialized run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogHeader {
    pub format: String,
    pub version: u16,
    pub terrain: TerrainSpec,
    pub payload_mass: f64,
    pub dt: f64,
    pub seed: u64,
    pub constants_hash: String,
    pub step_count: usize,
    pub frame_count: usize,
    /// Sibling file holding the frames as little-endian f32 blocks.
    pub frames_file: String,
}

impl RunLog {
    pub(crate) fn empty(
        terrain: TerrainSpec,
        params: &SimParams,
        payload_mass: f64,
        seed: u64,
    ) -> Self {
        RunLog {
            terrain,
            payload_mass,
            dt: params.dt,
            seed,
            constants_hash: params.constants_hash(),
            steps: Vec::new(),
            frames: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.steps.len() as f64 * self.dt
    }

    /// Stable identifier derived from the run's configuration.
    pub fn run_id(&self) -> u64 {
        let key = serde_json::json!({
            "terrain": self.terrain,
            "payload_mass": self.payload_mass,
            "dt": self.dt,
            "seed": self.seed,
            "constants_hash": self.constants_hash,
        });
        let digest = crate::util::sha256(key.to_string().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::invalid("run log dt must be > 0"));
        }
        if let Some(bad) = self
            .steps
            .iter()
            .position(|s| s.frame_index >= self.frames.len())
        {
            return Err(Error::invalid(format!(
                "step {bad} references a missing frame"
            )));
        }
        Ok(())
    }

    /// Appends a log of identical configuration, re-indexing its frames.
    pub fn concat(&self, other: &RunLog) -> Result<RunLog> {
        if self.terrain != other.terrain
            || self.payload_mass != other.payload_mass
            || self.dt != other.dt
            || self.constants_hash != other.constants_hash
        {
            return Err(Error::invalid(
                "can only concatenate logs of identical configuration",
            ));
        }
        let mut out = self.clone();
        let offset = out.frames.len();
        out.frames.extend(other.frames.iter().cloned());
        out.steps.extend(other.steps.iter().map(|s| StepRecord {
            frame_index: s.frame_index + offset,
            ..s.clone()
        }));
        Ok(out)
    }

    fn header(&self, frames_file: String) -> RunLogHeader {
        RunLogHeader {
            format: RUNLOG_FORMAT.to_string(),
            version: RUNLOG_VERSION,
            terrain: self.terrain,
            payload_mass: self.payload_mass,
            dt: self.dt,
            seed: self.seed,
            constants_hash: self.constants_hash.clone(),
            step_count: self.steps.len(),
            frame_count: self.frames.len(),
            frames_file,
        }
    }
}

/// Steps the simulator for `steps` iterations, rendering frames at the
/// configured frame rate and asking `command` for each step's velocity.
///
/// `command` sees the step index, the simulator state before the step, and
/// the log recorded so far (its last frame is the current observation).
pub(crate) fn drive<F>(
    terrain: TerrainSpec,
    params: SimParams,
    payload_mass: f64,
    steps: usize,
    seed: u64,
    mut command: F,
) -> Result<RunLog>
where
    F: FnMut(usize, &SimState, &RunLog) -> Result<f64>,
{
    terrain.validate()?;
    let dt = params.dt;
    let steps_per_frame = params.steps_per_frame();
    let mut log = RunLog::empty(terrain, &params, payload_mass, seed);
    log.steps.reserve(steps);
    let mut sim = SimState::with_params(terrain, params, seed);
    for k in 0..steps {
        if k % steps_per_frame == 0 {
            log.frames
                .push(render_observation(&terrain, sim.position()));
        }
        let v_cmd = command(k, &sim, &log)?;
        let out = sim.step(v_cmd, payload_mass, dt)?;
        log.steps.push(StepRecord {
            commanded_velocity: v_cmd,
            achieved_velocity: out.achieved_velocity,
            proprio: out.proprio,
            imu: out.imu,
            frame_index: log.frames.len() - 1,
        });
    }
    Ok(log)
}

pub(crate) fn step_count(duration: f64, dt: f64) -> Result<usize> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid(format!(
            "duration must be > 0, got {duration}"
        )));
    }
    Ok((duration / dt).round() as usize)
}

/// Open-loop traversal following `velocity_profile(t)` (m/s) for `duration` seconds.
pub fn rollout<F>(
    terrain: &TerrainSpec,
    velocity_profile: F,
    payload_mass: f64,
    duration: f64,
    seed: u64,
) -> Result<RunLog>
where
    F: Fn(f64) -> f64,
{
    let params = SimParams::default();
    let steps = step_count(duration, params.dt)?;
    let dt = params.dt;
    drive(*terrain, params, payload_mass, steps, seed, |k, _, _| {
        Ok(velocity_profile(k as f64 * dt))
    })
}

fn frames_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".frames.bin");
    path.with_file_name(name)
}

/// Writes the log as JSON lines at `path` plus a sibling `<name>.frames.bin`.
pub fn write_runlog(log: &RunLog, path: &Path) -> Result<()> {
    let frames = frames_path(path);
    let frames_name = frames
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::invalid("run log path needs a UTF-8 file name"))?
        .to_string();

    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &log.header(frames_name))?;
    w.write_all(b"\n")?;
    for step in &log.steps {
        serde_json::to_writer(&mut w, step)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    let mut fw = BufWriter::new(File::create(&frames)?);
    for frame in &log.frames {
        for v in &frame.data {
            fw.write_all(&v.to_le_bytes())?;
        }
    }
    fw.flush()?;
    Ok(())
}

pub fn read_runlog(path: &Path) -> Result<RunLog> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines.next().ok_or(Error::Parse {
        record: 0,
        message: "missing header".into(),
    })??;
    let header: RunLogHeader = serde_json::from_str(&header_line).map_err(|e| Error::Parse {
        record: 0,
        message: format!("bad header: {e}"),
    })?;
    if header.format != RUNLOG_FORMAT {
        return Err(Error::Parse {
            record: 0,
            message: format!("not a run log (format `{}`)", header.format),
        });
    }
    if header.version != RUNLOG_VERSION {
        return Err(Error::Version {
            found: header.version,
            expected: RUNLOG_VERSION,
        });
    }
    let mut steps = Vec::with_capacity(header.step_count);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: StepRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            record: i + 1,
            message: e.to_string(),
        })?;
        steps.push(rec);
    }
    if steps.len() != header.step_count {
        return Err(Error::Parse {
            record: steps.len(),
            message: format!(
                "expected {} step records, found {}",
                header.step_count,
                steps.len()
            ),
        });
    }

    let mut bytes = Vec::new();
    File::open(path.with_file_name(&header.frames_file))?.read_to_end(&mut bytes)?;
    let frame_bytes = OBSERVATION_LEN * 4;
    if bytes.len() != header.frame_count * frame_bytes {
        return Err(Error::Parse {
            record: bytes.len() / frame_bytes,
            message: format!(
                "frame file holds {} bytes, expected {}",
                bytes.len(),
                header.frame_count * frame_bytes
            ),
        });
    }
    let frames = bytes
        .chunks_exact(frame_bytes)
        .map(|chunk| Observation {
            data: chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect(),
        })
        .collect();

    let log = RunLog {
        terrain: header.terrain,
        payload_mass: header.payload_mass,
        dt: header.dt,
        seed: header.seed,
        constants_hash: header.constants_hash,
        steps,
        frames,
    };
    log.validate()?;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::{make_terrain, TerrainClass};

    #[test]
    fn step_and_frame_counts() {
        let t = make_terrain(TerrainClass::Grass, 1);
        let log = rollout(&t, |_| 1.0, 1.0, 60.0, 3).unwrap();
        assert_eq!(log.len(), 6000);
        assert_eq!(log.frames.len(), 600);
        assert_eq!(log.steps[0].frame_index, 0);
        assert_eq!(log.steps[10].frame_index, 1);
        assert_eq!(log.steps[5999].frame_index, 599);
    }

    #[test]
    fn rejects_non_positive_duration() {
        let t = make_terrain(TerrainClass::Grass, 1);
        assert!(rollout(&t, |_| 1.0, 1.0, 0.0, 3).is_err());
        assert!(rollout(&t, |_| 1.0, 1.0, -2.0, 3).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let t = make_terrain(TerrainClass::Gravel, 5);
        let a = rollout(&t, |t| 0.5 + t * 0.1, 6.8, 5.0, 11).unwrap();
        let b = rollout(&t, |t| 0.5 + t * 0.1, 6.8, 5.0, 11).unwrap();
        assert_eq!(a, b);
        let c = rollout(&t, |t| 0.5 + t * 0.1, 6.8, 5.0, 12).unwrap();
        assert_ne!(a.steps, c.steps);
    }

    #[test]
    fn achieved_velocity_tracks_logged_slip() {
        let t = make_terrain(TerrainClass::Concrete, 2);
        let log = rollout(&t, |_| 2.0, 1.0, 10.0, 4).unwrap();
        let n = log.len() as f64;
        let mean_achieved = log.steps.iter().map(|s| s.achieved_velocity).sum::<f64>() / n;
        let mean_slip = log.steps.iter().map(|s| s.proprio.mean_slip()).sum::<f64>() / n;
        let expected = 2.0 * (1.0 - mean_slip);
        assert!((mean_achieved - expected).abs() <= 0.05 * expected);
    }

    #[test]
    fn file_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let t = make_terrain(TerrainClass::PebbleSidewalk, 8);
        let log = rollout(&t, |t| 1.0 + (t * 0.7).sin(), 3.0, 2.0, 21).unwrap();
        write_runlog(&log, &path).unwrap();
        let back = read_runlog(&path).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn truncated_log_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let t = make_terrain(TerrainClass::Grass, 8);
        let log = rollout(&t, |_| 1.0, 0.0, 1.0, 2).unwrap();
        write_runlog(&log, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cut: String = text.lines().take(40).collect::<Vec<_>>().join("\n");
        std::fs::write(&path, cut).unwrap();
        match read_runlog(&path) {
            Err(Error::Parse { record, .. }) => assert_eq!(record, 39),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
