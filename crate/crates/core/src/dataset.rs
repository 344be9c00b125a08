//! Sequence formation, weak labels, mini-batching and the binary dataset format.
//!
//! Dataset file layout (all integers and floats little-endian):
//!
//! ```text
//! magic    4 bytes  "PNSD"
//! version  u16
//! count    u64
//! records  count x RECORD_BYTES
//!   run_id      u64
//!   window      u64
//!   v_applied   f64
//!   mean_slip   f64
//!   proprio     60 x f32
//!   image       64*64*3 x f32 (row-major HWC)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::simworld::{Observation, ProprioState, RunLog, OBSERVATION_LEN, PROPRIO_DIM};
use crate::{Error, Result};

pub const DATASET_MAGIC: [u8; 4] = *b"PNSD";
pub const DATASET_VERSION: u16 = 1;
const HEADER_BYTES: usize = 4 + 2 + 8;
pub const RECORD_BYTES: usize = 8 + 8 + 8 + 8 + 4 * PROPRIO_DIM + 4 * OBSERVATION_LEN;

/// Default window length in seconds.
pub const DEFAULT_WINDOW: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SequenceSource {
    pub run_id: u64,
    pub window: u64,
}

/// Synchronized (image, proprioception, applied velocity) tuple for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub image: Observation,
    /// Window-averaged flat proprioception.
    pub proprio: Vec<f32>,
    /// Window mean of the commanded velocity, m/s (the weak label).
    pub v_applied: f64,
    /// Window mean of the per-foot slips.
    pub mean_slip: f64,
    pub source: SequenceSource,
}

impl Sequence {
    pub fn proprio_f64(&self) -> Vec<f64> {
        self.proprio.iter().map(|&v| v as f64).collect()
    }

    pub fn proprio_state(&self) -> ProprioState {
        ProprioState::from_slice(&self.proprio_f64())
            .expect("sequence proprio has PROPRIO_DIM values")
    }

    pub fn validate(&self) -> Result<()> {
        if self.image.data.len() != OBSERVATION_LEN || self.proprio.len() != PROPRIO_DIM {
            return Err(Error::invalid("sequence has wrong image or proprio shape"));
        }
        if !(self.v_applied >= 0.0) {
            return Err(Error::invalid(format!("v_applied {} < 0", self.v_applied)));
        }
        if !(0.0..=1.0).contains(&self.mean_slip) {
            return Err(Error::invalid(format!(
                "mean_slip {} outside [0, 1]",
                self.mean_slip
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBatch {
    pub batch_id: usize,
    /// Indices into the sequence list the batch was drawn from.
    pub indices: Vec<usize>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn sequences<'a>(&'a self, all: &'a [Sequence]) -> impl Iterator<Item = &'a Sequence> + 'a {
        self.indices.iter().map(move |&i| &all[i])
    }
}

fn steps_per_frame(log: &RunLog) -> usize {
    log.steps
        .iter()
        .position(|s| s.frame_index == 1)
        .unwrap_or(log.steps.len().max(1))
}

/// Splits a run log into non-overlapping windows of `window` seconds.
///
/// The trailing partial window is dropped.
pub fn form_sequences(log: &RunLog, window: f64) -> Result<Vec<Sequence>> {
    if !(window >= log.dt) {
        return Err(Error::invalid(format!(
            "window {window} s is shorter than the log step {} s",
            log.dt
        )));
    }
    let ratio = window / log.dt;
    let window_steps = ratio.round() as usize;
    if (ratio - window_steps as f64).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "window {window} s is not a multiple of dt"
        )));
    }
    let spf = steps_per_frame(log);
    if !window_steps.is_multiple_of(spf) {
        return Err(Error::invalid(format!(
            "window {window} s is not a multiple of the frame interval {} s",
            spf as f64 * log.dt
        )));
    }

    let run_id = log.run_id();
    let count = log.steps.len() / window_steps;
    let mut out = Vec::with_capacity(count);
    for w in 0..count {
        let chunk = &log.steps[w * window_steps..(w + 1) * window_steps];
        let mut proprio = vec![0.0f64; PROPRIO_DIM];
        let mut v_sum = 0.0;
        let mut slip_sum = 0.0;
        for step in chunk {
            for (acc, v) in proprio.iter_mut().zip(step.proprio.to_vec()) {
                *acc += v;
            }
            v_sum += step.commanded_velocity;
            slip_sum += step.proprio.foot_slip.iter().sum::<f64>();
        }
        let n = chunk.len() as f64;
        out.push(Sequence {
            image: log.frames[chunk[0].frame_index].clone(),
            proprio: proprio.iter().map(|v| (v / n) as f32).collect(),
            v_applied: v_sum / n,
            mean_slip: (slip_sum / (4.0 * n)).clamp(0.0, 1.0),
            source: SequenceSource {
                run_id,
                window: w as u64,
            },
        });
    }
    Ok(out)
}

/// Shuffles item indices with a seeded generator and cuts them into batches of `batch_size`.
pub fn shuffle_batches<T>(items: &[T], batch_size: usize, seed: u64) -> Result<Vec<MiniBatch>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    Ok(order
        .chunks(batch_size)
        .enumerate()
        .map(|(batch_id, chunk)| MiniBatch {
            batch_id,
            indices: chunk.to_vec(),
        })
        .collect())
}

pub fn write_dataset(sequences: &[Sequence], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&(sequences.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(RECORD_BYTES);
    for (i, s) in sequences.iter().enumerate() {
        if s.image.data.len() != OBSERVATION_LEN || s.proprio.len() != PROPRIO_DIM {
            return Err(Error::invalid(format!(
                "sequence {i} has wrong image or proprio shape"
            )));
        }
        buf.clear();
        buf.extend_from_slice(&s.source.run_id.to_le_bytes());
        buf.extend_from_slice(&s.source.window.to_le_bytes());
        buf.extend_from_slice(&s.v_applied.to_le_bytes());
        buf.extend_from_slice(&s.mean_slip.to_le_bytes());
        for v in &s.proprio {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in &s.image.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

fn last_complete(i: usize) -> String {
    match i {
        0 => "no complete record".to_string(),
        n => format!("last complete record is {}", n - 1),
    }
}

pub fn read_dataset(path: &Path) -> Result<Vec<Sequence>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; HEADER_BYTES];
    if read_full(&mut r, &mut header)? < HEADER_BYTES {
        return Err(Error::Parse {
            record: 0,
            message: "file shorter than dataset header".into(),
        });
    }
    if header[..4] != DATASET_MAGIC {
        return Err(Error::Parse {
            record: 0,
            message: "bad magic, not a dataset file".into(),
        });
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != DATASET_VERSION {
        return Err(Error::Version {
            found: version,
            expected: DATASET_VERSION,
        });
    }
    let count = u64::from_le_bytes(header[6..14].try_into().expect("8 bytes")) as usize;

    let mut out = Vec::with_capacity(count.min(1 << 16));
    let mut buf = vec![0u8; RECORD_BYTES];
    for i in 0..count {
        let got = read_full(&mut r, &mut buf)?;
        if got < RECORD_BYTES {
            return Err(Error::Parse {
                record: i,
                message: format!(
                    "truncated record ({got} of {RECORD_BYTES} bytes); {}",
                    last_complete(i)
                ),
            });
        }
        let u64_at = |o: usize| u64::from_le_bytes(buf[o..o + 8].try_into().expect("8 bytes"));
        let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().expect("8 bytes"));
        let f32s = |start: usize, n: usize| -> Vec<f32> {
            buf[start..start + 4 * n]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect()
        };
        let seq = Sequence {
            source: SequenceSource {
                run_id: u64_at(0),
                window: u64_at(8),
            },
            v_applied: f64_at(16),
            mean_slip: f64_at(24),
            proprio: f32s(32, PROPRIO_DIM),
            image: Observation {
                data: f32s(32 + 4 * PROPRIO_DIM, OBSERVATION_LEN),
            },
        };
        seq.validate().map_err(|e| Error::Parse {
            record: i,
            message: e.to_string(),
        })?;
        out.push(seq);
    }
    let mut probe = [0u8; 1];
    if read_full(&mut r, &mut probe)? != 0 {
        return Err(Error::Parse {
            record: count,
            message: "trailing bytes after the declared record count".into(),
        });
    }
    Ok(out)
}
