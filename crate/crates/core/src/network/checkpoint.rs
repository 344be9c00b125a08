//! Checkpoint file layout (little-endian):
//!
//! ```text
//! magic        "PNSW"
//! version      u16
//! dims         7 x u32: n_v, d_v, d_p, patch, image_size, encoder_hidden, head_hidden
//! seeds        2 x u64: tokenizer_seed, param_seed
//! config_hash  32 bytes (SHA-256 of the model config)
//! block_count  u16
//! blocks       block_count x { name_len u16, name utf-8, len u64, len x f32 }
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::params::{ModelConfig, ModelParams, Tokenizer, Trainable};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PNSW";
pub const CHECKPOINT_VERSION: u16 = 1;
const TOKENIZER_BLOCK: &str = "tokenizer";

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let c = params.config();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    for d in [
        c.n_v,
        c.d_v,
        c.d_p,
        c.patch,
        c.image_size,
        c.encoder_hidden,
        c.head_hidden,
    ] {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&c.tokenizer_seed.to_le_bytes())?;
    w.write_all(&c.param_seed.to_le_bytes())?;
    w.write_all(&c.config_hash())?;

    let mut blocks: Vec<(&str, &[f64])> = vec![(TOKENIZER_BLOCK, params.tokenizer().projection())];
    blocks.extend(
        params
            .trainable
            .blocks()
            .iter()
            .map(|(n, b)| (*n, b.as_slice())),
    );
    w.write_all(&(blocks.len() as u16).to_le_bytes())?;
    for (name, values) in blocks {
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(values.len() as u64).to_le_bytes())?;
        for v in values {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Loads a checkpoint, verifying its dims against its stored config hash and,
/// when `expected` is given, against that configuration.
pub fn load_checkpoint(path: &Path, expected: Option<&ModelConfig>) -> Result<ModelParams> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    if cur.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic, not a checkpoint".into()));
    }
    let version = cur.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let mut dims = [0usize; 7];
    for d in dims.iter_mut() {
        *d = cur.u32()? as usize;
    }
    let config = ModelConfig {
        n_v: dims[0],
        d_v: dims[1],
        d_p: dims[2],
        patch: dims[3],
        image_size: dims[4],
        encoder_hidden: dims[5],
        head_hidden: dims[6],
        tokenizer_seed: cur.u64()?,
        param_seed: cur.u64()?,
    };
    let stored_hash = cur.take(32)?;
    if stored_hash != config.config_hash() {
        return Err(Error::Checkpoint(
            "config hash does not match stored dims and seeds".into(),
        ));
    }
    if let Some(exp) = expected {
        if exp.config_hash() != config.config_hash() {
            return Err(Error::Checkpoint(format!(
                "config hash mismatch: checkpoint {} vs expected {}",
                config.config_hash_hex(),
                exp.config_hash_hex()
            )));
        }
    }
    config.validate()?;

    let mut trainable = Trainable::zeros(&config);
    let mut tokenizer = None;
    let count = cur.u16()? as usize;
    let mut seen = Vec::new();
    for _ in 0..count {
        let name_len = cur.u16()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| Error::Checkpoint("block name is not utf-8".into()))?
            .to_string();
        let len = cur.u64()? as usize;
        let raw = cur.take(
            len.checked_mul(4)
                .ok_or_else(|| Error::Checkpoint("block too large".into()))?,
        )?;
        let values: Vec<f64> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
            .collect();
        if name == TOKENIZER_BLOCK {
            if len != config.d_v * config.patch_dim() {
                return Err(Error::Checkpoint("tokenizer block has wrong size".into()));
            }
            tokenizer = Some(Tokenizer::from_raw(values));
        } else {
            let slot = trainable
                .blocks_mut()
                .into_iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown block `{name}`")))?
                .1;
            if slot.len() != len {
                return Err(Error::Checkpoint(format!(
                    "block `{name}` has {len} values, expected {}",
                    slot.len()
                )));
            }
            *slot = values;
        }
        seen.push(name);
    }
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after last block".into()));
    }
    for name in Trainable::BLOCK_NAMES {
        if !seen.iter().any(|s| s == name) {
            return Err(Error::Checkpoint(format!("missing block `{name}`")));
        }
    }
    let tokenizer = tokenizer.ok_or_else(|| Error::Checkpoint("missing tokenizer block".into()))?;
    if tokenizer != Tokenizer::seeded(&config) {
        return Err(Error::Checkpoint(
            "tokenizer does not match its seed".into(),
        ));
    }
    Ok(ModelParams::from_parts(config, tokenizer, trainable))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pnsw");
        let p = ModelParams::new(ModelConfig::default()).unwrap();
        save_checkpoint(&p, &path).unwrap();
        let back = load_checkpoint(&path, Some(p.config())).unwrap();
        assert_eq!(back, p);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"PNSW");
    }

    #[test]
    fn rejects_mismatched_config_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pnsw");
        let p = ModelParams::new(ModelConfig::default()).unwrap();
        save_checkpoint(&p, &path).unwrap();
        let other = ModelConfig {
            head_hidden: 8,
            ..ModelConfig::default()
        };
        assert!(matches!(
            load_checkpoint(&path, Some(&other)),
            Err(Error::Checkpoint(_))
        ));

        let mut bytes = std::fs::read(&path).unwrap();
        // flip encoder_hidden in the dims section
        bytes[6 + 5 * 4] ^= 1;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path, None),
            Err(Error::Checkpoint(_))
        ));

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_checkpoint(&path, None).is_err());
    }
}
