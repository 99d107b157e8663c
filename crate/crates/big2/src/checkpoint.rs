//! Binary checkpoint files.
//!
//! ```text
//! magic "BIG2CKPT" | format version u32 | metadata length u32 | metadata JSON
//! tensor count u32 | per tensor: name length u16, name, element count u32, f32 LE data
//! CRC-32 of everything before it, u32
//! ```
//!
//! All integers are little-endian.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use big2_core::adam::{Adam, AdamConfig};
use big2_core::net::{Network, NetworkShape, LAYER_NAMES};
use big2_core::{Hyperparameters, LAYOUT_VERSION};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"BIG2CKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint is truncated or its checksum does not match")]
    CorruptChecksum,
    #[error("unsupported {what} version {found} (expected {expected})")]
    FormatVersionMismatch {
        what: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeMeta {
    pub input: usize,
    pub shared: usize,
    pub head: usize,
    pub actions: usize,
}

impl From<NetworkShape> for ShapeMeta {
    fn from(s: NetworkShape) -> Self {
        ShapeMeta {
            input: s.input,
            shared: s.shared,
            head: s.head,
            actions: s.actions,
        }
    }
}

impl From<ShapeMeta> for NetworkShape {
    fn from(s: ShapeMeta) -> Self {
        NetworkShape {
            input: s.input,
            shared: s.shared,
            head: s.head,
            actions: s.actions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub encoder_layout_version: u32,
    pub precision: String,
    pub shape: ShapeMeta,
    /// Completed training updates.
    pub updates: u64,
    pub env_steps: u64,
    pub seed: u64,
    pub hyperparameters: Hyperparameters,
    /// Adam step counter when optimiser state is stored.
    pub adam_step: Option<u64>,
}

impl CheckpointMeta {
    pub fn new(shape: NetworkShape, hyperparameters: Hyperparameters, seed: u64) -> CheckpointMeta {
        CheckpointMeta {
            encoder_layout_version: LAYOUT_VERSION,
            precision: "f32".to_string(),
            shape: shape.into(),
            updates: 0,
            env_steps: 0,
            seed,
            hyperparameters,
            adam_step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub net: Network<f32>,
    pub optimizer: Option<Adam<f32>>,
}

fn tensor_names(prefix: &str) -> Vec<String> {
    LAYER_NAMES
        .iter()
        .flat_map(|l| [format!("{prefix}{l}.weight"), format!("{prefix}{l}.bias")])
        .collect()
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut meta = self.meta.clone();
        meta.adam_step = self.optimizer.as_ref().map(|a| a.step);
        meta.shape = self.net.shape.into();
        let json = serde_json::to_vec(&meta).expect("metadata serialises");

        let mut tensors: Vec<(String, &[f32])> = tensor_names("").into_iter().zip(self.net.tensors()).collect();
        if let Some(adam) = &self.optimizer {
            tensors.extend(tensor_names("adam.m.").into_iter().zip(adam.m.tensors()));
            tensors.extend(tensor_names("adam.v.").into_iter().zip(adam.v.tensors()));
        }

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, data) in tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(data.len() as u32).to_le_bytes());
            for x in data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
        if bytes.len() >= MAGIC.len() && &bytes[..MAGIC.len()] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < MAGIC.len() + 4 + 4 + 4 + 4 {
            return Err(CheckpointError::CorruptChecksum);
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(CheckpointError::CorruptChecksum);
        }

        let mut r = Reader {
            bytes: &body[MAGIC.len()..],
        };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::FormatVersionMismatch {
                what: "checkpoint format",
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let meta_len = r.u32()? as usize;
        let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| CheckpointError::Malformed(format!("metadata: {e}")))?;
        if meta.encoder_layout_version != LAYOUT_VERSION {
            return Err(CheckpointError::FormatVersionMismatch {
                what: "encoder layout",
                found: meta.encoder_layout_version,
                expected: LAYOUT_VERSION,
            });
        }
        if meta.precision != "f32" {
            return Err(CheckpointError::Malformed(format!("unsupported precision {}", meta.precision)));
        }

        let shape: NetworkShape = meta.shape.into();
        let mut net = Network::zeros(shape);
        let mut optimizer = meta.adam_step.map(|step| {
            let mut a = Adam::new(shape, AdamConfig::default());
            a.step = step;
            a
        });
        let count = r.u32()? as usize;
        let expected = if optimizer.is_some() { 30 } else { 10 };
        if count != expected {
            return Err(CheckpointError::Malformed(format!("{count} tensors, expected {expected}")));
        }
        let mut targets: Vec<(String, &mut Vec<f32>)> = tensor_names("").into_iter().zip(net.tensors_mut()).collect();
        if let Some(adam) = optimizer.as_mut() {
            let Adam { m, v, .. } = adam;
            targets.extend(tensor_names("adam.m.").into_iter().zip(m.tensors_mut()));
            targets.extend(tensor_names("adam.v.").into_iter().zip(v.tensors_mut()));
        }
        for (name, dest) in targets {
            let name_len = r.u16()? as usize;
            let found = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?;
            if found != name {
                return Err(CheckpointError::Malformed(format!("expected tensor {name}, found {found}")));
            }
            let n = r.u32()? as usize;
            if n != dest.len() {
                return Err(CheckpointError::Malformed(format!(
                    "tensor {name} has {n} values, expected {}",
                    dest.len()
                )));
            }
            let raw = r.take(4 * n)?;
            for (d, chunk) in dest.iter_mut().zip(raw.chunks_exact(4)) {
                *d = f32::from_le_bytes(chunk.try_into().unwrap());
            }
        }
        if !r.bytes.is_empty() {
            return Err(CheckpointError::Malformed("trailing bytes".into()));
        }
        if !net.is_finite() {
            return Err(CheckpointError::Malformed("non-finite parameters".into()));
        }
        Ok(Checkpoint { meta, net, optimizer })
    }

    /// Writes atomically via a temporary file in the same directory.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
        Checkpoint::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() < n {
            return Err(CheckpointError::Malformed("unexpected end of data".into()));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
